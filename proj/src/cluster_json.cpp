#include <json.hpp>

#include "taps/cluster.hpp"

namespace taps {

using nlohmann::json;

std::string clustering_to_json(const Clustering& c) {
    json j;
    j["kind"] = c.kind == ClusterKind::client ? "client" : "destination";
    j["representatives"] = c.representatives;
    json assign = json::array();
    std::vector<LocationId> locs;
    locs.reserve(c.assignment.size());
    for (const auto& kv : c.assignment) locs.push_back(kv.first);
    std::sort(locs.begin(), locs.end());
    for (LocationId loc : locs) assign.push_back({loc, c.assignment.at(loc)});
    j["assignment"] = std::move(assign);
    j["seed_order"] = c.seed_order;
    j["round_representatives"] = c.round_representatives;
    json log = json::array();
    for (const auto& e : c.assignment_log) log.push_back({e.location, e.representative});
    j["assignment_log"] = std::move(log);
    j["provenance"] = {{"map_hash", c.map_hash}, {"policy_hash", c.policy_hash}, {"seed", c.seed}};
    return j.dump();
}

Clustering clustering_from_json(const std::string& text) {
    json j = json::parse(text);
    Clustering c;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "client")
        c.kind = ClusterKind::client;
    else if (kind == "destination")
        c.kind = ClusterKind::destination;
    else
        throw ConfigError("unknown clustering kind: " + kind);
    c.representatives = j.at("representatives").get<std::vector<LocationId>>();
    for (const auto& pair : j.at("assignment"))
        c.assignment[pair.at(0).get<LocationId>()] = pair.at(1).get<LocationId>();
    if (j.contains("seed_order")) c.seed_order = j["seed_order"].get<std::vector<LocationId>>();
    if (j.contains("round_representatives"))
        c.round_representatives = j["round_representatives"].get<std::vector<LocationId>>();
    if (j.contains("assignment_log"))
        for (const auto& pair : j["assignment_log"])
            c.assignment_log.push_back(
                {pair.at(0).get<LocationId>(), pair.at(1).get<LocationId>()});
    if (j.contains("provenance")) {
        c.map_hash = j["provenance"].value("map_hash", "");
        c.policy_hash = j["provenance"].value("policy_hash", "");
        c.seed = j["provenance"].value("seed", 0ull);
    }
    return c;
}

}  // namespace taps
