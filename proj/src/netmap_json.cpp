#include <json.hpp>

#include "taps/netmap.hpp"

namespace taps {

using nlohmann::json;

NetworkMap map_from_json(const std::string& text) {
    json j = json::parse(text);

    std::vector<Entity> entities;
    for (const auto& je : j.at("entities")) {
        Entity e;
        e.id = je.at("id").get<EntityId>();
        std::string kind = je.value("kind", "as_org");
        if (kind == "as_org")
            e.kind = EntityKind::as_org;
        else if (kind == "ixp_org")
            e.kind = EntityKind::ixp_org;
        else
            throw ConfigError("unknown entity kind: " + kind);
        e.country = je.value("country", "");
        entities.push_back(std::move(e));
    }

    std::vector<Location> locations;
    for (const auto& jl : j.at("locations")) {
        Location loc;
        loc.id = jl.at("id").get<LocationId>();
        loc.size = jl.value("size", 1ull);
        loc.owner = jl.at("owner").get<EntityId>();
        if (jl.contains("client_rank")) loc.client_rank = jl["client_rank"].get<std::uint32_t>();
        locations.push_back(loc);
    }

    VirtualLinkTable links;
    if (j.contains("links")) {
        for (const auto& jl : j["links"]) {
            std::vector<EntityId> transit;
            for (const auto& e : jl.at("entities")) transit.push_back(e.get<EntityId>());
            links.set_link(jl.at("a").get<LocationId>(), jl.at("b").get<LocationId>(),
                           std::move(transit));
        }
    }
    if (j.contains("procedural_links")) {
        const auto& jp = j["procedural_links"];
        links.procedural.enabled = true;
        links.procedural.seed = jp.value("seed", 0ull);
        links.procedural.mean_transit = jp.value("mean_transit", 0.0);
        links.procedural.max_transit = jp.value("max_transit", 16u);
    }

    std::vector<PrefixEntry> prefixes;
    if (j.contains("ip_index")) {
        for (const auto& jp : j["ip_index"]) {
            PrefixEntry pe;
            pe.prefix = parse_prefix(jp.at("prefix").get<std::string>());
            pe.location = jp.at("location").get<LocationId>();
            prefixes.push_back(pe);
        }
    }

    return NetworkMap(std::move(locations), std::move(entities), std::move(links),
                      std::move(prefixes));
}

std::string map_to_json(const NetworkMap& map) {
    json j;
    j["entities"] = json::array();
    for (const Entity& e : map.entities()) {
        json je;
        je["id"] = e.id;
        je["kind"] = e.kind == EntityKind::as_org ? "as_org" : "ixp_org";
        if (!e.country.empty()) je["country"] = e.country;
        j["entities"].push_back(std::move(je));
    }
    j["locations"] = json::array();
    for (const Location& loc : map.locations()) {
        json jl;
        jl["id"] = loc.id;
        jl["size"] = loc.size;
        jl["owner"] = loc.owner;
        if (loc.client_rank) jl["client_rank"] = *loc.client_rank;
        j["locations"].push_back(std::move(jl));
    }
    std::vector<std::uint64_t> keys;
    for (const auto& kv : map.links().raw()) keys.push_back(kv.first);
    std::sort(keys.begin(), keys.end());
    j["links"] = json::array();
    for (std::uint64_t k : keys) {
        json jl;
        jl["a"] = static_cast<LocationId>(k >> 32);
        jl["b"] = static_cast<LocationId>(k & 0xFFFFFFFFu);
        jl["entities"] = map.links().raw().at(k);
        j["links"].push_back(std::move(jl));
    }
    if (map.links().procedural.enabled) {
        const auto& p = map.links().procedural;
        j["procedural_links"] = {
            {"seed", p.seed}, {"mean_transit", p.mean_transit}, {"max_transit", p.max_transit}};
    }
    j["ip_index"] = json::array();
    for (const PrefixEntry& pe : map.ip_index()) {
        j["ip_index"].push_back(
            {{"prefix", format_prefix(pe.prefix)}, {"location", pe.location}});
    }
    return j.dump(2);
}

}  // namespace taps
