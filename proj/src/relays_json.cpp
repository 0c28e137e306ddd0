#include <json.hpp>
#include <sstream>

#include "taps/relays.hpp"

namespace taps {

using nlohmann::json;

namespace {

const std::pair<const char*, RelayFlag> kFlagNames[] = {
    {"running", kFlagRunning}, {"fast", kFlagFast},   {"valid", kFlagValid},
    {"guard", kFlagGuard},     {"exit", kFlagExit},
};

Relay relay_from_json(const json& jr) {
    Relay r;
    r.fingerprint = jr.at("fp").get<std::string>();
    r.location = jr.at("loc").get<LocationId>();
    for (const auto& f : jr.at("flags")) {
        std::string name = f.get<std::string>();
        bool known = false;
        for (const auto& [n, bit] : kFlagNames)
            if (name == n) {
                r.flags |= bit;
                known = true;
            }
        if (!known) throw ConfigError("unknown relay flag: " + name);
    }
    r.weight = jr.at("weight").get<double>();
    if (r.weight < 0) throw ConfigError("relay weight must be >= 0");
    if (jr.contains("family")) r.family = jr["family"].get<FamilyId>();
    r.subnet16 = jr.value("subnet16", 0u);
    if (jr.contains("exit_policy")) {
        for (const auto& jp : jr["exit_policy"]) {
            ExitPolicyRule rule;
            rule.accept = jp.at("accept").get<bool>();
            if (jp.contains("prefix")) rule.prefix = parse_prefix(jp["prefix"].get<std::string>());
            rule.port_lo = jp.value("port_lo", 1);
            rule.port_hi = jp.value("port_hi", 65535);
            r.exit_policy.push_back(rule);
        }
    }
    return r;
}

json relay_to_json(const Relay& r) {
    json jr;
    jr["fp"] = r.fingerprint;
    jr["loc"] = r.location;
    jr["flags"] = json::array();
    for (const auto& [n, bit] : kFlagNames)
        if (r.flags & bit) jr["flags"].push_back(n);
    jr["weight"] = r.weight;
    if (r.family) jr["family"] = *r.family;
    if (r.subnet16) jr["subnet16"] = r.subnet16;
    if (!r.exit_policy.empty()) {
        jr["exit_policy"] = json::array();
        for (const ExitPolicyRule& rule : r.exit_policy) {
            json jp;
            jp["accept"] = rule.accept;
            if (rule.prefix.len) jp["prefix"] = format_prefix(rule.prefix);
            jp["port_lo"] = rule.port_lo;
            jp["port_hi"] = rule.port_hi;
            jr["exit_policy"].push_back(std::move(jp));
        }
    }
    return jr;
}

}  // namespace

std::vector<Consensus> consensuses_from_jsonl(const std::string& text) {
    std::vector<Consensus> out;
    std::istringstream in(text);
    std::string line;
    std::int64_t prev_ts = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        Consensus c;
        c.timestamp_hours = j.at("timestamp").get<std::int64_t>();
        if (!out.empty() && c.timestamp_hours <= prev_ts)
            throw OrderingError("consensus timestamps must be strictly increasing");
        prev_ts = c.timestamp_hours;
        for (const auto& jr : j.at("relays")) c.relays.push_back(relay_from_json(jr));
        out.push_back(std::move(c));
    }
    return out;
}

std::string consensuses_to_jsonl(const std::vector<Consensus>& seq) {
    std::string out;
    for (const Consensus& c : seq) {
        json j;
        j["timestamp"] = c.timestamp_hours;
        j["relays"] = json::array();
        for (const Relay& r : c.relays) j["relays"].push_back(relay_to_json(r));
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace taps
