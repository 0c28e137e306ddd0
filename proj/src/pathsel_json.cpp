#include <json.hpp>

#include "taps/pathsel.hpp"

namespace taps {

using nlohmann::json;

namespace {

json slice_to_json(const AlphaSlice& a) {
    return {{"safe_unc", a.safe_unc},
            {"safe_comp", a.safe_comp},
            {"acc_unc", a.acc_unc},
            {"acc_comp", a.acc_comp},
            {"weight_frac", a.weight_frac}};
}

AlphaSlice slice_from_json(const json& j) {
    AlphaSlice a;
    a.safe_unc = j.value("safe_unc", a.safe_unc);
    a.safe_comp = j.value("safe_comp", a.safe_comp);
    a.acc_unc = j.value("acc_unc", a.acc_unc);
    a.acc_comp = j.value("acc_comp", a.acc_comp);
    a.weight_frac = j.value("weight_frac", a.weight_frac);
    return a;
}

}  // namespace

std::string path_params_to_json(const PathParams& p) {
    json j;
    switch (p.mode) {
        case SelectionMode::trustall: j["mode"] = "trustall"; break;
        case SelectionMode::trustone: j["mode"] = "trustone"; break;
        case SelectionMode::vanilla: j["mode"] = "vanilla"; break;
    }
    j["guard"] = slice_to_json(p.guard);
    j["exit"] = slice_to_json(p.exit);
    j["num_guards"] = p.num_guards;
    j["dirtiness_threshold_s"] = p.dirtiness_threshold_s;
    j["guard_absence_horizon_days"] = p.guard_absence_horizon_days;
    return j.dump();
}

PathParams path_params_from_json(const std::string& text) {
    json j = json::parse(text);
    PathParams p;
    if (j.is_string()) return PathParams::preset(j.get<std::string>());
    if (j.contains("preset")) p = PathParams::preset(j["preset"].get<std::string>());
    if (j.contains("mode")) {
        std::string mode = j["mode"].get<std::string>();
        if (mode == "trustall")
            p.mode = SelectionMode::trustall;
        else if (mode == "trustone")
            p.mode = SelectionMode::trustone;
        else if (mode == "vanilla")
            p.mode = SelectionMode::vanilla;
        else
            throw ConfigError("unknown selection mode: " + mode);
    }
    if (j.contains("guard")) p.guard = slice_from_json(j["guard"]);
    if (j.contains("exit")) p.exit = slice_from_json(j["exit"]);
    p.num_guards = j.value("num_guards", p.num_guards);
    p.dirtiness_threshold_s = j.value("dirtiness_threshold_s", p.dirtiness_threshold_s);
    p.guard_absence_horizon_days =
        j.value("guard_absence_horizon_days", p.guard_absence_horizon_days);
    p.validate();
    return p;
}

}  // namespace taps
