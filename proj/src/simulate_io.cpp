#include <json.hpp>

#include <cinttypes>
#include <cstdio>

#include "taps/simulate.hpp"

namespace taps {

using nlohmann::json;

std::string samples_to_csv(std::span<const SimSample> samples, const std::string& policy_name,
                           const std::string& mode_name, const std::string& config_hash) {
    std::string out;
    out += "# taps-results v1 config=" + config_hash + "\n";
    out += "seed,ttfc_seconds,n_streams,n_compromised,fraction,policy,mode\n";
    char buf[256];
    for (const SimSample& s : samples) {
        std::string ttfc =
            s.first_compromise_s < 0 ? "inf" : std::to_string(s.first_compromise_s);
        std::snprintf(buf, sizeof buf, "%" PRIu64 ",%s,%u,%u,%.9g,%s,%s\n", s.seed, ttfc.c_str(),
                      s.n_streams, s.n_compromised, s.compromised_fraction(),
                      policy_name.c_str(), mode_name.c_str());
        out += buf;
    }
    return out;
}

namespace {

json cdf_to_json(const std::vector<CdfPoint>& cdf) {
    json j = json::array();
    for (const CdfPoint& p : cdf) j.push_back({p.value, p.cum_prob});
    return j;
}

}  // namespace

std::string report_to_json(const MetricsReport& report, const std::string& config_hash,
                           std::span<const std::string> country_names) {
    json j;
    j["config"] = config_hash;
    j["n_samples"] = report.n_samples;
    j["compromise_probability"] = report.compromise_probability;
    j["mean_fraction"] = report.mean_fraction;
    j["median_fraction"] = report.median_fraction;
    j["ttfc_cdf_days"] = cdf_to_json(report.ttfc_cdf_days);
    j["fraction_cdf"] = cdf_to_json(report.fraction_cdf);
    if (report.has_countries) {
        json jc;
        jc["unnecessary_fraction_cdf"] = cdf_to_json(report.unnecessary_fraction_cdf);
        jc["unnecessary_country_count_cdf"] = cdf_to_json(report.unnecessary_country_count_cdf);
        json per = json::array();
        for (const auto& [c, n] : report.per_country_unnecessary) {
            std::string name = c < country_names.size() ? country_names[c] : std::to_string(c);
            per.push_back({name, n});
        }
        jc["per_country_unnecessary"] = std::move(per);
        j["countries"] = std::move(jc);
    }
    return j.dump(2);
}

}  // namespace taps
