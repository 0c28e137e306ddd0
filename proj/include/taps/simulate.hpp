#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taps/cluster.hpp"
#include "taps/pathsel.hpp"
#include "taps/trust.hpp"

namespace taps {

// Monte Carlo engine: replay a stream schedule through the path selector
// against a consensus sequence, draw one adversary per sample, and evaluate
// first-last correlation per stream. Samples are independent seeded work
// units; parallelism never changes results.

struct StreamRequest {
    std::int64_t time_s = 0;
    std::uint32_t dst_ip = 0;
    std::uint16_t dst_port = 0;
};

struct BehaviorConfig {
    enum class Kind { typical, irc, custom };
    Kind kind = Kind::typical;
    std::uint32_t weekly_requests = 2632;
    std::uint32_t n_destinations = 205;
    std::vector<std::uint16_t> ports = {80, 443};
    std::uint32_t weeks = 1;
    std::uint64_t schedule_seed = 0;
    std::vector<StreamRequest> custom;  // offsets from start, kind == custom

    static BehaviorConfig typical_model();
    static BehaviorConfig irc_model();
};

// Deterministic synthetic schedule matching the configured aggregate shape:
// five daily sessions 9:00-18:00 for the typical model, weekday sessions
// 8:00-17:00 with a single destination for the IRC model. Exactly
// weekly_requests entries per week, times nondecreasing.
std::vector<StreamRequest> generate_schedule(const BehaviorConfig& cfg, const NetworkMap& map,
                                             std::int64_t start_s);

enum class StreamAction : std::uint8_t { reused = 0, spliced = 1, fresh = 2, skipped = 3 };

struct StreamOutcome {
    std::int64_t time_s = 0;
    LocationId dst_loc = 0;
    std::int32_t circuit = -1;  // index into SimSample::circuits, -1 when skipped
    StreamAction action = StreamAction::skipped;
    bool compromised = false;
};

struct CountriesSampleStats {
    std::uint32_t cross_country_streams = 0;      // client country != dst country
    std::uint32_t cross_country_compromised = 0;  // of those, compromised at all
    // countries that unnecessarily compromised at least one stream, with counts
    std::vector<std::pair<std::uint16_t, std::uint32_t>> unnecessary_by_country;
};

struct SimSample {
    std::uint64_t seed = 0;
    std::uint32_t n_streams = 0;
    std::uint32_t n_skipped = 0;
    std::uint32_t n_compromised = 0;
    std::int64_t first_compromise_s = -1;  // relative to schedule start; -1 = never
    AdversaryInstance adversary;           // single-adversary modes
    std::vector<Circuit> circuits;         // kept when keep_details
    std::vector<StreamOutcome> streams;    // kept when keep_details
    std::optional<CountriesSampleStats> countries;

    double compromised_fraction() const {
        std::uint32_t n = n_streams - n_skipped;
        return n == 0 ? 0.0 : static_cast<double>(n_compromised) / n;
    }
};

struct SimInputs {
    const NetworkMap* map = nullptr;
    const std::vector<RelayView>* views = nullptr;  // one per consensus, ascending
    const TrustPolicy* belief = nullptr;            // scoring policy
    // Exactly one of the two actual-adversary sources is set; belief-only
    // setups point actual_model at the belief's own model.
    const AdversaryModel* actual_model = nullptr;
    const CountriesPolicy* actual_countries = nullptr;
    const Clustering* client_clusters = nullptr;
    const Clustering* dest_clusters = nullptr;
    PathParams params;
    LocationId client_loc = 0;
    std::span<const StreamRequest> schedule;
    bool keep_details = false;

    void validate() const;
};

std::vector<RelayView> build_views(std::span<const Consensus> seq);

std::vector<SimSample> run_monte_carlo(const SimInputs& inputs, std::uint32_t n_samples,
                                       std::uint64_t base_seed, int workers = 1);

// First-last correlation for one stream: compromised iff the adversary
// observes both the client-guard link and the destination-exit link. The
// middle relay plays no role.
bool evaluate_first_last(const AdversaryInstance& adv, const NetworkMap& map,
                         LocationId client_loc, LocationId dst_loc, const Circuit& circuit);

// Fraction of cross-country streams unnecessarily compromised, per sample;
// absent when a sample has no cross-country streams.
std::vector<std::optional<double>> countries_unnecessary_fraction(
    std::span<const SimSample> samples);

struct CdfPoint {
    double value;
    double cum_prob;
};

struct MetricsReport {
    std::uint32_t n_samples = 0;
    double compromise_probability = 0.0;  // P(at least one compromised stream)
    double mean_fraction = 0.0;
    double median_fraction = 0.0;
    std::vector<CdfPoint> ttfc_cdf_days;  // plateaus below 1 when some samples never compromise
    std::vector<CdfPoint> fraction_cdf;
    bool has_countries = false;
    std::vector<CdfPoint> unnecessary_fraction_cdf;
    std::vector<CdfPoint> unnecessary_country_count_cdf;
    std::vector<std::pair<std::uint16_t, std::uint64_t>> per_country_unnecessary;
};

MetricsReport compute_report(std::span<const SimSample> samples);

// Serialization used by the CLI: one CSV row per sample plus a JSON report.
std::string samples_to_csv(std::span<const SimSample> samples, const std::string& policy_name,
                           const std::string& mode_name, const std::string& config_hash);
std::string report_to_json(const MetricsReport& report, const std::string& config_hash,
                           std::span<const std::string> country_names);

// 95% percentile bootstrap CI of the mean of `values`.
struct BootstrapCi {
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};
BootstrapCi bootstrap_mean_ci(std::span<const double> values, std::uint32_t resamples,
                              std::uint64_t seed);

}  // namespace taps
