#include "taps/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace taps {

BehaviorConfig BehaviorConfig::typical_model() {
    BehaviorConfig cfg;
    cfg.kind = Kind::typical;
    cfg.weekly_requests = 2632;
    cfg.n_destinations = 205;
    cfg.ports = {80, 443};
    return cfg;
}

BehaviorConfig BehaviorConfig::irc_model() {
    BehaviorConfig cfg;
    cfg.kind = Kind::irc;
    cfg.weekly_requests = 135;
    cfg.n_destinations = 1;
    cfg.ports = {6697};
    return cfg;
}

namespace {

// n split into k parts differing by at most one, larger parts first.
std::vector<std::uint32_t> split_evenly(std::uint32_t n, std::uint32_t k) {
    std::vector<std::uint32_t> parts(k, n / k);
    for (std::uint32_t i = 0; i < n % k; ++i) ++parts[i];
    return parts;
}

}  // namespace

std::vector<StreamRequest> generate_schedule(const BehaviorConfig& cfg, const NetworkMap& map,
                                             std::int64_t start_s) {
    if (cfg.kind == BehaviorConfig::Kind::custom) {
        std::vector<StreamRequest> out = cfg.custom;
        for (StreamRequest& r : out) r.time_s += start_s;
        for (std::size_t i = 1; i < out.size(); ++i)
            if (out[i].time_s < out[i - 1].time_s)
                throw ConfigError("custom schedule times must be nondecreasing");
        return out;
    }
    if (cfg.weekly_requests == 0) return {};
    if (cfg.n_destinations == 0) throw ConfigError("behavior: n_destinations must be > 0");
    if (cfg.ports.empty()) throw ConfigError("behavior: no ports configured");

    Rng rng(derive_seed(cfg.schedule_seed, 0xBE4A));

    // Destination pool drawn from locations with mapped prefixes.
    std::vector<std::uint32_t> pool;
    {
        std::vector<const PrefixEntry*> prefixes;
        for (const PrefixEntry& pe : map.ip_index()) prefixes.push_back(&pe);
        if (prefixes.empty()) throw ConfigError("behavior: map has no ip prefixes");
        std::unordered_map<LocationId, bool> used;
        std::uint32_t guard_iters = 0;
        while (pool.size() < cfg.n_destinations) {
            const PrefixEntry* pe = prefixes[rng.below(prefixes.size())];
            if (used.count(pe->location) && ++guard_iters < 16 * cfg.n_destinations &&
                used.size() < prefixes.size())
                continue;
            used[pe->location] = true;
            pool.push_back(pe->prefix.bits + 1);
        }
    }

    const bool weekdays_only = cfg.kind == BehaviorConfig::Kind::irc;
    const std::uint32_t days_per_week = weekdays_only ? 5 : 7;
    const std::uint32_t sessions_per_day = 5;
    const double session_start_h = weekdays_only ? 8.0 : 9.0;
    const double session_end_h = weekdays_only ? 17.0 : 18.0;

    std::vector<StreamRequest> out;
    out.reserve(static_cast<std::size_t>(cfg.weekly_requests) * cfg.weeks);
    for (std::uint32_t week = 0; week < cfg.weeks; ++week) {
        std::vector<std::uint32_t> per_day = split_evenly(cfg.weekly_requests, days_per_week);
        for (std::uint32_t day = 0; day < days_per_week; ++day) {
            // day 0 of each week is a Monday by convention
            std::int64_t day_start =
                start_s + (static_cast<std::int64_t>(week) * 7 + day) * 86400;
            std::vector<std::uint32_t> per_session =
                split_evenly(per_day[day], sessions_per_day);
            double window_h = (session_end_h - session_start_h) / sessions_per_day;
            for (std::uint32_t s = 0; s < sessions_per_day; ++s) {
                double sess_start = session_start_h + s * window_h;
                std::uint32_t count = per_session[s];
                if (count == 0) continue;
                double slot = window_h * 3600.0 / count;
                for (std::uint32_t i = 0; i < count; ++i) {
                    StreamRequest req;
                    req.time_s = day_start + static_cast<std::int64_t>(
                                                 sess_start * 3600.0 + i * slot +
                                                 rng.next_unit() * slot);
                    req.dst_ip = pool[rng.below(pool.size())];
                    req.dst_port = cfg.ports[rng.below(cfg.ports.size())];
                    out.push_back(req);
                }
            }
        }
    }
    return out;
}

void SimInputs::validate() const {
    if (!map || !views || !belief || !client_clusters || !dest_clusters)
        throw ConfigError("simulation inputs incomplete");
    if ((actual_model == nullptr) == (actual_countries == nullptr))
        throw ConfigError("exactly one actual adversary source must be set");
    if (views->empty()) throw ConfigError("no consensuses");
    if (schedule.empty()) throw ConfigError("empty schedule");
    std::int64_t span_lo = views->front().timestamp_hours * 3600;
    std::int64_t span_hi = (views->back().timestamp_hours + 1) * 3600;
    if (schedule.front().time_s < span_lo || schedule.back().time_s >= span_hi)
        throw ConfigError("schedule extends outside the consensus span");
    params.validate();
    if (!map->has_location(client_loc)) throw ConfigError("unknown client location");
}

std::vector<RelayView> build_views(std::span<const Consensus> seq) {
    std::vector<RelayView> views;
    views.reserve(seq.size());
    std::int64_t prev = std::numeric_limits<std::int64_t>::min();
    for (const Consensus& c : seq) {
        if (c.timestamp_hours <= prev)
            throw OrderingError("consensus timestamps must be strictly increasing");
        prev = c.timestamp_hours;
        views.push_back(RelayView::build(c));
    }
    return views;
}

bool evaluate_first_last(const AdversaryInstance& adv, const NetworkMap& map,
                         LocationId client_loc, LocationId dst_loc, const Circuit& circuit) {
    Relay guard;
    guard.fingerprint = circuit.guard_fp;
    guard.location = circuit.guard_loc;
    guard.family = circuit.guard_family;
    if (!observes_entry(adv, map, client_loc, guard)) return false;
    Relay exit;
    exit.fingerprint = circuit.exit_fp;
    exit.location = circuit.exit_loc;
    exit.family = circuit.exit_family;
    return observes_exit(adv, map, dst_loc, exit);
}

namespace {

const RelayView& view_at(const std::vector<RelayView>& views, std::int64_t t_s) {
    std::int64_t t_h = t_s / 3600;
    std::size_t lo = 0, hi = views.size();
    while (lo + 1 < hi) {
        std::size_t mid = (lo + hi) / 2;
        if (views[mid].timestamp_hours <= t_h)
            lo = mid;
        else
            hi = mid;
    }
    return views[lo];
}

// Countries evaluation context: per-stream compromising countries come from
// the intersection of entry-side and exit-side country sets. Link country
// sets are cached per (location, relay location).
class CountriesEval {
  public:
    explicit CountriesEval(const CountriesPolicy& policy) : policy_(&policy) {}

    const std::vector<bool>& side_countries(LocationId loc, LocationId relay_loc,
                                            int relay_country) {
        std::uint64_t key = VirtualLinkTable::key(loc, relay_loc) ^
                            (static_cast<std::uint64_t>(relay_country + 1) << 48);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        std::vector<bool> set = policy_->link_countries(loc, relay_loc);
        if (relay_country >= 0) set[static_cast<std::size_t>(relay_country)] = true;
        return cache_.emplace(key, std::move(set)).first->second;
    }

    std::vector<std::uint16_t> compromising(const NetworkMap& map, LocationId client_loc,
                                            LocationId dst_loc, const Circuit& c) {
        Relay guard;
        guard.location = c.guard_loc;
        Relay exit;
        exit.location = c.exit_loc;
        const auto& entry =
            side_countries(client_loc, c.guard_loc, policy_->relay_country(guard));
        const auto& exitside = side_countries(dst_loc, c.exit_loc, policy_->relay_country(exit));
        std::vector<std::uint16_t> out;
        for (std::size_t i = 0; i < entry.size(); ++i)
            if (entry[i] && exitside[i]) out.push_back(static_cast<std::uint16_t>(i));
        (void)map;
        return out;
    }

  private:
    const CountriesPolicy* policy_;
    std::unordered_map<std::uint64_t, std::vector<bool>> cache_;
};

SimSample run_one_sample(const SimInputs& in, std::uint32_t index, std::uint64_t base_seed) {
    SimSample sample;
    sample.seed = derive_seed(base_seed, index);

    Rng adv_rng(derive_seed(sample.seed, 0xAD));
    std::optional<CountriesEval> countries_eval;
    if (in.actual_model) {
        sample.adversary = in.actual_model->sample(adv_rng);
    } else {
        countries_eval.emplace(*in.actual_countries);
        sample.countries.emplace();
    }

    ClientSession session(*in.map, *in.belief, *in.client_clusters, *in.dest_clusters, in.params,
                          in.client_loc, derive_seed(sample.seed, 0x5E55));

    const std::int64_t t0 = in.schedule.front().time_s;
    std::string client_country;
    if (in.actual_countries) {
        int c = in.actual_countries->entity_country(in.map->owner_of(in.client_loc));
        client_country = c >= 0 ? in.actual_countries->countries()[static_cast<std::size_t>(c)]
                                : std::string();
    }
    std::unordered_map<std::uint16_t, std::uint32_t> unnecessary_counts;

    for (const StreamRequest& req : in.schedule) {
        ++sample.n_streams;
        StreamOutcome outcome;
        outcome.time_s = req.time_s;
        const RelayView& view = view_at(*in.views, req.time_s);
        try {
            ConnectResult res = session.connect(view, req.dst_ip, req.dst_port, req.time_s);
            outcome.dst_loc = in.map->ip_to_location(req.dst_ip);
            outcome.circuit = static_cast<std::int32_t>(res.circuit_index);
            switch (res.action) {
                case ConnectAction::reused: outcome.action = StreamAction::reused; break;
                case ConnectAction::spliced: outcome.action = StreamAction::spliced; break;
                case ConnectAction::fresh: outcome.action = StreamAction::fresh; break;
            }
        } catch (const UnmappedAddressError&) {
            ++sample.n_skipped;
            if (in.keep_details) sample.streams.push_back(outcome);
            continue;
        } catch (const SelectionError&) {
            ++sample.n_skipped;
            if (in.keep_details) sample.streams.push_back(outcome);
            continue;
        }

        const Circuit& circuit =
            session.circuit_log()[static_cast<std::size_t>(outcome.circuit)];
        if (in.actual_model) {
            outcome.compromised = evaluate_first_last(sample.adversary, *in.map, in.client_loc,
                                                      outcome.dst_loc, circuit);
        } else {
            std::vector<std::uint16_t> comp =
                countries_eval->compromising(*in.map, in.client_loc, outcome.dst_loc, circuit);
            outcome.compromised = !comp.empty();

            std::string dst_country;
            int dc = in.actual_countries->entity_country(in.map->owner_of(outcome.dst_loc));
            if (dc >= 0)
                dst_country = in.actual_countries->countries()[static_cast<std::size_t>(dc)];
            bool cross_country = dst_country != client_country;
            if (cross_country) {
                ++sample.countries->cross_country_streams;
                if (outcome.compromised) ++sample.countries->cross_country_compromised;
            }
            for (std::uint16_t c : comp) {
                const std::string& cname =
                    in.actual_countries->countries()[static_cast<std::size_t>(c)];
                bool contains_both = cname == client_country && cname == dst_country;
                if (!contains_both) ++unnecessary_counts[c];
            }
        }
        if (outcome.compromised) {
            ++sample.n_compromised;
            if (sample.first_compromise_s < 0) sample.first_compromise_s = req.time_s - t0;
        }
        if (in.keep_details) sample.streams.push_back(outcome);
    }

    if (sample.countries) {
        for (const auto& [c, n] : unnecessary_counts)
            sample.countries->unnecessary_by_country.emplace_back(c, n);
        std::sort(sample.countries->unnecessary_by_country.begin(),
                  sample.countries->unnecessary_by_country.end());
    }
    if (in.keep_details) sample.circuits = session.circuit_log();
    return sample;
}

}  // namespace

std::vector<SimSample> run_monte_carlo(const SimInputs& inputs, std::uint32_t n_samples,
                                       std::uint64_t base_seed, int workers) {
    inputs.validate();
    std::vector<SimSample> samples(n_samples);
    if (n_samples == 0) return samples;

    workers = std::max(1, workers);
    if (workers == 1) {
        for (std::uint32_t i = 0; i < n_samples; ++i)
            samples[i] = run_one_sample(inputs, i, base_seed);
        return samples;
    }
    std::vector<std::thread> pool;
    std::atomic<std::uint32_t> next{0};
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                std::uint32_t i = next.fetch_add(1);
                if (i >= n_samples) return;
                samples[i] = run_one_sample(inputs, i, base_seed);
            }
        });
    }
    for (std::thread& t : pool) t.join();
    return samples;
}

std::vector<std::optional<double>> countries_unnecessary_fraction(
    std::span<const SimSample> samples) {
    std::vector<std::optional<double>> out;
    out.reserve(samples.size());
    for (const SimSample& s : samples) {
        if (!s.countries || s.countries->cross_country_streams == 0) {
            out.emplace_back(std::nullopt);
            continue;
        }
        out.emplace_back(static_cast<double>(s.countries->cross_country_compromised) /
                         s.countries->cross_country_streams);
    }
    return out;
}

namespace {

std::vector<CdfPoint> empirical_cdf(std::vector<double> values, std::size_t denominator) {
    std::vector<CdfPoint> out;
    if (denominator == 0) return out;
    std::sort(values.begin(), values.end());
    std::size_t i = 0;
    while (i < values.size()) {
        std::size_t j = i;
        while (j < values.size() && values[j] == values[i]) ++j;
        out.push_back({values[i], static_cast<double>(j) / denominator});
        i = j;
    }
    return out;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

MetricsReport compute_report(std::span<const SimSample> samples) {
    if (samples.empty()) throw ArgumentError("compute_report: no samples");
    MetricsReport rep;
    rep.n_samples = static_cast<std::uint32_t>(samples.size());

    std::vector<double> ttfc_days;
    std::vector<double> fractions;
    std::uint32_t n_compromised_samples = 0;
    for (const SimSample& s : samples) {
        fractions.push_back(s.compromised_fraction());
        if (s.first_compromise_s >= 0) {
            ++n_compromised_samples;
            ttfc_days.push_back(static_cast<double>(s.first_compromise_s) / 86400.0);
        }
    }
    rep.compromise_probability = static_cast<double>(n_compromised_samples) / samples.size();
    double sum = 0.0;
    for (double f : fractions) sum += f;
    rep.mean_fraction = sum / fractions.size();
    rep.median_fraction = median_of(fractions);
    // Samples that never compromise sit beyond the horizon: the TTFC CDF
    // plateaus at compromise_probability.
    rep.ttfc_cdf_days = empirical_cdf(std::move(ttfc_days), samples.size());
    rep.fraction_cdf = empirical_cdf(std::move(fractions), samples.size());

    bool any_countries = false;
    for (const SimSample& s : samples) any_countries = any_countries || s.countries.has_value();
    if (any_countries) {
        rep.has_countries = true;
        std::vector<double> unnecessary;
        std::vector<double> country_counts;
        std::unordered_map<std::uint16_t, std::uint64_t> totals;
        for (const SimSample& s : samples) {
            if (!s.countries) continue;
            if (s.countries->cross_country_streams > 0)
                unnecessary.push_back(
                    static_cast<double>(s.countries->cross_country_compromised) /
                    s.countries->cross_country_streams);
            country_counts.push_back(
                static_cast<double>(s.countries->unnecessary_by_country.size()));
            for (const auto& [c, n] : s.countries->unnecessary_by_country) totals[c] += n;
        }
        rep.unnecessary_fraction_cdf =
            empirical_cdf(std::move(unnecessary), unnecessary.size());
        rep.unnecessary_country_count_cdf =
            empirical_cdf(std::move(country_counts), country_counts.size());
        for (const auto& [c, n] : totals) rep.per_country_unnecessary.emplace_back(c, n);
        std::sort(rep.per_country_unnecessary.begin(), rep.per_country_unnecessary.end());
    }
    return rep;
}

BootstrapCi bootstrap_mean_ci(std::span<const double> values, std::uint32_t resamples,
                              std::uint64_t seed) {
    if (values.empty()) throw ArgumentError("bootstrap: no values");
    BootstrapCi ci;
    double sum = 0.0;
    for (double v : values) sum += v;
    ci.mean = sum / values.size();

    Rng rng(derive_seed(seed, 0xB005));
    std::vector<double> means(resamples);
    for (std::uint32_t r = 0; r < resamples; ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) s += values[rng.below(values.size())];
        means[r] = s / values.size();
    }
    std::sort(means.begin(), means.end());
    auto quantile = [&](double q) {
        double pos = q * (means.size() - 1);
        std::size_t lo = static_cast<std::size_t>(pos);
        std::size_t hi = std::min(lo + 1, means.size() - 1);
        double frac = pos - lo;
        return means[lo] * (1 - frac) + means[hi] * frac;
    };
    ci.lo = quantile(0.025);
    ci.hi = quantile(0.975);
    return ci;
}

}  // namespace taps
