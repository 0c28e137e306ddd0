#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "taps/common.hpp"
#include "taps/netmap.hpp"

namespace taps {

// Relay and consensus model. Consensuses are time-stamped snapshots of the
// relay population; the uptime tracker turns a consensus sequence into
// per-relay presence averages that feed family compromise probabilities.

enum RelayFlag : std::uint8_t {
    kFlagRunning = 0x01,
    kFlagFast = 0x02,
    kFlagValid = 0x04,
    kFlagGuard = 0x08,
    kFlagExit = 0x10,
};

struct ExitPolicyRule {
    bool accept = false;
    IpPrefix prefix;  // len 0 matches every address
    std::uint16_t port_lo = 1;
    std::uint16_t port_hi = 65535;
};

struct Relay {
    std::string fingerprint;
    LocationId location = 0;
    std::uint8_t flags = 0;
    double weight = 0.0;
    std::optional<FamilyId> family;
    std::uint32_t subnet16 = 0;  // /16 tag for vanilla-compatible exclusion
    std::vector<ExitPolicyRule> exit_policy;  // empty = accept all

    bool has(std::uint8_t f) const { return (flags & f) == f; }
    bool eligible() const { return has(kFlagRunning | kFlagFast | kFlagValid); }
};

struct Consensus {
    std::int64_t timestamp_hours = 0;  // epoch hours
    std::vector<Relay> relays;
};

enum class Position { guard, middle, exit };

// First matching rule decides; no match accepts.
bool exit_policy_allows(const Relay& relay, std::uint32_t addr, std::uint16_t port);

// Weight the relay contributes when considered for the position: its
// consensus weight if it holds the position's flag (middle has none), else 0.
double positional_weight(const Relay& relay, Position pos);

// Exponentially weighted presence with a 30-day half-life. One update per
// consensus: uptime <- lambda * uptime + (1 - lambda) * gap_days * present,
// lambda = 2^(-gap_days / 30), present iff flags include Running|Fast|Valid.
// Relays absent from the consensus decay with present = 0. The first
// consensus processed is treated as following a one-hour gap.
class FamilyUptimeTracker {
  public:
    void update(const Consensus& consensus);

    double relay_uptime(const std::string& fingerprint) const {
        auto it = uptime_.find(fingerprint);
        return it == uptime_.end() ? 0.0 : it->second;
    }
    const std::unordered_map<std::string, double>& relay_uptimes() const { return uptime_; }
    std::optional<std::int64_t> last_timestamp() const { return last_ts_; }

  private:
    std::optional<std::int64_t> last_ts_;
    std::unordered_map<std::string, double> uptime_;
};

// Family compromise probability for The Man: (0.1-0.02)/(t_f+1) + 0.02,
// t_f in days summed over the family's members.
double family_compromise_probability(double family_uptime_days);

struct SyntheticConsensusSpec {
    std::uint32_t n_relays = 0;
    std::uint32_t n_consensuses = 0;   // hourly cadence
    std::int64_t start_hour = 400000;  // epoch hours
    std::uint32_t n_relay_locations = 0;  // locations used, ids 0..n-1 of the map
    double guard_fraction = 0.4;
    double exit_fraction = 0.4;
    double churn_per_hour = 0.005;  // Bernoulli presence flip rate
    double birth_per_hour = 0.0;    // expected new relays per consensus
    double family_fraction = 0.3;   // relays placed in nontrivial families
    std::uint32_t mean_family_size = 3;
    std::uint32_t restricted_exit_percent = 30;  // exits with port-restricted policies
};

std::vector<Consensus> generate_synthetic_consensuses(const SyntheticConsensusSpec& spec,
                                                      const NetworkMap& map,
                                                      std::uint64_t seed);

// JSON-lines, one consensus object per line.
std::vector<Consensus> consensuses_from_jsonl(const std::string& text);
std::string consensuses_to_jsonl(const std::vector<Consensus>& seq);

}  // namespace taps
