#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "taps/netmap.hpp"
#include "taps/pathsel.hpp"
#include "taps/rng.hpp"

namespace taps {

// Destination-aware baseline selection and the attacks it enables. The
// baseline picks guard-exit pairs so that no entity appears on both the
// client side and the destination side; when that is impossible it draws
// from the distribution minimizing the worst single entity's both-sides
// probability. Because the choice depends on the client's location, an
// adversary steering destinations learns the location over time.

struct InconsistentObservationError : Error {
    using Error::Error;
};

// min t  s.t.  sum_{p: a in exposure(p)} x_p <= t  for every entity a,
//              sum x = 1, x >= 0.
// The dual game (max over entity mixtures of the min pair mass) is solved
// alongside to certify optimality.
struct MinimaxSolution {
    std::vector<double> x;
    double value = 0.0;         // optimal t
    double duality_gap = 0.0;   // |primal - dual|
    double max_violation = 0.0; // feasibility residual of x
};
MinimaxSolution solve_minimax(const std::vector<std::vector<std::uint64_t>>& exposures);

struct GuardExitPair {
    std::uint32_t guard_idx;
    std::uint32_t exit_idx;
};

// Selection distribution over guard-exit pairs for one destination: the
// bandwidth-weighted disjoint branch when any pair is clean, otherwise the
// minimax distribution.
struct PairModel {
    std::vector<GuardExitPair> pairs;
    std::vector<double> probability;
    bool used_lp = false;

    // marginal probability of each exit index
    std::unordered_map<std::uint32_t, double> exit_marginal() const;
};

PairModel baseline_pair_model(const NetworkMap& map, const RelayView& view,
                              LocationId client_loc, std::span<const std::uint32_t> guard_set,
                              LocationId dst_loc, std::uint32_t dst_ip, std::uint16_t dst_port);

class BaselineSelector {
  public:
    BaselineSelector(const NetworkMap& map, const RelayView& view, LocationId client_loc,
                     int n_guards, std::uint64_t seed);

    struct Choice {
        std::uint32_t guard_idx;
        std::uint32_t exit_idx;
        bool fresh_circuit;
    };
    // Circuits are cached per destination location; a cached pair is reused
    // unless its exit's policy rejects the new port.
    Choice select(LocationId dst_loc, std::uint32_t dst_ip, std::uint16_t dst_port);

    const std::vector<std::uint32_t>& guard_set() const { return guards_; }
    const RelayView& view() const { return *view_; }
    Rng& rng() { return rng_; }

  private:
    const NetworkMap* map_;
    const RelayView* view_;
    LocationId client_loc_;
    Rng rng_;
    std::vector<std::uint32_t> guards_;
    std::unordered_map<LocationId, GuardExitPair> cache_;
};

// Replays n adversary-chosen destination connections through the baseline.
// A guard is observed whenever an adversary-run relay lands in the middle
// position of a fresh circuit; exits are observed at every (malicious)
// destination.
struct AttackOutcome {
    std::vector<std::uint32_t> guard_set;
    std::vector<bool> guard_observed;  // parallel to guard_set
    struct ExitObservation {
        LocationId dst_loc;
        std::uint32_t dst_ip;
        std::uint16_t dst_port;
        std::uint32_t exit_idx;
    };
    std::vector<ExitObservation> exits;  // one per distinct destination

    std::size_t observed_count() const {
        std::size_t n = 0;
        for (bool b : guard_observed) n += b ? 1 : 0;
        return n;
    }
};

AttackOutcome chosen_destination_attack(const NetworkMap& map, const RelayView& view,
                                        BaselineSelector& baseline,
                                        std::uint32_t n_destinations,
                                        const std::unordered_set<std::string>& adversary_middles,
                                        Rng& rng);

// Adversary's Bayesian posterior over candidate client locations given the
// observed guard set and exit sequence. Exit likelihoods come from the
// exact per-destination pair distributions; the guard-set likelihood is
// location-independent under the baseline's bandwidth-weighted guard choice
// and cancels.
class PosteriorState {
  public:
    PosteriorState(std::vector<LocationId> candidates, std::vector<double> prior = {});

    void observe_exit(const NetworkMap& map, const RelayView& view,
                      std::span<const std::uint32_t> guard_set,
                      const AttackOutcome::ExitObservation& obs);

    // Normalized posterior; throws InconsistentObservationError when every
    // candidate has likelihood zero.
    std::vector<double> posterior() const;
    double entropy_bits() const;
    const std::vector<LocationId>& candidates() const { return candidates_; }

  private:
    std::vector<LocationId> candidates_;
    std::vector<double> log_weight_;
    std::vector<bool> dead_;
};

// Classification of a linked visit (ordered stream list) against a single
// entity adversary: direct when some entity sits on both sides of one
// stream, cross_only when an entity sees the first stream's exit side and
// some stream's entry side without ever being in a direct position.
enum class VisitVulnerability { direct, cross_only, safe };

struct VisitStream {
    std::uint32_t dst_ip;
    std::uint16_t dst_port;
};

VisitVulnerability cross_circuit_vulnerability(const NetworkMap& map, const RelayView& view,
                                               std::span<const VisitStream> visit,
                                               LocationId client_loc, int n_guards,
                                               std::uint64_t seed);

const char* to_string(VisitVulnerability v);

}  // namespace taps
