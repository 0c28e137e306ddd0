#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "taps/cluster.hpp"
#include "taps/relays.hpp"
#include "taps/rng.hpp"
#include "taps/trust.hpp"

namespace taps {

// Relay filtering and circuit management. TrustAll keeps safe relays
// (scores within tight bounds of the best) unconditionally and tops up with
// acceptable relays until the configured bandwidth fraction is reached;
// TrustOne simply takes the highest-scoring prefix up to the fraction.
// Vanilla is plain bandwidth weighting with family//16 exclusions.

enum class SelectionMode { trustall, trustone, vanilla };

struct AlphaSlice {
    double safe_unc = 0.95;   // alpha_su: score >= s* x this
    double safe_comp = 2.0;   // alpha_sc: 1-score <= (1-s*) x this
    double acc_unc = 0.5;     // alpha_au
    double acc_comp = 5.0;    // alpha_ac
    double weight_frac = 0.2; // alpha_w, fraction of positional bandwidth
};

struct PathParams {
    SelectionMode mode = SelectionMode::trustall;
    AlphaSlice guard;
    AlphaSlice exit;
    int num_guards = 3;
    double dirtiness_threshold_s = 600.0;
    double guard_absence_horizon_days = 30.0;

    void validate() const;
    // Named presets: trustall-paper, trustone-hidden, trustone-open, vanilla.
    static PathParams preset(const std::string& name);
};

std::string path_params_to_json(const PathParams& p);
PathParams path_params_from_json(const std::string& text);

// Candidates are given as indices 0..n-1 with parallel score/weight/tie
// arrays; weights must be pre-normalized fractions of the position's total
// bandwidth so alpha_w compares directly. Returned indices preserve the
// descending-score order in which relays were admitted. Ties in the sort
// break by descending weight then ascending tie_rank.
std::vector<std::uint32_t> secure_relays_trustall(const AlphaSlice& alpha,
                                                  std::span<const double> scores,
                                                  std::span<const double> weights,
                                                  std::span<const std::uint32_t> tie_rank);
std::vector<std::uint32_t> secure_relays_trustone(double alpha_w, std::span<const double> scores,
                                                  std::span<const double> weights,
                                                  std::span<const std::uint32_t> tie_rank);

// One consensus prepared for selection: per-position eligibility and
// normalized weight fractions. Immutable; shared by all samples.
struct RelayView {
    std::int64_t timestamp_hours = 0;
    std::vector<Relay> relays;
    std::vector<std::uint32_t> tie_rank;  // lexicographic fingerprint rank
    std::vector<std::uint32_t> guards, exits, middles;  // indices into relays
    double guard_total = 0.0, exit_total = 0.0, middle_total = 0.0;
    std::vector<double> guard_frac, exit_frac, middle_frac;  // per relay index

    static RelayView build(const Consensus& c);
    std::optional<std::uint32_t> index_of(const std::string& fingerprint) const;

  private:
    std::unordered_map<std::string, std::uint32_t> by_fp_;
};

struct Circuit {
    std::string guard_fp, middle_fp, exit_fp;
    LocationId guard_loc = 0, exit_loc = 0;
    std::optional<FamilyId> guard_family, exit_family;
    std::int64_t created_at = 0;
    std::optional<std::int64_t> first_stream_at;
    std::optional<std::int64_t> last_stream_at;

    bool dirty() const { return first_stream_at.has_value(); }
    bool too_dirty(std::int64_t now, double threshold_s) const {
        return dirty() && static_cast<double>(now - *first_stream_at) > threshold_s;
    }
};

enum class ConnectAction { reused, spliced, fresh };

struct ConnectResult {
    std::size_t circuit_index;
    ConnectAction action;
};

struct GuardEntry {
    std::string fingerprint;
    LocationId location = 0;
    std::optional<FamilyId> family;
    std::uint32_t subnet16 = 0;
    std::int64_t selected_at = 0;
    std::int64_t last_seen_hours = 0;
    bool responsive = false;
};

// Per-client connection state machine. Owns its rng; all shared inputs are
// read-only.
class ClientSession {
  public:
    ClientSession(const NetworkMap& map, const TrustPolicy& policy,
                  const Clustering& client_clusters, const Clustering& dest_clusters,
                  const PathParams& params, LocationId client_loc, std::uint64_t seed);

    // Processes one stream request against the consensus view current at
    // `now`. Throws SelectionError when no exit is compatible; the caller
    // records the stream as skipped. The returned index refers to the
    // append-only circuit log.
    ConnectResult connect(const RelayView& view, std::uint32_t dst_ip, std::uint16_t dst_port,
                          std::int64_t now_s);

    // Every circuit ever built (fresh or spliced), in creation order.
    const std::vector<Circuit>& circuit_log() const { return log_; }
    const std::vector<GuardEntry>& guards() const { return guards_; }
    LocationId client_location() const { return client_loc_; }
    LocationId client_rep() const { return client_rep_; }

    // Exposed for tests: the secure exit set for a guard/destination pair.
    std::vector<std::uint32_t> secure_exit_set(const RelayView& view, const GuardEntry& guard,
                                               LocationId dst_loc, std::uint32_t dst_ip,
                                               std::uint16_t dst_port);

  private:
    void refresh_guards(const RelayView& view);
    void top_up_guards(const RelayView& view);
    std::vector<std::uint32_t> exit_candidates(const RelayView& view, std::uint32_t dst_ip,
                                               std::uint16_t dst_port, const GuardEntry& guard);
    double exit_score(const RelayView& view, const GuardEntry& guard, LocationId dst_rep,
                      std::uint32_t exit_idx);
    std::uint32_t draw_exit(const RelayView& view, std::span<const std::uint32_t> secure);
    std::uint32_t draw_middle(const RelayView& view, const std::string& guard_fp,
                              const std::string& exit_fp, std::uint32_t guard_subnet,
                              std::optional<FamilyId> guard_family);
    std::vector<const GuardEntry*> active_guards() const;

    const NetworkMap* map_;
    const TrustPolicy* policy_;
    const Clustering* client_clusters_;
    const Clustering* dest_clusters_;
    PathParams params_;
    LocationId client_loc_;
    LocationId client_rep_;
    Rng rng_;

    struct LiveCircuit {
        Circuit c;
        std::size_t log_index;
    };
    std::vector<GuardEntry> guards_;
    std::vector<LiveCircuit> live_;
    std::vector<Circuit> log_;

    // exit score memo: (guard fp, dst rep) -> exit fp -> (exit loc, score)
    std::unordered_map<std::string,
                       std::unordered_map<std::string, std::pair<LocationId, double>>>
        score_memo_;
};

// Bandwidth-weighted single-relay draw with vanilla Tor's constraints;
// exposed for the baseline and for tests.
std::uint32_t vanilla_select(const RelayView& view, Position pos, Rng& rng,
                             std::span<const std::uint32_t> eligible);

}  // namespace taps
