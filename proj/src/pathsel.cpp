#include "taps/pathsel.hpp"

#include <algorithm>
#include <cmath>

namespace taps {

void PathParams::validate() const {
    auto check_slice = [](const AlphaSlice& a, const char* pos) {
        if (a.safe_unc > 1.0) throw ConfigError(std::string("alpha_su > 1 for ") + pos);
        if (a.safe_comp < 1.0) throw ConfigError(std::string("alpha_sc < 1 for ") + pos);
        if (a.acc_unc > a.safe_unc) throw ConfigError(std::string("alpha_au > alpha_su for ") + pos);
        if (a.acc_comp < a.safe_comp) throw ConfigError(std::string("alpha_ac < alpha_sc for ") + pos);
        if (!(a.weight_frac > 0.0) || a.weight_frac > 1.0)
            throw ConfigError(std::string("alpha_w outside (0,1] for ") + pos);
    };
    check_slice(guard, "guard");
    check_slice(exit, "exit");
    if (num_guards < 1) throw ConfigError("num_guards must be >= 1");
    if (dirtiness_threshold_s <= 0) throw ConfigError("dirtiness threshold must be positive");
}

PathParams PathParams::preset(const std::string& name) {
    PathParams p;
    if (name == "trustall-paper") {
        p.mode = SelectionMode::trustall;
        p.guard = {0.95, 2.0, 0.5, 5.0, 0.2};
        p.exit = {0.95, 2.0, 0.1, 10.0, 0.2};
    } else if (name == "trustone-hidden") {
        p.mode = SelectionMode::trustone;
        p.guard.weight_frac = 0.005;
        p.exit.weight_frac = 1.0;
    } else if (name == "trustone-open") {
        p.mode = SelectionMode::trustone;
        p.guard.weight_frac = 0.005;
        p.exit.weight_frac = 0.005;
    } else if (name == "vanilla") {
        p.mode = SelectionMode::vanilla;
    } else {
        throw ConfigError("unknown path-params preset: " + name);
    }
    p.validate();
    return p;
}

namespace {

std::vector<std::uint32_t> reverse_sort(std::span<const double> scores,
                                        std::span<const double> weights,
                                        std::span<const std::uint32_t> tie_rank) {
    std::vector<std::uint32_t> order(scores.size());
    for (std::uint32_t i = 0; i < scores.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        if (weights[a] != weights[b]) return weights[a] > weights[b];
        return tie_rank[a] < tie_rank[b];
    });
    return order;
}

}  // namespace

std::vector<std::uint32_t> secure_relays_trustall(const AlphaSlice& alpha,
                                                  std::span<const double> scores,
                                                  std::span<const double> weights,
                                                  std::span<const std::uint32_t> tie_rank) {
    if (scores.empty()) throw ArgumentError("secure_relays: empty relay list");
    if (scores.size() != weights.size() || scores.size() != tie_rank.size())
        throw ArgumentError("secure_relays: length mismatch");

    std::vector<std::uint32_t> order = reverse_sort(scores, weights, tie_rank);
    const double s_star = scores[order[0]];
    const std::size_t n = order.size();

    std::vector<std::uint32_t> out;
    double w = 0.0;
    std::size_t i = 0;
    // Safe relays: close enough to the best score, admitted regardless of
    // accumulated weight.
    while (i < n && scores[order[i]] >= s_star * alpha.safe_unc &&
           1.0 - scores[order[i]] <= (1.0 - s_star) * alpha.safe_comp) {
        out.push_back(order[i]);
        w += weights[order[i]];
        ++i;
    }
    // Acceptable relays: looser bounds, added in score order until the
    // desired bandwidth fraction is reached. Continues at the first relay
    // the safe loop rejected.
    while (i < n && scores[order[i]] >= s_star * alpha.acc_unc &&
           1.0 - scores[order[i]] <= (1.0 - s_star) * alpha.acc_comp && w < alpha.weight_frac) {
        out.push_back(order[i]);
        w += weights[order[i]];
        ++i;
    }
    return out;
}

std::vector<std::uint32_t> secure_relays_trustone(double alpha_w, std::span<const double> scores,
                                                  std::span<const double> weights,
                                                  std::span<const std::uint32_t> tie_rank) {
    if (scores.empty()) throw ArgumentError("secure_relays: empty relay list");
    if (scores.size() != weights.size() || scores.size() != tie_rank.size())
        throw ArgumentError("secure_relays: length mismatch");

    std::vector<std::uint32_t> order = reverse_sort(scores, weights, tie_rank);
    std::vector<std::uint32_t> out;
    double w = 0.0;
    std::size_t i = 0;
    while (i < order.size() && w < alpha_w) {
        out.push_back(order[i]);
        w += weights[order[i]];
        ++i;
    }
    return out;
}

RelayView RelayView::build(const Consensus& c) {
    RelayView v;
    v.timestamp_hours = c.timestamp_hours;
    v.relays = c.relays;

    std::vector<std::uint32_t> by_name(v.relays.size());
    for (std::uint32_t i = 0; i < v.relays.size(); ++i) by_name[i] = i;
    std::sort(by_name.begin(), by_name.end(), [&](std::uint32_t a, std::uint32_t b) {
        return v.relays[a].fingerprint < v.relays[b].fingerprint;
    });
    v.tie_rank.resize(v.relays.size());
    for (std::uint32_t rank = 0; rank < by_name.size(); ++rank) v.tie_rank[by_name[rank]] = rank;

    v.guard_frac.assign(v.relays.size(), 0.0);
    v.exit_frac.assign(v.relays.size(), 0.0);
    v.middle_frac.assign(v.relays.size(), 0.0);
    for (std::uint32_t i = 0; i < v.relays.size(); ++i) {
        const Relay& r = v.relays[i];
        v.by_fp_[r.fingerprint] = i;
        if (!r.eligible()) continue;
        v.middles.push_back(i);
        v.middle_total += positional_weight(r, Position::middle);
        if (r.has(kFlagGuard)) {
            v.guards.push_back(i);
            v.guard_total += positional_weight(r, Position::guard);
        }
        if (r.has(kFlagExit)) {
            v.exits.push_back(i);
            v.exit_total += positional_weight(r, Position::exit);
        }
    }
    for (std::uint32_t i : v.guards)
        v.guard_frac[i] = positional_weight(v.relays[i], Position::guard) / v.guard_total;
    for (std::uint32_t i : v.exits)
        v.exit_frac[i] = positional_weight(v.relays[i], Position::exit) / v.exit_total;
    for (std::uint32_t i : v.middles)
        v.middle_frac[i] = positional_weight(v.relays[i], Position::middle) / v.middle_total;
    return v;
}

std::optional<std::uint32_t> RelayView::index_of(const std::string& fingerprint) const {
    auto it = by_fp_.find(fingerprint);
    if (it == by_fp_.end()) return std::nullopt;
    return it->second;
}

std::uint32_t vanilla_select(const RelayView& view, Position pos, Rng& rng,
                             std::span<const std::uint32_t> eligible) {
    if (eligible.empty()) throw SelectionError("vanilla_select: empty eligible set");
    std::vector<double> w;
    w.reserve(eligible.size());
    for (std::uint32_t i : eligible) w.push_back(positional_weight(view.relays[i], pos));
    return eligible[rng.weighted_index(w)];
}

ClientSession::ClientSession(const NetworkMap& map, const TrustPolicy& policy,
                             const Clustering& client_clusters, const Clustering& dest_clusters,
                             const PathParams& params, LocationId client_loc, std::uint64_t seed)
    : map_(&map),
      policy_(&policy),
      client_clusters_(&client_clusters),
      dest_clusters_(&dest_clusters),
      params_(params),
      client_loc_(client_loc),
      rng_(seed) {
    params_.validate();
    client_rep_ = client_clusters.representative_of(client_loc);
}

std::vector<const GuardEntry*> ClientSession::active_guards() const {
    std::vector<const GuardEntry*> out;
    for (const GuardEntry& g : guards_) {
        if (!g.responsive) continue;
        out.push_back(&g);
        if (out.size() == static_cast<std::size_t>(params_.num_guards)) break;
    }
    return out;
}

void ClientSession::refresh_guards(const RelayView& view) {
    for (GuardEntry& g : guards_) {
        auto idx = view.index_of(g.fingerprint);
        if (idx && view.relays[*idx].has(kFlagRunning)) {
            g.responsive = true;
            g.last_seen_hours = view.timestamp_hours;
        } else {
            g.responsive = false;
        }
    }
    double horizon_h = params_.guard_absence_horizon_days * 24.0;
    std::erase_if(guards_, [&](const GuardEntry& g) {
        return !g.responsive &&
               static_cast<double>(view.timestamp_hours - g.last_seen_hours) > horizon_h;
    });
}

namespace {

Relay relay_stub(const GuardEntry& g) {
    Relay r;
    r.fingerprint = g.fingerprint;
    r.location = g.location;
    r.family = g.family;
    r.subnet16 = g.subnet16;
    return r;
}

bool family_or_subnet_conflict(const Relay& a, const Relay& b) {
    if (a.family && b.family && *a.family == *b.family) return true;
    return a.subnet16 != 0 && a.subnet16 == b.subnet16;
}

}  // namespace

void ClientSession::top_up_guards(const RelayView& view) {
    for (;;) {
        std::size_t responsive = 0;
        for (const GuardEntry& g : guards_) responsive += g.responsive ? 1 : 0;
        if (responsive >= static_cast<std::size_t>(params_.num_guards)) return;

        std::vector<std::uint32_t> cands;
        for (std::uint32_t i : view.guards) {
            const Relay& r = view.relays[i];
            bool held = false;
            for (const GuardEntry& g : guards_) held = held || g.fingerprint == r.fingerprint;
            if (held) continue;
            if (params_.mode == SelectionMode::vanilla) {
                bool conflict = false;
                for (const GuardEntry& g : guards_)
                    conflict = conflict || family_or_subnet_conflict(relay_stub(g), r);
                if (conflict) continue;
            }
            cands.push_back(i);
        }
        if (cands.empty()) throw SelectionError("no guard-flagged relay available");

        std::uint32_t chosen;
        if (params_.mode == SelectionMode::vanilla) {
            chosen = vanilla_select(view, Position::guard, rng_, cands);
        } else {
            // Joint scoring against the full selected set, so each addition
            // minimizes the extra exposure of the entry paths.
            std::vector<Relay> held;
            for (const GuardEntry& g : guards_) held.push_back(relay_stub(g));
            std::vector<const Relay*> set_ptrs;
            for (const Relay& r : held) set_ptrs.push_back(&r);
            set_ptrs.push_back(nullptr);  // slot for the candidate

            std::vector<double> scores, fracs;
            std::vector<std::uint32_t> ranks;
            for (std::uint32_t i : cands) {
                set_ptrs.back() = &view.relays[i];
                scores.push_back(policy_->guard_security(client_rep_, set_ptrs));
                fracs.push_back(view.guard_frac[i]);
                ranks.push_back(view.tie_rank[i]);
            }
            std::vector<std::uint32_t> secure =
                params_.mode == SelectionMode::trustall
                    ? secure_relays_trustall(params_.guard, scores, fracs, ranks)
                    : secure_relays_trustone(params_.guard.weight_frac, scores, fracs, ranks);
            std::vector<double> w;
            for (std::uint32_t s : secure) w.push_back(fracs[s]);
            chosen = cands[secure[rng_.weighted_index(w)]];
        }

        const Relay& r = view.relays[chosen];
        GuardEntry g;
        g.fingerprint = r.fingerprint;
        g.location = r.location;
        g.family = r.family;
        g.subnet16 = r.subnet16;
        g.selected_at = view.timestamp_hours * 3600;
        g.last_seen_hours = view.timestamp_hours;
        g.responsive = true;
        guards_.push_back(std::move(g));
    }
}

std::vector<std::uint32_t> ClientSession::exit_candidates(const RelayView& view,
                                                          std::uint32_t dst_ip,
                                                          std::uint16_t dst_port,
                                                          const GuardEntry& guard) {
    std::vector<std::uint32_t> out;
    bool vanilla_constraints = params_.mode != SelectionMode::trustall;
    Relay guard_relay = relay_stub(guard);
    for (std::uint32_t i : view.exits) {
        const Relay& r = view.relays[i];
        if (r.fingerprint == guard.fingerprint) continue;
        if (!exit_policy_allows(r, dst_ip, dst_port)) continue;
        if (vanilla_constraints && family_or_subnet_conflict(guard_relay, r)) continue;
        out.push_back(i);
    }
    return out;
}

double ClientSession::exit_score(const RelayView& view, const GuardEntry& guard,
                                 LocationId dst_rep, std::uint32_t exit_idx) {
    // Scores depend only on locations, families and the destination
    // cluster, so they are cached across consensuses; the location check
    // guards against a relay moving in a hand-written sequence.
    auto& per_guard = score_memo_[guard.fingerprint + "|" + std::to_string(dst_rep)];
    const Relay& e = view.relays[exit_idx];
    auto it = per_guard.find(e.fingerprint);
    if (it != per_guard.end() && it->second.first == e.location) return it->second.second;
    Relay guard_relay = relay_stub(guard);
    double s = policy_->exit_security(client_rep_, dst_rep, guard_relay, e);
    per_guard[e.fingerprint] = {e.location, s};
    return s;
}

std::vector<std::uint32_t> ClientSession::secure_exit_set(const RelayView& view,
                                                          const GuardEntry& guard,
                                                          LocationId dst_loc, std::uint32_t dst_ip,
                                                          std::uint16_t dst_port) {
    std::vector<std::uint32_t> cands = exit_candidates(view, dst_ip, dst_port, guard);
    if (cands.empty()) return {};
    if (params_.mode == SelectionMode::vanilla) return cands;

    LocationId dst_rep = dest_clusters_->representative_of(dst_loc);
    std::vector<double> scores, fracs;
    std::vector<std::uint32_t> ranks;
    scores.reserve(cands.size());
    for (std::uint32_t i : cands) {
        scores.push_back(exit_score(view, guard, dst_rep, i));
        fracs.push_back(view.exit_frac[i]);
        ranks.push_back(view.tie_rank[i]);
    }
    std::vector<std::uint32_t> secure =
        params_.mode == SelectionMode::trustall
            ? secure_relays_trustall(params_.exit, scores, fracs, ranks)
            : secure_relays_trustone(params_.exit.weight_frac, scores, fracs, ranks);
    std::vector<std::uint32_t> out;
    out.reserve(secure.size());
    for (std::uint32_t s : secure) out.push_back(cands[s]);
    return out;
}

std::uint32_t ClientSession::draw_exit(const RelayView& view,
                                       std::span<const std::uint32_t> secure) {
    std::vector<double> w;
    w.reserve(secure.size());
    for (std::uint32_t i : secure) w.push_back(view.exit_frac[i]);
    return secure[rng_.weighted_index(w)];
}

std::uint32_t ClientSession::draw_middle(const RelayView& view, const std::string& guard_fp,
                                         const std::string& exit_fp, std::uint32_t guard_subnet,
                                         std::optional<FamilyId> guard_family) {
    std::vector<std::uint32_t> cands;
    const Relay* exit_relay = nullptr;
    if (auto idx = view.index_of(exit_fp)) exit_relay = &view.relays[*idx];
    for (std::uint32_t i : view.middles) {
        const Relay& r = view.relays[i];
        if (r.fingerprint == guard_fp || r.fingerprint == exit_fp) continue;
        if (params_.mode == SelectionMode::vanilla) {
            Relay guard_stub;
            guard_stub.subnet16 = guard_subnet;
            guard_stub.family = guard_family;
            if (family_or_subnet_conflict(guard_stub, r)) continue;
            if (exit_relay && family_or_subnet_conflict(*exit_relay, r)) continue;
        }
        cands.push_back(i);
    }
    if (cands.empty()) throw SelectionError("no middle relay available");
    std::vector<double> w;
    for (std::uint32_t i : cands) w.push_back(view.middle_frac[i]);
    return cands[rng_.weighted_index(w)];
}

ConnectResult ClientSession::connect(const RelayView& view, std::uint32_t dst_ip,
                                     std::uint16_t dst_port, std::int64_t now_s) {
    refresh_guards(view);
    top_up_guards(view);

    LocationId dst_loc = map_->ip_to_location(dst_ip);

    // Retire circuits that can never be used again.
    std::erase_if(live_, [&](const LiveCircuit& lc) {
        return lc.c.too_dirty(now_s, params_.dirtiness_threshold_s);
    });

    // Usable circuits in reverse order of most recent stream attachment.
    std::vector<std::size_t> scan;
    for (std::size_t i = 0; i < live_.size(); ++i) scan.push_back(i);
    std::sort(scan.begin(), scan.end(), [&](std::size_t a, std::size_t b) {
        std::int64_t ta = live_[a].c.last_stream_at.value_or(live_[a].c.created_at);
        std::int64_t tb = live_[b].c.last_stream_at.value_or(live_[b].c.created_at);
        if (ta != tb) return ta > tb;
        return a > b;
    });

    auto guard_entry = [&](const std::string& fp) -> const GuardEntry* {
        for (const GuardEntry& g : guards_)
            if (g.fingerprint == fp) return &g;
        return nullptr;
    };

    bool have_parent = false;
    std::size_t splice_parent_idx = 0;
    std::vector<std::uint32_t> splice_secure;
    for (std::size_t idx : scan) {
        LiveCircuit& lc = live_[idx];
        const GuardEntry* g = guard_entry(lc.c.guard_fp);
        if (!g || !g->responsive) continue;
        auto exit_idx = view.index_of(lc.c.exit_fp);

        std::vector<std::uint32_t> secure = secure_exit_set(view, *g, dst_loc, dst_ip, dst_port);
        if (!have_parent) {
            // The most recently used circuit is the splice target whether
            // or not any exit is available for it.
            have_parent = true;
            splice_parent_idx = idx;
            splice_secure = secure;
        }
        if (!exit_idx) continue;
        bool member = std::find(secure.begin(), secure.end(), *exit_idx) != secure.end();
        if (member) {
            lc.c.last_stream_at = now_s;
            if (!lc.c.first_stream_at) lc.c.first_stream_at = now_s;
            return {lc.log_index, ConnectAction::reused};
        }
    }

    if (have_parent && !splice_secure.empty()) {
        // Keep guard and middle, splice a fresh exit onto the end. The new
        // circuit inherits the parent's age and dirtiness.
        std::uint32_t exit_idx = draw_exit(view, splice_secure);
        const Relay& e = view.relays[exit_idx];
        Circuit spliced = live_[splice_parent_idx].c;
        spliced.exit_fp = e.fingerprint;
        spliced.exit_loc = e.location;
        spliced.exit_family = e.family;
        if (!spliced.first_stream_at) spliced.first_stream_at = now_s;
        spliced.last_stream_at = now_s;
        live_.erase(live_.begin() + static_cast<std::ptrdiff_t>(splice_parent_idx));
        log_.push_back(spliced);
        live_.push_back({std::move(spliced), log_.size() - 1});
        return {log_.size() - 1, ConnectAction::spliced};
    }

    // Fresh circuit: uniform guard among the active set, exit drawn for that
    // guard, middle bandwidth-weighted.
    std::vector<const GuardEntry*> active = active_guards();
    if (active.empty()) throw SelectionError("no responsive guard");
    const GuardEntry& g = *active[rng_.below(active.size())];
    std::vector<std::uint32_t> secure = secure_exit_set(view, g, dst_loc, dst_ip, dst_port);
    if (secure.empty()) throw SelectionError("no exit with a compatible policy");
    std::uint32_t exit_idx = draw_exit(view, secure);
    const Relay& e = view.relays[exit_idx];
    std::uint32_t middle_idx = draw_middle(view, g.fingerprint, e.fingerprint, g.subnet16, g.family);

    Circuit c;
    c.guard_fp = g.fingerprint;
    c.guard_loc = g.location;
    c.guard_family = g.family;
    c.middle_fp = view.relays[middle_idx].fingerprint;
    c.exit_fp = e.fingerprint;
    c.exit_loc = e.location;
    c.exit_family = e.family;
    c.created_at = now_s;
    c.first_stream_at = now_s;
    c.last_stream_at = now_s;
    log_.push_back(c);
    live_.push_back({std::move(c), log_.size() - 1});
    return {log_.size() - 1, ConnectAction::fresh};
}

}  // namespace taps
