#include "taps/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "taps/simplex.hpp"

namespace taps {

MinimaxSolution solve_minimax(const std::vector<std::vector<std::uint64_t>>& exposures) {
    if (exposures.empty()) throw ArgumentError("solve_minimax: no pairs");
    const std::size_t m = exposures.size();

    std::vector<std::uint64_t> entities;
    for (const auto& ex : exposures) entities.insert(entities.end(), ex.begin(), ex.end());
    std::sort(entities.begin(), entities.end());
    entities.erase(std::unique(entities.begin(), entities.end()), entities.end());
    const std::size_t ne = entities.size();
    auto entity_row = [&](std::uint64_t e) {
        return static_cast<std::size_t>(
            std::lower_bound(entities.begin(), entities.end(), e) - entities.begin());
    };

    // incidence[a][p] = 1 iff entity a is exposed by pair p
    std::vector<std::vector<double>> inc(ne, std::vector<double>(m, 0.0));
    for (std::size_t p = 0; p < m; ++p)
        for (std::uint64_t e : exposures[p]) inc[entity_row(e)][p] = 1.0;

    // Primal: variables (x_0..x_{m-1}, t), maximize -t.
    LinearProgram primal;
    primal.objective.assign(m + 1, 0.0);
    primal.objective[m] = -1.0;
    for (std::size_t a = 0; a < ne; ++a) {
        std::vector<double> row(m + 1, 0.0);
        for (std::size_t p = 0; p < m; ++p) row[p] = inc[a][p];
        row[m] = -1.0;
        primal.a.push_back(std::move(row));
        primal.b.push_back(0.0);
        primal.kind.push_back(RowKind::le);
    }
    {
        std::vector<double> row(m + 1, 0.0);
        for (std::size_t p = 0; p < m; ++p) row[p] = 1.0;
        primal.a.push_back(std::move(row));
        primal.b.push_back(1.0);
        primal.kind.push_back(RowKind::eq);
    }
    LpSolution psol = solve_lp(primal);
    if (!psol.feasible || !psol.bounded)
        throw ArgumentError("solve_minimax: primal did not solve");

    MinimaxSolution out;
    out.x.assign(psol.x.begin(), psol.x.begin() + static_cast<std::ptrdiff_t>(m));
    out.value = psol.x[m];

    // Dual game: entity mixture y and value v, maximize v subject to
    // (pair mass under y) >= v for every pair, sum y = 1.
    double dual_value = 0.0;
    if (ne > 0) {
        LinearProgram dual;
        dual.objective.assign(ne + 1, 0.0);
        dual.objective[ne] = 1.0;
        for (std::size_t p = 0; p < m; ++p) {
            std::vector<double> row(ne + 1, 0.0);
            for (std::size_t a = 0; a < ne; ++a) row[a] = inc[a][p];
            row[ne] = -1.0;
            dual.a.push_back(std::move(row));
            dual.b.push_back(0.0);
            dual.kind.push_back(RowKind::ge);
        }
        {
            std::vector<double> row(ne + 1, 0.0);
            for (std::size_t a = 0; a < ne; ++a) row[a] = 1.0;
            dual.a.push_back(std::move(row));
            dual.b.push_back(1.0);
            dual.kind.push_back(RowKind::eq);
        }
        LpSolution dsol = solve_lp(dual);
        if (!dsol.feasible || !dsol.bounded)
            throw ArgumentError("solve_minimax: dual did not solve");
        dual_value = dsol.value;
    }
    out.duality_gap = std::fabs(out.value - dual_value);

    double viol = 0.0;
    double total = 0.0;
    for (std::size_t p = 0; p < m; ++p) {
        total += out.x[p];
        viol = std::max(viol, -out.x[p]);
    }
    viol = std::max(viol, std::fabs(total - 1.0));
    for (std::size_t a = 0; a < ne; ++a) {
        double mass = 0.0;
        for (std::size_t p = 0; p < m; ++p) mass += inc[a][p] * out.x[p];
        viol = std::max(viol, mass - out.value);
    }
    out.max_violation = viol;
    return out;
}

std::unordered_map<std::uint32_t, double> PairModel::exit_marginal() const {
    std::unordered_map<std::uint32_t, double> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) out[pairs[i].exit_idx] += probability[i];
    return out;
}

namespace {

std::vector<std::uint32_t> eligible_exits(const RelayView& view, std::uint32_t dst_ip,
                                          std::uint16_t dst_port) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t i : view.exits)
        if (exit_policy_allows(view.relays[i], dst_ip, dst_port)) out.push_back(i);
    return out;
}

}  // namespace

PairModel baseline_pair_model(const NetworkMap& map, const RelayView& view,
                              LocationId client_loc, std::span<const std::uint32_t> guard_set,
                              LocationId dst_loc, std::uint32_t dst_ip, std::uint16_t dst_port) {
    std::vector<std::uint32_t> exits = eligible_exits(view, dst_ip, dst_port);
    if (exits.empty()) throw SelectionError("baseline: no exit with a compatible policy");

    // Client-side entity sets per guard, destination-side per exit.
    std::unordered_map<std::uint32_t, std::vector<EntityId>> client_side, dst_side;
    for (std::uint32_t g : guard_set)
        client_side[g] = map.entities_on_link(client_loc, view.relays[g].location);
    for (std::uint32_t e : exits)
        dst_side[e] = map.entities_on_link(dst_loc, view.relays[e].location);

    PairModel model;
    std::vector<std::vector<std::uint64_t>> exposures;
    std::vector<double> disjoint_weight;
    bool any_disjoint = false;
    for (std::uint32_t g : guard_set) {
        for (std::uint32_t e : exits) {
            if (view.relays[g].fingerprint == view.relays[e].fingerprint) continue;
            const auto& cs = client_side[g];
            const auto& ds = dst_side[e];
            std::vector<std::uint64_t> shared;
            std::set_intersection(cs.begin(), cs.end(), ds.begin(), ds.end(),
                                  std::back_inserter(shared));
            model.pairs.push_back({g, e});
            exposures.push_back(std::move(shared));
            double w = positional_weight(view.relays[g], Position::guard) *
                       positional_weight(view.relays[e], Position::exit);
            disjoint_weight.push_back(w);
            any_disjoint = any_disjoint || exposures.back().empty();
        }
    }
    if (model.pairs.empty()) throw SelectionError("baseline: no usable guard-exit pair");

    model.probability.assign(model.pairs.size(), 0.0);
    if (any_disjoint) {
        double total = 0.0;
        for (std::size_t i = 0; i < model.pairs.size(); ++i)
            if (exposures[i].empty()) total += disjoint_weight[i];
        for (std::size_t i = 0; i < model.pairs.size(); ++i)
            if (exposures[i].empty()) model.probability[i] = disjoint_weight[i] / total;
    } else {
        MinimaxSolution sol = solve_minimax(exposures);
        model.probability = sol.x;
        model.used_lp = true;
    }
    return model;
}

BaselineSelector::BaselineSelector(const NetworkMap& map, const RelayView& view,
                                   LocationId client_loc, int n_guards, std::uint64_t seed)
    : map_(&map), view_(&view), client_loc_(client_loc), rng_(seed) {
    if (view.guards.empty()) throw SelectionError("baseline: no guard-flagged relays");
    std::vector<std::uint32_t> pool = view.guards;
    int want = std::min<int>(n_guards, static_cast<int>(pool.size()));
    for (int i = 0; i < want; ++i) {
        std::vector<double> w;
        for (std::uint32_t idx : pool)
            w.push_back(positional_weight(view.relays[idx], Position::guard));
        std::size_t pick = rng_.weighted_index(w);
        guards_.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
}

BaselineSelector::Choice BaselineSelector::select(LocationId dst_loc, std::uint32_t dst_ip,
                                                  std::uint16_t dst_port) {
    auto it = cache_.find(dst_loc);
    if (it != cache_.end() &&
        exit_policy_allows(view_->relays[it->second.exit_idx], dst_ip, dst_port)) {
        return {it->second.guard_idx, it->second.exit_idx, false};
    }
    PairModel model =
        baseline_pair_model(*map_, *view_, client_loc_, guards_, dst_loc, dst_ip, dst_port);
    std::size_t pick = rng_.weighted_index(model.probability);
    GuardExitPair pair = model.pairs[pick];
    cache_[dst_loc] = pair;
    return {pair.guard_idx, pair.exit_idx, true};
}

AttackOutcome chosen_destination_attack(const NetworkMap& map, const RelayView& view,
                                        BaselineSelector& baseline,
                                        std::uint32_t n_destinations,
                                        const std::unordered_set<std::string>& adversary_middles,
                                        Rng& rng) {
    AttackOutcome out;
    out.guard_set = baseline.guard_set();
    out.guard_observed.assign(out.guard_set.size(), false);

    const auto& locs = map.locations();
    std::unordered_set<LocationId> seen;
    for (std::uint32_t i = 0; i < n_destinations; ++i) {
        LocationId dst_loc = locs[rng.below(locs.size())].id;
        // a representative address inside the destination AS
        std::uint32_t dst_ip = 0;
        bool found = false;
        for (const PrefixEntry& pe : map.ip_index())
            if (pe.location == dst_loc) {
                dst_ip = pe.prefix.bits;
                found = true;
                break;
            }
        if (!found) continue;  // unmapped destination, skipped
        const std::uint16_t port = 443;

        BaselineSelector::Choice choice = baseline.select(dst_loc, dst_ip, port);
        if (choice.fresh_circuit) {
            // middle drawn bandwidth-weighted among the remaining relays
            std::vector<std::uint32_t> cands;
            std::vector<double> w;
            for (std::uint32_t m_idx : view.middles) {
                if (m_idx == choice.guard_idx || m_idx == choice.exit_idx) continue;
                cands.push_back(m_idx);
                w.push_back(positional_weight(view.relays[m_idx], Position::middle));
            }
            if (!cands.empty()) {
                std::uint32_t middle = cands[rng.weighted_index(w)];
                if (adversary_middles.count(view.relays[middle].fingerprint)) {
                    for (std::size_t gi = 0; gi < out.guard_set.size(); ++gi)
                        if (out.guard_set[gi] == choice.guard_idx) out.guard_observed[gi] = true;
                }
            }
        }
        if (seen.insert(dst_loc).second)
            out.exits.push_back({dst_loc, dst_ip, port, choice.exit_idx});
    }
    return out;
}

PosteriorState::PosteriorState(std::vector<LocationId> candidates, std::vector<double> prior)
    : candidates_(std::move(candidates)) {
    if (candidates_.empty()) throw ArgumentError("posterior: no candidates");
    log_weight_.assign(candidates_.size(), 0.0);
    dead_.assign(candidates_.size(), false);
    if (!prior.empty()) {
        if (prior.size() != candidates_.size())
            throw ArgumentError("posterior: prior length mismatch");
        for (std::size_t i = 0; i < prior.size(); ++i) {
            if (prior[i] <= 0.0)
                dead_[i] = true;
            else
                log_weight_[i] = std::log(prior[i]);
        }
    }
}

void PosteriorState::observe_exit(const NetworkMap& map, const RelayView& view,
                                  std::span<const std::uint32_t> guard_set,
                                  const AttackOutcome::ExitObservation& obs) {
    for (std::size_t i = 0; i < candidates_.size(); ++i) {
        if (dead_[i]) continue;
        PairModel model = baseline_pair_model(map, view, candidates_[i], guard_set, obs.dst_loc,
                                              obs.dst_ip, obs.dst_port);
        double p = 0.0;
        for (std::size_t k = 0; k < model.pairs.size(); ++k)
            if (model.pairs[k].exit_idx == obs.exit_idx) p += model.probability[k];
        if (p <= 0.0)
            dead_[i] = true;
        else
            log_weight_[i] += std::log(p);
    }
}

std::vector<double> PosteriorState::posterior() const {
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates_.size(); ++i)
        if (!dead_[i]) max_log = std::max(max_log, log_weight_[i]);
    if (!std::isfinite(max_log))
        throw InconsistentObservationError("all candidate likelihoods are zero");
    std::vector<double> post(candidates_.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < candidates_.size(); ++i) {
        if (dead_[i]) continue;
        post[i] = std::exp(log_weight_[i] - max_log);
        total += post[i];
    }
    for (double& p : post) p /= total;
    return post;
}

double PosteriorState::entropy_bits() const {
    std::vector<double> post = posterior();
    double h = 0.0;
    for (double p : post)
        if (p > 0.0) h -= p * std::log2(p);
    return h;
}

VisitVulnerability cross_circuit_vulnerability(const NetworkMap& map, const RelayView& view,
                                               std::span<const VisitStream> visit,
                                               LocationId client_loc, int n_guards,
                                               std::uint64_t seed) {
    if (visit.empty()) throw ArgumentError("cross_circuit_vulnerability: empty visit");
    BaselineSelector baseline(map, view, client_loc, n_guards, seed);

    struct StreamSides {
        std::vector<EntityId> entry;
        std::vector<EntityId> exit;
    };
    std::vector<StreamSides> sides;
    for (const VisitStream& s : visit) {
        LocationId dst_loc = map.ip_to_location(s.dst_ip);
        auto choice = baseline.select(dst_loc, s.dst_ip, s.dst_port);
        StreamSides ss;
        ss.entry = map.entities_on_link(client_loc, view.relays[choice.guard_idx].location);
        ss.exit = map.entities_on_link(dst_loc, view.relays[choice.exit_idx].location);
        sides.push_back(std::move(ss));
    }

    auto contains = [](const std::vector<EntityId>& v, EntityId e) {
        return std::binary_search(v.begin(), v.end(), e);
    };
    auto is_direct_entity = [&](EntityId e) {
        for (const StreamSides& ss : sides)
            if (contains(ss.entry, e) && contains(ss.exit, e)) return true;
        return false;
    };

    for (const StreamSides& ss : sides) {
        for (EntityId e : ss.entry)
            if (contains(ss.exit, e)) return VisitVulnerability::direct;
    }
    // Entities on the first stream's exit side that see some entry side and
    // are never in a direct position.
    for (EntityId e : sides.front().exit) {
        if (is_direct_entity(e)) continue;
        for (const StreamSides& ss : sides)
            if (contains(ss.entry, e)) return VisitVulnerability::cross_only;
    }
    return VisitVulnerability::safe;
}

const char* to_string(VisitVulnerability v) {
    switch (v) {
        case VisitVulnerability::direct: return "direct";
        case VisitVulnerability::cross_only: return "cross_only";
        case VisitVulnerability::safe: return "safe";
    }
    return "?";
}

}  // namespace taps
