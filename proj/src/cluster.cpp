#include "taps/cluster.hpp"

#include <algorithm>
#include <limits>

namespace taps {

namespace {

double distance(const TrustPolicy& policy, const ClusterParams& params, LocationId a,
                LocationId b) {
    return policy.location_distance(a, b, params.relay_locations, params.relay_weights);
}

struct GreedyResult {
    std::vector<std::vector<LocationId>> members;  // per cluster, sorted at end
    std::vector<Clustering::LogEntry> log;
};

// Greedy balanced assignment: repeatedly take the currently smallest
// cluster (by total size of contained locations) and give it the unassigned
// location closest to its representative. Ties break toward the smaller
// representative id, then the smaller location id.
GreedyResult assign_balanced(const NetworkMap& map, const TrustPolicy& policy,
                             const ClusterParams& params, const std::vector<LocationId>& reps) {
    GreedyResult res;
    res.members.resize(reps.size());
    std::vector<double> cluster_size(reps.size());
    std::unordered_map<LocationId, bool> is_rep;
    for (std::size_t c = 0; c < reps.size(); ++c) {
        res.members[c].push_back(reps[c]);
        cluster_size[c] = static_cast<double>(map.location(reps[c]).size);
        is_rep[reps[c]] = true;
    }

    std::vector<LocationId> pending;
    for (const Location& loc : map.locations())
        if (!is_rep.count(loc.id)) pending.push_back(loc.id);
    std::sort(pending.begin(), pending.end());

    // location x representative distance cache
    std::vector<std::vector<double>> dist(pending.size());
    for (std::size_t i = 0; i < pending.size(); ++i) {
        dist[i].reserve(reps.size());
        for (LocationId rep : reps) dist[i].push_back(distance(policy, params, pending[i], rep));
    }

    std::vector<bool> done(pending.size(), false);
    for (std::size_t n = 0; n < pending.size(); ++n) {
        double min_size = std::numeric_limits<double>::infinity();
        for (double s : cluster_size) min_size = std::min(min_size, s);

        std::size_t best_i = pending.size();
        std::size_t best_c = reps.size();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < reps.size(); ++c) {
            if (cluster_size[c] != min_size) continue;
            for (std::size_t i = 0; i < pending.size(); ++i) {
                if (done[i]) continue;
                double d = dist[i][c];
                bool take = best_c == reps.size() || d < best_d;
                if (!take && d == best_d) {
                    take = reps[c] < reps[best_c] ||
                           (reps[c] == reps[best_c] && pending[i] < pending[best_i]);
                }
                if (take) {
                    best_d = d;
                    best_i = i;
                    best_c = c;
                }
            }
        }
        done[best_i] = true;
        res.members[best_c].push_back(pending[best_i]);
        res.log.push_back({pending[best_i], reps[best_c]});
        cluster_size[best_c] += static_cast<double>(map.location(pending[best_i]).size);
    }
    for (auto& m : res.members) std::sort(m.begin(), m.end());
    return res;
}

void materialize(const std::vector<LocationId>& reps, const GreedyResult& greedy,
                 Clustering& out) {
    out.assignment.clear();
    for (std::size_t c = 0; c < reps.size(); ++c)
        for (LocationId loc : greedy.members[c]) out.assignment[loc] = reps[c];
    out.assignment_log = greedy.log;
}

}  // namespace

Clustering cluster_destinations(const NetworkMap& map, const TrustPolicy& policy,
                                const ClusterParams& params, std::uint64_t seed) {
    const auto& locs = map.locations();
    if (params.num_clusters < 1 || params.num_clusters > locs.size())
        throw ConfigError("cluster_destinations: num_clusters out of range");
    if (params.max_rounds < 1) throw ConfigError("cluster_destinations: max_rounds must be >= 1");

    Clustering out;
    out.kind = ClusterKind::destination;
    out.seed = seed;

    Rng rng(derive_seed(seed, 0x64737463));  // "dstc"

    // Step 1: uniform-random initial representative. Step 2: maximin
    // farthest-point seeding; each remaining location tracks its distance
    // to the nearest chosen representative.
    std::vector<LocationId> reps;
    reps.push_back(locs[rng.below(locs.size())].id);
    std::unordered_map<LocationId, double> min_dist;
    for (const Location& l : locs)
        if (l.id != reps[0]) min_dist[l.id] = distance(policy, params, l.id, reps[0]);
    while (reps.size() < params.num_clusters) {
        LocationId best = 0;
        double best_d = -1.0;
        bool have = false;
        for (const Location& l : locs) {
            auto it = min_dist.find(l.id);
            if (it == min_dist.end()) continue;
            if (!have || it->second > best_d || (it->second == best_d && l.id < best)) {
                best = l.id;
                best_d = it->second;
                have = true;
            }
        }
        reps.push_back(best);
        min_dist.erase(best);
        for (auto& [loc, d] : min_dist) d = std::min(d, distance(policy, params, loc, best));
    }
    out.seed_order = reps;
    std::sort(reps.begin(), reps.end());

    // Steps 3-5: greedy balanced assignment then medoid recomputation,
    // repeated until the representatives are stable or max_rounds
    // assignment rounds have run. Each cluster's new representative is the
    // member with the smallest average distance to the other members.
    GreedyResult greedy;
    for (std::uint32_t round = 0; round < params.max_rounds; ++round) {
        greedy = assign_balanced(map, policy, params, reps);
        out.round_representatives = reps;

        std::vector<LocationId> new_reps;
        for (std::size_t c = 0; c < reps.size(); ++c) {
            const auto& members = greedy.members[c];
            LocationId medoid = members[0];
            double best_avg = std::numeric_limits<double>::infinity();
            for (LocationId cand : members) {
                double sum = 0.0;
                for (LocationId other : members)
                    if (other != cand) sum += distance(policy, params, cand, other);
                double avg =
                    members.size() > 1 ? sum / static_cast<double>(members.size() - 1) : 0.0;
                if (avg < best_avg || (avg == best_avg && cand < medoid)) {
                    best_avg = avg;
                    medoid = cand;
                }
            }
            new_reps.push_back(medoid);
        }

        // The recomputed medoids become the clusters' representatives. If
        // nothing moved (or rounds ran out) the loop ends here and the last
        // assignment stands, relabeled to the final representatives.
        std::vector<LocationId> sorted_new = new_reps;
        std::sort(sorted_new.begin(), sorted_new.end());
        bool changed = sorted_new != reps;
        for (std::size_t c = 0; c < reps.size(); ++c) {
            for (LocationId loc : greedy.members[c]) out.assignment[loc] = new_reps[c];
        }
        out.assignment_log = greedy.log;
        out.representatives = sorted_new;
        if (!changed || round + 1 == params.max_rounds) break;
        reps = sorted_new;
    }
    return out;
}

Clustering cluster_clients(const NetworkMap& map, const TrustPolicy& policy,
                           const ClusterParams& params) {
    std::vector<const Location*> ranked;
    for (const Location& l : map.locations())
        if (l.client_rank) ranked.push_back(&l);
    if (params.num_clusters < 1 || ranked.size() < params.num_clusters)
        throw ConfigError("cluster_clients: fewer ranked client locations than num_clusters");

    std::sort(ranked.begin(), ranked.end(), [](const Location* a, const Location* b) {
        return *a->client_rank < *b->client_rank;
    });

    Clustering out;
    out.kind = ClusterKind::client;
    for (std::uint32_t i = 0; i < params.num_clusters; ++i)
        out.representatives.push_back(ranked[i]->id);
    std::sort(out.representatives.begin(), out.representatives.end());
    out.round_representatives = out.representatives;

    GreedyResult greedy = assign_balanced(map, policy, params, out.representatives);
    materialize(out.representatives, greedy, out);
    return out;
}

ClusteringAudit audit_clustering(const NetworkMap& map, const Clustering& c) {
    ClusteringAudit audit;

    audit.partition_ok = c.assignment.size() == map.locations().size();
    for (const Location& l : map.locations()) {
        if (!c.assignment.count(l.id)) {
            audit.partition_ok = false;
            audit.detail = "location " + std::to_string(l.id) + " unassigned";
            break;
        }
    }
    std::unordered_map<LocationId, bool> is_rep;
    for (LocationId r : c.representatives) is_rep[r] = true;
    for (LocationId r : c.representatives) {
        auto it = c.assignment.find(r);
        if (it == c.assignment.end() || it->second != r) {
            audit.partition_ok = false;
            audit.detail = "representative " + std::to_string(r) + " not self-assigned";
        }
    }
    for (const auto& [loc, rep] : c.assignment) {
        if (!is_rep.count(rep)) {
            audit.partition_ok = false;
            audit.detail = "assignment targets non-representative";
        }
    }

    // Replay the final round's log against the reps that round started
    // from: every assignment must land in a then-minimal cluster.
    std::unordered_map<LocationId, double> size;
    for (LocationId r : c.round_representatives)
        size[r] = static_cast<double>(map.location(r).size);
    audit.balance_ok =
        c.assignment_log.size() + c.round_representatives.size() == map.locations().size();
    if (!audit.balance_ok) audit.detail = "assignment log incomplete";
    for (const auto& entry : c.assignment_log) {
        double min_size = std::numeric_limits<double>::infinity();
        for (const auto& [rep, s] : size) min_size = std::min(min_size, s);
        auto it = size.find(entry.representative);
        if (it == size.end() || it->second != min_size) {
            audit.balance_ok = false;
            audit.detail = "assignment of " + std::to_string(entry.location) +
                           " targeted a non-minimal cluster";
            break;
        }
        it->second += static_cast<double>(map.location(entry.location).size);
    }
    return audit;
}

bool verify_maximin_seeding(const NetworkMap& map, const TrustPolicy& policy,
                            const ClusterParams& params, std::span<const LocationId> seeds) {
    if (seeds.empty()) return false;
    std::vector<LocationId> chosen;
    chosen.push_back(seeds[0]);
    for (std::size_t i = 1; i < seeds.size(); ++i) {
        double best = -1.0;
        std::vector<LocationId> argmax;
        for (const Location& l : map.locations()) {
            if (std::find(chosen.begin(), chosen.end(), l.id) != chosen.end()) continue;
            double mind = std::numeric_limits<double>::infinity();
            for (LocationId c : chosen)
                mind = std::min(mind, policy.location_distance(l.id, c, params.relay_locations,
                                                               params.relay_weights));
            if (mind > best) {
                best = mind;
                argmax = {l.id};
            } else if (mind == best) {
                argmax.push_back(l.id);
            }
        }
        if (std::find(argmax.begin(), argmax.end(), seeds[i]) == argmax.end()) return false;
        chosen.push_back(seeds[i]);
    }
    return true;
}

}  // namespace taps
