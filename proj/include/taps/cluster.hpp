#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "taps/netmap.hpp"
#include "taps/trust.hpp"

namespace taps {

// Location clustering for path selection. Destinations are clustered with a
// balanced k-medoids variant; clients use the most popular locations as
// fixed representatives. Every location in a cluster is treated as its
// representative during path selection, so clusters are anonymity sets and
// balance (by contained addresses) matters.

enum class ClusterKind : std::uint8_t { client = 0, destination = 1 };

struct ClusterParams {
    std::uint32_t num_clusters = 1;
    std::uint32_t max_rounds = 10;
    // Relay-side locations and weights used in LocationDistance calls:
    // guard locations for client clustering, exit locations for
    // destination clustering.
    std::vector<LocationId> relay_locations;
    std::vector<double> relay_weights;
};

struct Clustering {
    ClusterKind kind = ClusterKind::destination;
    std::vector<LocationId> representatives;                // final, sorted
    std::unordered_map<LocationId, LocationId> assignment;  // location -> final rep

    // Audit data. seed_order is the maximin choice sequence (destination
    // clustering only). round_representatives are the reps the final greedy
    // round started from; assignment_log records that round's order.
    std::vector<LocationId> seed_order;
    std::vector<LocationId> round_representatives;
    struct LogEntry {
        LocationId location;
        LocationId representative;  // id within round_representatives
    };
    std::vector<LogEntry> assignment_log;

    std::string map_hash;  // provenance
    std::string policy_hash;
    std::uint64_t seed = 0;

    LocationId representative_of(LocationId loc) const {
        auto it = assignment.find(loc);
        if (it == assignment.end())
            throw LookupError("location " + std::to_string(loc) + " not in clustering");
        return it->second;
    }
};

Clustering cluster_destinations(const NetworkMap& map, const TrustPolicy& policy,
                                const ClusterParams& params, std::uint64_t seed);

Clustering cluster_clients(const NetworkMap& map, const TrustPolicy& policy,
                           const ClusterParams& params);

std::string clustering_to_json(const Clustering& c);
Clustering clustering_from_json(const std::string& text);

// Audit helpers (`check` subcommand and the acceptance suite).
struct ClusteringAudit {
    bool partition_ok = false;  // total, single-valued, reps self-assigned
    bool balance_ok = false;    // replayed greedy always targets a minimal cluster
    std::string detail;
    bool ok() const { return partition_ok && balance_ok; }
};
ClusteringAudit audit_clustering(const NetworkMap& map, const Clustering& c);

// Brute-force check that each successive seed maximized the minimum
// distance to the seeds already chosen. Intended for <= ~50 locations.
bool verify_maximin_seeding(const NetworkMap& map, const TrustPolicy& policy,
                            const ClusterParams& params, std::span<const LocationId> seeds);

}  // namespace taps
