#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "taps/cluster.hpp"
#include "taps/netmap.hpp"

namespace taps {

// The compact per-client artifact a trust-policy provider distributes: a
// cluster table (every location's client and destination cluster) and the
// entity lists for every virtual link the client will score, i.e. links
// from its own cluster representative to every guard location and from
// every destination representative to every exit location. Entity ids take
// two bytes; the full entity set of each link (endpoints included) is
// stored so the client needs no other topology data.

struct ClientBundle {
    LocationId client_location = 0;
    LocationId client_rep = 0;

    std::vector<LocationId> location_ids;  // ascending, defines table order
    std::vector<std::uint16_t> client_cluster;  // index into client_reps
    std::vector<std::uint16_t> dest_cluster;    // index into dest_reps
    std::vector<LocationId> client_reps;
    std::vector<LocationId> dest_reps;

    std::vector<LocationId> guard_locations;
    std::vector<LocationId> exit_locations;
    // guard_links[i]: entities on {client_rep, guard_locations[i]}
    std::vector<std::vector<EntityId>> guard_links;
    // exit_links[d * exit_locations.size() + e]: entities on
    // {dest_reps[d], exit_locations[e]}
    std::vector<std::vector<EntityId>> exit_links;

    // Serialized section sizes, filled by write_client_bundle.
    std::size_t cluster_table_bytes = 0;
    std::size_t link_list_bytes = 0;
};

ClientBundle build_client_bundle(const NetworkMap& map, const Clustering& client_clusters,
                                 const Clustering& dest_clusters, LocationId client_loc,
                                 std::span<const LocationId> guard_locations,
                                 std::span<const LocationId> exit_locations);

std::vector<std::uint8_t> write_client_bundle(ClientBundle& bundle);
ClientBundle read_client_bundle(std::span<const std::uint8_t> data);

}  // namespace taps
