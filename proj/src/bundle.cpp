#include "taps/bundle.hpp"

#include <algorithm>

#include "taps/wire.hpp"

namespace taps {

namespace {

constexpr char kBundleMagic[4] = {'T', 'A', 'P', 'B'};
constexpr std::uint8_t kBundleVersion = 1;

std::uint16_t rep_index(const std::vector<LocationId>& reps, LocationId rep) {
    auto it = std::lower_bound(reps.begin(), reps.end(), rep);
    if (it == reps.end() || *it != rep) throw ArgumentError("representative not in rep list");
    return static_cast<std::uint16_t>(it - reps.begin());
}

}  // namespace

ClientBundle build_client_bundle(const NetworkMap& map, const Clustering& client_clusters,
                                 const Clustering& dest_clusters, LocationId client_loc,
                                 std::span<const LocationId> guard_locations,
                                 std::span<const LocationId> exit_locations) {
    ClientBundle b;
    b.client_location = client_loc;
    b.client_rep = client_clusters.representative_of(client_loc);
    b.client_reps = client_clusters.representatives;
    b.dest_reps = dest_clusters.representatives;
    if (b.client_reps.size() > 0xFFFF || b.dest_reps.size() > 0xFFFF)
        throw ArgumentError("bundle: more than 65535 clusters");

    for (const Location& loc : map.locations()) {
        b.location_ids.push_back(loc.id);
        b.client_cluster.push_back(
            rep_index(b.client_reps, client_clusters.representative_of(loc.id)));
        b.dest_cluster.push_back(
            rep_index(b.dest_reps, dest_clusters.representative_of(loc.id)));
    }

    b.guard_locations.assign(guard_locations.begin(), guard_locations.end());
    b.exit_locations.assign(exit_locations.begin(), exit_locations.end());
    for (LocationId g : b.guard_locations)
        b.guard_links.push_back(map.entities_on_link(b.client_rep, g));
    b.exit_links.reserve(b.dest_reps.size() * b.exit_locations.size());
    for (LocationId rep : b.dest_reps)
        for (LocationId e : b.exit_locations)
            b.exit_links.push_back(map.entities_on_link(rep, e));
    return b;
}

std::vector<std::uint8_t> write_client_bundle(ClientBundle& b) {
    ByteWriter w;
    w.bytes(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(kBundleMagic), 4));
    w.u8(kBundleVersion);
    w.varint(b.client_location);
    w.varint(b.client_rep);

    // cluster table section
    std::size_t cluster_start = w.size();
    w.varint(b.location_ids.size());
    w.u16(static_cast<std::uint16_t>(b.client_reps.size()));
    w.u16(static_cast<std::uint16_t>(b.dest_reps.size()));
    for (LocationId r : b.client_reps) w.varint(r);
    for (LocationId r : b.dest_reps) w.varint(r);
    // location ids are implicit (the map's ascending order); two u16
    // cluster indices per location
    for (std::size_t i = 0; i < b.location_ids.size(); ++i) {
        w.u16(b.client_cluster[i]);
        w.u16(b.dest_cluster[i]);
    }
    b.cluster_table_bytes = w.size() - cluster_start;

    // link list section: per link one length byte plus two-byte entity ids
    std::size_t links_start = w.size();
    auto put_links = [&](const std::vector<std::vector<EntityId>>& links) {
        for (const auto& set : links) {
            if (set.size() > 255) throw ArgumentError("bundle: link set exceeds 255 entities");
            w.u8(static_cast<std::uint8_t>(set.size()));
            for (EntityId e : set) {
                if (e > 0xFFFF) throw ArgumentError("bundle: entity id exceeds two bytes");
                w.u16(static_cast<std::uint16_t>(e));
            }
        }
    };
    w.varint(b.guard_locations.size());
    for (LocationId g : b.guard_locations) w.varint(g);
    w.varint(b.exit_locations.size());
    for (LocationId e : b.exit_locations) w.varint(e);
    put_links(b.guard_links);
    put_links(b.exit_links);
    b.link_list_bytes = w.size() - links_start;
    return w.take();
}

ClientBundle read_client_bundle(std::span<const std::uint8_t> data) {
    ByteReader r(data);
    for (char c : kBundleMagic)
        if (r.u8() != static_cast<std::uint8_t>(c)) r.fail("bad magic");
    if (r.u8() != kBundleVersion) r.fail("unsupported version");

    ClientBundle b;
    b.client_location = static_cast<LocationId>(r.varint());
    b.client_rep = static_cast<LocationId>(r.varint());

    std::size_t cluster_start = r.offset();
    std::uint64_t n_locs = r.varint();
    std::uint16_t n_client = r.u16();
    std::uint16_t n_dest = r.u16();
    b.client_reps.resize(n_client);
    for (auto& v : b.client_reps) v = static_cast<LocationId>(r.varint());
    b.dest_reps.resize(n_dest);
    for (auto& v : b.dest_reps) v = static_cast<LocationId>(r.varint());
    b.client_cluster.resize(n_locs);
    b.dest_cluster.resize(n_locs);
    for (std::uint64_t i = 0; i < n_locs; ++i) {
        b.client_cluster[i] = r.u16();
        b.dest_cluster[i] = r.u16();
        if (b.client_cluster[i] >= n_client || b.dest_cluster[i] >= n_dest)
            r.fail("cluster index out of range");
    }
    b.cluster_table_bytes = r.offset() - cluster_start;

    std::size_t links_start = r.offset();
    std::uint64_t n_guards = r.varint();
    b.guard_locations.resize(n_guards);
    for (auto& v : b.guard_locations) v = static_cast<LocationId>(r.varint());
    std::uint64_t n_exits = r.varint();
    b.exit_locations.resize(n_exits);
    for (auto& v : b.exit_locations) v = static_cast<LocationId>(r.varint());
    auto get_links = [&](std::size_t count) {
        std::vector<std::vector<EntityId>> links(count);
        for (auto& set : links) {
            std::uint8_t n = r.u8();
            set.resize(n);
            for (auto& e : set) e = r.u16();
        }
        return links;
    };
    b.guard_links = get_links(n_guards);
    b.exit_links = get_links(static_cast<std::size_t>(n_dest) * n_exits);
    b.link_list_bytes = r.offset() - links_start;
    r.expect_end();
    return b;
}

}  // namespace taps
