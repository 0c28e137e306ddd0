#include <doctest.h>

#include "helpers.hpp"
#include "taps/netmap.hpp"

using namespace taps;
using namespace taps::test;

TEST_SUITE_BEGIN("netmap");

TEST_CASE("self link contains own entity") {
    NetworkMap map = MapBuilder().entity(7).location(1, 7).build();
    CHECK(map.entities_on_link(1, 1) == std::vector<EntityId>{7});
}

TEST_CASE("link lookup is symmetric and includes endpoint owners") {
    NetworkMap map = MapBuilder()
                         .entity(0)
                         .entity(1)
                         .entity(4)
                         .entity(5)
                         .location(10, 0)
                         .location(11, 1)
                         .link(10, 11, {4, 5})
                         .build();
    std::vector<EntityId> expect = {0, 1, 4, 5};
    CHECK(map.entities_on_link(10, 11) == expect);
    CHECK(map.entities_on_link(11, 10) == expect);
}

TEST_CASE("three node chain reads back transit entity") {
    // a - x - b with x owned by entity 2; traffic between a and b crosses x
    NetworkMap map = MapBuilder()
                         .entity(0)
                         .entity(1)
                         .entity(2)
                         .location(0, 0)
                         .location(1, 2)
                         .location(2, 1)
                         .link(0, 2, {2})
                         .build();
    CHECK(map.entities_on_link(0, 2) == std::vector<EntityId>{0, 1, 2});
}

TEST_CASE("unknown location raises lookup error") {
    NetworkMap map = MapBuilder().entity(0).location(1, 0).build();
    CHECK_THROWS_AS(map.entities_on_link(1, 99), LookupError);
}

TEST_CASE("longest prefix match wins") {
    NetworkMap map = MapBuilder()
                         .entity(0)
                         .location(1, 0)
                         .location(2, 0)
                         .prefix("10.0.0.0/8", 1)
                         .prefix("10.1.0.0/16", 2)
                         .build();
    CHECK(map.ip_to_location(parse_ipv4("10.1.2.3")) == 2);
    CHECK(map.ip_to_location(parse_ipv4("10.2.2.3")) == 1);
    CHECK_THROWS_AS(map.ip_to_location(parse_ipv4("11.0.0.1")), UnmappedAddressError);
}

TEST_CASE("synthetic table maps covering prefix") {
    NetworkMap map = MapBuilder().entity(0).location(1, 0).prefix("10.0.0.0/8", 1).build();
    CHECK(map.ip_to_location(parse_ipv4("10.1.2.3")) == 1);
}

TEST_CASE("synthetic generation is deterministic") {
    SyntheticMapSpec spec;
    spec.n_locations = 60;
    spec.n_entities = 20;
    spec.n_client_ranked = 10;
    NetworkMap a = generate_synthetic_map(spec, 42);
    NetworkMap b = generate_synthetic_map(spec, 42);
    CHECK(serialize_map(a) == serialize_map(b));
    NetworkMap c = generate_synthetic_map(spec, 43);
    CHECK(serialize_map(a) != serialize_map(c));
}

TEST_CASE("synthetic mean entities per link near target") {
    SyntheticMapSpec spec;
    spec.n_locations = 80;
    spec.n_entities = 60;
    spec.mean_entities_per_link = 4.0;
    NetworkMap map = generate_synthetic_map(spec, 7);
    double total = 0.0;
    std::size_t n = 0;
    for (LocationId a = 0; a < 80; ++a)
        for (LocationId b = a + 1; b < 80; ++b) {
            total += static_cast<double>(map.entities_on_link(a, b).size());
            ++n;
        }
    double mean = total / static_cast<double>(n);
    CHECK(mean > 3.5);
    CHECK(mean < 4.5);
}

TEST_CASE("single entity map degenerates to endpoints") {
    SyntheticMapSpec spec;
    spec.n_locations = 10;
    spec.n_entities = 1;
    spec.ixp_fraction = 0.0;
    NetworkMap map = generate_synthetic_map(spec, 3);
    for (LocationId a = 0; a < 10; ++a)
        for (LocationId b = a; b < 10; ++b)
            for (EntityId e : map.entities_on_link(a, b)) CHECK(e == 0);
}

TEST_CASE("invalid synthetic specs rejected") {
    SyntheticMapSpec spec;
    spec.n_locations = 0;
    spec.n_entities = 5;
    CHECK_THROWS_AS(generate_synthetic_map(spec, 1), ConfigError);
    spec.n_locations = 5;
    spec.n_entities = 0;
    CHECK_THROWS_AS(generate_synthetic_map(spec, 1), ConfigError);
}

TEST_CASE("serialization round trip is identity") {
    SyntheticMapSpec spec;
    spec.n_locations = 50;
    spec.n_entities = 30;
    spec.n_client_ranked = 5;
    NetworkMap map = generate_synthetic_map(spec, 11);
    std::vector<std::uint8_t> bytes = serialize_map(map);
    NetworkMap back = deserialize_map(bytes);
    CHECK(map == back);
    CHECK(serialize_map(back) == bytes);
}

TEST_CASE("explicit links survive the round trip") {
    NetworkMap map = MapBuilder()
                         .entity(0)
                         .entity(1)
                         .entity(2)
                         .location(5, 0)
                         .location(6, 1, 100, 3)
                         .link(5, 6, {2})
                         .prefix("1.2.3.0/24", 5)
                         .build();
    NetworkMap back = deserialize_map(serialize_map(map));
    CHECK(map == back);
    CHECK(back.location(6).client_rank == std::uint32_t{3});
}

TEST_CASE("corrupt stream reports offset") {
    NetworkMap map = MapBuilder().entity(0).location(1, 0).build();
    std::vector<std::uint8_t> bytes = serialize_map(map);
    bytes.resize(bytes.size() - 2);
    bool threw = false;
    try {
        deserialize_map(bytes);
    } catch (const FormatError& e) {
        threw = true;
        CHECK(e.offset <= bytes.size());
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
    CHECK(threw);
    std::vector<std::uint8_t> junk = {'X', 'X', 'X', 'X', 1, 0};
    CHECK_THROWS_AS(deserialize_map(junk), FormatError);
}

TEST_CASE("json import matches binary schema") {
    const char* text = R"({
      "entities": [{"id": 0, "kind": "as_org", "country": "US"},
                    {"id": 1, "kind": "ixp_org"}],
      "locations": [{"id": 4, "size": 10, "owner": 0, "client_rank": 1},
                     {"id": 5, "size": 3, "owner": 0}],
      "links": [{"a": 4, "b": 5, "entities": [1]}],
      "ip_index": [{"prefix": "9.0.0.0/8", "location": 4}]
    })";
    NetworkMap map = map_from_json(text);
    CHECK(map.entities_on_link(4, 5) == std::vector<EntityId>{0, 1});
    CHECK(map.ip_to_location(parse_ipv4("9.9.9.9")) == 4);
    NetworkMap again = map_from_json(map_to_json(map));
    CHECK(map == again);
    CHECK(map == deserialize_map(serialize_map(map)));
}

TEST_CASE("map invariants enforced at construction") {
    CHECK_THROWS_AS(MapBuilder().entity(0).location(1, 0).location(1, 0).build(), ArgumentError);
    CHECK_THROWS_AS(MapBuilder().entity(0).location(1, 9).build(), ArgumentError);
    CHECK_THROWS_AS(
        MapBuilder().entity(0).location(1, 0, 1, 2).location(2, 0, 1, 2).build(),
        ArgumentError);
    CHECK_THROWS_AS(MapBuilder().entity(0).location(1, 0).link(1, 3, {0}).build(),
                    ArgumentError);
}

TEST_CASE("lone AS detection counts owned locations") {
    NetworkMap map = MapBuilder()
                         .entity(0)
                         .entity(1)
                         .entity(2, EntityKind::ixp_org)
                         .location(1, 0)
                         .location(2, 1)
                         .location(3, 1)
                         .build();
    CHECK(map.is_lone_as(0));
    CHECK(!map.is_lone_as(1));
    CHECK(!map.is_lone_as(2));
}

TEST_SUITE_END();
