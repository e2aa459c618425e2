#include <catch2/catch_amalgamated.hpp>

#include "coarse/sparse.hpp"

using namespace coarse;

TEST_CASE("key table interns paths deterministically") {
    KeyTable t;
    auto a = t.child(KeyTable::root, std::string("left"));
    auto b = t.child(KeyTable::root, std::string("right"));
    auto a2 = t.child(KeyTable::root, std::string("left"));
    REQUIRE(a == a2);
    REQUIRE(a != b);
    REQUIRE(a != KeyTable::root);

    auto deep = t.intern({std::string("left"), std::int64_t{-4}, std::string("z")});
    auto again = t.intern({std::string("left"), std::int64_t{-4}, std::string("z")});
    REQUIRE(deep == again);
    REQUIRE(t.path_string(deep) == "left/-4/z");

    auto p = t.path(deep);
    REQUIRE(p.size() == 3);
    REQUIRE(std::get<std::int64_t>(p[1]) == -4);
}

TEST_CASE("key ids are first-seen ordered") {
    KeyTable t;
    auto first = t.child(KeyTable::root, std::int64_t{10});
    auto second = t.child(KeyTable::root, std::int64_t{3});
    REQUIRE(first < second);
}

TEST_CASE("normalize_layout sorts and rejects duplicates") {
    SparseVec v;
    v.set(5, 1.0);
    v.set(2, -3.0);
    v.normalize_layout();
    REQUIRE(v.entries.front().first == 2);
    REQUIRE(v.entries.back().first == 5);

    SparseVec dup;
    dup.set(7, 1.0);
    dup.set(7, 2.0);
    REQUIRE_THROWS_AS(dup.normalize_layout(), input_error);
}

TEST_CASE("inner products and distances merge sorted supports") {
    SparseVec a, b;
    a.set(1, 2.0);
    a.set(3, -1.0);
    a.normalize_layout();
    b.set(3, 4.0);
    b.set(8, 0.5);
    b.normalize_layout();

    REQUIRE(dot(a, b) == -4.0);
    REQUIRE(l1_diff(a, b) == 2.0 + 5.0 + 0.5);
    REQUIRE(l2_diff_sq(a, b) == 4.0 + 25.0 + 0.25);
    REQUIRE(a.norm2_sq() == 5.0);
    REQUIRE(a.norm1() == 3.0);
}

TEST_CASE("transplant re-roots vectors and preserves values") {
    KeyTable from;
    SparseVec v;
    v.set(from.intern({std::string("x"), std::int64_t{1}}), 0.25);
    v.set(from.intern({std::string("y")}), 0.75);
    v.normalize_layout();

    KeyTable to;
    auto prefix = to.child(KeyTable::root, std::string("piece"));
    std::vector<std::int64_t> cache;
    SparseVec moved = transplant(v, from, to, prefix, &cache);
    SparseVec again = transplant(v, from, to, prefix, &cache);

    REQUIRE(moved.entries.size() == 2);
    REQUIRE(moved.norm1() == v.norm1());
    for (const auto& [k, val] : moved.entries) {
        auto path = to.path_string(k);
        REQUIRE(path.rfind("piece/", 0) == 0);
    }
    REQUIRE(moved.entries == again.entries);
}

TEST_CASE("prefixed re-roots within one table") {
    KeyTable t;
    SparseVec v;
    v.set(t.intern({std::int64_t{7}}), 1.0);
    v.normalize_layout();
    auto prefix = t.child(KeyTable::root, std::string("p"));
    SparseVec shifted = v.prefixed(t, prefix);
    REQUIRE(t.path_string(shifted.entries[0].first) == "p/7");
}
