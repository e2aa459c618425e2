#include <catch2/catch_amalgamated.hpp>

#include "coarse/partition.hpp"
#include "fixtures.hpp"

using namespace coarse;

namespace {
Cover two_arc_cover() {
    return Cover{{"U0", "U1"}, {fixtures::range_ids(0, 6), fixtures::range_ids(4, 9)}};
}

SpaceRef subspace_ref(const Subspace& sub) {
    return std::make_shared<const FiniteMetricSpace>(sub.space);
}
}  // namespace

TEST_CASE("distance-formula partition on the two-arc cover") {
    // Oracle by hand at x=4: d(4, complement U0) = 3, d(4, complement U1) = 1,
    // so phi_U0(4) = 3/4.
    auto space = fixtures::line(0, 9);
    auto pou = pou_from_cover(space, two_arc_cover());
    REQUIRE(pou.size() == 2);
    REQUIRE(pou.from_cover_formula);
    REQUIRE(pou.value(0, 4) == 0.75);
    REQUIRE(pou.value(1, 4) == 0.25);
    REQUIRE(pou.value(0, 2) == 1.0);
    REQUIRE(pou.value(1, 2) == 0.0);
    REQUIRE(pou.measured->multiplicity == 2);
    REQUIRE(pou.measured->lebesgue_lower == 2.0);
    validate_pou(pou);
}

TEST_CASE("a full cover set turns the partition into its indicator") {
    auto space = fixtures::line(0, 9);
    Cover c{{"X", "A"}, {fixtures::range_ids(0, 9), fixtures::range_ids(0, 3)}};
    auto pou = pou_from_cover(space, c);
    for (int x = 0; x < space->n(); ++x) {
        REQUIRE(pou.value(0, x) == 1.0);
        REQUIRE(pou.value(1, x) == 0.0);
    }
}

TEST_CASE("variation certificate measures the worst close pair") {
    // phi(4) = (0.75, 0.25), phi(5) = (0.5, 0.5): l1 difference 0.5, and no
    // adjacent pair does worse.
    auto space = fixtures::line(0, 9);
    auto pou = pou_from_cover(space, two_arc_cover());
    auto cert = variation_certificate(pou, 1.0);
    REQUIRE(cert.max_variation == 0.5);
    REQUIRE(cert.formula_checked);
    REQUIRE(cert.multiplicity == 2.0);
    REQUIRE(cert.lebesgue == 2.0);
    REQUIRE(cert.lip_index_bound == 2.5);   // (2k+3)/L with k=1, L=2
    REQUIRE(cert.lip_sum_bound == 10.0);    // (2k+2)(2k+3)/L
    REQUIRE(cert.lip_ok);
    REQUIRE(cert.passed());

    auto failing = variation_certificate(pou, 1.0, 0.4);
    REQUIRE_FALSE(failing.claimed_ok);
    REQUIRE_FALSE(failing.passed());

    auto passing = variation_certificate(pou, 1.0, 0.5);
    REQUIRE(passing.claimed_ok);
}

TEST_CASE("linf difference of sparse rows") {
    SparseVec a, b;
    a.set(0, 0.75);
    a.set(1, 0.25);
    a.normalize_layout();
    b.set(0, 0.5);
    b.set(1, 0.5);
    b.normalize_layout();
    REQUIRE(linf_diff(a, b) == 0.25);
}

TEST_CASE("product refinement with trivial inners reproduces the outer") {
    auto space = fixtures::line(0, 9);
    auto outer = pou_from_cover(space, two_arc_cover());
    double R = 1.0;

    std::vector<InnerPartition> inners;
    for (int i = 0; i < 2; ++i) {
        auto grown = enlarge_cover(*space, *outer.subordinate_to, R).sets[i];
        auto sub = make_subspace(*space, grown);
        auto ref = subspace_ref(sub);
        Cover trivial{{"all"}, {fixtures::range_ids(0, ref->n() - 1)}};
        inners.push_back(InnerPartition{std::move(sub), pou_from_cover(ref, trivial)});
    }
    auto result = product_refine(outer, inners, R);
    REQUIRE(result.pou.size() == 2);
    REQUIRE(result.split_ok);
    REQUIRE(result.estimate_ok);
    REQUIRE(result.inner_variation_max == 0.0);
    auto outer_cert = variation_certificate(outer, R);
    REQUIRE(result.max_variation == outer_cert.max_variation);
    for (int x = 0; x < space->n(); ++x)
        for (int i = 0; i < 2; ++i)
            REQUIRE(result.pou.value(i, x) == outer.value(i, x));
}

TEST_CASE("product refinement with genuine inners stays a partition") {
    auto space = fixtures::line(0, 9);
    auto outer = pou_from_cover(space, two_arc_cover());
    double R = 1.0;

    std::vector<InnerPartition> inners;
    for (int i = 0; i < 2; ++i) {
        auto grown = enlarge_cover(*space, *outer.subordinate_to, R).sets[i];
        auto sub = make_subspace(*space, grown);
        auto ref = subspace_ref(sub);
        int n = ref->n();
        // Two overlapping halves of the domain.
        Cover halves{{"lo", "hi"},
                     {fixtures::range_ids(0, n / 2 + 1), fixtures::range_ids(n / 2 - 1, n - 1)}};
        inners.push_back(InnerPartition{std::move(sub), pou_from_cover(ref, halves)});
    }
    auto result = product_refine(outer, inners, R);
    validate_pou(result.pou);
    REQUIRE(result.pou.size() <= 4);
    REQUIRE(result.split_ok);
    REQUIRE(result.estimate_ok);
    REQUIRE(result.max_variation <=
            result.outer_variation + result.inner_variation_max + kLipTol);

    SECTION("inner domains must reach the R-enlargement") {
        auto small = make_subspace(*space, outer.subordinate_to->sets[0]);
        auto ref = subspace_ref(small);
        Cover trivial{{"all"}, {fixtures::range_ids(0, ref->n() - 1)}};
        std::vector<InnerPartition> bad;
        bad.push_back(InnerPartition{std::move(small), pou_from_cover(ref, trivial)});
        bad.push_back(std::move(inners[1]));
        REQUIRE_THROWS_AS(product_refine(outer, bad, R), input_error);
    }
}

TEST_CASE("pullback along a bornologous map") {
    auto X = fixtures::line(0, 19);
    auto Y = fixtures::line(0, 9);
    std::vector<int> p;
    for (int x = 0; x < 20; ++x) p.push_back(x / 2);

    auto ypou = pou_from_cover(Y, two_arc_cover());
    auto result = pullback_pou(X, p, ypou, 1.0, 1.0);
    REQUIRE(result.ok);
    REQUIRE(result.x_variation <= result.y_variation + kLipTol);
    REQUIRE(result.pou.rows.size() == 20);
    // Upstairs value is the downstairs value at the image.
    REQUIRE(result.pou.value(0, 8) == ypou.value(0, 4));
    validate_pou(result.pou);

    SECTION("maps that spread close pairs are refused") {
        REQUIRE_THROWS_AS(pullback_pou(X, p, ypou, 1.0, 0.4), input_error);
    }
    SECTION("wrong-sized maps are refused") {
        p.pop_back();
        REQUIRE_THROWS_AS(pullback_pou(X, p, ypou, 1.0, 1.0), input_error);
    }
}

TEST_CASE("scale bookkeeping for gluing") {
    auto params = choose_parameters(2.0, 0.5);
    REQUIRE(params.delta == 1.0 / 80.0);
    REQUIRE(params.arithmetic_verified);
    // k^2 + 1 <= 2 L delta eps with k=1 needs L >= 160.
    REQUIRE(params.feasible(1.0, 160.0));
    REQUIRE_FALSE(params.feasible(1.0, 159.0));
    REQUIRE_THROWS_AS(choose_parameters(0.0, 0.5), input_error);
}

TEST_CASE("separated cover pipeline certifies end to end") {
    auto space = fixtures::line(0, 9);
    SeparatedCover sep;
    sep.cover = Cover{{"A", "B", "C", "D"},
                      {fixtures::range_ids(0, 2), fixtures::range_ids(6, 8),
                       fixtures::range_ids(3, 5), {9}}};
    sep.family = {0, 0, 1, 1};
    sep.k = 1;
    sep.L = 3.0;

    // Bound is (2k+2)(2k+3) R / L' = 20 / 1.5 with R = 1.
    double bound = 20.0 / 1.5;
    auto result = separated_cover_pipeline(space, sep, 1.0, bound + 0.5);
    REQUIRE(result.bound == bound);
    REQUIRE(result.certificate.passed());
    REQUIRE(result.certificate.max_variation <= bound);

    SECTION("insufficient separation is refused up front") {
        REQUIRE_THROWS_AS(separated_cover_pipeline(space, sep, 1.0, 0.5), input_error);
    }
}
