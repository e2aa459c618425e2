#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "coarse/pipeline.hpp"

using namespace coarse;
using Catch::Matchers::WithinAbs;

namespace {
bool same_vectors(const FeatureMap& a, const FeatureMap& b) {
    if (a.vectors.size() != b.vectors.size()) return false;
    for (size_t x = 0; x < a.vectors.size(); ++x)
        if (a.vectors[x].entries != b.vectors[x].entries) return false;
    return true;
}
}  // namespace

TEST_CASE("single free factor collapses to the interval map") {
    auto z = std::make_shared<const MarkedGroup>(std::vector<int>{0});
    PipelineResult r = relhyp_embed_pipeline(z, 8);

    REQUIRE(r.levels_built == 1);
    REQUIRE(r.saturated);
    REQUIRE(r.levels[0].cover_sets == 1);
    REQUIRE(r.stage3.trivial_cover);
    REQUIRE(r.params.T == 32);

    // <xi_s, xi_t> = max(0, 1 - |s - t| / T): nothing but the bare interval
    // map survives the two full-weight gluings.
    const auto& space = *r.word_space;
    for (int x = 0; x < space.n(); ++x) {
        for (int y = x + 1; y < space.n(); ++y) {
            double expect = std::max(0.0, 1.0 - space.d(x, y) / 32.0);
            REQUIRE_THAT(dot(r.map.vectors[x], r.map.vectors[y]),
                         WithinAbs(expect, 1e-12));
        }
    }
    REQUIRE(r.certificate.close_ok);
    REQUIRE_THAT(r.certificate.max_close_diff,
                 WithinAbs(std::sqrt(2.0 * 2.0 / 32.0), 1e-12));
    REQUIRE(r.certificate.unit_norm_dev < 1e-12);
    REQUIRE_THAT(r.certificate.decay.at(8.0), WithinAbs(1.0 - 8.0 / 32.0, 1e-12));
}

TEST_CASE("order-two factors leave a pure retraction ladder") {
    auto dihedral = std::make_shared<const MarkedGroup>(std::vector<int>{2, 2});
    PipelineResult r = relhyp_embed_pipeline(dihedral, 8);

    // Every coset line is a single point inside the collar, so no level
    // hands out weight and the map stays constant.
    REQUIRE(r.levels_built == 8);
    REQUIRE(r.saturated);
    for (const LevelReport& lvl : r.levels) {
        REQUIRE(lvl.cover_sets == 1);
        REQUIRE(lvl.ramping == 0);
        REQUIRE(lvl.retracted > 0);
        REQUIRE(lvl.glue.max_close_diff == 0.0);
        REQUIRE(lvl.glue.triangle_ok);
    }
    REQUIRE(r.certificate.close_ok);
    REQUIRE(r.certificate.max_close_diff == 0.0);
    double diam = r.word_space->diameter();
    REQUIRE(r.certificate.decay.at(diam) == 1.0);
    REQUIRE(r.certificate.decay.at(diam + 1.0) == 0.0);
}

TEST_CASE("free two-factor ladder meets the step budget") {
    auto fab = std::make_shared<const MarkedGroup>(std::vector<int>{0, 0});
    PipelineResult r = relhyp_embed_pipeline(fab, 4);

    REQUIRE(r.levels_built == 4);
    REQUIRE(r.saturated);
    REQUIRE(r.word_space->n() == 161);

    REQUIRE(r.levels[0].ramping == 2);
    REQUIRE(r.levels[0].collar == 2);
    for (const LevelReport& lvl : r.levels) {
        REQUIRE(lvl.separated);
        REQUIRE(lvl.glue.triangle_ok);
        REQUIRE(lvl.glue.beta_sq_ok);
        REQUIRE(lvl.glue.decay_transfer_ok);
        REQUIRE(lvl.glue.max_close_diff <= r.params.step_budget + 1e-9);
        REQUIRE(lvl.max_plateau <= r.params.plateau_cap + 1e-12);
        for (const RampEntry& ramp : lvl.ramps) REQUIRE(ramp.plateau > 0.0);
    }

    REQUIRE(r.stage3.trivial_cover);
    REQUIRE(r.stage3.cover_sets == 1);
    REQUIRE(r.stage3.glue.max_close_diff <= r.params.step_budget + 1e-9);
    REQUIRE(r.certificate.close_ok);
    REQUIRE(r.certificate.unit_norm_dev < 1e-9);

    // Alternating unit-syllable words never clear a collar, so the pair
    // (abab, baba) keeps inner product 1 and the sup profile stays at 1 up
    // to the diameter. Genuine separation shows up on the long rays.
    int abab = -1, baba = -1, a4 = -1, b4 = -1;
    for (int x = 0; x < r.word_space->n(); ++x) {
        const std::string& l = r.word_space->label(x);
        if (l == "a.b.a.b") abab = x;
        if (l == "b.a.b.a") baba = x;
        if (l == "a4") a4 = x;
        if (l == "b4") b4 = x;
    }
    REQUIRE(abab >= 0);
    REQUIRE_THAT(dot(r.map.vectors[abab], r.map.vectors[baba]),
                 WithinAbs(1.0, 1e-12));
    REQUIRE(r.certificate.decay.at(r.word_space->diameter()) == 1.0);
    double ray_dot = dot(r.map.vectors[a4], r.map.vectors[b4]);
    REQUIRE(ray_dot < 0.9);
    REQUIRE(ray_dot > 0.0);

    PipelineResult again = relhyp_embed_pipeline(fab, 4);
    REQUIRE(same_vectors(r.map, again.map));
    REQUIRE(r.certificate.max_close_diff == again.certificate.max_close_diff);
}

TEST_CASE("a depth cap freezes deep content through truncation") {
    auto fab = std::make_shared<const MarkedGroup>(std::vector<int>{0, 0});
    PipelineParams params;
    params.depth_cap = 2;
    PipelineResult r = relhyp_embed_pipeline(fab, 4, params);

    REQUIRE(r.levels_built == 2);
    REQUIRE_FALSE(r.saturated);
    REQUIRE(static_cast<int>(r.map.vectors.size()) == r.word_space->n());
    REQUIRE(r.certificate.close_ok);
    REQUIRE(r.certificate.unit_norm_dev < 1e-9);
}

TEST_CASE("mixed factors ramp only where the window leaves room") {
    auto zz5 = std::make_shared<const MarkedGroup>(std::vector<int>{0, 5});
    PipelineResult r = relhyp_embed_pipeline(zz5, 5);

    REQUIRE(r.saturated);
    REQUIRE(r.levels_built == 5);

    // Level 1: the free line reaches depth 5 and ramps; the order-5 line
    // tops out at cost 2, inside the collar.
    REQUIRE(r.levels[0].ramping == 1);
    REQUIRE(r.levels[0].retracted == 1);
    REQUIRE(r.levels[0].ramps[0].factor == 0);

    bool some_free_ramp_past_level_one = false;
    for (const LevelReport& lvl : r.levels) {
        for (const RampEntry& ramp : lvl.ramps) {
            REQUIRE(ramp.factor == 0);
            if (lvl.level > 1) some_free_ramp_past_level_one = true;
        }
        REQUIRE(lvl.glue.max_close_diff <= r.params.step_budget + 1e-9);
    }
    REQUIRE(some_free_ramp_past_level_one);
    REQUIRE(r.certificate.close_ok);
}
