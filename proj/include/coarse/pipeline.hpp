#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coarse/cover.hpp"
#include "coarse/errors.hpp"
#include "coarse/feature_map.hpp"
#include "coarse/group.hpp"
#include "coarse/metric_space.hpp"
#include "coarse/osin.hpp"
#include "coarse/partition.hpp"

// End-to-end construction of a condition-(R, eps) unit map on a group window
// from maps on its factor lines. The ladder climbs the coset-depth balls
// B(1), B(2), ...: at each level the previous map is pulled back along the
// nearest-core retraction, each new coset line gets an interval (or constant)
// piece, and a partition of unity hands each line a tuned fraction of the
// weight. A final relative-metric cover glues the deepest level into the
// delivered map.

namespace coarse {

struct PipelineParams {
    double R = 2.0;
    double eps = 0.5;
    int depth_cap = 0;           // 0: climb until the coset ball fills the window
    std::int64_t T = 0;          // 0: 2 * ceil(2R / eps^2); width of interval pieces
    double step_budget = 0.0;    // 0: 0.9 * eps; per-level cost ceiling for ramps
    double plateau_cap = 0.75;   // max weight fraction any single coset may take
    int foot_gap = 2;            // dead zone between a coset foot and its ramp
};

// One tuned coset ramp: the line keeps weight 0 through the collar, then
// rises along a squared-sine arc of the given width up to the plateau.
struct RampEntry {
    std::string name;
    int factor = 0;
    int rep = -1;              // window id of the coset representative
    double plateau = 0;
    int width = 0;
    std::int64_t reach = 0;    // deepest line coordinate inside the window
};

struct LevelReport {
    int level = 0;
    int points = 0;
    int core_points = 0;
    int cover_sets = 0;
    std::vector<int> kappa;    // per-factor collar found by the separation search
    int collar = 0;
    double separation_gap = 0;
    bool separated = true;
    int ramping = 0;
    int retracted = 0;         // coset lines with no room past the collar
    double max_plateau = 0;
    std::vector<RampEntry> ramps;
    VariationCertificate pou_cert;
    GlueReport glue;
};

struct StageThreeReport {
    double R_rel = 0;
    bool trivial_cover = false;
    int cover_sets = 0;
    double variation_bound = 0;
    double x_variation = 0;
    GlueReport glue;
};

struct PipelineResult {
    PipelineParams params;
    int radius = 0;
    int levels_built = 0;
    bool saturated = false;    // the coset ball reached the whole window
    std::shared_ptr<const FiniteMetricSpace> word_space;
    std::shared_ptr<const FiniteMetricSpace> rel_space;
    FeatureMap map;
    UECertificate certificate;
    CompressionProfile profile;
    std::vector<LevelReport> levels;
    StageThreeReport stage3;
};

namespace detail {

// Squared-sine arc: 0 through the collar, 1 from collar + width on.
inline double ramp_value(std::int64_t j, int collar, int width) {
    if (j <= collar) return 0.0;
    if (j >= collar + static_cast<std::int64_t>(width)) return 1.0;
    double s = std::sin(std::numbers::pi / 2.0 *
                        static_cast<double>(j - collar) / static_cast<double>(width));
    return s * s;
}

// Exact worst step cost of handing weight c to one coset line. Both points
// of a close pair on the line share the retraction target, so the cost
// splits into the line content phi + phi' - 2 sqrt(phi phi') rho and the
// complementary-weight handoff (sqrt(1-phi) - sqrt(1-phi'))^2. rho is the
// interval overlap for a free line and 1 for a constant (finite) piece.
inline double worst_step_cost(double c, int collar, int width, std::int64_t reach,
                              bool interval_content, std::int64_t T, int max_step) {
    double worst = 0;
    for (int delta = 1; delta <= max_step; ++delta) {
        std::int64_t j0 = std::max<std::int64_t>(0, collar - delta);
        for (std::int64_t j = j0; j + delta <= reach; ++j) {
            double pa = c * ramp_value(j, collar, width);
            double pb = c * ramp_value(j + delta, collar, width);
            double rho = interval_content
                             ? std::max(0.0, 1.0 - static_cast<double>(delta) /
                                                       static_cast<double>(T))
                             : 1.0;
            double content = pa + pb - 2.0 * std::sqrt(pa * pb) * rho;
            double hand = std::sqrt(1.0 - pa) - std::sqrt(1.0 - pb);
            worst = std::max(worst, std::sqrt(std::max(0.0, content + hand * hand)));
        }
    }
    return worst;
}

// Largest plateau weight below the cap whose worst step cost stays under
// the budget. The cost is monotone in c, so a bisection suffices.
inline double plateau_search(int collar, int width, std::int64_t reach,
                             bool interval_content, std::int64_t T, int max_step,
                             double budget, double cap) {
    auto cost = [&](double c) {
        return worst_step_cost(c, collar, width, reach, interval_content, T, max_step);
    };
    if (cost(cap) <= budget) return cap;
    double lo = 0, hi = cap;
    for (int it = 0; it < 50; ++it) {
        double mid = 0.5 * (lo + hi);
        if (cost(mid) <= budget)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

inline std::shared_ptr<const FiniteMetricSpace> shared_copy(const FiniteMetricSpace& s) {
    return std::make_shared<const FiniteMetricSpace>(s);
}

}  // namespace detail

inline PipelineResult relhyp_embed_pipeline(std::shared_ptr<const MarkedGroup> group,
                                            int radius, PipelineParams params = {}) {
    const MarkedGroup& g = *group;
    if (!(params.R > 0) || !(params.eps > 0) || params.eps > 2.0)
        throw input_error("pipeline needs R > 0 and 0 < eps <= 2");
    if (params.depth_cap < 0) throw input_error("depth cap must be nonnegative");
    if (params.T == 0)
        params.T = 2 * static_cast<std::int64_t>(
                           std::ceil(2.0 * params.R / (params.eps * params.eps)));
    if (params.T < 2) throw input_error("interval width must be at least 2");
    if (params.step_budget == 0.0) params.step_budget = 0.9 * params.eps;
    if (params.step_budget > params.eps)
        throw input_error("step budget must not exceed eps");
    if (!(params.plateau_cap > 0) || params.plateau_cap >= 1.0)
        throw input_error("plateau cap must lie in (0, 1)");
    // A foot gap of at least R keeps the R-fringe of every coset support on
    // its own line: the representative stays more than R away, so the piece
    // domains never need off-line points.
    int foot_gap = std::max(params.foot_gap,
                            static_cast<int>(std::floor(params.R)));
    if (foot_gap < 1) foot_gap = 1;
    int max_step = std::max(1, static_cast<int>(std::floor(params.R)));

    GroupWindow w = make_window(group, radius);
    auto word = window_space(w, MetricKind::word);
    auto rel = window_space(w, MetricKind::relative);

    PipelineResult out;
    out.params = params;
    out.radius = radius;
    out.word_space = word;
    out.rel_space = rel;

    // Level 0: the constant map on the identity.
    std::vector<int> cur_ids = rel_ball(w, 0);
    FeatureMap cur =
        make_constant_map(detail::shared_copy(make_subspace(*word, cur_ids).space));

    int n = 0;
    while (static_cast<int>(cur_ids.size()) < word->n() &&
           (params.depth_cap == 0 || n < params.depth_cap)) {
        ++n;
        std::vector<int> ids = rel_ball(w, n);
        Subspace sub = make_subspace(*word, ids);
        auto space = detail::shared_copy(sub.space);
        std::unordered_map<int, int> local, prev_local;
        for (size_t i = 0; i < ids.size(); ++i) local[ids[i]] = static_cast<int>(i);
        for (size_t i = 0; i < cur_ids.size(); ++i)
            prev_local[cur_ids[i]] = static_cast<int>(i);

        LevelReport rep;
        rep.level = n;
        rep.points = static_cast<int>(ids.size());
        rep.core_points = static_cast<int>(cur_ids.size());

        if (g.num_factors() == 1 && n == 1) {
            // Single factor: the window is one line and the ladder is the
            // bare factor piece under a full-weight partition.
            Cover cover;
            cover.names = {"line"};
            cover.sets.push_back(std::vector<int>(ids.size()));
            std::iota(cover.sets[0].begin(), cover.sets[0].end(), 0);

            PartitionOfUnity pou;
            pou.space = space;
            pou.table = std::make_shared<KeyTable>();
            pou.index_names = cover.names;
            pou.index_keys.push_back(pou.table->child(KeyTable::root, cover.names[0]));
            pou.rows.resize(ids.size());
            for (auto& row : pou.rows) {
                row.set(pou.index_keys[0], 1.0);
                row.normalize_layout();
            }
            pou.subordinate_to = cover;
            pou.measured = cover_stats(*space, cover);
            validate_pou(pou);

            GluePiece piece;
            piece.domain = Subspace{sub.space, cover.sets[0]};
            auto dsp = detail::shared_copy(piece.domain.space);
            if (g.factor_order(0) == 0) {
                std::vector<std::int64_t> coords(ids.size(), 0);
                for (size_t i = 0; i < ids.size(); ++i) {
                    const NormalForm& form = w.elements[static_cast<size_t>(ids[i])];
                    if (!form.empty()) coords[i] = form[0].exp;
                }
                piece.map = make_interval_map(dsp, coords, params.T);
            } else {
                piece.map = make_constant_map(dsp);
            }

            rep.cover_sets = 1;
            rep.pou_cert = variation_certificate(pou, params.R);
            std::vector<GluePiece> pieces;
            pieces.push_back(std::move(piece));
            GlueResult gr = glue(pou, std::move(pieces), params.R);
            rep.glue = gr.report;
            cur = std::move(gr.map);
            cur_ids = std::move(ids);
            out.levels.push_back(std::move(rep));
            continue;
        }

        OsinDecomposition dec = osin_decomposition(w, n);

        // Nearest-core retraction: depth-n points drop to their coset
        // representative, everything else is already in the core.
        std::vector<int> retract(ids.size(), -1);
        for (size_t i = 0; i < ids.size(); ++i) {
            int gid = ids[i];
            if (w.rel_len[static_cast<size_t>(gid)] < n) retract[i] = prev_local.at(gid);
        }
        for (const auto& pieces_k : dec.by_factor)
            for (const CosetPiece& p : pieces_k)
                for (int m : p.members) retract[local.at(m)] = prev_local.at(p.rep);

        // Collar: wide enough that distinct coset lines past it sit more
        // than 2R apart, and at least the foot gap.
        rep.kappa.resize(static_cast<size_t>(g.num_factors()), 0);
        double gap = 2.0 * params.R;
        rep.separation_gap = gap;
        for (int k = 0; k < g.num_factors(); ++k)
            rep.kappa[static_cast<size_t>(k)] =
                separation_search(w, *word, n, k, gap).kappa;
        int collar = std::max(foot_gap,
                              *std::max_element(rep.kappa.begin(), rep.kappa.end()));
        rep.collar = collar;

        Cover cover;
        cover.names = {"core"};
        cover.sets.push_back(std::vector<int>(ids.size()));
        std::iota(cover.sets[0].begin(), cover.sets[0].end(), 0);
        std::vector<int> family = {0};

        struct LineData {
            RampEntry entry;
            const CosetPiece* piece = nullptr;
            std::vector<double> weight;      // aligned with piece->members
            std::vector<int> domain_local;   // level-local ids of the R-fringe
        };
        std::vector<LineData> lines;

        for (int k = 0; k < g.num_factors(); ++k) {
            bool interval = g.factor_order(k) == 0;
            for (const CosetPiece& p : dec.by_factor[static_cast<size_t>(k)]) {
                std::int64_t reach = 0;
                for (std::int64_t c : p.coords)
                    reach = std::max(reach, g.syllable_cost(k, c));
                int width = static_cast<int>(reach) - collar;
                if (width < 1) {
                    ++rep.retracted;
                    continue;
                }
                LineData line;
                line.piece = &p;
                line.entry.name = word->label(p.rep) + ">" +
                                  g.label(g.generator(k, +1));
                line.entry.factor = k;
                line.entry.rep = p.rep;
                line.entry.width = width;
                line.entry.reach = reach;
                line.entry.plateau = detail::plateau_search(
                    collar, width, reach, interval, params.T, max_step,
                    params.step_budget, params.plateau_cap);
                rep.max_plateau = std::max(rep.max_plateau, line.entry.plateau);

                std::vector<int> support;
                for (size_t i = 0; i < p.members.size(); ++i) {
                    std::int64_t j = g.syllable_cost(k, p.coords[i]);
                    double q = detail::ramp_value(j, collar, width);
                    line.weight.push_back(line.entry.plateau * q);
                    if (j > collar) support.push_back(local.at(p.members[i]));
                    if (static_cast<double>(j) >= collar + 1 - params.R)
                        line.domain_local.push_back(local.at(p.members[i]));
                }
                std::sort(support.begin(), support.end());
                std::sort(line.domain_local.begin(), line.domain_local.end());
                cover.names.push_back(line.entry.name);
                cover.sets.push_back(std::move(support));
                family.push_back(1 + k);
                lines.push_back(std::move(line));
            }
        }
        rep.ramping = static_cast<int>(lines.size());
        rep.cover_sets = static_cast<int>(cover.sets.size());

        SeparatedCover sep{cover, family, g.num_factors(), gap};
        SeparationCheck sc = check_separated(*space, sep);
        rep.separated = sc.separated;
        if (!sc.separated)
            throw certificate_error("level " + std::to_string(n) +
                                    ": coset supports violate the separation gap");

        PartitionOfUnity pou;
        pou.space = space;
        pou.table = std::make_shared<KeyTable>();
        pou.index_names = cover.names;
        for (const auto& name : cover.names)
            pou.index_keys.push_back(pou.table->child(KeyTable::root, name));
        pou.rows.resize(ids.size());
        std::vector<double> line_mass(ids.size(), 0.0);
        for (size_t li = 0; li < lines.size(); ++li) {
            const LineData& line = lines[li];
            for (size_t i = 0; i < line.piece->members.size(); ++i) {
                double phi = line.weight[i];
                if (phi <= 0.0) continue;
                int x = local.at(line.piece->members[i]);
                pou.rows[static_cast<size_t>(x)].set(pou.index_keys[li + 1], phi);
                line_mass[static_cast<size_t>(x)] += phi;
            }
        }
        for (size_t x = 0; x < pou.rows.size(); ++x) {
            pou.rows[x].set(pou.index_keys[0], 1.0 - line_mass[x]);
            pou.rows[x].normalize_layout();
        }
        pou.subordinate_to = cover;
        pou.measured = cover_stats(*space, cover);
        validate_pou(pou);
        rep.pou_cert = variation_certificate(pou, params.R);

        std::vector<GluePiece> pieces;
        pieces.reserve(lines.size() + 1);
        {
            GluePiece core;
            std::vector<int> all(ids.size());
            std::iota(all.begin(), all.end(), 0);
            core.domain = Subspace{sub.space, all};
            core.map.space = detail::shared_copy(core.domain.space);
            core.map.table = cur.table;
            core.map.vectors.reserve(ids.size());
            for (size_t i = 0; i < ids.size(); ++i)
                core.map.vectors.push_back(
                    cur.vectors[static_cast<size_t>(retract[i])]);
            pieces.push_back(std::move(core));
        }
        for (const LineData& line : lines) {
            GluePiece gp;
            std::vector<std::int64_t> coords;
            coords.reserve(line.domain_local.size());
            std::unordered_map<int, std::int64_t> coord_of;
            for (size_t i = 0; i < line.piece->members.size(); ++i)
                coord_of[local.at(line.piece->members[i])] = line.piece->coords[i];
            for (int x : line.domain_local) coords.push_back(coord_of.at(x));
            gp.domain = make_subspace(sub.space, line.domain_local);
            auto dsp = detail::shared_copy(gp.domain.space);
            if (g.factor_order(line.entry.factor) == 0)
                gp.map = make_interval_map(dsp, coords, params.T);
            else
                gp.map = make_constant_map(dsp);
            pieces.push_back(std::move(gp));
        }

        GlueResult gr = glue(pou, std::move(pieces), params.R);
        rep.glue = gr.report;
        rep.ramps.reserve(lines.size());
        for (const LineData& line : lines) rep.ramps.push_back(line.entry);
        cur = std::move(gr.map);
        cur_ids = std::move(ids);
        out.levels.push_back(std::move(rep));
    }
    out.levels_built = n;
    out.saturated = static_cast<int>(cur_ids.size()) == word->n();

    // If a depth cap stopped the climb early, the outer shells inherit the
    // deepest map through syllable truncation (the nearest point of the
    // deepest ball along the normal-form path).
    std::vector<int> onto(static_cast<size_t>(word->n()));
    if (out.saturated) {
        std::iota(onto.begin(), onto.end(), 0);
    } else {
        std::unordered_map<int, int> prev_local;
        for (size_t i = 0; i < cur_ids.size(); ++i)
            prev_local[cur_ids[i]] = static_cast<int>(i);
        for (int x = 0; x < word->n(); ++x) {
            NormalForm form = w.elements[static_cast<size_t>(x)];
            if (static_cast<int>(form.size()) > n)
                form.resize(static_cast<size_t>(n));
            int gid = w.id(g.label(form));
            if (gid < 0)
                throw certificate_error("truncation left the window at " +
                                        word->label(x));
            onto[static_cast<size_t>(x)] = prev_local.at(gid);
        }
    }

    // Final stage: a cover of the coset-move metric at half its diameter,
    // pushed through the enlargement pipeline and pulled back to the word
    // metric, glues the deepest level into the delivered map.
    double R_rel = std::floor(rel->diameter() / 2.0) + 1.0;
    AsdimCoverResult ac = relative_asdim_cover(rel, R_rel);
    SeparatedPipelineResult spp =
        separated_cover_pipeline(rel, ac.sep, R_rel, params.eps);
    std::vector<int> ident(static_cast<size_t>(word->n()));
    std::iota(ident.begin(), ident.end(), 0);
    PullbackResult pb = pullback_pou(word, ident, spp.pou, params.R, params.R);

    out.stage3.R_rel = R_rel;
    out.stage3.trivial_cover = ac.trivial;
    out.stage3.cover_sets = pb.pou.size();
    out.stage3.variation_bound = spp.bound;
    out.stage3.x_variation = pb.x_variation;

    std::vector<GluePiece> final_pieces;
    for (int i = 0; i < pb.pou.size(); ++i) {
        GluePiece gp;
        gp.domain = Subspace{*word, ident};
        gp.map.space = word;
        gp.map.table = cur.table;
        gp.map.vectors.reserve(onto.size());
        for (int x = 0; x < word->n(); ++x)
            gp.map.vectors.push_back(cur.vectors[static_cast<size_t>(
                onto[static_cast<size_t>(x)])]);
        final_pieces.push_back(std::move(gp));
    }
    GlueResult fin = glue(pb.pou, std::move(final_pieces), params.R);
    out.stage3.glue = fin.report;

    out.map = std::move(fin.map);
    out.certificate = check_char_ue(out.map, params.R, params.eps);
    out.profile = compression_profile(out.map);
    return out;
}

}  // namespace coarse
