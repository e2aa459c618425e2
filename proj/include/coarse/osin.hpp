#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "coarse/cover.hpp"
#include "coarse/errors.hpp"
#include "coarse/group.hpp"
#include "coarse/metric_space.hpp"

namespace coarse {

// One coset line g H_k, restricted to the elements of syllable depth exactly
// n inside the window. coords[i] is the exponent t with members[i] = g a_k^t.
struct CosetPiece {
    int rep = -1;
    std::vector<int> members;
    std::vector<std::int64_t> coords;
};

// Splits the syllable-depth ball B(n) of a window as the depth n-1 core plus
// one piece per coset line per factor. The split is verified to be exact:
// every depth-n element lands in exactly one piece, every piece member is one
// coset move from its representative, and representatives live at depth n-1
// or less and never end in the piece's factor.
struct OsinDecomposition {
    int level = 0;
    std::vector<int> core;                          // depth <= n-1
    std::vector<std::vector<CosetPiece>> by_factor; // [k] -> pieces, rep id order
    long long covered = 0;                          // == |B(n) in window|
};

inline OsinDecomposition osin_decomposition(const GroupWindow& w, int n) {
    if (n < 1) throw input_error("decomposition level must be >= 1");
    const MarkedGroup& g = *w.group;
    OsinDecomposition out;
    out.level = n;
    out.core = rel_ball(w, n - 1);
    out.by_factor.resize(static_cast<size_t>(g.num_factors()));

    std::vector<std::map<int, CosetPiece>> pieces(
        static_cast<size_t>(g.num_factors()));
    long long depth_n = 0;
    for (int x = 0; x < w.n(); ++x) {
        if (w.rel_len[static_cast<size_t>(x)] != n) continue;
        ++depth_n;
        const NormalForm& form = w.elements[static_cast<size_t>(x)];
        Syllable last = form.back();
        NormalForm prefix(form.begin(), form.end() - 1);
        int rep = w.id(g.label(prefix));
        if (rep < 0)
            throw certificate_error("representative of " +
                                    w.labels[static_cast<size_t>(x)] +
                                    " escapes the window");
        if (w.rel_len[static_cast<size_t>(rep)] != n - 1 ||
            (!prefix.empty() && prefix.back().factor == last.factor))
            throw certificate_error("bad representative for " +
                                    w.labels[static_cast<size_t>(x)]);
        CosetPiece& p = pieces[static_cast<size_t>(last.factor)][rep];
        p.rep = rep;
        p.members.push_back(x);
        p.coords.push_back(last.exp);
    }

    long long assigned = 0;
    for (int k = 0; k < g.num_factors(); ++k) {
        for (auto& [rep, piece] : pieces[static_cast<size_t>(k)]) {
            for (size_t i = 0; i < piece.members.size(); ++i) {
                if (w.rel_metric(rep, piece.members[i]) != 1)
                    throw certificate_error(
                        "piece member " +
                        w.labels[static_cast<size_t>(piece.members[i])] +
                        " is not one coset move from " +
                        w.labels[static_cast<size_t>(rep)]);
            }
            assigned += static_cast<long long>(piece.members.size());
            out.by_factor[static_cast<size_t>(k)].push_back(std::move(piece));
        }
    }
    if (assigned != depth_n)
        throw certificate_error("coset pieces do not partition depth " +
                                std::to_string(n));
    out.covered = static_cast<long long>(out.core.size()) + depth_n;
    return out;
}

// Least collar width kappa <= window radius such that, after removing the
// kappa-neighbourhood of the depth n-1 core, distinct coset pieces of the
// given factor sit at word distance strictly greater than L from each other.
struct SeparationResult {
    int level = 0;
    int factor = 0;
    double L = 0;
    int kappa = 0;
    std::vector<int> reps;                   // pieces that survive the collar
    std::vector<std::vector<int>> families;  // surviving members per piece
};

inline SeparationResult separation_search(const GroupWindow& w,
                                          const FiniteMetricSpace& word,
                                          int n, int k, double L) {
    if (k < 0 || k >= w.group->num_factors()) throw input_error("bad factor index");
    OsinDecomposition dec = osin_decomposition(w, n);
    const auto& pieces = dec.by_factor[static_cast<size_t>(k)];

    std::string limiting;
    for (int kappa = 0; kappa <= w.radius; ++kappa) {
        SeparationResult out{n, k, L, kappa, {}, {}};
        for (const CosetPiece& p : pieces) {
            std::vector<int> kept;
            for (int m : p.members)
                if (word.d_to_set(m, dec.core) > kappa) kept.push_back(m);
            if (!kept.empty()) {
                out.reps.push_back(p.rep);
                out.families.push_back(std::move(kept));
            }
        }
        bool ok = true;
        for (size_t i = 0; i < out.families.size() && ok; ++i)
            for (size_t j = i + 1; j < out.families.size() && ok; ++j)
                if (set_distance(word, out.families[i], out.families[j]) <= L) {
                    ok = false;
                    limiting = w.labels[static_cast<size_t>(out.reps[i])] + " / " +
                               w.labels[static_cast<size_t>(out.reps[j])];
                }
        if (ok) return out;
    }
    throw certificate_error("no collar width up to " + std::to_string(w.radius) +
                            " separates factor " + std::to_string(k) +
                            " cosets at level " + std::to_string(n) +
                            " beyond " + std::to_string(L) +
                            "; limiting pair " + limiting);
}

// Cover of a space by annulus-and-cluster sets around the basepoint (id 0),
// coloured so that same-colour sets are separated; the separation quality is
// measured, not assumed. With 2R beyond the diameter the cover degenerates
// to the single full set.
struct AsdimCoverResult {
    SeparatedCover sep;
    double R = 0;
    int annuli = 0;
    bool trivial = false;
    CoverStats stats;
};

inline AsdimCoverResult relative_asdim_cover(std::shared_ptr<const FiniteMetricSpace> space,
                                             double R) {
    if (R <= 0) throw input_error("cover scale must be positive");
    AsdimCoverResult out;
    out.R = R;
    double diam = space->diameter();

    if (2 * R > diam) {
        Cover c;
        c.names.push_back("all");
        std::vector<int> all(static_cast<size_t>(space->n()));
        for (int i = 0; i < space->n(); ++i) all[static_cast<size_t>(i)] = i;
        c.sets.push_back(std::move(all));
        out.sep.cover = std::move(c);
        out.sep.family = {0};
        out.sep.k = 0;
        out.sep.L = kInf;
        out.annuli = 1;
        out.trivial = true;
        out.stats = cover_stats(*space, out.sep.cover);
        return out;
    }

    std::vector<int> annulus(static_cast<size_t>(space->n()));
    int max_annulus = 0;
    for (int x = 0; x < space->n(); ++x) {
        annulus[static_cast<size_t>(x)] =
            static_cast<int>(std::floor(space->d(0, x) / (2 * R)));
        max_annulus = std::max(max_annulus, annulus[static_cast<size_t>(x)]);
    }
    out.annuli = max_annulus + 1;

    // Greedy clusters within each annulus, seeds in id order.
    std::vector<int> cluster_of(static_cast<size_t>(space->n()), -1);
    std::vector<std::vector<int>> clusters;
    for (int x = 0; x < space->n(); ++x) {
        if (cluster_of[static_cast<size_t>(x)] >= 0) continue;
        int c = static_cast<int>(clusters.size());
        clusters.emplace_back();
        for (int y = x; y < space->n(); ++y) {
            if (cluster_of[static_cast<size_t>(y)] >= 0) continue;
            if (annulus[static_cast<size_t>(y)] != annulus[static_cast<size_t>(x)])
                continue;
            if (space->d(x, y) <= R) {
                cluster_of[static_cast<size_t>(y)] = c;
                clusters[static_cast<size_t>(c)].push_back(y);
            }
        }
    }

    // Greedy colouring of the R-proximity graph over clusters.
    std::vector<int> colour(clusters.size(), -1);
    int colours = 0;
    for (size_t i = 0; i < clusters.size(); ++i) {
        std::vector<bool> used(clusters.size() + 1, false);
        for (size_t j = 0; j < i; ++j)
            if (set_distance(*space, clusters[i], clusters[j]) <= R &&
                colour[j] >= 0)
                used[static_cast<size_t>(colour[j])] = true;
        int c = 0;
        while (used[static_cast<size_t>(c)]) ++c;
        colour[i] = c;
        colours = std::max(colours, c + 1);
    }

    double min_same = kInf;
    for (size_t i = 0; i < clusters.size(); ++i)
        for (size_t j = i + 1; j < clusters.size(); ++j)
            if (colour[i] == colour[j])
                min_same =
                    std::min(min_same, set_distance(*space, clusters[i], clusters[j]));

    Cover c;
    for (size_t i = 0; i < clusters.size(); ++i) {
        c.names.push_back("m" + std::to_string(annulus[static_cast<size_t>(
                                    clusters[i].front())]) +
                          ".c" + std::to_string(i));
        c.sets.push_back(clusters[i]);
    }
    out.sep.cover = std::move(c);
    out.sep.family.assign(colour.begin(), colour.end());
    out.sep.k = colours - 1;
    out.sep.L = min_same == kInf ? kInf : std::max(0.0, min_same - 1);
    out.stats = cover_stats(*space, out.sep.cover);
    return out;
}

}  // namespace coarse
