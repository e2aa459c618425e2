#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "coarse/errors.hpp"
#include "coarse/metric_space.hpp"

namespace coarse {

// A cover of a finite metric space: named, nonempty point sets whose union
// is the whole space. Sets are sorted id lists.
struct Cover {
    std::vector<std::string> names;
    std::vector<std::vector<int>> sets;

    int size() const { return static_cast<int>(sets.size()); }
};

inline void validate_cover(const FiniteMetricSpace& space, const Cover& cover) {
    if (cover.names.size() != cover.sets.size())
        throw input_error("cover has mismatched names and sets");
    if (cover.sets.empty()) throw input_error("cover is empty");
    std::vector<char> hit(space.n(), 0);
    for (size_t i = 0; i < cover.sets.size(); ++i) {
        if (cover.sets[i].empty())
            throw input_error("cover set " + cover.names[i] + " is empty");
        for (size_t j = 1; j < cover.names.size(); ++j)
            if (j > i && cover.names[j] == cover.names[i])
                throw input_error("duplicate cover index: " + cover.names[i]);
        for (int x : cover.sets[i]) {
            if (x < 0 || x >= space.n())
                throw input_error("cover set " + cover.names[i] + " has an unknown point");
            hit[x] = 1;
        }
    }
    for (int x = 0; x < space.n(); ++x)
        if (!hit[x])
            throw input_error("cover misses point " + space.label(x));
}

inline std::vector<int> set_complement(const FiniteMetricSpace& space,
                                       const std::vector<int>& set) {
    std::vector<char> in(space.n(), 0);
    for (int x : set) in[x] = 1;
    std::vector<int> out;
    for (int x = 0; x < space.n(); ++x)
        if (!in[x]) out.push_back(x);
    return out;
}

// Per-point distances to one cover set and to its complement; the building
// block for every cover statistic below.
struct SetDistances {
    std::vector<double> to_set;         // d(x, U)
    std::vector<double> to_complement;  // d(x, X \ U), +inf when U = X
};

inline SetDistances set_distances(const FiniteMetricSpace& space, const std::vector<int>& set) {
    SetDistances out;
    out.to_set.resize(space.n());
    out.to_complement.resize(space.n());
    auto comp = set_complement(space, set);
    for (int x = 0; x < space.n(); ++x) {
        out.to_set[x] = space.d_to_set(x, set);
        out.to_complement[x] = space.d_to_set(x, comp);
    }
    return out;
}

struct CoverStats {
    int multiplicity = 0;          // max #sets containing a point
    double lebesgue_lower = 0;     // min_x max_i d(x, X \ U_i); +inf if some set is full
    double max_diameter = 0;
    int worst_multiplicity_point = -1;
    int worst_lebesgue_point = -1;
};

inline CoverStats cover_stats(const FiniteMetricSpace& space, const Cover& cover) {
    validate_cover(space, cover);
    CoverStats out;
    std::vector<SetDistances> dists;
    dists.reserve(cover.sets.size());
    for (const auto& set : cover.sets) dists.push_back(set_distances(space, set));

    out.lebesgue_lower = kInf;
    for (int x = 0; x < space.n(); ++x) {
        int count = 0;
        double best = 0;
        for (size_t i = 0; i < cover.sets.size(); ++i) {
            if (dists[i].to_set[x] == 0.0) ++count;
            best = std::max(best, dists[i].to_complement[x]);
        }
        if (count > out.multiplicity) {
            out.multiplicity = count;
            out.worst_multiplicity_point = x;
        }
        if (best < out.lebesgue_lower) {
            out.lebesgue_lower = best;
            out.worst_lebesgue_point = x;
        }
    }
    for (const auto& set : cover.sets)
        out.max_diameter = std::max(out.max_diameter, space.set_diameter(set));
    return out;
}

// Largest number of cover sets meeting a common ball of radius R.
inline int r_multiplicity(const FiniteMetricSpace& space, const Cover& cover, double R) {
    int best = 0;
    std::vector<SetDistances> dists;
    dists.reserve(cover.sets.size());
    for (const auto& set : cover.sets) dists.push_back(set_distances(space, set));
    for (int x = 0; x < space.n(); ++x) {
        int count = 0;
        for (size_t i = 0; i < cover.sets.size(); ++i)
            if (dists[i].to_set[x] <= R) ++count;
        best = std::max(best, count);
    }
    return best;
}

// R-enlargement: every set grows to its closed R-neighbourhood.
inline Cover enlarge_cover(const FiniteMetricSpace& space, const Cover& cover, double R) {
    Cover out;
    out.names = cover.names;
    out.sets.reserve(cover.sets.size());
    for (const auto& set : cover.sets) {
        auto d = set_distances(space, set);
        std::vector<int> grown;
        for (int x = 0; x < space.n(); ++x)
            if (d.to_set[x] <= R) grown.push_back(x);
        out.sets.push_back(std::move(grown));
    }
    return out;
}

// A cover split into families ("colors"); within each family distinct sets
// are supposed to be more than L apart.
struct SeparatedCover {
    Cover cover;
    std::vector<int> family;  // per cover set, in [0, k]
    int k = 0;                // families are 0..k
    double L = 0;             // strict separation claimed within a family
};

struct SeparationViolation {
    int family;
    std::string set_a, set_b;
    std::string point_a, point_b;  // closest pair realizing the violation
    double distance;
};

struct SeparationCheck {
    bool separated = true;
    double min_within_family = kInf;  // over distinct same-family pairs
    int multiplicity = 0;
    std::optional<SeparationViolation> violation;
};

inline double set_distance(const FiniteMetricSpace& space, const std::vector<int>& a,
                           const std::vector<int>& b, int* wa = nullptr, int* wb = nullptr) {
    double best = kInf;
    for (int x : a)
        for (int y : b)
            if (space.d(x, y) < best) {
                best = space.d(x, y);
                if (wa) *wa = x;
                if (wb) *wb = y;
            }
    return best;
}

inline SeparationCheck check_separated(const FiniteMetricSpace& space,
                                       const SeparatedCover& sep) {
    validate_cover(space, sep.cover);
    if (sep.family.size() != sep.cover.sets.size())
        throw input_error("separated cover: family assignment size mismatch");
    for (int f : sep.family)
        if (f < 0 || f > sep.k) throw input_error("separated cover: family out of range");

    SeparationCheck out;
    for (size_t i = 0; i < sep.cover.sets.size(); ++i)
        for (size_t j = i + 1; j < sep.cover.sets.size(); ++j) {
            if (sep.family[i] != sep.family[j]) continue;
            int wa = -1, wb = -1;
            double d = set_distance(space, sep.cover.sets[i], sep.cover.sets[j], &wa, &wb);
            out.min_within_family = std::min(out.min_within_family, d);
            if (d <= sep.L && out.separated) {
                out.separated = false;
                out.violation = SeparationViolation{sep.family[i], sep.cover.names[i],
                                                    sep.cover.names[j], space.label(wa),
                                                    space.label(wb), d};
            }
        }
    out.multiplicity = cover_stats(space, sep.cover).multiplicity;
    return out;
}

struct EnlargementResult {
    Cover cover;        // the L-enlargement, L = sep.L / 2
    CoverStats stats;   // re-measured, not assumed
    double L;           // the enlargement radius
};

// Input is a (k, 2L)-separated cover; output is its L-enlargement together
// with re-measured certificates: multiplicity <= k+1 and Lebesgue bound >= L.
inline EnlargementResult separated_enlargement(const FiniteMetricSpace& space,
                                               const SeparatedCover& sep) {
    auto check = check_separated(space, sep);
    if (!check.separated) {
        const auto& v = *check.violation;
        throw certificate_error("cover is not (k," + std::to_string(sep.L) +
                                ")-separated: sets " + v.set_a + "," + v.set_b +
                                " meet at d(" + v.point_a + "," + v.point_b +
                                ")=" + std::to_string(v.distance));
    }
    EnlargementResult out;
    out.L = sep.L / 2.0;
    out.cover = enlarge_cover(space, sep.cover, out.L);
    out.stats = cover_stats(space, out.cover);
    if (out.stats.multiplicity > sep.k + 1)
        throw certificate_error(
            "enlarged cover multiplicity " + std::to_string(out.stats.multiplicity) +
            " exceeds k+1 = " + std::to_string(sep.k + 1) + " at point " +
            space.label(out.stats.worst_multiplicity_point));
    if (!(out.stats.lebesgue_lower >= out.L))
        throw certificate_error(
            "enlarged cover Lebesgue bound " + std::to_string(out.stats.lebesgue_lower) +
            " is below L = " + std::to_string(out.L) + " at point " +
            space.label(out.stats.worst_lebesgue_point));
    return out;
}

}  // namespace coarse
