#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coarse/cover.hpp"
#include "coarse/errors.hpp"
#include "coarse/metric_space.hpp"
#include "coarse/sparse.hpp"

namespace coarse {

using SpaceRef = std::shared_ptr<const FiniteMetricSpace>;

inline constexpr double kSumTol = 1e-9;

// A partition of unity on a finite metric space. Rows are per-point sparse
// vectors over interned index keys; an absent entry is an exact zero.
// Explicit zero entries, when present, are kept as written.
struct PartitionOfUnity {
    SpaceRef space;
    std::shared_ptr<KeyTable> table;
    std::vector<std::string> index_names;
    std::vector<std::uint32_t> index_keys;
    std::vector<SparseVec> rows;  // rows[x], sorted by key id

    std::optional<Cover> subordinate_to;   // aligned with index_names
    bool from_cover_formula = false;
    std::optional<CoverStats> measured;    // stats of subordinate_to, if computed

    int size() const { return static_cast<int>(index_names.size()); }

    double value(int index, int x) const {
        std::uint32_t key = index_keys[index];
        for (const auto& [k, v] : rows[x].entries)
            if (k == key) return v;
        return 0.0;
    }
};

// Checks the pointwise axioms: nonnegative values, row sums within kSumTol
// of one, and exact subordination when a cover is attached.
inline void validate_pou(const PartitionOfUnity& pou) {
    const auto& space = *pou.space;
    std::vector<std::vector<char>> member;
    if (pou.subordinate_to) {
        member.resize(pou.subordinate_to->sets.size(),
                      std::vector<char>(space.n(), 0));
        for (size_t i = 0; i < pou.subordinate_to->sets.size(); ++i)
            for (int x : pou.subordinate_to->sets[i]) member[i][x] = 1;
    }
    std::vector<int> key_to_index(pou.table->size(), -1);
    for (size_t i = 0; i < pou.index_keys.size(); ++i)
        key_to_index[pou.index_keys[i]] = static_cast<int>(i);

    for (int x = 0; x < space.n(); ++x) {
        double sum = 0;
        for (const auto& [k, v] : pou.rows[x].entries) {
            if (v < 0)
                throw certificate_error("negative partition value at " + space.label(x));
            if (k >= key_to_index.size() || key_to_index[k] < 0)
                throw certificate_error("partition row uses an unknown index key");
            int i = key_to_index[k];
            if (pou.subordinate_to && v != 0.0 && !member[i][x])
                throw certificate_error("partition index " + pou.index_names[i] +
                                        " is positive outside its set at " + space.label(x));
            sum += v;
        }
        if (std::abs(sum - 1.0) > kSumTol)
            throw certificate_error("partition row at " + space.label(x) +
                                    " sums to " + std::to_string(sum));
    }
}

// Distance-proportional partition subordinated to a cover:
//   phi_U(x) = d(x, X \ U) / sum_V d(x, X \ V).
// If any set is the whole space its complement distance is the +inf marker
// and the partition degenerates to the indicator of the first such set.
inline PartitionOfUnity pou_from_cover(SpaceRef space, const Cover& cover) {
    validate_cover(*space, cover);
    PartitionOfUnity out;
    out.space = space;
    out.table = std::make_shared<KeyTable>();
    out.index_names = cover.names;
    for (const auto& name : cover.names)
        out.index_keys.push_back(out.table->child(KeyTable::root, name));
    out.rows.resize(space->n());
    out.subordinate_to = cover;
    out.from_cover_formula = true;
    out.measured = cover_stats(*space, cover);

    int full = -1;
    for (size_t i = 0; i < cover.sets.size(); ++i)
        if (static_cast<int>(cover.sets[i].size()) == space->n()) { full = static_cast<int>(i); break; }
    if (full >= 0) {
        for (int x = 0; x < space->n(); ++x) {
            out.rows[x].set(out.index_keys[full], 1.0);
            out.rows[x].normalize_layout();
        }
        return out;
    }

    std::vector<SetDistances> dists;
    dists.reserve(cover.sets.size());
    for (const auto& set : cover.sets) dists.push_back(set_distances(*space, set));
    for (int x = 0; x < space->n(); ++x) {
        double denom = 0;
        for (size_t i = 0; i < cover.sets.size(); ++i) denom += dists[i].to_complement[x];
        if (!(denom > 0))
            throw certificate_error("zero partition denominator at " + space->label(x) +
                                    " (corrupt cover or metric)");
        for (size_t i = 0; i < cover.sets.size(); ++i) {
            double num = dists[i].to_complement[x];
            if (num > 0) out.rows[x].set(out.index_keys[i], num / denom);
        }
        out.rows[x].normalize_layout();
    }
    validate_pou(out);
    return out;
}

inline double linf_diff(const SparseVec& a, const SparseVec& b) {
    double m = 0;
    auto ia = a.entries.begin(), ib = b.entries.begin();
    while (ia != a.entries.end() || ib != b.entries.end()) {
        if (ib == b.entries.end() || (ia != a.entries.end() && ia->first < ib->first)) {
            m = std::max(m, std::abs(ia->second)); ++ia;
        } else if (ia == a.entries.end() || ib->first < ia->first) {
            m = std::max(m, std::abs(ib->second)); ++ib;
        } else {
            m = std::max(m, std::abs(ia->second - ib->second)); ++ia; ++ib;
        }
    }
    return m;
}

// Certificate for the l1 variation of a partition at scale R, with the
// Lipschitz bounds re-checked from measured cover constants when the
// partition came from the distance formula. Tolerance is 1e-9 throughout.
struct VariationCertificate {
    double R = 0;
    double max_variation = 0;
    int witness_x = -1, witness_y = -1;

    std::optional<double> claimed_bound;
    bool claimed_ok = true;

    // Only for formula-built partitions with measured cover stats.
    bool formula_checked = false;
    double multiplicity = 0;        // k + 1
    double lebesgue = 0;            // L (may be +inf)
    double lip_index_bound = 0;     // (2k+3)/L per unit distance
    double lip_sum_bound = 0;       // (2k+2)(2k+3)/L per unit distance
    bool lip_ok = true;
    int lip_witness_x = -1, lip_witness_y = -1;

    bool passed() const { return claimed_ok && lip_ok; }
};

inline constexpr double kLipTol = 1e-9;

inline VariationCertificate variation_certificate(
    const PartitionOfUnity& pou, double R,
    std::optional<double> claimed_bound = std::nullopt) {
    const auto& space = *pou.space;
    VariationCertificate cert;
    cert.R = R;
    cert.claimed_bound = claimed_bound;

    double lip1 = 0, lip2 = 0;
    bool formula = pou.from_cover_formula && pou.measured.has_value();
    if (formula) {
        double k = pou.measured->multiplicity - 1;
        double L = pou.measured->lebesgue_lower;
        cert.formula_checked = true;
        cert.multiplicity = k + 1;
        cert.lebesgue = L;
        lip1 = std::isinf(L) ? 0.0 : (2 * k + 3) / L;
        lip2 = std::isinf(L) ? 0.0 : (2 * k + 2) * (2 * k + 3) / L;
        cert.lip_index_bound = lip1;
        cert.lip_sum_bound = lip2;
    }

    for (int x = 0; x < space.n(); ++x)
        for (int y = x + 1; y < space.n(); ++y) {
            double dxy = space.d(x, y);
            double v = l1_diff(pou.rows[x], pou.rows[y]);
            if (dxy <= R && v > cert.max_variation) {
                cert.max_variation = v;
                cert.witness_x = x;
                cert.witness_y = y;
            }
            if (formula && cert.lip_ok) {
                double vi = linf_diff(pou.rows[x], pou.rows[y]);
                if (vi > lip1 * dxy + kLipTol || v > lip2 * dxy + kLipTol) {
                    cert.lip_ok = false;
                    cert.lip_witness_x = x;
                    cert.lip_witness_y = y;
                }
            }
        }
    if (claimed_bound && cert.max_variation > *claimed_bound + kLipTol)
        cert.claimed_ok = false;
    return cert;
}

// One inner partition for product refinement: lives on a subspace of the
// outer space (the R-enlargement of one outer cover set).
struct InnerPartition {
    Subspace domain;       // subspace of the outer space
    PartitionOfUnity pou;  // on domain.space
};

struct ProductRefineResult {
    PartitionOfUnity pou;
    double max_variation = 0;   // of the product at scale R
    double term_inner_max = 0;  // sum_i phi_i(x) * inner variation
    double term_outer_max = 0;  // sum_i |phi_i(x)-phi_i(y)| * inner mass
    double outer_variation = 0;
    double inner_variation_max = 0;
    bool split_ok = true;       // per-pair: product var <= term_inner + term_outer
    bool estimate_ok = true;    // max var <= outer var + max inner var
};

// theta_{i,j}(x) = phi_i(x) * psi^i_j(x), with psi^i extended by zero off
// its domain. Each inner partition must cover the R-enlargement of its
// outer set so picked-up mass stays a genuine partition.
inline ProductRefineResult product_refine(const PartitionOfUnity& outer,
                                          const std::vector<InnerPartition>& inners,
                                          double R) {
    const auto& space = *outer.space;
    if (!outer.subordinate_to)
        throw input_error("product refinement needs a subordinated outer partition");
    if (inners.size() != outer.index_names.size())
        throw input_error("product refinement: one inner partition per outer index");

    // Domain checks plus parent->domain id maps.
    std::vector<std::vector<int>> into_domain(inners.size(),
                                              std::vector<int>(space.n(), -1));
    for (size_t i = 0; i < inners.size(); ++i) {
        const auto& sub = inners[i].domain;
        for (size_t j = 0; j < sub.parent_ids.size(); ++j)
            into_domain[i][sub.parent_ids[j]] = static_cast<int>(j);
        auto dist = set_distances(space, outer.subordinate_to->sets[i]);
        for (int x = 0; x < space.n(); ++x)
            if (dist.to_set[x] <= R && into_domain[i][x] < 0)
                throw input_error("inner partition " + std::to_string(i) +
                                  " does not cover the R-enlargement of its set (point " +
                                  space.label(x) + ")");
    }

    ProductRefineResult out;
    auto& pou = out.pou;
    pou.space = outer.space;
    pou.table = std::make_shared<KeyTable>();
    pou.rows.resize(space.n());

    // Index (i,j) interned as path [outer name, inner name]; created in
    // (i, j) order so ids are deterministic.
    std::vector<std::vector<int>> pair_index(inners.size());
    std::vector<std::pair<int, int>> pairs;
    for (size_t i = 0; i < inners.size(); ++i) {
        std::uint32_t pi = pou.table->child(KeyTable::root, outer.index_names[i]);
        pair_index[i].resize(inners[i].pou.index_names.size());
        for (size_t j = 0; j < inners[i].pou.index_names.size(); ++j) {
            std::uint32_t key = pou.table->child(pi, inners[i].pou.index_names[j]);
            pou.index_names.push_back(outer.index_names[i] + "/" +
                                      inners[i].pou.index_names[j]);
            pou.index_keys.push_back(key);
            pair_index[i][j] = static_cast<int>(pairs.size());
            pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    }

    for (int x = 0; x < space.n(); ++x) {
        for (const auto& [ik, phi] : outer.rows[x].entries) {
            if (phi == 0.0) continue;
            int i = -1;
            for (size_t t = 0; t < outer.index_keys.size(); ++t)
                if (outer.index_keys[t] == ik) { i = static_cast<int>(t); break; }
            int xd = into_domain[i][x];
            if (xd < 0)
                throw certificate_error("outer mass outside inner domain at " +
                                        space.label(x));
            for (const auto& [jk, psi] : inners[i].pou.rows[xd].entries) {
                int j = -1;
                for (size_t t = 0; t < inners[i].pou.index_keys.size(); ++t)
                    if (inners[i].pou.index_keys[t] == jk) { j = static_cast<int>(t); break; }
                pou.rows[x].set(pou.index_keys[pair_index[i][j]], phi * psi);
            }
        }
        pou.rows[x].normalize_layout();
    }

    // Subordinated cover: U_i meet V^i_j, nonempty pairs only. Indices whose
    // intersection is empty carry no mass anywhere and are dropped.
    Cover sub;
    std::vector<char> keep(pairs.size(), 0);
    std::vector<std::vector<int>> keep_sets(pairs.size());
    for (size_t t = 0; t < pairs.size(); ++t) {
        auto [i, j] = pairs[t];
        if (!inners[i].pou.subordinate_to)
            throw input_error("inner partitions must be subordinated");
        std::vector<char> in_v(space.n(), 0);
        for (int xd : inners[i].pou.subordinate_to->sets[j])
            in_v[inners[i].domain.parent_ids[xd]] = 1;
        for (int x : outer.subordinate_to->sets[i])
            if (in_v[x]) keep_sets[t].push_back(x);
        keep[t] = !keep_sets[t].empty();
    }
    PartitionOfUnity filtered;
    filtered.space = pou.space;
    filtered.table = pou.table;
    filtered.rows = std::move(pou.rows);
    for (size_t t = 0; t < pairs.size(); ++t) {
        if (!keep[t]) continue;
        filtered.index_names.push_back(pou.index_names[t]);
        filtered.index_keys.push_back(pou.index_keys[t]);
        sub.names.push_back(pou.index_names[t]);
        sub.sets.push_back(std::move(keep_sets[t]));
    }
    filtered.subordinate_to = std::move(sub);
    filtered.measured = cover_stats(space, *filtered.subordinate_to);
    out.pou = std::move(filtered);
    validate_pou(out.pou);

    // Two-term split, reported and checked pairwise:
    //   sum |theta(x)-theta(y)| <= sum_i phi_i(x) |psi_i(x)-psi_i(y)|_1
    //                            + sum_i |phi_i(x)-phi_i(y)| * psi-mass(y).
    auto inner_var_at = [&](int i, int x, int y) {
        int xd = into_domain[i][x], yd = into_domain[i][y];
        static const SparseVec empty{};
        const SparseVec& a = xd >= 0 ? inners[i].pou.rows[xd] : empty;
        const SparseVec& b = yd >= 0 ? inners[i].pou.rows[yd] : empty;
        return l1_diff(a, b);
    };
    for (int x = 0; x < space.n(); ++x)
        for (int y = x + 1; y < space.n(); ++y) {
            if (space.d(x, y) > R) continue;
            double t1 = 0, t2 = 0;
            for (size_t i = 0; i < inners.size(); ++i) {
                double px = outer.value(static_cast<int>(i), x);
                double py = outer.value(static_cast<int>(i), y);
                if (px > 0) t1 += px * inner_var_at(static_cast<int>(i), x, y);
                double mass_y = 0;
                int yd = into_domain[i][y];
                if (yd >= 0)
                    for (const auto& [k, v] : inners[i].pou.rows[yd].entries) mass_y += v;
                t2 += std::abs(px - py) * mass_y;
            }
            double v = l1_diff(out.pou.rows[x], out.pou.rows[y]);
            out.max_variation = std::max(out.max_variation, v);
            out.term_inner_max = std::max(out.term_inner_max, t1);
            out.term_outer_max = std::max(out.term_outer_max, t2);
            if (v > t1 + t2 + kLipTol) out.split_ok = false;
        }
    out.outer_variation = variation_certificate(outer, R).max_variation;
    for (size_t i = 0; i < inners.size(); ++i)
        out.inner_variation_max =
            std::max(out.inner_variation_max,
                     variation_certificate(inners[i].pou, R).max_variation);
    if (out.max_variation > out.outer_variation + out.inner_variation_max + kLipTol)
        out.estimate_ok = false;
    return out;
}

struct PullbackResult {
    PartitionOfUnity pou;
    double x_variation = 0;  // at scale R upstairs
    double y_variation = 0;  // at scale S downstairs
    bool ok = true;          // x_variation <= y_variation
};

// Pulls a partition back along p : X -> Y. p must be (R, S)-bornologous,
// verified exhaustively: d(p(x), p(x')) <= S whenever d(x, x') <= R.
inline PullbackResult pullback_pou(SpaceRef xspace, const std::vector<int>& p,
                                   const PartitionOfUnity& ypou, double R, double S) {
    const auto& X = *xspace;
    const auto& Y = *ypou.space;
    if (p.size() != static_cast<size_t>(X.n()))
        throw input_error("pullback map must assign every upstream point");
    for (int y : p)
        if (y < 0 || y >= Y.n()) throw input_error("pullback map hits an unknown point");
    for (int x = 0; x < X.n(); ++x)
        for (int x2 = x + 1; x2 < X.n(); ++x2)
            if (X.d(x, x2) <= R && Y.d(p[x], p[x2]) > S)
                throw input_error("map is not (R,S)-bornologous at pair " + X.label(x) +
                                  "," + X.label(x2));

    PullbackResult out;
    out.pou.space = xspace;
    out.pou.table = ypou.table;
    out.pou.index_names = ypou.index_names;
    out.pou.index_keys = ypou.index_keys;
    out.pou.rows.reserve(X.n());
    for (int x = 0; x < X.n(); ++x) out.pou.rows.push_back(ypou.rows[p[x]]);

    if (ypou.subordinate_to) {
        Cover sub;
        std::vector<std::uint32_t> kept_keys;
        std::vector<std::string> kept_names;
        std::vector<SparseVec>& rows = out.pou.rows;
        std::vector<char> in_set(Y.n());
        for (size_t i = 0; i < ypou.subordinate_to->sets.size(); ++i) {
            std::fill(in_set.begin(), in_set.end(), 0);
            for (int y : ypou.subordinate_to->sets[i]) in_set[y] = 1;
            std::vector<int> pre;
            for (int x = 0; x < X.n(); ++x)
                if (in_set[p[x]]) pre.push_back(x);
            if (pre.empty()) continue;  // index carries no mass upstairs
            sub.names.push_back(ypou.index_names[i]);
            sub.sets.push_back(std::move(pre));
            kept_names.push_back(ypou.index_names[i]);
            kept_keys.push_back(ypou.index_keys[i]);
        }
        (void)rows;
        out.pou.index_names = std::move(kept_names);
        out.pou.index_keys = std::move(kept_keys);
        out.pou.subordinate_to = std::move(sub);
        out.pou.measured = cover_stats(X, *out.pou.subordinate_to);
    }
    validate_pou(out.pou);

    for (int x = 0; x < X.n(); ++x)
        for (int x2 = x + 1; x2 < X.n(); ++x2)
            if (X.d(x, x2) <= R)
                out.x_variation =
                    std::max(out.x_variation, l1_diff(out.pou.rows[x], out.pou.rows[x2]));
    for (int y = 0; y < Y.n(); ++y)
        for (int y2 = y + 1; y2 < Y.n(); ++y2)
            if (Y.d(y, y2) <= S)
                out.y_variation =
                    std::max(out.y_variation, l1_diff(ypou.rows[y], ypou.rows[y2]));
    out.ok = out.x_variation <= out.y_variation + kLipTol;
    return out;
}

// Scale bookkeeping for gluing: delta = 1/(40R), and the feasibility
// predicate k^2 + 1 <= 2 L delta eps. The arithmetic guarantee
// k^2 + 1 >= 2 (2k+2)(2k+3) R delta is verified for k = 0..10^6.
struct GluingParameters {
    double R = 0, eps = 0, delta = 0;
    bool arithmetic_verified = false;

    bool feasible(double k, double L) const { return k * k + 1 <= 2 * L * delta * eps; }
};

inline GluingParameters choose_parameters(double R, double eps) {
    if (!(R > 0) || !(eps > 0)) throw input_error("scales must be positive");
    GluingParameters out;
    out.R = R;
    out.eps = eps;
    out.delta = 1.0 / (40.0 * R);
    for (double k = 0; k <= 1e6; ++k) {
        double lhs = k * k + 1;
        double rhs = 2 * (2 * k + 2) * (2 * k + 3) * R * out.delta;
        if (lhs < rhs)
            throw certificate_error("parameter arithmetic fails at k = " +
                                    std::to_string(static_cast<long long>(k)));
    }
    out.arithmetic_verified = true;
    return out;
}

struct SeparatedPipelineResult {
    EnlargementResult enlargement;
    PartitionOfUnity pou;
    VariationCertificate certificate;
    double bound = 0;  // (2k+2)(2k+3) R / L
};

// (k, 2L)-separated cover -> L-enlargement -> distance-formula partition,
// certified at scale R against (2k+2)(2k+3) R / L <= eps.
inline SeparatedPipelineResult separated_cover_pipeline(SpaceRef space,
                                                        const SeparatedCover& sep,
                                                        double R, double eps) {
    double k = sep.k;
    double L = sep.L / 2.0;
    double bound = (2 * k + 2) * (2 * k + 3) * R / L;
    if (bound > eps) {
        double minimal = (2 * k + 2) * (2 * k + 3) * R / eps;
        throw input_error("separation too small: need L >= " + std::to_string(minimal) +
                          " (have " + std::to_string(L) + ") for variation <= " +
                          std::to_string(eps));
    }
    SeparatedPipelineResult out;
    out.bound = bound;
    out.enlargement = separated_enlargement(*space, sep);
    out.pou = pou_from_cover(space, out.enlargement.cover);
    out.certificate = variation_certificate(out.pou, R, bound);
    if (!out.certificate.passed())
        throw certificate_error("partition variation certificate failed at scale " +
                                std::to_string(R));
    return out;
}

}  // namespace coarse
