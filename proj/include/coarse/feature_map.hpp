#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "coarse/errors.hpp"
#include "coarse/metric_space.hpp"
#include "coarse/partition.hpp"
#include "coarse/sparse.hpp"

namespace coarse {

// A map from points into Hilbert space, one sparse vector per point over a
// shared key table. Keys are hierarchical: prefixing realizes direct sums.
struct FeatureMap {
    SpaceRef space;
    std::shared_ptr<KeyTable> table;
    std::vector<SparseVec> vectors;
};

inline constexpr double kNormSilentTol = 1e-9;
inline constexpr double kNormRenormTol = 1e-6;

// Norm policy: deviations below 1e-9 pass silently; up to 1e-6 the vector
// is renormalized (counted as a warning); beyond that the map is rejected.
// Returns the number of renormalized vectors.
inline int enforce_unit_norms(FeatureMap& map) {
    int renormalized = 0;
    for (int x = 0; x < map.space->n(); ++x) {
        double norm = std::sqrt(map.vectors[x].norm2_sq());
        double dev = std::abs(norm - 1.0);
        if (dev <= kNormSilentTol) continue;
        if (dev <= kNormRenormTol) {
            map.vectors[x].scale(1.0 / norm);
            ++renormalized;
        } else {
            throw input_error("vector at " + map.space->label(x) + " has norm " +
                              std::to_string(norm) + ", beyond repair tolerance");
        }
    }
    return renormalized;
}

inline double max_norm_deviation(const FeatureMap& map) {
    double dev = 0;
    for (const auto& v : map.vectors)
        dev = std::max(dev, std::abs(std::sqrt(v.norm2_sq()) - 1.0));
    return dev;
}

// sup |<xi_x, xi_y>| over pairs at distance >= S, tabulated at every
// realized distance. Nonincreasing in S by construction (running sup over
// shrinking pair sets); at(S) beyond the largest realized distance is 0.
struct DecayProfile {
    std::vector<double> distances;  // ascending, distinct realized distances
    std::vector<double> sups;       // aligned; sups is nonincreasing

    double at(double S) const {
        auto it = std::lower_bound(distances.begin(), distances.end(), S);
        if (it == distances.end()) return 0.0;
        return sups[it - distances.begin()];
    }

    static DecayProfile from_pairs(std::vector<std::pair<double, double>>& dist_absdot) {
        std::sort(dist_absdot.begin(), dist_absdot.end());
        DecayProfile out;
        double running = 0;
        for (auto it = dist_absdot.rbegin(); it != dist_absdot.rend(); ++it) {
            running = std::max(running, it->second);
            if (out.distances.empty() || out.distances.back() != it->first) {
                out.distances.push_back(it->first);
                out.sups.push_back(running);
            } else {
                out.sups.back() = running;
            }
        }
        std::reverse(out.distances.begin(), out.distances.end());
        std::reverse(out.sups.begin(), out.sups.end());
        return out;
    }

    // Pointwise sup on the merged grid: the family profile of several maps.
    static DecayProfile merge(const std::vector<DecayProfile>& members) {
        std::vector<double> grid;
        for (const auto& m : members)
            grid.insert(grid.end(), m.distances.begin(), m.distances.end());
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        DecayProfile out;
        for (double s : grid) {
            double v = 0;
            for (const auto& m : members) v = std::max(v, m.at(s));
            out.distances.push_back(s);
            out.sups.push_back(v);
        }
        return out;
    }
};

inline DecayProfile decay_profile(const FeatureMap& map) {
    std::vector<std::pair<double, double>> pairs;
    const auto& space = *map.space;
    pairs.reserve(static_cast<size_t>(space.n()) * (space.n() - 1) / 2);
    for (int x = 0; x < space.n(); ++x)
        for (int y = x + 1; y < space.n(); ++y)
            pairs.emplace_back(space.d(x, y), std::abs(dot(map.vectors[x], map.vectors[y])));
    return DecayProfile::from_pairs(pairs);
}

// Certificate that a unit-norm map moves close points little (condition of
// scale R, bound eps) together with the full contraction profile.
struct UECertificate {
    double R = 0, eps = 0;
    double max_close_diff = 0;
    int witness_x = -1, witness_y = -1;
    bool close_ok = true;
    double unit_norm_dev = 0;
    DecayProfile decay;
};

inline UECertificate check_char_ue(const FeatureMap& map, double R, double eps) {
    UECertificate cert;
    cert.R = R;
    cert.eps = eps;
    cert.unit_norm_dev = max_norm_deviation(map);
    if (cert.unit_norm_dev > kNormRenormTol)
        throw input_error("map is not unit-norm (max deviation " +
                          std::to_string(cert.unit_norm_dev) + ")");
    const auto& space = *map.space;
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(static_cast<size_t>(space.n()) * (space.n() - 1) / 2);
    for (int x = 0; x < space.n(); ++x)
        for (int y = x + 1; y < space.n(); ++y) {
            double d = space.d(x, y);
            pairs.emplace_back(d, std::abs(dot(map.vectors[x], map.vectors[y])));
            if (d <= R) {
                double diff = l2_diff(map.vectors[x], map.vectors[y]);
                if (diff > cert.max_close_diff) {
                    cert.max_close_diff = diff;
                    cert.witness_x = x;
                    cert.witness_y = y;
                }
            }
        }
    cert.decay = DecayProfile::from_pairs(pairs);
    cert.close_ok = cert.max_close_diff <= eps;
    return cert;
}

// Family version: every member is checked at the same scales and the sups
// are taken across the family, decay profile included.
struct EquiCertificate {
    std::vector<UECertificate> members;
    double family_max_close_diff = 0;
    bool close_ok = true;
    DecayProfile family_decay;
};

inline EquiCertificate check_equi(const std::vector<FeatureMap>& family, double R,
                                  double eps) {
    EquiCertificate out;
    std::vector<DecayProfile> profiles;
    for (const auto& m : family) {
        out.members.push_back(check_char_ue(m, R, eps));
        out.family_max_close_diff =
            std::max(out.family_max_close_diff, out.members.back().max_close_diff);
        profiles.push_back(out.members.back().decay);
    }
    out.close_ok = out.family_max_close_diff <= eps;
    out.family_decay = DecayProfile::merge(profiles);
    return out;
}

// ----------------------------------------------------------------------
// Alternative certificate: l1 unit vectors supported in balls.

struct PropertyAWitness {
    SpaceRef space;
    std::shared_ptr<KeyTable> table;  // keys are point labels
    std::vector<SparseVec> vectors;   // nonnegative, l1 norm 1
    double S = 0;                     // support radius
};

// Normalized ball indicators: xi_x = |B(x,n)|^{-1} * indicator of B(x,n).
// Near a boundary the ball is truncated by the space and the normalization
// keeps the witness valid.
inline PropertyAWitness make_ball_witness(SpaceRef space, double n) {
    PropertyAWitness w;
    w.space = space;
    w.table = std::make_shared<KeyTable>();
    w.S = n;
    w.vectors.resize(space->n());
    for (int x = 0; x < space->n(); ++x) {
        auto ball = space->ball(x, n);
        double v = 1.0 / static_cast<double>(ball.size());
        for (int z : ball)
            w.vectors[x].set(w.table->child(KeyTable::root, space->label(z)), v);
        w.vectors[x].normalize_layout();
    }
    return w;
}

struct PACertificate {
    double R = 0, eps = 0, S = 0;
    double max_close_l1 = 0;
    int witness_x = -1, witness_y = -1;
    bool close_ok = true;
    bool support_ok = true;
    std::string leak_point, leak_key;  // first support leak, if any
};

inline PACertificate check_property_a(const PropertyAWitness& w, double R, double eps) {
    const auto& space = *w.space;
    PACertificate cert;
    cert.R = R;
    cert.eps = eps;
    cert.S = w.S;
    for (int x = 0; x < space.n(); ++x) {
        double sum = 0;
        for (const auto& [k, v] : w.vectors[x].entries) {
            if (v < 0)
                throw input_error("witness has a negative value at " + space.label(x));
            sum += v;
            if (v != 0.0) {
                int z = space.id(atom_to_string(w.table->path(k).at(0)));
                if (space.d(x, z) > w.S && cert.support_ok) {
                    cert.support_ok = false;
                    cert.leak_point = space.label(x);
                    cert.leak_key = space.label(z);
                }
            }
        }
        if (std::abs(sum - 1.0) > kNormSilentTol)
            throw input_error("witness at " + space.label(x) + " has l1 mass " +
                              std::to_string(sum));
    }
    for (int x = 0; x < space.n(); ++x)
        for (int y = x + 1; y < space.n(); ++y)
            if (space.d(x, y) <= R) {
                double diff = l1_diff(w.vectors[x], w.vectors[y]);
                if (diff > cert.max_close_l1) {
                    cert.max_close_l1 = diff;
                    cert.witness_x = x;
                    cert.witness_y = y;
                }
            }
    cert.close_ok = cert.max_close_l1 <= eps;
    return cert;
}

// Transposes a witness into a partition of unity indexed by points:
// phi_z(x) = xi_x(z). Rows are shared with the witness, so the partition's
// l1 variation reproduces the witness deviations bit for bit. The witness
// support radius bounds the subordinated sets: U_z lies in B(z, S).
inline PartitionOfUnity pa_to_pou(const PropertyAWitness& w) {
    const auto& space = *w.space;
    PartitionOfUnity pou;
    pou.space = w.space;
    pou.table = w.table;
    pou.rows = w.vectors;

    std::vector<std::vector<int>> supports(space.n());
    for (int x = 0; x < space.n(); ++x)
        for (const auto& [k, v] : w.vectors[x].entries)
            if (v != 0.0) {
                int z = space.id(atom_to_string(w.table->path(k).at(0)));
                supports[z].push_back(x);
            }
    for (int z = 0; z < space.n(); ++z) {
        if (supports[z].empty()) continue;
        for (int x : supports[z])
            if (space.d(z, x) > w.S)
                throw certificate_error("support leak: phi_" + space.label(z) +
                                        " reaches " + space.label(x));
        pou.index_names.push_back(space.label(z));
        pou.index_keys.push_back(w.table->child(KeyTable::root, space.label(z)));
        if (!pou.subordinate_to) pou.subordinate_to = Cover{};
        pou.subordinate_to->names.push_back(space.label(z));
        pou.subordinate_to->sets.push_back(supports[z]);
    }
    pou.measured = cover_stats(space, *pou.subordinate_to);
    validate_pou(pou);
    return pou;
}

// ----------------------------------------------------------------------
// Square-root lift of a partition into unit vectors.

struct SqrtLiftResult {
    FeatureMap map;
    bool sq_bound_ok = true;     // ||xi_x - xi_y||^2 <= l1 variation, pairwise
    bool orthogonal_ok = true;   // exact zero inner products beyond set diameter
    double max_set_diameter = 0;
    int witness_x = -1, witness_y = -1;
};

inline SqrtLiftResult sqrt_lift(const PartitionOfUnity& pou) {
    SqrtLiftResult out;
    out.map.space = pou.space;
    out.map.table = pou.table;
    out.map.vectors.reserve(pou.rows.size());
    for (const auto& row : pou.rows) {
        SparseVec v;
        v.entries.reserve(row.entries.size());
        for (const auto& [k, val] : row.entries) v.entries.emplace_back(k, std::sqrt(val));
        out.map.vectors.push_back(std::move(v));
    }
    double dev = max_norm_deviation(out.map);
    if (dev > kNormSilentTol)
        throw certificate_error("square-root lift is not unit-norm (deviation " +
                                std::to_string(dev) + ")");

    const auto& space = *pou.space;
    if (pou.subordinate_to)
        for (const auto& set : pou.subordinate_to->sets)
            out.max_set_diameter = std::max(out.max_set_diameter, space.set_diameter(set));
    for (int x = 0; x < space.n() && (out.sq_bound_ok || out.orthogonal_ok); ++x)
        for (int y = x + 1; y < space.n(); ++y) {
            double sq = l2_diff_sq(out.map.vectors[x], out.map.vectors[y]);
            double var = l1_diff(pou.rows[x], pou.rows[y]);
            if (sq > var + kLipTol) {
                out.sq_bound_ok = false;
                out.witness_x = x;
                out.witness_y = y;
                break;
            }
            if (pou.subordinate_to && space.d(x, y) > out.max_set_diameter &&
                dot(out.map.vectors[x], out.map.vectors[y]) != 0.0) {
                out.orthogonal_ok = false;
                out.witness_x = x;
                out.witness_y = y;
                break;
            }
        }
    return out;
}

// ----------------------------------------------------------------------
// Gluing piecewise maps along a partition of unity.

struct GluePiece {
    Subspace domain;  // subspace of the glued space, must cover U_i(R)
    FeatureMap map;   // on domain.space, unit-norm
};

struct GlueReport {
    double R = 0;
    double alpha_max = 0;        // sqrt(sum_i phi_i(x) ||xi_i(x)-xi_i(y)||^2), worst pair
    double beta_max = 0;         // sqrt(sum_i (sqrt phi_i(x)-sqrt phi_i(y))^2), worst pair
    double max_close_diff = 0;   // measured ||eta(x)-eta(y)|| over pairs d <= R
    double pou_variation = 0;    // l1 variation of the partition at scale R
    double unit_norm_error = 0;  // max | ||eta(x)|| - 1 |
    bool triangle_ok = true;     // ||diff|| <= alpha + beta per pair
    bool beta_sq_ok = true;      // beta^2 <= l1 variation per pair
    bool decay_transfer_ok = true;  // |<eta(x),eta(y)>| <= worst piece decay at d(x,y)
    int renormalized_pieces = 0;
    int witness_x = -1, witness_y = -1;  // pair realizing max_close_diff
};

struct GlueResult {
    FeatureMap map;
    GlueReport report;
    DecayProfile decay;  // of the glued map
};

// eta(x) = (+)_i phi_i(x)^{1/2} xi_i(x), each piece re-rooted under its
// cover index. Pieces must be unit-norm on the R-enlargement of their sets;
// the report re-measures every bound the construction promises.
inline GlueResult glue(const PartitionOfUnity& pou, std::vector<GluePiece> pieces,
                       double R, bool want_decay_transfer = true) {
    const auto& space = *pou.space;
    if (!pou.subordinate_to)
        throw input_error("gluing needs a subordinated partition");
    if (pieces.size() != pou.index_names.size())
        throw input_error("gluing needs one piece per partition index");

    GlueResult out;
    out.report.R = R;

    // Domain checks: piece i must contain U_i(R).
    std::vector<std::vector<int>> into_domain(pieces.size(),
                                              std::vector<int>(space.n(), -1));
    for (size_t i = 0; i < pieces.size(); ++i) {
        for (size_t j = 0; j < pieces[i].domain.parent_ids.size(); ++j)
            into_domain[i][pieces[i].domain.parent_ids[j]] = static_cast<int>(j);
        auto dist = set_distances(space, pou.subordinate_to->sets[i]);
        for (int x = 0; x < space.n(); ++x)
            if (dist.to_set[x] <= R && into_domain[i][x] < 0)
                throw input_error("piece " + pou.index_names[i] +
                                  " does not cover the enlarged set at " + space.label(x));
        out.report.renormalized_pieces += enforce_unit_norms(pieces[i].map);
    }

    out.map.space = pou.space;
    out.map.table = std::make_shared<KeyTable>();
    out.map.vectors.resize(space.n());
    std::vector<std::uint32_t> prefixes;
    for (const auto& name : pou.index_names)
        prefixes.push_back(out.map.table->child(KeyTable::root, name));
    std::vector<std::vector<std::int64_t>> caches(pieces.size());

    std::vector<int> key_to_index(pou.table->size(), -1);
    for (size_t i = 0; i < pou.index_keys.size(); ++i)
        key_to_index[pou.index_keys[i]] = static_cast<int>(i);

    for (int x = 0; x < space.n(); ++x) {
        SparseVec& eta = out.map.vectors[x];
        for (const auto& [k, phi] : pou.rows[x].entries) {
            if (phi == 0.0) continue;
            int i = key_to_index[k];
            int xd = into_domain[i][x];
            if (xd < 0)
                throw certificate_error("partition mass outside piece domain at " +
                                        space.label(x));
            SparseVec part = transplant(pieces[i].map.vectors[xd], *pieces[i].map.table,
                                        *out.map.table, prefixes[i], &caches[i]);
            double c = std::sqrt(phi);
            for (auto& [kk, vv] : part.entries) eta.entries.emplace_back(kk, c * vv);
        }
        eta.normalize_layout();
        out.report.unit_norm_error = std::max(
            out.report.unit_norm_error, std::abs(std::sqrt(eta.norm2_sq()) - 1.0));
    }
    if (out.report.unit_norm_error > kNormRenormTol)
        throw certificate_error("glued map lost unit norms (deviation " +
                                std::to_string(out.report.unit_norm_error) + ")");

    // Piece decay profiles for the transfer bound.
    std::vector<DecayProfile> piece_decay;
    if (want_decay_transfer)
        for (const auto& p : pieces) piece_decay.push_back(decay_profile(p.map));

    std::vector<std::pair<double, double>> decay_pairs;
    decay_pairs.reserve(static_cast<size_t>(space.n()) * (space.n() - 1) / 2);
    for (int x = 0; x < space.n(); ++x)
        for (int y = x + 1; y < space.n(); ++y) {
            double d = space.d(x, y);
            double inner = dot(out.map.vectors[x], out.map.vectors[y]);
            decay_pairs.emplace_back(d, std::abs(inner));
            if (want_decay_transfer) {
                double bound = 0;
                for (const auto& prof : piece_decay) bound = std::max(bound, prof.at(d));
                if (std::abs(inner) > bound + kLipTol) out.report.decay_transfer_ok = false;
            }
            if (d > R) continue;

            double var = l1_diff(pou.rows[x], pou.rows[y]);
            out.report.pou_variation = std::max(out.report.pou_variation, var);
            double alpha_sq = 0, beta_sq = 0;
            for (size_t i = 0; i < pieces.size(); ++i) {
                double px = pou.value(static_cast<int>(i), x);
                double py = pou.value(static_cast<int>(i), y);
                if (px == 0.0 && py == 0.0) continue;
                int xd = into_domain[i][x], yd = into_domain[i][y];
                if (px > 0) {
                    if (yd < 0)
                        throw certificate_error("piece " + pou.index_names[i] +
                                                " missing a close neighbour");
                    alpha_sq += px * l2_diff_sq(pieces[i].map.vectors[xd],
                                                pieces[i].map.vectors[yd]);
                }
                double sx = std::sqrt(px), sy = std::sqrt(py);
                double piece_norm_sq =
                    yd >= 0 ? pieces[i].map.vectors[yd].norm2_sq()
                            : (xd >= 0 ? pieces[i].map.vectors[xd].norm2_sq() : 1.0);
                beta_sq += (sx - sy) * (sx - sy) * piece_norm_sq;
            }
            double alpha = std::sqrt(alpha_sq), beta = std::sqrt(beta_sq);
            double diff = l2_diff(out.map.vectors[x], out.map.vectors[y]);
            out.report.alpha_max = std::max(out.report.alpha_max, alpha);
            out.report.beta_max = std::max(out.report.beta_max, beta);
            if (diff > out.report.max_close_diff) {
                out.report.max_close_diff = diff;
                out.report.witness_x = x;
                out.report.witness_y = y;
            }
            if (diff > alpha + beta + kLipTol) out.report.triangle_ok = false;
            if (beta_sq > var + kLipTol) out.report.beta_sq_ok = false;
        }
    out.decay = DecayProfile::from_pairs(decay_pairs);
    return out;
}

// ----------------------------------------------------------------------
// Distance-bucketed contraction/expansion profile.

struct CompressionProfile {
    std::vector<double> distances;
    std::vector<double> rho_minus;  // min ||F(x)-F(y)|| per bucket
    std::vector<double> rho_plus;   // max ||F(x)-F(y)|| per bucket
    std::vector<double> decay_sup;  // sup |<F(x),F(y)>| over d >= bucket
    bool sampled = false;
    std::uint64_t seed = 0;
    std::uint64_t pair_count = 0;
};

inline constexpr int kExhaustivePointLimit = 2000;
inline constexpr std::uint64_t kSamplePairs = 1000000;

inline CompressionProfile compression_profile(const FeatureMap& map,
                                              std::uint64_t seed = 0x5eed) {
    const auto& space = *map.space;
    CompressionProfile out;
    std::map<double, std::array<double, 3>> buckets;  // d -> {min, max, absdot max}
    auto feed = [&](int x, int y) {
        double d = space.d(x, y);
        double diff = l2_diff(map.vectors[x], map.vectors[y]);
        double inner = std::abs(dot(map.vectors[x], map.vectors[y]));
        auto it = buckets.find(d);
        if (it == buckets.end())
            buckets.emplace(d, std::array<double, 3>{diff, diff, inner});
        else {
            it->second[0] = std::min(it->second[0], diff);
            it->second[1] = std::max(it->second[1], diff);
            it->second[2] = std::max(it->second[2], inner);
        }
        ++out.pair_count;
    };
    if (space.n() <= kExhaustivePointLimit) {
        for (int x = 0; x < space.n(); ++x)
            for (int y = x + 1; y < space.n(); ++y) feed(x, y);
    } else {
        out.sampled = true;
        out.seed = seed;
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<int> pick(0, space.n() - 1);
        for (std::uint64_t t = 0; t < kSamplePairs; ++t) {
            int x = pick(rng), y = pick(rng);
            if (x != y) feed(x, y);
        }
    }
    double running = 0;
    for (auto it = buckets.rbegin(); it != buckets.rend(); ++it) {
        running = std::max(running, it->second[2]);
        it->second[2] = running;
    }
    for (const auto& [d, v] : buckets) {
        out.distances.push_back(d);
        out.rho_minus.push_back(v[0]);
        out.rho_plus.push_back(v[1]);
        out.decay_sup.push_back(v[2]);
    }
    return out;
}

// ----------------------------------------------------------------------
// Generators used by fixtures and the factor pieces of group pipelines.

// Interval indicators on an integer line: xi_c = T^{-1/2} * indicator of
// [c, c+T). Then ||xi_a - xi_b||^2 = 2 min(|a-b|, T) / T.
inline FeatureMap make_interval_map(SpaceRef space, const std::vector<std::int64_t>& coords,
                                    std::int64_t T) {
    if (T <= 0) throw input_error("interval width must be positive");
    if (coords.size() != static_cast<size_t>(space->n()))
        throw input_error("one integer coordinate per point required");
    FeatureMap out;
    out.space = space;
    out.table = std::make_shared<KeyTable>();
    out.vectors.resize(space->n());
    double v = 1.0 / std::sqrt(static_cast<double>(T));
    for (int x = 0; x < space->n(); ++x) {
        for (std::int64_t t = 0; t < T; ++t)
            out.vectors[x].set(out.table->child(KeyTable::root, coords[x] + t), v);
        out.vectors[x].normalize_layout();
    }
    return out;
}

// The one-dimensional constant map: every point goes to the same unit
// vector. The minimal certified witness for a space of bounded diameter.
inline FeatureMap make_constant_map(SpaceRef space) {
    FeatureMap out;
    out.space = space;
    out.table = std::make_shared<KeyTable>();
    std::uint32_t key = out.table->child(KeyTable::root, std::int64_t{0});
    out.vectors.resize(space->n());
    for (auto& v : out.vectors) {
        v.set(key, 1.0);
        v.normalize_layout();
    }
    return out;
}

}  // namespace coarse
