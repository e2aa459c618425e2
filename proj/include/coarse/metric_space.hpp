#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "coarse/errors.hpp"

namespace coarse {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// A finite metric space: labelled points and a dense distance matrix.
// Construction does not validate; see validate_metric / make_metric_space.
class FiniteMetricSpace {
public:
    FiniteMetricSpace() = default;
    FiniteMetricSpace(std::vector<std::string> labels, std::vector<double> dist)
        : labels_(std::move(labels)), dist_(std::move(dist)) {
        if (dist_.size() != labels_.size() * labels_.size())
            throw input_error("distance matrix is not square");
        for (int i = 0; i < n(); ++i) {
            if (!index_.emplace(labels_[i], i).second)
                throw input_error("duplicate point label: " + labels_[i]);
        }
    }

    int n() const { return static_cast<int>(labels_.size()); }
    double d(int x, int y) const { return dist_[static_cast<size_t>(x) * labels_.size() + y]; }
    const std::string& label(int x) const { return labels_[x]; }
    const std::vector<std::string>& labels() const { return labels_; }

    int id(const std::string& label) const {
        auto it = index_.find(label);
        if (it == index_.end()) throw input_error("unknown point label: " + label);
        return it->second;
    }
    bool has_label(const std::string& label) const { return index_.count(label) != 0; }

    // Distance from a point to a point set; empty set has the +inf marker,
    // which downstream formulas treat as larger than any real.
    double d_to_set(int x, const std::vector<int>& set) const {
        double best = kInf;
        for (int y : set) best = std::min(best, d(x, y));
        return best;
    }

    std::vector<int> ball(int x, double r) const {
        std::vector<int> out;
        for (int y = 0; y < n(); ++y)
            if (d(x, y) <= r) out.push_back(y);
        return out;
    }

    double diameter() const {
        double m = 0;
        for (int x = 0; x < n(); ++x)
            for (int y = x + 1; y < n(); ++y) m = std::max(m, d(x, y));
        return m;
    }

    double set_diameter(const std::vector<int>& set) const {
        double m = 0;
        for (size_t i = 0; i < set.size(); ++i)
            for (size_t j = i + 1; j < set.size(); ++j)
                m = std::max(m, d(set[i], set[j]));
        return m;
    }

private:
    std::vector<std::string> labels_;
    std::vector<double> dist_;
    std::unordered_map<std::string, int> index_;
};

struct MetricViolation {
    std::string axiom;             // nonfinite | diagonal | symmetry | positivity | triangle
    std::vector<std::string> points;
    std::vector<double> values;
};

struct MetricValidation {
    bool valid = true;
    std::vector<MetricViolation> witnesses;      // capped sample per axiom
    std::unordered_map<std::string, std::int64_t> violation_counts;

    static constexpr int kWitnessCap = 8;
};

// Checks every metric axiom and reports each violated one with witnessing
// points. Witness lists are capped; counts are exact.
inline MetricValidation validate_metric(const std::vector<std::string>& labels,
                                        const std::vector<double>& dist) {
    const int n = static_cast<int>(labels.size());
    if (dist.size() != static_cast<size_t>(n) * n)
        throw input_error("distance matrix is not square");
    MetricValidation out;
    auto add = [&](const std::string& axiom, std::vector<std::string> pts,
                   std::vector<double> vals) {
        out.valid = false;
        auto& c = out.violation_counts[axiom];
        ++c;
        if (c <= MetricValidation::kWitnessCap)
            out.witnesses.push_back({axiom, std::move(pts), std::move(vals)});
    };
    auto at = [&](int i, int j) { return dist[static_cast<size_t>(i) * n + j]; };

    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (!std::isfinite(at(i, j)))
                add("nonfinite", {labels[i], labels[j]}, {at(i, j)});
    for (int i = 0; i < n; ++i)
        if (at(i, i) != 0.0)
            add("diagonal", {labels[i]}, {at(i, i)});
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (at(i, j) != at(j, i))
                add("symmetry", {labels[i], labels[j]}, {at(i, j), at(j, i)});
            if (at(i, j) <= 0.0 && std::isfinite(at(i, j)))
                add("positivity", {labels[i], labels[j]}, {at(i, j)});
        }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            for (int k = 0; k < n; ++k) {
                if (k == i || k == j) continue;
                if (at(i, j) > at(i, k) + at(k, j))
                    add("triangle", {labels[i], labels[j], labels[k]},
                        {at(i, j), at(i, k), at(k, j)});
            }
        }
    return out;
}

inline FiniteMetricSpace make_metric_space(std::vector<std::string> labels,
                                           std::vector<double> dist) {
    auto report = validate_metric(labels, dist);
    if (!report.valid) {
        std::string msg = "not a metric space:";
        for (auto& [axiom, count] : report.violation_counts)
            msg += " " + axiom + "(" + std::to_string(count) + ")";
        throw input_error(msg);
    }
    return FiniteMetricSpace(std::move(labels), std::move(dist));
}

// Subspace with the induced metric. Keeps the parent point ids so maps
// built on the subspace can be transported back.
struct Subspace {
    FiniteMetricSpace space;
    std::vector<int> parent_ids;  // subspace id -> parent id
};

inline Subspace make_subspace(const FiniteMetricSpace& parent, std::vector<int> members) {
    if (members.empty()) throw input_error("subspace needs at least one point");
    std::vector<std::string> labels;
    labels.reserve(members.size());
    for (int m : members) labels.push_back(parent.label(m));
    std::vector<double> dist(members.size() * members.size());
    for (size_t i = 0; i < members.size(); ++i)
        for (size_t j = 0; j < members.size(); ++j)
            dist[i * members.size() + j] = parent.d(members[i], members[j]);
    return Subspace{FiniteMetricSpace(std::move(labels), std::move(dist)), std::move(members)};
}

}  // namespace coarse
