#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "coarse/errors.hpp"

namespace coarse {

// One step of a hierarchical coordinate key: either an integer (basis
// positions, ball radii) or a string (cover indices, point labels).
using KeyAtom = std::variant<std::int64_t, std::string>;

inline std::string atom_to_string(const KeyAtom& a) {
    if (std::holds_alternative<std::int64_t>(a))
        return std::to_string(std::get<std::int64_t>(a));
    return std::get<std::string>(a);
}

// Interns key paths (sequences of atoms) as dense ids. Every id maps to a
// (parent id, atom) pair, so the table is a trie over atoms; prefixing a
// whole vector is a per-key parent swap. Ids are assigned in first-seen
// order, which keeps runs deterministic.
class KeyTable {
public:
    static constexpr std::uint32_t root = 0;

    KeyTable() {
        nodes_.push_back(Node{root, std::int64_t{0}});  // sentinel for the empty path
    }

    std::uint32_t child(std::uint32_t parent, const KeyAtom& atom) {
        auto key = std::make_pair(parent, atom);
        auto it = lookup_.find(key);
        if (it != lookup_.end()) return it->second;
        std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
        nodes_.push_back(Node{parent, atom});
        lookup_.emplace(std::move(key), id);
        return id;
    }

    std::uint32_t intern(const std::vector<KeyAtom>& path) {
        std::uint32_t id = root;
        for (const auto& a : path) id = child(id, a);
        return id;
    }

    std::vector<KeyAtom> path(std::uint32_t id) const {
        std::vector<KeyAtom> out;
        while (id != root) {
            out.push_back(nodes_[id].atom);
            id = nodes_[id].parent;
        }
        std::reverse(out.begin(), out.end());
        return out;
    }

    std::string path_string(std::uint32_t id) const {
        auto p = path(id);
        std::string out;
        for (size_t i = 0; i < p.size(); ++i) {
            if (i) out += '/';
            out += atom_to_string(p[i]);
        }
        return out;
    }

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        std::uint32_t parent;
        KeyAtom atom;
    };
    std::vector<Node> nodes_;
    std::map<std::pair<std::uint32_t, KeyAtom>, std::uint32_t> lookup_;
};

// Sparse vector over interned keys, entries sorted by key id. All pairwise
// operations are sorted merges, so accumulation order is a function of the
// operands alone; equal inputs give bit-equal outputs.
struct SparseVec {
    std::vector<std::pair<std::uint32_t, double>> entries;

    void set(std::uint32_t key, double value) {
        entries.emplace_back(key, value);
    }

    void normalize_layout() {
        std::sort(entries.begin(), entries.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (size_t i = 1; i < entries.size(); ++i)
            if (entries[i].first == entries[i - 1].first)
                throw input_error("sparse vector has a duplicate key");
    }

    double norm2_sq() const {
        double s = 0;
        for (const auto& [k, v] : entries) s += v * v;
        return s;
    }

    double norm1() const {
        double s = 0;
        for (const auto& [k, v] : entries) s += std::abs(v);
        return s;
    }

    void scale(double c) {
        for (auto& [k, v] : entries) v *= c;
    }

    // Re-roots every key under `prefix`: realizes the direct-sum embedding
    // that keeps maps glued from different pieces orthogonal.
    SparseVec prefixed(KeyTable& table, std::uint32_t prefix) const;
};

inline SparseVec SparseVec::prefixed(KeyTable& table, std::uint32_t prefix) const {
    SparseVec out;
    out.entries.reserve(entries.size());
    for (const auto& [k, v] : entries) {
        auto p = table.path(k);
        std::uint32_t id = prefix;
        for (const auto& a : p) id = table.child(id, a);
        out.entries.emplace_back(id, v);
    }
    out.normalize_layout();
    return out;
}

// Copies a vector from one key table into another, re-rooted under
// `prefix`. The cache (old key -> new key) amortizes path decoding when
// many vectors from the same source are transplanted.
inline SparseVec transplant(const SparseVec& v, const KeyTable& from, KeyTable& to,
                            std::uint32_t prefix,
                            std::vector<std::int64_t>* cache = nullptr) {
    SparseVec out;
    out.entries.reserve(v.entries.size());
    for (const auto& [k, val] : v.entries) {
        if (cache) {
            if (cache->size() <= k) cache->resize(from.size(), -1);
            if ((*cache)[k] >= 0) {
                out.entries.emplace_back(static_cast<std::uint32_t>((*cache)[k]), val);
                continue;
            }
        }
        std::uint32_t id = prefix;
        for (const auto& a : from.path(k)) id = to.child(id, a);
        if (cache) (*cache)[k] = id;
        out.entries.emplace_back(id, val);
    }
    out.normalize_layout();
    return out;
}

inline double dot(const SparseVec& a, const SparseVec& b) {
    double s = 0;
    auto ia = a.entries.begin(), ib = b.entries.begin();
    while (ia != a.entries.end() && ib != b.entries.end()) {
        if (ia->first < ib->first) ++ia;
        else if (ib->first < ia->first) ++ib;
        else { s += ia->second * ib->second; ++ia; ++ib; }
    }
    return s;
}

// l1 distance by sorted merge; also the l1 partition variation when the
// operands are rows of a partition of unity (same arithmetic, same result).
inline double l1_diff(const SparseVec& a, const SparseVec& b) {
    double s = 0;
    auto ia = a.entries.begin(), ib = b.entries.begin();
    while (ia != a.entries.end() || ib != b.entries.end()) {
        if (ib == b.entries.end() || (ia != a.entries.end() && ia->first < ib->first)) {
            s += std::abs(ia->second); ++ia;
        } else if (ia == a.entries.end() || ib->first < ia->first) {
            s += std::abs(ib->second); ++ib;
        } else {
            s += std::abs(ia->second - ib->second); ++ia; ++ib;
        }
    }
    return s;
}

inline double l2_diff_sq(const SparseVec& a, const SparseVec& b) {
    double s = 0;
    auto ia = a.entries.begin(), ib = b.entries.begin();
    while (ia != a.entries.end() || ib != b.entries.end()) {
        if (ib == b.entries.end() || (ia != a.entries.end() && ia->first < ib->first)) {
            s += ia->second * ia->second; ++ia;
        } else if (ia == a.entries.end() || ib->first < ia->first) {
            s += ib->second * ib->second; ++ib;
        } else {
            double d = ia->second - ib->second;
            s += d * d; ++ia; ++ib;
        }
    }
    return s;
}

inline double l2_diff(const SparseVec& a, const SparseVec& b) {
    return std::sqrt(l2_diff_sq(a, b));
}

}  // namespace coarse
