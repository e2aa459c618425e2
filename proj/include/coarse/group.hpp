#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coarse/errors.hpp"
#include "coarse/metric_space.hpp"

namespace coarse {

// Free products of cyclic groups with one marked generator per factor.
// An element is an alternating sequence of syllables; exponents are kept
// canonical (nonzero for infinite factors, 1..m-1 for a factor of order m).

struct Syllable {
    int factor = 0;
    std::int64_t exp = 0;

    friend bool operator==(const Syllable&, const Syllable&) = default;
};

using NormalForm = std::vector<Syllable>;

class MarkedGroup {
public:
    // orders[k] == 0 means an infinite cyclic factor, otherwise the order (>= 2).
    explicit MarkedGroup(std::vector<int> orders) : orders_(std::move(orders)) {
        if (orders_.empty()) throw input_error("group needs at least one factor");
        if (orders_.size() > kLetters.size())
            throw input_error("too many factors: " + std::to_string(orders_.size()));
        for (int m : orders_)
            if (m < 0 || m == 1)
                throw input_error("factor order must be 0 (infinite) or >= 2, got " +
                                  std::to_string(m));
    }

    int num_factors() const { return static_cast<int>(orders_.size()); }
    int factor_order(int k) const { return orders_.at(static_cast<size_t>(k)); }

    char factor_letter(int k) const { return kLetters.at(static_cast<size_t>(k)); }

    std::int64_t canon_exp(int k, std::int64_t e) const {
        int m = factor_order(k);
        if (m == 0) return e;
        std::int64_t r = e % m;
        return r < 0 ? r + m : r;
    }

    // Length of one canonical syllable in the word metric of its factor.
    std::int64_t syllable_cost(int k, std::int64_t e) const {
        int m = factor_order(k);
        if (m == 0) return e < 0 ? -e : e;
        return std::min(e, m - e);
    }

    NormalForm identity() const { return {}; }

    NormalForm generator(int k, int sign) const {
        NormalForm g;
        append_syllable(g, {k, sign > 0 ? 1 : -1});
        return g;
    }

    NormalForm multiply(NormalForm a, const NormalForm& b) const {
        for (const Syllable& s : b) append_syllable(a, s);
        return a;
    }

    NormalForm inverse(const NormalForm& a) const {
        NormalForm r;
        for (auto it = a.rbegin(); it != a.rend(); ++it)
            append_syllable(r, {it->factor, -it->exp});
        return r;
    }

    std::int64_t word_length(const NormalForm& a) const {
        std::int64_t total = 0;
        for (const Syllable& s : a) total += syllable_cost(s.factor, s.exp);
        return total;
    }

    int relative_length(const NormalForm& a) const {
        return static_cast<int>(a.size());
    }

    bool is_canonical(const NormalForm& a) const {
        for (size_t i = 0; i < a.size(); ++i) {
            const Syllable& s = a[i];
            if (s.factor < 0 || s.factor >= num_factors()) return false;
            if (canon_exp(s.factor, s.exp) != s.exp || s.exp == 0) return false;
            if (i > 0 && a[i - 1].factor == s.factor) return false;
        }
        return true;
    }

    std::string label(const NormalForm& a) const {
        if (a.empty()) return "e";
        std::string out;
        for (size_t i = 0; i < a.size(); ++i) {
            if (i > 0) out += '.';
            out += factor_letter(a[i].factor);
            if (a[i].exp != 1) out += std::to_string(a[i].exp);
        }
        return out;
    }

    NormalForm parse(const std::string& text) const {
        if (text == "e") return {};
        if (text.empty()) throw input_error("empty element label");
        NormalForm out;
        size_t pos = 0;
        while (pos < text.size()) {
            size_t dot = text.find('.', pos);
            std::string part =
                text.substr(pos, dot == std::string::npos ? dot : dot - pos);
            pos = dot == std::string::npos ? text.size() : dot + 1;
            if (part.empty()) throw input_error("empty syllable in label: " + text);
            int k = letter_to_factor(part[0]);
            if (k < 0 || k >= num_factors())
                throw input_error("unknown factor letter in label: " + part);
            std::int64_t e = 1;
            if (part.size() > 1) {
                size_t used = 0;
                try {
                    e = std::stoll(part.substr(1), &used);
                } catch (const std::exception&) {
                    throw input_error("bad exponent in label: " + part);
                }
                if (used != part.size() - 1)
                    throw input_error("bad exponent in label: " + part);
            }
            e = canon_exp(k, e);
            if (e == 0) throw input_error("identity syllable in label: " + part);
            if (!out.empty() && out.back().factor == k)
                throw input_error("label not alternating: " + text);
            out.push_back({k, e});
        }
        return out;
    }

private:
    static constexpr std::string_view kLetters = "abcdfghijklmnopqrstuvwxyz";

    static int letter_to_factor(char c) {
        auto at = kLetters.find(c);
        return at == std::string_view::npos ? -1 : static_cast<int>(at);
    }

    // Appends one syllable, merging with the tail; alternation is preserved
    // because a cancelled tail exposes a syllable of a different factor.
    void append_syllable(NormalForm& a, Syllable s) const {
        s.exp = canon_exp(s.factor, s.exp);
        if (s.exp == 0) return;
        if (!a.empty() && a.back().factor == s.factor) {
            std::int64_t merged = canon_exp(s.factor, a.back().exp + s.exp);
            a.pop_back();
            if (merged != 0) a.push_back({s.factor, merged});
            return;
        }
        a.push_back(s);
    }

    std::vector<int> orders_;
};

// Ball of the word metric around the identity in breadth-first order from the
// identity; ids are stable across runs. Both lengths are stored per element;
// the word-length closed form is checked against the breadth-first depth at
// construction.
struct GroupWindow {
    std::shared_ptr<const MarkedGroup> group;
    int radius = 0;
    std::vector<NormalForm> elements;
    std::vector<std::string> labels;
    std::unordered_map<std::string, int> index;
    std::vector<std::int64_t> word_len;
    std::vector<int> rel_len;

    int n() const { return static_cast<int>(elements.size()); }

    int id(const std::string& label) const {
        auto it = index.find(label);
        return it == index.end() ? -1 : it->second;
    }

    NormalForm delta(int i, int j) const {
        return group->multiply(group->inverse(elements[static_cast<size_t>(i)]),
                               elements[static_cast<size_t>(j)]);
    }

    std::int64_t word_metric(int i, int j) const {
        return group->word_length(delta(i, j));
    }

    int rel_metric(int i, int j) const { return group->relative_length(delta(i, j)); }
};

namespace detail {

// Word-metric ball by breadth-first search over the marked generators.
// Generator order (factor ascending, then +1, -1) pins element ids.
template <typename Visit>
void word_ball_bfs(const MarkedGroup& g, int radius, Visit&& visit) {
    std::unordered_map<std::string, int> seen;
    std::vector<NormalForm> frontier{g.identity()};
    seen.emplace("e", 0);
    visit(g.identity(), "e", 0);
    for (int depth = 1; depth <= radius && !frontier.empty(); ++depth) {
        std::vector<NormalForm> next;
        for (const NormalForm& x : frontier) {
            for (int k = 0; k < g.num_factors(); ++k) {
                for (int sign : {1, -1}) {
                    if (sign < 0 && g.factor_order(k) == 2) continue;
                    NormalForm y = g.multiply(x, g.generator(k, sign));
                    std::string label = g.label(y);
                    if (seen.emplace(std::move(label), depth).second) {
                        visit(y, g.label(y), depth);
                        next.push_back(std::move(y));
                    }
                }
            }
        }
        frontier = std::move(next);
    }
}

}  // namespace detail

inline GroupWindow make_window(std::shared_ptr<const MarkedGroup> group, int radius) {
    if (radius < 0) throw input_error("window radius must be nonnegative");
    GroupWindow w;
    w.group = std::move(group);
    w.radius = radius;
    detail::word_ball_bfs(
        *w.group, radius,
        [&](const NormalForm& x, const std::string& label, int depth) {
            std::int64_t closed = w.group->word_length(x);
            if (closed != depth)
                throw certificate_error("word length " + std::to_string(closed) +
                                        " disagrees with breadth-first depth " +
                                        std::to_string(depth) + " at " + label);
            int id = w.n();
            w.elements.push_back(x);
            w.labels.push_back(label);
            w.index.emplace(label, id);
            w.word_len.push_back(closed);
            w.rel_len.push_back(w.group->relative_length(x));
        });
    return w;
}

enum class MetricKind { word, relative };

// Materializes the window as a finite metric space in either the word metric
// of the marked generators or the metric counting coset-line moves.
inline std::shared_ptr<const FiniteMetricSpace> window_space(const GroupWindow& w,
                                                             MetricKind kind) {
    size_t n = static_cast<size_t>(w.n());
    std::vector<double> d(n * n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        NormalForm inv_i = w.group->inverse(w.elements[i]);
        for (size_t j = i + 1; j < n; ++j) {
            NormalForm delta = w.group->multiply(inv_i, w.elements[j]);
            double v = kind == MetricKind::word
                           ? static_cast<double>(w.group->word_length(delta))
                           : static_cast<double>(w.group->relative_length(delta));
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    return std::make_shared<FiniteMetricSpace>(w.labels, std::move(d));
}

inline std::vector<int> rel_ball(const GroupWindow& w, int n) {
    std::vector<int> ids;
    for (int i = 0; i < w.n(); ++i)
        if (w.rel_len[static_cast<size_t>(i)] <= n) ids.push_back(i);
    return ids;
}

struct MetricAgreement {
    int radius = 0;
    long long checked = 0;
};

// Checks the word-length closed form against breadth-first distances from the
// identity over the full ball of the given radius.
inline MetricAgreement verify_word_metric(const MarkedGroup& g, int radius) {
    MetricAgreement out{radius, 0};
    detail::word_ball_bfs(g, radius,
                          [&](const NormalForm& x, const std::string& label, int depth) {
                              if (g.word_length(x) != depth)
                                  throw certificate_error(
                                      "word length closed form fails at " + label);
                              ++out.checked;
                          });
    return out;
}

// Checks that the syllable count matches breadth-first distance from the
// identity when every coset-line move a_k^t (t != 0) counts one step. Edges
// are restricted to the word ball of the given radius; prefixes of a normal
// form never leave that ball, so the restriction does not inflate distances.
inline MetricAgreement verify_relative_metric(const MarkedGroup& g, int radius) {
    std::vector<NormalForm> universe;
    std::unordered_map<std::string, int> ids;
    detail::word_ball_bfs(g, radius,
                          [&](const NormalForm& x, const std::string& label, int) {
                              ids.emplace(label, static_cast<int>(universe.size()));
                              universe.push_back(x);
                          });

    std::vector<int> dist(universe.size(), -1);
    std::vector<int> frontier{0};
    dist[0] = 0;
    // Marks y as reached (depth filled in by the caller); returns whether y
    // is inside the ball at all, so exponent walks know when to stop.
    auto try_edge = [&](const NormalForm& y, std::vector<int>& next) -> bool {
        auto it = ids.find(g.label(y));
        if (it == ids.end()) return false;
        size_t at = static_cast<size_t>(it->second);
        if (dist[at] < 0) {
            dist[at] = 0;
            next.push_back(it->second);
        }
        return true;
    };
    for (int depth = 1; !frontier.empty(); ++depth) {
        std::vector<int> next;
        for (int xi : frontier) {
            const NormalForm& x = universe[static_cast<size_t>(xi)];
            for (int k = 0; k < g.num_factors(); ++k) {
                int m = g.factor_order(k);
                if (m > 0) {
                    for (int t = 1; t < m; ++t)
                        try_edge(g.multiply(x, NormalForm{{k, t}}), next);
                } else {
                    // In-ball exponents form a contiguous range per direction.
                    for (std::int64_t t = 1;
                         try_edge(g.multiply(x, NormalForm{{k, t}}), next); ++t) {}
                    for (std::int64_t t = -1;
                         try_edge(g.multiply(x, NormalForm{{k, t}}), next); --t) {}
                }
            }
        }
        for (int yi : next) dist[static_cast<size_t>(yi)] = depth;
        frontier = std::move(next);
    }

    MetricAgreement out{radius, 0};
    for (size_t i = 0; i < universe.size(); ++i) {
        if (dist[i] != g.relative_length(universe[i]))
            throw certificate_error(
                "relative length disagrees with coset-move distance at " +
                g.label(universe[i]));
        ++out.checked;
    }
    return out;
}

}  // namespace coarse
