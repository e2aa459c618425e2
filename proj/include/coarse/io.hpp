#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "coarse/cover.hpp"
#include "coarse/errors.hpp"
#include "coarse/feature_map.hpp"
#include "coarse/group.hpp"
#include "coarse/metric_space.hpp"
#include "coarse/osin.hpp"
#include "coarse/partition.hpp"
#include "coarse/pipeline.hpp"

// File round-trips and report serialization. Everything here is
// deterministic: object fields keep insertion order, floating-point values
// use shortest round-trip form, and no timestamps or machine state leak
// into the output.

namespace coarse {

using Json = nlohmann::ordered_json;

// ----------------------------------------------------------------------
// Bytes, digests, numbers.

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw input_error("cannot write " + path);
    out << text;
    if (!out) throw input_error("short write to " + path);
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<size_t>(i)] = digits[v & 15];
    return out;
}

inline std::string digest_text(std::string_view bytes) { return hex64(fnv1a64(bytes)); }

inline std::string digest_file(const std::string& path) {
    return digest_text(read_text_file(path));
}

inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view token, const std::string& where) {
    double v = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size())
        throw input_error("bad number '" + std::string(token) + "' in " + where);
    return v;
}

// Seed override for sampled profiles: COARSE_SEED, default 0x5eed.
inline std::uint64_t default_seed() {
    const char* env = std::getenv("COARSE_SEED");
    if (env == nullptr || *env == '\0') return 0x5eed;
    std::uint64_t v = 0;
    auto res = std::from_chars(env, env + std::char_traits<char>::length(env), v);
    if (res.ec != std::errc{} || *res.ptr != '\0')
        throw input_error("COARSE_SEED must be an unsigned integer");
    return v;
}

// ----------------------------------------------------------------------
// Metric spaces: CSV square matrix with a label header, or the structured
// form {"labels": [...], "rows": [[...]]}. Loading keeps raw data so that
// invalid matrices can still be reported with witnesses.

struct RawSpace {
    std::vector<std::string> labels;
    std::vector<double> dist;  // row-major, n x n
};

inline std::string space_to_csv(const FiniteMetricSpace& space) {
    std::string out;
    for (int j = 0; j < space.n(); ++j) {
        if (j) out += ',';
        out += space.label(j);
    }
    out += '\n';
    for (int i = 0; i < space.n(); ++i) {
        for (int j = 0; j < space.n(); ++j) {
            if (j) out += ',';
            out += format_double(space.d(i, j));
        }
        out += '\n';
    }
    return out;
}

namespace detail {

inline std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            return out;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::vector<std::string> lines_of(std::string_view text) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start < text.size()) {
        size_t pos = text.find('\n', start);
        if (pos == std::string_view::npos) pos = text.size();
        std::string_view line = text.substr(start, pos - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) out.emplace_back(line);
        start = pos + 1;
    }
    return out;
}

}  // namespace detail

inline RawSpace space_from_csv(const std::string& text) {
    auto lines = detail::lines_of(text);
    if (lines.empty()) throw input_error("empty space file");
    RawSpace raw;
    raw.labels = detail::split(lines[0], ',');
    size_t n = raw.labels.size();
    if (lines.size() != n + 1)
        throw input_error("space file needs " + std::to_string(n) + " rows, has " +
                          std::to_string(lines.size() - 1));
    raw.dist.reserve(n * n);
    for (size_t i = 1; i < lines.size(); ++i) {
        auto cells = detail::split(lines[i], ',');
        if (cells.size() != n)
            throw input_error("row " + std::to_string(i) + " has " +
                              std::to_string(cells.size()) + " cells, needs " +
                              std::to_string(n));
        for (const auto& cell : cells)
            raw.dist.push_back(parse_double(cell, "row " + std::to_string(i)));
    }
    return raw;
}

inline RawSpace space_from_json(const Json& j) {
    RawSpace raw;
    if (!j.contains("labels") || !j.contains("rows"))
        throw input_error("structured space needs labels and rows");
    for (const auto& l : j.at("labels")) raw.labels.push_back(l.get<std::string>());
    size_t n = raw.labels.size();
    if (j.at("rows").size() != n) throw input_error("structured space is not square");
    for (const auto& row : j.at("rows")) {
        if (row.size() != n) throw input_error("structured space is not square");
        for (const auto& v : row) raw.dist.push_back(v.get<double>());
    }
    return raw;
}

inline RawSpace load_raw_space(const std::string& path) {
    std::string text = read_text_file(path);
    size_t first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{')
        return space_from_json(Json::parse(text));
    return space_from_csv(text);
}

inline std::string violation_text(const MetricViolation& w) {
    std::string out = w.axiom + " at (";
    for (size_t i = 0; i < w.points.size(); ++i) {
        if (i) out += ", ";
        out += w.points[i];
    }
    out += ")";
    for (size_t i = 0; i < w.values.size(); ++i)
        out += (i ? ", " : ": ") + format_double(w.values[i]);
    return out;
}

// Validated load: throws certificate_error with the first witness.
inline SpaceRef load_space(const std::string& path) {
    RawSpace raw = load_raw_space(path);
    MetricValidation v = validate_metric(raw.labels, raw.dist);
    if (!v.valid)
        throw certificate_error(path + ": " + violation_text(v.witnesses.front()));
    return std::make_shared<const FiniteMetricSpace>(std::move(raw.labels),
                                                     std::move(raw.dist));
}

// ----------------------------------------------------------------------
// Covers: {"sets": {name: [labels]}} with optional {"coloring", "k", "L"}
// for separated covers.

inline Json cover_to_json(const FiniteMetricSpace& space, const Cover& cover) {
    Json sets = Json::object();
    for (size_t i = 0; i < cover.sets.size(); ++i) {
        Json members = Json::array();
        for (int x : cover.sets[i]) members.push_back(space.label(x));
        sets[cover.names[i]] = std::move(members);
    }
    Json out;
    out["sets"] = std::move(sets);
    return out;
}

inline Json separated_to_json(const FiniteMetricSpace& space, const SeparatedCover& sep) {
    Json out = cover_to_json(space, sep.cover);
    Json coloring = Json::object();
    for (size_t i = 0; i < sep.family.size(); ++i)
        coloring[sep.cover.names[i]] = sep.family[i];
    out["coloring"] = std::move(coloring);
    out["k"] = sep.k;
    out["L"] = sep.L;
    return out;
}

inline Cover cover_from_json(const Json& j, const FiniteMetricSpace& space) {
    if (!j.contains("sets")) throw input_error("cover file needs a sets object");
    Cover cover;
    for (const auto& [name, members] : j.at("sets").items()) {
        cover.names.push_back(name);
        std::vector<int> ids;
        for (const auto& l : members) {
            std::string lab = l.get<std::string>();
            if (!space.has_label(lab))
                throw input_error("cover set " + name + " names unknown point " + lab);
            ids.push_back(space.id(lab));
        }
        cover.sets.push_back(std::move(ids));
    }
    return cover;
}

inline SeparatedCover separated_from_json(const Json& j, const FiniteMetricSpace& space) {
    SeparatedCover sep;
    sep.cover = cover_from_json(j, space);
    if (!j.contains("coloring") || !j.contains("k") || !j.contains("L"))
        throw input_error("separated cover needs coloring, k, and L");
    for (const auto& name : sep.cover.names) {
        if (!j.at("coloring").contains(name))
            throw input_error("coloring misses set " + name);
        sep.family.push_back(j.at("coloring").at(name).get<int>());
    }
    sep.k = j.at("k").get<int>();
    sep.L = j.at("L").get<double>();
    return sep;
}

inline Cover load_cover(const std::string& path, const FiniteMetricSpace& space) {
    return cover_from_json(Json::parse(read_text_file(path)), space);
}

inline SeparatedCover load_separated(const std::string& path,
                                     const FiniteMetricSpace& space) {
    return separated_from_json(Json::parse(read_text_file(path)), space);
}

// ----------------------------------------------------------------------
// Group configs: {"factors": [orders], "window_radius": W}.

struct GroupConfig {
    std::shared_ptr<const MarkedGroup> group;
    int radius = 0;
};

inline GroupConfig load_group_config(const std::string& path) {
    Json j = Json::parse(read_text_file(path));
    if (!j.contains("factors") || !j.contains("window_radius"))
        throw input_error("group config needs factors and window_radius");
    std::vector<int> factors;
    for (const auto& f : j.at("factors")) factors.push_back(f.get<int>());
    GroupConfig cfg;
    cfg.group = std::make_shared<const MarkedGroup>(std::move(factors));
    cfg.radius = j.at("window_radius").get<int>();
    if (cfg.radius < 0) throw input_error("window_radius must be nonnegative");
    return cfg;
}

inline Json group_config_to_json(const MarkedGroup& g, int radius) {
    Json out;
    out["factors"] = Json::array();
    for (int k = 0; k < g.num_factors(); ++k) out["factors"].push_back(g.factor_order(k));
    out["window_radius"] = radius;
    return out;
}

// ----------------------------------------------------------------------
// Partitions of unity: index names plus one row object per point, in
// space order. The subordinated cover rides along when present.

inline Json pou_to_json(const PartitionOfUnity& pou) {
    const auto& space = *pou.space;
    Json out;
    out["indices"] = pou.index_names;
    Json rows = Json::array();
    for (int x = 0; x < space.n(); ++x) {
        Json row = Json::object();
        for (size_t i = 0; i < pou.index_keys.size(); ++i) {
            double v = pou.value(static_cast<int>(i), x);
            if (v != 0.0) row[pou.index_names[i]] = v;
        }
        rows.push_back(std::move(row));
    }
    out["rows"] = std::move(rows);
    if (pou.subordinate_to)
        out["cover"] = cover_to_json(space, *pou.subordinate_to)["sets"];
    return out;
}

inline PartitionOfUnity pou_from_json(const Json& j, SpaceRef space) {
    if (!j.contains("indices") || !j.contains("rows"))
        throw input_error("partition file needs indices and rows");
    PartitionOfUnity pou;
    pou.space = space;
    pou.table = std::make_shared<KeyTable>();
    for (const auto& name : j.at("indices")) {
        pou.index_names.push_back(name.get<std::string>());
        pou.index_keys.push_back(pou.table->child(KeyTable::root, pou.index_names.back()));
    }
    if (static_cast<int>(j.at("rows").size()) != space->n())
        throw input_error("partition file has " + std::to_string(j.at("rows").size()) +
                          " rows for " + std::to_string(space->n()) + " points");
    std::unordered_map<std::string, std::uint32_t> key_of;
    for (size_t i = 0; i < pou.index_names.size(); ++i)
        key_of[pou.index_names[i]] = pou.index_keys[i];
    for (const auto& row : j.at("rows")) {
        SparseVec v;
        for (const auto& [name, value] : row.items()) {
            auto it = key_of.find(name);
            if (it == key_of.end())
                throw input_error("partition row names unknown index " + name);
            v.set(it->second, value.get<double>());
        }
        v.normalize_layout();
        pou.rows.push_back(std::move(v));
    }
    if (j.contains("cover")) {
        Json wrap;
        wrap["sets"] = j.at("cover");
        pou.subordinate_to = cover_from_json(wrap, *space);
        pou.measured = cover_stats(*space, *pou.subordinate_to);
    }
    validate_pou(pou);
    return pou;
}

// ----------------------------------------------------------------------
// Feature maps and witnesses: one line per point,
//   label <TAB> atom/atom/...=value <TAB> ...
// Integer-shaped tokens are int64 atoms, everything else is a string atom;
// writing rejects string atoms that would not survive the round trip.

namespace detail {

inline bool integer_shaped(std::string_view token) {
    if (token.empty()) return false;
    size_t start = token[0] == '-' ? 1 : 0;
    if (start == token.size()) return false;
    for (size_t i = start; i < token.size(); ++i)
        if (token[i] < '0' || token[i] > '9') return false;
    return true;
}

inline std::string atom_token(const KeyAtom& atom) {
    if (std::holds_alternative<std::int64_t>(atom))
        return std::to_string(std::get<std::int64_t>(atom));
    const std::string& s = std::get<std::string>(atom);
    if (s.empty() || integer_shaped(s) || s.find_first_of("/=\t\n ") != std::string::npos)
        throw input_error("key atom '" + s + "' cannot be serialized");
    return s;
}

inline KeyAtom token_atom(std::string_view token) {
    if (integer_shaped(token)) {
        std::int64_t v = 0;
        std::from_chars(token.data(), token.data() + token.size(), v);
        return KeyAtom{v};
    }
    return KeyAtom{std::string(token)};
}

}  // namespace detail

inline std::string map_to_text(const FeatureMap& map) {
    const auto& space = *map.space;
    std::string out;
    for (int x = 0; x < space.n(); ++x) {
        out += space.label(x);
        for (const auto& [key, value] : map.vectors[x].entries) {
            out += '\t';
            auto path = map.table->path(key);
            for (size_t i = 0; i < path.size(); ++i) {
                if (i) out += '/';
                out += detail::atom_token(path[i]);
            }
            out += '=';
            out += format_double(value);
        }
        out += '\n';
    }
    return out;
}

inline FeatureMap map_from_text(const std::string& text, SpaceRef space) {
    auto lines = detail::lines_of(text);
    if (static_cast<int>(lines.size()) != space->n())
        throw input_error("map file has " + std::to_string(lines.size()) +
                          " records for " + std::to_string(space->n()) + " points");
    FeatureMap map;
    map.space = space;
    map.table = std::make_shared<KeyTable>();
    map.vectors.resize(static_cast<size_t>(space->n()));
    std::vector<char> seen(static_cast<size_t>(space->n()), 0);
    for (const auto& line : lines) {
        auto fields = detail::split(line, '\t');
        if (!space->has_label(fields[0]))
            throw input_error("map record names unknown point " + fields[0]);
        int x = space->id(fields[0]);
        if (seen[static_cast<size_t>(x)])
            throw input_error("map file repeats point " + fields[0]);
        seen[static_cast<size_t>(x)] = 1;
        SparseVec v;
        for (size_t f = 1; f < fields.size(); ++f) {
            size_t eq = fields[f].rfind('=');
            if (eq == std::string::npos)
                throw input_error("map entry '" + fields[f] + "' lacks a value");
            std::uint32_t id = KeyTable::root;
            for (const auto& tok : detail::split(fields[f].substr(0, eq), '/'))
                id = map.table->child(id, detail::token_atom(tok));
            v.set(id, parse_double(fields[f].substr(eq + 1), "map record " + fields[0]));
        }
        v.normalize_layout();
        map.vectors[static_cast<size_t>(x)] = std::move(v);
    }
    return map;
}

// ----------------------------------------------------------------------
// Reports. Field order is fixed; booleans are real booleans so that a
// pass/fail scan of the archive never parses prose.

inline Json validation_to_json(const MetricValidation& v) {
    Json out;
    out["valid"] = v.valid;
    Json counts = Json::object();
    std::vector<std::string> kinds;
    for (const auto& [kind, count] : v.violation_counts) kinds.push_back(kind);
    std::sort(kinds.begin(), kinds.end());
    for (const auto& kind : kinds) counts[kind] = v.violation_counts.at(kind);
    out["violations"] = std::move(counts);
    Json witnesses = Json::array();
    for (const auto& w : v.witnesses) witnesses.push_back(violation_text(w));
    out["witnesses"] = std::move(witnesses);
    return out;
}

inline Json cover_stats_to_json(const CoverStats& s) {
    Json out;
    out["multiplicity"] = s.multiplicity;
    out["lebesgue_lower"] = std::isinf(s.lebesgue_lower) ? Json("inf") : Json(s.lebesgue_lower);
    out["max_diameter"] = s.max_diameter;
    out["worst_multiplicity_point"] = s.worst_multiplicity_point;
    out["worst_lebesgue_point"] = s.worst_lebesgue_point;
    return out;
}

inline Json separation_check_to_json(const SeparationCheck& c) {
    Json out;
    out["separated"] = c.separated;
    out["min_within_family"] =
        std::isinf(c.min_within_family) ? Json("inf") : Json(c.min_within_family);
    out["multiplicity"] = c.multiplicity;
    if (c.violation) {
        Json v;
        v["family"] = c.violation->family;
        v["set_a"] = c.violation->set_a;
        v["set_b"] = c.violation->set_b;
        v["point_a"] = c.violation->point_a;
        v["point_b"] = c.violation->point_b;
        v["distance"] = c.violation->distance;
        out["violation"] = std::move(v);
    }
    return out;
}

inline Json variation_to_json(const VariationCertificate& c) {
    Json out;
    out["R"] = c.R;
    out["max_variation"] = c.max_variation;
    out["witness_x"] = c.witness_x;
    out["witness_y"] = c.witness_y;
    if (c.claimed_bound) {
        out["claimed_bound"] = *c.claimed_bound;
        out["claimed_ok"] = c.claimed_ok;
    }
    if (c.formula_checked) {
        out["multiplicity"] = c.multiplicity;
        out["lebesgue"] = std::isinf(c.lebesgue) ? Json("inf") : Json(c.lebesgue);
        out["lip_index_bound"] = c.lip_index_bound;
        out["lip_sum_bound"] = c.lip_sum_bound;
        out["lip_ok"] = c.lip_ok;
    }
    out["passed"] = c.passed();
    return out;
}

inline Json decay_to_json(const DecayProfile& d) {
    Json out;
    out["distances"] = d.distances;
    out["sups"] = d.sups;
    return out;
}

inline Json ue_to_json(const UECertificate& c) {
    Json out;
    out["R"] = c.R;
    out["eps"] = c.eps;
    out["max_close_diff"] = c.max_close_diff;
    out["witness_x"] = c.witness_x;
    out["witness_y"] = c.witness_y;
    out["close_ok"] = c.close_ok;
    out["unit_norm_dev"] = c.unit_norm_dev;
    out["decay"] = decay_to_json(c.decay);
    return out;
}

inline Json pa_to_json(const PACertificate& c) {
    Json out;
    out["R"] = c.R;
    out["eps"] = c.eps;
    out["S"] = c.S;
    out["max_close_l1"] = c.max_close_l1;
    out["witness_x"] = c.witness_x;
    out["witness_y"] = c.witness_y;
    out["close_ok"] = c.close_ok;
    out["support_ok"] = c.support_ok;
    if (!c.support_ok) {
        out["leak_point"] = c.leak_point;
        out["leak_key"] = c.leak_key;
    }
    return out;
}

inline Json glue_to_json(const GlueReport& r) {
    Json out;
    out["R"] = r.R;
    out["alpha_max"] = r.alpha_max;
    out["beta_max"] = r.beta_max;
    out["max_close_diff"] = r.max_close_diff;
    out["pou_variation"] = r.pou_variation;
    out["unit_norm_error"] = r.unit_norm_error;
    out["triangle_ok"] = r.triangle_ok;
    out["beta_sq_ok"] = r.beta_sq_ok;
    out["decay_transfer_ok"] = r.decay_transfer_ok;
    out["renormalized_pieces"] = r.renormalized_pieces;
    out["witness_x"] = r.witness_x;
    out["witness_y"] = r.witness_y;
    return out;
}

inline std::string profile_to_csv(const CompressionProfile& p) {
    std::string out = "distance,rho_minus,rho_plus,decay_sup\n";
    for (size_t i = 0; i < p.distances.size(); ++i) {
        out += format_double(p.distances[i]);
        out += ',';
        out += format_double(p.rho_minus[i]);
        out += ',';
        out += format_double(p.rho_plus[i]);
        out += ',';
        out += format_double(p.decay_sup[i]);
        out += '\n';
    }
    return out;
}

inline Json level_to_json(const LevelReport& l) {
    Json out;
    out["level"] = l.level;
    out["points"] = l.points;
    out["core_points"] = l.core_points;
    out["cover_sets"] = l.cover_sets;
    out["kappa"] = l.kappa;
    out["collar"] = l.collar;
    out["separation_gap"] = l.separation_gap;
    out["separated"] = l.separated;
    out["ramping"] = l.ramping;
    out["retracted"] = l.retracted;
    out["max_plateau"] = l.max_plateau;
    Json ramps = Json::array();
    for (const RampEntry& ramp : l.ramps) {
        Json r;
        r["name"] = ramp.name;
        r["factor"] = ramp.factor;
        r["plateau"] = ramp.plateau;
        r["width"] = ramp.width;
        r["reach"] = ramp.reach;
        ramps.push_back(std::move(r));
    }
    out["ramps"] = std::move(ramps);
    out["pou_certificate"] = variation_to_json(l.pou_cert);
    out["glue"] = glue_to_json(l.glue);
    return out;
}

inline Json pipeline_to_json(const PipelineResult& r) {
    Json out;
    out["radius"] = r.radius;
    Json params;
    params["R"] = r.params.R;
    params["eps"] = r.params.eps;
    params["depth_cap"] = r.params.depth_cap;
    params["T"] = r.params.T;
    params["step_budget"] = r.params.step_budget;
    params["plateau_cap"] = r.params.plateau_cap;
    params["foot_gap"] = r.params.foot_gap;
    out["params"] = std::move(params);
    out["levels_built"] = r.levels_built;
    out["saturated"] = r.saturated;
    Json levels = Json::array();
    for (const LevelReport& l : r.levels) levels.push_back(level_to_json(l));
    out["levels"] = std::move(levels);
    Json s3;
    s3["R_rel"] = r.stage3.R_rel;
    s3["trivial_cover"] = r.stage3.trivial_cover;
    s3["cover_sets"] = r.stage3.cover_sets;
    s3["variation_bound"] = r.stage3.variation_bound;
    s3["x_variation"] = r.stage3.x_variation;
    s3["glue"] = glue_to_json(r.stage3.glue);
    out["stage3"] = std::move(s3);
    out["certificate"] = ue_to_json(r.certificate);
    return out;
}

// ----------------------------------------------------------------------
// Run manifests: every emitted file is listed with its digest, so a rerun
// is byte-comparable from the manifest alone.

struct RunManifest {
    std::string command;
    std::vector<std::pair<std::string, std::string>> inputs;     // path, digest
    Json parameters = Json::object();
    std::vector<std::pair<std::string, std::string>> artifacts;  // path, digest
    bool pass = true;
    std::string note;
};

inline Json manifest_to_json(const RunManifest& m) {
    Json out;
    out["command"] = m.command;
    Json inputs = Json::object();
    for (const auto& [path, digest] : m.inputs) inputs[path] = digest;
    out["inputs"] = std::move(inputs);
    out["parameters"] = m.parameters;
    Json artifacts = Json::object();
    for (const auto& [path, digest] : m.artifacts) artifacts[path] = digest;
    out["artifacts"] = std::move(artifacts);
    out["pass"] = m.pass;
    if (!m.note.empty()) out["note"] = m.note;
    return out;
}

}  // namespace coarse
