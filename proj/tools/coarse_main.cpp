#include "coarse/io.hpp"
#include "coarse/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

// Front door. Exit codes: 0 all certificates pass, 1 a certificate failed
// (witness printed), 2 unusable input. Output files are written in a fixed
// order and carry no timestamps, so identical inputs give identical bytes.

namespace {

using namespace coarse;

Json parse_json_file(const std::string& path) {
    try {
        return Json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw input_error(path + ": " + e.what());
    }
}

void write_json(const std::string& path, const Json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

PartitionOfUnity load_pou(const std::string& path, SpaceRef space) {
    return pou_from_json(parse_json_file(path), std::move(space));
}

FeatureMap load_map(const std::string& path, SpaceRef space) {
    return map_from_text(read_text_file(path), std::move(space));
}

Subspace full_subspace(const FiniteMetricSpace& space) {
    std::vector<int> all(static_cast<size_t>(space.n()));
    std::iota(all.begin(), all.end(), 0);
    return make_subspace(space, std::move(all));
}

// ---------------------------------------------------------------- metric

struct Args {
    std::string space, cover, pou, map, assign, yspace, ypou, config;
    std::vector<std::string> pieces, inners, query;
    std::string out, report, archive;
    double R = 1.0, eps = 0.5, S = 0.0, L = -1.0;
    int k = -1, n = 1;
    std::string kind = "s";
    PipelineParams pp;
};

int cmd_metric_validate(const Args& a) {
    RawSpace raw = load_raw_space(a.space);
    MetricValidation v = validate_metric(raw.labels, raw.dist);
    if (!a.out.empty()) write_json(a.out, validation_to_json(v));
    if (!v.valid) {
        for (const auto& w : v.witnesses)
            std::cout << "invalid: " << violation_text(w) << "\n";
        return 1;
    }
    FiniteMetricSpace space = make_metric_space(std::move(raw.labels), std::move(raw.dist));
    std::cout << "valid, diameter " << format_double(space.diameter()) << "\n";
    return 0;
}

int cmd_metric_cover_stats(const Args& a) {
    SpaceRef space = load_space(a.space);
    Cover cover = load_cover(a.cover, *space);
    CoverStats st = cover_stats(*space, cover);
    if (!a.out.empty()) write_json(a.out, cover_stats_to_json(st));
    std::cout << "multiplicity " << st.multiplicity << ", lebesgue_lower "
              << format_double(st.lebesgue_lower) << "\n";
    return 0;
}

int cmd_metric_separated_check(const Args& a) {
    SpaceRef space = load_space(a.space);
    SeparatedCover sep = load_separated(a.cover, *space);
    SeparationCheck chk = check_separated(*space, sep);
    if (!a.out.empty()) write_json(a.out, separation_check_to_json(chk));
    if (!chk.separated) {
        const auto& v = *chk.violation;
        std::cout << "not separated: family " << v.family << ", sets " << v.set_a
                  << " / " << v.set_b << " at distance " << format_double(v.distance)
                  << " (" << v.point_a << ", " << v.point_b << ")\n";
        return 1;
    }
    std::cout << "separated, min_within_family " << format_double(chk.min_within_family)
              << ", multiplicity " << chk.multiplicity << "\n";
    return 0;
}

int cmd_metric_enlarge(const Args& a) {
    SpaceRef space = load_space(a.space);
    SeparatedCover sep = load_separated(a.cover, *space);
    EnlargementResult res = separated_enlargement(*space, sep);
    if (!a.out.empty()) write_json(a.out, cover_to_json(*space, res.cover));
    std::cout << "enlarged " << res.cover.sets.size() << " sets by "
              << format_double(res.L) << ", multiplicity " << res.stats.multiplicity
              << ", lebesgue_lower " << format_double(res.stats.lebesgue_lower) << "\n";
    return 0;
}

// ------------------------------------------------------------------- pou

int cmd_pou_build(const Args& a) {
    SpaceRef space = load_space(a.space);
    Cover cover = load_cover(a.cover, *space);
    PartitionOfUnity pou = pou_from_cover(space, cover);
    validate_pou(pou);
    if (!a.out.empty()) write_json(a.out, pou_to_json(pou));
    std::cout << "partition with " << pou.index_names.size() << " indices, sums verified\n";
    return 0;
}

int cmd_pou_certify(const Args& a) {
    SpaceRef space = load_space(a.space);
    PartitionOfUnity pou = load_pou(a.pou, space);
    VariationCertificate cert = variation_certificate(pou, a.R, a.eps);
    if (!a.out.empty()) write_json(a.out, variation_to_json(cert));
    if (!cert.passed()) {
        std::cout << "fail, max_variation " << format_double(cert.max_variation)
                  << " against " << format_double(a.eps) << " at scale "
                  << format_double(a.R) << " (" << space->label(cert.witness_x)
                  << ", " << space->label(cert.witness_y) << ")\n";
        return 1;
    }
    std::cout << "pass, max_variation " << format_double(cert.max_variation) << "\n";
    return 0;
}

int cmd_pou_product(const Args& a) {
    SpaceRef space = load_space(a.space);
    PartitionOfUnity outer = load_pou(a.pou, space);
    std::vector<InnerPartition> inners;
    inners.reserve(a.inners.size());
    for (const std::string& path : a.inners) {
        Json j = parse_json_file(path);
        if (!j.contains("domain"))
            throw input_error(path + ": inner partition needs a \"domain\" label list");
        std::vector<int> ids;
        for (const auto& lab : j.at("domain")) {
            std::string l = lab.get<std::string>();
            if (!space->has_label(l)) throw input_error(path + ": unknown point " + l);
            ids.push_back(space->id(l));
        }
        Subspace sub = make_subspace(*space, std::move(ids));
        auto subref = std::make_shared<const FiniteMetricSpace>(sub.space);
        PartitionOfUnity inner = pou_from_json(j, subref);
        inners.push_back({std::move(sub), std::move(inner)});
    }
    ProductRefineResult res = product_refine(outer, inners, a.R);
    if (!a.out.empty()) write_json(a.out, pou_to_json(res.pou));
    bool ok = res.split_ok && res.estimate_ok;
    std::cout << (ok ? "pass" : "fail") << ", max_variation "
              << format_double(res.max_variation) << " <= outer "
              << format_double(res.outer_variation) << " + inner "
              << format_double(res.inner_variation_max) << "\n";
    return ok ? 0 : 1;
}

int cmd_pou_pullback(const Args& a) {
    SpaceRef xspace = load_space(a.space);
    SpaceRef yspace = load_space(a.yspace);
    PartitionOfUnity ypou = load_pou(a.ypou, yspace);
    Json j = parse_json_file(a.assign);
    std::vector<int> p(static_cast<size_t>(xspace->n()), -1);
    for (const auto& [xl, yl] : j.items()) {
        std::string yls = yl.get<std::string>();
        if (!xspace->has_label(xl))
            throw input_error(a.assign + ": unknown upstream point " + xl);
        if (!yspace->has_label(yls))
            throw input_error(a.assign + ": unknown downstream point " + yls);
        p[static_cast<size_t>(xspace->id(xl))] = yspace->id(yls);
    }
    for (size_t x = 0; x < p.size(); ++x)
        if (p[x] < 0)
            throw input_error(a.assign + ": no image for " +
                              xspace->label(static_cast<int>(x)));
    PullbackResult res = pullback_pou(xspace, p, ypou, a.R, a.S);
    if (!a.out.empty()) write_json(a.out, pou_to_json(res.pou));
    std::cout << (res.ok ? "pass" : "fail") << ", x_variation "
              << format_double(res.x_variation) << " vs y_variation "
              << format_double(res.y_variation) << "\n";
    return res.ok ? 0 : 1;
}

int cmd_pou_pipeline(const Args& a) {
    SpaceRef space = load_space(a.space);
    SeparatedCover sep = load_separated(a.cover, *space);
    if (a.k >= 0) sep.k = a.k;
    if (a.L >= 0) sep.L = 2 * a.L;
    SeparationCheck chk = check_separated(*space, sep);
    if (!chk.separated) {
        const auto& v = *chk.violation;
        std::cout << "fail, cover not " << format_double(sep.L) << "-separated: "
                  << v.set_a << " / " << v.set_b << " at " << format_double(v.distance)
                  << "\n";
        return 1;
    }
    SeparatedPipelineResult res = separated_cover_pipeline(space, sep, a.R, a.eps);
    if (!a.out.empty()) write_json(a.out, pou_to_json(res.pou));
    if (!a.report.empty()) {
        Json rep;
        rep["bound"] = res.bound;
        rep["enlargement"] = cover_stats_to_json(res.enlargement.stats);
        rep["certificate"] = variation_to_json(res.certificate);
        write_json(a.report, rep);
    }
    std::cout << "pass, bound " << format_double(res.bound) << ", max_variation "
              << format_double(res.certificate.max_variation) << ", multiplicity "
              << res.enlargement.stats.multiplicity << "\n";
    return 0;
}

// ----------------------------------------------------------------- embed

int cmd_embed_sqrt_lift(const Args& a) {
    SpaceRef space = load_space(a.space);
    PartitionOfUnity pou = load_pou(a.pou, space);
    SqrtLiftResult res = sqrt_lift(pou);
    if (!a.out.empty()) write_text_file(a.out, map_to_text(res.map));
    bool ok = res.sq_bound_ok && res.orthogonal_ok;
    std::cout << (ok ? "pass" : "fail") << ", square bound "
              << (res.sq_bound_ok ? "ok" : "violated") << ", orthogonality beyond "
              << format_double(res.max_set_diameter) << " "
              << (res.orthogonal_ok ? "ok" : "violated") << "\n";
    return ok ? 0 : 1;
}

int cmd_embed_glue(const Args& a) {
    SpaceRef space = load_space(a.space);
    PartitionOfUnity pou = load_pou(a.pou, space);
    if (a.pieces.size() != pou.index_names.size())
        throw input_error("need one piece map per partition index (" +
                          std::to_string(pou.index_names.size()) + ")");
    std::vector<GluePiece> pieces;
    pieces.reserve(a.pieces.size());
    for (const std::string& path : a.pieces)
        pieces.push_back({full_subspace(*space), load_map(path, space)});
    GlueResult res = glue(pou, std::move(pieces), a.R);
    if (!a.out.empty()) write_text_file(a.out, map_to_text(res.map));
    if (!a.report.empty()) write_json(a.report, glue_to_json(res.report));
    bool ok = res.report.triangle_ok && res.report.beta_sq_ok && res.report.decay_transfer_ok;
    std::cout << (ok ? "pass" : "fail") << ", max_close_diff "
              << format_double(res.report.max_close_diff) << " alpha "
              << format_double(res.report.alpha_max) << " beta "
              << format_double(res.report.beta_max) << ", unit_norm_error "
              << format_double(res.report.unit_norm_error) << "\n";
    return ok ? 0 : 1;
}

int cmd_embed_check_ue(const Args& a) {
    SpaceRef space = load_space(a.space);
    FeatureMap map = load_map(a.map, space);
    UECertificate cert = check_char_ue(map, a.R, a.eps);
    if (!a.out.empty()) write_json(a.out, ue_to_json(cert));
    bool ok = cert.close_ok && cert.unit_norm_dev <= kNormRenormTol;
    std::cout << (ok ? "pass" : "fail") << ", max_close_diff "
              << format_double(cert.max_close_diff) << ", unit_norm_dev "
              << format_double(cert.unit_norm_dev);
    bool flat = !cert.decay.sups.empty() && cert.decay.sups.front() == 1.0 &&
                cert.decay.sups.back() == 1.0;
    if (flat) std::cout << ", decay flat at 1";
    std::cout << "\n";
    if (!ok && cert.witness_x >= 0)
        std::cout << "worst close pair: " << space->label(cert.witness_x) << " / "
                  << space->label(cert.witness_y) << "\n";
    return ok ? 0 : 1;
}

int cmd_embed_check_pa(const Args& a) {
    SpaceRef space = load_space(a.space);
    FeatureMap map = load_map(a.map, space);
    PropertyAWitness w{map.space, map.table, map.vectors, a.S};
    PACertificate cert = check_property_a(w, a.R, a.eps);
    if (!a.out.empty()) write_json(a.out, pa_to_json(cert));
    bool ok = cert.close_ok && cert.support_ok;
    std::cout << (ok ? "pass" : "fail") << ", max_close_l1 "
              << format_double(cert.max_close_l1) << ", supports within "
              << format_double(a.S) << (cert.support_ok ? " ok" : " violated") << "\n";
    if (!cert.support_ok)
        std::cout << "support leak: key " << cert.leak_key << " at " << cert.leak_point
                  << "\n";
    return ok ? 0 : 1;
}

int cmd_embed_pa_to_pou(const Args& a) {
    SpaceRef space = load_space(a.space);
    FeatureMap map = load_map(a.map, space);
    PropertyAWitness w{map.space, map.table, map.vectors, a.S};
    PartitionOfUnity pou = pa_to_pou(w);
    if (!a.out.empty()) write_json(a.out, pou_to_json(pou));
    std::cout << "partition with " << pou.index_names.size()
              << " indices, supports bounded by " << format_double(a.S) << "\n";
    return 0;
}

int cmd_embed_profile(const Args& a) {
    SpaceRef space = load_space(a.space);
    FeatureMap map = load_map(a.map, space);
    CompressionProfile p = compression_profile(map, default_seed());
    std::string csv = profile_to_csv(p);
    if (!a.out.empty())
        write_text_file(a.out, csv);
    else
        std::cout << csv;
    return 0;
}

// ----------------------------------------------------------------- group

int cmd_group_window(const Args& a) {
    GroupConfig cfg = load_group_config(a.config);
    GroupWindow w = make_window(cfg.group, cfg.radius);
    if (!a.out.empty()) {
        std::string text;
        for (const std::string& lab : w.labels) {
            text += lab;
            text += '\n';
        }
        write_text_file(a.out, text);
    }
    std::cout << w.n() << " elements at radius " << w.radius << "\n";
    return 0;
}

int cmd_group_metric(const Args& a) {
    GroupConfig cfg = load_group_config(a.config);
    GroupWindow w = make_window(cfg.group, cfg.radius);
    MetricKind kind = a.kind == "rel" ? MetricKind::relative : MetricKind::word;
    auto space = window_space(w, kind);
    if (!a.query.empty()) {
        int x = w.id(a.query[0]);
        int y = w.id(a.query[1]);
        if (x < 0) throw input_error("unknown element " + a.query[0]);
        if (y < 0) throw input_error("unknown element " + a.query[1]);
        std::cout << format_double(space->d(x, y)) << "\n";
        return 0;
    }
    if (!a.out.empty()) write_text_file(a.out, space_to_csv(*space));
    std::cout << space->n() << " points, diameter " << format_double(space->diameter())
              << "\n";
    return 0;
}

int cmd_group_rel_ball(const Args& a) {
    GroupConfig cfg = load_group_config(a.config);
    GroupWindow w = make_window(cfg.group, cfg.radius);
    std::vector<int> ids = rel_ball(w, a.n);
    if (!a.out.empty()) {
        std::string text;
        for (int id : ids) {
            text += w.labels[static_cast<size_t>(id)];
            text += '\n';
        }
        write_text_file(a.out, text);
    }
    std::cout << ids.size() << " elements within coset depth " << a.n << "\n";
    return 0;
}

int cmd_group_decompose(const Args& a) {
    GroupConfig cfg = load_group_config(a.config);
    GroupWindow w = make_window(cfg.group, cfg.radius);
    OsinDecomposition dec = osin_decomposition(w, a.n);
    if (!a.out.empty()) {
        Json j;
        j["level"] = dec.level;
        j["core"] = Json::array();
        for (int id : dec.core) j["core"].push_back(w.labels[static_cast<size_t>(id)]);
        j["factors"] = Json::array();
        for (const auto& pieces : dec.by_factor) {
            Json fj = Json::array();
            for (const CosetPiece& p : pieces) {
                Json pj;
                pj["rep"] = w.labels[static_cast<size_t>(p.rep)];
                pj["members"] = Json::array();
                for (int m : p.members)
                    pj["members"].push_back(w.labels[static_cast<size_t>(m)]);
                pj["coords"] = p.coords;
                fj.push_back(std::move(pj));
            }
            j["factors"].push_back(std::move(fj));
        }
        j["covered"] = dec.covered;
        write_json(a.out, j);
    }
    size_t pieces = 0;
    if (a.k >= 0) {
        if (a.k >= static_cast<int>(dec.by_factor.size()))
            throw input_error("factor index out of range");
        pieces = dec.by_factor[static_cast<size_t>(a.k)].size();
        std::cout << "level " << a.n << ": core " << dec.core.size() << ", factor "
                  << a.k << " has " << pieces << " coset pieces, covered "
                  << dec.covered << "\n";
        return 0;
    }
    for (const auto& f : dec.by_factor) pieces += f.size();
    std::cout << "level " << a.n << ": core " << dec.core.size() << ", "
              << pieces << " coset pieces over " << dec.by_factor.size()
              << " factors, covered " << dec.covered << "\n";
    return 0;
}

int cmd_group_separation(const Args& a) {
    GroupConfig cfg = load_group_config(a.config);
    GroupWindow w = make_window(cfg.group, cfg.radius);
    auto word = window_space(w, MetricKind::word);
    SeparationResult res = separation_search(w, *word, a.n, a.k, a.L);
    if (!a.out.empty()) {
        Json j;
        j["level"] = res.level;
        j["factor"] = res.factor;
        j["L"] = res.L;
        j["kappa"] = res.kappa;
        j["families"] = Json::array();
        for (size_t i = 0; i < res.reps.size(); ++i) {
            Json fj;
            fj["rep"] = w.labels[static_cast<size_t>(res.reps[i])];
            fj["members"] = Json::array();
            for (int m : res.families[i])
                fj["members"].push_back(w.labels[static_cast<size_t>(m)]);
            j["families"].push_back(std::move(fj));
        }
        write_json(a.out, j);
    }
    std::cout << "kappa=" << res.kappa << ", verified (" << res.families.size()
              << " families beyond " << format_double(res.L) << ")\n";
    return 0;
}

int cmd_group_asdim_cover(const Args& a) {
    GroupConfig cfg = load_group_config(a.config);
    GroupWindow w = make_window(cfg.group, cfg.radius);
    auto rel = window_space(w, MetricKind::relative);
    AsdimCoverResult res = relative_asdim_cover(rel, a.R);
    if (!a.out.empty()) write_json(a.out, separated_to_json(*rel, res.sep));
    std::cout << res.sep.cover.sets.size() << " sets, " << res.annuli << " annuli, "
              << (res.trivial ? "trivial, " : "") << "multiplicity "
              << res.stats.multiplicity << ", gap " << format_double(res.sep.L) << "\n";
    return 0;
}

int cmd_group_pipeline(const Args& a) {
    GroupConfig cfg = load_group_config(a.config);
    PipelineParams params = a.pp;
    params.R = a.R;
    params.eps = a.eps;
    PipelineResult res = relhyp_embed_pipeline(cfg.group, cfg.radius, params);

    bool pass = res.certificate.close_ok &&
                res.certificate.unit_norm_dev <= kNormRenormTol;
    for (const LevelReport& l : res.levels)
        pass = pass && l.separated && l.pou_cert.passed() && l.glue.triangle_ok &&
               l.glue.beta_sq_ok && l.glue.decay_transfer_ok;
    pass = pass && res.stage3.glue.triangle_ok && res.stage3.glue.beta_sq_ok;

    std::string dir = a.archive;
    if (dir.empty())
        dir = std::filesystem::path(a.config).stem().string() + "_archive";
    std::filesystem::create_directories(dir);
    auto at = [&dir](const char* name) {
        return (std::filesystem::path(dir) / name).string();
    };

    RunManifest man;
    man.command = "group pipeline";
    man.inputs.emplace_back(a.config, digest_file(a.config));
    man.parameters["R"] = params.R;
    man.parameters["eps"] = params.eps;
    man.parameters["depth_cap"] = params.depth_cap;
    man.parameters["T"] = params.T;
    man.parameters["step_budget"] = params.step_budget;
    man.parameters["plateau_cap"] = params.plateau_cap;
    man.parameters["foot_gap"] = params.foot_gap;
    man.parameters["window_radius"] = cfg.radius;

    write_json(at("config.json"), group_config_to_json(*cfg.group, cfg.radius));
    write_json(at("report.json"), pipeline_to_json(res));
    write_text_file(at("final.map"), map_to_text(res.map));
    write_text_file(at("profile.csv"), profile_to_csv(res.profile));
    for (const char* name : {"config.json", "report.json", "final.map", "profile.csv"})
        man.artifacts.emplace_back(name, digest_file(at(name)));
    man.pass = pass;
    man.note = pass ? "" : "final certificate failed";
    write_json(at("manifest.json"), manifest_to_json(man));

    std::cout << (pass ? "pass" : "fail") << ", " << res.levels_built << " levels over "
              << res.word_space->n() << " points, max_close_diff "
              << format_double(res.certificate.max_close_diff) << ", archive " << dir
              << "\n";
    return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coarse geometry toolkit: covers, partitions, embeddings, group windows"};
    app.require_subcommand(1);
    Args a;
    std::function<int(const Args&)> run;

    auto* metric = app.add_subcommand("metric", "metric spaces and covers");
    metric->require_subcommand(1);
    {
        auto* c = metric->add_subcommand("validate", "check the metric axioms");
        c->add_option("space", a.space, "distance matrix (csv or json)")->required();
        c->add_option("--out", a.out, "write the validation report");
        c->callback([&] { run = cmd_metric_validate; });
    }
    {
        auto* c = metric->add_subcommand("cover-stats", "multiplicity and Lebesgue number");
        c->add_option("space", a.space)->required();
        c->add_option("cover", a.cover, "cover file (json)")->required();
        c->add_option("--out", a.out, "write the stats report");
        c->callback([&] { run = cmd_metric_cover_stats; });
    }
    {
        auto* c = metric->add_subcommand("separated-check", "verify family separation");
        c->add_option("space", a.space)->required();
        c->add_option("cover", a.cover, "separated cover file (json)")->required();
        c->add_option("--out", a.out, "write the check report");
        c->callback([&] { run = cmd_metric_separated_check; });
    }
    {
        auto* c = metric->add_subcommand("enlarge", "L-enlarge a separated cover");
        c->add_option("space", a.space)->required();
        c->add_option("cover", a.cover, "separated cover file (json)")->required();
        c->add_option("--out", a.out, "write the enlarged cover");
        c->callback([&] { run = cmd_metric_enlarge; });
    }

    auto* pou = app.add_subcommand("pou", "partitions of unity");
    pou->require_subcommand(1);
    {
        auto* c = pou->add_subcommand("build", "distance-formula partition from a cover");
        c->add_option("space", a.space)->required();
        c->add_option("cover", a.cover)->required();
        c->add_option("--out", a.out, "write the partition");
        c->callback([&] { run = cmd_pou_build; });
    }
    {
        auto* c = pou->add_subcommand("certify", "variation certificate at scale R");
        c->add_option("space", a.space)->required();
        c->add_option("pou", a.pou, "partition file (json)")->required();
        c->add_option("--R", a.R, "scale")->required();
        c->add_option("--eps", a.eps, "claimed variation bound")->required();
        c->add_option("--out", a.out, "write the certificate");
        c->callback([&] { run = cmd_pou_certify; });
    }
    {
        auto* c = pou->add_subcommand("product", "refine an outer partition by inner ones");
        c->add_option("space", a.space)->required();
        c->add_option("pou", a.pou, "outer partition file")->required();
        c->add_option("--inner", a.inners, "inner partition files, one per outer index")
            ->required();
        c->add_option("--R", a.R, "scale")->required();
        c->add_option("--out", a.out, "write the product partition");
        c->callback([&] { run = cmd_pou_product; });
    }
    {
        auto* c = pou->add_subcommand("pullback", "pull a partition back along a map");
        c->add_option("xspace", a.space, "upstream space")->required();
        c->add_option("yspace", a.yspace, "downstream space")->required();
        c->add_option("ypou", a.ypou, "downstream partition file")->required();
        c->add_option("assign", a.assign, "json object mapping upstream to downstream labels")
            ->required();
        c->add_option("--R", a.R, "upstream scale")->required();
        c->add_option("--S", a.S, "downstream scale")->required();
        c->add_option("--out", a.out, "write the pulled-back partition");
        c->callback([&] { run = cmd_pou_pullback; });
    }
    {
        auto* c = pou->add_subcommand("pipeline",
                                      "separated cover to certified partition");
        c->add_option("space", a.space)->required();
        c->add_option("cover", a.cover, "separated cover file")->required();
        c->add_option("--R", a.R, "scale")->required();
        c->add_option("--eps", a.eps, "variation target")->required();
        c->add_option("--k", a.k, "override the family count minus one");
        c->add_option("--L", a.L, "override the enlargement radius (gap becomes 2L)");
        c->add_option("--out", a.out, "write the partition");
        c->add_option("--report", a.report, "write the certificate report");
        c->callback([&] { run = cmd_pou_pipeline; });
    }

    auto* embed = app.add_subcommand("embed", "feature maps and certificates");
    embed->require_subcommand(1);
    {
        auto* c = embed->add_subcommand("sqrt-lift", "square-root lift of a partition");
        c->add_option("space", a.space)->required();
        c->add_option("pou", a.pou)->required();
        c->add_option("--out", a.out, "write the lifted map");
        c->callback([&] { run = cmd_embed_sqrt_lift; });
    }
    {
        auto* c = embed->add_subcommand("glue", "glue unit maps along a partition");
        c->add_option("space", a.space)->required();
        c->add_option("pou", a.pou)->required();
        c->add_option("pieces", a.pieces, "piece map files, one per partition index")
            ->required();
        c->add_option("--R", a.R, "scale")->required();
        c->add_option("--out", a.out, "write the glued map");
        c->add_option("--report", a.report, "write the glue report");
        c->callback([&] { run = cmd_embed_glue; });
    }
    {
        auto* c = embed->add_subcommand("check-ue", "unit-map closeness certificate");
        c->add_option("space", a.space)->required();
        c->add_option("map", a.map, "feature map file")->required();
        c->add_option("--R", a.R, "scale")->required();
        c->add_option("--eps", a.eps, "closeness target")->required();
        c->add_option("--out", a.out, "write the certificate");
        c->callback([&] { run = cmd_embed_check_ue; });
    }
    {
        auto* c = embed->add_subcommand("check-pa", "l1 witness certificate");
        c->add_option("space", a.space)->required();
        c->add_option("map", a.map, "witness map file (l1 rows)")->required();
        c->add_option("--R", a.R, "scale")->required();
        c->add_option("--eps", a.eps, "closeness target")->required();
        c->add_option("--S", a.S, "support radius")->required();
        c->add_option("--out", a.out, "write the certificate");
        c->callback([&] { run = cmd_embed_check_pa; });
    }
    {
        auto* c = embed->add_subcommand("pa-to-pou", "witness to partition transpose");
        c->add_option("space", a.space)->required();
        c->add_option("map", a.map, "witness map file")->required();
        c->add_option("--S", a.S, "support radius")->required();
        c->add_option("--out", a.out, "write the partition");
        c->callback([&] { run = cmd_embed_pa_to_pou; });
    }
    {
        auto* c = embed->add_subcommand("profile", "compression profile csv");
        c->add_option("space", a.space)->required();
        c->add_option("map", a.map)->required();
        c->add_option("--out", a.out, "write csv here instead of stdout");
        c->callback([&] { run = cmd_embed_profile; });
    }

    auto* group = app.add_subcommand("group", "free products and their windows");
    group->require_subcommand(1);
    {
        auto* c = group->add_subcommand("window", "enumerate the ball of the config radius");
        c->add_option("config", a.config, "group config (json)")->required();
        c->add_option("--out", a.out, "write the element labels");
        c->callback([&] { run = cmd_group_window; });
    }
    {
        auto* c = group->add_subcommand("metric", "window metric as csv or point query");
        c->add_option("config", a.config)->required();
        c->add_option("--kind", a.kind, "s (generating set) or rel (relative)")
            ->check(CLI::IsMember({"s", "rel"}));
        c->add_option("--query", a.query, "two element labels; print their distance")
            ->expected(2);
        c->add_option("--out", a.out, "write the distance matrix csv");
        c->callback([&] { run = cmd_group_metric; });
    }
    {
        auto* c = group->add_subcommand("rel-ball", "elements of bounded coset depth");
        c->add_option("config", a.config)->required();
        c->add_option("--n", a.n, "depth")->required();
        c->add_option("--out", a.out, "write the element labels");
        c->callback([&] { run = cmd_group_rel_ball; });
    }
    {
        auto* c = group->add_subcommand("decompose", "core plus coset lines at depth n");
        c->add_option("config", a.config)->required();
        c->add_option("--n", a.n, "depth")->required();
        c->add_option("--k", a.k, "report a single factor");
        c->add_option("--out", a.out, "write the decomposition");
        c->callback([&] { run = cmd_group_decompose; });
    }
    {
        auto* c = group->add_subcommand("separation", "collar width for coset families");
        c->add_option("config", a.config)->required();
        c->add_option("--n", a.n, "depth")->required();
        c->add_option("--k", a.k, "factor")->required();
        c->add_option("--L", a.L, "required family gap")->required();
        c->add_option("--out", a.out, "write the families");
        c->callback([&] { run = cmd_group_separation; });
    }
    {
        auto* c = group->add_subcommand("asdim-cover", "annulus cover of the relative ball");
        c->add_option("config", a.config)->required();
        c->add_option("--R", a.R, "cover scale")->required();
        c->add_option("--out", a.out, "write the separated cover");
        c->callback([&] { run = cmd_group_asdim_cover; });
    }
    {
        auto* c = group->add_subcommand("pipeline", "full embedding ladder with archive");
        c->add_option("config", a.config)->required();
        c->add_option("--R", a.R, "scale")->required();
        c->add_option("--eps", a.eps, "closeness target")->required();
        c->add_option("--depth-cap", a.pp.depth_cap, "stop the ladder at this depth");
        c->add_option("--T", a.pp.T, "interval piece width");
        c->add_option("--step-budget", a.pp.step_budget, "per-level handoff cost ceiling");
        c->add_option("--plateau-cap", a.pp.plateau_cap, "max weight for one coset");
        c->add_option("--foot-gap", a.pp.foot_gap, "dead zone before a ramp");
        c->add_option("--archive", a.archive, "archive directory (default from config name)");
        c->callback([&] { run = cmd_group_pipeline; });
    }

    try {
        app.parse(argc, argv);
        return run(a);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const coarse::input_error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const coarse::certificate_error& e) {
        std::cerr << "certificate failed: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    }
}
