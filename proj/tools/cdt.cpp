// SPDX-License-Identifier: Apache-2.0
// Command-line front end: one verb per pipeline stage plus `report`, which
// runs the whole experiment matrix through the artifact cache.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "cdt/corpus/miner.hpp"
#include "cdt/corpus/repo_list.hpp"
#include "cdt/corpus/snapshot.hpp"
#include "cdt/extract/dataset.hpp"
#include "cdt/extract/split.hpp"
#include "cdt/model/checkpoint.hpp"
#include "cdt/pipeline/run.hpp"

namespace {

using namespace cdt;
namespace fs = std::filesystem;
using model::Mat;
using model::Vec;

constexpr int kOk = 0, kConfig = 2, kStage = 3, kAcceptance = 4;

struct Globals {
    std::string config;
    std::string cache;
    bool quiet = false;

    pipeline::ExperimentConfig experiment() const {
        return config.empty() ? pipeline::ExperimentConfig{} : pipeline::load_experiment(config);
    }

    std::string rerun(const std::string& verb) const {
        std::string s = "cdt " + verb;
        if (!config.empty()) s += " --config " + config;
        return s;
    }

    pipeline::Log log() const {
        if (quiet) return [](const std::string&) {};
        return [](const std::string& m) { std::cerr << m << "\n"; };
    }
};

std::map<std::string, std::string> parse_pairs(const std::vector<std::string>& v, const std::string& what) {
    std::map<std::string, std::string> out;
    for (const auto& s : v) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError(what + " expects DOMAIN=PATH, got '" + s + "'");
        out[s.substr(0, eq)] = s.substr(eq + 1);
    }
    return out;
}

std::vector<types::TypeSample> samples_of(const std::string& path, const std::string& split) {
    auto s = types::read_samples(path);
    if (split.empty() || split == "all") return s;
    return types::of_split(s, extract::parse_split(split));
}

void print_json(const nlohmann::json& j, const std::string& out) {
    if (out.empty()) std::cout << j.dump(2) << "\n";
    else write_file(out, j.dump(2) + "\n");
}

nlohmann::json slices_json(const std::map<eval::SliceName, eval::SliceResult>& m) {
    nlohmann::json j;
    for (const auto& [s, r] : m) {
        j[std::string(eval::to_string(s))] = {{"samples", r.samples}};
        if (r.f1) j[std::string(eval::to_string(s))]["f1"] = *r.f1;
        else j[std::string(eval::to_string(s))]["f1"] = nullptr;
    }
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-domain type inference experiments"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "experiment config (JSON)");
    app.add_option("--cache", g.cache, std::string("artifact cache directory (default: $") + pipeline::kCacheEnv +
                                           " or .cdt-cache)");
    app.add_flag("-q,--quiet", g.quiet, "suppress progress messages");
    std::function<int()> action;

    // fixture
    auto* fixture = app.add_subcommand("fixture", "generate the synthetic two-domain corpus");
    std::string fx_out, fx_spec;
    std::optional<std::uint64_t> fx_seed;
    fixture->add_option("--out", fx_out, "output directory")->required();
    fixture->add_option("--spec", fx_spec, "fixture spec (JSON); default: the config's fixture section");
    fixture->add_option("--seed", fx_seed, "override the spec seed");
    fixture->callback([&] {
        action = [&] {
            pipeline::FixtureSpec spec = fx_spec.empty() ? g.experiment().fixture
                                                         : nlohmann::json::parse(read_file(fx_spec)).get<pipeline::FixtureSpec>();
            if (fx_seed) spec.seed = *fx_seed;
            const auto m = pipeline::generate_fixture(spec, fx_out);
            std::cout << "wrote " << m.files << " files under " << fx_out << "\n";
            return kOk;
        };
    });

    // mine
    auto* mine = app.add_subcommand("mine", "collect dependent repositories of the three frameworks");
    std::string mine_out, page_cache = "page-cache";
    std::size_t mine_limit = 50'000;
    std::uint64_t min_stars = 0;
    bool offline = false;
    long delay_ms = 1000;
    mine->add_option("--out", mine_out, "output directory for repo lists")->required();
    mine->add_option("--page-cache", page_cache, "directory of fetched pages");
    mine->add_option("--limit", mine_limit, "repositories per framework");
    mine->add_option("--min-stars", min_stars, "star filter");
    mine->add_option("--delay-ms", delay_ms, "minimum interval between requests");
    mine->add_flag("--offline", offline, "serve only cached pages");
    mine->callback([&] {
        action = [&] {
            corpus::MiningConfig mc;
            mc.per_framework_limit = mine_limit;
            mc.star_filter_min = min_stars;
            mc.page_cache_dir = page_cache;
            mc.request_delay = std::chrono::milliseconds(delay_ms);
            corpus::PageCache pc(page_cache);
            const auto fetcher = offline ? corpus::Fetcher(pc)
                                         : corpus::Fetcher(pc, corpus::curl_fetch,
                                                           std::make_shared<corpus::RateLimiter>(mc.request_delay));
            const corpus::HashResolver resolver(pc, !offline);
            const auto mined = pipeline::stage("mine", [&] { return corpus::mine_all(mc, fetcher, resolver); });
            std::map<corpus::Framework, std::vector<corpus::RepoRef>> lists;
            for (const auto& [f, r] : mined) {
                corpus::export_repo_list(r.refs, fs::path(mine_out) / (mc.roles.id(f) + ".csv"), mc.roles);
                lists[f] = r.refs;
                std::cout << mc.roles.id(f) << ": " << r.refs.size() << " repositories, " << r.warnings << " warnings\n";
            }
            for (const auto& [d, refs] : corpus::merge_and_intersect(lists))
                corpus::export_repo_list(refs, fs::path(mine_out) / (std::string(corpus::to_string(d)) + ".csv"), mc.roles);
            return kOk;
        };
    });

    // intersect
    auto* intersect = app.add_subcommand("intersect", "derive domain repo lists from per-framework lists");
    std::string is_checker, is_a, is_b, is_out;
    intersect->add_option("--checker", is_checker, "type checker dependents")->required();
    intersect->add_option("--marker-a", is_a, "calculation marker dependents")->required();
    intersect->add_option("--marker-b", is_b, "web marker dependents")->required();
    intersect->add_option("--out", is_out, "output directory")->required();
    intersect->callback([&] {
        action = [&] {
            std::map<corpus::Framework, std::vector<corpus::RepoRef>> lists = {
                {corpus::Framework::TypeChecker, corpus::import_repo_list(is_checker)},
                {corpus::Framework::MarkerA, corpus::import_repo_list(is_a)},
                {corpus::Framework::MarkerB, corpus::import_repo_list(is_b)}};
            for (const auto& [d, refs] : corpus::merge_and_intersect(lists)) {
                corpus::export_repo_list(refs, fs::path(is_out) / (std::string(corpus::to_string(d)) + ".csv"));
                std::cout << corpus::to_string(d) << ": " << refs.size() << " repositories\n";
            }
            return kOk;
        };
    });

    // snapshot
    auto* snap = app.add_subcommand("snapshot", "clone repositories at their pinned commits");
    std::string snap_repos, snap_out;
    snap->add_option("--repos", snap_repos, "repo list CSV")->required();
    snap->add_option("--out", snap_out, "snapshot root")->required();
    snap->callback([&] {
        action = [&] {
            std::size_t failed = 0;
            for (const auto& ref : corpus::import_repo_list(snap_repos)) {
                try {
                    std::cout << corpus::snapshot(ref, snap_out).string() << "\n";
                } catch (const corpus::SnapshotError& e) {
                    std::cerr << "snapshot: " << e.what() << "\n";
                    ++failed;
                }
            }
            if (failed) throw StageError("snapshot", std::to_string(failed) + " repositories could not be cloned");
            return kOk;
        };
    });

    // dedup
    auto* dedup = app.add_subcommand("dedup", "remove shared repositories and near-duplicate files");
    std::vector<std::string> dd_corpora, dd_repos;
    std::string dd_out;
    std::optional<double> dd_threshold;
    std::optional<std::size_t> dd_k;
    dedup->add_option("--corpus", dd_corpora, "DOMAIN=SNAPSHOT_ROOT (repeatable)")->required();
    dedup->add_option("--repos", dd_repos, "DOMAIN=REPO_LIST (repeatable)");
    dedup->add_option("--out", dd_out, "output directory")->required();
    dedup->add_option("--threshold", dd_threshold, "cosine similarity threshold");
    dedup->add_option("--k", dd_k, "neighbours per file");
    dedup->callback([&] {
        action = [&] {
            auto cfg = g.experiment().dedup;
            if (dd_threshold) cfg.threshold = *dd_threshold;
            if (dd_k) cfg.k = *dd_k;
            std::map<std::string, fs::path> roots;
            for (const auto& [d, p] : parse_pairs(dd_corpora, "--corpus")) roots[d] = p;
            std::map<std::string, std::vector<corpus::RepoRef>> repos;
            for (const auto& [d, p] : parse_pairs(dd_repos, "--repos")) repos[d] = corpus::import_repo_list(p);
            const auto s = pipeline::stage("dedup", [&] { return pipeline::dedup_corpora(roots, repos, cfg, dd_out); });
            std::cout << s.dump(2) << "\n";
            return kOk;
        };
    });

    // split
    auto* split = app.add_subcommand("split", "assign projects to train/valid/test");
    std::string sp_root, sp_out;
    std::uint64_t sp_seed = 1;
    split->add_option("--root", sp_root, "snapshot root")->required();
    split->add_option("--seed", sp_seed, "split seed");
    split->add_option("--out", sp_out, "split manifest CSV")->required();
    split->callback([&] {
        action = [&] {
            const auto cfg = g.experiment();
            const auto a = extract::split_projects(extract::list_projects(sp_root), sp_seed, cfg.train_ratio,
                                                   cfg.valid_ratio, cfg.test_ratio);
            write_file(sp_out, extract::format_split_manifest(a));
            return kOk;
        };
    });

    // extract
    auto* ext = app.add_subcommand("extract", "extract annotated slots from a snapshot root");
    std::string ex_root, ex_split, ex_out;
    std::uint64_t ex_seed = 1;
    ext->add_option("--root", ex_root, "snapshot root")->required();
    ext->add_option("--split", ex_split, "split manifest (computed from --seed when absent)");
    ext->add_option("--seed", ex_seed, "split seed");
    ext->add_option("--out", ex_out, "dataset JSONL")->required();
    ext->callback([&] {
        action = [&] {
            const auto cfg = g.experiment();
            extract::SplitAssignment a;
            if (ex_split.empty()) {
                a = extract::split_projects(extract::list_projects(ex_root), ex_seed, cfg.train_ratio, cfg.valid_ratio,
                                            cfg.test_ratio);
            } else {
                std::ifstream in(ex_split);
                if (!in) throw ConfigError("cannot open " + ex_split);
                a = extract::parse_split_manifest(in);
            }
            extract::ExtractOptions opts;
            opts.occur_window = cfg.occur_window;
            const auto r = pipeline::stage("extract", [&] { return extract::extract_snapshot(ex_root, a, opts); });
            extract::write_dataset(r.records, ex_out);
            for (const auto& s : r.skipped) std::cerr << "skipped " << s.file_path << ": " << s.reason << "\n";
            std::cout << r.records.size() << " modules, " << r.skipped.size() << " skipped\n";
            return kOk;
        };
    });

    // normalize
    auto* norm = app.add_subcommand("normalize", "normalize annotations into labelled samples");
    std::string nm_dataset, nm_domain, nm_out, nm_drops;
    norm->add_option("--dataset", nm_dataset, "dataset JSONL")->required();
    norm->add_option("--domain", nm_domain, "domain tag")->required();
    norm->add_option("--out", nm_out, "samples JSONL")->required();
    norm->add_option("--drops", nm_drops, "drop report CSV");
    norm->callback([&] {
        action = [&] {
            const auto cfg = g.experiment();
            const types::Normalizer n(cfg.normalizer);
            types::DropReport drops;
            const auto s = pipeline::stage("normalize", [&] {
                return types::build_samples(extract::read_dataset(nm_dataset), n, nm_domain, &drops, cfg.occur_window);
            });
            types::write_samples(s, nm_out);
            if (!nm_drops.empty()) write_file(nm_drops, drops.to_csv());
            std::cout << s.size() << " samples\n";
            return kOk;
        };
    });

    // embed
    auto* emb = app.add_subcommand("embed", "train token embeddings");
    std::string em_source, em_target, em_out, em_regime;
    std::uint64_t em_seed = 1;
    emb->add_option("--source", em_source, "source samples JSONL")->required();
    emb->add_option("--target", em_target, "target samples JSONL (cross-domain regimes)");
    emb->add_option("--regime", em_regime, "source, both or all (default: config)");
    emb->add_option("--seed", em_seed, "training seed");
    emb->add_option("--out", em_out, "output stem")->required();
    emb->callback([&] {
        action = [&] {
            const auto cfg = g.experiment();
            const auto regime = em_regime.empty() ? cfg.regime : embed::parse_regime(em_regime);
            const auto src = types::read_samples(em_source);
            const auto tgt = em_target.empty() ? std::vector<types::TypeSample>{} : types::read_samples(em_target);
            auto ec = cfg.embedding;
            ec.seed = em_seed;
            const auto m = pipeline::stage("embed", [&] {
                return embed::train_embedding(embed::regime_corpus(regime, src, tgt), ec, em_source);
            });
            embed::save(m, em_out);
            std::cout << m.size() << " tokens\n";
            return kOk;
        };
    });

    // train / adapt
    std::string tr_emb, tr_source, tr_target, tr_out, tr_method = "dann", tr_pretrained;
    std::uint64_t tr_seed = 1;
    auto* train = app.add_subcommand("train", "train the encoder on source samples");
    auto* adapt = app.add_subcommand("adapt", "train with domain adaptation or fine-tune on target samples");
    for (auto* sc : {train, adapt}) {
        sc->add_option("--embedding", tr_emb, "embedding stem");
        sc->add_option("--source", tr_source, "samples JSONL (train split is used)");
        sc->add_option("--seed", tr_seed, "training seed");
        sc->add_option("--out", tr_out, "checkpoint path")->required();
    }
    adapt->add_option("--target", tr_target, "target samples JSONL")->required();
    adapt->add_option("--method", tr_method, "dann, wdgrl or finetune");
    adapt->add_option("--pretrained", tr_pretrained, "checkpoint to fine-tune");
    auto train_action = [&](bool adapting) {
        const auto cfg = g.experiment();
        auto mc = cfg.model;
        mc.seed = tr_seed;
        auto opt = model::default_options(mc);
        const auto method = adapting ? model::parse_adapt_method(tr_method) : model::AdaptMethod::None;
        if (method == model::AdaptMethod::None && adapting) throw ConfigError("adapt needs a method other than none");
        model::TypeModel m;
        model::TypeCluster cluster;
        pipeline::stage(adapting ? "adapt" : "train", [&] {
            if (method == model::AdaptMethod::FineTune) {
                if (tr_pretrained.empty()) throw ConfigError("finetune needs --pretrained");
                const auto pre = model::load_checkpoint(tr_pretrained);
                const auto ts = model::make_trainset(pre.model, types::of_split(types::read_samples(tr_target), extract::Split::Train));
                opt.epochs = cfg.adapt.finetune_epochs;
                m = model::fine_tune(pre.model, ts, opt);
                cluster = model::cluster_from(m, ts);
                return 0;
            }
            if (tr_emb.empty() || tr_source.empty()) throw ConfigError("--embedding and --source are required");
            const auto src = types::of_split(types::read_samples(tr_source), extract::Split::Train);
            m = model::make_model(embed::load(tr_emb), src, mc);
            const auto ts = model::make_trainset(m, src);
            if (method == model::AdaptMethod::None) {
                model::train(m, ts, opt);
            } else {
                const auto target = m.prepare(types::of_split(types::read_samples(tr_target), extract::Split::Train));
                if (method == model::AdaptMethod::Dann) model::dann_train(m, ts, target, opt, cfg.adapt);
                else model::wdgrl_train(m, ts, target, opt, cfg.adapt);
            }
            cluster = model::cluster_from(m, ts);
            return 0;
        });
        model::save_checkpoint(tr_out, m, &cluster);
        std::cout << "cluster of " << cluster.size() << " samples written to " << tr_out << "\n";
        return kOk;
    };
    train->callback([&] { action = [&] { return train_action(false); }; });
    adapt->callback([&] { action = [&] { return train_action(true); }; });

    // predict
    auto* pred = app.add_subcommand("predict", "rank candidate types for samples");
    std::string pr_model, pr_samples, pr_split = "test", pr_out;
    std::size_t pr_top = 1;
    pred->add_option("--model", pr_model, "checkpoint")->required();
    pred->add_option("--samples", pr_samples, "samples JSONL")->required();
    pred->add_option("--split", pr_split, "train, valid, test or all");
    pred->add_option("--top", pr_top, "candidates per sample")->check(CLI::PositiveNumber);
    pred->add_option("--out", pr_out, "output CSV (default: stdout)");
    pred->callback([&] {
        action = [&] {
            const auto ck = model::load_checkpoint(pr_model);
            if (!ck.cluster) throw ConfigError(pr_model + " has no type cluster");
            const auto s = samples_of(pr_samples, pr_split);
            const Mat f = ck.model.encode(s);
            std::ostringstream os;
            csv::write_row(os, {"file_path", "name", "slot", "actual", "rank", "predicted", "score"});
            for (std::size_t i = 0; i < s.size(); ++i) {
                const Vec q = f.col(static_cast<Eigen::Index>(i));
                const auto ranked = model::predict(q, *ck.cluster, pr_top);
                for (std::size_t r = 0; r < ranked.size(); ++r)
                    csv::write_row(os, {s[i].file_path, s[i].name, std::string(types::to_string(s[i].kind)), s[i].label,
                                        std::to_string(r + 1), ranked[r].first, eval::svg::num(ranked[r].second)});
            }
            if (pr_out.empty()) std::cout << os.str();
            else write_file(pr_out, os.str());
            return kOk;
        };
    });

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "weighted F1 per slice on target samples");
    std::string ev_model, ev_samples, ev_out;
    evaluate->add_option("--model", ev_model, "checkpoint")->required();
    evaluate->add_option("--samples", ev_samples, "target samples JSONL; the test split is scored")->required();
    evaluate->add_option("--out", ev_out, "output JSON (default: stdout)");
    evaluate->callback([&] {
        action = [&] {
            const auto cfg = g.experiment();
            const auto ck = model::load_checkpoint(ev_model);
            if (!ck.cluster) throw ConfigError(ev_model + " has no type cluster");
            const auto all = types::read_samples(ev_samples);
            const auto test = types::of_split(all, extract::Split::Test);
            const auto p = model::predict_top1(ck.model.encode(test), *ck.cluster);
            std::vector<eval::Prediction> preds;
            std::vector<std::string> labels;
            for (std::size_t i = 0; i < test.size(); ++i) {
                preds.emplace_back(p[i], test[i].label);
                labels.push_back(test[i].label);
            }
            const std::set<std::string> known(ck.cluster->labels.begin(), ck.cluster->labels.end());
            nlohmann::json j;
            j["slices"] = slices_json(eval::slice_metrics(preds, types::label_space_of(all, cfg.common_threshold), known));
            j["removed_fraction"] = eval::filter_predictable(labels, known).removed_fraction;
            print_json(j, ev_out);
            return kOk;
        };
    });

    // probe-shift
    auto* probe = app.add_subcommand("probe-shift", "covariate shift probe on encoded features");
    std::string pb_model, pb_a, pb_b, pb_split_a = "train", pb_split_b = "test", pb_out;
    std::uint64_t pb_seed = 1;
    probe->add_option("--model", pb_model, "checkpoint")->required();
    probe->add_option("--a", pb_a, "first samples JSONL")->required();
    probe->add_option("--b", pb_b, "second samples JSONL")->required();
    probe->add_option("--split-a", pb_split_a, "split of the first set");
    probe->add_option("--split-b", pb_split_b, "split of the second set");
    probe->add_option("--seed", pb_seed, "probe seed");
    probe->add_option("--out", pb_out, "output JSON (default: stdout)");
    probe->callback([&] {
        action = [&] {
            const auto cfg = g.experiment();
            const auto ck = model::load_checkpoint(pb_model);
            const Mat a = ck.model.encode(samples_of(pb_a, pb_split_a));
            const Mat b = ck.model.encode(samples_of(pb_b, pb_split_b));
            const auto ia = pipeline::subsample(static_cast<std::size_t>(a.cols()), cfg.probe.samples, derive_seed(pb_seed, 0x9A));
            const auto ib = pipeline::subsample(static_cast<std::size_t>(b.cols()), cfg.probe.samples, derive_seed(pb_seed, 0x9B));
            eval::ExtraTreesConfig trees;
            trees.trees = cfg.probe.trees;
            const auto r = pipeline::stage("probe-shift", [&] {
                return eval::covariate_probe(pipeline::columns(a, ia), pipeline::columns(b, ib), pb_seed, cfg.probe.folds, trees);
            });
            const nlohmann::json j = {
                {"probe_f1", r.probe_f1}, {"fold_f1", r.fold_f1}, {"samples_a", r.samples_a}, {"samples_b", r.samples_b}};
            print_json(j, pb_out);
            return kOk;
        };
    });

    // report
    auto* report = app.add_subcommand("report", "run the experiment matrix and write the report");
    std::string rp_out = "report";
    bool rp_no_checks = false;
    report->add_option("--out", rp_out, "report directory");
    report->add_flag("--no-checks", rp_no_checks, "exit 0 even when a directional check fails");
    report->callback([&] {
        action = [&] {
            const auto cfg = g.experiment();
            pipeline::ArtifactCache cache(g.cache.empty() ? pipeline::cache_root(".cdt-cache") : fs::path(g.cache));
            pipeline::RunOptions ro;
            ro.log = g.log();
            ro.rerun = g.rerun("report");
            const auto rep = pipeline::run_experiment(cfg, cache, ro);
            pipeline::write_report(rep, rp_out);
            for (const auto& [k, v] : rep.checks) std::cout << (v ? "PASS " : "FAIL ") << k << "\n";
            std::cout << "report " << rep.config_hash << " written to " << rp_out << " (cache: " << cache.hits()
                      << " hits, " << cache.misses() << " misses)\n";
            return rep.passed() || rp_no_checks ? kOk : kAcceptance;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    try {
        return action();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const StageError& e) {
        std::cerr << "stage '" << e.stage() << "' failed: " << e.what() << "\n";
        return kStage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kStage;
    }
}
