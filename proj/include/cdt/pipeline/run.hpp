// SPDX-License-Identifier: Apache-2.0
#pragma once

// The experiment pipeline: corpora -> dedup -> extract/split/normalize per
// seed -> embed -> train/adapt -> evaluate -> probe, with every intermediate
// stored in the artifact cache under a key derived from its inputs.

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cdt/common/csv.hpp"
#include "cdt/corpus/repo_list.hpp"
#include "cdt/corpus/snapshot.hpp"
#include "cdt/dedup/clusters.hpp"
#include "cdt/dedup/repos.hpp"
#include "cdt/dedup/tfidf.hpp"
#include "cdt/embed/embedding.hpp"
#include "cdt/embed/regimes.hpp"
#include "cdt/eval/distribution.hpp"
#include "cdt/eval/metrics.hpp"
#include "cdt/eval/probe.hpp"
#include "cdt/eval/shift.hpp"
#include "cdt/eval/significance.hpp"
#include "cdt/eval/svg.hpp"
#include "cdt/extract/dataset.hpp"
#include "cdt/model/adapt.hpp"
#include "cdt/model/checkpoint.hpp"
#include "cdt/model/knn.hpp"
#include "cdt/pipeline/cache.hpp"
#include "cdt/pipeline/config.hpp"
#include "cdt/pipeline/fixture.hpp"
#include "cdt/types/samples.hpp"

namespace cdt::pipeline {

using model::Mat;

using Log = std::function<void(const std::string&)>;

/// Runs `f`, turning any failure into a StageError naming the stage.
template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

// ---------------------------------------------------------------- corpora

struct Corpora {
    /// Domain -> deduplicated snapshot root.
    std::map<std::string, std::filesystem::path> trees;
    std::string key;
    nlohmann::ordered_json summary;
};

namespace detail {

inline std::map<std::string, std::vector<corpus::RepoRef>> read_repo_lists(const std::map<std::string, std::string>& paths) {
    std::map<std::string, std::vector<corpus::RepoRef>> out;
    for (const auto& [d, p] : paths) out[d] = corpus::import_repo_list(p);
    return out;
}

}  // namespace detail

/// Deduplicates `roots` into `out`: shared repositories are split between
/// domains, near-duplicate files are clustered per domain, and files present
/// in two domains are kept in one. Writes per-domain manifests and `summary.json`.
inline nlohmann::ordered_json dedup_corpora(const std::map<std::string, std::filesystem::path>& roots,
                                            std::map<std::string, std::vector<corpus::RepoRef>> repos,
                                            const dedup::DedupConfig& cfg, const std::filesystem::path& out) {
    nlohmann::ordered_json summary;
    std::map<std::string, std::set<std::string>> removed_projects;
    std::vector<std::string> listed;
    for (const auto& [d, _] : repos) listed.push_back(d);
    for (std::size_t i = 0; i < listed.size(); ++i)
        for (std::size_t j = i + 1; j < listed.size(); ++j) {
            const auto r = dedup::dedup_repos(repos[listed[i]], repos[listed[j]], cfg.seed);
            auto mark = [&](const std::string& d, const std::vector<std::string>& urls,
                            const std::vector<corpus::RepoRef>& all) {
                for (const auto& ref : all)
                    if (std::find(urls.begin(), urls.end(), ref.url) != urls.end())
                        removed_projects[d].insert(corpus::snapshot_dirname(ref));
            };
            mark(listed[i], r.removed_from_a, repos[listed[i]]);
            mark(listed[j], r.removed_from_b, repos[listed[j]]);
            summary["repo_dedup"].push_back({{"a", listed[i]},
                                             {"b", listed[j]},
                                             {"removed_from_a", r.removed_from_a},
                                             {"removed_from_b", r.removed_from_b}});
            repos[listed[i]] = r.a;
            repos[listed[j]] = r.b;
        }

    std::map<std::string, dedup::VectorSpace> spaces;
    std::map<std::string, std::vector<dedup::SourceFile>> sources;
    std::map<std::string, std::set<std::string>> removed;
    std::map<std::string, std::set<std::string>> native;
    for (const auto& [d, root] : roots) {
        std::set<std::string> native_projects;
        for (const auto& ref : repos[d])
            if (ref.domain && std::string(corpus::to_string(*ref.domain)) == d)
                native_projects.insert(corpus::snapshot_dirname(ref));
        for (const auto& project : extract::list_projects(root)) {
            if (removed_projects[d].count(project)) continue;
            for (auto& f : dedup::collect_sources(root / project)) {
                f.file_id = project + "/" + f.file_id;
                if (native_projects.count(project)) native[d].insert(f.file_id);
                sources[d].push_back(std::move(f));
            }
        }
        spaces[d] = dedup::build_file_vectors(sources[d]);
        const auto clusters = dedup::cluster_duplicates(spaces[d].files, cfg);
        write_file(out / ("manifest_" + d + ".csv"), dedup::format_manifest(clusters));
        removed[d] = dedup::removed_files(clusters);
        std::size_t fallback = 0;
        for (const auto& f : spaces[d].files) fallback += f.fallback;
        summary["domains"][d] = {{"projects_removed", removed_projects[d].size()},
                                 {"files", sources[d].size()},
                                 {"clusters", clusters.size()},
                                 {"near_duplicates_removed", removed[d].size()},
                                 {"fallback_tokenized", fallback}};
    }
    std::vector<std::string> domains;
    for (const auto& [d, _] : roots) domains.push_back(d);
    for (std::size_t i = 0; i < domains.size(); ++i)
        for (std::size_t j = i + 1; j < domains.size(); ++j) {
            auto survivors = [&](const std::string& d) {
                std::vector<dedup::FileVector> v;
                for (const auto& f : spaces[d].files)
                    if (!removed[d].count(f.file_id)) v.push_back(f);
                return v;
            };
            const auto& a = domains[i];
            const auto& b = domains[j];
            const auto r = dedup::cross_corpus_dedup(survivors(a), survivors(b), native[a], native[b]);
            removed[a].insert(r.removed_a.begin(), r.removed_a.end());
            removed[b].insert(r.removed_b.begin(), r.removed_b.end());
            summary["cross_dedup"].push_back({{"a", a},
                                              {"b", b},
                                              {"removed_from_a", std::vector<std::string>(r.removed_a.begin(), r.removed_a.end())},
                                              {"removed_from_b", std::vector<std::string>(r.removed_b.begin(), r.removed_b.end())}});
        }
    for (const auto& [d, root] : roots) {
        std::size_t kept = 0;
        for (const auto& f : sources[d]) {
            if (removed[d].count(f.file_id)) continue;
            write_file(out / d / f.file_id, f.text);
            ++kept;
        }
        std::filesystem::create_directories(out / d);
        summary["domains"][d]["files_kept"] = kept;
        std::string lines;
        for (const auto& id : removed[d]) lines += id + "\n";
        write_file(out / ("removed_" + d + ".txt"), lines);
    }
    write_file(out / "summary.json", summary.dump(2) + "\n");
    return summary;
}

inline Corpora prepare_corpora(const ExperimentConfig& cfg, ArtifactCache& cache, const Log& log) {
    std::map<std::string, std::filesystem::path> roots;
    std::map<std::string, std::string> lists;
    const auto domains = cfg.domains();
    if (cfg.uses_fixture()) {
        const nlohmann::json spec = cfg.fixture;
        const auto key = KeyBuilder().add("fixture", spec.dump()).key();
        const auto dir = stage("fixture", [&] {
            return cache.directory("fixture", key, [&](const std::filesystem::path& d) {
                log("fixture: generating synthetic corpora");
                generate_fixture(cfg.fixture, d / "corpus");
            });
        });
        for (const auto& d : domains) {
            roots[d] = dir / "corpus" / d;
            lists[d] = (dir / "corpus" / (d + ".csv")).string();
        }
    } else {
        for (const auto& d : domains) {
            roots[d] = cfg.corpora.at(d);
            if (cfg.repo_lists.count(d)) lists[d] = cfg.repo_lists.at(d);
        }
    }
    Corpora c;
    c.key = stage("dedup", [&] {
        KeyBuilder kb;
        kb.add("dedup", nlohmann::json({cfg.dedup.threshold, cfg.dedup.k, cfg.dedup.seed}).dump());
        for (const auto& [d, r] : roots) {
            if (!std::filesystem::is_directory(r)) throw Error("corpus root " + r.string() + " is not a directory");
            kb.add("tree:" + d, tree_digest(r));
        }
        for (const auto& [d, p] : lists) kb.add("repos:" + d, sha256_hex(read_file(p)));
        return kb.key();
    });
    const auto dir = stage("dedup", [&] {
        return cache.directory("dedup", c.key, [&](const std::filesystem::path& out) {
            log("dedup: clustering near-duplicate files");
            dedup_corpora(roots, detail::read_repo_lists(lists), cfg.dedup, out);
        });
    });
    for (const auto& d : domains) c.trees[d] = dir / d;
    c.summary = nlohmann::ordered_json::parse(read_file(dir / "summary.json"));
    return c;
}

// ---------------------------------------------------------------- samples

struct DomainSamples {
    std::vector<types::TypeSample> samples;
    std::string key;
    types::DropReport drops;
    std::size_t records = 0, skipped = 0;
};

inline DomainSamples prepare_samples(const ExperimentConfig& cfg, const Corpora& corpora, const std::string& domain,
                                     std::uint64_t seed, ArtifactCache& cache, const Log& log) {
    const auto key = KeyBuilder()
                         .add("corpora", corpora.key)
                         .add("domain", domain)
                         .add("seed", std::to_string(seed))
                         .add("split", nlohmann::json({cfg.train_ratio, cfg.valid_ratio, cfg.test_ratio}).dump())
                         .add("window", std::to_string(cfg.occur_window))
                         .add("normalizer", cfg.normalizer.to_json().dump())
                         .key();
    const auto dir = stage("extract", [&] {
        return cache.directory("samples", key, [&](const std::filesystem::path& out) {
            log("extract: " + domain + " seed " + std::to_string(seed));
            const auto& root = corpora.trees.at(domain);
            const auto split = extract::split_projects(extract::list_projects(root), seed, cfg.train_ratio,
                                                       cfg.valid_ratio, cfg.test_ratio);
            write_file(out / "split.csv", extract::format_split_manifest(split));
            extract::ExtractOptions opts;
            opts.occur_window = cfg.occur_window;
            const auto ex = extract::extract_snapshot(root, split, opts);
            extract::write_dataset(ex.records, out / "dataset.jsonl");
            std::string skipped = "file_path,reason\n";
            for (const auto& s : ex.skipped) skipped += csv::escape(s.file_path) + "," + csv::escape(s.reason) + "\n";
            write_file(out / "skipped.csv", skipped);
            const types::Normalizer norm(cfg.normalizer);
            types::DropReport drops;
            const auto samples = types::build_samples(ex.records, norm, domain, &drops, cfg.occur_window);
            types::write_samples(samples, out / "samples.jsonl");
            write_file(out / "drops.csv", drops.to_csv());
            write_file(out / "counts.json",
                       nlohmann::json({{"records", ex.records.size()}, {"skipped", ex.skipped.size()}}).dump() + "\n");
        });
    });
    DomainSamples s;
    s.key = key;
    s.samples = types::read_samples(dir / "samples.jsonl");
    std::istringstream drops(read_file(dir / "drops.csv"));
    for (const auto& row : csv::read_all(drops)) {
        if (row.fields.size() != 2 || row.fields[0] == "reason") continue;
        if (row.fields[0] == "emitted") s.drops.emitted = std::stoull(row.fields[1]);
        else s.drops.add(row.fields[0], std::stoull(row.fields[1]));
    }
    const auto counts = nlohmann::json::parse(read_file(dir / "counts.json"));
    s.records = counts.at("records");
    s.skipped = counts.at("skipped");
    return s;
}

// ---------------------------------------------------------------- embeddings

inline std::vector<embed::Sentence> embedding_corpus(embed::Regime r, const SetupConfig& setup,
                                                     const std::vector<types::TypeSample>& source,
                                                     const std::vector<types::TypeSample>& target) {
    static const std::vector<types::TypeSample> none;
    return embed::regime_corpus(r, source, setup.cross_domain() ? target : none);
}

struct Embedding {
    embed::EmbeddingModel model;
    std::string key;
};

inline Embedding prepare_embedding(const ExperimentConfig& cfg, const SetupConfig& setup, const DomainSamples& src,
                                   const DomainSamples& tgt, std::uint64_t seed, ArtifactCache& cache, const Log& log) {
    auto ec = cfg.embedding;
    ec.seed = seed;
    const auto key = KeyBuilder()
                         .add("source", src.key)
                         .add("target", setup.cross_domain() ? tgt.key : std::string())
                         .add("regime", std::string(embed::to_string(cfg.regime)))
                         .add("cfg", nlohmann::json({ec.dim, ec.window, ec.min_count, ec.negatives, ec.epochs,
                                                     ec.learning_rate, ec.seed})
                                         .dump())
                         .key();
    const auto dir = stage("embed", [&] {
        return cache.directory("embedding", key, [&](const std::filesystem::path& out) {
            log("embed: setup " + setup.id + " seed " + std::to_string(seed));
            const auto corpus = embedding_corpus(cfg.regime, setup, src.samples, tgt.samples);
            embed::save(embed::train_embedding(corpus, ec, setup.source), out / "embedding");
        });
    });
    return {embed::load(dir / "embedding", setup.source), key};
}

struct OovRow {
    std::string setup;
    std::string regime;
    std::uint64_t seed = 0;
    std::size_t vocabulary = 0;
    embed::OovReport report;
    /// This regime's vocabulary contains the previous regime's.
    bool includes_previous = true;
};

/// OOV rates of the target test split under embeddings trained on the
/// growing regime corpora. Only the vocabulary matters, so no vectors are trained.
inline std::vector<OovRow> oov_audit(const ExperimentConfig& cfg, const SetupConfig& setup,
                                     const std::vector<types::TypeSample>& source,
                                     const std::vector<types::TypeSample>& target, std::uint64_t seed) {
    const auto test = embed::sentences_of(types::of_split(target, extract::Split::Test));
    std::vector<OovRow> out;
    std::set<std::string> previous;
    for (auto r : {embed::Regime::Source, embed::Regime::Both, embed::Regime::All}) {
        const auto vocab = embed::build_vocab(embedding_corpus(r, setup, source, target), cfg.embedding.min_count);
        std::vector<std::string> tokens;
        std::vector<std::size_t> counts;
        for (const auto& [t, c] : vocab) {
            tokens.push_back(t);
            counts.push_back(c);
        }
        const std::set<std::string> current(tokens.begin(), tokens.end());
        OovRow row;
        row.setup = setup.id;
        row.regime = std::string(embed::to_string(r));
        row.seed = seed;
        row.vocabulary = tokens.size();
        row.includes_previous = std::includes(current.begin(), current.end(), previous.begin(), previous.end());
        const embed::EmbeddingModel vocab_only(1, tokens, counts, std::vector<float>(tokens.size(), 0.0f), row.regime);
        row.report = embed::oov_report(vocab_only, test, setup.target + "-test");
        out.push_back(std::move(row));
        previous = current;
    }
    return out;
}

// ---------------------------------------------------------------- models

struct TrainedModel {
    model::TypeModel model;
    model::TypeCluster cluster;
    std::string key;
    double final_loss = 0;
    nlohmann::json history;
};

inline TrainedModel prepare_model(const ExperimentConfig& cfg, const SetupConfig& setup, model::AdaptMethod method,
                                  const Embedding& emb, const DomainSamples& src, const DomainSamples& tgt,
                                  std::uint64_t seed, ArtifactCache& cache, const Log& log,
                                  const TrainedModel* pretrained = nullptr) {
    using model::AdaptMethod;
    auto mc = cfg.model;
    mc.seed = seed;
    nlohmann::json mcj = mc;
    const auto& a = cfg.adapt;
    const std::string acfg = nlohmann::json({a.lambda_max, a.disc_hidden, a.disc_steps, a.disc_lr, a.critic_steps,
                                             a.penalty, a.wd_weight, a.critic_hidden, a.critic_lr, a.finetune_epochs})
                                 .dump();
    KeyBuilder kb;
    kb.add("embedding", emb.key).add("source", src.key).add("model", mcj.dump()).add("method",
                                                                                     std::string(model::to_string(method)));
    if (method != AdaptMethod::None) kb.add("target", tgt.key).add("adapt", acfg);
    if (method == AdaptMethod::FineTune) {
        if (!pretrained) throw Error("fine-tuning needs the unadapted model");
        kb.add("pretrained", pretrained->key);
    }
    const auto key = kb.key();
    const std::string stage_name = method == AdaptMethod::None ? "train" : "adapt";
    const auto dir = stage(stage_name, [&] {
        return cache.directory("model", key, [&](const std::filesystem::path& out) {
            log(stage_name + ": setup " + setup.id + " " + std::string(model::to_string(method)) + " seed " +
                std::to_string(seed));
            const auto src_train = types::of_split(src.samples, extract::Split::Train);
            const auto tgt_train = types::of_split(tgt.samples, extract::Split::Train);
            auto opt = model::default_options(mc);
            nlohmann::json hist;
            model::TypeModel m;
            model::TypeCluster cluster;
            if (method == AdaptMethod::FineTune) {
                const auto ts = model::make_trainset(pretrained->model, tgt_train);
                opt.epochs = a.finetune_epochs;
                m = model::fine_tune(pretrained->model, ts, opt);
                cluster = model::cluster_from(m, ts);
            } else {
                m = model::make_model(emb.model, src_train, mc);
                const auto ts = model::make_trainset(m, src_train);
                if (method == AdaptMethod::None) {
                    hist["loss"] = model::train(m, ts, opt).epoch_loss;
                } else {
                    const auto target_inputs = m.prepare(tgt_train);
                    if (method == AdaptMethod::Dann) hist["disc_loss"] = model::dann_train(m, ts, target_inputs, opt, a).disc_loss;
                    else hist["critic_estimate"] = model::wdgrl_train(m, ts, target_inputs, opt, a).estimate;
                }
                cluster = model::cluster_from(m, ts);
            }
            write_file(out / "model.ckpt", model::serialize(m, &cluster));
            write_file(out / "history.json", hist.dump() + "\n");
        });
    });
    auto ck = model::deserialize(read_file(dir / "model.ckpt"));
    TrainedModel t{std::move(ck.model), std::move(*ck.cluster), key, 0, nlohmann::json::parse(read_file(dir / "history.json"))};
    return t;
}

// ---------------------------------------------------------------- evaluation

struct RunResult {
    std::string setup;
    model::AdaptMethod method;
    std::uint64_t seed = 0;
    std::map<eval::SliceName, eval::SliceResult> slices;
    double removed_fraction = 0;
    eval::ShiftProbeReport probe;
};

inline std::vector<std::size_t> subsample(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (k >= n) return idx;
    Rng rng(seed);
    shuffle(std::span<std::size_t>(idx), rng);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline Mat columns(const Mat& m, const std::vector<std::size_t>& idx) {
    Mat out(m.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(static_cast<Eigen::Index>(idx[i]));
    return out;
}

inline RunResult evaluate_run(const ExperimentConfig& cfg, const SetupConfig& setup, model::AdaptMethod method,
                              const TrainedModel& tm, const DomainSamples& src, const DomainSamples& tgt,
                              std::uint64_t seed) {
    RunResult r;
    r.setup = setup.id;
    r.method = method;
    r.seed = seed;
    const auto test = types::of_split(tgt.samples, extract::Split::Test);
    if (test.empty()) throw StageError("evaluate", "target domain has no test samples");
    const Mat feats = tm.model.encode(test);
    const auto pred = stage("predict", [&] { return model::predict_top1(feats, tm.cluster); });
    std::vector<eval::Prediction> preds;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < test.size(); ++i) {
        preds.emplace_back(pred[i], test[i].label);
        labels.push_back(test[i].label);
    }
    const std::set<std::string> train_labels(tm.cluster.labels.begin(), tm.cluster.labels.end());
    r.slices = stage("evaluate", [&] {
        return eval::slice_metrics(preds, types::label_space_of(tgt.samples, cfg.common_threshold), train_labels);
    });
    r.removed_fraction = eval::filter_predictable(labels, train_labels).removed_fraction;
    r.probe = stage("probe-shift", [&] {
        const auto train = types::of_split(src.samples, extract::Split::Train);
        const Mat a = tm.model.encode(train);
        const auto ia = subsample(static_cast<std::size_t>(a.cols()), cfg.probe.samples, derive_seed(seed, 0x9A));
        const auto ib = subsample(static_cast<std::size_t>(feats.cols()), cfg.probe.samples, derive_seed(seed, 0x9B));
        eval::ExtraTreesConfig trees;
        trees.trees = cfg.probe.trees;
        return eval::covariate_probe(columns(a, ia), columns(feats, ib), seed, cfg.probe.folds, trees);
    });
    return r;
}

// ---------------------------------------------------------------- experiment

struct ExperimentReport {
    std::string config_hash;
    nlohmann::ordered_json json;
    /// Output file name -> contents, written verbatim by write_report.
    std::map<std::string, std::string> files;
    std::map<std::string, bool> checks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.second; });
    }
};

struct RunOptions {
    Log log = [](const std::string&) {};
    /// Shown in stage errors so the failure can be reproduced.
    std::string rerun;
};

namespace detail {

inline std::string run_label(const std::string& setup, model::AdaptMethod m) {
    return setup + "/" + std::string(model::to_string(m));
}

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

/// Prepends a config_hash column to a CSV table.
inline std::string with_hash(const std::string& table, const std::string& hash) {
    std::istringstream in(table);
    std::ostringstream os;
    bool header = true;
    for (auto row : csv::read_all(in)) {
        row.fields.insert(row.fields.begin(), header ? std::string("config_hash") : hash);
        csv::write_row(os, row.fields);
        header = false;
    }
    return os.str();
}

struct Comparison {
    std::string name;
    std::string a, b;
};

}  // namespace detail

/// Runs every setup, seed and method of `cfg` and aggregates the results.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, ArtifactCache& cache, const RunOptions& ro = {}) {
    using model::AdaptMethod;
    cfg.validate();
    const auto& log = ro.log;
    try {
        ExperimentReport rep;
        rep.config_hash = config_hash(cfg);
        const auto corpora = prepare_corpora(cfg, cache, log);

        std::vector<RunResult> runs;
        std::vector<OovRow> oov;
        std::map<std::string, DomainSamples> first_seed;
        for (const auto seed : cfg.seeds) {
            std::map<std::string, DomainSamples> samples;
            for (const auto& d : cfg.domains()) samples[d] = prepare_samples(cfg, corpora, d, seed, cache, log);
            if (first_seed.empty()) first_seed = samples;
            for (const auto& setup : cfg.setups) {
                const auto& src = samples.at(setup.source);
                const auto& tgt = samples.at(setup.target);
                const auto emb = prepare_embedding(cfg, setup, src, tgt, seed, cache, log);
                for (auto& row : oov_audit(cfg, setup, src.samples, tgt.samples, seed)) oov.push_back(std::move(row));
                const auto base = prepare_model(cfg, setup, AdaptMethod::None, emb, src, tgt, seed, cache, log);
                runs.push_back(evaluate_run(cfg, setup, AdaptMethod::None, base, src, tgt, seed));
                if (!setup.cross_domain()) continue;
                for (const auto m : cfg.methods) {
                    if (m == AdaptMethod::None) continue;
                    const auto tm = prepare_model(cfg, setup, m, emb, src, tgt, seed, cache, log, &base);
                    runs.push_back(evaluate_run(cfg, setup, m, tm, src, tgt, seed));
                }
            }
        }
        log("report: aggregating " + std::to_string(runs.size()) + " runs");
        const auto& hash = rep.config_hash;
        auto& j = rep.json;
        j["config_hash"] = hash;
        j["config"] = to_json(cfg);
        j["dedup"] = corpora.summary;
        for (const auto& [d, s] : first_seed)
            j["datasets"][d] = {{"records", s.records},
                                {"skipped_files", s.skipped},
                                {"samples", s.samples.size()},
                                {"dropped", s.drops.by_reason}};

        // Per-run metrics.
        std::map<std::string, std::map<eval::SliceName, std::vector<double>>> f1;
        std::map<std::string, std::vector<double>> probe, removed;
        std::ostringstream runs_csv;
        csv::write_row(runs_csv, {"config_hash", "setup", "method", "seed", "slice", "samples", "f1"});
        bool rq3 = true;
        for (const auto& r : runs) {
            const auto label = detail::run_label(r.setup, r.method);
            for (const auto& [slice, res] : r.slices) {
                csv::write_row(runs_csv, {hash, r.setup, std::string(model::to_string(r.method)), std::to_string(r.seed),
                                          std::string(eval::to_string(slice)), std::to_string(res.samples),
                                          res.f1 ? detail::fmt(*res.f1) : std::string()});
                if (res.f1) f1[label][slice].push_back(*res.f1);
            }
            const auto& all = r.slices.at(eval::SliceName::All);
            const auto& pred = r.slices.at(eval::SliceName::PredictableAll);
            if (all.f1 && pred.f1 && *pred.f1 + 1e-12 < *all.f1) rq3 = false;
            probe[label].push_back(r.probe.probe_f1);
            removed[label].push_back(r.removed_fraction);
        }
        rep.files["runs.csv"] = runs_csv.str();

        std::vector<std::string> labels;
        for (const auto& setup : cfg.setups) {
            labels.push_back(detail::run_label(setup.id, AdaptMethod::None));
            if (setup.cross_domain())
                for (const auto m : cfg.methods)
                    if (m != AdaptMethod::None) labels.push_back(detail::run_label(setup.id, m));
        }
        auto mean_of = [](const std::vector<double>& v) { return v.empty() ? 0.0 : eval::mean_of(v); };
        std::ostringstream summary_csv;
        csv::write_row(summary_csv, {"config_hash", "setup", "method", "slice", "runs", "mean_f1", "std_f1"});
        for (const auto& label : labels) {
            const auto slash = label.find('/');
            for (const auto slice : eval::kSlices) {
                const auto& v = f1[label][slice];
                csv::write_row(summary_csv, {hash, label.substr(0, slash), label.substr(slash + 1),
                                             std::string(eval::to_string(slice)), std::to_string(v.size()),
                                             v.empty() ? "" : detail::fmt(mean_of(v)),
                                             v.empty() ? "" : detail::fmt(eval::stddev_of(v))});
                if (!v.empty())
                    j["results"][label][std::string(eval::to_string(slice))] = {{"mean", mean_of(v)},
                                                                                {"std", eval::stddev_of(v)},
                                                                                {"runs", v.size()}};
            }
            j["results"][label]["removed_fraction"] = mean_of(removed[label]);
            j["results"][label]["probe_f1"] = {{"mean", mean_of(probe[label])}, {"std", eval::stddev_of(probe[label])}};
        }
        rep.files["summary.csv"] = summary_csv.str();

        std::ostringstream probe_csv;
        csv::write_row(probe_csv, {"config_hash", "setup", "method", "seed", "samples_source", "samples_target", "probe_f1"});
        for (const auto& r : runs)
            csv::write_row(probe_csv, {hash, r.setup, std::string(model::to_string(r.method)), std::to_string(r.seed),
                                       std::to_string(r.probe.samples_a), std::to_string(r.probe.samples_b),
                                       detail::fmt(r.probe.probe_f1)});
        rep.files["probe.csv"] = probe_csv.str();

        // Significance between condition pairs.
        std::vector<detail::Comparison> comparisons;
        std::vector<std::pair<const SetupConfig*, const SetupConfig*>> pairs;  // cross, in-domain on same target
        for (const auto& a : cfg.setups) {
            if (!a.cross_domain()) continue;
            const SetupConfig* in_domain = nullptr;
            for (const auto& b : cfg.setups)
                if (!b.cross_domain() && b.target == a.target) in_domain = &b;
            pairs.emplace_back(&a, in_domain);
            if (in_domain)
                comparisons.push_back({"in_domain_vs_cross", detail::run_label(in_domain->id, AdaptMethod::None),
                                       detail::run_label(a.id, AdaptMethod::None)});
            for (const auto m : cfg.methods) {
                if (m == AdaptMethod::None) continue;
                comparisons.push_back({"adapted_vs_cross", detail::run_label(a.id, m), detail::run_label(a.id, AdaptMethod::None)});
                if (m == AdaptMethod::FineTune && in_domain)
                    comparisons.push_back({"finetune_vs_in_domain", detail::run_label(a.id, m),
                                           detail::run_label(in_domain->id, AdaptMethod::None)});
            }
        }
        std::ostringstream sig_csv;
        csv::write_row(sig_csv, {"config_hash", "comparison", "a", "b", "slice", "mean_a", "mean_b", "std_a", "std_b",
                                 "t", "p_value", "significant"});
        std::map<std::string, eval::SignificanceResult> sig_all;
        for (const auto& c : comparisons)
            for (const auto slice : eval::kSlices) {
                const auto& va = f1[c.a][slice];
                const auto& vb = f1[c.b][slice];
                if (va.size() < 2 || vb.size() < 2) continue;
                const auto s = eval::significance(va, vb);
                if (slice == eval::SliceName::All) sig_all[c.a + " vs " + c.b] = s;
                csv::write_row(sig_csv, {hash, c.name, c.a, c.b, std::string(eval::to_string(slice)), detail::fmt(s.mean_a),
                                         detail::fmt(s.mean_b), detail::fmt(s.std_a), detail::fmt(s.std_b),
                                         detail::fmt(s.t), detail::fmt(s.p_value), s.significant ? "1" : "0"});
                if (slice == eval::SliceName::All)
                    j["significance"].push_back({{"comparison", c.name}, {"a", c.a}, {"b", c.b}, {"t", s.t},
                                                 {"p_value", s.p_value}, {"significant", s.significant}});
            }
        rep.files["significance.csv"] = sig_csv.str();

        // OOV audit.
        std::ostringstream oov_csv;
        csv::write_row(oov_csv, {"config_hash", "setup", "seed", "regime", "vocabulary", "tokens", "oov_tokens",
                                 "oov_rate", "includes_previous"});
        bool oov_monotone = true;
        std::map<std::string, std::vector<double>> oov_source;
        for (std::size_t i = 0; i < oov.size(); ++i) {
            const auto& o = oov[i];
            csv::write_row(oov_csv, {hash, o.setup, std::to_string(o.seed), o.regime, std::to_string(o.vocabulary),
                                     std::to_string(o.report.total_tokens), std::to_string(o.report.oov_tokens),
                                     detail::fmt(o.report.oov_rate), o.includes_previous ? "1" : "0"});
            if (!o.includes_previous) oov_monotone = false;
            if (i > 0 && oov[i - 1].setup == o.setup && oov[i - 1].seed == o.seed &&
                o.report.oov_rate > oov[i - 1].report.oov_rate)
                oov_monotone = false;
            if (o.regime == "source") oov_source[o.setup].push_back(o.report.oov_rate);
        }
        rep.files["oov.csv"] = oov_csv.str();

        // Prior shift and type distributions, over whole domains.
        std::ostringstream shift_csv;
        csv::write_row(shift_csv, {"config_hash", "source", "target", "tv_distance", "types_source", "types_target",
                                   "shared_types"});
        std::vector<eval::NamedLabels> named;
        std::map<std::string, std::vector<std::string>> domain_labels;
        for (const auto& [d, s] : first_seed) {
            auto& l = domain_labels[d];
            for (const auto& t : s.samples) l.push_back(t.label);
            named.push_back({d, l, model::VisibleTypeIndex::from_training(s.samples, cfg.model.visible_types).types()});
        }
        for (const auto& [a, _] : pairs) {
            const auto ps = eval::prior_shift_report(domain_labels.at(a->source), domain_labels.at(a->target));
            csv::write_row(shift_csv, {hash, a->source, a->target, detail::fmt(ps.tv_distance), std::to_string(ps.types_a),
                                       std::to_string(ps.types_b), std::to_string(ps.shared_types)});
            j["prior_shift"].push_back({{"source", a->source}, {"target", a->target}, {"tv_distance", ps.tv_distance},
                                        {"types_source", ps.types_a}, {"types_target", ps.types_b},
                                        {"shared_types", ps.shared_types}});
        }
        rep.files["prior_shift.csv"] = shift_csv.str();
        const auto dist = eval::distribution_report(named);
        rep.files["type_top.csv"] = detail::with_hash(dist.top_csv(), hash);
        rep.files["type_overlap.csv"] = detail::with_hash(dist.overlap_csv(), hash);
        rep.files["type_distribution.svg"] = dist.chart_svg();

        // Adaptation chart: one group per cross-domain setup, one bar per method.
        std::vector<std::string> series;
        for (const auto m : cfg.methods) series.emplace_back(model::to_string(m));
        std::vector<eval::svg::Group> groups;
        std::ostringstream chart_csv;
        csv::write_row(chart_csv, {"config_hash", "setup", "method", "mean_f1"});
        for (const auto& [a, _] : pairs) {
            eval::svg::Group g{a->id + " (" + a->source + " to " + a->target + ")", {}};
            for (const auto m : cfg.methods) {
                const double v = mean_of(f1[detail::run_label(a->id, m)][eval::SliceName::All]);
                g.values.push_back(v);
                csv::write_row(chart_csv, {hash, a->id, std::string(model::to_string(m)), detail::fmt(v)});
            }
            groups.push_back(std::move(g));
        }
        rep.files["adaptation.csv"] = chart_csv.str();
        if (!groups.empty())
            rep.files["adaptation.svg"] =
                eval::svg::grouped_bars("Target F1 by adaptation method [" + hash + "]", series, groups, "weighted F1");

        // Directional checks.
        auto all_mean = [&](const std::string& label, eval::SliceName s = eval::SliceName::All) {
            return mean_of(f1[label][s]);
        };
        bool rq2 = !pairs.empty(), rq4 = true, rq5 = oov_monotone, rq6 = true;
        for (const auto& [a, b] : pairs) {
            const auto none = detail::run_label(a->id, AdaptMethod::None);
            if (b) {
                const auto in = detail::run_label(b->id, AdaptMethod::None);
                const auto it = sig_all.find(in + " vs " + none);
                rq2 = rq2 && it != sig_all.end() && it->second.mean_a > it->second.mean_b && it->second.p_value < 0.05;
                rq5 = rq5 && mean_of(oov_source[a->id]) > mean_of(oov_source[b->id]);
            } else {
                rq2 = false;
            }
            for (const auto m : cfg.methods) {
                const auto label = detail::run_label(a->id, m);
                if (m == AdaptMethod::Dann || m == AdaptMethod::Wdgrl)
                    rq6 = rq6 && mean_of(probe[label]) < mean_of(probe[none]);
                if (m == AdaptMethod::FineTune) {
                    rq6 = rq6 && all_mean(label) >= all_mean(none);
                    if (b) rq6 = rq6 && std::abs(all_mean(label) - all_mean(detail::run_label(b->id, AdaptMethod::None))) <= 0.05;
                }
            }
        }
        for (const auto& setup : cfg.setups) {
            const auto label = detail::run_label(setup.id, AdaptMethod::None);
            const auto& c = f1[label][eval::SliceName::Common];
            const auto& r = f1[label][eval::SliceName::Rare];
            rq4 = rq4 && !c.empty() && !r.empty() && mean_of(c) > mean_of(r);
        }
        rep.checks = {{"in_domain_beats_cross_domain", rq2},
                      {"predictable_at_least_all", rq3},
                      {"common_beats_rare", rq4},
                      {"oov_shrinks_with_corpus", rq5},
                      {"adaptation_reduces_shift", rq6}};
        for (const auto& [k, v] : rep.checks) j["checks"][k] = v;
        rep.files["report.json"] = j.dump(2) + "\n";
        return rep;
    } catch (const StageError& e) {
        if (ro.rerun.empty()) throw;
        throw StageError(e.stage(), std::string(e.what()).substr(e.stage().size() + 2) + " (rerun: " + ro.rerun + ")");
    }
}

inline void write_report(const ExperimentReport& rep, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, text] : rep.files) write_file(dir / name, text);
}

}  // namespace cdt::pipeline
