// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdt/common/error.hpp"
#include "cdt/common/files.hpp"
#include "cdt/common/hash.hpp"
#include "cdt/dedup/clusters.hpp"
#include "cdt/embed/embedding.hpp"
#include "cdt/embed/regimes.hpp"
#include "cdt/model/adapt.hpp"
#include "cdt/model/network.hpp"
#include "cdt/pipeline/fixture.hpp"
#include "cdt/types/normalizer.hpp"

namespace cdt::pipeline {

/// Train on `source`, evaluate on the test split of `target`. Equal domains
/// make an in-domain setup.
struct SetupConfig {
    std::string id;
    std::string source;
    std::string target;

    bool cross_domain() const { return source != target; }
};

struct ProbeConfig {
    /// Vectors drawn from each side (all of them when a side is smaller).
    std::size_t samples = 1000;
    std::size_t folds = 6;
    std::size_t trees = 100;
};

struct ExperimentConfig {
    std::string name = "default";
    std::vector<SetupConfig> setups = {{"a", "web", "cal"}, {"b", "cal", "cal"}};
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    embed::Regime regime = embed::Regime::Both;
    embed::EmbeddingConfig embedding = default_embedding();
    model::ModelConfig model = default_model();
    std::vector<model::AdaptMethod> methods = {model::AdaptMethod::None, model::AdaptMethod::Dann,
                                               model::AdaptMethod::Wdgrl, model::AdaptMethod::FineTune};
    model::AdaptConfig adapt = default_adapt();
    dedup::DedupConfig dedup;
    double train_ratio = 0.70, valid_ratio = 0.10, test_ratio = 0.20;
    std::size_t occur_window = 7;
    std::size_t common_threshold = types::kCommonThreshold;
    ProbeConfig probe;
    types::NormalizerConfig normalizer;
    /// Snapshot roots per domain; when empty the fixture is generated instead.
    std::map<std::string, std::string> corpora;
    /// Repo lists per domain, used for repository dedup when given.
    std::map<std::string, std::string> repo_lists;
    FixtureSpec fixture;

    static embed::EmbeddingConfig default_embedding() {
        embed::EmbeddingConfig c;
        c.dim = 16;
        c.min_count = 2;
        return c;
    }

    static model::ModelConfig default_model() {
        model::ModelConfig c;
        c.hidden_id = 24;
        c.hidden_ctx = 24;
        c.out_dim = 32;
        c.id_len = 4;
        c.ctx_len = 12;
        c.epochs = 10;
        c.lr = 0.005;
        c.batch = 64;
        return c;
    }

    static model::AdaptConfig default_adapt() {
        model::AdaptConfig c;
        c.lambda_max = 2.0;
        c.critic_steps = 10;
        c.critic_lr = 5e-3;
        c.wd_weight = 0.3;
        c.finetune_epochs = 3;
        return c;
    }

    bool uses_fixture() const { return corpora.empty(); }

    void validate() const {
        if (setups.empty()) throw ConfigError("at least one setup is required");
        if (seeds.size() < 2) throw ConfigError("at least two seeds are required for significance tests");
        std::set<std::string> ids;
        for (const auto& s : setups) {
            if (s.id.empty() || !ids.insert(s.id).second) throw ConfigError("setup ids must be unique and non-empty");
            for (const auto* d : {&s.source, &s.target}) {
                if (uses_fixture() && *d != "web" && *d != "cal")
                    throw ConfigError("fixture domains are web and cal, not '" + *d + "'");
                if (!uses_fixture() && !corpora.count(*d)) throw ConfigError("no corpus given for domain '" + *d + "'");
            }
        }
        if (methods.empty() || methods.front() != model::AdaptMethod::None)
            throw ConfigError("the method list must start with none");
        if (!(train_ratio > 0 && valid_ratio >= 0 && test_ratio > 0)) throw ConfigError("invalid split ratios");
        if (probe.samples < 2 || probe.folds < 2 || probe.trees == 0) throw ConfigError("invalid probe settings");
        model.validate();
        fixture.validate();
    }

    std::vector<std::string> domains() const {
        std::set<std::string> out;
        for (const auto& s : setups) out.insert({s.source, s.target});
        return {out.begin(), out.end()};
    }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["name"] = c.name;
    for (const auto& s : c.setups) j["setups"].push_back({{"id", s.id}, {"source", s.source}, {"target", s.target}});
    j["seeds"] = c.seeds;
    j["regime"] = std::string(embed::to_string(c.regime));
    const auto& e = c.embedding;
    j["embedding"] = {{"dim", e.dim},       {"window", e.window}, {"min_count", e.min_count},
                      {"negatives", e.negatives}, {"epochs", e.epochs}, {"learning_rate", e.learning_rate}};
    j["model"] = c.model;
    j["model"].erase("seed");
    for (auto m : c.methods) j["methods"].push_back(std::string(model::to_string(m)));
    const auto& a = c.adapt;
    j["adapt"] = {{"lambda_max", a.lambda_max},       {"disc_hidden", a.disc_hidden},   {"disc_steps", a.disc_steps},
                  {"disc_lr", a.disc_lr},             {"critic_steps", a.critic_steps}, {"penalty", a.penalty},
                  {"wd_weight", a.wd_weight},         {"critic_hidden", a.critic_hidden},
                  {"critic_lr", a.critic_lr},         {"finetune_epochs", a.finetune_epochs}};
    j["dedup"] = {{"threshold", c.dedup.threshold}, {"k", c.dedup.k}, {"seed", c.dedup.seed}};
    j["split"] = {{"train", c.train_ratio}, {"valid", c.valid_ratio}, {"test", c.test_ratio}};
    j["occur_window"] = c.occur_window;
    j["common_threshold"] = c.common_threshold;
    j["probe"] = {{"samples", c.probe.samples}, {"folds", c.probe.folds}, {"trees", c.probe.trees}};
    j["normalizer"] = c.normalizer.to_json();
    j["corpora"] = c.corpora;
    j["repo_lists"] = c.repo_lists;
    j["fixture"] = c.fixture;
    return j;
}

inline ExperimentConfig experiment_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        static const std::set<std::string> known = {
            "name",   "setups", "seeds",        "regime",           "embedding", "model",      "methods",
            "adapt",  "dedup",  "split",        "occur_window",     "common_threshold", "probe", "normalizer",
            "corpora", "repo_lists", "fixture"};
        for (const auto& [k, _] : j.items())
            if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
        c.name = j.value("name", c.name);
        if (j.contains("setups")) {
            c.setups.clear();
            for (const auto& s : j.at("setups"))
                c.setups.push_back({s.at("id").get<std::string>(), s.at("source").get<std::string>(),
                                    s.at("target").get<std::string>()});
        }
        if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("regime")) c.regime = embed::parse_regime(j.at("regime").get<std::string>());
        if (j.contains("embedding")) {
            const auto& e = j.at("embedding");
            c.embedding.dim = e.value("dim", c.embedding.dim);
            c.embedding.window = e.value("window", c.embedding.window);
            c.embedding.min_count = e.value("min_count", c.embedding.min_count);
            c.embedding.negatives = e.value("negatives", c.embedding.negatives);
            c.embedding.epochs = e.value("epochs", c.embedding.epochs);
            c.embedding.learning_rate = e.value("learning_rate", c.embedding.learning_rate);
        }
        if (j.contains("model")) {
            nlohmann::json m = c.model;
            m.update(j.at("model"));
            c.model = m.get<model::ModelConfig>();
        }
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j.at("methods")) c.methods.push_back(model::parse_adapt_method(m.get<std::string>()));
        }
        if (j.contains("adapt")) {
            const auto& a = j.at("adapt");
            auto& t = c.adapt;
            t.lambda_max = a.value("lambda_max", t.lambda_max);
            t.disc_hidden = a.value("disc_hidden", t.disc_hidden);
            t.disc_steps = a.value("disc_steps", t.disc_steps);
            t.disc_lr = a.value("disc_lr", t.disc_lr);
            t.critic_steps = a.value("critic_steps", t.critic_steps);
            t.penalty = a.value("penalty", t.penalty);
            t.wd_weight = a.value("wd_weight", t.wd_weight);
            t.critic_hidden = a.value("critic_hidden", t.critic_hidden);
            t.critic_lr = a.value("critic_lr", t.critic_lr);
            t.finetune_epochs = a.value("finetune_epochs", t.finetune_epochs);
        }
        if (j.contains("dedup")) {
            const auto& d = j.at("dedup");
            c.dedup.threshold = d.value("threshold", c.dedup.threshold);
            c.dedup.k = d.value("k", c.dedup.k);
            c.dedup.seed = d.value("seed", c.dedup.seed);
        }
        if (j.contains("split")) {
            const auto& s = j.at("split");
            c.train_ratio = s.value("train", c.train_ratio);
            c.valid_ratio = s.value("valid", c.valid_ratio);
            c.test_ratio = s.value("test", c.test_ratio);
        }
        c.occur_window = j.value("occur_window", c.occur_window);
        c.common_threshold = j.value("common_threshold", c.common_threshold);
        if (j.contains("probe")) {
            const auto& p = j.at("probe");
            c.probe.samples = p.value("samples", c.probe.samples);
            c.probe.folds = p.value("folds", c.probe.folds);
            c.probe.trees = p.value("trees", c.probe.trees);
        }
        if (j.contains("normalizer")) c.normalizer = types::NormalizerConfig::from_json(j.at("normalizer"));
        if (j.contains("corpora")) c.corpora = j.at("corpora").get<std::map<std::string, std::string>>();
        if (j.contains("repo_lists")) c.repo_lists = j.at("repo_lists").get<std::map<std::string, std::string>>();
        if (j.contains("fixture")) c.fixture = j.at("fixture").get<FixtureSpec>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    } catch (const ParseError& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& p) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(p));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(p.string() + ": " + e.what());
    }
    return experiment_from_json(j);
}

/// sha256 of the canonical config JSON, first 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) { return sha256_hex(to_json(c).dump()).substr(0, 16); }

}  // namespace cdt::pipeline
