// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic two-domain corpus. Each domain gets a Zipf-shaped set of core
// types (at least 100 slots each) and a rare tail, both partly shared with the
// other domain. Identifiers and the calls applied to typed values are drawn
// from per-type word pools; with probability `covariate_shift` a slot uses
// its domain's own pool instead of the pool both domains share.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdt/common/error.hpp"
#include "cdt/common/files.hpp"
#include "cdt/common/hash.hpp"
#include "cdt/common/rng.hpp"
#include "cdt/corpus/repo_list.hpp"
#include "cdt/corpus/snapshot.hpp"

namespace cdt::pipeline {

struct FixtureSpec {
    std::size_t projects = 20;  // per domain
    std::size_t files_per_project = 5;
    std::size_t core_types = 12;
    double shared_fraction = 0.75;
    std::size_t rare_tail = 12;
    double covariate_shift = 0.8;
    /// Slots of the most frequent core type; the rest follow a Zipf curve.
    std::size_t head_quota = 600;
    double zipf_exponent = 0.8;
    std::size_t min_common = 100;
    std::size_t rare_head = 60;
    /// Probability that a name or call carries no type signal.
    double noise = 0.15;
    std::size_t duplicate_files = 3;  // per domain
    std::size_t cross_duplicates = 1;
    std::size_t shared_repos = 2;
    std::uint64_t seed = 7;

    void validate() const {
        if (projects < 3) throw ConfigError("fixture needs at least 3 projects per domain");
        if (files_per_project == 0) throw ConfigError("fixture needs at least one file per project");
        if (core_types < 2 || core_types > 12) throw ConfigError("core_types must lie in [2, 12]");
        if (rare_tail > 40) throw ConfigError("rare_tail must not exceed 40");
        if (!(shared_fraction >= 0 && shared_fraction <= 1)) throw ConfigError("shared_fraction must lie in [0, 1]");
        if (!(covariate_shift >= 0 && covariate_shift <= 1)) throw ConfigError("covariate_shift must lie in [0, 1]");
        if (!(noise >= 0 && noise < 1)) throw ConfigError("noise must lie in [0, 1)");
        if (min_common < 1 || head_quota < min_common) throw ConfigError("head_quota must be at least min_common");
        if (rare_head >= min_common) throw ConfigError("rare_head must stay below min_common");
        // Helper modules use the three highest-ranked shared types.
        if ((cross_duplicates || shared_repos) && std::llround(static_cast<double>(core_types) * shared_fraction) < 3)
            throw ConfigError("cross_duplicates and shared_repos need at least 3 shared core types");
    }
};

inline void to_json(nlohmann::json& j, const FixtureSpec& s) {
    j = {{"projects", s.projects},
         {"files_per_project", s.files_per_project},
         {"core_types", s.core_types},
         {"shared_fraction", s.shared_fraction},
         {"rare_tail", s.rare_tail},
         {"covariate_shift", s.covariate_shift},
         {"head_quota", s.head_quota},
         {"zipf_exponent", s.zipf_exponent},
         {"min_common", s.min_common},
         {"rare_head", s.rare_head},
         {"noise", s.noise},
         {"duplicate_files", s.duplicate_files},
         {"cross_duplicates", s.cross_duplicates},
         {"shared_repos", s.shared_repos},
         {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, FixtureSpec& s) {
    const FixtureSpec d;
    s.projects = j.value("projects", d.projects);
    s.files_per_project = j.value("files_per_project", d.files_per_project);
    s.core_types = j.value("core_types", d.core_types);
    s.shared_fraction = j.value("shared_fraction", d.shared_fraction);
    s.rare_tail = j.value("rare_tail", d.rare_tail);
    s.covariate_shift = j.value("covariate_shift", d.covariate_shift);
    s.head_quota = j.value("head_quota", d.head_quota);
    s.zipf_exponent = j.value("zipf_exponent", d.zipf_exponent);
    s.min_common = j.value("min_common", d.min_common);
    s.rare_head = j.value("rare_head", d.rare_head);
    s.noise = j.value("noise", d.noise);
    s.duplicate_files = j.value("duplicate_files", d.duplicate_files);
    s.cross_duplicates = j.value("cross_duplicates", d.cross_duplicates);
    s.shared_repos = j.value("shared_repos", d.shared_repos);
    s.seed = j.value("seed", d.seed);
    s.validate();
}

/// What the generator put where, for tests and the report.
struct FixtureManifest {
    /// Normalized label -> planned slot count, per domain (before duplicates).
    std::map<std::string, std::map<std::string, std::size_t>> quotas;
    std::set<std::string> shared_labels;
    std::map<std::string, std::vector<corpus::RepoRef>> repos;
    std::size_t files = 0;
};

inline constexpr const char* kFixtureDomains[] = {"web", "cal"};

namespace detail {

struct TypeDef {
    std::string annotation;  // as written in source
    std::string label;       // after normalization
    std::vector<std::string> imports;
};

inline TypeDef builtin(const std::string& ann, const std::string& label,
                       std::vector<std::string> imports = {}) {
    return {ann, label, std::move(imports)};
}

// Shared core types first, then each domain's own, in rank order.
inline const std::vector<TypeDef>& shared_core() {
    static const std::vector<TypeDef> v = {
        builtin("int", "builtins.int"),
        builtin("str", "builtins.str"),
        builtin("List[str]", "List[builtins.str]", {"from typing import List"}),
        builtin("bool", "builtins.bool"),
        builtin("Dict[str, int]", "Dict[builtins.str, builtins.int]", {"from typing import Dict"}),
        builtin("float", "builtins.float"),
        builtin("Optional[str]", "Optional[builtins.str]", {"from typing import Optional"}),
        builtin("List[int]", "List[builtins.int]", {"from typing import List"}),
        builtin("bytes", "builtins.bytes"),
        builtin("Tuple[int, int]", "Tuple[builtins.int, builtins.int]", {"from typing import Tuple"}),
        builtin("Set[str]", "Set[builtins.str]", {"from typing import Set"}),
        builtin("Optional[int]", "Optional[builtins.int]", {"from typing import Optional"}),
    };
    return v;
}

inline const std::vector<TypeDef>& own_core(std::size_t domain) {
    static const std::vector<TypeDef> web = {
        builtin("Request", "flask.Request", {"from flask import Request"}),
        builtin("Response", "flask.Response", {"from flask import Response"}),
        builtin("Dict[str, str]", "Dict[builtins.str, builtins.str]", {"from typing import Dict"}),
        builtin("Session", "sqlalchemy.orm.Session", {"from sqlalchemy.orm import Session"}),
        builtin("datetime", "datetime.datetime", {"from datetime import datetime"}),
        builtin("uuid.UUID", "uuid.UUID", {"import uuid"}),
        builtin("Path", "pathlib.Path", {"from pathlib import Path"}),
        builtin("List[dict]", "List[builtins.dict]", {"from typing import List"}),
        builtin("Template", "jinja2.Template", {"from jinja2 import Template"}),
        builtin("Optional[Response]", "Optional[flask.Response]",
                {"from typing import Optional", "from flask import Response"}),
        builtin("logging.Logger", "logging.Logger", {"import logging"}),
        builtin("SimpleCookie", "http.cookies.SimpleCookie", {"from http.cookies import SimpleCookie"}),
    };
    static const std::vector<TypeDef> cal = {
        builtin("np.ndarray", "numpy.ndarray", {"import numpy as np"}),
        builtin("pd.DataFrame", "pandas.DataFrame", {"import pandas as pd"}),
        builtin("List[float]", "List[builtins.float]", {"from typing import List"}),
        builtin("torch.Tensor", "torch.Tensor", {"import torch"}),
        builtin("Tuple[float, float]", "Tuple[builtins.float, builtins.float]", {"from typing import Tuple"}),
        builtin("pd.Series", "pandas.Series", {"import pandas as pd"}),
        builtin("Dict[str, float]", "Dict[builtins.str, builtins.float]", {"from typing import Dict"}),
        builtin("complex", "builtins.complex"),
        builtin("np.float64", "numpy.float64", {"import numpy as np"}),
        builtin("Optional[float]", "Optional[builtins.float]", {"from typing import Optional"}),
        builtin("csr_matrix", "scipy.sparse.csr_matrix", {"from scipy.sparse import csr_matrix"}),
        builtin("Fraction", "fractions.Fraction", {"from fractions import Fraction"}),
    };
    return domain == 0 ? web : cal;
}

inline TypeDef rare_type(const std::string& module, const std::string& stem, std::size_t j) {
    const std::string name = stem + std::to_string(j);
    return {name, module + "." + name, {"from " + module + " import " + name}};
}

struct Vocabulary {
    // [0] shared pool, [1] web, [2] cal
    std::vector<std::string> names[3];
    std::vector<std::string> calls[3];
};

class WordMaker {
public:
    explicit WordMaker(Rng& rng) : rng_(rng) {}

    std::string make() {
        static const char* onset[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br",
                                      "tr", "gl", "st", "pl", "kr"};
        static const char* vowel[] = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
        static const char* coda[] = {"", "", "", "n", "r", "l", "s", "m", "x", "nd"};
        for (;;) {
            std::string w;
            const auto syll = 2 + uniform_index(rng_, 2);
            for (std::uint64_t i = 0; i < syll; ++i) {
                w += onset[uniform_index(rng_, std::size(onset))];
                w += vowel[uniform_index(rng_, std::size(vowel))];
            }
            w += coda[uniform_index(rng_, std::size(coda))];
            if (used_.insert(w).second) return w;
        }
    }

    std::vector<std::string> make(std::size_t n) {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < n; ++i) out.push_back(make());
        return out;
    }

private:
    Rng& rng_;
    std::set<std::string> used_;
};

inline const std::vector<std::string>& generic_names() {
    static const std::vector<std::string> v = {"value", "data", "item", "obj", "result", "arg", "val", "thing"};
    return v;
}

inline const std::vector<std::string>& generic_calls() {
    static const std::vector<std::string> v = {"process", "handle", "convert", "wrap", "check", "load"};
    return v;
}

struct Slot {
    std::size_t type;  // index into the domain's type list
};

struct Param {
    std::string name;
    std::size_t type;
};

struct Function {
    std::string name;
    std::vector<Param> params;
    std::size_t ret;
    std::optional<Param> var;
};

class DomainWriter {
public:
    DomainWriter(const FixtureSpec& spec, std::size_t domain, std::vector<TypeDef> types,
                 std::vector<Vocabulary> vocab, std::vector<bool> shared, std::vector<std::string> prefixes, Rng& rng)
        : spec_(spec), domain_(domain), types_(std::move(types)), vocab_(std::move(vocab)), shared_(std::move(shared)),
          prefixes_(std::move(prefixes)), rng_(rng) {}

    const std::vector<TypeDef>& types() const { return types_; }

    std::string pick(const std::vector<std::string>& v) { return v[uniform_index(rng_, v.size())]; }

    // Pool selection: generic with `noise`, else own pool with `covariate_shift`
    // (always for types only this domain has), else the shared pool.
    std::string word(std::size_t type, bool call) {
        const auto& voc = vocab_[type];
        if (uniform01(rng_) < spec_.noise) return pick(call ? generic_calls() : generic_names());
        const bool own = !shared_[type] || uniform01(rng_) < spec_.covariate_shift;
        const auto& pool = call ? voc.calls[own ? 1 + domain_ : 0] : voc.names[own ? 1 + domain_ : 0];
        return pick(pool);
    }

    std::string name_for(std::size_t type, std::set<std::string>& taken) {
        for (int attempt = 0;; ++attempt) {
            std::string n = word(type, false);
            if (uniform01(rng_) < 0.3) n = pick(prefixes_) + "_" + n;
            if (attempt > 4) n += std::to_string(attempt);
            if (taken.insert(n).second) return n;
        }
    }

    std::string render_function(const Function& f, bool method, const std::string& indent) {
        std::string sig = indent + "def " + f.name + "(";
        std::vector<std::string> ps;
        if (method) ps.push_back("self");
        for (const auto& p : f.params) ps.push_back(p.name + ": " + types_[p.type].annotation);
        for (std::size_t i = 0; i < ps.size(); ++i) sig += (i ? ", " : "") + ps[i];
        sig += ") -> " + types_[f.ret].annotation + ":\n";
        const std::string body = indent + "    ";
        std::string out = sig;
        std::vector<std::string> locals;
        for (std::size_t i = 0; i < f.params.size(); ++i) {
            const std::string loc = "r" + std::to_string(i);
            out += body + loc + " = " + word(f.params[i].type, true) + "(" + f.params[i].name + ")\n";
            locals.push_back(loc);
        }
        std::string last = locals.back();
        if (f.var) {
            out += body + f.var->name + ": " + types_[f.var->type].annotation + " = " + word(f.var->type, true) +
                   "(" + last + ")\n";
            last = f.var->name;
        }
        out += body + "return " + word(f.ret, true) + "(" + last + ")\n";
        return out;
    }

    // Writes one file from the front of `slots`; returns the slots consumed.
    std::string render_file(std::vector<std::size_t>& slots, std::size_t& next, std::size_t budget) {
        std::vector<Function> funcs;
        std::set<std::string> used_types;
        std::set<std::string> fnames;
        const std::size_t end = std::min(slots.size(), next + budget);
        while (next < end) {
            Function f;
            std::set<std::string> taken{"self", "r0", "r1", "r2"};
            const auto n_params = 1 + uniform_index(rng_, 3);
            for (std::uint64_t i = 0; i < n_params && next < end; ++i) {
                const auto t = slots[next++];
                f.params.push_back({name_for(t, taken), t});
            }
            if (next >= end) {
                // A function needs a return slot; reuse the last parameter's type
                // only when no slot remains at all.
                if (next >= slots.size()) {
                    f.ret = f.params.back().type;
                    f.params.pop_back();
                    if (f.params.empty()) break;
                } else {
                    f.ret = slots[next++];
                }
            } else {
                f.ret = slots[next++];
            }
            if (next < end && uniform01(rng_) < 0.3) {
                const auto t = slots[next++];
                f.var = Param{name_for(t, taken), t};
            }
            for (;;) {
                const std::string verb = pick(prefixes_);
                std::string fn = verb + "_" + word(f.ret, false);
                if (fnames.insert(fn).second) {
                    f.name = fn;
                    break;
                }
                fn += std::to_string(fnames.size());
                if (fnames.insert(fn).second) {
                    f.name = fn;
                    break;
                }
            }
            for (const auto& p : f.params) used_types.insert(std::to_string(p.type));
            used_types.insert(std::to_string(f.ret));
            if (f.var) used_types.insert(std::to_string(f.var->type));
            funcs.push_back(std::move(f));
        }
        std::set<std::string> imports;
        for (const auto& f : funcs) {
            auto add = [&](std::size_t t) { imports.insert(types_[t].imports.begin(), types_[t].imports.end()); };
            for (const auto& p : f.params) add(p.type);
            add(f.ret);
            if (f.var) add(f.var->type);
        }
        // a distracting import or two
        for (int i = 0; i < 2; ++i) {
            const auto& extra = types_[uniform_index(rng_, types_.size())].imports;
            imports.insert(extra.begin(), extra.end());
        }
        std::string out;
        for (const auto& imp : imports) out += imp + "\n";
        out += "\n\n";
        const bool as_class = uniform_index(rng_, 2) == 0;
        if (as_class) {
            std::string cls = pick(prefixes_);
            cls[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(cls[0])));
            out += "class " + cls + "Handler:\n";
            for (const auto& f : funcs) out += render_function(f, true, "    ") + "\n";
        } else {
            for (const auto& f : funcs) out += render_function(f, false, "") + "\n\n";
        }
        return out;
    }

private:
    const FixtureSpec& spec_;
    std::size_t domain_;
    std::vector<TypeDef> types_;
    std::vector<Vocabulary> vocab_;
    std::vector<bool> shared_;
    std::vector<std::string> prefixes_;
    Rng& rng_;
};

inline corpus::RepoRef fixture_repo(const std::string& owner, const std::string& name, std::size_t stars,
                                    corpus::Domain domain) {
    corpus::RepoRef r;
    r.url = "https://github.com/" + owner + "/" + name;
    r.commit_hash = sha256_hex(r.url).substr(0, 40);
    r.stars = stars;
    r.frameworks = {corpus::Framework::TypeChecker};
    if (domain != corpus::Domain::Web) r.frameworks.insert(corpus::Framework::MarkerA);
    if (domain != corpus::Domain::Cal) r.frameworks.insert(corpus::Framework::MarkerB);
    r.domain = domain;
    return r;
}

}  // namespace detail

/// Writes `<root>/<domain>/<project>/...` snapshot trees and `<root>/<domain>.csv`
/// repo lists for the domains web and cal.
inline FixtureManifest generate_fixture(const FixtureSpec& spec, const std::filesystem::path& root) {
    using namespace detail;
    spec.validate();
    Rng rng(derive_seed(spec.seed, 0xF1C5));
    WordMaker words(rng);
    FixtureManifest man;

    const std::size_t n_shared_core = static_cast<std::size_t>(std::llround(spec.core_types * spec.shared_fraction));
    const std::size_t n_shared_rare = static_cast<std::size_t>(std::llround(spec.rare_tail * spec.shared_fraction));

    // Shared vocab for shared types, built once so both domains use the same pools.
    std::map<std::string, Vocabulary> vocab;
    auto vocab_of = [&](const std::string& label) -> Vocabulary& {
        auto [it, fresh] = vocab.try_emplace(label);
        if (fresh)
            for (int p = 0; p < 3; ++p) {
                it->second.names[p] = words.make(4);
                it->second.calls[p] = words.make(3);
            }
        return it->second;
    };

    std::vector<DomainWriter> writers;
    std::vector<std::vector<std::size_t>> quotas(2);
    for (std::size_t d = 0; d < 2; ++d) {
        std::vector<TypeDef> types;
        std::vector<bool> shared;
        // Interleave shared and own types through the ranks.
        std::size_t si = 0, oi = 0;
        for (std::size_t r = 0; r < spec.core_types; ++r) {
            const bool take_shared = si < n_shared_core && (oi >= spec.core_types - n_shared_core || r % 2 == 0);
            types.push_back(take_shared ? shared_core()[si++] : own_core(d)[oi++]);
            shared.push_back(take_shared);
            quotas[d].push_back(std::max(spec.min_common,
                                         static_cast<std::size_t>(std::llround(
                                             spec.head_quota * std::pow(static_cast<double>(r + 1), -spec.zipf_exponent)))));
        }
        for (std::size_t j = 0; j < spec.rare_tail; ++j) {
            const bool is_shared = j < n_shared_rare;
            types.push_back(is_shared ? rare_type("commonlib.kinds", "Kind", j)
                                      : rare_type(d == 0 ? "weblib.parts" : "callib.units", d == 0 ? "Part" : "Unit", j));
            shared.push_back(is_shared);
            quotas[d].push_back(std::max<std::size_t>(3, static_cast<std::size_t>(std::llround(
                                                             static_cast<double>(spec.rare_head) / static_cast<double>(j + 1)))));
        }
        std::vector<Vocabulary> v;
        for (const auto& t : types) v.push_back(vocab_of(t.label));
        writers.emplace_back(spec, d, std::move(types), std::move(v), std::move(shared), words.make(8), rng);
        for (std::size_t t = 0; t < writers.back().types().size(); ++t)
            man.quotas[kFixtureDomains[d]][writers.back().types()[t].label] += quotas[d][t];
    }
    for (const auto& [label, _] : man.quotas["web"])
        if (man.quotas["cal"].count(label)) man.shared_labels.insert(label);

    std::filesystem::remove_all(root);
    std::vector<std::vector<std::pair<std::string, std::string>>> written(2);  // (relative path, text)
    for (std::size_t d = 0; d < 2; ++d) {
        const auto dom = d == 0 ? corpus::Domain::Web : corpus::Domain::Cal;
        std::vector<std::size_t> slots;
        for (std::size_t t = 0; t < quotas[d].size(); ++t) slots.insert(slots.end(), quotas[d][t], t);
        shuffle(std::span<std::size_t>(slots), rng);
        const std::size_t n_files = spec.projects * spec.files_per_project;
        std::size_t next = 0;
        std::vector<std::string> project_dirs;
        for (std::size_t p = 0; p < spec.projects; ++p) {
            auto ref = fixture_repo(words.make(), words.make(), 10 + uniform_index(rng, 5000), dom);
            project_dirs.push_back(corpus::snapshot_dirname(ref));
            man.repos[kFixtureDomains[d]].push_back(std::move(ref));
        }
        const std::string pkg = d == 0 ? "app" : "calc";
        for (std::size_t f = 0; f < n_files; ++f) {
            const std::size_t remaining_files = n_files - f;
            const std::size_t budget = (slots.size() - next + remaining_files - 1) / remaining_files;
            const auto text = writers[d].render_file(slots, next, budget);
            const auto rel = project_dirs[f % spec.projects] + "/" + pkg + "/" + words.make() + ".py";
            written[d].emplace_back(rel, text);
        }
        for (std::size_t k = 0; k < spec.duplicate_files && !written[d].empty(); ++k) {
            const auto& [rel, text] = written[d][uniform_index(rng, n_files)];
            const auto proj = project_dirs[uniform_index(rng, spec.projects)];
            written[d].emplace_back(proj + "/" + pkg + "/copy_" + words.make() + ".py", text);
        }
    }
    // Helper modules over builtin types only, so copies never carry one
    // domain's own labels into the other.
    auto helper_module = [&] {
        std::string text = "from typing import List\n\n\n";
        for (int i = 0; i < 3; ++i) {
            const std::string n = words.make();
            text += "def get_" + n + "(" + n + "_count: int, " + n + "_name: str) -> List[str]:\n    return [" + n +
                    "_name] * " + n + "_count\n\n\n";
        }
        return text;
    };
    auto project_of = [](const std::string& rel) { return rel.substr(0, rel.find('/')); };
    for (std::size_t k = 0; k < spec.cross_duplicates; ++k) {
        const auto text = helper_module();
        const auto web = project_of(written[0][uniform_index(rng, written[0].size())].first);
        const auto cal = project_of(written[1][uniform_index(rng, written[1].size())].first);
        const auto name = words.make();
        written[0].emplace_back(web + "/app/util_" + name + ".py", text);
        written[1].emplace_back(cal + "/calc/vendor_" + name + ".py", text);
    }
    // Repositories listed by both domains, with one helper file each.
    for (std::size_t k = 0; k < spec.shared_repos; ++k) {
        auto ref = detail::fixture_repo(words.make(), words.make(), 10 + uniform_index(rng, 5000), corpus::Domain::Both);
        const auto text = helper_module();
        const auto rel = corpus::snapshot_dirname(ref) + "/shared/" + words.make() + ".py";
        for (std::size_t d = 0; d < 2; ++d) {
            written[d].emplace_back(rel, text);
            man.repos[kFixtureDomains[d]].push_back(ref);
        }
    }
    for (std::size_t d = 0; d < 2; ++d) {
        for (const auto& [rel, text] : written[d]) write_file(root / kFixtureDomains[d] / rel, text);
        man.files += written[d].size();
        corpus::export_repo_list(man.repos[kFixtureDomains[d]], root / (std::string(kFixtureDomains[d]) + ".csv"));
    }
    return man;
}

}  // namespace cdt::pipeline
