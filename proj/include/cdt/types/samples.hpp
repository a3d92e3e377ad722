// SPDX-License-Identifier: Apache-2.0
#pragma once

// Turns extracted module records into labelled prediction samples: one per
// annotated parameter, return, and variable slot whose label survives
// normalization.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdt/common/csv.hpp"
#include "cdt/common/error.hpp"
#include "cdt/common/files.hpp"
#include "cdt/common/strings.hpp"
#include "cdt/extract/dataset.hpp"
#include "cdt/extract/lexer.hpp"
#include "cdt/extract/records.hpp"
#include "cdt/types/label_space.hpp"
#include "cdt/types/normalizer.hpp"
#include "cdt/types/type_expr.hpp"

namespace cdt::types {

enum class SlotKind { Parameter, Return, Variable };

inline std::string_view to_string(SlotKind k) {
    switch (k) {
        case SlotKind::Parameter: return "param";
        case SlotKind::Return: return "return";
        case SlotKind::Variable: return "variable";
    }
    return "?";
}

inline SlotKind parse_slot_kind(std::string_view s) {
    if (s == "param") return SlotKind::Parameter;
    if (s == "return") return SlotKind::Return;
    if (s == "variable") return SlotKind::Variable;
    throw ParseError("unknown slot kind '" + std::string(s) + "'");
}

/// An annotated declaration before normalization.
struct Slot {
    SlotKind kind;
    std::string name;
    std::string annotation;
    std::vector<std::string> context;
};

struct TypeSample {
    SlotKind kind = SlotKind::Variable;
    std::string name;
    std::vector<std::string> identifier_tokens;
    std::vector<std::string> context_tokens;
    std::string label;
    std::string domain;
    std::string project;
    std::string file_path;
    std::optional<extract::Split> split;
    /// Normalized names visible in the sample's file (imports and classes).
    std::vector<std::string> source_types;

    bool operator==(const TypeSample&) const = default;
};

struct DropReport {
    std::map<std::string, std::size_t> by_reason;
    std::size_t emitted = 0;

    void add(const std::string& reason, std::size_t n = 1) { by_reason[reason] += n; }

    std::string to_csv() const {
        std::ostringstream os;
        csv::write_row(os, {"reason", "count"});
        csv::write_row(os, {"emitted", std::to_string(emitted)});
        for (const auto& [r, n] : by_reason) csv::write_row(os, {r, std::to_string(n)});
        return os.str();
    }
};

namespace detail {

inline std::string leaf_name(const std::string& name) {
    const auto dot = name.rfind('.');
    return dot == std::string::npos ? name : name.substr(dot + 1);
}

/// Windows of `width` tokens centred on each occurrence of `name`.
inline std::vector<std::string> windows_in(const std::vector<std::string>& seq, const std::string& name,
                                           std::size_t width) {
    std::vector<std::string> out;
    const std::size_t half = width / 2;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (seq[i] != name) continue;
        const std::size_t b = i >= half ? i - half : 0;
        const std::size_t e = std::min(seq.size(), i + half + 1);
        out.insert(out.end(), seq.begin() + static_cast<std::ptrdiff_t>(b), seq.begin() + static_cast<std::ptrdiff_t>(e));
    }
    return out;
}

inline std::vector<std::string> expr_tokens(const std::string& expr) {
    std::vector<std::string> out;
    try {
        for (const auto& t : extract::tokenize(expr)) {
            switch (t.kind) {
                case extract::TokKind::String: out.emplace_back(extract::kStrPlaceholder); break;
                case extract::TokKind::Number: out.emplace_back(extract::kNumPlaceholder); break;
                case extract::TokKind::Name:
                case extract::TokKind::Op: out.push_back(t.text); break;
                default: break;
            }
        }
    } catch (const extract::SyntaxError&) {
        return extract::identifiers_fallback(expr);
    }
    return out;
}

inline std::string relative_module_path(const std::string& file_path) {
    const auto slash = file_path.find('/');
    return extract::module_path(slash == std::string::npos ? file_path : file_path.substr(slash + 1));
}

}  // namespace detail

/// Qualification context of a record: its imports, with the module path
/// taken relative to the project directory.
inline QualifyContext context_of(const extract::ModuleRecord& m) {
    return QualifyContext(m.imports, detail::relative_module_path(m.file_path));
}

/// Every annotated slot of a record, skipping trivial functions. The number
/// of slots removed because of trivial functions is added to `trivial`.
inline std::vector<Slot> annotated_slots(const extract::ModuleRecord& m, const Normalizer& norm,
                                         std::size_t window = 7, std::size_t* trivial = nullptr) {
    std::vector<Slot> out;
    auto variables = [&](const extract::AnnotationMap& vars) {
        for (const auto& [name, ann] : vars) {
            if (ann.empty()) continue;
            out.push_back({SlotKind::Variable, name, ann, detail::windows_in(m.untyped_seq, detail::leaf_name(name), window)});
        }
    };
    auto function = [&](const extract::FunctionRecord& f) {
        if (norm.is_trivial_function(f.name)) {
            if (trivial) {
                std::size_t n = f.ret_type.empty() ? 0 : 1;
                for (const auto& [_, a] : f.params) n += !a.empty();
                for (const auto& [_, a] : f.variables) n += !a.empty();
                *trivial += n;
            }
            return;
        }
        for (const auto& p : f.param_order) {
            const auto& ann = f.params.at(p);
            if (ann.empty()) continue;
            std::vector<std::string> ctx;
            if (auto it = f.params_occur.find(p); it != f.params_occur.end())
                for (const auto& w : it->second) ctx.insert(ctx.end(), w.begin(), w.end());
            out.push_back({SlotKind::Parameter, p, ann, std::move(ctx)});
        }
        if (!f.ret_type.empty()) {
            std::vector<std::string> ctx;
            for (const auto& e : f.ret_exprs) {
                auto t = detail::expr_tokens(e);
                ctx.insert(ctx.end(), t.begin(), t.end());
            }
            out.push_back({SlotKind::Return, f.name, f.ret_type, std::move(ctx)});
        }
        variables(f.variables);
    };
    variables(m.variables);
    for (const auto& c : m.classes) {
        variables(c.variables);
        for (const auto& f : c.funcs) function(f);
    }
    for (const auto& f : m.funcs) function(f);
    return out;
}

/// Normalized names a file makes visible: imported names and its classes.
inline std::vector<std::string> visible_source_types(const extract::ModuleRecord& m, const Normalizer& norm) {
    const auto ctx = context_of(m);
    std::set<std::string> out;
    auto add = [&](const std::string& name) {
        try {
            if (auto s = norm.normalize(parse_type(name), ctx)) out.insert(*s);
        } catch (const ParseError&) {
        }
    };
    for (const auto& imp : m.imports) {
        const auto as = imp.find(" as ");
        const std::string local = as == std::string::npos ? detail::leaf_name(imp) : imp.substr(as + 4);
        if (!local.empty() && imp.front() != '.') add(local);
    }
    for (const auto& c : m.classes) add(c.name);
    return {out.begin(), out.end()};
}

/// Normalizes every annotated slot of every record into samples.
inline std::vector<TypeSample> build_samples(const std::vector<extract::ModuleRecord>& records, const Normalizer& norm,
                                             const std::string& domain, DropReport* report = nullptr,
                                             std::size_t window = 7) {
    std::vector<TypeSample> out;
    DropReport local;
    DropReport& rep = report ? *report : local;
    for (const auto& m : records) {
        const auto ctx = context_of(m);
        const auto visible = visible_source_types(m, norm);
        std::size_t trivial = 0;
        const auto slots = annotated_slots(m, norm, window, &trivial);
        if (trivial) rep.add("trivial_function", trivial);
        const auto slash = m.file_path.find('/');
        const std::string project = slash == std::string::npos ? std::string() : m.file_path.substr(0, slash);
        for (const auto& s : slots) {
            std::optional<std::string> label;
            try {
                label = norm.normalize(parse_type(s.annotation), ctx);
            } catch (const ParseError&) {
                rep.add("parse_error");
                continue;
            }
            if (!label) {
                rep.add("any_or_none");
                continue;
            }
            TypeSample t;
            t.kind = s.kind;
            t.name = s.name;
            t.identifier_tokens = subtokenize(detail::leaf_name(s.name) == "return" ? s.name : detail::leaf_name(s.name));
            t.context_tokens = s.context;
            t.label = std::move(*label);
            t.domain = domain;
            t.project = project;
            t.file_path = m.file_path;
            t.split = m.set;
            t.source_types = visible;
            out.push_back(std::move(t));
            ++rep.emitted;
        }
    }
    return out;
}

template <typename Pred>
std::vector<TypeSample> filter_samples(const std::vector<TypeSample>& in, Pred pred) {
    std::vector<TypeSample> out;
    std::copy_if(in.begin(), in.end(), std::back_inserter(out), pred);
    return out;
}

inline std::vector<TypeSample> of_split(const std::vector<TypeSample>& in, extract::Split s) {
    return filter_samples(in, [s](const TypeSample& t) { return t.split == s; });
}

inline LabelSpace label_space_of(const std::vector<TypeSample>& samples, std::size_t threshold = kCommonThreshold) {
    std::vector<std::string> labels;
    labels.reserve(samples.size());
    for (const auto& s : samples) labels.push_back(s.label);
    return build_label_space(labels, threshold);
}

inline nlohmann::ordered_json to_json(const TypeSample& s) {
    return {{"kind", std::string(to_string(s.kind))},
            {"name", s.name},
            {"identifier_tokens", s.identifier_tokens},
            {"context_tokens", s.context_tokens},
            {"label", s.label},
            {"domain", s.domain},
            {"project", s.project},
            {"file_path", s.file_path},
            {"set", s.split ? nlohmann::ordered_json(std::string(extract::to_string(*s.split)))
                            : nlohmann::ordered_json(nullptr)},
            {"source_types", s.source_types}};
}

inline TypeSample sample_from_json(const nlohmann::ordered_json& j) {
    TypeSample s;
    s.kind = parse_slot_kind(j.at("kind").get<std::string>());
    s.name = j.at("name").get<std::string>();
    s.identifier_tokens = j.at("identifier_tokens").get<std::vector<std::string>>();
    s.context_tokens = j.at("context_tokens").get<std::vector<std::string>>();
    s.label = j.at("label").get<std::string>();
    s.domain = j.at("domain").get<std::string>();
    s.project = j.at("project").get<std::string>();
    s.file_path = j.at("file_path").get<std::string>();
    if (!j.at("set").is_null()) s.split = extract::parse_split(j.at("set").get<std::string>());
    s.source_types = j.at("source_types").get<std::vector<std::string>>();
    return s;
}

inline std::string format_samples(const std::vector<TypeSample>& samples) {
    std::string out;
    for (const auto& s : samples) {
        out += to_json(s).dump();
        out += '\n';
    }
    return out;
}

inline void write_samples(const std::vector<TypeSample>& samples, const std::filesystem::path& path) {
    write_file(path, format_samples(samples));
}

inline std::vector<TypeSample> read_samples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open samples " + path.string());
    std::vector<TypeSample> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            out.push_back(sample_from_json(nlohmann::ordered_json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("sample record: ") + e.what(), n);
        }
    }
    return out;
}

}  // namespace cdt::types
