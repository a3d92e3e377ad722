// SPDX-License-Identifier: Apache-2.0
#pragma once

// Per-module extraction records. Field names mirror the published dataset
// schema (author, repository, file_path, untyped_seq, typed_seq, imports,
// variables, classes, funcs, set; funcs carry name, params, ret_exprs,
// ret_type, variables, params_occur, docstring.{func,ret,long_descr}).

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace cdt::extract {

/// Annotation strings keyed by declared name; an empty string means the
/// declaration carried no annotation.
using AnnotationMap = std::map<std::string, std::string>;

enum class Split { Train, Valid, Test };

inline std::string_view to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Valid: return "valid";
        case Split::Test: return "test";
    }
    return "?";
}

inline Split parse_split(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "valid") return Split::Valid;
    if (s == "test") return Split::Test;
    throw ParseError("unknown split '" + std::string(s) + "'");
}

struct Docstring {
    std::optional<std::string> func;
    std::optional<std::string> ret;
    std::optional<std::string> long_descr;

    bool operator==(const Docstring&) const = default;
};

struct FunctionRecord {
    std::string name;
    AnnotationMap params;
    /// Declaration order of params (the map is ordered by name).
    std::vector<std::string> param_order;
    std::vector<std::string> ret_exprs;
    std::string ret_type;
    AnnotationMap variables;
    std::map<std::string, std::vector<std::vector<std::string>>> params_occur;
    Docstring docstring;

    bool operator==(const FunctionRecord&) const = default;
};

struct ClassRecord {
    std::string name;
    AnnotationMap variables;
    std::vector<FunctionRecord> funcs;

    bool operator==(const ClassRecord&) const = default;
};

struct ModuleRecord {
    std::string author;
    std::string repository;
    std::string file_path;
    std::vector<std::string> untyped_seq;
    std::vector<std::string> typed_seq;
    std::vector<std::string> imports;
    AnnotationMap variables;
    std::vector<ClassRecord> classes;
    std::vector<FunctionRecord> funcs;
    std::optional<Split> set;

    bool operator==(const ModuleRecord&) const = default;
};

namespace detail {

inline nlohmann::ordered_json opt(const std::optional<std::string>& s) {
    return s ? nlohmann::ordered_json(*s) : nlohmann::ordered_json(nullptr);
}

inline std::optional<std::string> opt_str(const nlohmann::ordered_json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<std::string>();
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const FunctionRecord& f) {
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& p : f.param_order) params[p] = f.params.at(p);
    return {{"name", f.name},
            {"params", params},
            {"ret_exprs", f.ret_exprs},
            {"ret_type", f.ret_type},
            {"variables", f.variables},
            {"params_occur", f.params_occur},
            {"docstring",
             {{"func", detail::opt(f.docstring.func)},
              {"ret", detail::opt(f.docstring.ret)},
              {"long_descr", detail::opt(f.docstring.long_descr)}}}};
}

inline FunctionRecord function_from_json(const nlohmann::ordered_json& j) {
    FunctionRecord f;
    f.name = j.at("name").get<std::string>();
    for (const auto& [k, v] : j.at("params").items()) {
        f.params[k] = v.get<std::string>();
        f.param_order.push_back(k);
    }
    f.ret_exprs = j.at("ret_exprs").get<std::vector<std::string>>();
    f.ret_type = j.at("ret_type").get<std::string>();
    f.variables = j.at("variables").get<AnnotationMap>();
    f.params_occur = j.at("params_occur").get<decltype(f.params_occur)>();
    const auto& d = j.at("docstring");
    f.docstring = {detail::opt_str(d, "func"), detail::opt_str(d, "ret"), detail::opt_str(d, "long_descr")};
    return f;
}

inline nlohmann::ordered_json to_json(const ModuleRecord& m) {
    nlohmann::ordered_json classes = nlohmann::ordered_json::array();
    for (const auto& c : m.classes) {
        nlohmann::ordered_json funcs = nlohmann::ordered_json::array();
        for (const auto& f : c.funcs) funcs.push_back(to_json(f));
        classes.push_back({{"name", c.name}, {"variables", c.variables}, {"funcs", funcs}});
    }
    nlohmann::ordered_json funcs = nlohmann::ordered_json::array();
    for (const auto& f : m.funcs) funcs.push_back(to_json(f));
    return {{"author", m.author},
            {"repository", m.repository},
            {"file_path", m.file_path},
            {"untyped_seq", m.untyped_seq},
            {"typed_seq", m.typed_seq},
            {"imports", m.imports},
            {"variables", m.variables},
            {"classes", classes},
            {"funcs", funcs},
            {"set", m.set ? nlohmann::ordered_json(std::string(to_string(*m.set))) : nlohmann::ordered_json(nullptr)}};
}

inline ModuleRecord module_from_json(const nlohmann::ordered_json& j) {
    ModuleRecord m;
    m.author = j.at("author").get<std::string>();
    m.repository = j.at("repository").get<std::string>();
    m.file_path = j.at("file_path").get<std::string>();
    m.untyped_seq = j.at("untyped_seq").get<std::vector<std::string>>();
    m.typed_seq = j.at("typed_seq").get<std::vector<std::string>>();
    m.imports = j.at("imports").get<std::vector<std::string>>();
    m.variables = j.at("variables").get<AnnotationMap>();
    for (const auto& c : j.at("classes")) {
        ClassRecord cr;
        cr.name = c.at("name").get<std::string>();
        cr.variables = c.at("variables").get<AnnotationMap>();
        for (const auto& f : c.at("funcs")) cr.funcs.push_back(function_from_json(f));
        m.classes.push_back(std::move(cr));
    }
    for (const auto& f : j.at("funcs")) m.funcs.push_back(function_from_json(f));
    if (j.contains("set") && !j["set"].is_null()) m.set = parse_split(j["set"].get<std::string>());
    return m;
}

}  // namespace cdt::extract
