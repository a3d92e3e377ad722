// SPDX-License-Identifier: Apache-2.0
#pragma once

// Structural extraction of one source module into a ModuleRecord.
//
// The extractor works on logical lines produced by the tokenizer and tracks
// def/class scopes by indentation. It is not a full parser: it recognises
// imports, def/class headers, annotated assignments, return statements and
// docstrings, which is all the record schema needs. Annotation text is kept
// verbatim (whitespace collapsed); normalization happens downstream.

#include <algorithm>
#include <deque>
#include <functional>
#include <unordered_set>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdt/common/strings.hpp"
#include "cdt/extract/lexer.hpp"
#include "cdt/extract/records.hpp"

namespace cdt::extract {

struct ExtractOptions {
    /// Tokens per usage window, centred on the parameter occurrence.
    std::size_t occur_window = 7;
};

inline constexpr std::string_view kStrPlaceholder = "<str>";
inline constexpr std::string_view kNumPlaceholder = "<num>";
inline constexpr std::string_view kNoType = "0";

namespace detail {

using TokRange = std::vector<const Token*>;

struct Line {
    std::size_t depth = 0;
    TokRange toks;
};

inline std::vector<Line> logical_lines(const std::vector<Token>& toks) {
    std::vector<Line> lines;
    std::size_t depth = 0;
    Line cur;
    for (const auto& t : toks) {
        switch (t.kind) {
            case TokKind::Indent: ++depth; break;
            case TokKind::Dedent: --depth; break;
            case TokKind::Newline:
                if (!cur.toks.empty()) lines.push_back(std::move(cur));
                cur = Line{};
                break;
            case TokKind::End: break;
            default:
                if (cur.toks.empty()) cur.depth = depth;
                cur.toks.push_back(&t);
        }
    }
    if (!cur.toks.empty()) lines.push_back(std::move(cur));
    return lines;
}

inline bool opens(const Token* t) { return t->is_op("(") || t->is_op("[") || t->is_op("{"); }
inline bool closes(const Token* t) { return t->is_op(")") || t->is_op("]") || t->is_op("}"); }

/// Index of the first `op` at bracket depth zero in [from, to), or npos.
inline std::size_t find_top(const TokRange& r, std::string_view op, std::size_t from = 0,
                            std::size_t to = std::string::npos) {
    int depth = 0;
    to = std::min(to, r.size());
    for (std::size_t i = from; i < to; ++i) {
        if (opens(r[i])) ++depth;
        else if (closes(r[i])) --depth;
        else if (depth == 0 && r[i]->is_op(op)) return i;
    }
    return std::string::npos;
}

inline std::size_t matching_close(const TokRange& r, std::size_t open) {
    int depth = 0;
    for (std::size_t i = open; i < r.size(); ++i) {
        if (opens(r[i])) ++depth;
        else if (closes(r[i]) && --depth == 0) return i;
    }
    return std::string::npos;
}

inline std::string source_text(std::string_view src, const TokRange& r, std::size_t b, std::size_t e) {
    if (b >= e) return {};
    return collapse_whitespace(src.substr(r[b]->begin, r[e - 1]->end - r[b]->begin));
}

inline std::string untyped_token(const Token* t) {
    if (t->kind == TokKind::String) return std::string(kStrPlaceholder);
    if (t->kind == TokKind::Number) return std::string(kNumPlaceholder);
    return t->text;
}

inline std::string string_body(std::string_view lit) {
    std::size_t p = 0;
    while (p < lit.size() && std::isalpha(static_cast<unsigned char>(lit[p]))) ++p;
    lit.remove_prefix(p);
    const bool triple = lit.size() >= 6 && lit[0] == lit[1] && lit[1] == lit[2];
    const std::size_t q = triple ? 3 : 1;
    if (lit.size() < 2 * q) return {};
    return std::string(lit.substr(q, lit.size() - 2 * q));
}

inline Docstring parse_docstring(const std::string& text) {
    Docstring d;
    std::vector<std::string> lines;
    for (const auto& l : split(text, '\n')) lines.emplace_back(trim(l));
    std::size_t i = 0;
    while (i < lines.size() && lines[i].empty()) ++i;
    if (i == lines.size()) return d;
    d.func = lines[i++];

    std::vector<std::string> long_lines, ret_lines;
    bool in_returns = false;
    for (; i < lines.size(); ++i) {
        const auto& l = lines[i];
        if (l == "Returns:" || l == "Return:") {
            in_returns = true;
            continue;
        }
        if (l.starts_with(":return:") || l.starts_with(":returns:")) {
            ret_lines.emplace_back(trim(std::string_view(l).substr(l.find(':', 1) + 1)));
            continue;
        }
        if (in_returns) {
            if (l.empty()) {
                in_returns = false;
                continue;
            }
            ret_lines.push_back(l);
        } else {
            long_lines.push_back(l);
        }
    }
    const auto long_text = std::string(trim(join(long_lines, "\n")));
    if (!long_text.empty()) d.long_descr = long_text;
    if (!ret_lines.empty()) d.ret = join(ret_lines, " ");
    return d;
}

inline bool is_simple_target(const TokRange& r, std::size_t end) {
    if (end == 0 || r[0]->kind != TokKind::Name || is_keyword(r[0]->text)) return false;
    for (std::size_t i = 1; i < end; ++i) {
        const Token* t = r[i];
        if (t->is_op(".")) {
            if (i + 1 >= end || r[i + 1]->kind != TokKind::Name) return false;
            ++i;
        } else if (t->is_op("[")) {
            const auto close = matching_close(r, i);
            if (close == std::string::npos || close >= end) return false;
            i = close;
        } else {
            return false;
        }
    }
    return true;
}

struct Param {
    std::string name;
    std::string annotation;
    std::size_t name_index;
    std::size_t ann_begin = 0, ann_end = 0;  // token range to drop from untyped_seq
};

}  // namespace detail

/// Parses `source` (the module at `file_path`) into a record. Throws
/// SyntaxError for input outside the supported grammar.
inline ModuleRecord extract_module(const std::string& file_path, std::string_view source,
                                   const ExtractOptions& opts = {}) {
    using namespace detail;
    const auto tokens = tokenize(source);
    const auto lines = logical_lines(tokens);

    ModuleRecord mod;
    mod.file_path = file_path;

    std::deque<FunctionRecord> funcs;    // storage with stable addresses
    std::deque<ClassRecord> classes;
    std::vector<std::vector<std::size_t>> class_funcs;  // per class: indices into funcs
    std::vector<std::size_t> module_funcs;
    std::map<std::size_t, std::vector<std::string>> bodies;  // function index -> untyped body tokens

    enum class Kind { Module, Class, Function, Nested };
    struct Scope {
        Kind kind;
        long header_depth;
        std::size_t cls = 0;        // Class: index into classes
        std::size_t fn = 0;         // Function/Nested: owning top-level function record
        std::string prefix;         // Nested: key prefix inside the owner's variables
        bool expect_doc = false;
        std::string class_path;     // Class: dotted name
    };
    std::vector<Scope> scopes{{Kind::Module, -1, 0, 0, {}, false, {}}};
    bool pending_staticmethod = false;

    auto emit_line = [&](std::vector<std::string> untyped, std::vector<std::string> typed) {
        for (const auto& s : scopes)
            if (s.kind == Kind::Function) {
                auto& body = bodies[s.fn];
                body.insert(body.end(), untyped.begin(), untyped.end());
                break;
            }
        mod.untyped_seq.insert(mod.untyped_seq.end(), untyped.begin(), untyped.end());
        mod.typed_seq.insert(mod.typed_seq.end(), typed.begin(), typed.end());
    };

    auto emit_plain = [&](const TokRange& r, std::size_t b, std::size_t e) {
        std::vector<std::string> u;
        for (std::size_t i = b; i < e; ++i) u.push_back(untyped_token(r[i]));
        emit_line(u, std::vector<std::string>(u.size(), std::string(kNoType)));
    };

    auto record_variable = [&](const std::string& name, const std::string& ann) {
        const Scope& s = scopes.back();
        switch (s.kind) {
            case Kind::Module: mod.variables[name] = ann; break;
            case Kind::Class: classes[s.cls].variables[name] = ann; break;
            case Kind::Function: funcs[s.fn].variables[name] = ann; break;
            case Kind::Nested: funcs[s.fn].variables[s.prefix + name] = ann; break;
        }
    };

    // Processes one logical line; compound headers with inline bodies recurse.
    std::function<void(const Line&)> process = [&](const Line& line) {
        const TokRange& r = line.toks;
        const long depth = static_cast<long>(line.depth);
        while (scopes.size() > 1 && depth <= scopes.back().header_depth) scopes.pop_back();
        Scope& scope = scopes.back();

        // Docstring: a line made only of string literals, first in its body.
        if (scope.kind != Kind::Module) {
            const bool slot = scope.expect_doc;
            scope.expect_doc = false;
            const bool only_strings = std::all_of(r.begin(), r.end(), [](const Token* t) {
                return t->kind == TokKind::String;
            });
            if (slot && only_strings && scope.kind == Kind::Function) {
                std::string text;
                for (const auto* t : r) text += string_body(t->text);
                funcs[scope.fn].docstring = parse_docstring(text);
            }
        }

        const Token* first = r[0];

        // Legacy-grammar statements.
        if ((first->is_name("print") || first->is_name("exec")) && r.size() > 1 &&
            (r[1]->kind == TokKind::String || r[1]->kind == TokKind::Number ||
             (r[1]->kind == TokKind::Name && !is_keyword(r[1]->text)) || r[1]->is_op(">>")))
            throw SyntaxError("legacy '" + first->text + "' statement", first->line);
        if ((first->is_name("except") || first->is_name("raise")) &&
            find_top(r, ",", 1, find_top(r, ":")) != std::string::npos &&
            std::none_of(r.begin(), r.end(), [](const Token* t) { return t->is_name("as"); }))
            throw SyntaxError("legacy '" + first->text + "' form with a comma", first->line);

        if (first->is_op("@")) {
            if (r.size() >= 2 && r[1]->is_name("staticmethod")) pending_staticmethod = true;
            emit_plain(r, 0, r.size());
            return;
        }

        // Imports.
        if (first->is_name("import")) {
            std::size_t i = 1;
            while (i < r.size()) {
                std::string name;
                while (i < r.size() && !r[i]->is_op(",") && !r[i]->is_name("as")) name += r[i++]->text;
                if (i < r.size() && r[i]->is_name("as")) {
                    name += " as " + (i + 1 < r.size() ? r[i + 1]->text : std::string());
                    i += 2;
                }
                if (!name.empty()) mod.imports.push_back(name);
                ++i;
            }
            emit_plain(r, 0, r.size());
            return;
        }
        if (first->is_name("from")) {
            std::size_t i = 1;
            std::string base;
            while (i < r.size() && !r[i]->is_name("import")) base += r[i++]->text;
            ++i;
            while (i < r.size()) {
                if (r[i]->is_op("(") || r[i]->is_op(")") || r[i]->is_op(",")) {
                    ++i;
                    continue;
                }
                std::string name = r[i]->text;
                std::string full = base.empty() ? name : (base.back() == '.' ? base + name : base + "." + name);
                if (name == "*") full = base + ".*";
                ++i;
                if (i < r.size() && r[i]->is_name("as")) {
                    if (i + 1 < r.size()) full += " as " + r[i + 1]->text;
                    i += 2;
                }
                mod.imports.push_back(full);
            }
            emit_plain(r, 0, r.size());
            return;
        }

        // def / async def
        const std::size_t def_at = first->is_name("async") && r.size() > 1 ? 1 : 0;
        if (r[def_at]->is_name("def")) {
            if (def_at + 2 >= r.size() || r[def_at + 1]->kind != TokKind::Name || !r[def_at + 2]->is_op("("))
                throw SyntaxError("malformed def header", first->line);
            const std::string name = r[def_at + 1]->text;
            const std::size_t open = def_at + 2;
            const std::size_t close = matching_close(r, open);
            if (close == std::string::npos) throw SyntaxError("malformed parameter list", first->line);

            std::vector<Param> params;
            for (std::size_t b = open + 1; b < close;) {
                std::size_t e = find_top(r, ",", b, close);
                if (e == std::string::npos) e = close;
                std::size_t p = b;
                while (p < e && (r[p]->is_op("*") || r[p]->is_op("**"))) ++p;
                if (p < e && r[p]->kind == TokKind::Name) {
                    Param prm{r[p]->text, "", p};
                    if (p + 1 < e && r[p + 1]->is_op(":")) {
                        std::size_t ae = find_top(r, "=", p + 2, e);
                        if (ae == std::string::npos) ae = e;
                        prm.annotation = source_text(source, r, p + 2, ae);
                        prm.ann_begin = p + 1;
                        prm.ann_end = ae;
                    }
                    params.push_back(std::move(prm));
                }
                b = e + 1;
            }
            std::string ret_type;
            std::size_t ret_b = 0, ret_e = 0;
            std::size_t colon = find_top(r, ":", close + 1);
            if (colon == std::string::npos) throw SyntaxError("def header without ':'", first->line);
            if (close + 1 < r.size() && r[close + 1]->is_op("->")) {
                ret_type = source_text(source, r, close + 2, colon);
                ret_b = close + 1;
                ret_e = colon;
            }

            const bool in_class = scope.kind == Kind::Class;
            if (in_class && !pending_staticmethod && !params.empty() && params.front().annotation.empty() &&
                (params.front().name == "self" || params.front().name == "cls"))
                params.erase(params.begin());
            pending_staticmethod = false;

            // Untyped/typed output for the header, annotations removed.
            std::vector<std::string> u, ty;
            for (std::size_t i = 0; i <= colon; ++i) {
                bool skip = ret_b && i >= ret_b && i < ret_e;
                for (const auto& p : params)
                    if (p.ann_end && i >= p.ann_begin && i < p.ann_end) skip = true;
                if (skip) continue;
                u.push_back(untyped_token(r[i]));
                std::string tag(kNoType);
                if (i == def_at + 1 && !ret_type.empty()) tag = ret_type;
                for (const auto& p : params)
                    if (p.name_index == i && !p.annotation.empty()) tag = p.annotation;
                ty.push_back(tag);
            }

            if (scope.kind == Kind::Function || scope.kind == Kind::Nested) {
                const std::size_t owner = scope.fn;
                const std::string prefix = scope.prefix + name + ".";
                emit_line(u, ty);
                for (const auto& p : params) funcs[owner].variables[prefix + p.name] = p.annotation;
                if (!ret_type.empty()) funcs[owner].variables[prefix + "return"] = ret_type;
                scopes.push_back({Kind::Nested, depth, 0, owner, prefix, false, {}});
            } else {
                FunctionRecord f;
                f.name = name;
                for (const auto& p : params) {
                    f.params[p.name] = p.annotation;
                    f.param_order.push_back(p.name);
                }
                f.ret_type = ret_type;
                funcs.push_back(std::move(f));
                const std::size_t idx = funcs.size() - 1;
                if (in_class) class_funcs[scope.cls].push_back(idx);
                else module_funcs.push_back(idx);
                emit_line(u, ty);
                bodies[idx];
                scopes.push_back({Kind::Function, depth, 0, idx, {}, true, {}});
            }
            if (colon + 1 < r.size()) {
                Line inline_body{line.depth + 1, TokRange(r.begin() + static_cast<long>(colon) + 1, r.end())};
                process(inline_body);
            }
            return;
        }

        if (first->is_name("class")) {
            if (r.size() < 3 || r[1]->kind != TokKind::Name)
                throw SyntaxError("malformed class header", first->line);
            const std::size_t colon = find_top(r, ":", 2);
            if (colon == std::string::npos) throw SyntaxError("class header without ':'", first->line);
            emit_plain(r, 0, colon + 1);
            const std::string name = r[1]->text;
            if (scope.kind == Kind::Function || scope.kind == Kind::Nested) {
                scopes.push_back({Kind::Nested, depth, 0, scope.fn, scope.prefix + name + ".", false, {}});
            } else {
                const std::string path = scope.kind == Kind::Class ? scope.class_path + "." + name : name;
                classes.push_back(ClassRecord{path, {}, {}});
                class_funcs.emplace_back();
                scopes.push_back({Kind::Class, depth, classes.size() - 1, 0, {}, true, path});
            }
            if (colon + 1 < r.size()) {
                Line inline_body{line.depth + 1, TokRange(r.begin() + static_cast<long>(colon) + 1, r.end())};
                process(inline_body);
            }
            return;
        }

        // return statements belong to the innermost top-level function.
        if (first->is_name("return")) {
            if (scope.kind == Kind::Function && r.size() > 1)
                funcs[scope.fn].ret_exprs.push_back(source_text(source, r, 1, r.size()));
            emit_plain(r, 0, r.size());
            return;
        }

        // Other compound headers with an inline body.
        static const std::unordered_set<std::string_view> kCompound = {
            "if", "elif", "else", "for", "while", "with", "try", "except", "finally", "async"};
        if (first->kind == TokKind::Name && kCompound.count(first->text)) {
            const std::size_t colon = find_top(r, ":");
            if (colon != std::string::npos && colon + 1 < r.size()) {
                emit_plain(r, 0, colon + 1);
                Line inline_body{line.depth + 1, TokRange(r.begin() + static_cast<long>(colon) + 1, r.end())};
                process(inline_body);
                return;
            }
            emit_plain(r, 0, r.size());
            return;
        }

        // Annotated assignment: target ':' annotation ['=' value]
        const std::size_t colon = find_top(r, ":");
        if (colon != std::string::npos && is_simple_target(r, colon)) {
            std::size_t eq = find_top(r, "=", colon + 1);
            const std::size_t ann_end = eq == std::string::npos ? r.size() : eq;
            const std::string ann = source_text(source, r, colon + 1, ann_end);
            const std::string target = source_text(source, r, 0, colon);
            record_variable(target, ann);
            std::vector<std::string> u, ty;
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i >= colon && i < ann_end) continue;
                u.push_back(untyped_token(r[i]));
                ty.push_back(i + 1 == colon ? ann : std::string(kNoType));
            }
            emit_line(u, ty);
            return;
        }

        emit_plain(r, 0, r.size());
    };

    for (const auto& line : lines) process(line);

    // Usage windows around each parameter occurrence in the function body.
    const std::size_t half = opts.occur_window / 2;
    for (auto& [idx, body] : bodies) {
        FunctionRecord& f = funcs[idx];
        for (const auto& p : f.param_order) {
            auto& windows = f.params_occur[p];
            for (std::size_t i = 0; i < body.size(); ++i) {
                if (body[i] != p) continue;
                const std::size_t b = i >= half ? i - half : 0;
                const std::size_t e = std::min(body.size(), i + half + 1);
                windows.emplace_back(body.begin() + static_cast<long>(b), body.begin() + static_cast<long>(e));
            }
        }
    }

    for (std::size_t c = 0; c < classes.size(); ++c) {
        for (auto idx : class_funcs[c]) classes[c].funcs.push_back(std::move(funcs[idx]));
        mod.classes.push_back(std::move(classes[c]));
    }
    for (auto idx : module_funcs) mod.funcs.push_back(std::move(funcs[idx]));
    return mod;
}

}  // namespace cdt::extract
