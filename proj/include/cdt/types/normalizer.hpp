// SPDX-License-Identifier: Apache-2.0
#pragma once

// Label canonicalization, applied in order:
//   1. alias resolution on every head (`[]` -> List, list -> List, ...)
//   2. head qualification: generic names from the typing module stay bare,
//      builtins become `builtins.X`, imported names resolve through the
//      module's import list, other bare names are prefixed with the module
//      path; dotted names not rooted at an import keep their spelling
//   3. DROP when the top-level head is Any or None
//   4. depth cap: arguments deeper than `max_depth` levels become Any
//
// The cap leaves `Any` placeholders one level below the limit, so
// List[List[Set[int]]] becomes List[List[Any]].

#include <cctype>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "cdt/common/error.hpp"
#include "cdt/common/files.hpp"
#include "cdt/common/strings.hpp"
#include "cdt/types/type_expr.hpp"

namespace cdt::types {

struct NormalizerConfig {
    std::map<std::string, std::string> aliases = {
        {"[]", "List"},        {"list", "List"},     {"dict", "Dict"},   {"set", "Set"},
        {"tuple", "Tuple"},    {"frozenset", "FrozenSet"}, {"type", "Type"}, {"Text", "str"},
    };
    std::set<std::string> typing_names = {
        "Any", "AnyStr", "Awaitable", "Callable", "ClassVar", "Collection", "Container",
        "Coroutine", "DefaultDict", "Deque", "Dict", "Final", "FrozenSet", "Generator",
        "Generic", "Hashable", "IO", "Iterable", "Iterator", "List", "Literal", "Mapping",
        "MutableMapping", "MutableSequence", "MutableSet", "NamedTuple", "NoReturn", "Optional",
        "OrderedDict", "Pattern", "Match", "Sequence", "Set", "Sized", "Tuple", "Type",
        "TypeVar", "TypedDict", "Union", "AsyncIterator", "AsyncIterable", "AsyncGenerator",
        "ContextManager", "Counter", "ChainMap", "SupportsInt", "SupportsFloat", "BinaryIO", "TextIO"};
    std::set<std::string> builtins = {
        "int", "str", "float", "bool", "bytes", "complex", "object", "bytearray", "memoryview",
        "range", "slice", "BaseException", "Exception", "ValueError", "TypeError", "KeyError",
        "IndexError", "RuntimeError", "OSError", "IOError", "Ellipsis", "property", "staticmethod",
        "classmethod", "NotImplemented", "map", "filter", "zip", "enumerate", "reversed"};
    std::set<std::string> dropped = {"Any", "None"};
    std::set<std::string> trivial_functions = {
        "__len__", "__str__", "__repr__", "__eq__", "__ne__", "__lt__", "__le__", "__gt__",
        "__ge__", "__hash__", "__bool__", "__int__", "__float__", "__complex__", "__bytes__",
        "__format__", "__index__", "__sizeof__", "__contains__"};
    std::size_t max_depth = 2;

    static NormalizerConfig from_json(const nlohmann::json& j) {
        NormalizerConfig c;
        if (j.contains("aliases")) c.aliases = j["aliases"].get<decltype(c.aliases)>();
        if (j.contains("typing_names")) c.typing_names = j["typing_names"].get<decltype(c.typing_names)>();
        if (j.contains("builtins")) c.builtins = j["builtins"].get<decltype(c.builtins)>();
        if (j.contains("dropped")) c.dropped = j["dropped"].get<decltype(c.dropped)>();
        if (j.contains("trivial_functions"))
            c.trivial_functions = j["trivial_functions"].get<decltype(c.trivial_functions)>();
        if (j.contains("max_depth")) c.max_depth = j["max_depth"].get<std::size_t>();
        if (c.max_depth < 1) throw ConfigError("max_depth must be >= 1");
        return c;
    }

    nlohmann::json to_json() const {
        return {{"aliases", aliases},   {"typing_names", typing_names},
                {"builtins", builtins}, {"dropped", dropped},
                {"trivial_functions", trivial_functions}, {"max_depth", max_depth}};
    }

    static NormalizerConfig load(const std::filesystem::path& p) {
        return from_json(nlohmann::json::parse(read_file(p)));
    }
};

/// Name-resolution context of one module: import aliases plus its dotted path.
class QualifyContext {
public:
    QualifyContext() = default;

    /// `imports` entries look like `numpy`, `numpy as np`, `typing.List`,
    /// or `typing.Optional as Opt`.
    QualifyContext(const std::vector<std::string>& imports, std::string module_path)
        : module_path_(std::move(module_path)) {
        for (const auto& imp : imports) {
            const auto as = imp.find(" as ");
            std::string full = imp.substr(0, as);
            if (full.empty() || full.ends_with(".*") || full.front() == '.') {
                if (as == std::string::npos) continue;
            }
            if (as != std::string::npos) {
                local_[imp.substr(as + 4)] = full;
            } else if (full.find('.') != std::string::npos && !imp.empty()) {
                // `from a.b import c` is recorded as `a.b.c` and binds `c`;
                // `import a.b` binds `a`. Both spellings land here, so bind the
                // last component and also the root.
                local_[full.substr(full.rfind('.') + 1)] = full;
                const auto root = full.substr(0, full.find('.'));
                local_.try_emplace(root, root);
            } else {
                local_[full] = full;
            }
        }
    }

    std::optional<std::string> lookup(const std::string& local) const {
        const auto it = local_.find(local);
        if (it == local_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& module_path() const { return module_path_; }

private:
    std::unordered_map<std::string, std::string> local_;
    std::string module_path_;
};

class Normalizer {
public:
    explicit Normalizer(NormalizerConfig cfg = {}) : cfg_(std::move(cfg)) {}

    const NormalizerConfig& config() const { return cfg_; }

    /// Canonical type expression, or nullopt when the label is dropped.
    std::optional<TypeExpr> normalize_expr(const TypeExpr& t, const QualifyContext& ctx = {}) const {
        TypeExpr out = qualify(alias(t), ctx);
        if (cfg_.dropped.count(out.head)) return std::nullopt;
        return cap(out, 1);
    }

    std::optional<std::string> normalize(const TypeExpr& t, const QualifyContext& ctx = {}) const {
        auto e = normalize_expr(t, ctx);
        if (!e) return std::nullopt;
        return print(*e);
    }

    bool is_trivial_function(const std::string& name) const { return cfg_.trivial_functions.count(name) != 0; }

private:
    TypeExpr alias(const TypeExpr& t) const {
        TypeExpr out = t;
        if (auto it = cfg_.aliases.find(out.head); it != cfg_.aliases.end()) out.head = it->second;
        for (auto& a : out.args) a = alias(a);
        return out;
    }

    std::string qualify_head(const std::string& head, const QualifyContext& ctx, int hops = 0) const {
        if (head.empty() || head == "..." || detail::is_quoted(head) || cfg_.dropped.count(head) ||
            std::isdigit(static_cast<unsigned char>(head.front())) || head.front() == '-')
            return head;
        // A name reached through the typing or builtins module may itself be
        // an alias (typing.Text, builtins.list).
        auto from_module = [&](const std::string& name) -> std::optional<std::string> {
            for (std::string_view mod : {"typing.", "builtins."}) {
                if (!name.starts_with(mod)) continue;
                const auto rest = name.substr(mod.size());
                if (auto a = cfg_.aliases.find(rest); a != cfg_.aliases.end() && hops < 4)
                    return qualify_head(a->second, {}, hops + 1);
                if (mod == "typing." && cfg_.typing_names.count(rest)) return rest;
            }
            return std::nullopt;
        };
        if (auto m = from_module(head)) return *m;
        const auto dot = head.find('.');
        const std::string root = head.substr(0, dot);
        const std::string rest = dot == std::string::npos ? std::string() : head.substr(dot);
        if (dot == std::string::npos && cfg_.typing_names.count(head)) return head;
        if (auto full = ctx.lookup(root)) {
            std::string resolved = *full + rest;
            if (auto m = from_module(resolved)) return *m;
            return resolved;
        }
        if (dot != std::string::npos) return head;
        if (cfg_.builtins.count(head)) return "builtins." + head;
        if (ctx.module_path().empty()) return head;
        return ctx.module_path() + "." + head;
    }

    TypeExpr qualify(const TypeExpr& t, const QualifyContext& ctx) const {
        TypeExpr out{qualify_head(t.head, ctx), {}};
        out.args.reserve(t.args.size());
        for (const auto& a : t.args) out.args.push_back(qualify(a, ctx));
        return out;
    }

    TypeExpr cap(const TypeExpr& t, std::size_t level) const {
        if (level > cfg_.max_depth) return TypeExpr{"Any", {}};
        TypeExpr out{t.head, {}};
        for (const auto& a : t.args) out.args.push_back(cap(a, level + 1));
        return out;
    }

    NormalizerConfig cfg_;
};

}  // namespace cdt::types
