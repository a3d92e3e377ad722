// SPDX-License-Identifier: Apache-2.0
#pragma once

// Annotation grammar:
//
//   expr    := primary ('|' primary)*          a | b  ==  Union[a, b]
//   primary := atom ['[' args ']'] | '[' [args] ']'
//   args    := expr (',' expr)* [',']
//   atom    := dotted-name | '...' | number | quoted string
//
// A bracketed list without a head (as in Callable[[int], str]) gets the head
// "[]". A quoted string whose contents parse as an expression is a forward
// reference and is replaced by that expression.

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "cdt/common/error.hpp"

namespace cdt::types {

struct TypeExpr {
    std::string head;
    std::vector<TypeExpr> args;

    bool operator==(const TypeExpr&) const = default;
};

inline constexpr std::string_view kListHead = "[]";

inline std::string print(const TypeExpr& t) {
    std::string out;
    const bool bare_list = t.head == kListHead;
    if (!bare_list) out = t.head;
    if (!t.args.empty() || bare_list) {
        out += '[';
        for (std::size_t i = 0; i < t.args.size(); ++i) {
            if (i) out += ", ";
            out += print(t.args[i]);
        }
        out += ']';
    }
    return out;
}

/// Nesting depth counting the head as level 1: `int` is 1, `List[int]` is 2.
inline std::size_t depth(const TypeExpr& t) {
    std::size_t d = 0;
    for (const auto& a : t.args) d = std::max(d, depth(a));
    return d + 1;
}

namespace detail {

class TypeParser {
public:
    explicit TypeParser(std::string_view s) : s_(s) {}

    TypeExpr parse_all() {
        skip_ws();
        if (pos_ >= s_.size()) throw ParseError("empty type annotation");
        TypeExpr t = parse_expr();
        skip_ws();
        if (pos_ != s_.size())
            throw ParseError("unexpected '" + std::string(1, s_[pos_]) + "' in type annotation");
        return t;
    }

private:
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    TypeExpr parse_expr() {
        TypeExpr first = parse_primary();
        if (!eat('|')) return first;
        TypeExpr u{"Union", {std::move(first)}};
        do {
            u.args.push_back(parse_primary());
        } while (eat('|'));
        return u;
    }

    std::vector<TypeExpr> parse_args(char close) {
        std::vector<TypeExpr> args;
        if (eat(close)) return args;
        for (;;) {
            args.push_back(parse_expr());
            if (eat(close)) return args;
            if (!eat(',')) throw ParseError("expected ',' or closing bracket in type annotation");
            if (eat(close)) return args;
        }
    }

    TypeExpr parse_primary() {
        skip_ws();
        if (pos_ >= s_.size()) throw ParseError("unexpected end of type annotation");
        const char c = s_[pos_];
        if (c == '[') {
            ++pos_;
            return TypeExpr{std::string(kListHead), parse_args(']')};
        }
        TypeExpr t{parse_atom(), {}};
        if (eat('[')) {
            t.args = parse_args(']');
        }
        return t;
    }

    std::string parse_atom() {
        const std::size_t start = pos_;
        const char c = s_[pos_];
        if (c == '"' || c == '\'') {
            const auto end = s_.find(c, pos_ + 1);
            if (end == std::string_view::npos) throw ParseError("unterminated string in type annotation");
            pos_ = end + 1;
            return std::string(s_.substr(start, pos_ - start));
        }
        if (s_.substr(pos_, 3) == "...") {
            pos_ += 3;
            return "...";
        }
        auto word_char = [](char ch) {
            return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
        };
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '-') {
            ++pos_;
            while (pos_ < s_.size() && (word_char(s_[pos_]) || s_[pos_] == '.')) ++pos_;
            return std::string(s_.substr(start, pos_ - start));
        }
        if (!(std::isalpha(static_cast<unsigned char>(c)) || c == '_'))
            throw ParseError("type annotation has an empty head");
        for (;;) {
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                ++pos_;
            if (pos_ + 1 < s_.size() && s_[pos_] == '.' &&
                (std::isalpha(static_cast<unsigned char>(s_[pos_ + 1])) || s_[pos_ + 1] == '_')) {
                ++pos_;
                continue;
            }
            break;
        }
        return std::string(s_.substr(start, pos_ - start));
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

inline bool is_quoted(std::string_view h) {
    return h.size() >= 2 && (h.front() == '"' || h.front() == '\'') && h.back() == h.front();
}

/// Replaces quoted heads that are themselves valid annotations.
inline void resolve_forward_refs(TypeExpr& t, int nesting) {
    if (is_quoted(t.head) && t.args.empty() && nesting < 4) {
        try {
            TypeExpr inner = TypeParser(std::string_view(t.head).substr(1, t.head.size() - 2)).parse_all();
            resolve_forward_refs(inner, nesting + 1);
            t = std::move(inner);
            return;
        } catch (const ParseError&) {
            return;  // a literal string argument
        }
    }
    for (auto& a : t.args) resolve_forward_refs(a, nesting);
}

}  // namespace detail

/// Parses an annotation string. Throws ParseError on unbalanced brackets,
/// empty heads, trailing input, or a top-level string that is not a type.
inline TypeExpr parse_type(std::string_view annotation) {
    TypeExpr t = detail::TypeParser(annotation).parse_all();
    detail::resolve_forward_refs(t, 0);
    if (detail::is_quoted(t.head)) throw ParseError("unresolvable forward reference " + t.head);
    return t;
}

}  // namespace cdt::types
