// SPDX-License-Identifier: Apache-2.0
#pragma once

// Tokenizer for the modern (3.x) grammar of the annotated source language.
// Produces NEWLINE/INDENT/DEDENT structure tokens, joins lines inside
// brackets and after backslashes, and rejects constructs that only the
// legacy 2.x grammar accepts.

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "cdt/common/error.hpp"

namespace cdt::extract {

class SyntaxError : public ParseError {
public:
    using ParseError::ParseError;
};

enum class TokKind { Name, Number, String, Op, Newline, Indent, Dedent, End };

struct Token {
    TokKind kind;
    std::string text;
    std::size_t begin = 0;  // byte offsets into the source
    std::size_t end = 0;
    std::size_t line = 0;

    bool is(TokKind k, std::string_view t) const { return kind == k && text == t; }
    bool is_op(std::string_view t) const { return is(TokKind::Op, t); }
    bool is_name(std::string_view t) const { return is(TokKind::Name, t); }
};

inline const std::unordered_set<std::string_view>& keywords() {
    static const std::unordered_set<std::string_view> kw = {
        "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
        "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global",
        "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise",
        "return", "try", "while", "with", "yield"};
    return kw;
}

inline bool is_keyword(std::string_view s) { return keywords().count(s) != 0; }

namespace detail {

inline bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
inline bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

inline bool is_string_prefix(std::string_view p) {
    static const std::unordered_set<std::string> kPrefixes = {
        "r", "u", "b", "f", "br", "rb", "fr", "rf"};
    std::string lower;
    for (char c : p) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return kPrefixes.count(lower) != 0;
}

}  // namespace detail

inline std::vector<Token> tokenize(std::string_view src) {
    static constexpr std::array<std::string_view, 23> kOps3and2 = {
        "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "<<", ">>", "<=",
        ">=", "==", "!=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^="};
    static constexpr std::string_view kOps1 = "+-*/%@&|^~<>()[]{},:;.=";

    std::vector<Token> out;
    std::vector<int> indents{0};
    std::vector<char> brackets;
    std::size_t i = 0;
    std::size_t line = 1;
    bool at_line_start = true;

    auto push = [&](TokKind k, std::size_t b, std::size_t e) {
        out.push_back({k, std::string(src.substr(b, e - b)), b, e, line});
    };

    while (i < src.size()) {
        if (at_line_start && brackets.empty()) {
            // Measure indentation; skip blank and comment-only lines.
            int col = 0;
            std::size_t j = i;
            while (j < src.size() && (src[j] == ' ' || src[j] == '\t' || src[j] == '\f')) {
                col = src[j] == '\t' ? (col / 8 + 1) * 8 : src[j] == ' ' ? col + 1 : 0;
                ++j;
            }
            if (j >= src.size()) {
                i = j;
                break;
            }
            if (src[j] == '\n' || src[j] == '\r' || src[j] == '#') {
                while (j < src.size() && src[j] != '\n') ++j;
                if (j < src.size()) ++j;
                ++line;
                i = j;
                continue;
            }
            if (col > indents.back()) {
                indents.push_back(col);
                out.push_back({TokKind::Indent, "", j, j, line});
            } else {
                while (col < indents.back()) {
                    indents.pop_back();
                    out.push_back({TokKind::Dedent, "", j, j, line});
                }
                if (col != indents.back())
                    throw SyntaxError("unindent does not match any outer indentation level", line);
            }
            i = j;
            at_line_start = false;
        }

        const char c = src[i];
        const auto uc = static_cast<unsigned char>(c);
        if (c == ' ' || c == '\t' || c == '\f' || c == '\r') {
            ++i;
            continue;
        }
        if (c == '#') {
            while (i < src.size() && src[i] != '\n') ++i;
            continue;
        }
        if (c == '\\') {
            std::size_t j = i + 1;
            if (j < src.size() && src[j] == '\r') ++j;
            if (j < src.size() && src[j] == '\n') {
                i = j + 1;
                ++line;
                continue;
            }
            throw SyntaxError("unexpected character after line continuation", line);
        }
        if (c == '\n') {
            if (brackets.empty()) {
                if (!out.empty() && out.back().kind != TokKind::Newline &&
                    out.back().kind != TokKind::Indent && out.back().kind != TokKind::Dedent)
                    out.push_back({TokKind::Newline, "", i, i + 1, line});
                at_line_start = true;
            }
            ++line;
            ++i;
            continue;
        }

        // Identifiers, possibly a string prefix.
        if (detail::ident_start(uc)) {
            std::size_t j = i;
            while (j < src.size() && detail::ident_char(static_cast<unsigned char>(src[j]))) ++j;
            if (j < src.size() && (src[j] == '"' || src[j] == '\'') &&
                detail::is_string_prefix(src.substr(i, j - i))) {
                // fall through to string scanning with the prefix included
            } else {
                push(TokKind::Name, i, j);
                i = j;
                continue;
            }
        }

        // Strings (with optional prefix).
        {
            std::size_t j = i;
            while (j < src.size() && std::isalpha(static_cast<unsigned char>(src[j]))) ++j;
            if (j < src.size() && (src[j] == '"' || src[j] == '\'')) {
                const char q = src[j];
                const bool triple = j + 2 < src.size() && src[j + 1] == q && src[j + 2] == q;
                const std::size_t start_line = line;
                std::size_t k = j + (triple ? 3 : 1);
                bool closed = false;
                while (k < src.size()) {
                    const char d = src[k];
                    if (d == '\\') {
                        if (k + 1 < src.size() && src[k + 1] == '\n') ++line;
                        k += 2;
                        continue;
                    }
                    if (d == '\n') {
                        if (!triple) break;
                        ++line;
                    }
                    if (d == q) {
                        if (!triple) {
                            ++k;
                            closed = true;
                            break;
                        }
                        if (k + 2 < src.size() && src[k + 1] == q && src[k + 2] == q) {
                            k += 3;
                            closed = true;
                            break;
                        }
                    }
                    ++k;
                }
                if (!closed) throw SyntaxError("unterminated string literal", start_line);
                out.push_back({TokKind::String, std::string(src.substr(i, k - i)), i, k, start_line});
                i = k;
                continue;
            }
        }

        // Numbers.
        if (std::isdigit(uc) || (c == '.' && i + 1 < src.size() &&
                                 std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::size_t j = i;
            while (j < src.size()) {
                const char d = src[j];
                if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '.') {
                    ++j;
                } else if ((d == '+' || d == '-') && j > i && (src[j - 1] == 'e' || src[j - 1] == 'E') &&
                           !(src.substr(i, 2) == "0x" || src.substr(i, 2) == "0X")) {
                    ++j;
                } else {
                    break;
                }
            }
            const auto num = src.substr(i, j - i);
            if (num.back() == 'l' || num.back() == 'L')
                throw SyntaxError("long integer suffix is not valid in 3.x", line);
            if (num.size() > 1 && num[0] == '0' &&
                std::all_of(num.begin(), num.end(), [](char d) { return std::isdigit(static_cast<unsigned char>(d)); }) &&
                std::any_of(num.begin(), num.end(), [](char d) { return d != '0'; }))
                throw SyntaxError("legacy octal literal", line);
            push(TokKind::Number, i, j);
            i = j;
            continue;
        }

        // Operators.
        if (src.substr(i, 2) == "<>") throw SyntaxError("'<>' operator is not valid in 3.x", line);
        bool matched = false;
        for (auto op : kOps3and2) {
            if (src.substr(i, op.size()) == op) {
                push(TokKind::Op, i, i + op.size());
                i += op.size();
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (kOps1.find(c) != std::string_view::npos) {
            if (c == '(' || c == '[' || c == '{') {
                brackets.push_back(c);
            } else if (c == ')' || c == ']' || c == '}') {
                const char open = c == ')' ? '(' : c == ']' ? '[' : '{';
                if (brackets.empty() || brackets.back() != open)
                    throw SyntaxError(std::string("unmatched '") + c + "'", line);
                brackets.pop_back();
            }
            push(TokKind::Op, i, i + 1);
            ++i;
            continue;
        }
        throw SyntaxError(std::string("invalid character '") + c + "'", line);
    }

    if (!brackets.empty()) throw SyntaxError("unexpected EOF: unclosed bracket", line);
    if (!out.empty() && out.back().kind != TokKind::Newline && out.back().kind != TokKind::Dedent &&
        out.back().kind != TokKind::Indent)
        out.push_back({TokKind::Newline, "", src.size(), src.size(), line});
    while (indents.size() > 1) {
        indents.pop_back();
        out.push_back({TokKind::Dedent, "", src.size(), src.size(), line});
    }
    out.push_back({TokKind::End, "", src.size(), src.size(), line});
    return out;
}

/// Identifier tokens (names that are not keywords), in source order.
inline std::vector<std::string> identifiers(const std::vector<Token>& toks) {
    std::vector<std::string> out;
    for (const auto& t : toks)
        if (t.kind == TokKind::Name && !is_keyword(t.text)) out.push_back(t.text);
    return out;
}

/// Identifier extraction that never fails: a regex-style scan that skips
/// string literals and comments on a best-effort basis.
inline std::vector<std::string> identifiers_fallback(std::string_view src) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < src.size()) {
        const char c = src[i];
        if (c == '#') {
            while (i < src.size() && src[i] != '\n') ++i;
        } else if (c == '"' || c == '\'') {
            const auto end = src.find(c, i + 1);
            i = end == std::string_view::npos ? src.size() : end + 1;
        } else if (detail::ident_start(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < src.size() && detail::ident_char(static_cast<unsigned char>(src[j]))) ++j;
            auto word = std::string(src.substr(i, j - i));
            if (!is_keyword(word)) out.push_back(std::move(word));
            i = j;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            while (i < src.size() && std::isalnum(static_cast<unsigned char>(src[i]))) ++i;
        } else {
            ++i;
        }
    }
    return out;
}

}  // namespace cdt::extract
