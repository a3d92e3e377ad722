// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "cdt/common/error.hpp"

namespace cdt::corpus {

/// Roles a mined framework can play: the type checker that signals annotated
/// code, and the two libraries that mark a domain.
enum class Framework { TypeChecker, MarkerA, MarkerB };

/// cal = checker and marker A; web = checker and marker B; both = all three.
enum class Domain { Web, Cal, Both };

/// Maps role to the package identifier queried on the forge.
struct FrameworkRoles {
    std::string checker = "mypy";
    std::string marker_a = "numpy";
    std::string marker_b = "flask";

    const std::string& id(Framework f) const {
        switch (f) {
            case Framework::TypeChecker: return checker;
            case Framework::MarkerA: return marker_a;
            case Framework::MarkerB: return marker_b;
        }
        throw ConfigError("unknown framework role");
    }

    Framework role(std::string_view id) const {
        if (id == checker) return Framework::TypeChecker;
        if (id == marker_a) return Framework::MarkerA;
        if (id == marker_b) return Framework::MarkerB;
        throw ConfigError("unknown framework id '" + std::string(id) + "'");
    }
};

inline std::string_view to_string(Domain d) {
    switch (d) {
        case Domain::Web: return "web";
        case Domain::Cal: return "cal";
        case Domain::Both: return "both";
    }
    return "?";
}

inline Domain parse_domain(std::string_view s) {
    if (s == "web") return Domain::Web;
    if (s == "cal") return Domain::Cal;
    if (s == "both") return Domain::Both;
    throw ParseError("unknown domain '" + std::string(s) + "'");
}

inline bool is_commit_hash(std::string_view h) {
    return h.size() == 40 && std::all_of(h.begin(), h.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

struct RepoRef {
    std::string url;
    std::string commit_hash;
    std::uint64_t stars = 0;
    std::set<Framework> frameworks;
    /// Unset until the per-framework lists have been intersected.
    std::optional<Domain> domain;

    bool operator==(const RepoRef&) const = default;
};

/// The domain implied by a framework set, if any.
inline std::optional<Domain> domain_for(const std::set<Framework>& fw) {
    const bool checker = fw.count(Framework::TypeChecker) != 0;
    const bool a = fw.count(Framework::MarkerA) != 0;
    const bool b = fw.count(Framework::MarkerB) != 0;
    if (!checker) return std::nullopt;
    if (a && b) return Domain::Both;
    if (a) return Domain::Cal;
    if (b) return Domain::Web;
    return std::nullopt;
}

/// Throws ParseError describing the first violated RepoRef invariant.
inline void validate(const RepoRef& r) {
    if (r.url.empty()) throw ParseError("repo url is empty");
    if (!is_commit_hash(r.commit_hash))
        throw ParseError("commit hash '" + r.commit_hash + "' is not 40 lowercase hex chars");
    const bool all_three = r.frameworks.size() == 3;
    if (r.domain && (*r.domain == Domain::Both) != all_three)
        throw ParseError("domain 'both' must coincide with all three frameworks: " + r.url);
}

}  // namespace cdt::corpus
