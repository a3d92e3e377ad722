// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cdt/common/rng.hpp"
#include "cdt/corpus/repo_ref.hpp"

namespace cdt::dedup {

struct RepoDedupResult {
    std::vector<corpus::RepoRef> a, b;
    std::vector<std::string> removed_from_a, removed_from_b;
};

/// Repositories present in both lists are split between the two: a seeded
/// half (rounded up) is removed from `a` and the rest from `b`.
inline RepoDedupResult dedup_repos(const std::vector<corpus::RepoRef>& a, const std::vector<corpus::RepoRef>& b,
                                   std::uint64_t seed) {
    std::set<std::string> in_a, in_b;
    for (const auto& r : a) in_a.insert(r.url);
    for (const auto& r : b) in_b.insert(r.url);
    std::vector<std::string> shared;
    std::set_intersection(in_a.begin(), in_a.end(), in_b.begin(), in_b.end(), std::back_inserter(shared));
    Rng rng(derive_seed(seed, 0xDED0));
    shuffle(std::span<std::string>(shared), rng);
    const std::size_t half = (shared.size() + 1) / 2;
    RepoDedupResult out;
    out.removed_from_a.assign(shared.begin(), shared.begin() + static_cast<std::ptrdiff_t>(half));
    out.removed_from_b.assign(shared.begin() + static_cast<std::ptrdiff_t>(half), shared.end());
    std::sort(out.removed_from_a.begin(), out.removed_from_a.end());
    std::sort(out.removed_from_b.begin(), out.removed_from_b.end());
    const std::set<std::string> drop_a(out.removed_from_a.begin(), out.removed_from_a.end());
    const std::set<std::string> drop_b(out.removed_from_b.begin(), out.removed_from_b.end());
    for (const auto& r : a)
        if (!drop_a.count(r.url)) out.a.push_back(r);
    for (const auto& r : b)
        if (!drop_b.count(r.url)) out.b.push_back(r);
    return out;
}

}  // namespace cdt::dedup
