// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <future>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "cdt/corpus/dependents.hpp"
#include "cdt/corpus/repo_ref.hpp"

namespace cdt::corpus {

/// Descending by stars; equal stars ordered by URL.
inline std::vector<RepoRef> sort_by_stars(std::vector<RepoRef> refs) {
    std::sort(refs.begin(), refs.end(), [](const RepoRef& a, const RepoRef& b) {
        if (a.stars != b.stars) return a.stars > b.stars;
        return a.url < b.url;
    });
    return refs;
}

/// Intersects the checker list with each marker list. A repository present in
/// all three lists lands in both domain outputs with domain=both. Outputs are
/// star-sorted. Star counts that disagree across lists resolve to the maximum.
inline std::map<Domain, std::vector<RepoRef>> merge_and_intersect(
    const std::map<Framework, std::vector<RepoRef>>& per_framework) {
    for (auto f : {Framework::TypeChecker, Framework::MarkerA, Framework::MarkerB})
        if (!per_framework.count(f)) throw ConfigError("merge_and_intersect: missing framework list");

    std::map<std::string, RepoRef> by_url;
    for (const auto& [fw, refs] : per_framework) {
        for (const auto& r : refs) {
            auto [it, fresh] = by_url.try_emplace(r.url, r);
            RepoRef& m = it->second;
            if (!fresh) {
                m.stars = std::max(m.stars, r.stars);
                if (m.commit_hash.empty()) m.commit_hash = r.commit_hash;
            }
            m.frameworks.insert(r.frameworks.begin(), r.frameworks.end());
            m.frameworks.insert(fw);
        }
    }

    std::map<Domain, std::vector<RepoRef>> out{{Domain::Cal, {}}, {Domain::Web, {}}};
    for (auto& [url, r] : by_url) {
        r.domain = domain_for(r.frameworks);
        if (!r.domain) continue;
        if (*r.domain == Domain::Cal || *r.domain == Domain::Both) out[Domain::Cal].push_back(r);
        if (*r.domain == Domain::Web || *r.domain == Domain::Both) out[Domain::Web].push_back(r);
    }
    for (auto& [d, refs] : out) refs = sort_by_stars(std::move(refs));
    return out;
}

/// Mines the three frameworks concurrently. Results are keyed by role, so
/// completion order does not affect the output.
inline std::map<Framework, DiscoverResult> mine_all(const MiningConfig& cfg, const Fetcher& fetcher,
                                                    const HashResolver& resolver) {
    std::map<Framework, std::future<DiscoverResult>> jobs;
    for (auto f : {Framework::TypeChecker, Framework::MarkerA, Framework::MarkerB}) {
        const std::string id = cfg.roles.id(f);
        jobs.emplace(f, std::async(std::launch::async, [&cfg, &fetcher, &resolver, id] {
                         auto r = discover_dependents(id, cfg, fetcher, resolver);
                         r.refs = sort_by_stars(std::move(r.refs));
                         return r;
                     }));
    }
    std::map<Framework, DiscoverResult> out;
    for (auto& [f, job] : jobs) out.emplace(f, job.get());
    return out;
}

}  // namespace cdt::corpus
