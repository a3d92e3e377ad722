// SPDX-License-Identifier: Apache-2.0
#pragma once

// Discovery of repositories that depend on a framework, from two sources:
// the forge's "network/dependents" HTML pages and the package-index API that
// lists dependent repositories as JSON.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "cdt/common/process.hpp"
#include "cdt/common/strings.hpp"
#include "cdt/corpus/page_cache.hpp"
#include "cdt/corpus/repo_ref.hpp"

namespace cdt::corpus {

enum class Source { GitHubDependents, LibrariesApi };

struct MiningConfig {
    std::size_t per_framework_limit = 50'000;
    std::uint64_t star_filter_min = 0;
    std::filesystem::path page_cache_dir = "page-cache";
    std::chrono::milliseconds request_delay{1000};
    std::vector<Source> sources = {Source::GitHubDependents, Source::LibrariesApi};
    FrameworkRoles roles;
    /// Forge "owner/name" of each framework's own repository.
    std::map<std::string, std::string> framework_repos = {
        {"mypy", "python/mypy"}, {"numpy", "numpy/numpy"}, {"flask", "pallets/flask"}};
    std::size_t libraries_per_page = 100;

    void validate() const {
        if (per_framework_limit < 1) throw ConfigError("per_framework_limit must be >= 1");
    }
};

struct DependentEntry {
    std::string url;  // clone URL, https://github.com/<owner>/<repo>.git
    std::uint64_t stars = 0;
};

struct DependentsPage {
    std::vector<DependentEntry> entries;
    std::optional<std::string> next_url;
};

inline std::string clone_url(std::string_view owner_repo) {
    return "https://github.com/" + std::string(owner_repo) + ".git";
}

namespace detail {

inline std::optional<std::string> attr_after(std::string_view hay, std::size_t from,
                                             std::string_view attr) {
    const auto key = std::string(attr) + "=\"";
    const auto p = hay.find(key, from);
    if (p == std::string_view::npos) return std::nullopt;
    const auto start = p + key.size();
    const auto end = hay.find('"', start);
    if (end == std::string_view::npos) return std::nullopt;
    return std::string(hay.substr(start, end - start));
}

inline std::string html_unescape(std::string s) {
    static const std::pair<std::string_view, std::string_view> kEntities[] = {
        {"&amp;", "&"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&#39;", "'"}};
    for (const auto& [from, to] : kEntities) {
        std::string::size_type p = 0;
        while ((p = s.find(from, p)) != std::string::npos) {
            s.replace(p, from.size(), to);
            p += to.size();
        }
    }
    return s;
}

}  // namespace detail

/// Parses one dependents HTML page. Throws ParseError when a dependent row
/// lacks a repository link or a readable star count, or when a non-empty page
/// has neither rows nor the empty-state marker.
inline DependentsPage parse_github_dependents(std::string_view html) {
    static constexpr std::string_view kRow = "data-test-id=\"dg-repo-pkg-dependent\"";
    DependentsPage page;
    if (trim(html).empty()) return page;

    std::size_t pos = html.find(kRow);
    if (pos == std::string_view::npos && html.find("blankslate") == std::string_view::npos)
        throw ParseError("dependents page has neither rows nor an empty-state marker");

    while (pos != std::string_view::npos) {
        const auto next = html.find(kRow, pos + kRow.size());
        const auto row = html.substr(pos, next == std::string_view::npos ? html.size() - pos : next - pos);
        const auto repo_at = row.find("data-hovercard-type=\"repository\"");
        if (repo_at == std::string_view::npos) throw ParseError("dependent row without repository link");
        auto href = detail::attr_after(row, repo_at, "href");
        if (!href || href->size() < 4 || href->front() != '/')
            throw ParseError("dependent row with unusable href");
        const auto star_at = row.find("octicon-star");
        if (star_at == std::string_view::npos) throw ParseError("dependent row without star count");
        const auto svg_end = row.find("</svg>", star_at);
        if (svg_end == std::string_view::npos) throw ParseError("dependent row with truncated star icon");
        std::uint64_t stars = 0;
        bool digits = false;
        for (std::size_t i = svg_end + 6; i < row.size(); ++i) {
            const char c = row[i];
            if (c >= '0' && c <= '9') {
                stars = stars * 10 + static_cast<std::uint64_t>(c - '0');
                digits = true;
            } else if (c == ',' || (!digits && std::isspace(static_cast<unsigned char>(c)))) {
                continue;
            } else {
                break;
            }
        }
        if (!digits) throw ParseError("dependent row with unreadable star count");
        page.entries.push_back({clone_url(std::string_view(*href).substr(1)), stars});
        pos = next;
    }

    // Pagination link: <a ... href="...dependents_after=...">Next</a>
    for (auto p = html.find("dependents_after="); p != std::string_view::npos;
         p = html.find("dependents_after=", p + 1)) {
        const auto href_start = html.rfind("href=\"", p);
        const auto close = html.find('"', p);
        const auto tag_end = html.find("</a>", p);
        if (href_start == std::string_view::npos || close == std::string_view::npos ||
            tag_end == std::string_view::npos)
            break;
        const auto label = html.substr(close, tag_end - close);
        if (label.find("Next") != std::string_view::npos) {
            page.next_url = detail::html_unescape(
                std::string(html.substr(href_start + 6, close - href_start - 6)));
            break;
        }
    }
    return page;
}

/// Parses a package-index JSON page: an array of objects carrying
/// `full_name` (owner/repo) and `stargazers_count`.
inline DependentsPage parse_libraries_page(std::string_view body) {
    DependentsPage page;
    if (trim(body).empty()) return page;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("dependents JSON: ") + e.what());
    }
    if (!j.is_array()) throw ParseError("dependents JSON is not an array");
    for (const auto& item : j) {
        if (!item.is_object() || !item.contains("full_name") || !item["full_name"].is_string())
            throw ParseError("dependents JSON entry without full_name");
        std::uint64_t stars = 0;
        if (item.contains("stargazers_count") && item["stargazers_count"].is_number_unsigned())
            stars = item["stargazers_count"].get<std::uint64_t>();
        page.entries.push_back({clone_url(item["full_name"].get<std::string>()), stars});
    }
    return page;
}

inline std::string github_dependents_url(const MiningConfig& cfg, const std::string& framework) {
    const auto it = cfg.framework_repos.find(framework);
    if (it == cfg.framework_repos.end())
        throw ConfigError("no forge repository configured for framework '" + framework + "'");
    return "https://github.com/" + it->second + "/network/dependents";
}

inline std::string libraries_url(const MiningConfig& cfg, const std::string& framework, std::size_t page) {
    return "https://libraries.io/api/pypi/" + framework + "/dependent_repositories?page=" +
           std::to_string(page) + "&per_page=" + std::to_string(cfg.libraries_per_page);
}

/// Resolves a clone URL to the commit hash of its default branch. Lookups
/// reuse the page cache under the key `git-ls-remote:<url>`; live mode asks
/// `git ls-remote`.
class HashResolver {
public:
    HashResolver(PageCache cache, bool live) : cache_(std::move(cache)), live_(live) {}

    static std::string key(const std::string& url) { return "git-ls-remote:" + url; }

    std::optional<std::string> resolve(const std::string& url) const {
        std::optional<std::string> body = cache_.get(key(url));
        if (!body && live_) {
            const auto res = run_process({"git", "ls-remote", url, "HEAD"});
            if (res.exit_code != 0) return std::nullopt;
            body = res.output;
            cache_.put(key(url), *body);
        }
        if (!body) return std::nullopt;
        const auto hash = std::string(trim(std::string_view(*body).substr(0, 40)));
        if (!is_commit_hash(hash)) return std::nullopt;
        return hash;
    }

private:
    PageCache cache_;
    bool live_;
};

struct DiscoverResult {
    std::vector<RepoRef> refs;
    std::size_t warnings = 0;  // malformed pages and unresolvable hashes
};

/// Collects up to `per_framework_limit` dependents of `framework` in page
/// order, deduplicated by URL. A URL seen on both sources keeps the larger
/// star count.
inline DiscoverResult discover_dependents(const std::string& framework, const MiningConfig& cfg,
                                          const Fetcher& fetcher, const HashResolver& resolver) {
    cfg.validate();
    const Framework role = cfg.roles.role(framework);
    DiscoverResult out;
    std::vector<DependentEntry> ordered;
    std::unordered_map<std::string, std::size_t> index;

    auto add = [&](const DependentEntry& e) {
        if (e.stars < cfg.star_filter_min) return;
        if (auto it = index.find(e.url); it != index.end()) {
            ordered[it->second].stars = std::max(ordered[it->second].stars, e.stars);
            return;
        }
        if (ordered.size() >= cfg.per_framework_limit) return;
        index.emplace(e.url, ordered.size());
        ordered.push_back(e);
    };

    for (const Source src : cfg.sources) {
        if (src == Source::GitHubDependents) {
            std::optional<std::string> url = github_dependents_url(cfg, framework);
            std::size_t pages = 0;
            while (url && ordered.size() < cfg.per_framework_limit && pages++ < 100'000) {
                const std::string body = fetcher.fetch_with_retry(*url);
                try {
                    const auto page = parse_github_dependents(body);
                    for (const auto& e : page.entries) add(e);
                    url = page.next_url;
                } catch (const ParseError&) {
                    ++out.warnings;
                    url.reset();
                }
            }
        } else {
            for (std::size_t p = 1; ordered.size() < cfg.per_framework_limit && p < 100'000; ++p) {
                std::string body;
                try {
                    body = fetcher.fetch_with_retry(libraries_url(cfg, framework, p));
                } catch (const NetworkError& e) {
                    // The index source is optional when running offline.
                    if (e.retryable() || fetcher.live()) throw;
                    break;
                }
                try {
                    const auto page = parse_libraries_page(body);
                    if (page.entries.empty()) break;
                    for (const auto& e : page.entries) add(e);
                    if (page.entries.size() < cfg.libraries_per_page) break;
                } catch (const ParseError&) {
                    ++out.warnings;
                }
            }
        }
    }

    for (const auto& e : ordered) {
        auto hash = resolver.resolve(e.url);
        if (!hash) {
            ++out.warnings;
            continue;
        }
        out.refs.push_back(RepoRef{e.url, *hash, e.stars, {role}, std::nullopt});
    }
    return out;
}

}  // namespace cdt::corpus
