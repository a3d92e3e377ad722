// SPDX-License-Identifier: Apache-2.0
#pragma once

// Repo-list CSV: `url,hash,stars,frameworks,domain`. The first two columns are
// the published list layout; frameworks are ';'-joined ids in role order, and
// domain is empty for refs that have not been intersected yet.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "cdt/common/csv.hpp"
#include "cdt/common/files.hpp"
#include "cdt/common/strings.hpp"
#include "cdt/corpus/repo_ref.hpp"

namespace cdt::corpus {

inline constexpr std::string_view kRepoListHeader = "url,hash,stars,frameworks,domain";

inline std::string format_repo_list(const std::vector<RepoRef>& refs,
                                    const FrameworkRoles& roles = {}) {
    std::ostringstream os;
    os << kRepoListHeader << '\n';
    std::unordered_set<std::string> seen;
    for (const auto& r : refs) {
        validate(r);
        if (!seen.insert(r.url).second) throw ParseError("duplicate url in repo list: " + r.url);
        std::vector<std::string> fw;
        for (auto f : r.frameworks) fw.push_back(roles.id(f));
        csv::write_row(os, {r.url, r.commit_hash, std::to_string(r.stars), join(fw, ";"),
                            r.domain ? std::string(to_string(*r.domain)) : std::string()});
    }
    return os.str();
}

inline std::vector<RepoRef> parse_repo_list(std::istream& in, const FrameworkRoles& roles = {}) {
    auto rows = csv::read_all(in);
    if (rows.empty()) throw ParseError("repo list is missing its header", 1);
    if (join(rows.front().fields, ",") != kRepoListHeader)
        throw ParseError("unexpected repo list header", rows.front().line);

    std::vector<RepoRef> refs;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& [line, f] = rows[i];
        if (f.size() != 5) throw ParseError("expected 5 columns, got " + std::to_string(f.size()), line);
        RepoRef r;
        r.url = f[0];
        r.commit_hash = f[1];
        try {
            std::size_t pos = 0;
            r.stars = std::stoull(f[2], &pos);
            if (pos != f[2].size() || f[2].front() == '-') throw std::invalid_argument("stars");
            if (!f[3].empty())
                for (const auto& id : split(f[3], ';')) r.frameworks.insert(roles.role(id));
            if (!f[4].empty()) r.domain = parse_domain(f[4]);
            validate(r);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line);
        } catch (const ConfigError& e) {
            throw ParseError(e.what(), line);
        } catch (const std::logic_error&) {
            throw ParseError("invalid stars value '" + f[2] + "'", line);
        }
        if (!seen.insert(r.url).second) throw ParseError("duplicate url " + r.url, line);
        refs.push_back(std::move(r));
    }
    return refs;
}

inline void export_repo_list(const std::vector<RepoRef>& refs, const std::filesystem::path& path,
                             const FrameworkRoles& roles = {}) {
    write_file(path, format_repo_list(refs, roles));
}

inline std::vector<RepoRef> import_repo_list(const std::filesystem::path& path,
                                             const FrameworkRoles& roles = {}) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open repo list " + path.string());
    return parse_repo_list(in, roles);
}

}  // namespace cdt::corpus
