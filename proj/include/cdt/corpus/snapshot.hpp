// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "cdt/common/error.hpp"
#include "cdt/common/process.hpp"
#include "cdt/common/strings.hpp"
#include "cdt/corpus/repo_ref.hpp"

namespace cdt::corpus {

class SnapshotError : public Error {
public:
    enum class Kind { CloneFailed, HashNotFound };

    SnapshotError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Directory name for a pinned checkout: `<owner>__<repo>__<hash[:12]>`.
inline std::string snapshot_dirname(const RepoRef& ref) {
    std::string url = ref.url;
    while (!url.empty() && url.back() == '/') url.pop_back();
    if (url.size() > 4 && url.ends_with(".git")) url.resize(url.size() - 4);
    auto parts = split(url, '/');
    std::string repo = parts.empty() ? "repo" : parts.back();
    std::string owner = parts.size() >= 2 ? parts[parts.size() - 2] : "local";
    if (owner.empty()) owner = "local";
    return owner + "__" + repo + "__" + ref.commit_hash.substr(0, 12);
}

namespace detail {

inline std::string git_head(const std::filesystem::path& dir) {
    const auto r = run_process({"git", "-C", dir.string(), "rev-parse", "HEAD"});
    if (r.exit_code != 0) return {};
    return std::string(trim(r.output));
}

}  // namespace detail

/// Checks `ref` out at its pinned commit under `workdir`. A directory already
/// at that commit is returned as is, without touching the network.
inline std::filesystem::path snapshot(const RepoRef& ref, const std::filesystem::path& workdir) {
    validate(ref);
    namespace fs = std::filesystem;
    const fs::path dest = workdir / snapshot_dirname(ref);
    if (fs::exists(dest / ".git") && detail::git_head(dest) == ref.commit_hash) return dest;

    fs::create_directories(workdir);
    const fs::path tmp = workdir / (snapshot_dirname(ref) + ".partial");
    fs::remove_all(tmp);
    auto clone = run_process({"git", "clone", "--quiet", "--no-checkout", ref.url, tmp.string()});
    if (clone.exit_code != 0) {
        fs::remove_all(tmp);
        throw SnapshotError(SnapshotError::Kind::CloneFailed,
                            "clone of " + ref.url + " failed: " + clone.output);
    }
    auto exists = run_process(
        {"git", "-C", tmp.string(), "cat-file", "-e", ref.commit_hash + "^{commit}"});
    if (exists.exit_code != 0) {
        fs::remove_all(tmp);
        throw SnapshotError(SnapshotError::Kind::HashNotFound,
                            "commit " + ref.commit_hash + " not found in " + ref.url);
    }
    auto co = run_process(
        {"git", "-C", tmp.string(), "checkout", "--quiet", "--detach", ref.commit_hash});
    if (co.exit_code != 0) {
        fs::remove_all(tmp);
        throw SnapshotError(SnapshotError::Kind::CloneFailed, "checkout failed: " + co.output);
    }
    fs::remove_all(dest);
    fs::rename(tmp, dest);
    return dest;
}

}  // namespace cdt::corpus
