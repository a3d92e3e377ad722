// SPDX-License-Identifier: Apache-2.0
#pragma once

// Content-addressed artifact store. An entry lives at <root>/<stage>/<key>/
// where the key hashes everything the stage read. Entries are written to a
// scratch directory and renamed into place, so a partial write is never
// mistaken for a result.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cdt/common/error.hpp"
#include "cdt/common/files.hpp"
#include "cdt/common/hash.hpp"

namespace cdt::pipeline {

inline constexpr const char* kCacheEnv = "CDT_CACHE_DIR";

/// Cache root from the environment, else `fallback`.
inline std::filesystem::path cache_root(const std::filesystem::path& fallback) {
    if (const char* env = std::getenv(kCacheEnv); env && *env) return env;
    return fallback;
}

/// Builds a key from labelled parts.
class KeyBuilder {
public:
    KeyBuilder& add(const std::string& name, const std::string& value) {
        text_ += name;
        text_ += '=';
        text_ += std::to_string(value.size());
        text_ += ':';
        text_ += value;
        text_ += '\n';
        return *this;
    }

    std::string key() const { return sha256_hex(text_).substr(0, 24); }

private:
    std::string text_;
};

/// Digest over the relative paths and contents of the regular files under `root`.
inline std::string tree_digest(const std::filesystem::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root))
        if (e.is_regular_file())
            files[std::filesystem::relative(e.path(), root).generic_string()] = sha256_hex(read_file(e.path()));
    std::string all;
    for (const auto& [p, h] : files) all += p + '\t' + h + '\n';
    return sha256_hex(all);
}

class ArtifactCache {
public:
    explicit ArtifactCache(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const { return root_; }

    std::filesystem::path entry(const std::string& stage, const std::string& key) const { return root_ / stage / key; }

    bool has(const std::string& stage, const std::string& key) const {
        return std::filesystem::exists(entry(stage, key) / kDone);
    }

    /// The entry directory, produced by `build(dir)` when missing.
    std::filesystem::path directory(const std::string& stage, const std::string& key,
                                    const std::function<void(const std::filesystem::path&)>& build) {
        const auto dir = entry(stage, key);
        if (std::filesystem::exists(dir / kDone)) {
            ++hits_;
            return dir;
        }
        ++misses_;
        const auto tmp = root_ / stage / (key + ".partial");
        std::filesystem::remove_all(tmp);
        std::filesystem::create_directories(tmp);
        build(tmp);
        write_file(tmp / kDone, key + "\n");
        std::filesystem::remove_all(dir);
        std::filesystem::rename(tmp, dir);
        return dir;
    }

    /// A single-file artifact.
    std::string bytes(const std::string& stage, const std::string& key, const std::string& name,
                      const std::function<std::string()> build) {
        const auto dir = directory(stage, key, [&](const std::filesystem::path& d) { write_file(d / name, build()); });
        return read_file(dir / name);
    }

    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }

    static constexpr const char* kDone = ".complete";

private:
    std::filesystem::path root_;
    std::size_t hits_ = 0, misses_ = 0;
};

}  // namespace cdt::pipeline
