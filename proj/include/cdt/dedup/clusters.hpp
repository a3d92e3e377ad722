// SPDX-License-Identifier: Apache-2.0
#pragma once

// Near-duplicate clusters: connected components of the graph linking files
// that are mutual k-nearest neighbours by cosine similarity with similarity
// at or above the threshold. Byte-identical files are always linked.

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "cdt/common/csv.hpp"
#include "cdt/common/error.hpp"
#include "cdt/common/files.hpp"
#include "cdt/common/rng.hpp"
#include "cdt/dedup/tfidf.hpp"

namespace cdt::dedup {

struct DedupConfig {
    double threshold = 0.95;
    std::size_t k = 10;
    std::uint64_t seed = 1;
};

struct DuplicateCluster {
    std::vector<std::string> members;  // input order
    std::string survivor;
};

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

/// For each file, the neighbours with similarity >= threshold, most similar
/// first (ties by input order), at most k of them.
inline std::vector<std::vector<std::size_t>> thresholded_knn(const std::vector<FileVector>& files, double threshold,
                                                             std::size_t k) {
    std::unordered_map<std::uint32_t, std::vector<std::pair<std::size_t, double>>> postings;
    for (std::size_t i = 0; i < files.size(); ++i)
        for (const auto& [t, w] : files[i].weights) postings[t].emplace_back(i, w);
    std::vector<std::vector<std::size_t>> out(files.size());
    std::vector<double> acc(files.size());
    std::vector<std::size_t> touched;
    for (std::size_t i = 0; i < files.size(); ++i) {
        touched.clear();
        for (const auto& [t, w] : files[i].weights) {
            for (const auto& [j, wj] : postings[t]) {
                if (j == i) continue;
                if (acc[j] == 0.0) touched.push_back(j);
                acc[j] += w * wj;
            }
        }
        std::vector<std::pair<double, std::size_t>> cand;
        for (auto j : touched) {
            if (acc[j] >= threshold) cand.emplace_back(acc[j], j);
            acc[j] = 0.0;
        }
        std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        if (cand.size() > k) cand.resize(k);
        for (const auto& [_, j] : cand) out[i].push_back(j);
    }
    return out;
}

/// Cluster index per file; clusters are numbered by their first member.
inline std::vector<std::size_t> cluster_assignment(const std::vector<FileVector>& files, const DedupConfig& cfg) {
    if (!(cfg.threshold > 0 && cfg.threshold <= 1)) throw ConfigError("similarity threshold must lie in (0, 1]");
    if (cfg.k == 0) throw ConfigError("k must be positive");
    UnionFind uf(files.size());
    std::map<std::string, std::size_t> first_with_digest;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const auto [it, fresh] = first_with_digest.emplace(files[i].digest, i);
        if (!fresh) uf.unite(it->second, i);
    }
    const auto nn = thresholded_knn(files, cfg.threshold, cfg.k);
    for (std::size_t i = 0; i < files.size(); ++i)
        for (auto j : nn[i])
            if (j > i && std::find(nn[j].begin(), nn[j].end(), i) != nn[j].end()) uf.unite(i, j);
    std::vector<std::size_t> out(files.size());
    std::map<std::size_t, std::size_t> number;
    for (std::size_t i = 0; i < files.size(); ++i) out[i] = number.emplace(uf.find(i), number.size()).first->second;
    return out;
}

/// Clusters with a seeded, uniformly chosen survivor each.
inline std::vector<DuplicateCluster> cluster_duplicates(const std::vector<FileVector>& files, const DedupConfig& cfg) {
    const auto assign = cluster_assignment(files, cfg);
    std::size_t n_clusters = 0;
    for (auto a : assign) n_clusters = std::max(n_clusters, a + 1);
    std::vector<DuplicateCluster> out(n_clusters);
    for (std::size_t i = 0; i < files.size(); ++i) out[assign[i]].members.push_back(files[i].file_id);
    Rng rng(derive_seed(cfg.seed, 0xC1A5));
    for (auto& c : out) c.survivor = c.members[uniform_index(rng, c.members.size())];
    return out;
}

/// CSV with columns file_id, cluster_id, survivor (1 or 0).
inline std::string format_manifest(const std::vector<DuplicateCluster>& clusters) {
    std::ostringstream os;
    csv::write_row(os, {"file_id", "cluster_id", "survivor"});
    for (std::size_t c = 0; c < clusters.size(); ++c)
        for (const auto& m : clusters[c].members)
            csv::write_row(os, {m, std::to_string(c), m == clusters[c].survivor ? "1" : "0"});
    return os.str();
}

inline std::vector<DuplicateCluster> parse_manifest(std::istream& in) {
    const auto rows = csv::read_all(in);
    if (rows.empty() || rows[0].fields != std::vector<std::string>{"file_id", "cluster_id", "survivor"})
        throw ParseError("dedup manifest lacks its header", 1);
    std::map<std::size_t, DuplicateCluster> by_id;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r].fields;
        if (f.size() != 3 || (f[2] != "0" && f[2] != "1")) throw ParseError("malformed dedup manifest row", rows[r].line);
        std::size_t id;
        try {
            id = std::stoull(f[1]);
        } catch (const std::exception&) {
            throw ParseError("malformed cluster id", rows[r].line);
        }
        auto& c = by_id[id];
        c.members.push_back(f[0]);
        if (f[2] == "1") {
            if (!c.survivor.empty()) throw ParseError("cluster with two survivors", rows[r].line);
            c.survivor = f[0];
        }
    }
    std::vector<DuplicateCluster> out;
    for (auto& [_, c] : by_id) {
        if (c.survivor.empty()) throw ParseError("cluster without a survivor");
        out.push_back(std::move(c));
    }
    return out;
}

/// File ids that the manifest removes.
inline std::set<std::string> removed_files(const std::vector<DuplicateCluster>& clusters) {
    std::set<std::string> out;
    for (const auto& c : clusters)
        for (const auto& m : c.members)
            if (m != c.survivor) out.insert(m);
    return out;
}

struct CrossCorpusResult {
    std::set<std::string> removed_a, removed_b;
};

/// Byte-identical files present in both corpora are kept on one side only:
/// the side where some copy sits in a repository native to that corpus, if
/// only one side has such a copy; otherwise the side holding more copies, and
/// `a` on a tie.
inline CrossCorpusResult cross_corpus_dedup(const std::vector<FileVector>& a, const std::vector<FileVector>& b,
                                            const std::set<std::string>& native_a = {},
                                            const std::set<std::string>& native_b = {}) {
    std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>> by_digest;
    for (const auto& f : a) by_digest[f.digest].first.push_back(f.file_id);
    for (const auto& f : b) by_digest[f.digest].second.push_back(f.file_id);
    auto any_in = [](const std::vector<std::string>& ids, const std::set<std::string>& s) {
        return std::any_of(ids.begin(), ids.end(), [&](const std::string& id) { return s.count(id) != 0; });
    };
    CrossCorpusResult r;
    for (const auto& [_, sides] : by_digest) {
        const auto& [fa, fb] = sides;
        if (fa.empty() || fb.empty()) continue;
        const bool na = any_in(fa, native_a), nb = any_in(fb, native_b);
        const bool keep_a = na != nb ? na : fa.size() >= fb.size();
        if (keep_a) r.removed_b.insert(fb.begin(), fb.end());
        else r.removed_a.insert(fa.begin(), fa.end());
    }
    return r;
}

/// Python sources under `root`, keyed by their path relative to it.
inline std::vector<SourceFile> collect_sources(const std::filesystem::path& root) {
    std::vector<SourceFile> out;
    if (!std::filesystem::is_directory(root)) throw Error("not a directory: " + root.string());
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (!e.is_regular_file() || e.path().extension() != ".py") continue;
        out.push_back({std::filesystem::relative(e.path(), root).generic_string(), read_file(e.path())});
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.file_id < y.file_id; });
    return out;
}

/// Copies `src` to `dst` minus the removed files. Returns the number copied.
inline std::size_t apply_removals(const std::filesystem::path& src, const std::filesystem::path& dst,
                                  const std::set<std::string>& removed) {
    std::size_t copied = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(src)) {
        if (!e.is_regular_file()) continue;
        const auto rel = std::filesystem::relative(e.path(), src);
        if (removed.count(rel.generic_string())) continue;
        std::filesystem::create_directories((dst / rel).parent_path());
        std::filesystem::copy_file(e.path(), dst / rel, std::filesystem::copy_options::overwrite_existing);
        ++copied;
    }
    return copied;
}

}  // namespace cdt::dedup
