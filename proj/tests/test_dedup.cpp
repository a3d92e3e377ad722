// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cdt/common/files.hpp"
#include "cdt/common/rng.hpp"
#include "cdt/dedup/clusters.hpp"
#include "cdt/dedup/repos.hpp"

using namespace cdt;
using namespace cdt::dedup;

namespace {

corpus::RepoRef repo(const std::string& name) {
    corpus::RepoRef r;
    r.url = "https://github.com/o/" + name;
    r.commit_hash = std::string(40, 'a');
    return r;
}

std::vector<corpus::RepoRef> repos(const std::string& prefix, int n) {
    std::vector<corpus::RepoRef> out;
    for (int i = 0; i < n; ++i) out.push_back(repo(prefix + std::to_string(i)));
    return out;
}

std::set<std::string> urls(const std::vector<corpus::RepoRef>& v) {
    std::set<std::string> out;
    for (const auto& r : v) out.insert(r.url);
    return out;
}

bool disjoint(const std::set<std::string>& a, const std::set<std::string>& b) {
    for (const auto& x : a)
        if (b.count(x)) return false;
    return true;
}

std::string statement_file(const std::vector<std::string>& ids) {
    std::string out;
    for (std::size_t i = 0; i + 1 < ids.size(); i += 2) out += ids[i] + " = " + ids[i + 1] + "\n";
    if (ids.size() % 2) out += ids.back() + "\n";
    return out;
}

// Every pair, dense dot products in term order.
std::vector<std::size_t> brute_force_assignment(const VectorSpace& vs, double threshold, std::size_t k) {
    const std::size_t n = vs.files.size();
    std::vector<std::vector<double>> dense(n, std::vector<double>(vs.terms.size(), 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& [t, w] : vs.files[i].weights) dense[i][t] = w;
    std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t t = 0; t < vs.terms.size(); ++t) sim[i][j] += dense[i][t] * dense[j][t];
    std::vector<std::set<std::size_t>> top(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> order;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) order.push_back(j);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sim[i][a] > sim[i][b]; });
        for (std::size_t r = 0; r < std::min(k, order.size()); ++r) top[i].insert(order[r]);
    }
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const bool linked = vs.files[i].digest == vs.files[j].digest ||
                                (top[i].count(j) && top[j].count(i) && sim[i][j] >= threshold);
            if (i != j && linked) adj[i].push_back(j);
        }
    std::vector<std::size_t> comp(n, n);
    std::size_t next = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (comp[s] != n) continue;
        std::vector<std::size_t> stack{s};
        comp[s] = next;
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            for (auto v : adj[u])
                if (comp[v] == n) comp[v] = next, stack.push_back(v);
        }
        ++next;
    }
    return comp;
}

std::vector<SourceFile> random_corpus(Rng& rng, std::size_t n_files) {
    std::vector<std::vector<std::string>> bases;
    std::vector<SourceFile> out;
    for (std::size_t f = 0; f < n_files; ++f) {
        std::vector<std::string> ids;
        if (!bases.empty() && uniform_index(rng, 3) != 0) {
            ids = bases[uniform_index(rng, bases.size())];
            const auto edits = uniform_index(rng, 4);
            for (std::uint64_t e = 0; e < edits; ++e)
                ids[uniform_index(rng, ids.size())] = "v" + std::to_string(uniform_index(rng, 300));
        } else {
            const auto len = 10 + uniform_index(rng, 30);
            for (std::uint64_t i = 0; i < len; ++i) ids.push_back("v" + std::to_string(uniform_index(rng, 300)));
            bases.push_back(ids);
        }
        out.push_back({"f" + std::to_string(f) + ".py", statement_file(ids)});
    }
    return out;
}

}  // namespace

TEST_CASE("repo dedup leaves disjoint inputs alone", "[dedup]") {
    const auto a = repos("a", 5), b = repos("b", 3);
    const auto r = dedup_repos(a, b, 7);
    CHECK(r.a == a);
    CHECK(r.b == b);
    CHECK(r.removed_from_a.empty());
    CHECK(r.removed_from_b.empty());
}

TEST_CASE("shared repos are split in half", "[dedup]") {
    auto a = repos("a", 3), b = repos("b", 2);
    const auto shared = repos("s", 4);
    a.insert(a.end(), shared.begin(), shared.end());
    b.insert(b.begin(), shared.begin(), shared.end());
    const auto r = dedup_repos(a, b, 3);
    CHECK(r.removed_from_a.size() == 2);
    CHECK(r.removed_from_b.size() == 2);
    std::set<std::string> removed(r.removed_from_a.begin(), r.removed_from_a.end());
    removed.insert(r.removed_from_b.begin(), r.removed_from_b.end());
    CHECK(removed == urls(shared));
    CHECK(disjoint(urls(r.a), urls(r.b)));
    CHECK(r.a.size() == 5);
    CHECK(r.b.size() == 4);
}

TEST_CASE("seven shared repos split 4/3 under two seeds", "[dedup]") {
    const auto shared = repos("s", 7);
    auto a = repos("a", 2);
    a.insert(a.end(), shared.begin(), shared.end());
    const auto b = shared;
    std::set<std::vector<std::string>> partitions;
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        const auto r = dedup_repos(a, b, seed);
        CHECK(r.removed_from_a.size() == 4);
        CHECK(r.removed_from_b.size() == 3);
        CHECK(disjoint(urls(r.a), urls(r.b)));
        partitions.insert(r.removed_from_a);
    }
    CHECK(partitions.size() > 1);
}

TEST_CASE("repo dedup outputs are URL-disjoint for every seed", "[dedup][property]") {
    Rng rng(11);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        std::vector<corpus::RepoRef> a, b;
        for (int i = 0; i < 30; ++i) {
            const auto which = uniform_index(rng, 3);
            if (which != 1) a.push_back(repo("r" + std::to_string(i)));
            if (which != 0) b.push_back(repo("r" + std::to_string(i)));
        }
        const auto r = dedup_repos(a, b, seed);
        REQUIRE(disjoint(urls(r.a), urls(r.b)));
        const auto shared = r.removed_from_a.size() + r.removed_from_b.size();
        CHECK(r.removed_from_a.size() == (shared + 1) / 2);
        CHECK(r.a.size() + r.removed_from_a.size() == a.size());
        CHECK(r.b.size() + r.removed_from_b.size() == b.size());
    }
}

TEST_CASE("file vectors", "[dedup]") {
    const std::string text = "import os\nx = os.path.join(\"a\", 1)\n";
    const auto vs = build_file_vectors({{"p", text}, {"q", text}, {"r", "1 + 2\n# note\n"}});
    CHECK(vs.files[0].weights == vs.files[1].weights);
    CHECK(vs.files[0].digest == vs.files[1].digest);
    CHECK(vs.files[2].weights.empty());
    CHECK_FALSE(vs.files[0].fallback);
    for (const auto& [t, w] : vs.files[0].weights) CHECK(w > 0);
    CHECK(vs.weights_of(0).count("os") == 1);
    CHECK(vs.weights_of(0).count("a") == 0);

    const auto bad = build_file_vectors({{"x", "def f(:\n  return \"unterminated\n"}});
    CHECK(bad.files[0].fallback);
}

TEST_CASE("tf-idf matches a hand computation", "[dedup]") {
    // df: a=2, b=1, c=1, d=1 over 3 files
    const auto vs = build_file_vectors({{"1", "a = b\n"}, {"2", "a = c\n"}, {"3", "d = d\n"}});
    const auto w1 = vs.weights_of(0);
    REQUIRE(w1.size() == 2);
    CHECK(w1.at("a") == Catch::Approx(0.6053485081062916).epsilon(1e-12));
    CHECK(w1.at("b") == Catch::Approx(0.7959605415681652).epsilon(1e-12));
    const auto w3 = vs.weights_of(2);
    REQUIRE(w3.size() == 1);
    CHECK(w3.at("d") == Catch::Approx(1.0));
}

TEST_CASE("orthogonal files stay singletons", "[dedup]") {
    const auto vs = build_file_vectors({{"1", "a\n"}, {"2", "b\n"}, {"3", "c\n"}});
    const auto cl = cluster_duplicates(vs.files, {});
    REQUIRE(cl.size() == 3);
    for (const auto& c : cl) {
        CHECK(c.members.size() == 1);
        CHECK(c.survivor == c.members[0]);
    }
}

TEST_CASE("identical pair plus orthogonal file", "[dedup]") {
    const auto vs = build_file_vectors({{"1", "a = b\n"}, {"2", "z\n"}, {"3", "a = b  \n"}});
    const auto cl = cluster_duplicates(vs.files, {0.95, 10, 1});
    REQUIRE(cl.size() == 2);
    CHECK(cl[0].members == std::vector<std::string>{"1", "3"});
    CHECK(cl[1].members == std::vector<std::string>{"2"});
    CHECK((cl[0].survivor == "1" || cl[0].survivor == "3"));
}

TEST_CASE("invalid clustering parameters", "[dedup]") {
    const auto vs = build_file_vectors({{"1", "a\n"}});
    CHECK_THROWS_AS(cluster_duplicates(vs.files, {0.0, 10, 1}), ConfigError);
    CHECK_THROWS_AS(cluster_duplicates(vs.files, {1.5, 10, 1}), ConfigError);
    CHECK_THROWS_AS(cluster_duplicates(vs.files, {0.9, 0, 1}), ConfigError);
}

TEST_CASE("clustering agrees with the all-pairs oracle", "[dedup][property]") {
    Rng rng(2024);
    for (int round = 0; round < 12; ++round) {
        const std::size_t n = 20 + uniform_index(rng, 181);
        auto files = random_corpus(rng, n);
        // a few byte-identical copies
        for (int c = 0; c < 5; ++c) files.push_back({"copy" + std::to_string(c), files[uniform_index(rng, n)].text});
        const auto vs = build_file_vectors(files);
        for (double threshold : {0.5, 0.8, 0.95, 1.0})
            for (std::size_t k : {1u, 3u, 10u}) {
                const DedupConfig cfg{threshold, k, 5};
                REQUIRE(cluster_assignment(vs.files, cfg) == brute_force_assignment(vs, threshold, k));
            }
    }
}

TEST_CASE("cluster invariants", "[dedup][property]") {
    Rng rng(99);
    for (int round = 0; round < 10; ++round) {
        auto files = random_corpus(rng, 120);
        for (int c = 0; c < 6; ++c) files.push_back({"dup" + std::to_string(c), files[uniform_index(rng, 120)].text});
        const auto vs = build_file_vectors(files);
        for (double threshold : {0.3, 0.9, 1.0}) {
            const auto cl = cluster_duplicates(vs.files, {threshold, 10, static_cast<std::uint64_t>(round)});
            std::map<std::string, std::size_t> where;
            std::set<std::string> survivors;
            for (std::size_t c = 0; c < cl.size(); ++c) {
                REQUIRE_FALSE(cl[c].members.empty());
                CHECK(std::find(cl[c].members.begin(), cl[c].members.end(), cl[c].survivor) != cl[c].members.end());
                survivors.insert(cl[c].survivor);
                for (const auto& m : cl[c].members) CHECK(where.emplace(m, c).second);
            }
            CHECK(where.size() == files.size());
            CHECK(survivors.size() == cl.size());
            CHECK(survivors.size() + removed_files(cl).size() == files.size());
            for (std::size_t i = 0; i < files.size(); ++i)
                for (std::size_t j = i + 1; j < files.size(); ++j)
                    if (files[i].text == files[j].text) CHECK(where[files[i].file_id] == where[files[j].file_id]);
        }
    }
}

TEST_CASE("clustering survivors again yields singletons", "[dedup][property]") {
    Rng rng(5);
    for (int round = 0; round < 6; ++round) {
        auto files = random_corpus(rng, 150);
        const auto vs = build_file_vectors(files);
        const DedupConfig cfg{0.95, 10, 3};
        const auto removed = removed_files(cluster_duplicates(vs.files, cfg));
        std::vector<FileVector> kept;
        for (const auto& f : vs.files)
            if (!removed.count(f.file_id)) kept.push_back(f);
        const auto again = cluster_duplicates(kept, cfg);
        for (const auto& c : again) CHECK(c.members.size() == 1);
    }
}

TEST_CASE("survivor draws are seeded", "[dedup]") {
    std::vector<SourceFile> files;
    for (int i = 0; i < 40; ++i) files.push_back({"f" + std::to_string(i), "same = thing\n"});
    const auto vs = build_file_vectors(files);
    CHECK(cluster_duplicates(vs.files, {0.95, 10, 1})[0].survivor ==
          cluster_duplicates(vs.files, {0.95, 10, 1})[0].survivor);
    std::set<std::string> seen;
    for (std::uint64_t s = 0; s < 20; ++s) seen.insert(cluster_duplicates(vs.files, {0.95, 10, s})[0].survivor);
    CHECK(seen.size() > 3);
}

TEST_CASE("manifest round trip", "[dedup]") {
    const auto vs = build_file_vectors({{"a/1.py", "a = b\n"}, {"a/2.py", "z\n"}, {"b,3.py", "a = b\n"}});
    const auto cl = cluster_duplicates(vs.files, {});
    std::istringstream in(format_manifest(cl));
    const auto back = parse_manifest(in);
    REQUIRE(back.size() == cl.size());
    for (std::size_t i = 0; i < cl.size(); ++i) {
        CHECK(back[i].members == cl[i].members);
        CHECK(back[i].survivor == cl[i].survivor);
    }
    std::istringstream bad("file_id,cluster_id,survivor\nx,0,2\n");
    CHECK_THROWS_AS(parse_manifest(bad), ParseError);
    std::istringstream orphan("file_id,cluster_id,survivor\nx,0,0\n");
    CHECK_THROWS_AS(parse_manifest(orphan), ParseError);
}

TEST_CASE("cross-corpus duplicates are kept on one side", "[dedup]") {
    const auto va = build_file_vectors({{"a1", "x = y\n"}, {"a2", "p = q\n"}, {"a3", "k\n"}}).files;
    const auto vb = build_file_vectors({{"b1", "x = y\n"}, {"b2", "p = q\n"}, {"b3", "p = q\n"}}).files;
    const auto r = cross_corpus_dedup(va, vb);
    CHECK(r.removed_b == std::set<std::string>{"b1"});
    CHECK(r.removed_a == std::set<std::string>{"a2"});
    const auto native = cross_corpus_dedup(va, vb, {}, {"b1"});
    CHECK(native.removed_a == std::set<std::string>{"a1", "a2"});
    CHECK(native.removed_b.empty());
    const auto both_native = cross_corpus_dedup(va, vb, {"a2"}, {"b2"});
    CHECK(both_native.removed_a == std::set<std::string>{"a2"});
    CHECK(both_native.removed_b == std::set<std::string>{"b1"});
}

TEST_CASE("removals are applied to a snapshot tree", "[dedup]") {
    const auto root = std::filesystem::temp_directory_path() / "cdt_dedup_tree";
    std::filesystem::remove_all(root);
    write_file(root / "src/p/a.py", "a = b\n");
    write_file(root / "src/p/b.py", "a = b\n");
    write_file(root / "src/q/c.py", "c = d\n");
    write_file(root / "src/q/notes.txt", "hi\n");
    const auto sources = collect_sources(root / "src");
    REQUIRE(sources.size() == 3);
    CHECK(sources[0].file_id == "p/a.py");
    const auto cl = cluster_duplicates(build_file_vectors(sources).files, {});
    const auto removed = removed_files(cl);
    CHECK(removed.size() == 1);
    CHECK(apply_removals(root / "src", root / "dst", removed) == 3);
    CHECK(collect_sources(root / "dst").size() == 2);
    std::filesystem::remove_all(root);
}
