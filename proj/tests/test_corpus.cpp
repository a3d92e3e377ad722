// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "cdt/common/process.hpp"
#include "cdt/common/rng.hpp"
#include "cdt/corpus/miner.hpp"
#include "cdt/corpus/repo_list.hpp"
#include "cdt/corpus/snapshot.hpp"
#include "test_helpers.hpp"

using namespace cdt;
using namespace cdt::corpus;
using cdt::testing::TempDir;

namespace {

std::string hex_hash(Rng& rng) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string h;
    for (int i = 0; i < 40; ++i) h += kHex[uniform_index(rng, 16)];
    return h;
}

RepoRef random_ref(Rng& rng, int i) {
    RepoRef r;
    r.url = "https://github.com/owner" + std::to_string(uniform_index(rng, 1000)) + "/repo" +
            std::to_string(i) + ".git";
    r.commit_hash = hex_hash(rng);
    r.stars = uniform_index(rng, 20);
    for (auto f : {Framework::TypeChecker, Framework::MarkerA, Framework::MarkerB})
        if (uniform_index(rng, 2)) r.frameworks.insert(f);
    r.domain = domain_for(r.frameworks);
    return r;
}

std::string dependent_row(const std::string& owner_repo, const std::string& stars) {
    return R"(<div class="Box-row d-flex flex-items-center" data-test-id="dg-repo-pkg-dependent">
  <a data-hovercard-type="user" href="/)" + owner_repo.substr(0, owner_repo.find('/')) + R"(">o</a> /
  <a class="text-bold" data-hovercard-type="repository" href="/)" + owner_repo + R"(">r</a>
  <span class="color-fg-muted text-bold pl-3">
    <svg aria-hidden="true" class="octicon octicon-star" viewBox="0 0 16 16"><path d="M8"></path></svg>
    )" + stars + R"(
  </span>
</div>
)";
}

MiningConfig offline_config(const TempDir& dir, std::size_t limit) {
    MiningConfig cfg;
    cfg.per_framework_limit = limit;
    cfg.page_cache_dir = dir.path();
    cfg.request_delay = std::chrono::milliseconds{0};
    cfg.sources = {Source::GitHubDependents};
    return cfg;
}

}  // namespace

TEST_CASE("repo list keeps the published url and hash columns", "[corpus]") {
    RepoRef a{"https://github.com/arXiv/arxiv-base.git", "b20db1f41731f841106a0b53fb64fc3faa056b4f", 12,
              {Framework::TypeChecker, Framework::MarkerB}, Domain::Web};
    RepoRef b{"https://github.com/Double327/CDCSonCNN.git", "77d28b074d67e9f96ffdfcb94e24762fbe749457", 3,
              {Framework::TypeChecker, Framework::MarkerA}, Domain::Cal};
    const auto text = format_repo_list({a, b});
    std::istringstream lines(text);
    std::string header, row1, row2;
    std::getline(lines, header);
    std::getline(lines, row1);
    std::getline(lines, row2);
    CHECK(header == "url,hash,stars,frameworks,domain");
    CHECK(row1.starts_with("https://github.com/arXiv/arxiv-base.git,b20db1f41731f841106a0b53fb64fc3faa056b4f,"));
    CHECK(row2.starts_with("https://github.com/Double327/CDCSonCNN.git,77d28b074d67e9f96ffdfcb94e24762fbe749457,"));

    std::istringstream in(text);
    const auto back = parse_repo_list(in);
    REQUIRE(back.size() == 2);
    CHECK(back[0] == a);
    CHECK(back[1] == b);
}

TEST_CASE("empty repo list exports as header only", "[corpus]") {
    CHECK(format_repo_list({}) == "url,hash,stars,frameworks,domain\n");
    std::istringstream in("url,hash,stars,frameworks,domain\n");
    CHECK(parse_repo_list(in).empty());
}

TEST_CASE("repo list round-trips random refs", "[corpus][property]") {
    Rng rng(17);
    TempDir dir;
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<RepoRef> refs;
        for (int i = 0; i < 50; ++i) refs.push_back(random_ref(rng, i));
        export_repo_list(refs, dir / "list.csv");
        CHECK(import_repo_list(dir / "list.csv") == refs);
    }
}

TEST_CASE("malformed repo list rows name their line", "[corpus]") {
    std::istringstream bad_hash(
        "url,hash,stars,frameworks,domain\n"
        "https://github.com/a/b.git,b20db1f41731f841106a0b53fb64fc3faa056b4f,1,mypy,\n"
        "https://github.com/a/c.git,XYZ,1,mypy,\n");
    try {
        parse_repo_list(bad_hash);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    std::istringstream bad_stars("url,hash,stars,frameworks,domain\n"
                                 "u,b20db1f41731f841106a0b53fb64fc3faa056b4f,-4,mypy,\n");
    CHECK_THROWS_AS(parse_repo_list(bad_stars), ParseError);
    std::istringstream bad_domain("url,hash,stars,frameworks,domain\n"
                                  "u,b20db1f41731f841106a0b53fb64fc3faa056b4f,4,mypy;flask,both\n");
    CHECK_THROWS_AS(parse_repo_list(bad_domain), ParseError);
}

TEST_CASE("sort_by_stars breaks ties by url", "[corpus]") {
    CHECK(sort_by_stars({}).empty());
    const std::string h(40, 'a');
    auto sorted = sort_by_stars({{"c", h, 3, {}, {}}, {"b", h, 7, {}, {}}, {"a", h, 7, {}, {}}});
    REQUIRE(sorted.size() == 3);
    CHECK((sorted[0].url == "a" && sorted[0].stars == 7));
    CHECK((sorted[1].url == "b" && sorted[1].stars == 7));
    CHECK((sorted[2].url == "c" && sorted[2].stars == 3));
}

TEST_CASE("sort_by_stars matches an insertion-sort oracle", "[corpus][property]") {
    Rng rng(5);
    std::vector<RepoRef> refs;
    for (int i = 0; i < 100; ++i) refs.push_back(random_ref(rng, i));
    // Oracle: repeatedly extract the maximum by (stars desc, url asc).
    std::vector<RepoRef> pool = refs, expected;
    while (!pool.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < pool.size(); ++i) {
            if (pool[i].stars > pool[best].stars ||
                (pool[i].stars == pool[best].stars && pool[i].url < pool[best].url))
                best = i;
        }
        expected.push_back(pool[best]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
    }
    CHECK(sort_by_stars(refs) == expected);
}

TEST_CASE("merge_and_intersect places triple-framework repos in both subsets", "[corpus]") {
    const std::string h(40, 'b');
    std::map<Framework, std::vector<RepoRef>> lists;
    lists[Framework::TypeChecker] = {{"R", h, 5, {Framework::TypeChecker}, {}},
                                     {"S", h, 1, {Framework::TypeChecker}, {}}};
    lists[Framework::MarkerA] = {{"R", h, 9, {Framework::MarkerA}, {}},
                                 {"S", h, 1, {Framework::MarkerA}, {}}};
    lists[Framework::MarkerB] = {{"R", h, 2, {Framework::MarkerB}, {}},
                                 {"T", h, 2, {Framework::MarkerB}, {}}};
    auto out = merge_and_intersect(lists);
    REQUIRE(out[Domain::Cal].size() == 2);
    REQUIRE(out[Domain::Web].size() == 1);
    CHECK(out[Domain::Cal][0].url == "R");
    CHECK(out[Domain::Cal][0].domain == Domain::Both);
    CHECK(out[Domain::Cal][0].stars == 9);
    CHECK(out[Domain::Cal][1].domain == Domain::Cal);
    CHECK(out[Domain::Web][0].url == "R");
    CHECK(out[Domain::Web][0].domain == Domain::Both);
}

TEST_CASE("merge_and_intersect of disjoint lists is empty", "[corpus]") {
    const std::string h(40, 'c');
    std::map<Framework, std::vector<RepoRef>> lists;
    lists[Framework::TypeChecker] = {{"a", h, 1, {Framework::TypeChecker}, {}}};
    lists[Framework::MarkerA] = {{"b", h, 1, {Framework::MarkerA}, {}}};
    lists[Framework::MarkerB] = {{"c", h, 1, {Framework::MarkerB}, {}}};
    auto out = merge_and_intersect(lists);
    CHECK(out[Domain::Cal].empty());
    CHECK(out[Domain::Web].empty());
    lists.erase(Framework::MarkerB);
    CHECK_THROWS_AS(merge_and_intersect(lists), ConfigError);
}

TEST_CASE("merge_and_intersect matches brute-force set algebra", "[corpus][property]") {
    Rng rng(99);
    for (int trial = 0; trial < 25; ++trial) {
        std::map<Framework, std::vector<RepoRef>> lists{
            {Framework::TypeChecker, {}}, {Framework::MarkerA, {}}, {Framework::MarkerB, {}}};
        std::map<std::string, std::set<Framework>> truth;
        for (int i = 0; i < 20; ++i) {
            auto r = random_ref(rng, i);
            for (auto f : r.frameworks) {
                lists[f].push_back({r.url, r.commit_hash, r.stars, {f}, {}});
                truth[r.url].insert(f);
            }
        }
        auto out = merge_and_intersect(lists);
        std::set<std::string> cal, web, cal_expected, web_expected;
        for (const auto& r : out[Domain::Cal]) cal.insert(r.url);
        for (const auto& r : out[Domain::Web]) web.insert(r.url);
        for (const auto& [url, fw] : truth) {
            if (fw.count(Framework::TypeChecker) && fw.count(Framework::MarkerA)) cal_expected.insert(url);
            if (fw.count(Framework::TypeChecker) && fw.count(Framework::MarkerB)) web_expected.insert(url);
        }
        CHECK(cal == cal_expected);
        CHECK(web == web_expected);
        for (const auto& r : out[Domain::Cal])
            if (web.count(r.url)) CHECK(r.domain == Domain::Both);
    }
}

TEST_CASE("dependents page parser reads rows, stars and the next link", "[corpus]") {
    const std::string html = "<html><body><div id=\"dependents\">" + dependent_row("alice/one", "1,204") +
                             dependent_row("bob/two", "7") +
                             R"(<div class="BtnGroup"><a class="btn" href="https://github.com/python/mypy/network/dependents?dependents_after=ABC&amp;x=1">Next</a></div></body></html>)";
    auto page = parse_github_dependents(html);
    REQUIRE(page.entries.size() == 2);
    CHECK(page.entries[0].url == "https://github.com/alice/one.git");
    CHECK(page.entries[0].stars == 1204);
    CHECK(page.entries[1].stars == 7);
    REQUIRE(page.next_url);
    CHECK(*page.next_url == "https://github.com/python/mypy/network/dependents?dependents_after=ABC&x=1");
    CHECK_THROWS_AS(parse_github_dependents("<html>unexpected</html>"), ParseError);
    CHECK(parse_github_dependents("<div class=\"blankslate\">none</div>").entries.empty());
}

TEST_CASE("discover_dependents from an empty cached page yields nothing", "[corpus]") {
    TempDir dir;
    auto cfg = offline_config(dir, 1);
    PageCache cache(dir.path());
    cache.put(github_dependents_url(cfg, "mypy"), "");
    Fetcher fetcher(cache);
    HashResolver resolver(cache, false);
    auto res = discover_dependents("mypy", cfg, fetcher, resolver);
    CHECK(res.refs.empty());
    CHECK(res.warnings == 0);
}

TEST_CASE("discover_dependents honours the limit in page order", "[corpus]") {
    TempDir dir;
    auto cfg = offline_config(dir, 2);
    PageCache cache(dir.path());
    cache.put(github_dependents_url(cfg, "numpy"),
              dependent_row("a/first", "3") + dependent_row("b/second", "10") + dependent_row("c/third", "99"));
    cache.put(HashResolver::key("https://github.com/a/first.git"), std::string(40, '1') + "\tHEAD\n");
    cache.put(HashResolver::key("https://github.com/b/second.git"), std::string(40, '2') + "\tHEAD\n");
    cache.put(HashResolver::key("https://github.com/c/third.git"), std::string(40, '3') + "\tHEAD\n");
    Fetcher fetcher(cache);
    HashResolver resolver(cache, false);
    auto res = discover_dependents("numpy", cfg, fetcher, resolver);
    REQUIRE(res.refs.size() == 2);
    CHECK(res.refs[0].url == "https://github.com/a/first.git");
    CHECK(res.refs[1].url == "https://github.com/b/second.git");
    CHECK(res.refs[0].frameworks == std::set<Framework>{Framework::MarkerA});
    CHECK(res.refs[1].commit_hash == std::string(40, '2'));

    // Re-running from the same cache is reproducible.
    CHECK(discover_dependents("numpy", cfg, fetcher, resolver).refs == res.refs);
}

TEST_CASE("discover_dependents follows pagination, dedups and counts malformed pages", "[corpus]") {
    TempDir dir;
    auto cfg = offline_config(dir, 10);
    cfg.sources = {Source::GitHubDependents, Source::LibrariesApi};
    PageCache cache(dir.path());
    const auto first = github_dependents_url(cfg, "flask");
    const std::string second = first + "?dependents_after=P2";
    cache.put(first, dependent_row("a/x", "1") +
                         "<a class=\"btn\" href=\"" + second + "\">Next</a>");
    cache.put(second, "<html>garbled without rows</html>");
    cache.put(libraries_url(cfg, "flask", 1),
              R"([{"full_name":"a/x","stargazers_count":40},{"full_name":"d/y","stargazers_count":2}])");
    for (const auto* u : {"https://github.com/a/x.git", "https://github.com/d/y.git"})
        cache.put(HashResolver::key(u), std::string(40, 'e'));
    Fetcher fetcher(cache);
    HashResolver resolver(cache, false);
    auto res = discover_dependents("flask", cfg, fetcher, resolver);
    REQUIRE(res.refs.size() == 2);
    CHECK(res.refs[0].url == "https://github.com/a/x.git");
    CHECK(res.refs[0].stars == 40);  // maximum over both sources
    CHECK(res.warnings == 1);
}

TEST_CASE("fetcher reports rate limiting and unreachable networks", "[corpus]") {
    TempDir dir;
    PageCache cache(dir.path());
    auto limiter = std::make_shared<RateLimiter>(std::chrono::milliseconds{5});
    Fetcher limited(cache, [](const std::string&) { return HttpResponse{429, "", std::chrono::milliseconds{30}}; },
                    limiter);
    try {
        limited.fetch("https://example.invalid/a");
        FAIL("expected RateLimited");
    } catch (const RateLimited& e) {
        CHECK(e.delay() == std::chrono::milliseconds{30});
        CHECK(e.retryable());
    }
    Fetcher down(cache, [](const std::string&) { return HttpResponse{}; }, limiter);
    CHECK_THROWS_AS(down.fetch("https://example.invalid/b"), NetworkError);
    int calls = 0;
    Fetcher flaky(cache,
                  [&calls](const std::string&) {
                      return ++calls < 3 ? HttpResponse{} : HttpResponse{200, "ok", {}};
                  },
                  limiter);
    CHECK(flaky.fetch_with_retry("https://example.invalid/c") == "ok");
    CHECK(calls == 3);
    // Now served from the cache without the live function.
    Fetcher offline(cache);
    CHECK(offline.fetch("https://example.invalid/c") == "ok");
    CHECK_THROWS_AS(offline.fetch("https://example.invalid/d"), NetworkError);
}

TEST_CASE("snapshot pins the commit and is idempotent", "[corpus][git]") {
    TempDir dir;
    const auto origin = dir / "origin";
    std::filesystem::create_directories(origin);
    auto git = [&](std::vector<std::string> args) {
        std::vector<std::string> argv = {"git", "-C", origin.string(), "-c", "user.name=t",
                                         "-c", "user.email=t@example.com"};
        argv.insert(argv.end(), args.begin(), args.end());
        auto r = run_process(argv);
        REQUIRE(r.exit_code == 0);
        return std::string(trim(r.output));
    };
    git({"init", "-q"});
    std::ofstream(origin / "a.py") << "x: int = 1\n";
    git({"add", "a.py"});
    git({"commit", "-q", "-m", "first"});
    const std::string first = git({"rev-parse", "HEAD"});
    std::ofstream(origin / "b.py") << "y: str = 'b'\n";
    git({"add", "b.py"});
    git({"commit", "-q", "-m", "second"});

    RepoRef ref{origin.string(), first, 0, {}, {}};
    const auto work = dir / "work";
    const auto path = snapshot(ref, work);
    CHECK(std::filesystem::exists(path / "a.py"));
    CHECK_FALSE(std::filesystem::exists(path / "b.py"));

    // The second call must not need the origin.
    std::filesystem::remove_all(origin);
    CHECK(snapshot(ref, work) == path);

    RepoRef missing{path.string(), std::string(40, 'f'), 0, {}, {}};
    try {
        snapshot(missing, dir / "work2");
        FAIL("expected SnapshotError");
    } catch (const SnapshotError& e) {
        CHECK(e.kind() == SnapshotError::Kind::HashNotFound);
    }
}
