// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "cdt/embed/regimes.hpp"
#include "test_helpers.hpp"

using namespace cdt;
using namespace cdt::embed;

namespace {

EmbeddingConfig small(std::size_t min_count = 3) {
    EmbeddingConfig c;
    c.dim = 16;
    c.window = 3;
    c.min_count = min_count;
    c.epochs = 3;
    c.seed = 5;
    return c;
}

std::vector<Sentence> random_corpus(Rng& rng, std::size_t n, std::size_t vocab) {
    std::vector<Sentence> out(n);
    for (auto& s : out) {
        const auto len = 1 + uniform_index(rng, 8);
        for (std::uint64_t i = 0; i < len; ++i) s.push_back("w" + std::to_string(uniform_index(rng, vocab)));
    }
    return out;
}

}  // namespace

TEST_CASE("tokens below min_count are excluded", "[embed]") {
    const std::vector<Sentence> corpus = {{"a", "b", "a"}, {"a", "b", "c"}, {"c", "d", "c"}};
    const auto m = train_embedding(corpus, small(3));
    CHECK(m.contains("a"));
    CHECK(m.contains("c"));
    CHECK_FALSE(m.contains("b"));
    CHECK_FALSE(m.contains("d"));
    CHECK(m.size() == 2);
    for (std::size_t r = 0; r < m.size(); ++r) CHECK(m.count(r) >= 3);
}

TEST_CASE("a repeated sentence embeds every token with finite values", "[embed]") {
    const std::vector<Sentence> corpus(20, Sentence{"def", "load", "(", "path", ")", ":"});
    const auto m = train_embedding(corpus, small());
    CHECK(m.size() == 6);
    CHECK(m.table().size() == 6 * 16);
    for (float x : m.table()) CHECK(std::isfinite(x));
}

TEST_CASE("empty corpus is an error", "[embed]") {
    CHECK_THROWS_AS(train_embedding({}, small()), Error);
    CHECK_THROWS_AS(train_embedding({{}, {}}, small()), Error);
}

TEST_CASE("training is deterministic for a fixed seed", "[embed]") {
    Rng rng(3);
    const auto corpus = random_corpus(rng, 200, 30);
    const auto a = train_embedding(corpus, small());
    const auto b = train_embedding(corpus, small());
    CHECK(a.tokens() == b.tokens());
    CHECK(a.table() == b.table());
    auto other = small();
    other.seed = 6;
    CHECK(train_embedding(corpus, other).table() != a.table());
}

TEST_CASE("co-occurring tokens are closer than an isolated one", "[embed]") {
    // A and B always appear together; C only ever appears in sentences drawn
    // from a disjoint filler vocabulary.
    Rng rng(9);
    std::vector<Sentence> corpus;
    for (int i = 0; i < 400; ++i) {
        Sentence s;
        const bool ab = i % 2 == 0;
        for (int k = 0; k < 3; ++k) s.push_back((ab ? "f" : "g") + std::to_string(uniform_index(rng, 20)));
        if (ab) {
            s.insert(s.begin() + 1, {"A", "B"});
        } else {
            s.insert(s.begin() + 1, "C");
        }
        corpus.push_back(std::move(s));
    }
    auto cfg = small();
    cfg.epochs = 5;
    const auto m = train_embedding(corpus, cfg);
    const auto a = *embed_or_oov(m, "A"), b = *embed_or_oov(m, "B"), c = *embed_or_oov(m, "C");
    CHECK(cosine(a, b) > cosine(a, c));
}

TEST_CASE("embed_or_oov returns stored vectors and marks unknown tokens", "[embed]") {
    const std::vector<Sentence> corpus(5, Sentence{"x", "y"});
    const auto m = train_embedding(corpus, small());
    const auto v = embed_or_oov(m, "x");
    REQUIRE(v.has_value());
    CHECK(v->data() == m.row(*m.row_of("x")).data());
    CHECK_FALSE(embed_or_oov(m, "zzz").has_value());
}

TEST_CASE("OOV count equals a set-membership scan", "[embed][property]") {
    Rng rng(21);
    const auto train = random_corpus(rng, 150, 60);
    const auto m = train_embedding(train, small());
    const std::set<std::string> vocab(m.tokens().begin(), m.tokens().end());
    for (int trial = 0; trial < 20; ++trial) {
        const auto stream = random_corpus(rng, 40, 100);
        std::size_t total = 0, oov = 0;
        for (const auto& s : stream)
            for (const auto& t : s) {
                ++total;
                oov += vocab.count(t) == 0;
                CHECK(embed_or_oov(m, t).has_value() == (vocab.count(t) != 0));
            }
        const auto r = oov_report(m, stream);
        CHECK(r.total_tokens == total);
        CHECK(r.oov_tokens == oov);
        CHECK(r.oov_rate == Catch::Approx(static_cast<double>(oov) / static_cast<double>(total)));
    }
}

TEST_CASE("oov_report direct counts", "[embed]") {
    const auto m = train_embedding({{"a"}}, small(1));
    const auto r = oov_report(m, {{"a", "b", "b", "a"}});
    CHECK(r.total_tokens == 4);
    CHECK(r.oov_tokens == 2);
    CHECK(r.oov_rate == 0.5);
    CHECK(oov_report(m, {}).oov_rate == 0.0);
    CHECK(oov_report(m, {{"a", "b", "b", "a"}}, "d", OovCounting::Distinct).oov_rate == 0.5);

    Rng rng(4);
    const auto train = random_corpus(rng, 50, 20);
    CHECK(oov_report(train_embedding(train, small(1)), train).oov_rate == 0.0);
}

TEST_CASE("vocabulary grows monotonically with the corpus", "[embed][property]") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        auto corpus = random_corpus(rng, 60, 50);
        const auto ext = random_corpus(rng, 60, 80);
        const auto small_m = train_embedding(corpus, small());
        corpus.insert(corpus.end(), ext.begin(), ext.end());
        const auto big_m = train_embedding(corpus, small());
        for (const auto& t : small_m.tokens()) CHECK(big_m.contains(t));
        const auto probe = random_corpus(rng, 30, 100);
        CHECK(oov_report(big_m, probe).oov_rate <= oov_report(small_m, probe).oov_rate);
    }
}

TEST_CASE("regime corpora are nested", "[embed]") {
    using extract::Split;
    auto sample = [](std::string tok, std::string domain, Split split) {
        types::TypeSample s;
        s.identifier_tokens = {tok};
        s.domain = std::move(domain);
        s.split = split;
        return s;
    };
    const std::vector<types::TypeSample> src = {sample("a", "web", Split::Train), sample("b", "web", Split::Test)};
    const std::vector<types::TypeSample> tgt = {sample("c", "cal", Split::Train), sample("d", "cal", Split::Valid)};
    CHECK(regime_corpus(Regime::Source, src, tgt) == std::vector<Sentence>{{"a"}});
    CHECK(regime_corpus(Regime::Both, src, tgt) == std::vector<Sentence>{{"a"}, {"c"}});
    CHECK(regime_corpus(Regime::All, src, tgt) == std::vector<Sentence>{{"a"}, {"c"}, {"b"}, {"d"}});
    CHECK(parse_regime("both") == Regime::Both);
    CHECK_THROWS_AS(parse_regime("x"), ConfigError);
}

TEST_CASE("embedding files round-trip", "[embed]") {
    cdt::testing::TempDir dir;
    Rng rng(8);
    const auto m = train_embedding(random_corpus(rng, 80, 20), small());
    save(m, dir / "emb");
    const auto back = load(dir / "emb");
    CHECK(back.tokens() == m.tokens());
    CHECK(back.table() == m.table());
    CHECK(back.dim() == m.dim());
    write_file(dir / "bad.vec", "nope");
    write_file(dir / "bad.vocab", "");
    CHECK_THROWS_AS(load(dir / "bad"), ParseError);
}
