#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mindgym/diversity.hpp"
#include "mindgym/mock_backend.hpp"

using namespace mindgym;

TEST_CASE("cosine similarity exact cases") {
    REQUIRE(cosine_similarity({1, 0, 2}, {1, 0, 2}) == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(cosine_similarity({1, 0}, {0, 1}) == Catch::Approx(0.0).margin(1e-9));
    // (1,2,2)·(2,1,2)=8, norms 3 and 3 => 8/9
    REQUIRE(cosine_similarity({1, 2, 2}, {2, 1, 2}) == Catch::Approx(8.0 / 9.0).margin(1e-9));
}

TEST_CASE("cosine similarity error cases") {
    REQUIRE_THROWS_AS(cosine_similarity({1, 2}, {1, 2, 3}), DimensionMismatch);
    REQUIRE_THROWS_AS(cosine_similarity({}, {}), DimensionMismatch);
    REQUIRE_THROWS_AS(cosine_similarity({0, 0}, {1, 2}), ZeroVector);
    REQUIRE_THROWS_AS(cosine_similarity({1, 2}, {0, 0}), ZeroVector);
}

TEST_CASE("cosine similarity is symmetric and positive-scale invariant") {
    std::mt19937_64 eng(424242);
    std::uniform_real_distribution<double> coord(-10.0, 10.0);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    std::uniform_int_distribution<int> dim(1, 16);
    int checked = 0;
    for (int i = 0; i < 10000; ++i) {
        int d = dim(eng);
        std::vector<double> a(d), b(d);
        for (double& x : a) x = coord(eng);
        for (double& x : b) x = coord(eng);
        auto nonzero = [](const std::vector<double>& v) {
            for (double x : v)
                if (x != 0.0) return true;
            return false;
        };
        if (!nonzero(a) || !nonzero(b)) continue;
        double s = cosine_similarity(a, b);
        REQUIRE(cosine_similarity(b, a) == Catch::Approx(s).margin(1e-12));
        double k = scale(eng);
        std::vector<double> a2 = a;
        for (double& x : a2) x *= k;
        REQUIRE(cosine_similarity(a2, b) == Catch::Approx(s).margin(1e-9));
        REQUIRE(s >= -1.0 - 1e-12);
        REQUIRE(s <= 1.0 + 1e-12);
        ++checked;
    }
    REQUIRE(checked == 10000);
}

TEST_CASE("pool admission semantics") {
    DiversityPool pool(0.85);

    SECTION("empty pool always admits") {
        auto r = pool.admit_vector("a", {1.0, 0.0});
        REQUIRE(std::holds_alternative<Admitted>(r));
        REQUIRE(pool.size() == 1);
    }
    SECTION("near-duplicate is rejected with max similarity and nearest id") {
        pool.admit_vector("a", {1.0, 0.0});
        pool.admit_vector("b", {0.0, 1.0});
        auto r = pool.admit_vector("dup", {1.0, 0.01});
        REQUIRE(std::holds_alternative<Rejected>(r));
        auto rej = std::get<Rejected>(r);
        REQUIRE(rej.nearest_id == "a");
        REQUIRE(rej.max_similarity > 0.85);
        REQUIRE(pool.size() == 2);
    }
    SECTION("similarity exactly at the threshold admits (tie admits)") {
        DiversityPool p(0.8);
        p.admit_vector("a", {1.0, 0.0});
        // cos((1,0),(4,3)) = 4/5 = 0.8 exactly
        auto r = p.admit_vector("tie", {4.0, 3.0});
        REQUIRE(std::holds_alternative<Admitted>(r));
    }
    SECTION("dimension mismatch against the pool raises") {
        pool.admit_vector("a", {1.0, 0.0});
        REQUIRE_THROWS_AS(pool.admit_vector("b", {1.0, 0.0, 0.0}), DimensionMismatch);
    }
    SECTION("threshold must lie strictly inside (0,1)") {
        REQUIRE_THROWS_AS(DiversityPool(0.0), ConfigError);
        REQUIRE_THROWS_AS(DiversityPool(1.0), ConfigError);
        REQUIRE_THROWS_AS(DiversityPool(-0.5), ConfigError);
        REQUIRE_NOTHROW(DiversityPool(0.5));
    }
}

TEST_CASE("filled pool satisfies the pairwise invariant") {
    MockBackend embedder(7);
    DiversityPool pool(0.85);
    int counter = 0;
    auto generator = [&](int) {
        ++counter;
        return PoolCandidate{"c" + std::to_string(counter),
                             "candidate text number " + std::to_string(counter)};
    };
    auto ids = fill_pool(generator, pool, 50, 10, embedder);
    REQUIRE(ids.size() == 50);
    auto entries = pool.entries();
    REQUIRE(entries.size() == 50);
    for (std::size_t i = 0; i < entries.size(); ++i)
        for (std::size_t j = i + 1; j < entries.size(); ++j)
            REQUIRE(cosine_similarity(entries[i].vector, entries[j].vector) <= 0.85);
}

TEST_CASE("an adversarial constant generator starves at exactly max_regenerations") {
    MockBackend embedder(7);
    DiversityPool pool(0.85);
    // the first slot admits (empty pool); the second slot always regenerates
    // the same text, whose self-similarity is 1
    int calls = 0;
    auto generator = [&](int) {
        ++calls;
        return PoolCandidate{"c" + std::to_string(calls), "always the same text"};
    };
    REQUIRE_THROWS_AS(fill_pool(generator, pool, 2, 5, embedder), PoolStarvation);
    // 1 admitted + exactly 5 rejected tries for the starved slot
    REQUIRE(calls == 1 + 5);
    REQUIRE(pool.size() == 1);
}

TEST_CASE("snapshot lists threshold, dimension and every entry") {
    DiversityPool pool(0.85);
    pool.admit_vector("a", {1.0, 0.0});
    pool.admit_vector("b", {0.0, 1.0});
    std::string snap = pool.snapshot();
    auto lines = split_lines(snap);
    nlohmann::json header = nlohmann::json::parse(lines[0]);
    REQUIRE(header["threshold"] == 0.85);
    REQUIRE(header["dimension"] == 2);
    REQUIRE(header["count"] == 2);
    REQUIRE(nlohmann::json::parse(lines[1])["id"] == "a");
    REQUIRE(nlohmann::json::parse(lines[2])["id"] == "b");
}
