#include "ptg/error.hpp"
#include "ptg/evaluation.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ptg;
using ptg::testing::TempDir;

namespace {

using Gallery = std::vector<std::pair<std::string, std::vector<float>>>;

std::vector<float> to_vec(const EmbeddingVector& v) { return {v.values().begin(), v.values().end()}; }

Gallery as_pairs(const EmbeddingTable& t) {
    Gallery g;
    for (std::size_t i = 0; i < t.size(); ++i) g.emplace_back(t.ids()[i], to_vec(t.vector_at(i)));
    return g;
}

// Gallery with deliberate duplicate vectors so similarity ties occur.
EmbeddingTable gallery_with_duplicates(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
    EmbeddingTable t(dim);
    std::vector<std::vector<float>> seen;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> v;
        if (!seen.empty() && rng() % 4 == 0) {
            v = seen[rng() % seen.size()];
        } else {
            v = ptg::testing::random_vector(rng, dim);
        }
        seen.push_back(v);
        char id[16];
        std::snprintf(id, sizeof id, "g%04zu", i);
        t.add(id, EmbeddingVector(std::move(v)));
    }
    return t;
}

std::vector<RetrievalQuery> random_queries(std::mt19937_64& rng, const EmbeddingTable& gallery,
                                           std::size_t count, const std::vector<std::string>& subsets = {}) {
    std::vector<RetrievalQuery> qs;
    for (std::size_t q = 0; q < count; ++q) {
        const auto& target = gallery.ids()[rng() % gallery.size()];
        std::string ref;
        do {
            ref = gallery.ids()[rng() % gallery.size()];
        } while (ref == target);
        qs.push_back({"q" + std::to_string(q), EmbeddingVector(ptg::testing::random_vector(rng, gallery.dim())),
                      target, {ref}, subsets.empty() ? "" : subsets[q % subsets.size()]});
    }
    return qs;
}

}  // namespace

TEST(Recall, UniqueNearestTargetIsFound) {
    EmbeddingTable g(2);
    g.add("t", EmbeddingVector({1.0f, 0.0f}));
    g.add("u", EmbeddingVector({0.0f, 1.0f}));
    g.add("v", EmbeddingVector({-1.0f, 0.0f}));
    const std::vector<RetrievalQuery> qs{{"q", EmbeddingVector({0.9f, 0.1f}), "t", {}, ""}};
    const auto r = recall_at_k(qs, g, {1});
    EXPECT_EQ(r.overall.at(1), 1.0);
    EXPECT_EQ(target_rank(qs[0], g), 0u);
}

TEST(Recall, ExclusionRemovesReference) {
    EmbeddingTable g(2);
    g.add("ref", EmbeddingVector({1.0f, 0.0f}));
    g.add("t", EmbeddingVector({0.8f, 0.6f}));
    const RetrievalQuery q{"q", EmbeddingVector({1.0f, 0.0f}), "t", {"ref"}, ""};
    EXPECT_EQ(target_rank(q, g), 0u);
    const RetrievalQuery kept{"q", EmbeddingVector({1.0f, 0.0f}), "t", {}, ""};
    EXPECT_EQ(target_rank(kept, g), 1u);
}

TEST(Recall, TiesBreakById) {
    EmbeddingTable g(2);
    g.add("b", EmbeddingVector({1.0f, 0.0f}));
    g.add("a", EmbeddingVector({2.0f, 0.0f}));
    EXPECT_EQ(target_rank({"q", EmbeddingVector({1.0f, 0.0f}), "a", {}, ""}, g), 0u);
    EXPECT_EQ(target_rank({"q", EmbeddingVector({1.0f, 0.0f}), "b", {}, ""}, g), 1u);
}

TEST(Recall, KEqualToGallerySizeIsOne) {
    std::mt19937_64 rng(4);
    const auto g = ptg::testing::random_table(rng, 30, 8);
    const auto qs = random_queries(rng, g, 20);
    const auto r = recall_at_k(qs, g, {29});
    EXPECT_EQ(r.overall.at(29), 1.0);
}

TEST(Recall, MatchesBruteForceWithTies) {
    std::mt19937_64 rng(2024);
    const auto g = gallery_with_duplicates(rng, 200, 16);
    const auto gp = as_pairs(g);
    const auto qs = random_queries(rng, g, 50);
    const std::vector<int> ks{1, 5, 10, 50};
    const auto r = recall_at_k(qs, g, ks);
    for (int k : ks) {
        std::size_t hits = 0;
        for (const auto& q : qs) {
            const auto rank = oracle::rank_by_sort(gp, to_vec(q.composed), q.target_id, q.exclude_ids, oracle::cosine);
            ASSERT_EQ(rank, target_rank(q, g)) << q.query_id;
            if (rank < static_cast<std::size_t>(k)) ++hits;
        }
        EXPECT_DOUBLE_EQ(r.overall.at(k), static_cast<double>(hits) / 50.0) << k;
    }
}

TEST(Recall, QueriesThatDuplicateTheTargetTie) {
    std::mt19937_64 rng(8);
    const auto g = gallery_with_duplicates(rng, 200, 4);
    const auto gp = as_pairs(g);
    // Queries equal to a gallery vector give exact ties with its duplicates.
    std::vector<RetrievalQuery> qs;
    for (std::size_t i = 0; i < 50; ++i) {
        const auto idx = rng() % g.size();
        qs.push_back({"q" + std::to_string(i), g.vector_at(idx), g.ids()[(idx + 1) % g.size()], {}, ""});
    }
    for (const auto& q : qs) {
        EXPECT_EQ(target_rank(q, g), oracle::rank_by_sort(gp, to_vec(q.composed), q.target_id, {}, oracle::cosine));
    }
}

TEST(Recall, MonotoneInK) {
    std::mt19937_64 rng(10);
    for (int instance = 0; instance < 20; ++instance) {
        const auto g = ptg::testing::random_table(rng, 100, 8);
        const auto qs = random_queries(rng, g, 40);
        std::vector<int> ks;
        for (int k = 1; k <= 99; ++k) ks.push_back(k);
        const auto r = recall_at_k(qs, g, ks);
        for (int k = 2; k <= 99; ++k) EXPECT_LE(r.overall.at(k - 1), r.overall.at(k));
    }
}

TEST(Recall, InvariantToQueryScale) {
    std::mt19937_64 rng(12);
    const auto g = ptg::testing::random_table(rng, 100, 8);
    auto qs = random_queries(rng, g, 40);
    const auto before = recall_at_k(qs, g, {1, 5, 10});
    for (auto& q : qs) {
        auto v = to_vec(q.composed);
        for (auto& x : v) x *= 3.0f;
        q.composed = EmbeddingVector(v);
    }
    EXPECT_EQ(recall_at_k(qs, g, {1, 5, 10}).overall, before.overall);
}

TEST(Recall, ThreadCountDoesNotMatter) {
    std::mt19937_64 rng(13);
    const auto g = ptg::testing::random_table(rng, 300, 16);
    const auto qs = random_queries(rng, g, 200, {"dress", "shirt", "toptee"});
    const auto a = recall_at_k(qs, g, {10, 50}, 1);
    const auto b = recall_at_k(qs, g, {10, 50}, 4);
    EXPECT_EQ(a.overall, b.overall);
    EXPECT_EQ(a.subsets, b.subsets);
}

TEST(Recall, SubsetMeanIsUnweighted) {
    EmbeddingTable g(2);
    g.add("x", EmbeddingVector({1.0f, 0.0f}));
    g.add("y", EmbeddingVector({0.0f, 1.0f}));
    const EmbeddingVector toward_x({1.0f, 0.1f});
    // subset A: 1 query, hit at k=1; subset B: 3 queries, 1 hit.
    const std::vector<RetrievalQuery> qs{{"a1", toward_x, "x", {}, "A"},
                                         {"b1", toward_x, "x", {}, "B"},
                                         {"b2", toward_x, "y", {}, "B"},
                                         {"b3", toward_x, "y", {}, "B"}};
    const auto r = recall_at_k(qs, g, {1});
    EXPECT_DOUBLE_EQ(r.subsets.at("A").at(1), 1.0);
    EXPECT_DOUBLE_EQ(r.subsets.at("B").at(1), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.subset_mean.at(1), (1.0 + 1.0 / 3.0) / 2.0);
    EXPECT_DOUBLE_EQ(r.overall.at(1), 0.5);
    EXPECT_EQ(r.subset_counts.at("B"), 3u);
}

TEST(Recall, RejectsBadInputs) {
    std::mt19937_64 rng(14);
    const auto g = ptg::testing::random_table(rng, 10, 4);
    const auto qs = random_queries(rng, g, 3);
    EXPECT_THROW(recall_at_k(qs, g, {0}), Error);
    EXPECT_THROW(recall_at_k(qs, g, {10}), Error);  // 9 left after excluding the reference
    auto missing = qs;
    missing[0].target_id = "nowhere";
    EXPECT_THROW(recall_at_k(missing, g, {1}), Error);
    auto excluded = qs;
    excluded[0].exclude_ids.insert(excluded[0].target_id);
    EXPECT_THROW(recall_at_k(excluded, g, {1}), Error);
    auto wrong_dim = qs;
    wrong_dim[0].composed = EmbeddingVector({1.0f, 2.0f});
    try {
        recall_at_k(wrong_dim, g, {1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::dimension_mismatch);
    }
    EXPECT_THROW(recall_at_k({}, g, {1}), Error);
}

TEST(Trials, ConstantTrialsHaveZeroError) {
    const std::vector<double> v(5, 0.5);
    const auto s = trial_stat(v);
    EXPECT_EQ(s.mean, 0.5);
    EXPECT_EQ(s.standard_error, 0.0);
    for (double c : {0.1, 1.0 / 3.0, 0.7}) {
        const auto t = trial_stat(std::vector<double>(7, c));
        EXPECT_EQ(t.mean, c);
        EXPECT_EQ(t.standard_error, 0.0);
    }
}

TEST(Trials, TwoTrials) {
    const std::vector<double> v{0.4, 0.6};
    const auto s = trial_stat(v);
    EXPECT_NEAR(s.mean, 0.5, 1e-15);
    EXPECT_NEAR(s.standard_error, 0.1, 1e-12);
}

TEST(Trials, MatchesClosedForm) {
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 2; n < 40; ++n) {
        std::vector<double> v(n);
        for (auto& x : v) x = u(rng);
        const auto s = trial_stat(v);
        EXPECT_NEAR(s.mean, oracle::mean(v), 1e-12);
        EXPECT_NEAR(s.standard_error, oracle::standard_error(v), 1e-12);
    }
    EXPECT_THROW(trial_stat(std::vector<double>{0.3}), Error);
}

TEST(Trials, AggregateAcrossReports) {
    std::mt19937_64 rng(16);
    const auto g = ptg::testing::random_table(rng, 100, 8);
    std::vector<RecallReport> reports;
    std::vector<double> r10;
    for (int t = 0; t < 5; ++t) {
        reports.push_back(recall_at_k(random_queries(rng, g, 30, {"A", "B"}), g, {10, 50}));
        r10.push_back(reports.back().overall.at(10));
    }
    const auto agg = aggregate_trials(reports);
    EXPECT_EQ(agg.trials, 5u);
    EXPECT_NEAR(agg.overall.at(10).mean, oracle::mean(r10), 1e-12);
    EXPECT_NEAR(agg.overall.at(10).standard_error, oracle::standard_error(r10), 1e-12);
    EXPECT_TRUE(agg.subsets.contains("A"));
    const auto j = aggregate_to_json(agg);
    EXPECT_TRUE(j.at("overall").contains("R@10"));

    auto mismatched = reports;
    mismatched[1] = recall_at_k(random_queries(rng, g, 30, {"A", "B"}), g, {1});
    EXPECT_THROW(aggregate_trials(mismatched), Error);
}

TEST(Queries, JsonlParsesAndExcludesReference) {
    const std::string text =
        "{\"query_id\":\"q1\",\"ref\":\"r1\",\"target\":\"t1\",\"vec\":[1,0],\"subset\":\"dress\"}\n"
        "{\"query_id\":\"q2\",\"ref\":\"r2\",\"target\":\"t2\",\"vec\":[0,1],\"exclude\":[\"x\"]}\n";
    const auto qs = parse_queries_jsonl(text);
    ASSERT_EQ(qs.size(), 2u);
    EXPECT_EQ(qs[0].exclude_ids, (std::set<std::string>{"r1"}));
    EXPECT_EQ(qs[0].subset, "dress");
    EXPECT_EQ(qs[1].exclude_ids, (std::set<std::string>{"r2", "x"}));
    EXPECT_TRUE(parse_queries_jsonl(text, false)[0].exclude_ids.empty());
    EXPECT_THROW(parse_queries_jsonl("{\"query_id\":\"q\"}\n"), Error);
}

TEST(Queries, ReportJsonKeys) {
    EmbeddingTable g(2);
    g.add("x", EmbeddingVector({1.0f, 0.0f}));
    g.add("y", EmbeddingVector({0.0f, 1.0f}));
    const auto r = recall_at_k({{"q", EmbeddingVector({1.0f, 0.0f}), "x", {}, ""}}, g, {1, 2});
    const auto j = report_to_json(r);
    EXPECT_EQ(j.at("overall").at("R@1"), 1.0);
    EXPECT_EQ(j.at("queries"), 1);
}
