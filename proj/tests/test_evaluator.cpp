#include "doctest.h"

#include <cmath>
#include <functional>

#include "helpers.hpp"
#include "ssrl/evaluator.hpp"
#include "ssrl/trainer.hpp"

using namespace ssrl;
using namespace ssrl::testing;

namespace {

// Independent enumeration of every length-T action sequence with its summed
// log-probability, for checking the beam against.
struct Enumerated {
    std::vector<Action> path;
    double log_prob;
    EntityId terminal;
};

void enumerate_paths(const KnowledgeGraph& g, const PolicyParams<float>& params, const Query& q,
                     const GraphView& view, int horizon, std::vector<Enumerated>& out,
                     std::vector<Action>& path, LstmState<float> state, EntityId cur, double lp) {
    if (static_cast<int>(path.size()) == horizon) {
        out.push_back({path, lp, cur});
        return;
    }
    const RelationId prev = path.empty() ? KnowledgeGraph::kNoOp : path.back().relation;
    const auto acts = view.actions(cur);
    LstmState<float> next = state;
    const auto dist = policy_forward_step(params, next, prev, cur, q.relation, acts);
    const float max_logit = dist.logits.maxCoeff();
    const double lse = std::log((dist.logits.array() - max_logit).exp().sum()) + max_logit;
    for (std::size_t k = 0; k < acts.size(); ++k) {
        path.push_back(acts[k]);
        enumerate_paths(g, params, q, view, horizon, out, path, next, acts[k].entity,
                        lp + dist.logits[static_cast<Eigen::Index>(k)] - lse);
        path.pop_back();
    }
}

std::vector<Enumerated> all_paths(const KnowledgeGraph& g, const PolicyParams<float>& params,
                                  const Query& q, int horizon) {
    const GraphView view = GraphView::mask_query(g, q, false);
    std::vector<Enumerated> out;
    std::vector<Action> path;
    enumerate_paths(g, params, q, view, horizon, out, path, zero_state<float>(params.dims),
                    q.source, 0.0);
    return out;
}

BeamEntry entry(std::vector<Action> path, double lp, EntityId terminal) {
    return {std::move(path), lp, terminal};
}

}  // namespace

TEST_CASE("a saturating beam equals exhaustive enumeration") {
    TempDir dir("eval_saturate");
    const auto g = graph_from_triples(dir, fig2_triples());
    const Query q{*g.entities().find("e2"), *g.relations().find("r1"), *g.entities().find("e5")};
    const auto params =
        init_params<float>({8, 8, 16}, g.entity_count(), g.relation_count_augmented(), 6);

    auto oracle = all_paths(g, params, q, 3);
    REQUIRE(oracle.size() < 10000);
    std::sort(oracle.begin(), oracle.end(), [](const Enumerated& a, const Enumerated& b) {
        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
        return a.path < b.path;
    });

    const auto beams = beam_search(g, params, q, 3, static_cast<int>(oracle.size()) + 10);
    REQUIRE(beams.size() == oracle.size());
    for (std::size_t i = 0; i < beams.size(); ++i) {
        CHECK(beams[i].path == oracle[i].path);
        CHECK(beams[i].log_prob == doctest::Approx(oracle[i].log_prob).epsilon(1e-9));
        CHECK(beams[i].terminal == oracle[i].terminal);
    }

    // Truncated beams carry exactly the top-B scores of the enumeration.
    const int width = 7;
    const auto truncated = beam_search(g, params, q, 3, width);
    REQUIRE(truncated.size() == static_cast<std::size_t>(width));
    for (int i = 0; i < width; ++i) {
        CHECK(truncated[static_cast<std::size_t>(i)].log_prob ==
              doctest::Approx(oracle[static_cast<std::size_t>(i)].log_prob).epsilon(1e-9));
    }
}

TEST_CASE("beam width 1 is greedy decoding") {
    TempDir dir("eval_greedy");
    const auto g = graph_from_triples(dir, fig2_triples());
    const Query q{*g.entities().find("e2"), *g.relations().find("r1"), *g.entities().find("e5")};
    const auto params =
        init_params<float>({8, 8, 16}, g.entity_count(), g.relation_count_augmented(), 15);

    const auto beam1 = beam_search(g, params, q, 3, 1);
    REQUIRE(beam1.size() == 1);

    // Greedy reference: argmax at every step.
    const GraphView view = GraphView::mask_query(g, q, false);
    LstmState<float> state = zero_state<float>(params.dims);
    EntityId cur = q.source;
    RelationId prev = KnowledgeGraph::kNoOp;
    std::vector<Action> greedy;
    for (int t = 0; t < 3; ++t) {
        const auto acts = view.actions(cur);
        const auto dist = policy_forward_step(params, state, prev, cur, q.relation, acts);
        Eigen::Index best = 0;
        dist.logits.maxCoeff(&best);
        greedy.push_back(acts[static_cast<std::size_t>(best)]);
        cur = greedy.back().entity;
        prev = greedy.back().relation;
    }
    CHECK(beam1[0].path == greedy);
}

TEST_CASE("a briefly trained policy sends the top beam to the chain answer") {
    TempDir dir("eval_trained");
    const auto g = graph_from_triples(dir, chain_triples());
    const Query q{*g.entities().find("a"), *g.relations().find("rq"), *g.entities().find("c")};
    const LabelCache cache({generate_labels(g, q, {.depth = 3, .mask_all_query_edges = false})});

    Hyperparams hp;
    hp.sl_epochs = 40;
    hp.rl_batches = 60;
    hp.batch_size = 4;
    hp.rollouts_per_query = 8;
    hp.horizon = 3;
    hp.seed = 9;
    hp.threads = 1;
    hp.rl_beta = 0.01;
    const std::vector<Query> train_queries{q};
    const auto result = train(g, &cache, train_queries, {}, nullptr, {8, 8, 16}, hp);

    const auto beams = beam_search(g, result.params, q, 3, 4);
    REQUIRE(!beams.empty());
    CHECK(beams[0].terminal == q.target);
}

TEST_CASE("rank_answers fixtures") {
    const Query q{0, 1, 5};
    SUBCASE("target on top ranks first") {
        const std::vector<BeamEntry> beams{entry({{1, 5}}, -0.1, 5), entry({{1, 7}}, -0.2, 7)};
        CHECK(rank_answers(beams, q, nullptr, false) == 1);
    }
    SUBCASE("filtered ranking skips other known answers") {
        KnownAnswers known;
        known.add(0, 1, 9);  // 9 is another correct answer
        known.add(0, 1, 5);
        const std::vector<BeamEntry> beams{entry({{1, 9}}, -0.1, 9), entry({{1, 5}}, -0.5, 5),
                                           entry({{1, 7}}, -0.9, 7)};
        CHECK(rank_answers(beams, q, &known, true) == 1);
        CHECK(rank_answers(beams, q, &known, false) == 2);
    }
    SUBCASE("absent target ranks at infinity") {
        const std::vector<BeamEntry> beams{entry({{1, 7}}, -0.2, 7)};
        CHECK(rank_answers(beams, q, nullptr, true) == kRankInf);
    }
    SUBCASE("dedup keeps each entity's best log-prob") {
        const std::vector<BeamEntry> beams{entry({{1, 7}, {0, 7}}, -3.0, 7),
                                           entry({{2, 7}}, -0.1, 7), entry({{1, 5}}, -0.5, 5)};
        // 7's best (-0.1) beats 5 (-0.5); its worse copy is ignored.
        CHECK(rank_answers(beams, q, nullptr, false) == 2);
    }
}

TEST_CASE("rank_answers equals a brute-force re-ranking oracle on random beams") {
    Rng rng(66);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.integer(12));
        std::vector<BeamEntry> beams;
        for (int i = 0; i < n; ++i) {
            const EntityId term = static_cast<EntityId>(rng.integer(6));
            // Coarse scores force plenty of ties.
            const double lp = -0.5 * static_cast<double>(rng.integer(4));
            beams.push_back(entry({{0, term}}, lp, term));
        }
        const Query q{0, 1, static_cast<EntityId>(rng.integer(6))};
        KnownAnswers known;
        known.add(q.source, q.relation, q.target);
        for (int i = 0; i < 2; ++i) {
            known.add(q.source, q.relation, static_cast<EntityId>(rng.integer(6)));
        }
        for (const bool filtered : {false, true}) {
            // Oracle: best score per entity, sort by (score desc, id asc),
            // walk until the target counting survivors.
            std::map<EntityId, double> best;
            for (const auto& b : beams) {
                auto it = best.find(b.terminal);
                if (it == best.end() || b.log_prob > it->second) best[b.terminal] = b.log_prob;
            }
            std::vector<std::pair<EntityId, double>> sorted(best.begin(), best.end());
            std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
            });
            std::uint64_t expect = kRankInf;
            std::uint64_t seen = 0;
            for (const auto& [ent, score] : sorted) {
                if (ent == q.target) {
                    expect = seen + 1;
                    break;
                }
                const bool skip = filtered && known.contains(q.source, q.relation, ent);
                if (!skip) ++seen;
            }
            CHECK(rank_answers(beams, q, &known, filtered) == expect);
        }
    }
}

TEST_CASE("metric fixtures and edge cases") {
    SUBCASE("single perfect rank") {
        const std::vector<std::uint64_t> ranks{1};
        const auto m = metrics(ranks);
        CHECK(m.hits1 == doctest::Approx(1.0));
        CHECK(m.mrr == doctest::Approx(1.0));
    }
    SUBCASE("ranks 1, 3, 12") {
        const std::vector<std::uint64_t> ranks{1, 3, 12};
        const auto m = metrics(ranks);
        CHECK(m.hits1 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(m.hits3 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(m.hits10 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(m.hits20 == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(m.mrr - (1.0 + 1.0 / 3.0 + 1.0 / 12.0) / 3.0) <= 1e-9);
        CHECK(m.mrr == doctest::Approx(0.472222222222).epsilon(1e-9));
    }
    SUBCASE("all unranked") {
        const std::vector<std::uint64_t> ranks{kRankInf, kRankInf};
        const auto m = metrics(ranks);
        CHECK(m.hits1 == 0.0);
        CHECK(m.hits20 == 0.0);
        CHECK(m.mrr == 0.0);
    }
    SUBCASE("empty input is an error") { CHECK_THROWS_AS(metrics({}), DataError); }
}

TEST_CASE("hits@k is monotone in k and MRR respects mean semantics") {
    Rng rng(31337);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(rng.integer(20));
        std::vector<std::uint64_t> ranks;
        for (int i = 0; i < n; ++i) {
            ranks.push_back(rng.integer(4) == 0 ? kRankInf : 1 + rng.integer(30));
        }
        const auto m = metrics(ranks);
        CHECK(m.hits1 <= m.hits3);
        CHECK(m.hits3 <= m.hits5);
        CHECK(m.hits5 <= m.hits10);
        CHECK(m.hits10 <= m.hits20);
        CHECK(m.mrr >= m.hits1 - 1e-12);

        // Appending k unranked queries scales MRR by n / (n + k).
        std::vector<std::uint64_t> extended = ranks;
        const int extra = 1 + static_cast<int>(rng.integer(5));
        for (int i = 0; i < extra; ++i) extended.push_back(kRankInf);
        const auto m2 = metrics(extended);
        CHECK(m2.mrr == doctest::Approx(m.mrr * n / (n + extra)).epsilon(1e-12));
    }
}

TEST_CASE("split report partitions by answer multiplicity") {
    TempDir dir("eval_split");
    // rm is to-many from a (two answers); ro is to-one everywhere.
    const auto g = graph_from_triples(
        dir, {{"a", "rm", "b"}, {"a", "rm", "c"}, {"a", "ro", "b"}, {"d", "ro", "c"}});
    const auto a = *g.entities().find("a");
    const auto d = *g.entities().find("d");
    const auto rm = *g.relations().find("rm");
    const auto ro = *g.relations().find("ro");
    const std::vector<Query> queries{{a, rm, *g.entities().find("b")},
                                     {a, rm, *g.entities().find("c")},
                                     {a, ro, *g.entities().find("b")},
                                     {d, ro, *g.entities().find("c")}};
    const std::vector<std::uint64_t> ranks{1, 2, 4, kRankInf};
    const auto report = split_report(queries, g, ranks);

    REQUIRE(report.to_many.has_value());
    REQUIRE(report.to_one.has_value());
    CHECK(report.to_many->count == 2);
    CHECK(report.to_many->mrr == doctest::Approx((1.0 + 0.5) / 2.0).epsilon(1e-12));
    CHECK(report.to_one->count == 2);
    CHECK(report.to_one->mrr == doctest::Approx((0.25 + 0.0) / 2.0).epsilon(1e-12));

    // Per-relation rows cover every query exactly once.
    std::uint64_t total = 0;
    for (const auto& row : report.per_relation) total += row.count;
    CHECK(total == queries.size());

    // All to-one: the to-many partition is reported as absent.
    const std::vector<Query> only_one{{a, ro, *g.entities().find("b")}};
    const std::vector<std::uint64_t> one_rank{2};
    const auto r2 = split_report(only_one, g, one_rank);
    CHECK_FALSE(r2.to_many.has_value());
    REQUIRE(r2.to_one.has_value());
}

TEST_CASE("decode_paths renders names, arrows, and exactness") {
    TempDir dir("eval_decode");
    const auto g = graph_from_triples(dir, {{"a", "r", "b"}});
    const auto a = *g.entities().find("a");
    const auto b = *g.entities().find("b");
    const auto r = *g.relations().find("r");

    const std::vector<BeamEntry> beams{
        entry({{r, b}, {KnowledgeGraph::kNoOp, b}, {KnowledgeGraph::kNoOp, b}}, -0.3, b)};
    const auto text = decode_paths(beams, g, 5, b, a);
    CHECK(text == "a —r→ b —NO_OP→ b —NO_OP→ b [exact]\n");

    const auto wrong = decode_paths(beams, g, 5, a, a);
    CHECK(wrong.find("[incorrect]") != std::string::npos);

    CHECK(decode_paths({}, g, 5, b, a).empty());
    // top_n larger than the beam count prints everything once.
    CHECK(decode_paths(beams, g, 50, b, a) == text);
}

TEST_CASE("unique-path statistics count distinct sequences on a saturated beam") {
    TempDir dir("eval_unique");
    const auto g = graph_from_triples(dir, chain_triples());
    const Query q{*g.entities().find("a"), *g.relations().find("rq"), *g.entities().find("c")};
    const auto params =
        init_params<float>({8, 8, 16}, g.entity_count(), g.relation_count_augmented(), 3);
    const auto oracle = all_paths(g, params, q, 3);
    BeamStats stats;
    beam_search(g, params, q, 3, static_cast<int>(oracle.size()) + 5, &stats);
    CHECK(stats.unique_paths == oracle.size());
}

TEST_CASE("evaluate produces a coherent report on the chain") {
    TempDir dir("eval_report");
    const auto g = graph_from_triples(dir, chain_triples());
    const Query q{*g.entities().find("a"), *g.relations().find("rq"), *g.entities().find("c")};
    const auto params =
        init_params<float>({8, 8, 16}, g.entity_count(), g.relation_count_augmented(), 8);
    KnownAnswers known;
    known.add(q.source, q.relation, q.target);
    const std::vector<Query> queries{q};
    EvalOptions opts;
    opts.beam_width = 64;
    opts.horizon = 3;
    opts.per_query = true;
    opts.threads = 1;
    const auto report = evaluate(g, params, queries, &known, opts);
    CHECK(report.aggregates.count == 1);
    REQUIRE(report.per_query.size() == 1);
    // The saturating beam reaches c somewhere, so the rank is finite.
    CHECK(report.per_query[0].rank != kRankInf);
    const auto json = report.to_json(g, true);
    CHECK(json.find("\"aggregates\"") != std::string::npos);
    CHECK(json.find("\"per_query\"") != std::string::npos);
    CHECK_THROWS_AS(evaluate(g, params, {}, &known, opts), DataError);
}
