#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "ssrl/config.hpp"
#include "ssrl/labels.hpp"
#include "ssrl/synthetic.hpp"

using namespace ssrl;
using namespace ssrl::testing;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SSRL_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("fb15k-237 preset carries the published constants") {
    TempDir dir("cfg_preset");
    write_file(dir.file("run.cfg"), "preset = fb15k-237\n");
    const auto cfg = parse_config(dir.file("run.cfg"), {});
    CHECK(cfg.hp.sl_beta == doctest::Approx(0.0002));
    CHECK(cfg.hp.rl_beta == doctest::Approx(0.02));
    CHECK(cfg.hp.sl_lambda == doctest::Approx(0.02));
    CHECK(cfg.hp.rl_lambda == doctest::Approx(0.02));
    CHECK(cfg.hp.learning_rate == doctest::Approx(1e-3));
}

TEST_CASE("nell-995 preset carries the published constants") {
    TempDir dir("cfg_preset2");
    write_file(dir.file("run.cfg"), "preset = nell-995\n");
    const auto cfg = parse_config(dir.file("run.cfg"), {});
    CHECK(cfg.hp.sl_beta == doctest::Approx(0.02));
    CHECK(cfg.hp.rl_beta == doctest::Approx(0.05));
}

TEST_CASE("wn18rr and fb60k presets") {
    TempDir dir("cfg_preset3");
    write_file(dir.file("a.cfg"), "preset = wn18rr\n");
    const auto wn = parse_config(dir.file("a.cfg"), {});
    CHECK(wn.hp.sl_lambda == doctest::Approx(0.002));
    CHECK(wn.hp.rl_lambda == doctest::Approx(0.05));
    write_file(dir.file("b.cfg"), "preset = fb60k\n");
    const auto fb = parse_config(dir.file("b.cfg"), {});
    CHECK(fb.hp.rl_beta == doctest::Approx(0.2));
}

TEST_CASE("overrides win over file values") {
    TempDir dir("cfg_override");
    write_file(dir.file("run.cfg"), "preset = fb15k-237\nrl.beta = 0.02\n");
    const std::vector<std::string> overrides{"rl.beta=0.1"};
    const auto cfg = parse_config(dir.file("run.cfg"), overrides);
    CHECK(cfg.hp.rl_beta == doctest::Approx(0.1));
}

TEST_CASE("config errors are specific") {
    TempDir dir("cfg_errors");
    write_file(dir.file("unknown.cfg"), "seed = 1\nnot.a.key = 2\n");
    CHECK_THROWS_WITH_AS(parse_config(dir.file("unknown.cfg"), {}), doctest::Contains("line 2"),
                         ConfigError);
    write_file(dir.file("badval.cfg"), "seed = banana\n");
    CHECK_THROWS_WITH_AS(parse_config(dir.file("badval.cfg"), {}), doctest::Contains("line 1"),
                         ConfigError);
    write_file(dir.file("noeq.cfg"), "seed 1\n");
    CHECK_THROWS_AS(parse_config(dir.file("noeq.cfg"), {}), ConfigError);
    CHECK_THROWS_AS(parse_config(dir.file("missing.cfg"), {}), ConfigError);
    CHECK_THROWS_AS(parse_overrides(std::vector<std::string>{"rl.beta"}), ConfigError);
    CHECK_THROWS_AS(parse_overrides(std::vector<std::string>{"preset=mystery"}), ConfigError);
}

TEST_CASE("rendered config reparses to the same config") {
    TempDir dir("cfg_roundtrip");
    write_file(dir.file("run.cfg"),
               "preset = nell-995\noptim.learning_rate = 0.005\nrl.batches = 7\n"
               "env.mask_all_query_edges = true\nout.dir = somewhere\n");
    const auto cfg = parse_config(dir.file("run.cfg"), {});
    const std::string echoed = render_config(cfg);
    CHECK(echoed.find(kVersionString) != std::string::npos);
    CHECK(echoed.find("config-hash") != std::string::npos);

    write_file(dir.file("echo.cfg"), echoed);
    const auto reparsed = parse_config(dir.file("echo.cfg"), {});
    CHECK(render_config(reparsed) == echoed);
    CHECK(config_hash(reparsed) == config_hash(cfg));
    CHECK(reparsed.hp.learning_rate == doctest::Approx(0.005));
    CHECK(reparsed.hp.rl_batches == 7);
    CHECK(reparsed.hp.mask_all_query_edges == true);
}

TEST_CASE("synthetic datasets are deterministic in the seed") {
    TempDir d1("syn_det1"), d2("syn_det2"), d3("syn_det3");
    make_synthetic({SyntheticKind::Composition, 200, 7}, d1.path());
    make_synthetic({SyntheticKind::Composition, 200, 7}, d2.path());
    make_synthetic({SyntheticKind::Composition, 200, 8}, d3.path());
    for (const char* f : {"train.txt", "dev.txt", "test.txt"}) {
        CHECK(slurp(d1.file(f)) == slurp(d2.file(f)));
    }
    CHECK(slurp(d1.file("train.txt")) != slurp(d3.file("train.txt")));
}

TEST_CASE("every synthetic test answer is reachable within two hops") {
    for (const auto kind : {SyntheticKind::Chain, SyntheticKind::Grid, SyntheticKind::Composition}) {
        TempDir dir("syn_reach");
        make_synthetic({kind, 144, 3}, dir.path());
        const auto g = ingest_triples(dir.file("train.txt"));
        const auto test = load_queries(dir.file("test.txt"), g);
        CHECK(test.skipped == 0);
        REQUIRE(!test.queries.empty());
        const auto stats = compute_stats(g, test.queries, 2);
        REQUIRE(stats.k_hop_target_fraction.has_value());
        CHECK(*stats.k_hop_target_fraction == doctest::Approx(1.0));
    }
}

TEST_CASE("label generation covers the whole synthetic train split") {
    TempDir dir("syn_coverage");
    make_synthetic({SyntheticKind::Composition, 150, 11}, dir.path());
    const auto g = ingest_triples(dir.file("train.txt"));
    auto queries = load_queries(dir.file("train.txt"), g).queries;
    const auto rq = *g.relations().find("rq");
    std::erase_if(queries, [&](const Query& q) { return q.relation != rq; });
    REQUIRE(!queries.empty());
    const auto batch = generate_label_batch(g, queries, {.depth = 3, .mask_all_query_edges = false}, 2);
    CHECK(batch.unlabelable == 0);
    const auto cov = label_coverage(LabelCache(batch.sets), queries);
    CHECK(cov.fraction() == doctest::Approx(1.0));
}

TEST_CASE("synthetic size floor raises a config error") {
    TempDir dir("syn_small");
    CHECK_THROWS_AS(make_synthetic({SyntheticKind::Composition, 5, 1}, dir.path()), ConfigError);
    CHECK_THROWS_AS(make_synthetic({SyntheticKind::Grid, 4, 1}, dir.path()), ConfigError);
    CHECK_THROWS_AS(synthetic_kind_from_string("triangle"), ConfigError);
}

TEST_CASE("CLI end-to-end: provenance, determinism, and exit codes") {
    TempDir dir("cli_e2e");
    const std::string data = dir.file("data");
    const std::string out = dir.file("out");
    REQUIRE(run_cli("make-synthetic --kind composition --size 120 --seed 5 --out " + data) == 0);
    REQUIRE(run_cli("gen-labels --graph " + data + " --depth 3 --out " + dir.file("labels.bin") +
                    " --max-actions 64") == 0);
    // Filtered and limited variants also run and stay small.
    REQUIRE(run_cli("gen-labels --graph " + data + " --depth 3 --out " + dir.file("lim.bin") +
                    " --max-actions 64 --limit 5 --relations rq") == 0);
    {
        const auto lim = load_labels(dir.file("lim.bin"));
        CHECK(lim.size() <= 5);
        const auto full = load_labels(dir.file("labels.bin"));
        CHECK(full.size() > lim.size());
    }

    write_file(dir.file("run.cfg"),
               "preset = synthetic\n"
               "data.dir = " + data + "\n"
               "data.labels = " + dir.file("labels.bin") + "\n"
               "out.dir = " + out + "\n"
               "seed = 13\n"
               "sl.epochs = 1\n"
               "rl.batches = 2\n"
               "rl.batch_size = 8\n"
               "rl.rollouts_per_query = 2\n"
               "threads = 1\n");
    REQUIRE(run_cli("train --config " + dir.file("run.cfg")) == 0);
    const std::string log1 = slurp(out + "/trainlog.csv");
    const std::string cfg1 = slurp(out + "/resolved.cfg");
    CHECK(cfg1.find(kVersionString) != std::string::npos);

    // Re-running from the echoed config reproduces the outputs byte for byte.
    REQUIRE(run_cli("train --config " + out + "/resolved.cfg") == 0);
    CHECK(slurp(out + "/trainlog.csv") == log1);
    CHECK(slurp(out + "/resolved.cfg") == cfg1);

    // Checkpoints exist and evaluate cleanly.
    REQUIRE(run_cli("eval --checkpoint " + out + "/checkpoint_final.bin --graph " + data +
                    " --split test --beam 20 --max-actions 64 --out " + dir.file("report.json")) == 0);
    CHECK(slurp(dir.file("report.json")).find("aggregates") != std::string::npos);

    // paths decodes without error (any train head/relation works).
    REQUIRE(run_cli("paths --checkpoint " + out + "/checkpoint_final.bin --graph " + data +
                    " --query \"e0,r1\" --top 3 --max-actions 64") == 0);

    // Exit codes: 2 for config errors, 3 for data errors.
    CHECK(run_cli("train --config " + dir.file("nonexistent.cfg")) == 2);
    write_file(dir.file("bad.cfg"), "mystery.key = 1\n");
    CHECK(run_cli("train --config " + dir.file("bad.cfg")) == 2);
    CHECK(run_cli("stats --graph " + dir.file("no_such_dir")) == 3);
    CHECK(run_cli("gen-labels --graph " + data + " --depth 3 --out " + dir.file("x.bin") +
                  " --relations not_a_relation") == 3);
}

TEST_CASE("CLI stats emits the documented JSON fields") {
    TempDir dir("cli_stats");
    const std::string data = dir.file("data");
    REQUIRE(run_cli("make-synthetic --kind chain --size 30 --seed 2 --out " + data) == 0);
    REQUIRE(run_cli("stats --graph " + data + " --split test --k 3 --out " + dir.file("s.json")) == 0);
    const auto json = slurp(dir.file("s.json"));
    for (const char* key : {"entity_count", "relation_count", "fact_count", "mean_degree",
                            "median_degree", "relation_frequency", "k_hop_target_fraction"}) {
        CHECK(json.find(key) != std::string::npos);
    }
}
