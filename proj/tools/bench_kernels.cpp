// Times the batch kernels with the serial reference path (threads = 1)
// against the OpenMP path, and checks that both produce identical results.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>

#include "ssrl/evaluator.hpp"
#include "ssrl/exec.hpp"
#include "ssrl/graph.hpp"
#include "ssrl/labels.hpp"
#include "ssrl/synthetic.hpp"
#include "ssrl/trainer.hpp"

using namespace ssrl;
namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool params_equal(const PolicyParams<float>& a, const PolicyParams<float>& b) {
    return a.entity_emb == b.entity_emb && a.relation_emb == b.relation_emb &&
           a.lstm_wx == b.lstm_wx && a.lstm_wh == b.lstm_wh && a.lstm_b == b.lstm_b &&
           a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2;
}

}  // namespace

int main(int argc, char** argv) {
    int size = 400;
    int parallel_threads = resolve_threads(0);
    if (argc > 1) size = std::atoi(argv[1]);
    if (argc > 2) parallel_threads = std::atoi(argv[2]);

    const std::string dir = (fs::temp_directory_path() / "ssrl_bench_data").string();
    make_synthetic({SyntheticKind::Composition, size, 7}, dir);
    IngestOptions gopts;
    gopts.max_actions = 64;
    const auto g = ingest_triples(dir + "/train.txt", gopts);
    const auto queries = load_queries(dir + "/train.txt", g).queries;
    std::printf("graph: %u entities, %llu facts, %zu train queries, %d threads vs serial\n",
                g.entity_count(), static_cast<unsigned long long>(g.fact_count()), queries.size(),
                parallel_threads);

    // Label generation.
    LabelGenOptions lopts;
    lopts.depth = 3;
    auto t0 = std::chrono::steady_clock::now();
    const auto serial_labels = generate_label_batch(g, queries, lopts, 1);
    const double t_serial_labels = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const auto parallel_labels = generate_label_batch(g, queries, lopts, parallel_threads);
    const double t_parallel_labels = seconds_since(t0);
    const bool labels_match = serial_labels.sets == parallel_labels.sets;
    std::printf("gen-labels   serial %.3fs  parallel %.3fs  speedup %.2fx  identical=%s\n",
                t_serial_labels, t_parallel_labels, t_serial_labels / t_parallel_labels,
                labels_match ? "yes" : "NO");

    // One RL batch.
    Hyperparams hp;
    hp.rollouts_per_query = 8;
    hp.batch_size = static_cast<int>(queries.size());
    hp.horizon = 3;
    hp.seed = 11;
    PolicyDims dims{32, 32, 64};
    std::vector<QueryRef> batch;
    for (std::size_t i = 0; i < queries.size(); ++i) batch.push_back({queries[i], i});

    auto run_rl = [&](int threads, double& elapsed) {
        Hyperparams local = hp;
        local.threads = threads;
        auto params = init_params<float>(dims, g.entity_count(), g.relation_count_augmented(), 5);
        AdamState adam = AdamState::zeros_like(params);
        double baseline = 0.0;
        auto start = std::chrono::steady_clock::now();
        for (int b = 0; b < 3; ++b) rl_batch(g, batch, params, local, adam, baseline, b);
        elapsed = seconds_since(start);
        return params;
    };
    double t_serial_rl = 0, t_parallel_rl = 0;
    const auto rl_serial = run_rl(1, t_serial_rl);
    const auto rl_parallel = run_rl(parallel_threads, t_parallel_rl);
    const bool rl_match = params_equal(rl_serial, rl_parallel);
    std::printf("rl-batch x3  serial %.3fs  parallel %.3fs  speedup %.2fx  identical=%s\n",
                t_serial_rl, t_parallel_rl, t_serial_rl / t_parallel_rl, rl_match ? "yes" : "NO");

    // Evaluation.
    const auto test_queries = load_queries(dir + "/test.txt", g).queries;
    KnownAnswers known;
    known.add_all(queries);
    known.add_all(test_queries);
    EvalOptions eopts;
    eopts.beam_width = 50;
    eopts.horizon = 3;
    auto run_eval = [&](int threads, double& elapsed) {
        EvalOptions local = eopts;
        local.threads = threads;
        auto start = std::chrono::steady_clock::now();
        const auto r = evaluate(g, rl_serial, test_queries, &known, local);
        elapsed = seconds_since(start);
        return r.aggregates;
    };
    double t_serial_eval = 0, t_parallel_eval = 0;
    const auto m_serial = run_eval(1, t_serial_eval);
    const auto m_parallel = run_eval(parallel_threads, t_parallel_eval);
    const bool eval_match = m_serial.hits1 == m_parallel.hits1 && m_serial.mrr == m_parallel.mrr;
    std::printf("eval         serial %.3fs  parallel %.3fs  speedup %.2fx  identical=%s\n",
                t_serial_eval, t_parallel_eval, t_serial_eval / t_parallel_eval,
                eval_match ? "yes" : "NO");

    if (!labels_match || !rl_match || !eval_match) {
        std::fprintf(stderr, "FAIL: serial and parallel kernels disagree\n");
        return 1;
    }
    return 0;
}
