#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssrl/env.hpp"
#include "ssrl/evaluator.hpp"
#include "ssrl/labels.hpp"
#include "ssrl/losses.hpp"
#include "ssrl/policy.hpp"

namespace ssrl {

enum class Optimizer { Adam, Sgd };

struct Hyperparams {
    double learning_rate = 1e-3;
    double gamma = 1.0;
    double sl_beta = 0.02;   // entropy weight per stage
    double rl_beta = 0.05;
    double sl_lambda = 0.02; // baseline decay; the SL stage carries it for parity
    double rl_lambda = 0.02;
    int sl_epochs = 0;       // 0 = pure RL
    int sl_max_batches = 0;  // cap on total SL updates across epochs; 0 = off
    int rl_batches = 0;
    int batch_size = 128;
    int rollouts_per_query = 20;
    int horizon = 3;
    int beam_width = 100;
    std::uint64_t seed = 42;
    Optimizer optimizer = Optimizer::Adam;
    int sl_max_resamples = 32;
    bool sl_consume_step_on_reject = false;
    bool sl_sum_over_steps = true;  // sum the per-step losses per rollout (vs mean)
    bool mask_all_query_edges = false;
    int eval_every = 0;  // dev snapshot interval in batches; 0 = off
    int threads = 0;
    double prob_clip = 1e-8;

    void validate() const;
};

// Adam moments share the parameter shapes; untouched embedding rows keep
// m = v = 0 and therefore never move.
struct AdamState {
    PolicyParams<float> m, v;
    std::int64_t t = 0;

    static AdamState zeros_like(const PolicyParams<float>& p);
};

void apply_gradients(PolicyParams<float>& params, const Gradients<float>& grads,
                     const Hyperparams& hp, AdamState& adam);

struct TrainLogRow {
    std::string stage;  // "sl" | "rl"
    int batch = 0;
    double mean_reward = 0;
    double sl_loss = 0;  // NaN on RL rows
    double entropy = 0;
    double baseline = 0;
    std::optional<MetricSet> dev;
};

struct TrainLog {
    std::vector<TrainLogRow> rows;

    std::string to_csv() const;
    void save_csv(const std::string& path) const;
};

// One metric per file, schema "stage,batch,value"; hits/mrr files carry only
// snapshot rows.
void emit_curves(const TrainLog& log, const std::string& out_dir);

// A query plus its stable position in the full training list; rollout RNG
// streams derive from (seed, stage, batch/epoch, stable_index, rollout).
struct QueryRef {
    Query query;
    std::uint64_t stable_index = 0;
};

// Single rollouts, exposed for tests and instrumentation; the batch kernels
// run these per work item. `tape`, when given, records activations for the
// reverse pass.
Trajectory rl_rollout(const KnowledgeGraph& g, const PolicyParams<float>& params, const Query& q,
                      const Hyperparams& hp, Rng& rng, RolloutTape<float>* tape = nullptr);
Trajectory sl_rollout(const KnowledgeGraph& g, const LabelSet& labels,
                      const PolicyParams<float>& params, const Hyperparams& hp, Rng& rng,
                      RolloutTape<float>* tape = nullptr);

struct BatchStats {
    double mean_reward = 0;
    double sl_loss = 0;
    double entropy = 0;
    double baseline = 0;
    std::uint64_t episodes = 0;
    std::uint64_t truncated = 0;  // SL label exhaustion
};

// One SL pass over the label cache (shuffled by seed/epoch), one optimizer
// update per batch of queries. Returns per-batch stats in order.
std::vector<BatchStats> sl_epoch(const KnowledgeGraph& g, const LabelCache& cache,
                                 PolicyParams<float>& params, const Hyperparams& hp,
                                 AdamState& adam, int epoch_index);

// One REINFORCE batch: rollouts_per_query trajectories per query, entropy
// regularization, reactive-baseline advantage, one optimizer update. The
// baseline is read before and updated after the batch.
BatchStats rl_batch(const KnowledgeGraph& g, std::span<const QueryRef> batch,
                    PolicyParams<float>& params, const Hyperparams& hp, AdamState& adam,
                    double& baseline, std::uint64_t batch_index);

struct TrainResult {
    PolicyParams<float> params;
    PolicyParams<float> sl_boundary;  // snapshot between the stages
    TrainLog log;
};

TrainResult train(const KnowledgeGraph& g, const LabelCache* cache,
                  std::span<const Query> train_queries, std::span<const Query> dev_queries,
                  const KnownAnswers* known, PolicyDims dims, const Hyperparams& hp);

struct SweepCell {
    int sl_epochs;
    std::string metric;
    double value;
    double delta_vs_epoch0;
};

// Trains once per SL-epoch count under a shared RL budget, evaluates
// Hits@{1,3,5,10,20} and MRR on eval_queries, and reports each cell minus the
// epoch-0 cell.
std::vector<SweepCell> sweep(const KnowledgeGraph& g, const LabelCache* cache,
                             std::span<const Query> train_queries,
                             std::span<const Query> eval_queries, const KnownAnswers* known,
                             PolicyDims dims, const Hyperparams& hp, std::span<const int> epoch_list);

std::string sweep_to_csv(std::span<const SweepCell> cells);

}  // namespace ssrl
