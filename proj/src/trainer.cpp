#include "ssrl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ssrl/env.hpp"
#include "ssrl/exec.hpp"

namespace ssrl {

std::vector<double> compute_returns(std::span<const float> rewards, double gamma) {
    std::vector<double> g(rewards.size(), 0.0);
    double acc = 0.0;
    for (std::ptrdiff_t t = static_cast<std::ptrdiff_t>(rewards.size()) - 1; t >= 0; --t) {
        acc = static_cast<double>(rewards[static_cast<std::size_t>(t)]) + gamma * acc;
        g[static_cast<std::size_t>(t)] = acc;
    }
    return g;
}

void Hyperparams::validate() const {
    if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
    if (gamma < 0 || gamma > 1) throw ConfigError("gamma must lie in [0, 1]");
    if (sl_beta < 0 || rl_beta < 0) throw ConfigError("entropy weights must be >= 0");
    if (sl_lambda < 0 || sl_lambda > 1 || rl_lambda < 0 || rl_lambda > 1) {
        throw ConfigError("baseline decay must lie in [0, 1]");
    }
    if (sl_epochs < 0) throw ConfigError("sl_epochs must be >= 0");
    if (sl_max_batches < 0) throw ConfigError("sl_max_batches must be >= 0");
    if (rl_batches < 0) throw ConfigError("rl_batches must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (rollouts_per_query < 1) throw ConfigError("rollouts_per_query must be >= 1");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (beam_width < 1) throw ConfigError("beam_width must be >= 1");
    if (sl_max_resamples < 1) throw ConfigError("sl_max_resamples must be >= 1");
    if (prob_clip <= 0 || prob_clip >= 0.5) throw ConfigError("prob_clip must lie in (0, 0.5)");
}

AdamState AdamState::zeros_like(const PolicyParams<float>& p) {
    AdamState s;
    auto zero = [](auto& dst, const auto& src) { dst = src; dst.setZero(); };
    s.m.dims = p.dims;
    s.v.dims = p.dims;
    zero(s.m.entity_emb, p.entity_emb);
    zero(s.m.relation_emb, p.relation_emb);
    zero(s.m.lstm_wx, p.lstm_wx);
    zero(s.m.lstm_wh, p.lstm_wh);
    zero(s.m.lstm_b, p.lstm_b);
    zero(s.m.w1, p.w1);
    zero(s.m.b1, p.b1);
    zero(s.m.w2, p.w2);
    zero(s.m.b2, p.b2);
    zero(s.v.entity_emb, p.entity_emb);
    zero(s.v.relation_emb, p.relation_emb);
    zero(s.v.lstm_wx, p.lstm_wx);
    zero(s.v.lstm_wh, p.lstm_wh);
    zero(s.v.lstm_b, p.lstm_b);
    zero(s.v.w1, p.w1);
    zero(s.v.b1, p.b1);
    zero(s.v.w2, p.w2);
    zero(s.v.b2, p.b2);
    return s;
}

namespace {

constexpr float kAdamBeta1 = 0.9f;
constexpr float kAdamBeta2 = 0.999f;
constexpr float kAdamEps = 1e-8f;

void adam_dense(Mat<float>& theta, Mat<float>& m, Mat<float>& v, const Mat<float>& g, float alpha) {
    m = kAdamBeta1 * m + (1 - kAdamBeta1) * g;
    v = (kAdamBeta2 * v.array() + (1 - kAdamBeta2) * g.array().square()).matrix();
    theta.array() -= alpha * m.array() / (v.array().sqrt() + kAdamEps);
}

void adam_dense(Vec<float>& theta, Vec<float>& m, Vec<float>& v, const Vec<float>& g, float alpha) {
    m = kAdamBeta1 * m + (1 - kAdamBeta1) * g;
    v = (kAdamBeta2 * v.array() + (1 - kAdamBeta2) * g.array().square()).matrix();
    theta.array() -= alpha * m.array() / (v.array().sqrt() + kAdamEps);
}

template <class RowMap>
void adam_embeddings(Mat<float>& theta, Mat<float>& m, Mat<float>& v, const RowMap& rows,
                     float alpha) {
    m *= kAdamBeta1;
    v *= kAdamBeta2;
    for (const auto& [row, grad] : rows) {
        m.row(row) += (1 - kAdamBeta1) * grad.transpose();
        v.row(row) += ((1 - kAdamBeta2) * grad.array().square()).matrix().transpose();
    }
    theta.array() -= alpha * m.array() / (v.array().sqrt() + kAdamEps);
}

}  // namespace

void apply_gradients(PolicyParams<float>& params, const Gradients<float>& grads,
                     const Hyperparams& hp, AdamState& adam) {
    const float lr = static_cast<float>(hp.learning_rate);
    if (hp.optimizer == Optimizer::Sgd) {
        params.lstm_wx -= lr * grads.lstm_wx;
        params.lstm_wh -= lr * grads.lstm_wh;
        params.lstm_b -= lr * grads.lstm_b;
        params.w1 -= lr * grads.w1;
        params.b1 -= lr * grads.b1;
        params.w2 -= lr * grads.w2;
        params.b2 -= lr * grads.b2;
        for (const auto& [row, g] : grads.entity_rows) {
            params.entity_emb.row(row) -= lr * g.transpose();
        }
        for (const auto& [row, g] : grads.relation_rows) {
            params.relation_emb.row(row) -= lr * g.transpose();
        }
        return;
    }
    adam.t += 1;
    const float alpha =
        lr * std::sqrt(1.0f - std::pow(kAdamBeta2, static_cast<float>(adam.t))) /
        (1.0f - std::pow(kAdamBeta1, static_cast<float>(adam.t)));
    adam_dense(params.lstm_wx, adam.m.lstm_wx, adam.v.lstm_wx, grads.lstm_wx, alpha);
    adam_dense(params.lstm_wh, adam.m.lstm_wh, adam.v.lstm_wh, grads.lstm_wh, alpha);
    adam_dense(params.lstm_b, adam.m.lstm_b, adam.v.lstm_b, grads.lstm_b, alpha);
    adam_dense(params.w1, adam.m.w1, adam.v.w1, grads.w1, alpha);
    adam_dense(params.b1, adam.m.b1, adam.v.b1, grads.b1, alpha);
    adam_dense(params.w2, adam.m.w2, adam.v.w2, grads.w2, alpha);
    adam_dense(params.b2, adam.m.b2, adam.v.b2, grads.b2, alpha);
    adam_embeddings(params.entity_emb, adam.m.entity_emb, adam.v.entity_emb, grads.entity_rows, alpha);
    adam_embeddings(params.relation_emb, adam.m.relation_emb, adam.v.relation_emb,
                    grads.relation_rows, alpha);
    if (!params.all_finite()) throw InternalError("non-finite parameters after update");
}

namespace {

struct ItemStat {
    double return_sum = 0;
    double entropy_sum = 0;
    double loss = 0;
    int steps = 0;
    float final_hit = 0;  // walk ended on the query target
    bool truncated = false;
};

// Reduces per-chunk gradient partials in chunk order; floating-point sums are
// therefore independent of the thread count.
struct ChunkedGradients {
    std::vector<Gradients<float>> partials;
    std::vector<std::uint8_t> used;

    explicit ChunkedGradients(int chunks) : partials(static_cast<std::size_t>(chunks)),
                                            used(static_cast<std::size_t>(chunks), 0) {}

    Gradients<float>& chunk(int c, const PolicyParams<float>& p) {
        if (!used[static_cast<std::size_t>(c)]) {
            partials[static_cast<std::size_t>(c)] = Gradients<float>::zeros_like(p);
            used[static_cast<std::size_t>(c)] = 1;
        }
        return partials[static_cast<std::size_t>(c)];
    }

    Gradients<float> reduce(const PolicyParams<float>& p) {
        Gradients<float> total = Gradients<float>::zeros_like(p);
        for (std::size_t c = 0; c < partials.size(); ++c) {
            if (used[c]) total.add(partials[c]);
        }
        return total;
    }
};

BatchStats summarize(std::span<const ItemStat> items, bool sl) {
    BatchStats s;
    s.baseline = 0;
    double reward = 0, entropy = 0, loss = 0;
    std::uint64_t steps = 0;
    for (const auto& it : items) {
        reward += it.final_hit;
        entropy += it.entropy_sum;
        loss += it.loss;
        steps += static_cast<std::uint64_t>(it.steps);
        if (it.truncated) ++s.truncated;
    }
    s.episodes = items.size();
    s.mean_reward = items.empty() ? 0 : reward / static_cast<double>(items.size());
    s.entropy = steps == 0 ? 0 : entropy / static_cast<double>(steps);
    s.sl_loss = sl ? (items.empty() ? 0 : loss / static_cast<double>(items.size()))
                   : std::numeric_limits<double>::quiet_NaN();
    return s;
}

}  // namespace

Trajectory rl_rollout(const KnowledgeGraph& g, const PolicyParams<float>& params, const Query& q,
                      const Hyperparams& hp, Rng& rng, RolloutTape<float>* tape) {
    Trajectory traj;
    EnvState st = env_reset(g, q, hp.horizon, hp.mask_all_query_edges);
    if (tape) tape->query_relation = q.relation;
    LstmState<float> lstm = zero_state<float>(params.dims);
    RelationId prev = KnowledgeGraph::kNoOp;
    while (!st.done()) {
        TrajectoryStep step;
        step.observation = st.observation();
        const auto acts = st.view.actions(st.current);
        StepTrace<float>* trace = nullptr;
        if (tape) {
            tape->steps.emplace_back();
            trace = &tape->steps.back();
        }
        step.distribution = policy_forward_step(params, lstm, prev, st.current, q.relation, acts,
                                                trace);
        step.action = rng.categorical(std::span<const float>(
            step.distribution.probs.data(), static_cast<std::size_t>(step.distribution.probs.size())));
        prev = acts[static_cast<std::size_t>(step.action)].relation;
        step.reward = env_step(st, static_cast<std::uint32_t>(step.action));
        traj.steps.push_back(std::move(step));
    }
    traj.terminal_reward = traj.steps.back().reward;
    std::vector<float> rewards;
    rewards.reserve(traj.steps.size());
    for (const auto& s : traj.steps) rewards.push_back(s.reward);
    traj.returns = compute_returns(rewards, hp.gamma);
    return traj;
}

Trajectory sl_rollout(const KnowledgeGraph& g, const LabelSet& labels,
                      const PolicyParams<float>& params, const Hyperparams& hp, Rng& rng,
                      RolloutTape<float>* tape) {
    Trajectory traj;
    EnvState st = env_reset(g, labels.query, hp.horizon, hp.mask_all_query_edges);
    if (tape) tape->query_relation = labels.query.relation;
    LstmState<float> lstm = zero_state<float>(params.dims);
    RelationId prev = KnowledgeGraph::kNoOp;
    while (!st.done()) {
        const auto lab = labels.labels.find(st.current);
        if (lab == labels.labels.end()) {
            traj.truncated = true;  // labels exhausted: truncate the episode
            break;
        }
        const auto acts = st.view.actions(st.current);
        if (lab->second.size() != acts.size()) {
            throw DataError("label vector length does not match the masked action space; "
                            "regenerate labels with matching mask settings");
        }
        TrajectoryStep step;
        step.observation = st.observation();
        StepTrace<float>* trace = nullptr;
        if (tape) {
            tape->steps.emplace_back();
            trace = &tape->steps.back();
        }
        step.distribution = policy_forward_step(params, lstm, prev, st.current,
                                                labels.query.relation, acts, trace);
        const std::span<const float> probs(step.distribution.probs.data(),
                                           static_cast<std::size_t>(step.distribution.probs.size()));

        // Sample; travel only on labeled edges. A rejected sample leaves the
        // clock alone unless configured otherwise, so resample under a stall
        // cap and then force the best labeled action.
        int chosen = -1;
        for (int attempt = 0; attempt < hp.sl_max_resamples; ++attempt) {
            const int a = rng.categorical(probs);
            if (lab->second[static_cast<std::size_t>(a)]) {
                chosen = a;
                break;
            }
            if (hp.sl_consume_step_on_reject) {
                st.step += 1;  // stay put, clock advances
                step.action = a;
                step.applied = false;
                chosen = -2;
                break;
            }
        }
        if (chosen == -1) {
            float best = -1;
            for (Eigen::Index i = 0; i < step.distribution.probs.size(); ++i) {
                if (lab->second[static_cast<std::size_t>(i)] && step.distribution.probs[i] > best) {
                    best = step.distribution.probs[i];
                    chosen = static_cast<int>(i);
                }
            }
            if (chosen < 0) throw InternalError("label vector with no valid action");
        }
        if (chosen >= 0) {
            step.action = chosen;
            step.applied = true;
            const RelationId taken = acts[static_cast<std::size_t>(chosen)].relation;
            if (!env_sl_step(st, static_cast<std::uint32_t>(chosen), lab->second)) {
                throw InternalError("labeled action rejected by env_sl_step");
            }
            prev = taken;
        }
        traj.steps.push_back(std::move(step));
    }
    traj.terminal_reward = st.current == labels.query.target ? 1.0f : 0.0f;
    return traj;
}

std::vector<BatchStats> sl_epoch(const KnowledgeGraph& g, const LabelCache& cache,
                                 PolicyParams<float>& params, const Hyperparams& hp,
                                 AdamState& adam, int epoch_index) {
    hp.validate();
    if (cache.size() == 0) throw ConfigError("SL epoch requires a non-empty label cache");
    const int threads = resolve_threads(hp.threads);
    const float eps = static_cast<float>(hp.prob_clip);

    std::vector<std::uint64_t> order(cache.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng = Rng::derive(hp.seed, {kStreamShuffle, kStreamSl, static_cast<std::uint64_t>(epoch_index)});
    shuffle_rng.shuffle(order.begin(), order.end());

    std::vector<BatchStats> out;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hp.batch_size)) {
        if (hp.sl_max_batches > 0 && static_cast<int>(out.size()) >= hp.sl_max_batches) break;
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
        const std::int64_t n_items = static_cast<std::int64_t>(end - start);
        std::vector<ItemStat> items(static_cast<std::size_t>(n_items));
        ChunkedGradients cg(chunk_count(n_items));

        run_chunked(n_items, threads, [&](int c, std::int64_t b, std::int64_t e) {
            Gradients<float>& grad = cg.chunk(c, params);
            for (std::int64_t it = b; it < e; ++it) {
                const std::uint64_t set_index = order[start + static_cast<std::size_t>(it)];
                const LabelSet& ls = cache.sets()[set_index];
                Rng rng = Rng::derive(hp.seed, {kStreamSl, static_cast<std::uint64_t>(epoch_index),
                                                set_index, 0});
                RolloutTape<float> tape;
                const Trajectory traj = sl_rollout(g, ls, params, hp, rng, &tape);

                ItemStat& stat = items[static_cast<std::size_t>(it)];
                stat.truncated = traj.truncated;
                stat.final_hit = traj.terminal_reward;
                stat.steps = static_cast<int>(traj.steps.size());
                std::vector<Vec<float>> dlogits;
                dlogits.reserve(traj.steps.size());
                for (const auto& step : traj.steps) {
                    const auto& lab = ls.labels.at(step.observation.current);
                    stat.loss += static_cast<double>(
                        sl_cross_entropy<float>(step.distribution.probs, lab, eps));
                    stat.entropy_sum +=
                        static_cast<double>(policy_entropy<float>(step.distribution.probs));
                    dlogits.push_back(
                        sl_cross_entropy_dlogits<float>(step.distribution.probs, lab, eps));
                }
                if (!hp.sl_sum_over_steps && stat.steps > 0) {
                    const float inv = 1.0f / static_cast<float>(stat.steps);
                    for (auto& d : dlogits) d *= inv;
                    stat.loss /= stat.steps;
                }
                const float scale = 1.0f / static_cast<float>(n_items);
                for (auto& d : dlogits) d *= scale;
                backward(params, tape, std::span<const Vec<float>>(dlogits.data(), dlogits.size()), grad);
            }
        });

        Gradients<float> total = cg.reduce(params);
        apply_gradients(params, total, hp, adam);
        out.push_back(summarize(items, true));
    }
    return out;
}

BatchStats rl_batch(const KnowledgeGraph& g, std::span<const QueryRef> batch,
                    PolicyParams<float>& params, const Hyperparams& hp, AdamState& adam,
                    double& baseline, std::uint64_t batch_index) {
    hp.validate();
    if (batch.empty()) throw ConfigError("rl_batch requires a non-empty query batch");
    const int threads = resolve_threads(hp.threads);
    const float eps = static_cast<float>(hp.prob_clip);
    const double baseline_in = baseline;

    const std::int64_t n_items =
        static_cast<std::int64_t>(batch.size()) * hp.rollouts_per_query;
    std::vector<ItemStat> items(static_cast<std::size_t>(n_items));
    ChunkedGradients cg(chunk_count(n_items));

    run_chunked(n_items, threads, [&](int c, std::int64_t b, std::int64_t e) {
        Gradients<float>& grad = cg.chunk(c, params);
        for (std::int64_t it = b; it < e; ++it) {
            const auto& ref = batch[static_cast<std::size_t>(it / hp.rollouts_per_query)];
            const std::uint64_t rollout = static_cast<std::uint64_t>(it % hp.rollouts_per_query);
            Rng rng = Rng::derive(hp.seed, {kStreamRl, batch_index, ref.stable_index, rollout});

            RolloutTape<float> tape;
            const Trajectory traj = rl_rollout(g, params, ref.query, hp, rng, &tape);

            ItemStat& stat = items[static_cast<std::size_t>(it)];
            stat.final_hit = traj.terminal_reward;
            stat.steps = static_cast<int>(traj.steps.size());
            const float scale = 1.0f / static_cast<float>(n_items);
            std::vector<Vec<float>> dlogits(traj.steps.size());
            for (std::size_t t = 0; t < traj.steps.size(); ++t) {
                const float adv = static_cast<float>(traj.returns[t] - baseline_in);
                auto step = rl_step_objective<float>(traj.steps[t].distribution.probs,
                                                     traj.steps[t].action, adv,
                                                     static_cast<float>(hp.rl_beta), eps);
                dlogits[t] = step.dlogits_loss * scale;
                stat.entropy_sum +=
                    static_cast<double>(policy_entropy<float>(traj.steps[t].distribution.probs));
                stat.return_sum += traj.returns[t];
            }
            backward(params, tape, std::span<const Vec<float>>(dlogits.data(), dlogits.size()), grad);
        }
    });

    Gradients<float> total = cg.reduce(params);
    apply_gradients(params, total, hp, adam);

    // Reactive baseline: EMA of the batch-mean discounted return, reduced in
    // fixed item order.
    double g_sum = 0;
    std::uint64_t g_count = 0;
    for (const auto& it : items) {
        g_sum += it.return_sum;
        g_count += static_cast<std::uint64_t>(it.steps);
    }
    const double mean_g = g_count == 0 ? 0.0 : g_sum / static_cast<double>(g_count);
    baseline = hp.rl_lambda * baseline + (1.0 - hp.rl_lambda) * mean_g;

    BatchStats s = summarize(items, false);
    s.baseline = baseline;
    return s;
}

namespace {

std::string format_cell(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

std::string TrainLog::to_csv() const {
    std::string out = "stage,batch,mean_reward,sl_loss,entropy,baseline,hits1,hits3,hits10,hits20,mrr\n";
    for (const auto& r : rows) {
        out += r.stage + ',' + std::to_string(r.batch) + ',' + format_cell(r.mean_reward) + ',' +
               format_cell(r.sl_loss) + ',' + format_cell(r.entropy) + ',' + format_cell(r.baseline);
        if (r.dev) {
            out += ',' + format_cell(r.dev->hits1) + ',' + format_cell(r.dev->hits3) + ',' +
                   format_cell(r.dev->hits10) + ',' + format_cell(r.dev->hits20) + ',' +
                   format_cell(r.dev->mrr);
        } else {
            out += ",,,,,";
        }
        out += '\n';
    }
    return out;
}

void TrainLog::save_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write train log: " + path);
    out << to_csv();
}

void emit_curves(const TrainLog& log, const std::string& out_dir) {
    if (log.rows.empty()) throw DataError("emit_curves: empty train log");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create curve directory: " + out_dir);

    auto write_metric = [&](const std::string& name, auto getter) {
        std::ofstream out(out_dir + "/" + name + ".csv", std::ios::binary);
        if (!out) throw DataError("cannot write curve file: " + name);
        out << "stage,batch,value\n";
        for (const auto& r : log.rows) {
            const auto v = getter(r);
            if (!v) continue;
            out << r.stage << ',' << r.batch << ',' << format_cell(*v) << '\n';
        }
    };
    auto plain = [](double TrainLogRow::* field) {
        return [field](const TrainLogRow& r) -> std::optional<double> {
            if (std::isnan(r.*field)) return std::nullopt;
            return r.*field;
        };
    };
    write_metric("reward", plain(&TrainLogRow::mean_reward));
    write_metric("sl_loss", plain(&TrainLogRow::sl_loss));
    write_metric("entropy", plain(&TrainLogRow::entropy));
    write_metric("baseline", plain(&TrainLogRow::baseline));
    auto dev_metric = [&](const std::string& name, double MetricSet::* field) {
        write_metric(name, [field](const TrainLogRow& r) -> std::optional<double> {
            if (!r.dev) return std::nullopt;
            return (*r.dev).*field;
        });
    };
    dev_metric("hits1", &MetricSet::hits1);
    dev_metric("hits3", &MetricSet::hits3);
    dev_metric("hits10", &MetricSet::hits10);
    dev_metric("hits20", &MetricSet::hits20);
    dev_metric("mrr", &MetricSet::mrr);
}

TrainResult train(const KnowledgeGraph& g, const LabelCache* cache,
                  std::span<const Query> train_queries, std::span<const Query> dev_queries,
                  const KnownAnswers* known, PolicyDims dims, const Hyperparams& hp) {
    hp.validate();
    if (hp.sl_epochs > 0 && (cache == nullptr || cache->size() == 0)) {
        throw ConfigError("SL stage requires a non-empty label cache");
    }
    if (hp.rl_batches > 0 && train_queries.empty()) {
        throw ConfigError("RL stage requires training queries");
    }

    TrainResult result;
    result.params = init_params<float>(dims, g.entity_count(), g.relation_count_augmented(), hp.seed);

    int global_batch = 0;
    auto snapshot = [&](TrainLogRow& row) {
        if (hp.eval_every <= 0 || dev_queries.empty()) return;
        if ((global_batch + 1) % hp.eval_every != 0) return;
        EvalOptions eo;
        eo.beam_width = hp.beam_width;
        eo.horizon = hp.horizon;
        eo.threads = hp.threads;
        row.dev = evaluate(g, result.params, dev_queries, known, eo).aggregates;
    };

    const double nan = std::numeric_limits<double>::quiet_NaN();
    {
        AdamState adam = AdamState::zeros_like(result.params);
        int sl_batches_done = 0;
        for (int epoch = 0; epoch < hp.sl_epochs; ++epoch) {
            if (hp.sl_max_batches > 0 && sl_batches_done >= hp.sl_max_batches) break;
            Hyperparams epoch_hp = hp;
            if (hp.sl_max_batches > 0) {
                epoch_hp.sl_max_batches = hp.sl_max_batches - sl_batches_done;
            }
            const auto stats = sl_epoch(g, *cache, result.params, epoch_hp, adam, epoch);
            for (const auto& s : stats) {
                TrainLogRow row{"sl", global_batch, s.mean_reward, s.sl_loss, s.entropy, 0.0, {}};
                snapshot(row);
                result.log.rows.push_back(std::move(row));
                ++global_batch;
                ++sl_batches_done;
            }
        }
    }
    result.sl_boundary = result.params;

    {
        // Fresh optimizer state and RL-only RNG streams: resuming from the
        // boundary checkpoint reproduces an unbroken run exactly.
        AdamState adam = AdamState::zeros_like(result.params);
        double baseline = 0.0;
        std::vector<QueryRef> deck;
        std::size_t cursor = 0;
        std::uint64_t pass = 0;
        auto refill = [&]() {
            deck.clear();
            deck.reserve(train_queries.size());
            for (std::size_t i = 0; i < train_queries.size(); ++i) {
                deck.push_back({train_queries[i], static_cast<std::uint64_t>(i)});
            }
            Rng rng = Rng::derive(hp.seed, {kStreamShuffle, kStreamRl, pass});
            rng.shuffle(deck.begin(), deck.end());
            cursor = 0;
            ++pass;
        };
        for (int b = 0; b < hp.rl_batches; ++b) {
            std::vector<QueryRef> batch;
            batch.reserve(static_cast<std::size_t>(hp.batch_size));
            while (batch.size() < static_cast<std::size_t>(hp.batch_size)) {
                if (cursor >= deck.size()) refill();
                batch.push_back(deck[cursor++]);
            }
            const auto s = rl_batch(g, batch, result.params, hp, adam, baseline,
                                    static_cast<std::uint64_t>(b));
            TrainLogRow row{"rl", global_batch, s.mean_reward, nan, s.entropy, s.baseline, {}};
            snapshot(row);
            result.log.rows.push_back(std::move(row));
            ++global_batch;
        }
    }
    return result;
}

std::vector<SweepCell> sweep(const KnowledgeGraph& g, const LabelCache* cache,
                             std::span<const Query> train_queries,
                             std::span<const Query> eval_queries, const KnownAnswers* known,
                             PolicyDims dims, const Hyperparams& hp,
                             std::span<const int> epoch_list) {
    if (epoch_list.empty()) throw ConfigError("sweep requires a non-empty epoch list");
    if (std::find(epoch_list.begin(), epoch_list.end(), 0) == epoch_list.end()) {
        throw ConfigError("sweep epoch list must include 0 (the pure-RL row)");
    }
    if (eval_queries.empty()) throw ConfigError("sweep requires evaluation queries");

    std::vector<std::pair<int, MetricSet>> results;
    for (const int e : epoch_list) {
        Hyperparams run_hp = hp;
        run_hp.sl_epochs = e;
        const auto trained = train(g, cache, train_queries, {}, known, dims, run_hp);
        EvalOptions eo;
        eo.beam_width = hp.beam_width;
        eo.horizon = hp.horizon;
        eo.threads = hp.threads;
        results.emplace_back(e, evaluate(g, trained.params, eval_queries, known, eo).aggregates);
    }
    const MetricSet* base = nullptr;
    for (const auto& [e, m] : results) {
        if (e == 0) {
            base = &m;
            break;
        }
    }

    static constexpr std::pair<const char*, double MetricSet::*> kMetrics[] = {
        {"hits1", &MetricSet::hits1},   {"hits3", &MetricSet::hits3},
        {"hits5", &MetricSet::hits5},   {"hits10", &MetricSet::hits10},
        {"hits20", &MetricSet::hits20}, {"mrr", &MetricSet::mrr},
    };
    std::vector<SweepCell> cells;
    for (const auto& [e, m] : results) {
        for (const auto& [name, field] : kMetrics) {
            cells.push_back({e, name, m.*field, m.*field - base->*field});
        }
    }
    return cells;
}

std::string sweep_to_csv(std::span<const SweepCell> cells) {
    std::string out = "sl_epochs,metric,value,delta_vs_epoch0\n";
    for (const auto& c : cells) {
        out += std::to_string(c.sl_epochs) + ',' + c.metric + ',' + format_cell(c.value) + ',' +
               format_cell(c.delta_vs_epoch0) + '\n';
    }
    return out;
}

}  // namespace ssrl
