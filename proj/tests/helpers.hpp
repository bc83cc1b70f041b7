#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "ssrl/env.hpp"
#include "ssrl/graph.hpp"
#include "ssrl/labels.hpp"
#include "ssrl/losses.hpp"
#include "ssrl/policy.hpp"
#include "ssrl/rng.hpp"

namespace ssrl::testing {

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = (std::filesystem::temp_directory_path() /
                 ("ssrl_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++)))
                    .string();
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::string& path() const { return path_; }
    std::string file(const std::string& name) const { return path_ + "/" + name; }

private:
    std::string path_;
};

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

using TripleText = std::tuple<std::string, std::string, std::string>;

inline std::string render_triples(const std::vector<TripleText>& triples) {
    std::string text;
    for (const auto& [h, r, t] : triples) text += h + "\t" + r + "\t" + t + "\n";
    return text;
}

inline KnowledgeGraph graph_from_triples(const TempDir& dir, const std::vector<TripleText>& triples,
                                         std::uint32_t max_actions = 256,
                                         const std::string& name = "g.txt") {
    const std::string path = dir.file(name);
    write_file(path, render_triples(triples));
    IngestOptions opts;
    opts.max_actions = max_actions;
    return ingest_triples(path, opts);
}

// The worked label-generation example graph: query (e2, r1, e5), second fact
// (e2, r1, e8), correct paths e2->e1->e5, e2->e1->e4->e5, e2->e3->e8 and the
// backfilled e2->e0->e1->e5; e6/e7 are off-path decoys.
inline std::vector<TripleText> fig2_triples() {
    return {
        {"e2", "r1", "e5"}, {"e2", "r1", "e8"}, {"e2", "r2", "e1"}, {"e2", "r3", "e3"},
        {"e2", "r4", "e0"}, {"e0", "r2", "e1"}, {"e1", "r3", "e4"}, {"e1", "r2", "e5"},
        {"e4", "r2", "e5"}, {"e3", "r2", "e8"}, {"e3", "r5", "e6"}, {"e6", "r5", "e7"},
    };
}

inline std::vector<TripleText> chain_triples() {
    // a -r-> b -r-> c plus the query fact a -rq-> c.
    return {{"a", "r", "b"}, {"b", "r", "c"}, {"a", "rq", "c"}};
}

// Random graph fixtures for oracle-equivalence style properties.
struct RandomGraphSpec {
    int max_nodes = 60;
    int max_out_degree = 6;
    int max_relations = 4;
};

inline std::vector<TripleText> random_triples(Rng& rng, const RandomGraphSpec& spec) {
    const int n = 3 + static_cast<int>(rng.integer(static_cast<std::uint64_t>(spec.max_nodes - 2)));
    const int rels = 1 + static_cast<int>(rng.integer(static_cast<std::uint64_t>(spec.max_relations)));
    std::vector<TripleText> out;
    for (int e = 0; e < n; ++e) {
        const int degree = static_cast<int>(rng.integer(static_cast<std::uint64_t>(spec.max_out_degree + 1)));
        for (int k = 0; k < degree; ++k) {
            const int t = static_cast<int>(rng.integer(static_cast<std::uint64_t>(n)));
            if (t == e) continue;
            out.push_back({"n" + std::to_string(e), "r" + std::to_string(rng.integer(rels)),
                           "n" + std::to_string(t)});
        }
    }
    if (out.empty()) out.push_back({"n0", "r0", "n1"});
    return out;
}

// ---------------------------------------------------------------------------
// Finite-difference oracle for the policy gradients (64-bit).
// A rollout is frozen as (current entity, previous relation, chosen action)
// per step; the loss is recomputed from scratch for perturbed parameters.
// ---------------------------------------------------------------------------

struct FrozenStep {
    EntityId current;
    RelationId prev_relation;
    std::vector<Action> actions;
    int chosen;
    std::vector<std::uint8_t> labels;  // SL mode
    double advantage = 0;              // RL mode
};

struct FrozenRollout {
    RelationId query_relation;
    std::vector<FrozenStep> steps;
    bool sl_mode = true;
    double beta = 0.05;
    double eps = 1e-8;
};

// Builds a frozen random rollout over the graph (actions chosen uniformly).
inline FrozenRollout freeze_rollout(const KnowledgeGraph& g, Rng& rng, int horizon, bool sl_mode) {
    FrozenRollout out;
    out.sl_mode = sl_mode;
    out.query_relation = 1 + static_cast<RelationId>(rng.integer(g.base_relation_count()));
    EntityId cur = static_cast<EntityId>(rng.integer(g.entity_count()));
    RelationId prev = KnowledgeGraph::kNoOp;
    for (int t = 0; t < horizon; ++t) {
        FrozenStep st;
        st.current = cur;
        st.prev_relation = prev;
        const auto acts = g.actions(cur);
        st.actions.assign(acts.begin(), acts.end());
        st.chosen = static_cast<int>(rng.integer(st.actions.size()));
        st.labels.resize(st.actions.size());
        for (auto& b : st.labels) b = rng.integer(2) ? 1 : 0;
        st.advantage = rng.uniform(-1.0, 1.0);
        cur = st.actions[static_cast<std::size_t>(st.chosen)].entity;
        prev = st.actions[static_cast<std::size_t>(st.chosen)].relation;
        out.steps.push_back(std::move(st));
    }
    return out;
}

inline double frozen_loss(const PolicyParams<double>& p, const FrozenRollout& r,
                          RolloutTape<double>* tape = nullptr) {
    LstmState<double> state = zero_state<double>(p.dims);
    double loss = 0;
    for (const auto& st : r.steps) {
        StepTrace<double>* trace = nullptr;
        if (tape) {
            tape->steps.emplace_back();
            trace = &tape->steps.back();
        }
        const auto dist = policy_forward_step(p, state, st.prev_relation, st.current,
                                              r.query_relation, st.actions, trace);
        if (r.sl_mode) {
            loss += sl_cross_entropy<double>(dist.probs, st.labels, r.eps);
        } else {
            const auto step = rl_step_objective<double>(dist.probs, st.chosen, st.advantage,
                                                        r.beta, r.eps);
            loss -= step.objective;
        }
    }
    if (tape) tape->query_relation = r.query_relation;
    return loss;
}

// Central differences are only a valid oracle away from the nondifferentiable
// points of the network: a ReLU pre-activation (or a clipped probability)
// within the FD step of its boundary would make the comparison meaningless.
// Draws that sit too close are rejected and redrawn.
inline bool near_kink(const PolicyParams<double>& p, const FrozenRollout& r,
                      double margin = 1e-4) {
    RolloutTape<double> tape;
    frozen_loss(p, r, &tape);
    for (const auto& st : tape.steps) {
        if (st.ff_pre.cwiseAbs().minCoeff() < margin) return true;
        for (Eigen::Index i = 0; i < st.probs.size(); ++i) {
            if (st.probs[i] < 2 * r.eps || st.probs[i] > 1.0 - 2 * r.eps) return true;
        }
    }
    return false;
}

inline Gradients<double> frozen_analytic_grad(const PolicyParams<double>& p, const FrozenRollout& r) {
    RolloutTape<double> tape;
    frozen_loss(p, r, &tape);
    std::vector<Vec<double>> dlogits;
    for (std::size_t t = 0; t < tape.steps.size(); ++t) {
        const auto& st = r.steps[t];
        if (r.sl_mode) {
            dlogits.push_back(sl_cross_entropy_dlogits<double>(tape.steps[t].probs, st.labels, r.eps));
        } else {
            dlogits.push_back(rl_step_objective<double>(tape.steps[t].probs, st.chosen,
                                                        st.advantage, r.beta, r.eps)
                                  .dlogits_loss);
        }
    }
    Gradients<double> g = Gradients<double>::zeros_like(p);
    backward(p, tape, std::span<const Vec<double>>(dlogits.data(), dlogits.size()), g);
    return g;
}

// Central finite differences over every parameter entry; returns the maximum
// relative error against the analytic gradients.
inline double fd_max_relative_error(PolicyParams<double> p, const FrozenRollout& r,
                                    double h = 1e-5) {
    const Gradients<double> analytic = frozen_analytic_grad(p, r);
    double max_rel = 0;
    auto compare = [&](double ana, double fd) {
        const double scale = std::max(std::abs(ana), std::abs(fd));
        if (scale < 1e-6) {
            // Central differences with h = 1e-5 bottom out near 5e-12 of
            // roundoff; below this scale a relative comparison measures that
            // noise, so require tight absolute agreement instead.
            if (std::abs(ana - fd) > 1e-9) max_rel = std::max(max_rel, 1.0);
            return;
        }
        max_rel = std::max(max_rel, std::abs(ana - fd) / scale);
    };
    auto fd_entry = [&](double& entry) {
        const double saved = entry;
        entry = saved + h;
        const double up = frozen_loss(p, r);
        entry = saved - h;
        const double down = frozen_loss(p, r);
        entry = saved;
        return (up - down) / (2 * h);
    };

    auto sweep_dense = [&](Mat<double>& theta, const Mat<double>& ana) {
        for (Eigen::Index i = 0; i < theta.rows(); ++i) {
            for (Eigen::Index j = 0; j < theta.cols(); ++j) {
                compare(ana(i, j), fd_entry(theta(i, j)));
            }
        }
    };
    auto sweep_vec = [&](Vec<double>& theta, const Vec<double>& ana) {
        for (Eigen::Index i = 0; i < theta.size(); ++i) compare(ana[i], fd_entry(theta[i]));
    };

    sweep_dense(p.lstm_wx, analytic.lstm_wx);
    sweep_dense(p.lstm_wh, analytic.lstm_wh);
    sweep_vec(p.lstm_b, analytic.lstm_b);
    sweep_dense(p.w1, analytic.w1);
    sweep_vec(p.b1, analytic.b1);
    sweep_dense(p.w2, analytic.w2);
    sweep_vec(p.b2, analytic.b2);

    const Vec<double> zero_row = Vec<double>::Zero(p.dims.embed);
    for (Eigen::Index row = 0; row < p.entity_emb.rows(); ++row) {
        auto it = analytic.entity_rows.find(static_cast<EntityId>(row));
        const Vec<double>& ana = it == analytic.entity_rows.end() ? zero_row : it->second;
        for (Eigen::Index j = 0; j < p.entity_emb.cols(); ++j) {
            compare(ana[j], fd_entry(p.entity_emb(row, j)));
        }
    }
    for (Eigen::Index row = 0; row < p.relation_emb.rows(); ++row) {
        auto it = analytic.relation_rows.find(static_cast<RelationId>(row));
        const Vec<double>& ana = it == analytic.relation_rows.end() ? zero_row : it->second;
        for (Eigen::Index j = 0; j < p.relation_emb.cols(); ++j) {
            compare(ana[j], fd_entry(p.relation_emb(row, j)));
        }
    }
    return max_rel;
}

}  // namespace ssrl::testing
