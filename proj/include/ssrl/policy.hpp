#pragma once

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ssrl/errors.hpp"
#include "ssrl/graph.hpp"
#include "ssrl/rng.hpp"

namespace ssrl {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

struct PolicyDims {
    int embed = 64;        // d: entity/relation embedding width
    int hidden = 64;       // H: LSTM hidden size
    int feedforward = 128; // F: ReLU layer width

    bool operator==(const PolicyDims&) const = default;
};

// All trainable tensors. LSTM gate order is [input, forget, cell, output];
// the forget block of lstm_b starts at +1.
template <class S>
struct PolicyParams {
    PolicyDims dims;
    Mat<S> entity_emb;    // |E| x d
    Mat<S> relation_emb;  // |R_aug| x d
    Mat<S> lstm_wx;       // 4H x 2d
    Mat<S> lstm_wh;       // 4H x H
    Vec<S> lstm_b;        // 4H
    Mat<S> w1;            // F x (H + d)
    Vec<S> b1;            // F
    Mat<S> w2;            // 2d x F
    Vec<S> b2;            // 2d

    std::uint32_t entity_count() const { return static_cast<std::uint32_t>(entity_emb.rows()); }
    std::uint32_t relation_count() const { return static_cast<std::uint32_t>(relation_emb.rows()); }

    std::size_t parameter_count() const {
        return static_cast<std::size_t>(entity_emb.size()) + static_cast<std::size_t>(relation_emb.size()) +
               static_cast<std::size_t>(lstm_wx.size()) + static_cast<std::size_t>(lstm_wh.size()) +
               static_cast<std::size_t>(lstm_b.size()) + static_cast<std::size_t>(w1.size()) +
               static_cast<std::size_t>(b1.size()) + static_cast<std::size_t>(w2.size()) +
               static_cast<std::size_t>(b2.size());
    }

    bool all_finite() const {
        auto ok = [](const auto& m) { return m.allFinite(); };
        return ok(entity_emb) && ok(relation_emb) && ok(lstm_wx) && ok(lstm_wh) && ok(lstm_b) &&
               ok(w1) && ok(b1) && ok(w2) && ok(b2);
    }

    template <class T>
    PolicyParams<T> cast() const {
        PolicyParams<T> out;
        out.dims = dims;
        out.entity_emb = entity_emb.template cast<T>();
        out.relation_emb = relation_emb.template cast<T>();
        out.lstm_wx = lstm_wx.template cast<T>();
        out.lstm_wh = lstm_wh.template cast<T>();
        out.lstm_b = lstm_b.template cast<T>();
        out.w1 = w1.template cast<T>();
        out.b1 = b1.template cast<T>();
        out.w2 = w2.template cast<T>();
        out.b2 = b2.template cast<T>();
        return out;
    }
};

// Visits every tensor in a fixed order; Fn(name, tensor&).
template <class S, class P, class Fn>
void visit_tensors(P&& p, Fn&& fn) {
    fn("entity_emb", p.entity_emb);
    fn("relation_emb", p.relation_emb);
    fn("lstm_wx", p.lstm_wx);
    fn("lstm_wh", p.lstm_wh);
    fn("lstm_b", p.lstm_b);
    fn("w1", p.w1);
    fn("b1", p.b1);
    fn("w2", p.w2);
    fn("b2", p.b2);
}

template <class S>
PolicyParams<S> init_params(PolicyDims dims, std::uint32_t entity_count,
                            std::uint32_t relation_count_augmented, std::uint64_t seed) {
    if (dims.embed <= 0 || dims.hidden <= 0 || dims.feedforward <= 0) {
        throw ConfigError("policy dimensions must be positive");
    }
    if (entity_count == 0 || relation_count_augmented == 0) {
        throw ConfigError("policy needs nonempty vocabularies");
    }
    const int d = dims.embed, H = dims.hidden, F = dims.feedforward;
    PolicyParams<S> p;
    p.dims = dims;
    p.entity_emb.resize(entity_count, d);
    p.relation_emb.resize(relation_count_augmented, d);
    p.lstm_wx.resize(4 * H, 2 * d);
    p.lstm_wh.resize(4 * H, H);
    p.lstm_b = Vec<S>::Zero(4 * H);
    p.w1.resize(F, H + d);
    p.b1 = Vec<S>::Zero(F);
    p.w2.resize(2 * d, F);
    p.b2 = Vec<S>::Zero(2 * d);

    Rng rng = Rng::derive(seed, {kStreamInit});
    auto xavier = [&](Mat<S>& m) {
        const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                m(r, c) = static_cast<S>(rng.uniform(-bound, bound));
            }
        }
    };
    xavier(p.entity_emb);
    xavier(p.relation_emb);
    xavier(p.lstm_wx);
    xavier(p.lstm_wh);
    xavier(p.w1);
    xavier(p.w2);
    p.lstm_b.segment(H, H).array() += static_cast<S>(1);  // forget-gate bias
    return p;
}

template <class S>
struct LstmState {
    Vec<S> hidden;  // h_t
    Vec<S> cell;
    int step = 0;
};

template <class S>
LstmState<S> zero_state(const PolicyDims& dims) {
    return {Vec<S>::Zero(dims.hidden), Vec<S>::Zero(dims.hidden), 0};
}

template <class S>
struct ActionDist {
    std::vector<Action> actions;
    Vec<S> logits;
    Vec<S> probs;

    double entropy() const {
        double h = 0.0;
        for (Eigen::Index i = 0; i < probs.size(); ++i) {
            const double p = static_cast<double>(probs[i]);
            if (p > 0.0) h -= p * std::log(p);
        }
        return h;
    }
};

// Everything the reverse pass needs about one time step.
template <class S>
struct StepTrace {
    RelationId prev_relation = 0;
    EntityId current = 0;
    std::vector<Action> actions;
    Vec<S> x, h_prev, c_prev;
    Vec<S> gi, gf, gg, go;  // post-activation gates
    Vec<S> c, tc, h;
    Vec<S> ff_pre, relu_out, z;
    Vec<S> logits, probs;
};

template <class S>
struct RolloutTape {
    RelationId query_relation = 0;
    std::vector<StepTrace<S>> steps;
};

namespace detail {

template <class S>
void stable_softmax(const Vec<S>& logits, Vec<S>& probs) {
    const S m = logits.maxCoeff();
    probs = (logits.array() - m).exp();
    probs /= probs.sum();
}

}  // namespace detail

// Advances the recurrent state by one step and scores the given action list.
// `trace`, when non-null, records activations for the reverse pass.
template <class S>
ActionDist<S> policy_forward_step(const PolicyParams<S>& p, LstmState<S>& state,
                                  RelationId prev_relation, EntityId current,
                                  RelationId query_relation, std::span<const Action> actions,
                                  StepTrace<S>* trace = nullptr) {
    if (actions.empty()) throw InternalError("policy_forward_step: empty action list");
    const int d = p.dims.embed, H = p.dims.hidden;

    Vec<S> x(2 * d);
    x.head(d) = p.relation_emb.row(prev_relation).transpose();
    x.tail(d) = p.entity_emb.row(current).transpose();

    Vec<S> pre = p.lstm_wx * x + p.lstm_wh * state.hidden + p.lstm_b;
    auto sigmoid = [](const auto& v) { return (S(1) / (S(1) + (-v.array()).exp())).matrix().eval(); };
    const Vec<S> gi = sigmoid(pre.segment(0, H));
    const Vec<S> gf = sigmoid(pre.segment(H, H));
    const Vec<S> gg = pre.segment(2 * H, H).array().tanh();
    const Vec<S> go = sigmoid(pre.segment(3 * H, H));
    const Vec<S> c = gf.cwiseProduct(state.cell) + gi.cwiseProduct(gg);
    const Vec<S> tc = c.array().tanh();
    const Vec<S> h = go.cwiseProduct(tc);

    Vec<S> u(H + d);
    u.head(H) = h;
    u.tail(d) = p.relation_emb.row(query_relation).transpose();
    const Vec<S> ff_pre = p.w1 * u + p.b1;
    const Vec<S> relu_out = ff_pre.cwiseMax(S(0));
    const Vec<S> z = p.w2 * relu_out + p.b2;

    ActionDist<S> dist;
    dist.actions.assign(actions.begin(), actions.end());
    dist.logits.resize(static_cast<Eigen::Index>(actions.size()));
    for (std::size_t k = 0; k < actions.size(); ++k) {
        dist.logits[static_cast<Eigen::Index>(k)] =
            p.relation_emb.row(actions[k].relation).dot(z.head(d).transpose()) +
            p.entity_emb.row(actions[k].entity).dot(z.tail(d).transpose());
    }
    detail::stable_softmax(dist.logits, dist.probs);

    if (trace) {
        trace->prev_relation = prev_relation;
        trace->current = current;
        trace->actions = dist.actions;
        trace->x = x;
        trace->h_prev = state.hidden;
        trace->c_prev = state.cell;
        trace->gi = gi;
        trace->gf = gf;
        trace->gg = gg;
        trace->go = go;
        trace->c = c;
        trace->tc = tc;
        trace->h = h;
        trace->ff_pre = ff_pre;
        trace->relu_out = relu_out;
        trace->z = z;
        trace->logits = dist.logits;
        trace->probs = dist.probs;
    }

    state.hidden = h;
    state.cell = c;
    state.step += 1;
    return dist;
}

// Spec-shaped wrappers over the fused step.
template <class S>
LstmState<S> lstm_step(const PolicyParams<S>& p, const LstmState<S>& history,
                       RelationId prev_relation, EntityId current) {
    LstmState<S> s = history;
    // Scoring against a dummy single action does not affect the state.
    const Action self{KnowledgeGraph::kNoOp, current};
    policy_forward_step(p, s, prev_relation, current, KnowledgeGraph::kNoOp, std::span(&self, 1));
    return s;
}

template <class S>
ActionDist<S> score_actions(const PolicyParams<S>& p, const LstmState<S>& history,
                            RelationId query_relation, std::span<const Action> actions) {
    if (actions.empty()) throw InternalError("score_actions: empty action list");
    const int d = p.dims.embed, H = p.dims.hidden;
    Vec<S> u(H + d);
    u.head(H) = history.hidden;
    u.tail(d) = p.relation_emb.row(query_relation).transpose();
    const Vec<S> relu_out = (p.w1 * u + p.b1).cwiseMax(S(0));
    const Vec<S> z = p.w2 * relu_out + p.b2;
    ActionDist<S> dist;
    dist.actions.assign(actions.begin(), actions.end());
    dist.logits.resize(static_cast<Eigen::Index>(actions.size()));
    for (std::size_t k = 0; k < actions.size(); ++k) {
        dist.logits[static_cast<Eigen::Index>(k)] =
            p.relation_emb.row(actions[k].relation).dot(z.head(d).transpose()) +
            p.entity_emb.row(actions[k].entity).dot(z.tail(d).transpose());
    }
    detail::stable_softmax(dist.logits, dist.probs);
    return dist;
}

// Loss gradients w.r.t. every tensor; embedding gradients are sparse over the
// rows actually touched.
template <class S>
struct Gradients {
    Mat<S> lstm_wx, lstm_wh;
    Vec<S> lstm_b;
    Mat<S> w1;
    Vec<S> b1;
    Mat<S> w2;
    Vec<S> b2;
    std::map<EntityId, Vec<S>> entity_rows;
    std::map<RelationId, Vec<S>> relation_rows;

    static Gradients zeros_like(const PolicyParams<S>& p) {
        Gradients g;
        g.lstm_wx = Mat<S>::Zero(p.lstm_wx.rows(), p.lstm_wx.cols());
        g.lstm_wh = Mat<S>::Zero(p.lstm_wh.rows(), p.lstm_wh.cols());
        g.lstm_b = Vec<S>::Zero(p.lstm_b.size());
        g.w1 = Mat<S>::Zero(p.w1.rows(), p.w1.cols());
        g.b1 = Vec<S>::Zero(p.b1.size());
        g.w2 = Mat<S>::Zero(p.w2.rows(), p.w2.cols());
        g.b2 = Vec<S>::Zero(p.b2.size());
        return g;
    }

    void add(const Gradients& other) {
        lstm_wx += other.lstm_wx;
        lstm_wh += other.lstm_wh;
        lstm_b += other.lstm_b;
        w1 += other.w1;
        b1 += other.b1;
        w2 += other.w2;
        b2 += other.b2;
        for (const auto& [k, v] : other.entity_rows) {
            auto it = entity_rows.find(k);
            if (it == entity_rows.end()) {
                entity_rows.emplace(k, v);
            } else {
                it->second += v;
            }
        }
        for (const auto& [k, v] : other.relation_rows) {
            auto it = relation_rows.find(k);
            if (it == relation_rows.end()) {
                relation_rows.emplace(k, v);
            } else {
                it->second += v;
            }
        }
    }
};

// Reverse-mode accumulation through the recorded rollout: given d(loss)/d(logits)
// per step, adds d(loss)/d(theta) into `out`, including backpropagation through
// time and into the touched embedding rows.
template <class S>
void backward(const PolicyParams<S>& p, const RolloutTape<S>& tape,
              std::span<const Vec<S>> dlogits_per_step, Gradients<S>& out) {
    if (dlogits_per_step.size() != tape.steps.size()) {
        throw InternalError("backward: per-step gradient count does not match tape");
    }
    const int d = p.dims.embed, H = p.dims.hidden;
    auto ent_row = [&](EntityId e) -> Vec<S>& {
        auto it = out.entity_rows.find(e);
        if (it == out.entity_rows.end()) it = out.entity_rows.emplace(e, Vec<S>::Zero(d)).first;
        return it->second;
    };
    auto rel_row = [&](RelationId r) -> Vec<S>& {
        auto it = out.relation_rows.find(r);
        if (it == out.relation_rows.end()) it = out.relation_rows.emplace(r, Vec<S>::Zero(d)).first;
        return it->second;
    };

    Vec<S> dh_next = Vec<S>::Zero(H);
    Vec<S> dc_next = Vec<S>::Zero(H);
    for (std::ptrdiff_t t = static_cast<std::ptrdiff_t>(tape.steps.size()) - 1; t >= 0; --t) {
        const StepTrace<S>& st = tape.steps[static_cast<std::size_t>(t)];
        const Vec<S>& dlogits = dlogits_per_step[static_cast<std::size_t>(t)];
        if (dlogits.size() != static_cast<Eigen::Index>(st.actions.size())) {
            throw InternalError("backward: dlogits length mismatch at step " + std::to_string(t));
        }

        Vec<S> dz = Vec<S>::Zero(2 * d);
        for (std::size_t k = 0; k < st.actions.size(); ++k) {
            const S gk = dlogits[static_cast<Eigen::Index>(k)];
            if (gk == S(0)) continue;
            dz.head(d) += gk * p.relation_emb.row(st.actions[k].relation).transpose();
            dz.tail(d) += gk * p.entity_emb.row(st.actions[k].entity).transpose();
            rel_row(st.actions[k].relation) += gk * st.z.head(d);
            ent_row(st.actions[k].entity) += gk * st.z.tail(d);
        }

        out.w2 += dz * st.relu_out.transpose();
        out.b2 += dz;
        Vec<S> drelu = p.w2.transpose() * dz;
        const Vec<S> dp1 =
            (st.relu_out.array() > S(0)).select(drelu.array(), S(0)).matrix();
        Vec<S> u(H + d);
        u.head(H) = st.h;
        u.tail(d) = p.relation_emb.row(tape.query_relation).transpose();
        out.w1 += dp1 * u.transpose();
        out.b1 += dp1;
        const Vec<S> du = p.w1.transpose() * dp1;
        Vec<S> dh = du.head(H) + dh_next;
        rel_row(tape.query_relation) += du.tail(d);

        const Vec<S> dgo = dh.cwiseProduct(st.tc);
        const Vec<S> dtc = dh.cwiseProduct(st.go);
        const Vec<S> dc =
            dc_next + dtc.cwiseProduct((S(1) - st.tc.array().square()).matrix());
        const Vec<S> dgi = dc.cwiseProduct(st.gg);
        const Vec<S> dgg = dc.cwiseProduct(st.gi);
        const Vec<S> dgf = dc.cwiseProduct(st.c_prev);

        Vec<S> da(4 * H);
        da.segment(0, H) = dgi.array() * st.gi.array() * (S(1) - st.gi.array());
        da.segment(H, H) = dgf.array() * st.gf.array() * (S(1) - st.gf.array());
        da.segment(2 * H, H) = dgg.array() * (S(1) - st.gg.array().square());
        da.segment(3 * H, H) = dgo.array() * st.go.array() * (S(1) - st.go.array());

        out.lstm_wx += da * st.x.transpose();
        out.lstm_wh += da * st.h_prev.transpose();
        out.lstm_b += da;
        const Vec<S> dx = p.lstm_wx.transpose() * da;
        rel_row(st.prev_relation) += dx.head(d);
        ent_row(st.current) += dx.tail(d);

        dh_next = p.lstm_wh.transpose() * da;
        dc_next = dc.cwiseProduct(st.gf);
    }
}

// Checkpoint IO (32-bit tensors on disk).
struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::string stage;  // "init" | "sl" | "rl"
    int epoch = 0;
    std::string config_hash;
};

void save_checkpoint(const PolicyParams<float>& params, const std::string& path,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
    PolicyParams<float> params;
    CheckpointMeta meta;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

// Rejects checkpoints whose embedding tables do not match the graph.
void validate_checkpoint(const PolicyParams<float>& params, const KnowledgeGraph& g);

}  // namespace ssrl
