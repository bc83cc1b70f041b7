#pragma once

#include <cmath>
#include <span>

#include "ssrl/policy.hpp"

namespace ssrl {

// Element-wise binary cross entropy between the policy output and a 0/1 label
// vector, averaged over the action count. Probabilities are clipped to
// [eps, 1-eps] inside the logs.
template <class S>
S sl_cross_entropy(const Vec<S>& probs, std::span<const std::uint8_t> labels, S eps) {
    if (probs.size() != static_cast<Eigen::Index>(labels.size())) {
        throw InternalError("sl_cross_entropy: label length mismatch");
    }
    const S lo = eps, hi = S(1) - eps;
    S loss = S(0);
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        const S p = std::min(std::max(probs[i], lo), hi);
        loss -= labels[static_cast<std::size_t>(i)] ? std::log(p) : std::log(S(1) - p);
    }
    return loss / static_cast<S>(probs.size());
}

// Exact gradient of sl_cross_entropy w.r.t. the pre-softmax logits (clipped
// coordinates contribute zero through the clip).
template <class S>
Vec<S> sl_cross_entropy_dlogits(const Vec<S>& probs, std::span<const std::uint8_t> labels, S eps) {
    const Eigen::Index n = probs.size();
    if (n != static_cast<Eigen::Index>(labels.size())) {
        throw InternalError("sl_cross_entropy_dlogits: label length mismatch");
    }
    const S lo = eps, hi = S(1) - eps;
    Vec<S> dprob(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const S p = probs[i];
        if (p <= lo || p >= hi) {
            dprob[i] = S(0);
            continue;
        }
        const S y = labels[static_cast<std::size_t>(i)] ? S(1) : S(0);
        dprob[i] = -(y / p - (S(1) - y) / (S(1) - p)) / static_cast<S>(n);
    }
    // Chain through softmax: dlogit_k = pi_k * (dprob_k - sum_i dprob_i pi_i).
    const S inner = dprob.dot(probs);
    return probs.cwiseProduct((dprob.array() - inner).matrix());
}

// Policy entropy in nats, guarded against exact zeros from underflow.
template <class S>
S policy_entropy(const Vec<S>& probs) {
    S h = S(0);
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        if (probs[i] > S(0)) h -= probs[i] * std::log(probs[i]);
    }
    return h;
}

// One REINFORCE step term: objective = log pi(a) * advantage + beta * H(pi).
// Returns the objective value and d(-objective)/d(logits), i.e. the gradient
// of the loss the optimizer descends.
template <class S>
struct RlStepGrad {
    S objective;
    Vec<S> dlogits_loss;
};

template <class S>
RlStepGrad<S> rl_step_objective(const Vec<S>& probs, int action, S advantage, S beta, S eps) {
    const Eigen::Index n = probs.size();
    if (action < 0 || action >= n) throw InternalError("rl_step_objective: action out of range");
    const S h = policy_entropy(probs);
    const S pa = probs[action];
    const S log_pa = std::log(std::max(pa, eps));

    RlStepGrad<S> out;
    out.objective = log_pa * advantage + beta * h;
    Vec<S> dj(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        // d log pi(a) / dlogit_k vanishes when pi(a) sits on the clip floor.
        S pg = S(0);
        if (pa > eps) pg = advantage * ((k == action ? S(1) : S(0)) - probs[k]);
        S dent = S(0);
        if (probs[k] > S(0)) dent = -probs[k] * (std::log(probs[k]) + h);
        dj[k] = pg + beta * dent;
    }
    out.dlogits_loss = -dj;
    return out;
}

// Discounted returns G_t = sum_{k>=t} gamma^{k-t} R_k by reverse accumulation.
std::vector<double> compute_returns(std::span<const float> rewards, double gamma);

}  // namespace ssrl
