#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssrl/graph.hpp"
#include "ssrl/policy.hpp"

namespace ssrl {

// What the agent is allowed to see: the query context and where it stands.
// The target entity is deliberately absent.
struct Observation {
    EntityId source;
    RelationId query_relation;
    EntityId current;

    std::string to_string(const KnowledgeGraph& g) const;
};

// Deterministic partially observed MDP: reset to a query, walk outgoing edges
// for exactly `horizon` steps, terminal reward 1 iff the walk ends on the
// target.
struct EnvState {
    Query query{};
    EntityId current = 0;
    int step = 0;
    int horizon = 0;
    GraphView view;

    Observation observation() const { return {query.source, query.relation, current}; }
    bool done() const { return step >= horizon; }
};

EnvState env_reset(const KnowledgeGraph& g, const Query& query, int horizon,
                   bool mask_all_query_edges = false);

// Applies the chosen action; returns the reward (nonzero only when the step
// just taken was the last one and the walk ends on the target).
float env_step(EnvState& state, std::uint32_t action_index);

// SL variant: the move is applied only when the action carries label 1;
// otherwise the agent stays put and the time step is NOT consumed (the caller
// resamples, with a stall cap). Returns whether the move was applied.
bool env_sl_step(EnvState& state, std::uint32_t action_index, std::span<const std::uint8_t> label);

// One recorded rollout. Steps cover each consumed time index; in SL mode a
// step's `applied` is false only when a rejected sample was configured to
// consume the clock. Length is the horizon unless an SL episode ran out of
// labels and was truncated.
struct TrajectoryStep {
    Observation observation;
    ActionDist<float> distribution;
    int action = -1;
    bool applied = true;
    float reward = 0;
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;
    float terminal_reward = 0;
    bool truncated = false;        // SL labels exhausted
    std::vector<double> returns;   // discounted; filled for RL rollouts
};

}  // namespace ssrl
