#include "ssrl/env.hpp"

namespace ssrl {

std::string Observation::to_string(const KnowledgeGraph& g) const {
    return "(" + g.entities().name(source) + ", " + g.relations().name(query_relation) + ", " +
           g.entities().name(current) + ")";
}

EnvState env_reset(const KnowledgeGraph& g, const Query& query, int horizon,
                   bool mask_all_query_edges) {
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (query.source >= g.entity_count() || query.target >= g.entity_count() ||
        query.relation >= g.relation_count_augmented()) {
        throw DataError("query ids out of range");
    }
    EnvState s{query, query.source, 0, horizon, GraphView::mask_query(g, query, mask_all_query_edges)};
    return s;
}

namespace {

EntityId apply_action(EnvState& state, std::uint32_t action_index) {
    if (state.done()) throw InternalError("env_step: episode already complete");
    const auto acts = state.view.actions(state.current);
    if (action_index >= acts.size()) {
        throw InternalError("env_step: action index " + std::to_string(action_index) +
                            " out of range (n=" + std::to_string(acts.size()) + ")");
    }
    return acts[action_index].entity;
}

}  // namespace

float env_step(EnvState& state, std::uint32_t action_index) {
    state.current = apply_action(state, action_index);
    state.step += 1;
    if (state.step == state.horizon && state.current == state.query.target) return 1.0f;
    return 0.0f;
}

bool env_sl_step(EnvState& state, std::uint32_t action_index, std::span<const std::uint8_t> label) {
    if (state.done()) throw InternalError("env_sl_step: episode already complete");
    if (label.size() != state.view.action_count(state.current)) {
        throw DataError("label vector length does not match the masked action space; "
                        "regenerate labels with matching mask settings");
    }
    if (action_index >= label.size()) {
        throw InternalError("env_sl_step: action index out of range");
    }
    if (!label[action_index]) return false;
    state.current = apply_action(state, action_index);
    state.step += 1;
    return true;
}

}  // namespace ssrl
