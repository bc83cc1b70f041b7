#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ssrl/graph.hpp"
#include "ssrl/policy.hpp"

namespace ssrl {

inline constexpr std::uint64_t kRankInf = std::numeric_limits<std::uint64_t>::max();

// All (head, relation) -> tails facts known across splits; used by filtered
// ranking to discount other correct answers.
class KnownAnswers {
public:
    void add(EntityId head, RelationId relation, EntityId tail);
    void add_all(std::span<const Query> queries);
    bool contains(EntityId head, RelationId relation, EntityId tail) const;

private:
    std::map<std::pair<EntityId, RelationId>, std::set<EntityId>> facts_;
};

struct BeamEntry {
    std::vector<Action> path;  // length = horizon
    double log_prob = 0.0;
    EntityId terminal = 0;
};

struct BeamStats {
    std::uint64_t unique_paths = 0;  // distinct full-length sequences materialized
};

// Width-B beam over action sequences of exactly `horizon` steps, scored by
// summed log-probability. Ties break by path lexicographic order. The query
// edge is masked (it normally is not even present for test queries).
std::vector<BeamEntry> beam_search(const KnowledgeGraph& g, const PolicyParams<float>& params,
                                   const Query& query, int horizon, int width,
                                   BeamStats* stats = nullptr, bool mask_query = true);

// Rank of the query target among deduplicated terminal entities (each keeps
// its best log-prob; ties break by entity id ascending). With `filtered`,
// other known correct answers ranked above the target are skipped.
std::uint64_t rank_answers(std::span<const BeamEntry> beams, const Query& query,
                           const KnownAnswers* known, bool filtered);

struct MetricSet {
    double hits1 = 0, hits3 = 0, hits5 = 0, hits10 = 0, hits20 = 0;
    double mrr = 0;
    std::uint64_t count = 0;

    double hits(int k) const;
};

// Hits@k = fraction of ranks <= k; MRR = mean of 1/rank with 1/inf = 0.
MetricSet metrics(std::span<const std::uint64_t> ranks);

struct RelationRow {
    RelationId relation;
    std::uint64_t count = 0;
    std::uint64_t hits1_count = 0;
    double mrr = 0;
};

struct SplitReport {
    std::optional<MetricSet> to_many;  // |E_all| > 1 on the training graph
    std::optional<MetricSet> to_one;
    std::vector<RelationRow> per_relation;  // ascending relation id
};

SplitReport split_report(std::span<const Query> queries, const KnowledgeGraph& g,
                         std::span<const std::uint64_t> ranks);

struct EvalOptions {
    int beam_width = 100;
    int horizon = 3;
    bool filtered = true;
    bool mask_query = true;
    bool per_query = false;
    int threads = 0;
};

struct PerQueryResult {
    Query query;
    std::uint64_t rank = kRankInf;
    std::uint64_t unique_paths = 0;
};

struct EvalReport {
    MetricSet aggregates;
    SplitReport splits;
    double mean_unique_paths_success = 0;  // over queries whose answer was found
    double mean_unique_paths_failure = 0;
    std::vector<PerQueryResult> per_query;  // filled when requested

    std::string to_json(const KnowledgeGraph& g, bool include_per_query) const;
};

EvalReport evaluate(const KnowledgeGraph& g, const PolicyParams<float>& params,
                    std::span<const Query> queries, const KnownAnswers* known,
                    const EvalOptions& opts);

// Renders beams as "a —r→ b —NO_OP→ b", annotated [exact]/[incorrect] against
// the target when one is given.
std::string decode_paths(std::span<const BeamEntry> beams, const KnowledgeGraph& g, int top_n,
                         std::optional<EntityId> target, EntityId source);

}  // namespace ssrl
