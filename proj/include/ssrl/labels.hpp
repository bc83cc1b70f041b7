#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ssrl/graph.hpp"

namespace ssrl {

// A directed non-self-loop edge of the augmented graph.
struct LabeledEdge {
    EntityId head;
    RelationId relation;
    EntityId tail;

    auto operator<=>(const LabeledEdge&) const = default;
};

// Per-query supervision: for every node on a correct path (plus the source and
// the answer set) a 0/1 vector aligned index-by-index with that node's action
// list under the query-masked view. Element 0 is the self-loop and is 1
// exactly for answer entities.
struct LabelSet {
    Query query{};
    std::uint32_t depth = 0;  // D: maximum correct-path length
    std::vector<EntityId> e_all;  // sorted answer set
    std::map<EntityId, std::vector<std::uint8_t>> labels;

    // Interior nodes of correct paths: labeled nodes minus source and e_all.
    std::vector<EntityId> correct_nodes() const;
    bool in_e_all(EntityId e) const;

    bool operator==(const LabelSet&) const = default;
};

struct LabelGenOptions {
    std::uint32_t depth = 3;
    // Hide every (source, relation, *) edge instead of just the query edge.
    bool mask_all_query_edges = false;
};

// E_all: all base tails of (source, relation, ?) in the training graph.
std::vector<EntityId> compute_e_all(const KnowledgeGraph& g, EntityId source, RelationId relation);

// Normative semantics, by exhaustive enumeration: every non-self-loop edge
// lying on at least one simple path (no repeated nodes) of length <= depth
// from `source` to a member of `e_all`, walked over `view`. Sorted.
std::vector<LabeledEdge> oracle_correct_edges(const GraphView& view, EntityId source,
                                              std::span<const EntityId> e_all, std::uint32_t depth);

// Shipped label generator: reverse BFS from the answer set yields an
// admissible remaining-distance bound, then a pruned forward traversal marks
// every edge of every within-budget simple path. Must agree exactly with
// oracle_correct_edges; throws UnlabelableQuery when E_all is empty or no
// answer is reachable within the depth bound.
LabelSet generate_labels(const KnowledgeGraph& g, const Query& query, const LabelGenOptions& opts);

// In-memory cache with query lookup.
class LabelCache {
public:
    LabelCache() = default;
    explicit LabelCache(std::vector<LabelSet> sets);

    const std::vector<LabelSet>& sets() const { return sets_; }
    const LabelSet* find(const Query& q) const;
    std::size_t size() const { return sets_.size(); }

private:
    std::vector<LabelSet> sets_;
    std::map<Query, std::size_t> index_;
};

// Batch generation over a shared read-only graph; queries are independent
// work items. Unlabelable queries are skipped and counted.
struct LabelBatchResult {
    std::vector<LabelSet> sets;        // in input query order
    std::uint64_t unlabelable = 0;
};
LabelBatchResult generate_label_batch(const KnowledgeGraph& g, std::span<const Query> queries,
                                      const LabelGenOptions& opts, int threads);

struct CoverageRow {
    RelationId relation;
    std::uint64_t total = 0;
    std::uint64_t labeled = 0;
};
struct CoverageReport {
    std::uint64_t total = 0;
    std::uint64_t labeled = 0;
    std::vector<CoverageRow> per_relation;  // ascending relation id
    double fraction() const { return total == 0 ? 0.0 : static_cast<double>(labeled) / static_cast<double>(total); }
};
CoverageReport label_coverage(const LabelCache& cache, std::span<const Query> training_queries);

// Binary cache: magic "SSRLLBL1", little-endian u32 counts; per LabelSet the
// query ids, D, the E_all list, and per labeled node its id, vector length,
// and an LSB-first packed bit vector.
void save_labels(std::span<const LabelSet> sets, const std::string& path);
LabelCache load_labels(const std::string& path);

}  // namespace ssrl
