#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssrl/errors.hpp"

namespace ssrl {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId head;
    RelationId relation;
    EntityId tail;

    auto operator<=>(const Triple&) const = default;
};

// One outgoing edge of the augmented graph: take `relation` to land on `entity`.
struct Action {
    RelationId relation;
    EntityId entity;

    auto operator<=>(const Action&) const = default;
};

struct Query {
    EntityId source;
    RelationId relation;
    EntityId target;

    auto operator<=>(const Query&) const = default;
};

// Bidirectional name <-> dense id map; ids follow first-appearance order.
class Vocab {
public:
    std::uint32_t intern(const std::string& name);
    std::optional<std::uint32_t> find(const std::string& name) const;
    const std::string& name(std::uint32_t id) const;
    std::uint32_t size() const { return static_cast<std::uint32_t>(names_.size()); }

    void save(const std::string& path) const;
    static Vocab load(const std::string& path);

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> ids_;
};

struct IngestOptions {
    std::uint32_t max_actions = 256;
    // When set, vocabularies are frozen: unknown names raise DataError.
    // relation_vocab holds base relation names with ids 0..R-1.
    const Vocab* entity_vocab = nullptr;
    const Vocab* relation_vocab = nullptr;
};

// Immutable augmented adjacency over a triple file. Relation ids use the
// layout: 0 = NO_OP, 1..R = base relations (first appearance), R+1..2R =
// inverses (inverse of base b is b + R). Every entity's action list starts
// with the (NO_OP, self) loop and continues with edges sorted ascending by
// (relation, entity), truncated to max_actions entries total.
class KnowledgeGraph {
public:
    static constexpr RelationId kNoOp = 0;
    static constexpr const char* kNoOpName = "NO_OP";

    const Vocab& entities() const { return entities_; }
    const Vocab& relations() const { return relations_; }  // augmented layout
    std::uint32_t entity_count() const { return entities_.size(); }
    std::uint32_t base_relation_count() const { return base_relations_; }
    std::uint32_t relation_count_augmented() const { return 2 * base_relations_ + 1; }
    std::uint64_t fact_count() const { return fact_count_; }
    std::uint32_t max_actions() const { return max_actions_; }

    bool is_base(RelationId r) const { return r >= 1 && r <= base_relations_; }
    bool is_inverse(RelationId r) const { return r > base_relations_ && r < relation_count_augmented(); }
    RelationId inverse(RelationId r) const;

    // Truncated augmented action list; index 0 is always the self-loop.
    std::span<const Action> actions(EntityId e) const;

    // Base (pre-augmentation) out-edges, sorted, untruncated.
    std::span<const Action> base_edges(EntityId e) const;
    bool has_base_edge(EntityId h, RelationId r, EntityId t) const;

    // All base tails of (source, relation, ?): the E_all primitive.
    std::vector<EntityId> base_tails(EntityId source, RelationId relation) const;

    // Predecessors over the truncated augmented adjacency (dedup, sorted).
    std::span<const EntityId> predecessors(EntityId e) const;

    friend KnowledgeGraph ingest_triples(const std::string& path, const IngestOptions& opts);

private:
    Vocab entities_;
    Vocab relations_;
    std::uint32_t base_relations_ = 0;
    std::uint64_t fact_count_ = 0;
    std::uint32_t max_actions_ = 0;
    std::vector<std::vector<Action>> adjacency_;       // augmented, truncated
    std::vector<std::vector<Action>> base_adjacency_;  // facts only
    std::vector<std::vector<EntityId>> predecessors_;
};

KnowledgeGraph ingest_triples(const std::string& path, const IngestOptions& opts = {});

// A cheap value masking up to a handful of directed edges (plus inverses) out
// of the shared immutable graph. Used per query: the query edge is hidden so
// the agent cannot read off the answer.
class GraphView {
public:
    explicit GraphView(const KnowledgeGraph& g) : graph_(&g) {}

    static GraphView mask_edge(const KnowledgeGraph& g, EntityId h, RelationId r, EntityId t);
    // Masks the query triple; with `all_query_edges` every (source, relation, e)
    // base edge is hidden, not just the one to query.target.
    static GraphView mask_query(const KnowledgeGraph& g, const Query& q, bool all_query_edges = false);

    const KnowledgeGraph& graph() const { return *graph_; }
    // Set when asked to mask an edge that does not exist; the view is a no-op.
    bool warning() const { return warning_; }

    bool hides(EntityId h, RelationId r, EntityId t) const;
    std::vector<Action> actions(EntityId e) const;
    std::size_t action_count(EntityId e) const;
    std::optional<std::uint32_t> action_index(EntityId e, const Action& a) const;

private:
    void hide_with_inverse(EntityId h, RelationId r, EntityId t);

    const KnowledgeGraph* graph_;
    std::vector<Triple> hidden_;  // directed, already includes inverses
    bool warning_ = false;
};

struct GraphStats {
    std::uint32_t entity_count = 0;
    std::uint32_t relation_count = 0;  // base relations
    std::uint64_t fact_count = 0;
    double mean_degree = 0.0;    // fact_count / entity_count
    double median_degree = 0.0;  // over per-entity base out-degree
    std::map<RelationId, std::uint64_t> relation_frequency;  // base relation -> facts
    std::optional<double> k_hop_target_fraction;  // absent when no queries given
};

// Degrees count base (pre-augmentation) outgoing edges; the k-hop fraction is
// the share of queries whose target is reachable from the source within
// k_hops steps of the augmented graph.
GraphStats compute_stats(const KnowledgeGraph& g, std::span<const Query> queries = {}, int k_hops = 3);

std::string stats_to_json(const KnowledgeGraph& g, const GraphStats& s);

// Query-file loading: one triple per line against a frozen graph vocabulary.
// Lines mentioning names absent from the vocabulary are skipped and counted.
struct QueryLoadResult {
    std::vector<Query> queries;
    std::uint64_t skipped = 0;
};
QueryLoadResult load_queries(const std::string& path, const KnowledgeGraph& g);

}  // namespace ssrl
