#include "ssrl/labels.hpp"

#include <algorithm>
#include <cstring>
#include <deque>
#include <fstream>
#include <limits>
#include <set>

#include "ssrl/exec.hpp"

namespace ssrl {

std::vector<EntityId> LabelSet::correct_nodes() const {
    std::vector<EntityId> out;
    for (const auto& [node, vec] : labels) {
        if (node == query.source || in_e_all(node)) continue;
        out.push_back(node);
    }
    return out;
}

bool LabelSet::in_e_all(EntityId e) const {
    return std::binary_search(e_all.begin(), e_all.end(), e);
}

std::vector<EntityId> compute_e_all(const KnowledgeGraph& g, EntityId source, RelationId relation) {
    auto tails = g.base_tails(source, relation);
    std::sort(tails.begin(), tails.end());
    tails.erase(std::unique(tails.begin(), tails.end()), tails.end());
    return tails;
}

namespace {

// Plain exhaustive DFS over simple paths; marks every stack edge whenever the
// walk stands on an answer entity. Exponential, used as the ground truth.
struct OracleDfs {
    const GraphView& view;
    const std::vector<EntityId>& targets;  // sorted
    std::uint32_t depth;
    std::set<LabeledEdge> marked;
    std::vector<LabeledEdge> stack_edges;
    std::vector<std::uint8_t> on_stack;

    void walk(EntityId node, std::uint32_t used) {
        if (used >= depth) return;
        for (const auto& a : view.actions(node)) {
            if (a.entity == node || on_stack[a.entity]) continue;
            stack_edges.push_back({node, a.relation, a.entity});
            if (std::binary_search(targets.begin(), targets.end(), a.entity)) {
                marked.insert(stack_edges.begin(), stack_edges.end());
            }
            on_stack[a.entity] = 1;
            walk(a.entity, used + 1);
            on_stack[a.entity] = 0;
            stack_edges.pop_back();
        }
    }
};

constexpr std::uint32_t kUnreachable = std::numeric_limits<std::uint32_t>::max();

// Unconstrained shortest distance to the nearest answer entity, over the
// reverse augmented adjacency, capped at `depth`. Ignoring masks and the
// simplicity constraint only shortens distances, so the bound stays
// admissible for pruning.
std::vector<std::uint32_t> reverse_distance_bound(const KnowledgeGraph& g,
                                                  std::span<const EntityId> targets,
                                                  std::uint32_t depth) {
    std::vector<std::uint32_t> dist(g.entity_count(), kUnreachable);
    std::deque<EntityId> frontier;
    for (EntityId t : targets) {
        dist[t] = 0;
        frontier.push_back(t);
    }
    while (!frontier.empty()) {
        const EntityId u = frontier.front();
        frontier.pop_front();
        if (dist[u] >= depth) continue;
        for (EntityId p : g.predecessors(u)) {
            if (dist[p] != kUnreachable) continue;
            dist[p] = dist[u] + 1;
            frontier.push_back(p);
        }
    }
    return dist;
}

// Pruned simple-path traversal: identical marking rule to the oracle, but
// branches that cannot reach any answer within the remaining budget are cut
// using the reverse-BFS bound.
struct PrunedDfs {
    const GraphView& view;
    const std::vector<EntityId>& targets;
    const std::vector<std::uint32_t>& dist_bound;
    std::uint32_t depth;
    std::set<LabeledEdge> marked;
    std::vector<LabeledEdge> stack_edges;
    std::vector<std::uint8_t> on_stack;

    void walk(EntityId node, std::uint32_t used) {
        if (used >= depth) return;
        for (const auto& a : view.actions(node)) {
            if (a.entity == node || on_stack[a.entity]) continue;
            if (dist_bound[a.entity] == kUnreachable || used + 1 + dist_bound[a.entity] > depth) continue;
            stack_edges.push_back({node, a.relation, a.entity});
            if (std::binary_search(targets.begin(), targets.end(), a.entity)) {
                marked.insert(stack_edges.begin(), stack_edges.end());
            }
            on_stack[a.entity] = 1;
            walk(a.entity, used + 1);
            on_stack[a.entity] = 0;
            stack_edges.pop_back();
        }
    }
};

LabelSet build_label_set(const GraphView& view, const Query& query,
                         std::vector<EntityId> e_all, std::uint32_t depth,
                         const std::set<LabeledEdge>& edges) {
    LabelSet ls;
    ls.query = query;
    ls.depth = depth;
    ls.e_all = std::move(e_all);

    auto vector_for = [&](EntityId node) -> std::vector<std::uint8_t>& {
        auto it = ls.labels.find(node);
        if (it == ls.labels.end()) {
            it = ls.labels.emplace(node, std::vector<std::uint8_t>(view.action_count(node), 0)).first;
        }
        return it->second;
    };

    for (EntityId m : ls.e_all) {
        vector_for(m)[0] = 1;  // self-loop marked correct on answer entities
    }
    for (const auto& e : edges) {
        const auto idx = view.action_index(e.head, {e.relation, e.tail});
        if (!idx) throw InternalError("labeled edge missing from masked action space");
        vector_for(e.head)[*idx] = 1;
    }
    return ls;
}

}  // namespace

std::vector<LabeledEdge> oracle_correct_edges(const GraphView& view, EntityId source,
                                              std::span<const EntityId> e_all, std::uint32_t depth) {
    std::vector<EntityId> targets(e_all.begin(), e_all.end());
    std::sort(targets.begin(), targets.end());
    OracleDfs dfs{view, targets, depth, {}, {}, std::vector<std::uint8_t>(view.graph().entity_count(), 0)};
    dfs.on_stack[source] = 1;
    dfs.walk(source, 0);
    return {dfs.marked.begin(), dfs.marked.end()};
}

LabelSet generate_labels(const KnowledgeGraph& g, const Query& query, const LabelGenOptions& opts) {
    if (opts.depth < 1) throw ConfigError("label depth must be >= 1");
    auto e_all = compute_e_all(g, query.source, query.relation);
    if (e_all.empty()) {
        throw UnlabelableQuery("unlabelable query: empty answer set");
    }
    const GraphView view = GraphView::mask_query(g, query, opts.mask_all_query_edges);
    const auto dist = reverse_distance_bound(g, e_all, opts.depth);

    PrunedDfs dfs{view, e_all, dist, opts.depth, {}, {},
                  std::vector<std::uint8_t>(g.entity_count(), 0)};
    dfs.on_stack[query.source] = 1;
    dfs.walk(query.source, 0);

    const bool source_is_answer = std::binary_search(e_all.begin(), e_all.end(), query.source);
    if (dfs.marked.empty() && !source_is_answer) {
        throw UnlabelableQuery("unlabelable query: no answer reachable within depth bound");
    }
    return build_label_set(view, query, std::move(e_all), opts.depth, dfs.marked);
}

LabelCache::LabelCache(std::vector<LabelSet> sets) : sets_(std::move(sets)) {
    for (std::size_t i = 0; i < sets_.size(); ++i) {
        index_.emplace(sets_[i].query, i);
    }
}

const LabelSet* LabelCache::find(const Query& q) const {
    auto it = index_.find(q);
    return it == index_.end() ? nullptr : &sets_[it->second];
}

LabelBatchResult generate_label_batch(const KnowledgeGraph& g, std::span<const Query> queries,
                                      const LabelGenOptions& opts, int threads) {
    std::vector<std::optional<LabelSet>> slots(queries.size());
    run_items(static_cast<std::int64_t>(queries.size()), threads, [&](std::int64_t i) {
        try {
            slots[static_cast<std::size_t>(i)] = generate_labels(g, queries[static_cast<std::size_t>(i)], opts);
        } catch (const UnlabelableQuery&) {
            // skipped; surfaced via the counter below
        }
    });
    LabelBatchResult out;
    for (auto& s : slots) {
        if (s) {
            out.sets.push_back(std::move(*s));
        } else {
            ++out.unlabelable;
        }
    }
    return out;
}

CoverageReport label_coverage(const LabelCache& cache, std::span<const Query> training_queries) {
    CoverageReport r;
    std::map<RelationId, CoverageRow> rows;
    for (const auto& q : training_queries) {
        ++r.total;
        auto& row = rows[q.relation];
        row.relation = q.relation;
        ++row.total;
        if (cache.find(q) != nullptr) {
            ++r.labeled;
            ++row.labeled;
        }
    }
    for (auto& [rel, row] : rows) r.per_relation.push_back(row);
    return r;
}

namespace {

constexpr char kLabelMagic[8] = {'S', 'S', 'R', 'L', 'L', 'B', 'L', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw DataError(std::string("label cache truncated while reading ") + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_labels(std::span<const LabelSet> sets, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write label cache: " + path);
    out.write(kLabelMagic, 8);
    write_u32(out, static_cast<std::uint32_t>(sets.size()));
    for (const auto& ls : sets) {
        write_u32(out, ls.query.source);
        write_u32(out, ls.query.relation);
        write_u32(out, ls.query.target);
        write_u32(out, ls.depth);
        write_u32(out, static_cast<std::uint32_t>(ls.e_all.size()));
        for (EntityId e : ls.e_all) write_u32(out, e);
        write_u32(out, static_cast<std::uint32_t>(ls.labels.size()));
        for (const auto& [node, vec] : ls.labels) {
            write_u32(out, node);
            write_u32(out, static_cast<std::uint32_t>(vec.size()));
            std::vector<unsigned char> packed((vec.size() + 7) / 8, 0);
            for (std::size_t i = 0; i < vec.size(); ++i) {
                if (vec[i]) packed[i / 8] |= static_cast<unsigned char>(1u << (i % 8));
            }
            out.write(reinterpret_cast<const char*>(packed.data()),
                      static_cast<std::streamsize>(packed.size()));
        }
    }
    if (!out) throw DataError("write failure on label cache: " + path);
}

LabelCache load_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open label cache: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in) throw DataError("label cache corrupt header (too short): " + path);
    if (std::memcmp(magic, kLabelMagic, 7) != 0) {
        throw DataError("label cache magic mismatch: " + path);
    }
    if (magic[7] != kLabelMagic[7]) {
        throw DataError("label cache version mismatch: " + path);
    }
    const std::uint32_t count = read_u32(in, "set count");
    std::vector<LabelSet> sets;
    sets.reserve(count);
    for (std::uint32_t s = 0; s < count; ++s) {
        LabelSet ls;
        ls.query.source = read_u32(in, "query source");
        ls.query.relation = read_u32(in, "query relation");
        ls.query.target = read_u32(in, "query target");
        ls.depth = read_u32(in, "depth");
        const std::uint32_t ne = read_u32(in, "e_all count");
        ls.e_all.resize(ne);
        for (auto& e : ls.e_all) e = read_u32(in, "e_all entry");
        const std::uint32_t nn = read_u32(in, "node count");
        for (std::uint32_t i = 0; i < nn; ++i) {
            const EntityId node = read_u32(in, "node id");
            const std::uint32_t len = read_u32(in, "vector length");
            std::vector<unsigned char> packed((len + 7) / 8);
            in.read(reinterpret_cast<char*>(packed.data()),
                    static_cast<std::streamsize>(packed.size()));
            if (!in) throw DataError("label cache truncated while reading bit vector");
            std::vector<std::uint8_t> vec(len, 0);
            for (std::uint32_t b = 0; b < len; ++b) {
                vec[b] = (packed[b / 8] >> (b % 8)) & 1u;
            }
            ls.labels.emplace(node, std::move(vec));
        }
        sets.push_back(std::move(ls));
    }
    return LabelCache(std::move(sets));
}

}  // namespace ssrl
