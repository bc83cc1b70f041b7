#include "ssrl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ssrl {

std::uint32_t Vocab::intern(const std::string& name) {
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(names_.size());
    names_.push_back(name);
    ids_.emplace(name, id);
    return id;
}

std::optional<std::uint32_t> Vocab::find(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocab::name(std::uint32_t id) const {
    if (id >= names_.size()) throw DataError("vocab id out of range: " + std::to_string(id));
    return names_[id];
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write vocab file: " + path);
    for (std::uint32_t i = 0; i < names_.size(); ++i) {
        out << names_[i] << '\t' << i << '\n';
    }
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read vocab file: " + path);
    std::vector<std::pair<std::uint32_t, std::string>> rows;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError("vocab parse error: " + path + " line " + std::to_string(lineno) +
                            ": expected name<TAB>id");
        }
        rows.emplace_back(static_cast<std::uint32_t>(std::stoul(line.substr(tab + 1))),
                          line.substr(0, tab));
    }
    std::sort(rows.begin(), rows.end());
    Vocab v;
    for (std::uint32_t i = 0; i < rows.size(); ++i) {
        if (rows[i].first != i) {
            throw DataError("vocab file " + path + ": ids must be dense starting at 0");
        }
        v.intern(rows[i].second);
    }
    return v;
}

RelationId KnowledgeGraph::inverse(RelationId r) const {
    if (r == kNoOp) return kNoOp;
    if (is_base(r)) return r + base_relations_;
    if (is_inverse(r)) return r - base_relations_;
    throw DataError("relation id out of range: " + std::to_string(r));
}

std::span<const Action> KnowledgeGraph::actions(EntityId e) const {
    if (e >= adjacency_.size()) throw DataError("entity id out of range: " + std::to_string(e));
    return adjacency_[e];
}

std::span<const Action> KnowledgeGraph::base_edges(EntityId e) const {
    if (e >= base_adjacency_.size()) throw DataError("entity id out of range: " + std::to_string(e));
    return base_adjacency_[e];
}

bool KnowledgeGraph::has_base_edge(EntityId h, RelationId r, EntityId t) const {
    if (h >= base_adjacency_.size()) return false;
    const auto& edges = base_adjacency_[h];
    return std::binary_search(edges.begin(), edges.end(), Action{r, t});
}

std::vector<EntityId> KnowledgeGraph::base_tails(EntityId source, RelationId relation) const {
    std::vector<EntityId> tails;
    if (source >= base_adjacency_.size()) {
        throw DataError("entity id out of range: " + std::to_string(source));
    }
    const auto& edges = base_adjacency_[source];
    const auto lo = std::lower_bound(edges.begin(), edges.end(), Action{relation, 0});
    for (auto it = lo; it != edges.end() && it->relation == relation; ++it) {
        tails.push_back(it->entity);
    }
    return tails;
}

std::span<const EntityId> KnowledgeGraph::predecessors(EntityId e) const {
    if (e >= predecessors_.size()) throw DataError("entity id out of range: " + std::to_string(e));
    return predecessors_[e];
}

namespace {

struct RawTriple {
    std::string head, relation, tail;
};

std::vector<RawTriple> parse_triple_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open triple file: " + path);
    std::vector<RawTriple> out;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        const auto t3 = t2 == std::string::npos ? std::string::npos : line.find('\t', t2 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos || t3 != std::string::npos) {
            throw DataError("parse error: " + path + " line " + std::to_string(lineno) +
                            ": expected 3 tab-separated fields");
        }
        out.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), line.substr(t2 + 1)});
    }
    return out;
}

}  // namespace

KnowledgeGraph ingest_triples(const std::string& path, const IngestOptions& opts) {
    if (opts.max_actions < 1) throw ConfigError("max_actions must be >= 1");
    const auto raw = parse_triple_file(path);

    KnowledgeGraph g;
    g.max_actions_ = opts.max_actions;

    const bool frozen_entities = opts.entity_vocab != nullptr;
    const bool frozen_relations = opts.relation_vocab != nullptr;
    if (frozen_entities) g.entities_ = *opts.entity_vocab;

    // Base relation ids are assigned 1..R in first-appearance order (or from
    // the frozen vocab's file ids + 1); the augmented vocab is laid out after
    // R is known.
    std::vector<std::string> base_names;
    std::unordered_map<std::string, RelationId> base_ids;
    if (frozen_relations) {
        for (std::uint32_t i = 0; i < opts.relation_vocab->size(); ++i) {
            base_names.push_back(opts.relation_vocab->name(i));
            base_ids.emplace(base_names.back(), i + 1);
        }
    }

    auto entity_id = [&](const std::string& name, std::uint64_t lineno) -> EntityId {
        if (frozen_entities) {
            const auto found = g.entities_.find(name);
            if (!found) {
                throw DataError("vocabulary error: unknown entity '" + name + "' at " + path +
                                " line " + std::to_string(lineno));
            }
            return *found;
        }
        return g.entities_.intern(name);
    };
    auto relation_id = [&](const std::string& name, std::uint64_t lineno) -> RelationId {
        auto it = base_ids.find(name);
        if (it != base_ids.end()) return it->second;
        if (frozen_relations) {
            throw DataError("vocabulary error: unknown relation '" + name + "' at " + path +
                            " line " + std::to_string(lineno));
        }
        const RelationId id = static_cast<RelationId>(base_names.size()) + 1;
        base_names.push_back(name);
        base_ids.emplace(name, id);
        return id;
    };

    std::vector<Triple> triples;
    triples.reserve(raw.size());
    std::uint64_t lineno = 0;
    for (const auto& r : raw) {
        ++lineno;
        triples.push_back({entity_id(r.head, lineno), relation_id(r.relation, lineno),
                           entity_id(r.tail, lineno)});
    }

    g.base_relations_ = static_cast<std::uint32_t>(base_names.size());
    g.relations_.intern(KnowledgeGraph::kNoOpName);
    for (const auto& n : base_names) g.relations_.intern(n);
    for (const auto& n : base_names) g.relations_.intern(n + "^-1");

    std::sort(triples.begin(), triples.end());
    triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
    g.fact_count_ = triples.size();

    const std::uint32_t n = g.entities_.size();
    g.base_adjacency_.assign(n, {});
    std::vector<std::vector<Action>> augmented(n);
    for (const auto& t : triples) {
        g.base_adjacency_[t.head].push_back({t.relation, t.tail});
        augmented[t.head].push_back({t.relation, t.tail});
        augmented[t.tail].push_back({t.relation + g.base_relations_, t.head});
    }

    g.adjacency_.assign(n, {});
    for (EntityId e = 0; e < n; ++e) {
        std::sort(g.base_adjacency_[e].begin(), g.base_adjacency_[e].end());
        auto& edges = augmented[e];
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        auto& out = g.adjacency_[e];
        out.push_back({KnowledgeGraph::kNoOp, e});
        const std::size_t keep = std::min<std::size_t>(edges.size(), g.max_actions_ - 1);
        out.insert(out.end(), edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(keep));
    }

    g.predecessors_.assign(n, {});
    for (EntityId e = 0; e < n; ++e) {
        for (const auto& a : g.adjacency_[e]) {
            if (a.entity != e) g.predecessors_[a.entity].push_back(e);
        }
    }
    for (auto& preds : g.predecessors_) {
        std::sort(preds.begin(), preds.end());
        preds.erase(std::unique(preds.begin(), preds.end()), preds.end());
    }
    return g;
}

void GraphView::hide_with_inverse(EntityId h, RelationId r, EntityId t) {
    hidden_.push_back({h, r, t});
    hidden_.push_back({t, graph_->inverse(r), h});
}

GraphView GraphView::mask_edge(const KnowledgeGraph& g, EntityId h, RelationId r, EntityId t) {
    GraphView v(g);
    const bool exists = (g.is_base(r) && g.has_base_edge(h, r, t)) ||
                        (g.is_inverse(r) && g.has_base_edge(t, g.inverse(r), h));
    if (!exists) {
        v.warning_ = true;
        return v;
    }
    v.hide_with_inverse(h, r, t);
    return v;
}

GraphView GraphView::mask_query(const KnowledgeGraph& g, const Query& q, bool all_query_edges) {
    if (!all_query_edges) return mask_edge(g, q.source, q.relation, q.target);
    GraphView v(g);
    bool any = false;
    for (EntityId tail : g.base_tails(q.source, q.relation)) {
        v.hide_with_inverse(q.source, q.relation, tail);
        any = true;
    }
    if (!any) v.warning_ = true;
    return v;
}

bool GraphView::hides(EntityId h, RelationId r, EntityId t) const {
    for (const auto& e : hidden_) {
        if (e.head == h && e.relation == r && e.tail == t) return true;
    }
    return false;
}

std::vector<Action> GraphView::actions(EntityId e) const {
    const auto full = graph_->actions(e);
    std::vector<Action> out;
    out.reserve(full.size());
    for (const auto& a : full) {
        if (!hidden_.empty() && hides(e, a.relation, a.entity)) continue;
        out.push_back(a);
    }
    return out;
}

std::size_t GraphView::action_count(EntityId e) const {
    const auto full = graph_->actions(e);
    if (hidden_.empty()) return full.size();
    std::size_t n = 0;
    for (const auto& a : full) {
        if (!hides(e, a.relation, a.entity)) ++n;
    }
    return n;
}

std::optional<std::uint32_t> GraphView::action_index(EntityId e, const Action& a) const {
    std::uint32_t idx = 0;
    for (const auto& cand : graph_->actions(e)) {
        if (!hidden_.empty() && hides(e, cand.relation, cand.entity)) continue;
        if (cand == a) return idx;
        ++idx;
    }
    return std::nullopt;
}

GraphStats compute_stats(const KnowledgeGraph& g, std::span<const Query> queries, int k_hops) {
    GraphStats s;
    s.entity_count = g.entity_count();
    s.relation_count = g.base_relation_count();
    s.fact_count = g.fact_count();

    std::vector<std::uint64_t> degrees;
    degrees.reserve(s.entity_count);
    for (EntityId e = 0; e < s.entity_count; ++e) {
        const auto edges = g.base_edges(e);
        degrees.push_back(edges.size());
        for (const auto& a : edges) {
            ++s.relation_frequency[a.relation];
        }
    }
    if (s.entity_count > 0) {
        s.mean_degree = static_cast<double>(s.fact_count) / static_cast<double>(s.entity_count);
        std::sort(degrees.begin(), degrees.end());
        const std::size_t n = degrees.size();
        s.median_degree = (n % 2 == 1)
                              ? static_cast<double>(degrees[n / 2])
                              : 0.5 * static_cast<double>(degrees[n / 2 - 1] + degrees[n / 2]);
    }

    if (!queries.empty()) {
        std::uint64_t reachable = 0;
        std::vector<std::int32_t> dist(s.entity_count);
        for (const auto& q : queries) {
            std::fill(dist.begin(), dist.end(), -1);
            std::deque<EntityId> frontier{q.source};
            dist[q.source] = 0;
            bool hit = q.source == q.target;
            while (!frontier.empty() && !hit) {
                const EntityId u = frontier.front();
                frontier.pop_front();
                if (dist[u] >= k_hops) continue;
                for (const auto& a : g.actions(u)) {
                    if (a.entity == u || dist[a.entity] >= 0) continue;
                    dist[a.entity] = dist[u] + 1;
                    if (a.entity == q.target) {
                        hit = true;
                        break;
                    }
                    frontier.push_back(a.entity);
                }
            }
            if (hit) ++reachable;
        }
        s.k_hop_target_fraction = static_cast<double>(reachable) / static_cast<double>(queries.size());
    }
    return s;
}

std::string stats_to_json(const KnowledgeGraph& g, const GraphStats& s) {
    nlohmann::ordered_json j;
    j["entity_count"] = s.entity_count;
    j["relation_count"] = s.relation_count;
    j["fact_count"] = s.fact_count;
    j["mean_degree"] = s.mean_degree;
    j["median_degree"] = s.median_degree;
    nlohmann::ordered_json freq = nlohmann::ordered_json::object();
    for (const auto& [rel, count] : s.relation_frequency) {
        freq[g.relations().name(rel)] = count;
    }
    j["relation_frequency"] = freq;
    if (s.k_hop_target_fraction) {
        j["k_hop_target_fraction"] = *s.k_hop_target_fraction;
    } else {
        j["k_hop_target_fraction"] = nullptr;
    }
    return j.dump(2);
}

QueryLoadResult load_queries(const std::string& path, const KnowledgeGraph& g) {
    QueryLoadResult r;
    std::uint64_t lineno = 0;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open query file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos) {
            throw DataError("parse error: " + path + " line " + std::to_string(lineno) +
                            ": expected 3 tab-separated fields");
        }
        const auto h = g.entities().find(line.substr(0, t1));
        const auto rel = g.relations().find(line.substr(t1 + 1, t2 - t1 - 1));
        const auto t = g.entities().find(line.substr(t2 + 1));
        if (!h || !rel || !t) {
            ++r.skipped;
            continue;
        }
        r.queries.push_back({*h, *rel, *t});
    }
    return r;
}

}  // namespace ssrl
