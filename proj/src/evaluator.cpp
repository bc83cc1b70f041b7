#include "ssrl/evaluator.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "ssrl/exec.hpp"
#include "ssrl/labels.hpp"

namespace ssrl {

void KnownAnswers::add(EntityId head, RelationId relation, EntityId tail) {
    facts_[{head, relation}].insert(tail);
}

void KnownAnswers::add_all(std::span<const Query> queries) {
    for (const auto& q : queries) add(q.source, q.relation, q.target);
}

bool KnownAnswers::contains(EntityId head, RelationId relation, EntityId tail) const {
    auto it = facts_.find({head, relation});
    return it != facts_.end() && it->second.count(tail) > 0;
}

namespace {

struct BeamHyp {
    std::vector<Action> path;
    LstmState<float> state;
    EntityId entity;
    double log_prob;
};

bool beam_order(const std::vector<Action>& pa, double la, const std::vector<Action>& pb, double lb) {
    if (la != lb) return la > lb;
    return pa < pb;
}

}  // namespace

std::vector<BeamEntry> beam_search(const KnowledgeGraph& g, const PolicyParams<float>& params,
                                   const Query& query, int horizon, int width, BeamStats* stats,
                                   bool mask_query) {
    if (width < 1) throw ConfigError("beam width must be >= 1");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    GraphView view = mask_query ? GraphView::mask_query(g, query, false) : GraphView(g);

    std::vector<BeamHyp> beam;
    beam.push_back({{}, zero_state<float>(params.dims), query.source, 0.0});
    std::uint64_t final_children = 0;

    for (int t = 0; t < horizon; ++t) {
        std::vector<BeamHyp> children;
        for (const auto& hyp : beam) {
            const RelationId prev_rel =
                hyp.path.empty() ? KnowledgeGraph::kNoOp : hyp.path.back().relation;
            const auto acts = view.actions(hyp.entity);
            LstmState<float> state = hyp.state;
            const auto dist = policy_forward_step(params, state, prev_rel, hyp.entity,
                                                  query.relation, acts);
            // Stable log-softmax over the already computed logits.
            const float max_logit = dist.logits.maxCoeff();
            const double lse =
                std::log((dist.logits.array() - max_logit).exp().sum()) + max_logit;
            for (std::size_t k = 0; k < acts.size(); ++k) {
                BeamHyp child;
                child.path = hyp.path;
                child.path.push_back(acts[k]);
                child.state = state;
                child.entity = acts[k].entity;
                child.log_prob =
                    hyp.log_prob + static_cast<double>(dist.logits[static_cast<Eigen::Index>(k)]) - lse;
                children.push_back(std::move(child));
            }
        }
        if (t == horizon - 1) final_children = children.size();
        std::sort(children.begin(), children.end(), [](const BeamHyp& a, const BeamHyp& b) {
            return beam_order(a.path, a.log_prob, b.path, b.log_prob);
        });
        if (children.size() > static_cast<std::size_t>(width)) {
            children.resize(static_cast<std::size_t>(width));
        }
        beam = std::move(children);
    }

    if (stats) stats->unique_paths = final_children;
    std::vector<BeamEntry> out;
    out.reserve(beam.size());
    for (auto& hyp : beam) {
        out.push_back({std::move(hyp.path), hyp.log_prob, hyp.entity});
    }
    return out;
}

std::uint64_t rank_answers(std::span<const BeamEntry> beams, const Query& query,
                           const KnownAnswers* known, bool filtered) {
    if (beams.empty()) throw InternalError("rank_answers: empty beam list");
    std::map<EntityId, double> best;
    for (const auto& b : beams) {
        auto it = best.find(b.terminal);
        if (it == best.end() || b.log_prob > it->second) best[b.terminal] = b.log_prob;
    }
    const auto target_it = best.find(query.target);
    if (target_it == best.end()) return kRankInf;
    const double target_score = target_it->second;

    std::uint64_t rank = 1;
    for (const auto& [entity, score] : best) {
        if (entity == query.target) continue;
        const bool better = score > target_score || (score == target_score && entity < query.target);
        if (!better) continue;
        if (filtered && known != nullptr && known->contains(query.source, query.relation, entity)) {
            continue;  // another correct answer: skipped under filtered ranking
        }
        ++rank;
    }
    return rank;
}

double MetricSet::hits(int k) const {
    switch (k) {
        case 1: return hits1;
        case 3: return hits3;
        case 5: return hits5;
        case 10: return hits10;
        case 20: return hits20;
        default: throw InternalError("MetricSet::hits: unsupported k");
    }
}

MetricSet metrics(std::span<const std::uint64_t> ranks) {
    if (ranks.empty()) throw DataError("metrics undefined on an empty rank list");
    MetricSet m;
    m.count = ranks.size();
    double rr = 0.0;
    std::uint64_t h1 = 0, h3 = 0, h5 = 0, h10 = 0, h20 = 0;
    for (const auto r : ranks) {
        if (r == kRankInf) continue;
        if (r <= 1) ++h1;
        if (r <= 3) ++h3;
        if (r <= 5) ++h5;
        if (r <= 10) ++h10;
        if (r <= 20) ++h20;
        rr += 1.0 / static_cast<double>(r);
    }
    const double n = static_cast<double>(m.count);
    m.hits1 = h1 / n;
    m.hits3 = h3 / n;
    m.hits5 = h5 / n;
    m.hits10 = h10 / n;
    m.hits20 = h20 / n;
    m.mrr = rr / n;
    return m;
}

SplitReport split_report(std::span<const Query> queries, const KnowledgeGraph& g,
                         std::span<const std::uint64_t> ranks) {
    if (queries.size() != ranks.size()) throw InternalError("split_report: size mismatch");
    SplitReport out;
    std::vector<std::uint64_t> many, one;
    struct RelAcc {
        std::uint64_t count = 0, hits1 = 0;
        double rr = 0;
    };
    std::map<RelationId, RelAcc> rel;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto e_all = compute_e_all(g, queries[i].source, queries[i].relation);
        (e_all.size() > 1 ? many : one).push_back(ranks[i]);
        auto& acc = rel[queries[i].relation];
        ++acc.count;
        if (ranks[i] == 1) ++acc.hits1;
        if (ranks[i] != kRankInf) acc.rr += 1.0 / static_cast<double>(ranks[i]);
    }
    if (!many.empty()) out.to_many = metrics(many);
    if (!one.empty()) out.to_one = metrics(one);
    for (const auto& [r, acc] : rel) {
        out.per_relation.push_back(
            {r, acc.count, acc.hits1, acc.rr / static_cast<double>(acc.count)});
    }
    return out;
}

EvalReport evaluate(const KnowledgeGraph& g, const PolicyParams<float>& params,
                    std::span<const Query> queries, const KnownAnswers* known,
                    const EvalOptions& opts) {
    if (queries.empty()) throw DataError("metrics undefined on an empty query list");
    const int threads = resolve_threads(opts.threads);
    std::vector<std::uint64_t> ranks(queries.size(), kRankInf);
    std::vector<std::uint64_t> unique_paths(queries.size(), 0);
    run_items(static_cast<std::int64_t>(queries.size()), threads, [&](std::int64_t i) {
        const auto idx = static_cast<std::size_t>(i);
        BeamStats bs;
        const auto beams = beam_search(g, params, queries[idx], opts.horizon, opts.beam_width, &bs,
                                       opts.mask_query);
        ranks[idx] = rank_answers(beams, queries[idx], known, opts.filtered);
        unique_paths[idx] = bs.unique_paths;
    });

    EvalReport report;
    report.aggregates = metrics(ranks);
    report.splits = split_report(queries, g, ranks);
    double success_sum = 0, failure_sum = 0;
    std::uint64_t success_n = 0, failure_n = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (ranks[i] != kRankInf) {
            success_sum += static_cast<double>(unique_paths[i]);
            ++success_n;
        } else {
            failure_sum += static_cast<double>(unique_paths[i]);
            ++failure_n;
        }
    }
    if (success_n > 0) report.mean_unique_paths_success = success_sum / static_cast<double>(success_n);
    if (failure_n > 0) report.mean_unique_paths_failure = failure_sum / static_cast<double>(failure_n);
    if (opts.per_query) {
        report.per_query.reserve(queries.size());
        for (std::size_t i = 0; i < queries.size(); ++i) {
            report.per_query.push_back({queries[i], ranks[i], unique_paths[i]});
        }
    }
    return report;
}

namespace {

nlohmann::ordered_json metric_json(const MetricSet& m) {
    return {{"hits1", m.hits1},   {"hits3", m.hits3}, {"hits5", m.hits5},
            {"hits10", m.hits10}, {"hits20", m.hits20}, {"mrr", m.mrr},
            {"count", m.count}};
}

}  // namespace

std::string EvalReport::to_json(const KnowledgeGraph& g, bool include_per_query) const {
    nlohmann::ordered_json j;
    j["aggregates"] = metric_json(aggregates);
    nlohmann::ordered_json splits_j;
    splits_j["to_many"] = splits.to_many ? metric_json(*splits.to_many) : nlohmann::ordered_json(nullptr);
    splits_j["to_one"] = splits.to_one ? metric_json(*splits.to_one) : nlohmann::ordered_json(nullptr);
    j["splits"] = splits_j;
    nlohmann::ordered_json rel_rows = nlohmann::ordered_json::array();
    for (const auto& row : splits.per_relation) {
        rel_rows.push_back({{"relation", g.relations().name(row.relation)},
                            {"count", row.count},
                            {"hits1_count", row.hits1_count},
                            {"mrr", row.mrr}});
    }
    j["per_relation"] = rel_rows;
    j["unique_paths"] = {{"mean_success", mean_unique_paths_success},
                         {"mean_failure", mean_unique_paths_failure}};
    if (include_per_query) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (const auto& pq : per_query) {
            nlohmann::ordered_json row;
            row["source"] = g.entities().name(pq.query.source);
            row["relation"] = g.relations().name(pq.query.relation);
            row["target"] = g.entities().name(pq.query.target);
            if (pq.rank == kRankInf) {
                row["rank"] = nullptr;
            } else {
                row["rank"] = pq.rank;
            }
            row["unique_paths"] = pq.unique_paths;
            rows.push_back(row);
        }
        j["per_query"] = rows;
    }
    return j.dump(2);
}

std::string decode_paths(std::span<const BeamEntry> beams, const KnowledgeGraph& g, int top_n,
                         std::optional<EntityId> target, EntityId source) {
    std::string out;
    const std::size_t n = std::min<std::size_t>(beams.size(), top_n < 0 ? 0 : static_cast<std::size_t>(top_n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& b = beams[i];
        std::string line = g.entities().name(source);
        for (const auto& a : b.path) {
            line += " —" + g.relations().name(a.relation) + "→ " + g.entities().name(a.entity);
        }
        if (target) {
            line += b.terminal == *target ? " [exact]" : " [incorrect]";
        }
        out += line;
        out += '\n';
    }
    return out;
}

}  // namespace ssrl
