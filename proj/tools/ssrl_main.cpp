#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ssrl/config.hpp"
#include "ssrl/env.hpp"
#include "ssrl/evaluator.hpp"
#include "ssrl/exec.hpp"
#include "ssrl/graph.hpp"
#include "ssrl/labels.hpp"
#include "ssrl/synthetic.hpp"
#include "ssrl/trainer.hpp"

namespace fs = std::filesystem;
using namespace ssrl;

namespace {

KnowledgeGraph load_graph_dir(const std::string& dir, std::uint32_t max_actions) {
    IngestOptions opts;
    opts.max_actions = max_actions;
    std::optional<Vocab> ev, rv;
    if (fs::exists(dir + "/entities.tsv")) {
        ev = Vocab::load(dir + "/entities.tsv");
        opts.entity_vocab = &*ev;
    }
    if (fs::exists(dir + "/relations.tsv")) {
        rv = Vocab::load(dir + "/relations.tsv");
        opts.relation_vocab = &*rv;
    }
    const std::string train = dir + "/train.txt";
    if (!fs::exists(train)) throw DataError("graph directory has no train.txt: " + dir);
    return ingest_triples(train, opts);
}

std::vector<Query> load_split(const KnowledgeGraph& g, const std::string& path, bool required) {
    if (!fs::exists(path)) {
        if (required) throw DataError("missing split file: " + path);
        return {};
    }
    auto r = load_queries(path, g);
    if (r.skipped > 0) {
        std::fprintf(stderr, "warning: %llu lines in %s mention unknown names and were skipped\n",
                     static_cast<unsigned long long>(r.skipped), path.c_str());
    }
    return std::move(r.queries);
}

KnownAnswers build_known(const KnowledgeGraph& g, const std::vector<std::string>& files) {
    KnownAnswers known;
    for (const auto& f : files) {
        if (!fs::exists(f)) continue;
        const auto qs = load_queries(f, g);
        known.add_all(qs.queries);
    }
    return known;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << text;
}

struct DataFiles {
    std::string train, dev, test;
};

DataFiles data_files(const RunConfig& cfg) {
    return {cfg.resolved_train(), cfg.resolved_dev(), cfg.resolved_test()};
}

KnowledgeGraph load_graph_cfg(const RunConfig& cfg) {
    if (!cfg.data_dir.empty()) return load_graph_dir(cfg.data_dir, cfg.max_actions);
    if (cfg.train_file.empty()) throw ConfigError("config must set data.dir or data.train");
    IngestOptions opts;
    opts.max_actions = cfg.max_actions;
    return ingest_triples(cfg.train_file, opts);
}

int cmd_stats(const std::string& graph_dir, const std::string& split, int k,
              const std::string& out_path, std::uint32_t max_actions) {
    const auto g = load_graph_dir(graph_dir, max_actions);
    std::vector<Query> queries;
    if (!split.empty()) {
        queries = load_split(g, graph_dir + "/" + split + ".txt", true);
    }
    const auto stats = compute_stats(g, queries, k);
    const std::string json = stats_to_json(g, stats);
    if (!out_path.empty()) write_text(out_path, json + "\n");
    std::printf("%s\n", json.c_str());
    return 0;
}

int cmd_gen_labels(const std::string& graph_dir, int depth, const std::string& out_path,
                   std::int64_t limit, const std::string& relations, bool mask_all, int threads,
                   std::uint32_t max_actions) {
    const auto g = load_graph_dir(graph_dir, max_actions);
    auto queries = load_split(g, graph_dir + "/train.txt", true);

    if (!relations.empty()) {
        std::vector<RelationId> wanted;
        std::string rest = relations;
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const std::string name = rest.substr(0, comma);
            const auto id = g.relations().find(name);
            if (!id) throw DataError("unknown relation in --relations: " + name);
            wanted.push_back(*id);
            rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
        }
        std::erase_if(queries, [&](const Query& q) {
            return std::find(wanted.begin(), wanted.end(), q.relation) == wanted.end();
        });
    }
    if (limit >= 0 && static_cast<std::size_t>(limit) < queries.size()) {
        queries.resize(static_cast<std::size_t>(limit));
    }

    LabelGenOptions opts;
    opts.depth = static_cast<std::uint32_t>(depth);
    opts.mask_all_query_edges = mask_all;
    const auto batch = generate_label_batch(g, queries, opts, resolve_threads(threads));
    save_labels(batch.sets, out_path);

    const LabelCache cache(batch.sets);
    const auto cov = label_coverage(cache, queries);
    std::printf("label sets written: %zu (of %zu queries; %.1f%% coverage, %llu unlabelable)\n",
                batch.sets.size(), queries.size(), 100.0 * cov.fraction(),
                static_cast<unsigned long long>(batch.unlabelable));
    for (const auto& row : cov.per_relation) {
        std::printf("  %-40s %6llu / %-6llu (%.1f%%)\n", g.relations().name(row.relation).c_str(),
                    static_cast<unsigned long long>(row.labeled),
                    static_cast<unsigned long long>(row.total),
                    row.total ? 100.0 * static_cast<double>(row.labeled) / static_cast<double>(row.total) : 0.0);
    }
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    const auto g = load_graph_cfg(cfg);
    const auto files = data_files(cfg);
    const auto train_queries = load_split(g, files.train, true);
    const auto dev_queries = load_split(g, files.dev, false);
    const KnownAnswers known = build_known(g, {files.train, files.dev, files.test});

    std::optional<LabelCache> cache;
    if (cfg.hp.sl_epochs > 0) {
        if (cfg.labels_file.empty()) {
            throw ConfigError("sl.epochs > 0 requires data.labels (run gen-labels first)");
        }
        cache = load_labels(cfg.labels_file);
    }

    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw DataError("cannot create output directory: " + cfg.out_dir);
    write_text(cfg.out_dir + "/resolved.cfg", render_config(cfg));

    const auto result = train(g, cache ? &*cache : nullptr, train_queries, dev_queries,
                              &known, cfg.dims, cfg.hp);

    CheckpointMeta meta;
    meta.seed = cfg.hp.seed;
    meta.config_hash = config_hash_hex(cfg);
    meta.stage = "sl";
    meta.epoch = cfg.hp.sl_epochs;
    save_checkpoint(result.sl_boundary, cfg.out_dir + "/checkpoint_sl.bin", meta);
    meta.stage = "rl";
    meta.epoch = cfg.hp.rl_batches;
    save_checkpoint(result.params, cfg.out_dir + "/checkpoint_final.bin", meta);
    result.log.save_csv(cfg.out_dir + "/trainlog.csv");
    if (!result.log.rows.empty()) emit_curves(result.log, cfg.out_dir + "/curves");

    std::printf("training complete: %zu batches logged, outputs in %s\n", result.log.rows.size(),
                cfg.out_dir.c_str());
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& graph_dir, const std::string& split,
             int beam, int horizon, bool raw, bool per_query, const std::string& out_path,
             std::uint32_t max_actions, int threads) {
    const auto g = load_graph_dir(graph_dir, max_actions);
    auto loaded = load_checkpoint(ckpt_path);
    validate_checkpoint(loaded.params, g);
    const auto queries = load_split(g, graph_dir + "/" + split + ".txt", true);
    if (queries.empty()) throw DataError("split has no usable queries: " + split);
    const KnownAnswers known = build_known(
        g, {graph_dir + "/train.txt", graph_dir + "/dev.txt", graph_dir + "/test.txt"});

    EvalOptions opts;
    opts.beam_width = beam;
    opts.horizon = horizon;
    opts.filtered = !raw;
    opts.per_query = per_query;
    opts.threads = threads;
    const auto report = evaluate(g, loaded.params, queries, &known, opts);
    const std::string json = report.to_json(g, per_query);
    if (!out_path.empty()) write_text(out_path, json + "\n");
    std::printf("%s\n", json.c_str());
    return 0;
}

int cmd_paths(const std::string& ckpt_path, const std::string& graph_dir, const std::string& query,
              int top, int beam, int horizon, std::uint32_t max_actions) {
    const auto g = load_graph_dir(graph_dir, max_actions);
    auto loaded = load_checkpoint(ckpt_path);
    validate_checkpoint(loaded.params, g);

    const auto comma = query.find(',');
    if (comma == std::string::npos) throw ConfigError("--query must be \"head,relation\"");
    const std::string head = query.substr(0, comma);
    const std::string rel = query.substr(comma + 1);
    const auto h = g.entities().find(head);
    if (!h) throw DataError("unknown entity: " + head);
    const auto r = g.relations().find(rel);
    if (!r) throw DataError("unknown relation: " + rel);

    // No target: rank nothing, just decode. Use an impossible target so the
    // query edge mask is a no-op.
    Query q{*h, *r, *h};
    const auto beams = beam_search(g, loaded.params, q, horizon, beam, nullptr, false);
    std::printf("%s", decode_paths(beams, g, top, std::nullopt, q.source).c_str());
    return 0;
}

int cmd_sweep(const RunConfig& cfg, const std::string& epochs_arg) {
    std::vector<int> epochs;
    std::string rest = epochs_arg;
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        epochs.push_back(std::stoi(rest.substr(0, comma)));
        rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
    }

    const auto g = load_graph_cfg(cfg);
    const auto files = data_files(cfg);
    const auto train_queries = load_split(g, files.train, true);
    const auto test_queries = load_split(g, files.test, true);
    const KnownAnswers known = build_known(g, {files.train, files.dev, files.test});

    std::optional<LabelCache> cache;
    const bool needs_labels = std::any_of(epochs.begin(), epochs.end(), [](int e) { return e > 0; });
    if (needs_labels) {
        if (cfg.labels_file.empty()) throw ConfigError("sweep with SL epochs requires data.labels");
        cache = load_labels(cfg.labels_file);
    }

    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw DataError("cannot create output directory: " + cfg.out_dir);
    write_text(cfg.out_dir + "/resolved.cfg", render_config(cfg));

    const auto cells = sweep(g, cache ? &*cache : nullptr, train_queries, test_queries, &known,
                             cfg.dims, cfg.hp, epochs);
    const std::string csv = sweep_to_csv(cells);
    write_text(cfg.out_dir + "/heatmap.csv", csv);
    std::printf("%s", csv.c_str());
    return 0;
}

int cmd_make_synthetic(const std::string& kind, int size, std::uint64_t seed,
                       const std::string& out_dir) {
    SyntheticSpec spec;
    spec.kind = synthetic_kind_from_string(kind);
    spec.size = size;
    spec.seed = seed;
    make_synthetic(spec, out_dir);
    std::printf("synthetic %s dataset (size %d, seed %llu) written to %s\n", kind.c_str(), size,
                static_cast<unsigned long long>(seed), out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SSRL: self-supervised reinforcement learning for knowledge-graph query answering"};
    app.require_subcommand(1);

    // stats
    auto* stats = app.add_subcommand("stats", "graph statistics as JSON");
    std::string stats_graph, stats_split, stats_out;
    int stats_k = 3;
    std::uint32_t stats_max_actions = 256;
    stats->add_option("--graph", stats_graph, "dataset directory")->required();
    stats->add_option("--split", stats_split, "query split for the k-hop fraction (train|dev|test)");
    stats->add_option("--k", stats_k, "hop bound");
    stats->add_option("--out", stats_out, "write JSON here as well");
    stats->add_option("--max-actions", stats_max_actions, "action space truncation");

    // gen-labels
    auto* gen = app.add_subcommand("gen-labels", "generate supervised labels for train queries");
    std::string gen_graph, gen_out, gen_relations;
    int gen_depth = 3, gen_threads = 0;
    std::int64_t gen_limit = -1;
    bool gen_mask_all = false;
    std::uint32_t gen_max_actions = 256;
    gen->add_option("--graph", gen_graph, "dataset directory")->required();
    gen->add_option("--depth", gen_depth, "maximum correct-path length D")->required();
    gen->add_option("--out", gen_out, "label cache path")->required();
    gen->add_option("--limit", gen_limit, "label only the first N queries");
    gen->add_option("--relations", gen_relations, "comma-separated relation names to keep");
    gen->add_flag("--mask-all", gen_mask_all, "hide every (source, relation, *) edge");
    gen->add_option("--threads", gen_threads, "worker cap (0 = hardware)");
    gen->add_option("--max-actions", gen_max_actions, "action space truncation");

    // train
    auto* tr = app.add_subcommand("train", "two-stage SL + RL training");
    std::string tr_config;
    std::vector<std::string> tr_sets;
    std::uint64_t tr_seed = 42;
    bool tr_seed_given = false;
    tr->add_option("--config", tr_config, "run config file");
    tr->add_option("--set", tr_sets, "override key=value (repeatable)");
    tr->add_option("--seed", tr_seed, "seed override")->each([&](const std::string&) { tr_seed_given = true; });

    // eval
    auto* ev = app.add_subcommand("eval", "beam-search evaluation of a checkpoint");
    std::string ev_ckpt, ev_graph, ev_split = "test", ev_out;
    int ev_beam = 100, ev_horizon = 3, ev_threads = 0;
    bool ev_raw = false, ev_per_query = false;
    std::uint32_t ev_max_actions = 256;
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
    ev->add_option("--graph", ev_graph, "dataset directory")->required();
    ev->add_option("--split", ev_split, "train|dev|test");
    ev->add_option("--beam", ev_beam, "beam width");
    ev->add_option("--horizon", ev_horizon, "rollout length T");
    ev->add_flag("--raw", ev_raw, "disable filtered ranking");
    ev->add_flag("--per-query", ev_per_query, "include per-query ranks in the report");
    ev->add_option("--out", ev_out, "write report JSON here");
    ev->add_option("--max-actions", ev_max_actions, "action space truncation");
    ev->add_option("--threads", ev_threads, "worker cap (0 = hardware)");

    // paths
    auto* pa = app.add_subcommand("paths", "decode reasoning paths for one query");
    std::string pa_ckpt, pa_graph, pa_query;
    int pa_top = 5, pa_beam = 100, pa_horizon = 3;
    std::uint32_t pa_max_actions = 256;
    pa->add_option("--checkpoint", pa_ckpt, "checkpoint file")->required();
    pa->add_option("--graph", pa_graph, "dataset directory")->required();
    pa->add_option("--query", pa_query, "\"head,relation\"")->required();
    pa->add_option("--top", pa_top, "paths to print");
    pa->add_option("--beam", pa_beam, "beam width");
    pa->add_option("--horizon", pa_horizon, "rollout length T");
    pa->add_option("--max-actions", pa_max_actions, "action space truncation");

    // sweep
    auto* sw = app.add_subcommand("sweep", "SL-epoch sweep with delta-vs-epoch-0 heatmap CSV");
    std::string sw_config, sw_epochs = "0,1,2,3";
    std::vector<std::string> sw_sets;
    sw->add_option("--config", sw_config, "run config file");
    sw->add_option("--epochs", sw_epochs, "comma-separated SL epoch counts (must include 0)");
    sw->add_option("--set", sw_sets, "override key=value (repeatable)");

    // make-synthetic
    auto* mk = app.add_subcommand("make-synthetic", "write a deterministic synthetic dataset");
    std::string mk_kind = "composition", mk_out;
    int mk_size = 200;
    std::uint64_t mk_seed = 42;
    mk->add_option("--kind", mk_kind, "chain|grid|composition");
    mk->add_option("--size", mk_size, "entity budget");
    mk->add_option("--seed", mk_seed, "generator seed");
    mk->add_option("--out", mk_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (stats->parsed()) {
            return cmd_stats(stats_graph, stats_split, stats_k, stats_out, stats_max_actions);
        }
        if (gen->parsed()) {
            return cmd_gen_labels(gen_graph, gen_depth, gen_out, gen_limit, gen_relations,
                                  gen_mask_all, gen_threads, gen_max_actions);
        }
        if (tr->parsed()) {
            RunConfig cfg = tr_config.empty() ? parse_overrides(tr_sets)
                                              : parse_config(tr_config, tr_sets);
            if (tr_seed_given) cfg.hp.seed = tr_seed;
            return cmd_train(cfg);
        }
        if (ev->parsed()) {
            return cmd_eval(ev_ckpt, ev_graph, ev_split, ev_beam, ev_horizon, ev_raw, ev_per_query,
                            ev_out, ev_max_actions, ev_threads);
        }
        if (pa->parsed()) {
            return cmd_paths(pa_ckpt, pa_graph, pa_query, pa_top, pa_beam, pa_horizon,
                             pa_max_actions);
        }
        if (sw->parsed()) {
            RunConfig cfg = sw_config.empty() ? parse_overrides(sw_sets)
                                              : parse_config(sw_config, sw_sets);
            return cmd_sweep(cfg, sw_epochs);
        }
        if (mk->parsed()) {
            return cmd_make_synthetic(mk_kind, mk_size, mk_seed, mk_out);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 4;
    }
    return 0;
}
