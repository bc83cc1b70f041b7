#include "ssrl/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>

namespace ssrl {

std::string RunConfig::resolved_train() const {
    return train_file.empty() ? data_dir + "/train.txt" : train_file;
}
std::string RunConfig::resolved_dev() const {
    return dev_file.empty() ? data_dir + "/dev.txt" : dev_file;
}
std::string RunConfig::resolved_test() const {
    return test_file.empty() ? data_dir + "/test.txt" : test_file;
}
std::uint32_t RunConfig::resolved_label_depth() const {
    return label_depth == 0 ? static_cast<std::uint32_t>(hp.horizon) : label_depth;
}

RunConfig default_config() { return {}; }

void apply_preset(RunConfig& cfg, const std::string& name) {
    cfg.hp.learning_rate = 1e-3;
    if (name == "fb15k-237") {
        cfg.hp.sl_beta = 0.0002;
        cfg.hp.rl_beta = 0.02;
        cfg.hp.sl_lambda = 0.02;
        cfg.hp.rl_lambda = 0.02;
    } else if (name == "nell-995") {
        cfg.hp.sl_beta = 0.02;
        cfg.hp.rl_beta = 0.05;
        cfg.hp.sl_lambda = 0.02;
        cfg.hp.rl_lambda = 0.02;
    } else if (name == "wn18rr") {
        cfg.hp.sl_beta = 0.02;
        cfg.hp.rl_beta = 0.05;
        cfg.hp.sl_lambda = 0.002;
        cfg.hp.rl_lambda = 0.05;
    } else if (name == "fb60k") {
        cfg.hp.sl_beta = 0.02;
        cfg.hp.rl_beta = 0.2;
        cfg.hp.sl_lambda = 0.02;
        cfg.hp.rl_lambda = 0.02;
    } else if (name == "synthetic") {
        cfg.dims = {32, 32, 64};
        cfg.max_actions = 64;
        cfg.hp.sl_beta = 0.02;
        cfg.hp.rl_beta = 0.05;
        cfg.hp.sl_lambda = 0.02;
        cfg.hp.rl_lambda = 0.02;
        cfg.hp.batch_size = 32;
        cfg.hp.rollouts_per_query = 10;
    } else {
        throw ConfigError("unknown preset: " + name);
    }
    cfg.preset = name;
}

namespace {

struct KeyBinding {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

bool parse_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(where + ": cannot parse boolean from '" + v + "'");
}

double parse_double(const std::string& v, const std::string& where) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(where + ": cannot parse number from '" + v + "'");
    }
}

std::int64_t parse_int(const std::string& v, const std::string& where) {
    try {
        std::size_t used = 0;
        const std::int64_t i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError(where + ": cannot parse integer from '" + v + "'");
    }
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const std::map<std::string, KeyBinding>& bindings() {
    static const std::map<std::string, KeyBinding> table = [] {
        std::map<std::string, KeyBinding> t;
        auto str = [&](const char* key, std::string RunConfig::* field) {
            t[key] = {[field](RunConfig& c, const std::string& v, const std::string&) { c.*field = v; },
                      [field](const RunConfig& c) { return c.*field; }};
        };
        auto num = [&](const char* key, auto accessor) {
            t[key] = {[accessor](RunConfig& c, const std::string& v, const std::string& w) {
                          accessor(c) = parse_double(v, w);
                      },
                      [accessor](const RunConfig& c) {
                          return format_double(accessor(const_cast<RunConfig&>(c)));
                      }};
        };
        auto integer = [&](const char* key, auto accessor) {
            t[key] = {[accessor](RunConfig& c, const std::string& v, const std::string& w) {
                          accessor(c) = static_cast<std::decay_t<decltype(accessor(c))>>(parse_int(v, w));
                      },
                      [accessor](const RunConfig& c) {
                          return std::to_string(accessor(const_cast<RunConfig&>(c)));
                      }};
        };
        auto boolean = [&](const char* key, auto accessor) {
            t[key] = {[accessor](RunConfig& c, const std::string& v, const std::string& w) {
                          accessor(c) = parse_bool(v, w);
                      },
                      [accessor](const RunConfig& c) {
                          return accessor(const_cast<RunConfig&>(c)) ? "true" : "false";
                      }};
        };

        t["preset"] = {[](RunConfig& c, const std::string& v, const std::string&) {
                           if (!v.empty()) apply_preset(c, v);
                       },
                       [](const RunConfig& c) { return c.preset; }};
        str("data.dir", &RunConfig::data_dir);
        str("data.train", &RunConfig::train_file);
        str("data.dev", &RunConfig::dev_file);
        str("data.test", &RunConfig::test_file);
        str("data.labels", &RunConfig::labels_file);
        str("out.dir", &RunConfig::out_dir);
        integer("seed", [](RunConfig& c) -> std::uint64_t& { return c.hp.seed; });
        integer("threads", [](RunConfig& c) -> int& { return c.hp.threads; });
        integer("model.embed_dim", [](RunConfig& c) -> int& { return c.dims.embed; });
        integer("model.hidden_dim", [](RunConfig& c) -> int& { return c.dims.hidden; });
        integer("model.ff_dim", [](RunConfig& c) -> int& { return c.dims.feedforward; });
        integer("model.max_actions", [](RunConfig& c) -> std::uint32_t& { return c.max_actions; });
        integer("env.horizon", [](RunConfig& c) -> int& { return c.hp.horizon; });
        boolean("env.mask_all_query_edges",
                [](RunConfig& c) -> bool& { return c.hp.mask_all_query_edges; });
        integer("label.depth", [](RunConfig& c) -> std::uint32_t& { return c.label_depth; });
        integer("sl.epochs", [](RunConfig& c) -> int& { return c.hp.sl_epochs; });
        integer("sl.max_batches", [](RunConfig& c) -> int& { return c.hp.sl_max_batches; });
        num("sl.beta", [](RunConfig& c) -> double& { return c.hp.sl_beta; });
        num("sl.lambda", [](RunConfig& c) -> double& { return c.hp.sl_lambda; });
        integer("sl.max_resamples", [](RunConfig& c) -> int& { return c.hp.sl_max_resamples; });
        boolean("sl.consume_step_on_reject",
                [](RunConfig& c) -> bool& { return c.hp.sl_consume_step_on_reject; });
        boolean("sl.sum_over_steps", [](RunConfig& c) -> bool& { return c.hp.sl_sum_over_steps; });
        integer("rl.batches", [](RunConfig& c) -> int& { return c.hp.rl_batches; });
        integer("rl.batch_size", [](RunConfig& c) -> int& { return c.hp.batch_size; });
        integer("rl.rollouts_per_query",
                [](RunConfig& c) -> int& { return c.hp.rollouts_per_query; });
        num("rl.beta", [](RunConfig& c) -> double& { return c.hp.rl_beta; });
        num("rl.lambda", [](RunConfig& c) -> double& { return c.hp.rl_lambda; });
        num("rl.gamma", [](RunConfig& c) -> double& { return c.hp.gamma; });
        num("optim.learning_rate", [](RunConfig& c) -> double& { return c.hp.learning_rate; });
        t["optim.kind"] = {
            [](RunConfig& c, const std::string& v, const std::string& w) {
                if (v == "adam") c.hp.optimizer = Optimizer::Adam;
                else if (v == "sgd") c.hp.optimizer = Optimizer::Sgd;
                else throw ConfigError(w + ": optim.kind must be 'adam' or 'sgd'");
            },
            [](const RunConfig& c) {
                return c.hp.optimizer == Optimizer::Adam ? "adam" : "sgd";
            }};
        integer("eval.beam_width", [](RunConfig& c) -> int& { return c.hp.beam_width; });
        integer("eval.every", [](RunConfig& c) -> int& { return c.hp.eval_every; });
        boolean("eval.filtered", [](RunConfig& c) -> bool& { return c.eval_filtered; });
        return t;
    }();
    return table;
}

void assign(RunConfig& cfg, const std::string& key, const std::string& value,
            const std::string& where) {
    const auto& table = bindings();
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    it->second.set(cfg, value, where);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

void apply_override(RunConfig& cfg, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override '" + kv + "' must have the form key=value");
    }
    assign(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)), "override '" + kv + "'");
}

}  // namespace

RunConfig parse_config(const std::string& path, std::span<const std::string> overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg = default_config();
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        const std::string where = path + " line " + std::to_string(lineno);
        if (eq == std::string::npos) {
            throw ConfigError(where + ": expected 'key = value'");
        }
        assign(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)), where);
    }
    for (const auto& kv : overrides) apply_override(cfg, kv);
    return cfg;
}

RunConfig parse_overrides(std::span<const std::string> overrides) {
    RunConfig cfg = default_config();
    for (const auto& kv : overrides) apply_override(cfg, kv);
    return cfg;
}

std::string render_config(const RunConfig& cfg) {
    std::string out;
    out += "# ";
    out += kVersionString;
    out += "\n# config-hash: " + config_hash_hex(cfg) + "\n";
    // The preset line goes first so that reparsing the echo applies it before
    // the explicit values that may override it.
    out += "preset = " + cfg.preset + "\n";
    for (const auto& [key, binding] : bindings()) {
        if (key == "preset") continue;
        out += key + " = " + binding.get(cfg) + "\n";
    }
    return out;
}

std::uint64_t config_hash(const RunConfig& cfg) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& [key, binding] : bindings()) {
        const std::string line = key + "=" + binding.get(cfg);
        for (const char ch : line) {
            h ^= static_cast<unsigned char>(ch);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

std::string config_hash_hex(const RunConfig& cfg) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
    return buf;
}

}  // namespace ssrl
