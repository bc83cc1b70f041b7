#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssrl/policy.hpp"
#include "ssrl/trainer.hpp"

namespace ssrl {

// Fully resolved run configuration: dataset locations plus every hyperparameter.
// Parsed from line-based "key = value" files with CLI "key=value" overrides
// applied last; presets bundle the published per-dataset constants.
struct RunConfig {
    std::string preset;  // "", "fb15k-237", "nell-995", "wn18rr", "fb60k", "synthetic"
    std::string data_dir;
    std::string train_file, dev_file, test_file;  // default <data_dir>/{train,dev,test}.txt
    std::string labels_file;
    std::string out_dir = "out";
    PolicyDims dims;
    std::uint32_t max_actions = 256;
    std::uint32_t label_depth = 0;  // 0 -> horizon
    bool eval_filtered = true;
    Hyperparams hp;

    std::string resolved_train() const;
    std::string resolved_dev() const;
    std::string resolved_test() const;
    std::uint32_t resolved_label_depth() const;
};

RunConfig default_config();

// Applies a named preset's values on top of the current config.
void apply_preset(RunConfig& cfg, const std::string& name);

// `overrides` are "key=value" strings (from --set flags).
RunConfig parse_config(const std::string& path, std::span<const std::string> overrides);
RunConfig parse_overrides(std::span<const std::string> overrides);  // no file

// Canonical echo: sorted "key = value" lines plus version/hash comments.
// Reparsing the rendered text reproduces the config.
std::string render_config(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);
std::string config_hash_hex(const RunConfig& cfg);

inline constexpr const char* kVersionString = "ssrl 0.1.0";

}  // namespace ssrl
