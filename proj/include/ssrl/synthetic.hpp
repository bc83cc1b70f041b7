#pragma once

#include <cstdint>
#include <string>

namespace ssrl {

enum class SyntheticKind { Chain, Grid, Composition };

SyntheticKind synthetic_kind_from_string(const std::string& name);

// Writes train.txt / dev.txt / test.txt under out_dir. Facts for the query
// relation r_q hold exactly where the generating pattern composes, are split
// 80/20 into train/test (dev mirrors test), and every answer is reachable
// within two hops of supporting edges, so horizon 3 always suffices.
struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::Composition;
    int size = 200;  // entity budget
    std::uint64_t seed = 7;
};

void make_synthetic(const SyntheticSpec& spec, const std::string& out_dir);

}  // namespace ssrl
