#include "ssrl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "ssrl/errors.hpp"
#include "ssrl/rng.hpp"

namespace ssrl {

SyntheticKind synthetic_kind_from_string(const std::string& name) {
    if (name == "chain") return SyntheticKind::Chain;
    if (name == "grid") return SyntheticKind::Grid;
    if (name == "composition") return SyntheticKind::Composition;
    throw ConfigError("unknown synthetic kind: " + name + " (chain|grid|composition)");
}

namespace {

struct Fact {
    std::string head, relation, tail;
};

std::string ent(int i) { return "e" + std::to_string(i); }

void write_facts(const std::string& path, const std::vector<Fact>& facts) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write synthetic file: " + path);
    for (const auto& f : facts) out << f.head << '\t' << f.relation << '\t' << f.tail << '\n';
}

}  // namespace

void make_synthetic(const SyntheticSpec& spec, const std::string& out_dir) {
    std::vector<Fact> support;  // r1/r2 edges, always in train
    std::vector<Fact> queries;  // r_q facts, split 80/20

    Rng rng = Rng::derive(spec.seed, {kStreamSynthetic, static_cast<std::uint64_t>(spec.kind)});

    switch (spec.kind) {
        case SyntheticKind::Chain: {
            if (spec.size < 8) throw ConfigError("chain needs size >= 8");
            for (int i = 0; i + 1 < spec.size; ++i) {
                support.push_back({ent(i), "r1", ent(i + 1)});
            }
            for (int i = 0; i + 2 < spec.size; ++i) {
                queries.push_back({ent(i), "rq", ent(i + 2)});
            }
            break;
        }
        case SyntheticKind::Grid: {
            const int side = static_cast<int>(std::sqrt(static_cast<double>(spec.size)));
            if (side < 3) throw ConfigError("grid needs size >= 9");
            auto cell = [&](int r, int c) { return ent(r * side + c); };
            for (int r = 0; r < side; ++r) {
                for (int c = 0; c < side; ++c) {
                    if (c + 1 < side) support.push_back({cell(r, c), "r1", cell(r, c + 1)});
                    if (r + 1 < side) support.push_back({cell(r, c), "r2", cell(r + 1, c)});
                }
            }
            for (int r = 0; r + 1 < side; ++r) {
                for (int c = 0; c + 1 < side; ++c) {
                    queries.push_back({cell(r, c), "rq", cell(r + 1, c + 1)});
                }
            }
            break;
        }
        case SyntheticKind::Composition: {
            if (spec.size < 12) throw ConfigError("composition needs size >= 12");
            const int tier = spec.size / 3;
            const int a0 = 0, b0 = tier, c0 = 2 * tier;
            const int nc = spec.size - 2 * tier;
            std::vector<std::vector<int>> r1(tier), r2(tier);
            for (int a = 0; a < tier; ++a) {
                const int k = 1 + static_cast<int>(rng.integer(2));
                std::set<int> picked;
                while (static_cast<int>(picked.size()) < k) {
                    picked.insert(b0 + static_cast<int>(rng.integer(tier)));
                }
                for (int b : picked) {
                    support.push_back({ent(a0 + a), "r1", ent(b)});
                    r1[a].push_back(b);
                }
            }
            for (int b = 0; b < tier; ++b) {
                const int k = 1 + static_cast<int>(rng.integer(2));
                std::set<int> picked;
                while (static_cast<int>(picked.size()) < k) {
                    picked.insert(c0 + static_cast<int>(rng.integer(nc)));
                }
                for (int c : picked) {
                    support.push_back({ent(b0 + b), "r2", ent(c)});
                    r2[b].push_back(c);
                }
            }
            std::set<std::pair<int, int>> composed;
            for (int a = 0; a < tier; ++a) {
                for (int b : r1[a]) {
                    for (int c : r2[b - b0]) composed.insert({a0 + a, c});
                }
            }
            for (const auto& [a, c] : composed) queries.push_back({ent(a), "rq", ent(c)});
            break;
        }
    }

    if (queries.size() < 5) throw ConfigError("synthetic size too small to split 80/20");
    rng.shuffle(queries.begin(), queries.end());
    const std::size_t n_test = std::max<std::size_t>(1, queries.size() / 5);
    std::vector<Fact> test(queries.end() - static_cast<std::ptrdiff_t>(n_test), queries.end());
    queries.resize(queries.size() - n_test);

    std::vector<Fact> train = support;
    train.insert(train.end(), queries.begin(), queries.end());

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create output directory: " + out_dir);
    write_facts(out_dir + "/train.txt", train);
    write_facts(out_dir + "/dev.txt", test);  // desk-scale: dev mirrors test
    write_facts(out_dir + "/test.txt", test);
}

}  // namespace ssrl
