#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ssrl/policy.hpp"

namespace ssrl {

namespace {

constexpr char kCkptMagic[8] = {'S', 'S', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

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
    if (!in) throw DataError(std::string("checkpoint truncated while reading ") + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits);
}

float read_f32(std::istream& in, const char* what) {
    const std::uint32_t bits = read_u32(in, what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

// Tensors are serialized row-major regardless of in-memory layout.
void write_tensor(std::ostream& out, const std::string& name, const Mat<float>& m) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, 2);
    write_u32(out, static_cast<std::uint32_t>(m.rows()));
    write_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) write_f32(out, m(r, c));
    }
}

void write_tensor(std::ostream& out, const std::string& name, const Vec<float>& v) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, 1);
    write_u32(out, static_cast<std::uint32_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) write_f32(out, v[i]);
}

}  // namespace

void save_checkpoint(const PolicyParams<float>& params, const std::string& path,
                     const CheckpointMeta& meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kCkptMagic, 8);
    write_u32(out, kCkptVersion);
    write_u32(out, 9);
    write_tensor(out, "entity_emb", params.entity_emb);
    write_tensor(out, "relation_emb", params.relation_emb);
    write_tensor(out, "lstm_wx", params.lstm_wx);
    write_tensor(out, "lstm_wh", params.lstm_wh);
    write_tensor(out, "lstm_b", params.lstm_b);
    write_tensor(out, "w1", params.w1);
    write_tensor(out, "b1", params.b1);
    write_tensor(out, "w2", params.w2);
    write_tensor(out, "b2", params.b2);

    nlohmann::ordered_json j;
    j["seed"] = meta.seed;
    j["stage"] = meta.stage;
    j["epoch"] = meta.epoch;
    j["config_hash"] = meta.config_hash;
    j["dims"] = {{"embed", params.dims.embed},
                 {"hidden", params.dims.hidden},
                 {"feedforward", params.dims.feedforward}};
    j["entity_count"] = params.entity_count();
    j["relation_count"] = params.relation_count();
    const std::string meta_text = j.dump();
    out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
    if (!out) throw DataError("write failure on checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in) throw DataError("checkpoint corrupt header (too short): " + path);
    if (std::memcmp(magic, kCkptMagic, 8) != 0) {
        throw DataError("checkpoint magic mismatch: " + path);
    }
    const std::uint32_t version = read_u32(in, "version");
    if (version != kCkptVersion) {
        throw DataError("checkpoint version mismatch: " + path + " (got " +
                        std::to_string(version) + ")");
    }
    const std::uint32_t tensor_count = read_u32(in, "tensor count");

    LoadedCheckpoint result;
    auto read_dims = [&](const char* tname) {
        const std::uint32_t rank = read_u32(in, "rank");
        std::vector<std::uint32_t> dims(rank);
        for (auto& dv : dims) dv = read_u32(in, tname);
        return dims;
    };
    for (std::uint32_t t = 0; t < tensor_count; ++t) {
        const std::uint32_t name_len = read_u32(in, "tensor name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw DataError("checkpoint truncated while reading tensor name");
        const auto dims = read_dims(name.c_str());
        auto fill_mat = [&](Mat<float>& m) {
            if (dims.size() != 2) {
                throw DataError("checkpoint shape error on tensor '" + name + "': expected rank 2");
            }
            m.resize(dims[0], dims[1]);
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = read_f32(in, name.c_str());
            }
        };
        auto fill_vec = [&](Vec<float>& v) {
            if (dims.size() != 1) {
                throw DataError("checkpoint shape error on tensor '" + name + "': expected rank 1");
            }
            v.resize(dims[0]);
            for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = read_f32(in, name.c_str());
        };
        if (name == "entity_emb") fill_mat(result.params.entity_emb);
        else if (name == "relation_emb") fill_mat(result.params.relation_emb);
        else if (name == "lstm_wx") fill_mat(result.params.lstm_wx);
        else if (name == "lstm_wh") fill_mat(result.params.lstm_wh);
        else if (name == "lstm_b") fill_vec(result.params.lstm_b);
        else if (name == "w1") fill_mat(result.params.w1);
        else if (name == "b1") fill_vec(result.params.b1);
        else if (name == "w2") fill_mat(result.params.w2);
        else if (name == "b2") fill_vec(result.params.b2);
        else throw DataError("checkpoint contains unknown tensor '" + name + "'");
    }

    std::stringstream meta_text;
    meta_text << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(meta_text.str());
    } catch (const nlohmann::json::exception&) {
        throw DataError("checkpoint metadata block is not valid JSON: " + path);
    }
    result.meta.seed = j.value("seed", std::uint64_t{0});
    result.meta.stage = j.value("stage", std::string{});
    result.meta.epoch = j.value("epoch", 0);
    result.meta.config_hash = j.value("config_hash", std::string{});
    if (j.contains("dims")) {
        result.params.dims.embed = j["dims"].value("embed", 0);
        result.params.dims.hidden = j["dims"].value("hidden", 0);
        result.params.dims.feedforward = j["dims"].value("feedforward", 0);
    }

    // Internal consistency between recorded dims and tensor shapes.
    const int d = result.params.dims.embed, H = result.params.dims.hidden,
              F = result.params.dims.feedforward;
    if (result.params.entity_emb.cols() != d || result.params.relation_emb.cols() != d) {
        throw DataError("checkpoint shape error on tensor 'entity_emb': embed width mismatch");
    }
    if (result.params.lstm_wx.rows() != 4 * H || result.params.lstm_wx.cols() != 2 * d ||
        result.params.lstm_wh.cols() != H || result.params.lstm_b.size() != 4 * H) {
        throw DataError("checkpoint shape error on tensor 'lstm_wx': LSTM shape mismatch");
    }
    if (result.params.w1.rows() != F || result.params.w1.cols() != H + d ||
        result.params.w2.rows() != 2 * d || result.params.w2.cols() != F) {
        throw DataError("checkpoint shape error on tensor 'w1': feedforward shape mismatch");
    }
    return result;
}

void validate_checkpoint(const PolicyParams<float>& params, const KnowledgeGraph& g) {
    if (params.entity_count() != g.entity_count()) {
        throw DataError("checkpoint shape error on tensor 'entity_emb': has " +
                        std::to_string(params.entity_count()) + " rows but graph has " +
                        std::to_string(g.entity_count()) + " entities");
    }
    if (params.relation_count() != g.relation_count_augmented()) {
        throw DataError("checkpoint shape error on tensor 'relation_emb': has " +
                        std::to_string(params.relation_count()) + " rows but graph has " +
                        std::to_string(g.relation_count_augmented()) + " augmented relations");
    }
}

}  // namespace ssrl
