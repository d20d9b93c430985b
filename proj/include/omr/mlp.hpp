#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "omr/features.hpp"
#include "omr/rng.hpp"

namespace omr {

constexpr int kClassRepDim = 32;
constexpr int kHiddenDim = 32;
constexpr int kNodeDim = 4 + kClassRepDim;  // normalized bbox + class representation
constexpr int kPairDim = 2 * kNodeDim;

// Edge classifier: per node concat(bbox4, class_rep32), pair concat to 72,
// then affine 72->32, ReLU, affine 32->32, ReLU, affine 32->1, sigmoid.
// Hard mode looks the class representation up in an embedding table; soft
// mode maps the detector's probability vector through a linear layer of the
// same parameter count (plus an optional bias).
struct ModelParams {
    ClassMode mode = ClassMode::Hard;
    int num_classes = 0;
    bool soft_bias = true;

    std::vector<double> class_rep;       // hard: C x 32 (row per class); soft: 32 x C
    std::vector<double> class_rep_bias;  // soft mode with bias enabled, size 32
    std::vector<double> w1, b1;          // 32 x 72, 32
    std::vector<double> w2, b2;          // 32 x 32, 32
    std::vector<double> w3, b3;          // 1 x 32, 1

    bool same_shape(const ModelParams& o) const {
        return mode == o.mode && num_classes == o.num_classes && soft_bias == o.soft_bias &&
               class_rep.size() == o.class_rep.size() &&
               class_rep_bias.size() == o.class_rep_bias.size() &&
               w1.size() == o.w1.size() && b1.size() == o.b1.size() &&
               w2.size() == o.w2.size() && b2.size() == o.b2.size() &&
               w3.size() == o.w3.size() && b3.size() == o.b3.size();
    }
};

struct ParamBlockRef {
    const char* name;
    std::vector<double>* data;
};

struct ConstParamBlockRef {
    const char* name;
    const std::vector<double>* data;
};

inline std::vector<ParamBlockRef> param_blocks(ModelParams& p) {
    std::vector<ParamBlockRef> blocks{{"class_rep", &p.class_rep}};
    if (p.mode == ClassMode::Soft && p.soft_bias)
        blocks.push_back({"class_rep_bias", &p.class_rep_bias});
    blocks.push_back({"W1", &p.w1});
    blocks.push_back({"b1", &p.b1});
    blocks.push_back({"W2", &p.w2});
    blocks.push_back({"b2", &p.b2});
    blocks.push_back({"W3", &p.w3});
    blocks.push_back({"b3", &p.b3});
    return blocks;
}

inline std::vector<ConstParamBlockRef> param_blocks(const ModelParams& p) {
    std::vector<ConstParamBlockRef> blocks{{"class_rep", &p.class_rep}};
    if (p.mode == ClassMode::Soft && p.soft_bias)
        blocks.push_back({"class_rep_bias", &p.class_rep_bias});
    blocks.push_back({"W1", &p.w1});
    blocks.push_back({"b1", &p.b1});
    blocks.push_back({"W2", &p.w2});
    blocks.push_back({"b2", &p.b2});
    blocks.push_back({"W3", &p.w3});
    blocks.push_back({"b3", &p.b3});
    return blocks;
}

inline ModelParams zeros_like(const ModelParams& p) {
    ModelParams z = p;
    for (auto& block : param_blocks(z)) block.data->assign(block.data->size(), 0.0);
    return z;
}

inline ModelParams init_params(std::uint64_t seed, int num_classes, ClassMode mode,
                               bool soft_bias = true) {
    if (num_classes < 1) throw std::invalid_argument("init_params: need at least one class");
    ModelParams p;
    p.mode = mode;
    p.num_classes = num_classes;
    p.soft_bias = mode == ClassMode::Soft && soft_bias;

    Rng rng(seed);
    const auto glorot = [&rng](std::vector<double>& w, int fan_in, int fan_out) {
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& x : w) x = rng.uniform(-bound, bound);
    };
    p.class_rep.resize(static_cast<std::size_t>(num_classes) * kClassRepDim);
    glorot(p.class_rep, num_classes, kClassRepDim);
    if (p.soft_bias) p.class_rep_bias.assign(kClassRepDim, 0.0);
    p.w1.resize(static_cast<std::size_t>(kHiddenDim) * kPairDim);
    glorot(p.w1, kPairDim, kHiddenDim);
    p.b1.assign(kHiddenDim, 0.0);
    p.w2.resize(static_cast<std::size_t>(kHiddenDim) * kHiddenDim);
    glorot(p.w2, kHiddenDim, kHiddenDim);
    p.b2.assign(kHiddenDim, 0.0);
    p.w3.resize(kHiddenDim);
    glorot(p.w3, kHiddenDim, 1);
    p.b3.assign(1, 0.0);
    return p;
}

struct ForwardTrace {
    std::array<double, kPairDim> input{};
    std::array<double, kHiddenDim> z1{}, h1{}, z2{}, h2{};
    double z3 = 0.0;
    double prob = 0.0;
};

namespace detail {

inline void class_representation(const ModelParams& p, const PairCandidate& pc, bool node_a,
                                 double* out) {
    const int C = p.num_classes;
    if (p.mode == ClassMode::Hard) {
        const int cls = node_a ? pc.class_a : pc.class_b;
        if (cls < 0 || cls >= C)
            throw std::invalid_argument("forward: class id out of range");
        const double* row = p.class_rep.data() + static_cast<std::size_t>(cls) * kClassRepDim;
        std::memcpy(out, row, sizeof(double) * kClassRepDim);
        return;
    }
    const std::vector<double>& probs = node_a ? pc.probs_a : pc.probs_b;
    if (static_cast<int>(probs.size()) != C)
        throw std::invalid_argument("forward: probability vector length mismatch");
    for (int o = 0; o < kClassRepDim; ++o) {
        const double* row = p.class_rep.data() + static_cast<std::size_t>(o) * C;
        double acc = 0.0;
        for (int c = 0; c < C; ++c) acc += row[c] * probs[static_cast<std::size_t>(c)];
        if (p.soft_bias) acc += p.class_rep_bias[static_cast<std::size_t>(o)];
        out[o] = acc;
    }
}

inline void affine(const std::vector<double>& w, const std::vector<double>& b, int out_dim,
                   int in_dim, const double* x, double* z) {
    for (int o = 0; o < out_dim; ++o) {
        const double* row = w.data() + static_cast<std::size_t>(o) * in_dim;
        double acc = b[static_cast<std::size_t>(o)];
        for (int i = 0; i < in_dim; ++i) acc += row[i] * x[i];
        z[o] = acc;
    }
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace detail

inline double forward(const ModelParams& p, const PairCandidate& pc,
                      ForwardTrace* trace = nullptr) {
    ForwardTrace local;
    ForwardTrace& t = trace ? *trace : local;
    double* x = t.input.data();
    for (int k = 0; k < 4; ++k) {
        x[k] = pc.bbox_a[static_cast<std::size_t>(k)];
        x[kNodeDim + k] = pc.bbox_b[static_cast<std::size_t>(k)];
    }
    detail::class_representation(p, pc, true, x + 4);
    detail::class_representation(p, pc, false, x + kNodeDim + 4);

    detail::affine(p.w1, p.b1, kHiddenDim, kPairDim, x, t.z1.data());
    for (int i = 0; i < kHiddenDim; ++i)
        t.h1[static_cast<std::size_t>(i)] = std::max(0.0, t.z1[static_cast<std::size_t>(i)]);
    detail::affine(p.w2, p.b2, kHiddenDim, kHiddenDim, t.h1.data(), t.z2.data());
    for (int i = 0; i < kHiddenDim; ++i)
        t.h2[static_cast<std::size_t>(i)] = std::max(0.0, t.z2[static_cast<std::size_t>(i)]);
    double z3 = p.b3[0];
    for (int i = 0; i < kHiddenDim; ++i)
        z3 += p.w3[static_cast<std::size_t>(i)] * t.h2[static_cast<std::size_t>(i)];
    t.z3 = z3;
    t.prob = detail::sigmoid(z3);
    return t.prob;
}

constexpr double kBceClamp = 1e-12;

inline double bce_loss(double predicted, double label) {
    const double p = std::min(1.0 - kBceClamp, std::max(kBceClamp, predicted));
    return -label * std::log(p) - (1.0 - label) * std::log(1.0 - p);
}

struct BackwardResult {
    double mean_loss = 0.0;
    ModelParams grads;
};

// Exact gradient of the mean batch BCE with respect to every parameter.
// Accumulation is sequential in batch index order so results are reproducible.
inline BackwardResult backward(const ModelParams& p, std::span<const PairCandidate> batch) {
    if (batch.empty()) throw std::invalid_argument("backward: empty batch");
    BackwardResult result;
    result.grads = zeros_like(p);
    ModelParams& g = result.grads;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    const int C = p.num_classes;

    ForwardTrace t;
    for (const PairCandidate& pc : batch) {
        const double prob = forward(p, pc, &t);
        const double label = static_cast<double>(pc.label);
        result.mean_loss += bce_loss(prob, label) * inv_batch;

        // d(mean BCE)/dz3 for the sigmoid output
        const double gz3 = (prob - label) * inv_batch;

        g.b3[0] += gz3;
        std::array<double, kHiddenDim> gh2;
        for (int i = 0; i < kHiddenDim; ++i) {
            g.w3[static_cast<std::size_t>(i)] += gz3 * t.h2[static_cast<std::size_t>(i)];
            gh2[static_cast<std::size_t>(i)] = gz3 * p.w3[static_cast<std::size_t>(i)];
        }
        std::array<double, kHiddenDim> gz2;
        for (int i = 0; i < kHiddenDim; ++i)
            gz2[static_cast<std::size_t>(i)] =
                t.z2[static_cast<std::size_t>(i)] > 0.0 ? gh2[static_cast<std::size_t>(i)]
                                                        : 0.0;
        std::array<double, kHiddenDim> gh1{};
        for (int o = 0; o < kHiddenDim; ++o) {
            const double go = gz2[static_cast<std::size_t>(o)];
            if (go == 0.0) continue;
            double* wrow = g.w2.data() + static_cast<std::size_t>(o) * kHiddenDim;
            const double* w2row = p.w2.data() + static_cast<std::size_t>(o) * kHiddenDim;
            g.b2[static_cast<std::size_t>(o)] += go;
            for (int i = 0; i < kHiddenDim; ++i) {
                wrow[i] += go * t.h1[static_cast<std::size_t>(i)];
                gh1[static_cast<std::size_t>(i)] += go * w2row[i];
            }
        }
        std::array<double, kHiddenDim> gz1;
        for (int i = 0; i < kHiddenDim; ++i)
            gz1[static_cast<std::size_t>(i)] =
                t.z1[static_cast<std::size_t>(i)] > 0.0 ? gh1[static_cast<std::size_t>(i)]
                                                        : 0.0;
        std::array<double, kPairDim> gx{};
        for (int o = 0; o < kHiddenDim; ++o) {
            const double go = gz1[static_cast<std::size_t>(o)];
            if (go == 0.0) continue;
            double* wrow = g.w1.data() + static_cast<std::size_t>(o) * kPairDim;
            const double* w1row = p.w1.data() + static_cast<std::size_t>(o) * kPairDim;
            g.b1[static_cast<std::size_t>(o)] += go;
            for (int i = 0; i < kPairDim; ++i) {
                wrow[i] += go * t.input[static_cast<std::size_t>(i)];
                gx[static_cast<std::size_t>(i)] += go * w1row[i];
            }
        }

        const auto accumulate_rep = [&](bool node_a, const double* grep) {
            if (p.mode == ClassMode::Hard) {
                const int cls = node_a ? pc.class_a : pc.class_b;
                double* row =
                    g.class_rep.data() + static_cast<std::size_t>(cls) * kClassRepDim;
                for (int k = 0; k < kClassRepDim; ++k) row[k] += grep[k];
                return;
            }
            const std::vector<double>& probs = node_a ? pc.probs_a : pc.probs_b;
            for (int o = 0; o < kClassRepDim; ++o) {
                double* row = g.class_rep.data() + static_cast<std::size_t>(o) * C;
                for (int c = 0; c < C; ++c)
                    row[c] += grep[o] * probs[static_cast<std::size_t>(c)];
                if (p.soft_bias) g.class_rep_bias[static_cast<std::size_t>(o)] += grep[o];
            }
        };
        accumulate_rep(true, gx.data() + 4);
        accumulate_rep(false, gx.data() + kNodeDim + 4);
    }
    return result;
}

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    ModelParams m;
    ModelParams v;
    long long step = 0;

    static AdamState for_params(const ModelParams& p) {
        return AdamState{zeros_like(p), zeros_like(p), 0};
    }
};

inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
                      const AdamConfig& cfg = {}) {
    if (!params.same_shape(grads) || !params.same_shape(state.m))
        throw std::invalid_argument("adam_step: shape mismatch");
    auto pb = param_blocks(params);
    auto gb = param_blocks(grads);
    auto mb = param_blocks(state.m);
    auto vb = param_blocks(state.v);

    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t blk = 0; blk < pb.size(); ++blk) {
        std::vector<double>& w = *pb[blk].data;
        const std::vector<double>& gvec = *gb[blk].data;
        std::vector<double>& m = *mb[blk].data;
        std::vector<double>& v = *vb[blk].data;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = gvec[i];
            if (!std::isfinite(gi))
                throw std::runtime_error(std::string("adam_step: non-finite gradient in ") +
                                         pb[blk].name);
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoints: "MUNGMLP1", uint32 LE meta length, JSON meta, then raw
// little-endian float64 blocks in declared order (class_rep [+ bias], W1, b1,
// W2, b2, W3, b3).
// ---------------------------------------------------------------------------

constexpr char kCheckpointMagic[] = "MUNGMLP1";

struct CheckpointMeta {
    ClassMode mode = ClassMode::Hard;
    int num_classes = 0;
    bool soft_bias = false;
    std::uint64_t vocab_hash = 0;
    std::uint64_t seed = 0;
    int epoch = 0;
};

inline std::string save_checkpoint(const ModelParams& params, const CheckpointMeta& meta) {
    if (meta.num_classes != params.num_classes || meta.mode != params.mode)
        throw std::invalid_argument("save_checkpoint: meta does not describe these params");
    nlohmann::json j{{"mode", params.mode == ClassMode::Hard ? "hard" : "soft"},
                     {"num_classes", params.num_classes},
                     {"soft_bias", params.soft_bias},
                     {"vocab_hash", std::to_string(meta.vocab_hash)},
                     {"seed", std::to_string(meta.seed)},
                     {"epoch", meta.epoch}};
    const std::string meta_text = j.dump();

    std::string out;
    out.append(kCheckpointMagic, 8);
    const auto meta_len = static_cast<std::uint32_t>(meta_text.size());
    char len_bytes[4];
    for (int k = 0; k < 4; ++k)
        len_bytes[k] = static_cast<char>((meta_len >> (8 * k)) & 0xff);
    out.append(len_bytes, 4);
    out += meta_text;

    ModelParams& p = const_cast<ModelParams&>(params);
    for (const auto& block : param_blocks(p)) {
        const auto* bytes = reinterpret_cast<const char*>(block.data->data());
        out.append(bytes, block.data->size() * sizeof(double));
    }
    return out;
}

inline std::pair<ModelParams, CheckpointMeta> load_checkpoint(std::string_view bytes) {
    if (bytes.size() < 12 || bytes.substr(0, 8) != std::string_view(kCheckpointMagic, 8))
        throw std::invalid_argument("load_checkpoint: bad magic");
    std::uint32_t meta_len = 0;
    for (int k = 3; k >= 0; --k)
        meta_len = (meta_len << 8) | static_cast<unsigned char>(bytes[8 + k]);
    if (bytes.size() < 12 + static_cast<std::size_t>(meta_len))
        throw std::invalid_argument("load_checkpoint: truncated meta");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.substr(12, meta_len));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("load_checkpoint: bad meta: ") + e.what());
    }

    CheckpointMeta meta;
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "hard") meta.mode = ClassMode::Hard;
    else if (mode == "soft") meta.mode = ClassMode::Soft;
    else throw std::invalid_argument("load_checkpoint: unknown mode '" + mode + "'");
    meta.num_classes = j.at("num_classes").get<int>();
    meta.soft_bias = j.at("soft_bias").get<bool>();
    meta.vocab_hash = std::stoull(j.at("vocab_hash").get<std::string>());
    meta.seed = std::stoull(j.at("seed").get<std::string>());
    meta.epoch = j.at("epoch").get<int>();
    if (meta.num_classes < 1)
        throw std::invalid_argument("load_checkpoint: invalid class count");

    ModelParams p;
    p.mode = meta.mode;
    p.num_classes = meta.num_classes;
    p.soft_bias = meta.mode == ClassMode::Soft && meta.soft_bias;
    p.class_rep.resize(static_cast<std::size_t>(meta.num_classes) * kClassRepDim);
    if (p.soft_bias) p.class_rep_bias.resize(kClassRepDim);
    p.w1.resize(static_cast<std::size_t>(kHiddenDim) * kPairDim);
    p.b1.resize(kHiddenDim);
    p.w2.resize(static_cast<std::size_t>(kHiddenDim) * kHiddenDim);
    p.b2.resize(kHiddenDim);
    p.w3.resize(kHiddenDim);
    p.b3.resize(1);

    std::size_t offset = 12 + meta_len;
    for (const auto& block : param_blocks(p)) {
        const std::size_t nbytes = block.data->size() * sizeof(double);
        if (bytes.size() < offset + nbytes)
            throw std::invalid_argument(std::string("load_checkpoint: truncated block ") +
                                        block.name);
        std::memcpy(block.data->data(), bytes.data() + offset, nbytes);
        offset += nbytes;
    }
    if (offset != bytes.size())
        throw std::invalid_argument("load_checkpoint: trailing bytes (shape mismatch?)");
    for (const auto& block : param_blocks(p))
        for (double x : *block.data)
            if (!std::isfinite(x))
                throw std::invalid_argument(
                    std::string("load_checkpoint: non-finite value in ") + block.name);
    return {std::move(p), meta};
}

}  // namespace omr
