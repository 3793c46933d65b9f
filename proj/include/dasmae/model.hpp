#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dasmae/numerics/ops.hpp"
#include "dasmae/random.hpp"
#include "dasmae/tubes.hpp"

namespace dasmae::model {

/// Encoder/decoder hyperparameters. Defaults are the full-size preset:
/// (2,16,16) tubes, D_i=1, encoder 384 wide x 12 deep x 6 heads, decoder
/// 192 x 4 x 3, MLP ratio 4, 216 tokens.
struct ModelConfig {
    std::uint32_t cp = 2, tp = 16, fp = 16, di = 1;
    std::uint32_t de = 384, le = 12, he = 6;
    std::uint32_t dd = 192, ld = 4, hd = 3;
    std::uint32_t mlp_ratio = 4;
    std::uint32_t tokens = 216;

    std::uint32_t tube_size() const { return cp * tp * fp * di; }
};

void validate(const ModelConfig& cfg);

/// Exact learnable-scalar count of MaeModel for `cfg`.
std::size_t param_count(const ModelConfig& cfg);

/// Scalars in one pre-norm Transformer block of width `width`.
std::size_t block_param_count(std::size_t width, std::size_t mlp_ratio);

namespace detail {

inline std::uint64_t name_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
    return h;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace detail

/// Initial value of a named parameter: zeros for biases, ones for norm gains,
/// truncated normal (sigma 0.02) for everything else. Depends only on
/// (seed, name) so any single parameter can be re-drawn in isolation.
template <typename T>
num::NdArray<T> initial_value(const std::string& name, const num::Shape& shape, std::uint64_t seed) {
    num::NdArray<T> v(shape);
    if (detail::ends_with(name, ".bias")) return v;
    if (detail::ends_with(name, ".gain")) {
        v.fill(T(1));
        return v;
    }
    Rng rng(derive_seed(seed, {detail::name_hash(name)}));
    for (auto& x : v.storage()) x = static_cast<T>(truncated_normal(rng, 0.02));
    return v;
}

template <typename T>
struct LinearLayer {
    num::Var<T> weight;  // [in, out]
    num::Var<T> bias;    // [out]

    num::Var<T> operator()(const num::Var<T>& x) const { return num::linear(x, weight, bias); }
};

template <typename T>
struct NormLayer {
    num::Var<T> gain;
    num::Var<T> bias;

    num::Var<T> operator()(const num::Var<T>& x) const { return num::layer_norm(x, gain, bias, T(1e-6)); }
};

template <typename T>
struct TransformerBlock {
    NormLayer<T> norm1;
    LinearLayer<T> q, k, v, proj;
    NormLayer<T> norm2;
    LinearLayer<T> fc1, fc2;
    std::uint32_t heads = 1;
};

/// Multi-head self-attention over `batch` independent sequences of `len`
/// tokens stored as [batch*len, width]. Optionally copies the attention
/// probabilities [batch*heads, len, len] into `probs`.
template <typename T>
num::Var<T> self_attention(const TransformerBlock<T>& blk, const num::Var<T>& x, std::size_t batch, std::size_t len,
                           num::NdArray<T>* probs = nullptr) {
    const std::size_t width = x.shape()[1];
    const std::size_t heads = blk.heads;
    const std::size_t dh = width / heads;
    auto split = [&](const num::Var<T>& t) {
        auto r = num::reshape(t, {batch, len, heads, dh});
        return num::reshape(num::permute(r, {0, 2, 1, 3}), {batch * heads, len, dh});
    };
    auto q = split(blk.q(x));
    auto k = split(blk.k(x));
    auto v = split(blk.v(x));
    auto scores = num::scale(num::batched_matmul(q, k, true), static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
    auto p = num::softmax(scores, 2);
    if (probs) *probs = p.value();
    auto ctx = num::batched_matmul(p, v);
    auto merged = num::reshape(num::permute(num::reshape(ctx, {batch, heads, len, dh}), {0, 2, 1, 3}), {batch * len, width});
    return blk.proj(merged);
}

/// Pre-norm residual block: x + Attn(LN(x)), then x + MLP(LN(x)).
template <typename T>
num::Var<T> block_forward(const TransformerBlock<T>& blk, const num::Var<T>& x, std::size_t batch, std::size_t len) {
    auto h = num::add(x, self_attention(blk, blk.norm1(x), batch, len));
    auto m = blk.fc2(num::gelu(blk.fc1(blk.norm2(h))));
    return num::add(h, m);
}

/// Asymmetric masked autoencoder: tube embedding + learnable positions +
/// Transformer encoder; linear projection, shared mask token, positions,
/// Transformer decoder and a linear reconstruction head.
template <typename T>
class MaeModel {
public:
    MaeModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
        validate(cfg_);
        const std::size_t p = cfg_.tube_size();
        enc_embed_ = linear_layer("encoder.embed", p, cfg_.de);
        enc_pos_ = add_param("encoder.pos", {cfg_.tokens, cfg_.de});
        for (std::uint32_t i = 0; i < cfg_.le; ++i) {
            enc_blocks_.push_back(block("encoder.blocks." + std::to_string(i), cfg_.de, cfg_.he));
        }
        enc_norm_ = norm_layer("encoder.norm", cfg_.de);
        dec_embed_ = linear_layer("decoder.embed", cfg_.de, cfg_.dd);
        mask_token_ = add_param("decoder.mask_token", {cfg_.dd});
        dec_pos_ = add_param("decoder.pos", {cfg_.tokens, cfg_.dd});
        for (std::uint32_t i = 0; i < cfg_.ld; ++i) {
            dec_blocks_.push_back(block("decoder.blocks." + std::to_string(i), cfg_.dd, cfg_.hd));
        }
        dec_norm_ = norm_layer("decoder.norm", cfg_.dd);
        head_ = linear_layer("decoder.head", cfg_.dd, p);
    }

    MaeModel(const MaeModel&) = delete;
    MaeModel& operator=(const MaeModel&) = delete;
    MaeModel(MaeModel&&) = default;

    const ModelConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }

    std::vector<num::Var<T>>& parameters() { return params_; }
    const std::vector<num::Var<T>>& parameters() const { return params_; }

    std::vector<num::Var<T>> encoder_parameters() const {
        std::vector<num::Var<T>> out;
        for (const auto& p : params_) {
            if (p.name().rfind("encoder.", 0) == 0) out.push_back(p);
        }
        return out;
    }

    bool has_parameter(const std::string& name) const { return index_.count(name) != 0; }

    num::Var<T> parameter(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("MaeModel: no parameter named '" + name + "'");
        return params_[it->second];
    }

    /// Redraws one parameter from `seed` as at construction.
    void reinitialize(const std::string& name, std::uint64_t seed) {
        auto p = parameter(name);
        p.value() = initial_value<T>(name, p.shape(), seed);
        p.zero_grad();
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.value().size();
        return n;
    }

    /// Rows of `tubes` [R, P] to tokens [R, D_e], each plus the positional row
    /// of its grid index.
    num::Var<T> tube_embed(const num::NdArray<T>& tubes, std::span<const std::uint32_t> positions) const {
        if (tubes.rank() != 2 || tubes.shape()[1] != cfg_.tube_size() || tubes.shape()[0] != positions.size()) {
            throw ContractError("tube_embed: expected [" + std::to_string(positions.size()) + "," +
                                std::to_string(cfg_.tube_size()) + "] tubes, got " + num::shape_string(tubes.shape()));
        }
        std::vector<std::size_t> rows(positions.begin(), positions.end());
        for (std::size_t r : rows) {
            if (r >= cfg_.tokens) {
                throw ContractError("tube_embed: position " + std::to_string(r) + " outside [0, " +
                                    std::to_string(cfg_.tokens) + ")");
            }
        }
        auto tokens = enc_embed_(num::constant(tubes));
        return num::add(tokens, num::gather_rows(enc_pos_, std::span<const std::size_t>(rows)));
    }

    /// Encoder stack over `batch` sequences stored as [batch*len, D_e].
    num::Var<T> encode(const num::Var<T>& tokens, std::size_t batch) const {
        if (tokens.value().rank() != 2 || tokens.shape()[1] != cfg_.de || batch == 0 || tokens.shape()[0] % batch != 0) {
            throw ContractError("encode: expected [batch*len, " + std::to_string(cfg_.de) + "] tokens, got " +
                                num::shape_string(tokens.shape()));
        }
        const std::size_t len = tokens.shape()[0] / batch;
        num::Var<T> x = tokens;
        for (const auto& blk : enc_blocks_) x = block_forward(blk, x, batch, len);
        return enc_norm_(x);
    }

    /// Predicted tubes [batch*N, P] from latent tokens [batch*N_v, D_e], one
    /// mask per sequence.
    num::Var<T> decode(const num::Var<T>& latent, std::span<const tubes::MaskSpec> masks) const {
        const std::size_t batch = masks.size();
        if (batch == 0 || latent.value().rank() != 2 || latent.shape()[1] != cfg_.de) {
            throw ContractError("decode: bad latent shape " + num::shape_string(latent.shape()));
        }
        const std::size_t n = cfg_.tokens;
        const std::size_t nv = latent.shape()[0] / batch;
        std::vector<std::size_t> source(batch * n);
        for (std::size_t b = 0; b < batch; ++b) {
            const auto& m = masks[b];
            if (m.total != n || m.visible.size() != nv || nv * batch != latent.shape()[0]) {
                throw ContractError("decode: latent has " + std::to_string(latent.shape()[0]) + " rows, mask " +
                                    std::to_string(b) + " expects " + std::to_string(m.visible.size()) +
                                    " visible of " + std::to_string(m.total));
            }
            for (std::size_t i = 0; i < n; ++i) source[b * n + i] = batch * nv;  // mask-token row
            for (std::size_t k = 0; k < nv; ++k) source[b * n + m.visible[k]] = b * nv + k;
        }
        auto projected = dec_embed_(latent);
        auto table = num::concat_rows(projected, num::reshape(mask_token_, {1, cfg_.dd}));
        auto seq = num::gather_rows(table, std::span<const std::size_t>(source));
        std::vector<std::size_t> pos_rows(batch * n);
        for (std::size_t i = 0; i < pos_rows.size(); ++i) pos_rows[i] = i % n;
        num::Var<T> x = num::add(seq, num::gather_rows(dec_pos_, std::span<const std::size_t>(pos_rows)));
        for (const auto& blk : dec_blocks_) x = block_forward(blk, x, batch, n);
        return head_(dec_norm_(x));
    }

    /// Mean over the token axis of [batch*len, D] -> [batch, D].
    static num::Var<T> pool_tokens(const num::Var<T>& z, std::size_t batch) {
        const std::size_t len = z.shape()[0] / batch;
        return num::mean_axis(num::reshape(z, {batch, len, z.shape()[1]}), 1);
    }

    const std::vector<TransformerBlock<T>>& encoder_blocks() const { return enc_blocks_; }

private:
    num::Var<T> add_param(const std::string& name, num::Shape shape) {
        if (index_.count(name)) throw ContractError("MaeModel: duplicate parameter '" + name + "'");
        auto p = num::make_parameter<T>(name, initial_value<T>(name, shape, seed_));
        index_[name] = params_.size();
        params_.push_back(p);
        return p;
    }

    LinearLayer<T> linear_layer(const std::string& prefix, std::size_t in, std::size_t out) {
        return {add_param(prefix + ".weight", {in, out}), add_param(prefix + ".bias", {out})};
    }

    NormLayer<T> norm_layer(const std::string& prefix, std::size_t width) {
        return {add_param(prefix + ".gain", {width}), add_param(prefix + ".bias", {width})};
    }

    TransformerBlock<T> block(const std::string& prefix, std::size_t width, std::uint32_t heads) {
        TransformerBlock<T> b;
        b.norm1 = norm_layer(prefix + ".norm1", width);
        b.q = linear_layer(prefix + ".attn.q", width, width);
        b.k = linear_layer(prefix + ".attn.k", width, width);
        b.v = linear_layer(prefix + ".attn.v", width, width);
        b.proj = linear_layer(prefix + ".attn.proj", width, width);
        b.norm2 = norm_layer(prefix + ".norm2", width);
        b.fc1 = linear_layer(prefix + ".mlp.fc1", width, width * cfg_.mlp_ratio);
        b.fc2 = linear_layer(prefix + ".mlp.fc2", width * cfg_.mlp_ratio, width);
        b.heads = heads;
        return b;
    }

    ModelConfig cfg_;
    std::uint64_t seed_;
    std::vector<num::Var<T>> params_;
    std::unordered_map<std::string, std::size_t> index_;

    LinearLayer<T> enc_embed_;
    num::Var<T> enc_pos_;
    std::vector<TransformerBlock<T>> enc_blocks_;
    NormLayer<T> enc_norm_;
    LinearLayer<T> dec_embed_;
    num::Var<T> mask_token_;
    num::Var<T> dec_pos_;
    std::vector<TransformerBlock<T>> dec_blocks_;
    NormLayer<T> dec_norm_;
    LinearLayer<T> head_;
};

/// One masked-autoencoder pass over a batch.
template <typename T>
struct MaeOutput {
    num::Var<T> predictions;   // [batch*N, P]
    num::NdArray<T> targets;   // [batch*N, P] original tubes
    std::vector<tubes::MaskSpec> masks;
};

/// Copies rows of float tube sets into one [sum rows, P] array of T.
template <typename T>
num::NdArray<T> stack_tubes(std::span<const tubes::TubeSet* const> sets) {
    std::size_t rows = 0;
    const std::size_t width = sets.front()->tube_size;
    for (const auto* s : sets) rows += s->count;
    num::NdArray<T> out(num::Shape{rows, width});
    std::size_t at = 0;
    for (const auto* s : sets) {
        for (float v : s->values) out[at++] = static_cast<T>(v);
    }
    return out;
}

/// apply_mask -> tube_embed -> encode -> decode for each (tube set, mask) pair.
template <typename T>
MaeOutput<T> forward_mae(const MaeModel<T>& model, std::span<const tubes::TubeSet* const> batch,
                         std::vector<tubes::MaskSpec> masks) {
    if (batch.empty() || batch.size() != masks.size()) throw ContractError("forward_mae: batch/mask count mismatch");
    const auto& cfg = model.config();
    std::vector<tubes::TubeSet> visible;
    visible.reserve(batch.size());
    std::vector<std::uint32_t> positions;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        if (batch[b]->count != cfg.tokens || batch[b]->tube_size != cfg.tube_size()) {
            throw ContractError("forward_mae: sample tubes do not match the model configuration");
        }
        auto vis = tubes::apply_mask(*batch[b], masks[b]);
        positions.insert(positions.end(), vis.positions.begin(), vis.positions.end());
        visible.push_back(std::move(vis.tubes));
    }
    std::vector<const tubes::TubeSet*> vis_ptrs;
    for (const auto& v : visible) vis_ptrs.push_back(&v);
    auto tokens = model.tube_embed(stack_tubes<T>(vis_ptrs), positions);
    auto latent = model.encode(tokens, batch.size());
    MaeOutput<T> out;
    out.predictions = model.decode(latent, masks);
    out.targets = stack_tubes<T>(batch);
    out.masks = std::move(masks);
    return out;
}

/// Unmasked encoder pass, mean-pooled over tokens: [batch, D_e].
template <typename T>
num::Var<T> pooled_representation(const MaeModel<T>& model, std::span<const tubes::TubeSet* const> batch) {
    const auto& cfg = model.config();
    std::vector<std::uint32_t> positions;
    for (const auto* s : batch) {
        if (s->count != cfg.tokens || s->tube_size != cfg.tube_size()) {
            throw ContractError("pooled_representation: sample tubes do not match the model configuration");
        }
        for (std::uint32_t i = 0; i < s->count; ++i) positions.push_back(i);
    }
    auto z = model.encode(model.tube_embed(stack_tubes<T>(batch), positions), batch.size());
    return MaeModel<T>::pool_tokens(z, batch.size());
}

}  // namespace dasmae::model
