#include "dasmae/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dasmae/binary_io.hpp"
#include "dasmae/errors.hpp"
#include "dasmae/random.hpp"
#include "json.hpp"

namespace dasmae::pipeline {

using nlohmann::json;

std::string to_string(TargetNorm n) {
    switch (n) {
        case TargetNorm::none: return "none";
        case TargetNorm::per_tube: return "per_tube";
        case TargetNorm::global: return "global";
    }
    return "?";
}

TargetNorm parse_target_norm(const std::string& s) {
    if (s == "none") return TargetNorm::none;
    if (s == "per_tube") return TargetNorm::per_tube;
    if (s == "global") return TargetNorm::global;
    throw ContractError("unknown target normalization '" + s + "' (none | per_tube | global)");
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::scratch: return "scratch";
        case Stage::stage1_video: return "stage1_video";
        case Stage::stage2_waterfall: return "stage2_waterfall";
    }
    return "?";
}

Stage parse_stage(const std::string& s) {
    if (s == "scratch") return Stage::scratch;
    if (s == "stage1_video") return Stage::stage1_video;
    if (s == "stage2_waterfall") return Stage::stage2_waterfall;
    throw ContractError("unknown stage '" + s + "' (scratch | stage1_video | stage2_waterfall)");
}

void validate(const TrainConfig& cfg) {
    if (cfg.batch == 0) throw ContractError("TrainConfig: batch must be positive");
    if (cfg.epochs == 0) throw ContractError("TrainConfig: epochs must be positive");
    if (!(cfg.mask_ratio > 0.0 && cfg.mask_ratio < 1.0)) throw ContractError("TrainConfig: mask ratio must lie in (0, 1)");
    num::validate(cfg.schedule);
    if (static_cast<std::uint32_t>(cfg.schedule.total_epochs) < cfg.epochs) {
        throw ContractError("TrainConfig: schedule covers " + std::to_string(cfg.schedule.total_epochs) +
                            " epochs, training runs " + std::to_string(cfg.epochs));
    }
    const std::uint32_t n = cfg.grid.count();
    if (n > 0 && tubes::masked_count(n, cfg.mask_ratio) >= n) {
        throw ContractError("TrainConfig: mask ratio " + std::to_string(cfg.mask_ratio) + " leaves no visible tube of " +
                            std::to_string(n));
    }
}

template <typename T>
num::NdArray<T> normalize_targets(const num::NdArray<T>& targets, std::size_t tokens, TargetNorm mode) {
    if (mode == TargetNorm::none) return targets;
    if (targets.rank() != 2) throw DimensionError("normalize_targets: expected [rows, P] targets");
    const std::size_t rows = targets.shape()[0], width = targets.shape()[1];
    const std::size_t group = mode == TargetNorm::per_tube ? 1 : tokens;
    if (group == 0 || rows % group != 0) throw ContractError("normalize_targets: rows not a multiple of the token count");
    num::NdArray<T> out = targets;
    const std::size_t span = group * width;
    for (std::size_t start = 0; start < rows * width; start += span) {
        double mean = 0.0;
        for (std::size_t i = 0; i < span; ++i) mean += targets[start + i];
        mean /= static_cast<double>(span);
        double var = 0.0;
        for (std::size_t i = 0; i < span; ++i) {
            const double d = targets[start + i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(span);
        const double inv = 1.0 / std::sqrt(var + 1e-6);
        for (std::size_t i = 0; i < span; ++i) out[start + i] = static_cast<T>((targets[start + i] - mean) * inv);
    }
    return out;
}

template <typename T>
num::Var<T> reconstruction_loss(const num::Var<T>& predictions, const num::NdArray<T>& targets,
                                std::span<const tubes::MaskSpec> masks, TargetNorm mode) {
    if (masks.empty()) throw ContractError("reconstruction_loss: no masks");
    if (predictions.shape() != targets.shape() || targets.rank() != 2) {
        throw DimensionError("reconstruction_loss: predictions " + num::shape_string(predictions.shape()) +
                             " vs targets " + num::shape_string(targets.shape()));
    }
    const std::size_t n = masks.front().total;
    if (n * masks.size() != targets.shape()[0]) {
        throw ContractError("reconstruction_loss: " + std::to_string(masks.size()) + " masks of " + std::to_string(n) +
                            " tubes do not cover " + std::to_string(targets.shape()[0]) + " rows");
    }
    std::vector<std::size_t> rows;
    for (std::size_t b = 0; b < masks.size(); ++b) {
        if (masks[b].total != n) throw ContractError("reconstruction_loss: masks disagree on the tube count");
        for (std::uint32_t i : masks[b].masked) rows.push_back(b * n + i);
    }
    if (rows.empty()) throw ContractError("reconstruction_loss: no masked tubes");
    const auto norm = normalize_targets(targets, n, mode);
    const std::size_t width = targets.shape()[1];
    num::NdArray<T> picked(num::Shape{rows.size(), width});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy(norm.data() + rows[r] * width, norm.data() + (rows[r] + 1) * width, picked.data() + r * width);
    }
    auto pred = num::gather_rows(predictions, std::span<const std::size_t>(rows));
    return num::mse(pred, num::constant(std::move(picked)));
}

template num::NdArray<float> normalize_targets(const num::NdArray<float>&, std::size_t, TargetNorm);
template num::NdArray<double> normalize_targets(const num::NdArray<double>&, std::size_t, TargetNorm);
template num::Var<float> reconstruction_loss(const num::Var<float>&, const num::NdArray<float>&,
                                             std::span<const tubes::MaskSpec>, TargetNorm);
template num::Var<double> reconstruction_loss(const num::Var<double>&, const num::NdArray<double>&,
                                              std::span<const tubes::MaskSpec>, TargetNorm);

TrainResult pretrain(std::span<const tubes::TubeSet> data, Model& model, const TrainConfig& cfg,
                     const EpochCallback& on_epoch) {
    validate(cfg);
    if (data.empty()) throw DataError("pretrain: no training samples");
    const auto& mc = model.config();
    if (cfg.grid.count() != mc.tokens) {
        throw ContractError("pretrain: grid has " + std::to_string(cfg.grid.count()) + " tubes, model expects " +
                            std::to_string(mc.tokens));
    }
    for (const auto& s : data) {
        if (s.count != mc.tokens || s.tube_size != mc.tube_size()) {
            throw ContractError("pretrain: sample has " + std::to_string(s.count) + " tubes of " +
                                std::to_string(s.tube_size) + ", model expects " + std::to_string(mc.tokens) +
                                " of " + std::to_string(mc.tube_size()));
        }
    }
    auto& params = model.parameters();
    auto state = num::make_optimizer_state(params, cfg.optimizer);
    TrainResult result;
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = num::cosine_lr(static_cast<int>(epoch), cfg.schedule);
        Rng order_rng(derive_seed(cfg.seed, {epoch, 0x0dde5ULL}));
        shuffle(order, order_rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch);
            std::vector<const tubes::TubeSet*> batch;
            std::vector<tubes::MaskSpec> masks;
            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t idx = order[k];
                batch.push_back(&data[idx]);
                masks.push_back(tubes::sample_mask(cfg.grid, cfg.mask_ratio, cfg.strategy,
                                                   derive_seed(cfg.seed, {epoch, idx})));
            }
            auto out = model::forward_mae(model, std::span<const tubes::TubeSet* const>(batch), std::move(masks));
            auto loss = reconstruction_loss(out.predictions, out.targets, out.masks, cfg.target_norm);
            const double value = loss.value().item();
            if (!std::isfinite(value)) {
                throw NumericError("pretrain: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(result.steps + 1));
            }
            num::zero_grad(params);
            num::backward(loss);
            num::adamw_step(params, state, lr);
            result.steps += 1;
            loss_sum += value * static_cast<double>(stop - start);
        }
        EpochRecord rec{epoch, loss_sum / static_cast<double>(data.size()), lr};
        result.curve.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    return result;
}

void write_loss_curve(const std::vector<EpochRecord>& curve, const std::filesystem::path& file) {
    std::ofstream os(file);
    if (!os) throw DataError(file.string() + ": cannot open for writing");
    os << "epoch,loss,lr\n";
    os.precision(9);
    for (const auto& r : curve) os << r.epoch << ',' << r.loss << ',' << r.lr << '\n';
}

// ---------------------------------------------------------------------------

std::string model_config_json(const model::ModelConfig& c) {
    return json{{"cp", c.cp}, {"tp", c.tp}, {"fp", c.fp}, {"di", c.di}, {"de", c.de}, {"le", c.le},
                {"he", c.he}, {"dd", c.dd}, {"ld", c.ld}, {"hd", c.hd}, {"mlp_ratio", c.mlp_ratio},
                {"tokens", c.tokens}}
        .dump();
}

model::ModelConfig model_config_from_json(const std::string& text) {
    model::ModelConfig c;
    try {
        const json j = json::parse(text);
        c.cp = j.at("cp");
        c.tp = j.at("tp");
        c.fp = j.at("fp");
        c.di = j.at("di");
        c.de = j.at("de");
        c.le = j.at("le");
        c.he = j.at("he");
        c.dd = j.at("dd");
        c.ld = j.at("ld");
        c.hd = j.at("hd");
        c.mlp_ratio = j.at("mlp_ratio");
        c.tokens = j.at("tokens");
    } catch (const json::exception& e) {
        throw DataError(std::string("model configuration: ") + e.what());
    }
    return c;
}

Checkpoint make_checkpoint(const Model& model, const CheckpointMeta& meta) {
    Checkpoint ckpt;
    ckpt.meta = meta;
    ckpt.meta.model = model.config();
    for (const auto& p : model.parameters()) {
        const auto& v = p.value();
        ckpt.arrays.push_back(NamedArray{p.name(), v.shape(), std::vector<float>(v.data(), v.data() + v.size())});
    }
    return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw DataError(file.string() + ": cannot open for writing");
    os.write("DMCK", 4);
    io::put_le<std::uint32_t>(os, Checkpoint::kVersion);
    io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.arrays.size()));
    for (const auto& a : ckpt.arrays) {
        if (a.name.size() > 0xFFFF) throw ContractError("write_checkpoint: array name too long");
        if (a.shape.size() > 0xFF) throw ContractError("write_checkpoint: rank too large");
        if (num::shape_size(a.shape) != a.values.size()) {
            throw ContractError("write_checkpoint: '" + a.name + "' shape does not match its value count");
        }
        io::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(a.name.size()));
        os.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
        io::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(a.shape.size()));
        for (std::size_t d : a.shape) io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
        for (float v : a.values) io::put_f32(os, v);
    }
    const std::string meta = json{{"model", json::parse(model_config_json(ckpt.meta.model))},
                                  {"stage", to_string(ckpt.meta.stage)},
                                  {"epoch", ckpt.meta.epoch},
                                  {"seed", ckpt.meta.seed},
                                  {"rng_state", ckpt.meta.rng_state},
                                  {"config", ckpt.meta.config_echo}}
                                 .dump();
    io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(meta.size()));
    os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    if (!os) throw DataError(file.string() + ": write failed");
}

Checkpoint read_checkpoint(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw DataError(file.string() + ": cannot open");
    io::Reader rd(is, file.string());
    if (rd.bytes(4) != "DMCK") throw DataError(file.string() + ": bad magic (expected DMCK)");
    const auto version = rd.le<std::uint32_t>();
    if (version != Checkpoint::kVersion) {
        throw DataError(file.string() + ": unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    const auto count = rd.le<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedArray a;
        a.name = rd.bytes(rd.le<std::uint16_t>());
        const auto rank = rd.le<std::uint8_t>();
        std::size_t total = 1;
        for (std::uint8_t d = 0; d < rank; ++d) {
            a.shape.push_back(rd.le<std::uint32_t>());
            total *= a.shape.back();
        }
        if (total == 0) throw DataError(file.string() + ": array '" + a.name + "' has a zero extent");
        a.values.resize(total);
        for (auto& v : a.values) v = rd.f32();
        ckpt.arrays.push_back(std::move(a));
    }
    const std::string meta = rd.bytes(rd.le<std::uint32_t>());
    if (!rd.at_end()) throw DataError(file.string() + ": trailing bytes after metadata");
    try {
        const json j = json::parse(meta);
        ckpt.meta.model = model_config_from_json(j.at("model").dump());
        ckpt.meta.stage = parse_stage(j.at("stage"));
        ckpt.meta.epoch = j.at("epoch");
        ckpt.meta.seed = j.at("seed");
        ckpt.meta.rng_state = j.value("rng_state", "");
        ckpt.meta.config_echo = j.value("config", "");
    } catch (const json::exception& e) {
        throw DataError(file.string() + ": bad metadata: " + e.what());
    } catch (const ContractError& e) {
        throw DataError(file.string() + ": bad metadata: " + e.what());
    }
    return ckpt;
}

void save_checkpoint(const Model& model, const CheckpointMeta& meta, const std::filesystem::path& file) {
    write_checkpoint(make_checkpoint(model, meta), file);
}

LoadReport apply_checkpoint(const Checkpoint& ckpt, Model& model, Strictness strictness, std::uint64_t reinit_seed) {
    LoadReport report;
    std::unordered_map<std::string, const NamedArray*> by_name;
    for (const auto& a : ckpt.arrays) {
        if (!by_name.emplace(a.name, &a).second) throw TransferError("checkpoint repeats array '" + a.name + "'");
    }
    // Validate before touching the model so a strict failure leaves it intact.
    std::vector<std::pair<num::Var<float>, const NamedArray*>> copies;
    std::vector<std::string> redraw;
    for (const auto& p : model.parameters()) {
        auto it = by_name.find(p.name());
        if (it == by_name.end()) {
            if (strictness == Strictness::strict) throw TransferError("checkpoint lacks parameter '" + p.name() + "'");
            redraw.push_back(p.name());
            continue;
        }
        if (it->second->shape != p.shape()) {
            if (strictness == Strictness::strict) {
                throw TransferError("parameter '" + p.name() + "' has shape " + num::shape_string(p.shape()) +
                                    ", checkpoint has " + num::shape_string(it->second->shape));
            }
            redraw.push_back(p.name());
            report.skipped.push_back(p.name());
            by_name.erase(it);
            continue;
        }
        copies.emplace_back(p, it->second);
        by_name.erase(it);
    }
    for (const auto& a : ckpt.arrays) {
        if (!by_name.count(a.name)) continue;
        if (strictness == Strictness::strict) throw TransferError("checkpoint array '" + a.name + "' has no parameter");
        report.skipped.push_back(a.name);
    }
    for (auto& [p, a] : copies) {
        auto& v = p.value();
        std::copy(a->values.begin(), a->values.end(), v.data());
        p.zero_grad();
        report.loaded.push_back(p.name());
    }
    for (const auto& name : redraw) {
        model.reinitialize(name, reinit_seed);
        report.reinitialized.push_back(name);
    }
    return report;
}

LoadReport load_checkpoint(const std::filesystem::path& file, Model& model, Strictness strictness,
                           std::uint64_t reinit_seed) {
    return apply_checkpoint(read_checkpoint(file), model, strictness, reinit_seed);
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
    Model m(ckpt.meta.model, ckpt.meta.seed);
    apply_checkpoint(ckpt, m, Strictness::strict, ckpt.meta.seed);
    return m;
}

// ---------------------------------------------------------------------------

std::vector<tubes::TubeSet> prepare_tubes(const gen::Dataset& ds, std::span<const std::size_t> indices,
                                          const stft::StftConfig& stft_cfg, std::uint32_t cp, std::uint32_t tp,
                                          std::uint32_t fp, tubes::TubeGrid* grid_out) {
    std::vector<tubes::TubeSet> out;
    out.reserve(indices.size());
    tubes::TubeGrid grid;
    bool have_grid = false;
    for (std::size_t idx : indices) {
        if (idx >= ds.samples.size()) throw IndexError("prepare_tubes: sample " + std::to_string(idx) + " out of range");
        const auto spec = stft::transform(ds.samples[idx], stft_cfg);
        if (!have_grid) {
            grid = tubes::make_grid(spec.channels, spec.frames, spec.bins, cp, tp, fp);
            have_grid = true;
        }
        out.push_back(tubes::partition_tubes(spec, grid));
    }
    if (grid_out && have_grid) *grid_out = grid;
    return out;
}

std::vector<stft::SpectroTensor> synth_video_tensors(std::size_t count, std::uint32_t channels, std::uint32_t frames,
                                                     std::uint32_t bins, std::uint32_t depth, std::uint64_t seed) {
    if (channels == 0 || frames == 0 || bins == 0 || depth == 0) {
        throw ContractError("synth_video_tensors: extents must be positive");
    }
    std::vector<stft::SpectroTensor> out;
    out.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        Rng rng(derive_seed(seed, {0x51de0ULL, n}));
        stft::SpectroTensor t;
        t.channels = channels;
        t.frames = frames;
        t.bins = bins;
        t.depth = depth;
        t.normalized = true;
        t.values.assign(std::size_t{channels} * frames * bins * depth, 0.0f);
        const int blobs = 1 + static_cast<int>(uniform_index(rng, 3));
        for (int b = 0; b < blobs; ++b) {
            const double c0 = uniform(rng, 0.0, channels), f0 = uniform(rng, 0.0, bins);
            const double vc = uniform(rng, -1.0, 1.0) * channels / frames;
            const double vf = uniform(rng, -1.0, 1.0) * bins / frames;
            const double sc = uniform(rng, 0.08, 0.25) * channels + 0.5;
            const double sf = uniform(rng, 0.08, 0.25) * bins + 0.5;
            const double amp = uniform(rng, 0.5, 2.0);
            for (std::uint32_t tt = 0; tt < frames; ++tt) {
                const double cc = c0 + vc * tt, ff = f0 + vf * tt;
                for (std::uint32_t c = 0; c < channels; ++c) {
                    const double dc = (c - cc) / sc;
                    for (std::uint32_t f = 0; f < bins; ++f) {
                        const double df = (f - ff) / sf;
                        const float v = static_cast<float>(amp * std::exp(-0.5 * (dc * dc + df * df)));
                        for (std::uint32_t d = 0; d < depth; ++d) t.values[t.index(c, tt, f, d)] += v;
                    }
                }
            }
        }
        for (auto& v : t.values) v += static_cast<float>(0.05 * normal(rng));
        double mean = 0.0;
        for (float v : t.values) mean += v;
        mean /= static_cast<double>(t.values.size());
        double var = 0.0;
        for (float v : t.values) var += (v - mean) * (v - mean);
        const double inv = 1.0 / std::sqrt(var / static_cast<double>(t.values.size()) + 1e-12);
        for (auto& v : t.values) v = static_cast<float>((v - mean) * inv);
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace dasmae::pipeline
