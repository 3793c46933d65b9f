#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dasmae/dasgen.hpp"
#include "dasmae/model.hpp"
#include "dasmae/numerics/optim.hpp"
#include "dasmae/stft.hpp"
#include "dasmae/tubes.hpp"

namespace dasmae::pipeline {

using Model = model::MaeModel<float>;

/// How reconstruction targets are scaled before the squared error.
enum class TargetNorm {
    none,
    per_tube,   // each tube standardized by its own mean and variance
    global,     // each sample standardized over all of its tubes
};

enum class Stage { scratch, stage1_video, stage2_waterfall };

std::string to_string(TargetNorm n);
TargetNorm parse_target_norm(const std::string& s);
std::string to_string(Stage s);
Stage parse_stage(const std::string& s);

struct TrainConfig {
    std::uint32_t batch = 64;
    std::uint32_t epochs = 500;
    num::LrSchedule schedule{1e-3, 0.0, 40, 500};
    num::AdamWConfig optimizer{1e-3, 0.9, 0.95, 1e-8, 0.05};
    double mask_ratio = 0.9;
    tubes::MaskStrategy strategy = tubes::MaskStrategy::random;
    std::uint64_t seed = 0;
    TargetNorm target_norm = TargetNorm::per_tube;
    Stage stage = Stage::scratch;
    tubes::TubeGrid grid;  // layout of every training sample
};

void validate(const TrainConfig& cfg);

/// Targets after the configured normalization; `tokens` rows form one sample.
template <typename T>
num::NdArray<T> normalize_targets(const num::NdArray<T>& targets, std::size_t tokens, TargetNorm mode);

/// Mean over masked tubes of the mean squared elementwise error. Predictions
/// at visible tubes never enter the graph, so their gradient is exactly zero.
template <typename T>
num::Var<T> reconstruction_loss(const num::Var<T>& predictions, const num::NdArray<T>& targets,
                                std::span<const tubes::MaskSpec> masks, TargetNorm mode);

struct EpochRecord {
    std::uint32_t epoch = 0;  // 1-based
    double loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> curve;
    std::uint64_t steps = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Masked-reconstruction training. Epoch e (1-based) uses cosine_lr(e) for
/// every step; sample i draws its mask from derive_seed(seed, {e, i}).
TrainResult pretrain(std::span<const tubes::TubeSet> data, Model& model, const TrainConfig& cfg,
                     const EpochCallback& on_epoch = {});

void write_loss_curve(const std::vector<EpochRecord>& curve, const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Checkpoints

struct NamedArray {
    std::string name;
    num::Shape shape;
    std::vector<float> values;
};

struct CheckpointMeta {
    model::ModelConfig model;
    Stage stage = Stage::scratch;
    std::uint32_t epoch = 0;
    std::uint64_t seed = 0;
    std::string rng_state;    // seed-stream position for resuming
    std::string config_echo;  // resolved run configuration (key=value text)
};

struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;
    std::vector<NamedArray> arrays;
    CheckpointMeta meta;
};

Checkpoint make_checkpoint(const Model& model, const CheckpointMeta& meta);

/// DMCK container: magic, u32 version, u32 array count, then per array a u16
/// name length, UTF-8 name, u8 rank, u32 dims and little-endian f32 values;
/// then a u32-length-prefixed JSON metadata block.
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file);
Checkpoint read_checkpoint(const std::filesystem::path& file);

void save_checkpoint(const Model& model, const CheckpointMeta& meta, const std::filesystem::path& file);

enum class Strictness { strict, permissive };

struct LoadReport {
    std::vector<std::string> loaded;         // copied from the checkpoint
    std::vector<std::string> skipped;        // checkpoint arrays left unused
    std::vector<std::string> reinitialized;  // model parameters redrawn from the init seed
};

/// Copies name-and-shape matching arrays into `model`. Permissive mode redraws
/// every other model parameter from `reinit_seed`; strict mode throws
/// TransferError at the first missing, extra or mis-shaped array.
LoadReport apply_checkpoint(const Checkpoint& ckpt, Model& model, Strictness strictness, std::uint64_t reinit_seed);
LoadReport load_checkpoint(const std::filesystem::path& file, Model& model, Strictness strictness,
                           std::uint64_t reinit_seed);

/// Builds a model from the checkpoint's configuration and loads it strictly.
Model model_from_checkpoint(const Checkpoint& ckpt);

std::string model_config_json(const model::ModelConfig& cfg);
model::ModelConfig model_config_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Data preparation

/// STFT + partition of the selected samples.
std::vector<tubes::TubeSet> prepare_tubes(const gen::Dataset& ds, std::span<const std::size_t> indices,
                                          const stft::StftConfig& stft_cfg, std::uint32_t cp, std::uint32_t tp,
                                          std::uint32_t fp, tubes::TubeGrid* grid_out = nullptr);

/// Video-like stand-ins for stage-1 pre-training: Gaussian blobs drifting over
/// the channel/frequency plane through time, standardized per sample.
std::vector<stft::SpectroTensor> synth_video_tensors(std::size_t count, std::uint32_t channels, std::uint32_t frames,
                                                     std::uint32_t bins, std::uint32_t depth, std::uint64_t seed);

}  // namespace dasmae::pipeline
