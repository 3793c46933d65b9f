#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dasmae/dasgen.hpp"
#include "dasmae/pipeline.hpp"

namespace dasmae::eval {

using Model = pipeline::Model;

/// Single linear map from D_e features to M logits.
struct ClassifierHead {
    num::Var<float> weight;  // [D_e, M]
    num::Var<float> bias;    // [M]

    static ClassifierHead zeros(std::size_t width, std::size_t classes);
    std::size_t classes() const { return bias.shape()[0]; }
    std::size_t width() const { return weight.shape()[0]; }
    std::vector<num::Var<float>> parameters() const { return {weight, bias}; }
    num::Var<float> operator()(const num::Var<float>& features) const { return num::linear(features, weight, bias); }
};

struct LabeledSet {
    std::vector<tubes::TubeSet> tubes;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

/// Tubes and labels of the chosen dataset samples.
LabeledSet make_labeled_set(const gen::Dataset& ds, std::span<const std::size_t> indices, const stft::StftConfig& stft_cfg,
                            const tubes::TubeGrid& grid);

/// Unmasked pooled encoder output for each tube set, [n, D_e]. No graph is recorded.
num::NdArray<float> encode_pooled(const Model& model, std::span<const tubes::TubeSet> sets, std::size_t batch = 64);

/// STFT, partition, embed, encode and token-mean of one waterfall plot.
std::vector<float> pool_representation(const gen::WaterfallPlot& x, const Model& model,
                                       const stft::StftConfig& stft_cfg, const tubes::TubeGrid& grid);

/// Argmax of each logit row; ties go to the lowest index.
std::vector<int> argmax_rows(const num::NdArray<float>& logits);

std::vector<int> predict(const Model& model, const ClassifierHead& head, std::span<const tubes::TubeSet> sets);
int predict(const gen::WaterfallPlot& x, const Model& model, const ClassifierHead& head,
            const stft::StftConfig& stft_cfg, const tubes::TubeGrid& grid);

double error_rate(std::span<const int> predictions, std::span<const int> labels);

/// (er_a - er_b) / er_a * 100.
double relative_improvement(double er_a, double er_b);

using ConfusionMatrix = std::vector<std::vector<std::uint32_t>>;  // [true][predicted]

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels, std::size_t classes);
double error_rate(const ConfusionMatrix& cm);

struct ProbeConfig {
    std::uint32_t epochs = 100;
    std::uint32_t batch = 64;
    num::LrSchedule schedule{1e-2, 0.0, 5, 100};
    num::AdamWConfig optimizer{1e-2, 0.9, 0.999, 1e-8, 1e-4};
    std::uint64_t seed = 0;
};

struct ProbeResult {
    ClassifierHead head;  // acts on raw pooled features
    double train_er = 0.0;
    double test_er = 0.0;
    std::vector<int> test_predictions;
};

/// Fits a head on features standardized with train-set statistics; the
/// standardization is folded back into the returned head.
ProbeResult fit_probe(const num::NdArray<float>& train_x, std::span<const int> train_y,
                      const num::NdArray<float>& test_x, std::span<const int> test_y, std::size_t classes,
                      const ProbeConfig& cfg);

/// Linear probe on the frozen encoder.
ProbeResult train_linear_probe(const Model& model, const LabeledSet& train, const LabeledSet& test,
                               std::size_t classes, const ProbeConfig& cfg);

struct FineTuneConfig {
    std::uint32_t epochs = 50;
    std::uint32_t batch = 32;
    num::LrSchedule schedule{1e-5, 0.0, 4, 50};
    num::AdamWConfig optimizer{1e-5, 0.9, 0.999, 1e-8, 0.05};
    std::uint64_t seed = 0;
};

struct FineTuneResult {
    double test_er = 0.0;
    std::vector<int> test_predictions;
    std::vector<pipeline::EpochRecord> curve;
};

/// Joint cross-entropy training of the encoder and `head`, both updated in place.
FineTuneResult fine_tune(Model& model, ClassifierHead& head, const LabeledSet& train, const LabeledSet& test,
                         const FineTuneConfig& cfg);

/// k training-split indices per class, drawn without replacement.
std::vector<std::size_t> few_shot_subset(const gen::Dataset& ds, std::uint32_t k, std::uint64_t seed);

struct PcaResult {
    num::NdArray<double> coords;      // [n, out_dims]
    std::vector<double> eigenvalues;  // non-increasing
    num::NdArray<double> components;  // [width, out_dims]
    std::vector<double> mean;
};

PcaResult pca_embed(const num::NdArray<double>& x, std::size_t out_dims);

struct TsneConfig {
    double perplexity = 40.0;
    double learning_rate = 2000.0;
    std::uint32_t iterations = 500;
    std::uint64_t seed = 0;
    double exaggeration = 4.0;
    std::uint32_t exaggeration_iters = 100;
    std::uint32_t momentum_switch = 250;
    std::uint32_t record_every = 10;
};

struct TsneResult {
    num::NdArray<double> coords;                            // [n, 2]
    std::vector<std::pair<std::uint32_t, double>> kl;       // (iteration, KL(P||Q))
    std::vector<double> entropies;                          // bits, per point
};

/// Exact O(n^2) t-SNE.
TsneResult tsne_embed(const num::NdArray<double>& x, const TsneConfig& cfg);

// ---------------------------------------------------------------------------
// Experiments and ablations

struct ExperimentConfig {
    stft::StftConfig stft{40, 40, 64};
    std::uint32_t cp = 2, tp = 16, fp = 16;
    model::ModelConfig model{2, 16, 16, 1, 64, 4, 4, 32, 2, 2, 4, 36};
    pipeline::TrainConfig train;
    ProbeConfig probe;
    FineTuneConfig finetune;
    bool run_finetune = true;
    bool stage1 = false;
    std::uint32_t stage1_epochs = 100;
    std::uint32_t stage1_samples = 0;  // 0: as many as training samples
};

struct ExperimentResult {
    std::uint64_t seed = 0;
    double probe_er = 0.0;
    double finetune_er = 0.0;
    std::vector<pipeline::EpochRecord> curve;
};

/// Completes derived fields (tokens, D_i, grid, schedule lengths) from the
/// dataset geometry.
ExperimentConfig resolve_experiment(ExperimentConfig cfg, const gen::Dataset& ds, tubes::TubeGrid* grid = nullptr);

/// Optional stage-1 pre-training, pre-training on the training split, linear
/// probe, then fine-tuning from the probe head. Every seed is derived from `seed`.
ExperimentResult run_experiment(const gen::Dataset& ds, const ExperimentConfig& cfg, std::uint64_t seed);

enum class AblationAxis { mask_ratio, mask_strategy, stft_format, stage1 };

std::string to_string(AblationAxis a);
AblationAxis parse_axis(const std::string& s);
std::vector<std::string> default_values(AblationAxis a);

/// Copy of `base` with one axis set to `value`.
ExperimentConfig apply_axis(ExperimentConfig base, AblationAxis axis, const std::string& value);

struct SweepRow {
    std::string value;
    std::uint64_t seed = 0;
    double probe_er = 0.0;
    double finetune_er = 0.0;
};

struct SweepTable {
    AblationAxis axis = AblationAxis::mask_ratio;
    std::vector<SweepRow> rows;

    double median_probe(const std::string& value) const;
    double median_finetune(const std::string& value) const;
};

SweepTable ablation_sweep(const gen::Dataset& ds, AblationAxis axis, const std::vector<std::string>& values,
                          const ExperimentConfig& base, std::span<const std::uint64_t> seeds);

double median(std::vector<double> v);

void write_confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& class_names,
                         const std::filesystem::path& file);
void write_coordinates(const num::NdArray<double>& coords, std::span<const int> labels,
                       const std::filesystem::path& file);
void write_sweep_csv(const SweepTable& table, const std::filesystem::path& file);

}  // namespace dasmae::eval
