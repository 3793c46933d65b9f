#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dasmae/random.hpp"

namespace dasmae::gen {

/// Sensitivity coefficient for a 1550 nm laser and core index 1.46, in nε·m/rad.
inline constexpr double kPhaseSensitivity = 110.37;

/// Channel-by-time matrix of DAS phase samples, stored channel-major.
struct WaterfallPlot {
    std::uint32_t channels = 0;
    std::uint32_t samples = 0;
    float sample_rate = 0.0f;
    std::int32_t label = -1;  // -1 = unlabeled
    std::vector<float> values;

    float at(std::uint32_t c, std::uint32_t s) const { return values[std::size_t{c} * samples + s]; }
    std::span<const float> channel(std::uint32_t c) const {
        return {values.data() + std::size_t{c} * samples, samples};
    }
};

/// Phase difference accumulated over `gauge_length_m` of fiber under `strain_ne` nano-strain.
double phase_from_strain(double strain_ne, double gauge_length_m, double k_phi = kPhaseSensitivity);

enum class Modulation { stationary, impulsive, moving_source };

struct SpectralLine {
    double center_hz = 0.0;
    double bandwidth_hz = 0.0;  // full width of the band around center
    double power = 1.0;         // relative; the waveform is rescaled to unit RMS
};

struct EventSpec {
    int class_id = 0;
    std::vector<SpectralLine> lines;
    double onset_s = 0.0;
    double duration_s = 1.0;
    std::uint32_t first_channel = 0;
    std::uint32_t last_channel = 0;  // inclusive
    double amplitude_ne = kPhaseSensitivity;  // RMS strain of the event waveform
    Modulation modulation = Modulation::stationary;
    double impulse_rate_hz = 0.0;   // impulsive / moving-source pulse train; 0 = continuous
    double impulse_decay_s = 0.06;
};

/// Multiplicative fiber-ground coupling gain per channel, each in (0, 1].
struct CouplingProfile {
    std::vector<double> gains;

    static CouplingProfile uniform(std::uint32_t channels);
    /// Smooth random walk clamped to [0.3, 1.0].
    static CouplingProfile random_walk(std::uint32_t channels, Rng& rng);
};

struct SynthOptions {
    double noise_sigma = 0.1;  // radians
    double gauge_length_m = 1.0;
    double k_phi = kPhaseSensitivity;
};

/// Gaussian background everywhere plus each event's band-limited waveform,
/// converted from strain to phase, copied coherently over the event's channels
/// and scaled by the coupling gains. Deterministic for a given seed.
WaterfallPlot synth_waterfall(std::span<const EventSpec> events, const CouplingProfile& coupling,
                              const SynthOptions& options, std::uint32_t channels, std::uint32_t samples,
                              double sample_rate, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Datasets

struct DatasetConfig {
    std::string preset = "benchmark";  // benchmark | field
    std::vector<std::string> class_names;
    std::vector<std::uint32_t> counts;
    std::uint32_t channels = 12;
    std::uint32_t samples = 2000;
    double sample_rate = 200.0;
    double train_fraction = 0.8;
    std::uint64_t seed = 1;
    double noise_sigma = 0.1;
    double gauge_length_m = 1.0;
};

/// Class names from the six-category benchmark analog.
std::vector<std::string> benchmark_class_names();
/// Class names and counts of the eight-category imbalanced field analog.
std::vector<std::string> field_class_names();
std::vector<std::uint32_t> field_class_counts();

/// Fills class names (and counts when empty) for the named preset.
DatasetConfig resolve_preset(DatasetConfig cfg, std::uint32_t default_count_per_class = 20);

struct DatasetManifest {
    std::vector<std::string> class_names;
    std::vector<std::uint32_t> class_counts;
    std::vector<std::string> train_files;
    std::vector<std::string> test_files;
    std::uint64_t seed = 0;
    DatasetConfig config;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<WaterfallPlot> samples;  // class-major generation order
    std::vector<std::string> files;      // filename of each sample
    std::vector<bool> in_train;          // split membership of each sample

    std::vector<std::size_t> train_indices() const;
    std::vector<std::size_t> test_indices() const;
    std::size_t class_count() const { return manifest.class_names.size(); }
};

/// Event list for one sample of `class_id` under the preset's class templates.
std::vector<EventSpec> sample_class_events(const DatasetConfig& cfg, int class_id, Rng& rng);

/// Generates every sample with seed derive_seed(seed, {index}) and a
/// stratified per-class train/test split.
Dataset synth_dataset(const DatasetConfig& cfg);

/// Per-sample WFP1 files plus manifest.json (written last).
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

void write_waterfall(const WaterfallPlot& plot, const std::filesystem::path& file);
WaterfallPlot read_waterfall(const std::filesystem::path& file);

}  // namespace dasmae::gen
