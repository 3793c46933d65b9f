#include "dasmae/dasgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "json.hpp"

#include "dasmae/binary_io.hpp"
#include "dasmae/errors.hpp"

namespace dasmae::gen {

namespace fs = std::filesystem;
using nlohmann::json;

double phase_from_strain(double strain_ne, double gauge_length_m, double k_phi) {
    if (!(gauge_length_m > 0.0) || !(k_phi > 0.0)) {
        throw ContractError("phase_from_strain: gauge length and k_phi must be positive");
    }
    return strain_ne * gauge_length_m / k_phi;
}

CouplingProfile CouplingProfile::uniform(std::uint32_t channels) {
    return CouplingProfile{std::vector<double>(channels, 1.0)};
}

CouplingProfile CouplingProfile::random_walk(std::uint32_t channels, Rng& rng) {
    CouplingProfile p;
    p.gains.resize(channels);
    double g = dasmae::uniform(rng, 0.3, 1.0);
    for (auto& v : p.gains) {
        v = g;
        g = std::clamp(g + 0.08 * normal(rng), 0.3, 1.0);
    }
    return p;
}

namespace {

void validate_event(const EventSpec& e, std::uint32_t channels, std::uint32_t samples, double sample_rate) {
    const double nyquist = sample_rate / 2.0;
    const double length_s = samples / sample_rate;
    if (e.first_channel > e.last_channel || e.last_channel >= channels) {
        throw ContractError("EventSpec: channel extent [" + std::to_string(e.first_channel) + ", " +
                            std::to_string(e.last_channel) + "] outside [0, " + std::to_string(channels) + ")");
    }
    if (!(e.duration_s > 0.0) || e.onset_s < 0.0 || e.onset_s + e.duration_s > length_s + 1e-9) {
        throw ContractError("EventSpec: event window exceeds the record length");
    }
    if (e.lines.empty()) throw ContractError("EventSpec: empty spectral template");
    for (const auto& line : e.lines) {
        if (!(line.center_hz > 0.0) || line.center_hz >= nyquist || line.bandwidth_hz < 0.0 || !(line.power > 0.0)) {
            throw ContractError("EventSpec: spectral line at " + std::to_string(line.center_hz) +
                                " Hz invalid for Nyquist " + std::to_string(nyquist) + " Hz");
        }
    }
    if (e.amplitude_ne < 0.0 || e.impulse_rate_hz < 0.0 || !(e.impulse_decay_s > 0.0)) {
        throw ContractError("EventSpec: amplitude and pulse parameters must be non-negative");
    }
}

// Filtered-noise waveform: random-phase sinusoids scattered across each band.
std::vector<double> band_waveform(const EventSpec& e, std::size_t n, double sample_rate, Rng& rng) {
    const double nyquist = sample_rate / 2.0;
    std::vector<double> w(n, 0.0);
    for (const auto& line : e.lines) {
        const int components = line.bandwidth_hz > 0.0 ? 16 : 1;
        const double amp = std::sqrt(2.0 * line.power / components);
        for (int k = 0; k < components; ++k) {
            double f = line.center_hz;
            if (components > 1) f += line.bandwidth_hz * (uniform01(rng) - 0.5);
            f = std::clamp(f, 1e-3 * nyquist, 0.999 * nyquist);
            const double phase = 2.0 * std::numbers::pi * uniform01(rng);
            const double step = 2.0 * std::numbers::pi * f / sample_rate;
            for (std::size_t i = 0; i < n; ++i) w[i] += amp * std::cos(step * static_cast<double>(i) + phase);
        }
    }
    return w;
}

std::vector<double> temporal_envelope(const EventSpec& e, std::size_t n, double sample_rate, Rng& rng) {
    std::vector<double> env(n, 0.0);
    const bool pulsed = e.modulation == Modulation::impulsive ||
                        (e.modulation == Modulation::moving_source && e.impulse_rate_hz > 0.0);
    if (pulsed && e.impulse_rate_hz > 0.0) {
        const double period = 1.0 / e.impulse_rate_hz;
        const double duration = static_cast<double>(n) / sample_rate;
        double t = uniform01(rng) * period;
        while (t < duration) {
            const std::size_t start = static_cast<std::size_t>(t * sample_rate);
            for (std::size_t i = start; i < n; ++i) {
                const double dt = static_cast<double>(i - start) / sample_rate;
                if (dt > 8.0 * e.impulse_decay_s) break;
                env[i] += std::exp(-dt / e.impulse_decay_s);
            }
            t += period * (1.0 + 0.3 * (uniform01(rng) - 0.5));
        }
    } else {
        const std::size_t taper = std::max<std::size_t>(1, n / 10);
        for (std::size_t i = 0; i < n; ++i) {
            double v = 1.0;
            if (i < taper) v = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / taper);
            if (n - 1 - i < taper) v = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(n - 1 - i) / taper);
            env[i] = v;
        }
    }
    return env;
}

}  // namespace

WaterfallPlot synth_waterfall(std::span<const EventSpec> events, const CouplingProfile& coupling,
                              const SynthOptions& options, std::uint32_t channels, std::uint32_t samples,
                              double sample_rate, std::uint64_t seed) {
    if (channels == 0 || samples == 0 || !(sample_rate > 0.0)) {
        throw ContractError("synth_waterfall: channels, samples and sample rate must be positive");
    }
    if (coupling.gains.size() != channels) {
        throw ContractError("synth_waterfall: coupling profile has " + std::to_string(coupling.gains.size()) +
                            " gains for " + std::to_string(channels) + " channels");
    }
    for (double g : coupling.gains) {
        if (!(g > 0.0) || g > 1.0) throw ContractError("synth_waterfall: coupling gains must lie in (0, 1]");
    }
    if (options.noise_sigma < 0.0) throw ContractError("synth_waterfall: negative noise sigma");
    for (const auto& e : events) validate_event(e, channels, samples, sample_rate);

    Rng rng(seed);
    WaterfallPlot plot;
    plot.channels = channels;
    plot.samples = samples;
    plot.sample_rate = static_cast<float>(sample_rate);
    std::vector<double> acc(std::size_t{channels} * samples, 0.0);
    for (auto& v : acc) v = options.noise_sigma * normal(rng);

    for (const auto& e : events) {
        const std::size_t onset = static_cast<std::size_t>(std::llround(e.onset_s * sample_rate));
        const std::size_t n = std::min<std::size_t>(
            std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(e.duration_s * sample_rate))),
            samples - std::min<std::size_t>(onset, samples));
        if (n == 0) continue;
        std::vector<double> wave = band_waveform(e, n, sample_rate, rng);
        const std::vector<double> env = temporal_envelope(e, n, sample_rate, rng);
        double energy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            wave[i] *= env[i];
            energy += wave[i] * wave[i];
        }
        const double rms = std::sqrt(energy / static_cast<double>(n));
        const double norm = rms > 0.0 ? 1.0 / rms : 0.0;
        const double phase_scale = phase_from_strain(e.amplitude_ne, options.gauge_length_m, options.k_phi) * norm;

        const double span = static_cast<double>(e.last_channel - e.first_channel);
        const bool moving = e.modulation == Modulation::moving_source;
        const bool forward = !moving || uniform01(rng) < 0.5;
        const double footprint = std::max(1.0, (span + 1.0) / 4.0);
        for (std::uint32_t c = e.first_channel; c <= e.last_channel; ++c) {
            double* row = acc.data() + std::size_t{c} * samples + onset;
            const double gain = coupling.gains[c] * phase_scale;
            for (std::size_t i = 0; i < n; ++i) {
                double spatial = 1.0;
                if (moving) {
                    const double frac = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
                    const double pos = e.first_channel + span * (forward ? frac : 1.0 - frac);
                    const double d = (static_cast<double>(c) - pos) / footprint;
                    spatial = std::exp(-0.5 * d * d);
                }
                row[i] += gain * spatial * wave[i];
            }
        }
    }
    plot.values.resize(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) plot.values[i] = static_cast<float>(acc[i]);
    return plot;
}

// ---------------------------------------------------------------------------

std::vector<std::string> benchmark_class_names() {
    return {"background", "digging", "knocking", "watering", "shaking", "walking"};
}

std::vector<std::string> field_class_names() {
    return {"background",         "roller_motion",   "roller_compaction", "excavator_excavation",
            "excavator_motion",   "electric_drill",  "forklift_loaded",   "forklift_unloaded"};
}

std::vector<std::uint32_t> field_class_counts() { return {42, 100, 300, 332, 334, 38, 54, 186}; }

DatasetConfig resolve_preset(DatasetConfig cfg, std::uint32_t default_count_per_class) {
    if (cfg.preset == "benchmark") {
        if (cfg.class_names.empty()) cfg.class_names = benchmark_class_names();
        if (cfg.counts.empty()) cfg.counts.assign(cfg.class_names.size(), default_count_per_class);
    } else if (cfg.preset == "field") {
        if (cfg.class_names.empty()) cfg.class_names = field_class_names();
        if (cfg.counts.empty()) cfg.counts = field_class_counts();
    } else {
        throw ContractError("unknown dataset preset '" + cfg.preset + "' (expected benchmark or field)");
    }
    if (cfg.counts.size() != cfg.class_names.size()) {
        throw ContractError("dataset config: " + std::to_string(cfg.counts.size()) + " counts for " +
                            std::to_string(cfg.class_names.size()) + " classes");
    }
    return cfg;
}

namespace {

struct ClassTemplate {
    Modulation modulation;
    std::vector<SpectralLine> lines;  // frequencies as fractions of Nyquist
    double jitter;                    // relative center-frequency jitter
    double pulse_rate_lo, pulse_rate_hi;
    double decay_s;
    std::uint32_t extent_lo, extent_hi;  // channel extent, clipped to the array
    double duration_lo, duration_hi;     // fraction of the record
    double snr_lo, snr_hi;               // event RMS over noise sigma
    bool has_event = true;
};

std::vector<ClassTemplate> benchmark_templates() {
    return {
        // background: noise only
        {Modulation::stationary, {}, 0, 0, 0, 0.06, 1, 1, 0, 0, 0, 0, false},
        // digging: slow heavy strikes, low band
        {Modulation::impulsive, {{0.20, 0.10, 1.0}, {0.42, 0.08, 0.3}}, 0.15, 0.5, 1.0, 0.12, 3, 6, 0.5, 0.9, 2.0, 6.0},
        // knocking: fast sharp knocks, high band
        {Modulation::impulsive, {{0.62, 0.16, 1.0}}, 0.12, 1.5, 3.0, 0.03, 2, 4, 0.4, 0.9, 2.0, 6.0},
        // watering: continuous broadband hiss
        {Modulation::stationary, {{0.60, 0.50, 1.0}}, 0.10, 0, 0, 0.06, 4, 8, 0.5, 1.0, 1.5, 4.5},
        // shaking: continuous narrow low tone with harmonic
        {Modulation::stationary, {{0.10, 0.03, 1.0}, {0.20, 0.03, 0.4}}, 0.15, 0, 0, 0.06, 6, 12, 0.5, 1.0, 1.5, 4.5},
        // walking: footsteps travelling along the fiber
        {Modulation::moving_source, {{0.28, 0.12, 1.0}}, 0.15, 1.6, 2.2, 0.05, 6, 12, 0.6, 1.0, 2.0, 6.0},
    };
}

std::vector<ClassTemplate> field_templates() {
    return {
        {Modulation::stationary, {}, 0, 0, 0, 0.06, 1, 1, 0, 0, 0, 0, false},
        {Modulation::moving_source, {{0.10, 0.06, 1.0}}, 0.15, 0, 0, 0.06, 6, 12, 0.6, 1.0, 1.0, 4.0},
        {Modulation::moving_source, {{0.26, 0.06, 1.0}, {0.10, 0.06, 0.5}}, 0.1, 1.0, 2.0, 0.1, 6, 12, 0.6, 1.0, 1.0, 4.0},
        {Modulation::impulsive, {{0.16, 0.10, 1.0}, {0.50, 0.30, 0.4}}, 0.15, 0.3, 0.8, 0.2, 3, 6, 0.5, 1.0, 1.0, 4.0},
        {Modulation::moving_source, {{0.14, 0.10, 1.0}}, 0.15, 0, 0, 0.06, 6, 12, 0.6, 1.0, 1.0, 4.0},
        {Modulation::stationary, {{0.80, 0.10, 1.0}}, 0.05, 0, 0, 0.06, 2, 3, 0.3, 0.7, 1.0, 4.0},
        {Modulation::moving_source, {{0.15, 0.05, 1.0}}, 0.1, 0, 0, 0.06, 6, 12, 0.6, 1.0, 2.0, 5.0},
        {Modulation::moving_source, {{0.19, 0.05, 1.0}}, 0.1, 0, 0, 0.06, 6, 12, 0.6, 1.0, 0.8, 3.0},
    };
}

}  // namespace

std::vector<EventSpec> sample_class_events(const DatasetConfig& cfg, int class_id, Rng& rng) {
    const auto templates = cfg.preset == "field" ? field_templates() : benchmark_templates();
    if (class_id < 0 || static_cast<std::size_t>(class_id) >= templates.size()) {
        throw ContractError("sample_class_events: class " + std::to_string(class_id) + " not in preset '" +
                            cfg.preset + "'");
    }
    const ClassTemplate& tpl = templates[static_cast<std::size_t>(class_id)];
    if (!tpl.has_event) return {};

    const double nyquist = cfg.sample_rate / 2.0;
    const double length_s = cfg.samples / cfg.sample_rate;
    EventSpec e;
    e.class_id = class_id;
    e.modulation = tpl.modulation;
    const double shift = 1.0 + tpl.jitter * (2.0 * uniform01(rng) - 1.0);
    for (const auto& line : tpl.lines) {
        SpectralLine l = line;
        l.center_hz = std::clamp(line.center_hz * shift, 0.02, 0.95) * nyquist;
        l.bandwidth_hz = line.bandwidth_hz * nyquist;
        e.lines.push_back(l);
    }
    const std::uint32_t lo = std::min(tpl.extent_lo, cfg.channels);
    const std::uint32_t hi = std::min(tpl.extent_hi, cfg.channels);
    const std::uint32_t extent = lo + static_cast<std::uint32_t>(uniform_index(rng, hi - lo + 1));
    e.first_channel = static_cast<std::uint32_t>(uniform_index(rng, cfg.channels - extent + 1));
    e.last_channel = e.first_channel + extent - 1;
    e.duration_s = length_s * dasmae::uniform(rng, tpl.duration_lo, tpl.duration_hi);
    e.onset_s = std::max(0.0, (length_s - e.duration_s) * uniform01(rng));
    if (e.onset_s + e.duration_s > length_s) e.duration_s = length_s - e.onset_s;
    e.impulse_rate_hz = tpl.pulse_rate_hi > 0.0 ? dasmae::uniform(rng, tpl.pulse_rate_lo, tpl.pulse_rate_hi) : 0.0;
    e.impulse_decay_s = tpl.decay_s;
    const double snr = dasmae::uniform(rng, tpl.snr_lo, tpl.snr_hi);
    // Strain amplitude whose phase RMS equals snr * noise sigma.
    e.amplitude_ne = snr * cfg.noise_sigma * kPhaseSensitivity / cfg.gauge_length_m;
    return {e};
}

std::vector<std::size_t> Dataset::train_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (in_train[i]) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> Dataset::test_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!in_train[i]) out.push_back(i);
    }
    return out;
}

namespace {

std::string sample_filename(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sample_%06zu.wfp", index);
    return buf;
}

void validate_config(const DatasetConfig& cfg) {
    if (cfg.channels == 0 || cfg.samples == 0 || !(cfg.sample_rate > 0.0)) {
        throw ContractError("dataset config: channels, samples and sample rate must be positive");
    }
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
        throw ContractError("dataset config: split ratio must lie in (0, 1)");
    }
    for (std::uint32_t c : cfg.counts) {
        if (c < 1) throw ContractError("dataset config: every class needs at least one sample");
    }
    // Temporal sampling must be denser than spatial sampling (DAS geometry).
    if (cfg.samples <= cfg.channels) {
        throw ContractError("dataset config: sample count must exceed channel count");
    }
}

}  // namespace

Dataset synth_dataset(const DatasetConfig& input) {
    const DatasetConfig cfg = resolve_preset(input);
    validate_config(cfg);
    Dataset ds;
    ds.manifest.class_names = cfg.class_names;
    ds.manifest.class_counts = cfg.counts;
    ds.manifest.seed = cfg.seed;
    ds.manifest.config = cfg;

    std::size_t index = 0;
    for (std::size_t k = 0; k < cfg.counts.size(); ++k) {
        const std::uint32_t count = cfg.counts[k];
        if (count < 2) {
            throw DataError("class '" + cfg.class_names[k] + "' has " + std::to_string(count) +
                            " sample(s); cannot populate both train and test splits");
        }
        auto n_train = static_cast<std::uint32_t>(std::llround(count * cfg.train_fraction));
        n_train = std::clamp<std::uint32_t>(n_train, 1, count - 1);

        std::vector<std::size_t> order(count);
        for (std::uint32_t i = 0; i < count; ++i) order[i] = i;
        Rng split_rng(derive_seed(cfg.seed, {0x5eedULL, k}));
        shuffle(order, split_rng);
        std::vector<bool> train_flag(count, false);
        for (std::uint32_t i = 0; i < n_train; ++i) train_flag[order[i]] = true;

        for (std::uint32_t i = 0; i < count; ++i, ++index) {
            Rng rng(derive_seed(cfg.seed, {index}));
            const CouplingProfile coupling = CouplingProfile::random_walk(cfg.channels, rng);
            const auto events = sample_class_events(cfg, static_cast<int>(k), rng);
            SynthOptions opts;
            opts.noise_sigma = cfg.noise_sigma;
            opts.gauge_length_m = cfg.gauge_length_m;
            WaterfallPlot plot =
                synth_waterfall(events, coupling, opts, cfg.channels, cfg.samples, cfg.sample_rate, rng());
            plot.label = static_cast<std::int32_t>(k);
            const std::string file = sample_filename(index);
            (train_flag[i] ? ds.manifest.train_files : ds.manifest.test_files).push_back(file);
            ds.samples.push_back(std::move(plot));
            ds.files.push_back(file);
            ds.in_train.push_back(train_flag[i]);
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Persistence

void write_waterfall(const WaterfallPlot& plot, const fs::path& file) {
    if (plot.values.size() != std::size_t{plot.channels} * plot.samples) {
        throw ContractError("write_waterfall: value count does not match C x S");
    }
    std::ofstream os(file, std::ios::binary);
    if (!os) throw DataError(file.string() + ": cannot open for writing");
    os.write("WFP1", 4);
    io::put_le<std::uint32_t>(os, plot.channels);
    io::put_le<std::uint32_t>(os, plot.samples);
    io::put_f32(os, plot.sample_rate);
    io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(plot.label));
    for (float v : plot.values) io::put_f32(os, v);
    if (!os) throw DataError(file.string() + ": write failed");
}

WaterfallPlot read_waterfall(const fs::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw DataError(file.string() + ": missing or unreadable sample file");
    io::Reader rd(is, file.string());
    if (rd.bytes(4) != "WFP1") throw DataError(file.string() + ": bad magic (expected WFP1)");
    WaterfallPlot plot;
    plot.channels = rd.le<std::uint32_t>();
    plot.samples = rd.le<std::uint32_t>();
    plot.sample_rate = rd.f32();
    plot.label = static_cast<std::int32_t>(rd.le<std::uint32_t>());
    if (plot.channels == 0 || plot.samples == 0) throw DataError(file.string() + ": empty waterfall header");
    const std::size_t n = std::size_t{plot.channels} * plot.samples;
    plot.values.resize(n);
    for (auto& v : plot.values) v = rd.f32();
    if (!rd.at_end()) throw DataError(file.string() + ": trailing bytes after payload");
    return plot;
}

namespace {

json config_to_json(const DatasetConfig& c) {
    return json{{"preset", c.preset},           {"class_names", c.class_names}, {"counts", c.counts},
                {"channels", c.channels},       {"samples", c.samples},         {"sample_rate", c.sample_rate},
                {"train_fraction", c.train_fraction}, {"seed", c.seed},         {"noise_sigma", c.noise_sigma},
                {"gauge_length_m", c.gauge_length_m}};
}

DatasetConfig config_from_json(const json& j) {
    DatasetConfig c;
    c.preset = j.at("preset").get<std::string>();
    c.class_names = j.at("class_names").get<std::vector<std::string>>();
    c.counts = j.at("counts").get<std::vector<std::uint32_t>>();
    c.channels = j.at("channels").get<std::uint32_t>();
    c.samples = j.at("samples").get<std::uint32_t>();
    c.sample_rate = j.at("sample_rate").get<double>();
    c.train_fraction = j.at("train_fraction").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.noise_sigma = j.at("noise_sigma").get<double>();
    c.gauge_length_m = j.at("gauge_length_m").get<double>();
    return c;
}

}  // namespace

void write_dataset(const Dataset& ds, const fs::path& dir) {
    if (ds.samples.size() != ds.files.size() || ds.samples.size() != ds.in_train.size()) {
        throw ContractError("write_dataset: inconsistent dataset bookkeeping");
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError(dir.string() + ": cannot create dataset directory (" + ec.message() + ")");
    for (std::size_t i = 0; i < ds.samples.size(); ++i) write_waterfall(ds.samples[i], dir / ds.files[i]);

    json manifest{{"format", "das-dataset/1"},
                  {"class_names", ds.manifest.class_names},
                  {"class_counts", ds.manifest.class_counts},
                  {"seed", ds.manifest.seed},
                  {"files", ds.files},
                  {"train", ds.manifest.train_files},
                  {"test", ds.manifest.test_files},
                  {"generator", config_to_json(ds.manifest.config)}};
    std::ofstream os(dir / "manifest.json");
    if (!os) throw DataError((dir / "manifest.json").string() + ": cannot open for writing");
    os << manifest.dump(2) << "\n";
}

Dataset read_dataset(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    std::ifstream is(manifest_path);
    if (!is) throw DataError(manifest_path.string() + ": missing manifest");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw DataError(manifest_path.string() + ": malformed manifest (" + e.what() + ")");
    }
    Dataset ds;
    try {
        ds.manifest.class_names = j.at("class_names").get<std::vector<std::string>>();
        ds.manifest.class_counts = j.at("class_counts").get<std::vector<std::uint32_t>>();
        ds.manifest.seed = j.at("seed").get<std::uint64_t>();
        ds.manifest.train_files = j.at("train").get<std::vector<std::string>>();
        ds.manifest.test_files = j.at("test").get<std::vector<std::string>>();
        ds.manifest.config = config_from_json(j.at("generator"));
        ds.files = j.at("files").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw DataError(manifest_path.string() + ": incomplete manifest (" + e.what() + ")");
    }
    std::size_t declared = 0;
    for (auto c : ds.manifest.class_counts) declared += c;
    if (declared != ds.files.size() ||
        ds.manifest.train_files.size() + ds.manifest.test_files.size() != ds.files.size()) {
        throw DataError(manifest_path.string() + ": class counts (" + std::to_string(declared) +
                        ") disagree with listed files (" + std::to_string(ds.files.size()) + ")");
    }
    std::vector<std::string> sorted_train = ds.manifest.train_files;
    std::sort(sorted_train.begin(), sorted_train.end());
    std::size_t on_disk = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".wfp") ++on_disk;
    }
    if (on_disk != ds.files.size()) {
        throw DataError(dir.string() + ": manifest lists " + std::to_string(ds.files.size()) + " samples but " +
                        std::to_string(on_disk) + " .wfp files are present");
    }
    std::vector<std::size_t> per_class(ds.manifest.class_names.size(), 0);
    for (const auto& f : ds.files) {
        WaterfallPlot plot = read_waterfall(dir / f);
        if (plot.label >= static_cast<std::int32_t>(ds.manifest.class_names.size())) {
            throw DataError((dir / f).string() + ": label " + std::to_string(plot.label) + " outside class list");
        }
        if (plot.label >= 0) ++per_class[static_cast<std::size_t>(plot.label)];
        ds.in_train.push_back(std::binary_search(sorted_train.begin(), sorted_train.end(), f));
        ds.samples.push_back(std::move(plot));
    }
    for (std::size_t k = 0; k < per_class.size(); ++k) {
        if (per_class[k] != ds.manifest.class_counts[k]) {
            throw DataError(manifest_path.string() + ": class '" + ds.manifest.class_names[k] + "' declares " +
                            std::to_string(ds.manifest.class_counts[k]) + " samples, files hold " +
                            std::to_string(per_class[k]));
        }
    }
    return ds;
}

}  // namespace dasmae::gen
