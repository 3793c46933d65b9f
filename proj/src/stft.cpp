#include "dasmae/stft.hpp"

#include <cmath>
#include <numbers>

#include "dasmae/errors.hpp"

namespace dasmae::stft {

std::string to_string(OutputFormat f) {
    switch (f) {
        case OutputFormat::magnitude: return "magnitude";
        case OutputFormat::magnitude_phase: return "magnitude_phase";
        case OutputFormat::real_imag: return "real_imag";
    }
    return "?";
}

OutputFormat parse_format(const std::string& s) {
    if (s == "magnitude") return OutputFormat::magnitude;
    if (s == "magnitude_phase") return OutputFormat::magnitude_phase;
    if (s == "real_imag") return OutputFormat::real_imag;
    throw ContractError("unknown STFT format '" + s + "' (magnitude | magnitude_phase | real_imag)");
}

std::string to_string(Normalization n) { return n == Normalization::none ? "none" : "log_zscore"; }

Normalization parse_normalization(const std::string& s) {
    if (s == "none") return Normalization::none;
    if (s == "log_zscore") return Normalization::log_zscore;
    throw ContractError("unknown STFT normalization '" + s + "' (none | log_zscore)");
}

void validate(const StftConfig& cfg) {
    if (cfg.window == 0 || cfg.window > cfg.nfft) throw ContractError("StftConfig: need 0 < window <= nfft");
    if (cfg.hop != cfg.window) throw ContractError("StftConfig: hop must equal the window length");
    if (cfg.nfft % 2 != 0) throw ContractError("StftConfig: nfft must be even");
}

ComplexFrames stft_complex(const gen::WaterfallPlot& x, const StftConfig& cfg) {
    validate(cfg);
    if (x.samples < cfg.window) {
        throw DataError("stft: record of " + std::to_string(x.samples) + " samples is shorter than the window (" +
                        std::to_string(cfg.window) + ")");
    }
    ComplexFrames out;
    out.channels = x.channels;
    out.frames = cfg.frames(x.samples);
    out.bins = cfg.bins();
    out.values.resize(std::size_t{out.channels} * out.frames * out.bins);

    // Twiddle table: e^{-2 pi i m / nfft}; zero padding contributes nothing.
    const std::uint32_t n = cfg.nfft;
    std::vector<double> cos_t(n), sin_t(n);
    for (std::uint32_t m = 0; m < n; ++m) {
        const double a = 2.0 * std::numbers::pi * m / n;
        cos_t[m] = std::cos(a);
        sin_t[m] = -std::sin(a);
    }
    for (std::uint32_t c = 0; c < out.channels; ++c) {
        const auto ch = x.channel(c);
        for (std::uint32_t t = 0; t < out.frames; ++t) {
            const float* frame = ch.data() + std::size_t{t} * cfg.hop;
            auto* dst = out.values.data() + (std::size_t{c} * out.frames + t) * out.bins;
            for (std::uint32_t k = 0; k < out.bins; ++k) {
                double re = 0.0, im = 0.0;
                std::uint32_t m = 0;
                for (std::uint32_t s = 0; s < cfg.window; ++s) {
                    re += frame[s] * cos_t[m];
                    im += frame[s] * sin_t[m];
                    m += k;
                    if (m >= n) m -= n;
                }
                dst[k] = {re, im};
            }
        }
    }
    return out;
}

SpectroTensor to_real_format(const ComplexFrames& frames, OutputFormat format) {
    SpectroTensor t;
    t.channels = frames.channels;
    t.frames = frames.frames;
    t.bins = frames.bins;
    t.depth = plane_count(format);
    t.format = format;
    t.values.resize(frames.values.size() * t.depth);
    for (std::size_t i = 0; i < frames.values.size(); ++i) {
        const auto z = frames.values[i];
        switch (format) {
            case OutputFormat::magnitude:
                t.values[i] = static_cast<float>(std::abs(z));
                break;
            case OutputFormat::magnitude_phase: {
                double phase = std::arg(z);
                if (phase <= -std::numbers::pi) phase = std::numbers::pi;
                t.values[2 * i] = static_cast<float>(std::abs(z));
                t.values[2 * i + 1] = static_cast<float>(phase);
                break;
            }
            case OutputFormat::real_imag:
                t.values[2 * i] = static_cast<float>(z.real());
                t.values[2 * i + 1] = static_cast<float>(z.imag());
                break;
        }
    }
    return t;
}

SpectroTensor normalize_spectro(SpectroTensor t) {
    const std::uint32_t planes = t.depth;
    // Which planes get standardized, and which of those get log1p first.
    std::vector<bool> standardize(planes, true), take_log(planes, false);
    if (t.format == OutputFormat::magnitude || t.format == OutputFormat::magnitude_phase) {
        take_log[0] = !t.normalized;
        if (t.format == OutputFormat::magnitude_phase) standardize[1] = false;
    }
    const std::size_t cells = t.values.size() / planes;
    double total = 0.0, count = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        for (std::uint32_t d = 0; d < planes; ++d) {
            if (!standardize[d]) continue;
            float& v = t.values[i * planes + d];
            if (take_log[d]) v = static_cast<float>(std::log1p(static_cast<double>(v)));
            total += v;
            count += 1.0;
        }
    }
    const double mean = total / count;
    double sq = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        for (std::uint32_t d = 0; d < planes; ++d) {
            if (standardize[d]) sq += (t.values[i * planes + d] - mean) * (t.values[i * planes + d] - mean);
        }
    }
    const double inv_std = 1.0 / std::sqrt(sq / count + 1e-12);
    for (std::size_t i = 0; i < cells; ++i) {
        for (std::uint32_t d = 0; d < planes; ++d) {
            if (standardize[d]) {
                float& v = t.values[i * planes + d];
                v = static_cast<float>((v - mean) * inv_std);
            }
        }
    }
    t.normalized = true;
    return t;
}

SpectroTensor transform(const gen::WaterfallPlot& x, const StftConfig& cfg) {
    SpectroTensor t = to_real_format(stft_complex(x, cfg), cfg.format);
    if (cfg.normalization == Normalization::log_zscore) t = normalize_spectro(std::move(t));
    return t;
}

}  // namespace dasmae::stft
