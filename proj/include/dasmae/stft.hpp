#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "dasmae/dasgen.hpp"

namespace dasmae::stft {

enum class OutputFormat { magnitude, magnitude_phase, real_imag };
enum class Normalization { none, log_zscore };

std::string to_string(OutputFormat f);
OutputFormat parse_format(const std::string& s);
std::string to_string(Normalization n);
Normalization parse_normalization(const std::string& s);

/// Rectangular-window STFT with hop equal to the window and zero padding to `nfft`.
struct StftConfig {
    std::uint32_t window = 104;
    std::uint32_t hop = 104;
    std::uint32_t nfft = 192;
    OutputFormat format = OutputFormat::magnitude;
    Normalization normalization = Normalization::log_zscore;

    std::uint32_t padding() const { return nfft - window; }
    std::uint32_t bins() const { return nfft / 2; }
    std::uint32_t frames(std::uint32_t samples) const { return samples / hop; }
};

void validate(const StftConfig& cfg);

/// Channel x frame x bin complex spectra, bins 0 .. nfft/2 - 1.
struct ComplexFrames {
    std::uint32_t channels = 0;
    std::uint32_t frames = 0;
    std::uint32_t bins = 0;
    std::vector<std::complex<double>> values;

    const std::complex<double>& at(std::uint32_t c, std::uint32_t t, std::uint32_t f) const {
        return values[(std::size_t{c} * frames + t) * bins + f];
    }
};

/// Channel x frame x bin x plane real tensor; `depth` planes per bin
/// (1 for magnitude, 2 for the concatenated formats).
struct SpectroTensor {
    std::uint32_t channels = 0;
    std::uint32_t frames = 0;
    std::uint32_t bins = 0;
    std::uint32_t depth = 1;
    OutputFormat format = OutputFormat::magnitude;
    bool normalized = false;
    std::vector<float> values;

    std::size_t index(std::uint32_t c, std::uint32_t t, std::uint32_t f, std::uint32_t d = 0) const {
        return ((std::size_t{c} * frames + t) * bins + f) * depth + d;
    }
    float at(std::uint32_t c, std::uint32_t t, std::uint32_t f, std::uint32_t d = 0) const {
        return values[index(c, t, f, d)];
    }
};

inline std::uint32_t plane_count(OutputFormat f) { return f == OutputFormat::magnitude ? 1u : 2u; }

ComplexFrames stft_complex(const gen::WaterfallPlot& x, const StftConfig& cfg);

SpectroTensor to_real_format(const ComplexFrames& frames, OutputFormat format);

/// log(1 + v) on magnitude planes, then per-sample standardization of the
/// magnitude planes. Phase planes pass through. Real/imaginary planes are
/// standardized without the log. A tensor that is already normalized is only
/// re-standardized.
SpectroTensor normalize_spectro(SpectroTensor t);

/// stft_complex, to_real_format, then normalization per `cfg`.
SpectroTensor transform(const gen::WaterfallPlot& x, const StftConfig& cfg);

}  // namespace dasmae::stft
