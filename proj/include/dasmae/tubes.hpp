#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dasmae/stft.hpp"

namespace dasmae::tubes {

/// Non-overlapping C_p x T_p x F_p partition of a spectro tensor.
struct TubeGrid {
    std::uint32_t cp = 2, tp = 16, fp = 16;  // tube extents
    std::uint32_t nc = 0, nt = 0, nf = 0;    // tubes per axis

    std::uint32_t count() const { return nc * nt * nf; }
    std::uint32_t tube_cells() const { return cp * tp * fp; }
    std::uint32_t index(std::uint32_t ic, std::uint32_t it, std::uint32_t jf) const { return (ic * nt + it) * nf + jf; }
};

/// Grid for a C x T x F tensor; trailing remainders are truncated.
TubeGrid make_grid(std::uint32_t channels, std::uint32_t frames, std::uint32_t bins, std::uint32_t cp,
                   std::uint32_t tp, std::uint32_t fp);

/// N tubes, each C_p x T_p x F_p x D_i values in row-major order.
struct TubeSet {
    std::uint32_t count = 0;
    std::uint32_t tube_size = 0;  // C_p * T_p * F_p * D_i
    std::vector<float> values;

    const float* tube(std::size_t i) const { return values.data() + i * tube_size; }
};

/// Tubes ordered row-major over (channel block, time block, frequency block).
TubeSet partition_tubes(const stft::SpectroTensor& t, const TubeGrid& grid);

/// Inverse of partition_tubes onto the truncated (nc*cp, nt*tp, nf*fp) extent.
/// `positions[i]` is the grid index of tubes.tube(i); empty means identity order.
stft::SpectroTensor reassemble_tubes(const TubeSet& tubes, const TubeGrid& grid, std::uint32_t depth,
                                     const std::vector<std::uint32_t>& positions = {});

enum class MaskStrategy { random, spatial, temporal, frequency };

std::string to_string(MaskStrategy s);
MaskStrategy parse_strategy(const std::string& s);

struct MaskSpec {
    double ratio = 0.0;
    MaskStrategy strategy = MaskStrategy::random;
    std::uint64_t seed = 0;
    std::uint32_t total = 0;              // N
    std::vector<std::uint32_t> masked;    // sorted
    std::vector<std::uint32_t> visible;   // sorted complement
};

/// ceil(ratio * n), guarded against representation error in ratio * n.
std::uint32_t masked_count(std::uint32_t n, double ratio);

/// Random: ceil(ratio*N) distinct tubes, uniformly. Axis strategies mask whole
/// slices along the channel / time / frequency axis; the slice count is the
/// smallest reaching ceil(ratio*N), capped so one slice stays visible.
MaskSpec sample_mask(const TubeGrid& grid, double ratio, MaskStrategy strategy, std::uint64_t seed);

struct VisibleTubes {
    TubeSet tubes;
    std::vector<std::uint32_t> positions;  // grid index of each visible tube
};

VisibleTubes apply_mask(const TubeSet& tubes, const MaskSpec& mask);

}  // namespace dasmae::tubes
