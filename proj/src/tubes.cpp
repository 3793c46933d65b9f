#include "dasmae/tubes.hpp"

#include <algorithm>
#include <cmath>

#include "dasmae/errors.hpp"
#include "dasmae/random.hpp"

namespace dasmae::tubes {

TubeGrid make_grid(std::uint32_t channels, std::uint32_t frames, std::uint32_t bins, std::uint32_t cp,
                   std::uint32_t tp, std::uint32_t fp) {
    if (cp == 0 || tp == 0 || fp == 0) throw ContractError("TubeGrid: tube extents must be positive");
    if (channels < cp || frames < tp || bins < fp) {
        throw DataError("TubeGrid: tensor " + std::to_string(channels) + "x" + std::to_string(frames) + "x" +
                        std::to_string(bins) + " is smaller than one " + std::to_string(cp) + "x" +
                        std::to_string(tp) + "x" + std::to_string(fp) + " tube");
    }
    return TubeGrid{cp, tp, fp, channels / cp, frames / tp, bins / fp};
}

TubeSet partition_tubes(const stft::SpectroTensor& t, const TubeGrid& grid) {
    if (t.channels < grid.cp || t.frames < grid.tp || t.bins < grid.fp) {
        throw DataError("partition_tubes: tensor smaller than one tube");
    }
    if (t.channels / grid.cp != grid.nc || t.frames / grid.tp != grid.nt || t.bins / grid.fp != grid.nf) {
        throw ContractError("partition_tubes: grid was built for a different tensor extent");
    }
    const std::uint32_t d = t.depth;
    TubeSet out;
    out.count = grid.count();
    out.tube_size = grid.tube_cells() * d;
    out.values.resize(std::size_t{out.count} * out.tube_size);
    const std::size_t run = std::size_t{grid.fp} * d;  // contiguous bins x planes
    float* dst = out.values.data();
    for (std::uint32_t ic = 0; ic < grid.nc; ++ic) {
        for (std::uint32_t it = 0; it < grid.nt; ++it) {
            for (std::uint32_t jf = 0; jf < grid.nf; ++jf) {
                for (std::uint32_t c = 0; c < grid.cp; ++c) {
                    for (std::uint32_t s = 0; s < grid.tp; ++s) {
                        const float* src = t.values.data() + t.index(ic * grid.cp + c, it * grid.tp + s, jf * grid.fp);
                        std::copy(src, src + run, dst);
                        dst += run;
                    }
                }
            }
        }
    }
    return out;
}

stft::SpectroTensor reassemble_tubes(const TubeSet& tubes, const TubeGrid& grid, std::uint32_t depth,
                                     const std::vector<std::uint32_t>& positions) {
    if (tubes.count != grid.count()) {
        throw ContractError("reassemble_tubes: " + std::to_string(tubes.count) + " tubes for a grid of " +
                            std::to_string(grid.count()));
    }
    if (tubes.tube_size != grid.tube_cells() * depth) throw ContractError("reassemble_tubes: tube size mismatch");
    if (!positions.empty()) {
        std::vector<std::uint32_t> sorted = positions;
        std::sort(sorted.begin(), sorted.end());
        if (sorted.size() != tubes.count || std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() ||
            sorted.back() >= grid.count()) {
            throw ContractError("reassemble_tubes: positions must be a permutation of the grid indices");
        }
    }
    stft::SpectroTensor t;
    t.channels = grid.nc * grid.cp;
    t.frames = grid.nt * grid.tp;
    t.bins = grid.nf * grid.fp;
    t.depth = depth;
    t.values.resize(std::size_t{t.channels} * t.frames * t.bins * depth);
    const std::size_t run = std::size_t{grid.fp} * depth;
    for (std::uint32_t i = 0; i < tubes.count; ++i) {
        const std::uint32_t pos = positions.empty() ? i : positions[i];
        const std::uint32_t jf = pos % grid.nf;
        const std::uint32_t it = (pos / grid.nf) % grid.nt;
        const std::uint32_t ic = pos / (grid.nf * grid.nt);
        const float* src = tubes.tube(i);
        for (std::uint32_t c = 0; c < grid.cp; ++c) {
            for (std::uint32_t s = 0; s < grid.tp; ++s) {
                std::copy(src, src + run, t.values.data() + t.index(ic * grid.cp + c, it * grid.tp + s, jf * grid.fp));
                src += run;
            }
        }
    }
    return t;
}

std::string to_string(MaskStrategy s) {
    switch (s) {
        case MaskStrategy::random: return "random";
        case MaskStrategy::spatial: return "spatial";
        case MaskStrategy::temporal: return "temporal";
        case MaskStrategy::frequency: return "frequency";
    }
    return "?";
}

MaskStrategy parse_strategy(const std::string& s) {
    if (s == "random") return MaskStrategy::random;
    if (s == "spatial") return MaskStrategy::spatial;
    if (s == "temporal") return MaskStrategy::temporal;
    if (s == "frequency") return MaskStrategy::frequency;
    throw ContractError("unknown mask strategy '" + s + "' (random | spatial | temporal | frequency)");
}

std::uint32_t masked_count(std::uint32_t n, double ratio) {
    return static_cast<std::uint32_t>(std::ceil(ratio * n - 1e-9));
}

MaskSpec sample_mask(const TubeGrid& grid, double ratio, MaskStrategy strategy, std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio < 1.0)) throw ContractError("sample_mask: ratio must lie in [0, 1)");
    const std::uint32_t n = grid.count();
    if (n == 0) throw ContractError("sample_mask: empty grid");
    MaskSpec mask;
    mask.ratio = ratio;
    mask.strategy = strategy;
    mask.seed = seed;
    mask.total = n;
    const std::uint32_t target = masked_count(n, ratio);
    Rng rng(seed);
    std::vector<bool> is_masked(n, false);

    if (strategy == MaskStrategy::random) {
        std::vector<std::uint32_t> order(n);
        for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
        // Partial Fisher-Yates: the first `target` entries are a uniform subset.
        for (std::uint32_t i = 0; i < target; ++i) {
            const std::size_t j = i + uniform_index(rng, n - i);
            std::swap(order[i], order[j]);
            is_masked[order[i]] = true;
        }
    } else if (target > 0) {
        const std::uint32_t slices = strategy == MaskStrategy::spatial    ? grid.nc
                                     : strategy == MaskStrategy::temporal ? grid.nt
                                                                          : grid.nf;
        if (slices < 2) {
            throw ContractError("sample_mask: " + to_string(strategy) +
                                " masking needs at least two slices along its axis");
        }
        const std::uint32_t per_slice = n / slices;
        const std::uint32_t wanted = std::min((target + per_slice - 1) / per_slice, slices - 1);
        std::vector<std::uint32_t> order(slices);
        for (std::uint32_t i = 0; i < slices; ++i) order[i] = i;
        std::vector<bool> slice_masked(slices, false);
        for (std::uint32_t i = 0; i < wanted; ++i) {
            const std::size_t j = i + uniform_index(rng, slices - i);
            std::swap(order[i], order[j]);
            slice_masked[order[i]] = true;
        }
        for (std::uint32_t ic = 0; ic < grid.nc; ++ic) {
            for (std::uint32_t it = 0; it < grid.nt; ++it) {
                for (std::uint32_t jf = 0; jf < grid.nf; ++jf) {
                    const std::uint32_t s = strategy == MaskStrategy::spatial    ? ic
                                            : strategy == MaskStrategy::temporal ? it
                                                                                 : jf;
                    is_masked[grid.index(ic, it, jf)] = slice_masked[s];
                }
            }
        }
    }
    for (std::uint32_t i = 0; i < n; ++i) (is_masked[i] ? mask.masked : mask.visible).push_back(i);
    return mask;
}

VisibleTubes apply_mask(const TubeSet& tubes, const MaskSpec& mask) {
    if (mask.total != tubes.count) {
        throw ContractError("apply_mask: mask covers " + std::to_string(mask.total) + " tubes, set has " +
                            std::to_string(tubes.count));
    }
    VisibleTubes out;
    out.tubes.count = static_cast<std::uint32_t>(mask.visible.size());
    out.tubes.tube_size = tubes.tube_size;
    out.tubes.values.reserve(mask.visible.size() * tubes.tube_size);
    for (std::uint32_t idx : mask.visible) {
        if (idx >= tubes.count) {
            throw ContractError("apply_mask: index " + std::to_string(idx) + " out of range");
        }
        const float* src = tubes.tube(idx);
        out.tubes.values.insert(out.tubes.values.end(), src, src + tubes.tube_size);
        out.positions.push_back(idx);
    }
    for (std::uint32_t idx : mask.masked) {
        if (idx >= tubes.count) throw ContractError("apply_mask: index " + std::to_string(idx) + " out of range");
    }
    return out;
}

}  // namespace dasmae::tubes
