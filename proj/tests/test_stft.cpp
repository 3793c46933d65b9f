#include <cmath>
#include <numbers>

#include "doctest.h"
#include "dasmae/stft.hpp"
#include "support.hpp"

using namespace dasmae;
using namespace dasmae::stft;

namespace {

gen::WaterfallPlot random_plot(std::uint32_t channels, std::uint32_t samples, std::uint64_t seed) {
    gen::WaterfallPlot p;
    p.channels = channels;
    p.samples = samples;
    p.sample_rate = 200.0f;
    Rng rng(seed);
    p.values.resize(std::size_t{channels} * samples);
    for (auto& v : p.values) v = static_cast<float>(normal(rng));
    return p;
}

ComplexFrames single(std::complex<double> z) {
    ComplexFrames f;
    f.channels = f.frames = f.bins = 1;
    f.values = {z};
    return f;
}

SpectroTensor magnitude_tensor(std::vector<float> values) {
    SpectroTensor t;
    t.channels = 1;
    t.frames = 1;
    t.bins = static_cast<std::uint32_t>(values.size());
    t.values = std::move(values);
    return t;
}

double rms_diff(const std::vector<float>& a, const std::vector<float>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * static_cast<double>(a[i] - b[i]);
    return std::sqrt(acc / a.size());
}

}  // namespace

TEST_SUITE("stft") {

TEST_CASE("config contract") {
    CHECK_THROWS_AS(validate(StftConfig{70, 70, 64}), ContractError);
    CHECK_THROWS_AS(validate(StftConfig{40, 20, 64}), ContractError);
    CHECK_THROWS_AS(validate(StftConfig{40, 40, 63}), ContractError);
    CHECK_THROWS_AS(validate(StftConfig{0, 0, 64}), ContractError);
    CHECK_NOTHROW(validate(StftConfig{64, 64, 64}));
    CHECK_THROWS_AS(stft_complex(random_plot(2, 30, 1), StftConfig{40, 40, 64}), DataError);
    CHECK(parse_format("real_imag") == OutputFormat::real_imag);
    CHECK_THROWS_AS(parse_format("polar"), ContractError);
}

TEST_CASE("all-zero signal gives all-zero frames") {
    gen::WaterfallPlot p;
    p.channels = 3;
    p.samples = 500;
    p.values.assign(1500, 0.0f);
    auto f = stft_complex(p, StftConfig{40, 40, 64});
    for (const auto& z : f.values) CHECK(z == std::complex<double>(0.0, 0.0));
}

TEST_CASE("sine at bin 5 with window equal to nfft") {
    gen::WaterfallPlot p;
    p.channels = 1;
    p.samples = 64 * 4;
    for (std::uint32_t n = 0; n < p.samples; ++n) {
        p.values.push_back(static_cast<float>(std::cos(2.0 * std::numbers::pi * 5.0 * n / 64.0)));
    }
    auto f = stft_complex(p, StftConfig{64, 64, 64});
    CHECK(f.frames == 4);
    CHECK(f.bins == 32);
    for (std::uint32_t t = 0; t < f.frames; ++t) {
        CHECK(std::abs(f.at(0, t, 5)) == doctest::Approx(32.0).epsilon(1e-6));
        for (std::uint32_t k = 0; k < f.bins; ++k) {
            if (k != 5) CHECK(std::abs(f.at(0, t, k)) <= 1e-6);
        }
    }
}

TEST_CASE("shape law") {
    StftConfig desk;
    auto t = transform(random_plot(12, 10000, 2), desk);
    CHECK(t.frames == 96);
    CHECK(t.bins == 96);
    CHECK(t.channels == 12);
    for (std::uint32_t w : {8u, 17u, 40u, 64u, 104u}) {
        for (std::uint32_t pad : {0u, 2u, 24u, 88u}) {
            const std::uint32_t nfft = (w + pad + 1) / 2 * 2;
            for (std::uint32_t s : {w, w + 1, 3 * w - 1, 1000u}) {
                if (s < w) continue;
                StftConfig cfg{w, w, nfft, OutputFormat::magnitude, Normalization::none};
                auto f = stft_complex(random_plot(2, s, s + w), cfg);
                CHECK(f.frames == s / w);
                CHECK(f.bins == nfft / 2);
                CHECK(f.values.size() == 2u * (s / w) * (nfft / 2));
            }
        }
    }
}

TEST_CASE("naive DFT oracle on 100 random signals") {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const std::uint32_t w = 16 + static_cast<std::uint32_t>(seed % 5) * 12;
        const std::uint32_t nfft = w + static_cast<std::uint32_t>(seed % 3) * 8 + (w % 2);
        const StftConfig cfg{w, w, nfft, OutputFormat::magnitude, Normalization::none};
        auto x = random_plot(2, 5 * w + 3, 1000 + seed);
        auto f = stft_complex(x, cfg);
        for (std::uint32_t c = 0; c < 2; ++c) {
            for (std::uint32_t t = 0; t < f.frames; ++t) {
                auto ref = testing::naive_dft(x.channel(c), std::size_t{t} * w, w, nfft);
                double diff = 0.0, norm = 0.0;
                for (std::uint32_t k = 0; k < f.bins; ++k) {
                    diff += std::norm(f.at(c, t, k) - ref[k]);
                    norm += std::norm(ref[k]);
                }
                worst = std::max(worst, std::sqrt(diff / norm));
            }
        }
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("Parseval with window equal to nfft") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto x = random_plot(1, 128, seed);
        for (std::size_t start : {0, 64}) {
            auto full = testing::naive_dft(x.channel(0), start, 64, 64);
            double freq = 0.0, time = 0.0;
            for (const auto& z : full) freq += std::norm(z) / 64.0;
            for (std::size_t n = 0; n < 64; ++n) time += static_cast<double>(x.values[start + n]) * x.values[start + n];
            CHECK(freq == doctest::Approx(time).epsilon(1e-5));
            auto f = stft_complex(x, StftConfig{64, 64, 64});
            for (std::uint32_t k = 0; k < 32; ++k) {
                CHECK(std::abs(f.at(0, static_cast<std::uint32_t>(start / 64), k) - full[k]) <=
                      1e-9 * std::sqrt(time * 64.0));
            }
        }
    }
}

TEST_CASE("real formats") {
    CHECK(to_real_format(single({3, 4}), OutputFormat::magnitude).values[0] == 5.0f);
    auto mp = to_real_format(single({0, 2.5}), OutputFormat::magnitude_phase);
    CHECK(mp.depth == 2);
    CHECK(mp.at(0, 0, 0, 0) == 2.5f);
    CHECK(mp.at(0, 0, 0, 1) == doctest::Approx(std::numbers::pi / 2));
    auto ri = to_real_format(single({-1.5, 0.0}), OutputFormat::real_imag);
    CHECK(ri.at(0, 0, 0, 0) == -1.5f);
    CHECK(ri.at(0, 0, 0, 1) == 0.0f);
    CHECK(plane_count(OutputFormat::magnitude) == 1);
    CHECK(plane_count(OutputFormat::real_imag) == 2);
}

TEST_CASE("normalization") {
    SUBCASE("constant magnitude gives zeros") {
        auto t = normalize_spectro(magnitude_tensor(std::vector<float>(50, 3.25f)));
        for (float v : t.values) CHECK(v == 0.0f);
    }
    SUBCASE("zero mean, unit variance on random input") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng(seed);
            std::vector<float> v(2000);
            for (auto& x : v) x = static_cast<float>(std::abs(normal(rng)) * 7.0);
            auto t = normalize_spectro(magnitude_tensor(v));
            double m = 0.0, s = 0.0;
            for (float x : t.values) m += x;
            m /= t.values.size();
            for (float x : t.values) s += (x - m) * (x - m);
            CHECK(std::abs(m) <= 1e-5);
            CHECK(std::abs(s / t.values.size() - 1.0) <= 1e-3);
        }
    }
    SUBCASE("applying twice changes values by at most 1e-4 RMS") {
        auto once = transform(random_plot(4, 800, 5), StftConfig{40, 40, 64});
        auto twice = normalize_spectro(once);
        CHECK(rms_diff(once.values, twice.values) <= 1e-4);
        auto ri = transform(random_plot(4, 800, 6), StftConfig{40, 40, 64, OutputFormat::real_imag});
        CHECK(rms_diff(ri.values, normalize_spectro(ri).values) <= 1e-4);
    }
    SUBCASE("phase plane passes through") {
        StftConfig cfg{40, 40, 64, OutputFormat::magnitude_phase, Normalization::none};
        auto raw = transform(random_plot(2, 400, 7), cfg);
        auto norm = normalize_spectro(raw);
        for (std::size_t i = 1; i < raw.values.size(); i += 2) CHECK(norm.values[i] == raw.values[i]);
    }
}

}  // TEST_SUITE
