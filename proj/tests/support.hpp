#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dasmae/numerics/autograd.hpp"
#include "dasmae/numerics/ops.hpp"
#include "dasmae/random.hpp"

namespace testing {

using dasmae::num::NdArray;
using dasmae::num::Shape;
using dasmae::num::Var;

inline NdArray<double> random_array(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    dasmae::Rng rng(seed);
    NdArray<double> a(shape);
    for (auto& v : a.storage()) v = dasmae::uniform(rng, lo, hi);
    return a;
}

inline Var<double> random_param(const std::string& name, const Shape& shape, std::uint64_t seed) {
    return dasmae::num::make_parameter<double>(name, random_array(shape, seed));
}

/// Largest per-tensor relative error ||analytic - numeric|| / max(||analytic||, ||numeric||)
/// between backprop gradients and central differences of `loss`.
inline double gradcheck(std::vector<Var<double>> params, const std::function<Var<double>()>& loss, double h = 1e-6) {
    for (auto& p : params) p.zero_grad();
    dasmae::num::backward(loss());
    double worst = 0.0;
    for (auto& p : params) {
        const NdArray<double> analytic = p.grad();
        double diff = 0.0, na = 0.0, nn = 0.0;
        dasmae::num::NoGradGuard guard;
        for (std::size_t i = 0; i < p.value().size(); ++i) {
            const double keep = p.value()[i];
            p.value()[i] = keep + h;
            const double up = loss().value().item();
            p.value()[i] = keep - h;
            const double down = loss().value().item();
            p.value()[i] = keep;
            const double numeric = (up - down) / (2.0 * h);
            diff += (analytic[i] - numeric) * (analytic[i] - numeric);
            na += analytic[i] * analytic[i];
            nn += numeric * numeric;
        }
        const double scale = std::sqrt(std::max(na, nn));
        if (scale > 1e-12) worst = std::max(worst, std::sqrt(diff) / scale);
    }
    return worst;
}

/// Naive DFT of one frame of `x` starting at `start`, zero padded to `nfft`,
/// all nfft bins.
inline std::vector<std::complex<double>> naive_dft(std::span<const float> x, std::size_t start, std::size_t window,
                                                   std::size_t nfft) {
    std::vector<std::complex<double>> out(nfft);
    for (std::size_t k = 0; k < nfft; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t n = 0; n < window; ++n) {
            const double ang = -2.0 * M_PI * static_cast<double>(k * n) / static_cast<double>(nfft);
            acc += static_cast<double>(x[start + n]) * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix (row-major n x n).
/// Returns eigenvalues; columns of `vectors` are the eigenvectors.
inline std::vector<double> jacobi_eigen(std::vector<double> a, std::size_t n, std::vector<double>& vectors) {
    vectors.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) vectors[i * n + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p * n + q]) < 1e-300) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * a[p * n + q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = vectors[k * n + p], vkq = vectors[k * n + q];
                    vectors[k * n + p] = c * vkp - s * vkq;
                    vectors[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a[i * n + i];
    return eig;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("dasmae_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
