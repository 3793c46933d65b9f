#include "dasmae/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>

#include "dasmae/errors.hpp"
#include "dasmae/random.hpp"

namespace dasmae::eval {

namespace {

std::vector<const tubes::TubeSet*> pointers(std::span<const tubes::TubeSet> sets, std::size_t begin, std::size_t end) {
    std::vector<const tubes::TubeSet*> out;
    for (std::size_t i = begin; i < end; ++i) out.push_back(&sets[i]);
    return out;
}

void check_labels(std::span<const int> labels, std::size_t classes, const char* who) {
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw DataError(std::string(who) + ": label " + std::to_string(y) + " outside [0, " +
                            std::to_string(classes) + ")");
        }
    }
}

void require_all_classes(std::span<const int> labels, std::size_t classes, const char* who) {
    std::vector<bool> seen(classes, false);
    for (int y : labels) seen[static_cast<std::size_t>(y)] = true;
    for (std::size_t c = 0; c < classes; ++c) {
        if (!seen[c]) throw DataError(std::string(who) + ": class " + std::to_string(c) + " absent from the train set");
    }
}

num::NdArray<float> head_logits(const ClassifierHead& head, const num::NdArray<float>& x) {
    num::NoGradGuard guard;
    return head(num::constant(x)).value();
}

num::NdArray<float> take_rows(const num::NdArray<float>& x, std::span<const std::size_t> rows) {
    const std::size_t w = x.shape()[1];
    num::NdArray<float> out(num::Shape{rows.size(), w});
    for (std::size_t r = 0; r < rows.size(); ++r) std::copy(x.data() + rows[r] * w, x.data() + (rows[r] + 1) * w, out.data() + r * w);
    return out;
}

num::LrSchedule fitted(num::LrSchedule s, std::uint32_t epochs) {
    s.total_epochs = static_cast<int>(epochs);
    s.warmup_epochs = std::min(s.warmup_epochs, s.total_epochs - 1);
    return s;
}

}  // namespace

ClassifierHead ClassifierHead::zeros(std::size_t width, std::size_t classes) {
    if (width == 0 || classes == 0) throw ContractError("ClassifierHead: width and class count must be positive");
    return {num::make_parameter<float>("head.weight", num::NdArray<float>(num::Shape{width, classes})),
            num::make_parameter<float>("head.bias", num::NdArray<float>(num::Shape{classes}))};
}

LabeledSet make_labeled_set(const gen::Dataset& ds, std::span<const std::size_t> indices, const stft::StftConfig& stft_cfg,
                            const tubes::TubeGrid& grid) {
    LabeledSet out;
    tubes::TubeGrid g;
    out.tubes = pipeline::prepare_tubes(ds, indices, stft_cfg, grid.cp, grid.tp, grid.fp, &g);
    if (!out.tubes.empty() && g.count() != grid.count()) {
        throw ContractError("make_labeled_set: dataset geometry does not produce the requested grid");
    }
    for (std::size_t i : indices) out.labels.push_back(ds.samples[i].label);
    return out;
}

num::NdArray<float> encode_pooled(const Model& model, std::span<const tubes::TubeSet> sets, std::size_t batch) {
    if (sets.empty()) throw ContractError("encode_pooled: no samples");
    if (batch == 0) throw ContractError("encode_pooled: batch must be positive");
    num::NoGradGuard guard;
    const std::size_t width = model.config().de;
    num::NdArray<float> out(num::Shape{sets.size(), width});
    for (std::size_t start = 0; start < sets.size(); start += batch) {
        const std::size_t stop = std::min(sets.size(), start + batch);
        auto ptrs = pointers(sets, start, stop);
        auto pooled = model::pooled_representation(model, std::span<const tubes::TubeSet* const>(ptrs));
        std::copy(pooled.value().data(), pooled.value().data() + pooled.value().size(), out.data() + start * width);
    }
    return out;
}

std::vector<float> pool_representation(const gen::WaterfallPlot& x, const Model& model,
                                       const stft::StftConfig& stft_cfg, const tubes::TubeGrid& grid) {
    const auto spec = stft::transform(x, stft_cfg);
    const auto set = tubes::partition_tubes(spec, grid);
    const auto pooled = encode_pooled(model, std::span<const tubes::TubeSet>(&set, 1));
    return std::vector<float>(pooled.values().begin(), pooled.values().end());
}

std::vector<int> argmax_rows(const num::NdArray<float>& logits) {
    if (logits.rank() != 2) throw DimensionError("argmax_rows: expected [rows, classes]");
    const std::size_t rows = logits.shape()[0], cols = logits.shape()[1];
    std::vector<int> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < cols; ++c) {
            if (logits.at(r, c) > logits.at(r, best)) best = c;
        }
        out[r] = static_cast<int>(best);
    }
    return out;
}

std::vector<int> predict(const Model& model, const ClassifierHead& head, std::span<const tubes::TubeSet> sets) {
    return argmax_rows(head_logits(head, encode_pooled(model, sets)));
}

int predict(const gen::WaterfallPlot& x, const Model& model, const ClassifierHead& head,
            const stft::StftConfig& stft_cfg, const tubes::TubeGrid& grid) {
    const auto feats = pool_representation(x, model, stft_cfg, grid);
    const num::NdArray<float> row(num::Shape{1, feats.size()}, feats);
    return argmax_rows(head_logits(head, row)).front();
}

double error_rate(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.empty()) throw ContractError("error_rate: empty input");
    if (predictions.size() != labels.size()) {
        throw ContractError("error_rate: " + std::to_string(predictions.size()) + " predictions for " +
                            std::to_string(labels.size()) + " labels");
    }
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) wrong += predictions[i] != labels[i];
    return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

double relative_improvement(double er_a, double er_b) {
    if (!(er_a > 0.0)) throw ContractError("relative_improvement: reference error rate must be positive");
    return (er_a - er_b) / er_a * 100.0;
}

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels, std::size_t classes) {
    if (predictions.size() != labels.size()) throw ContractError("confusion_matrix: length mismatch");
    ConfusionMatrix cm(classes, std::vector<std::uint32_t>(classes, 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int t = labels[i], p = predictions[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= classes || static_cast<std::size_t>(p) >= classes) {
            throw ContractError("confusion_matrix: class index out of range at entry " + std::to_string(i));
        }
        cm[t][p] += 1;
    }
    return cm;
}

double error_rate(const ConfusionMatrix& cm) {
    std::uint64_t total = 0, hits = 0;
    for (std::size_t i = 0; i < cm.size(); ++i) {
        for (std::size_t j = 0; j < cm[i].size(); ++j) total += cm[i][j];
        hits += cm[i][i];
    }
    if (total == 0) throw ContractError("error_rate: empty confusion matrix");
    return static_cast<double>(total - hits) / static_cast<double>(total);
}

ProbeResult fit_probe(const num::NdArray<float>& train_x, std::span<const int> train_y,
                      const num::NdArray<float>& test_x, std::span<const int> test_y, std::size_t classes,
                      const ProbeConfig& cfg) {
    if (train_x.rank() != 2 || train_x.shape()[0] != train_y.size() || train_y.empty()) {
        throw ContractError("fit_probe: train features and labels disagree");
    }
    if (cfg.epochs == 0 || cfg.batch == 0) throw ContractError("fit_probe: epochs and batch must be positive");
    check_labels(train_y, classes, "fit_probe");
    check_labels(test_y, classes, "fit_probe");
    require_all_classes(train_y, classes, "fit_probe");
    const std::size_t n = train_x.shape()[0], width = train_x.shape()[1];

    std::vector<double> mu(width, 0.0), sd(width, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < width; ++d) mu[d] += train_x.at(i, d);
    }
    for (auto& m : mu) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < width; ++d) sd[d] += (train_x.at(i, d) - mu[d]) * (train_x.at(i, d) - mu[d]);
    }
    for (auto& s : sd) s = std::sqrt(s / static_cast<double>(n) + 1e-8);
    num::NdArray<float> z(train_x.shape());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < width; ++d) z.at(i, d) = static_cast<float>((train_x.at(i, d) - mu[d]) / sd[d]);
    }

    ClassifierHead head = ClassifierHead::zeros(width, classes);
    auto params = head.parameters();
    auto state = num::make_optimizer_state(params, cfg.optimizer);
    const auto schedule = fitted(cfg.schedule, cfg.epochs);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = num::cosine_lr(static_cast<int>(epoch), schedule);
        Rng rng(derive_seed(cfg.seed, {epoch}));
        shuffle(order, rng);
        for (std::size_t start = 0; start < n; start += cfg.batch) {
            const std::size_t stop = std::min(n, start + cfg.batch);
            std::span<const std::size_t> rows(order.data() + start, stop - start);
            std::vector<int> y;
            for (std::size_t r : rows) y.push_back(train_y[r]);
            auto loss = num::cross_entropy(head(num::constant(take_rows(z, rows))), std::span<const int>(y));
            if (!std::isfinite(loss.value().item())) throw NumericError("fit_probe: non-finite loss at epoch " + std::to_string(epoch));
            num::zero_grad(params);
            num::backward(loss);
            num::adamw_step(params, state, lr);
        }
    }

    // Fold the standardization into the head so it acts on raw features.
    auto& w = head.weight.value();
    auto& b = head.bias.value();
    for (std::size_t m = 0; m < classes; ++m) {
        double shift = 0.0;
        for (std::size_t d = 0; d < width; ++d) {
            const double wd = w.at(d, m) / sd[d];
            shift += mu[d] * wd;
            w.at(d, m) = static_cast<float>(wd);
        }
        b[m] = static_cast<float>(b[m] - shift);
    }
    ProbeResult out;
    out.head = head;
    out.train_er = error_rate(argmax_rows(head_logits(head, train_x)), train_y);
    if (!test_y.empty()) {
        out.test_predictions = argmax_rows(head_logits(head, test_x));
        out.test_er = error_rate(out.test_predictions, test_y);
    }
    return out;
}

ProbeResult train_linear_probe(const Model& model, const LabeledSet& train, const LabeledSet& test,
                               std::size_t classes, const ProbeConfig& cfg) {
    if (train.size() == 0) throw DataError("train_linear_probe: empty train set");
    const auto train_x = encode_pooled(model, train.tubes);
    num::NdArray<float> test_x;
    if (test.size() > 0) test_x = encode_pooled(model, test.tubes);
    return fit_probe(train_x, train.labels, test_x, test.labels, classes, cfg);
}

FineTuneResult fine_tune(Model& model, ClassifierHead& head, const LabeledSet& train, const LabeledSet& test,
                         const FineTuneConfig& cfg) {
    if (train.size() == 0) throw DataError("fine_tune: empty train set");
    if (cfg.epochs == 0 || cfg.batch == 0) throw ContractError("fine_tune: epochs and batch must be positive");
    if (head.width() != model.config().de) throw ContractError("fine_tune: head width does not match the encoder");
    const std::size_t classes = head.classes();
    check_labels(train.labels, classes, "fine_tune");
    check_labels(test.labels, classes, "fine_tune");
    require_all_classes(train.labels, classes, "fine_tune");

    auto params = model.encoder_parameters();
    for (const auto& p : head.parameters()) params.push_back(p);
    auto state = num::make_optimizer_state(params, cfg.optimizer);
    const auto schedule = fitted(cfg.schedule, cfg.epochs);
    FineTuneResult out;
    const std::size_t n = train.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::uint64_t step = 0;
    for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = num::cosine_lr(static_cast<int>(epoch), schedule);
        Rng rng(derive_seed(cfg.seed, {epoch}));
        shuffle(order, rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch) {
            const std::size_t stop = std::min(n, start + cfg.batch);
            std::vector<const tubes::TubeSet*> batch;
            std::vector<int> y;
            for (std::size_t k = start; k < stop; ++k) {
                batch.push_back(&train.tubes[order[k]]);
                y.push_back(train.labels[order[k]]);
            }
            auto feats = model::pooled_representation(model, std::span<const tubes::TubeSet* const>(batch));
            auto loss = num::cross_entropy(head(feats), std::span<const int>(y));
            ++step;
            const double value = loss.value().item();
            if (!std::isfinite(value)) {
                throw NumericError("fine_tune: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(step));
            }
            num::zero_grad(params);
            num::backward(loss);
            num::adamw_step(params, state, lr);
            loss_sum += value * static_cast<double>(stop - start);
        }
        out.curve.push_back({epoch, loss_sum / static_cast<double>(n), lr});
    }
    if (test.size() > 0) {
        out.test_predictions = predict(model, head, test.tubes);
        out.test_er = error_rate(out.test_predictions, test.labels);
    }
    return out;
}

std::vector<std::size_t> few_shot_subset(const gen::Dataset& ds, std::uint32_t k, std::uint64_t seed) {
    if (k == 0) throw ContractError("few_shot_subset: k must be positive");
    const std::size_t classes = ds.class_count();
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i : ds.train_indices()) {
        const int y = ds.samples[i].label;
        if (y < 0 || static_cast<std::size_t>(y) >= classes) throw DataError("few_shot_subset: sample without a valid label");
        by_class[y].push_back(i);
    }
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < classes; ++c) {
        auto& pool = by_class[c];
        if (pool.size() < k) {
            throw DataError("few_shot_subset: class '" + ds.manifest.class_names[c] + "' has " +
                            std::to_string(pool.size()) + " training samples, " + std::to_string(k) + " requested");
        }
        Rng rng(derive_seed(seed, {0xf5ULL, c}));
        shuffle(pool, rng);
        std::vector<std::size_t> pick(pool.begin(), pool.begin() + k);
        std::sort(pick.begin(), pick.end());
        out.insert(out.end(), pick.begin(), pick.end());
    }
    return out;
}

PcaResult pca_embed(const num::NdArray<double>& x, std::size_t out_dims) {
    if (x.rank() != 2 || x.shape()[0] < 2) throw ContractError("pca_embed: need at least two row vectors");
    const std::size_t n = x.shape()[0], w = x.shape()[1];
    if (out_dims == 0 || out_dims > w) {
        throw ContractError("pca_embed: out-dims " + std::to_string(out_dims) + " outside [1, " + std::to_string(w) + "]");
    }
    Eigen::MatrixXd m(n, w);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < w; ++j) m(i, j) = x.at(i, j);
    }
    const Eigen::RowVectorXd mean = m.colwise().mean();
    m.rowwise() -= mean;
    const Eigen::MatrixXd cov = (m.transpose() * m) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericError("pca_embed: eigendecomposition failed");

    PcaResult out;
    out.mean.assign(mean.data(), mean.data() + w);
    out.components = num::NdArray<double>(num::Shape{w, out_dims});
    out.coords = num::NdArray<double>(num::Shape{n, out_dims});
    for (std::size_t k = 0; k < w; ++k) out.eigenvalues.push_back(std::max(0.0, solver.eigenvalues()(w - 1 - k)));
    for (std::size_t k = 0; k < out_dims; ++k) {
        Eigen::VectorXd v = solver.eigenvectors().col(static_cast<Eigen::Index>(w - 1 - k));
        Eigen::Index big;
        v.cwiseAbs().maxCoeff(&big);
        if (v(big) < 0) v = -v;
        const Eigen::VectorXd proj = m * v;
        for (std::size_t j = 0; j < w; ++j) out.components.at(j, k) = v(static_cast<Eigen::Index>(j));
        for (std::size_t i = 0; i < n; ++i) out.coords.at(i, k) = proj(static_cast<Eigen::Index>(i));
    }
    return out;
}

TsneResult tsne_embed(const num::NdArray<double>& x, const TsneConfig& cfg) {
    if (x.rank() != 2) throw ContractError("tsne_embed: expected [n, width] input");
    const std::size_t n = x.shape()[0], w = x.shape()[1];
    if (n < 10) throw ContractError("tsne_embed: need at least 10 points");
    if (!(cfg.perplexity >= 3.0 && cfg.perplexity < static_cast<double>(n) / 3.0)) {
        throw ContractError("tsne_embed: perplexity must lie in [3, n/3)");
    }
    if (!(cfg.learning_rate > 0.0) || cfg.iterations == 0) throw ContractError("tsne_embed: bad optimizer settings");

    std::vector<double> d2(n * n, 0.0);
    double spread = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < w; ++k) {
                const double diff = x.at(i, k) - x.at(j, k);
                s += diff * diff;
            }
            d2[i * n + j] = d2[j * n + i] = s;
            spread = std::max(spread, s);
        }
    }
    if (!(spread > 0.0)) throw DataError("tsne_embed: all points are identical");

    // Per-point bandwidth by bisection on the conditional entropy (bits).
    const double target = std::log2(cfg.perplexity);
    TsneResult out;
    out.entropies.resize(n);
    std::vector<double> p(n * n, 0.0);
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) dmin = std::min(dmin, d2[i * n + j]);
        }
        double beta = 1.0 / std::max(spread * 1e-3, 1e-300), lo = 0.0, hi = std::numeric_limits<double>::infinity();
        double h = 0.0;
        for (int it = 0; it < 2000; ++it) {
            double sum = 0.0, weighted = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                row[j] = j == i ? 0.0 : std::exp(-beta * (d2[i * n + j] - dmin));
                sum += row[j];
                weighted += row[j] * (d2[i * n + j] - dmin);
            }
            h = (std::log(sum) + beta * weighted / sum) / std::log(2.0);
            if (std::abs(h - target) < 1e-6) break;
            if (h > target) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        double sum = 0.0;
        for (double v : row) sum += v;
        double ent = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            p[i * n + j] = row[j] / sum;
            if (p[i * n + j] > 0.0) ent -= p[i * n + j] * std::log2(p[i * n + j]);
        }
        out.entropies[i] = ent;
    }
    std::vector<double> pj(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            pj[i * n + j] = i == j ? 0.0 : std::max((p[i * n + j] + p[j * n + i]) / (2.0 * n), 1e-12);
        }
    }

    Rng rng(cfg.seed);
    std::vector<double> y(n * 2), update(n * 2, 0.0), gains(n * 2, 1.0), grad(n * 2), num_q(n * n);
    for (auto& v : y) v = 1e-4 * normal(rng);

    auto refresh_q = [&]() {
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            num_q[i * n + i] = 0.0;
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
                const double q = 1.0 / (1.0 + dx * dx + dy * dy);
                num_q[i * n + j] = num_q[j * n + i] = q;
                z += 2.0 * q;
            }
        }
        return z;
    };
    auto kl = [&](double z) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double q = std::max(num_q[i * n + j] / z, 1e-12);
                s += pj[i * n + j] * std::log(pj[i * n + j] / q);
            }
        }
        return s;
    };

    for (std::uint32_t it = 0; it < cfg.iterations; ++it) {
        const double z = refresh_q();
        if (it % std::max<std::uint32_t>(cfg.record_every, 1) == 0) out.kl.emplace_back(it, kl(z));
        const double exag = it < cfg.exaggeration_iters ? cfg.exaggeration : 1.0;
        const double momentum = it < cfg.momentum_switch ? 0.5 : 0.8;
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double q = num_q[i * n + j];
                const double m = 4.0 * (exag * pj[i * n + j] - q / z) * q;
                grad[2 * i] += m * (y[2 * i] - y[2 * j]);
                grad[2 * i + 1] += m * (y[2 * i + 1] - y[2 * j + 1]);
            }
        }
        for (std::size_t k = 0; k < y.size(); ++k) {
            const bool same = (grad[k] > 0.0) == (update[k] > 0.0);
            gains[k] = std::max(same ? gains[k] * 0.8 : gains[k] + 0.2, 0.01);
            update[k] = momentum * update[k] - cfg.learning_rate * gains[k] * grad[k];
            y[k] += update[k];
        }
        for (int axis = 0; axis < 2; ++axis) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += y[2 * i + axis];
            mean /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) y[2 * i + axis] -= mean;
        }
    }
    out.kl.emplace_back(cfg.iterations, kl(refresh_q()));
    out.coords = num::NdArray<double>(num::Shape{n, 2}, y);
    return out;
}

// ---------------------------------------------------------------------------

ExperimentConfig resolve_experiment(ExperimentConfig cfg, const gen::Dataset& ds, tubes::TubeGrid* grid_out) {
    if (ds.samples.empty()) throw DataError("resolve_experiment: empty dataset");
    stft::validate(cfg.stft);
    const auto& first = ds.samples.front();
    if (first.samples < cfg.stft.window) throw DataError("resolve_experiment: samples shorter than one STFT window");
    const auto grid = tubes::make_grid(first.channels, cfg.stft.frames(first.samples), cfg.stft.bins(), cfg.cp, cfg.tp,
                                       cfg.fp);
    cfg.model.cp = cfg.cp;
    cfg.model.tp = cfg.tp;
    cfg.model.fp = cfg.fp;
    cfg.model.di = stft::plane_count(cfg.stft.format);
    cfg.model.tokens = grid.count();
    model::validate(cfg.model);
    cfg.train.grid = grid;
    cfg.train.schedule = fitted(cfg.train.schedule, cfg.train.epochs);
    cfg.probe.schedule = fitted(cfg.probe.schedule, cfg.probe.epochs);
    cfg.finetune.schedule = fitted(cfg.finetune.schedule, cfg.finetune.epochs);
    if (grid_out) *grid_out = grid;
    return cfg;
}

ExperimentResult run_experiment(const gen::Dataset& ds, const ExperimentConfig& base, std::uint64_t seed) {
    tubes::TubeGrid grid;
    const auto cfg = resolve_experiment(base, ds, &grid);
    const auto train_idx = ds.train_indices();
    const auto test_idx = ds.test_indices();
    const auto train = make_labeled_set(ds, train_idx, cfg.stft, grid);
    const auto test = make_labeled_set(ds, test_idx, cfg.stft, grid);

    const std::uint64_t init_seed = derive_seed(seed, {1});
    auto model = std::make_unique<Model>(cfg.model, init_seed);
    auto train_cfg = cfg.train;
    train_cfg.seed = derive_seed(seed, {3});
    train_cfg.stage = pipeline::Stage::scratch;

    if (cfg.stage1) {
        const std::size_t count = cfg.stage1_samples ? cfg.stage1_samples : train.size();
        const auto& spec0 = ds.samples.front();
        const auto videos = pipeline::synth_video_tensors(count, spec0.channels, cfg.stft.frames(spec0.samples),
                                                          cfg.stft.bins(), cfg.model.di, derive_seed(seed, {2}));
        std::vector<tubes::TubeSet> video_tubes;
        for (const auto& v : videos) video_tubes.push_back(tubes::partition_tubes(v, grid));
        auto stage1_cfg = cfg.train;
        stage1_cfg.epochs = cfg.stage1_epochs;
        stage1_cfg.schedule = fitted(stage1_cfg.schedule, cfg.stage1_epochs);
        stage1_cfg.seed = derive_seed(seed, {2, 1});
        stage1_cfg.stage = pipeline::Stage::stage1_video;
        pipeline::pretrain(video_tubes, *model, stage1_cfg);
        pipeline::CheckpointMeta meta{cfg.model, pipeline::Stage::stage1_video, cfg.stage1_epochs, init_seed, "", ""};
        const auto ckpt = pipeline::make_checkpoint(*model, meta);
        auto stage2 = std::make_unique<Model>(cfg.model, init_seed);
        pipeline::apply_checkpoint(ckpt, *stage2, pipeline::Strictness::permissive, init_seed);
        model = std::move(stage2);
        train_cfg.stage = pipeline::Stage::stage2_waterfall;
    }

    ExperimentResult out;
    out.seed = seed;
    out.curve = pipeline::pretrain(train.tubes, *model, train_cfg).curve;
    auto probe_cfg = cfg.probe;
    probe_cfg.seed = derive_seed(seed, {4});
    auto probe = train_linear_probe(*model, train, test, ds.class_count(), probe_cfg);
    out.probe_er = probe.test_er;
    out.finetune_er = probe.test_er;
    if (cfg.run_finetune) {
        auto ft_cfg = cfg.finetune;
        ft_cfg.seed = derive_seed(seed, {5});
        out.finetune_er = fine_tune(*model, probe.head, train, test, ft_cfg).test_er;
    }
    return out;
}

std::string to_string(AblationAxis a) {
    switch (a) {
        case AblationAxis::mask_ratio: return "mask-ratio";
        case AblationAxis::mask_strategy: return "mask-strategy";
        case AblationAxis::stft_format: return "stft-format";
        case AblationAxis::stage1: return "stage1";
    }
    return "?";
}

AblationAxis parse_axis(const std::string& s) {
    if (s == "mask-ratio") return AblationAxis::mask_ratio;
    if (s == "mask-strategy") return AblationAxis::mask_strategy;
    if (s == "stft-format") return AblationAxis::stft_format;
    if (s == "stage1") return AblationAxis::stage1;
    throw ContractError("unknown ablation axis '" + s + "' (mask-ratio | mask-strategy | stft-format | stage1)");
}

std::vector<std::string> default_values(AblationAxis a) {
    switch (a) {
        case AblationAxis::mask_ratio: return {"0.7", "0.8", "0.9", "0.95", "0.98"};
        case AblationAxis::mask_strategy: return {"random", "spatial", "temporal", "frequency"};
        case AblationAxis::stft_format: return {"magnitude", "magnitude_phase", "real_imag"};
        case AblationAxis::stage1: return {"off", "on"};
    }
    return {};
}

ExperimentConfig apply_axis(ExperimentConfig base, AblationAxis axis, const std::string& value) {
    switch (axis) {
        case AblationAxis::mask_ratio: {
            std::size_t used = 0;
            double r = 0.0;
            try {
                r = std::stod(value, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != value.size() || !(r > 0.0 && r < 1.0)) throw ContractError("mask ratio '" + value + "' outside (0, 1)");
            base.train.mask_ratio = r;
            break;
        }
        case AblationAxis::mask_strategy: base.train.strategy = tubes::parse_strategy(value); break;
        case AblationAxis::stft_format: base.stft.format = stft::parse_format(value); break;
        case AblationAxis::stage1:
            if (value != "on" && value != "off") throw ContractError("stage1 value '" + value + "' (on | off)");
            base.stage1 = value == "on";
            break;
    }
    return base;
}

double median(std::vector<double> v) {
    if (v.empty()) throw ContractError("median: empty input");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double SweepTable::median_probe(const std::string& value) const {
    std::vector<double> v;
    for (const auto& r : rows) {
        if (r.value == value) v.push_back(r.probe_er);
    }
    return median(v);
}

double SweepTable::median_finetune(const std::string& value) const {
    std::vector<double> v;
    for (const auto& r : rows) {
        if (r.value == value) v.push_back(r.finetune_er);
    }
    return median(v);
}

SweepTable ablation_sweep(const gen::Dataset& ds, AblationAxis axis, const std::vector<std::string>& values,
                          const ExperimentConfig& base, std::span<const std::uint64_t> seeds) {
    if (values.empty() || seeds.empty()) throw ContractError("ablation_sweep: need at least one value and one seed");
    std::vector<ExperimentConfig> cells;
    for (const auto& v : values) cells.push_back(apply_axis(base, axis, v));
    SweepTable table;
    table.axis = axis;
    for (std::size_t i = 0; i < values.size(); ++i) {
        for (std::uint64_t seed : seeds) {
            const auto r = run_experiment(ds, cells[i], seed);
            table.rows.push_back({values[i], seed, r.probe_er, r.finetune_er});
        }
    }
    return table;
}

void write_confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& class_names,
                         const std::filesystem::path& file) {
    std::ofstream os(file);
    if (!os) throw DataError(file.string() + ": cannot open for writing");
    os << "true\\predicted";
    for (std::size_t j = 0; j < cm.size(); ++j) os << ',' << (j < class_names.size() ? class_names[j] : std::to_string(j));
    os << '\n';
    for (std::size_t i = 0; i < cm.size(); ++i) {
        os << (i < class_names.size() ? class_names[i] : std::to_string(i));
        for (auto v : cm[i]) os << ',' << v;
        os << '\n';
    }
}

void write_coordinates(const num::NdArray<double>& coords, std::span<const int> labels,
                       const std::filesystem::path& file) {
    if (coords.rank() != 2 || coords.shape()[1] < 2 || coords.shape()[0] != labels.size()) {
        throw ContractError("write_coordinates: coordinates and labels disagree");
    }
    std::ofstream os(file);
    if (!os) throw DataError(file.string() + ": cannot open for writing");
    os.precision(9);
    os << "index,class,x,y\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        os << i << ',' << labels[i] << ',' << coords.at(i, 0) << ',' << coords.at(i, 1) << '\n';
    }
}

void write_sweep_csv(const SweepTable& table, const std::filesystem::path& file) {
    std::ofstream os(file);
    if (!os) throw DataError(file.string() + ": cannot open for writing");
    os.precision(9);
    os << "axis,value,seed,probe_er,finetune_er\n";
    std::vector<std::string> seen;
    for (const auto& r : table.rows) {
        os << to_string(table.axis) << ',' << r.value << ',' << r.seed << ',' << r.probe_er << ',' << r.finetune_er << '\n';
        if (std::find(seen.begin(), seen.end(), r.value) == seen.end()) seen.push_back(r.value);
    }
    for (const auto& v : seen) {
        os << to_string(table.axis) << ',' << v << ",median," << table.median_probe(v) << ',' << table.median_finetune(v)
           << '\n';
    }
}

}  // namespace dasmae::eval
