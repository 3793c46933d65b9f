#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "dasmae/eval.hpp"
#include "dasmae/pipeline.hpp"
#include "support.hpp"

using namespace dasmae;
using namespace dasmae::pipeline;
using num::NdArray;
using num::Shape;

namespace {

tubes::MaskSpec mask_of(std::uint32_t n, std::vector<std::uint32_t> masked) {
    tubes::MaskSpec m;
    m.total = n;
    m.masked = masked;
    for (std::uint32_t i = 0; i < n; ++i) {
        if (std::find(masked.begin(), masked.end(), i) == masked.end()) m.visible.push_back(i);
    }
    return m;
}

model::ModelConfig small_model(std::uint32_t tokens = 8) {
    model::ModelConfig c{1, 2, 2, 1, 8, 1, 2, 8, 1, 2, 2, tokens};
    return c;
}

std::vector<tubes::TubeSet> random_sets(std::size_t count, std::uint32_t tokens, std::uint32_t size, std::uint64_t seed) {
    std::vector<tubes::TubeSet> out;
    Rng rng(seed);
    for (std::size_t n = 0; n < count; ++n) {
        tubes::TubeSet s{tokens, size, std::vector<float>(std::size_t{tokens} * size)};
        for (auto& v : s.values) v = static_cast<float>(normal(rng));
        out.push_back(std::move(s));
    }
    return out;
}

TrainConfig small_train(std::uint32_t epochs) {
    TrainConfig cfg;
    cfg.batch = 4;
    cfg.epochs = epochs;
    cfg.schedule = {1e-3, 0.0, 1, static_cast<int>(epochs)};
    cfg.mask_ratio = 0.5;
    cfg.grid = tubes::make_grid(2, 4, 4, 1, 2, 2);
    return cfg;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("reconstruction loss examples") {
    const auto m = mask_of(4, {1, 3});
    auto targets = testing::random_array({4, 3}, 1);
    SUBCASE("exact predictions on masked tubes give zero") {
        auto pred = targets;
        pred.at(0, 0) += 5.0;
        pred.at(2, 1) -= 2.0;
        auto loss = reconstruction_loss(num::constant(pred), targets, std::span<const tubes::MaskSpec>(&m, 1),
                                        TargetNorm::none);
        CHECK(loss.value().item() == 0.0);
    }
    SUBCASE("hand-computed standardized error") {
        const auto one = mask_of(2, {1});
        NdArray<double> t({2, 4}, {9, 9, 9, 9, 1, 2, 3, 4});
        auto loss = reconstruction_loss(num::constant(NdArray<double>({2, 4}, 0.0)), t,
                                        std::span<const tubes::MaskSpec>(&one, 1), TargetNorm::per_tube);
        // mean 2.5, population variance 1.25; the squared standardized values average to var / (var + eps)
        const double var = 1.25, eps = 1e-6;
        double expect = 0.0;
        for (double x : {1.0, 2.0, 3.0, 4.0}) expect += (x - 2.5) * (x - 2.5) / (var + eps);
        CHECK(loss.value().item() == doctest::Approx(expect / 4).epsilon(1e-12));
    }
    SUBCASE("contract") {
        const auto none = mask_of(4, {});
        CHECK_THROWS_AS(reconstruction_loss(num::constant(targets), targets, std::span<const tubes::MaskSpec>(&none, 1),
                                            TargetNorm::none),
                        ContractError);
        CHECK_THROWS_AS(reconstruction_loss(num::constant(targets), targets, std::span<const tubes::MaskSpec>(),
                                            TargetNorm::none),
                        ContractError);
    }
}

TEST_CASE("visible-tube predictions get exactly zero gradient") {
    for (auto mode : {TargetNorm::none, TargetNorm::per_tube, TargetNorm::global}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            auto grid = tubes::make_grid(6, 3, 2, 1, 1, 1);
            std::vector<tubes::MaskSpec> masks{tubes::sample_mask(grid, 0.75, tubes::MaskStrategy::random, seed),
                                               tubes::sample_mask(grid, 0.5, tubes::MaskStrategy::temporal, seed)};
            auto targets = testing::random_array({72, 5}, seed + 10);
            auto pred = num::make_parameter<double>("pred", testing::random_array({72, 5}, seed + 20));
            auto loss = reconstruction_loss(pred, targets, std::span<const tubes::MaskSpec>(masks), mode);
            num::backward(loss);
            auto bumped = pred.value();
            for (std::size_t b = 0; b < 2; ++b) {
                for (auto v : masks[b].visible) {
                    for (std::size_t c = 0; c < 5; ++c) {
                        CHECK(pred.grad().at(b * 36 + v, c) == 0.0);
                        bumped.at(b * 36 + v, c) += 1e3 * (c + 1);
                    }
                }
            }
            auto again = reconstruction_loss(num::constant(bumped), targets, std::span<const tubes::MaskSpec>(masks), mode);
            CHECK(again.value().item() == loss.value().item());
        }
    }
}

TEST_CASE("target normalization") {
    auto t = testing::random_array({6, 4}, 3, -5, 5);
    auto per = normalize_targets(t, 3, TargetNorm::per_tube);
    for (std::size_t r = 0; r < 6; ++r) {
        double m = 0.0;
        for (std::size_t c = 0; c < 4; ++c) m += per.at(r, c);
        CHECK(std::abs(m) <= 1e-12);
    }
    auto glob = normalize_targets(t, 3, TargetNorm::global);
    for (std::size_t s = 0; s < 2; ++s) {
        double m = 0.0, v = 0.0;
        for (std::size_t i = 0; i < 12; ++i) m += glob[s * 12 + i];
        for (std::size_t i = 0; i < 12; ++i) v += glob[s * 12 + i] * glob[s * 12 + i];
        CHECK(std::abs(m) <= 1e-12);
        CHECK(v / 12 == doctest::Approx(1.0).epsilon(1e-5));
    }
    CHECK(normalize_targets(t, 3, TargetNorm::none) == t);
    CHECK(parse_target_norm("global") == TargetNorm::global);
    CHECK_THROWS_AS(parse_target_norm("l2"), ContractError);
}

TEST_CASE("pretraining applies the schedule and is deterministic") {
    auto data = random_sets(10, 8, 4, 5);
    auto cfg = small_train(6);
    Model a(small_model(), 1), b(small_model(), 1);
    std::vector<EpochRecord> seen;
    auto ra = pretrain(data, a, cfg, [&](const EpochRecord& r) { seen.push_back(r); });
    auto rb = pretrain(data, b, cfg);
    REQUIRE(ra.curve.size() == 6);
    CHECK(seen.size() == 6);
    CHECK(ra.steps == 6 * 3);
    for (std::size_t e = 0; e < 6; ++e) {
        CHECK(ra.curve[e].epoch == e + 1);
        CHECK(ra.curve[e].lr == num::cosine_lr(static_cast<int>(e + 1), cfg.schedule));
        CHECK(ra.curve[e].loss == rb.curve[e].loss);
    }
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
        CHECK(a.parameters()[i].value() == b.parameters()[i].value());
    }
    CHECK(num::cosine_lr(40, TrainConfig{}.schedule) == 1e-3);
}

TEST_CASE("stage-2 initialization only changes initial values") {
    auto data = random_sets(8, 8, 4, 6);
    auto cfg = small_train(3);
    Model scratch(small_model(), 1);
    Model stage2(small_model(), 2);
    auto r1 = pretrain(data, scratch, cfg);
    auto r2 = pretrain(data, stage2, cfg);
    CHECK(r1.steps == r2.steps);
    for (std::size_t e = 0; e < 3; ++e) CHECK(r1.curve[e].lr == r2.curve[e].lr);
    CHECK(r1.curve[0].loss != r2.curve[0].loss);
}

TEST_CASE("pretraining contract") {
    auto data = random_sets(4, 8, 4, 7);
    Model m(small_model(), 1);
    auto cfg = small_train(2);
    cfg.grid = tubes::make_grid(2, 4, 6, 1, 2, 2);
    CHECK_THROWS_AS(pretrain(data, m, cfg), ContractError);
    cfg = small_train(2);
    cfg.schedule.total_epochs = 1;
    cfg.schedule.warmup_epochs = 0;
    CHECK_THROWS_AS(pretrain(data, m, cfg), ContractError);
    cfg = small_train(2);
    CHECK_THROWS_AS(pretrain(std::span<const tubes::TubeSet>(), m, cfg), DataError);
    cfg.mask_ratio = 0.9;
    CHECK_THROWS_AS(pretrain(data, m, cfg), ContractError);
    cfg = small_train(2);
    auto bad = random_sets(4, 8, 4, 8);
    bad[2].values[5] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(pretrain(bad, m, small_train(2)), NumericError);
}

TEST_CASE("loss curve file") {
    auto dir = testing::scratch_dir("curve");
    write_loss_curve({{1, 0.5, 1e-3}, {2, 0.25, 5e-4}}, dir / "c.csv");
    std::ifstream is(dir / "c.csv");
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    CHECK(header == "epoch,loss,lr");
    CHECK(row == "1,0.5,0.001");
}

TEST_CASE("checkpoint roundtrip") {
    auto dir = testing::scratch_dir("ckpt");
    Model m(small_model(), 9);
    CheckpointMeta meta;
    meta.stage = Stage::stage1_video;
    meta.epoch = 12;
    meta.seed = 9;
    meta.rng_state = "train.seed=3;epoch=12";
    meta.config_echo = "model.de = 8\n";
    save_checkpoint(m, meta, dir / "m.dmck");
    auto back = read_checkpoint(dir / "m.dmck");
    CHECK(back.meta.stage == Stage::stage1_video);
    CHECK(back.meta.epoch == 12);
    CHECK(back.meta.rng_state == meta.rng_state);
    CHECK(back.meta.config_echo == meta.config_echo);
    CHECK(back.meta.model.tokens == 8);
    auto loaded = model_from_checkpoint(back);
    REQUIRE(loaded.parameters().size() == m.parameters().size());
    for (std::size_t i = 0; i < m.parameters().size(); ++i) {
        const auto& x = m.parameters()[i].value();
        const auto& y = loaded.parameters()[i].value();
        CHECK(std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0);
    }
    write_checkpoint(back, dir / "again.dmck");
    CHECK(std::filesystem::file_size(dir / "again.dmck") == std::filesystem::file_size(dir / "m.dmck"));

    SUBCASE("truncated file") {
        std::filesystem::resize_file(dir / "m.dmck", std::filesystem::file_size(dir / "m.dmck") / 2);
        CHECK_THROWS_AS(read_checkpoint(dir / "m.dmck"), DataError);
    }
    SUBCASE("bad magic") {
        std::ofstream(dir / "bad.dmck") << "NOPE and more";
        CHECK_THROWS_AS(read_checkpoint(dir / "bad.dmck"), DataError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(read_checkpoint(dir / "none.dmck"), DataError); }
}

TEST_CASE("loading across token counts") {
    Model stage1(small_model(8), 1);
    auto ckpt = make_checkpoint(stage1, {});
    Model stage2(small_model(12), 2);
    auto report = apply_checkpoint(ckpt, stage2, Strictness::permissive, 2);
    CHECK(report.reinitialized == std::vector<std::string>{"encoder.pos", "decoder.pos"});
    CHECK(report.skipped == std::vector<std::string>{"encoder.pos", "decoder.pos"});
    CHECK(report.loaded.size() == stage2.parameters().size() - 2);
    for (const auto& name : report.loaded) {
        CHECK(stage2.parameter(name).value() == stage1.parameter(name).value());
    }
    Model fresh(small_model(12), 2);
    CHECK(stage2.parameter("encoder.pos").value() == fresh.parameter("encoder.pos").value());

    Model strict(small_model(12), 3);
    const auto before = strict.parameter("encoder.embed.weight").value();
    CHECK_THROWS_AS(apply_checkpoint(ckpt, strict, Strictness::strict, 3), TransferError);
    CHECK(strict.parameter("encoder.embed.weight").value() == before);

    auto partial = ckpt;
    partial.arrays.pop_back();
    partial.arrays.push_back({"extra.thing", {2}, {1.0f, 2.0f}});
    Model target(small_model(8), 4);
    CHECK_THROWS_AS(apply_checkpoint(partial, target, Strictness::strict, 4), TransferError);
    auto rep = apply_checkpoint(partial, target, Strictness::permissive, 4);
    CHECK(rep.skipped == std::vector<std::string>{"extra.thing"});
    CHECK(rep.reinitialized == std::vector<std::string>{ckpt.arrays.back().name});

    auto dup = ckpt;
    dup.arrays.push_back(dup.arrays.front());
    CHECK_THROWS_AS(apply_checkpoint(dup, target, Strictness::permissive, 4), TransferError);
}

TEST_CASE("video stand-ins") {
    auto v = synth_video_tensors(3, 12, 50, 32, 1, 5);
    REQUIRE(v.size() == 3);
    for (const auto& t : v) {
        CHECK(t.values.size() == 12u * 50 * 32);
        CHECK(t.normalized);
        double m = 0.0;
        for (float x : t.values) m += x;
        CHECK(std::abs(m / t.values.size()) <= 1e-4);
    }
    CHECK(synth_video_tensors(3, 12, 50, 32, 1, 5)[2].values == v[2].values);
    CHECK(synth_video_tensors(3, 12, 50, 32, 1, 6)[2].values != v[2].values);
}

TEST_CASE("model configuration json") {
    model::ModelConfig c{2, 16, 16, 1, 64, 4, 4, 32, 2, 2, 4, 36};
    auto back = model_config_from_json(model_config_json(c));
    CHECK(back.de == 64);
    CHECK(back.tokens == 36);
    CHECK(back.tube_size() == c.tube_size());
    CHECK_THROWS_AS(model_config_from_json("{\"cp\": 1}"), DataError);
}

}  // TEST_SUITE

TEST_SUITE("training_scale") {

TEST_CASE("desk-scale loss halves within 50 epochs") {
    gen::DatasetConfig dc;
    dc.counts.assign(6, 6);
    dc.samples = 2000;
    dc.train_fraction = 0.9;
    auto ds = gen::synth_dataset(dc);
    auto idx = ds.train_indices();
    idx.resize(32);
    tubes::TubeGrid grid;
    auto data = prepare_tubes(ds, idx, stft::StftConfig{40, 40, 64}, 2, 16, 16, &grid);
    eval::ExperimentConfig ec;
    ec.model.tokens = grid.count();
    Model m(ec.model, 1);
    CHECK(ec.model.de == 64);
    CHECK(ec.model.le == 4);
    TrainConfig cfg;
    cfg.batch = 16;
    cfg.epochs = 50;
    cfg.schedule = {1e-3, 0.0, 5, 50};
    cfg.grid = grid;
    auto r = pretrain(data, m, cfg);
    MESSAGE("epoch 1 loss ", r.curve.front().loss, ", epoch 50 loss ", r.curve.back().loss);
    CHECK(r.curve.back().loss <= 0.5 * r.curve.front().loss);
}

}  // TEST_SUITE
