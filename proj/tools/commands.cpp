#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dasmae/config.hpp"
#include "dasmae/errors.hpp"

namespace dasmae::cli {

namespace fs = std::filesystem;
using config::RunConfig;

namespace {

struct Context {
    RunConfig rc;
    std::ostream& out;
};

fs::path out_dir(const RunConfig& rc) {
    fs::path dir = rc.get("io.out");
    fs::create_directories(dir);
    return dir;
}

struct Prepared {
    gen::Dataset ds;
    eval::ExperimentConfig exp;
    tubes::TubeGrid grid;
};

Prepared prepare(const RunConfig& rc) {
    Prepared p;
    p.ds = gen::read_dataset(rc.get("io.data"));
    p.exp = eval::resolve_experiment(config::experiment_config(rc), p.ds, &p.grid);
    return p;
}

/// Encoder from io.checkpoint, or a freshly initialized one when unset.
pipeline::Model load_model(const Context& ctx, const Prepared& p) {
    const auto& path = ctx.rc.get("io.checkpoint");
    if (path.empty()) {
        ctx.out << "no io.checkpoint given: using a randomly initialized encoder\n";
        return pipeline::Model(p.exp.model, ctx.rc.seed("model.seed"));
    }
    const auto ckpt = pipeline::read_checkpoint(path);
    const auto& m = ckpt.meta.model;
    if (m.tokens != p.exp.model.tokens || m.tube_size() != p.exp.model.tube_size()) {
        throw DataError(path + ": checkpoint expects " + std::to_string(m.tokens) + " tubes of " +
                        std::to_string(m.tube_size()) + ", data gives " + std::to_string(p.exp.model.tokens) + " of " +
                        std::to_string(p.exp.model.tube_size()));
    }
    return pipeline::model_from_checkpoint(ckpt);
}

void write_metrics(const fs::path& file, const std::vector<std::pair<std::string, double>>& rows) {
    std::ofstream os(file);
    if (!os) throw DataError(file.string() + ": cannot open for writing");
    os.precision(9);
    os << "metric,value\n";
    for (const auto& [k, v] : rows) os << k << ',' << v << '\n';
}

void write_predictions(const fs::path& file, const gen::Dataset& ds, const std::vector<std::size_t>& idx,
                       const std::vector<int>& pred) {
    std::ofstream os(file);
    if (!os) throw DataError(file.string() + ": cannot open for writing");
    os << "index,file,label,predicted\n";
    for (std::size_t i = 0; i < idx.size(); ++i) {
        os << idx[i] << ',' << ds.files[idx[i]] << ',' << ds.samples[idx[i]].label << ',' << pred[i] << '\n';
    }
}

void save_head(const eval::ClassifierHead& head, const RunConfig& rc, const fs::path& file) {
    pipeline::Checkpoint ckpt;
    for (const auto& p : head.parameters()) {
        const auto& v = p.value();
        ckpt.arrays.push_back({p.name(), v.shape(), std::vector<float>(v.data(), v.data() + v.size())});
    }
    ckpt.meta.config_echo = rc.text();
    pipeline::write_checkpoint(ckpt, file);
}

pipeline::CheckpointMeta meta_for(const RunConfig& rc, const pipeline::TrainConfig& tc, const model::ModelConfig& mc) {
    pipeline::CheckpointMeta meta;
    meta.model = mc;
    meta.stage = tc.stage;
    meta.epoch = tc.epochs;
    meta.seed = rc.seed("model.seed");
    meta.rng_state = "train.seed=" + std::to_string(tc.seed) + ";epoch=" + std::to_string(tc.epochs);
    meta.config_echo = rc.text();
    return meta;
}

void print_list(std::ostream& os, const char* title, const std::vector<std::string>& names) {
    os << title << " (" << names.size() << ")\n";
    for (const auto& n : names) os << "  " << n << '\n';
}

// ---------------------------------------------------------------------------

int cmd_gen(Context& ctx) {
    const auto ds = gen::synth_dataset(config::dataset_config(ctx.rc));
    const fs::path dir = ctx.rc.get("io.data");
    gen::write_dataset(ds, dir);
    ctx.rc.write(dir / "resolved.cfg");
    ctx.out << "wrote " << ds.samples.size() << " samples (" << ds.train_indices().size() << " train / "
            << ds.test_indices().size() << " test) to " << dir.string() << '\n';
    return kOk;
}

int cmd_preprocess(Context& ctx) {
    const auto ds = gen::read_dataset(ctx.rc.get("io.data"));
    const auto sc = config::stft_config(ctx.rc);
    pipeline::Checkpoint cache;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto t = stft::transform(ds.samples[i], sc);
        cache.arrays.push_back({fs::path(ds.files[i]).stem().string(),
                                {t.channels, t.frames, t.bins, t.depth},
                                t.values});
    }
    cache.meta.config_echo = ctx.rc.text();
    const auto dir = out_dir(ctx.rc);
    pipeline::write_checkpoint(cache, dir / "spectra.dmck");
    ctx.rc.write(dir / "resolved.cfg");
    const auto& a = cache.arrays.front().shape;
    ctx.out << "cached " << cache.arrays.size() << " spectro tensors of " << a[0] << "x" << a[1] << "x" << a[2] << "x"
            << a[3] << " in " << (dir / "spectra.dmck").string() << '\n';
    return kOk;
}

int cmd_pretrain(Context& ctx) {
    const auto p = prepare(ctx.rc);
    auto tc = p.exp.train;
    const auto train_idx = p.ds.train_indices();
    std::vector<tubes::TubeSet> data;
    if (tc.stage == pipeline::Stage::stage1_video) {
        const auto& s0 = p.ds.samples.front();
        const auto videos = pipeline::synth_video_tensors(train_idx.size(), s0.channels, p.exp.stft.frames(s0.samples),
                                                          p.exp.stft.bins(), p.exp.model.di, tc.seed);
        for (const auto& v : videos) data.push_back(tubes::partition_tubes(v, p.grid));
    } else {
        data = pipeline::prepare_tubes(p.ds, train_idx, p.exp.stft, p.grid.cp, p.grid.tp, p.grid.fp);
    }
    const auto init_seed = ctx.rc.seed("model.seed");
    pipeline::Model model(p.exp.model, init_seed);
    const auto dir = out_dir(ctx.rc);
    const auto& init = ctx.rc.get("io.init");
    if (tc.stage == pipeline::Stage::stage2_waterfall && init.empty()) {
        throw UsageError("train.stage=stage2_waterfall needs io.init (a stage-1 checkpoint)");
    }
    if (!init.empty()) {
        const auto report = pipeline::load_checkpoint(init, model, pipeline::Strictness::permissive, init_seed);
        std::ofstream os(dir / "load_report.txt");
        print_list(os, "loaded", report.loaded);
        print_list(os, "skipped", report.skipped);
        print_list(os, "reinitialized", report.reinitialized);
        ctx.out << "initialized from " << init << ": " << report.loaded.size() << " loaded, " << report.skipped.size()
                << " skipped, " << report.reinitialized.size() << " re-initialized\n";
    }
    ctx.out << "pretraining " << model.scalar_count() << " parameters on " << data.size() << " samples, "
            << p.grid.count() << " tubes each, stage " << pipeline::to_string(tc.stage) << '\n';
    const auto result = pipeline::pretrain(data, model, tc, [&](const pipeline::EpochRecord& r) {
        if (r.epoch == 1 || r.epoch % 10 == 0 || r.epoch == tc.epochs) {
            ctx.out << "epoch " << r.epoch << " loss " << r.loss << " lr " << r.lr << '\n';
        }
    });
    pipeline::save_checkpoint(model, meta_for(ctx.rc, tc, p.exp.model), dir / "checkpoint.dmck");
    pipeline::write_loss_curve(result.curve, dir / "loss_curve.csv");
    ctx.rc.write(dir / "resolved.cfg");
    ctx.out << "wrote " << (dir / "checkpoint.dmck").string() << '\n';
    return kOk;
}

struct ProbeRun {
    eval::LabeledSet train, test;
    std::vector<std::size_t> test_idx;
    eval::ProbeResult probe;
};

ProbeRun run_probe(const Context& ctx, const Prepared& p, const pipeline::Model& model) {
    ProbeRun r;
    const auto train_idx = p.ds.train_indices();
    r.test_idx = p.ds.test_indices();
    r.train = eval::make_labeled_set(p.ds, train_idx, p.exp.stft, p.grid);
    r.test = eval::make_labeled_set(p.ds, r.test_idx, p.exp.stft, p.grid);
    auto pc = p.exp.probe;
    pc.seed = ctx.rc.seed("train.seed");
    r.probe = eval::train_linear_probe(model, r.train, r.test, p.ds.class_count(), pc);
    return r;
}

int cmd_probe(Context& ctx) {
    const auto p = prepare(ctx.rc);
    const auto model = load_model(ctx, p);
    const auto r = run_probe(ctx, p, model);
    const auto dir = out_dir(ctx.rc);
    const auto cm = eval::confusion_matrix(r.probe.test_predictions, r.test.labels, p.ds.class_count());
    write_metrics(dir / "metrics.csv", {{"probe_train_er", r.probe.train_er},
                                        {"probe_test_er", r.probe.test_er},
                                        {"n_train", static_cast<double>(r.train.size())},
                                        {"n_test", static_cast<double>(r.test.size())}});
    eval::write_confusion_csv(cm, p.ds.manifest.class_names, dir / "confusion.csv");
    write_predictions(dir / "predictions.csv", p.ds, r.test_idx, r.probe.test_predictions);
    save_head(r.probe.head, ctx.rc, dir / "head.dmck");
    ctx.rc.write(dir / "resolved.cfg");
    ctx.out << "linear probe: train ER " << r.probe.train_er << ", test ER " << r.probe.test_er << '\n';
    return kOk;
}

int cmd_finetune(Context& ctx) {
    const auto p = prepare(ctx.rc);
    auto model = load_model(ctx, p);
    auto r = run_probe(ctx, p, model);
    auto fc = p.exp.finetune;
    fc.seed = ctx.rc.seed("train.seed");
    const auto ft = eval::fine_tune(model, r.probe.head, r.train, r.test, fc);
    const auto dir = out_dir(ctx.rc);
    const auto cm = eval::confusion_matrix(ft.test_predictions, r.test.labels, p.ds.class_count());
    write_metrics(dir / "metrics.csv", {{"probe_test_er", r.probe.test_er},
                                        {"finetune_test_er", ft.test_er},
                                        {"n_train", static_cast<double>(r.train.size())},
                                        {"n_test", static_cast<double>(r.test.size())}});
    eval::write_confusion_csv(cm, p.ds.manifest.class_names, dir / "confusion.csv");
    write_predictions(dir / "predictions.csv", p.ds, r.test_idx, ft.test_predictions);
    pipeline::write_loss_curve(ft.curve, dir / "finetune_curve.csv");
    auto tc = p.exp.train;
    tc.epochs = fc.epochs;
    pipeline::save_checkpoint(model, meta_for(ctx.rc, tc, p.exp.model), dir / "checkpoint.dmck");
    save_head(r.probe.head, ctx.rc, dir / "head.dmck");
    ctx.rc.write(dir / "resolved.cfg");
    ctx.out << "probe test ER " << r.probe.test_er << ", fine-tuned test ER " << ft.test_er << '\n';
    return kOk;
}

int cmd_fewshot(Context& ctx) {
    const auto p = prepare(ctx.rc);
    const auto model = load_model(ctx, p);
    const auto k = ctx.rc.count("eval.k_per_class");
    const auto train_idx = p.ds.train_indices();
    const auto test_idx = p.ds.test_indices();
    const auto train = eval::make_labeled_set(p.ds, train_idx, p.exp.stft, p.grid);
    const auto test = eval::make_labeled_set(p.ds, test_idx, p.exp.stft, p.grid);
    const auto train_x = eval::encode_pooled(model, train.tubes);
    const auto test_x = eval::encode_pooled(model, test.tubes);
    std::map<std::size_t, std::size_t> row_of;
    for (std::size_t r = 0; r < train_idx.size(); ++r) row_of[train_idx[r]] = r;

    const auto dir = out_dir(ctx.rc);
    std::ofstream os(dir / "fewshot.csv");
    if (!os) throw DataError((dir / "fewshot.csv").string() + ": cannot open for writing");
    os.precision(9);
    os << "k,seed,labeled,test_er\n";
    std::vector<double> ers;
    for (auto seed : config::seeds(ctx.rc)) {
        const auto subset = eval::few_shot_subset(p.ds, k, seed);
        num::NdArray<float> x(num::Shape{subset.size(), train_x.shape()[1]});
        std::vector<int> y;
        for (std::size_t i = 0; i < subset.size(); ++i) {
            const std::size_t r = row_of.at(subset[i]);
            std::copy(train_x.data() + r * x.shape()[1], train_x.data() + (r + 1) * x.shape()[1],
                      x.data() + i * x.shape()[1]);
            y.push_back(p.ds.samples[subset[i]].label);
        }
        auto pc = p.exp.probe;
        pc.seed = seed;
        const auto res = eval::fit_probe(x, y, test_x, test.labels, p.ds.class_count(), pc);
        os << k << ',' << seed << ',' << subset.size() << ',' << res.test_er << '\n';
        ctx.out << "k=" << k << " seed " << seed << ": " << subset.size() << " labeled samples, test ER "
                << res.test_er << '\n';
        ers.push_back(res.test_er);
    }
    os << k << ",median,," << eval::median(ers) << '\n';
    ctx.rc.write(dir / "resolved.cfg");
    ctx.out << "median test ER " << eval::median(ers) << '\n';
    return kOk;
}

int cmd_ablate(Context& ctx) {
    const auto ds = gen::read_dataset(ctx.rc.get("io.data"));
    const auto axis = eval::parse_axis(ctx.rc.get("eval.ablate.axis"));
    auto values = ctx.rc.list("eval.ablate.values");
    if (values.empty()) values = eval::default_values(axis);
    const auto base = config::experiment_config(ctx.rc);
    for (const auto& v : values) {
        try {
            eval::resolve_experiment(eval::apply_axis(base, axis, v), ds);
        } catch (const ContractError& e) {
            throw UsageError("eval.ablate.values: " + std::string(e.what()));
        }
    }
    const auto seeds = config::seeds(ctx.rc);
    const auto table = eval::ablation_sweep(ds, axis, values, base, seeds);
    const auto dir = out_dir(ctx.rc);
    eval::write_sweep_csv(table, dir / "sweep.csv");
    ctx.rc.write(dir / "resolved.cfg");
    for (const auto& v : values) {
        ctx.out << eval::to_string(axis) << '=' << v << ": median probe ER " << table.median_probe(v)
                << ", median fine-tune ER " << table.median_finetune(v) << '\n';
    }
    return kOk;
}

int cmd_embed(Context& ctx) {
    const auto p = prepare(ctx.rc);
    const auto model = load_model(ctx, p);
    const auto& split = ctx.rc.get("eval.embed.split");
    std::vector<std::size_t> idx;
    if (split == "train") idx = p.ds.train_indices();
    else if (split == "test") idx = p.ds.test_indices();
    else {
        idx.resize(p.ds.samples.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    }
    const auto set = eval::make_labeled_set(p.ds, idx, p.exp.stft, p.grid);
    const auto feats = eval::encode_pooled(model, set.tubes);
    num::NdArray<double> x = num::cast<double>(feats);
    const auto dir = out_dir(ctx.rc);
    if (ctx.rc.get("eval.embed.method") == "pca") {
        const auto pca = eval::pca_embed(x, 2);
        eval::write_coordinates(pca.coords, set.labels, dir / "coords.csv");
        std::ofstream os(dir / "eigenvalues.csv");
        os.precision(9);
        os << "component,eigenvalue\n";
        for (std::size_t i = 0; i < pca.eigenvalues.size(); ++i) os << i << ',' << pca.eigenvalues[i] << '\n';
        ctx.out << "PCA of " << idx.size() << " representations written\n";
    } else {
        const auto tsne = eval::tsne_embed(x, config::tsne_config(ctx.rc));
        eval::write_coordinates(tsne.coords, set.labels, dir / "coords.csv");
        std::ofstream os(dir / "kl.csv");
        os.precision(9);
        os << "iteration,kl\n";
        for (const auto& [it, kl] : tsne.kl) os << it << ',' << kl << '\n';
        ctx.out << "t-SNE of " << idx.size() << " representations: KL " << tsne.kl.front().second << " -> "
                << tsne.kl.back().second << '\n';
    }
    ctx.rc.write(dir / "resolved.cfg");
    return kOk;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& file) {
    std::ifstream is(file);
    if (!is) throw DataError(file.string() + ": cannot open");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

int cmd_report(Context& ctx) {
    const fs::path dir = ctx.rc.get("io.out");
    if (!fs::is_directory(dir)) throw DataError(dir.string() + ": no such output directory");
    std::ostringstream rep;
    rep << "report for " << dir.string() << '\n';
    bool any = false;
    if (fs::exists(dir / "metrics.csv")) {
        any = true;
        rep << "\nmetrics\n";
        for (const auto& r : read_csv(dir / "metrics.csv")) {
            if (r.size() == 2 && r[0] != "metric") rep << "  " << r[0] << " = " << r[1] << '\n';
        }
    }
    if (fs::exists(dir / "confusion.csv")) {
        any = true;
        rep << "\nconfusion matrix (rows = true class)\n";
        for (const auto& r : read_csv(dir / "confusion.csv")) {
            rep << " ";
            for (const auto& c : r) rep << ' ' << c;
            rep << '\n';
        }
    }
    if (fs::exists(dir / "fewshot.csv")) {
        any = true;
        rep << "\nfew-shot\n";
        for (const auto& r : read_csv(dir / "fewshot.csv")) {
            if (r.size() >= 4 && r[1] == "median") rep << "  k=" << r[0] << " median test ER " << r[3] << '\n';
        }
    }
    if (fs::exists(dir / "loss_curve.csv")) {
        any = true;
        const auto rows = read_csv(dir / "loss_curve.csv");
        if (rows.size() > 1) {
            rep << "\npre-training loss: epoch " << rows[1][0] << " " << rows[1][1] << " -> epoch " << rows.back()[0]
                << " " << rows.back()[1] << '\n';
        }
    }
    if (fs::exists(dir / "sweep.csv")) {
        any = true;
        std::string axis;
        std::map<std::string, std::pair<double, double>> med;
        std::vector<std::string> order;
        for (const auto& r : read_csv(dir / "sweep.csv")) {
            if (r.size() == 5 && r[2] == "median") {
                axis = r[0];
                med[r[1]] = {std::stod(r[3]), std::stod(r[4])};
                order.push_back(r[1]);
            }
        }
        rep << "\nablation over " << axis << " (median probe ER / median fine-tune ER)\n";
        for (const auto& v : order) rep << "  " << v << ": " << med[v].first << " / " << med[v].second << '\n';
        if (axis == "mask-strategy" && med.count("random")) {
            bool ok = true;
            for (const auto& [v, m] : med) ok = ok && med["random"].second <= m.second;
            rep << "  random <= every axis strategy (fine-tune): " << (ok ? "trend reproduced" : "trend not reproduced")
                << '\n';
        }
        if (axis == "stage1" && med.count("on") && med.count("off")) {
            rep << "  stage-1 then stage-2 <= scratch (probe): "
                << (med["on"].first <= med["off"].first ? "trend reproduced" : "trend not reproduced") << '\n';
        }
    }
    if (!any) throw DataError(dir.string() + ": no metrics, few-shot, loss or sweep files to report");
    std::ofstream(dir / "report.txt") << rep.str();
    ctx.out << rep.str();
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Masked-autoencoder lab for DAS waterfall plots"};
    app.require_subcommand(1);
    std::string config_file;
    std::vector<std::string> sets;
    using Handler = std::function<int(Context&)>;
    const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
        {"gen", "generate a synthetic labeled dataset", cmd_gen},
        {"preprocess", "cache STFT tensors of a dataset", cmd_preprocess},
        {"pretrain", "masked-reconstruction pre-training", cmd_pretrain},
        {"probe", "linear probe on a frozen encoder", cmd_probe},
        {"finetune", "probe, then fine-tune encoder and head", cmd_finetune},
        {"fewshot", "linear probe on k labeled samples per class", cmd_fewshot},
        {"ablate", "sweep one axis over seeds", cmd_ablate},
        {"embed", "export PCA or t-SNE coordinates of representations", cmd_embed},
        {"report", "summarize the CSV outputs of a run directory", cmd_report},
    };
    std::map<CLI::App*, Handler> handlers;
    for (const auto& [name, help, fn] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_file, "key=value configuration file");
        sub->add_option("--set", sets, "override one key, e.g. --set train.seed=7")->take_all();
        handlers[sub] = fn;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }
    try {
        Context ctx{RunConfig{}, out};
        if (!config_file.empty()) ctx.rc.load_file(config_file);
        for (const auto& s : sets) ctx.rc.assign(s);
        config::validate(ctx.rc);
        for (auto* sub : app.get_subcommands()) return handlers.at(sub)(ctx);
        return kUsage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n' << app.help();
        return kUsage;
    } catch (const ContractError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const Error& e) {
        err << "data error: " << e.what() << '\n';
        return kData;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return kData;
    }
}

}  // namespace dasmae::cli
