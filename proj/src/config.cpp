#include "dasmae/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dasmae/errors.hpp"

namespace dasmae::config {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::uint64_t parse_unsigned(const std::string& s, const std::string& key) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw UsageError(key + ": expected an unsigned integer, got '" + s + "'");
    }
    return v;
}

template <typename Fn>
auto as_usage(const std::string& what, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const UsageError&) {
        throw;
    } catch (const ContractError& e) {
        throw UsageError(what + ": " + e.what());
    }
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& RunConfig::defaults() {
    static const std::vector<std::pair<std::string, std::string>> table = {
        {"data.classes", "benchmark"},
        {"data.counts", ""},
        {"data.channels", "12"},
        {"data.samples", "10000"},
        {"data.sample_rate", "200"},
        {"data.split", "0.8"},
        {"data.seed", "1"},
        {"data.noise_sigma", "0.1"},
        {"data.gauge_length", "1"},
        {"stft.window", "104"},
        {"stft.hop", "104"},
        {"stft.nfft", "192"},
        {"stft.format", "magnitude"},
        {"stft.normalize", "log_zscore"},
        {"tubes.cp", "2"},
        {"tubes.tp", "16"},
        {"tubes.fp", "16"},
        {"tubes.ratio", "0.9"},
        {"tubes.strategy", "random"},
        {"model.de", "384"},
        {"model.le", "12"},
        {"model.he", "6"},
        {"model.dd", "192"},
        {"model.ld", "4"},
        {"model.hd", "3"},
        {"model.mlp_ratio", "4"},
        {"model.seed", "0"},
        {"train.batch", "64"},
        {"train.epochs", "500"},
        {"train.lr", "1e-3"},
        {"train.warmup", "40"},
        {"train.wd", "0.05"},
        {"train.seed", "0"},
        {"train.stage", "scratch"},
        {"train.normalize_targets", "per_tube"},
        {"eval.k_per_class", "15"},
        {"eval.seeds", "1,2,3"},
        {"eval.probe.epochs", "100"},
        {"eval.probe.batch", "64"},
        {"eval.probe.lr", "1e-2"},
        {"eval.probe.wd", "1e-4"},
        {"eval.finetune.epochs", "50"},
        {"eval.finetune.batch", "32"},
        {"eval.finetune.lr", "1e-5"},
        {"eval.finetune.warmup", "4"},
        {"eval.finetune.wd", "0.05"},
        {"eval.ablate.axis", "mask-strategy"},
        {"eval.ablate.values", ""},
        {"eval.ablate.stage1_epochs", "100"},
        {"eval.ablate.finetune", "true"},
        {"eval.embed.method", "tsne"},
        {"eval.embed.split", "test"},
        {"eval.tsne.perplexity", "40"},
        {"eval.tsne.learning_rate", "2000"},
        {"eval.tsne.iterations", "500"},
        {"eval.tsne.seed", "0"},
        {"io.data", "data"},
        {"io.out", "out"},
        {"io.checkpoint", ""},
        {"io.init", ""},
    };
    return table;
}

RunConfig::RunConfig() {
    for (const auto& [k, v] : defaults()) values_[k] = v;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("unknown configuration key '" + key + "'");
    it->second = value;
}

void RunConfig::assign(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw UsageError("expected key=value, got '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::load_file(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) throw DataError(file.string() + ": cannot open configuration file");
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        try {
            assign(line);
        } catch (const UsageError& e) {
            throw UsageError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("unknown configuration key '" + key + "'");
    return it->second;
}

double RunConfig::real(const std::string& key) const {
    const auto& s = get(key);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || used != s.size()) throw UsageError(key + ": expected a number, got '" + s + "'");
    return v;
}

std::int64_t RunConfig::integer(const std::string& key) const {
    const auto& s = get(key);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw UsageError(key + ": expected an integer, got '" + s + "'");
    }
    return v;
}

std::uint32_t RunConfig::count(const std::string& key) const {
    const auto v = integer(key);
    if (v < 0 || v > 0xFFFFFFFFLL) throw UsageError(key + ": expected a non-negative integer");
    return static_cast<std::uint32_t>(v);
}

std::uint64_t RunConfig::seed(const std::string& key) const { return parse_unsigned(get(key), key); }

std::vector<std::string> RunConfig::list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string RunConfig::text() const {
    std::string out;
    for (const auto& [k, v] : defaults()) out += k + " = " + values_.at(k) + "\n";
    return out;
}

void RunConfig::write(const std::filesystem::path& file) const {
    std::ofstream os(file);
    if (!os) throw DataError(file.string() + ": cannot open for writing");
    os << text();
}

gen::DatasetConfig dataset_config(const RunConfig& rc) {
    gen::DatasetConfig c;
    c.preset = rc.get("data.classes");
    if (c.preset != "benchmark" && c.preset != "field") {
        throw UsageError("data.classes: expected benchmark or field, got '" + c.preset + "'");
    }
    c.channels = rc.count("data.channels");
    c.samples = rc.count("data.samples");
    c.sample_rate = rc.real("data.sample_rate");
    c.train_fraction = rc.real("data.split");
    c.seed = rc.seed("data.seed");
    c.noise_sigma = rc.real("data.noise_sigma");
    c.gauge_length_m = rc.real("data.gauge_length");
    if (c.channels == 0 || c.samples == 0 || !(c.sample_rate > 0.0)) {
        throw UsageError("data: channels, samples and sample_rate must be positive");
    }
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw UsageError("data.split must lie in (0, 1)");
    if (c.noise_sigma < 0.0 || !(c.gauge_length_m > 0.0)) throw UsageError("data: bad noise sigma or gauge length");
    const auto counts = rc.list("data.counts");
    const auto names = c.preset == "field" ? gen::field_class_names() : gen::benchmark_class_names();
    auto to_count = [](const std::string& s) {
        const auto v = parse_unsigned(s, "data.counts");
        if (v > 0xFFFFFFFFULL) throw UsageError("data.counts: value too large");
        return static_cast<std::uint32_t>(v);
    };
    if (counts.size() == 1) {
        c.counts.assign(names.size(), to_count(counts[0]));
    } else if (!counts.empty()) {
        if (counts.size() != names.size()) {
            throw UsageError("data.counts: " + std::to_string(counts.size()) + " counts for " +
                             std::to_string(names.size()) + " classes");
        }
        for (const auto& s : counts) c.counts.push_back(to_count(s));
    }
    return as_usage("data", [&] { return gen::resolve_preset(c); });
}

stft::StftConfig stft_config(const RunConfig& rc) {
    stft::StftConfig c;
    c.window = rc.count("stft.window");
    c.hop = rc.count("stft.hop");
    c.nfft = rc.count("stft.nfft");
    c.format = as_usage("stft.format", [&] { return stft::parse_format(rc.get("stft.format")); });
    c.normalization = as_usage("stft.normalize", [&] { return stft::parse_normalization(rc.get("stft.normalize")); });
    as_usage("stft", [&] { stft::validate(c); });
    return c;
}

model::ModelConfig model_config(const RunConfig& rc) {
    model::ModelConfig c;
    c.cp = rc.count("tubes.cp");
    c.tp = rc.count("tubes.tp");
    c.fp = rc.count("tubes.fp");
    c.di = stft::plane_count(stft_config(rc).format);
    c.de = rc.count("model.de");
    c.le = rc.count("model.le");
    c.he = rc.count("model.he");
    c.dd = rc.count("model.dd");
    c.ld = rc.count("model.ld");
    c.hd = rc.count("model.hd");
    c.mlp_ratio = rc.count("model.mlp_ratio");
    as_usage("model", [&] { model::validate(c); });
    return c;
}

pipeline::TrainConfig train_config(const RunConfig& rc) {
    pipeline::TrainConfig c;
    c.batch = rc.count("train.batch");
    c.epochs = rc.count("train.epochs");
    if (c.batch == 0 || c.epochs == 0) throw UsageError("train.batch and train.epochs must be positive");
    c.schedule.peak_lr = rc.real("train.lr");
    c.schedule.warmup_epochs = static_cast<int>(rc.count("train.warmup"));
    c.schedule.total_epochs = static_cast<int>(c.epochs);
    c.optimizer.lr = c.schedule.peak_lr;
    c.optimizer.weight_decay = rc.real("train.wd");
    c.mask_ratio = rc.real("tubes.ratio");
    if (!(c.mask_ratio > 0.0 && c.mask_ratio < 1.0)) {
        throw UsageError("tubes.ratio must lie in (0, 1), got " + rc.get("tubes.ratio"));
    }
    c.strategy = as_usage("tubes.strategy", [&] { return tubes::parse_strategy(rc.get("tubes.strategy")); });
    c.seed = rc.seed("train.seed");
    c.target_norm = as_usage("train.normalize_targets",
                             [&] { return pipeline::parse_target_norm(rc.get("train.normalize_targets")); });
    c.stage = as_usage("train.stage", [&] { return pipeline::parse_stage(rc.get("train.stage")); });
    if (c.optimizer.weight_decay < 0.0) throw UsageError("train.wd must be non-negative");
    as_usage("train", [&] { num::validate(c.schedule); });
    return c;
}

eval::ProbeConfig probe_config(const RunConfig& rc) {
    eval::ProbeConfig c;
    c.epochs = rc.count("eval.probe.epochs");
    c.batch = rc.count("eval.probe.batch");
    if (c.epochs == 0 || c.batch == 0) throw UsageError("eval.probe.epochs and eval.probe.batch must be positive");
    c.schedule.peak_lr = rc.real("eval.probe.lr");
    c.schedule.total_epochs = static_cast<int>(c.epochs);
    c.schedule.warmup_epochs = std::min(c.schedule.warmup_epochs, c.schedule.total_epochs - 1);
    c.optimizer.lr = c.schedule.peak_lr;
    c.optimizer.weight_decay = rc.real("eval.probe.wd");
    as_usage("eval.probe", [&] { num::validate(c.schedule); });
    return c;
}

eval::FineTuneConfig finetune_config(const RunConfig& rc) {
    eval::FineTuneConfig c;
    c.epochs = rc.count("eval.finetune.epochs");
    c.batch = rc.count("eval.finetune.batch");
    if (c.epochs == 0 || c.batch == 0) throw UsageError("eval.finetune.epochs and eval.finetune.batch must be positive");
    c.schedule.peak_lr = rc.real("eval.finetune.lr");
    c.schedule.warmup_epochs = static_cast<int>(rc.count("eval.finetune.warmup"));
    c.schedule.total_epochs = static_cast<int>(c.epochs);
    c.optimizer.lr = c.schedule.peak_lr;
    c.optimizer.weight_decay = rc.real("eval.finetune.wd");
    as_usage("eval.finetune", [&] { num::validate(c.schedule); });
    return c;
}

eval::TsneConfig tsne_config(const RunConfig& rc) {
    eval::TsneConfig c;
    c.perplexity = rc.real("eval.tsne.perplexity");
    c.learning_rate = rc.real("eval.tsne.learning_rate");
    c.iterations = rc.count("eval.tsne.iterations");
    c.seed = rc.seed("eval.tsne.seed");
    if (!(c.perplexity > 0.0) || !(c.learning_rate > 0.0) || c.iterations == 0) {
        throw UsageError("eval.tsne: perplexity, learning rate and iterations must be positive");
    }
    return c;
}

eval::ExperimentConfig experiment_config(const RunConfig& rc) {
    eval::ExperimentConfig c;
    c.stft = stft_config(rc);
    c.cp = rc.count("tubes.cp");
    c.tp = rc.count("tubes.tp");
    c.fp = rc.count("tubes.fp");
    c.model = model_config(rc);
    c.train = train_config(rc);
    c.probe = probe_config(rc);
    c.finetune = finetune_config(rc);
    const auto& ft = rc.get("eval.ablate.finetune");
    if (ft != "true" && ft != "false") throw UsageError("eval.ablate.finetune: expected true or false");
    c.run_finetune = ft == "true";
    c.stage1 = c.train.stage == pipeline::Stage::stage1_video;
    c.stage1_epochs = rc.count("eval.ablate.stage1_epochs");
    if (c.stage1_epochs == 0) throw UsageError("eval.ablate.stage1_epochs must be positive");
    return c;
}

std::vector<std::uint64_t> seeds(const RunConfig& rc) {
    std::vector<std::uint64_t> out;
    for (const auto& s : rc.list("eval.seeds")) out.push_back(parse_unsigned(s, "eval.seeds"));
    if (out.empty()) throw UsageError("eval.seeds: need at least one seed");
    return out;
}

void validate(const RunConfig& rc) {
    dataset_config(rc);
    experiment_config(rc);
    tsne_config(rc);
    seeds(rc);
    if (rc.count("eval.k_per_class") == 0) throw UsageError("eval.k_per_class must be positive");
    as_usage("eval.ablate.axis", [&] { return eval::parse_axis(rc.get("eval.ablate.axis")); });
    const auto& method = rc.get("eval.embed.method");
    if (method != "tsne" && method != "pca") throw UsageError("eval.embed.method: expected tsne or pca");
    const auto& split = rc.get("eval.embed.split");
    if (split != "train" && split != "test" && split != "all") {
        throw UsageError("eval.embed.split: expected train, test or all");
    }
}

}  // namespace dasmae::config
