#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dasmae/eval.hpp"

namespace dasmae::config {

/// Flat key=value run configuration with dotted keys. Only keys present in
/// the default table are accepted.
class RunConfig {
public:
    RunConfig();

    static const std::vector<std::pair<std::string, std::string>>& defaults();

    bool known(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value);
    /// "key=value"
    void assign(const std::string& assignment);
    /// One assignment per line; blank lines and '#' comments are skipped.
    void load_file(const std::filesystem::path& file);

    const std::string& get(const std::string& key) const;
    double real(const std::string& key) const;
    std::int64_t integer(const std::string& key) const;
    std::uint32_t count(const std::string& key) const;
    std::uint64_t seed(const std::string& key) const;
    std::vector<std::string> list(const std::string& key) const;

    /// Every key in table order, one "key = value" per line.
    std::string text() const;
    void write(const std::filesystem::path& file) const;

private:
    std::map<std::string, std::string> values_;
};

gen::DatasetConfig dataset_config(const RunConfig& rc);
stft::StftConfig stft_config(const RunConfig& rc);
model::ModelConfig model_config(const RunConfig& rc);
pipeline::TrainConfig train_config(const RunConfig& rc);
eval::ProbeConfig probe_config(const RunConfig& rc);
eval::FineTuneConfig finetune_config(const RunConfig& rc);
eval::TsneConfig tsne_config(const RunConfig& rc);
/// Everything an experiment needs; dataset-derived fields are filled later
/// by eval::resolve_experiment.
eval::ExperimentConfig experiment_config(const RunConfig& rc);
std::vector<std::uint64_t> seeds(const RunConfig& rc);

/// Resolves every typed view once; any invalid value raises UsageError.
void validate(const RunConfig& rc);

}  // namespace dasmae::config
