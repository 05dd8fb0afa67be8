#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "qfl/fedcore.hpp"
#include "qfl/rng.hpp"

namespace qfl::runner {

inline constexpr const char* kVersion = "0.1.0";

struct DatasetSpec {
    std::string kind = "mnist";  // mnist | csv | synthetic
    std::string mnist_dir;       // directory with the four IDX files
    std::string csv_train;
    std::string csv_test;
    double test_fraction = 0.2;  // csv split when csv_test is absent
    int feature_dim = 0;         // csv column count before padding
    int synth_train = 5000;
    int synth_test = 1000;
    double separation = 10.0;
    int downsample = 0;          // mean-pool square images to d x d (0 = off)
    std::vector<int> classes;    // optional keep-list, relabelled in order
    int test_cap = 0;            // keep only the first N test rows (0 = all)
};

struct ExperimentConfig {
    DatasetSpec dataset;
    int n_qubits = 10;
    int n_layers = 60;
    std::string task = "multiclass";  // binary | multiclass
    int n_classes = 10;
    int target_dim = 1024;            // must equal 2^n_qubits
    fed::RoundConfig fed;             // fed.strategy is ignored; strategies below
    std::vector<fed::Strategy> strategies;
    std::string out_dir = "out";
    bool record_timing = true;
    std::uint64_t master_seed = 1;
    std::string preset;  // informational, recorded in metadata
};

/// Library defaults plus environment: QFL_OUT_DIR seeds out_dir and
/// QFL_MNIST_DIR seeds dataset.mnist_dir when set.
ExperimentConfig default_config();

/// Named experiment presets: mnist-paper (alias mnist), mnist-small,
/// binary-paper (alias binary), binary-small.
void apply_preset(ExperimentConfig& config, const std::string& name);

/// Applies one documented "key = value" setting; unknown keys throw.
void apply_setting(ExperimentConfig& config, const std::string& key,
                   const std::string& value);

/// Precedence, lowest to highest: defaults, environment, preset, config file,
/// explicit overrides (CLI flags).
ExperimentConfig parse_config(const std::string& preset, const std::string& file_path,
                              const std::vector<std::pair<std::string, std::string>>&
                                  overrides);

/// Full invariant check; throws with a message naming the violated rule.
void validate(const ExperimentConfig& config);

struct StrategyOutcome {
    fed::Strategy strategy = fed::Strategy::fedavg;
    std::vector<fed::RoundReport> reports;
    fed::EvalResult final_eval;
};

/// Runs every configured strategy over shared partitions, initial parameters
/// and client-sampling streams, then writes per-strategy metrics CSV,
/// confusion CSV and run metadata under out_dir. Returns the in-memory
/// outcomes as well.
std::vector<StrategyOutcome> run_experiment(const ExperimentConfig& config,
                                            std::ostream* log = nullptr);

}  // namespace qfl::runner
