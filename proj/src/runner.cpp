#include "qfl/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace qfl::runner {

namespace {

namespace fs = std::filesystem;

bool is_power_of_two(int x) { return x > 0 && (x & (x - 1)) == 0; }

long parse_long(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const long v = std::strtol(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0')
        throw std::invalid_argument("config key '" + key + "': expected integer, got '" +
                                    value + "'");
    return v;
}

double parse_double(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
        throw std::invalid_argument("config key '" + key + "': expected number, got '" +
                                    value + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "on" || value == "true" || value == "1") return true;
    if (value == "off" || value == "false" || value == "0") return false;
    throw std::invalid_argument("config key '" + key + "': expected on/off, got '" +
                                value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        while (!item.empty() && item.front() == ' ') item.erase(item.begin());
        while (!item.empty() && item.back() == ' ') item.pop_back();
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string strategies_to_string(const std::vector<fed::Strategy>& strategies) {
    std::string s;
    for (std::size_t i = 0; i < strategies.size(); ++i) {
        if (i) s += ",";
        s += fed::to_string(strategies[i]);
    }
    return s;
}

data::Dataset load_raw_train(const DatasetSpec& spec, int n_classes,
                             std::uint64_t master_seed, data::Dataset* test_out) {
    if (spec.kind == "mnist") {
        if (spec.mnist_dir.empty())
            throw std::invalid_argument(
                "dataset mnist requires mnist_dir (or QFL_MNIST_DIR)");
        const fs::path dir(spec.mnist_dir);
        data::Dataset train =
            data::load_mnist_idx((dir / "train-images-idx3-ubyte").string(),
                                 (dir / "train-labels-idx1-ubyte").string());
        *test_out = data::load_mnist_idx((dir / "t10k-images-idx3-ubyte").string(),
                                         (dir / "t10k-labels-idx1-ubyte").string());
        return train;
    }
    if (spec.kind == "csv") {
        if (spec.csv_train.empty())
            throw std::invalid_argument("dataset csv requires csv_train");
        if (spec.feature_dim <= 0)
            throw std::invalid_argument("dataset csv requires feature_dim");
        data::Dataset all =
            data::load_feature_csv(spec.csv_train, spec.feature_dim, n_classes);
        if (!spec.csv_test.empty()) {
            *test_out =
                data::load_feature_csv(spec.csv_test, spec.feature_dim, n_classes);
            return all;
        }
        const int n_train = int(double(all.n_samples) * (1.0 - spec.test_fraction));
        auto [train, test] = data::split_at(all, n_train);
        *test_out = std::move(test);
        return train;
    }
    if (spec.kind == "synthetic") {
        data::Dataset all =
            data::synthesize_binary(spec.synth_train + spec.synth_test,
                                    spec.feature_dim, spec.separation, master_seed);
        auto [train, test] = data::split_at(all, spec.synth_train);
        *test_out = std::move(test);
        return train;
    }
    throw std::invalid_argument("unknown dataset kind '" + spec.kind + "'");
}

}  // namespace

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.fed.n_clients = 100;
    cfg.fed.participation_fraction = 0.05;
    cfg.fed.local_epochs = 1;
    cfg.fed.batch_size = 32;
    cfg.fed.local_lr = 1e-3;
    cfg.fed.fisher_threshold = 0.01;
    cfg.fed.dirichlet_alpha = 0.5;
    cfg.fed.samples_per_client = 500;
    cfg.fed.client_retention = false;
    cfg.fed.rounds = 300;
    cfg.fed.server_lr = 1e-2;
    cfg.fed.threads = 1;
    cfg.strategies = {fed::Strategy::fedavg, fed::Strategy::fedadam,
                      fed::Strategy::fedfisher};
    if (const char* env = std::getenv("QFL_OUT_DIR")) cfg.out_dir = env;
    if (const char* env = std::getenv("QFL_MNIST_DIR")) cfg.dataset.mnist_dir = env;
    return cfg;
}

void apply_preset(ExperimentConfig& cfg, const std::string& name) {
    cfg.preset = name;
    if (name == "mnist" || name == "mnist-paper") {
        cfg.dataset.kind = "mnist";
        cfg.n_qubits = 10;
        cfg.n_layers = 60;
        cfg.task = "multiclass";
        cfg.n_classes = 10;
        cfg.target_dim = 1024;
        cfg.fed.n_clients = 100;
        cfg.fed.participation_fraction = 0.05;
        cfg.fed.dirichlet_alpha = 0.5;
        cfg.fed.samples_per_client = 500;
        cfg.fed.rounds = 300;
        return;
    }
    if (name == "mnist-small") {
        cfg.dataset.kind = "mnist";
        cfg.dataset.downsample = 8;
        cfg.dataset.classes = {0, 1, 2, 3};
        cfg.dataset.test_cap = 1000;
        cfg.n_qubits = 6;
        cfg.n_layers = 20;
        cfg.task = "multiclass";
        cfg.n_classes = 4;
        cfg.target_dim = 64;
        cfg.fed.n_clients = 20;
        cfg.fed.participation_fraction = 0.25;
        cfg.fed.dirichlet_alpha = 0.5;
        cfg.fed.samples_per_client = 200;
        cfg.fed.rounds = 40;
        return;
    }
    if (name == "binary" || name == "binary-paper") {
        cfg.dataset.kind = "synthetic";
        cfg.dataset.feature_dim = 2048;
        cfg.dataset.separation = 10.0;
        cfg.dataset.synth_train = 5000;
        cfg.dataset.synth_test = 1000;
        cfg.n_qubits = 11;
        cfg.n_layers = 60;
        cfg.task = "binary";
        cfg.n_classes = 2;
        cfg.target_dim = 2048;
        cfg.fed.n_clients = 10;
        cfg.fed.participation_fraction = 1.0;
        cfg.fed.dirichlet_alpha = 0.1;
        cfg.fed.samples_per_client = 500;
        cfg.fed.rounds = 100;
        return;
    }
    if (name == "binary-small") {
        cfg.dataset.kind = "synthetic";
        cfg.dataset.feature_dim = 16;
        cfg.dataset.separation = 10.0;
        cfg.dataset.synth_train = 5000;
        cfg.dataset.synth_test = 1000;
        cfg.n_qubits = 4;
        cfg.n_layers = 20;
        cfg.task = "binary";
        cfg.n_classes = 2;
        cfg.target_dim = 16;
        cfg.fed.n_clients = 10;
        cfg.fed.participation_fraction = 1.0;
        cfg.fed.dirichlet_alpha = 0.1;
        cfg.fed.samples_per_client = 500;
        cfg.fed.rounds = 20;
        return;
    }
    throw std::invalid_argument("unknown preset '" + name +
                                "' (mnist, mnist-paper, mnist-small, binary, "
                                "binary-paper, binary-small)");
}

void apply_setting(ExperimentConfig& cfg, const std::string& key,
                   const std::string& value) {
    if (key == "dataset") cfg.dataset.kind = value;
    else if (key == "mnist_dir") cfg.dataset.mnist_dir = value;
    else if (key == "csv_train") cfg.dataset.csv_train = value;
    else if (key == "csv_test") cfg.dataset.csv_test = value;
    else if (key == "test_fraction") cfg.dataset.test_fraction = parse_double(key, value);
    else if (key == "feature_dim") cfg.dataset.feature_dim = int(parse_long(key, value));
    else if (key == "synth_train") cfg.dataset.synth_train = int(parse_long(key, value));
    else if (key == "synth_test") cfg.dataset.synth_test = int(parse_long(key, value));
    else if (key == "separation") cfg.dataset.separation = parse_double(key, value);
    else if (key == "downsample") cfg.dataset.downsample = int(parse_long(key, value));
    else if (key == "classes") {
        cfg.dataset.classes.clear();
        for (const std::string& c : split_list(value))
            cfg.dataset.classes.push_back(int(parse_long(key, c)));
    } else if (key == "test_cap") cfg.dataset.test_cap = int(parse_long(key, value));
    else if (key == "n_qubits") cfg.n_qubits = int(parse_long(key, value));
    else if (key == "n_layers") cfg.n_layers = int(parse_long(key, value));
    else if (key == "task") cfg.task = value;
    else if (key == "n_classes") cfg.n_classes = int(parse_long(key, value));
    else if (key == "target_dim") cfg.target_dim = int(parse_long(key, value));
    else if (key == "n_clients") cfg.fed.n_clients = int(parse_long(key, value));
    else if (key == "participation")
        cfg.fed.participation_fraction = parse_double(key, value);
    else if (key == "epochs") cfg.fed.local_epochs = int(parse_long(key, value));
    else if (key == "batch_size") cfg.fed.batch_size = int(parse_long(key, value));
    else if (key == "lr") cfg.fed.local_lr = parse_double(key, value);
    else if (key == "server_lr") cfg.fed.server_lr = parse_double(key, value);
    else if (key == "delta") cfg.fed.fisher_threshold = parse_double(key, value);
    else if (key == "alpha") cfg.fed.dirichlet_alpha = parse_double(key, value);
    else if (key == "samples_per_client")
        cfg.fed.samples_per_client = int(parse_long(key, value));
    else if (key == "retention") cfg.fed.client_retention = parse_bool(key, value);
    else if (key == "fisher_mode") {
        if (value == "per_sample") cfg.fed.fisher_mode = vqc::FisherMode::per_sample;
        else if (value == "per_batch") cfg.fed.fisher_mode = vqc::FisherMode::per_batch;
        else
            throw std::invalid_argument(
                "config key 'fisher_mode': expected per_sample or per_batch");
    } else if (key == "rounds") cfg.fed.rounds = int(parse_long(key, value));
    else if (key == "strategies") {
        cfg.strategies.clear();
        for (const std::string& s : split_list(value))
            cfg.strategies.push_back(fed::strategy_from_string(s));
    } else if (key == "seed")
        cfg.master_seed = std::uint64_t(parse_long(key, value));
    else if (key == "threads") cfg.fed.threads = int(parse_long(key, value));
    else if (key == "out") cfg.out_dir = value;
    else if (key == "timing") cfg.record_timing = parse_bool(key, value);
    else
        throw std::invalid_argument("unknown config key '" + key + "'");
}

ExperimentConfig parse_config(
    const std::string& preset, const std::string& file_path,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
    ExperimentConfig cfg = default_config();
    if (!preset.empty()) apply_preset(cfg, preset);
    if (!file_path.empty()) {
        std::ifstream in(file_path);
        if (!in) throw std::runtime_error("cannot open config file " + file_path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string stripped = trim(line);
            if (stripped.empty() || stripped[0] == '#') continue;
            const std::size_t eq = stripped.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error(file_path + " line " + std::to_string(line_no) +
                                         ": expected 'key = value'");
            try {
                apply_setting(cfg, trim(stripped.substr(0, eq)),
                              trim(stripped.substr(eq + 1)));
            } catch (const std::exception& e) {
                throw std::runtime_error(file_path + " line " + std::to_string(line_no) +
                                         ": " + e.what());
            }
        }
    }
    for (const auto& [key, value] : overrides) apply_setting(cfg, key, value);
    validate(cfg);
    return cfg;
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.n_qubits < 1 || cfg.n_qubits > 24)
        throw std::invalid_argument("n_qubits must be in [1, 24]");
    if (cfg.n_layers < 1) throw std::invalid_argument("n_layers must be >= 1");
    if (!is_power_of_two(cfg.target_dim))
        throw std::invalid_argument("target_dim must be a power of two");
    if (cfg.target_dim != (1 << cfg.n_qubits))
        throw std::invalid_argument("target_dim " + std::to_string(cfg.target_dim) +
                                    " inconsistent with n_qubits " +
                                    std::to_string(cfg.n_qubits) + " (expected " +
                                    std::to_string(1 << cfg.n_qubits) + ")");
    if (cfg.task == "binary") {
        if (cfg.n_classes != 2)
            throw std::invalid_argument("binary task requires n_classes = 2");
    } else if (cfg.task == "multiclass") {
        if (cfg.n_classes < 2)
            throw std::invalid_argument("multiclass requires n_classes >= 2");
        if (cfg.n_classes > cfg.n_qubits)
            throw std::invalid_argument("multiclass readout requires n_classes <= "
                                        "n_qubits");
    } else {
        throw std::invalid_argument("task must be binary or multiclass, got '" +
                                    cfg.task + "'");
    }
    if (cfg.fed.n_clients < 1) throw std::invalid_argument("n_clients must be >= 1");
    if (cfg.fed.participation_fraction <= 0.0 || cfg.fed.participation_fraction > 1.0)
        throw std::invalid_argument("participation must be in (0, 1]");
    if (cfg.fed.local_epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (cfg.fed.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (cfg.fed.fisher_threshold < 0.0)
        throw std::invalid_argument("delta must be >= 0");
    if (cfg.fed.dirichlet_alpha <= 0.0)
        throw std::invalid_argument("alpha must be > 0");
    if (cfg.fed.samples_per_client < 1)
        throw std::invalid_argument("samples_per_client must be >= 1");
    if (cfg.fed.rounds < 1) throw std::invalid_argument("rounds must be >= 1");
    if (cfg.fed.threads < 1) throw std::invalid_argument("threads must be >= 1");
    if (cfg.strategies.empty())
        throw std::invalid_argument("at least one strategy is required");
    if (cfg.dataset.kind != "mnist" && cfg.dataset.kind != "csv" &&
        cfg.dataset.kind != "synthetic")
        throw std::invalid_argument("dataset must be mnist, csv or synthetic");
    if (cfg.dataset.kind == "synthetic" && cfg.dataset.feature_dim != cfg.target_dim)
        throw std::invalid_argument("synthetic feature_dim must equal target_dim");
}

namespace {

void write_metrics_csv(const fs::path& path, const std::vector<fed::RoundReport>& rows,
                       bool record_timing) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "round,test_accuracy,test_loss,mean_client_train_loss,substituted_count,"
           "wall_time_s\n";
    for (const fed::RoundReport& r : rows) {
        out << r.round << ',' << format_double(r.test_accuracy) << ','
            << format_double(r.test_loss) << ','
            << format_double(r.mean_client_train_loss) << ',' << r.substituted_count
            << ',' << format_double(record_timing ? r.wall_time_s : 0.0) << '\n';
    }
}

void write_confusion_csv(const fs::path& path, const fed::EvalResult& eval) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const int k = int(eval.confusion.size());
    out << "actual";
    for (int j = 0; j < k; ++j) out << ",pred_" << j;
    out << '\n';
    for (int i = 0; i < k; ++i) {
        out << i;
        for (int j = 0; j < k; ++j) out << ',' << eval.confusion[i][j];
        out << '\n';
    }
}

void write_metadata(const fs::path& path, const ExperimentConfig& cfg,
                    fed::Strategy strategy, const StrategyOutcome& outcome,
                    int train_size, int test_size) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    double total_wall = 0.0, total_client = 0.0;
    for (const fed::RoundReport& r : outcome.reports) {
        total_wall += r.wall_time_s;
        total_client += r.client_time_s;
    }
    out << "version = " << kVersion << '\n';
    out << "strategy = " << fed::to_string(strategy) << '\n';
    out << "preset = " << (cfg.preset.empty() ? "none" : cfg.preset) << '\n';
    out << "seed = " << cfg.master_seed << '\n';
    out << "dataset = " << cfg.dataset.kind << '\n';
    out << "n_qubits = " << cfg.n_qubits << '\n';
    out << "n_layers = " << cfg.n_layers << '\n';
    out << "task = " << cfg.task << '\n';
    out << "n_classes = " << cfg.n_classes << '\n';
    out << "target_dim = " << cfg.target_dim << '\n';
    out << "n_clients = " << cfg.fed.n_clients << '\n';
    out << "participation = " << format_double(cfg.fed.participation_fraction) << '\n';
    out << "epochs = " << cfg.fed.local_epochs << '\n';
    out << "batch_size = " << cfg.fed.batch_size << '\n';
    out << "lr = " << format_double(cfg.fed.local_lr) << '\n';
    out << "server_lr = " << format_double(cfg.fed.server_lr) << '\n';
    out << "delta = " << format_double(cfg.fed.fisher_threshold) << '\n';
    out << "alpha = " << format_double(cfg.fed.dirichlet_alpha) << '\n';
    out << "samples_per_client = " << cfg.fed.samples_per_client << '\n';
    out << "retention = " << (cfg.fed.client_retention ? "on" : "off") << '\n';
    out << "rounds = " << cfg.fed.rounds << '\n';
    out << "threads = " << cfg.fed.threads << '\n';
    out << "strategies = " << strategies_to_string(cfg.strategies) << '\n';
    out << "train_size = " << train_size << '\n';
    out << "test_size = " << test_size << '\n';
    out << "rounds_completed = " << outcome.reports.size() << '\n';
    if (!outcome.reports.empty()) {
        out << "final_test_accuracy = "
            << format_double(outcome.reports.back().test_accuracy) << '\n';
        out << "final_test_loss = " << format_double(outcome.reports.back().test_loss)
            << '\n';
    }
    out << "total_wall_time_s = "
        << format_double(cfg.record_timing ? total_wall : 0.0) << '\n';
    out << "total_client_time_s = "
        << format_double(cfg.record_timing ? total_client : 0.0) << '\n';
}

}  // namespace

std::vector<StrategyOutcome> run_experiment(const ExperimentConfig& cfg,
                                            std::ostream* log) {
    validate(cfg);

    // Before any class filter the raw label range may be wider than n_classes.
    int raw_classes = cfg.n_classes;
    for (int c : cfg.dataset.classes) raw_classes = std::max(raw_classes, c + 1);

    data::Dataset raw_test;
    data::Dataset raw_train =
        load_raw_train(cfg.dataset, raw_classes, cfg.master_seed, &raw_test);
    auto transform = [&](data::Dataset d) {
        if (!cfg.dataset.classes.empty()) d = data::filter_classes(d, cfg.dataset.classes);
        if (cfg.dataset.downsample > 0) {
            const int side = int(std::sqrt(double(d.feature_dim)));
            d = data::downsample_images(d, side, side, cfg.dataset.downsample,
                                        cfg.dataset.downsample);
        }
        return data::prepare_for_encoding(d, cfg.target_dim);
    };
    const data::Dataset train = transform(std::move(raw_train));
    data::Dataset test = transform(std::move(raw_test));
    if (cfg.dataset.test_cap > 0 && test.n_samples > cfg.dataset.test_cap)
        test = data::split_at(test, cfg.dataset.test_cap).first;
    test.split = data::Split::test;

    const sim::CircuitLayout layout{cfg.n_qubits, cfg.n_layers};
    const vqc::Task task = cfg.task == "binary" ? vqc::Task::binary()
                                                : vqc::Task::multiclass(cfg.n_classes);

    // Shared across strategies so curves differ only by aggregation rule.
    const auto partitions =
        fed::dirichlet_partition(train, cfg.fed.n_clients, cfg.fed.dirichlet_alpha,
                                 cfg.fed.samples_per_client,
                                 derive_seed(cfg.master_seed, 0, 0, "partition"));
    const vqc::ParameterVector initial =
        fed::kaiming_init(layout, derive_seed(cfg.master_seed, 0, 0, "init"));

    fs::create_directories(cfg.out_dir);

    std::vector<StrategyOutcome> outcomes;
    for (const fed::Strategy strategy : cfg.strategies) {
        fed::RoundConfig round_cfg = cfg.fed;
        round_cfg.strategy = strategy;
        round_cfg.seed = cfg.master_seed;

        std::vector<fed::ClientRecord> clients(cfg.fed.n_clients);
        for (int id = 0; id < cfg.fed.n_clients; ++id) {
            clients[id].client_id = id;
            clients[id].partition = partitions[id];
            clients[id].params = initial;
            clients[id].fisher = vqc::FisherVector(layout);
            clients[id].seed = derive_seed(cfg.master_seed, 0, std::uint64_t(id),
                                           "client");
        }
        fed::GlobalModel global;
        global.params = initial;

        StrategyOutcome outcome;
        outcome.strategy = strategy;
        for (int r = 0; r < cfg.fed.rounds; ++r) {
            const fed::RoundReport report =
                fed::run_round(global, clients, train, test, layout, task, round_cfg);
            outcome.reports.push_back(report);
            if (log)
                *log << fed::to_string(strategy) << " round " << report.round << "/"
                     << cfg.fed.rounds << "  acc=" << format_double(report.test_accuracy)
                     << "  loss=" << format_double(report.test_loss)
                     << "  substituted=" << report.substituted_count << '\n';
        }
        outcome.final_eval = fed::evaluate(layout, global.params, task, test);

        const std::string tag = fed::to_string(strategy);
        const fs::path dir(cfg.out_dir);
        write_metrics_csv(dir / ("metrics_" + tag + ".csv"), outcome.reports,
                          cfg.record_timing);
        write_confusion_csv(dir / ("confusion_" + tag + ".csv"), outcome.final_eval);
        write_metadata(dir / ("meta_" + tag + ".txt"), cfg, strategy, outcome,
                       train.n_samples, test.n_samples);
        outcomes.push_back(std::move(outcome));
    }
    return outcomes;
}

}  // namespace qfl::runner
