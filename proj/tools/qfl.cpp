#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "qfl/oracles.hpp"
#include "qfl/runner.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string preset;
    std::vector<std::string> strategies;
    int rounds = -1;
    long seed = -1;
    std::string out;
    int threads = -1;
    std::string mnist_dir;
    bool no_timing = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("config", args.config_path, "config file (key = value lines)");
    cmd->add_option("--preset", args.preset,
                    "mnist|mnist-paper|mnist-small|binary|binary-paper|binary-small");
    cmd->add_option("--strategy", args.strategies,
                    "aggregation strategy (repeatable or comma-separated)");
    cmd->add_option("--rounds", args.rounds, "communication rounds");
    cmd->add_option("--seed", args.seed, "master seed");
    cmd->add_option("--out", args.out, "output directory");
    cmd->add_option("--threads", args.threads, "client-training threads per round");
    cmd->add_option("--mnist-dir", args.mnist_dir, "directory with the MNIST IDX files");
    cmd->add_flag("--no-timing", args.no_timing,
                  "write zeros to the timing columns (reproducible artifacts)");
}

qfl::runner::ExperimentConfig build_config(const CommonArgs& args) {
    std::vector<std::pair<std::string, std::string>> overrides;
    if (!args.strategies.empty()) {
        std::string joined;
        for (const std::string& s : args.strategies) {
            if (!joined.empty()) joined += ",";
            joined += s;
        }
        overrides.emplace_back("strategies", joined);
    }
    if (args.rounds != -1) overrides.emplace_back("rounds", std::to_string(args.rounds));
    if (args.seed != -1) overrides.emplace_back("seed", std::to_string(args.seed));
    if (!args.out.empty()) overrides.emplace_back("out", args.out);
    if (args.threads != -1)
        overrides.emplace_back("threads", std::to_string(args.threads));
    if (!args.mnist_dir.empty()) overrides.emplace_back("mnist_dir", args.mnist_dir);
    if (args.no_timing) overrides.emplace_back("timing", "off");
    return qfl::runner::parse_config(args.preset, args.config_path, overrides);
}

/// Exercises the brute-force references on generated vectors so their outputs
/// can be eyeballed or diffed against the production paths.
int run_oracles() {
    using namespace qfl;

    std::printf("gradient oracles (4 qubits, 3 layers, random parameters)\n");
    const sim::CircuitLayout layout{4, 3};
    Rng rng(20240817);
    std::vector<double> params(layout.param_count());
    for (double& p : params) p = rng.normal(0.0, 1.0);
    std::vector<double> input(layout.dim());
    for (double& v : input) v = rng.normal(0.0, 1.0);
    const sim::StateVector state = sim::amplitude_encode(input);
    const sim::ZObservable obs{{{3, 1.0}}};

    const auto adjoint = sim::adjoint_gradient(layout, params, state, obs);
    const auto shift = oracle::parameter_shift_gradient(layout, params, state, obs);
    const auto fd = oracle::finite_difference_gradient(layout, params, state, obs, 1e-4);
    double max_shift = 0.0, max_fd = 0.0;
    for (std::size_t j = 0; j < params.size(); ++j) {
        max_shift = std::max(max_shift, std::abs(adjoint[j] - shift[j]));
        max_fd = std::max(max_fd, std::abs(adjoint[j] - fd[j]));
    }
    std::printf("  max |adjoint - parameter_shift| = %.3e\n", max_shift);
    std::printf("  max |adjoint - finite_diff|     = %.3e\n", max_fd);

    std::printf("dense unitary oracle (3 qubits, 2 layers)\n");
    const sim::CircuitLayout small{3, 2};
    std::vector<double> sp(small.param_count());
    for (double& p : sp) p = rng.normal(0.0, 1.0);
    const auto u = oracle::dense_circuit_unitary(small, sp);
    sim::StateVector ground(3);
    const auto expected = oracle::apply_matrix(u, ground.amplitudes());
    const auto got = sim::run_circuit(small, sp, ground);
    double max_amp = 0.0;
    for (std::size_t j = 0; j < expected.size(); ++j)
        max_amp = std::max(max_amp, std::abs(expected[j] - got[j]));
    std::printf("  max |matrix_product - run_circuit| = %.3e\n", max_amp);

    std::printf("aggregation oracle (3 clients, 6 parameters, delta = 0.01)\n");
    std::vector<oracle::OracleClient> clients(3);
    for (int i = 0; i < 3; ++i) {
        clients[i].n_samples = 100 * (i + 1);
        for (int j = 0; j < 6; ++j) {
            clients[i].params.push_back(rng.normal(0.0, 1.0));
            clients[i].fisher.push_back(j == 0 ? 0.0 : rng.next_double());
        }
    }
    const auto ref = oracle::fedfisher_reference(clients, 0.01);
    std::printf("  params:");
    for (double v : ref.params) std::printf(" %.6f", v);
    std::printf("\n  substituted indices:");
    for (int j : ref.substituted) std::printf(" %d", j);
    std::printf("\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fisher-information-guided quantum federated learning simulator"};
    app.require_subcommand(1);

    CommonArgs run_args;
    CLI::App* run_cmd = app.add_subcommand("run", "run an experiment");
    add_common(run_cmd, run_args);

    CommonArgs validate_args;
    CLI::App* validate_cmd =
        app.add_subcommand("validate", "check a configuration and exit");
    add_common(validate_cmd, validate_args);

    app.add_subcommand("oracle", "run the brute-force reference oracles");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            const auto cfg = build_config(run_args);
            qfl::runner::run_experiment(cfg, &std::cout);
            std::cout << "artifacts written to " << cfg.out_dir << '\n';
            return 0;
        }
        if (validate_cmd->parsed()) {
            const auto cfg = build_config(validate_args);
            std::cout << "config ok: " << cfg.fed.n_clients << " clients, "
                      << cfg.n_qubits << " qubits, " << cfg.n_layers << " layers, "
                      << cfg.fed.rounds << " rounds\n";
            return 0;
        }
        return run_oracles();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
