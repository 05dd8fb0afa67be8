#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qfl/dataio.hpp"
#include "qfl/qsim.hpp"
#include "qfl/vqc.hpp"

namespace qfl::fed {

enum class Strategy { fedavg, fedadam, fedfisher };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

/// Adam with bias correction; state persists for as long as the caller keeps it.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct RoundConfig {
    int n_clients = 10;
    double participation_fraction = 1.0;
    int local_epochs = 1;
    int batch_size = 32;
    double local_lr = 1e-3;
    double fisher_threshold = 0.01;
    double dirichlet_alpha = 0.5;
    int samples_per_client = 500;
    Strategy strategy = Strategy::fedavg;
    // Fisher-gated retention of client parameters at broadcast; applies only
    // under the fedfisher strategy.
    bool client_retention = false;
    int rounds = 1;
    std::uint64_t seed = 0;
    double server_lr = 1e-2;
    int threads = 1;
    vqc::FisherMode fisher_mode = vqc::FisherMode::per_sample;
};

struct ClientRecord {
    int client_id = 0;
    std::vector<int> partition;  // indices into the shared training set, disjoint
    vqc::ParameterVector params;
    vqc::FisherVector fisher;  // normalized; all zeros before first participation
    std::uint64_t seed = 0;
};

struct GlobalModel {
    vqc::ParameterVector params;
    int round = 0;
    AdamState adam;  // used only by the fedadam strategy, persists across rounds
};

/// What a participating client sends back to the server.
struct ClientUpdate {
    int client_id = 0;
    int n_samples = 0;
    vqc::ParameterVector params;
    vqc::FisherVector fisher;  // normalized layer-wise; empty unless fedfisher
    double train_loss = 0.0;
    double seconds = 0.0;  // local training + Fisher computation
};

struct RoundReport {
    int round = 0;
    double test_accuracy = 0.0;
    double test_loss = 0.0;
    double mean_client_train_loss = 0.0;
    int substituted_count = 0;
    double wall_time_s = 0.0;    // whole round including evaluation
    double client_time_s = 0.0;  // summed client-side seconds
};

/// Kaiming-style angle initialization: Normal(0, sqrt(2 / n_qubits)) per
/// parameter, drawn in flat index order.
vqc::ParameterVector kaiming_init(const sim::CircuitLayout& layout, std::uint64_t seed);

/// Splits the dataset into n_clients disjoint partitions of exactly
/// samples_per_client indices each. Per client, class proportions are drawn
/// from Dirichlet(alpha * 1_K) and filled from seeded per-class pools in
/// client-id order; exhausted classes spill proportionally onto classes with
/// stock left.
///
/// Draw protocol (mirrored bit-for-bit by the reference oracle):
///   pool k shuffled by Rng(derive_seed(seed, 0, k, "pool_shuffle")),
///   client i proportions from Rng(derive_seed(seed, 0, i, "dirichlet")),
///   quotas allocated by largest remainder, ties to the lower class index.
std::vector<std::vector<int>> dirichlet_partition(const data::Dataset& dataset,
                                                  int n_clients, double alpha,
                                                  int samples_per_client,
                                                  std::uint64_t seed);

/// ceil(fraction * n_clients) distinct ids, ascending, deterministic in
/// (seed, round).
std::vector<int> sample_clients(int n_clients, double fraction, int round,
                                std::uint64_t seed);

struct LocalTrainResult {
    vqc::ParameterVector params;
    double mean_loss = 0.0;
};

/// E epochs of mini-batch Adam over the client's partition, fresh optimizer
/// state, per-epoch reshuffles from the given seed's stream.
LocalTrainResult local_train(const data::Dataset& train, std::span<const int> partition,
                             const sim::CircuitLayout& layout, const vqc::Task& task,
                             const vqc::ParameterVector& start_params, int epochs,
                             int batch_size, double lr, std::uint64_t seed);

/// Dataset-size-weighted average: theta = sum_i (D_i / sum D) theta_i.
vqc::ParameterVector aggregate_fedavg(std::span<const ClientUpdate> updates);

/// One server-side Adam step on the pseudo-gradient (global - average).
vqc::ParameterVector aggregate_fedadam(std::span<const ClientUpdate> updates,
                                       GlobalModel& global, double server_lr);

struct FisherAggregate {
    vqc::ParameterVector params;
    std::vector<int> substituted;  // indices that fell back to the plain average
};

/// Fisher-weighted aggregation with threshold substitution: per parameter j,
/// G = sum_i F_ij theta_ij and F = sum_i F_ij; j takes G/F when F >= delta
/// (and F > 1e-12), otherwise the plain weighted average value, bit for bit.
FisherAggregate aggregate_fedfisher(std::span<const ClientUpdate> updates, double delta);

/// Per parameter: keep the client's own value where its Fisher >= delta,
/// adopt the broadcast global value where it is below.
vqc::ParameterVector client_retention(const vqc::ParameterVector& client_params,
                                      const vqc::FisherVector& client_fisher,
                                      const vqc::ParameterVector& global_params,
                                      double delta);

struct EvalResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
    std::vector<std::vector<int>> confusion;  // [actual][predicted]
};

EvalResult evaluate(const sim::CircuitLayout& layout, const vqc::ParameterVector& params,
                    const vqc::Task& task, const data::Dataset& test_set);

/// One communication round: sample clients, broadcast (with Fisher retention
/// under fedfisher when enabled), train locally (parallel across clients when
/// config.threads > 1; reductions stay in client-id order), aggregate per
/// strategy, evaluate on the held-out test set.
RoundReport run_round(GlobalModel& global, std::vector<ClientRecord>& clients,
                      const data::Dataset& train, const data::Dataset& test,
                      const sim::CircuitLayout& layout, const vqc::Task& task,
                      const RoundConfig& config);

}  // namespace qfl::fed
