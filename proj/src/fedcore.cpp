#include "qfl/fedcore.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "qfl/rng.hpp"

namespace qfl::fed {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Largest-remainder allocation of `total` units over weights; ties between
/// equal fractional parts go to the lower index.
std::vector<int> allocate_largest_remainder(const std::vector<double>& weights,
                                            int total) {
    const int k = int(weights.size());
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    std::vector<int> counts(k, 0);
    if (total <= 0) return counts;
    if (wsum <= 0.0) {
        for (int i = 0; i < total; ++i) counts[i % k] += 1;
        return counts;
    }
    std::vector<double> frac(k);
    int assigned = 0;
    for (int i = 0; i < k; ++i) {
        const double share = weights[i] / wsum * total;
        counts[i] = int(std::floor(share));
        frac[i] = share - counts[i];
        assigned += counts[i];
    }
    std::vector<int> order(k);
    for (int i = 0; i < k; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return frac[a] > frac[b]; });
    for (int r = 0; r < total - assigned; ++r) counts[order[r]] += 1;
    return counts;
}

std::vector<vqc::SampleRef> gather_samples(const data::Dataset& train,
                                           std::span<const int> partition) {
    std::vector<vqc::SampleRef> samples;
    samples.reserve(partition.size());
    for (int idx : partition)
        samples.push_back({train.row(idx), train.labels[idx]});
    return samples;
}

}  // namespace

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::fedavg: return "fedavg";
        case Strategy::fedadam: return "fedadam";
        case Strategy::fedfisher: return "fedfisher";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& name) {
    if (name == "fedavg") return Strategy::fedavg;
    if (name == "fedadam") return Strategy::fedadam;
    if (name == "fedfisher") return Strategy::fedfisher;
    throw std::invalid_argument("unknown strategy '" + name +
                                "' (expected fedavg, fedadam or fedfisher)");
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad,
               double lr, double beta1, double beta2, double eps) {
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.step = 0;
    }
    if (state.m.size() != params.size() || grad.size() != params.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(beta2, double(state.step));
    for (std::size_t j = 0; j < params.size(); ++j) {
        state.m[j] = beta1 * state.m[j] + (1.0 - beta1) * grad[j];
        state.v[j] = beta2 * state.v[j] + (1.0 - beta2) * grad[j] * grad[j];
        const double mhat = state.m[j] / bc1;
        const double vhat = state.v[j] / bc2;
        params[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

vqc::ParameterVector kaiming_init(const sim::CircuitLayout& layout,
                                  std::uint64_t seed) {
    vqc::ParameterVector params(layout);
    Rng rng(seed);
    const double stddev = std::sqrt(2.0 / layout.n_qubits);
    for (std::size_t j = 0; j < params.size(); ++j) params[j] = rng.normal(0.0, stddev);
    return params;
}

std::vector<std::vector<int>> dirichlet_partition(const data::Dataset& dataset,
                                                  int n_clients, double alpha,
                                                  int samples_per_client,
                                                  std::uint64_t seed) {
    if (n_clients < 1) throw std::invalid_argument("n_clients must be >= 1");
    if (alpha <= 0.0) throw std::invalid_argument("dirichlet alpha must be > 0");
    if (std::size_t(n_clients) * samples_per_client > std::size_t(dataset.n_samples))
        throw std::invalid_argument(
            "insufficient data: need " +
            std::to_string(std::size_t(n_clients) * samples_per_client) +
            " samples, have " + std::to_string(dataset.n_samples));

    const int k = dataset.n_classes;
    std::vector<std::vector<int>> pools(k);
    for (int i = 0; i < dataset.n_samples; ++i)
        pools[dataset.labels[i]].push_back(i);
    for (int c = 0; c < k; ++c) {
        Rng pool_rng(derive_seed(seed, 0, std::uint64_t(c), "pool_shuffle"));
        pool_rng.shuffle(pools[c]);
    }
    std::vector<std::size_t> pos(k, 0);

    std::vector<std::vector<int>> partitions(n_clients);
    for (int i = 0; i < n_clients; ++i) {
        Rng client_rng(derive_seed(seed, 0, std::uint64_t(i), "dirichlet"));
        const std::vector<double> pi = client_rng.dirichlet(alpha, k);
        std::vector<int> take = allocate_largest_remainder(pi, samples_per_client);

        // Cap by remaining stock; spill the deficit onto classes that still
        // have samples, weighted by the client's own proportions.
        int deficit = 0;
        for (int c = 0; c < k; ++c) {
            const int avail = int(pools[c].size() - pos[c]);
            if (take[c] > avail) {
                deficit += take[c] - avail;
                take[c] = avail;
            }
        }
        while (deficit > 0) {
            std::vector<double> w(k, 0.0);
            bool any = false;
            for (int c = 0; c < k; ++c) {
                const int avail = int(pools[c].size() - pos[c]) - take[c];
                if (avail > 0) {
                    w[c] = pi[c];
                    any = true;
                }
            }
            if (!any)
                throw std::invalid_argument("insufficient data: class pools exhausted");
            double wsum = 0.0;
            for (double v : w) wsum += v;
            if (wsum <= 0.0) {
                for (int c = 0; c < k; ++c) {
                    const int avail = int(pools[c].size() - pos[c]) - take[c];
                    w[c] = avail > 0 ? 1.0 : 0.0;
                }
            }
            const std::vector<int> extra = allocate_largest_remainder(w, deficit);
            for (int c = 0; c < k; ++c) {
                const int avail = int(pools[c].size() - pos[c]) - take[c];
                const int add = std::min(extra[c], avail);
                take[c] += add;
                deficit -= add;
            }
        }

        std::vector<int>& part = partitions[i];
        part.reserve(samples_per_client);
        for (int c = 0; c < k; ++c) {
            for (int t = 0; t < take[c]; ++t) part.push_back(pools[c][pos[c] + t]);
            pos[c] += std::size_t(take[c]);
        }
    }
    return partitions;
}

std::vector<int> sample_clients(int n_clients, double fraction, int round,
                                std::uint64_t seed) {
    const int count = std::max(1, int(std::ceil(fraction * n_clients)));
    Rng rng(derive_seed(seed, std::uint64_t(round), 0, "client_sample"));
    return rng.sample_without_replacement(n_clients, std::min(count, n_clients));
}

LocalTrainResult local_train(const data::Dataset& train, std::span<const int> partition,
                             const sim::CircuitLayout& layout, const vqc::Task& task,
                             const vqc::ParameterVector& start_params, int epochs,
                             int batch_size, double lr, std::uint64_t seed) {
    if (partition.empty()) throw std::invalid_argument("local_train: empty partition");
    if (batch_size < 1) throw std::invalid_argument("local_train: batch_size must be >= 1");

    LocalTrainResult result;
    result.params = start_params;
    AdamState opt;

    std::vector<int> order(partition.begin(), partition.end());
    Rng shuffle_rng(derive_seed(seed, 0, 0, "batch_shuffle"));

    std::vector<double> grad(layout.param_count());
    double loss_sum = 0.0;
    long loss_count = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
            const std::size_t end = std::min(begin + batch_size, order.size());
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t s = begin; s < end; ++s) {
                const int idx = order[s];
                double sample_loss = 0.0;
                const auto g =
                    vqc::sample_gradient(layout, result.params, train.row(idx),
                                         train.labels[idx], task, &sample_loss);
                for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += g[j];
                loss_sum += sample_loss;
                ++loss_count;
            }
            const double inv = 1.0 / double(end - begin);
            for (double& g : grad) g *= inv;
            adam_step(opt, result.params.values(), grad, lr);
        }
    }
    result.mean_loss = loss_sum / double(loss_count);
    return result;
}

namespace {

/// Reduction order is ascending client id, independent of arrival order.
std::vector<const ClientUpdate*> by_client_id(std::span<const ClientUpdate> updates) {
    std::vector<const ClientUpdate*> order;
    order.reserve(updates.size());
    for (const ClientUpdate& u : updates) order.push_back(&u);
    std::stable_sort(order.begin(), order.end(),
                     [](const ClientUpdate* a, const ClientUpdate* b) {
                         return a->client_id < b->client_id;
                     });
    return order;
}

}  // namespace

vqc::ParameterVector aggregate_fedavg(std::span<const ClientUpdate> updates) {
    if (updates.empty()) throw std::invalid_argument("aggregate_fedavg: no clients");
    const auto order = by_client_id(updates);
    double total = 0.0;
    for (const ClientUpdate* u : order) total += double(u->n_samples);
    vqc::ParameterVector avg(updates.front().params.layout());
    for (const ClientUpdate* u : order) {
        if (u->params.size() != avg.size())
            throw std::invalid_argument("aggregate_fedavg: parameter shape mismatch");
        const double p = double(u->n_samples) / total;
        for (std::size_t j = 0; j < avg.size(); ++j) avg[j] += p * u->params[j];
    }
    return avg;
}

vqc::ParameterVector aggregate_fedadam(std::span<const ClientUpdate> updates,
                                       GlobalModel& global, double server_lr) {
    const vqc::ParameterVector avg = aggregate_fedavg(updates);
    std::vector<double> delta(avg.size());
    for (std::size_t j = 0; j < avg.size(); ++j)
        delta[j] = global.params[j] - avg[j];
    vqc::ParameterVector next = global.params;
    adam_step(global.adam, next.values(), delta, server_lr);
    return next;
}

FisherAggregate aggregate_fedfisher(std::span<const ClientUpdate> updates,
                                    double delta) {
    if (updates.empty()) throw std::invalid_argument("aggregate_fedfisher: no clients");
    const vqc::ParameterVector avg = aggregate_fedavg(updates);
    const std::size_t n = avg.size();
    for (const ClientUpdate& u : updates)
        if (u.fisher.size() != n)
            throw std::invalid_argument(
                "aggregate_fedfisher: fisher/parameter shape mismatch for client " +
                std::to_string(u.client_id));

    std::vector<double> weighted(n, 0.0);  // G_s
    std::vector<double> mass(n, 0.0);      // F_s
    for (const ClientUpdate* u : by_client_id(updates)) {
        for (std::size_t j = 0; j < n; ++j) {
            weighted[j] += u->fisher[j] * u->params[j];
            mass[j] += u->fisher[j];
        }
    }

    FisherAggregate out;
    out.params = vqc::ParameterVector(avg.layout());
    const bool lone_client = updates.size() == 1;
    for (std::size_t j = 0; j < n; ++j) {
        if (mass[j] >= delta && mass[j] > 1e-12) {
            // A lone client's (F*theta)/F must round-trip bit for bit.
            out.params[j] = lone_client ? updates.front().params[j]
                                        : weighted[j] / mass[j];
        } else {
            out.params[j] = avg[j];
            out.substituted.push_back(int(j));
        }
    }
    return out;
}

vqc::ParameterVector client_retention(const vqc::ParameterVector& client_params,
                                      const vqc::FisherVector& client_fisher,
                                      const vqc::ParameterVector& global_params,
                                      double delta) {
    if (client_params.size() != client_fisher.size() ||
        client_params.size() != global_params.size())
        throw std::invalid_argument("client_retention: shape mismatch");
    vqc::ParameterVector out = client_params;
    for (std::size_t j = 0; j < out.size(); ++j)
        if (client_fisher[j] < delta) out[j] = global_params[j];
    return out;
}

EvalResult evaluate(const sim::CircuitLayout& layout, const vqc::ParameterVector& params,
                    const vqc::Task& task, const data::Dataset& test_set) {
    if (test_set.n_samples == 0) throw std::invalid_argument("evaluate: empty test set");
    EvalResult result;
    const int k = task.n_classes;
    result.confusion.assign(k, std::vector<int>(k, 0));
    long correct = 0;
    double loss_sum = 0.0;
    for (int i = 0; i < test_set.n_samples; ++i) {
        const vqc::Prediction pred = vqc::forward(
            layout, params, sim::amplitude_encode(test_set.row(i)), task);
        const int actual = test_set.labels[i];
        result.confusion[actual][pred.predicted_class] += 1;
        if (pred.predicted_class == actual) ++correct;
        loss_sum += vqc::loss(pred, actual);
    }
    result.accuracy = double(correct) / test_set.n_samples;
    result.mean_loss = loss_sum / test_set.n_samples;
    return result;
}

RoundReport run_round(GlobalModel& global, std::vector<ClientRecord>& clients,
                      const data::Dataset& train, const data::Dataset& test,
                      const sim::CircuitLayout& layout, const vqc::Task& task,
                      const RoundConfig& config) {
    const auto round_start = Clock::now();
    const int round = global.round + 1;
    const bool wants_fisher = config.strategy == Strategy::fedfisher;

    const std::vector<int> selected = sample_clients(
        config.n_clients, config.participation_fraction, round, config.seed);

    std::vector<ClientUpdate> updates(selected.size());
    auto train_one = [&](std::size_t slot) {
        const int id = selected[slot];
        ClientRecord& client = clients[id];
        const auto t0 = Clock::now();

        vqc::ParameterVector start =
            (wants_fisher && config.client_retention)
                ? client_retention(client.params, client.fisher, global.params,
                                   config.fisher_threshold)
                : global.params;

        const std::uint64_t train_seed = derive_seed(client.seed, std::uint64_t(round),
                                                     0, "local_train");
        LocalTrainResult local =
            local_train(train, client.partition, layout, task, start,
                        config.local_epochs, config.batch_size, config.local_lr,
                        train_seed);

        ClientUpdate& u = updates[slot];
        u.client_id = id;
        u.n_samples = int(client.partition.size());
        u.params = local.params;
        u.train_loss = local.mean_loss;
        if (wants_fisher) {
            const auto samples = gather_samples(train, client.partition);
            u.fisher = vqc::normalize_fisher_layerwise(vqc::fisher_diagonal(
                layout, local.params, samples, task, config.fisher_mode));
        }
        u.seconds = seconds_since(t0);
    };

    if (config.threads > 1 && selected.size() > 1) {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t slot = next.fetch_add(1);
                if (slot >= selected.size()) break;
                train_one(slot);
            }
        };
        const int n_threads = std::min<int>(config.threads, int(selected.size()));
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    } else {
        for (std::size_t slot = 0; slot < selected.size(); ++slot) train_one(slot);
    }

    // Client-side state and all reductions advance in client-id order.
    double client_seconds = 0.0;
    double loss_mean = 0.0;
    for (std::size_t slot = 0; slot < updates.size(); ++slot) {
        ClientRecord& client = clients[selected[slot]];
        client.params = updates[slot].params;
        if (wants_fisher) client.fisher = updates[slot].fisher;
        client_seconds += updates[slot].seconds;
        loss_mean += updates[slot].train_loss;
    }
    loss_mean /= double(updates.size());

    RoundReport report;
    report.round = round;
    report.mean_client_train_loss = loss_mean;
    switch (config.strategy) {
        case Strategy::fedavg:
            global.params = aggregate_fedavg(updates);
            break;
        case Strategy::fedadam:
            global.params = aggregate_fedadam(updates, global, config.server_lr);
            break;
        case Strategy::fedfisher: {
            FisherAggregate agg = aggregate_fedfisher(updates, config.fisher_threshold);
            global.params = std::move(agg.params);
            report.substituted_count = int(agg.substituted.size());
            break;
        }
    }
    global.round = round;

    const EvalResult eval = evaluate(layout, global.params, task, test);
    report.test_accuracy = eval.accuracy;
    report.test_loss = eval.mean_loss;
    report.client_time_s = client_seconds;
    report.wall_time_s = seconds_since(round_start);
    return report;
}

}  // namespace qfl::fed
