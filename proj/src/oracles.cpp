#include "qfl/oracles.hpp"

#include <cmath>
#include <stdexcept>

#include "qfl/rng.hpp"

namespace qfl::oracle {

namespace {

constexpr double kPi = 3.14159265358979323846;

Matrix identity(std::size_t dim) {
    Matrix m(dim * dim, cdouble{0.0, 0.0});
    for (std::size_t i = 0; i < dim; ++i) m[i * dim + i] = cdouble{1.0, 0.0};
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b, std::size_t dim) {
    Matrix out(dim * dim, cdouble{0.0, 0.0});
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t k = 0; k < dim; ++k) {
            const cdouble aik = a[i * dim + k];
            if (aik == cdouble{0.0, 0.0}) continue;
            for (std::size_t j = 0; j < dim; ++j)
                out[i * dim + j] += aik * b[k * dim + j];
        }
    return out;
}

/// Embeds a 2x2 gate acting on `qubit` into the full-dimension matrix.
Matrix embed_1q(const cdouble g[2][2], int qubit, std::size_t dim) {
    Matrix m(dim * dim, cdouble{0.0, 0.0});
    const std::size_t mask = std::size_t{1} << qubit;
    for (std::size_t col = 0; col < dim; ++col) {
        const int b = (col & mask) ? 1 : 0;
        const std::size_t partner = col ^ mask;
        m[col * dim + col] = g[b][b];
        m[partner * dim + col] = g[1 - b][b];
    }
    return m;
}

Matrix embed_cnot(int control, int target, std::size_t dim) {
    Matrix m(dim * dim, cdouble{0.0, 0.0});
    const std::size_t cmask = std::size_t{1} << control;
    const std::size_t tmask = std::size_t{1} << target;
    for (std::size_t col = 0; col < dim; ++col) {
        const std::size_t row = (col & cmask) ? (col ^ tmask) : col;
        m[row * dim + col] = cdouble{1.0, 0.0};
    }
    return m;
}

Matrix ry_matrix(double theta, int qubit, std::size_t dim) {
    const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
    const cdouble g[2][2] = {{{c, 0.0}, {-s, 0.0}}, {{s, 0.0}, {c, 0.0}}};
    return embed_1q(g, qubit, dim);
}

Matrix rx_matrix(double theta, int qubit, std::size_t dim) {
    const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
    const cdouble g[2][2] = {{{c, 0.0}, {0.0, -s}}, {{0.0, -s}, {c, 0.0}}};
    return embed_1q(g, qubit, dim);
}

double evaluate(const sim::CircuitLayout& layout, std::span<const double> params,
                const sim::StateVector& input, const sim::ZObservable& obs) {
    return sim::expectation(sim::run_circuit(layout, params, input), obs);
}

}  // namespace

Matrix dense_circuit_unitary(const sim::CircuitLayout& layout,
                             std::span<const double> params) {
    if (params.size() != layout.param_count())
        throw std::invalid_argument("dense_circuit_unitary: parameter count mismatch");
    const std::size_t dim = layout.dim();
    Matrix total = identity(dim);
    const int n = layout.n_qubits;
    for (int layer = 0; layer < layout.n_layers; ++layer) {
        for (int q = 0; q < n; ++q)
            total = matmul(ry_matrix(params[layout.param_index(layer, 0, q)], q, dim),
                           total, dim);
        for (int q = 0; q < n; ++q)
            total = matmul(rx_matrix(params[layout.param_index(layer, 1, q)], q, dim),
                           total, dim);
        for (int q = 0; q + 1 < n; ++q)
            total = matmul(embed_cnot(q, q + 1, dim), total, dim);
    }
    return total;
}

std::vector<cdouble> apply_matrix(const Matrix& u, std::span<const cdouble> amps) {
    const std::size_t dim = amps.size();
    std::vector<cdouble> out(dim, cdouble{0.0, 0.0});
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) out[i] += u[i * dim + j] * amps[j];
    return out;
}

std::vector<double> parameter_shift_gradient(const sim::CircuitLayout& layout,
                                             std::span<const double> params,
                                             const sim::StateVector& input,
                                             const sim::ZObservable& obs) {
    std::vector<double> shifted(params.begin(), params.end());
    std::vector<double> grad(params.size());
    for (std::size_t j = 0; j < params.size(); ++j) {
        shifted[j] = params[j] + kPi / 2.0;
        const double plus = evaluate(layout, shifted, input, obs);
        shifted[j] = params[j] - kPi / 2.0;
        const double minus = evaluate(layout, shifted, input, obs);
        shifted[j] = params[j];
        grad[j] = (plus - minus) / 2.0;
    }
    return grad;
}

std::vector<double> finite_difference_gradient(const sim::CircuitLayout& layout,
                                               std::span<const double> params,
                                               const sim::StateVector& input,
                                               const sim::ZObservable& obs, double h) {
    std::vector<double> shifted(params.begin(), params.end());
    std::vector<double> grad(params.size());
    for (std::size_t j = 0; j < params.size(); ++j) {
        shifted[j] = params[j] + h;
        const double plus = evaluate(layout, shifted, input, obs);
        shifted[j] = params[j] - h;
        const double minus = evaluate(layout, shifted, input, obs);
        shifted[j] = params[j];
        grad[j] = (plus - minus) / (2.0 * h);
    }
    return grad;
}

std::vector<double> finite_difference_loss_gradient(const sim::CircuitLayout& layout,
                                                    const vqc::ParameterVector& params,
                                                    std::span<const double> row,
                                                    int label, const vqc::Task& task,
                                                    double h) {
    vqc::ParameterVector shifted = params;
    std::vector<double> grad(params.size());
    const sim::StateVector encoded = sim::amplitude_encode(row);
    for (std::size_t j = 0; j < params.size(); ++j) {
        shifted[j] = params[j] + h;
        const double plus = vqc::loss(vqc::forward(layout, shifted, encoded, task), label);
        shifted[j] = params[j] - h;
        const double minus = vqc::loss(vqc::forward(layout, shifted, encoded, task), label);
        shifted[j] = params[j];
        grad[j] = (plus - minus) / (2.0 * h);
    }
    return grad;
}

std::vector<double> fedavg_reference(std::span<const OracleClient> clients) {
    double total = 0.0;
    for (const OracleClient& c : clients) total += double(c.n_samples);
    std::vector<double> avg(clients.front().params.size(), 0.0);
    for (const OracleClient& c : clients) {
        const double p = double(c.n_samples) / total;
        for (std::size_t j = 0; j < avg.size(); ++j) avg[j] += p * c.params[j];
    }
    return avg;
}

FisherReference fedfisher_reference(std::span<const OracleClient> clients,
                                    double delta) {
    const std::size_t n = clients.front().params.size();
    const std::vector<double> avg = fedavg_reference(clients);
    FisherReference out;
    out.params.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        double g = 0.0, f = 0.0;
        for (const OracleClient& c : clients) {
            g += c.fisher[j] * c.params[j];
            f += c.fisher[j];
        }
        if (f < delta || f <= 1e-12) {
            out.params[j] = avg[j];
            out.substituted.push_back(int(j));
        } else {
            out.params[j] = g / f;
        }
    }
    return out;
}

std::vector<std::vector<int>> dirichlet_histogram_reference(
    const std::vector<int>& labels, int n_classes, int n_clients, double alpha,
    int samples_per_client, std::uint64_t seed) {
    std::vector<int> stock(n_classes, 0);
    for (int l : labels) stock[l] += 1;

    // Repeated-max largest-remainder allocator, ties to the lower index.
    auto allocate = [](const std::vector<double>& w, int total) {
        const int k = int(w.size());
        double wsum = 0.0;
        for (double v : w) wsum += v;
        std::vector<int> counts(k, 0);
        if (total <= 0) return counts;
        if (wsum <= 0.0) {
            for (int i = 0; i < total; ++i) counts[i % k] += 1;
            return counts;
        }
        std::vector<double> frac(k);
        int assigned = 0;
        for (int i = 0; i < k; ++i) {
            const double share = w[i] / wsum * total;
            counts[i] = int(std::floor(share));
            frac[i] = share - counts[i];
            assigned += counts[i];
        }
        for (int r = assigned; r < total; ++r) {
            int best = 0;
            for (int i = 1; i < k; ++i)
                if (frac[i] > frac[best]) best = i;
            counts[best] += 1;
            frac[best] = -1.0;
        }
        return counts;
    };

    std::vector<std::vector<int>> histograms(n_clients);
    for (int i = 0; i < n_clients; ++i) {
        Rng rng(derive_seed(seed, 0, std::uint64_t(i), "dirichlet"));
        const std::vector<double> pi = rng.dirichlet(alpha, n_classes);
        std::vector<int> take = allocate(pi, samples_per_client);
        int deficit = 0;
        for (int c = 0; c < n_classes; ++c) {
            if (take[c] > stock[c]) {
                deficit += take[c] - stock[c];
                take[c] = stock[c];
            }
        }
        while (deficit > 0) {
            std::vector<double> w(n_classes, 0.0);
            bool any = false;
            double wsum = 0.0;
            for (int c = 0; c < n_classes; ++c) {
                if (stock[c] - take[c] > 0) {
                    w[c] = pi[c];
                    wsum += pi[c];
                    any = true;
                }
            }
            if (!any) throw std::invalid_argument("reference: class pools exhausted");
            if (wsum <= 0.0)
                for (int c = 0; c < n_classes; ++c)
                    w[c] = (stock[c] - take[c] > 0) ? 1.0 : 0.0;
            const std::vector<int> extra = allocate(w, deficit);
            for (int c = 0; c < n_classes; ++c) {
                const int add = std::min(extra[c], stock[c] - take[c]);
                take[c] += add;
                deficit -= add;
            }
        }
        for (int c = 0; c < n_classes; ++c) stock[c] -= take[c];
        histograms[i] = std::move(take);
    }
    return histograms;
}

}  // namespace qfl::oracle
