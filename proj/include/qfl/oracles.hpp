#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "qfl/qsim.hpp"
#include "qfl/vqc.hpp"

/// Brute-force reference implementations used to cross-check the production
/// paths. Everything here is written independently of the kernels it checks:
/// circuits become explicit dense matrices, gradients come from evaluation
/// rules, aggregation is a direct transcription of the update equations.
/// Production code must never call into this namespace.
namespace qfl::oracle {

using sim::cdouble;

/// Dense 2^n x 2^n matrix, row-major.
using Matrix = std::vector<cdouble>;

/// Builds the full circuit unitary by multiplying per-gate dense matrices.
Matrix dense_circuit_unitary(const sim::CircuitLayout& layout,
                             std::span<const double> params);

std::vector<cdouble> apply_matrix(const Matrix& u, std::span<const cdouble> amps);

/// Parameter-shift rule g_j = [f(theta_j + pi/2) - f(theta_j - pi/2)] / 2,
/// exact for rotation gates with involutory generators.
std::vector<double> parameter_shift_gradient(const sim::CircuitLayout& layout,
                                             std::span<const double> params,
                                             const sim::StateVector& input,
                                             const sim::ZObservable& obs);

/// Central finite differences of the observable expectation.
std::vector<double> finite_difference_gradient(const sim::CircuitLayout& layout,
                                               std::span<const double> params,
                                               const sim::StateVector& input,
                                               const sim::ZObservable& obs, double h);

/// Central finite differences of the composed classification loss.
std::vector<double> finite_difference_loss_gradient(const sim::CircuitLayout& layout,
                                                    const vqc::ParameterVector& params,
                                                    std::span<const double> row,
                                                    int label, const vqc::Task& task,
                                                    double h);

struct OracleClient {
    int n_samples = 0;
    std::vector<double> params;
    std::vector<double> fisher;
};

std::vector<double> fedavg_reference(std::span<const OracleClient> clients);

struct FisherReference {
    std::vector<double> params;
    std::vector<int> substituted;
};

/// Direct transcription of the weighted-sum / threshold-substitution update.
FisherReference fedfisher_reference(std::span<const OracleClient> clients,
                                    double delta);

/// Straightforward re-implementation of the Dirichlet quota allocation;
/// returns per-client class histograms. Shares only the documented RNG draw
/// protocol with the production partitioner.
std::vector<std::vector<int>> dirichlet_histogram_reference(
    const std::vector<int>& labels, int n_classes, int n_clients, double alpha,
    int samples_per_client, std::uint64_t seed);

}  // namespace qfl::oracle
