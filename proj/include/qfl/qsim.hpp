#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace qfl::sim {

using cdouble = std::complex<double>;

/// Fixed circuit family: per layer, RY on every qubit, then RX on every
/// qubit, then a linear CNOT chain q -> q+1 (no wrap-around).
/// Flat parameter order: layer * 2n + axis * n + qubit, axis 0 = RY, 1 = RX.
struct CircuitLayout {
    int n_qubits = 0;
    int n_layers = 0;

    std::size_t dim() const { return std::size_t{1} << n_qubits; }
    std::size_t param_count() const {
        return 2 * std::size_t(n_qubits) * std::size_t(n_layers);
    }
    std::size_t param_index(int layer, int axis, int qubit) const {
        return std::size_t(layer) * 2 * n_qubits + std::size_t(axis) * n_qubits +
               std::size_t(qubit);
    }
};

/// Dense n-qubit pure state. Qubit 0 is the least-significant bit of the
/// basis index everywhere in this library.
class StateVector {
public:
    /// |0...0> on n qubits.
    explicit StateVector(int n_qubits);

    /// Takes ownership of a full amplitude vector; length must be 2^n_qubits.
    StateVector(int n_qubits, std::vector<cdouble> amplitudes);

    int n_qubits() const { return n_qubits_; }
    std::size_t size() const { return amps_.size(); }

    std::span<const cdouble> amplitudes() const { return amps_; }
    std::span<cdouble> amplitudes() { return amps_; }
    const cdouble& operator[](std::size_t i) const { return amps_[i]; }
    cdouble& operator[](std::size_t i) { return amps_[i]; }

    double norm() const;

    /// RY(theta) = exp(-i theta Y / 2) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]]
    void apply_ry(int qubit, double theta);
    /// RX(theta) = exp(-i theta X / 2) = [[cos t/2, -i sin t/2], [-i sin t/2, cos t/2]]
    void apply_rx(int qubit, double theta);
    void apply_cnot(int control, int target);

private:
    void check_qubit(int qubit) const;

    int n_qubits_;
    std::vector<cdouble> amps_;
};

/// Maps a unit-scale real vector of length 2^n onto the amplitudes of an
/// n-qubit state: amp[j] = x[j] / ||x||. The length must already be a power
/// of two; padding is the data layer's job.
StateVector amplitude_encode(std::span<const double> x);

/// Applies the full layered circuit to input_state. params must have exactly
/// layout.param_count() entries in flat order.
StateVector run_circuit(const CircuitLayout& layout, std::span<const double> params,
                        StateVector input_state);

/// <Z_qubit> = sum_j |amp_j|^2 * (+1 if bit qubit of j is 0 else -1).
double expectation_z(const StateVector& state, int qubit);

/// Weighted sum of single-qubit Z terms: O = sum_k weight_k * Z_{qubit_k}.
struct ZObservable {
    std::vector<std::pair<int, double>> terms;
};

double expectation(const StateVector& state, const ZObservable& obs);

/// d<O>/d theta_j for every circuit parameter, computed with one reverse
/// (adjoint) sweep: forward pass, then walk the gates backwards undoing them
/// on both the ket and the O-projected bra. Exact on the simulator, costs
/// O(layers) state passes instead of O(params) forward evaluations.
std::vector<double> adjoint_gradient(const CircuitLayout& layout,
                                     std::span<const double> params,
                                     const StateVector& input_state,
                                     const ZObservable& obs);

/// Same reverse sweep, starting from an already-computed circuit output.
/// output_state must equal run_circuit(layout, params, input).
std::vector<double> adjoint_gradient_from_output(const CircuitLayout& layout,
                                                 std::span<const double> params,
                                                 StateVector output_state,
                                                 const ZObservable& obs);

}  // namespace qfl::sim
