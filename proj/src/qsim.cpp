#include "qfl/qsim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qfl::sim {

namespace {

bool is_power_of_two(std::size_t x) { return x != 0 && (x & (x - 1)) == 0; }

int log2_exact(std::size_t x) {
    int n = 0;
    while ((std::size_t{1} << n) < x) ++n;
    return n;
}

}  // namespace

StateVector::StateVector(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 1)
        throw std::invalid_argument("StateVector: n_qubits must be >= 1, got " +
                                    std::to_string(n_qubits));
    amps_.assign(std::size_t{1} << n_qubits, cdouble{0.0, 0.0});
    amps_[0] = cdouble{1.0, 0.0};
}

StateVector::StateVector(int n_qubits, std::vector<cdouble> amplitudes)
    : n_qubits_(n_qubits), amps_(std::move(amplitudes)) {
    if (n_qubits < 1)
        throw std::invalid_argument("StateVector: n_qubits must be >= 1");
    if (amps_.size() != (std::size_t{1} << n_qubits))
        throw std::invalid_argument(
            "StateVector: amplitude count " + std::to_string(amps_.size()) +
            " does not match 2^" + std::to_string(n_qubits));
}

double StateVector::norm() const {
    double s = 0.0;
    for (const cdouble& a : amps_) s += std::norm(a);
    return std::sqrt(s);
}

void StateVector::check_qubit(int qubit) const {
    if (qubit < 0 || qubit >= n_qubits_)
        throw std::invalid_argument("qubit index " + std::to_string(qubit) +
                                    " out of range for " + std::to_string(n_qubits_) +
                                    " qubits");
}

void StateVector::apply_ry(int qubit, double theta) {
    check_qubit(qubit);
    const double c = std::cos(theta / 2.0);
    const double s = std::sin(theta / 2.0);
    const std::size_t mask = std::size_t{1} << qubit;
    const std::size_t lo = mask - 1;
    const std::size_t hi = ~lo;
    const std::size_t half = amps_.size() >> 1;
    for (std::size_t i = 0; i < half; ++i) {
        const std::size_t i0 = ((i & hi) << 1) | (i & lo);
        const std::size_t i1 = i0 | mask;
        const cdouble a0 = amps_[i0];
        const cdouble a1 = amps_[i1];
        amps_[i0] = c * a0 - s * a1;
        amps_[i1] = s * a0 + c * a1;
    }
}

void StateVector::apply_rx(int qubit, double theta) {
    check_qubit(qubit);
    const double c = std::cos(theta / 2.0);
    const double s = std::sin(theta / 2.0);
    const cdouble mis{0.0, -s};  // -i sin(t/2)
    const std::size_t mask = std::size_t{1} << qubit;
    const std::size_t lo = mask - 1;
    const std::size_t hi = ~lo;
    const std::size_t half = amps_.size() >> 1;
    for (std::size_t i = 0; i < half; ++i) {
        const std::size_t i0 = ((i & hi) << 1) | (i & lo);
        const std::size_t i1 = i0 | mask;
        const cdouble a0 = amps_[i0];
        const cdouble a1 = amps_[i1];
        amps_[i0] = c * a0 + mis * a1;
        amps_[i1] = mis * a0 + c * a1;
    }
}

void StateVector::apply_cnot(int control, int target) {
    check_qubit(control);
    check_qubit(target);
    if (control == target)
        throw std::invalid_argument("CNOT control and target must differ, both are " +
                                    std::to_string(control));
    const std::size_t cmask = std::size_t{1} << control;
    const std::size_t tmask = std::size_t{1} << target;
    for (std::size_t j = 0; j < amps_.size(); ++j) {
        if ((j & cmask) && !(j & tmask)) std::swap(amps_[j], amps_[j | tmask]);
    }
}

StateVector amplitude_encode(std::span<const double> x) {
    if (!is_power_of_two(x.size()))
        throw std::invalid_argument("amplitude_encode: input length " +
                                    std::to_string(x.size()) +
                                    " is not a power of two");
    double sq = 0.0;
    for (double v : x) sq += v * v;
    const double nrm = std::sqrt(sq);
    if (nrm <= 1e-12)
        throw std::invalid_argument("amplitude_encode: input norm " +
                                    std::to_string(nrm) + " is too close to zero");
    std::vector<cdouble> amps(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) amps[j] = cdouble{x[j] / nrm, 0.0};
    return StateVector(log2_exact(x.size()), std::move(amps));
}

StateVector run_circuit(const CircuitLayout& layout, std::span<const double> params,
                        StateVector input_state) {
    if (params.size() != layout.param_count())
        throw std::invalid_argument(
            "run_circuit: expected " + std::to_string(layout.param_count()) +
            " parameters, got " + std::to_string(params.size()));
    if (input_state.n_qubits() != layout.n_qubits)
        throw std::invalid_argument("run_circuit: state has " +
                                    std::to_string(input_state.n_qubits()) +
                                    " qubits, layout expects " +
                                    std::to_string(layout.n_qubits));
    const int n = layout.n_qubits;
    for (int layer = 0; layer < layout.n_layers; ++layer) {
        for (int q = 0; q < n; ++q)
            input_state.apply_ry(q, params[layout.param_index(layer, 0, q)]);
        for (int q = 0; q < n; ++q)
            input_state.apply_rx(q, params[layout.param_index(layer, 1, q)]);
        for (int q = 0; q + 1 < n; ++q) input_state.apply_cnot(q, q + 1);
    }
    return input_state;
}

double expectation_z(const StateVector& state, int qubit) {
    if (qubit < 0 || qubit >= state.n_qubits())
        throw std::invalid_argument("expectation_z: qubit index " +
                                    std::to_string(qubit) + " out of range");
    const std::size_t mask = std::size_t{1} << qubit;
    double z = 0.0;
    const auto amps = state.amplitudes();
    for (std::size_t j = 0; j < amps.size(); ++j) {
        const double p = std::norm(amps[j]);
        z += (j & mask) ? -p : p;
    }
    return z;
}

double expectation(const StateVector& state, const ZObservable& obs) {
    double v = 0.0;
    for (const auto& [qubit, weight] : obs.terms)
        v += weight * expectation_z(state, qubit);
    return v;
}

namespace {

/// Applies O = sum_k w_k Z_{q_k}; diagonal in the computational basis.
StateVector apply_z_observable(const StateVector& state, const ZObservable& obs) {
    std::vector<cdouble> out(state.size());
    const auto amps = state.amplitudes();
    for (std::size_t j = 0; j < amps.size(); ++j) {
        double w = 0.0;
        for (const auto& [qubit, weight] : obs.terms)
            w += (j & (std::size_t{1} << qubit)) ? -weight : weight;
        out[j] = w * amps[j];
    }
    return StateVector(state.n_qubits(), std::move(out));
}

/// Im(<bra| X_q |ket>), without materialising X_q |ket>.
double im_bra_x_ket(const StateVector& bra, const StateVector& ket, int qubit) {
    const std::size_t mask = std::size_t{1} << qubit;
    cdouble acc{0.0, 0.0};
    const auto b = bra.amplitudes();
    const auto k = ket.amplitudes();
    for (std::size_t j = 0; j < b.size(); ++j)
        acc += std::conj(b[j]) * k[j ^ mask];
    return acc.imag();
}

/// Im(<bra| Y_q |ket>). (Y psi)_j = -i psi_{j|mask} for bit 0, +i psi_{j&~mask}
/// for bit 1.
double im_bra_y_ket(const StateVector& bra, const StateVector& ket, int qubit) {
    const std::size_t mask = std::size_t{1} << qubit;
    cdouble acc{0.0, 0.0};
    const auto b = bra.amplitudes();
    const auto k = ket.amplitudes();
    const cdouble i_pos{0.0, 1.0};
    const cdouble i_neg{0.0, -1.0};
    for (std::size_t j = 0; j < b.size(); ++j) {
        const cdouble phase = (j & mask) ? i_pos : i_neg;
        acc += std::conj(b[j]) * (phase * k[j ^ mask]);
    }
    return acc.imag();
}

}  // namespace

std::vector<double> adjoint_gradient_from_output(const CircuitLayout& layout,
                                                 std::span<const double> params,
                                                 StateVector output_state,
                                                 const ZObservable& obs) {
    if (params.size() != layout.param_count())
        throw std::invalid_argument(
            "adjoint_gradient: expected " + std::to_string(layout.param_count()) +
            " parameters, got " + std::to_string(params.size()));

    // Invariant while walking gate i from last to first:
    //   ket = G_i ... G_1 |input>,  bra = G_{i+1}^dag ... G_T^dag O |output>.
    // For G = exp(-i theta P / 2): d<O>/d theta = Im(<bra| P |ket>).
    StateVector ket = std::move(output_state);
    StateVector bra = apply_z_observable(ket, obs);

    const int n = layout.n_qubits;
    std::vector<double> grad(layout.param_count(), 0.0);
    for (int layer = layout.n_layers - 1; layer >= 0; --layer) {
        for (int q = n - 2; q >= 0; --q) {
            ket.apply_cnot(q, q + 1);
            bra.apply_cnot(q, q + 1);
        }
        for (int q = n - 1; q >= 0; --q) {
            const std::size_t idx = layout.param_index(layer, 1, q);
            grad[idx] = im_bra_x_ket(bra, ket, q);
            ket.apply_rx(q, -params[idx]);
            bra.apply_rx(q, -params[idx]);
        }
        for (int q = n - 1; q >= 0; --q) {
            const std::size_t idx = layout.param_index(layer, 0, q);
            grad[idx] = im_bra_y_ket(bra, ket, q);
            ket.apply_ry(q, -params[idx]);
            bra.apply_ry(q, -params[idx]);
        }
    }
    return grad;
}

std::vector<double> adjoint_gradient(const CircuitLayout& layout,
                                     std::span<const double> params,
                                     const StateVector& input_state,
                                     const ZObservable& obs) {
    return adjoint_gradient_from_output(layout, params,
                                        run_circuit(layout, params, input_state), obs);
}

}  // namespace qfl::sim
