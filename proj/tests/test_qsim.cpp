#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qfl/oracles.hpp"
#include "qfl/qsim.hpp"
#include "qfl/rng.hpp"

using namespace qfl;
using sim::cdouble;

namespace {

const double kSqrtHalf = std::sqrt(0.5);

void check_amps(const sim::StateVector& state, const std::vector<cdouble>& expected,
                double tol = 1e-12) {
    REQUIRE(state.size() == expected.size());
    for (std::size_t j = 0; j < expected.size(); ++j) {
        CAPTURE(j);
        CHECK(std::abs(state[j].real() - expected[j].real()) < tol);
        CHECK(std::abs(state[j].imag() - expected[j].imag()) < tol);
    }
}

sim::StateVector random_state(int n_qubits, Rng& rng) {
    std::vector<cdouble> amps(std::size_t{1} << n_qubits);
    double sq = 0.0;
    for (cdouble& a : amps) {
        a = cdouble{rng.normal(), rng.normal()};
        sq += std::norm(a);
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (cdouble& a : amps) a *= inv;
    return sim::StateVector(n_qubits, std::move(amps));
}

std::vector<double> random_params(const sim::CircuitLayout& layout, Rng& rng) {
    std::vector<double> p(layout.param_count());
    for (double& v : p) v = rng.normal(0.0, 1.0);
    return p;
}

}  // namespace

TEST_CASE("amplitude encoding") {
    SUBCASE("one-hot maps to basis state") {
        const double x[] = {1, 0, 0, 0};
        check_amps(sim::amplitude_encode(x), {{1, 0}, {0, 0}, {0, 0}, {0, 0}});
    }
    SUBCASE("uniform vector normalizes") {
        const double x[] = {1, 1, 1, 1};
        check_amps(sim::amplitude_encode(x),
                   {{0.5, 0}, {0.5, 0}, {0.5, 0}, {0.5, 0}});
    }
    SUBCASE("3-4-5 triangle") {
        const double x[] = {3, 4};
        check_amps(sim::amplitude_encode(x), {{0.6, 0}, {0.8, 0}});
    }
    SUBCASE("norm is 1 after encoding") {
        Rng rng(7);
        std::vector<double> x(64);
        for (double& v : x) v = rng.normal();
        CHECK(std::abs(sim::amplitude_encode(x).norm() - 1.0) < 1e-12);
    }
    SUBCASE("near-zero norm rejected") {
        const double x[] = {1e-13, 0.0};
        CHECK_THROWS_AS((void)sim::amplitude_encode(x), std::invalid_argument);
    }
    SUBCASE("length must be a power of two") {
        const double x[] = {1.0, 2.0, 3.0};
        CHECK_THROWS_AS((void)sim::amplitude_encode(x), std::invalid_argument);
    }
}

TEST_CASE("RY gate") {
    SUBCASE("RY(0) is identity") {
        Rng rng(3);
        sim::StateVector s = random_state(3, rng);
        const sim::StateVector before = s;
        s.apply_ry(1, 0.0);
        check_amps(s, {before.amplitudes().begin(), before.amplitudes().end()});
    }
    SUBCASE("RY(pi) flips |0> to |1>") {
        sim::StateVector s(1);
        s.apply_ry(0, M_PI);
        check_amps(s, {{0, 0}, {1, 0}});
    }
    SUBCASE("RY(pi/2) makes the real equal superposition") {
        sim::StateVector s(1);
        s.apply_ry(0, M_PI / 2);
        check_amps(s, {{kSqrtHalf, 0}, {kSqrtHalf, 0}});
    }
    SUBCASE("qubit index out of range") {
        sim::StateVector s(2);
        CHECK_THROWS_AS(s.apply_ry(2, 0.1), std::invalid_argument);
    }
}

TEST_CASE("RX gate") {
    SUBCASE("RX(0) is identity") {
        Rng rng(4);
        sim::StateVector s = random_state(2, rng);
        const sim::StateVector before = s;
        s.apply_rx(0, 0.0);
        check_amps(s, {before.amplitudes().begin(), before.amplitudes().end()});
    }
    SUBCASE("RX(pi) on |0> gives -i|1>") {
        sim::StateVector s(1);
        s.apply_rx(0, M_PI);
        check_amps(s, {{0, 0}, {0, -1}});
    }
    SUBCASE("RX(pi/2) on |0>") {
        sim::StateVector s(1);
        s.apply_rx(0, M_PI / 2);
        check_amps(s, {{kSqrtHalf, 0}, {0, -kSqrtHalf}});
    }
}

TEST_CASE("CNOT gate") {
    // Kets below read left to right as qubit 0, qubit 1 (qubit 0 = LSB).
    SUBCASE("control off leaves |00> alone") {
        sim::StateVector s(2);
        s.apply_cnot(0, 1);
        check_amps(s, {{1, 0}, {0, 0}, {0, 0}, {0, 0}});
    }
    SUBCASE("control on flips the target") {
        sim::StateVector s(2);
        s.apply_ry(0, M_PI);  // |10>
        s.apply_cnot(0, 1);
        check_amps(s, {{0, 0}, {0, 0}, {0, 0}, {1, 0}});  // |11> = index 3
    }
    SUBCASE("Bell construction") {
        sim::StateVector s(2);
        s.apply_ry(0, M_PI / 2);  // (|00> + |10>)/sqrt(2)
        s.apply_cnot(0, 1);
        check_amps(s, {{kSqrtHalf, 0}, {0, 0}, {0, 0}, {kSqrtHalf, 0}});
    }
    SUBCASE("equal indices rejected") {
        sim::StateVector s(2);
        CHECK_THROWS_AS(s.apply_cnot(1, 1), std::invalid_argument);
    }
}

TEST_CASE("run_circuit") {
    SUBCASE("all-zero parameters leave the ground state alone") {
        const sim::CircuitLayout layout{3, 2};
        std::vector<double> params(layout.param_count(), 0.0);
        const sim::StateVector out = sim::run_circuit(layout, params, sim::StateVector(3));
        check_amps(out, {{1, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}});
    }
    SUBCASE("single qubit, single layer") {
        const sim::CircuitLayout layout{1, 1};
        const std::vector<double> params = {M_PI, 0.0};  // RY(pi) then RX(0)
        const sim::StateVector out = sim::run_circuit(layout, params, sim::StateVector(1));
        check_amps(out, {{0, 0}, {1, 0}});
    }
    SUBCASE("matches the dense unitary-product oracle") {
        Rng rng(11);
        const sim::CircuitLayout layout{3, 2};
        const auto params = random_params(layout, rng);
        const sim::StateVector input = random_state(3, rng);
        const auto matrix = oracle::dense_circuit_unitary(layout, params);
        const auto expected = oracle::apply_matrix(matrix, input.amplitudes());
        const sim::StateVector got = sim::run_circuit(layout, params, input);
        for (std::size_t j = 0; j < expected.size(); ++j)
            CHECK(std::abs(expected[j] - got[j]) < 1e-12);
    }
    SUBCASE("parameter count mismatch") {
        const sim::CircuitLayout layout{2, 2};
        const std::vector<double> short_params(3, 0.0);
        CHECK_THROWS_AS(
            (void)sim::run_circuit(layout, short_params, sim::StateVector(2)),
            std::invalid_argument);
    }
}

TEST_CASE("expectation_z") {
    SUBCASE("ground state reads +1 everywhere") {
        const sim::StateVector s(3);
        for (int q = 0; q < 3; ++q) CHECK(sim::expectation_z(s, q) == doctest::Approx(1.0));
    }
    SUBCASE("flipped qubit reads -1") {
        sim::StateVector s(2);
        s.apply_ry(1, M_PI);
        CHECK(sim::expectation_z(s, 1) == doctest::Approx(-1.0));
        CHECK(sim::expectation_z(s, 0) == doctest::Approx(1.0));
    }
    SUBCASE("uniform superposition reads 0") {
        sim::StateVector s(3);
        for (int q = 0; q < 3; ++q) s.apply_ry(q, M_PI / 2);
        for (int q = 0; q < 3; ++q) CHECK(std::abs(sim::expectation_z(s, q)) < 1e-12);
    }
    SUBCASE("index convention: one-hot basis states") {
        for (std::size_t idx = 0; idx < 8; ++idx) {
            std::vector<double> x(8, 0.0);
            x[idx] = 1.0;
            const sim::StateVector s = sim::amplitude_encode(x);
            for (int q = 0; q < 3; ++q) {
                const double want = (idx >> q) & 1 ? -1.0 : 1.0;
                CHECK(sim::expectation_z(s, q) == doctest::Approx(want));
            }
        }
    }
}

TEST_CASE("adjoint gradient") {
    SUBCASE("d<Z>/d theta of RY at 0 is 0, at pi/2 is -1") {
        const sim::CircuitLayout layout{1, 1};
        const sim::ZObservable obs{{{0, 1.0}}};
        std::vector<double> params = {0.0, 0.0};
        auto g = sim::adjoint_gradient(layout, params, sim::StateVector(1), obs);
        CHECK(std::abs(g[0]) < 1e-12);
        params[0] = M_PI / 2;
        g = sim::adjoint_gradient(layout, params, sim::StateVector(1), obs);
        CHECK(g[0] == doctest::Approx(-1.0).epsilon(1e-10));
    }
    SUBCASE("triple agreement on random circuits") {
        Rng rng(17);
        const sim::CircuitLayout layout{4, 3};
        for (int trial = 0; trial < 10; ++trial) {
            const auto params = random_params(layout, rng);
            const sim::StateVector input = random_state(4, rng);
            sim::ZObservable obs;
            for (int q = 0; q < 4; ++q) obs.terms.emplace_back(q, rng.normal());
            const auto adj = sim::adjoint_gradient(layout, params, input, obs);
            const auto shift = oracle::parameter_shift_gradient(layout, params, input, obs);
            const auto fd =
                oracle::finite_difference_gradient(layout, params, input, obs, 1e-4);
            for (std::size_t j = 0; j < adj.size(); ++j) {
                CAPTURE(trial);
                CAPTURE(j);
                CHECK(std::abs(adj[j] - shift[j]) < 1e-10);
                CHECK(std::abs(adj[j] - fd[j]) < 1e-5);
            }
        }
    }
}

TEST_CASE("gate invariants") {
    Rng rng(23);
    SUBCASE("norm preserved across random gate sequences") {
        sim::StateVector s = random_state(4, rng);
        for (int step = 0; step < 200; ++step) {
            const int kind = int(rng.next_below(3));
            const int q = int(rng.next_below(4));
            if (kind == 0) s.apply_ry(q, rng.normal(0.0, 2.0));
            else if (kind == 1) s.apply_rx(q, rng.normal(0.0, 2.0));
            else s.apply_cnot(q, (q + 1) % 4);
            CHECK(std::abs(s.norm() - 1.0) < 1e-10);
        }
    }
    SUBCASE("unitarity round trips") {
        for (int trial = 0; trial < 20; ++trial) {
            const sim::StateVector before = random_state(3, rng);
            const double theta = rng.normal(0.0, 2.0);
            const int q = int(rng.next_below(3));

            sim::StateVector s = before;
            s.apply_ry(q, theta);
            s.apply_ry(q, -theta);
            check_amps(s, {before.amplitudes().begin(), before.amplitudes().end()});

            s = before;
            s.apply_rx(q, theta);
            s.apply_rx(q, -theta);
            check_amps(s, {before.amplitudes().begin(), before.amplitudes().end()});

            s = before;
            const int t = (q + 1) % 3;
            s.apply_cnot(q, t);
            s.apply_cnot(q, t);
            check_amps(s, {before.amplitudes().begin(), before.amplitudes().end()});
        }
    }
}
