#pragma once

#include <span>
#include <vector>

#include "qfl/qsim.hpp"

namespace qfl::vqc {

enum class Axis { ry = 0, rx = 1 };

/// Flat rotation-angle vector for one CircuitLayout.
/// Index map: (layer, axis, qubit) -> layer * 2n + axis * n + qubit.
class ParameterVector {
public:
    ParameterVector() = default;
    explicit ParameterVector(const sim::CircuitLayout& layout)
        : layout_(layout), values_(layout.param_count(), 0.0) {}

    const sim::CircuitLayout& layout() const { return layout_; }
    std::size_t size() const { return values_.size(); }

    double& at(int layer, Axis axis, int qubit) {
        return values_[layout_.param_index(layer, int(axis), qubit)];
    }
    double at(int layer, Axis axis, int qubit) const {
        return values_[layout_.param_index(layer, int(axis), qubit)];
    }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

private:
    sim::CircuitLayout layout_{};
    std::vector<double> values_;
};

/// Per-parameter nonnegative sensitivities, same shape as ParameterVector.
class FisherVector {
public:
    FisherVector() = default;
    explicit FisherVector(const sim::CircuitLayout& layout)
        : layout_(layout), values_(layout.param_count(), 0.0) {}

    const sim::CircuitLayout& layout() const { return layout_; }
    std::size_t size() const { return values_.size(); }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

private:
    sim::CircuitLayout layout_{};
    std::vector<double> values_;
};

/// binary: readout is <Z> on the last qubit, p(class 1) = (1 - <Z>)/2.
/// multiclass(K): logits are <Z_0>..<Z_{K-1}>, probabilities = softmax.
struct Task {
    enum class Kind { binary, multiclass };
    Kind kind = Kind::binary;
    int n_classes = 2;

    static Task binary() { return Task{Kind::binary, 2}; }
    static Task multiclass(int k) { return Task{Kind::multiclass, k}; }
};

struct Prediction {
    std::vector<double> logits;
    std::vector<double> probabilities;
    int predicted_class = 0;
};

/// How fisher_diagonal aggregates over the dataset. per_sample is the mean of
/// per-sample squared gradients; per_batch squares the mean gradient instead.
enum class FisherMode { per_sample, per_batch };

Prediction forward(const sim::CircuitLayout& layout, const ParameterVector& params,
                   const sim::StateVector& encoded_input, const Task& task);

/// Cross-entropy: -log(p[label]), probability clamped to [1e-12, 1 - 1e-12].
double loss(const Prediction& prediction, int label);

/// d loss / d theta_j for one (row, label) sample via one adjoint sweep: the
/// softmax/affine readout derivative seeds the Z-observable weights.
std::vector<double> sample_gradient(const sim::CircuitLayout& layout,
                                    const ParameterVector& params,
                                    std::span<const double> row, int label,
                                    const Task& task);

/// Also returns the sample's loss; saves a forward pass in training loops.
std::vector<double> sample_gradient(const sim::CircuitLayout& layout,
                                    const ParameterVector& params,
                                    std::span<const double> row, int label,
                                    const Task& task, double* loss_out);

/// A borrowed view of one labelled sample; the row must outlive the view.
struct SampleRef {
    std::span<const double> row;
    int label = 0;
};

/// Empirical Fisher diagonal over a dataset slice: F_j = mean of squared
/// per-sample log-likelihood gradients, evaluated at the given parameters.
/// Samples are reduced in the order given (determinism contract).
FisherVector fisher_diagonal(const sim::CircuitLayout& layout,
                             const ParameterVector& params,
                             std::span<const SampleRef> samples, const Task& task,
                             FisherMode mode = FisherMode::per_sample);

/// Per layer (its 2n parameters): F' = (F - min)/(max - min). A layer whose
/// range is below 1e-12 carries no ranking signal and maps to all zeros.
FisherVector normalize_fisher_layerwise(const FisherVector& fisher);

}  // namespace qfl::vqc
