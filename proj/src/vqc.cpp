#include "qfl/vqc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qfl::vqc {

namespace {

constexpr double kProbClamp = 1e-12;

double clamp_prob(double p) {
    return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
}

std::vector<double> softmax(const std::vector<double>& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

int argmax_lowest(const std::vector<double>& v) {
    int best = 0;
    for (int i = 1; i < int(v.size()); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

void check_task(const sim::CircuitLayout& layout, const Task& task) {
    if (task.kind == Task::Kind::multiclass && task.n_classes > layout.n_qubits)
        throw std::invalid_argument("multiclass readout needs n_classes <= n_qubits: " +
                                    std::to_string(task.n_classes) + " > " +
                                    std::to_string(layout.n_qubits));
}

Prediction predict_from_state(const sim::CircuitLayout& layout,
                              const sim::StateVector& out, const Task& task) {
    Prediction pred;
    if (task.kind == Task::Kind::binary) {
        const double z = sim::expectation_z(out, layout.n_qubits - 1);
        pred.logits = {z};
        const double p1 = (1.0 - z) / 2.0;
        pred.probabilities = {1.0 - p1, p1};
    } else {
        pred.logits.resize(task.n_classes);
        for (int k = 0; k < task.n_classes; ++k)
            pred.logits[k] = sim::expectation_z(out, k);
        pred.probabilities = softmax(pred.logits);
    }
    pred.predicted_class = argmax_lowest(pred.probabilities);
    return pred;
}

}  // namespace

Prediction forward(const sim::CircuitLayout& layout, const ParameterVector& params,
                   const sim::StateVector& encoded_input, const Task& task) {
    check_task(layout, task);
    const sim::StateVector out = sim::run_circuit(layout, params.values(), encoded_input);
    return predict_from_state(layout, out, task);
}

double loss(const Prediction& prediction, int label) {
    if (label < 0 || label >= int(prediction.probabilities.size()))
        throw std::invalid_argument("loss: label " + std::to_string(label) +
                                    " out of range for " +
                                    std::to_string(prediction.probabilities.size()) +
                                    " classes");
    return -std::log(clamp_prob(prediction.probabilities[label]));
}

std::vector<double> sample_gradient(const sim::CircuitLayout& layout,
                                    const ParameterVector& params,
                                    std::span<const double> row, int label,
                                    const Task& task) {
    return sample_gradient(layout, params, row, label, task, nullptr);
}

std::vector<double> sample_gradient(const sim::CircuitLayout& layout,
                                    const ParameterVector& params,
                                    std::span<const double> row, int label,
                                    const Task& task, double* loss_out) {
    check_task(layout, task);
    sim::StateVector out =
        sim::run_circuit(layout, params.values(), sim::amplitude_encode(row));
    const Prediction pred = predict_from_state(layout, out, task);
    if (label < 0 || label >= int(pred.probabilities.size()))
        throw std::invalid_argument("sample_gradient: label " + std::to_string(label) +
                                    " out of range for " +
                                    std::to_string(pred.probabilities.size()) +
                                    " classes");
    if (loss_out) *loss_out = loss(pred, label);

    // Seed weights w_k = d loss / d <Z_k>. Outside the clamp window the
    // clamped loss is locally constant, so the seed is zero.
    const double p_label = pred.probabilities[label];
    sim::ZObservable obs;
    if (p_label < kProbClamp || p_label > 1.0 - kProbClamp) {
        return std::vector<double>(layout.param_count(), 0.0);
    }
    if (task.kind == Task::Kind::binary) {
        // p1 = (1 - z)/2:  d loss/dz = 1/(2 p1) for label 1, -1/(2 p0) for label 0.
        const double w = (label == 1) ? 1.0 / (2.0 * p_label) : -1.0 / (2.0 * p_label);
        obs.terms = {{layout.n_qubits - 1, w}};
    } else {
        // Softmax cross-entropy: d loss / d z_k = p_k - [k == label].
        obs.terms.reserve(task.n_classes);
        for (int k = 0; k < task.n_classes; ++k)
            obs.terms.emplace_back(k, pred.probabilities[k] - (k == label ? 1.0 : 0.0));
    }
    return sim::adjoint_gradient_from_output(layout, params.values(), std::move(out),
                                             obs);
}

FisherVector fisher_diagonal(const sim::CircuitLayout& layout,
                             const ParameterVector& params,
                             std::span<const SampleRef> samples, const Task& task,
                             FisherMode mode) {
    if (samples.empty())
        throw std::invalid_argument("fisher_diagonal: dataset slice is empty");
    FisherVector fisher(layout);
    if (mode == FisherMode::per_sample) {
        for (const SampleRef& s : samples) {
            const auto g = sample_gradient(layout, params, s.row, s.label, task);
            for (std::size_t j = 0; j < g.size(); ++j) fisher[j] += g[j] * g[j];
        }
        for (std::size_t j = 0; j < fisher.size(); ++j)
            fisher[j] /= double(samples.size());
    } else {
        std::vector<double> mean(layout.param_count(), 0.0);
        for (const SampleRef& s : samples) {
            const auto g = sample_gradient(layout, params, s.row, s.label, task);
            for (std::size_t j = 0; j < g.size(); ++j) mean[j] += g[j];
        }
        for (std::size_t j = 0; j < mean.size(); ++j) {
            mean[j] /= double(samples.size());
            fisher[j] = mean[j] * mean[j];
        }
    }
    return fisher;
}

FisherVector normalize_fisher_layerwise(const FisherVector& fisher) {
    const sim::CircuitLayout& layout = fisher.layout();
    const std::size_t per_layer = 2 * std::size_t(layout.n_qubits);
    FisherVector out(layout);
    for (int layer = 0; layer < layout.n_layers; ++layer) {
        const std::size_t begin = layer * per_layer;
        double lo = fisher[begin], hi = fisher[begin];
        for (std::size_t j = begin + 1; j < begin + per_layer; ++j) {
            lo = std::min(lo, fisher[j]);
            hi = std::max(hi, fisher[j]);
        }
        const double range = hi - lo;
        if (range < 1e-12) {
            for (std::size_t j = begin; j < begin + per_layer; ++j) out[j] = 0.0;
        } else {
            for (std::size_t j = begin; j < begin + per_layer; ++j)
                out[j] = (fisher[j] - lo) / range;
        }
    }
    return out;
}

}  // namespace qfl::vqc
