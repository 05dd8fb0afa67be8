#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qfl::data {

enum class Split { train, test };

/// Immutable labelled feature matrix, row-major.
struct Dataset {
    std::vector<double> features;  // n_samples * feature_dim
    std::vector<int> labels;       // in [0, n_classes)
    int n_samples = 0;
    int feature_dim = 0;
    int n_classes = 0;
    Split split = Split::train;

    std::span<const double> row(int i) const {
        return std::span<const double>(features).subspan(std::size_t(i) * feature_dim,
                                                         feature_dim);
    }
};

/// Reads an MNIST-format IDX image/label pair (big-endian, magic 0x00000803 /
/// 0x00000801). Pixels are scaled to [0, 1]; image and label counts must match.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

/// Zero-pads every row to target_dim (a power of two >= feature_dim) and
/// L2-normalizes it, ready for amplitude encoding. All-zero rows are rejected.
Dataset prepare_for_encoding(const Dataset& dataset, int target_dim);

/// Each row: feature_dim comma-separated reals followed by an integer label.
/// A single non-numeric header line is allowed. Malformed rows fail with
/// their line number.
Dataset load_feature_csv(const std::string& path, int feature_dim, int n_classes);

/// Two Gaussian blobs (unit covariance) with mean distance class_separation
/// along the first axis; labels alternate 0,1,0,1,... Deterministic per seed.
Dataset synthesize_binary(int n_samples, int feature_dim, double class_separation,
                          std::uint64_t seed);

/// Mean-pools src_h x src_w images down to dst_h x dst_w (fractional block
/// edges handled by index ranges).
Dataset downsample_images(const Dataset& dataset, int src_h, int src_w, int dst_h,
                          int dst_w);

/// Keeps only the listed classes and relabels them 0..k-1 in list order.
Dataset filter_classes(const Dataset& dataset, const std::vector<int>& keep);

/// Splits by index: rows [0, n_train) and [n_train, n); disjoint by construction.
std::pair<Dataset, Dataset> split_at(const Dataset& dataset, int n_train);

}  // namespace qfl::data
