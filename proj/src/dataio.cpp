#include "qfl/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qfl/rng.hpp"

namespace qfl::data {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

bool is_power_of_two(int x) { return x > 0 && (x & (x - 1)) == 0; }

std::uint32_t read_be_u32(std::ifstream& in, const std::string& path,
                          std::streamoff offset) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw std::runtime_error(path + ": truncated at byte offset " +
                                 std::to_string(offset));
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

std::ifstream open_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return in;
}

}  // namespace

Dataset load_mnist_idx(const std::string& images_path,
                       const std::string& labels_path) {
    std::ifstream img = open_binary(images_path);
    const std::uint32_t img_magic = read_be_u32(img, images_path, 0);
    if (img_magic != kImagesMagic) {
        std::ostringstream msg;
        msg << images_path << ": bad magic 0x" << std::hex << img_magic
            << " at byte offset 0 (expected 0x" << kImagesMagic << ")";
        throw std::runtime_error(msg.str());
    }
    const std::uint32_t n_images = read_be_u32(img, images_path, 4);
    const std::uint32_t n_rows = read_be_u32(img, images_path, 8);
    const std::uint32_t n_cols = read_be_u32(img, images_path, 12);

    std::ifstream lab = open_binary(labels_path);
    const std::uint32_t lab_magic = read_be_u32(lab, labels_path, 0);
    if (lab_magic != kLabelsMagic) {
        std::ostringstream msg;
        msg << labels_path << ": bad magic 0x" << std::hex << lab_magic
            << " at byte offset 0 (expected 0x" << kLabelsMagic << ")";
        throw std::runtime_error(msg.str());
    }
    const std::uint32_t n_labels = read_be_u32(lab, labels_path, 4);
    if (n_images != n_labels)
        throw std::runtime_error("image/label count mismatch: " +
                                 std::to_string(n_images) + " images vs " +
                                 std::to_string(n_labels) + " labels");

    const std::size_t pixels = std::size_t(n_rows) * n_cols;
    Dataset ds;
    ds.n_samples = int(n_images);
    ds.feature_dim = int(pixels);
    ds.n_classes = 10;
    ds.features.resize(std::size_t(n_images) * pixels);
    ds.labels.resize(n_images);

    std::vector<unsigned char> buf(pixels);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        img.read(reinterpret_cast<char*>(buf.data()), std::streamsize(pixels));
        if (!img)
            throw std::runtime_error(images_path + ": truncated at byte offset " +
                                     std::to_string(16 + std::size_t(i) * pixels));
        for (std::size_t p = 0; p < pixels; ++p)
            ds.features[std::size_t(i) * pixels + p] = buf[p] / 255.0;
    }
    for (std::uint32_t i = 0; i < n_labels; ++i) {
        unsigned char l = 0;
        lab.read(reinterpret_cast<char*>(&l), 1);
        if (!lab)
            throw std::runtime_error(labels_path + ": truncated at byte offset " +
                                     std::to_string(8 + i));
        if (l > 9)
            throw std::runtime_error(labels_path + ": label " + std::to_string(int(l)) +
                                     " out of range at index " + std::to_string(i));
        ds.labels[i] = int(l);
    }
    return ds;
}

Dataset prepare_for_encoding(const Dataset& dataset, int target_dim) {
    if (!is_power_of_two(target_dim))
        throw std::invalid_argument("target_dim " + std::to_string(target_dim) +
                                    " is not a power of two");
    if (target_dim < dataset.feature_dim)
        throw std::invalid_argument("target_dim " + std::to_string(target_dim) +
                                    " smaller than feature_dim " +
                                    std::to_string(dataset.feature_dim));
    Dataset out;
    out.n_samples = dataset.n_samples;
    out.feature_dim = target_dim;
    out.n_classes = dataset.n_classes;
    out.split = dataset.split;
    out.labels = dataset.labels;
    out.features.assign(std::size_t(dataset.n_samples) * target_dim, 0.0);
    for (int i = 0; i < dataset.n_samples; ++i) {
        const auto src = dataset.row(i);
        double sq = 0.0;
        for (double v : src) sq += v * v;
        const double nrm = std::sqrt(sq);
        if (nrm <= 1e-12)
            throw std::runtime_error("all-zero feature row at index " +
                                     std::to_string(i) + " cannot be encoded");
        double* dst = out.features.data() + std::size_t(i) * target_dim;
        for (int j = 0; j < dataset.feature_dim; ++j) dst[j] = src[j] / nrm;
    }
    return out;
}

Dataset load_feature_csv(const std::string& path, int feature_dim, int n_classes) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    Dataset ds;
    ds.feature_dim = feature_dim;
    ds.n_classes = n_classes;

    std::string line;
    int line_no = 0;
    bool saw_data = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);

        if (!saw_data && line_no == 1) {
            // Optional header: skip iff the first cell is not numeric.
            char* end = nullptr;
            std::strtod(cells[0].c_str(), &end);
            if (end == cells[0].c_str()) continue;
        }
        if (int(cells.size()) != feature_dim + 1)
            throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(feature_dim + 1) +
                                     " cells, got " + std::to_string(cells.size()));
        for (int j = 0; j < feature_dim; ++j) {
            char* end = nullptr;
            const double v = std::strtod(cells[j].c_str(), &end);
            if (end == cells[j].c_str() || *end != '\0')
                throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                         ": non-numeric cell '" + cells[j] + "'");
            ds.features.push_back(v);
        }
        char* end = nullptr;
        const long label = std::strtol(cells.back().c_str(), &end, 10);
        if (end == cells.back().c_str() || *end != '\0')
            throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                     ": non-integer label '" + cells.back() + "'");
        if (label < 0 || label >= n_classes)
            throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                     ": label " + std::to_string(label) +
                                     " out of range [0, " + std::to_string(n_classes) +
                                     ")");
        ds.labels.push_back(int(label));
        saw_data = true;
        ++ds.n_samples;
    }
    if (!saw_data) throw std::runtime_error(path + ": no data rows");
    return ds;
}

Dataset synthesize_binary(int n_samples, int feature_dim, double class_separation,
                          std::uint64_t seed) {
    if (!is_power_of_two(feature_dim) || feature_dim < 2)
        throw std::invalid_argument("feature_dim " + std::to_string(feature_dim) +
                                    " must be a power of two >= 2");
    if (class_separation < 0.0)
        throw std::invalid_argument("class_separation must be >= 0");
    Rng rng(derive_seed(seed, 0, 0, "synth_binary"));
    Dataset ds;
    ds.n_samples = n_samples;
    ds.feature_dim = feature_dim;
    ds.n_classes = 2;
    ds.features.resize(std::size_t(n_samples) * feature_dim);
    ds.labels.resize(n_samples);
    // Blob means sit class_separation apart along the second axis, offset along
    // the first so the normalized rows are never antipodal: amplitude encoding
    // cannot see a pure sign flip (global phase), only the angular gap.
    const double half = class_separation / 2.0;
    for (int i = 0; i < n_samples; ++i) {
        const int label = i % 2;
        ds.labels[i] = label;
        double* row = ds.features.data() + std::size_t(i) * feature_dim;
        for (int j = 0; j < feature_dim; ++j) row[j] = rng.normal();
        row[0] += class_separation;
        row[1] += (label == 0) ? -half : half;
    }
    return ds;
}

Dataset downsample_images(const Dataset& dataset, int src_h, int src_w, int dst_h,
                          int dst_w) {
    if (src_h * src_w != dataset.feature_dim)
        throw std::invalid_argument("downsample: source geometry " +
                                    std::to_string(src_h) + "x" + std::to_string(src_w) +
                                    " does not match feature_dim " +
                                    std::to_string(dataset.feature_dim));
    Dataset out;
    out.n_samples = dataset.n_samples;
    out.feature_dim = dst_h * dst_w;
    out.n_classes = dataset.n_classes;
    out.split = dataset.split;
    out.labels = dataset.labels;
    out.features.resize(std::size_t(dataset.n_samples) * out.feature_dim);
    for (int i = 0; i < dataset.n_samples; ++i) {
        const auto src = dataset.row(i);
        double* dst = out.features.data() + std::size_t(i) * out.feature_dim;
        for (int r = 0; r < dst_h; ++r) {
            const int r0 = r * src_h / dst_h;
            const int r1 = (r + 1) * src_h / dst_h;
            for (int c = 0; c < dst_w; ++c) {
                const int c0 = c * src_w / dst_w;
                const int c1 = (c + 1) * src_w / dst_w;
                double acc = 0.0;
                for (int rr = r0; rr < r1; ++rr)
                    for (int cc = c0; cc < c1; ++cc) acc += src[rr * src_w + cc];
                dst[r * dst_w + c] = acc / double((r1 - r0) * (c1 - c0));
            }
        }
    }
    return out;
}

Dataset filter_classes(const Dataset& dataset, const std::vector<int>& keep) {
    std::vector<int> remap(dataset.n_classes, -1);
    for (std::size_t k = 0; k < keep.size(); ++k) {
        if (keep[k] < 0 || keep[k] >= dataset.n_classes)
            throw std::invalid_argument("filter_classes: class " +
                                        std::to_string(keep[k]) + " out of range");
        remap[keep[k]] = int(k);
    }
    Dataset out;
    out.feature_dim = dataset.feature_dim;
    out.n_classes = int(keep.size());
    out.split = dataset.split;
    for (int i = 0; i < dataset.n_samples; ++i) {
        const int m = remap[dataset.labels[i]];
        if (m < 0) continue;
        const auto src = dataset.row(i);
        out.features.insert(out.features.end(), src.begin(), src.end());
        out.labels.push_back(m);
        ++out.n_samples;
    }
    return out;
}

std::pair<Dataset, Dataset> split_at(const Dataset& dataset, int n_train) {
    if (n_train < 0 || n_train > dataset.n_samples)
        throw std::invalid_argument("split_at: n_train " + std::to_string(n_train) +
                                    " out of range");
    auto slice = [&](int begin, int end) {
        Dataset d;
        d.feature_dim = dataset.feature_dim;
        d.n_classes = dataset.n_classes;
        d.n_samples = end - begin;
        d.features.assign(
            dataset.features.begin() + std::size_t(begin) * dataset.feature_dim,
            dataset.features.begin() + std::size_t(end) * dataset.feature_dim);
        d.labels.assign(dataset.labels.begin() + begin, dataset.labels.begin() + end);
        return d;
    };
    Dataset train = slice(0, n_train);
    Dataset test = slice(n_train, dataset.n_samples);
    train.split = Split::train;
    test.split = Split::test;
    return {std::move(train), std::move(test)};
}

}  // namespace qfl::data
