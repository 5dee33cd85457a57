#include "gdes/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "gdes/errors.hpp"
#include "gdes/rng.hpp"

namespace gdes {

namespace {

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    if (!in) throw DataFormatError("truncated header in " + path);
    return (static_cast<std::uint32_t>(bytes[0]) << 24) |
           (static_cast<std::uint32_t>(bytes[1]) << 16) |
           (static_cast<std::uint32_t>(bytes[2]) << 8) | static_cast<std::uint32_t>(bytes[3]);
}

std::vector<unsigned char> read_bytes(std::istream& in, std::size_t count,
                                      const std::string& path) {
    std::vector<unsigned char> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count)
        throw DataFormatError("truncated data in " + path);
    return buf;
}

// Class centers on a fixed layout with pairwise distance independent of the
// seed: standard basis vectors scaled by sqrt(2) when the space is wide
// enough (a regular simplex), otherwise a circle in the first two
// coordinates, or evenly spaced points when only one feature exists.
std::vector<double> class_center(int cls, std::size_t features, int k) {
    std::vector<double> center(features, 0.0);
    if (features >= static_cast<std::size_t>(k)) {
        center[static_cast<std::size_t>(cls)] = std::numbers::sqrt2;
    } else if (features >= 2) {
        const double angle = 2.0 * std::numbers::pi * cls / k;
        center[0] = std::numbers::sqrt2 * std::cos(angle);
        center[1] = std::numbers::sqrt2 * std::sin(angle);
    } else {
        center[0] = 2.0 * cls;
    }
    return center;
}

}  // namespace

std::vector<std::size_t> FoldAssignment::fold_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldAssignment::complement_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] != fold) out.push_back(i);
    return out;
}

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream images(images_path, std::ios::binary);
    if (!images) throw DataFormatError("cannot open " + images_path);
    std::ifstream labels(labels_path, std::ios::binary);
    if (!labels) throw DataFormatError("cannot open " + labels_path);

    const std::uint32_t images_magic = read_u32_be(images, images_path);
    if (images_magic != 0x00000803u)
        throw DataFormatError("bad IDX image magic in " + images_path);
    const std::uint32_t n = read_u32_be(images, images_path);
    const std::uint32_t rows = read_u32_be(images, images_path);
    const std::uint32_t cols = read_u32_be(images, images_path);

    const std::uint32_t labels_magic = read_u32_be(labels, labels_path);
    if (labels_magic != 0x00000801u)
        throw DataFormatError("bad IDX label magic in " + labels_path);
    const std::uint32_t label_n = read_u32_be(labels, labels_path);
    if (label_n != n)
        throw DataFormatError("image/label count mismatch: " + std::to_string(n) + " vs " +
                              std::to_string(label_n));
    if (n == 0) throw DataFormatError("empty IDX dataset");

    const std::size_t features = static_cast<std::size_t>(rows) * cols;
    const auto pixel_bytes = read_bytes(images, static_cast<std::size_t>(n) * features,
                                        images_path);
    const auto label_bytes = read_bytes(labels, n, labels_path);

    Dataset ds;
    ds.inputs = Matrix(n, features);
    for (std::size_t i = 0; i < pixel_bytes.size(); ++i)
        ds.inputs.data[i] = static_cast<double>(pixel_bytes[i]) / 255.0;
    ds.labels.resize(n);
    ds.class_count = 10;
    for (std::size_t i = 0; i < n; ++i) {
        if (label_bytes[i] >= 10)
            throw DataFormatError("label byte out of range in " + labels_path);
        ds.labels[i] = static_cast<int>(label_bytes[i]);
    }
    ds.provenance = "mnist:" + images_path;
    return ds;
}

Dataset load_cifar10_bin(const std::vector<std::string>& paths) {
    constexpr std::size_t kRecord = 3073;
    constexpr std::size_t kPixels = 3072;
    if (paths.empty()) throw DataFormatError("no CIFAR-10 files given");

    Dataset ds;
    ds.class_count = 10;
    std::vector<double> pixels;
    for (const auto& path : paths) {
        std::ifstream file(path, std::ios::binary | std::ios::ate);
        if (!file) throw DataFormatError("cannot open " + path);
        const auto length = static_cast<std::size_t>(file.tellg());
        if (length == 0 || length % kRecord != 0)
            throw DataFormatError("file length " + std::to_string(length) +
                                  " is not a multiple of 3073: " + path);
        file.seekg(0);
        const auto bytes = read_bytes(file, length, path);
        for (std::size_t rec = 0; rec < length / kRecord; ++rec) {
            const unsigned char* record = bytes.data() + rec * kRecord;
            if (record[0] >= 10)
                throw DataFormatError("label byte " + std::to_string(record[0]) +
                                      " out of range in " + path);
            ds.labels.push_back(static_cast<int>(record[0]));
            for (std::size_t p = 0; p < kPixels; ++p)
                pixels.push_back(static_cast<double>(record[1 + p]) / 255.0);
        }
    }
    ds.inputs = Matrix(ds.labels.size(), kPixels);
    ds.inputs.data = std::move(pixels);
    ds.provenance = "cifar10:" + paths.front();
    return ds;
}

Dataset gen_synthetic_blobs(std::size_t n, std::size_t features, int k, double spread,
                            std::uint64_t seed) {
    if (k < 2) throw ConfigError("need at least two classes");
    if (n < static_cast<std::size_t>(k)) throw ConfigError("need at least one sample per class");
    if (features == 0) throw ConfigError("need at least one feature");
    if (spread < 0.0) throw ConfigError("spread must be nonnegative");

    Rng rng(seed);
    Dataset ds;
    ds.inputs = Matrix(n, features);
    ds.labels.resize(n);
    ds.class_count = k;
    ds.provenance = "synthetic_blobs";

    // Round-robin class assignment keeps counts balanced to within one;
    // noise is drawn in sample order, then rows are shuffled.
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = static_cast<int>(i % static_cast<std::size_t>(k));
        ds.labels[i] = cls;
        const std::vector<double> center = class_center(cls, features, k);
        double* row = ds.inputs.row(i);
        for (std::size_t f = 0; f < features; ++f) row[f] = center[f] + spread * rng.normal();
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    return subset(ds, order);
}

Dataset inject_label_noise(const Dataset& ds, const NoiseSpec& spec) {
    if (spec.fraction < 0.0 || spec.fraction > 1.0)
        throw ConfigError("noise fraction must lie in [0, 1]");
    Dataset out = ds;
    const std::size_t n = ds.size();
    const auto flips =
        static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(n)));
    if (flips == 0) return out;

    Rng rng(spec.seed);
    // Partial Fisher-Yates: the first `flips` entries are a uniform
    // without-replacement draw.
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < flips; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
        std::swap(pool[i], pool[j]);
        out.labels[pool[i]] =
            static_cast<int>(rng.next_below(static_cast<std::uint64_t>(ds.class_count)));
    }
    return out;
}

FoldAssignment kfold_assign(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("fold count must be at least 2");
    if (static_cast<std::size_t>(k) > n) throw ConfigError("more folds than samples");

    Rng rng(seed);
    std::vector<std::size_t> perm = Rng::permutation(n, rng);

    FoldAssignment fa;
    fa.fold_count = k;
    fa.assignment.assign(n, -1);
    const std::size_t base = n / static_cast<std::size_t>(k);
    const std::size_t extra = n % static_cast<std::size_t>(k);
    std::size_t pos = 0;
    for (int fold = 0; fold < k; ++fold) {
        const std::size_t len = base + (static_cast<std::size_t>(fold) < extra ? 1 : 0);
        for (std::size_t i = 0; i < len; ++i) fa.assignment[perm[pos++]] = fold;
    }
    return fa;
}

std::vector<Batch> epoch_batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                                 std::uint64_t epoch_index) {
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    const std::size_t n = ds.size();
    Rng rng(seed, epoch_index);
    std::vector<std::size_t> perm = Rng::permutation(n, rng);

    std::vector<Batch> batches;
    batches.reserve((n + batch_size - 1) / batch_size);
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t len = std::min(batch_size, n - start);
        Batch batch;
        batch.inputs = Matrix(len, ds.features());
        batch.labels.resize(len);
        for (std::size_t i = 0; i < len; ++i) {
            const std::size_t src = perm[start + i];
            const double* srow = ds.inputs.row(src);
            std::copy(srow, srow + ds.features(), batch.inputs.row(i));
            batch.labels[i] = ds.labels[src];
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.class_count = ds.class_count;
    out.provenance = ds.provenance;
    out.inputs = Matrix(indices.size(), ds.features());
    out.labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const double* srow = ds.inputs.row(indices[i]);
        std::copy(srow, srow + ds.features(), out.inputs.row(i));
        out.labels[i] = ds.labels[indices[i]];
    }
    return out;
}

Batch full_batch(const Dataset& ds) {
    Batch batch;
    batch.inputs = ds.inputs;
    batch.labels = ds.labels;
    return batch;
}

}  // namespace gdes
