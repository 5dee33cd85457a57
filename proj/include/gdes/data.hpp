#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gdes/net.hpp"

namespace gdes {

// Immutable after construction; inputs are scaled to [0, 1] by the loaders.
struct Dataset {
    Matrix inputs;              // n x features
    std::vector<int> labels;    // n entries in [0, class_count)
    int class_count = 0;
    std::string provenance;

    std::size_t size() const { return labels.size(); }
    std::size_t features() const { return inputs.cols; }
};

struct FoldAssignment {
    int fold_count = 0;
    std::vector<int> assignment;   // fold index per sample

    std::vector<std::size_t> fold_indices(int fold) const;
    std::vector<std::size_t> complement_indices(int fold) const;
};

struct NoiseSpec {
    double fraction = 0.0;        // in [0, 1]
    std::uint64_t seed = 0;
};

// MNIST IDX pair: images magic 0x00000803, labels magic 0x00000801, both
// big-endian; pixels divided by 255.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// CIFAR-10 binary batches: 3073-byte records, 1 label byte + 3072 pixel
// bytes (R, G, B planes); pixels divided by 255.
Dataset load_cifar10_bin(const std::vector<std::string>& paths);

// Gaussian blobs around k fixed class centers with isotropic noise of the
// given spread. Classes are balanced to within one sample; sample order is
// shuffled. Deterministic in the seed.
Dataset gen_synthetic_blobs(std::size_t n, std::size_t features, int k, double spread,
                            std::uint64_t seed);

// Picks exactly round(fraction * n) distinct samples uniformly at random and
// resamples each of their labels uniformly over all k classes; the new label
// may coincide with the old one.
Dataset inject_label_noise(const Dataset& ds, const NoiseSpec& spec);

// Shuffled partition into k folds whose sizes differ by at most one.
FoldAssignment kfold_assign(std::size_t n, int k, std::uint64_t seed);

// Disjoint batches covering the dataset once, in a fresh per-epoch order
// derived from (seed, epoch_index). The last batch may be short.
std::vector<Batch> epoch_batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                                 std::uint64_t epoch_index);

// Row subset preserving order of `indices`.
Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices);

Batch full_batch(const Dataset& ds);

}  // namespace gdes
