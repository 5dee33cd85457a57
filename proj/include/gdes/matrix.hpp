#pragma once

#include <cstddef>
#include <vector>

namespace gdes {

// Dense row-major matrix of doubles. Deliberately minimal: the training
// code owns its own multiply loops, so this is storage plus indexing.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double* row(std::size_t r) { return data.data() + r * cols; }

    std::size_t size() const { return data.size(); }
};

}  // namespace gdes
