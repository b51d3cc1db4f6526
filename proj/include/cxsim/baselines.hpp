#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "cxsim/tensor.hpp"

namespace cxsim {

inline double l1_loss(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("l1_loss: length mismatch");
    double sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
    return sum;
}

inline double l2_loss(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("l2_loss: length mismatch");
    double sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        sum += diff * diff;
    }
    return std::sqrt(sum);
}

// Index-aligned elementwise L1 over two feature matrices; unlike the
// contextual and Gram losses this one is sensitive to row order.
inline double feature_l1_loss(const Matrix& x, const Matrix& y) {
    if (x.rows != y.rows)
        throw std::invalid_argument("feature_l1_loss: counts differ: x has " +
                                    std::to_string(x.rows) + ", y has " +
                                    std::to_string(y.rows));
    if (x.cols != y.cols)
        throw std::invalid_argument("feature_l1_loss: feature dims differ: x has " +
                                    std::to_string(x.cols) + ", y has " +
                                    std::to_string(y.cols));
    return l1_loss(x.data, y.data);
}

inline double feature_l1_loss(const FeatureSet& x, const FeatureSet& y) {
    return feature_l1_loss(x.features, y.features);
}

struct GramMatrix {
    std::size_t dim = 0;
    Matrix data;
};

inline GramMatrix gram_matrix(const Matrix& f) {
    GramMatrix gram;
    gram.dim = f.cols;
    gram.data = Matrix(f.cols, f.cols);
    const double norm = static_cast<double>(f.rows) * static_cast<double>(f.cols);
    std::vector<double> products(f.rows);
    for (std::size_t c1 = 0; c1 < f.cols; ++c1) {
        for (std::size_t c2 = c1; c2 < f.cols; ++c2) {
            for (std::size_t r = 0; r < f.rows; ++r) products[r] = f.at(r, c1) * f.at(r, c2);
            // sorted accumulation keeps each entry bit-identical under row
            // permutations of f
            std::sort(products.begin(), products.end());
            double sum = 0;
            for (double p : products) sum += p;
            const double v = sum / norm;
            gram.data.at(c1, c2) = v;
            gram.data.at(c2, c1) = v;
        }
    }
    return gram;
}

inline GramMatrix gram_matrix(const FeatureSet& fs) { return gram_matrix(fs.features); }

// Squared Frobenius distance between the N*D-normalized Gram matrices;
// invariant to row permutations of either set.
inline double gram_loss(const Matrix& x, const Matrix& y) {
    if (x.cols != y.cols)
        throw std::invalid_argument("gram_loss: feature dims differ: x has " +
                                    std::to_string(x.cols) + ", y has " +
                                    std::to_string(y.cols));
    const GramMatrix gx = gram_matrix(x);
    const GramMatrix gy = gram_matrix(y);
    double sum = 0;
    for (std::size_t i = 0; i < gx.data.data.size(); ++i) {
        const double diff = gx.data.data[i] - gy.data.data[i];
        sum += diff * diff;
    }
    return sum;
}

inline double gram_loss(const FeatureSet& x, const FeatureSet& y) {
    return gram_loss(x.features, y.features);
}

}  // namespace cxsim
