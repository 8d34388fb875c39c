#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace darec::nn {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Vectors are stored as 1 x n when they
// live inside a ParamTensor.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {
        if (r == 0 || c == 0)
            throw std::invalid_argument("DenseMatrix: dimensions must be positive");
    }

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        return std::all_of(data.begin(), data.end(),
                           [](double x) { return std::isfinite(x); });
    }
};

inline void check_length(const Vector& x, std::size_t expected, const char* what) {
    if (x.size() != expected)
        throw std::invalid_argument(std::string(what) + ": expected length " +
                                    std::to_string(expected) + ", got " +
                                    std::to_string(x.size()));
}

// y = A x
inline Vector matvec(const DenseMatrix& a, const Vector& x) {
    check_length(x, a.cols, "matvec");
    Vector y(a.rows, 0.0);
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double* row = a.data.data() + r * a.cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < a.cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
    return y;
}

// y = A^T x
inline Vector matvec_transposed(const DenseMatrix& a, const Vector& x) {
    check_length(x, a.rows, "matvec_transposed");
    Vector y(a.cols, 0.0);
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double* row = a.data.data() + r * a.cols;
        const double xr = x[r];
        for (std::size_t c = 0; c < a.cols; ++c) y[c] += row[c] * xr;
    }
    return y;
}

// A += scale * (u v^T)
inline void add_outer(DenseMatrix& a, const Vector& u, const Vector& v, double scale = 1.0) {
    check_length(u, a.rows, "add_outer u");
    check_length(v, a.cols, "add_outer v");
    for (std::size_t r = 0; r < a.rows; ++r) {
        double* row = a.data.data() + r * a.cols;
        const double ur = scale * u[r];
        for (std::size_t c = 0; c < a.cols; ++c) row[c] += ur * v[c];
    }
}

inline double squared_norm(const DenseMatrix& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return s;
}

inline double dot(const Vector& a, const Vector& b) {
    check_length(b, a.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace darec::nn
