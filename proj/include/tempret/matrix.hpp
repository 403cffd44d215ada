// Dense row-major matrix of doubles plus the handful of products the rest of
// the library is built on. Reductions run left-to-right in a fixed order so
// repeated runs are bit-identical.

#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "tempret/errors.hpp"

namespace tempret {

class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    /// Build from nested braces: Matrix::of({{1, 2}, {3, 4}}).
    static Matrix of(std::initializer_list<std::initializer_list<double>> rows) {
        Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
        std::size_t r = 0;
        for (const auto& row : rows) {
            if (row.size() != m.cols_) {
                throw DimensionError("Matrix::of: ragged initializer");
            }
            std::size_t c = 0;
            for (double v : row) m(r, c++) = v;
            ++r;
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    std::vector<double> row_vector(std::size_t r) const {
        return std::vector<double>(row(r), row(r) + cols_);
    }

    void set_row(std::size_t r, const std::vector<double>& v) {
        if (v.size() != cols_) throw DimensionError("set_row: length mismatch");
        for (std::size_t c = 0; c < cols_; ++c) (*this)(r, c) = v[c];
    }

    void fill(double v) {
        for (double& x : data_) x = v;
    }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Similarity / fused scores, rows = queries.
using ScoreMatrix = Matrix;
/// Soft relevance grades in [0, 1], rows = queries.
using RelevanceMatrix = Matrix;

inline std::string shape_string(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) +
                             " vs " + shape_string(b));
    }
}

/// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimension mismatch " + shape_string(a) +
                             " * " + shape_string(b));
    }
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    return c;
}

/// C = A * B^T
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_bt: inner dimension mismatch " + shape_string(a) +
                             " * " + shape_string(b) + "^T");
    }
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
            c(i, j) = acc;
        }
    }
    return c;
}

/// C = A^T * B
inline Matrix matmul_at(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul_at: inner dimension mismatch " + shape_string(a) +
                             "^T * " + shape_string(b));
    }
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* arow = a.row(k);
        const double* brow = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                crow[j] += aki * brow[j];
            }
        }
    }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    }
    return t;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

inline void add_in_place(Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add_in_place");
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

inline void axpy_in_place(Matrix& a, double alpha, const Matrix& b) {
    require_same_shape(a, b, "axpy_in_place");
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += alpha * b.data()[i];
}

inline Matrix scale(const Matrix& a, double s) {
    Matrix c = a;
    for (double& v : c.data()) v *= s;
    return c;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double norm2(const std::vector<double>& a) {
    double acc = 0.0;
    for (double v : a) acc += v * v;
    return std::sqrt(acc);
}

/// y = x * W for a row vector x and matrix W (d_in x d_out).
inline std::vector<double> vecmat(const std::vector<double>& x, const Matrix& w) {
    if (x.size() != w.rows()) {
        throw DimensionError("vecmat: vector length " + std::to_string(x.size()) +
                             " vs matrix " + shape_string(w));
    }
    std::vector<double> y(w.cols(), 0.0);
    for (std::size_t k = 0; k < w.rows(); ++k) {
        const double xk = x[k];
        if (xk == 0.0) continue;
        const double* wrow = w.row(k);
        for (std::size_t j = 0; j < w.cols(); ++j) y[j] += xk * wrow[j];
    }
    return y;
}

} // namespace tempret
