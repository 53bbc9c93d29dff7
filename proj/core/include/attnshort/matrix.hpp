#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace attnshort {

/// Dense row-major matrix. T is float for training/inference and double for
/// gradient checking.
template <typename T>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, T(0)) {}

    T& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    const T& operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    T* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
    const T* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }

    size_t count() const { return a.size(); }
    void zero() { std::fill(a.begin(), a.end(), T(0)); }

    bool finite() const {
        for (T x : a)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    template <typename U>
    Mat<U> cast() const {
        Mat<U> m(rows, cols);
        for (size_t i = 0; i < a.size(); ++i) m.a[i] = static_cast<U>(a[i]);
        return m;
    }
};

// C += A * B   (A: r x m, B: m x n, C: r x n). k-inner-product order keeps
// both streamed rows contiguous, which gcc vectorizes.
template <typename T>
void matmul_acc(Mat<T>& c, const Mat<T>& a, const Mat<T>& b) {
    assert(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols);
    for (int i = 0; i < a.rows; ++i) {
        T* crow = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const T aik = a(i, k);
            if (aik == T(0)) continue;
            const T* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
}

// C += A * B^T  (A: r x m, B: n x m, C: r x n)
template <typename T>
void matmul_bt_acc(Mat<T>& c, const Mat<T>& a, const Mat<T>& b) {
    assert(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const T* arow = a.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const T* brow = b.row(j);
            T s = 0;
            for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            c(i, j) += s;
        }
    }
}

// C += A^T * B  (A: r x m, B: r x n, C: m x n)
template <typename T>
void matmul_at_acc(Mat<T>& c, const Mat<T>& a, const Mat<T>& b) {
    assert(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const T* arow = a.row(i);
        const T* brow = b.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const T aik = arow[k];
            if (aik == T(0)) continue;
            T* crow = c.row(k);
            for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
}

}  // namespace attnshort
