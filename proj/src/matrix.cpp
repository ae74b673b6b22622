#include "imvc/matrix.hpp"

#include <cmath>

#include "imvc/error.hpp"

namespace imvc {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t i = 0;
    for (const auto& r : rows) {
        if (r.size() != m.cols()) throw ContractError("from_rows: ragged row lengths");
        std::size_t j = 0;
        for (double x : r) m(i, j++) = x;
        ++i;
    }
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ContractError("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.data().data() + i * c.cols();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const double* bk = b.data().data() + k * b.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw ContractError("matmul_nt: inner dimensions differ");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
            c(i, j) = dot(a.row(i), b.row(j));
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw ContractError("matmul_tn: inner dimensions differ");
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* ak = a.data().data() + k * a.cols();
        const double* bk = b.data().data() + k * b.cols();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = ak[i];
            double* ci = c.data().data() + i * c.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

void add_inplace(Matrix& a, const Matrix& b, double scale) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ContractError("add_inplace: shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += scale * b.data()[i];
}

void scale_inplace(Matrix& a, double s) {
    for (double& x : a.data()) x *= s;
}

Matrix take_rows(const Matrix& a, std::span<const std::size_t> idx) {
    Matrix out(idx.size(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= a.rows()) throw ContractError("take_rows: index out of range");
        auto src = a.row(idx[i]);
        auto dst = out.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) dst[j] = src[j];
    }
    return out;
}

Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t end) {
    if (begin > end || end > a.cols()) throw ContractError("slice_cols: bad range");
    Matrix out(a.rows(), end - begin);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = a(i, j);
    return out;
}

Matrix hconcat(const std::vector<Matrix>& parts) {
    if (parts.empty()) return {};
    std::size_t cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != parts.front().rows())
            throw ContractError("hconcat: row counts differ");
        cols += p.cols();
    }
    Matrix out(parts.front().rows(), cols);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        std::size_t at = 0;
        for (const auto& p : parts)
            for (std::size_t j = 0; j < p.cols(); ++j) out(i, at++) = p(i, j);
    }
    return out;
}

Matrix vstack(const std::vector<Matrix>& parts) {
    if (parts.empty()) return {};
    std::size_t rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != parts.front().cols())
            throw ContractError("vstack: column counts differ");
        rows += p.rows();
    }
    Matrix out(rows, parts.front().cols());
    std::size_t at = 0;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < p.rows(); ++i, ++at) {
            auto src = p.row(i);
            auto dst = out.row(at);
            for (std::size_t j = 0; j < p.cols(); ++j) dst[j] = src[j];
        }
    }
    return out;
}

std::vector<double> col_means(const Matrix& a) {
    std::vector<double> mu(a.cols(), 0.0);
    if (a.rows() == 0) return mu;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) mu[j] += r[j];
    }
    for (double& m : mu) m /= static_cast<double>(a.rows());
    return mu;
}

void center_rows(Matrix& a) {
    const auto mu = col_means(a);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) r[j] -= mu[j];
    }
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

bool all_finite(const Matrix& a) { return all_finite(std::span<const double>(a.data())); }

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sq_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double sq_norm(std::span<const double> v) { return dot(v, v); }

} // namespace imvc
