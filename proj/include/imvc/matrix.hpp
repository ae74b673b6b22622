#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace imvc {

// Dense row-major double matrix. Just enough linear algebra for this
// pipeline; not a general-purpose library.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);    // a * b
Matrix matmul_nt(const Matrix& a, const Matrix& b); // a * b^T
Matrix matmul_tn(const Matrix& a, const Matrix& b); // a^T * b
Matrix transpose(const Matrix& a);

void add_inplace(Matrix& a, const Matrix& b, double scale = 1.0);
void scale_inplace(Matrix& a, double s);

// New matrix made of the rows of `a` listed in `idx`, in order.
Matrix take_rows(const Matrix& a, std::span<const std::size_t> idx);
// Columns [begin, end) of `a`.
Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t end);
// Horizontal concatenation; all inputs share a row count.
Matrix hconcat(const std::vector<Matrix>& parts);
// Vertical stack; all inputs share a column count.
Matrix vstack(const std::vector<Matrix>& parts);

std::vector<double> col_means(const Matrix& a);
void center_rows(Matrix& a); // subtract column means

bool all_finite(const Matrix& a);
bool all_finite(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double sq_distance(std::span<const double> a, std::span<const double> b);
double sq_norm(std::span<const double> v);

} // namespace imvc
