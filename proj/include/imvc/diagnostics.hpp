#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "imvc/matrix.hpp"

namespace imvc {

struct SpectrumReport {
    std::vector<double> singular_values; // descending
    double effective_rank = 1.0;         // exp of spectral entropy
    double participation = 0.0;          // fraction of dims holding 99% energy
};

// SVD of the row-centered embedding matrix via a Jacobi eigensolve of its
// Gram matrix. Scale-free: effective rank depends only on singular-value
// ratios.
SpectrumReport spectrum(const Matrix& emb);

// Eigenvalues of a symmetric matrix, descending. Cyclic Jacobi sweeps.
std::vector<double> sym_eigenvalues(Matrix a);

void save_spectrum(const SpectrumReport& report, const std::filesystem::path& csv_path);

struct TraceRow {
    int epoch = 0;
    double lz = 0.0, lc = 0.0, lr = 0.0, total = 0.0;
    std::optional<double> acc, nmi, ari;
};

// Append-only per-epoch run trace. Epochs must strictly increase.
class RunTrace {
public:
    void append(const TraceRow& row);
    const std::vector<TraceRow>& rows() const { return rows_; }
    bool empty() const { return rows_.empty(); }

    void save_csv(const std::filesystem::path& path) const;
    static RunTrace load_csv(const std::filesystem::path& path);

private:
    std::vector<TraceRow> rows_;
};

} // namespace imvc
