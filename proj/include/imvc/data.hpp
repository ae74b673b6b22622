#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "imvc/matrix.hpp"

namespace imvc {

// Aligned multi-view dataset: V feature matrices over the same N samples,
// optional ground-truth labels in [0, K).
struct MultiViewDataset {
    std::vector<Matrix> views;
    std::optional<std::vector<int>> labels;
    int k = 0; // cluster count
    std::string name;

    std::size_t n() const { return views.empty() ? 0 : views.front().rows(); }
    std::size_t view_count() const { return views.size(); }

    // Throws DataError on any structural violation.
    void validate() const;
};

enum class DataFormat { csv_per_view, packed_binary };

// CSV layout: <stem>.view1.csv, <stem>.view2.csv, ... plus optional
// <stem>.labels.csv (one integer per line). Packed layout: single
// <stem>.mvc file, magic "MVC1", little-endian header
// (u32 view count, u64 rows, u32 column count per view, u8 has-labels),
// then row-major f64 matrices, then labels as u32.
//
// When the dataset carries labels the cluster count is inferred from them;
// otherwise pass it explicitly via k_override.
MultiViewDataset load_dataset(const std::filesystem::path& stem, DataFormat format,
                              int k_override = 0);
void save_dataset(const MultiViewDataset& ds, const std::filesystem::path& stem,
                  DataFormat format);

// Per-column min-max rescale to [0,1]; constant columns map to 0. Idempotent.
MultiViewDataset normalize_minmax(const MultiViewDataset& ds);

// Headerless CSV, one row per line, full double precision.
void save_matrix_csv(const Matrix& m, const std::filesystem::path& path);

// Which views are observed for each sample. Every row keeps at least one view.
class ObservationMask {
public:
    ObservationMask() = default;
    ObservationMask(std::size_t n, std::size_t v, bool observed = true)
        : n_(n), v_(v), cells_(n * v, observed ? 1 : 0) {}

    std::size_t n() const { return n_; }
    std::size_t view_count() const { return v_; }
    bool observed(std::size_t row, std::size_t view) const {
        return cells_[row * v_ + view] != 0;
    }
    void set(std::size_t row, std::size_t view, bool value) {
        cells_[row * v_ + view] = value ? 1 : 0;
    }

    std::size_t observed_views(std::size_t row) const;
    bool row_complete(std::size_t row) const;
    std::size_t complete_count() const;

    double eta = 0.0;
    std::uint64_t seed = 0;

    // Throws DataError when an invariant is violated.
    void validate() const;

    friend bool operator==(const ObservationMask&, const ObservationMask&) = default;

private:
    std::size_t n_ = 0;
    std::size_t v_ = 0;
    std::vector<std::uint8_t> cells_;
};

// Random mask with round(n*(1-eta)) complete rows; each incomplete row keeps
// exactly one view when v == 2, otherwise a random nonempty proper subset.
// Deterministic in (n, v, eta, seed).
ObservationMask generate_mask(std::size_t n, std::size_t v, double eta,
                              std::uint64_t seed);

// Sorted indices of rows with every view observed.
std::vector<std::size_t> complete_index(const ObservationMask& mask);

// Rows of the given view that are observed.
std::vector<std::size_t> observed_index(const ObservationMask& mask, std::size_t view);

// 0/1 CSV plus a JSON sidecar {eta, seed, n, v} at <path>.json.
void save_mask(const ObservationMask& mask, const std::filesystem::path& csv_path);
ObservationMask load_mask(const std::filesystem::path& csv_path);

} // namespace imvc
