#include "imvc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "imvc/error.hpp"
#include "imvc/rng.hpp"

namespace imvc {

namespace {

std::string view_file(const std::filesystem::path& stem, std::size_t k) {
    return stem.string() + ".view" + std::to_string(k) + ".csv";
}

std::string labels_file(const std::filesystem::path& stem) {
    return stem.string() + ".labels.csv";
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

double parse_cell(const std::string& cell, const std::string& file, std::size_t row,
                  std::size_t col) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw DataError("unparseable cell '" + cell + "' in " + file + " at row " +
                        std::to_string(row + 1) + ", column " + std::to_string(col + 1));
    }
    if (!std::isfinite(value)) {
        throw DataError("non-finite value in " + file + " at row " + std::to_string(row + 1) +
                        ", column " + std::to_string(col + 1));
    }
    return value;
}

Matrix read_csv_matrix(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open " + file);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t row = 0;
    std::size_t cols = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_line(line);
        if (row == 0) {
            cols = cells.size();
        } else if (cells.size() != cols) {
            throw DataError(file + ": row " + std::to_string(row + 1) + " has " +
                            std::to_string(cells.size()) + " columns, expected " +
                            std::to_string(cols));
        }
        std::vector<double> values(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c)
            values[c] = parse_cell(cells[c], file, row, c);
        rows.push_back(std::move(values));
        ++row;
    }
    if (rows.empty()) throw DataError(file + ": empty matrix");
    Matrix m(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
    return m;
}

std::vector<int> read_labels(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open " + file);
    std::vector<int> labels;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_line(line);
        int value = 0;
        const auto& cell = cells.front();
        auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (ec != std::errc{} || cells.size() != 1) {
            throw DataError("bad label in " + file + " at row " + std::to_string(row + 1));
        }
        labels.push_back(value);
        ++row;
    }
    return labels;
}

void write_csv_matrix(const Matrix& m, const std::string& file) {
    std::ofstream out(file);
    if (!out) throw DataError("cannot write " + file);
    out.precision(17);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << m(i, j);
        }
        out << '\n';
    }
}

// Fixed-width little-endian helpers for the packed format.
template <typename T>
void write_le(std::ostream& out, T value) {
    unsigned char buf[sizeof(T)];
    std::uint64_t bits;
    if constexpr (sizeof(T) == 8 && std::is_floating_point_v<T>) {
        std::memcpy(&bits, &value, 8);
    } else {
        bits = static_cast<std::uint64_t>(value);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::string& file) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T)))
        throw DataError(file + ": truncated file");
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    if constexpr (sizeof(T) == 8 && std::is_floating_point_v<T>) {
        T value;
        std::memcpy(&value, &bits, 8);
        return value;
    } else {
        return static_cast<T>(bits);
    }
}

constexpr char kMagic[4] = {'M', 'V', 'C', '1'};

MultiViewDataset load_packed(const std::filesystem::path& stem) {
    const std::string file = stem.string() + ".mvc";
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open " + file);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError(file + ": bad magic, not a packed multi-view file");
    const auto v = read_le<std::uint32_t>(in, file);
    const auto n = read_le<std::uint64_t>(in, file);
    std::vector<std::uint32_t> dims(v);
    for (auto& d : dims) d = read_le<std::uint32_t>(in, file);
    const auto has_labels = read_le<std::uint8_t>(in, file);
    MultiViewDataset ds;
    ds.name = stem.filename().string();
    for (std::uint32_t k = 0; k < v; ++k) {
        Matrix m(n, dims[k]);
        for (double& x : m.data()) x = read_le<double>(in, file);
        ds.views.push_back(std::move(m));
    }
    if (has_labels) {
        std::vector<int> labels(n);
        for (auto& l : labels) l = static_cast<int>(read_le<std::uint32_t>(in, file));
        ds.labels = std::move(labels);
    }
    return ds;
}

void save_packed(const MultiViewDataset& ds, const std::filesystem::path& stem) {
    const std::string file = stem.string() + ".mvc";
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write " + file);
    out.write(kMagic, 4);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.view_count()));
    write_le<std::uint64_t>(out, ds.n());
    for (const auto& view : ds.views)
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(view.cols()));
    write_le<std::uint8_t>(out, ds.labels ? 1 : 0);
    for (const auto& view : ds.views)
        for (double x : view.data()) write_le<double>(out, x);
    if (ds.labels)
        for (int l : *ds.labels) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l));
}

} // namespace

void MultiViewDataset::validate() const {
    if (views.size() < 2) throw DataError("dataset needs at least two views");
    const std::size_t rows = views.front().rows();
    if (rows < 2) throw DataError("dataset needs at least two samples");
    for (std::size_t v = 0; v < views.size(); ++v) {
        if (views[v].cols() < 1)
            throw DataError("view " + std::to_string(v + 1) + " has no features");
        if (views[v].rows() != rows) {
            throw DataError("row-count mismatch: view 1 has " + std::to_string(rows) +
                            " rows, view " + std::to_string(v + 1) + " has " +
                            std::to_string(views[v].rows()));
        }
        if (!all_finite(views[v]))
            throw DataError("view " + std::to_string(v + 1) + " contains non-finite values");
    }
    if (labels) {
        if (labels->size() != rows)
            throw DataError("label count " + std::to_string(labels->size()) +
                            " does not match sample count " + std::to_string(rows));
        if (k <= 0) throw DataError("labeled dataset must have a positive cluster count");
        std::vector<bool> seen(k, false);
        for (int l : *labels) {
            if (l < 0 || l >= k)
                throw DataError("label " + std::to_string(l) + " outside [0, " +
                                std::to_string(k) + ")");
            seen[l] = true;
        }
        for (int c = 0; c < k; ++c)
            if (!seen[c]) throw DataError("class " + std::to_string(c) + " has no samples");
    } else if (k <= 0) {
        throw DataError("unlabeled dataset requires an explicit cluster count");
    }
}

MultiViewDataset load_dataset(const std::filesystem::path& stem, DataFormat format,
                              int k_override) {
    MultiViewDataset ds;
    if (format == DataFormat::packed_binary) {
        ds = load_packed(stem);
    } else {
        ds.name = stem.filename().string();
        for (std::size_t k = 1;; ++k) {
            const std::string file = view_file(stem, k);
            if (!std::filesystem::exists(file)) break;
            ds.views.push_back(read_csv_matrix(file));
        }
        if (ds.views.empty())
            throw DataError("no view files found for stem " + stem.string());
        if (std::filesystem::exists(labels_file(stem)))
            ds.labels = read_labels(labels_file(stem));
    }
    if (k_override > 0) {
        ds.k = k_override;
    } else if (ds.labels) {
        ds.k = *std::max_element(ds.labels->begin(), ds.labels->end()) + 1;
    }
    ds.validate();
    return ds;
}

void save_dataset(const MultiViewDataset& ds, const std::filesystem::path& stem,
                  DataFormat format) {
    if (format == DataFormat::packed_binary) {
        save_packed(ds, stem);
        return;
    }
    for (std::size_t v = 0; v < ds.view_count(); ++v)
        write_csv_matrix(ds.views[v], view_file(stem, v + 1));
    if (ds.labels) {
        std::ofstream out(labels_file(stem));
        if (!out) throw DataError("cannot write " + labels_file(stem));
        for (int l : *ds.labels) out << l << '\n';
    }
}

void save_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
    write_csv_matrix(m, path.string());
}

MultiViewDataset normalize_minmax(const MultiViewDataset& ds) {
    MultiViewDataset out = ds;
    for (auto& view : out.views) {
        for (std::size_t j = 0; j < view.cols(); ++j) {
            double lo = view(0, j), hi = view(0, j);
            for (std::size_t i = 1; i < view.rows(); ++i) {
                lo = std::min(lo, view(i, j));
                hi = std::max(hi, view(i, j));
            }
            const double range = hi - lo;
            for (std::size_t i = 0; i < view.rows(); ++i)
                view(i, j) = range > 0.0 ? (view(i, j) - lo) / range : 0.0;
        }
    }
    return out;
}

std::size_t ObservationMask::observed_views(std::size_t row) const {
    std::size_t count = 0;
    for (std::size_t v = 0; v < v_; ++v) count += observed(row, v) ? 1 : 0;
    return count;
}

bool ObservationMask::row_complete(std::size_t row) const {
    return observed_views(row) == v_;
}

std::size_t ObservationMask::complete_count() const {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n_; ++i) count += row_complete(i) ? 1 : 0;
    return count;
}

void ObservationMask::validate() const {
    if (v_ < 2) throw DataError("mask needs at least two views");
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t seen = observed_views(i);
        if (seen == 0)
            throw DataError("mask row " + std::to_string(i) + " has no observed views");
        if (v_ == 2 && seen != 1 && seen != 2)
            throw DataError("two-view mask row " + std::to_string(i) + " is malformed");
    }
    const auto expected =
        static_cast<std::size_t>(std::floor(static_cast<double>(n_) * (1.0 - eta) + 0.5));
    if (complete_count() != expected) {
        throw DataError("mask has " + std::to_string(complete_count()) +
                        " complete rows, expected " + std::to_string(expected));
    }
}

ObservationMask generate_mask(std::size_t n, std::size_t v, double eta,
                              std::uint64_t seed) {
    if (eta < 0.0 || eta >= 1.0)
        throw ConfigError("missing rate must be in [0,1), got " + std::to_string(eta));
    if (v < 2) throw ConfigError("mask generation needs at least two views");
    const auto m =
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - eta) + 0.5));
    if (m < 1) throw ConfigError("missing rate leaves no complete samples");

    Rng rng(seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    ObservationMask mask(n, v, false);
    mask.eta = eta;
    mask.seed = seed;
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t row = order[r];
        if (r < m) {
            for (std::size_t k = 0; k < v; ++k) mask.set(row, k, true);
        } else if (v == 2) {
            mask.set(row, rng.below(2), true);
        } else {
            // Nonempty proper subset encoded as bits in [1, 2^v - 2].
            const std::uint64_t subset = 1 + rng.below((1ull << v) - 2);
            for (std::size_t k = 0; k < v; ++k)
                mask.set(row, k, (subset >> k) & 1);
        }
    }
    return mask;
}

std::vector<std::size_t> complete_index(const ObservationMask& mask) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < mask.n(); ++i)
        if (mask.row_complete(i)) idx.push_back(i);
    return idx;
}

std::vector<std::size_t> observed_index(const ObservationMask& mask, std::size_t view) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < mask.n(); ++i)
        if (mask.observed(i, view)) idx.push_back(i);
    return idx;
}

void save_mask(const ObservationMask& mask, const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw DataError("cannot write " + csv_path.string());
    for (std::size_t i = 0; i < mask.n(); ++i) {
        for (std::size_t v = 0; v < mask.view_count(); ++v) {
            if (v) out << ',';
            out << (mask.observed(i, v) ? 1 : 0);
        }
        out << '\n';
    }
    nlohmann::json meta{{"eta", mask.eta},
                        {"seed", mask.seed},
                        {"n", mask.n()},
                        {"v", mask.view_count()}};
    std::ofstream side(csv_path.string() + ".json");
    side << meta.dump(2) << '\n';
}

ObservationMask load_mask(const std::filesystem::path& csv_path) {
    std::ifstream side(csv_path.string() + ".json");
    if (!side) throw DataError("missing mask sidecar " + csv_path.string() + ".json");
    nlohmann::json meta = nlohmann::json::parse(side);
    const auto n = meta.at("n").get<std::size_t>();
    const auto v = meta.at("v").get<std::size_t>();

    ObservationMask mask(n, v, false);
    mask.eta = meta.at("eta").get<double>();
    mask.seed = meta.at("seed").get<std::uint64_t>();

    std::ifstream in(csv_path);
    if (!in) throw DataError("cannot open " + csv_path.string());
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        if (row >= n) throw DataError(csv_path.string() + ": more rows than sidecar n");
        const auto cells = split_line(line);
        if (cells.size() != v)
            throw DataError(csv_path.string() + ": row " + std::to_string(row + 1) +
                            " has wrong view count");
        for (std::size_t k = 0; k < v; ++k) mask.set(row, k, cells[k] == "1");
        ++row;
    }
    if (row != n) throw DataError(csv_path.string() + ": fewer rows than sidecar n");
    mask.validate();
    return mask;
}

} // namespace imvc
