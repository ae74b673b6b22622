#include "imvc/diagnostics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "imvc/error.hpp"

namespace imvc {

std::vector<double> sym_eigenvalues(Matrix a) {
    if (a.rows() != a.cols()) throw ContractError("sym_eigenvalues: matrix not square");
    const std::size_t n = a.rows();
    if (n == 0) return {};

    double off = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            norm += a(i, j) * a(i, j);
            if (i != j) off += a(i, j) * a(i, j);
        }
    const double stop = 1e-24 * std::max(norm, 1e-300);

    for (int sweep = 0; sweep < 100 && off > stop; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
            }
        }
        off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) off += a(i, j) * a(i, j);
    }

    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.rbegin(), eig.rend());
    return eig;
}

SpectrumReport spectrum(const Matrix& emb) {
    if (emb.rows() < 2) throw ContractError("spectrum needs at least two rows");
    Matrix centered = emb;
    center_rows(centered);

    const Matrix gram = matmul_tn(centered, centered); // d x d
    const auto eig = sym_eigenvalues(gram);

    SpectrumReport report;
    const std::size_t max_rank = std::min(emb.rows(), emb.cols());
    for (std::size_t i = 0; i < max_rank && i < eig.size(); ++i)
        report.singular_values.push_back(std::sqrt(std::max(eig[i], 0.0)));

    double total = 0.0;
    for (double s : report.singular_values) total += s;
    if (total > 0.0) {
        double entropy = 0.0;
        for (double s : report.singular_values) {
            const double p = s / total;
            if (p > 0.0) entropy -= p * std::log(p);
        }
        report.effective_rank = std::exp(entropy);

        double energy_total = 0.0;
        for (double s : report.singular_values) energy_total += s * s;
        double acc = 0.0;
        std::size_t needed = report.singular_values.size();
        for (std::size_t i = 0; i < report.singular_values.size(); ++i) {
            acc += report.singular_values[i] * report.singular_values[i];
            if (acc >= 0.99 * energy_total) {
                needed = i + 1;
                break;
            }
        }
        report.participation =
            static_cast<double>(needed) / static_cast<double>(emb.cols());
    } else {
        report.effective_rank = 1.0;
        report.participation = 0.0;
    }
    return report;
}

void save_spectrum(const SpectrumReport& report, const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw DataError("cannot write " + csv_path.string());
    out.precision(17);
    for (double s : report.singular_values) out << s << '\n';
}

void RunTrace::append(const TraceRow& row) {
    if (!rows_.empty() && row.epoch <= rows_.back().epoch)
        throw ContractError("trace epochs must strictly increase");
    rows_.push_back(row);
}

void RunTrace::save_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out.precision(17);
    out << "epoch,Lz,Lc,Lr,total,acc,nmi,ari\n";
    for (const auto& r : rows_) {
        out << r.epoch << ',' << r.lz << ',' << r.lc << ',' << r.lr << ',' << r.total;
        for (const auto& metric : {r.acc, r.nmi, r.ari}) {
            out << ',';
            if (metric) out << *metric;
        }
        out << '\n';
    }
}

RunTrace RunTrace::load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open trace " + path.string());
    RunTrace trace;
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty trace " + path.string());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        while (cells.size() < 8) cells.emplace_back();
        TraceRow row;
        row.epoch = std::stoi(cells[0]);
        row.lz = std::stod(cells[1]);
        row.lc = std::stod(cells[2]);
        row.lr = std::stod(cells[3]);
        row.total = std::stod(cells[4]);
        if (!cells[5].empty()) row.acc = std::stod(cells[5]);
        if (!cells[6].empty()) row.nmi = std::stod(cells[6]);
        if (!cells[7].empty()) row.ari = std::stod(cells[7]);
        trace.append(row);
    }
    return trace;
}

} // namespace imvc
