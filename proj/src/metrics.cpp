#include "imvc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "imvc/error.hpp"

namespace imvc {

namespace {

std::vector<int> densify(std::span<const int> labels, std::size_t& distinct) {
    std::map<int, int> ids;
    std::vector<int> dense(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = ids.emplace(labels[i], static_cast<int>(ids.size()));
        dense[i] = it->second;
    }
    distinct = ids.size();
    return dense;
}

void check_lengths(std::span<const int> truth, std::span<const int> pred) {
    if (truth.size() != pred.size())
        throw ContractError("label vectors have different lengths");
    if (truth.empty()) throw ContractError("label vectors are empty");
}

} // namespace

std::vector<std::vector<std::int64_t>> contingency(std::span<const int> truth,
                                                   std::span<const int> pred) {
    check_lengths(truth, pred);
    std::size_t kt = 0, kp = 0;
    const auto t = densify(truth, kt);
    const auto p = densify(pred, kp);
    std::vector<std::vector<std::int64_t>> m(kt, std::vector<std::int64_t>(kp, 0));
    for (std::size_t i = 0; i < t.size(); ++i) ++m[t[i]][p[i]];
    return m;
}

// Shortest-augmenting-path assignment with potentials, O(k^3). Potentials
// stay integral for integral inputs, so the optimum is exact for counts.
std::vector<int> assignment_map(const std::vector<std::vector<std::int64_t>>& counts) {
    const std::size_t k = counts.size();
    for (const auto& row : counts)
        if (row.size() != k) throw ContractError("assignment_map: matrix must be square");
    if (k == 0) return {};

    // minimize negated counts
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(k + 1, 0.0), v(k + 1, 0.0);
    std::vector<std::size_t> match(k + 1, 0); // match[j] = row assigned to column j (1-based)
    std::vector<std::size_t> way(k + 1, 0);

    for (std::size_t i = 1; i <= k; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(k + 1, inf);
        std::vector<bool> used(k + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= k; ++j) {
                if (used[j]) continue;
                const double cur =
                    -static_cast<double>(counts[i0 - 1][j - 1]) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= k; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> perm(k, -1);
    for (std::size_t j = 1; j <= k; ++j) perm[j - 1] = static_cast<int>(match[j] - 1);
    return perm;
}

double acc(std::span<const int> truth, std::span<const int> pred) {
    check_lengths(truth, pred);
    auto m = contingency(truth, pred);
    const std::size_t k = std::max(m.size(), m.front().size());
    // pad to square
    for (auto& row : m) row.resize(k, 0);
    m.resize(k, std::vector<std::int64_t>(k, 0));

    const auto perm = assignment_map(m);
    std::int64_t matched = 0;
    for (std::size_t j = 0; j < k; ++j) matched += m[perm[j]][j];
    return static_cast<double>(matched) / static_cast<double>(truth.size());
}

double nmi(std::span<const int> truth, std::span<const int> pred) {
    check_lengths(truth, pred);
    const auto m = contingency(truth, pred);
    const auto n = static_cast<double>(truth.size());

    std::vector<std::int64_t> row_sum(m.size(), 0), col_sum(m.front().size(), 0);
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m[i].size(); ++j) {
            row_sum[i] += m[i][j];
            col_sum[j] += m[i][j];
        }

    double h_truth = 0.0, h_pred = 0.0;
    for (std::int64_t q : row_sum) {
        const double f = static_cast<double>(q) / n;
        if (f > 0.0) h_truth -= f * std::log(f);
    }
    for (std::int64_t p : col_sum) {
        const double f = static_cast<double>(p) / n;
        if (f > 0.0) h_pred -= f * std::log(f);
    }
    if (h_truth == 0.0 || h_pred == 0.0) {
        // zero-entropy partition: identical trivial partitions count as
        // perfect agreement, anything else carries no information
        return (h_truth == 0.0 && h_pred == 0.0) ? 1.0 : 0.0;
    }

    double mutual = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m[i].size(); ++j) {
            if (m[i][j] == 0) continue;
            const double pij = static_cast<double>(m[i][j]) / n;
            mutual += pij * std::log(static_cast<double>(m[i][j]) * n /
                                     (static_cast<double>(row_sum[i]) *
                                      static_cast<double>(col_sum[j])));
        }
    }
    return 2.0 * mutual / (h_truth + h_pred);
}

double ari(std::span<const int> truth, std::span<const int> pred) {
    check_lengths(truth, pred);
    if (truth.size() < 2) throw ContractError("ari needs at least two samples");
    const auto m = contingency(truth, pred);

    auto choose2 = [](std::int64_t x) -> __int128 {
        return static_cast<__int128>(x) * (x - 1) / 2;
    };

    __int128 sum_cells = 0, sum_rows = 0, sum_cols = 0;
    std::vector<std::int64_t> row_sum(m.size(), 0), col_sum(m.front().size(), 0);
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m[i].size(); ++j) {
            sum_cells += choose2(m[i][j]);
            row_sum[i] += m[i][j];
            col_sum[j] += m[i][j];
        }
    for (std::int64_t q : row_sum) sum_rows += choose2(q);
    for (std::int64_t p : col_sum) sum_cols += choose2(p);
    const __int128 pairs = choose2(static_cast<std::int64_t>(truth.size()));

    // scaled by 2*pairs to stay in integers
    const __int128 numerator = 2 * pairs * sum_cells - 2 * sum_rows * sum_cols;
    const __int128 denominator = pairs * (sum_rows + sum_cols) - 2 * sum_rows * sum_cols;
    if (denominator == 0) return 0.0;
    return static_cast<double>(static_cast<long double>(numerator) /
                               static_cast<long double>(denominator));
}

} // namespace imvc
