#include "imvc/recover.hpp"

#include <fstream>

#include "imvc/error.hpp"

namespace imvc {

LatentBundle recover_latents(const std::vector<ViewModel>& models, LatentBundle bundle,
                             const ObservationMask& mask) {
    const std::size_t v_count = bundle.view_count();
    if (models.size() != v_count || mask.view_count() != v_count ||
        mask.n() != bundle.n())
        throw ContractError("recover_latents: model/bundle/mask shapes disagree");

    for (std::size_t i = 0; i < bundle.n(); ++i) {
        if (mask.observed_views(i) == 0)
            throw DataError("sample " + std::to_string(i) + " has no observed views");
        for (std::size_t p = 0; p < v_count; ++p) {
            if (bundle.provenance(i, p) != Provenance::absent) continue;
            std::vector<double> sum(bundle.z[p].cols(), 0.0);
            std::size_t sources = 0;
            for (std::size_t q = 0; q < v_count; ++q) {
                if (q == p || !mask.observed(i, q)) continue;
                Matrix zq(1, bundle.z[q].cols());
                auto src = bundle.z[q].row(i);
                for (std::size_t j = 0; j < src.size(); ++j) zq(0, j) = src[j];
                const Matrix pred = nn::mlp_forward(models[q].predictors[p], zq);
                for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += pred(0, j);
                ++sources;
            }
            auto dst = bundle.z[p].row(i);
            for (std::size_t j = 0; j < sum.size(); ++j)
                dst[j] = sum[j] / static_cast<double>(sources);
            bundle.set_provenance(i, p, Provenance::recovered);
        }
    }
    return bundle;
}

FusedFeatures fuse(const LatentBundle& bundle, FusionMode mode) {
    if (bundle.any_absent())
        throw ContractError("fuse: bundle still has absent entries; recover first");
    std::vector<Matrix> parts;
    for (std::size_t v = 0; v < bundle.view_count(); ++v)
        parts.push_back(mode == FusionMode::concat_sub ? bundle.sub(v) : bundle.z[v]);
    FusedFeatures fused;
    fused.mode = mode;
    fused.x = hconcat(parts);
    if (!all_finite(fused.x)) throw TrainingError("fused features contain non-finite values");
    return fused;
}

namespace {

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::observed: return "observed";
        case Provenance::recovered: return "recovered";
        case Provenance::absent: return "absent";
    }
    return "absent";
}

} // namespace

void export_embeddings(const LatentBundle& bundle, const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw DataError("cannot write " + csv_path.string());
    out.precision(17);
    out << "sample_id,view";
    const std::size_t d = bundle.z.empty() ? 0 : bundle.z.front().cols();
    for (std::size_t j = 0; j < d; ++j) out << ",dim" << j;
    out << ",provenance\n";
    for (std::size_t v = 0; v < bundle.view_count(); ++v) {
        for (std::size_t i = 0; i < bundle.n(); ++i) {
            out << i << ',' << v;
            auto r = bundle.z[v].row(i);
            for (std::size_t j = 0; j < d; ++j) out << ',' << r[j];
            out << ',' << provenance_name(bundle.provenance(i, v)) << '\n';
        }
    }
}

void export_fused(const FusedFeatures& fused, const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw DataError("cannot write " + csv_path.string());
    out.precision(17);
    out << "sample_id";
    for (std::size_t j = 0; j < fused.x.cols(); ++j) out << ",f" << j;
    out << '\n';
    for (std::size_t i = 0; i < fused.x.rows(); ++i) {
        out << i;
        auto r = fused.x.row(i);
        for (std::size_t j = 0; j < fused.x.cols(); ++j) out << ',' << r[j];
        out << '\n';
    }
}

} // namespace imvc
