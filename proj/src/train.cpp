#include "imvc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "imvc/cluster.hpp"
#include "imvc/error.hpp"
#include "imvc/metrics.hpp"
#include "imvc/recover.hpp"

namespace imvc {

namespace {

// Contiguous split of idx into `steps` chunks with sizes differing by at
// most one.
std::vector<std::vector<std::size_t>> chunk(const std::vector<std::size_t>& idx,
                                            std::size_t steps) {
    std::vector<std::vector<std::size_t>> out(steps);
    const std::size_t base = idx.size() / steps;
    const std::size_t extra = idx.size() % steps;
    std::size_t at = 0;
    for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t len = base + (s < extra ? 1 : 0);
        out[s].assign(idx.begin() + at, idx.begin() + at + len);
        at += len;
    }
    return out;
}

void step_all(RunState& state, const ModelGrads& grads) {
    for (std::size_t v = 0; v < state.models.size(); ++v) {
        const std::string tag = "view" + std::to_string(v + 1);
        nn::adam_step(state.models[v].encoder, grads[v].encoder,
                      state.optimizers[v].encoder, tag + ".encoder");
        nn::adam_step(state.models[v].decoder, grads[v].decoder,
                      state.optimizers[v].decoder, tag + ".decoder");
        if (state.cfg.lambda2 > 0.0) {
            for (std::size_t p = 0; p < state.models.size(); ++p) {
                if (p == v) continue;
                nn::adam_step(state.models[v].predictors[p], grads[v].predictors[p],
                              state.optimizers[v].predictors[p],
                              tag + ".predictor" + std::to_string(p + 1));
            }
        }
    }
}

std::optional<ClusterReport> epoch_metrics(const RunState& state,
                                           const MultiViewDataset& ds,
                                           const ObservationMask& mask) {
    if (!ds.labels) return std::nullopt;
    LatentBundle bundle = embed_with(state.models, state.cfg.sub_dim, ds, mask);
    bundle = recover_latents(state.models, std::move(bundle), mask);
    const FusedFeatures fused = fuse(bundle, FusionMode::concat_sub);
    KmeansParams kp;
    kp.seed = state.cfg.seed;
    const auto km = kmeans(fused.x, ds.k, kp);
    ClusterReport report;
    report.labels = km.labels;
    report.inertia = km.inertia;
    report.acc = acc(*ds.labels, km.labels);
    report.nmi = nmi(*ds.labels, km.labels);
    report.ari = ari(*ds.labels, km.labels);
    return report;
}

} // namespace

RunState init_state(const MultiViewDataset& ds, const ModelConfig& cfg) {
    cfg.validate();
    ds.validate();
    RunState state;
    state.cfg = cfg;
    state.rng = Rng(cfg.seed);
    std::vector<std::size_t> dims;
    for (const auto& v : ds.views) dims.push_back(v.cols());
    Rng init_rng(cfg.seed);
    state.models = make_view_models(dims, cfg, init_rng);
    nn::AdamConfig adam;
    adam.lr = cfg.lr;
    for (const auto& vm : state.models) {
        ViewOptimizer opt;
        opt.encoder = nn::AdamState::for_net(vm.encoder, adam);
        opt.decoder = nn::AdamState::for_net(vm.decoder, adam);
        opt.predictors.resize(vm.predictors.size());
        for (std::size_t p = 0; p < vm.predictors.size(); ++p)
            if (p != vm.view)
                opt.predictors[p] = nn::AdamState::for_net(vm.predictors[p], adam);
        state.optimizers.push_back(std::move(opt));
    }
    return state;
}

LossParts eval_losses(const std::vector<ViewModel>& models, const MultiViewDataset& ds,
                      const ObservationMask& mask, const ModelConfig& cfg) {
    LossParts parts;
    for (std::size_t v = 0; v < models.size(); ++v) {
        const auto rows = observed_index(mask, v);
        if (rows.empty()) continue;
        const Matrix xb = take_rows(ds.views[v], rows);
        const Matrix xhat =
            nn::mlp_forward(models[v].decoder, nn::mlp_forward(models[v].encoder, xb));
        Matrix residual = xhat;
        add_inplace(residual, xb, -1.0);
        parts.lz += sq_norm(residual.data());
    }

    const auto complete = complete_index(mask);
    if (complete.size() >= 2) {
        std::vector<Matrix> latents;
        for (std::size_t v = 0; v < models.size(); ++v)
            latents.push_back(
                nn::mlp_forward(models[v].encoder, take_rows(ds.views[v], complete)));

        const auto d0 = static_cast<std::size_t>(cfg.sub_dim);
        if (cfg.contrast_target != ContrastTarget::full_latent) {
            std::vector<Matrix> subs;
            for (const auto& zv : latents) subs.push_back(slice_cols(zv, 0, d0));
            parts.lc += loss_contrastive(subs, cfg.cross_view_negatives).loss;
        }
        if (cfg.contrast_target != ContrastTarget::sub_vector)
            parts.lc += loss_contrastive(latents, cfg.cross_view_negatives).loss;

        std::vector<std::size_t> all(complete.size());
        std::iota(all.begin(), all.end(), 0);
        parts.lr = loss_predict(models, latents, all).loss;
    }
    return parts;
}

RunState pretrain(const MultiViewDataset& ds, const ObservationMask& mask,
                  const ModelConfig& cfg) {
    RunState state = init_state(ds, cfg);
    const std::size_t n = ds.n();
    const std::size_t batch = cfg.effective_batch(n);
    const std::size_t steps = (n + batch - 1) / batch;

    std::vector<std::vector<std::size_t>> observed(ds.view_count());
    for (std::size_t v = 0; v < ds.view_count(); ++v) observed[v] = observed_index(mask, v);

    for (int epoch = 0; epoch < cfg.epochs_pretrain; ++epoch) {
        std::vector<std::vector<std::vector<std::size_t>>> batches(ds.view_count());
        for (std::size_t v = 0; v < ds.view_count(); ++v) {
            if (steps > 1) state.rng.shuffle(observed[v]);
            batches[v] = chunk(observed[v], steps);
        }
        for (std::size_t s = 0; s < steps; ++s) {
            ModelGrads grads = zero_grads(state.models);
            std::vector<std::vector<std::size_t>> rows_per_view(ds.view_count());
            for (std::size_t v = 0; v < ds.view_count(); ++v)
                rows_per_view[v] = batches[v][s];
            const double lz =
                recon_through_networks(state.models, ds.views, rows_per_view, 1.0, grads);
            if (!std::isfinite(lz))
                throw TrainingError("reconstruction loss diverged at pretrain epoch " +
                                    std::to_string(epoch));
            for (std::size_t v = 0; v < state.models.size(); ++v) {
                const std::string tag = "view" + std::to_string(v + 1);
                nn::adam_step(state.models[v].encoder, grads[v].encoder,
                              state.optimizers[v].encoder, tag + ".encoder");
                nn::adam_step(state.models[v].decoder, grads[v].decoder,
                              state.optimizers[v].decoder, tag + ".decoder");
            }
        }
        ++state.epoch;
    }
    return state;
}

void train_joint(RunState& state, const MultiViewDataset& ds,
                 const ObservationMask& mask) {
    const ModelConfig& cfg = state.cfg;
    const auto complete = complete_index(mask);
    const bool needs_pairs = cfg.lambda1 > 0.0 || cfg.lambda2 > 0.0;
    if (needs_pairs && complete.size() < 2)
        throw ConfigError("consistency/prediction losses need at least two complete "
                          "samples; none available at this missing rate");

    const std::size_t n = ds.n();
    const std::size_t batch = cfg.effective_batch(n);
    const std::size_t steps = (n + batch - 1) / batch;

    std::vector<std::vector<std::size_t>> observed(ds.view_count());
    for (std::size_t v = 0; v < ds.view_count(); ++v) observed[v] = observed_index(mask, v);
    std::vector<std::size_t> complete_rows = complete;

    for (int epoch = 0; epoch < cfg.epochs_joint; ++epoch) {
        std::vector<std::vector<std::vector<std::size_t>>> recon_batches(ds.view_count());
        for (std::size_t v = 0; v < ds.view_count(); ++v) {
            if (steps > 1) state.rng.shuffle(observed[v]);
            recon_batches[v] = chunk(observed[v], steps);
        }
        if (steps > 1 && needs_pairs) state.rng.shuffle(complete_rows);
        const auto pair_batches = chunk(complete_rows, steps);

        for (std::size_t s = 0; s < steps; ++s) {
            ModelGrads grads = zero_grads(state.models);
            LossParts parts;
            if (cfg.use_reconstruction) {
                std::vector<std::vector<std::size_t>> rows_per_view(ds.view_count());
                for (std::size_t v = 0; v < ds.view_count(); ++v)
                    rows_per_view[v] = recon_batches[v][s];
                parts.lz = recon_through_networks(state.models, ds.views, rows_per_view,
                                                  1.0, grads);
            }
            if (needs_pairs && pair_batches[s].size() >= 2) {
                if (cfg.lambda1 > 0.0)
                    parts.lc = contrast_through_encoders(state.models, ds.views,
                                                         pair_batches[s], cfg,
                                                         cfg.lambda1, grads);
                if (cfg.lambda2 > 0.0)
                    parts.lr = predict_through_encoders(state.models, ds.views,
                                                        pair_batches[s], cfg,
                                                        cfg.lambda2, grads);
            }
            try {
                total_loss(parts, cfg);
            } catch (const TrainingError& e) {
                throw TrainingError(std::string(e.what()) + " at joint epoch " +
                                    std::to_string(epoch));
            }
            step_all(state, grads);
        }

        const LossParts parts = eval_losses(state.models, ds, mask, cfg);
        const double total = total_loss(parts, cfg);
        TraceRow row;
        row.epoch = epoch;
        row.lz = parts.lz;
        row.lc = parts.lc;
        row.lr = parts.lr;
        row.total = total;
        if (cfg.trace_metrics) {
            if (const auto report = epoch_metrics(state, ds, mask)) {
                row.acc = report->acc;
                row.nmi = report->nmi;
                row.ari = report->ari;
            }
        }
        state.trace.append(row);

        if (total < state.best_loss) {
            state.best_loss = total;
            state.best_models = state.models;
        }
        ++state.epoch;
    }
}

LatentBundle embed_with(const std::vector<ViewModel>& models, std::size_t sub_dim,
                        const MultiViewDataset& ds, const ObservationMask& mask) {
    LatentBundle bundle;
    bundle.sub_dim = sub_dim;
    for (std::size_t v = 0; v < models.size(); ++v)
        bundle.z.emplace_back(ds.n(), models[v].latent_dim());
    bundle.init_provenance(Provenance::absent);

    for (std::size_t v = 0; v < models.size(); ++v) {
        const auto rows = observed_index(mask, v);
        if (rows.empty()) continue;
        const Matrix z = nn::mlp_forward(models[v].encoder, take_rows(ds.views[v], rows));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            auto dst = bundle.z[v].row(rows[r]);
            auto src = z.row(r);
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = src[j];
            bundle.set_provenance(rows[r], v, Provenance::observed);
        }
    }
    return bundle;
}

LatentBundle embed(const RunState& state, const MultiViewDataset& ds,
                   const ObservationMask& mask) {
    return embed_with(state.eval_models(), state.cfg.sub_dim, ds, mask);
}

namespace {

template <typename T>
void write_le(std::ostream& out, T value) {
    std::uint64_t bits = static_cast<std::uint64_t>(value);
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T)))
        throw DataError("truncated model checkpoint");
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(bits);
}

} // namespace

void save_checkpoint(const std::vector<ViewModel>& models,
                     const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write("MVK1", 4);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(models.size()));
    for (const auto& vm : models) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(vm.view));
        nn::save_mlp(vm.encoder, out);
        nn::save_mlp(vm.decoder, out);
        std::uint32_t heads = 0;
        for (std::size_t p = 0; p < vm.predictors.size(); ++p)
            if (p != vm.view) ++heads;
        write_le<std::uint32_t>(out, heads);
        for (std::size_t p = 0; p < vm.predictors.size(); ++p) {
            if (p == vm.view) continue;
            write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p));
            nn::save_mlp(vm.predictors[p], out);
        }
    }
}

std::vector<ViewModel> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "MVK1", 4) != 0)
        throw DataError(path.string() + ": bad checkpoint magic");
    const auto count = read_le<std::uint32_t>(in);
    std::vector<ViewModel> models(count);
    for (std::uint32_t v = 0; v < count; ++v) {
        ViewModel vm;
        vm.view = read_le<std::uint32_t>(in);
        vm.encoder = nn::load_mlp(in);
        vm.decoder = nn::load_mlp(in);
        vm.predictors.resize(count);
        const auto heads = read_le<std::uint32_t>(in);
        for (std::uint32_t h = 0; h < heads; ++h) {
            const auto target = read_le<std::uint32_t>(in);
            vm.predictors[target] = nn::load_mlp(in);
        }
        models[vm.view] = std::move(vm);
    }
    return models;
}

} // namespace imvc
