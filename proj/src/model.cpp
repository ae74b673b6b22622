#include "imvc/model.hpp"

#include <algorithm>
#include <cmath>

#include "imvc/error.hpp"

namespace imvc {

void ModelConfig::validate() const {
    if (latent_dim < 1) throw ConfigError("latent_dim must be positive");
    if (sub_dim < 1 || sub_dim > latent_dim)
        throw ConfigError("sub_dim must be in [1, latent_dim]");
    if (lambda1 < 0.0 || lambda2 < 0.0)
        throw ConfigError("loss weights must be nonnegative");
    if (lr <= 0.0) throw ConfigError("learning rate must be positive");
    if (epochs_pretrain < 0 || epochs_joint < 0)
        throw ConfigError("epoch counts must be nonnegative");
    if (batch < 0) throw ConfigError("batch must be nonnegative");
    for (int h : encoder_hidden)
        if (h < 1) throw ConfigError("hidden widths must be positive");
}

std::size_t ModelConfig::effective_batch(std::size_t n) const {
    if (batch > 0) return static_cast<std::size_t>(batch);
    return n <= 5000 ? n : 256;
}

namespace {

std::string target_name(ContrastTarget t) {
    switch (t) {
        case ContrastTarget::sub_vector: return "sub_vector";
        case ContrastTarget::full_latent: return "full_latent";
        case ContrastTarget::both: return "both";
    }
    return "sub_vector";
}

ContrastTarget target_from_name(const std::string& s) {
    if (s == "sub_vector") return ContrastTarget::sub_vector;
    if (s == "full_latent") return ContrastTarget::full_latent;
    if (s == "both") return ContrastTarget::both;
    throw ConfigError("unknown contrast_target '" + s + "'");
}

} // namespace

nlohmann::json config_to_json(const ModelConfig& cfg) {
    return nlohmann::json{
        {"latent_dim", cfg.latent_dim},
        {"sub_dim", cfg.sub_dim},
        {"lambda1", cfg.lambda1},
        {"lambda2", cfg.lambda2},
        {"encoder_hidden", cfg.encoder_hidden},
        {"lr", cfg.lr},
        {"epochs_pretrain", cfg.epochs_pretrain},
        {"epochs_joint", cfg.epochs_joint},
        {"batch", cfg.batch},
        {"seed", cfg.seed},
        {"use_reconstruction", cfg.use_reconstruction},
        {"contrast_target", target_name(cfg.contrast_target)},
        {"cross_view_negatives", cfg.cross_view_negatives},
        {"stop_encoder_grad_on_predict", cfg.stop_encoder_grad_on_predict},
        {"trace_metrics", cfg.trace_metrics},
    };
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.latent_dim = j.at("latent_dim").get<int>();
    cfg.sub_dim = j.at("sub_dim").get<int>();
    cfg.lambda1 = j.at("lambda1").get<double>();
    cfg.lambda2 = j.at("lambda2").get<double>();
    cfg.encoder_hidden = j.at("encoder_hidden").get<std::vector<int>>();
    cfg.lr = j.at("lr").get<double>();
    cfg.epochs_pretrain = j.at("epochs_pretrain").get<int>();
    cfg.epochs_joint = j.at("epochs_joint").get<int>();
    cfg.batch = j.at("batch").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.use_reconstruction = j.at("use_reconstruction").get<bool>();
    cfg.contrast_target = target_from_name(j.at("contrast_target").get<std::string>());
    cfg.cross_view_negatives = j.at("cross_view_negatives").get<bool>();
    cfg.stop_encoder_grad_on_predict = j.at("stop_encoder_grad_on_predict").get<bool>();
    cfg.trace_metrics = j.at("trace_metrics").get<bool>();
    cfg.validate();
    return cfg;
}

std::vector<ViewModel> make_view_models(const std::vector<std::size_t>& feature_dims,
                                        const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t v_count = feature_dims.size();
    const auto d = static_cast<std::size_t>(cfg.latent_dim);
    std::vector<std::size_t> hidden(cfg.encoder_hidden.begin(), cfg.encoder_hidden.end());
    std::vector<std::size_t> mirrored(hidden.rbegin(), hidden.rend());

    std::vector<ViewModel> models;
    for (std::size_t v = 0; v < v_count; ++v) {
        ViewModel vm;
        vm.view = v;
        vm.encoder = nn::make_mlp(feature_dims[v], hidden, d, rng);
        vm.decoder = nn::make_mlp(d, mirrored, feature_dims[v], rng);
        vm.predictors.resize(v_count);
        for (std::size_t q = 0; q < v_count; ++q) {
            if (q == v) continue;
            vm.predictors[q] = nn::make_mlp(d, {d}, d, rng);
        }
        models.push_back(std::move(vm));
    }
    return models;
}

Matrix LatentBundle::sub(std::size_t v) const { return slice_cols(z[v], 0, sub_dim); }

void LatentBundle::init_provenance(Provenance fill) {
    prov_.assign(n() * view_count(), fill);
}

bool LatentBundle::any_absent() const {
    return std::any_of(prov_.begin(), prov_.end(),
                       [](Provenance p) { return p == Provenance::absent; });
}

ReconLossResult loss_recon(const ViewModel& vm, const Matrix& x_view,
                           std::span<const std::size_t> rows) {
    ReconLossResult result;
    result.d_encoder = nn::MlpGrad::zeros_like(vm.encoder);
    result.d_decoder = nn::MlpGrad::zeros_like(vm.decoder);
    if (rows.empty()) return result;

    const Matrix xb = take_rows(x_view, rows);
    nn::ForwardCache enc_cache, dec_cache;
    const Matrix z = nn::mlp_forward(vm.encoder, xb, &enc_cache);
    const Matrix xhat = nn::mlp_forward(vm.decoder, z, &dec_cache);

    Matrix residual = xhat;
    add_inplace(residual, xb, -1.0);
    result.loss = sq_norm(residual.data());

    scale_inplace(residual, 2.0);
    const Matrix dz = nn::mlp_backward(vm.decoder, dec_cache, residual, result.d_decoder);
    nn::mlp_backward(vm.encoder, enc_cache, dz, result.d_encoder);
    return result;
}

ContrastLossResult loss_contrastive(const std::vector<Matrix>& sub,
                                    bool cross_view_negatives) {
    if (sub.size() < 2)
        throw ConfigError("consistency loss needs at least two views");
    const std::size_t b = sub.front().rows();
    const std::size_t d = sub.front().cols();
    if (b < 2)
        throw ConfigError("consistency loss needs a batch of at least two samples");
    for (const auto& s : sub)
        if (s.rows() != b || s.cols() != d)
            throw ContractError("sub-vector matrices must share shape");

    const double pair_count = static_cast<double>(b) * static_cast<double>(b - 1) / 2.0;
    ContrastLossResult result;
    for (const auto& s : sub) result.d_sub.emplace_back(s.rows(), s.cols());

    // Gram matrix with zeroed diagonal per view, shared by every pair the
    // view participates in.
    std::vector<Matrix> gram(sub.size());
    std::vector<double> self_uniformity(sub.size(), 0.0);
    for (std::size_t v = 0; v < sub.size(); ++v) {
        gram[v] = matmul_nt(sub[v], sub[v]);
        for (std::size_t i = 0; i < b; ++i) gram[v](i, i) = 0.0;
        self_uniformity[v] = sq_norm(gram[v].data());
    }

    for (std::size_t v = 0; v < sub.size(); ++v) {
        for (std::size_t n = v + 1; n < sub.size(); ++n) {
            for (std::size_t i = 0; i < b; ++i)
                result.alignment -= (2.0 / static_cast<double>(b)) *
                                    dot(sub[v].row(i), sub[n].row(i));
            add_inplace(result.d_sub[v], sub[n], -2.0 / static_cast<double>(b));
            add_inplace(result.d_sub[n], sub[v], -2.0 / static_cast<double>(b));

            for (std::size_t w : {v, n}) {
                result.uniformity += self_uniformity[w] / (2.0 * pair_count);
                add_inplace(result.d_sub[w], matmul(gram[w], sub[w]),
                            2.0 / pair_count);
            }

            if (cross_view_negatives) {
                Matrix cross = matmul_nt(sub[v], sub[n]);
                for (std::size_t i = 0; i < b; ++i) cross(i, i) = 0.0;
                result.uniformity += sq_norm(cross.data()) / (2.0 * pair_count);
                add_inplace(result.d_sub[v], matmul(cross, sub[n]), 1.0 / pair_count);
                add_inplace(result.d_sub[n], matmul_tn(cross, sub[v]), 1.0 / pair_count);
            }
        }
    }
    result.loss = result.alignment + result.uniformity;
    return result;
}

ContrastPairCounts contrast_pair_counts(std::size_t views, std::size_t batch) {
    ContrastPairCounts c;
    c.positives = views - 1;
    c.negatives = views * (batch - 1);
    c.total = views * batch - 1;
    return c;
}

PredictLossResult loss_predict(const std::vector<ViewModel>& models,
                               const std::vector<Matrix>& z,
                               std::span<const std::size_t> rows) {
    if (models.size() != z.size())
        throw ContractError("loss_predict: model/latent count mismatch");
    PredictLossResult result;
    result.d_predictors.resize(models.size());
    for (std::size_t q = 0; q < models.size(); ++q) {
        result.d_predictors[q].resize(models.size());
        for (std::size_t p = 0; p < models.size(); ++p)
            if (p != q)
                result.d_predictors[q][p] =
                    nn::MlpGrad::zeros_like(models[q].predictors[p]);
        result.d_z.emplace_back(rows.size(), z[q].cols());
    }
    if (rows.empty()) return result;

    const double inv_b = 1.0 / static_cast<double>(rows.size());
    std::vector<Matrix> zb;
    for (const auto& zv : z) zb.push_back(take_rows(zv, rows));

    for (std::size_t q = 0; q < models.size(); ++q) {
        for (std::size_t p = 0; p < models.size(); ++p) {
            if (p == q) continue;
            nn::ForwardCache cache;
            const Matrix pred = nn::mlp_forward(models[q].predictors[p], zb[q], &cache);
            Matrix err = pred;
            add_inplace(err, zb[p], -1.0);
            result.loss += inv_b * sq_norm(err.data());

            scale_inplace(err, 2.0 * inv_b);
            const Matrix d_source = nn::mlp_backward(models[q].predictors[p], cache, err,
                                                     result.d_predictors[q][p]);
            add_inplace(result.d_z[q], d_source);
            add_inplace(result.d_z[p], err, -1.0);
        }
    }
    return result;
}

double total_loss(const LossParts& parts, const ModelConfig& cfg) {
    if (!std::isfinite(parts.lz)) throw TrainingError("reconstruction loss is non-finite");
    if (!std::isfinite(parts.lc)) throw TrainingError("consistency loss is non-finite");
    if (!std::isfinite(parts.lr)) throw TrainingError("prediction loss is non-finite");
    const double lz = cfg.use_reconstruction ? parts.lz : 0.0;
    return lz + cfg.lambda1 * parts.lc + cfg.lambda2 * parts.lr;
}

ModelConfig ablation_config(const ModelConfig& base, const AblationFlags& flags) {
    if (!flags.use_reconstruction && !flags.use_contrast && !flags.use_prediction)
        throw ConfigError("ablation must keep at least one loss term");
    ModelConfig cfg = base;
    cfg.use_reconstruction = flags.use_reconstruction;
    if (!flags.use_contrast) cfg.lambda1 = 0.0;
    if (!flags.use_prediction) cfg.lambda2 = 0.0;
    return cfg;
}

ViewGrads ViewGrads::zeros_like(const ViewModel& vm) {
    ViewGrads g;
    g.encoder = nn::MlpGrad::zeros_like(vm.encoder);
    g.decoder = nn::MlpGrad::zeros_like(vm.decoder);
    g.predictors.resize(vm.predictors.size());
    for (std::size_t q = 0; q < vm.predictors.size(); ++q)
        if (q != vm.view) g.predictors[q] = nn::MlpGrad::zeros_like(vm.predictors[q]);
    return g;
}

ModelGrads zero_grads(const std::vector<ViewModel>& models) {
    ModelGrads grads;
    for (const auto& vm : models) grads.push_back(ViewGrads::zeros_like(vm));
    return grads;
}

double recon_through_networks(const std::vector<ViewModel>& models,
                              const std::vector<Matrix>& views,
                              const std::vector<std::vector<std::size_t>>& rows_per_view,
                              double weight, ModelGrads& grads) {
    double loss = 0.0;
    for (std::size_t v = 0; v < models.size(); ++v) {
        auto part = loss_recon(models[v], views[v], rows_per_view[v]);
        loss += part.loss;
        grads[v].encoder.accumulate(part.d_encoder, weight);
        grads[v].decoder.accumulate(part.d_decoder, weight);
    }
    return loss;
}

double contrast_through_encoders(const std::vector<ViewModel>& models,
                                 const std::vector<Matrix>& views,
                                 std::span<const std::size_t> rows,
                                 const ModelConfig& cfg, double weight,
                                 ModelGrads& grads) {
    const auto d = static_cast<std::size_t>(cfg.latent_dim);
    const auto d0 = static_cast<std::size_t>(cfg.sub_dim);

    std::vector<nn::ForwardCache> caches(models.size());
    std::vector<Matrix> latents;
    for (std::size_t v = 0; v < models.size(); ++v)
        latents.push_back(
            nn::mlp_forward(models[v].encoder, take_rows(views[v], rows), &caches[v]));

    double loss = 0.0;
    std::vector<Matrix> d_latent(models.size());
    for (std::size_t v = 0; v < models.size(); ++v)
        d_latent[v] = Matrix(rows.size(), d);

    const bool on_sub = cfg.contrast_target != ContrastTarget::full_latent;
    const bool on_full = cfg.contrast_target != ContrastTarget::sub_vector;

    if (on_sub) {
        std::vector<Matrix> subs;
        for (const auto& zv : latents) subs.push_back(slice_cols(zv, 0, d0));
        auto part = loss_contrastive(subs, cfg.cross_view_negatives);
        loss += part.loss;
        for (std::size_t v = 0; v < models.size(); ++v)
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (std::size_t j = 0; j < d0; ++j)
                    d_latent[v](i, j) += part.d_sub[v](i, j);
    }
    if (on_full) {
        auto part = loss_contrastive(latents, cfg.cross_view_negatives);
        loss += part.loss;
        for (std::size_t v = 0; v < models.size(); ++v)
            add_inplace(d_latent[v], part.d_sub[v]);
    }

    for (std::size_t v = 0; v < models.size(); ++v) {
        scale_inplace(d_latent[v], weight);
        nn::mlp_backward(models[v].encoder, caches[v], d_latent[v], grads[v].encoder);
    }
    return loss;
}

double predict_through_encoders(const std::vector<ViewModel>& models,
                                const std::vector<Matrix>& views,
                                std::span<const std::size_t> rows,
                                const ModelConfig& cfg, double weight,
                                ModelGrads& grads) {
    std::vector<nn::ForwardCache> caches(models.size());
    std::vector<Matrix> latents;
    for (std::size_t v = 0; v < models.size(); ++v)
        latents.push_back(
            nn::mlp_forward(models[v].encoder, take_rows(views[v], rows), &caches[v]));

    std::vector<std::size_t> all(rows.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    auto part = loss_predict(models, latents, all);

    for (std::size_t q = 0; q < models.size(); ++q)
        for (std::size_t p = 0; p < models.size(); ++p)
            if (p != q) grads[q].predictors[p].accumulate(part.d_predictors[q][p], weight);

    if (!cfg.stop_encoder_grad_on_predict) {
        for (std::size_t v = 0; v < models.size(); ++v) {
            scale_inplace(part.d_z[v], weight);
            nn::mlp_backward(models[v].encoder, caches[v], part.d_z[v], grads[v].encoder);
        }
    }
    return part.loss;
}

} // namespace imvc
