#include "imvc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <sstream>

#include "imvc/diagnostics.hpp"
#include "imvc/error.hpp"

namespace imvc {

MultiViewDataset synth_dataset(const SynthParams& params) {
    if (params.k < 1) throw ConfigError("synth: k must be positive");
    if (params.n < 2 * static_cast<std::size_t>(params.k))
        throw ConfigError("synth: need at least 2k samples");
    if (params.sep <= 0.0) throw ConfigError("synth: separation must be positive");
    if (params.views < 2) throw ConfigError("synth: need at least two views");

    Rng rng(params.seed);
    const std::size_t latent = params.latent_dim;

    // Cluster centers on a sphere of radius sep. While they fit, draw an
    // orthonormal random frame so every pair sits sep*sqrt(2) apart;
    // orientation stays random.
    Matrix centers(params.k, latent);
    for (int c = 0; c < params.k; ++c) {
        for (std::size_t j = 0; j < latent; ++j) centers(c, j) = rng.normal();
        if (static_cast<std::size_t>(c) < latent) {
            for (int prev = 0; prev < c; ++prev) {
                const double proj = dot(centers.row(c), centers.row(prev));
                for (std::size_t j = 0; j < latent; ++j)
                    centers(c, j) -= proj * centers(prev, j) / (params.sep * params.sep);
            }
        }
        const double norm = std::sqrt(std::max(sq_norm(centers.row(c)), 1e-12));
        for (std::size_t j = 0; j < latent; ++j)
            centers(c, j) *= params.sep / norm;
    }

    std::vector<int> labels(params.n);
    for (std::size_t i = 0; i < params.n; ++i)
        labels[i] = static_cast<int>(i % static_cast<std::size_t>(params.k));
    rng.shuffle(labels);

    Matrix h(params.n, latent);
    for (std::size_t i = 0; i < params.n; ++i)
        for (std::size_t j = 0; j < latent; ++j)
            h(i, j) = centers(labels[i], j) + params.noise * rng.normal();

    MultiViewDataset ds;
    ds.name = "synthetic";
    ds.k = params.k;
    ds.labels = labels;
    // Gentle nonlinearity: pre-activations stay mostly in tanh's near-linear
    // range so each view keeps the latent manifold's dimensionality.
    const double map_scale = 0.5 / std::sqrt(static_cast<double>(latent));
    for (std::size_t v = 0; v < params.views; ++v) {
        Matrix w(params.feature_dim, latent);
        std::vector<double> bias(params.feature_dim);
        for (double& x : w.data()) x = map_scale * rng.normal();
        for (double& b : bias) b = 0.1 * rng.normal();

        Matrix view = matmul_nt(h, w);
        for (std::size_t i = 0; i < view.rows(); ++i) {
            auto r = view.row(i);
            for (std::size_t j = 0; j < view.cols(); ++j)
                r[j] = std::tanh(r[j] + bias[j]) + 0.005 * rng.normal();
        }
        ds.views.push_back(std::move(view));
    }
    ds.validate();
    return ds;
}

void ExperimentSpec::validate() const {
    if (etas.empty()) throw ConfigError("experiment needs at least one missing rate");
    for (double eta : etas)
        if (eta < 0.0 || eta >= 1.0)
            throw ConfigError("missing rate must be in [0,1), got " + std::to_string(eta));
    if (seeds.empty()) throw ConfigError("experiment needs at least one seed");
    if (out_dir.empty()) throw ConfigError("experiment needs an output directory");
    if (threads < 1) throw ConfigError("thread count must be positive");
    if (kmeans_restarts < 1) throw ConfigError("kmeans restarts must be positive");
    model.validate();
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * fraction);
    return buf;
}

std::string file_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot hash missing file " + path.string());
    std::uint64_t hash = 1469598103934665603ull;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 1099511628211ull;
        }
        if (!in) break;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
    return out;
}

std::string dataset_hash(const std::filesystem::path& stem, DataFormat format) {
    std::uint64_t hash = 1469598103934665603ull;
    auto mix = [&hash](const std::string& part) {
        for (unsigned char c : part) {
            hash ^= c;
            hash *= 1099511628211ull;
        }
    };
    if (format == DataFormat::packed_binary) {
        mix(file_hash(stem.string() + ".mvc"));
    } else {
        for (std::size_t k = 1;; ++k) {
            const std::string file = stem.string() + ".view" + std::to_string(k) + ".csv";
            if (!std::filesystem::exists(file)) break;
            mix(file_hash(file));
        }
        const std::string labels = stem.string() + ".labels.csv";
        if (std::filesystem::exists(labels)) mix(file_hash(labels));
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
    return out;
}

namespace {

std::string fusion_name(FusionMode m) {
    return m == FusionMode::concat_sub ? "concat_sub" : "concat_full";
}

nlohmann::json cell_config_json(const ExperimentSpec& spec, double eta,
                                std::uint64_t seed, const ModelConfig& cfg) {
    nlohmann::json j;
    j["dataset"] = spec.dataset_stem.string();
    j["format"] = spec.format == DataFormat::packed_binary ? "packed" : "csv";
    j["dataset_hash"] = dataset_hash(spec.dataset_stem, spec.format);
    j["eta"] = eta;
    j["seed"] = seed;
    j["fusion"] = fusion_name(spec.fusion);
    j["kmeans_restarts"] = spec.kmeans_restarts;
    j["model"] = config_to_json(cfg);
    return j;
}

std::string json_hash(const nlohmann::json& j) {
    const std::string dump = j.dump();
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : dump) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
    return out;
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

struct AggregateRow {
    double eta = 0.0;
    std::size_t seeds = 0;
    std::size_t failed = 0;
    double acc = 0.0, nmi = 0.0, ari = 0.0;
};

AggregateRow aggregate(double eta, const std::vector<const CellResult*>& cells) {
    AggregateRow row;
    row.eta = eta;
    for (const CellResult* cell : cells) {
        ++row.seeds;
        if (cell->failed || !cell->report.acc) {
            ++row.failed;
            continue;
        }
        row.acc += *cell->report.acc;
        row.nmi += *cell->report.nmi;
        row.ari += *cell->report.ari;
    }
    const auto ok = static_cast<double>(row.seeds - row.failed);
    if (ok > 0) {
        row.acc /= ok;
        row.nmi /= ok;
        row.ari /= ok;
    }
    return row;
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows,
                         const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "eta,seeds,acc,nmi,ari,failed\n";
    for (const auto& r : rows) {
        char eta_buf[16];
        std::snprintf(eta_buf, sizeof(eta_buf), "%.2f", r.eta);
        out << eta_buf << ',' << r.seeds << ',';
        if (r.seeds == r.failed) {
            out << "failed,failed,failed";
        } else {
            out << format_percent(r.acc) << ',' << format_percent(r.nmi) << ','
                << format_percent(r.ari);
        }
        out << ',' << r.failed << '\n';
    }
}

std::string cell_dir_name(double eta, std::uint64_t seed, const std::string& tag) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "eta%.2f_seed%llu", eta,
                  static_cast<unsigned long long>(seed));
    return tag.empty() ? std::string(buf) : tag + "_" + buf;
}

// Run cells across a simple worker pool; each cell owns its directory.
std::vector<CellResult> run_cells(
    const MultiViewDataset& normalized, const ExperimentSpec& spec,
    const std::vector<std::tuple<double, std::uint64_t, ModelConfig, std::string>>& jobs) {
    std::vector<CellResult> results(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            const auto& [eta, seed, cfg, tag] = jobs[i];
            ExperimentSpec cell_spec = spec;
            cell_spec.model = cfg;
            const auto dir = spec.out_dir / cell_dir_name(eta, seed, tag);
            try {
                results[i] = run_cell(normalized, cell_spec, eta, seed, dir);
            } catch (const std::exception& e) {
                CellResult failed;
                failed.eta = eta;
                failed.seed = seed;
                failed.failed = true;
                failed.error = e.what();
                if (dynamic_cast<const TrainingError*>(&e))
                    failed.error_kind = 3;
                else if (dynamic_cast<const DataError*>(&e) ||
                         dynamic_cast<const ConfigError*>(&e))
                    failed.error_kind = 2;
                else
                    failed.error_kind = 4;
                results[i] = failed;
                nlohmann::json marker{{"status", "failed"},
                                      {"eta", eta},
                                      {"seed", seed},
                                      {"error", e.what()}};
                std::filesystem::create_directories(dir);
                write_json(marker, dir / "result.json");
            }
        }
    };
    const std::size_t pool =
        std::min<std::size_t>(static_cast<std::size_t>(spec.threads), jobs.size());
    if (pool <= 1) {
        worker();
    } else {
        std::vector<std::future<void>> futures;
        for (std::size_t t = 0; t < pool; ++t)
            futures.push_back(std::async(std::launch::async, worker));
        for (auto& f : futures) f.get();
    }
    return results;
}

} // namespace

CellResult run_cell(const MultiViewDataset& normalized, const ExperimentSpec& spec,
                    double eta, std::uint64_t seed,
                    const std::filesystem::path& cell_dir) {
    std::filesystem::create_directories(cell_dir / "embeddings");

    ModelConfig cfg = spec.model;
    cfg.seed = seed;
    write_json(cell_config_json(spec, eta, seed, cfg), cell_dir / "config.json");

    const ObservationMask mask = generate_mask(normalized.n(), normalized.view_count(),
                                               eta, seed);
    save_mask(mask, cell_dir / "mask.csv");

    RunState state = pretrain(normalized, mask, cfg);
    train_joint(state, normalized, mask);
    state.trace.save_csv(cell_dir / "trace.csv");
    save_checkpoint(state.eval_models(), cell_dir / "checkpoint.bin");

    LatentBundle bundle = embed(state, normalized, mask);
    bundle = recover_latents(state.eval_models(), std::move(bundle), mask);
    export_embeddings(bundle, cell_dir / "embeddings" / "embeddings.csv");

    const FusedFeatures fused = fuse(bundle, spec.fusion);
    export_fused(fused, cell_dir / "embeddings" / "fused.csv");

    KmeansParams kp;
    kp.seed = seed;
    kp.restarts = spec.kmeans_restarts;
    const KmeansResult km = kmeans(fused.x, normalized.k, kp);

    CellResult result;
    result.eta = eta;
    result.seed = seed;
    result.report.labels = km.labels;
    result.report.inertia = km.inertia;
    if (normalized.labels) {
        result.report.acc = acc(*normalized.labels, km.labels);
        result.report.nmi = nmi(*normalized.labels, km.labels);
        result.report.ari = ari(*normalized.labels, km.labels);
    }

    std::vector<Matrix> subs, fulls;
    for (std::size_t v = 0; v < bundle.view_count(); ++v) {
        subs.push_back(bundle.sub(v));
        fulls.push_back(bundle.z[v]);
    }
    result.report.effective_rank_sub = spectrum(vstack(subs)).effective_rank;
    result.report.effective_rank_full = spectrum(vstack(fulls)).effective_rank;

    result.losses = eval_losses(state.eval_models(), normalized, mask, cfg);
    result.total_loss = total_loss(result.losses, cfg);

    nlohmann::json out;
    out["status"] = "ok";
    out["eta"] = eta;
    out["seed"] = seed;
    if (result.report.acc) {
        out["metrics"] = {{"acc", *result.report.acc},
                          {"nmi", *result.report.nmi},
                          {"ari", *result.report.ari}};
    }
    out["inertia"] = km.inertia;
    out["effective_rank_sub"] = result.report.effective_rank_sub;
    out["effective_rank_full"] = result.report.effective_rank_full;
    out["losses"] = {{"lz", result.losses.lz},
                     {"lc", result.losses.lc},
                     {"lr", result.losses.lr},
                     {"total", result.total_loss}};
    out["config_hash"] = json_hash(cell_config_json(spec, eta, seed, cfg));
    out["dataset_hash"] = dataset_hash(spec.dataset_stem, spec.format);
    write_json(out, cell_dir / "result.json");
    return result;
}

std::vector<CellResult> run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    std::filesystem::create_directories(spec.out_dir);
    MultiViewDataset ds = load_dataset(spec.dataset_stem, spec.format, spec.k_override);
    ds = normalize_minmax(ds);

    std::vector<std::tuple<double, std::uint64_t, ModelConfig, std::string>> jobs;
    for (double eta : spec.etas)
        for (std::uint64_t seed : spec.seeds)
            jobs.emplace_back(eta, seed, spec.model, "");

    auto results = run_cells(ds, spec, jobs);

    std::vector<AggregateRow> rows;
    std::size_t at = 0;
    for (double eta : spec.etas) {
        std::vector<const CellResult*> cells;
        for (std::size_t s = 0; s < spec.seeds.size(); ++s) cells.push_back(&results[at++]);
        rows.push_back(aggregate(eta, cells));
    }
    write_aggregate_csv(rows, spec.out_dir / "results.csv");
    return results;
}

std::vector<CellResult> run_ablation(const ExperimentSpec& spec, double eta) {
    spec.validate();
    std::filesystem::create_directories(spec.out_dir);
    MultiViewDataset ds = load_dataset(spec.dataset_stem, spec.format, spec.k_override);
    if (!ds.labels) throw ConfigError("ablation study needs a labeled dataset");
    ds = normalize_minmax(ds);

    struct LossRow {
        AblationFlags flags;
        std::string tag;
    };
    const std::vector<LossRow> loss_rows = {
        {{true, false, false}, "Lz"},
        {{false, false, true}, "Lr"},
        {{false, true, false}, "Lc"},
        {{true, false, true}, "Lr_Lz"},
        {{true, true, false}, "Lc_Lz"},
        {{false, true, true}, "Lr_Lc"},
        {{true, true, true}, "full"},
    };
    const std::vector<std::pair<ContrastTarget, std::string>> repr_rows = {
        {ContrastTarget::full_latent, "full_latent"},
        {ContrastTarget::both, "both"},
        {ContrastTarget::sub_vector, "sub_vector"},
    };

    std::vector<std::tuple<double, std::uint64_t, ModelConfig, std::string>> jobs;
    for (const auto& row : loss_rows)
        for (std::uint64_t seed : spec.seeds)
            jobs.emplace_back(eta, seed, ablation_config(spec.model, row.flags),
                              "loss_" + row.tag);
    for (const auto& [target, tag] : repr_rows) {
        ModelConfig cfg = spec.model;
        cfg.contrast_target = target;
        for (std::uint64_t seed : spec.seeds) jobs.emplace_back(eta, seed, cfg, "repr_" + tag);
    }

    auto results = run_cells(ds, spec, jobs);

    std::size_t at = 0;
    {
        std::ofstream out(spec.out_dir / "ablation_loss.csv");
        if (!out) throw DataError("cannot write ablation_loss.csv");
        out << "Lr,Lc,Lz,acc,nmi,ari,failed\n";
        for (const auto& row : loss_rows) {
            std::vector<const CellResult*> cells;
            for (std::size_t s = 0; s < spec.seeds.size(); ++s)
                cells.push_back(&results[at++]);
            const auto agg = aggregate(eta, cells);
            out << (row.flags.use_prediction ? 1 : 0) << ','
                << (row.flags.use_contrast ? 1 : 0) << ','
                << (row.flags.use_reconstruction ? 1 : 0) << ',';
            if (agg.seeds == agg.failed)
                out << "failed,failed,failed";
            else
                out << format_percent(agg.acc) << ',' << format_percent(agg.nmi) << ','
                    << format_percent(agg.ari);
            out << ',' << agg.failed << '\n';
        }
    }
    {
        std::ofstream out(spec.out_dir / "ablation_repr.csv");
        if (!out) throw DataError("cannot write ablation_repr.csv");
        out << "target,acc,nmi,ari,failed\n";
        for (const auto& [target, tag] : repr_rows) {
            std::vector<const CellResult*> cells;
            for (std::size_t s = 0; s < spec.seeds.size(); ++s)
                cells.push_back(&results[at++]);
            const auto agg = aggregate(eta, cells);
            out << tag << ',';
            if (agg.seeds == agg.failed)
                out << "failed,failed,failed";
            else
                out << format_percent(agg.acc) << ',' << format_percent(agg.nmi) << ','
                    << format_percent(agg.ari);
            out << ',' << agg.failed << '\n';
        }
    }
    return results;
}

void run_grid(const ExperimentSpec& spec, double eta,
              const std::vector<double>& lambda1_values,
              const std::vector<double>& lambda2_values) {
    spec.validate();
    if (lambda1_values.empty() || lambda2_values.empty())
        throw ConfigError("grid needs nonempty lambda lists");
    std::filesystem::create_directories(spec.out_dir);
    MultiViewDataset ds = load_dataset(spec.dataset_stem, spec.format, spec.k_override);
    ds = normalize_minmax(ds);

    std::vector<std::tuple<double, std::uint64_t, ModelConfig, std::string>> jobs;
    for (double l1 : lambda1_values) {
        for (double l2 : lambda2_values) {
            ModelConfig cfg = spec.model;
            cfg.lambda1 = l1;
            cfg.lambda2 = l2;
            std::ostringstream tag;
            tag << "grid_l1_" << l1 << "_l2_" << l2;
            for (std::uint64_t seed : spec.seeds) jobs.emplace_back(eta, seed, cfg, tag.str());
        }
    }
    auto results = run_cells(ds, spec, jobs);

    std::ofstream out(spec.out_dir / "grid.csv");
    if (!out) throw DataError("cannot write grid.csv");
    out << "lambda1,lambda2,acc,nmi,failed\n";
    std::size_t at = 0;
    for (double l1 : lambda1_values) {
        for (double l2 : lambda2_values) {
            std::vector<const CellResult*> cells;
            for (std::size_t s = 0; s < spec.seeds.size(); ++s)
                cells.push_back(&results[at++]);
            const auto agg = aggregate(eta, cells);
            out << l1 << ',' << l2 << ',';
            if (agg.seeds == agg.failed)
                out << "failed,failed";
            else
                out << format_percent(agg.acc) << ',' << format_percent(agg.nmi);
            out << ',' << agg.failed << '\n';
        }
    }
}

namespace {

// embeddings.csv back into per-view matrices
std::vector<Matrix> load_embeddings(const std::filesystem::path& csv_path,
                                    std::size_t& n_out) {
    std::ifstream in(csv_path);
    if (!in) throw DataError("missing embeddings file " + csv_path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty embeddings file");
    std::map<std::size_t, std::vector<std::vector<double>>> by_view;
    std::size_t max_sample = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 4) throw DataError("malformed embeddings row");
        const auto sample = static_cast<std::size_t>(std::stoull(cells[0]));
        const auto view = static_cast<std::size_t>(std::stoull(cells[1]));
        max_sample = std::max(max_sample, sample);
        std::vector<double> coords;
        for (std::size_t c = 2; c + 1 < cells.size(); ++c)
            coords.push_back(std::stod(cells[c]));
        auto& rows = by_view[view];
        if (rows.size() <= sample) rows.resize(sample + 1);
        rows[sample] = std::move(coords);
    }
    n_out = max_sample + 1;
    std::vector<Matrix> views;
    for (const auto& [view, rows] : by_view) {
        if (rows.size() != n_out) throw DataError("embeddings file has missing rows");
        Matrix m(rows.size(), rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
        views.push_back(std::move(m));
    }
    return views;
}

} // namespace

DiagnoseSummary diagnose_run(const std::filesystem::path& run_dir,
                             const std::filesystem::path& out_dir_arg) {
    const auto config_path = run_dir / "config.json";
    std::ifstream cfg_in(config_path);
    if (!cfg_in) throw DataError("missing " + config_path.string());
    const nlohmann::json cfg_json = nlohmann::json::parse(cfg_in);
    const ModelConfig cfg = config_from_json(cfg_json.at("model"));

    std::size_t n = 0;
    const auto views = load_embeddings(run_dir / "embeddings" / "embeddings.csv", n);
    std::vector<Matrix> subs;
    for (const auto& z : views)
        subs.push_back(slice_cols(z, 0, static_cast<std::size_t>(cfg.sub_dim)));

    const auto report_full = spectrum(vstack(views));
    const auto report_sub = spectrum(vstack(subs));

    const auto out_dir = out_dir_arg.empty() ? run_dir / "diagnostics" : out_dir_arg;
    std::filesystem::create_directories(out_dir);
    save_spectrum(report_full, out_dir / "spectrum_full.csv");
    save_spectrum(report_sub, out_dir / "spectrum_sub.csv");

    const RunTrace trace = RunTrace::load_csv(run_dir / "trace.csv");
    if (trace.empty()) throw DataError("trace has no rows in " + run_dir.string());

    auto column_stats = [&trace](auto pick) {
        double lo = pick(trace.rows().front()), hi = lo;
        for (const auto& r : trace.rows()) {
            lo = std::min(lo, pick(r));
            hi = std::max(hi, pick(r));
        }
        return nlohmann::json{{"min", lo}, {"max", hi}, {"final", pick(trace.rows().back())}};
    };

    DiagnoseSummary summary;
    summary.effective_rank_sub = report_sub.effective_rank;
    summary.effective_rank_full = report_full.effective_rank;
    summary.final_total = trace.rows().back().total;

    nlohmann::json j;
    j["effective_rank_sub"] = report_sub.effective_rank;
    j["effective_rank_full"] = report_full.effective_rank;
    j["participation_sub"] = report_sub.participation;
    j["participation_full"] = report_full.participation;
    j["trace"] = {{"Lz", column_stats([](const TraceRow& r) { return r.lz; })},
                  {"Lc", column_stats([](const TraceRow& r) { return r.lc; })},
                  {"Lr", column_stats([](const TraceRow& r) { return r.lr; })},
                  {"total", column_stats([](const TraceRow& r) { return r.total; })}};
    if (trace.rows().back().acc) {
        j["final_metrics"] = {{"acc", *trace.rows().back().acc},
                              {"nmi", *trace.rows().back().nmi},
                              {"ari", *trace.rows().back().ari}};
    }
    write_json(j, out_dir / "summary.json");
    return summary;
}

std::string diagnose_compare(const std::filesystem::path& run_dir,
                             const std::filesystem::path& baseline_dir) {
    const auto a = diagnose_run(run_dir);
    const auto b = diagnose_run(baseline_dir);
    std::ostringstream out;
    out << "effective_rank_sub: run=" << a.effective_rank_sub
        << " baseline=" << b.effective_rank_sub << " -> "
        << (a.effective_rank_sub > b.effective_rank_sub ? "PASS (run holds more dimensions)"
                                                        : "FAIL (run collapsed)");
    return out.str();
}

} // namespace imvc
