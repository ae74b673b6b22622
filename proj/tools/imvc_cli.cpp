#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "imvc/error.hpp"
#include "imvc/experiment.hpp"

namespace {

using namespace imvc;

DataFormat parse_format(const std::string& s) {
    if (s == "csv") return DataFormat::csv_per_view;
    if (s == "packed") return DataFormat::packed_binary;
    throw ConfigError("unknown dataset format '" + s + "' (expected csv or packed)");
}

FusionMode parse_fusion(const std::string& s) {
    if (s == "concat_sub") return FusionMode::concat_sub;
    if (s == "concat_full") return FusionMode::concat_full;
    throw ConfigError("unknown fusion mode '" + s + "'");
}

ContrastTarget parse_target(const std::string& s) {
    if (s == "sub") return ContrastTarget::sub_vector;
    if (s == "full") return ContrastTarget::full_latent;
    if (s == "both") return ContrastTarget::both;
    throw ConfigError("unknown contrast target '" + s + "' (expected sub, full, both)");
}

ModelConfig load_model_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    const nlohmann::json j = nlohmann::json::parse(in);
    return config_from_json(j.contains("model") ? j.at("model") : j);
}

int exit_code_for(const std::vector<CellResult>& results) {
    int code = 0;
    for (const auto& r : results) {
        if (!r.failed) continue;
        std::cerr << "cell eta=" << r.eta << " seed=" << r.seed << " failed: " << r.error
                  << "\n";
        code = std::max(code, r.error_kind);
    }
    return code;
}

struct ModelFlags {
    // sentinel-based overrides applied on top of --config / defaults
    int latent_dim = -1, sub_dim = -1, epochs_pretrain = -1, epochs_joint = -1,
        batch = -1;
    double lambda1 = -1.0, lambda2 = -1.0, lr = -1.0;
    std::vector<int> hidden;
    std::string contrast_target;
    bool no_pretrain = false;
    bool trace_metrics = false;
    bool cross_view_negatives = false;
    bool freeze_encoder_on_predict = false;

    void apply(ModelConfig& cfg) const {
        if (latent_dim >= 0) cfg.latent_dim = latent_dim;
        if (sub_dim >= 0) cfg.sub_dim = sub_dim;
        if (epochs_pretrain >= 0) cfg.epochs_pretrain = epochs_pretrain;
        if (epochs_joint >= 0) cfg.epochs_joint = epochs_joint;
        if (batch >= 0) cfg.batch = batch;
        if (lambda1 >= 0.0) cfg.lambda1 = lambda1;
        if (lambda2 >= 0.0) cfg.lambda2 = lambda2;
        if (lr > 0.0) cfg.lr = lr;
        if (!hidden.empty()) cfg.encoder_hidden = hidden;
        if (!contrast_target.empty()) cfg.contrast_target = parse_target(contrast_target);
        if (no_pretrain) cfg.epochs_pretrain = 0;
        if (trace_metrics) cfg.trace_metrics = true;
        if (cross_view_negatives) cfg.cross_view_negatives = true;
        if (freeze_encoder_on_predict) cfg.stop_encoder_grad_on_predict = true;
    }
};

void add_model_flags(CLI::App* cmd, ModelFlags& flags) {
    cmd->add_option("--latent", flags.latent_dim, "Latent width D");
    cmd->add_option("--sub", flags.sub_dim, "Sub-vector width d0");
    cmd->add_option("--lambda1", flags.lambda1, "Consistency loss weight");
    cmd->add_option("--lambda2", flags.lambda2, "Prediction loss weight");
    cmd->add_option("--lr", flags.lr, "Adam learning rate");
    cmd->add_option("--epochs-pretrain", flags.epochs_pretrain, "Autoencoder warm-up epochs");
    cmd->add_option("--epochs-joint", flags.epochs_joint, "Joint training epochs");
    cmd->add_option("--batch", flags.batch, "Batch size (0 = full batch up to 5000 rows)");
    cmd->add_option("--hidden", flags.hidden, "Encoder hidden widths")->delimiter(',');
    cmd->add_option("--contrast-target", flags.contrast_target,
                    "Representation fed to the consistency loss: sub, full, both");
    cmd->add_flag("--no-pretrain", flags.no_pretrain, "Skip the warm-up stage");
    cmd->add_flag("--trace-metrics", flags.trace_metrics,
                  "Score the clustering every epoch (labeled data only)");
    cmd->add_flag("--cross-view-negatives", flags.cross_view_negatives,
                  "Also penalize cross-view inner products of non-matching samples");
    cmd->add_flag("--freeze-encoder-on-predict", flags.freeze_encoder_on_predict,
                  "Train only the predictor heads on the prediction loss");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Incomplete multi-view contrastive clustering pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_path, data_path, format_str = "csv", fusion_str =
        "concat_sub";
    std::uint64_t seed = 0;
    int threads = 1, k_override = 0;
    std::vector<double> etas;
    std::vector<std::uint64_t> seeds;

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled dataset");
    SynthParams sp;
    std::string synth_format = "csv";
    synth->add_option("--out", out_path, "Output stem")->required();
    synth->add_option("--n", sp.n, "Sample count");
    synth->add_option("--k", sp.k, "Cluster count");
    synth->add_option("--v", sp.views, "View count");
    synth->add_option("--sep", sp.sep, "Cluster separation");
    synth->add_option("--seed", sp.seed, "Generator seed");
    synth->add_option("--dim", sp.feature_dim, "Features per view");
    synth->add_option("--latent", sp.latent_dim, "Shared latent dimension");
    synth->add_option("--noise", sp.noise, "Within-cluster spread");
    synth->add_option("--format", synth_format, "csv or packed");

    // mask
    auto* mask_cmd = app.add_subcommand("mask", "Generate and persist an observation mask");
    std::size_t mask_n = 0, mask_v = 2;
    double mask_eta = 0.5;
    mask_cmd->add_option("--out", out_path, "Output CSV path")->required();
    mask_cmd->add_option("--n", mask_n, "Sample count")->required();
    mask_cmd->add_option("--v", mask_v, "View count");
    mask_cmd->add_option("--eta", mask_eta, "Missing rate in [0,1)");
    mask_cmd->add_option("--seed", seed, "Mask seed");

    // run
    auto* run = app.add_subcommand("run", "Missing-rate sweep: train, recover, cluster, score");
    ModelFlags run_flags;
    std::vector<double> grid_l1, grid_l2;
    run->add_option("--data", data_path, "Dataset stem")->required();
    run->add_option("--format", format_str, "csv or packed");
    run->add_option("--k", k_override, "Cluster count for unlabeled data");
    run->add_option("--out", out_path, "Output directory")->required();
    run->add_option("--eta", etas, "Missing rates")->delimiter(',');
    run->add_option("--seeds", seeds, "Run seeds")->delimiter(',');
    run->add_option("--seed", seed, "Single run seed (when --seeds is absent)");
    run->add_option("--config", config_path, "Model config JSON");
    run->add_option("--fusion", fusion_str, "concat_sub or concat_full");
    run->add_option("--threads", threads, "Parallel cells");
    run->add_option("--grid-lambda1", grid_l1, "Lambda1 grid values")->delimiter(',');
    run->add_option("--grid-lambda2", grid_l2, "Lambda2 grid values")->delimiter(',');
    add_model_flags(run, run_flags);

    // ablate
    auto* ablate = app.add_subcommand("ablate",
                                      "Loss-term and representation studies at fixed eta");
    ModelFlags ablate_flags;
    double ablate_eta = 0.5;
    ablate->add_option("--data", data_path, "Dataset stem")->required();
    ablate->add_option("--format", format_str, "csv or packed");
    ablate->add_option("--out", out_path, "Output directory")->required();
    ablate->add_option("--eta", ablate_eta, "Missing rate");
    ablate->add_option("--seeds", seeds, "Run seeds")->delimiter(',');
    ablate->add_option("--seed", seed, "Single run seed (when --seeds is absent)");
    ablate->add_option("--config", config_path, "Model config JSON");
    ablate->add_option("--threads", threads, "Parallel cells");
    add_model_flags(ablate, ablate_flags);

    // diagnose
    auto* diagnose = app.add_subcommand("diagnose",
                                        "Spectrum and convergence summaries for a run");
    std::string run_dir, baseline_dir;
    diagnose->add_option("--run", run_dir, "Completed run cell directory")->required();
    diagnose->add_option("--baseline", baseline_dir,
                         "Second run to compare sub-vector spectra against");
    diagnose->add_option("--out", out_path,
                         "Output directory (defaults to <run>/diagnostics)");

    // export-embeddings
    auto* exporte = app.add_subcommand("export-embeddings",
                                       "Recompute and export latents from a checkpoint");
    exporte->add_option("--run", run_dir, "Completed run cell directory")->required();
    exporte->add_option("--data", data_path, "Dataset stem (defaults to the recorded one)");
    exporte->add_option("--format", format_str, "csv or packed");
    exporte->add_option("--k", k_override, "Cluster count for unlabeled data");
    exporte->add_option("--out", out_path, "Output directory (defaults to <run>/embeddings)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth) {
            const auto ds = synth_dataset(sp);
            const auto stem = std::filesystem::path(out_path);
            if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
            save_dataset(ds, stem, parse_format(synth_format));
            std::cout << "wrote " << ds.view_count() << " views, n=" << ds.n()
                      << ", k=" << ds.k << " at " << out_path << "\n";
            return 0;
        }
        if (*mask_cmd) {
            const auto mask = generate_mask(mask_n, mask_v, mask_eta, seed);
            const auto path = std::filesystem::path(out_path);
            if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
            save_mask(mask, path);
            std::cout << "wrote mask with " << mask.complete_count() << "/" << mask.n()
                      << " complete rows\n";
            return 0;
        }
        if (*run) {
            ExperimentSpec spec;
            spec.dataset_stem = data_path;
            spec.format = parse_format(format_str);
            spec.k_override = k_override;
            spec.out_dir = out_path;
            spec.fusion = parse_fusion(fusion_str);
            spec.threads = threads;
            if (!etas.empty()) spec.etas = etas;
            spec.seeds = seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
            if (!config_path.empty()) spec.model = load_model_config(config_path);
            run_flags.apply(spec.model);

            if (!grid_l1.empty() || !grid_l2.empty()) {
                run_grid(spec, spec.etas.front(), grid_l1, grid_l2);
                std::cout << "grid surface written to " << (spec.out_dir / "grid.csv")
                          << "\n";
                return 0;
            }
            const auto results = run_experiment(spec);
            std::cout << "results written to " << (spec.out_dir / "results.csv") << "\n";
            return exit_code_for(results);
        }
        if (*ablate) {
            ExperimentSpec spec;
            spec.dataset_stem = data_path;
            spec.format = parse_format(format_str);
            spec.out_dir = out_path;
            spec.threads = threads;
            spec.seeds = seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
            if (!config_path.empty()) spec.model = load_model_config(config_path);
            ablate_flags.apply(spec.model);

            const auto results = run_ablation(spec, ablate_eta);
            std::cout << "ablation tables written to " << spec.out_dir << "\n";
            return exit_code_for(results);
        }
        if (*diagnose) {
            if (!baseline_dir.empty()) {
                std::cout << diagnose_compare(run_dir, baseline_dir) << "\n";
            } else {
                const auto summary = diagnose_run(run_dir, out_path);
                std::cout << "effective_rank_sub=" << summary.effective_rank_sub
                          << " effective_rank_full=" << summary.effective_rank_full
                          << " final_total=" << summary.final_total << "\n";
            }
            return 0;
        }
        if (*exporte) {
            const auto dir = std::filesystem::path(run_dir);
            std::ifstream cfg_in(dir / "config.json");
            if (!cfg_in) throw DataError("missing config.json in " + run_dir);
            const nlohmann::json cfg_json = nlohmann::json::parse(cfg_in);
            const ModelConfig cfg = config_from_json(cfg_json.at("model"));
            const std::string stem =
                data_path.empty() ? cfg_json.at("dataset").get<std::string>() : data_path;
            const DataFormat fmt = data_path.empty()
                                       ? parse_format(cfg_json.at("format").get<std::string>() ==
                                                              "packed"
                                                          ? "packed"
                                                          : "csv")
                                       : parse_format(format_str);

            MultiViewDataset ds = load_dataset(stem, fmt, k_override);
            ds = normalize_minmax(ds);
            const auto mask = load_mask(dir / "mask.csv");
            const auto models = load_checkpoint(dir / "checkpoint.bin");

            LatentBundle bundle =
                embed_with(models, static_cast<std::size_t>(cfg.sub_dim), ds, mask);
            bundle = recover_latents(models, std::move(bundle), mask);

            const auto out_dir =
                out_path.empty() ? dir / "embeddings" : std::filesystem::path(out_path);
            std::filesystem::create_directories(out_dir);
            export_embeddings(bundle, out_dir / "embeddings.csv");
            const auto fused = fuse(bundle, parse_fusion(
                                                cfg_json.value("fusion", "concat_sub")));
            export_fused(fused, out_dir / "fused.csv");
            // decoder view of every (observed or recovered) latent, for
            // external inspection of reconstructed missing views
            for (std::size_t v = 0; v < models.size(); ++v) {
                const Matrix xhat = nn::mlp_forward(models[v].decoder, bundle.z[v]);
                save_matrix_csv(xhat, out_dir / ("reconstructed.view" +
                                                 std::to_string(v + 1) + ".csv"));
            }
            std::cout << "embeddings written to " << out_dir << "\n";
            return 0;
        }
    } catch (const TrainingError& e) {
        std::cerr << "training failure: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "evaluation failure: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
