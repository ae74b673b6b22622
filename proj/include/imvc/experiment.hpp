#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "imvc/cluster.hpp"
#include "imvc/data.hpp"
#include "imvc/metrics.hpp"
#include "imvc/model.hpp"
#include "imvc/recover.hpp"
#include "imvc/train.hpp"

namespace imvc {

// Gaussian clusters in a shared latent space pushed through per-view random
// nonlinear maps.
struct SynthParams {
    std::size_t n = 300;
    int k = 3;
    std::size_t views = 2;
    double sep = 5.0;
    std::uint64_t seed = 0;
    std::size_t feature_dim = 16;
    std::size_t latent_dim = 4;
    double noise = 1.0; // within-cluster latent spread
};

MultiViewDataset synth_dataset(const SynthParams& params);

struct ExperimentSpec {
    std::filesystem::path dataset_stem;
    DataFormat format = DataFormat::csv_per_view;
    int k_override = 0;
    std::vector<double> etas = {0.1, 0.3, 0.5, 0.7};
    std::vector<std::uint64_t> seeds = {0};
    ModelConfig model;
    FusionMode fusion = FusionMode::concat_sub;
    int kmeans_restarts = 10;
    std::filesystem::path out_dir;
    int threads = 1;

    void validate() const;
};

struct CellResult {
    double eta = 0.0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    int error_kind = 0; // 2 = bad spec/data, 3 = training failure, 4 = evaluation failure
    ClusterReport report;
    LossParts losses;
    double total_loss = 0.0;
};

// One (eta, seed) pipeline run: mask, two-stage training, recovery, fusion,
// k-means, scores, diagnostics. Writes config.json, mask.csv, trace.csv,
// checkpoint.bin, embeddings/ and result.json under cell_dir.
CellResult run_cell(const MultiViewDataset& normalized, const ExperimentSpec& spec,
                    double eta, std::uint64_t seed,
                    const std::filesystem::path& cell_dir);

// Full sweep over spec.etas x spec.seeds; cells may run in parallel.
// Aggregates seed means per eta into <out>/results.csv (percent, two
// decimals) and returns every cell result in (eta, seed) order.
std::vector<CellResult> run_experiment(const ExperimentSpec& spec);

// Loss-term study (every on/off combination keeping at least one term) and
// representation study (consistency on full latents, both, sub-vectors), at
// a fixed missing rate. Writes ablation_loss.csv and ablation_repr.csv.
std::vector<CellResult> run_ablation(const ExperimentSpec& spec, double eta);

// lambda1 x lambda2 surface at a fixed missing rate; writes grid.csv.
void run_grid(const ExperimentSpec& spec, double eta,
              const std::vector<double>& lambda1_values,
              const std::vector<double>& lambda2_values);

struct DiagnoseSummary {
    double effective_rank_sub = 0.0;
    double effective_rank_full = 0.0;
    double final_total = 0.0;
};

// Post-run diagnostics from a completed cell directory: singular spectra of
// the full and sub-vector embeddings plus trace statistics, written under
// <run_dir>/diagnostics (or out_dir when given). With a baseline directory,
// also reports which run kept the higher-dimensional sub-vector spectrum.
DiagnoseSummary diagnose_run(const std::filesystem::path& run_dir,
                             const std::filesystem::path& out_dir = {});
std::string diagnose_compare(const std::filesystem::path& run_dir,
                             const std::filesystem::path& baseline_dir);

// FNV-1a over the file bytes, hex string.
std::string file_hash(const std::filesystem::path& path);
std::string dataset_hash(const std::filesystem::path& stem, DataFormat format);

std::string format_percent(double fraction);

} // namespace imvc
