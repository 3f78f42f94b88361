#pragma once

#include <array>
#include <string>
#include <vector>

#include "most/data.hpp"
#include "most/encoder.hpp"
#include "most/probes.hpp"
#include "most/trainer.hpp"

namespace most {

/// Desk-scale knobs shared by the ablation table and the case study.
struct ExperimentScale {
    size_t w = 128;
    size_t windows_per_cell = 15;
    double noise_std = 0.1;
    size_t h = 32;
    size_t levels = 4;
    size_t epochs = 20;
    size_t batch_size = 8;
    double lr = 1e-3;
    double alpha = 0.5;
    size_t horizon = 8;  // forecast steps for probes and the mse objectives
    uint64_t seed = 7;
    Aggregator aggregator = Aggregator::Max;
    double train_frac = 0.6, valid_frac = 0.2;
};

struct SplitWindows {
    std::vector<TtsWindow> train, valid, test;
    std::vector<std::array<int, 2>> train_labels, valid_labels, test_labels;
};

/// Stratified per-cell split, deterministic in window order.
SplitWindows split_synthetic(const SyntheticData& data, double train_frac, double valid_frac);

/// Rebuild a labeled window set from the files cmd_synth wrote (the
/// concatenated tensor plus the label CSV).
SyntheticData load_synthetic_dir(const std::string& tensor_path, const std::string& labels_path,
                                 size_t w);

/// Frozen-encoder features of one split. Encodes the first w-horizon steps
/// of each window so forecast targets stay out of the encoder's input.
struct RepSet {
    Tensor pooled_v;   // (n, h)   max over time of V
    Tensor pooled_m1;  // (n, h/2) max over time of the mode-1 half
    Tensor pooled_m2;  // (n, h/2)
    Tensor last_v;     // (n, h)   last-timestamp V
    Tensor targets;    // (n, d1*d2*horizon)
    std::vector<int> labels9, labels_m1, labels_m2;
};

RepSet encode_split(const MostModel& model, const std::vector<TtsWindow>& windows,
                    const std::vector<std::array<int, 2>>& labels, size_t horizon);

/// The 12 ablation variants in report order.
const std::vector<std::string>& ablation_variant_ids();

struct VariantSetup {
    MostConfig model;
    TrainConfig train;
    bool crop_to_input = false;  // contrastive objectives train on the input part
};

/// Resolve a variant id ("full", "m1d", ..., "mse+contrastive") into model
/// and trainer configuration against a shared base scale.
VariantSetup variant_setup(const std::string& id, const ExperimentScale& scale, size_t d1, size_t d2);

struct AblationRow {
    std::string variant;
    bool ok = false;
    std::string error;
    Metrics forecast_metrics;
    Metrics classify_metrics;
    // Table-style formatting, e.g. "0.811 (-27.5%)"; baseline row has no delta
    std::string mse_cell, mae_cell, acc_cell;
};

struct AblationReport {
    std::vector<AblationRow> rows;
    std::string csv;    // machine-readable report
    std::string table;  // human-readable table
    int base_row = -1;  // index of the "full" row
};

AblationReport run_ablation(const SyntheticData& data, const ExperimentScale& scale,
                            const std::vector<std::string>& variants);

double percent_delta(double value, double base, bool higher_better);
std::string format_metric_with_delta(double value, double base, bool higher_better);

struct ProbeMatrix {
    double m1_from_v1 = 0, m1_from_v2 = 0, m2_from_v1 = 0, m2_from_v2 = 0;
};

struct CaseStudyResult {
    ProbeMatrix full;     // disentangled model
    double cd_m1_acc = 0;  // flattened baseline probed for the same labels
    double cd_m2_acc = 0;
    std::string svg_mode1, svg_mode2;
    size_t points_per_panel = 0;
    std::string csv;
    TrainReport report_full, report_cd;
};

/// Probe + figure stage against an already trained model (the cd comparison
/// is trained inside with the same scale and seed).
CaseStudyResult run_casestudy(const SyntheticData& data, const ExperimentScale& scale);
CaseStudyResult run_casestudy_with_model(MostModel& full_model, const SyntheticData& data,
                                         const ExperimentScale& scale);

/// Static scatter, one circle per row of xy, colored by label (0..2).
std::string render_scatter_svg(const Tensor& xy, const std::vector<int>& labels,
                               const std::string& title);

/// Results CSV row writer (header: dataset,variant,task,horizon,seed,metric,value,lambda).
std::string results_csv_header();
std::string results_csv_row(const std::string& dataset, const std::string& variant,
                            const std::string& task, size_t horizon, uint64_t seed,
                            const std::string& metric, double value, double lambda);

}  // namespace most
