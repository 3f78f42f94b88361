#include "most/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "most/errors.hpp"
#include "most/linalg.hpp"

namespace most {

SplitWindows split_synthetic(const SyntheticData& data, double train_frac, double valid_frac) {
    SplitWindows out;
    std::map<int, std::vector<size_t>> groups;
    for (size_t k = 0; k < data.windows.size(); ++k) groups[data.windows[k].label].push_back(k);
    for (auto& [label, idxs] : groups) {
        size_t n = idxs.size();
        size_t n_tr = static_cast<size_t>(std::llround(train_frac * static_cast<double>(n)));
        size_t n_va = static_cast<size_t>(std::llround(valid_frac * static_cast<double>(n)));
        n_tr = std::min(n_tr, n);
        n_va = std::min(n_va, n - n_tr);
        for (size_t k = 0; k < n; ++k) {
            size_t idx = idxs[k];
            if (k < n_tr) {
                out.train.push_back(data.windows[idx]);
                out.train_labels.push_back(data.mode_labels[idx]);
            } else if (k < n_tr + n_va) {
                out.valid.push_back(data.windows[idx]);
                out.valid_labels.push_back(data.mode_labels[idx]);
            } else {
                out.test.push_back(data.windows[idx]);
                out.test_labels.push_back(data.mode_labels[idx]);
            }
        }
    }
    return out;
}

SyntheticData load_synthetic_dir(const std::string& tensor_path, const std::string& labels_path,
                                 size_t w) {
    Tensor all = read_tensor_file(tensor_path);
    std::vector<std::array<int, 2>> labels = read_labels_csv(labels_path);
    if (all.dim(2) % w != 0 || all.dim(2) / w != labels.size()) {
        throw DataError("load_synthetic_dir: tensor length " + std::to_string(all.dim(2)) +
                        " does not hold " + std::to_string(labels.size()) + " windows of length " +
                        std::to_string(w));
    }
    SyntheticData data;
    size_t d1 = all.dim(0), d2 = all.dim(1);
    for (size_t k = 0; k < labels.size(); ++k) {
        TtsWindow win;
        win.values = Tensor({d1, d2, w});
        win.label = labels[k][0] * 3 + labels[k][1];
        win.sample_id = static_cast<int64_t>(k);
        for (size_t i = 0; i < d1; ++i)
            for (size_t j = 0; j < d2; ++j)
                for (size_t t = 0; t < w; ++t) win.values.at3(i, j, t) = all.at3(i, j, k * w + t);
        data.windows.push_back(std::move(win));
        data.mode_labels.push_back(labels[k]);
    }
    return data;
}

RepSet encode_split(const MostModel& model, const std::vector<TtsWindow>& windows,
                    const std::vector<std::array<int, 2>>& labels, size_t horizon) {
    RepSet out;
    size_t n = windows.size();
    if (n == 0) return out;
    size_t w = windows[0].w();
    if (horizon >= w) throw std::invalid_argument("encode_split: horizon >= window length");
    size_t input_len = w - horizon;
    size_t h = model.config.h, hd = model.config.h_half();
    size_t m = model.config.d1 * model.config.d2 * horizon;
    out.pooled_v = Tensor({n, h});
    out.pooled_m1 = Tensor({n, hd});
    out.pooled_m2 = Tensor({n, hd});
    out.last_v = Tensor({n, h});
    out.targets = Tensor({n, m});
    for (size_t k = 0; k < n; ++k) {
        TtsWindow input = crop_window(windows[k], 0, input_len);
        Representation rep = forward(model, input, 0);
        std::vector<double> pooled = max_pool_time(rep.v);
        std::vector<double> last = last_column(rep.v);
        for (size_t r = 0; r < h; ++r) {
            out.pooled_v(k, r) = pooled[r];
            out.last_v(k, r) = last[r];
        }
        for (size_t r = 0; r < hd; ++r) {
            out.pooled_m1(k, r) = pooled[r];
            out.pooled_m2(k, r) = pooled[hd + r];
        }
        if (horizon > 0) {
            size_t col = 0;
            for (size_t i = 0; i < windows[k].d1(); ++i)
                for (size_t j = 0; j < windows[k].d2(); ++j)
                    for (size_t s = 0; s < horizon; ++s)
                        out.targets(k, col++) = windows[k].values.at3(i, j, input_len + s);
        }
        if (!labels.empty()) {
            out.labels9.push_back(labels[k][0] * 3 + labels[k][1]);
            out.labels_m1.push_back(labels[k][0]);
            out.labels_m2.push_back(labels[k][1]);
        }
    }
    return out;
}

const std::vector<std::string>& ablation_variant_ids() {
    static const std::vector<std::string> ids = {
        "full", "m1d", "m2d", "random", "ci", "cd",
        "no-temporal-embedding", "no-causal-encoder",
        "no-instance-loss", "no-mode-loss", "mse", "mse+contrastive"};
    return ids;
}

VariantSetup variant_setup(const std::string& id, const ExperimentScale& scale, size_t d1,
                           size_t d2) {
    VariantSetup s;
    s.model.d1 = d1;
    s.model.d2 = d2;
    s.model.h = scale.h;
    s.model.levels = scale.levels;
    s.model.w_max = std::max<size_t>(512, scale.w);
    s.model.aggregator = scale.aggregator;
    s.model.seed = scale.seed;
    s.model.variant = Variant::Full;

    s.train.epochs = scale.epochs;
    s.train.batch_size = scale.batch_size;
    s.train.adam.lr = scale.lr;
    s.train.seed = scale.seed;
    s.train.loss.alpha = scale.alpha;
    s.train.objective = Objective::Contrastive;
    s.crop_to_input = true;

    if (id == "full") {
        // baseline
    } else if (id == "m1d" || id == "m2d" || id == "random" || id == "ci" || id == "cd" ||
               id == "no-temporal-embedding" || id == "no-causal-encoder") {
        s.model.variant = variant_from_string(id);
    } else if (id == "no-instance-loss") {
        s.train.loss.enable_instance = false;
    } else if (id == "no-mode-loss") {
        s.train.loss.enable_mode = false;
    } else if (id == "mse") {
        s.train.objective = Objective::Mse;
        s.train.horizon = scale.horizon;
        s.crop_to_input = false;
    } else if (id == "mse+contrastive") {
        s.train.objective = Objective::MseContrastive;
        s.train.horizon = scale.horizon;
        s.crop_to_input = false;
    } else {
        throw std::invalid_argument("unknown ablation variant '" + id + "'");
    }
    return s;
}

double percent_delta(double value, double base, bool higher_better) {
    if (base == 0.0) return 0.0;
    double d = higher_better ? (value - base) / base : (base - value) / base;
    return 100.0 * d;
}

std::string format_metric_with_delta(double value, double base, bool higher_better) {
    char buf[64];
    double d = percent_delta(value, base, higher_better);
    std::snprintf(buf, sizeof(buf), "%.3f (%+.1f%%)", value, d);
    // match the table convention: an exact zero delta prints as -0.0%
    if (d == 0.0) {
        std::snprintf(buf, sizeof(buf), "%.3f (-0.0%%)", value);
    }
    return buf;
}

namespace {

struct VariantOutcome {
    Metrics forecast_m, classify_m;
};

VariantOutcome evaluate_variant(const std::string& id, const SplitWindows& split,
                                const ExperimentScale& scale) {
    size_t d1 = split.train[0].d1(), d2 = split.train[0].d2();
    VariantSetup setup = variant_setup(id, scale, d1, d2);
    MostModel model = MostModel::init(setup.model);

    std::vector<TtsWindow> train_windows;
    if (setup.crop_to_input) {
        size_t input_len = scale.w - scale.horizon;
        for (const TtsWindow& win : split.train)
            train_windows.push_back(crop_window(win, 0, input_len));
    } else {
        train_windows = split.train;
    }
    train(model, train_windows, setup.train);

    RepSet tr = encode_split(model, split.train, split.train_labels, scale.horizon);
    RepSet va = encode_split(model, split.valid, split.valid_labels, scale.horizon);
    RepSet te = encode_split(model, split.test, split.test_labels, scale.horizon);

    VariantOutcome out;
    out.forecast_m = forecast(ForecastData{tr.last_v, tr.targets}, ForecastData{va.last_v, va.targets},
                              ForecastData{te.last_v, te.targets}, scale.horizon);
    out.classify_m = classify(LabeledData{tr.pooled_v, tr.labels9},
                              LabeledData{va.pooled_v, va.labels9},
                              LabeledData{te.pooled_v, te.labels9});
    return out;
}

}  // namespace

AblationReport run_ablation(const SyntheticData& data, const ExperimentScale& scale,
                            const std::vector<std::string>& variants) {
    if (scale.horizon >= scale.w) {
        throw ConfigError("run_ablation: horizon must be smaller than the window length");
    }
    SplitWindows split = split_synthetic(data, scale.train_frac, scale.valid_frac);
    if (split.train.empty() || split.test.empty()) {
        throw DataError("run_ablation: empty train or test split");
    }

    AblationReport report;
    for (const std::string& id : variants) {
        AblationRow row;
        row.variant = id;
        try {
            VariantOutcome out = evaluate_variant(id, split, scale);
            row.ok = true;
            row.forecast_metrics = out.forecast_m;
            row.classify_metrics = out.classify_m;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        if (row.ok && id == "full") report.base_row = static_cast<int>(report.rows.size());
        report.rows.push_back(std::move(row));
    }

    const AblationRow* base = report.base_row >= 0
                                  ? &report.rows[static_cast<size_t>(report.base_row)]
                                  : nullptr;
    for (AblationRow& row : report.rows) {
        if (!row.ok) continue;
        if (base != nullptr) {
            row.mse_cell = format_metric_with_delta(row.forecast_metrics.mse,
                                                    base->forecast_metrics.mse, false);
            row.mae_cell = format_metric_with_delta(row.forecast_metrics.mae,
                                                    base->forecast_metrics.mae, false);
            row.acc_cell = format_metric_with_delta(row.classify_metrics.acc,
                                                    base->classify_metrics.acc, true);
        } else {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.3f", row.forecast_metrics.mse);
            row.mse_cell = buf;
            std::snprintf(buf, sizeof(buf), "%.3f", row.forecast_metrics.mae);
            row.mae_cell = buf;
            std::snprintf(buf, sizeof(buf), "%.3f", row.classify_metrics.acc);
            row.acc_cell = buf;
        }
    }

    std::ostringstream csv;
    csv << "variant,status,mse,mae,acc,mse_delta_pct,mae_delta_pct,acc_delta_pct,lambda_forecast,"
           "lambda_classify\n";
    for (const AblationRow& row : report.rows) {
        if (!row.ok) {
            csv << row.variant << ",failed,,,,,,,,\n";
            continue;
        }
        char line[256];
        double dm = base ? percent_delta(row.forecast_metrics.mse, base->forecast_metrics.mse, false) : 0.0;
        double da = base ? percent_delta(row.forecast_metrics.mae, base->forecast_metrics.mae, false) : 0.0;
        double dc = base ? percent_delta(row.classify_metrics.acc, base->classify_metrics.acc, true) : 0.0;
        std::snprintf(line, sizeof(line), "%s,ok,%.6f,%.6f,%.6f,%.1f,%.1f,%.1f,%g,%g\n",
                      row.variant.c_str(), row.forecast_metrics.mse, row.forecast_metrics.mae,
                      row.classify_metrics.acc, dm, da, dc, row.forecast_metrics.lambda,
                      row.classify_metrics.lambda);
        csv << line;
    }
    report.csv = csv.str();

    std::ostringstream table;
    table << "variant                    MSE                 MAE                 Acc\n";
    for (const AblationRow& row : report.rows) {
        char line[256];
        if (row.ok) {
            std::snprintf(line, sizeof(line), "%-26s %-19s %-19s %-19s\n", row.variant.c_str(),
                          row.mse_cell.c_str(), row.mae_cell.c_str(), row.acc_cell.c_str());
        } else {
            std::snprintf(line, sizeof(line), "%-26s FAILED: %s\n", row.variant.c_str(),
                          row.error.c_str());
        }
        table << line;
    }
    report.table = table.str();
    return report;
}

namespace {

double probe_accuracy(const Tensor& tr_x, const std::vector<int>& tr_y, const Tensor& va_x,
                      const std::vector<int>& va_y, const Tensor& te_x,
                      const std::vector<int>& te_y) {
    return classify(LabeledData{tr_x, tr_y}, LabeledData{va_x, va_y}, LabeledData{te_x, te_y}).acc;
}

}  // namespace

CaseStudyResult run_casestudy_with_model(MostModel& full_model, const SyntheticData& data,
                                         const ExperimentScale& scale) {
    SplitWindows split = split_synthetic(data, scale.train_frac, scale.valid_frac);
    // no forecast targets needed here; encode full windows
    RepSet tr = encode_split(full_model, split.train, split.train_labels, 0);
    RepSet va = encode_split(full_model, split.valid, split.valid_labels, 0);
    RepSet te = encode_split(full_model, split.test, split.test_labels, 0);

    CaseStudyResult out;
    out.full.m1_from_v1 = probe_accuracy(tr.pooled_m1, tr.labels_m1, va.pooled_m1, va.labels_m1,
                                         te.pooled_m1, te.labels_m1);
    out.full.m1_from_v2 = probe_accuracy(tr.pooled_m2, tr.labels_m1, va.pooled_m2, va.labels_m1,
                                         te.pooled_m2, te.labels_m1);
    out.full.m2_from_v1 = probe_accuracy(tr.pooled_m1, tr.labels_m2, va.pooled_m1, va.labels_m2,
                                         te.pooled_m1, te.labels_m2);
    out.full.m2_from_v2 = probe_accuracy(tr.pooled_m2, tr.labels_m2, va.pooled_m2, va.labels_m2,
                                         te.pooled_m2, te.labels_m2);

    // flattened baseline, trained with the same scale and seeds
    VariantSetup cd_setup = variant_setup("cd", scale, full_model.config.d1, full_model.config.d2);
    MostModel cd_model = MostModel::init(cd_setup.model);
    {
        std::vector<TtsWindow> train_windows;
        size_t input_len = scale.w - scale.horizon;
        for (const TtsWindow& win : split.train)
            train_windows.push_back(crop_window(win, 0, input_len));
        out.report_cd = train(cd_model, train_windows, cd_setup.train);
    }
    RepSet cd_tr = encode_split(cd_model, split.train, split.train_labels, 0);
    RepSet cd_va = encode_split(cd_model, split.valid, split.valid_labels, 0);
    RepSet cd_te = encode_split(cd_model, split.test, split.test_labels, 0);
    out.cd_m1_acc = probe_accuracy(cd_tr.pooled_m1, cd_tr.labels_m1, cd_va.pooled_m1,
                                   cd_va.labels_m1, cd_te.pooled_m1, cd_te.labels_m1);
    out.cd_m2_acc = probe_accuracy(cd_tr.pooled_m2, cd_tr.labels_m2, cd_va.pooled_m2,
                                   cd_va.labels_m2, cd_te.pooled_m2, cd_te.labels_m2);

    // 2-D projections over every window, colored by the mode's label
    std::vector<const RepSet*> sets = {&tr, &va, &te};
    size_t total = 0;
    for (const RepSet* s : sets) total += s->labels_m1.size();
    Tensor all_m1({total, full_model.config.h_half()}), all_m2({total, full_model.config.h_half()});
    std::vector<int> lab_m1, lab_m2;
    size_t row = 0;
    for (const RepSet* s : sets) {
        for (size_t k = 0; k < s->labels_m1.size(); ++k, ++row) {
            for (size_t c = 0; c < full_model.config.h_half(); ++c) {
                all_m1(row, c) = s->pooled_m1(k, c);
                all_m2(row, c) = s->pooled_m2(k, c);
            }
            lab_m1.push_back(s->labels_m1[k]);
            lab_m2.push_back(s->labels_m2[k]);
        }
    }
    out.points_per_panel = total;
    out.svg_mode1 = render_scatter_svg(pca_project_2d(all_m1), lab_m1, "mode-1 representation");
    out.svg_mode2 = render_scatter_svg(pca_project_2d(all_m2), lab_m2, "mode-2 representation");

    std::ostringstream csv;
    csv << "target,source,accuracy\n";
    char line[96];
    std::snprintf(line, sizeof(line), "mode1_label,v_mode1,%.6f\n", out.full.m1_from_v1);
    csv << line;
    std::snprintf(line, sizeof(line), "mode1_label,v_mode2,%.6f\n", out.full.m1_from_v2);
    csv << line;
    std::snprintf(line, sizeof(line), "mode2_label,v_mode1,%.6f\n", out.full.m2_from_v1);
    csv << line;
    std::snprintf(line, sizeof(line), "mode2_label,v_mode2,%.6f\n", out.full.m2_from_v2);
    csv << line;
    std::snprintf(line, sizeof(line), "mode1_label,cd_flattened,%.6f\n", out.cd_m1_acc);
    csv << line;
    std::snprintf(line, sizeof(line), "mode2_label,cd_flattened,%.6f\n", out.cd_m2_acc);
    csv << line;
    out.csv = csv.str();
    return out;
}

CaseStudyResult run_casestudy(const SyntheticData& data, const ExperimentScale& scale) {
    if (data.windows.empty()) throw DataError("run_casestudy: empty dataset");
    if (scale.horizon >= scale.w) {
        throw ConfigError("run_casestudy: horizon must be smaller than the window length");
    }
    SplitWindows split = split_synthetic(data, scale.train_frac, scale.valid_frac);
    VariantSetup setup = variant_setup("full", scale, data.windows[0].d1(), data.windows[0].d2());
    MostModel model = MostModel::init(setup.model);
    std::vector<TtsWindow> train_windows;
    size_t input_len = scale.w - scale.horizon;
    for (const TtsWindow& win : split.train) train_windows.push_back(crop_window(win, 0, input_len));
    TrainReport report = train(model, train_windows, setup.train);
    CaseStudyResult out = run_casestudy_with_model(model, data, scale);
    out.report_full = std::move(report);
    return out;
}

std::string render_scatter_svg(const Tensor& xy, const std::vector<int>& labels,
                               const std::string& title) {
    if (xy.rows() != labels.size()) {
        throw std::invalid_argument("render_scatter_svg: " + std::to_string(xy.rows()) +
                                    " points vs " + std::to_string(labels.size()) + " labels");
    }
    static const char* colors[3] = {"#1f77b4", "#ff7f0e", "#2ca02c"};
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (size_t r = 0; r < xy.rows(); ++r) {
        xmin = std::min(xmin, xy(r, 0));
        xmax = std::max(xmax, xy(r, 0));
        ymin = std::min(ymin, xy(r, 1));
        ymax = std::max(ymax, xy(r, 1));
    }
    double xspan = std::max(xmax - xmin, 1e-12), yspan = std::max(ymax - ymin, 1e-12);
    const double size = 480.0, lo = 40.0, hi = 440.0;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" "
           "viewBox=\"0 0 480 480\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"480\" height=\"480\" fill=\"white\"/>\n";
    svg << "<text x=\"240\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"14\">"
        << title << "</text>\n";
    for (size_t r = 0; r < xy.rows(); ++r) {
        double px = lo + (hi - lo) * (xy(r, 0) - xmin) / xspan;
        double py = size - (lo + (hi - lo) * (xy(r, 1) - ymin) / yspan);
        int lab = labels[r] >= 0 && labels[r] < 3 ? labels[r] : 0;
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\" fill-opacity=\"0.8\"/>\n",
                      px, py, colors[lab]);
        svg << buf;
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string results_csv_header() {
    return "dataset,variant,task,horizon,seed,metric,value,lambda\n";
}

std::string results_csv_row(const std::string& dataset, const std::string& variant,
                            const std::string& task, size_t horizon, uint64_t seed,
                            const std::string& metric, double value, double lambda) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%zu,%llu,%s,%.6f,%g\n", dataset.c_str(),
                  variant.c_str(), task.c_str(), horizon,
                  static_cast<unsigned long long>(seed), metric.c_str(), value, lambda);
    return buf;
}

}  // namespace most
