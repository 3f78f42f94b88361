#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "most/data.hpp"
#include "most/encoder.hpp"
#include "most/errors.hpp"
#include "most/harness.hpp"
#include "most/manifest.hpp"
#include "most/linalg.hpp"
#include "most/probes.hpp"
#include "most/trainer.hpp"

namespace fs = std::filesystem;
using namespace most;

namespace {

// exit codes: 1 unexpected, 2 config/usage, 3 data, 4 training, 5 I/O
constexpr int kExitother = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitTrain = 4;
constexpr int kExitIo = 5;

struct GlobalArgs {
    std::string config_path;
    std::string out_dir;
    uint64_t seed = 7;
    std::map<std::string, std::string> file_cfg;
};

// config-file fallback: command-line flags win, then the config file, then
// the built-in default already sitting in the variable
template <typename T>
void cfg_fill(const GlobalArgs& g, const CLI::Option* opt, const std::string& key, T& var) {
    if (opt != nullptr && opt->count() > 0) return;
    auto it = g.file_cfg.find(key);
    if (it == g.file_cfg.end()) return;
    if constexpr (std::is_same_v<T, std::string>) {
        var = it->second;
    } else if constexpr (std::is_same_v<T, double>) {
        var = std::stod(it->second);
    } else if constexpr (std::is_same_v<T, bool>) {
        var = it->second == "true" || it->second == "1" || it->second == "yes";
    } else {
        var = static_cast<T>(std::stoull(it->second));
    }
}

std::string default_run_dir(const std::string& command, uint64_t seed) {
    auto now = std::chrono::system_clock::now();
    std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", std::localtime(&tt));
    std::string tag = sha1_hex(command + "-" + std::to_string(seed)).substr(0, 8);
    return "runs/" + std::string(stamp) + "-" + tag;
}

fs::path prepare_out_dir(GlobalArgs& g, const std::string& command) {
    fs::path dir = g.out_dir.empty() ? default_run_dir(command, g.seed) : g.out_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    fs::create_directories(dir / "reports", ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    if (!fs::is_directory(dir)) throw IoError("output path is not a directory: " + dir.string());
    return dir;
}

void add_input_hash(RunManifest& m, const std::string& path) {
    m.inputs[path] = git_blob_hash_file(path);
}

struct DatasetArgs {
    std::string data_path;
    std::string labels_path;
    std::string layout = "binary";
    size_t window = 128;
    size_t stride = 0;
    std::string split = "time";
    double train_frac = 0.6, valid_frac = 0.2;

    DatasetSpec to_spec() const {
        DatasetSpec spec;
        spec.path = data_path;
        spec.labels_path = labels_path;
        if (layout == "binary") {
            spec.layout = Layout::BinaryTensor;
        } else if (layout == "csv-long") {
            spec.layout = Layout::CsvLong;
        } else {
            throw ConfigError("unknown layout '" + layout + "' (binary | csv-long)");
        }
        spec.window = window;
        spec.stride = stride;
        if (split == "time") {
            spec.split_by_samples = false;
        } else if (split == "samples") {
            spec.split_by_samples = true;
        } else {
            throw ConfigError("unknown split '" + split + "' (time | samples)");
        }
        spec.train_frac = train_frac;
        spec.valid_frac = valid_frac;
        spec.test_frac = 1.0 - train_frac - valid_frac;
        return spec;
    }

    void register_options(CLI::App* cmd, bool data_required = true) {
        auto* o = cmd->add_option("--data", data_path, "input tensor file");
        if (data_required) o->required();
        cmd->add_option("--labels", labels_path, "window label CSV (sample splits)");
        cmd->add_option("--layout", layout, "binary | csv-long");
        cmd->add_option("--window", window, "window length");
        cmd->add_option("--stride", stride, "window stride (0 = window)");
        cmd->add_option("--split", split, "time | samples");
        cmd->add_option("--train-frac", train_frac, "train fraction");
        cmd->add_option("--valid-frac", valid_frac, "validation fraction");
    }
};

struct ModelArgs {
    size_t h = 64;
    size_t levels = 7;
    size_t w_max = 512;
    std::string aggregator = "max";
    std::string activation = "gelu";
    std::string variant = "full";

    void register_options(CLI::App* cmd) {
        cmd->add_option("--hdim", h, "latent dimension (even)");
        cmd->add_option("--levels", levels, "extra conv blocks L (kernels 2^0..2^L)");
        cmd->add_option("--w-max", w_max, "temporal embedding width");
        cmd->add_option("--aggregator", aggregator, "mean | max");
        cmd->add_option("--activation", activation, "gelu | none");
        cmd->add_option("--variant", variant, "encoder variant");
    }

    MostConfig to_config(size_t d1, size_t d2, uint64_t seed) const {
        MostConfig cfg;
        cfg.d1 = d1;
        cfg.d2 = d2;
        cfg.h = h;
        cfg.levels = levels;
        cfg.w_max = w_max;
        cfg.aggregator = aggregator_from_string(aggregator);
        cfg.activation = activation_from_string(activation);
        cfg.variant = variant_from_string(variant);
        cfg.seed = seed;
        return cfg;
    }
};

struct TrainArgs {
    size_t epochs = 20;
    size_t batch = 8;
    double lr = 1e-3;
    double weight_decay = 0.0;
    double alpha = 0.5;
    std::string objective = "contrastive";
    size_t horizon = 0;
    size_t min_overlap = 0;
    size_t checkpoint_every = 0;
    bool no_instance = false, no_mode = false;

    void register_options(CLI::App* cmd) {
        cmd->add_option("--epochs", epochs, "training epochs");
        cmd->add_option("--batch", batch, "batch size");
        cmd->add_option("--lr", lr, "learning rate");
        cmd->add_option("--weight-decay", weight_decay, "L2 weight decay");
        cmd->add_option("--alpha", alpha, "mode loss weight");
        cmd->add_option("--objective", objective, "contrastive | mse | mse+contrastive");
        cmd->add_option("--horizon", horizon, "forecast horizon for mse objectives");
        cmd->add_option("--min-overlap", min_overlap, "crop overlap floor (0 = w/8)");
        cmd->add_option("--checkpoint-every", checkpoint_every, "epochs between snapshots");
        cmd->add_flag("--no-instance-loss", no_instance, "disable the instance loss");
        cmd->add_flag("--no-mode-loss", no_mode, "disable the mode loss");
    }

    TrainConfig to_config(uint64_t seed, const std::string& ckpt_dir) const {
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = batch;
        cfg.adam.lr = lr;
        cfg.adam.weight_decay = weight_decay;
        cfg.seed = seed;
        cfg.loss.alpha = alpha;
        cfg.loss.enable_instance = !no_instance;
        cfg.loss.enable_mode = !no_mode;
        cfg.objective = objective_from_string(objective);
        cfg.horizon = horizon;
        cfg.min_overlap = min_overlap;
        cfg.checkpoint_every = checkpoint_every;
        cfg.checkpoint_dir = ckpt_dir;
        return cfg;
    }
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string());
    os << text;
}

// ---- commands -------------------------------------------------------------------

int run_synth(GlobalArgs& g, const SyntheticSpec& spec_in) {
    SyntheticSpec spec = spec_in;
    spec.seed = g.seed;
    fs::path out = prepare_out_dir(g, "synth");
    SyntheticData data = generate_synthetic(spec);

    size_t n = data.windows.size();
    Tensor all({3, 3, n * spec.w});
    for (size_t k = 0; k < n; ++k)
        for (size_t i = 0; i < 3; ++i)
            for (size_t j = 0; j < 3; ++j)
                for (size_t t = 0; t < spec.w; ++t)
                    all.at3(i, j, k * spec.w + t) = data.windows[k].values.at3(i, j, t);
    write_tensor_file((out / "data.most").string(), all);
    write_labels_csv((out / "labels.csv").string(), data.mode_labels);

    RunManifest m;
    m.command = "synth";
    m.seed = g.seed;
    m.config["synth.w"] = std::to_string(spec.w);
    m.config["synth.per_cell"] = std::to_string(spec.windows_per_cell);
    m.config["synth.noise"] = std::to_string(spec.noise_std);
    m.outputs = {"data.most", "labels.csv"};
    m.write((out / "manifest.json").string());
    std::cout << "wrote " << n << " windows (" << 3 << "x" << 3 << "x" << spec.w << ") to "
              << out.string() << "\n";
    return 0;
}

int run_ingest(GlobalArgs& g, DatasetArgs& d) {
    fs::path out = prepare_out_dir(g, "ingest");
    IngestResult res = ingest(d.to_spec());
    write_tensor_file((out / "normalized.most").string(), res.series);
    std::ostringstream stats;
    stats << "mode1_id,mode2_id,mean,std\n";
    for (size_t i = 0; i < res.d1; ++i)
        for (size_t j = 0; j < res.d2; ++j) {
            char line[96];
            std::snprintf(line, sizeof(line), "%zu,%zu,%.10g,%.10g\n", i, j, res.stats.mean(i, j),
                          res.stats.stdev(i, j));
            stats << line;
        }
    write_text(out / "reports" / "normalization_stats.csv", stats.str());

    RunManifest m;
    m.command = "ingest";
    m.seed = g.seed;
    add_input_hash(m, d.data_path);
    if (!d.labels_path.empty()) add_input_hash(m, d.labels_path);
    m.config["data.window"] = std::to_string(d.window);
    m.config["data.stride"] = std::to_string(d.stride);
    m.config["data.split"] = d.split;
    m.outputs = {"normalized.most", "reports/normalization_stats.csv"};
    m.write((out / "manifest.json").string());
    std::cout << "ingested " << res.d1 << "x" << res.d2 << "x" << res.total_time << ": "
              << res.train.size() << " train / " << res.valid.size() << " valid / "
              << res.test.size() << " test windows\n";
    return 0;
}

int run_train(GlobalArgs& g, DatasetArgs& d, ModelArgs& ma, TrainArgs& ta) {
    fs::path out = prepare_out_dir(g, "train");
    IngestResult res = ingest(d.to_spec());
    if (res.train.empty()) throw DataError("train: no training windows");
    MostConfig mcfg = ma.to_config(res.d1, res.d2, g.seed);
    MostModel model = MostModel::init(mcfg);
    TrainConfig tcfg = ta.to_config(g.seed, (out / "checkpoints").string());
    TrainReport report = train(model, res.train, tcfg);
    write_train_report_csv((out / "reports" / "train_report.csv").string(), report);

    RunManifest m;
    m.command = "train";
    m.seed = g.seed;
    add_input_hash(m, d.data_path);
    if (!d.labels_path.empty()) add_input_hash(m, d.labels_path);
    m.config["model.h"] = std::to_string(mcfg.h);
    m.config["model.levels"] = std::to_string(mcfg.levels);
    m.config["model.w_max"] = std::to_string(mcfg.w_max);
    m.config["model.aggregator"] = to_string(mcfg.aggregator);
    m.config["model.activation"] = to_string(mcfg.activation);
    m.config["model.variant"] = to_string(mcfg.variant);
    m.config["train.epochs"] = std::to_string(tcfg.epochs);
    m.config["train.batch"] = std::to_string(tcfg.batch_size);
    m.config["train.lr"] = std::to_string(tcfg.adam.lr);
    m.config["train.alpha"] = std::to_string(tcfg.loss.alpha);
    m.config["train.objective"] = to_string(tcfg.objective);
    m.config["train.horizon"] = std::to_string(tcfg.horizon);
    m.config["data.window"] = std::to_string(d.window);
    m.config["data.stride"] = std::to_string(d.stride);
    m.config["data.split"] = d.split;
    m.outputs = {"checkpoints/final.ckpt", "reports/train_report.csv"};
    m.write((out / "manifest.json").string());
    double final_loss = report.epochs.empty() ? 0.0 : report.epochs.back().total;
    std::cout << "trained " << tcfg.epochs << " epochs, final loss " << final_loss
              << ", checkpoint " << report.final_checkpoint << "\n";
    return 0;
}

int run_encode(GlobalArgs& g, DatasetArgs& d, const std::string& ckpt) {
    fs::path out = prepare_out_dir(g, "encode");
    fs::create_directories(out / "reps");
    MostModel model = load_checkpoint(ckpt);
    IngestResult res = ingest(d.to_spec());
    std::vector<const std::vector<TtsWindow>*> splits = {&res.train, &res.valid, &res.test};
    size_t n = res.train.size() + res.valid.size() + res.test.size();
    if (n == 0) throw DataError("encode: no windows");
    Tensor reps({n, model.config.h, d.window});
    size_t k = 0;
    for (const auto* split : splits) {
        for (const TtsWindow& win : *split) {
            Representation rep = forward(model, win, 0);
            for (size_t r = 0; r < model.config.h; ++r)
                for (size_t t = 0; t < d.window; ++t) reps.at3(k, r, t) = rep.v(r, t);
            ++k;
        }
    }
    write_tensor_file((out / "reps" / "reps.most").string(), reps);

    RunManifest m;
    m.command = "encode";
    m.seed = g.seed;
    add_input_hash(m, d.data_path);
    add_input_hash(m, ckpt);
    m.config["data.window"] = std::to_string(d.window);
    m.outputs = {"reps/reps.most"};
    m.write((out / "manifest.json").string());
    std::cout << "encoded " << n << " windows to reps/reps.most (" << n << "," << model.config.h
              << "," << d.window << ")\n";
    return 0;
}

int run_probe(GlobalArgs& g, DatasetArgs& d, const std::string& ckpt, const std::string& task,
              size_t horizon, const std::string& dataset_name) {
    fs::path out = prepare_out_dir(g, "probe");
    MostModel model = load_checkpoint(ckpt);
    uint64_t before = params_fingerprint(model);
    IngestResult res = ingest(d.to_spec());

    auto to_mode_labels = [](const std::vector<TtsWindow>& wins) {
        std::vector<std::array<int, 2>> labels;
        for (const TtsWindow& w : wins) {
            if (w.label < 0) throw DataError("probe: classification requires labeled windows");
            labels.push_back({w.label / 3, w.label % 3});
        }
        return labels;
    };

    std::ostringstream csv;
    csv << results_csv_header();
    std::string variant = to_string(model.config.variant);
    if (task == "classification") {
        auto tr_l = to_mode_labels(res.train), va_l = to_mode_labels(res.valid),
             te_l = to_mode_labels(res.test);
        RepSet tr = encode_split(model, res.train, tr_l, 0);
        RepSet va = encode_split(model, res.valid, va_l, 0);
        RepSet te = encode_split(model, res.test, te_l, 0);
        Metrics m = classify(LabeledData{tr.pooled_v, tr.labels9},
                             LabeledData{va.pooled_v, va.labels9},
                             LabeledData{te.pooled_v, te.labels9});
        csv << results_csv_row(dataset_name, variant, "classification", 0, g.seed, "acc", m.acc,
                               m.lambda);
    } else if (task == "forecasting") {
        if (horizon < 1) throw ConfigError("probe: forecasting requires --horizon >= 1");
        RepSet tr = encode_split(model, res.train, {}, horizon);
        RepSet va = encode_split(model, res.valid, {}, horizon);
        RepSet te = encode_split(model, res.test, {}, horizon);
        Metrics m = forecast(ForecastData{tr.last_v, tr.targets}, ForecastData{va.last_v, va.targets},
                             ForecastData{te.last_v, te.targets}, horizon);
        csv << results_csv_row(dataset_name, variant, "forecasting", horizon, g.seed, "mse", m.mse,
                               m.lambda);
        csv << results_csv_row(dataset_name, variant, "forecasting", horizon, g.seed, "mae", m.mae,
                               m.lambda);
        // raw-scale metrics: undo the per-variable z-scoring on the errors
        {
            RidgeSolution sol = ridge_fit(tr.last_v, tr.targets, m.lambda);
            Tensor pred = ridge_predict(sol, te.last_v);
            Tensor truth = te.targets;
            for (size_t r = 0; r < pred.rows(); ++r) {
                for (size_t c = 0; c < pred.cols(); ++c) {
                    size_t var = c / horizon;
                    double sigma = res.stats.stdev.data[var];
                    pred(r, c) *= sigma;
                    truth(r, c) *= sigma;
                }
            }
            Metrics raw = regression_metrics(pred, truth, horizon);
            csv << results_csv_row(dataset_name, variant, "forecasting", horizon, g.seed,
                                   "mse_raw", raw.mse, m.lambda);
            csv << results_csv_row(dataset_name, variant, "forecasting", horizon, g.seed,
                                   "mae_raw", raw.mae, m.lambda);
        }
    } else {
        throw ConfigError("probe: unknown task '" + task + "' (classification | forecasting)");
    }
    if (params_fingerprint(model) != before) {
        throw TrainError("probe: encoder parameters changed during probing");
    }
    write_text(out / "reports" / "results.csv", csv.str());

    RunManifest m;
    m.command = "probe";
    m.seed = g.seed;
    add_input_hash(m, d.data_path);
    add_input_hash(m, ckpt);
    m.config["probe.task"] = task;
    m.config["probe.horizon"] = std::to_string(horizon);
    m.outputs = {"reports/results.csv"};
    m.write((out / "manifest.json").string());
    std::cout << csv.str();
    return 0;
}

int run_ablate(GlobalArgs& g, const std::string& data_path, const std::string& labels_path,
               ExperimentScale& scale, std::vector<std::string>& variants,
               std::vector<double>& alphas) {
    fs::path out = prepare_out_dir(g, "ablate");
    scale.seed = g.seed;
    SyntheticData data = load_synthetic_dir(data_path, labels_path, scale.w);
    if (variants.empty()) variants = ablation_variant_ids();
    if (alphas.empty()) alphas = {0.5};
    AblationReport report;
    for (double alpha : alphas) {
        scale.alpha = alpha;
        report = run_ablation(data, scale, variants);
        if (alphas.size() == 1) {
            write_text(out / "reports" / "ablation.csv", report.csv);
            write_text(out / "reports" / "ablation.txt", report.table);
        } else {
            char tag[32];
            std::snprintf(tag, sizeof(tag), "alpha_%g", alpha);
            write_text(out / "reports" / ("ablation_" + std::string(tag) + ".csv"), report.csv);
            write_text(out / "reports" / ("ablation_" + std::string(tag) + ".txt"), report.table);
            std::cout << "alpha = " << alpha << "\n" << report.table << "\n";
        }
    }

    RunManifest m;
    m.command = "ablate";
    m.seed = g.seed;
    add_input_hash(m, data_path);
    add_input_hash(m, labels_path);
    m.config["scale.w"] = std::to_string(scale.w);
    m.config["scale.h"] = std::to_string(scale.h);
    m.config["scale.levels"] = std::to_string(scale.levels);
    m.config["scale.epochs"] = std::to_string(scale.epochs);
    m.config["scale.horizon"] = std::to_string(scale.horizon);
    {
        std::ostringstream as;
        for (size_t i = 0; i < alphas.size(); ++i) as << (i ? " " : "") << alphas[i];
        m.config["scale.alphas"] = as.str();
    }
    if (alphas.size() == 1) {
        m.outputs = {"reports/ablation.csv", "reports/ablation.txt"};
    } else {
        for (double alpha : alphas) {
            char tag[32];
            std::snprintf(tag, sizeof(tag), "alpha_%g", alpha);
            m.outputs.push_back("reports/ablation_" + std::string(tag) + ".csv");
            m.outputs.push_back("reports/ablation_" + std::string(tag) + ".txt");
        }
    }
    m.write((out / "manifest.json").string());
    if (alphas.size() == 1) std::cout << report.table;
    return 0;
}

int run_casestudy(GlobalArgs& g, const std::string& data_path, const std::string& labels_path,
                  ExperimentScale& scale, const std::string& ckpt) {
    fs::path out = prepare_out_dir(g, "casestudy");
    scale.seed = g.seed;
    SyntheticData data = load_synthetic_dir(data_path, labels_path, scale.w);
    CaseStudyResult result;
    if (!ckpt.empty()) {
        MostModel model = load_checkpoint(ckpt);
        result = run_casestudy_with_model(model, data, scale);
    } else {
        result = run_casestudy(data, scale);
    }
    write_text(out / "reports" / "casestudy.csv", result.csv);
    write_text(out / "reports" / "casestudy_mode1.svg", result.svg_mode1);
    write_text(out / "reports" / "casestudy_mode2.svg", result.svg_mode2);

    RunManifest m;
    m.command = "casestudy";
    m.seed = g.seed;
    add_input_hash(m, data_path);
    add_input_hash(m, labels_path);
    if (!ckpt.empty()) add_input_hash(m, ckpt);
    m.config["scale.w"] = std::to_string(scale.w);
    m.config["scale.h"] = std::to_string(scale.h);
    m.config["scale.epochs"] = std::to_string(scale.epochs);
    m.outputs = {"reports/casestudy.csv", "reports/casestudy_mode1.svg",
                 "reports/casestudy_mode2.svg"};
    m.write((out / "manifest.json").string());
    std::cout << result.csv;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"most - disentangled mode-specific representations for tensor time series"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "key=value config file")->expected(1);
    auto* seed_opt = app.add_option("--seed", g.seed, "global random seed");
    app.add_option("--out", g.out_dir, "output directory (default runs/<stamp>-<hash>)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate the labeled synthetic dataset");
    SyntheticSpec synth_spec;
    auto* synth_w = synth->add_option("--w", synth_spec.w, "window length");
    auto* synth_pc = synth->add_option("--per-cell", synth_spec.windows_per_cell, "windows per label cell");
    auto* synth_noise = synth->add_option("--noise", synth_spec.noise_std, "additive noise std");

    // ingest
    auto* ing = app.add_subcommand("ingest", "validate, normalize and window a dataset");
    DatasetArgs ing_data;
    ing_data.register_options(ing);

    // train
    auto* tr = app.add_subcommand("train", "self-supervised training");
    DatasetArgs tr_data;
    ModelArgs tr_model;
    TrainArgs tr_train;
    tr_data.register_options(tr);
    tr_model.register_options(tr);
    tr_train.register_options(tr);

    // encode
    auto* enc = app.add_subcommand("encode", "emit representations for every window");
    DatasetArgs enc_data;
    enc_data.register_options(enc);
    std::string enc_ckpt;
    enc->add_option("--checkpoint", enc_ckpt, "trained model checkpoint")->required();

    // probe
    auto* pr = app.add_subcommand("probe", "frozen-representation evaluation");
    DatasetArgs pr_data;
    pr_data.register_options(pr);
    std::string pr_ckpt, pr_task = "classification", pr_dataset = "dataset";
    size_t pr_horizon = 0;
    pr->add_option("--checkpoint", pr_ckpt, "trained model checkpoint")->required();
    pr->add_option("--task", pr_task, "classification | forecasting");
    pr->add_option("--horizon", pr_horizon, "forecast horizon");
    pr->add_option("--name", pr_dataset, "dataset name for the results CSV");

    // ablate
    auto* ab = app.add_subcommand("ablate", "run the ablation table on a synthetic dataset");
    std::string ab_data, ab_labels;
    ExperimentScale ab_scale;
    std::vector<std::string> ab_variants;
    ab->add_option("--data", ab_data, "synthetic tensor file")->required();
    ab->add_option("--labels", ab_labels, "label CSV")->required();
    ab->add_option("--w", ab_scale.w, "window length");
    ab->add_option("--hdim", ab_scale.h, "latent dimension");
    ab->add_option("--levels", ab_scale.levels, "conv blocks L");
    ab->add_option("--epochs", ab_scale.epochs, "epochs per variant");
    ab->add_option("--batch", ab_scale.batch_size, "batch size");
    ab->add_option("--horizon", ab_scale.horizon, "forecast horizon");
    ab->add_option("--variants", ab_variants, "subset of variants to run");
    std::vector<double> ab_alphas;
    ab->add_option("--alphas", ab_alphas, "mode-loss weight grid (default 0.5)");

    // casestudy
    auto* cs = app.add_subcommand("casestudy", "disentanglement probes and 2-D projections");
    std::string cs_data, cs_labels, cs_ckpt;
    ExperimentScale cs_scale;
    cs->add_option("--data", cs_data, "synthetic tensor file")->required();
    cs->add_option("--labels", cs_labels, "label CSV")->required();
    cs->add_option("--checkpoint", cs_ckpt, "existing checkpoint for the disentangled model");
    cs->add_option("--w", cs_scale.w, "window length");
    cs->add_option("--hdim", cs_scale.h, "latent dimension");
    cs->add_option("--levels", cs_scale.levels, "conv blocks L");
    cs->add_option("--epochs", cs_scale.epochs, "training epochs");
    cs->add_option("--batch", cs_scale.batch_size, "batch size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (!g.config_path.empty()) g.file_cfg = parse_config_file(g.config_path);
        cfg_fill(g, seed_opt, "seed", g.seed);
        if (synth->parsed()) {
            cfg_fill(g, synth_w, "synth.w", synth_spec.w);
            cfg_fill(g, synth_pc, "synth.per_cell", synth_spec.windows_per_cell);
            cfg_fill(g, synth_noise, "synth.noise", synth_spec.noise_std);
            return run_synth(g, synth_spec);
        }
        if (ing->parsed()) return run_ingest(g, ing_data);
        if (tr->parsed()) return run_train(g, tr_data, tr_model, tr_train);
        if (enc->parsed()) return run_encode(g, enc_data, enc_ckpt);
        if (pr->parsed()) return run_probe(g, pr_data, pr_ckpt, pr_task, pr_horizon, pr_dataset);
        if (ab->parsed()) return run_ablate(g, ab_data, ab_labels, ab_scale, ab_variants, ab_alphas);
        if (cs->parsed()) return run_casestudy(g, cs_data, cs_labels, cs_scale, cs_ckpt);
        std::cerr << "no command given\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "argument error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const TrainError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return kExitTrain;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitother;
    }
}
