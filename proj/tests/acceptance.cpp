// Acceptance suite: one pass/fail line per criterion, non-zero exit when any
// criterion fails. Criterion 8 drives the CLI binary passed via --cli.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "most/data.hpp"
#include "most/encoder.hpp"
#include "most/harness.hpp"
#include "most/losses.hpp"
#include "most/probes.hpp"
#include "most/trainer.hpp"
#include "oracle_utils.hpp"

namespace fs = std::filesystem;
using namespace most;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::vector<TtsWindow> random_windows(size_t count, size_t d1, size_t d2, size_t w, Rng& rng) {
    std::vector<TtsWindow> out;
    for (size_t k = 0; k < count; ++k) {
        TtsWindow x;
        x.values = random_normal({d1, d2, w}, rng);
        out.push_back(std::move(x));
    }
    return out;
}

// Smallest gap between the max-pool winner and the runner-up across all
// pooled positions of both branches; finite differences need a strict
// argmax to stay valid, so max-aggregator configurations are regenerated
// until the gap clears the perturbation scale.
double min_pool_gap(const MostModel& model, const TtsWindow& x, size_t offset) {
    if (model.config.aggregator != Aggregator::Max) return 1e300;
    Tape tape;
    EncoderGraph g = EncoderGraph::frozen(tape, model);
    size_t d1 = x.d1(), d2 = x.d2(), w = x.w();
    double gap = 1e300;
    auto scan = [&](const std::vector<Var>& encs) {
        if (encs.size() < 2) return;
        size_t n = tape.value(encs[0]).numel();
        for (size_t k = 0; k < n; ++k) {
            double best = -1e300, second = -1e300;
            for (const Var& e : encs) {
                double v = tape.value(e).data[k];
                if (v > best) {
                    second = best;
                    best = v;
                } else if (v > second) {
                    second = v;
                }
            }
            gap = std::min(gap, best - second);
        }
    };
    std::vector<Var> m1, m2;
    for (size_t j = 0; j < d2; ++j) {
        Tensor s({d1, w});
        for (size_t i = 0; i < d1; ++i)
            for (size_t t = 0; t < w; ++t) s(i, t) = x.values.at3(i, j, t);
        m1.push_back(g.encode_slice(g.embed_slice(tape.input(s), g.proj1(), offset)));
    }
    for (size_t i = 0; i < d1; ++i) {
        Tensor s({d2, w});
        for (size_t j = 0; j < d2; ++j)
            for (size_t t = 0; t < w; ++t) s(j, t) = x.values.at3(i, j, t);
        m2.push_back(g.encode_slice(g.embed_slice(tape.input(s), g.proj2(), offset)));
    }
    scan(m1);
    scan(m2);
    return gap;
}

// ---- criterion 1: gradient suite ------------------------------------------------

void criterion_gradients() {
    auto t0 = std::chrono::steady_clock::now();
    const size_t d1s[] = {1, 2, 3}, d2s[] = {3, 1, 2}, ws[] = {8, 16}, hs[] = {4, 8},
                 ls[] = {0, 2};
    double worst = 0.0;
    int configs = 0;
    for (int i = 0; i < 20; ++i) {
        MostConfig cfg;
        cfg.d1 = d1s[i % 3];
        cfg.d2 = d2s[(i / 3) % 3];
        cfg.h = hs[i % 2];
        cfg.levels = ls[(i / 2) % 2];
        cfg.w_max = 64;
        cfg.aggregator = (i % 3 == 2) ? Aggregator::Max : Aggregator::Mean;
        cfg.seed = 1000 + static_cast<uint64_t>(i);
        size_t w = ws[(i / 4) % 2];

        MostModel model = MostModel::init(cfg);
        std::vector<TtsWindow> windows;
        CropIndices crop;
        for (uint64_t salt = 0;; ++salt) {
            Rng rng(cfg.seed * 97 + salt);
            windows = random_windows(2, cfg.d1, cfg.d2, w, rng);
            crop = sample_crop_pair(w, rng, default_min_overlap(w));
            // the guard has to look at the crop views the loss actually encodes
            double gap = 1e300;
            for (const TtsWindow& win : windows) {
                gap = std::min(gap, min_pool_gap(model, crop_window(win, crop.a1, crop.b1), crop.a1));
                gap = std::min(gap, min_pool_gap(model, crop_window(win, crop.a2, crop.b2), crop.a2));
            }
            if (gap > 3e-3 || salt > 64) break;
        }

        LossWeights weights;
        weights.alpha = 0.5;
        auto build_loss = [&](Tape& tape) {
            EncoderGraph g = EncoderGraph::trainable(tape, model);
            ContrastBatch batch;
            batch.h_half = cfg.h_half();
            batch.n = crop.overlap();
            for (const TtsWindow& win : windows) {
                TtsWindow v1 = crop_window(win, crop.a1, crop.b1);
                TtsWindow v2 = crop_window(win, crop.a2, crop.b2);
                Var r1 = g.encode_window(v1, crop.a1);
                Var r2 = g.encode_window(v2, crop.a2);
                batch.view1.push_back(slice_cols(r1, crop.a2 - crop.a1, crop.b1 - crop.a1));
                batch.view2.push_back(slice_cols(r2, 0, crop.b1 - crop.a2));
            }
            return total_loss(tape, batch, weights);
        };
        auto loss_value = [&]() {
            Tape tape;
            return tape.value(build_loss(tape)).data[0];
        };
        model.zero_grads();
        {
            Tape tape;
            tape.backward(build_loss(tape));
        }
        for (Param& p : model.params) {
            Tensor fd = oracle::fd_grad(p, loss_value, 1e-4);
            worst = std::max(worst, oracle::max_rel_error(p.grad, fd));
        }
        ++configs;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "%d configurations, max relative error %.3g (tol 1e-4), %.1fs (limit 60s)",
                  configs, worst, secs);
    report(1, "analytic gradients of the combined loss match finite differences",
           configs >= 20 && worst < 1e-4 && secs < 60.0, detail);
}

// ---- criterion 2: loss oracles ---------------------------------------------------

void criterion_loss_oracles() {
    bool ok = true;
    std::ostringstream detail;

    // B = 1 degenerate cases: both losses are exactly zero
    {
        Rng rng(11);
        std::vector<Tensor> v1 = {random_normal({6, 4}, rng)};
        std::vector<Tensor> v2 = {random_normal({6, 4}, rng)};
        if (instance_loss_value(v1, v2) != 0.0) ok = false;
        if (mode_loss_value(v1, 3, 1) != 0.0 || mode_loss_value(v1, 3, 2) != 0.0) ok = false;
    }
    // hand-constructed and random batches with B in {2,3} against the direct
    // scalar evaluation of the formulas
    double worst = 0.0;
    {
        std::vector<Tensor> v1 = {Tensor({2, 1}, {1, 0}), Tensor({2, 1}, {0, 1})};
        worst = std::max(worst, std::abs(instance_loss_value(v1, v1) -
                                         oracle::reference_instance_loss(v1, v1)));
        std::vector<Tensor> m = {Tensor({4, 1}, {1, 0, 0, 1}), Tensor({4, 1}, {0, 1, 1, 0})};
        worst = std::max(worst,
                         std::abs(mode_loss_value(m, 2, 1) - oracle::reference_mode_loss(m, 2, 1)));
        worst = std::max(worst,
                         std::abs(mode_loss_value(m, 2, 2) - oracle::reference_mode_loss(m, 2, 2)));
    }
    for (size_t B : {size_t{2}, size_t{3}}) {
        Rng rng(100 + B);
        std::vector<Tensor> v1, v2;
        for (size_t i = 0; i < B; ++i) {
            v1.push_back(random_normal({6, 5}, rng, 0.5));
            v2.push_back(random_normal({6, 5}, rng, 0.5));
        }
        worst = std::max(worst, std::abs(instance_loss_value(v1, v2) -
                                         oracle::reference_instance_loss(v1, v2)));
        worst = std::max(worst, std::abs(mode_loss_value(v1, 3, 1) -
                                         oracle::reference_mode_loss(v1, 3, 1)));
        worst = std::max(worst, std::abs(mode_loss_value(v1, 3, 2) -
                                         oracle::reference_mode_loss(v1, 3, 2)));
    }
    if (worst >= 1e-12) ok = false;
    detail << "B=1 exactly zero; max |deviation| from direct evaluation " << worst
           << " (tol 1e-12)";
    report(2, "instance and mode losses match their formula oracles", ok, detail.str());
}

// ---- criterion 3: causality ------------------------------------------------------

void criterion_causality() {
    MostConfig cfg;
    cfg.d1 = 2;
    cfg.d2 = 3;
    cfg.h = 8;
    cfg.levels = 2;
    cfg.w_max = 64;
    cfg.seed = 5;
    MostModel model = MostModel::init(cfg);
    const size_t w = 16;
    int checked = 0, clean = 0;

    for (int trial = 0; trial < 50; ++trial) {  // encode_slice level
        Rng rng(500 + static_cast<uint64_t>(trial));
        Tensor h_emb = random_normal({cfg.h, w}, rng);
        size_t t0 = static_cast<size_t>(rng.uniform(0, w - 2));
        Tensor h2 = h_emb;
        for (size_t r = 0; r < cfg.h; ++r)
            for (size_t t = t0 + 1; t < w; ++t) h2(r, t) = rng.normal() * 3.0;
        Tape tape;
        EncoderGraph g = EncoderGraph::frozen(tape, model);
        const Tensor& y1 = tape.value(g.encode_slice(tape.input(h_emb)));
        const Tensor& y2 = tape.value(g.encode_slice(tape.input(h2)));
        bool same = true;
        for (size_t r = 0; r < cfg.h_half(); ++r)
            for (size_t t = 0; t <= t0; ++t) {
                if (std::memcmp(&y1.data[r * w + t], &y2.data[r * w + t], sizeof(double)) != 0) {
                    same = false;
                }
            }
        ++checked;
        clean += same ? 1 : 0;
    }
    for (int trial = 0; trial < 50; ++trial) {  // full forward level
        Rng rng(900 + static_cast<uint64_t>(trial));
        TtsWindow x;
        x.values = random_normal({2, 3, w}, rng);
        size_t t0 = static_cast<size_t>(rng.uniform(0, w - 2));
        TtsWindow x2 = x;
        for (size_t i = 0; i < 2; ++i)
            for (size_t j = 0; j < 3; ++j)
                for (size_t t = t0 + 1; t < w; ++t) x2.values.at3(i, j, t) = rng.normal() * 3.0;
        Tensor a = forward(model, x, 0).v;
        Tensor b = forward(model, x2, 0).v;
        bool same = true;
        for (size_t r = 0; r < cfg.h; ++r)
            for (size_t t = 0; t <= t0; ++t) {
                if (std::memcmp(&a.data[r * w + t], &b.data[r * w + t], sizeof(double)) != 0) {
                    same = false;
                }
            }
        ++checked;
        clean += same ? 1 : 0;
    }
    char detail[120];
    std::snprintf(detail, sizeof(detail), "%d/%d perturb-the-future tests bit-identical", clean,
                  checked);
    report(3, "past outputs are untouched by future inputs", checked == 100 && clean == checked,
           detail);
}

// ---- criterion 4: slicing round-trip ---------------------------------------------

void criterion_slicing() {
    int clean = 0;
    const int total = 1000;
    for (int trial = 0; trial < total; ++trial) {
        Rng rng(3000 + static_cast<uint64_t>(trial));
        size_t d1 = 1 + rng.uniform(0, 3), d2 = 1 + rng.uniform(0, 3), w = 2 + rng.uniform(0, 10);
        TtsWindow x;
        x.values = random_normal({d1, d2, w}, rng);
        SlicedTensor s = slice(x);
        TtsWindow r1 = assemble_from_mode1(s.mode1);
        TtsWindow r2 = assemble_from_mode2(s.mode2);
        bool same = r1.values.shape == x.values.shape && r2.values.shape == x.values.shape &&
                    std::memcmp(r1.values.data.data(), x.values.data.data(),
                                x.values.numel() * sizeof(double)) == 0 &&
                    std::memcmp(r2.values.data.data(), x.values.data.data(),
                                x.values.numel() * sizeof(double)) == 0;
        clean += same ? 1 : 0;
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "%d/%d tensors reassembled losslessly from both modes",
                  clean, total);
    report(4, "tensor slicing round-trips losslessly", clean == total, detail);
}

// ---- criterion 5: synthetic disentanglement --------------------------------------

void criterion_casestudy() {
    auto t0 = std::chrono::steady_clock::now();
    SyntheticSpec spec;
    spec.w = 128;
    spec.windows_per_cell = 15;
    spec.noise_std = 0.1;
    spec.seed = 7;
    SyntheticData data = generate_synthetic(spec);

    ExperimentScale scale;
    scale.w = 128;
    scale.windows_per_cell = 15;
    scale.h = 32;
    scale.levels = 4;
    scale.epochs = 20;
    scale.batch_size = 8;
    scale.lr = 1e-3;
    scale.alpha = 0.5;
    scale.horizon = 8;
    scale.seed = 7;
    scale.aggregator = Aggregator::Max;

    CaseStudyResult r = run_casestudy(data, scale);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // figure contract: one point per window per panel
    size_t expected_points = 9 * spec.windows_per_cell;
    auto circle_count = [](const std::string& svg) {
        size_t count = 0, pos = 0;
        while ((pos = svg.find("<circle", pos)) != std::string::npos) {
            ++count;
            pos += 7;
        }
        return count;
    };
    bool svg_ok = r.points_per_panel == expected_points &&
                  circle_count(r.svg_mode1) == expected_points &&
                  circle_count(r.svg_mode2) == expected_points;

    bool ok = r.full.m1_from_v1 >= 0.9 && r.cd_m1_acc < r.full.m1_from_v1 && svg_ok &&
              secs < 600.0;
    char detail[240];
    std::snprintf(detail, sizeof(detail),
                  "mode-1 labels from v_mode1: %.3f (need >= 0.9); flattened baseline: %.3f "
                  "(must be lower); cross-mode probes %.3f/%.3f; %zu points per panel; "
                  "%.0fs (limit 600s)",
                  r.full.m1_from_v1, r.cd_m1_acc, r.full.m1_from_v2, r.full.m2_from_v1,
                  r.points_per_panel, secs);
    report(5, "disentangled halves separate the synthetic dependency labels", ok, detail);
}

// ---- criterion 6: ablation harness smoke ------------------------------------------

void criterion_ablation() {
    SyntheticSpec spec;
    spec.w = 64;
    spec.windows_per_cell = 6;
    spec.noise_std = 0.1;
    spec.seed = 7;
    SyntheticData data = generate_synthetic(spec);

    ExperimentScale scale;
    scale.w = 64;
    scale.windows_per_cell = 6;
    scale.h = 16;
    scale.levels = 3;
    scale.epochs = 8;
    scale.batch_size = 8;
    scale.horizon = 4;
    scale.seed = 7;
    scale.aggregator = Aggregator::Max;

    const auto& ids = ablation_variant_ids();
    AblationReport rep = run_ablation(data, scale, ids);

    bool all_ok = rep.rows.size() == ids.size();
    for (size_t k = 0; k < rep.rows.size(); ++k) {
        if (!rep.rows[k].ok || rep.rows[k].variant != ids[k]) all_ok = false;
    }
    int best_or_tied = 0;
    double base_acc = rep.base_row >= 0
                          ? rep.rows[static_cast<size_t>(rep.base_row)].classify_metrics.acc
                          : -1.0;
    for (const AblationRow& row : rep.rows) {
        if (row.ok && base_acc >= row.classify_metrics.acc - 1e-12) ++best_or_tied;
    }
    // delta formatting pinned to the published example: 0.811 vs base 0.636 is -27.5%
    bool fmt_ok = format_metric_with_delta(0.811, 0.636, false) == std::string("0.811 (-27.5%)") &&
                  std::abs(percent_delta(0.811, 0.636, false) - (-27.5)) < 0.05;
    bool ok = all_ok && best_or_tied >= 8 && fmt_ok;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "12/12 variants completed=%s; full best-or-tied on %d/12 accuracy comparisons "
                  "(need >= 8); delta format check=%s",
                  all_ok ? "yes" : "no", best_or_tied, fmt_ok ? "ok" : "bad");
    report(6, "paired-seed ablation harness covers all twelve variants", ok, detail);
}

// ---- criterion 7: probe closed forms ----------------------------------------------

void criterion_probes() {
    Rng rng(41);
    Tensor x = random_normal({30, 8}, rng);
    Tensor y = random_normal({30, 3}, rng);
    double worst_residual = 0.0;
    for (double lambda : {0.0, 1e-2, 1.0, 100.0}) {
        worst_residual = std::max(worst_residual, ridge_fit(x, y, lambda).rel_residual);
    }

    Tensor toy({40, 3});
    std::vector<int> labels(40);
    for (size_t r = 0; r < 40; ++r) {
        int cls = static_cast<int>(r % 2);
        labels[r] = cls;
        for (size_t c = 0; c < 3; ++c) toy(r, c) = (cls == 0 ? 1.0 : -1.0) + 0.05 * rng.normal();
    }
    LabeledData data{toy, labels};
    Metrics m = classify(data, data, data);

    bool ok = worst_residual < 1e-8 && m.acc == 1.0;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "ridge normal-equation relative residual %.3g (tol 1e-8); separable toy "
                  "accuracy %.3f (need 1.0)",
                  worst_residual, m.acc);
    report(7, "probe solvers satisfy their closed-form checks", ok, detail);
}

// ---- criterion 8: CLI determinism --------------------------------------------------

std::string read_bytes(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

void criterion_determinism(const std::string& cli, const fs::path& work) {
    fs::remove_all(work);
    fs::create_directories(work);
    std::string synth1 = (work / "synth1").string(), synth2 = (work / "synth2").string();
    std::string run1 = (work / "run1").string(), run2 = (work / "run2").string();
    bool ok = true;
    std::string why;

    auto synth_cmd = [&](const std::string& out) {
        return cli + " --seed 7 --out " + out + " synth --w 64 --per-cell 2 > /dev/null";
    };
    auto train_cmd = [&](const std::string& out) {
        return cli + " --seed 7 --out " + out + " train --data " + synth1 +
               "/data.most --labels " + synth1 +
               "/labels.csv --window 64 --stride 64 --split samples"
               " --hdim 8 --levels 2 --epochs 2 --batch 4 > /dev/null";
    };
    if (std::system(synth_cmd(synth1).c_str()) != 0 ||
        std::system(synth_cmd(synth2).c_str()) != 0) {
        ok = false;
        why = "synth command failed";
    }
    if (ok &&
        read_bytes(fs::path(synth1) / "data.most") != read_bytes(fs::path(synth2) / "data.most")) {
        ok = false;
        why = "synth outputs differ between identical runs";
    }
    if (ok) {
        // a different seed must change the payload but keep the header dims
        std::string synth3 = (work / "synth3").string();
        std::string cmd = cli + " --seed 8 --out " + synth3 + " synth --w 64 --per-cell 2 > /dev/null";
        if (std::system(cmd.c_str()) != 0) {
            ok = false;
            why = "seed-variation synth failed";
        } else {
            std::string a = read_bytes(fs::path(synth1) / "data.most");
            std::string b = read_bytes(fs::path(synth3) / "data.most");
            bool header_same = a.size() == b.size() && a.compare(0, 32, b, 0, 32) == 0;
            if (!header_same || a == b) {
                ok = false;
                why = "seed change should alter the payload but not the dimensions";
            }
        }
    }
    if (ok && (std::system(train_cmd(run1).c_str()) != 0 ||
               std::system(train_cmd(run2).c_str()) != 0)) {
        ok = false;
        why = "train command failed";
    }
    if (ok) {
        std::string c1 = read_bytes(fs::path(run1) / "checkpoints" / "final.ckpt");
        std::string c2 = read_bytes(fs::path(run2) / "checkpoints" / "final.ckpt");
        if (c1.empty() || c1 != c2) {
            ok = false;
            why = "checkpoints differ between identical runs";
        } else {
            why = "checkpoints byte-identical (" + std::to_string(c1.size()) + " bytes)";
        }
    }
    if (ok) {
        // encoding replays byte-identically as well
        std::string enc1 = (work / "enc1").string(), enc2 = (work / "enc2").string();
        auto encode_cmd = [&](const std::string& out) {
            return cli + " --seed 7 --out " + out + " encode --checkpoint " + run1 +
                   "/checkpoints/final.ckpt --data " + synth1 +
                   "/data.most --labels " + synth1 +
                   "/labels.csv --window 64 --stride 64 --split samples > /dev/null";
        };
        if (std::system(encode_cmd(enc1).c_str()) != 0 ||
            std::system(encode_cmd(enc2).c_str()) != 0) {
            ok = false;
            why = "encode command failed";
        } else if (read_bytes(fs::path(enc1) / "reps" / "reps.most") !=
                       read_bytes(fs::path(enc2) / "reps" / "reps.most") ||
                   read_bytes(fs::path(enc1) / "reps" / "reps.most").empty()) {
            ok = false;
            why = "representation files differ between identical encode runs";
        } else {
            why += "; representation files byte-identical";
        }
    }
    report(8, "identical manifests reproduce byte-identical checkpoints", ok, why);
}

}  // namespace

int main(int argc, char** argv) {
    std::string cli;
    fs::path work = "acceptance_work";
    for (int i = 1; i + 1 < argc; i += 2) {
        std::string key = argv[i];
        if (key == "--cli") cli = argv[i + 1];
        if (key == "--work") work = argv[i + 1];
    }

    auto guarded = [&](int id, const char* name, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            report(id, name, false, std::string("exception: ") + e.what());
        }
    };
    guarded(1, "gradient suite", [&] { criterion_gradients(); });
    guarded(2, "loss oracles", [&] { criterion_loss_oracles(); });
    guarded(3, "causality suite", [&] { criterion_causality(); });
    guarded(4, "slicing round-trip", [&] { criterion_slicing(); });
    guarded(5, "synthetic disentanglement", [&] { criterion_casestudy(); });
    guarded(6, "ablation harness smoke", [&] { criterion_ablation(); });
    guarded(7, "probe closed-form checks", [&] { criterion_probes(); });
    if (cli.empty()) {
        report(8, "identical manifests reproduce byte-identical checkpoints", false,
               "--cli <path> not supplied");
    } else {
        guarded(8, "determinism", [&] { criterion_determinism(cli, work); });
    }

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
