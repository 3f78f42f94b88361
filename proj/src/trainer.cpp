#include "most/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "most/data.hpp"
#include "most/errors.hpp"

namespace most {

std::string to_string(Objective o) {
    switch (o) {
        case Objective::Contrastive: return "contrastive";
        case Objective::Mse: return "mse";
        case Objective::MseContrastive: return "mse+contrastive";
    }
    throw std::invalid_argument("to_string: unknown objective");
}

Objective objective_from_string(const std::string& s) {
    if (s == "contrastive") return Objective::Contrastive;
    if (s == "mse") return Objective::Mse;
    if (s == "mse+contrastive" || s == "mse-contrastive") return Objective::MseContrastive;
    throw std::invalid_argument("unknown objective '" + s + "'");
}

Adam::Adam(std::vector<Param*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (Param* p : params_) {
        m_.push_back(Tensor::zeros(p->value.shape));
        v_.push_back(Tensor::zeros(p->value.shape));
    }
}

void Adam::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t k = 0; k < params_.size(); ++k) {
        Param& p = *params_[k];
        for (size_t i = 0; i < p.value.data.size(); ++i) {
            double g = p.grad.data[i] + cfg_.weight_decay * p.value.data[i];
            m_[k].data[i] = cfg_.beta1 * m_[k].data[i] + (1.0 - cfg_.beta1) * g;
            v_[k].data[i] = cfg_.beta2 * v_[k].data[i] + (1.0 - cfg_.beta2) * g * g;
            double mhat = m_[k].data[i] / bc1;
            double vhat = v_[k].data[i] / bc2;
            p.value.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

namespace {

Tensor forecast_target(const TtsWindow& win, size_t input_len, size_t horizon) {
    size_t d1 = win.d1(), d2 = win.d2();
    Tensor t({d1 * d2 * horizon, 1});
    size_t k = 0;
    for (size_t i = 0; i < d1; ++i)
        for (size_t j = 0; j < d2; ++j)
            for (size_t s = 0; s < horizon; ++s) t.data[k++] = win.values.at3(i, j, input_len + s);
    return t;
}

}  // namespace

TrainReport train(MostModel& model, const std::vector<TtsWindow>& windows, const TrainConfig& cfg) {
    if (windows.empty()) throw std::invalid_argument("train: empty dataset");
    if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (cfg.adam.lr < 0.0) throw ConfigError("train: learning rate must be non-negative");
    size_t w = windows[0].w();
    for (const TtsWindow& win : windows) {
        if (win.d1() != model.config.d1 || win.d2() != model.config.d2 || win.w() != w) {
            throw std::invalid_argument("train: window dims do not match the model/dataset");
        }
    }
    bool use_mse = cfg.objective != Objective::Contrastive;
    bool use_contrastive = cfg.objective != Objective::Mse;
    size_t input_len = w;
    if (use_mse) {
        if (cfg.horizon < 1) throw ConfigError("train: mse objective requires horizon >= 1");
        if (w <= cfg.horizon) throw ConfigError("train: window shorter than forecast horizon + 1");
        input_len = w - cfg.horizon;
    }
    size_t min_ov = cfg.min_overlap == 0 ? default_min_overlap(input_len) : cfg.min_overlap;

    // forecast head (trained jointly, not part of the encoder checkpoint)
    size_t head_out = model.config.d1 * model.config.d2 * cfg.horizon;
    Param head_w, head_b;
    std::vector<Param*> trainable;
    for (Param& p : model.params) trainable.push_back(&p);
    if (use_mse) {
        Rng head_rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
        head_w = Param("head.weight", random_normal({head_out, model.config.h}, head_rng,
                                                    1.0 / std::sqrt(static_cast<double>(model.config.h))));
        head_b = Param("head.bias", Tensor({head_out, 1}));
        trainable.push_back(&head_w);
        trainable.push_back(&head_b);
    }
    Adam adam(trainable, cfg.adam);

    Rng rng(cfg.seed);
    std::vector<size_t> order(windows.size());
    std::iota(order.begin(), order.end(), size_t{0});

    TrainReport report;
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        rng.shuffle(order);
        EpochStats stats;
        size_t batches = 0;
        for (size_t base = 0; base < order.size(); base += cfg.batch_size) {
            size_t bsz = std::min(cfg.batch_size, order.size() - base);
            Tape tape;
            EncoderGraph graph = EncoderGraph::trainable(tape, model);

            Var li, lm1, lm2, lmse;
            if (use_contrastive) {
                CropIndices crop = sample_crop_pair(input_len, rng, min_ov);
                ContrastBatch batch;
                batch.h_half = model.config.h_half();
                batch.n = crop.overlap();
                for (size_t k = 0; k < bsz; ++k) {
                    const TtsWindow& win = windows[order[base + k]];
                    TtsWindow v1 = crop_window(win, crop.a1, crop.b1);
                    TtsWindow v2 = crop_window(win, crop.a2, crop.b2);
                    Var r1 = graph.encode_window(v1, crop.a1);
                    Var r2 = graph.encode_window(v2, crop.a2);
                    batch.view1.push_back(slice_cols(r1, crop.a2 - crop.a1, crop.b1 - crop.a1));
                    batch.view2.push_back(slice_cols(r2, 0, crop.b1 - crop.a2));
                }
                if (cfg.loss.enable_instance) li = instance_loss(batch, cfg.loss);
                if (cfg.loss.enable_mode && cfg.loss.alpha != 0.0) {
                    lm1 = mode_loss(batch, 1, cfg.loss);
                    lm2 = mode_loss(batch, 2, cfg.loss);
                }
            }
            if (use_mse) {
                std::vector<Var> last_reps;
                std::vector<Tensor> targets;
                Var hw = tape.param(head_w), hb = tape.param(head_b);
                for (size_t k = 0; k < bsz; ++k) {
                    const TtsWindow& win = windows[order[base + k]];
                    TtsWindow head_in = crop_window(win, 0, input_len);
                    Var rep = graph.encode_window(head_in, 0);
                    last_reps.push_back(slice_cols(rep, input_len - 1, input_len));
                    targets.push_back(forecast_target(win, input_len, cfg.horizon));
                }
                lmse = mse_supervised_loss(tape, last_reps, hw, hb, targets);
            }

            Var total;
            auto accumulate = [&](Var term, double weight) {
                if (!term.valid()) return;
                Var scaled = weight == 1.0 ? term : scale(term, weight);
                total = total.valid() ? add(total, scaled) : scaled;
            };
            accumulate(li, 1.0);
            accumulate(lm1, cfg.loss.alpha);
            accumulate(lm2, cfg.loss.alpha);
            accumulate(lmse, 1.0);
            if (!total.valid()) total = tape.constant(Tensor::scalar(0.0));

            double loss_value = tape.value(total).data[0];
            if (!std::isfinite(loss_value)) {
                throw TrainError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batches));
            }
            model.zero_grads();
            if (use_mse) {
                head_w.zero_grad();
                head_b.zero_grad();
            }
            tape.backward(total);
            adam.step();

            stats.total += loss_value;
            if (li.valid()) stats.instance += tape.value(li).data[0];
            if (lm1.valid()) stats.mode1 += tape.value(lm1).data[0];
            if (lm2.valid()) stats.mode2 += tape.value(lm2).data[0];
            ++batches;
        }
        double inv = batches > 0 ? 1.0 / static_cast<double>(batches) : 0.0;
        stats.total *= inv;
        stats.instance *= inv;
        stats.mode1 *= inv;
        stats.mode2 *= inv;
        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(stats);

        if (!cfg.checkpoint_dir.empty() && cfg.checkpoint_every > 0 &&
            (epoch + 1) % cfg.checkpoint_every == 0 && epoch + 1 < cfg.epochs) {
            std::filesystem::create_directories(cfg.checkpoint_dir);
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%04zu.ckpt", epoch + 1);
            save_checkpoint(model, cfg.checkpoint_dir + "/" + name);
        }
    }
    if (!cfg.checkpoint_dir.empty()) {
        std::filesystem::create_directories(cfg.checkpoint_dir);
        report.final_checkpoint = cfg.checkpoint_dir + "/final.ckpt";
        save_checkpoint(model, report.final_checkpoint);
    }
    return report;
}

void write_train_report_csv(const std::string& path, const TrainReport& report) {
    std::ofstream os(path);
    if (!os) throw IoError("write_train_report_csv: cannot open " + path);
    os << "epoch,loss_total,loss_instance,loss_mode1,loss_mode2,seconds\n";
    for (size_t e = 0; e < report.epochs.size(); ++e) {
        const EpochStats& s = report.epochs[e];
        char line[256];
        std::snprintf(line, sizeof(line), "%zu,%.10g,%.10g,%.10g,%.10g,%.3f\n", e, s.total,
                      s.instance, s.mode1, s.mode2, s.seconds);
        os << line;
    }
}

}  // namespace most
