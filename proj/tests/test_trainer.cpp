#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "most/data.hpp"
#include "most/errors.hpp"
#include "most/trainer.hpp"
#include "oracle_utils.hpp"

using namespace most;

namespace {

std::vector<TtsWindow> tiny_synthetic(size_t per_cell, size_t w = 64, uint64_t seed = 7) {
    SyntheticSpec spec;
    spec.w = w;
    spec.windows_per_cell = per_cell;
    spec.seed = seed;
    return generate_synthetic(spec).windows;
}

MostConfig tiny_model_config(uint64_t seed = 3) {
    MostConfig cfg;
    cfg.d1 = 3;
    cfg.d2 = 3;
    cfg.h = 8;
    cfg.levels = 2;
    cfg.w_max = 128;
    cfg.seed = seed;
    return cfg;
}

std::vector<Tensor> snapshot(const MostModel& m) {
    std::vector<Tensor> out;
    for (const Param& p : m.params) out.push_back(p.value);
    return out;
}

bool identical(const std::vector<Tensor>& a, const MostModel& m) {
    for (size_t k = 0; k < a.size(); ++k) {
        if (std::memcmp(a[k].data.data(), m.params[k].value.data.data(),
                        a[k].data.size() * sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("adam: zero gradient moves parameters only through weight decay") {
    Param p("w", Tensor::full({2, 2}, 1.0));
    p.zero_grad();
    SUBCASE("no decay, no movement") {
        AdamConfig cfg;
        Adam opt({&p}, cfg);
        opt.step();
        for (double v : p.value.data) CHECK(v == 1.0);
    }
    SUBCASE("decay pulls toward zero") {
        AdamConfig cfg;
        cfg.weight_decay = 0.1;
        Adam opt({&p}, cfg);
        opt.step();
        for (double v : p.value.data) CHECK(v < 1.0);
    }
}

TEST_CASE("adam follows the declared recurrences for one step") {
    Param p("w", Tensor({1, 1}, {2.0}));
    p.grad = Tensor({1, 1}, {0.5});
    AdamConfig cfg;
    Adam opt({&p}, cfg);
    opt.step();
    // bias-corrected first step reduces to value -= lr * g / (|g| + eps)
    double expect = 2.0 - cfg.lr * 0.5 / (0.5 + cfg.eps);
    CHECK(p.value.data[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("train: zero learning rate leaves parameters untouched") {
    auto windows = tiny_synthetic(1);
    MostModel model = MostModel::init(tiny_model_config());
    auto before = snapshot(model);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.adam.lr = 0.0;
    TrainReport report = train(model, windows, cfg);
    CHECK(identical(before, model));
    CHECK(report.epochs.size() == 3);
}

TEST_CASE("train: B=1 gives identically zero loss and frozen parameters") {
    auto windows = tiny_synthetic(1);
    windows.resize(3);
    MostModel model = MostModel::init(tiny_model_config());
    auto before = snapshot(model);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 1;
    TrainReport report = train(model, windows, cfg);
    for (const EpochStats& e : report.epochs) {
        CHECK(e.total == 0.0);
        CHECK(e.instance == 0.0);
        CHECK(e.mode1 == 0.0);
        CHECK(e.mode2 == 0.0);
    }
    CHECK(identical(before, model));
}

TEST_CASE("train: the contrastive loss drops on the synthetic set") {
    // 50-epoch smoke run on a small configuration
    auto windows = tiny_synthetic(1);
    MostModel model = MostModel::init(tiny_model_config());
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch_size = 9;
    cfg.seed = 11;
    TrainReport report = train(model, windows, cfg);
    REQUIRE(report.epochs.size() == 50);
    CHECK(report.epochs.back().total < report.epochs.front().total);
}

TEST_CASE("train is deterministic for a fixed seed") {
    auto windows = tiny_synthetic(1);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 4;
    cfg.seed = 5;
    MostModel m1 = MostModel::init(tiny_model_config());
    MostModel m2 = MostModel::init(tiny_model_config());
    TrainReport r1 = train(m1, windows, cfg);
    TrainReport r2 = train(m2, windows, cfg);
    CHECK(identical(snapshot(m1), m2));
    for (size_t e = 0; e < r1.epochs.size(); ++e) {
        CHECK(r1.epochs[e].total == r2.epochs[e].total);
    }
}

TEST_CASE("train: mse objective fits a forecast head end to end") {
    auto windows = tiny_synthetic(1);
    MostModel model = MostModel::init(tiny_model_config());
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.batch_size = 9;
    cfg.objective = Objective::Mse;
    cfg.horizon = 4;
    TrainReport report = train(model, windows, cfg);
    CHECK(report.epochs.back().total < report.epochs.front().total);
    CHECK(report.epochs.back().instance == 0.0);  // no contrastive terms
}

TEST_CASE("train: mse+contrastive combines both objectives") {
    auto windows = tiny_synthetic(1);
    MostModel model = MostModel::init(tiny_model_config());
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.objective = Objective::MseContrastive;
    cfg.horizon = 4;
    TrainReport report = train(model, windows, cfg);
    CHECK(report.epochs.back().instance > 0.0);
    CHECK(report.epochs.back().total > report.epochs.back().instance);
}

TEST_CASE("train: configuration errors") {
    auto windows = tiny_synthetic(1);
    MostModel model = MostModel::init(tiny_model_config());
    TrainConfig cfg;
    CHECK_THROWS_AS(train(model, {}, cfg), std::invalid_argument);
    cfg.objective = Objective::Mse;
    cfg.horizon = 0;
    CHECK_THROWS_AS(train(model, windows, cfg), ConfigError);
    cfg.horizon = 64;
    CHECK_THROWS_AS(train(model, windows, cfg), ConfigError);
}

TEST_CASE("train: non-finite input surfaces as a training error with location") {
    auto windows = tiny_synthetic(1);
    windows[0].values.data[5] = std::nan("");
    MostModel model = MostModel::init(tiny_model_config());
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 9;
    CHECK_THROWS_WITH_AS(train(model, windows, cfg), doctest::Contains("epoch 0"), TrainError);
}

TEST_CASE("train: runaway learning rate diverges into a training error") {
    auto windows = tiny_synthetic(1);
    MostModel model = MostModel::init(tiny_model_config());
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 4;
    cfg.adam.lr = 1e200;
    CHECK_THROWS_AS(train(model, windows, cfg), TrainError);
}

TEST_CASE("train writes checkpoints and the report CSV") {
    auto dir = std::filesystem::temp_directory_path() / "most_trainer_tests";
    std::filesystem::remove_all(dir);
    auto windows = tiny_synthetic(1);
    MostModel model = MostModel::init(tiny_model_config());
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 4;
    cfg.checkpoint_every = 2;
    cfg.checkpoint_dir = (dir / "ckpts").string();
    TrainReport report = train(model, windows, cfg);
    CHECK(std::filesystem::exists(dir / "ckpts" / "epoch_0002.ckpt"));
    CHECK(std::filesystem::exists(dir / "ckpts" / "final.ckpt"));
    CHECK(report.final_checkpoint == (dir / "ckpts" / "final.ckpt").string());

    MostModel back = load_checkpoint(report.final_checkpoint);
    CHECK(identical(snapshot(model), back));

    auto csv_path = (dir / "report.csv").string();
    write_train_report_csv(csv_path, report);
    std::ifstream is(csv_path);
    std::string header;
    std::getline(is, header);
    CHECK(header == "epoch,loss_total,loss_instance,loss_mode1,loss_mode2,seconds");
    size_t rows = 0;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 4);
}

TEST_CASE("inference after training is crop-free and reproducible") {
    auto windows = tiny_synthetic(1);
    MostModel model = MostModel::init(tiny_model_config());
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    train(model, windows, cfg);
    Tensor a = forward(model, windows[0], 0).v;
    Tensor b = forward(model, windows[0], 0).v;
    CHECK(a.shape == std::vector<size_t>{8, 64});
    CHECK(std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0);
}
