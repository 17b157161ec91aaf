#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <vector>

#include "duet/gradcheck.hpp"
#include "duet/synth.hpp"
#include "duet/training.hpp"

using namespace duet;
using model::DuetModel;
using model::ModelConfig;
using train::AdamState;
using train::TrainConfig;
using train::Trainer;
using train::TrainMode;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.frames = 8;
    cfg.joints = 2;
    cfg.dims = 3;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.latent_dim = 4;
    cfg.lstm_layers = 2;
    cfg.conv_kernel = 3;
    cfg.decoder_layers = 1;
    return cfg;
}

train::Window random_window(RandomSource& rng, std::size_t rows, std::size_t features) {
    train::Window w;
    w.a = rng.normal_tensor({rows, features}, 0.5);
    w.b = rng.normal_tensor({rows, features}, 0.5);
    return w;
}

std::vector<Tensor> snapshot(auto& part) {
    std::vector<Tensor> vals;
    part.for_each([&](nn::Param& p) { vals.push_back(p.value); });
    return vals;
}

bool unchanged(auto& part, const std::vector<Tensor>& before) {
    std::vector<Tensor> now = snapshot(part);
    if (now.size() != before.size()) return false;
    for (std::size_t i = 0; i < now.size(); ++i) {
        if (!nn::bit_equal(now[i], before[i])) return false;
    }
    return true;
}

pose::JointSequence constant_sequence(std::size_t t_len, std::size_t m, double fill) {
    pose::JointSequence s{Tensor::full({t_len, m, 3}, fill), 30.0};
    for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t j = 0; j < m; ++j) {
            s.data.at3(t, j, 0) += 0.01 * static_cast<double>(t) + 0.1 * static_cast<double>(j);
        }
    }
    return s;
}

}  // namespace

TEST_CASE("adam leaves a fresh parameter alone on zero gradient") {
    nn::Param p("w", Tensor({2, 2}, {1.0, -2.0, 3.0, -4.0}));
    p.grad = Tensor({2, 2});
    Tensor before = p.value;
    AdamState st;
    train::adam_update(p, st, 0.001, 0.9, 0.999);
    CHECK(nn::bit_equal(p.value, before));
    CHECK(st.t == 1);
    for (std::size_t i = 0; i < st.m.numel(); ++i) {
        CHECK(st.m[i] == 0.0);
        CHECK(st.v[i] == 0.0);
    }
}

TEST_CASE("first adam step moves by roughly the learning rate") {
    for (double g : {0.3, -1.7, 42.0, 1e-4}) {
        nn::Param p("w", Tensor({1}, {5.0}));
        p.grad = Tensor({1}, {g});
        AdamState st;
        train::adam_update(p, st, 0.001, 0.9, 0.999);
        double step = 5.0 - p.value[0];
        double expected = 0.001 * g / (std::abs(g) + 1e-8);
        CHECK(step == Catch::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("adam rejects non-finite gradients by name") {
    nn::Param p("vae1.embed.w", Tensor({2}, {1.0, 2.0}));
    p.grad = Tensor({2}, {0.5, std::nan("")});
    AdamState st;
    CHECK_THROWS_WITH(train::adam_update(p, st, 0.001, 0.9, 0.999),
                      Catch::Matchers::ContainsSubstring("vae1.embed.w"));
}

TEST_CASE("adam runs are deterministic") {
    auto run = [] {
        nn::Param p("w", Tensor({3}, {0.5, -0.25, 1.5}));
        AdamState st;
        RandomSource rng(99);
        for (int step = 0; step < 10; ++step) {
            p.grad = rng.normal_tensor({3}, 1.0);
            train::adam_update(p, st, 0.01, 0.9, 0.999);
        }
        return p.value;
    };
    CHECK(nn::bit_equal(run(), run()));
}

TEST_CASE("mode draw respects the focused probability") {
    RandomSource always_full(1);
    RandomSource always_focused(2);
    for (int i = 0; i < 1000; ++i) {
        CHECK(train::draw_mode(always_full, 0.0) == TrainMode::Full);
        CHECK(train::draw_mode(always_focused, 1.0) == TrainMode::Focused);
    }

    RandomSource rng(12345);
    std::size_t focused = 0;
    for (int i = 0; i < 10000; ++i) {
        if (train::draw_mode(rng, 0.1) == TrainMode::Focused) ++focused;
    }
    double fraction = static_cast<double>(focused) / 10000.0;
    CHECK(fraction >= 0.09);
    CHECK(fraction <= 0.11);
}

TEST_CASE("window construction slides a half-window stride") {
    pose::NormStats stats{Tensor({4, 3}), Tensor::full({4, 3}, 1.0)};
    auto make = [&](std::size_t t_total) {
        train::DuetSequence d;
        d.dancer1 = constant_sequence(t_total, 4, 0.0);
        d.dancer2 = constant_sequence(t_total, 4, 1.0);
        return d;
    };

    CHECK(train::build_windows({make(16)}, stats, 16).empty());
    CHECK(train::build_windows({make(17)}, stats, 16).size() == 1);
    CHECK(train::build_windows({make(25)}, stats, 16).size() == 2);
    CHECK(train::build_windows({make(33)}, stats, 16).size() == 3);
    CHECK(train::build_windows({make(17), make(25)}, stats, 16).size() == 3);

    auto windows = train::build_windows({make(25)}, stats, 16);
    REQUIRE(windows.size() == 2);
    CHECK(windows[0].a.shape() == std::vector<std::size_t>{17, 12});
    CHECK(windows[0].a.at2(0, 0) == 0.0);
    CHECK(windows[1].a.at2(0, 0) == Catch::Approx(0.08));
    CHECK(windows[0].a.at2(8, 0) == windows[1].a.at2(0, 0));
}

TEST_CASE("window construction normalizes with the supplied stats") {
    pose::NormStats stats{Tensor::full({4, 3}, 2.0), Tensor::full({4, 3}, 4.0)};
    train::DuetSequence d;
    d.dancer1 = constant_sequence(3, 4, 0.0);
    d.dancer2 = constant_sequence(3, 4, 1.0);
    auto windows = train::build_windows({d}, stats, 2);
    REQUIRE(windows.size() == 1);
    CHECK(windows[0].a.at2(0, 1) == Catch::Approx((0.0 - 2.0) / 4.0));
    CHECK(windows[0].b.at2(0, 1) == Catch::Approx((1.0 - 2.0) / 4.0));
}

TEST_CASE("focused steps leave decoders and the proximity vae untouched") {
    ModelConfig cfg = tiny_config();
    DuetModel m(cfg, 5);
    TrainConfig tc;
    tc.p = 1.0;
    tc.window = 8;
    tc.seed = 7;
    Trainer trainer(m, tc);

    auto vae3_before = snapshot(m.vae3);
    auto dec1_before = snapshot(m.decoder1);
    auto dec2_before = snapshot(m.decoder2);
    auto vae1_before = snapshot(m.vae1);

    RandomSource rng(11);
    for (int i = 0; i < 3; ++i) {
        auto r = trainer.train_step(random_window(rng, 9, cfg.features()));
        CHECK(r.mode == TrainMode::Focused);
        CHECK(r.target_dancer == 0);
        CHECK(r.losses.l_velocity == 0.0);
    }
    CHECK(unchanged(m.vae3, vae3_before));
    CHECK(unchanged(m.decoder1, dec1_before));
    CHECK(unchanged(m.decoder2, dec2_before));
    CHECK_FALSE(unchanged(m.vae1, vae1_before));
}

TEST_CASE("full steps alternate targets and update only the active decoder") {
    ModelConfig cfg = tiny_config();
    DuetModel m(cfg, 13);
    TrainConfig tc;
    tc.p = 0.0;
    tc.window = 8;
    tc.seed = 17;
    Trainer trainer(m, tc);
    RandomSource rng(19);

    auto dec1_before = snapshot(m.decoder1);
    auto r1 = trainer.train_step(random_window(rng, 9, cfg.features()));
    CHECK(r1.mode == TrainMode::Full);
    CHECK(r1.target_dancer == 2);
    CHECK(unchanged(m.decoder1, dec1_before));

    auto dec2_mid = snapshot(m.decoder2);
    auto r2 = trainer.train_step(random_window(rng, 9, cfg.features()));
    CHECK(r2.target_dancer == 1);
    CHECK(unchanged(m.decoder2, dec2_mid));
    CHECK_FALSE(unchanged(m.decoder1, dec1_before));

    CHECK(r1.losses.total ==
          Catch::Approx(tc.alpha * r1.losses.l_mse + tc.beta * r1.losses.l_velocity +
                        tc.eta * r1.losses.l_kl)
              .margin(1e-12));
}

TEST_CASE("training is deterministic per seed and writes a checkpoint") {
    ModelConfig cfg = tiny_config();
    TrainConfig tc;
    tc.window = 8;
    tc.epochs = 3;
    tc.t_max = 10;
    tc.seed = 21;
    tc.noise_sigma = 0.01;

    auto data = [&] {
        auto [a, b] = synth::synth_duet(26, cfg.joints, 31, synth::Style::mirror);
        return std::vector<train::DuetSequence>{{a, b}};
    }();

    std::string path = "train_checkpoint_test.json";
    auto run = [&](const std::string& ckpt) {
        DuetModel m(cfg, 3);
        Trainer trainer(m, tc);
        return trainer.train(data, ckpt);
    };
    auto r1 = run(path);
    auto r2 = run("");
    REQUIRE(r1.size() == 3);
    REQUIRE(r2.size() == 3);
    for (std::size_t e = 0; e < r1.size(); ++e) {
        CHECK(r1[e].mean.total == r2[e].mean.total);
        CHECK(r1[e].mean.l_mse == r2[e].mean.l_mse);
        CHECK(r1[e].mode_fraction == r2[e].mode_fraction);
    }

    DuetModel loaded = model::load_checkpoint(path);
    std::remove(path.c_str());
    CHECK(loaded.has_norm_stats);
    CHECK(loaded.config.joints == cfg.joints);
}

TEST_CASE("training refuses empty or too-short datasets") {
    ModelConfig cfg = tiny_config();
    DuetModel m(cfg, 1);
    TrainConfig tc;
    tc.window = 8;
    Trainer trainer(m, tc);
    CHECK_THROWS_AS(trainer.train({}), NoDataError);

    train::DuetSequence d;
    d.dancer1 = constant_sequence(8, cfg.joints, 0.0);
    d.dancer2 = constant_sequence(8, cfg.joints, 1.0);
    CHECK_THROWS_AS(trainer.train({d}), NoDataError);
}

TEST_CASE("training rejects datasets with the wrong joint layout") {
    ModelConfig cfg = tiny_config();
    DuetModel m(cfg, 1);
    TrainConfig tc;
    tc.window = 4;
    Trainer trainer(m, tc);
    train::DuetSequence d;
    d.dancer1 = constant_sequence(12, cfg.joints + 1, 0.0);
    d.dancer2 = constant_sequence(12, cfg.joints + 1, 1.0);
    CHECK_THROWS_AS(trainer.train({d}), DimensionError);
}

TEST_CASE("mode fraction lands at the boundaries") {
    ModelConfig cfg = tiny_config();
    TrainConfig tc;
    tc.window = 8;
    tc.epochs = 2;
    tc.noise_sigma = 0.0;

    auto data = [&] {
        auto [a, b] = synth::synth_duet(18, cfg.joints, 41, synth::Style::orbit);
        return std::vector<train::DuetSequence>{{a, b}};
    }();

    tc.p = 1.0;
    DuetModel m1(cfg, 2);
    auto focused_reports = Trainer(m1, tc).train(data);
    for (const auto& r : focused_reports) CHECK(r.mode_fraction == 1.0);

    tc.p = 0.0;
    DuetModel m2(cfg, 2);
    auto full_reports = Trainer(m2, tc).train(data);
    for (const auto& r : full_reports) CHECK(r.mode_fraction == 0.0);
}

TEST_CASE("noise augmentation changes batches, zero sigma does not") {
    ModelConfig cfg = tiny_config();
    TrainConfig tc;
    tc.window = 8;
    tc.epochs = 1;
    tc.p = 0.0;

    auto data = [&] {
        auto [a, b] = synth::synth_duet(18, cfg.joints, 43, synth::Style::lead_follow);
        return std::vector<train::DuetSequence>{{a, b}};
    }();

    auto run_with_sigma = [&](double sigma) {
        TrainConfig local = tc;
        local.noise_sigma = sigma;
        DuetModel m(cfg, 4);
        return Trainer(m, local).train(data);
    };
    auto clean1 = run_with_sigma(0.0);
    auto clean2 = run_with_sigma(0.0);
    auto noisy = run_with_sigma(0.05);
    CHECK(clean1[0].mean.total == clean2[0].mean.total);
    CHECK(clean1[0].mean.total != noisy[0].mean.total);
}

TEST_CASE("a tiny duet is overfit by full-mode steps") {
    ModelConfig cfg;
    cfg.frames = 16;
    cfg.joints = 4;
    cfg.dims = 3;
    cfg.d_model = 16;
    cfg.n_heads = 4;
    cfg.latent_dim = 8;
    cfg.lstm_layers = 2;
    cfg.conv_kernel = 3;
    cfg.decoder_layers = 1;

    TrainConfig tc;
    tc.window = 16;
    tc.p = 0.0;
    tc.epochs = 200;
    tc.t_max = 200;
    tc.noise_sigma = 0.0;
    tc.seed = 47;

    auto data = [&] {
        auto [a, b] = synth::synth_duet(17, cfg.joints, 53, synth::Style::mirror);
        return std::vector<train::DuetSequence>{{a, b}};
    }();

    DuetModel m(cfg, 29);
    Trainer trainer(m, tc);
    auto reports = trainer.train(data);
    REQUIRE(reports.size() == 200);

    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
        first += reports[i].mean.total;
        last += reports[reports.size() - 10 + i].mean.total;
    }
    INFO("first-10 mean " << first / 10.0 << " last-10 mean " << last / 10.0);
    CHECK(last < 0.5 * first);
}

TEST_CASE("full training loss gradients survive the whole model") {
    ModelConfig cfg;
    cfg.frames = 5;
    cfg.joints = 2;
    cfg.dims = 2;
    cfg.d_model = 4;
    cfg.n_heads = 1;
    cfg.latent_dim = 3;
    cfg.lstm_layers = 1;
    cfg.conv_kernel = 3;
    cfg.decoder_layers = 1;
    DuetModel m(cfg, 101);
    TrainConfig tc;

    RandomSource rng(103);
    Tensor x1 = rng.normal_tensor({5, cfg.features()}, 0.5);
    Tensor x2 = rng.normal_tensor({5, cfg.features()}, 0.5);
    Tensor y = rng.normal_tensor({5, cfg.features()}, 0.5);
    Tensor e1 = rng.normal_tensor({1, cfg.latent_dim}, 1.0);
    Tensor e2 = rng.normal_tensor({1, cfg.latent_dim}, 1.0);
    Tensor e3 = rng.normal_tensor({1, cfg.latent_dim}, 1.0);

    auto eval = [&](bool with_grad) {
        nn::Graph g(!with_grad);
        nn::Node* n1 = g.constant(x1);
        nn::Node* n2 = g.constant(x2);
        model::DuetNodes duet = model::duet_forward_nodes(g, m, n1, n2, 2, e1, e2, e3);
        nn::Node* mse = train::mse_loss_nodes(g, duet.prediction, g.constant(y));
        nn::Node* vel = train::velocity_loss_nodes(g, duet.prediction, tc.frames);
        nn::Node* kl = g.add(g.add(train::kl_loss_nodes(g, duet.v1.mu, duet.v1.log_var),
                                   train::kl_loss_nodes(g, duet.v2.mu, duet.v2.log_var)),
                             train::kl_loss_nodes(g, duet.v3.mu, duet.v3.log_var));
        nn::Node* loss = g.add(g.add(g.scale(mse, tc.alpha), g.scale(vel, tc.beta)),
                               g.scale(kl, tc.eta));
        if (with_grad) g.backward(loss);
        return loss->value[0];
    };

    std::vector<nn::Param*> probe = {&m.vae1.embed.w,    &m.vae1.dec_conv,
                                     &m.vae2.mu_head.w,  &m.vae3.logvar_head.b,
                                     &m.vae3.dec_out.w,  &m.decoder2.embed_memory.w,
                                     &m.decoder2.layers[0].cross_attn.v.w,
                                     &m.decoder2.layers[0].ln_ff.gain,
                                     &m.decoder2.out_proj.b};
    auto report = nn::check_gradients(eval, probe);
    INFO("worst " << report.worst_param << "[" << report.worst_index << "] analytic "
                  << report.analytic << " numeric " << report.numeric);
    CHECK(report.max_rel_err < 1e-3);
}
