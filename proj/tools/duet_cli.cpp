// Command-line front end for the duet pipeline. Five subcommands cover the
// full loop: synth (make fixtures), preprocess (detections -> cleaned),
// train (cleaned/synthetic -> checkpoint + report), generate (checkpoint ->
// motion), evaluate (checkpoint + test files -> horizon report).
#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "duet/checkpoint.hpp"
#include "duet/evaluation.hpp"
#include "duet/inference.hpp"
#include "duet/io.hpp"
#include "duet/pose_ingest.hpp"
#include "duet/preprocess.hpp"
#include "duet/synth.hpp"
#include "duet/training.hpp"

namespace {

using namespace duet;

// Outputs a command intends to write. If the command throws before commit(),
// everything declared is removed so a failed run never leaves partial files.
class OutputGuard {
  public:
    void declare(std::string path) { paths_.push_back(std::move(path)); }
    void commit() { committed_ = true; }
    ~OutputGuard() {
        if (committed_) return;
        for (const auto& p : paths_) std::remove(p.c_str());
    }

  private:
    std::vector<std::string> paths_;
    bool committed_ = false;
};

struct PreprocessOpts {
    std::vector<std::string> in;
    std::vector<std::string> out;
    double dct_keep = 0.25;
    double fps = pose::kDefaultFps;
};

int run_preprocess(const PreprocessOpts& o) {
    if (o.out.size() != o.in.size()) {
        throw ArgumentError("--out must name exactly one file per --in file");
    }
    OutputGuard guard;
    for (const auto& p : o.out) guard.declare(p);
    for (std::size_t i = 0; i < o.in.size(); ++i) {
        std::ifstream f(o.in[i], std::ios::binary);
        if (!f) throw IoError("cannot open '" + o.in[i] + "'");
        auto frames = pose::parse_detections(f);
        pose::RepairStats stats;
        auto raw = pose::repair(frames, o.fps, &stats);
        auto [d1, d2] = pose::split_sequence(raw);
        d1 = pose::dct_lowpass(d1, o.dct_keep);
        d2 = pose::dct_lowpass(d2, o.dct_keep);
        io::write_cleaned(d1, d2, o.out[i]);
        std::cout << o.in[i] << ": frames imputed " << stats.frames_imputed << ", swaps fixed "
                  << stats.swaps_fixed << ", ghosts culled " << stats.ghosts_culled << "\n";
    }
    guard.commit();
    return 0;
}

struct TrainOpts {
    std::string config;
    std::vector<std::string> in;
    bool synthetic = false;
    std::size_t synth_count = 4;
    std::size_t synth_length = 0;  // 0 means 2 * window + 1
    std::string style = "lead_follow";
    std::size_t joints = pose::kJoints;  // synthetic data only
    train::TrainConfig tc;
    std::size_t d_model = 64;
    std::size_t heads = 8;
    std::size_t latent = 64;
    std::size_t lstm_layers = 2;
    std::size_t conv_kernel = 5;
    std::size_t decoder_layers = 1;
    std::string checkpoint = "duet_checkpoint.json";
    std::string report = "training_report.csv";
};

// key=value per line; '#' or ';' starts a comment; underscores and hyphens in
// keys are interchangeable.
std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open config file '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    auto trim = [](const std::string& s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(f, line)) {
        auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        std::string t = trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ParseError("config line is not key=value: '" + t + "'");
        }
        std::string key = trim(t.substr(0, eq));
        std::replace(key.begin(), key.end(), '_', '-');
        kv[key] = trim(t.substr(eq + 1));
    }
    return kv;
}

// Applies config-file values to any training option the command line left at
// its default; an explicit flag always wins over the file.
void apply_train_config(const CLI::App& tr, TrainOpts& o) {
    auto u = [](const std::string& v) { return static_cast<std::size_t>(std::stoull(v)); };
    struct Entry {
        const char* flag;
        std::function<void(const std::string&)> set;
    };
    std::map<std::string, Entry> entries = {
        {"epochs", {"--epochs", [&](const std::string& v) { o.tc.epochs = u(v); }}},
        {"seed", {"--seed", [&](const std::string& v) { o.tc.seed = std::stoull(v); }}},
        {"p", {"--p", [&](const std::string& v) { o.tc.p = parse_double(v); }}},
        {"window", {"--window", [&](const std::string& v) { o.tc.window = u(v); }}},
        {"lr", {"--lr", [&](const std::string& v) { o.tc.lr = parse_double(v); }}},
        {"alpha", {"--alpha", [&](const std::string& v) { o.tc.alpha = parse_double(v); }}},
        {"beta", {"--beta", [&](const std::string& v) { o.tc.beta = parse_double(v); }}},
        {"eta", {"--eta", [&](const std::string& v) { o.tc.eta = parse_double(v); }}},
        {"frames", {"--velocity-gap", [&](const std::string& v) { o.tc.frames = u(v); }}},
        {"velocity-gap", {"--velocity-gap", [&](const std::string& v) { o.tc.frames = u(v); }}},
        {"t-max", {"--t-max", [&](const std::string& v) { o.tc.t_max = u(v); }}},
        {"noise-sigma",
         {"--noise-sigma", [&](const std::string& v) { o.tc.noise_sigma = parse_double(v); }}},
        {"d-model", {"--d-model", [&](const std::string& v) { o.d_model = u(v); }}},
        {"heads", {"--heads", [&](const std::string& v) { o.heads = u(v); }}},
        {"latent", {"--latent", [&](const std::string& v) { o.latent = u(v); }}},
        {"lstm-layers", {"--lstm-layers", [&](const std::string& v) { o.lstm_layers = u(v); }}},
        {"conv-kernel", {"--conv-kernel", [&](const std::string& v) { o.conv_kernel = u(v); }}},
        {"decoder-layers",
         {"--decoder-layers", [&](const std::string& v) { o.decoder_layers = u(v); }}},
        {"synth-count", {"--synth-count", [&](const std::string& v) { o.synth_count = u(v); }}},
        {"synth-length", {"--synth-length", [&](const std::string& v) { o.synth_length = u(v); }}},
        {"style", {"--style", [&](const std::string& v) { o.style = v; }}},
        {"joints", {"--joints", [&](const std::string& v) { o.joints = u(v); }}},
        {"checkpoint", {"--checkpoint", [&](const std::string& v) { o.checkpoint = v; }}},
        {"report", {"--report", [&](const std::string& v) { o.report = v; }}},
    };
    for (const auto& [key, value] : parse_config_file(o.config)) {
        auto it = entries.find(key);
        if (it == entries.end()) throw ArgumentError("unknown config key '" + key + "'");
        if (tr.count(it->second.flag) > 0) continue;
        try {
            it->second.set(value);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception&) {
            throw ParseError("config value for '" + key + "' is not a number: '" + value + "'");
        }
    }
}

int run_train(const TrainOpts& o) {
    std::vector<train::DuetSequence> data;
    if (o.synthetic) {
        std::size_t t_len = o.synth_length ? o.synth_length : 2 * o.tc.window + 1;
        synth::Style style = synth::style_from_string(o.style);
        for (std::size_t i = 0; i < o.synth_count; ++i) {
            auto [a, b] = synth::synth_duet(t_len, o.joints, o.tc.seed + i, style);
            data.push_back({std::move(a), std::move(b)});
        }
    } else {
        if (o.in.empty()) throw ArgumentError("train needs --in files or --synthetic");
        for (const auto& p : o.in) {
            auto [a, b] = io::read_cleaned(p);
            data.push_back({std::move(a), std::move(b)});
        }
    }

    model::ModelConfig mc;
    mc.frames = o.tc.window;
    mc.joints = data.front().dancer1.joints();
    mc.dims = data.front().dancer1.dims();
    mc.d_model = o.d_model;
    mc.n_heads = o.heads;
    mc.latent_dim = o.latent;
    mc.lstm_layers = o.lstm_layers;
    mc.conv_kernel = o.conv_kernel;
    mc.decoder_layers = o.decoder_layers;
    model::DuetModel model(mc, o.tc.seed);

    OutputGuard guard;
    guard.declare(o.checkpoint);
    guard.declare(o.report);
    train::Trainer trainer(model, o.tc);
    auto reports = trainer.train(data, o.checkpoint);
    io::write_training_report(reports, o.report);
    const auto& last = reports.back();
    std::cout << "trained " << reports.size() << " epochs on " << data.size()
              << " sequences; final total " << format_double(last.mean.total)
              << ", mode fraction " << format_double(last.mode_fraction) << "\n"
              << "checkpoint: " << o.checkpoint << "\nreport: " << o.report << "\n";
    guard.commit();
    return 0;
}

struct GenerateOpts {
    std::string checkpoint;
    std::string mode = "partner";
    std::string leader;
    int target = 2;
    std::size_t context = 16;
    std::size_t length = 64;
    unsigned long long seed = 0;
    std::string out = "generated.seq";
    std::string animation;  // empty means <out>.anim.csv
};

// First t0 frames of a (T x M x D) sequence, copied verbatim.
Tensor context_prefix(const Tensor& seq, std::size_t t0) {
    if (t0 < 1 || t0 >= seq.dim(0)) {
        throw ArgumentError("--context must satisfy 1 <= t0 < sequence length");
    }
    Tensor out({t0, seq.dim(1), seq.dim(2)});
    std::copy(seq.values().begin(),
              seq.values().begin() + static_cast<std::ptrdiff_t>(out.numel()),
              out.values().begin());
    return out;
}

int run_generate(const GenerateOpts& o) {
    model::DuetModel m = model::load_checkpoint(o.checkpoint);
    std::string anim = o.animation.empty() ? o.out + ".anim.csv" : o.animation;
    OutputGuard guard;
    guard.declare(o.out);
    guard.declare(anim);
    RandomSource rng(o.seed);

    if (o.mode == "duet") {
        auto res = infer::generate_duet(m, o.length, rng);
        io::write_cleaned({res.dancer1, m.fps}, {res.dancer2, m.fps}, o.out);
        io::write_animation(res.dancer1, res.dancer2, anim);
        std::cout << "wrote " << o.out << " (" << o.length << " frames, both dancers sampled)\n"
                  << "animation: " << anim << "\n";
    } else {
        if (o.leader.empty()) throw ArgumentError("partner mode needs --leader");
        auto [d1, d2] = io::read_cleaned(o.leader);
        const pose::JointSequence& lead = (o.target == 2) ? d1 : d2;
        const pose::JointSequence& truth = (o.target == 2) ? d2 : d1;
        Tensor context = context_prefix(truth.data, o.context);
        auto res = infer::generate_partner(m, lead.data, context, o.target, rng);
        pose::JointSequence gen{res.sequence, lead.fps};
        if (o.target == 2) {
            io::write_cleaned(lead, gen, o.out);
            io::write_animation(lead.data, gen.data, anim);
        } else {
            io::write_cleaned(gen, lead, o.out);
            io::write_animation(gen.data, lead.data, anim);
        }
        std::cout << "wrote " << o.out << " (" << res.sequence.dim(0) << " frames, dancer "
                  << o.target << " generated from frame " << o.context << ")\n"
                  << "animation: " << anim << "\n";
    }
    guard.commit();
    return 0;
}

struct EvaluateOpts {
    std::string checkpoint;
    std::vector<std::string> in;
    eval::EvalConfig ec;
    unsigned long long seed = 0;
    std::string out = "horizon_report.csv";
};

int run_evaluate(const EvaluateOpts& o) {
    model::DuetModel m = model::load_checkpoint(o.checkpoint);
    std::vector<train::DuetSequence> test;
    for (const auto& p : o.in) {
        auto [a, b] = io::read_cleaned(p);
        test.push_back({std::move(a), std::move(b)});
    }
    OutputGuard guard;
    guard.declare(o.out);
    RandomSource rng(o.seed);
    auto generate = eval::model_generator(m, o.seed + 1);
    auto rows = eval::horizon_mse(test, o.ec, generate, rng);
    eval::emit_report(rows, o.out);
    for (const auto& r : rows) {
        std::cout << "horizon " << r.horizon << ": mse " << format_double(r.mse) << "\n";
    }
    std::cout << "report: " << o.out << "\n";
    guard.commit();
    return 0;
}

struct SynthOpts {
    std::string out;
    std::string detections;
    std::string style = "mirror";
    std::size_t length = 64;
    std::size_t joints = pose::kJoints;
    unsigned long long seed = 0;
    double fps = pose::kDefaultFps;
    std::vector<std::size_t> swap_frames;
    std::vector<std::size_t> drop_frames;
    std::vector<std::size_t> ghost_frames;
    double jitter = 0.0;
};

int run_synth(const SynthOpts& o) {
    if (o.out.empty() && o.detections.empty()) {
        throw ArgumentError("synth needs --out and/or --detections");
    }
    auto [a, b] = synth::synth_duet(o.length, o.joints, o.seed, synth::style_from_string(o.style),
                                    o.fps);
    OutputGuard guard;
    if (!o.out.empty()) guard.declare(o.out);
    if (!o.detections.empty()) guard.declare(o.detections);
    if (!o.out.empty()) {
        io::write_cleaned(a, b, o.out);
        std::cout << "wrote " << o.out << " (" << o.length << " frames, " << o.joints
                  << " joints, style " << o.style << ")\n";
    }
    if (!o.detections.empty()) {
        synth::CorruptionSpec spec{o.swap_frames, o.drop_frames, o.ghost_frames, o.jitter};
        auto res = synth::corrupt(a, b, spec, o.seed + 1);
        io::write_detections(res.frames, o.detections);
        std::cout << "wrote " << o.detections << " (swaps " << o.swap_frames.size() << ", drops "
                  << o.drop_frames.size() << ", ghosts " << o.ghost_frames.size() << ", jitter "
                  << format_double(o.jitter) << ")\n";
    }
    guard.commit();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"duet: two-dancer pose cleaning, training, generation, and evaluation"};
    app.require_subcommand(1);

    PreprocessOpts po;
    auto* pre = app.add_subcommand("preprocess", "repair raw detections into cleaned sequences");
    pre->add_option("--in", po.in, "input detection files (JSONL)")
        ->required()
        ->check(CLI::ExistingFile);
    pre->add_option("--out", po.out, "output cleaned files, one per input")->required();
    pre->add_option("--dct-keep", po.dct_keep, "fraction of DCT coefficients kept (1.0 = no smoothing)")->capture_default_str();
    pre->add_option("--fps", po.fps, "frame rate recorded in the output")->capture_default_str();

    TrainOpts to;
    auto* tr = app.add_subcommand("train", "train a duet model and write checkpoint + report");
    tr->add_option("--config", to.config,
               "config file (key=value lines; keys match flag names, flags override)")
        ->check(CLI::ExistingFile);
    tr->add_option("--in", to.in, "cleaned sequence files")->check(CLI::ExistingFile);
    tr->add_flag("--synthetic", to.synthetic, "train on generated synthetic duets instead of files");
    tr->add_option("--synth-count", to.synth_count, "synthetic duets to generate")->capture_default_str();
    tr->add_option("--synth-length", to.synth_length,
                   "frames per synthetic duet (0 = 2*window+1)")->capture_default_str();
    tr->add_option("--style", to.style, "synthetic duet style (mirror|orbit|lead_follow)")->capture_default_str()
        ->check(CLI::IsMember({"mirror", "orbit", "lead_follow"}));
    tr->add_option("--joints", to.joints, "joint count for synthetic data")->capture_default_str();
    tr->add_option("--epochs", to.tc.epochs, "training epochs")->capture_default_str();
    tr->add_option("--seed", to.tc.seed, "seed for model init, data order, and noise")->capture_default_str();
    tr->add_option("--p", to.tc.p, "probability of a focused (single-dancer) step")->capture_default_str();
    tr->add_option("--window", to.tc.window, "training window length T")->capture_default_str();
    tr->add_option("--lr", to.tc.lr, "base learning rate")->capture_default_str();
    tr->add_option("--alpha", to.tc.alpha, "reconstruction loss weight")->capture_default_str();
    tr->add_option("--beta", to.tc.beta, "velocity loss weight")->capture_default_str();
    tr->add_option("--eta", to.tc.eta, "KL loss weight")->capture_default_str();
    tr->add_option("--velocity-gap", to.tc.frames, "frame gap for the velocity loss")->capture_default_str();
    tr->add_option("--t-max", to.tc.t_max, "cosine annealing period in epochs")->capture_default_str();
    tr->add_option("--noise-sigma", to.tc.noise_sigma, "Gaussian augmentation scale")->capture_default_str();
    tr->add_option("--d-model", to.d_model, "model width")->capture_default_str();
    tr->add_option("--heads", to.heads, "attention heads")->capture_default_str();
    tr->add_option("--latent", to.latent, "VAE latent dimension")->capture_default_str();
    tr->add_option("--lstm-layers", to.lstm_layers, "LSTM layers per coder")->capture_default_str();
    tr->add_option("--conv-kernel", to.conv_kernel, "decoder smoothing kernel size")->capture_default_str();
    tr->add_option("--decoder-layers", to.decoder_layers, "transformer decoder layers")->capture_default_str();
    tr->add_option("--checkpoint", to.checkpoint, "checkpoint output path")->capture_default_str();
    tr->add_option("--report", to.report, "per-epoch CSV output path")->capture_default_str();

    GenerateOpts go;
    auto* ge = app.add_subcommand("generate", "roll out motion from a trained checkpoint");
    ge->add_option("--checkpoint", go.checkpoint, "trained checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    ge->add_option("--mode", go.mode, "partner (conditioned) or duet (both sampled)")->capture_default_str()
        ->check(CLI::IsMember({"partner", "duet"}));
    ge->add_option("--leader", go.leader, "cleaned file supplying the leading dancer")
        ->check(CLI::ExistingFile);
    ge->add_option("--target", go.target, "dancer to generate (1 or 2; the other leads)")->capture_default_str()
        ->check(CLI::IsMember({1, 2}));
    ge->add_option("--context", go.context, "ground-truth frames given to the generated dancer")->capture_default_str();
    ge->add_option("--length", go.length, "frames to generate in duet mode")->capture_default_str();
    ge->add_option("--seed", go.seed, "sampling seed")->capture_default_str();
    ge->add_option("--out", go.out, "cleaned output path")->capture_default_str();
    ge->add_option("--animation", go.animation, "animation CSV path (default <out>.anim.csv)");

    EvaluateOpts eo;
    auto* ev = app.add_subcommand("evaluate", "measure horizon MSE on held-out duets");
    ev->add_option("--checkpoint", eo.checkpoint, "trained checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    ev->add_option("--in", eo.in, "cleaned test files")->required()->check(CLI::ExistingFile);
    ev->add_option("--horizons", eo.ec.horizons, "comma-separated frame horizons")->capture_default_str()
        ->delimiter(',');
    ev->add_option("--sequences", eo.ec.n_sequences, "windows sampled per evaluation")->capture_default_str();
    ev->add_option("--window", eo.ec.window, "evaluation window length")->capture_default_str();
    ev->add_option("--context", eo.ec.context, "ground-truth prefix t0")->capture_default_str();
    ev->add_option("--target", eo.ec.target_dancer, "dancer to generate")->capture_default_str()
        ->check(CLI::IsMember({1, 2}));
    ev->add_option("--seed", eo.seed, "window sampling and rollout seed")->capture_default_str();
    ev->add_option("--out", eo.out, "report CSV path")->capture_default_str();

    SynthOpts so;
    auto* sy = app.add_subcommand("synth", "generate synthetic duets and optional corrupted detections");
    sy->add_option("--out", so.out, "cleaned output path for the clean pair");
    sy->add_option("--detections", so.detections, "JSONL output path for corrupted detections");
    sy->add_option("--style", so.style, "duet style (mirror|orbit|lead_follow)")->capture_default_str()
        ->check(CLI::IsMember({"mirror", "orbit", "lead_follow"}));
    sy->add_option("--length", so.length, "frames")->capture_default_str();
    sy->add_option("--joints", so.joints, "joints per dancer (detections need 29)")->capture_default_str();
    sy->add_option("--seed", so.seed, "generation seed")->capture_default_str();
    sy->add_option("--fps", so.fps, "frame rate")->capture_default_str();
    sy->add_option("--swap-frames", so.swap_frames, "frames whose detection order is swapped")
        ->delimiter(',');
    sy->add_option("--drop-frames", so.drop_frames, "frames losing all detections")->delimiter(',');
    sy->add_option("--ghost-frames", so.ghost_frames, "frames gaining a low-score ghost")
        ->delimiter(',');
    sy->add_option("--jitter", so.jitter, "Gaussian jitter baked into the clean pair")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (pre->parsed()) return run_preprocess(po);
        if (tr->parsed()) {
            if (!to.config.empty()) apply_train_config(*tr, to);
            return run_train(to);
        }
        if (ge->parsed()) return run_generate(go);
        if (ev->parsed()) return run_evaluate(eo);
        if (sy->parsed()) return run_synth(so);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
