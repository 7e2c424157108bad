#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "modec/curve.hpp"
#include "modec/curve_train.hpp"
#include "modec/data_io.hpp"
#include "modec/eval.hpp"
#include "modec/fge.hpp"
#include "modec/mlp.hpp"
#include "modec/trivial.hpp"

namespace modec::cli {

using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect_keys(const json& j, const std::string& section,
                 const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError("section '" + section + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.contains(key))
            throw ConfigError("unknown key '" + key + "' in section '" + section + "'");
    }
}

const json& require_section(const json& root, const std::string& name) {
    if (!root.contains(name))
        throw ConfigError("config is missing required section '" + name + "'");
    return root.at(name);
}

MLPConfig parse_net(const json& root) {
    const json& j = require_section(root, "net");
    expect_keys(j, "net", {"layer_sizes", "batch_norm", "l2_coeff"});
    MLPConfig config;
    config.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    config.batch_norm = j.value("batch_norm", false);
    config.l2_coeff = j.value("l2_coeff", 0.0);
    config.validate();
    return config;
}

struct DataBundle {
    Batch train;
    Batch test;
    Batch heldout;
    std::size_t class_count = 0;
};

DataBundle parse_and_load_data(const json& root, std::uint64_t seed) {
    const json& j = require_section(root, "data");
    expect_keys(j, "data",
                {"source", "n", "noise", "path", "label_column", "train_fraction",
                 "test_fraction", "normalize"});
    const std::string source = j.at("source").get<std::string>();
    Dataset full;
    if (source == "two_spirals" || source == "gaussian_blobs") {
        const auto kind = source == "two_spirals" ? SyntheticKind::two_spirals
                                                  : SyntheticKind::gaussian_blobs;
        full = gen_synthetic(kind, j.value("n", std::size_t{1000}), j.value("noise", 0.1), seed);
    } else if (source == "csv") {
        if (!j.contains("path")) throw ConfigError("data.source=csv requires data.path");
        full = load_csv(j.at("path").get<std::string>(), j.value("label_column", std::size_t{0}));
    } else {
        throw ConfigError("data.source must be two_spirals, gaussian_blobs or csv");
    }
    const double train_f = j.value("train_fraction", 0.6);
    const double test_f = j.value("test_fraction", 0.3);
    SplitResult split = split_dataset(full, train_f, test_f, seed);
    if (j.value("normalize", true)) {
        const Normalization norm = compute_normalization(split.train.data);
        apply_normalization(split.train.data, norm);
        if (split.test.data.size() > 0) apply_normalization(split.test.data, norm);
        if (split.heldout.data.size() > 0) apply_normalization(split.heldout.data, norm);
    }
    DataBundle bundle;
    bundle.train = std::move(split.train.data);
    bundle.test = std::move(split.test.data);
    bundle.heldout = std::move(split.heldout.data);
    bundle.class_count = full.class_count;
    return bundle;
}

PretrainConfig parse_train(const json& root) {
    const json& j = require_section(root, "train");
    expect_keys(j, "train", {"epochs", "batch_size", "learning_rate", "momentum"});
    PretrainConfig cfg;
    cfg.epochs = j.value("epochs", std::size_t{20});
    cfg.batch_size = j.value("batch_size", std::size_t{64});
    cfg.learning_rate = j.value("learning_rate", 0.05);
    cfg.momentum = j.value("momentum", 0.9);
    if (cfg.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    return cfg;
}

struct CurveSection {
    CurveKind kind = CurveKind::polychain;
    std::size_t n_bends = 1;
    CurveTrainConfig train;
    std::size_t grid_size = 121;
    double jitter = 0.0;
};

CurveKind parse_kind(const std::string& kind) {
    if (kind == "segment") return CurveKind::segment;
    if (kind == "polychain") return CurveKind::polychain;
    if (kind == "bezier") return CurveKind::bezier;
    throw ConfigError("curve.kind must be segment, polychain or bezier");
}

CurveSection parse_curve(const json& root, std::uint64_t seed) {
    const json& j = require_section(root, "curve");
    expect_keys(j, "curve",
                {"kind", "n_bends", "iterations", "batch_size", "learning_rate", "momentum",
                 "grid_size", "jitter"});
    CurveSection sec;
    sec.kind = parse_kind(j.value("kind", std::string{"polychain"}));
    sec.n_bends = j.value("n_bends", std::size_t{1});
    sec.train.iterations = j.value("iterations", std::size_t{3000});
    sec.train.batch_size = j.value("batch_size", std::size_t{64});
    sec.train.learning_rate = j.value("learning_rate", 0.01);
    sec.train.momentum = j.value("momentum", 0.9);
    sec.train.seed = seed;
    sec.grid_size = j.value("grid_size", std::size_t{121});
    sec.jitter = j.value("jitter", 0.0);
    sec.train.validate();
    if (sec.grid_size < 2) throw ConfigError("curve.grid_size must be >= 2");
    return sec;
}

struct FGESection {
    FGERunConfig run;
    double pretrain_fraction = 0.8;
    bool include_start = true;
};

FGESection parse_fge(const json& root, std::uint64_t seed) {
    const json& j = require_section(root, "fge");
    expect_keys(j, "fge",
                {"alpha1", "alpha2", "cycle_length", "cycles", "batch_size", "momentum",
                 "pretrain_fraction", "include_start"});
    FGESection sec;
    sec.run.schedule.alpha1 = j.value("alpha1", 0.05);
    sec.run.schedule.alpha2 = j.value("alpha2", 0.0005);
    sec.run.schedule.cycle_length = j.value("cycle_length", std::size_t{40});
    sec.run.schedule.validate();  // rejects alpha1 <= alpha2 and odd c up front
    sec.run.n_iterations = j.value("cycles", std::size_t{6}) * sec.run.schedule.cycle_length;
    sec.run.batch_size = j.value("batch_size", std::size_t{64});
    sec.run.momentum = j.value("momentum", 0.0);
    sec.run.seed = seed;
    sec.pretrain_fraction = j.value("pretrain_fraction", 0.8);
    sec.include_start = j.value("include_start", true);
    return sec;
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string{"config is not valid JSON: "} + e.what());
    }
    expect_keys(j, "<root>",
                {"seed", "net", "data", "train", "curve", "fge", "plane", "trivial", "sweep"});
    return j;
}

ReportFormat parse_format(const std::string& format) {
    if (format == "csv") return ReportFormat::csv;
    if (format == "json") return ReportFormat::json;
    throw ConfigError("format must be csv or json");
}

void check_same_architecture(const MLPConfig& a, const MLPConfig& b, const std::string& what) {
    if (a.layer_sizes != b.layer_sizes || a.batch_norm != b.batch_norm)
        throw ConfigError(what + ": checkpoint architectures differ");
}

// ---- subcommands ------------------------------------------------------

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::uint64_t seed(const json& cfg) const {
        if (seed_override) return *seed_override;
        return cfg.value("seed", std::uint64_t{0});
    }
};

int cmd_train(const CommonArgs& common, const std::string& out_path) {
    const json cfg = load_config(common.config_path);
    const std::uint64_t seed = common.seed(cfg);
    const MLPConfig net = parse_net(cfg);
    const DataBundle data = parse_and_load_data(cfg, seed);
    if (net.layer_sizes.back() < data.class_count)
        throw ConfigError("net output width is smaller than the number of classes");
    const PretrainConfig train_cfg = parse_train(cfg);
    const WeightVector w = pretrain(net, data.train, train_cfg, seed);
    save_checkpoint(w, net, seed, out_path);

    std::optional<BatchNormStats> stats;
    if (net.batch_norm) stats = bn_recompute_stats(w, net, data.train);
    const BatchNormStats* sp = stats ? &*stats : nullptr;
    std::cout << "trained model written to " << out_path << "\n"
              << "train error " << predict_eval(w, net, data.train, sp).error_rate;
    if (data.test.size() > 0)
        std::cout << ", test error " << predict_eval(w, net, data.test, sp).error_rate;
    std::cout << "\n";
    return 0;
}

int cmd_connect(const CommonArgs& common, const std::string& start_path,
                const std::string& end_path, const std::string& out_path) {
    const json cfg = load_config(common.config_path);
    const std::uint64_t seed = common.seed(cfg);
    const CurveSection curve = parse_curve(cfg, seed);
    if (curve.kind == CurveKind::segment)
        throw ConfigError(
            "a segment has no trainable parameters; use curve-eval to evaluate the "
            "straight line between two checkpoints");

    const LoadedCheckpoint start = load_checkpoint(start_path);
    const LoadedCheckpoint end = load_checkpoint(end_path);
    check_same_architecture(start.config, end.config, "connect");
    const DataBundle data = parse_and_load_data(cfg, seed);

    CurveSpec spec;
    spec.kind = curve.kind;
    spec.start = start.weights;
    spec.end = end.weights;
    spec.bends = init_bends(spec.start, spec.end, curve.n_bends,
                            curve.jitter > 0.0 ? std::optional<std::uint64_t>{seed}
                                               : std::nullopt,
                            curve.jitter);
    const CurveTrainResult result = train_curve(spec, start.config, data.train, curve.train);
    save_curve(result.spec, start.config, out_path);
    std::cout << "curve written to " << out_path << "\n"
              << "final minibatch loss " << result.loss_history.back() << "\n";
    return 0;
}

int cmd_curve_eval(const CommonArgs& common, const std::string& curve_path,
                   const std::string& out_path, const std::string& format,
                   std::optional<std::size_t> grid_override) {
    const json cfg = load_config(common.config_path);
    const std::uint64_t seed = common.seed(cfg);
    const ReportFormat fmt = parse_format(format);
    const LoadedCurve curve = load_curve(curve_path);
    const DataBundle data = parse_and_load_data(cfg, seed);
    std::size_t grid_size = 121;
    if (cfg.contains("curve")) grid_size = parse_curve(cfg, seed).grid_size;
    if (grid_override) grid_size = *grid_override;
    if (grid_size < 2) throw ConfigError("grid size must be >= 2");

    const CurveEvalReport rep =
        curve_report(curve.spec, curve.config, data.train, data.test, grid_size);
    write_curve_report(rep, out_path, fmt);
    std::cout << "curve report written to " << out_path << "\n"
              << "train loss max " << rep.train_loss_agg.max << " int "
              << rep.train_loss_agg.integral << "; test error max " << rep.test_error_agg.max
              << "; length ratio " << rep.length_ratio << "\n";
    return 0;
}

int cmd_plane(const CommonArgs& common, const std::vector<std::string>& ckpt_paths,
              const std::string& out_path, const std::string& format, std::size_t threads) {
    const json cfg = load_config(common.config_path);
    const std::uint64_t seed = common.seed(cfg);
    std::size_t resolution = 25;
    double margin = 0.2;
    if (cfg.contains("plane")) {
        const json& j = cfg.at("plane");
        expect_keys(j, "plane", {"resolution", "margin"});
        resolution = j.value("resolution", resolution);
        margin = j.value("margin", margin);
    }
    const LoadedCheckpoint a = load_checkpoint(ckpt_paths[0]);
    const LoadedCheckpoint b = load_checkpoint(ckpt_paths[1]);
    const LoadedCheckpoint c = load_checkpoint(ckpt_paths[2]);
    check_same_architecture(a.config, b.config, "plane");
    check_same_architecture(a.config, c.config, "plane");
    const DataBundle data = parse_and_load_data(cfg, seed);
    const PlaneGrid grid = plane_grid(a.weights, b.weights, c.weights, a.config, data.train,
                                      resolution, margin, threads);
    write_plane_grid(grid, out_path, parse_format(format));
    std::cout << "plane grid written to " << out_path << "\n"
              << "anchors: w1 (0,0), w2 (" << grid.x2 << ",0), w3 (" << grid.x3 << ","
              << grid.y3 << ")\n";
    return 0;
}

int cmd_fge(const CommonArgs& common, const std::string& out_dir) {
    const json cfg = load_config(common.config_path);
    const std::uint64_t seed = common.seed(cfg);
    const MLPConfig net = parse_net(cfg);
    const DataBundle data = parse_and_load_data(cfg, seed);
    PretrainConfig pre = parse_train(cfg);
    const FGESection fge = parse_fge(cfg, seed);
    pre.epochs = static_cast<std::size_t>(
        std::llround(fge.pretrain_fraction * static_cast<double>(pre.epochs)));

    const WeightVector start = pretrain(net, data.train, pre, seed);
    const auto checkpoints = fge_run(start, net, data.train, fge.run);
    if (checkpoints.empty()) throw std::runtime_error("FGE collected no checkpoints");

    std::filesystem::create_directories(out_dir);
    std::vector<std::string> files;
    {
        const std::string path = out_dir + "/pretrained.ckpt";
        save_checkpoint(start, net, seed, path);
        files.push_back(path);
    }
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        const std::string path = out_dir + "/fge_" + std::to_string(i) + ".ckpt";
        save_checkpoint(checkpoints[i], net, seed, path);
        files.push_back(path);
    }

    std::vector<EnsembleMember> members;
    const auto add_member = [&](const WeightVector& w) {
        EnsembleMember m;
        m.weights = w;
        if (net.batch_norm) m.stats = bn_recompute_stats(w, net, data.train);
        members.push_back(std::move(m));
    };
    if (fge.include_start) add_member(start);
    for (const auto& ck : checkpoints) add_member(ck);

    std::optional<BatchNormStats> start_stats;
    if (net.batch_norm) start_stats = bn_recompute_stats(start, net, data.train);
    const EvalResult single =
        predict_eval(start, net, data.test, start_stats ? &*start_stats : nullptr);
    const EvalResult ensemble = ensemble_predict(members, net, data.test);
    std::vector<std::optional<BatchNormStats>> ck_stats(checkpoints.size());
    if (net.batch_norm)
        for (std::size_t i = 0; i < checkpoints.size(); ++i)
            ck_stats[i] = bn_recompute_stats(checkpoints[i], net, data.train);
    double pair_disagreement = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i + 1 < checkpoints.size(); ++i)
        for (std::size_t j = i + 1; j < checkpoints.size(); ++j) {
            pair_disagreement +=
                disagreement(checkpoints[i], checkpoints[j], net, data.test,
                             ck_stats[i] ? &*ck_stats[i] : nullptr,
                             ck_stats[j] ? &*ck_stats[j] : nullptr);
            ++pairs;
        }
    if (pairs > 0) pair_disagreement /= static_cast<double>(pairs);

    json manifest{{"seed", seed},
                  {"schedule",
                   {{"alpha1", fge.run.schedule.alpha1},
                    {"alpha2", fge.run.schedule.alpha2},
                    {"cycle_length", fge.run.schedule.cycle_length}}},
                  {"n_iterations", fge.run.n_iterations},
                  {"include_start", fge.include_start},
                  {"checkpoints", files},
                  {"single_test_error", single.error_rate},
                  {"ensemble_test_error", ensemble.error_rate},
                  {"ensemble_test_nll", ensemble.mean_nll},
                  {"mean_pairwise_disagreement", pair_disagreement}};
    {
        std::ofstream out(out_dir + "/manifest.json");
        if (!out) throw std::runtime_error("cannot write manifest");
        out << manifest.dump(2) << "\n";
    }
    if (checkpoints.size() >= 2) {
        const ChainReport chain =
            fge_chain_report(checkpoints, net, data.train, data.test, 11);
        write_chain_report(chain, out_dir + "/chain.csv", ReportFormat::csv);
    }
    std::cout << "FGE run written to " << out_dir << "\n"
              << "single test error " << single.error_rate << ", ensemble test error "
              << ensemble.error_rate << ", mean pairwise disagreement " << pair_disagreement
              << "\n";
    return 0;
}

int cmd_ensemble(const CommonArgs& common, const std::vector<std::string>& ckpt_paths,
                 bool temperature_fit, const std::string& out_path) {
    const json cfg = load_config(common.config_path);
    const std::uint64_t seed = common.seed(cfg);
    if (ckpt_paths.empty()) throw ConfigError("ensemble needs at least one checkpoint");
    std::vector<LoadedCheckpoint> loaded;
    for (const auto& path : ckpt_paths) loaded.push_back(load_checkpoint(path));
    for (const auto& l : loaded)
        check_same_architecture(loaded.front().config, l.config, "ensemble");
    const MLPConfig& net = loaded.front().config;
    const DataBundle data = parse_and_load_data(cfg, seed);

    std::vector<EnsembleMember> members;
    for (const auto& l : loaded) {
        EnsembleMember m;
        m.weights = l.weights;
        if (net.batch_norm) m.stats = bn_recompute_stats(l.weights, net, data.train);
        members.push_back(std::move(m));
    }
    const EvalResult plain = ensemble_predict(members, net, data.test);

    json out{{"checkpoints", ckpt_paths},
             {"test_error", plain.error_rate},
             {"test_nll", plain.mean_nll}};

    if (temperature_fit) {
        if (data.heldout.size() == 0)
            throw ConfigError(
                "--temperature-fit needs a held-out split; lower data.train_fraction + "
                "data.test_fraction below 1");
        const auto logits_for = [&](const Batch& batch) {
            std::vector<Matrix> sets;
            for (const auto& m : members)
                sets.push_back(
                    forward(m.weights, net, batch,
                            net.batch_norm ? BnMode::eval : BnMode::train,
                            m.stats ? &*m.stats : nullptr));
            return sets;
        };
        const TemperatureFit fit = fit_temperature(logits_for(data.heldout), data.heldout.labels);
        const auto test_logits = logits_for(data.test);
        // scaled ensemble on the test split
        Matrix avg(data.test.size(), net.n_classes());
        for (const auto& logits : test_logits) {
            Matrix scaled = logits;
            for (double& v : scaled.data) v /= fit.temperature;
            const Matrix p = softmax_rows(scaled);
            for (std::size_t i = 0; i < avg.data.size(); ++i) avg.data[i] += p.data[i];
        }
        for (double& v : avg.data) v /= static_cast<double>(test_logits.size());
        std::size_t wrong = 0;
        double nll = 0.0;
        for (std::size_t i = 0; i < data.test.size(); ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < avg.cols; ++j)
                if (avg(i, j) > avg(i, best)) best = j;
            if (best != static_cast<std::size_t>(data.test.labels[i])) ++wrong;
            nll -= std::log(
                std::max(avg(i, static_cast<std::size_t>(data.test.labels[i])), 1e-300));
        }
        out["temperature"] = fit.temperature;
        out["temperature_degenerate"] = fit.degenerate;
        out["heldout_nll_scaled"] = fit.nll;
        out["heldout_nll_unscaled"] =
            ensemble_nll_at_temperature(logits_for(data.heldout), data.heldout.labels, 1.0);
        out["test_error_scaled"] = static_cast<double>(wrong) / data.test.size();
        out["test_nll_scaled"] = nll / data.test.size();
    }

    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw std::runtime_error("cannot write report: " + out_path);
        f << out.dump(2) << "\n";
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_trivial(const CommonArgs& common, const std::string& ckpt_path,
                const std::string& out_path) {
    const json cfg = load_config(common.config_path);
    const std::uint64_t seed = common.seed(cfg);
    const LoadedCheckpoint ck = load_checkpoint(ckpt_path);
    const DataBundle data = parse_and_load_data(cfg, seed);
    std::vector<double> grid;
    if (cfg.contains("trivial")) {
        const json& j = cfg.at("trivial");
        expect_keys(j, "trivial", {"t_grid"});
        grid = j.value("t_grid", grid);
        for (double t : grid)
            if (!(t > 0.0 && t <= 1.0)) throw ConfigError("trivial.t_grid must lie in (0, 1]");
    }
    if (grid.empty())
        for (int k = 1; k <= 10; ++k) grid.push_back(k / 10.0);

    const TrivialCheckReport rep = trivial_check(ck.weights, ck.config, data.train, grid);
    json out{{"argmax_invariant", rep.argmax_invariant},
             {"logit_ratio_error", rep.logit_ratio_error},
             {"t_grid", rep.t_grid},
             {"loss_at_t", rep.loss_at_t}};
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw std::runtime_error("cannot write report: " + out_path);
        f << out.dump(2) << "\n";
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_sweep(const CommonArgs& common, const std::string& out_path) {
    const json cfg = load_config(common.config_path);
    const std::uint64_t seed = common.seed(cfg);
    const MLPConfig base_net = parse_net(cfg);
    const DataBundle data = parse_and_load_data(cfg, seed);
    const PretrainConfig train_cfg = parse_train(cfg);
    CurveSection curve = parse_curve(cfg, seed);
    if (curve.kind == CurveKind::segment)
        throw ConfigError("sweep trains connecting curves; curve.kind cannot be segment");

    std::vector<double> k_values{0.3, 0.5, 0.8, 1.0};
    if (cfg.contains("sweep")) {
        const json& j = cfg.at("sweep");
        expect_keys(j, "sweep", {"k_values"});
        k_values = j.value("k_values", k_values);
        for (double k : k_values)
            if (k <= 0.0) throw ConfigError("sweep.k_values must be positive");
    }

    std::ostringstream csv;
    csv << "k,param_count,endpoint_max_loss,curve_max_loss,excess_loss,length_ratio\n";
    std::cout << "k\tparams\tendpoint_max\tcurve_max\texcess\tratio\n";
    for (std::size_t ki = 0; ki < k_values.size(); ++ki) {
        const double k = k_values[ki];
        MLPConfig net = base_net;
        for (std::size_t l = 1; l + 1 < net.layer_sizes.size(); ++l)
            net.layer_sizes[l] = std::max<std::size_t>(
                2, static_cast<std::size_t>(std::llround(k * base_net.layer_sizes[l])));

        const std::uint64_t s1 = seed + 1000 * (ki + 1);
        const std::uint64_t s2 = s1 + 500;
        const WeightVector w1 = pretrain(net, data.train, train_cfg, s1);
        const WeightVector w2 = pretrain(net, data.train, train_cfg, s2);

        CurveSpec spec;
        spec.kind = curve.kind;
        spec.start = w1;
        spec.end = w2;
        spec.bends = init_bends(w1, w2, curve.n_bends);
        CurveTrainConfig ct = curve.train;
        ct.seed = s1 + 77;
        const CurveSpec trained = train_curve(spec, net, data.train, ct).spec;

        const CurveEvalReport rep =
            curve_report(trained, net, data.train, data.test, curve.grid_size);
        const double endpoint_max =
            std::max(rep.train_loss.front(), rep.train_loss.back());
        const double excess = rep.train_loss_agg.max - endpoint_max;
        csv << k << ',' << w1.values.size() << ',' << endpoint_max << ','
            << rep.train_loss_agg.max << ',' << excess << ',' << rep.length_ratio << '\n';
        std::cout << k << '\t' << w1.values.size() << '\t' << endpoint_max << '\t'
                  << rep.train_loss_agg.max << '\t' << excess << '\t' << rep.length_ratio
                  << '\n';
    }
    std::ofstream f(out_path);
    if (!f) throw std::runtime_error("cannot write sweep table: " + out_path);
    f << csv.str();
    std::cout << "sweep table written to " << out_path << "\n";
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"mode-connectivity curves and fast geometric ensembling for small MLPs"};
    app.require_subcommand(1);
    app.fallthrough();  // --config/--seed may follow the subcommand name

    CommonArgs common;
    app.add_option("--config", common.config_path, "JSON run configuration")->required(false);
    std::uint64_t seed_value = 0;
    const auto* seed_opt =
        app.add_option("--seed", seed_value, "root seed overriding the config value");

    std::string out_path, format = "csv", start_path, end_path, curve_path, ckpt_path,
                out_dir = "fge_out";
    std::vector<std::string> ckpt_list;
    std::size_t grid_size = 0;
    bool temperature_fit = false;

    auto* train = app.add_subcommand("train", "train a single model and write a checkpoint");
    train->add_option("--out", out_path, "checkpoint path")->required();

    auto* connect = app.add_subcommand("connect", "train a connecting curve between two checkpoints");
    connect->add_option("--start", start_path, "first endpoint checkpoint")->required();
    connect->add_option("--end", end_path, "second endpoint checkpoint")->required();
    connect->add_option("--out", out_path, "curve file path")->required();

    auto* curve_eval = app.add_subcommand("curve-eval", "evaluate a curve on the t grid");
    curve_eval->add_option("--curve", curve_path, "curve file")->required();
    curve_eval->add_option("--out", out_path, "report path")->required();
    curve_eval->add_option("--format", format, "csv or json");
    curve_eval->add_option("--grid-size", grid_size, "override the evaluation grid size");

    auto* plane = app.add_subcommand("plane", "loss surface in the plane of three checkpoints");
    plane->add_option("--checkpoints", ckpt_list, "three checkpoint files")
        ->expected(3)
        ->required();
    plane->add_option("--out", out_path, "grid output path")->required();
    plane->add_option("--format", format, "csv or json");
    std::size_t threads = 1;
    plane->add_option("--threads", threads, "worker cap for grid evaluation");

    auto* fge = app.add_subcommand("fge", "pretrain, run FGE, evaluate the ensemble");
    fge->add_option("--out-dir", out_dir, "output directory for manifest and checkpoints");

    auto* ensemble = app.add_subcommand("ensemble", "evaluate an ensemble of checkpoints");
    ensemble->add_option("checkpoints", ckpt_list, "checkpoint files")->required();
    ensemble->add_flag("--temperature-fit", temperature_fit,
                       "fit a shared temperature on the held-out split");
    ensemble->add_option("--out", out_path, "report path (JSON)");

    auto* trivial = app.add_subcommand("trivial", "run the rescaling-path control check");
    trivial->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    trivial->add_option("--out", out_path, "report path (JSON)");

    auto* sweep = app.add_subcommand("sweep", "width-factor sweep of curve connectability");
    sweep->add_option("--out", out_path, "CSV table path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    if (seed_opt->count() > 0) common.seed_override = seed_value;

    try {
        if (train->parsed()) return cmd_train(common, out_path);
        if (connect->parsed()) return cmd_connect(common, start_path, end_path, out_path);
        if (curve_eval->parsed())
            return cmd_curve_eval(common, curve_path, out_path, format,
                                  grid_size > 0 ? std::optional<std::size_t>{grid_size}
                                                : std::nullopt);
        if (plane->parsed()) return cmd_plane(common, ckpt_list, out_path, format, threads);
        if (fge->parsed()) return cmd_fge(common, out_dir);
        if (ensemble->parsed())
            return cmd_ensemble(common, ckpt_list, temperature_fit, out_path);
        if (trivial->parsed()) return cmd_trivial(common, ckpt_path, out_path);
        if (sweep->parsed()) return cmd_sweep(common, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace modec::cli
