#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "../tools/cli.hpp"
#include "modec/data_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("modec_cli_" + std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"modec"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return modec::cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string write_config(const TempDir& dir, const json& j, const std::string& name = "cfg.json") {
    std::ofstream out(dir.file(name));
    out << j.dump(2);
    return dir.file(name);
}

json base_config() {
    return json{
        {"seed", 11},
        {"net", {{"layer_sizes", {2, 6, 3}}, {"l2_coeff", 0.0005}}},
        {"data",
         {{"source", "gaussian_blobs"}, {"n", 60}, {"noise", 0.3},
          {"train_fraction", 0.6}, {"test_fraction", 0.3}}},
        {"train", {{"epochs", 3}, {"batch_size", 8}, {"learning_rate", 0.1}}},
    };
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("train writes a loadable checkpoint, reruns are bit-identical") {
    TempDir dir;
    const std::string cfg = write_config(dir, base_config());
    REQUIRE(run_cli({"train", "--config", cfg, "--out", dir.file("a.ckpt")}) == 0);
    REQUIRE(run_cli({"train", "--config", cfg, "--out", dir.file("b.ckpt")}) == 0);
    CHECK(slurp(dir.file("a.ckpt")) == slurp(dir.file("b.ckpt")));

    const auto loaded = modec::load_checkpoint(dir.file("a.ckpt"));
    CHECK(loaded.config.layer_sizes == std::vector<std::size_t>{2, 6, 3});
    CHECK(loaded.seed == 11);
}

TEST_CASE("--seed overrides the config seed") {
    TempDir dir;
    const std::string cfg = write_config(dir, base_config());
    REQUIRE(run_cli({"train", "--config", cfg, "--out", dir.file("a.ckpt")}) == 0);
    REQUIRE(run_cli({"train", "--config", cfg, "--seed", "99", "--out", dir.file("c.ckpt")}) == 0);
    CHECK(slurp(dir.file("a.ckpt")) != slurp(dir.file("c.ckpt")));
    CHECK(modec::load_checkpoint(dir.file("c.ckpt")).seed == 99);
}

TEST_CASE("unknown config keys and missing sections are rejected with exit 1") {
    TempDir dir;
    json bad = base_config();
    bad["net"]["hidden"] = 4;
    CHECK(run_cli({"train", "--config", write_config(dir, bad, "bad.json"),
                   "--out", dir.file("x.ckpt")}) == 1);

    json missing = base_config();
    missing.erase("train");
    CHECK(run_cli({"train", "--config", write_config(dir, missing, "missing.json"),
                   "--out", dir.file("x.ckpt")}) == 1);

    json typo = base_config();
    typo["nett"] = json::object();
    CHECK(run_cli({"train", "--config", write_config(dir, typo, "typo.json"),
                   "--out", dir.file("x.ckpt")}) == 1);
}

TEST_CASE("connect trains a curve; segment kind is refused") {
    TempDir dir;
    json cfg = base_config();
    cfg["curve"] = {{"kind", "polychain"}, {"n_bends", 1}, {"iterations", 25},
                    {"batch_size", 8}, {"learning_rate", 0.02}, {"grid_size", 9}};
    const std::string cfg_path = write_config(dir, cfg);
    REQUIRE(run_cli({"train", "--config", cfg_path, "--out", dir.file("w1.ckpt")}) == 0);
    REQUIRE(run_cli({"train", "--config", cfg_path, "--seed", "42",
                     "--out", dir.file("w2.ckpt")}) == 0);

    REQUIRE(run_cli({"connect", "--config", cfg_path, "--start", dir.file("w1.ckpt"),
                     "--end", dir.file("w2.ckpt"), "--out", dir.file("c.curve")}) == 0);
    const auto curve = modec::load_curve(dir.file("c.curve"));
    CHECK(curve.spec.kind == modec::CurveKind::polychain);
    CHECK(curve.spec.start.values == modec::load_checkpoint(dir.file("w1.ckpt")).weights.values);

    json seg = cfg;
    seg["curve"]["kind"] = "segment";
    CHECK(run_cli({"connect", "--config", write_config(dir, seg, "seg.json"),
                   "--start", dir.file("w1.ckpt"), "--end", dir.file("w2.ckpt"),
                   "--out", dir.file("s.curve")}) == 1);

    // identical config+seed reproduces the curve byte for byte
    REQUIRE(run_cli({"connect", "--config", cfg_path, "--start", dir.file("w1.ckpt"),
                     "--end", dir.file("w2.ckpt"), "--out", dir.file("c2.curve")}) == 0);
    CHECK(slurp(dir.file("c.curve")) == slurp(dir.file("c2.curve")));
}

TEST_CASE("curve-eval emits the CSV schema and honors --grid-size") {
    TempDir dir;
    json cfg = base_config();
    cfg["curve"] = {{"kind", "bezier"}, {"n_bends", 1}, {"iterations", 10},
                    {"batch_size", 8}, {"grid_size", 7}};
    const std::string cfg_path = write_config(dir, cfg);
    REQUIRE(run_cli({"train", "--config", cfg_path, "--out", dir.file("w1.ckpt")}) == 0);
    REQUIRE(run_cli({"train", "--config", cfg_path, "--seed", "5",
                     "--out", dir.file("w2.ckpt")}) == 0);
    REQUIRE(run_cli({"connect", "--config", cfg_path, "--start", dir.file("w1.ckpt"),
                     "--end", dir.file("w2.ckpt"), "--out", dir.file("c.curve")}) == 0);
    REQUIRE(run_cli({"curve-eval", "--config", cfg_path, "--curve", dir.file("c.curve"),
                     "--out", dir.file("rep.csv"), "--grid-size", "5"}) == 0);

    std::ifstream in(dir.file("rep.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,train_loss,train_error,test_loss,test_error");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 5);

    CHECK(run_cli({"curve-eval", "--config", cfg_path, "--curve", dir.file("c.curve"),
                   "--out", dir.file("rep2.csv"), "--format", "xml"}) == 1);
}

TEST_CASE("fge schema validation happens before any training") {
    TempDir dir;
    json cfg = base_config();
    cfg["fge"] = {{"alpha1", 0.001}, {"alpha2", 0.05}, {"cycle_length", 4}, {"cycles", 2}};
    CHECK(run_cli({"fge", "--config", write_config(dir, cfg, "swap.json"),
                   "--out-dir", dir.file("out")}) == 1);
    CHECK(!fs::exists(dir.file("out")));

    cfg["fge"] = {{"alpha1", 0.05}, {"alpha2", 0.001}, {"cycle_length", 5}, {"cycles", 2}};
    CHECK(run_cli({"fge", "--config", write_config(dir, cfg, "odd.json"),
                   "--out-dir", dir.file("out")}) == 1);
    CHECK(!fs::exists(dir.file("out")));
}

TEST_CASE("fge produces a manifest, checkpoints and an ensemble report") {
    TempDir dir;
    json cfg = base_config();
    cfg["fge"] = {{"alpha1", 0.05}, {"alpha2", 0.001}, {"cycle_length", 4}, {"cycles", 3},
                  {"batch_size", 8}};
    const std::string cfg_path = write_config(dir, cfg);
    REQUIRE(run_cli({"fge", "--config", cfg_path, "--out-dir", dir.file("out")}) == 0);

    json manifest;
    std::ifstream in(dir.file("out") + "/manifest.json");
    REQUIRE(in.good());
    in >> manifest;
    CHECK(manifest["checkpoints"].size() == 4);  // pretrained + 3 cycles
    for (const auto& path : manifest["checkpoints"]) CHECK(fs::exists(path.get<std::string>()));
    CHECK(manifest["ensemble_test_error"].is_number());
    CHECK(fs::exists(dir.file("out") + "/chain.csv"));

    // the collected checkpoints feed the standalone ensemble command
    std::vector<std::string> args{"ensemble", "--config", cfg_path,
                                  "--out", dir.file("ens.json")};
    for (const auto& path : manifest["checkpoints"]) args.push_back(path.get<std::string>());
    REQUIRE(run_cli(args) == 0);
    json ens;
    std::ifstream ein(dir.file("ens.json"));
    ein >> ens;
    CHECK(ens["test_error"].get<double>() ==
          manifest["ensemble_test_error"].get<double>());
}

TEST_CASE("ensemble --temperature-fit needs a held-out split") {
    TempDir dir;
    json cfg = base_config();
    cfg["data"]["train_fraction"] = 0.7;
    cfg["data"]["test_fraction"] = 0.3;  // nothing left over
    const std::string cfg_path = write_config(dir, cfg);
    REQUIRE(run_cli({"train", "--config", cfg_path, "--out", dir.file("w.ckpt")}) == 0);
    CHECK(run_cli({"ensemble", "--config", cfg_path, "--temperature-fit",
                   dir.file("w.ckpt")}) == 1);

    json with_holdout = base_config();  // 0.6/0.3 leaves 10% held out
    const std::string cfg2 = write_config(dir, with_holdout, "hold.json");
    REQUIRE(run_cli({"ensemble", "--config", cfg2, "--temperature-fit",
                     "--out", dir.file("t.json"), dir.file("w.ckpt")}) == 0);
    json rep;
    std::ifstream in(dir.file("t.json"));
    in >> rep;
    CHECK(rep["temperature"].get<double>() > 0.0);
    CHECK(rep["heldout_nll_scaled"].get<double>() <=
          rep["heldout_nll_unscaled"].get<double>() + 1e-12);
}

TEST_CASE("trivial command validates the t grid and reports the invariant") {
    TempDir dir;
    const std::string cfg_path = write_config(dir, base_config());
    REQUIRE(run_cli({"train", "--config", cfg_path, "--out", dir.file("w.ckpt")}) == 0);

    json bad = base_config();
    bad["trivial"] = {{"t_grid", {0.0, 0.5}}};
    CHECK(run_cli({"trivial", "--config", write_config(dir, bad, "bad_t.json"),
                   "--checkpoint", dir.file("w.ckpt")}) == 1);

    REQUIRE(run_cli({"trivial", "--config", cfg_path, "--checkpoint", dir.file("w.ckpt"),
                     "--out", dir.file("triv.json")}) == 0);
    json rep;
    std::ifstream in(dir.file("triv.json"));
    in >> rep;
    CHECK(rep["argmax_invariant"].get<bool>());
    CHECK(rep["logit_ratio_error"].get<double>() < 1e-9);
}

TEST_CASE("plane command writes a grid over three checkpoints") {
    TempDir dir;
    const std::string cfg_path = write_config(dir, base_config());
    for (int s = 0; s < 3; ++s)
        REQUIRE(run_cli({"train", "--config", cfg_path, "--seed", std::to_string(s + 1),
                         "--out", dir.file("w" + std::to_string(s) + ".ckpt")}) == 0);
    json cfg = base_config();
    cfg["plane"] = {{"resolution", 5}, {"margin", 0.1}};
    REQUIRE(run_cli({"plane", "--config", write_config(dir, cfg, "plane.json"),
                     "--checkpoints", dir.file("w0.ckpt"), dir.file("w1.ckpt"),
                     dir.file("w2.ckpt"), "--out", dir.file("plane.csv")}) == 0);
    std::ifstream in(dir.file("plane.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "x,y,loss,error");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 25);
}

TEST_CASE("missing files and malformed configs map to distinct exit codes") {
    TempDir dir;
    const std::string cfg_path = write_config(dir, base_config());
    // nonexistent checkpoint is a runtime failure
    CHECK(run_cli({"trivial", "--config", cfg_path,
                   "--checkpoint", dir.file("nope.ckpt")}) == 2);
    // malformed JSON is a configuration error
    std::ofstream(dir.file("broken.json")) << "{ not json";
    CHECK(run_cli({"train", "--config", dir.file("broken.json"),
                   "--out", dir.file("x.ckpt")}) == 1);
}
