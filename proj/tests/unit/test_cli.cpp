#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "m2oe2/cli/cli.hpp"
#include "m2oe2/cli/run_config.hpp"
#include "m2oe2/train/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace m2oe2;
using m2oe2::cli::RunConfig;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

const char* kModel =
    "data.csv = synthetic.csv\n"
    "data.schema = synthetic.schema\n"
    "data.origin_stride = 9\n"
    "model.input_width = 4\n"
    "model.hidden_width = 6\n"
    "model.latent_width = 3\n"
    "model.layers = 1\n"
    "model.expert_hidden = 5\n"
    "model.mc_samples = 20\n"
    "train.epochs = 2\n";

// A workspace with three weeks of synthetic data and a trained model.
struct Workspace {
  fs::path dir;

  Workspace() {
    dir = fs::temp_directory_path() / "m2oe2_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    REQUIRE(run({"synth", "--out", dir.string(), "--weeks", "3", "--seed", "2"}).code == 0);
    write("run.cfg", std::string(kModel) + "out = out\n");
  }
  ~Workspace() { fs::remove_all(dir); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name, std::ios::binary) << text;
  }
  std::string cfg(const std::string& name = "run.cfg") const { return (dir / name).string(); }
  fs::path out(const std::string& name) const { return dir / "out" / name; }
};

}  // namespace

TEST_CASE("run config parsing") {
  Workspace ws;
  SUBCASE("paths resolve against the config directory") {
    RunConfig rc = RunConfig::read(ws.cfg());
    CHECK(rc.csv == ws.dir / "synthetic.csv");
    CHECK(rc.out == ws.dir / "out");
    CHECK(rc.origin_stride == 9);
    CHECK(rc.model.hidden_width == 6);
    CHECK(rc.train.epochs == 2);
    CHECK(RunConfig::parse(rc.resolved_text(), "/", "resolved").resolved_text() == rc.resolved_text());
  }
  auto error_of = [&](const std::string& text) {
    try {
      RunConfig::parse(text, ws.dir, "bad.cfg");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(error_of(std::string(kModel) + "model.hiden_width = 3\n") == "bad.cfg:11: unknown key 'model.hiden_width'");
  CHECK(error_of(std::string(kModel) + "train.epochs = 3\n") == "bad.cfg:11: 'train.epochs' already set on line 10");
  CHECK(error_of(std::string(kModel) + "just words\n") == "bad.cfg:11: expected 'key = value'");
  CHECK(error_of(std::string(kModel) + "model.head = bayesian\n").rfind("bad.cfg:11: ", 0) == 0);
  CHECK(error_of(std::string(kModel) + "train.lr = fast\n").rfind("bad.cfg:11: ", 0) == 0);
  CHECK(error_of("data.csv = missing.csv\ndata.schema = synthetic.schema\n") ==
        "dataset not found: " + (ws.dir / "missing.csv").string());
}

TEST_CASE("train, evaluate, forecast, gates") {
  Workspace ws;
  Result tr = run({"train", "--config", ws.cfg(), "--baselines"});
  REQUIRE_MESSAGE(tr.code == 0, tr.err);
  for (const char* f : {"best.ckpt", "final.ckpt", "history.csv", "timing.csv", "resolved.cfg",
                        "stats.csv", "base-gru.best.ckpt", "base-gru.history.csv"})
    CHECK_MESSAGE(fs::exists(ws.out(f)), f);
  CHECK(lines(slurp(ws.out("history.csv"))).size() == 3);

  SUBCASE("evaluate with baselines has three rows") {
    Result ev = run({"evaluate", "--config", ws.cfg(), "--baselines"});
    REQUIRE_MESSAGE(ev.code == 0, ev.err);
    const auto rows = lines(slurp(ws.out("report.csv")));
    REQUIRE(rows.size() == 4);
    CHECK(split(rows[1])[0] == "m2oe2");
    CHECK(split(rows[2])[0] == "base-gru");
    CHECK(split(rows[3])[0] == "persistence");
    for (const char* f : {"plot_m2oe2.csv", "plot_base-gru.csv", "plot_persistence.csv"})
      CHECK(fs::exists(ws.out(f)));
  }
  SUBCASE("J changes CRPS, not the MSE scale") {
    REQUIRE(run({"evaluate", "--config", ws.cfg(), "--samples", "2"}).code == 0);
    const auto j2 = split(lines(slurp(ws.out("report.csv")))[1]);
    REQUIRE(run({"evaluate", "--config", ws.cfg(), "--samples", "100"}).code == 0);
    const auto j100 = split(lines(slurp(ws.out("report.csv")))[1]);
    CHECK(j2[3] != j100[3]);
    CHECK(std::stod(j2[2]) < 3.0 * std::stod(j100[2]));
  }
  SUBCASE("empty test split") {
    ws.write("sparse.cfg", std::string(kModel) + "out = out\n");
    std::string text = slurp(ws.dir / "sparse.cfg");
    text.replace(text.find("origin_stride = 9"), 17, "origin_stride = 500");
    ws.write("sparse.cfg", text);
    Result ev = run({"evaluate", "--config", ws.cfg("sparse.cfg")});
    CHECK(ev.code == 2);
    CHECK(ev.err.find("no instances") != std::string::npos);
  }
  SUBCASE("config fingerprint mismatch is refused") {
    std::string text = std::string(kModel) + "out = out\n";
    text.replace(text.find("hidden_width = 6"), 16, "hidden_width = 7");
    ws.write("other.cfg", text);
    Result ev = run({"evaluate", "--config", ws.cfg("other.cfg")});
    CHECK(ev.code == 2);
    CHECK(ev.err.find("fingerprint mismatch") != std::string::npos);
    const std::string stored = train::load_checkpoint(ws.out("best.ckpt")).config.fingerprint();
    CHECK(ev.err.find("checkpoint has " + stored + ", config gives ") != std::string::npos);
  }
  SUBCASE("stats mismatch is refused") {
    REQUIRE(run({"synth", "--out", (ws.dir / "other").string(), "--weeks", "3", "--seed", "3"}).code == 0);
    ws.write("shifted.cfg", std::string(kModel) + "out = out\n");
    std::string text = slurp(ws.dir / "shifted.cfg");
    text.replace(text.find("data.csv = synthetic.csv"), 24, "data.csv = other/synthetic.csv");
    ws.write("shifted.cfg", text);
    Result ev = run({"evaluate", "--config", ws.cfg("shifted.cfg")});
    CHECK(ev.code == 2);
    CHECK(ev.err.find("stats fingerprint mismatch") != std::string::npos);
  }
  SUBCASE("forecast") {
    Result fc = run({"forecast", "--config", ws.cfg(), "--origin", "2021-01-20 05:00"});
    REQUIRE_MESSAGE(fc.code == 0, fc.err);
    const auto rows = lines(slurp(ws.out("forecast.csv")));
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(split(rows[i])[5]) > 0.0);

    Result early = run({"forecast", "--config", ws.cfg(), "--origin", "2021-01-04 00:00"});
    CHECK(early.code == 2);
    CHECK(early.err.find("earliest valid origin is 2021-01-11 00:00:00") != std::string::npos);
  }
  SUBCASE("gates") {
    Result g = run({"gates", "--config", ws.cfg(), "--from", "2021-01-12 00:00", "--to", "2021-01-13 00:00"});
    REQUIRE_MESSAGE(g.code == 0, g.err);
    const auto rows = lines(slurp(ws.out("gates.csv")));
    REQUIRE(rows.size() == 25);
    const auto header = split(rows[0]);
    CHECK(header.size() == 8);
    CHECK(header[4] == "weight_temperature");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto f = split(rows[i]);
      double sum = 0;
      int nonzero = 0;
      for (std::size_t j = 4; j < 7; ++j) {
        sum += std::stod(f[j]);
        nonzero += std::stod(f[j]) != 0.0;
      }
      CHECK(nonzero == 2);
      CHECK(std::abs(sum - 1.0) < 1e-12);
      CHECK(std::count(f[7].begin(), f[7].end(), ';') == 1);
    }
    Result empty = run({"gates", "--config", ws.cfg(), "--from", "2021-01-12 00:00", "--to", "2021-01-12 00:00"});
    CHECK(empty.code == 0);
    CHECK(lines(slurp(ws.out("gates.csv"))).size() == 1);
  }
}

TEST_CASE("seeded runs are byte-identical") {
  Workspace ws;
  auto train_eval = [&](const std::string& out) {
    REQUIRE(run({"train", "--config", ws.cfg(), "--seed", "7", "--out", out}).code == 0);
    REQUIRE(run({"evaluate", "--config", ws.cfg(), "--seed", "7", "--out", out}).code == 0);
    return slurp(fs::path(out) / "history.csv") + slurp(fs::path(out) / "report.csv") +
           slurp(fs::path(out) / "best.ckpt");
  };
  const std::string a = train_eval((ws.dir / "a").string());
  CHECK(a == train_eval((ws.dir / "b").string()));
  REQUIRE(run({"train", "--config", ws.cfg(), "--seed", "8", "--out", (ws.dir / "c").string()}).code == 0);
  CHECK(slurp(ws.dir / "a" / "history.csv") != slurp(ws.dir / "c" / "history.csv"));
}

TEST_CASE("exit codes") {
  Workspace ws;
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"train"}).code == 2);
  CHECK(run({"--help"}).code == 0);
  Result missing = run({"train", "--config", (ws.dir / "nope.cfg").string()});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nope.cfg") != std::string::npos);

  ws.write("gone.cfg", "data.csv = gone.csv\ndata.schema = synthetic.schema\n");
  Result gone = run({"train", "--config", ws.cfg("gone.cfg")});
  CHECK(gone.code == 2);
  CHECK(gone.err.find((ws.dir / "gone.csv").string()) != std::string::npos);

  ws.write("conflict.cfg", std::string(kModel) + "model.num_experts = 2\n");
  Result conflict = run({"train", "--config", ws.cfg("conflict.cfg")});
  CHECK(conflict.code == 2);
  CHECK(conflict.err.find("model.num_experts") != std::string::npos);
}
