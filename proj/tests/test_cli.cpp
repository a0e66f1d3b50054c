#include <doctest.h>

#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const std::string kCli = RSPT_CLI_PATH;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("rspt_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

int run(const std::string& args, const std::string& log = "/dev/null") {
    const std::string cmd = kCli + " " + args + " >" + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST_CASE("gen-world is deterministic and rejects bad configs") {
    TempDir dir;
    CHECK(run("gen-world --seed 11 --out " + dir.file("a.json")) == 0);
    CHECK(run("gen-world --seed 11 --out " + dir.file("b.json")) == 0);
    CHECK(slurp(dir.file("a.json")) == slurp(dir.file("b.json")));

    write(dir.file("bad.json"), R"({"world": {"shape": "blob"}})");
    CHECK(run("gen-world --config " + dir.file("bad.json") + " --out " + dir.file("c.json")) ==
          2);
}

TEST_CASE("eval with the rule controller needs no checkpoint") {
    TempDir dir;
    write(dir.file("cfg.json"),
          R"({"evaluation": {"suite": ["garden"], "episodes": 2, "threads": 1}})");
    CHECK(run("eval --config " + dir.file("cfg.json") + " --out " + dir.file("out") +
              " --method rule") == 0);
    CHECK(fs::exists(dir.file("out") + "/config.json"));
    CHECK(fs::exists(dir.file("out") + "/episodes.jsonl"));
    CHECK(fs::exists(dir.file("out") + "/summary.txt"));
    CHECK(fs::exists(dir.file("out") + "/summary.json"));
    const std::string summary = slurp(dir.file("out") + "/summary.txt");
    CHECK(summary.find("rule") != std::string::npos);

    // The summary is recomputable from the episode records.
    std::ifstream episodes(dir.file("out") + "/episodes.jsonl");
    std::string line;
    int n = 0;
    double ar = 0;
    while (std::getline(episodes, line)) {
        ++n;
        const auto at = line.find("\"ar\":");
        REQUIRE(at != std::string::npos);
        ar += std::stod(line.substr(at + 5));
    }
    CHECK(n == 2);
    const std::string json = slurp(dir.file("out") + "/summary.json");
    const auto at = json.find("\"ar\":");
    REQUIRE(at != std::string::npos);
    const double mean_ar = std::stod(json.substr(at + 5));
    CHECK(std::abs(mean_ar - ar / n) < 1e-6);
}

TEST_CASE("eval rejects unknown suites with the available list") {
    TempDir dir;
    CHECK(run("eval --suite underwater --out " + dir.file("out") + " --method rule",
              dir.file("log.txt")) == 2);
    const std::string log = slurp(dir.file("log.txt"));
    CHECK(log.find("unknown") != std::string::npos);
}

TEST_CASE("eval requires a checkpoint for policy methods") {
    TempDir dir;
    CHECK(run("eval --out " + dir.file("out") + " --method rspt", dir.file("log.txt")) == 2);
}

TEST_CASE("train smoke: zero steps, resume identity, deterministic metrics") {
    TempDir dir;
    write(dir.file("zero.json"), R"({"training": {"stage_env_steps": [0, 0, 0]}})");
    CHECK(run("train --config " + dir.file("zero.json") + " --out " + dir.file("t0")) == 0);
    CHECK(fs::exists(dir.file("t0") + "/tracker.ckpt"));
    CHECK(fs::exists(dir.file("t0") + "/target.ckpt"));
    CHECK(fs::exists(dir.file("t0") + "/predictor.ckpt"));
    CHECK(fs::exists(dir.file("t0") + "/config.json"));

    // Resume from the zero-step checkpoint with zero further steps: identical bytes.
    CHECK(run("train --config " + dir.file("zero.json") + " --out " + dir.file("t1") +
              " --resume " + dir.file("t0")) == 0);
    CHECK(slurp(dir.file("t0") + "/tracker.ckpt") == slurp(dir.file("t1") + "/tracker.ckpt"));
    CHECK(slurp(dir.file("t0") + "/target.ckpt") == slurp(dir.file("t1") + "/target.ckpt"));
    CHECK(slurp(dir.file("t0") + "/predictor.ckpt") ==
          slurp(dir.file("t1") + "/predictor.ckpt"));

    // A short run reproduces its metric stream exactly across invocations.
    write(dir.file("short.json"), R"({
        "training": {"stage_env_steps": [4096, 2048, 2048], "n_contexts": 8,
                      "rollout_len": 16, "predictor_epochs": 3, "seed": 5},
        "predictor": {"history": 6, "horizon": 3}
    })");
    CHECK(run("train --config " + dir.file("short.json") + " --out " + dir.file("m0")) == 0);
    CHECK(run("train --config " + dir.file("short.json") + " --out " + dir.file("m1")) == 0);
    const std::string metrics0 = slurp(dir.file("m0") + "/metrics.jsonl");
    CHECK_FALSE(metrics0.empty());
    CHECK(metrics0 == slurp(dir.file("m1") + "/metrics.jsonl"));
    CHECK(slurp(dir.file("m0") + "/tracker.ckpt") == slurp(dir.file("m1") + "/tracker.ckpt"));

    // The trained checkpoints evaluate.
    write(dir.file("eval.json"), R"({
        "evaluation": {"suite": ["garden"], "episodes": 2, "threads": 1},
        "predictor": {"history": 6, "horizon": 3}
    })");
    CHECK(run("eval --config " + dir.file("eval.json") + " --out " + dir.file("ev") +
              " --checkpoint " + dir.file("m0") + " --method rspt --method rspt_kf") == 0);

    // A mismatched predictor configuration is refused with a header diff.
    write(dir.file("eval_bad.json"), R"({
        "evaluation": {"suite": ["garden"], "episodes": 1, "threads": 1},
        "predictor": {"history": 9, "horizon": 3}
    })");
    CHECK(run("eval --config " + dir.file("eval_bad.json") + " --out " + dir.file("evb") +
              " --checkpoint " + dir.file("m0") + " --method rspt",
              dir.file("log.txt")) == 2);
    CHECK(slurp(dir.file("log.txt")).find("history") != std::string::npos);
}

TEST_CASE("replay export renders to frames and inspect-checkpoint prints headers") {
    TempDir dir;
    write(dir.file("cfg.json"), R"({
        "evaluation": {"suite": ["garden"], "episodes": 1, "threads": 1,
                        "replay_episodes": 1}
    })");
    CHECK(run("eval --config " + dir.file("cfg.json") + " --out " + dir.file("out") +
              " --method rule") == 0);
    std::string replay;
    for (const auto& entry : fs::directory_iterator(dir.file("out") + "/replays"))
        replay = entry.path().string();
    REQUIRE_FALSE(replay.empty());
    CHECK(run("render --replay " + replay + " --out " + dir.file("frames") + " --cell-px 2") ==
          0);
    CHECK(fs::exists(dir.file("frames") + "/frame_000000.ppm"));

    write(dir.file("zero.json"), R"({"training": {"stage_env_steps": [0, 0, 0]}})");
    CHECK(run("train --config " + dir.file("zero.json") + " --out " + dir.file("t")) == 0);
    CHECK(run("inspect-checkpoint " + dir.file("t") + "/predictor.ckpt",
              dir.file("log.txt")) == 0);
    const std::string log = slurp(dir.file("log.txt"));
    CHECK(log.find("predictor") != std::string::npos);
    CHECK(log.find("history=10") != std::string::npos);

    CHECK(run("inspect-checkpoint " + dir.file("missing.ckpt")) == 2);
    CHECK(run("render --replay " + dir.file("absent.jsonl") + " --out " + dir.file("f2")) ==
          3);
}
