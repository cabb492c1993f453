#include <doctest.h>

#include <cstdlib>
#include <sstream>
#include <unistd.h>

#include "mcot/cli.hpp"
#include "mcot/effbench.hpp"
#include "support/fixtures.hpp"

using namespace mcot;
using namespace mcot::testing;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<json> read_jsonl(const std::string& text) {
    std::vector<json> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (!trim(line).empty()) rows.push_back(json::parse(line));
    return rows;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() / ("mcot_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

std::string replay_config() { return data_path("replay/replay.toml").string(); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("committed replay scripts match the transcripts") {
    const auto [mock, exec] = replay_scripts();
    if (std::getenv("MCOT_WRITE_FIXTURES")) {
        write_file(data_path("replay/replay.mock.jsonl"), mock);
        write_file(data_path("replay/replay.exec.jsonl"), exec);
        write_file(data_path("replay/questions.jsonl"), replay_questions_jsonl());
    }
    CHECK(read_file(data_path("replay/replay.mock.jsonl")) == mock);
    CHECK(read_file(data_path("replay/replay.exec.jsonl")) == exec);
    CHECK(read_file(data_path("replay/questions.jsonl")) == replay_questions_jsonl());
}

TEST_CASE("usage errors exit 2") {
    CHECK(run({}).code == kExitConfig);
    CHECK(run({"frobnicate"}).code == kExitConfig);
    CHECK(run({"solve", "--question", "x"}).code == kExitConfig);
    CHECK(run({"solve", "--config", "/nonexistent.toml", "--question", "x"}).code == kExitConfig);
    CHECK(run({"solve", "--config", replay_config()}).code == kExitConfig);
    CHECK(run({"solve", "--config", replay_config(), "--question", "x", "--strategy", "tot"}).code == kExitConfig);
    const auto help = run({"--help"});
    CHECK(help.code == kExitOk);
    CHECK(help.out.find("solve") != std::string::npos);
}

TEST_CASE("solve a replay question") {
    const std::string question = load_transcript("replay/root_selfcorrect.txt").question;
    const auto r = run({"solve", "--config", replay_config(), "--question", question});
    REQUIRE(r.code == kExitOk);
    const auto rows = read_jsonl(r.out);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0]["final_answer"] == "\\frac{19}{4}");
    CHECK(rows[0]["chain"]["steps"].size() == 2);
    CHECK(rows[0]["stop_reason"] == "final");
}

TEST_CASE("solve a question file, then report and compare") {
    TempDir tmp;
    const auto r = run({"--seed", "3", "solve", "--config", replay_config(), "--input", data_path("replay/questions.jsonl").string(),
                        "-o", tmp / "runs.jsonl", "--jobs", "2"});
    REQUIRE(r.code == kExitOk);
    const auto rows = read_jsonl(read_file(tmp / "runs.jsonl"));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0]["id"] == "root");
    CHECK(rows[2]["final_answer"] == "10");
    CHECK(rows[2]["gold"] == "50");

    const auto rep = run({"report", "--input", tmp / "runs.jsonl"});
    CHECK(rep.code == kExitOk);
    CHECK(read_jsonl(rep.out).size() == 3);

    const auto cmp = run({"compare", "--a", tmp / "runs.jsonl", "--b", tmp / "runs.jsonl", "--jsonl", tmp / "cmp.jsonl"});
    CHECK(cmp.code == kExitOk);
    const auto table = read_jsonl(read_file(tmp / "cmp.jsonl"));
    REQUIRE_FALSE(table.empty());
    CHECK(table.back()["dataset"] == "all");
    CHECK(table.back()["peak_cache_ratio"] == 1.0);

    write_file(tmp / "one.jsonl", read_file(tmp / "runs.jsonl").substr(0, read_file(tmp / "runs.jsonl").find('\n') + 1));
    CHECK(run({"compare", "--a", tmp / "runs.jsonl", "--b", tmp / "one.jsonl"}).code == kExitRuntime);
}

TEST_CASE("one unfinished question makes the run exit 1 but keeps every record") {
    TempDir tmp;
    std::string mock = read_file(data_path("replay/replay.mock.jsonl"));
    mock += json{{"match", "<question>\nGo around\n"}, {"reply", "Nothing new.\nSub Question: Go around"}}.dump() + "\n";
    write_file(tmp / "mock.jsonl", mock);
    write_file(tmp / "cfg.toml", "[solver]\nkind = \"mock\"\nscript = \"mock.jsonl\"\n[executor]\nkind = \"scripted\"\nscript = \"" +
                                     fs::absolute(data_path("replay/replay.exec.jsonl")).string() + "\"\n");
    std::string questions = read_file(data_path("replay/questions.jsonl"));
    questions = questions.substr(0, questions.rfind('\n', questions.size() - 2) + 1);
    questions += json{{"id", "loop"}, {"question", "Go around"}}.dump() + "\n";
    write_file(tmp / "q.jsonl", questions);
    const auto r = run({"solve", "--config", tmp / "cfg.toml", "--input", tmp / "q.jsonl"});
    CHECK(r.code == kExitRuntime);
    const auto rows = read_jsonl(r.out);
    REQUIRE(rows.size() == 3);
    CHECK(rows[2]["stop_reason"] == "max_steps");
}

TEST_CASE("unreachable http backend is a config error") {
    TempDir tmp;
    write_file(tmp / "cfg.toml", "[solver]\nkind = \"http\"\nbase_url = \"http://127.0.0.1:1/v1\"\nmax_retries = 0\n"
                                 "[executor]\nkind = \"scripted\"\nscript = \"none.jsonl\"\n");
    write_file(tmp / "none.jsonl", "");
    const auto r = run({"solve", "--config", tmp / "cfg.toml", "--question", "2+2?"});
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("unreachable") != std::string::npos);
}

TEST_CASE("empty and malformed inputs") {
    TempDir tmp;
    write_file(tmp / "empty.jsonl", "\n");
    const auto e = run({"solve", "--config", replay_config(), "--input", tmp / "empty.jsonl"});
    CHECK(e.code == kExitOk);
    CHECK(e.err.find("no records") != std::string::npos);

    const std::string good = read_file(data_path("replay/questions.jsonl"));
    std::string text;
    for (int i = 0; i < 6; ++i) text += good;  // 18 records
    write_file(tmp / "few_bad.jsonl", text + "{broken\n");  // 1 of 19
    CHECK(run({"solve", "--config", replay_config(), "--input", tmp / "few_bad.jsonl"}).code == kExitOk);
    write_file(tmp / "many_bad.jsonl", text + "{broken\n{\"id\": 1}\n");  // 2 of 20 is not above 10%
    CHECK(run({"solve", "--config", replay_config(), "--input", tmp / "many_bad.jsonl"}).code == kExitOk);
    write_file(tmp / "too_bad.jsonl", text + "{broken\n{\"id\": 1}\n[]\n");  // 3 of 21
    const auto r = run({"solve", "--config", replay_config(), "--input", tmp / "too_bad.jsonl"});
    CHECK(r.code == kExitRuntime);
    CHECK(r.err.find("more than 10%") != std::string::npos);
}

TEST_CASE("self-distill then dedup of a corpus with itself") {
    TempDir tmp;
    const auto d = run({"self-distill", "--config", replay_config(), "--input", data_path("replay/questions.jsonl").string(),
                        "-o", tmp / "distilled.jsonl"});
    REQUIRE(d.code == kExitOk);
    const auto triplets = read_jsonl(read_file(tmp / "distilled.jsonl"));
    CHECK(triplets.size() == 5);
    CHECK(read_jsonl(read_file(tmp / "distilled.provenance.jsonl")).size() == 5);

    const auto u = run({"dedup", "--input", tmp / "distilled.jsonl", "--input", tmp / "distilled.jsonl", "-o", tmp / "u.jsonl"});
    REQUIRE(u.code == kExitOk);
    CHECK(read_jsonl(read_file(tmp / "u.jsonl")).size() == 5);
    const auto prov = read_jsonl(read_file(tmp / "u.provenance.jsonl"));
    REQUIRE(prov.size() == 5);
    CHECK(prov[0]["source"] == "self_distill");

    const auto again = run({"dedup", "--input", tmp / "u.jsonl", "-o", tmp / "v.jsonl"});
    CHECK(read_file(tmp / "v.jsonl") == read_file(tmp / "u.jsonl"));
    CHECK(again.code == kExitOk);
}

TEST_CASE("bench") {
    TempDir tmp;
    CHECK(run({"bench", "--profile", "reference", "--params", tmp / "missing.toml"}).code == kExitConfig);
    CHECK(run({"bench"}).code == kExitConfig);

    json profile = json::array();
    for (int i = 0; i < 8; ++i) profile.push_back({100, 128});
    write_file(tmp / "uniform.json", profile.dump());
    const auto r = run({"bench", "--profile", tmp / "uniform.json", "--out-dir", tmp / "out"});
    REQUIRE(r.code == kExitOk);
    std::istringstream curve(read_file(tmp / "out/prompt_curve.csv"));
    std::string line;
    std::getline(curve, line);
    CHECK(line.rfind("step,mcot_prompt_tokens,msr_prompt_tokens", 0) == 0);
    long last_msr = -1;
    int rows = 0;
    while (std::getline(curve, line)) {
        std::istringstream cells(line);
        std::string step, mcot, msr;
        std::getline(cells, step, ',');
        std::getline(cells, mcot, ',');
        std::getline(cells, msr, ',');
        CHECK(mcot == "100");
        CHECK(std::stol(msr) > last_msr);
        last_msr = std::stol(msr);
        ++rows;
    }
    CHECK(rows == 8);
    CHECK(read_jsonl(read_file(tmp / "out/bench_report.jsonl")).size() == 2);

    const auto cal = run({"bench", "--profile", "reference", "--calibrate-E", "1.12", "--out-dir", tmp / "cal"});
    CHECK(cal.code == kExitOk);
    CHECK(cal.out.find("ratio_msr_over_mcot") != std::string::npos);
    CHECK(cal.err.find("calibrated attn_cost_s") != std::string::npos);

    const auto runs = run({"solve", "--config", replay_config(), "--input", data_path("replay/questions.jsonl").string(),
                           "-o", tmp / "runs.jsonl"});
    REQUIRE(runs.code == kExitOk);
    const auto m = run({"bench", "--records", tmp / "runs.jsonl", "--out-dir", tmp / "m"});
    CHECK(m.code == kExitOk);
    CHECK(read_jsonl(read_file(tmp / "m/measured_report.jsonl")).size() == 3);
}

TEST_CASE("build-seed with scripted annotator and verifier") {
    TempDir tmp;
    write_file(tmp / "annotator.jsonl", json{{"match", ""}, {"reply", "What is 6 times 7?"}}.dump() + "\n");
    write_file(tmp / "verifier.jsonl", json{{"match", ""}, {"reply", "Six sevens.\nFinal Answer: \\(42\\)"}}.dump() + "\n");
    write_file(tmp / "exec.jsonl", "");
    write_file(tmp / "cfg.toml",
               "[annotator]\nkind = \"mock\"\nscript = \"annotator.jsonl\"\n"
               "[verifier]\nkind = \"mock\"\nscript = \"verifier.jsonl\"\n"
               "[executor]\nkind = \"scripted\"\nscript = \"exec.jsonl\"\n"
               "[pipeline]\nn_verify_samples = 2\n");
    std::string origin;
    origin += json{{"id", "t1"}, {"question", "Q"}, {"answer", "42"}, {"steps", {step_to_json({"a", "", {}, ""}), step_to_json({"b", "", {}, ""})}}}.dump() + "\n";
    origin += json{{"id", "t2"}, {"question", "R"}, {"answer", "7"}, {"steps", {step_to_json({"c", "", {}, ""})}}}.dump() + "\n";
    write_file(tmp / "origin.jsonl", origin);
    const auto r = run({"build-seed", "--config", tmp / "cfg.toml", "--input", tmp / "origin.jsonl", "-o", tmp / "seed.jsonl",
                        "--stats", tmp / "stats.jsonl"});
    REQUIRE(r.code == kExitOk);
    const auto seed = read_jsonl(read_file(tmp / "seed.jsonl"));
    CHECK(seed.size() == 3);
    const auto stats = read_jsonl(read_file(tmp / "stats.jsonl"));
    REQUIRE(stats.size() == 2);
    CHECK(stats[0]["verifier_samples"] == 2);
    CHECK(stats[0]["pass_rate"] == 1.0);
    CHECK(stats[1]["triplets"] == 3);
    CHECK(read_jsonl(read_file(tmp / "seed.provenance.jsonl")).size() == 3);

    write_file(tmp / "cfg2.toml", "[annotator]\nkind = \"mock\"\nscript = \"annotator.jsonl\"\n[executor]\nkind = \"scripted\"\nscript = \"exec.jsonl\"\n");
    CHECK(run({"build-seed", "--config", tmp / "cfg2.toml", "--input", tmp / "origin.jsonl"}).code == kExitConfig);
}

}
