#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "phasemap/commands.hpp"
#include "phasemap/errors.hpp"
#include "phasemap/model.hpp"
#include "phasemap/output.hpp"

using namespace phasemap;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "phasemap_test_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const json& j, const std::string& name = "config.json") {
    const fs::path p = dir / name;
    std::ofstream(p) << j.dump(2);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

}  // namespace

TEST_CASE("preset prints exact exponents") {
    Result r = cli({"preset", "NTK"});
    CHECK(r.code == 0);
    CHECK(r.out.find("gamma2  0\n") != std::string::npos);
    CHECK(r.out.find("gamma3  1\n") != std::string::npos);

    r = cli({"preset", "He", "--d", "3"});
    CHECK(r.out.find("gamma2  1/2\n") != std::string::npos);
    CHECK(r.out.find("gamma3  1\n") != std::string::npos);

    r = cli({"preset", "Xavier", "--json"});
    CHECK(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j.contains("beta1"));

    CHECK(cli({"preset", "foo"}).code == exit_usage);
    CHECK(cli({}).code == exit_usage);
    CHECK(cli({"bogus"}).code == exit_usage);
    r = cli({"--version"});
    CHECK(r.code == 0);
    CHECK(r.out.find(kVersion) != std::string::npos);
}

TEST_CASE("config errors exit with 1") {
    const fs::path dir = fresh_dir("config_errors");
    CHECK(cli({"train", (dir / "missing.json").string(), "-o", (dir / "out").string()}).code == exit_usage);
    const fs::path bad = write_config(dir, {{"schedule", {{"max_stepz", 3}}}});
    const Result r = cli({"train", bad.string(), "-o", (dir / "out").string()});
    CHECK(r.code == exit_usage);
    CHECK(r.err.find("max_stepz") != std::string::npos);
    const fs::path good = write_config(dir, json::object(), "good.json");
    CHECK(cli({"sweep", good.string(), "-o", (dir / "o2").string(), "--widths", "100"}).code == exit_usage);
}

TEST_CASE("missing data files exit with 2") {
    const fs::path dir = fresh_dir("io");
    const fs::path cfg = write_config(dir, {{"data", {{"idx", {{"images", "nope.gz"}, {"labels", "nope.gz"}}}}}});
    CHECK(cli({"train", cfg.string(), "-o", (dir / "out").string()}).code == exit_io);
}

TEST_CASE("train without steps leaves weights unchanged") {
    const fs::path dir = fresh_dir("train0");
    const fs::path cfg = write_config(dir, {{"model", {{"gamma2", 0}, {"gamma3", 1}}}, {"width", 50}});
    const fs::path out = dir / "out";
    const Result r = cli({"train", cfg.string(), "-o", out.string(), "--max-steps", "0", "--seed", "4"});
    REQUIRE(r.code == 0);
    const json metrics = read_json(out / "metrics.json");
    CHECK(metrics["rd_w1"].get<double>() == 0.0);
    CHECK(metrics["rd_w2"].get<double>() == 0.0);
    CHECK(metrics.contains("circular_variance_init"));
    const json summary = read_json(out / "summary.json");
    CHECK(summary["steps_taken"].get<int>() == 0);
    const json manifest = read_json(out / "manifest.json");
    CHECK(manifest["version"] == kVersion);
    CHECK(manifest["seeds"] == json::array({4}));
    for (const char* f : {"checkpoint_init.bin", "checkpoint_final.bin", "loss.csv", "scatter_w1.csv",
                          "scatter_w1.svg", "cosine_w2.bin", "cosine_w2.svg"})
        CHECK(fs::exists(out / f));
    CheckpointMeta meta;
    load_checkpoint(out / "checkpoint_final.bin", &meta);
    CHECK(meta.seed == 4);
    CHECK(meta.config_hash == manifest["hash"].get<std::string>());
}

TEST_CASE("condense: identical rows give 1, a fresh wide layer gives a small index") {
    const fs::path dir = fresh_dir("condense");
    Network same = Network::zeros(6, 1, 1);
    same.w2.setConstant(0.3);
    save_checkpoint(dir / "same.bin", same, {});
    Result r = cli({"condense", (dir / "same.bin").string(), "-o", (dir / "same").string()});
    REQUIRE(r.code == 0);
    const json same_json = read_json(dir / "same" / "condense.json");
    CHECK(same_json["zeta"].get<double>() == doctest::Approx(1.0));
    CHECK(same_json["zeta_w1"].is_null());
    const CosineMatrix cm = load_cosine_matrix(dir / "same" / "cosine_w2.bin");
    CHECK(cm.values.rows() == 3);

    const fs::path cfg = write_config(dir, {{"model", {{"preset", "NTK"}}}, {"width", 1000}});
    REQUIRE(cli({"train", cfg.string(), "-o", (dir / "t").string(), "--max-steps", "0"}).code == 0);
    r = cli({"condense", (dir / "t" / "checkpoint_final.bin").string(), "-o", (dir / "c").string()});
    REQUIRE(r.code == 0);
    CHECK(read_json(dir / "c" / "condense.json")["zeta"].get<double>() < 0.1);

    CHECK(cli({"condense", (dir / "nope.bin").string(), "-o", (dir / "x").string()}).code == exit_io);
}

TEST_CASE("cosine matrix file round trip") {
    const fs::path dir = fresh_dir("cosine");
    CosineMatrix cm;
    cm.rows = {4, 1};
    cm.values.resize(2, 2);
    cm.values << 1, -0.25, -0.25, 1;
    save_cosine_matrix(dir / "m.bin", cm);
    const CosineMatrix back = load_cosine_matrix(dir / "m.bin");
    CHECK(back.rows == cm.rows);
    CHECK(back.values == cm.values);
    fs::resize_file(dir / "m.bin", fs::file_size(dir / "m.bin") - 1);
    CHECK_THROWS_AS(load_cosine_matrix(dir / "m.bin"), FormatError);
}

TEST_CASE("phase scan resumes to byte-identical outputs") {
    const fs::path dir = fresh_dir("phase");
    const json doc = {{"grid", {{"gamma2", {0}}, {"gamma3", {0.9, 1.5, 2.1}}}},
                      {"widths", {20, 40}},
                      {"seeds", {{"count", 2}}},
                      {"schedule", {{"max_steps", 200}}}};
    const fs::path cfg = write_config(dir, doc);
    const fs::path out = dir / "out";
    REQUIRE(cli({"phase", cfg.string(), "-o", out.string(), "-j", "2"}).code == 0);
    const std::string runs = slurp(out / "runs.csv");
    const std::string cells = slurp(out / "cells.csv");
    for (const char* f : {"stars.csv", "s_w1.svg", "s_w2.svg", "zeta.svg", "manifest.json"})
        CHECK(fs::exists(out / f));

    // Drop the last four runs as if interrupted, then resume.
    {
        std::istringstream is(runs);
        std::vector<std::string> lines;
        for (std::string line; std::getline(is, line);) lines.push_back(line);
        std::ofstream os(out / "runs.csv", std::ios::trunc);
        for (std::size_t i = 0; i + 4 < lines.size(); ++i) os << lines[i] << "\n";
    }
    REQUIRE(cli({"phase", cfg.string(), "-o", out.string(), "-j", "1"}).code == 0);
    CHECK(slurp(out / "runs.csv") == runs);
    CHECK(slurp(out / "cells.csv") == cells);

    // A different config refuses to mix with the stored runs unless told to.
    const Result clash = cli({"phase", cfg.string(), "-o", out.string(), "--max-steps", "150"});
    CHECK(clash.code == exit_usage);
    CHECK(clash.err.find("--fresh") != std::string::npos);
    CHECK(cli({"phase", cfg.string(), "-o", out.string(), "--max-steps", "150", "--fresh"}).code == 0);
    CHECK(slurp(out / "runs.csv") != runs);
}

TEST_CASE("worker count comes from the environment") {
    const fs::path dir = fresh_dir("workers");
    const fs::path cfg = write_config(dir, {{"widths", {20, 40}}, {"seeds", {0}}, {"schedule", {{"max_steps", 20}}}});
    ::setenv(kWorkersEnv, "zero", 1);
    CHECK(cli({"sweep", cfg.string(), "-o", (dir / "a").string()}).code == exit_usage);
    ::setenv(kWorkersEnv, "2", 1);
    CHECK(cli({"sweep", cfg.string(), "-o", (dir / "b").string()}).code == 0);
    ::unsetenv(kWorkersEnv);
    const json fit = read_json(dir / "b" / "fit.json");
    CHECK(fit.contains("s_w1"));
}

TEST_CASE("every run diverging exits with 3") {
    const fs::path dir = fresh_dir("diverge");
    const fs::path cfg = write_config(
        dir, {{"widths", {20, 40}}, {"seeds", {0}}, {"schedule", {{"normalized_lr", 1e6}, {"backtracking", false}}}});
    CHECK(cli({"sweep", cfg.string(), "-o", (dir / "s").string()}).code == exit_all_failed);
    const fs::path grid = write_config(dir,
                                       {{"widths", {20, 40}},
                                        {"seeds", {0}},
                                        {"grid", {{"gamma2", {0}}, {"gamma3", {1}}}},
                                        {"schedule", {{"normalized_lr", 1e6}, {"backtracking", false}}}},
                                       "grid.json");
    CHECK(cli({"phase", grid.string(), "-o", (dir / "p").string()}).code == exit_all_failed);
}

TEST_CASE("report compares a group") {
    const fs::path dir = fresh_dir("report");
    const fs::path cfg = write_config(dir, {{"group",
                                             {{{"preset", "NTK"}, {"label", "ntk"}},
                                              {{"gamma2", 0}, {"gamma3", 1}, {"alpha_exp", 1}, {"label", "inverse"}}}},
                                            {"widths", {20, 40}},
                                            {"seeds", {0}},
                                            {"schedule", {{"max_steps", 50}}}});
    const Result r = cli({"report", cfg.string(), "-o", (dir / "out").string()});
    REQUIRE(r.code == 0);
    const json report = read_json(dir / "out" / "report.json");
    CHECK(report.contains("spread_w1"));
    CHECK(fs::exists(dir / "out" / "group.csv"));

    const fs::path lonely = write_config(dir, {{"widths", {20, 40}}}, "lonely.json");
    CHECK(cli({"report", lonely.string(), "-o", (dir / "x").string()}).code == exit_usage);
}

TEST_CASE("the executable forwards exit codes") {
    const std::string exe = PHASEMAP_EXE;
    int status = std::system((exe + " preset foo > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(status) == 1);
    status = std::system((exe + " preset LeCun > /dev/null").c_str());
    CHECK(WEXITSTATUS(status) == 0);
}
