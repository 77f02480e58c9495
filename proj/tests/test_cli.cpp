#include "ivsel/cli.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "ivsel");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = ivsel::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path workdir(const std::string& name) {
    const fs::path p = fs::path(IVSEL_TEST_TMP) / "cli" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_config(const fs::path& dir, const json& j) {
    const fs::path p = dir / "c.json";
    std::ofstream(p) << j.dump(2);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

json base_config(const fs::path& dir, int m) {
    return {{"generate", {{"n", 1200}, {"m", m}, {"alpha", 0.7}}},
            {"nuisance", {{"rounds", 30}}},
            {"output", {{"dir", (dir / "out").string()}}}};
}

}  // namespace

TEST_CASE("generate, fit, bounds and evaluate chain together") {
    const fs::path dir = workdir("chain");
    const std::string cfg = write_config(dir, base_config(dir, 2)).string();

    const Run g = run({"generate", "--config", cfg, "--seed", "7", "--jobs", "1"});
    REQUIRE_MESSAGE(g.code == 0, g.err);
    CHECK(fs::exists(dir / "out" / "data.csv"));
    CHECK(fs::exists(dir / "out" / "data.schema.json"));
    CHECK(fs::exists(dir / "out" / "truth.csv"));
    CHECK(g.err.find("config hash") != std::string::npos);
    CHECK(g.err.find("\"seed\":7") != std::string::npos);

    const Run f = run({"fit", "--mode", "partial", "--config", cfg, "--jobs", "1"});
    REQUIRE_MESSAGE(f.code == 0, f.err);
    const json model = json::parse(slurp(dir / "out" / "model.json"));
    CHECK(model.at("metadata").at("mode") == "partial");
    CHECK(model.at("metadata").contains("config_hash"));

    const Run b = run({"bounds", "--config", cfg, "--jobs", "1"});
    REQUIRE_MESSAGE(b.code == 0, b.err);
    CHECK(b.out.find("closed form (L,U)") != std::string::npos);
    CHECK(b.out.find("LP") != std::string::npos);
    const std::string bounds = slurp(dir / "out" / "bounds.csv");
    CHECK(bounds.rfind("row,fold,l,u,r,w_point,w_partial,flags\n", 0) == 0);
    CHECK(std::count(bounds.begin(), bounds.end(), '\n') == 1201);

    const Run e = run({"evaluate", "--config", cfg, "--jobs", "1"});
    REQUIRE_MESSAGE(e.code == 0, e.err);
    const json metrics = json::parse(slurp(dir / "out" / "metrics.json"));
    CHECK(metrics.at("rows") == 1200);
    CHECK(metrics.at("accuracy").get<double>() > 0.5);
    CHECK(metrics.at("risk_bounds").at("lower").get<double>() <= metrics.at("risk_bounds").at("upper").get<double>());
}

TEST_CASE("fit modes and learner overrides") {
    const fs::path dir = workdir("modes");
    json j = base_config(dir, 3);
    j["dataset"] = {{"test_fraction", 0.3}};
    const std::string cfg = write_config(dir, j).string();
    REQUIRE(run({"generate", "--config", cfg}).code == 0);
    for (std::string mode : {"point", "selected", "full"}) {
        const Run f = run({"fit", "--mode", mode, "--config", cfg, "--loss", "hinge", "--K", "3"});
        REQUIRE_MESSAGE(f.code == 0, f.err);
        const json model = json::parse(slurp(dir / "out" / "model.json"));
        CHECK(model.at("metadata").at("mode") == mode);
        CHECK(model.at("metadata").at("rows") == 840);
        CHECK(model.at("metadata").at("learner").at("loss") == "hinge");
    }
    const Run bad = run({"fit", "--mode", "oracle", "--config", cfg});
    CHECK(bad.code == 3);
    CHECK(bad.err.find("error[config]") != std::string::npos);
}

TEST_CASE("experiment runs are reproducible") {
    const fs::path dir = workdir("experiment");
    json j = base_config(dir, 4);
    j["generate"]["n"] = 500;
    j["experiment"] = {{"alphas", {0.9}}, {"methods", {"partial", "selected"}}, {"replications", 3}};
    j["seed"] = 5;
    const std::string cfg = write_config(dir, j).string();
    const Run a = run({"experiment", "--config", cfg, "--jobs", "1"});
    REQUIRE_MESSAGE(a.code == 0, a.err);
    const std::string first = slurp(dir / "out" / "report.csv");
    CHECK(std::count(first.begin(), first.end(), '\n') == 7);
    const Run b = run({"experiment", "--config", cfg, "--jobs", "2"});
    REQUIRE(b.code == 0);
    CHECK(slurp(dir / "out" / "report.csv") == first);

    const Run js = run({"experiment", "--config", cfg, "--format", "json", "--replications", "1"});
    REQUIRE(js.code == 0);
    const json report = json::parse(slurp(dir / "out" / "report.csv"));
    CHECK(report.at("records").size() == 2);
}

TEST_CASE("usage and configuration errors") {
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"fit", "--bogus"}).code == 2);

    const fs::path dir = workdir("errors");
    const std::string cfg = write_config(dir, {{"generate", {{"colour", "red"}}}}).string();
    const Run r = run({"generate", "--config", cfg});
    CHECK(r.code == 3);
    CHECK(r.err.find("error[config]") != std::string::npos);

    const Run missing = run({"generate", "--config", (dir / "absent.json").string()});
    CHECK(missing.code == 3);

    const std::string nodata =
        write_config(dir, {{"dataset", {{"csv", (dir / "none.csv").string()}, {"schema", (dir / "none.json").string()}}}})
            .string();
    const Run d = run({"bounds", "--config", nodata});
    CHECK(d.code != 0);
    CHECK(d.err.find("error[") != std::string::npos);
}

TEST_CASE("seed override changes the data") {
    const fs::path dir = workdir("seed");
    const std::string cfg = write_config(dir, base_config(dir, 2)).string();
    REQUIRE(run({"generate", "--config", cfg, "--seed", "1"}).code == 0);
    const std::string a = slurp(dir / "out" / "data.csv");
    REQUIRE(run({"generate", "--config", cfg, "--seed", "1"}).code == 0);
    CHECK(slurp(dir / "out" / "data.csv") == a);
    REQUIRE(run({"generate", "--config", cfg, "--seed", "2"}).code == 0);
    CHECK(slurp(dir / "out" / "data.csv") != a);
}
