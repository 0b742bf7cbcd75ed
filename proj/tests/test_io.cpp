#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

#include "rbising/io.hpp"

using namespace rbising;
using Catch::Matchers::WithinAbs;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Scratch {
    fs::path dir;
    explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("rbising_io_" + name)) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(dir / name) << text;
        return dir / name;
    }
};

int run_cli(const std::string& args) {
    int st = std::system((std::string(RBISING_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
    SECTION("defaults") {
        auto c = parse_config_string("");
        CHECK(c.seed == 1);
        CHECK(c.N == 1);
        CHECK(c.method == "exact");
        CHECK(c.boundary.kind == "plus");
        CHECK(c.mc.sweeps == 100000);
    }
    SECTION("values") {
        auto c = parse_config_string(R"(
seed = 7
N = 2
Ns = [1, 2, 3]
beta = 0.5
method = "mc"
[boundary]
kind = "random"
replica = 4
[mc]
sweeps = 10
)");
        CHECK(c.seed == 7);
        CHECK(c.Ns == std::vector<int>{1, 2, 3});
        CHECK(c.beta == 0.5);
        CHECK(c.boundary.replica == 4);
        CHECK(c.mc.sweeps == 10);
    }
    SECTION("errors") {
        CHECK_THROWS_AS(parse_config_string("bogus = 1"), ConfigError);
        CHECK_THROWS_AS(parse_config_string("[mc]\nsweep = 1"), ConfigError);
        CHECK_THROWS_AS(parse_config_string("beta = -1.0"), ConfigError);
        CHECK_THROWS_AS(parse_config_string("lambda = 2.0"), ConfigError);
        CHECK_THROWS_AS(parse_config_string("N = \"two\""), ConfigError);
        CHECK_THROWS_AS(parse_config_string("[boundary]\nkind = \"wavy\""), ConfigError);
        CHECK_THROWS_AS(parse_config_string("N = "), ConfigError);
        CHECK_THROWS_AS(load_config("/nonexistent/rbising.toml"), ConfigError);
    }
}

TEST_CASE("config hash") {
    auto a = parse_config_string("seed = 3");
    auto b = parse_config_string("seed = 3\n[mc]\nsweeps = 100000");
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    CHECK(config_hash(a) != config_hash(parse_config_string("seed = 4")));
    auto d = document(a, "simulate");
    CHECK(d["config_hash"] == config_hash(a));
    CHECK(d["config"]["seed"] == 3);
}

TEST_CASE("number formatting") {
    CHECK(fmt_double(0.1) == "0.10000000000000001");
    CHECK(std::stod(fmt_double(1.0 / 3)) == 1.0 / 3);
    CHECK(fmt_double(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(num(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(num(2.5) == 2.5);
}

TEST_CASE("domain objects round trip") {
    Volume v(2);
    BoundaryCondition eta(v, 1);
    eta[3] = -1;
    CHECK(boundary_from_json(boundary_json(eta), v) == eta);
    CHECK_THROWS(boundary_from_json(Json::array({1, -1}), v));

    auto s = PolymerSystem::polymer_model(3, {{0, 2}}, {Complex(0.1, 0.2), 0.3, Complex(-0.1, 0)});
    auto t = polymer_system_from_json(polymer_system_json(s));
    REQUIRE(t.size() == 3);
    CHECK(t.incompatible(0, 2));
    CHECK_FALSE(t.incompatible(0, 1));
    for (int x = 0; x < 3; ++x) CHECK(t.activity(x) == s.activity(x));
    auto u = polymer_system_from_json(Json::parse(R"({"polymers": 2, "edges": [], "weights": [0.5, [0.1, -0.2]]})"));
    CHECK(u.activity(1) == Complex(0.1, -0.2));
    CHECK_THROWS_AS(polymer_system_from_json(Json::parse(R"({"polymers": 2, "edges": [[0]], "weights": [1, 1]})")),
                    ConfigError);
    CHECK_THROWS_AS(polymer_system_from_json(Json::parse(R"({"polymers": 2})")), ConfigError);
}

TEST_CASE("configured boundary conditions") {
    Volume v(2);
    auto c = parse_config_string("[boundary]\nkind = \"random\"\nreplica = 5\n");
    CHECK(boundary_from_config(c, v) == RandomBCEnsemble{c.seed}.sample(v, 5));
    CHECK(boundary_from_config(parse_config_string("[boundary]\nkind = \"minus\""), v) == BoundaryCondition(v, -1));
    CHECK(boundary_from_config(parse_config_string("[boundary]\nkind = \"dobrushin\""), v) == dobrushin_boundary(v));
    CHECK_THROWS(boundary_from_config(parse_config_string("[boundary]\nkind = \"explicit\"\nvalues = [1]"), v));
}

TEST_CASE("csv writer") {
    Scratch s("csv");
    {
        CsvWriter w((s.dir / "x.csv").string(), "abc", {"N", "F"});
        w.row({"1", "0.5"});
    }
    CHECK(slurp(s.dir / "x.csv") == "# config_hash=abc\nN,F\n1,0.5\n");
}

TEST_CASE("command line driver") {
    Scratch s("cli");
    const std::string out = " --out-dir " + s.dir.string();
    SECTION("exit codes") {
        auto good = s.write("good.toml", "N = 1\nbeta = 0.5\n");
        CHECK(run_cli("--config " + good.string() + out + " simulate") == 0);
        CHECK(fs::exists(s.dir / "simulate.json"));
        CHECK(run_cli("--config " + s.write("bad.toml", "beta = -2.0\n").string() + out + " simulate") == 2);
        CHECK(run_cli("--config " + s.write("typo.toml", "betta = 1.0\n").string() + out + " simulate") == 2);
        CHECK(run_cli("--no-such-flag simulate") == 2);
        CHECK(run_cli(out) == 2);
        CHECK(run_cli("--config " + s.write("big.toml", "N = 3\n").string() + out + " expand") == 3);
    }
    SECTION("expansion and partition function agree") {
        auto cfg = s.write("c.toml", "N = 2\nbeta = 1.5\n[boundary]\nkind = \"strip\"\nstrip = 4\n");
        REQUIRE(run_cli("--config " + cfg.string() + out + " expand") == 0);
        REQUIRE(run_cli("--config " + cfg.string() + out + " simulate") == 0);
        auto e = Json::parse(slurp(s.dir / "expand.json"));
        auto m = Json::parse(slurp(s.dir / "simulate.json"));
        CHECK(e["config_hash"] == m["config_hash"]);
        REQUIRE(e["reports"].size() == 2);
        for (auto& r : e["reports"]) CHECK_THAT(r["total"].get<double>(), WithinAbs(r["log_z_exact"].get<double>(), 1e-8));
        CHECK_THAT(e["reports"][0]["total"].get<double>(), WithinAbs(m["exact"]["log_z_plus"].get<double>(), 1e-8));
        double zp = m["exact"]["log_z_plus"], zm = m["exact"]["log_z_minus"], z = m["exact"]["log_z"];
        CHECK_THAT(std::log(std::exp(zp - z) + std::exp(zm - z)), WithinAbs(0.0, 1e-10));
    }
    SECTION("contours of explicit spins") {
        std::string vals = "spins = \"explicit\"\nspin_values = [1,1,1,1,-1,1,1,1,1]\n";
        REQUIRE(run_cli("--config " + s.write("sp.toml", vals).string() + out + " contours") == 0);
        auto j = Json::parse(slurp(s.dir / "contours.json"));
        REQUIRE(j["contours"].size() == 1);
        CHECK(j["contours"][0]["log_weight"] == -8.0);
        CHECK(j["exterior_sign"] == 1);
        CHECK(run_cli("--config " + s.write("sp2.toml", "spins = \"explicit\"\nspin_values = [1]\n").string() + out +
                      " contours") == 2);
    }
}
