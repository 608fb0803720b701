#include <catch_amalgamated.hpp>

#include "fesim/cli.hpp"
#include "fesim/report.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace fesim;
namespace fs = std::filesystem;
using Catch::Approx;

namespace {

const std::string exe = FESIM_EXE;
const std::string configs = FESIM_CONFIGS;
const std::string golden = std::string(FESIM_CONFIGS) + "/../tests/golden";

struct Run {
    int code;
    std::string out;
    std::string err;
};

fs::path scratch() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("fesim_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Run run(const std::string& args, const std::string& env = "") {
    static int n = 0;
    const auto out = scratch() / ("out" + std::to_string(n) + ".txt");
    const auto err = scratch() / ("err" + std::to_string(n++) + ".txt");
    const std::string cmd = env + " " + exe + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write_config(const std::string& name, const std::string& text) {
    const auto p = scratch() / name;
    std::ofstream(p) << text;
    return p;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_CASE("config parsing") {
    const auto cfg = cli::parse_config(R"({
        "protocol": {"mode": "asym_2_1", "voltage_code": -10, "target_current": 7.5, "train_length": 4},
        "flyback": {"preset": "table1_135"},
        "load": {"kind": "randles", "r_s": 1000, "r_p": 9000, "c_dl": 2e-7},
        "timing": {"c_par": 3e-9},
        "regulation": {"gain": 0.5}
    })");
    CHECK(cfg.sim.protocol.mode == PulseMode::asym_2_1);
    CHECK(cfg.sim.protocol.voltage_code == -10);
    REQUIRE(cfg.sim.protocol.target_current);
    CHECK(*cfg.sim.protocol.target_current == Approx(7.5e-3));
    CHECK(cfg.flyback_name == "table1_135");
    CHECK(cfg.endpoints.v_high == 135.0);
    CHECK(cfg.sim.load.kind() == LoadKind::randles);
    CHECK(cfg.sim.load.r_p() == 9000.0);
    CHECK(cfg.sim.timing.c_par == 3e-9);
    CHECK(cfg.sim.regulation_gain == 0.5);

    const auto empty = cli::parse_config("{}");
    CHECK(empty.flyback_name == "paper_120");
    CHECK_FALSE(empty.sim.protocol.target_current);
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(cli::parse_config("{"), cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_config("[]"), cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_config(R"({"protocl": {}})"), cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_config(R"({"protocol": {"freq": 5}})"), cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_config(R"({"protocol": {"frequency": "fast"}})"), cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_config(R"({"protocol": {"mode": "triangle"}})"), cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_config(R"({"flyback": {"preset": "x"}})"), cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_config(R"({"load": {"kind": "resistive", "r_s": 0}})"), cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_config(R"({"timing": {"r_on": -1}})"), cli::ConfigError);
    CHECK_THROWS_AS(cli::load_config("/definitely/not/here.json"), cli::ConfigError);
}

TEST_CASE("custom flyback endpoints") {
    const auto cfg = cli::parse_config(R"({"flyback": {"v_low": 5, "v_high": 100}})");
    CHECK(cfg.flyback_name == "custom");
    CHECK(code_to_voltage(cfg.sim.flyback, IdacCode(-127)) == Approx(100.0));
    CHECK(code_to_voltage(cfg.sim.flyback, IdacCode(127)) == Approx(5.0));
}

TEST_CASE("range syntax") {
    CHECK(cli::parse_range("").empty());
    CHECK(cli::parse_range("  ").empty());
    CHECK(cli::parse_range("-127:127:1").size() == 255);
    CHECK(cli::parse_range("1,10,100") == std::vector<double>{1, 10, 100});
    const auto r = cli::parse_range("0:1:0.1");
    REQUIRE(r.size() == 11);
    CHECK(r.back() == Approx(1.0));
    CHECK_THROWS_AS(cli::parse_range("1:2"), cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_range("1:2:0"), cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_range("a,b"), cli::ConfigError);
}

TEST_CASE("validate command") {
    CHECK(run("validate --config " + configs + "/symmetric_120.json").code == 0);

    const auto bad = run("validate --config " + configs + "/over_frequency.json");
    CHECK(bad.code == 1);
    CHECK(bad.out.find("10 kHz") != std::string::npos);
    CHECK(bad.out.find("Pulse Frequency") != std::string::npos);

    CHECK(run("validate --config /no/such/file.json").code == 2);
    CHECK(run("validate --config " + write_config("broken.json", "{\"protocol\": ").string()).code == 2);
    CHECK(run("validate").code == 2);
    CHECK(run("frobnicate").code == 2);
}

TEST_CASE("simulate command") {
    const auto csv = scratch() / "sym.csv";
    const auto r = run("simulate --config " + configs + "/symmetric_120.json --out " + csv.string());
    CHECK(r.code == 0);
    CHECK(r.out.find("peak v_out = 120.00 V") != std::string::npos);
    const auto rows = csv_rows(slurp(csv));
    REQUIRE(rows.size() > 10);
    CHECK(slurp(csv).rfind(std::string(waveform_csv_header) + "\n", 0) == 0);
    for (std::size_t i = 1; i < rows.size(); ++i) REQUIRE(rows[i].size() == 9);
}

TEST_CASE("regulated simulate reports the final code") {
    const auto r = run("simulate --config " + configs + "/regulated_5k.json --out " + (scratch() / "reg.csv").string());
    CHECK(r.code == 0);
    CHECK(r.out.find("final code = -83") != std::string::npos);
    CHECK(r.out.find("code trace: 0 -83") != std::string::npos);
}

TEST_CASE("compliance-limited simulate exits 1") {
    const auto cfg = write_config("hot.json", R"({
        "protocol": {"target_current": 20, "frequency": 1000, "phase1_width": 50e-6, "train_length": 5},
        "load": {"kind": "resistive", "r_s": 10000}})");
    const auto r = run("simulate --config " + cfg.string() + " --out " + (scratch() / "hot.csv").string());
    CHECK(r.code == 1);
    CHECK(r.out.find("saturated") != std::string::npos);
}

TEST_CASE("empty train writes the header only") {
    const auto csv = scratch() / "empty.csv";
    CHECK(run("simulate --config " + configs + "/empty_train.json --out " + csv.string()).code == 0);
    CHECK(slurp(csv) == std::string(waveform_csv_header) + "\n");
}

TEST_CASE("unwritable output exits 3") {
    const auto r = run("simulate --config " + configs + "/symmetric_120.json --out /no/such/dir/x.csv");
    CHECK(r.code == 3);
}

TEST_CASE("invalid protocol in simulate exits 1") {
    CHECK(run("simulate --config " + configs + "/over_frequency.json --out " + (scratch() / "f.csv").string())
              .code == 1);
}

TEST_CASE("CSV is byte identical across runs") {
    const auto a = scratch() / "a.csv";
    const auto b = scratch() / "b.csv";
    run("simulate --config " + configs + "/randles_asym.json --out " + a.string());
    run("simulate --config " + configs + "/randles_asym.json --out " + b.string(), "LC_ALL=de_DE.UTF-8");
    const auto sa = slurp(a);
    CHECK_FALSE(sa.empty());
    CHECK(sa == slurp(b));
}

TEST_CASE("golden waveform") {
    const auto out = scratch() / "golden.csv";
    CHECK(run("simulate --config " + golden + "/short_pulse.json --out " + out.string()).code == 0);
    const auto got = csv_rows(slurp(out));
    const auto want = csv_rows(slurp(golden + "/short_pulse.csv"));
    REQUIRE(got.size() == want.size());
    REQUIRE(got[0] == want[0]);
    // Numbers are compared to the last printed digit, so only a libm
    // difference in the final ulp could flip one.
    for (std::size_t i = 1; i < got.size(); ++i) {
        REQUIRE(got[i].size() == want[i].size());
        for (std::size_t c = 0; c < got[i].size(); ++c) {
            if (c == 4) {
                REQUIRE(got[i][c] == want[i][c]);
                continue;
            }
            const double g = std::stod(got[i][c]);
            const double w = std::stod(want[i][c]);
            INFO("row " << i << " col " << c);
            REQUIRE(std::abs(g - w) <= 2e-6 + 1e-8 * std::abs(w));
        }
    }
}

TEST_CASE("plain ASCII output") {
    const auto fancy = run("spec-check");
    CHECK(fancy.out.find("\xe2\x9c\x94") != std::string::npos);
    const auto plain = run("spec-check", "FESIM_PLAIN_ASCII=1");
    for (unsigned char ch : plain.out) REQUIRE(ch < 0x80);
    const auto sim = run("simulate --config " + configs + "/symmetric_120.json", "FESIM_PLAIN_ASCII=1");
    for (unsigned char ch : sim.out) REQUIRE(ch < 0x80);
    CHECK(sim.out.find("q1_uC") != std::string::npos);
}

TEST_CASE("spec-check passes on defaults") {
    const auto r = run("spec-check --ascii");
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(r.out.find("all checks passed") != std::string::npos);

    const auto rows = cli::run_spec_checks(cli::parse_config("{}"));
    CHECK(rows.size() >= 10);
    for (const auto& row : rows) {
        INFO(row.name << ": " << row.measured);
        CHECK(row.pass);
    }
}

TEST_CASE("spec-check fails the rise time with a 20 nF output") {
    const auto cfg = write_config("cpar.json", R"({"timing": {"c_par": 20e-9}})");
    const auto r = run("spec-check --ascii --config " + cfg.string());
    CHECK(r.code == 1);
    std::istringstream in(r.out);
    bool seen = false;
    for (std::string line; std::getline(in, line);) {
        if (line.find("pulse rise time") == std::string::npos) continue;
        seen = true;
        CHECK(line.rfind("FAIL", 0) == 0);
        CHECK(line.find("46.0") != std::string::npos);
    }
    CHECK(seen);
}

TEST_CASE("spec-check with the 135 V preset") {
    const auto r = run("spec-check --ascii --preset table1_135");
    CHECK(r.code == 0);
    CHECK(r.out.find("135.000000 V") != std::string::npos);
    CHECK(run("spec-check --preset nope").code == 2);
}

TEST_CASE("voltage code sweep") {
    const auto r = run("sweep --param voltage_code --range -127:127:1 --config " + configs + "/symmetric_120.json");
    CHECK(r.code == 0);
    const auto rows = csv_rows(r.out);
    REQUIRE(rows.size() == 256);
    CHECK(r.out.rfind(std::string(cli::sweep_csv_header), 0) == 0);
    for (std::size_t i = 2; i < rows.size(); ++i) {
        CHECK(std::stoi(rows[i][0]) == std::stoi(rows[i - 1][0]) + 1);
        CHECK(std::stod(rows[i][3]) <= std::stod(rows[i - 1][3]));
    }
}

TEST_CASE("frequency sweep") {
    const auto cfg = write_config("fast.json", R"({"protocol": {"phase1_width": 20e-6, "interphase_gap": 10e-6,
        "recovery_gap": 10e-6, "train_length": 3, "voltage_code": -50}})");
    const auto out = scratch() / "freq.csv";
    const auto r = run("sweep --param frequency --range 1,10,100,1000,10000 --config " + cfg.string() + " --out " +
                       out.string());
    CHECK(r.code == 0);
    const auto rows = csv_rows(slurp(out));
    REQUIRE(rows.size() == 6);
    const double bulk = 1e-6;  // 20 us / 20
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double f = std::stod(rows[i][0]);
        CHECK(rows[i][1] == "ok");
        CHECK(std::abs(std::stod(rows[i][10]) - 1.0 / f) <= bulk);
    }
}

TEST_CASE("sweep edge cases") {
    const auto empty = run("sweep --param load_r --range \"\"");
    CHECK(empty.code == 0);
    CHECK(empty.out == std::string(cli::sweep_csv_header) + "\n");

    CHECK(run("sweep --param resistance --range 1,2").code == 2);
    CHECK(run("sweep --param load_r --range 1:x:2").code == 2);

    const auto mixed = run("sweep --param frequency --range 100,20000");
    CHECK(mixed.code == 1);
    const auto rows = csv_rows(mixed.out);
    REQUIRE(rows.size() == 3);
    CHECK(rows[1][1] == "ok");
    CHECK(rows[2][1] == "invalid");

    CHECK(run("sweep --param voltage_code --range 0 --out /no/such/dir/s.csv").code == 3);
}

TEST_CASE("target current sweep") {
    const auto cfg = write_config("reg.json", R"({"protocol": {"phase1_width": 20e-6, "frequency": 1000,
        "train_length": 12}, "load": {"kind": "resistive", "r_s": 2000}})");
    const auto r = run("sweep --param target_current --range 2,5,10 --config " + cfg.string());
    CHECK(r.code == 0);
    const auto rows = csv_rows(r.out);
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double target = std::stod(rows[i][0]);
        // one code step at half the stack into 2 kOhm
        CHECK(std::abs(std::stod(rows[i][5]) - target) <= 0.5 * 0.4587 / 2000.0 * 1e3);
        CHECK_FALSE(rows[i][11].empty());
    }
}
