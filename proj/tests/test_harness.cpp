#include <doctest.h>

#include "qshield/harness.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace qshield;
using namespace qshield::harness;

namespace {

struct Cli {
    int code = 0;
    std::string out, err;
};

Cli cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    Cli r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

} // namespace

TEST_CASE("key=value parsing") {
    const auto kv = parse_key_values("# comment\ndataset = iris\n\nrounds=4  # trailing\nmax-iter = 2\n");
    CHECK(kv.at("dataset") == "iris");
    CHECK(kv.at("rounds") == "4");
    CHECK(kv.at("max_iter") == "2");
    CHECK_THROWS_AS(parse_key_values("rounds 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_key_values("a=1\na=2\n"), ConfigError);
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS(build_config({{"dataset", "iris"}, {"colour", "blue"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"dataset", "iris"}, {"dp", "13"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"dataset", "iris"}, {"rounds", "0"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"dataset", "iris"}, {"channel", "fax"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"dataset", "iris"}, {"devices", "three"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"dataset", "cifar"}}), ConfigError);
    const auto cfg = build_config({{"dataset", "iris"},
                                   {"channel", "qkd_otp"},
                                   {"seed", "7"},
                                   {"qkd_block_n", "256"},
                                   {"qber_threshold", "0.2"},
                                   {"teleport_mode", "tomography"}});
    CHECK(cfg.channel.kind == fed::ChannelKind::QkdOtp);
    CHECK(cfg.seed == 7);
    CHECK(cfg.channel.qkd.block_n == 256);
    CHECK(cfg.channel.qkd.threshold == 0.2);
    CHECK(cfg.channel.teleport_mode == tp::Mode::Tomography);
    CHECK(cfg.shots == 1024);
}

TEST_CASE("run writes a CSV and a JSON summary") {
    const auto dir = std::filesystem::temp_directory_path() / "qshield_harness_test";
    std::filesystem::create_directories(dir);
    const auto csv = dir / "m.csv";
    const auto r = cli({"run", "--dataset", "iris", "--devices", "3", "--rounds", "3", "--channel", "qkd_otp",
                        "--seed", "7", "--shots", "128", "--max-iter", "2", "--out", csv.string()});
    CHECK(r.code == kExitOk);
    const std::string text = slurp(csv);
    CHECK(count_lines(text) == 4);
    const auto doc = nlohmann::json::parse(slurp(dir / "m.json"));
    CHECK(doc["summary"]["rounds"] == 3);
    CHECK(doc["config"]["channel"] == "qkd_otp");

    // Same flags through a config file give the same bytes.
    {
        std::ofstream f(dir / "run.cfg");
        f << "dataset = iris\nrounds = 3\nchannel = qkd_otp\nseed = 7\nshots = 128\nmax_iter = 2\n";
    }
    const auto csv2 = dir / "m2.csv";
    CHECK(cli({"run", "--config", (dir / "run.cfg").string(), "--out", csv2.string()}).code == kExitOk);
    CHECK(slurp(csv2) == text);
    std::filesystem::remove_all(dir);
}

TEST_CASE("run exit codes") {
    const auto missing = cli({"run", "--rounds", "2"});
    CHECK(missing.code == kExitUsage);
    CHECK(missing.err.find("Usage") != std::string::npos);
    CHECK(cli({"run", "--dataset", "iris", "--dp", "0"}).code == kExitUsage);
    CHECK(cli({"run", "--dataset", "iris", "--bogus", "1"}).code == kExitUsage);
    CHECK(cli({}).code == kExitUsage);

    const auto tampered = cli({"run", "--dataset", "iris", "--rounds", "2", "--channel", "pqc_sign", "--adversary",
                               "tamper", "--shots", "64", "--max-iter", "1"});
    CHECK(tampered.code == kExitAllAborted);
    CHECK(tampered.err.find("aggregation skipped") != std::string::npos);
}

TEST_CASE("seed falls back to QSHIELD_SEED") {
    setenv("QSHIELD_SEED", "99", 1);
    CHECK(build_config({{"dataset", "iris"}}).seed == 99);
    CHECK(build_config({{"dataset", "iris"}, {"seed", "3"}}).seed == 3);
    unsetenv("QSHIELD_SEED");
    CHECK(build_config({{"dataset", "iris"}}).seed == 0);
}

TEST_CASE("bench subcommand") {
    const auto r = cli({"bench", "sig", "--schemes", "lamport", "--trials", "5"});
    CHECK(r.code == kExitOk);
    CHECK(count_lines(r.out) == 4);
    CHECK(r.out.find("lamport-sha256,keygen,5,") != std::string::npos);
    const auto fx = cli({"bench", "sig", "--schemes", "Dilithium2", "--trials", "5"});
    CHECK(fx.code == kExitOk);
    CHECK(fx.out.find("1312/2528/2420") != std::string::npos);
    const auto kem = cli({"bench", "kem", "--trials", "3"});
    CHECK(count_lines(kem.out) == 4);
    CHECK(cli({"bench", "sig", "--trials", "0"}).code == kExitUsage);
    CHECK(cli({"bench", "sig", "--schemes", "nope"}).code == kExitUsage);
    CHECK(cli({"bench", "kem", "--schemes", "lamport"}).code == kExitUsage);
}

TEST_CASE("demo transcripts") {
    const auto clean = cli({"demo", "qkd", "--n", "64"});
    CHECK(clean.code == kExitOk);
    CHECK(clean.out.find("qber         0.000000") != std::string::npos);
    CHECK(clean.out.find("sifted") != std::string::npos);
    CHECK(clean.out.find("accept") != std::string::npos);
    const auto eve = cli({"demo", "qkd", "--n", "64", "--eve", "intercept"});
    CHECK(eve.out.find("qber         0.000000") == std::string::npos);
    const auto tele = cli({"demo", "teleport", "--theta", "1.0", "--phi", "0.5"});
    CHECK(tele.code == kExitOk);
    CHECK(tele.out.find("fidelity     1.000000") != std::string::npos);
    CHECK(tele.out.find("corrections") != std::string::npos);
    CHECK(cli({"demo", "qkd", "--eve", "martian"}).code == kExitUsage);
}
