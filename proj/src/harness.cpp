#include "qshield/harness.hpp"

#include "qshield/errors.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace qshield::harness {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError("invalid value for " + key + ": '" + v + "'");
    return out;
}

std::size_t parse_count(const std::string& key, const std::string& v, std::size_t min = 1) {
    const auto n = parse_number<std::uint64_t>(key, v);
    if (n < min) throw ConfigError(key + " must be >= " + std::to_string(min));
    return static_cast<std::size_t>(n);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

std::string dashed(std::string s) {
    for (auto& c : s)
        if (c == '_') c = '-';
    return s;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f || !(f << text)) throw std::runtime_error("cannot write " + p.string());
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

// ---- run -------------------------------------------------------------------

int cmd_run(const KeyValues& flags, const std::string& config_path, const std::string& usage, std::ostream& out,
            std::ostream& err) {
    KeyValues kv;
    if (!config_path.empty()) kv = parse_key_values(read_file(config_path));
    for (const auto& [k, v] : flags) kv[k] = v;
    if (!kv.count("dataset")) {
        err << "error: dataset is required\n" << usage;
        return kExitUsage;
    }
    const fed::ExperimentConfig cfg = build_config(kv);
    const fed::ExperimentResult res = fed::run_experiment(cfg);
    const std::string csv = fed::metrics_csv(res.rows);
    const std::string summary = summary_json(cfg, res);
    if (cfg.out_path.empty()) {
        out << csv;
        err << summary << '\n';
    } else {
        std::filesystem::path csv_path = cfg.out_path;
        std::filesystem::path json_path = csv_path;
        json_path.replace_extension(".json");
        if (json_path == csv_path) json_path += ".summary.json";
        write_file(csv_path, csv);
        write_file(json_path, summary + "\n");
        out << "wrote " << csv_path.string() << " and " << json_path.string() << '\n';
    }
    for (const auto& r : res.rows)
        if (!r.aggregated)
            err << "round " << r.round << ": aggregation skipped (" << r.aborted_devices.size()
                << " updates rejected)\n";
    return res.summary.aborted_rounds == res.summary.rounds ? kExitAllAborted : kExitOk;
}

// ---- bench -----------------------------------------------------------------

std::string canonical_scheme(const std::string& s) {
    if (s == "lamport") return pqc::kLamportName;
    if (s == "toy-lwe" || s == "lwe") return pqc::kToyLweName;
    return s;
}

std::string fixture_size_for(const pqc::SchemeInfo& f, const std::string& op) {
    if (op == "keygen") return std::to_string(f.pk_size);
    if (op == "sign" || op == "verify" || op == "encaps") return std::to_string(f.sig_or_ct_size);
    if (op == "decaps") return std::to_string(f.ss_size);
    return {};
}

int cmd_bench(const std::string& kind, const std::vector<std::string>& schemes_in, std::size_t trials,
              std::uint64_t seed, std::ostream& out, std::ostream& err) {
    if (kind != "sig" && kind != "kem") throw ConfigError("bench kind must be sig or kem");
    if (trials == 0) throw ConfigError("trials must be >= 1");
    const auto want = kind == "sig" ? pqc::SchemeKind::Signature : pqc::SchemeKind::Kem;
    std::vector<std::string> schemes;
    for (const auto& s : schemes_in) schemes.push_back(canonical_scheme(s));
    if (schemes.empty()) schemes.push_back(kind == "sig" ? pqc::kLamportName : pqc::kToyLweName);

    const auto reg = pqc::Registry::with_defaults();
    // Validate the whole list before timing anything.
    for (const auto& s : schemes) {
        pqc::SchemeInfo info;
        try {
            info = reg.scheme_info(s);
        } catch (const UnknownScheme&) {
            throw ConfigError("unknown scheme: " + s);
        }
        if (info.kind != want) throw ConfigError(s + " is not a " + (kind == "sig" ? "signature" : "KEM") + " scheme");
    }

    Rng rng(seed);
    out << pqc::bench_csv_header() << ",fixture_size\n";
    for (const auto& s : schemes) {
        const auto fixture = reg.fixture(s);
        if (!reg.runnable(s)) {
            const auto& f = *fixture;
            std::string sizes = std::to_string(f.pk_size) + "/" + std::to_string(f.sk_size) + "/" +
                                std::to_string(f.sig_or_ct_size);
            if (want == pqc::SchemeKind::Kem) sizes += "/" + std::to_string(f.ss_size);
            out << s << ",sizes,0,,," << sizes << '\n';
            err << "note: no provider registered for " << s << ", fixture sizes only\n";
            continue;
        }
        for (const auto& r : pqc::bench_scheme(reg, s, trials, rng))
            out << pqc::bench_csv_row(r) << ',' << (fixture ? fixture_size_for(*fixture, r.op) : "") << '\n';
    }
    return kExitOk;
}

// ---- demos -----------------------------------------------------------------

int cmd_demo_qkd(std::size_t n, const std::string& eve_name, double fraction, std::uint64_t seed,
                 std::ostream& out) {
    qkd::EveModel eve;
    if (eve_name == "none")
        eve = qkd::EveModel::none();
    else if (eve_name == "intercept")
        eve = qkd::EveModel::intercept(fraction);
    else if (eve_name == "swap")
        eve = qkd::EveModel::store_and_resend(fraction);
    else
        throw ConfigError("eve must be none, intercept or swap");
    if (n < 16) throw ConfigError("n must be >= 16");

    constexpr double kDemoTestFraction = 0.5;
    Rng rng(seed);
    auto s = qkd::run_bb84(n, eve, rng);
    out << "n            " << s.n << '\n';
    out << "eve          " << eve_name << '\n';
    out << "sifted       " << s.kept.size() << '\n';
    try {
        qkd::estimate_qber(s, kDemoTestFraction, rng);
    } catch (const std::invalid_argument& e) {
        out << "qber         n/a (" << e.what() << ")\n";
        return kExitOk;
    }
    const bool abort = qkd::abort_decision(s, qkd::kDefaultAbortThreshold);
    out << "test bits    " << s.test_indices.size() << '\n';
    out << "key bits     " << s.sifted_sender.size() << '\n';
    out << "qber         " << fmt6(s.qber) << '\n';
    out << "threshold    " << fmt6(qkd::kDefaultAbortThreshold) << '\n';
    out << "decision     " << (abort ? "ABORT" : "accept") << '\n';
    return kExitOk;
}

std::string corrections(int m1, int m2) {
    std::string c;
    if (m2) c += "X";
    if (m1) c += c.empty() ? "Z" : " then Z";
    return c.empty() ? "none" : c;
}

int cmd_demo_teleport(double theta, double phi, std::uint64_t seed, std::ostream& out) {
    const tp::Angles a{theta, phi};
    const auto target = tp::target_state(a);
    Rng rng(seed);
    const auto p = tp::prepare_and_measure(a, rng);
    const auto bob = tp::receive(p, p.m1, p.m2);
    out << "theta        " << fmt6(theta) << '\n';
    out << "phi          " << fmt6(phi) << '\n';
    out << "branch       m1=" << p.m1 << " m2=" << p.m2 << '\n';
    out << "corrections  " << corrections(p.m1, p.m2) << '\n';
    out << "fidelity     " << fmt6(qsim::fidelity(bob, target)) << '\n';
    out << "all branches (m1 m2  prob  fidelity):\n";
    for (const auto& b : qsim::branch_outcomes(tp::entangle_register(a), {tp::kQubitQ, tp::kQubitA})) {
        const tp::PendingTeleport pb{b.bits[0], b.bits[1], *b.post_state};
        const auto fb = qsim::fidelity(tp::receive(pb, pb.m1, pb.m2), target);
        out << "  " << b.bits[0] << "  " << b.bits[1] << "  " << fmt6(b.probability) << "  " << fmt6(fb) << '\n';
    }
    return kExitOk;
}

std::uint64_t env_seed() {
    if (const char* s = std::getenv("QSHIELD_SEED"); s && *s) return parse_number<std::uint64_t>("QSHIELD_SEED", s);
    return 0;
}

} // namespace

KeyValues parse_key_values(std::string_view text) {
    KeyValues kv;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        std::string key(trim(line.substr(0, eq)));
        std::string value(trim(line.substr(eq + 1)));
        for (auto& c : key)
            if (c == '-') c = '_';
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (!kv.emplace(key, value).second) throw ConfigError("duplicate key: " + key);
    }
    return kv;
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "dataset",       "devices",        "rounds",           "channel",      "adversary",
        "adversary_fraction", "adversary_target", "dp",       "shots",        "max_iter",
        "optimizer",     "seed",           "qkd_block_n",      "qber_threshold", "qkd_test_fraction",
        "otp_mode",      "teleport_mode",  "teleport_index",   "teleport_shots", "kem_encrypt_weights",
        "genomic_train", "genomic_server", "out"};
    return keys;
}

fed::ExperimentConfig build_config(const KeyValues& kv) {
    const auto& keys = config_keys();
    for (const auto& [k, v] : kv)
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw ConfigError("unknown config key: " + k);

    fed::ExperimentConfig cfg;
    cfg.seed = env_seed();
    auto get = [&](const char* k) -> const std::string* {
        const auto it = kv.find(k);
        return it == kv.end() ? nullptr : &it->second;
    };
    try {
        if (auto v = get("dataset")) cfg.dataset = *v;
        if (cfg.dataset != "iris" && cfg.dataset != "synthetic_genomic")
            throw ConfigError("dataset must be iris or synthetic_genomic");
        if (auto v = get("devices")) cfg.devices = parse_count("devices", *v);
        if (auto v = get("rounds")) cfg.rounds = parse_count("rounds", *v);
        if (auto v = get("channel")) cfg.channel.kind = fed::parse_channel(*v);
        if (auto v = get("adversary")) cfg.adversary.kind = fed::parse_adversary(*v);
        if (auto v = get("adversary_fraction")) {
            cfg.adversary.fraction = parse_number<double>("adversary_fraction", *v);
            if (!(cfg.adversary.fraction >= 0.0 && cfg.adversary.fraction <= 1.0))
                throw ConfigError("adversary_fraction must be in [0, 1]");
        }
        if (auto v = get("adversary_target")) cfg.adversary.target_device = parse_number<int>("adversary_target", *v);
        if (auto v = get("dp")) {
            cfg.channel.dp = parse_number<int>("dp", *v);
            if (cfg.channel.dp < 1 || cfg.channel.dp > 12) throw ConfigError("dp must be in 1..12");
        }
        if (auto v = get("shots")) cfg.shots = parse_count("shots", *v);
        if (auto v = get("max_iter")) cfg.max_iter = parse_count("max_iter", *v);
        if (auto v = get("optimizer")) {
            if (*v == "nelder_mead" || *v == "cobyla")
                cfg.optimizer = vqc::Optimizer::NelderMead;
            else if (*v == "spsa")
                cfg.optimizer = vqc::Optimizer::Spsa;
            else
                throw ConfigError("optimizer must be nelder_mead or spsa");
        }
        if (auto v = get("seed")) cfg.seed = parse_number<std::uint64_t>("seed", *v);
        if (auto v = get("qkd_block_n")) cfg.channel.qkd.block_n = parse_count("qkd_block_n", *v, 16);
        if (auto v = get("qber_threshold")) {
            cfg.channel.qkd.threshold = parse_number<double>("qber_threshold", *v);
            if (!(cfg.channel.qkd.threshold >= 0.0 && cfg.channel.qkd.threshold <= 1.0))
                throw ConfigError("qber_threshold must be in [0, 1]");
        }
        if (auto v = get("qkd_test_fraction")) {
            cfg.channel.qkd.test_fraction = parse_number<double>("qkd_test_fraction", *v);
            if (!(cfg.channel.qkd.test_fraction > 0.0 && cfg.channel.qkd.test_fraction < 1.0))
                throw ConfigError("qkd_test_fraction must be in (0, 1)");
        }
        if (auto v = get("otp_mode")) {
            if (*v == "shift")
                cfg.channel.otp_mode = symcrypto::OtpMode::Shift;
            else if (*v == "xor")
                cfg.channel.otp_mode = symcrypto::OtpMode::Xor;
            else
                throw ConfigError("otp_mode must be shift or xor");
        }
        if (auto v = get("teleport_mode")) {
            if (*v == "verify")
                cfg.channel.teleport_mode = tp::Mode::Verify;
            else if (*v == "tomography")
                cfg.channel.teleport_mode = tp::Mode::Tomography;
            else
                throw ConfigError("teleport_mode must be verify or tomography");
        }
        if (auto v = get("teleport_index")) {
            cfg.channel.teleport_index = parse_number<std::size_t>("teleport_index", *v);
            if (cfg.channel.teleport_index + 1 >= vqc::kParamCount)
                throw ConfigError("teleport_index out of range");
        }
        if (auto v = get("teleport_shots")) cfg.channel.teleport_shots = parse_count("teleport_shots", *v, tp::kMinShots);
        if (auto v = get("kem_encrypt_weights")) cfg.channel.kem_encrypt_weights = parse_bool("kem_encrypt_weights", *v);
        if (auto v = get("genomic_train")) cfg.genomic_train = parse_count("genomic_train", *v, 8);
        if (auto v = get("genomic_server")) cfg.genomic_server = parse_count("genomic_server", *v, 2);
        if (auto v = get("out")) cfg.out_path = *v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (cfg.dataset == "iris" && cfg.devices > 30) throw ConfigError("iris supports at most 30 devices");
    return cfg;
}

std::string summary_json(const fed::ExperimentConfig& cfg, const fed::ExperimentResult& res) {
    using nlohmann::json;
    const auto& s = res.summary;
    json rounds = json::array();
    for (const auto& r : res.rows) {
        rounds.push_back({{"round", r.round},
                          {"aggregated", r.aggregated},
                          {"comm_time_s", r.comm_time_s},
                          {"comm_wall_time_s", std::round(r.comm_wall_time_s * 1e6) / 1e6},
                          {"aborted_devices", r.aborted_devices},
                          {"downlink_failed", r.downlink_failed}});
    }
    json doc = {
        {"config",
         {{"dataset", cfg.dataset},
          {"devices", cfg.devices},
          {"rounds", cfg.rounds},
          {"channel", fed::to_string(cfg.channel.kind)},
          {"adversary", fed::to_string(cfg.adversary.kind)},
          {"adversary_fraction", cfg.adversary.fraction},
          {"dp", cfg.channel.dp},
          {"shots", cfg.shots},
          {"max_iter", cfg.max_iter},
          {"optimizer", cfg.optimizer == vqc::Optimizer::Spsa ? "spsa" : "nelder_mead"},
          {"seed", cfg.seed},
          {"qkd_block_n", cfg.channel.qkd.block_n},
          {"qber_threshold", cfg.channel.qkd.threshold},
          {"teleport_mode", cfg.channel.teleport_mode == tp::Mode::Verify ? "verify" : "tomography"}}},
        {"summary",
         {{"rounds", s.rounds},
          {"final_test_acc", s.final_test_acc},
          {"avg_test_acc", s.avg_test_acc},
          {"final_val_loss", s.final_val_loss},
          {"avg_val_loss", s.avg_val_loss},
          {"avg_device_loss", s.avg_device_loss},
          {"avg_comm_time_s", s.avg_comm_time_s},
          {"avg_comm_wall_time_s", std::round(s.avg_comm_wall_time_s * 1e6) / 1e6},
          {"aborted_rounds", s.aborted_rounds}}},
        {"rounds", rounds},
        {"final_global_params", res.final_global}};
    return doc.dump(2);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"qshield: quantum-secure federated learning simulator", "qshield"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run a federated experiment and write metrics");
    std::string config_path;
    run->add_option("--config", config_path, "flat key=value config file; flags override it");
    std::map<std::string, std::string> run_values;
    std::map<std::string, CLI::Option*> run_opts;
    for (const auto& k : config_keys()) run_opts[k] = run->add_option("--" + dashed(k), run_values[k]);

    auto* bench = app.add_subcommand("bench", "time reference signature or KEM schemes");
    std::string bench_kind;
    std::vector<std::string> bench_schemes;
    long long bench_trials = 50;
    std::uint64_t bench_seed = 0;
    bench->add_option("kind", bench_kind, "sig or kem")->required();
    bench->add_option("--schemes", bench_schemes, "scheme names")->delimiter(',');
    bench->add_option("--trials", bench_trials, "timed runs per operation");
    auto* bench_seed_opt = bench->add_option("--seed", bench_seed);

    auto* demo = app.add_subcommand("demo", "print a transcript of one protocol run");
    std::string demo_kind, eve = "none";
    std::size_t demo_n = 64;
    double eve_fraction = 1.0, theta = 1.0, phi = 0.5;
    std::uint64_t demo_seed = 0;
    demo->add_option("kind", demo_kind, "qkd or teleport")->required();
    demo->add_option("--n", demo_n, "qubits sent (qkd)");
    demo->add_option("--eve", eve, "none, intercept or swap (qkd)");
    demo->add_option("--eve-fraction", eve_fraction, "portion of qubits attacked (qkd)");
    demo->add_option("--theta", theta, "polar angle (teleport)");
    demo->add_option("--phi", phi, "azimuthal angle (teleport)");
    auto* demo_seed_opt = demo->add_option("--seed", demo_seed);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << app.help();
        return kExitUsage;
    }

    try {
        if (run->parsed()) {
            KeyValues flags;
            for (const auto& [k, opt] : run_opts)
                if (opt->count()) flags[k] = run_values[k];
            return cmd_run(flags, config_path, run->help(), out, err);
        }
        if (bench->parsed()) {
            if (bench_trials <= 0) throw ConfigError("trials must be >= 1");
            const auto seed = bench_seed_opt->count() ? bench_seed : env_seed();
            return cmd_bench(bench_kind, bench_schemes, static_cast<std::size_t>(bench_trials), seed, out, err);
        }
        const auto seed = demo_seed_opt->count() ? demo_seed : env_seed();
        if (demo_kind == "qkd") return cmd_demo_qkd(demo_n, eve, eve_fraction, seed, out);
        if (demo_kind == "teleport") return cmd_demo_teleport(theta, phi, seed, out);
        throw ConfigError("demo kind must be qkd or teleport");
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << '\n';
        return kExitRuntime;
    }
}

} // namespace qshield::harness
