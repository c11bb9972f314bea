#include <doctest.h>

#include "qshield/pqcsuite.hpp"
#include "qshield/symcrypto.hpp"
#include "qshield/vqc.hpp"

#include <cmath>
#include <numbers>
#include <set>

using namespace qshield;
using namespace qshield::vqc;

namespace {

Dataset iris(std::uint64_t seed = 1) { return load_iris(pqc::data_dir() / "iris.csv", seed); }

Split separable(Rng& rng, std::size_t n) {
    Split s;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        const double c = y ? 0.8 : -0.8;
        s.push({c + 0.1 * rng.normal(), c + 0.1 * rng.normal(), 0.1 * rng.normal(), 0.1 * rng.normal()}, y);
    }
    return s;
}

} // namespace

TEST_CASE("parameter count and norm") {
    CHECK(kParamCount == 16);
    const auto sv = run_circuit(Features{0, 0, 0, 0}, WeightVector(16, 0.0));
    CHECK(sv.n_qubits() == 4);
    CHECK(std::abs(sv.norm_squared() - 1.0) < 1e-10);
    // |+>^4 is invariant under the CNOT chain.
    for (double p : sv.probabilities()) CHECK(p == doctest::Approx(1.0 / 16));
    CHECK_THROWS(run_circuit(Features{0, 0, 0, 0}, WeightVector(15, 0.0)));
}

TEST_CASE("norm stays 1 for random inputs and the state depends on x") {
    Rng rng(1);
    for (int t = 0; t < 100; ++t) {
        const auto p = random_params(rng);
        for (double v : p) CHECK((v >= -std::numbers::pi && v < std::numbers::pi));
        const Features a{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        const Features b{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        const auto sa = run_circuit(a, p);
        CHECK(std::abs(sa.norm_squared() - 1.0) < 1e-10);
        CHECK(qsim::fidelity(sa, run_circuit(b, p)) < 1.0 - 1e-9);
    }
}

TEST_CASE("bucketing is total and predict is in range") {
    Rng rng(2);
    const VqcModel m{random_params(rng), 3};
    const Features x{0.1, 0.2, 0.3, 0.4};
    const auto exact = class_distribution(m, x, 0, rng);
    REQUIRE(exact.size() == 3);
    CHECK(exact[0] + exact[1] + exact[2] == doctest::Approx(1.0).epsilon(1e-12));
    const auto probs = run_circuit(x, m.params).probabilities();
    double c1 = 0.0;
    for (std::size_t k = 1; k < 16; k += 3) c1 += probs[k];
    CHECK(exact[1] == doctest::Approx(c1).epsilon(1e-12));
    for (int t = 0; t < 20; ++t) {
        const int y = predict(m, {rng.normal(), rng.normal(), rng.normal(), rng.normal()}, kDefaultShots, rng);
        CHECK((y >= 0 && y < 3));
    }
}

TEST_CASE("predict and loss are deterministic under a fixed seed") {
    Rng init(3);
    const VqcModel m{random_params(init), 3};
    const auto d = iris();
    Rng a(9), b(9);
    CHECK(loss(m, d.val, kDefaultShots, a) == loss(m, d.val, kDefaultShots, b));
    CHECK(predict(m, d.val.x[0], kDefaultShots, a) == predict(m, d.val.x[0], kDefaultShots, b));
}

TEST_CASE("loss of a uniform output state") {
    Rng rng(4);
    Split s;
    for (int y = 0; y < 3; ++y) s.push({0, 0, 0, 0}, y);
    const VqcModel three{WeightVector(16, 0.0), 3};
    // 16 outcomes bucketed mod 3 give masses 6/16, 5/16, 5/16.
    const double oracle = -(std::log(6.0 / 16) + 2 * std::log(5.0 / 16)) / 3;
    const double l = loss(three, s, 0, rng);
    CHECK(l == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(std::abs(l - std::log(3.0)) < 0.005);

    Split s2;
    s2.push({0, 0, 0, 0}, 0);
    s2.push({0, 0, 0, 0}, 1);
    CHECK(loss({WeightVector(16, 0.0), 2}, s2, 0, rng) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("loss is non-negative and floored") {
    Rng rng(5);
    const auto d = iris();
    for (int t = 0; t < 10; ++t) {
        const VqcModel m{random_params(rng), 3};
        const double l = loss(m, d.val, 64, rng);
        CHECK(l >= 0.0);
        CHECK(l <= -std::log(kLossFloor) + 1e-12);
    }
}

TEST_CASE("train_local never returns worse than the start") {
    const auto d = iris();
    Rng rng(6);
    TrainConfig cfg;
    cfg.shots = 256;
    for (auto opt : {Optimizer::NelderMead, Optimizer::Spsa}) {
        cfg.optimizer = opt;
        cfg.seed = rng();
        const auto r = train_local({random_params(rng), 3}, d.train, cfg);
        CHECK(r.best_loss <= r.initial_loss);
        CHECK(r.best_loss_history.size() == cfg.max_iter);
        for (std::size_t k = 1; k < r.best_loss_history.size(); ++k)
            CHECK(r.best_loss_history[k] <= r.best_loss_history[k - 1]);
    }
    cfg.max_iter = 0;
    CHECK_THROWS_AS(train_local({WeightVector(16, 0.0), 3}, d.train, cfg), std::invalid_argument);
}

TEST_CASE("training improves a separable two-class set for most seeds") {
    int improved = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const Split s = separable(rng, 40);
        TrainConfig cfg;
        cfg.seed = seed;
        const auto r = train_local({random_params(rng), 2}, s, cfg);
        improved += r.best_loss < r.initial_loss;
    }
    CHECK(improved >= 8);
}

TEST_CASE("optimizers minimize a quadratic") {
    const Objective f = [](const WeightVector& p) {
        double s = 0.0;
        for (double v : p) s += (v - 1.0) * (v - 1.0);
        return s;
    };
    const auto nm = nelder_mead(f, {0.0, 0.0, 0.0}, 200, 0.5);
    CHECK(nm.best_value < 1e-4);
    Rng rng(7);
    const auto sp = spsa(f, {0.0, 0.0, 0.0}, 200, 0.5, rng);
    CHECK(sp.best_value < f({0.0, 0.0, 0.0}));
}

TEST_CASE("IRIS loads and splits") {
    const auto d = iris();
    CHECK(d.train.size() + d.val.size() + d.test.size() == 150);
    CHECK(d.train.size() == 90);
    CHECK(d.val.size() == 30);
    CHECK(d.test.size() == 30);
    CHECK(d.n_classes == 3);
    std::set<int> labels(d.train.y.begin(), d.train.y.end());
    CHECK(labels == std::set<int>{0, 1, 2});
    for (int f = 0; f < 4; ++f) {
        double mean = 0.0;
        for (const auto& x : d.train.x) mean += x[f];
        CHECK(std::abs(mean / d.train.size()) < 1e-9);
    }
}

TEST_CASE("synthetic genomic data") {
    const auto d = synth_genomic(5000, 150, 3);
    CHECK(d.n_classes == 2);
    CHECK(d.train.size() == 5000);
    CHECK(d.val.size() + d.test.size() == 150);
    for (int y : d.train.y) CHECK((y == 0 || y == 1));
    const auto again = synth_genomic(5000, 150, 3);
    CHECK(again.train.x == d.train.x);
}

TEST_CASE("partition_iid deals disjoint near-equal shards") {
    const auto d = iris();
    const auto shards = partition_iid(d, 3, 11);
    REQUIRE(shards.size() == 3);
    std::multiset<std::vector<double>> seen;
    for (const auto& s : shards) {
        CHECK(s.train.size() + s.val.size() == 30);
        CHECK(s.val.size() == 6);
        for (const auto* part : {&s.train, &s.val})
            for (const auto& x : part->x) seen.insert({x.begin(), x.end()});
    }
    std::multiset<std::vector<double>> all;
    for (const auto& x : d.train.x) all.insert({x.begin(), x.end()});
    CHECK(seen == all);

    const auto one = partition_iid(d, 1, 11);
    CHECK(one[0].train.size() + one[0].val.size() == d.train.size());

    const auto g = synth_genomic(5000, 150, 4);
    const auto twenty = partition_iid(g, 20, 4);
    CHECK(twenty.size() == 20);
    for (const auto& s : twenty) CHECK(s.train.size() + s.val.size() == 250);
}

TEST_CASE("model parameters roundtrip through text at dp >= 9 within rounding") {
    Rng rng(8);
    const auto p = random_params(rng);
    const auto back = symcrypto::parse_weights(symcrypto::serialize_weights(p, 12));
    for (std::size_t k = 0; k < p.size(); ++k) CHECK(std::abs(back[k] - p[k]) <= 0.5e-12 + 1e-15);
}
