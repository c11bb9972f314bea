#include <doctest.h>

#include "qshield/qsim.hpp"
#include "qshield/rng.hpp"

#include <cmath>
#include <numbers>

using namespace qshield;
using namespace qshield::qsim;

namespace {

constexpr double kEps = 1e-12;

Gate random_gate(int n, Rng& rng) {
    const int q = static_cast<int>(rng.below(n));
    switch (rng.below(5)) {
    case 0: return Gate::h(q);
    case 1: return Gate::x(q);
    case 2: return Gate::z(q);
    case 3: {
        int t = static_cast<int>(rng.below(n - 1));
        if (t >= q) ++t;
        return Gate::cnot(q, t);
    }
    default:
        return Gate::u3(q, rng.uniform(0, std::numbers::pi), rng.uniform(0, 2 * std::numbers::pi),
                        rng.uniform(0, 2 * std::numbers::pi));
    }
}

} // namespace

TEST_CASE("H on |0> gives equal superposition") {
    Statevector sv(1);
    sv.h(0);
    CHECK(sv[0].real() == doctest::Approx(1 / std::sqrt(2.0)).epsilon(kEps));
    CHECK(sv[1].real() == doctest::Approx(1 / std::sqrt(2.0)).epsilon(kEps));
    CHECK(sv.probability_one(0) == doctest::Approx(0.5));
}

TEST_CASE("X flips and qubit 0 is the low bit") {
    Statevector sv(2);
    sv.x(0);
    CHECK(std::abs(sv[1] - Amplitude(1)) < kEps);
    sv.x(1);
    CHECK(std::abs(sv[3] - Amplitude(1)) < kEps);
}

TEST_CASE("H then CNOT prepares a Bell pair") {
    Statevector sv(2);
    sv.h(0).cnot(0, 1);
    const double r = 1 / std::sqrt(2.0);
    CHECK(std::abs(sv[0] - Amplitude(r)) < kEps);
    CHECK(std::abs(sv[3] - Amplitude(r)) < kEps);
    CHECK(std::abs(sv[1]) < kEps);
    CHECK(std::abs(sv[2]) < kEps);
}

TEST_CASE("U3(pi/2, pi/2, 0) on |0>") {
    Statevector sv(1);
    sv.u3(0, std::numbers::pi / 2, std::numbers::pi / 2);
    const double r = 1 / std::sqrt(2.0);
    CHECK(std::abs(sv[0] - Amplitude(r, 0)) < kEps);
    CHECK(std::abs(sv[1] - Amplitude(0, r)) < kEps);
}

TEST_CASE("Z leaves probabilities alone and flips the |1> sign") {
    Statevector sv(1);
    sv.h(0).z(0);
    CHECK(sv[1].real() == doctest::Approx(-1 / std::sqrt(2.0)));
    CHECK(sv.probability_one(0) == doctest::Approx(0.5));
}

TEST_CASE("norm is preserved by random gate sequences") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(5));
        Statevector sv(n);
        for (int k = 0; k < 20; ++k) sv.apply(random_gate(n, rng));
        CHECK(std::abs(sv.norm_squared() - 1.0) < 1e-12);
    }
}

TEST_CASE("a sequence followed by its inverse returns to |0>") {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(4));
        if (n == 1) continue;
        std::vector<Gate> seq;
        for (int k = 0; k < 20; ++k) seq.push_back(random_gate(n, rng));
        Statevector sv(n);
        for (const auto& g : seq) sv.apply(g);
        for (auto it = seq.rbegin(); it != seq.rend(); ++it) sv.apply(it->inverse());
        CHECK(fidelity(sv, new_state(n)) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("U3 inverse swaps phi and lambda") {
    const Gate g = Gate::u3(0, 0.3, 0.7, 1.1);
    const Gate inv = g.inverse();
    CHECK(inv.theta == doctest::Approx(-0.3));
    CHECK(inv.phi == doctest::Approx(-1.1));
    CHECK(inv.lam == doctest::Approx(-0.7));
}

TEST_CASE("measurement collapses and reports the Born probability") {
    Rng rng(3);
    Statevector sv(2);
    sv.h(0).cnot(0, 1);
    auto [rec, post] = measure(sv, 0, rng);
    CHECK(rec.pre_prob == doctest::Approx(0.5));
    const std::size_t idx = rec.bit ? 3 : 0;
    CHECK(std::abs(std::abs(post[idx]) - 1.0) < kEps);
    CHECK(post.norm_squared() == doctest::Approx(1.0));
}

TEST_CASE("branch probabilities sum to one and match sampling") {
    Rng rng(21);
    Statevector sv(3);
    sv.u3(0, 1.1, 0.4).u3(1, 2.0, 1.3).cnot(0, 2).h(1);
    const auto branches = branch_outcomes(sv, {0, 1});
    REQUIRE(branches.size() == 4);
    double total = 0.0;
    for (const auto& b : branches) total += b.probability;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    constexpr int kSamples = 100000;
    std::array<int, 4> counts{};
    for (int s = 0; s < kSamples; ++s) {
        auto [r0, s0] = measure(sv, 0, rng);
        auto [r1, s1] = measure(s0, 1, rng);
        (void)s1;
        ++counts[r0.bit * 2 + r1.bit];
    }
    for (const auto& b : branches) {
        const int k = b.bits[0] * 2 + b.bits[1];
        const double sigma = std::sqrt(b.probability * (1 - b.probability) / kSamples);
        CHECK(std::abs(counts[k] / double(kSamples) - b.probability) <= 4 * sigma + 1e-12);
    }
}

TEST_CASE("branch bitstring lists the first qubit first") {
    Statevector sv(2);
    sv.x(1);
    const auto branches = branch_outcomes(sv, {1, 0});
    for (const auto& b : branches)
        if (b.probability > 0.5) CHECK(b.bitstring() == "10");
}

TEST_CASE("zero-probability branches carry no post state") {
    Statevector sv(2);
    const auto branches = branch_outcomes(sv, {0});
    REQUIRE(branches.size() == 2);
    CHECK(branches[0].post_state.has_value());
    CHECK_FALSE(branches[1].post_state.has_value());
}

TEST_CASE("sample_counts sums to shots") {
    Rng rng(5);
    const auto c = sample_counts({0.1, 0.2, 0.3, 0.4}, 1000, rng);
    CHECK(c[0] + c[1] + c[2] + c[3] == 1000);
}

TEST_CASE("invalid qubit indices throw") {
    Statevector sv(2);
    CHECK_THROWS(sv.h(2));
    CHECK_THROWS(sv.cnot(0, 0));
    CHECK_THROWS(Statevector(0));
    CHECK_THROWS(Statevector(11));
}
