#include <doctest.h>

#include "qshield/errors.hpp"
#include "qshield/qkd.hpp"

#include <cmath>
#include <algorithm>
#include <numeric>

using namespace qshield;
using namespace qshield::qkd;

TEST_CASE("rotated preparation yields balanced bits") {
    Rng rng(1);
    const auto bits = generate_raw_bits(4096, rng);
    const auto ones = std::accumulate(bits.begin(), bits.end(), std::size_t{0});
    CHECK(std::abs(static_cast<double>(ones) - 2048.0) <= 4 * 32.0);
}

TEST_CASE("unrotated preparation always reads zero") {
    Rng rng(2);
    const auto bits = generate_unrotated_bits(256, rng);
    CHECK(std::accumulate(bits.begin(), bits.end(), 0) == 0);
}

TEST_CASE("sifting keeps exactly the matching-basis positions") {
    Rng rng(3);
    const auto s = run_bb84(1024, EveModel::none(), rng);
    std::vector<std::size_t> expect;
    for (std::size_t i = 0; i < s.n; ++i)
        if (s.sender_bases[i] == s.receiver_bases[i]) expect.push_back(i);
    CHECK(s.kept == expect);
    REQUIRE(s.sifted_sender.size() == expect.size());
    for (std::size_t k = 0; k < expect.size(); ++k) {
        CHECK(s.sifted_sender[k] == s.sender_bits[expect[k]]);
        CHECK(s.sifted_receiver[k] == s.receiver_bits[expect[k]]);
    }
}

TEST_CASE("noiseless sessions agree bit for bit") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        auto s = run_bb84(512, EveModel::none(), rng);
        CHECK(s.sifted_sender == s.sifted_receiver);
        estimate_qber(s, 0.25, rng);
        CHECK(s.qber == 0.0);
        CHECK_FALSE(abort_decision(s));
    }
}

TEST_CASE("test bits are disclosed and removed") {
    Rng rng(4);
    auto s = run_bb84(1024, EveModel::none(), rng);
    const auto before = s.sifted_sender.size();
    estimate_qber(s, 0.25, rng);
    CHECK(s.qber_estimated);
    CHECK(s.test_indices.size() == static_cast<std::size_t>(std::llround(0.25 * before)));
    CHECK(s.sifted_sender.size() + s.test_indices.size() == before);
    for (auto i : s.test_indices) CHECK(std::find(s.kept.begin(), s.kept.end(), i) != s.kept.end());
}

TEST_CASE("too few test bits is an error") {
    Rng rng(5);
    auto s = run_bb84(16, EveModel::none(), rng);
    CHECK_THROWS_AS(estimate_qber(s, 0.05, rng), std::invalid_argument);
}

TEST_CASE("intercept-resend and store-and-resend QBER ranges") {
    Rng rng(6);
    double ir = 0.0, sr = 0.0;
    for (int k = 0; k < 20; ++k) {
        auto a = run_bb84(4096, EveModel::intercept(), rng);
        estimate_qber(a, 0.5, rng);
        ir += a.qber;
        auto b = run_bb84(4096, EveModel::store_and_resend(), rng);
        estimate_qber(b, 0.5, rng);
        sr += b.qber;
    }
    CHECK(ir / 20 == doctest::Approx(0.25).epsilon(0.2));
    CHECK(sr / 20 == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("QBER grows with the attacked fraction") {
    double prev = -1.0;
    for (double f : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        Rng rng(7);
        double q = 0.0;
        for (int k = 0; k < 10; ++k) {
            auto s = run_bb84(4096, EveModel::intercept(f), rng);
            estimate_qber(s, 0.5, rng);
            q += s.qber;
        }
        q /= 10;
        CHECK(q > prev);
        CHECK(std::abs(q - 0.25 * f) < 0.03);
        prev = q;
    }
}

TEST_CASE("abort threshold is strict") {
    Bb84Session s;
    s.qber_estimated = true;
    s.qber = 0.11;
    CHECK_FALSE(abort_decision(s, 0.11));
    s.qber = 0.1100001;
    CHECK(abort_decision(s, 0.11));
    CHECK(s.aborted);
}

TEST_CASE("full intercept aborts almost always") {
    Rng rng(8);
    int aborts = 0;
    for (int k = 0; k < 100; ++k) {
        auto s = run_bb84(2048, EveModel::intercept(), rng);
        estimate_qber(s, 0.25, rng);
        aborts += abort_decision(s, 0.11);
    }
    CHECK(aborts >= 99);
}

TEST_CASE("expand_key concatenates blocks until enough bits") {
    Rng rng(9);
    Bb84Options o;
    o.block_n = 256;
    const auto k = expand_key(EveModel::none(), 100, rng, o);
    CHECK(k.sender.bytes.size() == 100);
    CHECK(k.sender.bytes == k.receiver.bytes);
    CHECK(k.sender.bits.size() == 800);
    // Each block yields about n/2 * 0.75 = 96 key bits.
    CHECK(k.blocks >= 7);
    CHECK(k.blocks <= 11);
}

TEST_CASE("expand_key rejects zero bytes and aborts under attack") {
    Rng rng(10);
    CHECK_THROWS_AS(expand_key(EveModel::none(), 0, rng), std::invalid_argument);
    try {
        expand_key(EveModel::intercept(), 32, rng);
        FAIL("expected an abort");
    } catch (const QkdAbort& e) {
        CHECK(e.qber() > 0.11);
    }
}

TEST_CASE("bits pack MSB first") {
    const Bytes b = pack_bits_msb_first({1, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 0});
    CHECK(b == Bytes{0x81, 0xF0});
}

TEST_CASE("same seed, same session") {
    Rng a(42), b(42);
    const auto s1 = run_bb84(512, EveModel::intercept(0.5), a);
    const auto s2 = run_bb84(512, EveModel::intercept(0.5), b);
    CHECK(s1.receiver_bits == s2.receiver_bits);
    CHECK(s1.kept == s2.kept);
}
