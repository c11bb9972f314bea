#include <doctest.h>

#include "qshield/errors.hpp"
#include "qshield/pqcsuite.hpp"
#include "qshield/symcrypto.hpp"

#include <fstream>
#include <sstream>

using namespace qshield;
using namespace qshield::pqc;

TEST_CASE("Lamport sizes follow from 2x256 preimages of 32 bytes") {
    LamportSignature lam;
    const auto info = lam.info();
    CHECK(info.pk_size == 2 * 256 * 32);
    CHECK(info.sk_size == 16384);
    CHECK(info.sig_or_ct_size == 256 * 32);
    Rng rng(1);
    auto kp = lam.keygen(rng);
    CHECK(kp.pk.size() == info.pk_size);
    CHECK(kp.sk.bytes().size() == info.sk_size);
    CHECK(lam.sign(kp.sk, as_bytes("m")).size() == info.sig_or_ct_size);
}

TEST_CASE("Lamport verifies honest messages and rejects flips") {
    LamportSignature lam;
    Rng rng(2);
    for (int t = 0; t < 100; ++t) {
        auto kp = lam.keygen(rng);
        Bytes m(32);
        rng.fill(m);
        const Bytes sig = lam.sign(kp.sk, m);
        CHECK(lam.verify(kp.pk, m, sig));
        if (t == 0) {
            for (std::size_t bit = 0; bit < 256; ++bit) {
                Bytes bad = m;
                bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
                CHECK_FALSE(lam.verify(kp.pk, bad, sig));
            }
        }
    }
}

TEST_CASE("Lamport soundness on distinct message pairs") {
    LamportSignature lam;
    Rng rng(3);
    auto kp = lam.keygen(rng);
    Bytes m(32);
    rng.fill(m);
    const Bytes sig = lam.sign(kp.sk, m);
    for (int t = 0; t < 1000; ++t) {
        Bytes m2(1 + rng.below(64));
        rng.fill(m2);
        if (m2 == m) continue;
        CHECK_FALSE(lam.verify(kp.pk, m2, sig));
    }
    CHECK_FALSE(lam.verify(kp.pk, m, Bytes(sig.size() - 1)));
}

TEST_CASE("one-time keys refuse a second signature") {
    LamportSignature lam;
    Rng rng(4);
    auto kp = lam.keygen(rng);
    CHECK(kp.sk.one_time());
    lam.sign(kp.sk, as_bytes("first"));
    CHECK(kp.sk.used());
    CHECK_THROWS_AS(lam.sign(kp.sk, as_bytes("second")), KeyReuse);
}

TEST_CASE("toy LWE parameters are failure free") {
    ToyLweParams p;
    CHECK(p.failure_free());
    CHECK(2 * p.n * p.eta * p.eta + p.eta < p.q / 4.0);
    ToyLweParams loud{256, 3329, 2};
    CHECK_FALSE(loud.failure_free());
}

TEST_CASE("toy LWE sizes match the 12-bit packing arithmetic") {
    ToyLweKem kem;
    const auto info = kem.info();
    CHECK(info.kind == SchemeKind::Kem);
    CHECK(info.pk_size == 32 + 256 * 12 / 8);
    CHECK(info.sk_size == 256 * 12 / 8);
    CHECK(info.sig_or_ct_size == 2 * 256 * 12 / 8);
    CHECK(info.ss_size == 32);
    Rng rng(5);
    const auto kp = kem.keygen(rng);
    CHECK(kp.ek.size() == info.pk_size);
    CHECK(kp.dk.size() == info.sk_size);
    const auto enc = kem.encaps(kp.ek, rng);
    CHECK(enc.ct.size() == info.sig_or_ct_size);
    CHECK(enc.ss.size() == 32);
}

TEST_CASE("toy LWE correctness over 1000 keypairs") {
    ToyLweKem kem;
    Rng rng(6);
    int failures = 0;
    for (int t = 0; t < 1000; ++t) {
        const auto kp = kem.keygen(rng);
        const auto enc = kem.encaps(kp.ek, rng);
        failures += kem.decaps(kp.dk, enc.ct) != enc.ss;
    }
    CHECK(failures == 0);
}

TEST_CASE("encapsulation is randomized") {
    ToyLweKem kem;
    Rng rng(7);
    const auto kp = kem.keygen(rng);
    const auto a = kem.encaps(kp.ek, rng);
    const auto b = kem.encaps(kp.ek, rng);
    CHECK(a.ct != b.ct);
    CHECK(a.ss != b.ss);
}

TEST_CASE("a flipped ciphertext byte yields a different secret") {
    ToyLweKem kem;
    Rng rng(8);
    const auto kp = kem.keygen(rng);
    const auto enc = kem.encaps(kp.ek, rng);
    for (std::size_t i = 0; i < enc.ct.size(); i += 37) {
        Bytes ct = enc.ct;
        ct[i] ^= 0x01;
        Bytes ss;
        try {
            ss = kem.decaps(kp.dk, ct);
        } catch (const DecapsulationFailure&) {
            continue;
        }
        CHECK(ss != enc.ss);
    }
    CHECK_THROWS_AS(kem.decaps(kp.dk, Bytes(10)), DecapsulationFailure);
}

TEST_CASE("fixture values for published schemes") {
    const auto d2 = scheme_info("Dilithium2");
    CHECK(d2.kind == SchemeKind::Signature);
    CHECK(d2.pk_size == 1312);
    CHECK(d2.sk_size == 2528);
    CHECK(d2.sig_or_ct_size == 2420);
    const auto k512 = scheme_info("Kyber512");
    CHECK(k512.kind == SchemeKind::Kem);
    CHECK(k512.pk_size == 800);
    CHECK(k512.sk_size == 1632);
    CHECK(k512.sig_or_ct_size == 768);
    CHECK(k512.ss_size == 32);
    const auto f512 = scheme_info("Falcon-512");
    CHECK(f512.pk_size == 897);
    CHECK(f512.sig_or_ct_size == 752);
    CHECK_THROWS_AS(scheme_info("NoSuchScheme"), UnknownScheme);
}

TEST_CASE("fixture file checksum is enforced") {
    const auto path = data_dir() / "pqc_scheme_fixtures.csv";
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(to_hex(symcrypto::sha256(as_bytes(ss.str()))) == kFixtureSha256);
    const auto tmp = std::filesystem::temp_directory_path() / "qshield_fixture_tampered.csv";
    {
        std::ofstream out(tmp, std::ios::binary);
        out << ss.str() << "Extra,1,1,1,1,\n";
    }
    CHECK_THROWS(FixtureTable::load(tmp));
    CHECK_NOTHROW(FixtureTable::load(tmp, false));
    std::filesystem::remove(tmp);
}

TEST_CASE("registry reports runnable schemes and artifact sizes agree") {
    const auto reg = Registry::with_defaults();
    CHECK(reg.runnable(kLamportName));
    CHECK(reg.runnable(kToyLweName));
    CHECK_FALSE(reg.runnable("Dilithium2"));
    CHECK_THROWS_AS(reg.signature("Dilithium2"), UnknownScheme);
    Rng rng(9);
    const auto info = reg.scheme_info(kLamportName);
    auto kp = reg.signature(kLamportName)->keygen(rng);
    CHECK(kp.pk.size() == info.pk_size);
}

TEST_CASE("bench rows and ordering for reference schemes") {
    const auto reg = Registry::with_defaults();
    Rng rng(10);
    const auto sig = bench_scheme(reg, kLamportName, 20, rng);
    REQUIRE(sig.size() == 3);
    CHECK(sig[0].op == "keygen");
    CHECK(sig[1].op == "sign");
    CHECK(sig[2].op == "verify");
    CHECK(sig[1].median_seconds < sig[0].median_seconds);
    CHECK(sig[0].size_bytes == 16384);
    CHECK(sig[1].size_bytes == 8192);
    const auto kem = bench_scheme(reg, kToyLweName, 20, rng);
    REQUIRE(kem.size() == 3);
    CHECK(kem[1].op == "encaps");
    CHECK(kem[2].op == "decaps");
    CHECK_THROWS_AS(bench_scheme(reg, kLamportName, 0, rng), std::invalid_argument);
    CHECK_THROWS_AS(bench_scheme(reg, "Dilithium2", 5, rng), UnknownScheme);
    CHECK(bench_csv_header() == "scheme,op,trials,median_seconds,size_bytes");
    CHECK(bench_csv_row({"x", "sign", 3, 0.5, 10}) == "x,sign,3,0.500000000,10");
}
