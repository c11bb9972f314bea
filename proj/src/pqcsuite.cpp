#include "qshield/pqcsuite.hpp"

#include "qshield/errors.hpp"
#include "qshield/symcrypto.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#ifndef QSHIELD_DEFAULT_DATA_DIR
#define QSHIELD_DEFAULT_DATA_DIR "data"
#endif

namespace qshield::pqc {

void SigningKey::consume() {
    if (one_time_ && used_) throw KeyReuse();
    used_ = true;
}

// ---- Lamport -------------------------------------------------------------

SchemeInfo LamportSignature::info() const {
    return {kLamportName, SchemeKind::Signature, 0, 2 * kBits * kHash, 2 * kBits * kHash, kBits * kHash, 0};
}

SigKeypair LamportSignature::keygen(Rng& rng) const {
    Bytes sk(2 * kBits * kHash);
    rng.fill(sk);
    Bytes pk;
    pk.reserve(sk.size());
    for (std::size_t i = 0; i < 2 * kBits; ++i) {
        const auto h = symcrypto::sha256(ByteView(sk).subspan(i * kHash, kHash));
        pk.insert(pk.end(), h.begin(), h.end());
    }
    return {std::move(pk), SigningKey(std::move(sk), true), kLamportName};
}

namespace {
int digest_bit(const symcrypto::Digest& d, std::size_t i) { return (d[i / 8] >> (7 - i % 8)) & 1; }
} // namespace

Bytes LamportSignature::sign(SigningKey& sk, ByteView message) const {
    if (sk.bytes().size() != 2 * kBits * kHash) throw std::invalid_argument("Lamport secret key has wrong size");
    sk.consume();
    const auto d = symcrypto::sha256(message);
    Bytes sig;
    sig.reserve(kBits * kHash);
    for (std::size_t i = 0; i < kBits; ++i) {
        const std::size_t slot = 2 * i + static_cast<std::size_t>(digest_bit(d, i));
        const auto* p = sk.bytes().data() + slot * kHash;
        sig.insert(sig.end(), p, p + kHash);
    }
    return sig;
}

bool LamportSignature::verify(ByteView pk, ByteView message, ByteView signature) const {
    if (pk.size() != 2 * kBits * kHash || signature.size() != kBits * kHash) return false;
    const auto d = symcrypto::sha256(message);
    bool ok = true;
    for (std::size_t i = 0; i < kBits; ++i) {
        const std::size_t slot = 2 * i + static_cast<std::size_t>(digest_bit(d, i));
        const auto h = symcrypto::sha256(signature.subspan(i * kHash, kHash));
        ok &= std::equal(h.begin(), h.end(), pk.begin() + static_cast<std::ptrdiff_t>(slot * kHash));
    }
    return ok;
}

// ---- toy ring-LWE KEM ------------------------------------------------------

namespace {

using Poly = std::vector<std::int32_t>;  // coefficients in [0, q)

constexpr std::size_t kSeedSize = 32;
constexpr char kSsDomain[] = "qshield-toy-lwe-ss";

std::int32_t mod_q(std::int64_t v, std::int32_t q) {
    auto r = static_cast<std::int32_t>(v % q);
    return r < 0 ? r + q : r;
}

Poly small_poly(std::size_t n, int eta, Rng& rng) {
    Poly p(n);
    for (auto& c : p) c = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(2 * eta + 1))) - eta;
    return p;
}

// Negacyclic product in Z_q[x]/(x^n + 1). `small` holds signed coefficients.
Poly mul(const Poly& a, const Poly& small, std::int32_t q) {
    const std::size_t n = a.size();
    std::vector<std::int64_t> acc(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
        const std::int64_t s = small[j];
        if (s == 0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = i + j;
            if (k < n)
                acc[k] += a[i] * s;
            else
                acc[k - n] -= a[i] * s;
        }
    }
    Poly out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = mod_q(acc[i], q);
    return out;
}

Poly add(Poly a, const Poly& b, std::int32_t q) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = mod_q(static_cast<std::int64_t>(a[i]) + b[i], q);
    return a;
}

Poly expand_a(ByteView seed, std::size_t n, std::int32_t q) {
    Poly a;
    a.reserve(n);
    std::uint32_t counter = 0;
    while (a.size() < n) {
        Bytes block(seed.begin(), seed.end());
        for (int s = 24; s >= 0; s -= 8) block.push_back(static_cast<std::uint8_t>(counter >> s));
        ++counter;
        const auto h = symcrypto::sha256(block);
        for (std::size_t i = 0; i + 3 <= h.size() && a.size() < n; i += 3) {
            const std::int32_t c0 = h[i] | (h[i + 1] & 0x0F) << 8;
            const std::int32_t c1 = h[i + 1] >> 4 | h[i + 2] << 4;
            if (c0 < q) a.push_back(c0);
            if (c1 < q && a.size() < n) a.push_back(c1);
        }
    }
    return a;
}

void pack12(const Poly& p, Bytes& out) {
    for (std::size_t i = 0; i < p.size(); i += 2) {
        const auto c0 = static_cast<std::uint32_t>(p[i]);
        const auto c1 = static_cast<std::uint32_t>(p[i + 1]);
        out.push_back(static_cast<std::uint8_t>(c0 & 0xFF));
        out.push_back(static_cast<std::uint8_t>(c0 >> 8 | (c1 & 0x0F) << 4));
        out.push_back(static_cast<std::uint8_t>(c1 >> 4));
    }
}

Poly unpack12(ByteView in, std::size_t n, std::int32_t q) {
    if (in.size() != n / 2 * 3) throw DecapsulationFailure("packed polynomial has wrong length");
    Poly p(n);
    for (std::size_t i = 0; i < n; i += 2) {
        const auto* b = in.data() + i / 2 * 3;
        p[i] = b[0] | (b[1] & 0x0F) << 8;
        p[i + 1] = b[1] >> 4 | b[2] << 4;
        if (p[i] >= q || p[i + 1] >= q) throw DecapsulationFailure("coefficient out of range");
    }
    return p;
}

Bytes shared_secret(ByteView m, ByteView ct) {
    const auto hct = symcrypto::sha256(ct);
    Bytes buf(std::begin(kSsDomain), std::end(kSsDomain) - 1);
    buf.insert(buf.end(), m.begin(), m.end());
    buf.insert(buf.end(), hct.begin(), hct.end());
    const auto ss = symcrypto::sha256(buf);
    return {ss.begin(), ss.end()};
}

} // namespace

bool ToyLweParams::failure_free() const {
    return 2.0 * static_cast<double>(n) * eta * eta + eta < q / 4.0;
}

ToyLweKem::ToyLweKem(ToyLweParams params) : params_(params) {
    if (params_.n < 256 || params_.n % 2 != 0 || (params_.n & (params_.n - 1)) != 0)
        throw std::invalid_argument("toy LWE: n must be a power of two >= 256");
    if (params_.q < 257 || params_.q >= 4096) throw std::invalid_argument("toy LWE: q must fit in 12 bits");
    if (params_.eta < 1) throw std::invalid_argument("toy LWE: eta must be >= 1");
    if (!params_.failure_free()) throw std::invalid_argument("toy LWE: parameters admit decryption failure");
}

SchemeInfo ToyLweKem::info() const {
    const std::size_t poly_bytes = params_.n / 2 * 3;
    return {kToyLweName, SchemeKind::Kem, 0, kSeedSize + poly_bytes, poly_bytes, 2 * poly_bytes, 32};
}

KemKeypair ToyLweKem::keygen(Rng& rng) const {
    const std::int32_t q = params_.q;
    Bytes seed(kSeedSize);
    rng.fill(seed);
    const Poly a = expand_a(seed, params_.n, q);
    const Poly s = small_poly(params_.n, params_.eta, rng);
    const Poly e = small_poly(params_.n, params_.eta, rng);
    const Poly b = add(mul(a, s, q), e, q);

    KemKeypair kp;
    kp.scheme = kToyLweName;
    kp.ek = seed;
    pack12(b, kp.ek);
    Poly s_mod(s.size());
    std::transform(s.begin(), s.end(), s_mod.begin(), [q](std::int32_t c) { return mod_q(c, q); });
    pack12(s_mod, kp.dk);
    return kp;
}

KemEncapsulation ToyLweKem::encaps(ByteView ek, Rng& rng) const {
    const std::int32_t q = params_.q;
    const std::size_t n = params_.n;
    if (ek.size() != info().pk_size) throw std::invalid_argument("toy LWE: encapsulation key has wrong size");
    const Poly a = expand_a(ek.first(kSeedSize), n, q);
    const Poly b = unpack12(ek.subspan(kSeedSize), n, q);

    Bytes m(n / 8);
    rng.fill(m);
    const Poly r = small_poly(n, params_.eta, rng);
    const Poly e1 = small_poly(n, params_.eta, rng);
    const Poly e2 = small_poly(n, params_.eta, rng);

    Poly u = add(mul(a, r, q), e1, q);
    Poly v = add(mul(b, r, q), e2, q);
    const std::int32_t half = (q + 1) / 2;
    for (std::size_t i = 0; i < n; ++i)
        if ((m[i / 8] >> (i % 8)) & 1) v[i] = mod_q(static_cast<std::int64_t>(v[i]) + half, q);

    KemEncapsulation out;
    pack12(u, out.ct);
    pack12(v, out.ct);
    out.ss = shared_secret(m, out.ct);
    return out;
}

Bytes ToyLweKem::decaps(ByteView dk, ByteView ct) const {
    const std::int32_t q = params_.q;
    const std::size_t n = params_.n;
    const std::size_t poly_bytes = n / 2 * 3;
    if (dk.size() != poly_bytes) throw DecapsulationFailure("decapsulation key has wrong size");
    if (ct.size() != 2 * poly_bytes) throw DecapsulationFailure("ciphertext has wrong size");

    Poly s = unpack12(dk, n, q);
    for (auto& c : s) c = c > q / 2 ? c - q : c;  // back to signed
    const Poly u = unpack12(ct.first(poly_bytes), n, q);
    const Poly v = unpack12(ct.subspan(poly_bytes), n, q);
    const Poly us = mul(u, s, q);

    Bytes m(n / 8, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t w = mod_q(static_cast<std::int64_t>(v[i]) - us[i], q);
        // Closer to q/2 than to 0 decodes as 1.
        const std::int32_t dist0 = std::min(w, q - w);
        const std::int32_t disth = std::abs(w - (q + 1) / 2);
        if (disth < dist0) m[i / 8] |= static_cast<std::uint8_t>(1U << (i % 8));
    }
    return shared_secret(m, ct);
}

// ---- fixtures & registry ---------------------------------------------------

FixtureTable FixtureTable::parse(std::string_view text) {
    FixtureTable t;
    std::istringstream in{std::string(text)};
    std::string line;
    bool header = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            if (line != "name,level,pk,sk,sig_or_ct,ss")
                throw std::runtime_error("fixture header mismatch: " + line);
            header = false;
            continue;
        }
        std::vector<std::string> cols;
        std::size_t start = 0;
        while (true) {
            const auto c = line.find(',', start);
            cols.push_back(line.substr(start, c == std::string::npos ? std::string::npos : c - start));
            if (c == std::string::npos) break;
            start = c + 1;
        }
        if (cols.size() != 6) throw std::runtime_error("fixture line " + std::to_string(lineno) + ": expected 6 columns");
        SchemeInfo s;
        s.name = cols[0];
        s.nist_level = std::stoi(cols[1]);
        s.pk_size = std::stoul(cols[2]);
        s.sk_size = std::stoul(cols[3]);
        s.sig_or_ct_size = std::stoul(cols[4]);
        if (cols[5].empty()) {
            s.kind = SchemeKind::Signature;
        } else {
            s.kind = SchemeKind::Kem;
            s.ss_size = std::stoul(cols[5]);
        }
        t.entries_[s.name] = s;
    }
    return t;
}

FixtureTable FixtureTable::load(const std::filesystem::path& path, bool verify_checksum) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("missing fixture file: " + path.string());
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (verify_checksum) {
        const auto d = symcrypto::sha256(as_bytes(text));
        if (to_hex(d) != kFixtureSha256) throw std::runtime_error("fixture checksum mismatch: " + path.string());
    }
    return parse(text);
}

std::optional<SchemeInfo> FixtureTable::find(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("QSHIELD_DATA_DIR"); env && *env) return env;
    return QSHIELD_DEFAULT_DATA_DIR;
}

Registry Registry::with_defaults() {
    Registry r;
    r.add_signature(kLamportName, std::make_shared<LamportSignature>());
    r.add_kem(kToyLweName, std::make_shared<ToyLweKem>());
    r.set_fixtures(FixtureTable::load(data_dir() / "pqc_scheme_fixtures.csv"));
    return r;
}

void Registry::add_signature(std::string name, std::shared_ptr<const SignatureProvider> p) {
    sigs_[std::move(name)] = std::move(p);
}

void Registry::add_kem(std::string name, std::shared_ptr<const KemProvider> p) { kems_[std::move(name)] = std::move(p); }

std::shared_ptr<const SignatureProvider> Registry::signature(const std::string& name) const {
    auto it = sigs_.find(name);
    if (it == sigs_.end()) throw UnknownScheme(name);
    return it->second;
}

std::shared_ptr<const KemProvider> Registry::kem(const std::string& name) const {
    auto it = kems_.find(name);
    if (it == kems_.end()) throw UnknownScheme(name);
    return it->second;
}

bool Registry::runnable(const std::string& name) const { return sigs_.contains(name) || kems_.contains(name); }

SchemeInfo Registry::scheme_info(const std::string& name) const {
    if (auto it = sigs_.find(name); it != sigs_.end()) return it->second->info();
    if (auto it = kems_.find(name); it != kems_.end()) return it->second->info();
    if (auto f = fixtures_.find(name)) return *f;
    throw UnknownScheme(name);
}

SchemeInfo scheme_info(const std::string& name) {
    static const Registry reg = Registry::with_defaults();
    return reg.scheme_info(name);
}

// ---- benchmark -------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
double time_once(F&& f) {
    const auto t0 = Clock::now();
    f();
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

} // namespace

std::vector<BenchRecord> bench_scheme(const Registry& reg, const std::string& name, std::size_t trials, Rng& rng) {
    if (trials == 0) throw std::invalid_argument("bench: trials must be >= 1");
    const std::size_t total = trials + kBenchWarmup;
    std::vector<double> t_gen, t_a, t_b;
    std::size_t size_gen = 0, size_a = 0, size_b = 0;

    auto keep = [&](std::vector<double>& dst, std::size_t i, double t) {
        if (i >= kBenchWarmup) dst.push_back(t);
    };

    std::vector<BenchRecord> out;
    if (!reg.runnable(name)) throw UnknownScheme(name);

    if (reg.scheme_info(name).kind == SchemeKind::Signature) {
        const auto p = reg.signature(name);
        Bytes msg(32);
        for (std::size_t i = 0; i < total; ++i) {
            rng.fill(msg);
            SigKeypair kp;
            keep(t_gen, i, time_once([&] { kp = p->keygen(rng); }));
            Bytes sig;
            keep(t_a, i, time_once([&] { sig = p->sign(kp.sk, msg); }));
            bool ok = false;
            keep(t_b, i, time_once([&] { ok = p->verify(kp.pk, msg, sig); }));
            if (!ok) throw std::runtime_error("bench: honest signature failed to verify for " + name);
            size_gen = kp.pk.size();
            size_a = sig.size();
            size_b = sig.size();
        }
        out = {{name, "keygen", trials, median(t_gen), size_gen},
               {name, "sign", trials, median(t_a), size_a},
               {name, "verify", trials, median(t_b), size_b}};
    } else {
        const auto p = reg.kem(name);
        for (std::size_t i = 0; i < total; ++i) {
            KemKeypair kp;
            keep(t_gen, i, time_once([&] { kp = p->keygen(rng); }));
            KemEncapsulation enc;
            keep(t_a, i, time_once([&] { enc = p->encaps(kp.ek, rng); }));
            Bytes ss;
            keep(t_b, i, time_once([&] { ss = p->decaps(kp.dk, enc.ct); }));
            if (ss != enc.ss) throw std::runtime_error("bench: shared secrets differ for " + name);
            size_gen = kp.ek.size();
            size_a = enc.ct.size();
            size_b = ss.size();
        }
        out = {{name, "keygen", trials, median(t_gen), size_gen},
               {name, "encaps", trials, median(t_a), size_a},
               {name, "decaps", trials, median(t_b), size_b}};
    }
    return out;
}

std::string bench_csv_header() { return "scheme,op,trials,median_seconds,size_bytes"; }

std::string bench_csv_row(const BenchRecord& r) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", r.median_seconds);
    return r.scheme + "," + r.op + "," + std::to_string(r.trials) + "," + buf + "," + std::to_string(r.size_bytes);
}

} // namespace qshield::pqc
