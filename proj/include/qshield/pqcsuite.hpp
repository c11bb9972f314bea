#pragma once

#include "qshield/common.hpp"
#include "qshield/rng.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

/// Pluggable KEM and signature providers.
///
/// The two reference providers are desk-scale stand-ins, not production
/// cryptography: "lamport-sha256" (hash-based one-time signatures) and
/// "toy-lwe-256" (ring-LWE KEM whose error bound makes decryption failure
/// impossible). External schemes are known only through their published
/// sizes in the fixture table until an adapter registers a provider.
namespace qshield::pqc {

enum class SchemeKind { Signature, Kem };

struct SchemeInfo {
    std::string name;
    SchemeKind kind = SchemeKind::Signature;
    int nist_level = 0;
    std::size_t pk_size = 0;
    std::size_t sk_size = 0;
    std::size_t sig_or_ct_size = 0;  ///< signature size or KEM ciphertext size
    std::size_t ss_size = 0;         ///< KEM only

    bool operator==(const SchemeInfo&) const = default;
};

// ---- KEM -----------------------------------------------------------------

struct KemKeypair {
    Bytes ek;
    Bytes dk;
    std::string scheme;
};

struct KemEncapsulation {
    Bytes ct;
    Bytes ss;  // 32 bytes for the reference scheme
};

class KemProvider {
  public:
    virtual ~KemProvider() = default;
    virtual SchemeInfo info() const = 0;
    virtual KemKeypair keygen(Rng& rng) const = 0;
    virtual KemEncapsulation encaps(ByteView ek, Rng& rng) const = 0;
    /// Throws DecapsulationFailure on malformed input.
    virtual Bytes decaps(ByteView dk, ByteView ct) const = 0;
};

// ---- signatures ------------------------------------------------------------

/// Secret key handle. One-time keys refuse a second signature.
class SigningKey {
  public:
    SigningKey() = default;
    SigningKey(Bytes sk, bool one_time) : sk_(std::move(sk)), one_time_(one_time) {}

    const Bytes& bytes() const noexcept { return sk_; }
    bool one_time() const noexcept { return one_time_; }
    bool used() const noexcept { return used_; }
    /// Throws KeyReuse for an already-used one-time key, then marks it used.
    void consume();

  private:
    Bytes sk_;
    bool one_time_ = false;
    bool used_ = false;
};

struct SigKeypair {
    Bytes pk;
    SigningKey sk;
    std::string scheme;
};

class SignatureProvider {
  public:
    virtual ~SignatureProvider() = default;
    virtual SchemeInfo info() const = 0;
    virtual SigKeypair keygen(Rng& rng) const = 0;
    virtual Bytes sign(SigningKey& sk, ByteView message) const = 0;
    virtual bool verify(ByteView pk, ByteView message, ByteView signature) const = 0;
};

// ---- reference schemes -------------------------------------------------------

inline constexpr const char* kLamportName = "lamport-sha256";
inline constexpr const char* kToyLweName = "toy-lwe-256";

/// Lamport one-time signature over SHA-256: 2x256 secret preimages of 32
/// bytes; the signature reveals one preimage per bit of SHA-256(message).
class LamportSignature final : public SignatureProvider {
  public:
    static constexpr std::size_t kBits = 256;
    static constexpr std::size_t kHash = 32;

    SchemeInfo info() const override;
    SigKeypair keygen(Rng& rng) const override;
    Bytes sign(SigningKey& sk, ByteView message) const override;
    bool verify(ByteView pk, ByteView message, ByteView signature) const override;
};

struct ToyLweParams {
    std::size_t n = 256;      ///< ring dimension, Z_q[x]/(x^n + 1)
    std::uint16_t q = 3329;
    int eta = 1;              ///< secret and error coefficients in [-eta, eta]

    /// Worst-case decoding noise is 2*n*eta^2 + eta; decryption is exact
    /// when that stays below q/4.
    bool failure_free() const;
};

/// Ring-LWE KEM: ek = (seed of a, b = a*s + e), ct = (u = a*r + e1,
/// v = b*r + e2 + round(q/2)*m), ss = SHA-256(domain || m || SHA-256(ct)).
class ToyLweKem final : public KemProvider {
  public:
    explicit ToyLweKem(ToyLweParams params = {});

    SchemeInfo info() const override;
    KemKeypair keygen(Rng& rng) const override;
    KemEncapsulation encaps(ByteView ek, Rng& rng) const override;
    Bytes decaps(ByteView dk, ByteView ct) const override;

    const ToyLweParams& params() const noexcept { return params_; }

  private:
    ToyLweParams params_;
};

// ---- registry and fixtures ------------------------------------------------

/// Published sizes for external schemes, keyed by name. Loaded from a
/// delimited file whose SHA-256 must match the pinned digest.
class FixtureTable {
  public:
    static FixtureTable load(const std::filesystem::path& path, bool verify_checksum = true);
    static FixtureTable parse(std::string_view text);

    std::optional<SchemeInfo> find(const std::string& name) const;
    const std::map<std::string, SchemeInfo>& entries() const noexcept { return entries_; }

  private:
    std::map<std::string, SchemeInfo> entries_;
};

/// SHA-256 of data/pqc_scheme_fixtures.csv as shipped.
inline constexpr const char* kFixtureSha256 = "5306aee1af29e97a9c1792302aa3289ff3b4fe85ca97bbbf8d79cf88712190e2";

/// Directory holding iris.csv and pqc_scheme_fixtures.csv. Honors the
/// QSHIELD_DATA_DIR environment variable, else the build-time location.
std::filesystem::path data_dir();

class Registry {
  public:
    /// Reference providers plus the shipped fixture table.
    static Registry with_defaults();

    void add_signature(std::string name, std::shared_ptr<const SignatureProvider> p);
    void add_kem(std::string name, std::shared_ptr<const KemProvider> p);
    void set_fixtures(FixtureTable t) { fixtures_ = std::move(t); }

    std::shared_ptr<const SignatureProvider> signature(const std::string& name) const;
    std::shared_ptr<const KemProvider> kem(const std::string& name) const;
    bool runnable(const std::string& name) const;

    /// Provider-reported info for runnable schemes, fixture values otherwise.
    /// Throws UnknownScheme.
    SchemeInfo scheme_info(const std::string& name) const;
    std::optional<SchemeInfo> fixture(const std::string& name) const { return fixtures_.find(name); }
    const FixtureTable& fixtures() const noexcept { return fixtures_; }

  private:
    std::map<std::string, std::shared_ptr<const SignatureProvider>> sigs_;
    std::map<std::string, std::shared_ptr<const KemProvider>> kems_;
    FixtureTable fixtures_;
};

SchemeInfo scheme_info(const std::string& name);

// ---- benchmarks ----------------------------------------------------------

struct BenchRecord {
    std::string scheme;
    std::string op;  ///< keygen, sign, verify, encaps, decaps
    std::size_t trials = 0;
    double median_seconds = 0.0;
    std::size_t size_bytes = 0;  ///< artifact produced by the op (pk, sig, ct, ...)
};

inline constexpr std::size_t kBenchWarmup = 3;

/// Median wall-clock time per operation over `trials` runs after
/// kBenchWarmup discarded runs. Throws UnknownScheme when no provider is
/// registered, std::invalid_argument for trials == 0.
std::vector<BenchRecord> bench_scheme(const Registry& reg, const std::string& name, std::size_t trials, Rng& rng);

std::string bench_csv_header();
std::string bench_csv_row(const BenchRecord& r);

} // namespace qshield::pqc
