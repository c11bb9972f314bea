#include "qshield/symcrypto.hpp"

#include "qshield/errors.hpp"

#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/kdf.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace qshield::symcrypto {

namespace {

struct CipherCtxDeleter {
    void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

[[noreturn]] void openssl_fail(const char* what) { throw std::runtime_error(std::string("OpenSSL: ") + what); }

void check_sizes(ByteView key, ByteView nonce) {
    if (key.size() != kKeySize) throw std::invalid_argument("AEAD key must be 32 bytes");
    if (nonce.size() != kNonceSize) throw std::invalid_argument("AEAD nonce must be 12 bytes");
}

void put_u32_be(Bytes& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

// Exact decimal expansion of |v| with `dp` digits kept, rounded half away
// from zero. glibc prints the exact binary value when enough digits are
// requested; 1100 fractional digits covers the smallest subnormal.
std::string round_fixed(double v, int dp) {
    static constexpr int kExactDigits = 1100;
    std::string buf(kExactDigits + 400, '\0');
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), std::fabs(v), std::chars_format::fixed, kExactDigits);
    if (res.ec != std::errc{}) throw std::runtime_error("to_chars failed");
    std::string s(buf.data(), res.ptr);

    const auto point = s.find('.');
    std::string digits = s.substr(0, point) + s.substr(point + 1, static_cast<std::size_t>(dp));
    const bool round_up = s[point + 1 + static_cast<std::size_t>(dp)] >= '5';
    if (round_up) {
        int i = static_cast<int>(digits.size()) - 1;
        while (i >= 0 && digits[static_cast<std::size_t>(i)] == '9') digits[static_cast<std::size_t>(i--)] = '0';
        if (i < 0)
            digits.insert(digits.begin(), '1');
        else
            ++digits[static_cast<std::size_t>(i)];
    }
    const std::size_t int_len = digits.size() - static_cast<std::size_t>(dp);
    std::string out = digits.substr(0, int_len) + "." + digits.substr(int_len);
    const bool zero = digits.find_first_not_of('0') == std::string::npos;
    if (v < 0 && !zero) out.insert(out.begin(), '-');
    return out;
}

} // namespace

std::string serialize_weights(const WeightVector& w, int dp) {
    if (dp < 1 || dp > 12) throw std::invalid_argument("dp must be in 1..12");
    std::string out = "[";
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!std::isfinite(w[i])) throw std::invalid_argument("non-finite weight at index " + std::to_string(i));
        if (i) out.push_back(',');
        out += round_fixed(w[i], dp);
    }
    out.push_back(']');
    return out;
}

WeightVector parse_weights(std::string_view text) {
    if (text.size() < 2 || text.front() != '[' || text.back() != ']')
        throw std::invalid_argument("weight text must be a bracketed list");
    WeightVector out;
    std::string_view body = text.substr(1, text.size() - 2);
    if (body.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = body.find(',', start);
        const auto token = body.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        double v = 0.0;
        auto res = std::from_chars(token.data(), token.data() + token.size(), v, std::chars_format::fixed);
        if (token.empty() || res.ec != std::errc{} || res.ptr != token.data() + token.size() || !std::isfinite(v))
            throw std::invalid_argument("bad weight literal: '" + std::string(token) + "'");
        out.push_back(v);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string otp_encrypt(std::string_view message, ByteView key, OtpMode mode) {
    if (key.size() < message.size()) throw std::invalid_argument("OTP key shorter than message");
    std::string out(message.size(), '\0');
    for (std::size_t i = 0; i < message.size(); ++i) {
        const unsigned m = static_cast<unsigned char>(message[i]);
        const unsigned k = key[i];
        out[i] = static_cast<char>(mode == OtpMode::Shift ? (m + 2 * k) & 0xFFU : (m ^ k));
    }
    return out;
}

std::string otp_decrypt(std::string_view ciphertext, ByteView key, OtpMode mode) {
    if (key.size() < ciphertext.size()) throw std::invalid_argument("OTP key shorter than ciphertext");
    std::string out(ciphertext.size(), '\0');
    for (std::size_t i = 0; i < ciphertext.size(); ++i) {
        const unsigned c = static_cast<unsigned char>(ciphertext[i]);
        const unsigned k = key[i];
        out[i] = static_cast<char>(mode == OtpMode::Shift ? (c + 256 - (2 * k) % 256) & 0xFFU : (c ^ k));
    }
    return out;
}

AeadEnvelope aead_encrypt(ByteView key, ByteView nonce, ByteView plaintext, ByteView aad) {
    check_sizes(key, nonce);
    CipherCtx ctx(EVP_CIPHER_CTX_new());
    if (!ctx) openssl_fail("EVP_CIPHER_CTX_new");
    if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) != 1) openssl_fail("init");
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(kNonceSize), nullptr) != 1)
        openssl_fail("ivlen");
    if (EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), nonce.data()) != 1) openssl_fail("key");

    AeadEnvelope env;
    env.nonce.assign(nonce.begin(), nonce.end());
    env.ciphertext.resize(plaintext.size());
    int len = 0;
    if (!aad.empty() && EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1)
        openssl_fail("aad");
    if (!plaintext.empty() &&
        EVP_EncryptUpdate(ctx.get(), env.ciphertext.data(), &len, plaintext.data(), static_cast<int>(plaintext.size())) != 1)
        openssl_fail("update");
    int fin = 0;
    if (EVP_EncryptFinal_ex(ctx.get(), env.ciphertext.data() + len, &fin) != 1) openssl_fail("final");
    env.tag.resize(kTagSize);
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, static_cast<int>(kTagSize), env.tag.data()) != 1)
        openssl_fail("get tag");
    return env;
}

Bytes aead_decrypt(ByteView key, const AeadEnvelope& env, ByteView aad) {
    if (key.size() != kKeySize) throw std::invalid_argument("AEAD key must be 32 bytes");
    if (env.nonce.size() != kNonceSize) throw MalformedEnvelope("nonce must be 12 bytes");
    if (env.tag.size() != kTagSize) throw MalformedEnvelope("tag must be 16 bytes");

    CipherCtx ctx(EVP_CIPHER_CTX_new());
    if (!ctx) openssl_fail("EVP_CIPHER_CTX_new");
    if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) != 1) openssl_fail("init");
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(kNonceSize), nullptr) != 1)
        openssl_fail("ivlen");
    if (EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), env.nonce.data()) != 1) openssl_fail("key");

    Bytes plain(env.ciphertext.size());
    int len = 0;
    if (!aad.empty() && EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1)
        openssl_fail("aad");
    if (!env.ciphertext.empty() &&
        EVP_DecryptUpdate(ctx.get(), plain.data(), &len, env.ciphertext.data(), static_cast<int>(env.ciphertext.size())) != 1)
        openssl_fail("update");
    Bytes tag = env.tag;
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, static_cast<int>(kTagSize), tag.data()) != 1)
        openssl_fail("set tag");
    int fin = 0;
    if (EVP_DecryptFinal_ex(ctx.get(), plain.data() + len, &fin) != 1) throw AuthenticationFailure();
    return plain;
}

Bytes encode_envelope(std::uint8_t kind, const AeadEnvelope& env) {
    if (env.nonce.size() != kNonceSize || env.tag.size() != kTagSize)
        throw MalformedEnvelope("cannot encode envelope with bad nonce/tag size");
    Bytes out;
    out.reserve(1 + kNonceSize + 4 + env.ciphertext.size() + kTagSize);
    out.push_back(kind);
    out.insert(out.end(), env.nonce.begin(), env.nonce.end());
    put_u32_be(out, static_cast<std::uint32_t>(env.ciphertext.size()));
    out.insert(out.end(), env.ciphertext.begin(), env.ciphertext.end());
    out.insert(out.end(), env.tag.begin(), env.tag.end());
    return out;
}

std::pair<std::uint8_t, AeadEnvelope> decode_envelope(ByteView wire) {
    constexpr std::size_t header = 1 + kNonceSize + 4;
    if (wire.size() < header + kTagSize) throw MalformedEnvelope("envelope too short");
    std::uint32_t len = 0;
    for (std::size_t i = 0; i < 4; ++i) len = len << 8 | wire[1 + kNonceSize + i];
    if (wire.size() != header + len + kTagSize) throw MalformedEnvelope("envelope length field mismatch");
    AeadEnvelope env;
    env.nonce.assign(wire.begin() + 1, wire.begin() + 1 + kNonceSize);
    env.ciphertext.assign(wire.begin() + header, wire.begin() + static_cast<std::ptrdiff_t>(header + len));
    env.tag.assign(wire.end() - kTagSize, wire.end());
    return {wire[0], std::move(env)};
}

Bytes fernet_encrypt(ByteView key, ByteView plaintext, std::uint8_t kind, Rng& rng) {
    std::array<std::uint8_t, kNonceSize> nonce{};
    rng.fill(nonce);
    const std::uint8_t header[1] = {kind};
    return encode_envelope(kind, aead_encrypt(key, nonce, plaintext, header));
}

Bytes fernet_decrypt(ByteView key, ByteView token) {
    const auto [kind, env] = decode_envelope(token);
    const std::uint8_t header[1] = {kind};
    return aead_decrypt(key, env, header);
}

Bytes pack_weights(const WeightVector& w) {
    Bytes out;
    out.reserve(8 * w.size());
    for (double v : w) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(bits >> s));
    }
    return out;
}

WeightVector unpack_weights(ByteView packed) {
    if (packed.size() % 8 != 0) throw MalformedEnvelope("packed weights length not a multiple of 8");
    WeightVector out(packed.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (std::size_t k = 0; k < 8; ++k) bits = bits << 8 | packed[8 * i + k];
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

Digest sha256(ByteView data) {
    Digest d{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), d.data(), &len, EVP_sha256(), nullptr) != 1 || len != d.size())
        openssl_fail("EVP_Digest");
    return d;
}

Digest hash_weights(const WeightVector& w) { return sha256(pack_weights(w)); }

Bytes hkdf_sha256(ByteView ikm, ByteView salt, ByteView info, std::size_t length) {
    std::unique_ptr<EVP_KDF, decltype(&EVP_KDF_free)> kdf(EVP_KDF_fetch(nullptr, "HKDF", nullptr), EVP_KDF_free);
    if (!kdf) openssl_fail("EVP_KDF_fetch");
    std::unique_ptr<EVP_KDF_CTX, decltype(&EVP_KDF_CTX_free)> ctx(EVP_KDF_CTX_new(kdf.get()), EVP_KDF_CTX_free);
    if (!ctx) openssl_fail("EVP_KDF_CTX_new");

    char digest[] = "SHA256";
    // OpenSSL takes non-const pointers but does not modify the buffers.
    auto* ikm_p = const_cast<std::uint8_t*>(ikm.data());
    auto* salt_p = const_cast<std::uint8_t*>(salt.data());
    auto* info_p = const_cast<std::uint8_t*>(info.data());
    OSSL_PARAM params[5];
    std::size_t n = 0;
    params[n++] = OSSL_PARAM_construct_utf8_string(OSSL_KDF_PARAM_DIGEST, digest, 0);
    params[n++] = OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_KEY, ikm_p, ikm.size());
    if (!salt.empty()) params[n++] = OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_SALT, salt_p, salt.size());
    if (!info.empty()) params[n++] = OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_INFO, info_p, info.size());
    params[n] = OSSL_PARAM_construct_end();

    Bytes out(length);
    if (EVP_KDF_derive(ctx.get(), out.data(), out.size(), params) != 1) openssl_fail("EVP_KDF_derive");
    return out;
}

Key derive_key(ByteView secret, std::string_view info) {
    if (secret.empty()) throw std::invalid_argument("derive_key: empty secret");
    const Bytes k = hkdf_sha256(secret, {}, as_bytes(std::string(info)), kKeySize);
    Key out{};
    std::copy(k.begin(), k.end(), out.begin());
    return out;
}

} // namespace qshield::symcrypto
