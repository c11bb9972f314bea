#pragma once

#include "qshield/common.hpp"
#include "qshield/rng.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

/// Byte layer shared by the QKD and KEM channels: weight text rendering,
/// the character-shift one-time pad, AES-256-GCM envelopes, big-endian
/// weight packing, SHA-256 and HKDF.
namespace qshield::symcrypto {

inline constexpr std::size_t kKeySize = 32;
inline constexpr std::size_t kNonceSize = 12;
inline constexpr std::size_t kTagSize = 16;

using Digest = std::array<std::uint8_t, 32>;
using Key = std::array<std::uint8_t, kKeySize>;

// ---- weight text ---------------------------------------------------------

/// Renders weights as "[w0,w1,...]" in fixed-point notation with exactly
/// `dp` fractional digits, rounding half away from zero on the exact binary
/// value. A value that rounds to zero is written without a sign.
std::string serialize_weights(const WeightVector& w, int dp);

/// Inverse of serialize_weights. Throws std::invalid_argument on bad text.
WeightVector parse_weights(std::string_view text);

// ---- one-time pad --------------------------------------------------------

enum class OtpMode {
    Shift,  ///< c = (m + 2k) mod 256
    Xor,    ///< c = m ^ k, comparison mode only
};

/// Encrypts byte-wise with the key truncated to |message|.
std::string otp_encrypt(std::string_view message, ByteView key, OtpMode mode = OtpMode::Shift);
std::string otp_decrypt(std::string_view ciphertext, ByteView key, OtpMode mode = OtpMode::Shift);

// ---- AEAD ----------------------------------------------------------------

struct AeadEnvelope {
    Bytes nonce;       // 12 bytes when well formed
    Bytes ciphertext;
    Bytes tag;         // 16 bytes when well formed
};

/// AES-256-GCM. `aad` is authenticated but not encrypted.
AeadEnvelope aead_encrypt(ByteView key, ByteView nonce, ByteView plaintext, ByteView aad = {});
/// Throws MalformedEnvelope for wrong nonce/tag sizes, AuthenticationFailure
/// when the tag does not verify.
Bytes aead_decrypt(ByteView key, const AeadEnvelope& env, ByteView aad = {});

/// kind(1) || nonce(12) || len(4, big-endian) || ciphertext || tag(16)
Bytes encode_envelope(std::uint8_t kind, const AeadEnvelope& env);
std::pair<std::uint8_t, AeadEnvelope> decode_envelope(ByteView wire);

/// Fernet-style token: a fresh random nonce and an AEAD envelope under a
/// 32-byte key, in the wire layout above. The kind byte is authenticated.
Bytes fernet_encrypt(ByteView key, ByteView plaintext, std::uint8_t kind, Rng& rng);
Bytes fernet_decrypt(ByteView key, ByteView token);

// ---- hashing and key derivation --------------------------------------------

/// Concatenated 8-byte big-endian IEEE-754 doubles.
Bytes pack_weights(const WeightVector& w);
WeightVector unpack_weights(ByteView packed);

Digest sha256(ByteView data);
Digest hash_weights(const WeightVector& w);

/// RFC 5869 HKDF-SHA256 with explicit salt and output length.
Bytes hkdf_sha256(ByteView ikm, ByteView salt, ByteView info, std::size_t length);

/// 32-byte key = HKDF-SHA256(secret, salt = empty, info).
Key derive_key(ByteView secret, std::string_view info);

} // namespace qshield::symcrypto
