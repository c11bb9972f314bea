#pragma once

#include "qshield/common.hpp"
#include "qshield/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

/// BB84 key distribution over the statevector simulator.
///
/// Each qubit i is prepared by the sender as H^{R_A[i]} X^{K[i]} |0>, may be
/// acted on by an eavesdropper, and is then rotated by the receiver with
/// H^{R_B[i]} and measured. Positions where the two basis strings agree are
/// kept. No error correction or privacy amplification is performed; the
/// simulated channel is noiseless, so any disagreement comes from Eve.
namespace qshield::qkd {

using BitString = std::vector<std::uint8_t>;  // one 0/1 value per element

enum class EveKind { None, InterceptResend, StoreAndResend };

struct EveModel {
    EveKind kind = EveKind::None;
    double fraction = 1.0;  ///< portion of qubits attacked, in [0, 1]

    static EveModel none() { return {EveKind::None, 0.0}; }
    static EveModel intercept(double f = 1.0) { return {EveKind::InterceptResend, f}; }
    static EveModel store_and_resend(double f = 1.0) { return {EveKind::StoreAndResend, f}; }
};

struct Bb84Session {
    std::size_t n = 0;
    BitString sender_bits;      ///< K
    BitString sender_bases;     ///< R_A
    BitString receiver_bases;   ///< R_B
    BitString receiver_bits;    ///< B
    std::vector<std::size_t> kept;          ///< {i : R_A[i] == R_B[i]}
    BitString sifted_sender;
    BitString sifted_receiver;
    /// Qubit indices (subset of `kept`) disclosed for error estimation and
    /// removed from the sifted strings.
    std::vector<std::size_t> test_indices;
    double qber = 0.0;
    bool qber_estimated = false;
    bool aborted = false;
};

/// Key bits and their MSB-first byte packing.
struct KeyMaterial {
    BitString bits;
    Bytes bytes;

    static KeyMaterial from_bits(BitString bits);
};

struct SharedKey {
    KeyMaterial sender;
    KeyMaterial receiver;
    std::size_t blocks = 0;    ///< BB84 sessions consumed
    double max_qber = 0.0;     ///< worst test-bit error rate over the blocks
};

struct Bb84Options {
    std::size_t block_n = 512;
    double test_fraction = 0.25;
    double threshold = 0.11;
};

inline constexpr double kDefaultAbortThreshold = 0.11;
inline constexpr std::size_t kMinTestBits = 8;

/// Random bits produced by simulating H|0> followed by a computational-basis
/// measurement, one single-qubit circuit per bit.
BitString generate_raw_bits(std::size_t n, Rng& rng);

/// Prepares and immediately measures |0> without the Hadamard; always zeros.
BitString generate_unrotated_bits(std::size_t n, Rng& rng);

Bb84Session run_bb84(std::size_t n, const EveModel& eve, Rng& rng);

/// Discloses a random `test_fraction` of the kept positions, removes them
/// from the key and sets the mismatch rate. Throws std::invalid_argument
/// when fewer than kMinTestBits positions would be disclosed.
void estimate_qber(Bb84Session& session, double test_fraction, Rng& rng);

/// aborted = qber > threshold (strict).
bool abort_decision(Bb84Session& session, double threshold = kDefaultAbortThreshold);

/// Runs successive abort-checked sessions until both parties hold at least
/// needed_bytes of key, then truncates. Throws QkdAbort on the first
/// session over threshold.
SharedKey expand_key(const EveModel& eve, std::size_t needed_bytes, Rng& rng, const Bb84Options& opts = {});

Bytes pack_bits_msb_first(const BitString& bits);

} // namespace qshield::qkd
