#pragma once

#include "qshield/common.hpp"
#include "qshield/qsim.hpp"
#include "qshield/rng.hpp"

#include <cstddef>
#include <optional>
#include <utility>

/// Teleportation of two model parameters per device.
///
/// Register layout: qubit 0 = Q (secret), 1 = A (sender half of the Bell
/// pair), 2 = B (server half). Two parameters are squashed into Bloch
/// angles, prepared on Q with U(theta, phi, 0), teleported to B, and
/// recovered either by the inverse rotation (verify mode) or by repeated
/// basis measurements (tomography mode).
namespace qshield::tp {

inline constexpr int kQubitQ = 0;
inline constexpr int kQubitA = 1;
inline constexpr int kQubitB = 2;

struct Angles {
    double theta = 0.0;  ///< [0, pi]
    double phi = 0.0;    ///< [0, 2 pi)
};

/// theta = pi * sigmoid(w[j]), phi = 2 pi * sigmoid(w[j + 1]).
Angles encode_params_as_angles(const WeightVector& w, std::size_t j);
/// Inverse squash; returns the pair (w[j], w[j + 1]).
std::pair<double, double> decode_angles(const Angles& a);

/// Register after the sender's measurements, before any correction.
struct PendingTeleport {
    int m1 = 0;  ///< Q measurement, cr[0]
    int m2 = 0;  ///< A measurement, cr[1]
    qsim::Statevector reg{3};
};

struct TeleportOutcome {
    int m1 = 0;
    int m2 = 0;
    qsim::Statevector bob_state{1};  ///< corrected single-qubit state of B
    std::optional<int> verify_bit;   ///< cr[2]
};

/// Builds U(theta,phi,0)|0>_Q (x) |Phi+>_AB and applies CNOT(Q->A), H(Q).
qsim::Statevector entangle_register(const Angles& a);

/// Sender side: entangle, then measure Q and A.
PendingTeleport prepare_and_measure(const Angles& a, Rng& rng);

/// Server side: read B out of the collapsed register, applying X if m2 and
/// then Z if m1 (pass apply = false to skip corrections).
qsim::Statevector receive(const PendingTeleport& p, int m1, int m2, bool apply = true);

/// Extracts qubit B from a register whose Q and A are in basis states
/// (m1, m2).
qsim::Statevector extract_bob(const qsim::Statevector& reg, int m1, int m2);

TeleportOutcome teleport_once(const Angles& a, Rng& rng);

/// Target state cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>.
qsim::Statevector target_state(const Angles& a);

/// Applies U(theta,phi,0)^dagger to Bob's qubit and measures it.
qsim::MeasurementRecord verify_inverse(TeleportOutcome& outcome, const Angles& a, Rng& rng);

struct AngleEstimate {
    double theta_hat = 0.0;
    double phi_hat = 0.0;
    std::size_t shots = 0;
    /// Root-sum-square standard error of the three estimated Pauli
    /// expectations; scales as shots^(-1/2).
    double stderr_ = 0.0;
};

inline constexpr std::size_t kMinShots = 100;

/// Teleports the state `shots` times per basis (Z, X, Y) and inverts the
/// measured Bloch vector.
AngleEstimate estimate_angles(const Angles& a, std::size_t shots, Rng& rng);

enum class Mode { Verify, Tomography };

struct TransferResult {
    WeightVector received;
    bool verified = false;
    std::optional<AngleEstimate> estimate;
};

/// Teleports entries j and j+1 and passes the rest through unchanged.
/// Verify mode throws ChannelError if the inverse-rotation check reads 1.
TransferResult channel_transfer(const WeightVector& w, std::size_t j, Mode mode, Rng& rng,
                                std::size_t shots = 10000);

} // namespace qshield::tp
