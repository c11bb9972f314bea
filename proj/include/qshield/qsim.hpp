#pragma once

#include "qshield/rng.hpp"

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

/// Dense statevector simulator for up to 10 qubits.
///
/// Qubit 0 is the least-significant bit of the amplitude index, so for three
/// qubits the amplitude of |q2 q1 q0> lives at index q0 + 2*q1 + 4*q2.
/// Global phase is never normalized away; compare states with fidelity().
namespace qshield::qsim {

using Amplitude = std::complex<double>;

inline constexpr int kMaxQubits = 10;

enum class GateKind { H, X, Z, CNOT, U3 };

struct Gate {
    GateKind kind;
    int target = 0;
    std::optional<int> control;
    // U3 only.
    double theta = 0.0;
    double phi = 0.0;
    double lam = 0.0;

    static Gate h(int q) { return {GateKind::H, q, std::nullopt}; }
    static Gate x(int q) { return {GateKind::X, q, std::nullopt}; }
    static Gate z(int q) { return {GateKind::Z, q, std::nullopt}; }
    static Gate cnot(int control, int target) { return {GateKind::CNOT, target, control}; }
    static Gate u3(int q, double theta, double phi, double lam = 0.0) {
        return {GateKind::U3, q, std::nullopt, theta, phi, lam};
    }
    /// Inverse of this gate. H, X, Z and CNOT are involutions.
    Gate inverse() const;
};

class Statevector {
  public:
    /// |0...0> on n qubits, 1 <= n <= kMaxQubits.
    explicit Statevector(int n_qubits);
    /// Adopts explicit amplitudes; length must be a power of two.
    explicit Statevector(std::vector<Amplitude> amps);

    int n_qubits() const noexcept { return n_qubits_; }
    std::size_t size() const noexcept { return amps_.size(); }
    const std::vector<Amplitude>& amplitudes() const noexcept { return amps_; }
    const Amplitude& operator[](std::size_t i) const { return amps_[i]; }

    Statevector& apply(const Gate& g);
    Statevector& h(int q) { return apply(Gate::h(q)); }
    Statevector& x(int q) { return apply(Gate::x(q)); }
    Statevector& z(int q) { return apply(Gate::z(q)); }
    Statevector& cnot(int c, int t) { return apply(Gate::cnot(c, t)); }
    Statevector& u3(int q, double theta, double phi, double lam = 0.0) {
        return apply(Gate::u3(q, theta, phi, lam));
    }

    double norm_squared() const;
    /// Born probability that `qubit` reads 1.
    double probability_one(int qubit) const;
    /// Computational-basis probabilities, one per amplitude index.
    std::vector<double> probabilities() const;

  private:
    void check_qubit(int q) const;
    void apply_single(int q, const Amplitude (&m)[2][2]);

    int n_qubits_;
    std::vector<Amplitude> amps_;
};

struct MeasurementRecord {
    int qubit = 0;
    int bit = 0;
    double pre_prob = 0.0;  ///< exact Born probability of `bit` before collapse
};

struct Branch {
    /// Outcome bits, bits[k] belongs to qubits[k] of the request.
    std::vector<int> bits;
    double probability = 0.0;
    /// Collapsed, renormalized state; absent for zero-probability outcomes.
    std::optional<Statevector> post_state;

    std::string bitstring() const;
};

Statevector new_state(int n_qubits);
Statevector apply_gate(Statevector sv, const Gate& g);
Statevector apply_u3(Statevector sv, int target, double theta, double phi);

/// Born-rule sample of one qubit; returns the record and the collapsed state.
std::pair<MeasurementRecord, Statevector> measure(Statevector sv, int qubit, Rng& rng);

/// Exhaustive enumeration of the 2^k outcomes of measuring `qubits`.
std::vector<Branch> branch_outcomes(const Statevector& sv, const std::vector<int>& qubits);

/// |<a|b>|^2.
double fidelity(const Statevector& a, const Statevector& b);

/// Multinomial sample of `shots` outcomes from a probability vector.
std::vector<std::size_t> sample_counts(const std::vector<double>& probs, std::size_t shots, Rng& rng);

} // namespace qshield::qsim
