#include "qshield/tpchannel.hpp"

#include "qshield/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qshield::tp {

namespace {

constexpr double kPi = std::numbers::pi;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p) - std::log1p(-p); }

// Keeps decoded angles strictly inside the open interval so logit is finite.
constexpr double kEdge = 1e-12;

} // namespace

Angles encode_params_as_angles(const WeightVector& w, std::size_t j) {
    if (w.size() < 2 || j > w.size() - 2) throw std::out_of_range("teleport parameter index out of bounds");
    if (!std::isfinite(w[j]) || !std::isfinite(w[j + 1])) throw std::invalid_argument("non-finite parameter");
    return {kPi * sigmoid(w[j]), 2.0 * kPi * sigmoid(w[j + 1])};
}

std::pair<double, double> decode_angles(const Angles& a) {
    const double pt = std::clamp(a.theta / kPi, kEdge, 1.0 - kEdge);
    const double pp = std::clamp(a.phi / (2.0 * kPi), kEdge, 1.0 - kEdge);
    return {logit(pt), logit(pp)};
}

qsim::Statevector entangle_register(const Angles& a) {
    qsim::Statevector reg(3);
    reg.u3(kQubitQ, a.theta, a.phi, 0.0);
    reg.h(kQubitA).cnot(kQubitA, kQubitB);
    reg.cnot(kQubitQ, kQubitA).h(kQubitQ);
    return reg;
}

PendingTeleport prepare_and_measure(const Angles& a, Rng& rng) {
    auto [rq, after_q] = qsim::measure(entangle_register(a), kQubitQ, rng);
    auto [ra, after_a] = qsim::measure(std::move(after_q), kQubitA, rng);
    return {rq.bit, ra.bit, std::move(after_a)};
}

qsim::Statevector extract_bob(const qsim::Statevector& reg, int m1, int m2) {
    if (reg.n_qubits() != 3) throw std::invalid_argument("teleport register must have 3 qubits");
    const std::size_t base = static_cast<std::size_t>(m1) << kQubitQ | static_cast<std::size_t>(m2) << kQubitA;
    std::vector<qsim::Amplitude> amps = {reg[base], reg[base | (std::size_t{1} << kQubitB)]};
    double n2 = std::norm(amps[0]) + std::norm(amps[1]);
    if (!(n2 > 0.0)) throw std::invalid_argument("register has no weight on the requested branch");
    const double scale = 1.0 / std::sqrt(n2);
    for (auto& x : amps) x *= scale;
    return qsim::Statevector(std::move(amps));
}

qsim::Statevector receive(const PendingTeleport& p, int m1, int m2, bool apply) {
    // The register collapsed to (p.m1, p.m2); the classical bits received
    // (m1, m2) choose the correction and may differ if they were altered.
    qsim::Statevector bob = extract_bob(p.reg, p.m1, p.m2);
    if (apply) {
        if (m2) bob.x(0);
        if (m1) bob.z(0);
    }
    return bob;
}

TeleportOutcome teleport_once(const Angles& a, Rng& rng) {
    PendingTeleport p = prepare_and_measure(a, rng);
    TeleportOutcome out;
    out.m1 = p.m1;
    out.m2 = p.m2;
    out.bob_state = receive(p, p.m1, p.m2);
    return out;
}

qsim::Statevector target_state(const Angles& a) {
    qsim::Statevector s(1);
    s.u3(0, a.theta, a.phi, 0.0);
    return s;
}

qsim::MeasurementRecord verify_inverse(TeleportOutcome& outcome, const Angles& a, Rng& rng) {
    qsim::Statevector bob = outcome.bob_state;
    bob.apply(qsim::Gate::u3(0, a.theta, a.phi, 0.0).inverse());
    auto [rec, post] = qsim::measure(std::move(bob), 0, rng);
    outcome.verify_bit = rec.bit;
    return rec;
}

AngleEstimate estimate_angles(const Angles& a, std::size_t shots, Rng& rng) {
    if (shots < kMinShots) throw std::invalid_argument("estimate_angles: at least 100 shots required");

    // Pauli expectation from `shots` fresh teleportations, rotating Bob's
    // qubit into the measured basis first.
    auto expectation = [&](auto&& rotate) {
        std::size_t ones = 0;
        for (std::size_t s = 0; s < shots; ++s) {
            qsim::Statevector bob = teleport_once(a, rng).bob_state;
            rotate(bob);
            ones += static_cast<std::size_t>(qsim::measure(std::move(bob), 0, rng).first.bit);
        }
        return 1.0 - 2.0 * static_cast<double>(ones) / static_cast<double>(shots);
    };

    const double ez = expectation([](qsim::Statevector&) {});
    const double ex = expectation([](qsim::Statevector& b) { b.h(0); });
    // S^dagger then H maps the +i eigenstate to |0>.
    const double ey = expectation([](qsim::Statevector& b) { b.u3(0, 0.0, 0.0, -kPi / 2).h(0); });

    AngleEstimate est;
    est.shots = shots;
    est.theta_hat = std::acos(std::clamp(ez, -1.0, 1.0));
    double phi = std::atan2(ey, ex);
    if (phi < 0.0) phi += 2.0 * kPi;
    est.phi_hat = phi;
    const double n = static_cast<double>(shots);
    est.stderr_ = std::sqrt(((1.0 - ez * ez) + (1.0 - ex * ex) + (1.0 - ey * ey)) / n);
    return est;
}

TransferResult channel_transfer(const WeightVector& w, std::size_t j, Mode mode, Rng& rng, std::size_t shots) {
    const Angles a = encode_params_as_angles(w, j);
    TransferResult out;
    out.received = w;
    if (mode == Mode::Verify) {
        TeleportOutcome o = teleport_once(a, rng);
        if (verify_inverse(o, a, rng).bit != 0) throw ChannelError("teleport verification failed");
        out.verified = true;
        const auto [x0, x1] = decode_angles(a);
        out.received[j] = x0;
        out.received[j + 1] = x1;
    } else {
        const AngleEstimate est = estimate_angles(a, shots, rng);
        const auto [x0, x1] = decode_angles({est.theta_hat, est.phi_hat});
        out.received[j] = x0;
        out.received[j + 1] = x1;
        out.estimate = est;
    }
    return out;
}

} // namespace qshield::tp
