#include "qshield/qsim.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qshield::qsim {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;

// Projects `sv` onto the outcome where qubits[k] == bits[k]; returns the
// unnormalized projection and its squared norm.
std::pair<std::vector<Amplitude>, double> project(const Statevector& sv,
                                                  const std::vector<int>& qubits,
                                                  const std::vector<int>& bits) {
    std::vector<Amplitude> out(sv.size());
    double p = 0.0;
    for (std::size_t i = 0; i < sv.size(); ++i) {
        bool match = true;
        for (std::size_t k = 0; k < qubits.size(); ++k) {
            if (static_cast<int>((i >> qubits[k]) & 1U) != bits[k]) {
                match = false;
                break;
            }
        }
        if (match) {
            out[i] = sv[i];
            p += std::norm(sv[i]);
        }
    }
    return {std::move(out), p};
}
} // namespace

Gate Gate::inverse() const {
    if (kind != GateKind::U3) return *this;
    // U3(t, p, l)^dagger = U3(-t, -l, -p)
    return Gate::u3(target, -theta, -lam, -phi);
}

Statevector::Statevector(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits)
        throw std::out_of_range("qubit count must be in 1.." + std::to_string(kMaxQubits));
    amps_.assign(std::size_t{1} << n_qubits, Amplitude{});
    amps_[0] = 1.0;
}

Statevector::Statevector(std::vector<Amplitude> amps) : n_qubits_(0), amps_(std::move(amps)) {
    const auto n = amps_.size();
    if (n < 2 || (n & (n - 1)) != 0) throw std::invalid_argument("amplitude count must be 2^n, n >= 1");
    while ((std::size_t{1} << n_qubits_) < n) ++n_qubits_;
    if (n_qubits_ > kMaxQubits) throw std::out_of_range("too many qubits");
}

void Statevector::check_qubit(int q) const {
    if (q < 0 || q >= n_qubits_) throw std::out_of_range("qubit index " + std::to_string(q) + " out of range");
}

void Statevector::apply_single(int q, const Amplitude (&m)[2][2]) {
    const std::size_t stride = std::size_t{1} << q;
    for (std::size_t base = 0; base < amps_.size(); base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            const Amplitude a0 = amps_[i];
            const Amplitude a1 = amps_[i + stride];
            amps_[i] = m[0][0] * a0 + m[0][1] * a1;
            amps_[i + stride] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

Statevector& Statevector::apply(const Gate& g) {
    check_qubit(g.target);
    switch (g.kind) {
    case GateKind::H: {
        const Amplitude m[2][2] = {{kInvSqrt2, kInvSqrt2}, {kInvSqrt2, -kInvSqrt2}};
        apply_single(g.target, m);
        break;
    }
    case GateKind::X: {
        const std::size_t stride = std::size_t{1} << g.target;
        for (std::size_t i = 0; i < amps_.size(); ++i)
            if (!(i & stride)) std::swap(amps_[i], amps_[i | stride]);
        break;
    }
    case GateKind::Z: {
        const std::size_t bit = std::size_t{1} << g.target;
        for (std::size_t i = 0; i < amps_.size(); ++i)
            if (i & bit) amps_[i] = -amps_[i];
        break;
    }
    case GateKind::CNOT: {
        if (!g.control) throw std::invalid_argument("CNOT requires a control qubit");
        check_qubit(*g.control);
        if (*g.control == g.target) throw std::invalid_argument("control and target must differ");
        const std::size_t cbit = std::size_t{1} << *g.control;
        const std::size_t tbit = std::size_t{1} << g.target;
        for (std::size_t i = 0; i < amps_.size(); ++i)
            if ((i & cbit) && !(i & tbit)) std::swap(amps_[i], amps_[i | tbit]);
        break;
    }
    case GateKind::U3: {
        if (!std::isfinite(g.theta) || !std::isfinite(g.phi) || !std::isfinite(g.lam))
            throw std::invalid_argument("U3 angles must be finite");
        const double c = std::cos(g.theta / 2.0);
        const double s = std::sin(g.theta / 2.0);
        const Amplitude m[2][2] = {
            {c, -std::polar(1.0, g.lam) * s},
            {std::polar(1.0, g.phi) * s, std::polar(1.0, g.phi + g.lam) * c},
        };
        apply_single(g.target, m);
        break;
    }
    }
    return *this;
}

double Statevector::norm_squared() const {
    double s = 0.0;
    for (const auto& a : amps_) s += std::norm(a);
    return s;
}

double Statevector::probability_one(int qubit) const {
    check_qubit(qubit);
    const std::size_t bit = std::size_t{1} << qubit;
    double p = 0.0;
    for (std::size_t i = 0; i < amps_.size(); ++i)
        if (i & bit) p += std::norm(amps_[i]);
    return p;
}

std::vector<double> Statevector::probabilities() const {
    std::vector<double> p(amps_.size());
    std::transform(amps_.begin(), amps_.end(), p.begin(), [](const Amplitude& a) { return std::norm(a); });
    return p;
}

std::string Branch::bitstring() const {
    std::string s;
    for (int b : bits) s.push_back(b ? '1' : '0');
    return s;
}

Statevector new_state(int n_qubits) { return Statevector(n_qubits); }

Statevector apply_gate(Statevector sv, const Gate& g) {
    sv.apply(g);
    return sv;
}

Statevector apply_u3(Statevector sv, int target, double theta, double phi) {
    sv.u3(target, theta, phi, 0.0);
    return sv;
}

std::pair<MeasurementRecord, Statevector> measure(Statevector sv, int qubit, Rng& rng) {
    const double p1 = std::clamp(sv.probability_one(qubit), 0.0, 1.0);
    const int bit = rng.uniform() < p1 ? 1 : 0;
    const double p = bit ? p1 : 1.0 - p1;
    assert(p > 0.0 && "zero-probability branch selected");
    auto [proj, mass] = project(sv, {qubit}, {bit});
    const double scale = 1.0 / std::sqrt(mass);
    for (auto& a : proj) a *= scale;
    return {MeasurementRecord{qubit, bit, p}, Statevector(std::move(proj))};
}

std::vector<Branch> branch_outcomes(const Statevector& sv, const std::vector<int>& qubits) {
    for (std::size_t i = 0; i < qubits.size(); ++i) {
        if (qubits[i] < 0 || qubits[i] >= sv.n_qubits()) throw std::out_of_range("qubit index out of range");
        for (std::size_t j = 0; j < i; ++j)
            if (qubits[i] == qubits[j]) throw std::invalid_argument("qubits must be distinct");
    }
    const std::size_t k = qubits.size();
    std::vector<Branch> out;
    out.reserve(std::size_t{1} << k);
    for (std::size_t outcome = 0; outcome < (std::size_t{1} << k); ++outcome) {
        Branch b;
        // First listed qubit is the most significant character of bitstring().
        b.bits.resize(k);
        for (std::size_t j = 0; j < k; ++j) b.bits[j] = static_cast<int>((outcome >> (k - 1 - j)) & 1U);
        auto [proj, mass] = project(sv, qubits, b.bits);
        b.probability = mass;
        if (mass > 0.0) {
            const double scale = 1.0 / std::sqrt(mass);
            for (auto& a : proj) a *= scale;
            b.post_state = Statevector(std::move(proj));
        }
        out.push_back(std::move(b));
    }
    return out;
}

double fidelity(const Statevector& a, const Statevector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("fidelity of states with different qubit counts");
    Amplitude overlap{};
    for (std::size_t i = 0; i < a.size(); ++i) overlap += std::conj(a[i]) * b[i];
    return std::norm(overlap);
}

std::vector<std::size_t> sample_counts(const std::vector<double>& probs, std::size_t shots, Rng& rng) {
    std::vector<double> cdf(probs.size());
    std::partial_sum(probs.begin(), probs.end(), cdf.begin());
    const double total = cdf.empty() ? 0.0 : cdf.back();
    if (!(total > 0.0)) throw std::invalid_argument("probabilities sum to zero");
    std::vector<std::size_t> counts(probs.size(), 0);
    for (std::size_t s = 0; s < shots; ++s) {
        const double u = rng.uniform() * total;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        if (it == cdf.end()) --it;
        ++counts[static_cast<std::size_t>(it - cdf.begin())];
    }
    return counts;
}

} // namespace qshield::qsim
