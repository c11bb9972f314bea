#include "qshield/qkd.hpp"

#include "qshield/errors.hpp"
#include "qshield/qsim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qshield::qkd {

namespace {

int measure_single(qsim::Statevector sv, Rng& rng) {
    return qsim::measure(std::move(sv), 0, rng).first.bit;
}

qsim::Statevector prepare(int bit, int basis) {
    qsim::Statevector sv(1);
    if (bit) sv.x(0);
    if (basis) sv.h(0);
    return sv;
}

} // namespace

KeyMaterial KeyMaterial::from_bits(BitString bits) {
    KeyMaterial k;
    k.bytes = pack_bits_msb_first(bits);
    k.bits = std::move(bits);
    return k;
}

Bytes pack_bits_msb_first(const BitString& bits) {
    Bytes out(bits.size() / 8, 0);
    for (std::size_t i = 0; i < out.size() * 8; ++i)
        if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
    return out;
}

BitString generate_raw_bits(std::size_t n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("generate_raw_bits: n must be >= 1");
    BitString out(n);
    for (auto& b : out) {
        qsim::Statevector sv(1);
        sv.h(0);
        b = static_cast<std::uint8_t>(measure_single(std::move(sv), rng));
    }
    return out;
}

BitString generate_unrotated_bits(std::size_t n, Rng& rng) {
    BitString out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(measure_single(qsim::Statevector(1), rng));
    return out;
}

Bb84Session run_bb84(std::size_t n, const EveModel& eve, Rng& rng) {
    if (n < 16) throw std::invalid_argument("run_bb84: n must be >= 16");
    if (!(eve.fraction >= 0.0 && eve.fraction <= 1.0))
        throw std::invalid_argument("run_bb84: Eve fraction must be in [0, 1]");

    Bb84Session s;
    s.n = n;
    s.sender_bits = generate_raw_bits(n, rng);
    s.sender_bases = generate_raw_bits(n, rng);
    s.receiver_bases = generate_raw_bits(n, rng);
    s.receiver_bits.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        qsim::Statevector qubit = prepare(s.sender_bits[i], s.sender_bases[i]);

        if (eve.kind != EveKind::None && rng.uniform() < eve.fraction) {
            const int eve_basis = rng.bit();
            if (eve.kind == EveKind::InterceptResend) {
                // Measure in a guessed basis and resend what was seen.
                if (eve_basis) qubit.h(0);
                const int seen = measure_single(std::move(qubit), rng);
                qubit = prepare(seen, eve_basis);
            } else {
                // Keep the original and forward a fresh random state.
                qubit = prepare(rng.bit(), eve_basis);
            }
        }

        if (s.receiver_bases[i]) qubit.h(0);
        s.receiver_bits[i] = static_cast<std::uint8_t>(measure_single(std::move(qubit), rng));
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (s.sender_bases[i] == s.receiver_bases[i]) {
            s.kept.push_back(i);
            s.sifted_sender.push_back(s.sender_bits[i]);
            s.sifted_receiver.push_back(s.receiver_bits[i]);
        }
    }
    return s;
}

void estimate_qber(Bb84Session& s, double test_fraction, Rng& rng) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("estimate_qber: test_fraction must be in (0, 1)");
    if (s.aborted) throw std::invalid_argument("estimate_qber: session already aborted");
    if (s.qber_estimated) throw std::invalid_argument("estimate_qber: test bits already disclosed");

    const std::size_t m = s.kept.size();
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(m)));
    if (n_test < kMinTestBits)
        throw std::invalid_argument("estimate_qber: only " + std::to_string(n_test) + " test bits available");

    // Partial Fisher-Yates over positions in the sifted strings.
    std::vector<std::size_t> pos(m);
    for (std::size_t i = 0; i < m; ++i) pos[i] = i;
    for (std::size_t i = 0; i < n_test; ++i) std::swap(pos[i], pos[i + rng.below(m - i)]);
    std::vector<std::size_t> chosen(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::sort(chosen.begin(), chosen.end());

    std::size_t errors = 0;
    std::vector<bool> disclosed(m, false);
    for (auto p : chosen) {
        disclosed[p] = true;
        errors += s.sifted_sender[p] != s.sifted_receiver[p];
        s.test_indices.push_back(s.kept[p]);
    }

    BitString keep_a, keep_b;
    keep_a.reserve(m - n_test);
    keep_b.reserve(m - n_test);
    for (std::size_t p = 0; p < m; ++p) {
        if (disclosed[p]) continue;
        keep_a.push_back(s.sifted_sender[p]);
        keep_b.push_back(s.sifted_receiver[p]);
    }
    s.sifted_sender = std::move(keep_a);
    s.sifted_receiver = std::move(keep_b);
    s.qber = static_cast<double>(errors) / static_cast<double>(n_test);
    s.qber_estimated = true;
}

bool abort_decision(Bb84Session& s, double threshold) {
    if (!s.qber_estimated) throw std::invalid_argument("abort_decision: QBER not estimated");
    s.aborted = s.qber > threshold;
    return s.aborted;
}

SharedKey expand_key(const EveModel& eve, std::size_t needed_bytes, Rng& rng, const Bb84Options& opts) {
    if (needed_bytes < 1) throw std::invalid_argument("expand_key: needed_bytes must be >= 1");
    const std::size_t needed_bits = 8 * needed_bytes;
    SharedKey out;
    BitString a, b;
    while (a.size() < needed_bits) {
        Bb84Session s = run_bb84(opts.block_n, eve, rng);
        estimate_qber(s, opts.test_fraction, rng);
        ++out.blocks;
        out.max_qber = std::max(out.max_qber, s.qber);
        if (abort_decision(s, opts.threshold)) throw QkdAbort(s.qber);
        a.insert(a.end(), s.sifted_sender.begin(), s.sifted_sender.end());
        b.insert(b.end(), s.sifted_receiver.begin(), s.sifted_receiver.end());
    }
    a.resize(needed_bits);
    b.resize(needed_bits);
    out.sender = KeyMaterial::from_bits(std::move(a));
    out.receiver = KeyMaterial::from_bits(std::move(b));
    return out;
}

} // namespace qshield::qkd
