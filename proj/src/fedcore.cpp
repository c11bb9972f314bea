#include "qshield/fedcore.hpp"

#include "qshield/errors.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace qshield::fed {

namespace {

using Clock = std::chrono::steady_clock;

// Stream tags for derive_seed.
enum : std::uint64_t { kTagInit = 1, kTagTrain, kTagUplink, kTagDownlink, kTagKeys, kTagEval };

void put_u32(Bytes& out, std::size_t v) {
    if (v > 0xFFFFFFFFULL) throw std::length_error("field too large for u32 length prefix");
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_block(Bytes& out, ByteView b) {
    put_u32(out, b.size());
    out.insert(out.end(), b.begin(), b.end());
}

/// Sequential reader over a length-prefixed payload.
class Reader {
  public:
    explicit Reader(ByteView b) : b_(b) {}

    ByteView take(std::size_t n) {
        if (n > b_.size() - pos_) throw MalformedEnvelope("payload truncated");
        auto out = b_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    std::size_t u32() {
        auto b = take(4);
        return static_cast<std::size_t>(b[0]) << 24 | static_cast<std::size_t>(b[1]) << 16 |
               static_cast<std::size_t>(b[2]) << 8 | b[3];
    }
    ByteView block() { return take(u32()); }
    ByteView rest() { return take(b_.size() - pos_); }
    void finish() const {
        if (pos_ != b_.size()) throw MalformedEnvelope("trailing bytes in payload");
    }

  private:
    ByteView b_;
    std::size_t pos_ = 0;
};

qkd::EveModel eve_for(const AdversaryConfig& adv, std::size_t device) {
    if (!adv.targets(device)) return qkd::EveModel::none();
    switch (adv.kind) {
    case AdversaryKind::EveIntercept: return qkd::EveModel::intercept(adv.fraction);
    case AdversaryKind::EveSwap: return qkd::EveModel::store_and_resend(adv.fraction);
    default: return qkd::EveModel::none();
    }
}

std::size_t qubits_for(const qkd::SharedKey& k, const qkd::Bb84Options& o) { return k.blocks * o.block_n; }

constexpr char kFernetInfo[] = "fernet";
constexpr char kKemUplinkInfo[] = "kem-uplink";
constexpr char kKemDownlinkInfo[] = "kem-downlink";

} // namespace

std::string to_string(ChannelKind k) {
    switch (k) {
    case ChannelKind::Plain: return "plain";
    case ChannelKind::QkdOtp: return "qkd_otp";
    case ChannelKind::QkdFernet: return "qkd_fernet";
    case ChannelKind::Teleport: return "teleport";
    case ChannelKind::Kem: return "kem";
    case ChannelKind::PqcSign: return "pqc_sign";
    }
    return "?";
}

ChannelKind parse_channel(const std::string& s) {
    for (auto k : kAllChannels)
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown channel '" + s + "'");
}

std::string to_string(AdversaryKind k) {
    switch (k) {
    case AdversaryKind::None: return "none";
    case AdversaryKind::EveIntercept: return "eve_intercept";
    case AdversaryKind::EveSwap: return "eve_swap";
    case AdversaryKind::Tamper: return "tamper";
    }
    return "?";
}

AdversaryKind parse_adversary(const std::string& s) {
    for (auto k : {AdversaryKind::None, AdversaryKind::EveIntercept, AdversaryKind::EveSwap, AdversaryKind::Tamper})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown adversary '" + s + "'");
}

WeightVector fedavg(const std::vector<WeightVector>& params) {
    if (params.empty()) throw std::invalid_argument("fedavg over an empty list");
    const std::size_t d = params.front().size();
    WeightVector sum(d, 0.0);
    for (const auto& p : params) {
        if (p.size() != d) throw std::invalid_argument("fedavg: parameter vectors differ in length");
        for (std::size_t k = 0; k < d; ++k) sum[k] += p[k];
    }
    const double n = static_cast<double>(params.size());
    for (auto& v : sum) v /= n;
    return sum;
}

Federation::Federation(std::vector<vqc::DeviceSplit> shards, vqc::Split server_val, vqc::Split server_test,
                       int n_classes, ChannelConfig channel, AdversaryConfig adversary, vqc::TrainConfig train,
                       std::uint64_t seed, pqc::Registry registry)
    : channel_(std::move(channel)), adversary_(adversary), train_(train), seed_(seed), n_classes_(n_classes),
      registry_(std::move(registry)) {
    if (shards.empty()) throw std::invalid_argument("federation needs at least one device");
    if (channel_.dp < 1 || channel_.dp > 12) throw std::invalid_argument("dp must be in 1..12");
    std::vector<WeightVector> inits;
    for (std::size_t i = 0; i < shards.size(); ++i) {
        Rng rng(derive_seed(seed_, {kTagInit, i}));
        DeviceState d;
        d.id = i;
        d.model.n_classes = n_classes_;
        d.model.params = vqc::random_params(rng);
        d.shard = std::move(shards[i]);
        inits.push_back(d.model.params);
        devices_.push_back(std::move(d));
    }
    server_.global_params = fedavg(inits);
    server_.val = std::move(server_val);
    server_.test = std::move(server_test);
    if (channel_.kind == ChannelKind::Kem) {
        Rng rng(derive_seed(seed_, {kTagKeys, 0xFFFF}));
        server_.kem_keypair = registry_.kem(channel_.kem_scheme)->keygen(rng);
    }
    if (channel_.kind == ChannelKind::PqcSign) registry_.signature(channel_.sig_scheme);  // fail early
}

void Federation::begin_round(std::size_t round, Rng& rng) {
    round_ = round;
    server_.kem_session.clear();
    server_.device_sig_pk.clear();
    server_.downlink_sig_key.clear();
    if (channel_.kind != ChannelKind::PqcSign) return;
    const auto sig = registry_.signature(channel_.sig_scheme);
    for (auto& d : devices_) {
        // Fresh one-time keys in both directions; public halves are exchanged
        // over the authenticated setup channel.
        d.sig_key = sig->keygen(rng);
        server_.device_sig_pk[d.id] = d.sig_key->pk;
        auto server_key = sig->keygen(rng);
        d.server_sig_pk = server_key.pk;
        server_.downlink_sig_key.emplace(d.id, std::move(server_key));
    }
}

Message Federation::apply_tamper(Message m, Rng& rng) {
    if (adversary_.kind != AdversaryKind::Tamper || !adversary_.targets(m.device) || m.payload.empty()) return m;
    if (rng.uniform() >= adversary_.fraction) return m;
    const auto pos = rng.below(m.payload.size());
    m.payload[pos] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    return m;
}

UplinkResult Federation::uplink(std::size_t idx, Rng& rng, CommMeter& meter) {
    DeviceState& dev = devices_.at(idx);
    const WeightVector& theta = dev.model.params;
    const auto kind = channel_.kind;
    const auto eve = eve_for(adversary_, idx);
    UplinkResult res;
    const auto t0 = Clock::now();

    Message msg{kind, idx, {}};
    // Server-side key material or quantum state established alongside the message.
    Bytes otp_key_b;
    symcrypto::Key fernet_key_b{};
    std::optional<tp::PendingTeleport> pending;
    std::optional<tp::AngleEstimate> estimate;

    try {
        // ---- device side ----
        switch (kind) {
        case ChannelKind::Plain: msg.payload = symcrypto::pack_weights(theta); break;
        case ChannelKind::QkdOtp: {
            const std::string text = symcrypto::serialize_weights(theta, channel_.dp);
            const auto key = qkd::expand_key(eve, text.size(), rng, channel_.qkd);
            meter.qubits += qubits_for(key, channel_.qkd);
            res.qber = key.max_qber;
            const std::string c = symcrypto::otp_encrypt(text, key.sender.bytes, channel_.otp_mode);
            msg.payload.assign(c.begin(), c.end());
            otp_key_b = key.receiver.bytes;
            break;
        }
        case ChannelKind::QkdFernet: {
            const std::string text = symcrypto::serialize_weights(theta, channel_.dp);
            const auto key = qkd::expand_key(eve, symcrypto::kKeySize, rng, channel_.qkd);
            meter.qubits += qubits_for(key, channel_.qkd);
            res.qber = key.max_qber;
            const auto ka = symcrypto::derive_key(key.sender.bytes, kFernetInfo);
            fernet_key_b = symcrypto::derive_key(key.receiver.bytes, kFernetInfo);
            msg.payload = symcrypto::fernet_encrypt(ka, as_bytes(text), static_cast<std::uint8_t>(kind), rng);
            break;
        }
        case ChannelKind::Teleport: {
            const std::size_t j = channel_.teleport_index;
            const tp::Angles a = tp::encode_params_as_angles(theta, j);
            WeightVector classical;
            for (std::size_t k = 0; k < theta.size(); ++k)
                if (k != j && k != j + 1) classical.push_back(theta[k]);
            if (channel_.teleport_mode == tp::Mode::Verify) {
                pending = tp::prepare_and_measure(a, rng);
                meter.qubits += 1;
                msg.payload.push_back(static_cast<std::uint8_t>(pending->m1));
                msg.payload.push_back(static_cast<std::uint8_t>(pending->m2));
                put_block(msg.payload, symcrypto::pack_weights({a.theta, a.phi}));
            } else {
                estimate = tp::estimate_angles(a, channel_.teleport_shots, rng);
                meter.qubits += 3 * channel_.teleport_shots;
                meter.bytes += (3 * channel_.teleport_shots * 2 + 7) / 8;  // two outcome bits per shot
                msg.payload.push_back(0);
                msg.payload.push_back(0);
                put_block(msg.payload, {});
            }
            put_block(msg.payload, symcrypto::pack_weights(classical));
            break;
        }
        case ChannelKind::Kem: {
            const auto kem = registry_.kem(channel_.kem_scheme);
            const auto enc = kem->encaps(server_.kem_keypair->ek, rng);
            const auto k = symcrypto::derive_key(enc.ss, kKemUplinkInfo);
            const Bytes packed = symcrypto::pack_weights(theta);
            const auto tag = static_cast<std::uint8_t>(kind);
            Bytes sealed;
            if (channel_.kem_encrypt_weights) {
                put_block(msg.payload, {});
                sealed = symcrypto::fernet_encrypt(k, packed, tag, rng);
            } else {
                put_block(msg.payload, packed);
                sealed = symcrypto::fernet_encrypt(k, symcrypto::sha256(packed), tag, rng);
            }
            put_block(msg.payload, enc.ct);
            msg.payload.insert(msg.payload.end(), sealed.begin(), sealed.end());
            break;
        }
        case ChannelKind::PqcSign: {
            if (!dev.sig_key) throw std::logic_error("begin_round was not called for pqc_sign");
            const Bytes packed = symcrypto::pack_weights(theta);
            const Bytes sig = registry_.signature(channel_.sig_scheme)->sign(dev.sig_key->sk, packed);
            put_block(msg.payload, packed);
            msg.payload.insert(msg.payload.end(), sig.begin(), sig.end());
            break;
        }
        }
    } catch (const QkdAbort& e) {
        res.reason = e.what();
        res.qber = e.qber();
        meter.qubits += channel_.qkd.block_n;  // at least the aborting block was sent
        meter.wall_seconds += std::chrono::duration<double>(Clock::now() - t0).count();
        return res;
    }

    // ---- transit ----
    const Bytes sent = msg.payload;
    msg = apply_tamper(std::move(msg), rng);
    if (on_uplink) on_uplink(msg);
    res.tampered = msg.payload != sent;
    meter.bytes += msg.payload.size();

    // ---- server side ----
    try {
        const ByteView p = msg.payload;
        switch (kind) {
        case ChannelKind::Plain: res.weights = symcrypto::unpack_weights(p); break;
        case ChannelKind::QkdOtp: {
            if (otp_key_b.size() < p.size()) throw MalformedEnvelope("ciphertext longer than key");
            const std::string text = symcrypto::otp_decrypt(qshield::to_string(p), otp_key_b, channel_.otp_mode);
            try {
                res.weights = symcrypto::parse_weights(text);
            } catch (const std::invalid_argument& e) {
                throw MalformedEnvelope(e.what());
            }
            break;
        }
        case ChannelKind::QkdFernet: {
            const Bytes plain = symcrypto::fernet_decrypt(fernet_key_b, p);
            try {
                res.weights = symcrypto::parse_weights(qshield::to_string(plain));
            } catch (const std::invalid_argument& e) {
                throw MalformedEnvelope(e.what());
            }
            break;
        }
        case ChannelKind::Teleport: {
            Reader r(p);
            const auto bits = r.take(2);
            const auto angles_block = r.block();
            const WeightVector classical = symcrypto::unpack_weights(r.block());
            r.finish();
            if (classical.size() + 2 != theta.size()) throw MalformedEnvelope("teleport payload size mismatch");
            double x0 = 0.0, x1 = 0.0;
            if (channel_.teleport_mode == tp::Mode::Verify) {
                if (bits[0] > 1 || bits[1] > 1) throw MalformedEnvelope("measurement bits must be 0/1");
                const WeightVector ang = symcrypto::unpack_weights(angles_block);
                if (ang.size() != 2 || !std::isfinite(ang[0]) || !std::isfinite(ang[1]))
                    throw MalformedEnvelope("bad angle block");
                const tp::Angles a{ang[0], ang[1]};
                tp::TeleportOutcome out{bits[0], bits[1], tp::receive(*pending, bits[0], bits[1]), std::nullopt};
                if (tp::verify_inverse(out, a, rng).bit != 0) throw ChannelError("teleport verification failed");
                std::tie(x0, x1) = tp::decode_angles(a);
            } else {
                std::tie(x0, x1) = tp::decode_angles({estimate->theta_hat, estimate->phi_hat});
            }
            const std::size_t j = channel_.teleport_index;
            res.weights.resize(theta.size());
            std::size_t c = 0;
            for (std::size_t k = 0; k < theta.size(); ++k)
                res.weights[k] = k == j ? x0 : (k == j + 1 ? x1 : classical[c++]);
            break;
        }
        case ChannelKind::Kem: {
            Reader r(p);
            const auto packed = r.block();
            const auto ct = r.block();
            const auto sealed = r.rest();
            const auto kem = registry_.kem(channel_.kem_scheme);
            const Bytes ss = kem->decaps(server_.kem_keypair->dk, ct);
            const auto k = symcrypto::derive_key(ss, kKemUplinkInfo);
            const Bytes plain = symcrypto::fernet_decrypt(k, sealed);
            if (channel_.kem_encrypt_weights) {
                if (!packed.empty()) throw MalformedEnvelope("unexpected clear weights");
                res.weights = symcrypto::unpack_weights(plain);
            } else {
                const auto local = symcrypto::sha256(packed);
                if (plain.size() != local.size() || !std::equal(local.begin(), local.end(), plain.begin()))
                    throw ChannelError("weight digest mismatch");
                res.weights = symcrypto::unpack_weights(packed);
            }
            server_.kem_session[idx] = ss;
            break;
        }
        case ChannelKind::PqcSign: {
            Reader r(p);
            const auto packed = r.block();
            const auto sig = r.rest();
            const auto it = server_.device_sig_pk.find(idx);
            if (it == server_.device_sig_pk.end()) throw ChannelError("no registered public key");
            if (!registry_.signature(channel_.sig_scheme)->verify(it->second, packed, sig))
                throw ChannelError("signature invalid");
            res.weights = symcrypto::unpack_weights(packed);
            break;
        }
        }
        if (res.weights.size() != theta.size()) throw MalformedEnvelope("weight count mismatch");
        for (double w : res.weights)
            if (!std::isfinite(w)) throw MalformedEnvelope("non-finite weight received");
        res.accepted = true;
    } catch (const Error& e) {
        res.accepted = false;
        res.weights.clear();
        res.reason = e.what();
    }
    meter.wall_seconds += std::chrono::duration<double>(Clock::now() - t0).count();
    return res;
}

DownlinkResult Federation::downlink(std::size_t idx, Rng& rng, CommMeter& meter) {
    DeviceState& dev = devices_.at(idx);
    const WeightVector& g = server_.global_params;
    DownlinkResult res;
    const auto t0 = Clock::now();
    const auto eve = eve_for(adversary_, idx);
    try {
        WeightVector received;
        switch (channel_.kind) {
        case ChannelKind::Plain:
        case ChannelKind::Teleport: {
            const Bytes wire = symcrypto::pack_weights(g);
            meter.bytes += wire.size();
            received = symcrypto::unpack_weights(wire);
            break;
        }
        case ChannelKind::QkdOtp: {
            const std::string text = symcrypto::serialize_weights(g, channel_.dp);
            const auto key = qkd::expand_key(eve, text.size(), rng, channel_.qkd);
            meter.qubits += qubits_for(key, channel_.qkd);
            res.qber = key.max_qber;
            const std::string c = symcrypto::otp_encrypt(text, key.sender.bytes, channel_.otp_mode);
            meter.bytes += c.size();
            received = symcrypto::parse_weights(symcrypto::otp_decrypt(c, key.receiver.bytes, channel_.otp_mode));
            break;
        }
        case ChannelKind::QkdFernet: {
            const std::string text = symcrypto::serialize_weights(g, channel_.dp);
            const auto key = qkd::expand_key(eve, symcrypto::kKeySize, rng, channel_.qkd);
            meter.qubits += qubits_for(key, channel_.qkd);
            res.qber = key.max_qber;
            const auto ka = symcrypto::derive_key(key.sender.bytes, kFernetInfo);
            const auto kb = symcrypto::derive_key(key.receiver.bytes, kFernetInfo);
            const Bytes token =
                symcrypto::fernet_encrypt(ka, as_bytes(text), static_cast<std::uint8_t>(channel_.kind), rng);
            meter.bytes += token.size();
            received = symcrypto::parse_weights(qshield::to_string(symcrypto::fernet_decrypt(kb, token)));
            break;
        }
        case ChannelKind::Kem: {
            const auto it = server_.kem_session.find(idx);
            if (it == server_.kem_session.end()) throw ChannelError("no KEM session for device");
            const auto k = symcrypto::derive_key(it->second, kKemDownlinkInfo);
            const Bytes packed = symcrypto::pack_weights(g);
            const Bytes sealed =
                symcrypto::fernet_encrypt(k, symcrypto::sha256(packed), static_cast<std::uint8_t>(channel_.kind), rng);
            meter.bytes += packed.size() + sealed.size();
            const Bytes plain = symcrypto::fernet_decrypt(k, sealed);
            const auto local = symcrypto::sha256(packed);
            if (!std::equal(local.begin(), local.end(), plain.begin(), plain.end()))
                throw ChannelError("global digest mismatch");
            received = symcrypto::unpack_weights(packed);
            break;
        }
        case ChannelKind::PqcSign: {
            auto it = server_.downlink_sig_key.find(idx);
            if (it == server_.downlink_sig_key.end()) throw ChannelError("no server signing key for device");
            const auto sig_p = registry_.signature(channel_.sig_scheme);
            const Bytes packed = symcrypto::pack_weights(g);
            const Bytes sig = sig_p->sign(it->second.sk, packed);
            meter.bytes += packed.size() + sig.size();
            if (!sig_p->verify(dev.server_sig_pk, packed, sig)) throw ChannelError("global signature invalid");
            received = symcrypto::unpack_weights(packed);
            break;
        }
        }
        dev.model.params = std::move(received);
        res.delivered = true;
    } catch (const QkdAbort& e) {
        res.reason = e.what();
        res.qber = e.qber();
        meter.qubits += channel_.qkd.block_n;
    } catch (const Error& e) {
        res.reason = e.what();
    }
    meter.wall_seconds += std::chrono::duration<double>(Clock::now() - t0).count();
    return res;
}

RoundMetrics Federation::run_round(std::size_t round) {
    RoundMetrics m;
    m.round = round;
    m.channel = channel_.kind;

    {
        Rng keys(derive_seed(seed_, {kTagKeys, round}));
        begin_round(round, keys);
    }

    // Local training.
    double device_loss = 0.0;
    for (auto& d : devices_) {
        vqc::TrainConfig tc = train_;
        tc.seed = derive_seed(seed_, {kTagTrain, round, d.id});
        d.model = vqc::train_local(d.model, d.shard.train, tc).model;
        Rng eval(derive_seed(seed_, {kTagEval, round, d.id}));
        const vqc::Split& held = d.shard.val.empty() ? d.shard.train : d.shard.val;
        device_loss += vqc::loss(d.model, held, train_.shots, eval);
    }
    m.avg_device_loss = device_loss / static_cast<double>(devices_.size());

    // Uplink.
    CommMeter meter;
    std::vector<WeightVector> accepted;
    auto note_qber = [&](std::optional<double> q) {
        if (q) m.qber = std::max(m.qber.value_or(0.0), *q);
    };
    for (auto& d : devices_) {
        Rng rng(derive_seed(seed_, {kTagUplink, round, d.id}));
        UplinkResult u = uplink(d.id, rng, meter);
        note_qber(u.qber);
        if (u.accepted)
            accepted.push_back(std::move(u.weights));
        else
            m.aborted_devices.push_back(d.id);
    }

    // Validity gate: the signature channel aggregates only when every
    // signature verified; the others drop just the rejected devices.
    const bool gate_ok = channel_.kind == ChannelKind::PqcSign ? m.aborted_devices.empty() : !accepted.empty();
    if (gate_ok) {
        server_.global_params = fedavg(accepted);
        m.aggregated = true;
        for (auto& d : devices_) {
            Rng rng(derive_seed(seed_, {kTagDownlink, round, d.id}));
            DownlinkResult r = downlink(d.id, rng, meter);
            note_qber(r.qber);
            if (!r.delivered) m.downlink_failed.push_back(d.id);
        }
    }
    m.comm_time_s = meter.modeled_seconds();
    m.comm_wall_time_s = meter.wall_seconds;

    vqc::VqcModel global{server_.global_params, n_classes_};
    Rng eval(derive_seed(seed_, {kTagEval, round, 0xFFFF}));
    m.server_test_acc = vqc::accuracy(global, server_.test, train_.shots, eval);
    m.server_val_loss = vqc::loss(global, server_.val, train_.shots, eval);
    return m;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    if (cfg.devices < 1 || cfg.rounds < 1) throw std::invalid_argument("devices and rounds must be >= 1");
    vqc::Dataset data;
    const std::uint64_t data_seed = derive_seed(cfg.seed, {0xDA7A});
    if (cfg.dataset == "iris")
        data = vqc::load_iris(pqc::data_dir() / "iris.csv", data_seed);
    else if (cfg.dataset == "synthetic_genomic")
        data = vqc::synth_genomic(cfg.genomic_train, cfg.genomic_server, data_seed);
    else
        throw std::invalid_argument("unknown dataset '" + cfg.dataset + "'");

    auto shards = vqc::partition_iid(data, cfg.devices, derive_seed(cfg.seed, {0x5A4D}));
    vqc::TrainConfig tc;
    tc.max_iter = cfg.max_iter;
    tc.shots = cfg.shots;
    tc.optimizer = cfg.optimizer;
    Federation fed(std::move(shards), data.val, data.test, data.n_classes, cfg.channel, cfg.adversary, tc, cfg.seed);

    ExperimentResult out;
    for (std::size_t r = 1; r <= cfg.rounds; ++r) out.rows.push_back(fed.run_round(r));
    out.final_global = fed.server().global_params;

    auto& s = out.summary;
    s.rounds = out.rows.size();
    for (const auto& row : out.rows) {
        s.avg_test_acc += row.server_test_acc;
        s.avg_val_loss += row.server_val_loss;
        s.avg_device_loss += row.avg_device_loss;
        s.avg_comm_time_s += row.comm_time_s;
        s.avg_comm_wall_time_s += row.comm_wall_time_s;
        s.aborted_rounds += !row.aggregated;
    }
    const double n = static_cast<double>(s.rounds);
    s.avg_test_acc /= n;
    s.avg_val_loss /= n;
    s.avg_device_loss /= n;
    s.avg_comm_time_s /= n;
    s.avg_comm_wall_time_s /= n;
    s.final_test_acc = out.rows.back().server_test_acc;
    s.final_val_loss = out.rows.back().server_val_loss;
    return out;
}

std::string metrics_csv(const std::vector<RoundMetrics>& rows) {
    std::string out = kMetricsCsvHeader;
    out += '\n';
    char buf[256];
    for (const auto& r : rows) {
        std::string aborted;
        for (std::size_t i = 0; i < r.aborted_devices.size(); ++i) {
            if (i) aborted += ';';
            aborted += std::to_string(r.aborted_devices[i]);
        }
        std::string qber;
        if (r.qber) {
            char q[32];
            std::snprintf(q, sizeof q, "%.6f", *r.qber);
            qber = q;
        }
        std::snprintf(buf, sizeof buf, "%zu,%s,%.6f,%.6f,%.6f,%.6f,", r.round, to_string(r.channel).c_str(),
                      r.server_test_acc, r.server_val_loss, r.avg_device_loss, r.comm_time_s);
        out += buf;
        out += qber + "," + aborted + "\n";
    }
    return out;
}

std::vector<RoundMetrics> parse_metrics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kMetricsCsvHeader) throw std::invalid_argument("metrics CSV header mismatch");
    std::vector<RoundMetrics> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        while (true) {
            const auto c = line.find(',', start);
            cols.push_back(line.substr(start, c == std::string::npos ? std::string::npos : c - start));
            if (c == std::string::npos) break;
            start = c + 1;
        }
        if (cols.size() != 8) throw std::invalid_argument("metrics CSV row must have 8 columns");
        RoundMetrics r;
        r.round = std::stoul(cols[0]);
        r.channel = parse_channel(cols[1]);
        r.server_test_acc = std::stod(cols[2]);
        r.server_val_loss = std::stod(cols[3]);
        r.avg_device_loss = std::stod(cols[4]);
        r.comm_time_s = std::stod(cols[5]);
        if (!cols[6].empty()) r.qber = std::stod(cols[6]);
        std::size_t s = 0;
        while (s < cols[7].size()) {
            const auto e = cols[7].find(';', s);
            r.aborted_devices.push_back(std::stoul(cols[7].substr(s, e == std::string::npos ? std::string::npos : e - s)));
            if (e == std::string::npos) break;
            s = e + 1;
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace qshield::fed
