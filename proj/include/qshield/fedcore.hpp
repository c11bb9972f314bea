#pragma once

#include "qshield/common.hpp"
#include "qshield/pqcsuite.hpp"
#include "qshield/qkd.hpp"
#include "qshield/rng.hpp"
#include "qshield/symcrypto.hpp"
#include "qshield/tpchannel.hpp"
#include "qshield/vqc.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

/// Federated rounds over an in-process message bus. Devices train locally,
/// send their parameters through one of six channels, the server checks
/// and averages the accepted updates and sends the global parameters back.
namespace qshield::fed {

enum class ChannelKind : std::uint8_t { Plain = 0, QkdOtp = 1, QkdFernet = 2, Teleport = 3, Kem = 4, PqcSign = 5 };

std::string to_string(ChannelKind k);
/// Accepts plain, qkd_otp, qkd_fernet, teleport, kem, pqc_sign.
ChannelKind parse_channel(const std::string& s);
inline constexpr ChannelKind kAllChannels[] = {ChannelKind::Plain,    ChannelKind::QkdOtp, ChannelKind::QkdFernet,
                                               ChannelKind::Teleport, ChannelKind::Kem,    ChannelKind::PqcSign};

enum class AdversaryKind { None, EveIntercept, EveSwap, Tamper };

std::string to_string(AdversaryKind k);
/// Accepts none, eve_intercept, eve_swap, tamper.
AdversaryKind parse_adversary(const std::string& s);

struct AdversaryConfig {
    AdversaryKind kind = AdversaryKind::None;
    /// Eve: portion of qubits attacked. Tamper: probability that a given
    /// uplink message is corrupted.
    double fraction = 1.0;
    /// Device attacked, or -1 for every device.
    int target_device = -1;

    bool targets(std::size_t device) const {
        return target_device < 0 || static_cast<std::size_t>(target_device) == device;
    }
};

struct ChannelConfig {
    ChannelKind kind = ChannelKind::Plain;
    int dp = 6;  ///< decimal places for the QKD channels' weight text
    symcrypto::OtpMode otp_mode = symcrypto::OtpMode::Shift;
    qkd::Bb84Options qkd;
    tp::Mode teleport_mode = tp::Mode::Verify;
    std::size_t teleport_index = 0;
    std::size_t teleport_shots = 2000;
    /// KEM channel: encrypt the packed weights instead of sending them in
    /// clear next to an encrypted digest.
    bool kem_encrypt_weights = false;
    std::string kem_scheme = pqc::kToyLweName;
    std::string sig_scheme = pqc::kLamportName;
};

/// A message on the bus. Always copied, never shared.
struct Message {
    ChannelKind kind = ChannelKind::Plain;
    std::size_t device = 0;
    Bytes payload;
};

/// Transport cost accounting. Modeled time is a deterministic function of
/// qubits and bytes moved; wall time is measured with a monotonic clock.
struct CommMeter {
    static constexpr double kSecondsPerQubit = 1e-6;  // 1 MHz photon source
    static constexpr double kSecondsPerByte = 8e-9;   // 1 Gbit/s classical link

    std::size_t qubits = 0;
    std::size_t bytes = 0;
    double wall_seconds = 0.0;

    double modeled_seconds() const {
        return static_cast<double>(qubits) * kSecondsPerQubit + static_cast<double>(bytes) * kSecondsPerByte;
    }
};

struct DeviceState {
    std::size_t id = 0;
    vqc::VqcModel model;
    vqc::DeviceSplit shard;
    std::optional<pqc::SigKeypair> sig_key;  ///< fresh one-time key per round
    Bytes server_sig_pk;                      ///< server's downlink key for this round
};

struct ServerState {
    WeightVector global_params;
    /// Live key context per device for the current round.
    std::map<std::size_t, Bytes> device_sig_pk;
    std::map<std::size_t, pqc::SigKeypair> downlink_sig_key;
    std::map<std::size_t, Bytes> kem_session;  ///< shared secret from this round's uplink
    std::optional<pqc::KemKeypair> kem_keypair;
    vqc::Split val;
    vqc::Split test;
};

struct UplinkResult {
    bool accepted = false;
    WeightVector weights;      ///< server-side view when accepted
    std::string reason;        ///< rejection cause
    std::optional<double> qber;
    bool tampered = false;
};

struct DownlinkResult {
    bool delivered = false;
    std::string reason;
    std::optional<double> qber;
};

struct RoundMetrics {
    std::size_t round = 0;
    ChannelKind channel = ChannelKind::Plain;
    double server_test_acc = 0.0;
    double server_val_loss = 0.0;
    double avg_device_loss = 0.0;
    double comm_time_s = 0.0;       ///< modeled channel time
    double comm_wall_time_s = 0.0;  ///< measured channel time, not part of the CSV
    std::optional<double> qber;     ///< worst QKD test-bit error rate in the round
    std::vector<std::size_t> aborted_devices;  ///< uplinks rejected
    std::vector<std::size_t> downlink_failed;
    bool aggregated = false;
};

/// Elementwise arithmetic mean. Throws on an empty list or unequal lengths.
WeightVector fedavg(const std::vector<WeightVector>& params);

class Federation {
  public:
    Federation(std::vector<vqc::DeviceSplit> shards, vqc::Split server_val, vqc::Split server_test, int n_classes,
               ChannelConfig channel, AdversaryConfig adversary, vqc::TrainConfig train, std::uint64_t seed,
               pqc::Registry registry = pqc::Registry::with_defaults());

    std::vector<DeviceState>& devices() { return devices_; }
    const std::vector<DeviceState>& devices() const { return devices_; }
    ServerState& server() { return server_; }
    const ChannelConfig& channel() const { return channel_; }
    AdversaryConfig& adversary() { return adversary_; }

    /// Per-round key setup (one-time signature keys, KEM session reset).
    void begin_round(std::size_t round, Rng& rng);
    UplinkResult uplink(std::size_t device, Rng& rng, CommMeter& meter);
    DownlinkResult downlink(std::size_t device, Rng& rng, CommMeter& meter);

    /// Train, uplink, gate, aggregate, downlink, evaluate.
    RoundMetrics run_round(std::size_t round);

    /// Hook for tests: inspect or modify every uplink message in transit.
    std::function<void(Message&)> on_uplink;

  private:
    Message apply_tamper(Message m, Rng& rng);

    std::vector<DeviceState> devices_;
    ServerState server_;
    ChannelConfig channel_;
    AdversaryConfig adversary_;
    vqc::TrainConfig train_;
    std::uint64_t seed_;
    int n_classes_;
    pqc::Registry registry_;
    std::size_t round_ = 0;
};

struct ExperimentConfig {
    std::string dataset;  ///< iris or synthetic_genomic
    std::size_t devices = 3;
    std::size_t rounds = 10;
    ChannelConfig channel;
    AdversaryConfig adversary;
    std::size_t shots = vqc::kDefaultShots;
    std::size_t max_iter = 10;
    vqc::Optimizer optimizer = vqc::Optimizer::NelderMead;
    std::uint64_t seed = 0;
    std::size_t genomic_train = 5000;
    std::size_t genomic_server = 150;
    std::string out_path;
};

struct ExperimentSummary {
    std::size_t rounds = 0;
    double final_test_acc = 0.0;
    double avg_test_acc = 0.0;
    double final_val_loss = 0.0;
    double avg_val_loss = 0.0;
    double avg_device_loss = 0.0;
    double avg_comm_time_s = 0.0;
    double avg_comm_wall_time_s = 0.0;
    std::size_t aborted_rounds = 0;
};

struct ExperimentResult {
    std::vector<RoundMetrics> rows;
    ExperimentSummary summary;
    WeightVector final_global;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

inline constexpr const char* kMetricsCsvHeader =
    "round,channel,server_test_acc,server_val_loss,avg_device_loss,comm_time_s,qber,aborted_devices";

std::string metrics_csv(const std::vector<RoundMetrics>& rows);
/// Parses a metrics CSV back into rows (wall time and flags not included).
std::vector<RoundMetrics> parse_metrics_csv(const std::string& text);

} // namespace qshield::fed
