#pragma once

#include "qshield/common.hpp"
#include "qshield/qsim.hpp"
#include "qshield/rng.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <vector>

/// Four-qubit variational classifier.
///
/// Feature map: H on every qubit, then a Z-phase of 2*x[q] on qubit q.
/// Ansatz: three repetitions of (RY per qubit, CNOT chain 0->1->2->3)
/// followed by a final RY layer; 16 trainable angles, layer-major.
/// Prediction buckets each measured 4-bit outcome into class
/// (outcome mod n_classes).
namespace qshield::vqc {

inline constexpr int kQubits = 4;
inline constexpr int kReps = 3;
inline constexpr std::size_t kParamCount = kQubits * (kReps + 1);
inline constexpr std::size_t kDefaultShots = 1024;
inline constexpr double kLossFloor = 1e-9;

using Features = std::array<double, kQubits>;

struct Split {
    std::vector<Features> x;
    std::vector<int> y;

    std::size_t size() const noexcept { return y.size(); }
    bool empty() const noexcept { return y.empty(); }
    void push(const Features& f, int label) {
        x.push_back(f);
        y.push_back(label);
    }
};

struct Dataset {
    Split train;
    Split val;   ///< server validation
    Split test;  ///< server test
    int n_classes = 2;
};

struct DeviceSplit {
    Split train;
    Split val;
};

struct VqcModel {
    WeightVector params = WeightVector(kParamCount, 0.0);
    int n_classes = 2;
};

enum class Optimizer { NelderMead, Spsa };

struct TrainConfig {
    std::size_t max_iter = 10;
    std::size_t shots = kDefaultShots;
    Optimizer optimizer = Optimizer::NelderMead;
    std::uint64_t seed = 0;
    double initial_step = 0.5;  ///< simplex edge / SPSA perturbation scale, radians
};

/// Statevector after feature map and ansatz.
qsim::Statevector run_circuit(const Features& x, const WeightVector& params);
qsim::Statevector run_circuit(std::span<const double> x, const WeightVector& params);

/// Per-class probability mass of the circuit output (exact when shots == 0,
/// otherwise multinomial frequencies from `shots` samples).
std::vector<double> class_distribution(const VqcModel& m, const Features& x, std::size_t shots, Rng& rng);

int predict(const VqcModel& m, const Features& x, std::size_t shots, Rng& rng);

/// Mean of -log(max(p_true, 1e-9)) over the split.
double loss(const VqcModel& m, const Split& data, std::size_t shots, Rng& rng);

double accuracy(const VqcModel& m, const Split& data, std::size_t shots, Rng& rng);

struct TrainResult {
    VqcModel model;
    double initial_loss = 0.0;
    double best_loss = 0.0;
    std::vector<double> best_loss_history;  ///< best-so-far after each iteration
    std::size_t evaluations = 0;
};

/// Derivative-free local training. The objective reuses one sampling
/// stream per evaluation (seeded from cfg.seed), so it is a deterministic
/// function of the parameters. Returns the best parameters seen.
TrainResult train_local(const VqcModel& m, const Split& data, const TrainConfig& cfg);

// ---- optimizers ----------------------------------------------------------

using Objective = std::function<double(const WeightVector&)>;

struct OptimizeResult {
    WeightVector best;
    double best_value = 0.0;
    std::vector<double> history;
    std::size_t evaluations = 0;
};

/// Nelder-Mead simplex; one reflection/expansion/contraction/shrink step
/// per iteration.
OptimizeResult nelder_mead(const Objective& f, const WeightVector& x0, std::size_t max_iter, double step);

/// Simultaneous-perturbation stochastic approximation with standard gain
/// decay (alpha = 0.602, gamma = 0.101).
OptimizeResult spsa(const Objective& f, const WeightVector& x0, std::size_t max_iter, double step, Rng& rng);

// ---- data ----------------------------------------------------------------

/// Loads the bundled IRIS table (4 features + label, 150 rows) and splits
/// it 60/20/20 into client training pool, server validation and server
/// test. Features are standardized with training-pool statistics.
Dataset load_iris(const std::filesystem::path& csv, std::uint64_t seed);

/// Two-class Gaussian mixture in 32 dimensions reduced to 4 features by
/// keeping the highest-variance coordinates of the training pool. Server
/// samples are split evenly into validation and test.
Dataset synth_genomic(std::size_t n_train, std::size_t n_server, std::uint64_t seed);

/// Shuffles the training pool, deals it into n_devices near-equal disjoint
/// shards and splits each 80/20 into train/val.
std::vector<DeviceSplit> partition_iid(const Dataset& d, std::size_t n_devices, std::uint64_t seed);

/// Random initial parameters, uniform in [-pi, pi).
WeightVector random_params(Rng& rng);

} // namespace qshield::vqc
