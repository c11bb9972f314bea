#include "qshield/vqc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace qshield::vqc {

namespace {

void check_params(const WeightVector& params) {
    if (params.size() != kParamCount)
        throw std::invalid_argument("expected " + std::to_string(kParamCount) + " parameters, got " +
                                    std::to_string(params.size()));
}

void ry(qsim::Statevector& sv, int q, double angle) { sv.u3(q, angle, 0.0, 0.0); }

std::vector<double> bucket(const std::vector<double>& mass, int n_classes) {
    std::vector<double> out(static_cast<std::size_t>(n_classes), 0.0);
    for (std::size_t i = 0; i < mass.size(); ++i) out[i % static_cast<std::size_t>(n_classes)] += mass[i];
    return out;
}

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

void standardize(Dataset& d) {
    for (int k = 0; k < kQubits; ++k) {
        double mean = 0.0;
        for (const auto& f : d.train.x) mean += f[static_cast<std::size_t>(k)];
        mean /= static_cast<double>(d.train.size());
        double var = 0.0;
        for (const auto& f : d.train.x) var += std::pow(f[static_cast<std::size_t>(k)] - mean, 2);
        var /= static_cast<double>(d.train.size());
        const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
        for (Split* s : {&d.train, &d.val, &d.test})
            for (auto& f : s->x) f[static_cast<std::size_t>(k)] = (f[static_cast<std::size_t>(k)] - mean) / sd;
    }
}

} // namespace

qsim::Statevector run_circuit(std::span<const double> x, const WeightVector& params) {
    if (x.size() != kQubits) throw std::invalid_argument("feature vector must have 4 entries");
    check_params(params);
    qsim::Statevector sv(kQubits);
    for (int q = 0; q < kQubits; ++q) {
        sv.h(q);
        sv.u3(q, 0.0, 0.0, 2.0 * x[static_cast<std::size_t>(q)]);
    }
    std::size_t p = 0;
    for (int rep = 0; rep < kReps; ++rep) {
        for (int q = 0; q < kQubits; ++q) ry(sv, q, params[p++]);
        for (int q = 0; q + 1 < kQubits; ++q) sv.cnot(q, q + 1);
    }
    for (int q = 0; q < kQubits; ++q) ry(sv, q, params[p++]);
    return sv;
}

qsim::Statevector run_circuit(const Features& x, const WeightVector& params) {
    return run_circuit(std::span<const double>(x), params);
}

std::vector<double> class_distribution(const VqcModel& m, const Features& x, std::size_t shots, Rng& rng) {
    if (m.n_classes < 2) throw std::invalid_argument("n_classes must be >= 2");
    const auto probs = run_circuit(x, m.params).probabilities();
    if (shots == 0) return bucket(probs, m.n_classes);
    const auto counts = qsim::sample_counts(probs, shots, rng);
    std::vector<double> freq(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        freq[i] = static_cast<double>(counts[i]) / static_cast<double>(shots);
    return bucket(freq, m.n_classes);
}

int predict(const VqcModel& m, const Features& x, std::size_t shots, Rng& rng) {
    const auto dist = class_distribution(m, x, shots, rng);
    // max_element returns the first maximum, so ties go to the lowest class.
    return static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
}

double loss(const VqcModel& m, const Split& data, std::size_t shots, Rng& rng) {
    if (data.empty()) throw std::invalid_argument("loss over an empty split");
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto dist = class_distribution(m, data.x[i], shots, rng);
        const auto label = static_cast<std::size_t>(data.y[i]);
        if (label >= dist.size()) throw std::out_of_range("label out of range");
        total += -std::log(std::max(dist[label], kLossFloor));
    }
    return total / static_cast<double>(data.size());
}

double accuracy(const VqcModel& m, const Split& data, std::size_t shots, Rng& rng) {
    if (data.empty()) throw std::invalid_argument("accuracy over an empty split");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) hits += predict(m, data.x[i], shots, rng) == data.y[i];
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainResult train_local(const VqcModel& m, const Split& data, const TrainConfig& cfg) {
    if (cfg.max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
    if (cfg.shots < 1) throw std::invalid_argument("shots must be >= 1");
    check_params(m.params);

    const std::uint64_t sample_seed = derive_seed(cfg.seed, {0x5A3D});
    Objective f = [&](const WeightVector& p) {
        Rng sampler(sample_seed);
        VqcModel trial{p, m.n_classes};
        return loss(trial, data, cfg.shots, sampler);
    };

    TrainResult out;
    out.initial_loss = f(m.params);
    OptimizeResult r;
    if (cfg.optimizer == Optimizer::NelderMead) {
        r = nelder_mead(f, m.params, cfg.max_iter, cfg.initial_step);
    } else {
        Rng rng(derive_seed(cfg.seed, {0x5B5A}));
        r = spsa(f, m.params, cfg.max_iter, cfg.initial_step, rng);
    }
    out.evaluations = r.evaluations + 1;
    out.model = m;
    if (r.best_value < out.initial_loss) {
        out.model.params = r.best;
        out.best_loss = r.best_value;
    } else {
        out.best_loss = out.initial_loss;
    }
    out.best_loss_history = std::move(r.history);
    for (auto& h : out.best_loss_history) h = std::min(h, out.initial_loss);
    return out;
}

// ---- optimizers ------------------------------------------------------------

OptimizeResult nelder_mead(const Objective& f, const WeightVector& x0, std::size_t max_iter, double step) {
    constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
    const std::size_t n = x0.size();
    if (n == 0) throw std::invalid_argument("nelder_mead: empty parameter vector");

    OptimizeResult res;
    std::vector<WeightVector> simplex(n + 1, x0);
    std::vector<double> values(n + 1);
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += step;
    for (std::size_t i = 0; i <= n; ++i) values[i] = f(simplex[i]);
    res.evaluations = n + 1;

    auto eval = [&](const WeightVector& x) {
        ++res.evaluations;
        return f(x);
    };
    auto lerp = [&](const WeightVector& a, const WeightVector& b, double t) {
        // a + t * (b - a)
        WeightVector out(n);
        for (std::size_t k = 0; k < n; ++k) out[k] = a[k] + t * (b[k] - a[k]);
        return out;
    };

    std::vector<std::size_t> order(n + 1);
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
        std::vector<WeightVector> s2;
        std::vector<double> v2;
        for (auto i : order) {
            s2.push_back(std::move(simplex[i]));
            v2.push_back(values[i]);
        }
        simplex = std::move(s2);
        values = std::move(v2);
    };

    sort_simplex();
    for (std::size_t it = 0; it < max_iter; ++it) {
        WeightVector centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / static_cast<double>(n);

        const WeightVector& worst = simplex[n];
        const WeightVector xr = lerp(centroid, worst, -kReflect);
        const double fr = eval(xr);

        if (fr < values[0]) {
            const WeightVector xe = lerp(centroid, worst, -kExpand);
            const double fe = eval(xe);
            if (fe < fr) {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if (fr < values[n - 1]) {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            const bool outside = fr < values[n];
            const WeightVector xc = outside ? lerp(centroid, xr, kContract) : lerp(centroid, worst, kContract);
            const double fc = eval(xc);
            if (fc < (outside ? fr : values[n])) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for (std::size_t i = 1; i <= n; ++i) {
                    simplex[i] = lerp(simplex[0], simplex[i], kShrink);
                    values[i] = eval(simplex[i]);
                }
            }
        }
        sort_simplex();
        res.history.push_back(values[0]);
    }
    res.best = simplex[0];
    res.best_value = values[0];
    return res;
}

OptimizeResult spsa(const Objective& f, const WeightVector& x0, std::size_t max_iter, double step, Rng& rng) {
    constexpr double kAlpha = 0.602, kGamma = 0.101, kStability = 1.0;
    const std::size_t n = x0.size();
    OptimizeResult res;
    WeightVector x = x0;
    res.best = x0;
    res.best_value = f(x0);
    res.evaluations = 1;
    const double a = step;
    const double c = 0.2 * step;

    for (std::size_t k = 0; k < max_iter; ++k) {
        const double ak = a / std::pow(static_cast<double>(k) + 1.0 + kStability, kAlpha);
        const double ck = c / std::pow(static_cast<double>(k) + 1.0, kGamma);
        WeightVector delta(n), plus(n), minus(n);
        for (std::size_t i = 0; i < n; ++i) {
            delta[i] = rng.bit() ? 1.0 : -1.0;
            plus[i] = x[i] + ck * delta[i];
            minus[i] = x[i] - ck * delta[i];
        }
        const double fp = f(plus), fm = f(minus);
        res.evaluations += 2;
        for (std::size_t i = 0; i < n; ++i) x[i] -= ak * (fp - fm) / (2.0 * ck * delta[i]);
        const double fx = f(x);
        ++res.evaluations;
        for (auto [v, p] : {std::pair{fp, &plus}, std::pair{fm, &minus}, std::pair{fx, &x}}) {
            if (v < res.best_value) {
                res.best_value = v;
                res.best = *p;
            }
        }
        res.history.push_back(res.best_value);
    }
    return res;
}

// ---- data --------------------------------------------------------------------

Dataset load_iris(const std::filesystem::path& csv, std::uint64_t seed) {
    std::ifstream in(csv);
    if (!in) throw std::runtime_error("missing IRIS fixture: " + csv.string());
    Split all;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        Features f{};
        std::string cell;
        for (auto& v : f) {
            if (!std::getline(row, cell, ',')) throw std::runtime_error("IRIS row has too few columns: " + line);
            v = std::stod(cell);
        }
        if (!std::getline(row, cell, ',')) throw std::runtime_error("IRIS row missing label: " + line);
        const int label = std::stoi(cell);
        if (label < 0 || label > 2) throw std::runtime_error("IRIS label out of range: " + line);
        all.push(f, label);
    }
    if (all.size() != 150) throw std::runtime_error("IRIS fixture must have 150 rows");

    std::vector<std::size_t> idx(all.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    shuffle(idx, rng);

    Dataset d;
    d.n_classes = 3;
    const std::size_t n_train = 90, n_val = 30;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        Split& dst = k < n_train ? d.train : (k < n_train + n_val ? d.val : d.test);
        dst.push(all.x[idx[k]], all.y[idx[k]]);
    }
    standardize(d);
    return d;
}

Dataset synth_genomic(std::size_t n_train, std::size_t n_server, std::uint64_t seed) {
    constexpr std::size_t kDims = 32;
    constexpr std::size_t kInformative = 4;
    constexpr double kShift = 1.5, kSignalSd = 1.0, kNoiseSd = 0.5;
    if (n_train < 2 || n_server < 2) throw std::invalid_argument("synth_genomic: sample counts too small");

    Rng rng(seed);
    auto draw = [&](std::vector<std::array<double, kDims>>& xs, std::vector<int>& ys, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            const int label = rng.bit();
            std::array<double, kDims> v{};
            for (std::size_t k = 0; k < kDims; ++k) {
                if (k < kInformative) {
                    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
                    v[k] = (label ? kShift : -kShift) * sign + kSignalSd * rng.normal();
                } else {
                    v[k] = kNoiseSd * rng.normal();
                }
            }
            xs.push_back(v);
            ys.push_back(label);
        }
    };
    std::vector<std::array<double, kDims>> xt, xs;
    std::vector<int> yt, ys;
    draw(xt, yt, n_train);
    draw(xs, ys, n_server);

    // Variance-ranked projection onto the top-4 training-pool coordinates.
    std::array<double, kDims> var{};
    for (std::size_t k = 0; k < kDims; ++k) {
        double mean = 0.0;
        for (const auto& v : xt) mean += v[k];
        mean /= static_cast<double>(xt.size());
        for (const auto& v : xt) var[k] += (v[k] - mean) * (v[k] - mean);
    }
    std::vector<std::size_t> rank(kDims);
    std::iota(rank.begin(), rank.end(), 0);
    std::stable_sort(rank.begin(), rank.end(), [&](auto a, auto b) { return var[a] > var[b]; });

    auto project = [&](const std::array<double, kDims>& v) {
        Features f{};
        for (std::size_t k = 0; k < kQubits; ++k) f[k] = v[rank[k]];
        return f;
    };

    Dataset d;
    d.n_classes = 2;
    for (std::size_t i = 0; i < xt.size(); ++i) d.train.push(project(xt[i]), yt[i]);
    for (std::size_t i = 0; i < xs.size(); ++i) (i < n_server / 2 ? d.val : d.test).push(project(xs[i]), ys[i]);
    standardize(d);
    return d;
}

std::vector<DeviceSplit> partition_iid(const Dataset& d, std::size_t n_devices, std::uint64_t seed) {
    if (n_devices < 1) throw std::invalid_argument("partition_iid: n_devices must be >= 1");
    const std::size_t n = d.train.size();
    if (n_devices > n) throw std::invalid_argument("partition_iid: more devices than samples");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    shuffle(idx, rng);

    std::vector<DeviceSplit> out(n_devices);
    std::size_t pos = 0;
    for (std::size_t dev = 0; dev < n_devices; ++dev) {
        const std::size_t shard = n / n_devices + (dev < n % n_devices ? 1 : 0);
        const std::size_t n_val = shard / 5;
        for (std::size_t k = 0; k < shard; ++k, ++pos) {
            Split& dst = k < shard - n_val ? out[dev].train : out[dev].val;
            dst.push(d.train.x[idx[pos]], d.train.y[idx[pos]]);
        }
    }
    return out;
}

WeightVector random_params(Rng& rng) {
    WeightVector p(kParamCount);
    for (auto& v : p) v = rng.uniform(-std::numbers::pi, std::numbers::pi);
    return p;
}

} // namespace qshield::vqc
