#include "otafeel/fedlearn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "otafeel/aggregation.hpp"
#include "otafeel/sensing.hpp"

namespace otafeel::fed {

using num::Matrix;
using num::Vector;

namespace {
constexpr std::uint32_t kFlatMagic = 0x4F544446u;

double gamma_draw(num::RngStream& rng, double shape) {
    // Marsaglia-Tsang; shapes below one via the boosting identity.
    if (shape < 1.0) {
        const double u = rng.next_open_double();
        return gamma_draw(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    while (true) {
        double x, v;
        do {
            x = rng.next_normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.next_open_double();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

std::uint32_t read_be32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}
}  // namespace

Dataset make_synthetic(int n, int dim, double class_sep, num::RngStream& rng) {
    if (n < 2 || dim < 1) throw std::invalid_argument("make_synthetic: need n >= 2, dim >= 1");
    RealVector dir(dim);
    for (int j = 0; j < dim; ++j) dir(j) = rng.next_normal();
    dir.normalize();
    Dataset ds;
    ds.X.resize(n, dim);
    ds.y.resize(n);
    for (int i = 0; i < n; ++i) {
        const int label = i % 2;
        const double sign = label ? 1.0 : -1.0;
        for (int j = 0; j < dim; ++j) {
            ds.X(i, j) = sign * 0.5 * class_sep * dir(j) + rng.next_normal();
        }
        ds.y[i] = label;
    }
    return ds;
}

void save_flat_binary(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_flat_binary: cannot open " + path);
    const std::uint32_t magic = kFlatMagic, n = ds.n(), dim = ds.dim();
    out.write(reinterpret_cast<const char*>(&magic), 4);
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(reinterpret_cast<const char*>(&dim), 4);
    for (int i = 0; i < ds.n(); ++i) {
        for (int j = 0; j < ds.dim(); ++j) {
            const float v = static_cast<float>(ds.X(i, j));
            out.write(reinterpret_cast<const char*>(&v), 4);
        }
    }
    for (int i = 0; i < ds.n(); ++i) {
        const std::int32_t lab = ds.y[i];
        out.write(reinterpret_cast<const char*>(&lab), 4);
    }
    if (!out) throw std::runtime_error("save_flat_binary: write failed for " + path);
}

Dataset load_flat_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_flat_binary: cannot open " + path);
    std::uint32_t magic = 0, n = 0, dim = 0;
    in.read(reinterpret_cast<char*>(&magic), 4);
    in.read(reinterpret_cast<char*>(&n), 4);
    in.read(reinterpret_cast<char*>(&dim), 4);
    if (!in || magic != kFlatMagic) {
        throw std::runtime_error("load_flat_binary: bad magic in " + path);
    }
    Dataset ds;
    ds.X.resize(n, dim);
    ds.y.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = 0; j < dim; ++j) {
            float v = 0.0f;
            in.read(reinterpret_cast<char*>(&v), 4);
            ds.X(i, j) = v;
        }
    }
    for (std::uint32_t i = 0; i < n; ++i) {
        std::int32_t lab = 0;
        in.read(reinterpret_cast<char*>(&lab), 4);
        ds.y[i] = lab;
    }
    if (!in) throw std::runtime_error("load_flat_binary: truncated file " + path);
    return ds;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary), lab(labels_path, std::ios::binary);
    if (!img) throw std::runtime_error("load_idx: cannot open " + images_path);
    if (!lab) throw std::runtime_error("load_idx: cannot open " + labels_path);
    if (read_be32(img) != 0x803u) throw std::runtime_error("load_idx: bad image magic");
    const std::uint32_t n = read_be32(img), rows = read_be32(img), cols = read_be32(img);
    if (read_be32(lab) != 0x801u) throw std::runtime_error("load_idx: bad label magic");
    if (read_be32(lab) != n) throw std::runtime_error("load_idx: image/label count mismatch");
    const std::uint32_t dim = rows * cols;
    Dataset ds;
    ds.X.resize(n, dim);
    ds.y.resize(n);
    std::vector<unsigned char> buf(dim);
    for (std::uint32_t i = 0; i < n; ++i) {
        img.read(reinterpret_cast<char*>(buf.data()), dim);
        for (std::uint32_t j = 0; j < dim; ++j) ds.X(i, j) = buf[j] / 255.0;
        unsigned char c = 0;
        lab.read(reinterpret_cast<char*>(&c), 1);
        ds.y[i] = c % 2;
    }
    if (!img || !lab) throw std::runtime_error("load_idx: truncated input");
    return ds;
}

std::vector<double> DataPartition::sizes() const {
    std::vector<double> s(shards.size());
    for (size_t k = 0; k < shards.size(); ++k) s[k] = static_cast<double>(shards[k].size());
    return s;
}

DataPartition partition_dirichlet(const Dataset& ds, int K, double alpha_dir,
                                  num::RngStream& rng) {
    const int n = ds.n();
    if (K < 1 || K > n) throw std::invalid_argument("partition_dirichlet: need 1 <= K <= n");
    if (alpha_dir <= 0.0) throw std::invalid_argument("partition_dirichlet: alpha_dir <= 0");

    std::vector<double> p(K);
    double total = 0.0;
    for (int k = 0; k < K; ++k) total += p[k] = gamma_draw(rng, alpha_dir);
    for (double& v : p) v /= total;

    // Largest-remainder rounding to sum exactly n.
    std::vector<int> count(K);
    std::vector<std::pair<double, int>> rem(K);
    int assigned = 0;
    for (int k = 0; k < K; ++k) {
        const double t = p[k] * n;
        count[k] = static_cast<int>(std::floor(t));
        assigned += count[k];
        rem[k] = {t - count[k], k};
    }
    std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (int i = 0; i < n - assigned; ++i) ++count[rem[i % K].second];
    // Every device keeps at least one sample.
    for (int k = 0; k < K; ++k) {
        while (count[k] == 0) {
            const int donor =
                static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
            --count[donor];
            ++count[k];
        }
    }

    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = n - 1; i > 0; --i) {
        std::swap(idx[i], idx[rng.next_below(static_cast<std::uint64_t>(i) + 1)]);
    }
    DataPartition part;
    part.shards.resize(K);
    int pos = 0;
    for (int k = 0; k < K; ++k) {
        part.shards[k].assign(idx.begin() + pos, idx.begin() + pos + count[k]);
        pos += count[k];
    }
    return part;
}

double logistic_loss(const RealVector& r, const Dataset& ds, const std::vector<int>& idx,
                     double reg) {
    double s = 0.0;
    for (int i : idx) {
        const double t = ds.y[i] ? 1.0 : -1.0;
        const double z = -t * ds.X.row(i).dot(r);
        s += z > 30.0 ? z : std::log1p(std::exp(z));
    }
    return s / idx.size() + 0.5 * reg * r.squaredNorm();
}

RealVector logistic_grad(const RealVector& r, const Dataset& ds, const std::vector<int>& idx,
                         double reg) {
    RealVector g = RealVector::Zero(r.size());
    for (int i : idx) {
        const double t = ds.y[i] ? 1.0 : -1.0;
        const double z = t * ds.X.row(i).dot(r);
        const double s = 1.0 / (1.0 + std::exp(z));  // sigma(-z)
        g -= (t * s) * ds.X.row(i).transpose();
    }
    return g / idx.size() + reg * r;
}

double accuracy(const RealVector& r, const Dataset& ds) {
    int hits = 0;
    for (int i = 0; i < ds.n(); ++i) {
        const int pred = ds.X.row(i).dot(r) > 0.0 ? 1 : 0;
        hits += pred == ds.y[i];
    }
    return static_cast<double>(hits) / ds.n();
}

double lipschitz_estimate(const Dataset& ds, double reg) {
    const RealMatrix gram = ds.X.transpose() * ds.X;
    Eigen::SelfAdjointEigenSolver<RealMatrix> eig(gram, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().maxCoeff() / (4.0 * ds.n()) + reg;
}

RealVector local_update(const RealVector& r_global, const Dataset& ds,
                        const std::vector<int>& shard, int steps, double lr, int batch,
                        double reg, num::RngStream& rng) {
    if (steps < 1) throw std::invalid_argument("local_update: steps < 1");
    if (shard.empty()) throw std::invalid_argument("local_update: empty shard");
    RealVector r = r_global;
    const bool full = batch <= 0 || batch >= static_cast<int>(shard.size());
    std::vector<int> mini(full ? 0 : batch);
    for (int j = 0; j < steps; ++j) {
        if (full) {
            r -= lr * logistic_grad(r, ds, shard, reg);
        } else {
            for (int& b : mini) b = shard[rng.next_below(shard.size())];
            r -= lr * logistic_grad(r, ds, mini, reg);
        }
    }
    return r;
}

RealVector centralized_minimizer(const Dataset& ds, double reg, int iters) {
    std::vector<int> all(ds.n());
    std::iota(all.begin(), all.end(), 0);
    const double lr = 1.0 / lipschitz_estimate(ds, reg);
    RealVector r = RealVector::Zero(ds.dim());
    for (int i = 0; i < iters; ++i) r -= lr * logistic_grad(r, ds, all, reg);
    return r;
}

TrainState init_train_state(const Dataset& ds, double reg, int ref_iters) {
    std::vector<int> all(ds.n());
    std::iota(all.begin(), all.end(), 0);
    TrainState st;
    st.r = RealVector::Zero(ds.dim());
    st.loss_star = logistic_loss(centralized_minimizer(ds, reg, ref_iters), ds, all, reg);
    return st;
}

TrainState run_feel_round(TrainState state, const Dataset& ds, const DataPartition& part,
                          const chan::ChannelRealization& real, const SystemConfig& cfg,
                          const TrainConfig& tcfg, num::RngStream& rng) {
    const int K = cfg.K;
    if (static_cast<int>(part.shards.size()) != K) {
        throw std::invalid_argument("run_feel_round: partition/device count mismatch");
    }
    const std::vector<double> sizes = part.sizes();

    sched::ScheduleOutcome sch = sched::schedule_mp(real, cfg, sizes);
    if (!sch.feasible || sch.S.empty()) {
        // Best-effort singleton on the strongest uplink channel, flagged.
        int k_best = 0;
        for (int k = 1; k < K; ++k) {
            if (real.F.col(k).norm() > real.F.col(k_best).norm()) k_best = k;
        }
        sch.S = {k_best};
        sch.phi = sched::make_phi(sch.S, K, {});
        sch.c = real.F.col(k_best).normalized();
        if (sch.W.size() == 0) {
            SystemConfig relaxed = cfg;
            relaxed.gamma = 0.0;
            sch.W = sched::solve_precoder_m1(real.Hdl, relaxed).W;
        }
        state.fallback_rounds.push_back(state.round);
    }
    const Matrix& W = sch.W;

    num::RngStream rng_chan = rng.substream(1);

    // Local updates for every device; only scheduled devices transmit.
    std::vector<RealVector> delta(K);
    for (int k = 0; k < K; ++k) {
        num::RngStream rng_dev = rng.substream(2 + static_cast<std::uint64_t>(k));
        delta[k] = local_update(state.r, ds, part.shards[k], tcfg.local_steps, tcfg.lr,
                                tcfg.batch, tcfg.reg, rng_dev) -
                   state.r;
    }

    // Per-round sensing estimate from a pilot block under live uplink noise.
    Matrix G_hat = Matrix::Zero(cfg.N, cfg.N);
    const sense::UplinkScaling round_scal =
        agg::zf_coordination(real.F, sch.c, sch.phi, sch.S, cfg.P_u);
    if (tcfg.sensing_enabled && tcfg.echo_enabled) {
        const Vector d = sense::pilot_symbols(rng_chan, cfg.L);
        const Matrix R = sense::effective_noise_cov(real.F, round_scal, 1, cfg.sigma2_ps);
        const Matrix T = R.norm() == 0.0 ? Matrix::Identity(cfg.N, cfg.N).eval()
                                         : sense::whitening_filter(R);
        Matrix Ys = real.G * W.leftCols(cfg.L) * d.asDiagonal();
        for (int l = 0; l < cfg.L; ++l) {
            for (int k : sch.S) Ys.col(l) += real.F.col(k) * round_scal.b(k) * rng_chan.next_normal();
        }
        Ys += num::sample_complex_gaussian_matrix(rng_chan, cfg.N, cfg.L, cfg.sigma2_ps);
        G_hat = sense::ml_estimate_G(Ys, W, d, T);
    }

    // Transmit the weighted model delta in blocks of M symbols, normalized to
    // zero mean / unit variance per device per block; means travel as
    // error-free side information.
    const int D = ds.dim();
    RealVector u_hat(D);
    for (int b0 = 0; b0 < D; b0 += cfg.M) {
        const int mb = std::min(cfg.M, D - b0);
        RealVector omega = RealVector::Zero(K);
        RealVector meank = RealVector::Zero(K);
        RealVector stdk = RealVector::Zero(K);
        double mean_term = 0.0;
        std::vector<int> S_pos;
        for (int k : sch.S) {
            const auto seg = delta[k].segment(b0, mb);
            meank(k) = seg.mean();
            stdk(k) = std::sqrt((seg.array() - meank(k)).square().sum() / mb);
            mean_term += sch.phi(k) * meank(k);
            omega(k) = sch.phi(k) * stdk(k);
            if (omega(k) > 0.0) S_pos.push_back(k);
        }
        if (S_pos.empty()) {
            u_hat.segment(b0, mb).setConstant(mean_term);
            continue;
        }
        const sense::UplinkScaling blk = agg::zf_coordination(real.F, sch.c, omega, S_pos, cfg.P_u);
        Vector x(mb);
        for (int m = 0; m < mb; ++m) x(m) = rng_chan.next_u64() & 1 ? 1.0 : -1.0;
        Matrix Y = Matrix::Zero(cfg.N, mb);
        for (int m = 0; m < mb; ++m) {
            for (int k : S_pos) {
                const double s = (delta[k](b0 + m) - meank(k)) / stdk(k);
                Y.col(m) += real.F.col(k) * blk.b(k) * s;
            }
            if (tcfg.echo_enabled) Y.col(m) += real.G * W.col(m % cfg.L) * x(m);
        }
        Y += num::sample_complex_gaussian_matrix(rng_chan, cfg.N, mb, cfg.sigma2_ps);
        const std::vector<int> beta_s(mb, tcfg.echo_enabled ? 1 : 0);
        const RealVector agg = agg::sic_aggregate(Y, G_hat, W, x, sch.c, blk, beta_s);
        u_hat.segment(b0, mb) = agg.array() + mean_term;
    }

    state.r += u_hat;
    state.round += 1;
    std::vector<int> all(ds.n());
    std::iota(all.begin(), all.end(), 0);
    const double loss = logistic_loss(state.r, ds, all, tcfg.reg);
    state.loss_history.push_back(loss);
    state.acc_history.push_back(accuracy(state.r, ds));
    state.gap_history.push_back(loss - state.loss_star);
    return state;
}

GapReport gap_bound_check(const std::vector<double>& gap_history, double zeta, double L_lip,
                          double eps0) {
    GapReport rep;
    rep.fixed_point = eps0 / (2.0 * zeta);
    const size_t T = gap_history.size();
    if (T >= 2) {
        int hold = 0;
        for (size_t t = 0; t + 1 < T; ++t) {
            const double bound = (1.0 - zeta / L_lip) * gap_history[t] + eps0 / (2.0 * L_lip);
            hold += gap_history[t + 1] <= bound + 1e-12;
        }
        rep.fraction_holding = static_cast<double>(hold) / (T - 1);
    }
    const size_t tail = std::max<size_t>(1, T / 4);
    double s = 0.0;
    for (size_t t = T - tail; t < T; ++t) s += gap_history[t];
    rep.asymptotic_gap = T ? s / tail : 0.0;
    return rep;
}

}  // namespace otafeel::fed
