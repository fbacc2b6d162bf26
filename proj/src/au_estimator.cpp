#include "sgnoma/au_estimator.hpp"

#include "fft.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sgnoma {

namespace {

cd unit_phase(double cycles) { return std::exp(kJ * (2.0 * kPi * std::fmod(cycles, 1.0))); }

double wrap_half(double a) {
    a = std::fmod(a + 0.5, 1.0);
    if (a < 0.0) a += 1.0;
    return a - 0.5;
}

}  // namespace

namespace {

// Weighted CCCM; weights apply to the block index n of y[n] and are normalized
// to sum to N.
CMatrix weighted_cccm(const CMatrix& blocks, double alpha, int lag, const RVector* weights) {
    const Eigen::Index n = blocks.cols();
    if (n < 2) throw std::invalid_argument("estimate_cccm: need at least two blocks");
    const Eigen::Index p = blocks.rows();
    const int r = lag;
    const Eigen::Index count = n - std::abs(r);
    if (count <= 0) return CMatrix::Zero(p, p);
    const Eigen::Index first = std::max<Eigen::Index>(0, r);  // first n with n - r in range
    CVector phase(count);
    for (Eigen::Index i = 0; i < count; ++i) {
        phase(i) = unit_phase(-alpha * double(first + i));
        if (weights) phase(i) *= (*weights)(first + i);
    }
    const CMatrix a = blocks.middleCols(first, count) * phase.asDiagonal();
    const CMatrix b = blocks.middleCols(first - r, count);
    return (a * b.transpose()) / double(n);
}

}  // namespace

CMatrix estimate_cccm(const CMatrix& blocks, double alpha, int lag) {
    return weighted_cccm(blocks, alpha, lag, nullptr);
}

double CycleSpectrum::at(double a) const {
    const std::size_t len = value.size();
    const double step = 1.0 / double(len);
    const double pos = (wrap_half(a) + 0.5) / step;
    const double fl = std::floor(pos);
    const std::size_t i0 = std::size_t(fl) % len;
    const std::size_t i1 = (i0 + 1) % len;
    const double t = pos - fl;
    return (1.0 - t) * value[i0] + t * value[i1];
}

namespace {

CycleSpectrum spectrum_impl(const std::vector<CMatrix>& pre_blocks, int oversample, bool taper) {
    if (pre_blocks.empty()) throw std::invalid_argument("cycle spectrum: no antennas");
    const int n = int(pre_blocks.front().cols());
    const int p = int(pre_blocks.front().rows());
    if (n < 2) throw std::invalid_argument("cycle spectrum: need at least two blocks");
    const int len = oversample * n;

    std::vector<double> w(n, 1.0);
    double wsum = n;
    if (taper) {
        wsum = 0.0;
        for (int i = 0; i < n; ++i) {
            const double s = std::sin(kPi * (i + 0.5) / n);
            w[i] = s * s;
            wsum += w[i];
        }
    }
    const double scale = 1.0 / (wsum * wsum);

    detail::ForwardFft fft(len);
    std::vector<double> acc(len, 0.0);
    cd* in = fft.in();
    std::fill(in, in + len, cd(0.0));

    auto accumulate = [&](double factor) {
        fft.execute();
        const cd* out = fft.out();
        for (int k = 0; k < len; ++k) acc[k] += factor * std::norm(out[k]);
    };

    for (const CMatrix& y : pre_blocks) {
        const CMatrix yt = y.transpose();  // blocks along rows, contiguous per sample index
        for (int a = 0; a < p; ++a) {
            const cd* ya = yt.col(a).data();
            for (int b = a; b < p; ++b) {
                const cd* yb = yt.col(b).data();
                for (int i = 0; i < n; ++i) in[i] = w[i] * ya[i] * yb[i];
                accumulate(a == b ? 1.0 : 2.0);
            }
            // lag 1; lag -1 gives the same magnitudes with the roles of a and b swapped
            for (int b = 0; b < p; ++b) {
                const cd* yb = yt.col(b).data();
                in[0] = 0.0;
                for (int i = 1; i < n; ++i) in[i] = w[i] * ya[i] * yb[i - 1];
                accumulate(2.0);
            }
        }
    }

    CycleSpectrum s;
    s.blocks = n;
    s.alpha.resize(len);
    s.value.resize(len);
    for (int i = 0; i < len; ++i) {
        const int k = (i + len / 2) % len;  // FFT bin of alpha = (i - len/2) / len
        s.alpha[i] = double(i - len / 2) / len;
        s.value[i] = scale * acc[k];
    }
    return s;
}

}  // namespace

CycleSpectrum cycle_spectrum(const std::vector<CMatrix>& pre_blocks, int oversample) {
    return spectrum_impl(pre_blocks, oversample, false);
}

CycleSpectrum tapered_cycle_spectrum(const std::vector<CMatrix>& pre_blocks, int oversample) {
    return spectrum_impl(pre_blocks, oversample, true);
}

namespace {

// Median and MAD-based spread of the spectrum floor.
std::pair<double, double> floor_level(const CycleSpectrum& spectrum) {
    std::vector<double> v = spectrum.value;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    const double median = v[mid];
    for (double& x : v) x = std::abs(x - median);
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    return {median, 1.4826 * v[mid]};
}

}  // namespace

double peak_threshold(const CycleSpectrum& spectrum, double floor_sigmas, double min_relative) {
    const auto [median, sigma] = floor_level(spectrum);
    const double top = *std::max_element(spectrum.value.begin(), spectrum.value.end());
    return median + std::max(floor_sigmas * sigma, min_relative * (top - median));
}

std::vector<SpectralPeak> find_peaks(const CycleSpectrum& spectrum) {
    const std::size_t len = spectrum.value.size();
    const double floor = peak_threshold(spectrum);
    const double step = 1.0 / double(len);

    std::vector<SpectralPeak> peaks;
    for (std::size_t i = 0; i < len; ++i) {
        const double v = spectrum.value[i];
        const double l = spectrum.value[(i + len - 1) % len];
        const double r = spectrum.value[(i + 1) % len];
        if (!(v > l && v >= r && v > floor)) continue;
        double loc = spectrum.alpha[i];
        double height = v;
        if (l > 0.0 && r > 0.0) {
            const double yl = std::log(l), y0 = std::log(v), yr = std::log(r);
            const double den = yl - 2.0 * y0 + yr;
            if (den < 0.0) {
                const double d = 0.5 * (yl - yr) / den;
                loc += d * step;
                height = std::exp(y0 - 0.25 * (yl - yr) * d);
            }
        }
        peaks.push_back({wrap_half(loc), height});
    }
    std::sort(peaks.begin(), peaks.end(), [](const SpectralPeak& a, const SpectralPeak& b) { return a.height > b.height; });
    return peaks;
}

DopplerResult resolve_dopplers(const std::vector<SpectralPeak>& peaks, const CycleSpectrum& spectrum) {
    DopplerResult res;
    res.peaks = peaks;
    if (peaks.empty()) return res;
    const double tol = 2.0 / spectrum.blocks;
    const std::size_t top = std::min<std::size_t>(peaks.size(), 5);

    // three peaks with the middle one halfway between the outer ones
    double best = -1.0;
    for (std::size_t a = 0; a < top; ++a)
        for (std::size_t b = 0; b < top; ++b)
            for (std::size_t c = 0; c < top; ++c) {
                const double la = peaks[a].location, lb = peaks[b].location, lc = peaks[c].location;
                if (!(la < lb && lb < lc)) continue;
                if (lc - la < 2.0 * tol) continue;
                if (std::abs(lb - 0.5 * (la + lc)) > tol) continue;
                const double score = peaks[a].height + peaks[b].height + peaks[c].height;
                if (score > best) {
                    best = score;
                    res.doppler = {0.5 * la, 0.5 * lc};
                }
            }
    if (best > 0.0) {
        res.ok = true;
        res.used_peaks = 3;
        return res;
    }

    if (top >= 2) {
        // One line is missing, usually the weaker self term, so by default the
        // tallest peak is the other self term and the second one the cross
        // term. Each other pairing predicts the missing line elsewhere; it wins
        // only if the spectrum there clearly exceeds the default's prediction.
        const double p = peaks[0].location, q = peaks[1].location;
        struct Hyp { double third; double nu0; double nu1; };
        std::vector<Hyp> hyps = {{2.0 * q - p, 0.5 * p, q - 0.5 * p}, {2.0 * p - q, 0.5 * q, p - 0.5 * q}};
        if (std::abs(p - q) > 4.0 * tol) hyps.push_back({0.5 * (p + q), 0.5 * p, 0.5 * q});
        res.doppler = {hyps[0].nu0, hyps[0].nu1};
        double best_val = spectrum.at(hyps[0].third) + 4.0 * floor_level(spectrum).second;
        for (const Hyp& h : hyps) {
            const double v = spectrum.at(h.third);
            if (v > best_val) {
                best_val = v;
                res.doppler = {h.nu0, h.nu1};
            }
        }
        res.ok = true;
        res.used_peaks = 2;
        return res;
    }

    res.doppler = {0.5 * peaks[0].location, 0.5 * peaks[0].location};
    res.ok = true;
    res.used_peaks = 1;
    return res;
}

DopplerResult doppler_scan(const std::vector<CMatrix>& pre_blocks) {
    const CycleSpectrum s = tapered_cycle_spectrum(pre_blocks);
    return resolve_dopplers(find_peaks(s), s);
}

CVector upsilon_diagonal(const OfdmSetup& setup) {
    const CMatrix& w = setup.fourier_p.idft();
    const CMatrix u = w.adjoint() * setup.au_precoder * setup.au_precoder.transpose() * w.conjugate();
    return u.diagonal();
}

CMatrix antenna_delay_statistics(const std::vector<CMatrix>& pre_blocks, double doppler, const OfdmSetup& setup) {
    const int p = setup.P;
    CVector dconj(p);
    for (int i = 0; i < p; ++i) dconj(i) = unit_phase(-doppler * i / p);
    const CMatrix& w = setup.fourier_p.idft();
    CMatrix out(p, Eigen::Index(pre_blocks.size()));
    for (std::size_t j = 0; j < pre_blocks.size(); ++j) {
        CMatrix phi = CMatrix::Zero(p, p);
        for (int r = -1; r <= 1; ++r) {
            const CMatrix rr = estimate_cccm(pre_blocks[j], 2.0 * doppler, r);
            phi += unit_phase(doppler * r) * (dconj.asDiagonal() * rr * dconj.asDiagonal());
        }
        out.col(Eigen::Index(j)) = (w.adjoint() * phi * w.conjugate()).diagonal();
    }
    return out;
}

CVector delay_statistic(const std::vector<CMatrix>& pre_blocks, double doppler, const OfdmSetup& setup) {
    return antenna_delay_statistics(pre_blocks, doppler, setup).rowwise().sum();
}

std::vector<double> delay_cost(const CVector& statistic, const OfdmSetup& setup, const std::vector<double>& betas) {
    const int p = setup.P;
    const CVector psi = setup.pulse.spectrum(p);
    const CVector ups = upsilon_diagonal(setup);
    std::vector<cd> coef(p / 2);
    for (int i = 0; i < p / 2; ++i) coef[i] = statistic(i) * std::conj(psi(i) * psi(i) * ups(i));
    std::vector<double> out;
    out.reserve(betas.size());
    for (double beta : betas) {
        cd acc = 0.0;
        for (int i = 0; i < p / 2; ++i) acc += coef[i] * std::exp(kJ * (4.0 * kPi * beta * i / p));
        out.push_back(std::abs(acc));
    }
    return out;
}

std::vector<double> delay_cost_exact(const CMatrix& statistics, const OfdmSetup& setup,
                                     const std::vector<double>& betas) {
    const int p = setup.P;
    const CVector ups = upsilon_diagonal(setup);
    // twiddle(ell, i) = exp(-j 2 pi ell i / P)
    CMatrix twiddle(setup.tap_count(), p);
    for (int ell = 0; ell < setup.tap_count(); ++ell)
        for (int i = 0; i < p; ++i) twiddle(ell, i) = unit_phase(-double((ell * i) % p) / p);
    std::vector<double> out;
    out.reserve(betas.size());
    RVector taps(setup.tap_count());
    for (double beta : betas) {
        for (int ell = 0; ell < setup.tap_count(); ++ell) taps(ell) = setup.pulse.sample(ell, beta);
        const CVector v = twiddle.transpose() * taps.cast<cd>();
        const CVector model = v.array().square() * ups.array();
        const double norm = model.norm();
        out.push_back(norm > 0.0 ? (statistics.adjoint() * model).norm() / norm : 0.0);
    }
    return out;
}

DelayResult delay_scan(const std::vector<CMatrix>& pre_blocks, double doppler, const OfdmSetup& setup,
                       double max_delay, int grid_points, DelayCostKind kind) {
    if (!(max_delay < 0.5 * setup.P)) throw std::invalid_argument("delay_scan: maximum delay must stay below half a block");
    if (grid_points < 3) throw std::invalid_argument("delay_scan: grid too small");
    const CMatrix stats = antenna_delay_statistics(pre_blocks, doppler, setup);
    std::vector<double> betas(grid_points);
    const double step = max_delay / (grid_points - 1);
    for (int i = 0; i < grid_points; ++i) betas[i] = i * step;
    const std::vector<double> cost =
        kind == DelayCostKind::Exact ? delay_cost_exact(stats, setup, betas)
                                     : delay_cost(stats.rowwise().sum(), setup, betas);
    const int best = int(std::max_element(cost.begin(), cost.end()) - cost.begin());
    DelayResult res;
    if (!(cost[best] > 0.0)) return res;
    double beta = betas[best];
    if (best > 0 && best < grid_points - 1) {
        const double l = cost[best - 1], c = cost[best], r = cost[best + 1];
        const double den = l - 2.0 * c + r;
        if (den < 0.0) beta += 0.5 * (l - r) / den * step;
    }
    res.ok = true;
    res.delay = std::clamp(beta, 0.0, max_delay);
    return res;
}

namespace {

// D_k T^(b)(tau) Omega_A for both blocks.
struct RayOperators {
    CMatrix a;
    CMatrix b;
};

RayOperators ray_operators(double delay, double doppler, const OfdmSetup& setup) {
    CVector d(setup.P);
    for (int i = 0; i < setup.P; ++i) d(i) = unit_phase(doppler * i / setup.P);
    RayOperators op;
    op.a = d.asDiagonal() * (toeplitz_from_pulse(setup.pulse, delay, 0, setup.P, setup.L_cp).cast<cd>() * setup.au_precoder);
    op.b = d.asDiagonal() * (toeplitz_from_pulse(setup.pulse, delay, 1, setup.P, setup.L_cp).cast<cd>() * setup.au_precoder);
    return op;
}

// Lags -1, 0, 1 of the ordered pair (k, l): A_k B_l^T, A_k A_l^T + B_k B_l^T, B_k A_l^T,
// each times exp(-j 2 pi nu_l r).
std::array<CMatrix, 3> ordered_pair(const RayOperators& k, const RayOperators& l, double nu_l) {
    return {unit_phase(nu_l) * (k.a * l.b.transpose()), k.a * l.a.transpose() + k.b * l.b.transpose(),
            unit_phase(-nu_l) * (k.b * l.a.transpose())};
}

std::array<CMatrix, 3> pair_model(const RayOperators& k, const RayOperators& l, double nu_k, double nu_l, bool same) {
    std::array<CMatrix, 3> m = ordered_pair(k, l, nu_l);
    if (!same) {
        const std::array<CMatrix, 3> swapped = ordered_pair(l, k, nu_k);
        for (int r = 0; r < 3; ++r) m[r] += swapped[r];
    }
    return m;
}

// sum_j |<R_j, M>|^2 / ||M||^2
double line_score(const std::vector<std::array<CMatrix, 3>>& measured, const std::array<CMatrix, 3>& model) {
    double norm = 0.0;
    for (const CMatrix& m : model) norm += m.squaredNorm();
    if (!(norm > 0.0)) return 0.0;
    double acc = 0.0;
    for (const auto& rj : measured) {
        cd dot = 0.0;
        for (int r = 0; r < 3; ++r) dot += (model[r].array().conjugate() * rj[r].array()).sum();
        acc += std::norm(dot);
    }
    return acc / norm;
}

}  // namespace

std::array<CMatrix, 3> cccm_model(const AuChannelState& state, const OfdmSetup& setup, int k, int l) {
    const RayOperators ok = ray_operators(state.delay[k], state.doppler[k], setup);
    const RayOperators ol = ray_operators(state.delay[l], state.doppler[l], setup);
    return pair_model(ok, ol, state.doppler[k], state.doppler[l], k == l);
}

std::array<double, 2> joint_delay_scan(const std::vector<CMatrix>& pre_blocks, const std::array<double, 2>& doppler,
                                       const OfdmSetup& setup, double max_delay, int grid_points) {
    if (grid_points < 3) throw std::invalid_argument("joint_delay_scan: grid too small");
    // measured[line][antenna][lag], lines 2 nu0, nu0 + nu1, 2 nu1
    std::array<std::vector<std::array<CMatrix, 3>>, 3> measured;
    const std::array<double, 3> alphas = {2.0 * doppler[0], doppler[0] + doppler[1], 2.0 * doppler[1]};
    for (int line = 0; line < 3; ++line)
        for (const CMatrix& y : pre_blocks)
            measured[line].push_back({estimate_cccm(y, alphas[line], -1), estimate_cccm(y, alphas[line], 0),
                                      estimate_cccm(y, alphas[line], 1)});

    auto total = [&](const RayOperators& o0, const RayOperators& o1) {
        return line_score(measured[0], pair_model(o0, o0, doppler[0], doppler[0], true)) +
               line_score(measured[1], pair_model(o0, o1, doppler[0], doppler[1], false)) +
               line_score(measured[2], pair_model(o1, o1, doppler[1], doppler[1], true));
    };

    auto search = [&](double lo0, double hi0, double lo1, double hi1, int n) {
        std::vector<RayOperators> ops0, ops1;
        std::vector<double> t0(n), t1(n);
        for (int i = 0; i < n; ++i) {
            t0[i] = lo0 + (hi0 - lo0) * i / (n - 1);
            t1[i] = lo1 + (hi1 - lo1) * i / (n - 1);
            ops0.push_back(ray_operators(t0[i], doppler[0], setup));
            ops1.push_back(ray_operators(t1[i], doppler[1], setup));
        }
        double best = -1.0;
        std::array<double, 2> arg{};
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                const double v = total(ops0[i], ops1[k]);
                if (v > best) {
                    best = v;
                    arg = {t0[i], t1[k]};
                }
            }
        return arg;
    };

    const std::array<double, 2> coarse = search(0.0, max_delay, 0.0, max_delay, grid_points);
    const double h = max_delay / (grid_points - 1);
    const std::array<double, 2> fine =
        search(std::max(0.0, coarse[0] - h), std::min(max_delay, coarse[0] + h), std::max(0.0, coarse[1] - h),
               std::min(max_delay, coarse[1] + h), 21);
    return fine;
}

std::array<CMatrix, 2> pilot_responses(const AuChannelState& state, const OfdmSetup& setup,
                                       const std::vector<int>& blocks, const CMatrix& pilots) {
    AuChannelState unit = state;
    unit.gain = {1.0, 1.0};
    const AuResponse resp(unit, setup);
    std::array<CMatrix, 2> out;
    for (int k = 0; k < 2; ++k) {
        out[k] = resp.ray_matrix(k) * pilots;
        for (std::size_t i = 0; i < blocks.size(); ++i)
            out[k].col(Eigen::Index(i)) *= unit_phase(state.doppler[k] * blocks[i]);
    }
    return out;
}

namespace {

// Quantities of the LS problem that do not depend on the steering phases.
struct GainStats {
    int J = 0;
    double y_energy = 0.0;
    std::array<std::vector<cd>, 2> corr;   // tr(Y_j P_k^H)
    std::array<double, 2> p_energy{};
    cd cross = 0.0;                        // tr(P_1 P_0^H)

    explicit GainStats(const GainProblem& prob) {
        J = int(prob.y.size());
        for (int k = 0; k < 2; ++k) p_energy[k] = prob.p[k].squaredNorm();
        cross = (prob.p[1].array() * prob.p[0].array().conjugate()).sum();
        for (int j = 0; j < J; ++j) {
            y_energy += prob.y[j].squaredNorm();
            for (int k = 0; k < 2; ++k) corr[k].push_back((prob.y[j].array() * prob.p[k].array().conjugate()).sum());
        }
    }

    LsCoefficients coefficients(cd eta0, cd eta1) const {
        LsCoefficients c;
        const std::array<cd, 2> eta = {eta0, eta1};
        for (int k = 0; k < 2; ++k) {
            cd acc = 0.0, pw = 1.0;
            const cd inv = 1.0 / eta[k];
            for (int j = 0; j < J; ++j, pw *= inv) acc += corr[k][j] * pw;
            c.c0[k] = acc;
            c.c1[k] = J * p_energy[k];
        }
        // sum_j (eta_kbar conj(eta_k))^j
        auto geo = [&](cd ratio) {
            cd acc = 0.0, pw = 1.0;
            for (int j = 0; j < J; ++j, pw *= ratio) acc += pw;
            return acc;
        };
        c.c2[0] = cross * geo(eta1 * std::conj(eta0));
        c.c2[1] = std::conj(cross) * geo(eta0 * std::conj(eta1));
        return c;
    }

    LsGains solve(cd eta0, cd eta1) const {
        const LsCoefficients c = coefficients(eta0, eta1);
        LsGains g;
        const cd det = c.c1[0] * c.c1[1] - c.c2[0] * c.c2[1];
        const double scale = c.c1[0] * c.c1[1];
        if (!(std::abs(det) > 1e-10 * scale)) {
            g.cost = std::numeric_limits<double>::infinity();
            return g;
        }
        g.gain[0] = (c.c0[0] * c.c1[1] - c.c2[0] * c.c0[1]) / det;
        g.gain[1] = (c.c1[0] * c.c0[1] - c.c0[0] * c.c2[1]) / det;
        g.cost = y_energy - (std::conj(g.gain[0]) * c.c0[0] + std::conj(g.gain[1]) * c.c0[1]).real();
        g.ok = true;
        return g;
    }

    double cost(double s0, double s1) const {
        return solve(std::exp(kJ * (kPi * s0)), std::exp(kJ * (kPi * s1))).cost;
    }
};

double wrap_cosine(double s) {
    s = std::fmod(s + 1.0, 2.0);
    if (s < 0.0) s += 2.0;
    return s - 1.0;
}

// Quasi-Newton descent with central-difference gradients and backtracking.
std::array<double, 2> bfgs_polish(const GainStats& st, std::array<double, 2> x) {
    const double h = 1e-6;
    auto f = [&](const std::array<double, 2>& v) { return st.cost(v[0], v[1]); };
    auto grad = [&](const std::array<double, 2>& v) {
        std::array<double, 2> g{};
        for (int i = 0; i < 2; ++i) {
            auto a = v, b = v;
            a[i] += h;
            b[i] -= h;
            g[i] = (f(a) - f(b)) / (2.0 * h);
        }
        return g;
    };
    Eigen::Matrix2d hinv = Eigen::Matrix2d::Identity();
    double fx = f(x);
    if (!std::isfinite(fx)) return x;
    auto g = grad(x);
    for (int it = 0; it < 60; ++it) {
        Eigen::Vector2d gv(g[0], g[1]);
        if (gv.norm() < 1e-12 * std::max(1.0, std::abs(fx))) break;
        Eigen::Vector2d d = -hinv * gv;
        if (d.dot(gv) >= 0.0) {
            hinv.setIdentity();
            d = -gv;
        }
        // keep a single step inside a fraction of the period
        const double dn = d.norm();
        if (dn > 0.1) d *= 0.1 / dn;
        double t = 1.0;
        std::array<double, 2> xn{};
        double fn = fx;
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
            xn = {x[0] + t * d(0), x[1] + t * d(1)};
            fn = f(xn);
            if (std::isfinite(fn) && fn <= fx + 1e-4 * t * d.dot(gv)) {
                moved = true;
                break;
            }
        }
        if (!moved) break;
        const auto gn = grad(xn);
        const Eigen::Vector2d s(xn[0] - x[0], xn[1] - x[1]);
        const Eigen::Vector2d yv(gn[0] - g[0], gn[1] - g[1]);
        const double sy = s.dot(yv);
        if (sy > 1e-18) {
            const double rho = 1.0 / sy;
            const Eigen::Matrix2d i2 = Eigen::Matrix2d::Identity();
            hinv = (i2 - rho * s * yv.transpose()) * hinv * (i2 - rho * yv * s.transpose()) + rho * s * s.transpose();
        }
        const double rel = std::abs(fx - fn) / std::max(1e-300, std::abs(fx));
        x = xn;
        fx = fn;
        g = gn;
        if (rel < 1e-15) break;
    }
    return x;
}

}  // namespace

LsCoefficients ls_coefficients(const GainProblem& problem, cd eta0, cd eta1) {
    return GainStats(problem).coefficients(eta0, eta1);
}

LsGains ls_gains(const GainProblem& problem, cd eta0, cd eta1) { return GainStats(problem).solve(eta0, eta1); }

GainAoaResult ls_gains_aoas(const GainProblem& problem, int grid) {
    if (grid < 4) throw std::invalid_argument("ls_gains_aoas: grid too small");
    const GainStats st(problem);
    std::vector<double> cost(std::size_t(grid) * grid);
    auto at = [&](int a, int b) -> double& { return cost[std::size_t(((a + grid) % grid)) * grid + ((b + grid) % grid)]; };
    auto coord = [&](int a) { return -1.0 + 2.0 * a / grid; };
    for (int a = 0; a < grid; ++a)
        for (int b = 0; b < grid; ++b) at(a, b) = st.cost(coord(a), coord(b));

    struct Start { double cost; int a; int b; };
    std::vector<Start> starts;
    for (int a = 0; a < grid; ++a)
        for (int b = 0; b < grid; ++b) {
            const double c = at(a, b);
            if (!std::isfinite(c)) continue;
            bool local_min = true;
            for (int da = -1; da <= 1 && local_min; ++da)
                for (int db = -1; db <= 1; ++db) {
                    if (da == 0 && db == 0) continue;
                    if (at(a + da, b + db) < c) {
                        local_min = false;
                        break;
                    }
                }
            if (local_min) starts.push_back({c, a, b});
        }
    std::sort(starts.begin(), starts.end(), [](const Start& x, const Start& y) { return x.cost < y.cost; });
    if (starts.size() > 4) starts.resize(4);

    GainAoaResult res;
    res.cost = std::numeric_limits<double>::infinity();
    for (const Start& s : starts) {
        auto x = bfgs_polish(st, {coord(s.a), coord(s.b)});
        x = {wrap_cosine(x[0]), wrap_cosine(x[1])};
        const cd e0 = std::exp(kJ * (kPi * x[0])), e1 = std::exp(kJ * (kPi * x[1]));
        const LsGains g = st.solve(e0, e1);
        if (g.ok && g.cost < res.cost) {
            res.ok = true;
            res.cost = g.cost;
            res.gain = g.gain;
            res.eta = {e0, e1};
            res.aoa = {std::asin(x[0]), std::asin(x[1])};
        }
    }
    return res;
}

AuEstimate estimate_au_channel(const ReceivedBlocks& rx, const PilotSchedule& pilots, const OfdmSetup& setup,
                               const AuEstimatorOptions& options) {
    AuEstimate est;
    est.state.power = 0.0;
    const DopplerResult dop = doppler_scan(rx.pre);
    est.peaks = dop.peaks;
    est.doppler_ok = dop.ok;
    if (dop.ok) est.state.doppler = dop.doppler;

    est.delay_ok = dop.ok;
    for (int k = 0; k < 2; ++k) {
        if (!dop.ok) break;
        const DelayResult d = delay_scan(rx.pre, est.state.doppler[k], setup, options.max_delay, options.delay_grid);
        est.delay_ok = est.delay_ok && d.ok;
        est.state.delay[k] = d.ok ? d.delay : 0.0;
    }
    if (dop.ok && options.joint_delay && dop.used_peaks >= 2 &&
        std::abs(dop.doppler[0] - dop.doppler[1]) > 2.0 / rx.blocks())
        est.state.delay = joint_delay_scan(rx.pre, est.state.doppler, setup, options.max_delay);

    GainProblem prob;
    for (int j = 0; j < rx.antennas(); ++j) {
        CMatrix y(setup.M, pilots.train_blocks());
        for (int i = 0; i < pilots.train_blocks(); ++i) y.col(i) = rx.post[j].col(pilots.blocks[i]);
        prob.y.push_back(std::move(y));
    }
    CMatrix full = CMatrix::Zero(setup.M, pilots.train_blocks());
    for (int i = 0; i < pilots.train_blocks(); ++i)
        for (int q = 0; q < pilots.pilot_count(); ++q) full(pilots.subcarriers[q], i) = pilots.values(q, i);
    prob.p = pilot_responses(est.state, setup, pilots.blocks, full);
    const GainAoaResult g = ls_gains_aoas(prob, options.aoa_grid);
    est.gains_ok = g.ok;
    if (g.ok) {
        est.state.gain = g.gain;
        est.state.aoa = g.aoa;
    }
    est.ok = est.doppler_ok && est.delay_ok && est.gains_ok;
    return est;
}

}  // namespace sgnoma
