#include "sgnoma/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sgnoma {

OfdmSetup::OfdmSetup(int subcarriers, int cp_length, int antennas, PulseModel pulse_model,
                     TxWindow au_win, TxWindow tu_win)
    : M(subcarriers), L_cp(cp_length), P(subcarriers + cp_length), J(antennas), pulse(pulse_model),
      cp(subcarriers, cp_length), fourier_m(subcarriers), fourier_p(subcarriers + cp_length),
      au_window(std::move(au_win)), tu_window(std::move(tu_win)) {
    if (J < 1) throw std::invalid_argument("OfdmSetup: need at least one antenna");
    if (L_cp >= M) throw std::invalid_argument("OfdmSetup: cyclic prefix must be shorter than the block");
    if (au_window.weights.size() == 0) au_window = TxWindow::rectangular(P);
    if (tu_window.weights.size() == 0) tu_window = TxWindow::rectangular(P);
    au_precoder = precoder(au_window, cp, fourier_m);
    tu_precoder = precoder(tu_window, cp, fourier_m);
    demod = fourier_m.dft() * cp.remove().cast<cd>();
}

CVector steering_vector(int antennas, double theta) {
    CVector a(antennas);
    const cd eta = steering_phase(theta);
    cd p = 1.0;
    for (int j = 0; j < antennas; ++j, p *= eta) a(j) = p;
    return a;
}

double exponential_delay(double u, double max_delay, double slope) {
    return -slope * std::log(1.0 - u * (1.0 - std::exp(-max_delay / slope)));
}

AuChannelState draw_au_channel(double rician_k, double max_doppler, double power, double max_delay,
                               double slope, Rng& rng) {
    if (!(rician_k > 0.0)) throw std::invalid_argument("draw_au_channel: Rician factor must be positive");
    AuChannelState s;
    s.rician_k = rician_k;
    s.power = power;
    const double los = std::isinf(rician_k) ? power : power * rician_k / (1.0 + rician_k);
    const double scatter = power - los;
    s.gain[0] = std::sqrt(los) * std::exp(kJ * rng.uniform(0.0, 2.0 * kPi));
    s.gain[1] = rng.complex_normal(scatter);
    for (int k = 0; k < 2; ++k) {
        s.delay[k] = exponential_delay(rng.uniform(), max_delay, slope);
        s.aod[k] = rng.uniform(0.0, kPi);
        s.doppler[k] = max_doppler * std::cos(s.aod[k]);
        s.aoa[k] = rng.uniform(-0.5 * kPi, 0.5 * kPi);
    }
    return s;
}

void refresh_taps(TuChannelState& tu, const OfdmSetup& setup) {
    tu.taps = CMatrix::Zero(setup.tap_count(), setup.J);
    for (std::size_t k = 0; k < tu.gain.size(); ++k) {
        if (!within_cyclic_prefix(setup.pulse, tu.delay[k], setup.L_cp))
            throw std::invalid_argument("terrestrial path exceeds the cyclic prefix");
        const CVector a = steering_vector(setup.J, tu.aoa[k]);
        for (int ell = 0; ell < setup.tap_count(); ++ell) {
            const double alpha = setup.pulse.sample(ell, tu.delay[k]);
            if (alpha == 0.0) continue;
            tu.taps.row(ell) += (tu.gain[k] * alpha) * a.transpose();
        }
    }
}

TuChannelState draw_tu_channel(int paths, double max_delay, double slope, double power,
                               const OfdmSetup& setup, Rng& rng) {
    if (paths < 1) throw std::invalid_argument("draw_tu_channel: need at least one path");
    if (!within_cyclic_prefix(setup.pulse, max_delay, setup.L_cp))
        throw std::invalid_argument("draw_tu_channel: maximum delay violates the cyclic-prefix condition");
    TuChannelState s;
    for (int k = 0; k < paths; ++k) {
        s.variance.push_back(power / paths);
        s.gain.push_back(rng.complex_normal(power / paths));
        s.delay.push_back(exponential_delay(rng.uniform(), max_delay, slope));
        s.aoa.push_back(rng.uniform(-0.5 * kPi, 0.5 * kPi));
    }
    refresh_taps(s, setup);
    return s;
}

void lock_to_min_delay(AuChannelState& au, TuChannelState& tu, const OfdmSetup& setup) {
    double lo = std::min(au.delay[0], au.delay[1]);
    for (double d : tu.delay) lo = std::min(lo, d);
    for (double& d : au.delay) d -= lo;
    for (double& d : tu.delay) d -= lo;
    refresh_taps(tu, setup);
}

AuResponse::AuResponse(const AuChannelState& state, const OfdmSetup& setup)
    : state_(state), M_(setup.M), J_(setup.J) {
    for (int k = 0; k < 2; ++k) {
        CVector d(setup.P);
        for (int p = 0; p < setup.P; ++p) d(p) = std::exp(kJ * (2.0 * kPi * state.doppler[k] * p / setup.P));
        for (int b = 0; b < 2; ++b) {
            const RMatrix t = toeplitz_from_pulse(setup.pulse, state.delay[k], b, setup.P, setup.L_cp);
            pre_[k][b] = d.asDiagonal() * (t.cast<cd>() * setup.au_precoder);
        }
        post_[k] = setup.demod * pre_[k][0];
        eta_[k] = steering_phase(state.aoa[k]);
    }
}

cd AuResponse::weight(int ray, int antenna, int n) const {
    return state_.gain[ray] * std::pow(eta_[ray], antenna) *
           std::exp(kJ * (2.0 * kPi * std::fmod(state_.doppler[ray] * n, 1.0)));
}

CMatrix AuResponse::effective(int antenna, int n) const {
    return weight(0, antenna, n) * post_[0] + weight(1, antenna, n) * post_[1];
}

CMatrix AuResponse::stacked(int n) const {
    CMatrix h(J_ * M_, M_);
    for (int j = 0; j < J_; ++j) h.middleRows(j * M_, M_) = effective(j, n);
    return h;
}

CVector tap_frequency_response(const CVector& taps, const OfdmSetup& setup) {
    if (taps.size() != setup.tap_count()) throw std::invalid_argument("tap vector length must be L_cp + 1");
    CVector padded = CVector::Zero(setup.M);
    padded.head(taps.size()) = taps;
    return std::sqrt(double(setup.M)) * (setup.fourier_m.dft() * padded);
}

TuResponse::TuResponse(const CMatrix& taps, const OfdmSetup& setup) : M_(setup.M) {
    if (taps.cols() != setup.J) throw std::invalid_argument("TuResponse: one tap column per antenna");
    for (int j = 0; j < setup.J; ++j) mu_.push_back(tap_frequency_response(taps.col(j), setup));
}

TuResponse::TuResponse(const TuChannelState& state, const OfdmSetup& setup) : TuResponse(state.taps, setup) {
    pre_.resize(setup.J);
    for (int j = 0; j < setup.J; ++j)
        for (int b = 0; b < 2; ++b) pre_[j][b] = CMatrix::Zero(setup.P, setup.M);
    for (std::size_t k = 0; k < state.gain.size(); ++k) {
        const CVector a = steering_vector(setup.J, state.aoa[k]);
        for (int b = 0; b < 2; ++b) {
            const CMatrix tw =
                toeplitz_from_pulse(setup.pulse, state.delay[k], b, setup.P, setup.L_cp).cast<cd>() *
                setup.tu_precoder;
            for (int j = 0; j < setup.J; ++j) pre_[j][b] += (state.gain[k] * a(j)) * tw;
        }
    }
}

CMatrix TuResponse::stacked() const {
    const int J = int(mu_.size());
    CMatrix m = CMatrix::Zero(J * M_, M_);
    for (int j = 0; j < J; ++j) m.block(j * M_, 0, M_, M_).diagonal() = mu_[j];
    return m;
}

CVector ReceivedBlocks::stacked(int n) const {
    const Eigen::Index m = post.front().rows();
    CVector y(m * antennas());
    for (int j = 0; j < antennas(); ++j) y.segment(j * m, m) = post[j].col(n);
    return y;
}

CVector ReceiveFrame::stacked() const {
    const Eigen::Index m = post.front().size();
    CVector y(m * post.size());
    for (std::size_t j = 0; j < post.size(); ++j) y.segment(j * m, m) = post[j];
    return y;
}

CVector ReceiveFrame::augmented() const {
    const CVector y = stacked();
    CVector out(2 * y.size());
    out << y, y.conjugate();
    return out;
}

ReceiveFrame synthesize_frame(int n, const CVector& s_au, const CVector& s_au_prev, const CVector& s_tu,
                              const CVector& s_tu_prev, const AuResponse& au, const TuResponse& tu,
                              double noise_variance, const OfdmSetup& setup, Rng& rng) {
    if (!tu.has_paths()) throw std::invalid_argument("synthesize_frame: terrestrial response lacks path operators");
    if (s_au.size() != setup.M || s_au_prev.size() != setup.M || s_tu.size() != setup.M ||
        s_tu_prev.size() != setup.M)
        throw std::invalid_argument("synthesize_frame: symbol vector size");
    ReceiveFrame f;
    f.n = n;
    f.noise_variance = noise_variance;
    CVector a0[2], a1[2];
    for (int k = 0; k < 2; ++k) {
        a0[k] = au.pre_dft(k, 0) * s_au;
        a1[k] = au.pre_dft(k, 1) * s_au_prev;
    }
    for (int j = 0; j < setup.J; ++j) {
        CVector y = tu.pre_dft(j, 0) * s_tu + tu.pre_dft(j, 1) * s_tu_prev;
        for (int k = 0; k < 2; ++k) y += au.weight(k, j, n) * (a0[k] + a1[k]);
        if (noise_variance > 0.0)
            for (int p = 0; p < setup.P; ++p) y(p) += rng.complex_normal(noise_variance);
        f.post.push_back(setup.demod * y);
        f.pre.push_back(std::move(y));
    }
    return f;
}

ReceivedBlocks synthesize_blocks(const TransmitBlocks& tx, const AuResponse& au, const TuResponse& tu,
                                 double noise_variance, const OfdmSetup& setup, Rng& rng) {
    if (!tu.has_paths()) throw std::invalid_argument("synthesize_blocks: terrestrial response lacks path operators");
    const int n_blocks = tx.blocks();
    if (tx.au.rows() != setup.M || tx.tu.rows() != setup.M || tx.tu.cols() != n_blocks)
        throw std::invalid_argument("synthesize_blocks: symbol matrix size");

    auto shifted = [&](const CMatrix& s, const CVector& prev) {
        CMatrix out(s.rows(), s.cols());
        out.col(0) = prev;
        out.rightCols(s.cols() - 1) = s.leftCols(s.cols() - 1);
        return out;
    };
    const CMatrix au_prev = shifted(tx.au, tx.au_prev);
    const CMatrix tu_prev = shifted(tx.tu, tx.tu_prev);

    std::array<CMatrix, 2> ray;
    for (int k = 0; k < 2; ++k) ray[k] = au.pre_dft(k, 0) * tx.au + au.pre_dft(k, 1) * au_prev;

    ReceivedBlocks out;
    out.noise_variance = noise_variance;
    for (int j = 0; j < setup.J; ++j) {
        CMatrix y = tu.pre_dft(j, 0) * tx.tu + tu.pre_dft(j, 1) * tu_prev;
        for (int k = 0; k < 2; ++k) {
            const cd base = au.weight(k, j, 0);
            const double nu = au.state().doppler[k];
            for (int n = 0; n < n_blocks; ++n) {
                const cd w = base * std::exp(kJ * (2.0 * kPi * std::fmod(nu * n, 1.0)));
                y.col(n) += w * ray[k].col(n);
            }
        }
        if (noise_variance > 0.0) {
            for (int n = 0; n < n_blocks; ++n)
                for (int p = 0; p < setup.P; ++p) y(p, n) += rng.complex_normal(noise_variance);
        }
        out.post.push_back(setup.demod * y);
        out.pre.push_back(std::move(y));
    }
    return out;
}

EffectiveMatrices effective_matrices(const AuResponse& au, const TuResponse& tu, int n) {
    EffectiveMatrices e;
    for (int j = 0; j < au.antennas(); ++j) {
        e.au.push_back(au.effective(j, n));
        e.tu.push_back(tu.diagonal(j));
    }
    return e;
}

}  // namespace sgnoma
