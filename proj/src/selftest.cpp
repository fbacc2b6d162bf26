#include "sgnoma/selftest.hpp"

#include "sgnoma/au_estimator.hpp"
#include "sgnoma/channel.hpp"
#include "sgnoma/detector.hpp"
#include "sgnoma/rng.hpp"
#include "sgnoma/waveform.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace sgnoma {

namespace {

CheckResult make(std::string name, double value, double limit, bool pass, std::string detail = {}) {
    return {std::move(name), value, limit, pass, std::move(detail)};
}

CMatrix random_matrix(int rows, int cols, Rng& rng) {
    CMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.complex_normal(1.0);
    return m;
}

OfdmSetup default_setup() { return OfdmSetup(16, 4, 4, PulseModel(PulseShape::Hann, 2)); }

}  // namespace

CheckResult check_cp_roundtrip() {
    const CpOperators cp(16, 4);
    const double r = (cp.remove() * cp.insert() - RMatrix::Identity(16, 16)).cwiseAbs().maxCoeff();
    return make("cp_roundtrip", r, 0.0, r == 0.0);
}

CheckResult check_circulant(std::uint64_t seed) {
    Rng rng(derive_seed({seed, 101}));
    const int p = 20;
    const FourierOperators w(p);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const CVector c = random_matrix(p, 1, rng);
        const CMatrix a = circulant(c);
        const CMatrix b = w.idft() * circulant_eigenvalues(c).asDiagonal() * w.dft();
        worst = std::max(worst, (a - b).norm() / a.norm());
    }
    return make("circulant_diagonalization", worst, 1e-10, worst < 1e-10);
}

CheckResult check_end_to_end(std::uint64_t seed) {
    Rng rng(derive_seed({seed, 102}));
    const OfdmSetup setup = default_setup();
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        AuChannelState au = draw_au_channel(std::pow(10.0, 0.6), 0.0288, 1.0, 3.0, 2.0, rng);
        TuChannelState tu = draw_tu_channel(2, 3.0, 2.0, 1.0, setup, rng);
        lock_to_min_delay(au, tu, setup);
        const AuResponse ar(au, setup);
        const TuResponse tr(tu, setup);
        const int n = rng.integer(0, 16383);
        const CVector sa = draw_symbols(Constellation::BPSK, setup.M, rng);
        const CVector sa_prev = draw_symbols(Constellation::BPSK, setup.M, rng);
        const CVector st = draw_symbols(Constellation::QPSK, setup.M, rng);
        const CVector st_prev = draw_symbols(Constellation::QPSK, setup.M, rng);
        const ReceiveFrame f = synthesize_frame(n, sa, sa_prev, st, st_prev, ar, tr, 0.0, setup, rng);
        const CVector y = f.stacked();
        const CVector model = ar.stacked(n) * sa + tr.stacked() * st;
        worst = std::max(worst, (y - model).norm() / y.norm());
    }
    return make("end_to_end_model", worst, 1e-9, worst < 1e-9);
}

CheckResult check_sdr(std::uint64_t seed) {
    Rng rng(derive_seed({seed, 103}));
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        const CMatrix h = random_matrix(128, 32, rng) * 0.3;
        const CMatrix k = random_matrix(128, 16, rng) * 0.3;
        const double s2 = std::pow(10.0, -rng.uniform(0.0, 2.0));
        const CMatrix r = s2 * CMatrix::Identity(128, 128) + k * k.adjoint();
        const RVector a = sdr_direct(h, r);
        const RVector b = sdr_per_symbol(h, r);
        worst = std::max(worst, ((a - b).cwiseAbs().array() / a.cwiseAbs().array()).maxCoeff());
    }
    return make("sdr_qr_vs_direct", worst, 1e-8, worst < 1e-8);
}

CheckResult check_cccm_decay(std::uint64_t seed) {
    const OfdmSetup setup = default_setup();
    const int trials = 8;
    const double alpha = 0.1234;
    std::vector<double> lx, ly;
    std::ostringstream detail;
    for (int e = 8; e <= 14; ++e) {
        const int n = 1 << e;
        double acc = 0.0;
        for (int t = 0; t < trials; ++t) {
            // same channels at every N, fresh symbols and noise
            Rng channel_rng(derive_seed({seed, 104, std::uint64_t(t)}));
            Rng rng(derive_seed({seed, 104, std::uint64_t(e), std::uint64_t(t)}));
            AuChannelState au;  // silent aerial user
            TuChannelState tu = draw_tu_channel(2, 3.0, 2.0, 1.0, setup, channel_rng);
            lock_to_min_delay(au, tu, setup);
            TransmitBlocks tx;
            tx.au = CMatrix::Zero(setup.M, n);
            tx.tu = draw_symbols(Constellation::QPSK, setup.M * n, rng).reshaped(setup.M, n);
            tx.au_prev = CVector::Zero(setup.M);
            tx.tu_prev = draw_symbols(Constellation::QPSK, setup.M, rng);
            const ReceivedBlocks rx =
                synthesize_blocks(tx, AuResponse(au, setup), TuResponse(tu, setup), 0.1, setup, rng);
            for (const CMatrix& pre : rx.pre) acc += estimate_cccm(pre, alpha, 0).squaredNorm();
        }
        const double rms = std::sqrt(acc / (trials * setup.J));
        lx.push_back(std::log10(double(n)));
        ly.push_back(std::log10(rms));
        detail << "N=" << n << " rms=" << rms << "; ";
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / double(lx.size());
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / double(ly.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    const double slope = sxy / sxx;
    return make("cccm_decay_slope", slope, -0.5, std::abs(slope + 0.5) <= 0.1, detail.str());
}

CheckResult check_small_instance(std::uint64_t seed) {
    Rng rng(derive_seed({seed, 105}));
    const OfdmSetup setup(2, 1, 2, PulseModel::delta());
    AuChannelState au;
    au.gain = {std::sqrt(0.8) * std::exp(kJ * rng.uniform(0.0, 2.0 * kPi)), rng.complex_normal(0.2)};
    au.delay = {0.0, 1.0};
    au.doppler = {rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03)};
    au.aoa = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    TuChannelState tu;
    for (int k = 0; k < 2; ++k) {
        tu.gain.push_back(rng.complex_normal(0.5));
        tu.delay.push_back(double(k));
        tu.aoa.push_back(rng.uniform(-1.5, 1.5));
        tu.variance.push_back(0.5);
    }
    refresh_taps(tu, setup);
    const AuResponse ar(au, setup);
    const TuResponse tr(tu, setup);
    const CMatrix delta = delta_matrix(Constellation::BPSK, 0, 2);
    const cd qpsk[4] = {cd(1, 1) / std::sqrt(2.0), cd(-1, 1) / std::sqrt(2.0), cd(-1, -1) / std::sqrt(2.0),
                        cd(1, -1) / std::sqrt(2.0)};
    const int n = 3;
    int errors = 0;
    int combos = 0;
    for (int a = 0; a < 4; ++a) {
        for (int t = 0; t < 16; ++t) {
            CVector sa(2), st(2);
            sa << ((a & 1) ? -1.0 : 1.0), ((a & 2) ? -1.0 : 1.0);
            st << qpsk[t & 3], qpsk[t >> 2];
            const ReceiveFrame f = synthesize_frame(n, sa, sa, st, st, ar, tr, 0.0, setup, rng);
            const DetectionReport d =
                detect(DetectorKind::WlMmseSic, f.stacked(), ar.stacked(n), tr.stacked(), delta, 1e-9);
            for (int m = 0; m < 2; ++m) {
                errors += std::abs(d.au(m) - sa(m)) > 1e-6;
                errors += std::abs(d.tu(m) - st(m)) > 1e-6;
            }
            ++combos;
        }
    }
    return make("small_instance_oracle", errors, 0.0, errors == 0 && combos == 64,
                std::to_string(combos) + " combinations");
}

std::vector<CheckResult> run_selftest(std::uint64_t seed) {
    return {check_cp_roundtrip(), check_circulant(seed),   check_end_to_end(seed),
            check_sdr(seed),      check_cccm_decay(seed), check_small_instance(seed)};
}

}  // namespace sgnoma
