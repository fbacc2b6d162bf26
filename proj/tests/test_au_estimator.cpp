#include "oracles.hpp"
#include "sgnoma/au_estimator.hpp"

#include <doctest.h>

using namespace sgnoma;

namespace {

const OfdmSetup& paper_setup() {
    static const OfdmSetup s(16, 4, 4, PulseModel(PulseShape::Hann, 2));
    return s;
}

ReceivedBlocks simulate(const AuChannelState& au, const TuChannelState& tu, int n_blocks, double s2, Rng& rng,
                        const OfdmSetup& setup, const PilotSchedule* pilots = nullptr, CMatrix* au_symbols = nullptr) {
    TransmitBlocks tx;
    tx.au = draw_symbols(Constellation::BPSK, setup.M * n_blocks, rng).reshaped(setup.M, n_blocks);
    tx.tu = draw_symbols(Constellation::QPSK, setup.M * n_blocks, rng).reshaped(setup.M, n_blocks);
    tx.au_prev = draw_symbols(Constellation::BPSK, setup.M, rng);
    tx.tu_prev = draw_symbols(Constellation::QPSK, setup.M, rng);
    if (pilots) inject_pilots(*pilots, tx.au);
    if (au_symbols) *au_symbols = tx.au;
    return synthesize_blocks(tx, AuResponse(au, setup), TuResponse(tu, setup), s2, setup, rng);
}

TuChannelState silent_tu(const OfdmSetup& setup) {
    TuChannelState tu;
    refresh_taps(tu, setup);
    return tu;
}

AuChannelState two_rays(double nu0, double nu1, double tau0, double tau1) {
    AuChannelState au;
    au.gain = {cd(0.8, 0.3), cd(-0.3, 0.35)};
    au.doppler = {nu0, nu1};
    au.delay = {tau0, tau1};
    au.aoa = {0.3, -0.7};
    return au;
}

}  // namespace

TEST_CASE("CCCM of a rotating constant vector follows the geometric sum") {
    const int n = 512, p = 5;
    Rng rng(51);
    const CVector c = oracle::random_matrix(p, 1, rng);
    const double nu = 0.0137;
    CMatrix y(p, n);
    for (int i = 0; i < n; ++i) y.col(i) = std::polar(1.0, 2.0 * kPi * nu * i) * c;
    for (double alpha : {2.0 * nu, 2.0 * nu + 0.5 / n, 0.1}) {
        for (int r : {0, 1}) {
            cd sum = 0.0;
            for (int i = r; i < n; ++i)
                sum += std::polar(1.0, 2.0 * kPi * (nu * i + nu * (i - r) - alpha * i));
            const CMatrix expect = (sum / double(n)) * (c * c.transpose());
            CHECK(oracle::max_abs(estimate_cccm(y, alpha, r) - expect) < 1e-12);
        }
    }
}

TEST_CASE("CCCM of white noise shrinks with the averaging length") {
    Rng rng(52);
    const int n = 1 << 14, p = 20;
    const double s2 = 0.5;
    CMatrix w(p, n);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.complex_normal(s2);
    CHECK(estimate_cccm(w, 0.0, 0).norm() < 3.0 * s2 * p / std::sqrt(double(n)));
}

TEST_CASE("CCCM of a terrestrial-only signal vanishes") {
    Rng rng(53);
    const OfdmSetup& setup = paper_setup();
    AuChannelState au;
    const TuChannelState tu = draw_tu_channel(2, 3.0, 2.0, 1.0, setup, rng);
    const ReceivedBlocks rx = simulate(au, tu, 1 << 13, 0.0, rng, setup);
    double energy = 0.0;
    for (int i = 0; i < rx.blocks(); ++i) energy += rx.pre[0].col(i).squaredNorm();
    energy /= rx.blocks();
    for (double alpha : {0.0, 0.02, -0.31})
        CHECK(estimate_cccm(rx.pre[0], alpha, 0).norm() < 0.05 * energy);
}

TEST_CASE("exact and FFT cycle spectra agree with direct CCCM norms") {
    Rng rng(54);
    const OfdmSetup setup(8, 2, 2, PulseModel(PulseShape::Hann, 2));
    const ReceivedBlocks rx = simulate(two_rays(0.01, -0.02, 0.3, 0.9), silent_tu(setup), 64, 0.1, rng, setup);
    const CycleSpectrum s = cycle_spectrum(rx.pre);
    CHECK(s.blocks == 64);
    CHECK(s.alpha.size() == 256);
    for (std::size_t i = 0; i < s.alpha.size(); i += 37) {
        double direct = 0.0;
        for (const CMatrix& pre : rx.pre)
            for (int r = -1; r <= 1; ++r) direct += estimate_cccm(pre, s.alpha[i], r).squaredNorm();
        CHECK(s.value[i] == doctest::Approx(direct).epsilon(1e-9));
    }
}

TEST_CASE("Doppler pair from a noiseless aerial-only signal") {
    Rng rng(55);
    const OfdmSetup& setup = paper_setup();
    const int n = 1 << 12;
    const ReceivedBlocks rx = simulate(two_rays(0.01, -0.02, 0.4, 1.3), silent_tu(setup), n, 0.0, rng, setup);
    const DopplerResult d = doppler_scan(rx.pre);
    REQUIRE(d.ok);
    CHECK(d.used_peaks == 3);
    std::vector<double> locs;
    for (const auto& p : d.peaks) locs.push_back(p.location);
    for (double expect : {0.02, -0.01, -0.04}) {
        double best = 1.0;
        for (double l : locs) best = std::min(best, std::abs(l - expect));
        CHECK(best < 1.0 / (4.0 * n));
    }
    const double lo = std::min(d.doppler[0], d.doppler[1]), hi = std::max(d.doppler[0], d.doppler[1]);
    CHECK(std::abs(lo + 0.02) < 1.0 / (8.0 * n));
    CHECK(std::abs(hi - 0.01) < 1.0 / (8.0 * n));
}

TEST_CASE("coincident Dopplers give a single line") {
    Rng rng(56);
    const OfdmSetup& setup = paper_setup();
    const int n = 1 << 11;
    const ReceivedBlocks rx = simulate(two_rays(0.015, 0.015, 0.2, 1.0), silent_tu(setup), n, 0.01, rng, setup);
    const DopplerResult d = doppler_scan(rx.pre);
    REQUIRE(d.ok);
    CHECK(std::abs(d.doppler[0] - 0.015) < 1.0 / (8.0 * n));
    CHECK(std::abs(d.doppler[1] - 0.015) < 1.0 / (8.0 * n));
}

TEST_CASE("two found lines are paired by the energy at the predicted third line") {
    // Cross line tallest, self line of ray 0 second, self line of ray 1 faint.
    const double nu0 = 0.0087, nu1 = 0.0137;
    auto spectrum = [&](double faint) {
        CycleSpectrum s;
        s.blocks = 1024;
        const int len = 4 * s.blocks;
        for (int i = 0; i < len; ++i) {
            const double a = -0.5 + double(i) / len;
            double v = i % 2 ? 1.1 : 0.9;
            if (std::abs(a - (nu0 + nu1)) < 1.5 / len) v = 100.0;
            if (std::abs(a - 2.0 * nu0) < 1.5 / len) v = 80.0;
            if (std::abs(a - 2.0 * nu1) < 1.5 / len) v = faint;
            s.alpha.push_back(a);
            s.value.push_back(v);
        }
        return s;
    };
    const std::vector<SpectralPeak> peaks = {{nu0 + nu1, 100.0}, {2.0 * nu0, 80.0}};

    const DopplerResult d = resolve_dopplers(peaks, spectrum(3.0));
    REQUIRE(d.ok);
    CHECK(d.used_peaks == 2);
    CHECK(d.doppler[0] == doctest::Approx(nu0).epsilon(1e-9));
    CHECK(d.doppler[1] == doctest::Approx(nu1).epsilon(1e-9));

    // A line within the floor spread does not overturn the tallest-is-self default.
    const DopplerResult m = resolve_dopplers(peaks, spectrum(1.2));
    CHECK(m.doppler[0] == doctest::Approx(0.5 * (nu0 + nu1)).epsilon(1e-9));
}

TEST_CASE("pure noise yields no Doppler estimate") {
    Rng rng(57);
    std::vector<CMatrix> pre(4, CMatrix(20, 2048));
    for (CMatrix& m : pre)
        for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.complex_normal(1.0);
    const DopplerResult d = doppler_scan(pre);
    CHECK_FALSE(d.ok);
    CHECK(d.peaks.empty());
}

TEST_CASE("delay scan on noiseless single-ray data") {
    Rng rng(58);
    const OfdmSetup& setup = paper_setup();
    for (double tau : {0.0, 0.9, 1.7, 2.6}) {
        AuChannelState au = two_rays(0.012, 0.0, tau, 0.0);
        au.gain[1] = 0.0;
        const ReceivedBlocks rx = simulate(au, silent_tu(setup), 1 << 11, 0.0, rng, setup);
        const DelayResult d = delay_scan(rx.pre, 0.012, setup, 3.0, 1000);
        REQUIRE(d.ok);
        CHECK(std::abs(d.delay - tau) <= 1.0 / 50.0);
    }
}

TEST_CASE("approximate delay cost repeats every half block") {
    Rng rng(59);
    const OfdmSetup& setup = paper_setup();
    AuChannelState au = two_rays(0.012, 0.0, 1.2, 0.0);
    au.gain[1] = 0.0;
    const ReceivedBlocks rx = simulate(au, silent_tu(setup), 1 << 10, 0.01, rng, setup);
    const CVector stat = delay_statistic(rx.pre, 0.012, setup);
    for (double b : {0.3, 1.2, 2.5}) {
        const std::vector<double> c = delay_cost(stat, setup, {b, b + 0.5 * setup.P});
        CHECK(c[0] == doctest::Approx(c[1]).epsilon(1e-9));
    }
    const std::vector<double> a = delay_cost_exact(antenna_delay_statistics(rx.pre, 0.012, setup), setup, {1.2});
    CHECK(a[0] > 0.0);
}

TEST_CASE("joint delay fit recovers a faint second ray") {
    Rng rng(60);
    const OfdmSetup& setup = paper_setup();
    AuChannelState au = two_rays(0.018, -0.011, 0.35, 2.2);
    au.gain = {0.9, cd(0.05, 0.04)};
    const ReceivedBlocks rx = simulate(au, silent_tu(setup), 1 << 13, 0.01, rng, setup);
    const auto tau = joint_delay_scan(rx.pre, au.doppler, setup, 3.0);
    CHECK(std::abs(tau[0] - 0.35) < 0.03);
    CHECK(std::abs(tau[1] - 2.2) < 0.1);
}

TEST_CASE("least squares gains with exact parameters") {
    Rng rng(61);
    const OfdmSetup& setup = paper_setup();
    const AuChannelState au = two_rays(0.01, -0.02, 0.4, 1.3);
    const int n = 256;
    const PilotSchedule pilots = make_pilot_schedule(User::AU, Constellation::BPSK, 16, 16, 20, n, 0.0, 9);
    const ReceivedBlocks rx = simulate(au, silent_tu(setup), n, 0.0, rng, setup, &pilots);
    GainProblem prob;
    for (int j = 0; j < 4; ++j) {
        CMatrix y(16, 20);
        for (int i = 0; i < 20; ++i) y.col(i) = rx.post[j].col(pilots.blocks[i]);
        prob.y.push_back(y);
    }
    prob.p = pilot_responses(au, setup, pilots.blocks, pilots.values);
    const LsGains g = ls_gains(prob, steering_phase(au.aoa[0]), steering_phase(au.aoa[1]));
    REQUIRE(g.ok);
    CHECK(std::abs(g.gain[0] - au.gain[0]) < 1e-8);
    CHECK(std::abs(g.gain[1] - au.gain[1]) < 1e-8);
    CHECK(std::abs(g.cost) < 1e-12 * prob.y[0].squaredNorm() * 4 + 1e-12);

    const GainAoaResult full = ls_gains_aoas(prob);
    REQUIRE(full.ok);
    const double err0 = std::abs(full.gain[0] - au.gain[0]) + std::abs(full.gain[1] - au.gain[1]);
    const double err1 = std::abs(full.gain[1] - au.gain[0]) + std::abs(full.gain[0] - au.gain[1]);
    CHECK(std::min(err0, err1) < 1e-6);
}

TEST_CASE("single-ray gain reduces to the matched filter") {
    Rng rng(62);
    GainProblem prob;
    prob.p[0] = oracle::random_matrix(16, 5, rng);
    prob.p[1] = CMatrix::Zero(16, 5);
    const cd eta = steering_phase(0.4);
    for (int j = 0; j < 4; ++j) prob.y.push_back(oracle::random_matrix(16, 5, rng));
    const LsCoefficients c = ls_coefficients(prob, eta, 1.0);
    cd mf = 0.0;
    for (int j = 0; j < 4; ++j) mf += (prob.y[j] * prob.p[0].adjoint()).trace() * std::pow(eta, -j);
    mf /= 4.0 * prob.p[0].squaredNorm();
    CHECK(std::abs(c.c0[0] / c.c1[0] - mf) < 1e-12);
    CHECK_FALSE(ls_gains(prob, eta, 1.0).ok);
}

TEST_CASE("full aerial estimation chain") {
    Rng rng(63);
    const OfdmSetup& setup = paper_setup();
    AuChannelState au = draw_au_channel(std::pow(10.0, 0.6), 0.0288, 1.0, 3.0, 2.0, rng);
    au.doppler = {0.021, -0.008};
    TuChannelState tu = draw_tu_channel(2, 3.0, 2.0, 0.5, setup, rng);
    lock_to_min_delay(au, tu, setup);
    const int n = 1 << 13;
    const PilotSchedule pilots = make_pilot_schedule(User::AU, Constellation::BPSK, 16, 16, 20, n, 0.0, 10);
    const ReceivedBlocks rx = simulate(au, tu, n, 0.1, rng, setup, &pilots);
    const AuEstimate est = estimate_au_channel(rx, pilots, setup, {});
    REQUIRE(est.ok);
    const int swap = std::abs(est.state.doppler[0] - au.doppler[0]) > std::abs(est.state.doppler[1] - au.doppler[0]);
    for (int k = 0; k < 2; ++k) {
        const int e = swap ? 1 - k : k;
        CHECK(std::abs(est.state.doppler[e] - au.doppler[k]) < 1e-4);
        CHECK(std::abs(est.state.delay[e] - au.delay[k]) < 0.1);
        CHECK(std::abs(est.state.gain[e] - au.gain[k]) < 0.1);
    }
}
