#include "oracles.hpp"
#include "sgnoma/channel.hpp"

#include <doctest.h>

using namespace sgnoma;

namespace {

// Received chip r of block n at antenna j by direct convolution of the chip
// streams with the delayed pulse, Doppler rotation included.
CVector scalar_receive(int n, int j, const CVector& sa, const CVector& sa_prev, const CVector& st,
                       const CVector& st_prev, const AuChannelState& au, const TuChannelState& tu,
                       const OfdmSetup& setup) {
    const int p_len = setup.P;
    const CVector ua = oracle::chips(sa, setup.L_cp), ua_prev = oracle::chips(sa_prev, setup.L_cp);
    const CVector ut = oracle::chips(st, setup.L_cp), ut_prev = oracle::chips(st_prev, setup.L_cp);
    auto chip = [&](const CVector& cur, const CVector& prev, int i) { return i >= 0 ? cur(i) : prev(i + p_len); };
    CVector y = CVector::Zero(p_len);
    for (int p = 0; p < p_len; ++p) {
        for (int k = 0; k < 2; ++k) {
            const cd eta = std::exp(kJ * (kPi * std::sin(au.aoa[k])));
            const cd rot = std::exp(kJ * (2.0 * kPi * au.doppler[k] * (double(n) * p_len + p) / p_len));
            cd acc = 0.0;
            for (int l = 0; l <= p_len; ++l) acc += setup.pulse(l - au.delay[k]) * chip(ua, ua_prev, p - l);
            y(p) += au.gain[k] * std::pow(eta, j) * rot * acc;
        }
        for (std::size_t k = 0; k < tu.gain.size(); ++k) {
            const cd eta = std::exp(kJ * (kPi * std::sin(tu.aoa[k])));
            cd acc = 0.0;
            for (int l = 0; l <= p_len; ++l) acc += setup.pulse(l - tu.delay[k]) * chip(ut, ut_prev, p - l);
            y(p) += tu.gain[k] * std::pow(eta, j) * acc;
        }
    }
    return y;
}

}  // namespace

TEST_CASE("truncated exponential delay draw") {
    CHECK(exponential_delay(0.0, 3.0, 2.0) == doctest::Approx(0.0));
    CHECK(exponential_delay(1.0, 3.0, 2.0) == doctest::Approx(3.0));
    const double expected = -2.0 * std::log(1.0 - 0.5 * (1.0 - std::exp(-1.5)));
    CHECK(exponential_delay(0.5, 3.0, 2.0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.98347).epsilon(1e-5));
}

TEST_CASE("aerial channel draw") {
    Rng rng(31);
    const double k = std::pow(10.0, 0.6);
    double scatter = 0.0;
    const int trials = 20000;
    for (int t = 0; t < trials; ++t) {
        const AuChannelState s = draw_au_channel(k, 0.0288, 1.0, 3.0, 2.0, rng);
        CHECK(std::norm(s.gain[0]) == doctest::Approx(k / (1.0 + k)).epsilon(1e-12));
        scatter += std::norm(s.gain[1]);
        for (int r = 0; r < 2; ++r) {
            CHECK(s.doppler[r] == doctest::Approx(0.0288 * std::cos(s.aod[r])));
            CHECK(s.delay[r] >= 0.0);
            CHECK(s.delay[r] <= 3.0);
        }
    }
    CHECK(k / (1.0 + k) == doctest::Approx(0.7992).epsilon(1e-4));
    CHECK(scatter / trials == doctest::Approx(1.0 / (1.0 + k)).epsilon(0.03));
    const AuChannelState los = draw_au_channel(std::numeric_limits<double>::infinity(), 0.0288, 1.0, 3.0, 2.0, rng);
    CHECK(std::abs(los.gain[1]) == 0.0);
    CHECK_THROWS(draw_au_channel(0.0, 0.0288, 1.0, 3.0, 2.0, rng));
}

TEST_CASE("terrestrial channel draw") {
    Rng rng(32);
    const OfdmSetup setup(16, 4, 4, PulseModel(PulseShape::Hann, 2));
    const TuChannelState s = draw_tu_channel(2, 3.0, 2.0, 0.5, setup, rng);
    CHECK(s.gain.size() == 2);
    CHECK(s.variance[0] == doctest::Approx(0.25));
    CHECK(s.taps.rows() == 5);
    CHECK(s.taps.cols() == 4);
    CHECK_THROWS(draw_tu_channel(2, 3.5, 2.0, 0.5, setup, rng));
}

TEST_CASE("zero input gives a zero frame") {
    Rng rng(33);
    const OfdmSetup setup(16, 4, 2, PulseModel(PulseShape::Hann, 2));
    const AuChannelState au = draw_au_channel(4.0, 0.02, 1.0, 3.0, 2.0, rng);
    const TuChannelState tu = draw_tu_channel(2, 3.0, 2.0, 1.0, setup, rng);
    const CVector z = CVector::Zero(16);
    const ReceiveFrame f = synthesize_frame(5, z, z, z, z, AuResponse(au, setup), TuResponse(tu, setup), 0.0, setup, rng);
    CHECK(f.stacked().norm() == 0.0);
    CHECK(f.pre[0].norm() == 0.0);
}

TEST_CASE("two coincident rays double the transmitted block") {
    Rng rng(34);
    const OfdmSetup setup(8, 2, 1, PulseModel::delta());
    AuChannelState au;
    au.gain = {1.0, 1.0};
    TuChannelState tu;
    refresh_taps(tu, setup);
    const CVector s = draw_symbols(Constellation::BPSK, 8, rng);
    const CVector z = CVector::Zero(8);
    const ReceiveFrame f = synthesize_frame(3, s, s, z, z, AuResponse(au, setup), TuResponse(tu, setup), 0.0, setup, rng);
    CHECK(oracle::max_abs(f.pre[0] - 2.0 * oracle::chips(s, 2)) < 1e-12);
}

TEST_CASE("synthesis matches the scalar convolution model") {
    Rng rng(35);
    const OfdmSetup setup(4, 2, 3, PulseModel(PulseShape::Hann, 1));
    for (int t = 0; t < 5; ++t) {
        AuChannelState au = draw_au_channel(2.0, 0.03, 1.0, 1.0, 1.0, rng);
        TuChannelState tu = draw_tu_channel(3, 1.0, 1.0, 1.0, setup, rng);
        const int n = rng.integer(0, 100);
        const CVector sa = draw_symbols(Constellation::BPSK, 4, rng), sa_prev = draw_symbols(Constellation::BPSK, 4, rng);
        const CVector st = draw_symbols(Constellation::QPSK, 4, rng), st_prev = draw_symbols(Constellation::QPSK, 4, rng);
        const AuResponse ar(au, setup);
        const TuResponse tr(tu, setup);
        const ReceiveFrame f = synthesize_frame(n, sa, sa_prev, st, st_prev, ar, tr, 0.0, setup, rng);
        for (int j = 0; j < 3; ++j) {
            const CVector ref = scalar_receive(n, j, sa, sa_prev, st, st_prev, au, tu, setup);
            CHECK(oracle::max_abs(f.pre[j] - ref) < 1e-10);
            CHECK(oracle::max_abs(f.post[j] - setup.demod * ref) < 1e-10);
        }
        // The whole-interval path agrees with the single-block path.
        TransmitBlocks tx;
        tx.au = CMatrix(4, 2);
        tx.au << sa_prev, sa;
        tx.tu = CMatrix(4, 2);
        tx.tu << st_prev, st;
        tx.au_prev = CVector::Zero(4);
        tx.tu_prev = CVector::Zero(4);
        const ReceivedBlocks rb = synthesize_blocks(tx, ar, tr, 0.0, setup, rng);
        const ReceiveFrame f1 = synthesize_frame(1, sa, sa_prev, st, st_prev, ar, tr, 0.0, setup, rng);
        CHECK(oracle::max_abs(rb.stacked(1) - f1.stacked()) < 1e-12);
    }
}

TEST_CASE("effective matrices of simple channels") {
    SUBCASE("flat terrestrial path") {
        const OfdmSetup setup(8, 2, 1, PulseModel::delta());
        TuChannelState tu;
        tu.gain = {1.0};
        tu.delay = {0.0};
        tu.aoa = {0.3};
        tu.variance = {1.0};
        refresh_taps(tu, setup);
        CHECK(oracle::max_abs(TuResponse(tu, setup).stacked() - CMatrix::Identity(8, 8)) < 1e-12);
    }
    SUBCASE("integer delayed terrestrial path") {
        const OfdmSetup setup(8, 2, 1, PulseModel::delta());
        TuChannelState tu;
        const cd g(0.3, -0.7);
        tu.gain = {g};
        tu.delay = {2.0};
        tu.aoa = {0.0};
        tu.variance = {1.0};
        refresh_taps(tu, setup);
        const CVector d = TuResponse(tu, setup).diagonal(0);
        for (int m = 0; m < 8; ++m) CHECK(std::abs(d(m) - g * std::polar(1.0, -2.0 * kPi * m * 2 / 8)) < 1e-12);
    }
    SUBCASE("Doppler spreads energy off the diagonal") {
        const OfdmSetup setup(16, 4, 1, PulseModel(PulseShape::Hann, 2));
        AuChannelState au;
        au.gain = {1.0, 0.0};
        au.doppler = {0.02, 0.0};
        au.delay = {0.5, 0.0};
        const CMatrix h = AuResponse(au, setup).effective(0, 0);
        const CMatrix off = h - CMatrix(h.diagonal().asDiagonal());
        CHECK(off.norm() > 1e-3);
        au.doppler = {0.0, 0.0};
        const CMatrix h0 = AuResponse(au, setup).effective(0, 0);
        CHECK(oracle::max_abs(h0 - CMatrix(h0.diagonal().asDiagonal())) < 1e-12);
    }
}

TEST_CASE("common delay shift keeps the earliest path at zero") {
    Rng rng(36);
    const OfdmSetup setup(16, 4, 2, PulseModel(PulseShape::Hann, 2));
    AuChannelState au = draw_au_channel(4.0, 0.02, 1.0, 3.0, 2.0, rng);
    TuChannelState tu = draw_tu_channel(2, 3.0, 2.0, 1.0, setup, rng);
    const double gap = au.delay[1] - au.delay[0];
    lock_to_min_delay(au, tu, setup);
    double lo = std::min(au.delay[0], au.delay[1]);
    for (double d : tu.delay) lo = std::min(lo, d);
    CHECK(lo == 0.0);
    CHECK(au.delay[1] - au.delay[0] == doctest::Approx(gap));
}

TEST_CASE("steering vector") {
    const CVector a = steering_vector(4, 0.4);
    const cd eta = std::exp(kJ * (kPi * std::sin(0.4)));
    for (int j = 0; j < 4; ++j) CHECK(std::abs(a(j) - std::pow(eta, j)) < 1e-12);
}
