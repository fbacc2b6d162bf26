// Acceptance runs. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. Criteria can be selected by name on the command line.

#include "sgnoma/harness.hpp"
#include "sgnoma/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace sgnoma;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double to_db(double x) { return 10.0 * std::log10(x); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double ber(long errs, long bits) { return bits ? double(errs) / double(bits) : std::nan(""); }

// a <= b within two standard errors of the difference
bool not_worse(long ea, long ba, long eb, long bb) {
    const double se = std::hypot(ber_standard_error(ea, ba), ber_standard_error(eb, bb));
    return ber(ea, ba) <= ber(eb, bb) + 2.0 * se;
}

Outcome small_instance() {
    const auto t0 = std::chrono::steady_clock::now();
    const CheckResult r = check_small_instance(1);
    const double t = seconds_since(t0);
    return {r.pass && t < 1.0, std::to_string(int(r.value)) + " symbol errors, " + r.detail + ", " + fmt("%.3f s", t)};
}

Outcome estimator_flatness() {
    SimulationConfig c;
    c.N_coh = 1 << 14;
    c.snr_db = {0, 20};
    c.atr_db = {-3, 3};
    c.trials = 50;
    c.data_blocks = 1;
    c.detectors = {DetectorKind::WlMmseSic};
    c.csi = {CsiMode::Estimated};
    RunOptions o;
    o.quiet = false;
    const GridResult g = run_grid(c, o);

    std::vector<double> dop, del;
    std::ostringstream os;
    for (const CellAccumulator& cell : g.cells) {
        const double d = to_db(cell.est_sum.doppler / cell.est_trials);
        const double t = to_db(cell.est_sum.delay / cell.est_trials);
        dop.push_back(d);
        del.push_back(t);
        os << "[snr " << cell.snr_db << " atr " << cell.atr_db << ": doppler " << fmt("%.2f", d) << " dB, delay "
           << fmt("%.2f", t) << " dB, " << cell.est_trials << " trials, " << cell.failed_trials << " with failures] ";
    }
    const auto [dlo, dhi] = std::minmax_element(dop.begin(), dop.end());
    const auto [tlo, thi] = std::minmax_element(del.begin(), del.end());
    os << "doppler spread " << fmt("%.2f", *dhi - *dlo) << " dB, delay spread " << fmt("%.2f", *thi - *tlo) << " dB";
    bool enough = true;
    for (const CellAccumulator& cell : g.cells) enough = enough && cell.est_trials >= 50;
    const bool pass = enough && *dhi <= -50.0 && *thi <= -25.0 && *dhi - *dlo < 3.0 && *thi - *tlo < 3.0;
    return {pass, os.str()};
}

Outcome detector_ordering() {
    SimulationConfig c;
    c.N_coh = 1024;
    c.data_blocks = 0;
    c.snr_db = {15};
    c.atr_db = {-3, 0, 3};
    c.csi = {CsiMode::Exact};
    c.detectors = {DetectorKind::WlMmseSic, DetectorKind::LMmseSic, DetectorKind::LMmse, DetectorKind::WlMmse};
    c.min_errors = 200;
    c.trials = 4000;
    RunOptions o;
    o.quiet = false;
    const GridResult g = run_grid(c, o);

    bool pass = true;
    std::ostringstream os;
    for (double atr : c.atr_db) {
        const BitCounts& wls = g.counts(15, atr, DetectorKind::WlMmseSic, CsiMode::Exact);
        const BitCounts& ls = g.counts(15, atr, DetectorKind::LMmseSic, CsiMode::Exact);
        const BitCounts& l = g.counts(15, atr, DetectorKind::LMmse, CsiMode::Exact);
        const BitCounts& wl = g.counts(15, atr, DetectorKind::WlMmse, CsiMode::Exact);
        bool enough = true;
        for (const BitCounts* b : {&wls, &ls, &l, &wl}) enough = enough && b->errs_a >= 200 && b->errs_t >= 200;
        const bool tu_gain = ber(wl.errs_t, wl.bits_t) < ber(l.errs_t, l.bits_t);
        const bool chain_a = not_worse(wls.errs_a, wls.bits_a, ls.errs_a, ls.bits_a) &&
                             not_worse(ls.errs_a, ls.bits_a, l.errs_a, l.bits_a);
        const bool chain_t = not_worse(wls.errs_t, wls.bits_t, ls.errs_t, ls.bits_t) &&
                             not_worse(ls.errs_t, ls.bits_t, l.errs_t, l.bits_t);
        pass = pass && enough && tu_gain && chain_a && chain_t;
        os << "[atr " << atr << ", " << g.cell(15, atr).trials << " trials: BER_A wl-sic/l-sic/l/wl "
           << fmt("%.3g", ber(wls.errs_a, wls.bits_a)) << "/" << fmt("%.3g", ber(ls.errs_a, ls.bits_a)) << "/"
           << fmt("%.3g", ber(l.errs_a, l.bits_a)) << "/" << fmt("%.3g", ber(wl.errs_a, wl.bits_a)) << ", BER_T "
           << fmt("%.3g", ber(wls.errs_t, wls.bits_t)) << "/" << fmt("%.3g", ber(ls.errs_t, ls.bits_t)) << "/"
           << fmt("%.3g", ber(l.errs_t, l.bits_t)) << "/" << fmt("%.3g", ber(wl.errs_t, wl.bits_t))
           << (enough ? "" : ", too few errors") << (tu_gain ? "" : ", TU WL not better") << (chain_a ? "" : ", AU chain broken")
           << (chain_t ? "" : ", TU chain broken") << "] ";
    }
    return {pass, os.str()};
}

// Largest per-symbol gap between the bias-normalized AU decision statistics of
// WL-MMSE and L-MMSE over random exact-CSI frames.
double wl_linear_gap(bool zero_doppler, int frames, double* agreement = nullptr) {
    SimulationConfig c;
    c.N_coh = 64;
    const Scenario sc(c);
    const OfdmSetup& setup = sc.setup;
    const CMatrix delta = delta_matrix(Constellation::BPSK, 0, c.M);
    double gap = 0.0;
    long same = 0;
    for (int f = 0; f < frames; ++f) {
        Rng rng(derive_seed({c.seed, 500, std::uint64_t(f)}));
        const double snr = rng.uniform(0.0, 20.0), atr = rng.uniform(-3.0, 3.0);
        const double s2 = sc.noise_variance(snr);
        AuChannelState au = draw_au_channel(std::pow(10.0, c.K_A_dB / 10.0), c.max_doppler(), 1.0, c.delta_A, c.tau_slope, rng);
        if (zero_doppler) au.doppler = {0.0, 0.0};
        TuChannelState tu = draw_tu_channel(c.K_T, c.delta_T, c.tau_slope, sc.tu_power(atr), setup, rng);
        lock_to_min_delay(au, tu, setup);
        const AuResponse ar(au, setup);
        const TuResponse tr(tu, setup);
        const int n = rng.integer(1, c.N_coh - 1);
        const CVector sa = draw_symbols(Constellation::BPSK, c.M, rng), sa_prev = draw_symbols(Constellation::BPSK, c.M, rng);
        const CVector st = draw_symbols(Constellation::QPSK, c.M, rng), st_prev = draw_symbols(Constellation::QPSK, c.M, rng);
        const CVector y = synthesize_frame(n, sa, sa_prev, st, st_prev, ar, tr, s2, setup, rng).stacked();
        const DetectionReport l = detect(DetectorKind::LMmse, y, ar.stacked(n), tr.stacked(), delta, s2);
        const DetectionReport wl = detect(DetectorKind::WlMmse, y, ar.stacked(n), tr.stacked(), delta, s2);
        for (int i = 0; i < c.M; ++i) {
            // decision order of the linear detectors is the symbol order
            const double bl = l.sdr[i] / (1.0 + l.sdr[i]);
            const double bw = wl.sdr[i] / (1.0 + wl.sdr[i]);
            gap = std::max(gap, std::abs(l.soft(i).real() / bl - wl.soft(i).real() / bw));
            same += l.au(i) == wl.au(i);
        }
    }
    if (agreement) *agreement = double(same) / (double(frames) * c.M);
    return gap;
}

Outcome wl_equals_linear() {
    double agree = 0.0;
    const double gap = wl_linear_gap(false, 100, &agree);
    const double still = wl_linear_gap(true, 100);
    return {gap < 1e-8, "max normalized AU soft-output gap " + fmt("%.3g", gap) + ", hard decisions agree on " +
                            fmt("%.2f%%", 100 * agree) + " (zero-Doppler frames: gap " + fmt("%.3g", still) + ")"};
}

Outcome bwlu_dominance() {
    SimulationConfig c;
    c.N_coh = 64;
    const Scenario sc(c);
    const OfdmSetup& setup = sc.setup;
    const int instances = 1000;

    struct Instance {
        AuChannelState au;
        TuChannelState tu;
        double s2;
    };
    auto draw_instance = [&](Rng& rng) {
        const double snr = rng.uniform(0.0, 20.0), atr = rng.uniform(-3.0, 3.0);
        Instance in;
        in.s2 = sc.noise_variance(snr);
        in.au = draw_au_channel(std::pow(10.0, c.K_A_dB / 10.0), c.max_doppler(), 1.0, c.delta_A, c.tau_slope, rng);
        in.tu = draw_tu_channel(c.K_T, c.delta_T, c.tau_slope, sc.tu_power(atr), setup, rng);
        lock_to_min_delay(in.au, in.tu, setup);
        return in;
    };
    auto model_of = [&](const Instance& in, const AuResponse& ar, const TuResponse& tr, Rng& rng) {
        TransmitBlocks tx;
        tx.au = draw_symbols(Constellation::BPSK, c.M * c.N_coh, rng).reshaped(c.M, c.N_coh);
        tx.tu = draw_symbols(Constellation::QPSK, c.M * c.N_coh, rng).reshaped(c.M, c.N_coh);
        tx.au_prev = draw_symbols(Constellation::BPSK, c.M, rng);
        tx.tu_prev = draw_symbols(Constellation::QPSK, c.M, rng);
        inject_pilots(sc.au_pilots, tx.au);
        inject_pilots(sc.tu_pilots, tx.tu);
        const ReceivedBlocks rx = synthesize_blocks(tx, ar, tr, in.s2, setup, rng);
        return build_pilot_model(rx, sc.tu_pilots, &ar, in.s2, setup);
    };

    int no_worse = 0, strict = 0;
    double proj_err = 0.0, power = 0.0;
    for (int i = 0; i < instances; ++i) {
        Rng rng(derive_seed({c.seed, 600, std::uint64_t(i)}));
        const Instance in = draw_instance(rng);
        const AuResponse ar(in.au, setup);
        const TuResponse tr(in.tu, setup);
        const TuPilotModel m = model_of(in, ar, tr, rng);
        const TuEstimate b = bwlu_estimate(m), l = ls_estimate(m);
        no_worse += b.variance <= l.variance * (1.0 + 1e-12);
        strict += b.variance < l.variance * (1.0 - 1e-9);
        const CVector g = stack_taps(in.tu.taps);
        proj_err += (g.adjoint() * (stack_taps(b.taps) - g)).value().real();
        power += g.squaredNorm();
    }
    const double pooled_bias = std::abs(proj_err) / power;

    // Fixed channel, fresh symbols and noise.
    Rng rng(derive_seed({c.seed, 601}));
    const Instance in = draw_instance(rng);
    const AuResponse ar(in.au, setup);
    const TuResponse tr(in.tu, setup);
    const CVector g = stack_taps(in.tu.taps);
    CVector mean = CVector::Zero(g.size());
    const int reps = 1000;
    for (int r = 0; r < reps; ++r) mean += stack_taps(bwlu_estimate(model_of(in, ar, tr, rng)).taps);
    mean /= double(reps);
    const double fixed_bias = (mean - g).norm() / g.norm();

    const double frac = double(strict) / instances;
    const bool pass = no_worse == instances && frac >= 0.95 && pooled_bias < 0.02 && fixed_bias < 0.02;
    return {pass, std::to_string(no_worse) + "/" + std::to_string(instances) + " no worse, " + fmt("%.1f%%", 100 * frac) +
                      " strictly smaller, bias " + fmt("%.4f", fixed_bias) + " (fixed channel, " + std::to_string(reps) +
                      " draws), " + fmt("%.4f", pooled_bias) + " (pooled)"};
}

Outcome training_trend() {
    SimulationConfig c;
    c.snr_db = {15};
    c.atr_db = {-3};
    c.data_blocks = 2000;
    c.min_errors = 200;
    c.trials = 400;
    RunOptions o;
    o.quiet = false;
    const TrainingTable t = run_training_table(c, User::AU, {1, 5, 10, 15, 20}, o);
    std::cout << format_training_table(t);

    const double exact = ber(t.exact.errs_a, t.exact.bits_a);
    bool enough = t.exact.errs_a >= 200;
    double b1 = 0, b20 = 0;
    bool close = true;
    for (const TrainingRow& r : t.rows) {
        const double b = ber(r.counts.errs_a, r.counts.bits_a);
        enough = enough && r.counts.errs_a >= 200;
        if (r.n_train == 1) b1 = b;
        if (r.n_train == 20) b20 = b;
        if (r.n_train >= 10) close = close && b <= 2.0 * exact && b >= 0.5 * exact;
    }
    std::ostringstream os;
    os << "BER_A exact " << fmt("%.3g", exact) << ", N=1 " << fmt("%.3g", b1) << ", N=20 " << fmt("%.3g", b20)
       << ", ratio " << fmt("%.1f", b1 / b20) << (close ? "" : ", N>=10 not within 2x of exact")
       << (enough ? "" : ", too few errors");
    return {enough && close && b1 >= 10.0 * b20, os.str()};
}

Outcome selftest_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    std::ostringstream os;
    for (const CheckResult& r : run_selftest(1)) {
        pass = pass && r.pass;
        os << r.name << " " << fmt("%.3g", r.value) << (r.pass ? " ok; " : " FAILED; ");
    }
    const double t = seconds_since(t0);
    os << fmt("%.1f s", t);
    return {pass && t < 60.0, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"small_instance_oracle", small_instance},
        {"estimator_flatness", estimator_flatness},
        {"detector_ordering", detector_ordering},
        {"wl_equals_linear_au", wl_equals_linear},
        {"bwlu_dominance", bwlu_dominance},
        {"training_trend", training_trend},
        {"selftest_suite", selftest_suite},
    };
    std::vector<std::string> wanted(argv + 1, argv + argc);
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << fmt("%.0f s", seconds_since(t0))
                  << "]" << std::endl;
    }
    return failed ? 1 : 0;
}
