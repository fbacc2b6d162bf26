#include "sgnoma/harness.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace sgnoma {

namespace {

// Purpose tags mixed into derived seeds.
enum : std::uint64_t { kChannelStream = 1, kSymbolStream = 2, kNoiseStream = 3, kAuPilotSeed = 11, kTuPilotSeed = 12 };

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

std::string format_number(double v) {
    if (!std::isfinite(v)) return "nan";
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

std::string format_db(double sum, long count) {
    if (count <= 0 || !(sum > 0.0)) return count > 0 ? "-inf" : "nan";
    return format_number(10.0 * std::log10(sum / double(count)));
}

double wrap_sine(double d) {
    d = std::fmod(d + 1.0, 2.0);
    if (d < 0.0) d += 2.0;
    return d - 1.0;
}

}  // namespace

Scenario::Scenario(const SimulationConfig& cfg)
    : config(cfg),
      setup(cfg.M, cfg.L_cp, cfg.J, cfg.pulse_model()),
      au_pilots(make_pilot_schedule(User::AU, Constellation::BPSK, cfg.M, cfg.Q_A, cfg.N_A_train, cfg.N_coh, 0.0,
                                    derive_seed({cfg.seed, kAuPilotSeed}))),
      tu_pilots(make_pilot_schedule(User::TU, Constellation::QPSK, cfg.M, cfg.Q_T, cfg.N_T_train, cfg.N_coh, 0.5,
                                    derive_seed({cfg.seed, kTuPilotSeed}))) {
    config.validate();
    for (int n = 0; n < cfg.N_coh; ++n)
        if (!au_pilots.is_pilot_block(n) && !tu_pilots.is_pilot_block(n)) eligible_blocks.push_back(n);
    const int e = int(eligible_blocks.size());
    if (cfg.data_blocks == 0 || cfg.data_blocks >= e) {
        detected_blocks = eligible_blocks;
    } else {
        for (int i = 0; i < cfg.data_blocks; ++i)
            detected_blocks.push_back(eligible_blocks[std::size_t((long long)i * e / cfg.data_blocks)]);
    }
}

double Scenario::noise_variance(double snr_db) const { return 1.0 / db_to_linear(snr_db); }
double Scenario::tu_power(double atr_db) const { return 1.0 / db_to_linear(atr_db); }

BitCounts& BitCounts::operator+=(const BitCounts& o) {
    bits_a += o.bits_a;
    errs_a += o.errs_a;
    bits_t += o.bits_t;
    errs_t += o.errs_t;
    return *this;
}

std::array<int, 2> match_rays(const AuChannelState& truth, const AuChannelState& est) {
    const double straight = std::abs(est.doppler[0] - truth.doppler[0]) + std::abs(est.doppler[1] - truth.doppler[1]);
    const double crossed = std::abs(est.doppler[0] - truth.doppler[1]) + std::abs(est.doppler[1] - truth.doppler[0]);
    return crossed < straight ? std::array<int, 2>{1, 0} : std::array<int, 2>{0, 1};
}

EstimationErrors estimation_errors(const AuChannelState& truth, const AuChannelState& est, double max_doppler,
                                   double max_delay) {
    const std::array<int, 2> perm = match_rays(truth, est);
    EstimationErrors e;
    const double g0 = std::norm(truth.gain[0]);
    for (int k = 0; k < 2; ++k) {
        const int m = perm[k];  // estimated ray matched to true ray k
        e.doppler += 0.5 * std::pow((est.doppler[m] - truth.doppler[k]) / max_doppler, 2);
        e.delay += 0.5 * std::pow((est.delay[m] - truth.delay[k]) / max_delay, 2);
        e.gain += 0.5 * std::norm(est.gain[m] - truth.gain[k]) / g0;
        e.dircos += 0.5 * std::pow(wrap_sine(std::sin(est.aoa[m]) - std::sin(truth.aoa[k])), 2);
    }
    return e;
}

TrialReport run_trial(const Scenario& sc, double snr_db, double atr_db, std::uint64_t trial, TrialChannels* channels) {
    const auto t0 = std::chrono::steady_clock::now();
    const SimulationConfig& cfg = sc.config;
    const OfdmSetup& setup = sc.setup;
    const double s2 = sc.noise_variance(snr_db);
    const double tu_power = sc.tu_power(atr_db);

    Rng channel_rng(derive_seed({cfg.seed, trial, kChannelStream}));
    Rng symbol_rng(derive_seed({cfg.seed, trial, kSymbolStream}));
    Rng noise_rng(derive_seed({cfg.seed, trial, kNoiseStream}));

    AuChannelState au = draw_au_channel(db_to_linear(cfg.K_A_dB), cfg.max_doppler(), 1.0, cfg.delta_A, cfg.tau_slope,
                                        channel_rng);
    TuChannelState tu = draw_tu_channel(cfg.K_T, cfg.delta_T, cfg.tau_slope, tu_power, setup, channel_rng);
    lock_to_min_delay(au, tu, setup);
    const AuResponse au_true(au, setup);
    const TuResponse tu_true(tu, setup);

    TransmitBlocks tx;
    tx.au = draw_symbols(Constellation::BPSK, cfg.M * cfg.N_coh, symbol_rng).reshaped(cfg.M, cfg.N_coh);
    tx.tu = draw_symbols(Constellation::QPSK, cfg.M * cfg.N_coh, symbol_rng).reshaped(cfg.M, cfg.N_coh);
    tx.au_prev = draw_symbols(Constellation::BPSK, cfg.M, symbol_rng);
    tx.tu_prev = draw_symbols(Constellation::QPSK, cfg.M, symbol_rng);
    inject_pilots(sc.au_pilots, tx.au);
    inject_pilots(sc.tu_pilots, tx.tu);

    const bool need_estimation =
        std::find(cfg.csi.begin(), cfg.csi.end(), CsiMode::Estimated) != cfg.csi.end();

    // Received data: the whole interval when the estimators need it, otherwise
    // only the detected blocks.
    ReceivedBlocks rx;
    std::vector<CVector> frames;
    if (need_estimation) {
        rx = synthesize_blocks(tx, au_true, tu_true, s2, setup, noise_rng);
    } else {
        for (int n : sc.detected_blocks) {
            const CVector au_prev = n == 0 ? tx.au_prev : CVector(tx.au.col(n - 1));
            const CVector tu_prev = n == 0 ? tx.tu_prev : CVector(tx.tu.col(n - 1));
            frames.push_back(synthesize_frame(n, tx.au.col(n), au_prev, tx.tu.col(n), tu_prev, au_true, tu_true, s2,
                                              setup, noise_rng)
                                 .stacked());
        }
    }

    TrialReport rep;
    rep.trial = trial;
    rep.rows.assign(cfg.csi.size() * cfg.detectors.size(), BitCounts{});
    if (channels) {
        channels->au = au;
        channels->tu = tu;
    }

    const CMatrix delta = delta_matrix(Constellation::BPSK, 0, cfg.M);
    for (std::size_t ci = 0; ci < cfg.csi.size(); ++ci) {
        std::optional<AuResponse> au_est_resp;
        CMatrix m_tu;
        const AuResponse* au_resp = &au_true;
        if (cfg.csi[ci] == CsiMode::Exact) {
            m_tu = tu_true.stacked();
        } else {
            AuEstimatorOptions opt;
            opt.max_delay = cfg.delta_A;
            AuEstimate est = estimate_au_channel(rx, sc.au_pilots, setup, opt);
            if (!est.doppler_ok) rep.failures.push_back("aerial Doppler scan found no peak");
            if (!est.delay_ok) rep.failures.push_back("aerial delay scan failed");
            if (!est.gains_ok) rep.failures.push_back("aerial gain/angle fit failed");
            au_est_resp.emplace(est.state, setup);
            au_resp = &*au_est_resp;

            TuEstimate tu_est;
            try {
                const TuPilotModel model = build_pilot_model(rx, sc.tu_pilots, au_resp, s2, setup);
                try {
                    tu_est = bwlu_estimate(model);
                } catch (const std::exception& e) {
                    rep.failures.push_back(std::string("terrestrial BWLU failed, LS used: ") + e.what());
                    tu_est = ls_estimate(model);
                }
            } catch (const std::exception& e) {
                rep.failures.push_back(std::string("terrestrial estimation failed: ") + e.what());
                tu_est.taps = CMatrix::Zero(setup.tap_count(), setup.J);
                tu_est.variance = std::numeric_limits<double>::quiet_NaN();
            }
            m_tu = TuResponse(tu_est.taps, setup).stacked();

            EstimationErrors err = estimation_errors(au, est.state, cfg.max_doppler(), cfg.delta_A);
            err.var_gt = tu_est.variance / tu_power;
            rep.estimation = err;
            if (channels) {
                channels->au_estimate = est;
                channels->tu_estimate = tu_est;
            }
        }

        for (std::size_t bi = 0; bi < sc.detected_blocks.size(); ++bi) {
            const int n = sc.detected_blocks[bi];
            const CVector y = need_estimation ? rx.stacked(n) : frames[bi];
            const CMatrix h_au = au_resp->stacked(n);
            for (std::size_t di = 0; di < cfg.detectors.size(); ++di) {
                const DetectionReport d = detect(cfg.detectors[di], y, h_au, m_tu, delta, s2);
                BitCounts& c = rep.rows[ci * cfg.detectors.size() + di];
                for (int m = 0; m < cfg.M; ++m) {
                    c.errs_a += bit_errors(Constellation::BPSK, tx.au(m, n), d.au(m));
                    c.errs_t += bit_errors(Constellation::QPSK, tx.tu(m, n), d.tu(m));
                }
                c.bits_a += cfg.M * bits_per_symbol(Constellation::BPSK);
                c.bits_t += cfg.M * bits_per_symbol(Constellation::QPSK);
            }
        }
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

void CellAccumulator::add(const TrialReport& r) {
    if (rows.empty()) rows.assign(r.rows.size(), BitCounts{});
    if (rows.size() != r.rows.size()) throw std::logic_error("cell row count mismatch");
    ++trials;
    seconds += r.seconds;
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] += r.rows[i];
    if (r.estimation) {
        ++est_trials;
        est_sum.doppler += r.estimation->doppler;
        est_sum.delay += r.estimation->delay;
        est_sum.gain += r.estimation->gain;
        est_sum.dircos += r.estimation->dircos;
        est_sum.var_gt += r.estimation->var_gt;
    }
    if (!r.failures.empty()) ++failed_trials;
}

const CellAccumulator& GridResult::cell(double snr_db, double atr_db) const {
    for (const auto& c : cells)
        if (c.snr_db == snr_db && c.atr_db == atr_db) return c;
    throw std::out_of_range("no such cell");
}

const BitCounts& GridResult::counts(double snr_db, double atr_db, DetectorKind detector, CsiMode csi) const {
    const auto di = std::find(config.detectors.begin(), config.detectors.end(), detector);
    const auto ci = std::find(config.csi.begin(), config.csi.end(), csi);
    if (di == config.detectors.end() || ci == config.csi.end()) throw std::out_of_range("no such row");
    return cell(snr_db, atr_db)
        .rows[std::size_t(ci - config.csi.begin()) * config.detectors.size() + std::size_t(di - config.detectors.begin())];
}

std::pair<double, double> wilson_interval(long errs, long bits, double z) {
    if (bits <= 0) return {0.0, 1.0};
    const double n = double(bits);
    const double p = double(errs) / n;
    const double z2 = z * z;
    const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

double ber_standard_error(long errs, long bits) {
    if (bits <= 0) return 0.0;
    const double p = double(errs) / double(bits);
    return std::sqrt(p * (1.0 - p) / double(bits));
}

namespace {

bool cell_done(const CellAccumulator& c, const SimulationConfig& cfg) {
    if (c.trials >= cfg.trials) return true;
    if (cfg.min_errors <= 0 || c.rows.empty()) return false;
    for (const BitCounts& r : c.rows)
        if (r.errs_a < cfg.min_errors || r.errs_t < cfg.min_errors) return false;
    return true;
}

// Trials are processed in fixed-size chunks so the stopping point does not
// depend on the thread count.
constexpr int kChunk = 8;

void run_cell(const Scenario& sc, CellAccumulator& cell, std::vector<FailureRecord>& failures, int threads) {
    const SimulationConfig& cfg = sc.config;
    while (!cell_done(cell, cfg)) {
        const long first = cell.trials;
        const int count = int(std::min<long>(kChunk, cfg.trials - first));
        std::vector<TrialReport> reports(static_cast<std::size_t>(count));
        std::vector<std::string> errors(static_cast<std::size_t>(count));
        std::atomic<int> next{0};
        auto worker = [&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    reports[std::size_t(i)] = run_trial(sc, cell.snr_db, cell.atr_db, std::uint64_t(first + i));
                } catch (const std::exception& e) {
                    errors[std::size_t(i)] = e.what();
                }
            }
        };
        const int nt = std::max(1, std::min(threads, count));
        if (nt == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        for (int i = 0; i < count; ++i) {
            if (!errors[std::size_t(i)].empty())
                throw std::runtime_error("trial " + std::to_string(first + i) + ": " + errors[std::size_t(i)]);
            const TrialReport& r = reports[std::size_t(i)];
            for (const auto& f : r.failures) failures.push_back({cell.snr_db, cell.atr_db, r.trial, f});
            cell.add(r);
            if (cell_done(cell, cfg)) break;
        }
    }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + tmp);
        f << text;
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

GridResult run_grid(const SimulationConfig& config, const RunOptions& options) {
    config.validate();
    const Scenario sc(config);
    GridResult result;
    result.config = config;

    namespace fs = std::filesystem;
    const fs::path dir = options.out_dir;
    const fs::path sidecar = dir / "results.json";
    if (!options.out_dir.empty()) fs::create_directories(dir);
    if (options.resume && !options.out_dir.empty() && fs::exists(sidecar)) {
        GridResult previous = parse_sidecar(read_file(sidecar), config.hash());
        result.failures = previous.failures;
        result.cells = previous.cells;
    }

    for (double snr : config.snr_db) {
        for (double atr : config.atr_db) {
            auto it = std::find_if(result.cells.begin(), result.cells.end(),
                                   [&](const CellAccumulator& c) { return c.snr_db == snr && c.atr_db == atr; });
            if (it == result.cells.end()) {
                CellAccumulator c;
                c.snr_db = snr;
                c.atr_db = atr;
                c.rows.assign(config.csi.size() * config.detectors.size(), BitCounts{});
                result.cells.push_back(c);
                it = result.cells.end() - 1;
            }
            run_cell(sc, *it, result.failures, options.threads);
            if (!options.quiet)
                std::fprintf(stderr, "cell snr=%g atr=%g: %ld trials, %.1f s\n", snr, atr, it->trials, it->seconds);
            if (!options.out_dir.empty()) {
                write_file(dir / "results.csv", format_csv(result));
                write_file(sidecar, format_sidecar(result));
            }
        }
    }
    return result;
}

std::string format_csv(const GridResult& r) {
    const SimulationConfig& cfg = r.config;
    std::string out = std::string(kCsvHeader) + "\n";
    for (const CellAccumulator& c : r.cells) {
        for (std::size_t ci = 0; ci < cfg.csi.size(); ++ci) {
            for (std::size_t di = 0; di < cfg.detectors.size(); ++di) {
                const BitCounts& b = c.rows[ci * cfg.detectors.size() + di];
                const bool est = cfg.csi[ci] == CsiMode::Estimated;
                const long n = est ? c.est_trials : 0;
                std::vector<std::string> f = {
                    format_number(c.snr_db),
                    format_number(c.atr_db),
                    to_string(cfg.detectors[di]),
                    to_string(cfg.csi[ci]),
                    std::to_string(c.trials),
                    std::to_string(b.bits_a),
                    std::to_string(b.errs_a),
                    format_number(b.bits_a ? double(b.errs_a) / double(b.bits_a) : std::nan("")),
                    std::to_string(b.bits_t),
                    std::to_string(b.errs_t),
                    format_number(b.bits_t ? double(b.errs_t) / double(b.bits_t) : std::nan("")),
                    format_db(c.est_sum.doppler, n),
                    format_db(c.est_sum.delay, n),
                    format_db(c.est_sum.gain, n),
                    format_db(c.est_sum.dircos, n),
                    format_db(c.est_sum.var_gt, n),
                    format_number(c.trials ? c.seconds / double(c.trials) : 0.0),
                };
                for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "," : "") + f[i];
                out += "\n";
            }
        }
    }
    return out;
}

std::string format_sidecar(const GridResult& r) {
    using nlohmann::json;
    json j;
    j["config"] = r.config.entries();
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << r.config.hash();
    j["config_hash"] = hash.str();
    json cells = json::array();
    for (const CellAccumulator& c : r.cells) {
        json jc;
        jc["snr_db"] = c.snr_db;
        jc["atr_db"] = c.atr_db;
        jc["trials"] = c.trials;
        jc["seconds"] = c.seconds;
        jc["failed_trials"] = c.failed_trials;
        jc["est_trials"] = c.est_trials;
        jc["est_sum"] = {{"doppler", c.est_sum.doppler}, {"delay", c.est_sum.delay}, {"gain", c.est_sum.gain},
                         {"dircos", c.est_sum.dircos}, {"var_gt", c.est_sum.var_gt}};
        json rows = json::array();
        for (std::size_t ci = 0; ci < r.config.csi.size(); ++ci) {
            for (std::size_t di = 0; di < r.config.detectors.size(); ++di) {
                const BitCounts& b = c.rows[ci * r.config.detectors.size() + di];
                const auto wa = wilson_interval(b.errs_a, b.bits_a);
                const auto wt = wilson_interval(b.errs_t, b.bits_t);
                rows.push_back({{"detector", to_string(r.config.detectors[di])},
                                {"csi_mode", to_string(r.config.csi[ci])},
                                {"bits_a", b.bits_a},
                                {"errs_a", b.errs_a},
                                {"bits_t", b.bits_t},
                                {"errs_t", b.errs_t},
                                {"wilson_a", {wa.first, wa.second}},
                                {"wilson_t", {wt.first, wt.second}}});
            }
        }
        jc["rows"] = rows;
        cells.push_back(jc);
    }
    j["cells"] = cells;
    json failures = json::array();
    for (const FailureRecord& f : r.failures)
        failures.push_back({{"snr_db", f.snr_db}, {"atr_db", f.atr_db}, {"trial", f.trial}, {"what", f.what}});
    j["failures"] = failures;
    return j.dump(2) + "\n";
}

GridResult parse_sidecar(const std::string& text, std::optional<std::uint64_t> expected_hash) {
    using nlohmann::json;
    const json j = json::parse(text);
    const std::uint64_t stored = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    if (expected_hash && *expected_hash != stored)
        throw HashMismatchError("results were produced with a different configuration; refusing to merge");

    GridResult r;
    SimulationConfig cfg;
    for (const auto& [k, v] : j.at("config").items()) set_config_value(cfg, k, v.get<std::string>());
    r.config = cfg;
    if (cfg.hash() != stored) throw HashMismatchError("sidecar config does not match its recorded hash");

    for (const json& jc : j.at("cells")) {
        CellAccumulator c;
        c.snr_db = jc.at("snr_db").get<double>();
        c.atr_db = jc.at("atr_db").get<double>();
        c.trials = jc.at("trials").get<long>();
        c.seconds = jc.at("seconds").get<double>();
        c.failed_trials = jc.at("failed_trials").get<long>();
        c.est_trials = jc.at("est_trials").get<long>();
        const json& e = jc.at("est_sum");
        c.est_sum = {e.at("doppler").get<double>(), e.at("delay").get<double>(), e.at("gain").get<double>(),
                     e.at("dircos").get<double>(), e.at("var_gt").get<double>()};
        c.rows.assign(cfg.csi.size() * cfg.detectors.size(), BitCounts{});
        for (const json& jr : jc.at("rows")) {
            const auto di = std::find(cfg.detectors.begin(), cfg.detectors.end(),
                                      parse_detector(jr.at("detector").get<std::string>()));
            const auto ci =
                std::find(cfg.csi.begin(), cfg.csi.end(), parse_csi_mode(jr.at("csi_mode").get<std::string>()));
            if (di == cfg.detectors.end() || ci == cfg.csi.end()) throw std::runtime_error("sidecar row not in config");
            BitCounts& b = c.rows[std::size_t(ci - cfg.csi.begin()) * cfg.detectors.size() +
                                  std::size_t(di - cfg.detectors.begin())];
            b.bits_a = jr.at("bits_a").get<long>();
            b.errs_a = jr.at("errs_a").get<long>();
            b.bits_t = jr.at("bits_t").get<long>();
            b.errs_t = jr.at("errs_t").get<long>();
        }
        r.cells.push_back(c);
    }
    for (const json& jf : j.at("failures"))
        r.failures.push_back({jf.at("snr_db").get<double>(), jf.at("atr_db").get<double>(),
                              jf.at("trial").get<std::uint64_t>(), jf.at("what").get<std::string>()});
    return r;
}

void write_scan(const Scenario& sc, double snr_db, double atr_db, std::uint64_t trial, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const SimulationConfig& cfg = sc.config;
    const OfdmSetup& setup = sc.setup;
    const double s2 = sc.noise_variance(snr_db);

    Rng channel_rng(derive_seed({cfg.seed, trial, kChannelStream}));
    Rng symbol_rng(derive_seed({cfg.seed, trial, kSymbolStream}));
    Rng noise_rng(derive_seed({cfg.seed, trial, kNoiseStream}));
    AuChannelState au = draw_au_channel(db_to_linear(cfg.K_A_dB), cfg.max_doppler(), 1.0, cfg.delta_A, cfg.tau_slope,
                                        channel_rng);
    TuChannelState tu = draw_tu_channel(cfg.K_T, cfg.delta_T, cfg.tau_slope, sc.tu_power(atr_db), setup, channel_rng);
    lock_to_min_delay(au, tu, setup);
    TransmitBlocks tx;
    tx.au = draw_symbols(Constellation::BPSK, cfg.M * cfg.N_coh, symbol_rng).reshaped(cfg.M, cfg.N_coh);
    tx.tu = draw_symbols(Constellation::QPSK, cfg.M * cfg.N_coh, symbol_rng).reshaped(cfg.M, cfg.N_coh);
    tx.au_prev = draw_symbols(Constellation::BPSK, cfg.M, symbol_rng);
    tx.tu_prev = draw_symbols(Constellation::QPSK, cfg.M, symbol_rng);
    inject_pilots(sc.au_pilots, tx.au);
    inject_pilots(sc.tu_pilots, tx.tu);
    const ReceivedBlocks rx = synthesize_blocks(tx, AuResponse(au, setup), TuResponse(tu, setup), s2, setup, noise_rng);

    const CycleSpectrum exact = cycle_spectrum(rx.pre);
    const CycleSpectrum tapered = tapered_cycle_spectrum(rx.pre);
    const DopplerResult dop = resolve_dopplers(find_peaks(tapered), tapered);

    fs::create_directories(out_dir);
    {
        std::ofstream f(fs::path(out_dir) / "cycle_spectrum.csv");
        f << "alpha,j_exact,j_tapered\n" << std::setprecision(12);
        for (std::size_t i = 0; i < exact.alpha.size(); ++i)
            f << exact.alpha[i] << "," << exact.value[i] << "," << tapered.value[i] << "\n";
    }
    const int grid = 1024;
    std::vector<double> betas(grid);
    for (int i = 0; i < grid; ++i) betas[i] = cfg.delta_A * i / (grid - 1);
    std::array<std::vector<double>, 2> approx, exact_cost;
    for (int k = 0; k < 2; ++k) {
        const CMatrix stats = antenna_delay_statistics(rx.pre, dop.doppler[k], setup);
        approx[k] = delay_cost(stats.rowwise().sum(), setup, betas);
        exact_cost[k] = delay_cost_exact(stats, setup, betas);
    }
    {
        std::ofstream f(fs::path(out_dir) / "delay_cost.csv");
        f << "beta,ray0_approx,ray0_exact,ray1_approx,ray1_exact\n" << std::setprecision(12);
        for (int i = 0; i < grid; ++i)
            f << betas[i] << "," << approx[0][i] << "," << exact_cost[0][i] << "," << approx[1][i] << ","
              << exact_cost[1][i] << "\n";
    }
    nlohmann::json j;
    j["snr_db"] = snr_db;
    j["atr_db"] = atr_db;
    j["trial"] = trial;
    j["true_doppler"] = au.doppler;
    j["true_delay"] = au.delay;
    j["estimated_doppler"] = dop.doppler;
    j["peak_threshold"] = peak_threshold(tapered);
    nlohmann::json peaks = nlohmann::json::array();
    for (const auto& p : dop.peaks) peaks.push_back({{"alpha", p.location}, {"height", p.height}});
    j["peaks"] = peaks;
    std::ofstream(fs::path(out_dir) / "scan.json") << j.dump(2) << "\n";
}

TrainingTable run_training_table(const SimulationConfig& config, User user, const std::vector<int>& n_train,
                                 const RunOptions& options) {
    SimulationConfig base = config;
    base.snr_db = {config.snr_db.front()};
    base.atr_db = {config.atr_db.front()};
    base.detectors = {DetectorKind::WlMmseSic};
    RunOptions quiet = options;
    quiet.out_dir.clear();
    quiet.resume = false;

    TrainingTable table;
    table.user = user;
    SimulationConfig exact = base;
    exact.csi = {CsiMode::Exact};
    const GridResult ref = run_grid(exact, quiet);
    table.exact = ref.cells.front().rows.front();
    table.exact_trials = ref.cells.front().trials;

    for (int n : n_train) {
        SimulationConfig c = base;
        c.csi = {CsiMode::Estimated};
        (user == User::AU ? c.N_A_train : c.N_T_train) = n;
        const GridResult g = run_grid(c, quiet);
        table.rows.push_back({n, g.cells.front().rows.front(), g.cells.front().trials});
    }
    return table;
}

std::string format_training_table(const TrainingTable& t) {
    std::ostringstream os;
    os << "user,n_train,trials,bits_a,errs_a,ber_a,bits_t,errs_t,ber_t\n";
    auto row = [&](const std::string& n, long trials, const BitCounts& b) {
        os << (t.user == User::AU ? "au" : "tu") << "," << n << "," << trials << "," << b.bits_a << "," << b.errs_a
           << "," << format_number(b.bits_a ? double(b.errs_a) / b.bits_a : std::nan("")) << "," << b.bits_t << ","
           << b.errs_t << "," << format_number(b.bits_t ? double(b.errs_t) / b.bits_t : std::nan("")) << "\n";
    };
    row("exact", t.exact_trials, t.exact);
    for (const auto& r : t.rows) row(std::to_string(r.n_train), r.trials, r.counts);
    return os.str();
}

}  // namespace sgnoma
