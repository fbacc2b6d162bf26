#pragma once

// Monte Carlo driver: per-trial simulation, cell accumulation over the
// (SNR, ATR) grid, CSV and JSON persistence with resumable accumulation.

#include "sgnoma/au_estimator.hpp"
#include "sgnoma/channel.hpp"
#include "sgnoma/config.hpp"
#include "sgnoma/detector.hpp"
#include "sgnoma/tu_estimator.hpp"
#include "sgnoma/waveform.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sgnoma {

inline constexpr const char* kCsvHeader =
    "snr_db,atr_db,detector,csi_mode,trials,bits_a,errs_a,ber_a,bits_t,errs_t,ber_t,"
    "mse_doppler_db,mse_delay_db,mse_gain_db,mse_dircos_db,var_gT_db,seconds";

struct HashMismatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Constant per-run objects derived from the config.
struct Scenario {
    explicit Scenario(const SimulationConfig& config);

    SimulationConfig config;
    OfdmSetup setup;
    PilotSchedule au_pilots;
    PilotSchedule tu_pilots;
    std::vector<int> eligible_blocks;   // neither user sends pilots
    std::vector<int> detected_blocks;   // subset actually detected

    double noise_variance(double snr_db) const;
    double tu_power(double atr_db) const;
};

struct BitCounts {
    long bits_a = 0;
    long errs_a = 0;
    long bits_t = 0;
    long errs_t = 0;

    BitCounts& operator+=(const BitCounts& o);
};

/// Normalized squared errors of one estimated-CSI trial.
struct EstimationErrors {
    double doppler = 0.0;   // mean over rays of (nu_hat - nu)^2 / nu_max^2
    double delay = 0.0;     // mean over rays of (tau_hat - tau)^2 / delta_A^2
    double gain = 0.0;      // mean over rays of |g_hat - g|^2 / |g_0|^2
    double dircos = 0.0;    // mean over rays of the wrapped sine error squared
    double var_gt = 0.0;    // reported BWLU variance / total TU power
};

/// Rows of a cell are ordered csi-major: index = csi_index * detectors + detector_index.
struct TrialReport {
    std::uint64_t trial = 0;
    std::vector<BitCounts> rows;
    std::optional<EstimationErrors> estimation;
    std::vector<std::string> failures;
    double seconds = 0.0;
};

/// Per-trial truth and estimates, for diagnostics.
struct TrialChannels {
    AuChannelState au;
    TuChannelState tu;
    std::optional<AuEstimate> au_estimate;
    std::optional<TuEstimate> tu_estimate;
};

TrialReport run_trial(const Scenario& scenario, double snr_db, double atr_db, std::uint64_t trial,
                      TrialChannels* channels = nullptr);

/// Permutation of the estimated rays that best matches the true Dopplers.
std::array<int, 2> match_rays(const AuChannelState& truth, const AuChannelState& estimate);

EstimationErrors estimation_errors(const AuChannelState& truth, const AuChannelState& estimate, double max_doppler,
                                   double max_delay);

struct CellAccumulator {
    double snr_db = 0.0;
    double atr_db = 0.0;
    long trials = 0;
    double seconds = 0.0;
    std::vector<BitCounts> rows;
    long est_trials = 0;
    EstimationErrors est_sum;
    long failed_trials = 0;

    void add(const TrialReport& report);
};

struct FailureRecord {
    double snr_db;
    double atr_db;
    std::uint64_t trial;
    std::string what;
};

struct GridResult {
    SimulationConfig config;
    std::vector<CellAccumulator> cells;
    std::vector<FailureRecord> failures;

    const CellAccumulator& cell(double snr_db, double atr_db) const;
    /// Counts of one row of one cell.
    const BitCounts& counts(double snr_db, double atr_db, DetectorKind detector, CsiMode csi) const;
};

struct RunOptions {
    int threads = 1;
    std::string out_dir;        // empty: no files
    bool resume = false;        // continue from an existing sidecar with the same config hash
    bool quiet = true;
};

/// Run every cell of the grid.
GridResult run_grid(const SimulationConfig& config, const RunOptions& options = {});

/// CSV text with the fixed header and one row per (SNR, ATR, detector, CSI) cell.
std::string format_csv(const GridResult& result);

/// JSON sidecar: config echo, config hash, raw accumulators, Wilson intervals, failures.
std::string format_sidecar(const GridResult& result);

/// Rebuild a result from a sidecar. Throws HashMismatchError if expected_hash is
/// given and differs.
GridResult parse_sidecar(const std::string& text, std::optional<std::uint64_t> expected_hash = std::nullopt);

/// Wilson score interval for errs out of bits.
std::pair<double, double> wilson_interval(long errs, long bits, double z = 1.96);

/// Binomial standard error of the BER estimate.
double ber_standard_error(long errs, long bits);

/// Write J(alpha) and the delay costs of one trial to out_dir as CSV, plus a JSON
/// with truth and estimates.
void write_scan(const Scenario& scenario, double snr_db, double atr_db, std::uint64_t trial,
                const std::string& out_dir);

struct TrainingRow {
    int n_train = 0;
    BitCounts counts;
    long trials = 0;
};

struct TrainingTable {
    User user = User::AU;
    BitCounts exact;
    long exact_trials = 0;
    std::vector<TrainingRow> rows;
};

/// BER of WL-MMSE-SIC with estimated CSI versus the number of training blocks of
/// one user, plus the exact-CSI reference, at the first SNR/ATR of the config.
TrainingTable run_training_table(const SimulationConfig& config, User user, const std::vector<int>& n_train,
                                 const RunOptions& options = {});

std::string format_training_table(const TrainingTable& table);

}  // namespace sgnoma
