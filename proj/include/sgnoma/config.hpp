#pragma once

// Scenario configuration: flat "key = value" text, one entry per line, '#'
// starts a comment. List values are comma separated. Unknown keys are errors.

#include "sgnoma/detector.hpp"
#include "sgnoma/linalg.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgnoma {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class CsiMode { Exact, Estimated };

std::string to_string(CsiMode mode);
CsiMode parse_csi_mode(const std::string& name);

struct SimulationConfig {
    // waveform and array
    int M = 16;
    int L_cp = 4;
    int J = 4;
    double chip_rate = 625e3;          // Hz
    double carrier = 27e9;             // Hz
    std::string pulse = "hann";
    int pulse_support = 2;             // chips

    // channels
    int K_T = 2;
    double K_A_dB = 6.0;
    double speed = 10.0;               // m/s
    double f_max = 0.0;                // Hz; 0 derives it from speed and carrier
    double delta_A = 3.0;              // chips
    double delta_T = 3.0;              // chips
    double tau_slope = 2.0;            // chips

    // frame and pilots
    int N_coh = 16384;
    int Q_A = 16;
    int Q_T = 16;
    int N_A_train = 20;
    int N_T_train = 20;
    int data_blocks = 0;               // data blocks detected per trial, 0 = all

    // grid and run control
    std::vector<double> snr_db = {0, 5, 10, 15, 20};
    std::vector<double> atr_db = {-3, 0, 3};
    std::vector<DetectorKind> detectors = {DetectorKind::WlMmseSic, DetectorKind::LMmseSic, DetectorKind::LMmse,
                                           DetectorKind::WlMmse};
    std::vector<CsiMode> csi = {CsiMode::Exact};
    int trials = 10;
    long min_errors = 0;               // stop a cell early once every row has this many errors per user
    std::uint64_t seed = 1;

    /// Maximum Doppler shift in Hz.
    double max_doppler_hz() const;
    /// Maximum Doppler normalized to the block rate, f_max * P / chip_rate.
    double max_doppler() const;
    int block_length() const { return M + L_cp; }
    PulseModel pulse_model() const;

    /// Throws ConfigError on inconsistent values.
    void validate() const;

    /// Canonical key = value text of every field.
    std::string to_text() const;
    /// Key/value echo (strings) for sidecars.
    std::map<std::string, std::string> entries() const;

    /// Hash of the fields that change results; run-length fields (trials,
    /// min_errors) are excluded so runs can be extended.
    std::uint64_t hash() const;
};

/// Parse config text. Keys not in the list above are rejected.
SimulationConfig parse_config(const std::string& text);
SimulationConfig load_config(const std::string& path);

/// Apply one key = value pair.
void set_config_value(SimulationConfig& config, const std::string& key, const std::string& value);

}  // namespace sgnoma
