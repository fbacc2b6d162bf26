#pragma once

// Pilot-aided estimation of the aggregated terrestrial taps: plain least squares
// and the widely-linear unbiased estimator that uses the aerial CSI to whiten
// the improper aerial interference.

#include "sgnoma/channel.hpp"
#include "sgnoma/linalg.hpp"
#include "sgnoma/waveform.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace sgnoma {

struct RankDeficientError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Per training block n: y_n = (I_J kron P[n]) g + M_A[n] s_A[n] + w_n, with
/// y_n the J stacked pilot-row vectors and g the J stacked tap vectors.
struct TuPilotModel {
    int J = 0;
    int taps = 0;
    int Q = 0;
    double noise_variance = 0.0;
    std::vector<CMatrix> pilot;          // P[n] = sqrt(M) S[n] W^H L on the pilot rows, Q x taps
    std::vector<CVector> y;              // JQ
    std::vector<CMatrix> interference;   // M_A[n], JQ x M; empty when the aerial user is silent

    int blocks() const { return int(pilot.size()); }
    /// P stacked over blocks, (Q N_train) x taps.
    CMatrix stacked_pilot() const;
    /// blockdiag(I_J kron P[n], I_J kron P[n]^*).
    CMatrix pi(int n) const;
    /// (M_A[n]; M_A[n]^*) for real aerial symbols.
    CMatrix augmented_interference(int n) const;
    /// M~ M~^H + sigma^2 I, 2JQ square.
    CMatrix disturbance_covariance(int n) const;
    /// (y_n; y_n^*).
    CVector augmented(int n) const;
};

/// sqrt(M) diag(values) W_M^H L restricted to the given subcarriers.
CMatrix pilot_matrix(const std::vector<int>& subcarriers, const CVector& values, const OfdmSetup& setup);

/// Build the model from the received post-DFT blocks. au may be null (aerial
/// user silent); otherwise its effective matrices at the training blocks supply
/// M_A[n]. Throws RankDeficientError when the stacked pilot matrix lacks full
/// column rank.
TuPilotModel build_pilot_model(const ReceivedBlocks& rx, const PilotSchedule& pilots, const AuResponse* au,
                               double noise_variance, const OfdmSetup& setup);

/// Same, from explicit observations (one JQ vector per training block).
TuPilotModel build_pilot_model(const std::vector<CVector>& y, const PilotSchedule& pilots, const AuResponse* au,
                               double noise_variance, const OfdmSetup& setup);

enum class TuEstimatorKind { LS, BWLU };

std::string to_string(TuEstimatorKind kind);

struct TuEstimate {
    TuEstimatorKind kind = TuEstimatorKind::LS;
    CMatrix taps;          // taps x J
    double variance = 0.0; // trace of the error covariance of the stacked taps
};

/// Per-antenna least squares, ignoring the aerial interference. The reported
/// variance is the exact one under the model disturbance, trace(A R A^H).
TuEstimate ls_estimate(const TuPilotModel& model);

/// Widely-linear unbiased estimate Theta Phi^{-1} sum_n Pi_n^H R_n^{-1} y~_n with
/// Phi = sum_n Pi_n^H R_n^{-1} Pi_n; variance trace(Theta Phi^{-1} Theta^H).
TuEstimate bwlu_estimate(const TuPilotModel& model);

/// The full gain matrix A of the estimate, taps*J x 2JQ N_train, acting on the
/// stacked augmented observations. A Pi = Theta by construction.
CMatrix bwlu_gain_matrix(const TuPilotModel& model);

/// Pi_n stacked over blocks.
CMatrix stacked_pi(const TuPilotModel& model);

/// Stacked g from a taps x J matrix.
CVector stack_taps(const CMatrix& taps);

}  // namespace sgnoma
