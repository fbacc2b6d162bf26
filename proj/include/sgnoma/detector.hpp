#pragma once

// Widely-linear MMSE detection with symbol-level sorted successive
// interference cancellation, plus the linear and no-cancellation baselines.

#include "sgnoma/linalg.hpp"
#include "sgnoma/waveform.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace sgnoma {

enum class DetectorKind { WlMmseSic, LMmseSic, LMmse, WlMmse };

std::string to_string(DetectorKind kind);
DetectorKind parse_detector(const std::string& name);

struct ConditioningError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Returns R unchanged, or R + 1e-12 * tr(R)/n * I when its condition number
/// exceeds 1e12. Throws ConditioningError when R is not positive definite even
/// after the ridge.
CMatrix regularized(const CMatrix& r, bool* ridged = nullptr);

/// F = H^H (H H^H + R)^{-1}.
CMatrix wl_mmse_filter(const CMatrix& h, const CMatrix& r);

/// F = (H^H R^{-1} H + I)^{-1} H^H R^{-1}, the same filter via the inversion lemma.
CMatrix wl_mmse_filter_lemma(const CMatrix& h, const CMatrix& r);

/// SDR_m = 1 / [(I + H^H R^{-1} H)^{-1}]_mm - 1 by explicit inversion.
RVector sdr_direct(const CMatrix& h, const CMatrix& r);

/// Same quantity from the triangular factor of the QR decomposition of the
/// whitened channel stacked over the identity.
RVector sdr_per_symbol(const CMatrix& h, const CMatrix& r);

/// ytilde = H s + K s_T^* + noise with H = [H_A-tilde, M_T-tilde] (2JM x 2M) and
/// K = (0; M_T^*) (2JM x M). Columns 0..M-1 of H are AU symbols, M..2M-1 TU symbols.
struct AugmentedModel {
    CVector y;
    CMatrix h;
    CMatrix k;
    int M = 0;
};

/// Build the augmented model from y[n] (JM), H_A[n] (JM x M), M_T (JM x M) and Delta[n].
AugmentedModel build_augmented(const CVector& y, const CMatrix& h_au, const CMatrix& m_tu, const CMatrix& delta);

struct DetectionReport {
    CVector au;                 // hard decisions, M
    CVector tu;                 // hard decisions, M
    CVector soft;               // soft estimate at decision time, 2M, original order
    std::vector<int> order;     // original symbol index decided at each step
    std::vector<double> sdr;    // step-local maximum SDR
};

/// Literal SIC on the augmented model: dense filter, QR-based SDR, explicit
/// deflation of H and K. Slow; kept as the reference implementation.
DetectionReport reference_sic_detect(const AugmentedModel& model, double noise_variance,
                                     Constellation au = Constellation::BPSK,
                                     Constellation tu = Constellation::QPSK);

/// Production detector. Works on the Gram matrix of [H K] and a Woodbury form of
/// the disturbance inverse, updating the matched-filter output on cancellation.
/// y is y[n] (not augmented); the widely-linear kinds build the augmented
/// quantities internally.
DetectionReport detect(DetectorKind kind, const CVector& y, const CMatrix& h_au, const CMatrix& m_tu,
                       const CMatrix& delta, double noise_variance,
                       Constellation au = Constellation::BPSK, Constellation tu = Constellation::QPSK);

/// WL-MMSE-SIC on a prepared augmented model.
DetectionReport sls_sic_detect(const AugmentedModel& model, double noise_variance,
                               Constellation au = Constellation::BPSK,
                               Constellation tu = Constellation::QPSK);

}  // namespace sgnoma
