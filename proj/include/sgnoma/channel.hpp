#pragma once

// Channel realizations for the aerial (two-ray, Doppler) and terrestrial
// (static multipath) users, and exact synthesis of the received blocks.

#include "sgnoma/linalg.hpp"
#include "sgnoma/rng.hpp"
#include "sgnoma/waveform.hpp"

#include <array>
#include <vector>

namespace sgnoma {

/// Dimensions and fixed operators shared by every block of a run.
struct OfdmSetup {
    OfdmSetup(int subcarriers, int cp_length, int antennas, PulseModel pulse,
              TxWindow au_window = {}, TxWindow tu_window = {});

    int M;
    int L_cp;
    int P;
    int J;
    PulseModel pulse;
    CpOperators cp;
    FourierOperators fourier_m;
    FourierOperators fourier_p;
    TxWindow au_window;
    TxWindow tu_window;
    CMatrix au_precoder;  // diag(v_A) I_cp W_M
    CMatrix tu_precoder;
    CMatrix demod;        // W_M^H R_cp

    /// Taps of the aggregated terrestrial response, 0..L_cp.
    int tap_count() const { return L_cp + 1; }
};

/// (1, eta, ..., eta^{J-1}) with eta = exp(j pi sin(theta)), half-wavelength spacing.
CVector steering_vector(int antennas, double theta);
inline cd steering_phase(double theta) { return std::exp(kJ * (kPi * std::sin(theta))); }

struct AuChannelState {
    std::array<cd, 2> gain{};
    std::array<double, 2> delay{};    // chips
    std::array<double, 2> doppler{};  // f * T_s
    std::array<double, 2> aoa{};
    std::array<double, 2> aod{};
    double rician_k = 0.0;            // linear
    double power = 1.0;               // |g0|^2 + var(g1)
};

struct TuChannelState {
    std::vector<cd> gain;
    std::vector<double> delay;        // chips
    std::vector<double> aoa;
    std::vector<double> variance;
    CMatrix taps;                     // (L_cp + 1) x J aggregated response per antenna
};

/// Inverse-CDF draw from the truncated exponential delay power spectrum.
double exponential_delay(double u, double max_delay, double slope);

AuChannelState draw_au_channel(double rician_k, double max_doppler, double power, double max_delay,
                               double slope, Rng& rng);

TuChannelState draw_tu_channel(int paths, double max_delay, double slope, double power,
                               const OfdmSetup& setup, Rng& rng);

/// Shift all delays of both users so the earliest path arrives at zero.
void lock_to_min_delay(AuChannelState& au, TuChannelState& tu, const OfdmSetup& setup);

/// Recompute the per-antenna tap vectors from the path parameters.
void refresh_taps(TuChannelState& tu, const OfdmSetup& setup);

/// Per-ray operators of the aerial channel.
class AuResponse {
public:
    AuResponse(const AuChannelState& state, const OfdmSetup& setup);

    const AuChannelState& state() const { return state_; }
    int antennas() const { return J_; }

    /// D_k T_k^(b) Omega_A, the P x M pre-DFT map of ray k for the current (b=0)
    /// or previous (b=1) block.
    const CMatrix& pre_dft(int ray, int block) const { return pre_[ray][block]; }

    /// W_M^H R_cp D_k T_k^(0) Omega_A.
    const CMatrix& ray_matrix(int ray) const { return post_[ray]; }

    /// g_k eta_k^j exp(j 2 pi nu_k n), antenna index j starting at 0.
    cd weight(int ray, int antenna, int n) const;

    /// H_A,j[n].
    CMatrix effective(int antenna, int n) const;

    /// H_A[n], all antennas stacked (JM x M).
    CMatrix stacked(int n) const;

private:
    AuChannelState state_;
    int M_;
    int J_;
    std::array<std::array<CMatrix, 2>, 2> pre_;
    std::array<CMatrix, 2> post_;
    std::array<cd, 2> eta_;
};

/// sqrt(M) W_M^H L g for a tap vector g of length L_cp + 1.
CVector tap_frequency_response(const CVector& taps, const OfdmSetup& setup);

class TuResponse {
public:
    /// From the aggregated taps (estimated or true).
    TuResponse(const CMatrix& taps, const OfdmSetup& setup);
    /// From the path parameters; also builds the pre-DFT operators used for synthesis.
    TuResponse(const TuChannelState& state, const OfdmSetup& setup);

    /// Diagonal of M_T,j.
    const CVector& diagonal(int antenna) const { return mu_[antenna]; }

    /// M_T, all antennas stacked (JM x M).
    CMatrix stacked() const;

    /// sum_k g_k a_j(theta_k) T_k^(b) Omega_T. Only available when built from paths.
    const CMatrix& pre_dft(int antenna, int block) const { return pre_[antenna][block]; }
    bool has_paths() const { return !pre_.empty(); }

private:
    int M_;
    std::vector<CVector> mu_;
    std::vector<std::array<CMatrix, 2>> pre_;
};

/// Transmitted symbols of a coherence interval, one block per column, plus the
/// block sent just before it (which leaks into block 0 through the channel memory).
struct TransmitBlocks {
    CMatrix au;
    CMatrix tu;
    CVector au_prev;
    CVector tu_prev;

    int blocks() const { return int(au.cols()); }
};

/// Pre-DFT (P x N) and post-DFT (M x N) samples per antenna.
struct ReceivedBlocks {
    std::vector<CMatrix> pre;
    std::vector<CMatrix> post;
    double noise_variance = 0.0;

    int blocks() const { return int(post.empty() ? 0 : post.front().cols()); }
    int antennas() const { return int(post.size()); }
    /// y[n], all antennas stacked.
    CVector stacked(int n) const;
};

/// One received block.
struct ReceiveFrame {
    int n = 0;
    std::vector<CVector> pre;
    std::vector<CVector> post;
    double noise_variance = 0.0;

    CVector stacked() const;
    /// (y; y^*).
    CVector augmented() const;
};

ReceiveFrame synthesize_frame(int n, const CVector& s_au, const CVector& s_au_prev, const CVector& s_tu,
                              const CVector& s_tu_prev, const AuResponse& au, const TuResponse& tu,
                              double noise_variance, const OfdmSetup& setup, Rng& rng);

/// Whole coherence interval in one pass.
ReceivedBlocks synthesize_blocks(const TransmitBlocks& tx, const AuResponse& au, const TuResponse& tu,
                                 double noise_variance, const OfdmSetup& setup, Rng& rng);

struct EffectiveMatrices {
    std::vector<CMatrix> au;      // H_A,j[n], per antenna
    std::vector<CVector> tu;      // diagonal of M_T,j, per antenna
};

EffectiveMatrices effective_matrices(const AuResponse& au, const TuResponse& tu, int n);

}  // namespace sgnoma
