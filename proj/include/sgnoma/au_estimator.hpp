#pragma once

// Semi-blind estimation of the aerial channel: Doppler shifts and delays from
// conjugate cyclic statistics, then gains and arrival angles from pilots.

#include "sgnoma/channel.hpp"
#include "sgnoma/linalg.hpp"

#include <array>
#include <optional>
#include <vector>

namespace sgnoma {

/// (1/N) sum_n y[n] y^T[n-r] exp(-j 2 pi alpha n) for one antenna; y holds one
/// block per column and blocks outside 0..N-1 count as zero.
CMatrix estimate_cccm(const CMatrix& blocks, double alpha, int lag);

/// J(alpha) sampled on a uniform grid.
struct CycleSpectrum {
    std::vector<double> alpha;   // ascending, covers [-1/2, 1/2)
    std::vector<double> value;
    int blocks = 0;              // averaging length N

    /// Linear interpolation at an arbitrary cycle frequency (wrapped to [-1/2, 1/2)).
    double at(double a) const;
};

/// Exact objective sum_j sum_{r=-1,0,1} ||R^alpha[r]||_F^2 on a grid of
/// oversample * N points.
CycleSpectrum cycle_spectrum(const std::vector<CMatrix>& pre_blocks, int oversample = 4);

/// The same objective computed from Hann-tapered correlation sequences. Its
/// sidelobes are far lower, which keeps the weak peaks from drowning in the
/// leakage of the strong one. Used for peak detection.
CycleSpectrum tapered_cycle_spectrum(const std::vector<CMatrix>& pre_blocks, int oversample = 4);

struct SpectralPeak {
    double location;
    double height;
};

/// Detection level: median + floor_sigmas * 1.4826 * MAD of the spectrum, and
/// at least min_relative of the tallest excursion above the median. The floor of
/// a long average is nearly flat, so a fixed multiple of the median misses the
/// weak cross term of a faint second ray.
double peak_threshold(const CycleSpectrum& spectrum, double floor_sigmas = 7.0, double min_relative = 0.005);

/// Local maxima above peak_threshold, refined by a parabola through the log of
/// the three samples around each maximum. Sorted by height, highest first.
std::vector<SpectralPeak> find_peaks(const CycleSpectrum& spectrum);

struct DopplerResult {
    bool ok = false;
    std::array<double, 2> doppler{};
    std::vector<SpectralPeak> peaks;
    int used_peaks = 0;
};

/// Resolve the pair of normalized Doppler shifts from the peak list of the
/// tapered spectrum. The three cycle frequencies are 2 nu0, nu0 + nu1 and 2 nu1.
DopplerResult resolve_dopplers(const std::vector<SpectralPeak>& peaks, const CycleSpectrum& spectrum);

DopplerResult doppler_scan(const std::vector<CMatrix>& pre_blocks);

/// Diagonal of W_P^H Omega_A Omega_A^T W_P^*.
CVector upsilon_diagonal(const OfdmSetup& setup);

/// Column j: diagonal of W_P^H Phi_j W_P^*, Phi_j = sum_r exp(j 2 pi nu r) D^* R_j^{2 nu}[r] D^*.
CMatrix antenna_delay_statistics(const std::vector<CMatrix>& pre_blocks, double doppler, const OfdmSetup& setup);

/// The antenna sum of antenna_delay_statistics.
CVector delay_statistic(const std::vector<CMatrix>& pre_blocks, double doppler, const OfdmSetup& setup);

/// |sum_{p < P/2} d_p conj(Psi[p]^2 Upsilon_pp) exp(j 4 pi beta p / P)| at each beta (chips).
std::vector<double> delay_cost(const CVector& statistic, const OfdmSetup& setup, const std::vector<double>& betas);

/// sqrt(sum_j |<d_j, m(beta)>|^2) / ||m(beta)|| with the exact model
/// m_p(beta) = v_p(beta)^2 Upsilon_pp, v(beta) the P-point DFT of the sampled,
/// delayed pulse psi(ell - beta), ell = 0..L_cp. Unbiased for pulses that are
/// not band-limited at the chip rate, and the per-antenna combination has no
/// blind arrival angles.
std::vector<double> delay_cost_exact(const CMatrix& statistics, const OfdmSetup& setup,
                                     const std::vector<double>& betas);

enum class DelayCostKind { Approximate, Exact };

struct DelayResult {
    bool ok = false;
    double delay = 0.0;
};

/// Global maximum of the delay cost over [0, max_delay] on a grid of
/// grid_points, refined by a parabola through the neighbours.
DelayResult delay_scan(const std::vector<CMatrix>& pre_blocks, double doppler, const OfdmSetup& setup,
                       double max_delay, int grid_points = 1024,
                       DelayCostKind kind = DelayCostKind::Exact);

/// Expected CCCM structure at cycle frequency nu_k + nu_l, lags -1, 0, 1, for
/// unit gains and broadside arrival (the per-antenna coefficient
/// g_k g_l (eta_k eta_l)^j is factored out). For k != l both orderings of the
/// pair are included.
std::array<CMatrix, 3> cccm_model(const AuChannelState& state, const OfdmSetup& setup, int k, int l);

/// Joint delay fit over the three cycle frequencies 2 nu0, nu0 + nu1, 2 nu1:
/// maximizes sum over lines and antennas of |<R_j, M(tau0, tau1)>|^2 / ||M||^2.
/// The cross line carries g0 g1 rather than g1^2, which pins down the delay of a
/// faint second ray. Coarse grid of grid_points per axis, then a local grid.
std::array<double, 2> joint_delay_scan(const std::vector<CMatrix>& pre_blocks, const std::array<double, 2>& doppler,
                                       const OfdmSetup& setup, double max_delay, int grid_points = 61);

/// Pilot-aided least squares for the two ray gains and steering phases.
struct GainProblem {
    std::vector<CMatrix> y;          // per antenna, M x N_train
    std::array<CMatrix, 2> p;        // per ray, M x N_train
};

/// Known pilot responses exp(j 2 pi nu n) W^H R_cp D T^(0) Omega s[n] for the
/// delays and Dopplers in state (gains and angles ignored).
std::array<CMatrix, 2> pilot_responses(const AuChannelState& state, const OfdmSetup& setup,
                                       const std::vector<int>& blocks, const CMatrix& pilots);

struct LsCoefficients {
    std::array<cd, 2> c0;   // Lambda_{k,0}
    std::array<double, 2> c1;   // Lambda_{k,1}
    std::array<cd, 2> c2;   // Lambda_{k,2}
};

LsCoefficients ls_coefficients(const GainProblem& problem, cd eta0, cd eta1);

struct LsGains {
    std::array<cd, 2> gain{};
    double cost = 0.0;
    bool ok = false;
};

/// Closed-form gains for fixed steering phases and the residual cost.
LsGains ls_gains(const GainProblem& problem, cd eta0, cd eta1);

struct GainAoaResult {
    bool ok = false;
    std::array<cd, 2> gain{};
    std::array<cd, 2> eta{};
    std::array<double, 2> aoa{};
    double cost = 0.0;
};

/// Multistart grid over the two direction cosines followed by quasi-Newton
/// refinement on the torus.
GainAoaResult ls_gains_aoas(const GainProblem& problem, int grid = 64);

struct AuEstimate {
    bool ok = false;
    bool doppler_ok = false;
    bool delay_ok = false;
    bool gains_ok = false;
    AuChannelState state;
    std::vector<SpectralPeak> peaks;
};

struct AuEstimatorOptions {
    double max_delay = 3.0;
    int delay_grid = 1024;
    int aoa_grid = 64;
    bool joint_delay = true;   // refine with joint_delay_scan when two distinct Dopplers were found
};

/// Full chain. pre_blocks are the per-antenna pre-DFT samples of the whole
/// coherence interval, post the post-DFT ones; the schedule carries the pilots.
AuEstimate estimate_au_channel(const ReceivedBlocks& rx, const PilotSchedule& pilots, const OfdmSetup& setup,
                               const AuEstimatorOptions& options);

}  // namespace sgnoma
