#pragma once

// Structured matrices and special functions shared by the transmit chain,
// the channel model and the receivers. Time is measured in chips (T_c = 1),
// so one OFDM block lasts P = M + L_cp chips.

#include <Eigen/Dense>

#include <complex>
#include <string>

namespace sgnoma {

using cd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cd kJ{0.0, 1.0};

/// Periodic sinc sin(pi x n) / sin(pi x) * exp(-j pi (n-1) x).
/// Integer x takes the limit branch when |sin(pi x)| < 1e-9.
cd dirichlet(int n, double x);

/// Unitary, symmetric n-point IDFT matrix W_n and its inverse W_n^H.
class FourierOperators {
public:
    explicit FourierOperators(int n);

    int size() const { return n_; }
    const CMatrix& idft() const { return idft_; }
    const CMatrix& dft() const { return dft_; }

private:
    int n_;
    CMatrix idft_;
    CMatrix dft_;
};

/// Cyclic-prefix insertion (P x M) and removal (M x P).
class CpOperators {
public:
    CpOperators(int subcarriers, int cp_length);

    int subcarriers() const { return m_; }
    int cp_length() const { return lcp_; }
    int block_length() const { return m_ + lcp_; }
    const RMatrix& insert() const { return insert_; }
    const RMatrix& remove() const { return remove_; }

private:
    int m_;
    int lcp_;
    RMatrix insert_;
    RMatrix remove_;
};

/// Forward shift F (ones on the first subdiagonal) and backward shift B = F^T.
struct ShiftMatrices {
    explicit ShiftMatrices(int size);

    RMatrix forward;
    RMatrix backward;
};

enum class PulseShape { Delta, Rectangular, Hann, RootRaisedCosine };

PulseShape parse_pulse_shape(const std::string& name);
std::string to_string(PulseShape shape);

/// Cascade of the DAC interpolator and the ADC anti-aliasing filter, psi(t),
/// supported on [0, support) chips.
class PulseModel {
public:
    PulseModel(PulseShape shape, int support_chips, double rolloff = 0.35);

    static PulseModel delta() { return {PulseShape::Delta, 1}; }

    PulseShape shape() const { return shape_; }
    int support() const { return support_; }
    double rolloff() const { return rolloff_; }

    /// psi(t) with t in chips.
    double operator()(double t) const;

    /// psi(ell * T_c - chi), the sampled response for fractional offset chi.
    double sample(int ell, double chi) const { return (*this)(ell - chi); }

    /// Largest tap index ell with psi(ell - delay) possibly nonzero.
    int last_tap(double delay) const;

    /// P-point DFT coefficients of psi(ell T_c), ell = 0..P-1.
    CVector spectrum(int p) const;

private:
    PulseShape shape_;
    int support_;
    double rolloff_;
};

/// Dense circulant matrix with the given first column.
CMatrix circulant(const CVector& first_column);

/// v = sqrt(P) W_P^H c, so that circulant(c) = W_P diag(v) W_P^H.
CVector circulant_eigenvalues(const CVector& first_column);

/// Block b in {0, 1} of the pulse-derived Toeplitz pair: entry (p, q) equals
/// psi(b P + p - q - delay). Throws std::invalid_argument when the delayed
/// pulse spills beyond tap L_cp, since the previous block would then leak past
/// the cyclic prefix.
RMatrix toeplitz_from_pulse(const PulseModel& pulse, double delay_chips, int block, int size,
                            int cp_length);

/// True when every nonzero tap of psi(ell - delay) sits at ell <= cp_length.
bool within_cyclic_prefix(const PulseModel& pulse, double delay_chips, int cp_length);

/// Kronecker product.
CMatrix kron(const CMatrix& a, const CMatrix& b);

/// Exchange matrix J_m = [[0, I_m], [I_m, 0]].
RMatrix exchange_matrix(int m);

}  // namespace sgnoma
