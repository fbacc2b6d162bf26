#include "sgnoma/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace sgnoma {

cd dirichlet(int n, double x) {
    if (n < 1) throw std::invalid_argument("dirichlet: order must be positive");
    const cd phase = std::exp(-kJ * kPi * double(n - 1) * x);
    const double den = std::sin(kPi * x);
    if (std::abs(den) < 1e-9) {
        // L'Hopital at integer x
        return phase * (double(n) * std::cos(kPi * x * n) / std::cos(kPi * x));
    }
    return phase * (std::sin(kPi * x * n) / den);
}

FourierOperators::FourierOperators(int n) : n_(n), idft_(n, n), dft_(n, n) {
    if (n < 1) throw std::invalid_argument("FourierOperators: size must be positive");
    const double scale = 1.0 / std::sqrt(double(n));
    for (int m = 0; m < n; ++m) {
        for (int p = 0; p < n; ++p) {
            // reduce the exponent mod n so large products keep full accuracy
            const int k = int((long long)m * p % n);
            idft_(m, p) = scale * std::exp(kJ * (2.0 * kPi * k / n));
        }
    }
    dft_ = idft_.adjoint();
}

CpOperators::CpOperators(int subcarriers, int cp_length)
    : m_(subcarriers), lcp_(cp_length),
      insert_(RMatrix::Zero(subcarriers + cp_length, subcarriers)),
      remove_(RMatrix::Zero(subcarriers, subcarriers + cp_length)) {
    if (m_ < 1 || lcp_ < 0 || lcp_ > m_)
        throw std::invalid_argument("CpOperators: need M >= 1 and 0 <= L_cp <= M");
    for (int q = 0; q < lcp_; ++q) insert_(q, m_ - lcp_ + q) = 1.0;
    for (int m = 0; m < m_; ++m) {
        insert_(lcp_ + m, m) = 1.0;
        remove_(m, lcp_ + m) = 1.0;
    }
}

ShiftMatrices::ShiftMatrices(int size) : forward(RMatrix::Zero(size, size)) {
    for (int p = 1; p < size; ++p) forward(p, p - 1) = 1.0;
    backward = forward.transpose();
}

PulseShape parse_pulse_shape(const std::string& name) {
    if (name == "delta") return PulseShape::Delta;
    if (name == "rect" || name == "rectangular") return PulseShape::Rectangular;
    if (name == "hann") return PulseShape::Hann;
    if (name == "rrc") return PulseShape::RootRaisedCosine;
    throw std::invalid_argument("unknown pulse shape: " + name);
}

std::string to_string(PulseShape shape) {
    switch (shape) {
        case PulseShape::Delta: return "delta";
        case PulseShape::Rectangular: return "rect";
        case PulseShape::Hann: return "hann";
        case PulseShape::RootRaisedCosine: return "rrc";
    }
    return "?";
}

PulseModel::PulseModel(PulseShape shape, int support_chips, double rolloff)
    : shape_(shape), support_(support_chips), rolloff_(rolloff) {
    if (support_ < 1) throw std::invalid_argument("PulseModel: support must be >= 1 chip");
    if (shape_ == PulseShape::Delta) support_ = 1;
    if (shape_ == PulseShape::RootRaisedCosine && (rolloff_ <= 0.0 || rolloff_ > 1.0))
        throw std::invalid_argument("PulseModel: rolloff must lie in (0, 1]");
}

namespace {

double root_raised_cosine(double t, double beta) {
    const double eps = 1e-9;
    if (std::abs(t) < eps) return 1.0 - beta + 4.0 * beta / kPi;
    if (std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < eps) {
        return beta / std::sqrt(2.0) *
               ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * beta)) +
                (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * beta)));
    }
    const double num = std::sin(kPi * t * (1.0 - beta)) + 4.0 * beta * t * std::cos(kPi * t * (1.0 + beta));
    const double den = kPi * t * (1.0 - 16.0 * beta * beta * t * t);
    return num / den;
}

}  // namespace

double PulseModel::operator()(double t) const {
    const double len = support_;
    switch (shape_) {
        case PulseShape::Delta:
            return std::abs(t) < 1e-12 ? 1.0 : 0.0;
        case PulseShape::Rectangular:
            return (t >= -1e-12 && t < len - 1e-12) ? 1.0 : 0.0;
        case PulseShape::Hann: {
            if (t < 0.0 || t >= len) return 0.0;
            const double s = std::sin(kPi * t / len);
            return s * s;
        }
        case PulseShape::RootRaisedCosine:
            if (t < 0.0 || t >= len) return 0.0;
            return root_raised_cosine(t - 0.5 * len, rolloff_);
    }
    return 0.0;
}

int PulseModel::last_tap(double delay) const {
    if (shape_ == PulseShape::Delta) return int(std::floor(delay + 1e-12));
    return int(std::ceil(delay + support_ - 1e-12)) - 1;
}

CVector PulseModel::spectrum(int p) const {
    CVector out = CVector::Zero(p);
    for (int k = 0; k < p; ++k) {
        for (int ell = 0; ell < std::min(p, support_ + 1); ++ell) {
            const double a = (*this)(double(ell));
            if (a == 0.0) continue;
            out(k) += a * std::exp(-kJ * (2.0 * kPi * double((long long)ell * k % p) / p));
        }
    }
    return out;
}

CMatrix circulant(const CVector& first_column) {
    const Eigen::Index n = first_column.size();
    CMatrix c(n, n);
    for (Eigen::Index p = 0; p < n; ++p)
        for (Eigen::Index q = 0; q < n; ++q) c(p, q) = first_column((p - q + n) % n);
    return c;
}

CVector circulant_eigenvalues(const CVector& first_column) {
    const int n = int(first_column.size());
    FourierOperators w(n);
    return std::sqrt(double(n)) * (w.dft() * first_column);
}

bool within_cyclic_prefix(const PulseModel& pulse, double delay_chips, int cp_length) {
    return delay_chips >= 0.0 && pulse.last_tap(delay_chips) <= cp_length;
}

RMatrix toeplitz_from_pulse(const PulseModel& pulse, double delay_chips, int block, int size,
                            int cp_length) {
    if (block != 0 && block != 1) throw std::invalid_argument("toeplitz_from_pulse: block must be 0 or 1");
    if (!within_cyclic_prefix(pulse, delay_chips, cp_length))
        throw std::invalid_argument("toeplitz_from_pulse: delayed pulse exceeds the cyclic prefix");
    RMatrix t = RMatrix::Zero(size, size);
    for (int p = 0; p < size; ++p) {
        for (int q = 0; q < size; ++q) {
            const int ell = block * size + p - q;
            if (ell < 0 || ell > cp_length) continue;
            t(p, q) = pulse.sample(ell, delay_chips);
        }
    }
    return t;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

RMatrix exchange_matrix(int m) {
    RMatrix j = RMatrix::Zero(2 * m, 2 * m);
    j.topRightCorner(m, m).setIdentity();
    j.bottomLeftCorner(m, m).setIdentity();
    return j;
}

}  // namespace sgnoma
