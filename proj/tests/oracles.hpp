#pragma once

// Brute-force reference computations used by the tests.

#include "sgnoma/channel.hpp"
#include "sgnoma/linalg.hpp"

#include <cmath>

namespace oracle {

using sgnoma::cd;
using sgnoma::CMatrix;
using sgnoma::CVector;

inline double max_abs(const CMatrix& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

inline CMatrix random_matrix(int rows, int cols, sgnoma::Rng& rng) {
    CMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.complex_normal(1.0);
    return m;
}

/// Unnormalized DFT by direct summation: X_p = sum_q x_q exp(-j 2 pi p q / n).
inline CVector dft(const CVector& x) {
    const int n = int(x.size());
    CVector out = CVector::Zero(n);
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) out(p) += x(q) * std::polar(1.0, -2.0 * sgnoma::kPi * p * q / n);
    return out;
}

/// Transmitted chip sequence of one block: IDFT, cyclic prefix, unit window.
inline CVector chips(const CVector& s, int cp) {
    const int m = int(s.size());
    CVector x(m);
    for (int t = 0; t < m; ++t) {
        cd acc = 0.0;
        for (int k = 0; k < m; ++k) acc += s(k) * std::polar(1.0, 2.0 * sgnoma::kPi * k * t / m);
        x(t) = acc / std::sqrt(double(m));
    }
    CVector u(m + cp);
    u << x.tail(cp), x;
    return u;
}

}  // namespace oracle
