#pragma once

// Structural invariants of the signal model and the receivers, checked on
// random instances. Each check returns the measured value and its limit.

#include <cstdint>
#include <string>
#include <vector>

namespace sgnoma {

struct CheckResult {
    std::string name;
    double value = 0.0;
    double limit = 0.0;
    bool pass = false;
    std::string detail;
};

/// max |R_cp I_cp - I| for the default block geometry.
CheckResult check_cp_roundtrip();

/// Relative residual of circulant(c) = W_P diag(v) W_P^H on random first columns.
CheckResult check_circulant(std::uint64_t seed);

/// Relative residual between a synthesized noiseless block and H_A[n] s_A + M_T s_T.
CheckResult check_end_to_end(std::uint64_t seed);

/// Relative gap between the QR-based and the direct SDR.
CheckResult check_sdr(std::uint64_t seed);

/// Log-log slope of the CCCM norm versus N for terrestrial-only plus noise input.
CheckResult check_cccm_decay(std::uint64_t seed);

/// WL-MMSE-SIC symbol errors over every joint BPSK^2 x QPSK^2 combination on a
/// noiseless M = 2, L_cp = 1, J = 2 link with a random channel.
CheckResult check_small_instance(std::uint64_t seed);

std::vector<CheckResult> run_selftest(std::uint64_t seed);

}  // namespace sgnoma
