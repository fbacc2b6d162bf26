#include "sgnoma/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sgnoma {

namespace {
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
}

int bits_per_symbol(Constellation c) { return c == Constellation::BPSK ? 1 : 2; }

CVector draw_symbols(Constellation c, int count, Rng& rng) {
    if (count < 1) throw std::invalid_argument("draw_symbols: count must be >= 1");
    CVector s(count);
    for (int i = 0; i < count; ++i) {
        if (c == Constellation::BPSK) {
            s(i) = rng.integer(0, 1) ? 1.0 : -1.0;
        } else {
            const int b = rng.integer(0, 3);
            s(i) = cd((b & 1) ? -kInvSqrt2 : kInvSqrt2, (b & 2) ? -kInvSqrt2 : kInvSqrt2);
        }
    }
    return s;
}

cd quantize(Constellation c, cd z) {
    if (c == Constellation::BPSK) return z.real() >= 0.0 ? 1.0 : -1.0;
    return {z.real() >= 0.0 ? kInvSqrt2 : -kInvSqrt2, z.imag() >= 0.0 ? kInvSqrt2 : -kInvSqrt2};
}

int bit_errors(Constellation c, cd sent, cd decided) {
    // Gray mapping on QPSK puts one bit on each axis
    int errs = (sent.real() >= 0.0) != (decided.real() >= 0.0);
    if (c == Constellation::QPSK) errs += (sent.imag() >= 0.0) != (decided.imag() >= 0.0);
    return errs;
}

CMatrix delta_matrix(Constellation c, int /*block*/, int subcarriers) {
    if (c != Constellation::BPSK)
        throw std::invalid_argument("delta_matrix: circular constellation has no conjugation rule");
    return CMatrix::Identity(subcarriers, subcarriers);
}

CMatrix precoder(const TxWindow& window, const CpOperators& cp, const FourierOperators& fourier) {
    if (window.weights.size() != cp.block_length() || fourier.size() != cp.subcarriers())
        throw std::invalid_argument("precoder: dimension mismatch");
    return window.weights.asDiagonal() * (cp.insert().cast<cd>() * fourier.idft());
}

CVector modulate_block(const CVector& s, const TxWindow& window, const CpOperators& cp,
                       const FourierOperators& fourier) {
    if (s.size() != cp.subcarriers()) throw std::invalid_argument("modulate_block: symbol vector size");
    return precoder(window, cp, fourier) * s;
}

bool PilotSchedule::is_pilot_block(int n) const {
    return std::binary_search(blocks.begin(), blocks.end(), n);
}

PilotSchedule make_pilot_schedule(User user, Constellation c, int subcarriers, int pilot_count,
                                  int train_blocks, int coherence_blocks, double offset,
                                  std::uint64_t pilot_seed) {
    if (pilot_count < 1 || pilot_count > subcarriers)
        throw std::invalid_argument("pilot schedule: need 1 <= Q <= M");
    if (train_blocks < 1 || train_blocks > coherence_blocks)
        throw std::invalid_argument("pilot schedule: need 1 <= N_train <= N_coh");
    PilotSchedule s;
    s.user = user;
    for (int q = 0; q < pilot_count; ++q) s.subcarriers.push_back(int((long long)q * subcarriers / pilot_count));
    const double spacing = double(coherence_blocks) / train_blocks;
    for (int i = 0; i < train_blocks; ++i) {
        int n = int(std::floor((i + offset) * spacing));
        n = std::clamp(n, 0, coherence_blocks - 1);
        if (!s.blocks.empty() && n <= s.blocks.back()) n = s.blocks.back() + 1;
        if (n >= coherence_blocks) throw std::invalid_argument("pilot schedule: blocks do not fit");
        s.blocks.push_back(n);
    }
    Rng rng(pilot_seed);
    s.values = CMatrix(pilot_count, train_blocks);
    for (int i = 0; i < train_blocks; ++i) s.values.col(i) = draw_symbols(c, pilot_count, rng);
    return s;
}

void inject_pilots(const PilotSchedule& schedule, CMatrix& symbols) {
    for (int i = 0; i < schedule.train_blocks(); ++i)
        for (int q = 0; q < schedule.pilot_count(); ++q)
            symbols(schedule.subcarriers[q], schedule.blocks[i]) = schedule.values(q, i);
}

CMatrix extract_pilots(const PilotSchedule& schedule, const CMatrix& symbols) {
    CMatrix out(schedule.pilot_count(), schedule.train_blocks());
    for (int i = 0; i < schedule.train_blocks(); ++i)
        for (int q = 0; q < schedule.pilot_count(); ++q)
            out(q, i) = symbols(schedule.subcarriers[q], schedule.blocks[i]);
    return out;
}

}  // namespace sgnoma
