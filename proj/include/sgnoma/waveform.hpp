#pragma once

// Symbol sources, OFDM modulation and pilot scheduling.

#include "sgnoma/linalg.hpp"
#include "sgnoma/rng.hpp"

#include <string>
#include <vector>

namespace sgnoma {

enum class User { AU, TU };
enum class Constellation { BPSK, QPSK };

int bits_per_symbol(Constellation c);

/// i.i.d. equiprobable unit-energy constellation points.
CVector draw_symbols(Constellation c, int count, Rng& rng);

/// Minimum-distance decision.
cd quantize(Constellation c, cd z);

/// Number of differing bits between two constellation points under Gray mapping.
int bit_errors(Constellation c, cd sent, cd decided);

/// Diagonal matrix with s^* = Delta s for every valid symbol vector.
/// Throws for circular constellations, which have no such matrix.
CMatrix delta_matrix(Constellation c, int block, int subcarriers);

/// Per-sample transmit weights v[0..P-1].
struct TxWindow {
    RVector weights;

    static TxWindow rectangular(int block_length) { return {RVector::Ones(block_length)}; }
};

/// u = diag(v) I_cp W_M s.
CVector modulate_block(const CVector& s, const TxWindow& window, const CpOperators& cp,
                       const FourierOperators& fourier);

/// Omega = diag(v) I_cp W_M, the P x M precoder that modulate_block applies.
CMatrix precoder(const TxWindow& window, const CpOperators& cp, const FourierOperators& fourier);

/// Pilot positions of one user: subcarriers carrying pilots and the blocks in
/// which they are sent, plus the known pilot values (Q x N_train, column per block).
struct PilotSchedule {
    User user = User::AU;
    std::vector<int> subcarriers;
    std::vector<int> blocks;
    CMatrix values;

    int pilot_count() const { return int(subcarriers.size()); }
    int train_blocks() const { return int(blocks.size()); }
    bool is_pilot_block(int n) const;
};

/// Q subcarriers on a uniform comb, N_train blocks evenly spread over the
/// coherence interval with the first one at offset * spacing. Pilot values come
/// from their own seeded generator so both ends can rebuild them.
PilotSchedule make_pilot_schedule(User user, Constellation c, int subcarriers, int pilot_count,
                                  int train_blocks, int coherence_blocks, double offset,
                                  std::uint64_t pilot_seed);

/// Overwrite the pilot positions of a block-per-column symbol matrix.
void inject_pilots(const PilotSchedule& schedule, CMatrix& symbols);

/// Read back the pilot positions of a block-per-column symbol matrix.
CMatrix extract_pilots(const PilotSchedule& schedule, const CMatrix& symbols);

}  // namespace sgnoma
