#include "sgnoma/tu_estimator.hpp"

#include "sgnoma/detector.hpp"

#include <Eigen/QR>

namespace sgnoma {

std::string to_string(TuEstimatorKind kind) { return kind == TuEstimatorKind::LS ? "ls" : "bwlu"; }

CMatrix TuPilotModel::stacked_pilot() const {
    CMatrix out(Q * blocks(), taps);
    for (int n = 0; n < blocks(); ++n) out.middleRows(n * Q, Q) = pilot[n];
    return out;
}

CMatrix TuPilotModel::pi(int n) const {
    const CMatrix k = kron(CMatrix::Identity(J, J), pilot[n]);
    CMatrix out = CMatrix::Zero(2 * k.rows(), 2 * k.cols());
    out.topLeftCorner(k.rows(), k.cols()) = k;
    out.bottomRightCorner(k.rows(), k.cols()) = k.conjugate();
    return out;
}

CMatrix TuPilotModel::augmented_interference(int n) const {
    const CMatrix& m = interference[n];
    CMatrix out(2 * m.rows(), m.cols());
    out << m, m.conjugate();
    return out;
}

CMatrix TuPilotModel::disturbance_covariance(int n) const {
    const int dim = 2 * J * Q;
    CMatrix r = noise_variance * CMatrix::Identity(dim, dim);
    if (!interference.empty()) {
        const CMatrix m = augmented_interference(n);
        r += m * m.adjoint();
    }
    return r;
}

CVector TuPilotModel::augmented(int n) const {
    CVector out(2 * y[n].size());
    out << y[n], y[n].conjugate();
    return out;
}

CMatrix pilot_matrix(const std::vector<int>& subcarriers, const CVector& values, const OfdmSetup& setup) {
    const CMatrix& w = setup.fourier_m.idft();
    const double scale = std::sqrt(double(setup.M));
    CMatrix out(Eigen::Index(subcarriers.size()), setup.tap_count());
    for (std::size_t q = 0; q < subcarriers.size(); ++q)
        out.row(Eigen::Index(q)) =
            scale * values(Eigen::Index(q)) * w.adjoint().row(subcarriers[q]).leftCols(setup.tap_count());
    return out;
}

TuPilotModel build_pilot_model(const std::vector<CVector>& y, const PilotSchedule& pilots, const AuResponse* au,
                               double noise_variance, const OfdmSetup& setup) {
    if (int(y.size()) != pilots.train_blocks())
        throw std::invalid_argument("build_pilot_model: one observation per training block expected");
    TuPilotModel m;
    m.J = setup.J;
    m.taps = setup.tap_count();
    m.Q = pilots.pilot_count();
    m.noise_variance = noise_variance;
    if (m.Q * pilots.train_blocks() < m.taps)
        throw RankDeficientError("build_pilot_model: fewer pilot observations than taps");
    for (int i = 0; i < pilots.train_blocks(); ++i) {
        m.pilot.push_back(pilot_matrix(pilots.subcarriers, pilots.values.col(i), setup));
        if (y[i].size() != m.J * m.Q) throw std::invalid_argument("build_pilot_model: observation size");
        m.y.push_back(y[i]);
        if (au) {
            const CMatrix h = au->stacked(pilots.blocks[i]);
            CMatrix rows(m.J * m.Q, setup.M);
            for (int j = 0; j < m.J; ++j)
                for (int q = 0; q < m.Q; ++q) rows.row(j * m.Q + q) = h.row(j * setup.M + pilots.subcarriers[q]);
            m.interference.push_back(rows);
        }
    }
    Eigen::ColPivHouseholderQR<CMatrix> qr(m.stacked_pilot());
    if (qr.rank() < m.taps) throw RankDeficientError("build_pilot_model: pilot matrix is rank deficient");
    return m;
}

TuPilotModel build_pilot_model(const ReceivedBlocks& rx, const PilotSchedule& pilots, const AuResponse* au,
                               double noise_variance, const OfdmSetup& setup) {
    std::vector<CVector> y;
    const int q = pilots.pilot_count();
    for (int i = 0; i < pilots.train_blocks(); ++i) {
        CVector v(rx.antennas() * q);
        for (int j = 0; j < rx.antennas(); ++j)
            for (int k = 0; k < q; ++k) v(j * q + k) = rx.post[j](pilots.subcarriers[k], pilots.blocks[i]);
        y.push_back(std::move(v));
    }
    return build_pilot_model(y, pilots, au, noise_variance, setup);
}

CVector stack_taps(const CMatrix& taps) { return taps.reshaped(); }

namespace {

CMatrix unstack(const CVector& g, int taps, int antennas) { return g.reshaped(taps, antennas); }

}  // namespace

TuEstimate ls_estimate(const TuPilotModel& model) {
    CMatrix gram = CMatrix::Zero(model.taps, model.taps);
    for (const CMatrix& p : model.pilot) gram += p.adjoint() * p;
    Eigen::LLT<CMatrix> llt(gram);
    if (llt.info() != Eigen::Success) throw RankDeficientError("ls_estimate: singular normal matrix");

    CMatrix rhs = CMatrix::Zero(model.taps, model.J);
    for (int n = 0; n < model.blocks(); ++n)
        for (int j = 0; j < model.J; ++j)
            rhs.col(j) += model.pilot[n].adjoint() * model.y[n].segment(j * model.Q, model.Q);

    TuEstimate est;
    est.kind = TuEstimatorKind::LS;
    est.taps = llt.solve(rhs);

    const CMatrix ginv = llt.solve(CMatrix::Identity(model.taps, model.taps));
    const CMatrix eye = CMatrix::Identity(model.J, model.J);
    double var = 0.0;
    for (int n = 0; n < model.blocks(); ++n) {
        const CMatrix a = kron(eye, ginv * model.pilot[n].adjoint());
        var += model.noise_variance * a.squaredNorm();
        if (!model.interference.empty()) var += (a * model.interference[n]).squaredNorm();
    }
    est.variance = var;
    return est;
}

namespace {

struct BwluParts {
    CMatrix phi_inv;                    // (2 taps J) square
    std::vector<CMatrix> weighted;      // R_n^{-1} Pi_n
};

BwluParts bwlu_parts(const TuPilotModel& model) {
    const int dim = 2 * model.taps * model.J;
    CMatrix phi = CMatrix::Zero(dim, dim);
    BwluParts parts;
    for (int n = 0; n < model.blocks(); ++n) {
        const CMatrix pi = model.pi(n);
        Eigen::LLT<CMatrix> r(regularized(model.disturbance_covariance(n)));
        if (r.info() != Eigen::Success) throw ConditioningError("bwlu: disturbance covariance factorization failed");
        CMatrix w = r.solve(pi);
        phi += pi.adjoint() * w;
        parts.weighted.push_back(std::move(w));
    }
    phi = 0.5 * (phi + phi.adjoint());
    Eigen::LLT<CMatrix> pl(phi);
    if (pl.info() != Eigen::Success) throw ConditioningError("bwlu: Pi^H R^{-1} Pi is not positive definite");
    parts.phi_inv = pl.solve(CMatrix::Identity(dim, dim));
    return parts;
}

}  // namespace

TuEstimate bwlu_estimate(const TuPilotModel& model) {
    const BwluParts parts = bwlu_parts(model);
    const int half = model.taps * model.J;
    CVector acc = CVector::Zero(2 * half);
    for (int n = 0; n < model.blocks(); ++n) acc += parts.weighted[n].adjoint() * model.augmented(n);
    const CVector g = (parts.phi_inv * acc).head(half);
    TuEstimate est;
    est.kind = TuEstimatorKind::BWLU;
    est.taps = unstack(g, model.taps, model.J);
    est.variance = parts.phi_inv.topLeftCorner(half, half).trace().real();
    return est;
}

CMatrix bwlu_gain_matrix(const TuPilotModel& model) {
    const BwluParts parts = bwlu_parts(model);
    const int half = model.taps * model.J;
    const int rows = 2 * model.J * model.Q;
    CMatrix a(half, rows * model.blocks());
    for (int n = 0; n < model.blocks(); ++n)
        a.middleCols(n * rows, rows) = parts.phi_inv.topRows(half) * parts.weighted[n].adjoint();
    return a;
}

CMatrix stacked_pi(const TuPilotModel& model) {
    const int rows = 2 * model.J * model.Q;
    CMatrix out(rows * model.blocks(), 2 * model.taps * model.J);
    for (int n = 0; n < model.blocks(); ++n) out.middleRows(n * rows, rows) = model.pi(n);
    return out;
}

}  // namespace sgnoma
