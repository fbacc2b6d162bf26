#include "sgnoma/detector.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace sgnoma {

std::string to_string(DetectorKind kind) {
    switch (kind) {
        case DetectorKind::WlMmseSic: return "wl-mmse-sic";
        case DetectorKind::LMmseSic: return "l-mmse-sic";
        case DetectorKind::LMmse: return "l-mmse";
        case DetectorKind::WlMmse: return "wl-mmse";
    }
    return "?";
}

DetectorKind parse_detector(const std::string& name) {
    if (name == "wl-mmse-sic") return DetectorKind::WlMmseSic;
    if (name == "l-mmse-sic") return DetectorKind::LMmseSic;
    if (name == "l-mmse") return DetectorKind::LMmse;
    if (name == "wl-mmse") return DetectorKind::WlMmse;
    throw std::invalid_argument("unknown detector: " + name);
}

CMatrix regularized(const CMatrix& r, bool* ridged) {
    if (ridged) *ridged = false;
    const CMatrix herm = 0.5 * (r + r.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(herm, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (hi <= 0.0) throw ConditioningError("disturbance covariance is not positive definite");
    if (lo > 0.0 && hi / lo <= 1e12) return herm;
    const double n = double(r.rows());
    const double ridge = 1e-12 * herm.trace().real() / n;
    if (lo + ridge <= 0.0) throw ConditioningError("disturbance covariance is indefinite");
    if (ridged) *ridged = true;
    return herm + ridge * CMatrix::Identity(r.rows(), r.cols());
}

CMatrix wl_mmse_filter(const CMatrix& h, const CMatrix& r) {
    const CMatrix x = h * h.adjoint() + regularized(r);
    return x.llt().solve(h).adjoint();
}

CMatrix wl_mmse_filter_lemma(const CMatrix& h, const CMatrix& r) {
    Eigen::LLT<CMatrix> rl(regularized(r));
    const CMatrix rinv_h = rl.solve(h);
    const CMatrix q = h.adjoint() * rinv_h + CMatrix::Identity(h.cols(), h.cols());
    return q.llt().solve(rinv_h.adjoint());
}

RVector sdr_direct(const CMatrix& h, const CMatrix& r) {
    const CMatrix rinv = regularized(r).inverse();
    const CMatrix q = CMatrix::Identity(h.cols(), h.cols()) + h.adjoint() * rinv * h;
    const CMatrix qinv = q.inverse();
    RVector s(h.cols());
    for (Eigen::Index m = 0; m < h.cols(); ++m) s(m) = 1.0 / qinv(m, m).real() - 1.0;
    return s;
}

RVector sdr_per_symbol(const CMatrix& h, const CMatrix& r) {
    const Eigen::Index n = h.cols();
    Eigen::LLT<CMatrix> chol(regularized(r));
    const CMatrix hw = chol.matrixL().solve(h);
    CMatrix stack(hw.rows() + n, n);
    stack << hw, CMatrix::Identity(n, n);
    Eigen::HouseholderQR<CMatrix> qr(stack);
    const CMatrix rx = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    const CMatrix rinv =
        rx.triangularView<Eigen::Upper>().solve(CMatrix::Identity(n, n));
    RVector s(n);
    for (Eigen::Index m = 0; m < n; ++m) s(m) = 1.0 / rinv.row(m).squaredNorm() - 1.0;
    return s;
}

AugmentedModel build_augmented(const CVector& y, const CMatrix& h_au, const CMatrix& m_tu, const CMatrix& delta) {
    const Eigen::Index jm = y.size();
    const int m = int(h_au.cols());
    AugmentedModel a;
    a.M = m;
    a.y.resize(2 * jm);
    a.y << y, y.conjugate();
    a.h = CMatrix::Zero(2 * jm, 2 * m);
    a.h.topLeftCorner(jm, m) = h_au;
    a.h.bottomLeftCorner(jm, m) = h_au.conjugate() * delta;
    a.h.topRightCorner(jm, m) = m_tu;
    a.k = CMatrix::Zero(2 * jm, m);
    a.k.bottomRows(jm) = m_tu.conjugate();
    return a;
}

namespace {

int argmax_first(const RVector& v) {
    int best = 0;
    for (int i = 1; i < v.size(); ++i)
        if (v(i) > v(best)) best = i;
    return best;
}

CMatrix inverse_pd(const CMatrix& q) {
    Eigen::LLT<CMatrix> llt(q);
    if (llt.info() == Eigen::Success) return llt.solve(CMatrix::Identity(q.rows(), q.cols()));
    return regularized(q).llt().solve(CMatrix::Identity(q.rows(), q.cols()));
}

struct SymbolMap {
    int M;
    Constellation au;
    Constellation tu;
    bool is_tu(int idx) const { return idx >= M; }
    Constellation constellation(int idx) const { return is_tu(idx) ? tu : au; }
};

// Sorted SIC on the Gram matrix g = V^H V and matched output b = V^H y of
// V = [symbol columns | conjugate-interference columns]. kcol[i] is the column
// of V carrying symbol i's conjugate (or -1).
//
// With Z = g/s2 + I over the active columns, the S block of Z^{-1} equals
// (I + H^H R^{-1} H)^{-1} for R = s2 I + K K^H, and Z^{-1} b / s2 restricted to
// S is the MMSE output. Cancelling a symbol removes its column (and its
// conjugate column) from V, i.e. takes a principal submatrix of Z, whose
// inverse follows from Z^{-1} by a Schur-complement downdate.
DetectionReport gram_sic(const CMatrix& g, CVector b, const std::vector<int>& kcol, double s2,
                         bool cancel, const SymbolMap& map) {
    const int n_sym = 2 * map.M;
    std::vector<int> active;   // symbols first (ascending), then conjugate columns
    for (int i = 0; i < n_sym; ++i) active.push_back(i);
    for (int i = 0; i < n_sym; ++i)
        if (kcol[i] >= 0) active.push_back(kcol[i]);
    int n_active_sym = n_sym;

    const int na = int(active.size());
    CMatrix z(na, na);
    for (int p = 0; p < na; ++p)
        for (int q = 0; q < na; ++q) z(p, q) = g(active[p], active[q]) / s2;
    z += CMatrix::Identity(na, na);
    z = 0.5 * (z + z.adjoint());
    CMatrix y = inverse_pd(z);

    DetectionReport rep;
    rep.au = CVector::Zero(map.M);
    rep.tu = CVector::Zero(map.M);
    rep.soft = CVector::Zero(n_sym);

    auto decide = [&](int idx, cd zz) {
        const cd s = quantize(map.constellation(idx), zz);
        if (map.is_tu(idx)) rep.tu(idx - map.M) = s;
        else rep.au(idx) = s;
        rep.soft(idx) = zz;
        return s;
    };

    while (n_active_sym > 0) {
        const int n = int(active.size());
        CVector c(n);
        for (int p = 0; p < n; ++p) c(p) = b(active[p]) / s2;
        const CVector x = y.topRows(n_active_sym) * c;
        RVector sdr(n_active_sym);
        for (int p = 0; p < n_active_sym; ++p) sdr(p) = 1.0 / y(p, p).real() - 1.0;

        if (!cancel) {
            for (int p = 0; p < n_active_sym; ++p) {
                decide(active[p], x(p));
                rep.order.push_back(active[p]);
                rep.sdr.push_back(sdr(p));
            }
            break;
        }

        const int best = argmax_first(sdr);
        const int idx = active[best];
        const cd s = decide(idx, x(best));
        rep.order.push_back(idx);
        rep.sdr.push_back(sdr(best));

        b -= s * g.col(idx);
        std::vector<int> drop = {best};
        if (kcol[idx] >= 0) {
            b -= std::conj(s) * g.col(kcol[idx]);
            drop.push_back(int(std::find(active.begin(), active.end(), kcol[idx]) - active.begin()));
        }

        std::vector<int> keep;
        for (int p = 0; p < n; ++p)
            if (std::find(drop.begin(), drop.end(), p) == drop.end()) keep.push_back(p);
        const int nd = int(drop.size());
        const int nk = int(keep.size());
        CMatrix ydd(nd, nd), ykd(nk, nd), ykk(nk, nk);
        for (int p = 0; p < nd; ++p)
            for (int q = 0; q < nd; ++q) ydd(p, q) = y(drop[p], drop[q]);
        for (int p = 0; p < nk; ++p) {
            for (int q = 0; q < nd; ++q) ykd(p, q) = y(keep[p], drop[q]);
            for (int q = 0; q < nk; ++q) ykk(p, q) = y(keep[p], keep[q]);
        }
        y = ykk - ykd * ydd.inverse() * ykd.adjoint();
        std::vector<int> next;
        for (int p : keep) next.push_back(active[p]);
        active.swap(next);
        --n_active_sym;
    }
    return rep;
}

}  // namespace

DetectionReport sls_sic_detect(const AugmentedModel& model, double noise_variance, Constellation au,
                               Constellation tu) {
    const int m = model.M;
    CMatrix v(model.h.rows(), 3 * m);
    v << model.h, model.k;
    const CMatrix g = v.adjoint() * v;
    const CVector b = v.adjoint() * model.y;
    std::vector<int> kcol(2 * m, -1);
    for (int t = 0; t < m; ++t) kcol[m + t] = 2 * m + t;
    return gram_sic(g, b, kcol, noise_variance, true, {m, au, tu});
}

DetectionReport detect(DetectorKind kind, const CVector& y, const CMatrix& h_au, const CMatrix& m_tu,
                       const CMatrix& delta, double noise_variance, Constellation au, Constellation tu) {
    const int m = int(h_au.cols());
    if (kind == DetectorKind::WlMmseSic || kind == DetectorKind::WlMmse) {
        const AugmentedModel a = build_augmented(y, h_au, m_tu, delta);
        CMatrix v(a.h.rows(), 3 * m);
        v << a.h, a.k;
        const CMatrix g = v.adjoint() * v;
        const CVector b = v.adjoint() * a.y;
        std::vector<int> kcol(2 * m, -1);
        for (int t = 0; t < m; ++t) kcol[m + t] = 2 * m + t;
        return gram_sic(g, b, kcol, noise_variance, kind == DetectorKind::WlMmseSic, {m, au, tu});
    }
    CMatrix v(y.size(), 2 * m);
    v << h_au, m_tu;
    const CMatrix g = v.adjoint() * v;
    const CVector b = v.adjoint() * y;
    return gram_sic(g, b, std::vector<int>(2 * m, -1), noise_variance, kind == DetectorKind::LMmseSic,
                    {m, au, tu});
}

DetectionReport reference_sic_detect(const AugmentedModel& model, double noise_variance, Constellation au,
                                     Constellation tu) {
    const int m = model.M;
    const SymbolMap map{m, au, tu};
    CVector y = model.y;
    CMatrix h = model.h;
    CMatrix k = model.k;
    std::vector<int> cols(2 * m);
    for (int i = 0; i < 2 * m; ++i) cols[i] = i;
    std::vector<int> kcols(m);
    for (int t = 0; t < m; ++t) kcols[t] = t;

    DetectionReport rep;
    rep.au = CVector::Zero(m);
    rep.tu = CVector::Zero(m);
    rep.soft = CVector::Zero(2 * m);
    const Eigen::Index rows = h.rows();

    while (!cols.empty()) {
        const CMatrix r = k * k.adjoint() + noise_variance * CMatrix::Identity(rows, rows);
        const CVector z = wl_mmse_filter(h, r) * y;
        const RVector sdr = sdr_per_symbol(h, r);
        const int best = argmax_first(sdr);
        const int idx = cols[best];
        const cd s = quantize(map.constellation(idx), z(best));
        if (map.is_tu(idx)) rep.tu(idx - m) = s;
        else rep.au(idx) = s;
        rep.soft(idx) = z(best);
        rep.order.push_back(idx);
        rep.sdr.push_back(sdr(best));

        y -= s * h.col(best);
        if (map.is_tu(idx)) {
            const auto it = std::find(kcols.begin(), kcols.end(), idx - m);
            const int kpos = int(it - kcols.begin());
            y -= std::conj(s) * k.col(kpos);
            CMatrix kk(rows, k.cols() - 1);
            kk << k.leftCols(kpos), k.rightCols(k.cols() - kpos - 1);
            k = kk;
            kcols.erase(it);
        }
        CMatrix hh(rows, h.cols() - 1);
        hh << h.leftCols(best), h.rightCols(h.cols() - best - 1);
        h = hh;
        cols.erase(cols.begin() + best);
    }
    return rep;
}

}  // namespace sgnoma
