#include "phigamma/gamma_complexes.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "phigamma/errors.hpp"

namespace phigamma {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return a <= 0 ? 0 : (a + b - 1) / b; }

TermLayout lattice(int rank, std::int64_t pole, std::int64_t N) {
    TermLayout L;
    L.blocks.push_back({rank, -pole, N, 0});
    return L;
}

TermLayout concat(const TermLayout& a, const TermLayout& b) {
    TermLayout r = a;
    r.blocks.insert(r.blocks.end(), b.blocks.begin(), b.blocks.end());
    return r;
}


ZModMatrix block_diag(const ZModMatrix& a, const ZModMatrix& b) {
    Mat M = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    if (a.rows() && a.cols()) M.block(0, 0, a.rows(), a.cols()) = a.data();
    if (b.rows() && b.cols()) M.block(a.rows(), a.cols(), b.rows(), b.cols()) = b.data();
    return ZModMatrix(a.p(), a.s(), M);
}

// x / g for an exact polynomial g with unit constant term, known below cap
Series divide_by_unit_poly(const Series& x, const Series& g, std::int64_t cap) {
    const std::int64_t q = x.modulus();
    const std::int64_t inv0 = inverse_mod(g.coeff(0), q);
    const std::int64_t top = std::min(cap, x.prec());
    if (x.is_zero()) return Series(x.p(), x.K(), x.level(), top);
    const std::int64_t lo = x.val();
    if (top <= lo) return Series(x.p(), x.K(), x.level(), top);
    std::vector<std::int64_t> y(static_cast<std::size_t>(top - lo), 0);
    const auto& gc = g.coeffs();
    const std::int64_t gdeg = g.end() - 1;
    for (std::int64_t e = lo; e < top; ++e) {
        std::int64_t acc = x.coeff(e);
        for (std::int64_t i = 1; i <= gdeg && e - i >= lo; ++i) {
            std::int64_t gi = gc[static_cast<std::size_t>(i - g.val())];
            if (gi) acc = mod_reduce(acc - mulmod(gi, y[static_cast<std::size_t>(e - i - lo)], q), q);
        }
        y[static_cast<std::size_t>(e - lo)] = mulmod(acc, inv0, q);
    }
    return Series::from_coeffs(x.p(), x.K(), x.level(), lo, y, top);
}

bool is_short_poly(const Series& g) { return g.exact() && g.val() >= 0 && g.end() - g.val() <= 64; }

// sigma(pi)^k mod pi^N for k in [-K, N), where sigma(pi) = pi u with u a unit power series.
// Entry k + K of the result.
std::vector<Series> power_table(const Series& image, std::int64_t K, std::int64_t N) {
    const int p = image.p(), s = image.K();
    if (image.val() != 1) throw std::logic_error("power_table: image must have valuation one");
    std::vector<Series> out(static_cast<std::size_t>(K + N));
    const std::int64_t wide = N + K + 1;
    Series u = image.shifted(-1);
    Series one = Series::constant(p, s, 0, 1);
    // nonnegative powers
    Series cur = one;
    Series img = image.exact() ? image : image.truncated(wide);
    for (std::int64_t k = 0; k < N; ++k) {
        out[static_cast<std::size_t>(k + K)] = cur.truncated(N);
        cur = cur.mul(img, N);
    }
    if (K == 0) return out;
    // negative powers: pi^{-k} u^{-k}, with u^{-k} kept to precision N + K
    const bool divide = u.exact() && is_short_poly(u);
    Series uinv;
    if (!divide) uinv = u.exact() ? u.inverse(wide) : u.truncated(wide).inverse(wide);
    Series w = one;
    for (std::int64_t k = 1; k <= K; ++k) {
        if (divide)
            w = divide_by_unit_poly(w.exact() ? w.truncated(wide) : w, u, wide);
        else
            w = w.mul(uinv, wide);
        Series term = w.shifted(-k);
        if (term.prec() < N) throw PrecisionError("power_table: lost precision at pi^" + std::to_string(-k));
        out[static_cast<std::size_t>(K - k)] = term.truncated(N);
    }
    return out;
}

// phi(pi)^k exactly, k in [-K, N); entry k + K
std::vector<Series> phi_power_table(int p, int s, std::int64_t K, std::int64_t N) {
    Series pi = Series::monomial(p, s, 0, 1, 1);
    Series img = phi_A(pi);
    Series inv = img.inverse();
    if (!inv.exact()) throw std::logic_error("phi(pi) should have an exact Laurent inverse");
    std::vector<Series> out(static_cast<std::size_t>(K + N));
    Series cur = Series::constant(p, s, 0, 1);
    for (std::int64_t k = 0; k < N; ++k) {
        out[static_cast<std::size_t>(k + K)] = cur;
        cur = cur * img;
    }
    cur = Series::constant(p, s, 0, 1);
    for (std::int64_t k = 1; k <= K; ++k) {
        cur = cur * inv;
        out[static_cast<std::size_t>(K - k)] = cur;
    }
    return out;
}

// matrix of v -> A sigma(v) from lattice (rank, src) to (rank, dst) given sigma(pi)^k in `pw`
ZModMatrix operator_matrix(const SeriesMatrix& A, const std::vector<Series>& pw, std::int64_t pw_lo,
                           std::int64_t src, std::int64_t dst, std::int64_t N, int p, int s) {
    const int r = A.rows();
    const TermLayout S = lattice(r, src, N), T = lattice(r, dst, N);
    Mat M = Mat::Zero(T.dim(), S.dim());
    for (int i = 0; i < r; ++i)
        for (std::int64_t k = -src; k < N; ++k) {
            const Series& P = pw[static_cast<std::size_t>(k - pw_lo)];
            const int col = S.index(0, i, k);
            for (int j = 0; j < r; ++j) {
                const Series& a = A.at(j, i);
                if (a.is_zero() && a.exact()) continue;
                Series v = a.mul(P, N);
                if (v.prec() < N)
                    throw PrecisionError("module entry (" + std::to_string(j) + "," + std::to_string(i) +
                                         ") is not known to the precision the window needs");
                if (v.is_zero()) continue;
                if (v.val() < -dst) throw std::logic_error("operator_matrix: pole beyond the target lattice");
                const auto& c = v.coeffs();
                for (std::size_t t = 0; t < c.size(); ++t) {
                    std::int64_t e = v.val() + static_cast<std::int64_t>(t);
                    if (e >= N) break;
                    if (c[t]) M(T.index(0, j, e), col) = c[t];
                }
            }
        }
    return ZModMatrix(p, s, M);
}

ZModMatrix inclusion(int rank, std::int64_t src, std::int64_t dst, std::int64_t N, int p, int s) {
    TermLayout S = lattice(rank, src, N), T = lattice(rank, dst, N);
    ZModMatrix M(p, s, T.dim(), S.dim());
    auto rows = S.embedding_into(T);
    for (int c = 0; c < S.dim(); ++c) M.set(rows[static_cast<std::size_t>(c)], c, 1);
    return M;
}

ZModMatrix sub_lattice(const ZModMatrix& E, int rank, std::int64_t big, std::int64_t small, std::int64_t N) {
    TermLayout B = lattice(rank, big, N), S = lattice(rank, small, N);
    auto idx = S.embedding_into(B);
    Mat M(S.dim(), S.dim());
    for (int a = 0; a < S.dim(); ++a)
        for (int b = 0; b < S.dim(); ++b) M(a, b) = E(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    return ZModMatrix(E.p(), E.s(), M);
}

PAdicInt gamma_exponent(const PhiGammaModule& D) { return PAdicInt::exact(D.p, D.chi()); }

struct HerrPieces {
    std::int64_t M, big, N;
    ZModMatrix phiM;      // D_M -> D_big
    ZModMatrix gammaM;    // D_M -> D_M
    ZModMatrix gammaBig;  // D_big -> D_big
    ZModMatrix incl;      // D_M -> D_big
    ZModMatrix eBig, eM;  // projectors, empty without Delta
};

std::int64_t choose_truncation(const PhiGammaModule& D, std::int64_t requested) {
    const std::int64_t N0 = herr_truncation(D);
    if (requested != 0 && requested < N0)
        throw std::invalid_argument("truncation " + std::to_string(requested) + " is below the minimum " + std::to_string(N0));
    return requested == 0 ? N0 : requested;
}

HerrPieces herr_pieces(const PhiGammaModule& D, HerrMode mode, std::int64_t w, std::int64_t N) {
    if (D.relative) throw std::invalid_argument("herr_complex: module must be non-relative");
    if (w < 0) throw std::invalid_argument("window must be nonnegative");
    HerrPieces h;
    h.M = w;
    h.N = N;
    h.big = D.p * w + phi_pole_slack(D);
    h.phiM = phi_matrix(D, h.M, h.big, h.N);
    ZModMatrix gB = gamma_matrix(D, h.big, h.N);
    h.gammaBig = gB;
    h.gammaM = sub_lattice(gB, D.rank, h.big, h.M, h.N);
    h.incl = inclusion(D.rank, h.M, h.big, h.N, D.p, D.s);
    if (mode == HerrMode::QpWithDelta) {
        if (D.delta.empty()) throw std::invalid_argument("module declares no Delta action; use the torsion-free mode");
        h.eBig = delta_projector(D, h.big, h.N);
        h.eM = sub_lattice(h.eBig, D.rank, h.big, h.M, h.N);
    }
    return h;
}

}  // namespace

std::string to_string(HerrMode m) { return m == HerrMode::QpWithDelta ? "qp-delta" : "torsion-free"; }

HerrMode herr_mode_from_string(const std::string& s) {
    if (s == "qp-delta" || s == "delta") return HerrMode::QpWithDelta;
    if (s == "torsion-free" || s == "tf") return HerrMode::TorsionFree;
    throw std::invalid_argument("unknown base mode '" + s + "'");
}

int TermLayout::dim() const {
    int d = 0;
    for (auto& b : blocks) d += b.copies * static_cast<int>(b.hi - b.lo);
    return d;
}

int TermLayout::index(int block, int copy, std::int64_t e) const {
    int off = 0;
    for (int b = 0; b < block; ++b) off += blocks[static_cast<std::size_t>(b)].copies *
                                           static_cast<int>(blocks[static_cast<std::size_t>(b)].hi - blocks[static_cast<std::size_t>(b)].lo);
    const Block& B = blocks[static_cast<std::size_t>(block)];
    if (e < B.lo || e >= B.hi || copy < 0 || copy >= B.copies) throw std::out_of_range("TermLayout::index");
    return off + copy * static_cast<int>(B.hi - B.lo) + static_cast<int>(e - B.lo);
}

std::vector<int> TermLayout::embedding_into(const TermLayout& big) const {
    if (big.blocks.size() != blocks.size()) throw std::invalid_argument("embedding_into: block structures differ");
    std::vector<int> rows;
    rows.reserve(static_cast<std::size_t>(dim()));
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const Block& B = blocks[b];
        const Block& C = big.blocks[b];
        if (B.copies != C.copies || B.tag != C.tag || B.lo < C.lo || B.hi > C.hi)
            throw std::invalid_argument("embedding_into: window is not contained in the larger one");
        for (int c = 0; c < B.copies; ++c)
            for (std::int64_t e = B.lo; e < B.hi; ++e) rows.push_back(big.index(static_cast<int>(b), c, e));
    }
    return rows;
}

int GammaComplex::field_degree() const {
    if (kind == "semidirect") return 1;
    return mode == HerrMode::TorsionFree ? module.p - 1 : 1;
}

std::int64_t phi_pole_slack(const PhiGammaModule& D) { return D.Phi.pole_order() + (D.s - 1) * (D.p - 1); }

std::int64_t herr_truncation(const PhiGammaModule& D) { return ceil_div(D.Phi.pole_order(), D.p - 1) + D.s; }

ZModMatrix phi_matrix(const PhiGammaModule& D, std::int64_t src_pole, std::int64_t dst_pole, std::int64_t N) {
    auto pw = phi_power_table(D.p, D.s, src_pole, N);
    return operator_matrix(D.Phi, pw, -src_pole, src_pole, dst_pole, N, D.p, D.s);
}

ZModMatrix gamma_matrix(const PhiGammaModule& D, std::int64_t pole, std::int64_t N) {
    Series pi = Series::monomial(D.p, D.s, 0, 1, 1);
    Series img = gamma_A(pi, gamma_exponent(D));
    auto pw = power_table(img, pole, N);
    return operator_matrix(D.gamma().G, pw, -pole, pole, pole, N, D.p, D.s);
}

ZModMatrix delta_projector(const PhiGammaModule& D, std::int64_t pole, std::int64_t N) {
    const int p = D.p, s = D.s, r = D.rank;
    if (p % 2 == 0) throw std::invalid_argument("delta_projector: p must be odd");
    const std::int64_t q = ipow(p, s);
    const TermLayout L = lattice(r, pole, N);
    Mat E = Mat::Zero(L.dim(), L.dim());
    // delta = 1
    for (int i = 0; i < r; ++i)
        for (std::int64_t k = -pole; k < N; ++k) E(L.index(0, i, k), L.index(0, i, k)) = 1;
    const int digits = PAdicInt::max_digits(p);
    for (std::int64_t d = 2; d < p; ++d) {
        PAdicInt a = teichmuller_digit(p, d, digits);
        Series img;
        const std::int64_t wide = N + pole + 1;
        if (d == p - 1) {
            // [-1]: (1+pi)^{-1} - 1 = -pi/(1+pi)
            Series onep = Series::constant(p, s, 0, 1) + Series::monomial(p, s, 0, 1, 1);
            img = divide_by_unit_poly(Series::monomial(p, s, 0, 1, q - 1), onep, wide + 1);
        } else {
            img = one_plus_t_pow_minus_one(p, s, 0, a, wide + 1);
        }
        auto pw = power_table(img, pole, N);
        const std::int64_t omega = teichmuller_digit(p, d, s).residue;
        for (int i = 0; i < r; ++i) {
            const int n = D.delta.empty() ? 0 : D.delta[static_cast<std::size_t>(i)];
            const std::int64_t w = powmod(omega, ((n % (p - 1)) + (p - 1)) % (p - 1), q);
            for (std::int64_t k = -pole; k < N; ++k) {
                const Series& P = pw[static_cast<std::size_t>(k + pole)];
                if (P.is_zero()) continue;
                const int col = L.index(0, i, k);
                const auto& c = P.coeffs();
                for (std::size_t t = 0; t < c.size(); ++t) {
                    std::int64_t e = P.val() + static_cast<std::int64_t>(t);
                    if (e >= N) break;
                    if (c[t]) {
                        auto& ref = E(L.index(0, i, e), col);
                        ref = mod_reduce(ref + mulmod(w, c[t], q), q);
                    }
                }
            }
        }
    }
    ZModMatrix R(p, s, E);
    return R.scaled(inverse_mod(p - 1, q));
}

GammaComplex herr_complex(const PhiGammaModule& D, HerrMode mode, std::int64_t truncation) {
    if (D.relative) throw std::invalid_argument("herr_complex: module must be non-relative");
    if (mode == HerrMode::QpWithDelta && D.delta.empty())
        throw std::invalid_argument("module declares no Delta action; use the torsion-free mode");
    GammaComplex T;
    T.kind = "herr";
    T.module = D;
    T.mode = mode;
    T.truncation = choose_truncation(D, truncation);
    T.at_window = [D, mode, N = T.truncation](std::int64_t w) {
        HerrPieces h = herr_pieces(D, mode, w, N);
        const int p = D.p, s = D.s, r = D.rank;
        WindowComplex W;
        W.window = w;
        W.layouts = {lattice(r, h.M, h.N), concat(lattice(r, h.big, h.N), lattice(r, h.M, h.N)), lattice(r, h.big, h.N)};
        const ZModMatrix IM = ZModMatrix::identity(p, s, h.gammaM.rows());
        const ZModMatrix IB = ZModMatrix::identity(p, s, h.gammaBig.rows());
        ZModMatrix one_minus_phi = h.incl - h.phiM;
        ZModMatrix d0 = one_minus_phi.vstack(IM - h.gammaM);
        ZModMatrix d1 = (IB - h.gammaBig).hstack(one_minus_phi.scaled(-1));
        W.complex = make_complex(p, s, 0, {W.layouts[0].dim(), W.layouts[1].dim(), W.layouts[2].dim()}, {d0, d1});
        if (mode == HerrMode::QpWithDelta) W.projectors = {h.eM, block_diag(h.eBig, h.eM), h.eBig};
        return W;
    };
    return T;
}

GammaComplex gamma_koszul_complex(const PhiGammaModule& D, HerrMode mode, std::int64_t truncation) {
    if (D.relative) throw std::invalid_argument("gamma_koszul_complex: module must be non-relative");
    if (mode == HerrMode::QpWithDelta && D.delta.empty())
        throw std::invalid_argument("module declares no Delta action; use the torsion-free mode");
    GammaComplex K;
    K.kind = "gamma";
    K.module = D;
    K.mode = mode;
    K.truncation = choose_truncation(D, truncation);
    auto build = [D, mode, N = K.truncation](std::int64_t pole, const HerrPieces* h) {
        const int p = D.p, s = D.s, r = D.rank;
        ZModMatrix G = h ? (pole == h->M ? h->gammaM : h->gammaBig) : gamma_matrix(D, pole, N);
        WindowComplex W;
        W.window = pole;
        W.layouts = {lattice(r, pole, N), lattice(r, pole, N)};
        W.complex = make_complex(p, s, 0, {W.layouts[0].dim(), W.layouts[1].dim()},
                                 {G - ZModMatrix::identity(p, s, G.rows())});
        if (mode == HerrMode::QpWithDelta) {
            ZModMatrix E = h ? (pole == h->M ? h->eM : h->eBig) : delta_projector(D, pole, N);
            W.projectors = {E, E};
        }
        return W;
    };
    K.at_window = [build](std::int64_t w) { return build(w, nullptr); };
    K.phi_minus_one = [D, mode, build, N = K.truncation](std::int64_t w) {
        HerrPieces h = herr_pieces(D, mode, w, N);
        ChainMap f;
        f.source = build(h.M, &h).complex;
        f.target = build(h.big, &h).complex;
        ZModMatrix m = h.phiM - h.incl;
        f.f[0] = m;
        f.f[1] = m;
        return f;
    };
    return K;
}

GammaComplex phi_cone(const GammaComplex& K) {
    if (!K.phi_minus_one) throw std::invalid_argument("phi_cone: complex carries no phi");
    GammaComplex T;
    T.kind = "cone";
    T.module = K.module;
    T.mode = K.mode;
    T.truncation = K.truncation;
    const PhiGammaModule D = K.module;
    const HerrMode mode = K.mode;
    auto phi = K.phi_minus_one;
    T.at_window = [D, mode, phi, N = K.truncation](std::int64_t w) {
        ChainMap f = phi(w);
        WindowComplex W;
        W.window = w;
        W.complex = mapping_cone(f);
        const std::int64_t big = D.p * w + phi_pole_slack(D);
        const int r = D.rank;
        W.layouts = {lattice(r, w, N), concat(lattice(r, big, N), lattice(r, w, N)), lattice(r, big, N)};
        if (mode == HerrMode::QpWithDelta) {
            ZModMatrix eB = delta_projector(D, big, N);
            ZModMatrix eM = sub_lattice(eB, r, big, w, N);
            W.projectors = {eM, block_diag(eB, eM), eB};
        }
        return W;
    };
    return T;
}

// ---------------------------------------------------------------- semidirect

namespace {

Series level_to_t(const Series& x, int level) {
    // an element of E in pi-bar, rewritten in t = pi-bar^{1/p^level}
    Series y = x.regrid(level);
    std::int64_t prec = y.exact() ? kExact : y.prec();
    if (y.is_zero()) return Series(x.p(), x.K(), 0, prec);
    return Series::from_coeffs(x.p(), x.K(), 0, y.val(), y.coeffs(), prec);
}

TermLayout semidirect_layout(const PhiGammaModule& D, const SemidirectWindow& w) {
    TermLayout L;
    for (std::int64_t j = w.x_lo; j < w.x_hi; ++j) L.blocks.push_back({D.rank, -w.pole, w.prec, j});
    return L;
}

// v -> A sigma_j(v) on each x-block, where sigma_j(t^k) = pw_j[k]
ZModMatrix semidirect_operator(const PhiGammaModule& D, const SemidirectWindow& w, const SeriesMatrix& A,
                               const std::function<Series(std::int64_t j, std::int64_t k)>& image) {
    TermLayout L = semidirect_layout(D, w);
    const int r = D.rank;
    Mat M = Mat::Zero(L.dim(), L.dim());
    for (std::size_t b = 0; b < L.blocks.size(); ++b) {
        const std::int64_t j = L.blocks[b].tag;
        for (int i = 0; i < r; ++i)
            for (std::int64_t k = -w.pole; k < w.prec; ++k) {
                Series P = image(j, k);
                const int col = L.index(static_cast<int>(b), i, k);
                for (int l = 0; l < r; ++l) {
                    Series a = level_to_t(A.at(l, i), w.level);
                    Series v = a.mul(P, w.prec);
                    if (v.prec() < w.prec) throw PrecisionError("semidirect window exceeds the module precision");
                    if (v.is_zero()) continue;
                    if (v.val() < -w.pole) throw std::logic_error("semidirect operator leaves the window");
                    const auto& c = v.coeffs();
                    for (std::size_t t = 0; t < c.size(); ++t) {
                        std::int64_t e = v.val() + static_cast<std::int64_t>(t);
                        if (e >= w.prec) break;
                        if (c[t]) M(L.index(static_cast<int>(b), l, e), col) = c[t];
                    }
                }
            }
    }
    return ZModMatrix(D.p, 1, M);
}

ZModMatrix tilde_operator(const PhiGammaModule& D, const SemidirectWindow& w) {
    const GammaGenerator* gt = D.gamma_tilde();
    if (!gt) throw std::invalid_argument("semidirect complex needs a gamma_tilde generator");
    const int p = D.p;
    Series onet = Series::constant(p, 1, 0, 1) + Series::monomial(p, 1, 0, 1, 1);
    return semidirect_operator(D, w, gt->G, [&](std::int64_t j, std::int64_t k) {
        return Series::monomial(p, 1, 0, k, 1) * onet.pow(j * gt->a);
    });
}

ZModMatrix arith_operator(const PhiGammaModule& D, const SemidirectWindow& w) {
    const int p = D.p;
    Series t = Series::monomial(p, 1, 0, 1, 1);
    Series img = gamma_A(t, PAdicInt::exact(p, D.chi()));
    auto pw = power_table(img, w.pole, w.prec);
    return semidirect_operator(D, w, D.gamma().G,
                               [&](std::int64_t, std::int64_t k) { return pw[static_cast<std::size_t>(k + w.pole)]; });
}

// order of T, with T^i for i < order
std::vector<ZModMatrix> operator_orbit(const ZModMatrix& T) {
    std::vector<ZModMatrix> pw{ZModMatrix::identity(T.p(), T.s(), T.rows())};
    const int limit = 4096;
    while (static_cast<int>(pw.size()) <= limit) {
        ZModMatrix nx = pw.back() * T;
        if (nx == pw[0]) return pw;
        pw.push_back(nx);
    }
    throw PrecisionError("q_chi truncation not stabilized: gamma_tilde has no finite order on the window");
}

ZModMatrix sum_powers(const std::vector<ZModMatrix>& orbit, std::int64_t n) {
    const auto ord = static_cast<std::int64_t>(orbit.size());
    ZModMatrix full = ZModMatrix(orbit[0].p(), orbit[0].s(), orbit[0].rows(), orbit[0].cols());
    ZModMatrix part = full;
    for (std::int64_t i = 0; i < ord; ++i) {
        if (i < n % ord) part = part + orbit[static_cast<std::size_t>(i)];
        full = full + orbit[static_cast<std::size_t>(i)];
    }
    return full.scaled(n / ord) + part;
}

}  // namespace

ZModMatrix semidirect_q_chi(const PhiGammaModule& D, const SemidirectWindow& w) {
    return sum_powers(operator_orbit(tilde_operator(D, w)), D.chi());
}

GammaComplex semidirect_gamma_complex(const PhiGammaModule& D, const SemidirectWindow& win) {
    if (!D.relative) throw std::invalid_argument("semidirect_gamma_complex: module must be relative");
    if (win.x_lo < 0 || win.x_hi <= win.x_lo || win.prec <= -win.pole)
        throw std::invalid_argument("semidirect_gamma_complex: empty or negative window");
    GammaComplex T;
    T.kind = "semidirect";
    T.module = D;
    T.mode = HerrMode::TorsionFree;
    T.at_window = [D, win](std::int64_t w) {
        const int p = D.p;
        ZModMatrix Tt = tilde_operator(D, win);
        ZModMatrix G = arith_operator(D, win);
        auto orbit = operator_orbit(Tt);
        const std::int64_t chi = D.chi();
        ZModMatrix q = sum_powers(orbit, chi);
        const ZModMatrix& Tchi = orbit[static_cast<std::size_t>(chi % static_cast<std::int64_t>(orbit.size()))];
        ZModMatrix I = ZModMatrix::identity(p, 1, Tt.rows());
        ZModMatrix d0 = (Tt - I).vstack(G - I);
        ZModMatrix d1 = (G - q).hstack((Tchi - I).scaled(-1));
        if (!(d1 * d0).is_zero()) throw InvariantFailure("semidirect complex: d1 d0 != 0 (gamma_tilde relation fails on the window)");
        WindowComplex W;
        W.window = w;
        TermLayout L = semidirect_layout(D, win);
        W.layouts = {L, concat(L, L), L};
        W.complex = make_complex(p, 1, 0, {L.dim(), 2 * L.dim(), L.dim()}, {d0, d1});
        return W;
    };
    return T;
}

// ---------------------------------------------------------------- cohomology

std::vector<std::int64_t> WindowSchedule::windows() const {
    if (initial <= 0 || doublings < 0) throw std::invalid_argument("window schedule must be increasing and positive");
    std::vector<std::int64_t> w;
    std::int64_t c = initial;
    for (int i = 0; i <= doublings; ++i, c *= 2) w.push_back(c);
    return w;
}

nlohmann::json CohomologyReport::to_json() const {
    nlohmann::json j;
    j["format"] = "phigamma-cohomology 1";
    j["complex"] = kind;
    j["mode"] = mode;
    j["prime"] = p;
    j["power"] = s;
    j["dims"] = dims;
    j["profiles"] = profiles;
    j["euler"] = euler;
    j["expected_euler"] = expected_euler ? nlohmann::json(*expected_euler) : nlohmann::json(nullptr);
    j["verdict"] = verdict();
    j["note"] = "dimensions are accepted once three consecutive windows agree; no a priori window bound is known";
    nlohmann::json tr = nlohmann::json::array();
    for (auto& t : trace) tr.push_back({{"window", t.window}, {"dims", t.lengths}});
    j["trace"] = tr;
    if (les)
        j["cone_les"] = {{"exact", les->exact}, {"failing_degree", les->failing_degree},
                         {"failing_node", les->failing_node}, {"detail", les->detail}};
    return j;
}

std::string CohomologyReport::to_csv() const {
    std::ostringstream o;
    o << "degree,dim,profile\n";
    for (std::size_t n = 0; n < dims.size(); ++n) {
        o << n << ',' << dims[n] << ',';
        for (std::size_t k = 0; k < profiles[n].size(); ++k) o << (k ? " " : "") << profiles[n][k];
        o << '\n';
    }
    return o.str();
}

namespace {

ZModMatrix embed_rows(const ZModMatrix& Z, const std::vector<int>& rows, Eigen::Index big_rows) {
    Mat M = Mat::Zero(big_rows, Z.cols());
    for (Eigen::Index r = 0; r < Z.rows(); ++r) M.row(rows[static_cast<std::size_t>(r)]) = Z.data().row(r);
    return ZModMatrix(Z.p(), Z.s(), M);
}

struct Persistent {
    int length = 0;
    std::vector<std::int64_t> profile;
};

Persistent persistent_degree(const WindowComplex& S, const WindowComplex& B, int n) {
    const ChainComplexZ& cs = S.complex;
    const ChainComplexZ& cb = B.complex;
    Persistent out;
    if (cs.rank(n) == 0) return out;
    const auto k = static_cast<std::size_t>(n - cs.lowest);
    ZModMatrix Z = cs.cycles(n);
    if (!S.projectors.empty() && Z.cols()) Z = S.projectors[k] * Z;
    auto rows = S.layouts[k].embedding_into(B.layouts[static_cast<std::size_t>(n - cb.lowest)]);
    ZModMatrix Zb = embed_rows(Z, rows, cb.rank(n));
    ZModMatrix Bd = cb.boundaries(n);
    const int lb = Bd.cols() ? span_length(Bd) : 0;
    out.length = span_length(Bd.cols() ? Zb.hstack(Bd) : Zb) - lb;
    if (cs.s == 1)
        out.profile.assign(static_cast<std::size_t>(out.length), cs.p);
    else
        out.profile = module_profile(quotient_presentation(Zb, Bd));
    return out;
}

}  // namespace

CohomologyReport cohomology(const GammaComplex& T, const WindowSchedule& schedule, bool check_les) {
    if (T.kind == "gamma")
        throw std::invalid_argument("windows of the Gamma-Koszul complex are not acyclic modulo pi^N; use phi_cone");
    CohomologyReport R;
    R.kind = T.kind;
    R.mode = T.kind == "semidirect" ? "semidirect" : to_string(T.mode);
    R.p = T.module.p;
    R.s = T.module.s;
    auto ws = schedule.windows();
    std::map<std::int64_t, WindowComplex> cache;
    auto get = [&](std::int64_t w) -> const WindowComplex& {
        auto it = cache.find(w);
        if (it == cache.end()) it = cache.emplace(w, T.at_window(w)).first;
        if (!it->second.complex.d_squared_zero())
            throw InvariantFailure("d^2 != 0 on the " + T.kind + " complex at window " + std::to_string(w));
        return it->second;
    };
    std::vector<std::vector<std::int64_t>> last_profiles;
    for (std::int64_t w : ws) {
        const WindowComplex& S = get(w);
        const WindowComplex& B = get(2 * w);
        WindowDims wd;
        wd.window = w;
        last_profiles.clear();
        for (int n = S.complex.lowest; n <= S.complex.highest(); ++n) {
            Persistent pd = persistent_degree(S, B, n);
            wd.lengths.push_back(pd.length);
            last_profiles.push_back(pd.profile);
        }
        R.trace.push_back(wd);
        cache.erase(w);  // keep memory flat; 2w is reused as the next small window
    }
    R.dims = R.trace.back().lengths;
    R.profiles = last_profiles;
    R.euler = 0;
    for (std::size_t n = 0; n < R.dims.size(); ++n) R.euler += (n % 2 == 0 ? 1 : -1) * R.dims[n];
    if (R.trace.size() >= 3) {
        const std::size_t m = R.trace.size();
        R.stable = R.trace[m - 1].lengths == R.trace[m - 2].lengths && R.trace[m - 2].lengths == R.trace[m - 3].lengths;
    }
    const int len = T.module.rank * T.module.s;
    if (T.kind == "herr" || T.kind == "cone")
        R.expected_euler = -T.field_degree() * len;
    else if (T.kind == "semidirect")
        R.expected_euler = 0;
    if (check_les && (T.kind == "herr" || T.kind == "cone")) {
        GammaComplex K = gamma_koszul_complex(T.module, T.mode, T.truncation);
        R.les = cone_les_check(K.phi_minus_one(ws.front()));
    }
    return R;
}

// ---------------------------------------------------------------- explicit cocycle

namespace {

void require_trivial_rank_one(const PhiGammaModule& D) {
    if (D.relative || D.rank != 1 || D.s != 1)
        throw std::invalid_argument("explicit cocycle: needs a rank one module over F_p");
    Series one = Series::constant(D.p, 1, 0, 1);
    if (D.Phi.at(0, 0) != one || D.gamma().G.at(0, 0) != one)
        throw std::invalid_argument("explicit cocycle: only the trivial module is supported");
}

Series gamma_power(const Series& z, std::int64_t chi, std::int64_t n, std::int64_t cap) {
    if (n == 0) return z;
    const int p = z.p();
    const int digits = PAdicInt::max_digits(p);
    PAdicInt a = PAdicInt::exact(p, chi).pow(n, p);
    a.digits = std::min(a.digits, digits);
    return gamma_e(z, a, cap);
}

}  // namespace

bool is_herr_cocycle(const PhiGammaModule& D, const Series& x, const Series& y, std::int64_t cap) {
    if (D.rank != 1 || D.relative) throw std::invalid_argument("is_herr_cocycle: rank one non-relative modules only");
    const Series& Phi = D.Phi.at(0, 0);
    const Series& G = D.gamma().G.at(0, 0);
    Series gx = G.mul(gamma_A(x, PAdicInt::exact(D.p, D.chi()), cap), cap);
    Series py = Phi.mul(phi_A(y, cap), cap);
    Series lhs = x - gx, rhs = y - py;
    return (lhs - rhs).truncated(cap).is_zero();
}

CocycleEvaluator::CocycleEvaluator(const PhiGammaModule& D, const Series& x, const Series& y, std::int64_t cap)
    : D_(D), x_(x), y_(y), cap_(cap), chi_(D.chi()) {
    require_trivial_rank_one(D);
    if (!is_herr_cocycle(D, x, y, cap)) throw InvariantFailure("explicit cocycle: (x, y) is not a 1-cocycle");
    b_ = solve_as_general(x, kDefaultMaxDepth);
    const TowerPtr& t = b_.value.tower();
    if (b_.value.depth() > 1) throw DepthExceeded("explicit cocycle: primitive needs more than one layer");
    if (b_.value.depth() == 1) u_ = t->layers[0]->u.base();
}

Series CocycleEvaluator::shift(std::int64_t n) const {
    if (!u_) return Series(D_.p, 1, 0, kExact);
    if (n < 0) throw std::invalid_argument("sigma samples use nonnegative gamma exponents");
    if (static_cast<std::size_t>(n) >= shifts_.size()) shifts_.resize(static_cast<std::size_t>(n) + 1);
    auto& slot = shifts_[static_cast<std::size_t>(n)];
    if (!slot) {
        Series diff = gamma_power(*u_, chi_, n, cap_) - *u_;
        diff = diff.truncated(std::min(diff.prec(), cap_));
        if (diff.is_zero()) {
            slot = Series(D_.p, 1, 0, diff.prec());
        } else {
            ASSolution sol = solve_as_general(diff, kDefaultMaxDepth);
            if (sol.value.depth() != 0)
                throw InvariantFailure("gamma^" + std::to_string(n) + " does not extend to the Artin-Schreier layer");
            slot = sol.value.base();
        }
    }
    return *slot;
}

TowerElement CocycleEvaluator::act(const SigmaSample& s, const TowerElement& z) const {
    auto base = [&](const Series& c) { return gamma_power(c, chi_, s.n, cap_); };
    if (z.depth() == 0) return z.map_base(base);
    const TowerPtr& t = z.tower();
    TowerElement img = TowerElement::theta(t, 1, 1, 1) + TowerElement::from_base(t, shift(s.n)).embed(1) +
                       TowerElement::constant(t, 1, 1, s.j);
    return z.apply(base, {img});
}

Series CocycleEvaluator::act(const SigmaSample& s, const Series& z) const { return gamma_power(z, chi_, s.n, cap_); }

SigmaSample CocycleEvaluator::compose(const SigmaSample& a, const SigmaSample& b) const {
    SigmaSample r{a.n + b.n, 0};
    if (!u_) return r;
    Series e = shift(a.n) + gamma_power(shift(b.n), chi_, a.n, cap_) - shift(a.n + b.n);
    e = e.truncated(std::min(e.prec(), cap_));
    std::int64_t c = e.coeff(0);
    if (!(e - Series::constant(D_.p, 1, 0, c)).is_zero())
        throw InvariantFailure("composition of sampled automorphisms is not a translation");
    r.j = mod_reduce(a.j + b.j + c, D_.p);
    return r;
}

Series CocycleEvaluator::evaluate(const SigmaSample& s) const {
    Series sum(D_.p, 1, 0, kExact);
    Series term = y_;
    for (std::int64_t i = 0; i < s.n; ++i) {
        sum = sum + term;
        term = gamma_power(term, chi_, 1, cap_);
    }
    const TowerElement& b = b_.value;
    TowerElement diff = act(s, b) - b;
    TowerElement C = TowerElement::from_base(b.tower(), sum).embed(b.depth()) - diff;
    C = C.truncated(cap_);
    if (C.depth() == 0) return C.base();
    for (int k = 1; k < D_.p; ++k)
        if (!C.coords()[static_cast<std::size_t>(k)].is_zero())
            throw InvariantFailure("cocycle value does not descend to the base field");
    return C.coords()[0].base();
}

CocycleData explicit_cocycle(const PhiGammaModule& D, const Series& x, const Series& y,
                             const std::vector<SigmaSample>& samples, std::int64_t cap) {
    CocycleEvaluator ev(D, x, y, cap);
    CocycleData out;
    out.x = x;
    out.y = y;
    out.b = ev.primitive();
    out.samples = samples;
    for (auto& s : samples) out.values.push_back(ev.evaluate(s).truncated(cap));
    for (std::size_t a = 0; a < samples.size(); ++a)
        for (std::size_t b = 0; b < samples.size(); ++b) {
            SigmaSample st = ev.compose(samples[a], samples[b]);
            Series lhs = ev.evaluate(st);
            Series rhs = out.values[a] + ev.act(samples[a], out.values[b]);
            ++out.pairs_checked;
            if ((lhs - rhs).truncated(cap).is_zero()) continue;
            if (out.cocycle_identity) {
                out.cocycle_identity = false;
                out.failure = "C(st) != C(s) + s C(t) at s = (" + std::to_string(samples[a].n) + "," +
                              std::to_string(samples[a].j) + "), t = (" + std::to_string(samples[b].n) + "," +
                              std::to_string(samples[b].j) + ")";
            }
        }
    return out;
}

}  // namespace phigamma
