#include "phigamma/homotopy_tools.hpp"

#include <algorithm>
#include <stdexcept>

#include "phigamma/errors.hpp"

namespace phigamma {

namespace {

ZModMatrix zeros(int p, int s, Eigen::Index r, Eigen::Index c) { return ZModMatrix(p, s, r, c); }

int len(const ZModMatrix& A) { return span_length(A); }

ZModMatrix cols_or_empty(const ZModMatrix& A, const ZModMatrix& K) {
    if (K.cols() == 0) return zeros(A.p(), A.s(), A.rows(), 0);
    return A * K;
}

// columns c of A with A c in span(R), returned as A c
ZModMatrix preimage_in(const ZModMatrix& A, const ZModMatrix& image_of_A, const ZModMatrix& R) {
    if (A.cols() == 0) return A;
    ZModMatrix M = R.cols() ? image_of_A.hstack(R) : image_of_A;
    ZModMatrix K = kernel_generators(M);
    return cols_or_empty(A, K.block(0, 0, A.cols(), K.cols()));
}

}  // namespace

int ChainComplexZ::rank(int n) const {
    if (n < lowest || n > highest()) return 0;
    return ranks[static_cast<std::size_t>(n - lowest)];
}

ZModMatrix ChainComplexZ::differential(int n) const {
    if (n < lowest || n >= highest()) return zeros(p, s, rank(n + 1), rank(n));
    return d[static_cast<std::size_t>(n - lowest)];
}

bool ChainComplexZ::d_squared_zero() const {
    for (int n = lowest; n + 1 < highest(); ++n)
        if (!(differential(n + 1) * differential(n)).is_zero()) return false;
    return true;
}

ZModMatrix ChainComplexZ::cycles(int n) const {
    if (rank(n) == 0) return zeros(p, s, 0, 0);
    ZModMatrix D = differential(n);
    if (D.rows() == 0) return ZModMatrix::identity(p, s, rank(n));
    return kernel_generators(D);
}

ZModMatrix ChainComplexZ::boundaries(int n) const { return differential(n - 1); }

int ChainComplexZ::cohomology_length(int n) const {
    if (rank(n) == 0) return 0;
    return len(cycles(n)) - len(boundaries(n));
}

std::vector<std::int64_t> ChainComplexZ::cohomology_profile(int n) const {
    if (rank(n) == 0) return {};
    if (s == 1) return std::vector<std::int64_t>(static_cast<std::size_t>(cohomology_length(n)), p);
    return module_profile(quotient_presentation(cycles(n), boundaries(n)));
}

ChainComplexZ make_complex(int p, int s, int lowest, const std::vector<int>& ranks, const std::vector<ZModMatrix>& d) {
    ChainComplexZ C;
    C.p = p;
    C.s = s;
    C.lowest = lowest;
    C.ranks = ranks;
    C.d = d;
    if (d.size() + 1 != ranks.size() && !(ranks.empty() && d.empty()))
        throw std::invalid_argument("make_complex: need one differential between consecutive terms");
    for (std::size_t k = 0; k < d.size(); ++k)
        if (d[k].rows() != ranks[k + 1] || d[k].cols() != ranks[k])
            throw std::invalid_argument("make_complex: differential " + std::to_string(k) + " has the wrong shape");
    return C;
}

ZModMatrix ChainMap::at(int n) const {
    auto it = f.find(n);
    if (it != f.end()) return it->second;
    return zeros(source.p, source.s, target.rank(n), source.rank(n));
}

bool ChainMap::is_chain_map() const {
    const int lo = std::min(source.lowest, target.lowest) - 1;
    const int hi = std::max(source.highest(), target.highest()) + 1;
    for (int n = lo; n <= hi; ++n) {
        ZModMatrix lhs = target.differential(n) * at(n);
        ZModMatrix rhs = at(n + 1) * source.differential(n);
        if (lhs != rhs) return false;
    }
    return true;
}

ChainComplexZ shift(const ChainComplexZ& C, int k) {
    ChainComplexZ r = C;
    r.lowest = C.lowest - k;
    return r;
}

ChainComplexZ mapping_cone(const ChainMap& f) {
    if (!f.is_chain_map()) throw InvariantFailure("mapping_cone: input is not a chain map");
    const ChainComplexZ& A = f.source;
    const ChainComplexZ& B = f.target;
    const int p = A.p, s = A.s;
    const int lo = std::min(A.lowest, B.lowest + 1);
    const int hi = std::max(A.highest(), B.highest() + 1);
    std::vector<int> ranks;
    for (int n = lo; n <= hi; ++n) ranks.push_back(B.rank(n - 1) + A.rank(n));
    std::vector<ZModMatrix> d;
    for (int n = lo; n < hi; ++n) {
        const int b0 = B.rank(n - 1), a0 = A.rank(n), b1 = B.rank(n), a1 = A.rank(n + 1);
        Mat M = Mat::Zero(b1 + a1, b0 + a0);
        if (b1 && b0) M.block(0, 0, b1, b0) = B.differential(n - 1).data();
        if (b1 && a0) M.block(0, b0, b1, a0) = f.at(n).scaled(n % 2 == 0 ? 1 : -1).data();
        if (a1 && a0) M.block(b1, b0, a1, a0) = A.differential(n).data();
        d.emplace_back(p, s, M);
    }
    return make_complex(p, s, lo, ranks, d);
}

LesVerdict les_check(const ChainMap& i, const ChainMap& q) {
    const ChainComplexZ& A = i.source;
    const ChainComplexZ& B = i.target;
    const ChainComplexZ& C = q.target;
    const int p = B.p, s = B.s;
    LesVerdict v;
    auto fail = [&v](int n, const std::string& node, const std::string& why) {
        v.exact = false;
        v.failing_degree = n;
        v.failing_node = node;
        v.detail = why;
        return v;
    };
    const int lo = std::min({A.lowest, B.lowest, C.lowest});
    const int hi = std::max({A.highest(), B.highest(), C.highest()});
    for (int n = lo - 1; n <= hi; ++n) {
        for (const auto* X : {&A, &B, &C})
            if (!(X->differential(n + 1) * X->differential(n)).is_zero())
                return fail(n, "complex", std::string("d^2 != 0 on ") + (X == &A ? "A" : X == &B ? "B" : "C"));
        if (B.differential(n) * i.at(n) != i.at(n + 1) * A.differential(n)) return fail(n, "chain", "i is not a chain map");
        if (C.differential(n) * q.at(n) != q.at(n + 1) * B.differential(n)) return fail(n, "chain", "q is not a chain map");
    }
    for (int n = lo; n <= hi; ++n) {
        ZModMatrix in = i.at(n), qn = q.at(n);
        if (!(qn * in).is_zero()) return fail(n, "termwise", "q o i != 0");
        if (len(in) != s * A.rank(n)) return fail(n, "termwise", "i not injective");
        if (len(qn) != s * C.rank(n)) return fail(n, "termwise", "q not surjective");
        if (B.rank(n) && len(kernel_generators(qn.rows() ? qn : zeros(p, s, 0, B.rank(n)))) != len(in))
            return fail(n, "termwise", "im i != ker q");
    }

    auto mat = [&](const ZModMatrix& M, int rows) { return M.rows() == rows ? M : zeros(p, s, rows, 0); };

    for (int n = lo; n <= hi; ++n) {
        // at H^n(B)
        if (B.rank(n)) {
            ZModMatrix ZA = mat(A.cycles(n), A.rank(n)), ZB = mat(B.cycles(n), B.rank(n));
            ZModMatrix BB = B.boundaries(n), BC = C.boundaries(n);
            ZModMatrix I = cols_or_empty(i.at(n), ZA);
            if (BB.cols()) I = I.cols() ? I.hstack(BB) : BB;
            ZModMatrix K = C.rank(n) ? preimage_in(ZB, q.at(n) * ZB, BC) : ZB;
            if (!span_contains(K, I) || len(I) != len(K)) return fail(n, "H(B)", "im i_* != ker q_*");
        }
        // at H^n(C), and at H^{n+1}(A) through the connecting map
        if (C.rank(n)) {
            ZModMatrix ZC = mat(C.cycles(n), C.rank(n));
            ZModMatrix X = zeros(p, s, A.rank(n + 1), 0);
            if (ZC.cols()) {
                auto Y = solve_linear(q.at(n), ZC);
                if (!Y) return fail(n, "H(C)", "cocycle does not lift");
                ZModMatrix dY = B.differential(n) * *Y;
                if (A.rank(n + 1)) {
                    auto Xs = solve_linear(i.at(n + 1), dY);
                    if (!Xs) return fail(n, "H(C)", "d(lift) not in the image of i");
                    X = *Xs;
                } else if (!dY.is_zero()) {
                    return fail(n, "H(C)", "d(lift) not in the image of i");
                }
            }
            ZModMatrix ZB = mat(B.cycles(n), B.rank(n));
            ZModMatrix Q = cols_or_empty(q.at(n), ZB);
            ZModMatrix BC = C.boundaries(n);
            if (BC.cols()) Q = Q.cols() ? Q.hstack(BC) : BC;
            ZModMatrix BA1 = A.boundaries(n + 1);
            ZModMatrix K = A.rank(n + 1) ? preimage_in(ZC, X, BA1) : ZC;
            if (!span_contains(K, Q) || len(Q) != len(K)) return fail(n, "H(C)", "im q_* != ker delta");
            if (A.rank(n + 1)) {
                ZModMatrix Dl = X;
                if (BA1.cols()) Dl = Dl.cols() ? Dl.hstack(BA1) : BA1;
                ZModMatrix ZA1 = mat(A.cycles(n + 1), A.rank(n + 1));
                ZModMatrix KA = preimage_in(ZA1, i.at(n + 1) * ZA1, B.boundaries(n + 1));
                if (!span_contains(KA, Dl) || len(Dl) != len(KA)) return fail(n + 1, "H(A)", "im delta != ker i_*");
            }
        } else if (A.rank(n + 1)) {
            ZModMatrix ZA1 = mat(A.cycles(n + 1), A.rank(n + 1));
            ZModMatrix KA = preimage_in(ZA1, i.at(n + 1) * ZA1, B.boundaries(n + 1));
            if (len(KA) != len(A.boundaries(n + 1))) return fail(n + 1, "H(A)", "i_* not injective");
        }
    }
    return v;
}

LesVerdict cone_les_check(const ChainMap& f) {
    ChainComplexZ cone = mapping_cone(f);
    const ChainComplexZ& A = f.source;
    ChainComplexZ Bs = shift(f.target, -1);  // Bs^n = B^{n-1}
    const int p = A.p, s = A.s;
    ChainMap i, q;
    i.source = Bs;
    i.target = cone;
    q.source = cone;
    q.target = A;
    for (int n = cone.lowest; n <= cone.highest(); ++n) {
        const int b = Bs.rank(n), a = A.rank(n);
        Mat I = Mat::Zero(b + a, b), P = Mat::Zero(a, b + a);
        for (int k = 0; k < b; ++k) I(k, k) = 1;
        for (int k = 0; k < a; ++k) P(k, b + k) = 1;
        i.f[n] = ZModMatrix(p, s, I);
        q.f[n] = ZModMatrix(p, s, P);
    }
    return les_check(i, q);
}

// ---------------------------------------------------------------- double complexes

int DoubleComplex::rank(int a, int b) const {
    if (a < 0 || b < 0 || a >= cols || b >= rows) return 0;
    return ranks[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
}

ZModMatrix DoubleComplex::horizontal(int a, int b) const {
    auto it = dh.find({a, b});
    if (it != dh.end()) return it->second;
    return zeros(p, s, rank(a + 1, b), rank(a, b));
}

ZModMatrix DoubleComplex::vertical(int a, int b) const {
    auto it = dv.find({a, b});
    if (it != dv.end()) return it->second;
    return zeros(p, s, rank(a, b + 1), rank(a, b));
}

bool DoubleComplex::anticommutes() const {
    for (int a = 0; a < cols; ++a)
        for (int b = 0; b < rows; ++b)
            if (!(vertical(a + 1, b) * horizontal(a, b) + horizontal(a, b + 1) * vertical(a, b)).is_zero()) return false;
    return true;
}

bool DoubleComplex::is_complex() const {
    for (int a = 0; a < cols; ++a)
        for (int b = 0; b < rows; ++b) {
            if (!(horizontal(a + 1, b) * horizontal(a, b)).is_zero()) return false;
            if (!(vertical(a, b + 1) * vertical(a, b)).is_zero()) return false;
        }
    return anticommutes();
}

namespace {

struct TotLayout {
    std::vector<int> offset;  // offset[a] of block (a, n-a)
    int dim = 0;
};

TotLayout tot_layout(const DoubleComplex& K, int n) {
    TotLayout L;
    L.offset.assign(static_cast<std::size_t>(K.cols + 1), 0);
    for (int a = 0; a < K.cols; ++a) {
        L.offset[static_cast<std::size_t>(a)] = L.dim;
        L.dim += K.rank(a, n - a);
    }
    L.offset[static_cast<std::size_t>(K.cols)] = L.dim;
    return L;
}

}  // namespace

ChainComplexZ DoubleComplex::total() const {
    const int top = cols + rows - 2;
    std::vector<int> rk;
    std::vector<ZModMatrix> d;
    for (int n = 0; n <= top; ++n) rk.push_back(tot_layout(*this, n).dim);
    for (int n = 0; n < top; ++n) {
        TotLayout src = tot_layout(*this, n), dst = tot_layout(*this, n + 1);
        Mat M = Mat::Zero(dst.dim, src.dim);
        for (int a = 0; a < cols; ++a) {
            const int b = n - a;
            if (rank(a, b) == 0) continue;
            const int c0 = src.offset[static_cast<std::size_t>(a)];
            if (rank(a + 1, b)) M.block(dst.offset[static_cast<std::size_t>(a + 1)], c0, rank(a + 1, b), rank(a, b)) = horizontal(a, b).data();
            if (rank(a, b + 1)) M.block(dst.offset[static_cast<std::size_t>(a)], c0, rank(a, b + 1), rank(a, b)) = vertical(a, b).data();
        }
        d.emplace_back(p, s, M);
    }
    return make_complex(p, s, 0, rk, d);
}

SpectralResult spectral_E_pages(const DoubleComplex& K, int up_to_r) {
    if (!K.is_complex()) throw InvariantFailure("spectral_E_pages: differentials do not square to zero or do not anticommute");
    const int p = K.p, s = K.s;
    ChainComplexZ T = K.total();
    const int top = K.cols + K.rows - 2;

    // coordinates of F^a Tot^n as columns of the identity
    auto filt = [&](int a, int n) {
        TotLayout L = tot_layout(K, n);
        a = std::clamp(a, 0, K.cols);
        const int start = L.offset[static_cast<std::size_t>(a)];
        Mat E = Mat::Zero(L.dim, L.dim - start);
        for (int k = start; k < L.dim; ++k) E(k, k - start) = 1;
        return ZModMatrix(p, s, E);
    };
    // rows of Tot^n in blocks a' < a
    auto below = [&](int a, int n) {
        TotLayout L = tot_layout(K, n);
        a = std::clamp(a, 0, K.cols);
        const int stop = L.offset[static_cast<std::size_t>(a)];
        Mat P = Mat::Zero(stop, L.dim);
        for (int k = 0; k < stop; ++k) P(k, k) = 1;
        return ZModMatrix(p, s, P);
    };
    auto Z = [&](int r, int a, int n) {
        ZModMatrix E = filt(a, n);
        if (E.cols() == 0 || n >= top) return E;
        ZModMatrix P = below(a + r, n + 1);
        if (P.rows() == 0) return E;
        ZModMatrix M = P * T.differential(n) * E;
        return cols_or_empty(E, kernel_generators(M));
    };
    // d(F^{a-r+1}) inside F^a
    auto Bnd = [&](int r, int a, int n) {
        const int dim = tot_layout(K, n).dim;
        if (n == 0) return zeros(p, s, dim, 0);
        ZModMatrix Y = T.differential(n - 1) * filt(a - r + 1, n - 1);
        if (Y.cols() == 0) return zeros(p, s, dim, 0);
        ZModMatrix P = below(a, n);
        if (P.rows() == 0) return Y;
        return cols_or_empty(Y, kernel_generators(P * Y));
    };
    auto join = [](const ZModMatrix& a, const ZModMatrix& b) {
        if (a.cols() == 0) return b;
        if (b.cols() == 0) return a;
        return a.hstack(b);
    };

    SpectralResult res;
    const int rmax = std::max(up_to_r, K.cols + 1);
    for (int r = 1; r <= rmax; ++r) {
        SpectralPage pg;
        pg.r = r;
        pg.lengths.assign(static_cast<std::size_t>(K.cols), std::vector<int>(static_cast<std::size_t>(K.rows), 0));
        for (int a = 0; a < K.cols; ++a)
            for (int b = 0; b < K.rows; ++b) {
                if (K.rank(a, b) == 0) continue;
                const int n = a + b;
                ZModMatrix zr = Z(r, a, n);
                ZModMatrix den = join(Bnd(r, a, n), Z(r - 1, a + 1, n));
                pg.lengths[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = len(zr) - len(den);
            }
        res.pages.push_back(pg);
    }
    res.stable_from = rmax;
    for (int k = rmax - 1; k >= 1; --k) {
        if (res.pages[static_cast<std::size_t>(k - 1)].lengths != res.pages.back().lengths) break;
        res.stable_from = k;
    }
    const auto& einf = res.pages.back().lengths;
    res.abutment_ok = true;
    for (int n = 0; n <= top; ++n) {
        res.total_lengths.push_back(T.cohomology_length(n));
        int sum = 0;
        for (int a = 0; a < K.cols; ++a)
            if (n - a >= 0 && n - a < K.rows) sum += einf[static_cast<std::size_t>(a)][static_cast<std::size_t>(n - a)];
        res.abutment_lengths.push_back(sum);
        if (sum != res.total_lengths.back()) res.abutment_ok = false;
    }
    if (up_to_r < rmax) res.pages.resize(static_cast<std::size_t>(up_to_r));
    return res;
}

// ---------------------------------------------------------------- towers

namespace {

ZModMatrix relations_of(const PresentedModule& M) {
    return M.relations.cols() ? M.relations : ZModMatrix(M.p, M.s, M.generators, 0);
}

int sub_length(const ZModMatrix& G, const ZModMatrix& R) {
    ZModMatrix all = G.cols() ? (R.cols() ? G.hstack(R) : G) : R;
    return (all.cols() ? len(all) : 0) - (R.cols() ? len(R) : 0);
}

}  // namespace

LimResult tower_lim_lim1(const Tower& T) {
    const int p = T.p, s = T.s;
    const int L = static_cast<int>(T.N.size());
    if (L == 0) throw std::invalid_argument("tower_lim_lim1: empty tower");
    const bool constant = T.tail == TailConvention::EventuallyConstant;
    if (static_cast<int>(T.d.size()) != (constant ? L : L - 1))
        throw std::invalid_argument("tower_lim_lim1: wrong number of transition maps for the tail convention");
    for (int n = 0; n < static_cast<int>(T.d.size()); ++n) {
        const PresentedModule& src = T.N[static_cast<std::size_t>(std::min(n + 1, L - 1))];
        const PresentedModule& dst = T.N[static_cast<std::size_t>(n)];
        const ZModMatrix& dn = T.d[static_cast<std::size_t>(n)];
        if (dn.rows() != dst.generators || dn.cols() != src.generators)
            throw std::invalid_argument("tower_lim_lim1: transition " + std::to_string(n) + " has the wrong shape");
        ZModMatrix img = dn * relations_of(src);
        if (img.cols() && !span_contains(relations_of(dst), img))
            throw InvariantFailure("tower_lim_lim1: transition " + std::to_string(n) + " does not respect relations");
    }

    auto module_at = [&](int n) -> const PresentedModule& { return T.N[static_cast<std::size_t>(std::min(n, L - 1))]; };
    auto map_at = [&](int n) -> const ZModMatrix& { return T.d[static_cast<std::size_t>(std::min(n, static_cast<int>(T.d.size()) - 1))]; };
    auto exists = [&](int n) { return constant || n < L; };

    LimResult res;
    // images of N_m -> N_n stabilize (Mittag-Leffler); find the stabilization index along the tail
    int settle = 0;
    for (int n = 0; n < L; ++n) {
        ZModMatrix img = ZModMatrix::identity(p, s, module_at(n).generators);
        int prev = sub_length(img, relations_of(module_at(n)));
        int steady = 0;
        for (int m = n; steady < 2 && m < n + L + 64; ++m) {
            if (!exists(m + 1)) {
                img = ZModMatrix(p, s, module_at(n).generators, 0);
            } else {
                img = img * map_at(m);
            }
            int cur = sub_length(img, relations_of(module_at(n)));
            if (cur > prev) res.mittag_leffler = false;
            steady = cur == prev ? steady + 1 : 0;
            if (cur != prev) settle = std::max(settle, m - n + 1);
            prev = cur;
        }
        if (steady < 2) res.mittag_leffler = false;
    }

    // lim
    if (!constant) {
        res.lim = free_module(p, s, 0);
    } else {
        const PresentedModule& Nt = T.N.back();
        ZModMatrix e = T.d.back();
        ZModMatrix W = ZModMatrix::identity(p, s, Nt.generators);
        int prev = sub_length(W, relations_of(Nt));
        for (int k = 0; k <= Nt.generators * s + 1; ++k) {
            ZModMatrix next = e * W;
            int cur = sub_length(next, relations_of(Nt));
            W = next;
            if (cur == prev) break;
            prev = cur;
        }
        res.lim = quotient_presentation(W, relations_of(Nt));
    }

    // lim^1: cokernel of (x_n) -> (x_n - d_n x_{n+1}) on the truncated product
    const int len_T = constant ? L + settle + 1 : L;
    res.truncation = len_T;
    std::vector<int> off(static_cast<std::size_t>(len_T + 2), 0);
    for (int n = 0; n <= len_T; ++n)
        off[static_cast<std::size_t>(n + 1)] = off[static_cast<std::size_t>(n)] + (exists(n) ? static_cast<int>(module_at(n).generators) : 0);
    const int rowsN = off[static_cast<std::size_t>(len_T)], colsN = off[static_cast<std::size_t>(len_T + 1)];
    Mat M = Mat::Zero(rowsN, colsN);
    std::vector<ZModMatrix> rel_blocks;
    int rel_cols = 0;
    for (int n = 0; n < len_T; ++n) {
        if (!exists(n)) continue;
        const int g = static_cast<int>(module_at(n).generators);
        for (int k = 0; k < g; ++k) M(off[static_cast<std::size_t>(n)] + k, off[static_cast<std::size_t>(n)] + k) = 1;
        if (exists(n + 1)) {
            const int g1 = static_cast<int>(module_at(n + 1).generators);
            M.block(off[static_cast<std::size_t>(n)], off[static_cast<std::size_t>(n + 1)], g, g1) = map_at(n).scaled(-1).data();
        }
        rel_cols += static_cast<int>(relations_of(module_at(n)).cols());
    }
    Mat R = Mat::Zero(rowsN, rel_cols);
    int rc = 0;
    for (int n = 0; n < len_T; ++n) {
        if (!exists(n)) continue;
        ZModMatrix Rn = relations_of(module_at(n));
        if (Rn.cols()) R.block(off[static_cast<std::size_t>(n)], rc, Rn.rows(), Rn.cols()) = Rn.data();
        rc += static_cast<int>(Rn.cols());
    }
    ZModMatrix rel = ZModMatrix(p, s, M);
    if (rel_cols) rel = rel.hstack(ZModMatrix(p, s, R));
    res.lim1.p = p;
    res.lim1.s = s;
    res.lim1.generators = rowsN;
    res.lim1.relations = rel;
    res.lim1.embedding = ZModMatrix::identity(p, s, rowsN);
    return res;
}

}  // namespace phigamma

namespace phigamma {

PlantedComplex random_planted_complex(int p, int s, int top, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> deg(0, top), kind(0, 2), ex(0, s - 1);
    const auto T = static_cast<std::size_t>(top + 1);
    std::vector<int> ranks(T, 0), expect(T, 0);
    struct Piece { int n, e; bool point; int row0, row1; };
    std::vector<Piece> pieces;
    const int count = 2 + std::uniform_int_distribution<int>(0, 2)(rng);
    for (int k = 0; k < count; ++k) {
        int n = deg(rng);
        auto un = static_cast<std::size_t>(n);
        if (kind(rng) == 0 || n == top) {
            pieces.push_back({n, 0, true, ranks[un]++, -1});
            expect[un] += s;
        } else {
            int e = ex(rng);
            int r0 = ranks[un]++;
            int r1 = ranks[un + 1]++;
            pieces.push_back({n, e, false, r0, r1});
            expect[un] += e;
            expect[un + 1] += e;
        }
    }
    std::vector<ZModMatrix> d;
    for (int n = 0; n < top; ++n) {
        auto un = static_cast<std::size_t>(n);
        ZModMatrix D(p, s, ranks[un + 1], ranks[un]);
        for (auto& pc : pieces)
            if (!pc.point && pc.n == n) D.set(pc.row1, pc.row0, ipow(p, pc.e));
        d.push_back(D);
    }
    std::vector<ZModMatrix> U, Uinv;
    for (std::size_t n = 0; n < T; ++n) {
        ZModMatrix u = ZModMatrix::random_unimodular(p, s, ranks[n], rng);
        U.push_back(u);
        Uinv.push_back(ranks[n] ? *solve_linear(u, ZModMatrix::identity(p, s, u.rows())) : u);
    }
    for (std::size_t n = 0; n + 1 < T; ++n) d[n] = U[n + 1] * d[n] * Uinv[n];
    return {make_complex(p, s, 0, ranks, d), expect};
}

ChainComplexZ direct_sum(const ChainComplexZ& A, const ChainComplexZ& B) {
    if (A.lowest != 0 || B.lowest != 0 || A.highest() != B.highest())
        throw std::invalid_argument("direct_sum: complexes must live on the same degrees [0, top]");
    std::vector<int> ranks;
    std::vector<ZModMatrix> d;
    for (int n = 0; n <= A.highest(); ++n) ranks.push_back(A.rank(n) + B.rank(n));
    for (int n = 0; n < A.highest(); ++n) {
        Mat M = Mat::Zero(ranks[static_cast<std::size_t>(n + 1)], ranks[static_cast<std::size_t>(n)]);
        if (A.rank(n) && A.rank(n + 1)) M.block(0, 0, A.rank(n + 1), A.rank(n)) = A.differential(n).data();
        if (B.rank(n) && B.rank(n + 1))
            M.block(A.rank(n + 1), A.rank(n), B.rank(n + 1), B.rank(n)) = B.differential(n).data();
        d.emplace_back(A.p, A.s, M);
    }
    return make_complex(A.p, A.s, 0, ranks, d);
}

ChainMap canonical_inclusion(const ChainComplexZ& A, const ChainComplexZ& S) {
    ChainMap f;
    f.source = A;
    f.target = S;
    for (int n = A.lowest; n <= A.highest(); ++n) {
        Mat M = Mat::Zero(S.rank(n), A.rank(n));
        for (int k = 0; k < A.rank(n); ++k) M(k, k) = 1;
        f.f[n] = ZModMatrix(A.p, A.s, M);
    }
    return f;
}

ZModMatrix kronecker(const ZModMatrix& A, const ZModMatrix& B) {
    Mat M = Mat::Zero(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            M.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B.data();
    return ZModMatrix(A.p(), A.s(), M);
}

DoubleComplex tensor_double_complex(const ChainComplexZ& A, const ChainComplexZ& B) {
    DoubleComplex K;
    K.p = A.p;
    K.s = A.s;
    K.cols = static_cast<int>(A.ranks.size());
    K.rows = static_cast<int>(B.ranks.size());
    K.ranks.assign(static_cast<std::size_t>(K.cols), std::vector<int>(static_cast<std::size_t>(K.rows)));
    for (int a = 0; a < K.cols; ++a)
        for (int b = 0; b < K.rows; ++b) {
            const int ia = A.lowest + a, ib = B.lowest + b;
            K.ranks[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = A.rank(ia) * B.rank(ib);
            if (a + 1 < K.cols) K.dh[{a, b}] = kronecker(A.differential(ia), ZModMatrix::identity(K.p, K.s, B.rank(ib)));
            if (b + 1 < K.rows)
                K.dv[{a, b}] = kronecker(ZModMatrix::identity(K.p, K.s, A.rank(ia)), B.differential(ib)).scaled(a % 2 ? -1 : 1);
        }
    return K;
}

PlantedMap random_planted_map(int p, int s, int top, std::mt19937_64& rng) {
    PlantedComplex A = random_planted_complex(p, s, top, rng);
    PlantedComplex Ap = random_planted_complex(p, s, top, rng);
    ChainComplexZ S = direct_sum(A.complex, Ap.complex);
    ChainMap f = canonical_inclusion(A.complex, S);
    std::map<int, ZModMatrix> h;
    for (int n = 1; n <= top; ++n) h[n] = ZModMatrix::random(p, s, S.rank(n - 1), A.complex.rank(n), rng);
    for (int n = 0; n <= top; ++n) {
        ZModMatrix extra(p, s, S.rank(n), A.complex.rank(n));
        if (h.count(n)) extra = extra + S.differential(n - 1) * h[n];
        if (h.count(n + 1)) extra = extra + h[n + 1] * A.complex.differential(n);
        f.f[n] = f.f[n] + extra;
    }
    PlantedMap out{f, std::vector<int>(static_cast<std::size_t>(top + 2), 0)};
    for (int n = 1; n <= top + 1; ++n)
        out.cone_lengths[static_cast<std::size_t>(n)] = Ap.lengths[static_cast<std::size_t>(n - 1)];
    return out;
}

Tower random_tower(int p, int s, int length, TailConvention tail, std::mt19937_64& rng, int max_rank) {
    if (length < 1) throw std::invalid_argument("random_tower: length must be positive");
    std::uniform_int_distribution<int> rk(1, std::max(1, max_rank)), ex(1, s);
    std::vector<std::vector<int>> exps;
    Tower T;
    T.p = p;
    T.s = s;
    T.tail = tail;
    for (int n = 0; n < length; ++n) {
        std::vector<int> e(static_cast<std::size_t>(rk(rng)));
        for (int& x : e) x = ex(rng);
        PresentedModule M = free_module(p, s, static_cast<Eigen::Index>(e.size()));
        Mat r = Mat::Zero(static_cast<Eigen::Index>(e.size()), static_cast<Eigen::Index>(e.size()));
        for (std::size_t i = 0; i < e.size(); ++i) r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = ipow(p, e[i]);
        M.relations = ZModMatrix(p, s, r);
        T.N.push_back(M);
        exps.push_back(e);
    }
    // d : Z/p^f -> Z/p^e is multiplication by a multiple of p^{max(0, e - f)}
    auto map = [&](const std::vector<int>& dst, const std::vector<int>& src) {
        ZModMatrix R = ZModMatrix::random(p, s, static_cast<Eigen::Index>(dst.size()), static_cast<Eigen::Index>(src.size()), rng);
        for (std::size_t i = 0; i < dst.size(); ++i)
            for (std::size_t j = 0; j < src.size(); ++j) {
                auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
                R.set(ii, jj, R(ii, jj) * ipow(p, std::max(0, dst[i] - src[j])));
            }
        return R;
    };
    for (int n = 0; n + 1 < length; ++n)
        T.d.push_back(map(exps[static_cast<std::size_t>(n)], exps[static_cast<std::size_t>(n + 1)]));
    if (tail == TailConvention::EventuallyConstant) T.d.push_back(map(exps.back(), exps.back()));
    return T;
}

}  // namespace phigamma
