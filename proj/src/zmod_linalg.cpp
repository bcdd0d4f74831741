#include "phigamma/zmod_linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace phigamma {

std::int64_t ipow(std::int64_t base, int exp) {
    std::int64_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

bool is_prime(std::int64_t n) {
    if (n < 2) return false;
    for (std::int64_t d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

int valuation_mod(std::int64_t x, int p, int s) {
    x = mod_reduce(x, ipow(p, s));
    if (x == 0) return s;
    int v = 0;
    while (x % p == 0) {
        x /= p;
        ++v;
    }
    return v;
}

std::int64_t mod_reduce(std::int64_t x, std::int64_t q) {
    x %= q;
    return x < 0 ? x + q : x;
}

std::int64_t inverse_mod(std::int64_t a, std::int64_t q) {
    std::int64_t r0 = q, r1 = mod_reduce(a, q), t0 = 0, t1 = 1;
    while (r1 != 0) {
        std::int64_t k = r0 / r1;
        std::tie(r0, r1) = std::make_pair(r1, r0 - k * r1);
        std::tie(t0, t1) = std::make_pair(t1, t0 - k * t1);
    }
    if (r0 != 1) throw std::domain_error("inverse_mod: not a unit");
    return mod_reduce(t0, q);
}

namespace {

Mat reduce_all(const Mat& m, std::int64_t q) {
    return m.unaryExpr([q](std::int64_t x) { return mod_reduce(x, q); });
}

void check_compatible(const ZModMatrix& a, const ZModMatrix& b) {
    if (a.p() != b.p() || a.s() != b.s()) throw std::invalid_argument("ZModMatrix: coefficient rings differ");
}

}  // namespace

ZModMatrix::ZModMatrix(int p, int s, Eigen::Index rows, Eigen::Index cols)
    : p_(p), s_(s), q_(ipow(p, s)), m_(Mat::Zero(rows, cols)) {
    if (!is_prime(p)) throw std::invalid_argument("ZModMatrix: p must be prime");
    if (s < 1) throw std::invalid_argument("ZModMatrix: s must be positive");
}

ZModMatrix::ZModMatrix(int p, int s, const Mat& entries) : ZModMatrix(p, s, 0, 0) {
    m_ = reduce_all(entries, q_);
}

ZModMatrix ZModMatrix::identity(int p, int s, Eigen::Index n) {
    return ZModMatrix(p, s, Mat::Identity(n, n));
}

ZModMatrix ZModMatrix::random(int p, int s, Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    ZModMatrix r(p, s, rows, cols);
    std::uniform_int_distribution<std::int64_t> dist(0, r.q_ - 1);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) r.m_(i, j) = dist(rng);
    return r;
}

ZModMatrix ZModMatrix::random_unimodular(int p, int s, Eigen::Index n, std::mt19937_64& rng) {
    for (;;) {
        ZModMatrix r = random(p, s, n, n, rng);
        if (r.det_mod_p() != 0) return r;
    }
}

ZModMatrix ZModMatrix::operator*(const ZModMatrix& o) const {
    check_compatible(*this, o);
    ZModMatrix r(p_, s_, 0, 0);
    const double bound = static_cast<double>(q_ - 1) * static_cast<double>(q_ - 1) * static_cast<double>(cols() + 1);
    if (bound < 9.0e15) {
        // exact in double precision, and much faster than int64 products
        Eigen::MatrixXd a = m_.cast<double>(), b = o.m_.cast<double>();
        Eigen::MatrixXd c = a * b;
        r.m_ = c.unaryExpr([q = static_cast<double>(q_)](double v) { return std::fmod(v, q); }).cast<std::int64_t>();
        return r;
    }
    // entries < 7^6, so partial sums stay far below 2^63 for any realistic inner dimension
    r.m_ = reduce_all(m_ * o.m_, q_);
    return r;
}

ZModMatrix ZModMatrix::operator+(const ZModMatrix& o) const {
    check_compatible(*this, o);
    ZModMatrix r(p_, s_, 0, 0);
    r.m_ = reduce_all(m_ + o.m_, q_);
    return r;
}

ZModMatrix ZModMatrix::operator-(const ZModMatrix& o) const {
    check_compatible(*this, o);
    ZModMatrix r(p_, s_, 0, 0);
    r.m_ = reduce_all(m_ - o.m_, q_);
    return r;
}

ZModMatrix ZModMatrix::scaled(std::int64_t c) const {
    ZModMatrix r(p_, s_, 0, 0);
    r.m_ = reduce_all(m_ * mod_reduce(c, q_), q_);
    return r;
}

ZModMatrix ZModMatrix::transpose() const {
    ZModMatrix r(p_, s_, 0, 0);
    r.m_ = m_.transpose();
    return r;
}

ZModMatrix ZModMatrix::reduced(int n) const {
    if (n < 1 || n > s_) throw std::invalid_argument("ZModMatrix::reduced: bad exponent");
    return ZModMatrix(p_, n, m_);
}

ZModMatrix ZModMatrix::hstack(const ZModMatrix& o) const {
    check_compatible(*this, o);
    if (rows() != o.rows() && cols() != 0 && o.cols() != 0) throw std::invalid_argument("hstack: row mismatch");
    Eigen::Index r = cols() == 0 ? o.rows() : rows();
    Mat m(r, cols() + o.cols());
    if (cols()) m.leftCols(cols()) = m_;
    if (o.cols()) m.rightCols(o.cols()) = o.m_;
    ZModMatrix out(p_, s_, 0, 0);
    out.m_ = m;
    return out;
}

ZModMatrix ZModMatrix::vstack(const ZModMatrix& o) const {
    check_compatible(*this, o);
    if (cols() != o.cols() && rows() != 0 && o.rows() != 0) throw std::invalid_argument("vstack: column mismatch");
    Eigen::Index c = rows() == 0 ? o.cols() : cols();
    Mat m(rows() + o.rows(), c);
    if (rows()) m.topRows(rows()) = m_;
    if (o.rows()) m.bottomRows(o.rows()) = o.m_;
    ZModMatrix out(p_, s_, 0, 0);
    out.m_ = m;
    return out;
}

ZModMatrix ZModMatrix::block(Eigen::Index r, Eigen::Index c, Eigen::Index nr, Eigen::Index nc) const {
    ZModMatrix out(p_, s_, 0, 0);
    out.m_ = m_.block(r, c, nr, nc);
    return out;
}

bool ZModMatrix::is_zero() const { return (m_.array() == 0).all(); }

bool ZModMatrix::operator==(const ZModMatrix& o) const {
    return p_ == o.p_ && s_ == o.s_ && m_.rows() == o.m_.rows() && m_.cols() == o.m_.cols() && m_ == o.m_;
}

std::int64_t ZModMatrix::det_mod_p() const {
    if (rows() != cols()) throw std::invalid_argument("det_mod_p: not square");
    Mat a = m_.unaryExpr([this](std::int64_t x) { return x % p_; });
    const Eigen::Index n = rows();
    std::int64_t det = 1;
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index piv = k;
        while (piv < n && a(piv, k) == 0) ++piv;
        if (piv == n) return 0;
        if (piv != k) {
            a.row(piv).swap(a.row(k));
            det = p_ - det;
        }
        det = det * a(k, k) % p_;
        std::int64_t inv = inverse_mod(a(k, k), p_);
        for (Eigen::Index i = k + 1; i < n; ++i) {
            std::int64_t f = a(i, k) * inv % p_;
            if (f == 0) continue;
            for (Eigen::Index j = k; j < n; ++j) a(i, j) = mod_reduce(a(i, j) - f * a(k, j), p_);
        }
    }
    return mod_reduce(det, p_);
}

void to_json(nlohmann::json& j, const ZModMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    j = {{"p", m.p()}, {"s", m.s()}, {"entries", rows}};
}

ZModMatrix zmod_from_json(const nlohmann::json& j) {
    int p = j.at("p").get<int>();
    int s = j.at("s").get<int>();
    const auto& rows = j.at("entries");
    Eigen::Index nr = static_cast<Eigen::Index>(rows.size());
    Eigen::Index nc = nr ? static_cast<Eigen::Index>(rows[0].size()) : 0;
    Mat m(nr, nc);
    for (Eigen::Index r = 0; r < nr; ++r) {
        if (static_cast<Eigen::Index>(rows[r].size()) != nc) throw std::invalid_argument("ragged matrix");
        for (Eigen::Index c = 0; c < nc; ++c) m(r, c) = rows[r][c].get<std::int64_t>();
    }
    return ZModMatrix(p, s, m);
}

SmithForm smith_normal_form(const ZModMatrix& A) {
    const int p = A.p(), s = A.s();
    const std::int64_t q = A.modulus();
    const Eigen::Index m = A.rows(), n = A.cols();
    Mat D = A.data();
    Mat U = Mat::Identity(m, m);
    Mat V = Mat::Identity(n, n);
    std::vector<int> vals;
    auto red = [q](auto&& expr) { return expr.unaryExpr([q](std::int64_t x) { return mod_reduce(x, q); }); };

    for (Eigen::Index k = 0; k < std::min(m, n); ++k) {
        int best = s;
        Eigen::Index bi = -1, bj = -1;
        for (Eigen::Index j = k; j < n && best > 0; ++j)
            for (Eigen::Index i = k; i < m; ++i) {
                if (D(i, j) == 0) continue;
                int v = valuation_mod(D(i, j), p, s);
                if (v < best) {
                    best = v;
                    bi = i;
                    bj = j;
                    if (v == 0) break;
                }
            }
        if (best == s) break;
        if (bi != k) {
            D.row(bi).swap(D.row(k));
            U.row(bi).swap(U.row(k));
        }
        if (bj != k) {
            D.col(bj).swap(D.col(k));
            V.col(bj).swap(V.col(k));
        }
        const std::int64_t pv = ipow(p, best);
        const std::int64_t uinv = inverse_mod(D(k, k) / pv, q);
        D.row(k) = red(D.row(k) * uinv);
        U.row(k) = red(U.row(k) * uinv);
        for (Eigen::Index i = k + 1; i < m; ++i) {
            if (D(i, k) == 0) continue;
            std::int64_t t = D(i, k) / pv;
            D.row(i) = red(D.row(i) - t * D.row(k));
            U.row(i) = red(U.row(i) - t * U.row(k));
        }
        for (Eigen::Index j = k + 1; j < n; ++j) {
            if (D(k, j) == 0) continue;
            std::int64_t t = D(k, j) / pv;
            D.col(j) = red(D.col(j) - t * D.col(k));
            V.col(j) = red(V.col(j) - t * V.col(k));
        }
        vals.push_back(best);
    }
    return SmithForm{ZModMatrix(p, s, D), ZModMatrix(p, s, U), ZModMatrix(p, s, V), vals};
}

PresentedModule free_module(int p, int s, Eigen::Index rank) {
    PresentedModule M;
    M.p = p;
    M.s = s;
    M.generators = rank;
    M.relations = ZModMatrix(p, s, rank, 0);
    M.embedding = ZModMatrix::identity(p, s, rank);
    return M;
}

std::pair<PresentedModule, PresentedModule> kernel_cokernel(const ZModMatrix& A) {
    const int p = A.p(), s = A.s();
    SmithForm sf = smith_normal_form(A);
    const Eigen::Index n = A.cols();
    const Eigen::Index rk = static_cast<Eigen::Index>(sf.valuations.size());

    std::vector<std::pair<Vec, int>> gens;  // generator, order exponent
    for (Eigen::Index i = 0; i < n; ++i) {
        int v = i < rk ? sf.valuations[i] : s;
        if (v == 0) continue;
        Vec g = sf.V.data().col(i) * ipow(p, s - v);
        gens.emplace_back(g, v);
    }
    PresentedModule ker;
    ker.p = p;
    ker.s = s;
    ker.generators = static_cast<Eigen::Index>(gens.size());
    Mat emb(n, ker.generators), rel = Mat::Zero(ker.generators, ker.generators);
    for (Eigen::Index g = 0; g < ker.generators; ++g) {
        emb.col(g) = gens[g].first;
        rel(g, g) = gens[g].second == s ? 0 : ipow(p, gens[g].second);
    }
    ker.embedding = ZModMatrix(p, s, emb);
    ker.relations = ZModMatrix(p, s, rel);

    PresentedModule coker;
    coker.p = p;
    coker.s = s;
    coker.generators = A.rows();
    coker.relations = A;
    coker.embedding = ZModMatrix::identity(p, s, A.rows());
    return {ker, coker};
}

std::vector<std::int64_t> module_profile(const PresentedModule& M) {
    SmithForm sf = smith_normal_form(M.relations.cols() ? M.relations : ZModMatrix(M.p, M.s, M.generators, 0));
    std::vector<std::int64_t> out;
    for (int v : sf.valuations)
        if (v > 0) out.push_back(ipow(M.p, v));
    for (Eigen::Index i = static_cast<Eigen::Index>(sf.valuations.size()); i < M.generators; ++i)
        out.push_back(ipow(M.p, M.s));
    std::sort(out.begin(), out.end());
    return out;
}

int module_length(const PresentedModule& M) {
    int len = 0;
    for (std::int64_t d : module_profile(M))
        while (d > 1) {
            d /= M.p;
            ++len;
        }
    return len;
}

int span_length(const ZModMatrix& A) {
    if (A.rows() == 0 || A.cols() == 0) return 0;
    if (A.s() == 1) return fp::Matrix::from(A).rank();
    SmithForm sf = smith_normal_form(A);
    int len = 0;
    for (int v : sf.valuations) len += A.s() - v;
    return len;
}

ZModMatrix kernel_generators(const ZModMatrix& A) {
    if (A.s() == 1) {
        if (A.rows() == 0) return ZModMatrix::identity(A.p(), 1, A.cols());
        return fp::Matrix::from(A).kernel();
    }
    return kernel_cokernel(A).first.embedding;
}

bool span_contains(const ZModMatrix& A, const ZModMatrix& B) {
    if (B.cols() == 0) return true;
    if (A.cols() == 0) return B.is_zero();
    return span_length(A.hstack(B)) == span_length(A);
}

std::optional<ZModMatrix> solve_linear(const ZModMatrix& A, const ZModMatrix& B) {
    const int p = A.p(), s = A.s();
    if (B.rows() != A.rows()) throw std::invalid_argument("solve_linear: row mismatch");
    if (A.cols() == 0) {
        if (!B.is_zero()) return std::nullopt;
        return ZModMatrix(p, s, 0, B.cols());
    }
    SmithForm sf = smith_normal_form(A);
    ZModMatrix UB = sf.U * B;
    const auto rk = static_cast<Eigen::Index>(sf.valuations.size());
    Mat Y = Mat::Zero(A.cols(), B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < B.cols(); ++j) {
            std::int64_t b = UB(i, j);
            if (i >= rk) {
                if (b != 0) return std::nullopt;
                continue;
            }
            int v = sf.valuations[static_cast<std::size_t>(i)];
            if (valuation_mod(b, p, s) < v) return std::nullopt;
            Y(i, j) = b / ipow(p, v);
        }
    return sf.V * ZModMatrix(p, s, Y);
}

ZModMatrix intersect_spans(const ZModMatrix& U, const ZModMatrix& W) {
    if (U.cols() == 0 || W.cols() == 0) return ZModMatrix(U.p(), U.s(), U.rows(), 0);
    ZModMatrix K = kernel_generators(U.hstack(W.scaled(-1)));
    return U * K.block(0, 0, U.cols(), K.cols());
}

PresentedModule quotient_presentation(const ZModMatrix& G, const ZModMatrix& R) {
    PresentedModule M;
    M.p = G.p();
    M.s = G.s();
    M.generators = G.cols();
    M.embedding = G;
    if (G.cols() == 0) {
        M.relations = ZModMatrix(M.p, M.s, 0, 0);
        return M;
    }
    ZModMatrix K = kernel_generators(R.cols() ? G.hstack(R) : G);
    M.relations = K.block(0, 0, G.cols(), K.cols());
    return M;
}

namespace fp {

Matrix::Matrix(int p, int rows, int cols)
    : p_(p), rows_(rows), cols_(cols), stride_(static_cast<std::size_t>((cols + 15) / 16 * 16)),
      magic_(static_cast<std::uint16_t>((256 + p - 1) / p)),
      data_(static_cast<std::size_t>(rows) * stride_, 0) {}

Matrix Matrix::from(const ZModMatrix& A) {
    if (A.s() != 1) throw std::invalid_argument("fp::Matrix: not a matrix over F_p");
    Matrix M(A.p(), static_cast<int>(A.rows()), static_cast<int>(A.cols()));
    for (int r = 0; r < M.rows_; ++r)
        for (int c = 0; c < M.cols_; ++c) M.row(r)[c] = static_cast<std::uint16_t>(A(r, c));
    return M;
}

void Matrix::set(int r, int c, std::int64_t v) { row(r)[c] = static_cast<std::uint16_t>(mod_reduce(v, p_)); }

void Matrix::axpy(int dst, int src, std::uint16_t f, int from) {
    std::uint16_t* d = row(dst);
    const std::uint16_t* sr = row(src);
    const std::uint16_t p = static_cast<std::uint16_t>(p_);
    if (p_ <= 7) {
        const std::uint16_t m = magic_;
        for (int j = from; j < cols_; ++j) {
            std::uint16_t y = static_cast<std::uint16_t>(d[j] + f * sr[j]);
            std::uint16_t k = static_cast<std::uint16_t>((y * m) >> 8);
            d[j] = static_cast<std::uint16_t>(y - k * p);
        }
    } else {
        for (int j = from; j < cols_; ++j)
            d[j] = static_cast<std::uint16_t>((static_cast<std::uint32_t>(d[j]) + f * sr[j]) % p_);
    }
}

std::vector<int> Matrix::rref() {
    std::vector<int> pivots;
    int r = 0;
    for (int c = 0; c < cols_ && r < rows_; ++c) {
        int piv = -1;
        for (int i = r; i < rows_; ++i)
            if (row(i)[c]) {
                piv = i;
                break;
            }
        if (piv < 0) continue;
        if (piv != r) std::swap_ranges(row(piv), row(piv) + stride_, row(r));
        std::uint16_t inv = static_cast<std::uint16_t>(inverse_mod(row(r)[c], p_));
        if (inv != 1) {
            std::uint16_t* rr = row(r);
            for (int j = c; j < cols_; ++j) rr[j] = static_cast<std::uint16_t>(rr[j] * inv % p_);
        }
        for (int i = 0; i < rows_; ++i) {
            if (i == r || row(i)[c] == 0) continue;
            axpy(i, r, static_cast<std::uint16_t>(p_ - row(i)[c]), c);
        }
        pivots.push_back(c);
        ++r;
    }
    return pivots;
}

int Matrix::rank() const {
    Matrix a = *this;
    int r = 0;
    for (int c = 0; c < a.cols_ && r < a.rows_; ++c) {
        int piv = -1;
        for (int i = r; i < a.rows_; ++i)
            if (a.row(i)[c]) {
                piv = i;
                break;
            }
        if (piv < 0) continue;
        if (piv != r) std::swap_ranges(a.row(piv), a.row(piv) + a.stride_, a.row(r));
        std::uint16_t inv = static_cast<std::uint16_t>(inverse_mod(a.row(r)[c], p_));
        for (int i = r + 1; i < a.rows_; ++i) {
            std::uint16_t x = a.row(i)[c];
            if (!x) continue;
            std::uint16_t f = static_cast<std::uint16_t>((p_ - x) * inv % p_);
            a.axpy(i, r, f, c);
        }
        ++r;
    }
    return r;
}

ZModMatrix Matrix::kernel() const {
    Matrix a = *this;
    std::vector<int> piv = a.rref();
    std::vector<char> is_piv(static_cast<std::size_t>(cols_), 0);
    for (int c : piv) is_piv[static_cast<std::size_t>(c)] = 1;
    Mat K = Mat::Zero(cols_, cols_ - static_cast<Eigen::Index>(piv.size()));
    Eigen::Index k = 0;
    for (int f = 0; f < cols_; ++f) {
        if (is_piv[static_cast<std::size_t>(f)]) continue;
        K(f, k) = 1;
        for (std::size_t i = 0; i < piv.size(); ++i) {
            std::uint16_t x = a.row(static_cast<int>(i))[f];
            if (x) K(piv[i], k) = p_ - x;
        }
        ++k;
    }
    return ZModMatrix(p_, 1, K);
}

}  // namespace fp

}  // namespace phigamma
