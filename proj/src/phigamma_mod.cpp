#include "phigamma/phigamma_mod.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "phigamma/errors.hpp"

namespace phigamma {

// ---------------------------------------------------------------- SeriesMatrix

SeriesMatrix::SeriesMatrix(int rows, int cols, const Series& fill)
    : rows_(rows), cols_(cols), e_(static_cast<std::size_t>(rows * cols), fill) {}

SeriesMatrix SeriesMatrix::identity(int p, int s, int n, int level) { return scalar(p, s, n, 1, level); }

SeriesMatrix SeriesMatrix::scalar(int p, int s, int n, std::int64_t c, int level) {
    SeriesMatrix m(n, n, Series(p, s, level));
    for (int i = 0; i < n; ++i) m.at(i, i) = Series::constant(p, s, level, c);
    return m;
}

SeriesMatrix SeriesMatrix::diagonal(const std::vector<Series>& d) {
    if (d.empty()) return {};
    const int n = static_cast<int>(d.size());
    SeriesMatrix m(n, n, Series(d[0].p(), d[0].K(), d[0].level()));
    for (int i = 0; i < n; ++i) m.at(i, i) = d[static_cast<std::size_t>(i)];
    return m;
}

SeriesMatrix SeriesMatrix::operator+(const SeriesMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw std::invalid_argument("SeriesMatrix: shape mismatch");
    SeriesMatrix r = *this;
    for (std::size_t k = 0; k < e_.size(); ++k) r.e_[k] = e_[k] + o.e_[k];
    return r;
}

SeriesMatrix SeriesMatrix::operator-(const SeriesMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw std::invalid_argument("SeriesMatrix: shape mismatch");
    SeriesMatrix r = *this;
    for (std::size_t k = 0; k < e_.size(); ++k) r.e_[k] = e_[k] - o.e_[k];
    return r;
}

SeriesMatrix SeriesMatrix::mul(const SeriesMatrix& o, std::int64_t cap) const {
    if (cols_ != o.rows_) throw std::invalid_argument("SeriesMatrix: shape mismatch in product");
    const Series& z = e_.empty() ? o.e_.front() : e_.front();
    SeriesMatrix r(rows_, o.cols_, Series(z.p(), z.K(), z.level(), cap));
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < o.cols_; ++j) {
            Series acc(z.p(), z.K(), z.level(), cap);
            for (int k = 0; k < cols_; ++k) {
                const Series& a = at(i, k);
                const Series& b = o.at(k, j);
                if (a.is_zero() && a.exact()) continue;
                if (b.is_zero() && b.exact()) continue;
                acc += a.mul(b, cap);
            }
            r.at(i, j) = acc.truncated(cap);
        }
    return r;
}

SeriesMatrix SeriesMatrix::scaled(std::int64_t c) const {
    return map([c](const Series& x) { return x.scaled(c); });
}

SeriesMatrix SeriesMatrix::transpose() const {
    if (e_.empty()) return *this;
    SeriesMatrix r(cols_, rows_, e_.front());
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) r.at(j, i) = at(i, j);
    return r;
}

SeriesMatrix SeriesMatrix::truncated(std::int64_t cap) const {
    return map([cap](const Series& x) { return x.truncated(cap); });
}

SeriesMatrix SeriesMatrix::reduce(int K) const {
    return map([K](const Series& x) { return x.reduce(K); });
}

SeriesMatrix SeriesMatrix::kron(const SeriesMatrix& o) const {
    SeriesMatrix r(rows_ * o.rows_, cols_ * o.cols_, e_.front());
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j)
            for (int k = 0; k < o.rows_; ++k)
                for (int l = 0; l < o.cols_; ++l) r.at(i * o.rows_ + k, j * o.cols_ + l) = at(i, j) * o.at(k, l);
    return r;
}

std::int64_t SeriesMatrix::min_prec() const {
    std::int64_t m = kExact;
    for (auto& x : e_) m = std::min(m, x.prec());
    return m;
}

std::int64_t SeriesMatrix::pole_order() const {
    std::int64_t m = 0;
    for (auto& x : e_)
        if (!x.is_zero()) m = std::max(m, -x.val());
    return m;
}

bool SeriesMatrix::is_identity() const {
    if (rows_ != cols_) return false;
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) {
            const Series& x = at(i, j);
            Series want = Series::constant(x.p(), x.K(), x.level(), i == j ? 1 : 0);
            if (x != want) return false;
        }
    return true;
}

bool SeriesMatrix::operator==(const SeriesMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) return false;
    for (std::size_t k = 0; k < e_.size(); ++k)
        if (e_[k] != o.e_[k]) return false;
    return true;
}

namespace {

// products of exact Laurent polynomials stay exact
Series mulc(const Series& a, const Series& b, std::int64_t cap) {
    if (a.exact() && b.exact()) return a * b;
    return a.mul(b, cap);
}

Series truncc(const Series& x, std::int64_t cap) { return x.exact() ? x : x.truncated(cap); }

Series invc(const Series& x, std::int64_t cap) {
    if (x.exact() && x.end() - x.val() == 1) return x.inverse();
    return x.inverse(cap);
}

// entry of least valuation among rows >= from in column c whose reduction is nonzero
int choose_pivot(const SeriesMatrix& M, int c, int from) {
    int best = -1;
    std::int64_t bv = kExact;
    for (int r = from; r < M.rows(); ++r) {
        Series red = M.at(r, c).reduce(1);
        if (red.is_zero()) continue;
        if (red.val() < bv) {
            bv = red.val();
            best = r;
        }
    }
    return best;
}

void swap_rows(SeriesMatrix& M, int a, int b) {
    if (a == b) return;
    for (int c = 0; c < M.cols(); ++c) std::swap(M.at(a, c), M.at(b, c));
}

}  // namespace

Series SeriesMatrix::det_mod_p(std::int64_t cap) const {
    if (rows_ != cols_) throw std::invalid_argument("det_mod_p: matrix is not square");
    SeriesMatrix M = reduce(1);
    const Series& z = M.e_.front();
    Series det = Series::constant(z.p(), 1, z.level(), 1);
    for (int c = 0; c < rows_; ++c) {
        int r = choose_pivot(M, c, c);
        if (r < 0) return Series(z.p(), 1, z.level(), cap);
        if (r != c) {
            swap_rows(M, r, c);
            det = det.scaled(-1);
        }
        const Series piv = M.at(c, c);
        det = mulc(det, piv, cap);
        Series inv = invc(piv, cap);
        for (int i = c + 1; i < rows_; ++i) {
            if (M.at(i, c).is_zero()) continue;
            Series f = mulc(M.at(i, c), inv, cap);
            for (int j = c; j < cols_; ++j) M.at(i, j) = truncc(M.at(i, j) - mulc(f, M.at(c, j), cap), cap);
        }
    }
    return truncc(det, cap);
}

SeriesMatrix SeriesMatrix::inverse(std::int64_t cap) const {
    if (rows_ != cols_) throw std::invalid_argument("inverse: matrix is not square");
    const Series& z = e_.front();
    SeriesMatrix M = *this;
    SeriesMatrix I = identity(z.p(), z.K(), rows_, z.level());
    for (int c = 0; c < rows_; ++c) {
        int r = choose_pivot(M, c, c);
        if (r < 0) throw MathError("matrix is not invertible modulo p");
        swap_rows(M, r, c);
        swap_rows(I, r, c);
        Series inv = invc(M.at(c, c), cap);
        for (int j = 0; j < cols_; ++j) {
            M.at(c, j) = mulc(M.at(c, j), inv, cap);
            I.at(c, j) = mulc(I.at(c, j), inv, cap);
        }
        for (int i = 0; i < rows_; ++i) {
            if (i == c || M.at(i, c).is_zero()) continue;
            Series f = M.at(i, c);
            for (int j = 0; j < cols_; ++j) {
                M.at(i, j) = truncc(M.at(i, j) - mulc(f, M.at(c, j), cap), cap);
                I.at(i, j) = truncc(I.at(i, j) - mulc(f, I.at(c, j), cap), cap);
            }
        }
    }
    return I;
}

SeriesMatrix SeriesMatrix::pow(int k, std::int64_t cap) const {
    const Series& z = e_.front();
    SeriesMatrix r = identity(z.p(), z.K(), rows_, z.level());
    for (int i = 0; i < k; ++i) r = r.mul(*this, cap);
    return r;
}

// ---------------------------------------------------------------- modules

const GammaGenerator& PhiGammaModule::gamma() const {
    for (auto& g : generators)
        if (g.tag == "gamma") return g;
    throw std::invalid_argument("module has no gamma generator");
}

const GammaGenerator* PhiGammaModule::gamma_tilde() const {
    for (auto& g : generators)
        if (g.tag == "gamma_tilde") return &g;
    return nullptr;
}

namespace {

SeriesMatrix phi_matrix(const SeriesMatrix& M, std::int64_t cap) {
    return M.map([cap](const Series& x) { return phi_A(x, cap); });
}

SeriesMatrix gamma_matrix(const SeriesMatrix& M, std::int64_t a, std::int64_t cap) {
    const PAdicInt pa = PAdicInt::exact(M.p(), a);
    return M.map([&pa, cap](const Series& x) { return gamma_A(x, pa, cap); });
}

SeriesMatrix delta_matrix(const SeriesMatrix& M, std::int64_t d, std::int64_t cap) {
    return M.map([d, cap](const Series& x) { return delta_e(x, d, cap); });
}

ModuleCheck failure(const std::string& inv, int r, int c, const std::string& detail) {
    ModuleCheck f;
    f.ok = false;
    f.invariant = inv;
    f.row = r;
    f.col = c;
    f.detail = detail;
    return f;
}

// first entry where A and B differ, or (-1, -1)
std::pair<int, int> first_difference(const SeriesMatrix& A, const SeriesMatrix& B) {
    // column by column: the two composite operators applied to e_j
    for (int j = 0; j < A.cols(); ++j)
        for (int i = 0; i < A.rows(); ++i)
            if (A.at(i, j) != B.at(i, j)) return {i, j};
    return {-1, -1};
}

std::int64_t primitive_root(int p) {
    for (std::int64_t g = 2; g < p; ++g) {
        bool ok = true;
        for (std::int64_t k = 1; k < p - 1; ++k)
            if (powmod(g, k, p) == 1) ok = false;
        if (ok) return g;
    }
    return 1;
}

}  // namespace

ModuleCheck check_module(const PhiGammaModule& D) {
    const int r = D.rank;
    auto shape_ok = [&](const SeriesMatrix& M) {
        if (M.rows() != r || M.cols() != r) return false;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) {
                const Series& x = M.at(i, j);
                if (x.p() != D.p || x.K() != D.s || x.level() != 0) return false;
            }
        return true;
    };
    if (r < 1) return failure("shape", -1, -1, "rank must be positive");
    if (!shape_ok(D.Phi)) return failure("shape", -1, -1, "Phi is not an r x r matrix over Z/p^s((pi))");
    int ngamma = 0, ntilde = 0;
    for (auto& g : D.generators) {
        if (g.tag == "gamma")
            ++ngamma;
        else if (g.tag == "gamma_tilde")
            ++ntilde;
        else
            return failure("shape", -1, -1, "unknown generator tag " + g.tag);
        if (!shape_ok(g.G)) return failure("shape", -1, -1, "generator " + g.tag + " is not an r x r matrix");
        if (g.a % D.p == 0) return failure("shape", -1, -1, "generator exponent must be a p-adic unit");
    }
    if (ngamma != 1) return failure("shape", -1, -1, "exactly one gamma generator is required");
    if (D.relative != (ntilde == 1) || ntilde > 1)
        return failure("shape", -1, -1, "relative modules carry exactly one gamma_tilde generator, others none");
    if (D.relative && D.s != 1) return failure("shape", -1, -1, "relative modules are supported at s = 1 only");
    if (!D.delta.empty() && static_cast<int>(D.delta.size()) != r)
        return failure("shape", -1, -1, "delta needs one exponent per basis vector");
    if (D.relative && !D.delta.empty()) return failure("shape", -1, -1, "relative modules carry no Delta data");

    const std::int64_t cap = D.window;
    Series det = D.Phi.det_mod_p(cap);
    if (det.is_zero()) return failure("etale", -1, -1, "det(Phi) vanishes modulo p");

    for (auto& g : D.generators) {
        const std::int64_t a = g.tag == "gamma" ? g.a : 1;
        SeriesMatrix lhs = D.Phi.mul(phi_matrix(g.G, cap), cap);
        SeriesMatrix rhs = g.G.mul(gamma_matrix(D.Phi, a, cap), cap);
        auto [i, j] = first_difference(lhs, rhs);
        if (i >= 0)
            return failure("commutation", i, j,
                           "Phi phi(G) != G gamma(Phi) for " + g.tag + ": " + lhs.at(i, j).to_string() + " vs " +
                               rhs.at(i, j).to_string());
    }
    if (D.relative) {
        const SeriesMatrix& G = D.gamma().G;
        const SeriesMatrix& Gt = D.gamma_tilde()->G;
        SeriesMatrix lhs = G.mul(gamma_matrix(Gt, D.chi(), cap), cap);
        // G~ has order p, so only chi mod p matters
        SeriesMatrix Gchi = Gt.pow(static_cast<int>(mod_reduce(D.chi(), D.p)), cap);
        SeriesMatrix rhs = Gchi.mul(G, cap);
        auto [i, j] = first_difference(lhs, rhs);
        if (i >= 0) return failure("semidirect", i, j, "G gamma(G~) != G~^chi G");
        if (!Gt.pow(D.p, cap).is_identity())
            return failure("semidirect", -1, -1, "G~ must have order dividing p");
    }
    if (!D.delta.empty()) {
        const std::int64_t g = primitive_root(D.p);
        const std::int64_t q = ipow(D.p, D.s);
        const std::int64_t w = teichmuller_digit(D.p, g, D.s).residue;
        std::vector<const SeriesMatrix*> mats{&D.Phi};
        for (auto& gen : D.generators) mats.push_back(&gen.G);
        for (const SeriesMatrix* M : mats) {
            SeriesMatrix dm = delta_matrix(*M, g, cap);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < r; ++j) {
                    int e = D.delta[static_cast<std::size_t>(j)] - D.delta[static_cast<std::size_t>(i)];
                    e = ((e % (D.p - 1)) + (D.p - 1)) % (D.p - 1);
                    Series want = M->at(i, j).scaled(powmod(w, e, q)).truncated(cap);
                    if (dm.at(i, j) != want) return failure("delta", i, j, "entry is not Delta-equivariant");
                }
        }
    }
    return {};
}

PhiGammaModule make_module(int p, int s, const SeriesMatrix& Phi, const std::vector<GammaGenerator>& gens,
                           bool relative, std::vector<int> delta, std::int64_t window) {
    if (!is_prime(p) || p == 2) throw std::invalid_argument("prime must be odd");
    if (s < 1 || s > 6) throw std::invalid_argument("power must lie in [1, 6]");
    PhiGammaModule D;
    D.p = p;
    D.s = s;
    D.rank = Phi.rows();
    D.Phi = Phi;
    D.generators = gens;
    D.relative = relative;
    for (auto& e : delta) e = ((e % (p - 1)) + (p - 1)) % (p - 1);
    D.delta = std::move(delta);
    D.window = window;
    ModuleCheck c = check_module(D);
    if (!c.ok) {
        std::string where = c.row >= 0 ? " at entry (" + std::to_string(c.row) + ", " + std::to_string(c.col) + ")" : "";
        throw ModuleInvalid(c.invariant + where + ": " + c.detail, c);
    }
    return D;
}

PhiGammaModule trivial_module(int p, int s, int rank) {
    SeriesMatrix I = SeriesMatrix::identity(p, s, rank);
    return make_module(p, s, I, {{"gamma", I, default_chi(p)}}, false, std::vector<int>(static_cast<std::size_t>(rank), 0));
}

PhiGammaModule cyclotomic_twist_module(int p, int s, int n) { return tate_twist(trivial_module(p, s), n); }

PhiGammaModule pi_module(int p, std::int64_t window) {
    const std::int64_t a = default_chi(p);
    Series pi = Series::monomial(p, 1, 0, 1, 1);
    Series gpi = gamma_A(pi, PAdicInt::exact(p, a), window + 2);
    Series h = gpi.shifted(-1) - Series::constant(p, 1, 0, 1);  // u - 1
    // G = u^{1/(p-1)} since phi^k(u) = u^{p^k} in characteristic p
    const int digits = PAdicInt::max_digits(p);
    const std::int64_t q = ipow(p, digits);
    PAdicInt e{inverse_mod(p - 1, q), digits};
    Series root = one_plus_t_pow_minus_one(p, 1, 0, e, window).compose(h.truncated(window), window);
    Series G = root + Series::constant(p, 1, 0, 1);
    SeriesMatrix Phi(1, 1, pi), Gm(1, 1, G.truncated(window));
    return make_module(p, 1, Phi, {{"gamma", Gm, a}}, false, {}, window);
}

PhiGammaModule tate_twist(const PhiGammaModule& D, int n) {
    PhiGammaModule r = D;
    const std::int64_t q = ipow(D.p, D.s);
    std::int64_t c = powmod(n >= 0 ? D.chi() : inverse_mod(mod_reduce(D.chi(), q), q), n >= 0 ? n : -n, q);
    for (auto& g : r.generators)
        if (g.tag == "gamma") g.G = g.G.scaled(c);
    for (auto& e : r.delta) e = (((e + n) % (D.p - 1)) + (D.p - 1)) % (D.p - 1);
    return r;
}

PhiGammaModule dual_module(const PhiGammaModule& D) {
    const std::int64_t cap = D.window;
    std::vector<GammaGenerator> gens;
    for (auto& g : D.generators) gens.push_back({g.tag, g.G.inverse(cap).transpose(), g.a});
    std::vector<int> delta;
    for (int e : D.delta) delta.push_back(-e);
    return make_module(D.p, D.s, D.Phi.inverse(cap).transpose(), gens, D.relative, delta, D.window);
}

PhiGammaModule tensor_product(const PhiGammaModule& A, const PhiGammaModule& B) {
    if (A.p != B.p || A.s != B.s || A.relative != B.relative || A.chi() != B.chi())
        throw std::invalid_argument("tensor_product: modules over different rings");
    std::vector<GammaGenerator> gens;
    for (auto& g : A.generators) {
        const GammaGenerator* h = nullptr;
        for (auto& k : B.generators)
            if (k.tag == g.tag) h = &k;
        gens.push_back({g.tag, g.G.kron(h->G), g.a});
    }
    std::vector<int> delta;
    if (!A.delta.empty() && !B.delta.empty())
        for (int x : A.delta)
            for (int y : B.delta) delta.push_back(x + y);
    return make_module(A.p, A.s, A.Phi.kron(B.Phi), gens, A.relative, delta, std::min(A.window, B.window));
}

PhiGammaModule reduce_mod(const PhiGammaModule& D, int n) {
    if (n < 1 || n > D.s) throw std::invalid_argument("reduce_mod: need 1 <= n <= s");
    std::vector<GammaGenerator> gens;
    for (auto& g : D.generators) gens.push_back({g.tag, g.G.reduce(n), g.a});
    return make_module(D.p, n, D.Phi.reduce(n), gens, D.relative, D.delta, D.window);
}

PhiGammaModule random_relative_module(int p, int rank, std::mt19937_64& rng) {
    if (rank > p) throw std::invalid_argument("random_relative_module: rank must not exceed p");
    std::uniform_int_distribution<std::int64_t> dist(0, p - 1), unit(1, p - 1);
    Mat N = Mat::Zero(rank, rank);
    for (int i = 0; i < rank; ++i)
        for (int j = i + 1; j < rank; ++j) N(i, j) = dist(rng);
    auto poly = [&](std::int64_t c0) {
        // c0 * (I + a1 N + a2 N^2 + ...)
        Mat acc = Mat::Identity(rank, rank), Np = Mat::Identity(rank, rank);
        for (int k = 1; k < rank; ++k) {
            Np = (Np * N).unaryExpr([p](std::int64_t x) { return mod_reduce(x, p); });
            acc += dist(rng) * Np;
        }
        return (acc * c0).unaryExpr([p](std::int64_t x) { return mod_reduce(x, p); }).eval();
    };
    auto to_series = [&](const Mat& m) {
        SeriesMatrix S(rank, rank, Series(p, 1, 0));
        for (int i = 0; i < rank; ++i)
            for (int j = 0; j < rank; ++j) S.at(i, j) = Series::constant(p, 1, 0, m(i, j));
        return S;
    };
    Mat Gt = (Mat::Identity(rank, rank) + N).unaryExpr([p](std::int64_t x) { return mod_reduce(x, p); });
    return make_module(p, 1, to_series(poly(unit(rng))),
                       {{"gamma", to_series(poly(unit(rng))), default_chi(p)}, {"gamma_tilde", to_series(Gt), 1}}, true);
}

// ---------------------------------------------------------------- phi-fixed points

PhiFixedReport solve_phi_fixed(const PhiGammaModule& D, int depth_budget) {
    (void)depth_budget;
    if (D.rank != 1 || D.s != 1) throw std::invalid_argument("solve_phi_fixed: rank 1 at s = 1 only");
    PhiFixedReport rep;
    const int p = D.p;
    const std::int64_t cap = D.window;
    const Series f = D.Phi.at(0, 0);
    // v^{p-1} = Phi^{-1} = c pi^e (1 + h)
    Series finv = f.inverse(cap + f.val());
    const std::int64_t e = finv.val();
    const std::int64_t c = finv.coeff(e);
    if (mod_reduce(e, p - 1) != 0) {
        rep.reason = "v(Phi) is not divisible by p-1: the root needs a Kummer extension, which no Artin-Schreier layer supplies";
        return rep;
    }
    if (c != 1) {
        rep.reason = "leading coefficient of Phi^{-1} is not a (p-1)-th power in F_p: needs a residue extension";
        return rep;
    }
    Series h = finv.shifted(-e).scaled(inverse_mod(c, p)) - Series::constant(p, 1, 0, 1);
    const int digits = PAdicInt::max_digits(p);
    PAdicInt root{inverse_mod(p - 1, ipow(p, digits)), digits};
    Series v = Series::constant(p, 1, 0, 1);
    if (!h.is_zero()) v = v + one_plus_t_pow_minus_one(p, 1, 0, root, cap).compose(h, cap);
    v = v.shifted(e / (p - 1)).truncated(cap);
    Series check = f.mul(phi_A(v, cap), cap) - v;
    if (!check.is_zero()) throw InvariantFailure("solve_phi_fixed: candidate fails Phi phi(v) = v");
    rep.outcome = PhiFixedReport::Outcome::Solved;
    rep.v = v;
    rep.nonzero_solutions = p - 1;
    rep.layers_used = 0;
    return rep;
}

// ---------------------------------------------------------------- file format

namespace {

const char* kFormat = "phigamma-module 1";

SeriesMatrix matrix_from_json(const nlohmann::json& j, int p, int s, int rank, int line, int col, const std::string& key) {
    if (!j.is_array() || static_cast<int>(j.size()) != rank)
        throw ParseError(key + " must be an array of " + std::to_string(rank) + " rows", line, col);
    SeriesMatrix M(rank, rank, Series(p, s, 0));
    for (int i = 0; i < rank; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<int>(row.size()) != rank)
            throw ParseError(key + " row " + std::to_string(i) + " must have " + std::to_string(rank) + " entries", line, col);
        for (int k = 0; k < rank; ++k) {
            const auto& x = row[static_cast<std::size_t>(k)];
            std::string text;
            if (x.is_string())
                text = x.get<std::string>();
            else if (x.is_number_integer())
                text = std::to_string(x.get<std::int64_t>());
            else
                throw ParseError(key + " entries must be strings", line, col);
            try {
                M.at(i, k) = al_parse(text, p, s);
            } catch (const ParseError& e) {
                throw ParseError(key + "[" + std::to_string(i) + "][" + std::to_string(k) + "]: " + e.what(), line, col);
            }
        }
    }
    return M;
}

nlohmann::json matrix_to_json(const SeriesMatrix& M) {
    nlohmann::json j = nlohmann::json::array();
    for (int i = 0; i < M.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int k = 0; k < M.cols(); ++k) row.push_back(M.at(i, k).to_string("pi"));
        j.push_back(row);
    }
    return j;
}

}  // namespace

PhiGammaModule parse_module(const std::string& text) {
    struct Entry {
        nlohmann::json value;
        int line, col;
    };
    std::map<std::string, Entry> kv;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::size_t start = raw.find_first_not_of(" \t\r");
        if (start == std::string::npos || raw[start] == '#') continue;
        std::size_t eq = raw.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno, static_cast<int>(start) + 1);
        std::string key = raw.substr(start, eq - start);
        key.erase(key.find_last_not_of(" \t") + 1);
        if (key.empty()) throw ParseError("missing key", lineno, static_cast<int>(start) + 1);
        const std::size_t vstart = eq + 1;
        std::string value = raw.substr(vstart);
        try {
            kv[key] = {nlohmann::json::parse(value), lineno, static_cast<int>(vstart) + 1};
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("malformed value for " + key, lineno, static_cast<int>(vstart + e.byte));
        }
    }
    if (kv.empty()) throw ParseError("empty module description", 1, 1);
    auto need = [&](const std::string& key) -> const Entry& {
        auto it = kv.find(key);
        if (it == kv.end()) throw ParseError("missing key '" + key + "'", lineno, 1);
        return it->second;
    };
    auto get_int = [&](const std::string& key, std::optional<std::int64_t> def = std::nullopt) -> std::int64_t {
        auto it = kv.find(key);
        if (it == kv.end()) {
            if (def) return *def;
            need(key);
        }
        const Entry& e = it->second;
        if (!e.value.is_number_integer()) throw ParseError(key + " must be an integer", e.line, e.col);
        return e.value.get<std::int64_t>();
    };
    static const std::vector<std::string> known{"format", "prime", "power", "rank", "window", "relative",
                                                "chi", "delta", "phi", "gamma", "gamma_tilde"};
    for (auto& [k, e] : kv)
        if (std::find(known.begin(), known.end(), k) == known.end()) throw ParseError("unknown key '" + k + "'", e.line, 1);
    const Entry& fmt = need("format");
    if (!fmt.value.is_string() || fmt.value.get<std::string>() != kFormat)
        throw ParseError(std::string("format must be \"") + kFormat + "\"", fmt.line, fmt.col);
    const int p = static_cast<int>(get_int("prime"));
    const int s = static_cast<int>(get_int("power", 1));
    const int rank = static_cast<int>(get_int("rank"));
    const std::int64_t window = get_int("window", 64);
    if (p < 3 || !is_prime(p)) throw ParseError("prime must be an odd prime", kv["prime"].line, kv["prime"].col);
    if (s < 1 || s > 6) throw ParseError("power must lie in [1, 6]", kv.count("power") ? kv["power"].line : 1, 1);
    if (rank < 1) throw ParseError("rank must be positive", kv["rank"].line, kv["rank"].col);
    if (window < 1) throw ParseError("window must be positive", kv["window"].line, kv["window"].col);
    bool relative = false;
    if (kv.count("relative")) {
        const Entry& e = kv["relative"];
        if (!e.value.is_boolean()) throw ParseError("relative must be true or false", e.line, e.col);
        relative = e.value.get<bool>();
    }
    const std::int64_t chi = get_int("chi", default_chi(p));
    std::vector<int> delta;
    if (kv.count("delta")) {
        const Entry& e = kv["delta"];
        if (!e.value.is_array()) throw ParseError("delta must be a list of integers", e.line, e.col);
        for (auto& x : e.value) {
            if (!x.is_number_integer()) throw ParseError("delta must be a list of integers", e.line, e.col);
            delta.push_back(x.get<int>());
        }
    }
    const Entry& ph = need("phi");
    const Entry& ga = need("gamma");
    SeriesMatrix Phi = matrix_from_json(ph.value, p, s, rank, ph.line, ph.col, "phi");
    std::vector<GammaGenerator> gens{{"gamma", matrix_from_json(ga.value, p, s, rank, ga.line, ga.col, "gamma"), chi}};
    if (relative) {
        const Entry& gt = need("gamma_tilde");
        gens.push_back({"gamma_tilde", matrix_from_json(gt.value, p, s, rank, gt.line, gt.col, "gamma_tilde"), 1});
    } else if (kv.count("gamma_tilde")) {
        throw ParseError("gamma_tilde given for a non-relative module", kv["gamma_tilde"].line, 1);
    }
    return make_module(p, s, Phi, gens, relative, delta, window);
}

PhiGammaModule load_module(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_module(ss.str());
}

std::string write_module(const PhiGammaModule& D) {
    std::ostringstream out;
    out << "format = \"" << kFormat << "\"\n";
    out << "prime = " << D.p << "\n";
    out << "power = " << D.s << "\n";
    out << "rank = " << D.rank << "\n";
    out << "window = " << D.window << "\n";
    out << "relative = " << (D.relative ? "true" : "false") << "\n";
    out << "chi = " << D.chi() << "\n";
    if (!D.delta.empty()) out << "delta = " << nlohmann::json(D.delta).dump() << "\n";
    out << "phi = " << matrix_to_json(D.Phi).dump() << "\n";
    out << "gamma = " << matrix_to_json(D.gamma().G).dump() << "\n";
    if (D.relative) out << "gamma_tilde = " << matrix_to_json(D.gamma_tilde()->G).dump() << "\n";
    return out.str();
}

}  // namespace phigamma
