#include "phigamma/artin_schreier.hpp"

#include <stdexcept>

#include "phigamma/errors.hpp"
#include "phigamma/zmod_linalg.hpp"

namespace phigamma {

namespace {

using Monomial = TowerElement::Monomial;

std::int64_t ceil_rational(const Rational& r) {
    std::int64_t q = r.numerator() / r.denominator();
    if (q * r.denominator() < r.numerator()) ++q;
    return q;
}

std::int64_t grid_numerator_ceil(const TowerPtr& t, const Rational& v) {
    return ceil_rational(v * Rational(ipow(t->p, t->level)));
}

TowerElement hensel_sum(const TowerElement& P, const Rational& W) {
    TowerElement acc = TowerElement::zero(P.tower(), P.depth(), 1, kExact);
    TowerElement term = P;
    for (int n = 0; n < 64; ++n) {
        auto v = term.valuation();
        if (!v || *v >= W) break;
        acc = acc - term;
        term = term.frobenius();
    }
    return acc.truncated(grid_numerator_ceil(P.tower(), W));
}

// coefficient of x^e * theta^j in x (j.size() == x.depth())
std::int64_t coefficient_of(const TowerElement& x, std::int64_t e, const std::vector<int>& j) {
    const TowerElement* cur = &x;
    for (int d = x.depth(); d >= 1; --d) cur = &cur->coords()[static_cast<std::size_t>(j[static_cast<std::size_t>(d - 1)])];
    return cur->base().reduce(1).coeff(e);
}

// monomial of R_depth (all layers ramified) with valuation `target`
std::optional<Monomial> root_monomial(const TowerPtr& t, int depth, Rational target) {
    const int p = t->p;
    Monomial m{0, std::vector<int>(static_cast<std::size_t>(depth), 0), 1};
    for (int d = depth; d >= 1; --d) {
        const Rational vt = t->layers[static_cast<std::size_t>(d - 1)]->v_theta;
        const std::int64_t lower = ipow(p, t->level + d - 1);
        bool found = false;
        for (int j = 0; j < p; ++j) {
            Rational rest = target - vt * Rational(j);
            if ((rest * Rational(lower)).denominator() == 1) {
                m.j[static_cast<std::size_t>(d - 1)] = j;
                target = rest;
                found = true;
                break;
            }
        }
        if (!found) return std::nullopt;
    }
    Rational e = target * Rational(ipow(p, t->level));
    if (e.denominator() != 1) return std::nullopt;
    m.e = e.numerator();
    return m;
}

std::vector<std::vector<std::int64_t>> binomials_mod(int p) {
    std::vector<std::vector<std::int64_t>> C(static_cast<std::size_t>(p), std::vector<std::int64_t>(static_cast<std::size_t>(p), 0));
    for (int n = 0; n < p; ++n) {
        C[n][0] = 1;
        for (int k = 1; k <= n; ++k) C[n][k] = (C[n - 1][k - 1] + (k <= n - 1 ? C[n - 1][k] : 0)) % p;
    }
    return C;
}

// sum_j a_j theta^j with theta the top (unramified) generator, a_j in F_p
TowerElement residue_element(const TowerPtr& t, int depth, const std::vector<std::int64_t>& a) {
    TowerElement r = TowerElement::zero(t, depth, 1, kExact);
    for (std::size_t j = 0; j < a.size(); ++j)
        if (a[j] % t->p) r.coord(static_cast<int>(j)) = TowerElement::constant(t, depth - 1, 1, a[j]);
    return r;
}

// x^p - x = mu in F_p[theta] with theta^p = theta + c; solution with zero constant term
std::vector<std::int64_t> solve_residue_as(int p, std::int64_t c, const std::vector<std::int64_t>& mu) {
    auto C = binomials_mod(p);
    if (mod_reduce(mu[static_cast<std::size_t>(p - 1)], p) != 0)
        throw DepthExceeded("residue field extension beyond F_{p^p} required");
    std::vector<std::int64_t> cp(static_cast<std::size_t>(p), 1);
    for (int i = 1; i < p; ++i) cp[i] = cp[i - 1] * c % p;
    std::vector<std::int64_t> x(static_cast<std::size_t>(p), 0);
    for (int i = p - 2; i >= 0; --i) {
        std::int64_t rhs = mu[static_cast<std::size_t>(i)];
        for (int j = i + 2; j < p; ++j) rhs -= C[j][i] * cp[j - i] % p * x[j];
        x[i + 1] = mod_reduce(rhs * inverse_mod(mod_reduce((i + 1) * c, p), p), p);
    }
    return x;
}

ASSolution finish(TowerElement a, const TowerElement& b) {
    ASSolution s;
    s.depth = a.depth();
    s.valuation = a.valuation();
    TowerElement r = a.frobenius() - a - b.with_tower(a.tower()).embed(a.depth());
    s.residual_zero = r.is_zero();
    s.certified = r.precision_valuation();
    s.value = std::move(a);
    return s;
}

Rational effective_window(const TowerElement& b, std::optional<Rational> window) {
    auto pv = b.precision_valuation();
    Rational W = window ? *window : (pv ? *pv : kDefaultSolveWindow);
    if (pv && *pv < W) W = *pv;
    return W;
}

}  // namespace

ASSolution solve_as_positive(const TowerElement& b_in, std::optional<Rational> window) {
    TowerElement b = b_in.embed(static_cast<int>(b_in.tower()->layers.size()));
    auto v = b.valuation();
    if (v && *v <= Rational(0)) throw MathError("solve_as_positive: v_E(b) must be positive");
    if (!v) return finish(TowerElement::zero(b.tower(), b.depth(), 1, b.min_prec()), b);
    return finish(hensel_sum(b, effective_window(b, window)), b);
}

ASSolution solve_as_positive(const NormFieldElement& b, std::optional<Rational> window) {
    return solve_as_positive(TowerElement::from_base(make_tower(b.p(), b.level()), b.reduce(1)), window);
}

ASSolution solve_as_general(const TowerElement& b_in, std::optional<Rational> window) {
    if (b_in.K() != 1) throw std::invalid_argument("solve_as_general: characteristic p only");
    const TowerPtr t = b_in.tower();
    const int p = t->p;
    const int D = static_cast<int>(t->layers.size());
    const TowerElement b = b_in.embed(D);
    const bool unram = D >= 1 && !t->layers.back()->ramified;
    const int Dr = unram ? D - 1 : D;
    std::int64_t cu = 0;
    if (unram) cu = mod_reduce(coefficient_of(t->layers.back()->u.embed(D - 1), 0, std::vector<int>(static_cast<std::size_t>(D - 1), 0)), p);

    const auto pv = b.precision_valuation();
    TowerElement N = b;
    TowerElement acc = TowerElement::zero(t, D, 1, kExact);
    TowerElement irr = TowerElement::zero(t, D, 1, kExact);
    std::int64_t c0 = 0;

    for (int guard = 0;; ++guard) {
        if (guard > 100000) throw InvariantFailure("solve_as_general: reduction does not terminate");
        auto mons = N.monomials();
        if (mons.empty()) break;
        Rational v = N.monomial_valuation(mons[0]);
        for (auto& m : mons) {
            Rational w = N.monomial_valuation(m);
            if (w < v) v = w;
        }
        if (v > Rational(0)) break;
        if (pv && v >= *pv) throw PrecisionError("solve_as_general: input precision too low to isolate its polar part");
        // leading coefficient: one monomial, or an element of F_p[theta] over an unramified top layer
        Monomial lead{};
        std::vector<std::int64_t> mu(static_cast<std::size_t>(p), 0);
        bool have = false;
        for (auto& m : mons) {
            if (N.monomial_valuation(m) != v) continue;
            if (!have) lead = m;
            have = true;
            mu[static_cast<std::size_t>(unram ? m.j.back() : 0)] = mod_reduce(m.c, p);
        }
        std::vector<int> lead_ram(lead.j.begin(), lead.j.begin() + Dr);

        if (v == Rational(0)) {
            if (!unram) {
                c0 = mod_reduce(c0 + lead.c, p);
                N = N - TowerElement::constant(t, D, 1, lead.c);
            } else {
                auto x = solve_residue_as(p, cu, mu);
                N = N - residue_element(t, D, mu);
                acc = acc + residue_element(t, D, x);
            }
            continue;
        }

        auto M = root_monomial(t, Dr, v / Rational(p));
        if (!M) {
            if (unram) throw DepthExceeded("a ramified layer above an unramified one would be needed");
            TowerElement T = TowerElement::from_monomial(t, D, 1, lead, kExact);
            N = N - T;
            irr = irr + T;
            continue;
        }
        TowerElement Me = TowerElement::from_monomial(t, Dr, 1, *M, kExact).embed(D);
        std::vector<int> jl = lead_ram;
        if (unram) jl.push_back(0);
        const std::int64_t lambda = mod_reduce(coefficient_of(Me.frobenius(), lead.e, jl), p);
        if (lambda == 0) throw InvariantFailure("solve_as_general: Frobenius lost the leading monomial");
        const std::int64_t li = inverse_mod(lambda, p);
        TowerElement T;
        if (!unram) {
            T = Me.scaled(lead.c * li % p);
        } else {
            // nu = F^{-1}(mu / lambda) with F(theta) = theta + cu
            TowerElement th = TowerElement::theta(t, D, D, 1) - TowerElement::constant(t, D, 1, cu);
            TowerElement nu = TowerElement::zero(t, D, 1, kExact);
            TowerElement power = TowerElement::constant(t, D, 1, 1);
            for (int j = 0; j < p; ++j) {
                if (mu[static_cast<std::size_t>(j)]) nu = nu + power.scaled(mu[static_cast<std::size_t>(j)] * li % p);
                power = power * th;
            }
            T = nu * Me;
        }
        N = N - (T.frobenius() - T);
        acc = acc + T;
    }
    if (pv && *pv <= Rational(0)) throw PrecisionError("solve_as_general: input not known to valuation 0");

    TowerElement a = acc;
    if (!N.is_zero() || N.min_prec() < kExact) a = a + hensel_sum(N, effective_window(b, window));
    if (!irr.is_zero() || c0 != 0) {
        TowerElement u = irr + TowerElement::constant(t, D, 1, c0);
        ASExtension ext = adjoin_as_root(u);
        a = a.with_tower(ext.tower).embed(D + 1) + ext.theta;
    }
    return finish(a, b);
}

ASSolution solve_as_general(const NormFieldElement& b, int max_depth, std::optional<Rational> window) {
    return solve_as_general(TowerElement::from_base(make_tower(b.p(), b.level(), max_depth), b.reduce(1)), window);
}

namespace {

WittSolution solve_phi_minus_one_window(const WittVector& z_in, std::optional<Rational> window) {
    const int s = z_in.s();
    WittVector z = z_in.embed(static_cast<int>(z_in.tower()->layers.size()));
    WittVector y = WittVector::zero(z.tower(), s);
    y = y.embed(z.depth());
    for (int k = 0; k < s; ++k) {
        WittVector d = z + y - y.frobenius();
        for (int i = 0; i < k; ++i)
            if (!d[i].is_zero()) throw InvariantFailure("solve_phi_minus_one: lower components did not cancel");
        ASSolution sol = solve_as_general(d[k], window);
        const TowerPtr& nt = sol.value.tower();
        const int depth = sol.value.depth();
        std::vector<TowerElement> comps;
        for (int i = 0; i < s; ++i) comps.push_back(i == k ? sol.value : y[i].with_tower(nt).embed(depth));
        y = WittVector(comps);
        z = z.with_tower(nt).embed(depth);
    }
    WittSolution out;
    out.depth = y.depth();
    out.residual_zero = (y.frobenius() - y - z).is_zero();
    out.value = y;
    return out;
}

}  // namespace

WittSolution solve_phi_minus_one(const WittVector& z, std::optional<Rational> window) {
    if (window || z.min_prec() < kExact) return solve_phi_minus_one_window(z, window);
    // later components lose precision through products of polar parts, so widen until it suffices
    for (Rational W = kDefaultSolveWindow;; W *= Rational(2)) {
        try {
            WittSolution sol = solve_phi_minus_one_window(z, W);
            bool enough = true;
            for (auto& c : sol.value.components()) {
                auto pv = c.precision_valuation();
                if (pv && *pv < kDefaultSolveWindow) enough = false;
            }
            if (enough) return sol;
            if (W > Rational(4096)) throw PrecisionError("solve_phi_minus_one: could not certify the solution to the default window");
        } catch (const PrecisionError&) {
            if (W > Rational(4096)) throw;
        }
    }
}

WittVector sigma_split(const WittVector& z, std::optional<Rational> window) {
    return solve_phi_minus_one(z, window).value;
}

std::vector<std::int64_t> constant_coefficients(const WittVector& y) {
    std::vector<std::int64_t> out;
    for (int k = 0; k < y.s(); ++k)
        out.push_back(mod_reduce(coefficient_of(y[k], 0, std::vector<int>(static_cast<std::size_t>(y[k].depth()), 0)), y.p()));
    return out;
}

bool is_constant_vector(const WittVector& y) {
    for (int k = 0; k < y.s(); ++k)
        for (auto& m : y[k].monomials()) {
            if (m.e != 0) return false;
            for (int j : m.j)
                if (j != 0) return false;
        }
    return true;
}

}  // namespace phigamma
