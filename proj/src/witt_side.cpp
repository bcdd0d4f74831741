#include "phigamma/witt_side.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "phigamma/errors.hpp"
#include "phigamma/zmod_linalg.hpp"

namespace phigamma {

ArithLiftElement al_parse(const std::string& text, int p, int s) {
    Series z = Series::parse(text, p, s);
    if (z.level() != 0) throw ParseError("arithmetic model elements have integral exponents");
    return z;
}

ArithLiftElement phi_A(const ArithLiftElement& z, std::int64_t cap) {
    if (z.level() != 0) throw std::invalid_argument("phi_A: arithmetic model lives at level 0");
    if (z.is_zero()) return Series(z.p(), z.K(), 0, z.exact() ? kExact : std::min(cap, z.prec() * z.p()));
    if (z.exact() && cap >= kExact && z.val() < 0) throw PrecisionError("phi_A of an exact Laurent tail needs a cap");
    Series S = one_plus_t_pow_minus_one(z.p(), z.K(), 0, PAdicInt::exact(z.p(), z.p()), kExact);
    return z.compose(S, cap);
}

ArithLiftElement gamma_A(const ArithLiftElement& z, const PAdicInt& a, std::int64_t cap) {
    if (z.level() != 0) throw std::invalid_argument("gamma_A: arithmetic model lives at level 0");
    return gamma_e(z, a, cap);
}

Series divide_by_p_power(const Series& x, int k) {
    auto t = make_tower(x.p(), x.level());
    return TowerElement::from_base(t, x).divide_p_power(k).base();
}

// ---------------------------------------------------------------- Witt vectors

WittVector::WittVector(std::vector<TowerElement> components) : c_(std::move(components)) {
    if (c_.empty()) throw std::invalid_argument("WittVector: length must be positive");
    tower_ = c_[0].tower();
    int depth = 0;
    for (auto& c : c_) {
        if (c.K() != 1) throw std::invalid_argument("WittVector: components must be in characteristic p");
        if (c.tower()->layers.size() > tower_->layers.size()) tower_ = c.tower();
        depth = std::max(depth, c.depth());
    }
    for (auto& c : c_) c = c.with_tower(tower_).embed(depth);
}

WittVector WittVector::zero(const TowerPtr& t, int s, std::int64_t prec) {
    return WittVector(std::vector<TowerElement>(static_cast<std::size_t>(s), TowerElement::zero(t, 0, 1, prec)));
}

WittVector WittVector::one(const TowerPtr& t, int s) {
    WittVector r = zero(t, s);
    r.c_[0] = TowerElement::constant(t, 0, 1, 1);
    return r;
}

WittVector WittVector::from_series(const std::vector<Series>& components) {
    if (components.empty()) throw std::invalid_argument("WittVector: length must be positive");
    int level = 0;
    for (auto& c : components) level = std::max(level, c.level());
    auto t = make_tower(components[0].p(), level);
    std::vector<TowerElement> c;
    for (auto& x : components) c.push_back(TowerElement::from_base(t, x));
    return WittVector(c);
}

WittVector WittVector::teichmuller(const TowerElement& a, int s) {
    std::vector<TowerElement> c(static_cast<std::size_t>(s), TowerElement::zero(a.tower(), a.depth(), 1, kExact));
    c[0] = a;
    return WittVector(c);
}

WittVector WittVector::teichmuller(const NormFieldElement& a, int s) {
    return teichmuller(TowerElement::from_base(make_tower(a.p(), a.level()), a), s);
}

WittVector WittVector::random(int p, int s, int level, std::int64_t lo, std::int64_t hi, std::mt19937_64& rng) {
    std::vector<Series> c;
    for (int k = 0; k < s; ++k) c.push_back(Series::random(p, 1, level, lo, hi, rng));
    return from_series(c);
}

WittVector WittVector::integer(const TowerPtr& t, int s, std::int64_t n) {
    WittVector acc = zero(t, s), base = one(t, s);
    bool neg = n < 0;
    if (neg) n = -n;
    while (n > 0) {
        if (n & 1) acc = acc + base;
        n >>= 1;
        if (n) base = base + base;
    }
    return neg ? -acc : acc;
}

void align(WittVector& a, WittVector& b) {
    if (a.s() != b.s() || a.p() != b.p()) throw std::invalid_argument("Witt vectors of different shapes");
    TowerPtr t = a.tower()->layers.size() >= b.tower()->layers.size() ? a.tower() : b.tower();
    a = a.with_tower(t);
    b = b.with_tower(t);
    int d = std::max(a.depth(), b.depth());
    a = a.embed(d);
    b = b.embed(d);
}

WittVector WittVector::with_tower(const TowerPtr& t) const {
    WittVector r = *this;
    r.tower_ = t;
    for (auto& c : r.c_) c = c.with_tower(t);
    return r;
}

WittVector WittVector::embed(int depth) const {
    WittVector r = *this;
    for (auto& c : r.c_) c = c.embed(depth);
    return r;
}

WittVector WittVector::truncated(std::int64_t prec) const {
    WittVector r = *this;
    for (auto& c : r.c_) c = c.truncated(prec);
    return r;
}

std::vector<TowerElement> ghost_components(const std::vector<TowerElement>& lifted, int K) {
    std::vector<TowerElement> g, pw;
    const int p = lifted[0].p();
    for (std::size_t k = 0; k < lifted.size(); ++k) {
        pw.push_back(lifted[k].lift(K));
        TowerElement acc = TowerElement::zero(lifted[0].tower(), lifted[0].depth(), K, kExact);
        for (std::size_t i = 0; i <= k; ++i) {
            if (i < k) pw[i] = pw[i].pow(p);
            acc = acc + pw[i].scaled(ipow(p, static_cast<int>(i)));
        }
        g.push_back(acc);
    }
    return g;
}

namespace {

// Witt components of the vector whose ghost components are g (mod p^s).
std::vector<TowerElement> from_ghost(const std::vector<TowerElement>& g, int p) {
    const int s = static_cast<int>(g.size());
    std::vector<TowerElement> out, pw;
    for (int k = 0; k < s; ++k) {
        TowerElement R = g[static_cast<std::size_t>(k)];
        for (int i = 0; i < k; ++i) {
            auto& w = pw[static_cast<std::size_t>(i)];
            w = w.pow(p);
            R = R - w.scaled(ipow(p, i));
        }
        TowerElement zk = R.divide_p_power(k);
        out.push_back(zk);
        pw.push_back(zk.lift(s));
    }
    return out;
}

template <class Op>
WittVector ghost_combine(const WittVector& x, const WittVector& y, Op op) {
    const int s = x.s();
    std::vector<TowerElement> xh, yh;
    for (int k = 0; k < s; ++k) {
        xh.push_back(x[k].lift(s));
        yh.push_back(y[k].lift(s));
    }
    auto gx = ghost_components(xh, s), gy = ghost_components(yh, s);
    std::vector<TowerElement> gz;
    for (int k = 0; k < s; ++k) gz.push_back(op(gx[static_cast<std::size_t>(k)], gy[static_cast<std::size_t>(k)]));
    return WittVector(from_ghost(gz, x.p()));
}

}  // namespace

WittVector WittVector::operator+(const WittVector& o) const {
    WittVector a = *this, b = o;
    align(a, b);
    return ghost_combine(a, b, [](const TowerElement& u, const TowerElement& v) { return u + v; });
}

WittVector WittVector::operator-(const WittVector& o) const {
    WittVector a = *this, b = o;
    align(a, b);
    return ghost_combine(a, b, [](const TowerElement& u, const TowerElement& v) { return u - v; });
}

WittVector WittVector::operator-() const {
    return ghost_combine(*this, *this, [](const TowerElement& u, const TowerElement&) { return -u; });
}

WittVector WittVector::operator*(const WittVector& o) const {
    WittVector a = *this, b = o;
    align(a, b);
    return ghost_combine(a, b, [](const TowerElement& u, const TowerElement& v) { return u * v; });
}

WittVector WittVector::frobenius() const {
    WittVector r = *this;
    for (auto& c : r.c_) c = c.frobenius();
    return r;
}

WittVector WittVector::verschiebung() const {
    WittVector r = *this;
    for (int k = s() - 1; k > 0; --k) r.c_[static_cast<std::size_t>(k)] = c_[static_cast<std::size_t>(k - 1)];
    r.c_[0] = TowerElement::zero(tower_, depth(), 1, kExact);
    return r;
}

bool WittVector::is_zero() const {
    for (auto& c : c_)
        if (!c.is_zero()) return false;
    return true;
}

bool WittVector::operator==(const WittVector& o) const {
    WittVector a = *this, b = o;
    align(a, b);
    for (int k = 0; k < a.s(); ++k)
        if (a[k] != b[k]) return false;
    return true;
}

std::int64_t WittVector::min_prec() const {
    std::int64_t m = kExact;
    for (auto& c : c_) m = std::min(m, c.min_prec());
    return m;
}

std::string WittVector::to_string() const {
    std::ostringstream out;
    out << "(";
    for (int k = 0; k < s(); ++k) out << (k ? ", " : "") << c_[static_cast<std::size_t>(k)].to_string();
    out << ")";
    return out.str();
}

// ---------------------------------------------------------------- ghost check

namespace {

TowerElement random_lift(const TowerElement& x, int K, std::mt19937_64& rng) {
    const int p = x.p();
    return x.lift(K).map_base([&](const Series& b) {
        if (b.is_zero()) return b;
        std::vector<std::int64_t> c(b.coeffs());
        std::uniform_int_distribution<std::int64_t> d(0, ipow(p, K - 1) - 1);
        for (auto& v : c) v += p * d(rng);
        return Series::from_coeffs(p, K, b.level(), b.val(), c, b.prec());
    });
}

bool congruent(const TowerElement& a, const TowerElement& b, int e) { return (a - b).reduce(e).is_zero(); }

}  // namespace

GhostCheckResult ghost_check(const WittVector& x_in, const WittVector& y_in, int t, std::mt19937_64& rng) {
    WittVector x = x_in, y = y_in;
    align(x, y);
    WittVector sum = x + y, prod = x * y;
    const int s = x.s(), K = s + t;
    auto lifts = [&](const WittVector& w) {
        std::vector<TowerElement> v;
        for (int k = 0; k < s; ++k) v.push_back(random_lift(w[k], K, rng));
        return ghost_components(v, K);
    };
    auto gx = lifts(x), gy = lifts(y), gs = lifts(sum.with_tower(x.tower())), gp = lifts(prod.with_tower(x.tower()));
    GhostCheckResult r;
    for (int k = 0; k < s; ++k) {
        auto i = static_cast<std::size_t>(k);
        bool ok = congruent(gs[i], gx[i] + gy[i], k + 1) && congruent(gp[i], gx[i] * gy[i], k + 1);
        r.verified.push_back(k + 1);
        if (!ok && r.passed) {
            r.passed = false;
            r.failing_component = k;
        }
    }
    return r;
}

// ---------------------------------------------------------------- valuations

namespace {

Rational flat(const Rational& v, int p) { return v * Rational(p, p - 1); }

std::optional<Rational> w_from_digits(const std::vector<std::optional<Rational>>& v, const Rational& r, int p) {
    std::optional<Rational> w;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (!v[k]) continue;
        Rational t = r * flat(*v[k], p) + Rational(static_cast<long long>(k));
        if (!w || t < *w) w = t;
    }
    return w;
}

std::optional<Rational> radius_from_digits(const std::vector<std::optional<Rational>>& v, int p) {
    std::optional<Rational> best;
    std::optional<std::size_t> prev;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (!v[k]) continue;
        if (prev) {
            Rational drop = flat(*v[*prev], p) - flat(*v[k], p);
            if (drop > Rational(0)) {
                Rational r = Rational(static_cast<long long>(k - *prev)) / drop;
                if (!best || r < *best) best = r;
            }
        }
        prev = k;
    }
    return best;
}

std::vector<std::optional<Rational>> teich_digits(const WittVector& z) {
    std::vector<std::optional<Rational>> v;
    for (int k = 0; k < z.s(); ++k) v.push_back(teichmuller_digit_valuation(z, k));
    return v;
}

// p-adic digit expansion z = sum p^k z_k of the arithmetic model
std::vector<std::optional<Rational>> arith_digits(const ArithLiftElement& z) {
    std::vector<std::optional<Rational>> v;
    const int p = z.p();
    for (int k = 0; k < z.K(); ++k) {
        std::optional<std::int64_t> first;
        for (std::int64_t e = z.val(); e < z.end() && !first; ++e)
            if ((z.coeff(e) / ipow(p, k)) % p) first = e;
        if (first)
            v.push_back(Rational(*first, ipow(p, z.level())));
        else
            v.push_back(std::nullopt);
    }
    return v;
}

}  // namespace

std::optional<Rational> teichmuller_digit_valuation(const WittVector& z, int k) {
    auto v = z[k].valuation();
    if (!v) return std::nullopt;
    return *v / Rational(ipow(z.p(), k));
}

std::optional<Rational> v_e_upto(const WittVector& z, int N) {
    std::optional<Rational> best;
    for (int k = 0; k <= std::min(N, z.s() - 1); ++k) {
        auto v = teichmuller_digit_valuation(z, k);
        if (v && (!best || *v < *best)) best = v;
    }
    return best;
}

std::optional<Rational> w_r(const WittVector& z, const Rational& r) { return w_from_digits(teich_digits(z), r, z.p()); }

std::optional<Rational> w_r(const ArithLiftElement& z, const Rational& r) {
    return w_from_digits(arith_digits(z), r, z.p());
}

ValuationReport valuation_report(const WittVector& z, const std::vector<int>& Ns, const std::vector<Rational>& rs) {
    ValuationReport rep;
    for (int N : Ns) rep.v_upto.emplace_back(N, v_e_upto(z, N));
    auto d = teich_digits(z);
    for (auto& r : rs) rep.w.emplace_back(r, w_from_digits(d, r, z.p()));
    rep.radius = radius_from_digits(d, z.p());
    for (int k = 0; k < z.s(); ++k)
        if (z[k].is_zero() && z[k].min_prec() < kExact) rep.precision_limited = true;
    return rep;
}

ValuationReport valuation_report(const ArithLiftElement& z, const std::vector<int>& Ns, const std::vector<Rational>& rs) {
    ValuationReport rep;
    auto d = arith_digits(z);
    for (int N : Ns) {
        std::optional<Rational> best;
        for (int k = 0; k <= std::min(N, z.K() - 1); ++k)
            if (d[static_cast<std::size_t>(k)] && (!best || *d[static_cast<std::size_t>(k)] < *best)) best = d[static_cast<std::size_t>(k)];
        rep.v_upto.emplace_back(N, best);
    }
    for (auto& r : rs) rep.w.emplace_back(r, w_from_digits(d, r, z.p()));
    rep.radius = radius_from_digits(d, z.p());
    rep.precision_limited = !z.exact();
    return rep;
}

MembershipResult weak_membership(const WittVector& z, const WeakNeighborhood& U) {
    if (U.n > z.s()) throw PrecisionError("weak_membership: n exceeds the Witt length");
    MembershipResult res;
    res.member = true;
    for (int k = 0; k < U.n; ++k) {
        const Rational need(U.h);
        auto v = teichmuller_digit_valuation(z, k);
        if (v && *v < need) {
            res.member = false;
            res.witness = k;
            return res;
        }
        auto pv = z[k].precision_valuation();
        if (pv && *pv / Rational(ipow(z.p(), k)) < need)
            throw PrecisionError("weak_membership: digit " + std::to_string(k) + " not known far enough");
    }
    return res;
}

MembershipResult weak_membership(const ArithLiftElement& z, const WeakNeighborhood& U) {
    if (U.n > z.K()) throw PrecisionError("weak_membership: n exceeds the coefficient precision");
    if (z.level() != 0) throw std::invalid_argument("weak_membership: arithmetic model lives at level 0");
    MembershipResult res;
    res.member = true;
    if (U.n == 0) return res;
    const std::int64_t q = ipow(z.p(), U.n);
    for (std::int64_t e = z.val(); e < std::min(z.end(), U.h); ++e)
        if (z.coeff(e) % q) {
            res.member = false;
            res.witness = e;
            return res;
        }
    if (z.prec() < U.h) throw PrecisionError("weak_membership: element not known up to pi^h");
    return res;
}

}  // namespace phigamma
