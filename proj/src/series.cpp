#include "phigamma/series.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>

#include "phigamma/errors.hpp"
#include "phigamma/zmod_linalg.hpp"

namespace phigamma {

std::int64_t mulmod(std::int64_t a, std::int64_t b, std::int64_t q) {
    return static_cast<std::int64_t>(static_cast<__int128>(a) * b % q);
}

std::int64_t powmod(std::int64_t a, std::int64_t e, std::int64_t q) {
    std::int64_t r = 1 % q;
    a = mod_reduce(a, q);
    while (e > 0) {
        if (e & 1) r = mulmod(r, a, q);
        a = mulmod(a, a, q);
        e >>= 1;
    }
    return r;
}

int PAdicInt::max_digits(int p) {
    int d = 0;
    __int128 v = 1;
    while (v * p < (static_cast<__int128>(1) << 62)) {
        v *= p;
        ++d;
    }
    return d;
}

PAdicInt PAdicInt::exact(int p, std::int64_t value) {
    int d = max_digits(p);
    return {mod_reduce(value, ipow(p, d)), d};
}

PAdicInt PAdicInt::times(const PAdicInt& o, int p) const {
    int d = std::min(digits, o.digits);
    std::int64_t q = ipow(p, d);
    return {mulmod(residue % q, o.residue % q, q), d};
}

PAdicInt PAdicInt::pow(std::int64_t e, int p) const {
    std::int64_t q = ipow(p, digits);
    return {powmod(residue, e, q), digits};
}

PAdicInt teichmuller_digit(int p, std::int64_t a, int digits) {
    std::int64_t q = ipow(p, digits);
    std::int64_t x = mod_reduce(a, p);
    for (int i = 0; i < digits; ++i) x = powmod(x, p, q);
    return {x, digits};
}

Series::Series(int p, int K, int level, std::int64_t prec)
    : p_(p), K_(K), level_(level), q_(ipow(p, K)), prec_(std::min(prec, kExact)), val_(prec_) {
    if (K < 1) throw std::invalid_argument("Series: K must be positive");
    if (level < 0) throw std::invalid_argument("Series: negative level");
}

Series Series::monomial(int p, int K, int level, std::int64_t e, std::int64_t c, std::int64_t prec) {
    Series s(p, K, level, prec);
    s.val_ = e;
    s.c_ = {mod_reduce(c, s.q_)};
    s.normalize();
    return s;
}

Series Series::constant(int p, int K, int level, std::int64_t c, std::int64_t prec) {
    return monomial(p, K, level, 0, c, prec);
}

Series Series::from_coeffs(int p, int K, int level, std::int64_t start, const std::vector<std::int64_t>& c,
                           std::int64_t prec) {
    Series s(p, K, level, prec);
    s.val_ = start;
    s.c_.resize(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) s.c_[i] = mod_reduce(c[i], s.q_);
    s.normalize();
    return s;
}

Series Series::random(int p, int K, int level, std::int64_t lo, std::int64_t hi, std::mt19937_64& rng,
                      bool unit_leading) {
    Series s(p, K, level, hi);
    std::uniform_int_distribution<std::int64_t> dist(0, s.q_ - 1);
    std::uniform_int_distribution<std::int64_t> unit(1, p - 1);
    if (hi <= lo) return s;
    s.val_ = lo;
    s.c_.resize(static_cast<std::size_t>(hi - lo));
    for (auto& c : s.c_) c = dist(rng);
    if (unit_leading) s.c_[0] = mod_reduce(unit(rng) + p * dist(rng), s.q_);
    s.normalize();
    return s;
}

void Series::normalize() {
    if (prec_ < kExact && !c_.empty()) {
        std::int64_t keep = prec_ - val_;
        if (keep <= 0)
            c_.clear();
        else if (static_cast<std::int64_t>(c_.size()) > keep)
            c_.resize(static_cast<std::size_t>(keep));
    }
    std::size_t lead = 0;
    while (lead < c_.size() && c_[lead] == 0) ++lead;
    if (lead == c_.size()) {
        c_.clear();
        val_ = prec_;
        return;
    }
    if (lead) {
        c_.erase(c_.begin(), c_.begin() + static_cast<std::ptrdiff_t>(lead));
        val_ += static_cast<std::int64_t>(lead);
    }
    while (!c_.empty() && c_.back() == 0) c_.pop_back();
}

void Series::check_ring(const Series& o) const {
    if (p_ != o.p_ || K_ != o.K_) throw std::invalid_argument("Series: coefficient rings differ");
    if (level_ != o.level_) throw std::invalid_argument("Series: grid levels differ");
}

std::int64_t Series::coeff(std::int64_t e) const {
    if (e < val_ || e >= end()) return 0;
    return c_[static_cast<std::size_t>(e - val_)];
}

std::optional<std::int64_t> Series::first_unit() const {
    for (std::size_t i = 0; i < c_.size(); ++i)
        if (c_[i] % p_ != 0) return val_ + static_cast<std::int64_t>(i);
    return std::nullopt;
}

Rational Series::valuation() const {
    if (val_ >= kExact) throw std::domain_error("valuation of exact zero");
    return Rational(val_, ipow(p_, level_));
}

Rational Series::precision() const {
    if (prec_ >= kExact) throw std::domain_error("exact series has no finite precision");
    return Rational(prec_, ipow(p_, level_));
}

Series Series::operator+(const Series& o) const {
    check_ring(o);
    Series r(p_, K_, level_, min_prec(prec_, o.prec_));
    if (is_zero() && o.is_zero()) return r;
    std::int64_t lo = std::min(is_zero() ? o.val_ : val_, o.is_zero() ? val_ : o.val_);
    std::int64_t hi = std::max(is_zero() ? lo : end(), o.is_zero() ? lo : o.end());
    hi = std::min(hi, r.prec_);
    if (hi <= lo) return r;
    r.val_ = lo;
    r.c_.assign(static_cast<std::size_t>(hi - lo), 0);
    for (std::size_t i = 0; i < c_.size(); ++i) {
        std::int64_t e = val_ + static_cast<std::int64_t>(i);
        if (e < hi) r.c_[static_cast<std::size_t>(e - lo)] = c_[i];
    }
    for (std::size_t i = 0; i < o.c_.size(); ++i) {
        std::int64_t e = o.val_ + static_cast<std::int64_t>(i);
        if (e < hi) {
            auto& t = r.c_[static_cast<std::size_t>(e - lo)];
            t += o.c_[i];
            if (t >= q_) t -= q_;
        }
    }
    r.normalize();
    return r;
}

Series Series::operator-() const {
    Series r = *this;
    for (auto& c : r.c_) c = c ? q_ - c : 0;
    return r;
}

Series Series::operator-(const Series& o) const { return *this + (-o); }

Series Series::scaled(std::int64_t c) const {
    Series r = *this;
    c = mod_reduce(c, q_);
    for (auto& x : r.c_) x = mulmod(x, c, q_);
    r.normalize();
    return r;
}

Series Series::shifted(std::int64_t e) const {
    Series r = *this;
    r.prec_ = sat_add(prec_, e);
    if (!r.is_zero())
        r.val_ += e;
    else
        r.val_ = r.prec_;
    return r;
}

Series Series::operator*(const Series& o) const { return mul(o, kExact); }

Series Series::mul(const Series& o, std::int64_t cap) const {
    check_ring(o);
    std::int64_t prec = min_prec(sat_add(val_, o.prec_), sat_add(o.val_, prec_));
    prec = min_prec(prec, cap);
    Series r(p_, K_, level_, prec);
    if (is_zero() || o.is_zero()) return r;
    std::int64_t lo = val_ + o.val_;
    std::int64_t hi = std::min(end() + o.end() - 1, prec);
    if (hi <= lo) return r;
    const std::size_t n = static_cast<std::size_t>(hi - lo);
    std::vector<std::int64_t> acc(n, 0);
    const bool big = q_ >= (std::int64_t{1} << 20);
    const std::size_t na = c_.size(), nb = o.c_.size();
    for (std::size_t i = 0; i < na && i < n; ++i) {
        const std::int64_t a = c_[i];
        if (!a) continue;
        const std::size_t jmax = std::min(nb, n - i);
        std::int64_t* out = acc.data() + i;
        if (big) {
            for (std::size_t j = 0; j < jmax; ++j) out[j] = (out[j] + a * o.c_[j] % q_) % q_;
        } else {
            for (std::size_t j = 0; j < jmax; ++j) out[j] += a * o.c_[j];
            if ((i & 1023) == 1023)
                for (auto& x : acc) x %= q_;
        }
    }
    for (auto& x : acc) x %= q_;
    r.val_ = lo;
    r.c_ = std::move(acc);
    r.normalize();
    return r;
}

Series Series::truncated(std::int64_t prec) const {
    Series r = *this;
    if (prec < r.prec_) {
        r.prec_ = prec;
        r.normalize();
    }
    return r;
}

Series Series::pow(std::int64_t n, std::int64_t cap) const {
    if (n < 0) return inverse(cap).pow(-n, cap);
    Series result = constant(p_, K_, level_, 1).truncated(cap);
    Series base = truncated(cap);
    while (n > 0) {
        if (n & 1) result = result.mul(base, cap);
        n >>= 1;
        if (n) base = base.mul(base, cap);
    }
    return result;
}

Series Series::inverse(std::int64_t cap) const {
    if (is_zero()) throw MathError("inverse of zero series");
    auto f = first_unit();
    if (!f) throw MathError("series is not invertible: no unit coefficient");
    const std::int64_t a = coeff(*f);
    const std::int64_t ainv = inverse_mod(a, q_);
    // x = a t^f (1 + N + P), N p-divisible with negative exponents, P with positive ones
    Series r = shifted(-*f).scaled(ainv);
    const std::int64_t rprec = r.prec_;
    Series N(p_, K_, level_, kExact), P(p_, K_, level_, rprec);
    {
        std::vector<std::int64_t> neg, pos;
        for (std::int64_t e = r.val_; e < r.end(); ++e) {
            if (e < 0) {
                if (neg.empty()) N.val_ = e;
                neg.resize(static_cast<std::size_t>(e - N.val_ + 1), 0);
                neg.back() = r.coeff(e);
            } else if (e > 0) {
                if (pos.empty()) P.val_ = e;
                pos.resize(static_cast<std::size_t>(e - P.val_ + 1), 0);
                pos.back() = r.coeff(e);
            }
        }
        N.c_ = std::move(neg);
        P.c_ = std::move(pos);
        N.normalize();
        P.normalize();
    }
    const std::int64_t wcap = min_prec(rprec, sat_add(cap, *f));
    if (!P.is_zero() && wcap >= kExact)
        throw PrecisionError("inverse of an exact non-monomial series needs a precision cap");
    Series w(p_, K_, level_, P.is_zero() ? rprec : wcap);
    if (P.is_zero()) {
        w = constant(p_, K_, level_, 1, rprec);
    } else {
        const std::size_t n = static_cast<std::size_t>(std::max<std::int64_t>(wcap, 0));
        std::vector<std::int64_t> wc(n, 0);
        if (n) wc[0] = 1;
        for (std::size_t k = 1; k < n; ++k) {
            __int128 s = 0;
            for (std::int64_t i = std::max<std::int64_t>(P.val_, 1); i <= static_cast<std::int64_t>(k) && i < P.end(); ++i)
                s += static_cast<__int128>(P.coeff(i)) * wc[k - static_cast<std::size_t>(i)];
            wc[k] = mod_reduce(static_cast<std::int64_t>(-(s % q_)), q_);
        }
        w = from_coeffs(p_, K_, level_, 0, wc, wcap);
    }
    Series y = w;
    if (!N.is_zero()) {
        Series wn = w.mul(N, wcap);
        Series term = constant(p_, K_, level_, 1);
        Series sum = term;
        for (int j = 1; j < K_; ++j) {
            term = term.mul(-wn, wcap);
            sum += term;
        }
        y = w.mul(sum, wcap);
    }
    return y.shifted(-*f).scaled(ainv).truncated(cap);
}

Series Series::compose(const Series& S, std::int64_t cap) const {
    check_ring(S);
    if (S.is_zero() || S.val_ < 1) throw MathError("substitution needs a topologically nilpotent series");
    auto fu = S.first_unit();
    if (!fu) throw MathError("substitution series has no unit coefficient");
    const std::int64_t g = S.val_, f = *fu;
    if (f >= S.prec_) throw PrecisionError("substitution series known too coarsely");
    std::int64_t errbound = kExact;
    if (!exact()) {
        if (prec_ < 1) throw PrecisionError("substitution into a series with non-positive precision");
        std::int64_t h = prec_;
        errbound = h * f - std::min<std::int64_t>(h, K_ - 1) * (f - g);
    }
    std::int64_t outcap = min_prec(cap, errbound);
    Series acc(p_, K_, level_, outcap);
    if (is_zero()) return acc;
    Series P = val_ >= 0 ? S.pow(val_, outcap) : S.pow(-val_, kExact).inverse(outcap);
    for (std::size_t i = 0; i < c_.size(); ++i) {
        if (c_[i]) acc += P.scaled(c_[i]);
        if (i + 1 < c_.size()) P = P.mul(S, outcap);
    }
    return acc.truncated(outcap);
}

Series Series::reduce(int K) const {
    if (K > K_) throw std::invalid_argument("Series::reduce: cannot increase precision");
    Series r(p_, K, level_, prec_);
    r.val_ = val_;
    r.c_ = c_;
    for (auto& c : r.c_) c %= r.q_;
    r.normalize();
    return r;
}

Series Series::lift(int K) const {
    if (K < K_) throw std::invalid_argument("Series::lift: use reduce");
    Series r(p_, K, level_, prec_);
    r.val_ = val_;
    r.c_ = c_;
    return r;
}

Series Series::regrid(int level) const {
    if (level == level_) return *this;
    if (level > level_) {
        const std::int64_t f = ipow(p_, level - level_);
        Series r(p_, K_, level, prec_ >= kExact ? kExact : prec_ * f);
        if (is_zero()) return r;
        r.val_ = val_ * f;
        r.c_.assign((c_.size() - 1) * static_cast<std::size_t>(f) + 1, 0);
        for (std::size_t i = 0; i < c_.size(); ++i) r.c_[i * static_cast<std::size_t>(f)] = c_[i];
        return r;
    }
    const std::int64_t f = ipow(p_, level_ - level);
    auto ceil_div = [](std::int64_t a, std::int64_t b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); };
    Series r(p_, K_, level, prec_ >= kExact ? kExact : ceil_div(prec_, f));
    if (is_zero()) return r;
    std::vector<std::int64_t> c;
    for (std::size_t i = 0; i < c_.size(); ++i) {
        if (!c_[i]) continue;
        std::int64_t e = val_ + static_cast<std::int64_t>(i);
        if (e % f != 0) throw std::invalid_argument("Series::regrid: exponents not on the coarser grid");
    }
    r.val_ = val_ / f;
    c.assign(static_cast<std::size_t>((end() - 1) / f - val_ / f + 1), 0);
    for (std::size_t i = 0; i < c_.size(); ++i)
        if (c_[i]) c[static_cast<std::size_t>((val_ + static_cast<std::int64_t>(i)) / f - r.val_)] = c_[i];
    r.c_ = std::move(c);
    r.normalize();
    return r;
}

Series Series::frobenius_exponents() const {
    Series r(p_, K_, level_, prec_ >= kExact ? kExact : prec_ * p_);
    if (is_zero()) return r;
    r.val_ = val_ * p_;
    r.c_.assign((c_.size() - 1) * static_cast<std::size_t>(p_) + 1, 0);
    for (std::size_t i = 0; i < c_.size(); ++i) r.c_[i * static_cast<std::size_t>(p_)] = c_[i];
    return r;
}

void common_level(Series& a, Series& b) {
    int l = std::max(a.level(), b.level());
    a = a.regrid(l);
    b = b.regrid(l);
}

bool Series::operator==(const Series& o) const {
    if (p_ != o.p_ || K_ != o.K_) return false;
    Series a = *this, b = o;
    common_level(a, b);
    std::int64_t pr = std::min(a.prec_, b.prec_);
    Series d = (a - b).truncated(pr);
    return d.is_zero();
}

bool Series::identical(const Series& o) const {
    return p_ == o.p_ && K_ == o.K_ && level_ == o.level_ && prec_ == o.prec_ && val_ == o.val_ && c_ == o.c_;
}

namespace {

std::string exponent_text(std::int64_t num, std::int64_t den) {
    Rational r(num, den);
    if (r.denominator() == 1) return std::to_string(r.numerator());
    return "(" + std::to_string(r.numerator()) + "/" + std::to_string(r.denominator()) + ")";
}

std::string power_text(const std::string& var, std::int64_t num, std::int64_t den) {
    Rational r(num, den);
    if (r == Rational(1)) return var;
    return var + "^" + exponent_text(num, den);
}

}  // namespace

std::string Series::to_string(const std::string& var) const {
    const std::int64_t den = ipow(p_, level_);
    std::ostringstream out;
    bool first = true;
    for (std::size_t i = 0; i < c_.size(); ++i) {
        if (!c_[i]) continue;
        std::int64_t e = val_ + static_cast<std::int64_t>(i);
        if (!first) out << " + ";
        first = false;
        if (e == 0)
            out << c_[i];
        else if (c_[i] == 1)
            out << power_text(var, e, den);
        else
            out << c_[i] << "*" << power_text(var, e, den);
    }
    if (!exact()) {
        if (!first) out << " + ";
        first = false;
        out << "O(" << var << "^" << exponent_text(prec_, den) << ")";
    }
    if (first) out << "0";
    return out.str();
}

namespace {

struct Cursor {
    const std::string& s;
    std::size_t i = 0;
    void skip() {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    }
    bool eat(char c) {
        skip();
        if (i < s.size() && s[i] == c) {
            ++i;
            return true;
        }
        return false;
    }
    bool eat_word(const std::string& w) {
        skip();
        if (s.compare(i, w.size(), w) == 0) {
            i += w.size();
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg, 1, static_cast<int>(i) + 1);
    }
    long long integer() {
        skip();
        bool neg = false;
        if (i < s.size() && (s[i] == '-' || s[i] == '+')) {
            neg = s[i] == '-';
            ++i;
        }
        if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) fail("expected integer");
        long long v = 0;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
            if (v > (std::int64_t{1} << 58)) fail("integer too large");
            v = v * 10 + (s[i] - '0');
            ++i;
        }
        return neg ? -v : v;
    }
    Rational exponent() {
        if (eat('(')) {
            long long n = integer();
            long long d = 1;
            if (eat('/')) d = integer();
            if (d <= 0) fail("bad exponent denominator");
            if (!eat(')')) fail("expected ')'");
            return Rational(n, d);
        }
        return Rational(integer());
    }
};

int level_of(const Rational& r, int p) {
    long long d = r.denominator();
    int m = 0;
    while (d % p == 0) {
        d /= p;
        ++m;
    }
    if (d != 1) throw ParseError("exponent denominator is not a power of p");
    return m;
}

}  // namespace

Series Series::parse(const std::string& text, int p, int K, const std::string& var) {
    Cursor cur{text};
    struct Term {
        std::int64_t coef;
        Rational e;
    };
    std::vector<Term> terms;
    std::optional<Rational> prec;
    const std::int64_t q = ipow(p, K);
    cur.skip();
    if (cur.i >= text.size()) throw ParseError("empty element", 1, 1);
    bool expect_term = true;
    int sign = 1;
    if (cur.eat('-')) sign = -1;
    while (expect_term) {
        cur.skip();
        if (cur.eat_word("O(")) {
            if (!cur.eat_word(var)) cur.fail("expected " + var + " in O-term");
            if (!cur.eat('^')) cur.fail("expected '^' in O-term");
            Rational e = cur.exponent();
            if (!cur.eat(')')) cur.fail("expected ')'");
            if (prec) cur.fail("duplicate O-term");
            prec = e;
        } else {
            std::int64_t c = 1;
            bool have_coef = false;
            cur.skip();
            if (cur.i < text.size() && std::isdigit(static_cast<unsigned char>(text[cur.i]))) {
                c = mod_reduce(cur.integer(), q);
                have_coef = true;
            }
            Rational e(0);
            bool have_var = false;
            if (have_coef) {
                if (cur.eat('*')) {
                    if (!cur.eat_word(var)) cur.fail("expected " + var + " after '*'");
                    have_var = true;
                }
            } else if (cur.eat_word(var)) {
                have_var = true;
            } else {
                cur.fail("expected a term");
            }
            if (have_var) {
                e = 1;
                if (cur.eat('^')) e = cur.exponent();
            }
            terms.push_back({mod_reduce(sign * c, q), e});
        }
        cur.skip();
        if (cur.i >= text.size()) break;
        if (cur.eat('+'))
            sign = 1;
        else if (cur.eat('-'))
            sign = -1;
        else
            cur.fail("expected '+' or '-'");
    }
    int level = 0;
    for (auto& t : terms) level = std::max(level, level_of(t.e, p));
    if (prec) level = std::max(level, level_of(*prec, p));
    const std::int64_t den = ipow(p, level);
    std::int64_t pr = prec ? prec->numerator() * (den / prec->denominator()) : kExact;
    Series r(p, K, level, pr);
    for (auto& t : terms) {
        std::int64_t num = t.e.numerator() * (den / t.e.denominator());
        if (num >= pr) throw ParseError("term beyond the stated precision");
        r += monomial(p, K, level, num, t.coef);
    }
    return r.truncated(pr);
}

Series one_plus_t_pow_minus_one(int p, int K, int level, const PAdicInt& a, std::int64_t cap) {
    std::int64_t limit = kExact;
    int e = a.digits - K + 1;
    if (e < 1) throw PrecisionError("exponent known to too few p-adic digits");
    if (e < 38) {
        __int128 v = 1;
        for (int i = 0; i < e && v < kExact; ++i) v *= p;
        if (v < kExact) limit = static_cast<std::int64_t>(v);
    }
    std::int64_t c = std::min(cap, limit);
    Series one = Series::constant(p, K, level, 1);
    Series base = one + Series::monomial(p, K, level, 1, 1);
    return base.pow(a.residue, c) - one;
}

}  // namespace phigamma
