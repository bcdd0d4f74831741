#include "phigamma/norm_field.hpp"

#include <algorithm>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "phigamma/errors.hpp"
#include "phigamma/zmod_linalg.hpp"

namespace phigamma {

NormFieldElement nf_monomial(int p, int level, std::int64_t e, std::int64_t c, std::int64_t prec) {
    return Series::monomial(p, 1, level, e, c, prec);
}

NormFieldElement nf_parse(const std::string& text, int p) { return Series::parse(text, p, 1); }

NormFieldElement frobenius_e(const NormFieldElement& x) {
    if (x.K() != 1) throw std::invalid_argument("frobenius_e: not a characteristic p element");
    return x.frobenius_exponents();
}

namespace {

// substitution t -> (1+t)^a - 1 on a series over Z/p^K, output truncated at min(cap, prec)
Series substitute_gamma(const Series& x, const PAdicInt& a, std::int64_t cap) {
    const std::int64_t out = std::min(cap, x.prec());
    if (x.is_zero()) return Series(x.p(), x.K(), x.level(), out);
    std::int64_t scap;
    if (out >= kExact) {
        if (a.residue > 4096 || x.val() < 0)
            throw PrecisionError("gamma of an exact element needs a precision cap");
        scap = kExact;
    } else {
        scap = out - x.val() + 1;
        if (scap < 1) scap = 1;
    }
    Series S = one_plus_t_pow_minus_one(x.p(), x.K(), x.level(), a, scap);
    if (S.prec() < scap) throw PrecisionError("exponent known to too few digits for the requested window");
    return x.compose(S, out);
}

}  // namespace

NormFieldElement gamma_e(const NormFieldElement& x, const PAdicInt& a, std::int64_t cap) {
    if (a.residue % x.p() == 0) throw std::invalid_argument("gamma_e: exponent must be a unit");
    return substitute_gamma(x, a, cap);
}

NormFieldElement delta_e(const NormFieldElement& x, std::int64_t delta, std::int64_t cap) {
    PAdicInt a = teichmuller_digit(x.p(), delta, PAdicInt::max_digits(x.p()));
    return gamma_e(x, a, cap);
}

EValuation v_e(const NormFieldElement& x) {
    EValuation r;
    if (!x.is_zero()) {
        r.value = x.valuation();
        return r;
    }
    if (!x.exact()) {
        r.precision_limited = true;
        r.bound = x.precision();
    }
    return r;
}

Rational flat_normalization(const Rational& v, int p) { return v * Rational(p, p - 1); }

NormFieldElement raise_perfection(const NormFieldElement& x) { return x.regrid(x.level() + 1); }

NormFieldElement lower_perfection(const NormFieldElement& x) {
    if (x.level() == 0) throw std::invalid_argument("lower_perfection: already at level 0");
    return x.regrid(x.level() - 1);
}

// ---------------------------------------------------------------- relative ring

RelativeNormElement::RelativeNormElement(int p, int level, std::int64_t prec) : p_(p), level_(level), prec_(prec) {}

RelativeNormElement RelativeNormElement::monomial(int p, int level, std::int64_t xexp, const NormFieldElement& c) {
    RelativeNormElement r(p, level, c.prec());
    r.add_term(xexp, c.regrid(std::max(level, c.level())));
    return r;
}

void RelativeNormElement::add_term(std::int64_t j, const NormFieldElement& c) {
    auto it = terms_.find(j);
    if (it == terms_.end()) {
        if (!c.is_zero()) terms_.emplace(j, c);
        return;
    }
    it->second += c;
    if (it->second.is_zero()) terms_.erase(it);
}

NormFieldElement RelativeNormElement::coeff(std::int64_t xexp) const {
    auto it = terms_.find(xexp);
    if (it == terms_.end()) return Series(p_, 1, level_, prec_);
    return it->second;
}

RelativeNormElement RelativeNormElement::operator+(const RelativeNormElement& o) const {
    RelativeNormElement r = *this;
    r.prec_ = std::min(prec_, o.prec_);
    for (auto& [j, c] : o.terms_) r.add_term(j, c);
    for (auto it = r.terms_.begin(); it != r.terms_.end();) {
        it->second = it->second.truncated(r.prec_);
        it = it->second.is_zero() ? r.terms_.erase(it) : std::next(it);
    }
    return r;
}

RelativeNormElement RelativeNormElement::operator-(const RelativeNormElement& o) const {
    RelativeNormElement neg = o;
    for (auto& [j, c] : neg.terms_) c = -c;
    return *this + neg;
}

RelativeNormElement RelativeNormElement::operator*(const RelativeNormElement& o) const {
    auto minval = [](const RelativeNormElement& a) {
        std::int64_t m = kExact;
        for (auto& [j, c] : a.terms_) m = std::min(m, c.val());
        return m == kExact ? a.prec_ : m;
    };
    RelativeNormElement r(p_, level_, std::min(sat_add(prec_, minval(o)), sat_add(o.prec_, minval(*this))));
    for (auto& [j, c] : terms_)
        for (auto& [k, d] : o.terms_) r.add_term(j + k, c * d);
    for (auto it = r.terms_.begin(); it != r.terms_.end();) {
        it->second = it->second.truncated(r.prec_);
        it = it->second.is_zero() ? r.terms_.erase(it) : std::next(it);
    }
    return r;
}

bool RelativeNormElement::operator==(const RelativeNormElement& o) const { return (*this - o).is_zero(); }

RelativeNormElement RelativeNormElement::frobenius() const {
    RelativeNormElement r(p_, level_, prec_ >= kExact ? kExact : prec_ * p_);
    for (auto& [j, c] : terms_) r.add_term(j * p_, frobenius_e(c));
    return r;
}

RelativeNormElement RelativeNormElement::gamma(const PAdicInt& a) const {
    RelativeNormElement r(p_, level_, prec_);
    for (auto& [j, c] : terms_) r.add_term(j, gamma_e(c, a, prec_));
    return r;
}

RelativeNormElement RelativeNormElement::gamma_tilde(std::int64_t b) const {
    RelativeNormElement r(p_, level_, prec_);
    for (auto& [j, c] : terms_) {
        std::int64_t n = b * j;
        Series eps;
        Series one_t = Series::constant(p_, 1, level_, 1) + Series::monomial(p_, 1, level_, 1, 1);
        if (c.exact() && n >= 0) {
            eps = one_t.pow(n);
        } else {
            std::int64_t cap = c.prec() - c.val();
            eps = one_t.pow(n, cap);
        }
        r.add_term(j, c * eps);
    }
    return r;
}

std::optional<Rational> RelativeNormElement::valuation() const {
    std::optional<Rational> v;
    for (auto& [j, c] : terms_)
        if (!v || c.valuation() < *v) v = c.valuation();
    return v;
}

std::string RelativeNormElement::to_string() const {
    if (terms_.empty()) return prec_ >= kExact ? "0" : Series(p_, 1, level_, prec_).to_string();
    std::ostringstream out;
    const std::int64_t den = ipow(p_, level_);
    bool first = true;
    for (auto& [j, c] : terms_) {
        if (!first) out << " + ";
        first = false;
        Rational e(j, den);
        out << "(" << c.to_string() << ")";
        if (j != 0) {
            out << "*x";
            if (e != Rational(1)) {
                if (e.denominator() == 1)
                    out << "^" << e.numerator();
                else
                    out << "^(" << e.numerator() << "/" << e.denominator() << ")";
            }
        }
    }
    return out.str();
}

// ---------------------------------------------------------------- towers

TowerPtr make_tower(int p, int level, int max_depth) {
    auto t = std::make_shared<TowerData>();
    t->p = p;
    t->level = level;
    t->max_depth = max_depth;
    return t;
}

TowerElement TowerElement::from_base(const TowerPtr& t, const Series& b) {
    TowerElement r;
    r.tower_ = t;
    r.depth_ = 0;
    r.K_ = b.K();
    r.base_ = b.level() < t->level ? b.regrid(t->level) : b;
    if (r.base_.level() != t->level) throw std::invalid_argument("TowerElement: base level exceeds tower level");
    return r;
}

TowerElement TowerElement::zero(const TowerPtr& t, int depth, int K, std::int64_t prec) {
    TowerElement r;
    r.tower_ = t;
    r.depth_ = depth;
    r.K_ = K;
    if (depth == 0)
        r.base_ = Series(t->p, K, t->level, prec);
    else
        r.c_.assign(static_cast<std::size_t>(t->p), zero(t, depth - 1, K, prec));
    return r;
}

TowerElement TowerElement::constant(const TowerPtr& t, int depth, int K, std::int64_t c) {
    if (depth == 0) return from_base(t, Series::constant(t->p, K, t->level, c));
    TowerElement r = zero(t, depth, K, kExact);
    r.c_[0] = constant(t, depth - 1, K, c);
    return r;
}

TowerElement TowerElement::theta(const TowerPtr& t, int layer, int depth, int K) {
    if (layer < 1 || layer > depth || depth > static_cast<int>(t->layers.size()))
        throw std::invalid_argument("TowerElement::theta: bad layer");
    TowerElement r = zero(t, layer, K, kExact);
    r.c_[1] = constant(t, layer - 1, K, 1);
    return r.embed(depth);
}

namespace {
bool exact_zero(const TowerElement& x) { return x.is_zero() && x.min_prec() >= kExact; }
}  // namespace

bool TowerElement::is_zero() const {
    if (depth_ == 0) return base_.is_zero();
    for (auto& c : c_)
        if (!c.is_zero()) return false;
    return true;
}

TowerElement TowerElement::embed(int depth) const {
    if (depth < depth_) throw std::invalid_argument("TowerElement::embed: cannot lower depth");
    TowerElement r = *this;
    while (r.depth_ < depth) {
        TowerElement up = zero(tower_, r.depth_ + 1, K_, kExact);
        up.c_[0] = r;
        r = up;
    }
    return r;
}

TowerElement TowerElement::with_tower(const TowerPtr& t) const {
    if (t == tower_) return *this;
    if (static_cast<int>(t->layers.size()) < depth_) throw std::invalid_argument("with_tower: tower too short");
    for (int i = 0; i < depth_; ++i)
        if (t->layers[static_cast<std::size_t>(i)] != tower_->layers[static_cast<std::size_t>(i)])
            throw std::invalid_argument("with_tower: incompatible towers");
    TowerElement r = *this;
    r.tower_ = t;
    for (auto& c : r.c_) c = c.with_tower(t);
    return r;
}

namespace {

void align(TowerElement& a, TowerElement& b) {
    TowerPtr t = a.tower()->layers.size() >= b.tower()->layers.size() ? a.tower() : b.tower();
    a = a.with_tower(t);
    b = b.with_tower(t);
    int d = std::max(a.depth(), b.depth());
    a = a.embed(d);
    b = b.embed(d);
}

}  // namespace

TowerElement TowerElement::operator+(const TowerElement& o) const {
    if (depth_ != o.depth_ || tower_ != o.tower_) {
        TowerElement a = *this, b = o;
        align(a, b);
        return a + b;
    }
    TowerElement r = *this;
    if (depth_ == 0)
        r.base_ = base_ + o.base_;
    else
        for (std::size_t j = 0; j < c_.size(); ++j) r.c_[j] = c_[j] + o.c_[j];
    return r;
}

TowerElement TowerElement::operator-() const { return map_base([](const Series& s) { return -s; }); }

TowerElement TowerElement::operator-(const TowerElement& o) const { return *this + (-o); }

TowerElement TowerElement::scaled(std::int64_t c) const {
    return map_base([c](const Series& s) { return s.scaled(c); });
}

TowerElement TowerElement::operator*(const TowerElement& o) const {
    if (depth_ != o.depth_ || tower_ != o.tower_) {
        TowerElement a = *this, b = o;
        align(a, b);
        return a * b;
    }
    if (depth_ == 0) {
        TowerElement r = *this;
        r.base_ = base_ * o.base_;
        return r;
    }
    const int p = this->p();
    const auto& layer = *tower_->layers[static_cast<std::size_t>(depth_ - 1)];
    std::vector<TowerElement> tmp(static_cast<std::size_t>(2 * p - 1));
    std::vector<bool> used(tmp.size(), false);
    for (int i = 0; i < p; ++i) {
        if (exact_zero(c_[static_cast<std::size_t>(i)])) continue;
        for (int j = 0; j < p; ++j) {
            if (exact_zero(o.c_[static_cast<std::size_t>(j)])) continue;
            TowerElement prod = c_[static_cast<std::size_t>(i)] * o.c_[static_cast<std::size_t>(j)];
            auto k = static_cast<std::size_t>(i + j);
            tmp[k] = used[k] ? tmp[k] + prod : prod;
            used[k] = true;
        }
    }
    TowerElement r = zero(tower_, depth_, K_, kExact);
    for (int k = 2 * p - 2; k >= p; --k) {
        if (!used[static_cast<std::size_t>(k)]) continue;
        const TowerElement& t = tmp[static_cast<std::size_t>(k)];
        TowerElement uhat = layer.u.lift(K_).with_tower(tower_).embed(depth_ - 1);
        auto hi = static_cast<std::size_t>(k - p + 1), lo = static_cast<std::size_t>(k - p);
        tmp[hi] = used[hi] ? tmp[hi] + t : t;
        used[hi] = true;
        TowerElement tu = t * uhat;
        tmp[lo] = used[lo] ? tmp[lo] + tu : tu;
        used[lo] = true;
    }
    for (int k = 0; k < p; ++k)
        if (used[static_cast<std::size_t>(k)]) r.c_[static_cast<std::size_t>(k)] = tmp[static_cast<std::size_t>(k)];
    return r;
}

TowerElement TowerElement::pow(std::int64_t n) const {
    if (n < 0) throw std::invalid_argument("TowerElement::pow: negative exponent");
    TowerElement result = constant(tower_, depth_, K_, 1);
    TowerElement base = *this;
    while (n > 0) {
        if (n & 1) result = result * base;
        n >>= 1;
        if (n) base = base * base;
    }
    return result;
}

TowerElement TowerElement::frobenius() const {
    if (K_ != 1) throw std::invalid_argument("TowerElement::frobenius: characteristic p only");
    if (depth_ == 0) return from_base(tower_, frobenius_e(base_));
    const auto& layer = *tower_->layers[static_cast<std::size_t>(depth_ - 1)];
    // theta^p = theta + u
    TowerElement tp = theta(tower_, depth_, depth_, 1) + layer.u.with_tower(tower_).embed(depth_);
    TowerElement result = zero(tower_, depth_, 1, kExact);
    TowerElement power = constant(tower_, depth_, 1, 1);
    for (int j = 0; j < p(); ++j) {
        result = result + c_[static_cast<std::size_t>(j)].frobenius().embed(depth_) * power;
        if (j + 1 < p()) power = power * tp;
    }
    return result;
}

TowerElement TowerElement::lift(int K) const {
    TowerElement r = map_base([K](const Series& s) { return s.lift(K); });
    r.K_ = K;
    for (auto& c : r.c_) c = c.lift(K);
    return r;
}

TowerElement TowerElement::reduce(int K) const {
    TowerElement r = map_base([K](const Series& s) { return s.reduce(K); });
    r.K_ = K;
    for (auto& c : r.c_) c = c.reduce(K);
    return r;
}

TowerElement TowerElement::truncated(std::int64_t prec) const {
    return map_base([prec](const Series& s) { return s.truncated(prec); });
}

std::int64_t TowerElement::min_prec() const {
    if (depth_ == 0) return base_.prec();
    std::int64_t m = kExact;
    for (auto& c : c_) m = std::min(m, c.min_prec());
    return m;
}

TowerElement TowerElement::divide_p_power(int k) const {
    TowerElement r = *this;
    r.K_ = 1;
    if (depth_ == 0) {
        const Series b = base_.reduce(k + 1);
        const std::int64_t d = ipow(p(), k);
        std::vector<std::int64_t> c(b.coeffs().size());
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (b.coeffs()[i] % d) throw InvariantFailure("ghost recursion: coefficient not divisible by p^" + std::to_string(k));
            c[i] = b.coeffs()[i] / d;
        }
        r.base_ = Series::from_coeffs(p(), 1, b.level(), b.val(), c, b.prec());
        return r;
    }
    for (auto& c : r.c_) c = c.divide_p_power(k);
    return r;
}

std::optional<Rational> TowerElement::precision_valuation() const {
    const std::int64_t h = min_prec();
    if (h >= kExact) return std::nullopt;
    Rational v(h, ipow(tower_->p, tower_->level));
    for (int i = 0; i < depth_; ++i) {
        const auto& layer = *tower_->layers[static_cast<std::size_t>(i)];
        if (layer.ramified) v += layer.v_theta * Rational(p() - 1);
    }
    return v;
}

std::optional<Rational> TowerElement::valuation() const {
    if (depth_ == 0) {
        if (base_.is_zero()) return std::nullopt;
        return base_.reduce(1).is_zero() ? std::nullopt : std::optional<Rational>(base_.reduce(1).valuation());
    }
    const auto& layer = *tower_->layers[static_cast<std::size_t>(depth_ - 1)];
    std::optional<Rational> v;
    for (int j = 0; j < p(); ++j) {
        auto vj = c_[static_cast<std::size_t>(j)].valuation();
        if (!vj) continue;
        Rational w = *vj + (layer.ramified ? layer.v_theta * j : Rational(0));
        if (!v || w < *v) v = w;
    }
    return v;
}

bool TowerElement::operator==(const TowerElement& o) const { return (*this - o).is_zero(); }

std::vector<TowerElement::Monomial> TowerElement::monomials() const {
    std::vector<Monomial> out;
    if (depth_ == 0) {
        for (std::int64_t e = base_.val(); e < base_.end(); ++e) {
            std::int64_t c = base_.coeff(e);
            if (c) out.push_back({e, {}, c});
        }
        return out;
    }
    for (int j = 0; j < p(); ++j)
        for (auto m : c_[static_cast<std::size_t>(j)].monomials()) {
            m.j.push_back(j);
            out.push_back(m);
        }
    return out;
}

TowerElement TowerElement::from_monomial(const TowerPtr& t, int depth, int K, const Monomial& m, std::int64_t prec) {
    if (depth == 0) return from_base(t, Series::monomial(t->p, K, t->level, m.e, m.c, prec));
    Monomial inner{m.e, std::vector<int>(m.j.begin(), m.j.end() - 1), m.c};
    TowerElement r = zero(t, depth, K, prec);
    r.c_[static_cast<std::size_t>(m.j.back())] = from_monomial(t, depth - 1, K, inner, prec);
    return r;
}

Rational TowerElement::monomial_valuation(const Monomial& m) const {
    Rational v(m.e, ipow(tower_->p, tower_->level));
    for (std::size_t i = 0; i < m.j.size(); ++i) {
        const auto& layer = *tower_->layers[i];
        if (layer.ramified) v += layer.v_theta * m.j[i];
    }
    return v;
}

std::string TowerElement::to_string() const {
    if (depth_ == 0) return base_.to_string();
    std::ostringstream out;
    bool first = true;
    for (int j = 0; j < p(); ++j) {
        const auto& c = c_[static_cast<std::size_t>(j)];
        if (c.is_zero()) continue;
        if (!first) out << " + ";
        first = false;
        out << "(" << c.to_string() << ")";
        if (j == 1) out << "*t" << depth_;
        if (j > 1) out << "*t" << depth_ << "^" << j;
    }
    if (first) return zero(tower_, 0, K_, min_prec()).to_string();
    return out.str();
}

ASExtension adjoin_as_root(const TowerElement& u_in) {
    if (u_in.K() != 1) throw std::invalid_argument("adjoin_as_root: characteristic p only");
    const TowerPtr& t = u_in.tower();
    const int D = static_cast<int>(t->layers.size());
    TowerElement u = u_in.embed(D);
    if (u.is_zero()) throw MathError("adjoin_as_root: u = 0 needs no extension");
    if (D >= t->max_depth) throw DepthExceeded("Artin-Schreier tower depth limit " + std::to_string(t->max_depth) + " reached");
    if (D >= 1 && !t->layers.back()->ramified)
        throw DepthExceeded("nesting above an unramified Artin-Schreier layer is not supported");
    Rational v = *u.valuation();
    auto layer = std::make_shared<ASLayer>();
    layer->u = u;
    if (v > Rational(0)) throw MathError("adjoin_as_root: v(u) > 0, solvable without an extension");
    if (v < Rational(0)) {
        int ram = 0;
        for (auto& l : t->layers) ram += l->ramified ? 1 : 0;
        // v must not lie in p * (1/p^{level+ram}) Z
        Rational scaled = v * Rational(ipow(t->p, t->level + ram), t->p);
        if (scaled.denominator() == 1) throw MathError("adjoin_as_root: leading term of u is a p-th power; reduce first");
        layer->v_theta = v / Rational(t->p);
        layer->ramified = true;
    } else {
        layer->v_theta = 0;
        layer->ramified = false;
    }
    auto nt = std::make_shared<TowerData>(*t);
    nt->layers.push_back(layer);
    ASExtension ext;
    ext.tower = nt;
    ext.theta = TowerElement::theta(nt, D + 1, D + 1, 1);
    return ext;
}

ASExtension adjoin_as_root(const NormFieldElement& u, int max_depth) {
    return adjoin_as_root(TowerElement::from_base(make_tower(u.p(), u.level(), max_depth), u));
}

}  // namespace phigamma
