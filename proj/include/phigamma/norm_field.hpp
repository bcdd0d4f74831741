#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "phigamma/series.hpp"

namespace phigamma {

// Truncated Laurent series over F_p in pi-bar^{1/p^m}.
using NormFieldElement = Series;

constexpr int kDefaultMaxDepth = 2;

NormFieldElement nf_monomial(int p, int level, std::int64_t e, std::int64_t c = 1, std::int64_t prec = kExact);
NormFieldElement nf_parse(const std::string& text, int p);

NormFieldElement frobenius_e(const NormFieldElement& x);
// pi-bar -> (1+pi-bar)^a - 1 on the level grid.
NormFieldElement gamma_e(const NormFieldElement& x, const PAdicInt& a, std::int64_t cap = kExact);
// action of delta in F_p^x through its Teichmuller lift
NormFieldElement delta_e(const NormFieldElement& x, std::int64_t delta, std::int64_t cap = kExact);

struct EValuation {
    std::optional<Rational> value;  // empty means +infinity
    bool precision_limited = false;  // zero only to the stored precision
    std::optional<Rational> bound;   // lower bound when precision limited
};
EValuation v_e(const NormFieldElement& x);
Rational flat_normalization(const Rational& v, int p);

NormFieldElement raise_perfection(const NormFieldElement& x);
NormFieldElement lower_perfection(const NormFieldElement& x);

// sum_j c_j x^{j/p^m}, coefficients in E at the same level m.
class RelativeNormElement {
  public:
    RelativeNormElement(int p, int level, std::int64_t prec);
    static RelativeNormElement monomial(int p, int level, std::int64_t xexp, const NormFieldElement& c);

    int p() const { return p_; }
    int level() const { return level_; }
    std::int64_t prec() const { return prec_; }
    const std::map<std::int64_t, NormFieldElement>& terms() const { return terms_; }
    NormFieldElement coeff(std::int64_t xexp) const;
    bool is_zero() const { return terms_.empty(); }

    RelativeNormElement operator+(const RelativeNormElement& o) const;
    RelativeNormElement operator-(const RelativeNormElement& o) const;
    RelativeNormElement operator*(const RelativeNormElement& o) const;
    bool operator==(const RelativeNormElement& o) const;

    RelativeNormElement frobenius() const;
    // arithmetic generator: acts on coefficients, fixes x
    RelativeNormElement gamma(const PAdicInt& a) const;
    // geometric generator to the power b: x^{j/p^m} -> eps^{b j/p^m} x^{j/p^m}
    RelativeNormElement gamma_tilde(std::int64_t b) const;
    // min over terms of v_E of the coefficient
    std::optional<Rational> valuation() const;
    std::string to_string() const;

  private:
    void add_term(std::int64_t j, const NormFieldElement& c);
    int p_, level_;
    std::int64_t prec_;
    std::map<std::int64_t, NormFieldElement> terms_;
};

// Artin-Schreier towers E = R_0 subset R_1 subset ... with R_d = R_{d-1}[t]/(t^p - t - u_d).
struct ASLayer;
struct TowerData {
    int p = 3;
    int level = 0;
    int max_depth = kDefaultMaxDepth;
    std::vector<std::shared_ptr<const ASLayer>> layers;
};
using TowerPtr = std::shared_ptr<const TowerData>;

TowerPtr make_tower(int p, int level, int max_depth = kDefaultMaxDepth);

// Element of R_depth with coefficients lifted to Z/p^K (K = 1 is the tower itself).
class TowerElement {
  public:
    TowerElement() = default;
    static TowerElement from_base(const TowerPtr& t, const Series& b);
    static TowerElement zero(const TowerPtr& t, int depth, int K, std::int64_t prec);
    static TowerElement constant(const TowerPtr& t, int depth, int K, std::int64_t c);
    // the generator of layer `layer` (1-based) as an element of R_depth
    static TowerElement theta(const TowerPtr& t, int layer, int depth, int K);

    const TowerPtr& tower() const { return tower_; }
    int depth() const { return depth_; }
    int K() const { return K_; }
    int p() const { return tower_->p; }
    const Series& base() const { return base_; }
    const std::vector<TowerElement>& coords() const { return c_; }
    TowerElement& coord(int j) { return c_[static_cast<std::size_t>(j)]; }

    bool is_zero() const;
    TowerElement operator+(const TowerElement& o) const;
    TowerElement operator-(const TowerElement& o) const;
    TowerElement operator-() const;
    TowerElement operator*(const TowerElement& o) const;
    TowerElement scaled(std::int64_t c) const;
    TowerElement pow(std::int64_t n) const;
    // p-th power (K == 1)
    TowerElement frobenius() const;
    TowerElement embed(int depth) const;
    TowerElement with_tower(const TowerPtr& t) const;
    TowerElement lift(int K) const;
    TowerElement reduce(int K) const;
    TowerElement truncated(std::int64_t prec) const;
    std::int64_t min_prec() const;
    // coefficients divisible by p^k divided by it; result has K = 1
    TowerElement divide_p_power(int k) const;
    // valuation beyond which the stored coordinates are not known (empty when exact)
    std::optional<Rational> precision_valuation() const;
    // map over base coefficients
    template <class F>
    TowerElement map_base(F&& f) const {
        TowerElement r = *this;
        if (depth_ == 0)
            r.base_ = f(base_);
        else
            for (auto& c : r.c_) c = c.map_base(f);
        return r;
    }
    // sigma(sum a_j theta^j) = sum sigma(a_j) sigma(theta)^j; images[i] is sigma(theta_{i+1}) in R_{i+1}
    template <class F>
    TowerElement apply(F&& base_map, const std::vector<TowerElement>& images) const;

    std::optional<Rational> valuation() const;
    bool operator==(const TowerElement& o) const;
    bool operator!=(const TowerElement& o) const { return !(*this == o); }
    std::string to_string() const;

    // monomial expansion: exponent numerator on the base grid, theta exponents, coefficient
    struct Monomial {
        std::int64_t e;
        std::vector<int> j;  // j[i] exponent of theta_{i+1}
        std::int64_t c;
    };
    std::vector<Monomial> monomials() const;
    static TowerElement from_monomial(const TowerPtr& t, int depth, int K, const Monomial& m, std::int64_t prec);
    Rational monomial_valuation(const Monomial& m) const;

  private:
    TowerPtr tower_;
    int depth_ = 0;
    int K_ = 1;
    Series base_;
    std::vector<TowerElement> c_;
};

struct ASLayer {
    TowerElement u;  // element of R_{d-1}
    Rational v_theta;
    bool ramified = true;
};

struct ASExtension {
    TowerPtr tower;
    TowerElement theta;  // satisfies theta^p - theta = u in the new top layer
};

// Adjoin a root of X^p - X = u on top of u's tower.
ASExtension adjoin_as_root(const TowerElement& u);
ASExtension adjoin_as_root(const NormFieldElement& u, int max_depth = kDefaultMaxDepth);

template <class F>
TowerElement TowerElement::apply(F&& base_map, const std::vector<TowerElement>& images) const {
    if (depth_ == 0) {
        TowerElement r = *this;
        r.base_ = base_map(base_);
        return r;
    }
    const TowerElement& img = images[static_cast<std::size_t>(depth_ - 1)];
    TowerElement th = img.lift(K_).with_tower(tower_);
    TowerElement result = zero(tower_, depth_, K_, min_prec());
    TowerElement power = constant(tower_, depth_, K_, 1);
    for (int j = 0; j < p(); ++j) {
        TowerElement cj = c_[static_cast<std::size_t>(j)].apply(base_map, images).embed(depth_);
        result = result + cj * power;
        if (j + 1 < p()) power = power * th;
    }
    return result;
}

}  // namespace phigamma
