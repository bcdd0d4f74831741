#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "phigamma/norm_field.hpp"

namespace phigamma {

// Z/p^s((pi)) with phi(pi) = (1+pi)^p - 1 and gamma_a(pi) = (1+pi)^a - 1.
using ArithLiftElement = Series;

ArithLiftElement al_parse(const std::string& text, int p, int s);
ArithLiftElement phi_A(const ArithLiftElement& z, std::int64_t cap = kExact);
ArithLiftElement gamma_A(const ArithLiftElement& z, const PAdicInt& a, std::int64_t cap = kExact);
inline NormFieldElement reduce_mod_p(const ArithLiftElement& z) { return z.reduce(1); }

// Coefficient c of a series over Z/p^K with p^k | c, returned as c / p^k mod p.
Series divide_by_p_power(const Series& x, int k);

// Length-s Witt vector with components in an Artin-Schreier tower over E.
class WittVector {
  public:
    WittVector() = default;
    explicit WittVector(std::vector<TowerElement> components);

    static WittVector zero(const TowerPtr& t, int s, std::int64_t prec = kExact);
    static WittVector one(const TowerPtr& t, int s);
    static WittVector from_series(const std::vector<Series>& components);
    static WittVector teichmuller(const TowerElement& a, int s);
    static WittVector teichmuller(const NormFieldElement& a, int s);
    static WittVector random(int p, int s, int level, std::int64_t lo, std::int64_t hi, std::mt19937_64& rng);
    // the integer n viewed in W_s(F_p)
    static WittVector integer(const TowerPtr& t, int s, std::int64_t n);

    int p() const { return tower_->p; }
    int s() const { return static_cast<int>(c_.size()); }
    const TowerPtr& tower() const { return tower_; }
    int depth() const { return c_.empty() ? 0 : c_[0].depth(); }
    const TowerElement& operator[](int k) const { return c_[static_cast<std::size_t>(k)]; }
    const std::vector<TowerElement>& components() const { return c_; }

    WittVector operator+(const WittVector& o) const;
    WittVector operator-(const WittVector& o) const;
    WittVector operator-() const;
    WittVector operator*(const WittVector& o) const;
    // componentwise p-th power
    WittVector frobenius() const;
    // (a_0, ..., a_{s-1}) -> (0, a_0, ..., a_{s-2})
    WittVector verschiebung() const;
    WittVector with_tower(const TowerPtr& t) const;
    WittVector embed(int depth) const;
    WittVector truncated(std::int64_t prec) const;

    bool is_zero() const;
    bool operator==(const WittVector& o) const;
    bool operator!=(const WittVector& o) const { return !(*this == o); }
    std::int64_t min_prec() const;
    std::string to_string() const;

  private:
    TowerPtr tower_;
    std::vector<TowerElement> c_;
};

void align(WittVector& a, WittVector& b);

// Ghost components sum_{i<=k} p^i xhat_i^{p^{k-i}} of lifted components, computed mod p^K.
std::vector<TowerElement> ghost_components(const std::vector<TowerElement>& lifted, int K);

struct GhostCheckResult {
    bool passed = true;
    // ghost component k is compared modulo p^{verified[k]}
    std::vector<int> verified;
    int failing_component = -1;
};

// Compare ghost components of x+y and x*y against those of x and y using independent random lifts mod p^{s+t}.
GhostCheckResult ghost_check(const WittVector& x, const WittVector& y, int t, std::mt19937_64& rng);

struct ValuationReport {
    // (N, v_E^{<=N}); empty value = +infinity
    std::vector<std::pair<int, std::optional<Rational>>> v_upto;
    // (r, w_r); empty value = +infinity
    std::vector<std::pair<Rational, std::optional<Rational>>> w;
    // largest r with r*v(z_k)+k nondecreasing over stored k; empty = no bound from stored terms
    std::optional<Rational> radius;
    bool precision_limited = false;
};

// Valuation of the k-th Teichmuller digit z_k = a_k^{1/p^k}, pi-bar normalized.
std::optional<Rational> teichmuller_digit_valuation(const WittVector& z, int k);
std::optional<Rational> v_e_upto(const WittVector& z, int N);
// inf_k r * v(z_k) + k with v flat normalized (v(pi) = p/(p-1))
std::optional<Rational> w_r(const WittVector& z, const Rational& r);
std::optional<Rational> w_r(const ArithLiftElement& z, const Rational& r);
ValuationReport valuation_report(const WittVector& z, const std::vector<int>& Ns, const std::vector<Rational>& rs);
ValuationReport valuation_report(const ArithLiftElement& z, const std::vector<int>& Ns, const std::vector<Rational>& rs);

struct WeakNeighborhood {
    int n = 0;
    std::int64_t h = 0;
};

struct MembershipResult {
    bool member = false;
    // first offending digit (Witt) or exponent (arithmetic model), -1 when member
    std::int64_t witness = -1;
};

// z in p^n W + [pi-bar]^h W^+ for Witt vectors; z in p^n A + pi^h A^+ for the arithmetic model.
MembershipResult weak_membership(const WittVector& z, const WeakNeighborhood& U);
MembershipResult weak_membership(const ArithLiftElement& z, const WeakNeighborhood& U);

}  // namespace phigamma
