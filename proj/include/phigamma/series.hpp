#pragma once

#include <boost/rational.hpp>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace phigamma {

using Rational = boost::rational<long long>;

// Exponent numerators and precisions at or beyond this bound mean "exact".
constexpr std::int64_t kExact = std::int64_t{1} << 60;

inline std::int64_t sat_add(std::int64_t a, std::int64_t b) {
    if (a >= kExact || b >= kExact) return kExact;
    return a + b;
}

std::int64_t mulmod(std::int64_t a, std::int64_t b, std::int64_t q);
std::int64_t powmod(std::int64_t a, std::int64_t e, std::int64_t q);

// Element of Z_p known modulo p^digits.
struct PAdicInt {
    std::int64_t residue = 0;
    int digits = 0;
    static int max_digits(int p);
    static PAdicInt exact(int p, std::int64_t value);
    PAdicInt times(const PAdicInt& o, int p) const;
    PAdicInt pow(std::int64_t e, int p) const;
};

// Teichmuller representative of a mod p, computed mod p^digits.
PAdicInt teichmuller_digit(int p, std::int64_t a, int digits);

// Truncated Laurent series  sum c_e t^{e/p^level} + O(t^{prec/p^level})  over Z/p^K.
// Exponents and precision are stored as integer numerators on the level grid.
class Series {
  public:
    Series() = default;
    Series(int p, int K, int level, std::int64_t prec = kExact);

    static Series monomial(int p, int K, int level, std::int64_t e, std::int64_t c, std::int64_t prec = kExact);
    static Series constant(int p, int K, int level, std::int64_t c, std::int64_t prec = kExact);
    static Series from_coeffs(int p, int K, int level, std::int64_t start, const std::vector<std::int64_t>& c,
                              std::int64_t prec = kExact);
    static Series random(int p, int K, int level, std::int64_t lo, std::int64_t hi, std::mt19937_64& rng,
                         bool unit_leading = true);

    int p() const { return p_; }
    int K() const { return K_; }
    int level() const { return level_; }
    std::int64_t modulus() const { return q_; }
    std::int64_t prec() const { return prec_; }
    bool exact() const { return prec_ >= kExact; }
    // Numerator of the least exponent with nonzero coefficient, prec() for zero.
    std::int64_t val() const { return val_; }
    // Numerator just past the last nonzero coefficient.
    std::int64_t end() const { return val_ + static_cast<std::int64_t>(c_.size()); }
    bool is_zero() const { return c_.empty(); }
    std::int64_t coeff(std::int64_t e) const;
    const std::vector<std::int64_t>& coeffs() const { return c_; }

    // least exponent whose coefficient is a unit (nullopt if none)
    std::optional<std::int64_t> first_unit() const;

    Rational valuation() const;  // of the leading term, as a rational exponent
    Rational precision() const;

    Series operator+(const Series& o) const;
    Series operator-(const Series& o) const;
    Series operator-() const;
    Series operator*(const Series& o) const;
    Series scaled(std::int64_t c) const;
    Series shifted(std::int64_t e) const;  // multiply by t^{e/p^level}
    Series& operator+=(const Series& o) { return *this = *this + o; }
    Series& operator-=(const Series& o) { return *this = *this - o; }
    Series& operator*=(const Series& o) { return *this = *this * o; }

    Series mul(const Series& o, std::int64_t cap) const;
    Series truncated(std::int64_t prec) const;
    Series with_prec(std::int64_t prec) const { return truncated(prec); }
    Series pow(std::int64_t n, std::int64_t cap = kExact) const;
    Series inverse(std::int64_t cap = kExact) const;
    // x(S): substitute the grid variable t^{1/p^level} by S (same ring).
    Series compose(const Series& S, std::int64_t cap = kExact) const;

    Series reduce(int K) const;        // coefficients mod p^K
    Series lift(int K) const;          // same representatives, read mod p^K (K >= K())
    Series regrid(int level) const;    // raise (or lower when divisible) the grid level
    // x^p with exponents multiplied by p (only a ring map when K == 1)
    Series frobenius_exponents() const;

    // Mathematical equality: same ring and equal coefficients below the common precision.
    bool operator==(const Series& o) const;
    bool operator!=(const Series& o) const { return !(*this == o); }
    // Bitwise equality of the stored representation.
    bool identical(const Series& o) const;

    std::string to_string(const std::string& var = "pi") const;
    static Series parse(const std::string& text, int p, int K, const std::string& var = "pi");

  private:
    void normalize();
    void check_ring(const Series& o) const;
    static std::int64_t min_prec(std::int64_t a, std::int64_t b) { return a < b ? a : b; }

    int p_ = 3;
    int K_ = 1;
    int level_ = 0;
    std::int64_t q_ = 3;
    std::int64_t prec_ = kExact;
    std::int64_t val_ = kExact;
    std::vector<std::int64_t> c_;
};

// Bring two series to a common grid level.
void common_level(Series& a, Series& b);

// (1+t)^a - 1 for a in Z_p, truncated at cap.
Series one_plus_t_pow_minus_one(int p, int K, int level, const PAdicInt& a, std::int64_t cap);

}  // namespace phigamma
