#include <doctest.h>

#include "phigamma/errors.hpp"
#include "phigamma/norm_field.hpp"
#include "phigamma/zmod_linalg.hpp"

using namespace phigamma;

namespace {

// binomial(a, j) mod p through Lucas' theorem
std::int64_t lucas(std::int64_t a, std::int64_t j, int p) {
    std::int64_t r = 1;
    while (a || j) {
        std::int64_t ai = a % p, ji = j % p;
        if (ji > ai) return 0;
        std::int64_t b = 1;
        for (std::int64_t k = 0; k < ji; ++k) b = b * (ai - k) / (k + 1);
        r = r * (b % p) % p;
        a /= p;
        j /= p;
    }
    return r;
}

// gamma on a polynomial in pi-bar at level 0 by naive expansion of ((1+X)^a - 1)^e
Series naive_gamma(const Series& x, std::int64_t a, std::int64_t prec) {
    const int p = x.p();
    std::vector<std::int64_t> s(static_cast<std::size_t>(prec), 0);
    for (std::int64_t j = 1; j < prec; ++j) s[static_cast<std::size_t>(j)] = lucas(a, j, p);
    Series S = Series::from_coeffs(p, 1, 0, 0, s, prec);
    Series out(p, 1, 0, prec);
    for (std::int64_t e = x.val(); e < x.end(); ++e) {
        if (!x.coeff(e)) continue;
        Series term = Series::constant(p, 1, 0, x.coeff(e), prec);
        for (std::int64_t k = 0; k < e; ++k) term = (term * S).truncated(prec);
        out += term;
    }
    return out.truncated(prec);
}

Series random_nf(std::mt19937_64& rng, int p, int level, std::int64_t lo, std::int64_t hi) {
    return Series::random(p, 1, level, lo, hi, rng);
}

}  // namespace

TEST_CASE("frobenius on monomials and binomials") {
    auto pi = nf_monomial(3, 0, 1);
    CHECK(frobenius_e(pi) == nf_monomial(3, 0, 3));
    auto one_pi = nf_parse("1 + pi", 5);
    CHECK(frobenius_e(one_pi) == nf_parse("1 + pi^5", 5));
}

TEST_CASE("frobenius multiplies valuations by p") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        auto x = random_nf(rng, 3, i % 3, -5 + i % 7, 12);
        CHECK(frobenius_e(x).valuation() == x.valuation() * 3);
        CHECK(frobenius_e(x).prec() == x.prec() * 3);
        // the char p binomial: (x+y)^p = x^p + y^p
        auto y = random_nf(rng, 3, i % 3, 0, 12);
        CHECK(frobenius_e(x + y) == frobenius_e(x) + frobenius_e(y));
        CHECK(frobenius_e(x * y) == frobenius_e(x) * frobenius_e(y));
    }
}

TEST_CASE("gamma with a = 1 is the identity") {
    std::mt19937_64 rng(2);
    auto x = random_nf(rng, 5, 1, -3, 20);
    CHECK(gamma_e(x, PAdicInt::exact(5, 1)).identical(x));
}

TEST_CASE("gamma of pi-bar at p = 3, a = 4") {
    auto pi = nf_monomial(3, 0, 1, 1, 10);
    auto g = gamma_e(pi, PAdicInt::exact(3, 4));
    CHECK(g == nf_parse("pi + pi^3 + pi^4 + O(pi^10)", 3));
}

TEST_CASE("gamma agrees with a naive binomial expansion") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 30; ++i) {
        int p = std::array<int, 3>{3, 5, 7}[i % 3];
        std::int64_t a = 1 + p * (1 + i % 4);
        auto x = random_nf(rng, p, 0, 1, 15);
        CHECK(gamma_e(x, PAdicInt::exact(p, a)) == naive_gamma(x, a, 15));
    }
}

TEST_CASE("gamma preserves valuations and commutes with frobenius") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        int p = std::array<int, 3>{3, 5, 7}[i % 3];
        auto x = random_nf(rng, p, i % 2, -4 + i % 6, 10);
        auto a = PAdicInt::exact(p, 1 + p);
        auto gx = gamma_e(x, a);
        CHECK(gx.valuation() == x.valuation());
        CHECK(gx.prec() == x.prec());
        CHECK(frobenius_e(gx) == gamma_e(frobenius_e(x), a));
    }
}

TEST_CASE("gamma needs enough p-adic digits of the exponent") {
    auto x = nf_monomial(3, 0, 1, 1, 40);
    PAdicInt a{4, 2};  // known mod 9 only
    CHECK_THROWS_AS(gamma_e(x, a), PrecisionError);
}

TEST_CASE("v_E examples") {
    auto z = Series(3, 1, 0, 10);
    auto v = v_e(z);
    CHECK(!v.value);
    CHECK(v.precision_limited);
    CHECK(*v.bound == Rational(10));
    CHECK(*v_e(nf_monomial(3, 0, 1)).value == Rational(1));
    CHECK(*v_e(nf_parse("pi^-2 + pi^-1", 3)).value == Rational(-2));
}

TEST_CASE("flat normalization") {
    CHECK(flat_normalization(Rational(1), 3) == Rational(3, 2));
    CHECK(flat_normalization(Rational(0), 5) == Rational(0));
    CHECK(flat_normalization(Rational(4), 5) == Rational(5));
}

TEST_CASE("raising and lowering perfection levels") {
    auto pi = nf_monomial(3, 0, 1);
    auto up = raise_perfection(pi);
    CHECK(up.level() == 1);
    CHECK(up.val() == 3);
    CHECK(up == pi);
    auto root = nf_monomial(3, 1, 1);  // pi^{1/3}
    CHECK(frobenius_e(root) == pi);
    std::mt19937_64 rng(5);
    for (int i = 0; i < 20; ++i) {
        auto x = random_nf(rng, 3, 0, -3, 9);
        auto y = lower_perfection(lower_perfection(raise_perfection(raise_perfection(x))));
        CHECK(y.identical(x));
    }
}

TEST_CASE("ring laws on random triples") {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 500; ++i) {
        int p = std::array<int, 3>{3, 5, 7}[i % 3];
        auto a = random_nf(rng, p, 0, -3, 8), b = random_nf(rng, p, 0, -2, 9), c = random_nf(rng, p, 0, 0, 7);
        CHECK((a * b) * c == a * (b * c));
        CHECK(a * (b + c) == a * b + a * c);
        CHECK(a * b == b * a);
    }
}

TEST_CASE("valuation is multiplicative and ultrametric") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        auto a = random_nf(rng, 3, 1, -5, 12), b = random_nf(rng, 3, 1, -1, 14);
        CHECK((a * b).valuation() == a.valuation() + b.valuation());
        auto s = a + b;
        if (!s.is_zero()) {
            CHECK(s.valuation() >= std::min(a.valuation(), b.valuation()));
            if (a.valuation() != b.valuation()) CHECK(s.valuation() == std::min(a.valuation(), b.valuation()));
        }
    }
}

TEST_CASE("window rule for products") {
    auto a = nf_parse("pi^-1 + pi + O(pi^4)", 3);
    auto b = nf_parse("pi^2 + O(pi^6)", 3);
    auto c = a * b;
    CHECK(c.val() == 1);
    CHECK(c.prec() == std::min(-1 + 6, 2 + 4));
}

TEST_CASE("text syntax round trips") {
    const std::string s = "pi^-2 + 2*pi^(1/3) + pi^4";
    auto x = nf_parse(s, 3);
    CHECK(x.to_string() == s);
    CHECK(x.level() == 1);
    std::mt19937_64 rng(8);
    for (int i = 0; i < 50; ++i) {
        auto y = Series::random(5, 1 + i % 3, i % 3, -4, 6, rng);
        auto z = Series::parse(y.to_string(), 5, 1 + i % 3);
        CHECK(z == y);
        CHECK(z.to_string() == y.to_string());
    }
    CHECK_THROWS_AS(nf_parse("", 3), ParseError);
    CHECK_THROWS_AS(nf_parse("pi^(1/2)", 3), ParseError);
    CHECK_THROWS_AS(nf_parse("2*x", 3), ParseError);
}

TEST_CASE("relative ring: geometric action and the semidirect relation") {
    const int p = 3;
    const int m = 1;
    auto x13 = RelativeNormElement::monomial(p, m, 1, Series::constant(p, 1, m, 1, 30));  // x^{1/3}
    auto x1 = RelativeNormElement::monomial(p, m, 3, Series::constant(p, 1, m, 1, 30));   // x
    auto eps = Series::constant(p, 1, m, 1) + Series::monomial(p, 1, m, 3, 1);            // 1 + pi-bar
    CHECK(x1.gamma_tilde(1) == RelativeNormElement::monomial(p, m, 3, eps.truncated(30)));
    const std::int64_t chi = 1 + p;
    auto a = PAdicInt::exact(p, chi);
    auto ainv = PAdicInt{inverse_mod(chi, ipow(p, 30)), 30};
    std::mt19937_64 rng(9);
    for (int i = 0; i < 20; ++i) {
        auto c = Series::random(p, 1, m, 0, 30, rng);
        for (std::int64_t j : {1, 2, 4, -1}) {
            auto mono = RelativeNormElement::monomial(p, m, j, c);
            auto lhs = mono.gamma(ainv).gamma_tilde(1).gamma(a);
            auto rhs = mono.gamma_tilde(chi);
            CHECK(lhs == rhs);
        }
    }
    // gamma fixes x and acts on coefficients; frobenius raises x to the p
    CHECK(x13.gamma(a) == x13);
    CHECK(x13.frobenius() == x1);
}

TEST_CASE("Artin-Schreier layers") {
    auto u = nf_monomial(3, 0, -1, 1, 20);
    auto ext = adjoin_as_root(u);
    CHECK(*ext.theta.valuation() == Rational(-1, 3));
    auto rel = ext.theta.frobenius() - ext.theta - TowerElement::from_base(ext.tower, u).embed(1);
    CHECK(rel.is_zero());
    CHECK_THROWS_AS(adjoin_as_root(Series(3, 1, 0, 20)), MathError);

    std::mt19937_64 rng(10);
    for (int i = 0; i < 30; ++i) {
        int p = std::array<int, 3>{3, 5, 7}[i % 3];
        std::int64_t e = -1 - (i % 4);
        if (e % p == 0) e -= 1;
        auto uu = Series::random(p, 1, 0, e, 15, rng);
        auto ex = adjoin_as_root(uu);
        auto r = ex.theta.frobenius() - ex.theta - TowerElement::from_base(ex.tower, uu).embed(1);
        CHECK(r.is_zero());
        // ring laws inside the layer
        auto a = TowerElement::from_base(ex.tower, Series::random(p, 1, 0, -2, 10, rng)).embed(1) + ex.theta;
        auto b = ex.theta * ex.theta + TowerElement::from_base(ex.tower, Series::random(p, 1, 0, 0, 10, rng)).embed(1);
        CHECK((a * b).frobenius() == a.frobenius() * b.frobenius());
        CHECK(*(a * b).valuation() == *a.valuation() + *b.valuation());
    }
}

TEST_CASE("tower depth limit") {
    auto u = nf_monomial(3, 0, -1, 1, 20);
    auto e1 = adjoin_as_root(u, 1);
    CHECK_THROWS_AS(adjoin_as_root(e1.theta), DepthExceeded);
    auto e2 = adjoin_as_root(u);
    auto e3 = adjoin_as_root(e2.theta);
    CHECK(e3.tower->layers.size() == 2);
    CHECK(*e3.theta.valuation() == Rational(-1, 9));
    auto r = e3.theta.frobenius() - e3.theta - e2.theta.with_tower(e3.tower).embed(2);
    CHECK(r.is_zero());
}
