#include <doctest.h>

#include <boost/multiprecision/cpp_int.hpp>
#include <map>

#include "phigamma/errors.hpp"
#include "phigamma/witt_side.hpp"
#include "phigamma/zmod_linalg.hpp"

using namespace phigamma;
using BigQ = boost::multiprecision::cpp_rational;
using BigZ = boost::multiprecision::cpp_int;

namespace {

// Multivariate polynomials over Q in X_0..X_{s-1}, Y_0..Y_{s-1}.
using Poly = std::map<std::vector<int>, BigQ>;

Poly var(int n, int i) {
    std::vector<int> e(static_cast<std::size_t>(n), 0);
    e[static_cast<std::size_t>(i)] = 1;
    return {{e, BigQ(1)}};
}

Poly add(const Poly& a, const Poly& b, const BigQ& sb = 1) {
    Poly r = a;
    for (auto& [e, c] : b) {
        r[e] += sb * c;
        if (r[e] == 0) r.erase(e);
    }
    return r;
}

Poly mul(const Poly& a, const Poly& b) {
    Poly r;
    for (auto& [e1, c1] : a)
        for (auto& [e2, c2] : b) {
            auto e = e1;
            for (std::size_t i = 0; i < e.size(); ++i) e[i] += e2[i];
            r[e] += c1 * c2;
            if (r[e] == 0) r.erase(e);
        }
    return r;
}

Poly power(const Poly& a, int n, int nv) {
    Poly r{{std::vector<int>(static_cast<std::size_t>(nv), 0), BigQ(1)}};
    for (int i = 0; i < n; ++i) r = mul(r, a);
    return r;
}

int ipow_int(int b, int e) {
    int r = 1;
    while (e--) r *= b;
    return r;
}

// ghost polynomial w_k in the variables offset..offset+s-1
Poly ghost(int k, int offset, int p, int nv) {
    Poly w;
    for (int i = 0; i <= k; ++i) w = add(w, power(var(nv, offset + i), ipow_int(p, k - i), nv), BigQ(ipow_int(p, i)));
    return w;
}

// Universal Witt sum (mult = false) or product polynomials S_k / P_k.
std::vector<Poly> witt_polys(int p, int s, bool mult) {
    const int nv = 2 * s;
    std::vector<Poly> out;
    for (int k = 0; k < s; ++k) {
        Poly g = mult ? mul(ghost(k, 0, p, nv), ghost(k, s, p, nv)) : add(ghost(k, 0, p, nv), ghost(k, s, p, nv));
        for (int i = 0; i < k; ++i) g = add(g, power(out[static_cast<std::size_t>(i)], ipow_int(p, k - i), nv), BigQ(-ipow_int(p, i)));
        Poly r;
        for (auto& [e, c] : g) r[e] = c / BigQ(ipow_int(p, k));
        for (auto& [e, c] : r) REQUIRE(denominator(c) == 1);
        out.push_back(r);
    }
    return out;
}

Series eval(const Poly& P, const std::vector<Series>& vals, int p) {
    Series acc(p, 1, vals[0].level(), kExact);
    for (auto& [e, c] : P) {
        BigZ n = numerator(c) % p;
        if (n < 0) n += p;
        if (n == 0) continue;
        Series term = Series::constant(p, 1, vals[0].level(), static_cast<std::int64_t>(n));
        for (std::size_t i = 0; i < e.size(); ++i)
            if (e[i]) term = term * vals[i].pow(e[i]);
        acc += term;
    }
    return acc;
}

std::vector<Series> base_components(const WittVector& w) {
    std::vector<Series> v;
    for (int k = 0; k < w.s(); ++k) v.push_back(w[k].base());
    return v;
}

}  // namespace

TEST_CASE("Teichmuller lifts") {
    auto t = make_tower(3, 0);
    CHECK(WittVector::teichmuller(nf_monomial(3, 0, 0, 0), 3).is_zero());
    CHECK(WittVector::teichmuller(nf_monomial(3, 0, 0, 1), 3) == WittVector::one(t, 3));
    auto pi = WittVector::teichmuller(nf_monomial(3, 0, 1), 3);
    CHECK(pi * pi == WittVector::teichmuller(nf_monomial(3, 0, 2), 3));
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        int p = std::array<int, 3>{3, 5, 7}[i % 3];
        auto a = Series::random(p, 1, i % 2, -2, 6, rng), b = Series::random(p, 1, i % 2, 0, 6, rng);
        CHECK(WittVector::teichmuller(a, 3) * WittVector::teichmuller(b, 3) == WittVector::teichmuller(a * b, 3));
    }
}

TEST_CASE("identities and the carry 1+1+1") {
    std::mt19937_64 rng(2);
    auto x = WittVector::random(5, 3, 0, -2, 8, rng);
    CHECK(x + WittVector::zero(x.tower(), 3) == x);
    CHECK(x * WittVector::one(x.tower(), 3) == x);
    auto t = make_tower(3, 0);
    auto one = WittVector::one(t, 2);
    auto three = one + one + one;
    CHECK(three[0].is_zero());
    CHECK(three[1] == TowerElement::constant(t, 0, 1, 1));
    CHECK(WittVector::integer(t, 2, 3) == three);
    auto nine = WittVector::integer(t, 3, 9);
    CHECK(nine[0].is_zero());
    CHECK(nine[1].is_zero());
    CHECK(nine[2] == TowerElement::constant(t, 0, 1, 1));
}

TEST_CASE("sum and product agree with the universal polynomials") {
    std::mt19937_64 rng(3);
    for (int p : {3, 5}) {
        for (int s : {2, 3}) {
            if (p == 5 && s == 3) continue;
            auto S = witt_polys(p, s, false), P = witt_polys(p, s, true);
            for (int trial = 0; trial < 4; ++trial) {
                auto x = WittVector::random(p, s, 0, -1, 4, rng), y = WittVector::random(p, s, 0, 0, 4, rng);
                auto vals = base_components(x);
                auto yv = base_components(y);
                vals.insert(vals.end(), yv.begin(), yv.end());
                auto sum = x + y, prod = x * y;
                for (int k = 0; k < s; ++k) {
                    CHECK(sum[k].base() == eval(S[static_cast<std::size_t>(k)], vals, p));
                    CHECK(prod[k].base() == eval(P[static_cast<std::size_t>(k)], vals, p));
                }
            }
        }
    }
}

TEST_CASE("Witt ring laws at s = 3") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 100; ++i) {
        auto x = WittVector::random(3, 3, 0, -1, 5, rng), y = WittVector::random(3, 3, 0, 0, 5, rng),
             z = WittVector::random(3, 3, 0, 1, 5, rng);
        CHECK((x + y) + z == x + (y + z));
        if (i % 4 == 0) {
            CHECK((x * y) * z == x * (y * z));
            CHECK(x * (y + z) == x * y + x * z);
            CHECK(x * y == y * x);
        }
        CHECK(x + y == y + x);
        CHECK((x - y) + y == x);
    }
}

TEST_CASE("ghost check on random pairs") {
    std::mt19937_64 rng(5);
    auto z = WittVector::zero(make_tower(3, 0), 3);
    CHECK(ghost_check(z, z, 2, rng).passed);
    auto a = WittVector::teichmuller(nf_parse("pi^-1 + 2*pi", 3), 3), b = WittVector::teichmuller(nf_parse("1 + pi^2", 3), 3);
    CHECK(ghost_check(a, b, 2, rng).passed);
    for (int i = 0; i < 100; ++i) {
        auto x = WittVector::random(3, 3, 0, -1, 5, rng), y = WittVector::random(3, 3, 0, 0, 5, rng);
        auto r = ghost_check(x, y, 2, rng);
        CHECK(r.passed);
        CHECK(r.verified == std::vector<int>{1, 2, 3});
    }
}

TEST_CASE("arithmetic model: phi and gamma") {
    auto pi = al_parse("pi", 3, 2);
    CHECK(reduce_mod_p(phi_A(pi)) == nf_parse("pi^3", 3));
    CHECK(phi_A(pi) == al_parse("3*pi + 3*pi^2 + pi^3", 3, 2));
    CHECK(gamma_A(pi, PAdicInt::exact(3, 4)) == al_parse("4*pi + 6*pi^2 + 4*pi^3 + pi^4", 3, 2));
    CHECK(gamma_A(pi, PAdicInt::exact(3, 1)) == pi);
    std::mt19937_64 rng(6);
    for (int i = 0; i < 100; ++i) {
        int p = std::array<int, 3>{3, 5, 7}[i % 3];
        int s = 1 + i % 3;
        auto x = Series::random(p, s, 0, -2 + i % 4, 20, rng);
        auto a = PAdicInt::exact(p, 1 + p);
        auto lhs = phi_A(gamma_A(x, a, 20), 30);
        auto rhs = gamma_A(phi_A(x, 30), a, 30);
        CHECK(lhs == rhs);
    }
}

TEST_CASE("reduction mod p intertwines the models") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        int p = std::array<int, 3>{3, 5, 7}[i % 3];
        int s = 2 + i % 2;
        auto x = Series::random(p, s, 0, -2, 12, rng), y = Series::random(p, s, 0, 0, 12, rng);
        CHECK(reduce_mod_p(x * y) == reduce_mod_p(x) * reduce_mod_p(y));
        CHECK(reduce_mod_p(x + y) == reduce_mod_p(x) + reduce_mod_p(y));
        CHECK(reduce_mod_p(phi_A(x, 40)) == frobenius_e(reduce_mod_p(x)));
        auto a = PAdicInt::exact(p, 1 + p);
        CHECK(reduce_mod_p(gamma_A(x, a, 12)) == gamma_e(reduce_mod_p(x), a, 12));
    }
}

TEST_CASE("v_E up to N") {
    auto pi = WittVector::teichmuller(nf_monomial(3, 0, 1), 3);
    CHECK(*v_e_upto(pi, 2) == Rational(1));
    std::mt19937_64 rng(8);
    for (int i = 0; i < 100; ++i) {
        auto x = WittVector::random(3, 3, 0, -3 + i % 5, 6, rng);
        for (int N : {0, 1, 2})
            CHECK(*v_e_upto(x.frobenius(), N) == *v_e_upto(x, N) * Rational(3));
        auto y = WittVector::random(3, 3, 0, -1, 6, rng);
        auto vp = v_e_upto(x * y, 2);
        if (vp) CHECK(*vp >= *v_e_upto(x, 2) + *v_e_upto(y, 2));
        auto vs = v_e_upto(x + y, 2);
        if (vs) CHECK(*vs >= std::min(*v_e_upto(x, 2), *v_e_upto(y, 2)));
        CHECK(*v_e_upto(x, 0) == *v_e_upto(WittVector::teichmuller(x[0], 3), 2));
    }
}

TEST_CASE("w_r gauge") {
    auto t = make_tower(3, 0);
    const Rational r(1, 2);
    CHECK(*w_r(WittVector::integer(t, 2, 3), r) == Rational(1));
    CHECK(*w_r(al_parse("3", 3, 2), r) == Rational(1));
    CHECK(!w_r(WittVector::zero(t, 2), r));
    CHECK(!w_r(Series(3, 2, 0, kExact), r));
    CHECK(*w_r(al_parse("pi", 3, 2), r) >= r * Rational(3, 2));
    // pi = [1 + pi-bar] - 1 in Witt coordinates
    auto eps = WittVector::teichmuller(nf_parse("1 + pi", 3), 3);
    auto piw = eps - WittVector::one(eps.tower(), 3);
    for (auto rr : {Rational(1, 3), Rational(1, 2), Rational(1)}) CHECK(*w_r(piw, rr) >= rr * Rational(3, 2));
    // the first digit of pi has valuation 1/p, so the bound stops at r = 1
    CHECK(*w_r(piw, Rational(2)) == Rational(2));
    std::mt19937_64 rng(9);
    for (int i = 0; i < 100; ++i) {
        auto x = WittVector::random(3, 3, 0, -2, 6, rng), y = WittVector::random(3, 3, 0, -1, 6, rng);
        Rational rr(1 + i % 3, 2);
        CHECK(*w_r(x.frobenius(), rr) == *w_r(x, rr * Rational(3)));
        auto wp = w_r(x * y, rr);
        if (wp) CHECK(*wp >= *w_r(x, rr) + *w_r(y, rr));
        auto ws = w_r(x + y, rr);
        if (ws) CHECK(*ws >= std::min(*w_r(x, rr), *w_r(y, rr)));
    }
}

TEST_CASE("valuation report") {
    auto z = WittVector::from_series({nf_parse("pi^-1", 3), nf_parse("pi^-9", 3)});
    auto rep = valuation_report(z, {0, 1}, {Rational(1, 10)});
    CHECK(*rep.v_upto[0].second == Rational(-1));
    CHECK(*rep.v_upto[1].second == Rational(-3));
    // flat digit valuations -3/2 and -9/2: nondecreasing up to r = 1/3
    REQUIRE(rep.radius);
    CHECK(*rep.radius == Rational(1, 3));
    CHECK(!rep.precision_limited);
}

TEST_CASE("weak neighborhoods") {
    auto t = make_tower(3, 0);
    CHECK(weak_membership(WittVector::integer(t, 3, 9), {2, 5}).member);
    CHECK(weak_membership(WittVector::teichmuller(nf_monomial(3, 0, 1), 3), {0, 1}).member);
    auto sq = WittVector::teichmuller(nf_monomial(3, 0, 2), 3);
    CHECK(weak_membership(sq, {1, 2}).member);
    CHECK(!weak_membership(sq, {1, 3}).member);
    CHECK(weak_membership(al_parse("9 + 3*pi + pi^4", 3, 3), {1, 4}).member);
    CHECK(!weak_membership(al_parse("9 + 3*pi + pi^4", 3, 3), {2, 4}).member);
    CHECK_THROWS_AS(weak_membership(al_parse("3*pi^4 + O(pi^5)", 3, 3), {1, 7}), PrecisionError);
    std::mt19937_64 rng(10);
    for (int i = 0; i < 50; ++i) {
        auto big = Series::random(3, 3, 0, 0, 40, rng);
        auto small = big.truncated(20);
        WeakNeighborhood U{1 + i % 3, static_cast<std::int64_t>(i % 15)};
        CHECK(weak_membership(big, U).member == weak_membership(small, U).member);
        std::vector<Series> cb, cs;
        for (int k = 0; k < 3; ++k) {
            auto c = Series::random(3, 1, 0, 1 + i % 4, 60, rng);
            cb.push_back(c);
            cs.push_back(c.truncated(30));
        }
        WeakNeighborhood V{1 + i % 2, 1 + i % 3};
        CHECK(weak_membership(WittVector::from_series(cb), V).member == weak_membership(WittVector::from_series(cs), V).member);
    }
}
