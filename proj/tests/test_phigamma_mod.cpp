#include <doctest.h>

#include <random>

#include "phigamma/errors.hpp"
#include "phigamma/phigamma_mod.hpp"

using namespace phigamma;

namespace {

SeriesMatrix one_by_one(const Series& x) { return SeriesMatrix(1, 1, x); }

Series pi_series(int p, int s) { return Series::monomial(p, s, 0, 1, 1); }

// Phi = A, G = poly(A) for a random invertible constant matrix A
PhiGammaModule random_constant_module(int p, int s, int rank, std::mt19937_64& rng) {
    ZModMatrix A = ZModMatrix::random_unimodular(p, s, rank, rng);
    std::uniform_int_distribution<std::int64_t> unit(1, p - 1), any(0, ipow(p, s) - 1);
    ZModMatrix G = ZModMatrix::identity(p, s, rank).scaled(unit(rng)) + A.scaled(p * any(rng)) + (A * A).scaled(any(rng) * p);
    auto lift = [&](const ZModMatrix& M) {
        SeriesMatrix S(rank, rank, Series(p, s, 0));
        for (int i = 0; i < rank; ++i)
            for (int j = 0; j < rank; ++j) S.at(i, j) = Series::constant(p, s, 0, M(i, j));
        return S;
    };
    return make_module(p, s, lift(A), {{"gamma", lift(G), default_chi(p)}}, false,
                       std::vector<int>(static_cast<std::size_t>(rank), 0));
}

bool same_data(const PhiGammaModule& a, const PhiGammaModule& b) {
    return write_module(a) == write_module(b);
}

}  // namespace

TEST_CASE("trivial module is valid") {
    for (int s : {1, 2, 3}) {
        auto D = trivial_module(3, s);
        CHECK(check_module(D).ok);
        CHECK(D.Phi.is_identity());
        CHECK(D.gamma().G.is_identity());
    }
}

TEST_CASE("Phi = (pi) with its commuting gamma matrix") {
    auto D = pi_module(3, 40);
    CHECK(check_module(D).ok);
    // the constant term of G is 1 and G = u^{1/(p-1)} with u = gamma(pi)/pi
    const Series& G = D.gamma().G.at(0, 0);
    CHECK(G.coeff(0) == 1);
    Series u = gamma_A(pi_series(3, 1), PAdicInt::exact(3, 4), 42).shifted(-1);
    CHECK(G.mul(G, 40) == u.truncated(40));
    CHECK(check_module(pi_module(5, 30)).ok);
}

TEST_CASE("gamma(pi)/pi alone does not commute with Phi = (pi)") {
    const int p = 3;
    Series u = gamma_A(pi_series(p, 1), PAdicInt::exact(p, 4), 40).shifted(-1);
    CHECK_THROWS_AS(make_module(p, 1, one_by_one(pi_series(p, 1)), {{"gamma", one_by_one(u), 4}}, false, {}, 30),
                    InvariantFailure);
    PhiGammaModule D;
    D.p = p;
    D.rank = 1;
    D.Phi = one_by_one(pi_series(p, 1));
    D.generators = {{"gamma", one_by_one(u.truncated(30)), 4}};
    D.window = 30;
    auto c = check_module(D);
    CHECK_FALSE(c.ok);
    CHECK(c.invariant == "commutation");
    CHECK(c.row == 0);
    CHECK(c.col == 0);
}

TEST_CASE("non-etale and malformed data are rejected") {
    auto Phi = one_by_one(Series::constant(3, 2, 0, 3));
    auto G = one_by_one(Series::constant(3, 2, 0, 1));
    PhiGammaModule D;
    D.p = 3;
    D.s = 2;
    D.Phi = Phi;
    D.generators = {{"gamma", G, 4}};
    auto c = check_module(D);
    CHECK_FALSE(c.ok);
    CHECK(c.invariant == "etale");
    CHECK_THROWS_AS(make_module(3, 2, Phi, {{"gamma", G, 4}}), InvariantFailure);
    CHECK_THROWS_AS(make_module(3, 2, G, {}), InvariantFailure);
    CHECK_THROWS_AS(make_module(3, 2, G, {{"gamma", G, 3}}), InvariantFailure);

    // a rank 2 matrix whose determinant is p
    SeriesMatrix M = SeriesMatrix::identity(3, 2, 2);
    M.at(1, 1) = Series::constant(3, 2, 0, 3);
    D.rank = 2;
    D.Phi = M;
    D.generators = {{"gamma", SeriesMatrix::identity(3, 2, 2), 4}};
    CHECK(check_module(D).invariant == "etale");
}

TEST_CASE("Delta equivariance is checked") {
    // Phi = pi is not an eigenvector of Delta
    PhiGammaModule D = pi_module(3, 30);
    D.delta = {0};
    auto c = check_module(D);
    CHECK_FALSE(c.ok);
    CHECK(c.invariant == "delta");
}

TEST_CASE("Tate twists") {
    auto T = trivial_module(3, 1);
    CHECK(same_data(tate_twist(T, 0), T));
    auto D1 = tate_twist(T, 1);
    CHECK(D1.gamma().G.at(0, 0).coeff(0) == 1);  // 4 mod 3
    CHECK(D1.delta == std::vector<int>{1});
    CHECK_FALSE(same_data(D1, T));
    auto D2 = tate_twist(T, 2);
    CHECK(same_data(D2, T));
    CHECK(D2.Phi == T.Phi);
    CHECK(D2.gamma().G == T.gamma().G);
    CHECK(same_data(cyclotomic_twist_module(3, 1, 2), T));
    CHECK(same_data(cyclotomic_twist_module(5, 1, 4), trivial_module(5, 1)));

    auto E1 = cyclotomic_twist_module(3, 2, 1);
    CHECK(E1.gamma().G.at(0, 0).coeff(0) == 4);
    auto Em1 = cyclotomic_twist_module(3, 2, -1);
    CHECK(Em1.gamma().G.at(0, 0).coeff(0) == 7);  // 4 * 7 = 28 = 1 mod 9
    CHECK(check_module(tate_twist(pi_module(3, 30), 1)).ok);
}

TEST_CASE("duals and tensor products of characters") {
    for (int s : {1, 2, 3}) {
        auto T = trivial_module(3, s);
        CHECK(same_data(dual_module(T), T));
        auto D1 = cyclotomic_twist_module(3, s, 1), Dm1 = cyclotomic_twist_module(3, s, -1);
        CHECK(same_data(dual_module(D1), Dm1));
        CHECK(same_data(tensor_product(D1, Dm1), T));
    }
    auto P = pi_module(3, 30);
    auto PP = tensor_product(P, dual_module(P));
    CHECK(check_module(PP).ok);
    CHECK(PP.Phi.at(0, 0) == Series::constant(3, 1, 0, 1));
}

TEST_CASE("reduction modulo p^n") {
    CHECK(same_data(reduce_mod(trivial_module(3, 2), 1), trivial_module(3, 1)));
    CHECK(same_data(reduce_mod(cyclotomic_twist_module(3, 2, 1), 1), cyclotomic_twist_module(3, 1, 1)));
    CHECK_THROWS_AS(reduce_mod(trivial_module(3, 2), 3), std::invalid_argument);
}

TEST_CASE("reduction commutes with tensor and dual") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const int p = trial % 2 ? 3 : 5;
        auto A = random_constant_module(p, 3, 2, rng);
        auto B = random_constant_module(p, 3, 1 + trial % 2, rng);
        const int n = 1 + trial % 2;
        auto lhs = reduce_mod(tensor_product(A, B), n);
        auto rhs = tensor_product(reduce_mod(A, n), reduce_mod(B, n));
        CHECK(same_data(lhs, rhs));
        CHECK(same_data(reduce_mod(dual_module(A), n), dual_module(reduce_mod(A, n))));
        CHECK(check_module(lhs).ok);
    }
}

TEST_CASE("random relative modules satisfy the semidirect relation") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        auto D = random_relative_module(3, 1 + trial % 3, rng);
        CHECK(check_module(D).ok);
        CHECK(D.gamma_tilde() != nullptr);
    }
    // G~ of order 9 is refused
    PhiGammaModule D = random_relative_module(3, 1, rng);
    D.generators[1].G = SeriesMatrix::scalar(3, 1, 1, 2);
    CHECK(check_module(D).invariant == "semidirect");
}

TEST_CASE("phi-fixed points in rank one") {
    auto t = solve_phi_fixed(trivial_module(3, 1));
    CHECK(t.outcome == PhiFixedReport::Outcome::Solved);
    CHECK(t.v == Series::constant(3, 1, 0, 1));
    CHECK(t.nonzero_solutions == 2);

    auto d1 = solve_phi_fixed(cyclotomic_twist_module(3, 1, 1));
    CHECK(d1.outcome == PhiFixedReport::Outcome::Solved);
    CHECK(d1.v == Series::constant(3, 1, 0, 1));

    auto pm = solve_phi_fixed(pi_module(3, 30));
    CHECK(pm.outcome == PhiFixedReport::Outcome::Inconclusive);
    CHECK_FALSE(pm.reason.empty());

    auto two = make_module(3, 1, one_by_one(Series::constant(3, 1, 0, 2)), {{"gamma", one_by_one(Series::constant(3, 1, 0, 1)), 4}});
    CHECK(solve_phi_fixed(two).outcome == PhiFixedReport::Outcome::Inconclusive);
}

TEST_CASE("planted Phi = w / phi(w) recovers v proportional to w") {
    std::mt19937_64 rng(29);
    for (int p : {3, 5}) {
        for (int trial = 0; trial < 8; ++trial) {
            const std::int64_t k = trial % 3 - 1;
            Series w = Series::random(p, 1, 0, k, k + 4, rng);
            const std::int64_t cap = 40;
            Series phiw = phi_A(w, cap + p * 4);
            Series Phi = w.mul(phiw.inverse(cap + p * 4), cap);
            PhiGammaModule D;
            D.p = p;
            D.Phi = one_by_one(Phi);
            D.generators = {{"gamma", one_by_one(Series::constant(p, 1, 0, 1)), default_chi(p)}};
            D.window = cap;
            auto r = solve_phi_fixed(D);
            REQUIRE(r.outcome == PhiFixedReport::Outcome::Solved);
            // v / w is a constant
            Series ratio = r.v.mul(w.inverse(cap), cap - 10);
            INFO("w = " << w.to_string() << " v = " << r.v.to_string());
            CHECK(ratio.val() == 0);
            CHECK(ratio.truncated(ratio.prec()) == Series::constant(p, 1, 0, ratio.coeff(0)).truncated(ratio.prec()));
        }
    }
}

TEST_CASE("module files round-trip") {
    std::mt19937_64 rng(31);
    std::vector<PhiGammaModule> mods{trivial_module(3, 1), cyclotomic_twist_module(3, 2, 1), pi_module(3, 20),
                                     random_relative_module(3, 2, rng), random_constant_module(5, 2, 2, rng)};
    for (auto& D : mods) {
        std::string text = write_module(D);
        auto back = parse_module(text);
        CHECK(write_module(back) == text);
    }
    auto T = parse_module(
        "# trivial module\n"
        "format = \"phigamma-module 1\"\n"
        "prime = 3\n"
        "power = 1\n"
        "rank = 1\n"
        "delta = [0]\n"
        "phi = [[\"1\"]]\n"
        "gamma = [[\"1\"]]\n");
    CHECK(same_data(T, trivial_module(3, 1)));
}

TEST_CASE("module file errors carry positions") {
    CHECK_THROWS_AS(parse_module(""), ParseError);
    CHECK_THROWS_AS(parse_module("# only a comment\n"), ParseError);
    try {
        parse_module("format = \"phigamma-module 1\"\nprime = 3\nrank = [1,\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line == 3);
        CHECK(e.column > 6);
    }
    try {
        parse_module("format = \"phigamma-module 1\"\nprime = 3\nrank = 1\nphi = [[\"1\"]]\ncolour = 1\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line == 5);
    }
    CHECK_THROWS_AS(parse_module("format = \"phigamma-module 1\"\nprime = 3\nrank = 1\nphi = [[\"1\"]]\n"), ParseError);
    CHECK_THROWS_AS(parse_module("format = \"phigamma-module 2\"\nprime = 3\nrank = 1\nphi = [[\"1\"]]\ngamma = [[\"1\"]]\n"),
                    ParseError);
    CHECK_THROWS_AS(parse_module("format = \"phigamma-module 1\"\nprime = 3\nrank = 1\nphi = [[\"pi^(\"]]\ngamma = [[\"1\"]]\n"),
                    ParseError);
    CHECK_THROWS_AS(parse_module("format = \"phigamma-module 1\"\nprime = 3\nrank = 1\nphi = [[\"3\"]]\ngamma = [[\"1\"]]\npower = 2\n"),
                    InvariantFailure);
}
