#include <doctest.h>

#include <cmath>
#include <set>

#include "phigamma/zmod_linalg.hpp"

using namespace phigamma;

namespace {

// Enumerate every vector of (Z/q)^n and count how many A sends to 0, and the image size.
std::pair<std::size_t, std::size_t> brute_kernel_image(const ZModMatrix& A) {
    const std::int64_t q = A.modulus();
    const Eigen::Index n = A.cols();
    std::size_t total = 1;
    for (Eigen::Index i = 0; i < n; ++i) total *= static_cast<std::size_t>(q);
    std::size_t ker = 0;
    std::set<std::vector<std::int64_t>> image;
    std::vector<std::int64_t> x(static_cast<std::size_t>(n), 0);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t t = idx;
        for (Eigen::Index i = 0; i < n; ++i) {
            x[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(t % static_cast<std::size_t>(q));
            t /= static_cast<std::size_t>(q);
        }
        std::vector<std::int64_t> y(static_cast<std::size_t>(A.rows()), 0);
        bool zero = true;
        for (Eigen::Index r = 0; r < A.rows(); ++r) {
            std::int64_t acc = 0;
            for (Eigen::Index c = 0; c < n; ++c) acc += A(r, c) * x[static_cast<std::size_t>(c)];
            y[static_cast<std::size_t>(r)] = acc % q;
            if (y[static_cast<std::size_t>(r)]) zero = false;
        }
        if (zero) ++ker;
        image.insert(y);
    }
    return {ker, image.size()};
}

int log_p(std::size_t n, int p) {
    int l = 0;
    while (n > 1) {
        n /= static_cast<std::size_t>(p);
        ++l;
    }
    return l;
}

}  // namespace

TEST_CASE("smith form of the identity") {
    auto I = ZModMatrix::identity(3, 2, 3);
    auto sf = smith_normal_form(I);
    CHECK(sf.D == I);
    CHECK(sf.valuations == std::vector<int>{0, 0, 0});
}

TEST_CASE("smith form reorders diag(3,1)") {
    Mat a(2, 2);
    a << 3, 0, 0, 1;
    auto sf = smith_normal_form(ZModMatrix(3, 2, a));
    Mat d(2, 2);
    d << 1, 0, 0, 3;
    CHECK(sf.D == ZModMatrix(3, 2, d));
}

TEST_CASE("smith form U*A*V = D with unimodular transforms") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        auto A = ZModMatrix::random(3, 3, 4, 3, rng);
        if (trial % 3 == 0) A = A.scaled(3);
        auto sf = smith_normal_form(A);
        CHECK(sf.U * A * sf.V == sf.D);
        CHECK(sf.U.det_mod_p() != 0);
        CHECK(sf.V.det_mod_p() != 0);
        for (std::size_t i = 1; i < sf.valuations.size(); ++i) CHECK(sf.valuations[i - 1] <= sf.valuations[i]);
        for (Eigen::Index i = 0; i < sf.D.rows(); ++i)
            for (Eigen::Index j = 0; j < sf.D.cols(); ++j)
                if (i != j) CHECK(sf.D(i, j) == 0);
    }
}

TEST_CASE("kernel and cokernel of degenerate maps") {
    auto Z = ZModMatrix(3, 1, 1, 1);
    auto [ker, coker] = kernel_cokernel(Z);
    CHECK(module_profile(ker) == std::vector<std::int64_t>{3});
    CHECK(module_profile(coker) == std::vector<std::int64_t>{3});

    Mat m(1, 1);
    m << 5;
    auto P = ZModMatrix(5, 2, m);
    auto [k2, c2] = kernel_cokernel(P);
    CHECK(module_profile(k2) == std::vector<std::int64_t>{5});
    CHECK(module_profile(c2) == std::vector<std::int64_t>{5});
}

TEST_CASE("kernel lengths agree with exhaustive enumeration") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 6; ++trial) {
        auto A = ZModMatrix::random(3, 2, 5, 5, rng);
        if (trial % 2) A = A * ZModMatrix(3, 2, Mat::Identity(5, 5) * 3) + ZModMatrix::random(3, 2, 5, 5, rng).scaled(3);
        auto [brute_ker, brute_im] = brute_kernel_image(A);
        auto [ker, coker] = kernel_cokernel(A);
        CHECK(module_length(ker) == log_p(brute_ker, 3));
        CHECK(span_length(A) == log_p(brute_im, 3));
        CHECK(module_length(ker) + span_length(A) == 2 * 5);
        CHECK(module_length(coker) == 2 * 5 - log_p(brute_im, 3));
        // kernel generators really are killed
        CHECK((A * ker.embedding).is_zero());
    }
}

TEST_CASE("module profiles") {
    CHECK(module_profile(free_module(3, 2, 2)) == std::vector<std::int64_t>{9, 9});
    Mat d(2, 2);
    d << 3, 0, 0, 9;
    auto [ker, coker] = kernel_cokernel(ZModMatrix(3, 3, d));
    CHECK(module_profile(coker) == std::vector<std::int64_t>{3, 9});
}

TEST_CASE("random presentation profile matches cokernel order") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        auto A = ZModMatrix::random(3, 2, 3, 4, rng).scaled(trial % 2 ? 3 : 1);
        auto [ker, coker] = kernel_cokernel(A);
        auto prof = module_profile(coker);
        std::size_t order = 1;
        for (auto d : prof) order *= static_cast<std::size_t>(d);
        auto [bk, bim] = brute_kernel_image(A);
        CHECK(order * bim == 729u);
    }
}

TEST_CASE("length rank-nullity on 200 random matrices") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        int p = std::array<int, 3>{3, 5, 7}[trial % 3];
        int s = 1 + trial % 4;
        auto A = ZModMatrix::random(p, s, 1 + trial % 5, 1 + (trial / 5) % 6, rng);
        if (trial % 4 == 1) A = A.scaled(p);
        auto [ker, coker] = kernel_cokernel(A);
        int im = span_length(A);
        CHECK(module_length(ker) + im == s * A.cols());
        CHECK(module_length(coker) + im == s * A.rows());
    }
}

TEST_CASE("profile invariant under unimodular change of basis") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 20; ++trial) {
        auto A = ZModMatrix::random(5, 3, 4, 4, rng).scaled(trial % 3 == 0 ? 5 : 1);
        auto B = ZModMatrix::random(5, 3, 4, 4, rng).scaled(25);
        auto AB = A * B;
        auto P = ZModMatrix::random_unimodular(5, 3, 4, rng);
        auto Q = ZModMatrix::random_unimodular(5, 3, 4, rng);
        auto prof1 = module_profile(kernel_cokernel(AB).second);
        auto prof2 = module_profile(kernel_cokernel(P * AB * Q).second);
        CHECK(prof1 == prof2);
    }
}

TEST_CASE("F_p elimination agrees with the Smith form") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        int p = std::array<int, 3>{3, 5, 7}[trial % 3];
        auto A = ZModMatrix::random(p, 1, 3 + trial % 17, 2 + trial % 13, rng);
        if (trial % 2) A = A * ZModMatrix::random(p, 1, A.cols(), 2, rng) * ZModMatrix::random(p, 1, 2, A.cols(), rng);
        auto sf = smith_normal_form(A);
        CHECK(fp::Matrix::from(A).rank() == static_cast<int>(sf.valuations.size()));
        auto K = kernel_generators(A);
        CHECK(K.cols() == A.cols() - static_cast<Eigen::Index>(sf.valuations.size()));
        CHECK((A * K).is_zero());
    }
}

TEST_CASE("json round trip") {
    std::mt19937_64 rng(3);
    auto A = ZModMatrix::random(7, 2, 3, 2, rng);
    nlohmann::json j = A;
    CHECK(zmod_from_json(j) == A);
    CHECK(j["entries"].size() == 3);
}

TEST_CASE("constructor rejects composite moduli") {
    CHECK_THROWS(ZModMatrix(9, 1, 2, 2));
}

TEST_CASE("solve_linear finds preimages and rejects non-images") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        ZModMatrix A = ZModMatrix::random(3, 2, 4, 3, rng);
        ZModMatrix X = ZModMatrix::random(3, 2, 3, 2, rng);
        auto Y = solve_linear(A, A * X);
        REQUIRE(Y.has_value());
        CHECK(A * *Y == A * X);
    }
    Mat a(1, 1), b(1, 1);
    a << 3;
    b << 1;
    CHECK_FALSE(solve_linear(ZModMatrix(3, 2, a), ZModMatrix(3, 2, b)).has_value());
}

TEST_CASE("span intersections and quotients") {
    Mat u(2, 1), w(2, 1);
    u << 1, 0;
    w << 1, 3;
    ZModMatrix U(3, 2, u), W(3, 2, w);
    // <e1> meets <e1 + 3 e2> in <3 e1>
    ZModMatrix I = intersect_spans(U, W);
    CHECK(span_length(I) == 1);
    CHECK(span_contains(U, I));
    CHECK(span_contains(W, I));
    PresentedModule Q = quotient_presentation(U, W);
    CHECK(module_profile(Q) == std::vector<std::int64_t>{3});
    PresentedModule F = quotient_presentation(ZModMatrix::identity(3, 2, 2), ZModMatrix(3, 2, 2, 0));
    CHECK(module_length(F) == 4);
}
