#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "phigamma/artin_schreier.hpp"
#include "phigamma/homotopy_tools.hpp"
#include "phigamma/phigamma_mod.hpp"

namespace phigamma {

enum class HerrMode {
    QpWithDelta,  // Gamma = Delta x (1+pZ_p), cohomology of the Delta-invariant part
    TorsionFree   // Gamma = 1+pZ_p, base field Q_p(zeta_p)
};

std::string to_string(HerrMode m);
HerrMode herr_mode_from_string(const std::string& s);

// Coordinates of one term: blocks of `copies` truncated series with exponents in [lo, hi).
struct TermLayout {
    struct Block {
        int copies = 1;
        std::int64_t lo = 0, hi = 1;
        std::int64_t tag = 0;  // x-exponent in semidirect windows
    };
    std::vector<Block> blocks;

    int dim() const;
    int index(int block, int copy, std::int64_t e) const;
    // row map of the inclusion of a smaller window with the same block structure
    std::vector<int> embedding_into(const TermLayout& big) const;
};

// One truncation of a Gamma-complex: the complex, its coordinates and the Delta projectors.
struct WindowComplex {
    std::int64_t window = 0;
    std::vector<TermLayout> layouts;
    ChainComplexZ complex;
    std::vector<ZModMatrix> projectors;  // e_Delta per term; empty when absent
};

struct GammaComplex {
    std::string kind;  // "herr", "gamma", "cone", "semidirect"
    PhiGammaModule module;
    HerrMode mode = HerrMode::QpWithDelta;
    std::int64_t truncation = 0;  // pi-exponent N of the window quotients
    std::function<WindowComplex(std::int64_t)> at_window;
    // phi - 1 from the window-w truncation into the enlarged one ("gamma" complexes only)
    std::function<ChainMap(std::int64_t)> phi_minus_one;
    // degree of the underlying field over Q_p
    int field_degree() const;
};

// pi-truncation exponent N so that the quotient by pi^N D^+ is acyclic for the Herr complex.
std::int64_t herr_truncation(const PhiGammaModule& D);
// c with Phi phi(D_M) inside D_{pM+c}
std::int64_t phi_pole_slack(const PhiGammaModule& D);

// e_Delta = (p-1)^{-1} sum_delta delta on the lattice pi^{-pole} D^+ / pi^N D^+.
ZModMatrix delta_projector(const PhiGammaModule& D, std::int64_t pole, std::int64_t N);
// Matrices of v -> Phi phi(v) and v -> G gamma(v) between lattices of the given pole orders.
ZModMatrix phi_matrix(const PhiGammaModule& D, std::int64_t src_pole, std::int64_t dst_pole, std::int64_t N);
ZModMatrix gamma_matrix(const PhiGammaModule& D, std::int64_t pole, std::int64_t N);

// truncation 0 means herr_truncation(D); larger values are allowed
GammaComplex herr_complex(const PhiGammaModule& D, HerrMode mode = HerrMode::QpWithDelta, std::int64_t truncation = 0);
// D -> D by gamma - 1, carrying phi - 1 for the cone. Its own windows are not acyclic modulo pi^N.
GammaComplex gamma_koszul_complex(const PhiGammaModule& D, HerrMode mode = HerrMode::QpWithDelta,
                                  std::int64_t truncation = 0);
// T^n = K^{n-1} + K^n with d(a, b) = (d a + (-1)^n (phi-1) b, d b).
GammaComplex phi_cone(const GammaComplex& K);

struct SemidirectWindow {
    int level = 0;              // coefficients in pi-bar^{1/p^level}, x-exponents j/p^level
    std::int64_t x_lo = 0, x_hi = 1;
    std::int64_t pole = 0;      // coefficient exponents in [-pole, prec)
    std::int64_t prec = 1;
};
// d0 x = ((g~ - 1) x, (g - 1) x), d1 (b, a) = (g - q) b - (g~^chi - 1) a with q = sum_{i<chi} g~^i.
GammaComplex semidirect_gamma_complex(const PhiGammaModule& D, const SemidirectWindow& w = {});
// q_chi as an operator on a semidirect window, summed until the partial sums repeat
ZModMatrix semidirect_q_chi(const PhiGammaModule& D, const SemidirectWindow& w);

struct WindowDims {
    std::int64_t window = 0;
    std::vector<int> lengths;
};

struct CohomologyReport {
    std::string kind;
    std::string mode;
    int p = 3, s = 1;
    std::vector<int> dims;                            // lengths by degree
    std::vector<std::vector<std::int64_t>> profiles;  // elementary divisors by degree
    std::vector<WindowDims> trace;
    int euler = 0;
    std::optional<int> expected_euler;
    bool stable = false;
    std::optional<LesVerdict> les;  // cone sequence at the smallest window

    std::string verdict() const { return stable ? "stable" : "unstable"; }
    nlohmann::json to_json() const;
    std::string to_csv() const;
};

struct WindowSchedule {
    std::int64_t initial = 32;
    int doublings = 2;
    std::vector<std::int64_t> windows() const;
};

// Persistent cohomology: classes of window w that survive into window 2w.
CohomologyReport cohomology(const GammaComplex& T, const WindowSchedule& schedule = {}, bool check_les = true);

// Sampled automorphism: gamma^n on the base field, theta -> theta + s_n + j on the Artin-Schreier layer.
struct SigmaSample {
    std::int64_t n = 0;
    std::int64_t j = 0;
    bool operator==(const SigmaSample& o) const { return n == o.n && j == o.j; }
};

struct CocycleData {
    Series x, y;
    ASSolution b;  // (phi - 1) b = x
    std::vector<SigmaSample> samples;
    std::vector<Series> values;  // C(sigma) per sample
    int pairs_checked = 0;
    bool cocycle_identity = true;
    std::string failure;
};

// C(sigma) = sum_{i<n} gamma^i y - (sigma - 1) b for the trivial rank one module at s = 1.
class CocycleEvaluator {
  public:
    CocycleEvaluator(const PhiGammaModule& D, const Series& x, const Series& y, std::int64_t cap = 32);

    const ASSolution& primitive() const { return b_; }
    std::int64_t chi() const { return chi_; }
    // sigma applied to a tower element over the primitive's tower
    TowerElement act(const SigmaSample& s, const TowerElement& z) const;
    Series act(const SigmaSample& s, const Series& z) const;
    SigmaSample compose(const SigmaSample& a, const SigmaSample& b) const;
    Series evaluate(const SigmaSample& s) const;

  private:
    Series shift(std::int64_t n) const;  // s_n with s_n^p - s_n = gamma^n(u) - u
    PhiGammaModule D_;
    Series x_, y_;
    std::int64_t cap_, chi_;
    ASSolution b_;
    std::optional<Series> u_;  // the layer's Artin-Schreier constant, absent when b lies in E
    mutable std::vector<std::optional<Series>> shifts_;
};

// Checks that (x, y) is a 1-cocycle: (1 - gamma) x = (1 - phi) y.
bool is_herr_cocycle(const PhiGammaModule& D, const Series& x, const Series& y, std::int64_t cap = 32);
CocycleData explicit_cocycle(const PhiGammaModule& D, const Series& x, const Series& y,
                             const std::vector<SigmaSample>& samples, std::int64_t cap = 32);

}  // namespace phigamma
