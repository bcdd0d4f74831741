#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "phigamma/gamma_complexes.hpp"
#include "phigamma/norm_field.hpp"
#include "phigamma/phigamma_mod.hpp"
#include "phigamma/zmod_linalg.hpp"

namespace phigamma {

enum class TraceModel {
    Coefficient,  // keep grid exponents with denominator dividing p^m
    Epsilon       // keep the eps^{a/p^n}-basis coordinates with p^{n-m} | a (char p only)
};

std::string to_string(TraceModel m);
TraceModel trace_model_from_string(const std::string& s);

// tau_m^{(i)}: direction 0 is the pi-bar grid, direction 1 the x-grid of relative elements.
struct TraceOperator {
    int level = 0;
    int direction = 0;
    TraceModel model = TraceModel::Coefficient;

    NormFieldElement operator()(const NormFieldElement& z) const;
    RelativeNormElement operator()(const RelativeNormElement& z) const;
};

NormFieldElement tau_projection(const NormFieldElement& z, int m, TraceModel model = TraceModel::Coefficient);
RelativeNormElement tau_projection(const RelativeNormElement& z, int m, int direction,
                                   TraceModel model = TraceModel::Coefficient);

// Element of Z[zeta_{p^n}] / p^s in the power basis 1, zeta, ..., zeta^{phi(p^n)-1}.
class CyclotomicElement {
  public:
    CyclotomicElement() = default;
    CyclotomicElement(int p, int n, int s);
    static CyclotomicElement constant(int p, int n, int s, std::int64_t c);
    static CyclotomicElement zeta_power(int p, int n, int s, std::int64_t k);
    static CyclotomicElement from_coords(int p, int n, int s, const std::vector<std::int64_t>& c);
    static CyclotomicElement random(int p, int n, int s, std::mt19937_64& rng);

    int p() const { return p_; }
    int n() const { return n_; }
    int s() const { return s_; }
    std::int64_t modulus() const { return q_; }
    int degree() const { return static_cast<int>(c_.size()); }
    const std::vector<std::int64_t>& coords() const { return c_; }

    CyclotomicElement operator+(const CyclotomicElement& o) const;
    CyclotomicElement operator-(const CyclotomicElement& o) const;
    CyclotomicElement operator*(const CyclotomicElement& o) const;
    CyclotomicElement scaled(std::int64_t c) const;
    CyclotomicElement pow(std::int64_t e) const;
    bool operator==(const CyclotomicElement& o) const;
    bool operator!=(const CyclotomicElement& o) const { return !(*this == o); }
    bool is_zero() const;

    // zeta_{p^n} -> zeta_{p^n}^a
    CyclotomicElement conjugate(std::int64_t a) const;
    // image at level n' >= n through zeta_{p^n} = zeta_{p^n'}^{p^{n'-n}}
    CyclotomicElement embed(int level) const;
    // inverse of embed; throws when the element does not come from that level
    CyclotomicElement descend(int level) const;
    // coordinates in the basis (zeta - 1)^i
    std::vector<std::int64_t> uniformizer_coords() const;
    // v(p) = 1; empty when zero mod p^s
    std::optional<Rational> valuation() const;
    std::string to_string() const;

  private:
    void reduce_power(std::vector<std::int64_t>& acc) const;
    int p_ = 3, n_ = 1, s_ = 1;
    std::int64_t q_ = 3;
    std::vector<std::int64_t> c_;
};

// Tr_{K_n/K_m} computed from the conjugates over Z, as an element of level n.
CyclotomicElement cyclotomic_trace_unnormalized(const CyclotomicElement& x, int m);
// (1/p^{n-m}) Tr_{K_n/K_m}, returned at level n
CyclotomicElement cyclotomic_trace(const CyclotomicElement& x, int m);

struct TS1Candidate {
    int k = 0;                    // alpha = (zeta - 1)^k / T_k
    CyclotomicElement trace;      // T_k = Tr((zeta - 1)^k), at level n
    std::optional<Rational> valuation;  // v(alpha); empty when T_k vanishes mod p^s
};

struct TS1Result {
    int p = 3, n = 1, s = 8;
    Rational target;  // c
    bool found = false;
    std::optional<TS1Candidate> best;
    std::vector<TS1Candidate> family;
    std::string family_description;
    nlohmann::json to_json() const;
};

// Exhaustive search over alpha_k = (zeta_{p^{n+1}} - 1)^k / Tr((zeta_{p^{n+1}} - 1)^k), k < max_k.
// k = 0 is alpha = 1/p. A witness is found when v(alpha) > -c.
TS1Result ts1_witness_search(int p, int n, const Rational& c, int s = 8, int max_k = 0);

struct InversionResult {
    NormFieldElement y;
    int iterations = 0;
    int max_iterations = 0;
    std::optional<Rational> loss;  // v(z) - v(y)
    bool residual_zero = false;
};

struct RelativeInversionResult {
    RelativeNormElement y{3, 0, kExact};
    int iterations = 0;
    int max_iterations = 0;
    std::optional<Rational> loss;
    bool residual_zero = false;
};

// Solves (1 - gamma^{p^m}) y = z for z in the kernel of the Epsilon trace tau_m, p-adic
// generator 1 + p. Exact inputs are worked to `window` grid steps beyond v(z).
InversionResult invert_one_minus_gamma(const NormFieldElement& z, int m, std::int64_t window = 64);
// direction 0: coefficientwise as above; direction 1: gamma~^{p^m} on the Coefficient kernel of tau_m^{(1)}
RelativeInversionResult invert_one_minus_gamma(const RelativeNormElement& z, int m, int direction,
                                               std::int64_t window = 64);

struct DecompositionWindow {
    int level = 1;               // coordinates on the pi-bar^{1/p^level} grid
    std::int64_t lo = 0, hi = 9;  // exponent numerators [lo, hi), multiples of p^{level-m}
};

struct DecompositionResult {
    int p = 3, m = 0, rank = 1;
    DecompositionWindow window;
    TraceModel model = TraceModel::Epsilon;
    std::vector<std::string> names;       // "D_m", "D_m^(0)"
    std::vector<ZModMatrix> projectors;   // on the window coordinates
    std::vector<ZModMatrix> bases;        // column bases of the images
    std::vector<int> dims;
    ZModMatrix gamma;                     // G gamma on the window
    bool idempotent = false, orthogonal = false, complete = false, independent = false, gamma_stable = false;
    std::string failure;
    bool ok() const { return idempotent && orthogonal && complete && independent && gamma_stable; }
    nlohmann::json to_json() const;
};

// D(W) = D_m(W) + D_m^(0)(W) on one window at s = 1.
DecompositionResult decompose(const PhiGammaModule& D, int m, const DecompositionWindow& w = {},
                              TraceModel model = TraceModel::Epsilon);

// The module over the level-l ring, written in t = pi-bar^{1/p^l}: entries f(pi-bar) become f(t^{p^l}).
PhiGammaModule perfection_level_model(const PhiGammaModule& D, int level);

struct DecompletionReport {
    int m = 0, level = 1;
    std::vector<int> degrees;
    CohomologyReport restricted;  // over E_m
    CohomologyReport full;        // over E_level
    std::vector<bool> equal;          // per requested degree
    std::vector<bool> map_isomorphic;  // inclusion E_m -> E_level on persistent classes
    bool ok() const;
    nlohmann::json to_json() const;
};

// Herr cohomology over E_m against E_level (level > m), with the comparison map on the largest window.
DecompletionReport decompletion_compare(const PhiGammaModule& D, int m, const std::vector<int>& degrees,
                                        int level = -1, HerrMode mode = HerrMode::QpWithDelta,
                                        const WindowSchedule& schedule = {8, 2});

struct Witnessed {
    Rational value;
    std::string witness;
};

struct TateSenOptions {
    int p = 3;
    int m = 1;
    int samples = 200;
    int inversion_samples = 50;
    int ts1_level = 1;
    int cyclotomic_precision = 8;
    std::int64_t window = 48;
    int m0_search = 3;
    std::uint64_t seed = 1;
};

struct TateSenCertificate {
    TateSenOptions options;
    Witnessed c1;                 // -v of the best TS1 witness
    Witnessed c2;                 // Coefficient model, both directions
    Witnessed c2_epsilon;         // Epsilon model, direction 0
    Witnessed c3;                 // inversion loss
    Witnessed c4;                 // v((gamma^{p^m} - 1) x) - v(x) on the level ring
    int m0 = 0;
    std::vector<Rational> contraction;  // measured gain per m
    int ts2a_exact = 0, ts2a_total = 0;
    int frobenius_ok = 0, frobenius_total = 0;
    // TS2(c) counts: "i/j" commutation of traces, "gamma/i/model" commutation with the actions
    std::vector<std::pair<std::string, std::pair<int, int>>> commutation;
    int ts3_residual_zero = 0, ts3_total = 0;
    bool cyclotomic_tau1_zeta9 = false;
    TS1Result ts1;
    nlohmann::json to_json() const;
};

TateSenCertificate tate_sen_certificate(const TateSenOptions& opt = {});

}  // namespace phigamma
