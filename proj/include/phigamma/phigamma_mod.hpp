#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "phigamma/errors.hpp"
#include "phigamma/witt_side.hpp"
#include "phigamma/zmod_linalg.hpp"

namespace phigamma {

// Dense matrix of Laurent series over Z/p^s (level 0 in the arithmetic model, any level for E).
class SeriesMatrix {
  public:
    SeriesMatrix() = default;
    SeriesMatrix(int rows, int cols, const Series& fill);
    static SeriesMatrix identity(int p, int s, int n, int level = 0);
    static SeriesMatrix scalar(int p, int s, int n, std::int64_t c, int level = 0);
    static SeriesMatrix diagonal(const std::vector<Series>& d);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int p() const { return e_.empty() ? 3 : e_[0].p(); }
    int s() const { return e_.empty() ? 1 : e_[0].K(); }
    Series& at(int r, int c) { return e_[static_cast<std::size_t>(r * cols_ + c)]; }
    const Series& at(int r, int c) const { return e_[static_cast<std::size_t>(r * cols_ + c)]; }

    SeriesMatrix operator+(const SeriesMatrix& o) const;
    SeriesMatrix operator-(const SeriesMatrix& o) const;
    SeriesMatrix mul(const SeriesMatrix& o, std::int64_t cap = kExact) const;
    SeriesMatrix operator*(const SeriesMatrix& o) const { return mul(o); }
    SeriesMatrix scaled(std::int64_t c) const;
    SeriesMatrix transpose() const;
    SeriesMatrix truncated(std::int64_t cap) const;
    SeriesMatrix reduce(int K) const;
    SeriesMatrix kron(const SeriesMatrix& o) const;
    template <class F>
    SeriesMatrix map(F&& f) const {
        SeriesMatrix r = *this;
        for (auto& x : r.e_) x = f(x);
        return r;
    }

    std::int64_t min_prec() const;
    // least pole order -min(0, val) over entries
    std::int64_t pole_order() const;
    bool is_identity() const;
    bool operator==(const SeriesMatrix& o) const;
    bool operator!=(const SeriesMatrix& o) const { return !(*this == o); }

    // determinant of the reduction mod p, over F_p((t))
    Series det_mod_p(std::int64_t cap) const;
    // inverse, requires an invertible reduction mod p
    SeriesMatrix inverse(std::int64_t cap) const;
    // v -> this^k, k >= 0
    SeriesMatrix pow(int k, std::int64_t cap) const;

  private:
    int rows_ = 0, cols_ = 0;
    std::vector<Series> e_;
};

struct GammaGenerator {
    std::string tag;     // "gamma" or "gamma_tilde"
    SeriesMatrix G;
    std::int64_t a = 1;  // the generator acts on the ring through this exponent (chi(gamma) for gamma)
};

// Etale (phi, Gamma)-module of rank r over Z/p^s((pi)); coordinates transform by
// v -> Phi * phi(v) and v -> G * gamma(v).
struct PhiGammaModule {
    int p = 3;
    int s = 1;
    int rank = 1;
    SeriesMatrix Phi;
    std::vector<GammaGenerator> generators;
    bool relative = false;
    // character of Delta on each basis vector: delta e_i = omega(delta)^{n_i} e_i
    std::vector<int> delta;
    // precision (pi-exponent) used for infinite series in checks and inverses
    std::int64_t window = 64;

    const GammaGenerator& gamma() const;
    const GammaGenerator* gamma_tilde() const;
    std::int64_t chi() const { return gamma().a; }
};

struct ModuleCheck {
    bool ok = true;
    std::string invariant;  // "shape", "etale", "commutation", "semidirect", "delta"
    int row = -1, col = -1;
    std::string detail;
};

// thrown by make_module with the failed check
struct ModuleInvalid : InvariantFailure {
    ModuleInvalid(const std::string& msg, ModuleCheck c) : InvariantFailure(msg), check(std::move(c)) {}
    ModuleCheck check;
};

// chi of the standard generator of the procyclic part of Gamma
inline std::int64_t default_chi(int p) { return 1 + p; }

// Validates everything make_module promises; never throws on mathematical failure.
ModuleCheck check_module(const PhiGammaModule& D);
// Builds and validates; throws InvariantFailure naming the failed invariant and entry.
PhiGammaModule make_module(int p, int s, const SeriesMatrix& Phi, const std::vector<GammaGenerator>& gens,
                           bool relative = false, std::vector<int> delta = {}, std::int64_t window = 64);

PhiGammaModule trivial_module(int p, int s, int rank = 1);
// D(Z/p^s(n)): Phi = 1, G = chi^n, Delta exponent n mod p-1.
PhiGammaModule cyclotomic_twist_module(int p, int s, int n);
// Phi = (pi), G = prod_{k>=0} phi^k(gamma(pi)/pi)^{-1}; needs s = 1.
PhiGammaModule pi_module(int p, std::int64_t window = 64);

PhiGammaModule tate_twist(const PhiGammaModule& D, int n);
PhiGammaModule dual_module(const PhiGammaModule& D);
PhiGammaModule tensor_product(const PhiGammaModule& A, const PhiGammaModule& B);
PhiGammaModule reduce_mod(const PhiGammaModule& D, int n);

// Random relative module at s = 1: G_tilde = I + N with N^p = 0, G a polynomial in G_tilde.
PhiGammaModule random_relative_module(int p, int rank, std::mt19937_64& rng);

struct PhiFixedReport {
    enum class Outcome { Solved, Inconclusive };
    Outcome outcome = Outcome::Inconclusive;
    Series v;                 // a generator of the F_p-line of solutions
    int nonzero_solutions = 0;  // p - 1 when solved
    int layers_used = 0;
    std::string reason;
};

// Phi * phi(v) = v for rank 1 at s = 1, searched in E.
PhiFixedReport solve_phi_fixed(const PhiGammaModule& D, int depth_budget = kDefaultMaxDepth);

// Versioned key-value description ("key = JSON value" per line, '#' comments).
PhiGammaModule parse_module(const std::string& text);
PhiGammaModule load_module(const std::string& path);
std::string write_module(const PhiGammaModule& D);

}  // namespace phigamma
