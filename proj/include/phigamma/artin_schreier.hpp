#pragma once

#include <optional>
#include <string>

#include "phigamma/norm_field.hpp"
#include "phigamma/witt_side.hpp"

namespace phigamma {

// Valuation window used for Hensel sums on exact inputs.
inline const Rational kDefaultSolveWindow(32);

struct ASSolution {
    TowerElement value;
    int depth = 0;  // layers in the tower of `value`
    std::optional<Rational> valuation;
    // the residual a^p - a - b vanishes below this valuation (empty: exactly)
    std::optional<Rational> certified;
    bool residual_zero = false;
};

// a^p - a = b for v_E(b) > 0 (or b = 0), a = -sum b^{p^n}.
ASSolution solve_as_positive(const TowerElement& b, std::optional<Rational> window = std::nullopt);
ASSolution solve_as_positive(const NormFieldElement& b, std::optional<Rational> window = std::nullopt);

// a^p - a = b in general, adjoining at most one Artin-Schreier layer on top of b's tower.
ASSolution solve_as_general(const TowerElement& b, std::optional<Rational> window = std::nullopt);
ASSolution solve_as_general(const NormFieldElement& b, int max_depth = kDefaultMaxDepth,
                            std::optional<Rational> window = std::nullopt);

struct WittSolution {
    WittVector value;
    int depth = 0;
    bool residual_zero = false;
};

// (phi - 1) y = z in W_s, normalized so that every component has zero constant coefficient.
WittSolution solve_phi_minus_one(const WittVector& z, std::optional<Rational> window = std::nullopt);

// The normalized right inverse of phi - 1.
WittVector sigma_split(const WittVector& z, std::optional<Rational> window = std::nullopt);

// Constant coefficient of each component (the quantity killed by the normalization).
std::vector<std::int64_t> constant_coefficients(const WittVector& y);

// True when every component of y is an F_p constant.
bool is_constant_vector(const WittVector& y);

}  // namespace phigamma
