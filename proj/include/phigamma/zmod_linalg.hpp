#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <json.hpp>

namespace phigamma {

using Mat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

std::int64_t ipow(std::int64_t base, int exp);
bool is_prime(std::int64_t n);
// p-adic valuation of a residue mod p^s; returns s for zero.
int valuation_mod(std::int64_t x, int p, int s);
std::int64_t mod_reduce(std::int64_t x, std::int64_t q);
std::int64_t inverse_mod(std::int64_t a, std::int64_t q);

class ZModMatrix {
  public:
    ZModMatrix() = default;
    ZModMatrix(int p, int s, Eigen::Index rows, Eigen::Index cols);
    ZModMatrix(int p, int s, const Mat& entries);

    static ZModMatrix identity(int p, int s, Eigen::Index n);
    static ZModMatrix random(int p, int s, Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);
    // Random matrix of determinant a unit.
    static ZModMatrix random_unimodular(int p, int s, Eigen::Index n, std::mt19937_64& rng);

    int p() const { return p_; }
    int s() const { return s_; }
    std::int64_t modulus() const { return q_; }
    Eigen::Index rows() const { return m_.rows(); }
    Eigen::Index cols() const { return m_.cols(); }

    std::int64_t operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }
    void set(Eigen::Index r, Eigen::Index c, std::int64_t v) { m_(r, c) = mod_reduce(v, q_); }
    void add_to(Eigen::Index r, Eigen::Index c, std::int64_t v) { m_(r, c) = mod_reduce(m_(r, c) + v, q_); }
    const Mat& data() const { return m_; }

    ZModMatrix operator*(const ZModMatrix& o) const;
    ZModMatrix operator+(const ZModMatrix& o) const;
    ZModMatrix operator-(const ZModMatrix& o) const;
    ZModMatrix scaled(std::int64_t c) const;
    ZModMatrix transpose() const;
    ZModMatrix reduced(int n) const;  // entries mod p^n, as a matrix over Z/p^n
    ZModMatrix hstack(const ZModMatrix& o) const;
    ZModMatrix vstack(const ZModMatrix& o) const;
    ZModMatrix block(Eigen::Index r, Eigen::Index c, Eigen::Index nr, Eigen::Index nc) const;
    bool is_zero() const;
    bool operator==(const ZModMatrix& o) const;
    bool operator!=(const ZModMatrix& o) const { return !(*this == o); }

    // Determinant modulo p (used for unimodularity checks).
    std::int64_t det_mod_p() const;

  private:
    int p_ = 3;
    int s_ = 1;
    std::int64_t q_ = 3;
    Mat m_;
};

void to_json(nlohmann::json& j, const ZModMatrix& m);
ZModMatrix zmod_from_json(const nlohmann::json& j);

struct SmithForm {
    ZModMatrix D, U, V;
    // valuations of the nonzero diagonal entries, nondecreasing
    std::vector<int> valuations;
};

SmithForm smith_normal_form(const ZModMatrix& A);

// Finite Z/p^s-module given as the cokernel of `relations` (generators x relations).
// `embedding`, when present, maps generators into an ambient free module.
struct PresentedModule {
    int p = 3;
    int s = 1;
    Eigen::Index generators = 0;
    ZModMatrix relations;
    ZModMatrix embedding;
};

std::pair<PresentedModule, PresentedModule> kernel_cokernel(const ZModMatrix& A);
std::vector<std::int64_t> module_profile(const PresentedModule& M);
int module_length(const PresentedModule& M);
PresentedModule free_module(int p, int s, Eigen::Index rank);

// Length of the submodule spanned by the columns.
int span_length(const ZModMatrix& A);
// Generators of ker(A) as columns.
ZModMatrix kernel_generators(const ZModMatrix& A);
// True when every column of B lies in the column span of A.
bool span_contains(const ZModMatrix& A, const ZModMatrix& B);
// Some X with A X = B, if one exists.
std::optional<ZModMatrix> solve_linear(const ZModMatrix& A, const ZModMatrix& B);
// Generators of span(U) intersected with span(W).
ZModMatrix intersect_spans(const ZModMatrix& U, const ZModMatrix& W);
// (span G + span R) / span R, presented on the columns of G.
PresentedModule quotient_presentation(const ZModMatrix& G, const ZModMatrix& R);

namespace fp {
// Dense row-major matrix over F_p for the large eliminations of the cohomology engine.
class Matrix {
  public:
    Matrix(int p, int rows, int cols);
    static Matrix from(const ZModMatrix& A);
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int p() const { return p_; }
    std::uint16_t* row(int r) { return data_.data() + static_cast<std::size_t>(r) * stride_; }
    const std::uint16_t* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * stride_; }
    std::uint16_t get(int r, int c) const { return row(r)[c]; }
    void set(int r, int c, std::int64_t v);

    // Reduced row echelon form in place; returns pivot columns.
    std::vector<int> rref();
    int rank() const;
    // Basis of the right kernel, one vector per column of the result.
    ZModMatrix kernel() const;

  private:
    void axpy(int dst, int src, std::uint16_t f, int from);
    int p_, rows_, cols_;
    std::size_t stride_;
    std::uint16_t magic_;
    std::vector<std::uint16_t> data_;
};
}  // namespace fp

}  // namespace phigamma
