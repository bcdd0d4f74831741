#pragma once

#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "phigamma/zmod_linalg.hpp"

namespace phigamma {

// Cochain complex of free Z/p^s-modules, differential raising degree.
struct ChainComplexZ {
    int p = 3;
    int s = 1;
    int lowest = 0;
    std::vector<int> ranks;
    // d[k] : C^{lowest+k} -> C^{lowest+k+1}
    std::vector<ZModMatrix> d;

    int highest() const { return lowest + static_cast<int>(ranks.size()) - 1; }
    int rank(int n) const;
    ZModMatrix differential(int n) const;
    bool d_squared_zero() const;
    ZModMatrix cycles(int n) const;      // generators of Z^n
    ZModMatrix boundaries(int n) const;  // generators of B^n
    int cohomology_length(int n) const;
    std::vector<std::int64_t> cohomology_profile(int n) const;
};

ChainComplexZ make_complex(int p, int s, int lowest, const std::vector<int>& ranks, const std::vector<ZModMatrix>& d);

// f^n : A^n -> B^n
struct ChainMap {
    ChainComplexZ source, target;
    std::map<int, ZModMatrix> f;
    ZModMatrix at(int n) const;
    bool is_chain_map() const;
};

// Cone^n = B^{n-1} + A^n with d(a, b) = (dB a + (-1)^n f b, dA b).
ChainComplexZ mapping_cone(const ChainMap& f);
ChainComplexZ shift(const ChainComplexZ& C, int k);  // C[k]^n = C^{n+k}, differential unchanged

struct LesVerdict {
    bool exact = true;
    int failing_degree = 0;
    std::string failing_node;  // "complex", "chain", "termwise", "H(A)", "H(B)", "H(C)"
    std::string detail;
};

// Short exact sequence 0 -> A -i-> B -q-> C -> 0 of complexes; checks the long exact cohomology sequence.
LesVerdict les_check(const ChainMap& i, const ChainMap& q);
// The sequence 0 -> B[-1] -> Cone(f) -> A -> 0.
LesVerdict cone_les_check(const ChainMap& f);

// First-quadrant double complex with anticommuting differentials.
struct DoubleComplex {
    int p = 3;
    int s = 1;
    int cols = 0, rows = 0;  // K^{a,b} for 0 <= a < cols, 0 <= b < rows
    std::vector<std::vector<int>> ranks;  // ranks[a][b]
    std::map<std::pair<int, int>, ZModMatrix> dh, dv;  // at (a, b): to (a+1, b) and (a, b+1)

    int rank(int a, int b) const;
    ZModMatrix horizontal(int a, int b) const;
    ZModMatrix vertical(int a, int b) const;
    bool anticommutes() const;
    bool is_complex() const;
    // Tot^n = sum_{a+b=n} K^{a,b}, blocks ordered by increasing a
    ChainComplexZ total() const;
};

struct SpectralPage {
    int r = 1;
    std::vector<std::vector<int>> lengths;  // lengths[a][b] of E_r^{a,b}
};

struct SpectralResult {
    std::vector<SpectralPage> pages;  // E_1 .. E_{r_max}
    int stable_from = 1;              // first page equal to all later ones
    std::vector<int> total_lengths;   // H^n(Tot)
    std::vector<int> abutment_lengths;  // sum over a+b = n of E_infinity
    bool abutment_ok = false;
};

// Spectral sequence of the column filtration F^a Tot = sum_{a' >= a} K^{a', *}.
SpectralResult spectral_E_pages(const DoubleComplex& K, int up_to_r);

enum class TailConvention { EventuallyZero, EventuallyConstant };

// N_0 <- N_1 <- ... <- N_{L-1}; d[n] : N_{n+1} -> N_n on generators.
struct Tower {
    int p = 3;
    int s = 1;
    std::vector<PresentedModule> N;
    std::vector<ZModMatrix> d;
    TailConvention tail = TailConvention::EventuallyZero;
};

struct LimResult {
    PresentedModule lim;
    PresentedModule lim1;
    bool mittag_leffler = true;
    int truncation = 0;  // product length used for the lim^1 cokernel
};

LimResult tower_lim_lim1(const Tower& T);

// Random instances with known answers, used by the command line tool and the acceptance run.

struct PlantedComplex {
    ChainComplexZ complex;
    std::vector<int> lengths;  // H^n for 0 <= n <= top
};

// Sum of pieces Z/p^s (one degree) and Z/p^s -(p^e)-> Z/p^s, conjugated by random bases.
PlantedComplex random_planted_complex(int p, int s, int top, std::mt19937_64& rng);

// both complexes start in degree 0 and share their top degree
ChainComplexZ direct_sum(const ChainComplexZ& A, const ChainComplexZ& B);
ChainMap canonical_inclusion(const ChainComplexZ& A, const ChainComplexZ& S);
ZModMatrix kronecker(const ZModMatrix& A, const ZModMatrix& B);
// K^{a,b} = A^a (x) B^b, dv carrying the sign (-1)^a
DoubleComplex tensor_double_complex(const ChainComplexZ& A, const ChainComplexZ& B);

struct PlantedMap {
    ChainMap map;
    std::vector<int> cone_lengths;  // H^n(Cone), 0 <= n <= top + 1
};

// A -> A + A' plus d h + h d for a random h, so Cone has H^n = H^{n-1}(A').
PlantedMap random_planted_map(int p, int s, int top, std::mt19937_64& rng);

// Sums of cyclic modules Z/p^e, 1 <= e <= s, with random maps respecting relations.
Tower random_tower(int p, int s, int length, TailConvention tail, std::mt19937_64& rng, int max_rank = 3);

}  // namespace phigamma
