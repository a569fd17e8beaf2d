// liouvillian.hpp — Lindblad generator assembly for each dissipation mode,
// dense non-equilibrium steady-state solve, and transient propagation.
//
// Superoperators act on column-vectorized density matrices:
// vec(A rho B) = (B^T (x) A) vec(rho).

#pragma once

#include "qtm/model.hpp"
#include "qtm/qmat.hpp"

namespace qtm {

struct Superoperator {
    int dim = 0;   // dimension d of the underlying space; matrix is d^2 x d^2
    CMatrix m;

    Superoperator() = default;
    Superoperator(int d, CMatrix mat) : dim(d), m(std::move(mat)) {}

    static Superoperator zero(int d) {
        return Superoperator(d, CMatrix::Zero(static_cast<Eigen::Index>(d) * d,
                                              static_cast<Eigen::Index>(d) * d));
    }

    CMatrix apply(const CMatrix& rho) const;

    Superoperator& operator+=(const Superoperator& other);
    Superoperator operator+(const Superoperator& other) const;
    Superoperator operator-(const Superoperator& other) const;
};

// -i [H, .]
Superoperator hamiltonian_superoperator(const CMatrix& h);

// rate * (A . A^dag - 1/2 {A^dag A, .})
Superoperator lindblad_dissipator(const CMatrix& a, double rate);

// rate * (A . B^dag - 1/2 {B^dag A, .}); the standard dissipator is B = A.
// Cross terms of a shared bath appear as pairs of these.
Superoperator two_operator_dissipator(const CMatrix& a, const CMatrix& b, double rate);

// Per-site emission/absorption terms with the diagonal rates gamma_{i,nn}.
Superoperator dissipator_local(const Scenario& s, const RateTable& rates);
Superoperator dissipator_local(const Scenario& s);

// Shared-bath cross terms n' != n (Common mode only).
Superoperator dissipator_nonlocal_common(const Scenario& s, const RateTable& rates);
Superoperator dissipator_nonlocal_common(const Scenario& s);

// Ordered cross terms n' > n (Cascaded mode only):
// gamma^-_{nn'} (s-_n [rho, s+_n'] + [s-_n', rho] s+_n) + gamma^+ analogue.
Superoperator dissipator_nonlocal_cascaded(const Scenario& s, const RateTable& rates);
Superoperator dissipator_nonlocal_cascaded(const Scenario& s);

// L = -i[H_S, .] + D_loc + D_nonloc(mode); Independent omits all cross terms.
Superoperator assemble(const Scenario& s);

struct SteadyState {
    DensityMatrix rho;
    double residual = 0.0;      // ||L vec(rho)||_2
    double spectral_gap = 0.0;  // second-smallest singular value of L
    double sigma_max = 0.0;     // largest singular value of L
    bool degenerate = false;    // spectral_gap < 1e-8 * sigma_max
};

// Null-space extraction via SVD (smallest right singular vector), trace
// normalized, then Hermitized with small negative eigenvalues clipped.
SteadyState steady_state(const Superoperator& liouvillian);

// Sweep-oriented variant: gap diagnostics from a self-adjoint solve of L^dag L
// and the state from a bordered linear solve (machine-precision residual at a
// fraction of the SVD cost). Falls back to the SVD when the gap is too small
// for the cheaper route to certify uniqueness.
SteadyState steady_state_fast(const Superoperator& liouvillian);

// exp(L t) applied to rho0. Throws std::invalid_argument for t < 0.
DensityMatrix evolve(const Superoperator& liouvillian, const DensityMatrix& rho0, double t);

}  // namespace qtm
