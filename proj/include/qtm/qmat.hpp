// qmat.hpp — dense complex linear algebra and quantum-state primitives:
// tensor products, operator embedding, partial trace, Hermitian matrix
// exponential, spin and truncated-oscillator operators, thermal states.

#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <complex>
#include <stdexcept>
#include <vector>

namespace qtm {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using SparseCMatrix = Eigen::SparseMatrix<Complex>;

constexpr Complex kImag{0.0, 1.0};

// Ordered list of subsystem dimensions. Site 0 is the leftmost (most
// significant) tensor factor.
struct HilbertLayout {
    std::vector<int> dims;

    HilbertLayout() = default;
    explicit HilbertLayout(std::vector<int> d);

    static HilbertLayout qubits(int n);

    int sites() const { return static_cast<int>(dims.size()); }
    int dim() const;
    int dim_at(int site) const;

    // New layout with one more factor appended on the right.
    HilbertLayout appended(int extra_dim) const;
};

// --------------------------- elementary operators ---------------------------

CMatrix identity(int dim);

// TLS basis ordered {|1> (excited), |0> (ground)}: sigma_z = diag(1,-1),
// sigma_plus = |1><0| is the raising operator and sigma_plus*sigma_minus the
// excited-state projector.
CMatrix sigma_x();
CMatrix sigma_y();
CMatrix sigma_z();
CMatrix sigma_plus();
CMatrix sigma_minus();

// Truncated oscillator ladder operators on {|0>,...,|cutoff-1>},
// <n-1|a|n> = sqrt(n). Throws std::invalid_argument for cutoff < 2.
CMatrix fock_lowering(int cutoff);
CMatrix fock_raising(int cutoff);

// --------------------------- tensor algebra ---------------------------------

CMatrix kron(const CMatrix& a, const CMatrix& b);
CMatrix kron_all(const std::vector<CMatrix>& factors);

// I x ... x op x ... x I with op at `site` of `layout`.
CMatrix embed_site_op(const CMatrix& op, int site, const HilbertLayout& layout);

// Reduce onto the sites listed in `keep` (ascending site order preserved).
CMatrix partial_trace(const CMatrix& rho, const HilbertLayout& layout,
                      const std::vector<int>& keep);

// --------------------------- matrix functions -------------------------------

// U = exp(-i t h) for Hermitian h, via eigendecomposition. Throws if
// max|h - h^dag| exceeds herm_tol * max(1, max|h|).
CMatrix matrix_exp_hermitian(const CMatrix& h, double t, double herm_tol = 1e-10);

CMatrix commutator(const CMatrix& a, const CMatrix& b);
CMatrix anticommutator(const CMatrix& a, const CMatrix& b);

double max_abs(const CMatrix& a);
double hermiticity_defect(const CMatrix& a);  // max|A - A^dag|

// --------------------------- states -----------------------------------------

// Hermitian, unit-trace, positive-semidefinite matrix.
struct DensityMatrix {
    CMatrix m;

    DensityMatrix() = default;
    explicit DensityMatrix(CMatrix mat) : m(std::move(mat)) {}

    int dim() const { return static_cast<int>(m.rows()); }

    // Validating factory: trace within trace_tol of 1, Hermitian within
    // herm_tol, min eigenvalue >= -psd_tol. Throws std::invalid_argument.
    static DensityMatrix validated(CMatrix mat, double trace_tol = 1e-12,
                                   double herm_tol = 1e-12, double psd_tol = 1e-10);
};

// (rho + rho^dag)/2, eigenvalues in [-clip_tol, 0) clipped to 0, renormalized.
// Eigenvalues below -clip_tol throw (state is not a small perturbation of a
// density matrix).
DensityMatrix clamp_to_density(const CMatrix& rho, double clip_tol = 1e-10);

// Smallest n_max with exp(-n_max * beta_omega) < 1e-8, never below 8; the
// retained levels are {0,...,n_max} so the truncated dimension is n_max + 1
// and the omitted probability mass is below 1e-8.
int thermal_cutoff(double beta_omega);

// Diagonal Gibbs state p(n) ~ exp(-n * beta_omega) on the truncated space.
DensityMatrix thermal_oscillator_state(double beta_omega, int cutoff);

// Two-level Gibbs state diag(p_exc, p_ground) at inverse temperature
// beta_omega (dimensionless product beta * omega).
DensityMatrix thermal_tls_state(double beta_omega);

// Mean of a truncated geometric distribution, <n> of thermal_oscillator_state.
double truncated_thermal_mean(double beta_omega, int cutoff);

// --------------------------- expectations and distances ---------------------

Complex expectation(const CMatrix& op, const CMatrix& rho);
Complex expectation(const CMatrix& op, const DensityMatrix& state);

// Tr(op rho) asserting a negligible imaginary part (op Hermitian).
double real_expectation(const CMatrix& op, const CMatrix& rho, double imag_tol = 1e-9);

// (1/2)||a - b||_1 over Hermitian inputs.
double trace_distance(const CMatrix& a, const CMatrix& b);

double trace_norm(const CMatrix& a);

double min_eigenvalue_hermitian(const CMatrix& a);

}  // namespace qtm
