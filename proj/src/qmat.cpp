#include "qtm/qmat.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <numeric>

namespace qtm {

HilbertLayout::HilbertLayout(std::vector<int> d) : dims(std::move(d)) {
    for (int x : dims) {
        if (x < 1) throw std::invalid_argument("HilbertLayout: dimensions must be >= 1");
    }
}

HilbertLayout HilbertLayout::qubits(int n) {
    if (n < 1) throw std::invalid_argument("HilbertLayout::qubits: n must be >= 1");
    return HilbertLayout(std::vector<int>(static_cast<size_t>(n), 2));
}

int HilbertLayout::dim() const {
    long long p = 1;
    for (int x : dims) {
        p *= x;
        if (p > (1LL << 30)) throw std::invalid_argument("HilbertLayout: dimension overflow");
    }
    return static_cast<int>(p);
}

int HilbertLayout::dim_at(int site) const {
    if (site < 0 || site >= sites()) throw std::out_of_range("HilbertLayout: site out of range");
    return dims[static_cast<size_t>(site)];
}

HilbertLayout HilbertLayout::appended(int extra_dim) const {
    HilbertLayout out = *this;
    if (extra_dim < 1) throw std::invalid_argument("HilbertLayout: dimensions must be >= 1");
    out.dims.push_back(extra_dim);
    return out;
}

CMatrix identity(int dim) { return CMatrix::Identity(dim, dim); }

CMatrix sigma_x() {
    CMatrix m(2, 2);
    m << 0.0, 1.0, 1.0, 0.0;
    return m;
}

CMatrix sigma_y() {
    CMatrix m(2, 2);
    m << 0.0, Complex(0.0, -1.0), Complex(0.0, 1.0), 0.0;
    return m;
}

CMatrix sigma_z() {
    CMatrix m(2, 2);
    m << 1.0, 0.0, 0.0, -1.0;
    return m;
}

CMatrix sigma_plus() {
    CMatrix m = CMatrix::Zero(2, 2);
    m(0, 1) = 1.0;
    return m;
}

CMatrix sigma_minus() {
    CMatrix m = CMatrix::Zero(2, 2);
    m(1, 0) = 1.0;
    return m;
}

CMatrix fock_lowering(int cutoff) {
    if (cutoff < 2) throw std::invalid_argument("fock_lowering: cutoff must be >= 2");
    CMatrix a = CMatrix::Zero(cutoff, cutoff);
    for (int n = 1; n < cutoff; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

CMatrix fock_raising(int cutoff) { return fock_lowering(cutoff).adjoint(); }

CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    out = Eigen::kroneckerProduct(a, b);
    return out;
}

CMatrix kron_all(const std::vector<CMatrix>& factors) {
    if (factors.empty()) throw std::invalid_argument("kron_all: empty factor list");
    CMatrix out = factors.front();
    for (size_t k = 1; k < factors.size(); ++k) out = kron(out, factors[k]);
    return out;
}

CMatrix embed_site_op(const CMatrix& op, int site, const HilbertLayout& layout) {
    if (site < 0 || site >= layout.sites())
        throw std::out_of_range("embed_site_op: site out of range");
    const int d_site = layout.dim_at(site);
    if (op.rows() != d_site || op.cols() != d_site)
        throw std::invalid_argument("embed_site_op: operator dimension does not match site");

    int d_left = 1, d_right = 1;
    for (int k = 0; k < site; ++k) d_left *= layout.dim_at(k);
    for (int k = site + 1; k < layout.sites(); ++k) d_right *= layout.dim_at(k);

    return kron(kron(identity(d_left), op), identity(d_right));
}

CMatrix partial_trace(const CMatrix& rho, const HilbertLayout& layout,
                      const std::vector<int>& keep) {
    const int d = layout.dim();
    if (rho.rows() != d || rho.cols() != d)
        throw std::invalid_argument("partial_trace: state dimension does not match layout");
    if (keep.empty()) throw std::invalid_argument("partial_trace: keep set must be non-empty");

    const int n = layout.sites();
    std::vector<bool> kept(static_cast<size_t>(n), false);
    for (int s : keep) {
        if (s < 0 || s >= n) throw std::out_of_range("partial_trace: site out of range");
        if (kept[static_cast<size_t>(s)])
            throw std::invalid_argument("partial_trace: duplicate site in keep set");
        kept[static_cast<size_t>(s)] = true;
    }

    // Strides of each site in the composite index (site 0 most significant).
    std::vector<int> stride(static_cast<size_t>(n), 1);
    for (int s = n - 2; s >= 0; --s)
        stride[static_cast<size_t>(s)] = stride[static_cast<size_t>(s + 1)] * layout.dim_at(s + 1);

    int d_keep = 1, d_tr = 1;
    std::vector<int> keep_sites, tr_sites;
    for (int s = 0; s < n; ++s) {
        if (kept[static_cast<size_t>(s)]) {
            d_keep *= layout.dim_at(s);
            keep_sites.push_back(s);
        } else {
            d_tr *= layout.dim_at(s);
            tr_sites.push_back(s);
        }
    }

    // Composite index of a (kept, traced) configuration pair.
    auto full_index = [&](int ik, int it) {
        int idx = 0;
        int rk = ik;
        for (int pos = static_cast<int>(keep_sites.size()) - 1; pos >= 0; --pos) {
            const int s = keep_sites[static_cast<size_t>(pos)];
            idx += (rk % layout.dim_at(s)) * stride[static_cast<size_t>(s)];
            rk /= layout.dim_at(s);
        }
        int rt = it;
        for (int pos = static_cast<int>(tr_sites.size()) - 1; pos >= 0; --pos) {
            const int s = tr_sites[static_cast<size_t>(pos)];
            idx += (rt % layout.dim_at(s)) * stride[static_cast<size_t>(s)];
            rt /= layout.dim_at(s);
        }
        return idx;
    };

    CMatrix out = CMatrix::Zero(d_keep, d_keep);
    for (int i = 0; i < d_keep; ++i) {
        for (int j = 0; j < d_keep; ++j) {
            Complex sum = 0.0;
            for (int t = 0; t < d_tr; ++t) sum += rho(full_index(i, t), full_index(j, t));
            out(i, j) = sum;
        }
    }
    return out;
}

CMatrix matrix_exp_hermitian(const CMatrix& h, double t, double herm_tol) {
    const double defect = hermiticity_defect(h);
    if (defect > herm_tol * std::max(1.0, max_abs(h)))
        throw std::invalid_argument("matrix_exp_hermitian: input is not Hermitian");

    Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("matrix_exp_hermitian: eigensolver failed");
    const RVector& lam = es.eigenvalues();
    CVector phases(lam.size());
    for (Eigen::Index k = 0; k < lam.size(); ++k)
        phases(k) = std::exp(Complex(0.0, -t * lam(k)));
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

CMatrix commutator(const CMatrix& a, const CMatrix& b) { return a * b - b * a; }

CMatrix anticommutator(const CMatrix& a, const CMatrix& b) { return a * b + b * a; }

double max_abs(const CMatrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

double hermiticity_defect(const CMatrix& a) { return max_abs(a - a.adjoint()); }

DensityMatrix DensityMatrix::validated(CMatrix mat, double trace_tol, double herm_tol,
                                       double psd_tol) {
    if (mat.rows() != mat.cols()) throw std::invalid_argument("DensityMatrix: not square");
    if (std::abs(mat.trace() - Complex(1.0)) > trace_tol)
        throw std::invalid_argument("DensityMatrix: trace differs from 1");
    if (hermiticity_defect(mat) > herm_tol)
        throw std::invalid_argument("DensityMatrix: not Hermitian");
    if (min_eigenvalue_hermitian((mat + mat.adjoint()) / 2.0) < -psd_tol)
        throw std::invalid_argument("DensityMatrix: negative eigenvalue");
    return DensityMatrix(std::move(mat));
}

DensityMatrix clamp_to_density(const CMatrix& rho, double clip_tol) {
    CMatrix herm = (rho + rho.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(herm);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("clamp_to_density: eigensolver failed");
    RVector lam = es.eigenvalues();
    for (Eigen::Index k = 0; k < lam.size(); ++k) {
        if (lam(k) < -clip_tol)
            throw std::invalid_argument("clamp_to_density: eigenvalue below clip tolerance");
        if (lam(k) < 0.0) lam(k) = 0.0;
    }
    const double total = lam.sum();
    if (total <= 0.0) throw std::invalid_argument("clamp_to_density: zero trace after clipping");
    lam /= total;
    CMatrix out = es.eigenvectors() * lam.cast<Complex>().asDiagonal() *
                  es.eigenvectors().adjoint();
    return DensityMatrix(std::move(out));
}

int thermal_cutoff(double beta_omega) {
    if (beta_omega <= 0.0) throw std::invalid_argument("thermal_cutoff: beta_omega must be > 0");
    const double n_min = std::log(1e8) / beta_omega;
    int n_max = static_cast<int>(std::floor(n_min)) + 1;
    return std::max(n_max, 8);
}

DensityMatrix thermal_oscillator_state(double beta_omega, int cutoff) {
    if (beta_omega <= 0.0)
        throw std::invalid_argument("thermal_oscillator_state: beta_omega must be > 0");
    if (cutoff < 2) throw std::invalid_argument("thermal_oscillator_state: cutoff must be >= 2");
    RVector p(cutoff);
    for (int n = 0; n < cutoff; ++n) p(n) = std::exp(-beta_omega * n);
    p /= p.sum();
    CMatrix m = CMatrix::Zero(cutoff, cutoff);
    for (int n = 0; n < cutoff; ++n) m(n, n) = p(n);
    return DensityMatrix(std::move(m));
}

DensityMatrix thermal_tls_state(double beta_omega) {
    const double z = 1.0 + std::exp(-beta_omega);
    CMatrix m = CMatrix::Zero(2, 2);
    m(0, 0) = std::exp(-beta_omega) / z;  // excited
    m(1, 1) = 1.0 / z;                    // ground
    return DensityMatrix(std::move(m));
}

double truncated_thermal_mean(double beta_omega, int cutoff) {
    double z = 0.0, s = 0.0;
    for (int n = 0; n < cutoff; ++n) {
        const double w = std::exp(-beta_omega * n);
        z += w;
        s += n * w;
    }
    return s / z;
}

Complex expectation(const CMatrix& op, const CMatrix& rho) {
    if (op.rows() != rho.rows() || op.cols() != rho.cols())
        throw std::invalid_argument("expectation: dimension mismatch");
    return (op * rho).trace();
}

Complex expectation(const CMatrix& op, const DensityMatrix& state) {
    return expectation(op, state.m);
}

double real_expectation(const CMatrix& op, const CMatrix& rho, double imag_tol) {
    const Complex v = expectation(op, rho);
    if (std::abs(v.imag()) > imag_tol)
        throw std::runtime_error("real_expectation: unexpected imaginary part");
    return v.real();
}

double trace_norm(const CMatrix& a) {
    Eigen::JacobiSVD<CMatrix> svd(a);
    return svd.singularValues().sum();
}

double trace_distance(const CMatrix& a, const CMatrix& b) {
    CMatrix diff = (a - b + (a - b).adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(diff);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

double min_eigenvalue_hermitian(const CMatrix& a) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es((a + a.adjoint()) / 2.0);
    return es.eigenvalues().minCoeff();
}

}  // namespace qtm
