#include "qtm/liouvillian.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

namespace qtm {

namespace {

// Sparse-aware accumulator for d^2 x d^2 superoperator matrices acting on
// column-vectorized states. The site operators are mostly zeros, so every
// term is written by iterating nonzero entries only.
class SuperopAccum {
  public:
    explicit SuperopAccum(int d)
        : d_(d), m_(CMatrix::Zero(static_cast<Eigen::Index>(d) * d,
                                  static_cast<Eigen::Index>(d) * d)) {}

    // c * (A rho B): M[i + d j, k + d l] += c A(i,k) B(l,j)
    void add_sandwich(const CMatrix& a, const CMatrix& b, Complex c) {
        for (int k = 0; k < d_; ++k)
            for (int i = 0; i < d_; ++i) {
                const Complex av = a(i, k);
                if (av == Complex(0.0)) continue;
                for (int j = 0; j < d_; ++j)
                    for (int l = 0; l < d_; ++l) {
                        const Complex bv = b(l, j);
                        if (bv == Complex(0.0)) continue;
                        m_(i + d_ * j, k + d_ * l) += c * av * bv;
                    }
            }
    }

    // c * (A rho)
    void add_left(const CMatrix& a, Complex c) {
        for (int k = 0; k < d_; ++k)
            for (int i = 0; i < d_; ++i) {
                const Complex av = a(i, k);
                if (av == Complex(0.0)) continue;
                for (int j = 0; j < d_; ++j) m_(i + d_ * j, k + d_ * j) += c * av;
            }
    }

    // c * (rho B)
    void add_right(const CMatrix& b, Complex c) {
        for (int j = 0; j < d_; ++j)
            for (int l = 0; l < d_; ++l) {
                const Complex bv = b(l, j);
                if (bv == Complex(0.0)) continue;
                for (int i = 0; i < d_; ++i) m_(i + d_ * j, i + d_ * l) += c * bv;
            }
    }

    // c * (A rho B - 1/2 {B A, rho}) with B A computed once.
    void add_dissipative_group(const CMatrix& a, const CMatrix& b, double c) {
        add_sandwich(a, b, c);
        const CMatrix ba = b * a;
        add_left(ba, -0.5 * c);
        add_right(ba, -0.5 * c);
    }

    Superoperator take() { return Superoperator(d_, std::move(m_)); }

  private:
    int d_;
    CMatrix m_;
};

}  // namespace

CMatrix Superoperator::apply(const CMatrix& rho) const {
    if (rho.rows() != dim || rho.cols() != dim)
        throw std::invalid_argument("Superoperator::apply: dimension mismatch");
    CVector v = Eigen::Map<const CVector>(rho.data(), rho.size());
    CVector w = m * v;
    return Eigen::Map<const CMatrix>(w.data(), dim, dim);
}

Superoperator& Superoperator::operator+=(const Superoperator& other) {
    if (dim == 0) {
        *this = other;
        return *this;
    }
    if (other.dim != dim) throw std::invalid_argument("Superoperator: dimension mismatch");
    m += other.m;
    return *this;
}

Superoperator Superoperator::operator+(const Superoperator& other) const {
    Superoperator out = *this;
    out += other;
    return out;
}

Superoperator Superoperator::operator-(const Superoperator& other) const {
    if (other.dim != dim) throw std::invalid_argument("Superoperator: dimension mismatch");
    return Superoperator(dim, m - other.m);
}

Superoperator hamiltonian_superoperator(const CMatrix& h) {
    const int d = static_cast<int>(h.rows());
    SuperopAccum acc(d);
    acc.add_left(h, -kImag);
    acc.add_right(h, kImag);
    return acc.take();
}

Superoperator two_operator_dissipator(const CMatrix& a, const CMatrix& b, double rate) {
    const int d = static_cast<int>(a.rows());
    SuperopAccum acc(d);
    acc.add_dissipative_group(a, b.adjoint(), rate);
    return acc.take();
}

Superoperator lindblad_dissipator(const CMatrix& a, double rate) {
    return two_operator_dissipator(a, a, rate);
}

Superoperator dissipator_local(const Scenario& s, const RateTable& rates) {
    SuperopAccum acc(s.system_layout().dim());
    for (Bath b : {Bath::Hot, Bath::Cold}) {
        for (int n = 0; n < s.n_sites(); ++n) {
            const CMatrix sm = site_sigma_minus(s, b, n);
            const CMatrix sp = sm.adjoint();
            acc.add_dissipative_group(sm, sp, rates.gamma_minus(b)(n, n));
            acc.add_dissipative_group(sp, sm, rates.gamma_plus(b)(n, n));
        }
    }
    return acc.take();
}

Superoperator dissipator_local(const Scenario& s) {
    return dissipator_local(s, rate_table(s));
}

Superoperator dissipator_nonlocal_common(const Scenario& s, const RateTable& rates) {
    SuperopAccum acc(s.system_layout().dim());
    for (Bath b : {Bath::Hot, Bath::Cold}) {
        for (int n = 0; n < s.n_sites(); ++n) {
            for (int np = 0; np < s.n_sites(); ++np) {
                if (np == n) continue;
                const CMatrix sm_n = site_sigma_minus(s, b, n);
                const CMatrix sp_n = sm_n.adjoint();
                const CMatrix sm_np = site_sigma_minus(s, b, np);
                const CMatrix sp_np = sm_np.adjoint();
                const double gm = rates.gamma_minus(b)(n, np);
                const double gp = rates.gamma_plus(b)(n, np);
                // gm [s-_n rho s+_n' - 1/2 {s+_n s-_n', rho}]
                acc.add_sandwich(sm_n, sp_np, gm);
                acc.add_left(sp_n * sm_np, -0.5 * gm);
                acc.add_right(sp_n * sm_np, -0.5 * gm);
                // gp [s+_n rho s-_n' - 1/2 {s-_n s+_n', rho}]
                acc.add_sandwich(sp_n, sm_np, gp);
                acc.add_left(sm_n * sp_np, -0.5 * gp);
                acc.add_right(sm_n * sp_np, -0.5 * gp);
            }
        }
    }
    return acc.take();
}

Superoperator dissipator_nonlocal_common(const Scenario& s) {
    if (s.mode != DissipationMode::Common)
        throw std::invalid_argument("dissipator_nonlocal_common: scenario mode is not Common");
    return dissipator_nonlocal_common(s, rate_table(s));
}

Superoperator dissipator_nonlocal_cascaded(const Scenario& s, const RateTable& rates) {
    SuperopAccum acc(s.system_layout().dim());
    for (Bath b : {Bath::Hot, Bath::Cold}) {
        for (int n = 0; n < s.n_sites(); ++n) {
            for (int np = n + 1; np < s.n_sites(); ++np) {
                const CMatrix sm_n = site_sigma_minus(s, b, n);
                const CMatrix sp_n = sm_n.adjoint();
                const CMatrix sm_np = site_sigma_minus(s, b, np);
                const CMatrix sp_np = sm_np.adjoint();
                const double gm = rates.gamma_minus(b)(n, np);
                const double gp = rates.gamma_plus(b)(n, np);
                // gm (s-_n [rho, s+_n'] + [s-_n', rho] s+_n)
                acc.add_sandwich(sm_n, sp_np, gm);
                acc.add_left(sm_n * sp_np, -gm);
                acc.add_sandwich(sm_np, sp_n, gm);
                acc.add_right(sm_np * sp_n, -gm);
                // gp (s+_n [rho, s-_n'] + [s+_n', rho] s-_n)
                acc.add_sandwich(sp_n, sm_np, gp);
                acc.add_left(sp_n * sm_np, -gp);
                acc.add_sandwich(sp_np, sm_n, gp);
                acc.add_right(sp_np * sm_n, -gp);
            }
        }
    }
    return acc.take();
}

Superoperator dissipator_nonlocal_cascaded(const Scenario& s) {
    if (s.mode != DissipationMode::Cascaded)
        throw std::invalid_argument(
            "dissipator_nonlocal_cascaded: scenario mode is not Cascaded");
    return dissipator_nonlocal_cascaded(s, rate_table(s));
}

Superoperator assemble(const Scenario& s) {
    const RateTable rates = rate_table(s);
    Superoperator l = hamiltonian_superoperator(build_system_hamiltonian(s));
    l += dissipator_local(s, rates);
    switch (s.mode) {
        case DissipationMode::Common:
            l += dissipator_nonlocal_common(s, rates);
            break;
        case DissipationMode::Cascaded:
            l += dissipator_nonlocal_cascaded(s, rates);
            break;
        case DissipationMode::Independent:
            break;
    }
    return l;
}

SteadyState steady_state(const Superoperator& liouvillian) {
    const int d = liouvillian.dim;
    Eigen::BDCSVD<CMatrix> svd(liouvillian.m, Eigen::ComputeFullV);
    const RVector& sv = svd.singularValues();
    const Eigen::Index last = sv.size() - 1;

    SteadyState out;
    out.sigma_max = sv(0);
    out.spectral_gap = sv(last - 1);
    out.degenerate = out.spectral_gap < 1e-8 * out.sigma_max;

    CVector v = svd.matrixV().col(last);
    CMatrix rho = Eigen::Map<const CMatrix>(v.data(), d, d);
    const Complex tr = rho.trace();
    if (std::abs(tr) < 1e-12)
        throw std::runtime_error("steady_state: null vector has vanishing trace");
    rho /= tr;
    out.rho = clamp_to_density(rho, 1e-10);

    CVector res = liouvillian.m * Eigen::Map<const CVector>(out.rho.m.data(), out.rho.m.size());
    out.residual = res.norm();
    return out;
}

SteadyState steady_state_fast(const Superoperator& liouvillian) {
    const int d = liouvillian.dim;
    const Eigen::Index dd = liouvillian.m.rows();

    // Smallest singular pair of L from shift-inverted block iteration on
    // L^dag L; the largest from plain power iteration.
    const CMatrix gram = liouvillian.m.adjoint() * liouvillian.m;

    double lam_max = 0.0;
    {
        CVector x = CVector::Ones(dd);
        x.normalize();
        for (int it = 0; it < 12; ++it) {
            CVector y = gram * x;
            lam_max = y.norm();
            if (lam_max == 0.0) break;
            x = y / lam_max;
        }
    }
    SteadyState out;
    out.sigma_max = std::sqrt(std::max(lam_max, 0.0));
    if (out.sigma_max == 0.0) return steady_state(liouvillian);

    const double shift = 1e-13 * lam_max;
    Eigen::LLT<CMatrix> llt(gram + shift * CMatrix::Identity(dd, dd));
    if (llt.info() != Eigen::Success) return steady_state(liouvillian);

    // Two-column inverse iteration: column 0 tracks the kernel, column 1 the
    // gap. Deterministic start vectors; a handful of iterations suffices
    // because the shifted ratio (lam1 + shift)/shift is astronomical.
    CMatrix block(dd, 2);
    block.col(0) = CVector::Ones(dd) / std::sqrt(static_cast<double>(dd));
    for (Eigen::Index k = 0; k < dd; ++k)
        block(k, 1) = Complex(std::cos(0.7 * static_cast<double>(k)),
                              std::sin(0.3 * static_cast<double>(k)));
    block.col(1).normalize();

    double lam1 = 0.0;
    for (int it = 0; it < 8; ++it) {
        block = llt.solve(block);
        // Gram-Schmidt
        block.col(0).normalize();
        block.col(1) -= block.col(0) * block.col(0).dot(block.col(1));
        const double n1 = block.col(1).norm();
        if (n1 < 1e-300) return steady_state(liouvillian);
        block.col(1) /= n1;
    }
    lam1 = std::real(block.col(1).dot(gram * block.col(1)));

    out.spectral_gap = std::sqrt(std::max(lam1, 0.0));
    out.degenerate = out.spectral_gap < 1e-8 * out.sigma_max;
    // The Gram route cannot certify tiny gaps; hand those to the full SVD.
    if (out.spectral_gap < 1e-6 * out.sigma_max) return steady_state(liouvillian);

    CMatrix rho = Eigen::Map<const CMatrix>(block.col(0).data(), d, d);
    const Complex tr = rho.trace();
    if (std::abs(tr) < 1e-12) return steady_state(liouvillian);
    rho /= tr;
    out.rho = clamp_to_density(rho, 1e-10);

    CVector res = liouvillian.m * Eigen::Map<const CVector>(out.rho.m.data(), out.rho.m.size());
    out.residual = res.norm();
    if (out.residual > 1e-10 * out.sigma_max) return steady_state(liouvillian);
    return out;
}

DensityMatrix evolve(const Superoperator& liouvillian, const DensityMatrix& rho0, double t) {
    if (t < 0.0) throw std::invalid_argument("evolve: t must be >= 0");
    if (rho0.dim() != liouvillian.dim)
        throw std::invalid_argument("evolve: dimension mismatch");
    if (t == 0.0) return rho0;
    CMatrix propagator = (liouvillian.m * t).exp();
    CVector v = propagator * Eigen::Map<const CVector>(rho0.m.data(), rho0.m.size());
    CMatrix rho = Eigen::Map<const CMatrix>(v.data(), liouvillian.dim, liouvillian.dim);
    return clamp_to_density(rho, 1e-9);
}

}  // namespace qtm
