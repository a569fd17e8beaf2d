#include "qtm/collision.hpp"

#include <Eigen/Eigenvalues>

#include <bit>
#include <cmath>

namespace qtm {

namespace {

// Every Hamiltonian piece here (free TLS terms, oscillator numbers, the
// exchange couplings and the excitation-swap system-bath couplings) commutes
// with the total excitation number, so the joint space splits into exact
// sectors. All unitaries are computed densely per sector.

struct JointBasis {
    int n_sites = 0;
    int d_sys = 0;
    int cut_h = 0, cut_c = 0;
    int d_anc = 0, d_full = 0;

    int sys_exc(int sys) const {
        // qubit local index 0 is the excited level, so each 1-bit is a ground site
        return 2 * n_sites - std::popcount(static_cast<unsigned>(sys));
    }
    int anc_level(int e, Bath b) const { return b == Bath::Hot ? e / cut_c : e % cut_c; }
    int anc_exc(int e) const { return e / cut_c + e % cut_c; }
    int full_index(int sys, int e) const { return sys * d_anc + e; }
};

struct SectorTable {
    std::vector<int> sector_of, pos_of;
    std::vector<std::vector<int>> members;

    static SectorTable build(const JointBasis& b) {
        SectorTable t;
        const int max_exc = 2 * b.n_sites + (b.cut_h - 1) + (b.cut_c - 1);
        t.members.resize(static_cast<size_t>(max_exc) + 1);
        t.sector_of.resize(static_cast<size_t>(b.d_full));
        t.pos_of.resize(static_cast<size_t>(b.d_full));
        for (int sys = 0; sys < b.d_sys; ++sys) {
            for (int e = 0; e < b.d_anc; ++e) {
                const int f = b.full_index(sys, e);
                const int k = b.sys_exc(sys) + b.anc_exc(e);
                t.sector_of[static_cast<size_t>(f)] = k;
                t.pos_of[static_cast<size_t>(f)] =
                    static_cast<int>(t.members[static_cast<size_t>(k)].size());
                t.members[static_cast<size_t>(k)].push_back(f);
            }
        }
        return t;
    }

    int count() const { return static_cast<int>(members.size()); }
    int dim(int k) const { return static_cast<int>(members[static_cast<size_t>(k)].size()); }
};

// Operator stored as per-sector triplets in sector-local positions.
struct BlockSparse {
    std::vector<std::vector<Eigen::Triplet<Complex>>> trip;

    explicit BlockSparse(int sectors) : trip(static_cast<size_t>(sectors)) {}

    void add(const SectorTable& t, int row_full, int col_full, Complex v) {
        const int k = t.sector_of[static_cast<size_t>(row_full)];
        if (t.sector_of[static_cast<size_t>(col_full)] != k)
            throw std::logic_error("collision: term breaks excitation conservation");
        trip[static_cast<size_t>(k)].emplace_back(t.pos_of[static_cast<size_t>(row_full)],
                                                  t.pos_of[static_cast<size_t>(col_full)], v);
    }

    void append(const BlockSparse& other, Complex scale) {
        for (size_t k = 0; k < trip.size(); ++k)
            for (const auto& e : other.trip[k])
                trip[k].emplace_back(e.row(), e.col(), scale * e.value());
    }

    // y = Op * x within sector k.
    void apply(int k, const CVector& x, CVector& y) const {
        y.setZero(x.size());
        for (const auto& e : trip[static_cast<size_t>(k)])
            y(e.row()) += e.value() * x(e.col());
    }
};

using Blocks = std::vector<CMatrix>;

// System operator embedded on the joint space (identity on both ancillas).
void add_system_op(BlockSparse& out, const JointBasis& b, const SectorTable& t,
                   const CMatrix& sys_op, Complex scale) {
    for (int si = 0; si < b.d_sys; ++si)
        for (int sj = 0; sj < b.d_sys; ++sj) {
            const Complex v = sys_op(si, sj);
            if (v == Complex(0.0)) continue;
            for (int e = 0; e < b.d_anc; ++e)
                out.add(t, b.full_index(si, e), b.full_index(sj, e), scale * v);
        }
}

void add_ancilla_number(BlockSparse& out, const JointBasis& b, const SectorTable& t, Bath bath,
                        double omega) {
    for (int sys = 0; sys < b.d_sys; ++sys)
        for (int e = 0; e < b.d_anc; ++e) {
            const int f = b.full_index(sys, e);
            out.add(t, f, f, omega * b.anc_level(e, bath));
        }
}

// g (sigma+_{i,n} a_i + sigma-_{i,n} a_i^dag) embedded on the joint space.
BlockSparse coupling_op(const JointBasis& b, const SectorTable& t, const Scenario& s, Bath bath,
                        int site_n) {
    BlockSparse out(t.count());
    const double g = s.ensemble(bath).g(site_n);
    if (g == 0.0) return out;
    const CMatrix sp = site_sigma_plus(s, bath, site_n);
    for (int si = 0; si < b.d_sys; ++si)
        for (int sj = 0; sj < b.d_sys; ++sj) {
            const Complex v = sp(si, sj);
            if (v == Complex(0.0)) continue;
            for (int e = 0; e < b.d_anc; ++e) {
                const int lvl = b.anc_level(e, bath);
                if (lvl == 0) continue;  // a lowers the level
                const double amp = std::sqrt(static_cast<double>(lvl));
                const int e_low = bath == Bath::Hot ? e - b.cut_c : e - 1;
                // sigma+ (x) a and its adjoint
                out.add(t, b.full_index(si, e_low), b.full_index(sj, e), g * amp * v);
                out.add(t, b.full_index(sj, e), b.full_index(si, e_low),
                        g * amp * std::conj(v));
            }
        }
    return out;
}

Blocks dense_blocks(const BlockSparse& op, const SectorTable& t) {
    Blocks out(static_cast<size_t>(t.count()));
    for (int k = 0; k < t.count(); ++k) {
        const int d = t.dim(k);
        CMatrix m = CMatrix::Zero(d, d);
        for (const auto& e : op.trip[static_cast<size_t>(k)]) m(e.row(), e.col()) += e.value();
        out[static_cast<size_t>(k)] = std::move(m);
    }
    return out;
}

Blocks exp_blocks(const Blocks& h, double tau) {
    Blocks u(h.size());
    for (size_t k = 0; k < h.size(); ++k) {
        const CMatrix& hk = h[k];
        if (hk.rows() == 0) continue;
        if (hermiticity_defect(hk) > 1e-10 * std::max(1.0, max_abs(hk)))
            throw std::logic_error("collision: sector Hamiltonian is not Hermitian");
        Eigen::SelfAdjointEigenSolver<CMatrix> es(hk);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("collision: sector eigensolver failed");
        CVector phases(es.eigenvalues().size());
        for (Eigen::Index j = 0; j < phases.size(); ++j)
            phases(j) = std::exp(Complex(0.0, -tau * es.eigenvalues()(j)));
        u[k] = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    }
    return u;
}

Blocks multiply_blocks(const Blocks& a, const Blocks& b) {
    Blocks out(a.size());
    for (size_t k = 0; k < a.size(); ++k) {
        if (a[k].rows() == 0) continue;
        out[k] = a[k] * b[k];
    }
    return out;
}

// Channel matrix of rho -> sum_e w_e Tr_E[ U (rho (x) |e-th thermal level|) U^dag ],
// grouped by the ancilla excitation transfer so only structurally nonzero
// entries of U are touched.
CMatrix assemble_channel(const JointBasis& b, const SectorTable& t, const Blocks& u,
                         const RVector& weights) {
    const int ds = b.d_sys;
    CMatrix channel = CMatrix::Zero(static_cast<Eigen::Index>(ds) * ds,
                                    static_cast<Eigen::Index>(ds) * ds);

    for (int d_transfer = -2 * b.n_sites; d_transfer <= 2 * b.n_sites; ++d_transfer) {
        std::vector<std::pair<int, int>> rows;  // (a, s): sys_exc(s) - sys_exc(a) = -d
        for (int a = 0; a < ds; ++a)
            for (int s = 0; s < ds; ++s)
                if (b.sys_exc(s) - b.sys_exc(a) == -d_transfer) rows.emplace_back(a, s);
        std::vector<std::pair<int, int>> cols;  // (e, E): anc_exc(E) - anc_exc(e) = d
        for (int e = 0; e < b.d_anc; ++e)
            for (int E = 0; E < b.d_anc; ++E)
                if (b.anc_exc(E) - b.anc_exc(e) == d_transfer) cols.emplace_back(e, E);
        if (rows.empty() || cols.empty()) continue;

        CMatrix p = CMatrix::Zero(static_cast<Eigen::Index>(rows.size()),
                                  static_cast<Eigen::Index>(cols.size()));
        for (size_t cj = 0; cj < cols.size(); ++cj) {
            const auto [e, E] = cols[cj];
            const double sqw = std::sqrt(weights(e));
            if (sqw == 0.0) continue;
            for (size_t ri = 0; ri < rows.size(); ++ri) {
                const auto [a, s] = rows[ri];
                const int k = b.sys_exc(a) + b.anc_exc(e);
                const int f_out = b.full_index(s, E);
                const int f_in = b.full_index(a, e);
                if (t.sector_of[static_cast<size_t>(f_out)] != k) continue;
                p(static_cast<Eigen::Index>(ri), static_cast<Eigen::Index>(cj)) =
                    sqw * u[static_cast<size_t>(k)](t.pos_of[static_cast<size_t>(f_out)],
                                                    t.pos_of[static_cast<size_t>(f_in)]);
            }
        }

        const CMatrix r = p * p.adjoint();
        for (size_t ri = 0; ri < rows.size(); ++ri) {
            const auto [a, s] = rows[ri];
            for (size_t rj = 0; rj < rows.size(); ++rj) {
                const auto [a2, s2] = rows[rj];
                channel(s + ds * s2, a + ds * a2) +=
                    r(static_cast<Eigen::Index>(ri), static_cast<Eigen::Index>(rj));
            }
        }
    }
    return channel;
}

// Heisenberg pullback of a block-diagonal observable through the blocked
// evolution `c` (pass nullptr for the identity), averaged over the thermal
// ancilla mixture: out[b,a] = sum_e w_e <c|b,e>| Op |c|a,e)>.
enum class ObsKind { Sparse, AncNumberHot, AncNumberCold };

CMatrix pullback_observable(const JointBasis& b, const SectorTable& t, const Blocks* c,
                            ObsKind kind, const BlockSparse* op, double omega,
                            const RVector& weights) {
    const int ds = b.d_sys;
    CMatrix out = CMatrix::Zero(ds, ds);
    CVector y;
    for (int e = 0; e < b.d_anc; ++e) {
        const double w = weights(e);
        if (w == 0.0) continue;
        for (int a = 0; a < ds; ++a) {
            const int k = b.sys_exc(a) + b.anc_exc(e);
            const int dk = t.dim(k);
            const int pa = t.pos_of[static_cast<size_t>(b.full_index(a, e))];

            CVector col_a;
            if (c) {
                col_a = (*c)[static_cast<size_t>(k)].col(pa);
            } else {
                col_a = CVector::Zero(dk);
                col_a(pa) = 1.0;
            }

            if (kind == ObsKind::Sparse) {
                op->apply(k, col_a, y);
            } else {
                const Bath bath = kind == ObsKind::AncNumberHot ? Bath::Hot : Bath::Cold;
                y.resize(dk);
                const auto& mem = t.members[static_cast<size_t>(k)];
                for (int m = 0; m < dk; ++m) {
                    const int e_m = mem[static_cast<size_t>(m)] % b.d_anc;
                    y(m) = omega * b.anc_level(e_m, bath) * col_a(m);
                }
            }

            for (int b_sys = 0; b_sys < ds; ++b_sys) {
                if (b.sys_exc(b_sys) != b.sys_exc(a)) continue;
                const int pb = t.pos_of[static_cast<size_t>(b.full_index(b_sys, e))];
                Complex dot;
                if (c) {
                    dot = (*c)[static_cast<size_t>(k)].col(pb).dot(y);
                } else {
                    dot = y(pb);
                }
                out(b_sys, a) += w * dot;
            }
        }
    }
    return out;
}

RVector thermal_weights(double beta_omega, int cutoff) {
    RVector p(cutoff);
    for (int n = 0; n < cutoff; ++n) p(n) = std::exp(-beta_omega * n);
    p /= p.sum();
    return p;
}

}  // namespace

struct CollisionEngine::Impl {
    Scenario scen;
    double tau = 0.0;
    double elapsed = 0.0;
    JointBasis basis;
    SectorTable sectors;

    CMatrix channel;         // composed sweep channel on vec(rho)
    CMatrix x_h, x_c;        // pulled-back ancilla energies (full sweep)
    CMatrix w_obs;           // sum_n (V_n before substep n - V_n after substep n)
    CMatrix v_before_obs;    // un-evolved total coupling
    double e_h_before = 0.0, e_c_before = 0.0;
    // A bath with all couplings zero exchanges no energy; its ledger entry is
    // exactly zero rather than eigensolver noise.
    bool hot_coupled = true, cold_coupled = true;

    bool independent = false;
    std::vector<CMatrix> sub_channel, sub_x_h, sub_x_c, sub_w_obs, sub_v_before;

    Impl(const Scenario& s, double tau_in) : scen(s), tau(tau_in) {
        if (!(tau > 0.0)) throw std::invalid_argument("CollisionEngine: tau must be > 0");
        scen.validate();

        basis.n_sites = scen.n_sites();
        basis.d_sys = scen.system_layout().dim();
        basis.cut_h = policy_cutoff(scen, Bath::Hot);
        basis.cut_c = policy_cutoff(scen, Bath::Cold);
        basis.d_anc = basis.cut_h * basis.cut_c;
        basis.d_full = basis.d_sys * basis.d_anc;
        sectors = SectorTable::build(basis);

        hot_coupled = scen.hot.g.cwiseAbs().maxCoeff() > 0.0;
        cold_coupled = scen.cold.g.cwiseAbs().maxCoeff() > 0.0;

        const double bw_h = scen.hot.omega / scen.hot.temperature;
        const double bw_c = scen.cold.omega / scen.cold.temperature;
        const RVector p_h = thermal_weights(bw_h, basis.cut_h);
        const RVector p_c = thermal_weights(bw_c, basis.cut_c);
        RVector weights(basis.d_anc);
        for (int e = 0; e < basis.d_anc; ++e)
            weights(e) = p_h(e / basis.cut_c) * p_c(e % basis.cut_c);
        e_h_before = scen.hot.omega * truncated_thermal_mean(bw_h, basis.cut_h);
        e_c_before = scen.cold.omega * truncated_thermal_mean(bw_c, basis.cut_c);

        const double inv_sqrt_tau = 1.0 / std::sqrt(tau);
        const int n = scen.n_sites();

        // Per-site couplings, shared across stages.
        std::vector<std::vector<BlockSparse>> v(2);
        for (Bath bth : {Bath::Hot, Bath::Cold})
            for (int k = 0; k < n; ++k)
                v[static_cast<size_t>(bth)].push_back(coupling_op(basis, sectors, scen, bth, k));

        BlockSparse v_total(sectors.count());
        for (Bath bth : {Bath::Hot, Bath::Cold})
            for (int k = 0; k < n; ++k)
                v_total.append(v[static_cast<size_t>(bth)][static_cast<size_t>(k)], 1.0);
        v_before_obs =
            pullback_observable(basis, sectors, nullptr, ObsKind::Sparse, &v_total, 0.0, weights);

        const bool common = scen.mode == DissipationMode::Common;
        independent = scen.mode == DissipationMode::Independent;
        const int stages = common ? 1 : n;
        elapsed = tau;
        if (scen.mode == DissipationMode::Cascaded &&
            scen.cascaded_timing == CascadedTiming::SubstepSum)
            elapsed = n * tau;

        // Stage Hamiltonians and unitaries.
        std::vector<Blocks> u_stage;
        for (int st = 0; st < stages; ++st) {
            BlockSparse h(sectors.count());
            add_ancilla_number(h, basis, sectors, Bath::Hot, scen.hot.omega);
            add_ancilla_number(h, basis, sectors, Bath::Cold, scen.cold.omega);
            if (common) {
                add_system_op(h, basis, sectors, build_system_hamiltonian(scen), 1.0);
                for (Bath bth : {Bath::Hot, Bath::Cold})
                    for (int k = 0; k < n; ++k)
                        h.append(v[static_cast<size_t>(bth)][static_cast<size_t>(k)],
                                 inv_sqrt_tau);
            } else {
                // Free terms of the colliding pair plus this substep's share of
                // the interaction: a pairwise term belongs to its own substep, an
                // all-to-all (n,n') term to substep max(n,n').
                CMatrix sys = CMatrix::Zero(basis.d_sys, basis.d_sys);
                for (Bath bth : {Bath::Hot, Bath::Cold}) {
                    const CMatrix sp = site_sigma_plus(scen, bth, st);
                    sys += scen.ensemble(bth).omega * sp * sp.adjoint();
                }
                for (int nh = 0; nh < n; ++nh)
                    for (int nc = 0; nc < n; ++nc) {
                        if (std::max(nh, nc) != st) continue;
                        const double w = scen.interaction_strength(nh, nc);
                        if (w == 0.0) continue;
                        const CMatrix term = site_sigma_plus(scen, Bath::Hot, nh) *
                                             site_sigma_minus(scen, Bath::Cold, nc);
                        sys += w * (term + term.adjoint());
                    }
                add_system_op(h, basis, sectors, sys, 1.0);
                h.append(v[0][static_cast<size_t>(st)], inv_sqrt_tau);
                h.append(v[1][static_cast<size_t>(st)], inv_sqrt_tau);
            }
            u_stage.push_back(exp_blocks(dense_blocks(h, sectors), tau));
        }

        if (common) {
            const Blocks& u = u_stage[0];
            channel = assemble_channel(basis, sectors, u, weights);
            x_h = pullback_observable(basis, sectors, &u, ObsKind::AncNumberHot, nullptr,
                                      scen.hot.omega, weights);
            x_c = pullback_observable(basis, sectors, &u, ObsKind::AncNumberCold, nullptr,
                                      scen.cold.omega, weights);
            w_obs = v_before_obs - pullback_observable(basis, sectors, &u, ObsKind::Sparse,
                                                       &v_total, 0.0, weights);
        } else if (!independent) {
            // Cascaded: ancillas persist through the sweep; ledger observables
            // are pulled back through the running product of substeps.
            std::vector<Blocks> c_stage;  // c_stage[k] = U_k ... U_1
            c_stage.push_back(u_stage[0]);
            for (int st = 1; st < stages; ++st)
                c_stage.push_back(multiply_blocks(u_stage[static_cast<size_t>(st)],
                                                  c_stage[static_cast<size_t>(st - 1)]));
            const Blocks& full = c_stage[static_cast<size_t>(stages - 1)];
            channel = assemble_channel(basis, sectors, full, weights);
            x_h = pullback_observable(basis, sectors, &full, ObsKind::AncNumberHot, nullptr,
                                      scen.hot.omega, weights);
            x_c = pullback_observable(basis, sectors, &full, ObsKind::AncNumberCold, nullptr,
                                      scen.cold.omega, weights);
            w_obs = CMatrix::Zero(basis.d_sys, basis.d_sys);
            for (int st = 0; st < stages; ++st) {
                BlockSparse v_sub(sectors.count());
                v_sub.append(v[0][static_cast<size_t>(st)], 1.0);
                v_sub.append(v[1][static_cast<size_t>(st)], 1.0);
                const Blocks* before = st == 0 ? nullptr : &c_stage[static_cast<size_t>(st - 1)];
                w_obs += pullback_observable(basis, sectors, before, ObsKind::Sparse, &v_sub,
                                             0.0, weights);
                w_obs -= pullback_observable(basis, sectors, &c_stage[static_cast<size_t>(st)],
                                             ObsKind::Sparse, &v_sub, 0.0, weights);
            }
        } else {
            // Independent: both ancillas are refreshed between substeps, which
            // removes the shared-ancilla cross terms from the continuous limit.
            for (int st = 0; st < stages; ++st) {
                const Blocks& u = u_stage[static_cast<size_t>(st)];
                sub_channel.push_back(assemble_channel(basis, sectors, u, weights));
                sub_x_h.push_back(pullback_observable(basis, sectors, &u, ObsKind::AncNumberHot,
                                                      nullptr, scen.hot.omega, weights));
                sub_x_c.push_back(pullback_observable(basis, sectors, &u, ObsKind::AncNumberCold,
                                                      nullptr, scen.cold.omega, weights));
                BlockSparse v_sub(sectors.count());
                v_sub.append(v[0][static_cast<size_t>(st)], 1.0);
                v_sub.append(v[1][static_cast<size_t>(st)], 1.0);
                sub_v_before.push_back(pullback_observable(basis, sectors, nullptr,
                                                           ObsKind::Sparse, &v_sub, 0.0,
                                                           weights));
                sub_w_obs.push_back(sub_v_before.back() -
                                    pullback_observable(basis, sectors, &u, ObsKind::Sparse,
                                                        &v_sub, 0.0, weights));
            }
            channel = sub_channel[0];
            for (int st = 1; st < stages; ++st)
                channel = sub_channel[static_cast<size_t>(st)] * channel;
        }
    }

    CMatrix apply_channel(const CMatrix& m, const CMatrix& rho) const {
        CVector vec = Eigen::Map<const CVector>(rho.data(), rho.size());
        CVector out = m * vec;
        CMatrix next = Eigen::Map<const CMatrix>(out.data(), basis.d_sys, basis.d_sys);
        return (next + next.adjoint()) / 2.0;
    }

    static double trace_with(const CMatrix& rho, const CMatrix& obs) {
        return (rho * obs).trace().real();
    }

    CollisionStep do_step(const DensityMatrix& rho) const {
        if (rho.dim() != basis.d_sys)
            throw std::invalid_argument("CollisionEngine::step: dimension mismatch");
        const double inv_sqrt_tau = 1.0 / std::sqrt(tau);
        CollisionStep out;
        out.tau = elapsed;
        if (!independent) {
            out.rho_after = DensityMatrix(apply_channel(channel, rho.m));
            out.dq_h = hot_coupled ? e_h_before - trace_with(rho.m, x_h) : 0.0;
            out.dq_c = cold_coupled ? e_c_before - trace_with(rho.m, x_c) : 0.0;
            out.dw = inv_sqrt_tau * trace_with(rho.m, w_obs);
            out.v_before = trace_with(rho.m, v_before_obs);
        } else {
            CMatrix cur = rho.m;
            for (size_t st = 0; st < sub_channel.size(); ++st) {
                if (hot_coupled) out.dq_h += e_h_before - trace_with(cur, sub_x_h[st]);
                if (cold_coupled) out.dq_c += e_c_before - trace_with(cur, sub_x_c[st]);
                out.dw += inv_sqrt_tau * trace_with(cur, sub_w_obs[st]);
                out.v_before += trace_with(cur, sub_v_before[st]);
                cur = apply_channel(sub_channel[st], cur);
            }
            out.rho_after = DensityMatrix(std::move(cur));
        }
        return out;
    }
};

CollisionEngine::CollisionEngine(const Scenario& s, double tau)
    : impl_(std::make_unique<Impl>(s, tau)) {}

CollisionEngine::~CollisionEngine() = default;
CollisionEngine::CollisionEngine(CollisionEngine&&) noexcept = default;
CollisionEngine& CollisionEngine::operator=(CollisionEngine&&) noexcept = default;

CollisionStep CollisionEngine::step(const DensityMatrix& rho) const { return impl_->do_step(rho); }

DensityMatrix CollisionEngine::advance(const DensityMatrix& rho) const {
    if (rho.dim() != impl_->basis.d_sys)
        throw std::invalid_argument("CollisionEngine::advance: dimension mismatch");
    return DensityMatrix(impl_->apply_channel(impl_->channel, rho.m));
}

const CMatrix& CollisionEngine::channel() const { return impl_->channel; }

int CollisionEngine::system_dim() const { return impl_->basis.d_sys; }

double CollisionEngine::tau() const { return impl_->tau; }

double CollisionEngine::elapsed_per_sweep() const { return impl_->elapsed; }

int CollisionEngine::cutoff_hot() const { return impl_->basis.cut_h; }

int CollisionEngine::cutoff_cold() const { return impl_->basis.cut_c; }

CollisionStep collide_common(const DensityMatrix& rho, const Scenario& s, double tau) {
    Scenario mode_fixed = s;
    mode_fixed.mode = DissipationMode::Common;
    return CollisionEngine(mode_fixed, tau).step(rho);
}

CollisionStep collide_cascaded(const DensityMatrix& rho, const Scenario& s, double tau) {
    Scenario mode_fixed = s;
    mode_fixed.mode = DissipationMode::Cascaded;
    return CollisionEngine(mode_fixed, tau).step(rho);
}

namespace {

DensityMatrix seed_state(const Scenario& s) {
    std::vector<CMatrix> factors;
    for (int k = 0; k < s.n_sites(); ++k)
        factors.push_back(thermal_tls_state(s.hot.omega / s.hot.temperature).m);
    for (int k = 0; k < s.n_sites(); ++k)
        factors.push_back(thermal_tls_state(s.cold.omega / s.cold.temperature).m);
    return DensityMatrix(kron_all(factors));
}

// ||a - b||_1 for Hermitian inputs, eigenvalues only.
double herm_diff_trace_norm(const CMatrix& a, const CMatrix& b) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(a - b, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
}

}  // namespace

SteadyCycleResult run_to_steady(const Scenario& s, double tau, double tol, long max_steps) {
    if (!(tol > 0.0)) throw std::invalid_argument("run_to_steady: tol must be > 0");
    const CollisionEngine engine(s, tau);

    SteadyCycleResult out;
    DensityMatrix rho = seed_state(s);
    for (long k = 0; k < max_steps; ++k) {
        DensityMatrix next = engine.advance(rho);
        const double delta = herm_diff_trace_norm(next.m, rho.m);
        rho = std::move(next);
        out.steps_used = k + 1;
        out.last_delta = delta;
        if (delta < tol) {
            out.converged = true;
            break;
        }
    }
    // Currents of the final cycle, per coarse-grained elapsed time.
    const CollisionStep fin = engine.step(rho);
    out.rho = rho;
    out.w_rate = fin.dw / engine.elapsed_per_sweep();
    out.q_h_rate = fin.dq_h / engine.elapsed_per_sweep();
    out.q_c_rate = fin.dq_c / engine.elapsed_per_sweep();
    return out;
}

TauExtrapolation tau_extrapolate(const Scenario& s, const std::vector<double>& taus) {
    if (taus.size() < 3)
        throw std::invalid_argument("tau_extrapolate: need at least 3 tau values");
    for (size_t i = 0; i < taus.size(); ++i)
        for (size_t j = i + 1; j < taus.size(); ++j)
            if (taus[i] == taus[j])
                throw std::invalid_argument("tau_extrapolate: tau values must be distinct");

    TauExtrapolation out;
    out.taus = taus;
    for (double tau : taus) {
        out.runs.push_back(run_to_steady(s, tau));
        if (!out.runs.back().converged)
            throw std::runtime_error("tau_extrapolate: run did not converge at tau = " +
                                     std::to_string(tau));
    }

    // Least-squares line I(tau) = c0 + c1 tau per component.
    const auto fit = [&](auto value, double& c0_out, double& resid_out) {
        const size_t m = taus.size();
        double sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0;
        for (size_t k = 0; k < m; ++k) {
            const double x = taus[k], y = value(out.runs[k]);
            sx += x;
            sxx += x * x;
            sy += y;
            sxy += x * y;
        }
        const double denom = m * sxx - sx * sx;
        const double c1 = (m * sxy - sx * sy) / denom;
        const double c0 = (sy - c1 * sx) / m;
        double ss = 0.0;
        for (size_t k = 0; k < m; ++k) {
            const double r = value(out.runs[k]) - (c0 + c1 * taus[k]);
            ss += r * r;
        }
        c0_out = c0;
        resid_out = std::sqrt(ss / m);
    };
    fit([](const SteadyCycleResult& r) { return r.w_rate; }, out.w, out.residual_w);
    fit([](const SteadyCycleResult& r) { return r.q_h_rate; }, out.q_h, out.residual_q_h);
    fit([](const SteadyCycleResult& r) { return r.q_c_rate; }, out.q_c, out.residual_q_c);
    return out;
}

}  // namespace qtm
