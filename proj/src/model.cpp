#include "qtm/model.hpp"

#include <cmath>
#include <sstream>

namespace qtm {

const char* to_string(DissipationMode m) {
    switch (m) {
        case DissipationMode::Common: return "common";
        case DissipationMode::Cascaded: return "cascaded";
        case DissipationMode::Independent: return "independent";
    }
    return "?";
}

const char* to_string(InteractionKind k) {
    switch (k) {
        case InteractionKind::None: return "none";
        case InteractionKind::AllToAll: return "all_to_all";
        case InteractionKind::Pairwise: return "pairwise";
    }
    return "?";
}

const char* to_string(Bath b) { return b == Bath::Hot ? "hot" : "cold"; }

InteractionSpec InteractionSpec::none() { return {}; }

InteractionSpec InteractionSpec::all_to_all(RMatrix omega) {
    InteractionSpec spec;
    spec.kind = InteractionKind::AllToAll;
    spec.omega_matrix = std::move(omega);
    return spec;
}

InteractionSpec InteractionSpec::pairwise(RVector omega) {
    InteractionSpec spec;
    spec.kind = InteractionKind::Pairwise;
    spec.omega_vector = std::move(omega);
    return spec;
}

InteractionSpec InteractionSpec::uniform(InteractionKind kind, int n_sites, double omega) {
    switch (kind) {
        case InteractionKind::None: return none();
        case InteractionKind::AllToAll:
            return all_to_all(RMatrix::Constant(n_sites, n_sites, omega));
        case InteractionKind::Pairwise:
            return pairwise(RVector::Constant(n_sites, omega));
    }
    return none();
}

namespace {

void validate_ensemble(const EnsembleSpec& e, const char* name,
                       std::vector<std::string>& errors) {
    if (e.n_sites < 1) errors.push_back(std::string(name) + ": n_sites must be >= 1");
    if (!(e.omega > 0.0)) errors.push_back(std::string(name) + ": omega must be > 0");
    if (!(e.temperature > 0.0))
        errors.push_back(std::string(name) + ": temperature must be > 0");
    if (e.g.size() != e.n_sites)
        errors.push_back(std::string(name) + ": g must list one coupling per site");
    for (Eigen::Index k = 0; k < e.g.size(); ++k)
        if (e.g(k) < 0.0) errors.push_back(std::string(name) + ": couplings must be >= 0");
}

}  // namespace

std::vector<std::string> Scenario::validate() const {
    std::vector<std::string> errors;
    validate_ensemble(hot, "hot", errors);
    validate_ensemble(cold, "cold", errors);
    if (hot.n_sites >= 1 && cold.n_sites >= 1 && hot.n_sites != cold.n_sites)
        errors.push_back("hot and cold ensembles must have the same n_sites");

    const int n = hot.n_sites;
    // Auxiliary strengths may accompany any variant (they drive the sweep
    // scenario tags); when present they must be well-formed too.
    if (interaction.omega_matrix.size() > 0 &&
        (interaction.omega_matrix.rows() != n || interaction.omega_matrix.cols() != n)) {
        std::ostringstream os;
        os << "interaction: omega_matrix has shape " << interaction.omega_matrix.rows() << "x"
           << interaction.omega_matrix.cols() << ", expected " << n << "x" << n;
        errors.push_back(os.str());
    }
    if (interaction.omega_vector.size() > 0 && interaction.omega_vector.size() != n) {
        std::ostringstream os;
        os << "interaction: omega_vector has length " << interaction.omega_vector.size()
           << ", expected " << n;
        errors.push_back(os.str());
    }
    switch (interaction.kind) {
        case InteractionKind::None: break;
        case InteractionKind::AllToAll:
            if (interaction.omega_matrix.size() == 0)
                errors.push_back("interaction: all_to_all variant needs omega_matrix");
            break;
        case InteractionKind::Pairwise:
            if (interaction.omega_vector.size() == 0)
                errors.push_back("interaction: pairwise variant needs omega_vector");
            break;
    }

    if (!errors.empty()) {
        std::string joined;
        for (const auto& e : errors) {
            if (!joined.empty()) joined += "; ";
            joined += e;
        }
        throw ScenarioError(joined);
    }

    std::vector<std::string> warnings;
    if (hot.temperature <= cold.temperature)
        warnings.push_back("hot bath temperature does not exceed cold bath temperature");
    return warnings;
}

double Scenario::interaction_strength(int n_hot, int n_cold) const {
    switch (interaction.kind) {
        case InteractionKind::None: return 0.0;
        case InteractionKind::AllToAll: return interaction.omega_matrix(n_hot, n_cold);
        case InteractionKind::Pairwise:
            return n_hot == n_cold ? interaction.omega_vector(n_hot) : 0.0;
    }
    return 0.0;
}

double mean_occupation(double beta_omega) {
    if (beta_omega <= 0.0) throw std::invalid_argument("mean_occupation: beta_omega must be > 0");
    return 1.0 / std::expm1(beta_omega);
}

RateTable rate_table(const Scenario& s) {
    RateTable t;
    auto fill = [&](const EnsembleSpec& e, RMatrix& gm, RMatrix& gp, double& nbar) {
        if (!(e.temperature > 0.0)) throw ScenarioError("rate_table: temperature must be > 0");
        nbar = mean_occupation(e.omega / e.temperature);
        const int n = e.n_sites;
        gm.resize(n, n);
        gp.resize(n, n);
        for (int k = 0; k < n; ++k) {
            for (int l = 0; l < n; ++l) {
                const double gg = e.g(k) * e.g(l);
                gm(k, l) = gg * (nbar + 1.0);
                gp(k, l) = gg * nbar;
            }
        }
    };
    fill(s.hot, t.gamma_minus_hot, t.gamma_plus_hot, t.nbar_hot);
    fill(s.cold, t.gamma_minus_cold, t.gamma_plus_cold, t.nbar_cold);
    return t;
}

CMatrix site_sigma_minus(const Scenario& s, Bath b, int n) {
    return embed_site_op(sigma_minus(), s.site(b, n), s.system_layout());
}

CMatrix site_sigma_plus(const Scenario& s, Bath b, int n) {
    return embed_site_op(sigma_plus(), s.site(b, n), s.system_layout());
}

CMatrix site_sigma_z(const Scenario& s, Bath b, int n) {
    return embed_site_op(sigma_z(), s.site(b, n), s.system_layout());
}

CMatrix build_interaction_hamiltonian(const Scenario& s) {
    const HilbertLayout layout = s.system_layout();
    const int d = layout.dim();
    CMatrix h = CMatrix::Zero(d, d);
    for (int nh = 0; nh < s.n_sites(); ++nh) {
        for (int nc = 0; nc < s.n_sites(); ++nc) {
            const double w = s.interaction_strength(nh, nc);
            if (w == 0.0) continue;
            const CMatrix term =
                site_sigma_plus(s, Bath::Hot, nh) * site_sigma_minus(s, Bath::Cold, nc);
            h += w * (term + term.adjoint());
        }
    }
    return h;
}

CMatrix build_system_hamiltonian(const Scenario& s) {
    const HilbertLayout layout = s.system_layout();
    const int d = layout.dim();
    CMatrix h = CMatrix::Zero(d, d);
    for (Bath b : {Bath::Hot, Bath::Cold}) {
        const double omega = s.ensemble(b).omega;
        for (int n = 0; n < s.n_sites(); ++n) {
            const CMatrix sp = site_sigma_plus(s, b, n);
            h += omega * sp * sp.adjoint();
        }
    }
    h += build_interaction_hamiltonian(s);
    return h;
}

int policy_cutoff(const Scenario& s, Bath b) {
    const EnsembleSpec& e = s.ensemble(b);
    return thermal_cutoff(e.omega / e.temperature) + 1;  // dimension = n_max + 1
}

namespace {

// Sparse Kronecker embedding for the coupling operators on system (x) E_h (x) E_c.
SparseCMatrix sparse_kron3(const CMatrix& sys, const CMatrix& eh, const CMatrix& ec) {
    const int dh = static_cast<int>(eh.rows());
    const int dc = static_cast<int>(ec.rows());
    const int ds = static_cast<int>(sys.rows());
    std::vector<Eigen::Triplet<Complex>> trip;
    for (int si = 0; si < ds; ++si)
        for (int sj = 0; sj < ds; ++sj) {
            if (sys(si, sj) == Complex(0.0)) continue;
            for (int hi = 0; hi < dh; ++hi)
                for (int hj = 0; hj < dh; ++hj) {
                    if (eh(hi, hj) == Complex(0.0)) continue;
                    for (int ci = 0; ci < dc; ++ci)
                        for (int cj = 0; cj < dc; ++cj) {
                            if (ec(ci, cj) == Complex(0.0)) continue;
                            const int row = (si * dh + hi) * dc + ci;
                            const int col = (sj * dh + hj) * dc + cj;
                            trip.emplace_back(row, col, sys(si, sj) * eh(hi, hj) * ec(ci, cj));
                        }
                }
        }
    SparseCMatrix out(ds * dh * dc, ds * dh * dc);
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

}  // namespace

std::vector<SparseCMatrix> build_coupling_ops(const Scenario& s, int cutoff_hot,
                                              int cutoff_cold) {
    if (cutoff_hot < 2 || cutoff_cold < 2)
        throw std::invalid_argument("build_coupling_ops: cutoffs must be >= 2");
    const CMatrix a_h = fock_lowering(cutoff_hot);
    const CMatrix a_c = fock_lowering(cutoff_cold);
    const CMatrix id_h = identity(cutoff_hot);
    const CMatrix id_c = identity(cutoff_cold);

    std::vector<SparseCMatrix> ops;
    ops.reserve(static_cast<size_t>(2 * s.n_sites()));
    for (Bath b : {Bath::Hot, Bath::Cold}) {
        for (int n = 0; n < s.n_sites(); ++n) {
            const double g = s.ensemble(b).g(n);
            const CMatrix sp = site_sigma_plus(s, b, n);
            SparseCMatrix v = (b == Bath::Hot) ? sparse_kron3(g * sp, a_h, id_c)
                                               : sparse_kron3(g * sp, id_h, a_c);
            SparseCMatrix vdag = SparseCMatrix(v.adjoint());
            ops.push_back(v + vdag);
        }
    }
    return ops;
}

const std::vector<std::string>& all_scenario_tags() {
    static const std::vector<std::string> tags = {"com1", "com2", "cas1",
                                                  "cas2", "ind1", "ind2"};
    return tags;
}

Scenario scenario_variant(const Scenario& base, const std::string& tag) {
    Scenario s = base;
    std::string mode = tag.substr(0, 3);
    std::string kind = tag.substr(3);
    if (mode == "com")
        s.mode = DissipationMode::Common;
    else if (mode == "cas")
        s.mode = DissipationMode::Cascaded;
    else if (mode == "ind")
        s.mode = DissipationMode::Independent;
    else
        throw std::invalid_argument("scenario_variant: unknown tag '" + tag + "'");

    const int n = base.n_sites();
    if (kind == "1") {
        if (base.interaction.omega_matrix.rows() != n || base.interaction.omega_matrix.cols() != n)
            throw std::invalid_argument("scenario_variant: tag '" + tag +
                                        "' needs an N x N omega_matrix in the base scenario");
        s.interaction = InteractionSpec::all_to_all(base.interaction.omega_matrix);
    } else if (kind == "2") {
        if (base.interaction.omega_vector.size() != n)
            throw std::invalid_argument("scenario_variant: tag '" + tag +
                                        "' needs a length-N omega_vector in the base scenario");
        s.interaction = InteractionSpec::pairwise(base.interaction.omega_vector);
    } else {
        throw std::invalid_argument("scenario_variant: unknown tag '" + tag + "'");
    }
    return s;
}

}  // namespace qtm
