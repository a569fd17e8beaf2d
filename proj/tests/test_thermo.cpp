#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

#include "qtm/liouvillian.hpp"
#include "qtm/thermo.hpp"

using namespace qtm;
using namespace qtm::testutil;

namespace {

SteadyState solve(const Scenario& s) { return steady_state(assemble(s)); }

double plus_pair(const Scenario& s, const DensityMatrix& rho, Bath bi, int n, Bath bj, int np) {
    const CMatrix prod = site_sigma_plus(s, bi, n) * site_sigma_minus(s, bj, np);
    return real_expectation(prod + prod.adjoint(), rho.m);
}

double z_pair(const Scenario& s, const DensityMatrix& rho, Bath bz, int nz, Bath bp, int n,
              Bath bm, int np) {
    const CMatrix pair = site_sigma_plus(s, bp, n) * site_sigma_minus(s, bm, np);
    const CMatrix op = site_sigma_z(s, bz, nz) * (pair + pair.adjoint());
    return real_expectation(op, rho.m);
}

// Explicit two-pair local work with the Gamma weights.
double explicit_work_local(const Scenario& s, const DensityMatrix& rho) {
    const RateTable t = rate_table(s);
    auto gamma_sum = [&](int nh, int nc) {
        return t.gamma_minus_hot(nh, nh) + t.gamma_plus_hot(nh, nh) +
               t.gamma_minus_cold(nc, nc) + t.gamma_plus_cold(nc, nc);
    };
    double w = 0.0;
    for (int nh = 0; nh < 2; ++nh)
        for (int nc = 0; nc < 2; ++nc) {
            const double omega = s.interaction_strength(nh, nc);
            if (omega == 0.0) continue;
            w += -0.5 * omega * gamma_sum(nh, nc) * plus_pair(s, rho, Bath::Hot, nh, Bath::Cold, nc);
        }
    return w;
}

// Explicit three-operator non-local work for the common model.
double explicit_work_nonlocal_common(const Scenario& s, const DensityMatrix& rho) {
    const RateTable t = rate_table(s);
    double w = 0.0;
    for (Bath i : {Bath::Hot, Bath::Cold}) {
        const Bath ip = i == Bath::Hot ? Bath::Cold : Bath::Hot;
        const double dg = t.gamma_minus(i)(0, 1) - t.gamma_plus(i)(0, 1);
        for (int n = 0; n < 2; ++n) {
            const int nb = 1 - n;
            for (int np = 0; np < 2; ++np) {
                // the commuted sigma- fixes the strength: it pairs with the
                // sigma_z site, not with the sigma+ site
                const double omega = i == Bath::Hot ? s.interaction_strength(n, np)
                                                    : s.interaction_strength(np, n);
                if (omega == 0.0) continue;
                w += 0.5 * dg * omega * z_pair(s, rho, i, n, i, nb, ip, np);
            }
        }
    }
    return w;
}

// Explicit ordered non-local work for the cascaded model.
double explicit_work_nonlocal_cascaded(const Scenario& s, const DensityMatrix& rho) {
    const RateTable t = rate_table(s);
    double w = 0.0;
    for (Bath i : {Bath::Hot, Bath::Cold}) {
        const Bath ip = i == Bath::Hot ? Bath::Cold : Bath::Hot;
        const double dg = t.gamma_minus(i)(0, 1) - t.gamma_plus(i)(0, 1);
        for (int np = 0; np < 2; ++np) {
            const double omega = i == Bath::Hot ? s.interaction_strength(1, np)
                                                : s.interaction_strength(np, 1);
            if (omega == 0.0) continue;
            w += dg * omega * z_pair(s, rho, i, 1, i, 0, ip, np);
        }
    }
    return w;
}

}  // namespace

TEST_CASE("local heat vanishes at global equilibrium") {
    Scenario s = reference_scenario(1.0, DissipationMode::Common, InteractionKind::Pairwise);
    s.hot.temperature = 1.3;
    s.cold.temperature = 1.3;
    const SteadyState ss = solve(s);
    const BathPair q = heat_local(ss.rho, s);
    CHECK(std::abs(q.hot) < 1e-9);
    CHECK(std::abs(q.cold) < 1e-9);
}

TEST_CASE("each TLS pinned to its own bath exchanges no net heat") {
    // Without interactions every site relaxes to its bath's Gibbs weight and
    // emission balances absorption site by site.
    Scenario s = reference_scenario(1.7, DissipationMode::Independent, InteractionKind::None);
    const SteadyState ss = solve(s);
    const BathPair q = heat_local(ss.rho, s);
    CHECK(std::abs(q.hot) < 1e-11);
    CHECK(std::abs(q.cold) < 1e-11);
}

TEST_CASE("dephasing probes reproduce the dependency table") {
    for (const char* tag : {"com1", "com2", "cas1", "cas2", "ind1", "ind2"}) {
        Scenario base = reference_scenario(1.5, DissipationMode::Common, InteractionKind::Pairwise);
        base.interaction.omega_matrix = RMatrix::Constant(2, 2, 0.1);
        const Scenario s = scenario_variant(base, tag);
        const SteadyState ss = solve(s);
        const DensityMatrix dephased_state = dephased(ss.rho);

        const BathPair q_before = heat_local(ss.rho, s);
        const BathPair q_after = heat_local(dephased_state, s);
        CHECK(std::abs(q_before.hot - q_after.hot) < 1e-10);
        CHECK(std::abs(q_before.cold - q_after.cold) < 1e-10);

        const BathPair qn = heat_nonlocal(dephased_state, s);
        CHECK(std::abs(qn.hot) < 1e-10);
        CHECK(std::abs(qn.cold) < 1e-10);
        CHECK(std::abs(work_local(dephased_state, s)) < 1e-10);
        CHECK(std::abs(work_nonlocal(dephased_state, s)) < 1e-10);
    }
}

TEST_CASE("non-local heat is exactly zero for independent dissipation") {
    const Scenario s = reference_scenario(1.5, DissipationMode::Independent, InteractionKind::Pairwise);
    const SteadyState ss = solve(s);
    const BathPair qn = heat_nonlocal(ss.rho, s);
    CHECK(qn.hot == 0.0);
    CHECK(qn.cold == 0.0);
    CHECK(work_nonlocal(ss.rho, s) == 0.0);
}

TEST_CASE("non-local heat vanishes at equilibrium of a shared bath") {
    Scenario s = reference_scenario(1.0, DissipationMode::Common, InteractionKind::None);
    s.hot.temperature = 1.3;
    s.cold.temperature = 1.3;
    const SteadyState ss = solve(s);
    const BathPair qn = heat_nonlocal(ss.rho, s);
    CHECK(std::abs(qn.hot) < 1e-9);
    CHECK(std::abs(qn.cold) < 1e-9);
}

TEST_CASE("work vanishes without interactions") {
    const Scenario s = reference_scenario(1.5, DissipationMode::Common, InteractionKind::None);
    const SteadyState ss = solve(s);
    CHECK(work_local(ss.rho, s) == 0.0);
    CHECK(work_nonlocal(ss.rho, s) == 0.0);
}

TEST_CASE("uniform couplings tie the local work to the pair coherence") {
    // With uniform Omega and uniform g, W_loc = (Omega Gamma / 2) C_loc.
    for (DissipationMode mode : {DissipationMode::Common, DissipationMode::Cascaded}) {
        Scenario s = reference_scenario(1.5, mode, InteractionKind::Pairwise);
        s.hot.g = RVector::Constant(2, 0.5);
        s.cold.g = RVector::Constant(2, 0.5);
        const SteadyState ss = solve(s);
        const double w_loc = work_local(ss.rho, s);
        const CoherenceMetrics coh = coherence_metrics(ss.rho, s);
        const RateTable t = rate_table(s);
        const double gamma = t.gamma_minus_hot(0, 0) + t.gamma_plus_hot(0, 0) +
                             t.gamma_minus_cold(0, 0) + t.gamma_plus_cold(0, 0);
        CHECK(std::abs(w_loc - 0.5 * 0.1 * gamma * coh.c_loc) < 1e-10);
    }
}

TEST_CASE("total work current vanishes at equal frequencies") {
    for (const char* tag : {"com1", "com2", "cas1", "cas2", "ind1", "ind2"}) {
        Scenario base = reference_scenario(1.0, DissipationMode::Common, InteractionKind::Pairwise);
        base.interaction.omega_matrix = RMatrix::Constant(2, 2, 0.1);
        const Scenario s = scenario_variant(base, tag);
        const SteadyState ss = solve(s);
        const Currents c = currents(ss.rho, s);
        CHECK(std::abs(c.w()) < 1e-8);
    }
}

TEST_CASE("explicit two-pair formulas match the generic operator route") {
    // All-to-all and pairwise, both shared-bath models, generic parameters.
    for (DissipationMode mode : {DissipationMode::Common, DissipationMode::Cascaded}) {
        for (InteractionKind kind : {InteractionKind::AllToAll, InteractionKind::Pairwise}) {
            Scenario s = reference_scenario(1.37, mode, kind);
            if (kind == InteractionKind::AllToAll) {
                RMatrix m(2, 2);
                m << 0.1, 0.07, 0.12, 0.09;  // break every symmetry
                s.interaction = InteractionSpec::all_to_all(m);
            } else {
                s.interaction = InteractionSpec::pairwise((RVector(2) << 0.1, 0.13).finished());
            }
            const SteadyState ss = solve(s);
            CHECK(std::abs(work_local(ss.rho, s) - explicit_work_local(s, ss.rho)) < 1e-12);
            const double w_nl = work_nonlocal(ss.rho, s);
            const double explicit_nl = mode == DissipationMode::Common
                                           ? explicit_work_nonlocal_common(s, ss.rho)
                                           : explicit_work_nonlocal_cascaded(s, ss.rho);
            CHECK(std::abs(w_nl - explicit_nl) < 1e-12);
        }
    }
}

TEST_CASE("cascaded pairwise non-local work keeps only second-strength terms") {
    Scenario s = reference_scenario(1.5, DissipationMode::Cascaded, InteractionKind::Pairwise);
    s.interaction = InteractionSpec::pairwise((RVector(2) << 0.1, 0.0).finished());
    // Omega_2 = 0 kills every term of the ordered sum.
    const SteadyState ss = solve(s);
    CHECK(std::abs(work_nonlocal(ss.rho, s)) < 1e-10);
}

TEST_CASE("common and cascaded non-local work take opposite signs somewhere") {
    bool found = false;
    for (double ratio = 0.3; ratio <= 3.5 && !found; ratio += 0.2) {
        const Scenario com = reference_scenario(ratio, DissipationMode::Common,
                                           InteractionKind::Pairwise);
        const Scenario cas = reference_scenario(ratio, DissipationMode::Cascaded,
                                           InteractionKind::Pairwise);
        const double w_com = work_nonlocal(solve(com).rho, com);
        const double w_cas = work_nonlocal(solve(cas).rho, cas);
        if (std::abs(w_com) > 1e-9 && std::abs(w_cas) > 1e-9 && w_com * w_cas < 0.0)
            found = true;
    }
    CHECK(found);
}

TEST_CASE("oracle currents match the closed forms") {
    for (DissipationMode mode :
         {DissipationMode::Common, DissipationMode::Cascaded, DissipationMode::Independent}) {
        for (double ratio : {0.7, 1.5, 2.8}) {
            const Scenario s = reference_scenario(ratio, mode, InteractionKind::Pairwise);
            const SteadyState ss = solve(s);
            const Currents closed = currents(ss.rho, s);
            const Currents oracle = oracle_currents(ss.rho, s);
            const double tol = 1e-6 * std::max(closed.max_magnitude(), 1e-3);
            CHECK(std::abs(oracle.w_loc - closed.w_loc) < tol);
            CHECK(std::abs(oracle.w_nonloc - closed.w_nonloc) < tol);
            CHECK(std::abs(oracle.q_h_loc - closed.q_h_loc) < tol);
            CHECK(std::abs(oracle.q_h_nonloc - closed.q_h_nonloc) < tol);
            CHECK(std::abs(oracle.q_c_loc - closed.q_c_loc) < tol);
            CHECK(std::abs(oracle.q_c_nonloc - closed.q_c_nonloc) < tol);
        }
    }
}

TEST_CASE("oracle without interactions: no work, antisymmetric heat") {
    const Scenario s = reference_scenario(1.5, DissipationMode::Common, InteractionKind::None);
    const SteadyState ss = solve(s);
    const Currents oracle = oracle_currents(ss.rho, s);
    CHECK(std::abs(oracle.w_loc) < 1e-12);
    CHECK(std::abs(oracle.w_nonloc) < 1e-12);
    CHECK(std::abs(oracle.q_h() + oracle.q_c()) < 1e-9);
}

TEST_CASE("coherence metrics vanish for independent dissipation without interactions") {
    const Scenario s = reference_scenario(1.5, DissipationMode::Independent, InteractionKind::None);
    const SteadyState ss = solve(s);
    // the pairwise forms evaluated on a product steady state
    Scenario tagged = s;
    tagged.interaction = InteractionSpec::pairwise(RVector::Zero(2));
    const CoherenceMetrics coh = coherence_metrics(ss.rho, tagged);
    CHECK(std::abs(coh.c_loc) < 1e-10);
    CHECK(std::abs(coh.c_nonloc) < 1e-10);
}

TEST_CASE("coherence metrics demand two sites per ensemble") {
    Scenario s;
    s.hot = {1, 1.5, RVector::Constant(1, 0.5), 2.0};
    s.cold = {1, 1.0, RVector::Constant(1, 0.5), 1.0};
    s.interaction = InteractionSpec::pairwise(RVector::Constant(1, 0.1));
    const SteadyState ss = solve(s);
    CHECK_THROWS_AS(coherence_metrics(ss.rho, s), std::invalid_argument);
}

TEST_CASE("product form differs from the three-operator coherence somewhere") {
    for (DissipationMode mode : {DissipationMode::Common, DissipationMode::Cascaded}) {
        double max_diff = 0.0;
        for (double ratio = 0.3; ratio <= 3.5; ratio += 0.2) {
            const Scenario s = reference_scenario(ratio, mode, InteractionKind::Pairwise);
            const CoherenceMetrics coh = coherence_metrics(solve(s).rho, s);
            max_diff = std::max(max_diff, std::abs(coh.c_nonloc - coh.c_nonloc_factored));
        }
        CHECK(max_diff > 1e-6);
    }
}

TEST_CASE("regime classification from current signs") {
    const Scenario s = reference_scenario(1.5, DissipationMode::Common, InteractionKind::Pairwise);
    Currents c;
    c.w_loc = 1.0;
    c.q_h_loc = -2.0;
    c.q_c_loc = 1.0;
    CHECK(classify_regime(c, s).regime == Regime::Refrigerator);

    c.w_loc = -1.0;
    c.q_h_loc = 2.0;
    c.q_c_loc = -1.0;
    CHECK(classify_regime(c, s).regime == Regime::Engine);

    c.w_loc = 1.0;
    c.q_h_loc = 2.0;
    c.q_c_loc = -3.0;
    CHECK(classify_regime(c, s).regime == Regime::Accelerator);

    c.w_loc = 1e-12;
    c.q_h_loc = -1e-12;
    c.q_c_loc = 0.0;
    CHECK(classify_regime(c, s).regime == Regime::Boundary);

    CHECK_THROWS(classify_regime(c, s, 0.0));
}

TEST_CASE("figures of merit come from the frequencies") {
    {
        const Scenario s = reference_scenario(1.5, DissipationMode::Common, InteractionKind::Pairwise);
        Currents c;
        c.w_loc = -1.0;
        c.q_h_loc = 3.0;
        c.q_c_loc = -2.0;
        const RegimeReport r = classify_regime(c, s);
        CHECK(r.regime == Regime::Engine);
        CHECK(std::abs(r.figure_of_merit - (1.0 - 1.0 / 1.5)) < 1e-15);
        CHECK(r.figure_of_merit == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(r.carnot_bound == doctest::Approx(0.5));
    }
    {
        const Scenario s = reference_scenario(3.0, DissipationMode::Common, InteractionKind::Pairwise);
        Currents c;
        c.w_loc = 1.0;
        c.q_h_loc = -3.0;
        c.q_c_loc = 2.0;
        const RegimeReport r = classify_regime(c, s);
        CHECK(r.regime == Regime::Refrigerator);
        CHECK(r.figure_of_merit == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("coarse sweep satisfies the stationary thermodynamic laws") {
    for (const char* tag : {"com1", "com2", "cas1", "cas2", "ind1", "ind2"}) {
        Scenario base = reference_scenario(1.0, DissipationMode::Common, InteractionKind::Pairwise);
        base.interaction.omega_matrix = RMatrix::Constant(2, 2, 0.1);
        const SweepResult r = sweep_and_optimize(scenario_variant(base, tag), 0.3, 3.5, 0.1, 2);
        for (const auto& p : r.points) {
            REQUIRE(p.ok);
            // absolute floor for the equilibrium points where all currents vanish
            const double tol = std::max(1e-9 * p.cur.max_magnitude(), 1e-14);
            CHECK(p.first_law_residual < tol);
            CHECK(p.entropy >= -1e-12);
            // every absorbed hot quantum is re-emitted at the cold frequency
            CHECK(std::abs(p.cur.q_h() / (p.ratio * 1.0) + p.cur.q_c() / 1.0) < tol);
            if (p.reg.regime == Regime::Engine)
                CHECK(p.reg.figure_of_merit <= 0.5 + 1e-9);
        }
        CHECK(r.summary.has_engine_window);
        CHECK(r.summary.eta_max > 0.25);
        CHECK(r.summary.eta_max < 0.31);
    }
}

TEST_CASE("sweep output does not depend on the thread count") {
    Scenario base = reference_scenario(1.0, DissipationMode::Cascaded, InteractionKind::Pairwise);
    const SweepResult one = sweep_and_optimize(base, 1.1, 1.9, 0.05, 1);
    const SweepResult four = sweep_and_optimize(base, 1.1, 1.9, 0.05, 4);
    REQUIRE(one.points.size() == four.points.size());
    for (size_t k = 0; k < one.points.size(); ++k) {
        CHECK(one.points[k].cur.w_loc == four.points[k].cur.w_loc);
        CHECK(one.points[k].cur.q_h_nonloc == four.points[k].cur.q_h_nonloc);
        CHECK(one.points[k].coh.c_nonloc == four.points[k].coh.c_nonloc);
        CHECK(one.points[k].entropy == four.points[k].entropy);
    }
    CHECK(one.summary.eta_max == four.summary.eta_max);
}

TEST_CASE("scenario variants validate their inputs") {
    Scenario base = reference_scenario(1.5, DissipationMode::Common, InteractionKind::Pairwise);
    CHECK_THROWS(scenario_variant(base, "com3"));
    CHECK_THROWS(scenario_variant(base, "xyz1"));
    CHECK_THROWS(scenario_variant(base, "com1"));  // no omega_matrix in base
    base.interaction.omega_matrix = RMatrix::Constant(2, 2, 0.1);
    CHECK(scenario_variant(base, "com1").interaction.kind == InteractionKind::AllToAll);
    CHECK(scenario_variant(base, "ind2").mode == DissipationMode::Independent);
}

TEST_CASE("grid construction") {
    const auto xs = sweep_grid(0.1, 3.5, 0.02);
    CHECK(xs.size() == 171);
    CHECK(xs.front() == doctest::Approx(0.1));
    CHECK(xs.back() == doctest::Approx(3.5));
    CHECK_THROWS(sweep_grid(1.0, 0.5, 0.1));
    CHECK_THROWS(sweep_grid(0.5, 1.0, 0.0));
}
