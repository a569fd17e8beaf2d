#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

#include "qtm/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>

using namespace qtm;
using namespace qtm::testutil;

namespace {

Scenario n1_scenario(double omega_h, double omega_c, double omega_int) {
    Scenario s;
    s.hot = {1, omega_h, RVector::Constant(1, 0.5), 2.0};
    s.cold = {1, omega_c, RVector::Constant(1, 0.5), 1.0};
    s.interaction = omega_int == 0.0
                        ? InteractionSpec::none()
                        : InteractionSpec::pairwise(RVector::Constant(1, omega_int));
    return s;
}

CMatrix total_excitation(const Scenario& s) {
    const HilbertLayout layout = s.system_layout();
    CMatrix n_op = CMatrix::Zero(layout.dim(), layout.dim());
    for (Bath b : {Bath::Hot, Bath::Cold})
        for (int n = 0; n < s.n_sites(); ++n) {
            const CMatrix sp = site_sigma_plus(s, b, n);
            n_op += sp * sp.adjoint();
        }
    return n_op;
}

}  // namespace

TEST_CASE("free Hamiltonian spectrum of two uncoupled TLSs") {
    const Scenario s = n1_scenario(1.0, 1.0, 0.0);
    const CMatrix h = build_system_hamiltonian(s);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    RVector lam = es.eigenvalues();
    std::vector<double> got(lam.data(), lam.data() + lam.size());
    std::sort(got.begin(), got.end());
    const std::vector<double> expected = {0.0, 1.0, 1.0, 2.0};
    for (size_t k = 0; k < expected.size(); ++k)
        CHECK(got[k] == doctest::Approx(expected[k]).epsilon(1e-14));
}

TEST_CASE("uniform all-to-all interaction equals the collective form") {
    Scenario s = reference_scenario(1.3, DissipationMode::Common, InteractionKind::AllToAll);
    const CMatrix h_int = build_interaction_hamiltonian(s);

    const HilbertLayout layout = s.system_layout();
    CMatrix s_plus_h = CMatrix::Zero(layout.dim(), layout.dim());
    CMatrix s_plus_c = CMatrix::Zero(layout.dim(), layout.dim());
    for (int n = 0; n < s.n_sites(); ++n) {
        s_plus_h += site_sigma_plus(s, Bath::Hot, n);
        s_plus_c += site_sigma_plus(s, Bath::Cold, n);
    }
    const CMatrix collective =
        0.1 * (s_plus_h * s_plus_c.adjoint() + s_plus_h.adjoint() * s_plus_c);
    CHECK(max_abs(h_int - collective) < 1e-14);
}

TEST_CASE("system Hamiltonian conserves total excitation for both couplings") {
    for (InteractionKind kind : {InteractionKind::AllToAll, InteractionKind::Pairwise}) {
        const Scenario s = reference_scenario(1.7, DissipationMode::Common, kind);
        const CMatrix h = build_system_hamiltonian(s);
        CHECK(max_abs(commutator(h, total_excitation(s))) == 0.0);
    }
}

TEST_CASE("coupling operators are Hermitian") {
    const Scenario s = reference_scenario(1.2, DissipationMode::Common, InteractionKind::Pairwise);
    const auto ops = build_coupling_ops(s, 4, 4);
    REQUIRE(ops.size() == 4);
    for (const auto& v : ops) {
        const CMatrix dense = CMatrix(v);
        CHECK(hermiticity_defect(dense) == 0.0);
    }
}

TEST_CASE("resonant system-bath coupling conserves bare energy") {
    const Scenario s = reference_scenario(1.4, DissipationMode::Common, InteractionKind::Pairwise);
    const int cut = 5;
    const auto ops = build_coupling_ops(s, cut, cut);

    // sum_n H_{S_i,n} + H_{E_i} on the joint space, per bath.
    const HilbertLayout joint = s.system_layout().appended(cut).appended(cut);
    for (Bath b : {Bath::Hot, Bath::Cold}) {
        const double omega = s.ensemble(b).omega;
        CMatrix bare = CMatrix::Zero(joint.dim(), joint.dim());
        for (int n = 0; n < s.n_sites(); ++n) {
            const CMatrix sp =
                embed_site_op(sigma_plus(), s.site(b, n), joint);
            bare += omega * sp * sp.adjoint();
        }
        const int anc_site = 2 * s.n_sites() + (b == Bath::Hot ? 0 : 1);
        bare += omega * embed_site_op(fock_raising(cut) * fock_lowering(cut), anc_site, joint);

        CMatrix v_sum = CMatrix::Zero(joint.dim(), joint.dim());
        for (int n = 0; n < s.n_sites(); ++n) {
            const size_t idx = static_cast<size_t>(b == Bath::Hot ? n : s.n_sites() + n);
            v_sum += CMatrix(ops[idx]);
        }
        CHECK(max_abs(commutator(bare, v_sum)) < 1e-10);
    }
}

TEST_CASE("coupling matrix element on excited system and vacuum ancilla") {
    Scenario s = n1_scenario(1.0, 1.0, 0.0);
    const int cut = 2;
    const auto ops = build_coupling_ops(s, cut, cut);
    const CMatrix v_h1 = CMatrix(ops[0]);

    const HilbertLayout joint = s.system_layout().appended(cut).appended(cut);
    CVector psi = CVector::Zero(joint.dim());
    psi(0) = 1.0;  // both TLS excited (index 0), both ancillas in vacuum level 0
    const CMatrix rho = psi * psi.adjoint();
    CHECK(real_expectation(v_h1 * v_h1, rho) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("rate table values and local detailed balance") {
    Scenario s = reference_scenario(1.0, DissipationMode::Common, InteractionKind::Pairwise);
    const RateTable t = rate_table(s);

    CHECK(t.nbar_hot == doctest::Approx(1.54149).epsilon(1e-4));
    CHECK(t.gamma_minus_hot(0, 0) == doctest::Approx(0.63537).epsilon(1e-4));
    CHECK(t.gamma_plus_hot(0, 0) == doctest::Approx(0.38537).epsilon(1e-4));
    CHECK(t.gamma_plus_hot(0, 0) / t.gamma_minus_hot(0, 0) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
    CHECK(t.gamma_plus_hot(0, 0) / t.gamma_minus_hot(0, 0) ==
          doctest::Approx(0.60653).epsilon(1e-4));
    CHECK(t.gamma_minus_hot(0, 1) == doctest::Approx(0.69891).epsilon(1e-4));
    CHECK(t.gamma_minus_hot(0, 1) == doctest::Approx(0.5 * 0.55 * (t.nbar_hot + 1.0)));
}

TEST_CASE("detailed balance holds to machine precision for random parameters") {
    auto rng = make_rng(7);
    std::uniform_real_distribution<double> temp(0.3, 3.0), freq(0.2, 2.5), coupling(0.05, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Scenario s = reference_scenario(1.0, DissipationMode::Common, InteractionKind::Pairwise);
        s.hot.temperature = temp(rng);
        s.cold.temperature = temp(rng);
        s.hot.omega = freq(rng);
        s.cold.omega = freq(rng);
        s.hot.g = (RVector(2) << coupling(rng), coupling(rng)).finished();
        s.cold.g = (RVector(2) << coupling(rng), coupling(rng)).finished();
        const RateTable t = rate_table(s);
        for (Bath b : {Bath::Hot, Bath::Cold}) {
            const double expected =
                std::exp(-s.ensemble(b).omega / s.ensemble(b).temperature);
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) {
                    if (t.gamma_minus(b)(k, l) == 0.0) continue;
                    CHECK(t.gamma_plus(b)(k, l) / t.gamma_minus(b)(k, l) ==
                          doctest::Approx(expected).epsilon(1e-14));
                }
        }
    }
}

TEST_CASE("scenario validation") {
    Scenario s = reference_scenario(1.0, DissipationMode::Common, InteractionKind::Pairwise);
    CHECK(s.validate().empty());  // T_h > T_c, no warnings

    Scenario cold_hot = s;
    cold_hot.hot.temperature = 0.5;
    const auto warnings = cold_hot.validate();
    REQUIRE(warnings.size() == 1);

    Scenario mismatched = s;
    mismatched.cold.n_sites = 1;
    CHECK_THROWS_AS(mismatched.validate(), ScenarioError);

    Scenario bad_g = s;
    bad_g.hot.g = RVector::Constant(3, 0.5);
    CHECK_THROWS_AS(bad_g.validate(), ScenarioError);

    Scenario bad_shape = s;
    bad_shape.interaction = InteractionSpec::all_to_all(RMatrix::Constant(3, 2, 0.1));
    CHECK_THROWS_AS(bad_shape.validate(), ScenarioError);
}

static const char* kReferenceConfig = R"(# reference parameters
[hot]
n_sites = 2
omega = 1.5
g = 0.5, 0.55
temperature = 2.0

[cold]
n_sites = 2
omega = 1.0
g = 0.5, 0.55
temperature = 1.0

[interaction]
variant = pairwise
omega_vector = 0.1, 0.1
omega_matrix = 0.1 0.1; 0.1 0.1

[run]
mode = cascaded
tau = 0.02, 0.04, 0.08
grid = 0.1:3.5:0.02
scenarios = com2, cas2
threads = 2
)";

TEST_CASE("reference configuration parses") {
    const ParsedConfig cfg = parse_config(kReferenceConfig);
    CHECK(cfg.scenario.hot.g(0) == 0.5);
    CHECK(cfg.scenario.hot.g(1) == 0.55);
    CHECK(cfg.scenario.cold.g(1) == 0.55);
    CHECK(cfg.scenario.hot.temperature == 2.0);
    CHECK(cfg.scenario.cold.temperature == 1.0);
    CHECK(cfg.scenario.mode == DissipationMode::Cascaded);
    CHECK(cfg.scenario.interaction.kind == InteractionKind::Pairwise);
    CHECK(cfg.scenario.interaction.omega_vector(0) == 0.1);
    CHECK(cfg.scenario.interaction.omega_matrix(1, 1) == 0.1);
    REQUIRE(cfg.run.taus.size() == 3);
    CHECK(cfg.run.taus[1] == 0.04);
    CHECK(cfg.run.grid_step.value() == 0.02);
    REQUIRE(cfg.run.scenarios.size() == 2);
    CHECK(cfg.run.scenarios[1] == "cas2");
    CHECK(cfg.run.threads == 2);
    CHECK(cfg.warnings.empty());
}

TEST_CASE("empty document reports a missing ensemble") {
    try {
        parse_config("");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("missing ensemble") != std::string::npos);
    }
}

TEST_CASE("wrong interaction matrix shape names the expected size") {
    std::string text = kReferenceConfig;
    const auto pos = text.find("omega_matrix = 0.1 0.1; 0.1 0.1");
    text.replace(pos, std::string("omega_matrix = 0.1 0.1; 0.1 0.1").size(),
                 "omega_matrix = 0.1 0.1 0.1; 0.1 0.1 0.1");
    try {
        parse_config(text);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("expected 2x2") != std::string::npos);
    }
}

TEST_CASE("unknown keys are rejected with their line") {
    const std::string text = "[hot]\nn_sites = 2\nomega = 1.0\ng = 0.5, 0.5\n"
                             "temperature = 2.0\ntypo_key = 1\n"
                             "[cold]\nn_sites = 2\nomega = 1.0\ng = 0.5, 0.5\n"
                             "temperature = 1.0\n";
    try {
        parse_config(text);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.line() == 6);
        CHECK(std::string(e.what()).find("typo_key") != std::string::npos);
    }
}

TEST_CASE("duplicate keys and malformed lines are rejected") {
    CHECK_THROWS_AS(parse_config("[hot]\nomega = 1\nomega = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[hot]\nnonsense line\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[mystery]\n"), ConfigError);
}

TEST_CASE("render and parse round-trip") {
    for (const char* tag : {"com1", "com2", "cas1", "cas2", "ind1", "ind2"}) {
        Scenario base = reference_scenario(1.5, DissipationMode::Common, InteractionKind::Pairwise);
        base.interaction.omega_matrix = RMatrix::Constant(2, 2, 0.1);
        const Scenario s = scenario_variant(base, tag);
        RunConfig run;
        run.taus = {0.02, 0.08};
        run.grid_lo = 0.1;
        run.grid_hi = 3.5;
        run.grid_step = 0.02;
        run.scenarios = {"com2"};
        run.threads = 4;

        const std::string text = render_config(s, &run);
        const ParsedConfig back = parse_config(text);
        CHECK(back.scenario.mode == s.mode);
        CHECK(back.scenario.interaction.kind == s.interaction.kind);
        CHECK(back.scenario.hot.omega == s.hot.omega);
        CHECK(back.scenario.cold.temperature == s.cold.temperature);
        CHECK((back.scenario.hot.g - s.hot.g).cwiseAbs().maxCoeff() == 0.0);
        if (s.interaction.kind == InteractionKind::Pairwise)
            CHECK((back.scenario.interaction.omega_vector - s.interaction.omega_vector)
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
        if (s.interaction.kind == InteractionKind::AllToAll)
            CHECK((back.scenario.interaction.omega_matrix - s.interaction.omega_matrix)
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
        CHECK(back.run.taus == run.taus);
        CHECK(back.run.grid_step.value() == run.grid_step.value());
        CHECK(back.run.scenarios == run.scenarios);
        CHECK(back.run.threads == run.threads);
    }
}
