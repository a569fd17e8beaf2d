// model.hpp — declarative description and validation of a simulation
// scenario, construction of the Hamiltonian pieces and dissipation rates.
//
// Units: hbar = k_B = 1 and omega_c = 1; frequencies, temperatures and
// couplings are expressed in units of omega_c, currents in omega_c^2.

#pragma once

#include "qtm/qmat.hpp"

#include <optional>
#include <string>
#include <vector>

namespace qtm {

enum class Bath { Hot = 0, Cold = 1 };

enum class DissipationMode { Common, Cascaded, Independent };

enum class InteractionKind { None, AllToAll, Pairwise };

// Elapsed time attributed to one full cascaded sweep: the default counts one
// sweep as tau; SubstepSum counts N*tau (sensitivity switch, see README).
enum class CascadedTiming { PerSweep, SubstepSum };

const char* to_string(DissipationMode m);
const char* to_string(InteractionKind k);
const char* to_string(Bath b);

// Exchange couplings between the two ensembles. AllToAll carries an N x N
// matrix Omega[n][n'] coupling hot site n to cold site n'; Pairwise carries a
// length-N vector Omega[n] coupling hot site n to cold site n.
struct InteractionSpec {
    InteractionKind kind = InteractionKind::None;
    RMatrix omega_matrix;  // AllToAll
    RVector omega_vector;  // Pairwise

    static InteractionSpec none();
    static InteractionSpec all_to_all(RMatrix omega);
    static InteractionSpec pairwise(RVector omega);
    static InteractionSpec uniform(InteractionKind kind, int n_sites, double omega);
};

struct EnsembleSpec {
    int n_sites = 0;
    double omega = 0.0;        // TLS transition frequency (= resonant ancilla frequency)
    RVector g;                 // per-site system-bath coupling strengths
    double temperature = 0.0;  // bath temperature
};

struct Scenario {
    EnsembleSpec hot;
    EnsembleSpec cold;
    InteractionSpec interaction;
    DissipationMode mode = DissipationMode::Common;
    CascadedTiming cascaded_timing = CascadedTiming::PerSweep;

    int n_sites() const { return hot.n_sites; }

    const EnsembleSpec& ensemble(Bath b) const { return b == Bath::Hot ? hot : cold; }

    // System ordering: S_h1..S_hN, S_c1..S_cN (0-based site indices here).
    int site(Bath b, int n) const { return b == Bath::Hot ? n : n_sites() + n; }

    HilbertLayout system_layout() const { return HilbertLayout::qubits(2 * n_sites()); }

    // Throws ScenarioError on invariant violations; returns warnings
    // (e.g. T_hot <= T_cold) that do not block a run.
    std::vector<std::string> validate() const;

    // Exchange strength between hot site n and cold site n' (0 when absent).
    double interaction_strength(int n_hot, int n_cold) const;
};

class ScenarioError : public std::runtime_error {
  public:
    explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

// Dissipation rates gamma^-[k][l] = g_k g_l (nbar + 1) and
// gamma^+[k][l] = g_k g_l nbar per bath, with nbar the bath mean photon
// number at the ensemble frequency; gamma^+/gamma^- = exp(-beta omega).
struct RateTable {
    RMatrix gamma_minus_hot, gamma_plus_hot;
    RMatrix gamma_minus_cold, gamma_plus_cold;
    double nbar_hot = 0.0, nbar_cold = 0.0;

    const RMatrix& gamma_minus(Bath b) const {
        return b == Bath::Hot ? gamma_minus_hot : gamma_minus_cold;
    }
    const RMatrix& gamma_plus(Bath b) const {
        return b == Bath::Hot ? gamma_plus_hot : gamma_plus_cold;
    }
    double nbar(Bath b) const { return b == Bath::Hot ? nbar_hot : nbar_cold; }
};

RateTable rate_table(const Scenario& s);

double mean_occupation(double beta_omega);

// H_S = sum_i sum_n omega_i sigma+_{i,n} sigma-_{i,n} + H_I on the 2^(2N) space.
CMatrix build_system_hamiltonian(const Scenario& s);

// The interaction part H_I alone.
CMatrix build_interaction_hamiltonian(const Scenario& s);

// Embedded sigma^-_{i,n} (and friends) on the system space.
CMatrix site_sigma_minus(const Scenario& s, Bath b, int n);
CMatrix site_sigma_plus(const Scenario& s, Bath b, int n);
CMatrix site_sigma_z(const Scenario& s, Bath b, int n);

// V_{i,n} = g_{i,n} (sigma+_{i,n} a_i + sigma-_{i,n} a_i^dag) embedded on the
// system (x) E_hot (x) E_cold space, returned in order [h,0..N-1, c,0..N-1].
// Sparse storage: the joint space is large at production cutoffs.
std::vector<SparseCMatrix> build_coupling_ops(const Scenario& s, int cutoff_hot,
                                              int cutoff_cold);

// Cutoffs from the thermal tail policy for each bath.
int policy_cutoff(const Scenario& s, Bath b);

// ------------------------- scenario text format -----------------------------

// Key-value text format with sections [hot], [cold], [interaction], [run];
// grammar documented in the README. Unknown keys are hard errors.
struct RunConfig {
    std::vector<double> taus;
    std::optional<double> grid_lo, grid_hi, grid_step;
    std::vector<std::string> scenarios;  // subset of com1,com2,cas1,cas2,ind1,ind2
    int threads = 0;                     // 0 = library decides
};

struct ParsedConfig {
    Scenario scenario;
    RunConfig run;
    std::vector<std::string> warnings;
};

class ConfigError : public std::runtime_error {
  public:
    ConfigError(int line, const std::string& message);
    int line() const { return line_; }

  private:
    int line_;
};

ParsedConfig parse_config(const std::string& text);
ParsedConfig parse_config_file(const std::string& path);
std::string render_config(const Scenario& s, const RunConfig* run = nullptr);

// The six standard scenario tags com1, com2, cas1, cas2, ind1, ind2: the
// prefix picks the dissipation mode, the suffix the interaction variant
// (1 = all_to_all, 2 = pairwise). Strengths are taken from the base spec.
Scenario scenario_variant(const Scenario& base, const std::string& tag);
const std::vector<std::string>& all_scenario_tags();

}  // namespace qtm
