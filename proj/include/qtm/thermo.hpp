// thermo.hpp — closed-form steady-state thermodynamics: local/non-local heat
// and work currents, the double-commutator oracle route, coherence-related
// quantities, and machine-regime analysis.

#pragma once

#include "qtm/model.hpp"
#include "qtm/qmat.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace qtm {

// Steady-state currents in units of omega_c^2, positive into the system.
struct Currents {
    double w_loc = 0.0, w_nonloc = 0.0;
    double q_h_loc = 0.0, q_h_nonloc = 0.0;
    double q_c_loc = 0.0, q_c_nonloc = 0.0;

    double w() const { return w_loc + w_nonloc; }
    double q_h() const { return q_h_loc + q_h_nonloc; }
    double q_c() const { return q_c_loc + q_c_nonloc; }

    // |W + Q_h + Q_c|; vanishes at a steady state.
    double first_law_residual() const { return std::abs(w() + q_h() + q_c()); }

    double max_magnitude() const;
};

struct BathPair {
    double hot = 0.0;
    double cold = 0.0;
};

// Q_loc^(i) = omega_i sum_n [gamma+_{nn} <s- s+> - gamma-_{nn} <s+ s->].
BathPair heat_local(const DensityMatrix& rho_ss, const Scenario& s);

// Common: (omega_i/2) sum_{n'!=n} (gamma+_{nn'} - gamma-_{nn'}) <(s+_n s-_n')_+>;
// cascaded: omega_i sum_{n'>n} of the same bracket; independent: exactly 0.
BathPair heat_nonlocal(const DensityMatrix& rho_ss, const Scenario& s);

// Generic F-operator forms with F_{i,n} = [H_I, s-_{i,n}], valid for any N and
// exchange-type H_I.
double work_local(const DensityMatrix& rho_ss, const Scenario& s);
double work_nonlocal(const DensityMatrix& rho_ss, const Scenario& s);

Currents currents(const DensityMatrix& rho_ss, const Scenario& s);

// Independent oracle: currents evaluated directly from the double commutators
// -+1/2 <[V_{i,n'},[V_{i,n}, H_S + H_Ei]]> and +1/2 <[V_{i,n'},[V_{i,n}, H_Ei]]>
// over rho_ss (x) thermal ancillas, with the mode-appropriate index sets
// (n'=n local; n'!=n common; n'>n with unit prefactor and swapped nesting for
// cascaded). Ancilla cutoffs follow a stricter tail bound than the collision
// policy so truncation stays far below the comparison tolerance.
Currents oracle_currents(const DensityMatrix& rho_ss, const Scenario& s);

// sigma = -q_h/T_h - q_c/T_c, non-negative at a physical steady state.
double entropy_production(const Currents& c, const Scenario& s);

// Coherence-related quantities evaluated on a steady state (N = 2 only):
// c_loc from cross-bath pair coherences, c_nonloc from three-operator terms,
// c_nonloc_factored the product-form variant.
struct CoherenceMetrics {
    double c_loc = 0.0;
    double c_nonloc = 0.0;
    double c_nonloc_factored = 0.0;
};

CoherenceMetrics coherence_metrics(const DensityMatrix& rho_ss, const Scenario& s);

// Zero all off-diagonal elements in the product eigenbasis of the free
// Hamiltonian (the computational basis).
DensityMatrix dephased(const DensityMatrix& rho);

enum class Regime { Refrigerator, Engine, Accelerator, Boundary };

const char* to_string(Regime r);

struct RegimeReport {
    Regime regime = Regime::Boundary;
    double figure_of_merit = 0.0;  // eta, COP_A or COP_R from the frequencies
    double carnot_bound = 0.0;     // 1 - T_c/T_h
};

// Sign-based classification with a boundary band: R if (w>eps, q_h<-eps,
// q_c>eps), E if (w<-eps, q_h>eps, q_c<-eps), A if (w>eps, q_h>eps, q_c<-eps).
RegimeReport classify_regime(const Currents& c, const Scenario& s, double eps = 1e-9);

// ------------------------------- sweeps --------------------------------------

struct SweepPoint {
    double ratio = 0.0;  // omega_h / omega_c
    Currents cur;
    CoherenceMetrics coh;
    RegimeReport reg;
    double entropy = 0.0;
    double first_law_residual = 0.0;
    double steady_residual = 0.0;
    bool ok = false;
    std::string error;
};

struct SweepSummary {
    bool has_engine_window = false;
    double eta_max = 0.0;
    double w_at_eta_max = 0.0;   // |W| at the refined maximum
    double ratio_at_max = 0.0;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    SweepSummary summary;
};

// Solve the NESS over a grid of omega_h/omega_c (hot.omega = ratio *
// cold.omega) and locate the efficiency at maximum power by three-point
// parabolic refinement inside the engine window. Per-point failures are
// recorded in the row and do not stop the sweep.
SweepResult sweep_and_optimize(const Scenario& base, double lo, double hi, double step,
                               int threads = 1);

std::vector<double> sweep_grid(double lo, double hi, double step);

}  // namespace qtm
