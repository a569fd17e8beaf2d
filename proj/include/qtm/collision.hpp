// collision.hpp — discrete collision-model propagator with truncated thermal
// oscillator ancillas, per-collision heat and work ledgers, finite-tau
// currents and tau -> 0 extrapolation against the QME route.

#pragma once

#include "qtm/model.hpp"
#include "qtm/qmat.hpp"

#include <memory>
#include <vector>

namespace qtm {

struct CollisionStep {
    DensityMatrix rho_after;
    double dq_h = 0.0;     // heat released by the hot ancilla this collision
    double dq_c = 0.0;
    double dw = 0.0;       // work injected by the coupling switches
    double tau = 0.0;      // elapsed coarse-grained time of the collision
    double v_before = 0.0; // <sum V> over the pre-collision joint state
};

// One collision cycle as a fixed linear channel on the system state. The
// joint Hamiltonian conserves the total excitation number, so unitaries are
// computed exactly per excitation sector; the channel and the heat/work
// ledger observables are then assembled once and a step is a small
// matrix-vector product.
class CollisionEngine {
  public:
    CollisionEngine(const Scenario& s, double tau);
    ~CollisionEngine();
    CollisionEngine(CollisionEngine&&) noexcept;
    CollisionEngine& operator=(CollisionEngine&&) noexcept;

    CollisionStep step(const DensityMatrix& rho) const;

    // One collision without the heat/work ledger (iteration fast path).
    DensityMatrix advance(const DensityMatrix& rho) const;

    // Channel matrix on column-vectorized system states.
    const CMatrix& channel() const;

    int system_dim() const;
    double tau() const;
    // tau, or N*tau for cascaded scenarios with SubstepSum timing.
    double elapsed_per_sweep() const;

    int cutoff_hot() const;
    int cutoff_cold() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Single collision of the simultaneous (common) model: all sites of an
// ensemble interact with the same fresh thermal ancilla at once.
CollisionStep collide_common(const DensityMatrix& rho, const Scenario& s, double tau);

// Single sweep of the cascaded model: sites interact with the (persisting)
// ancilla one after the other.
CollisionStep collide_cascaded(const DensityMatrix& rho, const Scenario& s, double tau);

struct SteadyCycleResult {
    DensityMatrix rho;
    double w_rate = 0.0, q_h_rate = 0.0, q_c_rate = 0.0;  // per-time currents
    long steps_used = 0;
    bool converged = false;
    double last_delta = 0.0;  // trace-norm change at exit
};

// Iterate the mode-appropriate collision map from a product of local Gibbs
// states until trace-norm stationarity.
SteadyCycleResult run_to_steady(const Scenario& s, double tau, double tol = 1e-10,
                                long max_steps = 200000);

struct TauExtrapolation {
    double w = 0.0, q_h = 0.0, q_c = 0.0;                      // tau -> 0 values
    double residual_w = 0.0, residual_q_h = 0.0, residual_q_c = 0.0;  // fit residuals
    std::vector<double> taus;
    std::vector<SteadyCycleResult> runs;
};

// Linear-in-tau extrapolation of the steady-cycle currents to tau -> 0.
// Requires at least three distinct tau values; throws if any run fails to
// converge.
TauExtrapolation tau_extrapolate(const Scenario& s, const std::vector<double>& taus);

}  // namespace qtm
