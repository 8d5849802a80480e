//! Time stepping of the viscous inclusion
//! `−∂_q E(t, q) ∈ ∂₂R(H(q)(t), q̇) + ε V q̇`, `q(0) = 0`.
//!
//! The default integrator is incremental minimization with the history
//! frozen at the start of each step:
//!
//! ```text
//! q_{n+1} = argmin_q E(t_{n+1}, q) + τ R(ζ_n, (q − q_n)/τ) + ε/(2τ) ‖q − q_n‖²_{H¹}.
//! ```
//!
//! Writing `q = q_n + τη` this is the rate problem of
//! [`DissipationSpec::prox_rate`] with curvature `ε + ατ` and force
//! `ℓ(t_{n+1}) − αV q_n`. The explicit projection integrator is kept as an
//! independent cross-check.

use crate::dissipation::{DissipationSpec, ProxOptions};
use crate::error::{invalid, Error, Result};
use crate::history::HistoryAccumulator;
use crate::scalar::Scalar;
use crate::scenario::Scenario;
use crate::spatial::{DualField, Field};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Semi-implicit incremental minimization.
    Implicit,
    /// Forward Euler on the projection form `q̇ = ε⁻¹ V⁻¹ (𝕀 − P)(−∂_q E)`.
    /// Stable only for `ατ/ε < 2`.
    Explicit,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions<T> {
    pub integrator: Integrator,
    /// Start each inner solve from the previous rate instead of zero.
    pub warm_start: bool,
    pub prox: ProxOptions<T>,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            integrator: Integrator::Implicit,
            warm_start: true,
            prox: ProxOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome<T> {
    pub state: Field<T>,
    pub rate: Field<T>,
    pub iterations: usize,
}

/// Per-run diagnostics. Per-step arrays have one entry per time step.
#[derive(Debug, Clone, Default)]
pub struct SolveReport<T> {
    /// Relative violation of `⟨φ, q̇⟩ = R(ζ, q̇)` with `φ = −∂_q E − εVq̇`.
    pub energy_balance_residuals: Vec<T>,
    /// `max_v ⟨φ, v⟩ − R(ζ, v)` over the nodal generators of `dom R`.
    pub polar_violations: Vec<T>,
    pub dissipation_values: Vec<T>,
    /// `E(t_{k+1}, q_{k+1})`.
    pub energies: Vec<T>,
    pub inner_iterations: Vec<usize>,
    pub max_rate_norm: T,
    pub trajectory_h1_norm: T,
}

impl<T: Scalar> SolveReport<T> {
    pub fn max_balance_residual(&self) -> T {
        self.energy_balance_residuals.iter().copied().fold(T::zero(), T::max)
    }

    pub fn max_polar_violation(&self) -> T {
        self.polar_violations.iter().copied().fold(T::zero(), T::max)
    }
}

fn check_step_inputs<T: Scalar>(scenario: &Scenario<T>, q: &Field<T>, zeta: &Field<T>) -> Result<()> {
    scenario.mesh.check(q.values(), "state")?;
    scenario.mesh.check(zeta.values(), "history value")?;
    if !q.is_finite() {
        return Err(invalid("state is not finite"));
    }
    Ok(())
}

/// One incremental-minimization step from `q_n` to `t_next`.
pub fn viscous_step<T: Scalar>(
    scenario: &Scenario<T>,
    epsilon: T,
    q_n: &Field<T>,
    zeta_n: &Field<T>,
    t_next: T,
    warm_start: Option<&Field<T>>,
    opts: &ProxOptions<T>,
) -> Result<StepOutcome<T>> {
    if !(epsilon >= T::zero()) {
        return Err(invalid(format!("viscosity must be nonnegative, got {epsilon}")));
    }
    check_step_inputs(scenario, q_n, zeta_n)?;
    let tau = scenario.time_step();
    let force = scenario.driving_force(t_next, q_n);
    let out = scenario.dissipation.prox_rate(
        &scenario.mesh,
        zeta_n,
        &force,
        epsilon + scenario.alpha * tau,
        warm_start,
        opts,
    )?;
    let mut state = q_n.clone();
    state.axpy(tau, &out.rate);
    Ok(StepOutcome {
        state,
        rate: out.rate,
        iterations: out.iterations,
    })
}

/// One forward-Euler step of the projection form, evaluated at `(t_n, q_n)`.
pub fn explicit_projection_step<T: Scalar>(
    scenario: &Scenario<T>,
    epsilon: T,
    q_n: &Field<T>,
    zeta_n: &Field<T>,
    t_n: T,
    opts: &ProxOptions<T>,
) -> Result<StepOutcome<T>> {
    if !(epsilon > T::zero()) {
        return Err(invalid(format!(
            "explicit integrator needs positive viscosity, got {epsilon}"
        )));
    }
    check_step_inputs(scenario, q_n, zeta_n)?;
    let mesh = &scenario.mesh;
    let omega = scenario.driving_force(t_n, q_n);
    let projected = scenario
        .dissipation
        .project_subdiff_zero(mesh, zeta_n, &omega, &opts.qp)?;
    let rate = mesh.riesz_solve(&(&omega - &projected)).scaled(T::one() / epsilon);
    let mut state = q_n.clone();
    state.axpy(scenario.time_step(), &rate);
    Ok(StepOutcome {
        state,
        rate,
        iterations: 1,
    })
}

/// Relative violation of the energy–dissipation identity and the polar
/// violation for a force `phi` and rate `rate`.
pub(crate) fn step_identity_residuals<T: Scalar>(
    spec: &DissipationSpec<T>,
    threshold: &DualField<T>,
    phi: &DualField<T>,
    rate: &Field<T>,
) -> (T, T, T) {
    let work = phi.pair(rate);
    let r = spec
        .eval_with_threshold(threshold, rate)
        .finite()
        .unwrap_or(T::infinity());
    let balance = (work - r).abs() / (T::one() + work.abs() + r.abs());
    let polar = phi
        .values()
        .iter()
        .zip(threshold.values())
        .map(|(&p, &c)| if spec.is_fatigue() { p - c } else { p.abs() - c })
        .fold(T::zero(), T::max);
    (balance, polar, r)
}

pub fn solve_viscous<T: Scalar>(scenario: &Scenario<T>, epsilon: T) -> Result<(Trajectory<T>, SolveReport<T>)> {
    solve_with(scenario, epsilon, &SolveOptions::default())
}

pub fn solve_with<T: Scalar>(
    scenario: &Scenario<T>,
    epsilon: T,
    opts: &SolveOptions<T>,
) -> Result<(Trajectory<T>, SolveReport<T>)> {
    if !(epsilon > T::zero()) || !epsilon.is_finite() {
        return Err(invalid(format!("viscosity must be positive, got {epsilon}")));
    }
    let mesh = &scenario.mesh;
    let n = mesh.n_nodes();
    let tau = scenario.time_step();
    let steps = scenario.n_steps;

    let mut traj = Trajectory::new(tau, vec![Field::zeros(n)])?;
    let mut history = HistoryAccumulator::new(&scenario.kernel, tau);
    history.step(Field::zeros(n))?;

    let mut report = SolveReport {
        energy_balance_residuals: Vec::with_capacity(steps),
        polar_violations: Vec::with_capacity(steps),
        dissipation_values: Vec::with_capacity(steps),
        energies: Vec::with_capacity(steps),
        inner_iterations: Vec::with_capacity(steps),
        max_rate_norm: T::zero(),
        trajectory_h1_norm: T::zero(),
    };
    let mut q = Field::zeros(n);
    let mut last_rate: Option<Field<T>> = None;

    for k in 0..steps {
        let zeta = history.value().clone();
        let (t_k, t_next) = (scenario.time(k), scenario.time(k + 1));
        let warm = if opts.warm_start { last_rate.as_ref() } else { None };
        let step = match opts.integrator {
            Integrator::Implicit => viscous_step(scenario, epsilon, &q, &zeta, t_next, warm, &opts.prox),
            Integrator::Explicit => explicit_projection_step(scenario, epsilon, &q, &zeta, t_k, &opts.prox),
        }
        .map_err(|e| match e {
            Error::NumericalFailure {
                context,
                residual,
                iterations,
            } => Error::NumericalFailure {
                context: format!("{context} (time step {k}, t = {t_next})"),
                residual,
                iterations,
            },
            other => other,
        })?;
        if !step.state.is_finite() {
            return Err(Error::NumericalFailure {
                context: format!("state blew up at time step {k}"),
                residual: f64::INFINITY,
                iterations: 0,
            });
        }

        let force = match opts.integrator {
            Integrator::Implicit => scenario.driving_force(t_next, &step.state),
            Integrator::Explicit => scenario.driving_force(t_k, &q),
        };
        let mut phi = force;
        phi.axpy(-epsilon, &mesh.riesz_apply(&step.rate));
        let threshold = scenario.dissipation.threshold(mesh, &zeta);
        let (balance, polar, r) = step_identity_residuals(&scenario.dissipation, &threshold, &phi, &step.rate);
        report.energy_balance_residuals.push(balance);
        report.polar_violations.push(polar);
        report.dissipation_values.push(r);
        report.energies.push(scenario.energy(t_next, &step.state));
        report.inner_iterations.push(step.iterations);
        report.max_rate_norm = report.max_rate_norm.max(mesh.h1_norm(&step.rate));

        q = step.state;
        history.step(q.clone())?;
        traj.push(q.clone());
        last_rate = Some(step.rate);
    }
    report.trajectory_h1_norm = traj.h1_time_norm(mesh);
    Ok((traj, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ScalarFn;

    #[test]
    fn zero_load_stays_at_rest() {
        let s = Scenario::homogeneous(
            4,
            1.0,
            ScalarFn::constant(0.0),
            DissipationSpec::constant_fatigue(0.5),
            1.0,
            20,
        )
        .unwrap();
        let zeta = Field::zeros(4);
        let step = viscous_step(&s, 0.1, &Field::zeros(4), &zeta, 0.05, None, &ProxOptions::default()).unwrap();
        assert_eq!(step.state, Field::zeros(4));
        let (traj, report) = solve_viscous(&s, 0.1).unwrap();
        assert!(traj.states().iter().all(|q| q.norm_inf() == 0.0));
        assert_eq!(report.energy_balance_residuals.len(), 20);
    }

    #[test]
    fn rejects_nonpositive_viscosity() {
        let s = Scenario::homogeneous(
            3,
            1.0,
            ScalarFn::constant(0.0),
            DissipationSpec::constant_fatigue(1.0),
            1.0,
            5,
        )
        .unwrap();
        assert!(solve_viscous(&s, 0.0).is_err());
        assert!(solve_viscous(&s, -1.0).is_err());
    }

    #[test]
    fn explicit_step_is_zero_inside_subdifferential() {
        let s = Scenario::homogeneous(
            3,
            1.0,
            ScalarFn::constant(0.5),
            DissipationSpec::constant_fatigue(1.0),
            1.0,
            10,
        )
        .unwrap();
        let step = explicit_projection_step(
            &s,
            0.1,
            &Field::zeros(3),
            &Field::zeros(3),
            0.0,
            &ProxOptions::default(),
        )
        .unwrap();
        assert!(step.rate.norm_inf() < 1e-12);
    }
}
