//! Vanishing-viscosity driver: solves along a decreasing viscosity
//! schedule, measures Cauchy behaviour of the solutions, and certifies the
//! finest solution against the rate-independent stability and energy
//! balance conditions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::history::HistoryAccumulator;
use crate::scalar::{Scalar, ScalarFn};
use crate::scenario::Scenario;
use crate::spatial::Field;
use crate::trajectory::Trajectory;
use crate::verify::compatibility_check;
use crate::viscous::{solve_with, SolveOptions, SolveReport};

/// `ε_k = ε₀ 2^{−k}`, `k = 0..levels`.
pub fn geometric_schedule<T: Scalar>(eps0: T, levels: usize) -> Vec<T> {
    (0..levels).map(|k| eps0 / T::lit(2f64.powi(k as i32))).collect()
}

#[derive(Debug, Clone)]
pub struct LimitCertificate<T> {
    /// Step indices `k` at which the conditions were checked (state `q_{k+1}`).
    pub sampled_steps: Vec<usize>,
    /// Scaled `max_η ⟨−∂_q E, η⟩ − R(H(q), η)` over unit test directions.
    pub stability_violations: Vec<T>,
    /// Scaled `|⟨−∂_q E, q̇⟩ − R(H(q), q̇)| / ‖q̇‖`.
    pub balance_residuals: Vec<T>,
    pub scale: T,
    pub tolerance: T,
    pub pass: bool,
}

impl<T: Scalar> LimitCertificate<T> {
    pub fn max_stability_violation(&self) -> T {
        self.stability_violations.iter().copied().fold(T::zero(), T::max)
    }

    pub fn max_balance_residual(&self) -> T {
        self.balance_residuals.iter().copied().fold(T::zero(), T::max)
    }
}

#[derive(Debug, Clone)]
pub struct VvResult<T> {
    pub eps_schedule: Vec<T>,
    pub trajectories: Vec<Trajectory<T>>,
    pub reports: Vec<SolveReport<T>>,
    /// `‖q_{ε_k} − q_{ε_{k+1}}‖` in the discrete `H¹(0,T;H¹)` norm.
    pub cauchy_h1: Vec<T>,
    /// `‖q_{ε_k} − q_{ε_{k+1}}‖` in the `C([0,T];H¹)` norm.
    pub cauchy_c: Vec<T>,
    /// Finest completed solve, designated as the limit candidate.
    pub limit: Trajectory<T>,
    pub certificate: LimitCertificate<T>,
    /// Whether `ℓ(0) ∈ ∂₂R(y₀, 0)` held.
    pub compatible: bool,
    /// First failing level and its error, if the sweep was cut short.
    pub failure: Option<(usize, Error)>,
}

impl<T: Scalar> VvResult<T> {
    /// Ratios of consecutive C-norm Cauchy differences.
    pub fn cauchy_ratios(&self) -> Vec<T> {
        self.cauchy_c
            .windows(2)
            .map(|w| if w[0] > T::zero() { w[1] / w[0] } else { T::zero() })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VvOptions<T> {
    pub solve: SolveOptions<T>,
    pub n_test_dirs: usize,
    pub tolerance: T,
    pub seed: u64,
}

impl<T: Scalar> Default for VvOptions<T> {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            n_test_dirs: 20,
            tolerance: T::lit(1e-2),
            seed: 0,
        }
    }
}

pub fn vv_sweep<T: Scalar>(scenario: &Scenario<T>, schedule: &[T], opts: &VvOptions<T>) -> Result<VvResult<T>> {
    if schedule.is_empty() {
        return Err(invalid("viscosity schedule is empty"));
    }
    if schedule.iter().any(|&e| !(e > T::zero())) {
        return Err(invalid("viscosities must be positive"));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("viscosity schedule must be strictly decreasing"));
    }
    let compatible = compatibility_check(scenario).compatible;

    let solves: Vec<Result<(Trajectory<T>, SolveReport<T>)>> = schedule
        .par_iter()
        .map(|&eps| solve_with(scenario, eps, &opts.solve))
        .collect();

    let mut trajectories = Vec::new();
    let mut reports = Vec::new();
    let mut failure = None;
    for (k, s) in solves.into_iter().enumerate() {
        match s {
            Ok((t, r)) => {
                trajectories.push(t);
                reports.push(r);
            }
            Err(e) => {
                failure = Some((k, e));
                break;
            }
        }
    }
    if trajectories.is_empty() {
        let (_, e) = failure.expect("no trajectories implies a failure");
        return Err(e);
    }

    let mesh = &scenario.mesh;
    let mut cauchy_h1 = Vec::new();
    let mut cauchy_c = Vec::new();
    for w in trajectories.windows(2) {
        let d = w[0].difference(&w[1])?;
        cauchy_h1.push(d.h1_time_norm(mesh));
        cauchy_c.push(d.c_norm(mesh));
    }
    let limit = trajectories.last().cloned().expect("nonempty");
    let certificate = certify_limit(&limit, scenario, opts.n_test_dirs, opts.tolerance, opts.seed)?;
    Ok(VvResult {
        eps_schedule: schedule[..trajectories.len()].to_vec(),
        trajectories,
        reports,
        cauchy_h1,
        cauchy_c,
        limit,
        certificate,
        compatible,
        failure,
    })
}

/// Checks the rate-independent stability inequality and energy balance
/// along a trajectory, with the history evaluated from the trajectory
/// itself at each sampled time.
pub fn certify_limit<T: Scalar>(
    traj: &Trajectory<T>,
    scenario: &Scenario<T>,
    n_test_dirs: usize,
    tolerance: T,
    seed: u64,
) -> Result<LimitCertificate<T>> {
    let mesh = &scenario.mesh;
    let n = mesh.n_nodes();
    mesh.check(traj.state(0).values(), "trajectory state")?;
    let steps = traj.n_steps();
    let stride = (steps / 200).max(1);
    let spec = &scenario.dissipation;

    let loads = scenario.load_samples();
    let scale = T::one().max(loads.c_norm(mesh) + scenario.alpha * traj.c_norm(mesh));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = if spec.is_fatigue() { 0.0 } else { -1.0 };

    let mut history = HistoryAccumulator::new(&scenario.kernel, traj.time_step());
    history.step(traj.state(0).clone())?;
    let mut sampled_steps = Vec::new();
    let mut stability_violations = Vec::new();
    let mut balance_residuals = Vec::new();
    for k in 0..steps {
        let zeta = history.step(traj.state(k + 1).clone())?.clone();
        if k % stride != 0 && k + 1 != steps {
            continue;
        }
        let t = traj.time(k + 1);
        let force = scenario.driving_force(t, traj.state(k + 1));
        let threshold = spec.threshold(mesh, &zeta);

        let mut worst = T::zero();
        let mut test = |eta: &Field<T>| {
            let norm = mesh.h1_norm(eta);
            if norm > T::zero() {
                if let Some(r) = spec.eval_with_threshold(&threshold, eta).finite() {
                    worst = worst.max((force.pair(eta) - r) / norm);
                }
            }
        };
        for i in 0..n {
            let mut e = Field::zeros(n);
            e.values_mut()[i] = T::one();
            test(&e);
            if !spec.is_fatigue() {
                test(&e.scaled(-T::one()));
            }
        }
        for _ in 0..n_test_dirs {
            let v = Field::new((0..n).map(|_| T::lit(rng.gen_range(lo..1.0))).collect());
            test(&v);
        }

        let rate = traj.rate(k);
        let rate_norm = mesh.h1_norm(&rate);
        let balance = match spec.eval_with_threshold(&threshold, &rate).finite() {
            Some(r) if rate_norm > T::zero() => (force.pair(&rate) - r).abs() / (rate_norm * scale),
            Some(_) => T::zero(),
            None => T::infinity(),
        };
        sampled_steps.push(k);
        stability_violations.push(worst / scale);
        balance_residuals.push(balance);
    }
    let pass =
        stability_violations.iter().all(|&v| v <= tolerance) && balance_residuals.iter().all(|&v| v <= tolerance);
    Ok(LimitCertificate {
        sampled_steps,
        stability_violations,
        balance_residuals,
        scale,
        tolerance,
        pass,
    })
}

/// Solves the problem and its time-reparametrized version `ℓ∘φ` on
/// `[0, new_horizon]` with the same number of steps, and returns
/// `max_i ‖q̃(s_i) − q(φ(s_i))‖_{H¹}`.
///
/// The history operator itself is not reparametrization invariant, so the
/// comparison is meaningful for thresholds that do not depend on the
/// history.
pub fn check_rate_independence<T: Scalar>(
    scenario: &Scenario<T>,
    epsilon: T,
    map: &ScalarFn<T>,
    new_horizon: T,
    opts: &SolveOptions<T>,
) -> Result<T> {
    if !(new_horizon > T::zero()) {
        return Err(invalid("reparametrized horizon must be positive"));
    }
    let n_steps = scenario.n_steps;
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
    if map.call(T::zero()).abs() > tol * scenario.horizon {
        return Err(invalid("time map must satisfy φ(0) = 0"));
    }
    let fine = 4 * n_steps;
    let mut prev = map.call(T::zero());
    for i in 1..=fine {
        let s = new_horizon * T::from_count(i) / T::from_count(fine);
        let v = map.call(s);
        if !(v > prev) {
            return Err(invalid(format!("time map is not strictly increasing near s = {s}")));
        }
        prev = v;
    }
    if prev > scenario.horizon * (T::one() + tol) {
        return Err(invalid("time map leaves the original horizon"));
    }

    let reparam = Scenario {
        load: scenario.load.reparametrized(map.clone()),
        horizon: new_horizon,
        ..scenario.clone()
    };
    let (original, warped) = rayon::join(
        || solve_with(scenario, epsilon, opts),
        || solve_with(&reparam, epsilon, opts),
    );
    let ((original, _), (warped, _)) = (original?, warped?);
    let mesh = &scenario.mesh;
    let gap = (0..=n_steps)
        .map(|i| {
            let s = warped.time(i);
            mesh.h1_norm(&(warped.state(i) - &original.at(map.call(s))))
        })
        .fold(T::zero(), T::max);
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipation::DissipationSpec;

    #[test]
    fn schedule_halves() {
        let s = geometric_schedule(0.1, 4);
        assert_eq!(s, vec![0.1, 0.05, 0.025, 0.0125]);
    }

    #[test]
    fn zero_load_sweep_is_identically_zero() {
        let s = Scenario::homogeneous(
            3,
            1.0,
            ScalarFn::constant(0.0),
            DissipationSpec::constant_fatigue(1.0),
            1.0,
            50,
        )
        .unwrap();
        let r = vv_sweep(&s, &geometric_schedule(0.1, 3), &VvOptions::default()).unwrap();
        assert!(r.cauchy_c.iter().all(|&d| d == 0.0));
        assert!(r.cauchy_h1.iter().all(|&d| d == 0.0));
        assert!(r.certificate.pass);
        assert_eq!(r.certificate.max_balance_residual(), 0.0);
    }

    #[test]
    fn rejects_non_decreasing_schedule() {
        let s = Scenario::homogeneous(
            3,
            1.0,
            ScalarFn::constant(0.0),
            DissipationSpec::constant_fatigue(1.0),
            1.0,
            5,
        )
        .unwrap();
        assert!(vv_sweep(&s, &[0.1, 0.1], &VvOptions::default()).is_err());
        assert!(vv_sweep(&s, &[], &VvOptions::default()).is_err());
    }

    #[test]
    fn rejects_non_monotone_time_map() {
        let s = Scenario::homogeneous(
            3,
            1.0,
            ScalarFn::new(|t: f64| t),
            DissipationSpec::constant_fatigue(1.0),
            1.0,
            10,
        )
        .unwrap();
        let bad = ScalarFn::new(|t: f64| (t - 0.5).powi(2) - 0.25);
        assert!(check_rate_independence(&s, 0.1, &bad, 1.0, &SolveOptions::default()).is_err());
        let shifted = ScalarFn::new(|t: f64| t + 0.1);
        assert!(check_rate_independence(&s, 0.1, &shifted, 0.5, &SolveOptions::default()).is_err());
    }
}
