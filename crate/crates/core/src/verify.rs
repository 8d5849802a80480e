//! Numerical experiments for the stability statements: compatibility of
//! the initial load, ε-uniform bounds, Lipschitz dependence on the load,
//! uniqueness across integrators, the history-Lipschitz estimate and the
//! primal–dual equivalence of the rate inclusion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::history::{history_derivative, history_eval, HistoryAccumulator};
use crate::scalar::{Scalar, ScalarFn};
use crate::scenario::{LoadSpec, LoadTerm, Scenario};
use crate::spatial::{DualField, Field};
use crate::trajectory::Trajectory;
use crate::viscous::{solve_with, Integrator, SolveOptions};

#[derive(Debug, Clone)]
pub struct CompatibilityCertificate<T> {
    pub compatible: bool,
    /// Nodes where `ℓ(0)` exceeds the threshold `∂₂R(y₀, 0)`.
    pub violating_nodes: Vec<usize>,
    pub max_violation: T,
    pub tolerance: T,
}

/// Checks `ℓ(0) ∈ ∂₂R(y₀, 0)` on the assembled dual coefficients.
pub fn compatibility_check<T: Scalar>(scenario: &Scenario<T>) -> CompatibilityCertificate<T> {
    let mesh = &scenario.mesh;
    let y0 = &scenario.kernel.y0;
    let l0 = scenario.load_at(T::zero());
    let threshold = scenario.dissipation.threshold(mesh, y0);
    let tolerance =
        T::lit(1e-10).max(T::epsilon() * T::lit(1e3)) * T::one().max(threshold.norm_inf()).max(l0.norm_inf());
    let m = scenario.dissipation.subdiff_zero_contains(mesh, y0, &l0, tolerance);
    CompatibilityCertificate {
        compatible: m.contained,
        violating_nodes: m.violating_nodes,
        max_violation: m.max_violation,
        tolerance,
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig<T> {
    pub base: Scenario<T>,
    /// Cap `M̂` on `‖ℓ‖_{H¹(0,T;Y*)}` for every generated load.
    pub load_cap: T,
    pub eps_list: Vec<T>,
    pub n_loads: usize,
    pub n_pairs: usize,
    /// Number of spatial cosine modes per load term.
    pub n_modes: usize,
    /// Range of the relative perturbation size in Lipschitz pairs.
    pub perturbation: (T, T),
    pub seed: u64,
    pub solve: SolveOptions<T>,
}

impl<T: Scalar> ExperimentConfig<T> {
    pub fn new(base: Scenario<T>) -> Self {
        Self {
            base,
            load_cap: T::lit(10.0),
            eps_list: vec![T::lit(1e-1), T::lit(1e-2), T::lit(1e-3), T::lit(1e-4)],
            n_loads: 10,
            n_pairs: 20,
            n_modes: 3,
            perturbation: (T::lit(0.05), T::lit(0.3)),
            seed: 0,
            solve: SolveOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.load_cap > T::zero()) {
            return Err(invalid("load cap must be positive"));
        }
        if self.eps_list.is_empty() || self.eps_list.iter().any(|&e| !(e > T::zero())) {
            return Err(invalid("experiment needs a nonempty list of positive viscosities"));
        }
        let (lo, hi) = self.perturbation;
        if !(lo > T::zero() && hi >= lo) {
            return Err(invalid("perturbation range must satisfy 0 < lo ≤ hi"));
        }
        Ok(())
    }
}

/// `ℓ(t) = Σᵢ aᵢ sin(bᵢπt) M φᵢ` with `φᵢ = c₀ + Σ_k c_k cos(kπx/L)`,
/// rescaled so that `‖ℓ‖_{H¹(0,T;Y*)} = target`. Vanishes at `t = 0`.
pub fn random_load<T: Scalar>(scenario: &Scenario<T>, rng: &mut ChaCha8Rng, n_modes: usize, target: T) -> LoadSpec<T> {
    let mesh = &scenario.mesh;
    let length = mesh.length();
    let n_terms = 2;
    let mut terms = Vec::with_capacity(n_terms);
    for _ in 0..n_terms {
        let a = rng.gen_range(0.5..1.5);
        let b = rng.gen_range(0.5..2.5);
        let c0 = rng.gen_range(0.5..1.5);
        let cs: Vec<f64> = (0..n_modes).map(|_| rng.gen_range(-0.4..0.4)).collect();
        let density = mesh.field_from_fn(|x| {
            let x = x.to_f64_lossy() / length.to_f64_lossy();
            let v = c0
                + cs.iter()
                    .enumerate()
                    .map(|(k, c)| c * ((k + 1) as f64 * std::f64::consts::PI * x).cos())
                    .sum::<f64>();
            T::lit(v)
        });
        let amplitude = ScalarFn::new(move |t: T| T::lit(a * (b * std::f64::consts::PI * t.to_f64_lossy()).sin()));
        terms.push(LoadTerm { amplitude, density });
    }
    rescale(scenario, LoadSpec::Separable(terms), target)
}

fn rescale<T: Scalar>(scenario: &Scenario<T>, load: LoadSpec<T>, target: T) -> LoadSpec<T> {
    let norm = scenario.with_load(load.clone()).load_samples().h1_norm(&scenario.mesh);
    if !(norm > T::zero()) {
        return load;
    }
    let s = target / norm;
    match load {
        LoadSpec::Separable(terms) => LoadSpec::Separable(
            terms
                .into_iter()
                .map(|t| LoadTerm {
                    amplitude: t.amplitude,
                    density: t.density.scaled(s),
                })
                .collect(),
        ),
        other => other,
    }
}

fn concat<T: Scalar>(a: &LoadSpec<T>, b: &LoadSpec<T>) -> LoadSpec<T> {
    match (a, b) {
        (LoadSpec::Separable(x), LoadSpec::Separable(y)) => LoadSpec::Separable(x.iter().chain(y).cloned().collect()),
        _ => unreachable!("random loads are separable"),
    }
}

fn generate_loads<T: Scalar>(config: &ExperimentConfig<T>) -> Vec<LoadSpec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.n_loads)
        .map(|_| {
            let u = T::lit(rng.gen_range(0.5..1.0));
            random_load(&config.base, &mut rng, config.n_modes, config.load_cap * u)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BoundRow<T> {
    pub load_index: usize,
    pub epsilon: T,
    pub state_norm: T,
    pub load_norm: T,
    pub ratio: T,
}

#[derive(Debug, Clone)]
pub struct BoundTable<T> {
    pub rows: Vec<BoundRow<T>>,
    /// Per load, `max_ε ratio / min_ε ratio`.
    pub variations: Vec<T>,
    pub max_variation: T,
    pub skipped_loads: Vec<usize>,
}

/// Ratio `‖q_ε‖_{H¹(0,T;Y)} / ‖ℓ‖_{H¹(0,T;Y*)}` over a random load family and
/// the configured viscosities.
pub fn uniform_bound_experiment<T: Scalar>(config: &ExperimentConfig<T>) -> Result<BoundTable<T>> {
    config.validate()?;
    let loads = generate_loads(config);
    bound_table(config, &loads)
}

/// Same as [`uniform_bound_experiment`] on an explicit list of loads.
pub fn bound_table<T: Scalar>(config: &ExperimentConfig<T>, loads: &[LoadSpec<T>]) -> Result<BoundTable<T>> {
    let mesh = &config.base.mesh;
    let cells: Vec<(usize, usize)> = (0..loads.len())
        .flat_map(|l| (0..config.eps_list.len()).map(move |e| (l, e)))
        .collect();
    let rows: Vec<Option<BoundRow<T>>> = cells
        .par_iter()
        .map(|&(l, e)| -> Result<Option<BoundRow<T>>> {
            let scenario = config.base.with_load(loads[l].clone());
            let load_norm = scenario.load_samples().h1_norm(mesh);
            if !(load_norm > T::zero()) {
                return Ok(None);
            }
            let eps = config.eps_list[e];
            let (traj, _) = solve_with(&scenario, eps, &config.solve)?;
            let state_norm = traj.h1_time_norm(mesh);
            Ok(Some(BoundRow {
                load_index: l,
                epsilon: eps,
                state_norm,
                load_norm,
                ratio: state_norm / load_norm,
            }))
        })
        .collect::<Result<_>>()?;

    let mut skipped_loads = Vec::new();
    let mut variations = Vec::new();
    let kept: Vec<BoundRow<T>> = rows.into_iter().flatten().collect();
    for l in 0..loads.len() {
        let ratios: Vec<T> = kept.iter().filter(|r| r.load_index == l).map(|r| r.ratio).collect();
        if ratios.is_empty() {
            skipped_loads.push(l);
            continue;
        }
        let hi = ratios.iter().copied().fold(T::zero(), T::max);
        let lo = ratios.iter().copied().fold(T::infinity(), T::min);
        variations.push(if lo > T::zero() {
            hi / lo
        } else if hi > T::zero() {
            T::infinity()
        } else {
            T::one()
        });
    }
    let max_variation = variations.iter().copied().fold(T::one(), T::max);
    Ok(BoundTable {
        rows: kept,
        variations,
        max_variation,
        skipped_loads,
    })
}

#[derive(Debug, Clone)]
pub struct LipschitzRow<T> {
    pub pair_index: usize,
    pub epsilon: T,
    /// `max_t ‖q₁ − q₂‖_{H¹}`.
    pub state_gap: T,
    /// `‖ℓ₁ − ℓ₂‖_{W^{1,1}(0,T;Y*)}`.
    pub load_gap: T,
    pub ratio: T,
}

#[derive(Debug, Clone)]
pub struct LipschitzTable<T> {
    pub rows: Vec<LipschitzRow<T>>,
    /// `(ε, max over pairs of the ratio)`.
    pub per_eps_max: Vec<(T, T)>,
    /// `max_ε / min_ε` of the per-ε maxima.
    pub variation: T,
    pub all_finite: bool,
}

/// Random pairs `ℓ₂ = ℓ₁ + ρδ` under the load cap, solved at every
/// configured viscosity.
pub fn lipschitz_experiment<T: Scalar>(config: &ExperimentConfig<T>) -> Result<LipschitzTable<T>> {
    config.validate()?;
    let spec = &config.base.dissipation;
    if !spec.is_fatigue() || spec.kappa_prime().is_none() {
        return Err(invalid(
            "Lipschitz experiment needs a fatigue dissipation with kappa_prime",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (rho_lo, rho_hi) = (
        config.perturbation.0.to_f64_lossy(),
        config.perturbation.1.to_f64_lossy(),
    );
    let cap = config.load_cap;
    let pairs: Vec<(LoadSpec<T>, LoadSpec<T>)> = (0..config.n_pairs)
        .map(|_| {
            let u = T::lit(rng.gen_range(0.5..1.0));
            let base = random_load(&config.base, &mut rng, config.n_modes, cap * u * T::lit(1.0 - rho_hi));
            let rho = T::lit(if rho_hi > rho_lo {
                rng.gen_range(rho_lo..rho_hi)
            } else {
                rho_lo
            });
            let delta = random_load(&config.base, &mut rng, config.n_modes, cap * rho);
            let other = concat(&base, &delta);
            (base, other)
        })
        .collect();
    lipschitz_table(config, &pairs)
}

/// Same as [`lipschitz_experiment`] on explicit load pairs.
pub fn lipschitz_table<T: Scalar>(
    config: &ExperimentConfig<T>,
    pairs: &[(LoadSpec<T>, LoadSpec<T>)],
) -> Result<LipschitzTable<T>> {
    let mesh = &config.base.mesh;
    let cells: Vec<(usize, usize)> = (0..pairs.len())
        .flat_map(|p| (0..config.eps_list.len()).map(move |e| (p, e)))
        .collect();
    let rows: Vec<LipschitzRow<T>> = cells
        .par_iter()
        .map(|&(p, e)| -> Result<LipschitzRow<T>> {
            let eps = config.eps_list[e];
            let s1 = config.base.with_load(pairs[p].0.clone());
            let s2 = config.base.with_load(pairs[p].1.clone());
            let load_gap = s1.load_samples().difference(&s2.load_samples()).w11_norm(mesh);
            let (q1, _) = solve_with(&s1, eps, &config.solve)?;
            let (q2, _) = solve_with(&s2, eps, &config.solve)?;
            let state_gap = q1.difference(&q2)?.c_norm(mesh);
            let ratio = if load_gap > T::zero() {
                state_gap / load_gap
            } else if state_gap > T::zero() {
                T::infinity()
            } else {
                T::zero()
            };
            Ok(LipschitzRow {
                pair_index: p,
                epsilon: eps,
                state_gap,
                load_gap,
                ratio,
            })
        })
        .collect::<Result<_>>()?;
    let per_eps_max: Vec<(T, T)> = config
        .eps_list
        .iter()
        .map(|&eps| {
            let m = rows
                .iter()
                .filter(|r| r.epsilon == eps)
                .map(|r| r.ratio)
                .fold(T::zero(), T::max);
            (eps, m)
        })
        .collect();
    let hi = per_eps_max.iter().map(|p| p.1).fold(T::zero(), T::max);
    let lo = per_eps_max.iter().map(|p| p.1).fold(T::infinity(), T::min);
    let variation = if lo > T::zero() {
        hi / lo
    } else if hi > T::zero() {
        T::infinity()
    } else {
        T::one()
    };
    let all_finite = rows.iter().all(|r| r.ratio.is_finite());
    Ok(LipschitzTable {
        rows,
        per_eps_max,
        variation,
        all_finite,
    })
}

#[derive(Debug, Clone)]
pub struct UniquenessReport<T> {
    /// `(ε, max pairwise C-norm gap)` between the integrator variants.
    pub gaps: Vec<(T, T)>,
    pub max_gap: T,
    /// Explicit substeps per coarse step.
    pub explicit_substeps: usize,
}

/// Solves each viscosity with implicit warm-started, implicit cold-started
/// and explicit projection integrators and reports the largest pairwise
/// `C([0,T];H¹)` gap. The explicit variant runs on a refined grid with
/// `ατ/ε ≤ 0.1` and is subsampled back.
pub fn uniqueness_probe<T: Scalar>(
    scenario: &Scenario<T>,
    eps_list: &[T],
    base: &SolveOptions<T>,
) -> Result<UniquenessReport<T>> {
    if eps_list.is_empty() {
        return Err(invalid("uniqueness probe needs at least one viscosity"));
    }
    let mesh = &scenario.mesh;
    let tau = scenario.time_step();
    let eps_min = eps_list.iter().copied().fold(T::infinity(), T::min);
    if !(eps_min > T::zero()) {
        return Err(invalid("viscosities must be positive"));
    }
    let substeps = (T::lit(10.0) * scenario.alpha * tau / eps_min)
        .ceil()
        .to_f64_lossy()
        .max(1.0) as usize;
    if substeps.saturating_mul(scenario.n_steps) > 20_000_000 {
        return Err(invalid("explicit variant would need more than 2e7 steps"));
    }
    let gaps: Vec<(T, T)> = eps_list
        .par_iter()
        .map(|&eps| -> Result<(T, T)> {
            let warm = SolveOptions {
                integrator: Integrator::Implicit,
                warm_start: true,
                ..*base
            };
            let cold = SolveOptions {
                warm_start: false,
                ..warm
            };
            let explicit = SolveOptions {
                integrator: Integrator::Explicit,
                ..warm
            };
            let m = (T::lit(10.0) * scenario.alpha * tau / eps)
                .ceil()
                .to_f64_lossy()
                .max(1.0) as usize;
            let fine = scenario.with_steps(scenario.n_steps * m);
            let (a, _) = solve_with(scenario, eps, &warm)?;
            let (b, _) = solve_with(scenario, eps, &cold)?;
            let (c, _) = solve_with(&fine, eps, &explicit)?;
            let c = c.subsample(m);
            let gap = [a.difference(&b)?, a.difference(&c)?, b.difference(&c)?]
                .iter()
                .map(|d| d.c_norm(mesh))
                .fold(T::zero(), T::max);
            Ok((eps, gap))
        })
        .collect::<Result<_>>()?;
    let max_gap = gaps.iter().map(|g| g.1).fold(T::zero(), T::max);
    Ok(UniquenessReport {
        gaps,
        max_gap,
        explicit_substeps: substeps,
    })
}

#[derive(Debug, Clone)]
pub struct HistoryLipschitzRow<T> {
    pub s_index: usize,
    pub t_index: usize,
    /// Central difference of `s ↦ R(H(y)(s), ẏ(t))`.
    pub slope: T,
    /// `L_R ‖d/ds H(y)(s)‖_{L²} ‖ẏ(t)‖_{H¹}`.
    pub bound: T,
    pub excess: T,
}

#[derive(Debug, Clone)]
pub struct HistoryLipschitzTable<T> {
    pub rows: Vec<HistoryLipschitzRow<T>>,
    pub max_excess: T,
    /// Samples whose rate is outside `dom R`.
    pub skipped: usize,
}

/// Samples interior `s` and rate intervals `t` and compares the slope of
/// the dissipation along the history with its Lipschitz bound.
pub fn history_lipschitz_check<T: Scalar>(
    traj: &Trajectory<T>,
    scenario: &Scenario<T>,
    n_samples: usize,
    seed: u64,
) -> Result<HistoryLipschitzTable<T>> {
    let steps = traj.n_steps();
    if steps < 2 {
        return Err(invalid("history check needs at least two time steps"));
    }
    let mesh = &scenario.mesh;
    let spec = &scenario.dissipation;
    let lip = spec.lipschitz_constant();
    let tau = traj.time_step();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut skipped = 0;
    for _ in 0..n_samples {
        let s = rng.gen_range(1..steps);
        let t = rng.gen_range(0..steps);
        let rate = traj.rate(t);
        if !spec.in_domain(&rate) {
            skipped += 1;
            continue;
        }
        let r_at = |i: usize| -> Result<T> {
            let zeta = history_eval(&scenario.kernel, traj, i)?;
            Ok(spec.eval(mesh, &zeta, &rate).finite().expect("rate in domain"))
        };
        let slope = (r_at(s + 1)? - r_at(s - 1)?) / (T::lit(2.0) * tau);
        let d = history_derivative(&scenario.kernel, traj, s)?;
        let bound = lip * mesh.l2_norm(&d) * mesh.h1_norm(&rate);
        rows.push(HistoryLipschitzRow {
            s_index: s,
            t_index: t,
            slope,
            bound,
            excess: (slope.abs() - bound).max(T::zero()),
        });
    }
    let max_excess = rows.iter().map(|r| r.excess).fold(T::zero(), T::max);
    Ok(HistoryLipschitzTable {
        rows,
        max_excess,
        skipped,
    })
}

#[derive(Debug, Clone)]
pub struct DualEquivalenceReport<T> {
    /// Membership of `φ` in `∂₂R(ζ, 0)` and `|⟨φ, q̇⟩ − R(ζ, q̇)|`.
    pub primal_residual: T,
    /// Normal-cone complementarity with the history frozen as in the step.
    pub complementarity_residual: T,
    /// Same complementarity with the history recomputed at the step end.
    pub consistency_residual: T,
    /// Largest `conjugate_check` residual at the sampled steps.
    pub conjugate_residual: T,
    pub conjugate_agree: bool,
}

impl<T: Scalar> DualEquivalenceReport<T> {
    pub fn max_frozen_residual(&self) -> T {
        self.primal_residual
            .max(self.complementarity_residual)
            .max(self.conjugate_residual)
    }
}

/// Relative complementarity between the rate and the dual slack:
/// Fatigue `0 ≤ η ⊥ c − φ ≥ 0`; WeightedL1 `|φ| ≤ w` with `φᵢ = wᵢ sign ηᵢ`
/// where `ηᵢ ≠ 0`.
fn complementarity<T: Scalar>(fatigue: bool, threshold: &DualField<T>, phi: &DualField<T>, rate: &Field<T>) -> T {
    let scale = T::one() + rate.norm_inf() * threshold.norm_inf().max(phi.norm_inf());
    let c = threshold.values();
    let p = phi.values();
    let r = rate.values();
    let mut worst = T::zero();
    for i in 0..r.len() {
        let v = if fatigue {
            let slack = c[i] - p[i];
            (r[i] * slack).abs().max(-slack).max(-r[i])
        } else {
            let slack = c[i] - p[i].abs();
            let aligned = if r[i] == T::zero() {
                T::zero()
            } else {
                r[i].abs() * (p[i] - c[i] * r[i].signum()).abs()
            };
            aligned.max(-slack)
        };
        worst = worst.max(v);
    }
    worst / scale
}

/// Solves a small problem and checks the primal inclusion, the dual
/// (normal-cone) inclusion and the conjugate closed form along the
/// trajectory. The driving force includes the viscous term `−εVq̇`.
pub fn dual_equivalence<T: Scalar>(
    scenario: &Scenario<T>,
    epsilon: T,
    opts: &SolveOptions<T>,
    seed: u64,
) -> Result<DualEquivalenceReport<T>> {
    let n = scenario.n_nodes();
    if n > 4 {
        return Err(invalid(format!(
            "dual equivalence is meant for at most 4 nodes, got {n}"
        )));
    }
    let opts = SolveOptions {
        integrator: Integrator::Implicit,
        ..*opts
    };
    let (traj, _) = solve_with(scenario, epsilon, &opts)?;
    let mesh = &scenario.mesh;
    let spec = &scenario.dissipation;
    let fatigue = spec.is_fatigue();
    let steps = traj.n_steps();
    let stride = (steps / 50).max(1);

    let mut history = HistoryAccumulator::new(&scenario.kernel, traj.time_step());
    history.step(traj.state(0).clone())?;
    let mut report = DualEquivalenceReport {
        primal_residual: T::zero(),
        complementarity_residual: T::zero(),
        consistency_residual: T::zero(),
        conjugate_residual: T::zero(),
        conjugate_agree: true,
    };
    for k in 0..steps {
        let frozen = history.value().clone();
        let end = history.step(traj.state(k + 1).clone())?.clone();
        let rate = traj.rate(k);
        let mut phi = scenario.driving_force(traj.time(k + 1), traj.state(k + 1));
        phi.axpy(-epsilon, &mesh.riesz_apply(&rate));

        let c_frozen = spec.threshold(mesh, &frozen);
        let scale = T::one() + rate.norm_inf() * c_frozen.norm_inf().max(phi.norm_inf());
        let membership = spec.subdiff_zero_contains(mesh, &frozen, &phi, T::zero()).max_violation;
        let work = match spec.eval_with_threshold(&c_frozen, &rate).finite() {
            Some(r) => (phi.pair(&rate) - r).abs(),
            None => T::infinity(),
        };
        report.primal_residual = report.primal_residual.max(membership.max(work) / scale);
        report.complementarity_residual = report
            .complementarity_residual
            .max(complementarity(fatigue, &c_frozen, &phi, &rate));
        let c_end = spec.threshold(mesh, &end);
        report.consistency_residual = report
            .consistency_residual
            .max(complementarity(fatigue, &c_end, &phi, &rate));

        if k % stride == 0 {
            let check = spec.conjugate_check(mesh, &frozen, &phi, 16, seed.wrapping_add(k as u64));
            report.conjugate_agree &= check.agree;
            report.conjugate_residual = report.conjugate_residual.max(check.residual / scale);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipation::DissipationSpec;
    use crate::history::KernelSpec;
    use crate::spatial::Mesh;
    use std::sync::Arc;

    fn homogeneous(amplitude: ScalarFn<f64>, kappa: f64) -> Scenario<f64> {
        Scenario::homogeneous(3, 1.0, amplitude, DissipationSpec::constant_fatigue(kappa), 1.0, 100).unwrap()
    }

    #[test]
    fn zero_initial_load_is_compatible() {
        let c = compatibility_check(&homogeneous(ScalarFn::new(|t: f64| t), 1.0));
        assert!(c.compatible);
        assert!(c.violating_nodes.is_empty());
    }

    #[test]
    fn overloaded_start_flags_all_nodes() {
        let c = compatibility_check(&homogeneous(ScalarFn::constant(2.0), 1.0));
        assert!(!c.compatible);
        assert_eq!(c.violating_nodes, vec![0, 1, 2]);
    }

    #[test]
    fn threshold_start_is_compatible() {
        let c = compatibility_check(&homogeneous(ScalarFn::constant(1.0), 1.0));
        assert!(c.compatible);
    }

    #[test]
    fn random_loads_vanish_at_zero_and_meet_target() {
        let s = homogeneous(ScalarFn::constant(0.0), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let l = random_load(&s, &mut rng, 3, 2.0);
        let s = s.with_load(l);
        assert_eq!(s.load_at(0.0).norm_inf(), 0.0);
        assert!((s.load_samples().h1_norm(&s.mesh) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_pairs_have_zero_gap() {
        let s = homogeneous(ScalarFn::constant(0.0), 1.0);
        let mut cfg = ExperimentConfig::new(s.clone());
        cfg.eps_list = vec![0.1];
        let l = LoadSpec::uniform(ScalarFn::new(|t: f64| 2.0 * t), 3);
        let t = lipschitz_table(&cfg, &[(l.clone(), l)]).unwrap();
        assert_eq!(t.rows[0].state_gap, 0.0);
        assert_eq!(t.rows[0].ratio, 0.0);
    }

    #[test]
    fn zero_load_is_skipped_in_bound_table() {
        let cfg = ExperimentConfig::new(homogeneous(ScalarFn::constant(0.0), 1.0));
        let t = bound_table(&cfg, &[LoadSpec::zero()]).unwrap();
        assert!(t.rows.is_empty());
        assert_eq!(t.skipped_loads, vec![0]);
    }

    #[test]
    fn uniqueness_probe_on_zero_load_is_exact() {
        let s = homogeneous(ScalarFn::constant(0.0), 1.0);
        let r = uniqueness_probe(&s, &[0.1, 0.01], &SolveOptions::default()).unwrap();
        assert_eq!(r.max_gap, 0.0);
    }

    #[test]
    fn constant_threshold_gives_zero_history_slope() {
        let s = homogeneous(ScalarFn::new(|t: f64| 3.0 * t), 1.0);
        let (traj, _) = solve_with(&s, 0.01, &SolveOptions::default()).unwrap();
        let t = history_lipschitz_check(&traj, &s, 20, 1).unwrap();
        assert!(t.rows.iter().all(|r| r.slope == 0.0));
        assert_eq!(t.max_excess, 0.0);
    }

    #[test]
    fn dual_equivalence_rejects_large_meshes() {
        let mesh = Arc::new(Mesh::uniform(6, 1.0).unwrap());
        let s = Scenario::new(
            mesh,
            1.0,
            LoadSpec::zero(),
            KernelSpec::identity(Field::zeros(6)),
            DissipationSpec::constant_fatigue(1.0),
            1.0,
            10,
        )
        .unwrap();
        assert!(dual_equivalence(&s, 0.1, &SolveOptions::default(), 0).is_err());
    }

    #[test]
    fn sticking_phase_has_zero_complementarity() {
        let s = homogeneous(ScalarFn::new(|t: f64| 0.5 * t), 1.0);
        let r = dual_equivalence(&s, 0.01, &SolveOptions::default(), 0).unwrap();
        assert_eq!(r.complementarity_residual, 0.0);
        assert!(r.conjugate_agree);
    }
}
