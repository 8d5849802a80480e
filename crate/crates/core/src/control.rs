//! Tracking-type optimal control over a finite load parametrization
//! `ℓ_θ(t) = Σ θᵢ ψᵢ(t) M φᵢ`, minimized by compass pattern search.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::scalar::{trapezoid, Scalar};
use crate::scenario::{LoadSpec, LoadTerm, Scenario};
use crate::spatial::Field;
use crate::trajectory::Trajectory;
use crate::viscous::{solve_with, SolveOptions};

#[derive(Debug, Clone)]
pub enum Target<T> {
    /// `j(q) = ½ ∫₀ᵀ ‖q − q_target‖²_{L²} dt`.
    Trajectory(Trajectory<T>),
    /// `j(q) = ½ ‖q(T) − q_T‖²_{L²}`.
    Terminal(Field<T>),
}

#[derive(Debug, Clone)]
pub struct ControlProblem<T> {
    pub template: Scenario<T>,
    pub target: Target<T>,
    /// Basis `ψᵢ(t) φᵢ(x)`; every `ψᵢ` vanishes at `t = 0`.
    pub basis: Vec<LoadTerm<T>>,
    pub reg_weight: T,
    pub epsilon: T,
    pub solve: SolveOptions<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct Evaluation<T> {
    pub value: T,
    pub tracking: T,
    pub regularization: T,
    /// The inner solve failed and `value` is `+∞`.
    pub failed: bool,
    /// `‖q‖_{H¹(0,T;Y)} / ‖ℓ‖_{H¹(0,T;Y*)}`, when the load is nonzero.
    pub bound_ratio: Option<T>,
}

impl<T: Scalar> ControlProblem<T> {
    pub fn new(template: Scenario<T>, target: Target<T>, basis: Vec<LoadTerm<T>>, reg_weight: T) -> Result<Self> {
        let p = Self {
            template,
            target,
            basis,
            reg_weight,
            epsilon: T::lit(1e-3),
            solve: SolveOptions::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero()) {
            return Err(invalid("control viscosity must be positive"));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.template.n_nodes();
        if self.basis.is_empty() {
            return Err(invalid("control basis is empty"));
        }
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        for (i, term) in self.basis.iter().enumerate() {
            if term.density.len() != n {
                return Err(invalid(format!("control basis term {i} does not match the mesh")));
            }
            if term.amplitude.call(T::zero()).abs() > tol {
                return Err(invalid(format!("control basis term {i} does not vanish at t = 0")));
            }
        }
        if !(self.reg_weight >= T::zero()) {
            return Err(invalid("regularization weight must be nonnegative"));
        }
        match &self.target {
            Target::Trajectory(t) => {
                if t.n_steps() != self.template.n_steps || t.state(0).len() != n {
                    return Err(invalid("target trajectory does not match the scenario grid"));
                }
            }
            Target::Terminal(f) => self.template.mesh.check(f.values(), "terminal target")?,
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn load(&self, theta: &[T]) -> LoadSpec<T> {
        LoadSpec::Separable(
            self.basis
                .iter()
                .zip(theta)
                .map(|(b, &c)| LoadTerm {
                    amplitude: b.amplitude.clone(),
                    density: b.density.scaled(c),
                })
                .collect(),
        )
    }

    /// `‖Σ θᵢψᵢφᵢ‖²_{H¹(0,T;L²)}` with difference-quotient derivatives.
    pub fn load_h1_l2_squared(&self, theta: &[T]) -> T {
        let s = &self.template;
        let mesh = &s.mesh;
        let nodal = |t: T| {
            let mut f = Field::zeros(s.n_nodes());
            for (b, &c) in self.basis.iter().zip(theta) {
                f.axpy(c * b.amplitude.call(t), &b.density);
            }
            f
        };
        let tau = s.time_step();
        let samples: Vec<Field<T>> = (0..=s.n_steps).map(|i| nodal(s.time(i))).collect();
        let values = trapezoid(samples.iter().map(|f| mesh.l2_norm(f).powi(2)), tau);
        let ders: T = samples
            .windows(2)
            .map(|w| mesh.l2_norm(&(&w[1] - &w[0])).powi(2))
            .sum::<T>()
            / tau;
        values + ders
    }

    pub fn tracking(&self, traj: &Trajectory<T>) -> T {
        let mesh = &self.template.mesh;
        let half = T::lit(0.5);
        match &self.target {
            Target::Trajectory(target) => {
                let sq = traj
                    .states()
                    .iter()
                    .zip(target.states())
                    .map(|(a, b)| mesh.l2_norm(&(a - b)).powi(2));
                half * trapezoid(sq, traj.time_step())
            }
            Target::Terminal(f) => half * mesh.l2_norm(&(traj.state(traj.n_steps()) - f)).powi(2),
        }
    }

    pub fn objective(&self, theta: &[T]) -> Evaluation<T> {
        assert_eq!(theta.len(), self.dim());
        let regularization = self.reg_weight * T::lit(0.5) * self.load_h1_l2_squared(theta);
        let failed = Evaluation {
            value: T::infinity(),
            tracking: T::infinity(),
            regularization,
            failed: true,
            bound_ratio: None,
        };
        if theta.iter().any(|v| !v.is_finite()) {
            return failed;
        }
        let scenario = self.template.with_load(self.load(theta));
        let Ok((traj, _)) = solve_with(&scenario, self.epsilon, &self.solve) else {
            return failed;
        };
        let tracking = self.tracking(&traj);
        let load_norm = scenario.load_samples().h1_norm(&scenario.mesh);
        let bound_ratio = (load_norm > T::zero()).then(|| traj.h1_time_norm(&scenario.mesh) / load_norm);
        Evaluation {
            value: tracking + regularization,
            tracking,
            regularization,
            failed: false,
            bound_ratio,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions<T> {
    /// Maximum number of objective evaluations, including the start point.
    pub budget: usize,
    pub initial_step: T,
    pub min_step: T,
    pub shrink: T,
    pub seed: u64,
}

impl<T: Scalar> Default for SearchOptions<T> {
    fn default() -> Self {
        Self {
            budget: 200,
            initial_step: T::one(),
            min_step: T::lit(1e-3),
            shrink: T::lit(0.5),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStatus {
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct TraceEntry<T> {
    pub evaluation: usize,
    pub theta: Vec<T>,
    pub value: T,
    pub step: T,
    pub accepted: bool,
    pub failed: bool,
    pub bound_ratio: Option<T>,
}

#[derive(Debug, Clone)]
pub struct SearchResult<T> {
    pub theta: Vec<T>,
    pub value: T,
    pub status: SearchStatus,
    pub trace: Vec<TraceEntry<T>>,
}

impl<T: Scalar> SearchResult<T> {
    pub fn accepted_values(&self) -> Vec<T> {
        self.trace.iter().filter(|e| e.accepted).map(|e| e.value).collect()
    }
}

/// Compass search: polls `θ ± h eᵢ` in a seeded order, evaluates the polls
/// concurrently, moves to the best strict improvement (first in poll order
/// on ties) and otherwise shrinks `h`.
pub fn optimize<T: Scalar>(
    problem: &ControlProblem<T>,
    theta0: &[T],
    opts: &SearchOptions<T>,
) -> Result<SearchResult<T>> {
    let m = problem.dim();
    if theta0.len() != m {
        return Err(invalid(format!(
            "start point has {} entries, basis has {m}",
            theta0.len()
        )));
    }
    if opts.budget == 0 {
        return Err(invalid("search budget must be at least 1"));
    }
    if !(opts.initial_step > T::zero() && opts.shrink > T::zero() && opts.shrink < T::one()) {
        return Err(invalid("search needs a positive step and a shrink factor in (0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut theta = theta0.to_vec();
    let mut step = opts.initial_step;
    let first = problem.objective(&theta);
    let mut value = first.value;
    let mut trace = vec![TraceEntry {
        evaluation: 0,
        theta: theta.clone(),
        value,
        step,
        accepted: true,
        failed: first.failed,
        bound_ratio: first.bound_ratio,
    }];

    let status =
        loop {
            if step < opts.min_step {
                break SearchStatus::Converged;
            }
            let remaining = opts.budget - trace.len();
            if remaining == 0 {
                break SearchStatus::BudgetExhausted;
            }
            let mut polls: Vec<(usize, T)> = (0..m).flat_map(|i| [(i, T::one()), (i, -T::one())]).collect();
            polls.shuffle(&mut rng);
            polls.truncate(remaining);
            let points: Vec<Vec<T>> = polls
                .iter()
                .map(|&(i, sign)| {
                    let mut p = theta.clone();
                    p[i] += sign * step;
                    p
                })
                .collect();
            let evals: Vec<Evaluation<T>> = points.par_iter().map(|p| problem.objective(p)).collect();

            let best = evals.iter().enumerate().filter(|(_, e)| e.value < value).fold(
                None,
                |acc: Option<(usize, T)>, (k, e)| match acc {
                    Some((_, v)) if v <= e.value => acc,
                    _ => Some((k, e.value)),
                },
            );
            let base = trace.len();
            for (k, (p, e)) in points.into_iter().zip(&evals).enumerate() {
                trace.push(TraceEntry {
                    evaluation: base + k,
                    theta: p,
                    value: e.value,
                    step,
                    accepted: best.is_some_and(|(b, _)| b == k),
                    failed: e.failed,
                    bound_ratio: e.bound_ratio,
                });
            }
            match best {
                Some((k, v)) => {
                    theta = trace[base + k].theta.clone();
                    value = v;
                }
                None => step *= opts.shrink,
            }
        };
    Ok(SearchResult {
        theta,
        value,
        status,
        trace,
    })
}
