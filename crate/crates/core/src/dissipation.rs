//! State-dependent dissipation potentials `R(ζ, η)`.
//!
//! Two kinds are provided:
//!
//! * **Fatigue**: `R(ζ, η) = ∫ κ(ζ) η dx` on the cone `η ≥ 0`, `+∞` off it.
//!   Discretely `R = (M κ(ζ))ᵀ η` with `κ` applied nodally and `M` the
//!   consistent mass matrix. Then `∂₂R(ζ, 0) = Mκ(ζ) + 𝒞°`, i.e. every dual
//!   coefficient of `φ − Mκ(ζ)` is nonpositive.
//! * **WeightedL1**: `R(ζ, η) = ∫ g(ζ) |η| dx`, discretely `Σ mᵢ g(ζᵢ) |ηᵢ|`
//!   with lumped weights `mᵢ`, so `∂₂R(ζ, 0)` is the box `|φᵢ| ≤ mᵢ g(ζᵢ)`.
//!
//! Besides evaluation this module provides the rate problem (the proximal
//! step of the viscous inclusion), the metric projection onto `∂₂R(ζ, 0)`,
//! and numerical checks of the structural axioms and of the Fenchel
//! conjugate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{norm_inf, Matrix};
use crate::qp::{BoxQp, QpOptions};
use crate::scalar::{Scalar, ScalarFn};
use crate::spatial::{in_cone, DualField, Field, Mesh};

/// A value in `[0, ∞]`, with `0 · ∞ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> ExtReal<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(&self) -> Option<T> {
        match *self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::Infinite => None,
        }
    }

    /// `γ · self` for `γ ≥ 0`.
    pub fn scale(self, gamma: T) -> Self {
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(gamma * v),
            ExtReal::Infinite if gamma == T::zero() => ExtReal::Finite(T::zero()),
            ExtReal::Infinite => ExtReal::Infinite,
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v.to_f64_lossy(),
            ExtReal::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone)]
pub enum DissipationKind<T> {
    Fatigue {
        kappa: ScalarFn<T>,
        /// Needed only by the uniqueness experiments.
        kappa_prime: Option<ScalarFn<T>>,
        kappa_lipschitz: T,
    },
    WeightedL1 {
        weight: ScalarFn<T>,
        weight_lipschitz: T,
    },
}

#[derive(Debug, Clone)]
pub struct DissipationSpec<T> {
    pub kind: DissipationKind<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct ProxOptions<T> {
    pub qp: QpOptions<T>,
    /// Iteration cap of the forward–backward splitting used for WeightedL1
    /// before falling back to the dual box QP.
    pub max_splitting_iters: usize,
}

impl<T: Scalar> Default for ProxOptions<T> {
    fn default() -> Self {
        Self {
            qp: QpOptions::default(),
            max_splitting_iters: 5_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProxOutcome<T> {
    pub rate: Field<T>,
    pub iterations: usize,
    pub kkt_residual: T,
}

/// Result of a membership test `φ ∈ ∂₂R(ζ, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Membership<T> {
    pub contained: bool,
    /// Nodes whose dual coefficient violates the constraint, in node order.
    pub violating_nodes: Vec<usize>,
    /// Node with the largest violation.
    pub worst_node: Option<usize>,
    pub max_violation: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateCheck<T> {
    /// Closed form `I_{∂₂R(ζ,0)}(ω)`.
    pub closed_form: ExtReal<T>,
    /// Ray-search estimate of `sup_v ⟨ω, v⟩ − R(ζ, v)`.
    pub sampled_sup: ExtReal<T>,
    /// Node whose ray certified unboundedness, when a nodal ray did.
    pub unbounded_node: Option<usize>,
    pub agree: bool,
    /// `|sampled − closed|` when both are finite, `0` when both are infinite,
    /// `+∞` on disagreement.
    pub residual: T,
}

fn soft_threshold<T: Scalar>(v: T, w: T) -> T {
    if v > w {
        v - w
    } else if v < -w {
        v + w
    } else {
        T::zero()
    }
}

impl<T: Scalar> DissipationSpec<T> {
    pub fn fatigue(kappa: ScalarFn<T>, kappa_prime: Option<ScalarFn<T>>, kappa_lipschitz: T) -> Self {
        Self {
            kind: DissipationKind::Fatigue {
                kappa,
                kappa_prime,
                kappa_lipschitz,
            },
        }
    }

    /// Fatigue potential with constant threshold `κ ≡ c`.
    pub fn constant_fatigue(c: T) -> Self {
        Self::fatigue(ScalarFn::constant(c), Some(ScalarFn::constant(T::zero())), T::zero())
    }

    pub fn weighted_l1(weight: ScalarFn<T>, weight_lipschitz: T) -> Self {
        Self {
            kind: DissipationKind::WeightedL1 {
                weight,
                weight_lipschitz,
            },
        }
    }

    pub fn is_fatigue(&self) -> bool {
        matches!(self.kind, DissipationKind::Fatigue { .. })
    }

    /// Pointwise threshold function (`κ` or `g`).
    pub fn threshold_fn(&self) -> &ScalarFn<T> {
        match &self.kind {
            DissipationKind::Fatigue { kappa, .. } => kappa,
            DissipationKind::WeightedL1 { weight, .. } => weight,
        }
    }

    pub fn kappa_prime(&self) -> Option<&ScalarFn<T>> {
        match &self.kind {
            DissipationKind::Fatigue { kappa_prime, .. } => kappa_prime.as_ref(),
            DissipationKind::WeightedL1 { .. } => None,
        }
    }

    /// Discrete constant `L_R` of the four-point condition with
    /// `‖ζ‖_X = ‖ζ‖_{L²}` and `‖η‖_Y = ‖η‖_{H¹}`.
    ///
    /// Nodal application of `κ` loses the factor between the consistent and
    /// the lumped mass matrix (`M ≤ D ≤ 3M` for P1): `√3` for Fatigue, `3`
    /// for the lumped WeightedL1 form.
    pub fn lipschitz_constant(&self) -> T {
        match &self.kind {
            DissipationKind::Fatigue { kappa_lipschitz, .. } => T::lit(3.0).sqrt() * *kappa_lipschitz,
            DissipationKind::WeightedL1 { weight_lipschitz, .. } => T::lit(3.0) * *weight_lipschitz,
        }
    }

    /// Samples the threshold function on `[lo, hi]` and checks nonnegativity,
    /// the declared Lipschitz constant and, when present, finiteness of `κ′`.
    pub fn validate(&self, lo: T, hi: T, n_samples: usize) -> Result<()> {
        let n = n_samples.max(2);
        let f = self.threshold_fn();
        let lip = match &self.kind {
            DissipationKind::Fatigue { kappa_lipschitz, .. } => *kappa_lipschitz,
            DissipationKind::WeightedL1 { weight_lipschitz, .. } => *weight_lipschitz,
        };
        let zs: Vec<T> = (0..=n)
            .map(|i| lo + (hi - lo) * T::from_count(i) / T::from_count(n))
            .collect();
        let vals: Vec<T> = zs.iter().map(|&z| f.call(z)).collect();
        for (z, v) in zs.iter().zip(&vals) {
            if !v.is_finite() || *v < T::zero() {
                return Err(invalid(format!(
                    "dissipation threshold is {v} at z = {z}; must be finite and ≥ 0"
                )));
            }
        }
        let slack = T::lit(1e-9).max(T::epsilon() * T::lit(100.0));
        for i in 1..zs.len() {
            let dz = zs[i] - zs[i - 1];
            if (vals[i] - vals[i - 1]).abs() > (lip + slack) * dz + slack {
                return Err(invalid(format!(
                    "dissipation threshold violates its Lipschitz constant {lip} near z = {}",
                    zs[i]
                )));
            }
        }
        if let Some(kp) = self.kappa_prime() {
            if let Some(z) = zs.iter().find(|&&z| !kp.call(z).is_finite()) {
                return Err(invalid(format!("kappa_prime is not finite at z = {z}")));
            }
        }
        Ok(())
    }

    /// Assembled threshold vector: `M κ(ζ)` (Fatigue) or the box half-widths
    /// `mᵢ g(ζᵢ)` (WeightedL1).
    pub fn threshold(&self, mesh: &Mesh<T>, zeta: &Field<T>) -> DualField<T> {
        let nodal = zeta.map(|z| self.threshold_fn().call(z));
        match self.kind {
            DissipationKind::Fatigue { .. } => mesh.mass_apply(&nodal),
            DissipationKind::WeightedL1 { .. } => DualField::new(
                nodal
                    .values()
                    .iter()
                    .zip(mesh.lumped_mass())
                    .map(|(&g, &m)| g * m)
                    .collect(),
            ),
        }
    }

    pub fn in_domain(&self, eta: &Field<T>) -> bool {
        match self.kind {
            DissipationKind::Fatigue { .. } => in_cone(eta),
            DissipationKind::WeightedL1 { .. } => true,
        }
    }

    /// `R(ζ, η)` given a precomputed threshold vector.
    pub fn eval_with_threshold(&self, threshold: &DualField<T>, eta: &Field<T>) -> ExtReal<T> {
        match self.kind {
            DissipationKind::Fatigue { .. } => {
                if in_cone(eta) {
                    ExtReal::Finite(threshold.pair(eta))
                } else {
                    ExtReal::Infinite
                }
            }
            DissipationKind::WeightedL1 { .. } => ExtReal::Finite(
                threshold
                    .values()
                    .iter()
                    .zip(eta.values())
                    .map(|(&w, &e)| w * e.abs())
                    .sum(),
            ),
        }
    }

    pub fn eval(&self, mesh: &Mesh<T>, zeta: &Field<T>, eta: &Field<T>) -> ExtReal<T> {
        self.eval_with_threshold(&self.threshold(mesh, zeta), eta)
    }

    /// Whether `R(ζ, γη) = γ R(ζ, η)` within relative `1e−12`.
    pub fn check_homogeneity(&self, mesh: &Mesh<T>, zeta: &Field<T>, eta: &Field<T>, gamma: T) -> bool {
        let lhs = self.eval(mesh, zeta, &eta.scaled(gamma));
        let rhs = self.eval(mesh, zeta, eta).scale(gamma);
        match (lhs, rhs) {
            (ExtReal::Infinite, ExtReal::Infinite) => true,
            (ExtReal::Finite(a), ExtReal::Finite(b)) => {
                let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
                (a - b).abs() <= tol * a.abs().max(b.abs())
            }
            _ => false,
        }
    }

    /// Four-point condition: returns
    /// `R(ζ₁,η₂) − R(ζ₁,η₁) + R(ζ₂,η₁) − R(ζ₂,η₂) − L_R ‖ζ₁−ζ₂‖_{L²} ‖η₁−η₂‖_{H¹}`,
    /// which must be nonpositive.
    pub fn check_lipschitz_axiom(
        &self,
        mesh: &Mesh<T>,
        zeta1: &Field<T>,
        zeta2: &Field<T>,
        eta1: &Field<T>,
        eta2: &Field<T>,
    ) -> Result<T> {
        if !self.in_domain(eta1) || !self.in_domain(eta2) {
            return Err(invalid("four-point condition needs rates in dom R"));
        }
        let (t1, t2) = (self.threshold(mesh, zeta1), self.threshold(mesh, zeta2));
        let r = |t: &DualField<T>, e: &Field<T>| self.eval_with_threshold(t, e).finite().expect("in domain");
        let lhs = r(&t1, eta2) - r(&t1, eta1) + r(&t2, eta1) - r(&t2, eta2);
        let rhs = self.lipschitz_constant() * mesh.l2_norm(&(zeta1 - zeta2)) * mesh.h1_norm(&(eta1 - eta2));
        Ok(lhs - rhs)
    }

    /// Rate problem `argmin_η (ε/2)‖η‖²_{H¹} − ⟨f, η⟩ + R(ζ, η)`.
    ///
    /// `epsilon` is the effective curvature and may include the implicit
    /// energy contribution `α τ`.
    pub fn prox_rate(
        &self,
        mesh: &Mesh<T>,
        zeta: &Field<T>,
        force: &DualField<T>,
        epsilon: T,
        warm_start: Option<&Field<T>>,
        opts: &ProxOptions<T>,
    ) -> Result<ProxOutcome<T>> {
        if !(epsilon > T::zero()) {
            return Err(invalid(format!("prox curvature must be positive, got {epsilon}")));
        }
        mesh.check(zeta.values(), "history value")?;
        mesh.check(force.values(), "force")?;
        let threshold = self.threshold(mesh, zeta);
        let hessian = mesh.riesz().scaled(epsilon);
        match self.kind {
            DissipationKind::Fatigue { .. } => {
                let n = mesh.n_nodes();
                let linear: Vec<T> = force
                    .values()
                    .iter()
                    .zip(threshold.values())
                    .map(|(&f, &c)| f - c)
                    .collect();
                let lower = vec![T::zero(); n];
                let upper = vec![T::infinity(); n];
                let qp = BoxQp {
                    hessian: &hessian,
                    linear: &linear,
                    lower: &lower,
                    upper: &upper,
                };
                let sol = qp.solve(warm_start.map(|w| w.values()), &opts.qp)?;
                Ok(ProxOutcome {
                    rate: Field::new(sol.x),
                    iterations: sol.iterations,
                    kkt_residual: sol.kkt_residual,
                })
            }
            DissipationKind::WeightedL1 { .. } => {
                weighted_l1_prox(&hessian, force.values(), threshold.values(), warm_start, opts)
            }
        }
    }

    /// Membership `φ ∈ ∂₂R(ζ, 0)` up to an absolute tolerance on the dual
    /// coefficients.
    pub fn subdiff_zero_contains(&self, mesh: &Mesh<T>, zeta: &Field<T>, phi: &DualField<T>, tol: T) -> Membership<T> {
        let threshold = self.threshold(mesh, zeta);
        let excess: Vec<T> = match self.kind {
            DissipationKind::Fatigue { .. } => phi
                .values()
                .iter()
                .zip(threshold.values())
                .map(|(&p, &c)| p - c)
                .collect(),
            DissipationKind::WeightedL1 { .. } => phi
                .values()
                .iter()
                .zip(threshold.values())
                .map(|(&p, &w)| p.abs() - w)
                .collect(),
        };
        let violating_nodes: Vec<usize> = (0..excess.len()).filter(|&i| excess[i] > tol).collect();
        let (worst_node, max_violation) = excess.iter().enumerate().fold(
            (None, T::neg_infinity()),
            |(wi, wv), (i, &v)| {
                if v > wv {
                    (Some(i), v)
                } else {
                    (wi, wv)
                }
            },
        );
        Membership {
            contained: violating_nodes.is_empty(),
            worst_node: if violating_nodes.is_empty() { None } else { worst_node },
            violating_nodes,
            max_violation: max_violation.max(T::zero()),
        }
    }

    /// Metric projection of `ω` onto `∂₂R(ζ, 0)` in the `⟨V⁻¹·,·⟩` inner
    /// product, computed as a bound-constrained QP in the dual variable.
    pub fn project_subdiff_zero(
        &self,
        mesh: &Mesh<T>,
        zeta: &Field<T>,
        omega: &DualField<T>,
        opts: &QpOptions<T>,
    ) -> Result<DualField<T>> {
        mesh.check(omega.values(), "dual field")?;
        let n = mesh.n_nodes();
        let threshold = self.threshold(mesh, zeta);
        let (lower, upper): (Vec<T>, Vec<T>) = match self.kind {
            DissipationKind::Fatigue { .. } => (vec![T::neg_infinity(); n], threshold.values().to_vec()),
            DissipationKind::WeightedL1 { .. } => (
                threshold.values().iter().map(|&w| -w).collect(),
                threshold.values().to_vec(),
            ),
        };
        let vinv = mesh.riesz_inverse();
        let linear = vinv.mul_vec(omega.values());
        let qp = BoxQp {
            hessian: vinv,
            linear: &linear,
            lower: &lower,
            upper: &upper,
        };
        let sol = qp.solve(Some(omega.values()), opts)?;
        Ok(DualField::new(sol.x))
    }

    /// Compares a ray search for `sup_v ⟨ω, v⟩ − R(ζ, v)` with the closed form
    /// of the conjugate, the indicator of `∂₂R(ζ, 0)`.
    pub fn conjugate_check(
        &self,
        mesh: &Mesh<T>,
        zeta: &Field<T>,
        omega: &DualField<T>,
        n_samples: usize,
        seed: u64,
    ) -> ConjugateCheck<T> {
        let n = mesh.n_nodes();
        let threshold = self.threshold(mesh, zeta);
        let tol =
            T::lit(1e-10).max(T::epsilon() * T::lit(1e3)) * T::one().max(threshold.norm_inf()).max(omega.norm_inf());
        let closed_form = if self.subdiff_zero_contains(mesh, zeta, omega, tol).contained {
            ExtReal::Finite(T::zero())
        } else {
            ExtReal::Infinite
        };

        let mut dirs: Vec<(Option<usize>, Field<T>)> = Vec::new();
        for i in 0..n {
            let mut e = Field::zeros(n);
            e.values_mut()[i] = T::one();
            dirs.push((Some(i), e.clone()));
            if !self.is_fatigue() {
                dirs.push((Some(i), e.scaled(-T::one())));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo = if self.is_fatigue() { 0.0 } else { -1.0 };
        for _ in 0..n_samples {
            let v = Field::new((0..n).map(|_| T::lit(rng.gen_range(lo..1.0))).collect());
            let norm = v.norm_euclid();
            if norm > T::zero() {
                dirs.push((None, v.scaled(T::one() / norm)));
            }
        }

        let gammas: Vec<T> = (0..7).map(|k| T::lit(10f64.powi(k))).collect();
        let mut sup = T::zero();
        let mut unbounded: Option<Option<usize>> = None;
        for (node, v) in &dirs {
            let vals: Vec<T> = gammas
                .iter()
                .map(|&g| {
                    let w = v.scaled(g);
                    let r = self
                        .eval_with_threshold(&threshold, &w)
                        .finite()
                        .unwrap_or(T::infinity());
                    omega.pair(&w) - r
                })
                .collect();
            let last = vals[vals.len() - 1];
            let grows = vals.windows(2).all(|w| w[1] > w[0]);
            if grows && last > tol * gammas[gammas.len() - 1] {
                if unbounded.is_none() || (unbounded == Some(None) && node.is_some()) {
                    unbounded = Some(*node);
                }
            } else {
                sup = vals.iter().copied().fold(sup, T::max);
            }
        }
        let sampled_sup = if unbounded.is_some() {
            ExtReal::Infinite
        } else {
            ExtReal::Finite(sup)
        };
        let (agree, residual) = match (closed_form, sampled_sup) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => (true, (a - b).abs()),
            (ExtReal::Infinite, ExtReal::Infinite) => (true, T::zero()),
            _ => (false, T::infinity()),
        };
        ConjugateCheck {
            closed_form,
            sampled_sup,
            unbounded_node: unbounded.flatten(),
            agree,
            residual,
        }
    }
}

/// `min ½ηᵀHη − fᵀη + Σ wᵢ|ηᵢ|` by accelerated forward–backward splitting
/// with adaptive restart, finished by solving the reduced system on the
/// identified support. Degenerate instances where splitting stalls are
/// handed to the dual problem `min_{|μ|≤w} ½(f−μ)ᵀH⁻¹(f−μ)`.
fn weighted_l1_prox<T: Scalar>(
    hessian: &Matrix<T>,
    force: &[T],
    weights: &[T],
    warm_start: Option<&Field<T>>,
    opts: &ProxOptions<T>,
) -> Result<ProxOutcome<T>> {
    let n = force.len();
    let lip = hessian.gershgorin_bound();
    let step = T::one() / lip;
    let tol = opts.qp.tolerance * T::one().max(norm_inf(force));
    let objective = |x: &[T]| -> T {
        T::lit(0.5) * hessian.bilinear(x, x) - crate::linalg::dot(force, x)
            + x.iter().zip(weights).map(|(&a, &w)| w * a.abs()).sum::<T>()
    };
    let residual = |x: &[T]| -> T {
        let g = hessian.mul_vec(x);
        (0..n)
            .map(|i| (x[i] - soft_threshold(x[i] - (g[i] - force[i]), weights[i])).abs())
            .fold(T::zero(), T::max)
    };
    let polish = |x: &[T]| -> Option<Vec<T>> {
        let support: Vec<usize> = (0..n).filter(|&i| x[i] != T::zero()).collect();
        let mut out = vec![T::zero(); n];
        if !support.is_empty() {
            let rhs: Vec<T> = support.iter().map(|&i| force[i] - x[i].signum() * weights[i]).collect();
            let z = hessian.submatrix(&support).cholesky().ok()?.solve(&rhs);
            for (k, &i) in support.iter().enumerate() {
                if z[k].signum() != x[i].signum() {
                    return None;
                }
                out[i] = z[k];
            }
        }
        (residual(&out) <= tol).then_some(out)
    };

    let mut x: Vec<T> = warm_start
        .filter(|w| w.len() == n)
        .map(|w| w.values().to_vec())
        .unwrap_or_else(|| vec![T::zero(); n]);
    if let Some(p) = polish(&x) {
        return Ok(ProxOutcome {
            kkt_residual: residual(&p),
            rate: Field::new(p),
            iterations: 0,
        });
    }
    let mut y = x.clone();
    let mut t = T::one();
    let mut fx = objective(&x);
    for it in 1..=opts.max_splitting_iters {
        let g = hessian.mul_vec(&y);
        let z: Vec<T> = (0..n)
            .map(|i| soft_threshold(y[i] - step * (g[i] - force[i]), step * weights[i]))
            .collect();
        let fz = objective(&z);
        if fz > fx {
            // restart momentum
            y.clone_from(&x);
            t = T::one();
            continue;
        }
        let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) * T::lit(0.5);
        let beta = (t - T::one()) / t_next;
        y = (0..n).map(|i| z[i] + beta * (z[i] - x[i])).collect();
        x = z;
        fx = fz;
        t = t_next;
        if it % 10 == 0 {
            if let Some(p) = polish(&x) {
                return Ok(ProxOutcome {
                    kkt_residual: residual(&p),
                    rate: Field::new(p),
                    iterations: it,
                });
            }
            let r = residual(&x);
            if r <= tol {
                return Ok(ProxOutcome {
                    rate: Field::new(x),
                    iterations: it,
                    kkt_residual: r,
                });
            }
        }
    }
    let inverse = hessian.cholesky()?.inverse();
    let linear = inverse.mul_vec(force);
    let lower: Vec<T> = weights.iter().map(|&w| -w).collect();
    let qp = BoxQp {
        hessian: &inverse,
        linear: &linear,
        lower: &lower,
        upper: weights,
    };
    let dual = qp.solve(None, &opts.qp)?;
    let slack: Vec<T> = force.iter().zip(&dual.x).map(|(&f, &m)| f - m).collect();
    let eta = inverse.mul_vec(&slack);
    let r = residual(&eta);
    if !(r <= tol) {
        return Err(Error::NumericalFailure {
            context: "weighted-L1 prox".into(),
            residual: r.to_f64_lossy(),
            iterations: opts.max_splitting_iters + dual.iterations,
        });
    }
    Ok(ProxOutcome {
        rate: Field::new(eta),
        iterations: opts.max_splitting_iters + dual.iterations,
        kkt_residual: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mesh(n: usize) -> Mesh<f64> {
        Mesh::uniform(n, 1.0).unwrap()
    }

    #[test]
    fn fatigue_eval_basics() {
        let m = mesh(5);
        let spec = DissipationSpec::constant_fatigue(1.0);
        let zeta = Field::zeros(5);
        assert_eq!(spec.eval(&m, &zeta, &Field::zeros(5)), ExtReal::Finite(0.0));
        let ones = Field::constant(5, 1.0);
        assert_relative_eq!(spec.eval(&m, &zeta, &ones).finite().unwrap(), 1.0, epsilon = 1e-14);
        let mut neg = ones.clone();
        neg.values_mut()[2] = -1e-3;
        assert_eq!(spec.eval(&m, &zeta, &neg), ExtReal::Infinite);
    }

    #[test]
    fn homogeneity_at_zero_uses_zero_times_infinity() {
        let m = mesh(3);
        let spec = DissipationSpec::constant_fatigue(1.0);
        let eta = Field::new(vec![-1.0, 0.5, 0.0]);
        assert!(spec.check_homogeneity(&m, &Field::zeros(3), &eta, 0.0));
        assert!(spec.check_homogeneity(&m, &Field::zeros(3), &eta, 2.0));
    }

    #[test]
    fn four_point_is_zero_on_coincident_arguments() {
        let m = mesh(4);
        let spec = DissipationSpec::fatigue(ScalarFn::new(|z: f64| (1.0 - 0.5 * z).max(0.2)), None, 0.5);
        let z1 = Field::new(vec![0.1, 0.4, 0.9, 2.0]);
        let z2 = Field::new(vec![0.0, 1.4, 0.3, 0.2]);
        let e1 = Field::new(vec![0.3, 0.0, 1.0, 0.2]);
        let e2 = Field::new(vec![1.3, 0.2, 0.0, 0.0]);
        assert!(spec.check_lipschitz_axiom(&m, &z1, &z1, &e1, &e2).unwrap() <= 0.0);
        assert!(spec.check_lipschitz_axiom(&m, &z1, &z2, &e1, &e1).unwrap() <= 0.0);
        let bad = Field::new(vec![-1.0, 0.0, 0.0, 0.0]);
        assert!(spec.check_lipschitz_axiom(&m, &z1, &z2, &bad, &e1).is_err());
    }

    #[test]
    fn prox_of_subdifferential_element_is_zero() {
        let m = mesh(6);
        let spec = DissipationSpec::constant_fatigue(1.0);
        let zeta = Field::zeros(6);
        let f = m.mass_apply(&Field::constant(6, 0.7));
        let out = spec
            .prox_rate(&m, &zeta, &f, 0.1, None, &ProxOptions::default())
            .unwrap();
        assert_eq!(out.rate, Field::zeros(6));
    }

    #[test]
    fn homogeneous_prox_matches_scalar_formula() {
        // f = a·M1, κ ≡ c  ⇒  η = max(a − c, 0)/ε · 1
        let m = mesh(7);
        for (a, c, eps) in [(2.0, 1.0, 0.1), (0.5, 1.0, 0.3), (3.0, 0.0, 1e-3)] {
            let spec = DissipationSpec::constant_fatigue(c);
            let f = m.mass_apply(&Field::constant(7, a));
            let out = spec
                .prox_rate(&m, &Field::zeros(7), &f, eps, None, &ProxOptions::default())
                .unwrap();
            let expected = f64::max(a - c, 0.0) / eps;
            for &v in out.rate.values() {
                assert_relative_eq!(v, expected, max_relative = 1e-10, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn homogeneous_projection_matches_half_line_formula() {
        let m = mesh(5);
        for (a, c) in [(2.0, 1.0), (0.3, 1.0)] {
            let spec = DissipationSpec::constant_fatigue(c);
            let w = m.mass_apply(&Field::constant(5, a));
            let p = spec
                .project_subdiff_zero(&m, &Field::zeros(5), &w, &QpOptions::default())
                .unwrap();
            let expected = m.mass_apply(&Field::constant(5, c + f64::min(a - c, 0.0)));
            assert!((&p - &expected).norm_inf() < 1e-12);
        }
    }

    #[test]
    fn membership_reports_violating_node() {
        let m = mesh(4);
        let spec = DissipationSpec::constant_fatigue(1.0);
        let zeta = Field::zeros(4);
        let c = spec.threshold(&m, &zeta);
        assert!(spec.subdiff_zero_contains(&m, &zeta, &c, 1e-12).contained);
        assert!(
            spec.subdiff_zero_contains(&m, &zeta, &DualField::zeros(4), 1e-12)
                .contained
        );
        let mut phi = c.clone();
        phi.values_mut()[2] += 0.5;
        let mem = spec.subdiff_zero_contains(&m, &zeta, &phi, 1e-12);
        assert!(!mem.contained);
        assert_eq!(mem.worst_node, Some(2));
        assert_eq!(mem.violating_nodes, vec![2]);
    }

    #[test]
    fn conjugate_detects_violating_ray() {
        let m = mesh(4);
        let spec = DissipationSpec::constant_fatigue(1.0);
        let zeta = Field::zeros(4);
        let mut w = spec.threshold(&m, &zeta).scaled(0.5);
        let inside = spec.conjugate_check(&m, &zeta, &w, 50, 1);
        assert!(inside.agree);
        assert_eq!(inside.sampled_sup, ExtReal::Finite(0.0));
        w.values_mut()[1] = 10.0;
        let outside = spec.conjugate_check(&m, &zeta, &w, 50, 1);
        assert!(outside.agree);
        assert_eq!(outside.sampled_sup, ExtReal::Infinite);
        assert_eq!(outside.unbounded_node, Some(1));
    }

    #[test]
    fn weighted_l1_prox_satisfies_optimality() {
        let m = mesh(6);
        let spec = DissipationSpec::weighted_l1(ScalarFn::new(|z: f64| 0.5 + 0.1 * z.abs()), 0.1);
        let zeta = Field::new(vec![0.0, 1.0, -1.0, 2.0, 0.5, 0.0]);
        let f = DualField::new(vec![0.4, -0.3, 0.05, 0.2, -0.01, 0.3]);
        let out = spec
            .prox_rate(&m, &zeta, &f, 0.2, None, &ProxOptions::default())
            .unwrap();
        assert!(out.kkt_residual < 1e-10);
        let p = spec.project_subdiff_zero(&m, &zeta, &f, &QpOptions::default()).unwrap();
        let other = m.riesz_solve(&(&f - &p)).scaled(1.0 / 0.2);
        assert!((&other - &out.rate).norm_inf() < 1e-8);
    }

    #[test]
    fn validation_catches_bad_kappa() {
        let neg = DissipationSpec::fatigue(ScalarFn::new(|z: f64| 1.0 - z), None, 1.0);
        assert!(neg.validate(0.0, 3.0, 100).is_err());
        let steep = DissipationSpec::fatigue(ScalarFn::new(|z: f64| 2.0 * z.abs()), None, 1.0);
        assert!(steep.validate(-1.0, 1.0, 100).is_err());
        let ok = DissipationSpec::fatigue(ScalarFn::new(|z: f64| (1.0 - 0.5 * z).max(0.2)), None, 0.5);
        assert!(ok.validate(-2.0, 5.0, 1000).is_ok());
    }
}
