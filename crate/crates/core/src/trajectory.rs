//! Time-discrete trajectories on a uniform grid and the Bochner-type norms
//! used to measure them.

use crate::error::{invalid, Result};
use crate::scalar::{trapezoid, Scalar};
use crate::spatial::{DualField, Field, Mesh};

/// States `q(t_0), …, q(t_N)` on the grid `t_i = i·τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    time_step: T,
    states: Vec<Field<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(time_step: T, states: Vec<Field<T>>) -> Result<Self> {
        if !(time_step > T::zero()) {
            return Err(invalid("trajectory time step must be positive"));
        }
        if states.is_empty() {
            return Err(invalid("trajectory needs at least one state"));
        }
        let n = states[0].len();
        if states.iter().any(|s| s.len() != n) {
            return Err(invalid("trajectory states differ in length"));
        }
        Ok(Self { time_step, states })
    }

    pub fn zeros(time_step: T, n_steps: usize, n_nodes: usize) -> Self {
        Self {
            time_step,
            states: vec![Field::zeros(n_nodes); n_steps + 1],
        }
    }

    pub(crate) fn push(&mut self, state: Field<T>) {
        self.states.push(state);
    }

    pub fn time_step(&self) -> T {
        self.time_step
    }

    /// Number of grid points (`n_steps + 1`).
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn horizon(&self) -> T {
        self.time(self.n_steps())
    }

    #[inline]
    pub fn time(&self, i: usize) -> T {
        T::from_count(i) * self.time_step
    }

    pub fn state(&self, i: usize) -> &Field<T> {
        &self.states[i]
    }

    pub fn states(&self) -> &[Field<T>] {
        &self.states
    }

    /// Backward-difference rate on step `k` (interval `[t_k, t_{k+1}]`).
    pub fn rate(&self, k: usize) -> Field<T> {
        (&self.states[k + 1] - &self.states[k]).scaled(T::one() / self.time_step)
    }

    pub fn rates(&self) -> Vec<Field<T>> {
        (0..self.n_steps()).map(|k| self.rate(k)).collect()
    }

    /// Piecewise-linear interpolation in time; clamps outside `[0, T]`.
    pub fn at(&self, t: T) -> Field<T> {
        let s = (t / self.time_step).max(T::zero());
        let last = self.n_steps();
        let i = s.floor().to_usize().unwrap_or(last).min(last);
        if i >= last {
            return self.states[last].clone();
        }
        let w = s - T::from_count(i);
        let mut out = self.states[i].scaled(T::one() - w);
        out.axpy(w, &self.states[i + 1]);
        out
    }

    /// Every `stride`-th state.
    pub fn subsample(&self, stride: usize) -> Self {
        assert!(stride > 0);
        Self {
            time_step: self.time_step * T::from_count(stride),
            states: self.states.iter().step_by(stride).cloned().collect(),
        }
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len()
            || (self.time_step - other.time_step).abs() > T::epsilon() * self.time_step * T::lit(16.0)
        {
            return Err(invalid("trajectories live on different time grids"));
        }
        Ok(Self {
            time_step: self.time_step,
            states: self.states.iter().zip(&other.states).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn shifted(&self, offset: &Field<T>) -> Self {
        Self {
            time_step: self.time_step,
            states: self.states.iter().map(|s| s + offset).collect(),
        }
    }

    /// `max_i ‖q(t_i)‖_{H¹}`.
    pub fn c_norm(&self, mesh: &Mesh<T>) -> T {
        self.states.iter().map(|s| mesh.h1_norm(s)).fold(T::zero(), T::max)
    }

    /// Discrete `H¹(0,T;H¹(Ω))` norm: trapezoid of the squared state norms
    /// plus the exact integral of the piecewise-constant squared rate norms.
    pub fn h1_time_norm(&self, mesh: &Mesh<T>) -> T {
        let states = trapezoid(self.states.iter().map(|s| mesh.h1_norm(s).powi(2)), self.time_step);
        let rates: T = (0..self.n_steps())
            .map(|k| mesh.h1_norm(&self.rate(k)).powi(2))
            .sum::<T>()
            * self.time_step;
        (states + rates).sqrt()
    }

    /// `max_k ‖rate_k‖_{H¹}`.
    pub fn max_rate_norm(&self, mesh: &Mesh<T>) -> T {
        (0..self.n_steps())
            .map(|k| mesh.h1_norm(&self.rate(k)))
            .fold(T::zero(), T::max)
    }
}

/// Dual-valued samples of a load on a uniform grid.
#[derive(Debug, Clone)]
pub struct LoadSamples<T> {
    pub time_step: T,
    pub values: Vec<DualField<T>>,
}

impl<T: Scalar> LoadSamples<T> {
    fn dual_norms(&self, mesh: &Mesh<T>) -> (Vec<T>, Vec<T>) {
        let vals = self.values.iter().map(|w| mesh.dual_norm(w)).collect();
        let inv = T::one() / self.time_step;
        let ders = self
            .values
            .windows(2)
            .map(|w| mesh.dual_norm(&(&w[1] - &w[0])) * inv)
            .collect();
        (vals, ders)
    }

    /// Discrete `H¹(0,T;Y*)` norm with difference-quotient derivatives.
    pub fn h1_norm(&self, mesh: &Mesh<T>) -> T {
        let (vals, ders) = self.dual_norms(mesh);
        let a = trapezoid(vals.iter().map(|v| *v * *v), self.time_step);
        let b: T = ders.iter().map(|d| *d * *d).sum::<T>() * self.time_step;
        (a + b).sqrt()
    }

    /// Discrete `W^{1,1}(0,T;Y*)` norm with difference-quotient derivatives.
    pub fn w11_norm(&self, mesh: &Mesh<T>) -> T {
        let (vals, ders) = self.dual_norms(mesh);
        trapezoid(vals.into_iter(), self.time_step) + ders.iter().copied().sum::<T>() * self.time_step
    }

    /// `max_i ‖ℓ(t_i)‖_{Y*}`.
    pub fn c_norm(&self, mesh: &Mesh<T>) -> T {
        self.values.iter().map(|w| mesh.dual_norm(w)).fold(T::zero(), T::max)
    }

    pub fn difference(&self, other: &Self) -> Self {
        Self {
            time_step: self.time_step,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interpolation_hits_grid_and_midpoints() {
        let traj = Trajectory::new(
            0.5,
            vec![
                Field::new(vec![0.0, 0.0]),
                Field::new(vec![1.0, 2.0]),
                Field::new(vec![3.0, 2.0]),
            ],
        )
        .unwrap();
        assert_eq!(traj.at(0.5).values(), &[1.0, 2.0]);
        assert_eq!(traj.at(0.75).values(), &[2.0, 2.0]);
        assert_eq!(traj.at(5.0).values(), &[3.0, 2.0]);
        assert_eq!(traj.rate(1).values(), &[4.0, 0.0]);
    }

    #[test]
    fn h1_time_norm_of_linear_ramp() {
        // q(t) = t·1 on the unit interval: ∫ t² dt + ∫ 1 dt = 1/3 + 1.
        let mesh = Mesh::<f64>::uniform(3, 1.0).unwrap();
        let n = 1000;
        let tau = 1.0 / n as f64;
        let states = (0..=n).map(|i| Field::constant(3, i as f64 * tau)).collect();
        let traj = Trajectory::new(tau, states).unwrap();
        assert_relative_eq!(traj.h1_time_norm(&mesh), (1.0f64 / 3.0 + 1.0).sqrt(), epsilon = 1e-6);
        assert_relative_eq!(traj.c_norm(&mesh), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_ragged_states() {
        let r = Trajectory::new(0.1, vec![Field::<f64>::zeros(2), Field::zeros(3)]);
        assert!(r.is_err());
    }
}
