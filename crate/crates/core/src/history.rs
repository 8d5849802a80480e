//! Volterra history operator `H(y)(t) = y₀ + ∫₀ᵗ b(t−s) y(s) ds` and its
//! time derivative, discretized by the composite trapezoid rule on the
//! solver grid.

use crate::error::{invalid, Result};
use crate::scalar::{Scalar, ScalarFn};
use crate::spatial::Field;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone)]
pub enum KernelKind<T> {
    /// `b ≡ 1`: the plain time integral of the state.
    Identity,
    /// Scalar kernel `b` with derivative `b′` multiplying the sampled state.
    ScalarConvolution { b: ScalarFn<T>, b_prime: ScalarFn<T> },
}

#[derive(Debug, Clone)]
pub struct KernelSpec<T> {
    pub kind: KernelKind<T>,
    /// Initial history value `y₀`.
    pub y0: Field<T>,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn identity(y0: Field<T>) -> Self {
        Self {
            kind: KernelKind::Identity,
            y0,
        }
    }

    pub fn convolution(b: ScalarFn<T>, b_prime: ScalarFn<T>, y0: Field<T>) -> Self {
        Self {
            kind: KernelKind::ScalarConvolution { b, b_prime },
            y0,
        }
    }

    #[inline]
    pub fn b(&self, t: T) -> T {
        match &self.kind {
            KernelKind::Identity => T::one(),
            KernelKind::ScalarConvolution { b, .. } => b.call(t),
        }
    }

    #[inline]
    pub fn b_prime(&self, t: T) -> T {
        match &self.kind {
            KernelKind::Identity => T::zero(),
            KernelKind::ScalarConvolution { b_prime, .. } => b_prime.call(t),
        }
    }

    /// Samples `b` and `b′` on `[0, horizon]` and rejects non-finite values.
    pub fn validate(&self, horizon: T, n_samples: usize) -> Result<()> {
        let n = n_samples.max(2);
        for i in 0..=n {
            let t = horizon * T::from_count(i) / T::from_count(n);
            if !self.b(t).is_finite() || !self.b_prime(t).is_finite() {
                return Err(invalid(format!("history kernel is not finite at t = {t}")));
            }
        }
        if !self.y0.is_finite() {
            return Err(invalid("initial history value is not finite"));
        }
        Ok(())
    }

    /// `|b(0)| + ‖b′‖_{L¹(0,T)}` by trapezoid.
    pub fn derivative_bound_factor(&self, horizon: T, n_samples: usize) -> T {
        let n = n_samples.max(2);
        let h = horizon / T::from_count(n);
        let l1 = crate::scalar::trapezoid((0..n + 1).map(|i| self.b_prime(h * T::from_count(i)).abs()), h);
        self.b(T::zero()).abs() + l1
    }
}

/// Trapezoid convolution `τ Σ_j w_j k((n−j)τ) y_j` over `y_0..=y_n`.
fn convolve<T: Scalar>(samples: &[Field<T>], tau: T, kernel: impl Fn(T) -> T) -> Field<T> {
    let n = samples.len() - 1;
    let mut acc = Field::zeros(samples[0].len());
    if n == 0 {
        return acc;
    }
    let half = T::lit(0.5);
    for (j, y) in samples.iter().enumerate() {
        let w = if j == 0 || j == n { half } else { T::one() };
        let k = kernel(T::from_count(n - j) * tau);
        acc.axpy(w * k * tau, y);
    }
    acc
}

fn check_index<T: Scalar>(traj: &Trajectory<T>, t_index: usize, kernel: &KernelSpec<T>) -> Result<()> {
    if t_index >= traj.len() {
        return Err(invalid(format!(
            "time index {t_index} outside trajectory of {} points",
            traj.len()
        )));
    }
    if kernel.y0.len() != traj.state(0).len() {
        return Err(invalid("initial history value does not match the trajectory"));
    }
    Ok(())
}

/// `H(y)(t_n)` from the trajectory prefix `y_0..=y_n`.
pub fn history_eval<T: Scalar>(kernel: &KernelSpec<T>, traj: &Trajectory<T>, t_index: usize) -> Result<Field<T>> {
    check_index(traj, t_index, kernel)?;
    let prefix = &traj.states()[..=t_index];
    let integral = convolve(prefix, traj.time_step(), |t| kernel.b(t));
    Ok(&kernel.y0 + &integral)
}

/// `d/dt H(y)(t_n) = b(0) y(t_n) + ∫₀ᵗ b′(t−s) y(s) ds`.
pub fn history_derivative<T: Scalar>(kernel: &KernelSpec<T>, traj: &Trajectory<T>, t_index: usize) -> Result<Field<T>> {
    check_index(traj, t_index, kernel)?;
    let prefix = &traj.states()[..=t_index];
    let mut out = prefix[t_index].scaled(kernel.b(T::zero()));
    if let KernelKind::ScalarConvolution { .. } = kernel.kind {
        let tail = convolve(prefix, traj.time_step(), |t| kernel.b_prime(t));
        out = &out + &tail;
    }
    Ok(out)
}

/// Incremental evaluation of the history along a running solve.
///
/// The identity kernel keeps a running trapezoid sum (O(1) per step); a
/// general convolution kernel re-weights every stored sample (O(n)).
#[derive(Debug, Clone)]
pub struct HistoryAccumulator<T> {
    kernel: KernelSpec<T>,
    time_step: T,
    samples: Vec<Field<T>>,
    cached_integral: Field<T>,
    value: Field<T>,
}

impl<T: Scalar> HistoryAccumulator<T> {
    pub fn new(kernel: &KernelSpec<T>, time_step: T) -> Self {
        let n = kernel.y0.len();
        Self {
            kernel: kernel.clone(),
            time_step,
            samples: Vec::new(),
            cached_integral: Field::zeros(n),
            value: kernel.y0.clone(),
        }
    }

    /// Number of samples pushed so far.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Current history value `H(y)(t_n)` where `n + 1` samples were pushed
    /// (`y₀` before the first push).
    pub fn value(&self) -> &Field<T> {
        &self.value
    }

    /// Appends `y(t_{n+1})` and updates the history value.
    pub fn step(&mut self, sample: Field<T>) -> Result<&Field<T>> {
        if sample.len() != self.kernel.y0.len() {
            return Err(invalid("history sample does not match the mesh"));
        }
        match self.kernel.kind {
            KernelKind::Identity => {
                if let Some(prev) = self.samples.last() {
                    let half_tau = self.time_step * T::lit(0.5);
                    self.cached_integral.axpy(half_tau, prev);
                    self.cached_integral.axpy(half_tau, &sample);
                }
                // only the latest sample is needed for the running sum
                self.samples.clear();
                self.samples.push(sample);
                self.value = &self.kernel.y0 + &self.cached_integral;
            }
            KernelKind::ScalarConvolution { .. } => {
                self.samples.push(sample);
                let kernel = &self.kernel;
                self.cached_integral = convolve(&self.samples, self.time_step, |t| kernel.b(t));
                self.value = &self.kernel.y0 + &self.cached_integral;
            }
        }
        Ok(&self.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn traj_from(tau: f64, n: usize, f: impl Fn(f64) -> f64) -> Trajectory<f64> {
        let states = (0..=n).map(|i| Field::constant(2, f(i as f64 * tau))).collect();
        Trajectory::new(tau, states).unwrap()
    }

    #[test]
    fn identity_on_constants_and_linears_is_exact() {
        let k = KernelSpec::identity(Field::zeros(2));
        let c = traj_from(0.1, 10, |_| 3.0);
        assert_relative_eq!(history_eval(&k, &c, 10).unwrap()[0], 3.0, epsilon = 1e-14);
        let lin = traj_from(0.1, 10, |s| s);
        assert_relative_eq!(history_eval(&k, &lin, 10).unwrap()[1], 0.5, epsilon = 1e-14);
        assert_eq!(history_derivative(&k, &lin, 4).unwrap(), lin.state(4).clone());
    }

    #[test]
    fn history_at_time_zero_is_initial_value() {
        let y0 = Field::new(vec![0.3, -1.0]);
        let k = KernelSpec::convolution(
            ScalarFn::new(|t: f64| (-t).exp()),
            ScalarFn::new(|t: f64| -(-t).exp()),
            y0.clone(),
        );
        let traj = traj_from(0.1, 5, |s| s.sin());
        assert_eq!(history_eval(&k, &traj, 0).unwrap(), y0);
    }

    #[test]
    fn exponential_kernel_matches_closed_form() {
        let k = KernelSpec::convolution(
            ScalarFn::new(|t: f64| (-t).exp()),
            ScalarFn::new(|t: f64| -(-t).exp()),
            Field::zeros(2),
        );
        let tau = 1e-3;
        let traj = traj_from(tau, 1000, |_| 1.0);
        let h = history_eval(&k, &traj, 1000).unwrap();
        assert!((h[0] - (1.0 - (-1.0f64).exp())).abs() < 1e-6);
        let d = history_derivative(&k, &traj, 1000).unwrap();
        assert!((d[0] - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let k = KernelSpec::identity(Field::zeros(2));
        let traj = traj_from(0.1, 3, |s| s);
        assert!(history_eval(&k, &traj, 4).is_err());
        assert!(history_derivative(&k, &traj, 9).is_err());
    }

    #[test]
    fn first_push_leaves_initial_value() {
        let y0 = Field::new(vec![0.0, 0.0]);
        let k = KernelSpec::identity(y0.clone());
        let mut acc = HistoryAccumulator::new(&k, 0.1);
        assert_eq!(acc.step(Field::new(vec![5.0, 1.0])).unwrap(), &y0);
    }
}
