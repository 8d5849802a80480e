//! Strictly convex quadratic programs with simple bounds,
//!
//! ```text
//! min ½ xᵀHx − bᵀx   s.t.  lower ≤ x ≤ upper,
//! ```
//!
//! solved by a short projected-gradient phase (Barzilai–Borwein steps) that
//! guesses the active set, followed by a primal active-set polish that
//! terminates at an exact KKT point of the reduced systems.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_inf, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct QpOptions<T> {
    /// Absolute tolerance on the natural residual `‖x − Π(x − ∇f)‖∞`,
    /// scaled by `max(1, ‖b‖∞)`.
    pub tolerance: T,
    pub max_gradient_iters: usize,
    /// Cap on active-set changes; `0` selects `10·n + 50`.
    pub max_active_set_iters: usize,
}

impl<T: Scalar> Default for QpOptions<T> {
    fn default() -> Self {
        Self {
            tolerance: T::lit(1e-10).max(T::epsilon() * T::lit(1e3)),
            max_gradient_iters: 50,
            max_active_set_iters: 0,
        }
    }
}

pub struct BoxQp<'a, T> {
    pub hessian: &'a Matrix<T>,
    pub linear: &'a [T],
    pub lower: &'a [T],
    pub upper: &'a [T],
}

#[derive(Debug, Clone)]
pub struct QpSolution<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub kkt_residual: T,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Bound {
    Free,
    Lower,
    Upper,
}

impl<T: Scalar> BoxQp<'_, T> {
    fn n(&self) -> usize {
        self.linear.len()
    }

    #[inline]
    fn clamp(&self, i: usize, v: T) -> T {
        v.max(self.lower[i]).min(self.upper[i])
    }

    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        self.hessian
            .mul_vec(x)
            .into_iter()
            .zip(self.linear)
            .map(|(hx, &b)| hx - b)
            .collect()
    }

    pub fn objective(&self, x: &[T]) -> T {
        T::lit(0.5) * self.hessian.bilinear(x, x) - dot(self.linear, x)
    }

    /// `‖x − Π(x − ∇f(x))‖∞`.
    pub fn natural_residual(&self, x: &[T]) -> T {
        let g = self.gradient(x);
        (0..self.n())
            .map(|i| (x[i] - self.clamp(i, x[i] - g[i])).abs())
            .fold(T::zero(), T::max)
    }

    pub fn solve(&self, warm_start: Option<&[T]>, opts: &QpOptions<T>) -> Result<QpSolution<T>> {
        let n = self.n();
        assert_eq!(self.hessian.dim(), n);
        assert_eq!(self.lower.len(), n);
        assert_eq!(self.upper.len(), n);
        if let Some(i) = (0..n).find(|&i| self.lower[i] > self.upper[i]) {
            return Err(Error::InvalidArgument(format!(
                "empty box at index {i}: lower bound exceeds upper bound"
            )));
        }
        let tol = opts.tolerance * T::one().max(norm_inf(self.linear));
        let mut x: Vec<T> = match warm_start {
            Some(w) if w.len() == n => (0..n).map(|i| self.clamp(i, w[i])).collect(),
            _ => (0..n).map(|i| self.clamp(i, T::zero())).collect(),
        };
        let mut iterations = self.projected_gradient(&mut x, opts.max_gradient_iters, tol);
        iterations += self.active_set(&mut x, opts, tol)?;
        let kkt_residual = self.natural_residual(&x);
        if !(kkt_residual <= tol) {
            return Err(Error::NumericalFailure {
                context: "box QP".into(),
                residual: kkt_residual.to_f64_lossy(),
                iterations,
            });
        }
        Ok(QpSolution {
            x,
            iterations,
            kkt_residual,
        })
    }

    fn projected_gradient(&self, x: &mut [T], max_iters: usize, tol: T) -> usize {
        let n = self.n();
        let bound = self.hessian.gershgorin_bound();
        if !(bound > T::zero()) {
            return 0;
        }
        let mut step = T::one() / bound;
        let mut g = self.gradient(x);
        for it in 0..max_iters {
            let next: Vec<T> = (0..n).map(|i| self.clamp(i, x[i] - step * g[i])).collect();
            let s: Vec<T> = next.iter().zip(x.iter()).map(|(&a, &b)| a - b).collect();
            if norm_inf(&s) <= tol * step.min(T::one()) {
                x.copy_from_slice(&next);
                return it + 1;
            }
            let g_next = self.gradient(&next);
            let y: Vec<T> = g_next.iter().zip(&g).map(|(&a, &b)| a - b).collect();
            let sy = dot(&s, &y);
            step = if sy > T::zero() {
                (dot(&s, &s) / sy).min(T::lit(1e6) / bound)
            } else {
                T::one() / bound
            };
            x.copy_from_slice(&next);
            g = g_next;
        }
        max_iters
    }

    fn active_set(&self, x: &mut [T], opts: &QpOptions<T>, tol: T) -> Result<usize> {
        let n = self.n();
        let max_iters = if opts.max_active_set_iters == 0 {
            10 * n + 50
        } else {
            opts.max_active_set_iters
        };
        let mut state: Vec<Bound> = (0..n)
            .map(|i| {
                if x[i] <= self.lower[i] {
                    Bound::Lower
                } else if x[i] >= self.upper[i] {
                    Bound::Upper
                } else {
                    Bound::Free
                }
            })
            .collect();

        for it in 0..max_iters {
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == Bound::Free).collect();
            for i in 0..n {
                match state[i] {
                    Bound::Lower => x[i] = self.lower[i],
                    Bound::Upper => x[i] = self.upper[i],
                    Bound::Free => {}
                }
            }
            if !free.is_empty() {
                // reduced system H_FF z = b_F − H_FW x_W
                let rhs: Vec<T> = free
                    .iter()
                    .map(|&i| {
                        let row = self.hessian.row(i);
                        let fixed: T = (0..n).filter(|&j| state[j] != Bound::Free).map(|j| row[j] * x[j]).sum();
                        self.linear[i] - fixed
                    })
                    .collect();
                let z = self.hessian.submatrix(&free).cholesky()?.solve(&rhs);

                let mut alpha = T::one();
                let mut blocking = None;
                for (k, &i) in free.iter().enumerate() {
                    let p = z[k] - x[i];
                    if p < T::zero() && self.lower[i].is_finite() {
                        let a = (self.lower[i] - x[i]) / p;
                        if a < alpha {
                            alpha = a;
                            blocking = Some((i, Bound::Lower));
                        }
                    } else if p > T::zero() && self.upper[i].is_finite() {
                        let a = (self.upper[i] - x[i]) / p;
                        if a < alpha {
                            alpha = a;
                            blocking = Some((i, Bound::Upper));
                        }
                    }
                }
                let alpha = alpha.max(T::zero());
                for (k, &i) in free.iter().enumerate() {
                    x[i] = if blocking.is_none() {
                        z[k]
                    } else {
                        self.clamp(i, x[i] + alpha * (z[k] - x[i]))
                    };
                }
                if let Some((i, b)) = blocking {
                    state[i] = b;
                    continue;
                }
            }

            // optimal on the current face: check multiplier signs
            let g = self.gradient(x);
            let mut worst: Option<(usize, T)> = None;
            for i in 0..n {
                let violation = match state[i] {
                    Bound::Lower if self.lower[i] < self.upper[i] => -g[i],
                    Bound::Upper if self.lower[i] < self.upper[i] => g[i],
                    _ => continue,
                };
                if violation > tol && worst.is_none_or(|(_, w)| violation > w) {
                    worst = Some((i, violation));
                }
            }
            match worst {
                Some((i, _)) => state[i] = Bound::Free,
                None => return Ok(it + 1),
            }
        }
        Err(Error::NumericalFailure {
            context: "box QP active set".into(),
            residual: self.natural_residual(x).to_f64_lossy(),
            iterations: max_iters,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_minimum_inside_box() {
        let h: Matrix<f64> = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let b = [2.0, 4.0];
        let qp = BoxQp {
            hessian: &h,
            linear: &b,
            lower: &[-10.0, -10.0],
            upper: &[10.0, 10.0],
        };
        let sol = qp.solve(None, &QpOptions::default()).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-14 && (sol.x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nonnegativity_with_coupling() {
        // min ½xᵀHx − bᵀx, x ≥ 0 with b pushing x₁ negative
        let h = Matrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]);
        let b = [1.0, -3.0];
        let inf = f64::INFINITY;
        let qp = BoxQp {
            hessian: &h,
            linear: &b,
            lower: &[0.0, 0.0],
            upper: &[inf, inf],
        };
        let sol = qp.solve(None, &QpOptions::default()).unwrap();
        assert_eq!(sol.x[1], 0.0);
        assert!((sol.x[0] - 0.5).abs() < 1e-14);
        assert!(sol.kkt_residual < 1e-12);
    }

    #[test]
    fn empty_box_is_rejected() {
        let h = Matrix::identity(1);
        let qp = BoxQp {
            hessian: &h,
            linear: &[0.0],
            lower: &[1.0],
            upper: &[0.0],
        };
        assert!(qp.solve(None, &QpOptions::default()).is_err());
    }
}
