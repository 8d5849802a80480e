//! P1 finite elements on a uniform interval: the discrete H¹(Ω) / L²(Ω)
//! setting every other module works in.
//!
//! Primal quantities ([`Field`]) are nodal coefficients. Dual quantities
//! ([`DualField`]) are stored as assembled load vectors, so the duality
//! pairing is the plain Euclidean dot product.

use std::ops::{Add, Index, Mul, Sub};
use std::sync::OnceLock;

use crate::error::{invalid, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::scalar::Scalar;

/// Nodal coefficient vector of an element of the primal space.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T>(Vec<T>);

/// Assembled coefficient vector of an element of the dual space.
#[derive(Debug, Clone, PartialEq)]
pub struct DualField<T>(Vec<T>);

macro_rules! vector_newtype {
    ($name:ident) => {
        impl<T: Scalar> $name<T> {
            pub fn new(values: Vec<T>) -> Self {
                Self(values)
            }

            pub fn zeros(n: usize) -> Self {
                Self(vec![T::zero(); n])
            }

            pub fn constant(n: usize, c: T) -> Self {
                Self(vec![c; n])
            }

            #[inline]
            pub fn values(&self) -> &[T] {
                &self.0
            }

            #[inline]
            pub fn values_mut(&mut self) -> &mut [T] {
                &mut self.0
            }

            pub fn into_values(self) -> Vec<T> {
                self.0
            }

            #[inline]
            pub fn len(&self) -> usize {
                self.0.len()
            }

            #[inline]
            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }

            pub fn map(&self, f: impl Fn(T) -> T) -> Self {
                Self(self.0.iter().map(|&v| f(v)).collect())
            }

            pub fn scaled(&self, s: T) -> Self {
                self.map(|v| v * s)
            }

            /// `self += a * other`
            pub fn axpy(&mut self, a: T, other: &Self) {
                crate::linalg::axpy(a, &other.0, &mut self.0);
            }

            pub fn norm_inf(&self) -> T {
                crate::linalg::norm_inf(&self.0)
            }

            /// Euclidean norm of the coefficient vector.
            pub fn norm_euclid(&self) -> T {
                dot(&self.0, &self.0).sqrt()
            }
        }

        impl<T> Index<usize> for $name<T> {
            type Output = T;
            fn index(&self, i: usize) -> &T {
                &self.0[i]
            }
        }

        impl<T: Scalar> Add for &$name<T> {
            type Output = $name<T>;
            fn add(self, rhs: Self) -> $name<T> {
                $name(self.0.iter().zip(&rhs.0).map(|(&a, &b)| a + b).collect())
            }
        }

        impl<T: Scalar> Sub for &$name<T> {
            type Output = $name<T>;
            fn sub(self, rhs: Self) -> $name<T> {
                $name(self.0.iter().zip(&rhs.0).map(|(&a, &b)| a - b).collect())
            }
        }

        impl<T: Scalar> Mul<T> for &$name<T> {
            type Output = $name<T>;
            fn mul(self, s: T) -> $name<T> {
                self.scaled(s)
            }
        }

        impl<T> From<Vec<T>> for $name<T> {
            fn from(v: Vec<T>) -> Self {
                Self(v)
            }
        }
    };
}

vector_newtype!(Field);
vector_newtype!(DualField);

impl<T: Scalar> DualField<T> {
    /// Duality pairing `⟨self, v⟩`.
    #[inline]
    pub fn pair(&self, v: &Field<T>) -> T {
        dot(&self.0, &v.0)
    }
}

/// Uniform P1 mesh of `[0, length]` with assembled mass, stiffness and
/// Riesz (`mass + stiffness`, the discrete `𝕀 − Δ`) matrices.
#[derive(Debug)]
pub struct Mesh<T> {
    length: T,
    coords: Vec<T>,
    mass: Matrix<T>,
    stiffness: Matrix<T>,
    riesz: Matrix<T>,
    riesz_factor: Cholesky<T>,
    mass_factor: Cholesky<T>,
    lumped: Vec<T>,
    riesz_inverse: OnceLock<Matrix<T>>,
}

impl<T: Scalar> Mesh<T> {
    pub fn uniform(n_nodes: usize, length: T) -> Result<Self> {
        if n_nodes < 2 {
            return Err(invalid(format!("mesh needs at least 2 nodes, got {n_nodes}")));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(invalid(format!("mesh length must be positive, got {length}")));
        }
        let n_el = n_nodes - 1;
        let h = length / T::from_count(n_el);
        let coords = (0..n_nodes).map(|i| h * T::from_count(i)).collect();

        let mut mass = Matrix::zeros(n_nodes);
        let mut stiffness = Matrix::zeros(n_nodes);
        let (m_d, m_o) = (h / T::lit(3.0), h / T::lit(6.0));
        let k = T::one() / h;
        for e in 0..n_el {
            let (a, b) = (e, e + 1);
            mass[(a, a)] += m_d;
            mass[(b, b)] += m_d;
            mass[(a, b)] += m_o;
            mass[(b, a)] += m_o;
            stiffness[(a, a)] += k;
            stiffness[(b, b)] += k;
            stiffness[(a, b)] -= k;
            stiffness[(b, a)] -= k;
        }
        let riesz = mass.add(&stiffness);
        let riesz_factor = riesz.cholesky()?;
        let mass_factor = mass.cholesky()?;
        let lumped = mass.row_sums();
        Ok(Self {
            length,
            coords,
            mass,
            stiffness,
            riesz,
            riesz_factor,
            mass_factor,
            lumped,
            riesz_inverse: OnceLock::new(),
        })
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn mass(&self) -> &Matrix<T> {
        &self.mass
    }

    pub fn stiffness(&self) -> &Matrix<T> {
        &self.stiffness
    }

    pub fn riesz(&self) -> &Matrix<T> {
        &self.riesz
    }

    /// Row sums of the consistent mass matrix.
    pub fn lumped_mass(&self) -> &[T] {
        &self.lumped
    }

    /// Dense `riesz⁻¹`, computed once on first use.
    pub fn riesz_inverse(&self) -> &Matrix<T> {
        self.riesz_inverse.get_or_init(|| self.riesz_factor.inverse())
    }

    /// Lower bound on the condition number of the Riesz matrix.
    pub fn riesz_condition_estimate(&self) -> T {
        self.riesz_factor.pivot_ratio()
    }

    pub fn field_from_fn(&self, f: impl Fn(T) -> T) -> Field<T> {
        Field(self.coords.iter().map(|&x| f(x)).collect())
    }

    pub fn check(&self, v: &[T], what: &str) -> Result<()> {
        if v.len() != self.n_nodes() {
            return Err(invalid(format!(
                "{what} has {} entries, mesh has {} nodes",
                v.len(),
                self.n_nodes()
            )));
        }
        Ok(())
    }

    /// `aᵀ · riesz · b`, the H¹ inner product.
    pub fn h1_inner(&self, a: &Field<T>, b: &Field<T>) -> Result<T> {
        self.check(a.values(), "left field")?;
        self.check(b.values(), "right field")?;
        Ok(self.riesz.bilinear(a.values(), b.values()))
    }

    pub fn h1_norm(&self, a: &Field<T>) -> T {
        self.riesz.bilinear(a.values(), a.values()).max(T::zero()).sqrt()
    }

    /// `aᵀ · mass · b`, the L² inner product of the interpolants.
    pub fn l2_inner(&self, a: &Field<T>, b: &Field<T>) -> T {
        self.mass.bilinear(a.values(), b.values())
    }

    pub fn l2_norm(&self, a: &Field<T>) -> T {
        self.l2_inner(a, a).max(T::zero()).sqrt()
    }

    pub fn riesz_apply(&self, a: &Field<T>) -> DualField<T> {
        DualField(self.riesz.mul_vec(a.values()))
    }

    pub fn riesz_solve(&self, w: &DualField<T>) -> Field<T> {
        Field(self.riesz_factor.solve(w.values()))
    }

    pub fn mass_apply(&self, a: &Field<T>) -> DualField<T> {
        DualField(self.mass.mul_vec(a.values()))
    }

    /// Inverse of [`Mesh::mass_apply`]: L²-density whose assembled vector is `w`.
    pub fn mass_solve(&self, w: &DualField<T>) -> Field<T> {
        Field(self.mass_factor.solve(w.values()))
    }

    /// Dual norm `sqrt(ωᵀ riesz⁻¹ ω)`.
    pub fn dual_norm(&self, w: &DualField<T>) -> T {
        w.pair(&self.riesz_solve(w)).max(T::zero()).sqrt()
    }
}

/// Nodal projection onto the discrete cone of nonnegative fields.
pub fn cone_project<T: Scalar>(a: &Field<T>) -> Field<T> {
    a.map(|v| v.max(T::zero()))
}

pub fn in_cone<T: Scalar>(a: &Field<T>) -> bool {
    a.values().iter().all(|&v| v >= T::zero())
}
