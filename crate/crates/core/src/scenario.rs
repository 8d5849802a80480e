//! Problem description: quadratic energy, load, history kernel, dissipation
//! and time horizon.

use std::sync::Arc;

use crate::dissipation::DissipationSpec;
use crate::error::{invalid, Result};
use crate::history::KernelSpec;
use crate::scalar::{Scalar, ScalarFn};
use crate::spatial::{DualField, Field, Mesh};
use crate::trajectory::LoadSamples;

/// One space–time separable load contribution `a(t) · φ(x)`, with `φ` an
/// L² density given by nodal values.
#[derive(Debug, Clone)]
pub struct LoadTerm<T> {
    pub amplitude: ScalarFn<T>,
    pub density: Field<T>,
}

#[derive(Debug, Clone)]
pub enum LoadSpec<T> {
    /// `ℓ(t) = Σ aₖ(t) M φₖ`.
    Separable(Vec<LoadTerm<T>>),
    /// Assembled samples at strictly increasing times, linearly interpolated
    /// and held constant outside the table.
    Tabulated { times: Vec<T>, values: Vec<DualField<T>> },
    /// `ℓ(φ(t))` for a time map `φ`.
    Reparametrized { base: Box<LoadSpec<T>>, map: ScalarFn<T> },
}

impl<T: Scalar> LoadSpec<T> {
    pub fn zero() -> Self {
        LoadSpec::Separable(Vec::new())
    }

    pub fn separable(amplitude: ScalarFn<T>, density: Field<T>) -> Self {
        LoadSpec::Separable(vec![LoadTerm { amplitude, density }])
    }

    /// Spatially uniform load `a(t) · M 1`.
    pub fn uniform(amplitude: ScalarFn<T>, n_nodes: usize) -> Self {
        Self::separable(amplitude, Field::constant(n_nodes, T::one()))
    }

    pub fn tabulated(times: Vec<T>, values: Vec<DualField<T>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(invalid("tabulated load needs matching, nonempty time and value lists"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("tabulated load times must be strictly increasing"));
        }
        Ok(LoadSpec::Tabulated { times, values })
    }

    pub fn reparametrized(&self, map: ScalarFn<T>) -> Self {
        LoadSpec::Reparametrized {
            base: Box::new(self.clone()),
            map,
        }
    }

    pub fn eval(&self, mesh: &Mesh<T>, t: T) -> DualField<T> {
        match self {
            LoadSpec::Separable(terms) => {
                let mut density = Field::zeros(mesh.n_nodes());
                for term in terms {
                    density.axpy(term.amplitude.call(t), &term.density);
                }
                mesh.mass_apply(&density)
            }
            LoadSpec::Tabulated { times, values } => {
                let last = times.len() - 1;
                if t <= times[0] {
                    return values[0].clone();
                }
                if t >= times[last] {
                    return values[last].clone();
                }
                let k = times.partition_point(|&s| s <= t) - 1;
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                let mut out = values[k].scaled(T::one() - w);
                out.axpy(w, &values[k + 1]);
                out
            }
            LoadSpec::Reparametrized { base, map } => base.eval(mesh, map.call(t)),
        }
    }

    pub fn check(&self, mesh: &Mesh<T>) -> Result<()> {
        match self {
            LoadSpec::Separable(terms) => {
                for t in terms {
                    mesh.check(t.density.values(), "load density")?;
                    if !t.density.is_finite() {
                        return Err(invalid("load density is not finite"));
                    }
                }
                Ok(())
            }
            LoadSpec::Tabulated { values, .. } => {
                for v in values {
                    mesh.check(v.values(), "tabulated load")?;
                    if !v.is_finite() {
                        return Err(invalid("tabulated load is not finite"));
                    }
                }
                Ok(())
            }
            LoadSpec::Reparametrized { base, .. } => base.check(mesh),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario<T> {
    pub mesh: Arc<Mesh<T>>,
    /// Coercivity of the energy `α/2 ‖q‖²_{H¹} − ⟨ℓ(t), q⟩`.
    pub alpha: T,
    pub load: LoadSpec<T>,
    pub kernel: KernelSpec<T>,
    pub dissipation: DissipationSpec<T>,
    pub horizon: T,
    pub n_steps: usize,
}

impl<T: Scalar> Scenario<T> {
    pub fn new(
        mesh: Arc<Mesh<T>>,
        alpha: T,
        load: LoadSpec<T>,
        kernel: KernelSpec<T>,
        dissipation: DissipationSpec<T>,
        horizon: T,
        n_steps: usize,
    ) -> Result<Self> {
        let s = Self {
            mesh,
            alpha,
            load,
            kernel,
            dissipation,
            horizon,
            n_steps,
        };
        s.validate()?;
        Ok(s)
    }

    /// Spatially homogeneous problem: uniform load `a(t)·M1`, zero initial
    /// history, identity kernel. Its solution is constant in space and
    /// reduces to a scalar evolution.
    pub fn homogeneous(
        n_nodes: usize,
        alpha: T,
        amplitude: ScalarFn<T>,
        dissipation: DissipationSpec<T>,
        horizon: T,
        n_steps: usize,
    ) -> Result<Self> {
        let mesh = Arc::new(Mesh::uniform(n_nodes, T::one())?);
        Self::new(
            mesh,
            alpha,
            LoadSpec::uniform(amplitude, n_nodes),
            KernelSpec::identity(Field::zeros(n_nodes)),
            dissipation,
            horizon,
            n_steps,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero()) || !self.alpha.is_finite() {
            return Err(invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.horizon > T::zero()) || !self.horizon.is_finite() {
            return Err(invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.n_steps == 0 {
            return Err(invalid("n_steps must be at least 1"));
        }
        self.mesh.check(self.kernel.y0.values(), "initial history value")?;
        self.kernel.validate(self.horizon, self.n_steps.min(1000))?;
        self.load.check(&self.mesh)?;
        let l0 = self.load.eval(&self.mesh, T::zero());
        if !l0.is_finite() {
            return Err(invalid("load is not finite at t = 0"));
        }
        Ok(())
    }

    #[inline]
    pub fn time_step(&self) -> T {
        self.horizon / T::from_count(self.n_steps)
    }

    #[inline]
    pub fn time(&self, i: usize) -> T {
        T::from_count(i) * self.time_step()
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    pub fn with_load(&self, load: LoadSpec<T>) -> Self {
        Self { load, ..self.clone() }
    }

    pub fn with_steps(&self, n_steps: usize) -> Self {
        Self {
            n_steps,
            ..self.clone()
        }
    }

    pub fn with_dissipation(&self, dissipation: DissipationSpec<T>) -> Self {
        Self {
            dissipation,
            ..self.clone()
        }
    }

    pub fn load_at(&self, t: T) -> DualField<T> {
        self.load.eval(&self.mesh, t)
    }

    pub fn load_samples(&self) -> LoadSamples<T> {
        LoadSamples {
            time_step: self.time_step(),
            values: (0..=self.n_steps).map(|i| self.load_at(self.time(i))).collect(),
        }
    }

    pub fn energy(&self, t: T, q: &Field<T>) -> T {
        T::lit(0.5) * self.alpha * self.mesh.riesz().bilinear(q.values(), q.values()) - self.load_at(t).pair(q)
    }

    /// `−∂_q E(t, q) = ℓ(t) − α V q`.
    pub fn driving_force(&self, t: T, q: &Field<T>) -> DualField<T> {
        let mut f = self.load_at(t);
        f.axpy(-self.alpha, &self.mesh.riesz_apply(q));
        f
    }
}
