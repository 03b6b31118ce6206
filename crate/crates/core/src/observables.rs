//! Complex-valued observables `φ : ℝ^d → ℂ` and finite sets of them.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::controlled_flow::{flow_on_grid, flow_state_at, ControlSignal, VectorField};
use crate::error::{Error, Result};
pub use crate::grid::SpatialGrid;

/// Default finite-difference step for observables without analytic gradients.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Nodal values on a [`SpatialGrid`], extended by multilinear interpolation.
#[derive(Debug, Clone)]
pub struct GridSampled {
    grid: SpatialGrid,
    values: Arc<[Complex64]>,
    fd_step: f64,
}

impl GridSampled {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }
}

/// Lazy pull-back `φ ∘ Φ^u_(τ,t)`: each evaluation integrates the flow from the
/// query point, so no interpolation error is introduced.
#[derive(Debug, Clone)]
pub struct Composed {
    pub inner: Observable,
    pub field: VectorField,
    pub signal: ControlSignal,
    pub tau: f64,
    pub t: f64,
    pub step: f64,
}

/// Where an observable can be nonzero.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Empty,
    Ball { center: Vec<f64>, radius: f64 },
    Unbounded,
}

#[derive(Debug, Clone)]
pub enum Observable {
    /// `(1 − |x − c|²/r²)²` on `|x − c| < r`, zero elsewhere. C¹ with compact support.
    Bump {
        center: Vec<f64>,
        radius: f64,
    },
    /// `x ↦ Σ cᵢ xᵢ`; not compactly supported, so norms are window-relative.
    LinearWindow {
        coeffs: Vec<Complex64>,
    },
    Constant {
        value: Complex64,
    },
    Scaled {
        factor: Complex64,
        inner: Box<Observable>,
    },
    Sum(Box<Observable>, Box<Observable>),
    Product(Box<Observable>, Box<Observable>),
    /// `base^exponent`; non-integer exponents need a positive real base.
    Power {
        base: Box<Observable>,
        exponent: f64,
    },
    GridSampled(GridSampled),
    Composed(Arc<Composed>),
}

fn dot(a: &[Complex64], b: &[f64]) -> Complex64 {
    a.iter().zip(b).map(|(c, x)| c * x).sum()
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn is_integer(e: f64) -> bool {
    e.fract() == 0.0 && e.abs() < 2_147_483_647.0
}

fn power(b: Complex64, e: f64) -> Result<Complex64> {
    if is_integer(e) {
        return Ok(b.powi(e as i32));
    }
    if b.im != 0.0 || b.re < 0.0 {
        return Err(Error::NegativeBase);
    }
    Ok(Complex64::new(b.re.powf(e), 0.0))
}

impl Observable {
    pub fn bump(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid(
                "bump needs a finite center and a positive radius",
            ));
        }
        Ok(Observable::Bump { center, radius })
    }

    pub fn linear_window(coeffs: Vec<Complex64>) -> Self {
        Observable::LinearWindow { coeffs }
    }

    pub fn constant(value: Complex64) -> Self {
        Observable::Constant { value }
    }

    pub fn zero() -> Self {
        Observable::constant(Complex64::zero())
    }

    /// Stores `values` (one per grid node) as a grid-sampled observable.
    pub fn grid_sampled(grid: &SpatialGrid, values: Vec<Complex64>) -> Result<Self> {
        check_dim(grid.len(), values.len())?;
        Ok(Observable::GridSampled(GridSampled {
            grid: grid.clone(),
            values: values.into(),
            fd_step: DEFAULT_FD_STEP,
        }))
    }

    /// Lazy `self ∘ Φ^u_(τ,t)`.
    pub fn pullback(
        &self,
        field: &VectorField,
        signal: &ControlSignal,
        tau: f64,
        t: f64,
        step: f64,
    ) -> Self {
        Observable::Composed(Arc::new(Composed {
            inner: self.clone(),
            field: field.clone(),
            signal: signal.clone(),
            tau,
            t,
            step,
        }))
    }

    pub fn scale(self, factor: Complex64) -> Self {
        Observable::Scaled {
            factor,
            inner: Box::new(self),
        }
    }

    pub fn scale_real(self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    pub fn plus(self, other: Observable) -> Self {
        Observable::Sum(Box::new(self), Box::new(other))
    }

    pub fn minus(self, other: Observable) -> Self {
        self.plus(other.scale_real(-1.0))
    }

    pub fn times(self, other: Observable) -> Self {
        Observable::Product(Box::new(self), Box::new(other))
    }

    pub fn pow(self, exponent: f64) -> Self {
        Observable::Power {
            base: Box::new(self),
            exponent,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Complex64> {
        match self {
            Observable::Bump { center, radius } => {
                check_dim(center.len(), x.len())?;
                let s: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    / (radius * radius);
                Ok(if s >= 1.0 {
                    Complex64::zero()
                } else {
                    Complex64::new((1.0 - s) * (1.0 - s), 0.0)
                })
            }
            Observable::LinearWindow { coeffs } => {
                check_dim(coeffs.len(), x.len())?;
                Ok(dot(coeffs, x))
            }
            Observable::Constant { value } => Ok(*value),
            Observable::Scaled { factor, inner } => Ok(factor * inner.eval(x)?),
            Observable::Sum(a, b) => Ok(a.eval(x)? + b.eval(x)?),
            Observable::Product(a, b) => Ok(a.eval(x)? * b.eval(x)?),
            Observable::Power { base, exponent } => power(base.eval(x)?, *exponent),
            Observable::GridSampled(g) => g.grid.interpolate(&g.values, x),
            Observable::Composed(c) => {
                let y = flow_state_at(&c.field, &c.signal, c.tau, c.t, x, c.step)?;
                c.inner.eval(&y)
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        match self {
            Observable::Bump { center, radius } => {
                check_dim(center.len(), x.len())?;
                let r2 = radius * radius;
                let s: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    / r2;
                Ok(x.iter()
                    .zip(center)
                    .map(|(a, c)| {
                        if s >= 1.0 {
                            Complex64::zero()
                        } else {
                            Complex64::new(-4.0 * (1.0 - s) * (a - c) / r2, 0.0)
                        }
                    })
                    .collect())
            }
            Observable::LinearWindow { coeffs } => {
                check_dim(coeffs.len(), x.len())?;
                Ok(coeffs.clone())
            }
            Observable::Constant { .. } => Ok(alloc::vec![Complex64::zero(); x.len()]),
            Observable::Scaled { factor, inner } => {
                Ok(inner.gradient(x)?.into_iter().map(|g| factor * g).collect())
            }
            Observable::Sum(a, b) => Ok(a
                .gradient(x)?
                .into_iter()
                .zip(b.gradient(x)?)
                .map(|(p, q)| p + q)
                .collect()),
            Observable::Product(a, b) => {
                let (va, vb) = (a.eval(x)?, b.eval(x)?);
                Ok(a.gradient(x)?
                    .into_iter()
                    .zip(b.gradient(x)?)
                    .map(|(ga, gb)| ga * vb + va * gb)
                    .collect())
            }
            Observable::Power { base, exponent } => {
                if *exponent == 0.0 {
                    return Ok(alloc::vec![Complex64::zero(); x.len()]);
                }
                let factor = power(base.eval(x)?, exponent - 1.0)? * exponent;
                Ok(base.gradient(x)?.into_iter().map(|g| factor * g).collect())
            }
            Observable::GridSampled(g) => {
                check_dim(g.grid.dim(), x.len())?;
                central_difference(self, x, g.fd_step, Some(&g.grid))
            }
            Observable::Composed(_) => central_difference(self, x, DEFAULT_FD_STEP, None),
        }
    }

    /// Continuously differentiable forms. Grid-sampled observables are only
    /// piecewise multilinear.
    pub fn is_c1(&self) -> bool {
        match self {
            Observable::Bump { .. }
            | Observable::LinearWindow { .. }
            | Observable::Constant { .. } => true,
            Observable::Scaled { inner, .. } => inner.is_c1(),
            Observable::Sum(a, b) | Observable::Product(a, b) => a.is_c1() && b.is_c1(),
            Observable::Power { base, exponent } => {
                base.is_c1() && (*exponent == 0.0 || *exponent >= 1.0)
            }
            Observable::GridSampled(_) => false,
            Observable::Composed(c) => c.inner.is_c1() && c.field.is_smooth(),
        }
    }

    pub fn support(&self) -> Support {
        match self {
            Observable::Bump { center, radius } => Support::Ball {
                center: center.clone(),
                radius: *radius,
            },
            Observable::LinearWindow { coeffs } => {
                if coeffs.iter().all(|c| c.is_zero()) {
                    Support::Empty
                } else {
                    Support::Unbounded
                }
            }
            Observable::Constant { value } => {
                if value.is_zero() {
                    Support::Empty
                } else {
                    Support::Unbounded
                }
            }
            Observable::Scaled { factor, inner } => {
                if factor.is_zero() {
                    Support::Empty
                } else {
                    inner.support()
                }
            }
            Observable::Sum(a, b) => union(a.support(), b.support()),
            Observable::Product(a, b) => intersection(a.support(), b.support()),
            Observable::Power { base, exponent } => {
                if *exponent > 0.0 {
                    base.support()
                } else {
                    Support::Unbounded
                }
            }
            Observable::GridSampled(_) | Observable::Composed(_) => Support::Unbounded,
        }
    }

    /// Radius of the support ball, `∞` for non-compact forms.
    pub fn support_radius(&self) -> f64 {
        match self.support() {
            Support::Empty => 0.0,
            Support::Ball { radius, .. } => radius,
            Support::Unbounded => f64::INFINITY,
        }
    }

    pub fn is_compactly_supported(&self) -> bool {
        !matches!(self.support(), Support::Unbounded)
    }

    /// Values at every grid node. Grid-sampled observables on the same grid
    /// return their stored values without interpolation.
    pub fn sample(&self, grid: &SpatialGrid) -> Result<Vec<Complex64>> {
        match self {
            Observable::GridSampled(g) if g.grid == *grid => Ok(g.values.to_vec()),
            Observable::Scaled { factor, inner } => Ok(inner
                .sample(grid)?
                .into_iter()
                .map(|v| factor * v)
                .collect()),
            Observable::Sum(a, b) => Ok(a
                .sample(grid)?
                .into_iter()
                .zip(b.sample(grid)?)
                .map(|(p, q)| p + q)
                .collect()),
            Observable::Product(a, b) => Ok(a
                .sample(grid)?
                .into_iter()
                .zip(b.sample(grid)?)
                .map(|(p, q)| p * q)
                .collect()),
            Observable::Power { base, exponent } => base
                .sample(grid)?
                .into_iter()
                .map(|v| power(v, *exponent))
                .collect(),
            _ => grid.nodes().iter().map(|x| self.eval(x)).collect(),
        }
    }

    /// Gradient at node `index` of `grid`. Grid-sampled observables living on
    /// that grid use lattice central differences (one-sided on the boundary).
    pub fn nodal_gradient(&self, grid: &SpatialGrid, index: usize) -> Result<Vec<Complex64>> {
        match self {
            Observable::GridSampled(g) if g.grid == *grid => {
                let multi = grid.multi_index(index);
                let n = grid.points_per_axis();
                Ok((0..grid.dim())
                    .map(|k| {
                        let mut lo = multi.clone();
                        let mut hi = multi.clone();
                        if multi[k] > 0 {
                            lo[k] -= 1;
                        }
                        if multi[k] + 1 < n {
                            hi[k] += 1;
                        }
                        let span = grid.coord(k, hi[k]) - grid.coord(k, lo[k]);
                        (g.values[grid.flat_index(&hi)] - g.values[grid.flat_index(&lo)]) / span
                    })
                    .collect())
            }
            _ => self.gradient(&grid.nodes()[index]),
        }
    }
}

fn central_difference(
    obs: &Observable,
    x: &[f64],
    h: f64,
    window: Option<&SpatialGrid>,
) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        let (mut lo, mut hi) = (x[k] - h, x[k] + h);
        if let Some(g) = window {
            lo = lo.max(g.lower()[k]);
            hi = hi.min(g.upper()[k]);
        }
        probe[k] = hi;
        let fh = obs.eval(&probe)?;
        probe[k] = lo;
        let fl = obs.eval(&probe)?;
        probe[k] = x[k];
        out.push((fh - fl) / (hi - lo));
    }
    Ok(out)
}

fn union(a: Support, b: Support) -> Support {
    match (a, b) {
        (Support::Empty, s) | (s, Support::Empty) => s,
        (Support::Unbounded, _) | (_, Support::Unbounded) => Support::Unbounded,
        (
            Support::Ball {
                center: c1,
                radius: r1,
            },
            Support::Ball {
                center: c2,
                radius: r2,
            },
        ) => {
            let gap = crate::grid::distance(&c1, &c2);
            Support::Ball {
                center: c1,
                radius: r1.max(gap + r2),
            }
        }
    }
}

fn intersection(a: Support, b: Support) -> Support {
    match (a, b) {
        (Support::Empty, _) | (_, Support::Empty) => Support::Empty,
        (Support::Unbounded, s) | (s, Support::Unbounded) => s,
        (
            Support::Ball {
                center: c1,
                radius: r1,
            },
            Support::Ball {
                center: c2,
                radius: r2,
            },
        ) => {
            if crate::grid::distance(&c1, &c2) >= r1 + r2 {
                Support::Empty
            } else if r1 <= r2 {
                Support::Ball {
                    center: c1,
                    radius: r1,
                }
            } else {
                Support::Ball {
                    center: c2,
                    radius: r2,
                }
            }
        }
    }
}

/// `max_{x ∈ grid} |a(x) − b(x)|`, a lower bound of the sup-norm distance.
pub fn sup_norm_diff(a: &Observable, b: &Observable, grid: &SpatialGrid) -> Result<f64> {
    let (va, vb) = (a.sample(grid)?, b.sample(grid)?);
    Ok(max_abs_diff(&va, &vb))
}

pub(crate) fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max)
}

/// Grid-sampled `ψ` with `ψ(node) = obs(Φ^u_(τ,t)(node))`.
pub fn compose_with_flow(
    obs: &Observable,
    field: &VectorField,
    signal: &ControlSignal,
    tau: f64,
    t: f64,
    grid: &SpatialGrid,
    step: f64,
) -> Result<Observable> {
    let flowed = flow_on_grid(field, signal, tau, t, grid, step)?;
    let values = flowed
        .iter()
        .enumerate()
        .map(|(node, y)| {
            obs.eval(y).map_err(|e| match e {
                Error::OutOfGrid => Error::WindowEscape { node },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Observable::grid_sampled(grid, values)
}

/// Finite sample of a set of observables, each member tagged with the signal or
/// control that generated it.
#[derive(Debug, Clone, Default)]
pub struct ObservableSet {
    members: Vec<Observable>,
    labels: Vec<String>,
}

impl ObservableSet {
    pub fn new(members: Vec<Observable>, labels: Vec<String>) -> Result<Self> {
        check_dim(members.len(), labels.len())?;
        Ok(Self { members, labels })
    }

    pub fn singleton(member: Observable, label: impl Into<String>) -> Self {
        Self {
            members: alloc::vec![member],
            labels: alloc::vec![label.into()],
        }
    }

    pub fn push(&mut self, member: Observable, label: impl Into<String>) {
        self.members.push(member);
        self.labels.push(label.into());
    }

    pub fn members(&self) -> &[Observable] {
        &self.members
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Observable, &str)> {
        self.members
            .iter()
            .zip(self.labels.iter().map(String::as_str))
    }

    /// Nodal values of every member.
    pub fn sample(&self, grid: &SpatialGrid) -> Result<Vec<Vec<Complex64>>> {
        self.members.iter().map(|m| m.sample(grid)).collect()
    }

    /// Same set, with every member replaced by its grid samples.
    pub fn to_grid(&self, grid: &SpatialGrid) -> Result<Self> {
        let members = self
            .members
            .iter()
            .map(|m| Observable::grid_sampled(grid, m.sample(grid)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            members,
            labels: self.labels.clone(),
        })
    }
}
