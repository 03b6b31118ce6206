//! Set-valued Liouville operator `L(φ) = {∇φ · f_u : u ∈ U}`, the generator
//! study of the Koopman semigroup and the transport dynamics of observable curves.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::controlled_flow::{ControlPoint, ControlSampleSet, ControlSignal, VectorField};
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::koopman::koopman_set;
use crate::observables::{compose_with_flow, Observable, ObservableSet};
use crate::set_ops::{
    check_strictly_decreasing, convex_combinations, fit_rate, sampled_forward, sampled_report,
    successive_ratios,
};

fn directional(grad: &[Complex64], f: &[f64]) -> Complex64 {
    grad.iter().zip(f).map(|(g, v)| g * v).sum()
}

fn liouville_members(
    phi: &Observable,
    field: &VectorField,
    points: &[ControlPoint],
    grid: &SpatialGrid,
) -> Result<ObservableSet> {
    if !phi.is_c1() {
        return Err(Error::NotDifferentiable);
    }
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    let grads = (0..grid.len())
        .map(|i| phi.nodal_gradient(grid, i))
        .collect::<Result<Vec<_>>>()?;
    let mut out = ObservableSet::default();
    let mut f = alloc::vec![0.0; field.state_dim()];
    for u in points {
        let values = grid
            .nodes()
            .iter()
            .zip(&grads)
            .map(|(x, g)| {
                field.eval(x, &u.coords, &mut f);
                directional(g, &f)
            })
            .collect();
        out.push(
            Observable::grid_sampled(grid, values)?,
            format!("u{}", u.id),
        );
    }
    Ok(out)
}

/// `{x ↦ ∇φ(x) · f(x, u) : u ∈ controls}` on `grid`; labels `u<id>`.
pub fn liouville_set(
    phi: &Observable,
    field: &VectorField,
    controls: &ControlSampleSet,
    grid: &SpatialGrid,
) -> Result<ObservableSet> {
    liouville_members(phi, field, controls.points(), grid)
}

/// Tuning of [`generator_study`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorOptions {
    /// Random convex combinations added to the Liouville set for the
    /// convexified column.
    pub convex_samples: usize,
    pub seed: u64,
    /// When set, each ordered pair of distinct controls also contributes a
    /// chattering signal alternating the two values `cycles` times on
    /// `[τ, τ + h]`. These relaxed members approach the convex hull of the
    /// Liouville set rather than the set itself.
    pub relaxation_cycles: Option<usize>,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            convex_samples: 4096,
            seed: 0,
            relaxation_cycles: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorRow {
    pub h: f64,
    /// Liouville members not approached by the difference quotients.
    pub backward_defect: f64,
    /// Difference quotients far from the Liouville set.
    pub forward_defect: f64,
    /// Same, against the Liouville set enlarged by convex combinations.
    pub forward_defect_convexified: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorStudy {
    pub rows: Vec<GeneratorRow>,
    pub backward_rate: Option<f64>,
    pub forward_rate: Option<f64>,
    pub convexified_rate: Option<f64>,
}

impl GeneratorStudy {
    pub fn h_values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.h).collect()
    }

    pub fn backward_ratios(&self) -> Vec<f64> {
        successive_ratios(
            &self
                .rows
                .iter()
                .map(|r| r.backward_defect)
                .collect::<Vec<_>>(),
        )
    }

    pub fn forward_ratios(&self) -> Vec<f64> {
        successive_ratios(
            &self
                .rows
                .iter()
                .map(|r| r.forward_defect)
                .collect::<Vec<_>>(),
        )
    }

    pub fn convexified_ratios(&self) -> Vec<f64> {
        successive_ratios(
            &self
                .rows
                .iter()
                .map(|r| r.forward_defect_convexified)
                .collect::<Vec<_>>(),
        )
    }
}

fn chattering_signal(
    a: &ControlPoint,
    b: &ControlPoint,
    tau: f64,
    h: f64,
    cycles: usize,
) -> Result<ControlSignal> {
    let piece = h / (2 * cycles) as f64;
    let offset = tau / piece;
    if (offset - offset.round()).abs() > 1e-9 * offset.max(1.0) {
        return Err(Error::Invalid(
            "relaxed signals need tau to be a multiple of h / (2 cycles)",
        ));
    }
    let k0 = offset.round() as usize;
    let values = (0..k0 + 2 * cycles)
        .map(|k| {
            if k < k0 || (k - k0).is_multiple_of(2) {
                a.clone()
            } else {
                b.clone()
            }
        })
        .collect();
    ControlSignal::new(tau + h, values, format!("u{}~u{}", a.id, b.id))
}

/// Defects between `{(ψ − φ)/h : ψ ∈ 𝒦_(τ,τ+h)(φ)}` and `L(φ)` for each `h`.
///
/// `signals` must be constant; their values form the control sample of the
/// Liouville set.
#[allow(clippy::too_many_arguments)]
pub fn generator_study(
    phi: &Observable,
    field: &VectorField,
    signals: &[ControlSignal],
    tau: f64,
    h_values: &[f64],
    grid: &SpatialGrid,
    step: f64,
    options: &GeneratorOptions,
) -> Result<GeneratorStudy> {
    if signals.is_empty() {
        return Err(Error::EmptySet);
    }
    if signals.iter().any(|s| s.runs().len() != 1) {
        return Err(Error::Invalid("generator study needs constant signals"));
    }
    if h_values.is_empty() {
        return Err(Error::Invalid("no h values"));
    }
    check_strictly_decreasing(h_values)?;
    for &h in h_values {
        if signals
            .iter()
            .any(|s| tau + h > s.horizon() * (1.0 + 1e-12))
        {
            return Err(Error::StepExceedsHorizon { h });
        }
    }
    let points: Vec<ControlPoint> = signals.iter().map(|s| s.values()[0].clone()).collect();
    let liouville = liouville_members(phi, field, &points, grid)?;
    let plain = liouville.sample(grid)?;
    let hull = convex_combinations(&liouville, options.convex_samples.max(1), options.seed)?
        .sample(grid)?;
    let base = phi.sample(grid)?;

    let mut rows = Vec::with_capacity(h_values.len());
    for &h in h_values {
        let mut family: Vec<ControlSignal> = signals.to_vec();
        if let Some(cycles) = options.relaxation_cycles {
            for a in &points {
                for b in &points {
                    if a.coords != b.coords {
                        family.push(chattering_signal(a, b, tau, h, cycles.max(1))?);
                    }
                }
            }
        }
        let mut quotients = Vec::with_capacity(family.len());
        for s in &family {
            let member = koopman_set(
                phi,
                field,
                core::slice::from_ref(s),
                tau,
                tau + h,
                grid,
                step,
            )?;
            let vals = member.sample(grid)?.pop().ok_or(Error::EmptySet)?;
            quotients.push(
                vals.iter()
                    .zip(&base)
                    .map(|(v, b)| (v - b) / h)
                    .collect::<Vec<_>>(),
            );
        }
        let report = sampled_report(&quotients, &plain);
        rows.push(GeneratorRow {
            h,
            backward_defect: report.backward_defect,
            forward_defect: report.forward_defect,
            forward_defect_convexified: sampled_forward(&quotients, &hull),
        });
    }
    let column = |pick: fn(&GeneratorRow) -> f64| -> Vec<f64> { rows.iter().map(pick).collect() };
    Ok(GeneratorStudy {
        backward_rate: fit_rate(h_values, &column(|r| r.backward_defect)),
        forward_rate: fit_rate(h_values, &column(|r| r.forward_defect)),
        convexified_rate: fit_rate(h_values, &column(|r| r.forward_defect_convexified)),
        rows,
    })
}

/// `ψ_(τ, t_final) = φ ∘ Φ^u_(τ, t_final)` for each `τ`, by characteristics.
pub fn transport_solve(
    phi: &Observable,
    field: &VectorField,
    signal: &ControlSignal,
    t_final: f64,
    tau_grid: &[f64],
    grid: &SpatialGrid,
    step: f64,
) -> Result<Vec<Observable>> {
    if !phi.is_c1() {
        return Err(Error::NotDifferentiable);
    }
    if !field.is_smooth() {
        return Err(Error::NotSmooth);
    }
    tau_grid
        .iter()
        .map(|&tau| compose_with_flow(phi, field, signal, tau, t_final, grid, step))
        .collect()
}

/// Residuals of `∂_τ ψ + ∇ψ · f_u` at one interior curve time.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    pub tau: f64,
    /// Minimum over the control sample.
    pub residual: f64,
    /// Id of a minimising control (the first one on ties).
    pub argmin: usize,
    /// Residual per control, in sample order.
    pub per_control: Vec<f64>,
}

impl ResidualRow {
    /// Whether control `id` attains the minimum up to `tol`.
    pub fn is_minimiser(&self, id: usize, tol: f64) -> bool {
        self.per_control
            .get(id)
            .is_some_and(|r| *r <= self.residual + tol)
    }
}

/// Sup over interior grid nodes of `|∂_τ ψ + ∇ψ · f_u|` at each interior curve
/// time, with `∂_τ` by central differences on a uniform `τ` grid.
pub fn inclusion_residual(
    curve: &[(f64, Observable)],
    field: &VectorField,
    controls: &ControlSampleSet,
    grid: &SpatialGrid,
) -> Result<Vec<ResidualRow>> {
    if curve.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            found: curve.len(),
        });
    }
    if controls.is_empty() {
        return Err(Error::EmptySet);
    }
    let dt = curve[1].0 - curve[0].0;
    if !(dt.abs() > 0.0) {
        return Err(Error::NotUniform);
    }
    for w in curve.windows(2) {
        if ((w[1].0 - w[0].0) - dt).abs() > 1e-9 * dt.abs().max(1.0) {
            return Err(Error::NotUniform);
        }
    }
    let interior: Vec<usize> = (0..grid.len()).filter(|&i| grid.is_interior(i)).collect();
    let samples = curve
        .iter()
        .map(|(_, psi)| psi.sample(grid))
        .collect::<Result<Vec<_>>>()?;
    let mut f = alloc::vec![0.0; field.state_dim()];
    let mut rows = Vec::with_capacity(curve.len() - 2);
    for k in 1..curve.len() - 1 {
        let psi = &curve[k].1;
        let grads = interior
            .iter()
            .map(|&i| psi.nodal_gradient(grid, i))
            .collect::<Result<Vec<_>>>()?;
        let span = curve[k + 1].0 - curve[k - 1].0;
        let per_control: Vec<f64> = controls
            .points()
            .iter()
            .map(|u| {
                interior
                    .iter()
                    .zip(&grads)
                    .map(|(&i, g)| {
                        let dtau = (samples[k + 1][i] - samples[k - 1][i]) / span;
                        field.eval(&grid.nodes()[i], &u.coords, &mut f);
                        (dtau + directional(g, &f)).norm()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let (argmin, residual) =
            per_control
                .iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |best, (i, r)| if *r < best.1 { (i, *r) } else { best },
                );
        rows.push(ResidualRow {
            tau: curve[k].0,
            residual,
            argmin: controls.points()[argmin].id,
            per_control,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn controls(vals: &[f64]) -> ControlSampleSet {
        ControlSampleSet::new(vals.iter().map(|v| alloc::vec![*v]).collect()).unwrap()
    }

    fn bump() -> Observable {
        Observable::bump(alloc::vec![0.0], 2.0).unwrap()
    }

    #[test]
    fn liouville_examples() {
        let g = SpatialGrid::cube(1, 2.0, 5).unwrap();
        let l = liouville_set(
            &bump(),
            &VectorField::scalar_affine(-1.0),
            &controls(&[0.0]),
            &g,
        )
        .unwrap();
        assert!((l.sample(&g).unwrap()[0][3].re - 0.75).abs() < 1e-15);
        let z = liouville_set(&bump(), &VectorField::zero(1), &controls(&[0.0]), &g).unwrap();
        assert!(z.sample(&g).unwrap()[0]
            .iter()
            .all(|v| *v == Complex64::new(0.0, 0.0)));
        let sampled =
            Observable::grid_sampled(&g, alloc::vec![Complex64::new(1.0, 0.0); 5]).unwrap();
        assert_eq!(
            liouville_set(&sampled, &VectorField::zero(1), &controls(&[0.0]), &g).unwrap_err(),
            Error::NotDifferentiable
        );
    }

    #[test]
    fn generator_study_first_order() {
        let g = SpatialGrid::cube(1, 2.0, 41).unwrap();
        let field = VectorField::scalar_affine(-1.0);
        let signals = controls(&[-1.0, 0.0, 1.0]).constant_signals(1.0).unwrap();
        let h: Vec<f64> = (0..6).map(|k| 0.1 / (1u32 << k) as f64).collect();
        let s = generator_study(
            &bump(),
            &field,
            &signals,
            0.0,
            &h,
            &g,
            1e-4,
            &GeneratorOptions::default(),
        )
        .unwrap();
        let rate = s.backward_rate.unwrap();
        assert!((0.8..=1.2).contains(&rate), "{rate}");
        assert!(matches!(
            generator_study(
                &bump(),
                &field,
                &signals,
                0.5,
                &[0.6],
                &g,
                1e-3,
                &GeneratorOptions::default()
            ),
            Err(Error::StepExceedsHorizon { .. })
        ));
    }

    #[test]
    fn zero_field_generator_is_exact() {
        let g = SpatialGrid::cube(1, 2.0, 9).unwrap();
        let signals = controls(&[-1.0, 1.0]).constant_signals(1.0).unwrap();
        let opts = GeneratorOptions {
            relaxation_cycles: Some(2),
            ..GeneratorOptions::default()
        };
        let s = generator_study(
            &bump(),
            &VectorField::zero(1),
            &signals,
            0.0,
            &[0.2, 0.1],
            &g,
            1e-3,
            &opts,
        )
        .unwrap();
        for r in &s.rows {
            assert_eq!(
                (
                    r.backward_defect,
                    r.forward_defect,
                    r.forward_defect_convexified
                ),
                (0.0, 0.0, 0.0)
            );
        }
    }

    #[test]
    fn transport_and_residual() {
        let g = SpatialGrid::cube(1, 2.0, 401).unwrap();
        let field = VectorField::scalar_affine(-1.0);
        let cs = controls(&[-1.0, 0.0, 1.0]);
        let u = &cs.constant_signals(1.0).unwrap()[1];
        let taus: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let psi = transport_solve(&bump(), &field, u, 1.0, &taus, &g, 1e-3).unwrap();
        let at0 = psi[0].sample(&g).unwrap();
        let x = g.nodes()[300][0];
        let y = x * (-1.0f64).exp();
        assert!((at0[300].re - (1.0f64 - y * y / 4.0).powi(2)).abs() < 1e-10);
        assert_eq!(psi[100].sample(&g).unwrap(), bump().sample(&g).unwrap());
        let curve: Vec<(f64, Observable)> = taus.iter().copied().zip(psi).collect();
        let rows = inclusion_residual(&curve, &field, &cs, &g).unwrap();
        assert_eq!(rows.len(), 99);
        for r in &rows {
            assert!(r.residual <= 1e-3, "{r:?}");
            assert_eq!(r.argmin, 1);
        }
        assert!(matches!(
            inclusion_residual(&curve[..2], &field, &cs, &g),
            Err(Error::TooFewSamples { .. })
        ));
    }
}
