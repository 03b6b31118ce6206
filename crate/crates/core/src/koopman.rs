//! Sampled set-valued Koopman operators `𝒦_(τ,t)(φ) = {φ ∘ Φ^u_(τ,t) : u}`.
//!
//! A set is sampled over an explicit finite list of signals; member `k` carries
//! the label of signal `k`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::controlled_flow::{control_distance, flow_on_grid, ControlSignal, VectorField};
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::observables::{compose_with_flow, max_abs_diff, Observable, ObservableSet};
use crate::set_ops::{sampled_forward, sampled_report, InclusionReport};

fn labels_of(signals: &[ControlSignal]) -> Vec<String> {
    signals.iter().map(|s| String::from(s.label())).collect()
}

fn nonempty(signals: &[ControlSignal]) -> Result<()> {
    if signals.is_empty() {
        Err(Error::EmptySet)
    } else {
        Ok(())
    }
}

/// Flowed grid nodes, one list per signal.
fn flowed_nodes(
    field: &VectorField,
    signals: &[ControlSignal],
    tau: f64,
    t: f64,
    grid: &SpatialGrid,
    step: f64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    signals
        .iter()
        .map(|u| flow_on_grid(field, u, tau, t, grid, step))
        .collect()
}

fn evaluate_at(obs: &Observable, points: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    points
        .iter()
        .enumerate()
        .map(|(node, y)| {
            obs.eval(y).map_err(|e| match e {
                Error::OutOfGrid => Error::WindowEscape { node },
                other => other,
            })
        })
        .collect()
}

/// `{φ ∘ Φ^u_(τ,t) : u ∈ signals}` sampled on `grid`.
pub fn koopman_set(
    phi: &Observable,
    field: &VectorField,
    signals: &[ControlSignal],
    tau: f64,
    t: f64,
    grid: &SpatialGrid,
    step: f64,
) -> Result<ObservableSet> {
    nonempty(signals)?;
    let members = signals
        .iter()
        .map(|u| compose_with_flow(phi, field, u, tau, t, grid, step))
        .collect::<Result<Vec<_>>>()?;
    ObservableSet::new(members, labels_of(signals))
}

/// How the inner operator is evaluated off the grid in [`check_semigroup`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SemigroupMode {
    /// Inner members are lazy pull-backs, so only integrator error remains.
    #[default]
    Exact,
    /// Inner members are grid samples interpolated at the flowed nodes.
    GridInterpolated,
}

/// Adds every splice `u|v` at `switch` not already present (up to `d_𝒰 = 0`).
/// Splice labels read `"<u>|<v>"`.
pub fn splice_closure(signals: &[ControlSignal], switch: f64) -> Result<Vec<ControlSignal>> {
    nonempty(signals)?;
    let mut out: Vec<ControlSignal> = signals.to_vec();
    for u in signals {
        for v in signals {
            let w = u.splice(v, switch, format!("{}|{}", u.label(), v.label()))?;
            if !contains_signal(&out, &w)? {
                out.push(w);
            }
        }
    }
    Ok(out)
}

fn contains_signal(family: &[ControlSignal], w: &ControlSignal) -> Result<bool> {
    for s in family {
        if control_distance(s, w)? == 0.0 {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Hausdorff report between `𝒦_(τ,t)(φ)` and the composition of the two
/// factors, `{ψ ∘ Φ^u_(τ,s) : u, ψ ∈ 𝒦_(s,t)(φ)}`.
///
/// The family must be splice-closed at `s`.
#[allow(clippy::too_many_arguments)]
pub fn check_semigroup(
    phi: &Observable,
    field: &VectorField,
    signals: &[ControlSignal],
    tau: f64,
    s: f64,
    t: f64,
    grid: &SpatialGrid,
    step: f64,
    mode: SemigroupMode,
) -> Result<InclusionReport> {
    nonempty(signals)?;
    if !(tau <= s && s <= t) {
        return Err(Error::Invalid("semigroup check needs tau <= s <= t"));
    }
    for u in signals {
        for v in signals {
            let w = u.splice(v, s, "")?;
            if !contains_signal(signals, &w)? {
                return Err(Error::SpliceNotClosed {
                    left: String::from(u.label()),
                    right: String::from(v.label()),
                });
            }
        }
    }
    let direct = koopman_set(phi, field, signals, tau, t, grid, step)?.sample(grid)?;
    let inner: Vec<Observable> = match mode {
        SemigroupMode::Exact => signals
            .iter()
            .map(|v| phi.pullback(field, v, s, t, step))
            .collect(),
        SemigroupMode::GridInterpolated => koopman_set(phi, field, signals, s, t, grid, step)?
            .members()
            .to_vec(),
    };
    let outer = flowed_nodes(field, signals, tau, s, grid, step)?;
    let mut composed = Vec::with_capacity(inner.len() * outer.len());
    for points in &outer {
        for psi in &inner {
            composed.push(evaluate_at(psi, points)?);
        }
    }
    Ok(sampled_report(&direct, &composed))
}

/// Hausdorff distance between `𝒦(α φ)` and `α 𝒦(φ)`.
#[allow(clippy::too_many_arguments)]
pub fn check_homogeneity(
    phi: &Observable,
    alpha: f64,
    field: &VectorField,
    signals: &[ControlSignal],
    tau: f64,
    t: f64,
    grid: &SpatialGrid,
    step: f64,
) -> Result<f64> {
    nonempty(signals)?;
    let scaled_phi = phi.clone().scale_real(alpha);
    let flows = flowed_nodes(field, signals, tau, t, grid, step)?;
    let mut left = Vec::with_capacity(flows.len());
    let mut right = Vec::with_capacity(flows.len());
    for points in &flows {
        left.push(evaluate_at(&scaled_phi, points)?);
        right.push(
            evaluate_at(phi, points)?
                .into_iter()
                .map(|v| v * alpha)
                .collect::<Vec<_>>(),
        );
    }
    Ok(sampled_report(&left, &right).hausdorff)
}

/// Forward defect of `𝒦(φ₁ + φ₂)` into `{a + b : a ∈ 𝒦(φ₁), b ∈ 𝒦(φ₂)}`.
#[allow(clippy::too_many_arguments)]
pub fn check_subadditivity(
    phi1: &Observable,
    phi2: &Observable,
    field: &VectorField,
    signals: &[ControlSignal],
    tau: f64,
    t: f64,
    grid: &SpatialGrid,
    step: f64,
) -> Result<f64> {
    nonempty(signals)?;
    let sum = phi1.clone().plus(phi2.clone());
    let flows = flowed_nodes(field, signals, tau, t, grid, step)?;
    let mut of_sum = Vec::with_capacity(flows.len());
    let mut first = Vec::with_capacity(flows.len());
    let mut second = Vec::with_capacity(flows.len());
    for points in &flows {
        of_sum.push(evaluate_at(&sum, points)?);
        first.push(evaluate_at(phi1, points)?);
        second.push(evaluate_at(phi2, points)?);
    }
    let mut minkowski = Vec::with_capacity(first.len() * second.len());
    for a in &first {
        for b in &second {
            minkowski.push(a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>());
        }
    }
    Ok(sampled_forward(&of_sum, &minkowski))
}

/// Outcome of [`check_lipschitz_in_observable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzReport {
    /// One-sided defect of `𝒦(φ₁)` into `𝒦(φ₂)`.
    pub lhs: f64,
    /// `max |φ₁ − φ₂|` over all flowed nodes.
    pub rhs: f64,
    pub ok: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn check_lipschitz_in_observable(
    phi1: &Observable,
    phi2: &Observable,
    field: &VectorField,
    signals: &[ControlSignal],
    tau: f64,
    t: f64,
    grid: &SpatialGrid,
    step: f64,
) -> Result<LipschitzReport> {
    nonempty(signals)?;
    let flows = flowed_nodes(field, signals, tau, t, grid, step)?;
    let mut first = Vec::with_capacity(flows.len());
    let mut second = Vec::with_capacity(flows.len());
    let mut rhs: f64 = 0.0;
    for points in &flows {
        let a = evaluate_at(phi1, points)?;
        let b = evaluate_at(phi2, points)?;
        rhs = rhs.max(max_abs_diff(&a, &b));
        first.push(a);
        second.push(b);
    }
    let lhs = sampled_forward(&first, &second);
    Ok(LipschitzReport {
        lhs,
        rhs,
        ok: lhs <= rhs + 1e-12,
    })
}

/// Per member, `max |ψ(x) − ψ(y)|` over grid neighbours `x`, `y`: the modulus
/// of continuity at the grid spacing. Uniformly small moduli are the sampled
/// evidence of equicontinuity.
pub fn equicontinuity_moduli(set: &ObservableSet, grid: &SpatialGrid) -> Result<Vec<f64>> {
    let n = grid.points_per_axis();
    set.sample(grid)?
        .iter()
        .map(|vals| {
            let mut worst: f64 = 0.0;
            for i in 0..grid.len() {
                let multi = grid.multi_index(i);
                for k in 0..grid.dim() {
                    if multi[k] + 1 < n {
                        let mut next = multi.clone();
                        next[k] += 1;
                        worst = worst.max((vals[grid.flat_index(&next)] - vals[i]).norm());
                    }
                }
            }
            Ok(worst)
        })
        .collect()
}

/// Signal used for output times in `[start, end]`.
#[derive(Debug, Clone)]
pub struct ScheduleEntry {
    pub start: f64,
    pub end: f64,
    pub signal: ControlSignal,
}

/// One point `ψ_(τ,t)` of an observable curve.
#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub time: f64,
    /// Label of the signal realising `ψ_(τ,t)` as a member of `𝒦_(τ,t)(φ)`.
    pub label: String,
    pub observable: Observable,
}

/// `t ↦ φ ∘ Φ^{u_t}_(τ,t)` with `u_t` read off the schedule. Where intervals
/// share an endpoint the later entry wins.
pub fn build_observable_curve(
    phi: &Observable,
    field: &VectorField,
    tau: f64,
    schedule: &[ScheduleEntry],
    times: &[f64],
    grid: &SpatialGrid,
    step: f64,
) -> Result<Vec<CurvePoint>> {
    if schedule.iter().any(|e| !(e.start <= e.end)) {
        return Err(Error::Invalid("schedule interval with start after end"));
    }
    times
        .iter()
        .map(|&time| {
            let entry = schedule
                .iter()
                .rev()
                .find(|e| e.start <= time && time <= e.end)
                .ok_or(Error::ScheduleGap { time })?;
            Ok(CurvePoint {
                time,
                label: String::from(entry.signal.label()),
                observable: compose_with_flow(phi, field, &entry.signal, tau, time, grid, step)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controlled_flow::ControlSampleSet;

    fn setup() -> (VectorField, Vec<ControlSignal>, SpatialGrid, Observable) {
        let controls = ControlSampleSet::new(alloc::vec![
            alloc::vec![-1.0],
            alloc::vec![0.0],
            alloc::vec![1.0]
        ])
        .unwrap();
        (
            VectorField::scalar_affine(-1.0),
            controls.constant_signals(1.0).unwrap(),
            SpatialGrid::cube(1, 2.0, 21).unwrap(),
            Observable::bump(alloc::vec![0.0], 2.0).unwrap(),
        )
    }

    #[test]
    fn identity_and_zero_field() {
        let (field, signals, grid, phi) = setup();
        let k = koopman_set(&phi, &field, &signals, 0.4, 0.4, &grid, 1e-3).unwrap();
        let p = phi.sample(&grid).unwrap();
        assert!(k.sample(&grid).unwrap().iter().all(|m| *m == p));
        let k = koopman_set(&phi, &VectorField::zero(1), &signals, 0.0, 1.0, &grid, 1e-3).unwrap();
        assert!(k.sample(&grid).unwrap().iter().all(|m| *m == p));
    }

    #[test]
    fn contraction_halves_the_edge_node() {
        let (field, signals, grid, phi) = setup();
        let zero = &signals[1..2];
        let t = 2.0f64.ln();
        let k = koopman_set(&phi, &field, zero, 0.0, t, &grid, 1e-3).unwrap();
        let edge = k.sample(&grid).unwrap()[0][20];
        assert!((edge.re - 0.5625).abs() < 1e-10);
        assert_eq!(k.labels(), &["u1"]);
    }

    #[test]
    fn splice_closure_and_semigroup() {
        let (field, signals, grid, phi) = setup();
        assert!(matches!(
            check_semigroup(
                &phi,
                &field,
                &signals,
                0.0,
                0.5,
                1.0,
                &grid,
                1e-3,
                SemigroupMode::Exact
            ),
            Err(Error::SpliceNotClosed { .. })
        ));
        let family = splice_closure(&signals, 0.5).unwrap();
        assert_eq!(family.len(), 9);
        let r = check_semigroup(
            &phi,
            &field,
            &family,
            0.0,
            0.5,
            1.0,
            &grid,
            1e-3,
            SemigroupMode::Exact,
        )
        .unwrap();
        assert!(r.hausdorff <= 1e-6, "{r:?}");
        for s in [0.0, 1.0] {
            let fam = splice_closure(&signals, s).unwrap();
            let r = check_semigroup(
                &phi,
                &field,
                &fam,
                0.0,
                s,
                1.0,
                &grid,
                1e-3,
                SemigroupMode::Exact,
            )
            .unwrap();
            assert!(r.hausdorff <= 1e-12);
        }
        let zero = check_semigroup(
            &phi,
            &VectorField::zero(1),
            &family,
            0.0,
            0.5,
            1.0,
            &grid,
            1e-3,
            SemigroupMode::GridInterpolated,
        )
        .unwrap();
        assert_eq!(zero, InclusionReport::zero());
    }

    #[test]
    fn algebra_defects() {
        let (field, signals, grid, phi) = setup();
        for alpha in [0.0, 1.0, -2.5] {
            let d =
                check_homogeneity(&phi, alpha, &field, &signals, 0.0, 0.7, &grid, 1e-3).unwrap();
            assert!(d <= 1e-12);
        }
        let left = Observable::bump(alloc::vec![-1.0], 0.8).unwrap();
        let right = Observable::bump(alloc::vec![1.0], 0.8).unwrap();
        let d =
            check_subadditivity(&left, &right, &field, &signals, 0.0, 0.7, &grid, 1e-3).unwrap();
        assert!(d <= 1e-12);
        let d = check_subadditivity(
            &phi,
            &Observable::zero(),
            &field,
            &signals,
            0.0,
            0.7,
            &grid,
            1e-3,
        )
        .unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn lipschitz_pairing() {
        let (field, signals, grid, phi) = setup();
        let r = check_lipschitz_in_observable(&phi, &phi, &field, &signals, 0.0, 1.0, &grid, 1e-3)
            .unwrap();
        assert_eq!((r.lhs, r.rhs, r.ok), (0.0, 0.0, true));
        let other = phi.clone().plus(
            Observable::bump(alloc::vec![0.5], 1.0)
                .unwrap()
                .scale_real(0.3),
        );
        let r =
            check_lipschitz_in_observable(&phi, &other, &field, &signals, 0.0, 1.0, &grid, 1e-3)
                .unwrap();
        assert!(r.ok && r.lhs <= 0.3 + 1e-12);
    }

    #[test]
    fn curve_follows_schedule() {
        let (field, signals, grid, phi) = setup();
        let schedule = [
            ScheduleEntry {
                start: 0.0,
                end: 0.5,
                signal: signals[1].clone(),
            },
            ScheduleEntry {
                start: 0.5,
                end: 1.0,
                signal: signals[2].clone(),
            },
        ];
        let curve = build_observable_curve(
            &phi,
            &field,
            0.0,
            &schedule,
            &[0.25, 0.5, 0.75],
            &grid,
            1e-3,
        )
        .unwrap();
        assert_eq!(curve[0].label, "u1");
        assert_eq!(curve[1].label, "u2");
        let y = 1.0 - (-0.75f64).exp();
        let expected = (1.0f64 - y * y / 4.0).powi(2);
        let got = curve[2].observable.sample(&grid).unwrap()[10].re;
        assert!((got - expected).abs() < 1e-10);
        assert_eq!(
            build_observable_curve(&phi, &field, 0.0, &schedule[..1], &[0.75], &grid, 1e-3)
                .unwrap_err(),
            Error::ScheduleGap { time: 0.75 }
        );
    }

    #[test]
    fn moduli_follow_contraction() {
        let (field, signals, grid, phi) = setup();
        let base = equicontinuity_moduli(&ObservableSet::singleton(phi.clone(), "phi"), &grid).unwrap();
        let k = koopman_set(&phi, &field, &signals, 0.0, 1.0, &grid, 1e-3).unwrap();
        let moduli = equicontinuity_moduli(&k, &grid).unwrap();
        assert_eq!(moduli.len(), 3);
        // Flows of ẋ = −x + u contract, so members vary no faster than φ.
        assert!(moduli.iter().all(|m| *m > 0.0 && *m <= base[0]));
        let flat = ObservableSet::singleton(Observable::constant(Complex64::new(2.0, 1.0)), "c");
        assert_eq!(equicontinuity_moduli(&flat, &grid).unwrap(), alloc::vec![0.0]);
    }
}
