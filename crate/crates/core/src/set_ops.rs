//! Distances and limit diagnostics between finite observable sets.
//!
//! All distances are grid sup-norms. The forward defect of `A` into `B` is
//! `max_{a∈A} min_{b∈B} ‖a − b‖`; it vanishes iff every member of `A` is matched
//! by a member of `B`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::observables::{max_abs_diff, Observable, ObservableSet};

/// One-sided defects between two sets and their Hausdorff distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclusionReport {
    /// `sup_{a∈A} dist(a, B)`
    pub forward_defect: f64,
    /// `sup_{b∈B} dist(b, A)`
    pub backward_defect: f64,
    pub hausdorff: f64,
}

impl InclusionReport {
    fn new(forward_defect: f64, backward_defect: f64) -> Self {
        Self {
            forward_defect,
            backward_defect,
            hausdorff: forward_defect.max(backward_defect),
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0)
    }
}

pub(crate) fn sampled_forward(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    a.iter()
        .map(|x| {
            b.iter()
                .map(|y| max_abs_diff(x, y))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

pub(crate) fn sampled_report(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> InclusionReport {
    InclusionReport::new(sampled_forward(a, b), sampled_forward(b, a))
}

fn sample_nonempty(s: &ObservableSet, grid: &SpatialGrid) -> Result<Vec<Vec<Complex64>>> {
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    s.sample(grid)
}

pub fn hausdorff(
    a: &ObservableSet,
    b: &ObservableSet,
    grid: &SpatialGrid,
) -> Result<InclusionReport> {
    let (sa, sb) = (sample_nonempty(a, grid)?, sample_nonempty(b, grid)?);
    Ok(sampled_report(&sa, &sb))
}

/// `sup_{a∈A} dist(a, B)` alone.
pub fn forward_defect(a: &ObservableSet, b: &ObservableSet, grid: &SpatialGrid) -> Result<f64> {
    let (sa, sb) = (sample_nonempty(a, grid)?, sample_nonempty(b, grid)?);
    Ok(sampled_forward(&sa, &sb))
}

/// `{(ψ − base)/h : ψ ∈ S}` on the grid, labels preserved.
pub fn scaled_difference_set(
    set: &ObservableSet,
    base: &Observable,
    h: f64,
    grid: &SpatialGrid,
) -> Result<ObservableSet> {
    if h == 0.0 || !h.is_finite() {
        return Err(Error::ZeroScale);
    }
    let b = base.sample(grid)?;
    let members = set
        .members()
        .iter()
        .map(|m| {
            let vals = m
                .sample(grid)?
                .into_iter()
                .zip(&b)
                .map(|(v, w)| (v - w) / h)
                .collect();
            Observable::grid_sampled(grid, vals)
        })
        .collect::<Result<Vec<_>>>()?;
    ObservableSet::new(members, set.labels().to_vec())
}

/// Row of a Kuratowski–Painlevé diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticRow {
    pub h: f64,
    /// Members of the approximant far from the target (limsup evidence).
    pub forward_defect: f64,
    /// Target members not approached (liminf evidence).
    pub backward_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KuratowskiTable {
    pub rows: Vec<DiagnosticRow>,
    pub forward_rate: Option<f64>,
    pub backward_rate: Option<f64>,
}

impl KuratowskiTable {
    /// Smallest constant `C` with `defect(h) ≤ C h` over the three smallest `h`.
    pub fn fitted_constant(&self) -> f64 {
        self.rows
            .iter()
            .rev()
            .take(3)
            .map(|r| r.forward_defect.max(r.backward_defect) / r.h)
            .fold(0.0, f64::max)
    }

    /// Smallest forward defect along the sequence. Small values show that some
    /// subsequence satisfies the limsup inclusion; they do not show that the
    /// whole sequence does.
    pub fn best_forward_defect(&self) -> f64 {
        self.rows.iter().map(|r| r.forward_defect).fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn check_strictly_decreasing(h: &[f64]) -> Result<()> {
    for (i, w) in h.windows(2).enumerate() {
        if !(w[1] < w[0]) {
            return Err(Error::NotDecreasing { index: i + 1 });
        }
    }
    if h.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Invalid("h values must be positive"));
    }
    Ok(())
}

/// Per-`h` one-sided defects between the sets of `sequence` and `target`.
pub fn kuratowski_diagnostic(
    sequence: &[(f64, ObservableSet)],
    target: &ObservableSet,
    grid: &SpatialGrid,
) -> Result<KuratowskiTable> {
    let hs: Vec<f64> = sequence.iter().map(|(h, _)| *h).collect();
    check_strictly_decreasing(&hs)?;
    let t = sample_nonempty(target, grid)?;
    let rows = sequence
        .iter()
        .map(|(h, s)| {
            let r = sampled_report(&sample_nonempty(s, grid)?, &t);
            Ok(DiagnosticRow {
                h: *h,
                forward_defect: r.forward_defect,
                backward_defect: r.backward_defect,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let forward: Vec<f64> = rows.iter().map(|r| r.forward_defect).collect();
    let backward: Vec<f64> = rows.iter().map(|r| r.backward_defect).collect();
    Ok(KuratowskiTable {
        forward_rate: fit_rate(&hs, &forward),
        backward_rate: fit_rate(&hs, &backward),
        rows,
    })
}

/// Least-squares slope of `ln defect` against `ln h`, over the positive defects.
pub fn fit_rate(h: &[f64], defects: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(defects)
        .filter(|(_, d)| **d > 0.0)
        .map(|(h, d)| (h.ln(), d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `defects[i+1] / defects[i]` for consecutive entries.
pub fn successive_ratios(defects: &[f64]) -> Vec<f64> {
    defects.windows(2).map(|w| w[1] / w[0]).collect()
}

/// `Σ wᵢ sᵢ` for explicit nonnegative weights summing to one.
pub fn convex_combination(set: &ObservableSet, weights: &[f64]) -> Result<Observable> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if weights.len() != set.len() {
        return Err(Error::DimensionMismatch {
            expected: set.len(),
            found: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::Invalid(
            "convex weights must be nonnegative and sum to one",
        ));
    }
    let mut terms = set
        .members()
        .iter()
        .zip(weights)
        .map(|(m, w)| m.clone().scale_real(*w));
    let first = terms.next().ok_or(Error::EmptySet)?;
    Ok(terms.fold(first, Observable::plus))
}

/// Uniform draw from the probability simplex of dimension `k − 1`.
pub(crate) fn simplex_weights(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..k)
        .map(|_| {
            let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
            -u.ln()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `S` followed by `count` random convex combinations of its members, with
/// simplex-uniform weights drawn from `seed`.
pub fn convex_combinations(set: &ObservableSet, count: usize, seed: u64) -> Result<ObservableSet> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if count == 0 {
        return Err(Error::Invalid("count must be at least 1"));
    }
    let mut rng = seeded_rng(seed);
    let mut out = set.clone();
    for k in 0..count {
        let w = simplex_weights(&mut rng, set.len());
        let label: String = format!("co{seed}:{k}");
        out.push(convex_combination(set, &w)?, label);
    }
    Ok(out)
}
