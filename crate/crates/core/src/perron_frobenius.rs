//! Perron-Frobenius operators on atomic measures `μ = Σ wᵢ δ_{xᵢ}`.
//!
//! Measures are never materialised beyond their atoms; they are probed through
//! pairings `⟨μ, φ⟩ = Σ wᵢ φ(xᵢ)` with finite banks of C¹ test functions.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::controlled_flow::{
    flow_on_points, ControlPoint, ControlSampleSet, ControlSignal, VectorField,
};
use crate::error::{Error, Result};
use crate::observables::Observable;
use crate::set_ops::{
    check_strictly_decreasing, fit_rate, seeded_rng, simplex_weights, successive_ratios,
};

/// Finite complex atomic measure.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleMeasure {
    positions: Vec<Vec<f64>>,
    weights: Vec<Complex64>,
}

impl ParticleMeasure {
    pub fn new(particles: Vec<(Vec<f64>, Complex64)>) -> Result<Self> {
        let dim = particles.first().map_or(0, |p| p.0.len());
        let mut positions = Vec::with_capacity(particles.len());
        let mut weights = Vec::with_capacity(particles.len());
        for (x, w) in particles {
            if x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: x.len(),
                });
            }
            if x.iter().any(|v| !v.is_finite()) || !w.re.is_finite() || !w.im.is_finite() {
                return Err(Error::Invalid("particle position or weight is not finite"));
            }
            positions.push(x);
            weights.push(w);
        }
        Ok(Self { positions, weights })
    }

    /// `w δ_x`.
    pub fn dirac(x: Vec<f64>, w: Complex64) -> Result<Self> {
        Self::new(alloc::vec![(x, w)])
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.positions.first().map(Vec::len)
    }

    /// `Σ |wᵢ|`.
    pub fn total_variation(&self) -> f64 {
        self.weights.iter().map(|w| w.norm()).sum()
    }

    pub fn particles(&self) -> impl Iterator<Item = (&[f64], Complex64)> {
        self.positions
            .iter()
            .map(Vec::as_slice)
            .zip(self.weights.iter().copied())
    }
}

/// Nonempty list of C¹ probes.
#[derive(Debug, Clone)]
pub struct TestBank {
    functions: Vec<Observable>,
}

impl TestBank {
    pub fn new(functions: Vec<Observable>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::EmptySet);
        }
        if functions.iter().any(|f| !f.is_c1()) {
            return Err(Error::NotDifferentiable);
        }
        Ok(Self { functions })
    }

    pub fn functions(&self) -> &[Observable] {
        &self.functions
    }
}

/// `⟨μ, φ⟩ = Σ wᵢ φ(xᵢ)`.
pub fn pairing(mu: &ParticleMeasure, phi: &Observable) -> Result<Complex64> {
    mu.particles().map(|(x, w)| Ok(w * phi.eval(x)?)).sum()
}

/// `Φ^u_(τ,t) # μ`: atoms move along the flow, weights are kept.
pub fn pushforward(
    mu: &ParticleMeasure,
    field: &VectorField,
    signal: &ControlSignal,
    tau: f64,
    t: f64,
    step: f64,
) -> Result<ParticleMeasure> {
    let positions = flow_on_points(field, signal, tau, t, &mu.positions, step)?;
    Ok(ParticleMeasure {
        positions,
        weights: mu.weights.clone(),
    })
}

/// `|⟨Φ#μ, φ⟩ − ⟨μ, φ ∘ Φ⟩|`, the right side evaluated through the lazy
/// pull-back at the atoms.
pub fn check_duality(
    mu: &ParticleMeasure,
    phi: &Observable,
    field: &VectorField,
    signal: &ControlSignal,
    tau: f64,
    t: f64,
    step: f64,
) -> Result<f64> {
    let pushed = pairing(&pushforward(mu, field, signal, tau, t, step)?, phi)?;
    let pulled = pairing(mu, &phi.pullback(field, signal, tau, t, step))?;
    Ok((pushed - pulled).norm())
}

/// `⟨−div(f_u μ), ζ⟩ = Σ wᵢ ∇ζ(xᵢ) · f_u(xᵢ)`.
pub fn divergence_pairing(
    mu: &ParticleMeasure,
    field: &VectorField,
    u: &ControlPoint,
    zeta: &Observable,
) -> Result<Complex64> {
    if !zeta.is_c1() {
        return Err(Error::NotDifferentiable);
    }
    let mut f = alloc::vec![0.0; field.state_dim()];
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, w) in mu.particles() {
        let grad = zeta.gradient(x)?;
        field.eval(x, &u.coords, &mut f);
        acc += w * grad.iter().zip(&f).map(|(g, v)| g * v).sum::<Complex64>();
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerronRow {
    pub h: f64,
    pub control_id: usize,
    /// `max_ζ |⟨(P_(τ,τ+h)μ − μ)/h, ζ⟩ − ⟨−div(f_u μ), ζ⟩|`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerronGeneratorStudy {
    pub rows: Vec<PerronRow>,
}

impl PerronGeneratorStudy {
    /// Worst residual over controls, per `h` in input order.
    pub fn worst_by_h(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for r in &self.rows {
            match out.last_mut() {
                Some(last) if last.0 == r.h => last.1 = last.1.max(r.residual),
                _ => out.push((r.h, r.residual)),
            }
        }
        out
    }

    pub fn halving_ratios(&self) -> Vec<f64> {
        successive_ratios(&self.worst_by_h().iter().map(|p| p.1).collect::<Vec<_>>())
    }

    pub fn fitted_rate(&self) -> Option<f64> {
        let (h, d): (Vec<f64>, Vec<f64>) = self.worst_by_h().into_iter().unzip();
        fit_rate(&h, &d)
    }
}

/// Generator residuals of the Perron-Frobenius semigroup under each constant
/// control, tested against `bank`.
pub fn perron_generator_study(
    mu: &ParticleMeasure,
    field: &VectorField,
    controls: &ControlSampleSet,
    tau: f64,
    h_values: &[f64],
    bank: &TestBank,
    step: f64,
) -> Result<PerronGeneratorStudy> {
    if controls.is_empty() || h_values.is_empty() {
        return Err(Error::EmptySet);
    }
    check_strictly_decreasing(h_values)?;
    let signals = controls.constant_signals(tau + h_values[0])?;
    let base = bank
        .functions()
        .iter()
        .map(|z| pairing(mu, z))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(h_values.len() * signals.len());
    for &h in h_values {
        for (u, signal) in controls.points().iter().zip(&signals) {
            let pushed = pushforward(mu, field, signal, tau, tau + h, step)?;
            let mut residual: f64 = 0.0;
            for (zeta, b) in bank.functions().iter().zip(&base) {
                let quotient = (pairing(&pushed, zeta)? - b) / h;
                let div = divergence_pairing(mu, field, u, zeta)?;
                residual = residual.max((quotient - div).norm());
            }
            rows.push(PerronRow {
                h,
                control_id: u.id,
                residual,
            });
        }
    }
    Ok(PerronGeneratorStudy { rows })
}

/// Outcome of [`check_adjoint_inequality`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjointReport {
    /// `min` over sampled `ν` and real probes `g` of
    /// `max_u Re⟨μ, g ∘ Φ^u⟩ − Re⟨ν, g⟩`.
    pub worst_margin: f64,
    /// `max |⟨Φ^u#μ, g⟩ − ⟨μ, g ∘ Φ^u⟩|` over matched signals.
    pub matched_defect: f64,
    /// Number of measures `ν` tested.
    pub measures: usize,
}

/// Evidence that sampled Perron images lie under the support function of the
/// Koopman set: `Re⟨ν, g⟩ ≤ max_u Re⟨μ, g ∘ Φ^u⟩` for `ν` among the pushforwards
/// and `convex_samples` random convex combinations of them.
///
/// Complex probes are split into real and imaginary parts, each tested with
/// both signs.
#[allow(clippy::too_many_arguments)]
pub fn check_adjoint_inequality(
    mu: &ParticleMeasure,
    field: &VectorField,
    signals: &[ControlSignal],
    tau: f64,
    t: f64,
    bank: &TestBank,
    step: f64,
    convex_samples: usize,
    seed: u64,
) -> Result<AdjointReport> {
    if signals.is_empty() {
        return Err(Error::EmptySet);
    }
    let pushed = signals
        .iter()
        .map(|s| pushforward(mu, field, s, tau, t, step))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = seeded_rng(seed);
    let mix: Vec<Vec<f64>> = (0..convex_samples)
        .map(|_| simplex_weights(&mut rng, signals.len()))
        .collect();

    let mut worst_margin = f64::INFINITY;
    let mut matched_defect: f64 = 0.0;
    for phi in bank.functions() {
        // ⟨ν_k, φ⟩ and ⟨μ, φ ∘ Φ^{u_k}⟩ by independent code paths.
        let nu_pairs = pushed
            .iter()
            .map(|nu| pairing(nu, phi))
            .collect::<Result<Vec<_>>>()?;
        let pulled = signals
            .iter()
            .map(|s| pairing_real_weights(mu, &phi.pullback(field, s, tau, t, step)))
            .collect::<Result<Vec<_>>>()?;
        let nu_real = pushed
            .iter()
            .map(|nu| pairing_real_weights(nu, phi))
            .collect::<Result<Vec<_>>>()?;
        for (a, s) in nu_pairs.iter().zip(signals) {
            let b = pairing(mu, &phi.pullback(field, s, tau, t, step))?;
            matched_defect = matched_defect.max((a - b).norm());
        }
        // Real probes g = ±Re φ, ±Im φ. For real g, Re⟨ν, g⟩ = Σ Re(wᵢ) g(yᵢ).
        let parts: [fn(Complex64) -> f64; 2] = [|z| z.re, |z| z.im];
        for part in parts {
            for sign in [1.0, -1.0] {
                let support = pulled
                    .iter()
                    .map(|v| sign * part(*v))
                    .fold(f64::NEG_INFINITY, f64::max);
                let values: Vec<f64> = nu_real.iter().map(|v| sign * part(*v)).collect();
                for v in &values {
                    worst_margin = worst_margin.min(support - v);
                }
                // Offsets from the smallest value keep equal pairings exact.
                let low = values.iter().copied().fold(f64::INFINITY, f64::min);
                for w in &mix {
                    let v = low
                        + w.iter()
                            .zip(&values)
                            .map(|(a, b)| a * (b - low))
                            .sum::<f64>();
                    worst_margin = worst_margin.min(support - v);
                }
            }
        }
    }
    Ok(AdjointReport {
        worst_margin,
        matched_defect,
        measures: signals.len() + convex_samples,
    })
}

/// `Σ Re(wᵢ) φ(xᵢ)`, whose real and imaginary parts are the real pairings
/// with `Re φ` and `Im φ`.
fn pairing_real_weights(mu: &ParticleMeasure, phi: &Observable) -> Result<Complex64> {
    mu.particles().map(|(x, w)| Ok(phi.eval(x)? * w.re)).sum()
}
