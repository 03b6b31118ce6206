//! Liouville eigenpairs of linear feedback systems `ẋ = (A + B K) x`.
//!
//! For `M = A + B K` and a vector `e` with `Mᴴ e = conj(λ) e`, the linear
//! observable `φ(x) = Σ conj(eᵢ) xᵢ` satisfies `∇φ · M x = λ φ(x)`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::controlled_flow::{
    flatten_row_major, ControlPoint, ControlSampleSet, ControlSignal, VectorField,
};
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::koopman::koopman_set;
use crate::liouville::liouville_set;
use crate::observables::{max_abs_diff, Observable};
use crate::set_ops::fit_rate;

/// Eigenvalue `λ` of `A + B K` with left eigenvector `e` (`‖e‖ = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: Complex64,
    pub evec: Vec<Complex64>,
    /// Index of `K` among the admissible feedbacks.
    pub feedback_id: usize,
    /// `K` flattened row-major; the control value realising the pair.
    pub feedback: Vec<f64>,
}

impl EigenPair {
    /// `x ↦ Σ conj(eᵢ) xᵢ`.
    pub fn eigenfunction(&self) -> Observable {
        Observable::linear_window(self.evec.iter().map(|e| e.conj()).collect())
    }

    pub fn control(&self) -> ControlPoint {
        ControlPoint {
            id: self.feedback_id,
            coords: self.feedback.clone(),
        }
    }

    /// `‖Mᴴ e − conj(λ) e‖` for the closed-loop matrix `m`.
    pub fn adjoint_residual(&self, m: &DMatrix<f64>) -> f64 {
        let d = m.nrows();
        (0..d)
            .map(|i| {
                let mut acc = -self.lambda.conj() * self.evec[i];
                for j in 0..d {
                    acc += self.evec[j] * m[(j, i)];
                }
                acc.norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }
}

const SCHUR_EPS: f64 = 1e-14;
const SCHUR_ITERS: usize = 10_000;

fn cluster(values: &[Complex64]) -> Vec<Complex64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut out: Vec<(Complex64, usize)> = Vec::new();
    for v in sorted {
        let close = out
            .iter_mut()
            .find(|(c, n)| (*c / *n as f64 - v).norm() <= 1e-8 * v.norm().max(1.0));
        match close {
            Some((c, n)) => {
                *c += v;
                *n += 1;
            }
            None => out.push((v, 1)),
        }
    }
    out.into_iter().map(|(c, n)| c / n as f64).collect()
}

/// Orthonormal basis of the kernel of `m`, by SVD.
fn null_space(m: DMatrix<Complex64>, scale: f64) -> Vec<Vec<Complex64>> {
    let d = m.ncols();
    let svd = m.svd(false, true);
    let Some(v_t) = svd.v_t else {
        return Vec::new();
    };
    let tol = 1e-8 * scale.max(1.0);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    order
        .into_iter()
        .filter(|&k| svd.singular_values[k] <= tol)
        .map(|k| (0..d).map(|j| v_t[(k, j)].conj()).collect())
        .collect()
}

fn normalize(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let pivot = v.iter().copied().find(|z| z.norm() > 1e-12 * n);
    if let Some(p) = pivot {
        let rot = p.conj() / (p.norm() * n);
        v.iter_mut().for_each(|z| *z *= rot);
    }
    v
}

/// Closed-loop matrix `A + B K`.
pub fn closed_loop(a: &DMatrix<f64>, b: &DMatrix<f64>, k: &DMatrix<f64>) -> DMatrix<f64> {
    a + b * k
}

/// All eigenpairs of `A + B K` for each feedback, ordered by
/// `(feedback_id, Re λ, Im λ)`.
pub fn liouville_eigenpairs_linear(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    feedbacks: &[DMatrix<f64>],
) -> Result<Vec<EigenPair>> {
    let d = a.nrows();
    if a.ncols() != d || d == 0 {
        return Err(Error::Invalid("A must be square"));
    }
    if b.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: b.nrows(),
        });
    }
    if feedbacks
        .iter()
        .any(|k| k.nrows() != b.ncols() || k.ncols() != d)
    {
        return Err(Error::Invalid("each feedback must be m x d"));
    }
    let mut out = Vec::new();
    for (id, k) in feedbacks.iter().enumerate() {
        let m = closed_loop(a, b, k);
        let scale = m.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let schur = Schur::try_new(m.clone(), SCHUR_EPS, SCHUR_ITERS)
            .ok_or(Error::Eigensolver { feedback: id })?;
        let eigs: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
        let mt: DMatrix<Complex64> = m.transpose().map(|v| Complex64::new(v, 0.0));
        for lambda in cluster(&eigs) {
            let shifted = &mt - DMatrix::<Complex64>::identity(d, d) * lambda;
            let basis = null_space(shifted, scale);
            if basis.is_empty() {
                return Err(Error::Eigensolver { feedback: id });
            }
            for c in basis {
                // `c` solves Mᵀ c = λ c; the stored vector is e = conj(c).
                let evec = normalize(c.into_iter().map(|z| z.conj()).collect());
                out.push(EigenPair {
                    lambda,
                    evec,
                    feedback_id: id,
                    feedback: flatten_row_major(k),
                });
            }
        }
    }
    out.sort_by(|p, q| {
        p.feedback_id
            .cmp(&q.feedback_id)
            .then(p.lambda.re.total_cmp(&q.lambda.re))
            .then(p.lambda.im.total_cmp(&q.lambda.im))
    });
    Ok(out)
}

/// Eigenpairs of every admissible feedback of a linear feedback field.
pub fn eigenpairs_of(field: &VectorField) -> Result<Vec<EigenPair>> {
    match field {
        VectorField::LinearFeedback { a, b, feedbacks } => {
            liouville_eigenpairs_linear(a, b, feedbacks)
        }
        _ => Err(Error::Invalid("eigenpairs need a linear feedback field")),
    }
}

fn check_feedback(pair: &EigenPair, field: &VectorField) -> Result<()> {
    match field {
        VectorField::LinearFeedback { feedbacks, .. } => {
            let k = feedbacks
                .get(pair.feedback_id)
                .ok_or(Error::FeedbackMismatch)?;
            if flatten_row_major(k) != pair.feedback || pair.evec.len() != field.state_dim() {
                return Err(Error::FeedbackMismatch);
            }
            Ok(())
        }
        _ => Err(Error::FeedbackMismatch),
    }
}

fn dot_real(c: &[Complex64], v: &[f64]) -> Complex64 {
    c.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `max_x |∇φ_λ(x) · f_{u_λ}(x) − λ φ_λ(x)|` over the grid.
pub fn verify_liouville_eigen(
    pair: &EigenPair,
    field: &VectorField,
    grid: &SpatialGrid,
) -> Result<f64> {
    check_feedback(pair, field)?;
    let coeffs: Vec<Complex64> = pair.evec.iter().map(|e| e.conj()).collect();
    let mut f = alloc::vec![0.0; field.state_dim()];
    Ok(grid
        .nodes()
        .iter()
        .map(|x| {
            field.eval(x, &pair.feedback, &mut f);
            (dot_real(&coeffs, &f) - pair.lambda * dot_real(&coeffs, x)).norm()
        })
        .fold(0.0, f64::max))
}

fn feedback_signal(pair: &EigenPair, horizon: f64) -> Result<ControlSignal> {
    ControlSignal::constant(
        horizon,
        pair.control(),
        alloc::format!("u{}", pair.feedback_id),
    )
}

/// `max_x |φ_λ(Φ_(τ,t)(x)) − e^{λ(t−τ)} φ_λ(x)|` under the constant feedback.
pub fn verify_spectral_mapping(
    pair: &EigenPair,
    field: &VectorField,
    tau: f64,
    t: f64,
    grid: &SpatialGrid,
    step: f64,
) -> Result<f64> {
    check_feedback(pair, field)?;
    let horizon = tau.max(t);
    let signal = feedback_signal(pair, if horizon > 0.0 { horizon } else { 1.0 })?;
    let phi = pair.eigenfunction();
    let flowed = koopman_set(&phi, field, &[signal], tau, t, grid, step)?.sample(grid)?;
    let factor = (pair.lambda * (t - tau)).exp();
    let expected: Vec<Complex64> = phi.sample(grid)?.into_iter().map(|v| v * factor).collect();
    Ok(max_abs_diff(&flowed[0], &expected))
}

/// Largest deviation from proportionality accepted by the converse probe.
pub const PROPORTIONALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeStatus {
    /// The labelled signal gave `φ ∘ Φ ≈ ρ φ` on the grid.
    Proportional {
        label: alloc::string::String,
        deviation: f64,
    },
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub h: f64,
    pub status: ProbeStatus,
    /// `(ρ(h) − 1)/h`; `None` when inconclusive.
    pub lambda_est: Option<Complex64>,
    /// Grid distance of `lambda_est · φ` to `L(φ)`.
    pub generator_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConverseProbe {
    pub rows: Vec<ProbeRow>,
    /// `|λ(h_n) − λ(h_{n−1})| ≤ 10 h_{n−1}` for the two smallest conclusive `h`.
    pub converged: bool,
    pub gap_rate: Option<f64>,
}

impl ConverseProbe {
    pub fn inconclusive(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.status == ProbeStatus::Inconclusive)
    }

    /// Estimate at the smallest conclusive `h`.
    pub fn last_estimate(&self) -> Option<(f64, Complex64)> {
        self.rows
            .iter()
            .rev()
            .find_map(|r| r.lambda_est.map(|l| (r.h, l)))
    }
}

/// Recovers an eigenvalue from members of `𝒦_(τ,τ+h)(φ_λ)` proportional to `φ_λ`.
#[allow(clippy::too_many_arguments)]
pub fn converse_spectral_probe(
    phi_lambda: &Observable,
    field: &VectorField,
    signals: &[ControlSignal],
    controls: &ControlSampleSet,
    tau: f64,
    h_values: &[f64],
    grid: &SpatialGrid,
    step: f64,
) -> Result<ConverseProbe> {
    if signals.is_empty() {
        return Err(Error::EmptySet);
    }
    crate::set_ops::check_strictly_decreasing(h_values)?;
    let base = phi_lambda.sample(grid)?;
    let base_norm: f64 = base.iter().map(|v| v.norm_sqr()).sum();
    if base_norm == 0.0 {
        return Err(Error::Invalid("probe observable vanishes on the grid"));
    }
    let liouville = liouville_set(phi_lambda, field, controls, grid)?.sample(grid)?;
    let mut rows = Vec::with_capacity(h_values.len());
    for &h in h_values {
        let members = koopman_set(phi_lambda, field, signals, tau, tau + h, grid, step)?;
        let mut best: Option<(f64, Complex64, &str)> = None;
        for (vals, label) in members.sample(grid)?.iter().zip(members.labels()) {
            let rho = vals
                .iter()
                .zip(&base)
                .map(|(p, b)| b.conj() * p)
                .sum::<Complex64>()
                / base_norm;
            let deviation = vals
                .iter()
                .zip(&base)
                .map(|(p, b)| (p - rho * b).norm())
                .fold(0.0, f64::max);
            if deviation <= PROPORTIONALITY_TOL && best.is_none_or(|b| deviation < b.0) {
                best = Some((deviation, rho, label));
            }
        }
        rows.push(match best {
            Some((deviation, rho, label)) => {
                let lambda = (rho - Complex64::new(1.0, 0.0)) / h;
                let scaled: Vec<Complex64> = base.iter().map(|b| b * lambda).collect();
                let gap = liouville
                    .iter()
                    .map(|l| max_abs_diff(&scaled, l))
                    .fold(f64::INFINITY, f64::min);
                ProbeRow {
                    h,
                    status: ProbeStatus::Proportional {
                        label: label.into(),
                        deviation,
                    },
                    lambda_est: Some(lambda),
                    generator_gap: Some(gap),
                }
            }
            None => ProbeRow {
                h,
                status: ProbeStatus::Inconclusive,
                lambda_est: None,
                generator_gap: None,
            },
        });
    }
    let conclusive: Vec<&ProbeRow> = rows.iter().filter(|r| r.lambda_est.is_some()).collect();
    let converged = match conclusive.as_slice() {
        [.., prev, last] => {
            (last.lambda_est.unwrap_or_default() - prev.lambda_est.unwrap_or_default()).norm()
                <= 10.0 * prev.h
        }
        _ => false,
    };
    let (hs, gaps): (Vec<f64>, Vec<f64>) = conclusive
        .iter()
        .filter_map(|r| r.generator_gap.map(|g| (r.h, g)))
        .unzip();
    Ok(ConverseProbe {
        gap_rate: fit_rate(&hs, &gaps),
        converged,
        rows,
    })
}

fn is_integer(a: f64) -> bool {
    a == a.round()
}

fn power(base: Complex64, exponent: f64) -> Result<Complex64> {
    if is_integer(exponent) && exponent.abs() <= i32::MAX as f64 {
        Ok(base.powi(exponent as i32))
    } else if base.im == 0.0 && base.re >= 0.0 {
        Ok(Complex64::new(base.re.powf(exponent), 0.0))
    } else {
        Err(Error::NegativeBase)
    }
}

/// `max_x |∇(φ₁^{α₁} φ₂^{α₂}) · f_u − (α₁λ₁ + α₂λ₂) φ₁^{α₁} φ₂^{α₂}|` over the
/// grid, skipping nodes where a base with exponent below one vanishes.
pub fn eigen_product_check(
    pair1: &EigenPair,
    alpha1: f64,
    pair2: &EigenPair,
    alpha2: f64,
    field: &VectorField,
    grid: &SpatialGrid,
) -> Result<f64> {
    if pair1.feedback_id != pair2.feedback_id {
        return Err(Error::FeedbackMismatch);
    }
    check_feedback(pair1, field)?;
    check_feedback(pair2, field)?;
    let c1: Vec<Complex64> = pair1.evec.iter().map(|e| e.conj()).collect();
    let c2: Vec<Complex64> = pair2.evec.iter().map(|e| e.conj()).collect();
    let lambda = pair1.lambda * alpha1 + pair2.lambda * alpha2;
    let mut f = alloc::vec![0.0; field.state_dim()];
    let mut worst: f64 = 0.0;
    for x in grid.nodes() {
        let (p1, p2) = (dot_real(&c1, x), dot_real(&c2, x));
        if (p1.norm() < 1e-12 && alpha1 < 1.0) || (p2.norm() < 1e-12 && alpha2 < 1.0) {
            continue;
        }
        field.eval(x, &pair1.feedback, &mut f);
        let (d1, d2) = (dot_real(&c1, &f), dot_real(&c2, &f));
        let (q1, q2) = (power(p1, alpha1)?, power(p2, alpha2)?);
        let dq1 = if alpha1 == 0.0 {
            Complex64::zero()
        } else {
            power(p1, alpha1 - 1.0)? * alpha1 * d1
        };
        let dq2 = if alpha2 == 0.0 {
            Complex64::zero()
        } else {
            power(p2, alpha2 - 1.0)? * alpha2 * d2
        };
        let residual = dq1 * q2 + q1 * dq2 - lambda * (q1 * q2);
        worst = worst.max(residual.norm());
    }
    Ok(worst)
}
