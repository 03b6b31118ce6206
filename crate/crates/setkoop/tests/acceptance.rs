//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

#[path = "../../core/tests/common/expm.rs"]
mod expm;

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use expm::{expm, expm_apply};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use setkoop::{run_scenario, RunOptions, Scenario, Status, CHECKS};
use setkoop_core::controlled_flow::{
    check_continuity_in_control, flow_on_grid, is_nonincreasing_with_slack,
};
use setkoop_core::koopman::{
    check_homogeneity, check_lipschitz_in_observable, check_semigroup, check_subadditivity,
    koopman_set, splice_closure, SemigroupMode,
};
use setkoop_core::liouville::{
    generator_study, inclusion_residual, liouville_set, transport_solve, GeneratorOptions,
};
use setkoop_core::perron_frobenius::{
    check_adjoint_inequality, check_duality, perron_generator_study, pushforward,
};
use setkoop_core::spectral::{
    converse_spectral_probe, eigen_product_check, eigenpairs_of, verify_liouville_eigen,
    verify_spectral_mapping,
};
use setkoop_core::{
    Complex64, ControlPoint, ControlSampleSet, ControlSignal, DMatrix, Observable, ParticleMeasure,
    SpatialGrid, TestBank, VectorField,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

trait OrFail<T> {
    fn or_fail(self) -> Result<T, String>;
}

impl<T, E: Display> OrFail<T> for Result<T, E> {
    fn or_fail(self) -> Result<T, String> {
        self.map_err(|e| e.to_string())
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let spent = start.elapsed();
    ensure(spent < limit, || {
        format!("took {spent:.2?}, limit {limit:?}")
    })
}

fn scalar_controls(values: &[f64]) -> ControlSampleSet {
    ControlSampleSet::new(values.iter().map(|v| vec![*v]).collect()).unwrap()
}

fn bump(center: f64, radius: f64) -> Observable {
    Observable::bump(vec![center], radius).unwrap()
}

/// Closed form of `ẋ = a x + u`.
fn affine_flow(a: f64, u: f64, x0: f64, dt: f64) -> f64 {
    let eq = -u / a;
    eq + (x0 - eq) * (a * dt).exp()
}

fn linear_system(a: [f64; 4]) -> VectorField {
    VectorField::linear_feedback(
        DMatrix::from_row_slice(2, 2, &a),
        DMatrix::identity(2, 2),
        vec![DMatrix::zeros(2, 2)],
    )
    .unwrap()
}

const DIAG: [f64; 4] = [-1.0, 0.0, 0.0, -2.0];
const ROTATION: [f64; 4] = [0.0, 1.0, -1.0, 0.0];

fn halvings(k: i32) -> Vec<f64> {
    (0..k).map(|i| 0.1 * 0.5f64.powi(i)).collect()
}

fn flow_oracles() -> Outcome {
    let start = Instant::now();
    let field = VectorField::scalar_affine(-1.0);
    let grid = SpatialGrid::cube(1, 2.0, 41).or_fail()?;
    let mut worst: f64 = 0.0;
    for (id, u) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
        let s = ControlSignal::constant(
            1.0,
            ControlPoint {
                id,
                coords: vec![u],
            },
            "u",
        )
        .or_fail()?;
        let flowed = flow_on_grid(&field, &s, 0.0, 1.0, &grid, 1e-3).or_fail()?;
        for (x, y) in grid.nodes().iter().zip(&flowed) {
            worst = worst.max((y[0] - affine_flow(-1.0, u, x[0], 1.0)).abs());
        }
    }
    let field = linear_system(DIAG);
    let grid = SpatialGrid::cube(2, 2.0, 21).or_fail()?;
    let s = field
        .feedback_controls()
        .or_fail()?
        .constant_signals(1.0)
        .or_fail()?
        .remove(0);
    let flowed = flow_on_grid(&field, &s, 0.0, 1.0, &grid, 1e-3).or_fail()?;
    let m = DMatrix::from_row_slice(2, 2, &DIAG);
    for (x, y) in grid.nodes().iter().zip(&flowed) {
        for (p, q) in y.iter().zip(expm_apply(&m, 1.0, x)) {
            worst = worst.max((p - q).abs());
        }
    }
    ensure(worst <= 1e-8, || format!("max error {worst:e}"))?;
    within(start, Duration::from_secs(5))?;
    Ok(format!("max error {worst:e}"))
}

fn zero_field_config() -> String {
    let mut text = String::from(
        "[system]\nfamily = \"linear_feedback\"\na = [[0.0, 0.0], [0.0, 0.0]]\nb = [[1.0, 0.0], [0.0, 1.0]]\n\
         feedbacks = [[[0.0, 0.0], [0.0, 0.0]]]\n\n[grid]\nlower = [-2.0, -2.0]\nupper = [2.0, 2.0]\n\
         points_per_axis = 9\n\n[time]\nhorizon = 1.0\ntau = 0.0\nt = 1.0\nstep = 1e-2\nh0 = 0.1\n\
         h_factor = 0.5\nh_count = 4\n",
    );
    for c in CHECKS {
        text.push_str(&format!("\n[[checks]]\nname = \"{}\"\n", c.name));
    }
    text
}

fn zero_field() -> Outcome {
    let start = Instant::now();
    let field = VectorField::zero(2);
    let grid = SpatialGrid::cube(2, 2.0, 9).or_fail()?;
    let controls = ControlSampleSet::new(vec![vec![-1.0], vec![0.0], vec![1.0]]).or_fail()?;
    let signals = controls.constant_signals(1.0).or_fail()?;
    let phi = Observable::bump(vec![0.5, 0.0], 1.5).or_fail()?;
    let base = phi.sample(&grid).or_fail()?;
    let koopman = koopman_set(&phi, &field, &signals, 0.0, 1.0, &grid, 1e-3).or_fail()?;
    for member in koopman.sample(&grid).or_fail()? {
        ensure(member == base, || "Koopman member differs from φ".into())?;
    }
    let liouville = liouville_set(&phi, &field, &controls, &grid).or_fail()?;
    for member in liouville.sample(&grid).or_fail()? {
        ensure(
            member.iter().all(|v| *v == Complex64::new(0.0, 0.0)),
            || "Liouville member is nonzero".into(),
        )?;
    }
    let mu = ParticleMeasure::new(vec![
        (vec![0.3, -1.0], Complex64::new(1.0, 0.5)),
        (vec![-1.5, 0.2], Complex64::new(-0.25, 0.0)),
    ])
    .or_fail()?;
    let pushed = pushforward(&mu, &field, &signals[2], 0.0, 1.0, 1e-3).or_fail()?;
    ensure(pushed == mu, || "pushforward moved the measure".into())?;

    let dir = tempfile::tempdir().or_fail()?;
    let scenario = Scenario::from_toml(&zero_field_config()).or_fail()?;
    let options = RunOptions {
        output_dir: Some(dir.path().to_path_buf()),
        ..RunOptions::default()
    };
    let report = run_scenario(scenario, &options).or_fail()?;
    for row in &report.rows {
        ensure(
            row.status == Status::Pass && row.worst_defect == 0.0,
            || {
                format!(
                    "{}: {} with defect {:e}",
                    row.check,
                    row.status.as_str(),
                    row.worst_defect
                )
            },
        )?;
    }
    within(start, Duration::from_secs(5))?;
    Ok(format!("{} checks at exactly 0", report.rows.len()))
}

fn semigroup() -> Outcome {
    let field = VectorField::scalar_affine(-1.0);
    let grid = SpatialGrid::cube(1, 2.0, 41).or_fail()?;
    let base = scalar_controls(&[-1.0, 0.0, 1.0])
        .constant_signals(1.0)
        .or_fail()?;
    let family = splice_closure(&base, 0.5).or_fail()?;
    let r = check_semigroup(
        &bump(0.0, 2.0),
        &field,
        &family,
        0.0,
        0.5,
        1.0,
        &grid,
        1e-3,
        SemigroupMode::Exact,
    )
    .or_fail()?;
    ensure(r.hausdorff <= 1e-6, || {
        format!("Hausdorff {:e}", r.hausdorff)
    })?;
    Ok(format!(
        "Hausdorff {:e} over {} signals",
        r.hausdorff,
        family.len()
    ))
}

fn random_bump(rng: &mut ChaCha8Rng) -> Observable {
    bump(rng.random_range(-2.0..=2.0), rng.random_range(0.5..=2.0))
}

fn koopman_algebra() -> Outcome {
    let field = VectorField::scalar_affine(-1.0);
    let grid = SpatialGrid::cube(1, 2.0, 41).or_fail()?;
    let signals = scalar_controls(&[-1.0, 0.0, 1.0])
        .constant_signals(1.0)
        .or_fail()?;
    let (phi, psi) = (bump(0.0, 2.0), bump(0.5, 1.0));
    let mut homogeneity: f64 = 0.0;
    for alpha in [0.0, 1.0, -2.5, 3.75] {
        homogeneity = homogeneity.max(
            check_homogeneity(&phi, alpha, &field, &signals, 0.0, 1.0, &grid, 1e-3).or_fail()?,
        );
    }
    let subadditivity =
        check_subadditivity(&phi, &psi, &field, &signals, 0.0, 1.0, &grid, 1e-3).or_fail()?;
    ensure(homogeneity <= 1e-12 && subadditivity <= 1e-12, || {
        format!("homogeneity {homogeneity:e}, subadditivity {subadditivity:e}")
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..100 {
        let (a, b) = (random_bump(&mut rng), random_bump(&mut rng));
        let r = check_lipschitz_in_observable(&a, &b, &field, &signals, 0.0, 1.0, &grid, 1e-3)
            .or_fail()?;
        ensure(r.ok && r.lhs <= r.rhs, || {
            format!("pair {trial}: {} > {}", r.lhs, r.rhs)
        })?;
    }
    Ok(format!(
        "homogeneity {homogeneity:e}, subadditivity {subadditivity:e}, 100 Lipschitz pairs"
    ))
}

fn in_band(values: &[f64], lo: f64, hi: f64) -> bool {
    values.iter().all(|v| (lo..=hi).contains(v))
}

fn koopman_generator() -> Outcome {
    let start = Instant::now();
    let field = VectorField::scalar_affine(-1.0);
    let grid = SpatialGrid::cube(1, 2.0, 41).or_fail()?;
    let signals = scalar_controls(&[-1.0, 0.0, 1.0])
        .constant_signals(1.0)
        .or_fail()?;
    let h = halvings(6);
    let study = generator_study(
        &bump(0.0, 2.0),
        &field,
        &signals,
        0.0,
        &h,
        &grid,
        1e-4,
        &GeneratorOptions::default(),
    )
    .or_fail()?;
    let rates = [study.backward_rate, study.forward_rate];
    ensure(
        rates
            .iter()
            .all(|r| r.is_some_and(|r| (0.8..=1.2).contains(&r))),
        || format!("rates {rates:?}"),
    )?;
    let back = study.backward_ratios();
    let fwd = study.forward_ratios();
    let (back, fwd) = (&back[back.len() - 3..], &fwd[fwd.len() - 3..]);
    ensure(
        in_band(back, 0.35, 0.65) && in_band(fwd, 0.35, 0.65),
        || format!("ratios {back:?} {fwd:?}"),
    )?;
    within(start, Duration::from_secs(30))?;
    Ok(format!(
        "rates {:.3}/{:.3}",
        study.backward_rate.unwrap_or(f64::NAN),
        study.forward_rate.unwrap_or(f64::NAN)
    ))
}

fn convexification() -> Outcome {
    let field = VectorField::scalar_affine(-1.0);
    let grid = SpatialGrid::cube(1, 2.0, 41).or_fail()?;
    let signals = scalar_controls(&[-1.0, 1.0])
        .constant_signals(1.0)
        .or_fail()?;
    let options = GeneratorOptions {
        relaxation_cycles: Some(2),
        ..GeneratorOptions::default()
    };
    let h = halvings(6);
    let study = generator_study(
        &bump(0.0, 2.0),
        &field,
        &signals,
        0.0,
        &h,
        &grid,
        1e-4,
        &options,
    )
    .or_fail()?;
    let last = study.rows.last().ok_or("no rows")?;
    let rate = study.convexified_rate.ok_or("no convexified rate")?;
    ensure((0.8..=1.2).contains(&rate), || {
        format!("convexified rate {rate}")
    })?;
    let floor = study
        .rows
        .iter()
        .map(|r| r.forward_defect)
        .fold(f64::INFINITY, f64::min);
    ensure(floor > 0.1, || {
        format!("plain forward defect falls to {floor:e}")
    })?;
    let gap = last.forward_defect - last.forward_defect_convexified;
    ensure(gap > 10.0 * last.forward_defect_convexified, || {
        format!(
            "gap {gap:e} vs convexified {:e}",
            last.forward_defect_convexified
        )
    })?;
    Ok(format!(
        "floor {floor:.3}, convexified {:e} at h = {:e}, rate {rate:.3}",
        last.forward_defect_convexified, last.h
    ))
}

fn transport_rows(
    generating: &ControlSignal,
    controls: &ControlSampleSet,
    grid: &SpatialGrid,
) -> Result<Vec<setkoop_core::liouville::ResidualRow>, String> {
    let field = VectorField::scalar_affine(-1.0);
    let taus: Vec<f64> = (0..=100).map(|k| k as f64 * 1e-2).collect();
    let psi =
        transport_solve(&bump(0.0, 2.0), &field, generating, 1.0, &taus, grid, 1e-3).or_fail()?;
    let curve: Vec<(f64, Observable)> = taus.iter().copied().zip(psi).collect();
    inclusion_residual(&curve, &field, controls, grid).or_fail()
}

fn transport() -> Outcome {
    let controls = scalar_controls(&[-1.0, 0.0, 1.0]);
    let grid = SpatialGrid::cube(1, 2.0, 401).or_fail()?;
    let signals = controls.constant_signals(1.0).or_fail()?;
    let mut residual: f64 = 0.0;
    for generating in &signals {
        let id = generating.values()[0].id;
        for row in transport_rows(generating, &controls, &grid)? {
            if id == 1 {
                residual = residual.max(row.residual);
            }
            ensure(row.argmin == id, || {
                format!("argmin {} for control {id} at τ = {}", row.argmin, row.tau)
            })?;
        }
    }
    ensure(residual <= 1e-3, || {
        format!("residual {residual:e} for u ≡ 0")
    })?;
    // Switching from −1 to 1 at τ = 0.5: the argmin follows the active segment.
    let spliced = signals[0].splice(&signals[2], 0.5, "u0|u2").or_fail()?;
    for row in transport_rows(&spliced, &controls, &grid)? {
        let active = if row.tau < 0.5 { 0 } else { 2 };
        if (row.tau - 0.5).abs() > 0.015 {
            ensure(row.argmin == active, || {
                format!("spliced argmin {} at τ = {}", row.argmin, row.tau)
            })?;
        }
    }
    Ok(format!(
        "residual {residual:e} for u ≡ 0, argmin matched for 4 generating signals"
    ))
}

fn random_measure(rng: &mut ChaCha8Rng) -> ParticleMeasure {
    let n = rng.random_range(1..=4);
    let particles = (0..n)
        .map(|_| {
            let x = vec![rng.random_range(-2.0..=2.0)];
            (
                x,
                Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)),
            )
        })
        .collect();
    ParticleMeasure::new(particles).unwrap()
}

fn duality() -> Outcome {
    let field = VectorField::scalar_affine(-1.0);
    let controls = scalar_controls(&[-1.0, 0.0, 1.0]);
    let signals = controls.random_signals(1.0, 4, 100, 5).or_fail()?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for signal in &signals {
        let (mu, phi) = (random_measure(&mut rng), random_bump(&mut rng));
        worst = worst.max(check_duality(&mu, &phi, &field, signal, 0.0, 1.0, 1e-3).or_fail()?);
    }
    ensure(worst <= 1e-12, || format!("defect {worst:e}"))?;
    Ok(format!("defect {worst:e} over 100 triples"))
}

fn perron_generator() -> Outcome {
    let field = VectorField::scalar_affine(-1.0);
    let mu = ParticleMeasure::dirac(vec![1.0], Complex64::new(1.0, 0.0)).or_fail()?;
    let bank = TestBank::new(vec![bump(0.0, 2.0), bump(1.0, 1.0)]).or_fail()?;
    let study = perron_generator_study(
        &mu,
        &field,
        &scalar_controls(&[-1.0, 0.0, 1.0]),
        0.0,
        &halvings(5),
        &bank,
        1e-4,
    )
    .or_fail()?;
    let ratios = study.halving_ratios();
    ensure(!ratios.is_empty() && in_band(&ratios, 0.35, 0.65), || {
        format!("ratios {ratios:?}")
    })?;
    Ok(format!(
        "ratios {:?}",
        ratios
            .iter()
            .map(|r| (r * 1e3).round() / 1e3)
            .collect::<Vec<_>>()
    ))
}

fn adjoint() -> Outcome {
    let field = VectorField::scalar_affine(-1.0);
    let controls = scalar_controls(&[-1.0, 0.0, 1.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut margin, mut matched) = (f64::INFINITY, 0.0f64);
    for trial in 0..50u64 {
        let mut signals = controls.constant_signals(1.0).or_fail()?;
        signals.extend(controls.random_signals(1.0, 4, 2, trial).or_fail()?);
        let mu = random_measure(&mut rng);
        let bank = TestBank::new(vec![random_bump(&mut rng), random_bump(&mut rng)]).or_fail()?;
        let r = check_adjoint_inequality(&mu, &field, &signals, 0.0, 1.0, &bank, 1e-3, 16, trial)
            .or_fail()?;
        margin = margin.min(r.worst_margin);
        matched = matched.max(r.matched_defect);
    }
    ensure(margin >= -1e-9 && matched <= 1e-12, || {
        format!("margin {margin:e}, matched {matched:e}")
    })?;
    Ok(format!("margin {margin:e}, matched {matched:e}"))
}

fn spectral_mapping() -> Outcome {
    let grid = SpatialGrid::cube(2, 2.0, 11).or_fail()?;
    let mut worst_eigen: f64 = 0.0;
    let mut worst_mapping: f64 = 0.0;
    let mut worst_probe: f64 = 0.0;
    for a in [DIAG, ROTATION] {
        let field = linear_system(a);
        let controls = field.feedback_controls().or_fail()?;
        let signals = controls.constant_signals(1.0).or_fail()?;
        let m = DMatrix::from_row_slice(2, 2, &a);
        let em = expm(&m);
        for pair in eigenpairs_of(&field).or_fail()? {
            worst_eigen = worst_eigen.max(verify_liouville_eigen(&pair, &field, &grid).or_fail()?);
            worst_mapping = worst_mapping
                .max(verify_spectral_mapping(&pair, &field, 0.0, 1.0, &grid, 1e-3).or_fail()?);
            // φ(e^{M} x) = e^{λ} φ(x) for the Padé exponential.
            let phi = pair.eigenfunction();
            let factor = pair.lambda.exp();
            for x in grid.nodes() {
                let y: Vec<f64> = (0..2)
                    .map(|i| em[(i, 0)] * x[0] + em[(i, 1)] * x[1])
                    .collect();
                let gap = (phi.eval(&y).or_fail()? - factor * phi.eval(x).or_fail()?).norm();
                ensure(gap <= 1e-10, || format!("exponential oracle gap {gap:e}"))?;
            }
            let probe = converse_spectral_probe(
                &phi,
                &field,
                &signals,
                &controls,
                0.0,
                &halvings(5),
                &grid,
                1e-4,
            )
            .or_fail()?;
            let (h_min, est) = probe.last_estimate().ok_or("probe inconclusive")?;
            let err = (est - pair.lambda).norm();
            ensure(err <= 10.0 * h_min, || {
                format!("λ = {} estimated as {est}", pair.lambda)
            })?;
            worst_probe = worst_probe.max(err / h_min);
        }
    }
    // Half a rotation: the eigenfunctions change sign.
    let field = linear_system(ROTATION);
    let half_turn = std::f64::consts::PI;
    for pair in eigenpairs_of(&field).or_fail()? {
        let factor = (pair.lambda * half_turn).exp();
        ensure((factor + 1.0).norm() <= 1e-12, || {
            format!("e^(λπ) = {factor}")
        })?;
        let r = verify_spectral_mapping(&pair, &field, 0.0, half_turn, &grid, 1e-3).or_fail()?;
        worst_mapping = worst_mapping.max(r);
    }
    ensure(worst_eigen <= 1e-8 && worst_mapping <= 1e-6, || {
        format!("eigen {worst_eigen:e}, mapping {worst_mapping:e}")
    })?;
    Ok(format!(
        "eigen {worst_eigen:e}, mapping {worst_mapping:e}, probe error ≤ {worst_probe:.2}·h_min"
    ))
}

fn eigen_products() -> Outcome {
    let field = linear_system(DIAG);
    let pairs = eigenpairs_of(&field).or_fail()?;
    let grid = SpatialGrid::cube(2, 2.0, 21).or_fail()?;
    let (p2, p1) = (&pairs[0], &pairs[1]);
    let lambda = p1.lambda + p2.lambda;
    ensure((lambda - Complex64::new(-3.0, 0.0)).norm() <= 1e-12, || {
        format!("λ₁ + λ₂ = {lambda}")
    })?;
    let residual = eigen_product_check(p1, 1.0, p2, 1.0, &field, &grid).or_fail()?;
    ensure(residual <= 1e-10, || format!("residual {residual:e}"))?;
    // x₁ x₂ along the exact flow decays like e^{-3t}.
    let product = p1.eigenfunction().times(p2.eigenfunction());
    let m = DMatrix::from_row_slice(2, 2, &DIAG);
    for x in grid.nodes() {
        let y = expm_apply(&m, 0.7, x);
        let gap =
            (product.eval(&y).or_fail()? - product.eval(x).or_fail()? * (-2.1f64).exp()).norm();
        ensure(gap <= 1e-12, || format!("product oracle gap {gap:e}"))?;
    }
    Ok(format!("λ = {}, residual {residual:e}", lambda.re))
}

fn pulse(k: i32) -> ControlSignal {
    let n = 1usize << k;
    let values = (0..n)
        .map(|i| ControlPoint {
            id: usize::from(i == 0),
            coords: vec![if i == 0 { 1.0 } else { 0.0 }],
        })
        .collect();
    ControlSignal::new(1.0, values, format!("pulse{k}")).unwrap()
}

fn continuity() -> Outcome {
    let field = VectorField::scalar_affine(-1.0);
    let u = ControlSignal::constant(
        1.0,
        ControlPoint {
            id: 0,
            coords: vec![0.0],
        },
        "u0",
    )
    .or_fail()?;
    let grid = SpatialGrid::cube(1, 2.0, 9).or_fail()?;
    let seq: Vec<ControlSignal> = (1..=8).map(pulse).collect();
    let rows = check_continuity_in_control(&field, &u, &seq, &grid, 0.0, 1.0, 1e-3).or_fail()?;
    let mut worst: f64 = 0.0;
    for (k, row) in (1..=8).zip(&rows) {
        // Unit control on [0, p], then free decay.
        let p = 0.5f64.powi(k);
        let exact = (1.0 - (-p).exp()) * (-(1.0 - p)).exp();
        worst = worst.max((row.flow_discrepancy - exact).abs());
    }
    ensure(worst <= 1e-10, || format!("oracle gap {worst:e}"))?;
    ensure(is_nonincreasing_with_slack(&rows, 0.1), || {
        "discrepancies increase".into()
    })?;
    Ok(format!("8 pulses, oracle gap {worst:e}"))
}

fn directory_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn end_to_end() -> Outcome {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/scalar_affine_full.toml");
    let dir = tempfile::tempdir().or_fail()?;
    let mut slowest = Duration::ZERO;
    for run in ["first", "second"] {
        let start = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_setkoop"))
            .arg("run")
            .arg(&config)
            .arg("--output-dir")
            .arg(dir.path().join(run))
            .output()
            .or_fail()?;
        ensure(out.status.code() == Some(0), || {
            format!(
                "{run} run exited {:?}: {}",
                out.status.code(),
                String::from_utf8_lossy(&out.stdout)
            )
        })?;
        within(start, Duration::from_secs(60))?;
        slowest = slowest.max(start.elapsed());
    }
    let (a, b) = (
        directory_bytes(&dir.path().join("first")),
        directory_bytes(&dir.path().join("second")),
    );
    ensure(a == b, || "outputs differ between runs".into())?;
    Ok(format!(
        "{} files identical, slowest run {slowest:.2?}",
        a.len()
    ))
}

fn main() {
    let criteria: [Criterion; 14] = [
        ("flow oracle agreement", flow_oracles),
        ("identity / zero-field suite", zero_field),
        ("semigroup law", semigroup),
        ("Koopman algebra", koopman_algebra),
        ("Koopman generator", koopman_generator),
        ("limsup convexification", convexification),
        ("transport / inclusion dynamics", transport),
        ("Koopman-Perron duality", duality),
        ("Perron generator", perron_generator),
        ("adjoint inequality", adjoint),
        ("spectral mapping", spectral_mapping),
        ("eigen products", eigen_products),
        ("continuity in control", continuity),
        ("end-to-end scenario", end_to_end),
    ];
    let mut failures = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} [{secs:.2} s]", n + 1),
            Err(why) => {
                failures += 1;
                println!("criterion {:>2} FAIL {name}: {why} [{secs:.2} s]", n + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
