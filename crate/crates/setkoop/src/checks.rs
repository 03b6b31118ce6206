//! Check implementations. Each turns a [`Setup`] into tables and one worst
//! defect; the runner compares the defect with the tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use setkoop_core::controlled_flow::{
    check_continuity_in_control, check_flow_estimates, flow_on_grid, flow_on_points,
    gronwall_bound, integrate_trajectory,
};
use setkoop_core::koopman::{
    check_homogeneity, check_lipschitz_in_observable, check_semigroup, check_subadditivity,
    splice_closure, SemigroupMode,
};
use setkoop_core::liouville::{
    generator_study, inclusion_residual, transport_solve, GeneratorOptions,
};
use setkoop_core::perron_frobenius::{
    check_adjoint_inequality, check_duality, perron_generator_study,
};
use setkoop_core::spectral::{
    converse_spectral_probe, eigen_product_check, eigenpairs_of, verify_liouville_eigen,
    verify_spectral_mapping, ProbeStatus,
};
use setkoop_core::{
    Complex64, ControlPoint, ControlSignal, Error, Observable, ParticleMeasure, Result, TestBank,
};

use crate::config::Setup;
use crate::formats::{self, num, Table};

/// Tables written by one check and its worst defect.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    /// Written to `<check>.csv`.
    pub table: Table,
    /// Extra dumps written to `<check>_<suffix>.csv`.
    pub extras: Vec<(&'static str, Table)>,
    pub worst_defect: f64,
    /// Conditions that are not a defect size (argmin agreement, conclusive probes).
    pub side_conditions_ok: bool,
}

impl CheckOutcome {
    fn new(table: Table, worst_defect: f64) -> Self {
        Self {
            table,
            extras: Vec::new(),
            worst_defect,
            side_conditions_ok: true,
        }
    }
}

pub fn run_check(name: &str, setup: &Setup) -> Result<CheckOutcome> {
    match name {
        "flow_estimates" => flow_estimates(setup),
        "flow_inverse" => flow_inverse(setup),
        "continuity" => continuity(setup),
        "semigroup" => semigroup(setup),
        "homogeneity" => homogeneity(setup),
        "subadditivity" => subadditivity(setup),
        "lipschitz" => lipschitz(setup),
        "generator_koopman" => generator_koopman(setup),
        "transport" => transport(setup),
        "duality" => duality(setup),
        "perron_generator" => perron_generator(setup),
        "adjoint" => adjoint(setup),
        "spectral_mapping" => spectral_mapping(setup),
        "eigen_products" => eigen_products(setup),
        "converse_spectral" => converse_spectral(setup),
        _ => Err(Error::Invalid("unknown check")),
    }
}

/// Bump of half the radius centred halfway towards the upper face on axis 0.
fn shifted_bump(setup: &Setup) -> Result<Observable> {
    let mut c = setup.center.clone();
    c[0] += 0.5 * setup.radius;
    Observable::bump(c, 0.5 * setup.radius)
}

fn probe_point(setup: &Setup) -> Vec<f64> {
    let mut x = setup.center.clone();
    x[0] += 0.5 * setup.radius;
    x
}

fn random_point(rng: &mut ChaCha8Rng, setup: &Setup) -> Vec<f64> {
    setup
        .grid
        .lower()
        .iter()
        .zip(setup.grid.upper())
        .map(|(a, b)| rng.random_range(*a..=*b))
        .collect()
}

fn random_bump(rng: &mut ChaCha8Rng, setup: &Setup) -> Result<Observable> {
    let c = random_point(rng, setup);
    Observable::bump(c, setup.radius * rng.random_range(0.25..=1.0))
}

fn constant_signals(setup: &Setup) -> Vec<ControlSignal> {
    setup.signals[..setup.controls.len()].to_vec()
}

/// `|rate − 1|`, zero for identically vanishing defects.
fn rate_deviation(rate: Option<f64>, defects: &[f64]) -> f64 {
    if defects.iter().all(|d| *d == 0.0) {
        0.0
    } else {
        rate.map_or(f64::INFINITY, |r| (r - 1.0).abs())
    }
}

fn flow_estimates(setup: &Setup) -> Result<CheckOutcome> {
    let radius = setup.grid.max_radius();
    let bounds = setup.field.estimate_bounds(&setup.controls, &setup.grid)?;
    let report = check_flow_estimates(
        &setup.field,
        &setup.signals,
        &setup.grid,
        radius,
        setup.step,
        5,
    )?;
    let t = setup.horizon;
    let norm_bound = gronwall_bound(radius, bounds.growth, t);
    let lip_bound = (bounds.lipschitz * t).exp() * (bounds.growth * (1.0 + norm_bound)).max(1.0);
    let excess = |v: f64, bound: f64| {
        if bound > 0.0 {
            (v / bound - 1.0).max(0.0)
        } else {
            v
        }
    };
    let worst = if report.growth_ok {
        excess(report.max_norm, norm_bound).max(excess(report.lipschitz, lip_bound))
    } else {
        f64::INFINITY
    };
    let mut table = Table::new([
        "radius",
        "growth_m",
        "lipschitz_l",
        "max_norm",
        "norm_bound",
        "flow_lipschitz",
        "lipschitz_bound",
    ]);
    table.push(vec![
        num(radius),
        num(bounds.growth),
        num(bounds.lipschitz),
        num(report.max_norm),
        num(norm_bound),
        num(report.lipschitz),
        num(lip_bound),
    ]);
    Ok(CheckOutcome::new(table, worst))
}

fn flow_inverse(setup: &Setup) -> Result<CheckOutcome> {
    let mut table = Table::new(["signal", "max_return_error"]);
    let mut worst: f64 = 0.0;
    for u in &setup.signals {
        let forward = flow_on_grid(&setup.field, u, setup.tau, setup.t, &setup.grid, setup.step)?;
        let back = flow_on_points(&setup.field, u, setup.t, setup.tau, &forward, setup.step)?;
        let err = back
            .iter()
            .zip(setup.grid.nodes())
            .flat_map(|(y, x)| y.iter().zip(x).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        worst = worst.max(err);
        table.push(vec![u.label().to_string(), num(err)]);
    }
    let mut out = CheckOutcome::new(table, worst);
    let traj = integrate_trajectory(
        &setup.field,
        &setup.signals[0],
        setup.tau,
        setup.t,
        &probe_point(setup),
        setup.step,
    )?;
    out.extras.push((
        "trajectory",
        formats::trajectory_table(&traj, setup.grid.dim()),
    ));
    Ok(out)
}

/// `v_k` equals the second control on `[0, T/2^k)` and the first afterwards.
fn pulse(setup: &Setup, k: u32) -> Result<ControlSignal> {
    let points = setup.controls.points();
    let other = points.get(1).unwrap_or(&points[0]);
    let n = 1usize << k;
    let values: Vec<ControlPoint> = (0..n)
        .map(|i| {
            if i == 0 {
                other.clone()
            } else {
                points[0].clone()
            }
        })
        .collect();
    ControlSignal::new(setup.horizon, values, format!("pulse{k}"))
}

fn continuity(setup: &Setup) -> Result<CheckOutcome> {
    let base = &setup.signals[0];
    let seq = (1..=8)
        .map(|k| pulse(setup, k))
        .collect::<Result<Vec<_>>>()?;
    let rows = check_continuity_in_control(
        &setup.field,
        base,
        &seq,
        &setup.grid,
        0.0,
        setup.horizon,
        setup.step,
    )?;
    let mut table = Table::new(["k", "control_distance", "flow_discrepancy"]);
    for (k, r) in rows.iter().enumerate() {
        table.push(vec![
            (k + 1).to_string(),
            num(r.control_distance),
            num(r.flow_discrepancy),
        ]);
    }
    // Excess over a 10% slack on the previous discrepancy.
    let worst = rows
        .windows(2)
        .map(|w| (w[1].flow_discrepancy - 1.1 * w[0].flow_discrepancy).max(0.0))
        .fold(0.0, f64::max);
    Ok(CheckOutcome::new(table, worst))
}

fn semigroup(setup: &Setup) -> Result<CheckOutcome> {
    let family = splice_closure(&setup.signals, setup.s)?;
    let r = check_semigroup(
        &setup.phi,
        &setup.field,
        &family,
        setup.tau,
        setup.s,
        setup.t,
        &setup.grid,
        setup.step,
        SemigroupMode::GridInterpolated,
    )?;
    let mut table = Table::new([
        "family_size",
        "s",
        "forward_defect",
        "backward_defect",
        "hausdorff",
    ]);
    table.push(vec![
        family.len().to_string(),
        num(setup.s),
        num(r.forward_defect),
        num(r.backward_defect),
        num(r.hausdorff),
    ]);
    Ok(CheckOutcome::new(table, r.hausdorff))
}

fn homogeneity(setup: &Setup) -> Result<CheckOutcome> {
    let mut table = Table::new(["alpha", "defect"]);
    let mut worst: f64 = 0.0;
    for alpha in [0.0, 1.0, -2.5, 3.75] {
        let d = check_homogeneity(
            &setup.phi,
            alpha,
            &setup.field,
            &setup.signals,
            setup.tau,
            setup.t,
            &setup.grid,
            setup.step,
        )?;
        worst = worst.max(d);
        table.push(vec![num(alpha), num(d)]);
    }
    Ok(CheckOutcome::new(table, worst))
}

fn subadditivity(setup: &Setup) -> Result<CheckOutcome> {
    let mut table = Table::new(["pair", "defect"]);
    let mut worst: f64 = 0.0;
    let pairs = [
        ("phi+shifted", setup.phi.clone(), shifted_bump(setup)?),
        ("phi+phi", setup.phi.clone(), setup.phi.clone()),
        ("phi+zero", setup.phi.clone(), Observable::zero()),
    ];
    for (label, a, b) in pairs {
        let d = check_subadditivity(
            &a,
            &b,
            &setup.field,
            &setup.signals,
            setup.tau,
            setup.t,
            &setup.grid,
            setup.step,
        )?;
        worst = worst.max(d);
        table.push(vec![label.to_string(), num(d)]);
    }
    Ok(CheckOutcome::new(table, worst))
}

const LIPSCHITZ_PAIRS: usize = 20;

fn lipschitz(setup: &Setup) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let mut table = Table::new(["trial", "lhs", "rhs", "ok"]);
    let mut worst: f64 = 0.0;
    for trial in 0..LIPSCHITZ_PAIRS {
        let a = random_bump(&mut rng, setup)?;
        let b = random_bump(&mut rng, setup)?;
        let r = check_lipschitz_in_observable(
            &a,
            &b,
            &setup.field,
            &setup.signals,
            setup.tau,
            setup.t,
            &setup.grid,
            setup.step,
        )?;
        worst = worst.max(r.lhs - r.rhs);
        table.push(vec![
            trial.to_string(),
            num(r.lhs),
            num(r.rhs),
            r.ok.to_string(),
        ]);
    }
    Ok(CheckOutcome::new(table, worst.max(0.0)))
}

fn generator_koopman(setup: &Setup) -> Result<CheckOutcome> {
    let options = GeneratorOptions {
        seed: setup.seed,
        ..GeneratorOptions::default()
    };
    let study = generator_study(
        &setup.phi,
        &setup.field,
        &constant_signals(setup),
        setup.tau,
        &setup.h_values,
        &setup.grid,
        setup.step,
        &options,
    )?;
    let backward: Vec<f64> = study.rows.iter().map(|r| r.backward_defect).collect();
    let convexified: Vec<f64> = study
        .rows
        .iter()
        .map(|r| r.forward_defect_convexified)
        .collect();
    let worst = rate_deviation(study.backward_rate, &backward)
        .max(rate_deviation(study.convexified_rate, &convexified));
    Ok(CheckOutcome::new(formats::generator_table(&study), worst))
}

fn transport(setup: &Setup) -> Result<CheckOutcome> {
    let n = ((setup.t - setup.tau) / setup.dtau).round() as usize;
    if n < 2 {
        return Err(Error::TooFewSamples {
            needed: 3,
            found: n + 1,
        });
    }
    let taus: Vec<f64> = (0..=n)
        .map(|k| setup.tau + (setup.t - setup.tau) * k as f64 / n as f64)
        .collect();
    let signal = &setup.signals[0];
    let generating = signal.values()[0].id;
    let psi = transport_solve(
        &setup.phi,
        &setup.field,
        signal,
        setup.t,
        &taus,
        &setup.grid,
        setup.step,
    )?;
    let first = psi[0].clone();
    let curve: Vec<(f64, Observable)> = taus.into_iter().zip(psi).collect();
    let rows = inclusion_residual(&curve, &setup.field, &setup.controls, &setup.grid)?;
    let mut table = Table::new(["tau", "residual", "argmin", "generating_residual"]);
    let mut worst: f64 = 0.0;
    let mut argmin_ok = true;
    for r in &rows {
        let own = r.per_control[generating];
        worst = worst.max(own);
        argmin_ok &= r.is_minimiser(generating, 1e-12);
        table.push(vec![
            num(r.tau),
            num(r.residual),
            r.argmin.to_string(),
            num(own),
        ]);
    }
    let mut out = CheckOutcome::new(table, worst);
    out.side_conditions_ok = argmin_ok;
    out.extras
        .push(("psi", formats::observable_table(&first, &setup.grid)?));
    Ok(out)
}

const DUALITY_TRIALS: usize = 100;

fn random_measure(rng: &mut ChaCha8Rng, setup: &Setup) -> Result<ParticleMeasure> {
    let n = rng.random_range(1..=5);
    let particles = (0..n)
        .map(|_| {
            let x = random_point(rng, setup);
            let w = Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
            (x, w)
        })
        .collect();
    ParticleMeasure::new(particles)
}

fn duality(setup: &Setup) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let mut table = Table::new(["trial", "signal", "defect"]);
    let mut worst: f64 = 0.0;
    for trial in 0..DUALITY_TRIALS {
        let mu = random_measure(&mut rng, setup)?;
        let phi = random_bump(&mut rng, setup)?;
        let u = &setup.signals[rng.random_range(0..setup.signals.len())];
        let d = check_duality(&mu, &phi, &setup.field, u, setup.tau, setup.t, setup.step)?;
        worst = worst.max(d);
        table.push(vec![trial.to_string(), u.label().to_string(), num(d)]);
    }
    Ok(CheckOutcome::new(table, worst))
}

fn perron_generator(setup: &Setup) -> Result<CheckOutcome> {
    let mu = ParticleMeasure::dirac(probe_point(setup), Complex64::new(1.0, 0.0))?;
    let bank = TestBank::new(vec![setup.phi.clone(), shifted_bump(setup)?])?;
    let study = perron_generator_study(
        &mu,
        &setup.field,
        &setup.controls,
        setup.tau,
        &setup.h_values,
        &bank,
        setup.step,
    )?;
    let mut table = Table::new(["h", "control_id", "residual"]);
    for r in &study.rows {
        table.push(vec![num(r.h), r.control_id.to_string(), num(r.residual)]);
    }
    let worst_by_h = study.worst_by_h();
    let worst = if worst_by_h.iter().all(|(_, r)| *r == 0.0) {
        0.0
    } else {
        study
            .halving_ratios()
            .iter()
            .map(|q| (q - 0.5).abs())
            .fold(
                0.0,
                |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) },
            )
    };
    let mut out = CheckOutcome::new(table, worst);
    out.extras.push(("measure", formats::measure_table(&mu)));
    Ok(out)
}

fn adjoint(setup: &Setup) -> Result<CheckOutcome> {
    let bank = TestBank::new(vec![setup.phi.clone(), shifted_bump(setup)?])?;
    let mut table = Table::new([
        "weight_re",
        "weight_im",
        "measures",
        "worst_margin",
        "matched_defect",
    ]);
    let mut worst: f64 = 0.0;
    for w in [Complex64::new(1.0, 0.0), Complex64::new(-0.5, 0.75)] {
        let mu = ParticleMeasure::dirac(probe_point(setup), w)?;
        let r = check_adjoint_inequality(
            &mu,
            &setup.field,
            &setup.signals,
            setup.tau,
            setup.t,
            &bank,
            setup.step,
            32,
            setup.seed,
        )?;
        worst = worst.max((-r.worst_margin).max(0.0)).max(r.matched_defect);
        table.push(vec![
            num(w.re),
            num(w.im),
            r.measures.to_string(),
            num(r.worst_margin),
            num(r.matched_defect),
        ]);
    }
    Ok(CheckOutcome::new(table, worst))
}

fn spectral_mapping(setup: &Setup) -> Result<CheckOutcome> {
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for pair in eigenpairs_of(&setup.field)? {
        let l = verify_liouville_eigen(&pair, &setup.field, &setup.grid)?;
        let m = verify_spectral_mapping(
            &pair,
            &setup.field,
            setup.tau,
            setup.t,
            &setup.grid,
            setup.step,
        )?;
        worst = worst.max(l).max(m);
        rows.push((pair, l, m));
    }
    Ok(CheckOutcome::new(formats::eigen_table(&rows), worst))
}

fn eigen_products(setup: &Setup) -> Result<CheckOutcome> {
    let pairs = eigenpairs_of(&setup.field)?;
    let mut table = Table::new([
        "feedback_id",
        "first",
        "second",
        "alpha_1",
        "alpha_2",
        "lambda_re",
        "lambda_im",
        "residual",
    ]);
    let mut worst: f64 = 0.0;
    for (i, p) in pairs.iter().enumerate() {
        for (j, q) in pairs.iter().enumerate().skip(i) {
            if p.feedback_id != q.feedback_id {
                continue;
            }
            let alphas: &[(f64, f64)] = if i == j {
                &[(2.0, 0.0)]
            } else {
                &[(1.0, 1.0), (2.0, 1.0)]
            };
            for &(a1, a2) in alphas {
                let r = eigen_product_check(p, a1, q, a2, &setup.field, &setup.grid)?;
                let lambda = p.lambda * a1 + q.lambda * a2;
                worst = worst.max(r);
                table.push(vec![
                    p.feedback_id.to_string(),
                    i.to_string(),
                    j.to_string(),
                    num(a1),
                    num(a2),
                    num(lambda.re),
                    num(lambda.im),
                    num(r),
                ]);
            }
        }
    }
    Ok(CheckOutcome::new(table, worst))
}

fn converse_spectral(setup: &Setup) -> Result<CheckOutcome> {
    let pairs = eigenpairs_of(&setup.field)?;
    let signals = constant_signals(setup);
    let mut table = Table::new([
        "pair",
        "feedback_id",
        "h",
        "status",
        "lambda_est_re",
        "lambda_est_im",
        "generator_gap",
    ]);
    let mut worst: f64 = 0.0;
    let mut conclusive = true;
    for (i, pair) in pairs.iter().enumerate() {
        let probe = converse_spectral_probe(
            &pair.eigenfunction(),
            &setup.field,
            &signals,
            &setup.controls,
            setup.tau,
            &setup.h_values,
            &setup.grid,
            setup.step,
        )?;
        for row in &probe.rows {
            let status = match &row.status {
                ProbeStatus::Proportional { label, .. } => label.clone(),
                ProbeStatus::Inconclusive => "inconclusive".to_string(),
            };
            let [re, im] = formats::complex_cells(row.lambda_est);
            table.push(vec![
                i.to_string(),
                pair.feedback_id.to_string(),
                num(row.h),
                status,
                re,
                im,
                row.generator_gap.map_or_else(String::new, num),
            ]);
        }
        match probe.last_estimate() {
            Some((_, est)) => worst = worst.max((est - pair.lambda).norm()),
            None => conclusive = false,
        }
    }
    let mut out = CheckOutcome::new(table, worst);
    out.side_conditions_ok = conclusive;
    Ok(out)
}
