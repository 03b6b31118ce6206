#![allow(dead_code)]

pub mod expm;

use setkoop_core::{
    ControlPoint, ControlSampleSet, ControlSignal, DMatrix, Observable, VectorField,
};

pub fn scalar_controls(values: &[f64]) -> ControlSampleSet {
    ControlSampleSet::new(values.iter().map(|v| vec![*v]).collect()).unwrap()
}

pub fn constant(horizon: f64, id: usize, value: f64) -> ControlSignal {
    ControlSignal::constant(
        horizon,
        ControlPoint {
            id,
            coords: vec![value],
        },
        format!("u{id}"),
    )
    .unwrap()
}

pub fn bump(radius: f64) -> Observable {
    Observable::bump(vec![0.0], radius).unwrap()
}

/// `b(x) = (1 − x²/r²)²` inside the ball, 0 outside.
pub fn bump_value(x: f64, radius: f64) -> f64 {
    let s = x * x / (radius * radius);
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - s) * (1.0 - s)
    }
}

/// Closed form of `ẋ = a x + u` from `x0` over `dt`.
pub fn affine_flow(a: f64, u: f64, x0: f64, dt: f64) -> f64 {
    if a == 0.0 {
        x0 + u * dt
    } else {
        let eq = -u / a;
        eq + (x0 - eq) * (a * dt).exp()
    }
}

pub fn diag_system() -> VectorField {
    VectorField::linear_feedback(
        DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]),
        DMatrix::identity(2, 2),
        vec![DMatrix::zeros(2, 2)],
    )
    .unwrap()
}

pub fn rotation_system() -> VectorField {
    VectorField::linear_feedback(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
        DMatrix::identity(2, 2),
        vec![DMatrix::zeros(2, 2)],
    )
    .unwrap()
}
