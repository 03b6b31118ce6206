//! Matrix exponential by scaling and squaring with the degree-13 Padé
//! approximant (Higham 2005). Test oracle only.

use setkoop_core::DMatrix;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(s);
    let b = &PADE13;
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];
    let mut r = (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .expect("Padé denominator is invertible");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// `e^{t M} x`.
pub fn expm_apply(m: &DMatrix<f64>, t: f64, x: &[f64]) -> Vec<f64> {
    let e = expm(&(m * t));
    (0..x.len())
        .map(|i| (0..x.len()).map(|j| e[(i, j)] * x[j]).sum())
        .collect()
}
