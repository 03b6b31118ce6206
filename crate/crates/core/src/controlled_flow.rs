//! Control sets, admissible signals, controlled vector fields and their flows.
//!
//! Signals are piecewise constant on a uniform partition of `[0, T]` and
//! right-continuous. Flows are integrated with the classical fixed-step RK4
//! scheme. The integration interval is cut at every instant where the control
//! value actually changes, and each piece is traversed with
//! `n = ⌈len / step⌉` equal steps, so two signals that agree almost everywhere
//! produce bit-identical flows.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::grid::{distance, norm, SpatialGrid};

/// One sampled control value `u ∈ U ⊂ ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPoint {
    pub id: usize,
    pub coords: Vec<f64>,
}

impl ControlPoint {
    pub fn distance(&self, other: &ControlPoint) -> f64 {
        distance(&self.coords, &other.coords)
    }
}

/// Finite sample of the compact control space, with the Euclidean metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSampleSet {
    points: Vec<ControlPoint>,
}

impl ControlSampleSet {
    /// Ids are assigned by position.
    pub fn new(coords: Vec<Vec<f64>>) -> Result<Self> {
        let first = coords.first().ok_or(Error::EmptySet)?;
        let dim = first.len();
        for c in &coords {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid("control coordinates must be finite"));
            }
        }
        Ok(Self {
            points: coords
                .into_iter()
                .enumerate()
                .map(|(id, coords)| ControlPoint { id, coords })
                .collect(),
        })
    }

    pub fn points(&self) -> &[ControlPoint] {
        &self.points
    }

    pub fn get(&self, id: usize) -> Option<&ControlPoint> {
        self.points.iter().find(|p| p.id == id)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].coords.len()
    }

    /// One constant signal per sampled control, labelled `u<id>`.
    pub fn constant_signals(&self, horizon: f64) -> Result<Vec<ControlSignal>> {
        self.points
            .iter()
            .map(|p| ControlSignal::constant(horizon, p.clone(), format!("u{}", p.id)))
            .collect()
    }

    /// `count` signals on `segments` equal pieces whose values are drawn
    /// uniformly from the sample, labelled `r<seed>:<k>`.
    pub fn random_signals(
        &self,
        horizon: f64,
        segments: usize,
        count: usize,
        seed: u64,
    ) -> Result<Vec<ControlSignal>> {
        if segments == 0 {
            return Err(Error::Invalid("signals need at least one segment"));
        }
        let mut rng = crate::set_ops::seeded_rng(seed);
        (0..count)
            .map(|k| {
                let values = (0..segments)
                    .map(|_| {
                        let i = (rng.next_u64() % self.points.len() as u64) as usize;
                        self.points[i].clone()
                    })
                    .collect();
                ControlSignal::new(horizon, values, format!("r{seed}:{k}"))
            })
            .collect()
    }
}

/// Piecewise-constant admissible control on `N` equal segments of `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    horizon: f64,
    values: Vec<ControlPoint>,
    label: String,
}

impl ControlSignal {
    pub fn new(horizon: f64, values: Vec<ControlPoint>, label: impl Into<String>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Invalid("signal horizon must be positive and finite"));
        }
        let dim = values.first().ok_or(Error::EmptySet)?.coords.len();
        if let Some(v) = values.iter().find(|v| v.coords.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.coords.len(),
            });
        }
        Ok(Self {
            horizon,
            values,
            label: label.into(),
        })
    }

    pub fn constant(horizon: f64, value: ControlPoint, label: impl Into<String>) -> Result<Self> {
        Self::new(horizon, alloc::vec![value], label)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn segments(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[ControlPoint] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn control_dim(&self) -> usize {
        self.values[0].coords.len()
    }

    /// Left end of segment `k` (`k = N` gives the horizon).
    pub fn boundary(&self, k: usize) -> f64 {
        if k >= self.segments() {
            self.horizon
        } else {
            self.horizon * (k as f64) / (self.segments() as f64)
        }
    }

    /// Segment containing `s` under the right-continuous convention; `s = T`
    /// belongs to the last segment.
    pub fn segment_index(&self, s: f64) -> usize {
        let n = self.segments();
        let mut k = ((s / self.horizon) * (n as f64)).floor().max(0.0) as usize;
        k = k.min(n - 1);
        while k > 0 && s < self.boundary(k) {
            k -= 1;
        }
        while k + 1 < n && s >= self.boundary(k + 1) {
            k += 1;
        }
        k
    }

    pub fn value_at(&self, s: f64) -> &ControlPoint {
        &self.values[self.segment_index(s)]
    }

    /// Maximal runs on which the control value does not change, as
    /// `(start, end, segment)` with `segment` the first segment of the run.
    pub fn runs(&self) -> Vec<(f64, f64, usize)> {
        let mut out: Vec<(f64, f64, usize)> = Vec::new();
        let mut start = 0;
        for k in 1..=self.segments() {
            if k == self.segments() || self.values[k].coords != self.values[start].coords {
                out.push((self.boundary(start), self.boundary(k), start));
                start = k;
            }
        }
        out
    }

    /// Signal equal to `self` on `[0, switch)` and to `other` on `[switch, T]`.
    ///
    /// The result lives on the coarsest uniform partition refining both inputs
    /// on which `switch` is a breakpoint.
    pub fn splice(
        &self,
        other: &ControlSignal,
        switch: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        check_same_horizon(self.horizon, other.horizon)?;
        if !(0.0..=self.horizon).contains(&switch) {
            return Err(Error::TimeOutOfRange {
                time: switch,
                horizon: self.horizon,
            });
        }
        let base = lcm(self.segments(), other.segments());
        let ratio = switch / self.horizon;
        let mut found = None;
        let mut m = base;
        while m <= 1 << 22 {
            let pos = ratio * (m as f64);
            if (pos - pos.round()).abs() <= 1e-9 * (m as f64).max(1.0) {
                found = Some((m, pos.round() as usize));
                break;
            }
            m += base;
        }
        let (m, cut) = found.ok_or(Error::UnalignedSplice { switch })?;
        let values = (0..m)
            .map(|k| {
                if k < cut {
                    self.values[k * self.segments() / m].clone()
                } else {
                    other.values[k * other.segments() / m].clone()
                }
            })
            .collect();
        Self::new(self.horizon, values, label)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

fn check_same_horizon(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
        Err(Error::HorizonMismatch { left: a, right: b })
    } else {
        Ok(())
    }
}

/// Built-in C¹ vector fields used as drift or input directions of a
/// control-affine system.
#[derive(Debug, Clone, PartialEq)]
pub enum PrimitiveField {
    Zero,
    Constant(Vec<f64>),
    /// `x ↦ M x`
    Linear(DMatrix<f64>),
    /// `x ↦ (sin x₀, …, sin x_{d−1})`
    Sine,
    /// `(x₀, x₁) ↦ (x₁, −sin x₀)`
    Pendulum,
}

impl PrimitiveField {
    fn check_dim(&self, dim: usize) -> Result<()> {
        let bad = match self {
            PrimitiveField::Constant(v) => v.len() != dim,
            PrimitiveField::Linear(m) => m.nrows() != dim || m.ncols() != dim,
            PrimitiveField::Pendulum => dim != 2,
            PrimitiveField::Zero | PrimitiveField::Sine => false,
        };
        if bad {
            Err(Error::Invalid(
                "primitive field does not match the state dimension",
            ))
        } else {
            Ok(())
        }
    }

    fn accumulate(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            PrimitiveField::Zero => {}
            PrimitiveField::Constant(v) => {
                for (o, c) in out.iter_mut().zip(v) {
                    *o += scale * c;
                }
            }
            PrimitiveField::Linear(m) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let row: f64 = (0..x.len()).map(|j| m[(i, j)] * x[j]).sum();
                    *o += scale * row;
                }
            }
            PrimitiveField::Sine => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o += scale * v.sin();
                }
            }
            PrimitiveField::Pendulum => {
                out[0] += scale * x[1];
                out[1] -= scale * x[0].sin();
            }
        }
    }
}

/// Parametrised family `f(x, u)`.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorField {
    /// `ẋ = a x + u` on `ℝ`, `u ∈ ℝ`.
    ScalarAffine { a: f64 },
    /// `ẋ = (A + B K) x`. The control value is `K` flattened row-major, so the
    /// admissible feedbacks form a control sample in `ℝ^{m·d}`.
    LinearFeedback {
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        feedbacks: Vec<DMatrix<f64>>,
    },
    /// `ẋ = f₀(x) + Σₖ uₖ fₖ(x)`.
    ControlAffine {
        dim: usize,
        drift: PrimitiveField,
        inputs: Vec<PrimitiveField>,
    },
}

/// Growth and Lipschitz constants of Hypotheses (H), estimated by sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisBounds {
    /// `m` with `|f(x,u)| ≤ m (1 + |x|)`.
    pub growth: f64,
    /// `ℓ_K` with `|f(x,u) − f(y,u)| ≤ ℓ_K |x − y|` on the sampled box.
    pub lipschitz: f64,
}

impl VectorField {
    pub fn scalar_affine(a: f64) -> Self {
        VectorField::ScalarAffine { a }
    }

    pub fn linear_feedback(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        feedbacks: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
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
        if feedbacks.is_empty() {
            return Err(Error::EmptySet);
        }
        if feedbacks
            .iter()
            .any(|k| k.nrows() != b.ncols() || k.ncols() != d)
        {
            return Err(Error::Invalid("each feedback must be m x d"));
        }
        Ok(VectorField::LinearFeedback { a, b, feedbacks })
    }

    pub fn control_affine(
        dim: usize,
        drift: PrimitiveField,
        inputs: Vec<PrimitiveField>,
    ) -> Result<Self> {
        if dim == 0 || inputs.is_empty() {
            return Err(Error::Invalid(
                "control-affine field needs a state and an input",
            ));
        }
        drift.check_dim(dim)?;
        for f in &inputs {
            f.check_dim(dim)?;
        }
        Ok(VectorField::ControlAffine { dim, drift, inputs })
    }

    /// `f ≡ 0` on `ℝ^dim` with one scalar input direction.
    pub fn zero(dim: usize) -> Self {
        VectorField::ControlAffine {
            dim,
            drift: PrimitiveField::Zero,
            inputs: alloc::vec![PrimitiveField::Zero],
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            VectorField::ScalarAffine { .. } => 1,
            VectorField::LinearFeedback { a, .. } => a.nrows(),
            VectorField::ControlAffine { dim, .. } => *dim,
        }
    }

    pub fn control_dim(&self) -> usize {
        match self {
            VectorField::ScalarAffine { .. } => 1,
            VectorField::LinearFeedback { a, b, .. } => a.nrows() * b.ncols(),
            VectorField::ControlAffine { inputs, .. } => inputs.len(),
        }
    }

    /// All built-in families are C¹ in the state.
    pub fn is_smooth(&self) -> bool {
        true
    }

    /// Control sample made of the admissible feedbacks (linear families only).
    pub fn feedback_controls(&self) -> Result<ControlSampleSet> {
        match self {
            VectorField::LinearFeedback { feedbacks, .. } => {
                ControlSampleSet::new(feedbacks.iter().map(flatten_row_major).collect())
            }
            _ => Err(Error::Invalid(
                "feedback controls exist only for linear feedback fields",
            )),
        }
    }

    /// Writes `f(x, u)` into `out`.
    pub fn eval(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self {
            VectorField::ScalarAffine { a } => out[0] = a * x[0] + u[0],
            VectorField::LinearFeedback { a, b, .. } => {
                let d = a.nrows();
                let m = b.ncols();
                // (A + B K) x = A x + B (K x), K row-major in u.
                let kx: Vec<f64> = (0..m)
                    .map(|r| (0..d).map(|c| u[r * d + c] * x[c]).sum())
                    .collect();
                for (i, o) in out.iter_mut().enumerate() {
                    let ax: f64 = (0..d).map(|j| a[(i, j)] * x[j]).sum();
                    let bkx: f64 = (0..m).map(|r| b[(i, r)] * kx[r]).sum();
                    *o = ax + bkx;
                }
            }
            VectorField::ControlAffine { drift, inputs, .. } => {
                drift.accumulate(x, 1.0, out);
                for (f, uk) in inputs.iter().zip(u) {
                    f.accumulate(x, *uk, out);
                }
            }
        }
    }

    pub fn evaluate(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.state_dim()];
        self.eval(x, u, &mut out);
        out
    }

    /// Samples `m` and `ℓ_K` over the grid nodes and the control sample. The
    /// Lipschitz ratio is taken over pairs of lattice neighbours.
    pub fn estimate_bounds(
        &self,
        controls: &ControlSampleSet,
        grid: &SpatialGrid,
    ) -> Result<HypothesisBounds> {
        self.check_dims(grid.dim(), controls.dim())?;
        let mut growth: f64 = 0.0;
        let mut lipschitz: f64 = 0.0;
        for u in controls.points() {
            let values: Vec<Vec<f64>> = grid
                .nodes()
                .iter()
                .map(|x| self.evaluate(x, &u.coords))
                .collect();
            for (i, x) in grid.nodes().iter().enumerate() {
                growth = growth.max(norm(&values[i]) / (1.0 + norm(x)));
                let multi = grid.multi_index(i);
                for k in 0..grid.dim() {
                    if multi[k] + 1 < grid.points_per_axis() {
                        let mut nb = multi.clone();
                        nb[k] += 1;
                        let j = grid.flat_index(&nb);
                        let dx = distance(x, &grid.nodes()[j]);
                        lipschitz = lipschitz.max(distance(&values[i], &values[j]) / dx);
                    }
                }
            }
        }
        if !growth.is_finite() || !lipschitz.is_finite() {
            return Err(Error::Invalid("field bounds are not finite on the window"));
        }
        Ok(HypothesisBounds { growth, lipschitz })
    }

    fn check_dims(&self, state: usize, control: usize) -> Result<()> {
        if state != self.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim(),
                found: state,
            });
        }
        if control != self.control_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.control_dim(),
                found: control,
            });
        }
        Ok(())
    }
}

pub(crate) fn flatten_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
        .collect()
}

/// Output of [`integrate_flow`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub start_time: f64,
    pub end_time: f64,
    pub initial_state: Vec<f64>,
    pub final_state: Vec<f64>,
    /// Nominal step; actual steps are snapped to the control switching times.
    pub step: f64,
    pub trajectory: Option<Vec<(f64, Vec<f64>)>>,
}

fn check_time(t: f64, horizon: f64) -> Result<()> {
    let slack = 1e-12 * horizon;
    if t.is_finite() && t >= -slack && t <= horizon + slack {
        Ok(())
    } else {
        Err(Error::TimeOutOfRange { time: t, horizon })
    }
}

fn validate(
    field: &VectorField,
    signal: &ControlSignal,
    tau: f64,
    t: f64,
    step: f64,
) -> Result<()> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::NonPositiveStep(step));
    }
    check_time(tau, signal.horizon())?;
    check_time(t, signal.horizon())?;
    if signal.control_dim() != field.control_dim() {
        return Err(Error::DimensionMismatch {
            expected: field.control_dim(),
            found: signal.control_dim(),
        });
    }
    Ok(())
}

struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    fn new(d: usize) -> Self {
        Self {
            k1: alloc::vec![0.0; d],
            k2: alloc::vec![0.0; d],
            k3: alloc::vec![0.0; d],
            k4: alloc::vec![0.0; d],
            tmp: alloc::vec![0.0; d],
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn step(&mut self, field: &VectorField, u: &[f64], x: &mut [f64], h: f64) {
        field.eval(x, u, &mut self.k1);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        field.eval(&self.tmp, u, &mut self.k2);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        field.eval(&self.tmp, u, &mut self.k3);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        field.eval(&self.tmp, u, &mut self.k4);
        for i in 0..x.len() {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn flow_state(
    field: &VectorField,
    signal: &ControlSignal,
    tau: f64,
    t: f64,
    x0: &[f64],
    step: f64,
    mut trajectory: Option<&mut Vec<(f64, Vec<f64>)>>,
) -> Result<Vec<f64>> {
    let mut x = x0.to_vec();
    if let Some(tr) = trajectory.as_deref_mut() {
        tr.push((tau, x.clone()));
    }
    if tau == t {
        return Ok(x);
    }
    let (lo, hi) = if tau < t { (tau, t) } else { (t, tau) };
    let mut pieces: Vec<(f64, f64, usize)> = signal
        .runs()
        .into_iter()
        .filter_map(|(a, b, k)| {
            let (a, b) = (a.max(lo), b.min(hi));
            (b > a).then_some((a, b, k))
        })
        .collect();
    // The run containing `hi` may end before it when `hi` sits on the horizon
    // within rounding; stretch the last piece so the endpoint is hit exactly.
    if let Some(last) = pieces.last_mut() {
        last.1 = hi;
    }
    if let Some(first) = pieces.first_mut() {
        first.0 = lo;
    }
    let forward = tau < t;
    if !forward {
        pieces.reverse();
    }
    let mut ws = Rk4Workspace::new(x.len());
    for (a, b, k) in pieces {
        let u = &signal.values()[k].coords;
        let len = b - a;
        let n = ((len / step) - 1e-9).ceil().max(1.0) as usize;
        let h = if forward {
            len / n as f64
        } else {
            -len / n as f64
        };
        let start = if forward { a } else { b };
        for i in 1..=n {
            ws.step(field, u, &mut x, h);
            let time = if i == n {
                if forward {
                    b
                } else {
                    a
                }
            } else {
                start + h * i as f64
            };
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { time });
            }
            if let Some(tr) = trajectory.as_deref_mut() {
                tr.push((time, x.clone()));
            }
        }
    }
    Ok(x)
}

/// Final state only, with full input validation.
pub(crate) fn flow_state_at(
    field: &VectorField,
    signal: &ControlSignal,
    tau: f64,
    t: f64,
    x0: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    validate(field, signal, tau, t, step)?;
    if x0.len() != field.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: field.state_dim(),
            found: x0.len(),
        });
    }
    flow_state(field, signal, tau, t, x0, step, None)
}

/// Flow `Φ^u_(τ,t)(x₀)` by fixed-step RK4; `t < τ` integrates backward.
pub fn integrate_flow(
    field: &VectorField,
    signal: &ControlSignal,
    tau: f64,
    t: f64,
    x0: &[f64],
    step: f64,
) -> Result<FlowResult> {
    run_flow(field, signal, tau, t, x0, step, false)
}

/// Same as [`integrate_flow`] but keeps every intermediate state.
pub fn integrate_trajectory(
    field: &VectorField,
    signal: &ControlSignal,
    tau: f64,
    t: f64,
    x0: &[f64],
    step: f64,
) -> Result<FlowResult> {
    run_flow(field, signal, tau, t, x0, step, true)
}

fn run_flow(
    field: &VectorField,
    signal: &ControlSignal,
    tau: f64,
    t: f64,
    x0: &[f64],
    step: f64,
    record: bool,
) -> Result<FlowResult> {
    validate(field, signal, tau, t, step)?;
    if x0.len() != field.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: field.state_dim(),
            found: x0.len(),
        });
    }
    let mut trajectory = record.then(Vec::new);
    let final_state = flow_state(field, signal, tau, t, x0, step, trajectory.as_mut())?;
    Ok(FlowResult {
        start_time: tau,
        end_time: t,
        initial_state: x0.to_vec(),
        final_state,
        step,
        trajectory,
    })
}

/// Flows an arbitrary list of points; order is preserved.
pub fn flow_on_points(
    field: &VectorField,
    signal: &ControlSignal,
    tau: f64,
    t: f64,
    points: &[Vec<f64>],
    step: f64,
) -> Result<Vec<Vec<f64>>> {
    validate(field, signal, tau, t, step)?;
    points
        .iter()
        .enumerate()
        .map(|(node, x)| {
            if x.len() != field.state_dim() {
                return Err(Error::DimensionMismatch {
                    expected: field.state_dim(),
                    found: x.len(),
                });
            }
            flow_state(field, signal, tau, t, x, step, None).map_err(|e| match e {
                Error::Divergence { time } => Error::DivergenceAtNode { node, time },
                other => other,
            })
        })
        .collect()
}

pub fn flow_on_grid(
    field: &VectorField,
    signal: &ControlSignal,
    tau: f64,
    t: f64,
    grid: &SpatialGrid,
    step: f64,
) -> Result<Vec<Vec<f64>>> {
    flow_on_points(field, signal, tau, t, grid.nodes(), step)
}

/// Observed counterparts of the constants `M_R`, `L_R` of the stability estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowEstimateReport {
    pub max_norm: f64,
    pub lipschitz: f64,
    pub growth_ok: bool,
}

impl FlowEstimateReport {
    /// Whether `max_norm ≤ (R + mT) e^{mT}`.
    pub fn within_gronwall(&self, radius: f64, growth: f64, horizon: f64) -> bool {
        self.max_norm <= gronwall_bound(radius, growth, horizon) * (1.0 + 1e-12)
    }
}

pub fn gronwall_bound(radius: f64, growth: f64, horizon: f64) -> f64 {
    (radius + growth * horizon) * (growth * horizon).exp()
}

/// Samples `|Φ^u_(τ,t)(x)|` and Lipschitz ratios over the signals, the grid nodes
/// and the forward time pairs `τ ≤ t` drawn from `time_samples` equispaced
/// instants of `[0, T]`.
pub fn check_flow_estimates(
    field: &VectorField,
    signals: &[ControlSignal],
    grid: &SpatialGrid,
    window_radius: f64,
    step: f64,
    time_samples: usize,
) -> Result<FlowEstimateReport> {
    let first = signals.first().ok_or(Error::EmptySet)?;
    if time_samples < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: time_samples,
        });
    }
    if grid
        .nodes()
        .iter()
        .any(|x| norm(x) > window_radius * (1.0 + 1e-12))
    {
        return Err(Error::Invalid(
            "grid nodes must lie in the ball of the given radius",
        ));
    }
    let horizon = first.horizon();
    let times: Vec<f64> = (0..time_samples)
        .map(|k| horizon * k as f64 / (time_samples - 1) as f64)
        .collect();
    let mut pairs = Vec::new();
    for (i, &tau) in times.iter().enumerate() {
        for &t in &times[i..] {
            pairs.push((tau, t));
        }
    }
    let mut max_norm: f64 = 0.0;
    let mut lipschitz: f64 = 0.0;
    for signal in signals {
        check_same_horizon(horizon, signal.horizon())?;
        // flows[p][node]
        let flows: Vec<Vec<Vec<f64>>> = pairs
            .iter()
            .map(|&(tau, t)| flow_on_grid(field, signal, tau, t, grid, step))
            .collect::<Result<_>>()?;
        for (p, states) in flows.iter().enumerate() {
            for (i, y) in states.iter().enumerate() {
                max_norm = max_norm.max(norm(y));
                for (z, node) in states.iter().zip(grid.nodes()).skip(i + 1) {
                    let dx = distance(&grid.nodes()[i], node);
                    lipschitz = lipschitz.max(distance(y, z) / dx);
                }
                for q in (p + 1)..pairs.len() {
                    let dt = (pairs[p].0 - pairs[q].0).abs() + (pairs[p].1 - pairs[q].1).abs();
                    lipschitz = lipschitz.max(distance(y, &flows[q][i]) / dt);
                }
            }
        }
    }
    Ok(FlowEstimateReport {
        max_norm,
        lipschitz,
        growth_ok: max_norm.is_finite() && lipschitz.is_finite(),
    })
}

/// `d_𝒰(u, v) = ∫₀ᵀ |u(s) − v(s)| ds`, exact over the common refinement.
pub fn control_distance(u: &ControlSignal, v: &ControlSignal) -> Result<f64> {
    check_same_horizon(u.horizon(), v.horizon())?;
    let mut breaks: Vec<f64> = (0..=u.segments())
        .map(|k| u.boundary(k))
        .chain((0..=v.segments()).map(|k| v.boundary(k)))
        .collect();
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    Ok(breaks
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (w[1] - w[0]) * u.value_at(mid).distance(v.value_at(mid))
        })
        .sum())
}

/// One row of [`check_continuity_in_control`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityRow {
    pub control_distance: f64,
    pub flow_discrepancy: f64,
}

/// Pairs `d_𝒰(u, v_k)` with `max_x |Φ^{v_k}_(τ,t)(x) − Φ^u_(τ,t)(x)|` over the grid.
/// The distances must not increase along the sequence.
pub fn check_continuity_in_control(
    field: &VectorField,
    u: &ControlSignal,
    perturbations: &[ControlSignal],
    grid: &SpatialGrid,
    tau: f64,
    t: f64,
    step: f64,
) -> Result<Vec<ContinuityRow>> {
    let reference = flow_on_grid(field, u, tau, t, grid, step)?;
    let mut rows: Vec<ContinuityRow> = Vec::with_capacity(perturbations.len());
    for (index, v) in perturbations.iter().enumerate() {
        let d = control_distance(u, v)?;
        if let Some(prev) = rows.last() {
            if d > prev.control_distance {
                return Err(Error::NotDecreasing { index });
            }
        }
        let flowed = flow_on_grid(field, v, tau, t, grid, step)?;
        let discrepancy = flowed
            .iter()
            .zip(&reference)
            .map(|(a, b)| distance(a, b))
            .fold(0.0, f64::max);
        rows.push(ContinuityRow {
            control_distance: d,
            flow_discrepancy: discrepancy,
        });
    }
    Ok(rows)
}

/// `disc_k ≤ (1 + slack) · disc_{k−1}` along the table.
pub fn is_nonincreasing_with_slack(rows: &[ContinuityRow], slack: f64) -> bool {
    rows.windows(2)
        .all(|w| w[1].flow_discrepancy <= (1.0 + slack) * w[0].flow_discrepancy)
}
