//! Benchmark system simulators, transition-dataset generation, and rollout
//! oracles used both for ground truth and for Bellman-property testing.

use ndarray::Array2;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{mat_t_vec, mat_vec, ConstraintSet};
use crate::rng::{derive_seed, CHUNK};

/// Julia-map parameter used by the stacked product system.
pub const JULIA_PRODUCT_A: [f64; 2] = [-0.7, 0.2];

/// Default sampling interval of the switched flower benchmark.
pub const FLOWER_DEFAULT_H: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowerVariant {
    /// φ(x) = x, a switched affine system.
    Affine,
    /// φ(x) = [sin x₁³, sin x₂³].
    Nonlinear,
}

/// Serializable description of a benchmark system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// x⁺ = (x₁² − x₂² + a₁, 2x₁x₂ + a₂).
    Julia { a: [f64; 2] },
    /// n/2 Julia maps stacked and coupled by a random unitary change of
    /// coordinates: f = Q ∘ (f_julia, …, f_julia) ∘ Qᵀ.
    JuliaProduct { n: usize, unitary_seed: u64 },
    /// Three-dimensional Hénon map with a scalar control input.
    Henon3Controlled,
    /// RK4 discretization of the piecewise flower vector field; the active
    /// branch is chosen by x₁² ≤ x₂² at the start of each step and frozen
    /// for the whole step.
    FlowerSwitched { variant: FlowerVariant, h: f64 },
}

impl SystemSpec {
    pub fn state_dim(&self) -> usize {
        match self {
            SystemSpec::Julia { .. } => 2,
            SystemSpec::JuliaProduct { n, .. } => *n,
            SystemSpec::Henon3Controlled => 3,
            SystemSpec::FlowerSwitched { .. } => 2,
        }
    }

    pub fn control_dim(&self) -> usize {
        match self {
            SystemSpec::Henon3Controlled => 1,
            _ => 0,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SystemSpec::Julia { a } => {
                if !a.iter().all(|v| v.is_finite()) {
                    return Err(Error::input("julia parameter must be finite"));
                }
            }
            SystemSpec::JuliaProduct { n, .. } => {
                if *n == 0 || n % 2 != 0 {
                    return Err(Error::input("julia product dimension must be even and positive"));
                }
            }
            SystemSpec::FlowerSwitched { h, .. } => {
                if !(*h > 0.0) || !h.is_finite() {
                    return Err(Error::input("flower step size must be positive"));
                }
            }
            SystemSpec::Henon3Controlled => {}
        }
        Ok(())
    }
}

/// A system prepared for repeated evaluation (the unitary coupling matrix of
/// the product system is computed once here).
#[derive(Clone, Debug)]
pub struct System {
    spec: SystemSpec,
    q: Option<Array2<f64>>,
}

impl System {
    pub fn new(spec: SystemSpec) -> Result<Self> {
        spec.validate()?;
        let q = match &spec {
            SystemSpec::JuliaProduct { n, unitary_seed } => Some(random_unitary(*n, *unitary_seed)),
            _ => None,
        };
        Ok(System { spec, q })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn state_dim(&self) -> usize {
        self.spec.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.spec.control_dim()
    }

    /// The state constraint set each benchmark is studied on.
    pub fn default_state_set(&self) -> ConstraintSet {
        match &self.spec {
            SystemSpec::Julia { .. } => ConstraintSet::unit_ball(2),
            SystemSpec::JuliaProduct { n, .. } => ConstraintSet::TransformedBox {
                q: self.q.clone().expect("product system has a coupling matrix"),
                lower: vec![-1.0; *n],
                upper: vec![1.0; *n],
            },
            SystemSpec::Henon3Controlled => ConstraintSet::cube(3, 1.0),
            SystemSpec::FlowerSwitched { .. } => ConstraintSet::cube(2, 1.0),
        }
    }

    /// Control constraint set, when the system is controlled.
    pub fn default_control_set(&self) -> Option<ConstraintSet> {
        match self.spec {
            SystemSpec::Henon3Controlled => Some(ConstraintSet::cube(1, 1.0)),
            _ => None,
        }
    }

    /// One exact step of the map. A control must be supplied iff the system
    /// is controlled.
    pub fn step(&self, x: &[f64], u: Option<&[f64]>) -> Result<Vec<f64>> {
        if x.len() != self.state_dim() {
            return Err(Error::input(format!(
                "state dimension {} does not match system dimension {}",
                x.len(),
                self.state_dim()
            )));
        }
        let m = self.control_dim();
        match (m, u) {
            (0, Some(_)) => return Err(Error::input("system takes no control input")),
            (_, Some(u)) if u.len() != m => {
                return Err(Error::input("control dimension mismatch"))
            }
            (m, None) if m > 0 => return Err(Error::input("system requires a control input")),
            _ => {}
        }
        Ok(match &self.spec {
            SystemSpec::Julia { a } => julia_step(x, a),
            SystemSpec::JuliaProduct { .. } => {
                let q = self.q.as_ref().expect("coupling matrix");
                let y = mat_t_vec(q, x);
                let mut y_next = Vec::with_capacity(y.len());
                for pair in y.chunks_exact(2) {
                    y_next.extend_from_slice(&julia_step(pair, &JULIA_PRODUCT_A));
                }
                mat_vec(q, &y_next)
            }
            SystemSpec::Henon3Controlled => {
                let u0 = u.expect("checked above")[0];
                vec![
                    0.44 - 0.1 * x[2] - 4.0 * x[1] * x[1] + 0.25 * u0,
                    x[0] - 4.0 * x[0] * x[1],
                    x[1],
                ]
            }
            SystemSpec::FlowerSwitched { variant, h } => {
                let branch_one = x[0] * x[0] <= x[1] * x[1];
                let variant = *variant;
                rk4_step(
                    |y, out| flower_field(y, branch_one, variant, out),
                    x,
                    *h,
                )
            }
        })
    }
}

fn julia_step(x: &[f64], a: &[f64; 2]) -> Vec<f64> {
    vec![x[0] * x[0] - x[1] * x[1] + a[0], 2.0 * x[0] * x[1] + a[1]]
}

fn flower_field(y: &[f64], branch_one: bool, variant: FlowerVariant, out: &mut [f64]) {
    let p = match variant {
        FlowerVariant::Affine => [y[0], y[1]],
        FlowerVariant::Nonlinear => [(y[0] * y[0] * y[0]).sin(), (y[1] * y[1] * y[1]).sin()],
    };
    if branch_one {
        out[0] = -p[0] + p[1];
        out[1] = -5.0 * p[0] - 0.1 * p[1];
    } else {
        out[0] = -0.1 * p[0] + 5.0 * p[1];
        out[1] = -p[0] - 0.1 * p[1];
    }
}

/// Classical fixed-step four-stage Runge-Kutta step of `field`.
pub fn rk4_step<F>(field: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    field(x, &mut k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    field(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    field(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    field(&tmp, &mut k4);

    (0..n)
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Orthogonal matrix from the QR factorization of a seeded standard Gaussian
/// matrix, with the signs of R's diagonal normalized positive. Deterministic
/// per seed.
pub fn random_unitary(n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| crate::rng::gaussian(&mut rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Array2::from_shape_fn((n, n), |(i, j)| q[(i, j)])
}

/// Provenance of a generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub system: SystemSpec,
    pub seed: u64,
    pub pair_count: usize,
}

/// Ordered collection of one-step transitions (x, x⁺). Control inputs used
/// to generate the transitions are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionDataset {
    states: Array2<f64>,
    successors: Array2<f64>,
    pub meta: Option<DatasetMeta>,
}

impl TransitionDataset {
    pub fn from_pairs(
        states: Array2<f64>,
        successors: Array2<f64>,
        meta: Option<DatasetMeta>,
    ) -> Result<Self> {
        if states.nrows() != successors.nrows() || states.ncols() != successors.ncols() {
            return Err(Error::input("state and successor arrays must have equal shape"));
        }
        if states.nrows() == 0 {
            return Err(Error::input("dataset must contain at least one pair"));
        }
        if states.iter().chain(successors.iter()).any(|v| !v.is_finite()) {
            return Err(Error::input("dataset entries must be finite"));
        }
        Ok(TransitionDataset { states, successors, meta })
    }

    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        self.states.row(i).to_slice().expect("contiguous row")
    }

    pub fn successor(&self, i: usize) -> &[f64] {
        self.successors.row(i).to_slice().expect("contiguous row")
    }

    pub fn states(&self) -> &Array2<f64> {
        &self.states
    }

    pub fn successors(&self) -> &Array2<f64> {
        &self.successors
    }

    /// Splits into a head of `count` pairs and the remaining tail.
    pub fn split_at(&self, count: usize) -> Result<(TransitionDataset, TransitionDataset)> {
        if count == 0 || count >= self.len() {
            return Err(Error::input("split must leave both parts nonempty"));
        }
        let head = TransitionDataset {
            states: self.states.slice(ndarray::s![..count, ..]).to_owned(),
            successors: self.successors.slice(ndarray::s![..count, ..]).to_owned(),
            meta: self.meta.clone(),
        };
        let tail = TransitionDataset {
            states: self.states.slice(ndarray::s![count.., ..]).to_owned(),
            successors: self.successors.slice(ndarray::s![count.., ..]).to_owned(),
            meta: self.meta.clone(),
        };
        Ok((head, tail))
    }

    /// Writes `x1,…,xn,xp1,…,xpn` rows with 17 significant digits, enough
    /// for bit-exact round-trips.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        let n = self.dim();
        let header: Vec<String> = (1..=n)
            .map(|j| format!("x{j}"))
            .chain((1..=n).map(|j| format!("xp{j}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = self
                .state(i)
                .iter()
                .chain(self.successor(i))
                .map(|v| format!("{v:.16e}"))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::input("empty dataset file"))??;
        let cols = header.split(',').count();
        if cols == 0 || cols % 2 != 0 {
            return Err(Error::input("dataset header must have 2n columns"));
        }
        let n = cols / 2;
        let mut states = Vec::new();
        let mut successors = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::input(format!("bad number at data row {}", lineno + 1)))
                })
                .collect::<Result<_>>()?;
            if vals.len() != cols {
                return Err(Error::input(format!(
                    "row {} has {} fields, expected {}",
                    lineno + 1,
                    vals.len(),
                    cols
                )));
            }
            states.extend_from_slice(&vals[..n]);
            successors.extend_from_slice(&vals[n..]);
        }
        let k = states.len() / n;
        Self::from_pairs(
            Array2::from_shape_vec((k, n), states).expect("csv shape"),
            Array2::from_shape_vec((k, n), successors).expect("csv shape"),
            None,
        )
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Generates `k` transitions with states uniform over `state_set` and (for
/// controlled systems) controls uniform over `control_set`; the controls are
/// used for the step and then discarded. Deterministic per seed and
/// independent of thread count.
pub fn generate_dataset(
    system: &System,
    state_set: &ConstraintSet,
    control_set: Option<&ConstraintSet>,
    k: usize,
    seed: u64,
) -> Result<TransitionDataset> {
    let n = system.state_dim();
    let m = system.control_dim();
    if state_set.dim() != n {
        return Err(Error::input("state set dimension does not match the system"));
    }
    match (m, control_set) {
        (0, Some(_)) => return Err(Error::input("uncontrolled system takes no control set")),
        (m, None) if m > 0 => return Err(Error::input("controlled system requires a control set")),
        (m, Some(cs)) if m > 0 && cs.dim() != m => {
            return Err(Error::input("control set dimension does not match the system"))
        }
        _ => {}
    }
    if k == 0 {
        return Err(Error::input("dataset size must be at least one"));
    }

    let chunks = k.div_ceil(CHUNK);
    let parts: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, chunk as u64));
            let lo = chunk * CHUNK;
            let hi = (lo + CHUNK).min(k);
            let mut xs = Vec::with_capacity((hi - lo) * n);
            let mut xps = Vec::with_capacity((hi - lo) * n);
            let mut x = Vec::new();
            let mut u = Vec::new();
            for _ in lo..hi {
                x.clear();
                state_set.sample_one(&mut rng, &mut x);
                let xp = if let Some(cs) = control_set {
                    u.clear();
                    cs.sample_one(&mut rng, &mut u);
                    system.step(&x, Some(&u))?
                } else {
                    system.step(&x, None)?
                };
                xs.extend_from_slice(&x);
                xps.extend_from_slice(&xp);
            }
            Ok((xs, xps))
        })
        .collect();

    let mut states = Vec::with_capacity(k * n);
    let mut successors = Vec::with_capacity(k * n);
    for part in parts {
        let (xs, xps) = part?;
        states.extend_from_slice(&xs);
        successors.extend_from_slice(&xps);
    }
    TransitionDataset::from_pairs(
        Array2::from_shape_vec((k, n), states).expect("dataset shape"),
        Array2::from_shape_vec((k, n), successors).expect("dataset shape"),
        Some(DatasetMeta { system: system.spec().clone(), seed, pair_count: k }),
    )
}

/// Truncated discounted rollout value and its truncation bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rollout {
    /// Σ_{k<T} αᵏ·dist(X, f(x̄_k)) along the projected trajectory.
    pub value: f64,
    /// αᵀ/(1−α), an upper bound on the truncated tail.
    pub truncation_bound: f64,
}

/// Evaluates the discounted distance-sum along the projected trajectory
/// x̄_{k+1} = proj(X, f(x̄_k)) starting at `x`, truncated after `horizon`
/// terms. Only defined for uncontrolled systems.
pub fn rollout_value(
    system: &System,
    state_set: &ConstraintSet,
    x: &[f64],
    alpha: f64,
    horizon: usize,
) -> Result<Rollout> {
    if system.control_dim() > 0 {
        return Err(Error::input(
            "rollout value is unsupported for controlled systems (infimum over controls is not computed)",
        ));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::input("discount factor must lie in (0,1)"));
    }
    if horizon == 0 {
        return Err(Error::input("rollout horizon must be at least one"));
    }
    state_set.check_dim(x)?;

    let mut cur = x.to_vec();
    let mut value = 0.0;
    let mut weight = 1.0;
    for _ in 0..horizon {
        let fx = system.step(&cur, None)?;
        value += weight * state_set.saturated_distance(&fx)?;
        cur = state_set.project(&fx)?;
        weight *= alpha;
    }
    Ok(Rollout { value, truncation_bound: weight / (1.0 - alpha) })
}

/// Default oracle horizon used by the evaluation pipeline.
pub const DEFAULT_ORACLE_HORIZON: usize = 1000;

/// Finite-horizon membership oracle: true iff the raw orbit f⁽ᵏ⁾(x) stays in
/// the set for all k ≤ horizon. A superset of the true invariant set that
/// tightens as the horizon grows. Orbits that leave the set return false
/// immediately; escaping orbits of the benchmarks blow up fast, so the loop
/// rarely runs long for outside points.
pub fn mpi_oracle(
    system: &System,
    state_set: &ConstraintSet,
    x: &[f64],
    horizon: usize,
) -> Result<bool> {
    if system.control_dim() > 0 {
        return Err(Error::input("the invariant-set oracle requires an uncontrolled system"));
    }
    let mut cur = x.to_vec();
    for _ in 0..horizon {
        if !state_set.contains(&cur)? {
            return Ok(false);
        }
        cur = system.step(&cur, None)?;
    }
    state_set.contains(&cur)
}
