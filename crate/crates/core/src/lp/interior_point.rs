//! Built-in dense LP solver: Mehrotra-style primal-dual predictor-corrector
//! on the inequality form `max zᵀc s.t. Ac + s = b, s ≥ 0`.
//!
//! Each iteration solves the N×N normal equations `(AᵀDA)Δc = rhs` with
//! `D = diag(y/s)`. Because the sampled problems have far more rows than
//! columns, rows are streamed once per iteration into a packed upper
//! triangle, in fixed chunks whose partial sums are reduced in chunk order —
//! the result is bitwise independent of the thread count.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use ndarray::Array2;
use rayon::prelude::*;

use super::{LpProblem, LpSolution, LpSolver, LpStatus, SolverOptions};
use crate::error::{Error, Result};

/// Rows per accumulation chunk of the normal-equation kernel.
const NORMAL_CHUNK_ROWS: usize = 2048;

/// Iterate magnitude beyond which divergence certificates are attempted.
const DIVERGENCE_LIMIT: f64 = 1e10;

pub struct InteriorPointSolver;

impl LpSolver for InteriorPointSolver {
    fn name(&self) -> &str {
        super::BUILTIN_SOLVER
    }

    fn solve(&self, problem: &LpProblem, options: &SolverOptions) -> Result<LpSolution> {
        problem.validate()?;
        if !(0.0 < options.boundary_fraction && options.boundary_fraction < 1.0) {
            return Err(Error::input("boundary fraction must lie in (0,1)"));
        }
        if options.max_iterations == 0 {
            return Err(Error::input("iteration cap must be positive"));
        }
        Ok(mehrotra(problem, options))
    }
}

struct Iterate {
    c: DVector<f64>,
    s: Vec<f64>,
    y: Vec<f64>,
}

fn mehrotra(problem: &LpProblem, options: &SolverOptions) -> LpSolution {
    let a = &problem.a;
    let m = a.nrows();
    let n = a.ncols();
    let b: Vec<f64> = problem.b.to_vec();
    let z: Vec<f64> = problem.objective.to_vec();
    let b_scale = 1.0 + b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let z_scale = 1.0 + z.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    let mut it = match starting_point(a, &b, &z) {
        Some(it) => it,
        None => return finish(problem, None, LpStatus::NumericalFailure, 0),
    };

    let mut status = LpStatus::NumericalFailure;
    let mut iterations = 0;

    for iter in 0..options.max_iterations {
        iterations = iter + 1;

        let ac = mat_vec(a, it.c.as_slice());
        let rp: Vec<f64> = (0..m).map(|i| b[i] - ac[i] - it.s[i]).collect();
        let aty = mat_t_vec(a, &it.y);
        let rd: Vec<f64> = (0..n).map(|j| z[j] - aty[j]).collect();

        let obj: f64 = z.iter().zip(it.c.iter()).map(|(a, b)| a * b).sum();
        let dual_obj: f64 = b.iter().zip(&it.y).map(|(a, b)| a * b).sum();
        let rel_p = inf_norm(&rp) / b_scale;
        let rel_d = inf_norm(&rd) / z_scale;
        let rel_gap = (obj - dual_obj).abs() / (1.0 + obj.abs());
        let mu = it.s.iter().zip(&it.y).map(|(s, y)| s * y).sum::<f64>() / m as f64;

        if !mu.is_finite() || !rel_p.is_finite() || !rel_d.is_finite() {
            status = LpStatus::NumericalFailure;
            break;
        }
        if rel_p <= options.feasibility && rel_d <= options.feasibility && rel_gap <= options.gap {
            status = LpStatus::Optimal;
            break;
        }
        if let Some(divergent) = divergence_status(problem, &it, &z, &b) {
            status = divergent;
            break;
        }

        // D = diag(y/s); factor M = AᵀDA once per iteration.
        let d: Vec<f64> = it.s.iter().zip(&it.y).map(|(s, y)| y / s).collect();
        let chol = match factor_normal(a, &d) {
            Some(c) => c,
            None => {
                status = LpStatus::NumericalFailure;
                break;
            }
        };

        let solve_direction = |rc: &[f64]| -> (DVector<f64>, Vec<f64>, Vec<f64>) {
            // w = D∘rp − rc/s;  (AᵀDA)dc = rd + Aᵀw.
            let w: Vec<f64> = (0..m).map(|i| d[i] * rp[i] - rc[i] / it.s[i]).collect();
            let atw = mat_t_vec(a, &w);
            let rhs = DVector::from_iterator(n, (0..n).map(|j| rd[j] + atw[j]));
            let dc = chol.solve(&rhs);
            let adc = mat_vec(a, dc.as_slice());
            let dy: Vec<f64> = (0..m).map(|i| d[i] * (adc[i] - rp[i]) + rc[i] / it.s[i]).collect();
            let ds: Vec<f64> = (0..m).map(|i| (rc[i] - it.s[i] * dy[i]) / it.y[i]).collect();
            (dc, dy, ds)
        };

        // Affine predictor.
        let rc_aff: Vec<f64> = it.s.iter().zip(&it.y).map(|(s, y)| -s * y).collect();
        let (_dc_aff, dy_aff, ds_aff) = solve_direction(&rc_aff);
        let ap_aff = max_step(&it.s, &ds_aff).min(1.0);
        let ad_aff = max_step(&it.y, &dy_aff).min(1.0);
        let mu_aff = (0..m)
            .map(|i| (it.s[i] + ap_aff * ds_aff[i]) * (it.y[i] + ad_aff * dy_aff[i]))
            .sum::<f64>()
            / m as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // Corrector with the same factorization.
        let rc: Vec<f64> = (0..m)
            .map(|i| sigma * mu - it.s[i] * it.y[i] - ds_aff[i] * dy_aff[i])
            .collect();
        let (dc, dy, ds) = solve_direction(&rc);

        let ap = (options.boundary_fraction * max_step(&it.s, &ds)).min(1.0);
        let ad = (options.boundary_fraction * max_step(&it.y, &dy)).min(1.0);
        if !ap.is_finite() || !ad.is_finite() {
            status = LpStatus::NumericalFailure;
            break;
        }
        it.c += ap * &dc;
        for i in 0..m {
            it.s[i] = (it.s[i] + ap * ds[i]).max(f64::MIN_POSITIVE);
            it.y[i] = (it.y[i] + ad * dy[i]).max(f64::MIN_POSITIVE);
        }
    }

    if status == LpStatus::NumericalFailure {
        // The cap or a breakdown was hit; divergence may still explain it.
        if let Some(divergent) = divergence_status(problem, &it, &z, &b) {
            status = divergent;
        }
    }
    finish(problem, Some(it), status, iterations)
}

/// Least-squares starting point (Mehrotra's heuristic): regressions of b and
/// z through AᵀA give the primal/dual guesses, shifted into the positive
/// orthant.
fn starting_point(a: &Array2<f64>, b: &[f64], z: &[f64]) -> Option<Iterate> {
    let m = a.nrows();
    let ones = vec![1.0; m];
    let chol = factor_normal(a, &ones)?;

    let atb = mat_t_vec(a, b);
    let c = chol.solve(&DVector::from_vec(atb));
    let ac = mat_vec(a, c.as_slice());
    let mut s: Vec<f64> = (0..m).map(|i| b[i] - ac[i]).collect();
    let zv = chol.solve(&DVector::from_column_slice(z));
    let mut y = mat_vec(a, zv.as_slice());

    let shift_s = s.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0) * -1.5;
    let shift_y = y.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0) * -1.5;
    for v in &mut s {
        *v += shift_s;
    }
    for v in &mut y {
        *v += shift_y;
    }
    let dot: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
    let sum_s: f64 = s.iter().sum();
    let sum_y: f64 = y.iter().sum();
    if dot > 0.0 && sum_s > 0.0 && sum_y > 0.0 && dot.is_finite() {
        let ds = 0.5 * dot / sum_y;
        let dy = 0.5 * dot / sum_s;
        for v in &mut s {
            *v = (*v + ds).max(1e-10);
        }
        for v in &mut y {
            *v = (*v + dy).max(1e-10);
        }
    } else {
        s.iter_mut().for_each(|v| *v = 1.0);
        y.iter_mut().for_each(|v| *v = 1.0);
    }
    if c.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(Iterate { c, s, y })
}

/// Ray certificates once iterates blow up: a primal ray proves
/// unboundedness, a Farkas dual ray proves infeasibility.
fn divergence_status(problem: &LpProblem, it: &Iterate, z: &[f64], b: &[f64]) -> Option<LpStatus> {
    let c_norm = it.c.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if c_norm > DIVERGENCE_LIMIT {
        let ray: Vec<f64> = it.c.iter().map(|v| v / c_norm).collect();
        let aray = mat_vec(&problem.a, &ray);
        let zray: f64 = z.iter().zip(&ray).map(|(a, b)| a * b).sum();
        if aray.iter().all(|v| *v <= 1e-6) && zray > 1e-6 {
            return Some(LpStatus::Unbounded);
        }
    }
    let y_norm = it.y.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if y_norm > DIVERGENCE_LIMIT {
        let ray: Vec<f64> = it.y.iter().map(|v| v / y_norm).collect();
        let atray = mat_t_vec(&problem.a, &ray);
        let bray: f64 = b.iter().zip(&ray).map(|(a, b)| a * b).sum();
        if inf_norm(&atray) <= 1e-6 && bray < -1e-6 {
            return Some(LpStatus::Infeasible);
        }
    }
    None
}

fn finish(problem: &LpProblem, it: Option<Iterate>, status: LpStatus, iterations: usize) -> LpSolution {
    let n = problem.a.ncols();
    let (c, y) = match it {
        Some(it) => (it.c.as_slice().to_vec(), it.y),
        None => (vec![0.0; n], vec![0.0; problem.a.nrows()]),
    };
    let ac = mat_vec(&problem.a, &c);
    let violation = ac
        .iter()
        .zip(problem.b.iter())
        .map(|(l, r)| l - r)
        .fold(0.0f64, f64::max);
    let obj: f64 = problem.objective.iter().zip(&c).map(|(a, b)| a * b).sum();
    let dual_obj: f64 = problem.b.iter().zip(&y).map(|(a, b)| a * b).sum();
    LpSolution {
        coefficients: c,
        status,
        primal_objective: obj,
        max_constraint_violation: violation.max(0.0),
        duality_gap: (obj - dual_obj).abs() / (1.0 + obj.abs()),
        iterations,
    }
}

/// `A·x` (independent rows; deterministic under any scheduling).
fn mat_vec(a: &Array2<f64>, x: &[f64]) -> Vec<f64> {
    let n = a.ncols();
    let flat = a.as_slice().expect("row-major matrix");
    flat.par_chunks(n)
        .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
        .collect()
}

/// `Aᵀ·w` accumulated in fixed row chunks, reduced in chunk order.
fn mat_t_vec(a: &Array2<f64>, w: &[f64]) -> Vec<f64> {
    let n = a.ncols();
    let flat = a.as_slice().expect("row-major matrix");
    let partials: Vec<Vec<f64>> = flat
        .par_chunks(NORMAL_CHUNK_ROWS * n)
        .zip(w.par_chunks(NORMAL_CHUNK_ROWS))
        .map(|(rows, weights)| {
            let mut acc = vec![0.0; n];
            for (row, wi) in rows.chunks_exact(n).zip(weights) {
                if *wi != 0.0 {
                    for (a, r) in acc.iter_mut().zip(row) {
                        *a += wi * r;
                    }
                }
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; n];
    for p in partials {
        for (o, v) in out.iter_mut().zip(&p) {
            *o += v;
        }
    }
    out
}

/// Packed upper triangle of `AᵀDA`, accumulated chunk-parallel.
fn normal_upper_triangle(a: &Array2<f64>, d: &[f64]) -> Vec<f64> {
    let n = a.ncols();
    let tri_len = n * (n + 1) / 2;
    let flat = a.as_slice().expect("row-major matrix");
    let partials: Vec<Vec<f64>> = flat
        .par_chunks(NORMAL_CHUNK_ROWS * n)
        .zip(d.par_chunks(NORMAL_CHUNK_ROWS))
        .map(|(rows, weights)| {
            let mut tri = vec![0.0; tri_len];
            for (row, di) in rows.chunks_exact(n).zip(weights) {
                let mut start = 0;
                for i in 0..n {
                    let w = di * row[i];
                    let seg = &mut tri[start..start + (n - i)];
                    let src = &row[i..];
                    for (t, r) in seg.iter_mut().zip(src) {
                        *t += w * r;
                    }
                    start += n - i;
                }
            }
            tri
        })
        .collect();
    let mut tri = vec![0.0; tri_len];
    for p in partials {
        for (t, v) in tri.iter_mut().zip(&p) {
            *t += v;
        }
    }
    tri
}

/// Factors `AᵀDA (+ ridge)`; the ridge escalates from ~1e-12·scale until the
/// factorization succeeds.
fn factor_normal(a: &Array2<f64>, d: &[f64]) -> Option<Cholesky<f64, Dyn>> {
    let n = a.ncols();
    let tri = normal_upper_triangle(a, d);
    let mut full = DMatrix::zeros(n, n);
    let mut start = 0;
    for i in 0..n {
        for (off, v) in tri[start..start + (n - i)].iter().enumerate() {
            full[(i, i + off)] = *v;
            full[(i + off, i)] = *v;
        }
        start += n - i;
    }
    let trace: f64 = (0..n).map(|i| full[(i, i)]).sum();
    let scale = 1.0 + trace / n as f64;
    let mut ridge = 0.0;
    for attempt in 0..8 {
        let mut m = full.clone();
        if ridge > 0.0 {
            for i in 0..n {
                m[(i, i)] += ridge;
            }
        }
        if let Some(chol) = Cholesky::new(m) {
            return Some(chol);
        }
        ridge = if attempt == 0 { 1e-12 * scale } else { ridge * 100.0 };
    }
    None
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    let mut step = f64::INFINITY;
    for (vi, di) in v.iter().zip(dv) {
        if *di < 0.0 {
            step = step.min(-vi / di);
        }
    }
    step
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}
