//! Assembly of the sampled Bellman-inequality linear program into dense
//! inequality form, and its solution through a pluggable solver interface.
//!
//! The problem maximizes zᵀc subject to Ac ≤ b where A stacks one Bellman
//! row per data pair and two bound rows per artificial point:
//! A = [A₁; A₂; −A₂], b = [b₁; (1−α)⁻¹·1; 1].

mod interior_point;

pub use interior_point::InteriorPointSolver;

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use crate::basis::{BasisSpec, Quadrature};
use crate::dynamics::TransitionDataset;
use crate::error::{Error, Result};
use crate::geometry::ConstraintSet;

/// Name under which the built-in solver is registered.
pub const BUILTIN_SOLVER: &str = "interior-point";

/// Provenance of one constraint row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    /// Bellman row for data pair `i`: β(x_i)ᵀc − α·β(proj(x_i⁺))ᵀc ≤ dist(x_i⁺).
    Bellman(usize),
    /// Upper bound at artificial point `i`: β(z_i)ᵀc ≤ (1−α)⁻¹.
    UpperBound(usize),
    /// Lower bound at artificial point `i`: −β(z_i)ᵀc ≤ 1.
    LowerBound(usize),
}

/// Dense inequality-form LP: maximize zᵀc subject to Ac ≤ b.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub objective: Array1<f64>,
    pub a: Array2<f64>,
    pub b: Array1<f64>,
    pub row_provenance: Vec<RowKind>,
}

impl LpProblem {
    pub fn new(objective: Array1<f64>, a: Array2<f64>, b: Array1<f64>, row_provenance: Vec<RowKind>) -> Result<Self> {
        if a.nrows() != b.len() || a.nrows() != row_provenance.len() {
            return Err(Error::input("row count mismatch between A, b and provenance"));
        }
        if a.ncols() != objective.len() {
            return Err(Error::input("objective length must match column count"));
        }
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::input("LP must have at least one row and one column"));
        }
        let problem = LpProblem { objective, a, b, row_provenance };
        problem.validate()?;
        Ok(problem)
    }

    /// Checks the structural invariants: finite entries and Bellman
    /// right-hand sides inside [0,1] (they are saturated distances).
    pub fn validate(&self) -> Result<()> {
        if self.objective.iter().any(|v| !v.is_finite())
            || self.a.iter().any(|v| !v.is_finite())
            || self.b.iter().any(|v| !v.is_finite())
        {
            return Err(Error::input("LP entries must be finite"));
        }
        for (kind, rhs) in self.row_provenance.iter().zip(self.b.iter()) {
            if let RowKind::Bellman(i) = kind {
                if !(0.0..=1.0).contains(rhs) {
                    return Err(Error::input(format!(
                        "Bellman right-hand side {rhs} of pair {i} outside [0,1]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_cols(&self) -> usize {
        self.a.ncols()
    }

    /// True when at least one bound-row pair is present, which makes the
    /// feasible set compact for unisolvent artificial points.
    pub fn has_bound_rows(&self) -> bool {
        self.row_provenance
            .iter()
            .any(|k| matches!(k, RowKind::UpperBound(_) | RowKind::LowerBound(_)))
    }

    /// Plain-text dump for cross-checking against external solvers:
    /// first line `N K_rows`, then z, then one `a₁ … a_N | b` line per row.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.num_cols(), self.num_rows())?;
        let z: Vec<String> = self.objective.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", z.join(" "))?;
        for (row, rhs) in self.a.rows().into_iter().zip(self.b.iter()) {
            let coeffs: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{} | {rhs:.16e}", coeffs.join(" "))?;
        }
        Ok(())
    }
}

/// Builds the sampled LP from data, artificial points, and the basis.
///
/// Requires the artificial points to be unisolvent for the basis; the bound
/// rows they carry keep the feasible set compact, so the LP is never
/// unbounded.
pub fn assemble_problem(
    dataset: &TransitionDataset,
    artificial_points: ArrayView2<f64>,
    basis: &BasisSpec,
    set: &ConstraintSet,
    alpha: f64,
    quadrature: &Quadrature,
) -> Result<LpProblem> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::input("discount factor must lie in (0,1)"));
    }
    let n = set.dim();
    if dataset.dim() != n || basis.input_dim() != n || artificial_points.ncols() != n {
        return Err(Error::input("dataset, basis, artificial points and set must share one dimension"));
    }
    let report = basis.unisolvency_check(artificial_points)?;
    if !report.unisolvent {
        return Err(Error::config(format!(
            "artificial points are not unisolvent for the basis (condition estimate {:.3e})",
            report.condition_estimate
        )));
    }

    let nfun = basis.dimension();
    let k = dataset.len();
    let k_prime = artificial_points.nrows();
    let rows = k + 2 * k_prime;

    let mut a = vec![0.0; rows * nfun];
    let mut b = vec![0.0; rows];

    // Bellman block, built row-parallel.
    let (a_head, a_tail) = a.split_at_mut(k * nfun);
    let (b_head, b_tail) = b.split_at_mut(k);
    let results: Result<Vec<()>> = a_head
        .par_chunks_mut(nfun)
        .zip(b_head.par_iter_mut())
        .enumerate()
        .map(|(i, (row, rhs))| {
            let x = dataset.state(i);
            let xp = dataset.successor(i);
            let mut shifted = vec![0.0; nfun];
            basis.eval_into(x, row)?;
            let proj = set.project(xp)?;
            basis.eval_into(&proj, &mut shifted)?;
            for (r, s) in row.iter_mut().zip(&shifted) {
                *r -= alpha * s;
            }
            *rhs = set.saturated_distance(xp)?;
            Ok(())
        })
        .collect();
    results?;

    // Bound blocks A₂ and −A₂.
    let (a_up, a_lo) = a_tail.split_at_mut(k_prime * nfun);
    let upper_rhs = 1.0 / (1.0 - alpha);
    let bound_rows: Result<Vec<()>> = a_up
        .par_chunks_mut(nfun)
        .zip(a_lo.par_chunks_mut(nfun))
        .enumerate()
        .map(|(i, (up, lo))| {
            let zi = artificial_points.row(i);
            basis.eval_into(zi.to_slice().expect("contiguous row"), up)?;
            for (l, u) in lo.iter_mut().zip(up.iter()) {
                *l = -u;
            }
            Ok(())
        })
        .collect();
    bound_rows?;
    b_tail[..k_prime].fill(upper_rhs);
    b_tail[k_prime..].fill(1.0);

    let mut provenance = Vec::with_capacity(rows);
    provenance.extend((0..k).map(RowKind::Bellman));
    provenance.extend((0..k_prime).map(RowKind::UpperBound));
    provenance.extend((0..k_prime).map(RowKind::LowerBound));

    let objective = basis.integrate(set, quadrature)?;
    LpProblem::new(
        objective,
        Array2::from_shape_vec((rows, nfun), a).expect("row-major assembly"),
        Array1::from_vec(b),
        provenance,
    )
}

/// Termination status of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Result of a solve. On `Optimal` the KKT conditions hold to the requested
/// tolerances: `max_constraint_violation ≤ feasibility·(1+‖b‖∞)` and the
/// (relative) `duality_gap ≤ gap`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LpSolution {
    pub coefficients: Vec<f64>,
    pub status: LpStatus,
    pub primal_objective: f64,
    /// max(0, max_i (Ac − b)_i), recomputed from the returned point.
    pub max_constraint_violation: f64,
    /// |zᵀc − bᵀy| / (1 + |zᵀc|).
    pub duality_gap: f64,
    pub iterations: usize,
}

/// Tolerances and iteration limits for a solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Relative primal/dual feasibility tolerance.
    pub feasibility: f64,
    /// Relative duality-gap tolerance.
    pub gap: f64,
    pub max_iterations: usize,
    /// Fraction-to-boundary step damping.
    pub boundary_fraction: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility: 1e-8,
            gap: 1e-8,
            max_iterations: 200,
            boundary_fraction: 0.995,
        }
    }
}

/// A solver that fulfills the `solve_lp` contract. Implementations must be
/// deterministic functions of the problem and options.
pub trait LpSolver: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, problem: &LpProblem, options: &SolverOptions) -> Result<LpSolution>;
}

/// Solves with the built-in interior-point solver.
pub fn solve_lp(problem: &LpProblem, options: &SolverOptions) -> Result<LpSolution> {
    InteriorPointSolver.solve(problem, options)
}

/// Registry of available solvers, keyed by name.
pub struct SolverRegistry {
    solvers: BTreeMap<String, Arc<dyn LpSolver>>,
}

impl SolverRegistry {
    /// The default registry contains exactly the built-in solver.
    pub fn with_builtin() -> Self {
        let mut reg = SolverRegistry { solvers: BTreeMap::new() };
        reg.register(Arc::new(InteriorPointSolver));
        reg
    }

    pub fn register(&mut self, solver: Arc<dyn LpSolver>) {
        self.solvers.insert(solver.name().to_string(), solver);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn LpSolver>> {
        self.solvers.get(name).cloned().ok_or_else(|| {
            Error::config(format!(
                "unknown solver '{name}'; available: {}",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.solvers.keys().cloned().collect()
    }
}

impl Default for SolverRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{generate_dataset, System, SystemSpec};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn tiny_problem(a: Vec<Vec<f64>>, b: Vec<f64>, z: Vec<f64>) -> LpProblem {
        let rows = a.len();
        let cols = z.len();
        let flat: Vec<f64> = a.into_iter().flatten().collect();
        // Generic rows carry bound tags; Bellman tags would enforce the
        // saturated-distance range on the right-hand side.
        LpProblem::new(
            Array1::from_vec(z),
            Array2::from_shape_vec((rows, cols), flat).unwrap(),
            Array1::from_vec(b),
            (0..rows).map(RowKind::UpperBound).collect(),
        )
        .unwrap()
    }

    #[test]
    fn assembled_blocks_have_spec_shape() {
        let sys = System::new(SystemSpec::Julia { a: [-0.7, 0.2] }).unwrap();
        let set = ConstraintSet::unit_ball(2);
        let dataset = generate_dataset(&sys, &set, None, 2, 3).unwrap();
        let basis = BasisSpec::monomial(2, 1).unwrap();
        // 3 artificial points for N = 3... use N=2 basis: monomial(2,1) has N=3.
        let artificial = set.sample_uniform(6, 5);
        let alpha = 0.5;
        let p = assemble_problem(
            &dataset,
            artificial.view(),
            &basis,
            &set,
            alpha,
            &Quadrature::MonteCarlo { samples: 1000, seed: 1 },
        )
        .unwrap();
        assert_eq!(p.num_rows(), 2 + 2 * 6);
        assert_eq!(p.num_cols(), 3);
        // Bound right-hand sides: (1−α)⁻¹ = 2 then 1.
        assert_eq!(p.b[2], 2.0);
        assert_eq!(p.b[2 + 6], 1.0);
        assert_eq!(p.row_provenance[0], RowKind::Bellman(0));
        assert_eq!(p.row_provenance[2], RowKind::UpperBound(0));
        assert_eq!(p.row_provenance[8], RowKind::LowerBound(0));
        assert!(p.has_bound_rows());
        // The −A₂ block mirrors A₂.
        assert_eq!(p.a[[2, 0]], -p.a[[8, 0]]);
    }

    #[test]
    fn bellman_rhs_vanishes_for_members() {
        let sys = System::new(SystemSpec::Julia { a: [0.0, 0.0] }).unwrap();
        let set = ConstraintSet::unit_ball(2);
        // With a = 0 the origin maps to itself: successor inside X.
        let dataset = TransitionDataset::from_pairs(
            array![[0.1, 0.0]],
            array![[sys.step(&[0.1, 0.0], None).unwrap()[0], 0.0]],
            None,
        )
        .unwrap();
        let basis = BasisSpec::monomial(2, 1).unwrap();
        let artificial = set.sample_uniform(8, 2);
        let p = assemble_problem(
            &dataset,
            artificial.view(),
            &basis,
            &set,
            0.5,
            &Quadrature::MonteCarlo { samples: 500, seed: 1 },
        )
        .unwrap();
        assert_eq!(p.b[0], 0.0, "successor in X has zero stage cost");
    }

    #[test]
    fn non_unisolvent_artificial_points_are_rejected() {
        let sys = System::new(SystemSpec::Julia { a: [-0.7, 0.2] }).unwrap();
        let set = ConstraintSet::unit_ball(2);
        let dataset = generate_dataset(&sys, &set, None, 3, 3).unwrap();
        let basis = BasisSpec::monomial(2, 2).unwrap();
        // All artificial points identical: rank 1 < N.
        let artificial = Array2::from_shape_vec((8, 2), vec![0.1; 16]).unwrap();
        let err = assemble_problem(
            &dataset,
            artificial.view(),
            &basis,
            &set,
            0.6,
            &Quadrature::MonteCarlo { samples: 500, seed: 1 },
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn solve_one_dimensional() {
        let p = tiny_problem(vec![vec![1.0], vec![-1.0]], vec![3.0, 1.0], vec![1.0]);
        let s = solve_lp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.coefficients[0], 3.0, epsilon = 1e-7);
        assert_abs_diff_eq!(s.primal_objective, 3.0, epsilon = 1e-7);
    }

    #[test]
    fn solve_two_dimensional_box() {
        let p = tiny_problem(
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            vec![1.0, 1.0, 0.0, 0.0],
            vec![1.0, 1.0],
        );
        let s = solve_lp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.coefficients[0], 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(s.coefficients[1], 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(s.primal_objective, 2.0, epsilon = 1e-7);
    }

    #[test]
    fn unbounded_is_reported_with_ray() {
        // max c with only −c ≤ 1: no bound rows above, certificate ray c → ∞.
        let p = tiny_problem(vec![vec![-1.0]], vec![1.0], vec![1.0]);
        let s = solve_lp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible_is_reported() {
        // c ≤ −1 and −c ≤ 0 cannot both hold.
        let p = tiny_problem(vec![vec![1.0], vec![-1.0]], vec![-1.0, 0.0], vec![1.0]);
        let s = solve_lp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn scaling_rows_leaves_argmax_unchanged() {
        let p = tiny_problem(
            vec![vec![2.0, 1.0], vec![-1.0, 2.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            vec![3.0, 2.0, 0.5, 0.5],
            vec![1.0, 0.7],
        );
        let mut scaled = p.clone();
        scaled.a.mapv_inplace(|v| 10.0 * v);
        scaled.b.mapv_inplace(|v| 10.0 * v);
        let s1 = solve_lp(&p, &SolverOptions::default()).unwrap();
        let s2 = solve_lp(&scaled, &SolverOptions::default()).unwrap();
        assert_eq!(s1.status, LpStatus::Optimal);
        for (a, b) in s1.coefficients.iter().zip(&s2.coefficients) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-6);
        }
    }

    #[test]
    fn returned_solution_is_feasible_with_small_gap() {
        let p = tiny_problem(
            vec![
                vec![1.0, 0.3],
                vec![0.2, 1.0],
                vec![-1.0, 0.1],
                vec![0.0, -1.0],
                vec![0.7, -0.2],
            ],
            vec![1.2, 0.9, 0.4, 0.6, 1.0],
            vec![0.8, 1.0],
        );
        let opts = SolverOptions::default();
        let s = solve_lp(&p, &opts).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        // Independent feasibility check.
        let bmax = p.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (row, rhs) in p.a.rows().into_iter().zip(p.b.iter()) {
            let lhs: f64 = row.iter().zip(&s.coefficients).map(|(a, c)| a * c).sum();
            assert!(lhs <= rhs + opts.feasibility * (1.0 + bmax));
        }
        assert!(s.duality_gap <= opts.gap * 10.0);
        assert!(s.max_constraint_violation <= opts.feasibility * (1.0 + bmax));
    }

    #[test]
    fn solver_is_deterministic() {
        let p = tiny_problem(
            vec![vec![1.0, 1.0], vec![-1.0, 0.5], vec![0.0, -1.0], vec![1.0, -2.0]],
            vec![2.0, 1.0, 1.0, 2.0],
            vec![0.3, 1.0],
        );
        let s1 = solve_lp(&p, &SolverOptions::default()).unwrap();
        let s2 = solve_lp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s1.coefficients, s2.coefficients);
        assert_eq!(s1.iterations, s2.iterations);
    }

    #[test]
    fn registry_contains_exactly_builtin() {
        let reg = SolverRegistry::with_builtin();
        assert_eq!(reg.names(), vec![BUILTIN_SOLVER.to_string()]);
        assert!(reg.get(BUILTIN_SOLVER).is_ok());
        assert!(matches!(reg.get("simplex"), Err(Error::Config(_))));
    }

    #[test]
    fn text_dump_format() {
        let p = tiny_problem(vec![vec![1.0, 0.0]], vec![2.0], vec![1.0, -1.0]);
        let mut buf = Vec::new();
        p.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "2 1");
        assert!(lines.next().unwrap().contains("1.0000000000000000e0"));
        assert!(lines.next().unwrap().contains(" | 2.0000000000000000e0"));
    }
}
