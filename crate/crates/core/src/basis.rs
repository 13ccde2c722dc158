//! Finite-dimensional function spaces: monomial and thin-plate-spline bases
//! with evaluation, analytic gradients, integration against the uniform
//! probability measure, and unisolvency checks.

use ndarray::{Array1, Array2, ArrayView2};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{euclidean, ConstraintSet};
use crate::rng::{chunk_rng, CHUNK};

/// Minimum pairwise distance between RBF centers.
pub const CENTER_SEPARATION: f64 = 1e-9;

/// Descriptor of the approximation space V_N.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisDto", into = "BasisDto")]
pub enum BasisSpec {
    /// All monomials of total degree ≤ `degree` in `n` variables, enumerated
    /// by total degree and, within a degree, by lexicographically descending
    /// exponent (1; x₁, x₂; x₁², x₁x₂, x₂²; …). The ordering is part of the
    /// serialized-coefficient contract.
    Monomial { n: usize, degree: usize },
    /// Thin-plate splines r²·log r around the given centers (one row per
    /// center), with value and gradient 0 at r = 0 by continuity.
    RbfThinPlate { centers: Array2<f64> },
}

impl BasisSpec {
    pub fn monomial(n: usize, degree: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("monomial basis requires at least one variable"));
        }
        Ok(BasisSpec::Monomial { n, degree })
    }

    pub fn rbf_thin_plate(centers: Array2<f64>) -> Result<Self> {
        if centers.nrows() == 0 || centers.ncols() == 0 {
            return Err(Error::input("RBF basis requires at least one center"));
        }
        if centers.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("RBF centers must be finite"));
        }
        for i in 0..centers.nrows() {
            for j in (i + 1)..centers.nrows() {
                let d = euclidean(
                    centers.row(i).to_slice().expect("contiguous row"),
                    centers.row(j).to_slice().expect("contiguous row"),
                );
                if d <= CENTER_SEPARATION {
                    return Err(Error::input(format!(
                        "RBF centers {i} and {j} are closer than {CENTER_SEPARATION}"
                    )));
                }
            }
        }
        Ok(BasisSpec::RbfThinPlate { centers })
    }

    /// Ambient dimension n.
    pub fn input_dim(&self) -> usize {
        match self {
            BasisSpec::Monomial { n, .. } => *n,
            BasisSpec::RbfThinPlate { centers } => centers.ncols(),
        }
    }

    /// Number of basis functions N.
    pub fn dimension(&self) -> usize {
        match self {
            BasisSpec::Monomial { n, degree } => binomial(n + degree, *n),
            BasisSpec::RbfThinPlate { centers } => centers.nrows(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::input(format!(
                "point dimension {} does not match basis dimension {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Evaluates β(x) into `out` (length N).
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(x)?;
        assert_eq!(out.len(), self.dimension());
        match self {
            BasisSpec::Monomial { n, degree } => {
                let pows = power_table(x, *degree);
                let stride = degree + 1;
                let mut i = 0;
                visit_exponents(*n, *degree, |e| {
                    let mut v = 1.0;
                    for (j, &ej) in e.iter().enumerate() {
                        v *= pows[j * stride + ej as usize];
                    }
                    out[i] = v;
                    i += 1;
                });
            }
            BasisSpec::RbfThinPlate { centers } => {
                for (i, c) in centers.rows().into_iter().enumerate() {
                    let r2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                    out[i] = if r2 > 0.0 { 0.5 * r2 * r2.ln() } else { 0.0 };
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dimension()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    /// Analytic gradient matrix: row i is ∇β_i(x).
    pub fn gradient(&self, x: &[f64]) -> Result<Array2<f64>> {
        self.check_dim(x)?;
        let n = self.input_dim();
        let nfun = self.dimension();
        let mut out = Array2::zeros((nfun, n));
        match self {
            BasisSpec::Monomial { n: nv, degree } => {
                let pows = power_table(x, *degree);
                let stride = degree + 1;
                let mut prefix = vec![1.0; nv + 1];
                let mut suffix = vec![1.0; nv + 1];
                let mut i = 0;
                visit_exponents(*nv, *degree, |e| {
                    // prefix[j] = Π_{k<j} x_k^{e_k}, suffix[j] = Π_{k>j}.
                    prefix[0] = 1.0;
                    for j in 0..*nv {
                        prefix[j + 1] = prefix[j] * pows[j * stride + e[j] as usize];
                    }
                    suffix[*nv] = 1.0;
                    for j in (0..*nv).rev() {
                        suffix[j] = suffix[j + 1] * pows[j * stride + e[j] as usize];
                    }
                    for (j, &ej) in e.iter().enumerate() {
                        if ej > 0 {
                            out[[i, j]] = ej as f64
                                * pows[j * stride + (ej - 1) as usize]
                                * prefix[j]
                                * suffix[j + 1];
                        }
                    }
                    i += 1;
                });
            }
            BasisSpec::RbfThinPlate { centers } => {
                for (i, c) in centers.rows().into_iter().enumerate() {
                    let r2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                    if r2 > 0.0 {
                        let w = r2.ln() + 1.0;
                        for j in 0..n {
                            out[[i, j]] = w * (x[j] - c[j]);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// z = ∫ β dλ with λ the uniform probability measure on the set.
    ///
    /// Analytic quadrature is available for the monomial basis on a box (or
    /// a transformed box whose matrix is the identity); everything else uses
    /// seeded Monte Carlo.
    pub fn integrate(&self, set: &ConstraintSet, quadrature: &Quadrature) -> Result<Array1<f64>> {
        if set.dim() != self.input_dim() {
            return Err(Error::input("set dimension does not match basis"));
        }
        match quadrature {
            Quadrature::Analytic => self.integrate_analytic(set),
            Quadrature::MonteCarlo { samples, seed } => {
                if *samples == 0 {
                    return Err(Error::input("Monte Carlo sample count must be positive"));
                }
                Ok(self.integrate_monte_carlo(set, *samples, *seed))
            }
        }
    }

    fn integrate_analytic(&self, set: &ConstraintSet) -> Result<Array1<f64>> {
        let (lower, upper) = match set {
            ConstraintSet::Box { lower, upper } => (lower, upper),
            ConstraintSet::TransformedBox { q, lower, upper } if is_identity(q) => (lower, upper),
            _ => {
                return Err(Error::config(
                    "analytic quadrature supports only the monomial basis on an axis-aligned box; use Monte Carlo",
                ))
            }
        };
        let (n, degree) = match self {
            BasisSpec::Monomial { n, degree } => (*n, *degree),
            _ => {
                return Err(Error::config(
                    "analytic quadrature supports only the monomial basis on an axis-aligned box; use Monte Carlo",
                ))
            }
        };
        // ∫ x^e dλ factorizes into per-axis normalized moments.
        let mut moments = vec![0.0; n * (degree + 1)];
        for j in 0..n {
            let (l, u) = (lower[j], upper[j]);
            for e in 0..=degree {
                let p = (e + 1) as f64;
                moments[j * (degree + 1) + e] = (u.powi(e as i32 + 1) - l.powi(e as i32 + 1)) / (p * (u - l));
            }
        }
        let mut z = Vec::with_capacity(self.dimension());
        visit_exponents(n, degree, |e| {
            let mut v = 1.0;
            for (j, &ej) in e.iter().enumerate() {
                v *= moments[j * (degree + 1) + ej as usize];
            }
            z.push(v);
        });
        Ok(Array1::from_vec(z))
    }

    fn integrate_monte_carlo(&self, set: &ConstraintSet, samples: usize, seed: u64) -> Array1<f64> {
        let nfun = self.dimension();
        let n = set.dim();
        let chunks = samples.div_ceil(CHUNK);
        // Partial sums are reduced in chunk order, so the result does not
        // depend on the thread count.
        let partials: Vec<Vec<f64>> = (0..chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = chunk_rng(seed, chunk as u64);
                let lo = chunk * CHUNK;
                let hi = (lo + CHUNK).min(samples);
                let mut acc = vec![0.0; nfun];
                let mut x = Vec::with_capacity(n);
                let mut row = vec![0.0; nfun];
                for _ in lo..hi {
                    x.clear();
                    set.sample_one(&mut rng, &mut x);
                    self.eval_into(&x, &mut row).expect("dimensions checked");
                    for (a, v) in acc.iter_mut().zip(&row) {
                        *a += v;
                    }
                }
                acc
            })
            .collect();
        let mut z = vec![0.0; nfun];
        for p in partials {
            for (a, v) in z.iter_mut().zip(&p) {
                *a += v;
            }
        }
        let inv = 1.0 / samples as f64;
        Array1::from_vec(z.into_iter().map(|v| v * inv).collect())
    }

    /// Rank test of the evaluation matrix rows β(z_i)ᵀ: unisolvent iff the
    /// numerical rank equals N (singular values above N·σ_max·1e-12).
    ///
    /// Singular values are obtained from the eigenvalues of the Gram matrix,
    /// so the condition estimate saturates around 1e8; it is reported as an
    /// estimate, not a certificate.
    pub fn unisolvency_check(&self, points: ArrayView2<f64>) -> Result<UnisolvencyReport> {
        if points.nrows() == 0 {
            return Err(Error::input("unisolvency check requires at least one point"));
        }
        if points.ncols() != self.input_dim() {
            return Err(Error::input("point dimension does not match basis"));
        }
        let nfun = self.dimension();
        if points.nrows() < nfun {
            return Ok(UnisolvencyReport { unisolvent: false, condition_estimate: f64::INFINITY });
        }

        let mut gram = vec![0.0; nfun * nfun];
        let mut row = vec![0.0; nfun];
        for p in points.rows() {
            self.eval_into(p.to_slice().expect("contiguous row"), &mut row)?;
            for i in 0..nfun {
                let w = row[i];
                if w != 0.0 {
                    for j in i..nfun {
                        gram[i * nfun + j] += w * row[j];
                    }
                }
            }
        }
        for i in 0..nfun {
            for j in 0..i {
                gram[i * nfun + j] = gram[j * nfun + i];
            }
        }
        let eigs = DMatrix::from_row_slice(nfun, nfun, &gram).symmetric_eigenvalues();
        let sigmas: Vec<f64> = eigs.iter().map(|l| l.max(0.0).sqrt()).collect();
        let smax = sigmas.iter().cloned().fold(0.0, f64::max);
        if smax == 0.0 {
            return Ok(UnisolvencyReport { unisolvent: false, condition_estimate: f64::INFINITY });
        }
        let threshold = nfun as f64 * smax * 1e-12;
        let rank = sigmas.iter().filter(|s| **s > threshold).count();
        let smin = sigmas.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(UnisolvencyReport {
            unisolvent: rank == nfun,
            condition_estimate: if smin > 0.0 { smax / smin } else { f64::INFINITY },
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnisolvencyReport {
    pub unisolvent: bool,
    pub condition_estimate: f64,
}

/// Quadrature rule for the objective vector z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum Quadrature {
    Analytic,
    MonteCarlo {
        #[serde(default = "default_mc_samples")]
        samples: usize,
        seed: u64,
    },
}

pub fn default_mc_samples() -> usize {
    1_000_000
}

/// Uniform centers over the set, resampling any candidate closer than
/// [`CENTER_SEPARATION`] to an accepted one. Follows the same chunked stream
/// as [`ConstraintSet::sample_uniform`], so with no rejections the output
/// equals a plain uniform sample.
pub fn generate_rbf_centers(set: &ConstraintSet, count: usize, seed: u64) -> Result<Array2<f64>> {
    if count == 0 {
        return Err(Error::input("center count must be positive"));
    }
    let n = set.dim();
    let mut kept: Vec<f64> = Vec::with_capacity(count * n);
    let mut accepted = 0usize;
    let mut chunk = 0u64;
    let mut candidate = Vec::with_capacity(n);
    while accepted < count {
        let mut rng = chunk_rng(seed, chunk);
        for _ in 0..CHUNK {
            if accepted == count {
                break;
            }
            candidate.clear();
            set.sample_one(&mut rng, &mut candidate);
            let clash = kept
                .chunks_exact(n)
                .any(|c| euclidean(c, &candidate) <= CENTER_SEPARATION);
            if !clash {
                kept.extend_from_slice(&candidate);
                accepted += 1;
            }
        }
        chunk += 1;
        if chunk > 1_000_000 {
            return Err(Error::numerical("center resampling failed to make progress"));
        }
    }
    Ok(Array2::from_shape_vec((count, n), kept).expect("center shape"))
}

/// Binomial coefficient, exact for every size this crate constructs.
fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

fn power_table(x: &[f64], degree: usize) -> Vec<f64> {
    let stride = degree + 1;
    let mut pows = vec![1.0; x.len() * stride];
    for (j, xi) in x.iter().enumerate() {
        for e in 1..=degree {
            pows[j * stride + e] = pows[j * stride + e - 1] * xi;
        }
    }
    pows
}

/// Visits all exponent tuples with total degree ≤ `degree` in the graded
/// ordering: degree ascending, lexicographically descending within a degree.
pub fn visit_exponents(n: usize, degree: usize, mut f: impl FnMut(&[u32])) {
    let mut e = vec![0u32; n];
    for g in 0..=degree {
        e.fill(0);
        e[0] = g as u32;
        if n == 1 {
            f(&e);
            continue;
        }
        loop {
            f(&e);
            // Move one unit of degree rightward from the last movable slot.
            let pivot = match (0..n - 1).rev().find(|&j| e[j] > 0) {
                Some(p) => p,
                None => break,
            };
            let tail: u32 = e[pivot + 1..].iter().sum();
            e[pivot] -= 1;
            e[pivot + 1..].fill(0);
            e[pivot + 1] = tail + 1;
        }
    }
}

fn is_identity(q: &Array2<f64>) -> bool {
    q.indexed_iter()
        .all(|((i, j), v)| (v - if i == j { 1.0 } else { 0.0 }).abs() <= 1e-15)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum BasisDto {
    Monomial { n: usize, degree: usize },
    RbfThinPlate { centers: Vec<Vec<f64>> },
}

impl TryFrom<BasisDto> for BasisSpec {
    type Error = Error;

    fn try_from(dto: BasisDto) -> Result<Self> {
        match dto {
            BasisDto::Monomial { n, degree } => BasisSpec::monomial(n, degree),
            BasisDto::RbfThinPlate { centers } => {
                let rows = centers.len();
                let cols = centers.first().map_or(0, Vec::len);
                if centers.iter().any(|r| r.len() != cols) {
                    return Err(Error::input("RBF center rows must have equal length"));
                }
                let flat: Vec<f64> = centers.into_iter().flatten().collect();
                BasisSpec::rbf_thin_plate(
                    Array2::from_shape_vec((rows, cols), flat).expect("center shape"),
                )
            }
        }
    }
}

impl From<BasisSpec> for BasisDto {
    fn from(spec: BasisSpec) -> Self {
        match spec {
            BasisSpec::Monomial { n, degree } => BasisDto::Monomial { n, degree },
            BasisSpec::RbfThinPlate { centers } => BasisDto::RbfThinPlate {
                centers: centers.rows().into_iter().map(|r| r.to_vec()).collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn dimensions_match_binomials() {
        assert_eq!(BasisSpec::monomial(2, 10).unwrap().dimension(), 66);
        assert_eq!(BasisSpec::monomial(2, 14).unwrap().dimension(), 120);
        assert_eq!(BasisSpec::monomial(2, 18).unwrap().dimension(), 190);
        assert_eq!(BasisSpec::monomial(1, 0).unwrap().dimension(), 1);
    }

    #[test]
    fn monomial_ordering() {
        let b = BasisSpec::monomial(2, 1).unwrap();
        assert_eq!(b.eval(&[3.0, 5.0]).unwrap(), vec![1.0, 3.0, 5.0]);
        let b2 = BasisSpec::monomial(2, 2).unwrap();
        // 1, x1, x2, x1², x1x2, x2² at (2,3).
        assert_eq!(b2.eval(&[2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]);
    }

    #[test]
    fn exponent_enumeration_small_case() {
        let mut got = Vec::new();
        visit_exponents(3, 2, |e| got.push(e.to_vec()));
        assert_eq!(
            got,
            vec![
                vec![0, 0, 0],
                vec![1, 0, 0],
                vec![0, 1, 0],
                vec![0, 0, 1],
                vec![2, 0, 0],
                vec![1, 1, 0],
                vec![1, 0, 1],
                vec![0, 2, 0],
                vec![0, 1, 1],
                vec![0, 0, 2],
            ]
        );
    }

    #[test]
    fn exponent_enumeration_counts() {
        for n in 1..=4 {
            for d in 0..=6 {
                let mut count = 0;
                visit_exponents(n, d, |_| count += 1);
                assert_eq!(count, BasisSpec::monomial(n, d).unwrap().dimension(), "n={n} d={d}");
            }
        }
    }

    #[test]
    fn exponent_enumeration_golden_digest() {
        // Frozen digest of the exponent lists for n ≤ 4, d ≤ 6; guards the
        // serialized-coefficient ordering across runs and platforms.
        use sha2::{Digest, Sha256};
        let mut text = String::new();
        for n in 1..=4usize {
            for d in 0..=6usize {
                text.push_str(&format!("n{n}d{d}:"));
                visit_exponents(n, d, |e| {
                    let parts: Vec<String> = e.iter().map(u32::to_string).collect();
                    text.push_str(&parts.join(","));
                    text.push(';');
                });
                text.push('\n');
            }
        }
        let digest: String = Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(digest, "GOLDEN_DIGEST_PLACEHOLDER");
    }

    #[test]
    fn thin_plate_values() {
        let b = BasisSpec::rbf_thin_plate(array![[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let at_center = b.eval(&[0.0, 0.0]).unwrap();
        assert_eq!(at_center[0], 0.0, "value at own center is the r²log r limit");
        let e = std::f64::consts::E;
        let v = b.eval(&[e, 0.0]).unwrap();
        assert_abs_diff_eq!(v[0], e * e, epsilon = 1e-12);
    }

    #[test]
    fn thin_plate_continuity_at_center() {
        let b = BasisSpec::rbf_thin_plate(array![[0.3, -0.4]]).unwrap();
        let delta = 1e-6;
        let v = b.eval(&[0.3 + delta, -0.4]).unwrap()[0];
        assert!(v.abs() <= 2.0 * delta * delta * delta.ln().abs());
    }

    #[test]
    fn gradient_hand_cases() {
        let b = BasisSpec::monomial(2, 2).unwrap();
        let g = b.gradient(&[3.0, 7.0]).unwrap();
        // Constant row is zero.
        assert_eq!(g[[0, 0]], 0.0);
        assert_eq!(g[[0, 1]], 0.0);
        // x1² row: ∂/∂x1 = 2·3 = 6, ∂/∂x2 = 0.
        assert_eq!(g[[3, 0]], 6.0);
        assert_eq!(g[[3, 1]], 0.0);
    }

    #[test]
    fn gradients_match_central_differences() {
        let tps_centers = ConstraintSet::cube(2, 1.0).sample_uniform(12, 3);
        let bases = [
            BasisSpec::monomial(2, 4).unwrap(),
            BasisSpec::rbf_thin_plate(tps_centers).unwrap(),
        ];
        let probes = ConstraintSet::cube(2, 1.0).sample_uniform(100, 5);
        let h = 1e-6;
        for b in &bases {
            let mut worst = 0.0f64;
            for row in probes.rows() {
                let x = row.to_slice().unwrap();
                let g = b.gradient(x).unwrap();
                for j in 0..2 {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[j] += h;
                    xm[j] -= h;
                    let fp = b.eval(&xp).unwrap();
                    let fm = b.eval(&xm).unwrap();
                    for i in 0..b.dimension() {
                        let fd = (fp[i] - fm[i]) / (2.0 * h);
                        worst = worst.max((fd - g[[i, j]]).abs());
                    }
                }
            }
            assert!(worst <= 1e-5, "max gradient error {worst} for {b:?}");
        }
    }

    #[test]
    fn analytic_moments_on_symmetric_box() {
        let b = BasisSpec::monomial(2, 2).unwrap();
        let set = ConstraintSet::cube(2, 1.0);
        let z = b.integrate(&set, &Quadrature::Analytic).unwrap();
        let expect = [1.0, 0.0, 0.0, 1.0 / 3.0, 0.0, 1.0 / 3.0];
        for (a, e) in z.iter().zip(expect) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-14);
        }
    }

    #[test]
    fn analytic_moments_on_shifted_box() {
        let b = BasisSpec::monomial(2, 1).unwrap();
        let set = ConstraintSet::box_set(vec![0.0, 1.0], vec![2.0, 3.0]).unwrap();
        let z = b.integrate(&set, &Quadrature::Analytic).unwrap();
        assert_abs_diff_eq!(z[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(z[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(z[2], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn analytic_unsupported_pairs_are_config_errors() {
        let b = BasisSpec::monomial(2, 2).unwrap();
        assert!(matches!(
            b.integrate(&ConstraintSet::unit_ball(2), &Quadrature::Analytic),
            Err(Error::Config(_))
        ));
        let rbf = BasisSpec::rbf_thin_plate(array![[0.0, 0.0]]).unwrap();
        assert!(matches!(
            rbf.integrate(&ConstraintSet::cube(2, 1.0), &Quadrature::Analytic),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn monte_carlo_matches_analytic_moments() {
        let b = BasisSpec::monomial(2, 3).unwrap();
        let set = ConstraintSet::cube(2, 1.0);
        let exact = b.integrate(&set, &Quadrature::Analytic).unwrap();
        let mc = b
            .integrate(&set, &Quadrature::MonteCarlo { samples: 1_000_000, seed: 11 })
            .unwrap();
        let worst = exact
            .iter()
            .zip(mc.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 5e-3, "‖Δ‖∞ = {worst}");
    }

    #[test]
    fn constant_element_integrates_to_one_everywhere() {
        let b = BasisSpec::monomial(2, 0).unwrap();
        for set in [ConstraintSet::unit_ball(2), ConstraintSet::cube(2, 1.0)] {
            let z = b
                .integrate(&set, &Quadrature::MonteCarlo { samples: 10_000, seed: 2 })
                .unwrap();
            assert_eq!(z[0], 1.0, "λ is a probability measure on {set:?}");
        }
    }

    #[test]
    fn unisolvency_vandermonde_cases() {
        let b = BasisSpec::monomial(1, 1).unwrap();
        let good = Array2::from_shape_vec((2, 1), vec![0.0, 1.0]).unwrap();
        let rep = b.unisolvency_check(good.view()).unwrap();
        assert!(rep.unisolvent);
        assert!(rep.condition_estimate.is_finite());

        let repeated = Array2::from_shape_vec((2, 1), vec![0.5, 0.5]).unwrap();
        assert!(!b.unisolvency_check(repeated.view()).unwrap().unisolvent);
    }

    #[test]
    fn too_few_points_are_not_unisolvent() {
        let b = BasisSpec::monomial(2, 2).unwrap();
        let pts = ConstraintSet::cube(2, 1.0).sample_uniform(b.dimension() - 1, 7);
        let rep = b.unisolvency_check(pts.view()).unwrap();
        assert!(!rep.unisolvent);
    }

    #[test]
    fn random_points_are_unisolvent_for_polynomials() {
        let b = BasisSpec::monomial(2, 4).unwrap();
        let pts = ConstraintSet::cube(2, 1.0).sample_uniform(2 * b.dimension(), 9);
        assert!(b.unisolvency_check(pts.view()).unwrap().unisolvent);
    }

    #[test]
    fn centers_are_deterministic_distinct_and_inside() {
        let set = ConstraintSet::unit_ball(2);
        let a = generate_rbf_centers(&set, 50, 21).unwrap();
        let b = generate_rbf_centers(&set, 50, 21).unwrap();
        assert_eq!(a, b);
        for r in a.rows() {
            assert!(set.contains(r.to_slice().unwrap()).unwrap());
        }
        assert!(BasisSpec::rbf_thin_plate(a).is_ok(), "separation holds");
    }

    #[test]
    fn serde_schema_round_trip() {
        let m = BasisSpec::monomial(2, 10).unwrap();
        let j = serde_json::to_string(&m).unwrap();
        assert!(j.contains("\"kind\":\"monomial\""), "{j}");
        assert_eq!(serde_json::from_str::<BasisSpec>(&j).unwrap(), m);

        let r = BasisSpec::rbf_thin_plate(array![[0.25, -0.5], [0.0, 0.125]]).unwrap();
        let j = serde_json::to_string(&r).unwrap();
        let back: BasisSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, r);

        // Coincident centers are rejected at parse time.
        let bad = r#"{"kind":"rbf_thin_plate","centers":[[0.0,0.0],[0.0,0.0]]}"#;
        assert!(serde_json::from_str::<BasisSpec>(bad).is_err());
    }
}
