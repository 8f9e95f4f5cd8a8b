//! Generic numerical Lie-algebra machinery: structure constants with
//! closure residuals, Jacobi and derivation checkers, semidirect products
//! and generator-level isomorphism tests.
//!
//! Concrete algebras are lists of named square matrices under the
//! commutator; products and comparisons happen at the level of
//! structure-constant tables, which is all the downstream duality check
//! needs.

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, CVec};
use num_complex::Complex64 as C64;

/// A finite list of named operator generators; bracket = matrix commutator.
#[derive(Debug, Clone)]
pub struct LinearLieAlgebra {
    pub labels: Vec<String>,
    pub gens: Vec<CMat>,
}

impl LinearLieAlgebra {
    pub fn new(labels: Vec<String>, gens: Vec<CMat>) -> Result<Self> {
        if gens.is_empty() {
            return Err(Error::InvalidInput("empty generator list".into()));
        }
        if labels.len() != gens.len() {
            return Err(Error::InvalidInput("labels/generators length mismatch".into()));
        }
        let sz = gens[0].nrows();
        for g in &gens {
            if g.nrows() != sz || g.ncols() != sz {
                return Err(Error::DimensionMismatch(
                    "generators must be square matrices of equal size".into(),
                ));
            }
        }
        Ok(Self { labels, gens })
    }

    pub fn dim(&self) -> usize {
        self.gens.len()
    }

    /// Rank of span(generators ∪ pairwise brackets).
    pub fn closure_rank(&self) -> usize {
        let n = self.gens[0].nrows();
        let d = self.dim();
        let mut cols = Vec::with_capacity(d + d * d);
        for g in &self.gens {
            cols.push(linalg::vectorize(g));
        }
        for a in &self.gens {
            for b in &self.gens {
                cols.push(linalg::vectorize(&linalg::commutator(a, b)));
            }
        }
        let mut m = CMat::zeros(n * n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            m.set_column(j, c);
        }
        linalg::rank(&m, 1e-10)
    }
}

/// Max over generator triples of ‖[[a,b],c] + [[b,c],a] + [[c,a],b]‖,
/// a sanity gate (commutators satisfy this identically).
pub fn jacobi_check(l: &LinearLieAlgebra) -> f64 {
    let mut worst = 0.0f64;
    for a in &l.gens {
        for b in &l.gens {
            for c in &l.gens {
                let r = linalg::commutator(&linalg::commutator(a, b), c)
                    + linalg::commutator(&linalg::commutator(b, c), a)
                    + linalg::commutator(&linalg::commutator(c, a), b);
                worst = worst.max(linalg::max_abs(&r));
            }
        }
    }
    worst
}

/// Structure constants c^k_{ij} with [g_i, g_j] = Σ_k c^k_{ij} g_k, plus the
/// least-squares residual of each bracket against the generator span.
#[derive(Debug, Clone)]
pub struct StructureConstants {
    pub dim: usize,
    /// coeff[i][j] is the coefficient vector of [g_i, g_j].
    pub coeff: Vec<Vec<CVec>>,
    pub residuals: Vec<Vec<f64>>,
    pub closure_tolerance: f64,
}

impl StructureConstants {
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .iter()
            .flatten()
            .fold(0.0f64, |a, &b| a.max(b))
    }

    pub fn is_closed(&self) -> bool {
        self.max_residual() <= self.closure_tolerance
    }

    /// Max |c^k_{ij} + c^k_{ji}| over all entries.
    pub fn antisymmetry_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let s = &self.coeff[i][j] + &self.coeff[j][i];
                worst = worst.max(s.iter().map(|x| x.norm()).fold(0.0, f64::max));
            }
        }
        worst
    }

    /// Jacobi residual evaluated on the constants alone:
    /// Σ_m (c^m_{jk} c^l_{im} + c^m_{ki} c^l_{jm} + c^m_{ij} c^l_{km}).
    pub fn jacobi_residual(&self) -> f64 {
        let d = self.dim;
        let c = |k: usize, i: usize, j: usize| self.coeff[i][j][k];
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let mut s = C64::new(0.0, 0.0);
                        for m in 0..d {
                            s += c(m, j, k) * c(l, i, m)
                                + c(m, k, i) * c(l, j, m)
                                + c(m, i, j) * c(l, k, m);
                        }
                        worst = worst.max(s.norm());
                    }
                }
            }
        }
        worst
    }

    /// Sparse export: entries (i, j, k, re, im) with |c| above threshold.
    pub fn to_sparse(&self, threshold: f64) -> Vec<(usize, usize, usize, f64, f64)> {
        let mut out = Vec::new();
        for i in 0..self.dim {
            for j in 0..self.dim {
                for k in 0..self.dim {
                    let v = self.coeff[i][j][k];
                    if v.norm() > threshold {
                        out.push((i, j, k, v.re, v.im));
                    }
                }
            }
        }
        out
    }

    /// The sparse table as structured text: a list of
    /// `{"i":…,"j":…,"k":…,"re":…,"im":…}` entries.
    pub fn to_sparse_json(&self, threshold: f64) -> serde_json::Value {
        let entries: Vec<serde_json::Value> = self
            .to_sparse(threshold)
            .into_iter()
            .map(|(i, j, k, re, im)| {
                serde_json::json!({"i": i, "j": j, "k": k, "re": re, "im": im})
            })
            .collect();
        serde_json::Value::Array(entries)
    }
}

/// Least-squares expansion of every bracket in the generator basis.
///
/// Fails if the generators are numerically dependent (min singular value of
/// the Gram matrix below 1e−8), naming the offending combination.
pub fn structure_constants(l: &LinearLieAlgebra, closure_tol: f64) -> Result<StructureConstants> {
    let d = l.dim();
    let n = l.gens[0].nrows();
    let mut basis = CMat::zeros(n * n, d);
    for (j, g) in l.gens.iter().enumerate() {
        basis.set_column(j, &linalg::vectorize(g));
    }
    // independence via the Gram spectrum
    let gram = basis.adjoint() * &basis;
    let sv = gram.clone().svd(false, false).singular_values;
    let smin = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if smin <= 1e-8 {
        let null = linalg::nullspace(&basis, 1e-8);
        let combo = null
            .first()
            .map(|v| {
                v.iter()
                    .enumerate()
                    .filter(|(_, x)| x.norm() > 1e-6)
                    .map(|(i, x)| format!("{:+.3}·{}", x.re, l.labels[i]))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .unwrap_or_else(|| "unknown".into());
        return Err(Error::DependentGenerators(combo));
    }

    let svd = basis.clone().svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let expand = |m: &CMat| -> (CVec, f64) {
        let b = linalg::vectorize(m);
        let mut y = CVec::zeros(d);
        for j in 0..svd.singular_values.len() {
            let s = svd.singular_values[j];
            if s > 1e-13 {
                y[j] = u.column(j).dotc(&b) / cr(s);
            }
        }
        let x = vt.adjoint() * y;
        let resid = (&basis * &x - b).norm();
        (x, resid)
    };

    let mut coeff = vec![vec![CVec::zeros(d); d]; d];
    let mut residuals = vec![vec![0.0f64; d]; d];
    for i in 0..d {
        for j in 0..d {
            let br = linalg::commutator(&l.gens[i], &l.gens[j]);
            let (x, r) = expand(&br);
            coeff[i][j] = x;
            residuals[i][j] = r;
        }
    }
    Ok(StructureConstants {
        dim: d,
        coeff,
        residuals,
        closure_tolerance: closure_tol,
    })
}

/// Structure constants with truncation control: brackets are formed on the
/// full space, then everything is compressed by the isometry `q` (columns
/// orthonormal) before the least-squares expansion. Confines truncation
/// defects of discretized operators to the discarded modes.
pub fn structure_constants_projected(
    l: &LinearLieAlgebra,
    q: &CMat,
    closure_tol: f64,
) -> Result<StructureConstants> {
    let compress = |m: &CMat| q.adjoint() * m * q;
    let gens_c: Vec<CMat> = l.gens.iter().map(&compress).collect();
    let d = l.dim();
    let mc = gens_c[0].nrows();
    let mut basis = CMat::zeros(mc * mc, d);
    for (j, g) in gens_c.iter().enumerate() {
        basis.set_column(j, &linalg::vectorize(g));
    }
    let gram = basis.adjoint() * &basis;
    let sv = gram.clone().svd(false, false).singular_values;
    let smin = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if smin <= 1e-8 {
        return Err(Error::DependentGenerators(
            "projected generators are numerically dependent".into(),
        ));
    }
    let mut coeff = vec![vec![CVec::zeros(d); d]; d];
    let mut residuals = vec![vec![0.0f64; d]; d];
    for i in 0..d {
        for j in 0..d {
            let br = compress(&linalg::commutator(&l.gens[i], &l.gens[j]));
            let x = linalg::lstsq(&basis, &linalg::vectorize(&br));
            residuals[i][j] = (&basis * &x - linalg::vectorize(&br)).norm();
            coeff[i][j] = x;
        }
    }
    Ok(StructureConstants {
        dim: d,
        coeff,
        residuals,
        closure_tolerance: closure_tol,
    })
}

/// A derivative action of a second algebra on the span of a first: one
/// endomorphism per L2 generator, written in L1 generator coordinates.
#[derive(Debug, Clone)]
pub struct DerivativeAction {
    pub maps: Vec<CMat>,
}

impl DerivativeAction {
    pub fn new(maps: Vec<CMat>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidInput("empty derivative action".into()));
        }
        let d = maps[0].nrows();
        for m in &maps {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch(
                    "action matrices must be square of equal size".into(),
                ));
            }
        }
        Ok(Self { maps })
    }

    pub fn l1_dim(&self) -> usize {
        self.maps[0].nrows()
    }
}

fn combine(l: &LinearLieAlgebra, coeff: &CVec) -> CMat {
    let n = l.gens[0].nrows();
    let mut out = CMat::zeros(n, n);
    for (k, g) in l.gens.iter().enumerate() {
        out += g * coeff[k];
    }
    out
}

/// Max residual of δ_b([v,w]) − [δ_b v, w] − [v, δ_b w] over L2 generators
/// and L1 generator pairs.
pub fn derivation_check(delta: &DerivativeAction, l1: &LinearLieAlgebra) -> Result<f64> {
    if delta.l1_dim() != l1.dim() {
        return Err(Error::DimensionMismatch(
            "action dimension does not match the algebra".into(),
        ));
    }
    let sc = structure_constants(l1, 1e-7)?;
    let mut worst = 0.0f64;
    for dmap in &delta.maps {
        for i in 0..l1.dim() {
            for j in 0..l1.dim() {
                // δ([g_i, g_j]) through the coordinate expansion of the bracket
                let lhs = combine(l1, &(dmap * &sc.coeff[i][j]));
                let di = combine(l1, &dmap.column(i).into());
                let dj = combine(l1, &dmap.column(j).into());
                let rhs = linalg::commutator(&di, &l1.gens[j]) + linalg::commutator(&l1.gens[i], &dj);
                worst = worst.max(linalg::max_abs(&(lhs - rhs)));
            }
        }
    }
    Ok(worst)
}

/// Derivation law checked purely at the level of structure constants:
/// coefficients of δ([g_i, g_j]) against [δg_i, g_j] + [g_i, δg_j].
pub fn derivation_check_on_constants(delta: &DerivativeAction, sc: &StructureConstants) -> f64 {
    let d = sc.dim;
    let mut worst = 0.0f64;
    for dmap in &delta.maps {
        for i in 0..d {
            for j in 0..d {
                let lhs = dmap * &sc.coeff[i][j];
                let mut rhs = CVec::zeros(d);
                for k in 0..d {
                    rhs += &sc.coeff[k][j] * dmap[(k, i)];
                    rhs += &sc.coeff[i][k] * dmap[(k, j)];
                }
                worst = worst.max((lhs - rhs).norm());
            }
        }
    }
    worst
}

/// Max residual of δ_{[b,c]} − (δ_b δ_c − δ_c δ_b) using L2's constants.
pub fn representation_check(delta: &DerivativeAction, l2: &StructureConstants) -> f64 {
    let d2 = l2.dim;
    let d1 = delta.l1_dim();
    let mut worst = 0.0f64;
    for a in 0..d2 {
        for b in 0..d2 {
            let mut lhs = CMat::zeros(d1, d1);
            for k in 0..d2 {
                lhs += &delta.maps[k] * l2.coeff[a][b][k];
            }
            let rhs = linalg::commutator(&delta.maps[a], &delta.maps[b]);
            worst = worst.max(linalg::max_abs(&(lhs - rhs)));
        }
    }
    worst
}

/// A semidirect product, existing only through its structure constants on
/// the direct-sum basis (L1 generators first, then L2).
#[derive(Debug, Clone)]
pub struct SemidirectProduct {
    pub labels: Vec<String>,
    pub constants: StructureConstants,
}

/// Builds L1 ⋊_δ L2 from the two constant tables and the mixed bracket
/// [b, v] = δ_b v. Rejects δ failing the derivation or representation law.
pub fn semidirect_product(
    l1: &LinearLieAlgebra,
    l2: &LinearLieAlgebra,
    delta: &DerivativeAction,
) -> Result<SemidirectProduct> {
    let tol = 1e-9;
    let dres = derivation_check(delta, l1)?;
    if dres > tol {
        return Err(Error::IdentityFailed {
            name: "derivation law".into(),
            residual: dres,
            tolerance: tol,
        });
    }
    let c2 = structure_constants(l2, 1e-7)?;
    let rres = representation_check(delta, &c2);
    if rres > tol {
        return Err(Error::IdentityFailed {
            name: "representation law".into(),
            residual: rres,
            tolerance: tol,
        });
    }
    if delta.maps.len() != l2.dim() {
        return Err(Error::DimensionMismatch(
            "one action matrix per L2 generator required".into(),
        ));
    }
    let c1 = structure_constants(l1, 1e-7)?;
    let d1 = l1.dim();
    let d2 = l2.dim();
    let d = d1 + d2;
    let mut coeff = vec![vec![CVec::zeros(d); d]; d];
    let mut residuals = vec![vec![0.0f64; d]; d];
    let embed1 = |v: &CVec| {
        let mut out = CVec::zeros(d);
        for k in 0..d1 {
            out[k] = v[k];
        }
        out
    };
    let embed2 = |v: &CVec| {
        let mut out = CVec::zeros(d);
        for k in 0..d2 {
            out[d1 + k] = v[k];
        }
        out
    };
    for i in 0..d1 {
        for j in 0..d1 {
            coeff[i][j] = embed1(&c1.coeff[i][j]);
            residuals[i][j] = c1.residuals[i][j];
        }
    }
    for a in 0..d2 {
        for b in 0..d2 {
            coeff[d1 + a][d1 + b] = embed2(&c2.coeff[a][b]);
            residuals[d1 + a][d1 + b] = c2.residuals[a][b];
        }
    }
    for a in 0..d2 {
        for i in 0..d1 {
            let dv: CVec = delta.maps[a].column(i).into();
            coeff[d1 + a][i] = embed1(&dv);
            coeff[i][d1 + a] = embed1(&(-dv));
        }
    }
    let mut labels = l1.labels.clone();
    labels.extend(l2.labels.iter().cloned());
    let out = SemidirectProduct {
        labels,
        constants: StructureConstants {
            dim: d,
            coeff,
            residuals,
            closure_tolerance: c1.closure_tolerance.max(c2.closure_tolerance),
        },
    };
    let jac = out.constants.jacobi_residual();
    if jac > 1e-8 {
        return Err(Error::IdentityFailed {
            name: "Jacobi identity of the semidirect product".into(),
            residual: jac,
            tolerance: 1e-8,
        });
    }
    Ok(out)
}

/// Result of comparing two structure-constant tables under a pairing.
#[derive(Debug, Clone)]
pub struct IsoReport {
    pub max_deviation: f64,
    pub pass: bool,
}

/// Compares c-tensors under the index pairing `p` (basis i of the first
/// algebra ↔ basis p[i] of the second). Both tables must be closed.
pub fn isomorphism_check(
    c1: &StructureConstants,
    c2: &StructureConstants,
    pairing: &[usize],
) -> Result<IsoReport> {
    if c1.dim != c2.dim || pairing.len() != c1.dim {
        return Err(Error::DimensionMismatch(
            "isomorphism check requires equal generator counts".into(),
        ));
    }
    for table in [c1, c2] {
        if !table.is_closed() {
            return Err(Error::NotClosed {
                residual: table.max_residual(),
                tolerance: table.closure_tolerance,
            });
        }
    }
    let mut worst = 0.0f64;
    for i in 0..c1.dim {
        for j in 0..c1.dim {
            for k in 0..c1.dim {
                let a = c1.coeff[i][j][k];
                let b = c2.coeff[pairing[i]][pairing[j]][pairing[k]];
                worst = worst.max((a - b).norm());
            }
        }
    }
    Ok(IsoReport {
        max_deviation: worst,
        pass: worst < 1e-6,
    })
}
