//! Dense complex linear algebra helpers used throughout the crate.
//!
//! Everything is built on `nalgebra::DMatrix<Complex64>`. Matrices are small
//! (operator blocks are n²×n², line operators K×K with K ≤ 512), so dense
//! storage is the right trade-off.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Conjugate transpose.
pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Frobenius inner product ⟨A,B⟩ = tr(A†B).
pub fn frob_inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn frob_norm(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum absolute entry, a cheap residual measure.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && max_abs(&(m - dagger(m))) <= tol
}

/// Hilbert–Schmidt orthonormal basis of M_n: E_{ab}, row-major in (a, b).
pub fn hs_basis(n: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let mut e = CMat::zeros(n, n);
            e[(a, b)] = ONE;
            basis.push(e);
        }
    }
    basis
}

/// Hermitian HS-orthonormal basis of M_n: I/√n first, then the traceless
/// generalized Gell-Mann matrices (symmetric, antisymmetric, diagonal),
/// each normalized to unit Hilbert–Schmidt norm.
pub fn hermitian_basis(n: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(n * n);
    basis.push(CMat::identity(n, n) / cr((n as f64).sqrt()));
    let s = cr(std::f64::consts::FRAC_1_SQRT_2);
    for a in 0..n {
        for b in (a + 1)..n {
            let mut e = CMat::zeros(n, n);
            e[(a, b)] = s;
            e[(b, a)] = s;
            basis.push(e);
            let mut f = CMat::zeros(n, n);
            f[(a, b)] = -I * s;
            f[(b, a)] = I * s;
            basis.push(f);
        }
    }
    for d in 1..n {
        // diag(1,…,1,−d,0,…)/√(d(d+1)) with d ones
        let norm = cr(1.0 / ((d * (d + 1)) as f64).sqrt());
        let mut e = CMat::zeros(n, n);
        for j in 0..d {
            e[(j, j)] = norm;
        }
        e[(d, d)] = -cr(d as f64) * norm;
        basis.push(e);
    }
    basis
}

/// Flatten column-major into a vector (nalgebra storage order).
pub fn vectorize(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &CVec, rows: usize, cols: usize) -> CMat {
    CMat::from_column_slice(rows, cols, v.as_slice())
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let se = m.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..se.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let vals: Vec<f64> = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let n = m.nrows();
    let mut vecs = CMat::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        vecs.set_column(col, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// exp(i·t·H) for Hermitian H, via the eigendecomposition.
pub fn herm_phase_exp(h: &CMat, t: f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(h);
    let n = h.nrows();
    let mut d = CMat::zeros(n, n);
    for (j, &lam) in vals.iter().enumerate() {
        d[(j, j)] = (I * cr(t * lam)).exp();
    }
    &vecs * d * dagger(&vecs)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |acc, &s| acc.max(s))
}

/// Orthonormal basis for the null space of `m`, using the SVD with a
/// relative threshold.
pub fn nullspace(m: &CMat, rel_tol: f64) -> Vec<CVec> {
    let cols = m.ncols();
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("svd requested v_t");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let cutoff = rel_tol * smax.max(1.0);
    let mut out = Vec::new();
    for j in 0..cols {
        let s = if j < svd.singular_values.len() {
            svd.singular_values[j]
        } else {
            0.0
        };
        if s <= cutoff {
            out.push(vt.row(j).adjoint());
        }
    }
    out
}

/// Numerical rank with a relative singular-value threshold.
pub fn rank(m: &CMat, rel_tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |a, &s| a.max(s));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Rank of the span of a list of vectors by incremental Gram–Schmidt with
/// re-orthogonalization; avoids factoring one huge stacked matrix.
pub fn rank_of_span(cols: &[CVec], rel_tol: f64) -> usize {
    let mut basis: Vec<CVec> = Vec::new();
    let scale = cols
        .iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    for c in cols {
        if c.norm() <= rel_tol * scale {
            continue;
        }
        let mut v = c.clone();
        for _ in 0..2 {
            for q in &basis {
                let coeff = q.dotc(&v);
                v -= q * coeff;
            }
        }
        let nrm = v.norm();
        if nrm > rel_tol * scale {
            basis.push(v / cr(nrm));
        }
    }
    basis.len()
}

/// Minimum-norm least-squares solution of A x = b via the SVD.
pub fn lstsq(a: &CMat, b: &CVec) -> CVec {
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd requested u");
    let vt = svd.v_t.as_ref().expect("svd requested v_t");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let cutoff = 1e-13 * smax.max(1.0);
    let mut y = CVec::zeros(vt.nrows());
    for j in 0..svd.singular_values.len() {
        let s = svd.singular_values[j];
        if s > cutoff {
            let uj_b: C64 = u.column(j).dotc(b);
            y[j] = uj_b / cr(s);
        }
    }
    vt.adjoint() * y
}

/// Gram–Schmidt orthonormalization of the columns of `m`; drops columns whose
/// residual norm falls below `tol`.
pub fn orthonormal_columns(m: &CMat, tol: f64) -> CMat {
    let mut cols: Vec<CVec> = Vec::new();
    for j in 0..m.ncols() {
        let mut v: CVec = m.column(j).into();
        for _ in 0..2 {
            for q in &cols {
                let coeff = q.dotc(&v);
                v -= q * coeff;
            }
        }
        let nrm = v.norm();
        if nrm > tol {
            cols.push(v / cr(nrm));
        }
    }
    let n = m.nrows();
    let mut out = CMat::zeros(n, cols.len());
    for (j, col) in cols.iter().enumerate() {
        out.set_column(j, col);
    }
    out
}

/// One standard complex Gaussian sample (Box–Muller on two uniforms).
pub fn randn_c64<R: Rng>(rng: &mut R) -> C64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt();
    let th = 2.0 * std::f64::consts::PI * u2;
    // real and imaginary parts each N(0, 1/2) so that E|z|² = 1
    C64::new(r * th.cos(), r * th.sin()) * cr(std::f64::consts::FRAC_1_SQRT_2)
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| randn_c64(rng))
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let g = random_matrix(rng, n, n);
    (&g + dagger(&g)) * cr(0.5)
}

/// Random unit vector in C^n.
pub fn random_unit_vector<R: Rng>(rng: &mut R, n: usize) -> CVec {
    loop {
        let v = CVec::from_fn(n, |_, _| randn_c64(rng));
        let nrm = v.norm();
        if nrm > 1e-6 {
            return v / cr(nrm);
        }
    }
}

/// Kronecker product A ⊗ B.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}
