//! Geometry of complex projective space CP^{n−1}: points modulo phase,
//! pivot charts, the Fubini–Study metric, holomorphic gradients and the
//! symplectic pairing.
//!
//! Conventions. A point is a unit vector x ∈ C^n modulo a unit scalar. The
//! chart at pivot k divides out the k-th component, giving inhomogeneous
//! coordinates z ∈ C^{n−1} with |z_j| ≤ 1 when k is the largest-modulus
//! slot. With N = 1 + |z|² the metric is
//!   g_{ij̄} = (N δ_{ij} − z̄_i z_j) / N²,     g⁻¹ = N (Id + z̄ zᵀ),
//! and the holomorphic gradient of an expectation function pairs with ∂f so
//! that ∂f_A(grad f_B) = f_{AB} − f_A f_B pointwise. The fundamental form is
//!   ω(u, v) = 2 Im(u† M v),   M = conj(g),
//! which makes ω(X_f, u) = df(u) hold for X_f = −i·grad f.

use crate::error::{Error, Result};
use crate::linalg::{cr, CMat, CVec};
use nalgebra::DVector;
use num_complex::Complex64 as C64;

/// A point of CP^{n−1}, stored as a unit representative.
#[derive(Debug, Clone)]
pub struct ProjectivePoint {
    rep: CVec,
}

impl ProjectivePoint {
    /// Normalizes the representative; rejects (near-)zero vectors.
    pub fn new(v: CVec) -> Result<Self> {
        let nrm = v.norm();
        if nrm < 1e-12 {
            return Err(Error::InvalidPoint(
                "zero vector does not define a projective point".into(),
            ));
        }
        Ok(Self { rep: v / cr(nrm) })
    }

    pub fn from_components(c: &[C64]) -> Result<Self> {
        Self::new(CVec::from_column_slice(c))
    }

    pub fn dim(&self) -> usize {
        self.rep.len()
    }

    pub fn representative(&self) -> &CVec {
        &self.rep
    }

    /// Equality modulo phase: |⟨x|y⟩| = 1 within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim() == other.dim() && (1.0 - self.rep.dotc(&other.rep).norm()).abs() <= tol
    }
}

/// Fubini–Study distance arccos|⟨x|y⟩|.
pub fn fs_distance(p: &ProjectivePoint, q: &ProjectivePoint) -> f64 {
    let ov = p.rep.dotc(&q.rep).norm().clamp(0.0, 1.0);
    ov.acos()
}

/// Inhomogeneous coordinates at a pivot slot.
#[derive(Debug, Clone)]
pub struct ChartPoint {
    pub pivot: usize,
    pub z: CVec,
}

impl ChartPoint {
    pub fn dim(&self) -> usize {
        self.z.len() + 1
    }

    /// Slot index in C^n of chart coordinate `j`.
    pub fn slot(&self, j: usize) -> usize {
        if j < self.pivot {
            j
        } else {
            j + 1
        }
    }

    /// Homogeneous lift: 1 at the pivot, z elsewhere (not normalized).
    pub fn lift(&self) -> CVec {
        let n = self.dim();
        let mut v = CVec::zeros(n);
        v[self.pivot] = C64::new(1.0, 0.0);
        for j in 0..self.z.len() {
            v[self.slot(j)] = self.z[j];
        }
        v
    }

    pub fn to_point(&self) -> ProjectivePoint {
        ProjectivePoint::new(self.lift()).expect("lift is nonzero by construction")
    }
}

/// Chart at the largest-modulus component (lowest index on ties).
pub fn to_chart(p: &ProjectivePoint) -> ChartPoint {
    let x = &p.rep;
    let mut pivot = 0;
    let mut best = 0.0f64;
    for (i, xi) in x.iter().enumerate() {
        let m = xi.norm();
        if m > best {
            best = m;
            pivot = i;
        }
    }
    let n = x.len();
    let mut z = CVec::zeros(n - 1);
    let mut j = 0;
    for i in 0..n {
        if i != pivot {
            z[j] = x[i] / x[pivot];
            j += 1;
        }
    }
    ChartPoint { pivot, z }
}

/// Fubini–Study metric components and their inverse at a chart point.
#[derive(Debug, Clone)]
pub struct MetricAtPoint {
    pub g: CMat,
    pub g_inv: CMat,
}

/// g_{ij̄} = (N δ_{ij} − z̄_i z_j)/N² with N = 1 + |z|²; inverse N(Id + z̄ zᵀ).
pub fn fubini_study(c: &ChartPoint) -> MetricAtPoint {
    let m = c.z.len();
    let nfac = 1.0 + c.z.norm_squared();
    let mut g = CMat::zeros(m, m);
    let mut g_inv = CMat::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let zz = c.z[i].conj() * c.z[j];
            let diag = if i == j { cr(nfac) } else { C64::new(0.0, 0.0) };
            g[(i, j)] = (diag - zz) / cr(nfac * nfac);
            g_inv[(i, j)] = cr(nfac) * (if i == j { cr(1.0) } else { C64::new(0.0, 0.0) } + zz);
        }
    }
    MetricAtPoint { g, g_inv }
}

fn check_dim(a: &CMat, c: &ChartPoint) -> Result<()> {
    if a.nrows() != c.dim() || a.ncols() != c.dim() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}×{} but chart point has ambient dimension {}",
            a.nrows(),
            a.ncols(),
            c.dim()
        )));
    }
    Ok(())
}

/// Holomorphic partials ∂_i f_A at a chart point (exact rational formula).
pub fn d_vector(a: &CMat, c: &ChartPoint) -> Result<CVec> {
    check_dim(a, c)?;
    let zeta = c.lift();
    let nfac = cr(zeta.norm_squared());
    let f = zeta.dotc(&(a * &zeta)) / nfac;
    let adag_zeta = a.adjoint() * &zeta; // ⟨ζ|A e_s⟩ = conj((A†ζ)_s)
    let m = c.z.len();
    let mut out = CVec::zeros(m);
    for j in 0..m {
        let s = c.slot(j);
        out[j] = (adag_zeta[s].conj() - f * c.z[j].conj()) / nfac;
    }
    Ok(out)
}

/// Anti-holomorphic partials ∂̄_j f_A at a chart point.
pub fn dbar_vector(a: &CMat, c: &ChartPoint) -> Result<CVec> {
    check_dim(a, c)?;
    let zeta = c.lift();
    let nfac = cr(zeta.norm_squared());
    let az = a * &zeta;
    let f = zeta.dotc(&az) / nfac;
    let m = c.z.len();
    let mut out = CVec::zeros(m);
    for j in 0..m {
        let s = c.slot(j);
        out[j] = (az[s] - f * c.z[j]) / nfac;
    }
    Ok(out)
}

/// Holomorphic gradient (grad f_A)^i = Σ_j (g⁻¹)ᵀ_{ij} ∂̄_j f_A.
pub fn holomorphic_gradient(a: &CMat, c: &ChartPoint) -> Result<CVec> {
    let met = fubini_study(c);
    let dbar = dbar_vector(a, c)?;
    Ok(met.g_inv.transpose() * dbar)
}

/// Derivative pairing ∂f_A(grad f_B); equals f_{AB} − f_A·f_B pointwise.
pub fn derivative_pairing(a: &CMat, b: &CMat, c: &ChartPoint) -> Result<C64> {
    let d = d_vector(a, c)?;
    let grad = holomorphic_gradient(b, c)?;
    Ok(d.dot(&grad))
}

/// A tangent vector in realified chart coordinates: `[Re z·, Im z·]`.
pub type Tangent = DVector<f64>;

/// Complexify `[Re, Im]`-stacked realified coordinates.
pub fn complexify(u: &Tangent) -> CVec {
    let m = u.len() / 2;
    CVec::from_fn(m, |i, _| C64::new(u[i], u[m + i]))
}

/// Fundamental form ω(u, v) = 2 Im(u† M v) with M = conj(g).
pub fn symplectic_pairing(u: &Tangent, v: &Tangent, c: &ChartPoint) -> Result<f64> {
    let m = c.z.len();
    if u.len() != 2 * m || v.len() != 2 * m {
        return Err(Error::DimensionMismatch(format!(
            "tangent vectors must have {} real components",
            2 * m
        )));
    }
    let met = fubini_study(c);
    let uc = complexify(u);
    let vc = complexify(v);
    // u† conj(g) v = conj(Σ g_{ij} ū←… ) written out entrywise
    let mut s = C64::new(0.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            s += uc[i].conj() * met.g[(i, j)].conj() * vc[j];
        }
    }
    Ok(2.0 * s.im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, cr, I, ONE};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pauli_x() -> CMat {
        CMat::from_row_slice(2, 2, &[linalg::ZERO, ONE, ONE, linalg::ZERO])
    }

    fn pauli_z() -> CMat {
        CMat::from_row_slice(2, 2, &[ONE, linalg::ZERO, linalg::ZERO, -ONE])
    }


    #[test]
    fn chart_of_basis_vectors() {
        let p = ProjectivePoint::from_components(&[ONE, linalg::ZERO]).unwrap();
        let c = to_chart(&p);
        assert_eq!(c.pivot, 0);
        assert!(c.z[0].norm() < 1e-15);

        let q = ProjectivePoint::from_components(&[linalg::ZERO, ONE]).unwrap();
        let c = to_chart(&q);
        assert_eq!(c.pivot, 1);
        assert!(c.z[0].norm() < 1e-15);
    }

    #[test]
    fn chart_tie_breaks_to_lowest_index() {
        let s = cr(std::f64::consts::FRAC_1_SQRT_2);
        let p = ProjectivePoint::from_components(&[s, s]).unwrap();
        let c = to_chart(&p);
        assert_eq!(c.pivot, 0);
        assert!((c.z[0] - ONE).norm() < 1e-12);
    }

    #[test]
    fn zero_vector_rejected() {
        assert!(ProjectivePoint::from_components(&[linalg::ZERO, linalg::ZERO]).is_err());
    }

    #[test]
    fn chart_round_trip_many_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 3, 5] {
            for _ in 0..1000 {
                let p = ProjectivePoint::new(linalg::random_unit_vector(&mut rng, n)).unwrap();
                let c = to_chart(&p);
                for j in 0..c.z.len() {
                    assert!(c.z[j].norm() <= 1.0 + 1e-12);
                }
                let back = c.to_point();
                assert!(p.approx_eq(&back, 1e-10));
                // same pivot again
                let c2 = to_chart(&back);
                assert_eq!(c.pivot, c2.pivot);
                assert!((&c.z - &c2.z).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn metric_values_at_known_points() {
        // origin of the chart
        let c = ChartPoint {
            pivot: 0,
            z: CVec::from_column_slice(&[linalg::ZERO]),
        };
        let m = fubini_study(&c);
        assert!((m.g[(0, 0)] - ONE).norm() < 1e-15);

        // z = 1: g = 1/4, frozen from the closed form (N=2, (2−1)/4)
        let c = ChartPoint {
            pivot: 0,
            z: CVec::from_column_slice(&[ONE]),
        };
        let m = fubini_study(&c);
        assert!((m.g[(0, 0)] - cr(0.25)).norm() < 1e-15);
    }

    #[test]
    fn metric_hermitian_posdef_and_inverse_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 3, 4] {
            for _ in 0..1000 {
                let p = ProjectivePoint::new(linalg::random_unit_vector(&mut rng, n)).unwrap();
                let c = to_chart(&p);
                let m = fubini_study(&c);
                assert!(linalg::is_hermitian(&m.g, 1e-12));
                let id = CMat::identity(n - 1, n - 1);
                assert!(linalg::max_abs(&(&m.g * &m.g_inv - id)) < 1e-9);
                // eigenvalues in (0, 1]
                let (vals, _) = linalg::hermitian_eigen(&m.g);
                for v in vals {
                    assert!(v > 0.0 && v <= 1.0 + 1e-12, "eigenvalue {v} out of (0,1]");
                }
            }
        }
    }

    #[test]
    fn gradient_of_constant_and_at_critical_point() {
        let c = ChartPoint {
            pivot: 0,
            z: CVec::from_column_slice(&[linalg::ZERO]),
        };
        let id = CMat::identity(2, 2);
        let g = holomorphic_gradient(&id, &c).unwrap();
        assert!(g.norm() < 1e-14);
        let g = holomorphic_gradient(&pauli_z(), &c).unwrap();
        assert!(g.norm() < 1e-14);
    }

    /// Finite-difference oracle for the gradient: central differences of the
    /// expectation function along real and imaginary chart axes, combined
    /// into ∂̄ and pushed through the metric inverse.
    fn fd_gradient(a: &CMat, c: &ChartPoint, h: f64) -> CVec {
        let eval_at = |z: &CVec| -> C64 {
            let cp = ChartPoint {
                pivot: c.pivot,
                z: z.clone(),
            };
            let p = cp.to_point();
            let x = p.representative();
            x.dotc(&(a * x))
        };
        let m = c.z.len();
        let mut dbar = CVec::zeros(m);
        for j in 0..m {
            let mut zp = c.z.clone();
            let mut zm = c.z.clone();
            zp[j] += cr(h);
            zm[j] -= cr(h);
            let dfdx = (eval_at(&zp) - eval_at(&zm)) / cr(2.0 * h);
            let mut zp = c.z.clone();
            let mut zm = c.z.clone();
            zp[j] += I * cr(h);
            zm[j] -= I * cr(h);
            let dfdy = (eval_at(&zp) - eval_at(&zm)) / cr(2.0 * h);
            dbar[j] = (dfdx + I * dfdy) * cr(0.5);
        }
        let met = fubini_study(c);
        met.g_inv.transpose() * dbar
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // σ_x at the chart origin, then random Hermitian matrices at random points
        let c = ChartPoint {
            pivot: 0,
            z: CVec::from_column_slice(&[linalg::ZERO]),
        };
        let g = holomorphic_gradient(&pauli_x(), &c).unwrap();
        let g_fd = fd_gradient(&pauli_x(), &c, 1e-5);
        assert!((g - g_fd).norm() < 1e-6);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2usize, 3] {
            for _ in 0..20 {
                let a = linalg::random_hermitian(&mut rng, n);
                let p = ProjectivePoint::new(linalg::random_unit_vector(&mut rng, n)).unwrap();
                let c = to_chart(&p);
                let g = holomorphic_gradient(&a, &c).unwrap();
                let g_fd = fd_gradient(&a, &c, 1e-5);
                assert!((g - g_fd).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn gradient_is_ascent_direction_and_vanishes_at_eigenvectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a = linalg::random_hermitian(&mut rng, 3);
            let p = ProjectivePoint::new(linalg::random_unit_vector(&mut rng, 3)).unwrap();
            let c = to_chart(&p);
            let d = d_vector(&a, &c).unwrap();
            let grad = holomorphic_gradient(&a, &c).unwrap();
            let pair = d.dot(&grad);
            assert!(pair.re > -1e-12, "ascent property violated: {pair}");

            let (_, vecs) = linalg::hermitian_eigen(&a);
            let ev = ProjectivePoint::new(vecs.column(0).into()).unwrap();
            let ce = to_chart(&ev);
            let ge = holomorphic_gradient(&a, &ce).unwrap();
            assert!(ge.norm() < 1e-8);
        }
    }

    #[test]
    fn symplectic_pairing_antisymmetric_and_origin_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let p = ProjectivePoint::new(linalg::random_unit_vector(&mut rng, 3)).unwrap();
            let c = to_chart(&p);
            let u = Tangent::from_fn(4, |_, _| rand::Rng::random::<f64>(&mut rng) - 0.5);
            let v = Tangent::from_fn(4, |_, _| rand::Rng::random::<f64>(&mut rng) - 0.5);
            let uu = symplectic_pairing(&u, &u, &c).unwrap();
            assert!(uu.abs() < 1e-12);
            let uv = symplectic_pairing(&u, &v, &c).unwrap();
            let vu = symplectic_pairing(&v, &u, &c).unwrap();
            assert!((uv + vu).abs() < 1e-12);
        }

        // at the origin of the n = 2 chart: ω(∂x, ∂y) = 2 with this
        // normalization (the value the star-product calibration pins down)
        let c = ChartPoint {
            pivot: 0,
            z: CVec::from_column_slice(&[linalg::ZERO]),
        };
        let ex = Tangent::from_column_slice(&[1.0, 0.0]);
        let ey = Tangent::from_column_slice(&[0.0, 1.0]);
        let w = symplectic_pairing(&ex, &ey, &c).unwrap();
        assert!((w - 2.0).abs() < 1e-12, "ω(∂x,∂y) = {w}");
    }

    #[test]
    fn fs_distance_basics() {
        let e0 = ProjectivePoint::from_components(&[ONE, linalg::ZERO]).unwrap();
        let e1 = ProjectivePoint::from_components(&[linalg::ZERO, ONE]).unwrap();
        assert!(fs_distance(&e0, &e0) < 1e-7);
        assert!((fs_distance(&e0, &e1) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_point(n: usize) -> impl Strategy<Value = ProjectivePoint> {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n).prop_filter_map(
                "nonzero vector",
                |parts| {
                    let v = CVec::from_fn(parts.len(), |i, _| C64::new(parts[i].0, parts[i].1));
                    ProjectivePoint::new(v).ok()
                },
            )
        }

        proptest! {
            #[test]
            fn chart_round_trip_is_identity(p in arb_point(4)) {
                let c = to_chart(&p);
                prop_assert!(p.approx_eq(&c.to_point(), 1e-10));
            }

            #[test]
            fn points_equal_modulo_phase(p in arb_point(3), phase in 0.0f64..6.28) {
                let rotated = ProjectivePoint::new(
                    p.representative() * (crate::linalg::I * cr(phase)).exp(),
                ).unwrap();
                prop_assert!(p.approx_eq(&rotated, 1e-12));
                prop_assert!(fs_distance(&p, &rotated) < 1e-6);
            }
        }
    }
}
