//! The function algebra of expectation values on CP^{n−1}: star product,
//! involution, C*-norm, Poisson brackets and commutants.
//!
//! Every operator A on C^n induces f_A([x]) = ⟨x|Ax⟩. The star product
//! (f⋆l)(x) = f(x)l(x) + ∂f(grad l) realizes the operator product:
//! f_A ⋆ f_B = f_{AB} pointwise, and f⋆l − l⋆f = √−1{f, l}. The matrix side
//! is the oracle; the chart-side evaluation is the thing under test.

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, CVec, I};
use crate::projective::{
    self, derivative_pairing, to_chart, ProjectivePoint,
};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

/// The function f_A([x]) = ⟨x|Ax⟩ on CP^{n−1}, carried by its matrix.
#[derive(Debug, Clone)]
pub struct ObservableFunction {
    pub a: CMat,
}

impl ObservableFunction {
    pub fn new(a: CMat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidInput("observable matrix must be square".into()));
        }
        Ok(Self { a })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            a: CMat::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

fn check_same_dim(f: &ObservableFunction, l: &ObservableFunction) -> Result<()> {
    if f.dim() != l.dim() {
        return Err(Error::DimensionMismatch(format!(
            "observables have dimensions {} and {}",
            f.dim(),
            l.dim()
        )));
    }
    Ok(())
}

/// ⟨x|Ax⟩ for the unit representative; independent of the phase of x.
pub fn evaluate(f: &ObservableFunction, p: &ProjectivePoint) -> Result<C64> {
    if f.dim() != p.dim() {
        return Err(Error::DimensionMismatch(format!(
            "observable dimension {} vs point dimension {}",
            f.dim(),
            p.dim()
        )));
    }
    let x = p.representative();
    Ok(x.dotc(&(&f.a * x)))
}

/// Chart-side star product (f⋆l)(p) = f(p)l(p) + ∂f(grad l).
pub fn star_product(
    f: &ObservableFunction,
    l: &ObservableFunction,
    p: &ProjectivePoint,
) -> Result<C64> {
    check_same_dim(f, l)?;
    let cal = calibration();
    let c = to_chart(p);
    let fp = evaluate(f, p)?;
    let lp = evaluate(l, p)?;
    let pairing = derivative_pairing(&f.a, &l.a, &c)?;
    Ok(fp * lp + cr(cal.scale) * pairing)
}

/// Matrix-side product f_{AB}: the oracle for `star_product` sampling.
pub fn star_matrix(f: &ObservableFunction, l: &ObservableFunction) -> Result<ObservableFunction> {
    check_same_dim(f, l)?;
    Ok(ObservableFunction {
        a: &f.a * &l.a,
    })
}

/// Involution f ↦ f_{A†}; pointwise the complex conjugate of f.
pub fn involution(f: &ObservableFunction) -> ObservableFunction {
    ObservableFunction {
        a: linalg::dagger(&f.a),
    }
}

/// Poisson bracket {f_A, f_B} = f_{−i[A,B]} (matrix-side closed form).
pub fn poisson_bracket(
    f: &ObservableFunction,
    l: &ObservableFunction,
) -> Result<ObservableFunction> {
    check_same_dim(f, l)?;
    Ok(ObservableFunction {
        a: linalg::commutator(&f.a, &l.a) * (-I),
    })
}

/// Geometric Poisson bracket ω(X_f, X_l) evaluated at one point, via the
/// realified Hamiltonian fields X = −i·grad. Agrees with the matrix-side
/// closed form; used as a cross-check of the symplectic pairing.
pub fn poisson_eval_geometric(
    f: &ObservableFunction,
    l: &ObservableFunction,
    p: &ProjectivePoint,
) -> Result<f64> {
    check_same_dim(f, l)?;
    let c = to_chart(p);
    let xf = projective::holomorphic_gradient(&f.a, &c)? * (-I);
    let xl = projective::holomorphic_gradient(&l.a, &c)? * (-I);
    let realify = |v: &CVec| {
        let m = v.len();
        nalgebra::DVector::<f64>::from_fn(2 * m, |i, _| {
            if i < m {
                v[i].re
            } else {
                v[i - m].im
            }
        })
    };
    let w = projective::symplectic_pairing(&realify(&xf), &realify(&xl), &c)?;
    Ok(w * calibration().scale)
}

/// Estimate of the C*-norm sup_x |(f̄⋆f)(x)|^{1/2}.
#[derive(Debug, Clone, Copy)]
pub struct CkahlerNorm {
    pub value: f64,
    /// Norm of the projected gradient at the reported maximizer; a
    /// first-order optimality measure.
    pub grad_residual: f64,
}

/// sup over CP^{n−1} of |(f̄⋆f)|^{1/2} by random restarts plus projected
/// gradient ascent on the unit sphere. Each ascent step maximizes exactly
/// along the geodesic through the projected gradient, with step halving as
/// the fallback when the quadratic model degenerates. Equals the operator
/// norm of A.
pub fn ckahler_norm(f: &ObservableFunction, samples: usize, refine_steps: usize) -> CkahlerNorm {
    let n = f.dim();
    let m = linalg::dagger(&f.a) * &f.a; // f̄⋆f = f_{A†A}
    if linalg::max_abs(&m) == 0.0 {
        return CkahlerNorm {
            value: 0.0,
            grad_residual: 0.0,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5fa1);
    let value_at = |x: &CVec| -> f64 { x.dotc(&(&m * x)).re };

    let mut starts: Vec<(f64, CVec)> = (0..samples.max(1))
        .map(|_| {
            let x = linalg::random_unit_vector(&mut rng, n);
            (value_at(&x), x)
        })
        .collect();
    starts.sort_by(|a, b| b.0.total_cmp(&a.0));
    starts.truncate(4.min(starts.len()));

    let mut best_val = f64::NEG_INFINITY;
    let mut best_grad = f64::INFINITY;
    for (_, mut x) in starts {
        let mut step = 0.5;
        let mut grad_residual = f64::INFINITY;
        for _ in 0..refine_steps {
            let mx = &m * &x;
            let fx = x.dotc(&mx).re;
            let r = &mx - &x * cr(fx); // projected gradient (up to factor 2)
            grad_residual = r.norm();
            if grad_residual < 1e-14 {
                break;
            }
            let u = &r / cr(grad_residual);
            // exact maximization of the quadratic form on the great circle
            // x(θ) = cosθ·x + sinθ·u
            let b = u.dotc(&mx).re;
            let c = u.dotc(&(&m * &u)).re;
            let theta = 0.5 * (2.0 * b).atan2(fx - c);
            let theta = if theta <= 0.0 {
                theta + std::f64::consts::FRAC_PI_2
            } else {
                theta
            };
            let mut trial = &x * cr(theta.cos()) + &u * cr(theta.sin());
            trial /= cr(trial.norm());
            if value_at(&trial) > fx {
                x = trial;
                continue;
            }
            // fallback: plain ascent with step halving
            let mut trial = &x + &r * cr(step);
            trial /= cr(trial.norm());
            if value_at(&trial) > fx {
                x = trial;
            } else {
                step *= 0.5;
                if step < 1e-12 {
                    break;
                }
            }
        }
        let v = value_at(&x);
        if v > best_val {
            best_val = v;
            best_grad = grad_residual;
        }
    }
    CkahlerNorm {
        value: best_val.max(0.0).sqrt(),
        grad_residual: best_grad,
    }
}

/// A linear subspace of the function algebra, spanned by observables and
/// carried by a Hilbert–Schmidt orthonormal matrix basis.
#[derive(Debug, Clone)]
pub struct FunctionSubspace {
    pub generators: Vec<ObservableFunction>,
    pub basis: Vec<CMat>,
    pub n: usize,
}

impl FunctionSubspace {
    pub fn from_generators(gens: &[ObservableFunction]) -> Result<Self> {
        let n = gens
            .first()
            .ok_or_else(|| Error::InvalidInput("empty generator list".into()))?
            .dim();
        for g in gens {
            if g.dim() != n {
                return Err(Error::DimensionMismatch(
                    "generators of mixed dimension".into(),
                ));
            }
        }
        let mut stacked = CMat::zeros(n * n, gens.len());
        for (j, g) in gens.iter().enumerate() {
            stacked.set_column(j, &linalg::vectorize(&g.a));
        }
        let q = linalg::orthonormal_columns(&stacked, 1e-10);
        let basis = (0..q.ncols())
            .map(|j| linalg::unvectorize(&q.column(j).into(), n, n))
            .collect();
        Ok(Self {
            generators: gens.to_vec(),
            basis,
            n,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Orthogonal projector onto the span, as an n²×n² matrix.
    pub fn projector(&self) -> CMat {
        let nn = self.n * self.n;
        let mut p = CMat::zeros(nn, nn);
        for b in &self.basis {
            let v = linalg::vectorize(b);
            p += &v * v.adjoint();
        }
        p
    }

    /// Squared HS distance from `m` to the span.
    pub fn residual(&self, m: &CMat) -> f64 {
        let v = linalg::vectorize(m);
        let mut proj = CVec::zeros(v.len());
        for b in &self.basis {
            let bv = linalg::vectorize(b);
            let coeff = bv.dotc(&v);
            proj += bv * coeff;
        }
        (v - proj).norm()
    }

    pub fn contains(&self, m: &CMat, tol: f64) -> bool {
        self.residual(m) <= tol
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        let id = CMat::identity(self.n, self.n);
        self.contains(&id, tol * (self.n as f64))
    }
}

/// Poisson commutant of a subspace: all f_B with {f_A, f_B} = 0 for every
/// generator, computed as the null space of B ↦ ([A_1,B], …, [A_m,B]).
/// Coincides with the matrix commutant.
pub fn poisson_commutant(s: &FunctionSubspace) -> FunctionSubspace {
    let n = s.n;
    let nn = n * n;
    let m = s.basis.len();
    let id = CMat::identity(n, n);
    // vec([A,B]) = (I⊗A − Aᵀ⊗I) vec(B), column-major vec
    let mut stacked = CMat::zeros(m * nn, nn);
    for (i, a) in s.basis.iter().enumerate() {
        let block = linalg::kron(&id, a) - linalg::kron(&a.transpose(), &id);
        stacked.view_mut((i * nn, 0), (nn, nn)).copy_from(&block);
    }
    let null = linalg::nullspace(&stacked, 1e-10);
    let gens: Vec<ObservableFunction> = null
        .iter()
        .map(|v| ObservableFunction {
            a: linalg::unvectorize(v, n, n),
        })
        .collect();
    if gens.is_empty() {
        // cannot happen: the identity always commutes
        return FunctionSubspace {
            generators: vec![],
            basis: vec![],
            n,
        };
    }
    FunctionSubspace::from_generators(&gens).expect("nullspace basis is well formed")
}

/// Result of the bicommutant comparison S vs S^{cc}.
#[derive(Debug, Clone, Copy)]
pub struct BicommutantReport {
    pub dim_s: usize,
    pub dim_sc: usize,
    pub dim_scc: usize,
    pub projector_deviation: f64,
    pub equal: bool,
}

/// Computes S^{cc} by two commutant passes and compares subspaces through
/// their orthogonal projectors (HS norm, tolerance 1e−8).
///
/// Preconditions: S must be unital, closed under the involution and closed
/// under the matrix product of its basis elements.
pub fn bicommutant_check(s: &FunctionSubspace) -> Result<BicommutantReport> {
    let tol = 1e-8;
    if !s.is_unital(tol) {
        return Err(Error::Precondition("subspace is not unital".into()));
    }
    for b in &s.basis {
        if !s.contains(&linalg::dagger(b), 1e-8) {
            return Err(Error::Precondition(
                "subspace is not closed under the involution".into(),
            ));
        }
    }
    for x in &s.basis {
        for y in &s.basis {
            if !s.contains(&(x * y), 1e-8) {
                return Err(Error::Precondition(
                    "subspace is not closed under the star product".into(),
                ));
            }
        }
    }
    let sc = poisson_commutant(s);
    let scc = poisson_commutant(&sc);
    let dev = linalg::frob_norm(&(s.projector() - scc.projector()));
    Ok(BicommutantReport {
        dim_s: s.dim(),
        dim_sc: sc.dim(),
        dim_scc: scc.dim(),
        projector_deviation: dev,
        equal: dev < tol,
    })
}

/// Startup calibration of the chart-side star product.
#[derive(Debug, Clone, Copy)]
pub struct Calibration {
    /// Global scale of the derivative pairing; fixed by requiring
    /// f_{σx} ⋆ f_{σx} = f_I at [1,0] in n = 2.
    pub scale: f64,
    /// Worst deviation of scaled star products from the matrix product over
    /// the calibration sample (point-independence check).
    pub max_deviation: f64,
    /// Flow constant: X_{f_A} integrates to [exp(−i·κ·tA)x].
    pub kappa: f64,
}

static CALIBRATION: OnceLock<Calibration> = OnceLock::new();

/// Computed once per process; panics if the geometry is inconsistent, since
/// every star-product evaluation depends on it.
pub fn calibration() -> &'static Calibration {
    CALIBRATION.get_or_init(|| {
        let sx = CMat::from_row_slice(2, 2, &[linalg::ZERO, linalg::ONE, linalg::ONE, linalg::ZERO]);
        let sz = CMat::from_row_slice(2, 2, &[linalg::ONE, linalg::ZERO, linalg::ZERO, -linalg::ONE]);
        let e0 = ProjectivePoint::from_components(&[linalg::ONE, linalg::ZERO]).unwrap();
        let c0 = to_chart(&e0);
        // pointwise part of f_{σx}⋆f_{σx} at [1,0] vanishes; the derivative
        // pairing must carry the whole of f_{σx²} = 1
        let pair = derivative_pairing(&sx, &sx, &c0).unwrap();
        assert!(pair.norm() > 1e-8, "degenerate calibration pairing");
        let scale = 1.0 / pair.re;

        // orientation: the differentiated factor is the one that makes the
        // product come out as f_{AB}, not f_{BA}
        let mut rng = ChaCha8Rng::seed_from_u64(0xca11);
        let p = ProjectivePoint::new(linalg::random_unit_vector(&mut rng, 2)).unwrap();
        let c = to_chart(&p);
        let x = p.representative();
        let fzfx = x.dotc(&((&sz * &sx) * x));
        let fxfz = x.dotc(&((&sx * &sz) * x));
        let fz = x.dotc(&(&sz * x));
        let fx = x.dotc(&(&sx * x));
        let prod = fz * fx + cr(scale) * derivative_pairing(&sz, &sx, &c).unwrap();
        assert!(
            (prod - fzfx).norm() < 1e-8,
            "star-product orientation check failed"
        );
        assert!(
            (fzfx - fxfz).norm() > 1e-3,
            "orientation pair unexpectedly commutes at the sampled point"
        );

        // point-independence of the scale across dimensions and points
        let mut max_dev = 0.0f64;
        for n in 2..=4 {
            for _ in 0..32 {
                let a = linalg::random_matrix(&mut rng, n, n);
                let b = linalg::random_matrix(&mut rng, n, n);
                let p = ProjectivePoint::new(linalg::random_unit_vector(&mut rng, n)).unwrap();
                let c = to_chart(&p);
                let x = p.representative();
                let lhs = x.dotc(&(&a * x)) * x.dotc(&(&b * x))
                    + cr(scale) * derivative_pairing(&a, &b, &c).unwrap();
                let rhs = x.dotc(&((&a * &b) * x));
                max_dev = max_dev.max((lhs - rhs).norm());
            }
        }
        assert!(
            max_dev < 1e-8,
            "star-product scale is point-dependent: deviation {max_dev:.3e}"
        );

        // flow constant κ linking X_{f_A} to the unitary one-parameter group
        let kappa = measure_kappa();
        Calibration {
            scale,
            max_deviation: max_dev,
            kappa,
        }
    })
}

/// Slope of the X_{f_A} flow against the unitary one-parameter group: the
/// chart velocity of X_f = −i·grad f divided by the analytic chart velocity
/// of t ↦ [exp(−itA)x]. Measured at random points and matrices, asserted
/// point-independent.
fn measure_kappa() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b61);
    let mut estimates: Vec<f64> = Vec::new();
    for n in [2usize, 3] {
        for _ in 0..16 {
            let a = linalg::random_hermitian(&mut rng, n);
            let p = ProjectivePoint::new(linalg::random_unit_vector(&mut rng, n)).unwrap();
            let c = to_chart(&p);
            // geometric field in chart coordinates
            let xdot = projective::holomorphic_gradient(&a, &c).unwrap() * (-I);
            // analytic chart velocity of exp(−itA)ζ at t = 0
            let zeta = c.lift();
            let ydot = (&a * &zeta) * (-I);
            let k = c.pivot;
            let m = c.z.len();
            let mut udot = CVec::zeros(m);
            for j in 0..m {
                let s = c.slot(j);
                udot[j] = (ydot[s] * zeta[k] - zeta[s] * ydot[k]) / (zeta[k] * zeta[k]);
            }
            let denom = udot.norm_squared();
            if denom < 1e-8 {
                continue;
            }
            estimates.push(udot.dotc(&xdot).re / denom);
        }
    }
    let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
    for e in &estimates {
        assert!(
            (e - mean).abs() < 1e-9,
            "flow constant varies across samples: {e} vs {mean}"
        );
    }
    mean
}

/// Convenience: sample a random observable pair and point of matching
/// dimension (used by verification sweeps).
pub fn random_observable<R: Rng>(rng: &mut R, n: usize) -> ObservableFunction {
    ObservableFunction {
        a: linalg::random_matrix(rng, n, n),
    }
}
