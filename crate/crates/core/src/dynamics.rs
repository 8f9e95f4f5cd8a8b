//! Unitary symplectic flows on CP^{n−1}, their pullbacks on expectation
//! functions, infinitesimal actions β and Hamiltonian vector fields.
//!
//! Flows are restricted to the linear case α_t([x]) = [exp(−itH)x]; that is
//! the setting in which the function space span{f_A} stays finite
//! dimensional and closed under everything we do to it. β acts in closed
//! form, β_s f_A = s·f_{i[H,A]}, with finite differences demoted to a test
//! oracle.

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, CVec, I};
use crate::projective::{self, to_chart, ChartPoint, ProjectivePoint, Tangent};
use crate::star::{evaluate, poisson_bracket, ObservableFunction};

/// One-parameter unitary flow α_t([x]) = [exp(−itH)x] with H Hermitian.
#[derive(Debug, Clone)]
pub struct UnitaryFlow {
    h: CMat,
}

impl UnitaryFlow {
    pub fn new(h: CMat) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::InvalidInput("generator must be square".into()));
        }
        if !linalg::is_hermitian(&h, 1e-12) {
            return Err(Error::InvalidInput("generator must be Hermitian".into()));
        }
        Ok(Self { h })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn generator(&self) -> &CMat {
        &self.h
    }

    /// exp(−itH).
    pub fn unitary(&self, t: f64) -> CMat {
        linalg::herm_phase_exp(&self.h, -t)
    }

    pub fn apply(&self, t: f64, p: &ProjectivePoint) -> ProjectivePoint {
        ProjectivePoint::new(self.unitary(t) * p.representative())
            .expect("unitary preserves the norm")
    }

    /// Pushforward of a realified chart tangent under α_t, with the chart of
    /// the image point. The chart transition is holomorphic, so the tangent
    /// transforms by the exact complex Jacobian.
    pub fn pushforward(
        &self,
        t: f64,
        c: &ChartPoint,
        u: &Tangent,
    ) -> Result<(ChartPoint, Tangent)> {
        let zeta = c.lift();
        let y = self.unitary(t) * &zeta;
        let p2 = ProjectivePoint::new(y.clone())?;
        let c2 = to_chart(&p2);
        let uvec = projective::complexify(u);
        let m = c.z.len();
        let uq = self.unitary(t);
        let k2 = c2.pivot;
        // dy = U e_{σ(j)} dz_j ; w_i = y_{σ'(i)}/y_{k'}
        let mut jac = CMat::zeros(m, m);
        for i in 0..m {
            let si = c2.slot(i);
            for j in 0..m {
                let sj = c.slot(j);
                jac[(i, j)] =
                    (uq[(si, sj)] * y[k2] - y[si] * uq[(k2, sj)]) / (y[k2] * y[k2]);
            }
        }
        let v = &jac * uvec;
        let mut out = Tangent::zeros(2 * m);
        for i in 0..m {
            out[i] = v[i].re;
            out[m + i] = v[i].im;
        }
        Ok((c2, out))
    }
}

/// Pullback α*_t f_A = f_{exp(itH) A exp(−itH)}, so that
/// (pullback f)(p) = f(α_t(p)).
pub fn pullback(flow: &UnitaryFlow, t: f64, f: &ObservableFunction) -> Result<ObservableFunction> {
    if flow.dim() != f.dim() {
        return Err(Error::DimensionMismatch(
            "flow and observable dimensions differ".into(),
        ));
    }
    let u = flow.unitary(t);
    ObservableFunction::new(u.adjoint() * &f.a * u)
}

/// The generator of the pullback flow on observables.
#[derive(Debug, Clone)]
pub struct InfinitesimalAction {
    pub flow: UnitaryFlow,
}

impl InfinitesimalAction {
    pub fn new(flow: UnitaryFlow) -> Self {
        Self { flow }
    }
}

/// β_s f_A = s·f_{i[H,A]} (closed form; equals d/dt pullback at t = 0).
pub fn beta(action: &InfinitesimalAction, s: f64, f: &ObservableFunction) -> Result<ObservableFunction> {
    if action.flow.dim() != f.dim() {
        return Err(Error::DimensionMismatch(
            "action and observable dimensions differ".into(),
        ));
    }
    let h = action.flow.generator();
    ObservableFunction::new(linalg::commutator(h, &f.a) * I * cr(s))
}

/// Matrix of β₁ acting on M_n coordinates (HS basis, column-major vec):
/// A ↦ i[H, A].
pub fn beta_matrix(h: &CMat) -> CMat {
    let n = h.nrows();
    let id = CMat::identity(n, n);
    (linalg::kron(&id, h) - linalg::kron(&h.transpose(), &id)) * I
}

/// The Hamiltonian vector field of f as a derivation of the function
/// algebra: X_{f_A} f_B = −{f_A, f_B} = f_{i[A,B]}.
#[derive(Debug, Clone)]
pub struct HamiltonianField {
    pub source: ObservableFunction,
    /// n²×n² matrix of the derivation on M_n coordinates.
    pub derivation_matrix: CMat,
}

pub fn hamiltonian_field(f: &ObservableFunction) -> HamiltonianField {
    let n = f.dim();
    let id = CMat::identity(n, n);
    // vec(i[A,B]) = i(I⊗A − Aᵀ⊗I) vec(B)
    let m = (linalg::kron(&id, &f.a) - linalg::kron(&f.a.transpose(), &id)) * I;
    HamiltonianField {
        source: f.clone(),
        derivation_matrix: m,
    }
}

/// Fixed-step RK4 for the flow of X_{f_A} on the unit sphere, renormalizing
/// after every step. The field lifts to ẋ = −i(A − f_A(x))x; the endpoint
/// matches [exp(−i·κ·tA)x₀] with the measured flow constant κ.
pub fn integrate_flow(
    f: &ObservableFunction,
    p0: &ProjectivePoint,
    t: f64,
    steps: usize,
) -> Result<ProjectivePoint> {
    if !linalg::is_hermitian(&f.a, 1e-12) {
        return Err(Error::InvalidInput(
            "flow integration requires a Hermitian observable".into(),
        ));
    }
    if f.dim() != p0.dim() {
        return Err(Error::DimensionMismatch(
            "observable and point dimensions differ".into(),
        ));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("steps must be ≥ 1".into()));
    }
    let a = &f.a;
    let deriv = |x: &CVec| -> CVec {
        let fx = x.dotc(&(a * x)) / cr(x.norm_squared());
        (a * x - x * fx) * (-I)
    };
    let h = t / steps as f64;
    let mut x = p0.representative().clone();
    for _ in 0..steps {
        let k1 = deriv(&x);
        let k2 = deriv(&(&x + &k1 * cr(h / 2.0)));
        let k3 = deriv(&(&x + &k2 * cr(h / 2.0)));
        let k4 = deriv(&(&x + &k3 * cr(h)));
        x += (k1 + k2 * cr(2.0) + k3 * cr(2.0) + k4) * cr(h / 6.0);
        x /= cr(x.norm());
    }
    ProjectivePoint::new(x)
}

/// Sampled trajectory row: time, chart of the point, energy f_A.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub t: f64,
    pub chart: ChartPoint,
    pub energy: f64,
}

/// Integrates and samples the flow at `samples + 1` evenly spaced times.
pub fn sample_flow(
    f: &ObservableFunction,
    p0: &ProjectivePoint,
    t: f64,
    steps: usize,
    samples: usize,
) -> Result<Vec<TrajectorySample>> {
    let mut out = Vec::with_capacity(samples + 1);
    for k in 0..=samples {
        let tk = t * (k as f64) / (samples as f64).max(1.0);
        let sk = ((steps as f64) * (k as f64) / (samples as f64).max(1.0)).ceil() as usize;
        let p = if k == 0 {
            p0.clone()
        } else {
            integrate_flow(f, p0, tk, sk.max(1))?
        };
        let energy = evaluate(f, &p)?.re;
        out.push(TrajectorySample {
            t: tk,
            chart: to_chart(&p),
            energy,
        });
    }
    Ok(out)
}

/// Leibniz residual of β on one triple: β{f,l} − {βf, l} − {f, βl}.
pub fn leibniz_residual(
    action: &InfinitesimalAction,
    f: &ObservableFunction,
    l: &ObservableFunction,
) -> Result<f64> {
    let lhs = beta(action, 1.0, &poisson_bracket(f, l)?)?;
    let r1 = poisson_bracket(&beta(action, 1.0, f)?, l)?;
    let r2 = poisson_bracket(f, &beta(action, 1.0, l)?)?;
    Ok(linalg::max_abs(&(lhs.a - r1.a - r2.a)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ONE, ZERO};
    use crate::projective::fs_distance;
    use crate::star::{calibration, star_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sx() -> CMat {
        CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    fn sy() -> CMat {
        CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
    }

    fn sz() -> CMat {
        CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
    }

    #[test]
    fn flow_requires_hermitian_generator() {
        let bad = CMat::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        assert!(UnitaryFlow::new(bad).is_err());
        assert!(UnitaryFlow::new(sz()).is_ok());
    }

    #[test]
    fn pullback_examples_and_compatibility() {
        let flow = UnitaryFlow::new(sz()).unwrap();
        let f = ObservableFunction::new(sx()).unwrap();

        // t = 0: unchanged
        let p0 = pullback(&flow, 0.0, &f).unwrap();
        assert!(linalg::max_abs(&(&p0.a - &f.a)) < 1e-14);

        // conserved observable
        let fz = ObservableFunction::new(sz()).unwrap();
        let pz = pullback(&flow, 1.7, &fz).unwrap();
        assert!(linalg::max_abs(&(&pz.a - &fz.a)) < 1e-12);

        // σ_x at t = π/2, frozen against the direct conjugation oracle
        let t = std::f64::consts::FRAC_PI_2;
        let p = pullback(&flow, t, &f).unwrap();
        let u = linalg::herm_phase_exp(&sz(), t); // e^{iπσz/2}
        let oracle = &u * sx() * linalg::dagger(&u);
        assert!(linalg::max_abs(&(&p.a - &oracle)) < 1e-12);

        // evaluate(pullback f, p) = evaluate(f, α_t p)
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let h = linalg::random_hermitian(&mut rng, 3);
            let flow = UnitaryFlow::new(h).unwrap();
            let f = ObservableFunction::new(linalg::random_matrix(&mut rng, 3, 3)).unwrap();
            let p = ProjectivePoint::new(linalg::random_unit_vector(&mut rng, 3)).unwrap();
            let t = 0.9;
            let lhs = evaluate(&pullback(&flow, t, &f).unwrap(), &p).unwrap();
            let rhs = evaluate(&f, &flow.apply(t, &p)).unwrap();
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn pullback_group_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let flow = UnitaryFlow::new(linalg::random_hermitian(&mut rng, 3)).unwrap();
            let f = ObservableFunction::new(linalg::random_matrix(&mut rng, 3, 3)).unwrap();
            let (s, t) = (0.6, -1.3);
            let a = pullback(&flow, t, &pullback(&flow, s, &f).unwrap()).unwrap();
            let b = pullback(&flow, s + t, &f).unwrap();
            assert!(linalg::max_abs(&(a.a - b.a)) < 1e-10);
        }
    }

    #[test]
    fn beta_examples_and_fd_oracle() {
        let flow = UnitaryFlow::new(sz()).unwrap();
        let act = InfinitesimalAction::new(flow.clone());

        // constants are invariant
        let bi = beta(&act, 1.0, &ObservableFunction::identity(2)).unwrap();
        assert!(linalg::max_abs(&bi.a) < 1e-14);

        // i[σz, σx] = −2σy
        let bf = beta(&act, 1.0, &ObservableFunction::new(sx()).unwrap()).unwrap();
        let expect = sy() * cr(-2.0);
        assert!(linalg::max_abs(&(&bf.a - &expect)) < 1e-13);

        // finite differences of the pullback, step 1e−5
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let h = linalg::random_hermitian(&mut rng, 3);
            let flow = UnitaryFlow::new(h).unwrap();
            let act = InfinitesimalAction::new(flow.clone());
            let f = ObservableFunction::new(linalg::random_matrix(&mut rng, 3, 3)).unwrap();
            let eps = 1e-5;
            let fp = pullback(&flow, eps, &f).unwrap();
            let fm = pullback(&flow, -eps, &f).unwrap();
            let fd = (fp.a - fm.a) / cr(2.0 * eps);
            let cl = beta(&act, 1.0, &f).unwrap();
            assert!(linalg::max_abs(&(fd - &cl.a)) < 1e-8);

            // linearity in s
            let s = 2.75;
            let bs = beta(&act, s, &f).unwrap();
            assert!(linalg::max_abs(&(bs.a - &cl.a * cr(s))) < 1e-12);
        }
    }

    #[test]
    fn beta_satisfies_leibniz_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let h = linalg::random_hermitian(&mut rng, 3);
            let act = InfinitesimalAction::new(UnitaryFlow::new(h).unwrap());
            let f = ObservableFunction::new(linalg::random_matrix(&mut rng, 3, 3)).unwrap();
            let l = ObservableFunction::new(linalg::random_matrix(&mut rng, 3, 3)).unwrap();
            assert!(leibniz_residual(&act, &f, &l).unwrap() < 1e-10);
        }
    }

    #[test]
    fn hamiltonian_field_kernel_rank_and_homomorphism() {
        // kernel: scalars
        let hf = hamiltonian_field(&ObservableFunction::identity(3));
        assert!(linalg::max_abs(&hf.derivation_matrix) < 1e-14);

        // X_{f_{σz}} applied to f_{σx} = −{f_{σz}, f_{σx}} = −f_{2σy}
        let xz = hamiltonian_field(&ObservableFunction::new(sz()).unwrap());
        let image = linalg::unvectorize(
            &(&xz.derivation_matrix * linalg::vectorize(&sx())),
            2,
            2,
        );
        let fl = ObservableFunction::new(sx()).unwrap();
        let oracle = poisson_bracket(&ObservableFunction::new(sz()).unwrap(), &fl).unwrap();
        assert!(linalg::max_abs(&(&image + &oracle.a)) < 1e-13);

        // rank of A ↦ X_{f_A} is n² − 1
        for n in [2usize, 3] {
            let basis = linalg::hs_basis(n);
            let mut stacked = CMat::zeros(n * n * n * n, n * n);
            for (j, e) in basis.iter().enumerate() {
                let x = hamiltonian_field(&ObservableFunction::new(e.clone()).unwrap());
                stacked.set_column(j, &linalg::vectorize(&x.derivation_matrix));
            }
            assert_eq!(linalg::rank(&stacked, 1e-10), n * n - 1);
        }

        // f ↦ −X_f is a Lie homomorphism: [X_f, X_l] = −X_{{f,l}}
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let f = ObservableFunction::new(linalg::random_matrix(&mut rng, 3, 3)).unwrap();
            let l = ObservableFunction::new(linalg::random_matrix(&mut rng, 3, 3)).unwrap();
            let xf = hamiltonian_field(&f).derivation_matrix;
            let xl = hamiltonian_field(&l).derivation_matrix;
            let lhs = linalg::commutator(&xf, &xl);
            let xfl = hamiltonian_field(&poisson_bracket(&f, &l).unwrap()).derivation_matrix;
            assert!(linalg::max_abs(&(lhs + xfl)) < 1e-9);
        }
    }

    #[test]
    fn flow_preserves_symplectic_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let h = linalg::random_hermitian(&mut rng, 3);
            let flow = UnitaryFlow::new(h).unwrap();
            let p = ProjectivePoint::new(linalg::random_unit_vector(&mut rng, 3)).unwrap();
            let c = to_chart(&p);
            let u = Tangent::from_fn(4, |_, _| rand::Rng::random::<f64>(&mut rng) - 0.5);
            let v = Tangent::from_fn(4, |_, _| rand::Rng::random::<f64>(&mut rng) - 0.5);
            let w0 = projective::symplectic_pairing(&u, &v, &c).unwrap();
            let t = 0.8;
            let (c2, u2) = flow.pushforward(t, &c, &u).unwrap();
            let (c2b, v2) = flow.pushforward(t, &c, &v).unwrap();
            assert_eq!(c2.pivot, c2b.pivot);
            let w1 = projective::symplectic_pairing(&u2, &v2, &c2).unwrap();
            assert!((w0 - w1).abs() < 1e-8, "ω not preserved: {w0} vs {w1}");
        }
    }

    #[test]
    fn integrate_flow_fixed_points_and_exact_endpoint() {
        let e0 = ProjectivePoint::from_components(&[ONE, ZERO]).unwrap();
        let fz = ObservableFunction::new(sz()).unwrap();

        // t = 0 and eigenvector stationarity
        let p = integrate_flow(&fz, &e0, 0.0, 1).unwrap();
        assert!(fs_distance(&p, &e0) < 1e-12);
        let p = integrate_flow(&fz, &e0, 2.3, 400).unwrap();
        assert!(fs_distance(&p, &e0) < 1e-10);

        // σx from [1,0] for t = π/(2κ): endpoint [exp(−iσx·π/2)·e0]
        let kappa = calibration().kappa;
        let fx = ObservableFunction::new(sx()).unwrap();
        let t = std::f64::consts::FRAC_PI_2 / kappa;
        let p = integrate_flow(&fx, &e0, t, 1000).unwrap();
        let u = linalg::herm_phase_exp(&sx(), -kappa * t);
        let target = ProjectivePoint::new(&u * e0.representative()).unwrap();
        assert!(fs_distance(&p, &target) < 1e-6);

        // non-Hermitian input rejected
        let bad = ObservableFunction::new(CMat::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]))
            .unwrap();
        assert!(integrate_flow(&bad, &e0, 1.0, 10).is_err());
    }

    #[test]
    fn integrate_flow_fourth_order_and_energy_conserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = ObservableFunction::new(linalg::random_hermitian(&mut rng, 2)).unwrap();
        let p0 = ProjectivePoint::new(linalg::random_unit_vector(&mut rng, 2)).unwrap();
        let kappa = calibration().kappa;
        let t = 2.0;
        let u = linalg::herm_phase_exp(&a.a, -kappa * t);
        let target = ProjectivePoint::new(&u * p0.representative()).unwrap();
        let err = |steps: usize| {
            let p = integrate_flow(&a, &p0, t, steps).unwrap();
            fs_distance(&p, &target)
        };
        let e1 = err(16);
        let e2 = err(32);
        let ratio = e1 / e2;
        assert!(
            (12.0..=20.0).contains(&ratio),
            "convergence ratio {ratio} (errors {e1:.3e}, {e2:.3e})"
        );

        // energy conservation along the trajectory
        let samples = sample_flow(&a, &p0, 3.0, 3000, 30).unwrap();
        let ref_e = samples[0].energy;
        for s in &samples {
            assert!((s.energy - ref_e).abs() < 1e-8);
        }
    }

    #[test]
    fn star_matrix_transport_under_flow() {
        // pullback is an algebra morphism: α*(f·l) = α*f · α*l
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let flow = UnitaryFlow::new(linalg::random_hermitian(&mut rng, 3)).unwrap();
        let f = ObservableFunction::new(linalg::random_matrix(&mut rng, 3, 3)).unwrap();
        let l = ObservableFunction::new(linalg::random_matrix(&mut rng, 3, 3)).unwrap();
        let t = 1.1;
        let lhs = pullback(&flow, t, &star_matrix(&f, &l).unwrap()).unwrap();
        let rhs = star_matrix(
            &pullback(&flow, t, &f).unwrap(),
            &pullback(&flow, t, &l).unwrap(),
        )
        .unwrap();
        assert!(linalg::max_abs(&(lhs.a - rhs.a)) < 1e-10);
    }
}
