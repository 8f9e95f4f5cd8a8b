//! Verification campaigns: each suite runs a family of identity checks at
//! pinned tolerances and returns named results. The CLI prints them; the
//! acceptance tests assert them. All randomness comes from the configured
//! seed, so reports are reproducible bit for bit.

use crate::config::RunConfig;
use crate::crossed::{
    build_covariant, dual_action, first_crossed_product, second_crossed_product, second_level,
    Flavor, ModelSpace,
};
use crate::duality::verify_duality;
use crate::dynamics::{
    hamiltonian_field, integrate_flow, leibniz_residual, pullback, InfinitesimalAction,
    UnitaryFlow,
};
use crate::error::Result;
use crate::line::{ccr_check, fourier_intertwine_check, LineContext, LineGrid, LineOpKind};
use crate::projective::{fs_distance, ProjectivePoint};
use crate::report::Check;
use crate::star::{
    bicommutant_check, ckahler_norm, evaluate, involution, poisson_bracket, star_matrix,
    star_product, FunctionSubspace, ObservableFunction,
};
use crate::{linalg, matfile};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;

type CMat = DMatrix<C64>;

/// Star-product isomorphism, the commutator/Poisson identity, the C*-norm
/// against the singular-value oracle, and the commutant dimensions.
pub fn star_suite(cfg: &RunConfig) -> Result<Vec<Check>> {
    let mut rng = cfg.rng();
    let mut checks = Vec::new();

    // sampled pointwise identities over 20 pairs × 1000 points for each n
    let mut iso_dev = 0.0f64;
    let mut comm_dev = 0.0f64;
    for n in [2usize, 3, 4] {
        for _ in 0..20 {
            let f = ObservableFunction::new(linalg::random_matrix(&mut rng, n, n))?;
            let l = ObservableFunction::new(linalg::random_matrix(&mut rng, n, n))?;
            let points: Vec<ProjectivePoint> = (0..1000)
                .map(|_| ProjectivePoint::new(linalg::random_unit_vector(&mut rng, n)).unwrap())
                .collect();
            let fl = star_matrix(&f, &l)?;
            let pb = poisson_bracket(&f, &l)?;
            let (a, b) = points
                .par_iter()
                .map(|p| {
                    let sp = star_product(&f, &l, p).unwrap();
                    let oracle = evaluate(&fl, p).unwrap();
                    let comm = sp - star_product(&l, &f, p).unwrap();
                    let pbv = evaluate(&pb, p).unwrap();
                    ((sp - oracle).norm(), (comm - linalg::I * pbv).norm())
                })
                .reduce(|| (0.0, 0.0), |x, y| (x.0.max(y.0), x.1.max(y.1)));
            iso_dev = iso_dev.max(a);
            comm_dev = comm_dev.max(b);
        }
    }
    checks.push(Check::new(
        "star-matches-operator-product",
        "star-isomorphism",
        iso_dev,
        cfg.tol("star-matches-operator-product", 1e-8),
    ));
    checks.push(Check::new(
        "commutator-is-i-poisson",
        "commutator-poisson",
        comm_dev,
        cfg.tol("commutator-is-i-poisson", 1e-8),
    ));

    // C*-norm vs the largest singular value
    let mut rel_dev = 0.0f64;
    for n in [2usize, 3, 4] {
        for _ in 0..20 {
            let f = ObservableFunction::new(linalg::random_matrix(&mut rng, n, n))?;
            let est = ckahler_norm(&f, 64, 200);
            let oracle = linalg::spectral_norm(&f.a);
            rel_dev = rel_dev.max((est.value - oracle).abs() / oracle.max(1e-12));
        }
    }
    checks.push(Check::new(
        "sup-norm-matches-singular-value",
        "cstar-norm",
        rel_dev,
        cfg.tol("sup-norm-matches-singular-value", 2e-3),
    ));

    // commutant dimensions and bicommutant stability
    let mut proj_dev = 0.0f64;
    let mut dims_ok = true;
    for n in [2usize, 3] {
        let diag: Vec<ObservableFunction> = (0..n)
            .map(|i| {
                let mut m = CMat::zeros(n, n);
                m[(i, i)] = linalg::ONE;
                ObservableFunction::new(m).unwrap()
            })
            .collect();
        let full: Vec<ObservableFunction> = linalg::hs_basis(n)
            .into_iter()
            .map(|m| ObservableFunction::new(m).unwrap())
            .collect();
        let scalars = vec![ObservableFunction::identity(n)];
        // expected (dim S, dim S^c) from the matrix side
        for (gens, dim_s, dim_sc) in [
            (diag, n, n),
            (full, n * n, 1),
            (scalars, 1, n * n),
        ] {
            let s = FunctionSubspace::from_generators(&gens)?;
            let rep = bicommutant_check(&s)?;
            dims_ok &= rep.dim_s == dim_s && rep.dim_sc == dim_sc && rep.dim_scc == dim_s;
            dims_ok &= rep.equal;
            proj_dev = proj_dev.max(rep.projector_deviation);
        }
    }
    checks.push(Check::flag(
        "commutant-dimensions-match-matrix-side",
        "poisson-commutant",
        dims_ok,
    ));
    checks.push(Check::new(
        "bicommutant-projector-deviation",
        "bicommutant",
        proj_dev,
        cfg.tol("bicommutant-projector-deviation", 1e-8),
    ));

    // involution is pointwise conjugation (sampled)
    let mut inv_dev = 0.0f64;
    for _ in 0..100 {
        let f = ObservableFunction::new(linalg::random_matrix(&mut rng, 3, 3))?;
        let p = ProjectivePoint::new(linalg::random_unit_vector(&mut rng, 3))?;
        let lhs = evaluate(&involution(&f), &p)?;
        let rhs = evaluate(&f, &p)?.conj();
        inv_dev = inv_dev.max((lhs - rhs).norm());
    }
    checks.push(Check::new(
        "involution-is-pointwise-conjugate",
        "involution",
        inv_dev,
        cfg.tol("involution-is-pointwise-conjugate", 1e-12),
    ));

    Ok(checks)
}

/// β-Leibniz, pullback group law, the Lie morphism onto Hamiltonian fields,
/// and the geometric flow integration checks.
pub fn dynamics_suite(cfg: &RunConfig) -> Result<Vec<Check>> {
    let mut rng = cfg.rng();
    let mut checks = Vec::new();

    let mut leibniz = 0.0f64;
    let mut group = 0.0f64;
    let mut morphism = 0.0f64;
    for _ in 0..200 {
        let h = linalg::random_hermitian(&mut rng, 3);
        let flow = UnitaryFlow::new(h)?;
        let act = InfinitesimalAction::new(flow.clone());
        let f = ObservableFunction::new(linalg::random_matrix(&mut rng, 3, 3))?;
        let l = ObservableFunction::new(linalg::random_matrix(&mut rng, 3, 3))?;
        leibniz = leibniz.max(leibniz_residual(&act, &f, &l)?);

        let (s, t) = (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let a = pullback(&flow, t, &pullback(&flow, s, &f)?)?;
        let b = pullback(&flow, s + t, &f)?;
        group = group.max(linalg::max_abs(&(a.a - b.a)));

        let xf = hamiltonian_field(&f).derivation_matrix;
        let xl = hamiltonian_field(&l).derivation_matrix;
        let lhs = linalg::commutator(&xf, &xl);
        let xfl = hamiltonian_field(&poisson_bracket(&f, &l)?).derivation_matrix;
        morphism = morphism.max(linalg::max_abs(&(lhs + xfl)));
    }
    checks.push(Check::new(
        "beta-leibniz-rule",
        "infinitesimal-action",
        leibniz,
        cfg.tol("beta-leibniz-rule", 1e-9),
    ));
    checks.push(Check::new(
        "pullback-group-law",
        "flow-pullback",
        group,
        cfg.tol("pullback-group-law", 1e-9),
    ));
    checks.push(Check::new(
        "field-map-is-lie-morphism",
        "hamiltonian-fields",
        morphism,
        cfg.tol("field-map-is-lie-morphism", 1e-9),
    ));

    // kernel of A ↦ X_{f_A} is exactly the scalars
    let mut kernel_ok = true;
    for n in [2usize, 3] {
        let basis = linalg::hs_basis(n);
        let mut stacked = CMat::zeros(n * n * n * n, n * n);
        for (j, e) in basis.iter().enumerate() {
            let x = hamiltonian_field(&ObservableFunction::new(e.clone())?);
            stacked.set_column(j, &linalg::vectorize(&x.derivation_matrix));
        }
        kernel_ok &= linalg::rank(&stacked, 1e-10) == n * n - 1;
    }
    checks.push(Check::flag(
        "field-kernel-is-scalars",
        "hamiltonian-fields",
        kernel_ok,
    ));

    // flow integration: 4th-order convergence, energy drift, period return
    let kappa = crate::star::calibration().kappa;
    let a = ObservableFunction::new(linalg::random_hermitian(&mut rng, 2))?;
    let p0 = ProjectivePoint::new(linalg::random_unit_vector(&mut rng, 2))?;
    let t = 2.0;
    let u = linalg::herm_phase_exp(&a.a, -kappa * t);
    let target = ProjectivePoint::new(&u * p0.representative())?;
    let e1 = fs_distance(&integrate_flow(&a, &p0, t, 16)?, &target);
    let e2 = fs_distance(&integrate_flow(&a, &p0, t, 32)?, &target);
    let ratio = e1 / e2.max(1e-300);
    checks.push(Check::new(
        "integrator-fourth-order-ratio",
        "flow-integration",
        (ratio - 16.0).abs(),
        cfg.tol("integrator-fourth-order-ratio", 4.0),
    ));

    let samples = crate::dynamics::sample_flow(&a, &p0, 3.0, 3000, 30)?;
    let e_ref = samples[0].energy;
    let drift = samples
        .iter()
        .map(|s| (s.energy - e_ref).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "flow-energy-drift",
        "flow-integration",
        drift,
        cfg.tol("flow-energy-drift", 1e-8),
    ));

    let sx = ObservableFunction::new(CMat::from_row_slice(
        2,
        2,
        &[linalg::ZERO, linalg::ONE, linalg::ONE, linalg::ZERO],
    ))?;
    let e0 = ProjectivePoint::from_components(&[linalg::ONE, linalg::ZERO])?;
    let period = std::f64::consts::PI / kappa;
    let back = integrate_flow(&sx, &e0, period, 2000)?;
    checks.push(Check::new(
        "flow-period-return",
        "flow-integration",
        fs_distance(&back, &e0),
        cfg.tol("flow-period-return", 1e-6),
    ));

    Ok(checks)
}

/// Covariance of the three representation flavors, the dual action, and
/// the hat-system identities.
pub fn crossed_suite(cfg: &RunConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let h = cfg.hamiltonian_matrix()?;
    let model = ModelSpace::new(cfg.n, &h, cfg.k, cfg.margin)?;

    for flavor in [Flavor::Ad, Flavor::Left, Flavor::Right] {
        let cs = build_covariant(flavor, &model, f64::INFINITY)?;
        let name = format!("covariance-{}", format!("{flavor:?}").to_lowercase());
        checks.push(Check::new(
            &name,
            "covariant-system",
            cs.covariance_residual,
            cfg.tol(&name, 1e-6),
        ));
    }

    let cs = build_covariant(Flavor::Left, &model, 1e-6)?;
    let l1 = first_crossed_product(&model, &cs)?;
    checks.push(Check::new(
        "first-crossed-product-closure",
        "crossed-product",
        l1.constants.max_residual(),
        cfg.tol("first-crossed-product-closure", 1e-6),
    ));
    checks.push(Check::new(
        "mixed-constants-reproduce-beta",
        "crossed-product",
        l1.beta_deviation,
        cfg.tol("mixed-constants-reproduce-beta", 1e-6),
    ));
    checks.push(Check::flag(
        "first-closure-rank",
        "crossed-product",
        l1.closure_rank == cfg.n * cfg.n,
    ));

    let da = dual_action(&model, &l1, 1.0)?;
    checks.push(Check::new(
        "dual-action-kills-pi",
        "dual-action",
        da.kills_pi,
        cfg.tol("dual-action-kills-pi", 1e-8),
    ));
    checks.push(Check::new(
        "dual-action-on-lambda",
        "dual-action",
        da.on_lambda,
        cfg.tol("dual-action-on-lambda", 1e-6),
    ));
    checks.push(Check::new(
        "dual-action-fd-agreement",
        "dual-action",
        da.fd_agreement,
        cfg.tol("dual-action-fd-agreement", 1e-5),
    ));
    checks.push(Check::new(
        "dual-action-derivation-law",
        "dual-action",
        da.derivation_residual,
        cfg.tol("dual-action-derivation-law", 1e-9),
    ));
    checks.push(Check::new(
        "dual-action-kills-brackets",
        "dual-action",
        da.kills_brackets,
        cfg.tol("dual-action-kills-brackets", 1e-6),
    ));

    let sl = second_level(&model, &cs)?;
    for (name, r) in sl.checks() {
        checks.push(Check::new(name, "hat-system", r, cfg.tol(name, 1e-6)));
    }

    let l2 = second_crossed_product(&model, &cs, &l1)?;
    checks.push(Check::new(
        "second-crossed-product-closure",
        "crossed-product",
        l2.constants.max_residual(),
        cfg.tol("second-crossed-product-closure", 1e-6),
    ));
    checks.push(Check::flag(
        "second-closure-adds-only-center",
        "crossed-product",
        l2.closure_rank == cfg.n * cfg.n + 2,
    ));

    Ok(checks)
}

/// Line-operator identities and the end-to-end duality verification for the
/// configured Hamiltonian.
pub fn duality_suite(cfg: &RunConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    // line calculus at the configured grid
    let ctx = LineContext::new(LineGrid::new(cfg.k)?);
    let ccr = ccr_check(&ctx, cfg.margin)?;
    checks.push(Check::new(
        "line-ccr",
        "canonical-commutation",
        ccr,
        cfg.tol("line-ccr", 1e-6),
    ));
    let intertwine = fourier_intertwine_check(&ctx, cfg.margin)?;
    checks.push(Check::new(
        "fourier-intertwine",
        "fourier-transport",
        intertwine,
        cfg.tol("fourier-intertwine", 1e-6),
    ));
    let a = ctx.build(LineOpKind::Lowering).matrix;
    let adag = ctx.build(LineOpKind::Raising).matrix;
    let comm = linalg::commutator(&a, &adag);
    let q = ctx.interior_modes(cfg.margin)?;
    let m = q.ncols();
    let ladder = linalg::frob_norm(
        &(q.adjoint() * comm * q - CMat::identity(m, m)),
    );
    checks.push(Check::new(
        "ladder-ccr",
        "canonical-commutation",
        ladder,
        cfg.tol("ladder-ccr", 1e-6),
    ));

    // residuals do not grow from K = 64 to K = 256; below the floor the
    // truncation error has saturated at rounding level and ordering is noise
    let floor = 1e-10;
    let mut seq = Vec::new();
    for k in [64usize, 128, 256] {
        let c = LineContext::new(LineGrid::new(k)?);
        let margin = cfg.margin.min(k / 4 - 1);
        seq.push(ccr_check(&c, margin)?.max(floor));
    }
    let monotone = seq[1] <= seq[0].max(floor) && seq[2] <= seq[1].max(floor);
    checks.push(Check::flag(
        "ccr-residual-non-increasing-in-k",
        "grid-refinement",
        monotone,
    ));

    // the full chain for the configured Hamiltonian
    let h = cfg.hamiltonian_matrix()?;
    let model = ModelSpace::new(cfg.n, &h, cfg.k, cfg.margin)?;
    let report = verify_duality(&model)?;
    for (name, value, tol) in report.checks() {
        checks.push(Check::new(&name, "duality-chain", value, cfg.tol(&name, tol)));
    }
    checks.push(Check::flag(
        "duality-pass",
        "duality-chain",
        report.pass,
    ));

    Ok(checks)
}

/// Commutant dimensions report for a list of matrix files (the generators
/// of a subspace).
pub struct CommutantReport {
    pub dim_s: usize,
    pub dim_sc: usize,
    pub dim_scc: usize,
    pub equal: bool,
}

pub fn commutant_dims(paths: &[std::path::PathBuf]) -> Result<CommutantReport> {
    let gens: Result<Vec<ObservableFunction>> = paths
        .iter()
        .map(|p| matfile::read_matrix(p).and_then(ObservableFunction::new))
        .collect();
    let s = FunctionSubspace::from_generators(&gens?)?;
    let sc = crate::star::poisson_commutant(&s);
    let scc = crate::star::poisson_commutant(&sc);
    let dev = linalg::frob_norm(&(s.projector() - scc.projector()));
    Ok(CommutantReport {
        dim_s: s.dim(),
        dim_sc: sc.dim(),
        dim_scc: scc.dim(),
        equal: dev < 1e-8,
    })
}

/// Trajectory rows for the demo flow command.
pub fn demo_flow(
    a: &CMat,
    p0: &[C64],
    t: f64,
    steps: usize,
    samples: usize,
) -> Result<Vec<serde_json::Value>> {
    let f = ObservableFunction::new(a.clone())?;
    let p = ProjectivePoint::from_components(p0)?;
    let rows = crate::dynamics::sample_flow(&f, &p, t, steps, samples)?;
    Ok(rows
        .into_iter()
        .map(|r| {
            let z: Vec<[f64; 2]> = r.chart.z.iter().map(|c| [c.re, c.im]).collect();
            serde_json::json!({
                "t": r.t,
                "pivot": r.chart.pivot,
                "z": z,
                "energy": r.energy,
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_suite_passes_with_default_config() {
        let cfg = RunConfig::default();
        let checks = star_suite(&cfg).unwrap();
        for c in &checks {
            assert!(c.pass, "{} failed with {:.3e}", c.name, c.max_error);
        }
    }

    #[test]
    fn dynamics_suite_passes_with_default_config() {
        let cfg = RunConfig::default();
        for c in dynamics_suite(&cfg).unwrap() {
            assert!(c.pass, "{} failed with {:.3e}", c.name, c.max_error);
        }
    }

    #[test]
    fn suites_are_deterministic() {
        let cfg = RunConfig::default();
        let a = dynamics_suite(&cfg).unwrap();
        let b = dynamics_suite(&cfg).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.max_error.to_bits(), y.max_error.to_bits());
        }
    }

    #[test]
    fn demo_flow_rows_conserve_energy() {
        let sz = CMat::from_row_slice(
            2,
            2,
            &[linalg::ONE, linalg::ZERO, linalg::ZERO, -linalg::ONE],
        );
        let rows = demo_flow(
            &sz,
            &[linalg::ONE, linalg::ZERO],
            1.0,
            200,
            10,
        )
        .unwrap();
        assert_eq!(rows.len(), 11);
        for r in &rows {
            assert!((r["energy"].as_f64().unwrap() - 1.0).abs() < 1e-10);
        }
    }
}
