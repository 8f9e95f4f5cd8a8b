//! Acceptance suite: every exit criterion runs at its pinned tolerance and
//! prints one pass/fail line. Run with `--nocapture` to see the lines for
//! passing criteria too:
//!
//!     cargo test --release -p projkahler --test acceptance -- --nocapture

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use projkahler::config::{HamiltonianSpec, RunConfig};
use projkahler::crossed::{
    build_covariant, dual_action, first_crossed_product, second_level, Flavor, ModelSpace,
};
use projkahler::duality::verify_duality;
use projkahler::line::{ccr_check, fourier_intertwine_check, LineContext, LineGrid, LineOpKind};
use projkahler::report::Check;
use projkahler::{linalg, suites};
use std::time::Instant;

type CMat = DMatrix<C64>;

fn announce(criterion: &str, checks: &[Check]) {
    let pass = checks.iter().all(|c| c.pass);
    let worst = checks
        .iter()
        .max_by(|a, b| (a.max_error / a.tolerance).total_cmp(&(b.max_error / b.tolerance)));
    let detail = worst
        .map(|c| format!("worst {}: {:.3e} (tol {:.1e})", c.name, c.max_error, c.tolerance))
        .unwrap_or_default();
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    for c in checks {
        assert!(
            c.pass,
            "criterion {criterion}: check {} failed with {:.3e} > {:.3e}",
            c.name, c.max_error, c.tolerance
        );
    }
}

fn pick<'a>(checks: &'a [Check], names: &[&str]) -> Vec<Check> {
    checks
        .iter()
        .filter(|c| names.contains(&c.name.as_str()))
        .cloned()
        .collect::<Vec<_>>()
}

fn default_cfg() -> RunConfig {
    RunConfig::default()
}

#[test]
fn criterion_01_star_product_isomorphism() {
    let started = Instant::now();
    let checks = suites::star_suite(&default_cfg()).unwrap();
    let c = pick(&checks, &["star-matches-operator-product"]);
    assert_eq!(c.len(), 1);
    announce("1 (star product = operator product, n in 2..4)", &c);
    assert!(
        started.elapsed().as_secs() < 30,
        "runtime budget exceeded: {:?}",
        started.elapsed()
    );
}

#[test]
fn criterion_02_commutator_is_sqrt_minus_one_poisson() {
    let checks = suites::star_suite(&default_cfg()).unwrap();
    let c = pick(&checks, &["commutator-is-i-poisson"]);
    assert_eq!(c.len(), 1);
    announce("2 (commutator = sqrt(-1)·Poisson pointwise)", &c);
}

#[test]
fn criterion_03_cstar_norm_vs_singular_values() {
    let started = Instant::now();
    let checks = suites::star_suite(&default_cfg()).unwrap();
    let c = pick(&checks, &["sup-norm-matches-singular-value"]);
    assert_eq!(c.len(), 1);
    announce("3 (sup norm = largest singular value, rel 2e-3)", &c);
    assert!(
        started.elapsed().as_secs() < 60,
        "runtime budget exceeded: {:?}",
        started.elapsed()
    );
}

#[test]
fn criterion_04_commutant_and_bicommutant() {
    let checks = suites::star_suite(&default_cfg()).unwrap();
    let c = pick(
        &checks,
        &[
            "commutant-dimensions-match-matrix-side",
            "bicommutant-projector-deviation",
        ],
    );
    assert_eq!(c.len(), 2);
    announce("4 (commutant dims + double-commutant stability)", &c);
}

#[test]
fn criterion_05_flow_structure() {
    let checks = suites::dynamics_suite(&default_cfg()).unwrap();
    let c = pick(
        &checks,
        &[
            "beta-leibniz-rule",
            "pullback-group-law",
            "field-map-is-lie-morphism",
            "field-kernel-is-scalars",
        ],
    );
    assert_eq!(c.len(), 4);
    announce("5 (Leibniz, group law, Lie morphism with scalar kernel)", &c);
}

#[test]
fn criterion_06_covariance_of_all_flavors() {
    let cfg = default_cfg();
    let h = cfg.hamiltonian_matrix().unwrap();
    let model = ModelSpace::new(2, &h, 128, 8).unwrap();
    let mut checks = Vec::new();
    for flavor in [Flavor::Ad, Flavor::Left, Flavor::Right] {
        let cs = build_covariant(flavor, &model, f64::INFINITY).unwrap();
        checks.push(Check::new(
            &format!("covariance-{flavor:?}"),
            "covariant-system",
            cs.covariance_residual,
            1e-6,
        ));
    }
    announce("6 (covariance identity for ad/left/right systems)", &checks);
}

#[test]
fn criterion_07_dual_action_and_hat_system_clauses() {
    let cfg = default_cfg();
    let h = cfg.hamiltonian_matrix().unwrap();
    let model = ModelSpace::new(2, &h, 128, 8).unwrap();
    let cs = build_covariant(Flavor::Left, &model, 1e-6).unwrap();
    let l1 = first_crossed_product(&model, &cs).unwrap();
    let da = dual_action(&model, &l1, 1.0).unwrap();
    let sl = second_level(&model, &cs).unwrap();
    let mut checks = vec![
        Check::new("dual-action-kills-pi", "dual-action", da.kills_pi, 1e-6),
        Check::new("dual-action-on-lambda", "dual-action", da.on_lambda, 1e-6),
    ];
    for (name, r) in sl.checks() {
        checks.push(Check::new(name, "hat-system", r, 1e-6));
    }
    announce("7 (dual action + hat-system identities, five clauses)", &checks);
}

#[test]
fn criterion_08_line_calculus() {
    let ctx = LineContext::new(LineGrid::new(128).unwrap());
    let mut checks = vec![
        Check::new("line-ccr", "ccr", ccr_check(&ctx, 8).unwrap(), 1e-6),
        Check::new(
            "fourier-intertwine",
            "fourier",
            fourier_intertwine_check(&ctx, 8).unwrap(),
            1e-6,
        ),
    ];
    let a = ctx.build(LineOpKind::Lowering).matrix;
    let adag = ctx.build(LineOpKind::Raising).matrix;
    let q = ctx.interior_modes(8).unwrap();
    let m = q.ncols();
    let ladder = linalg::frob_norm(
        &(q.adjoint() * linalg::commutator(&a, &adag) * q - CMat::identity(m, m)),
    );
    checks.push(Check::new("ladder-ccr", "ccr", ladder, 1e-6));

    // non-increasing residuals from K = 64 to 256 up to rounding saturation
    let floor = 1e-10;
    let mut seq = Vec::new();
    for k in [64usize, 128, 256] {
        let c = LineContext::new(LineGrid::new(k).unwrap());
        seq.push(ccr_check(&c, 8.min(k / 4 - 1)).unwrap().max(floor));
    }
    let monotone = seq[1] <= seq[0] && seq[2] <= seq[1];
    checks.push(Check::flag("ccr-non-increasing-in-k", "refinement", monotone));
    announce("8 (line calculus: ccr, intertwine, ladder pair)", &checks);
}

#[test]
fn criterion_09_duality_end_to_end() {
    let started = Instant::now();
    let mut checks = Vec::new();

    let run = |label: &str, n: usize, h: &CMat, tol_iso: f64, checks: &mut Vec<Check>| {
        let model = ModelSpace::new(n, h, 128, 8).unwrap();
        let report = verify_duality(&model).unwrap();
        for (name, value, tol) in report.checks() {
            let tol = if name == "structure-constant-deviation" {
                tol_iso
            } else {
                tol
            };
            checks.push(Check::new(&format!("{label}/{name}"), "duality", value, tol));
        }
        checks.push(Check::flag(&format!("{label}/pass"), "duality", report.pass));
    };

    let sz = CMat::from_row_slice(
        2,
        2,
        &[linalg::ONE, linalg::ZERO, linalg::ZERO, -linalg::ONE],
    );
    run("pauli-z-n2", 2, &sz, 1e-5, &mut checks);

    let cfg_rand2 = RunConfig {
        hamiltonian: HamiltonianSpec::RandomHermitian,
        seed: 41,
        ..default_cfg()
    };
    run(
        "random-n2",
        2,
        &cfg_rand2.hamiltonian_matrix().unwrap(),
        1e-5,
        &mut checks,
    );

    let cfg_rand3 = RunConfig {
        hamiltonian: HamiltonianSpec::RandomHermitian,
        seed: 43,
        n: 3,
        ..default_cfg()
    };
    run(
        "random-n3",
        3,
        &cfg_rand3.hamiltonian_matrix().unwrap(),
        1e-5,
        &mut checks,
    );

    // degenerate flow: everything collapses exactly
    run("zero-flow", 2, &CMat::zeros(2, 2), 1e-8, &mut checks);

    announce("9 (duality chain end to end, four flows)", &checks);
    assert!(
        started.elapsed().as_secs() < 120,
        "runtime budget exceeded: {:?}",
        started.elapsed()
    );
}

#[test]
fn criterion_10_flow_integration() {
    let checks = suites::dynamics_suite(&default_cfg()).unwrap();
    let c = pick(
        &checks,
        &[
            "integrator-fourth-order-ratio",
            "flow-energy-drift",
            "flow-period-return",
        ],
    );
    assert_eq!(c.len(), 3);
    announce("10 (fourth-order flow integration on the sphere)", &c);
}
