//! Stage-one solvers: descent on the symmetric unitary manifold,
//! relax-then-project, per-group block descent, and diagonal phases.

mod util;

use bdris_core::channel::ScenarioConfig;
use bdris_core::leakage::{
    direct_interference_power, il_quadratic_form, interference_leakage, relaxed_min_il, QuadMode,
};
use bdris_core::linalg::{crandn, frob, random_unitary, seeded_rng, TOL_UNITARY};
use bdris_core::optim::*;
use ndarray::Array2;
use ndarray_linalg::c64;

fn assert_monotone(trace: &[f64], rel_tol: f64) {
    for w in trace.windows(2) {
        assert!(
            w[1] <= w[0] * (1.0 + rel_tol) + 1e-300,
            "trace increased: {:e} -> {:e}",
            w[0],
            w[1]
        );
    }
}

// ---------- architecture and options plumbing ----------

#[test]
fn architecture_string_round_trip() {
    for (s, a) in [
        ("fully", Architecture::Fully),
        ("group:4", Architecture::Group(4)),
        ("diagonal", Architecture::Diagonal),
        ("relaxed", Architecture::RelaxedSymmetric),
    ] {
        assert_eq!(s.parse::<Architecture>().unwrap(), a);
        assert_eq!(a.to_string(), s);
    }
    assert!("grp".parse::<Architecture>().is_err());
    assert!("group:0".parse::<Architecture>().is_err());
    assert!("group:x".parse::<Architecture>().is_err());
}

#[test]
fn scattering_validation_accepts_each_architecture_and_rejects_impostors() {
    let m = 6;
    let mut rng = seeded_rng(1);
    let q = random_unitary(m, &mut rng).unwrap();
    let theta_full = q.dot(&q.t());
    ScatteringMatrix { theta: theta_full.clone(), architecture: Architecture::Fully }
        .validate(TOL_UNITARY)
        .unwrap();

    // unitary but not symmetric fails the fully-connected contract
    ScatteringMatrix { theta: q.clone(), architecture: Architecture::Fully }
        .validate(TOL_UNITARY)
        .unwrap_err();

    // diagonal phases
    let mut diag = Array2::<c64>::zeros((m, m));
    for i in 0..m {
        diag[(i, i)] = c64::from_polar(1.0, 0.3 * i as f64);
    }
    ScatteringMatrix { theta: diag.clone(), architecture: Architecture::Diagonal }
        .validate(TOL_UNITARY)
        .unwrap();
    // off-diagonal energy breaks the diagonal contract
    let mut leaky = diag.clone();
    leaky[(0, 1)] = c64::new(0.1, 0.0);
    ScatteringMatrix { theta: leaky, architecture: Architecture::Diagonal }
        .validate(TOL_UNITARY)
        .unwrap_err();
    // a diagonal matrix is also a valid group(1) and a valid full surface
    ScatteringMatrix { theta: diag.clone(), architecture: Architecture::Group(1) }
        .validate(TOL_UNITARY)
        .unwrap();
    ScatteringMatrix { theta: diag, architecture: Architecture::Fully }
        .validate(TOL_UNITARY)
        .unwrap();

    // block-diagonal from two 3x3 symmetric unitary blocks
    let q1 = random_unitary(3, &mut rng).unwrap();
    let q2 = random_unitary(3, &mut rng).unwrap();
    let mut block = Array2::<c64>::zeros((m, m));
    block.slice_mut(ndarray::s![0..3, 0..3]).assign(&q1.dot(&q1.t()));
    block.slice_mut(ndarray::s![3..6, 3..6]).assign(&q2.dot(&q2.t()));
    ScatteringMatrix { theta: block.clone(), architecture: Architecture::Group(3) }
        .validate(TOL_UNITARY)
        .unwrap();
    // same matrix fails as group(2): the blocks straddle the cut
    ScatteringMatrix { theta: block.clone(), architecture: Architecture::Group(2) }
        .validate(TOL_UNITARY)
        .unwrap_err();
    // group size must divide m
    ScatteringMatrix { theta: block, architecture: Architecture::Group(4) }
        .validate(TOL_UNITARY)
        .unwrap_err();

    // relaxed: symmetric with trace cap, unitarity not required
    let sym = Array2::<c64>::eye(m).mapv(|z| z * 0.5);
    ScatteringMatrix { theta: sym, architecture: Architecture::RelaxedSymmetric }
        .validate(TOL_UNITARY)
        .unwrap();
    let hot = Array2::<c64>::eye(m).mapv(|z| z * 2.0);
    ScatteringMatrix { theta: hot, architecture: Architecture::RelaxedSymmetric }
        .validate(TOL_UNITARY)
        .unwrap_err();
}

#[test]
fn options_validation_catches_bad_controls() {
    OptimizerOptions::default().validate().unwrap();
    OptimizerOptions::group_default().validate().unwrap();
    OptimizerOptions::diag_default().validate().unwrap();
    for bad in [
        OptimizerOptions { max_iters: 0, ..Default::default() },
        OptimizerOptions { rel_tol: 0.0, ..Default::default() },
        OptimizerOptions { backtrack_factor: 1.0, ..Default::default() },
        OptimizerOptions { backtrack_factor: 0.0, ..Default::default() },
        OptimizerOptions { armijo_c: -1.0, ..Default::default() },
        OptimizerOptions { mu0: Some(0.0), ..Default::default() },
    ] {
        assert!(bad.validate().is_err());
    }
}

// ---------- manifold gradient ----------

#[test]
fn manifold_gradient_matches_finite_differences() {
    let cfg = util::reference_config(8);
    let ch = util::draw(&cfg, 3);
    let mut rng = seeded_rng(4);
    let q = random_unitary(8, &mut rng).unwrap();
    let grad = mo_gradient(&q, &ch).unwrap();

    let f = |qq: &Array2<c64>| -> f64 {
        let theta = qq.dot(&qq.t());
        interference_leakage(&ch, &theta).unwrap()
    };
    let e = crandn(&mut rng, 8, 8);
    let t = 1e-6;
    let qp = &q + &e.mapv(|z| z * t);
    let qm = &q - &e.mapv(|z| z * t);
    let numeric = (f(&qp) - f(&qm)) / (2.0 * t);
    // first-order model: df = 2 Re <grad, E>
    let analytic: f64 = 2.0
        * grad
            .iter()
            .zip(e.iter())
            .map(|(g, ee)| (g.conj() * ee).re)
            .sum::<f64>();
    let rel = (numeric - analytic).abs() / numeric.abs().max(1e-12);
    assert!(rel < 1e-5, "gradient mismatch: numeric {:e}, analytic {:e}", numeric, analytic);
}

#[test]
fn manifold_gradient_requires_a_unitary_point() {
    let cfg = util::reference_config(6);
    let ch = util::draw(&cfg, 3);
    let q = Array2::<c64>::eye(6).mapv(|z| z * 2.0);
    assert!(mo_gradient(&q, &ch).is_err());
}

// ---------- manifold descent ----------

#[test]
fn manifold_descent_is_monotone_feasible_and_effective() {
    let cfg = util::reference_config(12);
    let ch = util::draw(&cfg, 7);
    let q0 = random_unitary(12, &mut seeded_rng(8)).unwrap();
    let res = minimize_il_mo(&ch, &q0, &OptimizerOptions::default()).unwrap();

    assert_monotone(&res.trace.il_values, 1e-12);
    res.scattering.validate(TOL_UNITARY).unwrap();
    assert_eq!(res.scattering.architecture, Architecture::Fully);
    // the factorization the result reports is the scattering matrix
    let recon = res.q.dot(&res.q.t());
    assert!(frob(&(&recon - &res.scattering.theta)) < 1e-8);

    let direct = direct_interference_power(&ch);
    let fin = res.trace.final_il();
    assert!(fin < 0.8 * direct, "expected a clear reduction: {:e} vs {:e}", fin, direct);
    assert!(res.trace.iterations >= 10);
    assert_eq!(res.trace.il_values.len(), res.trace.iterations + 1);
    // stationarity measure is reported and small after convergence
    assert!(res.stationarity.is_finite());
    let il_direct = interference_leakage(&ch, &res.scattering.theta).unwrap();
    assert!((il_direct - fin).abs() <= 1e-6 * fin.max(1e-300));
}

#[test]
fn manifold_descent_rejects_bad_starts_and_budgets() {
    let cfg = util::reference_config(6);
    let ch = util::draw(&cfg, 2);
    let not_unitary = Array2::<c64>::eye(6).mapv(|z| z * 1.5);
    assert!(minimize_il_mo(&ch, &not_unitary, &OptimizerOptions::default()).is_err());
    let q0 = random_unitary(6, &mut seeded_rng(1)).unwrap();
    let bad = OptimizerOptions { max_iters: 0, ..Default::default() };
    assert!(minimize_il_mo(&ch, &q0, &bad).is_err());
    let wrong_size = random_unitary(5, &mut seeded_rng(1)).unwrap();
    assert!(minimize_il_mo(&ch, &wrong_size, &OptimizerOptions::default()).is_err());
}

#[test]
fn manifold_descent_is_deterministic() {
    let cfg = util::reference_config(8);
    let ch = util::draw(&cfg, 5);
    let q0 = random_unitary(8, &mut seeded_rng(6)).unwrap();
    let opts = OptimizerOptions { max_iters: 200, ..Default::default() };
    let a = minimize_il_mo(&ch, &q0, &opts).unwrap();
    let b = minimize_il_mo(&ch, &q0, &opts).unwrap();
    assert_eq!(a.trace.il_values.len(), b.trace.il_values.len());
    assert!(frob(&(&a.scattering.theta - &b.scattering.theta)) == 0.0);
}

// ---------- relax-then-project ----------

#[test]
fn rtp_diagnostics_satisfy_the_stationarity_system() {
    for m in [12usize, 16] {
        let cfg = util::reference_config(m);
        let ch = util::draw(&cfg, 9);
        let (sc, diag) = minimize_il_rtp(&ch, &OptimizerOptions::default()).unwrap();
        sc.validate(TOL_UNITARY).unwrap();
        assert!(diag.lambda >= 0.0);
        assert!(diag.kkt_residual_rel < 1e-6, "KKT residual {:e}", diag.kkt_residual_rel);
        let cap = m as f64;
        if diag.lambda == 0.0 {
            assert!(diag.x_norm2 <= cap * (1.0 + 1e-6));
        } else {
            assert!((diag.x_norm2 - cap).abs() <= 1e-6 * cap, "x_norm2 {} vs cap {}", diag.x_norm2, cap);
        }
        // the relaxed point is symmetric and no worse than the direct channels
        assert!(frob(&(&diag.theta_relaxed - &diag.theta_relaxed.t())) < 1e-8);
        let direct = direct_interference_power(&ch);
        assert!(diag.relaxed_il <= direct * (1.0 + 1e-9));
        // with the multiplier inactive the solve matches the unconstrained
        // symmetric least squares; when the trace ball binds it can only do worse
        let unc = relaxed_min_il(&ch, true).unwrap().residual_il;
        if diag.lambda == 0.0 {
            assert!(
                (diag.relaxed_il - unc).abs() <= 1e-6 * direct,
                "relaxed il {:e} vs unconstrained {:e}",
                diag.relaxed_il,
                unc
            );
        } else {
            assert!(diag.relaxed_il >= unc - 1e-12 * direct.max(1.0));
        }
        // projection cannot beat the relaxation
        let projected = interference_leakage(&ch, &sc.theta).unwrap();
        assert!(projected >= diag.relaxed_il - 1e-12);
    }
}

#[test]
fn rtp_hits_the_inactive_multiplier_branch_on_weak_direct_channels() {
    // a steep direct-path exponent shrinks h, so the unconstrained
    // minimum-norm solution fits inside the trace ball
    let cfg = ScenarioConfig { alpha_direct: 6.0, ..util::reference_config(12) };
    let ch = util::draw(&cfg, 3);
    let (_sc, diag) = minimize_il_rtp(&ch, &OptimizerOptions::default()).unwrap();
    assert_eq!(diag.lambda, 0.0);
    assert!(diag.x_norm2 < 12.0);
}

// ---------- group descent ----------

#[test]
fn group_descent_is_monotone_feasible_and_blockwise() {
    let cfg = util::reference_config(8);
    let ch = util::draw(&cfg, 12);
    for (mg, inner) in [(2usize, GroupInner::Mo), (4, GroupInner::Mo), (4, GroupInner::Rtp)] {
        let (sc, trace) =
            minimize_il_group(&ch, mg, inner, &OptimizerOptions::group_default()).unwrap();
        sc.validate(TOL_UNITARY).unwrap();
        assert_eq!(sc.architecture, Architecture::Group(mg));
        assert_monotone(&trace.il_values, 1e-9);
        // entry 0 is the identity initialization
        let eye_il = interference_leakage(&ch, &Array2::<c64>::eye(8)).unwrap();
        assert!((trace.il_values[0] - eye_il).abs() <= 1e-9 * eye_il);
        assert!(trace.final_il() <= eye_il);
        // the reported leakage matches the returned matrix
        let il = interference_leakage(&ch, &sc.theta).unwrap();
        assert!((il - trace.final_il()).abs() <= 1e-8 * il.max(1e-300));
    }
}

#[test]
fn group_sweeps_keep_helping_after_the_first_pass() {
    // the blocks couple through the shared leakage, so a single sweep is
    // not a fixed point: the second sweep must still improve measurably
    let cfg = util::reference_config(8);
    let ch = util::draw(&cfg, 2);
    let (_, trace) =
        minimize_il_group(&ch, 4, GroupInner::Mo, &OptimizerOptions::group_default()).unwrap();
    assert!(trace.il_values.len() > 2, "solver stopped after one sweep");
    let first = trace.il_values[1];
    let second = trace.il_values[2];
    assert!(
        second < first * (1.0 - 1e-3),
        "second sweep should improve: {:e} -> {:e}",
        first,
        second
    );
}

#[test]
fn group_size_must_divide_the_surface() {
    let cfg = util::reference_config(8);
    let ch = util::draw(&cfg, 1);
    assert!(minimize_il_group(&ch, 3, GroupInner::Mo, &OptimizerOptions::group_default()).is_err());
    assert!(minimize_il_group(&ch, 0, GroupInner::Mo, &OptimizerOptions::group_default()).is_err());
}

#[test]
fn whole_surface_group_matches_dedicated_manifold_quality() {
    // one group spanning the whole surface solves the same problem as the
    // dedicated manifold solver; allow solver-path slack but not much
    let cfg = util::reference_config(8);
    let ch = util::draw(&cfg, 14);
    let (_, gtrace) =
        minimize_il_group(&ch, 8, GroupInner::Mo, &OptimizerOptions::group_default()).unwrap();
    let q0 = random_unitary(8, &mut seeded_rng(15)).unwrap();
    let mo = minimize_il_mo(&ch, &q0, &OptimizerOptions::default()).unwrap();
    let (lo, hi) = (gtrace.final_il().min(mo.trace.final_il()), gtrace.final_il().max(mo.trace.final_il()));
    assert!(hi <= lo * 1.5 + 1e-12, "group({}) {:e} vs mo {:e}", 8, gtrace.final_il(), mo.trace.final_il());
}

// ---------- diagonal descent ----------

#[test]
fn diagonal_descent_is_monotone_unit_modulus_and_coordinatewise_optimal() {
    let cfg = ScenarioConfig { architecture: Architecture::Diagonal, ..util::reference_config(10) };
    let ch = util::draw(&cfg, 20);
    let (sc, trace) = minimize_il_diag(&ch, &OptimizerOptions::diag_default()).unwrap();
    sc.validate(TOL_UNITARY).unwrap();
    assert_eq!(sc.architecture, Architecture::Diagonal);
    assert_monotone(&trace.il_values, 1e-12);

    // at convergence no single phase move may help
    let form = il_quadratic_form(&ch, QuadMode::Diagonal).unwrap();
    let r0: ndarray::Array1<c64> = sc.theta.diag().to_owned();
    let base = form.eval(&r0).unwrap();
    for i in 0..10 {
        for step in 1..8 {
            let mut r = r0.clone();
            let ang = step as f64 * std::f64::consts::TAU / 8.0;
            r[i] = r[i] * c64::from_polar(1.0, ang);
            let moved = form.eval(&r).unwrap();
            assert!(
                moved >= base * (1.0 - 1e-7) - 1e-15,
                "coordinate {} improved by rotating {:.2} rad: {:e} -> {:e}",
                i,
                ang,
                base,
                moved
            );
        }
    }
}

#[test]
fn diagonal_descent_solves_the_single_element_case_globally() {
    // with one element the problem is a scalar phase; sweep a fine grid as
    // an independent oracle
    let cfg = ScenarioConfig {
        architecture: Architecture::Diagonal,
        ..util::sized_config(3, 2, 2, 1, 1)
    };
    let ch = util::draw(&cfg, 30);
    let (sc, trace) = minimize_il_diag(&ch, &OptimizerOptions::diag_default()).unwrap();
    let mut best = f64::INFINITY;
    for i in 0..3600 {
        let ang = i as f64 * std::f64::consts::TAU / 3600.0;
        let mut theta = Array2::<c64>::zeros((1, 1));
        theta[(0, 0)] = c64::from_polar(1.0, ang);
        best = best.min(interference_leakage(&ch, &theta).unwrap());
    }
    assert!(
        trace.final_il() <= best * (1.0 + 1e-5),
        "descent {:e} vs grid oracle {:e}",
        trace.final_il(),
        best
    );
    let il = interference_leakage(&ch, &sc.theta).unwrap();
    assert!((il - trace.final_il()).abs() <= 1e-9 * il.max(1e-300));
}
