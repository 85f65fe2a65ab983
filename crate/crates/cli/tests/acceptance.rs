//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Criteria that cannot hold as stated are still implemented literally; their
//! tests are `#[ignore]`d with the reason and can be run with
//! `cargo test --test acceptance -- --include-ignored`.

use std::time::Instant;

use flowlab_core::algebra::{matrix_unit, NestAlgebra};
use flowlab_core::cocycle_tools::decompose;
use flowlab_core::dyson::{
    closed_form_cocycle, dyson_cocycle, max_defect_on_grid, ode_cocycle, perturbation_distance_bounds, Cocycle,
    DEFAULT_DYSON_NODES,
};
use flowlab_core::expm::matrix_exponential;
use flowlab_core::flow::{certified_growth, generator_superop, symmetric_grid, CocycleMethod, Flow};
use flowlab_core::inner::{
    automorphism_similarity, derivation_space, derivation_superop, inner_derivation_solve, relate_flows,
};
use flowlab_core::linalg::{checked_inverse, C64};
use flowlab_core::sample::{
    corpus_rng, perturbation_case, random_element, random_hermitian, random_in_algebra, random_nest,
    roughened_cocycle, PerturbationCase,
};
use flowlab_core::smoothing::{
    analytic_smooth, gaussian_weight_integral, gaussian_weight_integral_quadrature, smoothing_convergence_profile,
};
use flowlab_core::superop::{SuperOp, SuperOpNormKind};
use rand::Rng;

const SEED: u64 = 20_240_601;

fn verdict(id: u32, title: &str, pass: bool, detail: String) -> bool {
    println!("{} criterion {id} ({title}): {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn corpus(count: usize, seed: u64) -> Vec<PerturbationCase> {
    let mut rng = corpus_rng(seed);
    (0..count).map(|_| perturbation_case(&mut rng, 2..=5, 1.5)).collect()
}

fn i() -> C64 {
    C64::new(0.0, 1.0)
}

#[test]
fn criterion_1_cocycle_law() {
    let start = Instant::now();
    let grid = symmetric_grid(2.0, 0.5);
    let mut worst = [0.0f64; 3];
    for case in corpus(200, SEED) {
        let flow = Flow::inner(case.generator()).unwrap();
        let cocycles = [
            Cocycle::ClosedForm {
                h: case.h.clone(),
                p: case.p.clone(),
            },
            Cocycle::dyson_for_range(flow.clone(), case.p.clone(), 4.0, 1e-15).unwrap(),
            Cocycle::Ode {
                flow: flow.clone(),
                p: case.p.clone(),
                steps_per_unit: 1000,
            },
        ];
        for (k, u) in cocycles.iter().enumerate() {
            worst[k] = worst[k].max(max_defect_on_grid(&flow, u, &grid).unwrap().max());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let max = worst.iter().cloned().fold(0.0, f64::max);
    let pass = max < 1e-8 && secs < 120.0;
    assert!(verdict(
        1,
        "cocycle law",
        pass,
        format!(
            "max defect closed_form {:.2e}, dyson {:.2e}, ode {:.2e} (< 1e-8); {secs:.1} s (< 120 s)",
            worst[0], worst[1], worst[2]
        )
    ));
}

#[test]
fn criterion_2_method_triangle() {
    let times = symmetric_grid(2.0, 0.25);
    let mut worst = 0.0f64;
    for case in corpus(200, SEED) {
        let flow = Flow::inner(case.generator()).unwrap();
        for &t in &times {
            let closed = closed_form_cocycle(&case.h, &case.p, t).unwrap();
            let dyson = dyson_cocycle(&flow, &case.p, t, 20, DEFAULT_DYSON_NODES).unwrap().u;
            let ode = ode_cocycle(&flow, &case.p, t, 2000).unwrap();
            worst = worst
                .max((&closed - &dyson).norm())
                .max((&closed - &ode).norm())
                .max((&dyson - &ode).norm());
        }
    }
    assert!(verdict(
        2,
        "method triangle",
        worst < 1e-7,
        format!("max pairwise Frobenius gap {worst:.2e} (< 1e-7)")
    ));
}

#[test]
fn criterion_3_norm_estimate() {
    let mut rng = corpus_rng(SEED ^ 3);
    let times = [-2.0, -1.0, -0.5, 0.25, 0.5, 1.0, 1.5, 2.0];
    let mut total = 0usize;
    let mut failures = 0usize;
    let mut worst_ratio = 0.0f64;
    for k in 0..200 {
        // half the corpus unitary (Hermitian h), half triangular generators
        let case = if k % 2 == 0 {
            perturbation_case(&mut rng, 2..=5, 1.5)
        } else {
            let dim = rng.random_range(2..=4);
            let alg = NestAlgebra::upper_triangular(dim).unwrap();
            let h_norm = rng.random_range(0.1..=1.5);
            let p_norm = rng.random_range(0.1..=1.5);
            PerturbationCase {
                h: random_in_algebra(&mut rng, &alg, h_norm),
                p: random_in_algebra(&mut rng, &alg, p_norm),
            }
        };
        let flow = Flow::inner(case.generator()).unwrap();
        let bound = certified_growth(&flow, 2.0).unwrap();
        for &t in &times {
            let b = perturbation_distance_bounds(&flow, &case.p, t, &bound).unwrap();
            total += 1;
            worst_ratio = worst_ratio.max(b.lhs_cocycle / b.rhs);
            if !b.holds() {
                failures += 1;
            }
        }
    }
    assert!(verdict(
        3,
        "norm estimate",
        failures == 0,
        format!("{failures}/{total} violations; max lhs/rhs {worst_ratio:.4}")
    ));
}

#[test]
fn criterion_4_generator_shift() {
    let mut worst = 0.0f64;
    for case in corpus(100, SEED ^ 4) {
        let base = Flow::inner(case.generator()).unwrap();
        let perturbed = Flow::perturbed(base.clone(), case.p.clone(), CocycleMethod::Ode).unwrap();
        let h = 1e-2;
        let shift = generator_superop(&perturbed, h)
            .unwrap()
            .sub(&generator_superop(&base, h).unwrap())
            .unwrap();
        let expected = SuperOp::commutator(&case.p).scale(i());
        worst = worst.max(shift.sub(&expected).unwrap().matrix_frobenius());
    }
    assert!(verdict(
        4,
        "generator shift",
        worst < 1e-6,
        format!("max superoperator Frobenius error {worst:.2e} (< 1e-6)")
    ));
}

#[test]
fn criterion_5_similarity_constant() {
    let mut rng = corpus_rng(SEED ^ 5);
    let mut violations = 0usize;
    let mut worst_residual = 0.0f64;
    let mut worst_ratio = 0.0f64;
    let mut count = 0usize;
    while count < 500 {
        let dim = rng.random_range(2..=4);
        let alg = random_nest(&mut rng, dim);
        let x_norm = rng.random_range(0.01..0.45);
        let x = random_in_algebra(&mut rng, &alg, x_norm);
        let t0 = matrix_exponential(&x).unwrap();
        let sigma = SuperOp::conjugation(&t0, &checked_inverse(&t0).unwrap());
        let dist = sigma
            .sub(&SuperOp::identity(dim))
            .unwrap()
            .norm(SuperOpNormKind::FrobeniusInduced)
            .value;
        if dist >= 1.0 {
            continue;
        }
        count += 1;
        let sol = automorphism_similarity(&sigma, &alg).unwrap();
        let check = sol.bound_check.expect("distance below one");
        worst_residual = worst_residual.max(sol.residual);
        worst_ratio = worst_ratio.max(check.lhs / check.rhs);
        if !check.holds() {
            violations += 1;
        }
    }
    let pass = violations == 0 && worst_residual < 1e-8;
    assert!(verdict(
        5,
        "similarity constant",
        pass,
        format!("{violations}/500 bound violations, max lhs/rhs {worst_ratio:.3}, max residual {worst_residual:.2e}")
    ));
}

#[test]
#[ignore = "literal e^{tP} reconjugation is false for non-commuting flows; see README"]
fn criterion_6_every_derivation_inner() {
    let mut rng = corpus_rng(SEED ^ 6);
    let mut worst_solve = 0.0f64;
    for (n, dims) in [(3usize, vec![0usize, 1, 2, 3]), (4, vec![0, 2, 4])] {
        let alg = NestAlgebra::new(n, &dims).unwrap();
        let space = derivation_space(&alg);
        for _ in 0..100 {
            let coeffs: Vec<C64> = space
                .iter()
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let d = space
                .iter()
                .zip(&coeffs)
                .fold(nalgebra::DMatrix::zeros(alg.linear_dim(), alg.linear_dim()), |acc, (b, c)| acc + b * *c);
            let sol = inner_derivation_solve(&derivation_superop(&alg, &d).unwrap(), &alg).unwrap();
            worst_solve = worst_solve.max(sol.residual);
        }
    }
    let mut worst_literal = 0.0f64;
    let mut worst_cocycle = 0.0f64;
    for _ in 0..100 {
        let dim = rng.random_range(2..=4);
        let alg = random_nest(&mut rng, dim);
        let (na, nb) = (rng.random_range(0.1..1.5), rng.random_range(0.1..1.5));
        let ga = random_in_algebra(&mut rng, &alg, na);
        let gb = random_in_algebra(&mut rng, &alg, nb);
        let rel = relate_flows(&Flow::inner(ga).unwrap(), &Flow::inner(gb).unwrap(), &alg, 1e-2).unwrap();
        worst_literal = worst_literal.max(rel.literal_residual);
        worst_cocycle = worst_cocycle.max(rel.cocycle_residual);
    }
    let pass = worst_solve < 1e-8 && worst_literal < 1e-6;
    assert!(verdict(
        6,
        "every derivation inner",
        pass,
        format!(
            "max solve residual {worst_solve:.2e} (< 1e-8); literal reconjugation {worst_literal:.2e} (< 1e-6); \
             cocycle reconjugation {worst_cocycle:.2e}"
        )
    ));
}

#[test]
#[ignore = "stated reference 1.13804 differs from e^{1/4}sqrt(pi/4) = 1.137938 by 1e-4; see README"]
fn criterion_7_smoothing() {
    let closed = gaussian_weight_integral(4.0, 2.0).unwrap();
    let oracle = gaussian_weight_integral_quadrature(4.0, 2.0, 1e-14).unwrap();
    // e^{ξ²/(4n²)} √(π/n), the other candidate exponent
    let literal = (4.0f64 / 64.0).exp() * (std::f64::consts::PI / 4.0).sqrt();
    let exponent_ok = (oracle - closed).abs() < 1e-12 && (oracle - literal).abs() > 0.1;
    let reference_ok = (oracle - 1.13804).abs() < 1e-5;

    let mut rng = corpus_rng(SEED ^ 7);
    let mut worst_conv = 0.0f64;
    let mut bound_violations = 0usize;
    for _ in 0..50 {
        let dim = rng.random_range(2..=4);
        let g_norm = rng.random_range(0.1..=2.0);
        let h = random_hermitian(&mut rng, dim, g_norm);
        let flow = Flow::inner(&h * i()).unwrap();
        let a = random_element(&mut rng, dim, 1.0);
        let r = analytic_smooth(&flow, &a, 1e4, 0.0, 64).unwrap();
        worst_conv = worst_conv.max((&r.a_n - &a).norm() / a.norm());
        let m = certified_growth(&flow, 8.0).unwrap().m;
        for n in [1.0, 3.0, 10.0, 100.0] {
            let r = analytic_smooth(&flow, &a, n, 0.0, 64).unwrap();
            if r.a_n.norm() > m * a.norm() {
                bound_violations += 1;
            }
        }
    }

    let phase = Flow::inner(matrix_unit(2, 0, 0) * i()).unwrap();
    let rows = smoothing_convergence_profile(&phase, &matrix_unit(2, 0, 1), &[1.0, 10.0, 100.0, 1000.0], 0.0).unwrap();
    let expected = [0.2212, 0.02469, 0.002497, 0.0002500];
    let profile_ok = rows
        .iter()
        .zip(expected)
        .all(|(row, e)| format!("{:.3e}", row.diff_frobenius) == format!("{e:.3e}"));

    let pass = exponent_ok && reference_ok && worst_conv < 0.01 && bound_violations == 0 && profile_ok;
    assert!(verdict(
        7,
        "smoothing",
        pass,
        format!(
            "weight integral {oracle:.7} (closed form {closed:.7}, alternative exponent {literal:.7}, stated 1.13804); \
             convergence at n=1e4 {worst_conv:.2e}; norm bound violations {bound_violations}; profile match {profile_ok}"
        )
    ));
}

#[test]
#[ignore = "v = w^{-1} u α(w) preserves the roughness of u pointwise; see README"]
fn criterion_8_decomposition() {
    let mut rng = corpus_rng(SEED ^ 8);
    let grid = symmetric_grid(2.0, 0.5);
    let step = 1.0 / 64.0;
    let h_list = [8.0 * step, 4.0 * step, 2.0 * step, step];
    let mut worst_round_trip = 0.0f64;
    let mut worst_defect = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for _ in 0..20 {
        let case = perturbation_case(&mut rng, 2..=4, 1.5);
        let flow = Flow::inner(case.generator()).unwrap();
        let smooth = Cocycle::ClosedForm {
            h: case.h.clone(),
            p: case.p.clone(),
        };
        let rough = roughened_cocycle(&mut rng, &smooth, 4.5, step, 1e-3).unwrap();
        let (_, _, report) = decompose(&rough, &flow, 100.0, 64, 0.5, &h_list, &grid).unwrap();
        worst_round_trip = worst_round_trip.max(report.round_trip);
        worst_defect = worst_defect.max(report.defect_v);
        worst_ratio = worst_ratio.max(report.stability_v / report.stability_u);
    }
    let pass = worst_round_trip < 1e-9 && worst_defect < 1e-8 && worst_ratio <= 0.1;
    assert!(verdict(
        8,
        "cocycle decomposition",
        pass,
        format!(
            "round trip {worst_round_trip:.2e} (< 1e-9); defect(v) {worst_defect:.2e} (< 1e-8); \
             max stability(v)/stability(u) {worst_ratio:.3} (<= 0.1)"
        )
    ));
}

#[test]
fn criterion_9_harness() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let start = Instant::now();
    let first = flowlab_cli::verify_and_write(1, flowlab_cli::Level::Quick, dirs[0].path(), false).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    flowlab_cli::verify_and_write(1, flowlab_cli::Level::Quick, dirs[1].path(), false).unwrap();
    flowlab_cli::verify_and_write(1, flowlab_cli::Level::Quick, dirs[2].path(), true).unwrap();

    let read = |k: usize, name: &str| std::fs::read(dirs[k].path().join(name)).unwrap();
    let untimed_identical = ["verify.csv", "coverage.csv", "summary.json"]
        .iter()
        .all(|name| read(0, name) == read(1, name));
    let timed_tables_identical = ["verify.csv", "coverage.csv"].iter().all(|name| read(0, name) == read(2, name));
    let covered = first.uncovered().is_empty();
    let pass = elapsed < 60.0 && untimed_identical && timed_tables_identical && covered;
    assert!(verdict(
        9,
        "verify harness",
        pass,
        format!(
            "quick suite {elapsed:.1} s (< 60); byte-identical reports {untimed_identical}; \
             timed tables identical {timed_tables_identical}; all operations covered {covered}; \
             property verdicts {}/{} pass",
            first.properties.iter().filter(|p| p.pass).count(),
            first.properties.len()
        )
    ));
}
