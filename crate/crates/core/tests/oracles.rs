//! Worked examples checked against oracles computed independently of the library.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use siwalk::harness::{run_return_experiment, Engine, ExperimentConfig, Format, RuleSpec, WalkSpec};
use siwalk::linalg::{dot, Matrix, SymMatrix};
use siwalk::lyapunov::{build_radial_profile, phi_drift, phi_tilde, target_curve, PhiParams};
use siwalk::measure::{ratio, Atom, ExactMeasure, FiniteMeasure};
use siwalk::quadrature::adaptive_simpson;
use siwalk::transform::{
    construct_joint_transform_3d, joint_diagonalize, minimize_psi_diagonal, search_transform_general, SearchBudget,
};
use siwalk::walk::cap::{build_cap_system, cap_walk_step};
use siwalk::walk::{enumerate_distribution, simulate, trial_rng, FirstVisitRule};

use rand::Rng;

/// P(1-D SRW revisits 0 within 2n steps) = 1 − C(2n, n)/4ⁿ, with the ratio built as a running product.
fn srw_return_probability(two_n: usize) -> f64 {
    let n = two_n / 2;
    let mut p = 1.0f64;
    for k in 1..=n {
        p *= (2 * k - 1) as f64 / (2 * k) as f64;
    }
    1.0 - p
}

#[test]
fn one_dimensional_srw_returns() {
    let trials = 4000;
    let horizon = 10_000;
    let cfg = ExperimentConfig {
        walk: WalkSpec::Generic {
            measures: vec![FiniteMeasure::simple_random_walk(1)],
            rule: RuleSpec::Constant { index: 0 },
            engine: Engine::Definition,
        },
        trials,
        horizon,
        return_radius: 0.0,
        escape_radius: 1.0,
        seed: 123,
        out: None,
        format: Format::Csv,
    };
    let s = run_return_experiment(&cfg).unwrap();
    // exit happens at n = 1, so "returned" means a visit to 0 in steps 2..=T
    let p = srw_return_probability(horizon);
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    let got = s.aggregates.return_fraction.mean;
    assert!((got - p).abs() <= 3.0 * se, "frequency {got}, exact {p}, se {se}");
}

#[test]
fn phi_drift_matches_monte_carlo() {
    let mut rng = trial_rng(77, 0);
    for case in 0..20 {
        let d = 2 + case % 3;
        let atoms: Vec<Atom<f64>> = (0..4)
            .map(|_| Atom { point: (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(), weight: 0.25 })
            .collect();
        let mu = FiniteMeasure::new(d, atoms).unwrap();
        let p = PhiParams::new(rng.random_range(0.1..1.5), rng.random_range(1.5..4.0)).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-8.0..8.0)).collect();
        let exact = phi_drift(&mu, &x, &p);

        let base = phi_tilde(&x, &p);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = mu.sample(&mut rng);
            let y: Vec<f64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
            let v = phi_tilde(&y, &p) - base;
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
        assert!((exact - mean).abs() <= 4.0 * se + 1e-15, "case {case}: exact {exact}, mc {mean} ± {se}");
    }
}

#[test]
fn profile_derivatives_match_finite_differences() {
    let profile = build_radial_profile(3, 0.05, 4096).unwrap();
    let knots = profile.knots();
    let delta = 1e-6;
    let (mut worst_h, mut worst_psi) = (0.0f64, 0.0f64);
    for &r in &knots[1..knots.len() - 1] {
        let dh = (profile.big_h(r + delta) - profile.big_h(r - delta)) / (2.0 * delta);
        worst_h = worst_h.max((dh - profile.h(r)).abs());
        let dpsi = (profile.psi(r + delta) - profile.psi(r - delta)) / (2.0 * delta);
        worst_psi = worst_psi.max((dpsi - profile.dpsi(r)).abs());
    }
    assert!(worst_h <= 1e-6, "H' vs h: {worst_h:e}");
    assert!(worst_psi <= 1e-6, "psi' vs dpsi: {worst_psi:e}");
}

#[test]
fn profile_target_integral() {
    for d in 3..=8usize {
        let top = ((d - 1) as f64).sqrt();
        let v = adaptive_simpson(target_curve, 0.0, top, 1e-12).unwrap();
        assert!((v - top / d as f64).abs() <= 1e-8, "d={d}: {v}");
    }
}

#[test]
fn capital_phi_lower_bound_in_several_dimensions() {
    for d in 3..=5usize {
        let profile = build_radial_profile(d, 0.05, 4096).unwrap();
        profile.validate().unwrap();
        let top = ((d - 1) as f64).sqrt();
        let floor = (profile.b * ((d - 1) as f64).powf(-1.5) * 0.05 * 0.05).min(0.5);
        let n = 10_000;
        let min = (0..n).map(|i| profile.capital_phi(top * i as f64 / (n - 1) as f64).unwrap()).fold(f64::INFINITY, f64::min);
        assert!(min >= floor - 1e-6, "d={d}: min {min} < {floor}");
    }
}

#[test]
fn first_visit_law_matches_simulation() {
    let exact = [
        ExactMeasure::new(1, vec![(vec![1], ratio(1, 2)), (vec![-1], ratio(1, 2))]).unwrap(),
        ExactMeasure::new(1, vec![(vec![2], ratio(1, 3)), (vec![-1], ratio(2, 3))]).unwrap(),
    ];
    let law = enumerate_distribution(&exact, &FirstVisitRule::lattice(), 4).unwrap();
    let float = vec![
        FiniteMeasure::new(1, vec![Atom { point: vec![1.0], weight: 0.5 }, Atom { point: vec![-1.0], weight: 0.5 }])
            .unwrap(),
        FiniteMeasure::new(
            1,
            vec![Atom { point: vec![2.0], weight: 1.0 / 3.0 }, Atom { point: vec![-1.0], weight: 2.0 / 3.0 }],
        )
        .unwrap(),
    ];
    let rule = FirstVisitRule::new(&float).unwrap();
    let n = 1_000_000;
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    let mut rng = trial_rng(5, 0);
    for _ in 0..n {
        let t = simulate(&float, &rule, 4, &mut rng).unwrap();
        *counts.entry(t.positions[4][0] as i64).or_default() += 1;
    }
    for (x, p) in &law {
        let p = p.to_f64().unwrap();
        let f = *counts.get(&x[0]).unwrap_or(&0) as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((f - p).abs() <= 4.0 * se, "endpoint {x:?}: {f} vs {p}");
    }
    assert_eq!(counts.len(), law.len());
}

#[test]
fn cap_walk_second_moments_in_the_frame() {
    let caps = build_cap_system(3, std::f64::consts::PI / 5.0, &mut trial_rng(1, 0)).unwrap();
    let eps = 0.3;
    let x = vec![40.0, -15.0, 7.0];
    let cap = &caps.caps[caps.select(&x)];
    let frame: Vec<&Vec<f64>> = std::iter::once(&cap.center).chain(&cap.complement).collect();
    let n = 1_000_000;
    let mut rng = trial_rng(2, 0);
    let mut second = [[0.0f64; 3]; 3];
    let mut first = [0.0f64; 3];
    for _ in 0..n {
        let y = cap_walk_step(&x, &caps, eps, &mut rng);
        let z: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let c: Vec<f64> = frame.iter().map(|v| dot(&z, v)).collect();
        for i in 0..3 {
            first[i] += c[i];
            for j in 0..3 {
                second[i][j] += c[i] * c[j];
            }
        }
    }
    // η₀ = ±1, η_j ∈ {±1 w.p. ε/2 each, 0}: E η₀² = 1, E η_j² = ε, cross terms 0, Var(η_j²) = ε(1−ε)
    let expect = [1.0, eps, eps];
    let nf = n as f64;
    for i in 0..3 {
        assert!((first[i] / nf).abs() <= 4.0 * (expect[i] / nf).sqrt());
        for j in 0..3 {
            let m = second[i][j] / nf;
            if i == j {
                let var = if i == 0 { 0.0 } else { eps * (1.0 - eps) };
                assert!((m - expect[i]).abs() <= 4.0 * (var / nf).sqrt() + 1e-12, "E c{i}² = {m}");
            } else {
                let sd = (expect[i] * expect[j] / nf).sqrt();
                assert!(m.abs() <= 4.0 * sd, "E c{i}c{j} = {m}");
            }
        }
    }
}

fn random_spd3(rng: &mut impl Rng) -> SymMatrix<f64> {
    let g = Matrix::from_rows(&(0..3).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect::<Vec<_>>())
        .unwrap();
    let mut m = g.matmul(&g.transpose()).unwrap();
    for i in 0..3 {
        m[(i, i)] += 1e-3;
    }
    SymMatrix::new(m).unwrap()
}

#[test]
fn search_handles_three_dimensional_support_in_five_dimensions() {
    let mut rng = trial_rng(8, 0);
    for _ in 0..5 {
        let (a, b) = (random_spd3(&mut rng), random_spd3(&mut rng));
        assert!(construct_joint_transform_3d(&a, &b).unwrap().satisfies_trace_condition());
        let embed = |m: &SymMatrix<f64>| {
            let mut big = Matrix::zeros(5, 5);
            for i in 0..3 {
                for j in 0..3 {
                    big[(i + 1, j + 1)] = m.as_matrix()[(i, j)];
                }
            }
            SymMatrix::new(big).unwrap()
        };
        let found = search_transform_general(&[embed(&a), embed(&b)], SearchBudget::default()).unwrap();
        assert!(found.success, "origin {}", found.origin);
    }
}

#[test]
fn search_matches_diagonal_minimizer_on_commuting_families() {
    let mut rng = trial_rng(9, 0);
    for _ in 0..5 {
        let ms: Vec<SymMatrix<f64>> =
            (0..3).map(|_| SymMatrix::from_diag(&(0..4).map(|_| rng.random_range(0.1..10.0)).collect::<Vec<_>>())).collect();
        let q = joint_diagonalize(&ms, 1e-9).unwrap();
        let rotated: Vec<SymMatrix<f64>> =
            ms.iter().map(|m| SymMatrix::from_diag(&q.transpose().congruence(m).unwrap().diagonal())).collect();
        let Ok(diag) = minimize_psi_diagonal(&rotated, 200) else { continue };
        let general = search_transform_general(&ms, SearchBudget::default()).unwrap();
        assert!(general.best.unwrap().psi <= diag.psi + 1e-12);
    }
}
