//! Independent checks: nalgebra eigensolvers and matrix exponentials, and
//! hand-derived identities.

use canard_lab::bifurcation::{corner_classify, eigenvalues, CornerKind};
use canard_lab::stommel::{classify_regime, stommel_field, to_general_form, Regime, StommelParams, StommelState};
use canard_lab::{integrate, IntegrateOptions, PiecewiseField, PolyBranch, Preset, State, SystemSpec};
use nalgebra::{DMatrix, Matrix2, Vector2};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
    v.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    v
}

#[test]
fn eigenvalues_match_generic_solver() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..1000 {
        let a: f64 = rng.random_range(-5.0..5.0);
        let eps: f64 = rng.random_range(1e-4..2.0);
        let (p, m) = eigenvalues(a, eps);
        let ours = sorted(vec![p, m]);
        let theirs = sorted(Matrix2::new(a, -1.0, eps, 0.0).complex_eigenvalues().iter().copied().collect());
        for (o, t) in ours.iter().zip(&theirs) {
            assert!((o - t).norm() <= 1e-12 * (1.0 + t.norm()), "a={a} eps={eps}: {o} vs {t}");
        }
    }
}

#[test]
fn real_roots_match_companion_matrix() {
    let mut rng = StdRng::seed_from_u64(12);
    for _ in 0..200 {
        let n = rng.random_range(1..=5);
        let mut c: Vec<f64> = (0..=n).map(|_| rng.random_range(-3.0..3.0)).collect();
        c[n] = if rng.random_bool(0.5) { 1.0 } else { -1.0 } * rng.random_range(0.5..2.0);
        let p = PolyBranch::from_slice(&c);
        let mut comp = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            comp[(i, n - 1)] = -c[i] / c[n];
        }
        let eig = comp.complex_eigenvalues();
        let mut expected: Vec<f64> = eig.iter().filter(|z| z.im.abs() < 1e-7).map(|z| z.re).collect();
        expected.sort_by(f64::total_cmp);
        let ours = p.real_roots();
        // near-double roots may split or merge; compare only well separated cases
        let separated = expected.windows(2).all(|w| w[1] - w[0] > 1e-3)
            && eig.iter().all(|z| z.im.abs() < 1e-7 || z.im.abs() > 1e-3);
        if separated {
            assert_eq!(ours.len(), expected.len(), "{c:?}: {ours:?} vs {expected:?}");
            for (a, b) in ours.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-7, "{c:?}: {a} vs {b}");
            }
        }
        for r in ours {
            assert!(p.eval(r).abs() < 1e-9 * (1.0 + c.iter().map(|v| v.abs()).sum::<f64>() * r.abs().max(1.0).powi(n as i32)));
        }
    }
}

struct Linear {
    a: f64,
    eps: f64,
    lambda: f64,
}

impl PiecewiseField for Linear {
    fn switch_points(&self) -> Vec<f64> {
        Vec::new()
    }

    fn region_field(&self, _: usize, s: State) -> [f64; 2] {
        [-s.y + self.a * s.x, self.eps * (s.x - self.lambda)]
    }
}

#[test]
fn dp5_matches_matrix_exponential() {
    for (a, eps, lambda) in [(0.3, 0.2, 0.1), (-1.0, 0.5, -0.2), (2.5, 0.2, 0.0)] {
        let f = Linear { a, eps, lambda };
        let m = Matrix2::new(a, -1.0, eps, 0.0);
        // equilibrium (lambda, a lambda)
        let eq = Vector2::new(lambda, a * lambda);
        let x0 = Vector2::new(0.7, -0.4);
        let t = 6.0;
        let exact = eq + (m * t).exp() * (x0 - eq);
        let tr = integrate(&f, State::new(x0[0], x0[1]), t, &IntegrateOptions::new(1e-11)).unwrap();
        let end = tr.last();
        assert_eq!(end.t, t);
        let err = ((end.state.x - exact[0]).powi(2) + (end.state.y - exact[1]).powi(2)).sqrt();
        assert!(err < 1e-8 * (1.0 + exact.norm()), "a={a}: err {err}");
    }
}

#[test]
fn tolerance_refinement_converges() {
    let spec = SystemSpec::preset(Preset::Fig4, 0.2, 0.5);
    let end = |init: State, tol: f64| integrate(&spec, init, 10.0, &IntegrateOptions::new(tol)).unwrap().last().state;
    for init in [spec.equilibrium_state(), State::new(0.5, -1.0), State::new(-1.0, 3.0)] {
        let d = end(init, 1e-8).dist(&end(init, 1e-10));
        assert!(d <= 1e-6, "{init:?}: {d}");
    }
}

#[test]
fn stommel_field_is_conjugate() {
    let mut rng = StdRng::seed_from_u64(13);
    for _ in 0..1000 {
        let p = StommelParams::new(rng.random_range(1.01..4.0), rng.random_range(1e-3..1.0), rng.random_range(-1.0..2.0)).unwrap();
        let s = StommelState::new(rng.random_range(-3.0..4.0), rng.random_range(-5.0..5.0));
        let (spec, map) = to_general_form(&p);
        let pushed = map.push_vector(stommel_field(&p, s));
        let direct = spec.eval_field(map.to_general(s));
        assert!((pushed.0 - direct.0).abs() <= 1e-12 && (pushed.1 - direct.1).abs() <= 1e-12);
        let back = map.to_stommel(map.to_general(s));
        assert!((back.y - s.y).abs() < 1e-15 && (back.mu - s.mu).abs() < 1e-15);
    }
}

#[test]
fn stommel_critical_manifold_maps_onto_graph() {
    let p = StommelParams::new(1.7, 0.05, 1.0).unwrap();
    let (spec, map) = to_general_form(&p);
    for i in 0..200 {
        let y = -2.0 + 5.0 * i as f64 / 199.0;
        let mu = if y < 1.0 { (1.0 + p.k) * y - p.k * y * y } else { y + p.k * (y - 1.0) * y };
        let q = map.to_general(StommelState::new(y, mu));
        assert!((q.y - spec.f_value(q.x)).abs() <= 1e-12, "y={y}");
    }
}

#[test]
fn stommel_regime_agrees_with_corner_classification() {
    let mut rng = StdRng::seed_from_u64(14);
    for _ in 0..100 {
        let p = StommelParams::new(rng.random_range(1.001..3.0), rng.random_range(1e-4..0.5), 1.0).unwrap();
        let want = match corner_classify(&to_general_form(&p).0).kind {
            CornerKind::HopfLike => Regime::Canard,
            CornerKind::SuperExplosion => Regime::SuperExplosion,
            CornerKind::Degenerate => Regime::Degenerate,
        };
        assert_eq!(classify_regime(&p).regime, want, "{p:?}");
        assert_eq!(to_general_form(&p).0.lambda(), 0.0);
    }
}
