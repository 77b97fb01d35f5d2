use canard_lab::bifurcation::{
    corner_classify, eigenvalues, fold_hopf, linear_part, nonexistence_threshold, CornerKind, Criticality,
};
use canard_lab::certificates::{
    build_w, check_coexistence, check_confinement, interior_lattice, subcritical_witness, superexplosion_witness,
};
use canard_lab::orbit::{find_grazing, find_periodic_orbit, locate_explosion, Classification, OrbitError, OrbitOptions};
use canard_lab::shadow::{shadow_compare, shadow_equality, ShadowKind};
use canard_lab::stommel::{classify_regime, simulate, stommel_field, to_general_form, Regime, StommelParams, StommelState};
use canard_lab::{integrate, IntegrateOptions, PolyBranch, Preset, Side, State, SystemSpec};
use nalgebra::Matrix2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = (bool, String);

fn fig4(lambda: f64) -> SystemSpec {
    SystemSpec::preset(Preset::Fig4, 0.2, lambda)
}

fn fig6(lambda: f64) -> SystemSpec {
    SystemSpec::preset(Preset::Fig6, 0.2, lambda)
}

fn class_at(spec: &SystemSpec) -> Option<Classification> {
    find_periodic_orbit(spec, &OrbitOptions::default()).ok().map(|o| o.classification)
}

fn corner_explosion() -> Outcome {
    let opts = OrbitOptions::default();
    let iv = match locate_explosion(&fig4(0.0145), 0.014, 0.015, 1e-4, 1.0, &opts) {
        Ok(iv) => iv,
        Err(e) => return (false, format!("locate_explosion: {e}")),
    };
    let inside = iv.lambda_lo > 0.0141 && iv.lambda_hi < 0.0143 && iv.lambda_hi - iv.lambda_lo <= 2e-4;
    let small = class_at(&fig4(0.01415));
    let head = class_at(&fig4(0.0142));
    let ok = inside
        && matches!(small, Some(Classification::SmallCycle | Classification::CanardWithoutHead))
        && head == Some(Classification::CanardWithHead);
    (
        ok,
        format!(
            "interval [{:.7}, {:.7}], lambda=0.01415 {:?}, lambda=0.0142 {:?}",
            iv.lambda_lo, iv.lambda_hi, small, head
        ),
    )
}

fn fold_explosion() -> Outcome {
    let opts = OrbitOptions::default();
    let iv = match locate_explosion(&fig4(1.595), 1.59, 1.60, 1e-4, 1.0, &opts) {
        Ok(iv) => iv,
        Err(e) => return (false, format!("locate_explosion: {e}")),
    };
    let inside = iv.lambda_lo > 1.5945 && iv.lambda_hi < 1.5965;
    let small = class_at(&fig4(1.596));
    let head = class_at(&fig4(1.595));
    let hopf = match fold_hopf(&fig4(1.6)) {
        Ok(h) => h,
        Err(e) => return (false, format!("fold_hopf: {e}")),
    };
    let corner = corner_classify(&fig4(0.0));
    let ok = inside
        && small == Some(Classification::SmallCycle)
        && head == Some(Classification::CanardWithHead)
        && (hopf.lambda_h - 1.6).abs() <= 1e-9
        && hopf.criticality == Criticality::Supercritical
        && corner.criticality == Criticality::Supercritical;
    (
        ok,
        format!(
            "interval [{:.7}, {:.7}], lambda=1.596 {:?}, lambda=1.595 {:?}, lambda_H={} {:?}, corner {:?}",
            iv.lambda_lo, iv.lambda_hi, small, head, hopf.lambda_h, hopf.criticality, corner.criticality
        ),
    )
}

fn super_explosion() -> Outcome {
    let r = corner_classify(&fig6(0.001));
    let opts = OrbitOptions::default();
    let amp = |l: f64| find_periodic_orbit(&fig6(l), &opts).map(|o| o.amplitude);
    match (amp(1e-3), amp(0.3)) {
        (Ok(a), Ok(b)) => (
            r.kind == CornerKind::SuperExplosion && r.criticality == Criticality::Supercritical && a >= 0.8 * b,
            format!("{:?} {:?}, amplitude {a:.4} at 1e-3 vs {b:.4} at 0.3", r.kind, r.criticality),
        ),
        (a, b) => (false, format!("orbit search failed: {a:?} / {b:?}")),
    }
}

fn criticality_matrix() -> Outcome {
    let opts = OrbitOptions::default();
    let mut notes = Vec::new();
    let mut ok = true;

    let a = corner_classify(&fig4(0.0));
    ok &= a.kind == CornerKind::HopfLike && a.criticality == Criticality::Supercritical;
    notes.push(format!("(-2, 0.32) {:?} {:?}", a.kind, a.criticality));

    let hopf_sub = SystemSpec::new(
        0.2,
        0.0,
        PolyBranch::from_slice(&[0.0, -0.3, 1.0]),
        PolyBranch::from_slice(&[0.0, 0.5, -0.25]),
    );
    let b = corner_classify(&hopf_sub);
    let coexist_at = [-0.002, -0.005]
        .into_iter()
        .find(|&l| check_coexistence(&hopf_sub.with_lambda(l), &opts).is_ok_and(|r| r.0.coexistence));
    ok &= b.kind == CornerKind::HopfLike && b.criticality == Criticality::Subcritical && coexist_at.is_some();
    notes.push(format!("(-0.3, 0.5) {:?} {:?} coexistence at {:?}", b.kind, b.criticality, coexist_at));

    let sup_sub = fig6(-0.05).with_left_branch(PolyBranch::from_slice(&[0.0, -0.5]));
    let c = corner_classify(&sup_sub);
    let w = subcritical_witness(&sup_sub, &opts);
    let verified = w.as_ref().is_ok_and(|w| w.verified());
    ok &= c.kind == CornerKind::SuperExplosion && c.criticality == Criticality::Subcritical && verified;
    notes.push(format!("(-0.5, 2) {:?} {:?} witness {}", c.kind, c.criticality, verified));

    let d = corner_classify(&fig6(0.0));
    let k = nonexistence_threshold(&fig6(0.0)).map(|n| n.k_threshold).unwrap_or(f64::NAN);
    let none = (0..10)
        .filter(|i| {
            let l = -k * (*i as f64 + 0.5) / 10.0;
            matches!(find_periodic_orbit(&fig6(l), &opts), Err(OrbitError::NoOrbit { .. }))
        })
        .count();
    ok &= d.kind == CornerKind::SuperExplosion && d.criticality == Criticality::Supercritical && none == 10;
    notes.push(format!("(-2, 2) {:?} {:?} no orbit at {none}/10", d.kind, d.criticality));
    (ok, notes.join("; "))
}

fn shadow_radial_bound() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0005);
    let mut worst: f64 = 0.0;
    let mut passed = 0;
    let mut errors = Vec::new();
    let mut n = 0;
    while n < 200 {
        let (a1, a2, a3) = (rng.random_range(0.1..2.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..-0.1));
        let (b1, b2) = (a1 + rng.random_range(0.1..2.0), rng.random_range(0.0..1.0));
        let h = PolyBranch::from_slice(&[0.0, a1, a2, a3]);
        let g = h.sub(&PolyBranch::from_slice(&[0.0, b1, 0.0, b2]));
        let eps = rng.random_range(0.05..0.5);
        let base = SystemSpec::new(eps, 0.0, g, h);
        let Ok(geo) = base.geometry() else { continue };
        let spec = base.with_lambda(rng.random_range(0.0..geo.x_m));
        if !spec.validate().is_valid() {
            continue;
        }
        n += 1;
        let y_c = rng.random_range(1e-3..3.0);
        match shadow_compare(&spec, &ShadowKind::ExtendH, y_c, 1e-6) {
            Ok(r) => {
                worst = worst.max(r.max_r_excess);
                if r.bounded && r.max_r_excess <= 1e-6 {
                    passed += 1;
                }
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    (
        passed == 200,
        format!("{passed}/200 bounded, max excess {worst:.3e}, errors {errors:?}"),
    )
}

fn eigen_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0006);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a: f64 = rng.random_range(-5.0..5.0);
        let eps: f64 = rng.random_range(1e-3..1.0);
        let (p, m) = eigenvalues(a, eps);
        let mut ours = [p, m];
        let mut theirs: Vec<_> = Matrix2::new(a, -1.0, eps, 0.0).complex_eigenvalues().iter().copied().collect();
        let key = |z: &num_complex::Complex64| (z.re, z.im);
        ours.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        theirs.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        for (o, t) in ours.iter().zip(&theirs) {
            worst = worst.max((o.re - t.re).abs().max((o.im - t.im).abs()));
        }
    }
    let spec = fig4(1.6);
    let lp = linear_part(spec.branch_derivative(1.6, Side::Right), 0.2, None);
    let s = 0.2f64.sqrt();
    let hopf_err = lp.mu_plus.re.abs().max(lp.mu_minus.re.abs()).max((lp.mu_plus.im.abs() - s).abs()).max((lp.mu_minus.im.abs() - s).abs());
    (
        worst <= 1e-12 && hopf_err <= 1e-10,
        format!("max error {worst:.2e} over 1000 cases, at lambda_H {hopf_err:.2e}"),
    )
}

fn nonexistence() -> Outcome {
    let k = match nonexistence_threshold(&fig6(0.0)) {
        Ok(n) => n.k_threshold,
        Err(e) => return (false, e.to_string()),
    };
    let mut rng = StdRng::seed_from_u64(0x5eed_0007);
    let opts = OrbitOptions::default();
    let mut ok = (k - 4.0 / 3.0).abs() <= f64::EPSILON;
    let mut notes = vec![format!("K = {k}")];
    for l in [-1.4, -2.0] {
        let spec = fig6(l);
        let no_orbit = matches!(find_periodic_orbit(&spec, &opts), Err(OrbitError::NoOrbit { .. }));
        let p = spec.equilibrium_state();
        let io = IntegrateOptions::new(1e-10).with_settle(1e-10).without_samples();
        let converged = (0..20)
            .filter(|_| {
                let s = State::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..6.0));
                integrate(&spec, s, 500.0 / 0.2, &io).is_ok_and(|t| t.last().state.dist(&p) <= 1e-6)
            })
            .count();
        ok &= no_orbit && converged == 20;
        notes.push(format!("lambda={l}: NoOrbit {no_orbit}, {converged}/20 converge"));
    }
    (ok, notes.join(", "))
}

fn shadow_equality_and_grazing() -> Outcome {
    let opts = OrbitOptions::default();
    let g = match find_grazing(&fig4(1.597), 1.595, 1.5999, &opts) {
        Ok(g) => g,
        Err(e) => return (false, format!("find_grazing: {e}")),
    };
    let mut ok = g.lambda_hi - g.lambda_lo <= 1e-8 && g.x_min_lo * g.x_min_hi < 0.0;
    let mut worst: f64 = 0.0;
    for k in 1..=5 {
        let l = g.lambda_g + (1.6 - g.lambda_g) * k as f64 / 6.0;
        match shadow_equality(&fig4(l), &opts) {
            Ok(r) => worst = worst.max(r.max_pointwise),
            Err(e) => return (false, format!("shadow_equality at {l}: {e}")),
        }
    }
    ok &= worst <= 10.0 * opts.tol;
    (
        ok,
        format!(
            "lambda_G = {:.9} (width {:.1e}, x_min {:.3} -> {:.3}), max pointwise {worst:.2e}",
            g.lambda_g,
            g.lambda_hi - g.lambda_lo,
            g.x_min_lo,
            g.x_min_hi
        ),
    )
}

fn stommel() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0009);
    let mut field_err: f64 = 0.0;
    for _ in 0..1000 {
        let p = StommelParams::new(rng.random_range(1.01..3.0), rng.random_range(1e-3..0.5), rng.random_range(0.0..2.0)).unwrap();
        let s = StommelState::new(rng.random_range(-2.0..3.0), rng.random_range(-3.0..3.0));
        let (spec, map) = to_general_form(&p);
        let pushed = map.push_vector(stommel_field(&p, s));
        let direct = spec.eval_field(map.to_general(s));
        field_err = field_err.max((pushed.0 - direct.0).abs()).max((pushed.1 - direct.1).abs());
    }
    let tol = 1e-9;
    let p = StommelParams::new(1.2, 0.05, 0.95).unwrap();
    let io = IntegrateOptions::new(tol).with_sample_dt(0.5);
    let mut traj_err: f64 = 0.0;
    match simulate(&p, StommelState::new(0.4, 0.9), 100.0, &io) {
        Ok((a, b)) => {
            let map = to_general_form(&p).1;
            let mut matched = 0;
            for sa in &a.samples {
                if let Some(sb) = b.samples.iter().find(|sb| sb.t == sa.t) {
                    traj_err = traj_err.max(map.to_general(sa.state.into()).dist(&sb.state));
                    matched += 1;
                }
            }
            if matched < 200 {
                return (false, format!("only {matched} common sample times"));
            }
        }
        Err(e) => return (false, format!("simulate: {e}")),
    }
    let mut mismatches = 0;
    let mut degenerate = 0;
    for i in 1..=20 {
        for j in 1..=20 {
            let eps = (j as f64 / 64.0).powi(2);
            let k = 1.0 + i as f64 / 32.0;
            let p = StommelParams::new(k, eps, 1.0).unwrap();
            let expect = match i.cmp(&j) {
                std::cmp::Ordering::Less => Regime::Canard,
                std::cmp::Ordering::Greater => Regime::SuperExplosion,
                std::cmp::Ordering::Equal => Regime::Degenerate,
            };
            let got = classify_regime(&p).regime;
            let corner = corner_classify(&to_general_form(&p).0).kind;
            let corner_agrees = matches!(
                (got, corner),
                (Regime::Canard, CornerKind::HopfLike)
                    | (Regime::SuperExplosion, CornerKind::SuperExplosion)
                    | (Regime::Degenerate, CornerKind::Degenerate)
            );
            if got == Regime::Degenerate {
                degenerate += 1;
            }
            if got != expect || !corner_agrees {
                mismatches += 1;
            }
        }
    }
    (
        field_err <= 1e-12 && traj_err <= 10.0 * tol && mismatches == 0,
        format!("field {field_err:.2e}, trajectory {traj_err:.2e}, grid mismatches {mismatches}/400 ({degenerate} degenerate)"),
    )
}

fn certificates() -> Outcome {
    let spec = fig4(0.5);
    let (w, cert) = match build_w(&spec, -3.0, -1.0, None, 200) {
        Ok(r) => r,
        Err(e) => return (false, format!("build_w: {e}")),
    };
    let starts = interior_lattice(&w.vertices, 20, 1e-3);
    let conf = match check_confinement(&spec, &w.vertices, &starts, 100.0 / 0.2, 1e-9) {
        Ok(c) => c,
        Err(e) => return (false, format!("confinement: {e}")),
    };
    let v = match superexplosion_witness(&fig6(0.001), &OrbitOptions::default()) {
        Ok(v) => v,
        Err(e) => return (false, format!("superexplosion_witness: {e}")),
    };
    (
        cert.verified && cert.min_inward_product >= -1e-9 && conf.starts == 20 && conf.confined && v.verified(),
        format!(
            "W min inward {:.3e} over {} samples, {} starts exit by {:.1e}; V closing segment {}, orbit depth {:.1e}",
            cert.min_inward_product, cert.samples, conf.starts, conf.max_exit_distance, v.certificate.verified, v.orbit_max_depth
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("corner canard explosion", corner_explosion),
        ("fold canard explosion", fold_explosion),
        ("super-explosion", super_explosion),
        ("criticality matrix", criticality_matrix),
        ("shadow radial bound", shadow_radial_bound),
        ("eigenvalue oracle", eigen_oracle),
        ("nonexistence below -K", nonexistence),
        ("shadow equality and grazing", shadow_equality_and_grazing),
        ("Stommel conjugacy and regimes", stommel),
        ("invariant-region certificates", certificates),
    ];
    let results: Vec<(Outcome, std::time::Duration)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|(_, f)| {
                s.spawn(move || {
                    let t = std::time::Instant::now();
                    let r = std::panic::catch_unwind(f).unwrap_or_else(|_| (false, "panicked".into()));
                    (r, t.elapsed())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut failed = 0;
    for (i, ((name, _), ((ok, detail), dt))) in criteria.iter().zip(results).enumerate() {
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {name} ({:.1} s): {detail}",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            dt.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
