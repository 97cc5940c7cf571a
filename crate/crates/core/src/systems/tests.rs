use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::background::ConformalFactor;

fn flat_pt(x: Vec3) -> PointGeometry {
    PointGeometry::flat(x)
}

#[test]
fn poisson_auxiliary_flux_is_identity_times_u() {
    let s = FlatPoisson::new(2).unwrap();
    let mut out = vec![0.0; 4];
    s.auxiliary_fluxes(&[3.0], &mut out);
    assert_eq!(out, vec![3.0, 0.0, 0.0, 3.0]);
    s.auxiliary_fluxes(&[0.0], &mut out);
    assert!(out.iter().all(|&v| v == 0.0));
}

#[test]
fn elasticity_auxiliary_flux_pattern() {
    let s = Elasticity::new(2, 1.0, 1.0).unwrap();
    let mut out = vec![0.0; 8];
    s.auxiliary_fluxes(&[1.0, 0.0], &mut out);
    // out[i * 4 + j * 2 + k]
    assert_eq!(out[0], 1.0);
    assert_eq!(out[1], 0.0);
    assert_eq!(out[4 + 1], 0.5);
    assert_eq!(out[4 + 2], 0.5);
    assert_eq!(out[4 + 3], 0.0);
}

#[test]
fn elasticity_stress_with_zero_lambda_doubles_strain() {
    let s = Elasticity::new(2, 0.0, 1.0).unwrap();
    let strain = [0.3, -0.2, -0.2, 0.7];
    let mut out = vec![0.0; 4];
    s.primal_fluxes(&strain, &flat_pt([0.0; 3]), &mut out);
    for (o, e) in out.iter().zip(&strain) {
        assert!((o - 2.0 * e).abs() < 1e-15);
    }
}

#[test]
fn elasticity_flux_symmetric_for_symmetric_strain() {
    let s = Elasticity::new(3, 1.3, 0.7).unwrap();
    let strain = [0.1, 0.2, 0.3, 0.2, 0.5, -0.1, 0.3, -0.1, 0.9];
    let mut out = vec![0.0; 9];
    s.primal_fluxes(&strain, &flat_pt([0.0; 3]), &mut out);
    for i in 0..3 {
        for j in 0..3 {
            assert!((out[i * 3 + j] - out[j * 3 + i]).abs() < 1e-15);
        }
    }
}

#[test]
fn elasticity_rejects_nonpositive_shear_modulus() {
    assert!(Elasticity::new(2, 1.0, 0.0).is_err());
}

fn conformal(slope: f64) -> Background {
    Background::conformally_flat(2, ConformalFactor::linear([slope, 0.0, 0.0], 0.0))
}

#[test]
fn curved_poisson_flux_scales_by_inverse_metric() {
    let s = CurvedPoisson::new(2).unwrap();
    let bg = conformal(0.1);
    let x = [0.4, 0.2, 0.0];
    let pt = PointGeometry::new(&s, &bg, x).unwrap();
    let mut out = vec![0.0; 2];
    s.primal_fluxes(&[1.5, -2.0], &pt, &mut out);
    let scale = (-0.2f64 * 0.4).exp();
    assert!((out[0] - 1.5 * scale).abs() < 1e-14);
    assert!((out[1] + 2.0 * scale).abs() < 1e-14);
}

#[test]
fn curved_poisson_requires_background() {
    let s = CurvedPoisson::new(2).unwrap();
    assert!(matches!(s.check_background(None), Err(DgError::Configuration(_))));
    assert!(s.check_background(Some(&conformal(0.0))).is_ok());
    assert!(FlatPoisson::new(2).unwrap().check_background(Some(&conformal(0.1))).is_err());
}

#[test]
fn curved_poisson_flat_limit_matches_flat_poisson() {
    let curved = CurvedPoisson::new(2).unwrap();
    let flat = FlatPoisson::new(2).unwrap();
    let bg = conformal(0.0);
    for x in [[0.1, 0.2, 0.0], [-0.7, 0.3, 0.0]] {
        let pc = PointGeometry::new(&curved, &bg, x).unwrap();
        let v = [0.3, -1.1];
        let (mut a, mut b) = (vec![0.0; 2], vec![0.0; 2]);
        curved.primal_fluxes(&v, &pc, &mut a);
        flat.primal_fluxes(&v, &flat_pt(x), &mut b);
        for (a, b) in a.iter().zip(&b) {
            assert!((a - b).abs() < 1e-14);
        }
        let (mut sa, mut sb) = (vec![0.0; 1], vec![0.0; 1]);
        curved.primal_sources(&[0.5], &v, &pc, &mut sa);
        flat.primal_sources(&[0.5], &v, &flat_pt(x), &mut sb);
        assert!((sa[0] - sb[0]).abs() < 1e-14);
        assert_eq!(sb[0], 0.0);
    }
}

#[test]
fn puncture_source_example() {
    assert!((PunctureEquation::source(2.0, 1.0, 0.0) + 3f64.powi(-7)).abs() < 1e-18);
}

fn single(momentum: Vec3) -> PunctureBackground {
    PunctureBackground::new(vec![Puncture {
        mass: 1.0,
        position: [0.0; 3],
        momentum,
        spin: [0.0; 3],
    }])
    .unwrap()
}

#[test]
fn puncture_background_at_rest() {
    let (alpha, beta, a) = single([0.0; 3]).evaluate(&[0.0, 2.0, 0.0]).unwrap();
    assert!((alpha - 2.0).abs() < 1e-15);
    assert_eq!(beta, 0.0);
    assert!(a.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn puncture_background_vanishing_beta_without_momentum_or_spin() {
    let bg = PunctureBackground::new(vec![
        Puncture {
            mass: 0.5,
            position: [1.0, 0.0, 0.0],
            momentum: [0.0; 3],
            spin: [0.0; 3],
        },
        Puncture {
            mass: 0.7,
            position: [-1.0, 0.3, 0.0],
            momentum: [0.0; 3],
            spin: [0.0; 3],
        },
    ])
    .unwrap();
    assert_eq!(bg.evaluate(&[0.1, 0.5, -0.4]).unwrap().1, 0.0);
}

#[test]
fn puncture_background_rejects_singular_point_and_bad_input() {
    let bg = single([0.0; 3]);
    assert!(matches!(bg.evaluate(&[0.0; 3]), Err(DgError::SingularPoint(_))));
    let bad = Puncture {
        mass: -1.0,
        position: [0.0; 3],
        momentum: [0.0; 3],
        spin: [0.0; 3],
    };
    assert!(PunctureBackground::new(vec![bad]).is_err());
    let p = Puncture {
        mass: 1.0,
        position: [0.0; 3],
        momentum: [0.0; 3],
        spin: [0.0; 3],
    };
    assert!(PunctureBackground::new(vec![p.clone(), p]).is_err());
}

/// Component-wise Bowen-York extrinsic curvature with explicit loops and
/// named terms, evaluated independently of the library routine.
fn bowen_york_reference(p: &Puncture, x: &Vec3) -> [[f64; 3]; 3] {
    let dx = x[0] - p.position[0];
    let dy = x[1] - p.position[1];
    let dz = x[2] - p.position[2];
    let r = (dx * dx + dy * dy + dz * dz).sqrt();
    let n = [dx / r, dy / r, dz / r];
    let pn = p.momentum[0] * n[0] + p.momentum[1] * n[1] + p.momentum[2] * n[2];
    // (S × n)_j
    let sxn = [
        p.spin[1] * n[2] - p.spin[2] * n[1],
        p.spin[2] * n[0] - p.spin[0] * n[2],
        p.spin[0] * n[1] - p.spin[1] * n[0],
    ];
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let kron = if i == j { 1.0 } else { 0.0 };
            let linear = 3.0 / (2.0 * r * r) * (p.momentum[i] * n[j] + p.momentum[j] * n[i] - (kron - n[i] * n[j]) * pn);
            let angular = 3.0 / (r * r * r) * (n[i] * sxn[j] + n[j] * sxn[i]);
            out[i][j] = linear + angular;
        }
    }
    out
}

#[test]
fn bowen_york_matches_reference_evaluation() {
    let x = [2.0, 0.0, 0.0];
    let bg = single([0.0, 0.0, 1.0]);
    let (alpha, beta, a) = bg.evaluate(&x).unwrap();
    let reference = bowen_york_reference(&bg.punctures()[0], &x);
    for i in 0..3 {
        for j in 0..3 {
            assert!((a[i][j] - reference[i][j]).abs() < 1e-14, "{i}{j}");
        }
    }
    let aa: f64 = reference.iter().flatten().map(|v| v * v).sum();
    assert!((beta - alpha.powi(7) * aa / 8.0).abs() < 1e-16);
    assert!(beta > 0.0);

    let spinning = PunctureBackground::new(vec![Puncture {
        mass: 0.8,
        position: [0.1, -0.2, 0.3],
        momentum: [0.2, -0.1, 0.4],
        spin: [0.3, 0.1, -0.2],
    }])
    .unwrap();
    let y = [1.1, 0.7, -0.5];
    let (_, _, a) = spinning.evaluate(&y).unwrap();
    let reference = bowen_york_reference(&spinning.punctures()[0], &y);
    for i in 0..3 {
        for j in 0..3 {
            assert!((a[i][j] - reference[i][j]).abs() < 1e-13);
        }
    }
}

#[test]
fn puncture_linearization_matches_finite_difference() {
    let sys = PunctureEquation::new(single([0.2, 0.0, 0.5])).unwrap();
    let x = [1.2, -0.3, 0.6];
    let pt = PointGeometry::new(&sys, &Background::flat(3), x).unwrap();
    for u0 in [0.0, 0.3, -0.2] {
        let eps = 1e-6;
        let mut plus = [0.0];
        let mut minus = [0.0];
        let v = [0.0; 3];
        sys.primal_sources(&[u0 + eps], &v, &pt, &mut plus);
        sys.primal_sources(&[u0 - eps], &v, &pt, &mut minus);
        let fd = (plus[0] - minus[0]) / (2.0 * eps);
        let mut lin = [0.0];
        sys.linearized_primal_sources(&[u0], &v, &[1.0], &v, &pt, &mut lin);
        assert!(((lin[0] - fd) / fd).abs() < 1e-8, "{} vs {}", lin[0], fd);
        sys.linearized_primal_sources(&[u0], &v, &[0.0], &v, &pt, &mut lin);
        assert_eq!(lin[0], 0.0);
    }
}

#[test]
fn linear_system_linearization_equals_sources() {
    let sys = CurvedPoisson::new(2).unwrap();
    let bg = conformal(0.3);
    let pt = PointGeometry::new(&sys, &bg, [0.2, 0.1, 0.0]).unwrap();
    let (du, dv) = ([0.4], [0.7, -0.3]);
    let mut a = [0.0];
    let mut b = [0.0];
    sys.primal_sources(&du, &dv, &pt, &mut a);
    sys.linearized_primal_sources(&[5.0], &[1.0, 2.0], &du, &dv, &pt, &mut b);
    assert!((a[0] - b[0]).abs() < 1e-15);
}

#[test]
fn manufactured_sine_source() {
    let sol = AnalyticSolution::manufactured(
        "sine",
        Arc::new(FlatPoisson::new(2).unwrap()),
        AnalyticField::sine_product(2),
        None,
    )
    .unwrap();
    for x in [[0.3, 0.7, 0.0], [0.5, 0.5, 0.0], [0.11, 0.92, 0.0]] {
        let pi = std::f64::consts::PI;
        let expected = 2.0 * pi * pi * (pi * x[0]).sin() * (pi * x[1]).sin();
        assert!((sol.fixed_source(&x).unwrap()[0] - expected).abs() < 1e-12);
    }
}

#[test]
fn manufactured_constant_has_zero_source() {
    let field = AnalyticField::new(2, 1, |_| Jet {
        value: vec![4.0],
        gradient: vec![0.0; 2],
        hessian: vec![0.0; 4],
    });
    let sol = AnalyticSolution::manufactured("c", Arc::new(FlatPoisson::new(2).unwrap()), field, None).unwrap();
    assert_eq!(sol.fixed_source(&[0.2, 0.4, 0.0]).unwrap(), vec![0.0]);
}

#[test]
fn manufactured_curved_source_matches_finite_differences() {
    let sys: Arc<dyn EllipticSystem> = Arc::new(CurvedPoisson::new(2).unwrap());
    let bg = conformal(0.1);
    let field = AnalyticField::new(2, 1, |x| Jet {
        value: vec![x[0] * x[0]],
        gradient: vec![2.0 * x[0], 0.0],
        hessian: vec![2.0, 0.0, 0.0, 0.0],
    });
    let sol = AnalyticSolution::manufactured("x2", sys, field, Some(bg.clone())).unwrap();
    // −∇_i ∇^i u = −(1/√g) ∂_i (√g g^{ij} ∂_j u), evaluated by 4th-order
    // central differences of the flux density
    let density = |x: &Vec3, i: usize| {
        let m = bg.metric_at(x).unwrap();
        let grad = [2.0 * x[0], 0.0];
        m.sqrt_det * (0..2).map(|j| m.inverse[i][j] * grad[j]).sum::<f64>()
    };
    for x in [[0.3, 0.2, 0.0], [-0.5, 0.8, 0.0]] {
        let h = 1e-3;
        let mut div = 0.0;
        for i in 0..2 {
            let shifted = |s: f64| {
                let mut y = x;
                y[i] += s * h;
                density(&y, i)
            };
            div += (-shifted(2.0) + 8.0 * shifted(1.0) - 8.0 * shifted(-1.0) + shifted(-2.0)) / (12.0 * h);
        }
        let expected = -div / bg.metric_at(&x).unwrap().sqrt_det;
        let got = sol.fixed_source(&x).unwrap()[0];
        assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
    }
}

#[test]
fn system_selection_by_name() {
    for name in ["poisson-flat", "poisson-curved", "elasticity"] {
        assert_eq!(system_by_name(name, 2, None, None).unwrap().name(), name);
    }
    assert!(matches!(system_by_name("puncture", 3, None, None), Err(DgError::Configuration(_))));
    assert!(system_by_name("xcts", 3, None, None).is_err());
}

fn all_systems() -> Vec<Arc<dyn EllipticSystem>> {
    vec![
        Arc::new(FlatPoisson::new(3).unwrap()),
        Arc::new(CurvedPoisson::new(3).unwrap()),
        Arc::new(Elasticity::new(3, 1.2, 0.8).unwrap()),
        Arc::new(PunctureEquation::new(single([0.1, 0.0, 0.0])).unwrap()),
    ]
}

proptest! {
    #[test]
    fn auxiliary_fluxes_are_linear(a in prop::collection::vec(-5.0f64..5.0, 3), b in prop::collection::vec(-5.0f64..5.0, 3), s in -3.0f64..3.0) {
        for sys in all_systems() {
            let (np, na, d) = (sys.n_primal(), sys.n_auxiliary(), sys.dim());
            let mut fa = vec![0.0; d * na];
            let mut fb = vec![0.0; d * na];
            let mut fc = vec![0.0; d * na];
            let combo: Vec<f64> = (0..np).map(|c| a[c] + s * b[c]).collect();
            sys.auxiliary_fluxes(&a[..np], &mut fa);
            sys.auxiliary_fluxes(&b[..np], &mut fb);
            sys.auxiliary_fluxes(&combo, &mut fc);
            for k in 0..d * na {
                prop_assert!((fc[k] - fa[k] - s * fb[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn auxiliary_source_form_is_independent_of_v(u in -2.0f64..2.0) {
        for sys in all_systems() {
            let pt = PointGeometry::new(sys.as_ref(), &Background::flat(3), [1.0, 0.5, 0.25]).unwrap();
            let mut s = vec![1.0; sys.n_auxiliary()];
            sys.auxiliary_sources(&vec![u; sys.n_primal()], &pt, &mut s);
            prop_assert!(s.iter().all(|v| v.is_finite()));
        }
    }
}
