use std::sync::Arc;

use nalgebra::DMatrix;

use super::*;
use crate::mesh::{build_annulus_mesh, build_rectilinear_mesh, rectilinear_tag, Side};
use crate::systems::{AnalyticField, AnalyticSolution, Elasticity, FlatPoisson, Jet, Puncture, PunctureBackground, PunctureEquation};

fn square(levels: [u32; 2], degree: usize) -> Mesh {
    build_rectilinear_mesh(&[(0.0, 1.0), (0.0, 1.0)], &levels, &[degree, degree]).unwrap()
}

fn all_tags(mesh: &Mesh) -> Vec<String> {
    mesh.boundary_tags()
}

fn poisson(mesh: Mesh, bc: BoundaryCondition, config: OperatorConfig) -> DgOperator {
    let tags = all_tags(&mesh);
    let sys = Arc::new(FlatPoisson::new(mesh.dim()).unwrap());
    DgOperator::new(mesh, sys, None, BoundaryConditions::uniform(&tags, bc), config).unwrap()
}

fn dense(op: &DgOperator) -> DMatrix<f64> {
    let n = op.n_primal_dofs();
    let mut a = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = op.apply(&e).unwrap();
        e[j] = 0.0;
        for i in 0..n {
            a[(i, j)] = col[i];
        }
    }
    a
}

/// `u = x² y + 3 x y − y² + 1` with its exact derivatives.
fn quadratic() -> AnalyticField {
    AnalyticField::new(2, 1, |x| Jet {
        value: vec![x[0] * x[0] * x[1] + 3.0 * x[0] * x[1] - x[1] * x[1] + 1.0],
        gradient: vec![2.0 * x[0] * x[1] + 3.0 * x[1], x[0] * x[0] + 3.0 * x[0] - 2.0 * x[1]],
        hessian: vec![2.0 * x[1], 2.0 * x[0] + 3.0, 2.0 * x[0] + 3.0, -2.0],
    })
}

#[test]
fn zero_maps_to_zero_for_linear_system() {
    let op = poisson(square([1, 1], 3), BoundaryCondition::zero_dirichlet(1), OperatorConfig::default());
    let out = op.apply(&vec![0.0; op.n_primal_dofs()]).unwrap();
    assert!(out.iter().all(|&v| v == 0.0));
}

#[test]
fn constant_with_zero_neumann_is_in_the_kernel() {
    let mesh = square([0, 0], 4);
    let op = poisson(mesh, BoundaryCondition::neumann(|_, _| vec![0.0]), OperatorConfig::default());
    let out = op.apply_nonlinear(&vec![2.5; op.n_primal_dofs()]).unwrap();
    assert!(out.iter().all(|v| v.abs() < 1e-12), "{out:?}");
}

#[test]
fn reconstructs_derivative_of_linear_field_on_one_element() {
    let mesh = build_rectilinear_mesh(&[(-1.0, 1.0)], &[0], &[3]).unwrap();
    let tags = all_tags(&mesh);
    let sys = Arc::new(FlatPoisson::new(1).unwrap());
    let bcs = BoundaryConditions::uniform(&tags, BoundaryCondition::dirichlet(|x, _| vec![x[0]]));
    let op = DgOperator::new(mesh, sys, None, bcs, OperatorConfig::default()).unwrap();
    let u = op.sample(1, |x| vec![x[0]]);
    let v = op.reconstruct_auxiliary(&u).unwrap();
    assert!(v.iter().all(|v| (v - 1.0).abs() < 1e-13), "{v:?}");
}

#[test]
fn reconstructs_exact_gradient_of_polynomial() {
    let field = quadratic();
    for mesh in [square([1, 0], 3), square([1, 1], 2).refine_elements(|k, _| k == 0).unwrap()] {
        let tags = all_tags(&mesh);
        let f2 = field.clone();
        let bcs = BoundaryConditions::uniform(&tags, BoundaryCondition::dirichlet(move |x, _| f2.value(x)));
        let op = DgOperator::new(mesh, Arc::new(FlatPoisson::new(2).unwrap()), None, bcs, OperatorConfig::default())
            .unwrap();
        let u = op.sample(1, |x| field.value(x));
        let v = op.reconstruct_auxiliary(&u).unwrap();
        let exact = op.sample(2, |x| field.jet(x).gradient);
        for (a, b) in v.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-11, "{a} vs {b}");
        }
    }
}

#[test]
fn consistency_on_polynomials() {
    let field = quadratic();
    let meshes = [square([1, 1], 3), square([1, 1], 2).refine_elements(|k, _| k == 3).unwrap()];
    for form in [Form::Strong, Form::StrongWeak] {
        for mesh in meshes.iter().cloned() {
            let sys: Arc<dyn EllipticSystem> = Arc::new(FlatPoisson::new(2).unwrap());
            let sol = AnalyticSolution::manufactured("quadratic", sys.clone(), field.clone(), None).unwrap();
            let tags = all_tags(&mesh);
            let bcs = BoundaryConditions::uniform(&tags, sol.dirichlet());
            let config = OperatorConfig {
                form,
                ..OperatorConfig::default()
            };
            let op = DgOperator::new(mesh, sys, None, bcs, config).unwrap();
            let u = op.sample(1, |x| sol.value(x));
            let au = op.apply_nonlinear(&u).unwrap();
            let mf = op.fixed_source_term(|x| sol.fixed_source(x)).unwrap();
            for (a, b) in au.iter().zip(&mf) {
                assert!((a - b).abs() < 1e-10, "{form:?}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn elasticity_consistency_with_neumann_and_robin() {
    let d = 2;
    let field = AnalyticField::new(2, 2, |x| {
        let value = vec![x[0] * x[1], x[0] * x[0] - 0.5 * x[1]];
        let gradient = vec![x[1], x[0], 2.0 * x[0], -0.5];
        let mut hessian = vec![0.0; 8];
        hessian[1] = 1.0;
        hessian[2] = 1.0;
        hessian[4] = 2.0;
        Jet { value, gradient, hessian }
    });
    let sys: Arc<dyn EllipticSystem> = Arc::new(Elasticity::new(d, 1.5, 0.75).unwrap());
    let sol = AnalyticSolution::manufactured("elastic", sys.clone(), field, None).unwrap();
    let mesh = square([1, 0], 2);
    let bcs = BoundaryConditions::new()
        .with(rectilinear_tag(0, Side::Lower), sol.dirichlet())
        .with(rectilinear_tag(0, Side::Upper), sol.neumann())
        .with(rectilinear_tag(1, Side::Lower), sol.robin(2.0, 0.5))
        .with(rectilinear_tag(1, Side::Upper), sol.robin(1.0, 0.0));
    let op = DgOperator::new(mesh, sys, None, bcs, OperatorConfig::default()).unwrap();
    let u = op.sample(2, |x| sol.value(x));
    let au = op.apply_nonlinear(&u).unwrap();
    let mf = op.fixed_source_term(|x| sol.fixed_source(x)).unwrap();
    for (a, b) in au.iter().zip(&mf) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn operator_is_compact() {
    let op = poisson(square([2, 2], 2), BoundaryCondition::zero_dirichlet(1), OperatorConfig::default());
    let mesh = op.mesh();
    let n = mesh.num_points();
    let target = 0;
    let mut u = vec![0.0; n];
    // perturb an element that is not a face neighbor of the target
    let far = 10;
    assert!(!mesh.face_neighbors(target).contains(&far));
    let off = mesh.offsets()[far];
    for p in 0..mesh.elements()[far].num_points() {
        u[off + p] = (p as f64 + 1.0).sin();
    }
    let out = op.apply(&u).unwrap();
    let start = mesh.offsets()[target];
    let len = mesh.elements()[target].num_points();
    assert!(out[start..start + len].iter().all(|&v| v == 0.0));
    // and a neighbor does see it
    let neighbor = mesh.face_neighbors(far)[0];
    let s = mesh.offsets()[neighbor];
    assert!(out[s..s + mesh.elements()[neighbor].num_points()].iter().any(|&v| v != 0.0));
}

#[test]
fn strong_weak_massive_operator_is_symmetric() {
    let mesh = square([1, 1], 3);
    let config = OperatorConfig {
        form: Form::StrongWeak,
        massive: true,
        penalty: 1.0,
    };
    let a = dense(&poisson(mesh, BoundaryCondition::zero_dirichlet(1), config));
    let defect = (&a - a.transpose()).amax();
    assert!(defect <= 1e-12 * a.amax(), "defect {defect}");
}

#[test]
fn penalty_removes_null_space_of_linear_elements() {
    let smallest = |penalty: f64| {
        let config = OperatorConfig {
            penalty,
            ..OperatorConfig::default()
        };
        let a = dense(&poisson(square([1, 1], 1), BoundaryCondition::zero_dirichlet(1), config));
        a.singular_values().min()
    };
    let (without, with) = (smallest(0.0), smallest(1.0));
    assert!(without * 1e6 <= with, "σ_min without penalty {without}, with {with}");
}

#[test]
fn massless_is_massive_divided_by_mass() {
    let mesh = square([1, 0], 3);
    let massive = poisson(mesh.clone(), BoundaryCondition::zero_dirichlet(1), OperatorConfig::default());
    let massless = poisson(
        mesh,
        BoundaryCondition::zero_dirichlet(1),
        OperatorConfig {
            massive: false,
            ..OperatorConfig::default()
        },
    );
    let u = massive.sample(1, |x| vec![(3.0 * x[0]).sin() + x[1] * x[1]]);
    let a = massive.apply(&u).unwrap();
    let b = massless.apply(&u).unwrap();
    let m = massive.mass();
    for i in 0..a.len() {
        assert!((a[i] / m[i] - b[i]).abs() < 1e-9 * (1.0 + b[i].abs()));
    }
}

#[test]
fn rhs_with_homogeneous_dirichlet_is_mass_times_source() {
    let op = poisson(square([1, 1], 3), BoundaryCondition::zero_dirichlet(1), OperatorConfig::default());
    let f = |x: &Vec3| Ok(vec![x[0] + 2.0 * x[1]]);
    assert_eq!(op.build_rhs(f).unwrap(), op.fixed_source_term(f).unwrap());
}

#[test]
fn inhomogeneous_dirichlet_contributes_only_near_its_face() {
    let mesh = square([1, 1], 2);
    let tags = all_tags(&mesh);
    let lower_x = rectilinear_tag(0, Side::Lower);
    let mut bcs = BoundaryConditions::uniform(&tags, BoundaryCondition::zero_dirichlet(1));
    bcs.insert(lower_x.clone(), BoundaryCondition::dirichlet(|_, _| vec![2.0]));
    let op = DgOperator::new(mesh, Arc::new(FlatPoisson::new(2).unwrap()), None, bcs, OperatorConfig::default())
        .unwrap();
    let f = |_: &Vec3| Ok(vec![1.0]);
    let rhs = op.build_rhs(f).unwrap();
    let mf = op.fixed_source_term(f).unwrap();
    // the lifted auxiliary correction is differentiated again, so the data
    // reaches every point of the adjacent elements but no further
    let touching: Vec<usize> = op.mesh().external_faces().filter(|f| f.3 == lower_x).map(|f| f.0).collect();
    let mesh = op.mesh();
    for k in 0..mesh.elements().len() {
        let range = mesh.offsets()[k]..mesh.offsets()[k] + mesh.elements()[k].num_points();
        let changed = range.clone().filter(|&i| rhs[i] != mf[i]).count();
        if touching.contains(&k) {
            assert!(changed > 0);
        } else {
            assert_eq!(changed, 0, "element {k}");
        }
    }
}

#[test]
fn first_order_operator_vanishes_on_reconstructed_auxiliary() {
    let op = poisson(square([1, 1], 2), BoundaryCondition::zero_dirichlet(1), OperatorConfig::default());
    let u = op.sample(1, |x| vec![x[0] * (1.0 - x[0]) * (2.0 * x[1]).cos()]);
    let v = op.reconstruct_auxiliary(&u).unwrap();
    let mut vu = v.clone();
    vu.extend(&u);
    let out = op.apply_first_order(&vu).unwrap();
    let (aux, primal) = out.split_at(v.len());
    assert!(aux.iter().all(|r| r.abs() < 1e-12));
    let compact = op.apply(&u).unwrap();
    for (a, b) in primal.iter().zip(&compact) {
        assert!((a - b).abs() < 1e-11);
    }
}

#[test]
fn curved_mesh_applies_without_error() {
    let mesh = build_annulus_mesh(1.0, 2.0, 4, [0, 0], [3, 3]).unwrap();
    let op = poisson(mesh, BoundaryCondition::zero_dirichlet(1), OperatorConfig::default());
    let u = op.sample(1, |x| vec![x[0] * x[1]]);
    assert!(op.apply(&u).unwrap().iter().all(|v| v.is_finite()));
}

fn puncture_operator() -> DgOperator {
    let bg = PunctureBackground::new(vec![Puncture {
        mass: 1.0,
        position: [0.1, 0.1, 0.1],
        momentum: [0.0, 0.0, 0.3],
        spin: [0.0; 3],
    }])
    .unwrap();
    let mesh = build_rectilinear_mesh(&[(-1.0, 1.0); 3], &[0, 0, 0], &[2, 2, 2]).unwrap();
    let tags = all_tags(&mesh);
    DgOperator::new(
        mesh,
        Arc::new(PunctureEquation::new(bg).unwrap()),
        None,
        BoundaryConditions::uniform(&tags, BoundaryCondition::zero_dirichlet(1)),
        OperatorConfig::default(),
    )
    .unwrap()
}

#[test]
fn nonlinear_system_needs_linearization_point() {
    let mut op = puncture_operator();
    let u = vec![0.0; op.n_primal_dofs()];
    assert!(matches!(op.apply(&u), Err(DgError::Sequencing(_))));
    op.set_linearization_point(&u).unwrap();
    assert!(op.apply(&u).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn linearized_operator_matches_directional_derivative() {
    let mut op = puncture_operator();
    let u0 = op.sample(1, |x| vec![0.1 + 0.05 * x[0]]);
    let du = op.sample(1, |x| vec![x[1] * x[2] + 0.3]);
    op.set_linearization_point(&u0).unwrap();
    let lin = op.apply(&du).unwrap();
    let eps = 1e-6;
    let shifted = |s: f64| {
        let u: Vec<f64> = u0.iter().zip(&du).map(|(a, b)| a + s * eps * b).collect();
        op.apply_nonlinear(&u).unwrap()
    };
    let (plus, minus) = (shifted(1.0), shifted(-1.0));
    let scale = lin.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..lin.len() {
        let fd = (plus[i] - minus[i]) / (2.0 * eps);
        assert!((fd - lin[i]).abs() < 1e-6 * scale, "{fd} vs {}", lin[i]);
    }
}

#[test]
fn trace_dependent_condition_is_linearized() {
    // u^b = u_int² near the boundary, linearized about u0
    let mesh = square([0, 0], 2);
    let tags = all_tags(&mesh);
    let bc = BoundaryCondition::trace_dependent(BcKind::Dirichlet, |_, _, tr| vec![tr[0] * tr[0]]);
    let mut op = DgOperator::new(
        mesh,
        Arc::new(FlatPoisson::new(2).unwrap()),
        None,
        BoundaryConditions::uniform(&tags, bc),
        OperatorConfig::default(),
    )
    .unwrap();
    let u0 = op.sample(1, |x| vec![1.0 + x[0]]);
    let du = op.sample(1, |x| vec![x[1]]);
    op.set_linearization_point(&u0).unwrap();
    let lin = op.apply(&du).unwrap();
    let eps = 1e-5;
    let at = |s: f64| {
        let u: Vec<f64> = u0.iter().zip(&du).map(|(a, b)| a + s * eps * b).collect();
        op.apply_nonlinear(&u).unwrap()
    };
    let (plus, minus) = (at(1.0), at(-1.0));
    for i in 0..lin.len() {
        let fd = (plus[i] - minus[i]) / (2.0 * eps);
        assert!((fd - lin[i]).abs() < 1e-5 * (1.0 + fd.abs()), "{fd} vs {}", lin[i]);
    }
}

#[test]
fn missing_boundary_condition_is_a_configuration_error() {
    let mesh = square([0, 0], 2);
    let bcs = BoundaryConditions::new().with(rectilinear_tag(0, Side::Lower), BoundaryCondition::zero_dirichlet(1));
    let err = DgOperator::new(mesh, Arc::new(FlatPoisson::new(2).unwrap()), None, bcs, OperatorConfig::default());
    assert!(matches!(err, Err(DgError::Configuration(_))));
}

#[test]
fn non_finite_input_reports_element() {
    let op = poisson(square([1, 0], 2), BoundaryCondition::zero_dirichlet(1), OperatorConfig::default());
    let mut u = vec![0.0; op.n_primal_dofs()];
    let last = op.mesh().offsets()[1] + 4;
    u[last] = f64::NAN;
    match op.apply(&u) {
        Err(DgError::Numeric { element, .. }) => assert!(element <= 1),
        other => panic!("expected a numeric error, got {other:?}"),
    }
}

