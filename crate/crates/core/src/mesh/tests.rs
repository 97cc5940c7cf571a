use super::*;
use crate::basis::lgl;
use crate::tensor::matmul;

fn quadrature_volume(mesh: &Mesh) -> f64 {
    let mut vol = 0.0;
    for e in mesh.elements() {
        let ext = e.extents();
        let sets: Vec<_> = (0..e.dim()).map(|d| lgl(ext[d]).unwrap()).collect();
        for (p, xi) in e.logical_points().unwrap().iter().enumerate() {
            let idx = unflatten(&ext, p);
            let w: f64 = (0..e.dim()).map(|d| sets[d].weights[idx[d]]).product();
            vol += w * e.jacobian_at(xi).unwrap().determinant;
        }
    }
    vol
}

#[test]
fn rectilinear_counts() {
    let m = build_rectilinear_mesh(&[(0.0, 1.0), (0.0, 1.0)], &[1, 1], &[5, 5]).unwrap();
    assert_eq!(m.elements().len(), 4);
    assert!(m.elements().iter().all(|e| e.num_points() == 36));
    assert_eq!(m.num_points(), 144);

    let m = build_rectilinear_mesh(&[(0.0, 1.0)], &[0], &[1]).unwrap();
    assert_eq!(m.elements().len(), 1);
    assert_eq!(m.num_points(), 2);

    let m = build_rectilinear_mesh(&[(0.0, 1.0), (0.0, 1.0)], &[2, 2], &[2, 2]).unwrap();
    assert_eq!(m.elements().len(), 16);
    for k in 0..16 {
        for h in m.element_sizes(k).unwrap() {
            assert_eq!(h, 0.25);
        }
    }
}

#[test]
fn rectilinear_rejects_empty_interval() {
    let err = build_rectilinear_mesh(&[(1.0, 1.0)], &[0], &[2]).unwrap_err();
    assert!(matches!(err, DgError::InvalidArgument(_)));
}

#[test]
fn element_order_is_x_fastest() {
    let m = build_rectilinear_mesh(&[(0.0, 1.0), (0.0, 1.0)], &[1, 1], &[2, 2]).unwrap();
    let centers: Vec<Vec3> = m
        .elements()
        .iter()
        .map(|e| e.map.to_physical(&[0.0; 3]))
        .collect();
    assert_eq!(centers[0][..2], [0.25, 0.25]);
    assert_eq!(centers[1][..2], [0.75, 0.25]);
    assert_eq!(centers[2][..2], [0.25, 0.75]);
    assert_eq!(centers[3][..2], [0.75, 0.75]);
    assert_eq!(m.face_neighbors(0), vec![1, 2]);
    assert_eq!(m.face_neighbors(3), vec![1, 2]);
}

#[test]
fn grid_indexing_is_bijective() {
    let ext = [3, 4, 5];
    let mut seen = vec![false; 60];
    for p in 0..60 {
        let idx = unflatten(&ext, p);
        assert_eq!(flatten(&ext, &idx), p);
        seen[p] = true;
    }
    assert!(seen.iter().all(|&s| s));
    assert_eq!(unflatten(&ext, 1), [1, 0, 0]);
    assert_eq!(unflatten(&ext, 3), [0, 1, 0]);
}

#[test]
fn affine_jacobian_and_normal() {
    let m = build_rectilinear_mesh(&[(0.0, 0.5)], &[0], &[3]).unwrap();
    let e = &m.elements()[0];
    for xi in [-1.0, 0.2, 1.0] {
        let j = e.jacobian_at(&[xi, 0.0, 0.0]).unwrap();
        assert_eq!(j.jacobian[0][0], 0.25);
        assert_eq!(j.determinant, 0.25);
        assert_eq!(j.inverse[0][0], 4.0);
    }
    let n = e.unnormalized_face_normal(0, Side::Upper, &[1.0, 0.0, 0.0]).unwrap();
    assert_eq!(n[0], 4.0);
    let n = e.unnormalized_face_normal(0, Side::Lower, &[-1.0, 0.0, 0.0]).unwrap();
    assert_eq!(n[0], -4.0);
}

#[test]
fn flat_normal_is_orthogonal_to_face_tangents() {
    let m = build_rectilinear_mesh(&[(0.0, 2.0), (-1.0, 0.5)], &[0, 0], &[2, 2]).unwrap();
    let e = &m.elements()[0];
    for dir in 0..2 {
        let xi = [0.3, -0.4, 0.0];
        let n = e.unnormalized_face_normal(dir, Side::Upper, &xi).unwrap();
        let jac = e.jacobian_at(&xi).unwrap().jacobian;
        let tangent = 1 - dir;
        let dot: f64 = (0..2).map(|i| n[i] * jac[i][tangent]).sum();
        assert!(dot.abs() < 1e-12);
    }
}

#[test]
fn annulus_map_and_orientation() {
    let m = build_annulus_mesh(1.0, 2.0, 4, [0, 0], [3, 3]).unwrap();
    assert_eq!(m.elements().len(), 4);
    let x = m.elements()[0].map.to_physical(&[-1.0, -1.0, 0.0]);
    assert!((x[0] - 1.0).abs() < 1e-15 && x[1].abs() < 1e-15);
    for e in m.elements() {
        assert!(e.jacobian_at(&[0.0; 3]).unwrap().determinant > 0.0);
    }
    assert_eq!(m.boundary_tags(), vec!["inner".to_string(), "outer".to_string()]);
    assert_eq!(m.external_faces().count(), 8);
    assert_eq!(m.internal_faces().count(), 8);
}

#[test]
fn annulus_area_by_quadrature() {
    let m = build_annulus_mesh(1.0, 2.0, 4, [0, 0], [5, 5]).unwrap();
    let area = quadrature_volume(&m);
    let exact = 3.0 * std::f64::consts::PI;
    assert!((area - exact).abs() / exact < 0.01);
}

#[test]
fn wedge_jacobian_matches_finite_difference() {
    let m = build_annulus_mesh(1.0, 2.0, 3, [1, 0], [3, 3]).unwrap();
    let step = 1e-6;
    for e in m.elements() {
        let xi = [0.31, -0.52, 0.0];
        let j = e.jacobian_at(&xi).unwrap().jacobian;
        for c in 0..2 {
            let mut a = xi;
            let mut b = xi;
            a[c] += step;
            b[c] -= step;
            let xa = e.map.to_physical(&a);
            let xb = e.map.to_physical(&b);
            for r in 0..2 {
                let fd = (xa[r] - xb[r]) / (2.0 * step);
                assert!((fd - j[r][c]).abs() <= 1e-6 * j[r][c].abs().max(1.0));
            }
        }
    }
}

#[test]
fn composed_jacobian_obeys_chain_rule() {
    let wedge = CoordinateMap::AnnulusWedge(WedgeMap {
        inner_radius: 1.0,
        outer_radius: 3.0,
        start_angle: 0.2,
        end_angle: 1.4,
    });
    let half = AffineMap::new(&[0.0, -1.0], &[1.0, 0.0]);
    let composed = wedge.compose_logical(&half);
    let xi = [0.4, -0.1, 0.0];
    let expected = matmul(&wedge.jacobian(&half.apply(&xi)), &half.jacobian());
    let got = composed.jacobian(&xi);
    for i in 0..2 {
        for j in 0..2 {
            assert!((expected[i][j] - got[i][j]).abs() < 1e-12);
        }
    }
    let x = composed.to_physical(&xi);
    let back = composed.to_logical(&x);
    assert!((back[0] - xi[0]).abs() < 1e-12 && (back[1] - xi[1]).abs() < 1e-12);
}

#[test]
fn wedge_radial_face_normal_is_radial() {
    let m = build_annulus_mesh(1.0, 2.0, 4, [0, 0], [4, 4]).unwrap();
    for e in m.elements() {
        for eta in [-0.7, 0.0, 0.9] {
            let xi = [1.0, eta, 0.0];
            let n = e.unnormalized_face_normal(0, Side::Upper, &xi).unwrap();
            let x = e.map.to_physical(&xi);
            let cross = n[0] * x[1] - n[1] * x[0];
            assert!(cross.abs() < 1e-10);
            assert!(n[0] * x[0] + n[1] * x[1] > 0.0);
        }
    }
}

#[test]
fn uniform_refinement() {
    let m = build_rectilinear_mesh(&[(0.0, 1.0), (0.0, 1.0)], &[1, 1], &[5, 5]).unwrap();
    let h = refine_uniform(&m, RefinementMode::H).unwrap();
    assert_eq!(h.elements().len(), 16);
    assert!(h.elements().iter().all(|e| e.degrees[..2] == [5, 5]));
    let p = refine_uniform(&m, RefinementMode::P).unwrap();
    assert!(p.elements().iter().all(|e| e.degrees[..2] == [6, 6]));

    let offset = m.with_degrees(|k, _| if k == 0 { [3, 4, 0] } else { [5, 5, 0] }).unwrap();
    let p = refine_uniform(&offset, RefinementMode::P).unwrap();
    assert_eq!(p.elements()[0].degrees[..2], [4, 5]);
    assert_eq!(p.elements()[1].degrees[..2], [6, 6]);
}

#[test]
fn refined_annulus_children_lie_on_parent_curve() {
    let m = build_annulus_mesh(1.0, 2.0, 4, [0, 0], [3, 3]).unwrap();
    let fine = refine_uniform(&m, RefinementMode::H).unwrap();
    assert_eq!(fine.elements().len(), 16);
    for child in fine.elements() {
        let parent = &m.elements()[child.id.block];
        for corner in [[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]] {
            let x = child.map.to_physical(&[corner[0], corner[1], 0.0]);
            let mut xi_parent = [0.0; 3];
            for d in 0..2 {
                let (lo, hi) = child.id.segments[d].bounds();
                let t = 0.5 * (corner[d] + 1.0);
                xi_parent[d] = 2.0 * (lo + t * (hi - lo)) - 1.0;
            }
            let y = parent.map.to_physical(&xi_parent);
            assert!((x[0] - y[0]).abs() < 1e-12 && (x[1] - y[1]).abs() < 1e-12);
            let r = x[0].hypot(x[1]);
            let expected_r = 1.0 + 0.5 * (xi_parent[0] + 1.0);
            assert!((r - expected_r).abs() < 1e-12);
        }
    }
    assert_eq!(quadrature_volume(&fine).round(), (3.0 * std::f64::consts::PI).round());
}

#[test]
fn conforming_mortars() {
    let m = build_rectilinear_mesh(&[(0.0, 1.0), (0.0, 1.0)], &[1, 1], &[5, 5]).unwrap();
    let mortars = m.mortar_topology();
    assert_eq!(mortars.len(), 4);
    for mortar in mortars {
        assert_eq!(mortar.extents[0], 6);
        for s in &mortar.sides {
            assert_eq!(s.coverage[0], Coverage::Full);
        }
    }
    let mixed = m.with_degrees(|k, _| if k == 0 { [3, 3, 0] } else { [4, 4, 0] }).unwrap();
    let mortar = &mixed.mortar_topology()[0];
    assert_eq!(mortar.extents[0], 5);
}

#[test]
fn nonconforming_mortars_have_half_coverage() {
    let m = build_rectilinear_mesh(&[(0.0, 2.0), (0.0, 1.0)], &[1, 0], &[3, 3]).unwrap();
    let fine = m.refine_elements(|k, _| k == 1).unwrap();
    assert_eq!(fine.elements().len(), 5);
    let coarse = fine
        .elements()
        .iter()
        .position(|e| e.id.segments[0].level == 1 && e.id.segments[0].index == 0)
        .unwrap();
    match &fine.topology().faces[coarse][face_index(0, Side::Upper)] {
        FaceNeighbors::Internal(refs) => {
            assert_eq!(refs.len(), 2);
            let covs: Vec<Coverage> = refs
                .iter()
                .map(|r| fine.mortar_topology()[r.mortar].sides[r.slot].coverage[0])
                .collect();
            assert_eq!(covs, vec![Coverage::LowerHalf, Coverage::UpperHalf]);
            for r in refs {
                let other = &fine.mortar_topology()[r.mortar].sides[1 - r.slot];
                assert_eq!(other.coverage[0], Coverage::Full);
            }
        }
        other => panic!("expected internal face, got {other:?}"),
    }
}

#[test]
fn two_level_jump_is_rejected() {
    let m = build_rectilinear_mesh(&[(0.0, 2.0), (0.0, 1.0)], &[1, 0], &[2, 2]).unwrap();
    let once = m.refine_elements(|k, _| k == 1).unwrap();
    let left_lower = once
        .elements()
        .iter()
        .position(|e| e.id.segments[0].level == 2 && e.id.segments[0].index == 2 && e.id.segments[1].index == 0)
        .unwrap();
    let err = once.refine_elements(|k, _| k == left_lower).unwrap_err();
    assert!(matches!(err, DgError::Topology(_)));
}

#[test]
fn shared_mortars_are_consistent() {
    let m = build_rectilinear_mesh(&[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)], &[1, 1, 0], &[2, 2, 2]).unwrap();
    let m = m.refine_elements(|k, _| k == 0).unwrap();
    let topo = m.topology();
    for (k, faces) in topo.faces.iter().enumerate() {
        for (f, n) in faces.iter().enumerate() {
            if let FaceNeighbors::Internal(refs) = n {
                for r in refs {
                    let side = &topo.mortars[r.mortar].sides[r.slot];
                    assert_eq!(side.element, k);
                    assert_eq!(face_index(side.direction, side.side), f);
                }
            }
        }
    }
    for (mi, mortar) in topo.mortars.iter().enumerate() {
        for slot in 0..2 {
            let s = &mortar.sides[slot];
            match &topo.faces[s.element][face_index(s.direction, s.side)] {
                FaceNeighbors::Internal(refs) => {
                    assert!(refs.contains(&MortarRef { mortar: mi, slot }))
                }
                _ => panic!("mortar side on an external face"),
            }
        }
    }
}

#[test]
fn summary_csv_lists_every_element() {
    let m = build_rectilinear_mesh(&[(0.0, 1.0), (0.0, 1.0)], &[1, 0], &[3, 2]).unwrap();
    let csv = m.summary_csv().unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "element,block,n_points,degrees,h");
    assert_eq!(lines[1], "0,0,12,3x2,0.5x1.0");
    assert_eq!(lines.len(), 3);
}
