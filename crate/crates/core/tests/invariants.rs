use std::sync::Arc;

use mhd_core::assembly::{cell_divergence, convection, discrete_curl, mass};
use mhd_core::linalg::CsrMatrix;
use mhd_core::spaces::{Field, FeSpace, SpaceKind};
use mhd_core::Mesh;
use proptest::prelude::*;

fn boxes() -> impl Strategy<Value = (usize, usize, usize, [f64; 3])> {
    (1usize..=3, 1usize..=3, 1usize..=3, [0.2f64..3.0, 0.2f64..3.0, 0.2f64..3.0])
}

fn quad(m: &CsrMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    m.spmv(y).unwrap().iter().zip(x).map(|(a, b)| a * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn box_mesh_topology((nx, ny, nz, ext) in boxes()) {
        let m = Mesh::build_box(nx, ny, nz, ext).unwrap();
        prop_assert_eq!(m.num_cells(), 6 * nx * ny * nz);
        prop_assert_eq!(m.num_vertices(), (nx + 1) * (ny + 1) * (nz + 1));
        let euler = m.num_vertices() as i64 - m.num_edges() as i64 + m.num_faces() as i64 - m.num_cells() as i64;
        prop_assert_eq!(euler, 1);
        prop_assert_eq!(m.boundary_faces().len(), 4 * (nx * ny + ny * nz + nx * nz));
        let volume: f64 = (0..m.num_cells()).map(|c| m.cell_volume(c)).sum();
        prop_assert!((volume - ext[0] * ext[1] * ext[2]).abs() <= 1e-12 * volume);
        prop_assert!((0..m.num_cells()).all(|c| m.cell_volume(c) > 0.0));
        for f in 0..m.num_faces() {
            let n = m.face_cells(f).len();
            prop_assert_eq!(n == 1, m.is_boundary_face(f));
            prop_assert!(n == 1 || n == 2);
        }
    }

    #[test]
    fn curl_of_gradient_and_div_of_curl_vanish((nx, ny, nz, ext) in boxes()) {
        let m = Mesh::build_box(nx, ny, nz, ext).unwrap();
        let d = discrete_curl(&m).to_dense();
        // gradient incidence: edge (a, b) with a < b runs from a to b
        prop_assert!(m.edges().iter().all(|[a, b]| a < b));
        for v in 0..m.num_vertices() {
            for row in &d {
                let s: f64 = m
                    .edges()
                    .iter()
                    .enumerate()
                    .map(|(e, [a, b])| row[e] * if *b == v { 1.0 } else if *a == v { -1.0 } else { 0.0 })
                    .sum();
                prop_assert_eq!(s, 0.0);
            }
        }
        for c in 0..m.num_cells() {
            for e in 0..m.num_edges() {
                let s: f64 = m
                    .cell_faces(c)
                    .iter()
                    .zip(m.cell_face_signs(c))
                    .map(|(f, sign)| f64::from(*sign) * d[*f][e])
                    .sum();
                prop_assert_eq!(s, 0.0);
            }
        }
    }

    #[test]
    fn curl_of_any_edge_field_is_solenoidal(coeffs in prop::collection::vec(-5.0f64..5.0, 98)) {
        let m = Arc::new(Mesh::build_box(2, 2, 2, [1.0, 0.7, 1.3]).unwrap());
        prop_assert_eq!(m.num_edges(), 98);
        let rt = FeSpace::build(&m, SpaceKind::RaviartThomas);
        let b = discrete_curl(&m).spmv(&coeffs).unwrap();
        let div = cell_divergence(&Field::from_coeffs(&rt, b).unwrap()).unwrap();
        prop_assert!(div.iter().all(|d| d.abs() < 1e-12), "{:?}", div);
    }

    #[test]
    fn convection_is_skew_for_any_advector(seed in prop::collection::vec(-2.0f64..2.0, 1..64)) {
        let m = Arc::new(Mesh::build_box(1, 1, 2, [1.0, 1.0, 1.0]).unwrap());
        let v = FeSpace::build(&m, SpaceKind::VectorP2);
        let n = v.dof_count();
        let at = |i: usize, shift: usize| seed[(i * 7 + shift) % seed.len()] * (1.0 + (i % 5) as f64);
        let w = Field::from_coeffs(&v, (0..n).map(|i| at(i, 0)).collect()).unwrap();
        let x: Vec<f64> = (0..n).map(|i| at(i, 3)).collect();
        let c = convection(&w).unwrap();
        let scale = c.max_abs() * x.iter().map(|a| a * a).sum::<f64>();
        prop_assert!(quad(&c, &x, &x).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn mass_matrices_are_symmetric_positive(x in prop::collection::vec(-1.0f64..1.0, 1..32)) {
        let m = Arc::new(Mesh::build_box(1, 2, 1, [0.5, 1.0, 2.0]).unwrap());
        for kind in [SpaceKind::P1, SpaceKind::VectorP2, SpaceKind::Nedelec, SpaceKind::RaviartThomas] {
            let s = FeSpace::build(&m, kind);
            let n = s.dof_count();
            let a = mass(&s, 1.0).unwrap();
            let y: Vec<f64> = (0..n).map(|i| x[i % x.len()] + 1e-3 * i as f64).collect();
            let z: Vec<f64> = (0..n).map(|i| x[(i + 1) % x.len()]).collect();
            prop_assert!(quad(&a, &y, &y) > 0.0);
            let (yz, zy) = (quad(&a, &y, &z), quad(&a, &z, &y));
            prop_assert!((yz - zy).abs() <= 1e-13 * (1.0 + yz.abs()));
        }
    }

    #[test]
    fn csr_triplets_sum_duplicates(entries in prop::collection::vec((0usize..6, 0usize..5, -3.0f64..3.0), 0..40)) {
        let a = CsrMatrix::from_triplets(6, 5, &entries);
        let mut dense = vec![vec![0.0; 5]; 6];
        for (i, j, v) in &entries {
            dense[*i][*j] += v;
        }
        let got = a.to_dense();
        for i in 0..6 {
            for j in 0..5 {
                prop_assert!((got[i][j] - dense[i][j]).abs() <= 1e-12);
            }
        }
        prop_assert_eq!(a.transpose().transpose().to_dense(), got);
    }
}
