//! Production assembly against the physical-coordinate reference assembly.

use std::sync::Arc;

use mhd_core::verify::{self, jittered_cube};
use mhd_core::Mesh;

#[test]
fn every_selftest_check_passes() {
    let checks = verify::selftest().unwrap();
    for c in &checks {
        println!("{c}");
    }
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed()).collect();
    assert!(failed.is_empty(), "{failed:#?}");
}

#[test]
fn oracle_on_a_single_skewed_cell() {
    let v = vec![[0.1, 0.0, 0.2], [1.3, 0.2, 0.0], [0.4, 0.9, 0.1], [0.3, 0.2, 1.1]];
    let mesh = Arc::new(Mesh::from_cells(v, vec![[0, 1, 2, 3]]).unwrap());
    for c in verify::oracle_checks(&mesh, "one cell").unwrap() {
        assert!(c.passed(), "{c}");
    }
    for c in verify::de_rham_checks(&mesh, "one cell").unwrap() {
        assert!(c.passed(), "{c}");
    }
}

#[test]
fn oracle_on_a_stretched_box() {
    let mesh = Arc::new(Mesh::build_box(2, 1, 3, [1.0, 0.5, 2.0]).unwrap());
    assert!(mesh.num_cells() <= 48);
    for c in verify::oracle_checks(&mesh, "stretched").unwrap() {
        assert!(c.passed(), "{c}");
    }
}

#[test]
fn jittered_cube_keeps_topology() {
    let j = jittered_cube().unwrap();
    let b = Mesh::build_box(2, 2, 2, [1.0; 3]).unwrap();
    assert_eq!((j.num_vertices(), j.num_edges(), j.num_faces(), j.num_cells()), (b.num_vertices(), b.num_edges(), b.num_faces(), b.num_cells()));
    let vol: f64 = (0..j.num_cells()).map(|c| j.cell_volume(c)).sum();
    assert!(vol > 0.5 && vol < 1.5);
}
