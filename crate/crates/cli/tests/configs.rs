use std::path::Path;

use mhd_cli::config::{parse_config, parse_config_for, ExperimentKind};

fn read(name: &str) -> String {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn shipped_configurations_parse() {
    let mms = parse_config(&read("mms.toml")).unwrap();
    assert_eq!((mms.divisions, mms.time_steps()), (4, 8));
    let h = parse_config_for(&read("sweep_h.toml"), Some(ExperimentKind::HSweep)).unwrap();
    assert_eq!(h.sweep_divisions, vec![2, 4, 8]);
    let k = parse_config_for(&read("sweep_k.toml"), Some(ExperimentKind::KSweep)).unwrap();
    assert_eq!(k.sweep_steps, vec![0.25, 0.125, 0.0625, 0.03125]);
    for kind in [ExperimentKind::Energy, ExperimentKind::Gauss] {
        let c = parse_config_for(&read("invariants.toml"), Some(kind)).unwrap();
        assert_eq!((c.divisions, c.time_steps()), (4, 20));
    }
}
