use std::path::Path;

use tvtune_core::harness::{Mode, RunConfig};

#[test]
fn shipped_training_config_matches_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/train.toml");
    let cfg = RunConfig::load(&path).unwrap();
    let defaults = RunConfig::default();
    assert_eq!(cfg.mode, Some(Mode::Train));
    assert_eq!(cfg.seed, 1);
    assert_eq!(cfg.hyper, defaults.hyper);
    assert_eq!(cfg.episode, defaults.episode);
    assert!(cfg.output.unwrap().ends_with("../runs/seed1"));
}
