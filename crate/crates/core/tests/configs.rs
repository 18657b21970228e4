use std::path::PathBuf;

use daqff::eval::RunConfig;

#[test]
fn shipped_configs_load() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(cfg.data.path.is_absolute() || cfg.data.path.starts_with(&dir), "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
