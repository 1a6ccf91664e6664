//! Loading a TOML experiment spec with overrides and running it.

use cfmimo::experiment::{parse_spec, run};

fn main() {
    let config = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/validate.toml");
    let out = std::env::temp_dir().join("cfmimo_validate");
    let overrides = vec!["n_trials=3".to_string(), format!("output_dir={:?}", out.display().to_string())];
    let spec = parse_spec(Some(&config), &overrides).unwrap();
    println!("{}", spec.to_toml());
    let summary = run(&spec).unwrap();
    for line in &summary.lines {
        println!("{line}");
    }
    println!("wrote {:?} to {}", summary.files, out.display());
}
