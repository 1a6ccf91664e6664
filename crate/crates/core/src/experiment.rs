//! Experiment specification files and the run driver.
//!
//! Specs are TOML. Top-level keys select the experiment; the `[geometry]`
//! and `[detector]` tables hold the model and detector parameters. Any key
//! can be overridden with a dotted `path=value` pair whose value is parsed
//! as a TOML value, falling back to a plain string:
//!
//! ```text
//! mode = "roc"
//! n_trials = 200
//!
//! [geometry]
//! L = 40
//! seed = 7
//! ```
//!
//! with overrides such as `geometry.L=80` or `cell_sides=[500, 1000]`.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::detector::{default_nu_sweep, DetectorConfig};
use crate::harness::{
    compare_architectures, oracle_cross_check, run_trials, snr_survey, validate_nu_list, write_cross_checks_csv,
    write_snr_csv, write_snr_summary_csv, write_summary_csv, write_trials_csv, CrossCheck, HarnessError, RocReport,
    SnrStatistic,
};
use crate::scenario::{GeometryConfig, ValidationError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Roc,
    SnrSurvey,
    Compare,
    Validate,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Roc => "roc",
            Mode::SnrSurvey => "snr-survey",
            Mode::Compare => "compare",
            Mode::Validate => "validate",
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub n_trials: usize,
    /// Threshold multipliers swept by `roc` and `compare`.
    pub nu_list: Vec<f64>,
    pub output_dir: PathBuf,
    /// Worker threads; absent means all available cores.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Cell sides (meters) of the SNR survey.
    pub cell_sides: Vec<f64>,
    pub snr_statistic: SnrStatistic,
    /// Write measured per-trial times instead of `NA`. Makes the trial
    /// files differ between runs.
    pub record_timing: bool,
    pub geometry: GeometryConfig,
    pub detector: DetectorConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            mode: Mode::Roc,
            n_trials: 100,
            nu_list: default_nu_sweep(),
            output_dir: PathBuf::from("results"),
            workers: None,
            cell_sides: vec![500.0, 1000.0, 2000.0],
            snr_statistic: SnrStatistic::DominantAp,
            record_timing: false,
            geometry: GeometryConfig::default(),
            detector: DetectorConfig::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ValidationError> {
        self.geometry.validate()?;
        self.detector.validate()?;
        validate_nu_list(&self.nu_list)?;
        if self.n_trials == 0 {
            return Err(ValidationError::new("n_trials", "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(ValidationError::new("workers", "must be at least 1"));
        }
        if self.cell_sides.is_empty() {
            return Err(ValidationError::new("cell_sides", "needs at least one value"));
        }
        if let Some(bad) = self.cell_sides.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(ValidationError::new("cell_sides", format!("must be positive, got {bad}")));
        }
        // TOML integers are signed 64-bit
        if i64::try_from(self.geometry.seed).is_err() {
            return Err(ValidationError::new("geometry.seed", "must not exceed 2^63 - 1"));
        }
        if i64::try_from(self.detector.permutation_seed).is_err() {
            return Err(ValidationError::new("detector.permutation_seed", "must not exceed 2^63 - 1"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment spec serializes to TOML")
    }

    /// SHA-256 of [`Self::to_toml`], hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid override {0:?}: expected path=value")]
    Override(String),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Sets `path = value` in `table`, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), SpecError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| SpecError::Override(assignment.to_string()))?;
    let keys: Vec<&str> = path.trim().split('.').map(str::trim).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(SpecError::Override(assignment.to_string()));
    }
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut node = table;
    for key in parents {
        let entry = node
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| SpecError::Parse {
            origin: format!("override {assignment:?}"),
            message: format!("{key} is not a table"),
        })?;
    }
    node.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Parses TOML text as a spec after applying `overrides` in order.
pub fn parse_spec_str(text: &str, origin: &str, overrides: &[String]) -> Result<ExperimentSpec, SpecError> {
    let parse_error = |e: toml::de::Error| SpecError::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    };
    // typed parse of the file alone keeps line numbers in the diagnostics
    let from_file: ExperimentSpec = toml::from_str(text).map_err(parse_error)?;
    if overrides.is_empty() {
        from_file.validate()?;
        return Ok(from_file);
    }
    let mut table: toml::Table = toml::from_str(text).map_err(parse_error)?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let spec = ExperimentSpec::deserialize(toml::Value::Table(table)).map_err(|e| SpecError::Parse {
        origin: format!("{origin} with overrides"),
        message: e.to_string(),
    })?;
    spec.validate()?;
    Ok(spec)
}

/// Reads `config` (all defaults when absent), then applies `overrides`.
pub fn parse_spec(config: Option<&Path>, overrides: &[String]) -> Result<ExperimentSpec, SpecError> {
    match config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| SpecError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            parse_spec_str(&text, &path.display().to_string(), overrides)
        }
        None => parse_spec_str("", "defaults", overrides),
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("{failed} of {total} oracle checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

/// Files written by a run plus the headline numbers printed to the terminal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    spec_sha256: String,
    mode: &'static str,
    master_seed: u64,
    crate_version: &'static str,
    workers: usize,
    wall_time_s: f64,
    files: Vec<&'a Path>,
}

struct Out<'a> {
    dir: &'a Path,
    summary: RunSummary,
}

impl Out<'_> {
    fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn std::io::Write) -> std::io::Result<()>) -> Result<(), RunError> {
        let path = self.dir.join(name);
        let io = |source| RunError::Io { path: path.clone(), source };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let file = fs::File::create(&path).map_err(io)?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| std::io::Write::flush(&mut w)).map_err(io)?;
        self.summary.files.push(PathBuf::from(name));
        Ok(())
    }

    fn roc(&mut self, prefix: &str, rep: &RocReport, with_timing: bool) -> Result<(), RunError> {
        self.write(&format!("{prefix}trials.csv"), |w| write_trials_csv(w, rep.metrics(), with_timing))?;
        self.write(&format!("{prefix}summary.csv"), |w| write_summary_csv(w, &rep.curve))?;
        Ok(())
    }
}

fn roc_line(label: &str, rep: &RocReport) -> String {
    let at = rep
        .curve
        .p_md_at_p_fa(0.1)
        .map_or("not bracketed".to_string(), |v| format!("{v:.4}"));
    format!(
        "{label}: {} trials ({} without active devices), p_md at p_fa=0.1: {at}, monotone: {}",
        rep.n_trials(),
        rep.excluded_from_md,
        rep.curve.is_monotone()
    )
}

/// Runs `spec`, writing results, the echoed spec and `manifest.json` into
/// `spec.output_dir`. Result files depend only on the spec.
pub fn run(spec: &ExperimentSpec) -> Result<RunSummary, RunError> {
    spec.validate()?;
    let started = Instant::now();
    let workers = spec
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let mut out = Out {
        dir: &spec.output_dir,
        summary: RunSummary::default(),
    };
    out.write("spec.toml", |w| w.write_all(spec.to_toml().as_bytes()))?;

    let verdict = pool.install(|| dispatch(spec, &mut out))?;

    let manifest = Manifest {
        spec_sha256: spec.digest(),
        mode: spec.mode.as_str(),
        master_seed: spec.geometry.seed,
        crate_version: env!("CARGO_PKG_VERSION"),
        workers,
        wall_time_s: started.elapsed().as_secs_f64(),
        files: out.summary.files.iter().map(PathBuf::as_path).collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    out.write("manifest.json", |w| writeln!(w, "{json}"))?;
    verdict?;
    Ok(out.summary)
}

/// Returns the oracle verdict separately so the manifest is still written
/// when checks fail.
fn dispatch(spec: &ExperimentSpec, out: &mut Out<'_>) -> Result<Result<(), RunError>, RunError> {
    let g = &spec.geometry;
    let d = &spec.detector;
    match spec.mode {
        Mode::Roc => {
            let rep = run_trials(g, d, spec.n_trials, &spec.nu_list)?;
            out.roc("", &rep, spec.record_timing)?;
            out.summary.lines.push(roc_line(if g.colocated { "co-located" } else { "cell-free" }, &rep));
        }
        Mode::Compare => {
            let cmp = compare_architectures(g, d, spec.n_trials, &spec.nu_list)?;
            out.roc("cell-free/", &cmp.cell_free, spec.record_timing)?;
            out.roc("colocated/", &cmp.colocated, spec.record_timing)?;
            out.summary.lines.push(roc_line("cell-free", &cmp.cell_free));
            out.summary.lines.push(roc_line("co-located", &cmp.colocated));
        }
        Mode::SnrSurvey => {
            let surveys = snr_survey(g, spec.n_trials, &spec.cell_sides, spec.snr_statistic)?;
            out.write("snr.csv", |w| write_snr_csv(w, &surveys))?;
            out.write("snr_summary.csv", |w| write_snr_summary_csv(w, &surveys))?;
            for s in &surveys {
                out.summary.lines.push(format!(
                    "side {} m: median gap {:.2} dB over {} devices",
                    s.cell_side,
                    s.median_gap_db(),
                    s.cell_free_db.len()
                ));
            }
        }
        Mode::Validate => {
            use rayon::prelude::*;
            let checks: Vec<CrossCheck> = (0..spec.n_trials as u64)
                .into_par_iter()
                .map(|t| oracle_cross_check(g, d, t))
                .collect::<Result<Vec<_>, _>>()?
                .concat();
            out.write("validate.csv", |w| write_cross_checks_csv(w, &checks))?;
            out.summary.lines.extend(check_table(&checks));
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Ok(Err(RunError::ChecksFailed {
                    failed,
                    total: checks.len(),
                }));
            }
        }
    }
    Ok(Ok(()))
}

/// One line per check name: worst value, tolerance, pass count.
pub fn check_table(checks: &[CrossCheck]) -> Vec<String> {
    let mut names: Vec<&str> = checks.iter().map(|c| c.name).collect();
    names.dedup();
    let mut lines = vec![format!("{:<26} {:>12} {:>10} {:>8}  result", "check", "worst", "tolerance", "passed")];
    for name in names {
        let group: Vec<&CrossCheck> = checks.iter().filter(|c| c.name == name).collect();
        let worst = group.iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
        let passed = group.iter().filter(|c| c.passed).count();
        lines.push(format!(
            "{:<26} {:>12.3e} {:>10.0e} {:>4}/{:<3}  {}",
            name,
            worst,
            group[0].tolerance,
            passed,
            group.len(),
            if passed == group.len() { "PASS" } else { "FAIL" }
        ));
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_fills_defaults() {
        let spec = parse_spec_str("mode = \"roc\"\n", "test", &[]).unwrap();
        assert_eq!(spec.mode, Mode::Roc);
        assert_eq!(spec.geometry.n_devices, 400);
        assert_eq!(spec.geometry.epsilon, 0.1);
        assert_eq!(spec.geometry.seq_len, 40);
        assert_eq!(spec.geometry.sigma2_dbm, -109.0);
        assert_eq!(spec.geometry.rho_max_mw, 200.0);
        assert_eq!(spec.detector.iterations, 10);
    }

    #[test]
    fn overrides_win_over_file() {
        let file = "[geometry]\nL = 40\n";
        let spec = parse_spec_str(file, "test", &["geometry.L=80".into()]).unwrap();
        assert_eq!(spec.geometry.seq_len, 80);
        let spec = parse_spec_str(
            file,
            "test",
            &["mode=snr-survey".into(), "cell_sides=[500, 1000]".into(), "geometry.snr_target=full".into()],
        )
        .unwrap();
        assert_eq!(spec.mode, Mode::SnrSurvey);
        assert_eq!(spec.cell_sides, vec![500.0, 1000.0]);
        assert_eq!(spec.geometry.snr_target, crate::scenario::PowerPolicy::Full);
    }

    #[test]
    fn field_precise_errors() {
        match parse_spec_str("[geometry]\nepsilon = 1.5\n", "test", &[]) {
            Err(SpecError::Validation(e)) => assert_eq!(e.field, "geometry.epsilon"),
            other => panic!("{other:?}"),
        }
        match parse_spec_str("mode = \"roc\"\n[geometry]\nL = \n", "cfg.toml", &[]) {
            Err(SpecError::Parse { message, .. }) => assert!(message.contains("line 3"), "{message}"),
            other => panic!("{other:?}"),
        }
        match parse_spec_str("[geometry]\nbogus = 1\n", "test", &[]) {
            Err(SpecError::Parse { message, .. }) => assert!(message.contains("bogus"), "{message}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_spec_str("", "test", &["geometry.L".into()]), Err(SpecError::Override(_))));
        match parse_spec_str("", "test", &["nu_list=[1.0, -2.0]".into()]) {
            Err(SpecError::Validation(e)) => assert_eq!(e.field, "nu_list"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn echoed_spec_round_trips() {
        let spec = parse_spec_str(
            "mode = \"compare\"\n[geometry]\nM = 4\nsnr_target = 12.5\n[detector]\nT = 3\n",
            "test",
            &[],
        )
        .unwrap();
        let again = parse_spec_str(&spec.to_toml(), "echo", &[]).unwrap();
        assert_eq!(spec, again);
        assert_eq!(spec.digest(), again.digest());
    }
}
