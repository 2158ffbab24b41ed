//! Experiment configuration: a flat INI file validated against a fixed schema.
//!
//! A configuration is a set of `section.key = value` pairs. Every key the
//! tool understands has a default, so the empty file is a valid experiment;
//! unknown sections, unknown keys, and duplicate keys are rejected by name.
//! The *resolved* configuration — defaults overlaid with the file and any
//! command-line overrides — is what every command records into its outputs:
//! a SHA-256 over the sorted `key=value` lines ([`ExperimentConfig::hash`])
//! plus the schema version accompany every emitted file, so a result can be
//! traced back to the exact settings that produced it.
//!
//! Grammar, line by line:
//!
//! ```text
//!   # comment            (also ';')
//!   [section]
//!   key = value
//! ```
//!
//! Whole-line comments only; values keep interior whitespace but are trimmed
//! at both ends.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use sha2::{Digest, Sha256};

use crate::coeffs::{CoefficientModel, Interval};
use crate::error::{Error, Result};
use crate::lpdecomp::CutoffFamily;
use crate::noise::{NoiseModel, SpatialProfileKind, StateProfile};
use crate::nondeg::{AlphaOptions, SymbolVariant};
use crate::regularity::RegularityMode;
use crate::solver::{GridSpec, InitialData};

/// Version of the configuration schema; recorded in every output file.
pub const SCHEMA_VERSION: &str = "1";

/// Every key the tool understands, with its default value. The defaults form
/// a complete, runnable experiment (a deterministic 2-D power-law run).
const SCHEMA: &[(&str, &str)] = &[
    ("meta.schema_version", SCHEMA_VERSION),
    ("model.family", "powerlaw"),
    ("model.l", "1"),
    ("model.n", "1"),
    ("model.c", "1.0"),
    ("model.table_path", ""),
    ("model.margin", "1.0"),
    ("grid.d", "auto"),
    ("grid.nx", "64,64"),
    ("grid.box", "1.0"),
    ("grid.T", "0.25"),
    ("grid.cfl", "0.4"),
    ("init.kind", "bump"),
    ("init.left", "1.0"),
    ("init.right", "0.0"),
    ("init.axis", "0"),
    ("init.amplitude", "0.5"),
    ("init.radius", "0.8"),
    ("init.offset", "auto"),
    ("init.k", "auto"),
    ("init.file", ""),
    ("noise.modes", "0"),
    ("noise.seed", "0"),
    ("noise.psi", "bounded_linear"),
    ("noise.profile", "fourier"),
    ("lp.preset", "stochastic"),
    ("lp.nu", "0.45"),
    ("nondeg.sphere_samples", "256"),
    ("nondeg.delta_min", "1e-4"),
    ("nondeg.delta_max", "1e-1"),
    ("nondeg.delta_points", "12"),
    ("nondeg.lambda_grid", "4096"),
    ("nondeg.seed", "0"),
    ("nondeg.variant", "squared"),
    ("regularity.q", "2.0"),
    ("regularity.mode", "spacetime"),
    ("regularity.window", "auto"),
    ("regularity.alpha", "fit"),
    ("output.dir", "out"),
    ("output.paths", "1"),
    ("output.stride", "0"),
    ("output.formats", "krg,csv"),
];

fn schema_default(key: &str) -> Option<&'static str> {
    SCHEMA.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

fn cfg_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Where the non-degeneracy exponent α for a regularity verdict comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSource {
    /// Fit α from the configured model's δ-sweep.
    Fitted,
    /// Use a fixed rational value.
    Fixed(Ratio<i64>),
}

/// Which artifact kinds a run writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputFormats {
    /// Binary snapshot files.
    pub snapshots: bool,
    /// CSV reports (summaries, block norms, sweeps).
    pub reports: bool,
}

#[derive(Debug)]
struct RawEntry {
    key: String,
    value: String,
    line: usize,
}

/// Split `text` into entries, collecting one error per offending line.
fn parse_entries(text: &str) -> (Vec<RawEntry>, Vec<Error>) {
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    let mut section: Option<String> = None;
    for (nr, raw_line) in text.lines().enumerate() {
        let nr = nr + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name)
                    if !name.is_empty()
                        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') =>
                {
                    section = Some(name.to_string());
                }
                _ => errors.push(cfg_err(
                    &format!("line {nr}"),
                    format!("malformed section header {line:?}"),
                )),
            }
            continue;
        }
        let Some((key_part, value_part)) = line.split_once('=') else {
            errors.push(cfg_err(
                &format!("line {nr}"),
                format!("expected `key = value`, got {line:?}"),
            ));
            continue;
        };
        let key_name = key_part.trim();
        if key_name.is_empty()
            || !key_name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            errors.push(cfg_err(
                &format!("line {nr}"),
                format!("bad key name {key_name:?}"),
            ));
            continue;
        }
        let Some(sec) = &section else {
            errors.push(cfg_err(
                &format!("line {nr}"),
                format!("key {key_name:?} appears before any [section] header"),
            ));
            continue;
        };
        entries.push(RawEntry {
            key: format!("{sec}.{key_name}"),
            value: value_part.trim().to_string(),
            line: nr,
        });
    }
    (entries, errors)
}

/// A fully resolved experiment configuration: every schema key has a value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    resolved: BTreeMap<String, String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let resolved = SCHEMA
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self { resolved }
    }
}

impl ExperimentConfig {
    /// Parse `text`, stopping at the first problem. Semantic validation
    /// (value ranges, cross-field consistency) happens lazily in the typed
    /// accessors; use [`ExperimentConfig::check_text`] for an exhaustive audit.
    pub fn from_text(text: &str) -> Result<Self> {
        let (entries, mut errors) = parse_entries(text);
        let (config, mut overlay_errors) = Self::overlay(entries);
        errors.append(&mut overlay_errors);
        match errors.into_iter().next() {
            Some(err) => Err(err),
            None => Ok(config),
        }
    }

    /// Read and parse a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    /// Every problem with `text`: syntax, unknown or duplicate keys, and all
    /// value-level failures the typed accessors would raise. Does not stop at
    /// the first error so one audit round-trips a whole broken file.
    pub fn check_text(text: &str) -> Vec<Error> {
        let (entries, mut errors) = parse_entries(text);
        let (config, mut overlay_errors) = Self::overlay(entries);
        errors.append(&mut overlay_errors);
        errors.extend(config.semantic_problems());
        let mut seen = std::collections::HashSet::new();
        errors.retain(|e| seen.insert(e.to_string()));
        errors
    }

    fn overlay(entries: Vec<RawEntry>) -> (Self, Vec<Error>) {
        let mut config = Self::default();
        let mut errors = Vec::new();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for entry in entries {
            if schema_default(&entry.key).is_none() {
                errors.push(cfg_err(
                    &entry.key,
                    format!("unknown key (line {})", entry.line),
                ));
                continue;
            }
            if let Some(first) = seen.get(&entry.key) {
                errors.push(cfg_err(
                    &entry.key,
                    format!(
                        "duplicate key (line {}, first set on line {first})",
                        entry.line
                    ),
                ));
                continue;
            }
            seen.insert(entry.key.clone(), entry.line);
            config.resolved.insert(entry.key, entry.value);
        }
        (config, errors)
    }

    /// Override one key, e.g. from a command-line flag. The key must exist in
    /// the schema; the value is validated when the matching accessor runs.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if schema_default(key).is_none() {
            return Err(cfg_err(key, "unknown key"));
        }
        self.resolved.insert(key.to_string(), value.into());
        Ok(())
    }

    /// The raw resolved value of a schema key. Panics on keys outside the
    /// schema — that is a programming error, not a user error.
    pub fn get(&self, key: &str) -> &str {
        self.resolved
            .get(key)
            .unwrap_or_else(|| panic!("key {key} is not in the schema"))
            .as_str()
    }

    /// The full resolved map (defaults included), sorted by key.
    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }

    /// SHA-256 over the sorted `key=value` lines of the resolved map.
    /// Identical settings hash identically regardless of file layout,
    /// comments, or whether a value was set explicitly or by default.
    /// `output.dir` is excluded: the hash identifies the computation, and
    /// where its results land must not change what they say — reruns into
    /// different directories stay byte-identical.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in &self.resolved {
            if k == "output.dir" {
                continue;
            }
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            write!(hex, "{byte:02x}").unwrap();
        }
        hex
    }

    // -- typed accessors ----------------------------------------------------

    fn parse_scalar<T: FromStr>(&self, key: &str, expected: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(key);
        raw.parse()
            .map_err(|e| cfg_err(key, format!("expected {expected}, got {raw:?} ({e})")))
    }

    fn finite_f64(&self, key: &str) -> Result<f64> {
        let v: f64 = self.parse_scalar(key, "a real number")?;
        if !v.is_finite() {
            return Err(cfg_err(key, format!("value must be finite, got {v}")));
        }
        Ok(v)
    }

    fn positive_f64(&self, key: &str) -> Result<f64> {
        let v = self.finite_f64(key)?;
        if v <= 0.0 {
            return Err(cfg_err(key, format!("value must be positive, got {v}")));
        }
        Ok(v)
    }

    /// Schema version recorded in the file; must match what this build writes.
    pub fn schema_version(&self) -> Result<&str> {
        let v = self.get("meta.schema_version");
        if v != SCHEMA_VERSION {
            return Err(cfg_err(
                "meta.schema_version",
                format!("unsupported schema version {v:?}; this build writes {SCHEMA_VERSION:?}"),
            ));
        }
        Ok(v)
    }

    fn grid_extents(&self) -> Result<Vec<usize>> {
        let raw = self.get("grid.nx");
        let mut nx = Vec::new();
        for part in raw.split(',') {
            let n: i64 = part.trim().parse().map_err(|_| {
                cfg_err("grid.nx", format!("expected a list of integers, got {raw:?}"))
            })?;
            if n < 4 {
                return Err(cfg_err(
                    "grid.nx",
                    format!("every grid extent must be at least 4 cells, got {n}"),
                ));
            }
            nx.push(n as usize);
        }
        if nx.is_empty() || nx.len() > 2 {
            return Err(cfg_err(
                "grid.nx",
                format!("expected 1 or 2 axes, got {}", nx.len()),
            ));
        }
        Ok(nx)
    }

    /// Spatial dimension: `grid.d = auto` follows `grid.nx`; an explicit
    /// value must agree with it.
    pub fn dimension(&self) -> Result<usize> {
        let nx = self.grid_extents()?;
        match self.get("grid.d") {
            "auto" => Ok(nx.len()),
            raw => {
                let d: usize = raw.parse().map_err(|_| {
                    cfg_err("grid.d", format!("expected auto, 1, or 2, got {raw:?}"))
                })?;
                if d != nx.len() {
                    return Err(cfg_err(
                        "grid.d",
                        format!("d = {d} disagrees with grid.nx, which has {} axes", nx.len()),
                    ));
                }
                Ok(d)
            }
        }
    }

    fn cfl_factor(&self) -> Result<f64> {
        let cfl = self.finite_f64("grid.cfl")?;
        if !(cfl > 0.0 && cfl <= 0.5) {
            return Err(cfg_err(
                "grid.cfl",
                format!("CFL factor must lie in (0, 0.5], got {cfl}"),
            ));
        }
        Ok(cfl)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let nx = self.grid_extents()?;
        self.dimension()?;
        let half_width = self.positive_f64("grid.box")?;
        let t_final = self.positive_f64("grid.T")?;
        let cfl = self.cfl_factor()?;
        GridSpec::new(&nx, half_width, t_final, cfl)
    }

    /// The coefficient model exactly as configured (state interval untouched).
    pub fn base_model(&self) -> Result<CoefficientModel> {
        match self.get("model.family") {
            "powerlaw" => {
                let l: u32 = self.parse_scalar("model.l", "an integer ≥ 1")?;
                let n: u32 = self.parse_scalar("model.n", "an integer ≥ 1")?;
                if l == 0 {
                    return Err(cfg_err("model.l", "power-law exponent must be ≥ 1"));
                }
                if n == 0 {
                    return Err(cfg_err("model.n", "power-law exponent must be ≥ 1"));
                }
                CoefficientModel::power_law(l, n)
            }
            "burgers" => Ok(CoefficientModel::burgers()),
            "heat" => {
                let c = self.positive_f64("model.c")?;
                let d = self.dimension()?;
                CoefficientModel::heat(c, d)
            }
            "table" => {
                let path = self.get("model.table_path");
                if path.is_empty() {
                    return Err(cfg_err(
                        "model.table_path",
                        "required when model.family = table",
                    ));
                }
                CoefficientModel::from_csv(Path::new(path))
            }
            other => Err(cfg_err(
                "model.family",
                format!("unknown family {other:?}; expected powerlaw, burgers, heat, or table"),
            )),
        }
    }

    /// The model with its state interval widened by `model.margin` on both
    /// sides — headroom for stochastic runs, whose paths may leave the
    /// nominal interval.
    pub fn run_model(&self) -> Result<CoefficientModel> {
        let model = self.base_model()?;
        let margin = self.finite_f64("model.margin")?;
        if margin < 0.0 {
            return Err(cfg_err(
                "model.margin",
                format!("margin must be ≥ 0, got {margin}"),
            ));
        }
        if margin == 0.0 {
            return Ok(model);
        }
        let base = model.interval();
        let widened = Interval::new(base.lo() - margin, base.hi() + margin)?;
        Ok(model.with_interval(widened))
    }

    pub fn initial_data(&self) -> Result<InitialData> {
        let d = self.dimension()?;
        match self.get("init.kind") {
            "riemann" => {
                let axis: usize = self.parse_scalar("init.axis", "an axis index")?;
                if axis >= d {
                    return Err(cfg_err(
                        "init.axis",
                        format!("axis {axis} out of range for dimension {d}"),
                    ));
                }
                Ok(InitialData::Riemann {
                    left: self.finite_f64("init.left")?,
                    right: self.finite_f64("init.right")?,
                    axis,
                })
            }
            "bump" => {
                let offset = match self.get("init.offset") {
                    "auto" => vec![0.0; d],
                    raw => self.f64_list("init.offset", raw, d)?,
                };
                Ok(InitialData::Bump {
                    amplitude: self.finite_f64("init.amplitude")?,
                    radius: self.positive_f64("init.radius")?,
                    offset,
                })
            }
            "sine" => {
                let wavenumbers = match self.get("init.k") {
                    "auto" => vec![1; d],
                    raw => {
                        let ks: Vec<i64> = raw
                            .split(',')
                            .map(|p| p.trim().parse())
                            .collect::<std::result::Result<_, _>>()
                            .map_err(|_| {
                                cfg_err("init.k", format!("expected a list of integers, got {raw:?}"))
                            })?;
                        if ks.len() != d {
                            return Err(cfg_err(
                                "init.k",
                                format!("expected {d} wavenumbers, got {}", ks.len()),
                            ));
                        }
                        ks
                    }
                };
                Ok(InitialData::Sine {
                    amplitude: self.finite_f64("init.amplitude")?,
                    wavenumbers,
                })
            }
            "file" => {
                let path = self.get("init.file");
                if path.is_empty() {
                    return Err(cfg_err("init.file", "required when init.kind = file"));
                }
                Ok(InitialData::File {
                    path: PathBuf::from(path),
                })
            }
            other => Err(cfg_err(
                "init.kind",
                format!("unknown initial condition {other:?}; expected riemann, bump, sine, or file"),
            )),
        }
    }

    fn f64_list(&self, key: &str, raw: &str, want: usize) -> Result<Vec<f64>> {
        let vals: Vec<f64> = raw
            .split(',')
            .map(|p| p.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| cfg_err(key, format!("expected a list of reals, got {raw:?}")))?;
        if vals.len() != want {
            return Err(cfg_err(
                key,
                format!("expected {want} entries, got {}", vals.len()),
            ));
        }
        if let Some(bad) = vals.iter().find(|v| !v.is_finite()) {
            return Err(cfg_err(key, format!("entries must be finite, got {bad}")));
        }
        Ok(vals)
    }

    /// `None` when `noise.modes = 0` (deterministic runs).
    pub fn noise(&self) -> Result<Option<NoiseModel>> {
        let modes: usize = self.parse_scalar("noise.modes", "a mode count")?;
        let seed: u64 = self.parse_scalar("noise.seed", "an integer seed")?;
        let psi = match self.get("noise.psi") {
            "bounded_linear" => StateProfile::BoundedLinear,
            "constant" => StateProfile::Constant,
            "zero" => StateProfile::Zero,
            other => {
                return Err(cfg_err(
                    "noise.psi",
                    format!("unknown state profile {other:?}; expected bounded_linear, constant, or zero"),
                ))
            }
        };
        let profile = match self.get("noise.profile") {
            "fourier" => SpatialProfileKind::Fourier,
            "constant" => SpatialProfileKind::Constant,
            other => {
                return Err(cfg_err(
                    "noise.profile",
                    format!("unknown spatial profile {other:?}; expected fourier or constant"),
                ))
            }
        };
        Ok((modes > 0).then(|| NoiseModel::new(modes, psi, profile, seed)))
    }

    pub fn cutoffs(&self) -> Result<CutoffFamily> {
        match self.get("lp.preset") {
            "deterministic" => Ok(CutoffFamily::deterministic()),
            "stochastic" => {
                let nu = self.finite_f64("lp.nu")?;
                if !(nu > 0.0 && nu < 0.5) {
                    return Err(cfg_err(
                        "lp.nu",
                        format!("temporal roughness parameter must lie in (0, 1/2), got {nu}"),
                    ));
                }
                CutoffFamily::stochastic(nu)
            }
            other => Err(cfg_err(
                "lp.preset",
                format!("unknown preset {other:?}; expected stochastic or deterministic"),
            )),
        }
    }

    pub fn alpha_options(&self) -> Result<AlphaOptions> {
        let delta_min = self.positive_f64("nondeg.delta_min")?;
        let delta_max = self.positive_f64("nondeg.delta_max")?;
        if delta_min >= delta_max {
            return Err(cfg_err(
                "nondeg.delta_min",
                format!("must be smaller than nondeg.delta_max ({delta_min} ≥ {delta_max})"),
            ));
        }
        let variant = match self.get("nondeg.variant") {
            "squared" => SymbolVariant::Squared,
            "mixed" => SymbolVariant::Mixed,
            other => {
                return Err(cfg_err(
                    "nondeg.variant",
                    format!("unknown symbol variant {other:?}; expected squared or mixed"),
                ))
            }
        };
        Ok(AlphaOptions {
            sphere_samples: self.parse_scalar("nondeg.sphere_samples", "a sample count")?,
            delta_min,
            delta_max,
            delta_points: self.parse_scalar("nondeg.delta_points", "a point count")?,
            lambda_grid: self.parse_scalar("nondeg.lambda_grid", "a grid size")?,
            seed: self.parse_scalar("nondeg.seed", "an integer seed")?,
            variant,
        })
    }

    pub fn regularity_q(&self) -> Result<f64> {
        let q = self.finite_f64("regularity.q")?;
        if q < 1.0 {
            return Err(cfg_err(
                "regularity.q",
                format!("integrability exponent must be ≥ 1, got {q}"),
            ));
        }
        Ok(q)
    }

    pub fn regularity_mode(&self) -> Result<RegularityMode> {
        RegularityMode::from_name(self.get("regularity.mode"))
            .map_err(|e| cfg_err("regularity.mode", e.to_string()))
    }

    /// `None` = pick the fit window from the resolved block count.
    pub fn fit_window(&self) -> Result<Option<(usize, usize)>> {
        match self.get("regularity.window") {
            "auto" => Ok(None),
            raw => {
                let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
                let parsed: Option<(usize, usize)> = match parts.as_slice() {
                    [lo, hi] => lo.parse().ok().zip(hi.parse().ok()),
                    _ => None,
                };
                let (lo, hi) = parsed.ok_or_else(|| {
                    cfg_err(
                        "regularity.window",
                        format!("expected auto or `lo,hi`, got {raw:?}"),
                    )
                })?;
                if lo > hi {
                    return Err(cfg_err(
                        "regularity.window",
                        format!("window is empty: {lo} > {hi}"),
                    ));
                }
                Ok(Some((lo, hi)))
            }
        }
    }

    pub fn alpha_source(&self) -> Result<AlphaSource> {
        match self.get("regularity.alpha") {
            "fit" => Ok(AlphaSource::Fitted),
            raw => {
                let ratio = parse_ratio(raw).map_err(|e| {
                    cfg_err("regularity.alpha", format!("expected fit or a rational: {e}"))
                })?;
                if ratio <= Ratio::from_integer(0) {
                    return Err(cfg_err(
                        "regularity.alpha",
                        format!("exponent must be positive, got {}", format_ratio(ratio)),
                    ));
                }
                Ok(AlphaSource::Fixed(ratio))
            }
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.get("output.dir"))
    }

    /// Number of stochastic sample paths an ensemble run integrates.
    pub fn output_paths(&self) -> Result<usize> {
        let paths: usize = self.parse_scalar("output.paths", "a path count")?;
        if paths == 0 {
            return Err(cfg_err("output.paths", "at least one path is required"));
        }
        Ok(paths)
    }

    pub fn output_stride(&self) -> Result<usize> {
        self.parse_scalar("output.stride", "a snapshot stride")
    }

    pub fn output_formats(&self) -> Result<OutputFormats> {
        let raw = self.get("output.formats");
        let mut formats = OutputFormats {
            snapshots: false,
            reports: false,
        };
        for part in raw.split(',') {
            match part.trim() {
                "krg" => formats.snapshots = true,
                "csv" => formats.reports = true,
                other => {
                    return Err(cfg_err(
                        "output.formats",
                        format!("unknown format {other:?}; expected krg and/or csv"),
                    ))
                }
            }
        }
        if !(formats.snapshots || formats.reports) {
            return Err(cfg_err("output.formats", "at least one format is required"));
        }
        Ok(formats)
    }

    /// Run every typed accessor and cross-field check, collecting failures.
    pub fn semantic_problems(&self) -> Vec<Error> {
        let mut problems = Vec::new();
        let mut note = |r: Result<()>| {
            if let Err(e) = r {
                problems.push(e);
            }
        };
        note(self.schema_version().map(drop));
        let model = self.base_model();
        note(model.as_ref().map(drop).map_err(Error::clone_err));
        note(self.run_model().map(drop));
        // grid fields are checked one by one so a bad extent does not mask,
        // say, a bad CFL factor in the same section
        note(self.grid_extents().map(drop));
        note(self.dimension().map(drop));
        note(self.positive_f64("grid.box").map(drop));
        note(self.positive_f64("grid.T").map(drop));
        note(self.cfl_factor().map(drop));
        let grid = self.grid();
        if let (Ok(model), Ok(grid)) = (&model, &grid) {
            if model.dimension() != grid.dimension() {
                note(Err(cfg_err(
                    "model.family",
                    format!(
                        "model dimension {} does not match the {}-dimensional grid",
                        model.dimension(),
                        grid.dimension()
                    ),
                )));
            }
        }
        if grid.is_ok() {
            note(self.initial_data().map(drop));
        }
        note(self.noise().map(drop));
        note(self.cutoffs().map(drop));
        note(self.alpha_options().map(drop));
        note(self.regularity_q().map(drop));
        note(self.regularity_mode().map(drop));
        note(self.fit_window().map(drop));
        note(self.alpha_source().map(drop));
        note(self.output_paths().map(drop));
        note(self.output_stride().map(drop));
        note(self.output_formats().map(drop));
        problems
    }
}

/// Work around `Error` not being `Clone`: rebuild an equivalent value for
/// the collect-everything path.
trait CloneErr {
    fn clone_err(&self) -> Error;
}

impl CloneErr for Error {
    fn clone_err(&self) -> Error {
        match self {
            Error::Config { key, message } => Error::Config {
                key: key.clone(),
                message: message.clone(),
            },
            other => Error::InvalidArgument(other.to_string()),
        }
    }
}

/// Parse `p/q` or a plain decimal (`0.5`, `-1.25`, `3`) into an exact
/// rational. Scientific notation is rejected: exponent strings do not map to
/// an obvious exact value.
pub fn parse_ratio(text: &str) -> Result<Ratio<i64>> {
    let bad = || {
        Error::InvalidArgument(format!(
            "cannot parse {text:?} as a rational; use p/q or a plain decimal"
        ))
    };
    let t = text.trim();
    if let Some((num, den)) = t.split_once('/') {
        let p: i64 = num.trim().parse().map_err(|_| bad())?;
        let q: i64 = den.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(Error::InvalidArgument(format!(
                "zero denominator in {text:?}"
            )));
        }
        return Ok(Ratio::new(p, q));
    }
    let (negative, digits) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    if frac_part.len() > 18 {
        return Err(Error::InvalidArgument(format!(
            "{text:?} has too many decimal digits for an exact i64 rational"
        )));
    }
    let mut numer: i128 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        numer = numer
            .checked_mul(10)
            .and_then(|v| v.checked_add((c as u8 - b'0') as i128))
            .ok_or_else(bad)?;
    }
    let denom: i128 = 10i128.pow(frac_part.len() as u32);
    let g = numer.gcd(&denom);
    let (numer, denom) = (numer / g, denom / g);
    let numer: i64 = numer.try_into().map_err(|_| bad())?;
    let denom: i64 = denom.try_into().map_err(|_| bad())?;
    Ok(Ratio::new(if negative { -numer } else { numer }, denom))
}

/// `25/13` for proper fractions, plain `3` when the denominator is one.
pub fn format_ratio(r: Ratio<i64>) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn ratio_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_every_key_and_validate_cleanly() {
        let config = ExperimentConfig::default();
        assert_eq!(config.resolved().len(), SCHEMA.len());
        for (key, default) in SCHEMA {
            assert_eq!(config.get(key), *default, "{key}");
        }
        let problems = config.semantic_problems();
        assert!(problems.is_empty(), "{problems:?}");
        // the empty file is the default experiment
        assert_eq!(ExperimentConfig::from_text("").unwrap(), config);
    }

    #[test]
    fn hash_ignores_layout_but_not_values() {
        let a = ExperimentConfig::from_text("[grid]\nnx = 32,32\n").unwrap();
        let b = ExperimentConfig::from_text(
            "# a comment\n; another\n\n[grid]\n  nx   =  32,32  \n",
        )
        .unwrap();
        assert_eq!(a.hash(), b.hash());
        // setting a key to its default is hash-neutral: the resolved map is
        // what gets hashed, not the file
        let c = ExperimentConfig::from_text("[grid]\nnx = 32,32\n[lp]\nnu = 0.45\n").unwrap();
        assert_eq!(a.hash(), c.hash());
        let d = ExperimentConfig::from_text("[grid]\nnx = 32,64\n").unwrap();
        assert_ne!(a.hash(), d.hash());
        assert_eq!(a.hash().len(), 64);
        assert!(a.hash().chars().all(|c| c.is_ascii_hexdigit()));
        // where the results land is not part of the experiment's identity
        let mut e = a.clone();
        e.set("output.dir", "/somewhere/else").unwrap();
        assert_eq!(a.hash(), e.hash());
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected_by_name() {
        let err = ExperimentConfig::from_text("[grid]\nxn = 64\n").unwrap_err();
        assert!(err.to_string().contains("grid.xn"), "{err}");
        let err = ExperimentConfig::from_text("[grid]\nnx = 64\nnx = 32\n").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("grid.nx") && text.contains("duplicate"), "{text}");
        let err = ExperimentConfig::from_text("[cosmos]\nnx = 64\n").unwrap_err();
        assert!(err.to_string().contains("cosmos"), "{err}");
        let err = ExperimentConfig::from_text("nx = 64\n").unwrap_err();
        assert!(err.to_string().contains("before any"), "{err}");
    }

    #[test]
    fn check_text_reports_every_problem_at_once() {
        let text = "[grid]\nnx = -128,64\ncfl = 0.9\n[model]\nfamily = wavelet\n";
        let problems = ExperimentConfig::check_text(text);
        let rendered: Vec<String> = problems.iter().map(|e| e.to_string()).collect();
        let all = rendered.join("\n");
        assert!(all.contains("grid.nx"), "{all}");
        assert!(all.contains("grid.cfl"), "{all}");
        assert!(all.contains("model.family"), "{all}");
        assert!(problems.len() >= 3, "{all}");
    }

    #[test]
    fn negative_grid_extent_names_the_key() {
        let err = ExperimentConfig::from_text("[grid]\nnx = -128,64\n")
            .unwrap()
            .grid()
            .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("grid.nx") && text.contains("-128"), "{text}");
    }

    #[test]
    fn typed_builders_assemble_the_run_objects() {
        let text = "\
[model]
family = powerlaw
l = 2
n = 1
margin = 0.5
[grid]
nx = 32,32
T = 0.125
[init]
kind = sine
amplitude = 0.25
k = 1,2
[noise]
modes = 4
seed = 9
[output]
paths = 3
";
        let config = ExperimentConfig::from_text(text).unwrap();
        let model = config.base_model().unwrap();
        assert_eq!(model.tag(), "powerlaw(l=2,n=1)");
        assert_eq!(model.interval().lo(), -1.0);
        let widened = config.run_model().unwrap();
        assert_eq!(widened.interval().lo(), -1.5);
        assert_eq!(widened.interval().hi(), 1.5);
        let grid = config.grid().unwrap();
        assert_eq!(grid.shape(), &[32, 32]);
        assert_eq!(grid.t_final(), 0.125);
        match config.initial_data().unwrap() {
            InitialData::Sine {
                amplitude,
                wavenumbers,
            } => {
                assert_eq!(amplitude, 0.25);
                assert_eq!(wavenumbers, vec![1, 2]);
            }
            other => panic!("expected sine, got {other:?}"),
        }
        let noise = config.noise().unwrap().unwrap();
        assert_eq!(noise.mode_count(), 4);
        assert_eq!(noise.seed(), 9);
        assert_eq!(config.output_paths().unwrap(), 3);
        assert!(config.semantic_problems().is_empty());
    }

    #[test]
    fn dimension_cross_checks_catch_mismatches() {
        // 2-D power-law model over a 1-D grid
        let config = ExperimentConfig::from_text("[grid]\nnx = 64\n").unwrap();
        let all = config
            .semantic_problems()
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join("\n");
        assert!(all.contains("does not match"), "{all}");
        // explicit grid.d disagreeing with nx
        let config = ExperimentConfig::from_text("[grid]\nd = 1\nnx = 64,64\n").unwrap();
        let err = config.dimension().unwrap_err();
        assert!(err.to_string().contains("grid.d"), "{err}");
    }

    #[test]
    fn overrides_update_the_hash() {
        let mut config = ExperimentConfig::default();
        let before = config.hash();
        config.set("regularity.q", "1.5").unwrap();
        assert_ne!(before, config.hash());
        assert_eq!(config.regularity_q().unwrap(), 1.5);
        assert!(config.set("regularity.qq", "1").is_err());
    }

    #[test]
    fn ratio_parsing_handles_fractions_and_decimals() {
        assert_eq!(parse_ratio("25/13").unwrap(), Ratio::new(25, 13));
        assert_eq!(parse_ratio("0.5").unwrap(), Ratio::new(1, 2));
        assert_eq!(parse_ratio("1.25").unwrap(), Ratio::new(5, 4));
        assert_eq!(parse_ratio("-0.04").unwrap(), Ratio::new(-1, 25));
        assert_eq!(parse_ratio("3").unwrap(), Ratio::from_integer(3));
        assert_eq!(parse_ratio(" 2/4 ").unwrap(), Ratio::new(1, 2));
        assert_eq!(parse_ratio("+0.250").unwrap(), Ratio::new(1, 4));
        for bad in ["1e-2", "a/b", "1/0", "", ".", "0x10", "nan"] {
            assert!(parse_ratio(bad).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn ratio_formatting_round_trips() {
        for text in ["25/13", "1/150", "-7/3", "4"] {
            let r = parse_ratio(text).unwrap();
            assert_eq!(format_ratio(r), text);
            assert_eq!(parse_ratio(&format_ratio(r)).unwrap(), r);
        }
        assert_eq!(format_ratio(Ratio::new(6, 3)), "2");
        assert!((ratio_f64(Ratio::new(25, 13)) - 1.923076923076923).abs() < 1e-15);
    }

    #[test]
    fn schema_version_must_match_the_build() {
        let config =
            ExperimentConfig::from_text("[meta]\nschema_version = 99\n").unwrap();
        let err = config.schema_version().unwrap_err();
        assert!(err.to_string().contains("meta.schema_version"), "{err}");
        assert!(ExperimentConfig::default().schema_version().is_ok());
    }

    #[test]
    fn alpha_source_accepts_fit_or_a_positive_rational() {
        let mut config = ExperimentConfig::default();
        assert_eq!(config.alpha_source().unwrap(), AlphaSource::Fitted);
        config.set("regularity.alpha", "1/2").unwrap();
        assert_eq!(
            config.alpha_source().unwrap(),
            AlphaSource::Fixed(Ratio::new(1, 2))
        );
        config.set("regularity.alpha", "-1/2").unwrap();
        assert!(config.alpha_source().unwrap_err().to_string().contains("positive"));
        config.set("regularity.alpha", "0.33").unwrap();
        assert_eq!(
            config.alpha_source().unwrap(),
            AlphaSource::Fixed(Ratio::new(33, 100))
        );
    }

    #[test]
    fn output_formats_parse_as_a_set() {
        let mut config = ExperimentConfig::default();
        let both = config.output_formats().unwrap();
        assert!(both.snapshots && both.reports);
        config.set("output.formats", "csv").unwrap();
        let only_csv = config.output_formats().unwrap();
        assert!(!only_csv.snapshots && only_csv.reports);
        config.set("output.formats", "parquet").unwrap();
        assert!(config.output_formats().is_err());
    }
}
