//! Experiment configuration: a strict line-oriented `key = value` format.
//!
//! ```text
//! # comments start with '#'
//! preset = drift-z1          # optional, replaces the three model sections
//!
//! [graph]
//! preset = nearest-neighbor  # or: one `step = …` line per generator
//! dimension = 1
//!
//! [environment]
//! gamma = 0.05
//! law = 0.9 0.1              # one line per support point of the step law
//! law_weights = 1
//!
//! [offspring]
//! dist = 1:0.5 2:0.5         # count:mass pairs, one line per support point
//! dist_weights = 1
//!
//! [run]
//! seed = 42
//! horizon = 200
//! ```
//!
//! Unknown sections or keys, repeated scalar keys, malformed values and
//! out-of-range values are all rejected with the offending line number.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::environment::{EnvironmentSpec, OffspringDistribution, ValidatedSpec};
use crate::error::ConfigError;
use crate::lattice::{GeneratorSet, Site, StepDistribution, MAX_DIM};
use crate::presets;
use crate::simulator::DEFAULT_CAP;
use crate::spectral::DEFAULT_GRAD_TOL;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphConfig {
    pub dimension: usize,
    pub steps: Vec<Vec<i64>>,
    pub minimal: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelConfig {
    pub graph: GraphConfig,
    pub gamma: f64,
    pub laws: Vec<Vec<f64>>,
    pub law_weights: Vec<f64>,
    pub dists: Vec<Vec<(u32, f64)>>,
    pub dist_weights: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoupleDirection {
    Raise,
    Lower,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    /// Seed of the realized environment; `None` reuses `seed`.
    pub env_seed: Option<u64>,
    pub horizon: usize,
    pub replicates: usize,
    pub radius: usize,
    /// Spectral gradient tolerance.
    pub tol: f64,
    /// Bisection width for the critical mean.
    pub bisect_tol: f64,
    pub cap: u128,
    pub prune: bool,
    pub start: Vec<i64>,
    pub origin: Vec<i64>,
    /// When set, `simulate` also reports the fraction of plain BMC runs
    /// with at least this many visits to the origin.
    pub threshold: Option<u128>,
    /// Fixed mean for `bellman`; when absent the critical mean is searched.
    pub m: Option<f64>,
    /// `None` means `20 · radius`.
    pub max_sweeps: Option<usize>,
    pub blowup: f64,
    /// Horizon of the definition-based ρ estimate in `rho` (0 = skip).
    pub n_max: usize,
    pub couple_target: Option<f64>,
    pub couple_direction: CoupleDirection,
    pub couple_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub model: ModelConfig,
    pub run: RunConfig,
}

#[derive(Debug)]
struct Entry {
    line: usize,
    value: String,
}

/// Keys of one section, in file order per key.
#[derive(Debug, Default)]
struct Section {
    keys: BTreeMap<String, Vec<Entry>>,
}

const SECTIONS: [&str; 4] = ["graph", "environment", "offspring", "run"];

fn allowed(section: &str) -> (&'static [&'static str], &'static [&'static str]) {
    // (scalar keys, repeatable keys)
    match section {
        "" => (&["preset"], &[]),
        "graph" => (&["preset", "dimension", "minimal"], &["step"]),
        "environment" => (&["gamma", "law_weights"], &["law"]),
        "offspring" => (&["dist_weights"], &["dist"]),
        "run" => (
            &[
                "seed",
                "env_seed",
                "horizon",
                "replicates",
                "radius",
                "tol",
                "bisect_tol",
                "cap",
                "prune",
                "start",
                "origin",
                "threshold",
                "m",
                "max_sweeps",
                "blowup",
                "n_max",
                "couple_target",
                "couple_direction",
                "couple_index",
            ],
            &[],
        ),
        _ => (&[], &[]),
    }
}

fn tokenize(text: &str) -> Result<BTreeMap<String, Section>, ConfigError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    sections.insert(String::new(), Section::default());
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax { line, message: format!("unterminated section header `{body}`") })?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::UnknownSection { line, section: name.to_string() });
            }
            if sections.contains_key(name) {
                return Err(ConfigError::Duplicate { line, key: format!("[{name}]") });
            }
            sections.insert(name.to_string(), Section::default());
            current = name.to_string();
            continue;
        }
        let (key, value) =
            body.split_once('=').ok_or_else(|| ConfigError::Syntax { line, message: format!("expected `key = value`, got `{body}`") })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line, message: format!("empty key or value in `{body}`") });
        }
        let (scalars, repeatable) = allowed(&current);
        let section = sections.get_mut(&current).expect("section was inserted");
        if !repeatable.contains(&key) {
            if !scalars.contains(&key) {
                let shown = if current.is_empty() { "top level".to_string() } else { current.clone() };
                return Err(ConfigError::UnknownKey { line, section: shown, key: key.to_string() });
            }
            if section.keys.contains_key(key) {
                return Err(ConfigError::Duplicate { line, key: key.to_string() });
            }
        }
        section.keys.entry(key.to_string()).or_default().push(Entry { line, value: value.to_string() });
    }
    Ok(sections)
}

fn type_err(e: &Entry, key: &str, expected: &'static str) -> ConfigError {
    ConfigError::Type { line: e.line, key: key.to_string(), expected, value: e.value.clone() }
}

fn range_err(line: usize, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Range { location: format!("line {line}"), key: key.to_string(), message: message.into() }
}

fn parse_f64(e: &Entry, key: &str) -> Result<f64, ConfigError> {
    e.value.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| type_err(e, key, "a finite number"))
}

fn parse_uint<T: std::str::FromStr>(e: &Entry, key: &str) -> Result<T, ConfigError> {
    e.value.parse::<T>().map_err(|_| type_err(e, key, "a nonnegative integer"))
}

fn parse_floats(e: &Entry, key: &str) -> Result<Vec<f64>, ConfigError> {
    e.value
        .split_whitespace()
        .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| type_err(e, key, "a list of numbers"))
}

fn parse_ints<T: std::str::FromStr>(e: &Entry, key: &str) -> Result<Vec<T>, ConfigError> {
    e.value
        .split_whitespace()
        .map(|t| t.parse::<T>().ok())
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| type_err(e, key, "a list of integers"))
}

fn parse_dist(e: &Entry) -> Result<Vec<(u32, f64)>, ConfigError> {
    e.value
        .split_whitespace()
        .map(|t| {
            let (k, p) = t.split_once(':')?;
            Some((k.parse::<u32>().ok()?, p.parse::<f64>().ok().filter(|v| v.is_finite())?))
        })
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| type_err(e, "dist", "`count:mass` pairs"))
}

impl Section {
    fn one(&self, key: &str) -> Option<&Entry> {
        self.keys.get(key).and_then(|v| v.first())
    }

    fn all(&self, key: &str) -> &[Entry] {
        self.keys.get(key).map_or(&[], Vec::as_slice)
    }
}

fn parse_model(sections: &BTreeMap<String, Section>) -> Result<(ModelConfig, usize), ConfigError> {
    let graph = sections.get("graph").ok_or_else(|| ConfigError::Missing("missing [graph] section".into()))?;
    let env = sections.get("environment").ok_or_else(|| ConfigError::Missing("missing [environment] section".into()))?;
    let off = sections.get("offspring").ok_or_else(|| ConfigError::Missing("missing [offspring] section".into()))?;

    let dim_entry = graph.one("dimension");
    let dimension = match dim_entry {
        Some(e) => {
            let d: usize = parse_uint(e, "dimension")?;
            if !(1..=MAX_DIM).contains(&d) {
                return Err(range_err(e.line, "dimension", format!("must lie in 1..={MAX_DIM}")));
            }
            d
        }
        None => 0,
    };
    let steps_entries = graph.all("step");
    let (steps, minimal) = match graph.one("preset") {
        Some(e) => {
            if e.value != "nearest-neighbor" {
                return Err(type_err(e, "preset", "`nearest-neighbor`"));
            }
            if let Some(s) = steps_entries.first() {
                return Err(range_err(s.line, "step", "explicit steps conflict with the graph preset"));
            }
            if dimension == 0 {
                return Err(ConfigError::Missing("[graph] needs `dimension`".into()));
            }
            let g = GeneratorSet::nearest_neighbor(dimension)?;
            let steps = g.steps().iter().map(|s| s.coords(dimension).to_vec()).collect();
            (steps, g.minimal().to_vec())
        }
        None => {
            if steps_entries.is_empty() {
                return Err(ConfigError::Missing("[graph] needs `preset = nearest-neighbor` or `step` lines".into()));
            }
            let steps = steps_entries.iter().map(|e| parse_ints::<i64>(e, "step")).collect::<Result<Vec<_>, _>>()?;
            let minimal = match graph.one("minimal") {
                Some(e) => parse_ints::<usize>(e, "minimal")?,
                None => (0..steps.len()).collect(),
            };
            (steps, minimal)
        }
    };
    let dimension = if dimension == 0 { steps[0].len() } else { dimension };

    let gamma_e = env.one("gamma").ok_or_else(|| ConfigError::Missing("[environment] needs `gamma`".into()))?;
    let gamma = parse_f64(gamma_e, "gamma")?;
    if gamma <= 0.0 {
        return Err(range_err(gamma_e.line, "gamma", format!("gamma = {gamma} must be positive")));
    }
    let law_entries = env.all("law");
    if law_entries.is_empty() {
        return Err(ConfigError::Missing("[environment] needs at least one `law`".into()));
    }
    let laws = law_entries.iter().map(|e| parse_floats(e, "law")).collect::<Result<Vec<_>, _>>()?;
    let law_weights = weights(env.one("law_weights"), "law_weights", laws.len())?;

    let dist_entries = off.all("dist");
    if dist_entries.is_empty() {
        return Err(ConfigError::Missing("[offspring] needs at least one `dist`".into()));
    }
    let dists = dist_entries.iter().map(parse_dist).collect::<Result<Vec<_>, _>>()?;
    let dist_weights = weights(off.one("dist_weights"), "dist_weights", dists.len())?;

    let model = ModelConfig { graph: GraphConfig { dimension, steps, minimal }, gamma, laws, law_weights, dists, dist_weights };
    // Surface construction errors with the line of the offending entry.
    let g = Arc::new(GeneratorSet::new(dimension, model.graph.steps.clone(), model.graph.minimal.clone()).map_err(|e| {
        let line = steps_entries.first().or(graph.one("preset")).map_or(0, |e| e.line);
        range_err(line, "step", e.to_string())
    })?);
    for (w, e) in model.laws.iter().zip(law_entries) {
        StepDistribution::new(g.clone(), w.clone()).map_err(|err| range_err(e.line, "law", err.to_string()))?;
    }
    for (d, e) in model.dists.iter().zip(dist_entries) {
        OffspringDistribution::new(d).map_err(|err| range_err(e.line, "dist", err.to_string()))?;
    }
    Ok((model, dimension))
}

fn weights(entry: Option<&Entry>, key: &str, n: usize) -> Result<Vec<f64>, ConfigError> {
    match entry {
        None => Ok(vec![1.0 / n as f64; n]),
        Some(e) => {
            let w = parse_floats(e, key)?;
            if w.len() != n {
                return Err(range_err(e.line, key, format!("{} weights for {n} support points", w.len())));
            }
            Ok(w)
        }
    }
}

impl ModelConfig {
    /// Builds and validates the environment law.
    pub fn spec(&self) -> Result<ValidatedSpec, ConfigError> {
        let g = Arc::new(GeneratorSet::new(self.graph.dimension, self.graph.steps.clone(), self.graph.minimal.clone())?);
        let step_support = self
            .laws
            .iter()
            .zip(&self.law_weights)
            .map(|(w, &q)| Ok((StepDistribution::new(g.clone(), w.clone())?, q)))
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let offspring_support = self
            .dists
            .iter()
            .zip(&self.dist_weights)
            .map(|(d, &q)| Ok((OffspringDistribution::new(d)?, q)))
            .collect::<Result<Vec<_>, ConfigError>>()?;
        Ok(EnvironmentSpec { generators: g, step_support, offspring_support, gamma: self.gamma }.validate()?)
    }
}

fn parse_run(section: Option<&Section>, dimension: usize) -> Result<RunConfig, ConfigError> {
    let empty = Section::default();
    let s = section.unwrap_or(&empty);
    let get_uint = |key: &str, default: u64| -> Result<u64, ConfigError> { s.one(key).map_or(Ok(default), |e| parse_uint(e, key)) };
    let seed = get_uint("seed", 0)?;
    let run = RunConfig {
        seed,
        env_seed: s.one("env_seed").map(|e| parse_uint(e, "env_seed")).transpose()?,
        horizon: get_uint("horizon", 200)? as usize,
        replicates: get_uint("replicates", 10_000)? as usize,
        radius: get_uint("radius", 80)? as usize,
        tol: s.one("tol").map_or(Ok(DEFAULT_GRAD_TOL), |e| parse_f64(e, "tol"))?,
        bisect_tol: s.one("bisect_tol").map_or(Ok(0.01), |e| parse_f64(e, "bisect_tol"))?,
        cap: s.one("cap").map_or(Ok(DEFAULT_CAP), |e| parse_uint(e, "cap"))?,
        prune: match s.one("prune") {
            None => true,
            Some(e) => e.value.parse::<bool>().map_err(|_| type_err(e, "prune", "`true` or `false`"))?,
        },
        start: s.one("start").map_or(Ok(vec![0; dimension]), |e| parse_ints(e, "start"))?,
        origin: s.one("origin").map_or(Ok(vec![0; dimension]), |e| parse_ints(e, "origin"))?,
        threshold: s.one("threshold").map(|e| parse_uint(e, "threshold")).transpose()?,
        m: s.one("m").map(|e| parse_f64(e, "m")).transpose()?,
        max_sweeps: s.one("max_sweeps").map(|e| parse_uint(e, "max_sweeps")).transpose()?,
        blowup: s.one("blowup").map_or(Ok(crate::bellman::DEFAULT_BLOWUP), |e| parse_f64(e, "blowup"))?,
        n_max: get_uint("n_max", 0)? as usize,
        couple_target: s.one("couple_target").map(|e| parse_f64(e, "couple_target")).transpose()?,
        couple_direction: match s.one("couple_direction") {
            None => CoupleDirection::Raise,
            Some(e) => match e.value.as_str() {
                "raise" => CoupleDirection::Raise,
                "lower" => CoupleDirection::Lower,
                _ => return Err(type_err(e, "couple_direction", "`raise` or `lower`")),
            },
        },
        couple_index: get_uint("couple_index", 0)? as usize,
    };
    let line_of = |key: &str| s.one(key).map_or("defaults".to_string(), |e| format!("line {}", e.line));
    run.check_ranges(dimension, line_of)?;
    Ok(run)
}

impl RunConfig {
    /// Range checks; `location(key)` names where a value came from.
    pub fn check_ranges(&self, dimension: usize, location: impl Fn(&str) -> String) -> Result<(), ConfigError> {
        let fail = |key: &str, message: String| Err(ConfigError::Range { location: location(key), key: key.to_string(), message });
        if self.horizon < 1 {
            return fail("horizon", "must be at least 1".into());
        }
        if self.replicates < 1 {
            return fail("replicates", "must be at least 1".into());
        }
        if self.radius < 1 {
            return fail("radius", "must be at least 1".into());
        }
        if !(self.tol > 0.0) {
            return fail("tol", "must be positive".into());
        }
        if !(self.bisect_tol > 0.0) {
            return fail("bisect_tol", "must be positive".into());
        }
        if self.cap < 1 {
            return fail("cap", "must be at least 1".into());
        }
        if self.threshold == Some(0) {
            return fail("threshold", "must be at least 1".into());
        }
        if self.start.len() != dimension {
            return fail("start", format!("needs {dimension} coordinates"));
        }
        if self.origin.len() != dimension {
            return fail("origin", format!("needs {dimension} coordinates"));
        }
        if let Some(m) = self.m {
            if !(m > 0.0) {
                return fail("m", "must be positive".into());
            }
        }
        if self.max_sweeps == Some(0) {
            return fail("max_sweeps", "must be at least 1".into());
        }
        if !(self.blowup > 1.0) {
            return fail("blowup", "must exceed 1".into());
        }
        if self.n_max == 1 {
            return fail("n_max", "must be 0 (skip) or at least 2".into());
        }
        Ok(())
    }

    pub fn env_seed(&self) -> u64 {
        self.env_seed.unwrap_or(self.seed)
    }

    pub fn max_sweeps(&self) -> usize {
        self.max_sweeps.unwrap_or(20 * self.radius)
    }

    pub fn start_site(&self) -> Site {
        Site::new(&self.start)
    }

    pub fn origin_site(&self) -> Site {
        Site::new(&self.origin)
    }
}

/// Strict parse of a configuration text, filling every default.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let sections = tokenize(text)?;
    let preset = sections[""].one("preset").map(|e| e.value.clone());
    let (model, dimension) = match &preset {
        Some(name) => {
            if let Some(s) = ["graph", "environment", "offspring"].iter().find(|s| sections.contains_key(**s)) {
                return Err(ConfigError::Syntax { line: 0, message: format!("[{s}] cannot be combined with a preset") });
            }
            let body = presets::preset_text(name).ok_or_else(|| ConfigError::UnknownPreset(name.clone()))?;
            parse_model(&tokenize(body)?)?
        }
        None => parse_model(&sections)?,
    };
    model.spec()?;
    let run = parse_run(sections.get("run"), dimension)?;
    Ok(ExperimentConfig { preset, model, run })
}

impl ExperimentConfig {
    /// `sha256` of the canonical JSON form of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn spec(&self) -> Result<ValidatedSpec, ConfigError> {
        self.model.spec()
    }
}
