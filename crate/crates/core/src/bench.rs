//! Timing harness: minimal-cost search time against categorical domain
//! size, and with causal rules against without.

use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::cfe::{craig_interpolant, CfeError, ControlSpec};
use crate::schema::{FeatureDef, FeatureKind, Instance, SchemaError, Value};
use crate::symbol::Symbol;
use crate::workspace::{Workspace, WorkspaceError};

/// Below this many repetitions a row is flagged as low confidence.
pub const MIN_CONFIDENT_REPS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BenchError {
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Cfe(#[from] CfeError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("`{0}` is not a categorical feature")]
    NotCategorical(String),
    #[error("domain size must be at least 1")]
    EmptyDomain,
    #[error("factual value {value} of `{feature}` is not in the first {size} domain values")]
    FactualOutsideDomain { feature: String, value: String, size: usize },
    #[error("repetitions must be at least 1")]
    NoRepetitions,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub fixture: String,
    /// Varied feature, or the configuration name for the causal comparison.
    pub feature: String,
    pub domain_size: usize,
    /// Categorical features active in the search.
    pub categorical: usize,
    pub reps: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub samples_ms: Vec<f64>,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Environment {
    pub engine_version: String,
    pub timestamp: u64,
    pub os: String,
    pub arch: String,
    pub debug_build: bool,
}

impl Environment {
    pub fn capture() -> Self {
        Environment {
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            debug_build: cfg!(debug_assertions),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub environment: Environment,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn means(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean_ms).collect()
    }

    /// Aligned text table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<16} {:<24} {:>6} {:>5} {:>5} {:>11} {:>10}\n",
            "fixture", "feature", "size", "cat", "reps", "mean_ms", "std_ms"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<16} {:<24} {:>6} {:>5} {:>5} {:>11.3} {:>10.3}{}\n",
                r.fixture,
                r.feature,
                r.domain_size,
                r.categorical,
                r.reps,
                r.mean_ms,
                r.std_ms,
                if r.low_confidence { "  (low confidence)" } else { "" }
            ));
        }
        let e = &self.environment;
        out.push_str(&format!(
            "engine {} on {}/{}{}, t={}\n",
            e.engine_version,
            e.os,
            e.arch,
            if e.debug_build { " (debug build)" } else { "" },
            e.timestamp
        ));
        out
    }

    /// One JSON object per row, each carrying the environment stamp.
    pub fn to_json_lines(&self) -> String {
        self.rows
            .iter()
            .map(|r| {
                let mut v = serde_json::to_value(r).unwrap_or_default();
                v["environment"] = json!(self.environment);
                format!("{v}\n")
            })
            .collect()
    }
}

/// The feature's domain cut to its first `size` values, padded with
/// `synth_1`, `synth_2`, ... when it is shorter.
pub fn resize_domain(def: &FeatureDef, size: usize) -> Result<FeatureDef, BenchError> {
    let FeatureKind::Categorical { values } = &def.kind else {
        return Err(BenchError::NotCategorical(def.name.clone()));
    };
    if size == 0 {
        return Err(BenchError::EmptyDomain);
    }
    let mut values: Vec<Symbol> = values.iter().take(size).cloned().collect();
    let mut k = 1;
    while values.len() < size {
        let s = Symbol::new(&format!("synth_{k}"));
        if !values.contains(&s) {
            values.push(s);
        }
        k += 1;
    }
    Ok(FeatureDef { name: def.name.clone(), kind: FeatureKind::Categorical { values } })
}

fn stats(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 { samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Wall-clock milliseconds of `reps` interpolant searches, after one
/// untimed warm-up run.
pub fn time_interpolant(
    ws: &Workspace,
    factual: &Instance,
    spec: &ControlSpec,
    reps: usize,
) -> Result<Vec<f64>, BenchError> {
    if reps == 0 {
        return Err(BenchError::NoRepetitions);
    }
    craig_interpolant(ws, factual, spec)?;
    time_runs(ws, factual, spec, reps)
}

fn time_runs(ws: &Workspace, factual: &Instance, spec: &ControlSpec, reps: usize) -> Result<Vec<f64>, BenchError> {
    let mut out = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        let r = craig_interpolant(ws, factual, spec)?;
        out.push(t.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(r);
    }
    Ok(out)
}

fn row(fixture: &str, feature: &str, ws: &Workspace, size: usize, samples: Vec<f64>) -> BenchRow {
    let (mean_ms, std_ms) = stats(&samples);
    BenchRow {
        fixture: fixture.to_string(),
        feature: feature.to_string(),
        domain_size: size,
        categorical: ws.schema().features().iter().filter(|f| f.is_categorical()).count(),
        reps: samples.len(),
        mean_ms,
        std_ms,
        low_confidence: samples.len() < MIN_CONFIDENT_REPS,
        samples_ms: samples,
    }
}

/// One row per domain size of `feature`, timing the search for `factual`.
/// Sizes are timed round-robin so that drift in machine load spreads
/// evenly over them.
pub fn run_domain_scaling(
    ws: &Workspace,
    feature: &str,
    sizes: &[usize],
    factual: &Instance,
    spec: &ControlSpec,
    reps: usize,
) -> Result<BenchReport, BenchError> {
    if reps == 0 {
        return Err(BenchError::NoRepetitions);
    }
    let full = ws.full_schema();
    let def = full.get(feature).ok_or_else(|| SchemaError::UnknownFeature(feature.to_string()))?;
    let mut sized = Vec::new();
    for &size in sizes {
        let resized = resize_domain(def, size)?;
        if let (Some(Value::Sym(v)), Some(domain)) = (factual.get(feature), resized.domain()) {
            if !domain.contains(v) {
                return Err(BenchError::FactualOutsideDomain {
                    feature: feature.to_string(),
                    value: v.to_string(),
                    size,
                });
            }
        }
        let w = ws.with_schema(full.with_feature(resized)?)?;
        craig_interpolant(&w, factual, spec)?;
        sized.push(w);
    }
    let mut samples = vec![Vec::with_capacity(reps); sized.len()];
    for _ in 0..reps {
        for (w, out) in sized.iter().zip(samples.iter_mut()) {
            out.extend(time_runs(w, factual, spec, 1)?);
        }
    }
    let rows =
        sizes.iter().zip(sized.iter().zip(samples)).map(|(&size, (w, s))| row(&ws.name, feature, w, size, s)).collect();
    Ok(BenchReport { environment: Environment::capture(), rows })
}

/// Times the same factual instance under two configurations of one
/// model: decision rules only, and decision plus causal rules.
pub fn run_causal_comparison(
    non_causal: &Workspace,
    causal: &Workspace,
    factual: &serde_json::Value,
    spec: &ControlSpec,
    reps: usize,
) -> Result<BenchReport, BenchError> {
    let mut rows = Vec::new();
    for (label, ws) in [("non-causal", non_causal), ("causal", causal)] {
        let inst = ws.instance(factual)?;
        let mut spec_here = ControlSpec::new();
        for (f, c) in spec.iter() {
            if ws.schema().get(f).is_some() {
                spec_here = spec_here.set(f, c);
            }
        }
        let samples = time_interpolant(ws, &inst, &spec_here, reps)?;
        let size = ws.schema().features().iter().filter_map(|f| f.domain()).map(|d| d.len()).sum();
        rows.push(row(&ws.name, label, ws, size, samples));
    }
    Ok(BenchReport { environment: Environment::capture(), rows })
}
