//! Feature universe: feature definitions, concrete instances, and
//! derivation of domains from tabular data.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Read;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rulelang::{Atom, BodyLiteral, CmpOp, Decimal, Head, Rule, Term};
use crate::symbol::Symbol;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("feature name must be a non-empty identifier, got {0:?}")]
    BadName(String),
    #[error("duplicate feature `{0}`")]
    DuplicateFeature(String),
    #[error("categorical feature `{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("categorical feature `{feature}` lists `{value}` twice")]
    DuplicateValue { feature: String, value: String },
    #[error("numeric feature `{feature}` has min {min} > max {max}")]
    EmptyRange { feature: String, min: i64, max: i64 },
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("declared column `{0}` is not in the header")]
    UnknownColumn(String),
    #[error("row {row}: `{token}` in numeric column `{column}` is not a number")]
    NonNumeric { row: usize, column: String, token: String },
    #[error("row {row}: `{token}` in column `{column}` has more than {scale} decimal digits")]
    Precision { row: usize, column: String, token: String, scale: u32 },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("`{value}` is not in the domain of `{feature}`")]
    UnknownSymbol { feature: String, value: String },
    #[error("{value} is outside [{min}, {max}] for `{feature}`")]
    OutOfRange { feature: String, value: String, min: String, max: String },
    #[error("value for `{feature}` has the wrong kind (expected {expected})")]
    KindMismatch { feature: String, expected: &'static str },
    #[error("csv: {0}")]
    Csv(String),
    #[error("json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Categorical {
        values: Vec<Symbol>,
    },
    /// Values are integers scaled by `10^scale`.
    Numeric {
        min: i64,
        max: i64,
        scale: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl FeatureDef {
    pub fn categorical(name: &str, values: &[&str]) -> Self {
        FeatureDef {
            name: name.to_string(),
            kind: FeatureKind::Categorical { values: values.iter().map(|v| Symbol::new(v)).collect() },
        }
    }

    pub fn numeric(name: &str, min: i64, max: i64, scale: u32) -> Self {
        FeatureDef { name: name.to_string(), kind: FeatureKind::Numeric { min, max, scale } }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, FeatureKind::Categorical { .. })
    }

    pub fn domain(&self) -> Option<&[Symbol]> {
        match &self.kind {
            FeatureKind::Categorical { values } => Some(values),
            FeatureKind::Numeric { .. } => None,
        }
    }

    pub fn scale(&self) -> u32 {
        match self.kind {
            FeatureKind::Numeric { scale, .. } => scale,
            FeatureKind::Categorical { .. } => 0,
        }
    }

    /// Number of values in the domain.
    pub fn domain_size(&self) -> u64 {
        match &self.kind {
            FeatureKind::Categorical { values } => values.len() as u64,
            FeatureKind::Numeric { min, max, .. } => (max - min) as u64 + 1,
        }
    }

    fn validate(&self) -> Result<(), SchemaError> {
        let mut chars = self.name.chars();
        let ok = matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !ok {
            return Err(SchemaError::BadName(self.name.clone()));
        }
        match &self.kind {
            FeatureKind::Categorical { values } => {
                if values.is_empty() {
                    return Err(SchemaError::EmptyDomain(self.name.clone()));
                }
                let mut seen = std::collections::HashSet::new();
                for v in values {
                    if !seen.insert(v) {
                        return Err(SchemaError::DuplicateValue {
                            feature: self.name.clone(),
                            value: v.as_str().to_string(),
                        });
                    }
                }
            }
            &FeatureKind::Numeric { min, max, .. } => {
                if min > max {
                    return Err(SchemaError::EmptyRange { feature: self.name.clone(), min, max });
                }
            }
        }
        Ok(())
    }
}

/// An ordered set of features. The order is the canonical ordering of
/// control vectors and of every downstream enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureSchema {
    features: Vec<FeatureDef>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    features: Vec<FeatureDef>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureDef>) -> Result<Self, SchemaError> {
        let mut index = HashMap::new();
        for (i, f) in features.iter().enumerate() {
            f.validate()?;
            if index.insert(f.name.clone(), i).is_some() {
                return Err(SchemaError::DuplicateFeature(f.name.clone()));
            }
        }
        Ok(FeatureSchema { features, index })
    }

    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let file: SchemaFile = serde_json::from_str(text).map_err(|e| SchemaError::Json(e.to_string()))?;
        Self::new(file.features)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(SchemaFile { features: self.features.clone() }).expect("schema serializes")
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&FeatureDef> {
        self.index.get(name).map(|&i| &self.features[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// The largest numeric scale; the evaluation engine works in these units.
    pub fn max_scale(&self) -> u32 {
        self.features.iter().map(FeatureDef::scale).max().unwrap_or(0)
    }

    /// Keeps only the named features, preserving schema order.
    pub fn restrict(&self, keep: &[&str]) -> Result<Self, SchemaError> {
        for k in keep {
            if !self.index.contains_key(*k) {
                return Err(SchemaError::UnknownFeature(k.to_string()));
            }
        }
        Self::new(self.features.iter().filter(|f| keep.contains(&f.name.as_str())).cloned().collect())
    }

    /// Replaces one feature definition, keeping its position.
    pub fn with_feature(&self, def: FeatureDef) -> Result<Self, SchemaError> {
        let pos = self.position(&def.name).ok_or_else(|| SchemaError::UnknownFeature(def.name.clone()))?;
        let mut features = self.features.clone();
        features[pos] = def;
        Self::new(features)
    }
}

/// A feature value: a symbol, or a numeric value scaled by the feature's scale.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Sym(Symbol),
    Num(i64),
}

impl Value {
    pub fn sym(s: &str) -> Self {
        Value::Sym(Symbol::new(s))
    }

    /// JSON form, interpreting numbers at `scale`.
    pub fn to_json(&self, scale: u32) -> serde_json::Value {
        match self {
            Value::Sym(s) => serde_json::Value::String(s.as_str().to_string()),
            Value::Num(n) if scale == 0 => serde_json::Value::from(*n),
            Value::Num(n) => serde_json::Number::from_f64(*n as f64 / 10f64.powi(scale as i32))
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Sym(s) => write!(f, "{s}"),
            Value::Num(n) => write!(f, "{n}"),
        }
    }
}

/// A (possibly partial) assignment of values to features.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Instance {
    pub assignments: BTreeMap<String, Value>,
}

impl Instance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, feature: &str, value: Value) -> Self {
        self.assignments.insert(feature.to_string(), value);
        self
    }

    pub fn get(&self, feature: &str) -> Option<&Value> {
        self.assignments.get(feature)
    }

    pub fn is_total(&self, schema: &FeatureSchema) -> bool {
        schema.features().iter().all(|f| self.assignments.contains_key(&f.name))
    }

    /// Parses `{"feature": value, ...}`; numbers are scaled by each feature's scale.
    pub fn from_json(schema: &FeatureSchema, json: &serde_json::Value) -> Result<Self, SchemaError> {
        let obj = json.as_object().ok_or_else(|| SchemaError::Json("instance must be a JSON object".into()))?;
        let mut inst = Instance::new();
        for (name, v) in obj {
            let def = schema.get(name).ok_or_else(|| SchemaError::UnknownFeature(name.clone()))?;
            let value = match (&def.kind, v) {
                (FeatureKind::Categorical { .. }, serde_json::Value::String(s)) => Value::sym(s),
                (FeatureKind::Numeric { scale, .. }, serde_json::Value::Number(n)) => {
                    let token = n.to_string();
                    Value::Num(parse_scaled(&token, *scale).ok_or_else(|| SchemaError::OutOfRange {
                        feature: name.clone(),
                        value: token.clone(),
                        min: "-".into(),
                        max: "-".into(),
                    })?)
                }
                (FeatureKind::Numeric { scale, .. }, serde_json::Value::String(s)) => Value::Num(
                    parse_scaled(s, *scale)
                        .ok_or_else(|| SchemaError::KindMismatch { feature: name.clone(), expected: "number" })?,
                ),
                (FeatureKind::Categorical { .. }, _) => {
                    return Err(SchemaError::KindMismatch { feature: name.clone(), expected: "symbol" })
                }
                (FeatureKind::Numeric { .. }, _) => {
                    return Err(SchemaError::KindMismatch { feature: name.clone(), expected: "number" })
                }
            };
            inst.assignments.insert(name.clone(), value);
        }
        validate_instance(schema, inst)
    }

    /// JSON object in schema order.
    pub fn to_json(&self, schema: &FeatureSchema) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for f in schema.features() {
            if let Some(v) = self.assignments.get(&f.name) {
                map.insert(f.name.clone(), v.to_json(f.scale()));
            }
        }
        serde_json::Value::Object(map)
    }
}

/// Parses a decimal token into an integer scaled by `10^scale`.
/// Returns `None` for non-numeric tokens or tokens with excess precision.
pub fn parse_scaled(token: &str, scale: u32) -> Option<i64> {
    let d = Decimal::parse(token.trim())?;
    d.to_scale(scale)
}

/// Formats a scaled integer with `scale` decimal digits.
pub fn format_scaled(value: i64, scale: u32) -> String {
    Decimal { mantissa: value, scale }.to_string()
}

pub fn validate_instance(schema: &FeatureSchema, inst: Instance) -> Result<Instance, SchemaError> {
    for (name, value) in &inst.assignments {
        let def = schema.get(name).ok_or_else(|| SchemaError::UnknownFeature(name.clone()))?;
        match (&def.kind, value) {
            (FeatureKind::Categorical { values }, Value::Sym(s)) => {
                if !values.contains(s) {
                    return Err(SchemaError::UnknownSymbol { feature: name.clone(), value: s.as_str().into() });
                }
            }
            (&FeatureKind::Numeric { min, max, scale }, &Value::Num(n)) => {
                if n < min || n > max {
                    return Err(SchemaError::OutOfRange {
                        feature: name.clone(),
                        value: format_scaled(n, scale),
                        min: format_scaled(min, scale),
                        max: format_scaled(max, scale),
                    });
                }
            }
            (FeatureKind::Categorical { .. }, _) => {
                return Err(SchemaError::KindMismatch { feature: name.clone(), expected: "symbol" })
            }
            (FeatureKind::Numeric { .. }, _) => {
                return Err(SchemaError::KindMismatch { feature: name.clone(), expected: "number" })
            }
        }
    }
    Ok(inst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Categorical,
    Numeric,
}

/// Derives a schema from CSV data. Numeric features span the observed
/// [min, max]; categorical domains list distinct values in first-occurrence
/// order. Only the declared columns become features, in declaration order.
pub fn derive_schema<R: Read>(
    data: R,
    columns: &IndexMap<String, ColumnKind>,
    precision: &HashMap<String, u32>,
) -> Result<FeatureSchema, SchemaError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(data);
    let header = reader.headers().map_err(|e| SchemaError::Csv(e.to_string()))?.clone();
    let mut positions = Vec::with_capacity(columns.len());
    for name in columns.keys() {
        let pos = header.iter().position(|h| h == name).ok_or_else(|| SchemaError::UnknownColumn(name.clone()))?;
        positions.push(pos);
    }

    enum Acc {
        Cat(Vec<Symbol>),
        Num { min: i64, max: i64, scale: u32 },
    }
    let mut accs: Vec<Acc> = columns
        .iter()
        .map(|(name, kind)| match kind {
            ColumnKind::Categorical => Acc::Cat(Vec::new()),
            ColumnKind::Numeric => {
                Acc::Num { min: i64::MAX, max: i64::MIN, scale: precision.get(name).copied().unwrap_or(0) }
            }
        })
        .collect();

    let mut rows = 0usize;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| SchemaError::Csv(e.to_string()))?;
        rows += 1;
        for ((acc, &pos), name) in accs.iter_mut().zip(&positions).zip(columns.keys()) {
            let token = record.get(pos).unwrap_or("");
            match acc {
                Acc::Cat(values) => {
                    let s = Symbol::new(token);
                    if !values.contains(&s) {
                        values.push(s);
                    }
                }
                Acc::Num { min, max, scale } => {
                    let v = match parse_scaled(token, *scale) {
                        Some(v) => v,
                        None if Decimal::parse(token.trim()).is_some() => {
                            return Err(SchemaError::Precision {
                                row: row + 1,
                                column: name.clone(),
                                token: token.to_string(),
                                scale: *scale,
                            })
                        }
                        None => {
                            return Err(SchemaError::NonNumeric {
                                row: row + 1,
                                column: name.clone(),
                                token: token.to_string(),
                            })
                        }
                    };
                    *min = (*min).min(v);
                    *max = (*max).max(v);
                }
            }
        }
    }
    if rows == 0 {
        return Err(SchemaError::EmptyDataset);
    }

    let features = columns
        .keys()
        .zip(accs)
        .map(|(name, acc)| FeatureDef {
            name: name.clone(),
            kind: match acc {
                Acc::Cat(values) => FeatureKind::Categorical { values },
                Acc::Num { min, max, scale } => FeatureKind::Numeric { min, max, scale },
            },
        })
        .collect();
    FeatureSchema::new(features)
}

/// Emits `f_domain(name, value).` facts for categorical features and
/// `name(X) :- X #>= min, X #=< max.` range rules for numeric ones.
pub fn schema_to_facts(schema: &FeatureSchema) -> Vec<Rule> {
    let mut out = Vec::new();
    for f in schema.features() {
        match &f.kind {
            FeatureKind::Categorical { values } => {
                for v in values {
                    out.push(Rule::fact(Atom::new(
                        "f_domain",
                        vec![Term::Sym(Symbol::new(&f.name)), Term::Sym(v.clone())],
                    )));
                }
            }
            &FeatureKind::Numeric { min, max, scale } => {
                let x = Term::var("X");
                out.push(Rule {
                    head: Head::Atom(Atom::new(&f.name, vec![x.clone()])),
                    body: vec![
                        BodyLiteral::cmp(x.clone(), CmpOp::Ge, Term::Num(Decimal { mantissa: min, scale })),
                        BodyLiteral::cmp(x, CmpOp::Le, Term::Num(Decimal { mantissa: max, scale })),
                    ],
                });
            }
        }
    }
    out
}
