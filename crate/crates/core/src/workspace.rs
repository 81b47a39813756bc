//! A loaded model: feature schema, decision rules, causal rules and labels,
//! checked and dualized once so that queries can share it.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::causal::{check_totality, CausalError, CausalRuleSet, TotalityReport};
use crate::engine::{Engine, EngineError};
use crate::rulelang::{
    check_program, parse_program, Abducible, AbducibleDomain, Analysis, Directive, Item, ItemKind, Phase, PredKey,
    Program, RuleError,
};
use crate::schema::{FeatureSchema, Instance, SchemaError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorkspaceError {
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Causal(#[from] CausalError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("rules declare no `#decision` predicate")]
    NoDecision,
    #[error("rules declare more than one `#decision` predicate")]
    MultipleDecisions,
    #[error("causal predicate {pred} rules out {feature} = {value} in every world")]
    NotTotal { pred: String, feature: String, value: String },
}

/// The classifier predicate for the undesired label and its feature map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decision {
    pub pred: String,
    pub features: Vec<String>,
}

impl Decision {
    pub fn key(&self) -> PredKey {
        PredKey::new(&self.pred, self.features.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Labels {
    pub undesired: String,
    pub desired: String,
}

impl Default for Labels {
    fn default() -> Self {
        Labels { undesired: "undesired".into(), desired: "desired".into() }
    }
}

/// Name of the abducible standing for a categorical feature in one world.
pub fn world_predicate(feature: &str, phase: Phase) -> String {
    match phase {
        Phase::Pre => format!("before_int_{feature}"),
        Phase::Post => format!("after_int_{feature}"),
        Phase::Choice => feature.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub name: String,
    full_schema: FeatureSchema,
    schema: FeatureSchema,
    program: Program,
    engine: Engine,
    decision: Decision,
    causal: CausalRuleSet,
    labels: Labels,
    analysis: Analysis,
    totality: TotalityReport,
}

impl Workspace {
    pub fn load(name: &str, schema: FeatureSchema, rules: &str) -> Result<Self, WorkspaceError> {
        Self::from_program(name, schema, parse_program(rules)?)
    }

    /// Reads `schema.json` and `rules.lp` from a directory.
    pub fn load_dir(dir: &Path) -> Result<Self, WorkspaceError> {
        let read = |file: &str| {
            let p = dir.join(file);
            std::fs::read_to_string(&p)
                .map_err(|e| WorkspaceError::Io { path: p.display().to_string(), msg: e.to_string() })
        };
        let schema = FeatureSchema::from_json(&read("schema.json")?)?;
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        Self::load(&name, schema, &read("rules.lp")?)
    }

    pub fn from_program(name: &str, full_schema: FeatureSchema, program: Program) -> Result<Self, WorkspaceError> {
        let analysis = check_program(&program, &full_schema)?;
        let mut decision = None;
        let mut labels = Labels::default();
        for d in program.directives() {
            match d {
                Directive::Decision { pred, features } => {
                    if decision.is_some() {
                        return Err(WorkspaceError::MultipleDecisions);
                    }
                    decision = Some(Decision { pred: pred.clone(), features: features.clone() });
                }
                Directive::Labels { undesired, desired } => {
                    labels = Labels { undesired: undesired.clone(), desired: desired.clone() };
                }
                Directive::Causal { .. } => {}
            }
        }
        let decision = decision.ok_or(WorkspaceError::NoDecision)?;
        let causal = CausalRuleSet::from_program(&program)?;
        causal.validate(&full_schema)?;

        let causal_features = causal.features();
        let active: Vec<&str> = full_schema
            .features()
            .iter()
            .map(|f| f.name.as_str())
            .filter(|f| decision.features.iter().any(|d| d == f) || causal_features.contains(*f))
            .collect();
        let schema = full_schema.restrict(&active)?;

        // Every categorical feature needs a choice point in each world.
        let mut extra = Vec::new();
        for f in schema.features().iter().filter(|f| f.is_categorical()) {
            for phase in [Phase::Pre, Phase::Post] {
                let pred = world_predicate(&f.name, phase);
                if program.abducible(&pred).is_none() && !program.defines(&PredKey::new(&pred, 1)) {
                    extra.push(Item::main(ItemKind::Abducible(Abducible {
                        complement: Some(format!("not_{pred}")),
                        pred,
                        domain: AbducibleDomain::Feature(f.name.clone()),
                        phase,
                    })));
                }
            }
        }
        let program = if extra.is_empty() { program } else { program.extend(extra)? };

        let engine = Engine::from_program(schema.clone(), &program)?.with_duals_for(&[decision.key()])?;
        let totality = check_totality(&causal, &engine)?;
        for p in &totality.predicates {
            if let Some((feature, value)) = p.deleted_values.first() {
                return Err(WorkspaceError::NotTotal {
                    pred: p.pred.clone(),
                    feature: feature.clone(),
                    value: value.clone(),
                });
            }
        }
        Ok(Workspace {
            name: name.to_string(),
            full_schema,
            schema,
            program,
            engine,
            decision,
            causal,
            labels,
            analysis,
            totality,
        })
    }

    /// The same rules over a different schema (e.g. a resized domain).
    pub fn with_schema(&self, full_schema: FeatureSchema) -> Result<Self, WorkspaceError> {
        Self::from_program(&self.name, full_schema, self.program.clone())
    }

    /// Features the decision or causal rules mention, in schema order.
    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn full_schema(&self) -> &FeatureSchema {
        &self.full_schema
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn decision(&self) -> &Decision {
        &self.decision
    }

    pub fn causal(&self) -> &CausalRuleSet {
        &self.causal
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn analysis(&self) -> &Analysis {
        &self.analysis
    }

    pub fn totality(&self) -> &TotalityReport {
        &self.totality
    }

    /// Parses an instance. Values for features of the full schema that no
    /// rule mentions are validated and then dropped.
    pub fn instance(&self, json: &serde_json::Value) -> Result<Instance, WorkspaceError> {
        let mut inst = Instance::from_json(&self.full_schema, json)?;
        inst.assignments.retain(|f, _| self.schema.get(f).is_some());
        Ok(inst)
    }
}
