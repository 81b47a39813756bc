//! Counterfactual explanations for rule-based classifiers.
//!
//! Decision rules are evaluated top-down against a constraint store over
//! feature domains. Dual rules make the negated decision provable, and a
//! cost-levelled search over feature interventions finds the smallest set
//! of changes that flips an undesired classification.

pub mod api;
pub mod bench;
pub mod causal;
pub mod cfe;
pub mod dual;
pub mod engine;
pub mod rulelang;
pub mod schema;
pub mod symbol;
pub mod workspace;

pub use symbol::Symbol;
