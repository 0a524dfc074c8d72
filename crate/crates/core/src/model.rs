//! Validated conceptual model: the payload every later phase consumes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certainty {
    Assume,
    Hypothesize,
}

impl Certainty {
    pub fn keyword(self) -> &'static str {
        match self {
            Certainty::Assume => "assume",
            Certainty::Hypothesize => "hypothesize",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureKind {
    Continuous,
    Counts,
    OrderedCategories { levels: Vec<String> },
    UnorderedCategories { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureType {
    pub kind: MeasureKind,
    /// Declared with the `condition` sugar. Only categorical kinds carry it.
    pub is_condition: bool,
}

impl MeasureType {
    pub fn continuous() -> Self {
        MeasureType { kind: MeasureKind::Continuous, is_condition: false }
    }

    pub fn counts() -> Self {
        MeasureType { kind: MeasureKind::Counts, is_condition: false }
    }

    pub fn ordered<S: Into<String>>(levels: impl IntoIterator<Item = S>) -> Self {
        MeasureType {
            kind: MeasureKind::OrderedCategories { levels: levels.into_iter().map(Into::into).collect() },
            is_condition: false,
        }
    }

    pub fn unordered<S: Into<String>>(levels: impl IntoIterator<Item = S>) -> Self {
        MeasureType {
            kind: MeasureKind::UnorderedCategories { levels: levels.into_iter().map(Into::into).collect() },
            is_condition: false,
        }
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.kind {
            MeasureKind::OrderedCategories { levels } | MeasureKind::UnorderedCategories { levels } => Some(levels),
            _ => None,
        }
    }

    pub fn is_categorical(&self) -> bool {
        self.levels().is_some()
    }

    /// Whether `increases` / `decreases` make sense for this type.
    pub fn is_ordinal(&self) -> bool {
        !matches!(self.kind, MeasureKind::UnorderedCategories { .. })
    }

    pub fn describe(&self) -> &'static str {
        match self.kind {
            MeasureKind::Continuous => "continuous",
            MeasureKind::Counts => "counts",
            MeasureKind::OrderedCategories { .. } => "ordered categories",
            MeasureKind::UnorderedCategories { .. } => "unordered categories",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariableKind {
    Unit {
        /// Column holding the unit identifier in the data file, if named.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id_column: Option<String>,
    },
    Measure { owner: String, mtype: MeasureType },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableDecl {
    pub name: String,
    pub kind: VariableKind,
    pub cardinality: Option<u64>,
}

impl VariableDecl {
    pub fn measure_type(&self) -> Option<&MeasureType> {
        match &self.kind {
            VariableKind::Measure { mtype, .. } => Some(mtype),
            VariableKind::Unit { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "value", rename_all = "snake_case")]
pub enum ComparisonOp {
    Increases,
    Decreases,
    Equals(Value),
    NotEquals(Value),
}

/// Literal on the right of `==` / `!=`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Text(String),
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Number(x) => write!(f, "{x}"),
            Value::Text(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub variable: String,
    pub op: ComparisonOp,
}

impl std::fmt::Display for Comparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.op {
            ComparisonOp::Increases => write!(f, "{} increases", self.variable),
            ComparisonOp::Decreases => write!(f, "{} decreases", self.variable),
            ComparisonOp::Equals(v) => write!(f, "{} == {v}", self.variable),
            ComparisonOp::NotEquals(v) => write!(f, "{} != {v}", self.variable),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RelationshipShape {
    Causes { cause: String, effect: String },
    Relates { a: String, b: String },
}

impl RelationshipShape {
    pub fn endpoints(&self) -> (&str, &str) {
        match self {
            RelationshipShape::Causes { cause, effect } => (cause, effect),
            RelationshipShape::Relates { a, b } => (a, b),
        }
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            RelationshipShape::Causes { .. } => "causes",
            RelationshipShape::Relates { .. } => "relates",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relationship {
    pub shape: RelationshipShape,
    pub certainty: Certainty,
    pub when: Option<Comparison>,
    pub then: Option<Comparison>,
}

impl std::fmt::Display for Relationship {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (a, b) = self.shape.endpoints();
        write!(f, "{} {} {} {}", self.certainty.keyword(), a, self.shape.keyword(), b)?;
        if let Some(w) = &self.when {
            write!(f, " when {w}")?;
        }
        if let Some(t) = &self.then {
            write!(f, " then {t}")?;
        }
        Ok(())
    }
}

/// Variables whose joint effect should enter a model as a product term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionAnnotation {
    pub variables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConceptualModel {
    pub variables: Vec<VariableDecl>,
    pub relationships: Vec<Relationship>,
    pub interactions: Vec<InteractionAnnotation>,
}

impl ConceptualModel {
    pub fn variable(&self, name: &str) -> Option<&VariableDecl> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn measure_type(&self, name: &str) -> Option<&MeasureType> {
        self.variable(name).and_then(VariableDecl::measure_type)
    }

    pub fn measures(&self) -> impl Iterator<Item = &VariableDecl> {
        self.variables.iter().filter(|v| matches!(v.kind, VariableKind::Measure { .. }))
    }
}

/// Request for a model estimating the average causal effect of `iv` on `dv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub iv: String,
    pub dv: String,
}
