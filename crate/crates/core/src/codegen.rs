//! R script and model JSON emission.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derivation::{Family, Link, StatisticalModel};
use crate::model::{ConceptualModel, MeasureKind};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

const R_RESERVED: &[&str] = &[
    "if", "else", "repeat", "while", "function", "for", "next", "break", "TRUE", "FALSE", "NULL", "Inf", "NaN", "NA",
    "NA_integer_", "NA_real_", "NA_character_", "NA_complex_", "in",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodegenError {
    #[error("no data path configured for the script")]
    MissingDataPath,
}

/// A categorical model variable that the script converts to a factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub name: String,
    pub levels: Vec<String>,
    pub ordered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CodegenConfig {
    pub data_path: Option<String>,
    /// Conditional relationships, echoed verbatim in the header.
    pub assumptions: Vec<String>,
    /// Free-form header notes (refinement log, data profile remarks).
    pub notes: Vec<String>,
    pub factors: Vec<FactorSpec>,
}

impl CodegenConfig {
    /// Config carrying the assumptions and factor levels relevant to `m`.
    pub fn for_model(cm: &ConceptualModel, m: &StatisticalModel, data_path: Option<String>) -> Self {
        let used = m.main_effects();
        let mut factors = Vec::new();
        for name in std::iter::once(&m.dv).chain(used.iter()) {
            let Some(mtype) = cm.measure_type(name) else { continue };
            let (levels, ordered) = match &mtype.kind {
                MeasureKind::OrderedCategories { levels } => (levels.clone(), true),
                MeasureKind::UnorderedCategories { levels } => (levels.clone(), false),
                _ => continue,
            };
            factors.push(FactorSpec { name: name.clone(), levels, ordered });
        }
        let assumptions = cm
            .relationships
            .iter()
            .filter(|r| r.when.is_some() || r.then.is_some())
            .map(|r| r.to_string())
            .collect();
        CodegenConfig { data_path, assumptions, notes: Vec::new(), factors }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedArtifact {
    pub script_text: String,
    pub model_json: String,
    pub choices_log: String,
}

impl EmittedArtifact {
    pub fn emit(m: &StatisticalModel, cfg: &CodegenConfig, choices_log: String) -> Result<Self, CodegenError> {
        Ok(EmittedArtifact { script_text: emit_script(m, cfg)?, model_json: emit_model_json(m), choices_log })
    }
}

/// Quotes a variable for use inside an R formula when it is not a
/// syntactic R name.
pub fn r_name(name: &str) -> String {
    let syntactic = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !R_RESERVED.contains(&name);
    if syntactic {
        name.to_string()
    } else {
        format!("`{}`", name.replace('\\', "\\\\").replace('`', "\\`"))
    }
}

fn r_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn r_column(name: &str) -> String {
    format!("data[[{}]]", r_string(name))
}

pub fn r_family(f: Family) -> &'static str {
    match f {
        Family::Gaussian => "gaussian",
        Family::InverseGaussian => "inverse.gaussian",
        Family::Gamma => "Gamma",
        Family::Poisson => "poisson",
        Family::NegativeBinomial => "negative.binomial",
        Family::Binomial => "binomial",
        Family::Multinomial => "multinomial",
    }
}

pub fn r_link(l: Link) -> &'static str {
    match l {
        Link::InverseSquared => "1/mu^2",
        other => other.name(),
    }
}

pub fn emit_formula(m: &StatisticalModel) -> String {
    let grouped: std::collections::BTreeSet<&String> = m.interactions.iter().flatten().collect();
    let mut terms: Vec<String> = Vec::new();
    for v in std::iter::once(&m.iv).chain(m.covariates.iter()) {
        if !grouped.contains(v) {
            terms.push(r_name(v));
        }
    }
    for set in &m.interactions {
        terms.push(set.iter().map(|v| r_name(v)).collect::<Vec<_>>().join("*"));
    }
    format!("{} ~ {}", r_name(&m.dv), terms.join(" + "))
}

/// The single line that fits the model.
pub fn model_call(m: &StatisticalModel) -> String {
    let formula = emit_formula(m);
    let link = r_link(m.family_link.link);
    match m.family_link.family {
        Family::NegativeBinomial => format!("m <- MASS::glm.nb(formula={formula}, link='{link}', data=data)"),
        Family::Multinomial => format!("m <- nnet::multinom(formula={formula}, data=data)"),
        f => format!("m <- glm(formula={formula}, family={}(link='{link}'), data=data)", r_family(f)),
    }
}

pub fn emit_script(m: &StatisticalModel, cfg: &CodegenConfig) -> Result<String, CodegenError> {
    let data_path = cfg.data_path.as_deref().ok_or(CodegenError::MissingDataPath)?;
    let fl = m.family_link;
    let mut s = String::new();

    let _ = writeln!(s, "# Generated by cmc {TOOL_VERSION}");
    let _ = writeln!(s, "# Query: average causal effect of {} on {}", m.iv, m.dv);
    let _ = writeln!(s, "# Family: {}, link: {}", fl.family.name(), fl.link.name());
    if !cfg.assumptions.is_empty() {
        s.push_str("#\n# Conditional assumptions (documentation only, not part of the model):\n");
        for a in &cfg.assumptions {
            let _ = writeln!(s, "#   {a}");
        }
    }
    if !cfg.notes.is_empty() {
        s.push_str("#\n# Notes:\n");
        for n in &cfg.notes {
            let _ = writeln!(s, "#   {n}");
        }
    }
    if !m.warnings.is_empty() {
        s.push_str("#\n# WARNINGS:\n");
        for w in &m.warnings {
            let _ = writeln!(s, "#   {}", w.message());
        }
    }
    s.push('\n');

    let _ = writeln!(s, "data <- read.csv({})", r_string(data_path));
    for f in &cfg.factors {
        let levels: Vec<String> = f.levels.iter().map(|l| r_string(l)).collect();
        let col = r_column(&f.name);
        let ordered = if f.ordered { ", ordered=TRUE" } else { "" };
        let _ = writeln!(s, "{col} <- factor({col}, levels=c({}){ordered})", levels.join(", "));
        let numeric_dv = f.name == m.dv
            && f.ordered
            && matches!(fl.family, Family::Gaussian | Family::InverseGaussian | Family::Gamma);
        if numeric_dv {
            let _ = writeln!(s, "# {} is modelled on its level positions 1..{}.", f.name, f.levels.len());
            let _ = writeln!(s, "{col} <- as.numeric({col})");
        }
    }
    s.push('\n');

    match fl.family {
        Family::Multinomial => {
            s.push_str("# WARNING: glm() has no multinomial family. The model below is fitted with\n");
            s.push_str("# nnet::multinom instead; install the nnet package if it is missing.\n");
            s.push_str("# ---- alternative fitting routine ----\n");
        }
        Family::NegativeBinomial => {
            s.push_str("# glm() has no negative binomial family; MASS::glm.nb estimates it.\n");
        }
        Family::Binomial if cfg.factors.iter().any(|f| f.name == m.dv && f.levels.len() > 2) => {
            let _ = writeln!(
                s,
                "# NOTE: binomial treats the first level of {} as failure and all others as success.",
                m.dv
            );
        }
        _ => {}
    }
    s.push_str(&model_call(m));
    s.push('\n');
    if fl.family == Family::Multinomial {
        s.push_str("# ---- end alternative fitting routine ----\n");
    }
    s.push_str("print(summary(m))\n\n");

    s.push_str("# Residuals against fitted values. Look for points scattered evenly around\n");
    s.push_str("# zero with no pattern. A curve suggests a missing term or a poor link\n");
    s.push_str("# function; a funnel shape suggests the family's variance assumption does\n");
    s.push_str("# not hold for these data.\n");
    s.push_str("plot(fitted(m), residuals(m), xlab=\"Fitted values\", ylab=\"Residuals\")\n");
    s.push_str("abline(h=0, lty=2)\n\n");
    s.push_str("# Further reading: help(plot.lm) and\n");
    s.push_str("# https://cran.r-project.org/doc/manuals/r-release/R-intro.html\n");
    Ok(s)
}

/// Pretty JSON with keys sorted at every level.
pub fn emit_model_json(m: &StatisticalModel) -> String {
    let value = serde_json::to_value(m).expect("statistical model serializes");
    let mut out = serde_json::to_string_pretty(&value).expect("json value serializes");
    out.push('\n');
    out
}

pub fn parse_model_json(text: &str) -> Result<StatisticalModel, serde_json::Error> {
    serde_json::from_str(text)
}
