//! Statistical model derivation: covariates, interaction terms and the
//! family/link pair, then assembly of the analyst's final choices.

mod adjustment;
mod family;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adjustment::{
    nodes_on_paths, satisfies_backdoor, select_adjustment_set, AdjustmentDecision, AdjustmentSet, DerivationWarning,
    Verdict,
};
pub use family::{candidate_families, candidate_family_links, Family, FamilyLink, Link};

use crate::graph::{ConceptGraph, Direction, GraphError};
use crate::model::{ConceptualModel, Query};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DerivationError {
    #[error("conceptual refinement is not complete; resolve every ambiguity first")]
    RefinementIncomplete,
    #[error("interaction ({}) has fewer than two variables besides the dependent variable `{dv}`", .variables.join(", "))]
    DegenerateInteraction { variables: Vec<String>, dv: String },
    #[error("{family} with a {link} link is not a candidate for this dependent variable", family = .0.family.name(), link = .0.link.name())]
    InvalidFamilyLink(FamilyLink),
    #[error("`{0}` was not suggested as a covariate; covariates can only be removed")]
    AddedCovariateNotSuggested(String),
    #[error("interaction ({}) was not suggested; interactions can only be removed", .0.join(", "))]
    AddedInteractionNotSuggested(Vec<String>),
    #[error("several families apply to the dependent variable; choose one")]
    MissingFamilyChoice,
    #[error("dependent variable `{0}` is not a declared measure")]
    UnknownDependentVariable(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Moderating variable sets to offer as interaction terms.
///
/// Only annotations that mention the dependent variable count; the
/// dependent variable itself is dropped from each.
pub fn suggest_interactions(cm: &ConceptualModel, q: &Query) -> Result<Vec<Vec<String>>, DerivationError> {
    let mut out = BTreeSet::new();
    for ann in &cm.interactions {
        if !ann.variables.contains(&q.dv) {
            continue;
        }
        let mut rest: Vec<String> = ann.variables.iter().filter(|v| **v != q.dv).cloned().collect();
        rest.sort();
        rest.dedup();
        if rest.len() < 2 {
            return Err(DerivationError::DegenerateInteraction { variables: ann.variables.clone(), dv: q.dv.clone() });
        }
        out.insert(rest);
    }
    Ok(out.into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyCandidates {
    pub family: Family,
    pub links: Vec<Link>,
}

/// Everything the analyst is shown in the statistical phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatisticalQuestions {
    pub adjustment: AdjustmentSet,
    pub interactions: Vec<Vec<String>>,
    pub families: Vec<FamilyCandidates>,
    pub default: FamilyLink,
    /// Whether a family must be chosen explicitly.
    pub family_choice_required: bool,
}

pub fn statistical_questions(
    g: &ConceptGraph,
    cm: &ConceptualModel,
    q: &Query,
) -> Result<StatisticalQuestions, DerivationError> {
    let adjustment = select_adjustment_set(g, q)?;
    let interactions = suggest_interactions(cm, q)?;
    let mtype = cm.measure_type(&q.dv).ok_or_else(|| DerivationError::UnknownDependentVariable(q.dv.clone()))?;
    let families: Vec<FamilyCandidates> = candidate_families(mtype)
        .iter()
        .map(|&family| FamilyCandidates { family, links: family.links().to_vec() })
        .collect();
    Ok(StatisticalQuestions {
        default: candidate_family_links(mtype)[0],
        family_choice_required: families.len() > 1,
        adjustment,
        interactions,
        families,
    })
}

/// The analyst's answers to the statistical phase. `None` for covariates
/// or interactions keeps every suggestion; a missing link means the
/// family's canonical link.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StatisticalChoices {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariates: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interactions: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<Link>,
}

impl StatisticalChoices {
    pub fn keep_all(family: Family, link: Link) -> Self {
        StatisticalChoices { covariates: None, interactions: None, family: Some(family), link: Some(link) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatisticalModel {
    pub dv: String,
    pub iv: String,
    /// Main effects other than `iv`, sorted.
    pub covariates: Vec<String>,
    /// Each set sorted, the list sorted; every member is also a main effect.
    pub interactions: Vec<Vec<String>>,
    #[serde(flatten)]
    pub family_link: FamilyLink,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_path: Option<String>,
    #[serde(default)]
    pub warnings: Vec<DerivationWarning>,
}

impl StatisticalModel {
    pub fn main_effects(&self) -> BTreeSet<String> {
        std::iter::once(self.iv.clone()).chain(self.covariates.iter().cloned()).collect()
    }

    /// All model terms with interaction sets expanded hierarchically (every
    /// sub-product of two or more members). Each term is a sorted variable
    /// list; main effects are singletons.
    pub fn terms(&self) -> BTreeSet<Vec<String>> {
        let mut out: BTreeSet<Vec<String>> = self.main_effects().into_iter().map(|v| vec![v]).collect();
        for set in &self.interactions {
            for mask in 1u64..(1 << set.len()) {
                if mask.count_ones() < 2 {
                    continue;
                }
                let term: Vec<String> =
                    set.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, v)| v.clone()).collect();
                out.insert(term);
            }
        }
        out
    }
}

/// Builds the final model from the analyst's choices. Analysts may drop
/// suggested covariates and interactions but never add; dropping a needed
/// confounder still yields a model, with a confounding warning attached.
pub fn assemble_model(
    g: &ConceptGraph,
    cm: &ConceptualModel,
    q: &Query,
    choices: &StatisticalChoices,
) -> Result<StatisticalModel, DerivationError> {
    let questions = statistical_questions(g, cm, q)?;
    let suggested = &questions.adjustment.set;

    let kept: BTreeSet<String> = match &choices.covariates {
        None => suggested.clone(),
        Some(list) => {
            for c in list {
                if !suggested.contains(c) {
                    return Err(DerivationError::AddedCovariateNotSuggested(c.clone()));
                }
            }
            list.iter().cloned().collect()
        }
    };
    let interactions: Vec<Vec<String>> = match &choices.interactions {
        None => questions.interactions.clone(),
        Some(list) => {
            let mut out = BTreeSet::new();
            for set in list {
                let mut sorted = set.clone();
                sorted.sort();
                sorted.dedup();
                if !questions.interactions.contains(&sorted) {
                    return Err(DerivationError::AddedInteractionNotSuggested(set.clone()));
                }
                out.insert(sorted);
            }
            out.into_iter().collect()
        }
    };

    let family_link = match (choices.family, choices.link) {
        (None, None) if !questions.family_choice_required => questions.default,
        (None, _) => return Err(DerivationError::MissingFamilyChoice),
        (Some(family), link) => {
            let fl = FamilyLink::new(family, link.unwrap_or(family.canonical_link()));
            let ok = questions.families.iter().any(|c| c.family == fl.family && c.links.contains(&fl.link));
            if !ok {
                return Err(DerivationError::InvalidFamilyLink(fl));
            }
            fl
        }
    };

    let mut covariates = kept;
    for set in &interactions {
        covariates.extend(set.iter().cloned());
    }
    covariates.remove(&q.iv);

    let mut warnings = questions.adjustment.warnings.clone();
    let de_iv = g.reachable(&q.iv, Direction::Forward)?;
    if !satisfies_backdoor(g, q, &covariates)? {
        let missing: Vec<&str> = suggested
            .iter()
            .filter(|c| !covariates.contains(*c))
            .filter(|c| questions.adjustment.decisions.iter().any(|d| d.variable == **c && d.verdict == Verdict::IncludeConfounder))
            .map(String::as_str)
            .collect();
        let descendants: Vec<&str> = covariates.iter().filter(|c| de_iv.contains(*c)).map(String::as_str).collect();
        let mut message = format!("the model's covariates do not block every backdoor path from `{}` to `{}`", q.iv, q.dv);
        if !missing.is_empty() {
            message.push_str(&format!("; removed confounders: {}", missing.join(", ")));
        }
        if !descendants.is_empty() {
            message.push_str(&format!("; covariates influenced by `{}`: {}", q.iv, descendants.join(", ")));
        }
        message.push_str(". The estimate may be biased.");
        warnings.push(DerivationWarning::Confounding { message });
    }

    Ok(StatisticalModel {
        dv: q.dv.clone(),
        iv: q.iv.clone(),
        covariates: covariates.into_iter().collect(),
        interactions,
        family_link,
        data_path: None,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::compile_source;
    use crate::graph::build_graph;
    use crate::model::MeasureType;

    fn load(src: &str) -> (ConceptGraph, ConceptualModel, Query) {
        let (cm, q) = compile_source(src).unwrap();
        (build_graph(&cm), cm, q)
    }

    const CONFOUNDED: &str = "unit p\nmeasure X = continuous(p)\nmeasure Y = continuous(p)\nmeasure Z = continuous(p)\n\
                              assume causes(Z, X)\nassume causes(Z, Y)\nassume causes(X, Y)\nquery ace(X -> Y)";

    #[test]
    fn family_lists() {
        let fams = |m: MeasureType| candidate_families(&m).to_vec();
        use Family::*;
        assert_eq!(fams(MeasureType::continuous()), vec![Gaussian, InverseGaussian, Gamma]);
        assert_eq!(fams(MeasureType::counts()), vec![Poisson, NegativeBinomial]);
        assert_eq!(fams(MeasureType::ordered(["a", "b"])), vec![Binomial, Multinomial, Gaussian, InverseGaussian, Gamma]);
        assert_eq!(fams(MeasureType::unordered(["a", "b"])), vec![Binomial, Multinomial]);
    }

    #[test]
    fn interactions_follow_the_dv() {
        let src = "unit p\nmeasure race = continuous(p)\nmeasure sex = continuous(p)\nmeasure income = continuous(p)\n\
                   measure age = continuous(p)\nmeasure education = continuous(p)\n\
                   assume causes(race, income)\ninteracts(sex, race, income)\ninteracts(age, education)\nquery ace(race -> income)";
        let (_, cm, q) = load(src);
        assert_eq!(suggest_interactions(&cm, &q).unwrap(), vec![vec!["race".to_string(), "sex".to_string()]]);
    }

    #[test]
    fn degenerate_interaction() {
        let src = "unit p\nmeasure age = continuous(p)\nmeasure income = continuous(p)\n\
                   assume causes(age, income)\ninteracts(age, income)\nquery ace(age -> income)";
        let (_, cm, q) = load(src);
        assert!(matches!(suggest_interactions(&cm, &q), Err(DerivationError::DegenerateInteraction { .. })));
    }

    #[test]
    fn keep_all_defaults() {
        let (g, cm, q) = load(CONFOUNDED);
        let m = assemble_model(&g, &cm, &q, &StatisticalChoices::keep_all(Family::Gaussian, Link::Identity)).unwrap();
        assert_eq!(m.covariates, vec!["Z"]);
        assert_eq!(m.family_link, FamilyLink::new(Family::Gaussian, Link::Identity));
        assert!(m.warnings.is_empty());
    }

    #[test]
    fn dropping_a_confounder_warns() {
        let (g, cm, q) = load(CONFOUNDED);
        let choices = StatisticalChoices { covariates: Some(vec![]), ..StatisticalChoices::keep_all(Family::Gaussian, Link::Identity) };
        let m = assemble_model(&g, &cm, &q, &choices).unwrap();
        assert!(m.covariates.is_empty());
        assert!(matches!(&m.warnings[..], [DerivationWarning::Confounding { message }] if message.contains("Z")));
        assert_eq!(m.main_effects(), BTreeSet::from(["X".to_string()]));
    }

    #[test]
    fn choice_errors() {
        let (g, cm, q) = load(CONFOUNDED);
        let base = StatisticalChoices::keep_all(Family::Gaussian, Link::Identity);
        let added = StatisticalChoices { covariates: Some(vec!["Y".into()]), ..base.clone() };
        assert_eq!(assemble_model(&g, &cm, &q, &added), Err(DerivationError::AddedCovariateNotSuggested("Y".into())));
        let bad_link = StatisticalChoices { link: Some(Link::Logit), ..base.clone() };
        assert!(matches!(assemble_model(&g, &cm, &q, &bad_link), Err(DerivationError::InvalidFamilyLink(_))));
        let bad_family = StatisticalChoices::keep_all(Family::Poisson, Link::Log);
        assert!(matches!(assemble_model(&g, &cm, &q, &bad_family), Err(DerivationError::InvalidFamilyLink(_))));
        let none = StatisticalChoices::default();
        assert_eq!(assemble_model(&g, &cm, &q, &none), Err(DerivationError::MissingFamilyChoice));
        let added_ix = StatisticalChoices { interactions: Some(vec![vec!["X".into(), "Z".into()]]), ..base };
        assert!(matches!(assemble_model(&g, &cm, &q, &added_ix), Err(DerivationError::AddedInteractionNotSuggested(_))));
    }

    #[test]
    fn family_without_link_uses_canonical() {
        let (g, cm, q) = load(CONFOUNDED);
        let choices = StatisticalChoices { family: Some(Family::Gamma), ..Default::default() };
        let m = assemble_model(&g, &cm, &q, &choices).unwrap();
        assert_eq!(m.family_link, FamilyLink::new(Family::Gamma, Link::Inverse));
    }

    #[test]
    fn hierarchical_terms() {
        let m = StatisticalModel {
            dv: "y".into(),
            iv: "a".into(),
            covariates: vec!["b".into(), "c".into()],
            interactions: vec![vec!["a".into(), "b".into(), "c".into()]],
            family_link: FamilyLink::new(Family::Gaussian, Link::Identity),
            data_path: None,
            warnings: vec![],
        };
        assert_eq!(m.terms().len(), 3 + 3 + 1);
    }
}
