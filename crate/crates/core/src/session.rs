//! The two-phase disambiguation state machine shared by the HTTP service
//! and batch compilation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegen::{CodegenConfig, CodegenError, EmittedArtifact};
use crate::data::{profile_csv, reconcile, DataError, DataWarning, ProfileError};
use crate::derivation::{
    assemble_model, statistical_questions, suggest_interactions, DerivationError, StatisticalChoices,
    StatisticalModel, StatisticalQuestions,
};
use crate::disambiguation::{apply_resolution, enumerate_ambiguities, Ambiguity, Resolution, ResolutionEffect, ResolveError};
use crate::dsl::{compile_source, Diagnostic};
use crate::graph::{build_graph, ConceptGraph, GraphError, DEFAULT_MAX_CYCLE_NODES};
use crate::model::{ConceptualModel, Query};

/// Data path written into scripts compiled without a data file.
pub const PLACEHOLDER_DATA_PATH: &str = "data.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    ConceptualRefinement,
    StatisticalDisambiguation,
    Finalized,
}

/// One entry of the answer log. The log is what batch compilation replays.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Answer {
    Conceptual {
        ambiguity_id: String,
        choice: usize,
    },
    Statistical {
        #[serde(flatten)]
        choices: StatisticalChoices,
    },
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("the program has errors")]
    Validation(Vec<Diagnostic>),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("the data do not match the declared variables")]
    Data(Vec<DataError>),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Derivation(#[from] DerivationError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Codegen(#[from] CodegenError),
    #[error("this step needs phase {expected:?} but the session is in {actual:?}")]
    WrongPhase { expected: Phase, actual: Phase },
    #[error("the session has not been finalized")]
    NotFinalized,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("answer {index} could not be applied: {source}")]
    Answer { index: usize, source: SessionError },
    #[error("{} ambiguities are unanswered", .0.len())]
    Unanswered(Vec<Ambiguity>),
    #[error("no statistical choices were given")]
    MissingStatisticalChoices(Box<StatisticalQuestions>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionOptions {
    pub data_path: Option<String>,
    pub max_cycle_nodes: usize,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions { data_path: None, max_cycle_nodes: DEFAULT_MAX_CYCLE_NODES }
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    options: SessionOptions,
    model: ConceptualModel,
    query: Query,
    data_warnings: Vec<DataWarning>,
    graph: ConceptGraph,
    phase: Phase,
    ambiguities: Vec<Ambiguity>,
    questions: Option<StatisticalQuestions>,
    answers: Vec<Answer>,
    effects: Vec<ResolutionEffect>,
    result: Option<StatisticalModel>,
    artifacts: Option<EmittedArtifact>,
}

/// Wire form of a session, as returned by the HTTP service.
#[derive(Debug, Clone, Serialize)]
pub struct SessionSummary<'a> {
    pub phase: Phase,
    pub revision: u64,
    pub graph: serde_json::Value,
    pub query: &'a Query,
    pub ambiguities: &'a [Ambiguity],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistical_questions: Option<&'a StatisticalQuestions>,
    pub answers: &'a [Answer],
    pub refinement_log: Vec<String>,
    pub data_warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<&'a StatisticalModel>,
}

impl Session {
    pub fn create(program: &str, options: SessionOptions) -> Result<Self, SessionError> {
        let (mut model, query) = compile_source(program).map_err(SessionError::Validation)?;
        suggest_interactions(&model, &query)?;
        let mut data_warnings = Vec::new();
        if let Some(path) = &options.data_path {
            let profiles = profile_csv(path)?;
            let reconciled = reconcile(&model, &profiles).map_err(SessionError::Data)?;
            model = reconciled.model;
            data_warnings = reconciled.warnings;
        }
        let graph = build_graph(&model);
        let mut s = Session {
            options,
            model,
            query,
            data_warnings,
            graph,
            phase: Phase::ConceptualRefinement,
            ambiguities: Vec::new(),
            questions: None,
            answers: Vec::new(),
            effects: Vec::new(),
            result: None,
            artifacts: None,
        };
        s.refresh()?;
        Ok(s)
    }

    /// Rebuilds a session from its program and answer log. Stops short of
    /// an error when answers run out, leaving the session mid-protocol.
    pub fn replay_partial(program: &str, options: SessionOptions, answers: &[Answer]) -> Result<Self, ReplayError> {
        let mut s = Session::create(program, options)?;
        for (index, answer) in answers.iter().enumerate() {
            s.apply(answer).map_err(|source| ReplayError::Answer { index, source })?;
        }
        Ok(s)
    }

    /// Like [`Session::replay_partial`] but requires the log to finish the
    /// session.
    pub fn replay(program: &str, options: SessionOptions, answers: &[Answer]) -> Result<Self, ReplayError> {
        let s = Session::replay_partial(program, options, answers)?;
        match s.phase {
            Phase::Finalized => Ok(s),
            Phase::ConceptualRefinement => Err(ReplayError::Unanswered(s.ambiguities)),
            Phase::StatisticalDisambiguation => {
                Err(ReplayError::MissingStatisticalChoices(Box::new(s.questions.expect("questions in phase"))))
            }
        }
    }

    pub fn apply(&mut self, answer: &Answer) -> Result<(), SessionError> {
        match answer {
            Answer::Conceptual { ambiguity_id, choice } => {
                self.resolve(&Resolution::new(ambiguity_id.clone(), *choice)).map(|_| ())
            }
            Answer::Statistical { choices } => self.choose(choices).map(|_| ()),
        }
    }

    fn expect_phase(&self, expected: Phase) -> Result<(), SessionError> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(SessionError::WrongPhase { expected, actual: self.phase })
        }
    }

    fn refresh(&mut self) -> Result<(), SessionError> {
        self.ambiguities = enumerate_ambiguities(&self.graph, self.options.max_cycle_nodes)?;
        if self.ambiguities.is_empty() {
            self.questions = Some(statistical_questions(&self.graph, &self.model, &self.query)?);
            self.phase = Phase::StatisticalDisambiguation;
        }
        Ok(())
    }

    pub fn resolve(&mut self, r: &Resolution) -> Result<&ResolutionEffect, SessionError> {
        self.expect_phase(Phase::ConceptualRefinement)?;
        let (graph, effect) = apply_resolution(&self.graph, r, self.options.max_cycle_nodes)?;
        let previous = std::mem::replace(&mut self.graph, graph);
        if let Err(e) = self.refresh() {
            self.graph = previous;
            self.phase = Phase::ConceptualRefinement;
            self.ambiguities = enumerate_ambiguities(&self.graph, self.options.max_cycle_nodes)?;
            return Err(e);
        }
        self.answers.push(Answer::Conceptual { ambiguity_id: r.ambiguity_id.clone(), choice: r.choice });
        self.effects.push(effect);
        Ok(self.effects.last().expect("just pushed"))
    }

    pub fn choose(&mut self, choices: &StatisticalChoices) -> Result<&StatisticalModel, SessionError> {
        self.expect_phase(Phase::StatisticalDisambiguation)?;
        let mut m = assemble_model(&self.graph, &self.model, &self.query, choices)?;
        let data_path = self.options.data_path.clone().unwrap_or_else(|| PLACEHOLDER_DATA_PATH.to_string());
        m.data_path = Some(data_path.clone());
        let mut answers = self.answers.clone();
        answers.push(Answer::Statistical { choices: choices.clone() });

        let mut cfg = CodegenConfig::for_model(&self.model, &m, Some(data_path));
        if self.options.data_path.is_none() {
            cfg.notes.push(format!("No data file was given; replace \"{PLACEHOLDER_DATA_PATH}\" below with your data."));
        }
        cfg.notes.extend(self.effects.iter().map(|e| format!("Refinement: {e}")));
        cfg.notes.extend(self.data_warnings.iter().map(|w| format!("Data: {w}")));
        let artifacts = EmittedArtifact::emit(&m, &cfg, answers_json(&answers))?;

        self.answers = answers;
        self.artifacts = Some(artifacts);
        self.result = Some(m);
        self.phase = Phase::Finalized;
        Ok(self.result.as_ref().expect("just set"))
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn graph(&self) -> &ConceptGraph {
        &self.graph
    }

    pub fn model(&self) -> &ConceptualModel {
        &self.model
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn ambiguities(&self) -> &[Ambiguity] {
        &self.ambiguities
    }

    pub fn statistical_questions(&self) -> Option<&StatisticalQuestions> {
        self.questions.as_ref()
    }

    pub fn answers(&self) -> &[Answer] {
        &self.answers
    }

    pub fn effects(&self) -> &[ResolutionEffect] {
        &self.effects
    }

    pub fn data_warnings(&self) -> &[DataWarning] {
        &self.data_warnings
    }

    pub fn options(&self) -> &SessionOptions {
        &self.options
    }

    pub fn statistical_model(&self) -> Option<&StatisticalModel> {
        self.result.as_ref()
    }

    pub fn artifacts(&self) -> Result<&EmittedArtifact, SessionError> {
        self.artifacts.as_ref().ok_or(SessionError::NotFinalized)
    }

    pub fn summary(&self) -> SessionSummary<'_> {
        let mut graph = self.graph.to_json();
        graph["layout"] = serde_json::to_value(self.graph.layers()).expect("layers serialize");
        SessionSummary {
            phase: self.phase,
            revision: self.graph.revision(),
            graph,
            query: &self.query,
            ambiguities: &self.ambiguities,
            statistical_questions: self.questions.as_ref().filter(|_| self.phase != Phase::ConceptualRefinement),
            answers: &self.answers,
            refinement_log: self.effects.iter().map(ToString::to_string).collect(),
            data_warnings: self.data_warnings.iter().map(ToString::to_string).collect(),
            model: self.result.as_ref(),
        }
    }
}

/// Canonical text of an answer log, as written to `*.choices.json`.
pub fn answers_json(answers: &[Answer]) -> String {
    let mut out = serde_json::to_string_pretty(answers).expect("answers serialize");
    out.push('\n');
    out
}

pub fn parse_answers(text: &str) -> Result<Vec<Answer>, serde_json::Error> {
    serde_json::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivation::{Family, Link};

    const RELATES: &str = "unit p\nmeasure X = continuous(p)\nmeasure Y = continuous(p)\nmeasure Z = continuous(p)\n\
                           assume causes(X, Y)\nhypothesize relates(Z, X)\nassume causes(Z, Y)\nquery ace(X -> Y)";

    fn gaussian() -> StatisticalChoices {
        StatisticalChoices::keep_all(Family::Gaussian, Link::Identity)
    }

    #[test]
    fn ambiguity_free_programs_skip_refinement() {
        let src = "unit p\nmeasure X = continuous(p)\nmeasure Y = continuous(p)\nassume causes(X, Y)\nquery ace(X -> Y)";
        let s = Session::create(src, SessionOptions::default()).unwrap();
        assert_eq!(s.phase(), Phase::StatisticalDisambiguation);
        assert!(s.statistical_questions().is_some());
    }

    #[test]
    fn full_protocol() {
        let mut s = Session::create(RELATES, SessionOptions::default()).unwrap();
        assert_eq!(s.phase(), Phase::ConceptualRefinement);
        assert_eq!(s.ambiguities().len(), 1);
        assert!(matches!(s.choose(&gaussian()), Err(SessionError::WrongPhase { .. })));
        assert!(matches!(s.artifacts(), Err(SessionError::NotFinalized)));

        let id = s.ambiguities()[0].id.clone();
        let z_to_x = s.ambiguities()[0].options.iter().position(|o| o.from == "Z").unwrap();
        s.resolve(&Resolution::new(id.clone(), z_to_x)).unwrap();
        assert_eq!(s.phase(), Phase::StatisticalDisambiguation);
        assert!(s.statistical_questions().unwrap().adjustment.set.contains("Z"));
        assert!(matches!(s.resolve(&Resolution::new(id, 0)), Err(SessionError::WrongPhase { .. })));

        let m = s.choose(&gaussian()).unwrap();
        assert_eq!(m.covariates, vec!["Z"]);
        assert_eq!(s.phase(), Phase::Finalized);
        let art = s.artifacts().unwrap();
        assert!(art.script_text.contains("m <- glm(formula=Y ~ X + Z, family=gaussian(link='identity'), data=data)"));
        assert!(art.script_text.contains("Refinement: assumed Z -> X"));
        assert_eq!(parse_answers(&art.choices_log).unwrap(), s.answers());
    }

    #[test]
    fn failed_answers_do_not_enter_the_log() {
        let mut s = Session::create(RELATES, SessionOptions::default()).unwrap();
        assert!(s.resolve(&Resolution::new("direction:X~Z", 7)).is_err());
        assert!(s.resolve(&Resolution::new("nonsense", 0)).is_err());
        assert!(s.answers().is_empty());
    }

    #[test]
    fn replay_reproduces_artifacts() {
        let mut s = Session::create(RELATES, SessionOptions::default()).unwrap();
        s.resolve(&Resolution::new("direction:X~Z", 1)).unwrap();
        s.choose(&gaussian()).unwrap();
        let replayed = Session::replay(RELATES, SessionOptions::default(), s.answers()).unwrap();
        assert_eq!(replayed.artifacts().unwrap(), s.artifacts().unwrap());
    }

    #[test]
    fn replay_reports_what_is_missing() {
        let err = Session::replay(RELATES, SessionOptions::default(), &[]).unwrap_err();
        assert!(matches!(err, ReplayError::Unanswered(a) if a.len() == 1));
        let log = [Answer::Conceptual { ambiguity_id: "direction:X~Z".into(), choice: 0 }];
        let err = Session::replay(RELATES, SessionOptions::default(), &log).unwrap_err();
        assert!(matches!(err, ReplayError::MissingStatisticalChoices(_)));
    }

    #[test]
    fn answer_wire_format() {
        let log = vec![
            Answer::Conceptual { ambiguity_id: "direction:X~Z".into(), choice: 0 },
            Answer::Statistical { choices: StatisticalChoices { covariates: Some(vec![]), ..gaussian() } },
        ];
        let text = answers_json(&log);
        assert!(text.contains("\"phase\": \"conceptual\""));
        assert!(text.contains("\"family\": \"gaussian\""));
        assert_eq!(parse_answers(&text).unwrap(), log);
        let with_note = r#"[{"phase":"conceptual","ambiguity_id":"a","choice":1,"note":"ignored"}]"#;
        assert_eq!(parse_answers(with_note).unwrap(), vec![Answer::Conceptual { ambiguity_id: "a".into(), choice: 1 }]);
    }

    #[test]
    fn summary_has_layout() {
        let s = Session::create(RELATES, SessionOptions::default()).unwrap();
        let v = serde_json::to_value(s.summary()).unwrap();
        assert_eq!(v["phase"], "conceptual_refinement");
        assert!(v["graph"]["layout"].is_object());
        assert!(v.get("statistical_questions").is_none());
    }
}
