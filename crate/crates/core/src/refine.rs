//! Query refinement: mode gating on the classifier label and rewriting the
//! triggering utterance into a self-contained chart request.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Aggregation, Attribute, Island};
use crate::history::{normalize_title, ClassLabel, ContextDocument, ContextHistory};
use crate::llm::HttpClient;
use crate::reasoner::{attribute_phrase, island_phrase, join_words, DatasetSchema};
use crate::segment::Utterance;
use crate::vocab::{self, Region};

/// Instruction sent to language-model refinement backends.
pub const REFINE_INSTRUCTION: &str = include_str!("../prompts/refine_v1.txt");
pub const REFINE_PROMPT_VERSION: &str = "refine_v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Explicit,
    Proactive,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Explicit => "explicit",
            Origin::Proactive => "proactive",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Assistant mode, fixed for the lifetime of a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Proactive,
    NonProactive,
}

impl Mode {
    pub fn default_persona(self) -> &'static str {
        match self {
            Mode::Proactive => "Arti",
            Mode::NonProactive => "Marti",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "p" | "proactive" => Ok(Mode::Proactive),
            "np" | "non_proactive" | "non-proactive" => Ok(Mode::NonProactive),
            other => Err(format!("unknown mode `{other}` (expected P or NP)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedQuery {
    pub text: String,
    pub origin: Origin,
    pub source_utterance_id: u64,
    /// SHA-256 of the context document the refinement was based on.
    pub context_digest: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error("no dataset attribute could be recovered from `{0}` or its context")]
    NoAttribute(String),
    #[error("refinement backend failed: {0}")]
    Backend(String),
}

/// The mode gate: which utterance classes lead to a refinement.
pub fn gate(label: ClassLabel, mode: Mode) -> Option<Origin> {
    match (label, mode) {
        (ClassLabel::ExplicitQuery, _) => Some(Origin::Explicit),
        (ClassLabel::ProactiveOpportunity, Mode::Proactive) => Some(Origin::Proactive),
        (ClassLabel::ProactiveOpportunity, Mode::NonProactive) | (ClassLabel::NonQuery, _) => None,
    }
}

/// True iff the title's dedupe key is in the generated or selected window.
pub fn suppress_duplicate(candidate_title: &str, history: &ContextHistory) -> bool {
    history.contains_chart(candidate_title)
}

pub trait RefinementBackend: Send + Sync {
    fn rewrite(
        &self,
        instruction: &str,
        context: &ContextDocument,
        utterance: &Utterance,
        origin: Origin,
    ) -> Result<String, RefineError>;
}

/// Rule-based rewriting.
///
/// 1. Missing attributes or places are taken from the newest dialogue line
///    that mentions one.
/// 2. A finding about a station or island becomes a comparison of that
///    attribute across the enclosing island's stations.
/// 3. Without a recoverable attribute the rewrite fails.
#[derive(Debug, Clone)]
pub struct FallbackRefiner {
    schema: DatasetSchema,
}

impl FallbackRefiner {
    pub fn new(schema: DatasetSchema) -> Self {
        FallbackRefiner { schema }
    }

    fn context_attributes(&self, utterance: &str, doc: &ContextDocument) -> Vec<Attribute> {
        let own = vocab::find_attributes(utterance);
        if !own.is_empty() {
            return own;
        }
        doc.dialogue
            .iter()
            .rev()
            .map(|line| vocab::find_attributes(&line.text))
            .find(|a| !a.is_empty())
            .unwrap_or_default()
    }

    fn context_regions(&self, utterance: &str, doc: &ContextDocument) -> Vec<Region> {
        let own = vocab::find_regions(utterance);
        if !own.is_empty() {
            return own;
        }
        doc.dialogue
            .iter()
            .rev()
            .map(|line| vocab::find_regions(&line.text))
            .find(|r| !r.is_empty())
            .unwrap_or_default()
    }

    /// Drops islands that only qualify a named station ("station 4 on Oahu").
    fn without_qualifiers(&self, regions: Vec<Region>) -> Vec<Region> {
        let station_islands: Vec<Island> = regions
            .iter()
            .filter_map(|r| match r {
                Region::Station(id) => self.schema.island_of(id),
                _ => None,
            })
            .collect();
        regions
            .into_iter()
            .filter(|r| !matches!(r, Region::Island(i) if station_islands.contains(i)))
            .collect()
    }

    fn scope_phrase(regions: &[Region]) -> String {
        if regions.is_empty() || regions.contains(&Region::State) {
            return "all stations".into();
        }
        let parts: Vec<String> = regions
            .iter()
            .map(|r| match r {
                Region::Station(id) => format!("station {id}"),
                Region::Island(i) => format!("the {} stations", island_phrase(*i)),
                Region::State => unreachable!(),
            })
            .collect();
        join_words(&parts.iter().map(String::as_str).collect::<Vec<_>>())
    }

    fn explicit(&self, utterance: &str, doc: &ContextDocument) -> Result<String, RefineError> {
        let attrs = self.context_attributes(utterance, doc);
        if attrs.is_empty() {
            return Err(RefineError::NoAttribute(utterance.to_string()));
        }
        let regions = self.without_qualifiers(self.context_regions(utterance, doc));
        let chart = vocab::explicit_chart_type(utterance)
            .map(|c| c.phrase())
            .or_else(|| vocab::has_distribution_intent(utterance).then_some("histogram"))
            .or_else(|| vocab::has_spread_intent(utterance).then_some("box plot"))
            .unwrap_or("chart");
        let agg = vocab::find_aggregation(utterance)
            .map(|a| format!("the {} ", agg_adjective(a)))
            .unwrap_or_default();
        let group = vocab::find_group_by(utterance)
            .map(|g| format!(" per {}", g.as_str()))
            .unwrap_or_default();
        Ok(format!(
            "Show a {chart} of {agg}{}{group} for {}",
            attribute_phrase(&attrs),
            Self::scope_phrase(&regions)
        ))
    }

    fn proactive(&self, utterance: &str, doc: &ContextDocument) -> Result<String, RefineError> {
        let attrs = self.context_attributes(utterance, doc);
        if attrs.is_empty() {
            return Err(RefineError::NoAttribute(utterance.to_string()));
        }
        let regions = self.context_regions(utterance, doc);
        let mut islands: Vec<Island> = Vec::new();
        let mut statewide = regions.is_empty();
        for r in &regions {
            let island = match r {
                Region::Station(id) => self.schema.island_of(id),
                Region::Island(i) => Some(*i),
                Region::State => {
                    statewide = true;
                    None
                }
            };
            if let Some(i) = island {
                if !islands.contains(&i) {
                    islands.push(i);
                }
            }
        }
        let scope = if statewide || islands.is_empty() {
            "all stations".to_string()
        } else {
            let parts: Vec<String> = islands
                .iter()
                .map(|i| format!("the {} stations", island_phrase(*i)))
                .collect();
            join_words(&parts.iter().map(String::as_str).collect::<Vec<_>>())
        };
        if attrs.len() >= 2 {
            return Ok(format!(
                "Show a scatter plot of {} for {scope}",
                attribute_phrase(&attrs[..2])
            ));
        }
        let agg = vocab::find_aggregation(utterance).unwrap_or(Aggregation::Mean);
        let per_island = if islands.len() > 1 { " per island" } else { "" };
        Ok(format!(
            "Compare the {} {}{per_island} across {scope}",
            agg_adjective(agg),
            attribute_phrase(&attrs)
        ))
    }
}

fn agg_adjective(a: Aggregation) -> &'static str {
    match a {
        Aggregation::None | Aggregation::Mean => "average",
        Aggregation::Max => "highest",
        Aggregation::Min => "lowest",
        Aggregation::Sum => "total",
    }
}

impl RefinementBackend for FallbackRefiner {
    fn rewrite(
        &self,
        _instruction: &str,
        context: &ContextDocument,
        utterance: &Utterance,
        origin: Origin,
    ) -> Result<String, RefineError> {
        match origin {
            Origin::Explicit => self.explicit(&utterance.text, context),
            Origin::Proactive => self.proactive(&utterance.text, context),
        }
    }
}

/// Refinement through a chat model.
pub struct LlmRefiner {
    client: HttpClient,
    model: String,
}

impl LlmRefiner {
    pub fn new(client: HttpClient, model: impl Into<String>) -> Self {
        LlmRefiner {
            client,
            model: model.into(),
        }
    }
}

impl RefinementBackend for LlmRefiner {
    fn rewrite(
        &self,
        instruction: &str,
        context: &ContextDocument,
        utterance: &Utterance,
        origin: Origin,
    ) -> Result<String, RefineError> {
        let user = format!(
            "History:\n{}\nUtterance ({origin}): {}",
            context.text, utterance.text
        );
        let reply = self
            .client
            .chat(&self.model, instruction, &user)
            .map_err(|e| RefineError::Backend(e.to_string()))?;
        reply
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty())
            .map(|l| l.trim_matches('"').to_string())
            .ok_or_else(|| RefineError::Backend("empty reply".into()))
    }
}

/// Refinement front end with failure policy.
///
/// Explicit requests fall back to the rule backend when the configured one
/// fails; proactive ones are dropped.
#[derive(Clone)]
pub struct Refiner {
    backend: Arc<dyn RefinementBackend>,
    fallback: FallbackRefiner,
}

impl Refiner {
    pub fn new(backend: Arc<dyn RefinementBackend>, fallback: FallbackRefiner) -> Self {
        Refiner { backend, fallback }
    }

    pub fn fallback_only(schema: DatasetSchema) -> Self {
        let fallback = FallbackRefiner::new(schema);
        Refiner {
            backend: Arc::new(fallback.clone()),
            fallback,
        }
    }

    pub fn refine(
        &self,
        utterance: &Utterance,
        origin: Origin,
        doc: &ContextDocument,
    ) -> Result<Option<RefinedQuery>, RefineError> {
        let attempt = self
            .backend
            .rewrite(REFINE_INSTRUCTION, doc, utterance, origin)
            .and_then(|t| {
                let t = t.trim().to_string();
                if t.is_empty() {
                    Err(RefineError::Backend("empty rewrite".into()))
                } else {
                    Ok(t)
                }
            });
        let text = match (attempt, origin) {
            (Ok(t), _) => t,
            (Err(err), Origin::Explicit) => {
                log::warn!("refinement failed ({err}); using rule fallback");
                self.fallback.rewrite(REFINE_INSTRUCTION, doc, utterance, origin)?
            }
            (Err(err), Origin::Proactive) => {
                log::debug!("dropping proactive refinement: {err}");
                return Ok(None);
            }
        };
        if origin == Origin::Proactive && doc.generated_keys.contains(&normalize_title(&text)) {
            return Ok(None);
        }
        Ok(Some(RefinedQuery {
            text,
            origin,
            source_utterance_id: utterance.id,
            context_digest: doc.digest(),
        }))
    }

    /// Mode gate followed by refinement.
    pub fn dispatch(
        &self,
        utterance: &Utterance,
        label: ClassLabel,
        doc: &ContextDocument,
        mode: Mode,
    ) -> Result<Option<RefinedQuery>, RefineError> {
        match gate(label, mode) {
            Some(origin) => self.refine(utterance, origin, doc),
            None => Ok(None),
        }
    }
}
