//! Staged chart reasoning: attributes, stations and transform are resolved
//! independently, then the chart type is chosen from their outputs.
//!
//! Each stage is answered by a [`ReasonerBackend`] and must return a value
//! from that stage's closed vocabulary plus a one-sentence justification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Aggregation, Attribute, ClimateStore, DateRange, GroupBy, Island};
use crate::llm::{extract_json_object, HttpClient};
use crate::refine::RefinedQuery;
use crate::vocab::{self, Region};

pub const MAX_ATTRIBUTES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartType {
    Line,
    Bar,
    Scatter,
    Histogram,
    Boxplot,
}

impl ChartType {
    pub const ALL: [ChartType; 5] = [
        ChartType::Line,
        ChartType::Bar,
        ChartType::Scatter,
        ChartType::Histogram,
        ChartType::Boxplot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChartType::Line => "line",
            ChartType::Bar => "bar",
            ChartType::Scatter => "scatter",
            ChartType::Histogram => "histogram",
            ChartType::Boxplot => "boxplot",
        }
    }

    /// Lowercase noun phrase, e.g. "box plot".
    pub fn phrase(self) -> &'static str {
        match self {
            ChartType::Line => "line chart",
            ChartType::Bar => "bar chart",
            ChartType::Scatter => "scatter plot",
            ChartType::Histogram => "histogram",
            ChartType::Boxplot => "box plot",
        }
    }

    pub fn title_name(self) -> &'static str {
        match self {
            ChartType::Line => "Line chart",
            ChartType::Bar => "Bar chart",
            ChartType::Scatter => "Scatter plot",
            ChartType::Histogram => "Histogram",
            ChartType::Boxplot => "Box plot",
        }
    }

    /// Number of quantitative attributes the chart consumes.
    pub fn required_attributes(self) -> usize {
        match self {
            ChartType::Scatter => 2,
            _ => 1,
        }
    }

    pub fn parse(s: &str) -> Option<ChartType> {
        let key = s.trim().to_lowercase();
        ChartType::ALL
            .into_iter()
            .find(|c| c.as_str() == key || c.phrase() == key)
    }
}

impl fmt::Display for ChartType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transform {
    pub aggregation: Aggregation,
    pub group_by: Option<GroupBy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<String>,
}

impl Transform {
    pub fn none() -> Self {
        Transform {
            aggregation: Aggregation::None,
            group_by: None,
            filter: None,
        }
    }

    pub fn label(&self) -> String {
        match (self.aggregation, self.group_by) {
            (Aggregation::None, _) => "daily values".to_string(),
            (agg, Some(g)) => format!("{} per {}", agg.as_str(), g.as_str()),
            (agg, None) => format!("{} overall", agg.as_str()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Attributes,
    Stations,
    Transform,
    ChartType,
}

impl Stage {
    pub const INDEPENDENT: [Stage; 3] = [Stage::Attributes, Stage::Stations, Stage::Transform];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Attributes => "attributes",
            Stage::Stations => "stations",
            Stage::Transform => "transform",
            Stage::ChartType => "chart_type",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{stage} stage: {message}")]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
}

impl StageError {
    pub fn new(stage: Stage, message: impl Into<String>) -> Self {
        StageError {
            stage,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", content = "value", rename_all = "snake_case")]
pub enum StageValue {
    Attributes(Vec<Attribute>),
    Stations(BTreeSet<String>),
    Transform(Transform),
    ChartType(ChartType),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutput {
    pub value: StageValue,
    pub reasoning: String,
}

/// Outputs of stages already completed, visible to later stages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriorOutputs {
    pub attributes: Option<Vec<Attribute>>,
    pub stations: Option<BTreeSet<String>>,
    pub transform: Option<Transform>,
}

/// What the reasoner knows about the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSchema {
    pub attributes: Vec<Attribute>,
    pub stations: BTreeMap<String, Island>,
    pub window: DateRange,
}

impl DatasetSchema {
    pub fn from_store(store: &ClimateStore) -> Self {
        DatasetSchema {
            attributes: Attribute::ALL.to_vec(),
            stations: store.stations().map(|s| (s.id.clone(), s.island)).collect(),
            window: store.window(),
        }
    }

    pub fn all_stations(&self) -> BTreeSet<String> {
        self.stations.keys().cloned().collect()
    }

    pub fn island_stations(&self, island: Island) -> BTreeSet<String> {
        self.stations
            .iter()
            .filter(|(_, i)| **i == island)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn island_of(&self, station: &str) -> Option<Island> {
        self.stations.get(station).copied()
    }

    /// Short description of a station set used in titles ("Oahu stations").
    pub fn scope_label(&self, stations: &BTreeSet<String>) -> String {
        if let (1, Some(one)) = (stations.len(), stations.first()) {
            return format!("station {one}");
        }
        if *stations == self.all_stations() {
            return "all stations".into();
        }
        for island in Island::ALL {
            let on = self.island_stations(island);
            if !on.is_empty() && on == *stations {
                return format!("{} stations", island_phrase(island));
            }
        }
        let mut ids: Vec<&String> = stations.iter().collect();
        ids.sort_by_key(|id| (id.parse::<u64>().unwrap_or(u64::MAX), id.to_string()));
        match ids.as_slice() {
            [one] => format!("station {one}"),
            _ => format!("stations {}", join_words(&ids.iter().map(|s| s.as_str()).collect::<Vec<_>>())),
        }
    }

    /// Scope with an article where it reads better ("the Oahu stations").
    pub fn scope_phrase(&self, stations: &BTreeSet<String>) -> String {
        let label = self.scope_label(stations);
        if label.ends_with(" stations") && !label.starts_with("all ") && !label.starts_with("stations ") {
            format!("the {label}")
        } else {
            label
        }
    }
}

pub fn island_phrase(island: Island) -> &'static str {
    match island {
        Island::Hawaii => "Big Island",
        other => other.as_str(),
    }
}

/// "a", "a and b", "a, b and c".
pub fn join_words(items: &[&str]) -> String {
    match items {
        [] => String::new(),
        [one] => one.to_string(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

pub fn attribute_phrase(attrs: &[Attribute]) -> String {
    join_words(&attrs.iter().map(|a| a.display_name()).collect::<Vec<_>>())
}

/// Resolves one stage of a plan.
pub trait ReasonerBackend: Send + Sync {
    fn resolve(
        &self,
        stage: Stage,
        query: &RefinedQuery,
        schema: &DatasetSchema,
        prior: &PriorOutputs,
    ) -> Result<StageOutput, StageError>;
}

/// Deterministic keyword rules for every stage.
#[derive(Debug, Clone, Copy, Default)]
pub struct FallbackReasoner;

impl FallbackReasoner {
    fn attributes(&self, text: &str) -> Result<StageOutput, StageError> {
        let found = vocab::find_attributes(text);
        if found.is_empty() {
            return Err(StageError::new(
                Stage::Attributes,
                "no dataset attribute (rainfall, temperature, soil moisture, solar energy, wind speed) recognized",
            ));
        }
        let kept: Vec<Attribute> = found.iter().copied().take(MAX_ATTRIBUTES).collect();
        let reasoning = if found.len() > MAX_ATTRIBUTES {
            format!(
                "The query mentions {}, and I kept the first two because no chart type uses more.",
                attribute_phrase(&found)
            )
        } else {
            format!("The query asks about {}.", attribute_phrase(&kept))
        };
        Ok(StageOutput {
            value: StageValue::Attributes(kept),
            reasoning,
        })
    }

    fn stations(&self, text: &str, schema: &DatasetSchema) -> Result<StageOutput, StageError> {
        let regions = vocab::find_regions(text);
        let mut ids = BTreeSet::new();
        let mut state = regions.is_empty();
        let mut qualifying = BTreeSet::new();
        for region in &regions {
            if let Region::Station(id) = region {
                let island = schema.island_of(id).ok_or_else(|| {
                    StageError::new(Stage::Stations, format!("station {id} is not in the dataset"))
                })?;
                qualifying.insert(island);
                ids.insert(id.clone());
            }
        }
        for region in &regions {
            match region {
                Region::Station(_) => {}
                // "station 4 on Oahu": the island only qualifies the station
                Region::Island(island) if qualifying.contains(island) => {}
                Region::Island(island) => ids.extend(schema.island_stations(*island)),
                Region::State => state = true,
            }
        }
        // a named station or island narrows a statewide mention
        if ids.is_empty() && state {
            ids = schema.all_stations();
        }
        if ids.is_empty() {
            return Err(StageError::new(Stage::Stations, "no stations match the query"));
        }
        let scope = schema.scope_phrase(&ids);
        let reasoning = if regions.is_empty() {
            format!("No location was mentioned, so I used all {} stations.", ids.len())
        } else {
            format!("The query refers to {scope}.")
        };
        Ok(StageOutput {
            value: StageValue::Stations(ids),
            reasoning,
        })
    }

    fn transform(&self, text: &str) -> StageOutput {
        let agg = vocab::find_aggregation(text);
        let mut group = vocab::find_group_by(text);
        if group.is_none() && agg.is_some() {
            group = Some(GroupBy::Station);
        }
        if group.is_none() && vocab::has_comparison_intent(text) && vocab::find_attributes(text).len() < 2 {
            group = Some(GroupBy::Station);
        }
        let aggregation = match (agg, group) {
            (Some(a), _) => a,
            (None, Some(_)) => Aggregation::Mean,
            (None, None) => Aggregation::None,
        };
        let transform = Transform {
            aggregation,
            group_by: if aggregation == Aggregation::None { None } else { group },
            filter: None,
        };
        let reasoning = match (agg, transform.group_by) {
            (_, None) => "No aggregation was requested, so I kept the raw daily values.".to_string(),
            (Some(a), Some(g)) => format!("The query asks for the {} value per {}.", agg_word(a), g.as_str()),
            (None, Some(g)) => format!(
                "The query compares groups without naming a statistic, so I used the mean per {}.",
                g.as_str()
            ),
        };
        StageOutput {
            value: StageValue::Transform(transform),
            reasoning,
        }
    }

    fn chart_type(&self, text: &str, prior: &PriorOutputs) -> Result<StageOutput, StageError> {
        let attrs = prior
            .attributes
            .as_ref()
            .ok_or_else(|| StageError::new(Stage::ChartType, "attribute stage has not run"))?;
        let transform = prior
            .transform
            .as_ref()
            .ok_or_else(|| StageError::new(Stage::ChartType, "transform stage has not run"))?;
        let chart = if let Some(requested) = vocab::explicit_chart_type(text) {
            if requested.required_attributes() != attrs.len() {
                return Err(StageError::new(
                    Stage::ChartType,
                    format!(
                        "a {} requires exactly {} attribute{} but the query has {}",
                        requested.phrase(),
                        requested.required_attributes(),
                        if requested.required_attributes() == 1 { "" } else { "s" },
                        attrs.len()
                    ),
                ));
            }
            requested
        } else if attrs.len() == 2 {
            ChartType::Scatter
        } else if vocab::has_distribution_intent(text) {
            ChartType::Histogram
        } else if vocab::has_spread_intent(text) {
            ChartType::Boxplot
        } else if transform.aggregation != Aggregation::None {
            ChartType::Bar
        } else {
            ChartType::Line
        };
        let reasoning = chart_reasoning(chart, attrs, transform);
        Ok(StageOutput {
            value: StageValue::ChartType(chart),
            reasoning,
        })
    }
}

fn agg_word(a: Aggregation) -> &'static str {
    match a {
        Aggregation::None => "raw",
        Aggregation::Mean => "average",
        Aggregation::Min => "lowest",
        Aggregation::Max => "highest",
        Aggregation::Sum => "total",
    }
}

fn chart_reasoning(chart: ChartType, attrs: &[Attribute], transform: &Transform) -> String {
    let first = attrs.first().map(|a| a.display_name()).unwrap_or("the data");
    match chart {
        ChartType::Line => "I chose a line chart to show change over the full date range.".into(),
        ChartType::Bar => format!(
            "I chose a bar chart to compare the {} {first} for each {}.",
            agg_word(transform.aggregation),
            transform.group_by.unwrap_or(GroupBy::Station).as_str()
        ),
        ChartType::Scatter => format!(
            "I chose a scatter plot to show how {first} relates to {}.",
            attrs.get(1).map(|a| a.display_name()).unwrap_or("the second attribute")
        ),
        ChartType::Histogram => format!("I chose a histogram to show how {first} values are distributed."),
        ChartType::Boxplot => format!(
            "I chose a box plot to show the spread of {first} for each {}.",
            transform.group_by.unwrap_or(GroupBy::Station).as_str()
        ),
    }
}

impl ReasonerBackend for FallbackReasoner {
    fn resolve(
        &self,
        stage: Stage,
        query: &RefinedQuery,
        schema: &DatasetSchema,
        prior: &PriorOutputs,
    ) -> Result<StageOutput, StageError> {
        let text = &query.text;
        match stage {
            Stage::Attributes => self.attributes(text),
            Stage::Stations => self.stations(text, schema),
            Stage::Transform => Ok(self.transform(text)),
            Stage::ChartType => self.chart_type(text, prior),
        }
    }
}

const STAGE_PROMPT: &str = include_str!("../prompts/reasoner_stage_v1.txt");

/// One stage answered by a chat model returning `{"value": ..., "reasoning": ...}`.
pub struct LlmReasoner {
    client: HttpClient,
    model: String,
}

impl LlmReasoner {
    pub fn new(client: HttpClient, model: impl Into<String>) -> Self {
        LlmReasoner {
            client,
            model: model.into(),
        }
    }

    fn task(stage: Stage) -> &'static str {
        match stage {
            Stage::Attributes => "Extract the one or two dataset attributes the query needs. value: array of attribute names.",
            Stage::Stations => "Select the station ids that fit the query (all stations if no place is named). value: array of station id strings.",
            Stage::Transform => "Choose the aggregation and grouping. value: {\"aggregation\": none|mean|min|max|sum, \"group_by\": null|station|island|month}.",
            Stage::ChartType => "Choose the best chart type given the prior outputs; scatter needs exactly two attributes, every other type exactly one. value: one of line, bar, scatter, histogram, boxplot.",
        }
    }
}

pub fn parse_stage_value(stage: Stage, value: &serde_json::Value) -> Result<StageValue, StageError> {
    let bad = |m: &str| StageError::new(stage, format!("backend returned {m}: {value}"));
    match stage {
        Stage::Attributes => {
            let items = value.as_array().ok_or_else(|| bad("a non-array"))?;
            let mut attrs = Vec::new();
            for item in items {
                let a: Attribute = item
                    .as_str()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("an unknown attribute"))?;
                if !attrs.contains(&a) {
                    attrs.push(a);
                }
            }
            Ok(StageValue::Attributes(attrs))
        }
        Stage::Stations => {
            let items = value.as_array().ok_or_else(|| bad("a non-array"))?;
            items
                .iter()
                .map(|i| match i {
                    serde_json::Value::String(s) => Ok(s.clone()),
                    serde_json::Value::Number(n) => Ok(n.to_string()),
                    _ => Err(bad("a non-string station id")),
                })
                .collect::<Result<BTreeSet<_>, _>>()
                .map(StageValue::Stations)
        }
        Stage::Transform => serde_json::from_value::<Transform>(value.clone())
            .map(StageValue::Transform)
            .map_err(|_| bad("an invalid transform")),
        Stage::ChartType => value
            .as_str()
            .and_then(ChartType::parse)
            .map(StageValue::ChartType)
            .ok_or_else(|| bad("an unknown chart type")),
    }
}

impl ReasonerBackend for LlmReasoner {
    fn resolve(
        &self,
        stage: Stage,
        query: &RefinedQuery,
        schema: &DatasetSchema,
        prior: &PriorOutputs,
    ) -> Result<StageOutput, StageError> {
        let stations: Vec<String> = schema
            .stations
            .iter()
            .map(|(id, island)| format!("{id} ({island})"))
            .collect();
        let user = format!(
            "Task: {}\nQuery: {}\nAttributes: {}\nStations: {}\nPrior outputs: attributes={:?} stations={:?} transform={:?}",
            Self::task(stage),
            query.text,
            schema.attributes.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(", "),
            stations.join(", "),
            prior.attributes,
            prior.stations,
            prior.transform,
        );
        let reply = self
            .client
            .chat(&self.model, STAGE_PROMPT, &user)
            .map_err(|e| StageError::new(stage, e.to_string()))?;
        let json = extract_json_object(&reply)
            .ok_or_else(|| StageError::new(stage, "reply contained no JSON object"))?;
        let value = parse_stage_value(stage, &json["value"])?;
        let reasoning = json["reasoning"]
            .as_str()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| StageError::new(stage, "reply is missing reasoning"))?
            .to_string();
        Ok(StageOutput { value, reasoning })
    }
}

/// Tries `primary`, then `fallback` when the primary errors.
pub struct WithFallback {
    pub primary: Arc<dyn ReasonerBackend>,
    pub fallback: Arc<dyn ReasonerBackend>,
}

impl ReasonerBackend for WithFallback {
    fn resolve(
        &self,
        stage: Stage,
        query: &RefinedQuery,
        schema: &DatasetSchema,
        prior: &PriorOutputs,
    ) -> Result<StageOutput, StageError> {
        self.primary
            .resolve(stage, query, schema, prior)
            .and_then(|out| validate_stage(stage, &out, schema, prior).map(|_| out))
            .or_else(|err| {
                log::warn!("{err}; using fallback rules");
                self.fallback.resolve(stage, query, schema, prior)
            })
    }
}

/// Per-stage backend assignment.
#[derive(Clone)]
pub struct StageBackends {
    pub attributes: Arc<dyn ReasonerBackend>,
    pub stations: Arc<dyn ReasonerBackend>,
    pub transform: Arc<dyn ReasonerBackend>,
    pub chart_type: Arc<dyn ReasonerBackend>,
}

impl Default for StageBackends {
    fn default() -> Self {
        let fb: Arc<dyn ReasonerBackend> = Arc::new(FallbackReasoner);
        StageBackends {
            attributes: fb.clone(),
            stations: fb.clone(),
            transform: fb.clone(),
            chart_type: fb,
        }
    }
}

impl StageBackends {
    pub fn get(&self, stage: Stage) -> &Arc<dyn ReasonerBackend> {
        match stage {
            Stage::Attributes => &self.attributes,
            Stage::Stations => &self.stations,
            Stage::Transform => &self.transform,
            Stage::ChartType => &self.chart_type,
        }
    }
}

fn validate_stage(
    stage: Stage,
    out: &StageOutput,
    schema: &DatasetSchema,
    prior: &PriorOutputs,
) -> Result<(), StageError> {
    let err = |m: String| Err(StageError::new(stage, m));
    if out.reasoning.trim().is_empty() {
        return err("empty reasoning".into());
    }
    match (stage, &out.value) {
        (Stage::Attributes, StageValue::Attributes(a)) => {
            if a.is_empty() || a.len() > MAX_ATTRIBUTES {
                return err(format!("expected 1 to {MAX_ATTRIBUTES} attributes, got {}", a.len()));
            }
            if let Some(bad) = a.iter().find(|x| !schema.attributes.contains(x)) {
                return err(format!("attribute {bad} not in schema"));
            }
        }
        (Stage::Stations, StageValue::Stations(s)) => {
            if s.is_empty() {
                return err("empty station set".into());
            }
            if let Some(bad) = s.iter().find(|id| !schema.stations.contains_key(*id)) {
                return err(format!("station {bad} is not in the dataset"));
            }
        }
        (Stage::Transform, StageValue::Transform(t)) => {
            if t.aggregation == Aggregation::None && t.group_by.is_some() {
                return err("group_by requires an aggregation".into());
            }
        }
        (Stage::ChartType, StageValue::ChartType(c)) => {
            let n = prior.attributes.as_ref().map_or(0, Vec::len);
            if c.required_attributes() != n {
                return err(format!(
                    "a {} requires exactly {} attribute(s) but {} were extracted",
                    c.phrase(),
                    c.required_attributes(),
                    n
                ));
            }
        }
        _ => return err(format!("value {:?} does not belong to this stage", out.value)),
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPlan {
    pub attributes: Vec<Attribute>,
    pub stations: BTreeSet<String>,
    pub date_range: DateRange,
    pub transform: Transform,
    pub chart_type: ChartType,
    pub reasoning: BTreeMap<Stage, String>,
    pub title: String,
}

/// `"<Chart type> of <attributes> — <scope> — <transform>"`.
pub fn plan_title(
    chart: ChartType,
    attrs: &[Attribute],
    scope_label: &str,
    transform: &Transform,
) -> String {
    format!(
        "{} of {} — {} — {}",
        chart.title_name(),
        attribute_phrase(attrs),
        scope_label,
        transform.label()
    )
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReasonerError {
    #[error(transparent)]
    Stage(#[from] StageError),
}

impl ReasonerError {
    pub fn stage(&self) -> Stage {
        match self {
            ReasonerError::Stage(e) => e.stage,
        }
    }
}

#[derive(Clone)]
pub struct Reasoner {
    schema: DatasetSchema,
    backends: StageBackends,
}

impl Reasoner {
    pub fn new(schema: DatasetSchema, backends: StageBackends) -> Self {
        Reasoner { schema, backends }
    }

    pub fn with_fallback(store: &ClimateStore) -> Self {
        Self::new(DatasetSchema::from_store(store), StageBackends::default())
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    fn run_stage(&self, stage: Stage, query: &RefinedQuery, prior: &PriorOutputs) -> Result<StageOutput, StageError> {
        let out = self.backends.get(stage).resolve(stage, query, &self.schema, prior)?;
        validate_stage(stage, &out, &self.schema, prior)?;
        Ok(out)
    }

    /// Runs the independent stages in the given order, each seeing the
    /// outputs of those before it, then selects the chart type.
    pub fn plan_in_order(&self, query: &RefinedQuery, order: [Stage; 3]) -> Result<ChartPlan, ReasonerError> {
        let mut prior = PriorOutputs::default();
        let mut reasoning = BTreeMap::new();
        for stage in order {
            assert!(stage != Stage::ChartType, "chart type selection must run last");
            let out = self.run_stage(stage, query, &prior)?;
            absorb(&mut prior, out.value);
            reasoning.insert(stage, out.reasoning);
        }
        self.finish(query, prior, reasoning)
    }

    /// Runs the independent stages concurrently, then selects the chart type.
    pub fn plan(&self, query: &RefinedQuery) -> Result<ChartPlan, ReasonerError> {
        let empty = PriorOutputs::default();
        let results: Vec<(Stage, Result<StageOutput, StageError>)> = std::thread::scope(|s| {
            let handles: Vec<_> = Stage::INDEPENDENT
                .into_iter()
                .map(|stage| {
                    let empty = &empty;
                    (stage, s.spawn(move || self.run_stage(stage, query, empty)))
                })
                .collect();
            handles
                .into_iter()
                .map(|(stage, h)| (stage, h.join().expect("stage thread panicked")))
                .collect()
        });
        let mut prior = PriorOutputs::default();
        let mut reasoning = BTreeMap::new();
        for (stage, result) in results {
            let out = result?;
            absorb(&mut prior, out.value);
            reasoning.insert(stage, out.reasoning);
        }
        self.finish(query, prior, reasoning)
    }

    fn finish(
        &self,
        query: &RefinedQuery,
        prior: PriorOutputs,
        mut reasoning: BTreeMap<Stage, String>,
    ) -> Result<ChartPlan, ReasonerError> {
        let out = self.run_stage(Stage::ChartType, query, &prior)?;
        let StageValue::ChartType(chart_type) = out.value else {
            unreachable!("validated stage value")
        };
        reasoning.insert(Stage::ChartType, out.reasoning);
        let attributes = prior.attributes.expect("attribute stage ran");
        let stations = prior.stations.expect("station stage ran");
        let transform = prior.transform.expect("transform stage ran");
        let title = plan_title(chart_type, &attributes, &self.schema.scope_label(&stations), &transform);
        Ok(ChartPlan {
            attributes,
            stations,
            date_range: self.schema.window,
            transform,
            chart_type,
            reasoning,
            title,
        })
    }
}

fn absorb(prior: &mut PriorOutputs, value: StageValue) {
    match value {
        StageValue::Attributes(a) => prior.attributes = Some(a),
        StageValue::Stations(s) => prior.stations = Some(s),
        StageValue::Transform(t) => prior.transform = Some(t),
        StageValue::ChartType(_) => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refine::Origin;

    fn schema() -> DatasetSchema {
        let mut stations = BTreeMap::new();
        for (id, island) in [
            ("1", Island::Kauai),
            ("2", Island::Kauai),
            ("4", Island::Oahu),
            ("5", Island::Oahu),
            ("7", Island::Molokai),
            ("8", Island::Maui),
            ("18", Island::Hawaii),
            ("19", Island::Hawaii),
        ] {
            stations.insert(id.to_string(), island);
        }
        DatasetSchema {
            attributes: Attribute::ALL.to_vec(),
            stations,
            window: DateRange::default_window(),
        }
    }

    fn q(text: &str) -> RefinedQuery {
        RefinedQuery {
            text: text.into(),
            origin: Origin::Explicit,
            source_utterance_id: 1,
            context_digest: String::new(),
        }
    }

    fn reasoner() -> Reasoner {
        Reasoner::new(schema(), StageBackends::default())
    }

    #[test]
    fn attribute_stage() {
        let fb = FallbackReasoner;
        let out = fb.attributes("graph of the air temperature on Oahu").unwrap();
        assert_eq!(out.value, StageValue::Attributes(vec![Attribute::Temperature]));
        let out = fb.attributes("rainfall versus wind speed").unwrap();
        assert_eq!(out.value, StageValue::Attributes(vec![Attribute::Rainfall, Attribute::WindSpeed]));
        let out = fb.attributes("rain, wind and sun").unwrap();
        assert_eq!(out.value, StageValue::Attributes(vec![Attribute::Rainfall, Attribute::WindSpeed]));
        assert!(out.reasoning.contains("first two"));
        let err = fb.attributes("show me the vibes").unwrap_err();
        assert_eq!(err.stage, Stage::Attributes);
    }

    #[test]
    fn station_stage() {
        let fb = FallbackReasoner;
        let s = schema();
        let out = fb.stations("for the Big Island", &s).unwrap();
        assert_eq!(out.value, StageValue::Stations(["18".into(), "19".into()].into()));
        let out = fb.stations("rainfall over time", &s).unwrap();
        assert_eq!(out.value, StageValue::Stations(s.all_stations()));
        let out = fb.stations("station 4", &s).unwrap();
        assert_eq!(out.value, StageValue::Stations(["4".into()].into()));
        let err = fb.stations("station 99", &s).unwrap_err();
        assert!(err.message.contains("99"));
        let out = fb.stations("highest rainfall in Hawaii", &s).unwrap();
        assert_eq!(out.value, StageValue::Stations(s.all_stations()));
    }

    #[test]
    fn transform_stage() {
        let fb = FallbackReasoner;
        let t = |text: &str| match fb.transform(text).value {
            StageValue::Transform(t) => t,
            _ => unreachable!(),
        };
        let x = t("highest recorded rainfall measurement in Hawaii");
        assert_eq!((x.aggregation, x.group_by), (Aggregation::Max, Some(GroupBy::Station)));
        let x = t("rainfall over time for station 4");
        assert_eq!((x.aggregation, x.group_by), (Aggregation::None, None));
        let x = t("average temperature per island");
        assert_eq!((x.aggregation, x.group_by), (Aggregation::Mean, Some(GroupBy::Island)));
        let x = t("rainfall by month");
        assert_eq!((x.aggregation, x.group_by), (Aggregation::Mean, Some(GroupBy::Month)));
    }

    #[test]
    fn chart_type_rules() {
        let r = reasoner();
        assert_eq!(r.plan(&q("rainfall and temperature")).unwrap().chart_type, ChartType::Scatter);
        assert_eq!(r.plan(&q("rainfall")).unwrap().chart_type, ChartType::Line);
        assert_eq!(r.plan(&q("show rainfall as a box plot")).unwrap().chart_type, ChartType::Boxplot);
        assert_eq!(r.plan(&q("the distribution of wind")).unwrap().chart_type, ChartType::Histogram);
        assert_eq!(r.plan(&q("variability of solar energy")).unwrap().chart_type, ChartType::Boxplot);
        assert_eq!(r.plan(&q("total rainfall per island")).unwrap().chart_type, ChartType::Bar);
        let err = r.plan(&q("a scatter plot of rainfall")).unwrap_err();
        assert_eq!(err.stage(), Stage::ChartType);
        assert!(err.to_string().contains("exactly 2 attributes"), "{err}");
    }

    #[test]
    fn full_plan_and_title() {
        let r = reasoner();
        let p = r.plan(&q("Show a line chart of rainfall for station 4 on Oahu")).unwrap();
        assert_eq!(p.attributes, vec![Attribute::Rainfall]);
        assert_eq!(p.stations, ["4".to_string()].into());
        assert_eq!(p.transform, Transform::none());
        assert_eq!(p.chart_type, ChartType::Line);
        assert_eq!(p.date_range, DateRange::default_window());
        assert_eq!(p.reasoning.len(), 4);
        let again = r.plan(&q("Show a line chart of rainfall for station 4 on Oahu")).unwrap();
        assert_eq!(p.title, again.title);

        let p = r.plan(&q("Show a line chart of rainfall for station 4")).unwrap();
        assert_eq!(p.stations, ["4".to_string()].into());
        assert_eq!(p.title, "Line chart of rainfall — station 4 — daily values");
    }

    #[test]
    fn scope_labels() {
        let s = schema();
        assert_eq!(s.scope_label(&s.all_stations()), "all stations");
        assert_eq!(s.scope_label(&s.island_stations(Island::Oahu)), "Oahu stations");
        assert_eq!(s.scope_phrase(&s.island_stations(Island::Hawaii)), "the Big Island stations");
        assert_eq!(s.scope_label(&["4".into(), "18".into(), "8".into()].into()), "stations 4, 8 and 18");
    }

    #[test]
    fn stage_value_parsing() {
        let v = parse_stage_value(Stage::Attributes, &serde_json::json!(["rainfall", "solar"])).unwrap();
        assert_eq!(v, StageValue::Attributes(vec![Attribute::Rainfall, Attribute::Solar]));
        assert!(parse_stage_value(Stage::Attributes, &serde_json::json!(["humidity"])).is_err());
        let v = parse_stage_value(Stage::Stations, &serde_json::json!(["4", 5])).unwrap();
        assert_eq!(v, StageValue::Stations(["4".into(), "5".into()].into()));
        let v = parse_stage_value(
            Stage::Transform,
            &serde_json::json!({"aggregation": "max", "group_by": "station"}),
        )
        .unwrap();
        assert_eq!(
            v,
            StageValue::Transform(Transform {
                aggregation: Aggregation::Max,
                group_by: Some(GroupBy::Station),
                filter: None
            })
        );
        assert_eq!(
            parse_stage_value(Stage::ChartType, &serde_json::json!("box plot")).unwrap(),
            StageValue::ChartType(ChartType::Boxplot)
        );
    }

    struct Bogus;
    impl ReasonerBackend for Bogus {
        fn resolve(&self, stage: Stage, _: &RefinedQuery, _: &DatasetSchema, _: &PriorOutputs) -> Result<StageOutput, StageError> {
            Ok(StageOutput {
                value: StageValue::Stations(["999".to_string()].into()),
                reasoning: format!("made up for {stage}"),
            })
        }
    }

    #[test]
    fn closed_vocabulary_enforced_and_fallback_wrapper() {
        let mut backends = StageBackends::default();
        backends.stations = Arc::new(Bogus);
        let r = Reasoner::new(schema(), backends.clone());
        let err = r.plan(&q("rainfall on Oahu")).unwrap_err();
        assert_eq!(err.stage(), Stage::Stations);

        backends.stations = Arc::new(WithFallback {
            primary: Arc::new(Bogus),
            fallback: Arc::new(FallbackReasoner),
        });
        let r = Reasoner::new(schema(), backends);
        let p = r.plan(&q("rainfall on Oahu")).unwrap();
        assert_eq!(p.stations, schema().island_stations(Island::Oahu));
    }
}
