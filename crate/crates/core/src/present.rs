//! Executes a [`ChartPlan`] against the store and shapes the result into a
//! renderer-agnostic [`ChartSpec`] with a short summary.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Aggregation, Attribute, ClimateStore, DataError, DataQuery, GroupBy, RowKey, TableRow};
use crate::history::normalize_title;
use crate::llm::HttpClient;
use crate::reasoner::{attribute_phrase, ChartPlan, ChartType, DatasetSchema, Stage};
use crate::refine::Origin;

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_HISTOGRAM_BINS: usize = 30;
pub const SUMMARY_PROMPT: &str = include_str!("../prompts/summary_v1.txt");

#[derive(Debug, Error)]
pub enum PresentError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("plan returned no rows")]
    EmptyData,
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("summary backend failed: {0}")]
    Summary(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    Temporal,
    Categorical,
    Quantitative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XAxis {
    pub label: String,
    pub kind: AxisKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YAxis {
    pub label: String,
    pub units: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum XValue {
    Number(f64),
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: XValue,
    pub y: f64,
}

/// Equal-width histogram bin; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub group: String,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesData {
    Points { points: Vec<Point> },
    Bins { bins: Vec<Bin> },
    Boxes { boxes: Vec<BoxStats> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    #[serde(flatten)]
    pub data: SeriesData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub schema_version: u32,
    pub spec_id: String,
    pub chart_type: ChartType,
    pub title: String,
    pub x_axis: XAxis,
    pub y_axis: YAxis,
    pub series: Vec<Series>,
    /// Set when the fetch matched no rows; `series` is then empty.
    pub empty: bool,
    pub dedupe_key: String,
    pub origin: Origin,
    pub summary: String,
}

impl ChartSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("chart spec serializes")
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.series.iter().flat_map(|s| -> Box<dyn Iterator<Item = f64> + '_> {
            match &s.data {
                SeriesData::Points { points } => Box::new(points.iter().flat_map(|p| {
                    let x = match p.x {
                        XValue::Number(v) => Some(v),
                        XValue::Label(_) => None,
                    };
                    x.into_iter().chain(std::iter::once(p.y))
                })),
                SeriesData::Bins { bins } => Box::new(bins.iter().flat_map(|b| [b.lower, b.upper])),
                SeriesData::Boxes { boxes } => {
                    Box::new(boxes.iter().flat_map(|b| [b.min, b.q1, b.median, b.q3, b.max]))
                }
            }
        })
    }
}

/// Median of a sorted, non-empty slice.
fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Five-number summary with Tukey hinges: each half holds `ceil(n/2)`
/// values, so an odd-length median belongs to both halves.
pub fn five_number(values: &[f64]) -> Option<[f64; 5]> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let half = n.div_ceil(2);
    Some([
        v[0],
        median_sorted(&v[..half]),
        median_sorted(&v),
        median_sorted(&v[n - half..]),
        v[n - 1],
    ])
}

/// `ceil(sqrt(n))` equal-width bins, at most [`MAX_HISTOGRAM_BINS`]; a
/// constant series gets one bin.
pub fn histogram(values: &[f64]) -> Vec<Bin> {
    if values.is_empty() {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![Bin {
            lower: lo,
            upper: hi,
            count: values.len(),
        }];
    }
    let k = ((values.len() as f64).sqrt().ceil() as usize).clamp(1, MAX_HISTOGRAM_BINS);
    let width = (hi - lo) / k as f64;
    let mut counts = vec![0usize; k];
    for &v in values {
        let i = (((v - lo) / width).floor() as usize).min(k - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| Bin {
            lower: lo + width * i as f64,
            upper: if i + 1 == k { hi } else { lo + width * (i + 1) as f64 },
            count,
        })
        .collect()
}

/// Numeric station ids sort numerically, everything else lexically after.
fn group_order(label: &str) -> (u64, String) {
    (label.parse().unwrap_or(u64::MAX), label.to_string())
}

fn units_of(attrs: &[Attribute]) -> String {
    match attrs {
        [first, rest @ ..] if rest.iter().all(|a| a.units() == first.units()) => first.units().to_string(),
        _ => "mixed".to_string(),
    }
}

fn y_label(attrs: &[Attribute], agg: Aggregation) -> String {
    match agg {
        Aggregation::None => attribute_phrase(attrs),
        a => format!("{} {}", a.as_str(), attribute_phrase(attrs)),
    }
}

fn x_axis_for(group: Option<GroupBy>) -> XAxis {
    match group {
        None => XAxis {
            label: "date".into(),
            kind: AxisKind::Temporal,
        },
        Some(GroupBy::Month) => XAxis {
            label: "month".into(),
            kind: AxisKind::Temporal,
        },
        Some(g) => XAxis {
            label: g.as_str().into(),
            kind: AxisKind::Categorical,
        },
    }
}

fn points_series(rows: &[TableRow], plan: &ChartPlan) -> Vec<Series> {
    let grouped = plan.transform.group_by.is_some() || plan.transform.aggregation != Aggregation::None;
    // series key: (station order, attribute) for raw rows, attribute otherwise
    let mut series: BTreeMap<((u64, String), Attribute), Vec<(RowKey, f64)>> = BTreeMap::new();
    for row in rows {
        let station = if grouped {
            (0, String::new())
        } else {
            group_order(row.station_id.as_deref().unwrap_or(""))
        };
        series
            .entry((station, row.attribute))
            .or_default()
            .push((row.key.clone(), row.value));
    }
    let single_attr = plan.attributes.len() == 1;
    series
        .into_iter()
        .map(|(((_, station), attr), mut pts)| {
            if plan.transform.group_by == Some(GroupBy::Station) {
                pts.sort_by(|a, b| group_order(&a.0.to_string()).cmp(&group_order(&b.0.to_string())));
            }
            let name = match (grouped, single_attr) {
                (true, _) => attr.display_name().to_string(),
                (false, true) => format!("station {station}"),
                (false, false) => format!("station {station} {}", attr.display_name()),
            };
            Series {
                name,
                data: SeriesData::Points {
                    points: pts
                        .into_iter()
                        .map(|(k, y)| Point {
                            x: XValue::Label(k.to_string()),
                            y,
                        })
                        .collect(),
                },
            }
        })
        .collect()
}

fn plan_query(plan: &ChartPlan, raw: bool) -> DataQuery {
    let mut q = DataQuery::raw(
        plan.attributes.iter().copied(),
        plan.stations.iter().cloned(),
        plan.date_range,
    );
    if !raw {
        q.aggregation = plan.transform.aggregation;
        q.group_by = plan.transform.group_by;
    }
    q
}

/// Fetches and shapes the data for `plan`. The summary is left empty.
///
/// An empty fetch yields an empty-data spec for explicit requests and
/// [`PresentError::EmptyData`] for proactive ones.
pub fn render_plan(
    plan: &ChartPlan,
    store: &ClimateStore,
    origin: Origin,
    spec_id: impl Into<String>,
) -> Result<ChartSpec, PresentError> {
    if plan.attributes.len() != plan.chart_type.required_attributes() {
        return Err(PresentError::InvalidPlan(format!(
            "{} needs {} attribute(s), plan has {}",
            plan.chart_type.phrase(),
            plan.chart_type.required_attributes(),
            plan.attributes.len()
        )));
    }
    if plan.transform.filter.is_some() {
        log::debug!("ignoring transform filter on `{}`", plan.title);
    }
    let attrs = &plan.attributes;
    let agg = plan.transform.aggregation;
    let (x_axis, y_axis, series) = match plan.chart_type {
        ChartType::Line | ChartType::Bar => {
            let table = store.fetch(&plan_query(plan, false))?;
            (
                x_axis_for(plan.transform.group_by.filter(|_| agg != Aggregation::None)),
                YAxis {
                    label: y_label(attrs, agg),
                    units: units_of(attrs),
                },
                points_series(&table.rows, plan),
            )
        }
        ChartType::Scatter => {
            let table = store.fetch(&plan_query(plan, false))?;
            let (a, b) = (attrs[0], attrs[1]);
            let mut joined: BTreeMap<(Option<String>, RowKey), (Option<f64>, Option<f64>)> = BTreeMap::new();
            for row in &table.rows {
                let slot = joined.entry((row.station_id.clone(), row.key.clone())).or_default();
                if row.attribute == a {
                    slot.0 = Some(row.value);
                } else if row.attribute == b {
                    slot.1 = Some(row.value);
                }
            }
            let points: Vec<Point> = joined
                .into_values()
                .filter_map(|pair| match pair {
                    (Some(x), Some(y)) => Some(Point {
                        x: XValue::Number(x),
                        y,
                    }),
                    _ => None,
                })
                .collect();
            let series = if points.is_empty() {
                Vec::new()
            } else {
                vec![Series {
                    name: format!("{} vs {}", a.display_name(), b.display_name()),
                    data: SeriesData::Points { points },
                }]
            };
            (
                XAxis {
                    label: y_label(&[a], agg),
                    kind: AxisKind::Quantitative,
                },
                YAxis {
                    label: y_label(&[b], agg),
                    units: b.units().to_string(),
                },
                series,
            )
        }
        ChartType::Histogram => {
            let table = store.fetch(&plan_query(plan, false))?;
            let values: Vec<f64> = table.rows.iter().map(|r| r.value).collect();
            let bins = histogram(&values);
            let series = if bins.is_empty() {
                Vec::new()
            } else {
                vec![Series {
                    name: attrs[0].display_name().to_string(),
                    data: SeriesData::Bins { bins },
                }]
            };
            (
                XAxis {
                    label: format!("{} ({})", y_label(attrs, agg), attrs[0].units()),
                    kind: AxisKind::Quantitative,
                },
                YAxis {
                    label: "count".into(),
                    units: "days".into(),
                },
                series,
            )
        }
        ChartType::Boxplot => {
            let table = store.fetch(&plan_query(plan, true))?;
            let group = plan.transform.group_by.unwrap_or(GroupBy::Station);
            let mut groups: BTreeMap<(u64, String), Vec<f64>> = BTreeMap::new();
            for row in &table.rows {
                let station = row.station_id.as_deref().unwrap_or_default();
                let label = match (group, &row.key) {
                    (GroupBy::Station, _) => station.to_string(),
                    (GroupBy::Island, _) => store
                        .station(station)
                        .map(|s| s.island.to_string())
                        .unwrap_or_default(),
                    (GroupBy::Month, RowKey::Date(d)) => d.format("%Y-%m").to_string(),
                    (GroupBy::Month, RowKey::Group(g)) => g.clone(),
                };
                groups.entry(group_order(&label)).or_default().push(row.value);
            }
            let boxes: Vec<BoxStats> = groups
                .into_iter()
                .filter_map(|((_, label), values)| {
                    let [min, q1, median, q3, max] = five_number(&values)?;
                    Some(BoxStats {
                        group: label,
                        n: values.len(),
                        min,
                        q1,
                        median,
                        q3,
                        max,
                    })
                })
                .collect();
            let series = if boxes.is_empty() {
                Vec::new()
            } else {
                vec![Series {
                    name: attrs[0].display_name().to_string(),
                    data: SeriesData::Boxes { boxes },
                }]
            };
            (
                XAxis {
                    label: group.as_str().into(),
                    kind: AxisKind::Categorical,
                },
                YAxis {
                    label: attribute_phrase(attrs),
                    units: units_of(attrs),
                },
                series,
            )
        }
    };
    let empty = series.is_empty();
    if empty && origin == Origin::Proactive {
        return Err(PresentError::EmptyData);
    }
    Ok(ChartSpec {
        schema_version: SCHEMA_VERSION,
        spec_id: spec_id.into(),
        chart_type: plan.chart_type,
        title: plan.title.clone(),
        x_axis,
        y_axis,
        series,
        empty,
        dedupe_key: normalize_title(&plan.title),
        origin,
        summary: String::new(),
    })
}

/// Number of sentences, counting terminal punctuation followed by
/// whitespace or end of text.
pub fn sentence_count(text: &str) -> usize {
    let chars: Vec<char> = text.trim().chars().collect();
    let mut count = 0;
    for (i, c) in chars.iter().enumerate() {
        if matches!(c, '.' | '!' | '?') && chars.get(i + 1).is_none_or(|n| n.is_whitespace()) {
            count += 1;
        }
    }
    if count == 0 && !chars.is_empty() {
        1
    } else {
        count
    }
}

/// Keeps at most the first `n` sentences.
pub fn first_sentences(text: &str, n: usize) -> String {
    let text = text.trim();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut seen = 0;
    for (k, (i, c)) in chars.iter().enumerate() {
        if matches!(c, '.' | '!' | '?') && chars.get(k + 1).is_none_or(|(_, n)| n.is_whitespace()) {
            seen += 1;
            if seen == n {
                return text[..i + c.len_utf8()].to_string();
            }
        }
    }
    text.to_string()
}

pub trait SummaryBackend: Send + Sync {
    fn summarize(&self, plan: &ChartPlan, spec: &ChartSpec, scope: &str) -> Result<String, PresentError>;
}

/// Template summary built from the plan's reasoning map.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateSummary;

impl SummaryBackend for TemplateSummary {
    fn summarize(&self, plan: &ChartPlan, spec: &ChartSpec, scope: &str) -> Result<String, PresentError> {
        let attrs = attribute_phrase(&plan.attributes);
        if spec.empty {
            return Ok(format!("No matching data was found for {attrs} at {scope}."));
        }
        let first = format!("I created a {} of {attrs} for {scope}.", plan.chart_type.phrase());
        match plan.reasoning.get(&Stage::ChartType) {
            Some(why) if !why.trim().is_empty() => Ok(format!("{first} {}", first_sentences(why, 1))),
            _ => Ok(first),
        }
    }
}

pub struct LlmSummary {
    client: HttpClient,
    model: String,
}

impl LlmSummary {
    pub fn new(client: HttpClient, model: impl Into<String>) -> Self {
        LlmSummary {
            client,
            model: model.into(),
        }
    }
}

impl SummaryBackend for LlmSummary {
    fn summarize(&self, plan: &ChartPlan, spec: &ChartSpec, scope: &str) -> Result<String, PresentError> {
        let reasoning: Vec<String> = plan
            .reasoning
            .iter()
            .map(|(stage, why)| format!("{stage}: {why}"))
            .collect();
        let user = format!(
            "Chart: {} of {} for {scope}\nEmpty: {}\nReasoning:\n{}",
            plan.chart_type.phrase(),
            attribute_phrase(&plan.attributes),
            spec.empty,
            reasoning.join("\n")
        );
        self.client
            .chat(&self.model, SUMMARY_PROMPT, &user)
            .map_err(|e| PresentError::Summary(e.to_string()))
    }
}

/// Renders plans and attaches summaries, falling back to the template on
/// backend failure.
#[derive(Clone)]
pub struct Presenter {
    schema: DatasetSchema,
    backend: Arc<dyn SummaryBackend>,
}

impl Presenter {
    pub fn new(schema: DatasetSchema, backend: Arc<dyn SummaryBackend>) -> Self {
        Presenter { schema, backend }
    }

    pub fn with_template(schema: DatasetSchema) -> Self {
        Self::new(schema, Arc::new(TemplateSummary))
    }

    pub fn summarize(&self, plan: &ChartPlan, spec: &ChartSpec) -> String {
        let scope = self.schema.scope_phrase(&plan.stations);
        let text = match self.backend.summarize(plan, spec, &scope) {
            Ok(t) if !t.trim().is_empty() => t,
            Ok(_) => {
                log::warn!("summary backend returned nothing; using template");
                TemplateSummary.summarize(plan, spec, &scope).expect("template summary")
            }
            Err(e) => {
                log::warn!("{e}; using template summary");
                TemplateSummary.summarize(plan, spec, &scope).expect("template summary")
            }
        };
        first_sentences(&text, 2)
    }

    pub fn present(
        &self,
        plan: &ChartPlan,
        store: &ClimateStore,
        origin: Origin,
        spec_id: impl Into<String>,
    ) -> Result<ChartSpec, PresentError> {
        let mut spec = render_plan(plan, store, origin, spec_id)?;
        spec.summary = self.summarize(plan, &spec);
        Ok(spec)
    }
}
