use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::history::{ClassLabel, ContextDocument};
use crate::present::ChartSpec;
use crate::reasoner::ChartPlan;
use crate::refine::{Mode, Origin, RefinedQuery};
use crate::segment::Utterance;

/// One entry of the append-only session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    /// Session time in seconds.
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<String>,
    #[serde(flatten)]
    pub event: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    SessionStart(SessionStartRecord),
    Utterance(Utterance),
    Classification(ClassificationRecord),
    RefinedQuery(RefinedQueryRecord),
    Plan(PlanRecord),
    ChartGenerated(ChartGeneratedRecord),
    ChartSelected(SelectionRecord),
    ChartDeleted(DeletionRecord),
    LayoutChanged(LayoutRecord),
    Suppression(SuppressionRecord),
    Error(ErrorRecord),
    SessionEnd(SessionEndRecord),
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::SessionStart(_) => "session_start",
            EventKind::Utterance(_) => "utterance",
            EventKind::Classification(_) => "classification",
            EventKind::RefinedQuery(_) => "refined_query",
            EventKind::Plan(_) => "plan",
            EventKind::ChartGenerated(_) => "chart_generated",
            EventKind::ChartSelected(_) => "chart_selected",
            EventKind::ChartDeleted(_) => "chart_deleted",
            EventKind::LayoutChanged(_) => "layout_changed",
            EventKind::Suppression(_) => "suppression",
            EventKind::Error(_) => "error",
            EventKind::SessionEnd(_) => "session_end",
        }
    }

    /// Origin of the request an event belongs to, if it belongs to one.
    pub fn origin(&self) -> Option<Origin> {
        match self {
            EventKind::RefinedQuery(r) => Some(r.query.origin),
            EventKind::Plan(p) => Some(p.origin),
            EventKind::ChartGenerated(c) => Some(c.spec.origin),
            EventKind::ChartSelected(s) => Some(s.origin),
            EventKind::ChartDeleted(d) => Some(d.origin),
            EventKind::LayoutChanged(l) => Some(l.origin),
            EventKind::Suppression(s) => Some(s.origin),
            EventKind::Error(e) => e.origin,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStartRecord {
    pub mode: Mode,
    pub persona: String,
    pub seed: u64,
    pub pause_threshold: f64,
    pub proactive_throttle: f64,
    pub conveyor_capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub utterance_id: u64,
    pub label: ClassLabel,
    /// In classifier class order; absent for gold labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedQueryRecord {
    pub query: RefinedQuery,
    pub context: ContextDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub utterance_id: u64,
    pub origin: Origin,
    pub plan: ChartPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartGeneratedRecord {
    pub utterance_id: u64,
    pub spec: ChartSpec,
    /// Belt contents after the insertion, oldest first.
    pub conveyor: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evicted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub spec_id: String,
    pub title: String,
    pub origin: Origin,
    /// True when the chart was already in the workspace.
    pub repeated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionRecord {
    pub spec_id: String,
    pub title: String,
    pub origin: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutRecord {
    pub spec_id: String,
    pub origin: Origin,
    pub placement: Placement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuppressionReason {
    /// The plan's title matches a recently generated or selected chart.
    Duplicate,
    /// A proactive chart was generated less than the throttle interval ago.
    Throttle,
    /// No self-contained request could be derived.
    NoRefinement,
    /// The plan matched no rows.
    EmptyData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppressionRecord {
    pub utterance_id: u64,
    pub origin: Origin,
    pub reason: SuppressionReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub stage: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Origin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEndRecord {
    pub utterances: u64,
    pub charts_generated: u64,
}

impl SessionEvent {
    pub fn kind(&self) -> &'static str {
        self.event.name()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("session events serialize")
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("session events serialize")
    }
}

/// Parses a JSON-lines event log.
pub fn parse_log(text: &str) -> Result<Vec<SessionEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

pub fn write_log(events: &[SessionEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_json_line());
        out.push('\n');
    }
    out
}

fn strip_keys(value: &mut Value, keys: &[&str]) {
    match value {
        Value::Object(map) => {
            for k in keys {
                map.remove(*k);
            }
            for v in map.values_mut() {
                strip_keys(v, keys);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|v| strip_keys(v, keys)),
        _ => {}
    }
}

/// The log with wall-clock times and spec ids removed, for run-to-run
/// comparison.
pub fn comparable(events: &[SessionEvent]) -> Vec<Value> {
    events
        .iter()
        .map(|e| {
            let mut v = e.to_value();
            strip_keys(&mut v, &["wall_time", "spec_id", "conveyor", "evicted"]);
            v
        })
        .collect()
}

/// The explicit-request view of a log: utterances, classifications and
/// every event of explicit origin, without numbering, clock, ids, belt
/// contents or history snapshots (which see proactive charts in P mode).
pub fn explicit_projection(events: &[SessionEvent]) -> Vec<Value> {
    events
        .iter()
        .filter(|e| match &e.event {
            EventKind::Utterance(_) | EventKind::Classification(_) => true,
            other => other.origin() == Some(Origin::Explicit),
        })
        .map(|e| {
            let mut v = e.to_value();
            strip_keys(
                &mut v,
                &["seq", "wall_time", "spec_id", "conveyor", "evicted", "context", "context_digest"],
            );
            v
        })
        .collect()
}
