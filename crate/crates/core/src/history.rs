//! Bounded conversational and chart-interaction context.

use std::collections::VecDeque;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::segment::Utterance;

pub const DIALOGUE_WINDOW: usize = 5;
pub const CHART_WINDOW: usize = 5;

/// Three-way utterance class. Serialized as the variant name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    ExplicitQuery,
    ProactiveOpportunity,
    NonQuery,
}

impl ClassLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::ExplicitQuery => "ExplicitQuery",
            ClassLabel::ProactiveOpportunity => "ProactiveOpportunity",
            ClassLabel::NonQuery => "NonQuery",
        }
    }

    pub fn parse(s: &str) -> Option<ClassLabel> {
        [
            ClassLabel::ExplicitQuery,
            ClassLabel::ProactiveOpportunity,
            ClassLabel::NonQuery,
        ]
        .into_iter()
        .find(|l| l.as_str() == s)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lowercases, drops punctuation and collapses whitespace.
pub fn normalize_title(title: &str) -> String {
    title
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartEventKind {
    Generated,
    Selected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartEvent {
    pub kind: ChartEventKind,
    pub chart_title: String,
    pub dedupe_key: String,
    pub timestamp: f64,
}

impl ChartEvent {
    pub fn new(kind: ChartEventKind, chart_title: impl Into<String>, timestamp: f64) -> Self {
        let chart_title = chart_title.into();
        ChartEvent {
            kind,
            dedupe_key: normalize_title(&chart_title),
            chart_title,
            timestamp,
        }
    }
}

/// Fixed-capacity FIFO keeping the most recent items in arrival order.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<T> {
    items: VecDeque<T>,
    capacity: usize,
}

impl<T> Window<T> {
    pub fn new(capacity: usize) -> Self {
        Window {
            items: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn newest(&self) -> Option<&T> {
        self.items.back()
    }

    /// Oldest first.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &T> + ExactSizeIterator {
        self.items.iter()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextHistory {
    dialogue: Window<Utterance>,
    generated: Window<ChartEvent>,
    selected: Window<ChartEvent>,
    last_selected: Option<ChartEvent>,
}

impl Default for ContextHistory {
    fn default() -> Self {
        ContextHistory {
            dialogue: Window::new(DIALOGUE_WINDOW),
            generated: Window::new(CHART_WINDOW),
            selected: Window::new(CHART_WINDOW),
            last_selected: None,
        }
    }
}

impl ContextHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_utterance(&mut self, utterance: Utterance) {
        debug_assert!(!utterance.text.trim().is_empty());
        self.dialogue.push(utterance);
    }

    pub fn record_chart(&mut self, event: ChartEvent) {
        match event.kind {
            ChartEventKind::Generated => self.generated.push(event),
            ChartEventKind::Selected => {
                self.last_selected = Some(event.clone());
                self.selected.push(event);
            }
        }
    }

    pub fn dialogue(&self) -> &Window<Utterance> {
        &self.dialogue
    }

    pub fn generated(&self) -> &Window<ChartEvent> {
        &self.generated
    }

    pub fn selected(&self) -> &Window<ChartEvent> {
        &self.selected
    }

    pub fn last_selected(&self) -> Option<&ChartEvent> {
        self.last_selected.as_ref()
    }

    /// True if the normalized title is in the generated or selected window.
    pub fn contains_chart(&self, title: &str) -> bool {
        let key = normalize_title(title);
        self.generated
            .iter()
            .chain(self.selected.iter())
            .any(|e| e.dedupe_key == key)
    }

    pub fn snapshot(&self) -> ContextDocument {
        ContextDocument::from_history(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueLine {
    pub id: u64,
    pub speaker: String,
    pub text: String,
}

/// Immutable rendering of a [`ContextHistory`] for prompts and logs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextDocument {
    /// Oldest first.
    pub dialogue: Vec<DialogueLine>,
    pub generated: Vec<String>,
    pub generated_keys: Vec<String>,
    pub selected: Vec<String>,
    pub last_selected: Option<String>,
    pub text: String,
}

impl ContextDocument {
    fn from_history(h: &ContextHistory) -> Self {
        let dialogue: Vec<DialogueLine> = h
            .dialogue
            .iter()
            .map(|u| DialogueLine {
                id: u.id,
                speaker: u.speaker.clone(),
                text: u.text.clone(),
            })
            .collect();
        let generated: Vec<String> = h.generated.iter().map(|e| e.chart_title.clone()).collect();
        let generated_keys = h.generated.iter().map(|e| e.dedupe_key.clone()).collect();
        let selected: Vec<String> = h.selected.iter().map(|e| e.chart_title.clone()).collect();
        let last_selected = h.last_selected.as_ref().map(|e| e.chart_title.clone());

        let mut text = String::new();
        text.push_str("dialogue:\n");
        for line in &dialogue {
            let _ = writeln!(text, "  [{}] {}: {}", line.id, line.speaker, line.text);
        }
        text.push_str("generated_charts:\n");
        for title in &generated {
            let _ = writeln!(text, "  - {title}");
        }
        text.push_str("selected_charts:\n");
        for title in &selected {
            let _ = writeln!(text, "  - {title}");
        }
        let _ = writeln!(
            text,
            "last_selected: {}",
            last_selected.as_deref().unwrap_or("none")
        );

        ContextDocument {
            dialogue,
            generated,
            generated_keys,
            selected,
            last_selected,
            text,
        }
    }

    /// Hex SHA-256 of the rendered text.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.text.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for ContextDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}
