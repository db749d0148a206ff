//! Silence-gap segmentation of speech events into utterances.
//!
//! Events arrive pre-detected (start/end of voiced audio) per speaker
//! channel. Consecutive events separated by less than the pause threshold
//! belong to the same utterance; a gap of at least the threshold closes it.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::history::ClassLabel;

pub const DEFAULT_PAUSE_THRESHOLD: f64 = 1.5;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentError {
    #[error("events out of order on channel {speaker}: [{prev_start}, {prev_end}] then [{start}, {end}]")]
    OutOfOrder {
        speaker: String,
        prev_start: f64,
        prev_end: f64,
        start: f64,
        end: f64,
    },
    #[error("invalid event on channel {speaker}: end {end} must be after start {start}")]
    InvalidEvent { speaker: String, start: f64, end: f64 },
}

#[derive(Debug, Error)]
pub enum ReplayParseError {
    #[error("transcript line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("failed to read transcript: {0}")]
    Io(#[from] std::io::Error),
}

/// Audio payload carried by an event. Replay and text clients use `Text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Text(String),
    AudioRef(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioEvent {
    pub speaker: String,
    pub start: f64,
    pub end: f64,
    pub payload: Payload,
}

impl AudioEvent {
    pub fn text(speaker: impl Into<String>, start: f64, end: f64, text: impl Into<String>) -> Self {
        AudioEvent {
            speaker: speaker.into(),
            start,
            end,
            payload: Payload::Text(text.into()),
        }
    }
}

/// A closed run of events on one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub speaker: String,
    pub start: f64,
    pub end: f64,
    pub payloads: Vec<Payload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: u64,
    pub speaker: String,
    pub text: String,
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<ClassLabel>,
}

impl fmt::Display for Utterance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.id, self.speaker, self.text)
    }
}

/// Incremental segmenter for a single channel.
#[derive(Debug, Clone)]
pub struct ChannelSegmenter {
    speaker: String,
    threshold: f64,
    open: Option<Span>,
    last: Option<(f64, f64)>,
}

impl ChannelSegmenter {
    pub fn new(speaker: impl Into<String>, threshold: f64) -> Self {
        ChannelSegmenter {
            speaker: speaker.into(),
            threshold,
            open: None,
            last: None,
        }
    }

    /// Feeds one event; returns the span it closed, if any.
    pub fn push(&mut self, event: AudioEvent) -> Result<Option<Span>, SegmentError> {
        if !(event.end > event.start) {
            return Err(SegmentError::InvalidEvent {
                speaker: self.speaker.clone(),
                start: event.start,
                end: event.end,
            });
        }
        if let Some((prev_start, prev_end)) = self.last {
            if event.start < prev_end {
                return Err(SegmentError::OutOfOrder {
                    speaker: self.speaker.clone(),
                    prev_start,
                    prev_end,
                    start: event.start,
                    end: event.end,
                });
            }
        }
        self.last = Some((event.start, event.end));

        let closed = match self.open.as_mut() {
            Some(span) if event.start - span.end < self.threshold => {
                span.end = event.end;
                span.payloads.push(event.payload);
                return Ok(None);
            }
            Some(_) => self.open.take(),
            None => None,
        };
        self.open = Some(Span {
            speaker: self.speaker.clone(),
            start: event.start,
            end: event.end,
            payloads: vec![event.payload],
        });
        Ok(closed)
    }

    /// Closes the open span once `now` is at least one threshold past its end.
    pub fn poll(&mut self, now: f64) -> Option<Span> {
        match &self.open {
            Some(span) if now - span.end >= self.threshold => self.open.take(),
            _ => None,
        }
    }

    pub fn finish(&mut self) -> Option<Span> {
        self.open.take()
    }
}

/// Segments a stream that may interleave several speaker channels.
///
/// Each channel is segmented independently; the result is ordered by span
/// start time (speaker tag breaks ties).
pub fn segment(events: &[AudioEvent], pause_threshold: f64) -> Result<Vec<Span>, SegmentError> {
    let mut channels: BTreeMap<&str, ChannelSegmenter> = BTreeMap::new();
    let mut spans = Vec::new();
    for event in events {
        let seg = channels
            .entry(event.speaker.as_str())
            .or_insert_with(|| ChannelSegmenter::new(event.speaker.clone(), pause_threshold));
        if let Some(span) = seg.push(event.clone())? {
            spans.push(span);
        }
    }
    spans.extend(channels.values_mut().filter_map(ChannelSegmenter::finish));
    spans.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.speaker.cmp(&b.speaker)));
    Ok(spans)
}

#[derive(Debug, Error)]
#[error("transcription backend failed: {0}")]
pub struct TranscriptionError(pub String);

pub trait TranscriptionBackend: Send + Sync {
    fn transcribe(&self, span: &Span) -> Result<String, TranscriptionError>;
}

/// Returns the literal text payloads of a span joined by single spaces.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoBackend;

impl TranscriptionBackend for EchoBackend {
    fn transcribe(&self, span: &Span) -> Result<String, TranscriptionError> {
        let mut parts = Vec::with_capacity(span.payloads.len());
        for payload in &span.payloads {
            match payload {
                Payload::Text(t) => parts.push(t.trim()),
                Payload::AudioRef(r) => {
                    return Err(TranscriptionError(format!(
                        "echo backend cannot decode audio reference `{r}`"
                    )))
                }
            }
        }
        Ok(parts
            .into_iter()
            .filter(|p| !p.is_empty())
            .collect::<Vec<_>>()
            .join(" "))
    }
}

/// Assigns gapless utterance ids to successful transcriptions.
#[derive(Debug, Default)]
pub struct Transcriber {
    next_id: u64,
}

impl Transcriber {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn transcribe(&mut self, span: &Span, backend: &dyn TranscriptionBackend) -> Option<Utterance> {
        let text = match backend.transcribe(span) {
            Ok(text) => text,
            Err(err) => {
                log::warn!(
                    "dropping span {}..{} on channel {}: {err}",
                    span.start,
                    span.end,
                    span.speaker
                );
                return None;
            }
        };
        let text = text.trim();
        if text.is_empty() {
            return None;
        }
        self.next_id += 1;
        Some(Utterance {
            id: self.next_id,
            speaker: span.speaker.clone(),
            text: text.to_string(),
            t_start: span.start,
            t_end: span.end,
            label: None,
        })
    }
}

/// Parses the tab-separated replay format `speaker, t_start, t_end, text`.
///
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_replay(reader: impl BufRead) -> Result<Vec<AudioEvent>, ReplayParseError> {
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.splitn(4, '\t').collect();
        if fields.len() != 4 {
            return Err(ReplayParseError::Line {
                line: lineno,
                message: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let time = |s: &str, what: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ReplayParseError::Line {
                    line: lineno,
                    message: format!("bad {what} `{s}`"),
                })
        };
        let start = time(fields[1], "t_start")?;
        let end = time(fields[2], "t_end")?;
        events.push(AudioEvent::text(fields[0].trim(), start, end, fields[3]));
    }
    Ok(events)
}

pub fn format_replay_line(event: &AudioEvent) -> String {
    let text = match &event.payload {
        Payload::Text(t) => t.as_str(),
        Payload::AudioRef(r) => r.as_str(),
    };
    format!("{}\t{}\t{}\t{}", event.speaker, event.start, event.end, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(start: f64, end: f64) -> AudioEvent {
        AudioEvent::text("A", start, end, format!("w{start}"))
    }

    fn bounds(spans: &[Span]) -> Vec<(f64, f64)> {
        spans.iter().map(|s| (s.start, s.end)).collect()
    }

    #[test]
    fn gap_rule_merges_and_splits() {
        let spans = segment(&[ev(0.0, 1.0), ev(1.2, 2.0), ev(4.0, 4.5)], 1.5).unwrap();
        assert_eq!(bounds(&spans), vec![(0.0, 2.0), (4.0, 4.5)]);
        assert_eq!(spans[0].payloads.len(), 2);
    }

    #[test]
    fn single_event_is_one_span() {
        let spans = segment(&[ev(3.0, 4.25)], 1.5).unwrap();
        assert_eq!(bounds(&spans), vec![(3.0, 4.25)]);
    }

    #[test]
    fn exact_threshold_gap_closes() {
        let spans = segment(&[ev(0.0, 1.0), ev(2.5, 3.0)], 1.5).unwrap();
        assert_eq!(spans.len(), 2);
        let spans = segment(&[ev(0.0, 1.0), ev(2.25, 3.0)], 1.5).unwrap();
        assert_eq!(spans.len(), 1);
    }

    #[test]
    fn empty_stream() {
        assert!(segment(&[], 1.5).unwrap().is_empty());
    }

    #[test]
    fn out_of_order_reports_pair() {
        let err = segment(&[ev(2.0, 3.0), ev(1.0, 1.5)], 1.5).unwrap_err();
        assert_eq!(
            err,
            SegmentError::OutOfOrder {
                speaker: "A".into(),
                prev_start: 2.0,
                prev_end: 3.0,
                start: 1.0,
                end: 1.5
            }
        );
        assert!(matches!(
            segment(&[ev(2.0, 2.0)], 1.5),
            Err(SegmentError::InvalidEvent { .. })
        ));
    }

    #[test]
    fn channels_segment_independently() {
        let events = vec![
            AudioEvent::text("A", 0.0, 1.0, "a1"),
            AudioEvent::text("B", 0.5, 1.5, "b1"),
            AudioEvent::text("A", 1.5, 2.0, "a2"),
            AudioEvent::text("B", 5.0, 6.0, "b2"),
        ];
        let spans = segment(&events, 1.5).unwrap();
        let got: Vec<_> = spans.iter().map(|s| (s.speaker.as_str(), s.start, s.end)).collect();
        assert_eq!(got, vec![("A", 0.0, 2.0), ("B", 0.5, 1.5), ("B", 5.0, 6.0)]);
    }

    #[test]
    fn streaming_poll_closes_after_silence() {
        let mut seg = ChannelSegmenter::new("A", 1.5);
        assert!(seg.push(ev(0.0, 1.0)).unwrap().is_none());
        assert!(seg.poll(2.0).is_none());
        let span = seg.poll(2.5).unwrap();
        assert_eq!((span.start, span.end), (0.0, 1.0));
        assert!(seg.finish().is_none());
    }

    struct Failing;
    impl TranscriptionBackend for Failing {
        fn transcribe(&self, _: &Span) -> Result<String, TranscriptionError> {
            Err(TranscriptionError("timeout".into()))
        }
    }

    #[test]
    fn transcription_outcomes() {
        let span = |text: &str| Span {
            speaker: "A".into(),
            start: 0.0,
            end: 1.0,
            payloads: vec![Payload::Text(text.into())],
        };
        let mut t = Transcriber::new();
        let u = t.transcribe(&span("Show rainfall for Maui"), &EchoBackend).unwrap();
        assert_eq!(u.text, "Show rainfall for Maui");
        assert_eq!(u.id, 1);
        assert!(t.transcribe(&span("   "), &EchoBackend).is_none());
        assert!(t.transcribe(&span("x"), &Failing).is_none());
        // ids stay gapless across dropped spans
        assert_eq!(t.transcribe(&span("next"), &EchoBackend).unwrap().id, 2);
    }

    #[test]
    fn replay_format_parses() {
        let text = "# comment\nA\t0.0\t1.5\tShow rainfall for Maui\n\nB\t2\t3.25\tokay\n";
        let events = parse_replay(text.as_bytes()).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[1], AudioEvent::text("B", 2.0, 3.25, "okay"));
        assert_eq!(format_replay_line(&events[0]), "A\t0\t1.5\tShow rainfall for Maui");
        let err = parse_replay("A\t0\t1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 1"));
        assert!(parse_replay("A\tx\t1\thi\n".as_bytes()).is_err());
    }
}
