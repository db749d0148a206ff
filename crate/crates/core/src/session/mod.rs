//! Live and replayed sessions: the single ordered loop that owns history,
//! the conveyor belt, the workspace and the event log.

pub mod config;
pub mod events;
pub mod metrics;
pub mod wire;

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::classifier::{
    classify, generate_corpus, train, ClassifierError, ClassifierModel, EmbeddingDescriptor, EmbeddingProvider,
    HashingEmbedder, RemoteEmbedder, SavedModel, TrainConfig,
};
use crate::classifier::corpus::SHIPPED_CORPUS_PER_CLASS;
use crate::data::{ClimateStore, DataError};
use crate::history::{ChartEvent, ChartEventKind, ClassLabel, ContextHistory};
use crate::llm::{HttpClient, LlmError};
use crate::present::{LlmSummary, PresentError, Presenter, SummaryBackend, TemplateSummary};
use crate::reasoner::{DatasetSchema, FallbackReasoner, LlmReasoner, Reasoner, ReasonerBackend, StageBackends, WithFallback};
use crate::refine::{gate, suppress_duplicate, FallbackRefiner, LlmRefiner, Mode, Origin, RefinementBackend, Refiner};
use crate::segment::{
    segment, AudioEvent, ChannelSegmenter, EchoBackend, Payload, ReplayParseError, SegmentError, Span, Transcriber,
    Utterance,
};

pub use config::{BackendChoice, BackendConfig, SessionConfig};
pub use events::{
    comparable, explicit_projection, parse_log, write_log, ChartGeneratedRecord, ClassificationRecord, DeletionRecord,
    ErrorRecord, EventKind, LayoutRecord, Placement, PlanRecord, RefinedQueryRecord, SelectionRecord,
    SessionEndRecord, SessionEvent, SessionStartRecord, SuppressionReason, SuppressionRecord,
};
pub use metrics::{compute_metrics, count_keywords, format_mmss, MetricsReport, SESSION_KEYWORDS};
pub use wire::{parse_client_message, ClientEnvelope, ClientMessage, ServerMessage};

pub const MIN_CHART_WIDTH: f64 = 200.0;
pub const MIN_CHART_HEIGHT: f64 = 150.0;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Replay(#[from] ReplayParseError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
}

/// Immutable pipeline components shared by every session over a dataset.
pub struct Engine {
    pub store: Arc<ClimateStore>,
    pub model: Arc<ClassifierModel>,
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub refiner: Refiner,
    pub reasoner: Reasoner,
    pub presenter: Presenter,
}

impl Engine {
    /// Rule backends for every language stage.
    pub fn fallback(store: Arc<ClimateStore>, model: ClassifierModel, embedder: Arc<dyn EmbeddingProvider>) -> Self {
        let schema = DatasetSchema::from_store(&store);
        Engine {
            refiner: Refiner::fallback_only(schema.clone()),
            reasoner: Reasoner::new(schema.clone(), StageBackends::default()),
            presenter: Presenter::with_template(schema),
            store,
            model: Arc::new(model),
            embedder,
        }
    }

    pub fn from_config(cfg: &SessionConfig) -> Result<Self, SessionError> {
        let store = Arc::new(ClimateStore::ingest_csv(&cfg.dataset)?);
        let (model, embedder) = load_or_train_classifier(cfg)?;
        let schema = DatasetSchema::from_store(&store);
        let client = |name: &str| -> Result<(HttpClient, String), SessionError> {
            let ep = cfg
                .endpoints
                .get(name)
                .ok_or_else(|| SessionError::Config(format!("unknown endpoint `{name}`")))?;
            Ok((HttpClient::from_config(ep)?, ep.model.clone()))
        };

        let fallback_refiner = FallbackRefiner::new(schema.clone());
        let refine_backend: Arc<dyn RefinementBackend> = match &cfg.backends.refine {
            BackendChoice::Fallback => Arc::new(fallback_refiner.clone()),
            BackendChoice::Llm(name) => {
                let (c, m) = client(name)?;
                Arc::new(LlmRefiner::new(c, m))
            }
        };
        let stage = |choice: &BackendChoice| -> Result<Arc<dyn ReasonerBackend>, SessionError> {
            Ok(match choice {
                BackendChoice::Fallback => Arc::new(FallbackReasoner),
                BackendChoice::Llm(name) => {
                    let (c, m) = client(name)?;
                    Arc::new(WithFallback {
                        primary: Arc::new(LlmReasoner::new(c, m)),
                        fallback: Arc::new(FallbackReasoner),
                    })
                }
            })
        };
        let backends = StageBackends {
            attributes: stage(&cfg.backends.attributes)?,
            stations: stage(&cfg.backends.stations)?,
            transform: stage(&cfg.backends.transform)?,
            chart_type: stage(&cfg.backends.chart_type)?,
        };
        let summary: Arc<dyn SummaryBackend> = match &cfg.backends.summary {
            BackendChoice::Fallback => Arc::new(TemplateSummary),
            BackendChoice::Llm(name) => {
                let (c, m) = client(name)?;
                Arc::new(LlmSummary::new(c, m))
            }
        };
        Ok(Engine {
            refiner: Refiner::new(refine_backend, fallback_refiner),
            reasoner: Reasoner::new(schema.clone(), backends),
            presenter: Presenter::new(schema, summary),
            store,
            model: Arc::new(model),
            embedder,
        })
    }
}

/// Loads the configured checkpoint, or trains on the synthetic corpus
/// generated from the config seed.
pub fn load_or_train_classifier(
    cfg: &SessionConfig,
) -> Result<(ClassifierModel, Arc<dyn EmbeddingProvider>), SessionError> {
    match &cfg.checkpoint {
        Some(path) => {
            let saved = SavedModel::load(path)?;
            let key = match &saved.embedding {
                EmbeddingDescriptor::Remote { endpoint, .. } => cfg
                    .endpoints
                    .values()
                    .find(|e| e.url.trim_end_matches('/') == endpoint.as_str())
                    .and_then(|e| e.api_key_env.as_deref())
                    .and_then(|var| std::env::var(var).ok()),
                EmbeddingDescriptor::Hashing { .. } => None,
            };
            let embedder = embedder_for(&saved.embedding, key)?;
            Ok((saved.model, embedder))
        }
        None => {
            log::info!("no checkpoint configured; training on the synthetic corpus (seed {})", cfg.seed);
            let embedder = HashingEmbedder::default();
            let corpus = generate_corpus(cfg.seed, SHIPPED_CORPUS_PER_CLASS);
            let report = train(&corpus, &embedder, &TrainConfig::with_seed(cfg.seed))?;
            Ok((report.model, Arc::new(embedder)))
        }
    }
}

/// Rebuilds the embedding provider a checkpoint was trained with.
pub fn embedder_for(
    descriptor: &EmbeddingDescriptor,
    api_key: Option<String>,
) -> Result<Arc<dyn EmbeddingProvider>, SessionError> {
    Ok(match descriptor {
        EmbeddingDescriptor::Hashing { dim, seed } => Arc::new(HashingEmbedder::new(*dim, *seed)),
        EmbeddingDescriptor::Remote { dim, endpoint, model } => {
            let client = HttpClient::new(endpoint.clone(), api_key, Duration::from_secs(20))?;
            Arc::new(RemoteEmbedder::new(client, model.clone(), *dim))
        }
    })
}

/// Per-session settings; fixed for the session's lifetime.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSettings {
    pub mode: Mode,
    pub persona: String,
    pub seed: u64,
    pub pause_threshold: f64,
    pub proactive_throttle: f64,
    pub conveyor_capacity: usize,
    /// Stamp events with wall-clock time.
    pub wall_clock: bool,
}

impl SessionSettings {
    pub fn new(mode: Mode) -> Self {
        SessionSettings::from(&SessionConfig::new(mode, ""))
    }
}

impl From<&SessionConfig> for SessionSettings {
    fn from(cfg: &SessionConfig) -> Self {
        SessionSettings {
            mode: cfg.mode,
            persona: cfg.persona().to_string(),
            seed: cfg.seed,
            pause_threshold: cfg.pause_threshold,
            proactive_throttle: cfg.proactive_throttle,
            conveyor_capacity: cfg.conveyor_capacity,
            wall_clock: true,
        }
    }
}

/// Newly generated charts awaiting selection, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ConveyorState {
    ids: VecDeque<String>,
    capacity: usize,
}

impl ConveyorState {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "conveyor capacity must be positive");
        ConveyorState {
            ids: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    /// Appends `id`, returning the evicted oldest id when full.
    pub fn push(&mut self, id: String) -> Option<String> {
        self.remove(&id);
        let evicted = if self.ids.len() == self.capacity {
            self.ids.pop_front()
        } else {
            None
        };
        self.ids.push_back(id);
        evicted
    }

    pub fn remove(&mut self, id: &str) -> bool {
        match self.ids.iter().position(|x| x == id) {
            Some(i) => {
                self.ids.remove(i);
                true
            }
            None => false,
        }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ids.iter().any(|x| x == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.ids.iter().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ChartMeta {
    title: String,
    origin: Origin,
}

pub struct Session {
    engine: Arc<Engine>,
    settings: SessionSettings,
    history: ContextHistory,
    conveyor: ConveyorState,
    workspace: BTreeMap<String, Placement>,
    charts: BTreeMap<String, ChartMeta>,
    log: Vec<SessionEvent>,
    transcriber: Transcriber,
    segmenters: BTreeMap<String, ChannelSegmenter>,
    next_chart: u64,
    last_proactive: Option<f64>,
    ended: bool,
}

impl Session {
    /// Opens a session and logs `session_start` at t = 0.
    pub fn new(engine: Arc<Engine>, settings: SessionSettings) -> Self {
        let mut s = Session {
            engine,
            conveyor: ConveyorState::new(settings.conveyor_capacity),
            settings,
            history: ContextHistory::new(),
            workspace: BTreeMap::new(),
            charts: BTreeMap::new(),
            log: Vec::new(),
            transcriber: Transcriber::new(),
            segmenters: BTreeMap::new(),
            next_chart: 1,
            last_proactive: None,
            ended: false,
        };
        let start = SessionStartRecord {
            mode: s.settings.mode,
            persona: s.settings.persona.clone(),
            seed: s.settings.seed,
            pause_threshold: s.settings.pause_threshold,
            proactive_throttle: s.settings.proactive_throttle,
            conveyor_capacity: s.settings.conveyor_capacity,
        };
        s.emit(0.0, EventKind::SessionStart(start));
        s
    }

    pub fn settings(&self) -> &SessionSettings {
        &self.settings
    }

    pub fn log(&self) -> &[SessionEvent] {
        &self.log
    }

    pub fn history(&self) -> &ContextHistory {
        &self.history
    }

    pub fn conveyor(&self) -> &ConveyorState {
        &self.conveyor
    }

    pub fn workspace(&self) -> &BTreeMap<String, Placement> {
        &self.workspace
    }

    fn emit(&mut self, t: f64, event: EventKind) {
        let wall_time = self
            .settings
            .wall_clock
            .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true));
        self.log.push(SessionEvent {
            seq: self.log.len() as u64 + 1,
            t,
            wall_time,
            event,
        });
    }

    fn error(&mut self, t: f64, stage: impl Into<String>, message: impl Into<String>, u: Option<(u64, Origin)>) {
        self.emit(
            t,
            EventKind::Error(ErrorRecord {
                stage: stage.into(),
                message: message.into(),
                utterance_id: u.map(|(id, _)| id),
                origin: u.map(|(_, o)| o),
            }),
        );
    }

    fn since(&self, start: usize) -> Vec<SessionEvent> {
        self.log[start..].to_vec()
    }

    /// Runs one transcribed utterance through the pipeline.
    pub fn handle_utterance(&mut self, u: Utterance) -> Vec<SessionEvent> {
        self.process(u, None)
    }

    /// Like [`Session::handle_utterance`] with a given label in place of
    /// the classifier's.
    pub fn handle_labeled(&mut self, u: Utterance, label: ClassLabel) -> Vec<SessionEvent> {
        self.process(u, Some(label))
    }

    fn process(&mut self, mut u: Utterance, gold: Option<ClassLabel>) -> Vec<SessionEvent> {
        let start = self.log.len();
        let t = u.t_end;
        self.emit(t, EventKind::Utterance(u.clone()));
        let classified = match gold {
            Some(label) => Ok((label, None)),
            None => classify(&self.engine.model, self.engine.embedder.as_ref(), &u.text)
                .map(|(label, p)| (label, Some(p.probabilities))),
        };
        let (label, probabilities) = match classified {
            Ok(c) => c,
            Err(e) => {
                self.history.push_utterance(u.clone());
                self.error(t, "classifier", e.to_string(), None);
                return self.since(start);
            }
        };
        u.label = Some(label);
        self.history.push_utterance(u.clone());
        self.emit(
            t,
            EventKind::Classification(ClassificationRecord {
                utterance_id: u.id,
                label,
                probabilities,
            }),
        );
        if let Some(origin) = gate(label, self.settings.mode) {
            self.respond(&u, origin);
        }
        self.since(start)
    }

    fn suppress(&mut self, t: f64, u: &Utterance, origin: Origin, reason: SuppressionReason, title: Option<String>) {
        self.emit(
            t,
            EventKind::Suppression(SuppressionRecord {
                utterance_id: u.id,
                origin,
                reason,
                title,
            }),
        );
    }

    fn respond(&mut self, u: &Utterance, origin: Origin) {
        let t = u.t_end;
        let tag = Some((u.id, origin));
        if origin == Origin::Proactive {
            if let Some(last) = self.last_proactive {
                if t - last < self.settings.proactive_throttle {
                    self.suppress(t, u, origin, SuppressionReason::Throttle, None);
                    return;
                }
            }
        }

        let context = self.history.snapshot();
        let query = match self.engine.refiner.refine(u, origin, &context) {
            Ok(Some(q)) => q,
            Ok(None) => {
                self.suppress(t, u, origin, SuppressionReason::NoRefinement, None);
                return;
            }
            Err(e) => {
                self.error(t, "refine", e.to_string(), tag);
                return;
            }
        };
        self.emit(
            t,
            EventKind::RefinedQuery(RefinedQueryRecord {
                query: query.clone(),
                context,
            }),
        );

        let plan = match self.engine.reasoner.plan(&query) {
            Ok(p) => p,
            Err(e) => {
                self.error(t, format!("reasoner:{}", e.stage()), e.to_string(), tag);
                return;
            }
        };
        if origin == Origin::Proactive && suppress_duplicate(&plan.title, &self.history) {
            self.suppress(t, u, origin, SuppressionReason::Duplicate, Some(plan.title.clone()));
            return;
        }
        self.emit(
            t,
            EventKind::Plan(PlanRecord {
                utterance_id: u.id,
                origin,
                plan: plan.clone(),
            }),
        );

        let spec_id = format!("c{}", self.next_chart);
        let spec = match self.engine.presenter.present(&plan, &self.engine.store, origin, spec_id.clone()) {
            Ok(spec) => spec,
            Err(PresentError::EmptyData) => {
                self.suppress(t, u, origin, SuppressionReason::EmptyData, Some(plan.title.clone()));
                return;
            }
            Err(e) => {
                self.error(t, "present", e.to_string(), tag);
                return;
            }
        };
        self.next_chart += 1;
        let evicted = self.conveyor.push(spec_id.clone());
        self.history
            .record_chart(ChartEvent::new(ChartEventKind::Generated, plan.title.clone(), t));
        self.charts.insert(
            spec_id,
            ChartMeta {
                title: plan.title.clone(),
                origin,
            },
        );
        if origin == Origin::Proactive {
            self.last_proactive = Some(t);
        }
        self.emit(
            t,
            EventKind::ChartGenerated(ChartGeneratedRecord {
                utterance_id: u.id,
                spec,
                conveyor: self.conveyor.ids(),
                evicted,
            }),
        );
    }

    fn transcribe_and_handle(&mut self, span: &Span) -> Vec<SessionEvent> {
        match self.transcriber.transcribe(span, &EchoBackend) {
            Some(u) => self.handle_utterance(u),
            None => Vec::new(),
        }
    }

    /// A typed utterance; bypasses segmentation.
    pub fn utterance_text(&mut self, speaker: &str, text: &str, t: f64) -> Vec<SessionEvent> {
        let span = Span {
            speaker: speaker.to_string(),
            start: t,
            end: t,
            payloads: vec![Payload::Text(text.to_string())],
        };
        self.transcribe_and_handle(&span)
    }

    /// Feeds a live audio event; a completed span is processed at once.
    pub fn audio_event(&mut self, event: AudioEvent) -> Vec<SessionEvent> {
        let threshold = self.settings.pause_threshold;
        let seg = self
            .segmenters
            .entry(event.speaker.clone())
            .or_insert_with(|| ChannelSegmenter::new(event.speaker.clone(), threshold));
        let t = event.end;
        match seg.push(event) {
            Ok(Some(span)) => self.transcribe_and_handle(&span),
            Ok(None) => Vec::new(),
            Err(e) => {
                let start = self.log.len();
                self.error(t, "segment", e.to_string(), None);
                self.since(start)
            }
        }
    }

    /// Closes spans whose pause has elapsed by `now`.
    pub fn poll(&mut self, now: f64) -> Vec<SessionEvent> {
        let mut spans: Vec<Span> = self.segmenters.values_mut().filter_map(|s| s.poll(now)).collect();
        spans.sort_by(|a, b| a.start.total_cmp(&b.start));
        spans.iter().flat_map(|s| self.transcribe_and_handle(s)).collect()
    }

    fn flush(&mut self) -> Vec<SessionEvent> {
        let mut spans: Vec<Span> = self.segmenters.values_mut().filter_map(|s| s.finish()).collect();
        spans.sort_by(|a, b| a.start.total_cmp(&b.start));
        spans.iter().flat_map(|s| self.transcribe_and_handle(s)).collect()
    }

    pub fn select_chart(&mut self, spec_id: &str, t: f64) -> Vec<SessionEvent> {
        let start = self.log.len();
        let known = self.conveyor.contains(spec_id) || self.workspace.contains_key(spec_id);
        let Some(meta) = self.charts.get(spec_id).filter(|_| known).cloned() else {
            self.error(t, "select_chart", format!("chart `{spec_id}` is not on the belt or in the workspace"), None);
            return self.since(start);
        };
        let repeated = self.workspace.contains_key(spec_id);
        if !repeated {
            self.conveyor.remove(spec_id);
            let k = self.workspace.len() as f64;
            self.workspace.insert(
                spec_id.to_string(),
                Placement {
                    x: 24.0 + 32.0 * k,
                    y: 24.0 + 32.0 * k,
                    w: 480.0,
                    h: 320.0,
                },
            );
            self.history
                .record_chart(ChartEvent::new(ChartEventKind::Selected, meta.title.clone(), t));
        }
        self.emit(
            t,
            EventKind::ChartSelected(SelectionRecord {
                spec_id: spec_id.to_string(),
                title: meta.title,
                origin: meta.origin,
                repeated,
            }),
        );
        self.since(start)
    }

    pub fn delete_chart(&mut self, spec_id: &str, t: f64) -> Vec<SessionEvent> {
        let start = self.log.len();
        let removed = self.workspace.remove(spec_id).is_some() || self.conveyor.remove(spec_id);
        match self.charts.get(spec_id).filter(|_| removed).cloned() {
            Some(meta) => self.emit(
                t,
                EventKind::ChartDeleted(DeletionRecord {
                    spec_id: spec_id.to_string(),
                    title: meta.title,
                    origin: meta.origin,
                }),
            ),
            None => self.error(t, "delete_chart", format!("chart `{spec_id}` is not displayed"), None),
        }
        self.since(start)
    }

    /// Moves or resizes a workspace chart; sizes clamp to the minimum.
    pub fn move_resize(&mut self, spec_id: &str, placement: Placement, t: f64) -> Vec<SessionEvent> {
        let start = self.log.len();
        let origin = self.charts.get(spec_id).map(|m| m.origin);
        match (self.workspace.get_mut(spec_id), origin) {
            (Some(slot), Some(origin)) if [placement.x, placement.y, placement.w, placement.h].iter().all(|v| v.is_finite()) => {
                *slot = Placement {
                    w: placement.w.max(MIN_CHART_WIDTH),
                    h: placement.h.max(MIN_CHART_HEIGHT),
                    ..placement
                };
                let placement = *slot;
                self.emit(
                    t,
                    EventKind::LayoutChanged(LayoutRecord {
                        spec_id: spec_id.to_string(),
                        origin,
                        placement,
                    }),
                );
            }
            (Some(_), Some(_)) => self.error(t, "move_resize", "placement must be finite", None),
            _ => self.error(t, "move_resize", format!("chart `{spec_id}` is not in the workspace"), None),
        }
        self.since(start)
    }

    /// Logs a client message that could not be understood.
    pub fn protocol_error(&mut self, message: &str, t: f64) -> Vec<SessionEvent> {
        let start = self.log.len();
        self.error(t, "protocol", message, None);
        self.since(start)
    }

    /// Applies a client message at session time `t`.
    pub fn apply(&mut self, msg: ClientMessage, t: f64) -> Vec<SessionEvent> {
        match msg {
            ClientMessage::UtteranceText { speaker, text } => self.utterance_text(&speaker, &text, t),
            ClientMessage::AudioEvent {
                speaker,
                start,
                end,
                text,
                audio_ref,
            } => {
                let payload = match (text, audio_ref) {
                    (Some(text), None) => Payload::Text(text),
                    (None, Some(r)) => Payload::AudioRef(r),
                    _ => {
                        let at = self.log.len();
                        self.error(t, "audio_event", "exactly one of text or audio_ref is required", None);
                        return self.since(at);
                    }
                };
                self.audio_event(AudioEvent {
                    speaker,
                    start,
                    end,
                    payload,
                })
            }
            ClientMessage::SelectChart { spec_id } => self.select_chart(&spec_id, t),
            ClientMessage::DeleteChart { spec_id } => self.delete_chart(&spec_id, t),
            ClientMessage::MoveResize { spec_id, x, y, w, h } => self.move_resize(&spec_id, Placement { x, y, w, h }, t),
        }
    }

    /// Flushes open spans and logs `session_end`; later calls do nothing.
    pub fn end(&mut self, t: f64) -> Vec<SessionEvent> {
        if self.ended {
            return Vec::new();
        }
        let start = self.log.len();
        self.flush();
        self.ended = true;
        let utterances = self
            .log
            .iter()
            .filter(|e| matches!(e.event, EventKind::Utterance(_)))
            .count() as u64;
        let t = self.log.iter().map(|e| e.t).fold(t, f64::max);
        self.emit(
            t,
            EventKind::SessionEnd(SessionEndRecord {
                utterances,
                charts_generated: self.next_chart - 1,
            }),
        );
        self.since(start)
    }
}

/// Segments a recorded transcript, runs every utterance through a fresh
/// session and returns the closed log.
pub fn replay(engine: Arc<Engine>, settings: SessionSettings, events: &[AudioEvent]) -> Result<Vec<SessionEvent>, SessionError> {
    let spans = segment(events, settings.pause_threshold)?;
    let mut session = Session::new(engine, settings);
    for span in &spans {
        session.transcribe_and_handle(span);
    }
    let end = events.iter().map(|e| e.end).fold(0.0, f64::max);
    session.end(end);
    Ok(session.log)
}

/// One line of a gold-labelled transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledLine {
    pub speaker: String,
    pub t_start: f64,
    pub t_end: f64,
    pub label: ClassLabel,
    pub text: String,
}

/// Parses `speaker, t_start, t_end, label, text` (tab separated). Each line
/// is one utterance; `#` comments and blank lines are skipped.
pub fn parse_labeled(text: &str) -> Result<Vec<LabeledLine>, ReplayParseError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| ReplayParseError::Line { line: idx + 1, message };
        let f: Vec<&str> = line.splitn(5, '\t').collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 tab-separated fields, found {}", f.len())));
        }
        let time = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("bad time `{s}`")))
        };
        out.push(LabeledLine {
            speaker: f[0].trim().to_string(),
            t_start: time(f[1])?,
            t_end: time(f[2])?,
            label: ClassLabel::parse(f[3].trim()).ok_or_else(|| bad(format!("unknown label `{}`", f[3])))?,
            text: f[4].trim().to_string(),
        });
    }
    Ok(out)
}

/// Replays a gold-labelled transcript line by line, without segmentation
/// or classification.
pub fn replay_labeled(engine: Arc<Engine>, settings: SessionSettings, lines: &[LabeledLine]) -> Vec<SessionEvent> {
    let mut session = Session::new(engine, settings);
    let mut ids = Transcriber::new();
    for line in lines {
        let span = Span {
            speaker: line.speaker.clone(),
            start: line.t_start,
            end: line.t_end,
            payloads: vec![Payload::Text(line.text.clone())],
        };
        if let Some(u) = ids.transcribe(&span, &EchoBackend) {
            session.handle_labeled(u, line.label);
        }
    }
    let end = lines.iter().map(|l| l.t_end).fold(0.0, f64::max);
    session.end(end);
    session.log
}
