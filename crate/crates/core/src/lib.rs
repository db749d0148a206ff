//! Engine for a conversational chart assistant over a station climate
//! dataset.

pub mod classifier;
pub mod data;
pub mod history;
pub mod llm;
pub mod reasoner;
pub mod refine;
pub mod segment;
pub mod vocab;
pub mod present;
pub mod session;

pub use classifier::{ClassifierError, ClassifierModel, EmbeddingProvider, HashingEmbedder, LabeledCorpus, SavedModel, TrainConfig};
pub use data::{Aggregation, Attribute, ClimateStore, DataError, DataQuery, DateRange, GroupBy, Island, TimeSeriesTable};
pub use history::{ClassLabel, ContextDocument, ContextHistory};
pub use present::{ChartSpec, PresentError, Presenter};
pub use reasoner::{ChartPlan, ChartType, Reasoner, ReasonerError, Stage, Transform};
pub use refine::{Mode, Origin, RefinedQuery, Refiner};
pub use segment::{AudioEvent, Span, Utterance};
pub use session::{
    compute_metrics, replay, replay_labeled, Engine, EventKind, MetricsReport, Session, SessionConfig, SessionError,
    SessionEvent, SessionSettings,
};
