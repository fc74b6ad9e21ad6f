use thiserror::Error;

use crate::space::Event;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("invalid event: {0}")]
    InvalidEvent(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid lifting: {0}")]
    InvalidLifting(String),

    #[error("event {0} is not measurable")]
    NotMeasurable(Event),

    #[error("algebra is not coarser than the measure's algebra")]
    NotCoarser,

    #[error("table is not a lower density: law `{law}` fails")]
    NotADensity { law: String },

    #[error("measure has no positive point")]
    NoPositivePoint,

    #[error("not absolutely continuous: point (x={x}, y={y}) is base-null but charged")]
    NotAbsolutelyContinuous { x: usize, y: usize },

    #[error("condition (IT) violated at A={a}, B={b}, y={y}")]
    ItViolated { a: Event, b: Event, y: usize },

    #[error("S_{y} is not absolutely continuous w.r.t. P: x={x} is P-null but S_{y}-positive")]
    PreconditionFailed { y: usize, x: usize },

    #[error("generator {h} is not inside a single atom of the current algebra")]
    NotInsideAtom { h: Event },

    #[error("hypothesis ({which}) violated at A={a}, B={b}: exceptional set {exceptional} is not Q-null")]
    HypothesisViolated { which: u8, a: Event, b: Event, exceptional: Event },

    #[error("invalid algebra chain: {0}")]
    InvalidChain(String),

    #[error("internal invariant broken: {0}")]
    InternalInvariantBroken(String),

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("budget exceeded: {needed} candidates, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("validation failed in {module}: {detail}")]
    Validation { module: String, detail: String },

    #[error("arithmetic overflow in exact rational computation")]
    Overflow,

    #[error("io error: {0}")]
    Io(String),
}
