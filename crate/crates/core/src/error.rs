use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("grid too short: {0}")]
    GridTooShort(String),
    #[error("integration diverged at lambda = {re}{im:+}i")]
    DivergedIntegration { re: f64, im: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("winding number {winding} but {found} zeros located")]
    WindingMismatch { winding: i64, found: usize },
    #[error("decay envelope insufficient for Im lambda = {im_lambda}")]
    EnvelopeInsufficient { im_lambda: f64 },
    #[error("lambda too close to the origin: |lambda| = {0}")]
    SingularLambda(f64),
    #[error("root bracketing failed: {0}")]
    BracketFailure(String),
    #[error("exponent {exponent} exceeds cap {cap}")]
    Overflow { exponent: f64, cap: f64 },
    #[error("invalid dispersion relation: {0}")]
    InvalidDispersion(String),
    #[error("linear system ill-conditioned (condition estimate {cond:.3e}) at x = {x}")]
    IllConditioned { x: f64, cond: f64 },
    #[error("soliton determinant singular (condition estimate {cond:.3e}) at x = {x}")]
    SingularDeterminant { x: f64, cond: f64 },
    #[error("no decay detected: {0}")]
    NoDecay(String),
    #[error("snapshots belong to different cases: {0} and {1}")]
    CaseMismatch(String, String),
    #[error("no bound states given")]
    EmptySpectrum,
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap with the name of the pipeline stage that failed.
    pub fn at_stage(self, stage: &str) -> Error {
        Error::Stage { stage: String::from(stage), source: Box::new(self) }
    }

    /// True for failures caused by malformed input rather than numerics.
    pub fn is_validation(&self) -> bool {
        if let Error::Stage { source, .. } = self {
            return source.is_validation();
        }
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::GridTooShort(_)
                | Error::InvalidDispersion(_)
                | Error::CaseMismatch(..)
                | Error::EmptySpectrum
        )
    }
}
