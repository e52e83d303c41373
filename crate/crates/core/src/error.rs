use thiserror::Error;

/// Failure modes shared by every solver in the crate.
///
/// The CLI maps [`Error::is_numeric`] failures to exit code 2 and everything
/// else to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("boundary leak: {fraction:.3e} of the norm sits in the outer 5% of the grid at t = {t}")]
    BoundaryLeak { fraction: f64, t: f64 },

    #[error("density has a node: {0}")]
    Node(String),

    #[error("caustic: characteristics cross at t = {t_c}")]
    Caustic { t_c: f64 },

    #[error("trajectory escaped: |r| = {r:.3e} exceeds the bound at t = {t}")]
    Escape { r: f64, t: f64 },

    #[error("phase-space mass drifted by {drift:.3e}")]
    MassDrift { drift: f64 },

    #[error("inconclusive classification: {0}")]
    Inconclusive(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of the numerics (caustic, leakage, mass drift,
    /// escape) as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::BoundaryLeak { .. }
                | Error::Caustic { .. }
                | Error::MassDrift { .. }
                | Error::Escape { .. }
                | Error::Node(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
