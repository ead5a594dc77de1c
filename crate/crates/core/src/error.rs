use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("no boundary found below r = {r_max}")]
    NoBoundary { r_max: f64 },
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("factorization breakdown: {0}")]
    Breakdown(String),
    #[error("bracket error: {0}")]
    Bracket(String),
    #[error("dt = {dt} exceeds the stability bound {bound}")]
    Stability { dt: f64, bound: f64 },
    #[error("not unstable: nu* = {0} >= 0")]
    NotUnstable(f64),
    #[error("ordering error: {0}")]
    Ordering(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("at kappa = {kappa}: {source}")]
    AtKappa {
        kappa: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn at_kappa(self, kappa: f64) -> Self {
        Error::AtKappa {
            kappa,
            source: Box::new(self),
        }
    }

    /// Short machine-readable tag used in JSON error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Singularity(_) => "singularity",
            Error::NoBoundary { .. } => "no_boundary",
            Error::Resolution(_) => "resolution",
            Error::Degenerate(_) => "degenerate",
            Error::Breakdown(_) => "breakdown",
            Error::Bracket(_) => "bracket",
            Error::Stability { .. } => "stability",
            Error::NotUnstable(_) => "not_unstable",
            Error::Ordering(_) => "ordering",
            Error::Fit(_) => "fit",
            Error::AtKappa { source, .. } => source.kind(),
            Error::Usage(_) => "usage",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
