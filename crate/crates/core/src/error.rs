use thiserror::Error;

/// Everything that can go wrong while building or evaluating a network.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("frequency grid: {0}")]
    Grid(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("modal decomposition failed{}: {reason}", fmt_ctx(*.freq, .element))]
    Decomposition {
        reason: String,
        freq: Option<f64>,
        element: Option<String>,
    },

    #[error("load reflection undefined, Y_L + Y_C is singular{}", fmt_ctx(*.freq, .element))]
    MatchedDegenerate {
        freq: Option<f64>,
        element: Option<String>,
    },

    #[error("resonance singularity{}", fmt_ctx(*.freq, .element))]
    Resonance {
        freq: Option<f64>,
        element: Option<String>,
    },

    #[error("singular {what}{}", fmt_ctx(*.freq, .element))]
    Singular {
        what: &'static str,
        freq: Option<f64>,
        element: Option<String>,
    },
}

fn fmt_ctx(freq: Option<f64>, element: &Option<String>) -> String {
    let mut s = String::new();
    if let Some(e) = element {
        s.push_str(&format!(" on {e}"));
    }
    if let Some(f) = freq {
        s.push_str(&format!(" at {f} Hz"));
    }
    s
}

impl Error {
    pub(crate) fn singular(what: &'static str) -> Self {
        Error::Singular {
            what,
            freq: None,
            element: None,
        }
    }

    /// Attaches the frequency at which a numerical failure happened, if not already set.
    pub fn at_freq(mut self, f: f64) -> Self {
        match &mut self {
            Error::Decomposition { freq, .. }
            | Error::MatchedDegenerate { freq, .. }
            | Error::Resonance { freq, .. }
            | Error::Singular { freq, .. } => {
                freq.get_or_insert(f);
            }
            _ => {}
        }
        self
    }

    /// Attaches the network element (branch, segment, node) involved in a numerical failure.
    pub fn in_element(mut self, id: &str) -> Self {
        match &mut self {
            Error::Decomposition { element, .. }
            | Error::MatchedDegenerate { element, .. }
            | Error::Resonance { element, .. }
            | Error::Singular { element, .. } => {
                element.get_or_insert_with(|| id.to_string());
            }
            _ => {}
        }
        self
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Decomposition { .. }
                | Error::MatchedDegenerate { .. }
                | Error::Resonance { .. }
                | Error::Singular { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
