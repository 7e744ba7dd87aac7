use thiserror::Error;

/// Errors produced by the estimation engine and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("moment does not exist: {0}")]
    MomentDoesNotExist(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular scale matrix: {0}")]
    SingularScale(String),

    #[error("non-finite log density{}: {detail}", component_suffix(*.component))]
    Evaluation {
        component: Option<usize>,
        detail: String,
    },

    #[error("component {component} collapsed: effective size {size:.3} is below {min}")]
    ComponentCollapse {
        component: usize,
        size: f64,
        min: usize,
    },

    #[error("cluster {0} has fewer than two members")]
    EmptyCluster(usize),

    #[error("singular system at iteration {iteration}: {detail}")]
    SingularSystem { iteration: usize, detail: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("no cell of the model grid produced a converged fit")]
    AllCellsFailed,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn component_suffix(component: Option<usize>) -> String {
    match component {
        Some(g) => format!(" in component {g}"),
        None => String::new(),
    }
}

impl Error {
    /// True for errors caused by malformed user input rather than numerics.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            Error::Input(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Dimension(_)
        )
    }

    /// Attaches a component index to an evaluation error.
    pub(crate) fn in_component(self, g: usize) -> Self {
        match self {
            Error::Evaluation { detail, .. } => Error::Evaluation {
                component: Some(g),
                detail,
            },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
