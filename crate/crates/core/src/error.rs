use thiserror::Error;

/// Errors raised anywhere in the pipeline, from spline evaluation to reporting.
#[derive(Debug, Error)]
pub enum CigaError {
    #[error("parametric coordinate {value} outside [0, 1]")]
    Domain { value: f64 },

    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("invalid patch definition: {0}")]
    InvalidPatch(String),

    #[error("bijectivity violated: |det J| = {det:e} at parametric point {xi:?}")]
    Bijectivity { det: f64, xi: [f64; 2] },

    #[error("moment matrix of the convolution patch centred at node {node} is singular")]
    SingularMoment { node: usize },

    #[error("stacked interface moment system centred at node {node} is singular; try a larger patch size s")]
    SingularInterfaceMoment { node: usize },

    #[error("dilation {a} too small: the RBF support of member {member} in the patch of node {node} contains no other node")]
    SupportMissesNodes { node: usize, member: usize, a: f64 },

    #[error("convolution patch of node {node} has {n} nodes, fewer than the {m} basis terms even at order 0")]
    InsufficientNodes { node: usize, n: usize, m: usize },

    #[error("inversion did not reach tolerance (best residual {residual:e}) for point {point:?}")]
    Inversion { residual: f64, point: [f64; 2] },

    #[error("inversion failed for {} node(s), first: node {} (residual {:e})", .failures.len(), .failures[0].0, .failures[0].1)]
    MeshInversion { failures: Vec<(usize, f64)> },

    #[error("nodal compatibility violated: {0}")]
    NodalCompatibility(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("element {element}: {source}")]
    Element {
        element: usize,
        #[source]
        source: Box<CigaError>,
    },

    #[error("system has no Dirichlet constraints; the stiffness matrix is singular")]
    Unconstrained,

    #[error("singular system ({0}); check for missing constraints or a null space")]
    SingularSystem(String),

    #[error("conjugate gradient stopped after {iterations} iterations at relative residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("rate estimate: {0}")]
    RateEstimate(String),

    #[error("interface is empty")]
    EmptyInterface,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CigaError {
    pub(crate) fn at_element(self, element: usize) -> Self {
        CigaError::Element {
            element,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, CigaError>;
