use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("dimension {dim} outside 1..={max}")]
    Dimension { dim: usize, max: usize },
    #[error("step {index} has {len} coordinates, expected {dim}")]
    StepLength { index: usize, len: usize, dim: usize },
    #[error("step {index} is the zero vector")]
    ZeroStep { index: usize },
    #[error("duplicate step {step}")]
    DuplicateStep { step: String },
    #[error("empty step set")]
    Empty,
    #[error("step set is not symmetric: {step} present without its negation")]
    NotSymmetric { step: String },
    #[error("minimal-subset index {index} invalid or repeated (set has {len} steps)")]
    MinimalIndex { index: usize, len: usize },
    #[error("minimal subset is not symmetric: {step} present without its negation")]
    MinimalNotSymmetric { step: String },
    #[error("minimal subset does not generate Z^d")]
    MinimalNotGenerating,
    #[error("{got} weights given for {expected} steps")]
    WeightCount { got: usize, expected: usize },
    #[error("weight {index} = {value} is negative or not finite")]
    BadWeight { index: usize, value: f64 },
    #[error("weights sum to {total}, expected 1")]
    MassSum { total: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OffspringError {
    #[error("offspring count 0 is not allowed (particles never die)")]
    ZeroOffspring,
    #[error("mass {value} for k = {k} is negative or not finite")]
    BadMass { k: u32, value: f64 },
    #[error("masses sum to {total}, expected 1")]
    MassSum { total: f64 },
    #[error("empty offspring law")]
    Empty,
    #[error("duplicate offspring count k = {k}")]
    DuplicateCount { k: u32 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("target mean {target} is below the current mean {mean}")]
    TargetBelowMean { target: f64, mean: f64 },
    #[error("target mean {target} must lie in [1, {mean}]")]
    TargetOutOfRange { target: f64, mean: f64 },
    #[error("construction produced negative mass {value} at k = {k}")]
    NegativeMass { k: usize, value: f64 },
}

/// Every invariant violated by an environment specification.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid environment: {}", .violations.join("; "))]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("step count must be at least {min}, got {n}")]
    TooFewSteps { n: usize, min: usize },
    #[error("convolution box needs {cells} cells, limit is {limit}")]
    Resource { cells: u128, limit: u128 },
    #[error("all even-step return probabilities vanish up to n = {n_max}")]
    NoReturns { n_max: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("exponent overflow: <theta, s> = {exponent} for step {step} at theta = {theta:?}")]
    Overflow { step: String, theta: Vec<f64>, exponent: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("step law is not elliptic on the generating subset; the infimum over theta is not attained")]
    Degenerate,
    #[error("generator set is not nearest-neighbour")]
    NotNearestNeighbor,
    #[error("theta has {got} coordinates, expected {dim}")]
    ThetaLength { got: usize, dim: usize },
    #[error("empty step support")]
    EmptySupport,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BellmanError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("value iteration indeterminate at m = {m} after {sweeps} sweeps; enlarge the sweep budget")]
    Indeterminate { m: f64, sweeps: usize },
    #[error("ball of radius {radius} in dimension {dim} is too large ({cells} cells)")]
    Resource { radius: usize, dim: usize, cells: u128 },
    #[error("singular linear system")]
    Singular,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}` in section [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("line {line}: `{key}` expects {expected}, got `{value}`")]
    Type { line: usize, key: String, expected: &'static str, value: String },
    #[error("{location}: `{key}` out of range: {message}")]
    Range { location: String, key: String, message: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("{0}")]
    Missing(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Offspring(#[from] OffspringError),
    #[error(transparent)]
    Validation(#[from] ValidationReport),
}

/// Top-level error for orchestration code.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Validation(#[from] ValidationReport),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Bellman(#[from] BellmanError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Offspring(#[from] OffspringError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}
