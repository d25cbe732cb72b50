use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("heights must be strictly increasing (index {index})")]
    NonMonotoneHeights { index: usize },
    #[error("gap {index} has non-positive width")]
    NonPositiveGap { index: usize },
    #[error("expected {expected} flow speeds, got {got}")]
    WrongFlowCount { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("initial data does not decay at the grid boundary: {0}")]
    NonDecayingData(String),

    #[error("wavenumber must be nonzero")]
    ZeroWavenumber,
    #[error("wave vector must be nonzero")]
    ZeroWavevector,
    #[error("Cholesky factorisation of A failed at k = {k}")]
    SolveFailure { k: f64 },
    #[error("|k| min(gap) = {kh} is below the asymptotic range (needs > 1)")]
    OutOfAsymptoticRange { kh: f64 },

    #[error("eigenvalue iteration did not converge (matrix hash {hash:016x})")]
    NoConvergence { hash: u64 },
    #[error("matrix exponential overflowed")]
    Overflow,
    #[error("eigenvalues too close for a reliable eigenvector basis (gap {gap:e})")]
    DefectiveMatrix { gap: f64 },

    #[error("initial spectrum at Nyquist is {ratio:e} of the peak")]
    AliasedData { ratio: f64 },
    #[error("imaginary residue {residue:e} exceeds tolerance")]
    RealityViolation { residue: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("spectrum is flat: no positive real parts in the fit window")]
    FlatSpectrum,
    #[error("quadrature did not converge (last relative change {change:e}, {nodes} nodes, K = {kmax})")]
    NonConvergentQuadrature { change: f64, nodes: usize, kmax: f64 },
    #[error("zero-flow theory predicts stability but numerics found abscissa {alpha:e} at k = {k}")]
    InconsistentEvidence { alpha: f64, k: f64 },

    #[error("level {level:e} is outside the field range [{min:e}, {max:e}]")]
    LevelOutOfRange { level: f64, min: f64, max: f64 },

    #[error("potential recovery is singular at k = {k}")]
    SingularXiSolve { k: f64 },
    #[error("adaptive quadrature exceeded its budget of {budget} panels")]
    QuadratureBudgetExceeded { budget: usize },

    #[error("{source} (at k = {k})")]
    AtWavenumber { k: f64, source: Box<Error> },
}

impl Error {
    pub fn at_k(self, k: f64) -> Error {
        match self {
            e @ Error::AtWavenumber { .. } => e,
            e => Error::AtWavenumber { k, source: Box::new(e) },
        }
    }

    /// Strips any wavenumber context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtWavenumber { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for errors caused by the input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self.root(),
            Error::NonMonotoneHeights { .. }
                | Error::NonPositiveGap { .. }
                | Error::WrongFlowCount { .. }
                | Error::InvalidConfig(_)
                | Error::NonDecayingData(_)
                | Error::InvalidGrid(_)
                | Error::ZeroWavenumber
                | Error::ZeroWavevector
                | Error::OutOfAsymptoticRange { .. }
                | Error::LevelOutOfRange { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
