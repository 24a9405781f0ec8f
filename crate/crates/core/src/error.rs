use thiserror::Error;

/// Errors across the crate. Most constructors validate eagerly and return
/// one of these instead of panicking.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is not an odd prime in [3, 65536)")]
    InvalidPrime(u64),
    #[error("digit {digit} out of range for p = {p}")]
    DigitOutOfRange { digit: u64, p: u32 },
    #[error("point has {got} digits, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("space p^n = {size} exceeds the configured cap {cap}")]
    CapExceeded { size: u128, cap: u64 },
    #[error("rank {rank} out of range for space of size {size}")]
    RankOutOfRange { rank: u64, size: u64 },
    #[error("matrix rows are linearly dependent")]
    DependentRows,
    #[error("requested {k} independent rows in dimension {n}")]
    TooManyRows { k: usize, n: usize },
    #[error("value {0} outside [0, 1]")]
    ValueOutOfRange(f64),
    #[error("subspace has a single point; nontrivial 3-AP density is undefined")]
    DegenerateSubspace,
    #[error("group order must be odd, got {0}")]
    EvenOrder(u64),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("direction sampling exhausted {attempts} attempts ({independence_failures} independence failures, {hyperplane_failures} hyperplane failures)")]
    DirectionsExhausted {
        attempts: u32,
        independence_failures: u32,
        hyperplane_failures: u32,
    },
    #[error("sampling exhausted {attempts} attempts (best density dev {best_density_dev:.3e}, best spectrum dev {best_spectrum_dev:.3e})")]
    SamplingExhausted {
        attempts: u32,
        best_density_dev: f64,
        best_spectrum_dev: f64,
    },
    #[error("densities differ: {0} vs {1}")]
    DensityMismatch(f64, f64),
    #[error("density is 1; complement-based step is undefined")]
    DegenerateDensity,
    #[error("target count {target} impossible for space of size {size}")]
    ImpossibleTarget { target: u64, size: u64 },
    #[error("step aborted: {0}")]
    StepAborted(String),
    #[error("C_p is required for p = {0} (the paper pins a value only at p = 3)")]
    MissingRemovalExponent(u32),
    #[error("C_p must exceed 3, got {0}")]
    InvalidRemovalExponent(f64),
    #[error("work estimate {estimate} exceeds budget {budget}")]
    BudgetExceeded { estimate: u128, budget: u128 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("bad file magic: expected {expected}, got {got}")]
    BadMagic { expected: String, got: String },
    #[error("rational value does not fit the u64/u64 wire format")]
    RationalOverflow,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
