use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{p} is not a prime")]
    NotPrime { p: u64 },

    #[error("{q} is not a prime power")]
    NotPrimePower { q: u64 },

    #[error("extension degree must be at least 1")]
    ZeroDegree,

    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("polynomial is not primitive: x has multiplicative order {found} (expected {expected})", found = found.map_or_else(|| "undefined".to_string(), |o| o.to_string()))]
    NotPrimitive { found: Option<u64>, expected: u64 },

    #[error("field of order {order} exceeds the size bound {bound}")]
    SizeBound { order: u128, bound: u64 },

    #[error("zero has no multiplicative inverse")]
    ZeroInverse,

    #[error("{sub} does not divide the extension degree {degree}")]
    NotDivisor { sub: u32, degree: u32 },

    #[error("subgroup order {sub} does not divide group order {group}")]
    NotDivisible { group: u64, sub: u64 },

    #[error("phi({n}, {l}, {s}) is outside its domain")]
    PhiDomain { n: i64, l: i64, s: u64 },

    #[error("arithmetic overflow computing {0}")]
    Overflow(&'static str),

    #[error("block dimension {k}: k+1 = {block} does not divide m+1 = {total}")]
    BlockDimension { k: u32, block: u32, total: u32 },

    #[error("cofactor t = {t} is not valid here ({reason})")]
    Cofactor { t: u32, reason: &'static str },

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("memory conflict at slot {slot}: memory {mem} {port}-port used by units {units:?}")]
    Conflict {
        slot: usize,
        mem: usize,
        port: &'static str,
        units: Vec<usize>,
    },

    #[error("double read at slot {slot}: unit {unit} read memory {mem} address {addr} twice in one phase")]
    DoubleRead {
        slot: usize,
        unit: usize,
        mem: usize,
        addr: usize,
    },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("plan document error at `{path}`: {message}")]
    PlanFormat { path: String, message: String },
}

impl Error {
    /// Stable snake_case name of the variant, for machine-readable output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotPrime { .. } => "not_prime",
            Error::NotPrimePower { .. } => "not_prime_power",
            Error::ZeroDegree => "zero_degree",
            Error::InvalidPolynomial(_) => "invalid_polynomial",
            Error::NotPrimitive { .. } => "not_primitive",
            Error::SizeBound { .. } => "size_bound",
            Error::ZeroInverse => "zero_inverse",
            Error::NotDivisor { .. } => "not_divisor",
            Error::NotDivisible { .. } => "not_divisible",
            Error::PhiDomain { .. } => "phi_domain",
            Error::Overflow(_) => "overflow",
            Error::BlockDimension { .. } => "block_dimension",
            Error::Cofactor { .. } => "cofactor",
            Error::Inconsistent(_) => "inconsistent",
            Error::Conflict { .. } => "conflict",
            Error::DoubleRead { .. } => "double_read",
            Error::InvalidPlan(_) => "invalid_plan",
            Error::PlanFormat { .. } => "plan_format",
        }
    }
}
