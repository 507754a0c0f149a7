use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("cross-check failed: {0}")]
    CrossCheckFail(String),
    #[error("matrix is not special unitary (defect {0:e})")]
    NotSpecialUnitary(f64),
    #[error("variance mismatch: cannot combine a form with a multivector field")]
    VarianceMismatch,
    #[error("degree overflow: {0} > 6")]
    DegreeOverflow(usize),
    #[error("operation needs exact coefficients, got a point-callable field")]
    NumericCoeff,
    #[error("bivector is not Poisson")]
    NotPoisson,
    #[error("no Euler convention satisfies the identity")]
    NoConventionPasses,
    #[error("evaluation at the origin singularity")]
    OriginSingularity,
    #[error("point lies on the cone f = 0 (|f| = {0:e})")]
    OnCone(f64),
    #[error("vector is not of unit length (norm {0})")]
    NotUnit(f64),
    #[error("desingularization point with lambda = 0")]
    ConePoint,
    #[error("finite-difference stencil touches the singular locus")]
    SingularStencil,
    #[error("derivative budget exceeded")]
    DerivativeBudgetExceeded,
    #[error("quadrature did not converge (estimate {estimate:e}, requested {requested:e})")]
    QuadratureNonconverged { estimate: f64, requested: f64 },
    #[error("tail bound unavailable: {0}")]
    TailBoundUnavailable(String),
    #[error("structure constants disagree between the two derivations")]
    StructureMismatch,
    #[error("polynomial degree {0} exceeds the configured cap {1}")]
    DegreeCap(u32, u32),
    #[error("modular ranks disagree: {0:?}")]
    ModularDisagreement(Vec<usize>),
    #[error("witness cochain is not closed")]
    WitnessNotClosed,
    #[error("witness cochains are not independent in cohomology")]
    WitnessNotIndependent,
    #[error("input is not differentiable to the requested order")]
    NotDifferentiableInput,
    #[error("reference norm vanishes")]
    DivisionByZeroNorm,
    #[error("exact monomial division failed")]
    DivisionFails,
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
