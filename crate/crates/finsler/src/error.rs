//! Error type shared by all geometry operations.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    /// A chart point left the declared domain (y = 0, box breach, or a
    /// non-finite value produced by a model-specific singularity).
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// The metric tensor failed the regularity requirement.
    #[error("regularity failure: smallest singular value {smallest_singular_value:.3e} below floor {floor:.1e}")]
    RegularityFailure {
        smallest_singular_value: f64,
        floor: f64,
    },

    /// A custom spray or projective factor failed its homogeneity certificate.
    #[error("homogeneity certificate failure: Euler residual {residual:.3e} exceeds {tolerance:.1e}")]
    HomogeneityCertificate { residual: f64, tolerance: f64 },

    /// An operation that requires the geodesic spray of the model was handed
    /// a spray that does not conserve F.
    #[error("spray is not geodesic for the model: |S(F)| = {residual:.3e}")]
    NotGeodesic { residual: f64 },

    /// The Jacobi endomorphism is not g-symmetric, so the eigen analysis that
    /// assumes a variational spray does not apply.
    #[error("not metrizable input: g-symmetry defect {defect:.3e} exceeds {tolerance:.1e}")]
    NotMetrizableInput { defect: f64, tolerance: f64 },

    /// The reparameterization ODE produced dt~/dt <= 0.
    #[error("orientation reversal at t = {t}: dt~/dt = {dttilde}")]
    OrientationReversal { t: f64, dttilde: f64 },

    /// A precondition on plain arguments was violated (bad multi-index,
    /// mismatched dimensions, out-of-range constants).
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
