use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("consistency check failed: {what} (residual {residual:.3e})")]
    Consistency { what: String, residual: f64 },
    #[error("ambiguous steady state: {zero_modes} zero modes and no initial block given")]
    Ambiguity { zero_modes: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}); the problem is too stiff for the explicit stepper, use the stationary solver or the implicit integrator")]
    Stiffness { t: f64, h: f64 },
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("Fock cutoff breached: mean occupation {mean:.3} with n_cut = {n_cut}")]
    Cutoff { mean: f64, n_cut: usize },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("layout error: {0}")]
    Layout(String),
    #[error("positivity violated: minimum eigenvalue {min_eig:.3e}")]
    Positivity { min_eig: f64 },
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("singular spectrum: eigenvalue {0:.3e} is numerically zero")]
    Singularity(f64),
    #[error("search failed: {0}")]
    Search(String),
    #[error("mapping outside its validity region: {0}")]
    Validity(String),
}

pub type Result<T> = std::result::Result<T, Error>;
