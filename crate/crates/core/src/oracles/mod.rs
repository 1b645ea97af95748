//! Reference implementations that check the main code paths by an
//! independent route.

pub mod descent;
pub mod equivalence;
pub mod finite_diff;
pub mod lasso;
pub mod nuclear;
pub mod prediction_gap;
pub mod rates;

pub use descent::{minimize_gd, GdOptions, GdResult};
pub use equivalence::{group_equivalence, lasso_equivalence, nuclear_equivalence};
pub use finite_diff::{
    finite_diff_gradient, finite_diff_jacobian, finite_diff_loss_grad, finite_diff_loss_hess_diag,
    max_relative_error, ErrorReport,
};
pub use lasso::{lasso_coordinate_descent, lasso_objective, lasso_weights};
pub use nuclear::{factored_penalty_minimize, nuclear_norm, nuclear_penalty_closed_form};
pub use prediction_gap::{prediction_gap_probe, PredictionGaps};
pub use rates::{fit_rate, log_spaced, RateFit};
