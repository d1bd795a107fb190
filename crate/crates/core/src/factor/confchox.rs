//! COnfCHOX: 2.5D Cholesky on the COnfLUX schedule.
//!
//! Pivots are the diagonal blocks in order, so there is no tournament and
//! no pivot-row reduction; `A01` is the transpose of the reduced panel and
//! the trailing update only touches the lower triangle.

use crate::matrix::DenseMatrix;

use super::conflux::run;
use super::{FactorConfig, FactorError, FactorKind, FactorResult};

/// `A = L Lᵀ` for symmetric positive definite `A`. Only the lower triangle
/// of `A` is read.
pub fn confchox(a: &DenseMatrix, cfg: &FactorConfig) -> Result<FactorResult, FactorError> {
    run(a, cfg, FactorKind::Cholesky)
}
