//! Closed-form per-processor communication volume of published LU and
//! Cholesky schedules, for comparison against measured runs.
//!
//! Asymptotic lower-order terms are evaluated with coefficient 1, so
//! [`ModelValue::full`] is approximate for every model except the two lower
//! bounds.

use std::fmt;
use std::str::FromStr;

use crate::bounds::{cholesky_bound, lu_bound};

/// Column header of [`models_csv`].
pub const CSV_HEADER: &str = "model,N,P,M,words";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelId {
    Mkl2d,
    Slate2d,
    Candmc,
    Capital,
    Conflux,
    Confchox,
    LowerBoundLu,
    LowerBoundChol,
}

impl ModelId {
    pub const ALL: [ModelId; 8] = [
        ModelId::Mkl2d,
        ModelId::Slate2d,
        ModelId::Candmc,
        ModelId::Capital,
        ModelId::Conflux,
        ModelId::Confchox,
        ModelId::LowerBoundLu,
        ModelId::LowerBoundChol,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ModelId::Mkl2d => "mkl2d",
            ModelId::Slate2d => "slate2d",
            ModelId::Candmc => "candmc",
            ModelId::Capital => "capital",
            ModelId::Conflux => "conflux",
            ModelId::Confchox => "confchox",
            ModelId::LowerBoundLu => "lowerbound-lu",
            ModelId::LowerBoundChol => "lowerbound-chol",
        }
    }

    /// True for the bounds, which are exact expressions.
    pub fn is_bound(self) -> bool {
        matches!(self, ModelId::LowerBoundLu | ModelId::LowerBoundChol)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown model '{0}' (expected one of mkl2d, slate2d, candmc, capital, conflux, confchox, lowerbound-lu, lowerbound-chol)")]
pub struct UnknownModel(pub String);

impl FromStr for ModelId {
    type Err = UnknownModel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelId::ALL.into_iter().find(|m| m.tag() == s).ok_or_else(|| UnknownModel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelValue {
    pub leading: f64,
    /// Leading term plus lower-order terms.
    pub full: f64,
    /// Lower-order terms were given only asymptotically.
    pub approximate: bool,
}

/// Words moved per processor by model `id` for an `N x N` matrix on `P`
/// processors with `M` words each.
pub fn model_words(id: ModelId, n: f64, p: f64, m: f64) -> ModelValue {
    let sq = m.sqrt();
    let cube = n.powi(3) / (p * sq);
    let (leading, full) = match id {
        ModelId::Mkl2d | ModelId::Slate2d => {
            let lead = n * n / p.sqrt();
            (lead, lead + n * n / p)
        }
        ModelId::Candmc => (5.0 * cube, 5.0 * cube + n * n / (p * sq)),
        ModelId::Capital => (45.0 / 8.0 * cube, 45.0 / 8.0 * cube + n * n / (p * sq)),
        ModelId::Conflux | ModelId::Confchox => (cube, cube + n * n / (p * sq)),
        ModelId::LowerBoundLu => (2.0 / 3.0 * cube, lu_bound(n, m, p)),
        ModelId::LowerBoundChol => (cube / 3.0, cholesky_bound(n, m, p)),
    };
    ModelValue { leading, full, approximate: !id.is_bound() }
}

/// Warning when `M` lies outside `[N^2/P, N^2/P^(2/3)]`.
pub fn regime_warning(n: f64, p: f64, m: f64) -> Option<String> {
    crate::bounds::regime_warning(n, m, p)
}

/// One CSV row per model and point; `words` is the full value.
pub fn models_csv(ids: &[ModelId], points: &[(f64, f64, f64)]) -> String {
    let mut out = format!("# schema_version=1\n{CSV_HEADER}\n");
    for &(n, p, m) in points {
        for &id in ids {
            let v = model_words(id, n, p, m);
            out.push_str(&format!("{id},{n},{p},{m},{}\n", v.full));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const N: f64 = 4096.0;
    const P: f64 = 64.0;
    const M: f64 = 1_048_576.0;

    #[test]
    fn leading_terms() {
        assert_eq!(model_words(ModelId::Conflux, N, P, M).leading, 1_048_576.0);
        assert_eq!(model_words(ModelId::Mkl2d, N, P, M).leading, 2_097_152.0);
        assert_eq!(model_words(ModelId::Candmc, N, P, M).leading, 5_242_880.0);
        assert_eq!(model_words(ModelId::Capital, N, P, M).leading, 5_898_240.0);
        assert_eq!(model_words(ModelId::LowerBoundLu, N, P, M).leading.round(), 699_051.0);
    }

    #[test]
    fn tags_round_trip() {
        for id in ModelId::ALL {
            assert_eq!(id.tag().parse::<ModelId>().unwrap(), id);
        }
        assert!("scalapack".parse::<ModelId>().is_err());
    }

    #[test]
    fn conflux_over_bound_tends_to_three_halves() {
        let r = |n: f64| model_words(ModelId::Conflux, n, 64.0, M).full / model_words(ModelId::LowerBoundLu, n, 64.0, M).full;
        assert!((r(1e7) - 1.5).abs() < 1e-3);
    }

    #[test]
    fn csv_shape() {
        let csv = models_csv(&[ModelId::Conflux, ModelId::Mkl2d], &[(N, P, M)]);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[1], CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("conflux,4096,64,1048576,"));
    }
}
