//! Goodness of fit, probabilities, odds ratios, log-linear decomposition and
//! model comparison for fitted models.

mod compare;
mod decompose;
mod gof;
mod odds;

pub use compare::{compare_models, ComparisonReport, ComparisonRow};
pub use decompose::{decompose_loglinear, LambdaTerm, LogLinearDecomposition};
pub use gof::{chi2_survival, g_squared, GoodnessOfFit};
pub use odds::{
    conditional_missing_prob, joint_probabilities, marginal_odds_ratio, odds_ratio_variance, OddsRatioEstimate,
    VarianceEstimate, VarianceMethod,
};
