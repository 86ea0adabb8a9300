//! Concrete [`SplitModel`](crate::slrt::SplitModel) implementations.

mod factor;
mod gaussian;

pub use factor::{
    factor_mle, factor_scenario, fit_one_factor, sample_second_moment, FactorFit, FactorModel,
    FitOptions, OneFactorFit, TwoFactorAlternative,
};
pub use gaussian::{gaussian_mle, GaussianMeanModel};
