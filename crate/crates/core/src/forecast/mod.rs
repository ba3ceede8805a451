//! Forecast-time constraint systems, predictive sampling, and rolling
//! updates over a fleet of buses.

mod fleet;
mod predictive;
mod system;

pub use fleet::{BusState, FleetState};
pub use predictive::{
    forecast_pair, sample_predictive, trip_time_distribution, ConditionalMixture, MarginalDensity,
    PredictiveDistribution, Target, TargetSummary, QUANTILE_LEVELS,
};
pub use system::{build_forecast_constraints, ForecastOptions, ForecastQuery, ForecastSystem, LeadingForecast, LeadingMode};
