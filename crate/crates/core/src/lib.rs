//! Nonlinear filtering of diffusions with correlated noise by separation of
//! variables: a Hermite–Galerkin reduction of the Zakai equation in space, a
//! Wiener-chaos expansion in time precomputed into propagator tables, and a
//! cheap online recursion that turns each observation window into a
//! matrix-vector product.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`, see
//! [`scalar::Real`]). The aliases below fix it to `f64`; the `f32` module
//! mirrors them in single precision.

pub mod chaos_propagator;
pub mod error;
pub mod filter_runtime;
pub mod galerkin;
pub mod hermite_space;
pub mod linalg;
pub mod model_sim;
pub mod models;
pub mod multiindex;
pub mod quadrature;
pub mod reference;
pub mod scalar;

pub use error::{Error, Result};
pub use multiindex::{CharacteristicSet, MultiIndex};
pub use scalar::Real;

pub type Matrix = linalg::Matrix<f64>;
pub type SpatialBasis = hermite_space::SpatialBasis<f64>;
pub type QuadratureGrid = hermite_space::QuadratureGrid<f64>;
pub type FilterModel = galerkin::FilterModel<f64>;
pub type GalerkinSystem = galerkin::GalerkinSystem<f64>;
pub type TemporalBasis = chaos_propagator::TemporalBasis<f64>;
pub type PropagatorTable = chaos_propagator::PropagatorTable<f64>;
pub type ErrorBudget = chaos_propagator::ErrorBudget<f64>;
pub type FilterState = filter_runtime::FilterState<f64>;
pub type ChaosFilter = filter_runtime::ChaosFilter<f64>;
pub type ObservationWindow = filter_runtime::ObservationWindow<f64>;
pub type ObservationRecord = filter_runtime::ObservationRecord<f64>;
pub type LinearModel = reference::LinearModel<f64>;
pub type BuiltinModel = models::BuiltinModel<f64>;
pub type SimulationConfig = model_sim::SimulationConfig<f64>;
pub type XiValues = multiindex::XiValues<f64>;

/// Single-precision aliases.
pub mod f32 {
    pub type Matrix = crate::linalg::Matrix<f32>;
    pub type SpatialBasis = crate::hermite_space::SpatialBasis<f32>;
    pub type QuadratureGrid = crate::hermite_space::QuadratureGrid<f32>;
    pub type FilterModel = crate::galerkin::FilterModel<f32>;
    pub type GalerkinSystem = crate::galerkin::GalerkinSystem<f32>;
    pub type TemporalBasis = crate::chaos_propagator::TemporalBasis<f32>;
    pub type PropagatorTable = crate::chaos_propagator::PropagatorTable<f32>;
    pub type ErrorBudget = crate::chaos_propagator::ErrorBudget<f32>;
    pub type FilterState = crate::filter_runtime::FilterState<f32>;
    pub type ChaosFilter = crate::filter_runtime::ChaosFilter<f32>;
    pub type ObservationWindow = crate::filter_runtime::ObservationWindow<f32>;
    pub type ObservationRecord = crate::filter_runtime::ObservationRecord<f32>;
    pub type LinearModel = crate::reference::LinearModel<f32>;
    pub type BuiltinModel = crate::models::BuiltinModel<f32>;
    pub type SimulationConfig = crate::model_sim::SimulationConfig<f32>;
    pub type XiValues = crate::multiindex::XiValues<f32>;
}
