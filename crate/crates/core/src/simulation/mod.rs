//! Truth-known prediction tasks: synthetic predictor landscapes, a
//! PCA-based Gaussian virtual response, sampling designs and the scenario
//! and catalogue runners feeding the calibration sweep.

mod catalogue;
mod fields;
mod pca;
mod response;
mod sampling;
mod scenario;

pub use catalogue::{run_catalogue, CatalogueConfig, CatalogueResult, CvKind, DesignKind};
pub use fields::{generate_predictor_stack, FieldSpec, ParentLink, PredictorRecipe, MIN_PREDICTORS};
pub use pca::{pca_first_two, PcaResult};
pub use response::{gaussian_response, raw_gaussian_response, Combination, ResponseSpec};
pub use sampling::{clustered_design, sample_clustered, sample_random, ClusterDesign};
pub use scenario::{run_scenario, CvStrategy, SamplingDesign, ScenarioResult, ScenarioSeeds, ScenarioSpec};
