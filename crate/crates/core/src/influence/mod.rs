//! Directed influence between cities discovered with lagged Granger tests,
//! plus the scores, rankings, metadata correlations and windowed dynamics
//! built on the resulting tensor.

mod correlate;
mod dynamics;
mod granger;
mod scores;
mod tensor;
mod world;

pub use correlate::{correlate_metadata, CorrelationReport, Property, PropertyCorrelation, MIN_DIRECTION_EDGES};
pub use dynamics::{influence_dynamics, InfluenceDynamics};
pub use granger::{benjamini_hochberg, granger_test, GrangerConfig, GrangerOutcome, LagCorrection, LagMode};
pub use scores::{aggregate_regions, influence_scores, rank_cities, InfluenceScores, RankBy, Region, RegionScore};
pub use tensor::{discover_tensor, DiscoveryReport, InfluenceEdge, InfluenceTensor, SkippedPair};
pub use world::{city_to_world, WorldEntry, WorldInfluence};
