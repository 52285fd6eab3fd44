//! Simulator for measurement-induced collapse of lattice atom-number
//! statistics under continuous photodetection of cavity light.
//!
//! A lattice gas scattering light into a leaky cavity entangles its Fock
//! configurations with coherent light amplitudes. Counting the leaked
//! photons conditions the atomic state: between counts every branch decays
//! at its own rate, each count multiplies branches by their amplitude.
//! Because the amplitude depends on a configuration only through one scalar
//! statistic `z`, the conditional state reduces to a distribution `p(z, m, t)`
//! that this crate evolves exactly, in log space.
//!
//! - [`lattice`]: Fock configurations, initial states, and `p0(z)`.
//! - [`geometry`]: probe geometries (a strategy registry of presets) and the
//!   per-branch amplitudes and rates.
//! - [`trajectory`]: exact waiting-time sampling, jump application, outcome
//!   classification, seeded single runs.
//! - [`ensemble`]: deterministic parallel ensembles and outcome statistics.
//! - [`oracle`]: full configuration-space evolution for small lattices,
//!   ground truth for the reduced engine.
//! - [`config`], [`run`], [`output`]: TOML configuration, run orchestration,
//!   and file emission for the CLI.

pub mod config;
pub mod ensemble;
pub mod geometry;
pub mod lattice;
pub mod numeric;
pub mod oracle;
pub mod output;
pub mod rng;
pub mod run;
pub mod trajectory;
pub mod zdist;

pub use config::{parse_config, ConfigError, RunConfig};
pub use ensemble::{ensemble_run, EnsembleSummary};
pub use geometry::{
    lookup_preset, BranchSet, GeometryParams, OpticalGeometry, PresetKind, ProbePreset,
};
pub use lattice::{
    enumerate_configurations, initial_z_distribution, sf_log_probability, FockConfiguration,
    InitialState, LatticeSpec,
};
pub use oracle::{DetectionRecord, FullConditionalState};
pub use trajectory::{
    run_trajectory, ConditionalState, Outcome, Snapshot, SnapshotCadence, StopRule,
    TrajectoryRecord, TrajectorySetup, WaitingTime,
};
pub use zdist::ZDistribution;
