//! Orchestration of the three run modes from a parsed configuration.

use crate::config::{ConfigError, OracleSection, RunConfig};
use crate::ensemble::{ensemble_run, EnsembleSummary};
use crate::oracle::{FullConditionalState, OracleError};
use crate::rng::trajectory_rng;
use crate::trajectory::{
    run_trajectory, ConditionalState, TrajectoryError, TrajectoryRecord, TrajectorySetup,
};
use rand::Rng;
use thiserror::Error;

/// Agreement tolerance between the reduced engine and the oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Runtime(String),
}

/// A prepared single-trajectory run.
pub struct TrajectoryRun {
    pub setup: TrajectorySetup,
    pub record: TrajectoryRecord,
    /// `|C|^2` for transverse probing, for reporting photon numbers
    /// relative to the single-atom scale.
    pub c_squared: Option<f64>,
}

pub fn trajectory_mode(config: &RunConfig) -> Result<TrajectoryRun, RunError> {
    let (_, geometry, setup) = config.trajectory_setup()?;
    let record = run_trajectory(&setup, config.run.seed, config.run.stream)?;
    let c_squared = geometry
        .tau_scale()
        .map(|_| geometry.transverse_scale().norm_sqr());
    Ok(TrajectoryRun {
        setup,
        record,
        c_squared,
    })
}

/// A prepared ensemble run.
pub struct EnsembleRun {
    pub setup: TrajectorySetup,
    pub summary: EnsembleSummary,
}

pub fn ensemble_mode(config: &RunConfig) -> Result<EnsembleRun, RunError> {
    let n = config
        .ensemble
        .as_ref()
        .ok_or(ConfigError::Key {
            key: "ensemble",
            reason: "section required for run-ensemble".into(),
        })?
        .trajectories;
    let (_, _, setup) = config.trajectory_setup()?;
    let summary = ensemble_run(&setup, n, config.run.seed)?;
    Ok(EnsembleRun { setup, summary })
}

/// Result of comparing the reduced engine against the full oracle along
/// shared random records.
#[derive(Debug, Clone)]
pub struct OracleCheckReport {
    pub records: usize,
    pub checkpoints_per_record: usize,
    pub comparisons: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Replays random detection records on both the reduced engine and the
/// configuration-space oracle and reports the largest marginal deviation.
pub fn oracle_check_mode(config: &RunConfig) -> Result<OracleCheckReport, RunError> {
    let section = config.oracle.clone().unwrap_or_default();
    let lattice = config.lattice_spec()?;
    let geometry = config.build_geometry(&lattice)?;
    let stop = config.stop_rule(&geometry)?;
    let setup = TrajectorySetup::build(
        &lattice,
        &geometry,
        &config.initial_state(),
        stop,
        config.cadence(),
    )
    .map_err(RunError::Trajectory)?;
    let oracle = FullConditionalState::new(
        &lattice,
        &geometry,
        &config.initial_state(),
        section.enumeration_cap,
    )?;
    let (weights, _) = geometry
        .reduction_weights()
        .map_err(TrajectoryError::from)?;

    let mut rng = trajectory_rng(config.run.seed, config.run.stream);
    let max_dev = compare_records(&setup, &oracle, &weights, &section, &mut rng)?;
    Ok(OracleCheckReport {
        records: section.records,
        checkpoints_per_record: section.checkpoints,
        comparisons: section.records * section.checkpoints,
        max_deviation: max_dev,
        tolerance: ORACLE_TOLERANCE,
        pass: max_dev <= ORACLE_TOLERANCE,
    })
}

/// The shared-record comparison engine behind `oracle_check_mode`.
pub fn compare_records(
    setup: &TrajectorySetup,
    oracle: &FullConditionalState,
    weights: &[i64],
    section: &OracleSection,
    rng: &mut impl Rng,
) -> Result<f64, RunError> {
    let horizon = section.horizon;
    let mut max_dev = 0.0f64;
    for _ in 0..section.records {
        let m = rng.random_range(0..=section.max_counts) as usize;
        let mut jump_times: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..horizon)).collect();
        jump_times.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let mut checkpoints: Vec<f64> =
            (0..section.checkpoints).map(|_| rng.random_range(0.0..horizon)).collect();
        checkpoints.sort_by(|a, b| a.partial_cmp(b).expect("finite"));

        let mut engine = ConditionalState::new(setup);
        let mut applied = 0usize;
        let mut oracle_state = oracle.clone();
        for &tc in &checkpoints {
            while applied < jump_times.len() && jump_times[applied] <= tc {
                engine.advance_no_count(jump_times[applied] - engine.time())?;
                engine.apply_jump()?;
                applied += 1;
            }
            engine.advance_no_count(tc - engine.time())?;
            oracle_state.evolve_to(applied as u64, tc);
            let engine_dist = engine.distribution();
            let oracle_dist = oracle_state.z_marginal(weights)?;
            let engine_probs = engine_dist.probabilities();
            let oracle_probs = oracle_dist.probabilities();
            for (i, &p_engine) in engine_probs.iter().enumerate() {
                let z = engine_dist.z_at(i);
                let p_oracle = oracle_dist
                    .index_of(z)
                    .map(|j| oracle_probs[j])
                    .unwrap_or(0.0);
                max_dev = max_dev.max((p_engine - p_oracle).abs());
            }
            for (j, &p_oracle) in oracle_probs.iter().enumerate() {
                let z = oracle_dist.z_at(j);
                if engine_dist.index_of(z).is_none() {
                    max_dev = max_dev.max(p_oracle);
                }
            }
        }
    }
    Ok(max_dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn oracle_check_passes_on_a_small_maximum() {
        let config = parse_config(
            r#"
            [lattice]
            atoms = 3
            sites = 3
            illuminated = 2

            [geometry]
            preset = "diffraction_maximum"
            detuning = 0.3

            [run]
            seed = 11
            max_time = 4.0

            [oracle]
            records = 10
            checkpoints = 5
        "#,
        )
        .unwrap();
        let report = oracle_check_mode(&config).unwrap();
        assert!(report.pass, "max deviation {}", report.max_deviation);
        assert_eq!(report.comparisons, 50);
    }

    #[test]
    fn oracle_check_mirror_probe() {
        let config = parse_config(
            r#"
            [lattice]
            atoms = 3
            sites = 3
            illuminated = 2

            [geometry]
            preset = "mirror_probe"
            probe_amplitude = 0.0
            mirror_drive = [0.7, 0.1]
            coupling_u11 = 0.4
            detuning = 0.5

            [run]
            seed = 12
            max_time = 4.0

            [oracle]
            records = 10
            checkpoints = 5
        "#,
        )
        .unwrap();
        let report = oracle_check_mode(&config).unwrap();
        assert!(report.pass, "max deviation {}", report.max_deviation);
    }
}
