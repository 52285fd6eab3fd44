//! Evolution of the reduced conditional distribution `p(z, m, t)` along a
//! single photon-counting record.
//!
//! Between counts every branch decays at its own constant rate; a count
//! multiplies each branch weight by `|alpha_z|^2` and advances the branch
//! phase by `arg(alpha_z)`. Both operations act on log-weights, so the
//! state at any `(m, t)` reproduces the closed-form record weights exactly.

use crate::geometry::{BranchSet, GeometryError, OpticalGeometry, PresetKind};
use crate::lattice::{initial_z_distribution, InitialState, LatticeError, LatticeSpec};
use crate::numeric::wrap_angle;
use crate::rng::{draw_open01, trajectory_rng};
use crate::zdist::{ZDistError, ZDistribution};
use std::sync::Arc;
use thiserror::Error;

/// Default collapse threshold for outcome classification.
pub const DEFAULT_COLLAPSE_EPSILON: f64 = 1e-3;

/// Default number of geometric snapshot points between the first count and
/// the stop time.
pub const DEFAULT_SNAPSHOT_COUNT: usize = 64;

/// Relative tolerance of the waiting-time bisection.
const WAITING_TIME_RTOL: f64 = 1e-12;

/// Relative tolerance for treating two branch moduli as indistinguishable.
const MODULUS_MATCH_RTOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("dt must be nonnegative and finite, got {0}")]
    BadDt(f64),
    #[error("random number must lie strictly inside (0, 1), got {0}")]
    BadRandom(f64),
    #[error("no branch can emit a photon; a jump is impossible")]
    ImpossibleJump,
    #[error("branch set does not match the distribution grid")]
    GridMismatch,
    #[error("max_time must be nonnegative and finite, got {0}")]
    BadMaxTime(f64),
    #[error("collapse threshold must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("snapshot times in tau units need a transverse geometry")]
    TauWithoutScale,
    #[error("snapshot times must be nonnegative and finite")]
    BadSnapshotTime,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Distribution(#[from] ZDistError),
}

/// When a trajectory ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    /// Hard horizon in units of `1/kappa`.
    pub max_time: f64,
    /// Stop once the distribution is classified; `None` disables early stop.
    pub collapse_epsilon: Option<f64>,
}

impl StopRule {
    pub fn new(max_time: f64, collapse_epsilon: Option<f64>) -> Result<Self, TrajectoryError> {
        if !max_time.is_finite() || max_time < 0.0 {
            return Err(TrajectoryError::BadMaxTime(max_time));
        }
        if let Some(eps) = collapse_epsilon {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(TrajectoryError::BadEpsilon(eps));
            }
        }
        Ok(Self {
            max_time,
            collapse_epsilon,
        })
    }
}

/// Where snapshots are taken.
#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotCadence {
    /// Explicit times in units of `1/kappa`.
    Times(Vec<f64>),
    /// Explicit dimensionless times `tau = 2 |C|^2 kappa t` (transverse only).
    Taus(Vec<f64>),
    /// Geometrically spaced points between the first count and `max_time`.
    Geometric(usize),
}

impl Default for SnapshotCadence {
    fn default() -> Self {
        SnapshotCadence::Geometric(DEFAULT_SNAPSHOT_COUNT)
    }
}

/// Final classification of a conditional distribution.
///
/// A doublet is a pair of distinct grid points whose light amplitudes have
/// equal modulus, so further counting never distinguishes them: `(-z, z)`
/// at the diffraction minimum, detuning-mirrored pairs for mirror probing.
/// A dominant pair with unequal moduli is left unresolved and reported as
/// ambiguous singlet candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Singlet { z: i64 },
    Doublet { z_low: i64, z_high: i64 },
    Unresolved,
}

impl Outcome {
    pub fn is_resolved(&self) -> bool {
        !matches!(self, Outcome::Unresolved)
    }

    pub fn label(&self) -> String {
        match self {
            Outcome::Singlet { z } => format!("singlet(z={z})"),
            Outcome::Doublet { z_low, z_high } => format!("doublet(z={z_low},{z_high})"),
            Outcome::Unresolved => "unresolved".to_string(),
        }
    }
}

/// One recorded view of the conditional state.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    /// `2 |C|^2 kappa t` for transverse runs.
    pub tau: Option<f64>,
    pub counts: u64,
    /// Normalized `p(z)` over the setup grid.
    pub probabilities: Vec<f64>,
    pub mean_z: f64,
    pub fwhm: f64,
    /// Conditioned photon number `sum_z |alpha_z|^2 p(z)`.
    pub photon_number: f64,
    pub flag: Outcome,
}

/// Photon number immediately before and after one detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpFlux {
    pub before: f64,
    pub after: f64,
}

/// Everything one stochastic run produced.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream: u64,
    pub jump_times: Vec<f64>,
    pub jump_flux: Vec<JumpFlux>,
    pub snapshots: Vec<Snapshot>,
    pub outcome: Outcome,
    /// Dominant unequal-modulus pair, when classification stayed ambiguous.
    pub ambiguous_pair: Option<(i64, i64)>,
    pub stop_time: f64,
}

/// Immutable ingredients of a run, shareable across ensemble workers.
#[derive(Debug, Clone)]
pub struct TrajectorySetup {
    initial: ZDistribution,
    branches: Arc<BranchSet>,
    stop: StopRule,
    cadence: SnapshotCadence,
    tau_scale: Option<f64>,
    preset: PresetKind,
}

impl TrajectorySetup {
    /// Resolves lattice, geometry, and initial state into a runnable setup.
    pub fn build(
        lattice: &LatticeSpec,
        geometry: &OpticalGeometry,
        initial: &InitialState,
        stop: StopRule,
        cadence: SnapshotCadence,
    ) -> Result<Self, TrajectoryError> {
        let (weights, valid) = geometry.reduction_weights()?;
        if !valid {
            return Err(GeometryError::NonIntegerWeights.into());
        }
        let mut p0 = initial_z_distribution(initial, lattice, &weights)?;
        p0.renormalize();
        let branches = Arc::new(BranchSet::for_grid(&p0, geometry));
        Ok(Self {
            initial: p0,
            branches,
            stop,
            cadence,
            tau_scale: geometry.tau_scale(),
            preset: geometry.kind(),
        })
    }

    /// Assembles a setup from an explicit distribution and branch set, for
    /// callers that construct `p0` directly.
    pub fn from_parts(
        initial: ZDistribution,
        branches: Arc<BranchSet>,
        stop: StopRule,
        cadence: SnapshotCadence,
        tau_scale: Option<f64>,
        preset: PresetKind,
    ) -> Result<Self, TrajectoryError> {
        if !branches.matches_grid(&initial) {
            return Err(TrajectoryError::GridMismatch);
        }
        let mut initial = initial;
        initial.renormalize();
        Ok(Self {
            initial,
            branches,
            stop,
            cadence,
            tau_scale,
            preset,
        })
    }

    pub fn initial(&self) -> &ZDistribution {
        &self.initial
    }

    pub fn branches(&self) -> &Arc<BranchSet> {
        &self.branches
    }

    pub fn stop(&self) -> StopRule {
        self.stop
    }

    pub fn cadence(&self) -> &SnapshotCadence {
        &self.cadence
    }

    pub fn tau_scale(&self) -> Option<f64> {
        self.tau_scale
    }

    pub fn preset(&self) -> PresetKind {
        self.preset
    }

    /// Explicit snapshot times in `1/kappa` units, if the cadence is explicit.
    fn planned_times(&self) -> Result<Option<Vec<f64>>, TrajectoryError> {
        let times = match &self.cadence {
            SnapshotCadence::Times(ts) => ts.clone(),
            SnapshotCadence::Taus(taus) => {
                let scale = self.tau_scale.ok_or(TrajectoryError::TauWithoutScale)?;
                taus.iter().map(|tau| tau / scale).collect()
            }
            SnapshotCadence::Geometric(_) => return Ok(None),
        };
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(TrajectoryError::BadSnapshotTime);
        }
        let mut times = times;
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        times.dedup();
        // t = 0 is always recorded unconditionally
        times.retain(|&t| t > 0.0);
        Ok(Some(times))
    }
}

/// Result of sampling the next waiting time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaitingTime {
    Delay(f64),
    /// The drawn survival level sits below the dark-branch plateau; no
    /// photon will ever be detected again.
    NoFurtherCount,
}

/// The conditional state of one trajectory: log-weights over the `z` grid,
/// per-branch phases, the count number, and the elapsed time.
#[derive(Debug, Clone)]
pub struct ConditionalState {
    log_weights: Vec<f64>,
    phases: Vec<f64>,
    branches: Arc<BranchSet>,
    /// Cached `2 ln|alpha_z|` jump increments.
    jump_log: Vec<f64>,
    /// Cached `arg(alpha_z)` jump phase steps.
    jump_phase: Vec<f64>,
    counts: u64,
    time: f64,
}

impl ConditionalState {
    pub fn new(setup: &TrajectorySetup) -> Self {
        let branches = Arc::clone(&setup.branches);
        let jump_log = branches
            .alpha()
            .iter()
            .map(|a| a.norm_sqr().ln())
            .collect();
        let jump_phase = branches.alpha().iter().map(|a| a.arg()).collect();
        Self {
            log_weights: setup.initial.log_weights().to_vec(),
            phases: vec![0.0; setup.initial.len()],
            branches,
            jump_log,
            jump_phase,
            counts: 0,
            time: 0.0,
        }
    }

    pub fn counts(&self) -> u64 {
        self.counts
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn branches(&self) -> &BranchSet {
        &self.branches
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Normalized probabilities over the grid.
    pub fn probabilities(&self) -> Vec<f64> {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = self
            .log_weights
            .iter()
            .map(|&w| (w - max).exp())
            .collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        probs
    }

    /// The current distribution as a `ZDistribution` (normalized).
    pub fn distribution(&self) -> ZDistribution {
        let mut d = ZDistribution::new(
            self.branches.z_min(),
            self.branches.step(),
            self.log_weights.clone(),
        )
        .expect("state always carries finite weight");
        d.renormalize();
        d
    }

    /// Conditioned photon number `sum_z |alpha_z|^2 p(z)`.
    pub fn photon_number(&self) -> f64 {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        let mut flux = 0.0;
        for (i, &w) in self.log_weights.iter().enumerate() {
            if w == f64::NEG_INFINITY {
                continue;
            }
            let p = (w - max).exp();
            total += p;
            flux += p * self.branches.alpha()[i].norm_sqr();
        }
        flux / total
    }

    /// No-count evolution for a duration `dt`: every branch weight decays at
    /// its own rate and every branch phase advances. Normalization deferred.
    pub fn advance_no_count(&mut self, dt: f64) -> Result<(), TrajectoryError> {
        if !dt.is_finite() || dt < 0.0 {
            return Err(TrajectoryError::BadDt(dt));
        }
        let decay = self.branches.decay_rate();
        let phase_rate = self.branches.phase_rate();
        for i in 0..self.log_weights.len() {
            self.log_weights[i] -= decay[i] * dt;
            self.phases[i] = wrap_angle(self.phases[i] + phase_rate[i] * dt);
        }
        self.time += dt;
        self.recenter();
        Ok(())
    }

    /// Applies the detection jump: weights gain `2 ln|alpha_z|`, phases gain
    /// `arg(alpha_z)`, and the count goes up by one.
    pub fn apply_jump(&mut self) -> Result<(), TrajectoryError> {
        if self.photon_number() <= 0.0 {
            return Err(TrajectoryError::ImpossibleJump);
        }
        for i in 0..self.log_weights.len() {
            if self.log_weights[i] == f64::NEG_INFINITY {
                continue;
            }
            self.log_weights[i] += self.jump_log[i];
            self.phases[i] = wrap_angle(self.phases[i] + self.jump_phase[i]);
        }
        self.counts += 1;
        self.recenter();
        Ok(())
    }

    /// Inverts the no-count survival function at the level `r`.
    ///
    /// `S(dt) = sum_z p(z) exp(-decay_z dt)` decreases from 1 to the total
    /// dark-branch weight `S(inf)`; a draw below the plateau means no photon
    /// is ever detected again. The root is bracketed and bisected to a
    /// relative width of 1e-12.
    pub fn sample_waiting_time(&self, r: f64) -> Result<WaitingTime, TrajectoryError> {
        if !(r > 0.0 && r < 1.0) {
            return Err(TrajectoryError::BadRandom(r));
        }
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut probs = Vec::with_capacity(self.log_weights.len());
        let mut rates = Vec::with_capacity(self.log_weights.len());
        let mut total = 0.0;
        for (i, &w) in self.log_weights.iter().enumerate() {
            if w == f64::NEG_INFINITY {
                continue;
            }
            let p = (w - max).exp();
            total += p;
            probs.push(p);
            rates.push(self.branches.decay_rate()[i]);
        }
        for p in &mut probs {
            *p /= total;
        }
        let survival_floor: f64 = probs
            .iter()
            .zip(&rates)
            .filter(|(_, &rate)| rate == 0.0)
            .map(|(&p, _)| p)
            .sum();
        if r <= survival_floor {
            return Ok(WaitingTime::NoFurtherCount);
        }
        let survival = |dt: f64| -> f64 {
            probs
                .iter()
                .zip(&rates)
                .map(|(&p, &rate)| p * (-rate * dt).exp())
                .sum()
        };
        let mean_rate: f64 = probs.iter().zip(&rates).map(|(&p, &rate)| p * rate).sum();
        let mut hi = (-(r.ln()) / mean_rate).max(f64::MIN_POSITIVE);
        while survival(hi) >= r {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        while hi - lo > WAITING_TIME_RTOL * hi {
            let mid = 0.5 * (lo + hi);
            if survival(mid) >= r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(WaitingTime::Delay(0.5 * (lo + hi)))
    }

    /// Shifts all log-weights so the largest is zero. A shared shift never
    /// changes the normalized view.
    fn recenter(&mut self) {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if max.is_finite() && max != 0.0 {
            for w in &mut self.log_weights {
                *w -= max;
            }
        }
    }
}

/// Classifies a normalized distribution against the collapse threshold.
pub fn classify(
    probs: &[f64],
    branches: &BranchSet,
    epsilon: f64,
) -> (Outcome, Option<(i64, i64)>) {
    let mut first = 0usize;
    for i in 1..probs.len() {
        if probs[i] > probs[first] {
            first = i;
        }
    }
    let p1 = probs[first];
    if p1 > 1.0 - epsilon {
        return (
            Outcome::Singlet {
                z: branches.z_at(first),
            },
            None,
        );
    }
    let mut second = usize::MAX;
    for i in 0..probs.len() {
        if i == first {
            continue;
        }
        if second == usize::MAX || probs[i] > probs[second] {
            second = i;
        }
    }
    if second == usize::MAX {
        return (Outcome::Unresolved, None);
    }
    let p2 = probs[second];
    if p1 + p2 > 1.0 - epsilon && p1 > 0.5 * epsilon && p2 > 0.5 * epsilon {
        let m1 = branches.alpha()[first].norm();
        let m2 = branches.alpha()[second].norm();
        let (z_low, z_high) = {
            let (a, b) = (branches.z_at(first), branches.z_at(second));
            (a.min(b), a.max(b))
        };
        if (m1 - m2).abs() <= MODULUS_MATCH_RTOL * m1.max(m2) {
            return (Outcome::Doublet { z_low, z_high }, None);
        }
        return (Outcome::Unresolved, Some((z_low, z_high)));
    }
    (Outcome::Unresolved, None)
}

/// Runs one trajectory from the deterministic stream `(seed, stream)`.
pub fn run_trajectory(
    setup: &TrajectorySetup,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord, TrajectoryError> {
    let mut rng = trajectory_rng(seed, stream);
    let mut state = ConditionalState::new(setup);
    let stop = setup.stop;
    let horizon = stop.max_time;
    let flag_epsilon = stop.collapse_epsilon.unwrap_or(DEFAULT_COLLAPSE_EPSILON);

    let mut planned = setup.planned_times()?;
    let mut next_planned = 0usize;

    let mut snapshots = Vec::new();
    let mut jump_times = Vec::new();
    let mut jump_flux = Vec::new();
    let mut ambiguous_pair = None;

    let take = |state: &ConditionalState, snapshots: &mut Vec<Snapshot>| {
        let probs = state.probabilities();
        let dist = state.distribution();
        let (flag, _) = classify(&probs, state.branches(), flag_epsilon);
        snapshots.push(Snapshot {
            time: state.time(),
            tau: setup.tau_scale.map(|s| s * state.time()),
            counts: state.counts(),
            mean_z: dist.mean(),
            fwhm: dist.fwhm().unwrap_or(f64::NAN),
            photon_number: state.photon_number(),
            probabilities: probs,
            flag,
        });
    };

    take(&state, &mut snapshots);

    // a state that is already classified stops immediately
    let initially_done = stop.collapse_epsilon.is_some() && {
        let (outcome, pair) = classify(&state.probabilities(), state.branches(), flag_epsilon);
        ambiguous_pair = pair;
        outcome.is_resolved()
    };

    let mut stop_time = 0.0;
    if !initially_done {
        'outer: loop {
            let r = draw_open01(&mut rng);
            let jump_at = match state.sample_waiting_time(r)? {
                WaitingTime::Delay(dt) => state.time() + dt,
                WaitingTime::NoFurtherCount => f64::INFINITY,
            };
            let next_event = jump_at.min(horizon);

            // planned snapshots strictly before the next event
            if let Some(times) = &planned {
                while next_planned < times.len() && times[next_planned] < next_event {
                    let ts = times[next_planned];
                    next_planned += 1;
                    if ts >= state.time() {
                        state.advance_no_count(ts - state.time())?;
                        take(&state, &mut snapshots);
                        if stop.collapse_epsilon.is_some() {
                            let (outcome, pair) =
                                classify(&state.probabilities(), state.branches(), flag_epsilon);
                            if outcome.is_resolved() {
                                ambiguous_pair = pair;
                                stop_time = state.time();
                                break 'outer;
                            }
                        }
                    }
                }
            }

            if jump_at >= horizon {
                state.advance_no_count(horizon - state.time())?;
                stop_time = horizon;
                break;
            }

            state.advance_no_count(jump_at - state.time())?;
            let before = state.photon_number();
            state.apply_jump()?;
            let after = state.photon_number();
            jump_times.push(jump_at);
            jump_flux.push(JumpFlux { before, after });

            // the geometric cadence is anchored at the first count
            if planned.is_none() {
                if let SnapshotCadence::Geometric(count) = &setup.cadence {
                    planned = Some(geometric_times(jump_at, horizon, *count));
                }
            }

            if stop.collapse_epsilon.is_some() {
                let (outcome, pair) =
                    classify(&state.probabilities(), state.branches(), flag_epsilon);
                if outcome.is_resolved() {
                    ambiguous_pair = pair;
                    stop_time = state.time();
                    break;
                }
            }
        }
    }

    // final snapshot at the stop time
    if snapshots
        .last()
        .map(|s| s.time != state.time() || s.counts != state.counts())
        .unwrap_or(true)
    {
        take(&state, &mut snapshots);
    }

    let (outcome, pair) = classify(&state.probabilities(), state.branches(), flag_epsilon);
    if pair.is_some() {
        ambiguous_pair = pair;
    }

    Ok(TrajectoryRecord {
        seed,
        stream,
        jump_times,
        jump_flux,
        snapshots,
        outcome,
        ambiguous_pair,
        stop_time,
    })
}

/// Geometric grid of `count` points spanning `[t_first, t_end]`.
fn geometric_times(t_first: f64, t_end: f64, count: usize) -> Vec<f64> {
    if count == 0 || t_end <= t_first || t_first <= 0.0 {
        return vec![t_end];
    }
    if count == 1 {
        return vec![t_end];
    }
    let ratio = t_end / t_first;
    (0..count)
        .map(|i| t_first * ratio.powf(i as f64 / (count - 1) as f64))
        .collect()
}
