//! Brute-force evolution of the full configuration-space conditional state,
//! the ground truth for the z-reduced engine on small lattices.
//!
//! Every Fock configuration is paired with its steady-state amplitude from
//! the full Lorentzian (both `D_10` and `D_11`, no neglect). A record of
//! `m` counts up to time `t` scales each amplitude by
//! `alpha_q^m exp(Phi_q(t))`, independent of the individual jump times.

use crate::geometry::OpticalGeometry;
use crate::lattice::{
    dense_to_distribution, enumerate_configurations, grid_step, sf_log_probability,
    FockConfiguration, InitialState, LatticeError, LatticeSpec,
};
use crate::numeric::{angle_distance, wrap_angle};
use crate::rng::{draw_open01, trajectory_rng};
use crate::zdist::{ZDistError, ZDistribution};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Distribution(#[from] ZDistError),
    #[error("record jump times must be sorted, nonnegative, and within the horizon")]
    BadRecord,
    #[error("z sector at {z} carries no weight")]
    EmptySector { z: i64 },
    #[error("phases within the z={z} sector spread over {spread:.3e} rad; sector phase undefined")]
    PhaseSpread { z: i64, spread: f64 },
    #[error("dt {dt} too coarse: dt * max decay rate = {product:.3} exceeds 0.1")]
    DtTooCoarse { dt: f64, product: f64 },
    #[error("horizon must be positive and finite")]
    BadHorizon,
}

/// A photon-counting record: when the detector clicked, and how far the
/// no-count evolution ran.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub jump_times: Vec<f64>,
    pub horizon: f64,
}

impl DetectionRecord {
    pub fn new(jump_times: Vec<f64>, horizon: f64) -> Result<Self, OracleError> {
        if !horizon.is_finite() || horizon < 0.0 {
            return Err(OracleError::BadHorizon);
        }
        let sorted = jump_times.windows(2).all(|w| w[0] <= w[1]);
        let in_range = jump_times
            .iter()
            .all(|t| t.is_finite() && *t >= 0.0 && *t <= horizon);
        if !sorted || !in_range {
            return Err(OracleError::BadRecord);
        }
        Ok(Self {
            jump_times,
            horizon,
        })
    }

    pub fn counts(&self) -> u64 {
        self.jump_times.len() as u64
    }
}

/// The conditional state over all Fock configurations, stored as
/// per-configuration log-magnitudes and phases.
#[derive(Debug, Clone)]
pub struct FullConditionalState {
    configs: Vec<FockConfiguration>,
    alpha: Vec<Complex64>,
    decay_rate: Vec<f64>,
    phase_rate: Vec<f64>,
    initial_log_mag: Vec<f64>,
    log_mag: Vec<f64>,
    phase: Vec<f64>,
    counts: u64,
    time: f64,
}

impl FullConditionalState {
    pub fn new(
        lattice: &LatticeSpec,
        geometry: &OpticalGeometry,
        initial: &InitialState,
        cap: u64,
    ) -> Result<Self, OracleError> {
        initial.validate(lattice)?;
        let configs = enumerate_configurations(lattice, cap)?;
        let kappa = geometry.kappa();
        let mut alpha = Vec::with_capacity(configs.len());
        let mut decay_rate = Vec::with_capacity(configs.len());
        let mut phase_rate = Vec::with_capacity(configs.len());
        for config in &configs {
            let mut d10 = Complex64::new(0.0, 0.0);
            let mut d11 = 0.0;
            for (j, &q) in config.occupations().iter().enumerate() {
                d10 += geometry.mode_products_10()[j] * q as f64;
                d11 += geometry.mode_products_11()[j] * q as f64;
            }
            let a = geometry.full_alpha(d10, d11);
            alpha.push(a);
            decay_rate.push(2.0 * a.norm_sqr() * kappa);
            phase_rate.push(
                (geometry.mirror_drive() * a.conj()
                    - Complex64::i()
                        * geometry.coupling_u10()
                        * geometry.probe_amplitude()
                        * d10
                        * a.conj())
                .im,
            );
        }
        let initial_log_mag: Vec<f64> = match initial {
            InitialState::Superfluid => configs
                .iter()
                .map(|c| 0.5 * sf_log_probability(c))
                .collect(),
            InitialState::Mott => {
                let fill = lattice.n_atoms() / lattice.n_sites() as u64;
                configs
                    .iter()
                    .map(|c| {
                        if c.occupations().iter().all(|&q| q == fill) {
                            0.0
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect()
            }
            InitialState::Custom(components) => configs
                .iter()
                .map(|c| {
                    components
                        .iter()
                        .find(|(config, _)| config == c)
                        .map(|(_, w)| 0.5 * w.ln())
                        .unwrap_or(f64::NEG_INFINITY)
                })
                .collect(),
        };
        let log_mag = initial_log_mag.clone();
        let phase = vec![0.0; configs.len()];
        Ok(Self {
            configs,
            alpha,
            decay_rate,
            phase_rate,
            initial_log_mag,
            log_mag,
            phase,
            counts: 0,
            time: 0.0,
        })
    }

    pub fn configurations(&self) -> &[FockConfiguration] {
        &self.configs
    }

    pub fn alpha(&self) -> &[Complex64] {
        &self.alpha
    }

    pub fn counts(&self) -> u64 {
        self.counts
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn log_magnitudes(&self) -> &[f64] {
        &self.log_mag
    }

    pub fn phases(&self) -> &[f64] {
        &self.phase
    }

    /// Closed-form state after `m` counts at time `t`: the amplitudes only
    /// depend on the record through `(m, t)`.
    pub fn evolve_to(&mut self, counts: u64, time: f64) {
        let m = counts as f64;
        for i in 0..self.configs.len() {
            let a = self.alpha[i];
            // m = 0 leaves dark branches untouched; 0 * ln(0) is undefined
            let jump_term = if counts == 0 {
                0.0
            } else {
                m * a.norm_sqr().ln() * 0.5
            };
            self.log_mag[i] =
                self.initial_log_mag[i] + jump_term - 0.5 * self.decay_rate[i] * time;
            self.phase[i] = wrap_angle(m * a.arg() + self.phase_rate[i] * time);
        }
        self.counts = counts;
        self.time = time;
    }

    /// Applies a detection record: `m = record.counts()` jumps, evolved to
    /// the record horizon.
    pub fn oracle_evolve(&mut self, record: &DetectionRecord) {
        self.evolve_to(record.counts(), record.horizon);
    }

    /// Normalized configuration probabilities `|amplitude|^2`.
    pub fn probabilities(&self) -> Vec<f64> {
        let max = self
            .log_mag
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = self
            .log_mag
            .iter()
            .map(|&lm| (2.0 * (lm - max)).exp())
            .collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        probs
    }

    /// Conditioned photon number `sum_q p_q |alpha_q|^2`.
    pub fn photon_number(&self) -> f64 {
        self.probabilities()
            .iter()
            .zip(&self.alpha)
            .map(|(p, a)| p * a.norm_sqr())
            .sum()
    }

    /// Marginal distribution of `z = sum_j w_j q_j`.
    pub fn z_marginal(&self, weights: &[i64]) -> Result<ZDistribution, OracleError> {
        let n = self
            .configs
            .first()
            .map(|c| c.total())
            .unwrap_or_default() as i64;
        let w_min = *weights.iter().min().expect("nonempty weights");
        let w_max = *weights.iter().max().expect("nonempty weights");
        let z_min = n * w_min;
        let span = (n * (w_max - w_min)) as usize + 1;
        let probs = self.probabilities();
        let mut linear = vec![0.0f64; span];
        for (config, p) in self.configs.iter().zip(&probs) {
            let z = config.z_statistic(weights);
            linear[(z - z_min) as usize] += p;
        }
        let dense: Vec<f64> = linear.iter().map(|&p| p.ln()).collect();
        Ok(dense_to_distribution(z_min, grid_step(weights), dense)?)
    }

    /// Relative phase between the `z_plus` and `z_minus` sectors.
    ///
    /// Every finite-weight configuration inside a sector must carry the same
    /// phase (within 1e-9 circular distance), otherwise the sector phase is
    /// ambiguous and an error is returned.
    pub fn superposition_phase(
        &self,
        weights: &[i64],
        z_plus: i64,
        z_minus: i64,
    ) -> Result<f64, OracleError> {
        let sector_phase = |z: i64| -> Result<f64, OracleError> {
            let mut best: Option<(f64, f64)> = None; // (log_mag, phase)
            for (i, config) in self.configs.iter().enumerate() {
                if config.z_statistic(weights) != z || self.log_mag[i] == f64::NEG_INFINITY {
                    continue;
                }
                match best {
                    Some((lm, _)) if lm >= self.log_mag[i] => {}
                    _ => best = Some((self.log_mag[i], self.phase[i])),
                }
            }
            let (_, reference) = best.ok_or(OracleError::EmptySector { z })?;
            let mut spread = 0.0f64;
            for (i, config) in self.configs.iter().enumerate() {
                if config.z_statistic(weights) != z || self.log_mag[i] == f64::NEG_INFINITY {
                    continue;
                }
                spread = spread.max(angle_distance(self.phase[i], reference));
            }
            if spread > 1e-9 {
                return Err(OracleError::PhaseSpread { z, spread });
            }
            Ok(reference)
        };
        let plus = sector_phase(z_plus)?;
        let minus = sector_phase(z_minus)?;
        Ok(wrap_angle(plus - minus))
    }

    /// Common purity of the reduced atom and light states.
    ///
    /// For a pure joint state both reduced purities coincide:
    /// `sum_{q,q'} p_q p_q' exp(-|alpha_q - alpha_q'|^2)`. It reaches 1
    /// exactly when all surviving branches share one light amplitude.
    pub fn reduced_purity(&self) -> f64 {
        let probs = self.probabilities();
        let mut purity = 0.0;
        for (i, &pi) in probs.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for (j, &pj) in probs.iter().enumerate() {
                if pj == 0.0 {
                    continue;
                }
                let d = self.alpha[i] - self.alpha[j];
                purity += pi * pj * (-d.norm_sqr()).exp();
            }
        }
        purity
    }

    /// Literal fixed-step sampler: each step of `dt` detects a photon when a
    /// uniform draw falls below `flux * dt`, where the flux is the detection
    /// rate `2 kappa <n> = sum_q p_q decay_rate_q` of the current state.
    /// Cross-validation for the exact waiting-time inversion; requires
    /// `dt * max decay rate <= 0.1`.
    pub fn fixed_dt_sampler(
        &self,
        dt: f64,
        seed: u64,
        stream: u64,
        horizon: f64,
    ) -> Result<DetectionRecord, OracleError> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(OracleError::BadHorizon);
        }
        let max_rate = self
            .decay_rate
            .iter()
            .zip(&self.log_mag)
            .filter(|(_, &lm)| lm != f64::NEG_INFINITY)
            .map(|(&r, _)| r)
            .fold(0.0f64, f64::max);
        if dt * max_rate > 0.1 {
            return Err(OracleError::DtTooCoarse {
                dt,
                product: dt * max_rate,
            });
        }
        let mut rng = trajectory_rng(seed, stream);
        // linear branch probabilities, renormalized every step; the no-count
        // factor per step is constant so it is precomputed per branch
        let max_lm = self
            .log_mag
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = self
            .log_mag
            .iter()
            .map(|&lm| (2.0 * (lm - max_lm)).exp())
            .collect();
        let no_count: Vec<f64> = self.decay_rate.iter().map(|r| (-r * dt).exp()).collect();
        let jump_factor: Vec<f64> = self.alpha.iter().map(|a| a.norm_sqr()).collect();
        let mut time = self.time;
        let mut jump_times = Vec::new();
        loop {
            let t_next = time + dt;
            if t_next > self.time + horizon {
                break;
            }
            let mut total = 0.0;
            let mut rate = 0.0;
            for (i, &w) in weights.iter().enumerate() {
                total += w;
                rate += w * self.decay_rate[i];
            }
            rate /= total;
            let u = draw_open01(&mut rng);
            let jumped = u < rate * dt;
            for (i, w) in weights.iter_mut().enumerate() {
                *w *= no_count[i] / total;
                if jumped {
                    *w *= jump_factor[i];
                }
            }
            time = t_next;
            if jumped {
                jump_times.push(t_next);
            }
        }
        DetectionRecord::new(jump_times, self.time + horizon)
    }
}
