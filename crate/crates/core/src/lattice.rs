//! Lattice configurations, initial many-body states, and their reduction to
//! distributions over the scalar statistic `z`.

use crate::numeric::{composition_count, ln_factorial, logsumexp2};
use crate::zdist::{ZDistError, ZDistribution};
use std::collections::BTreeMap;
use thiserror::Error;

/// Default ceiling on the number of enumerated configurations.
pub const DEFAULT_ENUMERATION_CAP: u64 = 2_000_000;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("atom number must be at least 1")]
    NoAtoms,
    #[error("site count must be at least 1")]
    NoSites,
    #[error("illuminated mask has length {mask} but the lattice has {sites} sites")]
    MaskLength { mask: usize, sites: usize },
    #[error("at least one site must be illuminated")]
    EmptyMask,
    #[error("alternating illumination requires an even site count, got {0}")]
    OddAlternating(usize),
    #[error("{count} configurations exceed the enumeration cap of {cap}")]
    TooManyConfigurations { count: u128, cap: u64 },
    #[error("configuration has {got} sites, expected {expected}")]
    ConfigurationLength { got: usize, expected: usize },
    #[error("configuration holds {got} atoms, expected {expected}")]
    ConfigurationTotal { got: u64, expected: u64 },
    #[error("custom state weights sum to {sum}, expected 1 within 1e-12")]
    CustomWeightSum { sum: f64 },
    #[error("custom state weight {weight} is not a probability")]
    CustomWeightRange { weight: f64 },
    #[error("custom state lists no configurations")]
    CustomEmpty,
    #[error("Mott state needs the atom number divisible by the site count ({atoms} vs {sites})")]
    MottFilling { atoms: u64, sites: u64 },
    #[error("weight vector has length {got}, expected {expected}")]
    WeightLength { got: usize, expected: usize },
    #[error(transparent)]
    Distribution(#[from] ZDistError),
}

/// Lattice size and illumination geometry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeSpec {
    n_atoms: u64,
    illuminated: Vec<bool>,
}

impl LatticeSpec {
    pub fn new(n_atoms: u64, illuminated: Vec<bool>) -> Result<Self, LatticeError> {
        if n_atoms == 0 {
            return Err(LatticeError::NoAtoms);
        }
        if illuminated.is_empty() {
            return Err(LatticeError::NoSites);
        }
        if !illuminated.iter().any(|&b| b) {
            return Err(LatticeError::EmptyMask);
        }
        Ok(Self {
            n_atoms,
            illuminated,
        })
    }

    /// First `k` of `n_sites` sites illuminated.
    pub fn contiguous(n_atoms: u64, n_sites: usize, k: usize) -> Result<Self, LatticeError> {
        if n_sites == 0 {
            return Err(LatticeError::NoSites);
        }
        if k == 0 || k > n_sites {
            return Err(LatticeError::MaskLength {
                mask: k,
                sites: n_sites,
            });
        }
        Self::new(n_atoms, (0..n_sites).map(|j| j < k).collect())
    }

    /// Every second site illuminated; requires an even site count.
    pub fn alternating(n_atoms: u64, n_sites: usize) -> Result<Self, LatticeError> {
        if !n_sites.is_multiple_of(2) {
            return Err(LatticeError::OddAlternating(n_sites));
        }
        Self::new(n_atoms, (0..n_sites).map(|j| j % 2 == 0).collect())
    }

    /// All sites illuminated.
    pub fn full(n_atoms: u64, n_sites: usize) -> Result<Self, LatticeError> {
        Self::contiguous(n_atoms, n_sites, n_sites)
    }

    pub fn n_atoms(&self) -> u64 {
        self.n_atoms
    }

    pub fn n_sites(&self) -> usize {
        self.illuminated.len()
    }

    pub fn illuminated(&self) -> &[bool] {
        &self.illuminated
    }

    pub fn illuminated_count(&self) -> usize {
        self.illuminated.iter().filter(|&&b| b).count()
    }
}

/// Site occupations `q_1..q_M` with a fixed total.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockConfiguration {
    occupations: Vec<u64>,
}

impl FockConfiguration {
    pub fn new(occupations: Vec<u64>) -> Self {
        Self { occupations }
    }

    pub fn occupations(&self) -> &[u64] {
        &self.occupations
    }

    pub fn total(&self) -> u64 {
        self.occupations.iter().sum()
    }

    pub fn validate(&self, lattice: &LatticeSpec) -> Result<(), LatticeError> {
        if self.occupations.len() != lattice.n_sites() {
            return Err(LatticeError::ConfigurationLength {
                got: self.occupations.len(),
                expected: lattice.n_sites(),
            });
        }
        if self.total() != lattice.n_atoms() {
            return Err(LatticeError::ConfigurationTotal {
                got: self.total(),
                expected: lattice.n_atoms(),
            });
        }
        Ok(())
    }

    /// Weighted statistic `z = sum_j w_j q_j`.
    pub fn z_statistic(&self, weights: &[i64]) -> i64 {
        self.occupations
            .iter()
            .zip(weights)
            .map(|(&q, &w)| q as i64 * w)
            .sum()
    }
}

/// All compositions of `n_atoms` into `n_sites` nonnegative parts, in
/// ascending lexicographic order.
pub fn enumerate_configurations(
    lattice: &LatticeSpec,
    cap: u64,
) -> Result<Vec<FockConfiguration>, LatticeError> {
    let n = lattice.n_atoms();
    let m = lattice.n_sites();
    let count = composition_count(n, m as u64);
    if count > cap as u128 {
        return Err(LatticeError::TooManyConfigurations { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut current = vec![0u64; m];
    current[m - 1] = n;
    loop {
        out.push(FockConfiguration::new(current.clone()));
        // successor in lexicographic order: bump the rightmost position that
        // still has atoms to its right, then flush the remainder to the end
        let Some(pivot) = (0..m - 1).rev().find(|&j| current[j + 1..].iter().sum::<u64>() > 0)
        else {
            break;
        };
        let tail: u64 = current[pivot + 1..].iter().sum();
        current[pivot] += 1;
        for slot in &mut current[pivot + 1..] {
            *slot = 0;
        }
        current[m - 1] = tail - 1;
        if m == 1 {
            break;
        }
    }
    Ok(out)
}

/// Log-probability of a configuration in the uniform superfluid:
/// `ln[ N! / (q_1! .. q_M!) * M^-N ]`.
pub fn sf_log_probability(config: &FockConfiguration) -> f64 {
    let n = config.total();
    let m = config.occupations().len() as f64;
    let ln_multinomial = ln_factorial(n)
        - config
            .occupations()
            .iter()
            .map(|&q| ln_factorial(q))
            .sum::<f64>();
    ln_multinomial - n as f64 * m.ln()
}

/// Initial many-body state of the lattice gas.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Atoms delocalized uniformly over all sites; occupations multinomial.
    Superfluid,
    /// One fixed filling per site; requires `N` divisible by `M`.
    Mott,
    /// Explicit configurations with squared amplitudes summing to 1.
    Custom(Vec<(FockConfiguration, f64)>),
}

impl InitialState {
    pub fn validate(&self, lattice: &LatticeSpec) -> Result<(), LatticeError> {
        match self {
            InitialState::Superfluid => Ok(()),
            InitialState::Mott => {
                if !lattice.n_atoms().is_multiple_of(lattice.n_sites() as u64) {
                    Err(LatticeError::MottFilling {
                        atoms: lattice.n_atoms(),
                        sites: lattice.n_sites() as u64,
                    })
                } else {
                    Ok(())
                }
            }
            InitialState::Custom(components) => {
                if components.is_empty() {
                    return Err(LatticeError::CustomEmpty);
                }
                let mut sum = 0.0;
                for (config, weight) in components {
                    config.validate(lattice)?;
                    if !(*weight >= 0.0 && *weight <= 1.0) {
                        return Err(LatticeError::CustomWeightRange { weight: *weight });
                    }
                    sum += weight;
                }
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(LatticeError::CustomWeightSum { sum });
                }
                Ok(())
            }
        }
    }
}

/// Grid spacing implied by the weight vector: 2 when every site weight has
/// the same parity (the reachable sums then share one parity class), else 1.
pub fn grid_step(weights: &[i64]) -> i64 {
    let parity = weights[0].rem_euclid(2);
    if weights.iter().all(|w| w.rem_euclid(2) == parity) {
        2
    } else {
        1
    }
}

/// Initial distribution `p0(z)` of `z = sum_j w_j q_j`.
///
/// The superfluid case uses the multinomial-to-iid reduction: each atom
/// contributes `w_s` with `s` uniform over the sites, so `p0` is the N-fold
/// convolution of the single-atom value histogram, done in log space.
/// Mott and custom states sum directly over their configurations.
pub fn initial_z_distribution(
    state: &InitialState,
    lattice: &LatticeSpec,
    weights: &[i64],
) -> Result<ZDistribution, LatticeError> {
    if weights.len() != lattice.n_sites() {
        return Err(LatticeError::WeightLength {
            got: weights.len(),
            expected: lattice.n_sites(),
        });
    }
    state.validate(lattice)?;
    let n = lattice.n_atoms();
    let w_min = *weights.iter().min().expect("nonempty");
    let w_max = *weights.iter().max().expect("nonempty");
    let z_min = n as i64 * w_min;
    let z_max = n as i64 * w_max;
    let span = (z_max - z_min) as usize + 1;
    let step = grid_step(weights);

    let dense = match state {
        InitialState::Superfluid => {
            // single-atom histogram over distinct weight values
            let mut value_counts: BTreeMap<i64, u64> = BTreeMap::new();
            for &w in weights {
                *value_counts.entry(w).or_insert(0) += 1;
            }
            let m = lattice.n_sites() as f64;
            let atom_values: Vec<(i64, f64)> = value_counts
                .into_iter()
                .map(|(v, c)| (v, (c as f64).ln() - m.ln()))
                .collect();

            // after k atoms the array covers [k*w_min, k*w_max]; index of z
            // is z - k*w_min
            let width_of = |k: u64| (k as i64 * (w_max - w_min)) as usize + 1;
            let mut current = vec![f64::NEG_INFINITY; span];
            for &(v, lp) in &atom_values {
                current[(v - w_min) as usize] = lp;
            }
            let mut next = vec![f64::NEG_INFINITY; span];
            for k in 2..=n {
                let prev_width = width_of(k - 1);
                for (idx, slot) in next.iter_mut().enumerate().take(width_of(k)) {
                    let mut acc = f64::NEG_INFINITY;
                    for &(v, lp) in &atom_values {
                        // z - v in previous-layer coordinates
                        let prev_idx = idx as i64 - (v - w_min);
                        if prev_idx < 0 || prev_idx as usize >= prev_width {
                            continue;
                        }
                        acc = logsumexp2(acc, current[prev_idx as usize] + lp);
                    }
                    *slot = acc;
                }
                std::mem::swap(&mut current, &mut next);
            }
            current
        }
        InitialState::Mott => {
            let fill = n / lattice.n_sites() as u64;
            let z0: i64 = weights.iter().map(|&w| w * fill as i64).sum();
            let mut dense = vec![f64::NEG_INFINITY; span];
            dense[(z0 - z_min) as usize] = 0.0;
            dense
        }
        InitialState::Custom(components) => {
            // accumulate linear weights per z, then take logs
            let mut linear = vec![0.0f64; span];
            for (config, weight) in components {
                let z = config.z_statistic(weights);
                linear[(z - z_min) as usize] += weight;
            }
            linear.iter().map(|&p| p.ln()).collect()
        }
    };

    Ok(dense_to_distribution(z_min, step, dense)?)
}

/// Compresses a dense step-1 array of log-weights onto the detected grid.
pub(crate) fn dense_to_distribution(
    z_min: i64,
    step: i64,
    dense: Vec<f64>,
) -> Result<ZDistribution, ZDistError> {
    if step == 1 {
        return ZDistribution::new(z_min, 1, dense);
    }
    let populated_parity = dense
        .iter()
        .position(|w| w.is_finite())
        .ok_or(ZDistError::Empty)? as i64
        % 2;
    let strided: Vec<f64> = dense
        .iter()
        .enumerate()
        .filter(|(i, _)| *i as i64 % 2 == populated_parity)
        .map(|(_, &w)| w)
        .collect();
    ZDistribution::new(z_min + populated_parity, 2, strided)
}
