//! Ensemble execution and the estimators built on it.
//!
//! Every trajectory owns an RNG stream derived from `(master_seed, index)`,
//! so results do not depend on how trajectories are scheduled across
//! workers. Trajectories that share an initial condition form a *group*;
//! the MSD estimator measures spread around the group mean, which is the
//! noise average conditional on the starting point.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// The RNG used for every noise and sampling stream.
pub type StreamRng = ChaCha8Rng;

pub const NOISE_DOMAIN: u64 = 0x6e6f_6973_6500_0001;
pub const INITIAL_DOMAIN: u64 = 0x696e_6974_0000_0002;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `index` within `domain` under `master`.
pub fn derive_seed(master: u64, domain: u64, index: u64) -> u64 {
    mix64(mix64(master ^ domain).wrapping_add(mix64(index)))
}

pub fn stream(master: u64, domain: u64, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, domain, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    #[default]
    Rest,
    GibbsSample,
}

/// A system that can be advanced by one explicit stochastic step.
pub trait Model: Sync {
    type State: Clone + Send + Sync;

    /// Number of standard normals consumed per step.
    fn noise_dim(&self) -> usize;

    fn initial_state(&self, ic: InitialCondition, rng: &mut StreamRng) -> Result<Self::State>;

    fn step(&self, state: &Self::State, h: f64, noise: &[f64]) -> Result<Self::State>;

    /// Number of running accumulators carried beside the state.
    fn aux_dim(&self) -> usize {
        0
    }

    /// Update accumulators after the step `before -> after` driven by `noise`.
    fn accumulate(
        &self,
        _before: &Self::State,
        _after: &Self::State,
        _h: f64,
        _noise: &[f64],
        _aux: &mut [f64],
    ) {
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSpec {
    pub n_trajectories: usize,
    pub horizon: f64,
    pub h: f64,
    pub record_stride: usize,
    pub master_seed: u64,
    pub initial_condition: InitialCondition,
    /// Trajectories sharing one sampled initial condition (GibbsSample only).
    pub replicas_per_initial: usize,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            n_trajectories: 16,
            horizon: 100.0,
            h: 0.01,
            record_stride: 10,
            master_seed: 0,
            initial_condition: InitialCondition::Rest,
            replicas_per_initial: 1,
        }
    }
}

impl EnsembleSpec {
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::Validation(format!(
                "step h must be positive, got {}",
                self.h
            )));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::Validation(format!(
                "horizon must be non-negative, got {}",
                self.horizon
            )));
        }
        let ratio = self.horizon / self.h;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Validation(format!(
                "horizon {} is not a whole number of steps of {}",
                self.horizon, self.h
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_steps()?;
        if self.n_trajectories == 0 {
            return Err(Error::Validation("n_trajectories must be positive".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::Validation("record_stride must be positive".into()));
        }
        if n % self.record_stride != 0 {
            return Err(Error::Validation(format!(
                "record_stride {} does not divide the {n} steps",
                self.record_stride
            )));
        }
        if self.replicas_per_initial == 0 {
            return Err(Error::Validation(
                "replicas_per_initial must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Initial-condition group of trajectory `index`.
    pub fn group_of(&self, index: usize) -> usize {
        match self.initial_condition {
            InitialCondition::Rest => 0,
            InitialCondition::GibbsSample => index / self.replicas_per_initial.max(1),
        }
    }

    pub fn record_times(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let n = self.n_steps()?;
        Ok((0..=n / self.record_stride)
            .map(|k| (k * self.record_stride) as f64 * self.h)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    /// Accumulator snapshots, one per record (empty when the model has none).
    pub aux: Vec<Vec<f64>>,
    pub seed: u64,
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble<S> {
    pub spec: EnsembleSpec,
    pub trajectories: Vec<Trajectory<S>>,
}

/// One scalar observable across an ensemble: `values[trajectory][record]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSet {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub groups: Vec<usize>,
}

impl<S> Ensemble<S> {
    pub fn times(&self) -> &[f64] {
        self.trajectories
            .first()
            .map(|t| t.times.as_slice())
            .unwrap_or(&[])
    }

    pub fn series(&self, f: impl Fn(&S) -> f64) -> SeriesSet {
        SeriesSet {
            times: self.times().to_vec(),
            values: self
                .trajectories
                .iter()
                .map(|t| t.states.iter().map(&f).collect())
                .collect(),
            groups: self.trajectories.iter().map(|t| t.group).collect(),
        }
    }

    /// Series of accumulator `k`.
    pub fn aux_series(&self, k: usize) -> SeriesSet {
        SeriesSet {
            times: self.times().to_vec(),
            values: self
                .trajectories
                .iter()
                .map(|t| t.aux.iter().map(|a| a[k]).collect())
                .collect(),
            groups: self.trajectories.iter().map(|t| t.group).collect(),
        }
    }
}

/// Simulate one trajectory, calling `observe(step_index, state, aux)` at every recorded step.
pub fn simulate_streaming<M: Model>(
    model: &M,
    mut state: M::State,
    h: f64,
    n_steps: usize,
    stride: usize,
    rng: &mut StreamRng,
    mut observe: impl FnMut(usize, &M::State, &[f64]),
) -> Result<M::State> {
    let mut z = vec![0.0; model.noise_dim()];
    let mut aux = vec![0.0; model.aux_dim()];
    observe(0, &state, &aux);
    for k in 1..=n_steps {
        for e in z.iter_mut() {
            *e = StandardNormal.sample(rng);
        }
        let next = model.step(&state, h, &z)?;
        model.accumulate(&state, &next, h, &z, &mut aux);
        state = next;
        if k % stride == 0 {
            observe(k, &state, &aux);
        }
    }
    Ok(state)
}

/// Initial state of trajectory `index` (shared within its group).
pub fn initial_for<M: Model>(spec: &EnsembleSpec, model: &M, index: usize) -> Result<M::State> {
    let mut rng = stream(
        spec.master_seed,
        INITIAL_DOMAIN,
        spec.group_of(index) as u64,
    );
    model.initial_state(spec.initial_condition, &mut rng)
}

pub fn noise_seed(spec: &EnsembleSpec, index: usize) -> u64 {
    derive_seed(spec.master_seed, NOISE_DOMAIN, index as u64)
}

/// Run `spec.n_trajectories` independent trajectories on the current rayon pool.
pub fn run_ensemble<M: Model>(spec: &EnsembleSpec, model: &M) -> Result<Ensemble<M::State>> {
    spec.validate()?;
    let n_steps = spec.n_steps()?;
    let times = spec.record_times()?;
    let trajectories = (0..spec.n_trajectories)
        .into_par_iter()
        .map(|i| {
            let seed = noise_seed(spec, i);
            let mut rng = StreamRng::seed_from_u64(seed);
            let s0 = initial_for(spec, model, i)?;
            let mut states = Vec::with_capacity(times.len());
            let mut aux = Vec::new();
            simulate_streaming(
                model,
                s0,
                spec.h,
                n_steps,
                spec.record_stride,
                &mut rng,
                |_, s, a| {
                    states.push(s.clone());
                    if !a.is_empty() {
                        aux.push(a.to_vec());
                    }
                },
            )?;
            Ok(Trajectory {
                times: times.clone(),
                states,
                aux,
                seed,
                group: spec.group_of(i),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        spec: spec.clone(),
        trajectories,
    })
}

fn check_shape(set: &SeriesSet) -> Result<usize> {
    let n = set.values.len();
    if n == 0 {
        return Err(Error::TooFewTrajectories { needed: 1, got: 0 });
    }
    let len = set.values[0].len();
    if set.values.iter().any(|v| v.len() != len) || set.groups.len() != n {
        return Err(Error::InvalidParameter("ragged series set".into()));
    }
    Ok(len)
}

/// Ensemble mean at each record.
pub fn mean(set: &SeriesSet) -> Result<Vec<f64>> {
    let len = check_shape(set)?;
    let n = set.values.len() as f64;
    Ok((0..len)
        .map(|k| set.values.iter().map(|v| v[k]).sum::<f64>() / n)
        .collect())
}

/// Ensemble mean of the squared observable, `E[x^2]`.
pub fn second_moment(set: &SeriesSet) -> Result<Vec<f64>> {
    let len = check_shape(set)?;
    let n = set.values.len() as f64;
    Ok((0..len)
        .map(|k| set.values.iter().map(|v| v[k] * v[k]).sum::<f64>() / n)
        .collect())
}

/// Unbiased variance around the overall ensemble mean, ignoring groups.
pub fn ensemble_variance(set: &SeriesSet) -> Result<Vec<f64>> {
    let ungrouped = SeriesSet {
        groups: vec![0; set.values.len()],
        ..set.clone()
    };
    msd(&ungrouped)
}

/// Mean-squared displacement around the conditional (group) mean: pooled
/// within-group variance with divisor `n - groups`. With a single group this
/// is the ordinary unbiased ensemble variance.
pub fn msd(set: &SeriesSet) -> Result<Vec<f64>> {
    let len = check_shape(set)?;
    let n = set.values.len();
    let n_groups = {
        let mut g = set.groups.clone();
        g.sort_unstable();
        g.dedup();
        g
    };
    let dof = n - n_groups.len();
    if dof == 0 {
        return Err(Error::TooFewTrajectories {
            needed: 2,
            got: n / n_groups.len().max(1),
        });
    }
    // Map group labels to dense indices.
    let idx: Vec<usize> = set
        .groups
        .iter()
        .map(|g| n_groups.binary_search(g).unwrap())
        .collect();
    let mut counts = vec![0usize; n_groups.len()];
    for &i in &idx {
        counts[i] += 1;
    }
    // Deviations are taken from the first member of each group so that
    // identical trajectories give exactly zero.
    let mut first = vec![usize::MAX; n_groups.len()];
    for (j, &i) in idx.iter().enumerate() {
        if first[i] == usize::MAX {
            first[i] = j;
        }
    }
    let mut out = Vec::with_capacity(len);
    let mut sums = vec![0.0; n_groups.len()];
    for k in 0..len {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (v, &i) in set.values.iter().zip(&idx) {
            sums[i] += v[k] - set.values[first[i]][k];
        }
        let mut ss = 0.0;
        for (v, &i) in set.values.iter().zip(&idx) {
            let d = (v[k] - set.values[first[i]][k]) - sums[i] / counts[i] as f64;
            ss += d * d;
        }
        out.push(ss / dof as f64);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

/// Least-squares fit of `log y` against `log t` on `[t_lo, t_hi]`; the default
/// window is the last decade of positive times.
pub fn loglog_exponent(
    times: &[f64],
    series: &[f64],
    window: Option<(f64, f64)>,
) -> Result<LogLogFit> {
    if times.len() != series.len() {
        return Err(Error::InvalidParameter(
            "times and series differ in length".into(),
        ));
    }
    let t_max = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = window.unwrap_or((t_max / 10.0, t_max));
    let mut pts = Vec::new();
    for (i, (&t, &y)) in times.iter().zip(series).enumerate() {
        if t > 0.0 && t >= lo && t <= hi {
            if !(y > 0.0) {
                return Err(Error::NonPositiveSeries(y, i));
            }
            pts.push((t.ln(), y.ln()));
        }
    }
    if pts.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "fit window [{lo}, {hi}] holds fewer than 2 points"
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    };
    Ok(LogLogFit {
        slope,
        intercept: my - slope * mx,
        r2,
        t_lo: lo,
        t_hi: hi,
    })
}

/// Pearson correlation across the ensemble of the adjacent increments
/// `x(t+2s) - x(t+s)` and `x(t+s) - x(t)`; `t` and `s` are record indices.
pub fn increment_correlation(set: &SeriesSet, t: usize, s: usize) -> Result<f64> {
    let len = check_shape(set)?;
    if s == 0 || t + 2 * s >= len {
        return Err(Error::InvalidParameter(format!(
            "lag window t={t}, s={s} exceeds {len} records"
        )));
    }
    let a: Vec<f64> = set.values.iter().map(|v| v[t + 2 * s] - v[t + s]).collect();
    let b: Vec<f64> = set.values.iter().map(|v| v[t + s] - v[t]).collect();
    pearson(&a, &b)
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len();
    if n < 2 || b.len() != n {
        return Err(Error::TooFewTrajectories {
            needed: 2,
            got: n.min(b.len()),
        });
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    let scale = ma.abs().max(mb.abs()).max(1e-300);
    if saa <= (1e-14 * scale).powi(2) * n as f64 || sbb <= (1e-14 * scale).powi(2) * n as f64 {
        return Err(Error::DegenerateVariance);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flight {
    pub start: f64,
    pub duration: f64,
    pub mean_velocity: f64,
}

/// Maximal runs where the centred moving-average velocity over `window`
/// increments keeps one sign with magnitude at least `threshold`.
pub fn detect_flights(
    times: &[f64],
    xs: &[f64],
    window: usize,
    threshold: f64,
) -> Result<Vec<Flight>> {
    if window < 2 {
        return Err(Error::InvalidParameter(format!(
            "flight window must be >= 2, got {window}"
        )));
    }
    if times.len() != xs.len() {
        return Err(Error::InvalidParameter(
            "times and positions differ in length".into(),
        ));
    }
    if xs.len() < 2 {
        return Ok(Vec::new());
    }
    let m = xs.len() - 1;
    let vel: Vec<f64> = (0..m)
        .map(|j| (xs[j + 1] - xs[j]) / (times[j + 1] - times[j]))
        .collect();
    let mut prefix = vec![0.0; m + 1];
    for j in 0..m {
        prefix[j + 1] = prefix[j] + vel[j];
    }
    let back = (window - 1) / 2;
    let fwd = window / 2;
    let smooth: Vec<f64> = (0..m)
        .map(|j| {
            let lo = j.saturating_sub(back);
            let hi = (j + fwd).min(m - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
        })
        .collect();
    let sign = |v: f64| -> i8 {
        if v.abs() >= threshold && v != 0.0 {
            if v > 0.0 {
                1
            } else {
                -1
            }
        } else {
            0
        }
    };
    let mut flights = Vec::new();
    let mut j = 0;
    while j < m {
        let sg = sign(smooth[j]);
        if sg == 0 {
            j += 1;
            continue;
        }
        let a = j;
        while j < m && sign(smooth[j]) == sg {
            j += 1;
        }
        let b = j - 1;
        let duration = times[b + 1] - times[a];
        flights.push(Flight {
            start: times[a],
            duration,
            mean_velocity: (xs[b + 1] - xs[a]) / duration,
        });
    }
    Ok(flights)
}

/// Half the RMS increment velocity over all trajectories.
pub fn default_flight_threshold(set: &SeriesSet) -> f64 {
    let mut ss = 0.0;
    let mut n = 0usize;
    for v in &set.values {
        for k in 0..v.len().saturating_sub(1) {
            let dt = set.times[k + 1] - set.times[k];
            ss += ((v[k + 1] - v[k]) / dt).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        0.5 * (ss / n as f64).sqrt()
    }
}

pub const DEFAULT_FLIGHT_WINDOW: usize = 100;

/// Empirical survival function `P(D >= d)` at each distinct duration.
pub fn survival_function(durations: &[f64]) -> Vec<(f64, f64)> {
    let mut d = durations.to_vec();
    d.sort_by(f64::total_cmp);
    let n = d.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < d.len() {
        out.push((d[i], (d.len() - i) as f64 / n));
        let v = d[i];
        while i < d.len() && d[i] == v {
            i += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationFits {
    pub count: usize,
    pub mean: f64,
    /// Maximum-likelihood exponential rate.
    pub exponential_rate: f64,
    /// Maximum-likelihood Pareto tail exponent above `xmin`.
    pub power_law_exponent: Option<f64>,
    pub xmin: f64,
}

pub fn fit_durations(durations: &[f64]) -> Option<DurationFits> {
    let pos: Vec<f64> = durations.iter().copied().filter(|d| *d > 0.0).collect();
    if pos.is_empty() {
        return None;
    }
    let n = pos.len() as f64;
    let mean = pos.iter().sum::<f64>() / n;
    let xmin = pos.iter().copied().fold(f64::INFINITY, f64::min);
    let logs: f64 = pos.iter().map(|d| (d / xmin).ln()).sum();
    Some(DurationFits {
        count: pos.len(),
        mean,
        exponential_rate: 1.0 / mean,
        power_law_exponent: (logs > 0.0).then(|| 1.0 + n / logs),
        xmin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.counts.len())
            .map(|i| self.lo + (i as f64 + 0.5) * w)
            .collect()
    }
}

/// Fixed-width bins on `[lo, hi)`; `hi` itself lands in the last bin.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Histogram> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "bad histogram range [{lo}, {hi}) with {bins} bins"
        )));
    }
    let mut h = Histogram {
        lo,
        hi,
        counts: vec![0; bins],
        underflow: 0,
        overflow: 0,
    };
    let w = (hi - lo) / bins as f64;
    for &v in values {
        if v < lo {
            h.underflow += 1;
        } else if v > hi {
            h.overflow += 1;
        } else {
            let i = (((v - lo) / w) as usize).min(bins - 1);
            h.counts[i] += 1;
        }
    }
    Ok(h)
}

/// Histogram whose range is the data range.
pub fn histogram_auto(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("histogram of no values".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    histogram(values, lo, hi, bins)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square goodness of fit of `counts` against bin probabilities.
pub fn chi_square_test(counts: &[u64], probs: &[f64]) -> Result<ChiSquareResult> {
    if counts.len() != probs.len() || counts.len() < 2 {
        return Err(Error::InvalidParameter(
            "chi-square needs matching bins (>= 2)".into(),
        ));
    }
    let n: u64 = counts.iter().sum();
    let total_p: f64 = probs.iter().sum();
    let mut stat = 0.0;
    for (&c, &p) in counts.iter().zip(probs) {
        let e = n as f64 * p / total_p;
        if e <= 0.0 {
            return Err(Error::InvalidParameter("zero expected count".into()));
        }
        stat += (c as f64 - e).powi(2) / e;
    }
    let dof = counts.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(ChiSquareResult {
        statistic: stat,
        dof,
        p_value: 1.0 - dist.cdf(stat),
    })
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < v.len() {
        v[i] * (1.0 - f) + v[i + 1] * f
    } else {
        v[i]
    }
}

pub fn interquartile_range(values: &[f64]) -> f64 {
    quantile(values, 0.75) - quantile(values, 0.25)
}

/// Sample mean and its standard error.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrPoint {
    pub lag: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightSummary {
    pub window: usize,
    pub threshold: f64,
    pub durations: Vec<f64>,
    pub survival: Vec<(f64, f64)>,
    pub fits: Option<DurationFits>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub msd: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub exponent: Option<LogLogFit>,
    pub corr: Vec<CorrPoint>,
    pub hist: Option<Histogram>,
    pub flights: Option<FlightSummary>,
}

/// Options for [`stat_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub fit_window: Option<(f64, f64)>,
    /// Record index of `t` for increment correlations.
    pub corr_start: Option<usize>,
    pub corr_lags: Vec<usize>,
    pub hist_bins: usize,
    pub flight_window: usize,
    pub flight_threshold: Option<f64>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            fit_window: None,
            corr_start: None,
            corr_lags: Vec::new(),
            hist_bins: 50,
            flight_window: DEFAULT_FLIGHT_WINDOW,
            flight_threshold: None,
        }
    }
}

/// Full report on one observable. Estimators that cannot be evaluated
/// (e.g. a fit on a non-positive series) are left empty rather than failing.
pub fn stat_report(set: &SeriesSet, opts: &ReportOptions) -> Result<StatReport> {
    let mean_v = mean(set)?;
    let msd_v = msd(set).or_else(|_| ensemble_variance(set))?;
    let exponent = loglog_exponent(&set.times, &msd_v, opts.fit_window).ok();
    let dt = set.times.get(1).map(|t| t - set.times[0]).unwrap_or(0.0);
    let start = opts.corr_start.unwrap_or(set.times.len() / 2);
    let corr = opts
        .corr_lags
        .iter()
        .filter_map(|&s| {
            increment_correlation(set, start, s)
                .ok()
                .map(|c| CorrPoint {
                    lag: s as f64 * dt,
                    value: c,
                })
        })
        .collect();
    let finals: Vec<f64> = set
        .values
        .iter()
        .filter_map(|v| v.last().copied())
        .collect();
    let hist = histogram_auto(&finals, opts.hist_bins).ok();
    let threshold = opts
        .flight_threshold
        .unwrap_or_else(|| default_flight_threshold(set));
    let mut durations = Vec::new();
    for v in &set.values {
        for f in detect_flights(&set.times, v, opts.flight_window, threshold)? {
            durations.push(f.duration);
        }
    }
    Ok(StatReport {
        times: set.times.clone(),
        mean: mean_v,
        msd: msd_v,
        second_moment: second_moment(set)?,
        exponent,
        corr,
        hist,
        flights: Some(FlightSummary {
            window: opts.flight_window,
            threshold,
            survival: survival_function(&durations),
            fits: fit_durations(&durations),
            durations,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn set(values: Vec<Vec<f64>>, dt: f64) -> SeriesSet {
        let len = values[0].len();
        SeriesSet {
            times: (0..len).map(|k| k as f64 * dt).collect(),
            groups: vec![0; values.len()],
            values,
        }
    }

    /// Random walk with unit-variance increments; no accumulators.
    struct Walk;
    impl Model for Walk {
        type State = f64;
        fn noise_dim(&self) -> usize {
            1
        }
        fn initial_state(&self, ic: InitialCondition, rng: &mut StreamRng) -> Result<f64> {
            Ok(match ic {
                InitialCondition::Rest => 0.0,
                InitialCondition::GibbsSample => rng.gen_range(-100.0..100.0),
            })
        }
        fn step(&self, s: &f64, h: f64, z: &[f64]) -> Result<f64> {
            Ok(s + h.sqrt() * z[0])
        }
    }

    fn spec(n: usize) -> EnsembleSpec {
        EnsembleSpec {
            n_trajectories: n,
            horizon: 1.0,
            h: 0.01,
            record_stride: 10,
            master_seed: 42,
            ..Default::default()
        }
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
        assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 2, 4));
        assert_ne!(derive_seed(1, 2, 3), derive_seed(2, 2, 3));
    }

    #[test]
    fn ensemble_is_deterministic() {
        let a = run_ensemble(&spec(2), &Walk).unwrap();
        let b = run_ensemble(&spec(2), &Walk).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.trajectories[0].states, a.trajectories[1].states);
        assert!(a.trajectories.iter().all(|t| t.states[0] == 0.0));
        assert_eq!(a.times().len(), 11);
        assert!((a.times()[10] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ensemble_independent_of_pool_size() {
        let p1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let p4 = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = p1.install(|| run_ensemble(&spec(9), &Walk)).unwrap();
        let b = p4.install(|| run_ensemble(&spec(9), &Walk)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gibbs_groups_share_initial_state() {
        let s = EnsembleSpec {
            initial_condition: InitialCondition::GibbsSample,
            replicas_per_initial: 3,
            ..spec(6)
        };
        let e = run_ensemble(&s, &Walk).unwrap();
        let x0: Vec<f64> = e.trajectories.iter().map(|t| t.states[0]).collect();
        assert_eq!(x0[0], x0[2]);
        assert_eq!(x0[3], x0[5]);
        assert_ne!(x0[0], x0[3]);
        assert_eq!(e.trajectories[4].group, 1);
        // Within-group spread excludes the initial scatter.
        let ser = e.series(|s| *s);
        assert_eq!(msd(&ser).unwrap()[0], 0.0);
        assert!(ensemble_variance(&ser).unwrap()[0] > 0.0);
    }

    #[test]
    fn spec_validation() {
        assert!(EnsembleSpec {
            horizon: 1.005,
            ..spec(2)
        }
        .validate()
        .is_err());
        assert!(EnsembleSpec {
            record_stride: 7,
            ..spec(2)
        }
        .validate()
        .is_err());
        assert!(EnsembleSpec { h: 0.0, ..spec(2) }.validate().is_err());
        assert!(spec(2).validate().is_ok());
    }

    #[test]
    fn msd_examples() {
        let same = set(vec![vec![1.0, 2.0, 3.0]; 4], 1.0);
        assert_eq!(msd(&same).unwrap(), vec![0.0; 3]);
        let pm = set(vec![vec![0.0, 1.0, 2.0], vec![0.0, -1.0, -2.0]], 1.0);
        assert_eq!(msd(&pm).unwrap(), vec![0.0, 2.0, 8.0]);
        let one = set(vec![vec![0.0, 1.0]], 1.0);
        assert!(matches!(msd(&one), Err(Error::TooFewTrajectories { .. })));
        let singletons = SeriesSet {
            groups: vec![0, 1],
            ..pm.clone()
        };
        assert!(matches!(
            msd(&singletons),
            Err(Error::TooFewTrajectories { .. })
        ));
        assert_eq!(ensemble_variance(&singletons).unwrap(), vec![0.0, 2.0, 8.0]);
        assert_eq!(second_moment(&pm).unwrap(), vec![0.0, 1.0, 4.0]);
    }

    #[test]
    fn loglog_examples() {
        let t: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.1).collect();
        let quad: Vec<f64> = t.iter().map(|t| 3.0 * t * t).collect();
        let lin: Vec<f64> = t.iter().map(|t| 0.5 * t).collect();
        let f2 = loglog_exponent(&t, &quad, None).unwrap();
        let f1 = loglog_exponent(&t, &lin, None).unwrap();
        assert!((f2.slope - 2.0).abs() < 1e-12 && (f2.r2 - 1.0).abs() < 1e-12);
        assert!((f1.slope - 1.0).abs() < 1e-12);
        assert!((f2.intercept - 3f64.ln()).abs() < 1e-10);
        assert_eq!(f2.t_lo, 10.0);
        let mut bad = quad.clone();
        bad[900] = 0.0;
        assert!(matches!(
            loglog_exponent(&t, &bad, None),
            Err(Error::NonPositiveSeries(_, 900))
        ));
    }

    #[test]
    fn increment_correlation_examples() {
        let mut rng = stream(1, 0, 0);
        let vals: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let v: f64 = rng.gen_range(-1.0..1.0);
                (0..10).map(|k| v * k as f64).collect()
            })
            .collect();
        let c = increment_correlation(&set(vals, 1.0), 2, 3).unwrap();
        assert!((c - 1.0).abs() < 1e-12);

        let n = 4000;
        let walks: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut x = 0.0;
                (0..12)
                    .map(|_| {
                        let y = x;
                        let z: f64 = StandardNormal.sample(&mut rng);
                        x += z;
                        y
                    })
                    .collect()
            })
            .collect();
        let c = increment_correlation(&set(walks, 1.0), 1, 4).unwrap();
        assert!(c.abs() < 3.0 / (n as f64).sqrt(), "c = {c}");

        let flat = set(vec![vec![1.0; 10]; 5], 1.0);
        assert_eq!(
            increment_correlation(&flat, 0, 2),
            Err(Error::DegenerateVariance)
        );
    }

    #[test]
    fn flights_examples() {
        let t: Vec<f64> = (0..500).map(|k| k as f64).collect();
        let f = detect_flights(&t, &t, 10, 0.5).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].start, 0.0);
        assert_eq!(f[0].duration, 499.0);
        assert!((f[0].mean_velocity - 1.0).abs() < 1e-12);
        assert!(detect_flights(&t, &vec![0.0; 500], 10, 0.5)
            .unwrap()
            .is_empty());
        assert!(detect_flights(&t, &t, 1, 0.5).is_err());
    }

    #[test]
    fn flights_alternating_blocks() {
        let l = 40;
        let blocks = 8;
        let mut x = vec![0.0];
        for b in 0..blocks {
            let sgn = if b % 2 == 0 { 1.0 } else { -1.0 };
            for _ in 0..l {
                let last = *x.last().unwrap();
                x.push(last + sgn);
            }
        }
        let t: Vec<f64> = (0..x.len()).map(|k| k as f64).collect();
        for &w in &[3usize, 5, 11] {
            let f = detect_flights(&t, &x, w, 1.0 / w as f64).unwrap();
            assert_eq!(f.len(), blocks, "window {w}");
            for (i, fl) in f.iter().enumerate() {
                assert_eq!(fl.duration, l as f64, "window {w}");
                assert_eq!(fl.start, (i * l) as f64);
            }
        }
    }

    #[test]
    fn survival_and_fits() {
        let s = survival_function(&[3.0, 1.0, 2.0, 2.0]);
        assert_eq!(s, vec![(1.0, 1.0), (2.0, 0.75), (3.0, 0.25)]);
        let f = fit_durations(&[1.0, 2.0, 3.0]).unwrap();
        assert!((f.exponential_rate - 0.5).abs() < 1e-15);
        assert!((f.power_law_exponent.unwrap() - (1.0 + 3.0 / 6f64.ln())).abs() < 1e-12);
        assert!(fit_durations(&[]).is_none());
    }

    #[test]
    fn histogram_examples() {
        let h = histogram(&[0.3], 0.0, 1.0, 10).unwrap();
        assert_eq!(h.counts.iter().filter(|c| **c > 0).count(), 1);
        let vals: Vec<f64> = (0..100).map(|k| k as f64 + 0.5).collect();
        let h = histogram(&vals, 0.0, 100.0, 10).unwrap();
        assert!(h.counts.iter().all(|c| *c == 10));
        let h = histogram_auto(&[1.0, 2.0, 5.0], 4).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 3);
    }

    #[test]
    fn chi_square_accepts_fair_die() {
        let r = chi_square_test(&[100, 100, 100, 100], &[0.25; 4]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let r = chi_square_test(&[400, 0, 0, 0], &[0.25; 4]).unwrap();
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn report_serializes_fixed_keys() {
        let e = run_ensemble(&spec(8), &Walk).unwrap();
        let r = stat_report(
            &e.series(|s| *s),
            &ReportOptions {
                corr_lags: vec![1, 2],
                flight_window: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for k in ["mean", "msd", "exponent", "corr", "hist", "flights"] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
    }

    proptest! {
        #[test]
        fn correlation_in_unit_interval(seed in 0u64..500, n in 3usize..40) {
            let mut rng = stream(seed, 0, 0);
            let vals: Vec<Vec<f64>> = (0..n).map(|_| (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            if let Ok(c) = increment_correlation(&set(vals, 1.0), 0, 3) {
                prop_assert!((-1.0..=1.0).contains(&c));
            }
        }

        #[test]
        fn msd_of_duplicates_is_zero(seed in 0u64..500, copies in 2usize..6) {
            let mut rng = stream(seed, 0, 0);
            let base: Vec<f64> = (0..9).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let m = msd(&set(vec![base; copies], 1.0)).unwrap();
            prop_assert!(m.iter().all(|v| *v == 0.0));
        }

        #[test]
        fn histogram_counts_sum(vals in proptest::collection::vec(-10.0..10.0f64, 1..200), bins in 1usize..30) {
            let h = histogram_auto(&vals, bins).unwrap();
            prop_assert_eq!(h.counts.iter().sum::<u64>() + h.underflow + h.overflow, vals.len() as u64);
            prop_assert_eq!(h.underflow + h.overflow, 0);
        }
    }
}
