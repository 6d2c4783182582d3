//! The sliding disk: a disk on a periodic landscape whose sliding friction
//! (and therefore, by fluctuation-dissipation, its noise) acts only on the
//! slip velocity `v + omega`. The friction tensor is rank one, so one
//! combination of the momenta, `-v + sigma * omega`, never sees noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{psd_sqrt, SymPsdMatrix};
use crate::stats::{InitialCondition, Model, StreamRng};
use std::f64::consts::TAU;

/// Grid size for inverse-CDF sampling of the positional Gibbs marginal.
pub const GIBBS_GRID: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub amplitude: f64,
    pub harmonic: u32,
    pub phase: f64,
}

/// A smooth 2pi-periodic potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "terms")]
pub enum PotentialSpec {
    #[default]
    Flat,
    /// `sin(x)`
    Symmetric,
    /// `sin(x) + 0.4 sin(2x)`
    Asymmetric,
    /// `sum a_k sin(n_k x + phi_k)`
    Fourier(Vec<FourierTerm>),
}

impl PotentialSpec {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            PotentialSpec::Flat => 0.0,
            PotentialSpec::Symmetric => x.sin(),
            PotentialSpec::Asymmetric => x.sin() + 0.4 * (2.0 * x).sin(),
            PotentialSpec::Fourier(terms) => terms
                .iter()
                .map(|t| t.amplitude * (t.harmonic as f64 * x + t.phase).sin())
                .sum(),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            PotentialSpec::Flat => 0.0,
            PotentialSpec::Symmetric => x.cos(),
            PotentialSpec::Asymmetric => x.cos() + 0.8 * (2.0 * x).cos(),
            PotentialSpec::Fourier(terms) => terms
                .iter()
                .map(|t| {
                    let k = t.harmonic as f64;
                    t.amplitude * k * (k * x + t.phase).cos()
                })
                .sum(),
        }
    }

    pub fn is_flat(&self) -> bool {
        match self {
            PotentialSpec::Flat => true,
            PotentialSpec::Fourier(terms) => {
                terms.iter().all(|t| t.amplitude == 0.0 || t.harmonic == 0)
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiskParams {
    pub sigma: f64,
    pub c: f64,
    pub alpha: f64,
    pub potential: PotentialSpec,
    /// Replaces the rank-one tensor in both friction and noise.
    pub dissipation_override: Option<SymPsdMatrix>,
}

impl Default for DiskParams {
    /// h = 0.01 is the matching step; sigma = J/(m r^2) = 1/2 for a uniform disk.
    fn default() -> Self {
        DiskParams {
            sigma: 0.5,
            c: 0.1,
            alpha: 5.0,
            potential: PotentialSpec::Symmetric,
            dissipation_override: None,
        }
    }
}

impl DiskParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidSigma(self.sigma));
        }
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "c must be non-negative, got {}",
                self.c
            )));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        if let Some(m) = &self.dissipation_override {
            if m.dim() != 2 {
                return Err(Error::InvalidMatrix(
                    "dissipation override must be 2x2".into(),
                ));
            }
            psd_sqrt(m)?;
        }
        Ok(())
    }

    /// Inverse temperature `2c / alpha^2`.
    pub fn beta(&self) -> Result<f64> {
        if self.alpha == 0.0 {
            return Err(Error::ZeroNoise);
        }
        Ok(2.0 * self.c / (self.alpha * self.alpha))
    }

    fn dissipation(&self) -> Result<SymPsdMatrix> {
        match &self.dissipation_override {
            Some(m) => Ok(m.clone()),
            None => friction_matrix(self.sigma),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiskState {
    pub x: f64,
    pub v: f64,
    pub theta: f64,
    pub omega: f64,
}

impl DiskState {
    pub fn new(x: f64, v: f64, theta: f64, omega: f64) -> Self {
        DiskState { x, v, theta, omega }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlState {
    pub x: f64,
    pub v: f64,
}

/// `[[1, 1/sigma], [1/sigma, 1/sigma^2]]`
pub fn friction_matrix(sigma: f64) -> Result<SymPsdMatrix> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidSigma(sigma));
    }
    let s = 1.0 / sigma;
    SymPsdMatrix::new(2, &[1.0, s, s, s * s])
}

/// Deterministic accelerations `(dv/dt, domega/dt)`.
pub fn drift(state: &DiskState, params: &DiskParams) -> Result<(f64, f64)> {
    let c = params.dissipation()?;
    Ok(drift_with(state, params, &c))
}

fn drift_with(s: &DiskState, p: &DiskParams, c: &SymPsdMatrix) -> (f64, f64) {
    let m = (s.v, p.sigma * s.omega);
    let f1 = c.get(0, 0) * m.0 + c.get(0, 1) * m.1;
    let f2 = c.get(1, 0) * m.0 + c.get(1, 1) * m.1;
    (-p.potential.derivative(s.x) - p.c * f1, -p.c * f2)
}

pub fn energy(state: &DiskState, params: &DiskParams) -> f64 {
    0.5 * state.v * state.v
        + 0.5 * params.sigma * state.omega * state.omega
        + params.potential.value(state.x)
}

/// `(s_minus, s_plus) = (-v + sigma*omega, v + omega)`.
pub fn decoupled_coords(state: &DiskState, sigma: f64) -> (f64, f64) {
    (-state.v + sigma * state.omega, state.v + state.omega)
}

/// Long-time slope of the variance of `x + theta`: `2 alpha^2 sigma^2 / (c^2 (sigma^2 + 1))`.
pub fn diffusion_constant_xplustheta(params: &DiskParams) -> Result<f64> {
    if params.c == 0.0 {
        return Err(Error::ZeroFriction);
    }
    let (a, s, c) = (params.alpha, params.sigma, params.c);
    Ok(2.0 * a * a * s * s / (c * c * (s * s + 1.0)))
}

/// Long-time slope of the variance of `x` for flat U.
pub fn diffusion_constant_x_flat_u(params: &DiskParams) -> Result<f64> {
    let d = diffusion_constant_xplustheta(params)?;
    Ok(d / (params.sigma + 1.0).powi(2))
}

/// `(1/(4 beta (1+sigma)), 4/(beta (1+sigma)))`, bounds on the long-time variance of x over t^2.
pub fn ballistic_bounds(params: &DiskParams) -> Result<(f64, f64)> {
    if params.c == 0.0 {
        return Err(Error::ZeroFriction);
    }
    let b = params.beta()?;
    let k = b * (1.0 + params.sigma);
    Ok((1.0 / (4.0 * k), 4.0 / k))
}

/// A disk model with the friction tensor and its square root precomputed.
#[derive(Debug, Clone)]
pub struct DiskModel {
    params: DiskParams,
    c: SymPsdMatrix,
    sqrt_c: [f64; 4],
    sampler: Option<GibbsPositionSampler>,
}

impl DiskModel {
    pub fn new(params: DiskParams) -> Result<Self> {
        params.validate()?;
        let c = params.dissipation()?;
        let sqrt_c = match &params.dissipation_override {
            // Rank one: C^{1/2} = C / sqrt(tr C). Closed form keeps the null
            // direction exactly null.
            None => {
                let k = 1.0 / (1.0 + 1.0 / (params.sigma * params.sigma)).sqrt();
                let e = c.entries();
                [e[0] * k, e[1] * k, e[2] * k, e[3] * k]
            }
            Some(m) => {
                let s = psd_sqrt(m)?;
                let e = s.entries();
                [e[0], e[1], e[2], e[3]]
            }
        };
        let sampler = match params.beta() {
            Ok(b) if params.c > 0.0 => Some(GibbsPositionSampler::new(&params.potential, b)),
            _ => None,
        };
        Ok(DiskModel {
            params,
            c,
            sqrt_c,
            sampler,
        })
    }

    pub fn params(&self) -> &DiskParams {
        &self.params
    }

    pub fn drift(&self, s: &DiskState) -> (f64, f64) {
        drift_with(s, &self.params, &self.c)
    }

    /// One explicit step: momenta from the current state, then positions.
    #[inline]
    pub fn step(&self, s: &DiskState, h: f64, z: (f64, f64)) -> DiskState {
        let (av, aw) = self.drift(s);
        let k = self.params.alpha * h.sqrt();
        let nv = k * (self.sqrt_c[0] * z.0 + self.sqrt_c[1] * z.1);
        let nw = k * (self.sqrt_c[2] * z.0 + self.sqrt_c[3] * z.1);
        let v = s.v + h * av + nv;
        let omega = s.omega + h * aw + nw;
        DiskState {
            x: s.x + h * v,
            v,
            theta: s.theta + h * omega,
            omega,
        }
    }

    pub fn energy(&self, s: &DiskState) -> f64 {
        energy(s, &self.params)
    }

    /// Power removed by friction, `c m^T C m` with `m = (v, sigma*omega)`.
    pub fn dissipation_rate(&self, s: &DiskState) -> f64 {
        let m = (s.v, self.params.sigma * s.omega);
        let cm = (
            self.c.get(0, 0) * m.0 + self.c.get(0, 1) * m.1,
            self.c.get(1, 0) * m.0 + self.c.get(1, 1) * m.1,
        );
        self.params.c * (m.0 * cm.0 + m.1 * cm.1)
    }

    /// Mean energy injection per unit time, `(alpha^2/2) tr(diag(1, sigma) C)`.
    pub fn injection_rate(&self) -> f64 {
        0.5 * self.params.alpha.powi(2) * (self.c.get(0, 0) + self.params.sigma * self.c.get(1, 1))
    }
}

impl Model for DiskModel {
    type State = DiskState;

    fn noise_dim(&self) -> usize {
        2
    }

    fn initial_state(&self, ic: InitialCondition, rng: &mut StreamRng) -> Result<DiskState> {
        match ic {
            InitialCondition::Rest => Ok(DiskState::default()),
            InitialCondition::GibbsSample => {
                let sampler = self.sampler.as_ref().ok_or(if self.params.alpha == 0.0 {
                    Error::ZeroNoise
                } else {
                    Error::ZeroFriction
                })?;
                Ok(sample_with(sampler, &self.params, self.params.beta()?, rng))
            }
        }
    }

    fn step(&self, s: &DiskState, h: f64, z: &[f64]) -> Result<DiskState> {
        Ok(DiskModel::step(self, s, h, (z[0], z[1])))
    }

    /// Accumulator 0: friction work `sum h * dissipation_rate(state_k)`.
    fn aux_dim(&self) -> usize {
        1
    }

    fn accumulate(
        &self,
        before: &DiskState,
        _after: &DiskState,
        h: f64,
        _z: &[f64],
        aux: &mut [f64],
    ) {
        aux[0] += h * self.dissipation_rate(before);
    }
}

/// The 1-D Langevin control process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlModel {
    pub c: f64,
    pub alpha: f64,
}

impl Default for ControlModel {
    fn default() -> Self {
        ControlModel { c: 0.1, alpha: 5.0 }
    }
}

impl ControlModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0)
            || !self.c.is_finite()
            || !(self.alpha >= 0.0)
            || !self.alpha.is_finite()
        {
            return Err(Error::Validation(format!(
                "control c and alpha must be non-negative (got {}, {})",
                self.c, self.alpha
            )));
        }
        Ok(())
    }
}

impl Model for ControlModel {
    type State = ControlState;

    fn noise_dim(&self) -> usize {
        1
    }

    fn initial_state(&self, ic: InitialCondition, rng: &mut StreamRng) -> Result<ControlState> {
        match ic {
            InitialCondition::Rest => Ok(ControlState::default()),
            InitialCondition::GibbsSample => {
                let p = DiskParams {
                    sigma: 1.0,
                    c: self.c,
                    alpha: self.alpha,
                    potential: PotentialSpec::Symmetric,
                    dissipation_override: None,
                };
                let s = gibbs_sample_initial(&p, rng)?;
                Ok(ControlState { x: s.x, v: s.v })
            }
        }
    }

    fn step(&self, s: &ControlState, h: f64, z: &[f64]) -> Result<ControlState> {
        Ok(step_control(s, self.c, self.alpha, h, z[0]))
    }
}

/// Free-function form of [`DiskModel::step`].
pub fn step_svi(
    state: &DiskState,
    params: &DiskParams,
    h: f64,
    noise: (f64, f64),
) -> Result<DiskState> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {h}"
        )));
    }
    Ok(DiskModel::new(params.clone())?.step(state, h, noise))
}

/// `dV = -cV dt - cos(X) dt + alpha dB`, stepped like the disk.
pub fn step_control(state: &ControlState, c: f64, alpha: f64, h: f64, z: f64) -> ControlState {
    let v = state.v + h * (-c * state.v - state.x.cos()) + alpha * h.sqrt() * z;
    ControlState {
        x: state.x + h * v,
        v,
    }
}

/// `M(t) = E(t) - E(0) + c * sum h (v_k + omega_k)^2 - rate * t` along a trajectory
/// recorded at every step.
pub fn energy_balance_residual(
    states: &[DiskState],
    params: &DiskParams,
    h: f64,
) -> Result<Vec<f64>> {
    let model = DiskModel::new(params.clone())?;
    let Some(first) = states.first() else {
        return Ok(Vec::new());
    };
    let e0 = model.energy(first);
    let rate = model.injection_rate();
    let mut diss = 0.0;
    let mut out = Vec::with_capacity(states.len());
    for (k, s) in states.iter().enumerate() {
        out.push(model.energy(s) - e0 + diss - rate * h * k as f64);
        diss += h * model.dissipation_rate(s);
    }
    Ok(out)
}

/// Draw from the Gibbs measure `exp(-beta E)` on the torus.
pub fn gibbs_sample_initial<R: Rng + ?Sized>(
    params: &DiskParams,
    rng: &mut R,
) -> Result<DiskState> {
    let beta = params.beta()?;
    if params.c == 0.0 {
        return Err(Error::ZeroFriction);
    }
    let sampler = GibbsPositionSampler::new(&params.potential, beta);
    Ok(sample_with(&sampler, params, beta, rng))
}

pub(crate) fn sample_with<R: Rng + ?Sized>(
    sampler: &GibbsPositionSampler,
    params: &DiskParams,
    beta: f64,
    rng: &mut R,
) -> DiskState {
    let x = sampler.sample(rng);
    let zv: f64 = rng.sample(StandardNormal);
    let zw: f64 = rng.sample(StandardNormal);
    let theta = rng.gen::<f64>() * TAU;
    DiskState {
        x,
        v: zv / beta.sqrt(),
        theta,
        omega: zw / (beta * params.sigma).sqrt(),
    }
}

/// Inverse-CDF sampler for a density proportional to `exp(-beta U(x))` on `[0, 2pi)`.
#[derive(Debug, Clone)]
pub struct GibbsPositionSampler {
    cdf: Vec<f64>,
    flat: bool,
}

impl GibbsPositionSampler {
    pub fn new(u: &PotentialSpec, beta: f64) -> Self {
        if u.is_flat() {
            return GibbsPositionSampler {
                cdf: Vec::new(),
                flat: true,
            };
        }
        let dx = TAU / GIBBS_GRID as f64;
        let vals: Vec<f64> = (0..GIBBS_GRID)
            .map(|i| -beta * u.value((i as f64 + 0.5) * dx))
            .collect();
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut cdf = Vec::with_capacity(GIBBS_GRID + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in &vals {
            acc += (w - max).exp();
            cdf.push(acc);
        }
        for e in &mut cdf {
            *e /= acc;
        }
        GibbsPositionSampler { cdf, flat: false }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        if self.flat {
            return u * TAU;
        }
        // First cell whose upper CDF edge exceeds u, then linear within the cell.
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, GIBBS_GRID) - 1;
        let (lo, hi) = (self.cdf[i], self.cdf[i + 1]);
        let frac = if hi > lo { (u - lo) / (hi - lo) } else { 0.5 };
        (i as f64 + frac) * TAU / GIBBS_GRID as f64
    }
}
