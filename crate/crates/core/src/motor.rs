//! Fluctuation-driven magnetic motor: a magnetized ball on a plane, a free
//! inner ring of dipoles kicked by random torques, and a fixed outer ring.
//!
//! Ring moments are given in folded units (`mu |m| / 4 pi`, T m^3) so that
//! fields come out in Tesla. The ball axis enters the potential as a unit
//! vector scaled by `ball_coupling`; the inner-outer terms are scaled by
//! `ring_coupling`. The defaults are the SI moments of the magnets:
//! `2e-6 / 1e-7 = 20` A m^2 for the ball and `1 / 1e-7` for a folded ring moment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnet::{dipole_field, dipole_field_and_jacobian, Dipole, RingSpec, MU0_OVER_4PI};
use crate::so3::{rotate_step, RotationMatrix, Vec3};
use crate::stats::{InitialCondition, Model, StreamRng};

const ISOTHERMAL_RATIO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MotorMode {
    /// Ring kicked by noise, no ring friction, ball without noise.
    #[default]
    NonUniform,
    /// Ring and ball both carry matched friction and noise.
    Isothermal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotorParams {
    pub mass: f64,
    pub radius: f64,
    /// Scalar ball inertia (spherical ball).
    pub ball_inertia: f64,
    pub ball_friction: f64,
    pub ball_noise: f64,
    /// Multiplier on the `xi3 . B` terms.
    pub ball_coupling: f64,
    pub inner: RingSpec,
    pub ring_mass: f64,
    /// Transverse ring inertia `J`.
    pub ring_inertia: f64,
    /// Axial ring inertia `J3`.
    pub ring_inertia3: f64,
    pub ring_friction: f64,
    pub ring_noise: f64,
    pub outer: RingSpec,
    /// Multiplier on the inner-outer `m . B` terms.
    pub ring_coupling: f64,
    pub gravity: f64,
    /// Initial ball position in the plane.
    pub start: [f64; 2],
}

impl Default for MotorParams {
    fn default() -> Self {
        let (m, r) = (0.5, 0.04);
        let (ring_mass, ring_r) = (6.0, 0.75);
        let j3 = ring_mass * ring_r * ring_r;
        MotorParams {
            mass: m,
            radius: r,
            ball_inertia: 0.4 * m * r * r,
            ball_friction: 0.15,
            ball_noise: 2e-4,
            ball_coupling: 20.0,
            inner: RingSpec {
                radius: ring_r,
                height: 0.48,
                count: 20,
                phi: 0.0,
                theta: 0.0,
                moment: 2e-6,
            },
            ring_mass,
            ring_inertia: 0.5 * j3,
            ring_inertia3: j3,
            ring_friction: 0.15,
            ring_noise: 2e-4,
            outer: RingSpec {
                radius: 0.98,
                height: 0.48,
                count: 5,
                phi: 0.0,
                theta: 0.0,
                moment: 2e-6,
            },
            ring_coupling: 1.0 / MU0_OVER_4PI,
            gravity: 9.81,
            start: [0.45, 0.0],
        }
    }
}

impl MotorParams {
    /// Matched isothermal parameters with a common noise amplitude.
    pub fn isothermal(alpha: f64) -> Self {
        MotorParams {
            ball_noise: alpha,
            ring_noise: alpha,
            ..MotorParams::default()
        }
    }

    pub fn validate(&self, mode: MotorMode) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("radius", self.radius),
            ("ball_inertia", self.ball_inertia),
            ("ring_mass", self.ring_mass),
            ("ring_inertia", self.ring_inertia),
            ("ring_inertia3", self.ring_inertia3),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let nonneg = [
            ("ball_friction", self.ball_friction),
            ("ball_noise", self.ball_noise),
            ("ring_friction", self.ring_friction),
            ("ring_noise", self.ring_noise),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !self.ball_coupling.is_finite()
            || !self.ring_coupling.is_finite()
            || !self.start.iter().all(|v| v.is_finite())
        {
            return Err(Error::Validation(
                "couplings and start must be finite".into(),
            ));
        }
        self.inner.validate()?;
        self.outer.validate()?;
        if mode == MotorMode::Isothermal {
            // c_R / a_R^2 = c_B / a_B^2, compared cross-multiplied so zero noise is caught.
            let lhs = self.ring_friction * self.ball_noise * self.ball_noise;
            let rhs = self.ball_friction * self.ring_noise * self.ring_noise;
            let scale = lhs.abs().max(rhs.abs());
            if self.ball_noise == 0.0
                || self.ring_noise == 0.0
                || (lhs - rhs).abs() > ISOTHERMAL_RATIO_TOL * scale
            {
                return Err(Error::Validation(format!(
                    "isothermal mode requires ring_friction/ring_noise^2 = ball_friction/ball_noise^2 (got {} vs {})",
                    self.ring_friction / (self.ring_noise * self.ring_noise),
                    self.ball_friction / (self.ball_noise * self.ball_noise)
                )));
            }
        }
        Ok(())
    }

    /// Inverse temperature `2 c_B / a_B^2` of the isothermal mode.
    pub fn beta(&self) -> Result<f64> {
        if self.ball_noise == 0.0 {
            return Err(Error::ZeroNoise);
        }
        Ok(2.0 * self.ball_friction / (self.ball_noise * self.ball_noise))
    }

    /// `trace(I_R^-1)`.
    pub fn ring_inverse_trace(&self) -> f64 {
        2.0 / self.ring_inertia + 1.0 / self.ring_inertia3
    }

    /// Nonzero eigenvalue of the 4x4 ball dissipation matrix (multiplicity two).
    pub fn dissipation_eigenvalue(&self) -> f64 {
        1.0 / (self.mass * self.mass)
            + self.radius * self.radius / (self.ball_inertia * self.ball_inertia)
    }
}

/// Rows of the 4x4 ball dissipation matrix acting on `(m v1, m v2, J w1, J w2)`.
pub fn dissipation_matrix(p: &MotorParams) -> [[f64; 4]; 4] {
    let a = [1.0 / p.mass, 0.0, 0.0, -p.radius / p.ball_inertia];
    let b = [0.0, 1.0 / p.mass, p.radius / p.ball_inertia, 0.0];
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = a[i] * a[j] + b[i] * b[j];
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorState {
    pub x: Vec3,
    pub v: Vec3,
    pub ball: RotationMatrix,
    pub pi_ball: Vec3,
    pub ring: RotationMatrix,
    pub pi_ring: Vec3,
}

impl MotorState {
    pub fn at_rest(x: f64, y: f64, radius: f64) -> Self {
        MotorState {
            x: Vec3::new(x, y, radius),
            v: Vec3::ZERO,
            ball: RotationMatrix::IDENTITY,
            pi_ball: Vec3::ZERO,
            ring: RotationMatrix::IDENTITY,
            pi_ring: Vec3::ZERO,
        }
    }

    /// Ball symmetry axis.
    pub fn xi3(&self) -> Vec3 {
        self.ball.col(2)
    }

    /// Ring symmetry axis.
    pub fn zeta3(&self) -> Vec3 {
        self.ring.col(2)
    }

    /// Polar angle of the ball centre in the plane.
    pub fn angle(&self) -> f64 {
        self.x.y.atan2(self.x.x)
    }
}

/// Potential and the generalized forces `-dU` at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorForces {
    pub potential: f64,
    /// `-U_x`, full 3-vector (the normal part is absorbed by the constraint).
    pub force: Vec3,
    /// `-U_B`, spatial torque on the ball.
    pub ball_torque: Vec3,
    /// `-U_R`, spatial torque on the inner ring.
    pub ring_torque: Vec3,
}

#[derive(Debug, Clone)]
pub struct MotorModel {
    pub params: MotorParams,
    pub mode: MotorMode,
    /// Inner ring placement relative to its centre at identity attitude: (offset, folded moment).
    inner_ref: Vec<(Vec3, Vec3)>,
    outer: Vec<Dipole>,
    sqrt_scale: f64,
    silent: bool,
}

impl MotorModel {
    pub fn new(params: MotorParams, mode: MotorMode) -> Result<Self> {
        params.validate(mode)?;
        let inner_ref = params.inner.reference_dipoles();
        let outer = crate::magnet::build_ring(&params.outer);
        let silent = params.inner.moment == 0.0 && params.outer.moment == 0.0;
        let sqrt_scale = 1.0 / params.dissipation_eigenvalue().sqrt();
        Ok(MotorModel {
            params,
            mode,
            inner_ref,
            outer,
            sqrt_scale,
            silent,
        })
    }

    fn inner_center(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.params.inner.height)
    }

    /// Inner dipoles at the ring attitude `ring`.
    pub fn inner_dipoles(&self, ring: &RotationMatrix) -> Vec<Dipole> {
        let c = self.inner_center();
        self.inner_ref
            .iter()
            .map(|&(d, m)| Dipole {
                position: c + ring.apply(d),
                moment: ring.apply(m),
            })
            .collect()
    }

    pub fn outer_dipoles(&self) -> &[Dipole] {
        &self.outer
    }

    pub fn forces(&self, s: &MotorState) -> Result<MotorForces> {
        let mut f = MotorForces {
            potential: 0.0,
            force: Vec3::ZERO,
            ball_torque: Vec3::ZERO,
            ring_torque: Vec3::ZERO,
        };
        if self.silent {
            return Ok(f);
        }
        let kb = self.params.ball_coupling;
        let kr = self.params.ring_coupling;
        let xi = s.xi3();
        let c = self.inner_center();
        for &(d0, m0) in &self.inner_ref {
            let d = s.ring.apply(d0);
            let m = s.ring.apply(m0);
            let p = c + d;
            let r = s.x - p;
            let (b, db) = dipole_field_and_jacobian(r, m)?;
            let grad = db.tr_mul_vec(xi);
            f.potential -= 2.0 * kb * xi.dot(b);
            f.force += grad * (2.0 * kb);
            f.ball_torque += xi.cross(b) * (2.0 * kb);
            // Field of a unit dipole along xi at the ring dipole (even in r).
            let b0 = dipole_field(r, xi)?;
            f.ring_torque += (m.cross(b0) - d.cross(grad)) * (2.0 * kb);
            let mu = m * kr;
            for q in &self.outer {
                let (bj, dbj) = dipole_field_and_jacobian(p - q.position, q.moment)?;
                f.potential -= mu.dot(bj);
                f.ring_torque += mu.cross(bj) + d.cross(dbj.tr_mul_vec(mu));
            }
        }
        for q in &self.outer {
            let (b, db) = dipole_field_and_jacobian(s.x - q.position, q.moment)?;
            f.potential -= kb * xi.dot(b);
            f.force += db.tr_mul_vec(xi) * kb;
            f.ball_torque += xi.cross(b) * kb;
        }
        Ok(f)
    }

    pub fn total_potential(&self, s: &MotorState) -> Result<f64> {
        Ok(self.forces(s)?.potential)
    }

    pub fn ball_omega(&self, s: &MotorState) -> Vec3 {
        s.pi_ball / self.params.ball_inertia
    }

    pub fn ring_omega(&self, s: &MotorState) -> Vec3 {
        ring_legendre_inverse(
            s.pi_ring,
            s.zeta3(),
            self.params.ring_inertia,
            self.params.ring_inertia3,
        )
    }

    pub fn slip(&self, s: &MotorState) -> Vec3 {
        let w = self.ball_omega(s);
        let r = self.params.radius;
        Vec3::new(s.v.x - r * w.y, s.v.y + r * w.x, 0.0)
    }

    pub fn ring_energy(&self, s: &MotorState) -> f64 {
        0.5 * s.pi_ring.dot(self.ring_omega(s))
    }

    pub fn kinetic(&self, s: &MotorState) -> f64 {
        0.5 * self.params.mass * s.v.norm_squared()
            + 0.5 * s.pi_ball.norm_squared() / self.params.ball_inertia
            + self.ring_energy(s)
    }

    pub fn energy(&self, s: &MotorState) -> Result<f64> {
        Ok(self.kinetic(s) + self.total_potential(s)?)
    }

    /// Shared explicit update. `ball_kick` holds velocity increments
    /// `(dv1, dv2, dw1, dw2)`; `ring_kick` is a spatial momentum increment.
    fn advance(
        &self,
        s: &MotorState,
        h: f64,
        ring_friction: f64,
        ball_kick: [f64; 4],
        ring_kick: Vec3,
    ) -> Result<MotorState> {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {h}"
            )));
        }
        let p = &self.params;
        let f = self.forces(s)?;
        let vq = self.slip(s);
        let c = p.ball_friction;
        let jb = p.ball_inertia;
        let fv = f.force - vq * c;
        let v = Vec3::new(
            s.v.x + h * fv.x / p.mass + ball_kick[0],
            s.v.y + h * fv.y / p.mass + ball_kick[1],
            0.0,
        );
        let tb = f.ball_torque + Vec3::E3.cross(vq) * (c * p.radius);
        let pi_ball = Vec3::new(
            s.pi_ball.x + h * tb.x + jb * ball_kick[2],
            s.pi_ball.y + h * tb.y + jb * ball_kick[3],
            s.pi_ball.z + h * tb.z,
        );
        let tr = f.ring_torque - self.ring_omega(s) * ring_friction;
        let pi_ring = s.pi_ring + tr * h + ring_kick;
        let x = Vec3::new(s.x.x + h * v.x, s.x.y + h * v.y, p.radius);
        let ball = rotate_step(&s.ball, pi_ball / jb, h)?;
        let w_ring = ring_legendre_inverse(pi_ring, s.zeta3(), p.ring_inertia, p.ring_inertia3);
        let ring = rotate_step(&s.ring, w_ring, h)?;
        Ok(MotorState {
            x,
            v,
            ball,
            pi_ball,
            ring,
            pi_ring,
        })
    }

    /// Ring kicked by `ring_noise * sqrt(h) * z`; ball without noise; no ring friction.
    pub fn nonuniform_step(&self, s: &MotorState, h: f64, z: [f64; 3]) -> Result<MotorState> {
        let kick = Vec3::from_array(z) * (self.params.ring_noise * h.max(0.0).sqrt());
        self.advance(s, h, 0.0, [0.0; 4], kick)
    }

    /// `z[0..4]` drive the ball through the square root of the dissipation
    /// matrix, `z[4..7]` drive the ring.
    pub fn isothermal_step(&self, s: &MotorState, h: f64, z: [f64; 7]) -> Result<MotorState> {
        let sh = h.max(0.0).sqrt();
        let ball_kick = self.ball_kick(&z[..4], self.params.ball_noise * sh);
        let ring_kick = Vec3::new(z[4], z[5], z[6]) * (self.params.ring_noise * sh);
        self.advance(s, h, self.params.ring_friction, ball_kick, ring_kick)
    }

    /// `scale * C^{1/2} z` with the closed-form square root `C / sqrt(lambda)`.
    fn ball_kick(&self, z: &[f64], scale: f64) -> [f64; 4] {
        let c = dissipation_matrix(&self.params);
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = scale * self.sqrt_scale * (0..4).map(|j| c[i][j] * z[j]).sum::<f64>();
        }
        out
    }

    /// Energy removed by friction over one step from `s`.
    fn dissipation(&self, s: &MotorState, h: f64) -> f64 {
        let mut d = self.params.ball_friction * self.slip(s).norm_squared();
        if self.mode == MotorMode::Isothermal {
            d += self.params.ring_friction * self.ring_omega(s).norm_squared();
        }
        h * d
    }

    /// Ito work of the noise over one step from `s`: martingale part plus drift.
    fn injection(&self, s: &MotorState, h: f64, z: &[f64]) -> f64 {
        let p = &self.params;
        let sh = h.sqrt();
        let w = self.ring_omega(s);
        let (zr, ball) = match self.mode {
            MotorMode::NonUniform => (&z[..3], None),
            MotorMode::Isothermal => (&z[4..7], Some(&z[..4])),
        };
        let mut work = p.ring_noise * sh * (w.x * zr[0] + w.y * zr[1] + w.z * zr[2])
            + 0.5 * p.ring_noise * p.ring_noise * p.ring_inverse_trace() * h;
        if let Some(zb) = ball {
            let kick = self.ball_kick(zb, p.ball_noise * sh);
            let wb = self.ball_omega(s);
            let mom = [
                p.mass * s.v.x,
                p.mass * s.v.y,
                p.ball_inertia * wb.x,
                p.ball_inertia * wb.y,
            ];
            work += (0..4).map(|i| mom[i] * kick[i]).sum::<f64>();
            work += p.ball_noise
                * p.ball_noise
                * (1.0 / p.mass + p.radius * p.radius / p.ball_inertia)
                * h;
        }
        work
    }
}

/// Axisymmetric ring: `omega = (pi + (J - J3)/J3 (pi . zeta) zeta) / J`.
#[inline]
pub fn ring_legendre_inverse(pi: Vec3, zeta3: Vec3, j: f64, j3: f64) -> Vec3 {
    (pi + zeta3 * ((j - j3) / j3 * pi.dot(zeta3))) / j
}

/// Accumulators: `[dissipated, injected]`.
pub const AUX_DISSIPATED: usize = 0;
pub const AUX_INJECTED: usize = 1;

impl Model for MotorModel {
    type State = MotorState;

    fn noise_dim(&self) -> usize {
        match self.mode {
            MotorMode::NonUniform => 3,
            MotorMode::Isothermal => 7,
        }
    }

    fn initial_state(&self, ic: InitialCondition, _rng: &mut StreamRng) -> Result<MotorState> {
        match ic {
            InitialCondition::Rest => {
                let mut s = MotorState::at_rest(
                    self.params.start[0],
                    self.params.start[1],
                    self.params.radius,
                );
                // A tilted inner ring enters as its initial attitude.
                s.ring = self.params.inner.attitude();
                Ok(s)
            }
            InitialCondition::GibbsSample => Err(Error::InvalidParameter(
                "the motor supports only the rest initial condition".into(),
            )),
        }
    }

    fn step(&self, s: &MotorState, h: f64, z: &[f64]) -> Result<MotorState> {
        match self.mode {
            MotorMode::NonUniform => self.nonuniform_step(s, h, [z[0], z[1], z[2]]),
            MotorMode::Isothermal => {
                self.isothermal_step(s, h, [z[0], z[1], z[2], z[3], z[4], z[5], z[6]])
            }
        }
    }

    fn aux_dim(&self) -> usize {
        2
    }

    fn accumulate(
        &self,
        before: &MotorState,
        _after: &MotorState,
        h: f64,
        z: &[f64],
        aux: &mut [f64],
    ) {
        aux[AUX_DISSIPATED] += self.dissipation(before, h);
        aux[AUX_INJECTED] += self.injection(before, h, z);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub total: Vec<f64>,
    pub ring: Vec<f64>,
    pub dissipated: Vec<f64>,
    pub injected: Vec<f64>,
    /// `E(t) - E(0) + dissipated - injected`: discretisation error only.
    pub residual: Vec<f64>,
    /// Work transferred to the ball over the injected work; `None` without injection.
    pub efficiency: Option<f64>,
}

/// Assemble the ledger from recorded states and `[dissipated, injected]` snapshots.
pub fn energy_ledger(
    model: &MotorModel,
    states: &[MotorState],
    aux: &[Vec<f64>],
) -> Result<EnergyLedger> {
    if aux.len() != states.len() || aux.iter().any(|a| a.len() < 2) || states.is_empty() {
        return Err(Error::MissingNoiseRecord);
    }
    let total = states
        .iter()
        .map(|s| model.energy(s))
        .collect::<Result<Vec<_>>>()?;
    let ring: Vec<f64> = states.iter().map(|s| model.ring_energy(s)).collect();
    let dissipated: Vec<f64> = aux.iter().map(|a| a[AUX_DISSIPATED]).collect();
    let injected: Vec<f64> = aux.iter().map(|a| a[AUX_INJECTED]).collect();
    let residual = (0..states.len())
        .map(|k| total[k] - total[0] + dissipated[k] - injected[k])
        .collect();
    let last = states.len() - 1;
    let efficiency = if injected[last] != 0.0 {
        Some(((total[last] - total[0]) - (ring[last] - ring[0])) / injected[last])
    } else {
        None
    };
    Ok(EnergyLedger {
        total,
        ring,
        dissipated,
        injected,
        residual,
        efficiency,
    })
}

/// Continuous polar angle: `atan2` with 2 pi jumps removed.
pub fn unwrap_angles(raw: &[f64]) -> Vec<f64> {
    let tau = std::f64::consts::TAU;
    let mut out = Vec::with_capacity(raw.len());
    let mut offset = 0.0;
    for (k, &a) in raw.iter().enumerate() {
        if k > 0 {
            let d = a - raw[k - 1];
            if d > std::f64::consts::PI {
                offset -= tau;
            } else if d < -std::f64::consts::PI {
                offset += tau;
            }
        }
        out.push(a + offset);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotorRunSpec {
    pub h: f64,
    pub n_steps: usize,
    pub record_stride: usize,
}

impl Default for MotorRunSpec {
    fn default() -> Self {
        MotorRunSpec {
            h: 0.01,
            n_steps: 1_000_000,
            record_stride: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorRun {
    pub mode: MotorMode,
    pub times: Vec<f64>,
    pub states: Vec<MotorState>,
    /// Unwrapped polar angle of the ball.
    pub angle: Vec<f64>,
    pub ledger: EnergyLedger,
}

/// One realization; noise stream `index` of `seed`.
pub fn run_motor_experiment(
    mode: MotorMode,
    params: &MotorParams,
    spec: &MotorRunSpec,
    seed: u64,
    index: usize,
) -> Result<MotorRun> {
    if spec.record_stride == 0 || !(spec.h > 0.0) {
        return Err(Error::Validation(
            "record_stride and h must be positive".into(),
        ));
    }
    let model = MotorModel::new(params.clone(), mode)?;
    let mut rng = crate::stats::stream(seed, crate::stats::NOISE_DOMAIN, index as u64);
    let s0 = model.initial_state(InitialCondition::Rest, &mut rng)?;
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut aux = Vec::new();
    crate::stats::simulate_streaming(
        &model,
        s0,
        spec.h,
        spec.n_steps,
        spec.record_stride,
        &mut rng,
        |k, s, a| {
            times.push(k as f64 * spec.h);
            states.push(*s);
            aux.push(a.to_vec());
        },
    )?;
    let raw: Vec<f64> = states.iter().map(MotorState::angle).collect();
    let angle = unwrap_angles(&raw);
    let ledger = energy_ledger(&model, &states, &aux)?;
    Ok(MotorRun {
        mode,
        times,
        states,
        angle,
        ledger,
    })
}
