//! Hamel's magnetic top: a magnetized axisymmetric ball confined to a plane
//! under a ring of dipoles, optionally with sliding friction at the contact
//! point.
//!
//! Without friction the spin `J = pi . xi3` about the symmetry axis is a
//! constant of motion; friction torques are what make the ball spin up.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnet::{assembly_field, assembly_field_and_jacobian, build_ring, Dipole, RingSpec};
use crate::so3::{cayley_apply, rotate_step, RotationMatrix, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopParams {
    pub mass: f64,
    pub radius: f64,
    /// Transverse moment of inertia `I = I1 = I2`.
    pub inertia: f64,
    /// Axial moment of inertia `I3`.
    pub inertia3: f64,
    pub friction: f64,
    /// Strength of the ball's dipole (folded convention).
    pub ball_moment: f64,
    pub ring: RingSpec,
    pub gravity: f64,
    /// Integrate the full attitude matrix instead of `xi3` alone.
    #[serde(default)]
    pub full_rotation: bool,
}

impl Default for TopParams {
    fn default() -> Self {
        let (m, r) = (0.2, 0.018);
        let i = 0.4 * m * r * r;
        TopParams {
            mass: m,
            radius: r,
            inertia: i,
            inertia3: i,
            friction: 0.3,
            ball_moment: 1.0,
            ring: RingSpec {
                radius: 0.34,
                height: 0.20,
                count: 20,
                phi: 0.0,
                theta: 0.0,
                moment: 1e-5,
            },
            gravity: 9.81,
            full_rotation: false,
        }
    }
}

impl TopParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass", self.mass),
            ("radius", self.radius),
            ("inertia", self.inertia),
            ("inertia3", self.inertia3),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.friction >= 0.0) || !self.friction.is_finite() {
            return Err(Error::Validation(format!(
                "friction must be non-negative, got {}",
                self.friction
            )));
        }
        if !self.ball_moment.is_finite() || !self.gravity.is_finite() {
            return Err(Error::Validation(
                "ball_moment and gravity must be finite".into(),
            ));
        }
        self.ring.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopState {
    /// Centre of mass; `x.z` equals the ball radius.
    pub x: Vec3,
    /// Velocity; `v.z` is zero.
    pub v: Vec3,
    /// Unit symmetry axis.
    pub xi3: Vec3,
    /// Spatial angular momentum.
    pub pi: Vec3,
    /// Full attitude when integrating on SO(3); its third column is `xi3`.
    pub attitude: Option<RotationMatrix>,
}

impl TopState {
    pub fn at_rest(x: f64, y: f64, radius: f64) -> Self {
        TopState {
            x: Vec3::new(x, y, radius),
            v: Vec3::ZERO,
            xi3: Vec3::E3,
            pi: Vec3::ZERO,
            attitude: None,
        }
    }
}

/// Time derivative of a [`TopState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopRate {
    pub x: Vec3,
    pub v: Vec3,
    pub xi3: Vec3,
    pub pi: Vec3,
}

/// Axisymmetric inverse Legendre transform `omega(pi)`.
#[inline]
pub fn legendre_inverse(pi: Vec3, xi3: Vec3, i: f64, i3: f64) -> Vec3 {
    (pi + xi3 * ((i - i3) / i3 * pi.dot(xi3))) / i
}

/// Contact-point velocity `v + omega x (-r e3)`.
#[inline]
pub fn slip_velocity(v: Vec3, omega: Vec3, r: f64) -> Vec3 {
    v + omega.cross(Vec3::new(0.0, 0.0, -r))
}

/// `J = pi . xi3`.
pub fn momentum_map(state: &TopState) -> f64 {
    state.pi.dot(state.xi3)
}

fn planar(v: Vec3) -> Vec3 {
    Vec3::new(v.x, v.y, 0.0)
}

/// Top with its ring assembled once.
#[derive(Debug, Clone)]
pub struct TopModel {
    pub params: TopParams,
    pub dipoles: Vec<Dipole>,
}

impl TopModel {
    pub fn new(params: TopParams) -> Result<Self> {
        params.validate()?;
        let dipoles = build_ring(&params.ring);
        Ok(TopModel { params, dipoles })
    }

    pub fn omega(&self, s: &TopState) -> Vec3 {
        legendre_inverse(s.pi, s.xi3, self.params.inertia, self.params.inertia3)
    }

    pub fn slip(&self, s: &TopState) -> Vec3 {
        slip_velocity(s.v, self.omega(s), self.params.radius)
    }

    pub fn conservative_rhs(&self, s: &TopState) -> Result<TopRate> {
        let k = self.params.ball_moment;
        let (b, db) = assembly_field_and_jacobian(&self.dipoles, s.x)?;
        let omega = self.omega(s);
        Ok(TopRate {
            x: s.v,
            v: planar(db.tr_mul_vec(s.xi3)) * (k / self.params.mass),
            xi3: omega.cross(s.xi3),
            pi: s.xi3.cross(b) * k,
        })
    }

    pub fn nonconservative_rhs(&self, s: &TopState) -> Result<TopRate> {
        let mut rate = self.conservative_rhs(s)?;
        let c = self.params.friction;
        if c != 0.0 {
            let vq = self.slip(s);
            rate.v -= vq * (c / self.params.mass);
            rate.pi += Vec3::E3.cross(vq) * (c * self.params.radius);
        }
        Ok(rate)
    }

    /// Momenta first from forces at the current state, then position, then
    /// attitude by a Cayley rotation with the updated angular velocity.
    pub fn hp_step(&self, s: &TopState, h: f64) -> Result<TopState> {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {h}"
            )));
        }
        let rate = self.nonconservative_rhs(s)?;
        let pi = s.pi + rate.pi * h;
        let v = planar(s.v + rate.v * h);
        let x = Vec3::new(s.x.x + h * v.x, s.x.y + h * v.y, self.params.radius);
        let omega = legendre_inverse(pi, s.xi3, self.params.inertia, self.params.inertia3);
        let (xi3, attitude) = match (self.params.full_rotation, s.attitude) {
            (true, r) => {
                let r = r.unwrap_or_else(|| attitude_from_axis(s.xi3));
                let r1 = rotate_step(&r, omega, h)?;
                (r1.col(2), Some(r1))
            }
            (false, _) => (cayley_apply(omega * h, s.xi3)?, None),
        };
        Ok(TopState {
            x,
            v,
            xi3,
            pi,
            attitude,
        })
    }

    /// Potential `-k xi3 . B(x)` plus the constant gravitational term `m g r`.
    pub fn potential(&self, s: &TopState) -> Result<f64> {
        let b = assembly_field(&self.dipoles, s.x)?;
        Ok(
            -self.params.ball_moment * s.xi3.dot(b)
                + self.params.mass * self.params.gravity * s.x.z,
        )
    }

    pub fn kinetic(&self, s: &TopState) -> f64 {
        0.5 * self.params.mass * s.v.norm_squared() + 0.5 * self.omega(s).dot(s.pi)
    }

    pub fn energy(&self, s: &TopState) -> Result<f64> {
        Ok(self.kinetic(s) + self.potential(s)?)
    }
}

/// Some rotation whose third column is `xi3`.
pub fn attitude_from_axis(xi3: Vec3) -> RotationMatrix {
    let z = xi3.normalized();
    let c = Vec3::E3.cross(z);
    let s = c.norm();
    if s < 1e-15 {
        return if z.z > 0.0 {
            RotationMatrix::IDENTITY
        } else {
            RotationMatrix::from_axis_angle(Vec3::E1, std::f64::consts::PI)
        };
    }
    RotationMatrix::from_axis_angle(c, s.atan2(z.z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopCase {
    ConservativeAxisymmetric,
    ConservativeTilted,
    FrictionAxisymmetric,
    FrictionTilted,
}

impl TopCase {
    pub const ALL: [TopCase; 4] = [
        TopCase::ConservativeAxisymmetric,
        TopCase::ConservativeTilted,
        TopCase::FrictionAxisymmetric,
        TopCase::FrictionTilted,
    ];

    pub fn has_friction(self) -> bool {
        matches!(
            self,
            TopCase::FrictionAxisymmetric | TopCase::FrictionTilted
        )
    }

    pub fn is_tilted(self) -> bool {
        matches!(self, TopCase::ConservativeTilted | TopCase::FrictionTilted)
    }

    pub fn name(self) -> &'static str {
        match self {
            TopCase::ConservativeAxisymmetric => "conaxi",
            TopCase::ConservativeTilted => "contilt",
            TopCase::FrictionAxisymmetric => "axi",
            TopCase::FrictionTilted => "tilt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopExperiment {
    pub h: f64,
    pub n_steps: usize,
    /// Ring normal for the tilted cases: `(phi, theta)`.
    pub tilt_phi: f64,
    pub tilt_theta: f64,
    /// Initial centre of mass in the plane.
    pub start: [f64; 2],
    pub record_stride: usize,
}

impl Default for TopExperiment {
    fn default() -> Self {
        TopExperiment {
            h: 0.025,
            n_steps: 20_000,
            tilt_phi: std::f64::consts::PI / 64.0,
            tilt_theta: 0.0,
            start: [0.0, 0.05],
            record_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopRun {
    pub case: TopCase,
    /// Ring normal actually used.
    pub phi: f64,
    pub theta: f64,
    pub friction: f64,
    pub times: Vec<f64>,
    pub states: Vec<TopState>,
    pub momentum: Vec<f64>,
    pub energy: Vec<f64>,
}

impl TopRun {
    /// `max |J(t) - J(0)|`.
    pub fn momentum_drift(&self) -> f64 {
        let j0 = self.momentum[0];
        self.momentum.iter().fold(0.0, |a, j| a.max((j - j0).abs()))
    }

    pub fn max_angular_momentum(&self) -> f64 {
        self.states.iter().fold(0.0, |a, s| a.max(s.pi.norm()))
    }
}

/// Parameters of `case`: conservative cases drop friction, untilted cases drop the tilt.
pub fn case_params(case: TopCase, base: &TopParams, exp: &TopExperiment) -> TopParams {
    let mut p = base.clone();
    if !case.has_friction() {
        p.friction = 0.0;
    }
    if case.is_tilted() {
        p.ring.phi = exp.tilt_phi;
        p.ring.theta = exp.tilt_theta;
    } else {
        p.ring.phi = 0.0;
        p.ring.theta = 0.0;
    }
    p
}

pub fn run_experiment(case: TopCase, base: &TopParams, exp: &TopExperiment) -> Result<TopRun> {
    if exp.record_stride == 0 {
        return Err(Error::Validation("record_stride must be positive".into()));
    }
    let params = case_params(case, base, exp);
    let model = TopModel::new(params.clone())?;
    let mut s = TopState::at_rest(exp.start[0], exp.start[1], params.radius);
    if params.full_rotation {
        s.attitude = Some(attitude_from_axis(s.xi3));
    }
    let mut run = TopRun {
        case,
        phi: params.ring.phi,
        theta: params.ring.theta,
        friction: params.friction,
        times: Vec::new(),
        states: Vec::new(),
        momentum: Vec::new(),
        energy: Vec::new(),
    };
    let mut record = |k: usize, s: &TopState| -> Result<()> {
        run.times.push(k as f64 * exp.h);
        run.states.push(*s);
        run.momentum.push(momentum_map(s));
        run.energy.push(model.energy(s)?);
        Ok(())
    };
    record(0, &s)?;
    for k in 1..=exp.n_steps {
        s = model.hp_step(&s, exp.h)?;
        if k % exp.record_stride == 0 || k == exp.n_steps {
            record(k, &s)?;
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn no_field() -> TopParams {
        TopParams {
            ring: RingSpec {
                moment: 0.0,
                ..TopParams::default().ring
            },
            ..TopParams::default()
        }
    }

    fn arb_unit() -> impl Strategy<Value = Vec3> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 0.01)
            .prop_map(|(x, y, z)| Vec3::new(x, y, z).normalized())
    }

    fn arb_vec(s: f64) -> impl Strategy<Value = Vec3> {
        (-s..s, -s..s, -s..s).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    #[test]
    fn legendre_examples() {
        let xi = Vec3::new(0.0, 0.6, 0.8);
        let (i, i3) = (2.0, 5.0);
        let w = legendre_inverse(xi * 3.0, xi, i, i3);
        assert!((w - xi * (3.0 / i3)).norm() < 1e-15);
        let perp = Vec3::new(1.0, 0.0, 0.0);
        assert!((legendre_inverse(perp, xi, i, i3) - perp / i).norm() < 1e-15);
        let p = Vec3::new(0.3, -1.0, 2.0);
        assert!((legendre_inverse(p, xi, 4.0, 4.0) - p / 4.0).norm() < 1e-15);
    }

    #[test]
    fn slip_examples() {
        assert_eq!(
            slip_velocity(Vec3::ZERO, Vec3::new(0.0, 0.0, 3.0), 0.1),
            Vec3::ZERO
        );
        assert_eq!(slip_velocity(Vec3::E1, Vec3::ZERO, 0.1), Vec3::E1);
        let s = slip_velocity(Vec3::ZERO, Vec3::new(0.0, 2.0, 0.0), 0.5);
        assert!((s - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn momentum_map_examples() {
        let mut s = TopState::at_rest(0.0, 0.0, 0.1);
        s.pi = Vec3::E3;
        assert_eq!(momentum_map(&s), 1.0);
        s.pi = Vec3::E1;
        assert_eq!(momentum_map(&s), 0.0);
    }

    #[test]
    fn free_motion_without_field() {
        let m = TopModel::new(TopParams {
            friction: 0.0,
            ..no_field()
        })
        .unwrap();
        let mut s = TopState::at_rest(0.1, 0.2, m.params.radius);
        assert_eq!(m.hp_step(&s, 0.01).unwrap(), s);
        s.v = Vec3::new(0.3, -0.1, 0.0);
        s.pi = Vec3::new(1e-5, 2e-5, -1e-5);
        let r = m.conservative_rhs(&s).unwrap();
        assert_eq!(r.v, Vec3::ZERO);
        assert_eq!(r.pi, Vec3::ZERO);
        let n = m.hp_step(&s, 0.01).unwrap();
        assert_eq!(n.v, s.v);
        assert_eq!(n.pi, s.pi);
    }

    #[test]
    fn aligned_fixed_point() {
        // Centre of the untilted ring: grad |B|^2 = 0 and B is vertical.
        let p = TopParams::default();
        let m = TopModel::new(p.clone()).unwrap();
        let x = Vec3::new(0.0, 0.0, p.radius);
        let b = assembly_field(&m.dipoles, x).unwrap();
        let s = TopState {
            x,
            v: Vec3::ZERO,
            xi3: b.normalized(),
            pi: Vec3::ZERO,
            attitude: None,
        };
        let r = m.nonconservative_rhs(&s).unwrap();
        assert!(r.pi.norm() < 1e-15 * b.norm());
        assert!(r.v.norm() < 1e-12 * b.norm());
    }

    #[test]
    fn xi3_norm_after_long_run() {
        let m = TopModel::new(TopParams {
            friction: 0.0,
            ..TopParams::default()
        })
        .unwrap();
        let mut s = TopState::at_rest(0.0, 0.05, m.params.radius);
        s.pi = Vec3::new(2e-4, -1e-4, 3e-4);
        for _ in 0..1_000_000 {
            s = m.hp_step(&s, 0.025).unwrap();
        }
        assert!((s.xi3.norm() - 1.0).abs() < 1e-8, "{}", s.xi3.norm());
    }

    #[test]
    fn full_rotation_matches_axis_mode() {
        let base = TopParams {
            friction: 0.3,
            ..TopParams::default()
        };
        let exp = TopExperiment {
            n_steps: 4000,
            ..Default::default()
        };
        let a = run_experiment(TopCase::FrictionTilted, &base, &exp).unwrap();
        let b = run_experiment(
            TopCase::FrictionTilted,
            &TopParams {
                full_rotation: true,
                ..base
            },
            &exp,
        )
        .unwrap();
        for (sa, sb) in a.states.iter().zip(&b.states) {
            assert!((sa.xi3 - sb.xi3).norm() < 1e-10);
            assert!((sa.x - sb.x).norm() < 1e-10);
            let r = sb.attitude.unwrap();
            assert!(r.orthogonality_defect() < 1e-12);
        }
    }

    #[test]
    fn spherical_conservative_preserves_zero_spin() {
        let base = TopParams::default();
        let exp = TopExperiment::default();
        for case in [
            TopCase::ConservativeAxisymmetric,
            TopCase::ConservativeTilted,
        ] {
            let run = run_experiment(case, &base, &exp).unwrap();
            let scale = f64::EPSILON * run.max_angular_momentum() * (exp.n_steps as f64).sqrt();
            assert!(
                run.momentum_drift() <= 10.0 * scale,
                "{case:?}: {}",
                run.momentum_drift()
            );
        }
    }

    #[test]
    fn asymmetric_top_momentum_drift_is_first_order() {
        let base = TopParams {
            inertia3: 1.7 * TopParams::default().inertia,
            ..TopParams::default()
        };
        let drift = |h: f64| {
            let model = TopModel::new(case_params(
                TopCase::ConservativeTilted,
                &base,
                &TopExperiment::default(),
            ))
            .unwrap();
            let mut s = TopState::at_rest(0.0, 0.05, base.radius);
            s.pi = Vec3::new(1e-4, 0.0, 2e-4);
            let j0 = momentum_map(&s);
            let mut worst = 0.0f64;
            for _ in 0..(10.0 / h).round() as usize {
                s = model.hp_step(&s, h).unwrap();
                worst = worst.max((momentum_map(&s) - j0).abs());
            }
            worst
        };
        let (d1, d2, d3) = (drift(0.01), drift(0.005), drift(0.0025));
        let o1 = (d1 / d2).log2();
        let o2 = (d2 / d3).log2();
        assert!(
            o1 > 0.8 && o2 > 0.8,
            "orders {o1} {o2} (drifts {d1} {d2} {d3})"
        );
    }

    #[test]
    fn conservative_energy_has_no_secular_drift() {
        let base = TopParams::default();
        let exp = TopExperiment::default();
        let run = run_experiment(TopCase::ConservativeTilted, &base, &exp).unwrap();
        let e0 = run.energy[0];
        let n = run.energy.len();
        let quarter = |k: usize| {
            let sl = &run.energy[k * n / 4..(k + 1) * n / 4];
            sl.iter().sum::<f64>() / sl.len() as f64 - e0
        };
        let swing = run.energy.iter().fold(0.0f64, |a, e| a.max((e - e0).abs()));
        // The mean offset of the last quarter matches the first: bounded oscillation.
        assert!(
            (quarter(3) - quarter(0)).abs() <= 0.5 * swing.max(1e-300),
            "{} vs {}",
            quarter(3),
            quarter(0)
        );
        let pot_scale = run.energy.iter().fold(0.0f64, |a, e| {
            a.max((e - base.mass * base.gravity * base.radius).abs())
        });
        assert!(swing < 0.1 * pot_scale, "swing {swing} vs {pot_scale}");
    }

    #[test]
    fn friction_energy_nonincreasing() {
        let base = TopParams::default();
        let exp = TopExperiment {
            n_steps: 20_000,
            ..Default::default()
        };
        let run = run_experiment(TopCase::FrictionTilted, &base, &exp).unwrap();
        let lo = run.energy.iter().cloned().fold(f64::INFINITY, f64::min);
        let range = run.energy[0] - lo;
        assert!(range > 0.0);
        let worst = run
            .energy
            .windows(2)
            .fold(0.0f64, |a, w| a.max(w[1] - w[0]));
        eprintln!(
            "worst rise {worst:e} range {range:e} ratio {:e}",
            worst / (range * exp.h * exp.h)
        );
        // Per-step rises are an O(h^2) discretisation effect, measured in units of the energy released.
        assert!(
            worst <= 0.1 * exp.h * exp.h * range,
            "rise {worst} vs range {range}"
        );
    }

    proptest! {
        #[test]
        fn legendre_round_trip(xi in arb_unit(), w in arb_vec(10.0), i in 0.1..3.0f64, i3 in 0.1..3.0f64) {
            let pi = w * i + xi * ((i3 - i) * w.dot(xi));
            let back = legendre_inverse(pi, xi, i, i3);
            prop_assert!((back - w).norm() <= 1e-12 * w.norm().max(1.0));
        }

        #[test]
        fn torque_orthogonal_to_axis(x in -0.5..0.5f64, y in -0.5..0.5f64, xi in arb_unit()) {
            let m = TopModel::new(TopParams { ring: RingSpec { phi: 0.2, theta: 1.0, ..TopParams::default().ring }, ..TopParams::default() }).unwrap();
            let s = TopState { x: Vec3::new(x, y, m.params.radius), v: Vec3::ZERO, xi3: xi, pi: Vec3::ZERO, attitude: None };
            let r = m.conservative_rhs(&s).unwrap();
            prop_assert!(r.pi.dot(xi).abs() <= 1e-14 * r.pi.norm().max(1e-300));
        }

        #[test]
        fn power_balance(x in -0.4..0.4f64, y in -0.4..0.4f64, xi in arb_unit(), v in arb_vec(0.5), w in arb_vec(20.0), asym in 0.5..2.0f64) {
            let base = TopParams::default();
            let p = TopParams { inertia3: base.inertia * asym, ring: RingSpec { phi: 0.1, ..base.ring.clone() }, ..base };
            let m = TopModel::new(p.clone()).unwrap();
            let pi = w * p.inertia + xi * ((p.inertia3 - p.inertia) * w.dot(xi));
            let s = TopState { x: Vec3::new(x, y, p.radius), v: Vec3::new(v.x, v.y, 0.0), xi3: xi, pi, attitude: None };
            let r = m.nonconservative_rhs(&s).unwrap();
            let omega = m.omega(&s);
            // dE/dt along the flow, from the chain rule on each energy term.
            let (b, db) = assembly_field_and_jacobian(&m.dipoles, s.x).unwrap();
            let k = p.ball_moment;
            let d_trans = p.mass * s.v.dot(r.v);
            let d_rot = omega.dot(r.pi);
            let d_pot = -k * (r.xi3.dot(b) + s.xi3.dot(db.mul_vec(r.x)));
            let lhs = d_trans + d_rot + d_pot;
            let rhs = -p.friction * m.slip(&s).norm_squared();
            let scale = d_trans.abs() + d_rot.abs() + d_pot.abs() + rhs.abs();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale, "lhs {} rhs {}", lhs, rhs);
        }
    }
}
