//! C ABI over the simulation library.
//!
//! Every fallible function returns a [`BallisticStatus`]; on failure the
//! message is kept per thread and read with [`ballistic_last_error`].
//! Handles are opaque and must be released with their `_free` function.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ballistic::disk::{self, DiskModel, DiskParams, DiskState, PotentialSpec};
use ballistic::magnet;
use ballistic::motor::{
    MotorMode, MotorModel, MotorParams, MotorState, AUX_DISSIPATED, AUX_INJECTED,
};
use ballistic::so3::Vec3;
use ballistic::stats::{self, InitialCondition, Model, SeriesSet, StreamRng, NOISE_DOMAIN};
use ballistic::top::{self, TopCase, TopExperiment, TopModel, TopParams, TopState};
use ballistic::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallisticStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Singular = 3,
    Runtime = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> BallisticStatus {
    match e {
        Error::SingularUpdate(_) | Error::SingularFieldPoint(_) | Error::DegenerateVariance => {
            BallisticStatus::Singular
        }
        Error::Io(_) | Error::MissingNoiseRecord => BallisticStatus::Runtime,
        _ => BallisticStatus::InvalidArgument,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Error>) -> BallisticStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BallisticStatus::Ok,
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            BallisticStatus::Runtime
        }
    }
}

macro_rules! non_null {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            set_error(format!("`{}` is null", stringify!($p)));
            return BallisticStatus::NullPointer;
        })+
    };
}

/// Message of the last failure on this thread; valid until the next failing call.
#[no_mangle]
pub extern "C" fn ballistic_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ballistic_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

unsafe fn vec3(p: *const f64) -> Vec3 {
    Vec3::new(*p, *p.add(1), *p.add(2))
}

unsafe fn put3(p: *mut f64, v: Vec3) {
    *p = v.x;
    *p.add(1) = v.y;
    *p.add(2) = v.z;
}

/// Field of a point dipole `m` at offset `r`, written to `out[3]`.
///
/// # Safety
/// `r`, `m` and `out` must point to three doubles each.
#[no_mangle]
pub unsafe extern "C" fn ballistic_dipole_field(
    r: *const f64,
    m: *const f64,
    out: *mut f64,
) -> BallisticStatus {
    non_null!(r, m, out);
    guard(|| {
        put3(out, magnet::dipole_field(vec3(r), vec3(m))?);
        Ok(())
    })
}

/// Jacobian of the dipole field, row-major into `out[9]`.
///
/// # Safety
/// `r` and `m` must point to three doubles, `out` to nine.
#[no_mangle]
pub unsafe extern "C" fn ballistic_dipole_jacobian(
    r: *const f64,
    m: *const f64,
    out: *mut f64,
) -> BallisticStatus {
    non_null!(r, m, out);
    guard(|| {
        let j = magnet::dipole_field_jacobian(vec3(r), vec3(m))?;
        for (i, row) in j.0.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                *out.add(3 * i + k) = *v;
            }
        }
        Ok(())
    })
}

/// Long-time diffusion slopes of the disk: of `x + theta`, and of `x` for flat U.
///
/// # Safety
/// Output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ballistic_diffusion_constants(
    sigma: f64,
    c: f64,
    alpha: f64,
    out_xplustheta: *mut f64,
    out_x_flat: *mut f64,
) -> BallisticStatus {
    non_null!(out_xplustheta, out_x_flat);
    guard(|| {
        let p = DiskParams {
            sigma,
            c,
            alpha,
            ..DiskParams::default()
        };
        p.validate()?;
        *out_xplustheta = disk::diffusion_constant_xplustheta(&p)?;
        *out_x_flat = disk::diffusion_constant_x_flat_u(&p)?;
        Ok(())
    })
}

/// Mean squared displacement of `n_traj` series of `n_rec` records each
/// (row-major `values[traj * n_rec + rec]`), all sharing one initial condition.
///
/// # Safety
/// `values` must hold `n_traj * n_rec` doubles and `out` `n_rec`.
#[no_mangle]
pub unsafe extern "C" fn ballistic_msd(
    values: *const f64,
    n_traj: usize,
    n_rec: usize,
    out: *mut f64,
) -> BallisticStatus {
    non_null!(values, out);
    guard(|| {
        let flat = std::slice::from_raw_parts(values, n_traj * n_rec);
        let set = SeriesSet {
            times: (0..n_rec).map(|k| k as f64).collect(),
            values: flat.chunks(n_rec.max(1)).map(<[f64]>::to_vec).collect(),
            groups: vec![0; n_traj],
        };
        let m = stats::msd(&set)?;
        std::slice::from_raw_parts_mut(out, n_rec).copy_from_slice(&m);
        Ok(())
    })
}

/// Slope of `log series` against `log times` over the last decade.
///
/// # Safety
/// `times` and `series` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ballistic_loglog_exponent(
    times: *const f64,
    series: *const f64,
    n: usize,
    out_slope: *mut f64,
) -> BallisticStatus {
    non_null!(times, series, out_slope);
    guard(|| {
        let t = std::slice::from_raw_parts(times, n);
        let s = std::slice::from_raw_parts(series, n);
        *out_slope = stats::loglog_exponent(t, s, None)?.slope;
        Ok(())
    })
}

/// A model, its current state, noise stream and running accumulators.
struct Sim<M: Model> {
    model: M,
    state: M::State,
    rng: StreamRng,
    aux: Vec<f64>,
}

impl<M: Model> Sim<M> {
    fn new(model: M, seed: u64) -> Result<Self, Error> {
        let mut rng = stats::stream(seed, NOISE_DOMAIN, 0);
        let state = model.initial_state(InitialCondition::Rest, &mut rng)?;
        let aux = vec![0.0; model.aux_dim()];
        Ok(Sim {
            model,
            state,
            rng,
            aux,
        })
    }

    fn advance(&mut self, h: f64, n_steps: usize) -> Result<(), Error> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive (got {h})"
            )));
        }
        // The streaming driver restarts its accumulators at zero; add them on.
        let mut last = Vec::new();
        let stride = n_steps.max(1);
        self.state = stats::simulate_streaming(
            &self.model,
            self.state.clone(),
            h,
            n_steps,
            stride,
            &mut self.rng,
            |_, _, a| {
                last = a.to_vec();
            },
        )?;
        for (v, d) in self.aux.iter_mut().zip(&last) {
            *v += d;
        }
        Ok(())
    }
}

unsafe fn into_handle<T>(value: T, out: *mut *mut T) {
    *out = Box::into_raw(Box::new(value));
}

unsafe fn drop_handle<T>(h: *mut T) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

// ---------------------------------------------------------------------------
// Sliding disk

/// Opaque sliding-disk simulation.
pub struct BallisticDisk(Sim<DiskModel>);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BallisticDiskState {
    pub x: f64,
    pub v: f64,
    pub theta: f64,
    pub omega: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallisticPotential {
    Flat = 0,
    Symmetric = 1,
    Asymmetric = 2,
}

/// Create a disk at rest.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ballistic_disk_new(
    sigma: f64,
    c: f64,
    alpha: f64,
    potential: BallisticPotential,
    seed: u64,
    out: *mut *mut BallisticDisk,
) -> BallisticStatus {
    non_null!(out);
    *out = ptr::null_mut();
    guard(|| {
        let potential = match potential {
            BallisticPotential::Flat => PotentialSpec::Flat,
            BallisticPotential::Symmetric => PotentialSpec::Symmetric,
            BallisticPotential::Asymmetric => PotentialSpec::Asymmetric,
        };
        let model = DiskModel::new(DiskParams {
            sigma,
            c,
            alpha,
            potential,
            dissipation_override: None,
        })?;
        into_handle(BallisticDisk(Sim::new(model, seed)?), out);
        Ok(())
    })
}

/// # Safety
/// `disk` must come from [`ballistic_disk_new`] (or be null).
#[no_mangle]
pub unsafe extern "C" fn ballistic_disk_free(disk: *mut BallisticDisk) {
    drop_handle(disk);
}

/// Advance by `n_steps` steps of size `h` with the internal noise stream.
///
/// # Safety
/// `disk` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ballistic_disk_step(
    disk: *mut BallisticDisk,
    h: f64,
    n_steps: usize,
) -> BallisticStatus {
    non_null!(disk);
    guard(|| (*disk).0.advance(h, n_steps))
}

/// One step driven by caller-supplied standard normals.
///
/// # Safety
/// `disk` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ballistic_disk_step_with_noise(
    disk: *mut BallisticDisk,
    h: f64,
    z1: f64,
    z2: f64,
) -> BallisticStatus {
    non_null!(disk);
    guard(|| {
        let sim = &mut (*disk).0;
        let next = Model::step(&sim.model, &sim.state, h, &[z1, z2])?;
        sim.model
            .accumulate(&sim.state, &next, h, &[z1, z2], &mut sim.aux);
        sim.state = next;
        Ok(())
    })
}

/// # Safety
/// `disk` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ballistic_disk_get_state(
    disk: *const BallisticDisk,
    out: *mut BallisticDiskState,
) -> BallisticStatus {
    non_null!(disk, out);
    let s = &(*disk).0.state;
    *out = BallisticDiskState {
        x: s.x,
        v: s.v,
        theta: s.theta,
        omega: s.omega,
    };
    BallisticStatus::Ok
}

/// # Safety
/// `disk` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ballistic_disk_set_state(
    disk: *mut BallisticDisk,
    state: BallisticDiskState,
) -> BallisticStatus {
    non_null!(disk);
    (*disk).0.state = DiskState::new(state.x, state.v, state.theta, state.omega);
    BallisticStatus::Ok
}

/// Total energy and accumulated friction work.
///
/// # Safety
/// `disk` must be a live handle and the outputs valid.
#[no_mangle]
pub unsafe extern "C" fn ballistic_disk_energy(
    disk: *const BallisticDisk,
    out_energy: *mut f64,
    out_dissipated: *mut f64,
) -> BallisticStatus {
    non_null!(disk, out_energy, out_dissipated);
    let sim = &(*disk).0;
    *out_energy = sim.model.energy(&sim.state);
    *out_dissipated = sim.aux[0];
    BallisticStatus::Ok
}

// ---------------------------------------------------------------------------
// Magnetic top

/// Opaque top simulation.
pub struct BallisticTop {
    model: TopModel,
    state: TopState,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallisticTopCase {
    ConservativeAxisymmetric = 0,
    ConservativeTilted = 1,
    FrictionAxisymmetric = 2,
    FrictionTilted = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BallisticTopState {
    pub x: [f64; 3],
    pub v: [f64; 3],
    pub xi3: [f64; 3],
    pub pi: [f64; 3],
}

/// Create one of the four standard top cases with default parameters.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ballistic_top_new(
    case: BallisticTopCase,
    out: *mut *mut BallisticTop,
) -> BallisticStatus {
    non_null!(out);
    *out = ptr::null_mut();
    guard(|| {
        let case = match case {
            BallisticTopCase::ConservativeAxisymmetric => TopCase::ConservativeAxisymmetric,
            BallisticTopCase::ConservativeTilted => TopCase::ConservativeTilted,
            BallisticTopCase::FrictionAxisymmetric => TopCase::FrictionAxisymmetric,
            BallisticTopCase::FrictionTilted => TopCase::FrictionTilted,
        };
        let exp = TopExperiment::default();
        let params = top::case_params(case, &TopParams::default(), &exp);
        let state = TopState::at_rest(exp.start[0], exp.start[1], params.radius);
        into_handle(
            BallisticTop {
                model: TopModel::new(params)?,
                state,
            },
            out,
        );
        Ok(())
    })
}

/// # Safety
/// `top` must come from [`ballistic_top_new`] (or be null).
#[no_mangle]
pub unsafe extern "C" fn ballistic_top_free(top: *mut BallisticTop) {
    drop_handle(top);
}

/// # Safety
/// `top` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ballistic_top_step(
    top: *mut BallisticTop,
    h: f64,
    n_steps: usize,
) -> BallisticStatus {
    non_null!(top);
    guard(|| {
        let t = &mut *top;
        for _ in 0..n_steps {
            t.state = t.model.hp_step(&t.state, h)?;
        }
        Ok(())
    })
}

/// # Safety
/// `top` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ballistic_top_get_state(
    top: *const BallisticTop,
    out: *mut BallisticTopState,
) -> BallisticStatus {
    non_null!(top, out);
    let s = &(*top).state;
    let a = |v: Vec3| [v.x, v.y, v.z];
    *out = BallisticTopState {
        x: a(s.x),
        v: a(s.v),
        xi3: a(s.xi3),
        pi: a(s.pi),
    };
    BallisticStatus::Ok
}

/// Momentum map `J = pi . xi3` and total energy.
///
/// # Safety
/// `top` must be a live handle and the outputs valid.
#[no_mangle]
pub unsafe extern "C" fn ballistic_top_invariants(
    top: *const BallisticTop,
    out_j: *mut f64,
    out_energy: *mut f64,
) -> BallisticStatus {
    non_null!(top, out_j, out_energy);
    guard(|| {
        let t = &*top;
        *out_j = top::momentum_map(&t.state);
        *out_energy = t.model.energy(&t.state)?;
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Magnetic motor

/// Opaque motor simulation.
pub struct BallisticMotor(Sim<MotorModel>);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallisticMotorMode {
    NonUniform = 0,
    Isothermal = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BallisticMotorObservables {
    pub x: f64,
    pub y: f64,
    pub angle: f64,
    pub energy: f64,
    pub ring_energy: f64,
    pub injected: f64,
    pub dissipated: f64,
}

/// Create a motor with default geometry. In isothermal mode `noise` sets
/// both amplitudes (ring friction is matched); otherwise it sets the ring noise.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ballistic_motor_new(
    mode: BallisticMotorMode,
    noise: f64,
    seed: u64,
    out: *mut *mut BallisticMotor,
) -> BallisticStatus {
    non_null!(out);
    *out = ptr::null_mut();
    guard(|| {
        let (mode, params) = match mode {
            BallisticMotorMode::NonUniform => (
                MotorMode::NonUniform,
                MotorParams {
                    ring_noise: noise,
                    ..MotorParams::default()
                },
            ),
            BallisticMotorMode::Isothermal => {
                (MotorMode::Isothermal, MotorParams::isothermal(noise))
            }
        };
        into_handle(
            BallisticMotor(Sim::new(MotorModel::new(params, mode)?, seed)?),
            out,
        );
        Ok(())
    })
}

/// # Safety
/// `motor` must come from [`ballistic_motor_new`] (or be null).
#[no_mangle]
pub unsafe extern "C" fn ballistic_motor_free(motor: *mut BallisticMotor) {
    drop_handle(motor);
}

/// # Safety
/// `motor` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ballistic_motor_step(
    motor: *mut BallisticMotor,
    h: f64,
    n_steps: usize,
) -> BallisticStatus {
    non_null!(motor);
    guard(|| (*motor).0.advance(h, n_steps))
}

/// # Safety
/// `motor` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ballistic_motor_observe(
    motor: *const BallisticMotor,
    out: *mut BallisticMotorObservables,
) -> BallisticStatus {
    non_null!(motor, out);
    guard(|| {
        let sim = &(*motor).0;
        let s: &MotorState = &sim.state;
        *out = BallisticMotorObservables {
            x: s.x.x,
            y: s.x.y,
            angle: s.angle(),
            energy: sim.model.energy(s)?,
            ring_energy: sim.model.ring_energy(s),
            injected: sim.aux[AUX_INJECTED],
            dissipated: sim.aux[AUX_DISSIPATED],
        };
        Ok(())
    })
}
