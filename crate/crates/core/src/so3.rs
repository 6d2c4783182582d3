//! Small fixed-size linear algebra and the SO(3) pieces the integrators need:
//! the hat map, Cayley rotation updates, and square roots of the (possibly
//! rank-deficient) friction/noise tensors.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the symmetric part accepted by [`unhat`].
pub const ANTISYMMETRY_TOL: f64 = 1e-9;
/// Eigenvalues below `-PSD_TOL` make [`psd_sqrt`] fail.
pub const PSD_TOL: f64 = 1e-9;
/// Orthogonality / determinant tolerance of [`RotationMatrix::from_mat`].
pub const ROTATION_TOL: f64 = 1e-9;
/// Largest `|h * omega|` a Cayley update accepts.
pub const CAYLEY_MAX_ANGLE: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };
    pub const E1: Vec3 = Vec3 {
        x: 1.0,
        y: 0.0,
        z: 0.0,
    };
    pub const E2: Vec3 = Vec3 {
        x: 0.0,
        y: 1.0,
        z: 0.0,
    };
    pub const E3: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self / self.norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    /// Outer product `self * o^T`.
    pub fn outer(self, o: Vec3) -> Mat3 {
        let a = self.to_array();
        let b = o.to_array();
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = a[i] * b[j];
            }
        }
        Mat3(m)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

/// 3x3 matrix stored row-major: `self.0[row][col]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn from_rows(r0: [f64; 3], r1: [f64; 3], r2: [f64; 3]) -> Self {
        Mat3([r0, r1, r2])
    }

    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Mat3([[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]])
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3::new(self.0[0][j], self.0[1][j], self.0[2][j])
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from_array(self.0[i])
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    /// `self^T * v` without forming the transpose.
    #[inline]
    pub fn tr_mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
            m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
            m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, o: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(out)
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut out = self.0;
        out.iter_mut().flatten().for_each(|e| *e *= s);
        Mat3(out)
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().flatten().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0_f64, |a, e| a.max(e.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|e| e.is_finite())
    }
}

impl Index<(usize, usize)> for Mat3 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut out = self.0;
        for (row, other) in out.iter_mut().zip(o.0) {
            for (a, b) in row.iter_mut().zip(other) {
                *a += b;
            }
        }
        Mat3(out)
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        self + o.scale(-1.0)
    }
}

impl AddAssign for Mat3 {
    fn add_assign(&mut self, o: Mat3) {
        *self = *self + o;
    }
}

/// A matrix in SO(3). Constructed only through checked or exactly-orthogonal paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationMatrix(Mat3);

impl Default for RotationMatrix {
    fn default() -> Self {
        RotationMatrix::IDENTITY
    }
}

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix = RotationMatrix(Mat3::IDENTITY);

    pub fn from_mat(m: Mat3) -> Result<Self> {
        let defect = orthogonality_defect(&m);
        let det = m.determinant();
        if !m.is_finite() || defect > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidMatrix(format!(
                "not a rotation: |R^T R - I| = {defect:.3e}, det = {det}"
            )));
        }
        Ok(RotationMatrix(m))
    }

    /// Rotation by `angle` about the unit vector `axis` (Rodrigues).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let k = axis.normalized();
        let kh = hat(k);
        let k2 = kh.mul_mat(&kh);
        RotationMatrix(Mat3::IDENTITY + kh.scale(angle.sin()) + k2.scale(1.0 - angle.cos()))
    }

    pub fn as_mat(&self) -> &Mat3 {
        &self.0
    }

    #[inline]
    pub fn apply(&self, v: Vec3) -> Vec3 {
        self.0.mul_vec(v)
    }

    #[inline]
    pub fn apply_inverse(&self, v: Vec3) -> Vec3 {
        self.0.tr_mul_vec(v)
    }

    pub fn compose(&self, o: &RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0.mul_mat(&o.0))
    }

    pub fn transpose(&self) -> RotationMatrix {
        RotationMatrix(self.0.transpose())
    }

    pub fn col(&self, j: usize) -> Vec3 {
        self.0.col(j)
    }

    pub fn orthogonality_defect(&self) -> f64 {
        orthogonality_defect(&self.0)
    }
}

/// Frobenius norm of `R^T R - I`.
pub fn orthogonality_defect(m: &Mat3) -> f64 {
    (m.transpose().mul_mat(m) - Mat3::IDENTITY).frobenius_norm()
}

/// The hat map: `hat(v) * w == v.cross(w)`.
pub fn hat(v: Vec3) -> Mat3 {
    Mat3([[0.0, -v.z, v.y], [v.z, 0.0, -v.x], [-v.y, v.x, 0.0]])
}

pub fn unhat(m: &Mat3) -> Result<Vec3> {
    unhat_with_tol(m, ANTISYMMETRY_TOL)
}

pub fn unhat_with_tol(m: &Mat3, tol: f64) -> Result<Vec3> {
    let sym = (*m + m.transpose()).scale(0.5).max_abs();
    if sym > tol {
        return Err(Error::NotAntisymmetric(sym));
    }
    Ok(Vec3::new(m.0[2][1], m.0[0][2], m.0[1][0]))
}

/// Cayley map of `hat(a)`: `(I - A/2)^{-1} (I + A/2)`.
pub fn cayley(a: Vec3) -> Result<RotationMatrix> {
    let n2 = a.norm_squared();
    if !n2.is_finite() || n2.sqrt() > CAYLEY_MAX_ANGLE {
        return Err(Error::SingularUpdate(n2.sqrt()));
    }
    let ah = hat(a);
    let a2 = ah.mul_mat(&ah);
    let k = 4.0 / (4.0 + n2);
    Ok(RotationMatrix(
        Mat3::IDENTITY + (ah + a2.scale(0.5)).scale(k),
    ))
}

/// Apply the Cayley rotation of `hat(a)` to a vector without forming the matrix.
#[inline]
pub fn cayley_apply(a: Vec3, v: Vec3) -> Result<Vec3> {
    let n2 = a.norm_squared();
    if !n2.is_finite() || n2.sqrt() > CAYLEY_MAX_ANGLE {
        return Err(Error::SingularUpdate(n2.sqrt()));
    }
    let av = a.cross(v);
    let k = 4.0 / (4.0 + n2);
    Ok(v + (av + a.cross(av) * 0.5) * k)
}

/// One reconstruction step `R <- cay(h * hat(omega)) R`.
pub fn rotate_step(r: &RotationMatrix, omega: Vec3, h: f64) -> Result<RotationMatrix> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {h}"
        )));
    }
    Ok(cayley(omega * h)?.compose(r))
}

/// Symmetric positive semidefinite n x n matrix, 2 <= n <= 4, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSymMatrix")]
pub struct SymPsdMatrix {
    n: usize,
    entries: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSymMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl TryFrom<RawSymMatrix> for SymPsdMatrix {
    type Error = Error;
    fn try_from(r: RawSymMatrix) -> Result<Self> {
        SymPsdMatrix::new(r.n, &r.entries)
    }
}

impl SymPsdMatrix {
    /// Builds from row-major entries; the result is exactly symmetric (averaged).
    pub fn new(n: usize, entries: &[f64]) -> Result<Self> {
        if !(2..=4).contains(&n) {
            return Err(Error::InvalidMatrix(format!("dimension {n} outside 2..=4")));
        }
        if entries.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        let scale = entries.iter().fold(1.0_f64, |a, e| a.max(e.abs()));
        let mut out = entries.to_vec();
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (entries[i * n + j], entries[j * n + i]);
                if (a - b).abs() > 1e-12 * scale {
                    return Err(Error::InvalidMatrix(format!("not symmetric at ({i},{j})")));
                }
                let m = 0.5 * (a + b);
                out[i * n + j] = m;
                out[j * n + i] = m;
            }
        }
        Ok(SymPsdMatrix { n, entries: out })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut e = vec![0.0; n * n];
        for i in 0..n {
            e[i * n + i] = 1.0;
        }
        SymPsdMatrix::new(n, &e)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn mul_mat(&self, o: &SymPsdMatrix) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n).map(|k| self.get(i, k) * o.get(k, j)).sum();
            }
        }
        out
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev = jacobi_eigen(self.n, &self.entries).0;
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix. Returns the
/// eigenvalues and the eigenvectors as columns of a row-major matrix.
/// Jacobi is accurate to a few ulps of the matrix norm, which the
/// square-root round trip relies on.
fn jacobi_eigen(n: usize, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        if off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Principal square root of a symmetric PSD matrix. Slightly negative
/// eigenvalues (round-off on rank-deficient input) are clamped to zero.
pub fn psd_sqrt(c: &SymPsdMatrix) -> Result<SymPsdMatrix> {
    let n = c.n;
    let (vals, vecs) = jacobi_eigen(n, &c.entries);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOL {
        return Err(Error::NotPsd(min));
    }
    let mut out = vec![0.0; n * n];
    for (k, &lambda) in vals.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] += s * vecs[i * n + k] * vecs[j * n + k];
            }
        }
    }
    // Re-symmetrize round-off from the eigenvector products.
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (out[i * n + j] + out[j * n + i]);
            out[i * n + j] = m;
            out[j * n + i] = m;
        }
    }
    Ok(SymPsdMatrix { n, entries: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn arb_vec() -> impl Strategy<Value = Vec3> {
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    #[test]
    fn hat_examples() {
        let m = hat(Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(
            m,
            Mat3::from_rows([0.0, -3.0, 2.0], [3.0, 0.0, -1.0], [-2.0, 1.0, 0.0])
        );
        assert_eq!(hat(Vec3::ZERO), Mat3::ZERO);
        assert_eq!(hat(Vec3::E1).mul_vec(Vec3::E2), Vec3::E3);
    }

    #[test]
    fn unhat_examples() {
        let m = Mat3::from_rows([0.0, -3.0, 2.0], [3.0, 0.0, -1.0], [-2.0, 1.0, 0.0]);
        assert_eq!(unhat(&m).unwrap(), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(unhat(&Mat3::ZERO).unwrap(), Vec3::ZERO);
        assert!(matches!(
            unhat(&Mat3::IDENTITY),
            Err(Error::NotAntisymmetric(_))
        ));
    }

    #[test]
    fn rotate_step_zero_velocity_is_identity() {
        let r = rotate_step(&RotationMatrix::IDENTITY, Vec3::ZERO, 0.01).unwrap();
        assert_eq!(r, RotationMatrix::IDENTITY);
        assert!(rotate_step(&RotationMatrix::IDENTITY, Vec3::E3, 0.0).is_err());
        assert!(matches!(
            rotate_step(
                &RotationMatrix::IDENTITY,
                Vec3::new(f64::INFINITY, 0.0, 0.0),
                1.0
            ),
            Err(Error::SingularUpdate(_))
        ));
    }

    #[test]
    fn rotate_step_generator_is_hat() {
        let w = Vec3::new(0.0, 0.0, std::f64::consts::PI);
        let expected = hat(w);
        for &h in &[1e-3, 1e-4, 1e-5] {
            let r = rotate_step(&RotationMatrix::IDENTITY, w, h).unwrap();
            let deriv = (*r.as_mat() - Mat3::IDENTITY).scale(1.0 / h);
            // Difference quotient error is h * hat(w)^2 / 2 to leading order.
            assert!((deriv - expected).max_abs() < h * 5.0, "h = {h}");
        }
    }

    #[test]
    fn cayley_long_run_stays_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut r = RotationMatrix::IDENTITY;
        for _ in 0..1_000_000 {
            let w = Vec3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            r = rotate_step(&r, w, 0.01).unwrap();
        }
        assert!(
            r.orthogonality_defect() < 1e-8,
            "defect {}",
            r.orthogonality_defect()
        );
        assert!((r.as_mat().determinant() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cayley_apply_matches_matrix() {
        let a = Vec3::new(0.3, -1.2, 0.7);
        let v = Vec3::new(1.0, 2.0, -0.5);
        let m = cayley(a).unwrap().apply(v);
        let d = cayley_apply(a, v).unwrap() - m;
        assert!(d.norm() < 1e-14);
    }

    #[test]
    fn psd_sqrt_rank_one() {
        let c = SymPsdMatrix::new(2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        let s = psd_sqrt(&c).unwrap();
        let k = 1.0 / 2f64.sqrt();
        for (a, b) in s.entries().iter().zip([k, k, k, k]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn psd_sqrt_identity_and_zero() {
        for n in 2..=4 {
            let id = SymPsdMatrix::identity(n).unwrap();
            let s = psd_sqrt(&id).unwrap();
            for (a, b) in s.entries().iter().zip(id.entries()) {
                assert!((a - b).abs() < 1e-15);
            }
            let z = SymPsdMatrix::new(n, &vec![0.0; n * n]).unwrap();
            assert!(psd_sqrt(&z).unwrap().entries().iter().all(|e| *e == 0.0));
        }
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let c = SymPsdMatrix::new(2, &[1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(matches!(psd_sqrt(&c), Err(Error::NotPsd(_))));
        assert!(SymPsdMatrix::new(2, &[1.0, 2.0, 0.0, 1.0]).is_err());
        assert!(SymPsdMatrix::new(5, &[0.0; 25]).is_err());
    }

    proptest! {
        #[test]
        fn hat_is_linear(a in -5.0..5.0f64, b in -5.0..5.0f64, u in arb_vec(), v in arb_vec()) {
            let lhs = hat(u * a + v * b);
            let rhs = hat(u).scale(a) + hat(v).scale(b);
            prop_assert!((lhs - rhs).max_abs() <= 1e-12 * (1.0 + lhs.max_abs()));
        }

        #[test]
        fn unhat_inverts_hat(v in arb_vec()) {
            prop_assert_eq!(unhat(&hat(v)).unwrap(), v);
        }

        #[test]
        fn hat_is_cross(v in arb_vec(), w in arb_vec()) {
            let d = hat(v).mul_vec(w) - v.cross(w);
            prop_assert!(d.norm() <= 1e-12 * (1.0 + v.norm() * w.norm()));
        }

        #[test]
        fn rotate_step_preserves_orthogonality(v in arb_vec(), h in 1e-3..1.0f64) {
            // |h * omega| <= 10 for the whole sampled box
            let w = v * (10.0 / (v.norm().max(1e-12) * h)).min(1.0);
            let r = rotate_step(&RotationMatrix::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.4), w, h).unwrap();
            prop_assert!(r.orthogonality_defect() < 1e-13);
            prop_assert!((r.as_mat().determinant() - 1.0).abs() < 1e-13);
        }

        #[test]
        fn psd_sqrt_squares_back(seed in 0u64..10_000, n in 2usize..=4, rank in 1usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = rank.min(n);
            let g: Vec<f64> = (0..k * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut c = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    c[i * n + j] = (0..k).map(|r| g[r * n + i] * g[r * n + j]).sum();
                }
            }
            let cm = SymPsdMatrix::new(n, &c).unwrap();
            let s = psd_sqrt(&cm).unwrap();
            let ss = s.mul_mat(&s);
            let err: f64 = ss.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(err < 1e-12, "err {}", err);
            prop_assert!(s.eigenvalues()[0] > -1e-12);
        }
    }
}
