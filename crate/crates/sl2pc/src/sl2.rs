//! Points of sl2(C): six real coordinates together with the traceless matrix.
//!
//! Coordinates are ordered (x1, y1, x2, y2, x3, y3) with z_j = x_j + i y_j and
//! A = [[i z1, -z2 + i z3], [z2 + i z3, -i z1]].

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// 2x2 complex matrix, row major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[C64 { re: 0.0, im: 0.0 }; 2]; 2]);

    pub fn identity() -> Mat2 {
        Mat2::diag(C64::new(1.0, 0.0), C64::new(1.0, 0.0))
    }

    pub fn diag(a: C64, d: C64) -> Mat2 {
        Mat2([[a, C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), d]])
    }

    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Mat2 {
        Mat2([[a, b], [c, d]])
    }

    pub fn adjoint(&self) -> Mat2 {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, s: C64) -> Mat2 {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn scale_re(&self, s: f64) -> Mat2 {
        self.scale(C64::new(s, 0.0))
    }

    /// Frobenius norm, sqrt(tr(M M*)).
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn commutator(&self, other: &Mat2) -> Mat2 {
        *self * *other - *other * *self
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d.norm() == 0.0 {
            return None;
        }
        let m = &self.0;
        Some(Mat2([[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]]).scale(d.inv()))
    }

    /// Square root of a positive definite Hermitian matrix through
    /// sqrt(M) = (M + sqrt(det M)·1) / sqrt(tr M + 2 sqrt(det M)).
    pub fn hermitian_sqrt(&self) -> Mat2 {
        let sd = self.det().re.max(0.0).sqrt();
        let denom = (self.trace().re + 2.0 * sd).sqrt();
        (*self + Mat2::identity().scale_re(sd)).scale_re(1.0 / denom)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + (-o)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale_re(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        let mut r = [[C64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(r)
    }
}

pub fn coords_to_matrix(p: &[f64; 6]) -> Mat2 {
    let z1 = C64::new(p[0], p[1]);
    let z2 = C64::new(p[2], p[3]);
    let z3 = C64::new(p[4], p[5]);
    Mat2::new(I * z1, -z2 + I * z3, z2 + I * z3, -I * z1)
}

/// Inverse of `coords_to_matrix` on traceless matrices (the trace part is dropped).
pub fn matrix_to_coords(a: &Mat2) -> [f64; 6] {
    let m = &a.0;
    let diag = (m[0][0] - m[1][1]) * 0.5;
    let z1 = -I * diag;
    let z2 = (m[1][0] - m[0][1]) * 0.5;
    let z3 = -I * (m[0][1] + m[1][0]) * 0.5;
    [z1.re, z1.im, z2.re, z2.im, z3.re, z3.im]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sl2Point {
    pub coords: [f64; 6],
    pub matrix: Mat2,
}

impl Sl2Point {
    pub fn new(coords: [f64; 6]) -> Self {
        Sl2Point { coords, matrix: coords_to_matrix(&coords) }
    }

    pub fn from_matrix(m: Mat2) -> Self {
        Sl2Point::new(matrix_to_coords(&m))
    }

    pub fn origin() -> Self {
        Sl2Point::new([0.0; 6])
    }

    pub fn z(&self) -> [C64; 3] {
        let c = &self.coords;
        [C64::new(c[0], c[1]), C64::new(c[2], c[3]), C64::new(c[4], c[5])]
    }

    /// Euclidean norm of the 6 coordinates; R² is twice its square.
    pub fn coord_norm_sq(&self) -> f64 {
        self.coords.iter().map(|v| v * v).sum()
    }

    pub fn r2(&self) -> f64 {
        2.0 * self.coord_norm_sq()
    }

    pub fn casimir(&self) -> C64 {
        let z = self.z();
        z[0] * z[0] + z[1] * z[1] + z[2] * z[2]
    }

    pub fn is_origin(&self) -> bool {
        self.coords.iter().all(|v| *v == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantScalars {
    pub f: C64,
    pub f1: f64,
    pub f2: f64,
    pub r2: f64,
    pub abs_f: f64,
}

const ULP8: f64 = 8.0 * f64::EPSILON;

/// f and R² from both pictures, cross-checked.
pub fn invariants(p: &Sl2Point) -> Result<InvariantScalars> {
    let f_coords = p.casimir();
    let f_matrix = p.matrix.det();
    let r2_coords = p.r2();
    let r2_matrix = (p.matrix * p.matrix.adjoint()).trace().re;
    let scale = 1.0 + r2_coords;
    if (f_coords - f_matrix).norm() > ULP8 * scale {
        return Err(Error::CrossCheckFail(format!(
            "f: coords {f_coords} vs det {f_matrix}"
        )));
    }
    if (r2_coords - r2_matrix).abs() > ULP8 * scale {
        return Err(Error::CrossCheckFail(format!(
            "R2: coords {r2_coords} vs trace {r2_matrix}"
        )));
    }
    Ok(InvariantScalars {
        f: f_coords,
        f1: f_coords.re,
        f2: f_coords.im,
        r2: r2_coords,
        abs_f: f_coords.norm(),
    })
}

/// Residuals of A² = -f·1 and (AA*)² - R²AA* + |f|²·1 = 0.
pub fn char_residuals(p: &Sl2Point) -> (Mat2, Mat2) {
    let a = p.matrix;
    let f = p.casimir();
    let r2 = p.r2();
    let one = Mat2::identity();
    let first = a * a + one.scale(f);
    let h = a * a.adjoint();
    let second = h * h - h.scale_re(r2) + one.scale_re(f.norm_sqr());
    (first, second)
}

/// R² - 2|f|, which vanishes exactly on normal matrices.
pub fn skeleton_gap(p: &Sl2Point) -> f64 {
    p.r2() - 2.0 * p.casimir().norm()
}

pub fn self_commutator_norm(p: &Sl2Point) -> f64 {
    p.matrix.commutator(&p.matrix.adjoint()).norm()
}

pub fn su2_defect(u: &Mat2) -> f64 {
    let d1 = (*u * u.adjoint() - Mat2::identity()).max_abs();
    let d2 = (u.det() - C64::new(1.0, 0.0)).norm();
    d1.max(d2)
}

/// Hopf map for U = [[a, b], [-conj(b), conj(a)]].
pub fn hopf(u: &Mat2) -> Result<[f64; 3]> {
    let defect = su2_defect(u);
    if defect > 1e-12 {
        return Err(Error::NotSpecialUnitary(defect));
    }
    let a = u.0[0][0];
    let b = u.0[0][1];
    let m = -2.0 * a * b;
    Ok([a.norm_sqr() - b.norm_sqr(), m.im, m.re])
}

/// SU(2) element from a unit quaternion (q0, q1, q2, q3): a = q0 + i q1, b = q2 + i q3.
pub fn su2_from_quaternion(q: &[f64; 4]) -> Mat2 {
    let a = C64::new(q[0], q[1]);
    let b = C64::new(q[2], q[3]);
    Mat2::new(a, b, -b.conj(), a.conj())
}

/// Conjugation action U·A·U* on a point.
pub fn adjoint_action(u: &Mat2, p: &Sl2Point) -> Sl2Point {
    Sl2Point::from_matrix(*u * p.matrix * u.adjoint())
}

/// Conjugation action as a real linear map on coordinate vectors.
pub fn adjoint_action_vec(u: &Mat2, v: &[f64; 6]) -> [f64; 6] {
    matrix_to_coords(&(*u * coords_to_matrix(v) * u.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        (*a - *b).max_abs() <= tol
    }

    #[test]
    fn matrix_examples() {
        let a = coords_to_matrix(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(close(&a, &Mat2::diag(I, -I), 0.0));
        assert_eq!(coords_to_matrix(&[0.0; 6]), Mat2::ZERO);
        // -z2 + i z3 = 1, z2 + i z3 = 0 gives z2 = -1/2, z3 = -i/2.
        let n = coords_to_matrix(&[0.0, 0.0, -0.5, 0.0, 0.0, -0.5]);
        let e = Mat2::new(0.0.into(), 1.0.into(), 0.0.into(), 0.0.into());
        assert!(close(&n, &e, 0.0));
    }

    #[test]
    fn round_trip_and_trace() {
        let c = [0.3, -1.2, 2.5, 0.7, -0.1, 1.9];
        let a = coords_to_matrix(&c);
        assert_eq!(a.trace(), C64::new(0.0, 0.0));
        let back = matrix_to_coords(&a);
        for i in 0..6 {
            assert!((back[i] - c[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn invariant_examples() {
        let d = invariants(&Sl2Point::new([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(d.f, C64::new(1.0, 0.0));
        assert_eq!(d.r2, 2.0);
        let n = invariants(&Sl2Point::new([0.0, 0.0, -0.5, 0.0, 0.0, -0.5])).unwrap();
        assert_eq!(n.abs_f, 0.0);
        assert_eq!(n.r2, 1.0);
        assert_eq!(skeleton_gap(&Sl2Point::new([0.0, 0.0, -0.5, 0.0, 0.0, -0.5])), 1.0);
    }

    #[test]
    fn hopf_examples() {
        assert_eq!(hopf(&Mat2::identity()).unwrap(), [1.0, 0.0, 0.0]);
        let g = Mat2::new(0.0.into(), 1.0.into(), (-1.0).into(), 0.0.into());
        let h = hopf(&g).unwrap();
        assert_eq!(h[0], -1.0);
        assert!(h[1].abs() == 0.0 && h[2].abs() == 0.0);
        let bad = Mat2::identity().scale_re(2.0);
        assert!(matches!(hopf(&bad), Err(Error::NotSpecialUnitary(_))));
    }

    #[test]
    fn hermitian_sqrt_squares_back() {
        let a = coords_to_matrix(&[0.4, 0.1, -0.3, 0.8, 0.2, -0.5]);
        let m = Mat2::identity() + a * a.adjoint();
        let s = m.hermitian_sqrt();
        assert!(close(&(s * s), &m, 1e-14));
        assert!(close(&s, &s.adjoint(), 1e-15));
    }
}
