//! The normalizing vector field W = ¼[A,[A,A*]], its closed-form flow, the
//! scalar quantities carried along it, and the retraction onto normal
//! matrices.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::sampling;
use crate::sl2::{Mat2, Sl2Point};

/// Routes |f| to the zero branch of the retraction.
pub const RETRACT_ZERO_TOL: f64 = 1e-13;

pub fn w_matrix(a: &Mat2) -> Mat2 {
    let k = a.commutator(&a.adjoint());
    a.commutator(&k).scale_re(0.25)
}

/// W at p as a matrix.
pub fn w_field(p: &Sl2Point) -> Mat2 {
    w_matrix(&p.matrix)
}

/// W at p in coordinates.
pub fn w_coords(p: &Sl2Point) -> [f64; 6] {
    crate::sl2::matrix_to_coords(&w_field(p))
}

/// Squared Euclidean norm of W in the real coordinates; this is half of
/// tr(WW*).
pub fn w_norm_sq(p: &Sl2Point) -> f64 {
    w_coords(p).iter().map(|v| v * v).sum()
}

/// ⅛R²(R⁴ − 4|f|²).
pub fn w_norm_sq_closed(p: &Sl2Point) -> f64 {
    let r2 = p.r2();
    let f = p.casimir().norm();
    r2 * (r2 * r2 - 4.0 * f * f) / 8.0
}

// ---------------------------------------------------------------------------
// θ functions: θ1(x²) = tanh x / x, θ2(x²) = cosh x, θ3(x²) = sinh x / x.

/// Radius (in u = x²) below which derivatives use the power series.
pub const THETA_SERIES_RADIUS: f64 = 0.25;
pub const THETA_MAX_ORDER: usize = 6;
const SERIES_TERMS: usize = 40;

fn tanh_over_x_coeffs() -> Vec<f64> {
    // tanh' = 1 - tanh², Taylor coefficients c_n of tanh
    let n = 2 * SERIES_TERMS + 2;
    let mut c = vec![0.0; n + 1];
    c[1] = 1.0;
    for k in 1..n {
        let mut s = 0.0;
        for i in 0..=k {
            s += c[i] * c[k - i];
        }
        c[k + 1] = -s / (k as f64 + 1.0);
    }
    (0..SERIES_TERMS).map(|k| c[2 * k + 1]).collect()
}

fn series_coeffs(which: usize) -> Vec<f64> {
    match which {
        1 => tanh_over_x_coeffs(),
        2 | 3 => {
            let mut out = Vec::with_capacity(SERIES_TERMS);
            let mut fact = 1.0;
            for k in 0..SERIES_TERMS {
                // 1/(2k)! or 1/(2k+1)!
                let m = if which == 2 { 2 * k } else { 2 * k + 1 };
                if k > 0 {
                    fact *= (m - 1) as f64 * m as f64;
                } else if which == 3 {
                    fact = 1.0;
                }
                out.push(1.0 / fact);
            }
            out
        }
        _ => panic!("theta index must be 1, 2 or 3"),
    }
}

fn series_deriv(coeffs: &[f64], n: usize, u: f64) -> f64 {
    let mut s = 0.0;
    let mut pw = 1.0;
    for k in n..coeffs.len() {
        let mut falling = 1.0;
        for i in 0..n {
            falling *= (k - i) as f64;
        }
        s += coeffs[k] * falling * pw;
        pw *= u;
    }
    s
}

/// Coefficients of d^j/dx^j tanh as a polynomial in tanh.
fn tanh_deriv_poly(j: usize) -> Vec<f64> {
    let mut p = vec![0.0, 1.0];
    for _ in 0..j {
        // P' (1 - t²)
        let dp: Vec<f64> = (1..p.len()).map(|i| i as f64 * p[i]).collect();
        let mut next = vec![0.0; dp.len() + 2];
        for (i, c) in dp.iter().enumerate() {
            next[i] += c;
            next[i + 2] -= c;
        }
        p = next;
    }
    p
}

/// θ_which^{(n)}(u), divided by cosh(√u) for θ2 and θ3 so that large
/// arguments do not overflow.
pub fn theta_deriv_scaled(which: usize, n: usize, u: f64) -> f64 {
    assert!(n <= THETA_MAX_ORDER, "theta derivative order capped at {THETA_MAX_ORDER}");
    assert!(u >= 0.0);
    let x = u.sqrt();
    if u < THETA_SERIES_RADIUS {
        let s = series_deriv(&series_coeffs(which), n, u);
        return if which == 1 { s } else { s / x.cosh() };
    }
    // θ = x^{-m0} h(x); apply D = (1/2x) d/dx n times on terms c x^{-m} h^{(j)}
    let m0 = if which == 2 { 0 } else { 1 };
    let mut terms: Vec<(f64, i32, usize)> = vec![(1.0, m0, 0)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(2 * terms.len());
        for (c, m, j) in &terms {
            if *m != 0 {
                next.push((-c * *m as f64 / 2.0, m + 2, *j));
            }
            next.push((c / 2.0, m + 1, j + 1));
        }
        terms = next;
    }
    let t = x.tanh();
    let base = |j: usize| -> f64 {
        match which {
            1 => tanh_deriv_poly(j).iter().rev().fold(0.0, |acc, c| acc * t + c),
            2 => {
                if j % 2 == 0 {
                    1.0
                } else {
                    t
                }
            }
            _ => {
                if j % 2 == 0 {
                    t
                } else {
                    1.0
                }
            }
        }
    };
    terms.iter().map(|(c, m, j)| c * x.powi(-m) * base(*j)).sum()
}

pub fn theta_deriv(which: usize, n: usize, u: f64) -> f64 {
    let s = theta_deriv_scaled(which, n, u);
    if which == 1 {
        s
    } else {
        s * u.sqrt().cosh()
    }
}

/// tanh(x)/x as a function of u = x²; Taylor branch of degree 8 in x below
/// |u| < 1e-4.
pub fn theta1(u: f64) -> f64 {
    if u < 1e-4 {
        1.0 - u / 3.0 + 2.0 * u * u / 15.0 - 17.0 * u * u * u / 315.0 + 62.0 * u.powi(4) / 2835.0
    } else {
        let x = u.sqrt();
        x.tanh() / x
    }
}

pub fn theta2(u: f64) -> f64 {
    u.sqrt().cosh()
}

pub fn theta3(u: f64) -> f64 {
    if u < 1e-4 {
        1.0 + u / 6.0 + u * u / 120.0 + u * u * u / 5040.0 + u.powi(4) / 362880.0
    } else {
        let x = u.sqrt();
        x.sinh() / x
    }
}

/// The three weighted maxima of the θ derivative bounds over the
/// given x samples: |θ1^(n)|(1+x)^{2n+1}, |θ2^(n)|(1+x)^n / cosh x and
/// |θ3^(n)|(1+x)^{n+1} / cosh x.
pub fn theta_bounds_check(n: usize, xs: &[f64]) -> [f64; 3] {
    let mut out = [0.0f64; 3];
    for &x in xs {
        let u = x * x;
        let w = 1.0 + x;
        out[0] = out[0].max(theta_deriv_scaled(1, n, u).abs() * w.powi(2 * n as i32 + 1));
        out[1] = out[1].max(theta_deriv_scaled(2, n, u).abs() * w.powi(n as i32));
        out[2] = out[2].max(theta_deriv_scaled(3, n, u).abs() * w.powi(n as i32 + 1));
    }
    out
}

// ---------------------------------------------------------------------------
// Flow.

#[derive(Clone, Copy, Debug)]
pub struct FlowState {
    pub a_t: Sl2Point,
    pub t: f64,
    /// R_t² from the closed formula.
    pub r2_t: f64,
    /// [A_t, A_t*] from the closed formula ε_t [A, A*].
    pub k_t: Mat2,
    pub eps_t: f64,
}

/// tanh(|f|t)/|f|, smooth through f = 0.
pub fn tanh_ratio(abs_f: f64, t: f64) -> f64 {
    t * theta1((abs_f * t) * (abs_f * t))
}

/// ε_t = 1/(cosh(at) + sinh(at)R²/a) with a = 2|f|.
pub fn eps_t(abs_f: f64, r2: f64, t: f64) -> f64 {
    let a = 2.0 * abs_f;
    let at = a * t;
    if at > 1.0 {
        // divide through by e^{at}/2
        let e = (-2.0 * at).exp();
        2.0 * (-at).exp() / ((1.0 + e) + (1.0 - e) * r2 / a)
    } else {
        1.0 / (theta2(at * at) + t * r2 * theta3(at * at))
    }
}

/// 1/ε_t.
pub fn varsigma_t(abs_f: f64, r2: f64, t: f64) -> f64 {
    let a = 2.0 * abs_f;
    let at = a * t;
    theta2(at * at) + t * r2 * theta3(at * at)
}

/// R_t² = (a² T + x)/(1 + T x) with T = tanh(at)/a, a = 2|f|, x = R².
pub fn r2_t(abs_f: f64, r2: f64, t: f64) -> f64 {
    let a = 2.0 * abs_f;
    let tt = tanh_ratio(a, t);
    (a * a * tt + r2) / (1.0 + tt * r2)
}

pub fn g_t(a: &Mat2, abs_f: f64, t: f64) -> Mat2 {
    let h = *a * a.adjoint();
    (Mat2::identity() + h.scale_re(tanh_ratio(abs_f, t))).hermitian_sqrt()
}

pub fn flow_closed(p: &Sl2Point, t: f64) -> FlowState {
    assert!(t >= 0.0, "flow is defined for t >= 0");
    let a = p.matrix;
    let abs_f = p.casimir().norm();
    let r2 = p.r2();
    let g = g_t(&a, abs_f, t);
    let gi = g.inverse().expect("g_t is positive definite");
    let a_t = Sl2Point::from_matrix(gi * a * g);
    let eps = eps_t(abs_f, r2, t);
    FlowState {
        a_t,
        t,
        r2_t: r2_t(abs_f, r2, t),
        k_t: a.commutator(&a.adjoint()).scale_re(eps),
        eps_t: eps,
    }
}

/// Classical RK4 for A' = W(A).
pub fn flow_rk4(p: &Sl2Point, t: f64, steps: usize) -> Sl2Point {
    assert!(steps >= 1);
    let h = t / steps as f64;
    let mut a = p.matrix;
    for _ in 0..steps {
        let k1 = w_matrix(&a);
        let k2 = w_matrix(&(a + k1.scale_re(h / 2.0)));
        let k3 = w_matrix(&(a + k2.scale_re(h / 2.0)));
        let k4 = w_matrix(&(a + k3.scale_re(h)));
        a = a + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(h / 6.0);
    }
    Sl2Point::from_matrix(a)
}

pub fn g_infinity(a: &Mat2, abs_f: f64) -> Mat2 {
    (Mat2::identity() + (*a * a.adjoint()).scale_re(1.0 / abs_f)).hermitian_sqrt()
}

/// r(A) = g∞⁻¹ A g∞, and 0 when f vanishes.
pub fn retract(p: &Sl2Point) -> Sl2Point {
    let abs_f = p.casimir().norm();
    if abs_f < RETRACT_ZERO_TOL * (1.0 + p.r2()) {
        return Sl2Point::origin();
    }
    let g = g_infinity(&p.matrix, abs_f);
    let gi = g.inverse().expect("g_inf is positive definite");
    Sl2Point::from_matrix(gi * p.matrix * g)
}

pub fn mat_dist(a: &Sl2Point, b: &Sl2Point) -> f64 {
    (a.matrix - b.matrix).max_abs()
}

// ---------------------------------------------------------------------------
// μ functions and sweeps.

/// μ_{u,v}(t,R) = Σ_{j=0}^{p} t^{u−j/2} R^{v−j}, p = min(2u, v), with
/// u = twice_u / 2.
pub fn mu_eval(twice_u: u32, v: u32, t: f64, r: f64) -> f64 {
    let p = twice_u.min(v);
    (0..=p)
        .map(|j| t.powf((twice_u as f64 - j as f64) / 2.0) * r.powi((v - j) as i32))
        .sum()
}

/// Largest μ_{u,v}μ_{u',v'}/μ_{u+u',v+v'} over a (t, R) grid.
pub fn mu_submult_constant(a: (u32, u32), b: (u32, u32), ts: &[f64], rs: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for &t in ts {
        for &r in rs {
            let den = mu_eval(a.0 + b.0, a.1 + b.1, t, r);
            if den > 0.0 {
                worst = worst.max(mu_eval(a.0, a.1, t, r) * mu_eval(b.0, b.1, t, r) / den);
            }
        }
    }
    worst
}

/// ε_t R_t^{2q} (1 + tR²)^q / R^{2q} for one sample.
pub fn eps_ratio(q: f64, p: &Sl2Point, t: f64) -> f64 {
    let abs_f = p.casimir().norm();
    let r2 = p.r2();
    if r2 == 0.0 {
        return 0.0;
    }
    let e = eps_t(abs_f, r2, t);
    let rt = r2_t(abs_f, r2, t);
    e * (rt / r2).powf(q) * (1.0 + t * r2).powf(q)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub max_ratio: f64,
    pub refined_max_ratio: f64,
    pub samples: usize,
}

impl SweepResult {
    pub fn growth(&self) -> f64 {
        if self.max_ratio == 0.0 {
            1.0
        } else {
            self.refined_max_ratio / self.max_ratio
        }
    }

    pub fn is_stable(&self, max_growth: f64) -> bool {
        self.max_ratio.is_finite() && self.refined_max_ratio.is_finite() && self.growth() <= max_growth
    }
}

/// Sample set for the ε bound: points with ‖A‖ ≤ r_max, times in [0, t_max]
/// log-spaced, including the skeleton and nilpotent extremes.
fn eps_samples(seed: u64, n: usize, r_max: f64, t_max: f64) -> Vec<(Sl2Point, f64)> {
    let mut rng = sampling::rng(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let p = match i % 4 {
            0 => {
                // near the skeleton
                let w = sampling::unit_vector::<3>(&mut rng);
                let lam = C64::new(sampling::gaussian(&mut rng), sampling::gaussian(&mut rng));
                let s = r_max / (2.0f64.sqrt() * lam.norm().max(1e-9)) * sampling::uniform(&mut rng, 0.0, 1.0);
                let z: Vec<C64> = w.iter().map(|wi| lam * *wi * s).collect();
                Sl2Point::new([z[0].re, z[0].im, z[1].re, z[1].im, z[2].re, z[2].im])
            }
            _ => sampling::point_in_ball(&mut rng, r_max),
        };
        let u: f64 = sampling::uniform(&mut rng, 0.0, 1.0);
        let t = if i % 7 == 0 { 0.0 } else { (1.0 + t_max).powf(u) - 1.0 };
        out.push((p, t));
    }
    out
}

/// Maximal ε ratio on n samples and on 2n samples.
pub fn eps_bound_check(q: f64, seed: u64, n: usize, r_max: f64, t_max: f64) -> SweepResult {
    assert!(q >= 1.0);
    let run = |m: usize| {
        eps_samples(seed, m, r_max, t_max)
            .par_iter()
            .map(|(p, t)| eps_ratio(q, p, *t))
            .reduce(|| 0.0, f64::max)
    };
    SweepResult { max_ratio: run(n), refined_max_ratio: run(2 * n), samples: n }
}

/// The analytic supremum q/(1+q)^{1+1/q} · sup_x x e^x/(sinh x cosh^{1/q} x)
/// bounds the rewritten ratio for y ≥ 1; used as an independent oracle.
pub fn eps_bound_oracle(q: f64) -> f64 {
    let lead = q / (1.0 + q).powf(1.0 + 1.0 / q);
    let mut sup = 1.0f64; // x → 0 limit
    for i in 1..20000 {
        let x = i as f64 * 1e-3;
        sup = sup.max(x * x.exp() / (x.sinh() * x.cosh().powf(1.0 / q)));
    }
    lead * sup
}

/// Largest |∂^a A_t| / μ_{2n+1/2, 3n+2}(t,R) over samples, for |a| = n ≤ 2,
/// using central differences of the closed-form flow.
pub fn flow_derivative_sweep(n: usize, seed: u64, samples: usize, r_max: f64, t_max: f64) -> SweepResult {
    assert!(n <= 2);
    let run = |m: usize| {
        let pts = eps_samples(seed, m, r_max, t_max);
        pts.par_iter()
            .map(|(p, t)| {
                let r = p.r2().sqrt();
                let mu = mu_eval(4 * n as u32 + 1, 3 * n as u32 + 2, *t, r);
                let h = 1e-3 * (1.0 + r);
                let at = |c: [f64; 6]| flow_closed(&Sl2Point::new(c), *t).a_t.matrix;
                let mut worst = 0.0f64;
                for i in 0..6 {
                    let d = match n {
                        0 => at(p.coords).max_abs(),
                        1 => {
                            let (mut cp, mut cm) = (p.coords, p.coords);
                            cp[i] += h;
                            cm[i] -= h;
                            (at(cp) - at(cm)).scale_re(0.5 / h).max_abs()
                        }
                        _ => {
                            let mut best = 0.0f64;
                            for j in 0..6 {
                                let sh = |si: f64, sj: f64| {
                                    let mut c = p.coords;
                                    c[i] += si * h;
                                    c[j] += sj * h;
                                    at(c)
                                };
                                let v = (sh(1.0, 1.0) - sh(1.0, -1.0) - sh(-1.0, 1.0) + sh(-1.0, -1.0))
                                    .scale_re(0.25 / (h * h))
                                    .max_abs();
                                best = best.max(v);
                            }
                            best
                        }
                    };
                    worst = worst.max(d);
                }
                if mu > 0.0 {
                    worst / mu
                } else {
                    0.0
                }
            })
            .reduce(|| 0.0, f64::max)
    };
    SweepResult { max_ratio: run(samples), refined_max_ratio: run(2 * samples), samples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sl2::{adjoint_action, coords_to_matrix, skeleton_gap, I};

    fn nilpotent() -> Sl2Point {
        Sl2Point::new([0.0, 0.0, -0.5, 0.0, 0.0, -0.5])
    }

    fn diag() -> Sl2Point {
        Sl2Point::new([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    }

    #[test]
    fn w_examples() {
        assert!(w_field(&diag()).max_abs() == 0.0);
        let n = nilpotent();
        assert!((w_norm_sq(&n) - 0.125).abs() < 1e-15);
        assert!((w_field(&n).norm_sq() - 0.25).abs() < 1e-15);
        assert!((w_norm_sq_closed(&n) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn w_norm_closed_form() {
        let mut rng = sampling::rng(1);
        for _ in 0..200 {
            let p = sampling::point_in_ball(&mut rng, 2.0);
            let lhs = w_norm_sq(&p);
            let rhs = w_norm_sq_closed(&p);
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300) + 1e-14);
        }
    }

    #[test]
    fn theta_values() {
        for w in 1..=3 {
            assert!((theta_deriv(w, 0, 0.0) - 1.0).abs() < 1e-15);
        }
        assert!((theta2(1.0) - 1f64.cosh()).abs() < 1e-14);
        assert!((theta_deriv(2, 0, 1.0) - 1f64.cosh()).abs() < 1e-14);
        assert!((theta_deriv(1, 0, 4.0) - 2f64.tanh() / 2.0).abs() < 1e-15);
        // θ1'(0) = -1/3, θ3'(0) = 1/6
        assert!((theta_deriv(1, 1, 0.0) + 1.0 / 3.0).abs() < 1e-15);
        assert!((theta_deriv(3, 1, 0.0) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn theta_derivatives_match_finite_differences() {
        // both sides of the series switch, compared with a 5-point stencil
        for which in 1..=3 {
            for n in 1..=3 {
                for &u in &[0.1, 0.24, 0.26, 1.0, 9.0] {
                    let h = 1e-3;
                    let f = |v: f64| theta_deriv(which, n - 1, v);
                    let fd = (-f(u + 2.0 * h) + 8.0 * f(u + h) - 8.0 * f(u - h) + f(u - 2.0 * h)) / (12.0 * h);
                    let ex = theta_deriv(which, n, u);
                    assert!((fd - ex).abs() < 1e-7 * (1.0 + ex.abs()), "θ{which}^({n})({u}): {fd} vs {ex}");
                }
            }
        }
    }

    #[test]
    fn theta_series_and_closed_forms_agree_at_switch() {
        for which in 1..=3 {
            for n in 0..=THETA_MAX_ORDER {
                let a = theta_deriv_scaled(which, n, THETA_SERIES_RADIUS * (1.0 - 1e-12));
                let b = theta_deriv_scaled(which, n, THETA_SERIES_RADIUS);
                assert!((a - b).abs() < 1e-7 * (1.0 + a.abs()), "θ{which}^({n}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn tanh_ratio_is_smooth_at_zero() {
        assert_eq!(tanh_ratio(0.0, 2.0), 2.0);
        let a = tanh_ratio(1e-6, 2.0);
        assert!((a - 2.0).abs() < 1e-11);
        let b = tanh_ratio(0.5, 2.0);
        assert!((b - 1f64.tanh() / 0.5).abs() < 1e-15);
    }

    #[test]
    fn nilpotent_limit() {
        let s = flow_closed(&nilpotent(), 1.0);
        assert!((s.r2_t - 0.5).abs() < 1e-15);
        assert!((s.a_t.r2() - 0.5).abs() < 1e-12);
        // oracle: RK4 for x' = -x², x(0) = 1
        let mut x = 1.0f64;
        let h = 1e-3;
        for _ in 0..1000 {
            let f = |v: f64| -v * v;
            let k1 = f(x);
            let k2 = f(x + h / 2.0 * k1);
            let k3 = f(x + h / 2.0 * k2);
            let k4 = f(x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((x - s.r2_t).abs() < 1e-12);
    }

    #[test]
    fn skeleton_points_are_fixed() {
        let p = diag();
        for t in [0.0, 1.0, 7.0] {
            assert!(mat_dist(&flow_closed(&p, t).a_t, &p) < 1e-14);
        }
        assert!(mat_dist(&flow_rk4(&p, 3.0, 100), &p) < 1e-12);
        assert!(mat_dist(&retract(&p), &p) < 1e-14);
    }

    #[test]
    fn closed_form_matches_rk4() {
        let mut rng = sampling::rng(3);
        for _ in 0..5 {
            let p = sampling::point_in_ball(&mut rng, 2.0);
            let c = flow_closed(&p, 3.0).a_t;
            let r = flow_rk4(&p, 3.0, 3000);
            assert!(mat_dist(&c, &r) < 1e-8);
        }
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        let p = Sl2Point::new([0.3, -0.7, 0.9, 0.2, -0.4, 0.5]);
        let exact = flow_closed(&p, 1.0).a_t;
        let e1 = mat_dist(&flow_rk4(&p, 1.0, 20), &exact);
        let e2 = mat_dist(&flow_rk4(&p, 1.0, 40), &exact);
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio} {e1} {e2}");
        assert!(mat_dist(&flow_rk4(&p, 0.0, 1), &p) < 1e-15);
    }

    #[test]
    fn scalar_closed_forms() {
        let mut rng = sampling::rng(4);
        for _ in 0..100 {
            let p = sampling::point_in_ball(&mut rng, 2.0);
            for t in [0.5, 2.0, 5.0] {
                let s = flow_closed(&p, t);
                let rt = s.a_t.r2();
                assert!((rt - s.r2_t).abs() <= 1e-10 * s.r2_t);
                let k = s.a_t.matrix.commutator(&s.a_t.matrix.adjoint());
                assert!((k - s.k_t).max_abs() <= 1e-10 * (1.0 + k.max_abs()));
                let df = (s.a_t.casimir() - p.casimir()).norm();
                assert!(df <= 1e-10 * (1.0 + p.r2()));
                let es = s.eps_t * varsigma_t(p.casimir().norm(), p.r2(), t);
                assert!((es - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn radius_is_monotone() {
        let p = Sl2Point::new([0.3, -0.7, 0.9, 0.2, -0.4, 0.5]);
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let r = flow_closed(&p, i as f64 * 0.2).r2_t;
            assert!(r <= prev + 1e-15);
            prev = r;
        }
    }

    #[test]
    fn retraction_properties() {
        let mut rng = sampling::rng(5);
        assert_eq!(retract(&nilpotent()), Sl2Point::origin());
        let mut checked = 0;
        while checked < 100 {
            let p = sampling::point_in_ball(&mut rng, 2.0);
            let abs_f = p.casimir().norm();
            if abs_f < 0.1 {
                continue;
            }
            checked += 1;
            let r = retract(&p);
            assert!(skeleton_gap(&r).abs() <= 1e-9 * (1.0 + p.r2()));
            assert!((r.r2() - 2.0 * abs_f).abs() <= 1e-10 * (1.0 + p.r2()));
            assert!((r.casimir() - p.casimir()).norm() <= 1e-10 * (1.0 + p.r2()));
            assert!(mat_dist(&retract(&r), &r) <= 1e-10);
            let u = sampling::su2(&mut rng);
            let lhs = retract(&adjoint_action(&u, &p));
            let rhs = adjoint_action(&u, &r);
            assert!(mat_dist(&lhs, &rhs) <= 1e-10);
            let far = flow_closed(&p, 10.0 / abs_f).a_t;
            assert!(mat_dist(&far, &r) <= 1e-6);
        }
    }

    #[test]
    fn lie_derivative_of_f_vanishes() {
        let mut rng = sampling::rng(6);
        for _ in 0..100 {
            let p = sampling::point_in_ball(&mut rng, 2.0);
            let w = w_coords(&p);
            let h = 1e-5;
            let shift = |s: f64| {
                let c: [f64; 6] = std::array::from_fn(|i| p.coords[i] + s * h * w[i]);
                Sl2Point::new(c).casimir()
            };
            let d = (shift(1.0) - shift(-1.0)).norm() / (2.0 * h);
            assert!(d <= 1e-6 * (1.0 + p.r2().powf(1.5)));
        }
    }

    #[test]
    fn mu_examples() {
        let (t, r) = (2.0f64, 3.0f64);
        assert!((mu_eval(2, 2, t, r) - (t * r * r + t.sqrt() * r + 1.0)).abs() < 1e-12);
        assert_eq!(mu_eval(0, 4, t, r), r.powi(4));
        let ts: Vec<f64> = (0..60).map(|i| 10f64.powf(-3.0 + i as f64 * 0.1)).collect();
        let rs: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let c = mu_submult_constant((2, 2), (2, 2), &ts, &rs);
        assert!(c.is_finite() && c >= 1.0);
    }

    #[test]
    fn eps_ratio_basics() {
        let p = Sl2Point::new([0.3, -0.7, 0.9, 0.2, -0.4, 0.5]);
        assert!((eps_ratio(2.0, &p, 0.0) - 1.0).abs() < 1e-15);
        let res = eps_bound_check(1.0, 9, 2000, 2.0, 100.0);
        assert!(res.is_stable(1.05), "{res:?}");
    }

    #[test]
    fn theta_bounds_finite() {
        let xs: Vec<f64> = (0..2000).map(|i| i as f64 * 0.025).collect();
        for n in 0..=4 {
            let b = theta_bounds_check(n, &xs);
            assert!(b.iter().all(|v| v.is_finite()), "{n}: {b:?}");
        }
        let _ = coords_to_matrix(&[0.0; 6]);
        let _ = I;
    }
}
