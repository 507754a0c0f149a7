//! Seeded random inputs for sweeps.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::sl2::{su2_from_quaternion, Mat2, Sl2Point};

pub type SweepRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SweepRng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut SweepRng) -> f64 {
    // Box–Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn unit_vector<const N: usize>(rng: &mut SweepRng) -> [f64; N] {
    loop {
        let v: [f64; N] = std::array::from_fn(|_| gaussian(rng));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.map(|x| x / n);
        }
    }
}

/// Uniform point of the ball R = sqrt(tr AA*) ≤ r_max.
pub fn point_in_ball(rng: &mut SweepRng, r_max: f64) -> Sl2Point {
    let dir = unit_vector::<6>(rng);
    let u: f64 = rng.gen();
    let r = r_max * u.powf(1.0 / 6.0);
    // R² = 2 Σ coords²
    Sl2Point::new(dir.map(|x| x * r / std::f64::consts::SQRT_2))
}

/// Haar-random element of SU(2).
pub fn su2(rng: &mut SweepRng) -> Mat2 {
    su2_from_quaternion(&unit_vector::<4>(rng))
}

pub fn uniform(rng: &mut SweepRng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// Coordinate vector with Euclidean norm in [0.4·r, r] and |f| ≥ min_f, by rejection.
pub fn point_in_shell(rng: &mut SweepRng, r: f64, min_f: f64) -> [f64; 6] {
    loop {
        let u = unit_vector::<6>(rng);
        let x = u.map(|v| v * uniform(rng, 0.4, 1.0) * r);
        if Sl2Point::new(x).casimir().norm() >= min_f {
            return x;
        }
    }
}
