//! The verification suites. Each check is a closure over the configuration;
//! suites run their checks in parallel and the report sorts them by id.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use sl2pc::cohomology::{
    bracket_compatibility, expected_betti, structure_from_matrices, structure_from_poisson, CeEngine,
    CohomologyConfig, RankMethod,
};
use sl2pc::error::Result;
use sl2pc::exterior::{differential, lichnerowicz, AltValue, GradedField, Variance};
use sl2pc::flat::{
    eigenspace_decompose, flat_norm, j_swap, membership_k, membership_m, odd_lift, pair_add, pair_same,
    project_mk, random_poly2, random_ring, scalar_family, sigma, slb_ratio, sq_transport, y_bracket_numeric,
    y_field_relations, y_fields, FlatGrid,
};
use sl2pc::flow::{
    eps_bound_check, flow_closed, flow_derivative_sweep, flow_rk4, mat_dist, retract, theta_bounds_check, w_norm_sq,
    w_norm_sq_closed,
};
use sl2pc::frame::{bigrade_split, flat, mat_mul, pi_at, sharp, singular_frame};
use sl2pc::homotopy::{
    canonical_flat_forms, delta_at, homotopy_residual_skeleton, homotopy_residual_su2, homotopy_residual_t, p_skeleton,
    p_su2, slb_h_skeleton, AveragedForm, FnForm, Map, NumericForm, PullbackForm, QuadratureSpec, Tag, Tagged, Vec6,
};
use sl2pc::poisson::{cartan_cocycles, casimirs, euler_identity_check, poisson_bivectors, real_euler};
use sl2pc::sampling::{self, point_in_ball, point_in_shell, unit_vector, SweepRng};
use sl2pc::skeleton::{
    equivariance_residual, phi_at, pullback_identity_omega, pullback_identity_phi, rotation_convention_check,
    skeleton_invariants, w_fields_related, DesingPoint,
};
use sl2pc::sl2::{char_residuals, invariants, skeleton_gap, Sl2Point};

use crate::config::Config;
use crate::report::{CheckRecord, Status, VerificationReport};

pub const SUITES: [&str; 6] = ["core", "exterior", "flow", "skeleton", "homotopy", "flat"];

/// Suites run by `verify all`.
pub const ALL: [&str; 5] = ["core", "exterior", "flow", "skeleton", "homotopy"];

#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    pub value: Value,
    pub tolerance: Value,
    pub note: Option<String>,
}

impl Outcome {
    fn exact(ok: bool, value: Value) -> Self {
        Outcome { status: pass_if(ok), value, tolerance: json!("exact"), note: None }
    }

    /// Passes when value is finite and at most tol.
    fn bound(value: f64, tol: f64) -> Self {
        Outcome { status: pass_if(value.is_finite() && value <= tol), value: json!(value), tolerance: json!(tol), note: None }
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.note = Some(n.into());
        self
    }
}

fn pass_if(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn settle(r: Result<Outcome>) -> Outcome {
    r.unwrap_or_else(|e| Outcome { status: Status::Fail, value: Value::Null, tolerance: Value::Null, note: Some(e.to_string()) })
}

type CheckFn = Box<dyn Fn(&Config, u64) -> Result<Outcome> + Send + Sync>;

pub struct Check {
    pub suite: &'static str,
    pub id: String,
    pub anchor: &'static str,
    run: CheckFn,
}

fn check<F>(suite: &'static str, id: impl Into<String>, anchor: &'static str, f: F) -> Check
where
    F: Fn(&Config, u64) -> Result<Outcome> + Send + Sync + 'static,
{
    Check { suite, id: id.into(), anchor, run: Box::new(f) }
}

/// Per-check seed: the configured seed mixed with the check id.
pub fn check_seed(seed: u64, id: &str) -> u64 {
    let d = Sha256::digest(id.as_bytes());
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    seed ^ u64::from_le_bytes(b)
}

pub fn checks(suite: &str) -> Vec<Check> {
    match suite {
        "core" => core_checks(),
        "exterior" => exterior_checks(),
        "flow" => flow_checks(),
        "skeleton" => skeleton_checks(),
        "homotopy" => homotopy_checks(),
        "flat" => flat_checks(),
        _ => Vec::new(),
    }
}

pub fn run_suites(suites: &[&str], cfg: &Config, timings: bool) -> VerificationReport {
    let all: Vec<Check> = suites.iter().flat_map(|s| checks(s)).collect();
    let hash = cfg.hash();
    let records: Vec<CheckRecord> = all
        .par_iter()
        .map(|c| {
            let start = Instant::now();
            let o = settle((c.run)(cfg, check_seed(cfg.seed, &c.id)));
            let ms = start.elapsed().as_secs_f64() * 1e3;
            CheckRecord {
                suite: c.suite.to_string(),
                id: c.id.clone(),
                anchor: c.anchor.to_string(),
                status: o.status,
                value: o.value,
                tolerance: o.tolerance,
                note: o.note,
                runtime_ms: timings.then_some(ms),
                config_hash: hash.clone(),
                seed: cfg.seed,
            }
        })
        .collect();
    VerificationReport::new(suites.iter().map(|s| s.to_string()).collect(), records, hash, cfg.seed)
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

fn max_result(it: impl Iterator<Item = Result<f64>>) -> Result<f64> {
    let mut m = 0.0f64;
    for v in it {
        m = m.max(v?);
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// core: exact identities and the formal cohomology table

fn core_checks() -> Vec<Check> {
    const S: &str = "core";
    let mut v = vec![
        check(S, "structure_constants_two_routes", "structure constants from matrix commutators and from the pi1 bracket", |_, _| {
            let a = structure_from_matrices();
            let b = structure_from_poisson()?;
            Ok(Outcome::exact(a == b, json!(a == b)))
        }),
        check(S, "jacobi_identity", "Jacobi identity and antisymmetry of the real structure constants", |_, _| {
            let a = structure_from_matrices();
            let res = a.jacobi_residual();
            let ok = a.is_antisymmetric() && res == sl2pc::poly::q(0);
            Ok(Outcome::exact(ok, json!(res.to_string())))
        }),
        check(S, "linear_function_brackets", "{l_X, l_Y} = l_[X,Y] for basis pairs", |_, _| {
            let n = bracket_compatibility()?;
            Ok(Outcome::exact(n == 15, json!(n)))
        }),
        check(S, "schouten_pi1_pi1", "[pi1, pi1] = 0", |_, _| schouten_zero(0, 0)),
        check(S, "schouten_pi2_pi2", "[pi2, pi2] = 0", |_, _| schouten_zero(1, 1)),
        check(S, "schouten_pi1_pi2", "[pi1, pi2] = 0", |_, _| schouten_zero(0, 1)),
        check(S, "casimirs_central_pi1", "d_pi1 f1 = d_pi1 f2 = 0", |_, _| casimirs_central(0)),
        check(S, "casimirs_central_pi2", "d_pi2 f1 = d_pi2 f2 = 0", |_, _| casimirs_central(1)),
        check(S, "cartan_contract_f1", "i_{df1} C_R = pi1", |_, _| cartan_contract(0)),
        check(S, "cartan_contract_f2", "i_{df2} C_R = pi2", |_, _| cartan_contract(1)),
        check(S, "cartan_closed_real", "d_pi1 C_R = 0", |_, _| {
            let z = lichnerowicz(&poisson_bivectors().pi1, &cartan_cocycles().0)?.is_zero();
            Ok(Outcome::exact(z, json!(z)))
        }),
        check(S, "cartan_closed_imag", "d_pi1 C_I = 0", |_, _| {
            let z = lichnerowicz(&poisson_bivectors().pi1, &cartan_cocycles().1)?.is_zero();
            Ok(Outcome::exact(z, json!(z)))
        }),
        check(S, "euler_identity", "pi2 = 2[pi1, E2] with the holomorphic Euler field", |_, _| {
            let c = euler_identity_check()?;
            let ok = c.residual.is_zero();
            Ok(Outcome::exact(ok, json!(format!("{:?}", c.convention))))
        }),
        check(S, "euler_weight_pi1", "[pi1, E] = pi1 for the real Euler field", |_, _| {
            let pi1 = poisson_bivectors().pi1;
            let ok = pi1.schouten(&real_euler())? == pi1;
            Ok(Outcome::exact(ok, json!(ok)))
        }),
        check(S, "h3_witnesses_d2", "f^a C_R, f^a C_I are closed and independent in H^3 at d = 2", |_, _| {
            let e = CeEngine::new(CohomologyConfig::default())?;
            let w = e.cocycle_witness(2)?;
            Ok(Outcome::exact(w.len() == 4, json!(w.len())))
        }),
        check(S, "schouten_agreement_k2_d1", "CE differential equals [pi1, .] on random cochains", |cfg, seed| {
            let e = CeEngine::new(CohomologyConfig::default())?;
            let n = cfg.core.schouten_samples;
            let agree = e.schouten_agreement(2, 1, n, seed)?;
            Ok(Outcome::exact(agree == n, json!(agree)))
        }),
    ];
    v.push(check(S, "betti_table", "formal Poisson cohomology: m(d)(1,0,0,2,0,0,1) for even d, 0 for odd d", |cfg, _| {
        let e = CeEngine::new(CohomologyConfig { degree_cap: cfg.core.degree_cap, escalate: true })?;
        let degrees: Vec<u32> = (0..=cfg.core.max_degree).collect();
        let ks: Vec<usize> = (0..=6).collect();
        let t = e.betti_table(&degrees, &ks, RankMethod::Modular)?;
        let ok = t.rows.iter().enumerate().all(|(ki, row)| {
            row.iter().enumerate().all(|(di, b)| *b == expected_betti(ks[ki], degrees[di]))
        });
        Ok(Outcome::exact(ok, json!(t.rows)))
    }));
    v
}

fn schouten_zero(a: usize, b: usize) -> Result<Outcome> {
    let pb = poisson_bivectors();
    let p = [&pb.pi1, &pb.pi2];
    let z = p[a].schouten(p[b])?.is_zero();
    Ok(Outcome::exact(z, json!(z)))
}

fn casimirs_central(i: usize) -> Result<Outcome> {
    let pb = poisson_bivectors();
    let pi = if i == 0 { &pb.pi1 } else { &pb.pi2 };
    let (f1, f2) = casimirs();
    let mut ok = true;
    for f in [f1, f2] {
        ok &= lichnerowicz(pi, &GradedField::function(f, Variance::Multivector))?.is_zero();
    }
    Ok(Outcome::exact(ok, json!(ok)))
}

fn cartan_contract(i: usize) -> Result<Outcome> {
    let pb = poisson_bivectors();
    let (f1, f2) = casimirs();
    let (cr, _) = cartan_cocycles();
    let (f, pi) = if i == 0 { (f1, pb.pi1) } else { (f2, pb.pi2) };
    let ok = cr.contract_by(&differential(&f))? == pi;
    Ok(Outcome::exact(ok, json!(ok)))
}

// ---------------------------------------------------------------------------
// exterior: pointwise algebra and the singular frame

fn ball_points(seed: u64, n: usize, r_max: f64) -> Vec<Sl2Point> {
    let mut g = sampling::rng(seed);
    (0..n).map(|_| point_in_ball(&mut g, r_max)).collect()
}

/// Points with ‖A‖ ≤ r_max and |f| ≥ min_f, by rejection.
fn ball_points_off_cone(seed: u64, n: usize, r_max: f64, min_f: f64) -> Vec<Sl2Point> {
    let mut g = sampling::rng(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = point_in_ball(&mut g, r_max);
        if p.casimir().norm() >= min_f {
            out.push(p);
        }
    }
    out
}

fn exterior_checks() -> Vec<Check> {
    const S: &str = "exterior";
    let mut v = vec![
        check(S, "invariants_two_pictures", "f and R^2 from coordinates and from det, tr AA*", |cfg, seed| {
            let pts = ball_points(seed, cfg.exterior.samples, cfg.exterior.r_max);
            let bad = pts.iter().filter(|p| invariants(p).is_err()).count();
            Ok(Outcome::exact(bad == 0, json!(bad)))
        }),
        check(S, "characteristic_identities", "A^2 = -f and (AA*)^2 - R^2 AA* + |f|^2 = 0", |cfg, seed| {
            let pts = ball_points(seed, cfg.exterior.samples, cfg.exterior.r_max);
            let m = max_of(pts.iter().map(|p| {
                let (a, b) = char_residuals(p);
                let s = 1.0 + p.r2();
                (a.max_abs() / s).max(b.max_abs() / (s * s))
            }));
            Ok(Outcome::bound(m, cfg.tol(cfg.exterior.tol)))
        }),
        check(S, "w_norm_closed_form", "|W|^2 = R^2(R^4 - 4|f|^2)/8", |cfg, seed| {
            let pts = ball_points(seed, cfg.exterior.samples, cfg.exterior.r_max);
            let m = max_of(pts.iter().map(|p| (w_norm_sq(p) - w_norm_sq_closed(p)).abs() / (1.0 + p.r2()).powi(3)));
            Ok(Outcome::bound(m, cfg.tol(cfg.exterior.tol)))
        }),
        check(S, "hopf_rotation", "R_U e1 = hopf(U) and R_U in SO(3)", |cfg, seed| {
            let mut g = sampling::rng(seed);
            let m = max_result((0..cfg.exterior.samples).map(|_| {
                let (a, b) = rotation_convention_check(&sampling::su2(&mut g))?;
                Ok(a.max(b))
            }))?;
            Ok(Outcome::bound(m, cfg.tol(cfg.exterior.tol)))
        }),
        check(S, "frame_transversality", "df_j(V_i) = delta_ij", |cfg, seed| {
            let pts = ball_points_off_cone(seed, cfg.exterior.samples, cfg.exterior.r_max, 0.1);
            let (f1, f2) = casimirs();
            let dfs = [differential(&f1), differential(&f2)];
            let m = max_result(pts.iter().map(|p| {
                let fr = singular_frame(p)?;
                let mut r = 0.0f64;
                for (j, df) in dfs.iter().enumerate() {
                    let d = df.at(&p.coords)?;
                    for i in 0..2 {
                        let e = if i == j { 1.0 } else { 0.0 };
                        r = r.max((d.eval_on(&[fr.v[i]]) - e).abs());
                    }
                }
                Ok(r / frame_scale(p))
            }))?;
            Ok(Outcome::bound(m, cfg.tol(cfg.exterior.tol)))
        }),
        check(S, "frame_omega_inverse", "pi_i# omega_i flat pi_i# = pi_i# and omega_i(V_j, .) = 0", |cfg, seed| {
            let pts = ball_points_off_cone(seed, cfg.exterior.samples, cfg.exterior.r_max, 0.1);
            let m = max_result(pts.iter().map(|p| {
                let fr = singular_frame(p)?;
                let mut r = 0.0f64;
                for i in 0..2 {
                    let s = sharp(&pi_at(i, &p.coords));
                    let comp = mat_mul(&mat_mul(&s, &flat(&fr.omega[i])), &s);
                    for (a, b) in comp.iter().flatten().zip(s.iter().flatten()) {
                        r = r.max((a - b).abs());
                    }
                    for j in 0..2 {
                        let vj = AltValue::from_vector(Variance::Multivector, &fr.v[j]);
                        r = r.max(fr.omega[i].contract_by(&vj).max_abs());
                    }
                }
                Ok(r / frame_scale(p))
            }))?;
            Ok(Outcome::bound(m, cfg.tol(cfg.exterior.tol)))
        }),
        check(S, "bigraded_reconstruction", "pointwise bigraded split sums back to pi1 and C_R", |cfg, seed| {
            let pts = ball_points_off_cone(seed, cfg.exterior.samples, cfg.exterior.r_max, 0.1);
            let (cr, _) = cartan_cocycles();
            let m = max_result(pts.iter().map(|p| {
                let pi1 = pi_at(0, &p.coords);
                let c = cr.at(&p.coords)?;
                let a = bigrade_split(&pi1, p)?.reconstruct(2).sub(&pi1).max_abs();
                let b = bigrade_split(&c, p)?.reconstruct(3).sub(&c).max_abs();
                Ok(a.max(b) / frame_scale(p))
            }))?;
            Ok(Outcome::bound(m, cfg.tol(cfg.exterior.tol)))
        }),
    ];
    v.push(check(S, "theta_bounds", "weighted theta derivative maxima finite for n <= max order", |cfg, _| {
        let xs: Vec<f64> = (0..2000).map(|i| i as f64 * 0.025).collect();
        let rows: Vec<[f64; 3]> = (0..=cfg.exterior.theta_max_order).map(|n| theta_bounds_check(n, &xs)).collect();
        let ok = rows.iter().flatten().all(|v| v.is_finite());
        Ok(Outcome { status: pass_if(ok), value: json!(rows), tolerance: json!("finite"), note: None })
    }));
    v
}

/// Allowed refinement growth g, tightened toward 1 by the tolerance scale.
fn growth(cfg: &Config, g: f64) -> f64 {
    1.0 + (g - 1.0) * cfg.tol_scale
}

/// Residual scale for singular-frame identities: the frame blows up like 1/|f|.
fn frame_scale(p: &Sl2Point) -> f64 {
    (1.0 + p.r2()) * (1.0 + p.r2() / p.casimir().norm())
}

// ---------------------------------------------------------------------------
// flow

fn flow_checks() -> Vec<Check> {
    const S: &str = "flow";
    let mut v = Vec::new();
    v.push(check(S, "closed_vs_rk4", "closed-form flow against an RK4 integration", |cfg, seed| {
        let pts = ball_points(seed, cfg.flow.samples, cfg.flow.r_max);
        let mut per_t = Vec::new();
        for &t in &cfg.flow.times {
            let steps = ((cfg.flow.rk4_steps_per_unit as f64 * t).ceil() as usize).max(1);
            let d: Vec<f64> = pts.par_iter().map(|p| mat_dist(&flow_closed(p, t).a_t, &flow_rk4(p, t, steps))).collect();
            per_t.push((t, max_of(d.into_iter())));
        }
        let m = max_of(per_t.iter().map(|x| x.1));
        let tol = cfg.tol(cfg.flow.tol_matrix);
        let mut o = Outcome::bound(m, tol);
        o.value = json!({"max": m, "per_t": per_t});
        Ok(o)
    }));
    v.push(check(S, "r2_t_closed_form", "R_t^2 = (a^2 T + R^2)/(1 + T R^2) along the trajectory", |cfg, seed| {
        let pts = ball_points(seed, cfg.flow.samples, cfg.flow.r_max);
        let m = max_of(pts.iter().flat_map(|p| {
            cfg.flow.times.iter().map(move |&t| {
                let s = flow_closed(p, t);
                let traj = s.a_t.r2();
                (s.r2_t - traj).abs() / traj.max(f64::MIN_POSITIVE)
            })
        }));
        Ok(Outcome::bound(m, cfg.tol(cfg.flow.tol_rel)))
    }));
    v.push(check(S, "k_t_closed_form", "[A_t, A_t*] = eps_t [A, A*] along the trajectory", |cfg, seed| {
        let pts = ball_points(seed, cfg.flow.samples, cfg.flow.r_max);
        let m = max_of(pts.iter().flat_map(|p| {
            cfg.flow.times.iter().map(move |&t| {
                let s = flow_closed(p, t);
                let a = s.a_t.matrix;
                let traj = a.commutator(&a.adjoint());
                // relative to the operand scale: [A_t, A_t*] cancels down to
                // eps_t R_t^2, below the rounding floor of the product itself
                (traj - s.k_t).max_abs() / s.r2_t.max(f64::MIN_POSITIVE)
            })
        }));
        Ok(Outcome::bound(m, cfg.tol(cfg.flow.tol_rel)))
    }));
    v.push(check(S, "casimir_conserved", "f(A_t) = f(A) on closed-form and RK4 trajectories", |cfg, seed| {
        let pts = ball_points(seed, cfg.flow.samples, cfg.flow.r_max);
        let m = max_of(pts.iter().flat_map(|p| {
            cfg.flow.times.iter().map(move |&t| {
                let f = p.casimir();
                let steps = ((cfg.flow.rk4_steps_per_unit as f64 * t).ceil() as usize).max(1);
                let a = (flow_closed(p, t).a_t.casimir() - f).norm();
                let b = (flow_rk4(p, t, steps).casimir() - f).norm();
                a.max(b) / (1.0 + p.r2())
            })
        }));
        Ok(Outcome::bound(m, cfg.tol(cfg.flow.tol_rel)))
    }));
    v.push(check(S, "retraction_limit", "|phi_T(A) - r(A)| at T = 10/|f|", |cfg, seed| {
        let pts = ball_points_off_cone(seed, cfg.flow.retract_samples, cfg.flow.r_max, cfg.flow.retract_min_f);
        let m = max_of(pts.iter().map(|p| {
            let t = 10.0 / p.casimir().norm();
            mat_dist(&flow_closed(p, t).a_t, &retract(p))
        }));
        Ok(Outcome::bound(m, cfg.tol(cfg.flow.tol_retract_limit)))
    }));
    v.push(check(S, "retraction_normal", "r(A) is normal: gap / (1 + R^2)", |cfg, seed| {
        let pts = ball_points_off_cone(seed, cfg.flow.retract_samples, cfg.flow.r_max, cfg.flow.retract_min_f);
        let m = max_of(pts.iter().map(|p| skeleton_gap(&retract(p)).abs() / (1.0 + p.r2())));
        Ok(Outcome::bound(m, cfg.tol(1e-9)))
    }));
    v.push(check(S, "retraction_norm", "|r(A)|^2 = 2|f|", |cfg, seed| {
        let pts = ball_points_off_cone(seed, cfg.flow.retract_samples, cfg.flow.r_max, cfg.flow.retract_min_f);
        let m = max_of(pts.iter().map(|p| (retract(p).r2() - 2.0 * p.casimir().norm()).abs()));
        Ok(Outcome::bound(m, cfg.tol(cfg.flow.tol_retract)))
    }));
    for q in 1..=3u32 {
        v.push(check(S, format!("eps_ratio_q{q}"), "eps_t R_t^2q (1+tR^2)^q / R^2q finite and refinement-stable", move |cfg, seed| {
            let r = eps_bound_check(q as f64, seed, cfg.flow.sweep_samples, cfg.flow.r_max, 100.0);
            Ok(Outcome {
                status: pass_if(r.is_stable(growth(cfg, 1.05))),
                value: json!(r),
                tolerance: json!({"growth": growth(cfg, 1.05)}),
                note: None,
            })
        }));
    }
    for n in 0..=2usize {
        v.push(check(S, format!("flow_derivatives_n{n}"), "|d^a A_t| / mu_{2n+1/2,3n+2} finite and refinement-stable", move |cfg, seed| {
            let samples = (cfg.flow.sweep_samples / 10).max(10);
            let r = flow_derivative_sweep(n, seed, samples, cfg.flow.r_max, 20.0);
            Ok(Outcome {
                status: pass_if(r.is_stable(growth(cfg, 2.0))),
                value: json!(r),
                tolerance: json!({"growth": growth(cfg, 2.0)}),
                note: None,
            })
        }));
    }
    v
}

// ---------------------------------------------------------------------------
// skeleton: the desingularization

fn desing_points(seed: u64, n: usize, lambda_max: f64) -> Vec<DesingPoint> {
    let mut g = sampling::rng(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let d = DesingPoint::random(&mut g, lambda_max);
        if d.lambda.norm() > 1e-3 {
            out.push(d);
        }
    }
    out
}

fn skeleton_checks() -> Vec<Check> {
    const S: &str = "skeleton";
    type Metric = fn(&DesingPoint) -> Result<f64>;
    let specs: [(&str, &str, Metric); 8] = [
        ("casimir_pullback", "f(rho(w, lambda)) = lambda^2", |d| {
            Ok(skeleton_invariants(d)?.casimir / (1.0 + d.lambda.norm_sqr()))
        }),
        ("norm_pullback", "R^2(rho) = 2|lambda|^2", |d| Ok(skeleton_invariants(d)?.norm / (1.0 + d.lambda.norm_sqr()))),
        ("image_is_normal", "rho lands on the skeleton", |d| Ok(skeleton_invariants(d)?.gap / (1.0 + d.lambda.norm_sqr()))),
        ("retraction_fixes_image", "r(rho) = rho", |d| Ok(skeleton_invariants(d)?.retract / (1.0 + d.lambda.norm()))),
        ("phi_pullback", "rho* phi = 4|lambda|^2 dl1 ^ dl2", |d| {
            Ok(pullback_identity_phi(d)? / (1.0 + d.lambda.norm_sqr()).powi(2))
        }),
        ("omega_pullback", "rho* w1 = -l1 w_S2, rho* w2 = l2 w_S2", |d| {
            let (a, b) = pullback_identity_omega(d)?;
            Ok(a.max(b) / (1.0 + d.lambda.norm()))
        }),
        ("w_fields_related", "d rho(W_i) = V_i", |d| {
            let (a, b) = w_fields_related(d)?;
            Ok(a.max(b) / (1.0 + 1.0 / d.lambda.norm()))
        }),
        ("deck_involution", "rho(-w, -lambda) = rho(w, lambda)", |d| Ok(skeleton_invariants(d)?.z2)),
    ];
    let mut v: Vec<Check> = specs
        .into_iter()
        .map(|(id, anchor, f)| {
            check(S, id, anchor, move |cfg, seed| {
                let pts = desing_points(seed, cfg.skeleton.samples, cfg.skeleton.lambda_max);
                let m = max_result(pts.iter().map(f))?;
                Ok(Outcome::bound(m, cfg.tol(cfg.skeleton.tol)))
            })
        })
        .collect();
    v.push(check(S, "su2_equivariance", "U rho(w, lambda) U* = rho(R_U w, lambda)", |cfg, seed| {
        let pts = desing_points(seed, cfg.skeleton.samples, cfg.skeleton.lambda_max);
        let mut g = sampling::rng(seed ^ 1);
        let m = max_result(pts.iter().map(|d| Ok(equivariance_residual(&sampling::su2(&mut g), d)? / (1.0 + d.lambda.norm()))))?;
        Ok(Outcome::bound(m, cfg.tol(cfg.skeleton.tol)))
    }));
    v
}

// ---------------------------------------------------------------------------
// homotopy

fn unit_vectors(g: &mut SweepRng, k: usize) -> Vec<Vec6> {
    (0..k).map(|_| unit_vector::<6>(g)).collect()
}

fn homotopy_checks() -> Vec<Check> {
    const S: &str = "homotopy";
    vec![
        check(S, "finite_time_identity", "phi_t* a - a = d h_t a + h_t d a on the flat family", |cfg, seed| {
            let h = &cfg.homotopy;
            let mut g = sampling::rng(seed);
            let mut cases = Vec::new();
            for a in canonical_flat_forms() {
                for _ in 0..h.finite_per_form {
                    let x = point_in_shell(&mut g, h.r_max, 0.0);
                    let v = unit_vectors(&mut g, a.degree);
                    let t = sampling::uniform(&mut g, 0.1, h.t_max);
                    cases.push((a, x, v, t));
                }
            }
            let q = QuadratureSpec::default();
            let res: Vec<Result<f64>> = cases
                .par_iter()
                .map(|(a, x, v, t)| {
                    let r = homotopy_residual_t(*a, x, v, *t, &q)?;
                    Ok(r.residual / r.scale)
                })
                .collect();
            let m = max_result(res.into_iter())?;
            Ok(Outcome::bound(m, cfg.tol(h.tol_finite)).note(format!("{} configurations, residual / (1+R)^(k+1)", cases.len())))
        }),
        check(S, "infinite_time_identity", "p_S a - a = d h_S a + h_S d a off the cone", |cfg, seed| {
            let h = &cfg.homotopy;
            let mut g = sampling::rng(seed);
            let mut cases = Vec::new();
            for a in canonical_flat_forms() {
                for _ in 0..h.infinite_per_form {
                    let x = point_in_shell(&mut g, 1.4, h.skeleton_min_f);
                    let v = unit_vectors(&mut g, a.degree);
                    cases.push((a, x, v));
                }
            }
            let tol = cfg.tol(h.quad_tol);
            let res: Vec<Result<f64>> = cases
                .par_iter()
                .map(|(a, x, v)| Ok(homotopy_residual_skeleton(*a, x, v, tol)?.residual))
                .collect();
            let m = max_result(res.into_iter())?;
            Ok(Outcome::bound(m, 5.0 * tol).note(format!("{} configurations, quadrature tolerance {tol:e}", cases.len())))
        }),
        check(S, "su2_identity", "p_SU2 a - a = d h_SU2 a + h_SU2 d a", |cfg, seed| {
            let h = &cfg.homotopy;
            let mut g = sampling::rng(seed);
            let forms = canonical_flat_forms();
            let cases: Vec<_> = (0..h.su2_configs)
                .map(|i| {
                    let a = &forms[i % forms.len()];
                    let x = point_in_shell(&mut g, 1.5, 0.0);
                    let v = unit_vectors(&mut g, a.degree);
                    (a, x, v)
                })
                .collect();
            let res: Vec<Result<f64>> = cases
                .par_iter()
                .map(|(a, x, v)| Ok(homotopy_residual_su2(*a, x, v, h.su2_n_quad)?.residual))
                .collect();
            let m = max_result(res.into_iter())?;
            Ok(Outcome::bound(m, cfg.tol(h.tol_su2)).note(format!("{} configurations", cases.len())))
        }),
        check(S, "p_skeleton_fixes_casimir_multiples", "p_S((1 + f1^2 + f2) phi) = (1 + f1^2 + f2) phi", |cfg, seed| {
            let alpha = FnForm::new(2, |y| {
                let f = Sl2Point::new(*y).casimir();
                Ok(phi_at(y).scale(1.0 + f.re * f.re + f.im))
            });
            let mut g = sampling::rng(seed);
            let m = max_result((0..10).map(|_| {
                let x = point_in_shell(&mut g, 1.5, 0.1);
                let v = unit_vectors(&mut g, 2);
                Ok((alpha.eval(&x, &v)? - p_skeleton(&alpha, &x, &v)?).abs())
            }))?;
            Ok(Outcome::bound(m, cfg.tol(1e-8)))
        }),
        check(S, "p_skeleton_idempotent", "p_S p_S = p_S", |cfg, seed| {
            let a: Arc<dyn NumericForm> = Arc::new(canonical_flat_forms()[3].clone());
            let once = PullbackForm { map: Map::Retract, inner: a.clone() };
            let mut g = sampling::rng(seed);
            let m = max_result((0..10).map(|_| {
                let x = point_in_shell(&mut g, 1.5, 0.2);
                let v = unit_vectors(&mut g, 2);
                Ok((p_skeleton(a.as_ref(), &x, &v)? - p_skeleton(&once, &x, &v)?).abs())
            }))?;
            Ok(Outcome::bound(m, cfg.tol(1e-7)))
        }),
        check(S, "p_su2_commutes_with_p_skeleton", "p_SU2 p_S = p_S p_SU2", |cfg, seed| {
            let a: Arc<dyn NumericForm> = Arc::new(canonical_flat_forms()[2].clone());
            let ps: Arc<dyn NumericForm> = Arc::new(PullbackForm { map: Map::Retract, inner: a.clone() });
            let pa: Arc<dyn NumericForm> = Arc::new(AveragedForm { inner: a.clone(), n_quad: 6 });
            let mut g = sampling::rng(seed);
            let m = max_result((0..3).map(|_| {
                let x = point_in_shell(&mut g, 1.5, 0.2);
                let v = unit_vectors(&mut g, 2);
                Ok((p_su2(ps.as_ref(), &x, &v, 6)? - p_skeleton(pa.as_ref(), &x, &v)?).abs())
            }))?;
            Ok(Outcome::bound(m, cfg.tol(1e-7)))
        }),
        check(S, "delta_squared", "delta o delta = 0 on tagged forms", |cfg, seed| {
            let mut g = sampling::rng(seed);
            let m = max_result((0..50).map(|_| {
                let y = point_in_shell(&mut g, 1.5, 0.1);
                let mut t = Tagged::zero(1);
                for tag in [Tag::One, Tag::E1, Tag::E2, Tag::E12] {
                    *t.get_mut(tag) = AltValue::from_vector(Variance::Form, &unit_vector::<6>(&mut g));
                }
                let d = delta_at(&y, &t)?;
                Ok(delta_at(&y, &d)?.max_abs() / (1.0 + d.max_abs()))
            }))?;
            Ok(Outcome::bound(m, cfg.tol(1e-10)))
        }),
    ]
}

// ---------------------------------------------------------------------------
// flat: norm ring, Y fields, parity, SLB sweeps

fn flat_checks() -> Vec<Check> {
    const S: &str = "flat";
    vec![
        check(S, "projections_sum_to_identity", "p_M + p_K = id", |cfg, seed| {
            let mut g = sampling::rng(seed);
            let ok = (0..cfg.flat.ring_samples).all(|_| {
                let (g1, g2) = (random_ring(&mut g), random_ring(&mut g));
                let (m, k) = project_mk(&g1, &g2);
                pair_same(&pair_add(&m, &k), &(g1, g2))
            });
            Ok(Outcome::exact(ok, json!(ok)))
        }),
        check(S, "projections_land_and_idempotent", "p_M, p_K images satisfy their relations; p_M p_M = p_M", |cfg, seed| {
            let mut g = sampling::rng(seed);
            let ok = (0..cfg.flat.ring_samples).all(|_| {
                let (g1, g2) = (random_ring(&mut g), random_ring(&mut g));
                let (m, k) = project_mk(&g1, &g2);
                let (mm, mk) = project_mk(&m.0, &m.1);
                membership_m(&m.0, &m.1)
                    && membership_k(&k.0, &k.1)
                    && pair_same(&mm, &m)
                    && mk.0.is_zero()
                    && mk.1.is_zero()
            });
            Ok(Outcome::exact(ok, json!(ok)))
        }),
        check(S, "j_swap_exchanges_modules", "J(g1, g2) = (-g2, g1) maps M into K", |cfg, seed| {
            let mut g = sampling::rng(seed);
            let ok = (0..cfg.flat.ring_samples).all(|_| {
                let (m, _) = project_mk(&random_ring(&mut g), &random_ring(&mut g));
                let j = j_swap(&m);
                membership_k(&j.0, &j.1)
            });
            Ok(Outcome::exact(ok, json!(ok)))
        }),
        check(S, "y_bracket_stated", "[Y1, Y2] = Y2 as stated", |_, _| {
            let r = y_field_relations();
            let o = Outcome::exact(r.bracket_holds(), json!(r.bracket_holds()));
            Ok(if r.swapped_holds() { o.note("the bracket evaluates to -Y1 exactly") } else { o })
        }),
        check(S, "y_bracket_computed", "[Y1, Y2] = -Y1", |_, _| {
            let r = y_field_relations();
            Ok(Outcome::exact(r.swapped_holds(), json!(r.swapped_holds())))
        }),
        check(S, "y_proportionality", "(|z| - x) Y1 = -y Y2", |_, _| {
            let r = y_field_relations();
            Ok(Outcome::exact(r.proportionality_holds(), json!(r.proportionality_holds())))
        }),
        check(S, "y_bracket_numeric", "finite-difference [Y1, Y2] + Y1 at sample points", |cfg, seed| {
            let mut g = sampling::rng(seed);
            let (y1, _) = y_fields();
            let m = max_of((0..cfg.flat.numeric_points).map(|_| {
                let (x, y) = (sampling::uniform(&mut g, -3.0, 3.0), sampling::uniform(&mut g, -3.0, 3.0));
                let num = y_bracket_numeric(x, y);
                (0..2).map(|j| (num[j] + y1[j].eval(x, y)).abs()).fold(0.0, f64::max) / (1.0 + x.abs() + y.abs())
            }));
            Ok(Outcome::bound(m, cfg.tol(1e-6)))
        }),
        check(S, "parity_reconstruction", "g = g0 + x gx + y gy + xy gxy with invariant parts", |cfg, seed| {
            let mut g = sampling::rng(seed);
            let mut ok = true;
            for _ in 0..cfg.flat.ring_samples {
                let p = random_poly2(&mut g, 6, 8);
                let d = eigenspace_decompose(&p)?;
                ok &= d.reconstruct() == p && d.all_invariant();
            }
            Ok(Outcome::exact(ok, json!(ok)))
        }),
        check(S, "sq_transport_even", "g o sq is sigma-invariant", |cfg, seed| {
            let mut g = sampling::rng(seed);
            let ok = (0..cfg.flat.ring_samples).all(|_| {
                let p = sq_transport(&random_poly2(&mut g, 4, 6));
                sigma(&p) == p
            });
            Ok(Outcome::exact(ok, json!(ok)))
        }),
        check(S, "odd_lift_kernel", "-l1 g1 o sq + l2 g2 o sq is odd and kills K", |cfg, seed| {
            let mut g = sampling::rng(seed);
            let ok = (0..cfg.flat.ring_samples).all(|_| {
                let (g1, g2) = (random_ring(&mut g), random_ring(&mut g));
                let (n, _) = odd_lift(&g1, &g2);
                let (_, k) = project_mk(&g1, &g2);
                sigma(&n) == -n.clone() && odd_lift(&k.0, &k.1).0.is_zero()
            });
            Ok(Outcome::exact(ok, json!(ok)))
        }),
        check(S, "slb_identity", "identity operator against (0,0,0) has ratio at most 1", |cfg, _| {
            let fam = scalar_family::<2>(9);
            let grid = FlatGrid::<2>::new(1.0, 12, 24);
            let r = slb_ratio(&fam, |f| Ok(flat_norm(f, 1, 1, &grid)), |f| Ok(flat_norm(f, 1, 1, &grid)))?;
            Ok(Outcome::bound(r.max_ratio, 1.0 + cfg.tol(1e-15)))
        }),
        check(S, "slb_h_skeleton", "h_S against (0,5,35), n <= 1, k <= 2: finite and refinement-stable", |cfg, _| {
            let f = &cfg.flat;
            let coarse = FlatGrid::<6>::new(1.0, 4, f.slb_dirs);
            let fine = FlatGrid::<6>::new(1.0, 4, 2 * f.slb_dirs);
            let fam = canonical_flat_forms();
            let a = slb_h_skeleton(fam, (0, 5, 35), 1, &[0, 1, 2], &coarse, f.slb_tol)?;
            let b = slb_h_skeleton(fam, (0, 5, 35), 1, &[0, 1, 2], &fine, f.slb_tol)?;
            let mut worst = 1.0f64;
            let mut finite = true;
            let mut rows = Vec::new();
            for (x, y) in a.iter().zip(&b) {
                finite &= x.result.max_ratio.is_finite() && y.result.max_ratio.is_finite();
                if x.result.max_ratio > 0.0 {
                    worst = worst.max(y.result.max_ratio / x.result.max_ratio);
                }
                rows.push(json!({"n": x.n, "k": x.k, "ratio": x.result.max_ratio, "refined": y.result.max_ratio}));
            }
            let g = growth(cfg, f.max_growth);
            let ok = finite && worst <= g;
            Ok(Outcome { status: pass_if(ok), value: json!({"ratios": rows, "growth": worst}), tolerance: json!({"growth": g}), note: None })
        }),
    ]
}
