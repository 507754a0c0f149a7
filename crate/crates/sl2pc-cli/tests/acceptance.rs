//! Acceptance run: every suite at the criterion sample sizes, grouped into
//! the eight criteria. One line per criterion.
//!
//! Criterion 7 contains the stated bracket [Y1, Y2] = Y2, which is false
//! (the bracket is -Y1). It is reported as FAIL but does not change the exit
//! code as long as that is its only failing check.

use std::process::ExitCode;
use std::time::Instant;

use sl2pc_cli::config::Config;
use sl2pc_cli::report::{CheckRecord, Status};
use sl2pc_cli::suites::{run_suites, SUITES};

struct Criterion {
    name: &'static str,
    ids: &'static [&'static str],
    /// Runtime budget in seconds, if the criterion has one.
    budget: Option<f64>,
}

const KNOWN_FALSE: &str = "flat/y_bracket_stated";

const CRITERIA: [Criterion; 8] = [
    Criterion { name: "formal cohomology table, d <= 7", ids: &["core/betti_table"], budget: Some(300.0) },
    Criterion {
        name: "exact bracket identities",
        ids: &[
            "core/schouten_pi1_pi1",
            "core/schouten_pi2_pi2",
            "core/schouten_pi1_pi2",
            "core/cartan_closed_real",
            "core/cartan_closed_imag",
            "core/cartan_contract_f1",
            "core/cartan_contract_f2",
            "core/euler_identity",
        ],
        budget: Some(10.0),
    },
    Criterion {
        name: "flow fidelity",
        ids: &["flow/closed_vs_rk4", "flow/r2_t_closed_form", "flow/k_t_closed_form", "flow/casimir_conserved"],
        budget: Some(60.0),
    },
    Criterion {
        name: "retraction",
        ids: &["flow/retraction_limit", "flow/retraction_normal", "flow/retraction_norm"],
        budget: Some(60.0),
    },
    Criterion {
        name: "homotopy identities",
        ids: &["homotopy/finite_time_identity", "homotopy/infinite_time_identity", "homotopy/su2_identity"],
        budget: Some(600.0),
    },
    Criterion {
        name: "desingularization identities",
        ids: &[
            "skeleton/casimir_pullback",
            "skeleton/phi_pullback",
            "skeleton/omega_pullback",
            "skeleton/w_fields_related",
        ],
        budget: Some(30.0),
    },
    Criterion {
        name: "norm-ring exactness",
        ids: &[
            "flat/projections_sum_to_identity",
            "flat/projections_land_and_idempotent",
            "flat/j_swap_exchanges_modules",
            KNOWN_FALSE,
            "flat/y_proportionality",
            "flat/parity_reconstruction",
            "flat/sq_transport_even",
            "flat/odd_lift_kernel",
        ],
        budget: Some(10.0),
    },
    Criterion {
        name: "quantitative-bound sweeps",
        ids: &[
            "flow/eps_ratio_q1",
            "flow/eps_ratio_q2",
            "flow/eps_ratio_q3",
            "exterior/theta_bounds",
            "flat/slb_h_skeleton",
        ],
        budget: None,
    },
];

fn acceptance_config() -> Config {
    let mut c = Config::default();
    c.core.max_degree = 7;
    c.flow.samples = 200;
    c.flow.times = vec![0.5, 1.0, 2.0, 5.0];
    c.flow.retract_samples = 500;
    c.flow.retract_min_f = 0.1;
    c.homotopy.finite_per_form = 20;
    c.homotopy.infinite_per_form = 5;
    c.homotopy.su2_configs = 10;
    c.skeleton.samples = 1000;
    c.exterior.theta_max_order = 4;
    c.flat.slb_dirs = 6;
    c.validate().expect("acceptance configuration is valid");
    c
}

fn describe(r: &CheckRecord) -> String {
    let mut s = format!("{}={}", r.id, r.value);
    if s.len() > 90 {
        s.truncate(87);
        s.push_str("...");
    }
    s
}

fn main() -> ExitCode {
    let cfg = acceptance_config();
    let start = Instant::now();
    let rep = run_suites(&SUITES, &cfg, true);
    let mut hard_fail = false;
    for (i, c) in CRITERIA.iter().enumerate() {
        let recs: Vec<&CheckRecord> = c
            .ids
            .iter()
            .map(|id| {
                rep.records
                    .iter()
                    .find(|r| format!("{}/{}", r.suite, r.id) == *id)
                    .unwrap_or_else(|| panic!("check {id} missing from the report"))
            })
            .collect();
        let secs: f64 = recs.iter().filter_map(|r| r.runtime_ms).sum::<f64>() / 1e3;
        let failing: Vec<&&CheckRecord> = recs.iter().filter(|r| r.status != Status::Pass).collect();
        let over = c.budget.is_some_and(|b| secs > b);
        let pass = failing.is_empty() && !over;
        let known = !pass && !over && failing.iter().all(|r| format!("{}/{}", r.suite, r.id) == KNOWN_FALSE);
        hard_fail |= !pass && !known;
        let mut line = format!("{} criterion {} ({}): {} checks, {secs:.1} s", if pass { "PASS" } else { "FAIL" }, i + 1, c.name, recs.len());
        if let Some(b) = c.budget {
            line.push_str(&format!(" of {b:.0} s"));
        }
        for r in &failing {
            line.push_str(&format!("; failed {}", describe(r)));
            if let Some(n) = &r.note {
                line.push_str(&format!(" ({n})"));
            }
        }
        if known {
            line.push_str("; known false statement, the remaining checks pass");
        }
        println!("{line}");
    }
    println!("acceptance finished in {:.1} s", start.elapsed().as_secs_f64());
    if hard_fail {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
