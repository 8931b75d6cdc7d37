//! Runs every shipped scenario and reports one line per acceptance criterion.
//! Built without the libtest harness so the lines are always printed.

use std::path::PathBuf;

use phireg::cli::{run_scenario, ScenarioConfig};

const CRITERIA: &[(u32, &str, &[&str])] = &[
    (1, "c01_gd_proximal", &["gd_prox_bound", "gd_prox_optimized"]),
    (2, "c02_hr_example", &["hr_proj_zero", "hr_external_half"]),
    (3, "c03_linear_span", &["linear_span"]),
    (4, "c04_beam_triangle", &["beam_ratio", "beam_exponent"]),
    (5, "c05_tree_sampler", &["tree_bound"]),
    (6, "c06_tree_sampling_law", &["sampling_law"]),
    (7, "c07_regret_decomposition", &["decomposition"]),
    (8, "c08_key_inequality", &["key_inequality"]),
    (9, "c09_hedge_bound", &["hedge_bound"]),
    (10, "c10_motzkin_straus", &["motzkin_straus"]),
    (11, "c11_probes", &["probe_shrink", "probe_small_norm", "probe_int_plus_shrink", "probe_int_plus_small"]),
    (12, "c12_og_bilinear", &["og_prox_bound", "og_variation"]),
    (13, "c13_conv_mix", &["conv_bound"]),
    (14, "c14_phi_int", &["int_regret_bound", "int_certificate"]),
    (15, "c15_md_bregman", &["md_bregman", "md_bregman_pt"]),
    (16, "c16_conformal_identity", &["conformal_identity", "conformal_gap"]),
];

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn main() {
    let mut failures = Vec::new();
    for &(n, id, names) in CRITERIA {
        let path = scenario_dir().join(format!("{id}.json"));
        let outcome = ScenarioConfig::load(&path).and_then(|cfg| run_scenario(&cfg));
        let (ok, detail) = match outcome {
            Ok(out) => {
                let mut ok = true;
                let mut parts = Vec::new();
                for name in names {
                    match out.check(name) {
                        Some(c) => {
                            ok &= c.passed;
                            parts.push(format!("{}: {}", c.name, c.detail));
                        }
                        None => {
                            ok = false;
                            parts.push(format!("{name}: missing"));
                        }
                    }
                }
                (ok, parts.join("; "))
            }
            Err(e) => (false, format!("error: {e}")),
        };
        println!("criterion {n:>2} [{id}]: {} | {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures.push(n);
        }
    }
    if !failures.is_empty() {
        eprintln!("failed criteria: {failures:?}");
        std::process::exit(1);
    }
    println!("all {} criteria passed", CRITERIA.len());
}
