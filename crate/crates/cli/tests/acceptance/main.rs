//! Acceptance criteria. Prints one PASS/FAIL line per criterion.

mod corpus;
mod end_to_end;
mod kernels;
mod ranking;
mod scoring;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

type Check = fn() -> Result<String, String>;

const CRITERIA: &[(u32, &str, Check, Option<u64>)] = &[
    (1, "edit distance kernel", kernels::distance_kernel, Some(10)),
    (2, "candidate search equals brute force", kernels::candidate_search_equivalence, Some(60)),
    (3, "relaxed n-gram lookups", kernels::relaxed_index, Some(30)),
    (4, "feature scorer formulas", scoring::scorer_formulas, None),
    (5, "boosted regressor sanity", ranking::boosting_sanity, Some(30)),
    (6, "class imbalance weighting", ranking::imbalance_weighting, None),
    (7, "synthetic end-to-end pipeline", end_to_end::synthetic_pipeline, Some(300)),
    (8, "metric identities", end_to_end::metric_identities, None),
    (9, "CLI reproducibility", end_to_end::reproducibility, None),
];

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut passed = 0;
    let mut run = 0;
    for &(id, name, check, limit) in CRITERIA {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == id.to_string()) {
            continue;
        }
        run += 1;
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match (result, limit) {
            (Ok(d), Some(l)) if elapsed > Duration::from_secs(l) => Err(format!("{d}; exceeded {l}s budget")),
            (r, _) => r,
        };
        let (tag, detail) = match result {
            Ok(d) => {
                passed += 1;
                ("PASS", d)
            }
            Err(d) => ("FAIL", d),
        };
        println!("{tag} [{id}] {name} ({:.2}s): {detail}", elapsed.as_secs_f64());
    }
    println!("acceptance: {passed}/{run} criteria passed");
}
