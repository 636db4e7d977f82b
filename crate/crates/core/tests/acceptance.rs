//! One PASS/FAIL line per acceptance criterion. Run with `--nocapture` to
//! see the table.

mod common;

use std::time::{Duration, Instant};

use common::*;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn judge(name: &'static str, limit: Option<Duration>, f: impl FnOnce() -> Result<String, String>) -> Outcome {
    let started = Instant::now();
    let result = f();
    let elapsed = started.elapsed();
    let (mut pass, mut detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if let Some(limit) = limit {
        if elapsed > limit {
            pass = false;
            detail = format!("{detail}; took {elapsed:?}, limit {limit:?}");
        }
    }
    let detail = format!("{detail} [{} ms]", elapsed.as_millis());
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    Outcome { name, pass, detail }
}

fn failures(bad: Vec<String>, ok: String) -> Result<String, String> {
    if bad.is_empty() {
        Ok(ok)
    } else {
        Err(format!("{} failures, first: {}", bad.len(), bad[0]))
    }
}

#[test]
fn acceptance() {
    let five = Some(Duration::from_secs(5));
    let outcomes = [
        judge("anchor round-trip", five, || {
            failures(
                anchor_round_trip_failures(10_000, 1_000, 29),
                "10000 ids round-trip, 1000 mutations rejected".into(),
            )
        }),
        judge("scanner oracle", five, || {
            let index = scan(&corpus());
            let expected = expected_referents();
            if index.files.len() != 20 || expected.len() < 30 {
                return Err(format!("{} files, {} expected anchors", index.files.len(), expected.len()));
            }
            let mut bad = referent_mismatches(&index, &expected);
            if index.occurrence_count() != expected.len() {
                bad.push(format!("{} occurrences, {} expected", index.occurrence_count(), expected.len()));
            }
            failures(bad, format!("{}/{} referents match", expected.len(), expected.len()))
        }),
        judge("edit inverses", None, || {
            let (checked, bad) = edit_inverse_failures(&corpus());
            failures(bad, format!("{checked} insertion points restored byte for byte"))
        }),
        judge("svg round-trip", None, || {
            failures(svg_round_trip_failures(200, 11), "200 documents".into())
        }),
        judge("link-graph invariants", None, || {
            failures(link_graph_failures(1000, 17), "1000 operations with crash reloads".into())
        }),
        judge("verify oracle", None, || {
            let (pristine, bad) = verify_oracle_failures();
            failures(bad, format!("pristine {pristine} findings; 4 mutations isolated"))
        }),
        judge("end-to-end", None, || {
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
            rt.block_on(end_to_end()).map(|s| format!("navigate delivered {s}"))
        }),
        judge("html export", None, || {
            let (count, bad) = export_failures();
            if count != 3 {
                return Err(format!("{count} sketch links"));
            }
            failures(bad, "3 sketch links at their declarations, all SVGs exist".into())
        }),
    ];
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.pass)
        .map(|o| format!("{}: {}", o.name, o.detail))
        .collect();
    println!("{}/{} criteria passed", outcomes.len() - failed.len(), outcomes.len());
    assert!(failed.is_empty(), "{}", failed.join("\n"));
}
