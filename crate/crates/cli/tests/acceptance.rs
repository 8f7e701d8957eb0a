//! One line per acceptance criterion. `CHIRIKOV_PROFILE=full` switches to the
//! full problem sizes; `CHIRIKOV_CRITERIA=4,7` runs a subset.

use chirikov_cli::config::Profile;
use chirikov_cli::criteria::{run_one, Sizes, TITLES};

const SEED: u64 = 20240601;

fn main() {
    let profile = match std::env::var("CHIRIKOV_PROFILE").as_deref() {
        Ok("full") => Profile::Full,
        _ => Profile::Quick,
    };
    let only: Option<Vec<usize>> = std::env::var("CHIRIKOV_CRITERIA")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let sz = Sizes::of(profile);
    println!("acceptance battery, profile {profile:?}, seed {SEED}");
    let mut failed = vec![];
    for id in 1..=TITLES.len() {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let o = run_one(id, &sz, SEED);
        println!(
            "criterion {:>2} [{}] {} ({:.1} s): {}",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.title,
            o.wall_time_seconds,
            o.detail
        );
        if !o.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
