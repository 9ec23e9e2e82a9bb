//! Assign a six-site cohort to folds under each evaluation schedule.
//!
//! ```text
//! cargo run --example fold_schedules
//! ```

use pvs_eval::commands::default_sites;
use pvs_eval::schedules::{assign_folds, Schedule, SubjectKey};

pub fn main() {
    let subjects: Vec<SubjectKey> = default_sites()
        .iter()
        .flat_map(|(site, n)| (1..=*n).map(move |i| SubjectKey::new(site.clone(), format!("{site}-{i:03}"))))
        .collect();

    for schedule in ["5fcv", "loso", "single:ADNI", "single:FTD"] {
        let schedule: Schedule = schedule.parse().expect("valid schedule");
        println!("{schedule}");
        match assign_folds(&subjects, &schedule, 42, true) {
            Ok(plan) => {
                for fold in &plan.folds {
                    let mut sites: Vec<&str> = fold.eval.iter().map(|k| k.dataset_id.as_str()).collect();
                    sites.dedup();
                    println!(
                        "  {:<12} train {:>2} eval {:>2} eval sites {:?}",
                        fold.name,
                        fold.train.len(),
                        fold.eval.len(),
                        sites
                    );
                }
            }
            Err(e) => println!("  rejected: {e}"),
        }
    }
}
