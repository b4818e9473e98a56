mod common;

use std::time::Duration;

use common::checks::cbs_vs_joint_search;
use formation_core::cbs::Branching;

const BUDGET: Duration = Duration::from_secs(60);

#[test]
fn per_conflict_branching_matches_joint_oracle() {
    println!(
        "{}",
        cbs_vs_joint_search(200, 7, Branching::PerConflict, BUDGET).unwrap()
    );
}

#[test]
fn first_pair_branching_matches_joint_oracle() {
    println!(
        "{}",
        cbs_vs_joint_search(200, 7, Branching::FirstPair, BUDGET).unwrap()
    );
}

#[test]
fn cardinal_branching_matches_joint_oracle() {
    println!(
        "{}",
        cbs_vs_joint_search(200, 7, Branching::Cardinal, BUDGET).unwrap()
    );
}
