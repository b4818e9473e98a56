mod common;

#[test]
fn detector_agrees_with_geometric_checker() {
    println!(
        "{}",
        common::checks::detector_vs_geometry(1000, 11).unwrap()
    );
}
