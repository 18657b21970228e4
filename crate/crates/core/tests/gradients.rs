use daqff::checks::{check, gradient_suite, CheckKind, TOLERANCE};

#[test]
fn every_layer_kind_over_twenty_random_instances() {
    let entries = gradient_suite(20).unwrap();
    let failures: Vec<String> = entries
        .iter()
        .filter(|e| !e.report.passed())
        .map(|e| format!("{} seed {}: {:?}", e.kind.name(), e.seed, e.report.worst()))
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn full_daqff_graph_is_sound() {
    let e = check(CheckKind::Daqff, 7).unwrap();
    assert!(e.report.max_error() < TOLERANCE, "{:?}", e.report.worst());
    // every parameter group plus the input is covered
    assert!(e.report.groups.iter().any(|g| g.name == "input"));
    assert!(e.report.groups.iter().any(|g| g.name.starts_with("branch1.conv")));
    assert!(e.report.groups.iter().any(|g| g.name.starts_with("head")));
}
