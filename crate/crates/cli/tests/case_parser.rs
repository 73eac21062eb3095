use std::path::{Path, PathBuf};

use opf_activeset::case::{build_network, load_case, parse_case, serialize_case, CaseError, LoadError};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn case3_text() -> String {
    std::fs::read_to_string(fixture("case3.m")).unwrap()
}

#[test]
fn three_bus_fixture_table_sizes() {
    let raw = parse_case(&case3_text()).unwrap();
    assert_eq!(raw.case_name, "case3");
    assert_eq!(raw.base_mva, 100.0);
    assert_eq!(
        (raw.bus.len(), raw.gen.len(), raw.branch.len(), raw.gencost.len()),
        (3, 2, 3, 2)
    );
    assert!(raw.branch[0][5].is_infinite());
}

#[test]
fn three_bus_fixture_per_unit_network() {
    let net = build_network(&parse_case(&case3_text()).unwrap()).unwrap();
    assert_eq!(net.slack_bus, 0);
    assert_eq!(net.buses[1].demand, 1.0);
    assert_eq!(net.buses[2].demand, 1.5);
    assert!(!net.buses[0].is_load);
    assert_eq!(net.generators[0].p_max, 2.0);
    assert_eq!(net.generators[1].p_min, 0.1);
    // linear coefficient in $/MWh times the MVA base
    assert_eq!(net.generators[0].cost, 1000.0);
    assert_eq!(net.generators[1].cost, 2000.0);
    assert!(!net.branches[0].is_rated());
    assert_eq!(net.branches[1].f_max, 1.2);
    assert!((net.branches[2].susceptance - 10.0).abs() < 1e-12);
}

#[test]
fn missing_gencost_table() {
    let text: String = case3_text()
        .lines()
        .take_while(|l| !l.starts_with("mpc.gencost"))
        .collect::<Vec<_>>()
        .join("\n");
    assert_eq!(
        parse_case(&text).unwrap_err(),
        CaseError::MissingTable("gencost".into())
    );
}

#[test]
fn zero_reactance_is_rejected() {
    let text = case3_text().replace("2\t3\t0\t0.1\t0\t80", "2\t3\t0\t0\t0\t80");
    let raw = parse_case(&text).unwrap();
    assert_eq!(
        build_network(&raw).unwrap_err(),
        CaseError::NonpositiveReactance { branch: 2 }
    );
}

#[test]
fn out_of_service_branch_can_disconnect() {
    // cutting both lines into bus 3 strands it
    let text = case3_text()
        .replace("120\t0\t0\t0\t0\t1", "120\t0\t0\t0\t0\t0")
        .replace("80\t0\t0\t0\t0\t1", "80\t0\t0\t0\t0\t0");
    let raw = parse_case(&text).unwrap();
    assert_eq!(
        build_network(&raw).unwrap_err(),
        CaseError::DisconnectedNetwork { bus: 3 }
    );
}

#[test]
fn non_numeric_token_reports_position() {
    let text = case3_text().replace("1\t3\t0\t0\t0\t0\t1", "1\t3\tabc\t0\t0\t0\t1");
    match parse_case(&text).unwrap_err() {
        CaseError::NonNumericToken { token, .. } => assert_eq!(token, "abc"),
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn parse_serialize_parse_round_trip() {
    for text in [
        case3_text(),
        std::fs::read_to_string(data("case24_ieee_rts.m")).unwrap(),
        std::fs::read_to_string(data("case57.m")).unwrap(),
    ] {
        let raw = parse_case(&text).unwrap();
        let again = parse_case(&serialize_case(&raw)).unwrap();
        assert_eq!(raw, again);
    }
}

#[test]
fn bundled_cases_build() {
    let (_, net24) = load_case(&data("case24_ieee_rts.m")).unwrap();
    assert_eq!((net24.n_bus(), net24.n_gen(), net24.n_branch()), (24, 33, 38));
    let (_, net57) = load_case(&data("case57.m")).unwrap();
    assert_eq!((net57.n_bus(), net57.n_gen(), net57.n_branch()), (57, 7, 80));
    assert!(opf_activeset_core::network::validate(&net24).is_empty());
    assert!(opf_activeset_core::network::validate(&net57).is_empty());
}

#[test]
fn missing_file_names_the_path() {
    let path = fixture("no_such_case.m");
    let err = load_case(&path).unwrap_err();
    assert!(matches!(err, LoadError::Io { .. }));
    assert!(err.to_string().contains("no_such_case.m"));
}
