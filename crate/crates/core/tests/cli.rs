use defect_tower::certificate::Certificate;
use defect_tower::cli::{run, EXIT_MISMATCH, EXIT_OK, EXIT_RESOURCES, EXIT_USAGE};

fn tower(args: &[&str]) -> i32 {
    run(std::iter::once("tower").chain(args.iter().copied()))
}

#[test]
fn exit_codes() {
    assert_eq!(tower(&["build", "--p", "4"]), EXIT_USAGE);
    assert_eq!(tower(&["build", "--bogus"]), EXIT_USAGE);
    assert_eq!(tower(&["step-verify", "--ratio", "2", "--m", "3", "--q", "5", "--flavor", "a"]), EXIT_OK);
    assert_eq!(tower(&["step-verify", "--ratio", "1", "--m", "2", "--q", "3", "--flavor", "a"]), EXIT_OK);
    assert_eq!(tower(&["step-verify", "--ratio", "1", "--m", "2", "--q", "4", "--flavor", "a"]), EXIT_USAGE);
    assert_eq!(tower(&["sweep", "--certificate", "/nonexistent/cert.json"]), EXIT_USAGE);
    assert_eq!(tower(&["build", "--steps", "1", "--prec", "8"]), EXIT_RESOURCES);
    assert_ne!(EXIT_MISMATCH, EXIT_OK);
}

#[test]
fn zero_steps_gives_inconclusive_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    let code = tower(&["build", "--steps", "0", "--out-format", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let cert = Certificate::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(cert.verdicts.iter().all(|v| !v.independent));
    assert!(cert.claim.starts_with("inconclusive"));
    assert_eq!(cert.levels.len(), 1);
}

#[test]
fn json_round_trip_and_sweep_from_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    assert_eq!(tower(&["build", "--steps", "1", "--out-format", "json", "--out", out.to_str().unwrap()]), EXIT_OK);
    let raw = std::fs::read_to_string(&out).unwrap();
    let cert = Certificate::from_json(&raw).unwrap();
    assert_eq!(cert.to_json() + "\n", raw);
    assert_eq!(tower(&["sweep", "--certificate", out.to_str().unwrap(), "--to", "1", "--control"]), EXIT_OK);
    assert_eq!(tower(&["sweep", "--certificate", out.to_str().unwrap(), "--to", "5"]), EXIT_USAGE);
}
