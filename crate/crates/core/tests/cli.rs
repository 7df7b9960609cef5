use std::fs;
use std::process::{Command, Output};

use tempfile::TempDir;

fn fpmul(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpmul")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Files(TempDir);

impl Files {
    fn new() -> Self {
        Files(tempfile::tempdir().unwrap())
    }
    fn put(&self, name: &str, body: &str) -> String {
        let path = self.0.path().join(name);
        fs::write(&path, body).unwrap();
        path.to_string_lossy().into_owned()
    }
    fn path(&self, name: &str) -> String {
        self.0.path().join(name).to_string_lossy().into_owned()
    }
}

#[test]
fn mul_writes_the_trimmed_product() {
    let f = Files::new();
    let a = f.put("a", "p 3\nn 2\n1 2\n");
    let b = f.put("b", "p 3\nn 2\n2 1\n");
    for strategy in ["auto", "kronecker", "cf-fft"] {
        let out = f.path(&format!("c-{strategy}"));
        let o = fpmul(&["mul", &a, &b, &out, "--strategy", strategy]);
        assert!(o.status.success(), "{o:?}");
        assert_eq!(fs::read_to_string(&out).unwrap(), "p 3\nn 3\n2 2 2\n");
    }
}

#[test]
fn mul_zero_operand_gives_empty_product() {
    let f = Files::new();
    let a = f.put("a", "p 7\nn 3\n0 0 0\n");
    let b = f.put("b", "p 7\nn 2\n3 4\n");
    let out = f.path("c");
    assert!(fpmul(&["mul", &a, &b, &out]).status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), "p 7\nn 0\n\n");
}

#[test]
fn mul_exit_statuses() {
    let f = Files::new();
    let good = f.put("good", "p 3\nn 1\n1\n");
    let other = f.put("other", "p 5\nn 1\n1\n");
    let out = f.path("c");
    let o = fpmul(&["mul", &good, &other, &out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("different primes"));
    for bad in ["p 4\nn 1\n1\n", "p 3\nn 2\n1\n", "p 3\nn 1\n7\n", "garbage"] {
        let b = f.put("bad", bad);
        assert_eq!(fpmul(&["mul", &good, &b, &out]).status.code(), Some(2), "{bad:?}");
    }
    assert_eq!(fpmul(&["mul", &good, &f.path("missing"), &out]).status.code(), Some(1));
}

#[test]
fn explain_reports_parameters() {
    let o = fpmul(&["explain", "--p", "7", "--n", "25", "--strategy", "cf-fft", "--multiple", "1"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("p: 7") && s.contains("λ=4") && s.contains("M=30"), "{s}");
    assert!(s.contains("strategy: cf-fft") && s.contains("κ="), "{s}");
    let o = fpmul(&["explain", "--p", "2", "--n", "100"]);
    assert!(stdout(&o).contains("kronecker-base"));
    assert_eq!(fpmul(&["explain", "--p", "9", "--n", "4"]).status.code(), Some(2));
}

#[test]
fn verify_passes_and_catches_faults() {
    let o = fpmul(&["verify", "--cases", "120", "--max-n", "128"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("total           passed   120  failed     0"));
    let o = fpmul(&["verify", "--cases", "20", "--max-n", "64", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("reproducer: suite=multiply") && err.contains("n=1 "), "{err}");
}

#[test]
fn bench_writes_csv_with_matching_checksums() {
    let f = Files::new();
    let out = f.path("bench.csv");
    let o = fpmul(&["bench", "--p", "3", "--n-range", "2^6..2^8", "--out", &out]);
    assert!(o.status.success(), "{o:?}");
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    assert_eq!(
        rdr.headers().unwrap(),
        vec!["algorithm", "p", "n", "seed", "wall_nanos", "result_checksum"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    for pair in rows.chunks(2) {
        assert_eq!(&pair[0][0], "kronecker");
        assert_eq!(&pair[1][0], "cf-fft");
        assert_eq!(pair[0][2], pair[1][2]);
        assert_eq!(pair[0][5], pair[1][5]);
    }
    let o = fpmul(&["bench", "--n-range", "64..32"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "algorithm,p,n,seed,wall_nanos,result_checksum\n");
}
