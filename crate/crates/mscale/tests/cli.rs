use std::process::Command;

fn mscale() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mscale"));
    c.env("MSCALE_THREADS", "1");
    c
}

#[test]
fn unknown_config_key_exits_with_error() {
    let dir = std::env::temp_dir().join(format!("mscale-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.ini");
    std::fs::write(&path, "[model]\nkind = barrier\nrate = 0.05\nlower = 1.5\nupper = 2.5\nstrike = 2.0\nbogus = 1\n\n[factors]\nsigma = 0.34\n\n[output]\nt = 0.5\ngrid = 2.0\n").unwrap();
    let out = mscale().args(["price", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 7"), "{err}");
}

#[test]
fn selftest_passes() {
    let out = mscale().arg("selftest").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("all suites passed"));
}
