use std::path::Path;
use std::process::{Command, Output};

use gmxb_cli::config::GMWB_PRESET;

fn gmxb(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmxb"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn bad_field_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &GMWB_PRESET.replace("sigma = 0.15", "sigma = -0.15"),
    );
    let out = gmxb(&["price", &cfg], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("market.sigma"));
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{GMWB_PRESET}\n[extra]\nfoo = 1\n"));
    let out = gmxb(&["price", &cfg], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn uncertified_extreme_points_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &GMWB_PRESET.replace("mode = \"dense\"", "mode = \"extreme-points\""),
    );
    let out = gmxb(&["price", &cfg], &dir.path().join("o"));
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn price_writes_header_and_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let out = gmxb(&["price", "gmwb-table2"], &o);
    assert!(out.status.success());
    let text = std::fs::read_to_string(o.join("price.txt")).unwrap();
    for key in [
        "# gmxb",
        "# command",
        "# config_sha256",
        "# grid",
        "# mode",
        "value_at_origin",
    ] {
        assert!(text.contains(key), "missing {key}");
    }
    let v: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("value_at_origin:"))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(v > 90.0 && v < 110.0, "{v}");
}

#[test]
fn slice_and_control_maps_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let out = gmxb(
        &["slice", "gmwb-table2", "--x1", "100", "--anniversary", "6"],
        &o,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = gmxb(&["control-maps", "gmwb-table2"], &o);
    assert!(out.status.success());
    let names: Vec<String> = std::fs::read_dir(&o)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().any(|n| n.starts_with("slice_x1_")));
    assert_eq!(
        names
            .iter()
            .filter(|n| n.starts_with("control_map_n"))
            .count(),
        10
    );
}
