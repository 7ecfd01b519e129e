use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use shforge_core::dataset_io::{read_clip_document, read_frame, read_manifest};

fn shforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shforge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = shforge(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: [&str; 9] = [
    "--toy",
    "--width",
    "48",
    "--height",
    "36",
    "--toy-frames",
    "6",
    "--max-clips",
    "3",
];

fn generate(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["generate", "--out", p(out)];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(extra);
    shforge(&args)
}

fn digest(root: &Path) -> Vec<u8> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, out)
            } else {
                out.push(p)
            }
        }
    }
    let mut files = Vec::new();
    walk(root, &mut files);
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.strip_prefix(root).unwrap().to_string_lossy().as_bytes());
        h.update(fs::read(&f).unwrap());
    }
    h.finalize().to_vec()
}

#[test]
fn generation_is_seeded_and_worker_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c, d) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
        tmp.path().join("d"),
    );
    assert!(generate(&a, &["--seed", "7"]).status.success());
    assert!(generate(&b, &["--seed", "7"]).status.success());
    assert!(generate(&c, &["--seed", "7", "--workers", "8"])
        .status
        .success());
    assert!(generate(&d, &["--seed", "8"]).status.success());
    assert_eq!(digest(&a), digest(&b));
    assert_eq!(digest(&a), digest(&c));
    assert_ne!(digest(&a), digest(&d));
}

#[test]
fn max_clothing_one_shares_texture() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    ok(&[
        "generate",
        "--toy",
        "--out",
        p(&out),
        "--width",
        "16",
        "--height",
        "12",
        "--toy-subjects",
        "20",
        "--toy-frames",
        "2",
        "--max-clothing",
        "1",
        "--max-clips",
        "100",
    ]);
    let m = read_manifest(&out).unwrap();
    assert_eq!(m.clips.len(), 100);
    let ids: std::collections::BTreeSet<usize> =
        m.clips.iter().map(|c| c.scene.texture_id).collect();
    assert_eq!(ids.len(), 1);
}

#[test]
fn existing_output_needs_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    assert!(generate(&out, &[]).status.success());
    let again = generate(&out, &[]);
    assert_eq!(again.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&again.stderr).contains("already exists"));
    let before = digest(&out);
    assert!(generate(&out, &["--overwrite"]).status.success());
    assert_eq!(digest(&out), before);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    assert_eq!(
        shforge(&["generate", "--out", p(&out)]).status.code(),
        Some(1)
    );
    assert_eq!(generate(&out, &["--overlap", "0.4"]).status.code(), Some(1));
    let missing = tmp.path().join("no-such-dir");
    assert_eq!(
        generate(&out, &["--textures", p(&missing)]).status.code(),
        Some(1)
    );
    let blocker = tmp.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    assert_eq!(generate(&blocker, &[]).status.code(), Some(2));
    assert_eq!(shforge(&["nonsense"]).status.code(), Some(1));
    assert_eq!(shforge(&["--help"]).status.code(), Some(0));
}

#[test]
fn stats_on_empty_dataset_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let text = ok(&["stats", "--data", p(tmp.path())]);
    let header: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["#subjects", "#sequences", "#clips", "#frames"]);
    let total: Vec<&str> = text.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(total, ["Total", "0", "0", "0", "0"]);
}

#[test]
fn split_then_stats_adds_up() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    ok(&[
        "generate",
        "--toy",
        "--out",
        p(&out),
        "--width",
        "16",
        "--height",
        "12",
        "--toy-frames",
        "3",
    ]);
    let text = ok(&[
        "split",
        "--data",
        p(&out),
        "--test-fraction",
        "0.2",
        "--seed",
        "3",
    ]);
    assert!(text.contains("test frame fraction"));
    let json: serde_json::Value =
        serde_json::from_str(&ok(&["stats", "--data", p(&out), "--json"])).unwrap();
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for key in ["subjects", "sequences", "clips", "frames"] {
        let v = |i: usize| rows[i][key].as_u64().unwrap();
        assert_eq!(v(0) + v(1), v(2), "{key}");
    }
    assert_eq!(rows[2]["subjects"], 5);
}

#[test]
fn eval_against_itself_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    assert!(generate(&out, &[]).status.success());
    let json: serde_json::Value = serde_json::from_str(&ok(&[
        "eval",
        "--pred",
        p(&out),
        "--gt",
        p(&out),
        "--frames",
        "all",
        "--json",
    ]))
    .unwrap();
    assert_eq!(json["frames"], 18);
    assert_eq!(json["mean_iou"], 1.0);
    assert_eq!(json["pixel_accuracy"], 1.0);
    assert_eq!(json["rmse_mm"], 0.0);
    let table = ok(&["eval", "--pred", p(&out), "--gt", p(&out)]);
    assert!(table.contains("mean IOU") && table.contains("100.00%"));
}

#[test]
fn eval_without_predictions_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    assert!(generate(&out, &[]).status.success());
    let empty = tmp.path().join("pred");
    fs::create_dir(&empty).unwrap();
    let r = shforge(&["eval", "--pred", p(&empty), "--gt", p(&out)]);
    assert_eq!(r.status.code(), Some(1));
}

fn first_clip(root: &Path) -> PathBuf {
    let m = read_manifest(root).unwrap();
    m.clip_dir(root, &m.clips[0])
}

#[test]
fn preview_panel_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    assert!(generate(&out, &[]).status.success());
    let clip = first_clip(&out);
    let png = tmp.path().join("p.png");
    ok(&[
        "preview",
        "--clip",
        p(&clip),
        "--frame",
        "2",
        "--out",
        p(&png),
    ]);
    let img = image::open(&png).unwrap();
    assert_eq!((img.width(), img.height()), (4 * 48, 36));

    let bad = shforge(&[
        "preview",
        "--clip",
        p(&clip),
        "--frame",
        "99",
        "--out",
        p(&png),
    ]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("frame 99"));
}

#[test]
fn background_only_preview_is_uniform() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    assert!(generate(&out, &[]).status.success());
    let clip = first_clip(&out);
    let doc = read_clip_document(&clip).unwrap();
    let mut f = read_frame(&clip, &doc, 0).unwrap();
    f.segm.data_mut().fill(0);
    f.depth_labels.data_mut().fill(0);
    f.flow.data_mut().fill(0.0);
    let panel = shforge_cli::preview_panel(&f, 19);
    let (w, h) = (f.width(), f.height());
    for k in 1..4 {
        let first = *panel.get_pixel(k * w, 0);
        for y in 0..h {
            for x in 0..w {
                assert_eq!(*panel.get_pixel(k * w + x, y), first);
            }
        }
    }
    assert_eq!(
        *panel.get_pixel(w, 0),
        image::Rgb(shforge_cli::SEGM_PALETTE[0])
    );
    assert_eq!(*panel.get_pixel(3, 3), *f.rgb.get_pixel(3, 3));
}
