use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pcqa::ply::{write_ply_file, Encoding};
use pcqa::PointCloud;

fn pcqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcqa"))
        .args(args)
        .output()
        .expect("run pcqa")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Coloured shell of a 24-voxel cube, large enough for every image metric
/// except MS-SSIM.
fn shell(shift: u8) -> PointCloud {
    let n = 24;
    let mut pts = Vec::new();
    let mut cols = Vec::new();
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let on_face = [x, y, z].iter().any(|c| *c == 0 || *c == n - 1);
                if on_face {
                    pts.push([x as f64, y as f64, z as f64]);
                    cols.push([
                        (x * 10) as u8,
                        (y * 10) as u8,
                        ((z * 10) as u8).wrapping_add(shift),
                    ]);
                }
            }
        }
    }
    PointCloud::new(pts).with_colors(cols).unwrap()
}

fn write_cloud(dir: &Path, name: &str, c: &PointCloud) -> PathBuf {
    let p = dir.join(name);
    write_ply_file(&p, c, Encoding::BinaryLittleEndian).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn version_and_help() {
    let v = pcqa(&["--version"]);
    assert!(v.status.success());
    assert_eq!(stdout(&v).trim(), format!("pcqa {}", env!("CARGO_PKG_VERSION")));
    for sub in ["dmos", "benchmark", "projection-metrics", "batch"] {
        assert!(pcqa(&[sub, "--help"]).status.success());
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(pcqa(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(
        pcqa(&["project", "/nonexistent.ply", "--dump-dir", "/tmp/x"])
            .status
            .code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let c = write_cloud(dir.path(), "a.ply", &shell(0));
    let o = pcqa(&["projection-metrics", s(&c), s(&c), "--gamma", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = pcqa(&["projection-metrics", s(&c), s(&c), "--metric", "vmaf"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn identical_clouds_give_unit_ssim() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_cloud(dir.path(), "a.ply", &shell(0));
    let o = pcqa(&[
        "projection-metrics",
        s(&c),
        s(&c),
        "--metric",
        "ssim",
        "--sequence",
        "cube",
        "--gqp",
        "20",
        "--tqp",
        "27",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(
        lines[0],
        "sequence,gQP,tQP,metric,gamma,front,back,left,right,top,bottom,S_final"
    );
    assert_eq!(lines[1], "cube,20,27,ssim,0.19,1,1,1,1,1,1,1");
}

#[test]
fn point_metrics_identity_rows() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_cloud(dir.path(), "a.ply", &shell(0));
    let o = pcqa(&["point-metrics", s(&c), s(&c), "--sequence", "cube"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("cube,0,0,d1_mse,0\n"));
    assert!(out.contains("cube,0,0,d1_psnr,inf\n"));
    assert!(out.contains("cube,0,0,d2_psnr,inf\n"));
    assert!(out.contains("cube,0,0,psnr_yuv,inf\n"));
}

#[test]
fn project_dumps_twelve_files() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_cloud(dir.path(), "a.ply", &shell(0));
    let dump = dir.path().join("views");
    assert!(pcqa(&["project", s(&c), "--dump-dir", s(&dump)]).status.success());
    for v in ["front", "back", "left", "right", "top", "bottom"] {
        assert!(dump.join(format!("{v}.ppm")).is_file());
        assert!(dump.join(format!("{v}_mask.pgm")).is_file());
    }
}

const RATINGS: &str = "subject_id,sample_id,sequence,gqp,tqp,score
s1,A_ref,A,0,0,90
s1,A_20_27,A,20,27,80
s1,A_28_27,A,28,27,60
s1,A_36_27,A,36,27,30
s2,A_ref,A,0,0,100
s2,A_20_27,A,20,27,85
s2,A_28_27,A,28,27,75
s2,A_36_27,A,36,27,38
s3,A_ref,A,0,0,95
s3,A_20_27,A,20,27,93
s3,A_28_27,A,28,27,68
s3,A_36_27,A,36,27,20
";

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Per-subject z over the subject's three differential scores.
fn z3(d: [f64; 3]) -> [f64; 3] {
    let m = (d[0] + d[1] + d[2]) / 3.0;
    let sd = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 2.0).sqrt();
    d.map(|v| (v - m) / sd)
}

#[test]
fn dmos_matches_hand_computation() {
    let dir = tempfile::tempdir().unwrap();
    let ratings = dir.path().join("ratings.csv");
    std::fs::write(&ratings, RATINGS).unwrap();
    let out = dir.path().join("dmos.csv");
    let o = pcqa(&["dmos", s(&ratings), "-o", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let z = [
        z3([10.0, 30.0, 60.0]),
        z3([15.0, 25.0, 62.0]),
        z3([2.0, 27.0, 75.0]),
    ];
    let expect: Vec<f64> = (0..3)
        .map(|j| z.iter().map(|zi| sigmoid(zi[j])).sum::<f64>() / 3.0)
        .collect();
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sample_id,dmos,n_subjects,flags"));
    for (line, (id, e)) in lines.zip(["A_20_27", "A_28_27", "A_36_27"].iter().zip(expect)) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], *id);
        assert!((f[1].parse::<f64>().unwrap() - e).abs() < 1e-12, "{line}");
        assert_eq!(f[2], "3");
        assert_eq!(f[3], "");
    }
}

#[test]
fn benchmark_reports_orphan_ids() {
    let dir = tempfile::tempdir().unwrap();
    let dmos = dir.path().join("dmos.csv");
    std::fs::write(&dmos, "sample_id,dmos,n_subjects,flags\nA_20_27,0.4,3,\n").unwrap();
    let obj = dir.path().join("obj.csv");
    std::fs::write(
        &obj,
        "sequence,gQP,tQP,metric_name,value\nA,20,27,d1_psnr,60\nB,28,37,d1_psnr,55\n",
    )
    .unwrap();
    let o = pcqa(&["benchmark", s(&obj), s(&dmos), "--out-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("B_28_37"));
}

#[test]
fn benchmark_writes_sorted_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut dmos = String::from("sample_id,dmos,n_subjects,flags\n");
    let mut obj = String::from("sequence,gQP,tQP,metric_name,value\n");
    for (k, seq) in ["loot", "Nike180"].iter().enumerate() {
        for (i, g) in [20, 28, 36].iter().enumerate() {
            for (j, t) in [27, 37, 47].iter().enumerate() {
                let q = (i * 3 + j) as f64 + k as f64 * 0.5;
                dmos.push_str(&format!("{seq}_{g}_{t},{},3,\n", 0.2 + 0.05 * q));
                obj.push_str(&format!(
                    "{seq},{g},{t},d1_psnr,{}\n",
                    70.0 - q - 0.1 * (q * 1.3).sin()
                ));
                obj.push_str(&format!("{seq},{g},{t},psnr_y,{}\n", 40.0 - 0.8 * q));
            }
        }
    }
    std::fs::write(dir.path().join("dmos.csv"), dmos).unwrap();
    std::fs::write(dir.path().join("obj.csv"), obj).unwrap();
    let out = dir.path().join("report");
    let run = || {
        pcqa(&[
            "benchmark",
            s(&dir.path().join("obj.csv")),
            s(&dir.path().join("dmos.csv")),
            "--session",
            "object,all,human",
            "--out-dir",
            s(&out),
        ])
    };
    let o = run();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read(out.join("report.csv")).unwrap();
    assert!(run().status.success());
    assert_eq!(first, std::fs::read(out.join("report.csv")).unwrap());
    let text = String::from_utf8(first).unwrap();
    let keys: Vec<String> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(
        keys,
        [
            "all,d1_psnr",
            "all,psnr_y",
            "human,d1_psnr",
            "human,psnr_y",
            "object,d1_psnr",
            "object,psnr_y"
        ]
    );
    let psnr_y: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(
        (psnr_y[2], psnr_y[3], psnr_y[5], psnr_y[8]),
        ("none", "", "-1.0000", "18")
    );
    assert!(out.join("report.json").is_file());
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_cloud(dir.path(), "a.ply", &shell(0));
    let cfg = dir.path().join("job.cfg");
    std::fs::write(&cfg, "gamma = 0.25\nmetric = psnr,gmsd\n").unwrap();
    let o = pcqa(&[
        "--config",
        s(&cfg),
        "projection-metrics",
        s(&c),
        s(&c),
        "--sequence",
        "x",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("x,0,0,psnr,0.25,inf,"));
    assert!(out.contains("x,0,0,gmsd,0.25,0,"));
    let o = pcqa(&[
        "--config",
        s(&cfg),
        "projection-metrics",
        s(&c),
        s(&c),
        "--gamma",
        "0.2",
        "--metric",
        "uqi",
    ]);
    assert!(stdout(&o).lines().nth(1).unwrap().contains(",uqi,0.2,"));
}

#[test]
fn batch_is_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    write_cloud(dir.path(), "ref.ply", &shell(0));
    write_cloud(dir.path(), "d1.ply", &shell(7));
    write_cloud(dir.path(), "d2.ply", &shell(30));
    std::fs::write(
        dir.path().join("manifest.csv"),
        "ref,dist,sequence,gqp,tqp\nref.ply,d2.ply,cube,28,37\nref.ply,d1.ply,cube,20,27\n",
    )
    .unwrap();
    let manifest = dir.path().join("manifest.csv");
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("out{workers}"));
        let o = pcqa(&[
            "--workers",
            workers,
            "batch",
            s(&manifest),
            "--out-dir",
            s(&out),
            "--metric",
            "ssim,psnr",
            "--pooling",
            "mean",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((
            std::fs::read(out.join("point_metrics.csv")).unwrap(),
            std::fs::read(out.join("projection_metrics.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let proj = String::from_utf8(outputs[0].1.clone()).unwrap();
    let rows: Vec<&str> = proj.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("cube,20,27,ssim,0.3333333333333333,"));
    assert!(rows[3].starts_with("cube,28,37,psnr,"));
}

#[test]
fn anova_from_dmos() {
    let dir = tempfile::tempdir().unwrap();
    let mut dmos = String::from("sample_id,dmos,n_subjects,flags\n");
    for (k, seq) in ["a", "b"].iter().enumerate() {
        for g in [20, 28, 36] {
            for t in [27, 37, 47] {
                let v = 0.3 + 0.004 * f64::from(g) + 0.003 * f64::from(t) + 0.01 * k as f64;
                dmos.push_str(&format!("{seq}_{g}_{t},{v},3,\n"));
            }
        }
    }
    let p = dir.path().join("dmos.csv");
    std::fs::write(&p, dmos).unwrap();
    let o = pcqa(&["anova", s(&p)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let sources: Vec<&str> = out.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        sources,
        ["source", "geometry", "texture", "interaction", "error", "total"]
    );
}

#[test]
fn preprocess_and_content() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = shell(0);
    for p in &mut c.positions {
        p[0] += 0.3;
    }
    let input = write_cloud(dir.path(), "in.ply", &c);
    let out = dir.path().join("out.ply");
    let o = pcqa(&["preprocess", s(&input), "-o", s(&out), "--target-box", "46,46,46"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let back = pcqa::ply::read_ply_file(&out).unwrap();
    assert!(back
        .positions
        .iter()
        .all(|p| p.iter().all(|v| v.fract() == 0.0 && *v <= 46.0)));
    let o = pcqa(&["content", s(&out), "--sequence", "cube"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "cube");
    assert!(row[1].parse::<f64>().unwrap() > 0.0);
    assert!(row[2].parse::<f64>().unwrap() > 0.0);
}
