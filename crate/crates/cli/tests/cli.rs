use std::path::Path;
use std::process::{Command, Output};

use s2dl::ers::{balancing_alpha, build_lattice, grow_forest, Connectivity, GreedyStrategy};
use s2dl::hsi::{pca_project, save_cube, CubeFormat, HsiCube};
use s2dl::raster::parse_labels_csv;

fn s2dl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_s2dl"))
        .args(args)
        .output()
        .expect("spawn s2dl")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

/// Two-patch noise-free scene written by `synth`.
fn two_patch(dir: &Path) -> (String, String) {
    let (cube, labels) = (path(dir, "a.bsq"), path(dir, "a.csv"));
    let o = s2dl(&["synth", "--cube", &cube, "--labels", &labels]);
    assert!(o.status.success(), "{}", stderr(&o));
    (cube, labels)
}

const SEPARABLE: &[&str] = &[
    "--superpixels", "100", "--k", "3", "--kn", "20", "--radius", "10", "--clusters", "2", "--t", "auto",
];

#[test]
fn cluster_on_two_patches_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (cube, labels) = two_patch(dir.path());
    let out = path(dir.path(), "run");
    let mut args = vec!["cluster", "--cube", &cube, "--labels", &labels, "--out", &out];
    args.extend_from_slice(SEPARABLE);
    let o = s2dl(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("OA 1.0000"), "{}", stdout(&o));
}

#[test]
fn segment_quadrants_matches_naive_greedy() {
    let dir = tempfile::tempdir().unwrap();
    let (h, w) = (8, 8);
    let spectra = [[0.1, 0.9, 0.2, 0.4], [0.8, 0.1, 0.5, 0.3], [0.3, 0.3, 0.9, 0.7], [0.6, 0.5, 0.1, 0.9]];
    let mut values = vec![0.0; h * w * 4];
    for r in 0..h {
        for c in 0..w {
            let q = 2 * (r / 4) + c / 4;
            for b in 0..4 {
                values[(r * w + c) * 4 + b] = spectra[q][b];
            }
        }
    }
    let cube = HsiCube::new(h, w, 4, values).unwrap();
    let cube_path = dir.path().join("q.bsq");
    save_cube(&cube, &cube_path, CubeFormat::RawBsq).unwrap();
    let out = path(dir.path(), "seg");
    let o = s2dl(&["segment", "--cube", cube_path.to_str().unwrap(), "--superpixels", "4", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "4 superpixels");

    let text = std::fs::read_to_string(dir.path().join("seg/superpixels.csv")).unwrap();
    let grid = parse_labels_csv(&text).unwrap();

    let features = pca_project(&cube, 3).unwrap().rescaled_to_byte_range();
    let g = build_lattice(&features, 5.0, Connectivity::Eight).unwrap();
    let mut naive = grow_forest(&g, 4, balancing_alpha(&g, 4), GreedyStrategy::Naive).unwrap();
    let expected = naive.to_map(&g);
    assert_eq!(grid.labels, expected.assignment());
    assert_eq!(expected.n_superpixels(), 4);
    assert!(expected.is_eight_connected());
    // one superpixel per quadrant
    for r in 0..h {
        for c in 0..w {
            let q = (2 * (r / 4) + c / 4) as usize;
            let corner = [0, 4, 32, 36][q];
            assert_eq!(grid.labels[r * w + c], grid.labels[corner]);
        }
    }
}

#[test]
fn zero_radius_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (cube, labels) = two_patch(dir.path());
    let o = s2dl(&["cluster", "--cube", &cube, "--labels", &labels, "--radius", "0", "--clusters", "2", "--t", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(err.contains("radius"), "{err}");
}

#[test]
fn exit_codes() {
    let o = s2dl(&["cluster", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    let o = s2dl(&["cluster", "--cube", "/nonexistent/x.bsq", "--clusters", "2", "--t", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("x.bsq"));
    // auto t needs labels to choose with
    let dir = tempfile::tempdir().unwrap();
    let (cube, _) = two_patch(dir.path());
    let o = s2dl(&["cluster", "--cube", &cube, "--clusters", "2", "--t", "auto"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn version_names_the_pipeline_revision() {
    let o = s2dl(&["--version"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("s2dl 0.1.0"));
}

#[test]
fn artifacts_embed_config_and_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (cube, labels) = two_patch(dir.path());
    let run = |name: &str| {
        let out = path(dir.path(), name);
        let mut args = vec!["cluster", "--cube", &cube, "--labels", &labels, "--out", &out];
        args.extend_from_slice(SEPARABLE);
        let o = s2dl(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        dir.path().join(name)
    };
    let (a, b) = (run("a"), run("b"));
    for file in ["labels.csv", "labels.pgm", "labels.ppm", "metadata.txt", "metrics.txt"] {
        let x = std::fs::read(a.join(file)).unwrap();
        assert_eq!(x, std::fs::read(b.join(file)).unwrap(), "{file} differs");
        let text = String::from_utf8_lossy(&x);
        for key in ["superpixels = 100", "k = 3", "kn = 20", "radius = 10", "clusters = 2"] {
            assert!(text.contains(key), "{file} lacks {key}");
        }
    }
}

#[test]
fn config_file_yields_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (cube, labels) = two_patch(dir.path());
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "superpixels = 100\nk = 3\nkn = 20\nradius = 4\nclusters = 2\nt = auto\n").unwrap();
    let out = path(dir.path(), "run");
    let o = s2dl(&[
        "cluster", "--config", conf.to_str().unwrap(), "--cube", &cube, "--labels", &labels, "--radius", "10",
        "--out", &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let meta = std::fs::read_to_string(dir.path().join("run/metadata.txt")).unwrap();
    assert!(meta.contains("radius = 10"));
    assert!(meta.contains("kn = 20"));
}

#[test]
fn eval_render_and_baselines() {
    let dir = tempfile::tempdir().unwrap();
    let (cube, labels) = two_patch(dir.path());
    let km = path(dir.path(), "km");
    let o = s2dl(&["cluster", "--method", "kmeans", "--cube", &cube, "--labels", &labels, "--clusters", "2", "--out", &km]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pred = path(dir.path(), "km/labels.csv");
    let o = s2dl(&["eval", "--labels", &labels, "--pred", &pred]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("1.0000"), "{}", stdout(&o));
    let ppm = path(dir.path(), "km.ppm");
    let o = s2dl(&["render", "--map", &pred, "--out", &ppm]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(std::fs::read(&ppm).unwrap().starts_with(b"P6"));
}

#[test]
fn sweep_writes_table_and_best_block() {
    let dir = tempfile::tempdir().unwrap();
    let (cube, labels) = two_patch(dir.path());
    let grid = dir.path().join("grid.txt");
    std::fs::write(&grid, "superpixels = 100\nk = 3\nkn = 20\nradius = 5, 10\nclusters = 2\nt = auto\n").unwrap();
    let out = path(dir.path(), "sw");
    let cache = path(dir.path(), "cache.json");
    let args = [
        "sweep", "--preset", "single", "--grid", grid.to_str().unwrap(), "--cube", &cube, "--labels", &labels,
        "--cache", &cache, "--out", &out,
    ];
    let o = s2dl(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();
    assert!(csv.lines().find(|l| !l.starts_with('#')).unwrap().starts_with("superpixels,k,kn,sigma0,radius"));
    assert!(csv.contains("# radius = 10"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 3);
    let best = std::fs::read_to_string(dir.path().join("sw/best.txt")).unwrap();
    assert!(best.contains("OA"));
    // second run is served from the cache
    let o = s2dl(&args);
    assert!(o.status.success(), "{}", stderr(&o));
}
