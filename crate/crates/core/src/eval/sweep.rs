use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{evaluate, MetricsReport};
use crate::cluster::{Prepared, S2dlConfig, Sigma0, TimeChoice};
use crate::error::{Error, Result};
use crate::hsi::{GroundTruth, HsiCube};

/// Cartesian grid of pipeline settings. Knobs without an axis come from
/// `base`; the diffusion time follows `base.t` (normally `auto`, i.e. the
/// whole dyadic grid of each graph).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub base: S2dlConfig,
    pub n_superpixels: Vec<usize>,
    pub k_reps: Vec<usize>,
    pub k_n: Vec<usize>,
    pub sigma0: Vec<Sigma0>,
    pub radius: Vec<usize>,
    pub alpha: Vec<Option<f64>>,
}

fn percentiles(ps: &[f64]) -> Vec<Sigma0> {
    ps.iter().map(|&p| Sigma0::Percentile(p)).collect()
}

impl SweepGrid {
    /// The one-point grid at `config`.
    pub fn single(config: S2dlConfig) -> Self {
        Self {
            n_superpixels: vec![config.n_superpixels],
            k_reps: vec![config.k_reps],
            k_n: vec![config.k_n],
            sigma0: vec![config.sigma0],
            radius: vec![config.radius],
            alpha: vec![config.alpha],
            base: config,
        }
    }

    /// Small grid used for the benchmark reproductions:
    /// 2 x 2 x 3 x 3 x 3 = 108 points, each over the full time grid.
    pub fn coarse(base: S2dlConfig) -> Self {
        Self {
            n_superpixels: vec![500, 1000],
            k_reps: vec![3, 5],
            k_n: vec![10, 30, 50],
            sigma0: percentiles(&[30.0, 50.0, 70.0]),
            radius: vec![5, 10, 15],
            alpha: vec![None],
            base,
        }
    }

    /// The full published ranges. The bandwidth axis samples the pooled
    /// neighbor distances at every tenth percentile.
    pub fn full(base: S2dlConfig) -> Self {
        Self {
            n_superpixels: (1..=15).map(|i| 100 * i).collect(),
            k_reps: (1..=6).collect(),
            k_n: vec![10, 20, 30, 40, 50],
            sigma0: percentiles(&[10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0]),
            radius: (1..=30).collect(),
            alpha: vec![None],
            base,
        }
    }

    /// Reads `key = v1, v2, ...` lines on top of [`SweepGrid::single`] of
    /// `base`. Axis keys (`superpixels`, `k`, `kn`, `sigma0`,
    /// `sigma0_percentile`, `radius`, `alpha`) take lists or inclusive
    /// ranges `lo..hi` / `lo..hi:step`; any other config key takes a single
    /// value. `grid = coarse`, `full` or `single` restarts from a preset.
    pub fn from_kv(base: S2dlConfig, text: &str) -> Result<Self> {
        let mut grid = Self::single(base);
        grid.apply_kv(text)?;
        Ok(grid)
    }

    /// Like [`SweepGrid::from_kv`] but on top of this grid: axes named in
    /// `text` are replaced, the others kept.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        let grid = self;
        let mut sigma_set = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: n + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let wrap = |e: Error| parse_err(e.to_string());
            match key {
                "grid" => {
                    let base = grid.base.clone();
                    *grid = match value {
                        "coarse" => Self::coarse(base),
                        "full" => Self::full(base),
                        "single" => Self::single(base),
                        other => return Err(parse_err(format!("unknown preset {other:?}"))),
                    };
                }
                "superpixels" => grid.n_superpixels = int_list(key, value).map_err(wrap)?,
                "k" => grid.k_reps = int_list(key, value).map_err(wrap)?,
                "kn" => grid.k_n = int_list(key, value).map_err(wrap)?,
                "radius" => grid.radius = int_list(key, value).map_err(wrap)?,
                "sigma0" | "sigma0_percentile" => {
                    let vals = float_list(key, value).map_err(wrap)?;
                    let axis: Vec<Sigma0> = vals
                        .into_iter()
                        .map(|v| {
                            if key == "sigma0" {
                                Sigma0::Value(v)
                            } else {
                                Sigma0::Percentile(v)
                            }
                        })
                        .collect();
                    if sigma_set {
                        grid.sigma0.extend(axis);
                    } else {
                        grid.sigma0 = axis;
                    }
                    sigma_set = true;
                }
                "alpha" => {
                    grid.alpha = value
                        .split(',')
                        .map(|v| match v.trim() {
                            "auto" => Ok(None),
                            v => v
                                .parse()
                                .map(Some)
                                .map_err(|_| parse_err(format!("alpha: bad value {v:?}"))),
                        })
                        .collect::<Result<_>>()?;
                }
                _ => grid.base.set(key, value).map_err(wrap)?,
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_superpixels.len()
            * self.k_reps.len()
            * self.k_n.len()
            * self.sigma0.len()
            * self.radius.len()
            * self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every grid point, ordered so that consecutive points share as many
    /// early pipeline stages as possible.
    pub fn points(&self) -> Vec<S2dlConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &n_sp in &self.n_superpixels {
            for &alpha in &self.alpha {
                for &k_n in &self.k_n {
                    for &sigma0 in &self.sigma0 {
                        for &k in &self.k_reps {
                            for &radius in &self.radius {
                                out.push(S2dlConfig {
                                    n_superpixels: n_sp,
                                    alpha,
                                    k_n,
                                    sigma0,
                                    k_reps: k,
                                    radius,
                                    ..self.base.clone()
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

fn int_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in value.split(',') {
        let part = part.trim();
        let bad = || Error::param(format!("{key}: bad list entry {part:?}"));
        if let Some((lo, rest)) = part.split_once("..") {
            let (hi, step) = rest.split_once(':').unwrap_or((rest, "1"));
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi.trim().parse().map_err(|_| bad())?;
            let step: usize = step.trim().parse().map_err(|_| bad())?;
            if step == 0 || hi < lo {
                return Err(bad());
            }
            out.extend((lo..=hi).step_by(step));
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(out)
}

fn float_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::param(format!("{key}: bad list entry {:?}", v.trim())))
        })
        .collect()
}

/// Outcome of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// The grid point as run (`t` as configured, usually `auto`).
    pub config: S2dlConfig,
    /// Time the run settled on.
    pub t: Option<f64>,
    pub metrics: Option<MetricsReport>,
    /// Wall time of this point. Stages shared with earlier points are
    /// not re-run, so this is the incremental cost.
    pub runtime_s: f64,
    pub error: Option<String>,
    pub cached: bool,
}

impl SweepRow {
    /// OA + AA + kappa; failed runs score negative infinity.
    pub fn objective(&self) -> f64 {
        self.metrics
            .as_ref()
            .map_or(f64::NEG_INFINITY, MetricsReport::objective)
    }

    /// The grid point with its chosen time filled in.
    pub fn tuned_config(&self) -> S2dlConfig {
        let mut c = self.config.clone();
        if let Some(t) = self.t {
            c.t = TimeChoice::Value(t);
        }
        c
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CachedResult {
    t: Option<f64>,
    oa: Option<f64>,
    aa: Option<f64>,
    kappa: Option<f64>,
    producers: Vec<Option<f64>>,
    runtime_s: f64,
    error: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CacheFile {
    entries: BTreeMap<String, CachedResult>,
}

/// On-disk results keyed by the hash of (data fingerprint, config).
struct Cache {
    path: PathBuf,
    file: CacheFile,
}

impl Cache {
    fn open(path: &Path) -> Result<Self> {
        let file = match fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| {
                Error::param(format!("cache {} is not valid: {e}", path.display()))
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => CacheFile::default(),
            Err(e) => return Err(Error::io(path, e)),
        };
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    fn store(&mut self, key: String, value: CachedResult) -> Result<()> {
        self.file.entries.insert(key, value);
        let text = serde_json::to_string_pretty(&self.file)
            .map_err(|e| Error::param(format!("cache serialization: {e}")))?;
        let tmp = self.path.with_extension("tmp");
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &self.path).map_err(|e| Error::io(&self.path, e))
    }
}

fn data_fingerprint(cube: &HsiCube, gt: &GroundTruth) -> String {
    let mut h = Sha256::new();
    for d in [cube.height(), cube.width(), cube.bands()] {
        h.update((d as u64).to_le_bytes());
    }
    for v in cube.values() {
        h.update(v.to_bits().to_le_bytes());
    }
    for l in gt.labels() {
        h.update(l.to_le_bytes());
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Stable hash of a configuration on a given data set.
pub fn config_key(fingerprint: &str, config: &S2dlConfig) -> String {
    let mut h = Sha256::new();
    h.update(fingerprint.as_bytes());
    h.update(b"\n");
    h.update(config.to_kv().as_bytes());
    hex(&h.finalize())
}

/// Every row of a sweep plus the winner.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Index of the best row (ties: first in grid order); `None` if every
    /// run failed.
    pub best: Option<usize>,
}

impl SweepReport {
    pub fn best_row(&self) -> Option<&SweepRow> {
        self.best.map(|i| &self.rows[i])
    }

    /// One line per grid point.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "superpixels,k,kn,sigma0,radius,alpha,clusters,lbb,t,oa,aa,kappa,objective,runtime_s,status\n",
        );
        for r in &self.rows {
            let c = &r.config;
            let sigma = match c.sigma0 {
                Sigma0::Value(v) => format!("{v}"),
                Sigma0::Percentile(p) => format!("p{p}"),
            };
            let alpha = c.alpha.map_or("auto".to_string(), |a| a.to_string());
            let t = r.t.map_or(String::new(), |t| t.to_string());
            let (oa, aa, kappa, obj) = match &r.metrics {
                Some(m) => (
                    format!("{:.6}", m.oa),
                    format!("{:.6}", m.aa),
                    format!("{:.6}", m.kappa),
                    format!("{:.6}", m.objective()),
                ),
                None => (String::new(), String::new(), String::new(), "-inf".to_string()),
            };
            let status = match &r.error {
                Some(e) => format!("\"error: {}\"", e.replace('"', "'")),
                None => "ok".to_string(),
            };
            let _ = writeln!(
                s,
                "{},{},{},{sigma},{},{alpha},{},{},{t},{oa},{aa},{kappa},{obj},{:.3},{status}",
                c.n_superpixels, c.k_reps, c.k_n, c.radius, c.clusters, c.use_lbb, r.runtime_s
            );
        }
        s
    }

    /// The winning configuration followed by a one-line score row.
    pub fn best_block(&self, name: &str) -> String {
        let Some(row) = self.best_row() else {
            return format!("# no successful run among {} configurations\n", self.rows.len());
        };
        let m = row.metrics.as_ref().expect("best row has metrics");
        let mut s = format!(
            "# best of {} configurations by OA + AA + kappa\n",
            self.rows.len()
        );
        s.push_str(&row.tuned_config().to_kv());
        let _ = writeln!(s, "\n{:<12}{:>8}{:>8}{:>8}{:>10}", "", "OA", "AA", "kappa", "RT");
        let _ = writeln!(
            s,
            "{name:<12}{:>8.3}{:>8.3}{:>8.3}{:>10.2}",
            m.oa, m.aa, m.kappa, row.runtime_s
        );
        s
    }
}

/// Runs every grid point against `gt` and keeps the best by OA + AA +
/// kappa. Failed points are logged and scored negative infinity. With a
/// `cache` path, finished points are stored after each run and reused on
/// the next call, so an interrupted sweep resumes where it stopped.
pub fn sweep(
    cube: &HsiCube,
    gt: &GroundTruth,
    grid: &SweepGrid,
    cache: Option<&Path>,
) -> Result<SweepReport> {
    if grid.is_empty() {
        return Err(Error::param("sweep grid is empty"));
    }
    gt.check_matches(cube)?;
    let fingerprint = data_fingerprint(cube, gt);
    let mut cache = cache.map(Cache::open).transpose()?;
    let mut prepared = Prepared::new(cube);
    let points = grid.points();
    let mut rows = Vec::with_capacity(points.len());

    for (i, config) in points.into_iter().enumerate() {
        let key = config_key(&fingerprint, &config);
        if let Some(hit) = cache.as_ref().and_then(|c| c.file.entries.get(&key)) {
            rows.push(row_from_cache(config, hit));
            continue;
        }
        let start = Instant::now();
        let outcome = prepared
            .run(&config, Some(gt))
            .and_then(|map| Ok((map.t, evaluate(&map.labels, gt, 0.0)?.0)));
        let runtime_s = start.elapsed().as_secs_f64();
        let row = match outcome {
            Ok((t, mut m)) => {
                m.runtime_s = runtime_s;
                log::info!(
                    "sweep {}/{}: OA {:.4} AA {:.4} kappa {:.4} (t = {t})",
                    i + 1,
                    grid.len(),
                    m.oa,
                    m.aa,
                    m.kappa
                );
                SweepRow {
                    config,
                    t: Some(t),
                    metrics: Some(m),
                    runtime_s,
                    error: None,
                    cached: false,
                }
            }
            Err(e) => {
                log::warn!("sweep {}/{} failed: {e}", i + 1, grid.len());
                SweepRow {
                    config,
                    t: None,
                    metrics: None,
                    runtime_s,
                    error: Some(e.to_string()),
                    cached: false,
                }
            }
        };
        if let Some(c) = cache.as_mut() {
            c.store(key, to_cache(&row))?;
        }
        rows.push(row);
    }

    let mut best: Option<usize> = None;
    for (i, r) in rows.iter().enumerate() {
        if r.metrics.is_some() && best.is_none_or(|b| r.objective() > rows[b].objective()) {
            best = Some(i);
        }
    }
    Ok(SweepReport { rows, best })
}

fn to_cache(row: &SweepRow) -> CachedResult {
    let m = row.metrics.as_ref();
    CachedResult {
        t: row.t,
        oa: m.map(|m| m.oa),
        aa: m.map(|m| m.aa),
        kappa: m.map(|m| m.kappa),
        producers: m.map(|m| m.producers.clone()).unwrap_or_default(),
        runtime_s: row.runtime_s,
        error: row.error.clone(),
    }
}

fn row_from_cache(config: S2dlConfig, hit: &CachedResult) -> SweepRow {
    let metrics = match (hit.oa, hit.aa, hit.kappa) {
        (Some(oa), Some(aa), Some(kappa)) => Some(MetricsReport {
            oa,
            aa,
            kappa,
            producers: hit.producers.clone(),
            runtime_s: hit.runtime_s,
        }),
        _ => None,
    };
    SweepRow {
        config,
        t: hit.t,
        metrics,
        runtime_s: hit.runtime_s,
        error: hit.error.clone(),
        cached: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hsi::{synth_cube, SceneSpec};

    fn base() -> S2dlConfig {
        S2dlConfig {
            n_superpixels: 100,
            k_reps: 3,
            k_n: 20,
            radius: 10,
            clusters: 2,
            ..S2dlConfig::default()
        }
    }

    fn halves() -> (HsiCube, GroundTruth) {
        let scene = SceneSpec::halves(20, 20, vec![0.1, 0.8, 0.3, 0.5], vec![0.7, 0.2, 0.9, 0.4]);
        synth_cube(&scene, 1, 0.0).unwrap()
    }

    #[test]
    fn coarse_grid_size() {
        assert_eq!(SweepGrid::coarse(base()).len(), 108);
        assert_eq!(SweepGrid::coarse(base()).points().len(), 108);
        assert_eq!(SweepGrid::single(base()).points(), vec![base()]);
    }

    #[test]
    fn grid_text() {
        let g = SweepGrid::from_kv(base(), "radius = 1..7:3, 20\nsigma0_percentile = 30,70\nclusters = 3\n")
            .unwrap();
        assert_eq!(g.radius, vec![1, 4, 7, 20]);
        assert_eq!(g.sigma0, percentiles(&[30.0, 70.0]));
        assert_eq!(g.base.clusters, 3);
        assert_eq!(g.len(), 8);
        assert!(SweepGrid::from_kv(base(), "radius = 5..1").is_err());
    }

    #[test]
    fn singleton_grid_reports_its_config() {
        let (cube, gt) = halves();
        let report = sweep(&cube, &gt, &SweepGrid::single(base()), None).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.best, Some(0));
        assert_eq!(report.rows[0].config, base());
        assert!(report.rows[0].t.is_some());
    }

    #[test]
    fn failures_score_negative_infinity() {
        let (cube, gt) = halves();
        let mut grid = SweepGrid::single(base());
        grid.n_superpixels = vec![10_000, 100];
        let report = sweep(&cube, &gt, &grid, None).unwrap();
        assert_eq!(report.rows[0].objective(), f64::NEG_INFINITY);
        assert!(report.rows[0].error.is_some());
        assert_eq!(report.best, Some(1));
        assert!(report.to_csv().contains("-inf"));
    }

    #[test]
    fn cache_round_trip() {
        let (cube, gt) = halves();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        let mut grid = SweepGrid::single(base());
        grid.radius = vec![5, 10];
        let first = sweep(&cube, &gt, &grid, Some(&path)).unwrap();
        let second = sweep(&cube, &gt, &grid, Some(&path)).unwrap();
        assert!(second.rows.iter().all(|r| r.cached));
        for (a, b) in first.rows.iter().zip(&second.rows) {
            assert_eq!(a.objective(), b.objective());
            assert_eq!(a.t, b.t);
        }
        assert_eq!(first.best, second.best);
    }
}
