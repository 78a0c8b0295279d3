use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use super::config::{S2dlConfig, Sigma0, TimeChoice};
use super::modes::{
    dt_scores, label_backbones, majority_vote, propagate_labels, select_modes, ModeDiagnostics,
};
use crate::density::{
    kde, knn_index, select_representatives, sigma0_at_percentile, DensityField, KnnTable,
    RepresentativeSet,
};
use crate::diffusion::{build_spatial_knn, markov_chain, time_grid, MarkovChain, SpatialKnnGraph};
use crate::ers::{balancing_alpha, build_lattice, greedy_segment, Connectivity, LatticeGraph, SuperpixelMap};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::hsi::{pca_project, GroundTruth, HsiCube, PcaProjection};
use crate::raster;

/// A segmentation together with the balance weight that produced it.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub map: SuperpixelMap,
    pub alpha: f64,
}

/// Intermediate results shared by runs that agree on the earlier stages.
pub struct Stages {
    pub superpixels: Arc<Segmentation>,
    pub density: Arc<DensityField>,
    pub reps: Arc<RepresentativeSet>,
    pub graph: Arc<SpatialKnnGraph>,
    pub chain: Arc<MarkovChain>,
}

/// One cube plus memoized pipeline stages.
///
/// Every stage is keyed by exactly the settings it depends on, so sweeping
/// a late-stage knob (radius, diffusion time) reuses the segmentation,
/// neighbor table and density estimate.
pub struct Prepared<'a> {
    cube: &'a HsiCube,
    features: HashMap<usize, Arc<PcaProjection>>,
    lattices: HashMap<(usize, u64), Arc<LatticeGraph>>,
    segmentations: HashMap<(usize, u64, usize, Option<u64>), Arc<Segmentation>>,
    knn: Option<Arc<KnnTable>>,
    densities: HashMap<(usize, u64, bool), Arc<DensityField>>,
    reps: HashMap<String, Arc<RepresentativeSet>>,
    graphs: HashMap<String, Arc<SpatialKnnGraph>>,
    chains: HashMap<String, Arc<MarkovChain>>,
    timings: Vec<(&'static str, f64)>,
}

fn timed<T>(log: &mut Vec<(&'static str, f64)>, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage));
    log.push((stage, start.elapsed().as_secs_f64()));
    out
}

impl<'a> Prepared<'a> {
    pub fn new(cube: &'a HsiCube) -> Self {
        Self {
            cube,
            features: HashMap::new(),
            lattices: HashMap::new(),
            segmentations: HashMap::new(),
            knn: None,
            densities: HashMap::new(),
            reps: HashMap::new(),
            graphs: HashMap::new(),
            chains: HashMap::new(),
            timings: Vec::new(),
        }
    }

    pub fn cube(&self) -> &HsiCube {
        self.cube
    }

    /// PCA scores rescaled jointly to `[0, 255]`: the lattice kernel width
    /// is meant for byte-range intensities, and raw scores of reflectance
    /// cubes would drive every weight to the floor.
    ///
    /// A cube whose covariance has fewer nonzero eigenvalues than requested
    /// (e.g. noise-free synthetic scenes) keeps only the nonzero components.
    pub fn features(&mut self, n_components: usize) -> Result<Arc<PcaProjection>> {
        if let Some(f) = self.features.get(&n_components) {
            return Ok(f.clone());
        }
        let cube = self.cube;
        let f = timed(&mut self.timings, "pca", || {
            let pca = match pca_project(cube, n_components) {
                Err(Error::RankDeficient { found, .. }) => {
                    log::warn!("covariance rank {found} < {n_components}; using {found} components");
                    if found == 0 {
                        let n = cube.n_pixels();
                        PcaProjection::from_scores(cube.height(), cube.width(), 1, vec![0.0; n])?
                    } else {
                        pca_project(cube, found)?
                    }
                }
                other => other?,
            };
            Ok(Arc::new(pca.rescaled_to_byte_range()))
        })?;
        self.features.insert(n_components, f.clone());
        Ok(f)
    }

    fn lattice(&mut self, n_components: usize, sigma: f64) -> Result<Arc<LatticeGraph>> {
        let key = (n_components, sigma.to_bits());
        if let Some(l) = self.lattices.get(&key) {
            return Ok(l.clone());
        }
        let features = self.features(n_components)?;
        let l = timed(&mut self.timings, "lattice", || {
            Ok(Arc::new(build_lattice(&features, sigma, Connectivity::Eight)?))
        })?;
        self.lattices.insert(key, l.clone());
        Ok(l)
    }

    /// Superpixels for the segmentation knobs of `config`.
    pub fn superpixels(&mut self, config: &S2dlConfig) -> Result<Arc<Segmentation>> {
        let key = (
            config.pca_components,
            config.ers_sigma.to_bits(),
            config.n_superpixels,
            config.alpha.map(f64::to_bits),
        );
        if let Some(s) = self.segmentations.get(&key) {
            return Ok(s.clone());
        }
        let lattice = self.lattice(config.pca_components, config.ers_sigma)?;
        let (n_sp, alpha) = (config.n_superpixels, config.alpha);
        let s = timed(&mut self.timings, "superpixels", || {
            let alpha = alpha.unwrap_or_else(|| balancing_alpha(&lattice, n_sp));
            let map = greedy_segment(&lattice, n_sp, alpha)?;
            Ok(Arc::new(Segmentation { map, alpha }))
        })?;
        self.segmentations.insert(key, s.clone());
        Ok(s)
    }

    /// Neighbor table with at least `k` columns (computed once for the
    /// largest `k` requested, truncated on demand).
    pub fn knn(&mut self, k: usize) -> Result<Arc<KnnTable>> {
        if let Some(t) = &self.knn {
            if t.k() == k {
                return Ok(t.clone());
            }
            if t.k() > k {
                return Ok(Arc::new(t.truncated(k)?));
            }
        }
        let cube = self.cube;
        let t = timed(&mut self.timings, "knn", || {
            Ok(Arc::new(knn_index(cube.values(), cube.bands(), k)?))
        })?;
        self.knn = Some(t.clone());
        Ok(t)
    }

    pub fn density(&mut self, k_n: usize, sigma0: Sigma0) -> Result<Arc<DensityField>> {
        let key = match sigma0 {
            Sigma0::Value(s) => (k_n, s.to_bits(), false),
            Sigma0::Percentile(p) => (k_n, p.to_bits(), true),
        };
        if let Some(d) = self.densities.get(&key) {
            return Ok(d.clone());
        }
        let table = self.knn(k_n)?;
        let d = timed(&mut self.timings, "density", || {
            let s = match sigma0 {
                Sigma0::Value(s) => s,
                Sigma0::Percentile(p) => sigma0_at_percentile(&table, p)?,
            };
            Ok(Arc::new(kde(&table, s)?))
        })?;
        self.densities.insert(key, d.clone());
        Ok(d)
    }

    /// Every stage up to the Markov chain.
    pub fn stages(&mut self, config: &S2dlConfig) -> Result<Stages> {
        config.validate()?;
        let superpixels = self.superpixels(config)?;
        let density = self.density(config.k_n, config.sigma0)?;

        let seg_key = format!(
            "{}|{}|{}|{:?}",
            config.pca_components,
            config.ers_sigma.to_bits(),
            config.n_superpixels,
            config.alpha.map(f64::to_bits)
        );
        let rep_key = format!("{seg_key}|{}|{:?}|{}", config.k_n, config.sigma0, config.k_reps);
        let reps = match self.reps.get(&rep_key) {
            Some(r) => r.clone(),
            None => {
                let r = timed(&mut self.timings, "representatives", || {
                    Ok(Arc::new(select_representatives(
                        density.zeta(),
                        &superpixels.map,
                        config.k_reps,
                    )?))
                })?;
                self.reps.insert(rep_key.clone(), r.clone());
                r
            }
        };

        let graph_key = format!("{rep_key}|{}", config.radius);
        let graph = match self.graphs.get(&graph_key) {
            Some(g) => g.clone(),
            None => {
                let cube = self.cube;
                let g = timed(&mut self.timings, "graph", || {
                    Ok(Arc::new(build_spatial_knn(cube, &reps, config.k_n, config.radius)?))
                })?;
                self.graphs.insert(graph_key.clone(), g.clone());
                g
            }
        };

        let l = self.eigenpair_count(config, reps.len());
        let chain_key = format!("{graph_key}|{l}");
        let chain = match self.chains.get(&chain_key) {
            Some(c) => c.clone(),
            None => {
                let c = timed(&mut self.timings, "eigenpairs", || Ok(Arc::new(markov_chain(&graph, l)?)))?;
                self.chains.insert(chain_key, c.clone());
                c
            }
        };
        Ok(Stages {
            superpixels,
            density,
            reps,
            graph,
            chain,
        })
    }

    fn eigenpair_count(&self, config: &S2dlConfig, n_nodes: usize) -> usize {
        config
            .eigenpairs
            .unwrap_or_else(|| (n_nodes - 1).min(10 * config.clusters))
            .clamp(1, n_nodes)
    }

    /// Full run. With `TimeChoice::Auto` every time on the dyadic grid is
    /// tried and the best by OA + AA + kappa against `gt` is kept (ties: the
    /// smaller time).
    pub fn run(&mut self, config: &S2dlConfig, gt: Option<&GroundTruth>) -> Result<ClusterMap> {
        self.timings.clear();
        let stages = self.stages(config)?;
        let times = match config.t {
            TimeChoice::Value(t) => vec![t],
            TimeChoice::Auto => {
                if gt.is_none() {
                    return Err(Error::param(
                        "t = auto needs ground-truth labels to choose a time; pass a numeric t",
                    ));
                }
                time_grid(&stages.chain).map_err(|e| e.in_stage("time grid"))?
            }
        };
        let zeta_s: Vec<f64> = stages
            .reps
            .ids()
            .iter()
            .map(|&p| stages.density.zeta()[p])
            .collect();

        let mut best: Option<(f64, Labelled)> = None;
        let mut t_scores = Vec::new();
        for &t in &times {
            let run = timed(&mut self.timings, "clustering", || {
                label_at(&stages, &zeta_s, t, config)
            })?;
            let score = match gt {
                Some(gt) if times.len() > 1 => evaluate(&run.labels, gt, 0.0)?.0.objective(),
                _ => 0.0,
            };
            t_scores.push((t, score));
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, run));
            }
        }
        let (_, chosen) = best.expect("time list is nonempty");

        let min_pi = stages
            .chain
            .stationary()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let mut derived = vec![
            ("alpha".to_string(), format!("{}", stages.superpixels.alpha)),
            ("sigma0_value".to_string(), format!("{}", stages.density.sigma0())),
            ("representatives".to_string(), stages.reps.len().to_string()),
            ("graph_edges".to_string(), stages.graph.edges().len().to_string()),
            ("bridge_edges".to_string(), stages.graph.bridge_edges().len().to_string()),
            ("eigenpairs_used".to_string(), stages.chain.n_eigenpairs().to_string()),
            ("lambda2_abs".to_string(), format!("{:.12e}", stages.chain.second_magnitude())),
            ("min_pi".to_string(), format!("{min_pi:.12e}")),
            ("self_loops".to_string(), "true".to_string()),
            ("t_chosen".to_string(), format!("{}", chosen.t)),
        ];
        if times.len() > 1 {
            let list: Vec<String> = t_scores.iter().map(|(t, s)| format!("{t}:{s:.6}")).collect();
            derived.push(("t_objectives".to_string(), list.join(" ")));
        }
        let mode_pixels = chosen
            .diagnostics
            .modes
            .iter()
            .map(|&m| stages.reps.ids()[m])
            .collect();
        Ok(ClusterMap {
            height: self.cube.height(),
            width: self.cube.width(),
            labels: chosen.labels,
            rep_ids: stages.reps.ids().to_vec(),
            rep_labels: chosen.rep_labels,
            modes: mode_pixels,
            d_t: chosen.diagnostics.d_t,
            delta: chosen.diagnostics.delta,
            t: chosen.t,
            config: config.clone(),
            derived,
            timings: self.timings.drain(..).map(|(s, t)| (s.to_string(), t)).collect(),
        })
    }
}

struct Labelled {
    t: f64,
    diagnostics: ModeDiagnostics,
    rep_labels: Vec<u32>,
    labels: Vec<u32>,
}

fn label_at(stages: &Stages, zeta_s: &[f64], t: f64, config: &S2dlConfig) -> Result<Labelled> {
    let emb = stages.chain.embedding(t)?;
    let d_t = dt_scores(&emb, zeta_s)?;
    let diagnostics = select_modes(d_t, zeta_s, config.clusters)?;
    let partial = label_backbones(&diagnostics.modes, &stages.graph, config.k_n, config.use_lbb);
    let rep_labels = propagate_labels(&partial, &emb, zeta_s)?;
    let labels = majority_vote(&rep_labels, &stages.reps, &stages.superpixels.map)?;
    Ok(Labelled {
        t,
        diagnostics,
        rep_labels,
        labels,
    })
}

/// Runs the whole pipeline once on `cube`.
pub fn run_s2dl(cube: &HsiCube, config: &S2dlConfig, gt: Option<&GroundTruth>) -> Result<ClusterMap> {
    Prepared::new(cube).run(config, gt)
}

/// Output of a clustering run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMap {
    pub height: usize,
    pub width: usize,
    /// Per pixel, `1..=K`.
    pub labels: Vec<u32>,
    /// Representative pixel ids and their labels before voting.
    pub rep_ids: Vec<usize>,
    pub rep_labels: Vec<u32>,
    /// Mode pixel ids; `modes[k]` seeded label `k + 1`.
    pub modes: Vec<usize>,
    /// Per representative.
    pub d_t: Vec<f64>,
    pub delta: Vec<f64>,
    pub t: f64,
    pub config: S2dlConfig,
    /// Values resolved during the run (balance weight, bandwidth, ...).
    pub derived: Vec<(String, String)>,
    /// Seconds per stage; not part of any deterministic output.
    pub timings: Vec<(String, f64)>,
}

impl ClusterMap {
    pub fn n_clusters(&self) -> usize {
        self.labels.iter().copied().max().unwrap_or(0) as usize
    }

    pub fn labels_csv(&self) -> String {
        raster::labels_csv(self.width, &self.labels)
    }

    pub fn to_pgm(&self) -> String {
        raster::pgm_ascii(self.height, self.width, &self.labels)
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        raster::render_ppm(self.height, self.width, &self.labels)
    }

    /// Config echo, resolved values, modes and per-representative
    /// diagnostics. Contains no timings, so it is reproducible byte for byte.
    pub fn metadata(&self) -> String {
        let mut s = String::from("[config]\n");
        s.push_str(&self.config.to_kv());
        s.push_str("\n[derived]\n");
        for (k, v) in &self.derived {
            let _ = writeln!(s, "{k} = {v}");
        }
        let modes: Vec<String> = self.modes.iter().map(|m| m.to_string()).collect();
        let _ = writeln!(s, "modes = {}", modes.join(","));
        let _ = writeln!(s, "\n[representatives]\npixel,label,d_t,delta");
        for i in 0..self.rep_ids.len() {
            let _ = writeln!(
                s,
                "{},{},{:.12e},{:.12e}",
                self.rep_ids[i], self.rep_labels[i], self.d_t[i], self.delta[i]
            );
        }
        s
    }

    pub fn timings_text(&self) -> String {
        let mut s = String::new();
        for (stage, secs) in &self.timings {
            let _ = writeln!(s, "{stage} = {secs:.6}");
        }
        let total: f64 = self.timings.iter().map(|t| t.1).sum();
        let _ = writeln!(s, "total = {total:.6}");
        s
    }

    pub fn total_seconds(&self) -> f64 {
        self.timings.iter().map(|t| t.1).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hsi::{synth_cube, SceneSpec};

    fn two_patch() -> (HsiCube, GroundTruth) {
        let scene = SceneSpec::halves(12, 16, vec![0.1, 0.8, 0.3], vec![0.7, 0.2, 0.9]);
        synth_cube(&scene, 1, 0.0).unwrap()
    }

    fn small_config() -> S2dlConfig {
        S2dlConfig {
            n_superpixels: 12,
            k_reps: 3,
            k_n: 5,
            radius: 4,
            clusters: 2,
            t: TimeChoice::Value(1.0),
            ..S2dlConfig::default()
        }
    }

    #[test]
    fn separable_halves_are_recovered() {
        let scene = SceneSpec::halves(20, 20, vec![0.1, 0.8, 0.3, 0.5], vec![0.7, 0.2, 0.9, 0.4]);
        let (cube, gt) = synth_cube(&scene, 1, 0.0).unwrap();
        let config = S2dlConfig {
            n_superpixels: 100,
            k_reps: 3,
            k_n: 20,
            radius: 10,
            clusters: 2,
            t: TimeChoice::Value(1.0),
            ..S2dlConfig::default()
        };
        let map = run_s2dl(&cube, &config, None).unwrap();
        let (report, _) = evaluate(&map.labels, &gt, 0.0).unwrap();
        assert_eq!(report.oa, 1.0);
        assert_eq!(map.n_clusters(), 2);
    }

    #[test]
    fn auto_time_requires_labels() {
        let (cube, gt) = two_patch();
        let config = S2dlConfig {
            t: TimeChoice::Auto,
            ..small_config()
        };
        assert!(run_s2dl(&cube, &config, None).is_err());
        let map = run_s2dl(&cube, &config, Some(&gt)).unwrap();
        assert!(map.derived.iter().any(|(k, _)| k == "t_objectives"));
    }

    #[test]
    fn repeated_runs_are_identical() {
        let (cube, _) = two_patch();
        let a = run_s2dl(&cube, &small_config(), None).unwrap();
        let b = run_s2dl(&cube, &small_config(), None).unwrap();
        assert_eq!(a.metadata(), b.metadata());
        assert_eq!(a.labels_csv(), b.labels_csv());
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let (cube, _) = two_patch();
        let config = S2dlConfig {
            n_superpixels: 10_000,
            ..small_config()
        };
        let err = run_s2dl(&cube, &config, None).unwrap_err();
        assert!(err.to_string().starts_with("superpixels:"), "{err}");
    }
}
