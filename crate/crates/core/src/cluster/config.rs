use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Kernel bandwidth for the density estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma0 {
    Value(f64),
    /// Percentile (0..=100) of the pooled neighbor distances.
    Percentile(f64),
}

/// Diffusion time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeChoice {
    Value(f64),
    /// Try the whole dyadic grid and keep the best against ground truth.
    Auto,
}

impl fmt::Display for TimeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeChoice::Value(t) => write!(f, "{t}"),
            TimeChoice::Auto => f.write_str("auto"),
        }
    }
}

impl FromStr for TimeChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "auto" {
            return Ok(TimeChoice::Auto);
        }
        let t = parse_f64("t", s)?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::param(format!("t must be >= 0 or \"auto\", got {s}")));
        }
        Ok(TimeChoice::Value(t))
    }
}

/// Every knob of one clustering run.
#[derive(Debug, Clone, PartialEq)]
pub struct S2dlConfig {
    pub n_superpixels: usize,
    /// Representatives per superpixel.
    pub k_reps: usize,
    /// Neighbors for the density estimate and the graph.
    pub k_n: usize,
    pub sigma0: Sigma0,
    /// Half-width of the spatial window.
    pub radius: usize,
    pub clusters: usize,
    pub t: TimeChoice,
    /// Balance weight; `None` derives it from the lattice.
    pub alpha: Option<f64>,
    /// Lattice kernel width.
    pub ers_sigma: f64,
    /// Retained eigenpairs; `None` uses `min(|X_s| - 1, 10 K)`.
    pub eigenpairs: Option<usize>,
    pub use_lbb: bool,
    pub pca_components: usize,
}

impl Default for S2dlConfig {
    fn default() -> Self {
        Self {
            n_superpixels: 500,
            k_reps: 5,
            k_n: 30,
            sigma0: Sigma0::Percentile(50.0),
            radius: 10,
            clusters: 2,
            t: TimeChoice::Auto,
            alpha: None,
            ers_sigma: 5.0,
            eigenpairs: None,
            use_lbb: true,
            pca_components: 3,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::param(format!("{key}: expected a number, got {value:?}")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::param(format!("{key}: expected a non-negative integer, got {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        other => Err(Error::param(format!("{key}: expected true/false, got {other:?}"))),
    }
}

impl S2dlConfig {
    /// Keys accepted by [`S2dlConfig::set`], in echo order.
    pub const KEYS: &'static [&'static str] = &[
        "superpixels",
        "k",
        "kn",
        "sigma0",
        "sigma0_percentile",
        "radius",
        "clusters",
        "t",
        "alpha",
        "ers_sigma",
        "eigenpairs",
        "lbb",
        "pca_components",
    ];

    /// Sets one knob from its textual form (as used in config files).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "superpixels" => self.n_superpixels = parse_usize(key, v)?,
            "k" => self.k_reps = parse_usize(key, v)?,
            "kn" => self.k_n = parse_usize(key, v)?,
            "sigma0" => self.sigma0 = Sigma0::Value(parse_f64(key, v)?),
            "sigma0_percentile" => self.sigma0 = Sigma0::Percentile(parse_f64(key, v)?),
            "radius" => self.radius = parse_usize(key, v)?,
            "clusters" => self.clusters = parse_usize(key, v)?,
            "t" => self.t = v.parse()?,
            "alpha" => {
                self.alpha = if v == "auto" {
                    None
                } else {
                    Some(parse_f64(key, v)?)
                }
            }
            "ers_sigma" => self.ers_sigma = parse_f64(key, v)?,
            "eigenpairs" => {
                self.eigenpairs = if v == "auto" {
                    None
                } else {
                    Some(parse_usize(key, v)?)
                }
            }
            "lbb" => self.use_lbb = parse_bool(key, v)?,
            "pca_components" => self.pca_components = parse_usize(key, v)?,
            _ => return Err(Error::param(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Checks every range before any work is done.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("superpixels", self.n_superpixels),
            ("k", self.k_reps),
            ("kn", self.k_n),
            ("radius", self.radius),
            ("clusters", self.clusters),
            ("pca_components", self.pca_components),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::param(format!("{name} must be >= 1")));
            }
        }
        match self.sigma0 {
            Sigma0::Value(s) if !(s > 0.0 && s.is_finite()) => {
                return Err(Error::param(format!("sigma0 must be > 0, got {s}")))
            }
            Sigma0::Percentile(p) if !(0.0..=100.0).contains(&p) => {
                return Err(Error::param(format!("sigma0_percentile must be in [0, 100], got {p}")))
            }
            _ => {}
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::param(format!("alpha must be > 0, got {a}")));
            }
        }
        if !(self.ers_sigma > 0.0 && self.ers_sigma.is_finite()) {
            return Err(Error::param("ers_sigma must be > 0"));
        }
        if self.eigenpairs == Some(0) {
            return Err(Error::param("eigenpairs must be >= 1"));
        }
        Ok(())
    }

    /// `key = value` lines, one per knob, in a fixed order.
    pub fn to_kv(&self) -> String {
        let mut lines = vec![
            format!("superpixels = {}", self.n_superpixels),
            format!("k = {}", self.k_reps),
            format!("kn = {}", self.k_n),
        ];
        lines.push(match self.sigma0 {
            Sigma0::Value(s) => format!("sigma0 = {s}"),
            Sigma0::Percentile(p) => format!("sigma0_percentile = {p}"),
        });
        lines.extend([
            format!("radius = {}", self.radius),
            format!("clusters = {}", self.clusters),
            format!("t = {}", self.t),
            format!(
                "alpha = {}",
                self.alpha.map_or("auto".to_string(), |a| a.to_string())
            ),
            format!("ers_sigma = {}", self.ers_sigma),
            format!(
                "eigenpairs = {}",
                self.eigenpairs.map_or("auto".to_string(), |l| l.to_string())
            ),
            format!("lbb = {}", self.use_lbb),
            format!("pca_components = {}", self.pca_components),
        ]);
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }

    /// Parses `key = value` text; blank lines and `#` comments are skipped.
    /// Keys not listed in [`S2dlConfig::KEYS`] are returned for the caller.
    pub fn apply_kv(&mut self, text: &str) -> Result<Vec<(String, String)>> {
        let mut other = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("expected key = value, got {line:?}"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if Self::KEYS.contains(&k) {
                self.set(k, v).map_err(|e| Error::Parse {
                    line: n + 1,
                    message: e.to_string(),
                })?;
            } else {
                other.push((k.to_string(), v.to_string()));
            }
        }
        Ok(other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let mut c = S2dlConfig {
            alpha: Some(0.25),
            t: TimeChoice::Value(4.0),
            sigma0: Sigma0::Value(1.5),
            use_lbb: false,
            ..S2dlConfig::default()
        };
        c.eigenpairs = Some(12);
        let mut back = S2dlConfig::default();
        assert!(back.apply_kv(&c.to_kv()).unwrap().is_empty());
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_returned() {
        let mut c = S2dlConfig::default();
        let rest = c.apply_kv("# run\nradius = 3\ncube = a.bsq\n").unwrap();
        assert_eq!(c.radius, 3);
        assert_eq!(rest, vec![("cube".to_string(), "a.bsq".to_string())]);
    }

    #[test]
    fn validation_rejects_zero_radius() {
        let c = S2dlConfig {
            radius: 0,
            ..S2dlConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(S2dlConfig::default().validate().is_ok());
    }

    #[test]
    fn bad_values_report_line() {
        let mut c = S2dlConfig::default();
        let err = c.apply_kv("\nt = soon\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
