//! Flat key=value experiment configuration.
//!
//! Lines are `key = value`, `#` starts a comment, repeated keys build
//! lists. Example:
//!
//! ```text
//! problem   = mac
//! mac_ny    = 16
//! mac_re    = 60
//! mac_inflow = 1
//! t_end     = 0.25
//! ref_tau   = 0.00048828125
//! scheme    = imex-euler
//! scheme    = simple
//! tau       = 0.0078125
//! tau       = 0.00390625
//! lintol    = 0
//! lintol    = 1e-6
//! output_dir = out
//! seed      = 42
//! ```
//!
//! `lintol = 0` selects direct solves. An `import` problem replaces the
//! `mac_*` keys with `manifest = path`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nsdae::error::{Error, Result};
use nsdae::mac::{MacGridSpec, ObstacleBox};
use nsdae::schemes::SchemeKind;

#[derive(Debug, Clone)]
pub enum ProblemSpec {
    Mac(MacGridSpec),
    Import(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub schemes: Vec<SchemeKind>,
    pub taus: Vec<f64>,
    /// Inner-solve tolerances; `0` means direct solves.
    pub lintols: Vec<f64>,
    pub ref_tau: f64,
    pub t_end: f64,
    pub output_dir: PathBuf,
    /// Seed recorded for randomized downstream suites.
    pub seed: u64,
    /// Penalty / artificial-compressibility parameter.
    pub beta: f64,
    pub picard_tol: f64,
}

struct KeyValues {
    map: BTreeMap<String, Vec<String>>,
}

impl KeyValues {
    fn parse(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: "expected 'key = value'".into(),
                });
            };
            map.entry(key.trim().to_string())
                .or_default()
                .push(value.trim().to_string());
        }
        Ok(KeyValues { map })
    }

    fn one(&self, key: &str) -> Result<&str> {
        match self.map.get(key).map(|v| v.as_slice()) {
            Some([x]) => Ok(x),
            Some(_) => Err(Error::InvalidConfig(format!("key '{key}' given more than once"))),
            None => Err(Error::InvalidConfig(format!("missing key '{key}'"))),
        }
    }

    fn opt(&self, key: &str) -> Result<Option<&str>> {
        match self.map.get(key).map(|v| v.as_slice()) {
            Some([x]) => Ok(Some(x)),
            Some(_) => Err(Error::InvalidConfig(format!("key '{key}' given more than once"))),
            None => Ok(None),
        }
    }

    fn many(&self, key: &str) -> Vec<String> {
        self.map.get(key).cloned().unwrap_or_default()
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("key '{key}': cannot parse '{value}'")))
}

pub fn parse_scheme(name: &str, beta: f64) -> Result<SchemeKind> {
    Ok(match name {
        "imex-euler" | "imex" => SchemeKind::ImexEuler,
        "projection" => SchemeKind::Projection,
        "simple" => SchemeKind::Simple,
        "artificial-compressibility" | "ac" => SchemeKind::ArtificialCompressibility { beta },
        "penalty" => SchemeKind::Penalty { beta },
        "derivative-constraint" => SchemeKind::DerivativeConstraint { eta: None },
        "minimal-extension" => SchemeKind::MinimalExtension,
        "reference-trapezoid" => SchemeKind::ReferenceTrapezoid,
        other => {
            return Err(Error::InvalidConfig(format!("unknown scheme '{other}'")));
        }
    })
}

impl ExperimentConfig {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let kv = KeyValues::parse(path)?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();

        let beta: f64 = match kv.opt("beta")? {
            Some(v) => num("beta", v)?,
            None => 1e3,
        };
        let problem = match kv.one("problem")? {
            "mac" => {
                let get = |key: &str, default: f64| -> Result<f64> {
                    Ok(match kv.opt(key)? {
                        Some(v) => num(key, v)?,
                        None => default,
                    })
                };
                let ny: usize = num("mac_ny", kv.one("mac_ny")?)?;
                let nx: usize = match kv.opt("mac_nx")? {
                    Some(v) => num("mac_nx", v)?,
                    None => 3 * ny,
                };
                let obstacle = match kv.opt("mac_obstacle")? {
                    None => None,
                    Some(v) => {
                        let nums: Vec<f64> = v
                            .split_whitespace()
                            .map(|s| num("mac_obstacle", s))
                            .collect::<Result<_>>()?;
                        if nums.len() != 4 {
                            return Err(Error::InvalidConfig(
                                "mac_obstacle needs 'x0 x1 y0 y1'".into(),
                            ));
                        }
                        Some(ObstacleBox {
                            x0: nums[0],
                            x1: nums[1],
                            y0: nums[2],
                            y1: nums[3],
                        })
                    }
                };
                ProblemSpec::Mac(MacGridSpec {
                    nx,
                    ny,
                    lx: get("mac_lx", 3.0)?,
                    ly: get("mac_ly", 1.0)?,
                    obstacle,
                    inflow_max: get("mac_inflow", 0.0)?,
                    lid_speed: get("mac_lid", 0.0)?,
                    reynolds: get("mac_re", 60.0)?,
                })
            }
            "import" => ProblemSpec::Import(base.join(kv.one("manifest")?)),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "problem must be 'mac' or 'import', got '{other}'"
                )));
            }
        };

        let schemes = kv
            .many("scheme")
            .iter()
            .map(|s| parse_scheme(s, beta))
            .collect::<Result<Vec<_>>>()?;
        let taus = kv
            .many("tau")
            .iter()
            .map(|s| num::<f64>("tau", s))
            .collect::<Result<Vec<f64>>>()?;
        let lintols = {
            let list = kv.many("lintol");
            if list.is_empty() {
                vec![0.0]
            } else {
                list.iter()
                    .map(|s| num::<f64>("lintol", s))
                    .collect::<Result<Vec<f64>>>()?
            }
        };

        for w in 0..taus.len() {
            for v in w + 1..taus.len() {
                if taus[w] == taus[v] {
                    return Err(Error::InvalidConfig(format!(
                        "tau grid values must be pairwise distinct (duplicate {})",
                        taus[w]
                    )));
                }
            }
        }
        let ref_tau: f64 = num("ref_tau", kv.one("ref_tau")?)?;
        if let Some(min_tau) = taus.iter().copied().reduce(f64::min) {
            if ref_tau > min_tau / 4.0 {
                return Err(Error::InvalidConfig(format!(
                    "ref_tau = {ref_tau} must be at most a quarter of the smallest tau ({min_tau})"
                )));
            }
        }
        let t_end: f64 = num("t_end", kv.one("t_end")?)?;
        let output_dir = base.join(match kv.opt("output_dir")? {
            Some(v) => v,
            None => "out",
        });
        let seed: u64 = match kv.opt("seed")? {
            Some(v) => num("seed", v)?,
            None => 0,
        };
        let picard_tol: f64 = match kv.opt("picard_tol")? {
            Some(v) => num("picard_tol", v)?,
            None => nsdae::schemes::DEFAULT_PICARD_TOL,
        };
        Ok(ExperimentConfig {
            problem,
            schemes,
            taus,
            lintols,
            ref_tau,
            t_end,
            output_dir,
            seed,
            beta,
            picard_tol,
        })
    }
}
