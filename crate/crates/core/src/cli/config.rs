use crate::error::{Error, Result};
use crate::graph_field::DEFAULT_SITE_BUDGET;
use crate::limit_field::{QuadConfig, SynthConfig};
use crate::montecarlo::{IdentityConfig, Tolerances};
use crate::spectral_models::{ModelSpec, PmfEntry};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

/// Effective configuration of one run. Unknown keys are rejected at every
/// level.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub model: ModelSection,
    pub scaling: ScalingSection,
    pub classify: ClassifySection,
    pub qtable: QtableSection,
    pub limit_cov: LimitCovSection,
    pub simulate: SimulateSection,
    pub synthesize: SynthesizeSection,
    pub verify: VerifySection,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub alphas: Option<Vec<f64>>,
    pub gammas: Option<Vec<f64>>,
    pub p: Option<f64>,
    /// `product-pareto` (default) or `custom`.
    pub family: Option<String>,
    /// CSV with header `k_1,...,k_d,prob`.
    pub pmf_file: Option<PathBuf>,
    pub pmf: Option<Vec<PmfEntry>>,
}

impl ModelSection {
    pub fn spec(&self) -> Result<ModelSpec> {
        let alphas = self.alphas.clone().ok_or_else(|| Error::Config("model.alphas (--alpha) is required".into()))?;
        let custom = match self.family.as_deref() {
            None => self.pmf.is_some(),
            Some("product-pareto") => false,
            Some("custom") => true,
            Some(f) => return Err(Error::Config(format!("unknown model family {f:?}"))),
        };
        if custom && self.pmf.is_none() {
            return Err(Error::Config("custom family needs model.pmf or model.pmf_file".into()));
        }
        if !custom && self.pmf.is_some() {
            return Err(Error::Config("a step table was given for the product-pareto family".into()));
        }
        Ok(ModelSpec { alphas, gammas: self.gammas.clone(), p: self.p.unwrap_or(0.5), pmf: self.pmf.clone() })
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingSection {
    pub alpha_primes: Option<Vec<f64>>,
    pub n_schedule: Option<Vec<u64>>,
}

impl ScalingSection {
    pub fn alpha_primes(&self) -> Result<Vec<f64>> {
        self.alpha_primes.clone().ok_or_else(|| Error::Config("scaling.alpha_primes (--alpha-prime) is required".into()))
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifySection {
    /// Hölder exponent reported on free axes.
    pub free_holder: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct QtableSection {
    pub extent: usize,
    pub budget: u64,
}

impl Default for QtableSection {
    fn default() -> Self {
        QtableSection { extent: 1 << 12, budget: DEFAULT_SITE_BUDGET }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LimitCovSection {
    /// CSV with header `t_1,...,t_d,s_1,...,s_d`.
    pub points_file: Option<PathBuf>,
    /// Rows `[t_1, ..., t_d, s_1, ..., s_d]`.
    pub points: Option<Vec<Vec<f64>>>,
    pub quad: QuadConfig,
}

impl LimitCovSection {
    pub fn points(&self, d: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        let rows = self.points.as_ref().ok_or_else(|| Error::Config("limit-cov needs points (--points)".into()))?;
        rows.iter()
            .map(|r| {
                if r.len() != 2 * d {
                    return Err(Error::Config(format!("point row {r:?} needs {} values", 2 * d)));
                }
                Ok((r[..d].to_vec(), r[d..].to_vec()))
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub n: Option<u64>,
    pub replicas: usize,
    /// Defaults to the largest window extent.
    pub buffer_depth: Option<usize>,
    pub t_grid: Option<Vec<Vec<f64>>>,
    pub site_budget: u64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { n: None, replicas: 1, buffer_depth: None, t_grid: None, site_budget: DEFAULT_SITE_BUDGET }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesizeSection {
    pub realizations: usize,
    pub points: Option<Vec<Vec<f64>>>,
    pub per_realization: bool,
    pub grid: SynthConfig,
    /// Relative variance gap above which the grid is reported as too coarse.
    pub gap_warning: f64,
}

impl Default for SynthesizeSection {
    fn default() -> Self {
        SynthesizeSection {
            realizations: 1,
            points: None,
            per_realization: false,
            grid: SynthConfig::default(),
            gap_warning: 0.01,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub replicas: usize,
    pub t_grid: Option<Vec<Vec<f64>>>,
    pub pairs: Option<Vec<(usize, usize)>>,
    pub buffer_factor: f64,
    pub site_budget: u64,
    pub tolerances: Tolerances,
    pub gaussianity_point: Option<usize>,
    pub quad: QuadConfig,
    /// Also run the second-order identity checks.
    pub identities: Option<IdentityConfig>,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            replicas: 200,
            t_grid: None,
            pairs: None,
            buffer_factor: 1.0,
            site_budget: DEFAULT_SITE_BUDGET,
            tolerances: Tolerances::default(),
            gaussianity_point: None,
            quad: QuadConfig::default(),
            identities: None,
        }
    }
}

impl RunConfig {
    /// Reads a TOML file; relative paths inside it are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for p in [&mut cfg.model.pmf_file, &mut cfg.limit_cov.points_file, &mut cfg.output_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Makes every path absolute and inlines referenced data files, so the
    /// echoed config fully determines the run.
    pub fn resolve_paths(&mut self) -> Result<()> {
        let cwd = std::env::current_dir()?;
        let abs = |p: &Path| if p.is_relative() { cwd.join(p) } else { p.to_path_buf() };
        self.output_dir = Some(abs(self.output_dir.as_deref().unwrap_or(Path::new("osgrf-out"))));
        if let Some(f) = self.model.pmf_file.take() {
            let f = abs(&f);
            let rows = read_numeric_csv(&f)?;
            let entries = rows
                .into_iter()
                .map(|r| {
                    if r.len() < 2 {
                        return Err(Error::Config(format!("{}: rows need k_1..k_d,prob", f.display())));
                    }
                    let (k, prob) = r.split_at(r.len() - 1);
                    if k.iter().any(|x| x.fract() != 0.0) {
                        return Err(Error::Config(format!("{}: non-integer step {k:?}", f.display())));
                    }
                    Ok(PmfEntry { step: k.iter().map(|&x| x as i64).collect(), prob: prob[0] })
                })
                .collect::<Result<Vec<_>>>()?;
            if self.model.pmf.is_some() {
                return Err(Error::Config("give model.pmf or model.pmf_file, not both".into()));
            }
            self.model.pmf = Some(entries);
            self.model.pmf_file = Some(f);
        }
        if let Some(f) = self.limit_cov.points_file.take() {
            let f = abs(&f);
            if self.limit_cov.points.is_some() {
                return Err(Error::Config("give limit_cov.points or limit_cov.points_file, not both".into()));
            }
            self.limit_cov.points = Some(read_numeric_csv(&f)?);
            self.limit_cov.points_file = Some(f);
        }
        Ok(())
    }
}

/// Numeric CSV with one header row.
fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::Config(format!("{}: bad number {f:?}", path.display()))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[model]\nalpha = [0.3]").is_err());
        assert!(toml::from_str::<RunConfig>("[verify.quad]\norderr = 3").is_err());
    }

    #[test]
    fn sections_fill_defaults() {
        let cfg: RunConfig = toml::from_str("seed = 3\n[verify]\nreplicas = 10\n[verify.quad]\norder = 6").unwrap();
        assert_eq!(cfg.verify.replicas, 10);
        assert_eq!(cfg.verify.quad.order, 6);
        assert_eq!(cfg.verify.quad.half_periods, QuadConfig::default().half_periods);
        assert_eq!(cfg.qtable, QtableSection::default());
    }

    #[test]
    fn family_and_table_must_agree() {
        let mut m = ModelSection { alphas: Some(vec![0.3]), family: Some("custom".into()), ..Default::default() };
        assert!(m.spec().is_err());
        m.family = Some("stable".into());
        assert!(m.spec().is_err());
        m.family = None;
        assert_eq!(m.spec().unwrap(), ModelSpec::product(&[0.3], 0.5));
    }
}
