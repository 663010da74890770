//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use hypflow_core::{ExperimentParams, IntegratorConfig, ObservableKind};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub surface: String,
    pub potential: Option<PathBuf>,
    pub observable: ObservableKind,
    pub eps0: Vec<f64>,
    pub c: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub j: usize,
    pub eta0: f64,
    pub n: usize,
    pub theta: f64,
    pub integrator: IntegratorConfig,
    pub n_quad: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Size of every starting-point batch.
    pub samples: usize,
    pub liouville_n: usize,
    pub birkhoff_t: Vec<f64>,
    pub mixing_s: Vec<f64>,
    pub mixing_b: f64,
    pub scan_grid: usize,
    pub scan_j: usize,
    pub stability_eps: Vec<f64>,
    pub stability_t: f64,
    pub stability_s: f64,
    pub cartan_instances: usize,
    pub cartan_samples: usize,
    pub cover_points: usize,
    pub cover_s0: f64,
    pub check_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            surface: "bolza".into(),
            potential: None,
            observable: ObservableKind::VPullback,
            eps0: vec![1e-2, 3e-3, 1e-3],
            c: 1.2,
            nu1: 0.0,
            nu2: 0.1,
            j: 0,
            eta0: 0.05,
            n: 3,
            theta: 0.5,
            integrator: IntegratorConfig::default(),
            n_quad: 64,
            seed: 2024,
            out: PathBuf::from("out"),
            samples: 10,
            liouville_n: 1_000_000,
            birkhoff_t: vec![1e2, 1e3, 1e4],
            mixing_s: vec![1e2, 1e3, 1e4],
            mixing_b: 0.1,
            scan_grid: 64,
            scan_j: 3,
            stability_eps: vec![1e-2, 3e-3, 1e-3],
            stability_t: 6.0,
            stability_s: 0.05,
            cartan_instances: 200,
            cartan_samples: 100_000,
            cover_points: 50,
            cover_s0: 0.3,
            check_samples: 8,
        }
    }
}

fn parse_f64(key: &str, v: &str, line: usize) -> Result<f64, CliError> {
    v.trim().parse().map_err(|_| CliError::Config { line, msg: format!("{key}: '{v}' is not a number") })
}

fn parse_usize(key: &str, v: &str, line: usize) -> Result<usize, CliError> {
    let x = parse_f64(key, v, line)?;
    if x < 0.0 || x.fract() != 0.0 || x > 1e12 {
        return Err(CliError::Config { line, msg: format!("{key}: '{v}' is not a count") });
    }
    Ok(x as usize)
}

fn parse_list(key: &str, v: &str, line: usize) -> Result<Vec<f64>, CliError> {
    let out = v.split(',').map(|x| parse_f64(key, x, line)).collect::<Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err(CliError::Config { line, msg: format!("{key}: empty list") });
    }
    Ok(out)
}

impl RunConfig {
    /// Parses `key = value` lines over the defaults; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| CliError::Config { line, msg: format!("expected 'key = value', got '{content}'") })?;
            cfg.set(key.trim(), value.trim(), line)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str, line: usize) -> Result<(), CliError> {
        match key {
            "surface" => self.surface = v.to_string(),
            "potential" => self.potential = Some(PathBuf::from(v)),
            "observable" => {
                self.observable =
                    ObservableKind::parse(v).map_err(|e| CliError::Config { line, msg: e.to_string() })?
            }
            "eps0" => self.eps0 = parse_list(key, v, line)?,
            "c" => self.c = parse_f64(key, v, line)?,
            "nu1" => self.nu1 = parse_f64(key, v, line)?,
            "nu2" => self.nu2 = parse_f64(key, v, line)?,
            "j" => self.j = parse_usize(key, v, line)?,
            "eta0" => self.eta0 = parse_f64(key, v, line)?,
            "n" => self.n = parse_usize(key, v, line)?,
            "theta" => self.theta = parse_f64(key, v, line)?,
            "integrator_order" => self.integrator.order = parse_usize(key, v, line)? as u8,
            "rel_tol" => self.integrator.rel_tol = parse_f64(key, v, line)?,
            "abs_tol" => self.integrator.abs_tol = parse_f64(key, v, line)?,
            "max_step" => self.integrator.max_step = parse_f64(key, v, line)?,
            "energy_tol" => self.integrator.energy_tol = parse_f64(key, v, line)?,
            "n_quad" => self.n_quad = parse_usize(key, v, line)?,
            "seed" => self.seed = parse_usize(key, v, line)? as u64,
            "out" => self.out = PathBuf::from(v),
            "samples" => self.samples = parse_usize(key, v, line)?,
            "liouville_n" => self.liouville_n = parse_usize(key, v, line)?,
            "birkhoff_t" => self.birkhoff_t = parse_list(key, v, line)?,
            "mixing_s" => self.mixing_s = parse_list(key, v, line)?,
            "mixing_b" => self.mixing_b = parse_f64(key, v, line)?,
            "scan_grid" => self.scan_grid = parse_usize(key, v, line)?,
            "scan_j" => self.scan_j = parse_usize(key, v, line)?,
            "stability_eps" => self.stability_eps = parse_list(key, v, line)?,
            "stability_t" => self.stability_t = parse_f64(key, v, line)?,
            "stability_s" => self.stability_s = parse_f64(key, v, line)?,
            "cartan_instances" => self.cartan_instances = parse_usize(key, v, line)?,
            "cartan_samples" => self.cartan_samples = parse_usize(key, v, line)?,
            "cover_points" => self.cover_points = parse_usize(key, v, line)?,
            "cover_s0" => self.cover_s0 = parse_f64(key, v, line)?,
            "check_samples" => self.check_samples = parse_usize(key, v, line)?,
            other => return Err(CliError::Config { line, msg: format!("unknown key '{other}'") }),
        }
        Ok(())
    }

    /// Reduced grids for CI runs.
    pub fn quick(mut self) -> Self {
        self.eps0.truncate(2);
        self.n_quad = 8;
        self.samples = 2;
        self.liouville_n = 20_000;
        self.birkhoff_t = vec![1e2, 3e2];
        self.mixing_s = vec![1e2, 3e2];
        self.scan_grid = 10;
        self.stability_eps.truncate(2);
        self.cartan_instances = 10;
        self.cartan_samples = 2000;
        self.cover_points = 3;
        self.check_samples = 2;
        self
    }

    /// Experiment parameters at one `ε₀`.
    pub fn params(&self, eps0: f64) -> ExperimentParams {
        ExperimentParams { eps0, nu1: self.nu1, nu2: self.nu2, c: self.c, j: self.j, eta0: self.eta0 }
    }

    /// Checks every constraint; messages name the violated one.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.surface != "bolza" {
            return Err(CliError::Invalid(format!("unsupported surface '{}' (only 'bolza')", self.surface)));
        }
        for &e in &self.eps0 {
            self.params(e).validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        }
        self.integrator.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        if self.n == 0 || self.n > 6 {
            return Err(CliError::Invalid(format!("constraint 1 <= N <= 6 violated: N = {}", self.n)));
        }
        if self.n < self.j + 1 {
            return Err(CliError::Invalid(format!("constraint N >= J + 1 violated: N = {}, J = {}", self.n, self.j)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(CliError::Invalid(format!("constraint 0 < theta < 1 violated: theta = {}", self.theta)));
        }
        if self.n_quad < 2 || self.samples == 0 || self.liouville_n < 1000 {
            return Err(CliError::Invalid("n_quad >= 2, samples >= 1 and liouville_n >= 1000 are required".into()));
        }
        if !(self.mixing_b > 0.0 && self.mixing_b <= 1.0) {
            return Err(CliError::Invalid(format!("constraint 0 < b <= 1 violated: b = {}", self.mixing_b)));
        }
        if self.scan_j > 3 {
            return Err(CliError::Invalid(format!("scan_j must be at most 3, got {}", self.scan_j)));
        }
        Ok(())
    }

    /// Effective settings as an ordered key/value map, for manifests.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("surface", self.surface.clone());
        put("potential", self.potential.as_ref().map_or("default".into(), |p| p.display().to_string()));
        put("observable", self.observable.id().into());
        put("eps0", list(&self.eps0));
        put("c", self.c.to_string());
        put("nu1", self.nu1.to_string());
        put("nu2", self.nu2.to_string());
        put("j", self.j.to_string());
        put("eta0", self.eta0.to_string());
        put("n", self.n.to_string());
        put("theta", self.theta.to_string());
        put("integrator_order", self.integrator.order.to_string());
        put("rel_tol", format!("{:e}", self.integrator.rel_tol));
        put("abs_tol", format!("{:e}", self.integrator.abs_tol));
        put("max_step", self.integrator.max_step.to_string());
        put("energy_tol", format!("{:e}", self.integrator.energy_tol));
        put("n_quad", self.n_quad.to_string());
        put("seed", self.seed.to_string());
        put("out", self.out.display().to_string());
        put("samples", self.samples.to_string());
        put("liouville_n", self.liouville_n.to_string());
        put("birkhoff_t", list(&self.birkhoff_t));
        put("mixing_s", list(&self.mixing_s));
        put("mixing_b", self.mixing_b.to_string());
        put("scan_grid", self.scan_grid.to_string());
        put("scan_j", self.scan_j.to_string());
        put("stability_eps", list(&self.stability_eps));
        put("stability_t", self.stability_t.to_string());
        put("stability_s", self.stability_s.to_string());
        put("cartan_instances", self.cartan_instances.to_string());
        put("cartan_samples", self.cartan_samples.to_string());
        put("cover_points", self.cover_points.to_string());
        put("cover_s0", self.cover_s0.to_string());
        put("check_samples", self.check_samples.to_string());
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let cfg = RunConfig::parse("# comment\nc = 1.3\neps0 = 1e-2, 1e-3\nobservable = f_v\n").unwrap();
        assert_eq!(cfg.c, 1.3);
        assert_eq!(cfg.eps0, vec![1e-2, 1e-3]);
        assert_eq!(cfg.observable, ObservableKind::FV);
        cfg.validate().unwrap();
        assert!(matches!(RunConfig::parse("bogus = 1"), Err(CliError::Config { line: 1, .. })));
        assert!(RunConfig::parse("c 1.2").is_err());
        let bad = RunConfig::parse("c = 1.6").unwrap().validate().unwrap_err().to_string();
        assert!(bad.contains("c < 3/2"), "{bad}");
    }
}
