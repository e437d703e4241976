//! Run configuration: a flat sectioned `key = value` text format with no
//! nesting, strict unknown-key rejection, and environment-variable
//! overrides (`IALM_<SECTION>_<KEY>`).

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use ialm_core::ialm::IalmConfig;
use ialm_core::problems::SpectrumKind;
use ialm_core::stationarity::Mode;
use ialm_core::subsolvers::{ApgmOptions, ProjGradOptions, SubsolverKind, TrustRegionOptions};

use crate::CliError;

/// Which benchmark problem the run builds, with generator parameters.
#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Geneig {
        n: usize,
        spectrum: String,
        p: f64,
    },
    Bp {
        d: usize,
        n: usize,
        sparsity: usize,
        noise_sigma: f64,
    },
    Clustering {
        clusters: usize,
        points_per_cluster: usize,
        dim: usize,
        separation: f64,
        rank: Option<usize>,
    },
    ClusteringCsv {
        path: PathBuf,
        s: usize,
        rank: usize,
    },
    Quadratic {
        dim: usize,
        cond: f64,
    },
}

/// How the initial primal point is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Least-squares decode for basis pursuit, scaled-and-projected
    /// standard normal otherwise.
    Auto,
    /// Scaled-and-projected standard normal for every problem.
    Random,
}

/// Fully validated run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub beta1: f64,
    pub b: f64,
    pub sigma1: f64,
    pub tau_f: f64,
    pub tau_s: f64,
    pub max_outer: usize,
    pub mode: String,
    pub subsolver: String,
    pub inner_max_iters: usize,
    pub init: InitKind,
    pub seed: u64,
    pub timing: bool,
}

impl RunConfig {
    pub fn mode_enum(&self) -> Mode {
        match self.mode.as_str() {
            "second" => Mode::SecondOrder,
            _ => Mode::FirstOrder,
        }
    }

    pub fn subsolver_enum(&self) -> SubsolverKind {
        match self.subsolver.as_str() {
            "projgrad" => SubsolverKind::ProjectedGradient(ProjGradOptions::default()),
            "trustregion" => SubsolverKind::TrustRegion(TrustRegionOptions::default()),
            _ => SubsolverKind::Apgm(ApgmOptions::default()),
        }
    }

    pub fn to_ialm_config(&self) -> IalmConfig {
        IalmConfig {
            beta1: self.beta1,
            penalty_base: self.b,
            sigma1: self.sigma1,
            tau_f: self.tau_f,
            tau_s: self.tau_s,
            max_outer: self.max_outer,
            mode: self.mode_enum(),
            subsolver: self.subsolver_enum(),
            inner_max_iters: self.inner_max_iters,
            record_timing: self.timing,
        }
    }

    pub fn spectrum_enum(&self) -> Option<SpectrumKind> {
        match &self.problem {
            ProblemSpec::Geneig { spectrum, p, .. } => Some(match spectrum.as_str() {
                "gaussian" => SpectrumKind::GaussianIid,
                "exp" => SpectrumKind::ExpDecay(*p),
                _ => SpectrumKind::PolyDecay(*p),
            }),
            _ => None,
        }
    }
}

type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn parse_sections(text: &str) -> Result<Sections, CliError> {
    let mut sections: Sections = BTreeMap::new();
    let mut current = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| CliError::config(format!("line {}: malformed section header", lineno + 1)))?;
            current = name.trim().to_string();
            sections.entry(current.clone()).or_default();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("line {}: expected 'key = value'", lineno + 1)))?;
        if current.is_empty() {
            return Err(CliError::config(format!(
                "line {}: key outside of any [section]",
                lineno + 1
            )));
        }
        let prev = sections
            .get_mut(&current)
            .expect("section entry exists")
            .insert(key.trim().to_string(), value.trim().to_string());
        if prev.is_some() {
            return Err(CliError::config(format!(
                "line {}: duplicate key '{}' in [{}]",
                lineno + 1,
                key.trim(),
                current
            )));
        }
    }
    Ok(sections)
}

fn apply_env_overrides(sections: &mut Sections) {
    const KEYS: &[(&str, &str)] = &[
        ("problem", "kind"),
        ("problem", "n"),
        ("problem", "spectrum"),
        ("problem", "p"),
        ("problem", "d"),
        ("problem", "sparsity"),
        ("problem", "noise_sigma"),
        ("problem", "clusters"),
        ("problem", "points_per_cluster"),
        ("problem", "dim"),
        ("problem", "separation"),
        ("problem", "rank"),
        ("problem", "path"),
        ("problem", "s"),
        ("problem", "cond"),
        ("solver", "beta1"),
        ("solver", "b"),
        ("solver", "sigma1"),
        ("solver", "tau_f"),
        ("solver", "tau_s"),
        ("solver", "max_outer"),
        ("solver", "mode"),
        ("solver", "subsolver"),
        ("solver", "inner_max_iters"),
        ("solver", "init"),
        ("run", "seed"),
        ("run", "timing"),
    ];
    for (section, key) in KEYS {
        let var = format!("IALM_{}_{}", section.to_uppercase(), key.to_uppercase());
        if let Ok(value) = std::env::var(&var) {
            sections
                .entry(section.to_string())
                .or_default()
                .insert(key.to_string(), value);
        }
    }
}

struct SectionReader {
    name: String,
    entries: BTreeMap<String, String>,
}

impl SectionReader {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T, CliError> {
        match self.take(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| {
                CliError::config(format!("[{}] {}: cannot parse '{}'", self.name, key, raw))
            }),
        }
    }

    fn parsed_opt<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                CliError::config(format!("[{}] {}: cannot parse '{}'", self.name, key, raw))
            }),
        }
    }

    fn required<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, CliError> {
        let raw = self.take(key).ok_or_else(|| {
            CliError::config(format!("[{}] missing required key '{}'", self.name, key))
        })?;
        raw.parse().map_err(|_| {
            CliError::config(format!("[{}] {}: cannot parse '{}'", self.name, key, raw))
        })
    }

    fn finish(self) -> Result<(), CliError> {
        if let Some(key) = self.entries.keys().next() {
            return Err(CliError::config(format!(
                "[{}] unknown key '{}'",
                self.name, key
            )));
        }
        Ok(())
    }
}

/// Parses a configuration file, applies `IALM_*` environment overrides and
/// the optional seed flag, and validates every field.
pub fn load(path: &std::path::Path, seed_override: Option<u64>) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    from_str(&text, seed_override)
}

pub fn from_str(text: &str, seed_override: Option<u64>) -> Result<RunConfig, CliError> {
    let mut sections = parse_sections(text)?;
    apply_env_overrides(&mut sections);

    for name in sections.keys() {
        if !matches!(name.as_str(), "problem" | "solver" | "run") {
            return Err(CliError::config(format!("unknown section [{name}]")));
        }
    }

    let mut problem = SectionReader {
        name: "problem".into(),
        entries: sections.remove("problem").unwrap_or_default(),
    };
    let kind: String = problem.required("kind")?;
    let spec = match kind.as_str() {
        "geneig" => {
            let n = problem.parsed("n", 50usize)?;
            let spectrum: String = problem.parsed("spectrum", "poly".to_string())?;
            let p = problem.parsed("p", 1.0f64)?;
            if !matches!(spectrum.as_str(), "gaussian" | "poly" | "exp") {
                return Err(CliError::config(format!(
                    "[problem] spectrum must be gaussian|poly|exp, got '{spectrum}'"
                )));
            }
            ProblemSpec::Geneig { n, spectrum, p }
        }
        "bp" => ProblemSpec::Bp {
            d: problem.parsed("d", 100usize)?,
            n: problem.parsed("n", 50usize)?,
            sparsity: problem.parsed("sparsity", 5usize)?,
            noise_sigma: problem.parsed("noise_sigma", 1e-3f64)?,
        },
        "clustering" => ProblemSpec::Clustering {
            clusters: problem.parsed("clusters", 3usize)?,
            points_per_cluster: problem.parsed("points_per_cluster", 20usize)?,
            dim: problem.parsed("dim", 2usize)?,
            separation: problem.parsed("separation", 10.0f64)?,
            rank: problem.parsed_opt("rank")?,
        },
        "clustering_csv" => ProblemSpec::ClusteringCsv {
            path: PathBuf::from(problem.required::<String>("path")?),
            s: problem.required("s")?,
            rank: problem.required("rank")?,
        },
        "quadratic" => ProblemSpec::Quadratic {
            dim: problem.parsed("dim", 10usize)?,
            cond: problem.parsed("cond", 1.0f64)?,
        },
        other => {
            return Err(CliError::config(format!(
                "[problem] kind must be geneig|bp|clustering|clustering_csv|quadratic, got '{other}'"
            )))
        }
    };
    problem.finish()?;

    let mut solver = SectionReader {
        name: "solver".into(),
        entries: sections.remove("solver").unwrap_or_default(),
    };
    let mode: String = solver.parsed("mode", "first".to_string())?;
    if !matches!(mode.as_str(), "first" | "second") {
        return Err(CliError::config(format!(
            "[solver] mode must be first|second, got '{mode}'"
        )));
    }
    let subsolver: String = solver.parsed("subsolver", "apgm".to_string())?;
    if !matches!(subsolver.as_str(), "apgm" | "projgrad" | "trustregion") {
        return Err(CliError::config(format!(
            "[solver] subsolver must be apgm|projgrad|trustregion, got '{subsolver}'"
        )));
    }
    let init: String = solver.parsed("init", "auto".to_string())?;
    let init = match init.as_str() {
        "auto" => InitKind::Auto,
        "random" => InitKind::Random,
        other => {
            return Err(CliError::config(format!(
                "[solver] init must be auto|random, got '{other}'"
            )))
        }
    };
    let cfg_solver = (
        solver.parsed("beta1", 1.0f64)?,
        solver.parsed("b", 2.0f64)?,
        solver.parsed("sigma1", 1.0f64)?,
        solver.parsed("tau_f", 1e-4f64)?,
        solver.parsed("tau_s", 1e-3f64)?,
        solver.parsed("max_outer", 50usize)?,
        solver.parsed("inner_max_iters", 100_000usize)?,
    );
    solver.finish()?;

    let mut run = SectionReader {
        name: "run".into(),
        entries: sections.remove("run").unwrap_or_default(),
    };
    let seed = run.parsed("seed", 42u64)?;
    let timing = run.parsed("timing", false)?;
    run.finish()?;

    let (beta1, b, sigma1, tau_f, tau_s, max_outer, inner_max_iters) = cfg_solver;
    let config = RunConfig {
        problem: spec,
        beta1,
        b,
        sigma1,
        tau_f,
        tau_s,
        max_outer,
        mode,
        subsolver,
        inner_max_iters,
        init,
        seed: seed_override.unwrap_or(seed),
        timing,
    };
    validate(&config)?;
    Ok(config)
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    if !(cfg.beta1 > 0.0) || !(cfg.b > 1.0) || !(cfg.sigma1 > 0.0) {
        return Err(CliError::config(
            "[solver] requires beta1 > 0, b > 1, sigma1 > 0".into(),
        ));
    }
    if !(cfg.tau_f > 0.0) || !(cfg.tau_s > 0.0) {
        return Err(CliError::config("[solver] thresholds must be positive".into()));
    }
    if cfg.max_outer == 0 || cfg.inner_max_iters == 0 {
        return Err(CliError::config("[solver] iteration caps must be positive".into()));
    }
    if cfg.mode == "second" && cfg.subsolver != "trustregion" {
        return Err(CliError::config(
            "[solver] mode = second requires subsolver = trustregion".into(),
        ));
    }
    match &cfg.problem {
        ProblemSpec::Geneig { n, .. } if *n < 2 => {
            Err(CliError::config("[problem] geneig needs n >= 2".into()))
        }
        ProblemSpec::Bp { d, n, sparsity, .. } if sparsity > n || n > d => Err(CliError::config(
            "[problem] bp needs sparsity <= n <= d".into(),
        )),
        ProblemSpec::Clustering {
            clusters,
            points_per_cluster,
            dim,
            ..
        } if *clusters == 0 || *points_per_cluster == 0 || *dim == 0 => Err(CliError::config(
            "[problem] clustering needs positive counts".into(),
        )),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_geneig_config() {
        let cfg = from_str("[problem]\nkind = geneig\n", None).unwrap();
        assert_eq!(
            cfg.problem,
            ProblemSpec::Geneig {
                n: 50,
                spectrum: "poly".into(),
                p: 1.0
            }
        );
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.tau_f, 1e-4);
    }

    #[test]
    fn rejects_unknown_keys_and_sections() {
        assert!(from_str("[problem]\nkind = geneig\nbogus = 1\n", None).is_err());
        assert!(from_str("[problem]\nkind = geneig\n[extra]\nx = 1\n", None).is_err());
        assert!(from_str("[problem]\nkind = bp\nclusters = 3\n", None).is_err());
    }

    #[test]
    fn rejects_malformed_lines_and_duplicates() {
        assert!(from_str("[problem\nkind = geneig\n", None).is_err());
        assert!(from_str("kind = geneig\n", None).is_err());
        assert!(from_str("[problem]\nkind = geneig\nkind = bp\n", None).is_err());
    }

    #[test]
    fn seed_override_wins() {
        let cfg = from_str("[problem]\nkind = geneig\n[run]\nseed = 7\n", Some(99)).unwrap();
        assert_eq!(cfg.seed, 99);
    }

    #[test]
    fn second_order_requires_trust_region() {
        let text = "[problem]\nkind = geneig\n[solver]\nmode = second\n";
        assert!(from_str(text, None).is_err());
        let text = "[problem]\nkind = geneig\n[solver]\nmode = second\nsubsolver = trustregion\n";
        assert!(from_str(text, None).is_ok());
    }
}
