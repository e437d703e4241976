//! Turns a validated configuration into a wired problem plus the metadata
//! the commands need (planted signals, generator labels, instances for
//! closed-form bounds).

use nalgebra::DVector;

use ialm_core::linalg;
use ialm_core::points::PrimalPoint;
use ialm_core::problem::{Problem, ProximalTerm};
use ialm_core::problems::{
    BasisPursuitInstance, BasisPursuitProblem, ClusteringInstance, ClusteringProblem,
    GenEigInstance, GenEigProblem, QuadraticProblem,
};

use crate::config::{InitKind, ProblemSpec, RunConfig};
use crate::CliError;

pub enum BuiltProblem {
    GenEig {
        instance: GenEigInstance,
        problem: GenEigProblem,
    },
    Bp {
        instance: BasisPursuitInstance,
        problem: BasisPursuitProblem,
        planted: DVector<f64>,
    },
    Clustering {
        instance: ClusteringInstance,
        problem: ClusteringProblem,
        labels: Option<Vec<usize>>,
    },
    Quadratic {
        problem: QuadraticProblem,
    },
}

impl BuiltProblem {
    pub fn problem(&self) -> &dyn Problem {
        match self {
            BuiltProblem::GenEig { problem, .. } => problem,
            BuiltProblem::Bp { problem, .. } => problem,
            BuiltProblem::Clustering { problem, .. } => problem,
            BuiltProblem::Quadratic { problem } => problem,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            BuiltProblem::GenEig { .. } => "geneig",
            BuiltProblem::Bp { .. } => "bp",
            BuiltProblem::Clustering { .. } => "clustering",
            BuiltProblem::Quadratic { .. } => "quadratic",
        }
    }

    /// Initial primal point: a standard normal draw scaled to the natural
    /// size of the feasible region and projected onto the constraint-set
    /// domain; basis pursuit defaults to the least-squares decode instead
    /// (random initialization frequently stalls at the zero signal).
    pub fn default_start(&self, seed: u64, init: InitKind) -> Result<PrimalPoint, CliError> {
        let mut rng = linalg::seeded_rng(seed ^ 0x9e37_79b9_7f4a_7c15);
        match self {
            BuiltProblem::Bp { instance, .. } if init == InitKind::Auto => {
                instance.least_squares_init().map_err(CliError::Solver)
            }
            built => {
                let prob = built.problem();
                let d = prob.dim_primal();
                let raw = linalg::random_unit_vector(d, &mut rng);
                let scaled = match built {
                    BuiltProblem::Clustering { instance, .. } => {
                        raw * 0.9 * (instance.cluster_count() as f64).sqrt()
                    }
                    _ => raw,
                };
                let projected = match prob.proximal_term() {
                    ProximalTerm::Indicator(set) => set.project(&scaled),
                    _ => scaled,
                };
                PrimalPoint::new(projected).map_err(CliError::Solver)
            }
        }
    }
}

pub fn build(cfg: &RunConfig) -> Result<BuiltProblem, CliError> {
    match &cfg.problem {
        ProblemSpec::Geneig { n, .. } => {
            let kind = cfg.spectrum_enum().expect("geneig spec");
            let instance = GenEigInstance::generate(*n, kind, cfg.seed).map_err(CliError::Solver)?;
            let problem = instance.build().map_err(CliError::Solver)?;
            Ok(BuiltProblem::GenEig { instance, problem })
        }
        ProblemSpec::Bp {
            d,
            n,
            sparsity,
            noise_sigma,
        } => {
            let (instance, planted) =
                BasisPursuitInstance::generate(*d, *n, *sparsity, *noise_sigma, cfg.seed)
                    .map_err(CliError::Solver)?;
            let problem = instance.build().map_err(CliError::Solver)?;
            Ok(BuiltProblem::Bp {
                instance,
                problem,
                planted,
            })
        }
        ProblemSpec::Clustering {
            clusters,
            points_per_cluster,
            dim,
            separation,
            rank,
        } => {
            let (mut instance, labels) = ClusteringInstance::synthetic_blobs(
                *clusters,
                *points_per_cluster,
                *dim,
                *separation,
                cfg.seed,
            )
            .map_err(CliError::Solver)?;
            if let Some(r) = rank {
                instance = instance.with_rank(*r);
            }
            let problem = instance.build().map_err(CliError::Solver)?;
            Ok(BuiltProblem::Clustering {
                instance,
                problem,
                labels: Some(labels),
            })
        }
        ProblemSpec::ClusteringCsv { path, s, rank } => {
            let instance = ClusteringInstance::from_csv_path(path, *s, *rank)
                .map_err(|e| CliError::config(e.to_string()))?;
            let problem = instance.build().map_err(CliError::Solver)?;
            Ok(BuiltProblem::Clustering {
                instance,
                problem,
                labels: None,
            })
        }
        ProblemSpec::Quadratic { dim, cond } => {
            let problem = if *cond > 1.0 {
                QuadraticProblem::ill_conditioned(*dim, *cond)
            } else {
                QuadraticProblem::identity(*dim)
            }
            .map_err(CliError::Solver)?;
            Ok(BuiltProblem::Quadratic { problem })
        }
    }
}
