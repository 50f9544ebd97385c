//! JSON experiment configuration and the saddle-avoidance Monte Carlo.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certifier::{certify, CertificateReport, DEFAULT_SAFETY};
use crate::counterexample::{
    h_sweep, jump_events, uniform_grid, ChartPolicy, Jump, SweepSeries, DEFAULT_JUMP_FACTOR,
};
use crate::dynamics::{
    classify_fixed_point, run, IterationConfig, StabilityReport, TrajectoryStatus,
    DEFAULT_CLASSIFIER_TOL,
};
use crate::error::{Error, Result};
use crate::manifolds::{Manifold, ManifoldKind};
use crate::numerics::vector::{axpy, distance, norm};
use crate::objectives::{CriticalLabel, CriticalPoint, Objective, ObjectiveSpec};
use crate::sampling::{gaussian_vec, rng_for, streams};

/// Distance within which a terminus is attributed to a critical point.
pub const ATTRIBUTION_RADIUS: f64 = 1e-3;
pub const DEFAULT_PERTURBATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Certify,
    Classify,
    Avoidance,
    Counterexample,
    Run,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub x: Vec<f64>,
    pub grid: GridSpec,
    #[serde(default = "default_policy")]
    pub policy: ChartPolicy,
    #[serde(default = "default_jump_factor")]
    pub jump_factor: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub report: Option<String>,
    pub csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub command: Option<Command>,
    pub manifold: ManifoldKind,
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub iteration: Option<IterationConfig>,
    #[serde(default)]
    pub seed: u64,
    /// Sample count for constant estimation and verification.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_stable_trials")]
    pub stable_trials: usize,
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    #[serde(default = "default_radius")]
    pub attribution_radius: f64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub force: bool,
    /// Start point for `run`, fixed point for `classify`.
    #[serde(default)]
    pub point: Option<Vec<f64>>,
    #[serde(default)]
    pub counterexample: Option<CounterexampleConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_policy() -> ChartPolicy {
    ChartPolicy::PhiThenSwitch
}
fn default_jump_factor() -> f64 {
    DEFAULT_JUMP_FACTOR
}
fn default_samples() -> usize {
    200
}
fn default_safety() -> f64 {
    DEFAULT_SAFETY
}
fn default_trials() -> usize {
    1000
}
fn default_stable_trials() -> usize {
    100
}
fn default_perturbation() -> f64 {
    DEFAULT_PERTURBATION
}
fn default_radius() -> f64 {
    ATTRIBUTION_RADIUS
}

fn invalid(field: &str, detail: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("{field}: {detail}"))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| invalid("config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Field-level checks beyond the schema; errors name the field.
    pub fn validate(&self) -> Result<()> {
        let m = Manifold::new(self.manifold).map_err(|e| invalid("manifold", e))?;
        let obj = Objective::from_spec(&self.objective).map_err(|e| invalid("objective", e))?;
        if obj.dim() != m.ambient_dim {
            return Err(invalid(
                "objective",
                format!("acts on R^{} but the manifold lives in R^{}", obj.dim(), m.ambient_dim),
            ));
        }
        if let Some(it) = &self.iteration {
            it.validate().map_err(|e| match e {
                Error::InvalidInput(msg) => Error::InvalidInput(format!("iteration.{msg}")),
                other => other,
            })?;
        }
        if self.samples == 0 {
            return Err(invalid("samples", "must be at least 1"));
        }
        if !(self.safety >= 1.0 && self.safety.is_finite()) {
            return Err(invalid("safety", format!("must be >= 1, got {}", self.safety)));
        }
        if !(self.perturbation > 0.0 && self.perturbation.is_finite()) {
            return Err(invalid("perturbation", "must be positive"));
        }
        if !(self.attribution_radius > 0.0) {
            return Err(invalid("attribution_radius", "must be positive"));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers", "must be at least 1"));
        }
        if let Some(p) = &self.point {
            m.check_point(p).map_err(|e| invalid("point", e))?;
        }
        if let Some(c) = &self.counterexample {
            m.check_point(&c.x).map_err(|e| invalid("counterexample.x", e))?;
            if c.grid.points < 4 || !(c.grid.start < c.grid.end) || !(c.grid.start >= 0.0) {
                return Err(invalid(
                    "counterexample.grid",
                    "needs 0 <= start < end and at least 4 points",
                ));
            }
            if !(c.jump_factor > 0.0) {
                return Err(invalid("counterexample.jump_factor", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn manifold(&self) -> Result<Manifold> {
        Manifold::new(self.manifold)
    }

    pub fn objective(&self) -> Result<Objective> {
        Objective::from_spec(&self.objective)
    }

    pub fn iteration(&self) -> Result<IterationConfig> {
        self.iteration
            .ok_or_else(|| invalid("iteration", "required for this command"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminusHistogram {
    pub min: usize,
    pub saddle: usize,
    pub max: usize,
    pub degenerate: usize,
    pub non_converged: usize,
}

impl TerminusHistogram {
    fn record(&mut self, label: Option<CriticalLabel>) {
        match label {
            Some(CriticalLabel::Min) => self.min += 1,
            Some(CriticalLabel::Saddle) => self.saddle += 1,
            Some(CriticalLabel::Max) => self.max += 1,
            Some(CriticalLabel::Degenerate) => self.degenerate += 1,
            None => self.non_converged += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.min + self.saddle + self.max + self.degenerate + self.non_converged
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialCount {
    pub count: usize,
    pub saddle_hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceReport {
    pub n_trials: usize,
    pub histogram: TerminusHistogram,
    pub saddle_hits: usize,
    pub stable_manifold_trials: TrialCount,
    pub perturbed_trials: TrialCount,
    pub step_size: f64,
    #[serde(with = "crate::serde_ext::unbounded")]
    pub alpha_bar: f64,
}

/// Label of the critical point within `radius` of `x`, if the run converged.
pub fn attribute_terminus(
    critical: &[CriticalPoint],
    x: &[f64],
    status: TrajectoryStatus,
    radius: f64,
) -> Option<CriticalLabel> {
    if status != TrajectoryStatus::Converged {
        return None;
    }
    critical
        .iter()
        .map(|cp| (distance(&cp.point, x), cp.label))
        .filter(|(d, _)| *d <= radius)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, label)| label)
}

/// Inputs of the avoidance experiment, separated from the JSON config so
/// tests can drive it directly.
#[derive(Debug, Clone, PartialEq)]
pub struct AvoidanceSetup {
    pub iteration: IterationConfig,
    pub seed: u64,
    pub samples: usize,
    pub safety: f64,
    pub trials: usize,
    pub stable_trials: usize,
    pub perturbation: f64,
    pub attribution_radius: f64,
    pub workers: Option<usize>,
    pub force: bool,
}

impl AvoidanceSetup {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            iteration: cfg.iteration()?,
            seed: cfg.seed,
            samples: cfg.samples,
            safety: cfg.safety,
            trials: cfg.trials,
            stable_trials: cfg.stable_trials,
            perturbation: cfg.perturbation,
            attribution_radius: cfg.attribution_radius,
            workers: cfg.workers,
            force: cfg.force,
        })
    }
}

/// Runs `f` on a pool of `workers` threads, or the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidInput(format!("workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Certifies the step size, then runs random, stable-manifold and perturbed
/// trials. Trial `i` of each family draws from its own stream, so the
/// report does not depend on the worker count.
pub fn monte_carlo_avoidance(
    m: &Manifold,
    obj: &Objective,
    setup: &AvoidanceSetup,
) -> Result<AvoidanceReport> {
    setup.iteration.validate()?;
    let alpha = setup.iteration.step_size;
    let critical = obj.critical_points(m)?;

    with_workers(setup.workers, || {
        let cert = certify(m, obj, Some(alpha), setup.samples, setup.safety, setup.seed)?;
        let alpha_bar = cert.alpha_bar;
        if !(alpha < alpha_bar) && !setup.force {
            return Err(Error::Uncertified { alpha, alpha_bar });
        }

        let terminus_label = |x0: Vec<f64>| -> Result<Option<CriticalLabel>> {
            let traj = run(m, obj, &x0, &setup.iteration)?;
            Ok(attribute_terminus(
                &critical,
                &traj.terminus,
                traj.status,
                setup.attribution_radius,
            ))
        };

        let labels: Vec<Option<CriticalLabel>> = (0..setup.trials)
            .into_par_iter()
            .map(|i| terminus_label(m.sample_uniform(&mut rng_for(setup.seed, streams::TRIALS + i as u64))))
            .collect::<Result<_>>()?;
        let mut histogram = TerminusHistogram::default();
        labels.iter().for_each(|l| histogram.record(*l));

        let (stable, perturbed) = match stable_manifold_geometry(&critical) {
            Some(geometry) => {
                let inits: Vec<Vec<f64>> = (0..setup.stable_trials)
                    .map(|i| {
                        let mut rng = rng_for(setup.seed, streams::STABLE_TRIALS + i as u64);
                        geometry.sample(m, &mut rng)
                    })
                    .collect::<Result<_>>()?;
                let hits = |inits: Vec<Vec<f64>>| -> Result<TrialCount> {
                    let count = inits.len();
                    let labels: Vec<Option<CriticalLabel>> =
                        inits.into_par_iter().map(terminus_label).collect::<Result<_>>()?;
                    let saddle_hits = labels
                        .iter()
                        .filter(|l| **l == Some(CriticalLabel::Saddle))
                        .count();
                    Ok(TrialCount { count, saddle_hits })
                };
                let shifted: Vec<Vec<f64>> = inits
                    .iter()
                    .map(|x| m.project(&axpy(x, setup.perturbation, &geometry.unstable)))
                    .collect::<Result<_>>()?;
                (hits(inits)?, hits(shifted)?)
            }
            None => {
                let empty = TrialCount { count: 0, saddle_hits: 0 };
                (empty, empty)
            }
        };

        Ok(AvoidanceReport {
            n_trials: setup.trials,
            saddle_hits: histogram.saddle,
            histogram,
            stable_manifold_trials: stable,
            perturbed_trials: perturbed,
            step_size: alpha,
            alpha_bar,
        })
    })?
}

/// Stable directions of the lowest saddle and its steepest unstable
/// direction, for a Rayleigh quotient on the sphere.
struct StableManifold {
    stable: Vec<Vec<f64>>,
    unstable: Vec<f64>,
}

impl StableManifold {
    /// Normalized Gaussian combination of the stable directions.
    fn sample(&self, m: &Manifold, rng: &mut crate::sampling::Rng) -> Result<Vec<f64>> {
        loop {
            let coeffs = gaussian_vec(rng, self.stable.len());
            let mut x = vec![0.0; m.ambient_dim];
            for (c, v) in coeffs.iter().zip(&self.stable) {
                x = axpy(&x, *c, v);
            }
            if norm(&x) > 1e-8 {
                return m.project(&x);
            }
        }
    }
}

fn stable_manifold_geometry(critical: &[CriticalPoint]) -> Option<StableManifold> {
    let saddle = critical.iter().find(|cp| cp.label == CriticalLabel::Saddle)?;
    // one representative of each ± pair
    let directions: Vec<&CriticalPoint> = critical
        .iter()
        .filter(|cp| {
            let pivot = cp.point.iter().fold(0.0_f64, |p, &v| if v.abs() > p.abs() { v } else { p });
            pivot > 0.0
        })
        .collect();
    let stable = directions
        .iter()
        .filter(|cp| cp.eigenvalue >= saddle.eigenvalue)
        .map(|cp| cp.point.clone())
        .collect();
    let unstable = directions
        .iter()
        .min_by(|a, b| a.eigenvalue.total_cmp(&b.eigenvalue))?
        .point
        .clone();
    Some(StableManifold { stable, unstable })
}

/// `certify` with the config's sample count, safety and seed, at the
/// configured step size or `ᾱ / 2`.
pub fn certify_config(cfg: &ExperimentConfig) -> Result<CertificateReport> {
    let m = cfg.manifold()?;
    let obj = cfg.objective()?;
    let alpha = cfg.iteration.map(|it| it.step_size);
    with_workers(cfg.workers, || certify(&m, &obj, alpha, cfg.samples, cfg.safety, cfg.seed))?
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedPoint {
    /// Hessian label of the analytic critical point, when one was classified.
    pub critical_label: Option<CriticalLabel>,
    #[serde(flatten)]
    pub stability: StabilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub step_size: f64,
    pub fixed_points: Vec<ClassifiedPoint>,
}

/// Classifies `cfg.point`, or every analytic critical point when absent.
pub fn classify_config(cfg: &ExperimentConfig) -> Result<ClassificationReport> {
    let m = cfg.manifold()?;
    let obj = cfg.objective()?;
    let alpha = cfg.iteration()?.step_size;
    let targets: Vec<(Option<CriticalLabel>, Vec<f64>)> = match &cfg.point {
        Some(p) => vec![(None, p.clone())],
        None => obj
            .critical_points(&m)?
            .into_iter()
            .map(|cp| (Some(cp.label), cp.point))
            .collect(),
    };
    let fixed_points = targets
        .into_iter()
        .map(|(critical_label, x)| {
            let stability = classify_fixed_point(&m, &obj, &x, alpha, DEFAULT_CLASSIFIER_TOL)?;
            Ok(ClassifiedPoint {
                critical_label,
                stability,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ClassificationReport {
        step_size: alpha,
        fixed_points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub alpha0: Option<f64>,
    pub jump_factor: f64,
    /// Largest jump event.
    pub jump: Option<Jump>,
    pub jump_count: usize,
    pub series: SweepSeries,
}

pub fn counterexample_config(cfg: &ExperimentConfig) -> Result<CounterexampleReport> {
    let c = cfg
        .counterexample
        .as_ref()
        .ok_or_else(|| invalid("counterexample", "required for this command"))?;
    let m = cfg.manifold()?;
    let obj = cfg.objective()?;
    let grid = uniform_grid(c.grid.start, c.grid.end, c.grid.points)?;
    let series = with_workers(cfg.workers, || h_sweep(&m, &obj, &c.x, &grid, c.policy))??;
    let events = jump_events(&series, c.jump_factor)?;
    Ok(CounterexampleReport {
        alpha0: series.alpha0,
        jump_factor: c.jump_factor,
        jump: events.iter().copied().max_by(|a, b| a.magnitude.total_cmp(&b.magnitude)),
        jump_count: events.len(),
        series,
    })
}
