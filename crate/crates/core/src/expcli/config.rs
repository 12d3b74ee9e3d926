use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::climb::{GradientMode, Schedule};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    SkewNormal,
    Probit,
    StochVol,
    SubsetAvg,
    KernelCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::SkewNormal,
        Experiment::Probit,
        Experiment::StochVol,
        Experiment::SubsetAvg,
        Experiment::KernelCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::SkewNormal => "skewnormal",
            Experiment::Probit => "probit",
            Experiment::StochVol => "stochvol",
            Experiment::SubsetAvg => "subsetavg",
            Experiment::KernelCheck => "kernelcheck",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    MscCis,
    MscCsmc,
    Snis,
    SubsetAvg,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::MscCis => "msc-cis",
            Estimator::MscCsmc => "msc-csmc",
            Estimator::Snis => "snis",
            Estimator::SubsetAvg => "subset-avg",
        }
    }
}

/// Proposal of the CIS kernel in static experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProposalChoice {
    Adaptive,
    Prior,
}

/// Which invariance suites `kernelcheck` runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckTarget {
    Conjugate,
    Lgssm,
    All,
}

macro_rules! named_enum {
    ($ty:ty, $what:literal, $($name:literal => $v:expr),+ $(,)?) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $v { return f.write_str($name); })+
                unreachable!()
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($name => Ok($v),)+
                    other => Err(Error::arg(format!(
                        concat!("unknown ", $what, " {:?}; expected one of: {}"),
                        other,
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

named_enum!(Experiment, "experiment",
    "skewnormal" => Experiment::SkewNormal,
    "probit" => Experiment::Probit,
    "stochvol" => Experiment::StochVol,
    "subsetavg" => Experiment::SubsetAvg,
    "kernelcheck" => Experiment::KernelCheck,
);
named_enum!(Estimator, "estimator",
    "msc-cis" => Estimator::MscCis,
    "msc-csmc" => Estimator::MscCsmc,
    "snis" => Estimator::Snis,
    "subset-avg" => Estimator::SubsetAvg,
);
named_enum!(ProposalChoice, "proposal",
    "adaptive" => ProposalChoice::Adaptive,
    "prior" => ProposalChoice::Prior,
);
named_enum!(CheckTarget, "kernelcheck target",
    "conjugate" => CheckTarget::Conjugate,
    "lgssm" => CheckTarget::Lgssm,
    "all" => CheckTarget::All,
);
named_enum!(GradientMode, "gradient mode",
    "retained" => GradientMode::Retained,
    "rao-blackwell" => GradientMode::RaoBlackwell,
);

/// Everything that determines an experiment's output.
///
/// The file form is one `key = value` per line; lines starting with `#` and
/// blank lines are ignored. [`ExperimentConfig::to_kv_string`] and
/// [`ExperimentConfig::parse_kv`] round-trip exactly: floats are written in
/// their shortest round-tripping decimal form.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub estimator: Estimator,
    /// Particles per kernel sweep (or importance samples per gradient).
    pub samples: usize,
    pub schedule: Schedule,
    pub iters: usize,
    /// Independent runs; for probit, the number of train/test splits.
    pub replications: usize,
    pub seed: u64,
    pub dataset: Option<PathBuf>,
    pub out: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    /// Trace thinning; 0 picks 1-in-10 above 10⁴ iterations and 1 otherwise.
    pub thin: usize,
    /// Fraction of final iterates averaged into the reported parameters.
    pub tail: f64,
    pub proposal: ProposalChoice,
    pub gradient: GradientMode,
    /// Mini-batch size `m` of the subset-average estimator.
    pub subset_size: usize,
    pub target: CheckTarget,
    pub train_fraction: f64,
    /// Length of simulated stochastic-volatility series.
    pub series_len: usize,
    /// Particles for the final log-marginal-likelihood estimates.
    pub eval_samples: usize,
    /// Independent evaluation sweeps, for standard errors.
    pub eval_sweeps: usize,
    /// Stochastic-volatility generator `(σ², φ, μ, β)`.
    pub theta_true: Vec<f64>,
    /// Stochastic-volatility starting point `(σ², φ, μ, β)`.
    pub theta_init: Vec<f64>,
}

const KEYS: [&str; 23] = [
    "experiment",
    "estimator",
    "samples",
    "schedule",
    "iters",
    "replications",
    "seed",
    "dataset",
    "out",
    "workers",
    "thin",
    "tail",
    "proposal",
    "gradient",
    "subset_size",
    "target",
    "train_fraction",
    "series_len",
    "eval_samples",
    "eval_sweeps",
    "theta_true",
    "theta_init",
    // format version written first by `to_kv_string`
    "config_version",
];

impl ExperimentConfig {
    /// Defaults for `experiment`.
    pub fn new(experiment: Experiment) -> Self {
        let (estimator, samples, schedule, iters, replications) = match experiment {
            Experiment::SkewNormal => (
                Estimator::MscCis,
                2,
                Schedule::default_robbins_monro(),
                100_000,
                10,
            ),
            Experiment::Probit => (Estimator::MscCis, 10, Schedule::default_adam(), 2_000, 100),
            Experiment::StochVol => (Estimator::MscCsmc, 10, Schedule::default_adam(), 5_000, 1),
            Experiment::SubsetAvg => (
                Estimator::SubsetAvg,
                10,
                Schedule::default_robbins_monro(),
                100_000,
                10,
            ),
            Experiment::KernelCheck => (
                Estimator::MscCis,
                4,
                Schedule::default_robbins_monro(),
                50_000,
                1,
            ),
        };
        Self {
            experiment,
            estimator,
            samples,
            schedule,
            iters,
            replications,
            seed: 0,
            dataset: None,
            out: PathBuf::from("results").join(experiment.name()),
            workers: 0,
            thin: 0,
            tail: 0.5,
            proposal: ProposalChoice::Adaptive,
            gradient: GradientMode::Retained,
            subset_size: 2,
            target: CheckTarget::All,
            train_fraction: 0.9,
            series_len: 200,
            eval_samples: 10_000,
            eval_sweeps: 10,
            theta_true: vec![0.1, 0.9, 0.0, 0.7],
            theta_init: vec![0.5, 0.5, 0.5, 2.0],
        }
    }

    /// Trace thinning actually applied.
    pub fn effective_thin(&self) -> usize {
        match self.thin {
            0 if self.iters > 10_000 => 10,
            0 => 1,
            t => t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        use Estimator::*;
        use Experiment::*;
        let allowed: &[Estimator] = match self.experiment {
            SkewNormal => &[MscCis, Snis],
            Probit => &[MscCis, Snis],
            StochVol => &[MscCsmc],
            Experiment::SubsetAvg => &[Estimator::SubsetAvg, MscCis, Snis],
            KernelCheck => &[MscCis, MscCsmc, Snis, Estimator::SubsetAvg],
        };
        if !allowed.contains(&self.estimator) {
            return Err(Error::arg(format!(
                "estimator {} is not available for {}",
                self.estimator, self.experiment
            )));
        }
        if self.samples == 0 {
            return Err(Error::arg("--samples must be at least 1"));
        }
        if self.replications == 0 {
            return Err(Error::arg("--replications must be at least 1"));
        }
        if self.experiment == Probit && self.dataset.is_none() {
            return Err(Error::arg("probit needs --dataset <csv>"));
        }
        if !(0.0..=1.0).contains(&self.tail) {
            return Err(Error::arg("tail must lie in [0, 1]"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::arg("train_fraction must lie in (0, 1)"));
        }
        if self.experiment == StochVol {
            if self.theta_true.len() != 4 || self.theta_init.len() != 4 {
                return Err(Error::arg(
                    "theta_true and theta_init take 4 values: sigma2,phi,mu,beta",
                ));
            }
            if self.eval_samples < 2 {
                return Err(Error::arg("eval_samples must be at least 2"));
            }
        }
        Ok(())
    }

    /// Sets one key from its textual value.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "experiment" => self.experiment = v.parse()?,
            "estimator" => self.estimator = v.parse()?,
            "samples" => self.samples = parse_num(key, v)?,
            "schedule" => self.schedule = v.parse()?,
            "iters" => self.iters = parse_num(key, v)?,
            "replications" => self.replications = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "dataset" => self.dataset = (!v.is_empty()).then(|| PathBuf::from(v)),
            "out" => self.out = PathBuf::from(v),
            "workers" => self.workers = parse_num(key, v)?,
            "thin" => self.thin = parse_num(key, v)?,
            "tail" => self.tail = parse_num(key, v)?,
            "proposal" => self.proposal = v.parse()?,
            "gradient" => self.gradient = v.parse()?,
            "subset_size" => self.subset_size = parse_num(key, v)?,
            "target" => self.target = v.parse()?,
            "train_fraction" => self.train_fraction = parse_num(key, v)?,
            "series_len" => self.series_len = parse_num(key, v)?,
            "eval_samples" => self.eval_samples = parse_num(key, v)?,
            "eval_sweeps" => self.eval_sweeps = parse_num(key, v)?,
            "theta_true" => self.theta_true = parse_list(key, v)?,
            "theta_init" => self.theta_init = parse_list(key, v)?,
            "config_version" => {
                if v != "1" {
                    return Err(Error::arg(format!("unsupported config_version {v}")));
                }
            }
            other => {
                return Err(Error::arg(format!(
                    "unknown key {other:?}; known keys: {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            self.apply(k, v).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Parses a complete file; `experiment` must be present, everything else
    /// falls back to that experiment's defaults.
    pub fn parse_kv(text: &str) -> Result<Self> {
        let experiment = text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| {
                let (k, v) = l.trim().split_once('=')?;
                (k.trim() == "experiment").then(|| (i + 1, v.trim().to_string()))
            })
            .last()
            .ok_or_else(|| Error::Parse {
                line: 0,
                message: "missing `experiment` key".into(),
            })?;
        let exp = experiment.1.parse().map_err(|e: Error| Error::Parse {
            line: experiment.0,
            message: e.to_string(),
        })?;
        let mut cfg = Self::new(exp);
        cfg.apply_kv(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_kv(&std::fs::read_to_string(path)?)
    }

    pub fn to_kv_string(&self) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let pairs: [(&str, String); 23] = [
            ("config_version", "1".into()),
            ("experiment", self.experiment.to_string()),
            ("estimator", self.estimator.to_string()),
            ("samples", self.samples.to_string()),
            ("schedule", self.schedule.to_string()),
            ("iters", self.iters.to_string()),
            ("replications", self.replications.to_string()),
            ("seed", self.seed.to_string()),
            (
                "dataset",
                self.dataset
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
            ),
            ("out", self.out.display().to_string()),
            ("workers", self.workers.to_string()),
            ("thin", self.thin.to_string()),
            ("tail", self.tail.to_string()),
            ("proposal", self.proposal.to_string()),
            ("gradient", self.gradient.to_string()),
            ("subset_size", self.subset_size.to_string()),
            ("target", self.target.to_string()),
            ("train_fraction", self.train_fraction.to_string()),
            ("series_len", self.series_len.to_string()),
            ("eval_samples", self.eval_samples.to_string()),
            ("eval_sweeps", self.eval_sweeps.to_string()),
            ("theta_true", list(&self.theta_true)),
            ("theta_init", list(&self.theta_init)),
        ];
        let mut s = String::new();
        for (k, v) in pairs {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    /// The keys that affect results, in file order (excludes `out` and
    /// `workers`, which do not).
    pub fn result_pairs(&self) -> Vec<(String, String)> {
        self.to_kv_string()
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .filter(|(k, _)| !matches!(*k, "out" | "workers" | "config_version"))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::arg(format!("bad value {v:?} for {}", key.trim())))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse_num(key, x.trim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        for e in Experiment::ALL {
            let c = ExperimentConfig::new(e);
            assert_eq!(ExperimentConfig::parse_kv(&c.to_kv_string()).unwrap(), c);
        }
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn awkward_floats_round_trip() {
        let mut c = ExperimentConfig::new(Experiment::StochVol);
        c.schedule = Schedule::robbins_monro(0.1 + 0.2, 1e-300, 2.0f64.sqrt());
        c.tail = 1.0 / 3.0;
        c.theta_init = vec![5e-324, 0.123456789012345678, -0.0, 1e22];
        c.dataset = Some(PathBuf::from("data dir/x#1.csv"));
        assert_eq!(ExperimentConfig::parse_kv(&c.to_kv_string()).unwrap(), c);
    }

    #[test]
    fn comments_and_blank_lines() {
        let c =
            ExperimentConfig::parse_kv("# hi\n\nexperiment = probit\n  # indented\nsamples=7\n")
                .unwrap();
        assert_eq!(c.experiment, Experiment::Probit);
        assert_eq!(c.samples, 7);
        assert_eq!(c.iters, ExperimentConfig::new(Experiment::Probit).iters);
    }

    #[test]
    fn errors_name_the_line() {
        match ExperimentConfig::parse_kv("experiment = skewnormal\nsamples = two\n") {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match ExperimentConfig::parse_kv("experiment = skewnormal\nwat = 1\n") {
            Err(Error::Parse { line: 2, message }) => assert!(message.contains("wat")),
            other => panic!("{other:?}"),
        }
        assert!(ExperimentConfig::parse_kv("samples = 3\n").is_err());
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::new(Experiment::Probit);
        assert!(c.validate().unwrap_err().to_string().contains("--dataset"));
        c.dataset = Some("x.csv".into());
        c.validate().unwrap();
        c.estimator = Estimator::MscCsmc;
        assert!(c.validate().is_err());
    }

    #[test]
    fn thinning_rule() {
        let mut c = ExperimentConfig::new(Experiment::SkewNormal);
        c.iters = 10_000;
        assert_eq!(c.effective_thin(), 1);
        c.iters = 10_001;
        assert_eq!(c.effective_thin(), 10);
        c.thin = 3;
        assert_eq!(c.effective_thin(), 3);
    }
}
