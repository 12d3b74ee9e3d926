use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    /// `ε_k = a / (k + b)^γ`.
    RobbinsMonro { a: f64, b: f64, gamma: f64 },
    /// Bias-corrected Adam with constant learning rate.
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl Schedule {
    pub const fn robbins_monro(a: f64, b: f64, gamma: f64) -> Self {
        Schedule::RobbinsMonro { a, b, gamma }
    }

    /// `a = 0.5, b = 10, γ = 0.7`.
    pub const fn default_robbins_monro() -> Self {
        Self::robbins_monro(0.5, 10.0, 0.7)
    }

    pub const fn adam(lr: f64) -> Self {
        Schedule::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub const fn default_adam() -> Self {
        Self::adam(0.01)
    }

    /// A schedule whose every increment is zero.
    pub const fn frozen() -> Self {
        Self::robbins_monro(0.0, 0.0, 1.0)
    }

    /// Robbins–Monro step size at iteration `k ≥ 1`; `None` for Adam.
    pub fn rate(&self, k: usize) -> Option<f64> {
        match *self {
            Schedule::RobbinsMonro { a, b, gamma } => Some(a / (k as f64 + b).powf(gamma)),
            Schedule::Adam { .. } => None,
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::RobbinsMonro { a, b, gamma } => write!(f, "rm:{a},{b},{gamma}"),
            Schedule::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => write!(f, "adam:{lr},{beta1},{beta2},{eps}"),
        }
    }
}

/// Parses `rm:a,b,gamma`, `adam:lr,beta1,beta2,eps` or the shorthands
/// `rm` / `adam` / `adam:lr`.
impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::arg(format!("bad number {x:?} in schedule {s:?}")))
                })
                .collect::<Result<_>>()?
        };
        match (kind.trim(), nums.as_slice()) {
            ("rm", []) => Ok(Self::default_robbins_monro()),
            ("rm", [a, b, gamma]) => Ok(Self::robbins_monro(*a, *b, *gamma)),
            ("adam", []) => Ok(Self::default_adam()),
            ("adam", [lr]) => Ok(Self::adam(*lr)),
            ("adam", [lr, beta1, beta2, eps]) => Ok(Schedule::Adam {
                lr: *lr,
                beta1: *beta1,
                beta2: *beta2,
                eps: *eps,
            }),
            _ => Err(Error::arg(format!(
                "unrecognized schedule {s:?}; expected rm:a,b,gamma or adam:lr,beta1,beta2,eps"
            ))),
        }
    }
}

/// Stateful application of a [`Schedule`] to a stream of gradients.
#[derive(Clone, Debug)]
pub struct Stepper {
    schedule: Schedule,
    k: usize,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Stepper {
    pub fn new(schedule: Schedule, dim: usize) -> Self {
        Self {
            schedule,
            k: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
        }
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    /// Increment to add to the iterate for an ascent direction `grad`.
    pub fn step(&mut self, grad: &[f64]) -> Result<Vec<f64>> {
        let k = self.k + 1;
        if grad.len() != self.m.len() {
            return Err(Error::arg(format!(
                "gradient has {} entries, iterate has {}",
                grad.len(),
                self.m.len()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { iteration: k });
        }
        self.k = k;
        match self.schedule {
            Schedule::RobbinsMonro { a, b, gamma } => {
                let eps = a / (k as f64 + b).powf(gamma);
                Ok(grad.iter().map(|g| eps * g).collect())
            }
            Schedule::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                let c1 = 1.0 - beta1.powi(k as i32);
                let c2 = 1.0 - beta2.powi(k as i32);
                Ok(grad
                    .iter()
                    .enumerate()
                    .map(|(i, &g)| {
                        self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                        self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                        lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + eps)
                    })
                    .collect())
            }
        }
    }
}

/// One schedule step; see [`Stepper::step`].
pub fn schedule_step(stepper: &mut Stepper, gradient: &[f64]) -> Result<Vec<f64>> {
    stepper.step(gradient)
}
