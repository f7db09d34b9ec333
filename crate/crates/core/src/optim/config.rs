use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stepsizes swept by the benchmark protocol.
pub const STEPSIZE_GRID: [f64; 6] = [0.001, 0.003, 0.01, 0.03, 0.1, 0.3];

/// Width of the moving-average window used by early stopping.
pub const EARLY_STOP_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Vanilla,
    Radam,
    Dadam,
    Em,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Vanilla, Method::Radam, Method::Dadam, Method::Em];

    pub fn name(self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Radam => "radam",
            Method::Dadam => "dadam",
            Method::Em => "em",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}, expected vanilla, radam, dadam or em")))
    }
}

/// A per-iteration value: constant, or a list whose last entry repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Schedule {
    Constant(f64),
    PerIteration(Vec<f64>),
}

impl Schedule {
    /// Value at 1-based iteration `h`.
    pub fn at(&self, h: usize) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::PerIteration(vals) => vals[h.saturating_sub(1).min(vals.len() - 1)],
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            Schedule::Constant(v) => std::slice::from_ref(v),
            Schedule::PerIteration(vals) => vals,
        }
    }
}

impl From<f64> for Schedule {
    fn from(v: f64) -> Self {
        Schedule::Constant(v)
    }
}

/// Which parameter blocks the manifold methods move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Updates {
    pub weights: bool,
    pub locations: bool,
    pub scatter: bool,
}

impl Updates {
    pub const ALL: Updates = Updates { weights: true, locations: true, scatter: true };
    pub const SCATTER_ONLY: Updates = Updates { weights: false, locations: false, scatter: true };
}

impl Default for Updates {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub method: Method,
    pub lr: Schedule,
    pub beta1: Schedule,
    pub beta2: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Projections averaged per iteration.
    pub batch: usize,
    /// Step halvings tried before a scatter update is skipped.
    pub retries: usize,
    /// Added under the square root of the directional accumulator.
    pub eps_adp: f64,
    /// Added to the element-wise root of second moments.
    pub adam_eps: f64,
    pub bias_correction: bool,
    /// Element-wise adaptive moments for the locations in `dadam`.
    pub adaptive_locations: bool,
    /// Divide by second moments in `radam`; off gives momentum descent.
    pub adaptive: bool,
    pub updates: Updates,
    /// Stop when the windowed mean cost improves by less than this.
    pub early_stop: Option<f64>,
    /// Record the NLL every this many iterations; 0 disables.
    pub nll_every: usize,
    /// Fixed projections used for the evaluation cost.
    pub eval_projections: usize,
    /// Record the evaluation cost every this many iterations; 0 keeps only the ends.
    pub eval_every: usize,
    /// EM stops when the NLL changes by less than this.
    pub em_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Dadam,
            lr: Schedule::Constant(0.01),
            beta1: Schedule::Constant(0.9),
            beta2: 0.999,
            max_iters: 2000,
            seed: 0,
            batch: 1,
            retries: 20,
            eps_adp: 1e-12,
            adam_eps: 1e-8,
            bias_correction: false,
            adaptive_locations: false,
            adaptive: true,
            updates: Updates::ALL,
            early_stop: None,
            nll_every: 0,
            eval_projections: 32,
            eval_every: 0,
            em_tol: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn new(method: Method, lr: f64, max_iters: usize) -> Self {
        Self { method, lr: Schedule::Constant(lr), max_iters, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if let Schedule::PerIteration(v) = &self.lr {
            if v.is_empty() {
                return bad("stepsize schedule is empty");
            }
        }
        if let Schedule::PerIteration(v) = &self.beta1 {
            if v.is_empty() {
                return bad("beta1 schedule is empty");
            }
        }
        if self.lr.values().iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return bad("stepsize must be finite and nonnegative");
        }
        if self.beta1.values().iter().any(|b| !(0.0..1.0).contains(b)) {
            return bad("beta1 must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return bad("beta2 must lie in [0, 1)");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if self.batch == 0 {
            return bad("projection batch must be at least 1");
        }
        if self.eval_projections == 0 {
            return bad("eval_projections must be at least 1");
        }
        if !(self.eps_adp > 0.0 && self.adam_eps > 0.0 && self.em_tol >= 0.0) {
            return bad("eps_adp and adam_eps must be positive and em_tol nonnegative");
        }
        if let Some(tol) = self.early_stop {
            if !(tol >= 0.0) {
                return bad("early_stop tolerance must be nonnegative");
            }
        }
        Ok(())
    }
}
