use std::io::Write;

use serde::{Serialize, Serializer};

use crate::error::Result;
use crate::io::ModelDoc;
use crate::mixture::MixtureModel;

use super::config::Method;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One optimiser iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Sliced cost on this iteration's projections, before the update.
    pub cost: Option<f64>,
    /// Cost on the fixed evaluation projections, after the update.
    pub eval_cost: Option<f64>,
    /// Average NLL after the update.
    pub nll: Option<f64>,
    /// Scatter step halvings spent in this iteration.
    pub halvings: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    StepHalved,
    SafeguardExhausted,
    NonFiniteCost,
    ConstraintViolation,
    ComponentReseeded,
    CovarianceFloored,
    EarlyStop,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitEvent {
    pub iteration: usize,
    pub kind: EventKind,
    pub component: Option<usize>,
}

/// Outcome of a fit. Wall-clock times are kept out of the serialised form so
/// that reports are reproducible byte for byte.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub method: Method,
    pub iterations: usize,
    pub failed: bool,
    pub failure: Option<String>,
    pub initial_eval_cost: Option<f64>,
    pub final_eval_cost: Option<f64>,
    pub final_nll: Option<f64>,
    pub constraint_violations: usize,
    pub safeguard_exhaustions: usize,
    pub trace: Vec<TraceRow>,
    pub events: Vec<FitEvent>,
    #[serde(serialize_with = "model_as_doc")]
    pub model: MixtureModel,
    #[serde(skip)]
    pub wall_ms: Vec<f64>,
}

fn model_as_doc<S: Serializer>(model: &MixtureModel, ser: S) -> std::result::Result<S::Ok, S::Error> {
    ModelDoc::from(model).serialize(ser)
}

impl FitReport {
    pub(crate) fn new(method: Method, model: MixtureModel) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            method,
            iterations: 0,
            failed: false,
            failure: None,
            initial_eval_cost: None,
            final_eval_cost: None,
            final_nll: None,
            constraint_violations: 0,
            safeguard_exhaustions: 0,
            trace: Vec::new(),
            events: Vec::new(),
            model,
            wall_ms: Vec::new(),
        }
    }

    pub(crate) fn event(&mut self, iteration: usize, kind: EventKind, component: Option<usize>) {
        self.events.push(FitEvent { iteration, kind, component });
    }

    pub(crate) fn fail(&mut self, reason: impl Into<String>) {
        self.failed = true;
        self.failure.get_or_insert_with(|| reason.into());
    }

    pub fn mean_ms_per_iter(&self) -> f64 {
        if self.wall_ms.is_empty() {
            0.0
        } else {
            self.wall_ms.iter().sum::<f64>() / self.wall_ms.len() as f64
        }
    }

    /// Writes `iteration,cost,eval_cost,nll,wall_ms`, keeping every `every`-th
    /// row and the last one. Missing values are empty fields.
    pub fn write_trace_csv<W: Write>(&self, writer: W, every: usize) -> Result<()> {
        let every = every.max(1);
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["iteration", "cost", "eval_cost", "nll", "wall_ms"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        let last = self.trace.len().saturating_sub(1);
        for (i, row) in self.trace.iter().enumerate() {
            if i % every != 0 && i != last {
                continue;
            }
            let wall = self.wall_ms.get(i).copied();
            wtr.write_record([row.iteration.to_string(), opt(row.cost), opt(row.eval_cost), opt(row.nll), opt(wall)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
