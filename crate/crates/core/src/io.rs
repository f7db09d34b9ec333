//! Dataset CSV and model JSON formats.
//!
//! Datasets are headerless comma-separated rows of decimal floats. Models are
//! JSON documents `{schema_version, family, params, k, m, pi, mu, sigma}` with
//! every float written to 17 significant digits.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::elliptical::{family_from_parts, EllipticalFamily};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mixture::MixtureModel;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Reads a headerless CSV of floats into an `n x m` matrix.
pub fn read_samples_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0usize;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::InvalidDataset(format!(
                    "row {} has {} fields, expected {w}",
                    line + 1,
                    record.len()
                )))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::InvalidDataset(format!("row {}: `{field}` is not a number", line + 1)))?;
            if !v.is_finite() {
                return Err(Error::InvalidDataset(format!("row {}: non-finite value", line + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| Error::InvalidDataset("no rows".into()))?;
    Ok(DMatrix::from_row_slice(rows, width, &values))
}

/// Writes rows as shortest round-trip decimal floats.
pub fn write_samples_csv<W: Write>(writer: W, samples: &DMatrix<f64>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in samples.row_iter() {
        wtr.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Serialised form of a [`MixtureModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub schema_version: u32,
    pub family: String,
    pub params: BTreeMap<String, f64>,
    pub k: usize,
    pub m: usize,
    pub pi: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<Vec<f64>>>,
}

/// JSON formatter printing floats with 17 significant digits.
pub struct PreciseFloats;

impl serde_json::ser::Formatter for PreciseFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Serialises any value with [`PreciseFloats`] and two-space indentation.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PrettyPrecise::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Pretty printing with [`PreciseFloats`] for the numbers.
#[derive(Default)]
pub struct PrettyPrecise {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

macro_rules! delegate {
    ($($name:ident $(, $arg:ident: $ty:ty)*;)*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> std::io::Result<()> {
            self.inner.$name(writer $(, $arg)*)
        })*
    };
}

impl serde_json::ser::Formatter for PrettyPrecise {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        PreciseFloats.write_f64(writer, value)
    }

    delegate! {
        begin_array;
        end_array;
        begin_array_value, first: bool;
        end_array_value;
        begin_object;
        end_object;
        begin_object_key, first: bool;
        begin_object_value;
        end_object_value;
    }
}

impl From<&MixtureModel> for ModelDoc {
    fn from(model: &MixtureModel) -> Self {
        let kind = model.family().kind();
        ModelDoc {
            schema_version: MODEL_SCHEMA_VERSION,
            family: kind.name().to_string(),
            params: kind.params().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            k: model.k(),
            m: model.dim(),
            pi: model.pi().to_vec(),
            mu: model.mu().iter().map(|v| v.iter().copied().collect()).collect(),
            sigma: model.sigma().iter().map(|s| s.row_iter().map(|r| r.iter().copied().collect()).collect()).collect(),
        }
    }
}

pub fn model_to_json(model: &MixtureModel) -> Result<String> {
    to_json_string(&ModelDoc::from(model))
}

pub fn model_from_json(text: &str) -> Result<MixtureModel> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    doc.into_model()
}

impl ModelDoc {
    /// Validates the document and builds the model.
    pub fn into_model(self) -> Result<MixtureModel> {
        let doc = self;
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::InvalidModel(format!("unsupported schema_version {}", doc.schema_version)));
        }
        let kind = family_from_parts(&doc.family, doc.params)?;
        let (k, m) = (doc.k, doc.m);
        if doc.pi.len() != k || doc.mu.len() != k || doc.sigma.len() != k {
            return Err(Error::InvalidModel(format!("arrays do not have k = {k} entries")));
        }
        let family = EllipticalFamily::new(kind, m)?;
        let mut mu = Vec::with_capacity(k);
        let mut sigma = Vec::with_capacity(k);
        for (i, (mu_i, sigma_i)) in doc.mu.iter().zip(&doc.sigma).enumerate() {
            if mu_i.len() != m || sigma_i.len() != m || sigma_i.iter().any(|r| r.len() != m) {
                return Err(Error::DimensionMismatch(format!("component {i} does not have dimension {m}")));
            }
            mu.push(DVector::from_column_slice(mu_i));
            let s = DMatrix::from_fn(m, m, |r, c| sigma_i[r][c]);
            if !linalg::is_symmetric(&s) {
                return Err(Error::InvalidModel(format!("component {i} scatter is not symmetric")));
            }
            sigma.push(linalg::symmetrize(&s));
        }
        // tolerate rounding in hand-written weights by renormalising a nearly unit sum
        let total: f64 = doc.pi.iter().sum();
        let pi = if (total - 1.0).abs() <= 1e-9 { doc.pi.iter().map(|p| p / total).collect() } else { doc.pi };
        MixtureModel::new(family, pi, mu, sigma)
    }
}
