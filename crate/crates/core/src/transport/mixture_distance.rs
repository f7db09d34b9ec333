use std::cmp::Ordering;

use crate::elliptical::EllipticalComponent;
use crate::error::{Error, Result};
use crate::mixture::MixtureModel;

use super::elliptical::{w2_elliptical, ScatterWeight};
use super::hungarian;

/// Largest component count for which all permutations are enumerated.
pub const K_EXACT: usize = 8;

/// A component matching and the two parts of its objective.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `permutation[i] = j` matches component `i` of the first model with `j` of the second.
    pub permutation: Vec<usize>,
    /// `(1/k) * sum of matched W2` terms.
    pub cost: f64,
    /// `arccos(sum sqrt(pi_i pi'_j))` over matched pairs, in `[0, pi/2]`.
    pub probability_term: f64,
}

impl TransportPlan {
    pub fn value(&self) -> f64 {
        self.cost + self.probability_term
    }
}

/// Approximate mixture distance: the best one-to-one matching of components
/// under matched W2 plus the arccos weight term.
pub fn d_u(a: &MixtureModel, b: &MixtureModel) -> Result<(f64, TransportPlan)> {
    d_u_weighted(a, b, ScatterWeight::Moment)
}

pub fn d_u_weighted(a: &MixtureModel, b: &MixtureModel, weight: ScatterWeight) -> Result<(f64, TransportPlan)> {
    if a.k() != b.k() || a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "models have (k, m) = ({}, {}) and ({}, {})",
            a.k(),
            a.dim(),
            b.k(),
            b.dim()
        )));
    }
    if a.family() != b.family() {
        return Err(Error::InvalidModel("models use different families".into()));
    }
    let k = a.k();
    let mut w = vec![0.0; k * k];
    for i in 0..k {
        let ci = a.component(i);
        for j in 0..k {
            w[i * k + j] = canonical_w2(&ci, &b.component(j), weight)?;
        }
    }
    let objective = Objective { w: &w, k, sa: a.sqrt_pi().as_slice().to_vec(), sb: b.sqrt_pi().as_slice().to_vec() };

    let permutation = if k <= K_EXACT { objective.enumerate() } else { objective.assign_then_swap() };
    let (cost, probability_term) = objective.parts(&permutation);
    let plan = TransportPlan { permutation, cost, probability_term };
    Ok((plan.value(), plan))
}

/// W2 evaluated with the pair in a fixed order so that swapping arguments is bitwise neutral.
fn canonical_w2(x: &EllipticalComponent, y: &EllipticalComponent, weight: ScatterWeight) -> Result<f64> {
    if x == y {
        return Ok(0.0);
    }
    match component_order(x, y) {
        Ordering::Greater => w2_elliptical(y, x, weight),
        _ => w2_elliptical(x, y, weight),
    }
}

fn component_order(x: &EllipticalComponent, y: &EllipticalComponent) -> Ordering {
    x.mu.iter()
        .chain(x.sigma.iter())
        .zip(y.mu.iter().chain(y.sigma.iter()))
        .map(|(p, q)| p.total_cmp(q))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

struct Objective<'a> {
    w: &'a [f64],
    k: usize,
    sa: Vec<f64>,
    sb: Vec<f64>,
}

impl Objective<'_> {
    fn parts(&self, perm: &[usize]) -> (f64, f64) {
        let k = self.k;
        let cost = sorted_sum(perm.iter().enumerate().map(|(i, &j)| self.w[i * k + j]).collect()) / k as f64;
        let diff = sorted_sum(perm.iter().enumerate().map(|(i, &j)| (self.sa[i] - self.sb[j]).powi(2)).collect());
        let sum = sorted_sum(perm.iter().enumerate().map(|(i, &j)| (self.sa[i] + self.sb[j]).powi(2)).collect());
        // arccos(a.b) for unit vectors, accurate near zero
        (cost, 2.0 * diff.sqrt().atan2(sum.sqrt()))
    }

    fn value(&self, perm: &[usize]) -> f64 {
        let (c, p) = self.parts(perm);
        c + p
    }

    fn enumerate(&self) -> Vec<usize> {
        let k = self.k;
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = perm.clone();
        let mut best_value = self.value(&perm);
        // Heap's algorithm, iterative form
        let mut c = vec![0usize; k];
        let mut i = 1;
        while i < k {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                let v = self.value(&perm);
                if v < best_value {
                    best_value = v;
                    best.copy_from_slice(&perm);
                }
                c[i] += 1;
                i = 1;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        best
    }

    fn assign_then_swap(&self) -> Vec<usize> {
        let (mut perm, _) = hungarian::solve(self.w, self.k);
        let mut current = self.value(&perm);
        loop {
            let mut improved = false;
            for i in 0..self.k {
                for j in (i + 1)..self.k {
                    perm.swap(i, j);
                    let v = self.value(&perm);
                    if v < current {
                        current = v;
                        improved = true;
                    } else {
                        perm.swap(i, j);
                    }
                }
            }
            if !improved {
                return perm;
            }
        }
    }
}
