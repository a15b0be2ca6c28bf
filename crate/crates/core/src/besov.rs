//! Besov norms on grid fields and Chemin-Lerner space-time norms on time
//! series of fields.
//!
//! `‖u‖_{B^s_{p,r}} = ‖(2^{js} ‖Δⱼu‖_{L^p})_{j ≥ −1}‖_{l^r}`, with the `j = −1`
//! term carrying its literal weight `2^{−s}`. Vector fields use the additive
//! convention: the norm of `(v₁, v₂)` is the sum of the component norms.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField2};
use crate::filter_bank::{BesovParams, DyadicFilterBank};

/// Time-indexed snapshots with strictly increasing times. Temporal quadrature
/// is trapezoidal on the stored points.
#[derive(Clone, Debug)]
pub struct TimeSeries<T> {
    times: Vec<f64>,
    items: Vec<T>,
}

impl<T> TimeSeries<T> {
    pub fn new() -> Self {
        Self {
            times: Vec::new(),
            items: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, item: T) {
        if let Some(&last) = self.times.last() {
            assert!(t > last, "times must be strictly increasing");
        }
        self.times.push(t);
        self.items.push(item);
    }

    pub fn from_parts(times: Vec<f64>, items: Vec<T>) -> Result<Self> {
        if times.len() != items.len() {
            return Err(Error::InvalidParameter(
                "times and items have different lengths".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "times must be strictly increasing".into(),
            ));
        }
        Ok(Self { times, items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &T)> {
        self.times.iter().copied().zip(self.items.iter())
    }

    pub fn last(&self) -> Option<(f64, &T)> {
        match (self.times.last(), self.items.last()) {
            (Some(&t), Some(item)) => Some((t, item)),
            _ => None,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(f64, &T) -> U) -> TimeSeries<U> {
        TimeSeries {
            times: self.times.clone(),
            items: self.iter().map(|(t, x)| f(t, x)).collect(),
        }
    }
}

impl<T> Default for TimeSeries<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Trapezoidal quadrature of samples `y(t)` over the stored times.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    assert_eq!(times.len(), values.len());
    let mut acc = 0.0;
    for i in 1..times.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
    }
    acc
}

/// Cumulative trapezoid, same length as the input, starting at 0.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..times.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
        out.push(acc);
    }
    out
}

/// Temporal L^q norm of sampled values (trapezoid for finite q, max for ∞).
fn temporal_lq(times: &[f64], values: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        values.iter().fold(0.0f64, |m, &v| m.max(v))
    } else if (q - 1.0).abs() < 1e-14 {
        trapezoid(times, values)
    } else {
        let powered: Vec<f64> = values.iter().map(|&v| v.powf(q)).collect();
        trapezoid(times, &powered).powf(1.0 / q)
    }
}

/// l^r combination of nonnegative terms.
fn lr_sum(terms: &[f64], r: f64) -> f64 {
    if r.is_infinite() {
        terms.iter().fold(0.0f64, |m, &v| m.max(v))
    } else if (r - 1.0).abs() < 1e-14 {
        terms.iter().sum()
    } else {
        terms.iter().map(|&v| v.powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

fn block_lp_norm(bank: &DyadicFilterBank, f: &ScalarField, j: i32, p: f64) -> f64 {
    if (p - 2.0).abs() < 1e-14 {
        // Parseval: no synthesis transform needed.
        let grid = f.grid();
        let measure = grid.measure();
        match j {
            -1 => measure.sqrt() * f.mean().abs(),
            j if j < -1 || j > bank.j_max() => 0.0,
            j => {
                let filt = bank.phi_values(j).expect("in range");
                let s: f64 = f
                    .coefficients()
                    .iter()
                    .zip(filt)
                    .map(|(c, w)| (c * w).norm_sqr())
                    .sum();
                measure.sqrt() * s.sqrt()
            }
        }
    } else {
        bank.dyadic_block(f, j)
            .lp_norm(p)
            .expect("p validated by BesovParams")
    }
}

/// `‖f‖_{B^s_{p,r}}` over the blocks `j = −1 .. j_max`.
pub fn besov_norm(f: &ScalarField, params: &BesovParams, bank: &DyadicFilterBank) -> f64 {
    let terms: Vec<f64> = bank
        .block_range()
        .map(|j| 2f64.powf(params.s * j as f64) * block_lp_norm(bank, f, j, params.p))
        .collect();
    lr_sum(&terms, params.r)
}

/// Vector Besov norm: sum of the component norms.
pub fn besov_norm_vector(v: &VectorField2, params: &BesovParams, bank: &DyadicFilterBank) -> f64 {
    besov_norm(&v.x, params, bank) + besov_norm(&v.y, params, bank)
}

/// Chemin-Lerner norm `‖(2^{js} ‖Δⱼf(t)‖_{L^q_T L^p})ⱼ‖_{l^r}`: the temporal
/// L^q norm is taken blockwise before the l^r sum over blocks.
pub fn chemin_lerner_norm(
    series: &TimeSeries<ScalarField>,
    q: f64,
    params: &BesovParams,
    bank: &DyadicFilterBank,
) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("need q >= 1, got {q}")));
    }
    let times = series.times();
    let terms: Vec<f64> = bank
        .block_range()
        .map(|j| {
            let samples: Vec<f64> = series
                .items()
                .iter()
                .map(|f| block_lp_norm(bank, f, j, params.p))
                .collect();
            2f64.powf(params.s * j as f64) * temporal_lq(times, &samples, q)
        })
        .collect();
    Ok(lr_sum(&terms, params.r))
}

pub fn chemin_lerner_norm_vector(
    series: &TimeSeries<VectorField2>,
    q: f64,
    params: &BesovParams,
    bank: &DyadicFilterBank,
) -> Result<f64> {
    let xs = series.map(|_, v| v.x.clone());
    let ys = series.map(|_, v| v.y.clone());
    Ok(chemin_lerner_norm(&xs, q, params, bank)? + chemin_lerner_norm(&ys, q, params, bank)?)
}

/// Plain Lebesgue-in-time norm of the Besov norm, `‖ t ↦ ‖f(t)‖_{B^s_{p,r}} ‖_{L^q_T}`.
pub fn lebesgue_besov_norm(
    series: &TimeSeries<ScalarField>,
    q: f64,
    params: &BesovParams,
    bank: &DyadicFilterBank,
) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let samples: Vec<f64> = series
        .items()
        .iter()
        .map(|f| besov_norm(f, params, bank))
        .collect();
    Ok(temporal_lq(series.times(), &samples, q))
}

pub fn lebesgue_besov_norm_vector(
    series: &TimeSeries<VectorField2>,
    q: f64,
    params: &BesovParams,
    bank: &DyadicFilterBank,
) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let samples: Vec<f64> = series
        .items()
        .iter()
        .map(|v| besov_norm_vector(v, params, bank))
        .collect();
    Ok(temporal_lq(series.times(), &samples, q))
}
