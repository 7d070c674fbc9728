//! Exhaustive-enumeration reference computations for small binary machines.
//!
//! Everything here sums `exp(-E(v, h))` over explicit configurations and
//! never uses the logistic closed forms, so it can check them.

use ndarray::{Array1, Array2};

use super::{Rbm, RbmGradient, UnitKind};
use crate::error::{Error, Result};

/// Largest `n_visible + n_hidden` accepted for enumeration.
pub const MAX_UNITS: usize = 20;

fn check_capacity(m: &Rbm) -> Result<()> {
    let total = m.n_visible() + m.n_hidden();
    if total > MAX_UNITS {
        return Err(Error::Capacity(format!(
            "enumeration over {total} units exceeds the limit of {MAX_UNITS}"
        )));
    }
    if m.visible_kind() != UnitKind::Binary {
        return Err(Error::arg("enumeration requires binary visible units"));
    }
    Ok(())
}

fn bits(mask: u32, n: usize) -> Vec<f64> {
    (0..n).map(|i| f64::from((mask >> i) & 1)).collect()
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `-E(v, h)` for every hidden configuration, indexed by hidden bitmask.
fn neg_energies_over_hidden(m: &Rbm, v: &[f64]) -> Vec<f64> {
    let nh = m.n_hidden();
    let visible_term: f64 = v.iter().zip(m.visible_bias()).map(|(x, a)| x * a).sum();
    let field: Vec<f64> = (0..nh)
        .map(|j| m.hidden_bias()[j] + (0..m.n_visible()).map(|i| v[i] * m.weights()[[i, j]]).sum::<f64>())
        .collect();
    (0..1u32 << nh)
        .map(|mask| {
            visible_term
                + (0..nh)
                    .filter(|j| (mask >> j) & 1 == 1)
                    .map(|j| field[j])
                    .sum::<f64>()
        })
        .collect()
}

/// Table of `-E(v, h)` indexed `[v_mask][h_mask]`.
fn neg_energy_table(m: &Rbm) -> Vec<Vec<f64>> {
    (0..1u32 << m.n_visible())
        .map(|vm| neg_energies_over_hidden(m, &bits(vm, m.n_visible())))
        .collect()
}

pub fn log_partition_function(m: &Rbm) -> Result<f64> {
    check_capacity(m)?;
    let table = neg_energy_table(m);
    Ok(log_sum_exp(table.into_iter().flatten()))
}

/// `Z = Σ_{v,h} exp(-E(v, h))`.
pub fn partition_function(m: &Rbm) -> Result<f64> {
    Ok(log_partition_function(m)?.exp())
}

pub fn joint_probability(m: &Rbm, v: &[f64], h: &[f64]) -> Result<f64> {
    let log_z = log_partition_function(m)?;
    Ok((-m.energy(v, h)? - log_z).exp())
}

/// `p(v)` obtained by summing the joint over all hidden configurations.
pub fn marginal_probability(m: &Rbm, v: &[f64]) -> Result<f64> {
    let log_z = log_partition_function(m)?;
    if v.len() != m.n_visible() {
        return Err(Error::arg("visible vector has wrong length"));
    }
    Ok((log_sum_exp(neg_energies_over_hidden(m, v).into_iter()) - log_z).exp())
}

/// Every visible configuration (as a vector) with its marginal probability.
pub fn visible_distribution(m: &Rbm) -> Result<Vec<(Vec<f64>, f64)>> {
    check_capacity(m)?;
    let table = neg_energy_table(m);
    let log_z = log_sum_exp(table.iter().flatten().copied());
    Ok(table
        .iter()
        .enumerate()
        .map(|(vm, row)| (bits(vm as u32, m.n_visible()), (log_sum_exp(row.iter().copied()) - log_z).exp()))
        .collect())
}

/// `p(h_j = 1 | v)` by enumeration over hidden configurations.
pub fn hidden_conditional(m: &Rbm, v: &[f64]) -> Result<Vec<f64>> {
    check_capacity(m)?;
    if v.len() != m.n_visible() {
        return Err(Error::arg("visible vector has wrong length"));
    }
    let neg = neg_energies_over_hidden(m, v);
    let log_norm = log_sum_exp(neg.iter().copied());
    Ok((0..m.n_hidden())
        .map(|j| {
            neg.iter()
                .enumerate()
                .filter(|(mask, _)| (mask >> j) & 1 == 1)
                .map(|(_, e)| (e - log_norm).exp())
                .sum()
        })
        .collect())
}

/// `p(v_i = 1 | h)` by enumeration over visible configurations.
pub fn visible_conditional(m: &Rbm, h: &[f64]) -> Result<Vec<f64>> {
    check_capacity(m)?;
    if h.len() != m.n_hidden() {
        return Err(Error::arg("hidden vector has wrong length"));
    }
    let neg: Vec<f64> = (0..1u32 << m.n_visible())
        .map(|vm| m.energy(&bits(vm, m.n_visible()), h).map(|e| -e))
        .collect::<Result<_>>()?;
    let log_norm = log_sum_exp(neg.iter().copied());
    Ok((0..m.n_visible())
        .map(|i| {
            neg.iter()
                .enumerate()
                .filter(|(mask, _)| (mask >> i) & 1 == 1)
                .map(|(_, e)| (e - log_norm).exp())
                .sum()
        })
        .collect())
}

/// Mean of `ln p(v)` over `data`.
pub fn average_log_likelihood(m: &Rbm, data: &[Vec<f64>]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::arg("no data vectors"));
    }
    let log_z = log_partition_function(m)?;
    let mut total = 0.0;
    for v in data {
        if v.len() != m.n_visible() {
            return Err(Error::arg("visible vector has wrong length"));
        }
        total += log_sum_exp(neg_energies_over_hidden(m, v).into_iter()) - log_z;
    }
    Ok(total / data.len() as f64)
}

/// Exact gradient of the average log-likelihood:
/// data expectation (hidden marginalized by enumeration) minus model
/// expectation (full joint enumeration).
pub fn exact_loglik_grad(m: &Rbm, data: &[Vec<f64>]) -> Result<RbmGradient> {
    check_capacity(m)?;
    if data.is_empty() {
        return Err(Error::arg("no data vectors"));
    }
    let (nv, nh) = (m.n_visible(), m.n_hidden());

    let mut data_w = Array2::<f64>::zeros((nv, nh));
    let mut data_a = Array1::<f64>::zeros(nv);
    let mut data_b = Array1::<f64>::zeros(nh);
    for v in data {
        let ph = hidden_conditional(m, v)?;
        for i in 0..nv {
            data_a[i] += v[i];
            for j in 0..nh {
                data_w[[i, j]] += v[i] * ph[j];
            }
        }
        for j in 0..nh {
            data_b[j] += ph[j];
        }
    }
    let n = data.len() as f64;
    data_w /= n;
    data_a /= n;
    data_b /= n;

    let table = neg_energy_table(m);
    let log_z = log_sum_exp(table.iter().flatten().copied());
    let mut model_w = Array2::<f64>::zeros((nv, nh));
    let mut model_a = Array1::<f64>::zeros(nv);
    let mut model_b = Array1::<f64>::zeros(nh);
    for (vm, row) in table.iter().enumerate() {
        let v = bits(vm as u32, nv);
        for (hm, &ne) in row.iter().enumerate() {
            let p = (ne - log_z).exp();
            let h = bits(hm as u32, nh);
            for i in 0..nv {
                model_a[i] += p * v[i];
                for j in 0..nh {
                    model_w[[i, j]] += p * v[i] * h[j];
                }
            }
            for j in 0..nh {
                model_b[j] += p * h[j];
            }
        }
    }

    Ok(RbmGradient {
        weights: data_w - model_w,
        visible_bias: data_a - model_a,
        hidden_bias: data_b - model_b,
    })
}
