//! Exhaustive reference computations for tiny codes.
//!
//! Generalized codewords are enumerated over the free variables only: `x` is
//! a function of `z` on the augmented alphabet, and each `(x, z)` pair is
//! counted once with weight `w_i^{N*(z)} · w_s^{N*(x)} · e^{−2β·d_H(Q(x), s)}`,
//! where `*` sits at distance ½ from either bit.

use crate::bp::Marginal;
use crate::code::{LdgmCode, QuantizerMap};
use crate::error::{Error, Result};

pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// A tuple over GF(q) ∪ {*}; `None` is `*`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneralizedAssignment {
    pub z: Vec<Option<u32>>,
    pub x: Vec<Option<u32>>,
}

impl GeneralizedAssignment {
    /// Derives `x`: a check is `*` as soon as one of its variables is.
    pub fn from_free(code: &LdgmCode, z: Vec<Option<u32>>) -> Self {
        let f = code.field();
        let x = code
            .checks()
            .iter()
            .map(|row| {
                row.iter()
                    .try_fold(0, |acc, e| z[e.var].map(|v| f.add(acc, f.mul(e.weight, v))))
            })
            .collect();
        GeneralizedAssignment { z, x }
    }

    /// Checks of N(i) that are exactly satisfied, for a non-free z_i.
    pub fn enforcing_set(&self, code: &LdgmCode, i: usize) -> Vec<usize> {
        code.var(i)
            .iter()
            .map(|e| e.check)
            .filter(|&a| self.x[a].is_some())
            .collect()
    }

    /// Both augmentation conditions: checks are consistent with `z`, and every
    /// non-free variable is enforced by at least two satisfied checks.
    pub fn is_valid(&self, code: &LdgmCode) -> bool {
        if self.z.len() != code.m() || self.x.len() != code.n() {
            return false;
        }
        let f = code.field();
        let consistent = code.checks().iter().zip(&self.x).all(|(row, &x)| {
            let any_free = row.iter().any(|e| self.z[e.var].is_none());
            match x {
                None => any_free,
                Some(v) => {
                    !any_free
                        && row.iter().fold(0, |acc, e| {
                            f.add(acc, f.mul(e.weight, self.z[e.var].unwrap()))
                        }) == v
                }
            }
        });
        consistent
            && (0..code.m())
                .filter(|&i| self.z[i].is_some())
                .all(|i| self.enforcing_set(code, i).len() >= 2)
    }

    /// Hamming distance between Q(x) and s, with `*` counting ½.
    pub fn distance(&self, quantizer: &QuantizerMap, source: &[u8]) -> f64 {
        self.x
            .iter()
            .zip(source)
            .map(|(x, &s)| match x {
                None => 0.5,
                Some(v) => f64::from(quantizer.map(*v) != s),
            })
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct WeightedEnumeration {
    pub q: u32,
    pub entries: Vec<(GeneralizedAssignment, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleParams {
    pub beta: f64,
    pub w_s: f64,
    pub w_i: f64,
}

fn check_budget(states: f64, budget: u64) -> Result<()> {
    if states > budget as f64 {
        return Err(Error::Budget { states, budget });
    }
    Ok(())
}

fn check_source(code: &LdgmCode, quantizer: &QuantizerMap, source: &[u8]) -> Result<()> {
    if quantizer.q() != code.q() {
        return Err(Error::Usage(
            "quantizer and code use different fields".into(),
        ));
    }
    if source.len() != code.n() {
        return Err(Error::Usage(format!(
            "source has {} bits, code has {} checks",
            source.len(),
            code.n()
        )));
    }
    Ok(())
}

/// Odometer step with the last position least significant, so iteration is
/// lexicographic. Returns false after wrapping around.
fn advance(digits: &mut [u32], radix: u32) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < radix {
            return true;
        }
        *d = 0;
    }
    false
}

/// All generalized codewords with their unnormalized probabilities.
pub fn enumerate_generalized(
    code: &LdgmCode,
    quantizer: &QuantizerMap,
    source: &[u8],
    params: OracleParams,
    budget: u64,
) -> Result<WeightedEnumeration> {
    check_source(code, quantizer, source)?;
    let q = code.q();
    check_budget((q as f64 + 1.0).powi(code.m() as i32), budget)?;
    let mut digits = vec![0u32; code.m()];
    let mut entries = Vec::new();
    loop {
        // digit q encodes `*`
        let z = digits.iter().map(|&d| (d < q).then_some(d)).collect();
        let a = GeneralizedAssignment::from_free(code, z);
        if a.is_valid(code) {
            let free_z = a.z.iter().filter(|v| v.is_none()).count() as i32;
            let free_x = a.x.iter().filter(|v| v.is_none()).count() as i32;
            let weight = params.w_i.powi(free_z)
                * params.w_s.powi(free_x)
                * (-2.0 * params.beta * a.distance(quantizer, source)).exp();
            entries.push((a, weight));
        }
        if !advance(&mut digits, q + 1) {
            break;
        }
    }
    Ok(WeightedEnumeration { q, entries })
}

/// Per-variable marginals over GF(q) ∪ {*} of the enumerated distribution.
pub fn exact_marginals(enumeration: &WeightedEnumeration) -> Result<Vec<Marginal>> {
    let q = enumeration.q as usize;
    let m = enumeration.entries.first().map_or(0, |(a, _)| a.z.len());
    let mut acc = vec![vec![0.0; q + 1]; m];
    let mut total = 0.0;
    for (a, w) in &enumeration.entries {
        total += w;
        for (i, v) in a.z.iter().enumerate() {
            acc[i][v.map_or(0, |v| v as usize + 1)] += w;
        }
    }
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Domain("enumeration has zero total weight".into()));
    }
    Ok(acc
        .into_iter()
        .map(|row| Marginal {
            p_star: row[0] / total,
            p_symbol: row[1..].iter().map(|w| w / total).collect(),
        })
        .collect())
}

/// Exhaustive minimum of d_H(Q(Gz), s)/n over all z ∈ GF(q)^m. Ties go to
/// the lexicographically smallest z.
pub fn optimal_distortion(
    code: &LdgmCode,
    quantizer: &QuantizerMap,
    source: &[u8],
    budget: u64,
) -> Result<(Vec<u32>, f64)> {
    check_source(code, quantizer, source)?;
    let q = code.q();
    check_budget((q as f64).powi(code.m() as i32), budget)?;
    let mut z = vec![0u32; code.m()];
    let mut best = (z.clone(), usize::MAX);
    loop {
        let errors = code
            .encode(&z)?
            .iter()
            .zip(source)
            .filter(|(&x, &s)| quantizer.map(x) != s)
            .count();
        if errors < best.1 {
            best = (z.clone(), errors);
        }
        if !advance(&mut z, q) {
            break;
        }
    }
    let n = code.n().max(1) as f64;
    Ok((best.0, best.1 as f64 / n))
}
