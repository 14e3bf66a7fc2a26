use std::f64::consts::PI;
use std::ops::Deref;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Outputs below this (relative to the total mass) are treated as a logic
/// error rather than rounding noise.
const NEGATIVE_TOLERANCE: f64 = -1e-9;

/// A length-q vector of non-negative, finite weights (not necessarily normalized).
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Usage("probability vector must be non-empty".into()));
        }
        if let Some(bad) = entries.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::Usage(format!(
                "probability vector entry {bad} is negative or not finite"
            )));
        }
        Ok(ProbVector(entries))
    }

    /// The convolution identity: unit mass on symbol 0.
    pub fn delta(q: usize) -> Self {
        let mut v = vec![0.0; q];
        v[0] = 1.0;
        ProbVector(v)
    }

    pub fn uniform(q: usize) -> Self {
        ProbVector(vec![1.0 / q as f64; q])
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ProbVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_lengths<V: AsRef<[f64]>>(vs: &[V]) -> Result<usize> {
    let q = match vs.first() {
        Some(v) => v.as_ref().len(),
        None => return Err(Error::Usage("cannot convolve an empty list".into())),
    };
    if q == 0 {
        return Err(Error::Usage("cannot convolve zero-length vectors".into()));
    }
    if let Some(v) = vs.iter().find(|v| v.as_ref().len() != q) {
        return Err(Error::Usage(format!(
            "length mismatch in convolution: {} vs {q}",
            v.as_ref().len()
        )));
    }
    Ok(q)
}

/// `out[(j + k) mod q] += a[j] * b[k]`, overwriting `out`.
#[inline]
pub(crate) fn convolve_pair(a: &[f64], b: &[f64], out: &mut [f64]) {
    let q = a.len();
    out.iter_mut().for_each(|x| *x = 0.0);
    for (j, &aj) in a.iter().enumerate() {
        if aj == 0.0 {
            continue;
        }
        for (k, &bk) in b.iter().enumerate() {
            let t = j + k;
            out[if t >= q { t - q } else { t }] += aj * bk;
        }
    }
}

/// Cyclic convolution of all input vectors, folded pairwise with the direct
/// O(q²) rule.
pub fn cyclic_convolve<V: AsRef<[f64]>>(vs: &[V]) -> Result<ProbVector> {
    let q = check_lengths(vs)?;
    let mut acc = vs[0].as_ref().to_vec();
    let mut scratch = vec![0.0; q];
    for v in &vs[1..] {
        convolve_pair(&acc, v.as_ref(), &mut scratch);
        std::mem::swap(&mut acc, &mut scratch);
    }
    clamp_negatives(&mut acc)?;
    Ok(ProbVector(acc))
}

/// Same result as [`cyclic_convolve`], computed as IDFT(∏ DFT(v)).
pub fn cyclic_convolve_dft<V: AsRef<[f64]>>(vs: &[V]) -> Result<ProbVector> {
    let q = check_lengths(vs)?;
    let twiddle: Vec<Complex64> = (0..q)
        .map(|t| Complex64::from_polar(1.0, -2.0 * PI * t as f64 / q as f64))
        .collect();
    let mut spectrum = vec![Complex64::new(1.0, 0.0); q];
    for v in vs {
        let v = v.as_ref();
        for (f, s) in spectrum.iter_mut().enumerate() {
            let coeff: Complex64 = v
                .iter()
                .enumerate()
                .map(|(t, &x)| twiddle[(f * t) % q] * x)
                .sum();
            *s *= coeff;
        }
    }
    let mut out: Vec<f64> = (0..q)
        .map(|t| {
            let sum: Complex64 = spectrum
                .iter()
                .enumerate()
                .map(|(f, s)| s * twiddle[(f * t) % q].conj())
                .sum();
            sum.re / q as f64
        })
        .collect();
    clamp_negatives(&mut out)?;
    Ok(ProbVector(out))
}

fn clamp_negatives(v: &mut [f64]) -> Result<()> {
    let scale = v.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
    for x in v.iter_mut() {
        if *x < NEGATIVE_TOLERANCE * scale {
            return Err(Error::Internal(format!(
                "convolution produced negative mass {x}"
            )));
        }
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn deltas_shift() {
        let out = cyclic_convolve(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(&*out, &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn uniform_is_fixed_point() {
        let v = [0.1, 0.3, 0.05, 0.4, 0.15];
        let out = cyclic_convolve(&[vec![0.2; 5], v.to_vec()]).unwrap();
        assert!(close(&out, &[0.2; 5], 1e-15));
    }

    #[test]
    fn hand_computed_q3() {
        // Σ over (j, k) with j + k ≡ t (mod 3) of a_j·b_k:
        // t=0: a0b0 + a1b2, t=1: a0b1 + a1b0, t=2: a0b2 + a1b1
        let a = vec![0.5, 0.5, 0.0];
        let b = vec![0.5, 0.0, 0.5];
        let out = cyclic_convolve(&[a.clone(), b.clone()]).unwrap();
        assert!(close(&out, &[0.5, 0.25, 0.25], 1e-15));
        let dft = cyclic_convolve_dft(&[a, b]).unwrap();
        assert!(close(&dft, &[0.5, 0.25, 0.25], 1e-12));
    }

    #[test]
    fn single_input_is_identity() {
        let v = vec![0.3, 0.7];
        assert_eq!(&*cyclic_convolve(std::slice::from_ref(&v)).unwrap(), &v[..]);
    }

    #[test]
    fn errors() {
        let empty: [Vec<f64>; 0] = [];
        assert!(matches!(cyclic_convolve(&empty), Err(Error::Usage(_))));
        assert!(matches!(
            cyclic_convolve(&[vec![1.0, 0.0], vec![1.0, 0.0, 0.0]]),
            Err(Error::Usage(_))
        ));
        assert!(ProbVector::new(vec![0.5, -0.1]).is_err());
        assert!(ProbVector::new(vec![0.5, f64::NAN]).is_err());
    }

    #[test]
    fn delta_is_identity() {
        let v = ProbVector::new(vec![0.2, 0.5, 0.3]).unwrap();
        let out = cyclic_convolve(&[ProbVector::delta(3), v.clone()]).unwrap();
        assert_eq!(out, v);
    }

    proptest! {
        #[test]
        fn mass_is_multiplicative(
            qi in 0usize..4,
            raw in proptest::collection::vec(proptest::collection::vec(0.0f64..10.0, 7), 1..5),
        ) {
            let q = [2usize, 3, 5, 7][qi];
            let vs: Vec<Vec<f64>> = raw.into_iter().map(|v| v[..q].to_vec()).collect();
            let expected: f64 = vs.iter().map(|v| v.iter().sum::<f64>()).product();
            let out = cyclic_convolve(&vs).unwrap();
            prop_assert!((out.total() - expected).abs() <= 1e-9 * expected.max(1e-300));
            let dft = cyclic_convolve_dft(&vs).unwrap();
            let scale = expected.max(1.0);
            prop_assert!(close(&out, &dft, 1e-10 * scale));
        }
    }
}
