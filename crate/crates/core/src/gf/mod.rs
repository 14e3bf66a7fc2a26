//! Prime-field arithmetic and cyclic convolution over GF(q).
//!
//! Field elements are represented by their integer label `k` in `[0, q)`, so
//! addition and multiplication are plain modular arithmetic. Only prime orders
//! are supported; extension fields are never needed by the message-passing
//! rules.

pub(crate) mod convolution;

pub use convolution::{cyclic_convolve, cyclic_convolve_dft, ProbVector};

use std::fmt;

use crate::error::{Error, Result};

/// Trial-division primality test; field orders are tiny.
pub fn is_prime(q: u32) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Context for GF(q) with q prime. Holds a precomputed inverse table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeField {
    q: u32,
    inverses: Vec<u32>,
}

impl PrimeField {
    pub fn new(q: u32) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::Field(format!("field order {q} is not prime")));
        }
        // Fermat: a^(q-2) is the inverse of a.
        let inverses = (0..q)
            .map(|a| if a == 0 { 0 } else { pow_mod(a, q - 2, q) })
            .collect();
        Ok(PrimeField { q, inverses })
    }

    #[inline]
    pub fn order(&self) -> u32 {
        self.q
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        (a + b) % self.q
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        (a + self.q - b) % self.q
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.q as u64) as u32
    }

    /// Multiplicative inverse of a nonzero element.
    #[inline]
    pub fn inv(&self, a: u32) -> Option<u32> {
        match a % self.q {
            0 => None,
            a => Some(self.inverses[a as usize]),
        }
    }

    pub fn element(&self, value: u32) -> Result<GfElement> {
        GfElement::new(value, self.q)
    }
}

fn pow_mod(base: u32, mut exp: u32, modulus: u32) -> u32 {
    let m = modulus as u64;
    let mut acc = 1u64 % m;
    let mut b = base as u64 % m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    acc as u32
}

/// An element of GF(q) tagged with its field order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GfElement {
    value: u32,
    order: u32,
}

impl GfElement {
    pub fn new(value: u32, order: u32) -> Result<Self> {
        if !is_prime(order) {
            return Err(Error::Field(format!("field order {order} is not prime")));
        }
        if value >= order {
            return Err(Error::Field(format!(
                "value {value} out of range for GF({order})"
            )));
        }
        Ok(GfElement { value, order })
    }

    pub fn value(self) -> u32 {
        self.value
    }

    pub fn order(self) -> u32 {
        self.order
    }

    fn same_field(self, other: GfElement) -> Result<()> {
        if self.order != other.order {
            return Err(Error::Usage(format!(
                "mismatched field orders {} and {}",
                self.order, other.order
            )));
        }
        Ok(())
    }
}

impl fmt::Display for GfElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

pub fn gf_add(a: GfElement, b: GfElement) -> Result<GfElement> {
    a.same_field(b)?;
    Ok(GfElement {
        value: (a.value + b.value) % a.order,
        order: a.order,
    })
}

pub fn gf_mul(a: GfElement, b: GfElement) -> Result<GfElement> {
    a.same_field(b)?;
    Ok(GfElement {
        value: ((a.value as u64 * b.value as u64) % a.order as u64) as u32,
        order: a.order,
    })
}

pub fn gf_inv(a: GfElement) -> Result<GfElement> {
    if a.value == 0 {
        return Err(Error::Domain("zero has no multiplicative inverse".into()));
    }
    Ok(GfElement {
        value: pow_mod(a.value, a.order - 2, a.order),
        order: a.order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn el(v: u32, q: u32) -> GfElement {
        GfElement::new(v, q).unwrap()
    }

    #[test]
    fn add_examples() {
        assert_eq!(gf_add(el(3, 5), el(4, 5)).unwrap().value(), 2);
        assert_eq!(gf_add(el(1, 2), el(1, 2)).unwrap().value(), 0);
        assert_eq!(gf_add(el(0, 3), el(2, 3)).unwrap().value(), 2);
    }

    #[test]
    fn mul_examples() {
        assert_eq!(gf_mul(el(2, 5), el(3, 5)).unwrap().value(), 1);
        assert_eq!(gf_mul(el(4, 5), el(0, 5)).unwrap().value(), 0);
        assert_eq!(gf_mul(el(2, 3), el(2, 3)).unwrap().value(), 1);
    }

    #[test]
    fn inv_examples() {
        assert_eq!(gf_inv(el(2, 5)).unwrap().value(), 3);
        assert_eq!(gf_inv(el(3, 7)).unwrap().value(), 5);
        assert_eq!(gf_inv(el(1, 2)).unwrap().value(), 1);
        assert!(matches!(gf_inv(el(0, 5)), Err(Error::Domain(_))));
    }

    #[test]
    fn mismatched_orders_rejected() {
        assert!(matches!(gf_add(el(1, 3), el(1, 5)), Err(Error::Usage(_))));
        assert!(matches!(gf_mul(el(1, 3), el(1, 5)), Err(Error::Usage(_))));
    }

    #[test]
    fn composite_orders_rejected() {
        for q in [0, 1, 4, 6, 8, 9, 15] {
            assert!(PrimeField::new(q).is_err(), "q={q}");
            assert!(GfElement::new(0, q).is_err(), "q={q}");
        }
        for q in [2, 3, 5, 7, 11] {
            assert!(PrimeField::new(q).is_ok());
        }
    }

    #[test]
    fn field_table_matches_elements() {
        for q in [2, 3, 5, 7] {
            let f = PrimeField::new(q).unwrap();
            for a in 0..q {
                for b in 0..q {
                    let ea = el(a, q);
                    let eb = el(b, q);
                    assert_eq!(f.add(a, b), gf_add(ea, eb).unwrap().value());
                    assert_eq!(f.mul(a, b), gf_mul(ea, eb).unwrap().value());
                    assert_eq!(f.add(f.sub(a, b), b), a);
                }
                if a != 0 {
                    assert_eq!(f.inv(a), Some(gf_inv(el(a, q)).unwrap().value()));
                }
            }
            assert_eq!(f.inv(0), None);
        }
    }

    proptest! {
        #[test]
        fn inverse_is_involution(qi in 0usize..5, a in 1u32..1000) {
            let q = [2u32, 3, 5, 7, 13][qi];
            let a = el(a % q, q);
            prop_assume!(a.value() != 0);
            let b = gf_inv(a).unwrap();
            prop_assert_eq!(gf_inv(b).unwrap(), a);
            prop_assert_eq!(gf_mul(a, b).unwrap().value(), 1);
        }
    }
}
