//! The live (partially decimated) factor graph that message passing runs on.
//!
//! Fixing a free variable folds its contribution `g_ia·v` into the offset
//! `c_a` of every neighbouring check and drops the edge. A check whose last
//! edge disappears is retired and its reconstruction symbol is `c_a`.

use crate::code::{LdgmCode, QuantizerMap};
use crate::error::{Error, Result};

/// ψ_a evaluated through the quantizer, shifted by the check offset c_a:
/// `e^β` if Q(c_a + y) = s_a, `e^{−β}` otherwise, and `w_s` at `*`.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckPotential {
    quantizer: QuantizerMap,
    source_bit: u8,
    beta: f64,
    w_s: f64,
    offset: u32,
    table: Vec<f64>,
}

impl CheckPotential {
    pub fn new(quantizer: QuantizerMap, source_bit: u8, beta: f64, w_s: f64) -> Self {
        let mut p = CheckPotential {
            quantizer,
            source_bit,
            beta,
            w_s,
            offset: 0,
            table: Vec::new(),
        };
        p.rebuild();
        p
    }

    fn rebuild(&mut self) {
        let q = self.quantizer.q();
        let (hit, miss) = (self.beta.exp(), (-self.beta).exp());
        self.table = (0..q)
            .map(|y| {
                if self.quantizer.map((self.offset + y) % q) == self.source_bit {
                    hit
                } else {
                    miss
                }
            })
            .collect();
    }

    pub fn offset(&self) -> u32 {
        self.offset
    }

    pub fn source_bit(&self) -> u8 {
        self.source_bit
    }

    pub fn w_s(&self) -> f64 {
        self.w_s
    }

    /// ψ_a(c_a + y) for a field symbol y.
    #[inline]
    pub fn at(&self, y: u32) -> f64 {
        self.table[y as usize]
    }

    /// ψ_a at `None` (the free state `*`) or at a field symbol.
    pub fn evaluate(&self, y: Option<u32>) -> f64 {
        y.map_or(self.w_s, |y| self.at(y))
    }

    /// Whether Q(c_a + y) agrees with the source bit.
    pub fn matches(&self, y: u32) -> bool {
        let q = self.quantizer.q();
        self.quantizer.map((self.offset + y) % q) == self.source_bit
    }

    pub(crate) fn shift(&mut self, delta: u32) {
        self.offset = (self.offset + delta) % self.quantizer.q();
        self.rebuild();
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Edge {
    pub check: usize,
    pub weight: u32,
}

#[derive(Clone, Debug)]
pub struct LiveGraph<'a> {
    code: &'a LdgmCode,
    pub(crate) edges: Vec<Edge>,
    pub(crate) var_edges: Vec<Vec<usize>>,
    pub(crate) check_live: Vec<Vec<usize>>,
    retired: Vec<bool>,
    potentials: Vec<CheckPotential>,
    values: Vec<Option<u32>>,
    live_count: usize,
}

impl<'a> LiveGraph<'a> {
    pub fn new(
        code: &'a LdgmCode,
        quantizer: QuantizerMap,
        source: &[u8],
        beta: f64,
        w_s: f64,
    ) -> Result<Self> {
        if quantizer.q() != code.q() {
            return Err(Error::Usage(format!(
                "quantizer is over GF({}) but the code is over GF({})",
                quantizer.q(),
                code.q()
            )));
        }
        if source.len() != code.n() {
            return Err(Error::Usage(format!(
                "source has {} bits but the code has {} checks",
                source.len(),
                code.n()
            )));
        }
        if let Some(b) = source.iter().find(|&&b| b > 1) {
            return Err(Error::Usage(format!("source symbol {b} is not binary")));
        }
        let mut edges = Vec::with_capacity(code.num_edges());
        let mut var_edges = vec![Vec::new(); code.m()];
        let mut check_live = Vec::with_capacity(code.n());
        for (a, row) in code.checks().iter().enumerate() {
            let mut ids = Vec::with_capacity(row.len());
            for e in row {
                let id = edges.len();
                edges.push(Edge {
                    check: a,
                    weight: e.weight,
                });
                var_edges[e.var].push(id);
                ids.push(id);
            }
            check_live.push(ids);
        }
        let retired = check_live.iter().map(Vec::is_empty).collect();
        let potentials = source
            .iter()
            .map(|&s| CheckPotential::new(quantizer, s, beta, w_s))
            .collect();
        Ok(LiveGraph {
            code,
            edges,
            var_edges,
            check_live,
            retired,
            potentials,
            values: vec![None; code.m()],
            live_count: code.m(),
        })
    }

    pub fn code(&self) -> &'a LdgmCode {
        self.code
    }

    pub fn q(&self) -> u32 {
        self.code.q()
    }

    pub fn live_count(&self) -> usize {
        self.live_count
    }

    pub fn is_live(&self, i: usize) -> bool {
        self.values[i].is_none()
    }

    pub fn live_vars(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.values.len()).filter(move |&i| self.values[i].is_none())
    }

    pub fn potential(&self, a: usize) -> &CheckPotential {
        &self.potentials[a]
    }

    pub fn is_retired(&self, a: usize) -> bool {
        self.retired[a]
    }

    /// Number of live edges at check `a`.
    pub fn check_degree(&self, a: usize) -> usize {
        self.check_live[a].len()
    }

    /// `(check, weight)` for every edge of free variable `i`.
    pub fn var_neighbors(&self, i: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.var_edges[i]
            .iter()
            .map(move |&e| (self.edges[e].check, self.edges[e].weight))
    }

    pub fn assignment(&self) -> &[Option<u32>] {
        &self.values
    }

    /// Fixes z_i = v, folding it into the neighbouring check offsets.
    pub fn fix(&mut self, i: usize, v: u32) -> Result<()> {
        if i >= self.values.len() {
            return Err(Error::Usage(format!("variable {i} out of range")));
        }
        if let Some(old) = self.values[i] {
            return Err(Error::Usage(format!(
                "variable {i} is already fixed to {old}"
            )));
        }
        if v >= self.q() {
            return Err(Error::Usage(format!(
                "value {v} out of range for GF({})",
                self.q()
            )));
        }
        let field = self.code.field();
        for &e in &self.var_edges[i] {
            let Edge { check, weight, .. } = self.edges[e];
            self.potentials[check].shift(field.mul(weight, v));
            let live = &mut self.check_live[check];
            live.retain(|&f| f != e);
            if live.is_empty() {
                self.retired[check] = true;
            }
        }
        self.values[i] = Some(v);
        self.live_count -= 1;
        Ok(())
    }

    /// x̂_a = c_a for retired checks, `None` for checks still connected.
    pub fn reconstruction(&self) -> Vec<Option<u32>> {
        self.potentials
            .iter()
            .zip(&self.retired)
            .map(|(p, &r)| r.then_some(p.offset()))
            .collect()
    }
}
