//! Quantization by message passing and decimation.
//!
//! Each round re-initializes the check-to-variable messages, fixes variables
//! whose value is determined locally, runs message passing, and then fixes the
//! most biased variables. The loop ends when every free variable is fixed.

use serde::{Deserialize, Serialize};

use crate::bp::{argmax, symbol_bias, MessagePassing};
use crate::code::{LdgmCode, QuantizerMap};
use crate::error::{Error, Result};
use crate::graph::LiveGraph;

/// What the removal fractions are taken of.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PercentageBase {
    /// The original number of free variables m.
    Original,
    /// The number of variables still live at the start of the round.
    #[default]
    Remaining,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecimationParams {
    /// Convergence threshold on the largest marginal change.
    pub mp_threshold: f64,
    pub mp_max_iterations: usize,
    /// Variables at or above this bias are removed (up to the maximum fraction).
    pub bias_threshold: f64,
    pub min_fraction: f64,
    pub max_fraction: f64,
    pub w_i: f64,
    pub w_s: f64,
    pub beta: f64,
    pub percentage_base: PercentageBase,
}

impl DecimationParams {
    pub fn new(beta: f64) -> Self {
        DecimationParams {
            mp_threshold: 0.05,
            mp_max_iterations: 100,
            bias_threshold: 0.7,
            min_fraction: 0.01,
            max_fraction: 0.10,
            w_i: 0.05f64.exp(),
            w_s: 0.10f64.exp(),
            beta,
            percentage_base: PercentageBase::Remaining,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.min_fraction > 0.0
            && self.min_fraction <= self.max_fraction
            && self.max_fraction <= 1.0)
        {
            return bad(format!(
                "removal fractions must satisfy 0 < r_min ≤ r_max ≤ 1 (got {} and {})",
                self.min_fraction, self.max_fraction
            ));
        }
        if !(0.0..=1.0).contains(&self.bias_threshold) {
            return bad(format!(
                "bias threshold {} outside [0, 1]",
                self.bias_threshold
            ));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!(
                "beta {} must be finite and non-negative",
                self.beta
            ));
        }
        if !(self.w_i >= 0.0 && self.w_i.is_finite() && self.w_s >= 0.0 && self.w_s.is_finite()) {
            return bad("w_i and w_s must be finite and non-negative".into());
        }
        if self.mp_threshold.is_nan() {
            return bad("MP threshold is NaN".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RoundStats {
    pub live_at_start: usize,
    pub structural_removed: usize,
    pub bias_removed: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct QuantizeStats {
    pub rounds: usize,
    pub bp_iterations: usize,
    pub degeneracies: usize,
    pub unconverged_rounds: usize,
    pub per_round: Vec<RoundStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Quantization {
    pub z: Vec<u32>,
    pub x_hat: Vec<u32>,
    pub distortion: f64,
    pub stats: QuantizeStats,
}

/// Ceil of `fraction·count`, robust to products like 0.1·100 landing a hair
/// above an integer.
fn fraction_count(fraction: f64, count: usize) -> usize {
    (fraction * count as f64 - 1e-9).ceil().max(0.0) as usize
}

pub struct DecimationState<'a> {
    graph: LiveGraph<'a>,
    mp: MessagePassing,
    params: DecimationParams,
    quantizer: QuantizerMap,
    source: Vec<u8>,
    stats: QuantizeStats,
}

impl<'a> DecimationState<'a> {
    pub fn new(
        code: &'a LdgmCode,
        quantizer: QuantizerMap,
        source: &[u8],
        params: DecimationParams,
    ) -> Result<Self> {
        params.validate()?;
        let graph = LiveGraph::new(code, quantizer, source, params.beta, params.w_s)?;
        let mp = MessagePassing::new(&graph, params.w_i);
        Ok(DecimationState {
            graph,
            mp,
            params,
            quantizer,
            source: source.to_vec(),
            stats: QuantizeStats::default(),
        })
    }

    pub fn graph(&self) -> &LiveGraph<'a> {
        &self.graph
    }

    pub fn messages(&self) -> &MessagePassing {
        &self.mp
    }

    pub fn init_messages(&mut self) {
        self.mp.init_check_messages(&self.graph);
    }

    pub fn fix_variable(&mut self, i: usize, v: u32) -> Result<()> {
        self.graph.fix(i, v)
    }

    /// Fixes every live variable that has no edges (to 0) or whose checks all
    /// have a single live edge (to the local MAP value of ∏ψ, ties to the
    /// smaller symbol). Repeats until nothing changes.
    pub fn structural_removals(&mut self) -> Result<usize> {
        let q = self.graph.q();
        let field = self.graph.code().field().clone();
        let mut removed = 0;
        loop {
            let mut decided = Vec::new();
            for i in self.graph.live_vars() {
                let mut neighbors = self.graph.var_neighbors(i).peekable();
                if neighbors.peek().is_none() {
                    decided.push((i, 0));
                    continue;
                }
                if !self
                    .graph
                    .var_neighbors(i)
                    .all(|(a, _)| self.graph.check_degree(a) == 1)
                {
                    continue;
                }
                // ψ only takes the values e^{±β}, so the product is maximised
                // by the value matching the most source bits.
                let score = |v: u32| {
                    self.graph
                        .var_neighbors(i)
                        .filter(|&(a, g)| self.graph.potential(a).matches(field.mul(g, v)))
                        .count()
                };
                let best = if self.params.beta > 0.0 {
                    (0..q).fold(0, |best, v| if score(v) > score(best) { v } else { best })
                } else {
                    0
                };
                decided.push((i, best));
            }
            if decided.is_empty() {
                return Ok(removed);
            }
            for (i, v) in decided {
                self.graph.fix(i, v)?;
                removed += 1;
            }
        }
    }

    pub fn run_message_passing(&mut self) -> crate::bp::MpOutcome {
        self.mp.run(
            &self.graph,
            self.params.mp_threshold,
            self.params.mp_max_iterations,
        )
    }

    /// Fixes the most biased live variables to their most likely symbol:
    /// at least max(1, ⌈r_min·L⌉), then any further with bias ≥ B_m, up to
    /// ⌈r_max·L⌉. Uses the marginals from the last message-passing run.
    pub fn bias_removals(&mut self) -> Result<usize> {
        let mut ranked: Vec<(f64, usize)> = self
            .graph
            .live_vars()
            .map(|i| (symbol_bias(&self.mp.marginal_slice(i)[1..]), i))
            .collect();
        let live = ranked.len();
        if live == 0 {
            return Ok(0);
        }
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let base = match self.params.percentage_base {
            PercentageBase::Remaining => live,
            PercentageBase::Original => self.graph.code().m(),
        };
        let min_count = fraction_count(self.params.min_fraction, base)
            .max(1)
            .min(live);
        let max_count = fraction_count(self.params.max_fraction, base)
            .max(min_count)
            .min(live);
        let mut removed = 0;
        for &(bias, i) in &ranked {
            if removed >= max_count || (removed >= min_count && bias < self.params.bias_threshold) {
                break;
            }
            let value = argmax(&self.mp.marginal_slice(i)[1..]);
            self.graph.fix(i, value)?;
            removed += 1;
        }
        Ok(removed)
    }

    /// One pass of the outer loop. Returns false once every variable is fixed.
    pub fn step(&mut self) -> Result<bool> {
        if self.graph.live_count() == 0 {
            return Ok(false);
        }
        let mut round = RoundStats {
            live_at_start: self.graph.live_count(),
            ..RoundStats::default()
        };
        self.init_messages();
        round.structural_removed = self.structural_removals()?;
        if self.graph.live_count() > 0 {
            let outcome = self.run_message_passing();
            round.iterations = outcome.iterations;
            round.converged = outcome.converged;
            round.bias_removed = self.bias_removals()?;
        } else {
            round.converged = true;
        }
        self.stats.rounds += 1;
        self.stats.bp_iterations += round.iterations;
        if !round.converged {
            self.stats.unconverged_rounds += 1;
        }
        self.stats.per_round.push(round);
        Ok(self.graph.live_count() > 0)
    }

    pub fn finish(mut self) -> Result<Quantization> {
        if self.graph.live_count() > 0 {
            return Err(Error::Internal(format!(
                "{} variables still live",
                self.graph.live_count()
            )));
        }
        let z: Vec<u32> = self.graph.assignment().iter().map(|v| v.unwrap()).collect();
        let reconstruction = self.graph.reconstruction();
        let distortion = evaluate_distortion(&reconstruction, &self.quantizer, &self.source)?;
        let x_hat: Vec<u32> = reconstruction.into_iter().map(|x| x.unwrap()).collect();
        if self.graph.code().encode(&z)? != x_hat {
            return Err(Error::Internal(
                "check offsets disagree with the encoding of z".into(),
            ));
        }
        self.stats.degeneracies = self.mp.degeneracies();
        Ok(Quantization {
            z,
            x_hat,
            distortion,
            stats: self.stats,
        })
    }
}

/// Quantizes the binary source `source` with `code`.
pub fn quantize(
    code: &LdgmCode,
    quantizer: &QuantizerMap,
    source: &[u8],
    params: &DecimationParams,
) -> Result<Quantization> {
    let mut state = DecimationState::new(code, *quantizer, source, params.clone())?;
    while state.step()? {}
    state.finish()
}

/// Fraction of positions where Q(x̂_a) differs from s_a.
pub fn evaluate_distortion(
    x_hat: &[Option<u32>],
    quantizer: &QuantizerMap,
    source: &[u8],
) -> Result<f64> {
    if x_hat.len() != source.len() {
        return Err(Error::Usage(format!(
            "reconstruction has {} symbols, source has {}",
            x_hat.len(),
            source.len()
        )));
    }
    if source.is_empty() {
        return Ok(0.0);
    }
    let mut errors = 0usize;
    for (a, (x, &s)) in x_hat.iter().zip(source).enumerate() {
        let x =
            x.ok_or_else(|| Error::Internal(format!("reconstruction symbol {a} is still free")))?;
        if quantizer.map(x) != s {
            errors += 1;
        }
    }
    Ok(errors as f64 / source.len() as f64)
}
