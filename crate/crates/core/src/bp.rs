//! Reduced message passing over the augmented code space.
//!
//! Every edge message carries `q + 2` weights: the free state `*` (`star`),
//! a non-free value whose enforcing set excludes this edge (`nomatch`), and
//! one weight per field symbol for values enforced through this edge. In the
//! variable-to-check direction the symbol index is the weighted value
//! `g_ia·z_i`; in the check-to-variable direction it is the raw `z_i`.
//!
//! The variable-side rules are differences of products. Each one equals a sum
//! over subsets of incoming edges of at least a given size, so they are
//! evaluated by accumulating the truncated generating polynomial
//! `∏ (μ≠ + μ^(k)·t)` with buckets for `t^0`, `t^1` and `t^{≥2}`. All terms
//! stay non-negative and no cancellation occurs.

use crate::gf::{convolution::convolve_pair, PrimeField};
use crate::graph::{CheckPotential, LiveGraph};

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMessage {
    v: Vec<f64>,
}

impl EdgeMessage {
    /// Uniform message over all `q + 2` components.
    pub fn uniform(q: usize) -> Self {
        EdgeMessage {
            v: vec![1.0 / (q + 2) as f64; q + 2],
        }
    }

    pub fn from_parts(star: f64, nomatch: f64, symbol: &[f64]) -> Self {
        let mut v = Vec::with_capacity(symbol.len() + 2);
        v.push(star);
        v.push(nomatch);
        v.extend_from_slice(symbol);
        EdgeMessage { v }
    }

    pub fn q(&self) -> usize {
        self.v.len() - 2
    }

    #[inline]
    pub fn star(&self) -> f64 {
        self.v[0]
    }

    #[inline]
    pub fn nomatch(&self) -> f64 {
        self.v[1]
    }

    #[inline]
    pub fn symbol(&self) -> &[f64] {
        &self.v[2..]
    }

    pub fn components(&self) -> &[f64] {
        &self.v
    }

    pub fn total(&self) -> f64 {
        self.v.iter().sum()
    }

    pub fn scale(&mut self, c: f64) {
        self.v.iter_mut().for_each(|x| *x *= c);
    }

    /// Clamps negatives and scales to unit sum. A message with no usable mass
    /// is reset to uniform and `false` is returned.
    pub fn normalize(&mut self) -> bool {
        normalize_slice(&mut self.v)
    }
}

fn normalize_slice(v: &mut [f64]) -> bool {
    v.iter_mut().for_each(|x| {
        if *x < 0.0 {
            *x = 0.0
        }
    });
    let total: f64 = v.iter().sum();
    if total > 0.0 && total.is_finite() {
        v.iter_mut().for_each(|x| *x /= total);
        true
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
        false
    }
}

/// Per-variable marginal over GF(q) ∪ {*}.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginal {
    pub p_star: f64,
    pub p_symbol: Vec<f64>,
}

impl Marginal {
    /// Total symbol mass S = 1 − p_star after normalization.
    pub fn symbol_mass(&self) -> f64 {
        self.p_symbol.iter().sum()
    }

    /// Most likely field value, ties to the smaller symbol.
    pub fn argmax_symbol(&self) -> u32 {
        argmax(&self.p_symbol)
    }

    pub fn bias(&self) -> f64 {
        compute_bias(self)
    }
}

pub(crate) fn argmax(v: &[f64]) -> u32 {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best as u32
}

/// √q times the unbiased standard deviation of the symbol marginals:
/// B = S·√((q·Σ(p_k/S)² − 1)/(q − 1)). Zero when S = 0.
pub fn compute_bias(marginal: &Marginal) -> f64 {
    symbol_bias(&marginal.p_symbol)
}

pub(crate) fn symbol_bias(p: &[f64]) -> f64 {
    let q = p.len() as f64;
    let s: f64 = p.iter().sum();
    if s <= 0.0 || q < 2.0 {
        return 0.0;
    }
    // q·Σ(p/S)² − 1 written as q·Σ(p/S − 1/q)² to avoid cancellation
    let spread: f64 = p.iter().map(|x| (x / s - 1.0 / q).powi(2)).sum();
    let radicand = (q * spread / (q - 1.0)).max(0.0);
    (s * radicand.sqrt()).clamp(0.0, 1.0)
}

/// Reusable buffers so the hot loops do not allocate.
#[derive(Clone, Debug)]
pub(crate) struct Workspace {
    c0: Vec<f64>,
    c1: Vec<f64>,
    c2: Vec<f64>,
    lambda: Vec<f64>,
    tmp: Vec<f64>,
}

impl Workspace {
    pub fn new(q: usize) -> Self {
        Workspace {
            c0: vec![0.0; q],
            c1: vec![0.0; q],
            c2: vec![0.0; q],
            lambda: vec![0.0; q],
            tmp: vec![0.0; q],
        }
    }

    /// Fills c0/c1/c2 with the t^0, t^1 and t^{≥2} coefficients of
    /// ∏ (μ≠ + μ^(k)·t) for every k, and returns ∏ μ*.
    fn accumulate<'m>(&mut self, incoming: impl Iterator<Item = &'m EdgeMessage>) -> f64 {
        self.c0.iter_mut().for_each(|x| *x = 1.0);
        self.c1.iter_mut().for_each(|x| *x = 0.0);
        self.c2.iter_mut().for_each(|x| *x = 0.0);
        let mut star = 1.0;
        for msg in incoming {
            star *= msg.star();
            let ne = msg.nomatch();
            for (k, &s) in msg.symbol().iter().enumerate() {
                self.c2[k] = self.c2[k] * (ne + s) + self.c1[k] * s;
                self.c1[k] = self.c1[k] * ne + self.c0[k] * s;
                self.c0[k] *= ne;
            }
        }
        star
    }
}

/// Check-to-variable message when no variable-to-check messages have arrived:
/// (w_s, 0, ψ_a(g_ia·l_k)), normalized.
pub fn init_check_message(
    field: &PrimeField,
    potential: &CheckPotential,
    weight: u32,
) -> EdgeMessage {
    let q = field.order();
    let symbol: Vec<f64> = (0..q).map(|k| potential.at(field.mul(weight, k))).collect();
    let mut msg = EdgeMessage::from_parts(potential.w_s(), 0.0, &symbol);
    msg.normalize();
    msg
}

pub(crate) fn v2c_into<'m>(
    field: &PrimeField,
    weight: u32,
    incoming: impl Iterator<Item = &'m EdgeMessage>,
    w_i: f64,
    ws: &mut Workspace,
    out: &mut EdgeMessage,
) -> bool {
    let q = field.order();
    let star = w_i * ws.accumulate(incoming);
    out.v[0] = star;
    out.v[1] = ws.c2.iter().sum();
    for k in 0..q {
        let l = field.mul(weight, k) as usize;
        out.v[2 + l] = ws.c1[k as usize] + ws.c2[k as usize];
    }
    out.normalize()
}

/// Variable-to-check message from the check-to-variable messages of the
/// other neighbours of the variable. Returns the message and whether it was
/// non-degenerate.
pub fn update_v2c(
    field: &PrimeField,
    weight: u32,
    incoming: &[&EdgeMessage],
    w_i: f64,
) -> (EdgeMessage, bool) {
    let q = field.order() as usize;
    let mut ws = Workspace::new(q);
    let mut out = EdgeMessage::uniform(q);
    let ok = v2c_into(
        field,
        weight,
        incoming.iter().copied(),
        w_i,
        &mut ws,
        &mut out,
    );
    (out, ok)
}

pub(crate) fn c2v_into<'m>(
    field: &PrimeField,
    potential: &CheckPotential,
    weight: u32,
    incoming: impl Iterator<Item = &'m EdgeMessage>,
    ws: &mut Workspace,
    out: &mut EdgeMessage,
) -> bool {
    let q = field.order() as usize;
    ws.lambda.iter_mut().for_each(|x| *x = 0.0);
    ws.lambda[0] = 1.0;
    // all-free product, and the part of it with at least one `*`
    let mut total = 1.0;
    let (mut none_free, mut some_free) = (1.0, 0.0);
    for msg in incoming {
        let (s, ne) = (msg.star(), msg.nomatch());
        total *= s + ne;
        some_free = some_free * (s + ne) + none_free * s;
        none_free *= ne;
        convolve_pair(&ws.lambda, msg.symbol(), &mut ws.tmp);
        std::mem::swap(&mut ws.lambda, &mut ws.tmp);
    }
    let w_s = potential.w_s();
    out.v[0] = w_s * total;
    out.v[1] = w_s * some_free;
    for k in 0..q {
        let base = field.mul(weight, k as u32) as usize;
        let mut acc = 0.0;
        for (t, &lam) in ws.lambda.iter().enumerate() {
            let y = base + t;
            acc += potential.at((if y >= q { y - q } else { y }) as u32) * lam;
        }
        out.v[2 + k] = acc;
    }
    out.normalize()
}

/// Check-to-variable message from the variable-to-check messages of the
/// other neighbours of the check.
pub fn update_c2v(
    field: &PrimeField,
    potential: &CheckPotential,
    weight: u32,
    incoming: &[&EdgeMessage],
) -> (EdgeMessage, bool) {
    let q = field.order() as usize;
    let mut ws = Workspace::new(q);
    let mut out = EdgeMessage::uniform(q);
    let ok = c2v_into(
        field,
        potential,
        weight,
        incoming.iter().copied(),
        &mut ws,
        &mut out,
    );
    (out, ok)
}

/// Writes the normalized `[p*, p^(l_0..l_{q-1})]` into `out`.
pub(crate) fn marginal_into<'m>(
    incoming: impl Iterator<Item = &'m EdgeMessage>,
    w_i: f64,
    ws: &mut Workspace,
    out: &mut [f64],
) -> bool {
    out[0] = w_i * ws.accumulate(incoming);
    out[1..].copy_from_slice(&ws.c2);
    normalize_slice(out)
}

pub fn compute_marginal(incoming: &[&EdgeMessage], w_i: f64) -> (Marginal, bool) {
    let q = incoming.first().map_or(0, |m| m.q());
    let mut ws = Workspace::new(q);
    let mut out = vec![0.0; q + 1];
    let ok = marginal_into(incoming.iter().copied(), w_i, &mut ws, &mut out);
    let marginal = Marginal {
        p_star: out[0],
        p_symbol: out[1..].to_vec(),
    };
    (marginal, ok)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MpOutcome {
    pub iterations: usize,
    pub converged: bool,
}

/// Message store and flooding-schedule driver for one quantization instance.
#[derive(Clone, Debug)]
pub struct MessagePassing {
    q: usize,
    w_i: f64,
    c2v: Vec<EdgeMessage>,
    v2c: Vec<EdgeMessage>,
    marginals: Vec<f64>,
    previous: Vec<f64>,
    ws: Workspace,
    degeneracies: usize,
}

impl MessagePassing {
    pub fn new(graph: &LiveGraph<'_>, w_i: f64) -> Self {
        let q = graph.q() as usize;
        let edges = graph.edges.len();
        let m = graph.code().m();
        MessagePassing {
            q,
            w_i,
            c2v: vec![EdgeMessage::uniform(q); edges],
            v2c: vec![EdgeMessage::uniform(q); edges],
            marginals: vec![0.0; m * (q + 1)],
            previous: vec![0.0; m * (q + 1)],
            ws: Workspace::new(q),
            degeneracies: 0,
        }
    }

    /// Number of messages or marginals that had to be reset to uniform.
    pub fn degeneracies(&self) -> usize {
        self.degeneracies
    }

    pub fn check_to_var(&self, edge: usize) -> &EdgeMessage {
        &self.c2v[edge]
    }

    pub fn var_to_check(&self, edge: usize) -> &EdgeMessage {
        &self.v2c[edge]
    }

    /// Normalized `[p*, p^(l_0), …]` of variable `i` from the last run.
    pub fn marginal_slice(&self, i: usize) -> &[f64] {
        let w = self.q + 1;
        &self.marginals[i * w..(i + 1) * w]
    }

    pub fn marginal(&self, i: usize) -> Marginal {
        let s = self.marginal_slice(i);
        Marginal {
            p_star: s[0],
            p_symbol: s[1..].to_vec(),
        }
    }

    #[cfg(test)]
    pub(crate) fn set_marginal(&mut self, i: usize, values: &[f64]) {
        let w = self.q + 1;
        self.marginals[i * w..(i + 1) * w].copy_from_slice(values);
    }

    pub fn init_check_messages(&mut self, graph: &LiveGraph<'_>) {
        let field = graph.code().field();
        for a in 0..graph.code().n() {
            if graph.is_retired(a) {
                continue;
            }
            let potential = graph.potential(a);
            for &e in &graph.check_live[a] {
                self.c2v[e] = init_check_message(field, potential, graph.edges[e].weight);
            }
        }
    }

    fn update_marginals(&mut self, graph: &LiveGraph<'_>) {
        let w = self.q + 1;
        for i in graph.live_vars() {
            let edges = &graph.var_edges[i];
            let c2v = &self.c2v;
            let out = &mut self.marginals[i * w..(i + 1) * w];
            if !marginal_into(edges.iter().map(|&e| &c2v[e]), self.w_i, &mut self.ws, out) {
                self.degeneracies += 1;
            }
        }
    }

    fn sweep(&mut self, graph: &LiveGraph<'_>) {
        let field = graph.code().field();
        for i in graph.live_vars() {
            let edges = &graph.var_edges[i];
            for &e in edges {
                let c2v = &self.c2v;
                let others = edges.iter().filter(|&&f| f != e).map(|&f| &c2v[f]);
                let weight = graph.edges[e].weight;
                if !v2c_into(
                    field,
                    weight,
                    others,
                    self.w_i,
                    &mut self.ws,
                    &mut self.v2c[e],
                ) {
                    self.degeneracies += 1;
                }
            }
        }
        for a in 0..graph.code().n() {
            if graph.is_retired(a) {
                continue;
            }
            let potential = graph.potential(a);
            let edges = &graph.check_live[a];
            for &e in edges {
                let v2c = &self.v2c;
                let others = edges.iter().filter(|&&f| f != e).map(|&f| &v2c[f]);
                let weight = graph.edges[e].weight;
                if !c2v_into(
                    field,
                    potential,
                    weight,
                    others,
                    &mut self.ws,
                    &mut self.c2v[e],
                ) {
                    self.degeneracies += 1;
                }
            }
        }
    }

    fn max_change(&self, graph: &LiveGraph<'_>) -> f64 {
        let w = self.q + 1;
        graph
            .live_vars()
            .flat_map(|i| {
                let r = i * w..(i + 1) * w;
                self.marginals[r.clone()]
                    .iter()
                    .zip(&self.previous[r])
                    .map(|(a, b)| (a - b).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Flooding schedule from the current check-to-variable messages until
    /// the largest marginal change drops below `threshold` or `max_iterations`
    /// sweeps have run. Marginals are always left up to date.
    pub fn run(
        &mut self,
        graph: &LiveGraph<'_>,
        threshold: f64,
        max_iterations: usize,
    ) -> MpOutcome {
        self.update_marginals(graph);
        for it in 1..=max_iterations {
            self.sweep(graph);
            std::mem::swap(&mut self.marginals, &mut self.previous);
            self.update_marginals(graph);
            if self.max_change(graph) < threshold {
                return MpOutcome {
                    iterations: it,
                    converged: true,
                };
            }
        }
        MpOutcome {
            iterations: max_iterations,
            converged: false,
        }
    }
}
