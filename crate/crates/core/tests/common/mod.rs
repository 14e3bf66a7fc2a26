#![allow(dead_code)]

use gqldgm::bp::{Marginal, MessagePassing};
use gqldgm::code::{LdgmCode, QuantizerMap};
use gqldgm::graph::LiveGraph;
use gqldgm::oracle::{enumerate_generalized, exact_marginals, OracleParams, DEFAULT_BUDGET};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random bipartite tree with `m` variables and `n` checks and nonzero weights.
pub fn random_tree<R: Rng>(rng: &mut R, q: u32, m: usize, n: usize) -> LdgmCode {
    assert!(m >= 1 && n >= 1);
    // node order: var 0 first, then a check, then the rest shuffled
    let mut order: Vec<bool> = std::iter::repeat_n(true, m - 1)
        .chain(std::iter::repeat_n(false, n - 1))
        .collect();
    order.shuffle(rng);
    let mut vars = vec![0usize];
    let mut checks: Vec<Vec<(usize, u32)>> = vec![vec![(0, rng.gen_range(1..q))]];
    for is_var in order {
        if is_var {
            let i = vars.len();
            let a = rng.gen_range(0..checks.len());
            checks[a].push((i, rng.gen_range(1..q)));
            vars.push(i);
        } else {
            let i = rng.gen_range(0..vars.len());
            checks.push(vec![(i, rng.gen_range(1..q))]);
        }
    }
    checks.shuffle(rng);
    LdgmCode::with_any_degrees(q, m, checks).unwrap()
}

/// Valid threshold for field size `q`.
pub fn random_quantizer<R: Rng>(rng: &mut R, q: u32) -> QuantizerMap {
    QuantizerMap::new(q, rng.gen_range(1..q)).unwrap()
}

pub fn random_source<R: Rng>(rng: &mut R, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.gen_range(0..2u8)).collect()
}

/// Largest absolute difference between converged BP marginals and the
/// enumerated ones.
pub fn tree_marginal_error(
    code: &LdgmCode,
    qm: &QuantizerMap,
    source: &[u8],
    params: OracleParams,
) -> f64 {
    let graph = LiveGraph::new(code, *qm, source, params.beta, params.w_s).unwrap();
    let mut mp = MessagePassing::new(&graph, params.w_i);
    mp.init_check_messages(&graph);
    let outcome = mp.run(&graph, 1e-15, 500);
    assert!(
        outcome.converged,
        "message passing did not settle on a tree"
    );
    let exact =
        exact_marginals(&enumerate_generalized(code, qm, source, params, DEFAULT_BUDGET).unwrap())
            .unwrap();
    (0..code.m())
        .map(|i| marginal_distance(&mp.marginal(i), &exact[i]))
        .fold(0.0, f64::max)
}

pub fn marginal_distance(a: &Marginal, b: &Marginal) -> f64 {
    a.p_symbol
        .iter()
        .zip(&b.p_symbol)
        .map(|(x, y)| (x - y).abs())
        .fold((a.p_star - b.p_star).abs(), f64::max)
}

/// Random tree in which every variable has at least two checks: degree-1
/// variables get extra leaf checks. `None` if that pushes past `max_checks`.
pub fn random_tree_min_degree2<R: Rng>(
    rng: &mut R,
    q: u32,
    m: usize,
    n: usize,
    max_checks: usize,
) -> Option<LdgmCode> {
    let base = random_tree(rng, q, m, n);
    let mut checks: Vec<Vec<(usize, u32)>> = base
        .checks()
        .iter()
        .map(|row| row.iter().map(|e| (e.var, e.weight)).collect())
        .collect();
    for i in 0..m {
        for _ in base.var(i).len()..2 {
            checks.push(vec![(i, rng.gen_range(1..q))]);
        }
    }
    if checks.len() > max_checks {
        return None;
    }
    checks.shuffle(rng);
    Some(LdgmCode::new(q, m, checks).unwrap())
}
