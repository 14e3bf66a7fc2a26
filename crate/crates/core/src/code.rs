//! GF(q)-LDGM codes: the weighted bipartite graph between `n` checks and `m`
//! free variables, the threshold quantizer that maps GF(q) onto GF(2), random
//! regular construction, and the JSON code-file format.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::PrimeField;

pub const CODE_FORMAT: &str = "gqldgm-code-v1";

/// One edge as seen from a check: the free variable and the edge weight g_ia.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckEdge {
    pub var: usize,
    pub weight: u32,
}

/// One edge as seen from a free variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarEdge {
    pub check: usize,
    pub weight: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LdgmCode {
    field: PrimeField,
    m: usize,
    checks: Vec<Vec<CheckEdge>>,
    vars: Vec<Vec<VarEdge>>,
}

impl LdgmCode {
    /// Builds a code from per-check `(variable, weight)` lists. Every free
    /// variable must have at least two neighbouring checks.
    pub fn new(q: u32, m: usize, checks: Vec<Vec<(usize, u32)>>) -> Result<Self> {
        let code = Self::with_any_degrees(q, m, checks)?;
        if let Some((i, adj)) = code.vars.iter().enumerate().find(|(_, adj)| adj.len() < 2) {
            return Err(Error::Config(format!(
                "free variable {i} has degree {}, at least 2 is required",
                adj.len()
            )));
        }
        Ok(code)
    }

    /// Like [`LdgmCode::new`] but accepts free variables of degree 0 or 1.
    /// Such graphs arise as sub-problems and in tests of the structural
    /// removal step.
    pub fn with_any_degrees(q: u32, m: usize, checks: Vec<Vec<(usize, u32)>>) -> Result<Self> {
        let field = PrimeField::new(q)?;
        let mut vars = vec![Vec::new(); m];
        let mut built = Vec::with_capacity(checks.len());
        for (a, row) in checks.into_iter().enumerate() {
            let mut edges = Vec::with_capacity(row.len());
            for (pos, (var, weight)) in row.into_iter().enumerate() {
                if var >= m {
                    return Err(Error::Config(format!(
                        "check {a}, position {pos}: variable {var} out of range (m = {m})"
                    )));
                }
                if weight == 0 || weight >= q {
                    return Err(Error::Config(format!(
                        "check {a}, position {pos}: weight {weight} not in 1..{q}"
                    )));
                }
                if edges.iter().any(|e: &CheckEdge| e.var == var) {
                    return Err(Error::Config(format!(
                        "check {a} lists variable {var} more than once"
                    )));
                }
                edges.push(CheckEdge { var, weight });
                vars[var].push(VarEdge { check: a, weight });
            }
            built.push(edges);
        }
        Ok(LdgmCode {
            field,
            m,
            checks: built,
            vars,
        })
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn q(&self) -> u32 {
        self.field.order()
    }

    /// Number of checks (and constrained variables).
    pub fn n(&self) -> usize {
        self.checks.len()
    }

    /// Number of free variables.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn check(&self, a: usize) -> &[CheckEdge] {
        &self.checks[a]
    }

    pub fn checks(&self) -> &[Vec<CheckEdge>] {
        &self.checks
    }

    pub fn var(&self, i: usize) -> &[VarEdge] {
        &self.vars[i]
    }

    pub fn vars(&self) -> &[Vec<VarEdge>] {
        &self.vars
    }

    pub fn num_edges(&self) -> usize {
        self.checks.iter().map(Vec::len).sum()
    }

    /// Source-coding rate in bits per sample, (m/n)·log2(q).
    pub fn rate(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        self.m as f64 / self.n() as f64 * (self.q() as f64).log2()
    }

    /// x_a = Σ_{i∈N(a)} g_ia z_i over GF(q).
    pub fn encode(&self, z: &[u32]) -> Result<Vec<u32>> {
        if z.len() != self.m {
            return Err(Error::Usage(format!(
                "encode expects {} free symbols, got {}",
                self.m,
                z.len()
            )));
        }
        if let Some(bad) = z.iter().find(|&&v| v >= self.q()) {
            return Err(Error::Usage(format!(
                "symbol {bad} out of range for GF({})",
                self.q()
            )));
        }
        let f = &self.field;
        Ok(self
            .checks
            .iter()
            .map(|row| {
                row.iter()
                    .fold(0, |acc, e| f.add(acc, f.mul(e.weight, z[e.var])))
            })
            .collect())
    }

    pub fn to_json(&self) -> String {
        let file = CodeFile {
            format: CODE_FORMAT.to_string(),
            q: self.q(),
            n: self.n(),
            m: self.m,
            checks: self
                .checks
                .iter()
                .map(|row| CheckEntry {
                    vars: row.iter().map(|e| e.var).collect(),
                    weights: row.iter().map(|e| e.weight).collect(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string(&file).expect("code file serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CodeFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: format!("code file line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let parse_err = |message: String| Error::Parse {
            context: "code file".into(),
            message,
        };
        if file.format != CODE_FORMAT {
            return Err(parse_err(format!(
                "field \"format\": expected \"{CODE_FORMAT}\", found \"{}\"",
                file.format
            )));
        }
        if file.checks.len() != file.n {
            return Err(parse_err(format!(
                "field \"n\" is {} but {} checks are listed",
                file.n,
                file.checks.len()
            )));
        }
        let mut checks = Vec::with_capacity(file.n);
        for (a, entry) in file.checks.into_iter().enumerate() {
            if entry.vars.len() != entry.weights.len() {
                return Err(parse_err(format!(
                    "checks[{a}]: \"vars\" has {} entries but \"weights\" has {}",
                    entry.vars.len(),
                    entry.weights.len()
                )));
            }
            checks.push(entry.vars.into_iter().zip(entry.weights).collect());
        }
        LdgmCode::new(file.q, file.m, checks).map_err(|e| parse_err(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodeFile {
    format: String,
    q: u32,
    n: usize,
    m: usize,
    checks: Vec<CheckEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckEntry {
    vars: Vec<usize>,
    weights: Vec<u32>,
}

pub fn save_code(code: &LdgmCode, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, code.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_code(path: impl AsRef<Path>) -> Result<LdgmCode> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    LdgmCode::from_json(&text).map_err(|e| match e {
        Error::Parse { context, message } => Error::Parse {
            context: format!("{} ({context})", path.display()),
            message,
        },
        other => other,
    })
}

/// Random regular code: every check has degree `d_c`, every free variable
/// degree `d_v`, so `m = n·d_c/d_v`. Edges come from a uniformly shuffled
/// stub matching; parallel edges are repaired by random slot swaps. Weights
/// are uniform over the nonzero field elements.
pub fn generate_regular(q: u32, n: usize, d_c: usize, d_v: usize, seed: u64) -> Result<LdgmCode> {
    PrimeField::new(q)?;
    if n == 0 || d_c == 0 {
        return Err(Error::Config("need n ≥ 1 and d_c ≥ 1".into()));
    }
    if d_v < 2 {
        return Err(Error::Config(format!(
            "variable degree d_v = {d_v} must be at least 2"
        )));
    }
    if !(n * d_c).is_multiple_of(d_v) {
        return Err(Error::Config(format!(
            "n·d_c = {} is not divisible by d_v = {d_v}",
            n * d_c
        )));
    }
    let m = n * d_c / d_v;
    if d_c > m {
        return Err(Error::Config(format!(
            "check degree d_c = {d_c} exceeds the number of free variables m = {m}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = n * d_c;
    // slot e belongs to check e / d_c
    let mut slots: Vec<usize> = (0..m).flat_map(|i| std::iter::repeat_n(i, d_v)).collect();
    slots.shuffle(&mut rng);

    let has_duplicate = |slots: &[usize], check: usize, skip: usize, var: usize| {
        (check * d_c..(check + 1) * d_c).any(|s| s != skip && slots[s] == var)
    };

    let budget = 100 * edges;
    let mut attempts = 0usize;
    loop {
        let conflict = (0..edges).find(|&e| has_duplicate(&slots, e / d_c, e, slots[e]));
        let Some(e) = conflict else { break };
        loop {
            if attempts >= budget {
                return Err(Error::Generation(format!(
                    "could not remove parallel edges within {budget} swap attempts"
                )));
            }
            attempts += 1;
            let f = rng.gen_range(0..edges);
            let (ce, cf) = (e / d_c, f / d_c);
            if ce == cf {
                continue;
            }
            let (ve, vf) = (slots[e], slots[f]);
            if !has_duplicate(&slots, ce, e, vf) && !has_duplicate(&slots, cf, f, ve) {
                slots.swap(e, f);
                break;
            }
        }
    }

    let checks = slots
        .chunks(d_c)
        .map(|row| row.iter().map(|&v| (v, rng.gen_range(1..q))).collect())
        .collect();
    LdgmCode::new(q, m, checks)
}

/// Threshold map Q: GF(q) → GF(2), Q(l_k) = 1 iff k ≥ threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantizerMap {
    q: u32,
    threshold: u32,
}

impl QuantizerMap {
    pub fn new(q: u32, threshold: u32) -> Result<Self> {
        PrimeField::new(q)?;
        if threshold == 0 || threshold >= q {
            return Err(Error::Config(format!(
                "quantizer threshold Q_m = {threshold} must satisfy 0 < Q_m < {q}"
            )));
        }
        Ok(QuantizerMap { q, threshold })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    #[inline]
    pub fn map(&self, symbol: u32) -> u8 {
        u8::from(symbol >= self.threshold)
    }

    /// Fraction of field elements mapped to 1: (q − Q_m)/q.
    pub fn one_density(&self) -> f64 {
        (self.q - self.threshold) as f64 / self.q as f64
    }
}

pub fn apply_quantizer(qm: &QuantizerMap, x: &[u32]) -> Vec<u8> {
    x.iter().map(|&s| qm.map(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn is_regular(code: &LdgmCode, d_c: usize, d_v: usize) -> bool {
        code.checks().iter().all(|r| r.len() == d_c) && code.vars().iter().all(|r| r.len() == d_v)
    }

    #[test]
    fn toy_regular_shapes() {
        let c = generate_regular(5, 9, 2, 9, 1).unwrap();
        assert_eq!((c.m(), c.num_edges()), (2, 18));
        assert!(is_regular(&c, 2, 9));

        let c = generate_regular(2, 4, 2, 4, 3).unwrap();
        assert_eq!(c.m(), 2);
        assert!(is_regular(&c, 2, 4));
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let a = generate_regular(3, 6, 2, 6, 42).unwrap();
        let b = generate_regular(3, 6, 2, 6, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn generation_errors() {
        assert!(matches!(
            generate_regular(5, 10, 2, 9, 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            generate_regular(5, 9, 2, 1, 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            generate_regular(4, 9, 2, 9, 0),
            Err(Error::Field(_))
        ));
    }

    #[test]
    fn table_rates() {
        let r = |q: f64, dc: f64, dv: f64| dc / dv * q.log2();
        assert!((r(5.0, 2.0, 9.0) - 0.516).abs() < 5e-4);
        assert!((r(2.0, 2.0, 4.0) - 0.500).abs() < 5e-4);
        assert!((r(3.0, 2.0, 6.0) - 0.528).abs() < 5e-4);
        let c = generate_regular(5, 90, 2, 9, 0).unwrap();
        assert!((c.rate() - 0.516).abs() < 5e-4);
    }

    #[test]
    fn encode_examples() {
        let code = LdgmCode::with_any_degrees(5, 2, vec![vec![(0, 2), (1, 3)]]).unwrap();
        assert_eq!(code.encode(&[1, 1]).unwrap(), vec![0]);
        assert_eq!(code.encode(&[0, 0]).unwrap(), vec![0]);
        assert!(code.encode(&[1]).is_err());
        assert!(code.encode(&[1, 5]).is_err());

        let code = generate_regular(7, 14, 3, 6, 9).unwrap();
        let z: Vec<u32> = (0..code.m() as u32).map(|i| (i * 3 + 1) % 7).collect();
        let x = code.encode(&z).unwrap();
        for (a, row) in code.checks().iter().enumerate() {
            let manual: u32 = row.iter().map(|e| e.weight * z[e.var]).sum::<u32>() % 7;
            assert_eq!(x[a], manual);
        }
    }

    #[test]
    fn construction_invariants_enforced() {
        assert!(LdgmCode::new(5, 1, vec![vec![(0, 1)], vec![(0, 0)]]).is_err());
        assert!(LdgmCode::new(5, 1, vec![vec![(0, 1), (0, 2)]]).is_err());
        assert!(LdgmCode::new(5, 1, vec![vec![(0, 1)]]).is_err()); // degree 1
        assert!(LdgmCode::new(5, 1, vec![vec![(1, 1)], vec![(0, 1)]]).is_err());
        assert!(LdgmCode::new(5, 1, vec![vec![(0, 1)], vec![(0, 4)]]).is_ok());
    }

    #[test]
    fn adjacency_is_transposed() {
        let c = generate_regular(5, 45, 2, 9, 11).unwrap();
        for (a, row) in c.checks().iter().enumerate() {
            for e in row {
                assert!(c.var(e.var).contains(&VarEdge {
                    check: a,
                    weight: e.weight
                }));
            }
        }
        let from_vars: usize = c.vars().iter().map(Vec::len).sum();
        assert_eq!(from_vars, c.num_edges());
    }

    #[test]
    fn file_round_trip_and_rejections() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let code = generate_regular(3, 12, 2, 6, 5).unwrap();
        save_code(&code, &path).unwrap();
        assert_eq!(load_code(&path).unwrap(), code);

        let zero_weight = r#"{"format":"gqldgm-code-v1","q":5,"n":2,"m":1,"checks":[{"vars":[0],"weights":[0]},{"vars":[0],"weights":[1]}]}"#;
        assert!(matches!(
            LdgmCode::from_json(zero_weight),
            Err(Error::Parse { .. })
        ));
        let q4 = r#"{"format":"gqldgm-code-v1","q":4,"n":2,"m":1,"checks":[{"vars":[0],"weights":[1]},{"vars":[0],"weights":[1]}]}"#;
        assert!(matches!(LdgmCode::from_json(q4), Err(Error::Parse { .. })));
        let ragged = r#"{"format":"gqldgm-code-v1","q":5,"n":1,"m":1,"checks":[{"vars":[0],"weights":[1,2]}]}"#;
        let err = LdgmCode::from_json(ragged).unwrap_err().to_string();
        assert!(err.contains("checks[0]"), "{err}");
        let truncated = "{\"format\":\"gqldgm-code-v1\",\n\"q\":5,";
        let err = LdgmCode::from_json(truncated).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn quantizer_examples() {
        let qm = QuantizerMap::new(5, 4).unwrap();
        assert_eq!(apply_quantizer(&qm, &[0, 1, 2, 3, 4]), vec![0, 0, 0, 0, 1]);
        assert!((qm.one_density() - 0.2).abs() < 1e-15);

        let qm = QuantizerMap::new(2, 1).unwrap();
        assert_eq!(apply_quantizer(&qm, &[0, 1]), vec![0, 1]);

        let qm = QuantizerMap::new(3, 2).unwrap();
        assert_eq!(apply_quantizer(&qm, &[0, 1, 2]), vec![0, 0, 1]);
        assert!((qm.one_density() - 1.0 / 3.0).abs() < 1e-15);

        assert!(QuantizerMap::new(5, 0).is_err());
        assert!(QuantizerMap::new(5, 5).is_err());
    }

    proptest! {
        #[test]
        fn generated_codes_are_regular(
            qi in 0usize..4, dc in 1usize..4, dv in 2usize..10, k in 1usize..6, seed in any::<u64>(),
        ) {
            let q = [2u32, 3, 5, 7][qi];
            // n chosen so that n·d_c is divisible by d_v
            let n = dv * k;
            let m = n * dc / dv;
            prop_assume!(dc <= m);
            let code = generate_regular(q, n, dc, dv, seed).unwrap();
            prop_assert_eq!(code.m(), m);
            prop_assert!(is_regular(&code, dc, dv));
            prop_assert_eq!(code.num_edges(), m * dv);
            prop_assert!(code.checks().iter().flatten().all(|e| e.weight >= 1 && e.weight < q));
            prop_assert_eq!(LdgmCode::from_json(&code.to_json()).unwrap(), code);
        }

        #[test]
        fn quantizer_density_is_exact(qi in 0usize..4, t in 1u32..7) {
            let q = [2u32, 3, 5, 7][qi];
            prop_assume!(t < q);
            let qm = QuantizerMap::new(q, t).unwrap();
            let all: Vec<u32> = (0..q).collect();
            let ones = apply_quantizer(&qm, &all).iter().filter(|&&b| b == 1).count();
            prop_assert_eq!(ones as u32, q - t);
        }
    }
}
