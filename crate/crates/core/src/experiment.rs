//! Batch experiments, presets and plot-data export.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{distortion_bound, source_prob_for_density, time_sharing_bound, RdPoint};
use crate::code::{generate_regular, LdgmCode, QuantizerMap};
use crate::decimation::{quantize, DecimationParams, PercentageBase};
use crate::error::{Error, Result};
use crate::gf::PrimeField;

/// Generator used for every random draw; written into CSV headers.
pub const RNG_NAME: &str = "ChaCha8Rng";

pub const CSV_COLUMNS: [&str; 16] = [
    "set_id",
    "code_id",
    "run_id",
    "n",
    "q",
    "Qm",
    "R",
    "p_s",
    "beta",
    "distortion",
    "bp_iterations",
    "rounds",
    "degeneracies",
    "seconds",
    "seed",
    "error",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub q: u32,
    pub qm: u32,
    pub d_c: usize,
    pub d_v: usize,
    pub p_s: f64,
}

pub const PRESETS: [Preset; 4] = [
    Preset {
        name: "set1",
        q: 5,
        qm: 4,
        d_c: 2,
        d_v: 9,
        p_s: 0.230,
    },
    Preset {
        name: "set2",
        q: 3,
        qm: 2,
        d_c: 2,
        d_v: 6,
        p_s: 0.365,
    },
    Preset {
        name: "set3",
        q: 5,
        qm: 3,
        d_c: 2,
        d_v: 9,
        p_s: 0.420,
    },
    Preset {
        name: "set4",
        q: 2,
        qm: 1,
        d_c: 2,
        d_v: 4,
        p_s: 0.500,
    },
];

pub fn preset(name: &str) -> Result<Preset> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .copied()
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}; expected set1..set4")))
}

impl Preset {
    pub fn rate(&self) -> f64 {
        design_rate(self.q, self.d_c, self.d_v)
    }

    pub fn one_density(&self) -> f64 {
        f64::from(self.q - self.qm) / f64::from(self.q)
    }
}

/// `(d_c/d_v)·log2 q` bits per source sample.
pub fn design_rate(q: u32, d_c: usize, d_v: usize) -> f64 {
    d_c as f64 / d_v as f64 * f64::from(q).log2()
}

/// Code and run counts used at the lengths reported for the original
/// experiments.
pub fn reference_counts(n: usize) -> Option<(usize, usize)> {
    match n {
        1_000 => Some((10, 1000)),
        10_000 => Some((10, 500)),
        100_000 => Some((4, 100)),
        _ => None,
    }
}

fn validate_design(q: u32, qm: u32, d_c: usize, d_v: usize) -> Result<QuantizerMap> {
    PrimeField::new(q).map_err(|e| Error::Config(e.to_string()))?;
    if d_c == 0 {
        return Err(Error::Config("check degree d_c must be at least 1".into()));
    }
    if d_v < 2 {
        return Err(Error::Config(format!(
            "variable degree d_v = {d_v} must be at least 2"
        )));
    }
    QuantizerMap::new(q, qm).map_err(|e| Error::Config(e.to_string()))
}

/// Rate-distortion summary for a design. `p_s` defaults to the source
/// probability whose rate-distortion test channel reproduces the quantizer's
/// one-density.
pub fn cmd_bounds(q: u32, qm: u32, d_c: usize, d_v: usize, p_s: Option<f64>) -> Result<RdPoint> {
    let quantizer = validate_design(q, qm, d_c, d_v)?;
    let rate = design_rate(q, d_c, d_v);
    let r = quantizer.one_density();
    let p_s = match p_s {
        Some(p) => p,
        None => source_prob_for_density(rate, r)?,
    };
    RdPoint::new(rate, p_s, r)
}

pub fn preset_bounds(p: &Preset) -> Result<RdPoint> {
    cmd_bounds(p.q, p.qm, p.d_c, p.d_v, Some(p.p_s))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
    #[serde(default, rename = "Q_m", skip_serializing_if = "Option::is_none")]
    pub qm: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_c: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_v: Option<usize>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_codes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs_per_code: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_i: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_s: Option<f64>,
    #[serde(default, rename = "MP_th", skip_serializing_if = "Option::is_none")]
    pub mp_threshold: Option<f64>,
    #[serde(default, rename = "MP_max", skip_serializing_if = "Option::is_none")]
    pub mp_max_iterations: Option<usize>,
    #[serde(default, rename = "B_m", skip_serializing_if = "Option::is_none")]
    pub bias_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percentage_base: Option<PercentageBase>,
}

impl ExperimentConfig {
    pub fn from_preset(name: &str, n: usize) -> Self {
        ExperimentConfig {
            preset: Some(name.to_owned()),
            n,
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            context: "experiment config".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Fills in every default and checks the result.
    pub fn resolve(&self) -> Result<Experiment> {
        let base = self.preset.as_deref().map(preset).transpose()?;
        let pick = |own: Option<u32>, from: Option<u32>, what: &str| {
            own.or(from)
                .ok_or_else(|| Error::Config(format!("{what} is required without a preset")))
        };
        let q = pick(self.q, base.map(|b| b.q), "q")?;
        let qm = pick(self.qm, base.map(|b| b.qm), "Q_m")?;
        let d_c = pick(
            self.d_c.map(|d| d as u32),
            base.map(|b| b.d_c as u32),
            "d_c",
        )? as usize;
        let d_v = pick(
            self.d_v.map(|d| d as u32),
            base.map(|b| b.d_v as u32),
            "d_v",
        )? as usize;
        let quantizer = validate_design(q, qm, d_c, d_v)?;

        // n·d_c must be a multiple of d_v; shrink to the nearest valid length
        let step = d_v / gcd(d_c, d_v);
        let n = self.n - self.n % step;
        if n == 0 {
            return Err(Error::Config(format!(
                "n = {} is too small: lengths must be multiples of {step}",
                self.n
            )));
        }
        if n != self.n {
            log::warn!(
                "n = {} is not a valid length for d_c = {d_c}, d_v = {d_v}; using {n}",
                self.n
            );
        }

        let preset_p_s = base.filter(|b| b.q == q && b.qm == qm && b.d_c == d_c && b.d_v == d_v);
        let p_s = self.p_s.or(preset_p_s.map(|b| b.p_s));
        let point = cmd_bounds(q, qm, d_c, d_v, p_s)?;

        let mut params = DecimationParams::new(self.beta.unwrap_or(point.beta));
        params.w_i = self.w_i.unwrap_or(params.w_i);
        params.w_s = self.w_s.unwrap_or(params.w_s);
        params.mp_threshold = self.mp_threshold.unwrap_or(params.mp_threshold);
        params.mp_max_iterations = self.mp_max_iterations.unwrap_or(params.mp_max_iterations);
        params.bias_threshold = self.bias_threshold.unwrap_or(params.bias_threshold);
        params.min_fraction = self.r_min.unwrap_or(params.min_fraction);
        params.max_fraction = self.r_max.unwrap_or(params.max_fraction);
        params.percentage_base = self.percentage_base.unwrap_or(params.percentage_base);
        params.validate()?;

        let (default_codes, default_runs) = reference_counts(self.n).unwrap_or((10, 100));
        Ok(Experiment {
            set_id: self
                .set_id
                .clone()
                .or_else(|| self.preset.clone())
                .unwrap_or_else(|| "custom".into()),
            q,
            quantizer,
            d_c,
            d_v,
            n,
            nominal_n: self.n,
            num_codes: self.num_codes.unwrap_or(default_codes),
            runs_per_code: self.runs_per_code.unwrap_or(default_runs),
            master_seed: self.master_seed,
            point,
            params,
        })
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// A fully resolved experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub set_id: String,
    pub q: u32,
    pub quantizer: QuantizerMap,
    pub d_c: usize,
    pub d_v: usize,
    /// Length actually used: the requested one rounded down to a valid value.
    pub n: usize,
    /// Length as requested in the configuration.
    pub nominal_n: usize,
    pub num_codes: usize,
    pub runs_per_code: usize,
    pub master_seed: u64,
    pub point: RdPoint,
    pub params: DecimationParams,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn code_seed(master_seed: u64, code_id: u64) -> u64 {
    master_seed ^ code_id
}

pub fn run_seed(master_seed: u64, code_id: u64, run_id: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ code_id) ^ run_id)
}

/// i.i.d. source with `P[1] = p`.
pub fn bernoulli_source(n: usize, p: f64, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| u8::from(rng.gen_bool(p))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub set_id: String,
    pub code_id: u64,
    pub run_id: u64,
    pub n: usize,
    pub q: u32,
    #[serde(rename = "Qm")]
    pub qm: u32,
    #[serde(rename = "R")]
    pub rate: f64,
    pub p_s: f64,
    pub beta: f64,
    pub distortion: Option<f64>,
    pub bp_iterations: Option<usize>,
    pub rounds: Option<usize>,
    pub degeneracies: Option<usize>,
    pub seconds: Option<f64>,
    pub seed: u64,
    pub error: String,
}

impl ExperimentRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_empty() && self.distortion.is_some()
    }
}

impl Experiment {
    fn record(&self, code_id: u64, run_id: u64, seed: u64) -> ExperimentRecord {
        ExperimentRecord {
            set_id: self.set_id.clone(),
            code_id,
            run_id,
            n: self.n,
            q: self.q,
            qm: self.quantizer.threshold(),
            rate: self.point.rate,
            p_s: self.point.p_s,
            beta: self.params.beta,
            distortion: None,
            bp_iterations: None,
            rounds: None,
            degeneracies: None,
            seconds: None,
            seed,
            error: String::new(),
        }
    }

    fn run_one(&self, code: &LdgmCode, code_id: u64, run_id: u64) -> ExperimentRecord {
        let seed = run_seed(self.master_seed, code_id, run_id);
        let mut rec = self.record(code_id, run_id, seed);
        let source = bernoulli_source(self.n, self.point.p_s, seed);
        let start = Instant::now();
        match quantize(code, &self.quantizer, &source, &self.params) {
            Ok(out) => {
                rec.distortion = Some(out.distortion);
                rec.bp_iterations = Some(out.stats.bp_iterations);
                rec.rounds = Some(out.stats.rounds);
                rec.degeneracies = Some(out.stats.degeneracies);
            }
            Err(e) => rec.error = e.to_string(),
        }
        rec.seconds = Some(start.elapsed().as_secs_f64());
        rec
    }

    /// Runs every (code, run) pair on the rayon pool. Records come back in
    /// (code id, run id) order.
    pub fn run(&self) -> Vec<ExperimentRecord> {
        let codes: Vec<Result<LdgmCode>> = (0..self.num_codes as u64)
            .into_par_iter()
            .map(|c| {
                let seed = code_seed(self.master_seed, c);
                generate_regular(self.q, self.n, self.d_c, self.d_v, seed)
            })
            .collect();
        let tasks: Vec<(u64, u64)> = (0..self.num_codes as u64)
            .flat_map(|c| (0..self.runs_per_code as u64).map(move |r| (c, r)))
            .collect();
        tasks
            .into_par_iter()
            .map(|(c, r)| match &codes[c as usize] {
                Ok(code) => self.run_one(code, c, r),
                Err(e) => {
                    let mut rec = self.record(c, r, run_seed(self.master_seed, c, r));
                    rec.error = format!("code generation: {e}");
                    rec
                }
            })
            .collect()
    }

    pub fn summarize(&self, records: &[ExperimentRecord]) -> Summary {
        let values: Vec<f64> = records.iter().filter_map(|r| r.distortion).collect();
        let (mean, std) = mean_std(&values);
        let seconds: Vec<f64> = records.iter().filter_map(|r| r.seconds).collect();
        let requested = self.num_codes * self.runs_per_code;
        let note = match reference_counts(self.nominal_n) {
            _ if requested == 0 => "zero runs requested".to_string(),
            Some((c, r)) if c * r > requested => format!(
                "reduced counts: {} codes x {} runs, reference protocol uses {c} x {r} at this length",
                self.num_codes, self.runs_per_code
            ),
            Some(_) => "full reference counts".to_string(),
            None => "no reference counts at this length".to_string(),
        };
        Summary {
            set_id: self.set_id.clone(),
            n: self.n,
            q: self.q,
            qm: self.quantizer.threshold(),
            rate: self.point.rate,
            p_s: self.point.p_s,
            beta: self.params.beta,
            num_codes: self.num_codes,
            runs_per_code: self.runs_per_code,
            completed: values.len(),
            failed: records.len() - values.len(),
            mean_distortion: mean,
            std_distortion: std,
            d_rd: self.point.d_rd,
            d_ts: self.point.d_ts,
            mean_seconds: mean_std(&seconds).0,
            note,
        }
    }
}

/// Mean and sample standard deviation.
fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let std = (values.len() > 1)
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt());
    (Some(mean), std)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub set_id: String,
    pub n: usize,
    pub q: u32,
    #[serde(rename = "Qm")]
    pub qm: u32,
    #[serde(rename = "R")]
    pub rate: f64,
    pub p_s: f64,
    pub beta: f64,
    pub num_codes: usize,
    pub runs_per_code: usize,
    pub completed: usize,
    pub failed: usize,
    pub mean_distortion: Option<f64>,
    pub std_distortion: Option<f64>,
    #[serde(rename = "D_rd")]
    pub d_rd: f64,
    #[serde(rename = "D_ts")]
    pub d_ts: f64,
    pub mean_seconds: Option<f64>,
    pub note: String,
}

pub fn write_csv<W: Write>(mut out: W, records: &[ExperimentRecord]) -> Result<()> {
    writeln!(out, "# rng={RNG_NAME}").map_err(|e| Error::io("<csv output>", e))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let malformed = |message: String| Error::Parse {
        context: "experiment CSV".into(),
        message,
    };
    let header = reader
        .headers()
        .map_err(|e| malformed(e.to_string()))?
        .clone();
    if !header.is_empty() && !header.iter().eq(CSV_COLUMNS) {
        return Err(malformed(format!(
            "unexpected columns: {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e| malformed(e.to_string())))
        .collect()
}

/// Fixed bound-curve sampling: 101 values of p_s evenly spaced over [0.01, 0.5].
pub fn bound_grid() -> impl Iterator<Item = f64> {
    (0..=100).map(|k| 0.01 + 0.49 * f64::from(k) / 100.0)
}

/// Whitespace-separated plot data: one row per (set id, n) group with its
/// mean distortion, followed by the bound curves at `rate`.
pub fn write_plot<W: Write>(mut out: W, records: &[ExperimentRecord], rate: f64) -> Result<()> {
    let io = |e| Error::io("<plot output>", e);
    let mut groups: Vec<((String, usize), Vec<&ExperimentRecord>)> = Vec::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        let key = (r.set_id.clone(), r.n);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rows)) => rows.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    writeln!(out, "# measured: one row per (set_id, n)").map_err(io)?;
    writeln!(out, "# set_id n p_s R mean_D D_rd D_ts runs").map_err(io)?;
    for ((set_id, n), rows) in &groups {
        let (mean, _) = mean_std(&rows.iter().filter_map(|r| r.distortion).collect::<Vec<_>>());
        let first = rows[0];
        let d_rd = distortion_bound(first.rate, first.p_s)?;
        let d_ts = time_sharing_bound(first.rate, first.p_s)?;
        writeln!(
            out,
            "{set_id} {n} {:.6} {:.6} {:.6} {d_rd:.6} {d_ts:.6} {}",
            first.p_s,
            first.rate,
            mean.unwrap_or(f64::NAN),
            rows.len()
        )
        .map_err(io)?;
    }
    writeln!(out, "\n\n# bounds at R = {rate}").map_err(io)?;
    writeln!(out, "# p_s D_rd D_ts").map_err(io)?;
    for p in bound_grid() {
        let d_rd = distortion_bound(rate, p)?;
        let d_ts = time_sharing_bound(rate, p)?;
        writeln!(out, "{p:.6} {d_rd:.6} {d_ts:.6}").map_err(io)?;
    }
    Ok(())
}
