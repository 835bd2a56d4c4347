//! Bounded-degree outcome models over `{−1,+1}^p`.
//!
//! Truth tables are indexed by a `p`-bit integer `m`: bit `i` of `m` gives
//! coordinate `i`, with bit 0 meaning `−1` and bit 1 meaning `+1`. The same
//! bitmask encoding is used for assignments throughout the crate.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::combinatorics::{Subset, SubsetIndex};
use crate::error::{param, Error, Result};

/// Largest `p` for which truth tables and brute-force transforms are built.
pub const MAX_TABLE_TREATMENTS: usize = 16;

/// Fourier-basis outcome model `f(x) = Σ_{|S|≤k} β_S φ_S(x)` with Gaussian
/// observation noise of standard deviation `sigma` and `‖β‖₂ ≤ bound`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeModel {
    index: SubsetIndex,
    beta: Vec<f64>,
    sigma: f64,
    bound: f64,
}

impl OutcomeModel {
    pub fn new(index: SubsetIndex, beta: Vec<f64>, sigma: f64, bound: f64) -> Result<Self> {
        if beta.len() != index.len() {
            return param(format!(
                "coefficient vector has length {}, expected {}",
                beta.len(),
                index.len()
            ));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return param(format!("noise level must be a non-negative number, got {sigma}"));
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return param(format!("norm bound must be positive, got {bound}"));
        }
        let norm = l2_norm(&beta);
        if norm > bound * (1.0 + 1e-12) {
            return param(format!("‖β‖₂ = {norm} exceeds the bound B = {bound}"));
        }
        Ok(OutcomeModel {
            index,
            beta,
            sigma,
            bound,
        })
    }

    pub fn index(&self) -> &SubsetIndex {
        &self.index
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn p(&self) -> usize {
        self.index.p()
    }

    /// `f(x)` for `x ∈ {−1,+1}^p`.
    pub fn eval_f(&self, x: &[i8]) -> Result<f64> {
        Ok(self.eval_mask(assignment_mask(x, self.p())?))
    }

    /// `f` at the assignment whose treated set is the bitmask `treated`.
    pub fn eval_mask(&self, treated: u64) -> f64 {
        self.index
            .iter()
            .map(|(j, s)| self.beta[j] * s.parity(treated))
            .sum()
    }

    /// Noisy observation `f(x) + ε`, `ε ~ N(0, σ²)`.
    pub fn observe<R: Rng + ?Sized>(&self, treated: u64, rng: &mut R) -> f64 {
        let noise: f64 = StandardNormal.sample(rng);
        self.eval_mask(treated) + self.sigma * noise
    }

    /// Coefficients of this model restricted to a smaller index, dropping
    /// every subset the smaller index does not contain.
    pub fn truncated_beta(&self, target: &SubsetIndex) -> Result<Vec<f64>> {
        if target.p() != self.p() {
            return param("truncation target has a different number of treatments");
        }
        Ok(target
            .subsets()
            .iter()
            .map(|&s| self.index.position(s).map_or(0.0, |j| self.beta[j]))
            .collect())
    }

    /// All `2^p` values of `f` in truth-table order.
    pub fn truth_table(&self) -> Result<Vec<f64>> {
        check_table_size(self.p())?;
        Ok((0..1u64 << self.p()).map(|m| self.eval_mask(m)).collect())
    }

    /// Flat text form: header lines `p`, `k`, `sigma`, `bound`, then one line
    /// per coefficient `<subset> <value>` with one-based members, e.g.
    /// `{1,3} -0.25`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "p {}", self.p());
        let _ = writeln!(out, "k {}", self.index.k());
        let _ = writeln!(out, "sigma {}", self.sigma);
        let _ = writeln!(out, "bound {}", self.bound);
        for (j, s) in self.index.iter() {
            let _ = writeln!(out, "{} {}", s, self.beta[j]);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut header: [Option<f64>; 4] = [None; 4];
        const KEYS: [&str; 4] = ["p", "k", "sigma", "bound"];
        let mut coefficients: Vec<(usize, Subset, f64)> = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .rsplit_once(char::is_whitespace)
                .ok_or_else(|| parse_err(line_no, "expected `<key> <value>`"))?;
            let key = key.trim();
            let value: f64 = value
                .parse()
                .map_err(|_| parse_err(line_no, format!("`{value}` is not a number")))?;
            if let Some(slot) = KEYS.iter().position(|&k| k == key) {
                if header[slot].replace(value).is_some() {
                    return Err(parse_err(line_no, format!("duplicate `{key}` line")));
                }
            } else if key.starts_with('{') {
                coefficients.push((line_no, parse_subset(key, line_no)?, value));
            } else {
                return Err(parse_err(line_no, format!("unknown key `{key}`")));
            }
        }

        let get = |slot: usize| {
            header[slot].ok_or_else(|| parse_err(0, format!("missing `{}` line", KEYS[slot])))
        };
        let (p, k) = (get(0)?, get(1)?);
        if p.fract() != 0.0 || k.fract() != 0.0 || p < 0.0 || k < 0.0 {
            return Err(parse_err(0, "p and k must be non-negative integers"));
        }
        let index = SubsetIndex::new(p as usize, k as usize)?;
        let mut beta = vec![0.0; index.len()];
        let mut seen = vec![false; index.len()];
        for (line_no, subset, value) in coefficients {
            let j = index.position(subset).ok_or_else(|| {
                parse_err(line_no, format!("subset {subset} is not a column for p = {p}, k = {k}"))
            })?;
            if std::mem::replace(&mut seen[j], true) {
                return Err(parse_err(line_no, format!("duplicate coefficient for {subset}")));
            }
            beta[j] = value;
        }
        OutcomeModel::new(index, beta, get(2)?, get(3)?)
    }
}

/// Indicator-basis model `g(x) = Σ_{|S|≤k} α_S 𝟙{x_i = +1 ∀ i ∈ S}`.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorModel {
    index: SubsetIndex,
    alpha: Vec<f64>,
}

impl IndicatorModel {
    pub fn new(index: SubsetIndex, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != index.len() {
            return param(format!(
                "coefficient vector has length {}, expected {}",
                alpha.len(),
                index.len()
            ));
        }
        Ok(IndicatorModel { index, alpha })
    }

    pub fn index(&self) -> &SubsetIndex {
        &self.index
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn eval_mask(&self, treated: u64) -> f64 {
        self.index
            .iter()
            .filter(|(_, s)| s.mask() & !treated == 0)
            .map(|(j, _)| self.alpha[j])
            .sum()
    }

    /// Fourier coefficients `β_S = Σ_{T ⊇ S} α_T / 2^{|T|}`, using
    /// `𝟙{x_T = +1} = 2^{−|T|} Σ_{S⊆T} φ_S(x)`.
    pub fn alpha_to_beta(&self) -> Vec<f64> {
        let mut beta = vec![0.0; self.index.len()];
        for (t_col, t) in self.index.iter() {
            let a = self.alpha[t_col];
            if a == 0.0 {
                continue;
            }
            let share = a / (1u64 << t.len()) as f64;
            // every submask of T, including T and ∅
            let mut sub = t.mask();
            loop {
                let s_col = self
                    .index
                    .position(Subset::from_mask(sub))
                    .expect("subsets of an indexed set are indexed");
                beta[s_col] += share;
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & t.mask();
            }
        }
        beta
    }
}

/// Exact Fourier coefficients of a truth table over the subsets in `index`:
/// `β_S = 2^{−p} Σ_x f(x) φ_S(x)`. Intended as an oracle for small `p`.
pub fn fourier_transform_bruteforce(f_table: &[f64], index: &SubsetIndex) -> Result<Vec<f64>> {
    let p = index.p();
    check_table_size(p)?;
    let size = 1usize << p;
    if f_table.len() != size {
        return param(format!("truth table has {} entries, expected 2^{p} = {size}", f_table.len()));
    }
    let scale = 1.0 / size as f64;
    Ok(index
        .subsets()
        .iter()
        .map(|s| {
            f_table
                .iter()
                .enumerate()
                .map(|(m, &f)| f * s.parity(m as u64))
                .sum::<f64>()
                * scale
        })
        .collect())
}

/// How the norm bound `B` of a generated model is set.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum BoundPolicy {
    /// `B = ‖β‖₂` of the drawn coefficients.
    #[default]
    Norm,
    /// A fixed bound; must dominate `‖β‖₂`.
    Fixed(f64),
}

/// Draws `β ~ U(−1,1)^K` deterministically from `seed`.
pub fn generate_model(
    index: SubsetIndex,
    sigma: f64,
    policy: BoundPolicy,
    seed: u64,
) -> Result<OutcomeModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(-1.0, 1.0).expect("valid range");
    let beta: Vec<f64> = (0..index.len()).map(|_| unit.sample(&mut rng)).collect();
    let bound = match policy {
        BoundPolicy::Norm => l2_norm(&beta).max(f64::MIN_POSITIVE),
        BoundPolicy::Fixed(b) => b,
    };
    OutcomeModel::new(index, beta, sigma, bound)
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Bitmask of `+1` coordinates of a `±1` vector.
pub fn assignment_mask(x: &[i8], p: usize) -> Result<u64> {
    if x.len() != p {
        return param(format!("assignment has length {}, expected {p}", x.len()));
    }
    x.iter().enumerate().try_fold(0u64, |acc, (i, &v)| match v {
        1 => Ok(acc | (1u64 << i)),
        -1 => Ok(acc),
        other => param(format!("assignment entry {other} is not ±1")),
    })
}

fn check_table_size(p: usize) -> Result<()> {
    if p > MAX_TABLE_TREATMENTS {
        return Err(Error::Capability(format!(
            "truth tables are limited to p ≤ {MAX_TABLE_TREATMENTS}, got p = {p}"
        )));
    }
    Ok(())
}

fn parse_subset(text: &str, line: usize) -> Result<Subset> {
    let inner = text
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| parse_err(line, format!("malformed subset `{text}`")))?;
    let mut members = Vec::new();
    for part in inner.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let one_based: usize = part
            .parse()
            .map_err(|_| parse_err(line, format!("bad treatment `{part}`")))?;
        if one_based == 0 || one_based > crate::combinatorics::MAX_TREATMENTS {
            return Err(parse_err(line, format!("treatment `{part}` out of range")));
        }
        members.push(one_based - 1);
    }
    Ok(Subset::from_members(&members))
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}
