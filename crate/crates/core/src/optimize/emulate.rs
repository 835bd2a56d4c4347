//! Approximating an arbitrary distribution over combinations with a product
//! Bernoulli distribution.
//!
//! Outcomes use the truth-table encoding of [`crate::model`]: outcome `m` has
//! `x_i = +1` exactly when bit `i` of `m` is set.

use crate::design::Dosage;
use crate::error::{param, Error, Result};
use crate::model::MAX_TABLE_TREATMENTS;

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// An explicit distribution `q` over `{−1,+1}^p`.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetDistribution {
    p: usize,
    probabilities: Vec<f64>,
}

impl TargetDistribution {
    pub fn new(p: usize, probabilities: Vec<f64>) -> Result<Self> {
        if p == 0 || p > MAX_TABLE_TREATMENTS {
            return Err(Error::Capability(format!(
                "explicit distributions need 1 ≤ p ≤ {MAX_TABLE_TREATMENTS}, got {p}"
            )));
        }
        if probabilities.len() != 1 << p {
            return param(format!(
                "expected {} probabilities, got {}",
                1usize << p,
                probabilities.len()
            ));
        }
        if let Some(v) = probabilities.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return param(format!("probability {v} is not a non-negative number"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return param(format!("probabilities sum to {total}, not 1"));
        }
        Ok(TargetDistribution { p, probabilities })
    }

    /// Builds `q` from `(outcome, probability)` pairs; unlisted outcomes get 0.
    pub fn from_pairs(p: usize, pairs: &[(u64, f64)]) -> Result<Self> {
        if p == 0 || p > MAX_TABLE_TREATMENTS {
            return TargetDistribution::new(p, Vec::new());
        }
        let mut probabilities = vec![0.0; 1 << p];
        for &(outcome, q) in pairs {
            let slot = probabilities
                .get_mut(outcome as usize)
                .ok_or_else(|| Error::Parameter(format!("outcome {outcome} out of range for p = {p}")))?;
            *slot += q;
        }
        TargetDistribution::new(p, probabilities)
    }

    pub fn uniform(p: usize) -> Result<Self> {
        let size = 1usize << p.min(MAX_TABLE_TREATMENTS);
        TargetDistribution::new(p, vec![1.0 / size as f64; size])
    }

    /// The product distribution induced by a dosage.
    pub fn product(dosage: &Dosage) -> Result<Self> {
        let p = dosage.p();
        if p > MAX_TABLE_TREATMENTS {
            return TargetDistribution::new(p, Vec::new());
        }
        let probabilities = (0..1u64 << p)
            .map(|m| product_probability(dosage.as_slice(), m))
            .collect();
        TargetDistribution::new(p, probabilities)
    }

    /// Parses lines `<outcome> <probability>`. The outcome is either a string
    /// of `+`/`-` characters (one per treatment, treatment 1 first) or a
    /// comma-separated list of `1`/`-1`. Blank lines and `#` comments are
    /// skipped; every outcome line must have the same length.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = None;
        let mut pairs = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [outcome, probability] = fields[..] else {
                return Err(parse_err(line_no, "expected `<outcome> <probability>`"));
            };
            let signs = parse_outcome(outcome).map_err(|m| parse_err(line_no, m))?;
            match p {
                None => p = Some(signs.len()),
                Some(len) if len != signs.len() => {
                    return Err(parse_err(
                        line_no,
                        format!("outcome has {} treatments, earlier lines have {len}", signs.len()),
                    ))
                }
                _ => {}
            }
            if signs.len() > MAX_TABLE_TREATMENTS {
                return Err(parse_err(line_no, format!("at most {MAX_TABLE_TREATMENTS} treatments")));
            }
            let mask = signs
                .iter()
                .enumerate()
                .filter(|(_, &s)| s > 0)
                .fold(0u64, |acc, (i, _)| acc | (1 << i));
            if !seen.insert(mask) {
                return Err(parse_err(line_no, format!("outcome `{outcome}` listed twice")));
            }
            let q: f64 = probability
                .parse()
                .map_err(|_| parse_err(line_no, format!("`{probability}` is not a number")))?;
            if !(q >= 0.0 && q.is_finite()) {
                return Err(parse_err(line_no, format!("probability {q} is negative or not finite")));
            }
            pairs.push((mask, q));
        }
        let p = p.ok_or_else(|| parse_err(0, "no outcomes listed"))?;
        TargetDistribution::from_pairs(p, &pairs)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// `q_i = P_q(x_i = +1)`.
    pub fn marginals(&self) -> Vec<f64> {
        (0..self.p)
            .map(|i| {
                self.probabilities
                    .iter()
                    .enumerate()
                    .filter(|(m, _)| m >> i & 1 == 1)
                    .map(|(_, q)| q)
                    .sum::<f64>()
                    .clamp(0.0, 1.0)
            })
            .collect()
    }
}

/// Dosage matching the marginals of `q`, the KL-closest product
/// distribution.
pub fn emulate_dosage(q: &TargetDistribution) -> Dosage {
    Dosage::new(q.marginals()).expect("marginals lie in [0, 1]")
}

/// `D(q ‖ p_d) = Σ_x q(x) ln(q(x) / p_d(x))` in nats; `+∞` when `q` puts mass
/// where `p_d` has none.
pub fn kl_divergence(q: &TargetDistribution, dosage: &Dosage) -> Result<f64> {
    if dosage.p() != q.p() {
        return param(format!(
            "dosage has {} treatments, distribution has {}",
            dosage.p(),
            q.p()
        ));
    }
    let d = dosage.as_slice();
    let mut total = 0.0;
    for (m, &qm) in q.probabilities.iter().enumerate() {
        if qm == 0.0 {
            continue;
        }
        let log_p: f64 = (0..q.p)
            .map(|i| if m >> i & 1 == 1 { d[i].ln() } else { (1.0 - d[i]).ln() })
            .sum();
        if log_p == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        total += qm * (qm.ln() - log_p);
    }
    Ok(total.max(0.0))
}

fn product_probability(d: &[f64], outcome: u64) -> f64 {
    d.iter()
        .enumerate()
        .map(|(i, &di)| if outcome >> i & 1 == 1 { di } else { 1.0 - di })
        .product()
}

fn parse_outcome(text: &str) -> std::result::Result<Vec<i8>, String> {
    if text.contains(',') {
        text.split(',')
            .map(|t| match t.trim() {
                "1" | "+1" => Ok(1),
                "-1" => Ok(-1),
                other => Err(format!("`{other}` is not ±1")),
            })
            .collect()
    } else {
        text.chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(format!("`{other}` is not `+` or `-`")),
            })
            .collect()
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}
