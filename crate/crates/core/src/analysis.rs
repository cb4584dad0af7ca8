//! Closed-form security quantities.
//!
//! Notation: `d` is the probability that one control run exposes the attack,
//! `c` the probability of a control run, `I₀(d)` the largest information Eve
//! can extract per message run, and `s` her probability of staying
//! undetected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("{name} = {value} is outside its domain {domain}")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("|alpha|^2 + |beta|^2 = {0}, expected 1")]
    NotNormalized(f64),
    #[error("priors ({p0}, {p1}) must be nonnegative and sum to 1")]
    InvalidPriors { p0: f64, p1: f64 },
    #[error("survival series diverges for c = 1 and d = 0")]
    Divergent,
    #[error("d = 0 gives I0 = 0, so I/I0 is undefined")]
    ZeroInformation,
}

pub type Result<T, E = AnalysisError> = std::result::Result<T, E>;

const PRIOR_TOL: f64 = 1e-12;

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(AnalysisError::OutOfDomain {
            name,
            value,
            domain: "[0, 1]",
        });
    }
    Ok(())
}

/// Distribution of Alice's message bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    p0: f64,
    p1: f64,
}

impl Priors {
    pub fn new(p0: f64, p1: f64) -> Result<Self> {
        let ok = p0 >= 0.0 && p1 >= 0.0 && (p0 + p1 - 1.0).abs() <= PRIOR_TOL;
        if !ok {
            return Err(AnalysisError::InvalidPriors { p0, p1 });
        }
        Ok(Priors { p0, p1 })
    }

    pub fn from_p0(p0: f64) -> Result<Self> {
        check_unit("p0", p0)?;
        Priors::new(p0, 1.0 - p0)
    }

    pub fn uniform() -> Self {
        Priors { p0: 0.5, p1: 0.5 }
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn validate(&self) -> Result<()> {
        Priors::new(self.p0, self.p1).map(|_| ())
    }
}

impl Default for Priors {
    fn default() -> Self {
        Priors::uniform()
    }
}

/// One evaluated point of a success curve. Serializes with the column
/// order `I,c,d,I0,s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityPoint {
    #[serde(rename = "I")]
    pub info: f64,
    pub c: f64,
    pub d: f64,
    #[serde(rename = "I0")]
    pub max_info: f64,
    #[serde(rename = "s")]
    pub survival: f64,
}

/// `d = |β|² = 1 − |α|²`.
pub fn detection_probability(alpha_sq: f64, beta_sq: f64) -> Result<f64> {
    check_unit("alpha_sq", alpha_sq)?;
    check_unit("beta_sq", beta_sq)?;
    let total = alpha_sq + beta_sq;
    if (total - 1.0).abs() > 1e-9 {
        return Err(AnalysisError::NotNormalized(total));
    }
    Ok(beta_sq)
}

/// Eigenvalues `λ₁ ≥ λ₂` of Eve's post-coding state:
/// `λ₁,₂ = ½ ± ½√(1 − (4d − 4d²)[1 − (p₀ − p₁)²])`.
pub fn eigenvalues(d: f64, priors: Priors) -> Result<(f64, f64)> {
    check_unit("d", d)?;
    priors.validate()?;
    let bias = priors.p0 - priors.p1;
    // det ρ″ = λ₁λ₂
    let det = (d - d * d) * (1.0 - bias * bias);
    let root = (1.0 - 4.0 * det).max(0.0).sqrt();
    let l1 = 0.5 + 0.5 * root;
    // λ₂ from the determinant avoids cancellation when it is tiny
    let l2 = if l1 > 0.0 { det / l1 } else { 0.0 };
    Ok((l1, l2.clamp(0.0, 1.0)))
}

fn entropy_term(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// `I₀ = −λ₁log₂λ₁ − λ₂log₂λ₂` for the given detection probability and priors.
pub fn max_info(d: f64, priors: Priors) -> Result<f64> {
    let (l1, l2) = eigenvalues(d, priors)?;
    Ok((entropy_term(l1) + entropy_term(l2)).clamp(0.0, 1.0))
}

/// Binary Shannon entropy `−d log₂ d − (1−d) log₂(1−d)`; `I₀(d)` for equal priors.
pub fn binary_info(d: f64) -> Result<f64> {
    check_unit("d", d)?;
    Ok((entropy_term(d) + entropy_term(1.0 - d)).min(1.0))
}

/// Tolerance on `d` for [`invert_info`].
pub const INVERT_TOL: f64 = 1e-12;

/// The unique `d ∈ [0, ½]` with `binary_info(d) = i0`, by bisection.
pub fn invert_info(i0: f64) -> Result<f64> {
    check_unit("I0", i0)?;
    if i0 == 0.0 {
        return Ok(0.0);
    }
    if i0 == 1.0 {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
    // binary_info is increasing on [0, ½]
    while hi - lo > INVERT_TOL {
        let mid = 0.5 * (lo + hi);
        if entropy_term(mid) + entropy_term(1.0 - mid) < i0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Effective transmission rate `r = 1 − c` (message bits per protocol run).
pub fn transmission_rate(c: f64) -> Result<f64> {
    check_unit("c", c)?;
    Ok(1.0 - c)
}

/// Probability that Eve gets through one message run undetected:
/// `s(c, d) = (1 − c) / (1 − c(1 − d))`.
pub fn survival_per_message(c: f64, d: f64) -> Result<f64> {
    check_unit("c", c)?;
    check_unit("d", d)?;
    let denom = 1.0 - c * (1.0 - d);
    if denom <= 0.0 {
        return Err(AnalysisError::Divergent);
    }
    Ok((1.0 - c) / denom)
}

/// Probability that Eve eavesdrops `info` bits before detection:
/// `s(I, c, d) = s(c, d)^(I / I₀(d))` with equal priors.
pub fn survival_total(info: f64, c: f64, d: f64) -> Result<f64> {
    if !info.is_finite() || info < 0.0 {
        return Err(AnalysisError::OutOfDomain {
            name: "I",
            value: info,
            domain: "[0, inf)",
        });
    }
    check_unit("c", c)?;
    if d == 0.0 {
        return Err(AnalysisError::ZeroInformation);
    }
    if !(d > 0.0 && d < 1.0) {
        return Err(AnalysisError::OutOfDomain {
            name: "d",
            value: d,
            domain: "(0, 1)",
        });
    }
    let per_run = survival_per_message(c, d)?;
    let runs = info / binary_info(d)?;
    Ok(per_run.powf(runs))
}

/// Survival probability over a grid `I = I_max·k/steps`, `k = 0..=steps`,
/// for each `d` in `d_list` (curves emitted in `d_list` order).
pub fn success_curve(
    c: f64,
    d_list: &[f64],
    i_max: f64,
    steps: usize,
) -> Result<Vec<SecurityPoint>> {
    check_unit("c", c)?;
    if !i_max.is_finite() || i_max < 0.0 {
        return Err(AnalysisError::OutOfDomain {
            name: "I_max",
            value: i_max,
            domain: "[0, inf)",
        });
    }
    if steps == 0 {
        return Err(AnalysisError::OutOfDomain {
            name: "steps",
            value: 0.0,
            domain: "[1, inf)",
        });
    }
    let mut points = Vec::with_capacity(d_list.len() * (steps + 1));
    for &d in d_list {
        if !(d > 0.0 && d <= 0.5) {
            return Err(AnalysisError::OutOfDomain {
                name: "d",
                value: d,
                domain: "(0, 0.5]",
            });
        }
        let i0 = binary_info(d)?;
        for k in 0..=steps {
            let info = i_max * k as f64 / steps as f64;
            points.push(SecurityPoint {
                info,
                c,
                d,
                max_info: i0,
                survival: survival_total(info, c, d)?,
            });
        }
    }
    Ok(points)
}

/// Detection probability of BB84 under a full-information attack.
pub const BB84_FULL_INFO_DETECTION: f64 = 0.25;
/// Fraction of BB84 transmissions discarded after basis comparison.
pub const BB84_DISCARD_RATE: f64 = 0.5;

pub fn bb84_comparison() -> f64 {
    BB84_FULL_INFO_DETECTION
}

/// One-line note comparing full-information detection rates with BB84.
pub fn bb84_annotation() -> String {
    let ping_pong = detection_probability(0.5, 0.5).expect("valid constant");
    format!(
        "full-information attack: ping-pong d={ping_pong}, BB84 d={}, ratio={}; \
         BB84 also discards {} of transmitted bits (discard_rate={})",
        BB84_FULL_INFO_DETECTION,
        ping_pong / BB84_FULL_INFO_DETECTION,
        BB84_DISCARD_RATE,
        BB84_DISCARD_RATE,
    )
}
