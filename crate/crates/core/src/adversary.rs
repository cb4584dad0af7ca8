//! Eve's attack on the travel qubit.
//!
//! Eve attaches a one-qubit ancilla `|χ⟩ = |0⟩` to the travel qubit on its
//! way to Alice and applies
//!
//! ```text
//! Ê = CNOT(ancilla → travel) · (𝟙 ⊗ R_y(2θ))
//! ```
//!
//! so that `Ê|0,0⟩ = cosθ|0,0⟩ + sinθ|1,1⟩` and `Ê|1,0⟩ = cosθ|1,0⟩ + sinθ|0,1⟩`.
//! The ancilla records whether the travel qubit was flipped. A control run
//! sees the flipped branch with probability `d = sin²θ`, whichever state Bob's
//! half projects the travel qubit onto.
//!
//! After Alice's coding step, at `θ = π/4` the (travel, ancilla) pair sits in
//! `φ⁺`/`ψ⁺` after `𝟙` and in `φ⁻`/`ψ⁻` after `σ_z`, so a Bell measurement
//! reveals the bit exactly. For smaller angles no extraction is simulated and
//! Eve's gain is reported through the bound `I₀(d)`.

use crate::protocol::{ProtocolError, QubitHandle, Session, Stage};
use crate::qstate::{BellOutcome, StateVector, Unitary};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversaryError {
    #[error("attack angle {0} outside [0, pi/4]")]
    AngleOutOfRange(f64),
    #[error("no attack configured")]
    NoAttack,
    #[error("travel qubit already attacked in this run")]
    AlreadyAttacked,
    #[error("travel qubit is no longer in transit to Alice")]
    NotInTransit,
    #[error("extraction requested before Alice's coding step")]
    BeforeCoding,
    #[error("extraction already performed in this run")]
    AlreadyExtracted,
    #[error("cannot parse attack '{0}': expected none, full or angle:<radians>")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    #[default]
    None,
    FullInfo,
    /// Rotation angle in radians, within `[0, π/4]`.
    Angle(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    kind: AttackKind,
    ancilla_qubits: usize,
}

impl Default for AttackSpec {
    fn default() -> Self {
        AttackSpec::none()
    }
}

impl AttackSpec {
    pub fn none() -> Self {
        AttackSpec {
            kind: AttackKind::None,
            ancilla_qubits: 0,
        }
    }

    pub fn full_info() -> Self {
        AttackSpec {
            kind: AttackKind::FullInfo,
            ancilla_qubits: 1,
        }
    }

    pub fn angle(theta: f64) -> Result<Self, AdversaryError> {
        let spec = AttackSpec {
            kind: AttackKind::Angle(theta),
            ancilla_qubits: 1,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Attack with detection probability `d ∈ [0, ½]`.
    pub fn from_detection(d: f64) -> Result<Self, AdversaryError> {
        if !(0.0..=0.5).contains(&d) {
            return Err(AdversaryError::AngleOutOfRange(d));
        }
        AttackSpec::angle(d.sqrt().asin().min(FRAC_PI_4))
    }

    pub fn validate(&self) -> Result<(), AdversaryError> {
        if let AttackKind::Angle(theta) = self.kind {
            if !(0.0..=FRAC_PI_4).contains(&theta) {
                return Err(AdversaryError::AngleOutOfRange(theta));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> AttackKind {
        self.kind
    }

    pub fn ancilla_qubits(&self) -> usize {
        self.ancilla_qubits
    }

    pub fn is_active(&self) -> bool {
        self.kind != AttackKind::None
    }

    pub fn theta(&self) -> f64 {
        match self.kind {
            AttackKind::None => 0.0,
            AttackKind::FullInfo => FRAC_PI_4,
            AttackKind::Angle(t) => t,
        }
    }

    /// True for `FullInfo` and for `Angle(π/4)`.
    pub fn is_full_info(&self) -> bool {
        match self.kind {
            AttackKind::None => false,
            AttackKind::FullInfo => true,
            AttackKind::Angle(t) => (t - FRAC_PI_4).abs() < 1e-12,
        }
    }

    /// `d = sin²θ`.
    pub fn detection_probability(&self) -> f64 {
        self.theta().sin().powi(2)
    }
}

impl FromStr for AttackSpec {
    type Err = AdversaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(AttackSpec::none()),
            "full" => Ok(AttackSpec::full_info()),
            other => {
                let theta = other
                    .strip_prefix("angle:")
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| AdversaryError::Parse(other.to_string()))?;
                AttackSpec::angle(theta)
            }
        }
    }
}

impl fmt::Display for AttackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AttackKind::None => f.write_str("none"),
            AttackKind::FullInfo => f.write_str("full"),
            AttackKind::Angle(t) => write!(f, "angle:{t}"),
        }
    }
}

/// The 4×4 attack operation on (travel, ancilla), travel as the low sub-index bit.
pub fn attack_unitary(
    spec: &AttackSpec,
    travel: QubitHandle,
    ancilla: QubitHandle,
) -> Result<Unitary, AdversaryError> {
    if !spec.is_active() {
        return Err(AdversaryError::NoAttack);
    }
    spec.validate()?;
    let (s, c) = spec.theta().sin_cos();
    let z = 0.0;
    // sub-index = travel + 2·ancilla; columns are inputs
    #[rustfmt::skip]
    let rows = [
        [c, z, -s, z],
        [z, c, z, -s],
        [z, s, z, c],
        [s, z, c, z],
    ];
    let entries = rows
        .iter()
        .flatten()
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    Ok(Unitary::new(entries, vec![travel.0, ancilla.0]).expect("rotation-copy is unitary"))
}

/// What Eve learned in one message run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveGuess {
    Bit(u8),
    /// Only the analytic bound `I₀(d)` applies.
    BoundOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub run_index: u32,
    pub guess: EveGuess,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EveState {
    /// Ancilla of the current run, if attacked.
    pub ancilla: Option<QubitHandle>,
    pub attacks: u64,
    pub extraction_log: Vec<Extraction>,
}

impl EveState {
    /// Guessed bits, in order, skipping bound-only entries.
    pub fn guessed_bits(&self) -> Vec<u8> {
        self.extraction_log
            .iter()
            .filter_map(|e| match e.guess {
                EveGuess::Bit(b) => Some(b),
                EveGuess::BoundOnly => None,
            })
            .collect()
    }
}

/// Eve's reading of her Bell outcome on (travel, ancilla).
pub fn guess_from_outcome(outcome: BellOutcome) -> u8 {
    match outcome {
        BellOutcome::PhiPlus | BellOutcome::PsiPlus => 0,
        BellOutcome::PhiMinus | BellOutcome::PsiMinus => 1,
    }
}

impl Session {
    /// Eve intercepts the travel qubit on its way to Alice, entangles her
    /// ancilla with it and forwards it. A no-op without a configured attack.
    pub fn eve_attack(&mut self) -> Result<(), ProtocolError> {
        let spec = self.attack;
        let pair = self.pending_mut()?;
        if pair.stage != Stage::InTransit {
            return Err(AdversaryError::NotInTransit.into());
        }
        if pair.attacked {
            return Err(AdversaryError::AlreadyAttacked.into());
        }
        pair.attacked = true;
        if !spec.is_active() {
            return Ok(());
        }
        let ancilla = QubitHandle(pair.state.num_qubits());
        let blank = StateVector::basis(1, 0)?;
        let widened = pair.state.tensor(&blank)?;
        let u = attack_unitary(&spec, pair.travel, ancilla)?;
        pair.state = widened.apply_unitary(&u)?;
        pair.ancilla = Some(ancilla);
        self.eve.ancilla = Some(ancilla);
        self.eve.attacks += 1;
        Ok(())
    }

    /// Eve's measurement after Alice's coding step. At full information she
    /// Bell-measures (travel, ancilla); otherwise she records a bound-only
    /// entry. The travel qubit then continues to Bob.
    pub fn eve_extract(&mut self) -> Result<EveGuess, ProtocolError> {
        let spec = self.attack;
        let run_index = self.run_index;
        let pair = self.pair.as_mut().ok_or(ProtocolError::NoPair)?;
        if !matches!(pair.stage, Stage::Coded(_)) {
            return Err(AdversaryError::BeforeCoding.into());
        }
        let ancilla = pair.ancilla.ok_or(AdversaryError::NoAttack)?;
        if pair.extracted {
            return Err(AdversaryError::AlreadyExtracted.into());
        }
        pair.extracted = true;
        let guess = if spec.is_full_info() {
            let (outcome, post) = pair
                .state
                .bell_measure((pair.travel.0, ancilla.0), &mut self.quantum_rng)?;
            pair.state = post;
            EveGuess::Bit(guess_from_outcome(outcome))
        } else {
            EveGuess::BoundOnly
        };
        self.eve
            .extraction_log
            .push(Extraction { run_index, guess });
        Ok(guess)
    }
}
