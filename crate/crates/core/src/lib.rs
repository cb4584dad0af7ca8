//! Simulation and security analysis of the ping-pong protocol: deterministic
//! direct communication over an entangled qubit pair, with an eavesdropper
//! model and closed-form bounds on what she can learn before detection.
//!
//! Module map:
//!
//! * [`qstate`]: small pure-state simulator (Bell states, unitaries,
//!   measurements, partial trace, entropy).
//! * [`protocol`]: Alice and Bob's state machines and session loop.
//! * [`adversary`]: Eve's parameterized attack and extraction.
//! * [`analysis`]: closed-form detection, information and survival formulas.
//! * [`montecarlo`]: seeded batch simulation and empirical estimates.
//! * [`channel`]: classical message transport and its wire codec.
//! * [`cli`]: command-line front end.

pub mod adversary;
pub mod analysis;
pub mod channel;
pub mod cli;
pub mod montecarlo;
pub mod protocol;
pub mod qstate;
pub mod rng;

pub use adversary::{attack_unitary, AttackKind, AttackSpec, EveGuess, EveState, Extraction};
pub use analysis::{Priors, SecurityPoint};
pub use channel::{ClassicalLink, ClassicalMessage, MessageKind};
pub use montecarlo::{BatchConfig, BatchStats};
pub use protocol::{
    run_session, run_session_over, Mode, ProtocolConfig, ProtocolError, RunMode, RunRecord,
    Session, SessionTranscript,
};
pub use qstate::{BellOutcome, DensityMatrix, QStateError, StateVector, Unitary};
pub use rng::RandomSource;
