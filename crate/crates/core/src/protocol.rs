//! Alice and Bob's state machines and the session loop.
//!
//! Each protocol run starts with Bob preparing `|ψ⁺⟩` on (travel, home) and
//! sending the travel qubit out. Alice then either measures it and announces
//! the result (control run) or applies `𝟙`/`σ_z` and sends it back for Bob's
//! Bell measurement (message run). A coincidence in a control run aborts the
//! session. A control run that passes does not consume a message bit.
//!
//! Register layout: travel is qubit 0, home is qubit 1, and an eavesdropper's
//! ancilla, when present, is qubit 2. Bell outcomes are read on the ordered
//! pair (travel, home).

use crate::adversary::{AdversaryError, AttackSpec, EveState, Extraction};
use crate::analysis::Priors;
use crate::channel::{
    make_duplex_pair, ChannelError, ClassicalLink, ClassicalMessage, MessageKind,
};
use crate::qstate::{make_bell, BellOutcome, QStateError, StateVector, Unitary};
use crate::rng::{substream, RandomSource};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

const STREAM_MODE: u64 = 1;
const STREAM_PLAINTEXT: u64 = 2;
const STREAM_KEY: u64 = 3;
const STREAM_QUANTUM: u64 = 4;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("a session with c = 1 never transmits a message bit")]
    NeverTerminates,
    #[error("a prepared pair is still pending")]
    PairPending,
    #[error("no prepared pair")]
    NoPair,
    #[error("session already aborted")]
    Aborted,
    #[error("step out of order: {0}")]
    OutOfOrder(&'static str),
    #[error("expected {expected} on the classical channel, got {got:?}")]
    UnexpectedMessage {
        expected: &'static str,
        got: ClassicalMessage,
    },
    #[error("classical channel: {0}")]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    State(#[from] QStateError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
}

pub type Result<T, E = ProtocolError> = std::result::Result<T, E>;

/// Whether the session carries a plaintext message or a fresh random key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Direct,
    Key,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Mode::Direct),
            "key" => Ok(Mode::Key),
            other => Err(format!("unknown mode '{other}', expected direct or key")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Direct => "direct",
            Mode::Key => "key",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Control,
    Message,
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::Control => "control",
            RunMode::Message => "message",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Probability of a control run.
    pub c: f64,
    pub n_bits: usize,
    pub mode: Mode,
    pub seed: u64,
    pub priors: Priors,
    /// Plaintext for `Mode::Direct`. When absent, bits are drawn from the
    /// priors. Must be absent in `Mode::Key`.
    pub message: Option<Vec<u8>>,
}

impl ProtocolConfig {
    pub fn new(c: f64, n_bits: usize, mode: Mode, seed: u64) -> Self {
        ProtocolConfig {
            c,
            n_bits,
            mode,
            seed,
            priors: Priors::uniform(),
            message: None,
        }
    }

    /// Direct-mode config carrying `message`.
    pub fn direct(c: f64, message: Vec<u8>, seed: u64) -> Self {
        ProtocolConfig {
            n_bits: message.len(),
            message: Some(message),
            ..ProtocolConfig::new(c, 0, Mode::Direct, seed)
        }
    }

    pub fn with_priors(mut self, priors: Priors) -> Self {
        self.priors = priors;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.c) {
            return Err(ProtocolError::InvalidConfig(format!(
                "c = {} outside [0, 1]",
                self.c
            )));
        }
        if self.n_bits == 0 {
            return Err(ProtocolError::InvalidConfig(
                "n_bits must be positive".into(),
            ));
        }
        self.priors
            .validate()
            .map_err(|e| ProtocolError::InvalidConfig(e.to_string()))?;
        if let Some(msg) = &self.message {
            if self.mode == Mode::Key {
                return Err(ProtocolError::InvalidConfig(
                    "key mode draws its own bits; no message may be supplied".into(),
                ));
            }
            if msg.len() != self.n_bits {
                return Err(ProtocolError::InvalidConfig(format!(
                    "message has {} bits, n_bits is {}",
                    msg.len(),
                    self.n_bits
                )));
            }
            if msg.iter().any(|&b| b > 1) {
                return Err(ProtocolError::InvalidConfig(
                    "message bits must be 0 or 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Index of a qubit in the session's joint register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QubitHandle(pub usize);

pub const TRAVEL: QubitHandle = QubitHandle(0);
pub const HOME: QubitHandle = QubitHandle(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoded {
    Bit(u8),
    Invalid,
}

/// Bob's decoding of a Bell outcome: `ψ⁺ → 0`, `ψ⁻ → 1`, `φ± → invalid`.
pub fn decode_bell(outcome: BellOutcome) -> Decoded {
    match outcome {
        BellOutcome::PsiPlus => Decoded::Bit(0),
        BellOutcome::PsiMinus => Decoded::Bit(1),
        BellOutcome::PhiPlus | BellOutcome::PhiMinus => Decoded::Invalid,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_index: u32,
    pub run_mode: RunMode,
    pub control_i: Option<u8>,
    pub control_j: Option<u8>,
    pub bell_outcome: Option<BellOutcome>,
    pub bit_index: Option<usize>,
    pub decoded: Option<Decoded>,
}

impl RunRecord {
    pub fn detected(&self) -> bool {
        matches!((self.control_i, self.control_j), (Some(i), Some(j)) if i == j)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub mode: Mode,
    pub events: Vec<RunRecord>,
    pub aborted: bool,
    pub detected_at_run: Option<u32>,
    /// Alice's full sequence `x^N`.
    pub message_bits: Vec<u8>,
    /// One entry per message run; `None` marks an invalid decode.
    pub decoded_bits: Vec<Option<u8>>,
    pub control_runs: u64,
    pub message_runs: u64,
    pub invalid_decodes: u64,
    /// Classical messages in order of delivery.
    pub classical_log: Vec<ClassicalMessage>,
    pub eve_log: Vec<Extraction>,
}

impl SessionTranscript {
    /// True when every bit arrived and decoded to Alice's value.
    pub fn bits_ok(&self) -> bool {
        !self.aborted
            && self.decoded_bits.len() == self.message_bits.len()
            && self
                .decoded_bits
                .iter()
                .zip(&self.message_bits)
                .all(|(d, m)| *d == Some(*m))
    }

    /// The shared key of a successful key-mode session.
    pub fn shared_key(&self) -> Option<&[u8]> {
        (self.mode == Mode::Key && self.bits_ok()).then_some(self.message_bits.as_slice())
    }

    /// Decoded bits as text, `?` for invalid decodes.
    pub fn decoded_string(&self) -> String {
        self.decoded_bits
            .iter()
            .map(|b| match b {
                Some(0) => '0',
                Some(_) => '1',
                None => '?',
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }
}

/// Alice's mode choice: control with probability `c`.
pub fn alice_choose_mode<R: Rng + ?Sized>(rng: &mut R, c: f64) -> RunMode {
    debug_assert!((0.0..=1.0).contains(&c));
    if rng.random::<f64>() < c {
        RunMode::Control
    } else {
        RunMode::Message
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stage {
    /// Travel qubit on its way to Alice.
    InTransit,
    /// Alice applied her coding operation; travel on its way back.
    Coded(u8),
}

#[derive(Debug, Clone)]
pub(crate) struct PendingPair {
    pub(crate) state: StateVector,
    pub(crate) travel: QubitHandle,
    pub(crate) home: QubitHandle,
    pub(crate) ancilla: Option<QubitHandle>,
    pub(crate) attacked: bool,
    pub(crate) extracted: bool,
    pub(crate) stage: Stage,
}

/// One protocol session between Alice and Bob, optionally with Eve on the
/// quantum channel.
pub struct Session {
    config: ProtocolConfig,
    pub(crate) attack: AttackSpec,
    mode_rng: RandomSource,
    pub(crate) quantum_rng: RandomSource,
    alice: Box<dyn ClassicalLink>,
    bob: Box<dyn ClassicalLink>,
    pub(crate) pair: Option<PendingPair>,
    pub(crate) eve: EveState,
    pub(crate) run_index: u32,
    runs_started: u32,
    message: Vec<u8>,
    events: Vec<RunRecord>,
    decoded: Vec<Option<u8>>,
    classical_log: Vec<ClassicalMessage>,
    control_runs: u64,
    invalid_decodes: u64,
    detected_at_run: Option<u32>,
}

impl Session {
    /// Session over an in-memory duplex channel.
    pub fn new(config: ProtocolConfig, attack: AttackSpec) -> Result<Self> {
        let (alice, bob) = make_duplex_pair();
        Session::with_links(config, attack, Box::new(alice), Box::new(bob))
    }

    pub fn with_links(
        config: ProtocolConfig,
        attack: AttackSpec,
        alice: Box<dyn ClassicalLink>,
        bob: Box<dyn ClassicalLink>,
    ) -> Result<Self> {
        config.validate()?;
        attack.validate()?;
        let message = match (&config.message, config.mode) {
            (Some(m), _) => m.clone(),
            (None, mode) => {
                let stream = if mode == Mode::Key {
                    STREAM_KEY
                } else {
                    STREAM_PLAINTEXT
                };
                let mut rng = substream(config.seed, stream);
                let p1 = config.priors.p1();
                (0..config.n_bits)
                    .map(|_| u8::from(rng.random::<f64>() < p1))
                    .collect()
            }
        };
        Ok(Session {
            mode_rng: substream(config.seed, STREAM_MODE),
            quantum_rng: substream(config.seed, STREAM_QUANTUM),
            config,
            attack,
            alice,
            bob,
            pair: None,
            eve: EveState::default(),
            run_index: 0,
            runs_started: 0,
            message,
            events: Vec::new(),
            decoded: Vec::new(),
            classical_log: Vec::new(),
            control_runs: 0,
            invalid_decodes: 0,
            detected_at_run: None,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn attack(&self) -> &AttackSpec {
        &self.attack
    }

    pub fn message(&self) -> &[u8] {
        &self.message
    }

    pub fn is_aborted(&self) -> bool {
        self.detected_at_run.is_some()
    }

    pub fn eve(&self) -> &EveState {
        &self.eve
    }

    /// Joint state of the pending pair (and ancilla, if attacked).
    pub fn joint_state(&self) -> Option<&StateVector> {
        self.pair.as_ref().map(|p| &p.state)
    }

    /// Index of the next message bit to send.
    pub fn next_bit_index(&self) -> usize {
        self.decoded.len()
    }

    pub fn is_complete(&self) -> bool {
        self.next_bit_index() >= self.config.n_bits
    }

    fn ensure_live(&self) -> Result<()> {
        if self.is_aborted() {
            return Err(ProtocolError::Aborted);
        }
        Ok(())
    }

    pub(crate) fn pending_mut(&mut self) -> Result<&mut PendingPair> {
        self.pair.as_mut().ok_or(ProtocolError::NoPair)
    }

    fn alice_send(&mut self, kind: MessageKind) -> Result<()> {
        let msg = ClassicalMessage::new(kind, self.run_index);
        self.alice.send(&msg)?;
        Ok(())
    }

    fn bob_send(&mut self, kind: MessageKind) -> Result<()> {
        let msg = ClassicalMessage::new(kind, self.run_index);
        self.bob.send(&msg)?;
        Ok(())
    }

    fn bob_recv(&mut self) -> Result<ClassicalMessage> {
        let msg = self.bob.recv()?;
        self.classical_log.push(msg);
        Ok(msg)
    }

    fn alice_recv(&mut self) -> Result<ClassicalMessage> {
        let msg = self.alice.recv()?;
        self.classical_log.push(msg);
        Ok(msg)
    }

    fn bob_expect_mode(&mut self, mode: RunMode) -> Result<()> {
        let msg = self.bob_recv()?;
        match msg.kind {
            MessageKind::ModeAnnounce { mode: m } if m == mode => Ok(()),
            _ => Err(ProtocolError::UnexpectedMessage {
                expected: "mode announcement",
                got: msg,
            }),
        }
    }

    /// Bob prepares `|ψ⁺⟩`, keeps the home qubit and sends the travel qubit.
    pub fn bob_prepare(&mut self) -> Result<(QubitHandle, QubitHandle)> {
        self.ensure_live()?;
        if self.pair.is_some() {
            return Err(ProtocolError::PairPending);
        }
        self.run_index = self.runs_started;
        self.runs_started += 1;
        self.pair = Some(PendingPair {
            state: make_bell(BellOutcome::PsiPlus),
            travel: TRAVEL,
            home: HOME,
            ancilla: None,
            attacked: false,
            extracted: false,
            stage: Stage::InTransit,
        });
        Ok((HOME, TRAVEL))
    }

    /// Alice's mode choice, drawn from the session's mode stream.
    pub fn alice_choose_mode(&mut self) -> RunMode {
        alice_choose_mode(&mut self.mode_rng, self.config.c)
    }

    /// Control run: Alice measures travel in the computational basis and
    /// announces `i`; Bob measures home to get `j`. `i = j` aborts.
    pub fn run_control(&mut self) -> Result<RunRecord> {
        self.ensure_live()?;
        let pair = self.pair.take().ok_or(ProtocolError::NoPair)?;
        if pair.stage != Stage::InTransit {
            self.pair = Some(pair);
            return Err(ProtocolError::OutOfOrder("control run after coding"));
        }
        let (i, after_alice) = pair.state.measure_z(pair.travel.0, &mut self.quantum_rng)?;
        self.alice_send(MessageKind::ModeAnnounce {
            mode: RunMode::Control,
        })?;
        self.alice_send(MessageKind::ControlResult { i })?;

        self.bob_expect_mode(RunMode::Control)?;
        let msg = self.bob_recv()?;
        let announced = match msg.kind {
            MessageKind::ControlResult { i } => i,
            _ => {
                return Err(ProtocolError::UnexpectedMessage {
                    expected: "control result",
                    got: msg,
                })
            }
        };
        let (j, _) = after_alice.measure_z(pair.home.0, &mut self.quantum_rng)?;
        self.control_runs += 1;
        let record = RunRecord {
            run_index: self.run_index,
            run_mode: RunMode::Control,
            control_i: Some(announced),
            control_j: Some(j),
            bell_outcome: None,
            bit_index: None,
            decoded: None,
        };
        if announced == j {
            self.bob_send(MessageKind::Abort)?;
            let msg = self.alice_recv()?;
            if msg.kind != MessageKind::Abort {
                return Err(ProtocolError::UnexpectedMessage {
                    expected: "abort",
                    got: msg,
                });
            }
            self.detected_at_run = Some(self.run_index);
        }
        self.events.push(record.clone());
        Ok(record)
    }

    /// Alice applies `Ĉ_bit` (`𝟙` or `σ_z`) to the travel qubit and sends it back.
    pub fn alice_encode(&mut self, bit: u8) -> Result<()> {
        self.ensure_live()?;
        if bit > 1 {
            return Err(ProtocolError::InvalidConfig(format!(
                "bit {bit} is not 0 or 1"
            )));
        }
        let pair = self.pending_mut()?;
        if pair.stage != Stage::InTransit {
            return Err(ProtocolError::OutOfOrder("travel qubit already coded"));
        }
        let op = if bit == 1 {
            Unitary::pauli_z(pair.travel.0)
        } else {
            Unitary::identity(pair.travel.0)
        };
        pair.state = pair.state.apply_unitary(&op)?;
        pair.stage = Stage::Coded(bit);
        self.alice_send(MessageKind::ModeAnnounce {
            mode: RunMode::Message,
        })
    }

    /// Bob Bell-measures (travel, home) and decodes the bit.
    pub fn bob_decode(&mut self) -> Result<RunRecord> {
        self.ensure_live()?;
        let pair = self.pair.take().ok_or(ProtocolError::NoPair)?;
        if !matches!(pair.stage, Stage::Coded(_)) {
            self.pair = Some(pair);
            return Err(ProtocolError::OutOfOrder("Bell measurement before coding"));
        }
        self.bob_expect_mode(RunMode::Message)?;
        let (outcome, _) = pair
            .state
            .bell_measure((pair.travel.0, pair.home.0), &mut self.quantum_rng)?;
        let decoded = decode_bell(outcome);
        let bit_index = self.decoded.len();
        match decoded {
            Decoded::Bit(b) => self.decoded.push(Some(b)),
            Decoded::Invalid => {
                self.decoded.push(None);
                self.invalid_decodes += 1;
            }
        }
        let record = RunRecord {
            run_index: self.run_index,
            run_mode: RunMode::Message,
            control_i: None,
            control_j: None,
            bell_outcome: Some(outcome),
            bit_index: Some(bit_index),
            decoded: Some(decoded),
        };
        self.events.push(record.clone());
        Ok(record)
    }

    /// Message run: Alice codes `bit`, Eve extracts if she attacked, Bob decodes.
    pub fn run_message(&mut self, bit: u8) -> Result<RunRecord> {
        self.alice_encode(bit)?;
        if self.pair.as_ref().is_some_and(|p| p.ancilla.is_some()) {
            self.eve_extract()?;
        }
        self.bob_decode()
    }

    /// Runs the protocol loop until all `N` bits are sent or Eve is detected.
    pub fn run_to_completion(&mut self) -> Result<()> {
        if self.config.c >= 1.0 {
            return Err(ProtocolError::NeverTerminates);
        }
        while !self.is_complete() && !self.is_aborted() {
            self.bob_prepare()?;
            self.eve_attack()?;
            match self.alice_choose_mode() {
                RunMode::Control => {
                    self.run_control()?;
                }
                RunMode::Message => {
                    let bit = self.message[self.next_bit_index()];
                    self.run_message(bit)?;
                }
            }
        }
        if !self.is_aborted() {
            self.run_index = self.runs_started;
            self.alice_send(MessageKind::Done)?;
            let msg = self.bob_recv()?;
            if msg.kind != MessageKind::Done {
                return Err(ProtocolError::UnexpectedMessage {
                    expected: "done",
                    got: msg,
                });
            }
        }
        Ok(())
    }

    pub fn transcript(&self) -> SessionTranscript {
        SessionTranscript {
            mode: self.config.mode,
            events: self.events.clone(),
            aborted: self.is_aborted(),
            detected_at_run: self.detected_at_run,
            message_bits: self.message.clone(),
            decoded_bits: self.decoded.clone(),
            control_runs: self.control_runs,
            message_runs: self.decoded.len() as u64,
            invalid_decodes: self.invalid_decodes,
            classical_log: self.classical_log.clone(),
            eve_log: self.eve.extraction_log.clone(),
        }
    }
}

/// Runs a full session over an in-memory classical channel.
pub fn run_session(
    config: ProtocolConfig,
    attack: Option<AttackSpec>,
) -> Result<SessionTranscript> {
    let mut session = Session::new(config, attack.unwrap_or_default())?;
    session.run_to_completion()?;
    Ok(session.transcript())
}

/// Runs a full session with the given classical endpoints for Alice and Bob.
pub fn run_session_over(
    config: ProtocolConfig,
    attack: Option<AttackSpec>,
    alice: Box<dyn ClassicalLink>,
    bob: Box<dyn ClassicalLink>,
) -> Result<SessionTranscript> {
    let mut session = Session::with_links(config, attack.unwrap_or_default(), alice, bob)?;
    session.run_to_completion()?;
    Ok(session.transcript())
}
