//! Classical message transport between Alice and Bob.
//!
//! Wire format of one frame (all integers big-endian):
//!
//! ```text
//! +----------------+-----+-------------------+
//! | length: u32    | tag | payload           |
//! +----------------+-----+-------------------+
//!                  |<------- length ------->|
//! ```
//!
//! | tag  | message        | payload                          |
//! |------|----------------|----------------------------------|
//! | 0x01 | ControlResult  | `i: u8` (0 or 1), `run_index: u32` |
//! | 0x02 | Abort          | `run_index: u32`                 |
//! | 0x03 | Done           | `run_index: u32`                 |
//! | 0x04 | ModeAnnounce   | `mode: u8` (0 message, 1 control), `run_index: u32` |
//!
//! Qubits never cross this channel; they stay with the in-process simulator.

use crate::protocol::RunMode;
use serde::{Deserialize, Serialize};
use std::io::{self, Read, Write};
use std::net::{Ipv4Addr, TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver, Sender};
use thiserror::Error;

pub const TAG_CONTROL_RESULT: u8 = 0x01;
pub const TAG_ABORT: u8 = 0x02;
pub const TAG_DONE: u8 = 0x03;
pub const TAG_MODE_ANNOUNCE: u8 = 0x04;

/// Upper bound on the length field.
pub const MAX_FRAME_LEN: u32 = 1 << 20;

const HEADER_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    ControlResult { i: u8 },
    Abort,
    Done,
    ModeAnnounce { mode: RunMode },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalMessage {
    pub kind: MessageKind,
    pub run_index: u32,
}

impl ClassicalMessage {
    pub fn new(kind: MessageKind, run_index: u32) -> Self {
        ClassicalMessage { kind, run_index }
    }
}

/// Errors from [`decode_frame`]. Everything except `NeedMoreData` is a
/// protocol violation by the peer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("incomplete frame: need {needed} more bytes")]
    NeedMoreData { needed: usize },
    #[error("unknown frame tag {0:#04x}")]
    UnknownTag(u8),
    #[error("frame length {0} exceeds the {MAX_FRAME_LEN}-byte limit")]
    FrameTooLarge(u32),
    #[error("malformed frame: {0}")]
    Malformed(&'static str),
}

impl FrameError {
    pub fn is_protocol_error(&self) -> bool {
        !matches!(self, FrameError::NeedMoreData { .. })
    }
}

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("channel closed")]
    Closed,
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("transport i/o: {0}")]
    Io(#[from] io::Error),
}

fn mode_byte(mode: RunMode) -> u8 {
    match mode {
        RunMode::Message => 0,
        RunMode::Control => 1,
    }
}

/// Canonical encoding of one message as a length-prefixed frame.
pub fn encode_frame(msg: &ClassicalMessage) -> Vec<u8> {
    let (tag, extra): (u8, Option<u8>) = match msg.kind {
        MessageKind::ControlResult { i } => (TAG_CONTROL_RESULT, Some(i)),
        MessageKind::Abort => (TAG_ABORT, None),
        MessageKind::Done => (TAG_DONE, None),
        MessageKind::ModeAnnounce { mode } => (TAG_MODE_ANNOUNCE, Some(mode_byte(mode))),
    };
    let len = 1 + extra.map_or(0, |_| 1) + 4;
    let mut out = Vec::with_capacity(HEADER_LEN + len);
    out.extend_from_slice(&(len as u32).to_be_bytes());
    out.push(tag);
    out.extend(extra);
    out.extend_from_slice(&msg.run_index.to_be_bytes());
    out
}

/// Decodes the frame at the start of `bytes`, returning the message and the
/// number of bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(ClassicalMessage, usize), FrameError> {
    if bytes.len() < HEADER_LEN {
        return Err(FrameError::NeedMoreData {
            needed: HEADER_LEN - bytes.len(),
        });
    }
    let len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    if len == 0 {
        return Err(FrameError::Malformed("zero-length frame"));
    }
    if len > MAX_FRAME_LEN {
        return Err(FrameError::FrameTooLarge(len));
    }
    let total = HEADER_LEN + len as usize;
    if bytes.len() < total {
        return Err(FrameError::NeedMoreData {
            needed: total - bytes.len(),
        });
    }
    let tag = bytes[HEADER_LEN];
    let payload = &bytes[HEADER_LEN + 1..total];
    let expected_payload = match tag {
        TAG_CONTROL_RESULT | TAG_MODE_ANNOUNCE => 5,
        TAG_ABORT | TAG_DONE => 4,
        other => return Err(FrameError::UnknownTag(other)),
    };
    if payload.len() != expected_payload {
        return Err(FrameError::Malformed("payload length does not match tag"));
    }
    let idx = &payload[payload.len() - 4..];
    let run_index = u32::from_be_bytes([idx[0], idx[1], idx[2], idx[3]]);
    let kind = match tag {
        TAG_CONTROL_RESULT => match payload[0] {
            i @ (0 | 1) => MessageKind::ControlResult { i },
            _ => return Err(FrameError::Malformed("control bit must be 0 or 1")),
        },
        TAG_MODE_ANNOUNCE => match payload[0] {
            0 => MessageKind::ModeAnnounce {
                mode: RunMode::Message,
            },
            1 => MessageKind::ModeAnnounce {
                mode: RunMode::Control,
            },
            _ => return Err(FrameError::Malformed("unknown mode byte")),
        },
        TAG_ABORT => MessageKind::Abort,
        _ => MessageKind::Done,
    };
    Ok((ClassicalMessage { kind, run_index }, total))
}

/// Reassembles frames from arbitrarily fragmented input.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Next complete message, or `None` if more bytes are needed.
    pub fn next_message(&mut self) -> Result<Option<ClassicalMessage>, FrameError> {
        match decode_frame(&self.buf) {
            Ok((msg, used)) => {
                self.buf.drain(..used);
                Ok(Some(msg))
            }
            Err(FrameError::NeedMoreData { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }
}

/// One party's end of the classical channel.
pub trait ClassicalLink {
    fn send(&mut self, msg: &ClassicalMessage) -> Result<(), ChannelError>;
    /// Blocks until a message arrives or the peer has closed.
    fn recv(&mut self) -> Result<ClassicalMessage, ChannelError>;
}

impl<L: ClassicalLink + ?Sized> ClassicalLink for Box<L> {
    fn send(&mut self, msg: &ClassicalMessage) -> Result<(), ChannelError> {
        (**self).send(msg)
    }

    fn recv(&mut self) -> Result<ClassicalMessage, ChannelError> {
        (**self).recv()
    }
}

/// In-memory endpoint; see [`make_duplex_pair`].
#[derive(Debug)]
pub struct DuplexEndpoint {
    tx: Option<Sender<ClassicalMessage>>,
    rx: Receiver<ClassicalMessage>,
}

impl DuplexEndpoint {
    /// Stops sending; the peer sees `Closed` once it drains the queue.
    pub fn close(&mut self) {
        self.tx = None;
    }

    /// Non-blocking receive.
    pub fn try_recv(&mut self) -> Result<Option<ClassicalMessage>, ChannelError> {
        match self.rx.try_recv() {
            Ok(m) => Ok(Some(m)),
            Err(mpsc::TryRecvError::Empty) => Ok(None),
            Err(mpsc::TryRecvError::Disconnected) => Err(ChannelError::Closed),
        }
    }
}

impl ClassicalLink for DuplexEndpoint {
    fn send(&mut self, msg: &ClassicalMessage) -> Result<(), ChannelError> {
        let tx = self.tx.as_ref().ok_or(ChannelError::Closed)?;
        tx.send(*msg).map_err(|_| ChannelError::Closed)
    }

    fn recv(&mut self) -> Result<ClassicalMessage, ChannelError> {
        self.rx.recv().map_err(|_| ChannelError::Closed)
    }
}

/// Two connected endpoints with FIFO, lossless delivery in each direction.
pub fn make_duplex_pair() -> (DuplexEndpoint, DuplexEndpoint) {
    let (tx_ab, rx_ab) = mpsc::channel();
    let (tx_ba, rx_ba) = mpsc::channel();
    (
        DuplexEndpoint {
            tx: Some(tx_ab),
            rx: rx_ba,
        },
        DuplexEndpoint {
            tx: Some(tx_ba),
            rx: rx_ab,
        },
    )
}

/// Frames messages over a byte stream.
#[derive(Debug)]
pub struct StreamLink<S> {
    stream: S,
    decoder: FrameDecoder,
}

impl<S: Read + Write> StreamLink<S> {
    pub fn new(stream: S) -> Self {
        StreamLink {
            stream,
            decoder: FrameDecoder::new(),
        }
    }

    pub fn into_inner(self) -> S {
        self.stream
    }
}

impl<S: Read + Write> ClassicalLink for StreamLink<S> {
    fn send(&mut self, msg: &ClassicalMessage) -> Result<(), ChannelError> {
        self.stream.write_all(&encode_frame(msg))?;
        self.stream.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<ClassicalMessage, ChannelError> {
        let mut chunk = [0u8; 256];
        loop {
            if let Some(msg) = self.decoder.next_message()? {
                return Ok(msg);
            }
            let n = match self.stream.read(&mut chunk) {
                Ok(n) => n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            };
            if n == 0 {
                return Err(ChannelError::Closed);
            }
            self.decoder.push(&chunk[..n]);
        }
    }
}

/// Connected TCP endpoints on `127.0.0.1:port` (`port = 0` picks a free one).
pub fn loopback_pair(port: u16) -> io::Result<(StreamLink<TcpStream>, StreamLink<TcpStream>)> {
    let listener = TcpListener::bind((Ipv4Addr::LOCALHOST, port))?;
    let addr = listener.local_addr()?;
    let client = TcpStream::connect(addr)?;
    let (server, _) = listener.accept()?;
    client.set_nodelay(true)?;
    server.set_nodelay(true)?;
    Ok((StreamLink::new(client), StreamLink::new(server)))
}
