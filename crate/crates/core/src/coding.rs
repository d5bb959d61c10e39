//! Random linear network coding over GF(2^8): encoding, rank tracking, decoding.

use std::fmt;
use std::ops::{Add, AddAssign, Mul};

use rand::Rng;
use thiserror::Error;

use crate::topology::NodeId;

/// Reduction polynomial x^8 + x^4 + x^3 + x + 1, reduced form (high bit implicit).
const POLY: u8 = 0x1b;

const fn mul_slow(mut a: u8, mut b: u8) -> u8 {
    let mut acc = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        let carry = a & 0x80;
        a <<= 1;
        if carry != 0 {
            a ^= POLY;
        }
        b >>= 1;
    }
    acc
}

// Powers of the generator 0x03, doubled so a log-sum never needs a modulo.
const EXP: [u8; 510] = {
    let mut table = [0u8; 510];
    let mut x = 1u8;
    let mut i = 0;
    while i < 510 {
        table[i] = x;
        x = mul_slow(x, 3);
        i += 1;
    }
    table
};

const LOG: [u8; 256] = {
    let mut table = [0u8; 256];
    let mut i = 0;
    while i < 255 {
        table[EXP[i] as usize] = i as u8;
        i += 1;
    }
    table
};

/// An element of GF(2^8). Addition is XOR.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Multiplicative inverse. Panics on zero.
    pub fn inv(self) -> Gf256 {
        assert!(self.0 != 0, "zero has no inverse in GF(256)");
        Gf256(EXP[255 - LOG[self.0 as usize] as usize])
    }
}

impl Add for Gf256 {
    type Output = Gf256;
    fn add(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl AddAssign for Gf256 {
    fn add_assign(&mut self, rhs: Gf256) {
        self.0 ^= rhs.0;
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    fn mul(self, rhs: Gf256) -> Gf256 {
        if self.0 == 0 || rhs.0 == 0 {
            Gf256(0)
        } else {
            Gf256(EXP[LOG[self.0 as usize] as usize + LOG[rhs.0 as usize] as usize])
        }
    }
}

impl fmt::Debug for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02x}", self.0)
    }
}

/// Identifier of a message (a generation of K source packets).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct MessageId(pub u32);

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum CodingError {
    #[error("coefficient vector length {got} does not match division count {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("decoder holds rank {rank} of {k}, not yet decodable")]
    NotYetDecodable { rank: usize, k: usize },
    #[error("payload length {got} does not match message payload length {expected}")]
    PayloadMismatch { expected: usize, got: usize },
    #[error("message must be divided into at least one packet")]
    EmptyMessage,
    #[error("source packets must share one payload length")]
    RaggedPayloads,
    #[error("malformed wire packet: {0}")]
    MalformedWire(&'static str),
}

/// A message divided into K equal-length source packets.
#[derive(Clone, Debug)]
pub struct SourceMessage {
    pub message_id: MessageId,
    packets: Vec<Vec<u8>>,
}

impl SourceMessage {
    pub fn new(message_id: MessageId, packets: Vec<Vec<u8>>) -> Result<Self, CodingError> {
        if packets.is_empty() {
            return Err(CodingError::EmptyMessage);
        }
        let len = packets[0].len();
        if packets.iter().any(|p| p.len() != len) {
            return Err(CodingError::RaggedPayloads);
        }
        Ok(SourceMessage { message_id, packets })
    }

    /// Random payload contents, for traffic generation and tests.
    pub fn random(message_id: MessageId, k: usize, payload_len: usize, rng: &mut impl Rng) -> Self {
        assert!(k >= 1);
        let packets = (0..k)
            .map(|_| (0..payload_len).map(|_| rng.gen()).collect())
            .collect();
        SourceMessage { message_id, packets }
    }

    pub fn division_count(&self) -> usize {
        self.packets.len()
    }

    pub fn payload_len(&self) -> usize {
        self.packets[0].len()
    }

    pub fn packets(&self) -> &[Vec<u8>] {
        &self.packets
    }
}

/// Identity of a coded packet: the message plus the exact coefficient vector.
/// Two packets with equal identity carry the same information everywhere.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct PacketIdentity {
    pub message_id: MessageId,
    pub coefficients: Box<[u8]>,
}

/// A random linear combination of one message's source packets.
#[derive(Clone, Debug)]
pub struct CodedPacket {
    pub message_id: MessageId,
    pub coefficients: Vec<Gf256>,
    pub payload: Vec<u8>,
    pub origin: NodeId,
    pub created_slot: u64,
    /// Nodes visited by this copy, starting at the origin.
    pub trace: Vec<NodeId>,
}

impl CodedPacket {
    pub fn identity(&self) -> PacketIdentity {
        PacketIdentity {
            message_id: self.message_id,
            coefficients: self.coefficients.iter().map(|c| c.0).collect(),
        }
    }
}

/// Encode one fresh combination of the message with uniformly random
/// coefficients, redrawing the all-zero vector.
pub fn encode(
    message: &SourceMessage,
    origin: NodeId,
    created_slot: u64,
    rng: &mut impl Rng,
) -> CodedPacket {
    let k = message.division_count();
    let mut coefficients: Vec<Gf256> = vec![Gf256::ZERO; k];
    loop {
        for c in coefficients.iter_mut() {
            *c = Gf256(rng.gen());
        }
        if coefficients.iter().any(|c| !c.is_zero()) {
            break;
        }
    }
    let payload = combine(message.packets(), &coefficients);
    CodedPacket {
        message_id: message.message_id,
        coefficients,
        payload,
        origin,
        created_slot,
        trace: vec![origin],
    }
}

/// Byte-wise linear combination sum_k alpha_k * x_k.
pub fn combine(packets: &[Vec<u8>], coefficients: &[Gf256]) -> Vec<u8> {
    let len = packets.first().map_or(0, |p| p.len());
    let mut out = vec![0u8; len];
    for (alpha, packet) in coefficients.iter().zip(packets) {
        if alpha.is_zero() {
            continue;
        }
        for (o, &b) in out.iter_mut().zip(packet.iter()) {
            *o ^= (*alpha * Gf256(b)).0;
        }
    }
    out
}

struct DecodeRow {
    coefficients: Vec<Gf256>,
    payload: Vec<u8>,
    pivot: usize,
}

/// Rank tracker and decoder: received coefficient vectors kept in reduced
/// row-echelon form, with payloads carried through every row operation.
pub struct DecoderState {
    message_id: MessageId,
    k: usize,
    rows: Vec<DecodeRow>,
}

impl DecoderState {
    pub fn new(message_id: MessageId, k: usize) -> Self {
        assert!(k >= 1);
        DecoderState {
            message_id,
            k,
            rows: Vec::with_capacity(k),
        }
    }

    pub fn message_id(&self) -> MessageId {
        self.message_id
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn division_count(&self) -> usize {
        self.k
    }

    pub fn is_complete(&self) -> bool {
        self.rows.len() == self.k
    }

    /// Row-reduce the packet against the basis. Returns true iff the packet
    /// was innovative (linearly independent), incrementing the rank.
    pub fn absorb(&mut self, packet: &CodedPacket) -> Result<bool, CodingError> {
        if packet.coefficients.len() != self.k {
            return Err(CodingError::DimensionMismatch {
                expected: self.k,
                got: packet.coefficients.len(),
            });
        }
        if let Some(row) = self.rows.first() {
            if row.payload.len() != packet.payload.len() {
                return Err(CodingError::PayloadMismatch {
                    expected: row.payload.len(),
                    got: packet.payload.len(),
                });
            }
        }
        let mut coefficients = packet.coefficients.clone();
        let mut payload = packet.payload.clone();
        for row in &self.rows {
            let factor = coefficients[row.pivot];
            if !factor.is_zero() {
                eliminate(&mut coefficients, &mut payload, row, factor);
            }
        }
        let pivot = match coefficients.iter().position(|c| !c.is_zero()) {
            Some(p) => p,
            None => return Ok(false),
        };
        // Normalize so the pivot is 1, then clear the pivot column above.
        let inv = coefficients[pivot].inv();
        for c in coefficients.iter_mut() {
            *c = *c * inv;
        }
        for b in payload.iter_mut() {
            *b = (Gf256(*b) * inv).0;
        }
        let new_row = DecodeRow {
            coefficients,
            payload,
            pivot,
        };
        for row in self.rows.iter_mut() {
            let factor = row.coefficients[new_row.pivot];
            if !factor.is_zero() {
                eliminate(&mut row.coefficients, &mut row.payload, &new_row, factor);
            }
        }
        self.rows.push(new_row);
        Ok(true)
    }

    /// Back-substitution; at full rank the basis is the identity, so the row
    /// payloads are exactly the original source packets.
    pub fn decode(&self) -> Result<Vec<Vec<u8>>, CodingError> {
        if !self.is_complete() {
            return Err(CodingError::NotYetDecodable {
                rank: self.rows.len(),
                k: self.k,
            });
        }
        let mut out: Vec<Option<&DecodeRow>> = vec![None; self.k];
        for row in &self.rows {
            debug_assert!(row.coefficients[row.pivot] == Gf256::ONE);
            out[row.pivot] = Some(row);
        }
        Ok(out
            .into_iter()
            .map(|row| row.expect("full-rank basis has one pivot per column").payload.clone())
            .collect())
    }
}

fn eliminate(coefficients: &mut [Gf256], payload: &mut [u8], row: &DecodeRow, factor: Gf256) {
    for (c, rc) in coefficients.iter_mut().zip(&row.coefficients) {
        *c += factor * *rc;
    }
    for (b, rb) in payload.iter_mut().zip(&row.payload) {
        *b ^= (factor * Gf256(*rb)).0;
    }
}

/// Wire layout of a coded packet for trace files: message id (4 bytes,
/// big-endian), K (2 bytes), coefficient vector (K bytes), payload length
/// (4 bytes), payload. Hop traces are simulator metadata and stay off the wire.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WirePacket {
    pub message_id: MessageId,
    pub coefficients: Vec<Gf256>,
    pub payload: Vec<u8>,
}

impl From<&CodedPacket> for WirePacket {
    fn from(packet: &CodedPacket) -> Self {
        WirePacket {
            message_id: packet.message_id,
            coefficients: packet.coefficients.clone(),
            payload: packet.payload.clone(),
        }
    }
}

impl WirePacket {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(10 + self.coefficients.len() + self.payload.len());
        out.extend_from_slice(&self.message_id.0.to_be_bytes());
        out.extend_from_slice(&(self.coefficients.len() as u16).to_be_bytes());
        out.extend(self.coefficients.iter().map(|c| c.0));
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodingError> {
        if bytes.len() < 6 {
            return Err(CodingError::MalformedWire("header truncated"));
        }
        let message_id = MessageId(u32::from_be_bytes(bytes[0..4].try_into().unwrap()));
        let k = u16::from_be_bytes(bytes[4..6].try_into().unwrap()) as usize;
        if k == 0 {
            return Err(CodingError::MalformedWire("zero division count"));
        }
        let coeff_end = 6 + k;
        if bytes.len() < coeff_end + 4 {
            return Err(CodingError::MalformedWire("coefficients truncated"));
        }
        let coefficients = bytes[6..coeff_end].iter().map(|&b| Gf256(b)).collect();
        let payload_len =
            u32::from_be_bytes(bytes[coeff_end..coeff_end + 4].try_into().unwrap()) as usize;
        let payload_end = coeff_end + 4 + payload_len;
        if bytes.len() != payload_end {
            return Err(CodingError::MalformedWire("payload length mismatch"));
        }
        Ok(WirePacket {
            message_id,
            coefficients,
            payload: bytes[coeff_end + 4..payload_end].to_vec(),
        })
    }
}
