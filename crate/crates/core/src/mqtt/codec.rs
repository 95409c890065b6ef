use std::io::{self, Read, Write};

use thiserror::Error;

use super::topic::{validate_filter, validate_topic, TopicError};

/// Largest value the 4-byte remaining-length varint can carry.
pub const MAX_REMAINING_LENGTH: u32 = 268_435_455;

const PROTOCOL_NAME: &[u8] = b"MQTT";
const PROTOCOL_LEVEL: u8 = 4;
const CLEAN_SESSION: u8 = 0x02;
const KEEP_ALIVE_SECS: u16 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QoS {
    AtMostOnce = 0,
    AtLeastOnce = 1,
}

impl QoS {
    pub fn from_u8(v: u8) -> Result<Self, CodecError> {
        match v {
            0 => Ok(QoS::AtMostOnce),
            1 => Ok(QoS::AtLeastOnce),
            other => Err(CodecError::InvalidQos(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlPacket {
    Connect {
        client_id: String,
    },
    ConnAck {
        return_code: u8,
    },
    Publish {
        topic: String,
        payload: Vec<u8>,
        qos: QoS,
        packet_id: Option<u16>,
    },
    PubAck {
        packet_id: u16,
    },
    Subscribe {
        packet_id: u16,
        filters: Vec<(String, QoS)>,
    },
    SubAck {
        packet_id: u16,
        granted: Vec<u8>,
    },
    PingReq,
    PingResp,
    Disconnect,
}

impl ControlPacket {
    pub fn type_name(&self) -> &'static str {
        match self {
            ControlPacket::Connect { .. } => "CONNECT",
            ControlPacket::ConnAck { .. } => "CONNACK",
            ControlPacket::Publish { .. } => "PUBLISH",
            ControlPacket::PubAck { .. } => "PUBACK",
            ControlPacket::Subscribe { .. } => "SUBSCRIBE",
            ControlPacket::SubAck { .. } => "SUBACK",
            ControlPacket::PingReq => "PINGREQ",
            ControlPacket::PingResp => "PINGRESP",
            ControlPacket::Disconnect => "DISCONNECT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("unknown or unsupported packet type {0}")]
    UnknownPacketType(u8),
    #[error("string field is not valid UTF-8")]
    MalformedUtf8,
    #[error("declared remaining length {declared} but {actual} bytes present")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("remaining length uses more than 4 bytes")]
    MalformedRemainingLength,
    #[error("input ended before the frame was complete")]
    Truncated,
    #[error("remaining length {0} exceeds {MAX_REMAINING_LENGTH}")]
    TooLarge(usize),
    #[error("invalid fixed-header flags {flags:#06b} for packet type {packet_type}")]
    InvalidFlags { packet_type: u8, flags: u8 },
    #[error("invalid QoS {0}")]
    InvalidQos(u8),
    #[error("invalid topic: {0}")]
    InvalidTopic(#[from] TopicError),
    #[error("string field longer than 65535 bytes")]
    StringTooLong,
    #[error("protocol violation: {0}")]
    Protocol(&'static str),
}

/// Minimal base-128 varint, least-significant group first.
pub fn encode_remaining_length(n: u32, out: &mut Vec<u8>) -> Result<(), CodecError> {
    if n > MAX_REMAINING_LENGTH {
        return Err(CodecError::TooLarge(n as usize));
    }
    let mut n = n;
    loop {
        let mut byte = (n % 128) as u8;
        n /= 128;
        if n > 0 {
            byte |= 0x80;
        }
        out.push(byte);
        if n == 0 {
            return Ok(());
        }
    }
}

/// Returns the decoded value and how many bytes it occupied.
pub fn decode_remaining_length(buf: &[u8]) -> Result<(u32, usize), CodecError> {
    let mut value: u32 = 0;
    let mut multiplier: u32 = 1;
    for i in 0..4 {
        let byte = *buf.get(i).ok_or(CodecError::Truncated)?;
        value += u32::from(byte & 0x7F) * multiplier;
        if byte & 0x80 == 0 {
            return Ok((value, i + 1));
        }
        multiplier *= 128;
    }
    Err(CodecError::MalformedRemainingLength)
}

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<(), CodecError> {
    let len = u16::try_from(s.len()).map_err(|_| CodecError::StringTooLong)?;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

fn check_packet_id(id: u16) -> Result<u16, CodecError> {
    if id == 0 {
        Err(CodecError::Protocol("packet identifier must be non-zero"))
    } else {
        Ok(id)
    }
}

/// Serialize one packet into a complete frame.
pub fn encode(packet: &ControlPacket) -> Result<Vec<u8>, CodecError> {
    let mut body = Vec::new();
    let header: u8 = match packet {
        ControlPacket::Connect { client_id } => {
            put_str(&mut body, "MQTT")?;
            body.push(PROTOCOL_LEVEL);
            body.push(CLEAN_SESSION);
            body.extend_from_slice(&KEEP_ALIVE_SECS.to_be_bytes());
            put_str(&mut body, client_id)?;
            0x10
        }
        ControlPacket::ConnAck { return_code } => {
            body.extend_from_slice(&[0x00, *return_code]);
            0x20
        }
        ControlPacket::Publish {
            topic,
            payload,
            qos,
            packet_id,
        } => {
            validate_topic(topic)?;
            put_str(&mut body, topic)?;
            match (qos, packet_id) {
                (QoS::AtMostOnce, None) => {}
                (QoS::AtLeastOnce, Some(id)) => {
                    body.extend_from_slice(&check_packet_id(*id)?.to_be_bytes())
                }
                (QoS::AtMostOnce, Some(_)) => {
                    return Err(CodecError::Protocol("QoS 0 publish carries a packet id"))
                }
                (QoS::AtLeastOnce, None) => {
                    return Err(CodecError::Protocol("QoS 1 publish lacks a packet id"))
                }
            }
            body.extend_from_slice(payload);
            0x30 | ((*qos as u8) << 1)
        }
        ControlPacket::PubAck { packet_id } => {
            body.extend_from_slice(&check_packet_id(*packet_id)?.to_be_bytes());
            0x40
        }
        ControlPacket::Subscribe { packet_id, filters } => {
            if filters.is_empty() {
                return Err(CodecError::Protocol("SUBSCRIBE with no filters"));
            }
            body.extend_from_slice(&check_packet_id(*packet_id)?.to_be_bytes());
            for (filter, qos) in filters {
                validate_filter(filter)?;
                put_str(&mut body, filter)?;
                body.push(*qos as u8);
            }
            0x82
        }
        ControlPacket::SubAck { packet_id, granted } => {
            body.extend_from_slice(&check_packet_id(*packet_id)?.to_be_bytes());
            body.extend_from_slice(granted);
            0x90
        }
        ControlPacket::PingReq => 0xC0,
        ControlPacket::PingResp => 0xD0,
        ControlPacket::Disconnect => 0xE0,
    };
    let len = u32::try_from(body.len()).map_err(|_| CodecError::TooLarge(body.len()))?;
    let mut frame = Vec::with_capacity(body.len() + 5);
    frame.push(header);
    encode_remaining_length(len, &mut frame)?;
    frame.extend_from_slice(&body);
    Ok(frame)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn u8(&mut self) -> Result<u8, CodecError> {
        let b = *self.buf.get(self.pos).ok_or(CodecError::Truncated)?;
        self.pos += 1;
        Ok(b)
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_be_bytes([self.u8()?, self.u8()?]))
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos.checked_add(n).ok_or(CodecError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(CodecError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn string(&mut self) -> Result<String, CodecError> {
        let len = self.u16()? as usize;
        let raw = self.bytes(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| CodecError::MalformedUtf8)
    }

    fn rest(&mut self) -> &'a [u8] {
        let s = &self.buf[self.pos..];
        self.pos = self.buf.len();
        s
    }

    fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    fn finish(&self) -> Result<(), CodecError> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(CodecError::Protocol("trailing bytes in packet body"))
        }
    }
}

fn expect_flags(packet_type: u8, flags: u8, want: u8) -> Result<(), CodecError> {
    if flags == want {
        Ok(())
    } else {
        Err(CodecError::InvalidFlags { packet_type, flags })
    }
}

/// Decode exactly one frame. The buffer must hold the whole frame and nothing
/// else.
pub fn decode(frame: &[u8]) -> Result<ControlPacket, CodecError> {
    let first = *frame.first().ok_or(CodecError::Truncated)?;
    let packet_type = first >> 4;
    let flags = first & 0x0F;
    if !matches!(packet_type, 1..=4 | 8 | 9 | 12..=14) {
        return Err(CodecError::UnknownPacketType(packet_type));
    }
    let (declared, used) = decode_remaining_length(&frame[1..])?;
    let body = &frame[1 + used..];
    if body.len() != declared as usize {
        return Err(CodecError::LengthMismatch {
            declared: declared as usize,
            actual: body.len(),
        });
    }
    decode_body(packet_type, flags, body)
}

fn decode_body(packet_type: u8, flags: u8, body: &[u8]) -> Result<ControlPacket, CodecError> {
    let mut c = Cursor { buf: body, pos: 0 };
    let packet = match packet_type {
        1 => {
            expect_flags(packet_type, flags, 0)?;
            let name = c.u16().and_then(|n| c.bytes(n as usize))?;
            if name != PROTOCOL_NAME {
                return Err(CodecError::Protocol("unexpected protocol name"));
            }
            if c.u8()? != PROTOCOL_LEVEL {
                return Err(CodecError::Protocol("unsupported protocol level"));
            }
            let connect_flags = c.u8()?;
            if connect_flags & !CLEAN_SESSION != 0 {
                return Err(CodecError::Protocol("will/username/password are not supported"));
            }
            let _keep_alive = c.u16()?;
            let client_id = c.string()?;
            ControlPacket::Connect { client_id }
        }
        2 => {
            expect_flags(packet_type, flags, 0)?;
            let _session_present = c.u8()?;
            ControlPacket::ConnAck {
                return_code: c.u8()?,
            }
        }
        3 => {
            if flags & 0b1001 != 0 {
                // DUP and RETAIN are outside the supported subset.
                return Err(CodecError::InvalidFlags { packet_type, flags });
            }
            let qos = QoS::from_u8((flags >> 1) & 0b11)?;
            let topic = c.string()?;
            validate_topic(&topic)?;
            let packet_id = match qos {
                QoS::AtMostOnce => None,
                QoS::AtLeastOnce => Some(check_packet_id(c.u16()?)?),
            };
            let payload = c.rest().to_vec();
            ControlPacket::Publish {
                topic,
                payload,
                qos,
                packet_id,
            }
        }
        4 => {
            expect_flags(packet_type, flags, 0)?;
            ControlPacket::PubAck {
                packet_id: check_packet_id(c.u16()?)?,
            }
        }
        8 => {
            expect_flags(packet_type, flags, 0b0010)?;
            let packet_id = check_packet_id(c.u16()?)?;
            let mut filters = Vec::new();
            while !c.is_empty() {
                let filter = c.string()?;
                validate_filter(&filter)?;
                let qos = QoS::from_u8(c.u8()?)?;
                filters.push((filter, qos));
            }
            if filters.is_empty() {
                return Err(CodecError::Protocol("SUBSCRIBE with no filters"));
            }
            ControlPacket::Subscribe { packet_id, filters }
        }
        9 => {
            expect_flags(packet_type, flags, 0)?;
            let packet_id = check_packet_id(c.u16()?)?;
            ControlPacket::SubAck {
                packet_id,
                granted: c.rest().to_vec(),
            }
        }
        12 | 13 | 14 => {
            expect_flags(packet_type, flags, 0)?;
            match packet_type {
                12 => ControlPacket::PingReq,
                13 => ControlPacket::PingResp,
                _ => ControlPacket::Disconnect,
            }
        }
        other => return Err(CodecError::UnknownPacketType(other)),
    };
    c.finish()?;
    Ok(packet)
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("connection closed")]
    Closed,
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed frame: {0}")]
    Codec(#[from] CodecError),
}

/// Read one frame from a blocking stream. A clean EOF before the first byte
/// is reported as [`ReadError::Closed`].
pub fn read_packet<R: Read>(reader: &mut R) -> Result<ControlPacket, ReadError> {
    let mut first = [0u8; 1];
    match reader.read(&mut first) {
        Ok(0) => return Err(ReadError::Closed),
        Ok(_) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Err(ReadError::Closed),
        Err(e) => return Err(e.into()),
    }
    let mut header = vec![first[0]];
    let mut len_bytes = Vec::with_capacity(4);
    let remaining = loop {
        let mut b = [0u8; 1];
        reader.read_exact(&mut b)?;
        len_bytes.push(b[0]);
        if b[0] & 0x80 == 0 {
            break decode_remaining_length(&len_bytes)?.0;
        }
        if len_bytes.len() == 4 {
            return Err(CodecError::MalformedRemainingLength.into());
        }
    };
    header.extend_from_slice(&len_bytes);
    let mut frame = header;
    let body_start = frame.len();
    frame.resize(body_start + remaining as usize, 0);
    reader.read_exact(&mut frame[body_start..])?;
    Ok(decode(&frame)?)
}

pub fn write_packet<W: Write>(writer: &mut W, packet: &ControlPacket) -> io::Result<()> {
    let frame = encode(packet).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    writer.write_all(&frame)
}
