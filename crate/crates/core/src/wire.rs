//! Byte-exact, config-parameterized codec for the four air-interface frames
//! and the encrypted command payloads they carry.
//!
//! Frame layouts (all integers big-endian):
//!
//! ```text
//! 0x01 RisRequest        len(default_id) || default_id || len(nonce) || nonce || sqn:4 || mac
//! 0x02 RisResponse       len(result) || result || sqn:4 || mac
//! 0x03 ProtectedCommand  temp_id || sqn:4 || ct_len:2 || ciphertext || mac
//! 0x04 ProtectedAck      temp_id || sqn:4 || ct_len:2 || ciphertext || mac
//! ```
//!
//! `temp_id` and `mac` lengths come from the session's [`SecurityConfig`],
//! keeping frames free of redundant length octets. Encoding is canonical:
//! distinct messages encode to distinct byte strings and the decoder rejects
//! trailing bytes and non-zero phase padding bits.

use serde::Serialize;

use crate::crypto::HashAlg;
use crate::keysched::{EncAlg, SecurityConfig, Sqn};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("unknown tag or opcode 0x{0:02x}")]
    UnknownTag(u8),
    #[error("input ends before the frame is complete")]
    Truncated,
    #[error("bytes remain after a complete frame")]
    TrailingBytes,
    #[error("{field} is {len} octets, limit {limit}")]
    FieldTooLong {
        field: &'static str,
        len: usize,
        limit: usize,
    },
    #[error("{field} is {got} octets, the session config requires {expected}")]
    WrongLength {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("phase state or packing out of range: {0}")]
    StateOutOfRange(&'static str),
    #[error("unknown {what} code 0x{code:02x}")]
    UnknownEnum { what: &'static str, code: u8 },
}

mod hexser {
    use serde::Serializer;

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        let mut out = String::with_capacity(bytes.len() * 2);
        for b in bytes {
            out.push_str(&format!("{b:02x}"));
        }
        s.serialize_str(&out)
    }
}

/// One air-interface frame. Byte fields render as hex in the JSON debug
/// form used by transcripts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WireMessage {
    RisRequest {
        #[serde(with = "hexser")]
        default_id: Vec<u8>,
        #[serde(with = "hexser")]
        nonce: Vec<u8>,
        sqn: Sqn,
        #[serde(with = "hexser")]
        mac: Vec<u8>,
    },
    RisResponse {
        #[serde(with = "hexser")]
        result: Vec<u8>,
        sqn: Sqn,
        #[serde(with = "hexser")]
        mac: Vec<u8>,
    },
    ProtectedCommand {
        #[serde(with = "hexser")]
        temp_id: Vec<u8>,
        sqn: Sqn,
        #[serde(with = "hexser")]
        ciphertext: Vec<u8>,
        #[serde(with = "hexser")]
        mac: Vec<u8>,
    },
    ProtectedAck {
        #[serde(with = "hexser")]
        temp_id: Vec<u8>,
        sqn: Sqn,
        #[serde(with = "hexser")]
        ciphertext: Vec<u8>,
        #[serde(with = "hexser")]
        mac: Vec<u8>,
    },
}

pub const TAG_RIS_REQUEST: u8 = 0x01;
pub const TAG_RIS_RESPONSE: u8 = 0x02;
pub const TAG_PROTECTED_COMMAND: u8 = 0x03;
pub const TAG_PROTECTED_ACK: u8 = 0x04;

pub const OPCODE_PHASE_CONFIG: u8 = 0x10;
pub const OPCODE_KEY_RENEWAL: u8 = 0xF0;
pub const OPCODE_CAPABILITY_EXCHANGE: u8 = 0xF1;

/// Plaintext carried encrypted inside a `ProtectedCommand`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "opcode", rename_all = "kebab-case")]
pub enum CommandPayload {
    /// Packed per-element phase states for the surface.
    PhaseConfig {
        element_count: u16,
        bits_per_element: u8,
        #[serde(with = "hexser")]
        packed: Vec<u8>,
    },
    /// Fresh nonce driving a (temporary id, K) rotation.
    KeyRenewal {
        #[serde(with = "hexser")]
        nonce: Vec<u8>,
    },
    /// Replacement security parameters, applied after the ack.
    CapabilityExchange { config: SecurityConfig },
}

impl CommandPayload {
    pub fn opcode(&self) -> u8 {
        match self {
            CommandPayload::PhaseConfig { .. } => OPCODE_PHASE_CONFIG,
            CommandPayload::KeyRenewal { .. } => OPCODE_KEY_RENEWAL,
            CommandPayload::CapabilityExchange { .. } => OPCODE_CAPABILITY_EXCHANGE,
        }
    }
}

fn put_len_prefixed(out: &mut Vec<u8>, field: &'static str, bytes: &[u8]) -> Result<(), WireError> {
    if bytes.len() > 255 {
        return Err(WireError::FieldTooLong {
            field,
            len: bytes.len(),
            limit: 255,
        });
    }
    out.push(bytes.len() as u8);
    out.extend_from_slice(bytes);
    Ok(())
}

fn check_exact(field: &'static str, bytes: &[u8], expected: usize) -> Result<(), WireError> {
    if bytes.len() != expected {
        return Err(WireError::WrongLength {
            field,
            expected,
            got: bytes.len(),
        });
    }
    Ok(())
}

/// Encodes a frame under the session config. The `temp_id` and `mac` fields
/// must match the configured lengths exactly.
pub fn encode(msg: &WireMessage, cfg: &SecurityConfig) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::new();
    match msg {
        WireMessage::RisRequest {
            default_id,
            nonce,
            sqn,
            mac,
        } => {
            out.push(TAG_RIS_REQUEST);
            put_len_prefixed(&mut out, "default_id", default_id)?;
            put_len_prefixed(&mut out, "nonce", nonce)?;
            out.extend_from_slice(&sqn.0.to_be_bytes());
            check_exact("mac", mac, cfg.mac_len)?;
            out.extend_from_slice(mac);
        }
        WireMessage::RisResponse { result, sqn, mac } => {
            out.push(TAG_RIS_RESPONSE);
            put_len_prefixed(&mut out, "result", result)?;
            out.extend_from_slice(&sqn.0.to_be_bytes());
            check_exact("mac", mac, cfg.mac_len)?;
            out.extend_from_slice(mac);
        }
        WireMessage::ProtectedCommand {
            temp_id,
            sqn,
            ciphertext,
            mac,
        }
        | WireMessage::ProtectedAck {
            temp_id,
            sqn,
            ciphertext,
            mac,
        } => {
            out.push(match msg {
                WireMessage::ProtectedCommand { .. } => TAG_PROTECTED_COMMAND,
                _ => TAG_PROTECTED_ACK,
            });
            check_exact("temp_id", temp_id, cfg.temp_id_len)?;
            out.extend_from_slice(temp_id);
            out.extend_from_slice(&sqn.0.to_be_bytes());
            if ciphertext.len() > 65535 {
                return Err(WireError::FieldTooLong {
                    field: "ciphertext",
                    len: ciphertext.len(),
                    limit: 65535,
                });
            }
            out.extend_from_slice(&(ciphertext.len() as u16).to_be_bytes());
            out.extend_from_slice(ciphertext);
            check_exact("mac", mac, cfg.mac_len)?;
            out.extend_from_slice(mac);
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(n).ok_or(WireError::Truncated)?;
        if end > self.bytes.len() {
            return Err(WireError::Truncated);
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn len_prefixed(&mut self) -> Result<Vec<u8>, WireError> {
        let n = self.u8()? as usize;
        Ok(self.take(n)?.to_vec())
    }

    fn finish(&self) -> Result<(), WireError> {
        if self.pos != self.bytes.len() {
            return Err(WireError::TrailingBytes);
        }
        Ok(())
    }
}

/// Decodes one frame under the session config. Structural checks only;
/// MAC, SQN, and addressing are the endpoints' business.
pub fn decode(bytes: &[u8], cfg: &SecurityConfig) -> Result<WireMessage, WireError> {
    let mut r = Reader::new(bytes);
    let msg = match r.u8()? {
        TAG_RIS_REQUEST => {
            let default_id = r.len_prefixed()?;
            let nonce = r.len_prefixed()?;
            let sqn = Sqn(r.u32()?);
            let mac = r.take(cfg.mac_len)?.to_vec();
            WireMessage::RisRequest {
                default_id,
                nonce,
                sqn,
                mac,
            }
        }
        TAG_RIS_RESPONSE => {
            let result = r.len_prefixed()?;
            let sqn = Sqn(r.u32()?);
            let mac = r.take(cfg.mac_len)?.to_vec();
            WireMessage::RisResponse { result, sqn, mac }
        }
        tag @ (TAG_PROTECTED_COMMAND | TAG_PROTECTED_ACK) => {
            let temp_id = r.take(cfg.temp_id_len)?.to_vec();
            let sqn = Sqn(r.u32()?);
            let ct_len = r.u16()? as usize;
            let ciphertext = r.take(ct_len)?.to_vec();
            let mac = r.take(cfg.mac_len)?.to_vec();
            if tag == TAG_PROTECTED_COMMAND {
                WireMessage::ProtectedCommand {
                    temp_id,
                    sqn,
                    ciphertext,
                    mac,
                }
            } else {
                WireMessage::ProtectedAck {
                    temp_id,
                    sqn,
                    ciphertext,
                    mac,
                }
            }
        }
        tag => return Err(WireError::UnknownTag(tag)),
    };
    r.finish()?;
    Ok(msg)
}

fn hash_alg_code(alg: HashAlg) -> u8 {
    match alg {
        HashAlg::Sha256 => 0x01,
        HashAlg::Sha384 => 0x02,
        HashAlg::Sha3_512 => 0x03,
    }
}

fn hash_alg_from_code(code: u8) -> Result<HashAlg, WireError> {
    match code {
        0x01 => Ok(HashAlg::Sha256),
        0x02 => Ok(HashAlg::Sha384),
        0x03 => Ok(HashAlg::Sha3_512),
        code => Err(WireError::UnknownEnum {
            what: "hash algorithm",
            code,
        }),
    }
}

fn enc_alg_code(alg: EncAlg) -> u8 {
    match alg {
        EncAlg::Aes128Ctr => 0x01,
    }
}

fn enc_alg_from_code(code: u8) -> Result<EncAlg, WireError> {
    match code {
        0x01 => Ok(EncAlg::Aes128Ctr),
        code => Err(WireError::UnknownEnum {
            what: "encryption algorithm",
            code,
        }),
    }
}

fn config_len_octet(field: &'static str, len: usize) -> Result<u8, WireError> {
    u8::try_from(len).map_err(|_| WireError::FieldTooLong {
        field,
        len,
        limit: 255,
    })
}

/// Encodes a command payload to its plaintext octets (pre-encryption).
pub fn encode_payload(p: &CommandPayload) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::new();
    out.push(p.opcode());
    match p {
        CommandPayload::PhaseConfig {
            element_count,
            bits_per_element,
            packed,
        } => {
            let expect = packed_len(*element_count, *bits_per_element)?;
            if packed.len() != expect {
                return Err(WireError::StateOutOfRange(
                    "packed length does not match count",
                ));
            }
            out.extend_from_slice(&element_count.to_be_bytes());
            out.push(*bits_per_element);
            out.extend_from_slice(packed);
        }
        CommandPayload::KeyRenewal { nonce } => {
            put_len_prefixed(&mut out, "nonce", nonce)?;
        }
        CommandPayload::CapabilityExchange { config } => {
            out.push(hash_alg_code(config.hash_alg));
            out.push(config_len_octet("key_len", config.key_len)?);
            out.push(config_len_octet("temp_id_len", config.temp_id_len)?);
            out.push(config_len_octet("mac_len", config.mac_len)?);
            out.push(config_len_octet("result_len", config.result_len)?);
            out.push(enc_alg_code(config.enc_alg));
        }
    }
    Ok(out)
}

/// Decodes a decrypted command payload. Rejects unknown opcodes, length
/// mismatches, and non-zero padding bits (canonical form).
pub fn decode_payload(bytes: &[u8]) -> Result<CommandPayload, WireError> {
    let mut r = Reader::new(bytes);
    let payload = match r.u8()? {
        OPCODE_PHASE_CONFIG => {
            let element_count = r.u16()?;
            let bits_per_element = r.u8()?;
            let expect = packed_len(element_count, bits_per_element)?;
            let packed = r.take(expect)?.to_vec();
            check_phase_padding(element_count, bits_per_element, &packed)?;
            CommandPayload::PhaseConfig {
                element_count,
                bits_per_element,
                packed,
            }
        }
        OPCODE_KEY_RENEWAL => CommandPayload::KeyRenewal {
            nonce: r.len_prefixed()?,
        },
        OPCODE_CAPABILITY_EXCHANGE => {
            let hash_alg = hash_alg_from_code(r.u8()?)?;
            let key_len = r.u8()? as usize;
            let temp_id_len = r.u8()? as usize;
            let mac_len = r.u8()? as usize;
            let result_len = r.u8()? as usize;
            let enc_alg = enc_alg_from_code(r.u8()?)?;
            CommandPayload::CapabilityExchange {
                config: SecurityConfig {
                    hash_alg,
                    key_len,
                    temp_id_len,
                    mac_len,
                    result_len,
                    enc_alg,
                },
            }
        }
        opcode => return Err(WireError::UnknownTag(opcode)),
    };
    r.finish()?;
    Ok(payload)
}

fn packed_len(element_count: u16, bits_per_element: u8) -> Result<usize, WireError> {
    if !(1..=8).contains(&bits_per_element) {
        return Err(WireError::StateOutOfRange("bits_per_element outside 1..=8"));
    }
    Ok((element_count as usize * bits_per_element as usize).div_ceil(8))
}

/// Unused bits past the last element must be zero so every phase config has
/// exactly one encoding.
fn check_phase_padding(
    element_count: u16,
    bits_per_element: u8,
    packed: &[u8],
) -> Result<(), WireError> {
    let used_bits = element_count as usize * bits_per_element as usize;
    let pad_bits = packed.len() * 8 - used_bits;
    if pad_bits > 0 {
        let last = packed[packed.len() - 1];
        if last >> (8 - pad_bits) != 0 {
            return Err(WireError::StateOutOfRange("non-zero padding bits"));
        }
    }
    Ok(())
}

/// Packs per-element states LSB-first within each octet: element 0 occupies
/// the low bits of octet 0.
pub fn pack_phase_config(states: &[u8], bits_per_element: u8) -> Result<CommandPayload, WireError> {
    if states.len() > 65535 {
        return Err(WireError::FieldTooLong {
            field: "states",
            len: states.len(),
            limit: 65535,
        });
    }
    let element_count = states.len() as u16;
    let b = bits_per_element as usize;
    let limit: u16 = 1u16 << bits_per_element.min(8);
    let mut packed = vec![0u8; packed_len(element_count, bits_per_element)?];
    for (i, &s) in states.iter().enumerate() {
        if bits_per_element < 8 && u16::from(s) >= limit {
            return Err(WireError::StateOutOfRange(
                "state does not fit bits_per_element",
            ));
        }
        let bit = i * b;
        let mut v = u16::from(s) << (bit % 8);
        let mut idx = bit / 8;
        while v != 0 {
            packed[idx] |= (v & 0xFF) as u8;
            v >>= 8;
            idx += 1;
        }
    }
    Ok(CommandPayload::PhaseConfig {
        element_count,
        bits_per_element,
        packed,
    })
}

/// Inverse of [`pack_phase_config`].
pub fn unpack_phase_config(payload: &CommandPayload) -> Result<Vec<u8>, WireError> {
    let (count, bits, packed) = match payload {
        CommandPayload::PhaseConfig {
            element_count,
            bits_per_element,
            packed,
        } => (*element_count, *bits_per_element, packed),
        _ => return Err(WireError::StateOutOfRange("payload is not a phase config")),
    };
    let expect = packed_len(count, bits)?;
    if packed.len() != expect {
        return Err(WireError::StateOutOfRange(
            "packed length does not match count",
        ));
    }
    check_phase_padding(count, bits, packed)?;
    let b = bits as usize;
    let mask = if bits == 8 {
        0xFFu16
    } else {
        (1u16 << bits) - 1
    };
    let mut states = Vec::with_capacity(count as usize);
    for i in 0..count as usize {
        let bit = i * b;
        let idx = bit / 8;
        let shift = bit % 8;
        let mut window = packed[idx] as u16;
        if idx + 1 < packed.len() {
            window |= (packed[idx + 1] as u16) << 8;
        }
        states.push(((window >> shift) & mask) as u8);
    }
    Ok(states)
}
