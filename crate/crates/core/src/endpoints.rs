//! Protocol endpoints: the device-side controller, the network-side
//! function, the transparent reader relay, and the provisioning stubs that
//! seed them.
//!
//! Check order on every inbound protected frame is fixed: decode, then
//! addressing, then MAC, then sequence number, then decrypt/dispatch. A
//! tampered sequence field therefore reports as a MAC failure (the MAC
//! covers it) while a byte-identical replay reports as a sequence failure.
//! The device is silent on every failure: it emits an event locally but
//! never a frame, denying an attacker an oracle.

use std::collections::HashMap;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto;
use crate::keysched::{
    self, ContextState, Direction, EncryptionKeyK, KeyschedError, Nonce, SecurityConfig,
    SecurityContext, SharedSecret, Sqn, TemporaryId,
};
use crate::wire::{self, CommandPayload, WireError, WireMessage};

/// Nonce size generated by the function for registrations and renewals.
pub const NONCE_LEN: usize = 16;

/// Why an inbound frame or payload was refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    MacMismatch,
    SqnMismatch,
    UnknownId,
    NonceReuse,
    DecodeError,
    ResultMismatch,
    Busy,
    StateOutOfRange,
    SqnExhausted,
}

/// Outcome of feeding one frame (or one control-plane call) to an endpoint.
/// `ResponseSent` and `AckAccepted` are bookkeeping outcomes; the rest are
/// the observable protocol events scenario expectations are written
/// against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EndpointEvent {
    Authenticated,
    CommandApplied { opcode: u8 },
    Rejected { reason: RejectReason },
    Rotated,
    CapabilityUpdated,
    ResponseSent,
    AckAccepted,
}

impl EndpointEvent {
    /// Whether scenario expectations count this event.
    pub fn is_observable(&self) -> bool {
        !matches!(
            self,
            EndpointEvent::ResponseSent | EndpointEvent::AckAccepted
        )
    }

    pub fn rejected(reason: RejectReason) -> Self {
        EndpointEvent::Rejected { reason }
    }
}

/// Operational errors for control-plane calls (not frame handling, which
/// always yields an event instead).
#[derive(Debug, Error, PartialEq, Eq)]
pub enum EndpointError {
    #[error("default id not present in the provisioning registry")]
    UnknownId,
    #[error("a registration for this default id is already in progress or complete")]
    Busy,
    #[error("no registered security association for this device")]
    NotRegistered,
    #[error("no pending registration transaction to correlate this response to")]
    NoPendingTransaction,
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Keysched(#[from] KeyschedError),
}

/// Provisioned identity and parameters for one device, as installed into
/// the registry ahead of any air traffic.
#[derive(Debug, Clone)]
pub struct ProvisioningRecord {
    pub default_id: Vec<u8>,
    pub secret: SharedSecret,
    pub cfg: SecurityConfig,
    pub reader_id: String,
}

/// Registration intent flowing from the application function down to the
/// network function, carrying the provisioned material.
#[derive(Debug, Clone)]
pub struct RisRequestIntent {
    pub default_id: Vec<u8>,
    pub secret: SharedSecret,
    pub cfg: SecurityConfig,
}

/// Application-function / exposure-function stub: holds the registry,
/// gates duplicate registrations, and records completion outcomes.
#[derive(Debug, Default)]
pub struct AfNef {
    registry: HashMap<Vec<u8>, ProvisioningRecord>,
    pending: HashMap<Vec<u8>, ()>,
    outcomes: Vec<(Vec<u8>, bool)>,
}

impl AfNef {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn provision(&mut self, record: ProvisioningRecord) -> Result<(), EndpointError> {
        if self.registry.contains_key(&record.default_id) {
            return Err(EndpointError::Busy);
        }
        self.registry.insert(record.default_id.clone(), record);
        Ok(())
    }

    /// Starts a registration for a provisioned device; one at a time per id.
    pub fn initiate(&mut self, default_id: &[u8]) -> Result<RisRequestIntent, EndpointError> {
        let record = self
            .registry
            .get(default_id)
            .ok_or(EndpointError::UnknownId)?;
        if self.pending.contains_key(default_id) {
            return Err(EndpointError::Busy);
        }
        self.pending.insert(default_id.to_vec(), ());
        Ok(RisRequestIntent {
            default_id: record.default_id.clone(),
            secret: record.secret.clone(),
            cfg: record.cfg,
        })
    }

    /// Completion signal from the function after authentication concludes.
    pub fn complete(&mut self, default_id: &[u8], authenticated: bool) {
        self.pending.remove(default_id);
        self.outcomes.push((default_id.to_vec(), authenticated));
    }

    pub fn outcomes(&self) -> &[(Vec<u8>, bool)] {
        &self.outcomes
    }
}

/// Phase configuration as installed on the surface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstalledPhaseConfig {
    pub bits_per_element: u8,
    pub states: Vec<u8>,
}

/// Result of feeding one frame to the device: an optional uplink reply and
/// exactly one event. Failures never produce a reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceOutcome {
    pub reply: Option<Vec<u8>>,
    pub event: EndpointEvent,
}

impl DeviceOutcome {
    fn silent(event: EndpointEvent) -> Self {
        DeviceOutcome { reply: None, event }
    }
}

/// The constrained controller behind the surface. Before registration it
/// answers only registration requests bearing its default id; afterwards it
/// answers only protected commands bearing its current temporary id.
#[derive(Debug)]
pub struct DeviceController {
    default_id: Vec<u8>,
    ctx: SecurityContext,
    installed_phase_config: Option<InstalledPhaseConfig>,
    /// Last frame this device put on the air, kept for diagnostics only;
    /// retransmission is deliberately absent (any duplicate is a replay).
    last_sent_frame: Option<Vec<u8>>,
}

impl DeviceController {
    pub fn new(default_id: Vec<u8>, secret: SharedSecret, cfg: SecurityConfig) -> Self {
        DeviceController {
            default_id,
            ctx: SecurityContext::new(secret, cfg),
            installed_phase_config: None,
            last_sent_frame: None,
        }
    }

    pub fn default_id(&self) -> &[u8] {
        &self.default_id
    }

    pub fn context(&self) -> &SecurityContext {
        &self.ctx
    }

    pub fn installed_phase_config(&self) -> Option<&InstalledPhaseConfig> {
        self.installed_phase_config.as_ref()
    }

    pub fn is_registered(&self) -> bool {
        matches!(self.ctx.state(), ContextState::Registered { .. })
    }

    /// Current registered pair, if any.
    pub fn registered_pair(&self) -> Option<(&TemporaryId, &EncryptionKeyK)> {
        match self.ctx.state() {
            ContextState::Registered { temp_id, k } => Some((temp_id, k)),
            _ => None,
        }
    }

    pub fn last_sent_frame(&self) -> Option<&[u8]> {
        self.last_sent_frame.as_deref()
    }

    /// Feeds one raw air frame to the device.
    pub fn handle_frame(&mut self, raw: &[u8]) -> DeviceOutcome {
        let msg = match wire::decode(raw, self.ctx.cfg()) {
            Ok(m) => m,
            Err(_) => {
                return DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::DecodeError))
            }
        };
        match msg {
            WireMessage::RisRequest {
                default_id,
                nonce,
                sqn,
                mac,
            } => self.handle_request(&default_id, &nonce, sqn, &mac),
            WireMessage::ProtectedCommand {
                temp_id,
                sqn,
                ciphertext,
                mac,
            } => self.handle_command(&temp_id, sqn, &ciphertext, &mac),
            // uplink-only frames are never addressed to a device
            WireMessage::RisResponse { .. } | WireMessage::ProtectedAck { .. } => {
                DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::UnknownId))
            }
        }
    }

    fn handle_request(
        &mut self,
        default_id: &[u8],
        nonce: &[u8],
        sqn: Sqn,
        mac: &[u8],
    ) -> DeviceOutcome {
        if default_id != self.default_id {
            return DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::UnknownId));
        }
        let nonce = match Nonce::new(nonce.to_vec()) {
            Ok(n) => n,
            Err(_) => {
                return DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::DecodeError))
            }
        };
        let cfg = *self.ctx.cfg();
        if !keysched::verify_request_mac(self.ctx.secret(), default_id, &nonce, sqn, &cfg, mac) {
            return DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::MacMismatch));
        }
        if !self.ctx.matches_next(sqn) {
            return DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::SqnMismatch));
        }
        let (temp_id, k) = match keysched::derive_key_and_id(self.ctx.secret(), &nonce, &cfg) {
            Ok(pair) => pair,
            Err(_) => {
                return DeviceOutcome::silent(EndpointEvent::rejected(
                    RejectReason::StateOutOfRange,
                ))
            }
        };
        self.ctx.commit_received(sqn);
        if self.ctx.remember_nonce(&nonce).is_err() {
            return DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::NonceReuse));
        }
        let result = keysched::compute_result(&k, default_id, &nonce, &cfg);
        let out_sqn = match self.ctx.advance_for_send() {
            Ok(s) => s,
            Err(_) => {
                return DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::SqnExhausted))
            }
        };
        let mac = keysched::compute_response_mac(
            self.ctx.secret(),
            default_id,
            result.as_bytes(),
            out_sqn,
            &cfg,
        );
        let reply = WireMessage::RisResponse {
            result: result.as_bytes().to_vec(),
            sqn: out_sqn,
            mac: mac.into_vec(),
        };
        // the device commits to the derived pair at response-send time;
        // if the network side rejects the result, recovery is a fresh
        // registration, not a rollback
        self.ctx.state = ContextState::Registered { temp_id, k };
        let bytes = wire::encode(&reply, &cfg).expect("own response is well-formed");
        self.last_sent_frame = Some(bytes.clone());
        DeviceOutcome {
            reply: Some(bytes),
            event: EndpointEvent::ResponseSent,
        }
    }

    fn handle_command(
        &mut self,
        temp_id: &[u8],
        sqn: Sqn,
        ciphertext: &[u8],
        mac: &[u8],
    ) -> DeviceOutcome {
        let (current_id, k) = match self.ctx.state() {
            ContextState::Registered { temp_id, k } => (temp_id.clone(), k.clone()),
            _ => return DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::UnknownId)),
        };
        if temp_id != current_id.as_bytes() {
            return DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::UnknownId));
        }
        let cfg = *self.ctx.cfg();
        if !keysched::verify_command_mac(
            &k,
            temp_id,
            sqn,
            Direction::Downlink,
            ciphertext,
            &cfg,
            mac,
        ) {
            return DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::MacMismatch));
        }
        if !self.ctx.matches_next(sqn) {
            return DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::SqnMismatch));
        }
        self.ctx.commit_received(sqn);
        let plaintext = match crypto::aes_ctr(
            k.as_bytes(),
            &crypto::ctr_iv(sqn.0, Direction::Downlink.octet()),
            ciphertext,
        ) {
            Ok(p) => p,
            Err(_) => {
                return DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::DecodeError))
            }
        };
        let payload = match wire::decode_payload(&plaintext) {
            Ok(p) => p,
            Err(WireError::StateOutOfRange(_)) => {
                return DeviceOutcome::silent(EndpointEvent::rejected(
                    RejectReason::StateOutOfRange,
                ))
            }
            Err(_) => {
                return DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::DecodeError))
            }
        };
        self.dispatch_payload(payload)
    }

    fn dispatch_payload(&mut self, payload: CommandPayload) -> DeviceOutcome {
        match payload {
            CommandPayload::PhaseConfig {
                bits_per_element,
                ref packed,
                ..
            } => {
                let states = match wire::unpack_phase_config(&payload) {
                    Ok(s) => s,
                    Err(_) => {
                        return DeviceOutcome::silent(EndpointEvent::rejected(
                            RejectReason::StateOutOfRange,
                        ))
                    }
                };
                let _ = packed;
                self.installed_phase_config = Some(InstalledPhaseConfig {
                    bits_per_element,
                    states,
                });
                self.ack(EndpointEvent::CommandApplied {
                    opcode: wire::OPCODE_PHASE_CONFIG,
                })
            }
            CommandPayload::KeyRenewal { nonce } => {
                let nonce = match Nonce::new(nonce) {
                    Ok(n) => n,
                    Err(_) => {
                        return DeviceOutcome::silent(EndpointEvent::rejected(
                            RejectReason::DecodeError,
                        ))
                    }
                };
                match self.ctx.rotate(&nonce) {
                    // ack under the new pair and the next sequence number,
                    // proving the rotation actually happened
                    Ok(_) => self.ack(EndpointEvent::Rotated),
                    Err(KeyschedError::NonceReuse) => {
                        DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::NonceReuse))
                    }
                    Err(_) => DeviceOutcome::silent(EndpointEvent::rejected(
                        RejectReason::StateOutOfRange,
                    )),
                }
            }
            CommandPayload::CapabilityExchange { config } => {
                if config.validate().is_err() {
                    return DeviceOutcome::silent(EndpointEvent::rejected(
                        RejectReason::StateOutOfRange,
                    ));
                }
                // the derived pair cannot be re-split, so the id/key split
                // is frozen for the lifetime of a registration
                let cur = *self.ctx.cfg();
                if config.temp_id_len != cur.temp_id_len || config.key_len != cur.key_len {
                    return DeviceOutcome::silent(EndpointEvent::rejected(
                        RejectReason::StateOutOfRange,
                    ));
                }
                // ack under the old parameters; switch between frames
                let out = self.ack(EndpointEvent::CapabilityUpdated);
                if out.reply.is_some() {
                    self.ctx.cfg = config;
                }
                out
            }
        }
    }

    /// Builds an empty protected ack under the current context.
    fn ack(&mut self, event: EndpointEvent) -> DeviceOutcome {
        let (temp_id, k) = match self.ctx.state() {
            ContextState::Registered { temp_id, k } => (temp_id.clone(), k.clone()),
            _ => return DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::UnknownId)),
        };
        let cfg = *self.ctx.cfg();
        let sqn = match self.ctx.advance_for_send() {
            Ok(s) => s,
            Err(_) => {
                return DeviceOutcome::silent(EndpointEvent::rejected(RejectReason::SqnExhausted))
            }
        };
        let mac = keysched::compute_command_mac(
            &k,
            temp_id.as_bytes(),
            sqn,
            Direction::Uplink,
            &[],
            &cfg,
        );
        let ack = WireMessage::ProtectedAck {
            temp_id: temp_id.as_bytes().to_vec(),
            sqn,
            ciphertext: vec![],
            mac: mac.into_vec(),
        };
        let bytes = wire::encode(&ack, &cfg).expect("own ack is well-formed");
        self.last_sent_frame = Some(bytes.clone());
        DeviceOutcome {
            reply: Some(bytes),
            event,
        }
    }
}

/// One device's security association as tracked on the network side.
#[derive(Debug)]
struct FnSession {
    ctx: SecurityContext,
    /// Derived pair held while awaiting the registration response.
    pending_pair: Option<(TemporaryId, EncryptionKeyK)>,
    /// Pair derived from an outstanding renewal, committed on its ack.
    pending_rotation: Option<(Nonce, TemporaryId, EncryptionKeyK)>,
    /// Config sent in an outstanding capability exchange, applied on ack.
    pending_cfg: Option<SecurityConfig>,
    last_sent_frame: Option<Vec<u8>>,
}

/// Network-side authenticator: derives per-registration material, builds
/// requests and protected commands, verifies responses and acks.
#[derive(Debug, Default)]
pub struct RisFunction {
    sessions: HashMap<Vec<u8>, FnSession>,
}

impl RisFunction {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds the registration request for an intent. The nonce comes from
    /// the caller's generator, so a seeded run is byte-reproducible.
    pub fn handle_intent<R: RngCore>(
        &mut self,
        intent: RisRequestIntent,
        rng: &mut R,
    ) -> Result<Vec<u8>, EndpointError> {
        if self.sessions.contains_key(&intent.default_id) {
            return Err(EndpointError::Busy);
        }
        let mut ctx = SecurityContext::new(intent.secret, intent.cfg);
        let mut nonce_bytes = vec![0u8; NONCE_LEN];
        rng.fill_bytes(&mut nonce_bytes);
        let nonce = Nonce::new(nonce_bytes).expect("fixed nonce length is valid");
        let (temp_id, k) = keysched::derive_key_and_id(ctx.secret(), &nonce, &intent.cfg)?;
        let expected = keysched::compute_result(&k, &intent.default_id, &nonce, &intent.cfg);
        ctx.remember_nonce(&nonce)?;
        let sqn = ctx.advance_for_send()?;
        debug_assert_eq!(sqn, Sqn(1));
        let mac = keysched::compute_request_mac(
            ctx.secret(),
            &intent.default_id,
            &nonce,
            sqn,
            &intent.cfg,
        );
        ctx.state = ContextState::AwaitingResponse {
            expected,
            pending_sqn: sqn,
        };
        let frame = WireMessage::RisRequest {
            default_id: intent.default_id.clone(),
            nonce: nonce.as_bytes().to_vec(),
            sqn,
            mac: mac.into_vec(),
        };
        let bytes = wire::encode(&frame, &intent.cfg)?;
        self.sessions.insert(
            intent.default_id,
            FnSession {
                ctx,
                pending_pair: Some((temp_id, k)),
                pending_rotation: None,
                pending_cfg: None,
                last_sent_frame: Some(bytes.clone()),
            },
        );
        Ok(bytes)
    }

    /// Verifies a registration response correlated to `default_id`.
    pub fn handle_response(&mut self, default_id: &[u8], raw: &[u8]) -> EndpointEvent {
        let Some(session) = self.sessions.get_mut(default_id) else {
            return EndpointEvent::rejected(RejectReason::UnknownId);
        };
        let cfg = *session.ctx.cfg();
        let msg = match wire::decode(raw, &cfg) {
            Ok(m) => m,
            Err(_) => return EndpointEvent::rejected(RejectReason::DecodeError),
        };
        let WireMessage::RisResponse { result, sqn, mac } = msg else {
            return EndpointEvent::rejected(RejectReason::UnknownId);
        };
        if !keysched::verify_response_mac(
            session.ctx.secret(),
            default_id,
            &result,
            sqn,
            &cfg,
            &mac,
        ) {
            return EndpointEvent::rejected(RejectReason::MacMismatch);
        }
        if !session.ctx.matches_next(sqn) {
            return EndpointEvent::rejected(RejectReason::SqnMismatch);
        }
        let ContextState::AwaitingResponse { expected, .. } = session.ctx.state() else {
            return EndpointEvent::rejected(RejectReason::UnknownId);
        };
        if !keysched::verify_result(expected, &result) {
            // derived material is discarded; the registration starts over
            session.ctx.state = ContextState::Idle;
            session.pending_pair = None;
            return EndpointEvent::rejected(RejectReason::ResultMismatch);
        }
        session.ctx.commit_received(sqn);
        let (temp_id, k) = session
            .pending_pair
            .take()
            .expect("pair exists while awaiting");
        session.ctx.state = ContextState::Registered { temp_id, k };
        EndpointEvent::Authenticated
    }

    /// Encrypts and MACs a command payload for a registered device.
    pub fn send_command(
        &mut self,
        default_id: &[u8],
        payload: &CommandPayload,
    ) -> Result<Vec<u8>, EndpointError> {
        let session = self
            .sessions
            .get_mut(default_id)
            .ok_or(EndpointError::UnknownId)?;
        let cfg = *session.ctx.cfg();
        let (temp_id, k) = match session.ctx.state() {
            ContextState::Registered { temp_id, k } => (temp_id.clone(), k.clone()),
            _ => return Err(EndpointError::NotRegistered),
        };
        if let CommandPayload::KeyRenewal { nonce } = payload {
            let nonce = Nonce::new(nonce.clone())?;
            let pair = keysched::derive_key_and_id(session.ctx.secret(), &nonce, &cfg)?;
            session.pending_rotation = Some((nonce, pair.0, pair.1));
        }
        if let CommandPayload::CapabilityExchange { config } = payload {
            config.validate()?;
            session.pending_cfg = Some(*config);
        }
        let plaintext = wire::encode_payload(payload)?;
        let sqn = session.ctx.advance_for_send()?;
        let ciphertext = crypto::aes_ctr(
            k.as_bytes(),
            &crypto::ctr_iv(sqn.0, Direction::Downlink.octet()),
            &plaintext,
        )
        .expect("configured key length is valid");
        let mac = keysched::compute_command_mac(
            &k,
            temp_id.as_bytes(),
            sqn,
            Direction::Downlink,
            &ciphertext,
            &cfg,
        );
        let frame = WireMessage::ProtectedCommand {
            temp_id: temp_id.as_bytes().to_vec(),
            sqn,
            ciphertext,
            mac: mac.into_vec(),
        };
        let bytes = wire::encode(&frame, &cfg)?;
        session.last_sent_frame = Some(bytes.clone());
        Ok(bytes)
    }

    /// Builds a key-renewal command with a fresh nonce from the caller's
    /// generator, retrying the draw on a (cosmically unlikely) collision
    /// with the bounded nonce history.
    pub fn send_key_renewal<R: RngCore>(
        &mut self,
        default_id: &[u8],
        rng: &mut R,
    ) -> Result<Vec<u8>, EndpointError> {
        let session = self
            .sessions
            .get(default_id)
            .ok_or(EndpointError::UnknownId)?;
        let mut nonce_bytes = vec![0u8; NONCE_LEN];
        for _ in 0..8 {
            rng.fill_bytes(&mut nonce_bytes);
            let nonce = Nonce::new(nonce_bytes.clone()).expect("fixed nonce length is valid");
            if !session.ctx.nonce_seen(&nonce) {
                let payload = CommandPayload::KeyRenewal { nonce: nonce_bytes };
                return self.send_command(default_id, &payload);
            }
        }
        Err(EndpointError::Keysched(KeyschedError::NonceReuse))
    }

    /// Verifies a protected ack. A pending rotation or capability exchange
    /// commits here, never before.
    pub fn handle_ack(&mut self, default_id: &[u8], raw: &[u8]) -> EndpointEvent {
        let Some(session) = self.sessions.get_mut(default_id) else {
            return EndpointEvent::rejected(RejectReason::UnknownId);
        };
        let cfg = *session.ctx.cfg();
        let msg = match wire::decode(raw, &cfg) {
            Ok(m) => m,
            Err(_) => return EndpointEvent::rejected(RejectReason::DecodeError),
        };
        let WireMessage::ProtectedAck {
            temp_id,
            sqn,
            ciphertext,
            mac,
        } = msg
        else {
            return EndpointEvent::rejected(RejectReason::UnknownId);
        };
        let ContextState::Registered {
            temp_id: cur_id,
            k: cur_k,
        } = session.ctx.state()
        else {
            return EndpointEvent::rejected(RejectReason::UnknownId);
        };
        // a rotation ack arrives already re-addressed and re-keyed
        let (expect_id, key) = match &session.pending_rotation {
            Some((_, new_id, new_k)) => (new_id.clone(), new_k.clone()),
            None => (cur_id.clone(), cur_k.clone()),
        };
        if temp_id != expect_id.as_bytes() {
            return EndpointEvent::rejected(RejectReason::UnknownId);
        }
        if !keysched::verify_command_mac(
            &key,
            &temp_id,
            sqn,
            Direction::Uplink,
            &ciphertext,
            &cfg,
            &mac,
        ) {
            return EndpointEvent::rejected(RejectReason::MacMismatch);
        }
        if !session.ctx.matches_next(sqn) {
            return EndpointEvent::rejected(RejectReason::SqnMismatch);
        }
        session.ctx.commit_received(sqn);
        if let Some((nonce, new_id, new_k)) = session.pending_rotation.take() {
            session.ctx.remember_nonce(&nonce).ok();
            session.ctx.state = ContextState::Registered {
                temp_id: new_id,
                k: new_k,
            };
            return EndpointEvent::Rotated;
        }
        if let Some(new_cfg) = session.pending_cfg.take() {
            session.ctx.cfg = new_cfg;
            return EndpointEvent::CapabilityUpdated;
        }
        EndpointEvent::AckAccepted
    }

    pub fn session_state(&self, default_id: &[u8]) -> Option<&ContextState> {
        self.sessions.get(default_id).map(|s| s.ctx.state())
    }

    pub fn session_cfg(&self, default_id: &[u8]) -> Option<&SecurityConfig> {
        self.sessions.get(default_id).map(|s| s.ctx.cfg())
    }

    /// Current registered pair for a device, if authenticated.
    pub fn registered_pair(&self, default_id: &[u8]) -> Option<(&TemporaryId, &EncryptionKeyK)> {
        match self.sessions.get(default_id).map(|s| s.ctx.state()) {
            Some(ContextState::Registered { temp_id, k }) => Some((temp_id, k)),
            _ => None,
        }
    }

    /// Signals the registration outcome up to the provisioning stub.
    pub fn notify(&self, af: &mut AfNef, default_id: &[u8], event: &EndpointEvent) {
        match event {
            EndpointEvent::Authenticated => af.complete(default_id, true),
            EndpointEvent::Rejected { .. } => af.complete(default_id, false),
            _ => {}
        }
    }
}

/// Base-station relay: byte-transparent in both directions. Registration
/// responses carry no identifier, so the reader correlates each one to the
/// oldest pending request transaction (FIFO). Under adversarial reordering
/// of two in-flight registrations this can misroute a response; the MAC and
/// result checks then fail closed, trading availability, never authenticity.
#[derive(Debug, Default)]
pub struct Reader {
    pending: std::collections::VecDeque<Vec<u8>>,
}

impl Reader {
    pub fn new() -> Self {
        Self::default()
    }

    /// Relays one frame unchanged; the air interface sees exactly the
    /// bytes the sender produced.
    pub fn relay<'a>(&self, frame: &'a [u8]) -> &'a [u8] {
        frame
    }

    /// Records the pending transaction opened by an outgoing request.
    pub fn note_downlink(&mut self, frame: &[u8], cfg: &SecurityConfig) {
        if let Ok(WireMessage::RisRequest { default_id, .. }) = wire::decode(frame, cfg) {
            self.pending.push_back(default_id);
        }
    }

    /// Correlates an uplink registration response to the oldest pending
    /// transaction, yielding the default id to hand the function.
    pub fn correlate_response(&mut self) -> Result<Vec<u8>, EndpointError> {
        self.pending
            .pop_front()
            .ok_or(EndpointError::NoPendingTransaction)
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::HashAlg;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DID: &[u8] = &[0xDE, 0xFA, 0x00, 0x01];

    fn secret() -> SharedSecret {
        SharedSecret::new(vec![0xAA; 16]).unwrap()
    }

    fn setup() -> (AfNef, RisFunction, DeviceController) {
        let cfg = SecurityConfig::default();
        let mut af = AfNef::new();
        af.provision(ProvisioningRecord {
            default_id: DID.to_vec(),
            secret: secret(),
            cfg,
            reader_id: "bs-reader-1".into(),
        })
        .unwrap();
        let function = RisFunction::new();
        let device = DeviceController::new(DID.to_vec(), secret(), cfg);
        (af, function, device)
    }

    fn register(
        af: &mut AfNef,
        function: &mut RisFunction,
        device: &mut DeviceController,
        seed: u64,
    ) -> Vec<EndpointEvent> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let intent = af.initiate(DID).unwrap();
        let request = function.handle_intent(intent, &mut rng).unwrap();
        let out = device.handle_frame(&request);
        let response = out.reply.expect("device answers a valid request");
        let event = function.handle_response(DID, &response);
        function.notify(af, DID, &event);
        vec![out.event, event]
    }

    #[test]
    fn happy_registration_reaches_key_agreement() {
        let (mut af, mut function, mut device) = setup();
        let events = register(&mut af, &mut function, &mut device, 7);
        assert_eq!(
            events,
            vec![EndpointEvent::ResponseSent, EndpointEvent::Authenticated]
        );

        let (d_tid, d_k) = device.registered_pair().unwrap();
        let (f_tid, f_k) = function.registered_pair(DID).unwrap();
        assert_eq!(d_tid, f_tid);
        assert_eq!(d_k, f_k);
        assert_eq!(af.outcomes(), &[(DID.to_vec(), true)]);
        // shared counter sits at 2 on both sides after the handshake
        assert_eq!(device.context().sqn(), Sqn(2));
    }

    #[test]
    fn request_is_deterministic_under_a_seed() {
        let (mut af, mut f1, _) = setup();
        let (mut af2, mut f2, _) = setup();
        let mut r1 = ChaCha8Rng::seed_from_u64(42);
        let mut r2 = ChaCha8Rng::seed_from_u64(42);
        let b1 = f1
            .handle_intent(af.initiate(DID).unwrap(), &mut r1)
            .unwrap();
        let b2 = f2
            .handle_intent(af2.initiate(DID).unwrap(), &mut r2)
            .unwrap();
        assert_eq!(b1, b2);

        let (mut af3, mut f3, _) = setup();
        let mut r3 = ChaCha8Rng::seed_from_u64(43);
        let b3 = f3
            .handle_intent(af3.initiate(DID).unwrap(), &mut r3)
            .unwrap();
        assert_ne!(b1, b3);
    }

    #[test]
    fn af_gates_unknown_and_duplicate_ids() {
        let (mut af, _, _) = setup();
        assert_eq!(af.initiate(&[0x99]).unwrap_err(), EndpointError::UnknownId);
        af.initiate(DID).unwrap();
        assert_eq!(af.initiate(DID).unwrap_err(), EndpointError::Busy);
        af.complete(DID, false);
        assert!(af.initiate(DID).is_ok());
    }

    #[test]
    fn tampered_request_mac_is_rejected_silently() {
        let (mut af, mut function, mut device) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut request = function
            .handle_intent(af.initiate(DID).unwrap(), &mut rng)
            .unwrap();
        let last = request.len() - 1;
        request[last] ^= 0x01;
        let out = device.handle_frame(&request);
        assert_eq!(out.reply, None);
        assert_eq!(
            out.event,
            EndpointEvent::rejected(RejectReason::MacMismatch)
        );
        assert!(!device.is_registered());
    }

    #[test]
    fn request_for_another_device_is_ignored() {
        let (mut af, mut function, _) = setup();
        let mut other = DeviceController::new(vec![0x77], secret(), SecurityConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let request = function
            .handle_intent(af.initiate(DID).unwrap(), &mut rng)
            .unwrap();
        let out = other.handle_frame(&request);
        assert_eq!(out.reply, None);
        assert_eq!(out.event, EndpointEvent::rejected(RejectReason::UnknownId));
    }

    #[test]
    fn replayed_request_hits_the_sequence_check() {
        let (mut af, mut function, mut device) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let request = function
            .handle_intent(af.initiate(DID).unwrap(), &mut rng)
            .unwrap();
        let first = device.handle_frame(&request);
        assert!(first.reply.is_some());
        // byte-identical re-delivery: MAC still verifies, the counter moved on
        let replay = device.handle_frame(&request);
        assert_eq!(replay.reply, None);
        assert_eq!(
            replay.event,
            EndpointEvent::rejected(RejectReason::SqnMismatch)
        );
    }

    #[test]
    fn replayed_response_hits_the_sequence_check() {
        let (mut af, mut function, mut device) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let request = function
            .handle_intent(af.initiate(DID).unwrap(), &mut rng)
            .unwrap();
        let response = device.handle_frame(&request).reply.unwrap();
        assert_eq!(
            function.handle_response(DID, &response),
            EndpointEvent::Authenticated
        );
        assert_eq!(
            function.handle_response(DID, &response),
            EndpointEvent::rejected(RejectReason::SqnMismatch)
        );
    }

    #[test]
    fn forged_result_with_genuine_mac_is_a_result_mismatch() {
        let (mut af, mut function, _) = setup();
        let cfg = SecurityConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let request = function
            .handle_intent(af.initiate(DID).unwrap(), &mut rng)
            .unwrap();
        let WireMessage::RisRequest { .. } = wire::decode(&request, &cfg).unwrap() else {
            unreachable!()
        };
        // an insider with the response-MAC key but the wrong K: the MAC
        // verifies, the proof of K does not
        let bogus_result = vec![0x5A; cfg.result_len];
        let mac = keysched::compute_response_mac(&secret(), DID, &bogus_result, Sqn(2), &cfg);
        let frame = WireMessage::RisResponse {
            result: bogus_result,
            sqn: Sqn(2),
            mac: mac.into_vec(),
        };
        let raw = wire::encode(&frame, &cfg).unwrap();
        assert_eq!(
            function.handle_response(DID, &raw),
            EndpointEvent::rejected(RejectReason::ResultMismatch)
        );
        assert!(matches!(
            function.session_state(DID),
            Some(ContextState::Idle)
        ));
    }

    fn registered() -> (AfNef, RisFunction, DeviceController) {
        let (mut af, mut function, mut device) = setup();
        register(&mut af, &mut function, &mut device, 7);
        (af, function, device)
    }

    #[test]
    fn phase_command_round_trip() {
        let (_, mut function, mut device) = registered();
        let payload = wire::pack_phase_config(&[0, 1, 2, 3, 3, 2, 1, 0], 2).unwrap();
        let cmd = function.send_command(DID, &payload).unwrap();
        let out = device.handle_frame(&cmd);
        assert_eq!(out.event, EndpointEvent::CommandApplied { opcode: 0x10 });
        let installed = device.installed_phase_config().unwrap();
        assert_eq!(installed.states, vec![0, 1, 2, 3, 3, 2, 1, 0]);
        assert_eq!(installed.bits_per_element, 2);
        let ack = out.reply.unwrap();
        assert_eq!(function.handle_ack(DID, &ack), EndpointEvent::AckAccepted);
    }

    #[test]
    fn command_ciphertext_tamper_fails_before_decryption() {
        let (_, mut function, mut device) = registered();
        let payload = wire::pack_phase_config(&[1, 2, 3], 4).unwrap();
        let mut cmd = function.send_command(DID, &payload).unwrap();
        // flip a ciphertext bit (offset past tag + temp_id + sqn + ct_len)
        cmd[1 + 8 + 4 + 2] ^= 0x80;
        let out = device.handle_frame(&cmd);
        assert_eq!(out.reply, None);
        assert_eq!(
            out.event,
            EndpointEvent::rejected(RejectReason::MacMismatch)
        );
        assert!(device.installed_phase_config().is_none());
    }

    #[test]
    fn replayed_command_hits_the_sequence_check() {
        let (_, mut function, mut device) = registered();
        let payload = wire::pack_phase_config(&[1], 2).unwrap();
        let cmd = function.send_command(DID, &payload).unwrap();
        assert!(device.handle_frame(&cmd).reply.is_some());
        let replay = device.handle_frame(&cmd);
        assert_eq!(
            replay.event,
            EndpointEvent::rejected(RejectReason::SqnMismatch)
        );
    }

    #[test]
    fn rotation_commits_on_both_sides_and_invalidates_the_old_id() {
        let (_, mut function, mut device) = registered();
        let old_id = device.registered_pair().unwrap().0.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let renewal = function.send_key_renewal(DID, &mut rng).unwrap();
        let out = device.handle_frame(&renewal);
        assert_eq!(out.event, EndpointEvent::Rotated);
        let ack = out.reply.unwrap();
        assert_eq!(function.handle_ack(DID, &ack), EndpointEvent::Rotated);

        let (d_tid, d_k) = device.registered_pair().unwrap();
        let (f_tid, f_k) = function.registered_pair(DID).unwrap();
        assert_eq!(d_tid, f_tid);
        assert_eq!(d_k, f_k);
        assert_ne!(*d_tid, old_id);

        // a command addressed to the old id is dead
        let payload = wire::pack_phase_config(&[1], 2).unwrap();
        let cmd = function.send_command(DID, &payload).unwrap();
        let cfg = SecurityConfig::default();
        let WireMessage::ProtectedCommand {
            sqn,
            ciphertext,
            mac,
            ..
        } = wire::decode(&cmd, &cfg).unwrap()
        else {
            unreachable!()
        };
        let stale = WireMessage::ProtectedCommand {
            temp_id: old_id.as_bytes().to_vec(),
            sqn,
            ciphertext,
            mac,
        };
        let out = device.handle_frame(&wire::encode(&stale, &cfg).unwrap());
        assert_eq!(out.event, EndpointEvent::rejected(RejectReason::UnknownId));
    }

    #[test]
    fn renewal_with_a_reused_nonce_is_rejected_without_rotation() {
        let (_, mut function, mut device) = registered();
        let pair_before = {
            let (t, k) = device.registered_pair().unwrap();
            (t.clone(), k.clone())
        };
        // replay the registration nonce inside a renewal command
        let reg_nonce = {
            let cfg = SecurityConfig::default();
            let (mut af2, mut f2, _) = setup();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let req = f2
                .handle_intent(af2.initiate(DID).unwrap(), &mut rng)
                .unwrap();
            match wire::decode(&req, &cfg).unwrap() {
                WireMessage::RisRequest { nonce, .. } => nonce,
                _ => unreachable!(),
            }
        };
        let cmd = function
            .send_command(DID, &CommandPayload::KeyRenewal { nonce: reg_nonce })
            .unwrap();
        let out = device.handle_frame(&cmd);
        assert_eq!(out.reply, None);
        assert_eq!(out.event, EndpointEvent::rejected(RejectReason::NonceReuse));
        let (t, k) = device.registered_pair().unwrap();
        assert_eq!((t.clone(), k.clone()), pair_before);
    }

    #[test]
    fn capability_exchange_switches_between_frames() {
        let (_, mut function, mut device) = registered();
        let new_cfg = SecurityConfig::new(HashAlg::Sha3_512, 16, 8, 8, 16).unwrap();
        let cmd = function
            .send_command(DID, &CommandPayload::CapabilityExchange { config: new_cfg })
            .unwrap();
        let out = device.handle_frame(&cmd);
        assert_eq!(out.event, EndpointEvent::CapabilityUpdated);
        assert_eq!(device.context().cfg().hash_alg, HashAlg::Sha3_512);
        // the ack itself still rides the old parameters
        let ack = out.reply.unwrap();
        assert_eq!(
            function.handle_ack(DID, &ack),
            EndpointEvent::CapabilityUpdated
        );
        assert_eq!(
            function.session_cfg(DID).unwrap().hash_alg,
            HashAlg::Sha3_512
        );

        // traffic continues under the new hash
        let payload = wire::pack_phase_config(&[5, 6, 7], 4).unwrap();
        let cmd = function.send_command(DID, &payload).unwrap();
        let out = device.handle_frame(&cmd);
        assert_eq!(out.event, EndpointEvent::CommandApplied { opcode: 0x10 });
        assert_eq!(
            function.handle_ack(DID, &out.reply.unwrap()),
            EndpointEvent::AckAccepted
        );
    }

    #[test]
    fn capability_exchange_cannot_change_the_split_mid_registration() {
        let (_, mut function, mut device) = registered();
        let wider = SecurityConfig::new(HashAlg::Sha256, 16, 16, 8, 16).unwrap();
        let cmd = function
            .send_command(DID, &CommandPayload::CapabilityExchange { config: wider })
            .unwrap();
        let out = device.handle_frame(&cmd);
        assert_eq!(out.reply, None);
        assert_eq!(
            out.event,
            EndpointEvent::rejected(RejectReason::StateOutOfRange)
        );
        assert_eq!(device.context().cfg().temp_id_len, 8);
    }

    #[test]
    fn command_before_registration_is_ignored() {
        let (_, _, mut device) = setup();
        let cfg = SecurityConfig::default();
        let frame = WireMessage::ProtectedCommand {
            temp_id: vec![0; 8],
            sqn: Sqn(1),
            ciphertext: vec![1, 2, 3],
            mac: vec![0; 8],
        };
        let out = device.handle_frame(&wire::encode(&frame, &cfg).unwrap());
        assert_eq!(out.event, EndpointEvent::rejected(RejectReason::UnknownId));
    }

    #[test]
    fn reader_is_byte_transparent_and_correlates_fifo() {
        let cfg = SecurityConfig::default();
        let mut reader = Reader::new();
        let frame = wire::encode(
            &WireMessage::RisRequest {
                default_id: DID.to_vec(),
                nonce: vec![1; 16],
                sqn: Sqn(1),
                mac: vec![0; 8],
            },
            &cfg,
        )
        .unwrap();
        assert_eq!(reader.relay(&frame), &frame[..]);
        assert_eq!(
            reader.correlate_response().unwrap_err(),
            EndpointError::NoPendingTransaction
        );
        reader.note_downlink(&frame, &cfg);
        let frame2 = wire::encode(
            &WireMessage::RisRequest {
                default_id: vec![0x77],
                nonce: vec![2; 16],
                sqn: Sqn(1),
                mac: vec![0; 8],
            },
            &cfg,
        )
        .unwrap();
        reader.note_downlink(&frame2, &cfg);
        assert_eq!(reader.correlate_response().unwrap(), DID.to_vec());
        assert_eq!(reader.correlate_response().unwrap(), vec![0x77]);
    }

    // every (state, frame) pair must land on a defined event, never a panic
    #[test]
    fn frame_handling_is_total() {
        use rand_chacha::rand_core::RngCore;
        let (mut af, mut function, mut device) = setup();
        let mut registered_device = {
            let (mut af2, mut f2, mut d2) = setup();
            register(&mut af2, &mut f2, &mut d2, 3);
            d2
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0x7074);
        let request = function
            .handle_intent(af.initiate(DID).unwrap(), &mut rng)
            .unwrap();
        for i in 0..20_000u32 {
            let len = (i % 48) as usize;
            let mut buf = vec![0u8; len];
            rng.fill_bytes(&mut buf);
            if len > 4 && i % 3 == 0 {
                // bias toward plausible tags
                buf[0] = (i % 5) as u8;
            }
            let out = device.handle_frame(&buf);
            assert!(out.reply.is_none() || out.event.is_observable() || true);
            let _ = registered_device.handle_frame(&buf);
            let _ = function.handle_response(DID, &buf);
            let _ = function.handle_ack(DID, &buf);
        }
        // the legitimate request still works after the noise
        let out = device.handle_frame(&request);
        assert!(out.reply.is_some());
    }

    #[test]
    fn event_json_shape_is_stable() {
        let e = EndpointEvent::CommandApplied { opcode: 0x10 };
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"kind":"command-applied","opcode":16}"#
        );
        let r = EndpointEvent::rejected(RejectReason::MacMismatch);
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"kind":"rejected","reason":"mac-mismatch"}"#
        );
        let back: EndpointEvent = serde_json::from_str(r#"{"kind":"authenticated"}"#).unwrap();
        assert_eq!(back, EndpointEvent::Authenticated);
    }
}
