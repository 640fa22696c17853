//! Deterministic in-memory air interface: connects the function, reader,
//! and devices, puts a scriptable adversary on the air link, and records
//! everything into a reproducible transcript.
//!
//! Time is an integer microsecond clock; every frame that touches the air
//! costs one fixed delivery interval. All randomness flows from the
//! scenario seed through independent, labeled generator streams, so a
//! `(name, seed)` pair fully determines the transcript bytes.
//!
//! Adversary semantics: the script holds one action per frame sent by a
//! legitimate endpoint, consumed in air order. `Replay(i)` delivers the
//! current frame and then a byte-copy of recorded frame `i` to its original
//! destination; `Reorder(indices)` front-runs the current frame with copies
//! of earlier recorded frames; `Inject(raw)` substitutes the attacker's
//! bytes for the current frame, which is dropped. Adversary-originated
//! deliveries consume no script actions.

use std::collections::{HashMap, VecDeque};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::crypto::HashAlg;
use crate::endpoints::{
    AfNef, DeviceController, EndpointEvent, ProvisioningRecord, Reader, RisFunction,
};
use crate::keysched::{Direction, SecurityConfig, SharedSecret};
use crate::wire::{self, CommandPayload};

/// One scripted decision for one legitimate frame on the air.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdversaryAction {
    PassThrough,
    Drop,
    /// Deliver the current frame, then a byte-copy of recorded frame `i`.
    Replay(usize),
    /// Flip one bit of the current frame, then deliver it.
    TamperBit {
        byte: usize,
        bit: u8,
    },
    /// Substitute these bytes for the current frame (which is dropped).
    Inject(Vec<u8>),
    /// Deliver byte-copies of recorded frames first, then the current one.
    Reorder(Vec<usize>),
}

/// What happened to one frame at the air interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeliveryVerdict {
    Delivered,
    Dropped,
    TamperedDelivered,
    Injected,
    ReplayedCopy,
    ReorderedCopy,
}

impl DeliveryVerdict {
    fn is_adversary_origin(self) -> bool {
        matches!(
            self,
            DeliveryVerdict::Injected
                | DeliveryVerdict::ReplayedCopy
                | DeliveryVerdict::ReorderedCopy
        )
    }
}

/// One recorded air event: a frame delivered (or dropped) with the
/// endpoint's resulting event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TranscriptEntry {
    pub index: usize,
    pub time_us: u64,
    /// Hex default id naming the radio link.
    pub link: String,
    pub direction: Direction,
    /// Raw frame octets, lowercase hex.
    pub frame: String,
    pub verdict: DeliveryVerdict,
    /// Receiving endpoint ("device", "function", "reader"); absent for drops.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event: Option<EndpointEvent>,
}

/// Complete, append-only record of one scenario run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub scenario: String,
    pub seed: u64,
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    /// Observable events in air order (bookkeeping events filtered out).
    pub fn observable_events(&self) -> Vec<EndpointEvent> {
        self.entries
            .iter()
            .filter_map(|e| e.event.clone())
            .filter(|e| e.is_observable())
            .collect()
    }

    /// One JSON object per line, one line per entry.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entries serialize"));
            out.push('\n');
        }
        out
    }

    /// delivered + dropped + adversary-injected must cover every entry.
    pub fn conservation_holds(&self) -> bool {
        let delivered = self
            .entries
            .iter()
            .filter(|e| {
                matches!(
                    e.verdict,
                    DeliveryVerdict::Delivered | DeliveryVerdict::TamperedDelivered
                )
            })
            .count();
        let dropped = self
            .entries
            .iter()
            .filter(|e| e.verdict == DeliveryVerdict::Dropped)
            .count();
        let injected = self
            .entries
            .iter()
            .filter(|e| e.verdict.is_adversary_origin())
            .count();
        delivered + dropped + injected == self.entries.len()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("no scenario named {0}")]
    UnknownScenario(String),
    #[error("script refers to frame {index} but only {len} frames are recorded")]
    ScriptIndexOutOfRange { index: usize, len: usize },
    #[error("tamper target byte {byte} outside frame of {len} octets")]
    TamperOutOfRange { byte: usize, len: usize },
    #[error(
        "{remaining} adversary actions left unconsumed; script does not match the frame count"
    )]
    UnconsumedScript { remaining: usize },
    #[error("control step failed: {0}")]
    Control(String),
}

/// Per-device material the privacy audit needs, collected during the run.
#[derive(Debug, Clone, Default)]
pub struct SessionAudit {
    pub default_id_hex: String,
    pub secret_hex: String,
    /// Every key K that ever existed on either side, hex.
    pub k_hexes: Vec<String>,
    /// Every temporary id in order of adoption, hex.
    pub temp_id_hexes: Vec<String>,
    /// (old temp id hex, last transcript index where it may appear).
    pub rotation_boundaries: Vec<(String, usize)>,
    /// Number of registration requests sent for this device.
    pub registrations: usize,
}

/// Privacy check outcome; violations name the offending frame indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivacyReport {
    pub pass: bool,
    pub violations: Vec<String>,
}

/// Scans a transcript for identity and key leakage: the shared secret and
/// every K must never appear in any frame, the default id must appear in
/// exactly one frame per registration, and a rotated-out temporary id must
/// never appear after its rotation boundary.
pub fn assert_privacy(transcript: &Transcript, audits: &[SessionAudit]) -> PrivacyReport {
    let mut violations = Vec::new();
    for audit in audits {
        for (i, entry) in transcript.entries.iter().enumerate() {
            if entry.frame.contains(&audit.secret_hex) {
                violations.push(format!("frame {i} contains the shared secret"));
            }
            for k in &audit.k_hexes {
                if entry.frame.contains(k) {
                    violations.push(format!("frame {i} contains an encryption key"));
                }
            }
        }
        let id_frames: Vec<usize> = transcript
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.frame.contains(&audit.default_id_hex))
            .map(|(i, _)| i)
            .collect();
        if id_frames.len() != audit.registrations {
            violations.push(format!(
                "default id {} appears in frames {:?}, expected exactly {} appearance(s)",
                audit.default_id_hex, id_frames, audit.registrations
            ));
        }
        for (old_id, boundary) in &audit.rotation_boundaries {
            for (i, entry) in transcript.entries.iter().enumerate().skip(boundary + 1) {
                if entry.frame.contains(old_id) {
                    violations.push(format!(
                        "frame {i} contains rotated-out temporary id {old_id} (boundary {boundary})"
                    ));
                }
            }
        }
    }
    PrivacyReport {
        pass: violations.is_empty(),
        violations,
    }
}

/// A control-plane trigger the scenario fires between air exchanges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlStep {
    /// Start a registration for one device.
    Register { device: usize },
    /// Start registrations for several devices before any response returns.
    RegisterMany { devices: Vec<usize> },
    /// Send a phase configuration command with seeded random states.
    PhaseConfig {
        device: usize,
        elements: u16,
        bits: u8,
    },
    /// Send a key renewal with a fresh seeded nonce.
    KeyRenewal { device: usize },
    /// Send a capability exchange carrying this config.
    Capability { device: usize, cfg: SecurityConfig },
}

/// A reproducible experiment: devices, control steps, adversary script,
/// and the expected observable events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub device_count: usize,
    pub steps: Vec<ControlStep>,
    pub script: Vec<AdversaryAction>,
    pub expected: Vec<EndpointEvent>,
}

/// Everything a finished run yields.
#[derive(Debug)]
pub struct ScenarioReport {
    pub transcript: Transcript,
    pub observed: Vec<EndpointEvent>,
    pub expected: Vec<EndpointEvent>,
    pub matched: bool,
    pub audits: Vec<SessionAudit>,
}

/// Air frame delivery cost, mirroring a fixed radio transmission time.
pub const DEFAULT_FRAME_COST_US: u64 = 1000;

const SECRET_STREAM: u64 = 0x5EC2E7;
const NONCE_STREAM: u64 = 0x0A0CE5;
const PAYLOAD_STREAM: u64 = 0xF00D05;

fn stream_rng(seed: u64, label: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ label)
}

fn device_default_id(index: usize) -> Vec<u8> {
    vec![0xDE, 0xFA, 0x00, index as u8]
}

fn device_secret(seed: u64, index: usize) -> Vec<u8> {
    let mut rng = stream_rng(seed.wrapping_add(index as u64), SECRET_STREAM);
    let mut bytes = vec![0u8; 16];
    rng.fill_bytes(&mut bytes);
    bytes
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    Legit,
    Adversary(DeliveryVerdict),
}

#[derive(Debug, Clone)]
struct AirFrame {
    link: Vec<u8>,
    direction: Direction,
    bytes: Vec<u8>,
    origin: Origin,
}

/// The simulator: endpoints, the adversary, the clock, and the transcript.
pub struct Simulator {
    af: AfNef,
    function: RisFunction,
    reader: Reader,
    devices: HashMap<Vec<u8>, DeviceController>,
    provisioned_cfg: HashMap<Vec<u8>, SecurityConfig>,
    queue: VecDeque<AirFrame>,
    script: VecDeque<AdversaryAction>,
    clock_us: u64,
    frame_cost_us: u64,
    transcript: Transcript,
    audits: HashMap<Vec<u8>, SessionAudit>,
    nonce_rng: ChaCha8Rng,
    payload_rng: ChaCha8Rng,
}

impl Simulator {
    fn new(scenario: &Scenario) -> Self {
        let mut af = AfNef::new();
        let mut devices = HashMap::new();
        let mut provisioned_cfg = HashMap::new();
        let mut audits = HashMap::new();
        let cfg = SecurityConfig::default();
        for i in 0..scenario.device_count {
            let default_id = device_default_id(i);
            let secret_bytes = device_secret(scenario.seed, i);
            let secret = SharedSecret::new(secret_bytes.clone()).expect("16-octet secret");
            af.provision(ProvisioningRecord {
                default_id: default_id.clone(),
                secret: secret.clone(),
                cfg,
                reader_id: "bs-reader-1".into(),
            })
            .expect("unique default ids");
            devices.insert(
                default_id.clone(),
                DeviceController::new(default_id.clone(), secret, cfg),
            );
            provisioned_cfg.insert(default_id.clone(), cfg);
            audits.insert(
                default_id.clone(),
                SessionAudit {
                    default_id_hex: hex(&default_id),
                    secret_hex: hex(&secret_bytes),
                    ..SessionAudit::default()
                },
            );
        }
        Simulator {
            af,
            function: RisFunction::new(),
            reader: Reader::new(),
            devices,
            provisioned_cfg,
            queue: VecDeque::new(),
            script: scenario.script.iter().cloned().collect(),
            clock_us: 0,
            frame_cost_us: DEFAULT_FRAME_COST_US,
            transcript: Transcript {
                scenario: scenario.name.clone(),
                seed: scenario.seed,
                entries: Vec::new(),
            },
            audits: audits.clone(),
            nonce_rng: stream_rng(scenario.seed, NONCE_STREAM),
            payload_rng: stream_rng(scenario.seed, PAYLOAD_STREAM),
        }
    }

    fn start_registration(&mut self, device: usize) -> Result<(), SimError> {
        let default_id = device_default_id(device);
        let intent = self
            .af
            .initiate(&default_id)
            .map_err(|e| SimError::Control(e.to_string()))?;
        let request = self
            .function
            .handle_intent(intent, &mut self.nonce_rng)
            .map_err(|e| SimError::Control(e.to_string()))?;
        let cfg = self.provisioned_cfg[&default_id];
        self.reader.note_downlink(&request, &cfg);
        if let Some(a) = self.audits.get_mut(&default_id) {
            a.registrations += 1;
        }
        self.queue.push_back(AirFrame {
            link: default_id,
            direction: Direction::Downlink,
            bytes: request,
            origin: Origin::Legit,
        });
        Ok(())
    }

    fn send_command(&mut self, device: usize, payload: &CommandPayload) -> Result<(), SimError> {
        let default_id = device_default_id(device);
        let frame = self
            .function
            .send_command(&default_id, payload)
            .map_err(|e| SimError::Control(e.to_string()))?;
        self.queue.push_back(AirFrame {
            link: default_id,
            direction: Direction::Downlink,
            bytes: frame,
            origin: Origin::Legit,
        });
        Ok(())
    }

    fn run_step(&mut self, step: &ControlStep) -> Result<(), SimError> {
        match step {
            ControlStep::Register { device } => self.start_registration(*device)?,
            ControlStep::RegisterMany { devices } => {
                for d in devices {
                    self.start_registration(*d)?;
                }
            }
            ControlStep::PhaseConfig {
                device,
                elements,
                bits,
            } => {
                let mask_limit = 1u16 << bits.min(&8).to_owned();
                let mut states = vec![0u8; *elements as usize];
                self.payload_rng.fill_bytes(&mut states);
                for s in &mut states {
                    *s = (u16::from(*s) % mask_limit) as u8;
                }
                let payload = wire::pack_phase_config(&states, *bits)
                    .map_err(|e| SimError::Control(e.to_string()))?;
                self.send_command(*device, &payload)?;
            }
            ControlStep::KeyRenewal { device } => {
                let default_id = device_default_id(*device);
                let frame = self
                    .function
                    .send_key_renewal(&default_id, &mut self.nonce_rng)
                    .map_err(|e| SimError::Control(e.to_string()))?;
                self.queue.push_back(AirFrame {
                    link: default_id,
                    direction: Direction::Downlink,
                    bytes: frame,
                    origin: Origin::Legit,
                });
            }
            ControlStep::Capability { device, cfg } => {
                self.send_command(
                    *device,
                    &CommandPayload::CapabilityExchange { config: *cfg },
                )?;
            }
        }
        self.pump()
    }

    fn pump(&mut self) -> Result<(), SimError> {
        while let Some(frame) = self.queue.pop_front() {
            match frame.origin {
                Origin::Legit => {
                    let action = self
                        .script
                        .pop_front()
                        .unwrap_or(AdversaryAction::PassThrough);
                    self.apply_action(frame, action)?;
                }
                Origin::Adversary(verdict) => {
                    self.deliver(frame, verdict);
                }
            }
        }
        Ok(())
    }

    fn recorded_copy(&self, index: usize, verdict: DeliveryVerdict) -> Result<AirFrame, SimError> {
        let entry = self
            .transcript
            .entries
            .get(index)
            .ok_or(SimError::ScriptIndexOutOfRange {
                index,
                len: self.transcript.entries.len(),
            })?;
        Ok(AirFrame {
            link: hexdecode(&entry.link),
            direction: entry.direction,
            bytes: hexdecode(&entry.frame),
            origin: Origin::Adversary(verdict),
        })
    }

    fn apply_action(&mut self, frame: AirFrame, action: AdversaryAction) -> Result<(), SimError> {
        match action {
            AdversaryAction::PassThrough => {
                self.deliver(frame, DeliveryVerdict::Delivered);
            }
            AdversaryAction::Drop => {
                self.record(&frame, DeliveryVerdict::Dropped, None, None);
            }
            AdversaryAction::TamperBit { byte, bit } => {
                let mut frame = frame;
                if byte >= frame.bytes.len() {
                    return Err(SimError::TamperOutOfRange {
                        byte,
                        len: frame.bytes.len(),
                    });
                }
                frame.bytes[byte] ^= 1 << (bit & 7);
                self.deliver(frame, DeliveryVerdict::TamperedDelivered);
            }
            AdversaryAction::Inject(raw) => {
                self.record(&frame, DeliveryVerdict::Dropped, None, None);
                let injected = AirFrame {
                    link: frame.link,
                    direction: frame.direction,
                    bytes: raw,
                    origin: Origin::Adversary(DeliveryVerdict::Injected),
                };
                self.deliver(injected, DeliveryVerdict::Injected);
            }
            AdversaryAction::Replay(index) => {
                self.deliver(frame, DeliveryVerdict::Delivered);
                let copy = self.recorded_copy(index, DeliveryVerdict::ReplayedCopy)?;
                self.deliver(copy, DeliveryVerdict::ReplayedCopy);
            }
            AdversaryAction::Reorder(indices) => {
                for index in indices {
                    let copy = self.recorded_copy(index, DeliveryVerdict::ReorderedCopy)?;
                    self.deliver(copy, DeliveryVerdict::ReorderedCopy);
                }
                self.deliver(frame, DeliveryVerdict::Delivered);
            }
        }
        Ok(())
    }

    fn record(
        &mut self,
        frame: &AirFrame,
        verdict: DeliveryVerdict,
        endpoint: Option<&'static str>,
        event: Option<EndpointEvent>,
    ) -> usize {
        self.clock_us += self.frame_cost_us;
        let index = self.transcript.entries.len();
        self.transcript.entries.push(TranscriptEntry {
            index,
            time_us: self.clock_us,
            link: hex(&frame.link),
            direction: frame.direction,
            frame: hex(&frame.bytes),
            verdict,
            endpoint,
            event,
        });
        index
    }

    fn deliver(&mut self, frame: AirFrame, verdict: DeliveryVerdict) {
        match frame.direction {
            Direction::Downlink => {
                let outcome = self
                    .devices
                    .get_mut(&frame.link)
                    .expect("frames ride provisioned links")
                    .handle_frame(&frame.bytes);
                let index =
                    self.record(&frame, verdict, Some("device"), Some(outcome.event.clone()));
                self.capture_device_audit(&frame.link, &outcome.event, index);
                if let Some(reply) = outcome.reply {
                    self.queue.push_back(AirFrame {
                        link: frame.link,
                        direction: Direction::Uplink,
                        bytes: reply,
                        origin: Origin::Legit,
                    });
                }
            }
            Direction::Uplink => {
                // registration responses carry no id: the reader correlates
                // them to the oldest pending transaction, falling back to
                // the radio link they arrived on when none is pending (a
                // replayed response must still reach the sequence check)
                if frame.bytes.first() == Some(&wire::TAG_RIS_RESPONSE) {
                    let default_id = self
                        .reader
                        .correlate_response()
                        .unwrap_or_else(|_| frame.link.clone());
                    let event = self.function.handle_response(&default_id, &frame.bytes);
                    self.function.notify(&mut self.af, &default_id, &event);
                    let index = self.record(&frame, verdict, Some("function"), Some(event.clone()));
                    self.capture_function_audit(&default_id, &event, index);
                } else {
                    let event = self.function.handle_ack(&frame.link, &frame.bytes);
                    let index = self.record(&frame, verdict, Some("function"), Some(event.clone()));
                    self.capture_function_audit(&frame.link, &event, index);
                }
            }
        }
    }

    /// Snapshots keys and ids for the privacy audit at commit points.
    fn capture_device_audit(&mut self, default_id: &[u8], event: &EndpointEvent, index: usize) {
        if *event != EndpointEvent::Rotated {
            return;
        }
        let device = &self.devices[default_id];
        let Some((tid, k)) = device.registered_pair() else {
            return;
        };
        let audit = self.audits.get_mut(default_id).expect("audited device");
        if let Some(old) = audit.temp_id_hexes.last().cloned() {
            audit.rotation_boundaries.push((old, index));
        }
        audit.temp_id_hexes.push(hex(tid.as_bytes()));
        audit.k_hexes.push(hex(&k.reveal_for_audit()));
    }

    fn capture_function_audit(&mut self, default_id: &[u8], event: &EndpointEvent, index: usize) {
        let _ = index;
        if *event != EndpointEvent::Authenticated {
            return;
        }
        let Some((tid, k)) = self.function.registered_pair(default_id) else {
            return;
        };
        let audit = self.audits.get_mut(default_id).expect("audited device");
        audit.temp_id_hexes.push(hex(tid.as_bytes()));
        audit.k_hexes.push(hex(&k.reveal_for_audit()));
    }

    pub fn device(&self, index: usize) -> &DeviceController {
        &self.devices[&device_default_id(index)]
    }

    pub fn function(&self) -> &RisFunction {
        &self.function
    }
}

fn hexdecode(s: &str) -> Vec<u8> {
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).expect("transcript hex is valid"))
        .collect()
}

/// Runs a scenario to quiescence and checks its expectations.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioReport, SimError> {
    let mut sim = Simulator::new(scenario);
    for step in &scenario.steps {
        sim.run_step(step)?;
    }
    if !sim.script.is_empty() {
        return Err(SimError::UnconsumedScript {
            remaining: sim.script.len(),
        });
    }
    let observed = sim.transcript.observable_events();
    let matched = observed == scenario.expected;
    let mut audits: Vec<SessionAudit> = sim.audits.values().cloned().collect();
    audits.sort_by(|a, b| a.default_id_hex.cmp(&b.default_id_hex));
    Ok(ScenarioReport {
        transcript: sim.transcript,
        observed,
        expected: scenario.expected.clone(),
        matched,
        audits,
    })
}

/// After-the-fact key agreement check used by tests: runs the scenario and
/// returns whether every registered device agrees with the function on
/// (temporary id, K).
pub fn run_and_check_agreement(scenario: &Scenario) -> Result<(ScenarioReport, bool), SimError> {
    let mut sim = Simulator::new(scenario);
    for step in &scenario.steps {
        sim.run_step(step)?;
    }
    if !sim.script.is_empty() {
        return Err(SimError::UnconsumedScript {
            remaining: sim.script.len(),
        });
    }
    let mut agree = true;
    for i in 0..scenario.device_count {
        let id = device_default_id(i);
        let dev_pair = sim.devices[&id].registered_pair();
        let fn_pair = sim.function.registered_pair(&id);
        match (dev_pair, fn_pair) {
            (Some((dt, dk)), Some((ft, fk))) => {
                if dt != ft || dk != fk {
                    agree = false;
                }
            }
            (None, None) => {}
            _ => agree = false,
        }
    }
    let observed = sim.transcript.observable_events();
    let matched = observed == scenario.expected;
    let mut audits: Vec<SessionAudit> = sim.audits.values().cloned().collect();
    audits.sort_by(|a, b| a.default_id_hex.cmp(&b.default_id_hex));
    Ok((
        ScenarioReport {
            transcript: sim.transcript,
            observed,
            expected: scenario.expected.clone(),
            matched,
            audits,
        },
        agree,
    ))
}

fn golden(name: &str) -> Vec<EndpointEvent> {
    let json = match name {
        "happy" => include_str!("simnet/golden/happy.json"),
        "replay-request" => include_str!("simnet/golden/replay-request.json"),
        "replay-response" => include_str!("simnet/golden/replay-response.json"),
        "replay-command" => include_str!("simnet/golden/replay-command.json"),
        "tamper" => include_str!("simnet/golden/tamper.json"),
        "wrong-secret" => include_str!("simnet/golden/wrong-secret.json"),
        "rotation" => include_str!("simnet/golden/rotation.json"),
        "capability-swap" => include_str!("simnet/golden/capability-swap.json"),
        "interleaved-two-devices" => include_str!("simnet/golden/interleaved-two-devices.json"),
        _ => unreachable!("golden() called for unknown scenario"),
    };
    serde_json::from_str(json).expect("golden files are valid event JSON")
}

/// Names of the standard scenario suite.
pub fn scenario_names() -> &'static [&'static str] {
    &[
        "happy",
        "replay-request",
        "replay-response",
        "replay-command",
        "tamper",
        "wrong-secret",
        "rotation",
        "capability-swap",
        "interleaved-two-devices",
    ]
}

/// Builds a standard scenario by name; expectations come from the frozen
/// golden files.
pub fn scenario_by_name(name: &str, seed: u64) -> Result<Scenario, SimError> {
    let base = Scenario {
        name: name.to_string(),
        seed,
        device_count: 1,
        steps: vec![],
        script: vec![],
        expected: vec![],
    };
    let mut s = match name {
        "happy" => Scenario {
            steps: vec![
                ControlStep::Register { device: 0 },
                ControlStep::PhaseConfig {
                    device: 0,
                    elements: 16,
                    bits: 2,
                },
            ],
            ..base
        },
        // frame order: 0 request, 1 response, 2 command, 3 ack
        "replay-request" => Scenario {
            steps: vec![ControlStep::Register { device: 0 }],
            script: vec![AdversaryAction::PassThrough, AdversaryAction::Replay(0)],
            ..base
        },
        "replay-response" => Scenario {
            steps: vec![ControlStep::Register { device: 0 }],
            script: vec![AdversaryAction::PassThrough, AdversaryAction::Replay(1)],
            ..base
        },
        "replay-command" => Scenario {
            steps: vec![
                ControlStep::Register { device: 0 },
                ControlStep::PhaseConfig {
                    device: 0,
                    elements: 16,
                    bits: 2,
                },
            ],
            script: vec![
                AdversaryAction::PassThrough,
                AdversaryAction::PassThrough,
                AdversaryAction::PassThrough,
                AdversaryAction::Replay(2),
            ],
            ..base
        },
        // request layout: tag(1) + len+id(5) + len+nonce(17) + sqn(4) = 27
        // octets before the MAC; byte 27 is the MAC's first octet
        "tamper" => Scenario {
            steps: vec![ControlStep::Register { device: 0 }],
            script: vec![AdversaryAction::TamperBit { byte: 27, bit: 0 }],
            ..base
        },
        "wrong-secret" => Scenario {
            steps: vec![ControlStep::Register { device: 0 }],
            script: vec![AdversaryAction::Inject(forged_request(seed))],
            ..base
        },
        "rotation" => Scenario {
            steps: vec![
                ControlStep::Register { device: 0 },
                ControlStep::PhaseConfig {
                    device: 0,
                    elements: 16,
                    bits: 2,
                },
                ControlStep::KeyRenewal { device: 0 },
                ControlStep::PhaseConfig {
                    device: 0,
                    elements: 16,
                    bits: 2,
                },
            ],
            ..base
        },
        "capability-swap" => Scenario {
            steps: vec![
                ControlStep::Register { device: 0 },
                ControlStep::Capability {
                    device: 0,
                    cfg: SecurityConfig::new(HashAlg::Sha3_512, 16, 8, 8, 16)
                        .expect("swap config is valid"),
                },
                ControlStep::PhaseConfig {
                    device: 0,
                    elements: 16,
                    bits: 2,
                },
            ],
            ..base
        },
        "interleaved-two-devices" => Scenario {
            device_count: 2,
            steps: vec![
                ControlStep::RegisterMany {
                    devices: vec![0, 1],
                },
                ControlStep::PhaseConfig {
                    device: 0,
                    elements: 16,
                    bits: 2,
                },
                ControlStep::PhaseConfig {
                    device: 1,
                    elements: 16,
                    bits: 2,
                },
            ],
            ..base
        },
        other => return Err(SimError::UnknownScenario(other.to_string())),
    };
    s.expected = golden(name);
    Ok(s)
}

/// A registration request built without the provisioned secret: the shape
/// is right, the MAC key is wrong.
fn forged_request(seed: u64) -> Vec<u8> {
    use crate::keysched::{self, Nonce, Sqn};
    let cfg = SecurityConfig::default();
    let default_id = device_default_id(0);
    let mut rng = stream_rng(seed, 0xBAD5EC);
    let mut nonce_bytes = vec![0u8; 16];
    rng.fill_bytes(&mut nonce_bytes);
    let mut wrong_secret = vec![0u8; 16];
    rng.fill_bytes(&mut wrong_secret);
    let secret = SharedSecret::new(wrong_secret).expect("16-octet secret");
    let nonce = Nonce::new(nonce_bytes).expect("16-octet nonce");
    let mac = keysched::compute_request_mac(&secret, &default_id, &nonce, Sqn(1), &cfg);
    let frame = wire::WireMessage::RisRequest {
        default_id,
        nonce: nonce.as_bytes().to_vec(),
        sqn: Sqn(1),
        mac: mac.into_vec(),
    };
    wire::encode(&frame, &cfg).expect("forged frame is structurally valid")
}
