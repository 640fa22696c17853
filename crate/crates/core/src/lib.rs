//! Mutual authentication and a protected command channel for RIS
//! controllers, the battery-less surface devices steered by a network-side
//! function through a base-station reader.
//!
//! A controller is provisioned with a one-time default identifier and a
//! shared secret. Registration derives a pseudonymous temporary id and an
//! encryption key K from a fresh nonce, proves possession of the secret in
//! both directions, and from then on every frame is sequence-numbered,
//! encrypted with AES-CTR, and authenticated encrypt-then-MAC. The real
//! controller identity never crosses the air interface, and the temporary
//! id can be rotated in place over the protected channel.
//!
//! Layering, bottom up:
//!
//! - [`crypto`]: hash, HMAC, AES-CTR, AES-CMAC, and SNOW 3G primitives with
//!   a self-test gate over published vectors
//! - [`keysched`]: key and id derivation, MAC framing, sequence and nonce
//!   bookkeeping in a [`keysched::SecurityContext`]
//! - [`wire`]: the byte-exact frame and command-payload codec
//! - [`endpoints`]: device controller, network function, reader relay, and
//!   provisioning stub as deterministic state machines
//! - [`simnet`]: a single-threaded simulated radio link with a scripted
//!   adversary, frozen scenario expectations, and privacy audits
//! - [`bench`]: the measurement harness behind the `risbench` CLI
//!
//! Commonly used types are re-exported at the crate root.

pub mod bench;
pub mod crypto;
pub mod endpoints;
pub mod keysched;
pub mod simnet;
pub mod wire;

pub use crypto::HashAlg;
pub use endpoints::{
    AfNef, DeviceController, DeviceOutcome, EndpointEvent, ProvisioningRecord, Reader,
    RejectReason, RisFunction,
};
pub use keysched::{
    Direction, EncAlg, EncryptionKeyK, Nonce, SecurityConfig, SecurityContext, SharedSecret, Sqn,
    TemporaryId,
};
pub use wire::{CommandPayload, WireError, WireMessage};
