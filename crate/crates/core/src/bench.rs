//! Microbenchmark harness for the protection chain: times the sender side
//! (counter-mode encryption plus MAC-I) and the receiver side (MAC verify
//! plus decryption) for each algorithm and packet size, then adds a fixed
//! radio interval to model one end-to-end transfer.
//!
//! The harness reports medians with p10/p90 dispersion and asserts only
//! ordinal properties (growth trends, curve proximity); absolute times are
//! machine-specific. Cells run strictly one at a time on one thread, since
//! parallel timing loops corrupt one another. The timed region covers the
//! per-packet work only: payloads, keys, and output buffers are set up
//! outside it.

use std::fmt;
use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, ct_eq, HashAlg};

/// A MAC-I algorithm under test. Encryption is AES-CTR in every case; only
/// the integrity algorithm varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchAlg {
    HmacSha256,
    HmacSha384,
    HmacSha3_512,
    AesCmac,
    Snow3g,
}

impl BenchAlg {
    pub fn label(self) -> &'static str {
        match self {
            BenchAlg::HmacSha256 => "hmac-sha256",
            BenchAlg::HmacSha384 => "hmac-sha384",
            BenchAlg::HmacSha3_512 => "hmac-sha3-512",
            BenchAlg::AesCmac => "aes-cmac",
            BenchAlg::Snow3g => "snow3g",
        }
    }

    pub fn all() -> &'static [BenchAlg] {
        &[
            BenchAlg::HmacSha256,
            BenchAlg::HmacSha384,
            BenchAlg::HmacSha3_512,
            BenchAlg::AesCmac,
            BenchAlg::Snow3g,
        ]
    }
}

impl std::str::FromStr for BenchAlg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hmac-sha256" => Ok(BenchAlg::HmacSha256),
            "hmac-sha384" => Ok(BenchAlg::HmacSha384),
            "hmac-sha3-512" => Ok(BenchAlg::HmacSha3_512),
            "aes-cmac" => Ok(BenchAlg::AesCmac),
            "snow3g" => Ok(BenchAlg::Snow3g),
            other => Err(format!("unknown algorithm {other}")),
        }
    }
}

impl fmt::Display for BenchAlg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Which leg of the modeled transmission a record describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    SenderProtect,
    ReceiverVerify,
    EndToEndModel,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::SenderProtect => "sender_protect",
            Phase::ReceiverVerify => "receiver_verify",
            Phase::EndToEndModel => "end_to_end_model",
        }
    }

    fn from_label(s: &str) -> Option<Self> {
        match s {
            "sender_protect" => Some(Phase::SenderProtect),
            "receiver_verify" => Some(Phase::ReceiverVerify),
            "end_to_end_model" => Some(Phase::EndToEndModel),
            _ => None,
        }
    }
}

pub const DEFAULT_PACKET_SIZES: &[usize] = &[64, 256, 1024, 4096, 16384, 65536];
pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_WARMUP: usize = 100;
pub const DEFAULT_RADIO_MS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub algorithms: Vec<BenchAlg>,
    pub packet_sizes: Vec<usize>,
    pub iterations: usize,
    pub warmup: usize,
    /// Fixed radio transmission time added to the end-to-end model, ms.
    pub radio_ms: f64,
    /// MAC the packet's digest instead of the full packet (HMAC rows only).
    pub digest_then_mac: bool,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            algorithms: BenchAlg::all().to_vec(),
            packet_sizes: DEFAULT_PACKET_SIZES.to_vec(),
            iterations: DEFAULT_ITERATIONS,
            warmup: DEFAULT_WARMUP,
            radio_ms: DEFAULT_RADIO_MS,
            digest_then_mac: false,
            seed: 0xBE7C4,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.algorithms.is_empty() {
            return Err(BenchError::InvalidConfig("no algorithms selected"));
        }
        if self.packet_sizes.is_empty() {
            return Err(BenchError::InvalidConfig("no packet sizes selected"));
        }
        if !self.packet_sizes.windows(2).all(|w| w[0] < w[1]) {
            return Err(BenchError::InvalidConfig(
                "packet sizes must be strictly ascending",
            ));
        }
        if self.packet_sizes.iter().any(|&s| s == 0 || s > 1 << 24) {
            return Err(BenchError::InvalidConfig("packet size outside 1..=16 MiB"));
        }
        if self.iterations < 100 {
            return Err(BenchError::InvalidConfig("iterations below the 100 floor"));
        }
        if !(self.radio_ms.is_finite() && self.radio_ms >= 0.0) {
            return Err(BenchError::InvalidConfig(
                "radio_ms must be a finite non-negative value",
            ));
        }
        Ok(())
    }
}

/// One measured (or modeled) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub algorithm: BenchAlg,
    pub packet_size: usize,
    pub phase: Phase,
    pub median_us: f64,
    pub p10_us: f64,
    pub p90_us: f64,
    pub iters: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BenchError {
    #[error("implementation test vector failed before timing: {0}")]
    VectorGateFailed(String),
    #[error("invalid benchmark config: {0}")]
    InvalidConfig(&'static str),
    #[error("per-cell correctness check failed for {alg} at {size} octets")]
    CellCheckFailed { alg: &'static str, size: usize },
    #[error("malformed CSV: {0}")]
    CsvParse(String),
}

const MAC_LEN: usize = 8;
const BENCH_KEY: [u8; 16] = [
    0x00, 0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08, 0x09, 0x0A, 0x0B, 0x0C, 0x0D, 0x0E, 0x0F,
];

fn mac_compute(alg: BenchAlg, digest_then_mac: bool, data: &[u8], out: &mut [u8; MAC_LEN]) {
    let tag = match alg {
        BenchAlg::HmacSha256 | BenchAlg::HmacSha384 | BenchAlg::HmacSha3_512 => {
            let hash_alg = match alg {
                BenchAlg::HmacSha256 => HashAlg::Sha256,
                BenchAlg::HmacSha384 => HashAlg::Sha384,
                _ => HashAlg::Sha3_512,
            };
            if digest_then_mac {
                let digest = crypto::hash(hash_alg, data);
                crypto::hmac(hash_alg, &BENCH_KEY, &digest)
            } else {
                crypto::hmac(hash_alg, &BENCH_KEY, data)
            }
        }
        BenchAlg::AesCmac => crypto::aes_cmac(&BENCH_KEY, data)
            .expect("fixed benchmark key is valid")
            .to_vec(),
        BenchAlg::Snow3g => {
            crypto::snow3g_mac(&BENCH_KEY, 0, 0, data, MAC_LEN).expect("fixed MAC length is valid")
        }
    };
    out.copy_from_slice(&tag[..MAC_LEN]);
}

fn time_loop<F: FnMut()>(iterations: usize, warmup: usize, mut f: F) -> Vec<f64> {
    for _ in 0..warmup {
        f();
    }
    let mut samples = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let start = Instant::now();
        f();
        samples.push(start.elapsed().as_secs_f64() * 1e6);
    }
    samples
}

/// Linear-interpolation percentile over a sorted sample (inclusive method).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

fn summarize(mut samples: Vec<f64>) -> (f64, f64, f64) {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
    (
        percentile(&samples, 50.0),
        percentile(&samples, 10.0),
        percentile(&samples, 90.0),
    )
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..rx.len() {
        let dx = rx[i] - mx;
        let dy = ry[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Runs the full grid. Every requested implementation must pass its
/// specification vectors first; each cell re-checks round-trip correctness
/// (and single-bit-flip rejection) outside the timed region.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    cfg.validate()?;
    crypto::self_test::run().map_err(|e| BenchError::VectorGateFailed(e.vector.to_string()))?;

    let radio_us = cfg.radio_ms * 1000.0;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.algorithms.len() * cfg.packet_sizes.len() * 3);

    let mut algorithms = cfg.algorithms.clone();
    algorithms.sort();
    algorithms.dedup();

    for &size in &cfg.packet_sizes {
        let mut payload = vec![0u8; size];
        rng.fill_bytes(&mut payload);
        let iv = crypto::ctr_iv(1, 0);

        for &alg in &algorithms {
            // buffers live outside the timed region
            let mut scratch = vec![0u8; size];
            let mut tag = [0u8; MAC_LEN];

            // correctness gate for this cell: protect, verify, and reject a
            // single flipped bit
            scratch.copy_from_slice(&payload);
            crypto::aes_ctr_in_place(&BENCH_KEY, &iv, &mut scratch).expect("valid key and IV");
            mac_compute(alg, cfg.digest_then_mac, &scratch, &mut tag);
            let mut check = [0u8; MAC_LEN];
            mac_compute(alg, cfg.digest_then_mac, &scratch, &mut check);
            let clean_ok = ct_eq(&tag, &check);
            scratch[size / 2] ^= 0x01;
            mac_compute(alg, cfg.digest_then_mac, &scratch, &mut check);
            let flipped_rejected = !ct_eq(&tag, &check);
            scratch[size / 2] ^= 0x01;
            let mut decrypted = scratch.clone();
            crypto::aes_ctr_in_place(&BENCH_KEY, &iv, &mut decrypted).expect("valid key and IV");
            if !(clean_ok && flipped_rejected && decrypted == payload) {
                return Err(BenchError::CellCheckFailed {
                    alg: alg.label(),
                    size,
                });
            }

            let sender_samples = time_loop(cfg.iterations, cfg.warmup, || {
                scratch.copy_from_slice(std::hint::black_box(&payload));
                crypto::aes_ctr_in_place(&BENCH_KEY, &iv, &mut scratch).expect("valid key and IV");
                mac_compute(alg, cfg.digest_then_mac, &scratch, &mut tag);
                std::hint::black_box(&tag);
            });

            // sender state for the receiver loop: scratch holds the
            // ciphertext, tag its MAC
            scratch.copy_from_slice(&payload);
            crypto::aes_ctr_in_place(&BENCH_KEY, &iv, &mut scratch).expect("valid key and IV");
            mac_compute(alg, cfg.digest_then_mac, &scratch, &mut tag);
            let ciphertext = scratch.clone();
            let mut plain = vec![0u8; size];
            let mut verify_tag = [0u8; MAC_LEN];

            let receiver_samples = time_loop(cfg.iterations, cfg.warmup, || {
                mac_compute(
                    alg,
                    cfg.digest_then_mac,
                    std::hint::black_box(&ciphertext),
                    &mut verify_tag,
                );
                let ok = ct_eq(&verify_tag, &tag);
                plain.copy_from_slice(&ciphertext);
                crypto::aes_ctr_in_place(&BENCH_KEY, &iv, &mut plain).expect("valid key and IV");
                std::hint::black_box((ok, &plain));
            });

            let (s_med, s_p10, s_p90) = summarize(sender_samples);
            let (r_med, r_p10, r_p90) = summarize(receiver_samples);
            records.push(BenchRecord {
                algorithm: alg,
                packet_size: size,
                phase: Phase::SenderProtect,
                median_us: s_med,
                p10_us: s_p10,
                p90_us: s_p90,
                iters: cfg.iterations,
            });
            records.push(BenchRecord {
                algorithm: alg,
                packet_size: size,
                phase: Phase::ReceiverVerify,
                median_us: r_med,
                p10_us: r_p10,
                p90_us: r_p90,
                iters: cfg.iterations,
            });
            // the model identity: end-to-end is defined as the exact sum of
            // the two measured legs plus the radio interval, per statistic
            records.push(BenchRecord {
                algorithm: alg,
                packet_size: size,
                phase: Phase::EndToEndModel,
                median_us: s_med + r_med + radio_us,
                p10_us: s_p10 + r_p10 + radio_us,
                p90_us: s_p90 + r_p90 + radio_us,
                iters: cfg.iterations,
            });
        }
    }
    records.sort_by(|a, b| {
        (a.algorithm, a.packet_size, a.phase).cmp(&(b.algorithm, b.packet_size, b.phase))
    });
    Ok(records)
}

pub const CSV_HEADER: &str = "algorithm,packet_size,phase,median_us,p10_us,p90_us,iters";

/// Renders records as CSV, sorted by (algorithm, size, phase), decimal
/// points always `.` regardless of locale.
pub fn emit_csv(records: &[BenchRecord]) -> String {
    let mut rows = records.to_vec();
    rows.sort_by(|a, b| {
        (a.algorithm, a.packet_size, a.phase).cmp(&(b.algorithm, b.packet_size, b.phase))
    });
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.3},{:.3},{:.3},{}\n",
            r.algorithm.label(),
            r.packet_size,
            r.phase.label(),
            r.median_us,
            r.p10_us,
            r.p90_us,
            r.iters
        ));
    }
    out
}

/// Parses `emit_csv` output back to records (used by round-trip tests and
/// downstream tooling).
pub fn parse_csv(text: &str) -> Result<Vec<BenchRecord>, BenchError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| BenchError::CsvParse("empty input".into()))?;
    if header != CSV_HEADER {
        return Err(BenchError::CsvParse(format!(
            "unexpected header {header:?}"
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(BenchError::CsvParse(format!("row {i}: expected 7 fields")));
        }
        let algorithm: BenchAlg = fields[0]
            .parse()
            .map_err(|e| BenchError::CsvParse(format!("row {i}: {e}")))?;
        let phase = Phase::from_label(fields[2])
            .ok_or_else(|| BenchError::CsvParse(format!("row {i}: bad phase {:?}", fields[2])))?;
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| BenchError::CsvParse(format!("row {i}: {e}")))
        };
        records.push(BenchRecord {
            algorithm,
            packet_size: fields[1]
                .parse()
                .map_err(|e| BenchError::CsvParse(format!("row {i}: {e}")))?,
            phase,
            median_us: num(fields[3])?,
            p10_us: num(fields[4])?,
            p90_us: num(fields[5])?,
            iters: fields[6]
                .parse()
                .map_err(|e| BenchError::CsvParse(format!("row {i}: {e}")))?,
        });
    }
    Ok(records)
}

/// Convenience view: medians of one algorithm/phase across sizes, in size
/// order.
pub fn curve(records: &[BenchRecord], alg: BenchAlg, phase: Phase) -> Vec<(usize, f64)> {
    let mut points: Vec<(usize, f64)> = records
        .iter()
        .filter(|r| r.algorithm == alg && r.phase == phase)
        .map(|r| (r.packet_size, r.median_us))
        .collect();
    points.sort_by_key(|p| p.0);
    points
}
