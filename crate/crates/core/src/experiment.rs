//! End-to-end experiment pipeline: embed, transmit, optionally normalize,
//! extract, score. The report renders as structured text with a fixed key
//! order so identical runs produce byte-identical files.

use crate::channel::{transmit, ChannelConfig};
use crate::codecs::CovertMessage;
use crate::countermeasures::detectors::{
    detect_compressibility, detect_epsilon_similarity, detect_iat_entropy, EntropyBins,
    MIN_COMPRESSIBILITY_SAMPLES,
};
use crate::countermeasures::{normalize, WardenConfig};
use crate::error::Result;
use crate::orchestration::EmbeddingSpec;
use crate::protocol::PduStream;

/// A fully resolved experiment, ready to run.
pub struct Experiment {
    pub embedding: EmbeddingSpec,
    /// Extraction config when the receiver differs from the sender, e.g.
    /// a hopping receiver holding the wrong key. Defaults to `embedding`.
    pub receiver: Option<EmbeddingSpec>,
    pub message: CovertMessage,
    pub carrier: PduStream,
    pub channel: ChannelConfig,
    pub warden: Option<WardenConfig>,
}

/// Detector scores for one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorScores {
    pub compressibility: f64,
    pub epsilon_similarity: f64,
    pub iat_entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub schema: String,
    pub embedding: String,
    pub carrier_pdus: usize,
    pub message_bits: usize,
    pub bits_embedded: usize,
    pub delivered_pdus: usize,
    pub bits_extracted: usize,
    pub bits_compared: usize,
    pub bit_errors: usize,
    pub ber: f64,
    pub warden_actions: Vec<String>,
    /// (overt carrier, post-channel stream) scores, present when both
    /// streams have enough gaps for the detectors.
    pub detectors: Option<(DetectorScores, DetectorScores)>,
}

/// Default detector parameters used by reports: a 100 us rounding grid,
/// epsilon 0.02 and 16 calibrated bins.
pub const REPORT_ROUNDING_US: u64 = 100;
pub const REPORT_EPSILON: f64 = 0.02;
pub const REPORT_BINS: usize = 16;

fn score_stream(iats: &[u64], bins: &EntropyBins) -> Result<DetectorScores> {
    Ok(DetectorScores {
        compressibility: detect_compressibility(iats, REPORT_ROUNDING_US)?,
        epsilon_similarity: detect_epsilon_similarity(iats, REPORT_EPSILON)?,
        iat_entropy: detect_iat_entropy(iats, bins)?,
    })
}

/// Runs the pipeline. BER is the Hamming distance between the embedded
/// prefix and the extracted prefix over the bits compared; the exit status
/// reports completion, not covertness.
pub fn run_experiment(x: &Experiment) -> Result<ExperimentReport> {
    let embedded = x.embedding.embed(&x.message, &x.carrier)?;
    let transmitted = transmit(&x.channel, &embedded.stream)?;
    let (observed, warden_actions) = match &x.warden {
        Some(config) => {
            let (stream, log) = normalize(config, &transmitted)?;
            (stream, log.entries)
        }
        None => (transmitted, Vec::new()),
    };
    let extracted = x
        .receiver
        .as_ref()
        .unwrap_or(&x.embedding)
        .extract(&observed)?;
    let sent_prefix = x.message.bits.prefix(embedded.bits_embedded);
    let (bit_errors, bits_compared) = extracted.bits.hamming_prefix(&sent_prefix);
    let ber = if bits_compared == 0 {
        0.0
    } else {
        bit_errors as f64 / bits_compared as f64
    };

    let overt_iats = x.carrier.iats();
    let covert_iats = observed.iats();
    let detectors = if overt_iats.len() >= MIN_COMPRESSIBILITY_SAMPLES.max(REPORT_BINS)
        && covert_iats.len() >= MIN_COMPRESSIBILITY_SAMPLES.max(REPORT_BINS)
        && !overt_iats.contains(&0)
        && !covert_iats.contains(&0)
    {
        match EntropyBins::calibrate(&overt_iats, REPORT_BINS) {
            Ok(bins) => {
                let overt = score_stream(&overt_iats, &bins)?;
                let covert = score_stream(&covert_iats, &bins)?;
                Some((overt, covert))
            }
            Err(_) => None,
        }
    } else {
        None
    };

    Ok(ExperimentReport {
        schema: x.carrier.schema.name.clone(),
        embedding: x.embedding.describe(),
        carrier_pdus: x.carrier.len(),
        message_bits: x.message.len(),
        bits_embedded: embedded.bits_embedded,
        delivered_pdus: observed.len(),
        bits_extracted: extracted.len(),
        bits_compared,
        bit_errors,
        ber,
        warden_actions,
        detectors,
    })
}

/// Outcome of the acknowledged-slot hopping harness.
#[derive(Debug, Clone, PartialEq)]
pub struct AckHoppingOutcome {
    /// BER when the schedule runs blindly over the lossy channel: a lost
    /// slot desynchronizes everything after it.
    pub naive_ber: f64,
    /// BER when both sides skip unacknowledged slots.
    pub acknowledged_ber: f64,
    pub lost_pdus: usize,
}

/// Runs a hopping schedule over a lossy channel twice: once blind, once in
/// acknowledged-slot mode where the sender only schedules slots the
/// receiver acknowledged, so both ends skip lost slots together. The ack
/// loop is simulated by drawing the loss pattern first; it stands in for a
/// covert-channel-internal reliability protocol without modeling one.
pub fn run_acknowledged_hopping(
    config: &crate::orchestration::HoppingConfig,
    message: &CovertMessage,
    carrier: &PduStream,
    channel: &ChannelConfig,
) -> Result<AckHoppingOutcome> {
    use crate::orchestration::{hop_embed, hop_extract};

    // Blind run: embed into every slot, lose PDUs in transit.
    let (embedded, _) = hop_embed(config, message, carrier)?;
    let delivered = transmit(channel, &embedded.stream)?;
    let (naive, _) = hop_extract(config, &delivered)?;
    let want = message.bits.prefix(embedded.bits_embedded);
    let (errors, compared) = naive.bits.hamming_prefix(&want);
    let naive_ber = if compared == 0 {
        1.0
    } else {
        errors as f64 / compared as f64
    };

    // Acknowledged run: the same channel draw decides which carrier PDUs
    // are acknowledged; both sides enumerate slots over those only.
    let surviving = transmit(channel, carrier)?;
    let acked: std::collections::BTreeSet<u64> = surviving.pdus.iter().map(|p| p.seq).collect();
    let acked_carrier = PduStream {
        schema: carrier.schema.clone(),
        pdus: carrier
            .pdus
            .iter()
            .filter(|p| acked.contains(&p.seq))
            .cloned()
            .collect(),
    };
    let lost_pdus = carrier.len() - acked_carrier.len();
    let (embedded, _) = hop_embed(config, message, &acked_carrier)?;
    let (back, _) = hop_extract(config, &embedded.stream)?;
    let want = message.bits.prefix(embedded.bits_embedded);
    let (errors, compared) = back.bits.hamming_prefix(&want);
    let acknowledged_ber = if compared == 0 {
        1.0
    } else {
        errors as f64 / compared as f64
    };

    Ok(AckHoppingOutcome {
        naive_ber,
        acknowledged_ber,
        lost_pdus,
    })
}

impl ExperimentReport {
    /// Stable-key-order text rendering for CI diffing.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("report-version: 1\n");
        out.push_str(&format!("schema: {}\n", self.schema));
        out.push_str(&format!("embedding: {}\n", self.embedding));
        out.push_str(&format!("carrier-pdus: {}\n", self.carrier_pdus));
        out.push_str(&format!("message-bits: {}\n", self.message_bits));
        out.push_str(&format!("bits-embedded: {}\n", self.bits_embedded));
        out.push_str(&format!("delivered-pdus: {}\n", self.delivered_pdus));
        out.push_str(&format!("bits-extracted: {}\n", self.bits_extracted));
        out.push_str(&format!("bits-compared: {}\n", self.bits_compared));
        out.push_str(&format!("bit-errors: {}\n", self.bit_errors));
        out.push_str(&format!("ber: {:.6}\n", self.ber));
        if let Some((overt, covert)) = &self.detectors {
            out.push_str(&format!(
                "detector-compressibility-overt: {:.6}\n",
                overt.compressibility
            ));
            out.push_str(&format!(
                "detector-compressibility-covert: {:.6}\n",
                covert.compressibility
            ));
            out.push_str(&format!(
                "detector-epsilon-similarity-overt: {:.6}\n",
                overt.epsilon_similarity
            ));
            out.push_str(&format!(
                "detector-epsilon-similarity-covert: {:.6}\n",
                covert.epsilon_similarity
            ));
            out.push_str(&format!(
                "detector-iat-entropy-overt: {:.6}\n",
                overt.iat_entropy
            ));
            out.push_str(&format!(
                "detector-iat-entropy-covert: {:.6}\n",
                covert.iat_entropy
            ));
        }
        out.push_str(&format!("warden-actions: {}\n", self.warden_actions.len()));
        for a in &self.warden_actions {
            out.push_str(&format!("  action: {a}\n"));
        }
        out
    }
}
