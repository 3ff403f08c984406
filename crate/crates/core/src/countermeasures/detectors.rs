//! Statistical timing detectors: compressibility of the rounded
//! inter-arrival-time string, epsilon-similarity of sorted neighbor gaps,
//! and entropy over calibrated equal-probability bins.
//!
//! Two-symbol covert gap streams compress far better, cluster far tighter
//! and occupy far fewer bins than application traffic; thresholds are
//! calibration outputs from an overt baseline, not built-in constants.

use crate::error::{Error, Result};
use flate2::{write::ZlibEncoder, Compression};
use std::io::Write;

pub const MIN_COMPRESSIBILITY_SAMPLES: usize = 32;

/// Rounds gaps to a grid, maps distinct values to symbols and compresses
/// the symbol string with a dictionary coder. The score is the ratio of
/// uncompressed to compressed length: higher means more regular, so more
/// suspicious.
pub fn detect_compressibility(iats: &[u64], rounding_us: u64) -> Result<f64> {
    if iats.len() < MIN_COMPRESSIBILITY_SAMPLES {
        return Err(Error::config(format!(
            "compressibility needs at least {MIN_COMPRESSIBILITY_SAMPLES} gaps, got {}",
            iats.len()
        )));
    }
    let grid = rounding_us.max(1);
    let mut symbols: Vec<u16> = Vec::with_capacity(iats.len());
    let mut dictionary: Vec<u64> = Vec::new();
    for &g in iats {
        let rounded = (g + grid / 2) / grid;
        let sym = match dictionary.iter().position(|&d| d == rounded) {
            Some(i) => i,
            None => {
                dictionary.push(rounded);
                dictionary.len() - 1
            }
        };
        symbols.push(sym as u16);
    }
    let raw: Vec<u8> = symbols.iter().flat_map(|s| s.to_be_bytes()).collect();
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::new(6));
    enc.write_all(&raw)?;
    let compressed = enc.finish()?;
    Ok(raw.len() as f64 / compressed.len() as f64)
}

/// Sorts the gaps and returns the fraction of adjacent pairs whose
/// relative difference of each sorted neighbor pair falls below epsilon.
pub fn detect_epsilon_similarity(iats: &[u64], epsilon: f64) -> Result<f64> {
    if iats.len() < 2 {
        return Err(Error::config("epsilon-similarity needs at least two gaps"));
    }
    if epsilon <= 0.0 {
        return Err(Error::config("epsilon must be positive"));
    }
    if iats.contains(&0) {
        return Err(Error::config(
            "zero-valued gap: relative difference undefined",
        ));
    }
    let mut sorted = iats.to_vec();
    sorted.sort_unstable();
    let below = sorted
        .windows(2)
        .filter(|w| ((w[1] - w[0]) as f64 / w[0] as f64) < epsilon)
        .count();
    Ok(below as f64 / (sorted.len() - 1) as f64)
}

/// Equal-probability bin edges calibrated on an overt reference corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyBins {
    /// Upper edges of all bins but the last (which is open-ended).
    pub edges: Vec<u64>,
}

impl EntropyBins {
    /// Quantile edges over the reference gaps. Errors when the reference
    /// is degenerate (all gaps equal) and cannot define bins.
    pub fn calibrate(reference: &[u64], bins: usize) -> Result<EntropyBins> {
        if bins < 2 {
            return Err(Error::config("need at least two bins"));
        }
        if reference.len() < bins {
            return Err(Error::config(format!(
                "need at least {bins} reference gaps, got {}",
                reference.len()
            )));
        }
        let mut sorted = reference.to_vec();
        sorted.sort_unstable();
        if sorted.first() == sorted.last() {
            return Err(Error::config(
                "degenerate calibration: all reference gaps equal",
            ));
        }
        let mut edges = Vec::with_capacity(bins - 1);
        for b in 1..bins {
            let idx = b * sorted.len() / bins;
            edges.push(sorted[idx.min(sorted.len() - 1)]);
        }
        Ok(EntropyBins { edges })
    }

    pub fn bins(&self) -> usize {
        self.edges.len() + 1
    }

    fn bin_of(&self, gap: u64) -> usize {
        self.edges.partition_point(|&e| e <= gap)
    }
}

/// Empirical Shannon entropy (bits) of bin occupancy.
pub fn detect_iat_entropy(iats: &[u64], bins: &EntropyBins) -> Result<f64> {
    if iats.len() < bins.bins() {
        return Err(Error::config(format!(
            "entropy over {} bins needs at least that many gaps, got {}",
            bins.bins(),
            iats.len()
        )));
    }
    let mut counts = vec![0usize; bins.bins()];
    for &g in iats {
        counts[bins.bin_of(g)] += 1;
    }
    let n = iats.len() as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum())
}

/// Calibration bundle produced from an overt baseline; verdict margins are
/// derived from the baseline scores rather than built-in accuracy claims.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorThresholds {
    pub rounding_us: u64,
    pub epsilon: f64,
    pub bins: EntropyBins,
    pub compressibility_baseline: f64,
    pub epsilon_similarity_baseline: f64,
    pub iat_entropy_baseline: f64,
}

impl DetectorThresholds {
    pub fn calibrate(
        reference: &[u64],
        bins: usize,
        rounding_us: u64,
        epsilon: f64,
    ) -> Result<DetectorThresholds> {
        let edges = EntropyBins::calibrate(reference, bins)?;
        Ok(DetectorThresholds {
            rounding_us,
            epsilon,
            compressibility_baseline: detect_compressibility(reference, rounding_us)?,
            epsilon_similarity_baseline: detect_epsilon_similarity(reference, epsilon)?,
            iat_entropy_baseline: detect_iat_entropy(reference, &edges)?,
            bins: edges,
        })
    }
}

/// One detector's score and verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorFinding {
    pub score: f64,
    pub suspicious: bool,
}

/// Per-flow detector results. A finding is present iff its detector could
/// run on the flow (enough gaps, no undefined values).
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorReport {
    pub flow: String,
    pub compressibility: Option<DetectorFinding>,
    pub epsilon_similarity: Option<DetectorFinding>,
    pub iat_entropy: Option<DetectorFinding>,
}

impl DetectorReport {
    pub fn any_suspicious(&self) -> bool {
        [
            &self.compressibility,
            &self.epsilon_similarity,
            &self.iat_entropy,
        ]
        .into_iter()
        .flatten()
        .any(|f| f.suspicious)
    }
}

/// Scores one flow against calibrated thresholds. A flow looks suspicious
/// when it compresses markedly better than the baseline, clusters tighter,
/// or occupies far fewer bins.
pub fn score_flow(flow: &str, iats: &[u64], thresholds: &DetectorThresholds) -> DetectorReport {
    let compressibility = detect_compressibility(iats, thresholds.rounding_us)
        .ok()
        .map(|score| DetectorFinding {
            score,
            suspicious: score > thresholds.compressibility_baseline * 1.2,
        });
    let epsilon_similarity = detect_epsilon_similarity(iats, thresholds.epsilon)
        .ok()
        .map(|score| DetectorFinding {
            score,
            suspicious: score > (thresholds.epsilon_similarity_baseline + 0.03).min(1.0),
        });
    let iat_entropy = detect_iat_entropy(iats, &thresholds.bins)
        .ok()
        .map(|score| DetectorFinding {
            score,
            suspicious: score < thresholds.iat_entropy_baseline * 0.5,
        });
    DetectorReport {
        flow: flow.to_string(),
        compressibility,
        epsilon_similarity,
        iat_entropy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exponential_gaps(n: usize, mean: f64, seed: u64) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                ((-mean * (1.0 - u).ln()).round() as u64).max(1)
            })
            .collect()
    }

    #[test]
    fn constant_gaps_compress_better_than_exponential() {
        let constant = vec![2000u64; 1000];
        let exp = exponential_gaps(1000, 5000.0, 1);
        let c = detect_compressibility(&constant, 100).unwrap();
        let e = detect_compressibility(&exp, 100).unwrap();
        assert!(c > e, "constant {c} vs exponential {e}");
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(detect_compressibility(&[1000; 31], 100).is_err());
    }

    #[test]
    fn equal_gaps_are_fully_epsilon_similar() {
        let gaps = vec![1234u64; 50];
        assert_eq!(detect_epsilon_similarity(&gaps, 0.01).unwrap(), 1.0);
    }

    #[test]
    fn wide_pair_is_not_similar() {
        // Relative difference (2000-1000)/1000 = 1.0 >= 0.5.
        assert_eq!(detect_epsilon_similarity(&[1000, 2000], 0.5).unwrap(), 0.0);
    }

    #[test]
    fn zero_gap_is_an_error() {
        assert!(detect_epsilon_similarity(&[0, 10], 0.1).is_err());
    }

    #[test]
    fn uniform_occupancy_hits_log2_bins() {
        // Reference 1..=800 calibrates 8 equal bins; feeding the same data
        // back occupies them uniformly.
        let reference: Vec<u64> = (1..=800).collect();
        let bins = EntropyBins::calibrate(&reference, 8).unwrap();
        let h = detect_iat_entropy(&reference, &bins).unwrap();
        assert!((h - 3.0).abs() < 0.01, "entropy {h}");
    }

    #[test]
    fn single_bin_occupancy_is_zero_entropy() {
        let reference: Vec<u64> = (1..=800).collect();
        let bins = EntropyBins::calibrate(&reference, 8).unwrap();
        let h = detect_iat_entropy(&[5u64; 100], &bins).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn degenerate_calibration_rejected() {
        assert!(EntropyBins::calibrate(&[7u64; 100], 8).is_err());
    }

    #[test]
    fn two_symbol_stream_scores_low_entropy() {
        let reference = exponential_gaps(2000, 5000.0, 2);
        let bins = EntropyBins::calibrate(&reference, 16).unwrap();
        let covert: Vec<u64> = (0..1000)
            .map(|i| if i % 3 == 0 { 2000 } else { 6000 })
            .collect();
        let h = detect_iat_entropy(&covert, &bins).unwrap();
        assert!(h <= 1.1, "covert entropy {h}");
        let overt = detect_iat_entropy(&reference, &bins).unwrap();
        assert!(overt >= 2.5, "overt entropy {overt}");
    }

    #[test]
    fn flow_reports_flag_covert_and_pass_overt() {
        let reference = exponential_gaps(2000, 5000.0, 4);
        let thresholds = DetectorThresholds::calibrate(&reference, 16, 100, 0.02).unwrap();
        let overt = exponential_gaps(1000, 5000.0, 5);
        let clean = score_flow("overt", &overt, &thresholds);
        assert!(clean.iat_entropy.is_some());
        assert!(!clean.iat_entropy.as_ref().unwrap().suspicious);
        let covert: Vec<u64> = (0..1000)
            .map(|i| if i % 2 == 0 { 2000 } else { 6000 })
            .collect();
        let report = score_flow("covert", &covert, &thresholds);
        assert!(report.any_suspicious());
        assert!(report.compressibility.as_ref().unwrap().suspicious);
        assert!(report.iat_entropy.as_ref().unwrap().suspicious);
    }

    #[test]
    fn findings_absent_when_a_detector_cannot_run() {
        let reference = exponential_gaps(2000, 5000.0, 6);
        let thresholds = DetectorThresholds::calibrate(&reference, 16, 100, 0.02).unwrap();
        // Too few gaps for compressibility or 16-bin entropy.
        let short = vec![1000u64, 2000, 3000];
        let report = score_flow("short", &short, &thresholds);
        assert!(report.compressibility.is_none());
        assert!(report.iat_entropy.is_none());
        assert!(report.epsilon_similarity.is_some());
    }
}
