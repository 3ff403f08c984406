//! Machine-readable hiding-pattern catalog.
//!
//! Fifteen descriptors: eleven primary patterns plus the four child
//! patterns (Position and Number of Elements under Sequence, Case and LSB
//! under Value Modulation). Each descriptor carries the pattern's position
//! in the hierarchy, its semantic/syntax/noise categorization with the
//! qualifying table notes, and the number of surveyed techniques associated
//! with it.

mod data;
mod export;

pub use export::{export_catalog, import_catalog, ExportFormat};

/// Identity of a hiding pattern. The numbering is stable and the four
/// child patterns hang under their parents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatternId {
    P1Size,
    P2Sequence,
    P2aPosition,
    P2bNumElements,
    P3AddRedundancy,
    P4CorruptionLoss,
    P5RandomValue,
    P6ValueModulation,
    P6aCase,
    P6bLsb,
    P7ReservedUnused,
    P8InterArrivalTime,
    P9Rate,
    P10PduOrder,
    P11Retransmission,
}

pub const ALL_PATTERNS: [PatternId; 15] = [
    PatternId::P1Size,
    PatternId::P2Sequence,
    PatternId::P2aPosition,
    PatternId::P2bNumElements,
    PatternId::P3AddRedundancy,
    PatternId::P4CorruptionLoss,
    PatternId::P5RandomValue,
    PatternId::P6ValueModulation,
    PatternId::P6aCase,
    PatternId::P6bLsb,
    PatternId::P7ReservedUnused,
    PatternId::P8InterArrivalTime,
    PatternId::P9Rate,
    PatternId::P10PduOrder,
    PatternId::P11Retransmission,
];

impl PatternId {
    /// Catalog code, e.g. `P2.a`.
    pub fn code(self) -> &'static str {
        match self {
            PatternId::P1Size => "P1",
            PatternId::P2Sequence => "P2",
            PatternId::P2aPosition => "P2.a",
            PatternId::P2bNumElements => "P2.b",
            PatternId::P3AddRedundancy => "P3",
            PatternId::P4CorruptionLoss => "P4",
            PatternId::P5RandomValue => "P5",
            PatternId::P6ValueModulation => "P6",
            PatternId::P6aCase => "P6.a",
            PatternId::P6bLsb => "P6.b",
            PatternId::P7ReservedUnused => "P7",
            PatternId::P8InterArrivalTime => "P8",
            PatternId::P9Rate => "P9",
            PatternId::P10PduOrder => "P10",
            PatternId::P11Retransmission => "P11",
        }
    }

    /// Accepts `P2.a`, `P2a`, `p2A`.
    pub fn parse(s: &str) -> Option<PatternId> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '.')
            .collect::<String>()
            .to_ascii_uppercase();
        ALL_PATTERNS
            .iter()
            .copied()
            .find(|p| p.code().replace('.', "").to_ascii_uppercase() == norm)
    }

    pub fn parent(self) -> Option<PatternId> {
        match self {
            PatternId::P2aPosition | PatternId::P2bNumElements => Some(PatternId::P2Sequence),
            PatternId::P6aCase | PatternId::P6bLsb => Some(PatternId::P6ValueModulation),
            _ => None,
        }
    }

    pub fn children(self) -> Vec<PatternId> {
        ALL_PATTERNS
            .iter()
            .copied()
            .filter(|p| p.parent() == Some(self))
            .collect()
    }

    /// The eleven primary patterns (children excluded).
    pub fn primaries() -> Vec<PatternId> {
        ALL_PATTERNS
            .iter()
            .copied()
            .filter(|p| p.parent().is_none())
            .collect()
    }

    pub fn is_timing(self) -> bool {
        matches!(
            self,
            PatternId::P8InterArrivalTime
                | PatternId::P9Rate
                | PatternId::P10PduOrder
                | PatternId::P11Retransmission
        )
    }
}

impl std::fmt::Display for PatternId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Semantic {
    Preserving,
    Modifying,
    /// Marked in both columns, or marked as neither; the footnote explains.
    Conditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Syntax {
    Preserving,
    Modifying,
    /// Timing patterns have no PDU structure to modify.
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    Noisy,
    Noiseless,
    Conditional,
}

impl Semantic {
    pub fn name(self) -> &'static str {
        match self {
            Semantic::Preserving => "preserving",
            Semantic::Modifying => "modifying",
            Semantic::Conditional => "conditional",
        }
    }
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "preserving" => Semantic::Preserving,
            "modifying" => Semantic::Modifying,
            "conditional" => Semantic::Conditional,
            _ => return None,
        })
    }
}

impl Syntax {
    pub fn name(self) -> &'static str {
        match self {
            Syntax::Preserving => "preserving",
            Syntax::Modifying => "modifying",
            Syntax::NotApplicable => "n/a",
        }
    }
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "preserving" => Syntax::Preserving,
            "modifying" => Syntax::Modifying,
            "n/a" => Syntax::NotApplicable,
            _ => return None,
        })
    }
}

impl Noise {
    pub fn name(self) -> &'static str {
        match self {
            Noise::Noisy => "noisy",
            Noise::Noiseless => "noiseless",
            Noise::Conditional => "conditional",
        }
    }
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "noisy" => Noise::Noisy,
            "noiseless" => Noise::Noiseless,
            "conditional" => Noise::Conditional,
            _ => return None,
        })
    }
}

/// One catalog record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternDescriptor {
    pub id: PatternId,
    pub name: String,
    pub alias: Option<String>,
    /// Hierarchy labels from the root category down to the pattern's
    /// immediate parent.
    pub context_path: Vec<String>,
    pub semantic: Semantic,
    pub syntax: Syntax,
    pub noise: Noise,
    /// Number of surveyed techniques associated with the pattern. The
    /// counts for the four dominant patterns are survey-reported figures;
    /// the remaining counts are reconstructions from the per-pattern
    /// evidence listings (uncited proposals excluded, multi-reference items
    /// counted once) and should be read as estimates.
    pub evidence_count: u32,
    /// Qualifying notes, keyed `a:`..`f:`, restating the categorization
    /// table's footnotes.
    pub footnotes: Vec<String>,
}

/// Returns all fifteen descriptors in catalog order.
pub fn load_catalog() -> Vec<PatternDescriptor> {
    data::descriptors()
}

pub fn descriptor(id: PatternId) -> PatternDescriptor {
    data::descriptors()
        .into_iter()
        .find(|d| d.id == id)
        .expect("catalog covers every pattern id")
}

/// Aggregate catalog statistics. Child counts fold into their parents for
/// the top-four computation.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogStats {
    pub total_techniques: u32,
    pub pattern_count: u32,
    pub top4_techniques: u32,
    pub top4_coverage_fraction: f64,
    /// All fifteen per-pattern counts, catalog order.
    pub per_pattern_counts: Vec<(PatternId, u32)>,
    /// The four dominant patterns with children folded in, descending.
    pub top4: Vec<(PatternId, u32)>,
}

pub fn catalog_stats() -> CatalogStats {
    let descriptors = load_catalog();
    let per_pattern_counts: Vec<(PatternId, u32)> = descriptors
        .iter()
        .map(|d| (d.id, d.evidence_count))
        .collect();
    let total: u32 = per_pattern_counts.iter().map(|(_, c)| c).sum();

    let mut folded: Vec<(PatternId, u32)> = PatternId::primaries()
        .into_iter()
        .map(|p| {
            let own = descriptors
                .iter()
                .filter(|d| d.id == p || d.id.parent() == Some(p))
                .map(|d| d.evidence_count)
                .sum();
            (p, own)
        })
        .collect();
    folded.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let top4: Vec<(PatternId, u32)> = folded.into_iter().take(4).collect();
    let top4_sum: u32 = top4.iter().map(|(_, c)| c).sum();

    CatalogStats {
        total_techniques: total,
        pattern_count: PatternId::primaries().len() as u32,
        top4_techniques: top4_sum,
        top4_coverage_fraction: top4_sum as f64 / total as f64,
        per_pattern_counts,
        top4,
    }
}

impl CatalogStats {
    /// One-line summary used by the CLI.
    pub fn headline(&self) -> String {
        format!(
            "patterns: {}, techniques: {}, top4: {:.1}%",
            self.pattern_count,
            self.total_techniques,
            self.top4_coverage_fraction * 100.0
        )
    }
}
