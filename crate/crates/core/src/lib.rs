//! Protocol-agnostic covert channel pattern toolkit.
//!
//! The crate models overt carriers as schema-typed PDU streams and provides,
//! on top of them:
//!
//! - a machine-readable catalog of the hiding patterns with their hierarchy,
//!   categorization and per-pattern technique counts ([`catalog`]),
//! - embed/extract codecs for all fifteen patterns ([`codecs`]),
//! - per-protocol settings so a pattern retargets to a different carrier by
//!   configuration alone ([`variation`]),
//! - parallel/sequential pattern combination and keyed pattern hopping
//!   ([`orchestration`]),
//! - a simulated lossy channel and experiment pipeline ([`channel`],
//!   [`experiment`]),
//! - traffic normalization and statistical timing detectors
//!   ([`countermeasures`]).
//!
//! Everything is a pure function of its inputs plus explicit seeds; streams
//! and configs are immutable values that can be shared freely across
//! threads.

pub mod bits;
pub mod catalog;
pub mod channel;
pub mod codecs;
pub mod countermeasures;
pub mod error;
pub mod experiment;
pub mod orchestration;
pub mod protocol;
pub mod variation;

pub use bits::Bits;
pub use error::{Error, Result};

#[cfg(test)]
mod tests {
    fn shareable<T: Send + Sync>() {}

    #[test]
    fn core_values_are_send_and_sync() {
        shareable::<crate::protocol::PduStream>();
        shareable::<crate::protocol::ProtocolSchema>();
        shareable::<crate::variation::SettingsCatalog>();
        shareable::<crate::orchestration::HoppingConfig>();
        shareable::<crate::countermeasures::WardenConfig>();
        shareable::<crate::codecs::CovertMessage>();
    }
}
