//! Lossless constant-rate UAV-to-ground link.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("data rate must be positive and finite, got {0} bit/s")]
    DataRate(f64),
    #[error("transmission time limit must be positive and finite, got {0} s")]
    TimeLimit(f64),
}

/// Link rate and the mission's transmission time limit, in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    data_rate_bps: f64,
    t_tr_limit_s: f64,
}

impl ChannelSpec {
    pub fn new(data_rate_bps: f64, t_tr_limit_s: f64) -> Result<Self, ChannelError> {
        if !(data_rate_bps > 0.0 && data_rate_bps.is_finite()) {
            return Err(ChannelError::DataRate(data_rate_bps));
        }
        if !(t_tr_limit_s > 0.0 && t_tr_limit_s.is_finite()) {
            return Err(ChannelError::TimeLimit(t_tr_limit_s));
        }
        Ok(Self { data_rate_bps, t_tr_limit_s })
    }

    /// Rates quoted in kbit/s use 1000 bit/s per kbit/s.
    pub fn from_kbps(kbps: f64, t_tr_limit_s: f64) -> Result<Self, ChannelError> {
        Self::new(kbps * 1000.0, t_tr_limit_s)
    }

    pub fn data_rate_bps(&self) -> f64 {
        self.data_rate_bps
    }

    pub fn t_tr_limit_s(&self) -> f64 {
        self.t_tr_limit_s
    }

    pub fn seconds_for(&self, bytes: u64) -> f64 {
        bytes as f64 * 8.0 / self.data_rate_bps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransferLabel {
    LowResAll,
    HighResSelected,
    HighResAll,
    Indices,
}

impl fmt::Display for TransferLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransferLabel::LowResAll => "LR-all",
            TransferLabel::HighResSelected => "HR-selected",
            TransferLabel::HighResAll => "HR-all",
            TransferLabel::Indices => "indices",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferRecord {
    pub bytes: u64,
    pub seconds: f64,
    pub label: TransferLabel,
}

/// How tile-index lists are charged on the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndexCost {
    /// Metadata is treated as negligible.
    #[default]
    Free,
    /// Each index costs this many bytes.
    PerIndex(u32),
}

/// Time to push `bytes` through the link. Index transfers take zero time.
pub fn transmit(bytes: u64, ch: &ChannelSpec, label: TransferLabel) -> TransferRecord {
    let seconds = match label {
        TransferLabel::Indices => 0.0,
        _ => ch.seconds_for(bytes),
    };
    TransferRecord { bytes, seconds, label }
}

/// Sends `count` tile indices under the given cost policy.
pub fn transmit_indices(count: usize, ch: &ChannelSpec, cost: IndexCost) -> TransferRecord {
    match cost {
        IndexCost::Free => TransferRecord { bytes: 0, seconds: 0.0, label: TransferLabel::Indices },
        IndexCost::PerIndex(b) => {
            let bytes = count as u64 * b as u64;
            TransferRecord { bytes, seconds: ch.seconds_for(bytes), label: TransferLabel::Indices }
        }
    }
}

/// Bytes that fit within the time limit: `floor(rate * limit / 8)`.
pub fn bandwidth_budget(ch: &ChannelSpec) -> u64 {
    (ch.data_rate_bps * ch.t_tr_limit_s / 8.0).floor() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn transmit_examples() {
        let ch = ChannelSpec::new(16_000.0, 1000.0).unwrap();
        assert_eq!(transmit(1_980_000, &ch, TransferLabel::LowResAll).seconds, 990.0);
        assert_eq!(transmit(0, &ch, TransferLabel::HighResAll).seconds, 0.0);
        let idx = transmit(4000, &ch, TransferLabel::Indices);
        assert_eq!((idx.bytes, idx.seconds), (4000, 0.0));
        assert_eq!(transmit_indices(10, &ch, IndexCost::Free).seconds, 0.0);
        let charged = transmit_indices(10, &ch, IndexCost::PerIndex(4));
        assert_eq!(charged.bytes, 40);
        assert_eq!(charged.seconds, 40.0 * 8.0 / 16_000.0);
    }

    #[test]
    fn budget_examples() {
        assert_eq!(bandwidth_budget(&ChannelSpec::from_kbps(22.0, 180.0).unwrap()), 495_000);
        assert_eq!(bandwidth_budget(&ChannelSpec::new(16_000.0, 1000.0).unwrap()), 2_000_000);
        assert_eq!(bandwidth_budget(&ChannelSpec::new(16_000.0, 1e-9).unwrap()), 0);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(ChannelSpec::new(0.0, 1.0).is_err());
        assert!(ChannelSpec::new(1.0, -1.0).is_err());
        assert!(ChannelSpec::new(f64::NAN, 1.0).is_err());
        assert!(ChannelSpec::new(1.0, f64::INFINITY).is_err());
    }

    proptest! {
        #[test]
        fn linear_in_bytes(bytes in 0u64..1_000_000_000, k in 1u64..50, rate in 1.0f64..1e7) {
            let ch = ChannelSpec::new(rate, 1.0).unwrap();
            let one = transmit(bytes, &ch, TransferLabel::HighResAll).seconds;
            let many = transmit(bytes * k, &ch, TransferLabel::HighResAll).seconds;
            prop_assert!((many - one * k as f64).abs() <= 1e-9 * many.max(1.0));
            let doubled = ChannelSpec::new(rate * 2.0, 1.0).unwrap();
            let half = transmit(bytes, &doubled, TransferLabel::HighResAll).seconds;
            prop_assert!((half * 2.0 - one).abs() <= 1e-9 * one.max(1.0));
        }

        #[test]
        fn floor_contract(rate in 1.0f64..1e7, limit in 0.001f64..1e5) {
            let ch = ChannelSpec::new(rate, limit).unwrap();
            let bw = bandwidth_budget(&ch) as f64;
            let bits = rate * limit;
            prop_assert!(bw * 8.0 <= bits);
            prop_assert!(bits < bw * 8.0 + 8.0);
        }
    }
}
