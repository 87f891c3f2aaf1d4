//! Flow records and the heuristic elephant/mouse labeling policy.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary flow class. Serialized as `0` (mouse) / `1` (elephant).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum FlowLabel {
    Mouse = 0,
    Elephant = 1,
}

impl FlowLabel {
    pub fn is_elephant(self) -> bool {
        self == FlowLabel::Elephant
    }

    /// Target value used by the classifiers.
    pub fn as_target(self) -> f64 {
        match self {
            FlowLabel::Mouse => 0.0,
            FlowLabel::Elephant => 1.0,
        }
    }
}

impl From<bool> for FlowLabel {
    fn from(elephant: bool) -> Self {
        if elephant {
            FlowLabel::Elephant
        } else {
            FlowLabel::Mouse
        }
    }
}

impl From<FlowLabel> for u8 {
    fn from(l: FlowLabel) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for FlowLabel {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(FlowLabel::Mouse),
            1 => Ok(FlowLabel::Elephant),
            other => Err(format!("flow label must be 0 or 1, got {other}")),
        }
    }
}

impl fmt::Display for FlowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

/// min/max/mean/std of one per-packet quantity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl StatSummary {
    fn check(&self, what: &str) -> Result<()> {
        let vals = [self.min, self.max, self.mean, self.std];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(format!("{what}: statistics must be finite and non-negative")));
        }
        if !(self.min <= self.mean && self.mean <= self.max) {
            return Err(Error::Config(format!(
                "{what}: expected min <= mean <= max, got {} / {} / {}",
                self.min, self.mean, self.max
            )));
        }
        Ok(())
    }

    fn is_zero(&self) -> bool {
        self.min == 0.0 && self.max == 0.0 && self.mean == 0.0 && self.std == 0.0
    }
}

/// Statistical summary of one bidirectional flow.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    /// Seconds.
    pub duration: f64,
    pub total_fpackets: u64,
    pub total_bpackets: u64,
    /// Bytes.
    pub total_fvolume: u64,
    pub total_bvolume: u64,
    pub fwd_packet_length: StatSummary,
    pub bwd_packet_length: StatSummary,
    pub fwd_inter_arrival: StatSummary,
    pub bwd_inter_arrival: StatSummary,
    pub protocol: String,
}

impl FlowRecord {
    pub fn total_packets(&self) -> u64 {
        self.total_fpackets + self.total_bpackets
    }

    pub fn total_bytes(&self) -> u64 {
        self.total_fvolume + self.total_bvolume
    }

    /// Mean bytes per packet, zero for an empty flow.
    pub fn mean_packet_size(&self) -> f64 {
        match self.total_packets() {
            0 => 0.0,
            n => self.total_bytes() as f64 / n as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.duration.is_finite() || self.duration < 0.0 {
            return Err(Error::Config(format!("duration must be finite and >= 0, got {}", self.duration)));
        }
        self.fwd_packet_length.check("forward packet length")?;
        self.bwd_packet_length.check("backward packet length")?;
        self.fwd_inter_arrival.check("forward inter-arrival")?;
        self.bwd_inter_arrival.check("backward inter-arrival")?;
        if self.total_packets() == 0
            && (self.total_bytes() != 0 || !self.fwd_packet_length.is_zero() || !self.bwd_packet_length.is_zero())
        {
            return Err(Error::Config("a flow without packets cannot carry bytes or packet lengths".into()));
        }
        Ok(())
    }
}

/// How the individual threshold tests combine into a verdict.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinationRule {
    /// Duration, packet count and flow bytes must all exceed their thresholds.
    #[default]
    AllExceeded,
    /// As `AllExceeded`, and the mean packet size must reach `min_bytes_per_packet`.
    AllExceededWithPacketSize,
    /// Any of duration, packet count or flow bytes exceeding its threshold suffices.
    AnyExceeded,
}

impl CombinationRule {
    pub const ALL: [CombinationRule; 3] =
        [CombinationRule::AllExceeded, CombinationRule::AllExceededWithPacketSize, CombinationRule::AnyExceeded];

    pub fn as_str(self) -> &'static str {
        match self {
            CombinationRule::AllExceeded => "all-exceeded",
            CombinationRule::AllExceededWithPacketSize => "all-exceeded-with-packet-size",
            CombinationRule::AnyExceeded => "any-exceeded",
        }
    }
}

impl FromStr for CombinationRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CombinationRule::ALL.into_iter().find(|r| r.as_str() == s).ok_or_else(|| {
            let known: Vec<_> = CombinationRule::ALL.iter().map(|r| r.as_str()).collect();
            Error::Config(format!("unknown combination rule '{s}' (expected one of {})", known.join(", ")))
        })
    }
}

/// Thresholds separating elephant flows from mice.
///
/// Defaults: 10 s duration, 15 packets, 500 bytes per packet, 10 KiB per flow.
/// Every comparison is strict, so a flow sitting exactly on a threshold is a mouse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelingPolicy {
    pub min_duration: f64,
    pub min_packets: u64,
    pub min_bytes_per_packet: f64,
    pub min_flow_bytes: u64,
    pub combination: CombinationRule,
}

impl Default for LabelingPolicy {
    fn default() -> Self {
        LabelingPolicy {
            min_duration: 10.0,
            min_packets: 15,
            min_bytes_per_packet: 500.0,
            min_flow_bytes: 10 * 1024,
            combination: CombinationRule::AllExceeded,
        }
    }
}

impl LabelingPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_duration > 0.0 && self.min_duration.is_finite()) {
            return Err(Error::Config("min_duration must be > 0".into()));
        }
        if self.min_packets == 0 {
            return Err(Error::Config("min_packets must be > 0".into()));
        }
        if !(self.min_bytes_per_packet > 0.0 && self.min_bytes_per_packet.is_finite()) {
            return Err(Error::Config("min_bytes_per_packet must be > 0".into()));
        }
        if self.min_flow_bytes == 0 {
            return Err(Error::Config("min_flow_bytes must be > 0".into()));
        }
        Ok(())
    }

    /// Parses a TOML key/value policy; missing keys keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let policy: LabelingPolicy = toml::from_str(text).map_err(|e| Error::Config(format!("policy file: {e}")))?;
        policy.validate()?;
        Ok(policy)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("policy is always representable as TOML")
    }

    /// Applies the policy and reports each individual test.
    pub fn assess(&self, record: &FlowRecord) -> Assessment {
        let long_lived = record.duration > self.min_duration;
        let many_packets = record.total_packets() > self.min_packets;
        let large = record.total_bytes() > self.min_flow_bytes;
        let full_packets = record.total_packets() > 0 && record.mean_packet_size() >= self.min_bytes_per_packet;
        let elephant = match self.combination {
            CombinationRule::AllExceeded => long_lived && many_packets && large,
            CombinationRule::AllExceededWithPacketSize => long_lived && many_packets && large && full_packets,
            CombinationRule::AnyExceeded => long_lived || many_packets || large,
        };
        Assessment { label: elephant.into(), long_lived, many_packets, large, full_packets }
    }
}

/// Per-test outcome of [`LabelingPolicy::assess`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assessment {
    pub label: FlowLabel,
    pub long_lived: bool,
    pub many_packets: bool,
    pub large: bool,
    /// Mean packet size reached `min_bytes_per_packet`. Advisory unless the
    /// rule is `AllExceededWithPacketSize`.
    pub full_packets: bool,
}

pub fn label_flow(record: &FlowRecord, policy: &LabelingPolicy) -> FlowLabel {
    policy.assess(record).label
}

pub fn label_dataset(records: &[FlowRecord], policy: &LabelingPolicy) -> Vec<FlowLabel> {
    records.iter().map(|r| label_flow(r, policy)).collect()
}
