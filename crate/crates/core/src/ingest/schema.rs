use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Class,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        ColumnSpec { name: name.into(), kind }
    }
}

/// Numeric column feeding one flow quantity, multiplied by `scale` to reach
/// seconds / packets / bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRef {
    pub column: String,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl ColumnRef {
    fn new(column: &str) -> Self {
        ColumnRef { column: column.into(), scale: 1.0 }
    }
}

/// Which columns supply the quantities the labeling policy needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowRoles {
    pub duration: Option<ColumnRef>,
    pub fwd_packets: Option<ColumnRef>,
    pub bwd_packets: Option<ColumnRef>,
    pub fwd_bytes: Option<ColumnRef>,
    pub bwd_bytes: Option<ColumnRef>,
    pub protocol: Option<String>,
}

impl FlowRoles {
    fn numeric_refs(&self) -> impl Iterator<Item = &ColumnRef> {
        [&self.duration, &self.fwd_packets, &self.bwd_packets, &self.fwd_bytes, &self.bwd_bytes].into_iter().flatten()
    }

    /// Labeling needs a duration, at least one packet count and at least one byte count.
    pub fn can_label(&self) -> bool {
        self.duration.is_some()
            && (self.fwd_packets.is_some() || self.bwd_packets.is_some())
            && (self.fwd_bytes.is_some() || self.bwd_bytes.is_some())
    }
}

fn default_positive() -> String {
    "1".into()
}

fn default_negative() -> String {
    "0".into()
}

/// Column layout of a flow-record table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSchema {
    pub name: String,
    pub columns: Vec<ColumnSpec>,
    /// Class-column token meaning elephant.
    #[serde(default = "default_positive")]
    pub class_positive: String,
    /// Class-column token meaning mouse.
    #[serde(default = "default_negative")]
    pub class_negative: String,
    #[serde(default)]
    pub roles: FlowRoles,
}

pub const PRESET_NAMES: [&str; 4] = ["nims", "sdn", "unicauca", "generic"];

impl DatasetSchema {
    pub fn new(name: impl Into<String>, columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = DatasetSchema {
            name: name.into(),
            columns,
            class_positive: default_positive(),
            class_negative: default_negative(),
            roles: FlowRoles::default(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column '{}'", c.name)));
            }
        }
        if self.columns.iter().filter(|c| c.kind == ColumnKind::Class).count() > 1 {
            return Err(Error::Schema("at most one class column is allowed".into()));
        }
        if !self.columns.iter().any(|c| c.kind == ColumnKind::Numeric) {
            return Err(Error::Schema(format!("schema '{}' has no numeric feature column", self.name)));
        }
        if self.class_positive == self.class_negative {
            return Err(Error::Schema("class_positive and class_negative must differ".into()));
        }
        for r in self.roles.numeric_refs() {
            match self.column(&r.column) {
                Some(c) if c.kind == ColumnKind::Numeric || c.kind == ColumnKind::Ignore => {}
                Some(_) => return Err(Error::Schema(format!("role column '{}' is not numeric", r.column))),
                None => return Err(Error::Schema(format!("role column '{}' not in schema", r.column))),
            }
            if !(r.scale > 0.0 && r.scale.is_finite()) {
                return Err(Error::Schema(format!("role column '{}' needs a positive scale", r.column)));
            }
        }
        if let Some(p) = &self.roles.protocol {
            if self.column(p).is_none() {
                return Err(Error::Schema(format!("protocol column '{p}' not in schema")));
            }
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn class_index(&self) -> Option<usize> {
        self.columns.iter().position(|c| c.kind == ColumnKind::Class)
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// Same layout with the class column removed (unlabeled input).
    pub fn without_class(&self) -> DatasetSchema {
        let mut s = self.clone();
        s.columns.retain(|c| c.kind != ColumnKind::Class);
        s
    }

    /// Same layout guaranteed to end with a class column: the existing one,
    /// or a new trailing `class` column.
    pub fn with_class(&self) -> DatasetSchema {
        let mut s = self.clone();
        if s.class_index().is_none() {
            s.columns.push(ColumnSpec::new("class", ColumnKind::Class));
        }
        s
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("schema serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: DatasetSchema = toml::from_str(text).map_err(|e| Error::Schema(format!("schema file: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Schema inferred from a header: a column named `class` is the class
    /// column, every other column is numeric.
    pub fn infer(header: &[&str]) -> Result<Self> {
        let columns = header
            .iter()
            .map(|&h| {
                let kind = if h == "class" { ColumnKind::Class } else { ColumnKind::Numeric };
                ColumnSpec::new(h, kind)
            })
            .collect();
        DatasetSchema::new("generic", columns)
    }

    /// Built-in presets. `generic` is header-inferred and is not returned here.
    pub fn preset(name: &str) -> Result<Self> {
        let schema = match name {
            "nims" => nims(),
            "sdn" => sdn(),
            "unicauca" => unicauca(),
            _ => return Err(Error::Schema(format!("unknown schema '{name}'; presets: {}", PRESET_NAMES.join(", ")))),
        };
        schema.validate()?;
        Ok(schema)
    }
}

/// NetMate-style flow statistics (HTTP vs GTalk), 22 attributes plus a
/// leading identifier and the trailing class: 24 columns, 23 features once
/// the protocol is one-hot encoded.
fn nims() -> DatasetSchema {
    use ColumnKind::*;
    let mut columns = vec![ColumnSpec::new("flow_id", Ignore)];
    for dir in ["f", "b"] {
        for stat in ["min", "mean", "max", "std"] {
            columns.push(ColumnSpec::new(format!("{stat}_{dir}pktl"), Numeric));
        }
    }
    for dir in ["f", "b"] {
        for stat in ["min", "mean", "max", "std"] {
            columns.push(ColumnSpec::new(format!("{stat}_{dir}iat"), Numeric));
        }
    }
    columns.push(ColumnSpec::new("duration", Numeric));
    columns.push(ColumnSpec::new("proto", Categorical));
    for c in ["total_fpackets", "total_fvolume", "total_bpackets", "total_bvolume"] {
        columns.push(ColumnSpec::new(c, Numeric));
    }
    columns.push(ColumnSpec::new("class", Class));
    DatasetSchema {
        name: "nims".into(),
        columns,
        class_positive: default_positive(),
        class_negative: default_negative(),
        roles: FlowRoles {
            duration: Some(ColumnRef::new("duration")),
            fwd_packets: Some(ColumnRef::new("total_fpackets")),
            bwd_packets: Some(ColumnRef::new("total_bpackets")),
            fwd_bytes: Some(ColumnRef::new("total_fvolume")),
            bwd_bytes: Some(ColumnRef::new("total_bvolume")),
            protocol: Some("proto".into()),
        },
    }
}

/// Switch-level SDN flow statistics (Mininet/Ryu capture, 23 columns).
/// The published table holds 104,345 data rows; its `label` column is
/// overwritten by the elephant/mouse labeler. Timestamp and addresses are
/// dropped, leaving 18 numeric columns plus a 3-token protocol: 21 features.
fn sdn() -> DatasetSchema {
    use ColumnKind::*;
    let kinds: [(&str, ColumnKind); 23] = [
        ("dt", Ignore),
        ("switch", Numeric),
        ("src", Ignore),
        ("dst", Ignore),
        ("pktcount", Numeric),
        ("bytecount", Numeric),
        ("dur", Numeric),
        ("dur_nsec", Numeric),
        ("tot_dur", Numeric),
        ("flows", Numeric),
        ("packetins", Numeric),
        ("pktperflow", Numeric),
        ("byteperflow", Numeric),
        ("pktrate", Numeric),
        ("Pairflow", Numeric),
        ("Protocol", Categorical),
        ("port_no", Numeric),
        ("tx_bytes", Numeric),
        ("rx_bytes", Numeric),
        ("tx_kbps", Numeric),
        ("rx_kbps", Numeric),
        ("tot_kbps", Numeric),
        ("label", Class),
    ];
    DatasetSchema {
        name: "sdn".into(),
        columns: kinds.iter().map(|&(n, k)| ColumnSpec::new(n, k)).collect(),
        class_positive: default_positive(),
        class_negative: default_negative(),
        roles: FlowRoles {
            duration: Some(ColumnRef::new("dur")),
            fwd_packets: Some(ColumnRef::new("pktcount")),
            bwd_packets: None,
            fwd_bytes: Some(ColumnRef::new("bytecount")),
            bwd_bytes: None,
            protocol: Some("Protocol".into()),
        },
    }
}

const UNICAUCA_COLUMNS: [&str; 87] = [
    "Flow.ID",
    "Source.IP",
    "Source.Port",
    "Destination.IP",
    "Destination.Port",
    "Protocol",
    "Timestamp",
    "Flow.Duration",
    "Total.Fwd.Packets",
    "Total.Backward.Packets",
    "Total.Length.of.Fwd.Packets",
    "Total.Length.of.Bwd.Packets",
    "Fwd.Packet.Length.Max",
    "Fwd.Packet.Length.Min",
    "Fwd.Packet.Length.Mean",
    "Fwd.Packet.Length.Std",
    "Bwd.Packet.Length.Max",
    "Bwd.Packet.Length.Min",
    "Bwd.Packet.Length.Mean",
    "Bwd.Packet.Length.Std",
    "Flow.Bytes.s",
    "Flow.Packets.s",
    "Flow.IAT.Mean",
    "Flow.IAT.Std",
    "Flow.IAT.Max",
    "Flow.IAT.Min",
    "Fwd.IAT.Total",
    "Fwd.IAT.Mean",
    "Fwd.IAT.Std",
    "Fwd.IAT.Max",
    "Fwd.IAT.Min",
    "Bwd.IAT.Total",
    "Bwd.IAT.Mean",
    "Bwd.IAT.Std",
    "Bwd.IAT.Max",
    "Bwd.IAT.Min",
    "Fwd.PSH.Flags",
    "Bwd.PSH.Flags",
    "Fwd.URG.Flags",
    "Bwd.URG.Flags",
    "Fwd.Header.Length",
    "Bwd.Header.Length",
    "Fwd.Packets.s",
    "Bwd.Packets.s",
    "Min.Packet.Length",
    "Max.Packet.Length",
    "Packet.Length.Mean",
    "Packet.Length.Std",
    "Packet.Length.Variance",
    "FIN.Flag.Count",
    "SYN.Flag.Count",
    "RST.Flag.Count",
    "PSH.Flag.Count",
    "ACK.Flag.Count",
    "URG.Flag.Count",
    "CWE.Flag.Count",
    "ECE.Flag.Count",
    "Down.Up.Ratio",
    "Average.Packet.Size",
    "Avg.Fwd.Segment.Size",
    "Avg.Bwd.Segment.Size",
    "Fwd.Header.Length.1",
    "Fwd.Avg.Bytes.Bulk",
    "Fwd.Avg.Packets.Bulk",
    "Fwd.Avg.Bulk.Rate",
    "Bwd.Avg.Bytes.Bulk",
    "Bwd.Avg.Packets.Bulk",
    "Bwd.Avg.Bulk.Rate",
    "Subflow.Fwd.Packets",
    "Subflow.Fwd.Bytes",
    "Subflow.Bwd.Packets",
    "Subflow.Bwd.Bytes",
    "Init_Win_bytes_forward",
    "Init_Win_bytes_backward",
    "act_data_pkt_fwd",
    "min_seg_size_forward",
    "Active.Mean",
    "Active.Std",
    "Active.Max",
    "Active.Min",
    "Idle.Mean",
    "Idle.Std",
    "Idle.Max",
    "Idle.Min",
    "Label",
    "L7Protocol",
    "ProtocolName",
];

/// CICFlowMeter export of campus traffic labeled with 87 applications, plus
/// a trailing class column (88 columns). Durations are in microseconds.
fn unicauca() -> DatasetSchema {
    use ColumnKind::*;
    let mut columns: Vec<ColumnSpec> = UNICAUCA_COLUMNS
        .iter()
        .map(|&n| {
            let kind = match n {
                "Flow.ID" | "Source.IP" | "Destination.IP" | "Timestamp" | "Label" | "L7Protocol" => Ignore,
                "ProtocolName" => Categorical,
                _ => Numeric,
            };
            ColumnSpec::new(n, kind)
        })
        .collect();
    columns.push(ColumnSpec::new("class", Class));
    DatasetSchema {
        name: "unicauca".into(),
        columns,
        class_positive: default_positive(),
        class_negative: default_negative(),
        roles: FlowRoles {
            duration: Some(ColumnRef { column: "Flow.Duration".into(), scale: 1e-6 }),
            fwd_packets: Some(ColumnRef::new("Total.Fwd.Packets")),
            bwd_packets: Some(ColumnRef::new("Total.Backward.Packets")),
            fwd_bytes: Some(ColumnRef::new("Total.Length.of.Fwd.Packets")),
            bwd_bytes: Some(ColumnRef::new("Total.Length.of.Bwd.Packets")),
            protocol: Some("ProtocolName".into()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        let nims = DatasetSchema::preset("nims").unwrap();
        assert_eq!(nims.columns.len(), 24);
        assert_eq!(nims.class_index(), Some(23));
        assert!(nims.roles.can_label());

        let sdn = DatasetSchema::preset("sdn").unwrap();
        assert_eq!(sdn.columns.len(), 23);
        let numeric = sdn.columns.iter().filter(|c| c.kind == ColumnKind::Numeric).count();
        assert_eq!(numeric, 18);

        let uni = DatasetSchema::preset("unicauca").unwrap();
        assert_eq!(uni.columns.len(), 88);
    }

    #[test]
    fn unknown_preset_lists_known_names() {
        let err = DatasetSchema::preset("kdd").unwrap_err().to_string();
        for p in PRESET_NAMES {
            assert!(err.contains(p), "{err}");
        }
    }

    #[test]
    fn invalid_schemas() {
        use ColumnKind::*;
        assert!(DatasetSchema::new("x", vec![ColumnSpec::new("c", Class)]).is_err());
        assert!(DatasetSchema::new(
            "x",
            vec![ColumnSpec::new("a", Numeric), ColumnSpec::new("c", Class), ColumnSpec::new("d", Class)]
        )
        .is_err());
        assert!(DatasetSchema::new("x", vec![ColumnSpec::new("a", Numeric), ColumnSpec::new("a", Numeric)]).is_err());
        assert!(DatasetSchema::new("x", vec![ColumnSpec::new("a", Numeric)]).is_ok());
    }

    #[test]
    fn schema_file() {
        let text = r#"
name = "lab"
class_positive = "E"
class_negative = "M"

[[columns]]
name = "secs"
kind = "numeric"

[[columns]]
name = "pkts"
kind = "numeric"

[[columns]]
name = "bytes"
kind = "numeric"

[[columns]]
name = "cls"
kind = "class"

[roles]
duration = { column = "secs" }
fwd_packets = { column = "pkts" }
fwd_bytes = { column = "bytes", scale = 1024.0 }
"#;
        let s = DatasetSchema::from_toml_str(text).unwrap();
        assert_eq!(s.class_positive, "E");
        assert_eq!(s.roles.fwd_bytes.as_ref().unwrap().scale, 1024.0);
        assert!(s.roles.can_label());

        let bad = text.replace("column = \"secs\"", "column = \"nope\"");
        assert!(DatasetSchema::from_toml_str(&bad).is_err());
    }

    #[test]
    fn class_toggling_and_hash() {
        let nims = DatasetSchema::preset("nims").unwrap();
        let bare = nims.without_class();
        assert_eq!(bare.columns.len(), 23);
        assert_eq!(bare.with_class(), nims);
        assert_ne!(bare.hash(), nims.hash());
        assert_eq!(nims.hash(), DatasetSchema::preset("nims").unwrap().hash());
    }
}
