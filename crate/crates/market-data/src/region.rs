use std::fmt;

use serde::{Deserialize, Serialize};

/// The five interconnected regional markets of the NEM, in the fixed order
/// used for report layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    QLD,
    NSW,
    VIC,
    SA,
    TAS,
}

impl Region {
    pub const ALL: [Region; 5] = [Region::QLD, Region::NSW, Region::VIC, Region::SA, Region::TAS];

    pub fn code(&self) -> &'static str {
        match self {
            Region::QLD => "QLD",
            Region::NSW => "NSW",
            Region::VIC => "VIC",
            Region::SA => "SA",
            Region::TAS => "TAS",
        }
    }

    /// AEMO region identifier as used in dispatch tables (e.g. `QLD1`).
    pub fn aemo_id(&self) -> &'static str {
        match self {
            Region::QLD => "QLD1",
            Region::NSW => "NSW1",
            Region::VIC => "VIC1",
            Region::SA => "SA1",
            Region::TAS => "TAS1",
        }
    }

    pub fn parse(s: &str) -> Option<Region> {
        match s.trim().to_ascii_uppercase().as_str() {
            "QLD" | "QLD1" => Some(Region::QLD),
            "NSW" | "NSW1" => Some(Region::NSW),
            "VIC" | "VIC1" => Some(Region::VIC),
            "SA" | "SA1" => Some(Region::SA),
            "TAS" | "TAS1" => Some(Region::TAS),
            _ => None,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}
