use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::noise::AblationKind;

/// One row of the experiment matrix. Variant order is report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    RandPred,
    RandVec,
    Vanilla,
    AblN,
    AblD,
    AblDn,
    #[serde(rename = "del_1h")]
    Del1h,
    #[serde(rename = "del_2h")]
    Del2h,
}

impl Condition {
    pub const ALL: [Condition; 8] = [
        Condition::RandPred,
        Condition::RandVec,
        Condition::Vanilla,
        Condition::AblN,
        Condition::AblD,
        Condition::AblDn,
        Condition::Del1h,
        Condition::Del2h,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::RandPred => "rand_pred",
            Condition::RandVec => "rand_vec",
            Condition::Vanilla => "vanilla",
            Condition::AblN => "abl_n",
            Condition::AblD => "abl_d",
            Condition::AblDn => "abl_dn",
            Condition::Del1h => "del_1h",
            Condition::Del2h => "del_2h",
        }
    }

    /// Row label used in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            Condition::RandPred => "rand. pred.",
            Condition::RandVec => "rand. vec.",
            Condition::Vanilla => "vanilla",
            Condition::AblN => "abl. N",
            Condition::AblD => "abl. D",
            Condition::AblDn => "abl. D+N",
            Condition::Del1h => "del. 1h",
            Condition::Del2h => "del. 2h",
        }
    }

    /// The vector transform behind this condition; `None` for rand.pred, which trains nothing.
    pub fn ablation(self) -> Option<AblationKind> {
        match self {
            Condition::RandPred => None,
            Condition::RandVec => Some(AblationKind::RandVec),
            Condition::Vanilla => Some(AblationKind::Vanilla),
            Condition::AblN => Some(AblationKind::AblN),
            Condition::AblD => Some(AblationKind::AblD),
            Condition::AblDn => Some(AblationKind::AblDn),
            Condition::Del1h => Some(AblationKind::Del1h),
            Condition::Del2h => Some(AblationKind::Del2h),
        }
    }

    pub fn is_random_baseline(self) -> bool {
        matches!(self, Condition::RandPred | Condition::RandVec)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown condition '{s}'")))
    }
}

/// Which train/test protocol produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Fixed,
    Resampled,
}

impl SplitKind {
    pub fn name(self) -> &'static str {
        match self {
            SplitKind::Fixed => "fixed",
            SplitKind::Resampled => "resampled",
        }
    }

    /// Column header: IU_F or IU_R.
    pub fn label(self) -> &'static str {
        match self {
            SplitKind::Fixed => "IU_F",
            SplitKind::Resampled => "IU_R",
        }
    }
}

impl FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "fixed" => Ok(SplitKind::Fixed),
            "resampled" => Ok(SplitKind::Resampled),
            other => Err(Error::Config(format!("unknown split '{other}'"))),
        }
    }
}
