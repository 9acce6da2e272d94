use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Class of a sample: control (healthy) or sick.
///
/// The column order of every probability table is `[C, S]`, i.e. the order of
/// [`Label::ALL`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "C")]
    Control,
    #[serde(rename = "S")]
    Sick,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Control, Label::Sick];

    /// Column index in probability rows.
    pub fn index(self) -> usize {
        match self {
            Label::Control => 0,
            Label::Sick => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            Label::Control => "C",
            Label::Sick => "S",
        }
    }

    /// Sign used by the SVM dual: S is +1.
    pub(crate) fn sign(self) -> f64 {
        match self {
            Label::Control => -1.0,
            Label::Sick => 1.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "C" | "c" => Ok(Label::Control),
            "S" | "s" => Ok(Label::Sick),
            other => Err(Error::InvalidDataset(format!("unknown label {other:?}"))),
        }
    }
}

/// Index of the larger entry; exact ties go to class C.
pub fn argmax(row: &[f64; 2]) -> Label {
    if row[1] > row[0] {
        Label::Sick
    } else {
        Label::Control
    }
}
