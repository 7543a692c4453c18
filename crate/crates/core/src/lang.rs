use std::fmt;

use serde::{Deserialize, Serialize};

/// One side of the language pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    Src,
    Tgt,
}

impl Lang {
    pub const BOTH: [Lang; 2] = [Lang::Src, Lang::Tgt];

    pub fn index(self) -> usize {
        match self {
            Lang::Src => 0,
            Lang::Tgt => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Lang> {
        match i {
            0 => Some(Lang::Src),
            1 => Some(Lang::Tgt),
            _ => None,
        }
    }

    pub fn other(self) -> Lang {
        match self {
            Lang::Src => Lang::Tgt,
            Lang::Tgt => Lang::Src,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Lang::Src => "src",
            Lang::Tgt => "tgt",
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A translation direction, e.g. `src2tgt`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Direction {
    pub from: Lang,
    pub to: Lang,
}

impl Direction {
    pub const SRC2TGT: Direction = Direction { from: Lang::Src, to: Lang::Tgt };
    pub const TGT2SRC: Direction = Direction { from: Lang::Tgt, to: Lang::Src };
    pub const SRC2SRC: Direction = Direction { from: Lang::Src, to: Lang::Src };
    pub const TGT2TGT: Direction = Direction { from: Lang::Tgt, to: Lang::Tgt };

    pub fn label(self) -> String {
        format!("{}2{}", self.from, self.to)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}2{}", self.from, self.to)
    }
}
