//! Activity taxonomy, sensor sources and sensor masks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActivityCategory {
    NonHand,
    Hand,
    HandEating,
}

/// One of the 18 recorded activities. There is no `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "char", into = "char")]
pub struct ActivityCode(char);

const TABLE: [(char, &str, ActivityCategory); 18] = [
    ('A', "walking", ActivityCategory::NonHand),
    ('B', "jogging", ActivityCategory::NonHand),
    ('C', "stairs", ActivityCategory::NonHand),
    ('D', "sitting", ActivityCategory::NonHand),
    ('E', "standing", ActivityCategory::NonHand),
    ('F', "typing", ActivityCategory::Hand),
    ('G', "teeth", ActivityCategory::Hand),
    ('H', "soup", ActivityCategory::HandEating),
    ('I', "chips", ActivityCategory::HandEating),
    ('J', "pasta", ActivityCategory::HandEating),
    ('K', "drinking", ActivityCategory::HandEating),
    ('L', "sandwich", ActivityCategory::HandEating),
    ('M', "kicking", ActivityCategory::NonHand),
    ('O', "catch", ActivityCategory::Hand),
    ('P', "dribbling", ActivityCategory::Hand),
    ('Q', "writing", ActivityCategory::Hand),
    ('R', "clapping", ActivityCategory::Hand),
    ('S', "folding", ActivityCategory::Hand),
];

impl ActivityCode {
    pub const WALKING: Self = Self('A');
    pub const JOGGING: Self = Self('B');
    pub const TYPING: Self = Self('F');
    pub const DRINKING: Self = Self('K');
    pub const SANDWICH: Self = Self('L');
    pub const CLAPPING: Self = Self('R');

    /// The two best-performing activities from each category, in the order
    /// walking, jogging, typing, clapping, drinking, sandwich.
    pub const DISCUSSION: [Self; 6] = [
        Self::WALKING,
        Self::JOGGING,
        Self::TYPING,
        Self::CLAPPING,
        Self::DRINKING,
        Self::SANDWICH,
    ];

    pub fn new(code: char) -> Result<Self> {
        let code = code.to_ascii_uppercase();
        if TABLE.iter().any(|(c, _, _)| *c == code) {
            Ok(Self(code))
        } else {
            Err(Error::Parse(format!("unknown activity code {code:?}")))
        }
    }

    pub fn all() -> impl Iterator<Item = Self> {
        TABLE.iter().map(|(c, _, _)| Self(*c))
    }

    pub fn code(self) -> char {
        self.0
    }

    fn entry(self) -> &'static (char, &'static str, ActivityCategory) {
        TABLE
            .iter()
            .find(|(c, _, _)| *c == self.0)
            .expect("constructed codes are always in the table")
    }

    pub fn name(self) -> &'static str {
        self.entry().1
    }

    pub fn category(self) -> ActivityCategory {
        self.entry().2
    }
}

impl TryFrom<char> for ActivityCode {
    type Error = Error;
    fn try_from(c: char) -> Result<Self> {
        Self::new(c)
    }
}

impl From<ActivityCode> for char {
    fn from(a: ActivityCode) -> char {
        a.0
    }
}

impl fmt::Display for ActivityCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for ActivityCode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Self::new(c),
            _ => TABLE
                .iter()
                .find(|(_, name, _)| name.eq_ignore_ascii_case(s))
                .map(|(c, _, _)| Self(*c))
                .ok_or_else(|| Error::Parse(format!("unknown activity {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SensorSource {
    PhoneAccel,
    PhoneGyro,
    WatchAccel,
    WatchGyro,
}

impl SensorSource {
    /// Fixed fusion order.
    pub const ALL: [Self; 4] = [
        Self::PhoneAccel,
        Self::PhoneGyro,
        Self::WatchAccel,
        Self::WatchGyro,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::PhoneAccel => "phone-accel",
            Self::PhoneGyro => "phone-gyro",
            Self::WatchAccel => "watch-accel",
            Self::WatchGyro => "watch-gyro",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    /// Infers the source from a path such as `raw/phone/accel/data_1600_accel_phone.txt`.
    pub fn from_path(path: &std::path::Path) -> Option<Self> {
        let s = path.to_string_lossy().to_ascii_lowercase();
        let file = path
            .file_name()
            .map(|f| f.to_string_lossy().to_ascii_lowercase())
            .unwrap_or_default();
        for src in Self::ALL {
            let (dev, kind) = src.name().split_once('-').unwrap();
            if file.contains(&format!("{kind}_{dev}")) || file.contains(src.name()) {
                return Some(src);
            }
            if s.contains(&format!("{dev}/{kind}")) {
                return Some(src);
            }
        }
        None
    }
}

impl fmt::Display for SensorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SensorSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|src| src.name() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown sensor source {s:?}")))
    }
}

/// A non-empty set of sensor sources.
///
/// Displays as `phone-accel+watch-accel`; the aliases `all-accel` and `all`
/// are accepted when parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SensorMask(u8);

impl SensorMask {
    pub const PHONE_ACCEL: Self = Self(1);
    pub const ALL_ACCEL: Self = Self(1 | 4);
    pub const ALL: Self = Self(0b1111);

    pub fn single(source: SensorSource) -> Self {
        Self(source.bit())
    }

    pub fn from_sources(sources: impl IntoIterator<Item = SensorSource>) -> Result<Self> {
        let bits = sources.into_iter().fold(0u8, |acc, s| acc | s.bit());
        if bits == 0 {
            return Err(Error::Parse("empty sensor mask".into()));
        }
        Ok(Self(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, source: SensorSource) -> bool {
        self.0 & source.bit() != 0
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    /// Member sources in fusion order.
    pub fn sources(self) -> impl Iterator<Item = SensorSource> {
        SensorSource::ALL.into_iter().filter(move |s| self.contains(*s))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Short label used in file names and report columns.
    pub fn label(self) -> String {
        match self {
            Self::ALL => "all".into(),
            Self::ALL_ACCEL => "all-accel".into(),
            _ => self.to_string(),
        }
    }
}

impl fmt::Display for SensorMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.sources().map(SensorSource::name).collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for SensorMask {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(Self::ALL),
            "all-accel" => Ok(Self::ALL_ACCEL),
            other => {
                let sources = other
                    .split('+')
                    .map(str::parse)
                    .collect::<Result<Vec<SensorSource>>>()?;
                Self::from_sources(sources)
            }
        }
    }
}

impl TryFrom<String> for SensorMask {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SensorMask> for String {
    fn from(m: SensorMask) -> String {
        m.to_string()
    }
}
