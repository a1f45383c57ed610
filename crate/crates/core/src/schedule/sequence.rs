use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ScheduleError;
use crate::hypergraph::Color;

/// Ordered list of colors, written in dash-separated groups of three.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequence(Vec<Color>);

impl Sequence {
    pub fn new(steps: Vec<Color>) -> Result<Self, ScheduleError> {
        if steps.is_empty() {
            return Err(ScheduleError::Sequence("empty sequence".into()));
        }
        Ok(Sequence(steps))
    }

    /// `ABC-CAB-BCA`.
    pub fn standard() -> Self {
        "ABC-CAB-BCA".parse().expect("valid literal")
    }

    pub fn steps(&self) -> &[Color] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Step `i` of the cyclically repeated sequence.
    pub fn cyclic(&self, i: usize) -> Color {
        self.0[i % self.0.len()]
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 && i % 3 == 0 {
                f.write_str("-")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Sequence {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let steps = s
            .chars()
            .filter(|c| *c != '-' && !c.is_whitespace())
            .map(|c| Color::from_letter(c).ok_or_else(|| ScheduleError::Sequence(format!("bad color '{c}' in {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Sequence::new(steps)
    }
}

impl Serialize for Sequence {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Sequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for s in ["ABC-CBA-ABC", "BBB-BCB-BBB-BAB", "AB", "ABC-A"] {
            assert_eq!(s.parse::<Sequence>().unwrap().to_string(), s);
        }
        assert_eq!("ABC CBA".parse::<Sequence>().unwrap().to_string(), "ABC-CBA");
    }

    #[test]
    fn rejects_empty_and_bad_letters() {
        assert!("".parse::<Sequence>().is_err());
        assert!("---".parse::<Sequence>().is_err());
        assert!("AB1".parse::<Sequence>().is_err());
    }

    #[test]
    fn cyclic_indexing() {
        let s: Sequence = "ABC".parse().unwrap();
        assert_eq!(s.cyclic(4), Color::B);
        assert_eq!(Sequence::standard().len(), 9);
    }

    #[test]
    fn serde_as_string() {
        let s: Sequence = serde_json::from_str("\"ABC-CAB\"").unwrap();
        assert_eq!(serde_json::to_string(&s).unwrap(), "\"ABC-CAB\"");
    }
}
