//! Discretisation of water levels into the coarse keys used by the Q-tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{Node, WorldState};
use crate::error::{Error, Result};

/// Level boundaries derived from the minimum legal requirement `minimum`
/// and the desired level `desired` (both litres per inhabitant).
///
/// Level 0 covers `x <= red`, level `H + 1` covers `x > green`, and the
/// `H` hidden levels split `(red, green]` into equal half-open intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelParams {
    pub minimum: f64,
    pub desired: f64,
    pub hidden_levels: u8,
    /// Overrides the derived red boundary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub red_bound: Option<f64>,
    /// Overrides the derived green boundary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub green_bound: Option<f64>,
}

impl Default for LevelParams {
    fn default() -> Self {
        Self {
            minimum: 100.0,
            desired: 350.0,
            hidden_levels: 5,
            red_bound: None,
            green_bound: None,
        }
    }
}

impl LevelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.minimum > 0.0 && self.minimum < self.desired && self.desired.is_finite()) {
            return Err(Error::InvalidConfig(
                "level params need 0 < minimum < desired".into(),
            ));
        }
        if self.hidden_levels == 0 || self.hidden_levels > 250 {
            return Err(Error::InvalidConfig(
                "hidden_levels must lie in 1..=250".into(),
            ));
        }
        if !(self.red_bound() >= 0.0 && self.red_bound() < self.green_bound()) {
            return Err(Error::InvalidConfig(
                "level boundaries need 0 <= red < green".into(),
            ));
        }
        Ok(())
    }

    /// `max(0, m - (M + m) / 2)` unless overridden.
    pub fn red_bound(&self) -> f64 {
        self.red_bound
            .unwrap_or_else(|| (self.minimum - (self.desired + self.minimum) / 2.0).max(0.0))
    }

    /// `M + (M + m) / 2` unless overridden.
    pub fn green_bound(&self) -> f64 {
        self.green_bound
            .unwrap_or(self.desired + (self.desired + self.minimum) / 2.0)
    }

    /// Index of the top (green) level.
    pub fn green_level(&self) -> u8 {
        self.hidden_levels + 1
    }

    pub fn level_of(&self, x: f64) -> u8 {
        let red = self.red_bound();
        let green = self.green_bound();
        if x <= red {
            0
        } else if x > green {
            self.green_level()
        } else {
            let width = (green - red) / f64::from(self.hidden_levels);
            let k = ((x - red) / width).ceil();
            k.clamp(1.0, f64::from(self.hidden_levels)) as u8
        }
    }

    pub fn levelise(&self, state: &WorldState) -> LevelisedState {
        LevelisedState {
            levels: state.levels.iter().map(|&x| self.level_of(x)).collect(),
            position: state.position,
            load: state.load,
        }
    }
}

/// Q-table key: per-village level indices, truck position and load.
///
/// Text form is `"l0,l1,...|p|c"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LevelisedState {
    pub levels: Vec<u8>,
    pub position: Node,
    pub load: u64,
}

impl fmt::Display for LevelisedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.levels.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "|{}|{}", self.position, self.load)
    }
}

impl FromStr for LevelisedState {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut parts = s.split('|');
        let (Some(levels), Some(position), Some(load), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(format!("state key {s:?} is not of the form \"levels|p|c\""));
        };
        let levels = levels
            .split(',')
            .map(|l| {
                l.trim()
                    .parse::<u8>()
                    .map_err(|e| format!("bad level in {s:?}: {e}"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(LevelisedState {
            levels,
            position: position.parse()?,
            load: load
                .trim()
                .parse()
                .map_err(|e| format!("bad load in {s:?}: {e}"))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_boundaries() {
        let p = LevelParams::default();
        assert_eq!(p.red_bound(), 0.0);
        assert_eq!(p.green_bound(), 575.0);
        assert_eq!(p.green_level(), 6);
    }

    #[test]
    fn default_levels() {
        let p = LevelParams::default();
        assert_eq!(p.level_of(0.0), 0);
        assert_eq!(p.level_of(1e-9), 1);
        assert_eq!(p.level_of(115.0), 1);
        assert_eq!(p.level_of(120.0), 2);
        assert_eq!(p.level_of(230.0), 2);
        assert_eq!(p.level_of(575.0), 5);
        assert_eq!(p.level_of(575.1), 6);
        assert_eq!(p.level_of(600.0), 6);
    }

    #[test]
    fn overridden_bounds() {
        let p = LevelParams {
            red_bound: Some(50.0),
            green_bound: Some(550.0),
            ..LevelParams::default()
        };
        p.validate().unwrap();
        assert_eq!(p.level_of(50.0), 0);
        assert_eq!(p.level_of(150.0), 1);
        assert_eq!(p.level_of(150.5), 2);
    }

    #[test]
    fn validation() {
        assert!(LevelParams::default().validate().is_ok());
        let bad = LevelParams {
            minimum: 400.0,
            ..LevelParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = LevelParams {
            hidden_levels: 0,
            ..LevelParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn key_text_form() {
        let k = LevelisedState {
            levels: vec![0, 3, 2, 6],
            position: Node::Source,
            load: 60_000,
        };
        assert_eq!(k.to_string(), "0,3,2,6|-1|60000");
        assert_eq!("0,3,2,6|-1|60000".parse::<LevelisedState>().unwrap(), k);
        assert!("0,3|1".parse::<LevelisedState>().is_err());
        assert!("0,3|1|5|6".parse::<LevelisedState>().is_err());
    }

    proptest! {
        #[test]
        fn levels_in_range_and_monotone(a in 0.0f64..2000.0, b in 0.0f64..2000.0) {
            let p = LevelParams::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(p.level_of(hi) <= 6);
            prop_assert!(p.level_of(lo) <= p.level_of(hi));
        }
    }
}
