//! Two-valued measurement outcomes.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A spin measurement outcome, +1 or -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    /// The outcome as a signed integer, +1 or -1.
    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    /// The outcome as a float, +1.0 or -1.0.
    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    /// The opposite outcome.
    pub fn flipped(self) -> Outcome {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }

    /// Sign of `v` with the convention `sign(0) = +1`.
    pub fn from_sign(v: f64) -> Outcome {
        if v >= 0.0 {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    /// Product of two outcomes as a signed integer, +1 or -1.
    pub fn product(self, other: Outcome) -> i8 {
        self.value() * other.value()
    }
}

impl TryFrom<i8> for Outcome {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self, Error> {
        match v {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            other => Err(Error::InvalidOutcome(other)),
        }
    }
}

impl From<Outcome> for i8 {
    fn from(o: Outcome) -> i8 {
        o.value()
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_round_trip() {
        assert_eq!(Outcome::try_from(1).unwrap(), Outcome::Plus);
        assert_eq!(Outcome::try_from(-1).unwrap(), Outcome::Minus);
        assert_eq!(Outcome::try_from(0), Err(Error::InvalidOutcome(0)));
        assert_eq!(Outcome::try_from(2), Err(Error::InvalidOutcome(2)));
        assert_eq!(i8::from(Outcome::Plus), 1);
        assert_eq!(i8::from(Outcome::Minus), -1);
    }

    #[test]
    fn sign_zero_is_plus() {
        assert_eq!(Outcome::from_sign(0.0), Outcome::Plus);
        assert_eq!(Outcome::from_sign(-0.0), Outcome::Plus);
        assert_eq!(Outcome::from_sign(1e-300), Outcome::Plus);
        assert_eq!(Outcome::from_sign(-1e-300), Outcome::Minus);
    }

    #[test]
    fn products() {
        assert_eq!(Outcome::Plus.product(Outcome::Plus), 1);
        assert_eq!(Outcome::Plus.product(Outcome::Minus), -1);
        assert_eq!(Outcome::Minus.product(Outcome::Minus), 1);
        assert_eq!(Outcome::Minus.flipped(), Outcome::Plus);
    }

    #[test]
    fn serde_as_integer() {
        let json = serde_json::to_string(&Outcome::Minus).unwrap();
        assert_eq!(json, "-1");
        let back: Outcome = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Outcome::Minus);
        assert!(serde_json::from_str::<Outcome>("0").is_err());
    }
}
