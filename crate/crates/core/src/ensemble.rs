//! The world ensemble `(X, P)` and its validity rules.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered world positions, their momenta and a pinned-world mask.
///
/// Fields are public so that callers can build (and then validate) arbitrary
/// states; every potential and integrator entry point checks validity itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldEnsemble {
    pub positions: Vec<f64>,
    pub momenta: Vec<f64>,
    pub pinned: Vec<bool>,
}

/// Outcome of [`WorldEnsemble::validate`]. World indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Validity {
    Ok,
    Empty,
    LengthMismatch { positions: usize, momenta: usize, pinned: usize },
    NonFinite { index: usize },
    /// `x_left >= x_right` for the first such neighbouring pair.
    Disorder { left: usize, right: usize },
}

impl Validity {
    pub fn is_ok(&self) -> bool {
        matches!(self, Validity::Ok)
    }

    pub fn into_result(self) -> Result<()> {
        match self {
            Validity::Ok => Ok(()),
            v => Err(Error::InvalidEnsemble(v)),
        }
    }
}

impl fmt::Display for Validity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Validity::Ok => write!(f, "ok"),
            Validity::Empty => write!(f, "ensemble has no worlds"),
            Validity::LengthMismatch { positions, momenta, pinned } => write!(
                f,
                "length mismatch: {positions} positions, {momenta} momenta, {pinned} pin flags"
            ),
            Validity::NonFinite { index } => write!(f, "non-finite entry at world {index}"),
            Validity::Disorder { left, right } => {
                write!(f, "worlds {left} and {right} are not strictly increasing")
            }
        }
    }
}

impl WorldEnsemble {
    /// Builds an ensemble at rest with no pinned worlds, rejecting invalid input.
    pub fn from_positions(positions: Vec<f64>) -> Result<Self> {
        let n = positions.len();
        Self::new(positions, vec![0.0; n], vec![false; n])
    }

    pub fn new(positions: Vec<f64>, momenta: Vec<f64>, pinned: Vec<bool>) -> Result<Self> {
        let e = Self { positions, momenta, pinned };
        e.validate().into_result()?;
        Ok(e)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn free_count(&self) -> usize {
        self.pinned.iter().filter(|p| !**p).count()
    }

    /// Reports the first violation found, or [`Validity::Ok`].
    pub fn validate(&self) -> Validity {
        let n = self.positions.len();
        if n == 0 {
            return Validity::Empty;
        }
        if self.momenta.len() != n || self.pinned.len() != n {
            return Validity::LengthMismatch {
                positions: n,
                momenta: self.momenta.len(),
                pinned: self.pinned.len(),
            };
        }
        if let Some(i) = self
            .positions
            .iter()
            .zip(&self.momenta)
            .position(|(x, p)| !x.is_finite() || !p.is_finite())
        {
            return Validity::NonFinite { index: i + 1 };
        }
        match first_disorder(&self.positions) {
            Some(i) => Validity::Disorder { left: i + 1, right: i + 2 },
            None => Validity::Ok,
        }
    }

    /// Sub-ensemble of worlds `start..start + len` (0-based range).
    pub fn window(&self, start: usize, len: usize) -> WorldEnsemble {
        let r = start..start + len;
        WorldEnsemble {
            positions: self.positions[r.clone()].to_vec(),
            momenta: self.momenta[r.clone()].to_vec(),
            pinned: self.pinned[r].to_vec(),
        }
    }
}

/// 0-based index `i` of the first pair with `x[i] >= x[i+1]`.
pub(crate) fn first_disorder(xs: &[f64]) -> Option<usize> {
    xs.windows(2).position(|w| !(w[0] < w[1]))
}

pub fn validate_ensemble(e: &WorldEnsemble) -> Validity {
    e.validate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(xs: &[f64]) -> WorldEnsemble {
        WorldEnsemble {
            positions: xs.to_vec(),
            momenta: vec![0.0; xs.len()],
            pinned: vec![false; xs.len()],
        }
    }

    #[test]
    fn ordering_examples() {
        assert_eq!(validate_ensemble(&at(&[0.0, 1.0, 2.0])), Validity::Ok);
        assert_eq!(at(&[0.0, 2.0, 1.0]).validate(), Validity::Disorder { left: 2, right: 3 });
        assert_eq!(at(&[0.0, 0.0, 1.0]).validate(), Validity::Disorder { left: 1, right: 2 });
    }

    #[test]
    fn structural_violations() {
        assert_eq!(at(&[]).validate(), Validity::Empty);
        assert_eq!(at(&[0.0, f64::INFINITY]).validate(), Validity::NonFinite { index: 2 });
        let mut e = at(&[0.0, 1.0]);
        e.momenta.pop();
        assert!(matches!(e.validate(), Validity::LengthMismatch { .. }));
        let mut e = at(&[0.0, 1.0]);
        e.momenta[0] = f64::NAN;
        assert_eq!(e.validate(), Validity::NonFinite { index: 1 });
        assert!(WorldEnsemble::from_positions(vec![1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn accepts_iff_strictly_increasing(xs in proptest::collection::vec(-100f64..100.0, 1..40)) {
            let increasing = xs.windows(2).all(|w| w[0] < w[1]);
            prop_assert_eq!(at(&xs).validate().is_ok(), increasing);
        }
    }
}
