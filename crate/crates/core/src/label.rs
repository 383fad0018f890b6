use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A class label. Labels are 1-based, so a `K`-class problem uses `1..=K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub usize);

impl Label {
    pub fn from_index(index: usize) -> Self {
        Label(index + 1)
    }

    /// Zero-based position of the label.
    pub fn index(self) -> usize {
        debug_assert!(self.0 >= 1);
        self.0 - 1
    }

    pub fn check(self, count: usize) -> Result<Self> {
        if self.0 == 0 || self.0 > count {
            Err(Error::LabelOutOfRange {
                label: self.0,
                count,
            })
        } else {
            Ok(self)
        }
    }

    pub fn all(count: usize) -> impl Iterator<Item = Label> {
        (1..=count).map(Label)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<usize> for Label {
    fn from(v: usize) -> Self {
        Label(v)
    }
}

pub fn labels(values: &[usize]) -> Vec<Label> {
    values.iter().copied().map(Label).collect()
}
