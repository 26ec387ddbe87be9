use std::collections::HashMap;

use super::{DataDirection, EaxcId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Plane {
    Control,
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceVerdict {
    InOrder,
    /// `n` frames were skipped; the tracker resynchronized past them.
    Gap(u8),
    Duplicate,
}

/// Per-stream eCPRI sequence continuity.
///
/// The first frame of a stream establishes its sequence. A frame ahead of
/// the expected id by less than half the 8-bit space is a gap; one behind
/// by up to half the space is a duplicate.
#[derive(Debug, Default, Clone)]
pub struct SequenceTracker {
    expected: HashMap<(EaxcId, DataDirection, Plane), u8>,
}

impl SequenceTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn track(&mut self, eaxc: EaxcId, direction: DataDirection, plane: Plane, seq_id: u8) -> SequenceVerdict {
        let expected = match self.expected.get_mut(&(eaxc, direction, plane)) {
            Some(e) => e,
            None => {
                self.expected.insert((eaxc, direction, plane), seq_id.wrapping_add(1));
                return SequenceVerdict::InOrder;
            }
        };
        let ahead = seq_id.wrapping_sub(*expected);
        if ahead == 0 {
            *expected = seq_id.wrapping_add(1);
            SequenceVerdict::InOrder
        } else if ahead < 128 {
            *expected = seq_id.wrapping_add(1);
            SequenceVerdict::Gap(ahead)
        } else {
            SequenceVerdict::Duplicate
        }
    }

    pub fn reset(&mut self) {
        self.expected.clear();
    }
}
