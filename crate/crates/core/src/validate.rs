//! Frame validation and single-gap repair.

use crate::error::{Error, Result, Violation, ViolationKind};
use crate::types::{HistoryWindow, Variate};

#[derive(Debug, Clone, PartialEq)]
pub struct Repair {
    pub column: &'static str,
    pub index: usize,
    pub value: f64,
}

/// A frame that passed validation, plus the repairs applied to get there.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub frame: HistoryWindow,
    pub repairs: Vec<Repair>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.repairs.is_empty()
    }
}

/// Check ranges and repair isolated missing samples (NaN).
///
/// A single missing sample is linearly interpolated for continuous columns and zero-filled
/// for `precip_mm` and `flood`. Runs of two or more missing samples are reported as gaps.
/// All violations found are returned together.
pub fn validate_frame(frame: &HistoryWindow) -> Result<ValidationReport> {
    let mut out = frame.clone();
    let mut repairs = Vec::new();
    let mut violations = Vec::new();

    for v in Variate::ALL {
        let col = out.column_mut(v);
        let n = col.len();
        let mut i = 0;
        while i < n {
            if col[i].is_infinite() {
                violations.push(Violation {
                    column: v.column_name(),
                    index: i,
                    kind: ViolationKind::NotFinite,
                });
                i += 1;
                continue;
            }
            if !col[i].is_nan() {
                i += 1;
                continue;
            }
            let start = i;
            while i < n && col[i].is_nan() {
                i += 1;
            }
            let len = i - start;
            if len > 1 {
                violations.push(Violation {
                    column: v.column_name(),
                    index: start,
                    kind: ViolationKind::Gap { len },
                });
                continue;
            }
            let left = start.checked_sub(1).map(|k| col[k]).filter(|x| x.is_finite());
            let right = col.get(start + 1).copied().filter(|x| x.is_finite());
            let value = if !v.interpolates() {
                Some(0.0)
            } else {
                match (left, right) {
                    (Some(a), Some(b)) => Some(0.5 * (a + b)),
                    (Some(a), None) | (None, Some(a)) => Some(a),
                    (None, None) => None,
                }
            };
            match value {
                Some(x) => {
                    col[start] = x;
                    repairs.push(Repair {
                        column: v.column_name(),
                        index: start,
                        value: x,
                    });
                }
                None => violations.push(Violation {
                    column: v.column_name(),
                    index: start,
                    kind: ViolationKind::Gap { len: 1 },
                }),
            }
        }

        let (lo, hi) = v.domain();
        for (k, &x) in col.iter().enumerate() {
            if x.is_nan() {
                continue;
            }
            if v == Variate::Flood && x != 0.0 && x != 1.0 {
                violations.push(Violation {
                    column: v.column_name(),
                    index: k,
                    kind: ViolationKind::NonBinary { value: x },
                });
            } else if x.is_finite() && (x < lo || x > hi) {
                violations.push(Violation {
                    column: v.column_name(),
                    index: k,
                    kind: ViolationKind::OutOfRange { value: x, lo, hi },
                });
            }
        }
    }

    if violations.is_empty() {
        Ok(ValidationReport {
            frame: out,
            repairs,
        })
    } else {
        Err(Error::Validation(violations))
    }
}
