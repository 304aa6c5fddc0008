use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::shape;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Weight,
    Bias,
}

/// One named tensor inside a [`ParamVector`].
///
/// Names are stable across architectures (`"fusion.2.audio.0.w"`), which is
/// what lets crossover match blocks of two parents with different shapes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub kind: BlockKind,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl ParamBlock {
    #[inline]
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    pub fn same_shape(&self, other: &ParamBlock) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.kind == other.kind
    }
}

/// A flat parameter vector with its block layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Vec<ParamBlock>,
}

/// Checks that offsets start at 0, are contiguous and cover `len` values.
pub(crate) fn check_layout(layout: &[ParamBlock], len: usize) -> Result<()> {
    let mut next = 0;
    for block in layout {
        if block.offset != next {
            return Err(shape(format!(
                "block {} starts at {} but expected {}",
                block.name, block.offset, next
            )));
        }
        if block.is_empty() {
            return Err(shape(format!("block {} is empty", block.name)));
        }
        next += block.len();
    }
    if next != len {
        return Err(shape(format!("layout covers {next} values but vector holds {len}")));
    }
    Ok(())
}

/// Assigns contiguous offsets to `(name, kind, rows, cols)` entries.
pub(crate) fn build_layout<I>(entries: I) -> Vec<ParamBlock>
where
    I: IntoIterator<Item = (String, BlockKind, usize, usize)>,
{
    let mut offset = 0;
    entries
        .into_iter()
        .map(|(name, kind, rows, cols)| {
            let block = ParamBlock { name, kind, rows, cols, offset };
            offset += rows * cols;
            block
        })
        .collect()
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: Vec<ParamBlock>) -> Result<Self> {
        check_layout(&layout, values.len())?;
        Ok(Self { values, layout })
    }

    pub fn zeros(layout: Vec<ParamBlock>) -> Self {
        let len = layout.last().map_or(0, |b| b.offset + b.len());
        Self { values: alloc::vec![0.0; len], layout }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layout(&self) -> &[ParamBlock] {
        &self.layout
    }

    pub fn block(&self, name: &str) -> Option<&ParamBlock> {
        self.layout.iter().find(|b| b.name == name)
    }

    pub fn block_values(&self, block: &ParamBlock) -> &[f64] {
        &self.values[block.range()]
    }

    /// Errors unless `other` has exactly the same layout.
    pub fn check_same_layout(&self, other: &ParamVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(shape("parameter layouts differ"));
        }
        Ok(())
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn layout() -> Vec<ParamBlock> {
        build_layout([
            ("a.w".to_string(), BlockKind::Weight, 2, 3),
            ("a.b".to_string(), BlockKind::Bias, 2, 1),
        ])
    }

    #[test]
    fn layout_offsets_are_contiguous() {
        let l = layout();
        assert_eq!(l[0].offset, 0);
        assert_eq!(l[1].offset, 6);
        assert!(ParamVector::new(alloc::vec![0.0; 8], l.clone()).is_ok());
        assert!(matches!(ParamVector::new(alloc::vec![0.0; 7], l), Err(crate::Error::Shape(_))));
    }

    #[test]
    fn gap_in_layout_is_rejected() {
        let mut l = layout();
        l[1].offset = 7;
        assert!(ParamVector::new(alloc::vec![0.0; 9], l).is_err());
    }
}
