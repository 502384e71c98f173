//! Class-labelled residual vectors.

use crate::error::{bail_arg, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub class_id: usize,
    pub values: Vec<f64>,
}

/// Residual vectors `r = x − p`, each tagged with a 0-based class index.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualDataset {
    dim: usize,
    classes: usize,
    blocks: Vec<Block>,
}

impl ResidualDataset {
    pub fn new(dim: usize, classes: usize, blocks: Vec<Block>) -> Result<Self> {
        if dim == 0 {
            bail_arg!("dataset dimension must be positive");
        }
        if classes == 0 {
            bail_arg!("dataset needs at least one class");
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.class_id >= classes {
                bail_arg!("block {i} has class {} but only {classes} classes exist", b.class_id);
            }
            if b.values.len() != dim {
                bail_arg!("block {i} has length {} but dimension is {dim}", b.values.len());
            }
        }
        Ok(Self { dim, classes, blocks })
    }

    /// Single-class dataset from raw vectors.
    pub fn from_vectors(dim: usize, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let blocks = vectors.into_iter().map(|values| Block { class_id: 0, values }).collect();
        Self::new(dim, 1, blocks)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn vectors_of_class(&self, class_id: usize) -> impl Iterator<Item = &[f64]> + '_ {
        self.blocks
            .iter()
            .filter(move |b| b.class_id == class_id)
            .map(|b| b.values.as_slice())
    }

    pub fn class_count(&self, class_id: usize) -> usize {
        self.blocks.iter().filter(|b| b.class_id == class_id).count()
    }

    /// Appends another dataset's blocks with their class ids shifted by `self.classes()`.
    pub fn concat(mut self, other: ResidualDataset) -> Result<Self> {
        if other.dim != self.dim {
            bail_arg!("cannot concatenate datasets of dimension {} and {}", self.dim, other.dim);
        }
        let offset = self.classes;
        self.blocks.extend(other.blocks.into_iter().map(|b| Block {
            class_id: b.class_id + offset,
            values: b.values,
        }));
        self.classes += other.classes;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_blocks() {
        let ok = ResidualDataset::new(2, 2, vec![Block { class_id: 1, values: vec![0.0, 1.0] }]);
        assert!(ok.is_ok());
        assert!(ResidualDataset::new(2, 1, vec![Block { class_id: 1, values: vec![0.0, 1.0] }]).is_err());
        assert!(ResidualDataset::new(2, 1, vec![Block { class_id: 0, values: vec![0.0] }]).is_err());
    }

    #[test]
    fn concat_shifts_classes() {
        let a = ResidualDataset::from_vectors(1, vec![vec![1.0]]).unwrap();
        let b = ResidualDataset::from_vectors(1, vec![vec![2.0]]).unwrap();
        let c = a.concat(b).unwrap();
        assert_eq!(c.classes(), 2);
        assert_eq!(c.vectors_of_class(1).collect::<Vec<_>>(), vec![&[2.0][..]]);
    }
}
