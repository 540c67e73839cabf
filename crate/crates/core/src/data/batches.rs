use crate::data::LabeledImageDataset;
use crate::error::{Error, Result};
use crate::nn::{RngStream, Tensor};

/// Maps an 8-bit pixel to `x / 127.5 − 1` (0 → −1.0, 255 → 1.0).
#[inline]
pub fn pixel_to_unit(p: u8) -> f32 {
    p as f32 / 127.5 - 1.0
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub images: Tensor<f32>,
    pub labels: Vec<usize>,
}

fn epoch_order(n: usize, rng: &RngStream, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.split(&format!("epoch/{epoch}")).shuffle(&mut order);
    order
}

/// The `index`-th batch of the stream [`MiniBatches`] would produce, without
/// iterating to it.
pub fn batch_at(
    ds: &LabeledImageDataset,
    batch_size: usize,
    rng: &RngStream,
    index: u64,
) -> Result<Batch> {
    if batch_size == 0 || batch_size > ds.len() {
        return Err(Error::invalid(format!(
            "batch size {batch_size} must be in 1..={}",
            ds.len()
        )));
    }
    let per_epoch = (ds.len() / batch_size) as u64;
    let epoch = index / per_epoch;
    let pos = (index % per_epoch) as usize;
    let order = epoch_order(ds.len(), rng, epoch);
    let indices = order[pos * batch_size..(pos + 1) * batch_size].to_vec();
    Ok(Batch {
        images: ds.images(&indices),
        labels: indices.iter().map(|&i| ds.labels[i] as usize).collect(),
        indices,
    })
}

/// Deterministic stream of shuffled minibatches.
///
/// Each epoch is a fresh uniform permutation drawn from a child of `rng`
/// named after the epoch number; the incomplete trailing batch of every
/// epoch is dropped so all batches have the same size.
#[derive(Debug)]
pub struct MiniBatches<'a> {
    ds: &'a LabeledImageDataset,
    batch_size: usize,
    rng: RngStream,
    epochs: u64,
    epoch: u64,
    pos: usize,
    order: Vec<usize>,
}

impl<'a> MiniBatches<'a> {
    pub fn new(
        ds: &'a LabeledImageDataset,
        batch_size: usize,
        rng: &RngStream,
        epochs: u64,
    ) -> Result<Self> {
        if batch_size == 0 || batch_size > ds.len() {
            return Err(Error::invalid(format!(
                "batch size {batch_size} must be in 1..={}",
                ds.len()
            )));
        }
        Ok(Self {
            ds,
            batch_size,
            rng: rng.clone(),
            epochs,
            epoch: 0,
            pos: 0,
            order: epoch_order(ds.len(), rng, 0),
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.ds.len() / self.batch_size
    }
}

impl Iterator for MiniBatches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.epoch >= self.epochs {
            return None;
        }
        if self.pos + self.batch_size > self.ds.len() {
            self.epoch += 1;
            self.pos = 0;
            if self.epoch >= self.epochs {
                return None;
            }
            self.order = epoch_order(self.ds.len(), &self.rng, self.epoch);
        }
        let indices = self.order[self.pos..self.pos + self.batch_size].to_vec();
        self.pos += self.batch_size;
        Some(Batch {
            images: self.ds.images(&indices),
            labels: indices.iter().map(|&i| self.ds.labels[i] as usize).collect(),
            indices,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SplitTag;

    fn ds(n: usize) -> LabeledImageDataset {
        LabeledImageDataset::new(
            (1, 2, 2),
            (0..n * 4).map(|i| (i % 256) as u8).collect(),
            (0..n).map(|i| (i % 2) as u16).collect(),
            vec!["a".into(), "b".into()],
            SplitTag::Train,
        )
        .unwrap()
    }

    #[test]
    fn pixel_mapping() {
        assert_eq!(pixel_to_unit(0), -1.0);
        assert_eq!(pixel_to_unit(255), 1.0);
        assert!((pixel_to_unit(254) - 0.99216).abs() < 1e-5);
    }

    #[test]
    fn full_batch_is_permutation() {
        let d = ds(10);
        let rng = RngStream::new(3);
        let batches: Vec<Batch> = MiniBatches::new(&d, 10, &rng, 1).unwrap().collect();
        assert_eq!(batches.len(), 1);
        let mut idx = batches[0].indices.clone();
        idx.sort();
        assert_eq!(idx, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn epoch_visits_each_retained_index_once_and_drops_tail() {
        let d = ds(11);
        let rng = RngStream::new(4);
        let batches: Vec<Batch> = MiniBatches::new(&d, 3, &rng, 2).unwrap().collect();
        assert_eq!(batches.len(), 6);
        let mut first: Vec<usize> = batches[..3].iter().flat_map(|b| b.indices.clone()).collect();
        first.sort();
        first.dedup();
        assert_eq!(first.len(), 9);
    }

    #[test]
    fn deterministic_and_random_access_agrees() {
        let d = ds(12);
        let rng = RngStream::new(5);
        let a: Vec<Vec<usize>> = MiniBatches::new(&d, 4, &rng, 3).unwrap().map(|b| b.indices).collect();
        let b: Vec<Vec<usize>> = MiniBatches::new(&d, 4, &rng, 3).unwrap().map(|b| b.indices).collect();
        assert_eq!(a, b);
        for (i, idx) in a.iter().enumerate() {
            assert_eq!(&batch_at(&d, 4, &rng, i as u64).unwrap().indices, idx);
        }
    }

    #[test]
    fn oversized_batch_rejected() {
        let d = ds(4);
        assert!(MiniBatches::new(&d, 5, &RngStream::new(0), 1).is_err());
    }
}
