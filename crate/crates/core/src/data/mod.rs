//! Labeled image datasets: synthetic shapes, the "ACGD" container, class
//! splits, and deterministic minibatching.

mod batches;
mod container;
mod shapes;
mod split;

pub use batches::{batch_at, pixel_to_unit, Batch, MiniBatches};
pub use container::{load_dataset, save_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use shapes::{generate_shapes, ShapeKind, ShapesConfig};
pub use split::{partition_classes, ClassSplit};

use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    HeldOut,
}

/// `N` images of identical `C × H × W` shape with 8-bit pixels and class
/// labels below `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageDataset {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<u16>,
    pub class_names: Vec<String>,
    pub split: SplitTag,
}

impl LabeledImageDataset {
    pub fn new(
        (channels, height, width): (usize, usize, usize),
        pixels: Vec<u8>,
        labels: Vec<u16>,
        class_names: Vec<String>,
        split: SplitTag,
    ) -> Result<Self> {
        let ds = Self {
            channels,
            height,
            width,
            pixels,
            labels,
            class_names,
            split,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.is_empty() {
            return Err(Error::invalid("dataset has no images"));
        }
        if self.channels == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::invalid("dataset image shape has a zero dimension"));
        }
        if self.pixels.len() != self.labels.len() * self.image_len() {
            return Err(Error::Format(format!(
                "{} pixels do not hold {} images of {}x{}x{}",
                self.pixels.len(),
                self.labels.len(),
                self.channels,
                self.height,
                self.width
            )));
        }
        let k = self.num_classes();
        if let Some(bad) = self.labels.iter().find(|&&l| l as usize >= k) {
            return Err(Error::invalid(format!("label {bad} >= class count {k}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn image_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn image_shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn image_bytes(&self, i: usize) -> &[u8] {
        &self.pixels[i * self.image_len()..][..self.image_len()]
    }

    /// Image `i` as floats in `[-1, 1]`.
    pub fn image(&self, i: usize) -> Tensor<f32> {
        let data = self.image_bytes(i).iter().map(|&p| pixel_to_unit(p)).collect();
        Tensor::new(&self.image_shape(), data).expect("dataset shape is consistent")
    }

    /// Images at `indices` as an `[n, C, H, W]` float batch.
    pub fn images(&self, indices: &[usize]) -> Tensor<f32> {
        let mut data = Vec::with_capacity(indices.len() * self.image_len());
        for &i in indices {
            data.extend(self.image_bytes(i).iter().map(|&p| pixel_to_unit(p)));
        }
        let [c, h, w] = self.image_shape();
        Tensor::new(&[indices.len(), c, h, w], data).expect("dataset shape is consistent")
    }

    pub fn all_images(&self) -> Tensor<f32> {
        self.images(&(0..self.len()).collect::<Vec<_>>())
    }

    pub fn labels_usize(&self) -> Vec<usize> {
        self.labels.iter().map(|&l| l as usize).collect()
    }

    /// Indices of images with label `class`.
    pub fn indices_of_class(&self, class: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l as usize == class)
            .map(|(i, _)| i)
            .collect()
    }

    /// Sub-dataset of the images whose label is in `classes`, relabeled to
    /// positions within `classes`.
    pub fn restrict_classes(&self, classes: &[usize]) -> Result<Self> {
        let mut pixels = Vec::new();
        let mut labels = Vec::new();
        for i in 0..self.len() {
            if let Some(pos) = classes.iter().position(|&c| c == self.labels[i] as usize) {
                pixels.extend_from_slice(self.image_bytes(i));
                labels.push(pos as u16);
            }
        }
        let names = classes
            .iter()
            .map(|&c| {
                self.class_names
                    .get(c)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("class {c} not in dataset")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            (self.channels, self.height, self.width),
            pixels,
            labels,
            names,
            self.split,
        )
    }
}
