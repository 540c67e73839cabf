use crate::acgan::latent::LatentBatch;
use crate::acgan::state::AcGan;
use crate::error::{Error, Result};
use crate::nn::{Mode, Tensor};

impl AcGan {
    fn latent_rows(&self, rows: &[Vec<f32>], labels: Vec<usize>) -> Result<LatentBatch> {
        let zd = self.config.z_dim;
        if let Some(r) = rows.iter().find(|r| r.len() != zd) {
            return Err(Error::shape(format!("z of width {} for z_dim {zd}", r.len())));
        }
        let z = Tensor::new(&[rows.len(), zd], rows.concat())?;
        LatentBatch::new(z, labels, self.config.num_classes)
    }

    /// Frames for `z = (1 − t)·z_a + t·z_b` at `steps` evenly spaced `t`
    /// from 0 to 1, all with class `class`. Returns `[steps, C, R, R]`.
    pub fn interpolate(
        &self,
        z_a: &[f32],
        z_b: &[f32],
        class: usize,
        steps: usize,
        mode: Mode,
    ) -> Result<Tensor<f32>> {
        if steps < 2 {
            return Err(Error::invalid(format!("interpolation needs >= 2 steps, got {steps}")));
        }
        if z_a.len() != z_b.len() {
            return Err(Error::shape("interpolation endpoints differ in width"));
        }
        let rows: Vec<Vec<f32>> = (0..steps)
            .map(|i| {
                let t = i as f64 / (steps - 1) as f64;
                z_a.iter()
                    .zip(z_b)
                    .map(|(&a, &b)| ((1.0 - t) * a as f64 + t * b as f64) as f32)
                    .collect()
            })
            .collect();
        let latent = self.latent_rows(&rows, vec![class; steps])?;
        self.sample(&latent, mode)
    }

    /// Cell `(i, j)` is the sample for `z_rows[i]` with class `classes[j]`;
    /// cells are returned row-major as `[rows · cols, C, R, R]`.
    pub fn style_grid(&self, z_rows: &[Vec<f32>], classes: &[usize], mode: Mode) -> Result<Tensor<f32>> {
        if z_rows.is_empty() || classes.is_empty() {
            return Err(Error::invalid("style grid needs at least one row and one class"));
        }
        let mut rows = Vec::with_capacity(z_rows.len() * classes.len());
        let mut labels = Vec::with_capacity(rows.capacity());
        for z in z_rows {
            for &c in classes {
                rows.push(z.clone());
                labels.push(c);
            }
        }
        let latent = self.latent_rows(&rows, labels)?;
        self.sample(&latent, mode)
    }
}
