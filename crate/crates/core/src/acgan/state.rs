use crate::acgan::config::TrainConfig;
use crate::acgan::latent::{sample_latent, LatentBatch};
use crate::acgan::loss::{soft_sigmoid, DiscriminatorOutput};
use crate::acgan::objective::{discriminator_objective, generator_objective};
use crate::acgan::spec::{DiscriminatorSpec, GeneratorSpec};
use crate::data::{batch_at, Batch, LabeledImageDataset};
use crate::error::{Error, Result};
use crate::model::{Binding, Network, Pass};
use crate::nn::{adam_step, AdamState, Graph, Mode, RngStream, Tensor};

/// Largest f32 below 1; sampled pixels are clamped to `±PIXEL_LIMIT`.
pub const PIXEL_LIMIT: f32 = 1.0 - f32::EPSILON / 2.0;

/// Loss values of one training iteration, measured before the updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    /// Iteration count after this step.
    pub iteration: u64,
    /// `L_S` and `L_C` seen by the last discriminator update.
    pub d_source: f64,
    pub d_class: f64,
    /// Generated-data terms seen by the generator update.
    pub g_source_fake: f64,
    pub g_class_fake: f64,
}

/// Complete training state of a generator/discriminator pair.
///
/// All randomness flows from `rng`, which is never advanced: iteration `i`
/// draws from `rng.split("step/i")` and reads minibatches through
/// `rng.split("data")`. Resuming a saved state therefore replays exactly the
/// same streams as an uninterrupted run.
#[derive(Debug, Clone, PartialEq)]
pub struct AcGan {
    pub config: TrainConfig,
    pub generator: Network<f32>,
    pub discriminator: Network<f32>,
    pub g_opt: AdamState<f32>,
    pub d_opt: AdamState<f32>,
    pub iteration: u64,
    pub rng: RngStream,
}

impl AcGan {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let rng = RngStream::new(config.seed);
        let gspec = Self::generator_spec_for(&config)?;
        let dspec = Self::discriminator_spec_for(&config)?;
        let generator = Network::new(gspec.stack, "generator", &mut rng.split("init/generator"))?;
        let discriminator =
            Network::new(dspec.stack, "discriminator", &mut rng.split("init/discriminator"))?;
        let g_opt = AdamState::new(config.g_adam, &generator.params)?;
        let d_opt = AdamState::new(config.d_adam, &discriminator.params)?;
        Ok(Self {
            config,
            generator,
            discriminator,
            g_opt,
            d_opt,
            iteration: 0,
            rng,
        })
    }

    fn generator_spec_for(c: &TrainConfig) -> Result<GeneratorSpec> {
        GeneratorSpec::from_arch(c.arch, c.width_divisor, c.z_dim, c.num_classes, c.channels, c.resolution)
    }

    fn discriminator_spec_for(c: &TrainConfig) -> Result<DiscriminatorSpec> {
        DiscriminatorSpec::from_arch(c.arch, c.width_divisor, c.num_classes, c.channels, c.resolution)
    }

    pub fn generator_spec(&self) -> Result<GeneratorSpec> {
        Self::generator_spec_for(&self.config)
    }

    pub fn discriminator_spec(&self) -> Result<DiscriminatorSpec> {
        Self::discriminator_spec_for(&self.config)
    }

    pub fn check_dataset(&self, ds: &LabeledImageDataset) -> Result<()> {
        let c = &self.config;
        if ds.num_classes() != c.num_classes {
            return Err(Error::Config(format!(
                "dataset has {} classes, configuration expects {}",
                ds.num_classes(),
                c.num_classes
            )));
        }
        if ds.image_shape() != [c.channels, c.resolution, c.resolution] {
            return Err(Error::Config(format!(
                "dataset images are {:?}, configuration expects {:?}",
                ds.image_shape(),
                [c.channels, c.resolution, c.resolution]
            )));
        }
        if ds.len() < c.batch_size {
            return Err(Error::Config(format!(
                "dataset has {} images, fewer than batch_size {}",
                ds.len(),
                c.batch_size
            )));
        }
        Ok(())
    }

    /// Generated images from the generator in train mode, without touching
    /// its running statistics.
    fn fakes(&self, latent: &LatentBatch) -> Result<Tensor<f32>> {
        let mut g = Graph::new();
        let x = g.input_owned(latent.generator_input());
        let mut scratch = self.generator.buffers.clone();
        let mut unused = RngStream::new(0);
        let mut pass = Pass {
            mode: Mode::Train,
            binding: Binding::Frozen,
            noise_sigma: 0.0,
            rng: &mut unused,
        };
        let y = self.generator.forward_with(&mut g, x, &mut scratch, &mut pass)?;
        Ok(g.tensor(y))
    }

    /// One Adam ascent step on `L_S + L_C` for the discriminator. Returns
    /// `(L_S, L_C)` before the update. The generator is not modified.
    pub fn discriminator_step(&mut self, real: &Batch, rng: &mut RngStream) -> Result<(f64, f64)> {
        let n = real.labels.len();
        if n != self.config.batch_size {
            return Err(Error::invalid(format!(
                "real batch of {n}, batch_size is {}",
                self.config.batch_size
            )));
        }
        let c = &self.config;
        let latent = sample_latent(n, c.num_classes, c.z_dim, None, &mut rng.split("latent"))?;
        let fake = self.fakes(&latent)?;
        let mut g = Graph::new();
        let xr = g.input(&real.images);
        let xf = g.input_owned(fake);
        let mut buffers = self.discriminator.buffers.clone();
        let terms = discriminator_objective(
            &mut g,
            &self.discriminator,
            &self.discriminator.params,
            xr,
            &real.labels,
            xf,
            &latent.labels,
            &mut buffers,
            c.noise_sigma,
            &mut rng.split("forward"),
        )?;
        let (ls, lc) = (g.value(terms.source)[0] as f64, g.value(terms.class)[0] as f64);
        if !(ls.is_finite() && lc.is_finite()) {
            return Err(Error::NonFinite(format!(
                "discriminator loss at iteration {}: L_S = {ls}, L_C = {lc}",
                self.iteration
            )));
        }
        g.backward(terms.loss)?;
        let mut params = self.discriminator.params.clone();
        g.write_param_grads(&mut params)?;
        let mut opt = self.d_opt.clone();
        adam_step(&mut params, &mut opt)?;
        ensure_finite_params(&params, "discriminator", self.iteration)?;
        self.discriminator.params = params;
        self.discriminator.buffers = buffers;
        self.d_opt = opt;
        Ok((ls, lc))
    }

    /// One Adam step for the generator on its surrogate objective. Returns
    /// the generated-data terms of `L_S` and `L_C` before the update. The
    /// discriminator is not modified.
    pub fn generator_step(&mut self, rng: &mut RngStream) -> Result<(f64, f64)> {
        let c = &self.config;
        let latent = sample_latent(
            c.batch_size,
            c.num_classes,
            c.z_dim,
            None,
            &mut rng.split("latent"),
        )?;
        let mut g = Graph::new();
        let mut g_buffers = self.generator.buffers.clone();
        let mut d_scratch = self.discriminator.buffers.clone();
        let terms = generator_objective(
            &mut g,
            &self.generator,
            &self.generator.params,
            &self.discriminator,
            &latent,
            &mut g_buffers,
            &mut d_scratch,
            c.generator_loss,
            c.noise_sigma,
            &mut rng.split("forward"),
        )?;
        let (ls, lc) = (
            g.value(terms.source_fake)[0] as f64,
            g.value(terms.class_fake)[0] as f64,
        );
        if !(ls.is_finite() && lc.is_finite()) {
            return Err(Error::NonFinite(format!(
                "generator loss at iteration {}: {ls}, {lc}",
                self.iteration
            )));
        }
        g.backward(terms.loss)?;
        let mut params = self.generator.params.clone();
        g.write_param_grads(&mut params)?;
        let mut opt = self.g_opt.clone();
        adam_step(&mut params, &mut opt)?;
        ensure_finite_params(&params, "generator", self.iteration)?;
        self.generator.params = params;
        self.generator.buffers = g_buffers;
        self.g_opt = opt;
        Ok((ls, lc))
    }

    /// `d_steps` discriminator updates followed by one generator update.
    /// On error the state is left exactly as before the call.
    pub fn train_iteration(&mut self, ds: &LabeledImageDataset) -> Result<StepLog> {
        let before = self.clone();
        let result = self.train_iteration_inner(ds);
        if result.is_err() {
            *self = before;
        }
        result
    }

    fn train_iteration_inner(&mut self, ds: &LabeledImageDataset) -> Result<StepLog> {
        let it = self.iteration;
        let step = self.rng.split(&format!("step/{it}"));
        let data = self.rng.split("data");
        let mut d_losses = (0.0, 0.0);
        for j in 0..self.config.d_steps {
            let index = it * self.config.d_steps as u64 + j as u64;
            let batch = batch_at(ds, self.config.batch_size, &data, index)?;
            d_losses = self.discriminator_step(&batch, &mut step.split(&format!("d/{j}")))?;
        }
        let g_losses = self.generator_step(&mut step.split("g"))?;
        self.iteration += 1;
        Ok(StepLog {
            iteration: self.iteration,
            d_source: d_losses.0,
            d_class: d_losses.1,
            g_source_fake: g_losses.0,
            g_class_fake: g_losses.1,
        })
    }

    /// Trains until `config.iterations`, calling `observer` after every
    /// iteration. A failing iteration aborts with the state of the last
    /// completed one.
    pub fn train<F>(&mut self, ds: &LabeledImageDataset, mut observer: F) -> Result<Vec<StepLog>>
    where
        F: FnMut(&AcGan, &StepLog) -> Result<()>,
    {
        self.check_dataset(ds)?;
        let mut log = Vec::new();
        while self.iteration < self.config.iterations {
            let entry = self.train_iteration(ds)?;
            observer(self, &entry)?;
            log.push(entry);
        }
        Ok(log)
    }

    /// Generator images for `latent`. In eval mode batch norm uses running
    /// statistics and rows are independent; train mode normalizes with the
    /// statistics of this batch without storing them.
    pub fn sample(&self, latent: &LatentBatch, mode: Mode) -> Result<Tensor<f32>> {
        generate(&self.generator, latent, mode, self.config.z_dim, self.config.num_classes)
    }

    /// Discriminator heads for `images` in eval mode.
    pub fn discriminate(&self, images: &Tensor<f32>) -> Result<DiscriminatorOutput<f32>> {
        let mut g = Graph::new();
        let x = g.input(images);
        let mut scratch = self.discriminator.buffers.clone();
        let mut unused = RngStream::new(0);
        let mut pass = Pass {
            mode: Mode::Eval,
            binding: Binding::Frozen,
            noise_sigma: 0.0,
            rng: &mut unused,
        };
        let logits = self.discriminator.forward_with(&mut g, x, &mut scratch, &mut pass)?;
        let head = soft_sigmoid(&mut g, logits)?;
        Ok(DiscriminatorOutput::from_graph(&g, head))
    }
}

fn ensure_finite_params(params: &crate::nn::ParamSet<f32>, who: &str, it: u64) -> Result<()> {
    for (name, t) in params.iter() {
        if !t.all_finite() {
            return Err(Error::NonFinite(format!("{who} parameter {name} after iteration {it}")));
        }
    }
    Ok(())
}

const EVAL_CHUNK: usize = 128;

/// Runs a generator network on `latent`, clamping pixels strictly inside
/// `(−1, 1)`. Eval mode is evaluated in chunks.
pub fn generate(
    gen: &Network<f32>,
    latent: &LatentBatch,
    mode: Mode,
    z_dim: usize,
    num_classes: usize,
) -> Result<Tensor<f32>> {
    if latent.z_dim() != z_dim || latent.num_classes() != num_classes {
        return Err(Error::shape(format!(
            "latent width {}+{} does not match generator {z_dim}+{num_classes}",
            latent.z_dim(),
            latent.num_classes()
        )));
    }
    let input = latent.generator_input::<f32>();
    let n = latent.len();
    let chunk = if mode == Mode::Eval { EVAL_CHUNK } else { n };
    let mut parts = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let mut g = Graph::new();
        let x = g.input_owned(input.slice_outer(start, end)?);
        let mut scratch = gen.buffers.clone();
        let mut unused = RngStream::new(0);
        let mut pass = Pass {
            mode,
            binding: Binding::Frozen,
            noise_sigma: 0.0,
            rng: &mut unused,
        };
        let y = gen.forward_with(&mut g, x, &mut scratch, &mut pass)?;
        let mut t = g.tensor(y);
        for v in t.data_mut() {
            *v = v.clamp(-PIXEL_LIMIT, PIXEL_LIMIT);
        }
        parts.push(t);
        start = end;
    }
    Tensor::stack_outer(&parts)
}
