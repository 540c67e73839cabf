//! The two players' objectives as graph builders, generic over precision so
//! the same code drives training (f32) and gradient checks (f64).

use crate::acgan::config::GeneratorLoss;
use crate::acgan::latent::LatentBatch;
use crate::acgan::loss::{class_term_var, soft_sigmoid, source_fake_term, source_real_term, HeadVars};
use crate::error::Result;
use crate::model::{Binding, Network, Pass};
use crate::nn::{BufferSet, Element, Graph, Mode, ParamSet, RngStream, Var};

/// Runs the discriminator on `x` in train mode (dropout and activation noise
/// active) and returns its heads.
#[allow(clippy::too_many_arguments)]
pub fn discriminate<T: Element>(
    g: &mut Graph<T>,
    disc: &Network<T>,
    params: &ParamSet<T>,
    x: Var,
    buffers: &mut BufferSet<T>,
    binding: Binding,
    noise_sigma: f64,
    rng: &mut RngStream,
) -> Result<HeadVars> {
    let mut pass = Pass {
        mode: Mode::Train,
        binding,
        noise_sigma,
        rng,
    };
    let logits = disc.forward_using(params, g, x, buffers, &mut pass)?;
    soft_sigmoid(g, logits)
}

#[derive(Debug, Clone, Copy)]
pub struct DiscriminatorTerms {
    /// `L_S`
    pub source: Var,
    /// `L_C`
    pub class: Var,
    /// `−(L_S + L_C)`, the quantity descended.
    pub loss: Var,
}

/// Discriminator objective on one real and one generated batch. Each batch
/// gets its own forward pass, so batch-norm statistics never mix them.
#[allow(clippy::too_many_arguments)]
pub fn discriminator_objective<T: Element>(
    g: &mut Graph<T>,
    disc: &Network<T>,
    params: &ParamSet<T>,
    real: Var,
    real_labels: &[usize],
    fake: Var,
    fake_labels: &[usize],
    buffers: &mut BufferSet<T>,
    noise_sigma: f64,
    rng: &mut RngStream,
) -> Result<DiscriminatorTerms> {
    let hr = discriminate(g, disc, params, real, buffers, Binding::Tracked, noise_sigma, rng)?;
    let hf = discriminate(g, disc, params, fake, buffers, Binding::Tracked, noise_sigma, rng)?;
    let sr = source_real_term(g, hr.source);
    let sf = source_fake_term(g, hf.source);
    let source = g.add(sr, sf)?;
    let cr = class_term_var(g, hr.class, real_labels)?;
    let cf = class_term_var(g, hf.class, fake_labels)?;
    let class = g.add(cr, cf)?;
    let total = g.add(source, class)?;
    let loss = g.scale(total, -1.0);
    Ok(DiscriminatorTerms { source, class, loss })
}

#[derive(Debug, Clone, Copy)]
pub struct GeneratorTerms {
    /// `[N, C, R, R]` generated images.
    pub images: Var,
    /// `mean ln P(fake | G(z))`, the generated-data part of `L_S`.
    pub source_fake: Var,
    /// `mean ln P(c | G(z))`, the generated-data part of `L_C`.
    pub class_fake: Var,
    pub loss: Var,
}

/// Generator objective: the generator runs in train mode with tracked
/// weights, the discriminator in train mode with frozen weights.
#[allow(clippy::too_many_arguments)]
pub fn generator_objective<T: Element>(
    g: &mut Graph<T>,
    gen: &Network<T>,
    gen_params: &ParamSet<T>,
    disc: &Network<T>,
    latent: &LatentBatch,
    gen_buffers: &mut BufferSet<T>,
    disc_buffers: &mut BufferSet<T>,
    kind: GeneratorLoss,
    noise_sigma: f64,
    rng: &mut RngStream,
) -> Result<GeneratorTerms> {
    let input = g.input_owned(latent.generator_input());
    let mut pass = Pass {
        mode: Mode::Train,
        binding: Binding::Tracked,
        noise_sigma: 0.0,
        rng,
    };
    let images = gen.forward_using(gen_params, g, input, gen_buffers, &mut pass)?;
    let head = discriminate(
        g,
        disc,
        &disc.params,
        images,
        disc_buffers,
        Binding::Frozen,
        noise_sigma,
        pass.rng,
    )?;
    let source_fake = source_fake_term(g, head.source);
    let class_fake = class_term_var(g, head.class, &latent.labels)?;
    let source_obj = match kind {
        GeneratorLoss::NonSaturating => source_real_term(g, head.source),
        GeneratorLoss::Minimax => g.scale(source_fake, -1.0),
    };
    let objective = g.add(source_obj, class_fake)?;
    let loss = g.scale(objective, -1.0);
    Ok(GeneratorTerms {
        images,
        source_fake,
        class_fake,
        loss,
    })
}
