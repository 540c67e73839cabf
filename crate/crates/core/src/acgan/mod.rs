//! Class-conditional GAN with an auxiliary classifier in the
//! discriminator: network construction, objectives, alternating training,
//! sampling and checkpoints.

mod checkpoint;
mod config;
mod explore;
mod latent;
mod loss;
mod objective;
mod spec;
mod state;

pub(crate) use checkpoint::{load_network, push_network};
pub use config::{GeneratorLoss, TrainConfig, TRAIN_KEYS};
pub use latent::{sample_latent, LatentBatch};
pub use loss::{
    class_loss, class_term_var, soft_sigmoid, source_fake_term, source_loss, source_real_term,
    DiscriminatorOutput, HeadVars, PROB_CEIL, PROB_FLOOR,
};
pub use objective::{
    discriminate, discriminator_objective, generator_objective, DiscriminatorTerms, GeneratorTerms,
};
pub use spec::{scaled_width, Arch, DiscriminatorSpec, GeneratorSpec, DISCRIMINATOR_DROPOUT, LEAKY_SLOPE};
pub use state::{generate, AcGan, StepLog, PIXEL_LIMIT};
