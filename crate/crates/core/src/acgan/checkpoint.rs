//! AC-GAN training state in the "ACGK" container.
//!
//! Entry names: network weights under their own names
//! (`generator.l00.weight`, ...), batch-norm statistics as
//! `{layer}.bn.running_mean` / `.running_var`, Adam moments as
//! `adam.{network}.m.{param}` / `.v.{param}` and the step counter as
//! `adam.{network}.step`. The training configuration is stored as metadata
//! and the root random stream as the RNG blob.

use std::path::Path;

use crate::acgan::config::TrainConfig;
use crate::acgan::state::AcGan;
use crate::container::{Container, ContainerKind};
use crate::error::{Error, Result};
use crate::kv::KvMap;
use crate::model::Network;
use crate::nn::{AdamState, RngStream};

pub(crate) fn push_network(c: &mut Container, net: &Network<f32>, opt: &AdamState<f32>) {
    for (name, t) in net.params.iter() {
        c.push_f32(name.clone(), t.shape(), t.data().to_vec());
    }
    for (name, s) in &net.buffers {
        c.push_f32(format!("{name}.running_mean"), &[s.mean.len()], s.mean.clone());
        c.push_f32(format!("{name}.running_var"), &[s.var.len()], s.var.clone());
    }
    let tag = &net.prefix;
    for (name, m) in &opt.m {
        let shape = net.params.get(name).map(|t| t.shape().to_vec()).unwrap_or(vec![m.len()]);
        c.push_f32(format!("adam.{tag}.m.{name}"), &shape, m.clone());
    }
    for (name, v) in &opt.v {
        let shape = net.params.get(name).map(|t| t.shape().to_vec()).unwrap_or(vec![v.len()]);
        c.push_f32(format!("adam.{tag}.v.{name}"), &shape, v.clone());
    }
    c.push_u64(format!("adam.{tag}.step"), vec![opt.step]);
}

fn read_into(c: &Container, name: &str, shape: &[usize], dst: &mut [f32]) -> Result<()> {
    let (s, data) = c
        .f32s(name)
        .map_err(|_| Error::Mismatch(format!("checkpoint lacks entry `{name}`")))?;
    if s != shape {
        return Err(Error::Mismatch(format!(
            "entry `{name}` has shape {s:?}, model expects {shape:?}"
        )));
    }
    dst.copy_from_slice(data);
    Ok(())
}

pub(crate) fn load_network(c: &Container, net: &mut Network<f32>, opt: &mut AdamState<f32>) -> Result<usize> {
    let mut used = 0;
    let names: Vec<String> = net.params.names().map(str::to_string).collect();
    for name in &names {
        let t = net.params.get_mut(name)?;
        let shape = t.shape().to_vec();
        read_into(c, name, &shape, t.data_mut())?;
        read_into(c, &format!("adam.{}.m.{name}", net.prefix), &shape, opt.m.get_mut(name).expect("moment"))?;
        read_into(c, &format!("adam.{}.v.{name}", net.prefix), &shape, opt.v.get_mut(name).expect("moment"))?;
        used += 3;
    }
    for (name, s) in net.buffers.iter_mut() {
        let len = s.mean.len();
        read_into(c, &format!("{name}.running_mean"), &[len], &mut s.mean)?;
        read_into(c, &format!("{name}.running_var"), &[len], &mut s.var)?;
        used += 2;
    }
    let step = c
        .u64s(&format!("adam.{}.step", net.prefix))
        .map_err(|_| Error::Mismatch(format!("checkpoint lacks the {} Adam step", net.prefix)))?;
    opt.step = *step
        .first()
        .ok_or_else(|| Error::Mismatch("empty Adam step entry".into()))?;
    Ok(used + 1)
}

impl AcGan {
    pub fn to_container(&self) -> Container {
        let mut c = Container::new(ContainerKind::AcGan, self.iteration);
        push_network(&mut c, &self.generator, &self.g_opt);
        push_network(&mut c, &self.discriminator, &self.d_opt);
        c.rng = Some(self.rng.state());
        c.meta = self.config.to_kv("").to_string();
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != ContainerKind::AcGan {
            return Err(Error::Mismatch("checkpoint does not hold an AC-GAN".into()));
        }
        let meta = KvMap::parse(&c.meta)?;
        let config = TrainConfig::from_kv(&meta, "")?;
        let mut gan = AcGan::new(config)?;
        let mut used = load_network(c, &mut gan.generator, &mut gan.g_opt)?;
        used += load_network(c, &mut gan.discriminator, &mut gan.d_opt)?;
        if used != c.entries.len() {
            return Err(Error::Mismatch(format!(
                "checkpoint has {} entries, model accounts for {used}",
                c.entries.len()
            )));
        }
        gan.iteration = c.iteration;
        gan.rng = RngStream::from_state(
            c.rng
                .as_ref()
                .ok_or_else(|| Error::Mismatch("checkpoint lacks RNG state".into()))?,
        );
        Ok(gan)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}
