//! Run configuration: a `section.key = value` file resolved against
//! defaults and command-line overrides.
//!
//! Sections: `run` (seed, out), `data`, `classifier`, `acgan`, `eval`,
//! `explore` and `sweep`. Class count, resolution and channels are set
//! once under `data` and shared by both models; model seeds are derived
//! from `run.seed`.

use std::path::PathBuf;

use acgan_core::acgan::{TrainConfig, TRAIN_KEYS};
use acgan_core::classifier::{ClassifierConfig, CLASSIFIER_KEYS};
use acgan_core::data::ShapesConfig;
use acgan_core::kv::{join_list, KvMap};
use acgan_core::nn::RngStream;
use acgan_core::{Error, Result};
use rand::RngCore;

const SHARED: &[&str] = &["classes", "resolution", "channels", "seed"];

#[derive(Debug, Clone, PartialEq)]
pub struct DataSection {
    pub classes: usize,
    pub resolution: usize,
    pub samples_per_class: usize,
    pub held_out_per_class: usize,
    pub position_jitter: f64,
    pub scale_jitter: f64,
    pub color_jitter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSection {
    /// Generated images per evaluation, labels cycling through the classes.
    pub samples: usize,
    pub pairs: usize,
    pub resolutions: Vec<usize>,
    pub subsets: usize,
    pub groups: usize,
    pub nn_samples: usize,
    /// Per-class samples and pairs for the training-time collapse track.
    pub track_samples: usize,
    pub track_pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExploreSection {
    pub class: usize,
    /// Style-grid columns; empty means every class.
    pub classes: Vec<usize>,
    pub steps: usize,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub class_counts: Vec<usize>,
    pub restarts: usize,
    pub iterations: u64,
    /// Diversity is averaged over the first this many classes.
    pub report_classes: usize,
    pub samples: usize,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataSection,
    pub classifier: ClassifierConfig,
    pub acgan: TrainConfig,
    pub eval: EvalSection,
    pub explore: ExploreSection,
    pub sweep: SweepSection,
}

/// Child seed of `master` named `name`.
pub fn derive_seed(master: u64, name: &str) -> u64 {
    RngStream::new(master).split(name).next_u64()
}

fn allowed_keys() -> Vec<String> {
    let mut keys: Vec<String> = ["run.seed", "run.out"].iter().map(|s| s.to_string()).collect();
    let data = [
        "classes",
        "resolution",
        "samples_per_class",
        "held_out_per_class",
        "position_jitter",
        "scale_jitter",
        "color_jitter",
    ];
    keys.extend(data.iter().map(|k| format!("data.{k}")));
    let model = |section: &str, list: &[&str]| -> Vec<String> {
        list.iter()
            .filter(|k| !SHARED.contains(k))
            .map(|k| format!("{section}.{k}"))
            .collect()
    };
    keys.extend(model("classifier", CLASSIFIER_KEYS));
    keys.extend(model("acgan", TRAIN_KEYS));
    let eval = [
        "samples",
        "pairs",
        "resolutions",
        "subsets",
        "groups",
        "nn_samples",
        "track_samples",
        "track_pairs",
    ];
    keys.extend(eval.iter().map(|k| format!("eval.{k}")));
    keys.extend(["class", "classes", "steps", "rows"].iter().map(|k| format!("explore.{k}")));
    let sweep = ["class_counts", "restarts", "iterations", "report_classes", "samples", "pairs"];
    keys.extend(sweep.iter().map(|k| format!("sweep.{k}")));
    keys
}

/// `section.`-prefixed entries of `kv` with the prefix removed, plus the
/// shared data keys.
fn model_kv(kv: &KvMap, section: &str, shared: &[(&str, String)]) -> KvMap {
    let mut out = KvMap::new();
    let prefix = format!("{section}.");
    for (k, v) in kv.iter() {
        if let Some(rest) = k.strip_prefix(&prefix) {
            out.set(rest, v);
        }
    }
    for (k, v) in shared {
        out.set(*k, v);
    }
    out
}

fn default_kv() -> KvMap {
    let text = "\
run.seed = 0
run.out = acgan-out
data.classes = 4
data.resolution = 32
data.samples_per_class = 1000
data.held_out_per_class = 250
data.position_jitter = 1
data.scale_jitter = 0.35
data.color_jitter = 0.6
acgan.width_divisor = 4
acgan.batch_size = 64
acgan.iterations = 3000
acgan.checkpoint_every = 500
acgan.metrics_every = 250
eval.samples = 512
eval.pairs = 100
eval.resolutions = 4,8,16,32
eval.subsets = 8
eval.groups = 8
eval.nn_samples = 16
eval.track_samples = 24
eval.track_pairs = 50
explore.class = 0
explore.steps = 8
explore.rows = 8
sweep.class_counts = 4,8,16
sweep.restarts = 3
sweep.iterations = 300
sweep.report_classes = 4
sweep.samples = 24
sweep.pairs = 50
";
    KvMap::parse(text).expect("built-in defaults parse")
}

fn positive(name: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(Error::Config(format!("{name} must be positive")));
    }
    Ok(v)
}

impl RunConfig {
    /// Resolves `file` (possibly empty) over the defaults, then applies the
    /// command-line overrides.
    pub fn resolve(file: &KvMap, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        let allowed = allowed_keys();
        file.reject_unknown(allowed.iter().map(String::as_str))?;
        let mut kv = default_kv().merged(file);
        if let Some(s) = seed {
            kv.set("run.seed", s);
        }
        if let Some(o) = out {
            kv.set("run.out", o.display());
        }
        Self::from_kv(&kv)
    }

    fn from_kv(kv: &KvMap) -> Result<Self> {
        let need = |k: &str| kv.get_str(k).ok_or_else(|| Error::Config(format!("missing key `{k}`")));
        let seed: u64 = kv.get_or("run.seed", 0)?;
        let out = PathBuf::from(need("run.out")?);
        let data = DataSection {
            classes: positive("data.classes", kv.get_or("data.classes", 0)?)?,
            resolution: positive("data.resolution", kv.get_or("data.resolution", 0)?)?,
            samples_per_class: positive("data.samples_per_class", kv.get_or("data.samples_per_class", 0)?)?,
            held_out_per_class: positive("data.held_out_per_class", kv.get_or("data.held_out_per_class", 0)?)?,
            position_jitter: kv.get_or("data.position_jitter", 0.0)?,
            scale_jitter: kv.get_or("data.scale_jitter", 0.0)?,
            color_jitter: kv.get_or("data.color_jitter", 0.0)?,
        };
        let shared = |name: &str| {
            vec![
                ("classes", data.classes.to_string()),
                ("resolution", data.resolution.to_string()),
                ("channels", "3".to_string()),
                ("seed", derive_seed(seed, name).to_string()),
            ]
        };
        let classifier = ClassifierConfig::from_kv(&model_kv(kv, "classifier", &shared("classifier")), "")?;
        let acgan = TrainConfig::from_kv(&model_kv(kv, "acgan", &shared("acgan")), "")?;
        let list = |k: &str| -> Result<Vec<usize>> {
            kv.get_list(k)?.ok_or_else(|| Error::Config(format!("missing key `{k}`")))
        };
        let eval = EvalSection {
            samples: positive("eval.samples", kv.get_or("eval.samples", 0)?)?,
            pairs: positive("eval.pairs", kv.get_or("eval.pairs", 0)?)?,
            resolutions: list("eval.resolutions")?,
            subsets: positive("eval.subsets", kv.get_or("eval.subsets", 0)?)?,
            groups: positive("eval.groups", kv.get_or("eval.groups", 0)?)?,
            nn_samples: positive("eval.nn_samples", kv.get_or("eval.nn_samples", 0)?)?,
            track_samples: kv.get_or("eval.track_samples", 0)?,
            track_pairs: kv.get_or("eval.track_pairs", 0)?,
        };
        if eval.resolutions.is_empty() {
            return Err(Error::Config("eval.resolutions is empty".into()));
        }
        let explore = ExploreSection {
            class: kv.get_or("explore.class", 0)?,
            classes: kv.get_list("explore.classes")?.unwrap_or_default(),
            steps: kv.get_or("explore.steps", 0)?,
            rows: positive("explore.rows", kv.get_or("explore.rows", 0)?)?,
        };
        let sweep = SweepSection {
            class_counts: list("sweep.class_counts")?,
            restarts: positive("sweep.restarts", kv.get_or("sweep.restarts", 0)?)?,
            iterations: kv.get_or("sweep.iterations", 0)?,
            report_classes: positive("sweep.report_classes", kv.get_or("sweep.report_classes", 0)?)?,
            samples: kv.get_or("sweep.samples", 0)?,
            pairs: positive("sweep.pairs", kv.get_or("sweep.pairs", 0)?)?,
        };
        Ok(Self {
            seed,
            out,
            data,
            classifier,
            acgan,
            eval,
            explore,
            sweep,
        })
    }

    /// Every key with its effective value, in the file format.
    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.set("run.seed", self.seed);
        kv.set("run.out", self.out.display());
        let d = &self.data;
        kv.set("data.classes", d.classes);
        kv.set("data.resolution", d.resolution);
        kv.set("data.samples_per_class", d.samples_per_class);
        kv.set("data.held_out_per_class", d.held_out_per_class);
        kv.set("data.position_jitter", d.position_jitter);
        kv.set("data.scale_jitter", d.scale_jitter);
        kv.set("data.color_jitter", d.color_jitter);
        for (section, model) in [("classifier", self.classifier.to_kv("")), ("acgan", self.acgan.to_kv(""))] {
            for (k, v) in model.iter() {
                if !SHARED.contains(&k) {
                    kv.set(format!("{section}.{k}"), v);
                }
            }
        }
        let e = &self.eval;
        kv.set("eval.samples", e.samples);
        kv.set("eval.pairs", e.pairs);
        kv.set("eval.resolutions", join_list(&e.resolutions));
        kv.set("eval.subsets", e.subsets);
        kv.set("eval.groups", e.groups);
        kv.set("eval.nn_samples", e.nn_samples);
        kv.set("eval.track_samples", e.track_samples);
        kv.set("eval.track_pairs", e.track_pairs);
        kv.set("explore.class", self.explore.class);
        if !self.explore.classes.is_empty() {
            kv.set("explore.classes", join_list(&self.explore.classes));
        }
        kv.set("explore.steps", self.explore.steps);
        kv.set("explore.rows", self.explore.rows);
        let s = &self.sweep;
        kv.set("sweep.class_counts", join_list(&s.class_counts));
        kv.set("sweep.restarts", s.restarts);
        kv.set("sweep.iterations", s.iterations);
        kv.set("sweep.report_classes", s.report_classes);
        kv.set("sweep.samples", s.samples);
        kv.set("sweep.pairs", s.pairs);
        kv
    }

    pub fn shapes(&self, classes: usize, per_class: usize, seed_name: &str) -> ShapesConfig {
        let mut cfg = ShapesConfig::new(classes, self.data.resolution, per_class, derive_seed(self.seed, seed_name));
        cfg.position_jitter = self.data.position_jitter;
        cfg.scale_jitter = self.data.scale_jitter;
        cfg.color_jitter = self.data.color_jitter;
        cfg
    }
}
