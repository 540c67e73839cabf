//! One function per subcommand. Each reads its inputs from the output
//! directory and writes its artifacts back into it.

use std::fs;
use std::path::{Path, PathBuf};

use acgan_core::acgan::{sample_latent, AcGan, LatentBatch, TrainConfig};
use acgan_core::classifier::{accuracy_from_dist, AccuracyReport, Classifier};
use acgan_core::container::write_atomic;
use acgan_core::data::{generate_shapes, load_dataset, save_dataset, LabeledImageDataset, SplitTag};
use acgan_core::imageio::write_png_grid;
use acgan_core::metrics::{
    collapse_trajectory, curve_csv, discriminability_curve, diversity_csv, diversity_vs_discriminability,
    inception_score, intra_class_diversity, iscore_csv, joint_csv, nearest_neighbor_l1, nn_csv,
    trajectory_csv, ClassSampler, DiversityReport, SsimParams,
};
use acgan_core::nn::{Mode, RngStream, Tensor};
use acgan_core::{Error, Result};

use crate::config::RunConfig;

const PREVIEW_ROWS: usize = 8;
const SAMPLE_GRID_ROWS: usize = 8;

/// File locations under the output directory.
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    fn dir(&self, name: &str) -> Result<PathBuf> {
        let d = self.root.join(name);
        fs::create_dir_all(&d)?;
        Ok(d)
    }

    pub fn train_data(&self) -> PathBuf {
        self.root.join("data/train.acgd")
    }

    pub fn held_out_data(&self) -> PathBuf {
        self.root.join("data/held_out.acgd")
    }

    pub fn classifier(&self) -> PathBuf {
        self.root.join("classifier/classifier.ckpt")
    }

    pub fn classifier_checksum(&self) -> PathBuf {
        self.root.join("classifier/checksum.txt")
    }

    pub fn latest(&self) -> PathBuf {
        self.root.join("acgan/latest.ckpt")
    }

    pub fn checkpoint(&self, iteration: u64) -> PathBuf {
        self.root.join(format!("acgan/ckpt-{iteration:06}.ckpt"))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn run_notes(cfg: &RunConfig) -> Vec<(&'static str, String)> {
    vec![("seed", cfg.seed.to_string())]
}

/// Cells of `images` as a list of `[C, H, W]` tensors.
fn cells(images: &Tensor<f32>) -> Result<Vec<Tensor<f32>>> {
    let n = images.shape()[0];
    (0..n)
        .map(|i| {
            let one = images.slice_outer(i, i + 1)?;
            let shape = one.shape()[1..].to_vec();
            one.reshape(&shape)
        })
        .collect()
}

pub fn gen_data(cfg: &RunConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out);
    let dir = layout.dir("data")?;
    let k = cfg.data.classes;
    let train = generate_shapes(&cfg.shapes(k, cfg.data.samples_per_class, "data/train"))?;
    let mut held = generate_shapes(&cfg.shapes(k, cfg.data.held_out_per_class, "data/held_out"))?;
    held.split = SplitTag::HeldOut;
    save_dataset(&train, &layout.train_data())?;
    save_dataset(&held, &layout.held_out_data())?;

    let rows = PREVIEW_ROWS.min(cfg.data.samples_per_class);
    let by_class: Vec<Vec<usize>> = (0..k).map(|c| train.indices_of_class(c)).collect();
    let mut grid = Vec::with_capacity(rows * k);
    for i in 0..rows {
        for class in &by_class {
            grid.push(train.image(class[i]));
        }
    }
    write_png_grid(&dir.join("preview.png"), &grid, rows, k)?;
    println!(
        "gen-data: {} training and {} held-out images, {k} classes at {r}x{r}",
        train.len(),
        held.len(),
        r = cfg.data.resolution
    );
    Ok(())
}

fn load_train(layout: &Layout) -> Result<LabeledImageDataset> {
    load_dataset(&layout.train_data(), SplitTag::Train)
}

fn load_held_out(layout: &Layout) -> Result<LabeledImageDataset> {
    load_dataset(&layout.held_out_data(), SplitTag::HeldOut)
}

fn accuracy_rows(report: &AccuracyReport) -> String {
    let mut s = String::from("class,count,correct,accuracy\n");
    for c in 0..report.num_classes() {
        s.push_str(&format!(
            "{c},{},{},{:.8}\n",
            report.counts[c], report.correct[c], report.per_class[c]
        ));
    }
    s
}

pub fn train_classifier(cfg: &RunConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out);
    let dir = layout.dir("classifier")?;
    let train = load_train(&layout)?;
    let held = load_held_out(&layout)?;
    if held.num_classes() != train.num_classes() || held.image_shape() != train.image_shape() {
        return Err(Error::Mismatch("held-out set does not match the training set".into()));
    }
    let mut model = Classifier::new(cfg.classifier.clone())?;
    model.check_dataset(&train)?;
    let mut losses = String::from("# schema=classifier_loss/1\niteration,loss\n");
    while model.iteration < model.config.iterations {
        match model.train_iteration(&train) {
            Ok(loss) => losses.push_str(&format!("{},{loss:.8}\n", model.iteration)),
            Err(e) => {
                model.save(&dir.join("last-good.ckpt"))?;
                write_text(&dir.join("losses.csv"), &losses)?;
                return Err(e);
            }
        }
    }
    let report = model.evaluate(&held)?;
    model.save(&layout.classifier())?;
    write_text(&dir.join("losses.csv"), &losses)?;
    let mut csv = format!("# schema=classifier_report/1 overall={:.8}\n", report.overall);
    csv.push_str(&accuracy_rows(&report));
    write_text(&dir.join("report.csv"), &csv)?;
    write_text(&layout.classifier_checksum(), &format!("{:08x}\n", model.checksum()))?;
    println!(
        "train-classifier: {} iterations, held-out accuracy {:.4}",
        model.iteration, report.overall
    );
    Ok(())
}

/// The trained classifier, verified against the checksum recorded at
/// training time.
fn load_classifier(layout: &Layout) -> Result<Classifier> {
    let model = Classifier::load(&layout.classifier())?;
    let text = fs::read_to_string(layout.classifier_checksum())?;
    let stored = u32::from_str_radix(text.trim(), 16)
        .map_err(|_| Error::Format(format!("bad checksum record `{}`", text.trim())))?;
    let computed = model.checksum();
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    Ok(model)
}

fn same_run(a: &TrainConfig, b: &TrainConfig) -> bool {
    let mut a = a.clone();
    a.iterations = b.iterations;
    a.checkpoint_every = b.checkpoint_every;
    a.metrics_every = b.metrics_every;
    a == *b
}

/// Fixed latent rows for the per-checkpoint sample grids: row `i` repeats
/// one `z` across all classes.
fn grid_latent(cfg: &TrainConfig, seed: u64) -> Result<LatentBatch> {
    let k = cfg.num_classes;
    let mut rng = RngStream::new(seed).split("sample-grid");
    let rows = sample_latent(SAMPLE_GRID_ROWS, k, cfg.z_dim, Some(&vec![0; SAMPLE_GRID_ROWS]), &mut rng)?;
    let z = rows.z.data();
    let mut data = Vec::with_capacity(SAMPLE_GRID_ROWS * k * cfg.z_dim);
    let mut labels = Vec::new();
    for i in 0..SAMPLE_GRID_ROWS {
        for c in 0..k {
            data.extend_from_slice(&z[i * cfg.z_dim..(i + 1) * cfg.z_dim]);
            labels.push(c);
        }
    }
    LatentBatch::new(Tensor::new(&[SAMPLE_GRID_ROWS * k, cfg.z_dim], data)?, labels, k)
}

fn loss_header() -> String {
    String::from("# schema=acgan_loss/1\niteration,d_source,d_class,g_source_fake,g_class_fake\n")
}

/// Loss rows already on disk up to and including `iteration`.
fn kept_losses(path: &Path, iteration: u64) -> String {
    let mut out = loss_header();
    if let Ok(text) = fs::read_to_string(path) {
        for line in text.lines().skip(2) {
            let it = line.split(',').next().and_then(|v| v.parse::<u64>().ok());
            if it.is_some_and(|it| it <= iteration) {
                out.push_str(line);
                out.push('\n');
            }
        }
    }
    out
}

pub fn train_acgan(cfg: &RunConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out);
    let dir = layout.dir("acgan")?;
    let train = load_train(&layout)?;
    let losses_path = dir.join("losses.csv");

    let mut gan = match AcGan::load(&layout.latest()) {
        Ok(g) if same_run(&g.config, &cfg.acgan) && g.iteration <= cfg.acgan.iterations => {
            println!("train-acgan: resuming from iteration {}", g.iteration);
            let mut g = g;
            g.config = cfg.acgan.clone();
            g
        }
        Ok(_) => {
            return Err(Error::Mismatch(format!(
                "{} belongs to a different configuration; use a fresh output directory",
                layout.latest().display()
            )))
        }
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => AcGan::new(cfg.acgan.clone())?,
        Err(e) => return Err(e),
    };
    gan.check_dataset(&train)?;
    let mut losses = kept_losses(&losses_path, gan.iteration);
    let grid = grid_latent(&gan.config, cfg.seed)?;
    let save_grid = |g: &AcGan| -> Result<()> {
        let images = g.sample(&grid, Mode::Eval)?;
        let path = dir.join(format!("samples-it{:06}-seed{}.png", g.iteration, cfg.seed));
        write_png_grid(&path, &cells(&images)?, SAMPLE_GRID_ROWS, g.config.num_classes)
    };
    if gan.iteration == 0 {
        gan.save(&layout.checkpoint(0))?;
        gan.save(&layout.latest())?;
        save_grid(&gan)?;
    }

    let every = cfg.acgan.checkpoint_every;
    let result = gan.train(&train, |g, log| {
        losses.push_str(&format!(
            "{},{:.8},{:.8},{:.8},{:.8}\n",
            log.iteration, log.d_source, log.d_class, log.g_source_fake, log.g_class_fake
        ));
        if g.iteration % g.config.metrics_every == 0 {
            save_grid(g)?;
        }
        if g.iteration % every == 0 || g.iteration == g.config.iterations {
            g.save(&layout.checkpoint(g.iteration))?;
            g.save(&layout.latest())?;
            write_text(&losses_path, &losses)?;
        }
        Ok(())
    });
    if let Err(e) = result {
        gan.save(&dir.join("last-good.ckpt"))?;
        write_text(&losses_path, &losses)?;
        return Err(e);
    }
    write_text(&losses_path, &losses)?;
    trajectory(cfg, &layout)?;
    println!("train-acgan: {} iterations", gan.iteration);
    Ok(())
}

/// Collapse trajectory over every saved checkpoint of the current run.
fn trajectory(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    if cfg.eval.track_samples < 2 {
        return Ok(());
    }
    let mut iterations: Vec<u64> = (0..=cfg.acgan.iterations).step_by(cfg.acgan.checkpoint_every as usize).collect();
    if iterations.last() != Some(&cfg.acgan.iterations) {
        iterations.push(cfg.acgan.iterations);
    }
    let series = iterations
        .iter()
        .map(|&it| AcGan::load(&layout.checkpoint(it)))
        .collect::<Result<Vec<_>>>()?;
    let params = SsimParams::default();
    let rng = RngStream::new(cfg.seed).split("trajectory");
    let ts = (0..cfg.acgan.num_classes)
        .map(|c| {
            collapse_trajectory(
                &series,
                c,
                cfg.eval.track_samples,
                cfg.eval.track_pairs,
                &params,
                &rng.split(&format!("class/{c}")),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut notes = run_notes(cfg);
    notes.push(("samples", cfg.eval.track_samples.to_string()));
    notes.push(("pairs", cfg.eval.track_pairs.to_string()));
    write_text(&layout.root.join("acgan/trajectory.csv"), &trajectory_csv(&ts, &iterations, &notes))?;
    let flagged: Vec<usize> = ts.iter().filter(|t| t.collapse_at.is_some()).map(|t| t.class).collect();
    println!("train-acgan: collapse suspected in classes {flagged:?}");
    Ok(())
}

/// Inputs shared by the evaluation commands.
struct EvalInputs {
    gan: AcGan,
    classifier: Classifier,
    images: Tensor<f32>,
    labels: Vec<usize>,
}

fn eval_inputs(cfg: &RunConfig, layout: &Layout) -> Result<EvalInputs> {
    let gan = AcGan::load(&layout.latest())?;
    let classifier = load_classifier(layout)?;
    let k = gan.config.num_classes;
    if classifier.num_classes() != k || classifier.config.resolution != gan.config.resolution {
        return Err(Error::Mismatch(format!(
            "classifier covers {} classes at {}px, generator {} at {}px",
            classifier.num_classes(),
            classifier.config.resolution,
            k,
            gan.config.resolution
        )));
    }
    let labels: Vec<usize> = (0..cfg.eval.samples).map(|i| i % k).collect();
    let mut rng = RngStream::new(cfg.seed).split("eval/samples");
    let latent = sample_latent(labels.len(), k, gan.config.z_dim, Some(&labels), &mut rng)?;
    let images = gan.sample(&latent, Mode::Eval)?;
    Ok(EvalInputs { gan, classifier, images, labels })
}

fn split_by_class(images: &Tensor<f32>, labels: &[usize], k: usize) -> Result<Vec<Tensor<f32>>> {
    (0..k)
        .map(|c| {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            images.select_outer(&idx)
        })
        .collect()
}

fn diversity(cfg: &RunConfig, images: &Tensor<f32>, labels: &[usize], k: usize) -> Result<DiversityReport> {
    let by_class = split_by_class(images, labels, k)?;
    let rng = RngStream::new(cfg.seed).split("eval/diversity");
    intra_class_diversity(&by_class, cfg.eval.pairs, &SsimParams::default(), &rng)
}

fn eval_dir(layout: &Layout) -> Result<PathBuf> {
    layout.dir("eval")
}

fn iteration_notes(cfg: &RunConfig, gan: &AcGan) -> Vec<(&'static str, String)> {
    let mut notes = run_notes(cfg);
    notes.push(("iteration", gan.iteration.to_string()));
    notes
}

pub fn eval_diversity(cfg: &RunConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out);
    let dir = eval_dir(&layout)?;
    let inputs = eval_inputs(cfg, &layout)?;
    let k = inputs.gan.config.num_classes;
    let fake = diversity(cfg, &inputs.images, &inputs.labels, k)?;
    let held = load_held_out(&layout)?;
    let real = diversity(cfg, &held.all_images(), &held.labels_usize(), k)?;
    let notes = iteration_notes(cfg, &inputs.gan);
    write_text(&dir.join("diversity.csv"), &diversity_csv(&fake, &notes))?;
    write_text(&dir.join("diversity-real.csv"), &diversity_csv(&real, &run_notes(cfg)))?;
    let means = |r: &DiversityReport| r.rows.iter().map(|r| format!("{:.3}", r.mean)).collect::<Vec<_>>().join(" ");
    println!("eval-diversity: generated [{}] real [{}]", means(&fake), means(&real));
    Ok(())
}

pub fn eval_curve(cfg: &RunConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out);
    let dir = eval_dir(&layout)?;
    let inputs = eval_inputs(cfg, &layout)?;
    let held = load_held_out(&layout)?;
    let rng = RngStream::new(cfg.seed).split("eval/curve");
    let res = &cfg.eval.resolutions;
    let fake = discriminability_curve(&inputs.images, &inputs.labels, &inputs.classifier, res, cfg.eval.subsets, &rng)?;
    let real = discriminability_curve(
        &held.all_images(),
        &held.labels_usize(),
        &inputs.classifier,
        res,
        cfg.eval.subsets,
        &rng,
    )?;
    write_text(&dir.join("curve.csv"), &curve_csv(&fake, &iteration_notes(cfg, &inputs.gan)))?;
    write_text(&dir.join("curve-real.csv"), &curve_csv(&real, &run_notes(cfg)))?;
    let show = |c: &acgan_core::metrics::DiscriminabilityCurve| {
        c.points.iter().map(|p| format!("{}:{:.3}", p.resolution, p.overall)).collect::<Vec<_>>().join(" ")
    };
    println!("eval-curve: generated [{}] real [{}]", show(&fake), show(&real));
    Ok(())
}

pub fn eval_iscore(cfg: &RunConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out);
    let dir = eval_dir(&layout)?;
    let inputs = eval_inputs(cfg, &layout)?;
    let dist = inputs.classifier.predict_dist(&inputs.images)?;
    let mut rng = RngStream::new(cfg.seed).split("eval/iscore");
    let report = inception_score(&dist, cfg.eval.groups, &mut rng)?;
    write_text(&dir.join("iscore.csv"), &iscore_csv(&report, &iteration_notes(cfg, &inputs.gan)))?;
    println!("eval-iscore: {:.4} +- {:.4} over {} groups", report.mean, report.std, report.groups);
    Ok(())
}

pub fn eval_joint(cfg: &RunConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out);
    let dir = eval_dir(&layout)?;
    let inputs = eval_inputs(cfg, &layout)?;
    let k = inputs.gan.config.num_classes;
    let div = diversity(cfg, &inputs.images, &inputs.labels, k)?;
    let dist = inputs.classifier.predict_dist(&inputs.images)?;
    let acc = accuracy_from_dist(&dist, &inputs.labels)?;
    let joint = diversity_vs_discriminability(&div, &acc)?;
    write_text(&dir.join("joint.csv"), &joint_csv(&joint, &iteration_notes(cfg, &inputs.gan)))?;
    if joint.degenerate {
        println!("eval-joint: accuracy {:.4}, correlation undefined", acc.overall);
    } else {
        println!("eval-joint: accuracy {:.4}, pearson r {:.4}", acc.overall, joint.pearson_r);
    }
    Ok(())
}

pub fn eval_nn(cfg: &RunConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out);
    let dir = eval_dir(&layout)?;
    let inputs = eval_inputs(cfg, &layout)?;
    let train = load_train(&layout)?;
    let n = cfg.eval.nn_samples.min(inputs.labels.len());
    let samples = inputs.images.slice_outer(0, n)?;
    let neighbors = nearest_neighbor_l1(&samples, &train.all_images())?;
    write_text(&dir.join("nn.csv"), &nn_csv(&neighbors, &iteration_notes(cfg, &inputs.gan)))?;
    let mut grid = Vec::with_capacity(2 * n);
    let sample_cells = cells(&samples)?;
    for (i, &(j, _)) in neighbors.iter().enumerate() {
        grid.push(sample_cells[i].clone());
        grid.push(train.image(j));
    }
    write_png_grid(&dir.join(format!("nn-seed{}.png", cfg.seed)), &grid, n, 2)?;
    let min = neighbors.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    println!("eval-nn: {n} samples, smallest L1 distance {min:.4}");
    Ok(())
}

pub fn sweep_classcount(cfg: &RunConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out);
    let dir = layout.dir("sweep")?;
    let s = &cfg.sweep;
    let max_m = s.class_counts.iter().copied().max().unwrap_or(0);
    if let Some(&m) = s.class_counts.iter().find(|&&m| m < s.report_classes) {
        return Err(Error::Config(format!(
            "class count {m} is below sweep.report_classes {}",
            s.report_classes
        )));
    }
    let full = generate_shapes(&cfg.shapes(max_m, cfg.data.samples_per_class, "sweep/data"))?;
    let params = SsimParams::default();
    let mut csv = format!(
        "# schema=sweep/1 seed={} report_classes={} samples={} pairs={}\nm,restart,steps,mean_msssim\n",
        cfg.seed, s.report_classes, s.samples, s.pairs
    );
    for &m in &s.class_counts {
        let ds = full.restrict_classes(&(0..m).collect::<Vec<_>>())?;
        for r in 0..s.restarts {
            let name = format!("sweep/m{m}/r{r}");
            let mut tc = cfg.acgan.clone();
            tc.num_classes = m;
            tc.iterations = s.iterations;
            tc.seed = crate::config::derive_seed(cfg.seed, &name);
            let mut gan = AcGan::new(tc)?;
            let log = gan.train(&ds, |_, _| Ok(()))?;
            let rng = RngStream::new(cfg.seed).split(&name);
            let mut total = 0.0;
            for c in 0..s.report_classes {
                let images = gan.sample_class(c, s.samples, &mut rng.split(&format!("samples/{c}")))?;
                let report = intra_class_diversity(&[images], s.pairs, &params, &rng.split(&format!("pairs/{c}")))?;
                total += report.rows[0].mean;
            }
            let mean = total / s.report_classes as f64;
            csv.push_str(&format!("{m},{r},{},{mean:.8}\n", log.len()));
            println!("sweep-classcount: m={m} restart={r} steps={} mean_msssim={mean:.4}", log.len());
        }
    }
    write_text(&dir.join("sweep.csv"), &csv)
}

fn check_class(gan: &AcGan, class: usize) -> Result<()> {
    if class >= gan.config.num_classes {
        return Err(Error::InvalidArgument(format!(
            "class {class} out of range for {} classes",
            gan.config.num_classes
        )));
    }
    Ok(())
}

fn z_rows(gan: &AcGan, n: usize, rng: &mut RngStream) -> Vec<Vec<f32>> {
    (0..n).map(|_| (0..gan.config.z_dim).map(|_| rng.normal() as f32).collect()).collect()
}

pub fn interpolate(cfg: &RunConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out);
    let dir = layout.dir("explore")?;
    let gan = AcGan::load(&layout.latest())?;
    let class = cfg.explore.class;
    check_class(&gan, class)?;
    let mut rng = RngStream::new(cfg.seed).split("explore/interpolate");
    let ends = z_rows(&gan, 2, &mut rng);
    let frames = gan.interpolate(&ends[0], &ends[1], class, cfg.explore.steps, Mode::Eval)?;
    let path = dir.join(format!("interpolate-c{class}-it{:06}-seed{}.png", gan.iteration, cfg.seed));
    write_png_grid(&path, &cells(&frames)?, 1, cfg.explore.steps)?;
    println!("interpolate: {} frames of class {class} to {}", cfg.explore.steps, path.display());
    Ok(())
}

pub fn style_grid(cfg: &RunConfig) -> Result<()> {
    let layout = Layout::new(&cfg.out);
    let dir = layout.dir("explore")?;
    let gan = AcGan::load(&layout.latest())?;
    let mut rng = RngStream::new(cfg.seed).split("explore/style");
    let rows = z_rows(&gan, cfg.explore.rows, &mut rng);
    let classes: Vec<usize> = if cfg.explore.classes.is_empty() {
        (0..gan.config.num_classes).collect()
    } else {
        cfg.explore.classes.clone()
    };
    for &c in &classes {
        check_class(&gan, c)?;
    }
    let grid = gan.style_grid(&rows, &classes, Mode::Eval)?;
    let path = dir.join(format!("style-grid-it{:06}-seed{}.png", gan.iteration, cfg.seed));
    write_png_grid(&path, &cells(&grid)?, rows.len(), classes.len())?;
    println!("style-grid: {}x{} grid to {}", rows.len(), classes.len(), path.display());
    Ok(())
}

pub fn run_all(cfg: &RunConfig) -> Result<()> {
    gen_data(cfg)?;
    train_classifier(cfg)?;
    train_acgan(cfg)?;
    eval_diversity(cfg)?;
    eval_curve(cfg)?;
    eval_iscore(cfg)?;
    eval_joint(cfg)?;
    eval_nn(cfg)?;
    interpolate(cfg)?;
    style_grid(cfg)
}
