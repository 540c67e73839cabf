//! CSV renderings of the metric reports.
//!
//! Every file opens with a `# schema=<name>/<version>` line, optionally
//! followed by ` key=value` annotations, then a column header row.

use std::fmt::Write;

use crate::metrics::collapse::CollapseTrajectory;
use crate::metrics::curve::DiscriminabilityCurve;
use crate::metrics::diversity::DiversityReport;
use crate::metrics::inception::InceptionScoreReport;
use crate::metrics::joint::JointReport;

pub const SCHEMA_VERSION: u32 = 1;

fn head(name: &str, notes: &[(&str, String)], columns: &str) -> String {
    let mut s = format!("# schema={name}/{SCHEMA_VERSION}");
    for (k, v) in notes {
        write!(s, " {k}={v}").unwrap();
    }
    s.push('\n');
    s.push_str(columns);
    s.push('\n');
    s
}

pub fn diversity_csv(r: &DiversityReport, notes: &[(&str, String)]) -> String {
    let mut notes = notes.to_vec();
    notes.push(("scales", r.scales.to_string()));
    let mut s = head("diversity", &notes, "class,mean_msssim,std_msssim,pairs,flag_ge_0.25");
    for row in &r.rows {
        writeln!(s, "{},{:.8},{:.8},{},{}", row.class, row.mean, row.std, row.pairs, row.flagged as u8).unwrap();
    }
    s
}

pub fn curve_csv(c: &DiscriminabilityCurve, notes: &[(&str, String)]) -> String {
    let k = c.points.first().map_or(0, |p| p.per_class.len());
    let mut cols = String::from("resolution,accuracy_mean,accuracy_std");
    for j in 0..k {
        write!(cols, ",class_{j}").unwrap();
    }
    let mut notes = notes.to_vec();
    notes.push(("subsets", c.subsets.to_string()));
    notes.push(("subset_size", c.subset_size.to_string()));
    let mut s = head("curve", &notes, &cols);
    for p in &c.points {
        write!(s, "{},{:.8},{:.8}", p.resolution, p.accuracy_mean, p.accuracy_std).unwrap();
        for a in &p.per_class {
            write!(s, ",{a:.8}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn iscore_csv(r: &InceptionScoreReport, notes: &[(&str, String)]) -> String {
    let mut notes = notes.to_vec();
    notes.push(("samples", r.samples.to_string()));
    notes.push(("dropped", r.dropped.to_string()));
    let mut s = head("iscore", &notes, "group,score");
    for (g, v) in r.scores.iter().enumerate() {
        writeln!(s, "{g},{v:.8}").unwrap();
    }
    s
}

pub fn joint_csv(r: &JointReport, notes: &[(&str, String)]) -> String {
    let opt = |v: Option<f64>| v.map_or("na".to_string(), |v| format!("{v:.8}"));
    let mut notes = notes.to_vec();
    notes.push(("pearson_r", format!("{:.8}", r.pearson_r)));
    notes.push(("r_squared", format!("{:.8}", r.r_squared)));
    notes.push(("degenerate", (r.degenerate as u8).to_string()));
    notes.push(("low_div_low_acc", opt(r.low_diversity_low_accuracy)));
    notes.push(("high_div_high_acc", opt(r.high_diversity_high_accuracy)));
    let mut s = head("joint", &notes, "class,msssim,accuracy");
    for row in &r.rows {
        writeln!(s, "{},{:.8},{:.8}", row.class, row.msssim, row.accuracy).unwrap();
    }
    s
}

pub fn nn_csv(neighbors: &[(usize, f64)], notes: &[(&str, String)]) -> String {
    let mut s = head("nn", notes, "sample_id,train_index,l1_distance");
    for (i, (j, d)) in neighbors.iter().enumerate() {
        writeln!(s, "{i},{j},{d:.8}").unwrap();
    }
    s
}

/// One row per (class, checkpoint) with the collapse onset in a final
/// column (`-1` when none).
pub fn trajectory_csv(ts: &[CollapseTrajectory], iterations: &[u64], notes: &[(&str, String)]) -> String {
    let mut s = head("trajectory", notes, "class,checkpoint,iteration,mean_msssim,collapse_at");
    for t in ts {
        let at = t.collapse_at.map_or(-1, |i| i as i64);
        for (i, v) in t.scores.iter().enumerate() {
            let it = iterations.get(i).copied().unwrap_or(i as u64);
            writeln!(s, "{},{i},{it},{v:.8},{at}", t.class).unwrap();
        }
    }
    s
}
