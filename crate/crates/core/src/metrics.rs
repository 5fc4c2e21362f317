//! Region similarity J, mask-level precision/recall F and their mean, plus
//! per-sequence aggregation and report formatting.
//!
//! F here is the harmonic mean of pixel precision and recall over the whole
//! mask, not the boundary-matching F-measure used by some benchmarks.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mask::MaskSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Dimension(format!(
                "{height}×{width} mask needs {} pixels, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(BinaryMask { height, width, data })
    }

    /// From 0/1 bytes; any other value is rejected.
    pub fn from_bits(height: usize, width: usize, bits: &[u8]) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Input(format!("binary mask value {b} is not 0 or 1")));
        }
        BinaryMask::new(height, width, bits.iter().map(|&b| b == 1).collect())
    }

    pub fn from_labels(mask: &MaskSet, id: u8) -> Self {
        BinaryMask {
            height: mask.height(),
            width: mask.width(),
            data: mask.labels().iter().map(|&l| l == id).collect(),
        }
    }

    pub fn extents(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Integer pixel counts behind every metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub intersection: u64,
    pub predicted: u64,
    pub truth: u64,
}

pub fn counts(p: &BinaryMask, g: &BinaryMask) -> Result<Counts> {
    if p.extents() != g.extents() {
        return Err(Error::Dimension(format!(
            "prediction {:?} vs ground truth {:?}",
            p.extents(),
            g.extents()
        )));
    }
    let mut c = Counts {
        intersection: 0,
        predicted: 0,
        truth: 0,
    };
    for (&a, &b) in p.data.iter().zip(&g.data) {
        c.predicted += u64::from(a);
        c.truth += u64::from(b);
        c.intersection += u64::from(a && b);
    }
    Ok(c)
}

impl Counts {
    pub fn jaccard(&self) -> f64 {
        let union = self.predicted + self.truth - self.intersection;
        if union == 0 {
            1.0
        } else {
            self.intersection as f64 / union as f64
        }
    }

    pub fn precision(&self) -> f64 {
        if self.predicted == 0 {
            0.0
        } else {
            self.intersection as f64 / self.predicted as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.truth == 0 {
            0.0
        } else {
            self.intersection as f64 / self.truth as f64
        }
    }

    /// `2PR/(P+R)` evaluated exactly on counts, i.e. `2|P∩G| / (|P|+|G|)`.
    /// Both masks empty scores 1.
    pub fn f(&self) -> f64 {
        let denom = self.predicted + self.truth;
        if denom == 0 {
            1.0
        } else {
            (2 * self.intersection) as f64 / denom as f64
        }
    }
}

/// `|P∩G| / |P∪G|`; 1 when both masks are empty.
pub fn jaccard(p: &BinaryMask, g: &BinaryMask) -> Result<f64> {
    Ok(counts(p, g)?.jaccard())
}

/// Pixel precision and recall; an empty prediction has precision 0 and an
/// empty ground truth has recall 0.
pub fn precision_recall(p: &BinaryMask, g: &BinaryMask) -> Result<(f64, f64)> {
    let c = counts(p, g)?;
    Ok((c.precision(), c.recall()))
}

pub fn f_measure(precision: f64, recall: f64) -> f64 {
    let s = precision + recall;
    if s == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / s
    }
}

/// F of two masks, with the both-empty case scored 1.
pub fn f_score(p: &BinaryMask, g: &BinaryMask) -> Result<f64> {
    Ok(counts(p, g)?.f())
}

pub fn mean_jf(j: f64, f: f64) -> f64 {
    (j + f) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub j: f64,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub jf_mean: f64,
}

impl MetricReport {
    fn from_parts(j: f64, precision: f64, recall: f64, f: f64) -> Self {
        MetricReport {
            j,
            precision,
            recall,
            f,
            jf_mean: mean_jf(j, f),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceReport {
    pub per_object: Vec<(u8, MetricReport)>,
    pub overall: MetricReport,
}

/// Scores frames `1..` of a sequence (frame 0 is the given annotation).
/// Per object, J/precision/recall/F are averaged over frames; the overall
/// report averages objects.
pub fn evaluate_sequence(pred: &[MaskSet], gt: &[MaskSet], objects: &[u8]) -> Result<SequenceReport> {
    if objects.is_empty() {
        return Err(Error::Parameter("no objects to evaluate".into()));
    }
    if pred.len() != gt.len() {
        return Err(Error::Dataset(format!(
            "{} predicted frames vs {} ground-truth frames",
            pred.len(),
            gt.len()
        )));
    }
    if gt.len() < 2 {
        return Err(Error::Dataset("need at least two frames to evaluate".into()));
    }
    let frames = (gt.len() - 1) as f64;
    let mut per_object = Vec::with_capacity(objects.len());
    for &id in objects {
        let (mut j, mut p, mut r, mut f) = (0.0, 0.0, 0.0, 0.0);
        for (pm, gm) in pred.iter().zip(gt).skip(1) {
            let c = counts(&BinaryMask::from_labels(pm, id), &BinaryMask::from_labels(gm, id))?;
            j += c.jaccard();
            p += c.precision();
            r += c.recall();
            f += c.f();
        }
        per_object.push((id, MetricReport::from_parts(j / frames, p / frames, r / frames, f / frames)));
    }
    let n = per_object.len() as f64;
    let avg = |sel: fn(&MetricReport) -> f64| per_object.iter().map(|(_, m)| sel(m)).sum::<f64>() / n;
    let overall = MetricReport::from_parts(avg(|m| m.j), avg(|m| m.precision), avg(|m| m.recall), avg(|m| m.f));
    Ok(SequenceReport { per_object, overall })
}

/// Round half up to four decimals. Values within 1e-9 of a half are treated
/// as halves so that decimal inputs like 0.72985 round the way they read.
pub fn round4(x: f64) -> f64 {
    ((x * 1e4) + 0.5 + 1e-9).floor() / 1e4
}

/// `seq=<name> obj=<id> J=<.6f> F=<.6f> JF=<.6f>`
pub fn format_line(seq: &str, obj: &str, m: &MetricReport) -> String {
    format!("seq={seq} obj={obj} J={:.6} F={:.6} JF={:.6}", m.j, m.f, m.jf_mean)
}

/// Every per-object line of a sequence followed by an `obj=all` line.
pub fn format_sequence(seq: &str, report: &SequenceReport) -> String {
    let mut s = String::new();
    for (id, m) in &report.per_object {
        let _ = writeln!(s, "{}", format_line(seq, &id.to_string(), m));
    }
    let _ = writeln!(s, "{}", format_line(seq, "all", &report.overall));
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderboardRow {
    pub name: String,
    pub j: f64,
    pub f: f64,
    pub jf: f64,
}

/// Competition ranks (1 + number of strictly better rows) of `values`.
fn ranks(values: &[f64]) -> Vec<usize> {
    values
        .iter()
        .map(|v| 1 + values.iter().filter(|&&o| o > *v).count())
        .collect()
}

/// A plain-text table with per-column ranks, rows in input order:
///
/// ```text
/// User     | J          | F          | J&F
/// ISS      | 0.6892 (5) | 0.7705 (5) | 0.7299 (5)
/// ```
///
/// A second block repeats J&F at full precision.
pub fn leaderboard(rows: &[LeaderboardRow]) -> String {
    let rj = ranks(&rows.iter().map(|r| r.j).collect::<Vec<_>>());
    let rf = ranks(&rows.iter().map(|r| r.f).collect::<Vec<_>>());
    let rjf = ranks(&rows.iter().map(|r| r.jf).collect::<Vec<_>>());
    let name_w = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(4);
    let mut s = String::new();
    let _ = writeln!(s, "{:<name_w$} | {:<10} | {:<10} | J&F", "User", "J", "F");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:<name_w$} | {:.4} ({}) | {:.4} ({}) | {:.4} ({})",
            r.name,
            round4(r.j),
            rj[i],
            round4(r.f),
            rf[i],
            round4(r.jf),
            rjf[i]
        );
    }
    for r in rows {
        let _ = writeln!(s, "# {} J&F={:.10}", r.name, r.jf);
    }
    s
}
