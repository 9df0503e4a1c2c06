//! Accessibility statistics over trial records: ratio distributions,
//! cumulative/complementary probabilities, quantiles, radius-conditioned
//! expectations, and occurrence tables.

use crate::error::{Error, Result};
use crate::routing::TrialRecord;

const WEIGHT_SUM_TOL: f64 = 1e-9;
const BIN_TILE_TOL: f64 = 1e-12;

/// One observation: an accessibility ratio with its event weight and the
/// radius of the failure domain that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEntry {
    pub ratio: f64,
    pub weight: f64,
    pub radius: f64,
}

/// Weighted empirical distribution of accessibility ratios.
#[derive(Debug, Clone)]
pub struct RatioDistribution {
    entries: Vec<RatioEntry>,
    bin_width: f64,
}

impl RatioDistribution {
    pub fn new(entries: Vec<RatioEntry>, bin_width: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Metric("distribution needs at least one entry".into()));
        }
        for e in &entries {
            if !(0.0..=1.0).contains(&e.ratio) {
                return Err(Error::Metric(format!("ratio {} outside [0, 1]", e.ratio)));
            }
            if !(e.weight >= 0.0) {
                return Err(Error::Metric(format!("weight {} must be >= 0", e.weight)));
            }
        }
        let sum: f64 = entries.iter().map(|e| e.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Metric(format!("weights sum to {sum}, expected 1")));
        }
        check_bin_width(bin_width)?;
        Ok(Self { entries, bin_width })
    }

    pub fn from_trials(trials: &[TrialRecord], bin_width: f64) -> Result<Self> {
        Self::new(
            trials
                .iter()
                .map(|t| RatioEntry { ratio: t.ratio, weight: t.event_weight, radius: t.radius })
                .collect(),
            bin_width,
        )
    }

    pub fn entries(&self) -> &[RatioEntry] {
        &self.entries
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn bin_count(&self) -> usize {
        (1.0 / self.bin_width).round() as usize
    }
}

fn check_bin_width(bin_width: f64) -> Result<()> {
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(Error::Metric(format!("bin_width {bin_width} outside (0, 1]")));
    }
    let bins = 1.0 / bin_width;
    if (bins - bins.round()).abs() > BIN_TILE_TOL * bins.round() {
        return Err(Error::Metric(format!("bin_width {bin_width} does not tile [0, 1]")));
    }
    Ok(())
}

/// Bin index of a ratio; ratio 1.0 falls in the last bin.
pub fn bin_index(ratio: f64, bin_width: f64) -> usize {
    let bins = (1.0 / bin_width).round() as usize;
    ((ratio / bin_width).floor() as usize).min(bins - 1)
}

/// Accessibility ratio served/baseline.
pub fn ear(served: f64, baseline: f64) -> Result<f64> {
    if baseline <= 0.0 {
        return Err(Error::UndefinedRatio);
    }
    if !(served >= 0.0) || served > baseline {
        return Err(Error::Metric(format!(
            "served {served} outside [0, baseline {baseline}]"
        )));
    }
    Ok(served / baseline)
}

/// Strict CDF: total weight of entries with ratio < x.
pub fn cdf_ear(dist: &RatioDistribution, x: f64) -> f64 {
    dist.entries.iter().filter(|e| e.ratio < x).map(|e| e.weight).sum()
}

/// Cumulative probability that the ratio is at least x; the exact
/// complement of the strict CDF.
pub fn cp_ear(dist: &RatioDistribution, x: f64) -> f64 {
    1.0 - cdf_ear(dist, x)
}

/// Probability mass of the bin containing x.
pub fn pdf_ear(dist: &RatioDistribution, x: f64, bin_width: f64) -> f64 {
    let bin = bin_index(x, bin_width);
    dist.entries
        .iter()
        .filter(|e| bin_index(e.ratio, bin_width) == bin)
        .map(|e| e.weight)
        .sum()
}

/// Smallest ratio x whose strict CDF reaches probability q (the q-quantile
/// of degradation). When no observed ratio attains q, the supremum bin
/// boundary above the largest observed ratio is returned (its CDF is 1).
pub fn pr_ear(dist: &RatioDistribution, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Metric(format!("q {q} outside [0, 1]")));
    }
    let mut ratios: Vec<f64> = dist.entries.iter().map(|e| e.ratio).collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ratios.dedup();
    for &x in &ratios {
        if cdf_ear(dist, x) >= q {
            return Ok(x);
        }
    }
    let max = *ratios.last().unwrap();
    // nudge guards against a quotient landing just below an exact boundary
    let sup = ((max / dist.bin_width + 1e-9).floor() + 1.0) * dist.bin_width;
    Ok(sup)
}

/// Inclusive-bounds radius bin.
#[derive(Debug, Clone, Copy)]
pub struct RadiusBin {
    pub lo: f64,
    pub hi: f64,
}

impl RadiusBin {
    pub fn contains(&self, r: f64) -> bool {
        r >= self.lo && r < self.hi
    }
}

/// Expected accessibility ratio conditioned on the failure-domain radius:
/// the radius-conditional PDF is normalized within the bin, so the result
/// is a conditional expectation in [0, 1].
pub fn dd_ear(dist: &RatioDistribution, radius_bin: RadiusBin) -> Result<f64> {
    let in_bin: Vec<&RatioEntry> =
        dist.entries.iter().filter(|e| radius_bin.contains(e.radius)).collect();
    let mass: f64 = in_bin.iter().map(|e| e.weight).sum();
    if in_bin.is_empty() || mass <= 0.0 {
        return Err(Error::Metric(format!(
            "no probability mass in radius bin [{}, {})",
            radius_bin.lo, radius_bin.hi
        )));
    }
    Ok(in_bin.iter().map(|e| e.ratio * e.weight).sum::<f64>() / mass)
}

/// Occurrence statistics of ratio bins over a trial set.
#[derive(Debug, Clone)]
pub struct OccurrenceTable {
    /// Per-bin trial counts N(ratio in bin).
    pub counts: Vec<usize>,
    /// Total trial count N.
    pub total: usize,
    /// Per-bin occurrence coefficients Q = count / total.
    pub q: Vec<f64>,
    /// Per-bin sums of observed ratios; sum/count is the bin representative.
    pub ratio_sums: Vec<f64>,
    pub bin_width: f64,
}

impl OccurrenceTable {
    /// Count-weighted mean ratio of a bin, if occupied.
    pub fn representative(&self, bin: usize) -> Option<f64> {
        (self.counts[bin] > 0).then(|| self.ratio_sums[bin] / self.counts[bin] as f64)
    }
}

/// Occurrence coefficients per ratio bin: Q(bin) = N(bin) / N.
pub fn occurrence(trials: &[TrialRecord], bin_width: f64) -> Result<OccurrenceTable> {
    check_bin_width(bin_width)?;
    if trials.is_empty() {
        return Err(Error::Metric("occurrence of an empty trial set".into()));
    }
    let bins = (1.0 / bin_width).round() as usize;
    let mut counts = vec![0usize; bins];
    let mut ratio_sums = vec![0.0; bins];
    for t in trials {
        let b = bin_index(t.ratio, bin_width);
        counts[b] += 1;
        ratio_sums[b] += t.ratio;
    }
    let total = trials.len();
    let q = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(OccurrenceTable { counts, total, q, ratio_sums, bin_width })
}

/// Aggregate occurrence for one ratio bin over per-domain tables.
pub fn occurrence_total(per_domain_tables: &[OccurrenceTable], bin: usize) -> f64 {
    per_domain_tables.iter().map(|t| t.q[bin]).sum()
}

/// Cumulative probability from the aggregated occurrence: q_total / m.
pub fn sigma_from_occurrence(q_total: f64, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::Metric("m must be >= 1".into()));
    }
    Ok(q_total / m as f64)
}

/// A per-domain occurrence table tagged with the domain radius.
#[derive(Debug, Clone)]
pub struct RadiusTaggedTable {
    pub table: OccurrenceTable,
    pub radius: f64,
}

/// Radius-conditioned expected ratio reconstructed from per-domain
/// occurrence tables: sum over ratio bins of the bin representative times
/// the aggregated per-domain occurrence divided by the number of domains in
/// the radius bin.
pub fn lambda_from_occurrence(
    tables: &[RadiusTaggedTable],
    m: usize,
    radius_bin: RadiusBin,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::Metric("m must be >= 1".into()));
    }
    let in_bin: Vec<&RadiusTaggedTable> =
        tables.iter().filter(|t| radius_bin.contains(t.radius)).collect();
    if in_bin.is_empty() {
        return Err(Error::Metric(format!(
            "no domains in radius bin [{}, {})",
            radius_bin.lo, radius_bin.hi
        )));
    }
    let bins = in_bin[0].table.counts.len();
    let mut value = 0.0;
    for bin in 0..bins {
        let q_tot: f64 = in_bin.iter().map(|t| t.table.q[bin]).sum();
        if q_tot == 0.0 {
            continue;
        }
        let rep_num: f64 = in_bin.iter().map(|t| t.table.ratio_sums[bin]).sum();
        let rep_den: f64 = in_bin.iter().map(|t| t.table.counts[bin] as f64).sum();
        value += (rep_num / rep_den) * q_tot / m as f64;
    }
    Ok(value)
}

/// Normalized hop distance d / d_max in [0, 1].
pub fn normalized_hop_distance(d: u64, d_max: u64) -> Result<f64> {
    if d_max < 1 {
        return Err(Error::Metric("d_max must be >= 1".into()));
    }
    if d > d_max {
        return Err(Error::Metric(format!("d {d} exceeds d_max {d_max}")));
    }
    Ok(d as f64 / d_max as f64)
}
