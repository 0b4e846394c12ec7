//! Tie-corrected Kruskal-Wallis H test with chi-square p-values.
//!
//! For `k` groups with sizes `n_i` and pooled rank sums `R_i` over `N`
//! observations:
//!
//! ```text
//! H = [12 / (N (N + 1)) * sum R_i^2 / n_i - 3 (N + 1)] / [1 - sum T / (N^3 - N)]
//! ```
//!
//! with `T = (t - 1) t (t + 1)` for every run of `t` tied values. The p-value
//! is the chi-square upper tail of `H` at `k - 1` degrees of freedom.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::TopicTimeSeries;
use crate::ingest::DateWindow;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("no values to rank")]
    Empty,
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("degenerate: all values tied")]
    Degenerate,
    #[error("window {window} holds {bins} bin(s); window too narrow for the chosen bin width")]
    WindowTooNarrow { window: usize, bins: usize },
    #[error("alpha must be in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("chi-square argument must be non-negative and finite, got {0}")]
    BadArgument(f64),
    #[error("unknown topic {0}")]
    UnknownTopic(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedSample {
    pub values: Vec<f64>,
    /// 1-based, tied runs share their mean rank.
    pub ranks: Vec<f64>,
    /// Sizes of tied runs (each at least 2), in value order.
    pub tie_groups: Vec<usize>,
}

impl RankedSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn rank_with_ties(values: &[f64]) -> Result<RankedSample, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(i));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut tie_groups = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i..j hold ranks i+1..=j.
        let mean = (i + 1 + j) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = mean;
        }
        if j - i >= 2 {
            tie_groups.push(j - i);
        }
        i = j;
    }
    Ok(RankedSample { values: values.to_vec(), ranks, tie_groups })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KruskalWallisResult {
    pub h: f64,
    pub df: usize,
    pub p_value: f64,
    pub group_sizes: Vec<usize>,
    pub rank_sums: Vec<f64>,
    /// `1 - sum T / (N^3 - N)`; exactly 1 without ties.
    pub tie_correction: f64,
    pub alpha: f64,
    pub significant: bool,
}

pub fn kruskal_wallis(groups: &[Vec<f64>], alpha: f64) -> Result<KruskalWallisResult, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::BadAlpha(alpha));
    }
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(g) = groups.iter().position(Vec::is_empty) {
        return Err(StatsError::EmptyGroup(g));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let ranked = rank_with_ties(&pooled)?;
    let n = pooled.len() as f64;
    let ties: f64 = ranked.tie_groups.iter().map(|&t| {
        let t = t as f64;
        (t - 1.0) * t * (t + 1.0)
    }).sum();
    let tie_correction = if ranked.tie_groups.is_empty() { 1.0 } else { 1.0 - ties / (n * n * n - n) };
    if tie_correction <= 0.0 {
        return Err(StatsError::Degenerate);
    }
    let mut rank_sums = Vec::with_capacity(groups.len());
    let mut offset = 0;
    for g in groups {
        rank_sums.push(ranked.ranks[offset..offset + g.len()].iter().sum::<f64>());
        offset += g.len();
    }
    let between: f64 = rank_sums.iter().zip(groups).map(|(r, g)| r * r / g.len() as f64).sum();
    let raw = 12.0 / (n * (n + 1.0)) * between - 3.0 * (n + 1.0);
    // Rounding can leave a tiny negative value when all rank means coincide.
    let h = (raw / tie_correction).max(0.0);
    let df = groups.len() - 1;
    let p_value = chi2_sf(h, df)?;
    Ok(KruskalWallisResult {
        h,
        df,
        p_value,
        group_sizes: groups.iter().map(Vec::len).collect(),
        rank_sums,
        tie_correction,
        alpha,
        significant: p_value < alpha,
    })
}

/// Natural log of the gamma function (Lanczos, g = 7, 9 terms), for
/// positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma `Q(a, x)`: power series for
/// `x < a + 1`, Lentz continued fraction otherwise.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (1.0 - sum * log_prefix.exp()).clamp(0.0, 1.0)
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

/// Chi-square upper tail `P(X >= x)` with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: usize) -> Result<f64, StatsError> {
    if !x.is_finite() || x < 0.0 || df == 0 {
        return Err(StatsError::BadArgument(x));
    }
    Ok(gamma_q(df as f64 / 2.0, x / 2.0))
}

/// Two-window test result with the inputs that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowTest {
    pub topic_id: usize,
    pub window1: DateWindow,
    pub window2: DateWindow,
    pub bin_weeks: u32,
    /// The windows share at least one bin.
    pub overlapping: bool,
    pub result: KruskalWallisResult,
}

/// Compares a topic's bin intensities in two date windows. Each window must
/// hold the start of at least two bins.
pub fn test_topic_windows(
    ts: &TopicTimeSeries,
    topic: usize,
    window1: &DateWindow,
    window2: &DateWindow,
    alpha: f64,
) -> Result<WindowTest, StatsError> {
    let intensities = ts.intensities(topic).map_err(|_| StatsError::UnknownTopic(topic))?;
    let (b1, b2) = (ts.bins_in(window1), ts.bins_in(window2));
    for (i, bins) in [&b1, &b2].into_iter().enumerate() {
        if bins.len() < 2 {
            return Err(StatsError::WindowTooNarrow { window: i + 1, bins: bins.len() });
        }
    }
    let overlapping = b1.start < b2.end && b2.start < b1.end;
    let groups = vec![intensities[b1].to_vec(), intensities[b2].to_vec()];
    Ok(WindowTest {
        topic_id: topic,
        window1: *window1,
        window2: *window2,
        bin_weeks: ts.width().weeks(),
        overlapping,
        result: kruskal_wallis(&groups, alpha)?,
    })
}
