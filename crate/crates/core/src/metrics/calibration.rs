use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::intent::{Action, NUM_ACTIONS};

/// One scored decode: the top-class confidence, the predicted class and the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPrediction {
    pub confidence: f64,
    pub predicted: Action,
    pub truth: Action,
    /// Full posterior when available; needed for temperature scaling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posterior: Option<[f64; NUM_ACTIONS]>,
}

impl LabeledPrediction {
    pub fn new(confidence: f64, predicted: Action, truth: Action) -> Self {
        Self { confidence, predicted, truth, posterior: None }
    }

    /// Confidence and prediction taken from a posterior (ties to the lowest index).
    pub fn from_posterior(p: [f64; NUM_ACTIONS], truth: Action) -> Self {
        let k = crate::intent::argmax(&p);
        Self { confidence: p[k], predicted: Action::ALL[k], truth, posterior: Some(p) }
    }

    pub fn correct(&self) -> bool {
        self.predicted == self.truth
    }
}

fn validate(preds: &[LabeledPrediction]) -> Result<(), MetricsError> {
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some((i, p)) = preds.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(&p.confidence)) {
        return Err(MetricsError::InvalidConfidence { index: i, value: p.confidence });
    }
    Ok(())
}

/// Upper edge of equal-width bin `k` (zero-based) out of `m`.
fn edge(k: usize, m: usize) -> f64 {
    k as f64 / m as f64
}

/// Equal-width bin of a confidence: `(k/M, (k+1)/M]`, with 0 placed in the first bin.
pub fn bin_index(confidence: f64, m: usize) -> usize {
    let mut k = ((confidence * m as f64).ceil() as usize).clamp(1, m) - 1;
    while k > 0 && confidence <= edge(k, m) {
        k -= 1;
    }
    while k + 1 < m && confidence > edge(k + 1, m) {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub accuracy: f64,
    pub confidence: f64,
}

impl Bin {
    pub fn gap(&self) -> f64 {
        (self.accuracy - self.confidence).abs()
    }
}

struct Acc {
    count: usize,
    correct: usize,
    conf_sum: f64,
}

fn summarize(groups: Vec<(f64, f64, Acc)>) -> Vec<Bin> {
    groups
        .into_iter()
        .map(|(lower, upper, a)| {
            let n = a.count.max(1) as f64;
            Bin { lower, upper, count: a.count, accuracy: a.correct as f64 / n, confidence: a.conf_sum / n }
        })
        .collect()
}

/// All `m` equal-width bins, empty ones included (with zero accuracy and confidence).
pub fn equal_width_bins(preds: &[LabeledPrediction], m: usize) -> Result<Vec<Bin>, MetricsError> {
    validate(preds)?;
    if m == 0 {
        return Err(MetricsError::InvalidBins(m));
    }
    let mut acc: Vec<Acc> = (0..m).map(|_| Acc { count: 0, correct: 0, conf_sum: 0.0 }).collect();
    for p in preds {
        let a = &mut acc[bin_index(p.confidence, m)];
        a.count += 1;
        a.correct += usize::from(p.correct());
        a.conf_sum += p.confidence;
    }
    Ok(summarize(acc.into_iter().enumerate().map(|(k, a)| (edge(k, m), edge(k + 1, m), a)).collect()))
}

/// Equal-count bins over the sorted confidences: sizes differ by at most one (larger bins
/// first), a bin boundary never splits equal confidences, and empty bins are dropped.
pub fn equal_count_bins(preds: &[LabeledPrediction], r: usize) -> Result<Vec<Bin>, MetricsError> {
    validate(preds)?;
    if r == 0 {
        return Err(MetricsError::InvalidBins(r));
    }
    let mut sorted: Vec<&LabeledPrediction> = preds.iter().collect();
    sorted.sort_by(|a, b| a.confidence.total_cmp(&b.confidence));
    let n = sorted.len();
    let (base, extra) = (n / r, n % r);
    let mut groups = Vec::new();
    let (mut start, mut nominal_end) = (0usize, 0usize);
    for k in 0..r {
        nominal_end += base + usize::from(k < extra);
        let mut end = nominal_end.max(start);
        while end > start && end < n && sorted[end].confidence == sorted[end - 1].confidence {
            end += 1;
        }
        if end > start {
            let slice = &sorted[start..end];
            let a = Acc {
                count: slice.len(),
                correct: slice.iter().filter(|p| p.correct()).count(),
                conf_sum: slice.iter().map(|p| p.confidence).sum(),
            };
            groups.push((slice[0].confidence, slice[slice.len() - 1].confidence, a));
        }
        start = end;
    }
    Ok(summarize(groups))
}

fn weighted_gap(bins: &[Bin], n: usize) -> f64 {
    bins.iter().filter(|b| b.count > 0).map(|b| b.count as f64 / n as f64 * b.gap()).sum()
}

fn max_gap(bins: &[Bin]) -> f64 {
    bins.iter().filter(|b| b.count > 0).map(Bin::gap).fold(0.0, f64::max)
}

/// Expected calibration error over `m` equal-width bins.
pub fn ece(preds: &[LabeledPrediction], m: usize) -> Result<f64, MetricsError> {
    let bins = equal_width_bins(preds, m)?;
    // A weighted mean cannot exceed the maximum; clamp away summation rounding.
    Ok(weighted_gap(&bins, preds.len()).min(max_gap(&bins)))
}

/// Maximum calibration error over nonempty equal-width bins.
pub fn mce(preds: &[LabeledPrediction], m: usize) -> Result<f64, MetricsError> {
    Ok(max_gap(&equal_width_bins(preds, m)?))
}

/// Adaptive calibration error over `r` equal-count bins.
pub fn ace(preds: &[LabeledPrediction], r: usize) -> Result<f64, MetricsError> {
    let bins = equal_count_bins(preds, r)?;
    Ok(weighted_gap(&bins, preds.len()).min(max_gap(&bins)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub n: usize,
    pub bins: usize,
    pub ece: f64,
    pub mce: f64,
    pub ace: f64,
    pub accuracy: f64,
    pub mean_confidence: f64,
    /// Fraction of predictions whose confidence exceeds the accuracy of their bin.
    pub overconfidence_rate: f64,
    pub per_bin: Vec<Bin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<TemperatureFit>,
}

impl CalibrationReport {
    /// ECE/MCE with `m` equal-width bins and ACE with `m` equal-count bins. Temperature scaling
    /// is included when every prediction carries a posterior and at least two classes occur.
    pub fn compute(preds: &[LabeledPrediction], m: usize) -> Result<Self, MetricsError> {
        let per_bin = equal_width_bins(preds, m)?;
        let n = preds.len();
        let mce = max_gap(&per_bin);
        let ece = weighted_gap(&per_bin, n).min(mce);
        let ace = ace(preds, m)?;
        let over = preds.iter().filter(|p| p.confidence > per_bin[bin_index(p.confidence, m)].accuracy).count();
        let temperature = preds
            .iter()
            .map(|p| p.posterior.map(|post| (post, p.truth)))
            .collect::<Option<Vec<_>>>()
            .and_then(|data| temperature_scale(&data, m).ok());
        Ok(Self {
            n,
            bins: m,
            ece,
            mce,
            ace,
            accuracy: preds.iter().filter(|p| p.correct()).count() as f64 / n as f64,
            mean_confidence: preds.iter().map(|p| p.confidence).sum::<f64>() / n as f64,
            overconfidence_rate: over as f64 / n as f64,
            per_bin,
            temperature,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureFit {
    pub t_star: f64,
    pub nll_at_one: f64,
    pub nll_at_t_star: f64,
    pub ece_before: f64,
    pub ece_after: f64,
}

pub const TEMPERATURE_RANGE: (f64, f64) = (0.25, 10.0);
const GRID_STEP: f64 = 0.01;
const PROB_FLOOR: f64 = 1e-12;

/// `softmax(ln p / T)`, i.e. `p^(1/T)` renormalized.
pub fn soften(p: &[f64; NUM_ACTIONS], t: f64) -> [f64; NUM_ACTIONS] {
    let logits = p.map(|x| x.max(PROB_FLOOR).ln() / t);
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.map(|l| (l - m).exp());
    let z: f64 = e.iter().sum();
    e.map(|v| v / z)
}

/// Mean negative log-likelihood of the true labels under tempered posteriors.
pub fn nll(data: &[([f64; NUM_ACTIONS], Action)], t: f64) -> f64 {
    data.iter()
        .map(|(p, y)| {
            let logits = p.map(|x| x.max(PROB_FLOOR).ln() / t);
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
            lse - logits[y.index()]
        })
        .sum::<f64>()
        / data.len() as f64
}

/// Minimizes NLL over `T ∈ [0.25, 10]`: a 0.01 grid, then golden-section refinement around the
/// best grid point. Reports ECE before and after tempering with `m` bins.
pub fn temperature_scale(data: &[([f64; NUM_ACTIONS], Action)], m: usize) -> Result<TemperatureFit, MetricsError> {
    if data.is_empty() {
        return Err(MetricsError::Empty);
    }
    if data.iter().all(|(_, y)| *y == data[0].1) {
        return Err(MetricsError::Degenerate("all labels belong to one class".into()));
    }
    let (lo, hi) = TEMPERATURE_RANGE;
    let steps = ((hi - lo) / GRID_STEP).round() as usize;
    let mut best = (lo, nll(data, lo));
    for k in 1..=steps {
        let t = lo + k as f64 * GRID_STEP;
        let v = nll(data, t);
        if v < best.1 {
            best = (t, v);
        }
    }
    let (mut a, mut b) = ((best.0 - GRID_STEP).max(lo), (best.0 + GRID_STEP).min(hi));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - phi * (b - a), a + phi * (b - a));
    let (mut fc, mut fd) = (nll(data, c), nll(data, d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = nll(data, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = nll(data, d);
        }
    }
    let refined = (a + b) / 2.0;
    let f_refined = nll(data, refined);
    let (t_star, nll_star) = if f_refined < best.1 { (refined, f_refined) } else { best };

    let scored = |t: f64| -> Result<f64, MetricsError> {
        let preds: Vec<LabeledPrediction> = data.iter().map(|(p, y)| LabeledPrediction::from_posterior(soften(p, t), *y)).collect();
        ece(&preds, m)
    };
    Ok(TemperatureFit { t_star, nll_at_one: nll(data, 1.0), nll_at_t_star: nll_star, ece_before: scored(1.0)?, ece_after: scored(t_star)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preds(conf: f64, correct: usize, wrong: usize) -> Vec<LabeledPrediction> {
        let mut v = vec![LabeledPrediction::new(conf, Action::Grasp, Action::Grasp); correct];
        v.extend(vec![LabeledPrediction::new(conf, Action::Grasp, Action::Rotate); wrong]);
        v
    }

    #[test]
    fn bin_edges_are_left_open_right_closed() {
        assert_eq!(bin_index(0.0, 10), 0);
        assert_eq!(bin_index(0.1, 10), 0);
        assert_eq!(bin_index(0.1000001, 10), 1);
        assert_eq!(bin_index(0.3, 10), 2);
        assert_eq!(bin_index(0.7, 10), 6);
        assert_eq!(bin_index(1.0, 10), 9);
        assert_eq!(bin_index(0.5, 1), 0);
    }

    #[test]
    fn perfect_and_single_bin_cases() {
        let perfect = preds(1.0, 50, 0);
        assert_eq!(ece(&perfect, 10).unwrap(), 0.0);
        assert_eq!(mce(&perfect, 10).unwrap(), 0.0);
        assert_eq!(ace(&perfect, 10).unwrap(), 0.0);
        let half = preds(0.9, 50, 50);
        assert!((ece(&half, 10).unwrap() - 0.4).abs() < 1e-12);
        assert!((mce(&half, 10).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(ace(&half, 10).unwrap(), ece(&half, 10).unwrap());
        assert_eq!(equal_count_bins(&half, 10).unwrap().len(), 1);
    }

    #[test]
    fn errors() {
        assert_eq!(ece(&[], 10), Err(MetricsError::Empty));
        assert_eq!(ece(&preds(0.5, 1, 0), 0), Err(MetricsError::InvalidBins(0)));
        assert!(matches!(ece(&preds(1.5, 1, 0), 10), Err(MetricsError::InvalidConfidence { .. })));
    }

    #[test]
    fn equal_count_sizes_spread_remainder_first() {
        let v: Vec<LabeledPrediction> = (0..10).map(|i| LabeledPrediction::new(i as f64 / 10.0, Action::Grasp, Action::Grasp)).collect();
        let sizes: Vec<usize> = equal_count_bins(&v, 3).unwrap().iter().map(|b| b.count).collect();
        assert_eq!(sizes, [4, 3, 3]);
        let sizes: Vec<usize> = equal_count_bins(&v[..2], 5).unwrap().iter().map(|b| b.count).collect();
        assert_eq!(sizes, [1, 1]);
    }

    #[test]
    fn report_counts_and_overconfidence() {
        let mut v = preds(0.9, 6, 4);
        v.extend(preds(0.3, 1, 0));
        let r = CalibrationReport::compute(&v, 10).unwrap();
        assert_eq!(r.per_bin.iter().map(|b| b.count).sum::<usize>(), 11);
        assert!(r.ece <= r.mce);
        assert!((r.overconfidence_rate - 10.0 / 11.0).abs() < 1e-12);
        assert!(r.temperature.is_none());
    }

    fn calibrated_dataset() -> Vec<([f64; 4], Action)> {
        // Each posterior is replicated 20 times with labels in exact proportion to its entries.
        let shapes =
            [[0.6, 0.2, 0.15, 0.05], [0.35, 0.3, 0.2, 0.15], [0.05, 0.8, 0.1, 0.05], [0.25, 0.25, 0.25, 0.25], [0.1, 0.1, 0.1, 0.7]];
        let mut data = Vec::new();
        for p in shapes {
            for (k, &pk) in p.iter().enumerate() {
                for _ in 0..(pk * 20.0f64).round() as usize {
                    data.push((p, Action::ALL[k]));
                }
            }
        }
        data
    }

    #[test]
    fn temperature_is_one_on_calibrated_data() {
        let fit = temperature_scale(&calibrated_dataset(), 10).unwrap();
        assert!((fit.t_star - 1.0).abs() <= 0.01, "{}", fit.t_star);
        assert!(fit.nll_at_t_star <= fit.nll_at_one);
    }

    #[test]
    fn overconfident_data_gets_softened() {
        let mut data = Vec::new();
        for i in 0..200 {
            let truth = if i % 2 == 0 { Action::Grasp } else { Action::ALL[1 + i % 3] };
            data.push(([0.9, 0.1 / 3.0, 0.1 / 3.0, 0.1 / 3.0], truth));
        }
        let fit = temperature_scale(&data, 10).unwrap();
        assert!(fit.t_star > 1.0);
        assert!(fit.nll_at_t_star <= fit.nll_at_one);
        assert!(fit.ece_after < fit.ece_before);
        let one_class: Vec<_> = data.iter().map(|(p, _)| (*p, Action::Grasp)).collect();
        assert!(matches!(temperature_scale(&one_class, 10), Err(MetricsError::Degenerate(_))));
    }

    #[test]
    fn soften_at_one_is_identity() {
        let p = [0.4, 0.3, 0.2, 0.1];
        for (a, b) in soften(&p, 1.0).iter().zip(p) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
