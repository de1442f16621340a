//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use probe_core::Label;

/// Asymptotic KS critical value for p = 0.01.
pub const KS_C_001: f64 = 1.628;

/// One-sample KS statistic against Uniform(lo, hi).
pub fn ks_uniform(samples: &[f64], lo: f64, hi: f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Two-sample KS acceptance at p > 0.01.
pub fn ks_two_sample_accepts(a: &[f64], b: &[f64]) -> bool {
    let (n, m) = (a.len() as f64, b.len() as f64);
    ks_two_sample(a, b) < KS_C_001 * ((n + m) / (n * m)).sqrt()
}

/// O(n^2) AUC: probability a positive outscores a negative, ties count half.
pub fn pairwise_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, li) in labels.iter().enumerate() {
        if !li.is_positive() {
            continue;
        }
        for (j, lj) in labels.iter().enumerate() {
            if lj.is_positive() {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Textbook two-pass Pearson coefficient.
pub fn two_pass_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Published (mean, CI) rows with their shading: `R` random-like, `V` vanilla-like, `*` neither.
/// Columns: table, condition, fixed mean, fixed CI, fixed shade, resampled mean, resampled CI, resampled shade.
pub type PublishedRow = (&'static str, &'static str, f64, f64, char, f64, f64, char);

pub const PUBLISHED_ROWS: &[PublishedRow] = &[
    ("glove", "rand_pred", 0.4994, 0.0015, 'R', 0.4998, 0.0013, 'R'),
    ("glove", "rand_vec", 0.4997, 0.0015, 'R', 0.5, 0.0013, 'R'),
    ("glove", "vanilla", 0.7485, 0.0003, 'V', 0.7717, 0.0022, 'V'),
    ("glove", "abl_n", 0.7445, 0.0006, '*', 0.7687, 0.0021, 'V'),
    ("glove", "abl_d", 0.5012, 0.0018, 'R', 0.4993, 0.0015, 'R'),
    ("glove", "abl_dn", 0.4991, 0.0018, 'R', 0.5005, 0.0015, 'R'),
    ("glove", "del_1h", 0.7737, 0.0005, '*', 0.7553, 0.0023, '*'),
    ("glove", "del_2h", 0.7043, 0.0005, '*', 0.7545, 0.002, '*'),
    ("bert", "rand_pred", 0.4997, 0.0015, 'R', 0.4998, 0.0013, 'R'),
    ("bert", "rand_vec", 0.4997, 0.0015, 'R', 0.5013, 0.0013, 'R'),
    ("bert", "vanilla", 0.8411, 0.0002, 'V', 0.8524, 0.0016, 'V'),
    ("bert", "abl_n", 0.8413, 0.0003, 'V', 0.8532, 0.0016, 'V'),
    ("bert", "abl_d", 0.4991, 0.0019, 'R', 0.4978, 0.0015, 'R'),
    ("bert", "abl_dn", 0.4999, 0.0018, 'R', 0.5004, 0.0015, 'R'),
    ("bert", "del_1h", 0.8668, 0.0002, '*', 0.8576, 0.0016, '*'),
    ("bert", "del_2h", 0.8137, 0.0003, '*', 0.8368, 0.0016, '*'),
];

/// Classifies every published table with the runner's table logic and
/// returns the rows whose flag disagrees with the published shading.
pub fn published_shading_mismatches() -> Vec<String> {
    use probe_core::runner::classify_table;
    use probe_core::{Classification, Condition, ExperimentSummary, SplitKind};

    let shade = |c: Classification| match c {
        Classification::SameAsRandom => 'R',
        Classification::SameAsVanilla => 'V',
        Classification::Distinct => '*',
    };
    let mut mismatches = Vec::new();
    for table in ["glove", "bert"] {
        let mut rows = Vec::new();
        let mut expected = Vec::new();
        for &(t, cond, fm, fc, fs, rm, rc, rs) in PUBLISHED_ROWS {
            if t != table {
                continue;
            }
            let condition: Condition = cond.parse().unwrap();
            for (split, mean, ci, s) in [(SplitKind::Fixed, fm, fc, fs), (SplitKind::Resampled, rm, rc, rs)] {
                rows.push(ExperimentSummary {
                    condition,
                    split,
                    mean,
                    ci_halfwidth: ci,
                    n_runs: 50,
                    classification: Classification::Distinct,
                });
                expected.push(((condition, split), s));
            }
        }
        classify_table(&mut rows);
        for ((condition, split), s) in expected {
            let row = rows
                .iter()
                .find(|r| r.condition == condition && r.split == split)
                .unwrap();
            if shade(row.classification) != s {
                mismatches.push(format!(
                    "{table} {condition} {}: got {} expected {s}",
                    split.label(),
                    shade(row.classification)
                ));
            }
        }
    }
    mismatches
}
