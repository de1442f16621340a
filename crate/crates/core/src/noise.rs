//! Information-container ablations.
//!
//! An embedding's information can live in its direction (the dimension values)
//! or in its magnitude (the norm). Each ablation here destroys one container and
//! leaves the other intact:
//!
//! * norm ablation resamples the L2 norm and keeps the direction,
//! * dimension ablation resamples every component and restores the original norm,
//! * the combination of both leaves nothing but noise.
//!
//! Half deletion drops one half of the components outright and is used to
//! localise information within the dimension container.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embed::{EmbeddingSet, SentenceEmbedding};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationKind {
    Vanilla,
    AblN,
    AblD,
    AblDn,
    #[serde(rename = "del_1h")]
    Del1h,
    #[serde(rename = "del_2h")]
    Del2h,
    RandVec,
}

impl AblationKind {
    pub const ALL: [AblationKind; 7] = [
        AblationKind::Vanilla,
        AblationKind::AblN,
        AblationKind::AblD,
        AblationKind::AblDn,
        AblationKind::Del1h,
        AblationKind::Del2h,
        AblationKind::RandVec,
    ];

    /// Stable machine name, as used in config files.
    pub fn name(self) -> &'static str {
        match self {
            AblationKind::Vanilla => "vanilla",
            AblationKind::AblN => "abl_n",
            AblationKind::AblD => "abl_d",
            AblationKind::AblDn => "abl_dn",
            AblationKind::Del1h => "del_1h",
            AblationKind::Del2h => "del_2h",
            AblationKind::RandVec => "rand_vec",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub kind: AblationKind,
    /// Inclusive range the new L2 norm is drawn from.
    pub norm_range: [f64; 2],
    /// Range each resampled component is drawn from.
    pub dim_range: [f64; 2],
}

impl AblationSpec {
    pub fn new(kind: AblationKind, norm_range: [f64; 2], dim_range: [f64; 2]) -> Result<Self> {
        let spec = AblationSpec {
            kind,
            norm_range,
            dim_range,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_ranges(kind: AblationKind, ranges: &RangeReport) -> Result<Self> {
        Self::new(
            kind,
            [ranges.l2_min, ranges.l2_max],
            [ranges.dim_min, ranges.dim_max],
        )
    }

    pub fn with_kind(&self, kind: AblationKind) -> Self {
        AblationSpec { kind, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let [nlo, nhi] = self.norm_range;
        let [dlo, dhi] = self.dim_range;
        if !(nlo.is_finite() && nhi.is_finite() && dlo.is_finite() && dhi.is_finite()) {
            return Err(Error::Config("ablation ranges must be finite".into()));
        }
        if !(nlo > 0.0 && nlo <= nhi) {
            return Err(Error::Config(format!(
                "norm range [{nlo}, {nhi}] must satisfy 0 < min <= max"
            )));
        }
        if dlo >= dhi {
            return Err(Error::Config(format!(
                "dimension range [{dlo}, {dhi}] must satisfy min < max"
            )));
        }
        Ok(())
    }
}

/// Empirical norm and component bounds of an embedding set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeReport {
    pub l2_min: f64,
    pub l2_max: f64,
    pub dim_min: f64,
    pub dim_max: f64,
    pub computed_over: String,
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (l2_norm(a) * l2_norm(b))
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn compute_ranges(set: &EmbeddingSet) -> Result<RangeReport> {
    if set.is_empty() {
        return Err(Error::Input("cannot compute ranges of an empty set".into()));
    }
    let mut report = RangeReport {
        l2_min: f64::INFINITY,
        l2_max: f64::NEG_INFINITY,
        dim_min: f64::INFINITY,
        dim_max: f64::NEG_INFINITY,
        computed_over: set.source().to_string(),
    };
    for e in set.iter() {
        let n = l2_norm(&e.vector);
        report.l2_min = report.l2_min.min(n);
        report.l2_max = report.l2_max.max(n);
        for &x in &e.vector {
            report.dim_min = report.dim_min.min(x);
            report.dim_max = report.dim_max.max(x);
        }
    }
    Ok(report)
}

fn nonzero_norm(v: &[f64]) -> Result<f64> {
    let n = l2_norm(v);
    if n > 0.0 && n.is_finite() {
        Ok(n)
    } else {
        Err(Error::Input(format!("degenerate vector (L2 norm {n})")))
    }
}

/// Scales `v` so that its L2 norm equals `target`.
pub fn rescale_to_norm(v: &[f64], target: f64) -> Result<Vec<f64>> {
    let n = nonzero_norm(v)?;
    let scale = target / n;
    Ok(v.iter().map(|x| x * scale).collect())
}

/// Keeps the direction of `v` and draws a new norm uniformly from `spec.norm_range`.
pub fn ablate_norm<R: Rng + ?Sized>(v: &[f64], spec: &AblationSpec, rng: &mut R) -> Result<Vec<f64>> {
    nonzero_norm(v)?;
    let target = uniform(rng, spec.norm_range);
    rescale_to_norm(v, target)
}

const MAX_ZERO_REDRAWS: usize = 1000;

/// Replaces every component with a uniform draw from `spec.dim_range`, then restores the norm of `v`.
pub fn ablate_dims<R: Rng + ?Sized>(v: &[f64], spec: &AblationSpec, rng: &mut R) -> Result<Vec<f64>> {
    let norm = nonzero_norm(v)?;
    for _ in 0..MAX_ZERO_REDRAWS {
        let raw: Vec<f64> = (0..v.len()).map(|_| uniform(rng, spec.dim_range)).collect();
        if l2_norm(&raw) > 0.0 {
            return rescale_to_norm(&raw, norm);
        }
    }
    Err(Error::Input(format!(
        "dimension range {:?} keeps producing zero vectors",
        spec.dim_range
    )))
}

/// Dimension ablation followed by norm ablation.
pub fn ablate_both<R: Rng + ?Sized>(v: &[f64], spec: &AblationSpec, rng: &mut R) -> Result<Vec<f64>> {
    let scrambled = ablate_dims(v, spec, rng)?;
    ablate_norm(&scrambled, spec, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Half {
    First,
    Second,
}

/// Deletes one half of the components.
///
/// `First` drops indices `[0, ceil(d/2))`; `Second` drops `[floor(d/2), d)`.
/// For odd `d` the middle component is dropped either way.
pub fn delete_half(v: &[f64], half: Half) -> Result<Vec<f64>> {
    let d = v.len();
    if d < 2 {
        return Err(Error::Input(format!("cannot halve a {d}-dimensional vector")));
    }
    Ok(match half {
        Half::First => v[d.div_ceil(2)..].to_vec(),
        Half::Second => v[..d / 2].to_vec(),
    })
}

/// A vector of `d` independent uniform draws from `spec.dim_range`.
pub fn random_vector<R: Rng + ?Sized>(d: usize, spec: &AblationSpec, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| uniform(rng, spec.dim_range)).collect()
}

/// Applies `spec.kind` to one vector.
pub fn transform<R: Rng + ?Sized>(v: &[f64], spec: &AblationSpec, rng: &mut R) -> Result<Vec<f64>> {
    match spec.kind {
        AblationKind::Vanilla => Ok(v.to_vec()),
        AblationKind::AblN => ablate_norm(v, spec, rng),
        AblationKind::AblD => ablate_dims(v, spec, rng),
        AblationKind::AblDn => ablate_both(v, spec, rng),
        AblationKind::Del1h => delete_half(v, Half::First),
        AblationKind::Del2h => delete_half(v, Half::Second),
        AblationKind::RandVec => Ok(random_vector(v.len(), spec, rng)),
    }
}

/// Applies `spec.kind` to every embedding, with a generator per sentence keyed by `(seed, id)`.
pub fn apply_condition(set: &EmbeddingSet, spec: &AblationSpec, seed: u64) -> Result<EmbeddingSet> {
    if spec.kind == AblationKind::Vanilla {
        return Ok(set.clone());
    }
    let out_dim = match spec.kind {
        AblationKind::Del1h | AblationKind::Del2h if set.dimensionality() >= 2 => {
            let d = set.dimensionality();
            if spec.kind == AblationKind::Del1h {
                d - d.div_ceil(2)
            } else {
                d / 2
            }
        }
        _ => set.dimensionality(),
    };
    let mut out = EmbeddingSet::new(set.source(), out_dim);
    for e in set.iter() {
        let mut rng = seed::sentence_rng(seed, &e.sentence_id);
        let vector = transform(&e.vector, spec, &mut rng).map_err(|err| err.in_sentence(&e.sentence_id))?;
        out.insert(SentenceEmbedding {
            sentence_id: e.sentence_id.clone(),
            vector,
            source: e.source.clone(),
        })?;
    }
    Ok(out)
}
