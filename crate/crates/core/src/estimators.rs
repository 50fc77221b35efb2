//! Signal estimators and the quantities used to score them.
//!
//! * [`unfolding_estimate`]: dominant eigenvector of the Gram matrix of an unfolding.
//! * [`oracle_estimate`]: dominant right singular vector of the weighted slice
//!   sum `Σ_k z_k T[:,:,k]`, given the true `z`.
//! * [`tensor_rank1_estimate`]: alternating power iteration on `⟨T, u⊗v⊗w⟩`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{stream_rng, unit_sphere};
use crate::spectra::{gram, gram_unfolding, sym_eigen, SpectrumResult};
use crate::tensor::{dot, norm, normalized, Mode, Tensor3};

const RESTART_SEED: u64 = 0x5eed_1dea;
const RESTART_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Unfold1,
    Unfold2,
    Unfold3,
    Oracle,
    Tensor,
}

impl Method {
    pub fn unfolding(mode: Mode) -> Method {
        match mode {
            Mode::One => Method::Unfold1,
            Mode::Two => Method::Unfold2,
            Mode::Three => Method::Unfold3,
        }
    }
}

/// A unit-norm signal estimate.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub vector: Vec<f64>,
    pub method: Method,
    pub iterations_used: usize,
    /// `⟨T, u⊗v⊗w⟩` for the tensor method.
    pub objective: Option<f64>,
}

/// Dominant eigenvector of `T^(m) T^(m)ᵀ`, plus the full raw spectrum.
pub fn unfolding_estimate(t: &Tensor3, mode: Mode) -> Result<(Estimate, SpectrumResult)> {
    let sr = sym_eigen(&gram_unfolding(t, mode))?;
    let est = Estimate {
        vector: sr.top_eigenvector(),
        method: Method::unfolding(mode),
        iterations_used: sr.sweeps,
        objective: None,
    };
    Ok((est, sr))
}

/// Dominant right singular vector of `T̄ = Σ_k z_k T[:,:,k]`, together with
/// the ascending eigenvalues of `T̄ᵀT̄` (length `n2`).
///
/// Only the smaller of `T̄ᵀT̄` and `T̄T̄ᵀ` is decomposed; when that is the
/// latter the right singular vector is `T̄ᵀu/‖T̄ᵀu‖` and the spectrum is
/// padded with `n2 − n1` zeros.
pub fn oracle_estimate(t: &Tensor3, z: &[f64]) -> Result<(Estimate, Vec<f64>)> {
    let [n1, n2, n3] = t.dims();
    if z.len() != n3 {
        return Err(Error::arg(format!("z has length {}, expected {n3}", z.len())));
    }
    if (norm(z) - 1.0).abs() > 1e-10 {
        return Err(Error::arg(format!("z must be unit norm, got {}", norm(z))));
    }
    let tbar = t.contract_3(z)?;
    let (vector, eigenvalues, sweeps) = if n2 <= n1 {
        let sr = sym_eigen(&gram(&tbar.transpose()))?;
        (sr.top_eigenvector(), sr.eigenvalues, sr.sweeps)
    } else {
        let sr = sym_eigen(&gram(&tbar))?;
        let right = tbar.tmatvec(&sr.top_eigenvector())?;
        let vector = match normalized(&right) {
            Some(mut v) => {
                let k = (0..v.len())
                    .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
                    .unwrap_or(0);
                if v[k] < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                v
            }
            None => {
                let mut e = vec![0.0; n2];
                e[0] = 1.0;
                e
            }
        };
        let mut ev = vec![0.0; n2 - n1];
        ev.extend(sr.eigenvalues.iter().map(|&l| l.max(0.0)));
        (vector, crate::stats::sorted(ev), sr.sweeps)
    };
    let est = Estimate {
        vector,
        method: Method::Oracle,
        iterations_used: sweeps,
        objective: None,
    };
    Ok((est, eigenvalues))
}

/// Spectrum of `(1/ς²) T̄ᵀT̄` from the raw oracle eigenvalues.
pub fn scaled_oracle_spectrum(eigenvalues: &[f64], varsigma2: f64) -> Vec<f64> {
    eigenvalues.iter().map(|l| l / varsigma2).collect()
}

/// Starting point for [`tensor_rank1_estimate`].
#[derive(Debug, Clone)]
pub enum Init {
    /// Top eigenvectors of the three unfoldings.
    Unfolding,
    Random { seed: u64 },
    Provided { u: Vec<f64>, v: Vec<f64>, w: Vec<f64> },
}

/// Output of the alternating power iteration.
#[derive(Debug, Clone)]
pub struct RankOne {
    pub x: Estimate,
    pub y: Estimate,
    pub z: Estimate,
    /// Objective before the first sweep and after each sweep.
    pub history: Vec<f64>,
    pub restarted: bool,
}

fn random_init(dims: [usize; 3], seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(seed, RESTART_STREAM);
    let u = unit_sphere(&mut rng, dims[0]);
    let v = unit_sphere(&mut rng, dims[1]);
    let w = unit_sphere(&mut rng, dims[2]);
    (u, v, w)
}

fn initial_point(t: &Tensor3, init: &Init) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let dims = t.dims();
    match init {
        Init::Unfolding => {
            let u = unfolding_estimate(t, Mode::One)?.0.vector;
            let v = unfolding_estimate(t, Mode::Two)?.0.vector;
            let w = unfolding_estimate(t, Mode::Three)?.0.vector;
            Ok((u, v, w))
        }
        Init::Random { seed } => Ok(random_init(dims, *seed)),
        Init::Provided { u, v, w } => {
            if [u.len(), v.len(), w.len()] != dims {
                return Err(Error::arg("provided initial vectors do not match tensor dims"));
            }
            let unit = |x: &[f64]| {
                normalized(x).ok_or_else(|| Error::arg("provided initial vector is zero"))
            };
            Ok((unit(u)?, unit(v)?, unit(w)?))
        }
    }
}

/// One sweep `u ← T(·,v,w)`, `v ← T(u,·,w)`, `w ← T(u,v,·)`, each normalized.
/// `None` when a contraction vanishes.
fn sweep(t: &Tensor3, u: &mut Vec<f64>, v: &mut Vec<f64>, w: &mut Vec<f64>) -> Result<Option<()>> {
    let Some(nu) = normalized(&t.contract_23(v, w)?) else { return Ok(None) };
    *u = nu;
    let Some(nv) = normalized(&t.contract_13(u, w)?) else { return Ok(None) };
    *v = nv;
    let Some(nw) = normalized(&t.contract_12(u, v)?) else { return Ok(None) };
    *w = nw;
    Ok(Some(()))
}

/// Rank-one approximation `argmax ⟨T, u⊗v⊗w⟩` over unit vectors by
/// alternating power iteration.
///
/// Stops when a sweep gains less than `tol` or after `max_iters` sweeps. A
/// vanishing contraction triggers one restart from a random point.
pub fn tensor_rank1_estimate(t: &Tensor3, init: &Init, max_iters: usize, tol: f64) -> Result<RankOne> {
    if max_iters == 0 {
        return Err(Error::arg("max_iters must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::arg(format!("tol must be positive, got {tol}")));
    }
    let (mut u, mut v, mut w) = initial_point(t, init)?;
    let mut restarted = false;

    'outer: loop {
        // flipping one factor turns a negative objective positive
        let mut obj = t.rank1_inner(&u, &v, &w)?;
        if obj < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
            obj = -obj;
        }
        let mut history = vec![obj];
        let mut iters = 0;
        for it in 1..=max_iters {
            if sweep(t, &mut u, &mut v, &mut w)?.is_none() {
                if restarted {
                    return Err(Error::Numeric(
                        "rank-one iteration hit a zero contraction twice".into(),
                    ));
                }
                restarted = true;
                let seed = match init {
                    Init::Random { seed } => seed.wrapping_add(1),
                    _ => RESTART_SEED,
                };
                log::warn!("zero contraction in rank-one iteration; restarting from random point");
                (u, v, w) = random_init(t.dims(), seed);
                continue 'outer;
            }
            let next = t.rank1_inner(&u, &v, &w)?;
            history.push(next);
            iters = it;
            let gain = next - obj;
            obj = next;
            if gain < tol {
                break;
            }
        }
        let make = |vector: Vec<f64>| Estimate {
            vector,
            method: Method::Tensor,
            iterations_used: iters,
            objective: Some(obj),
        };
        return Ok(RankOne {
            x: make(u),
            y: make(v),
            z: make(w),
            history,
            restarted,
        });
    }
}

/// `|aᵀb|²`.
pub fn alignment(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::arg(format!(
            "alignment of vectors of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d = dot(a, b);
    Ok(d * d)
}

/// Outcome of sign-based two-class clustering.
#[derive(Debug, Clone)]
pub struct ClusterResult {
    /// ±1, oriented to the better of the two global flips.
    pub predicted_labels: Vec<f64>,
    /// Fraction of matching labels, in `[0.5, 1]`.
    pub accuracy: f64,
    /// `|ŷᵀȳ|²` with `ŷ` normalized and `ȳ = labels/√n`.
    pub alignment: f64,
    /// Entries of `ŷ` equal to zero (assigned +1).
    pub ties: usize,
    /// `√(n/(1−ζ̂)) (ŷ_j − √ζ̂ ȳ_j)` with the empirical `ζ̂` and `ŷ` oriented
    /// so that `ŷᵀȳ ≥ 0`.
    pub residuals: Vec<f64>,
}

fn check_labels(yhat: &[f64], labels: &[f64]) -> Result<()> {
    if yhat.len() != labels.len() || yhat.is_empty() {
        return Err(Error::arg(format!(
            "estimate has length {}, labels {}",
            yhat.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|&l| l != 1.0 && l != -1.0) {
        return Err(Error::arg("labels must be ±1"));
    }
    Ok(())
}

/// Standardized per-entry residuals of `ŷ` around `√ζ ȳ` for a given `ζ`.
pub fn standardized_residuals(yhat: &[f64], labels: &[f64], zeta: f64) -> Result<Vec<f64>> {
    check_labels(yhat, labels)?;
    let n = labels.len() as f64;
    let mut y = normalized(yhat).unwrap_or_else(|| yhat.to_vec());
    if dot(&y, labels) < 0.0 {
        y.iter_mut().for_each(|x| *x = -*x);
    }
    let z = zeta.clamp(0.0, 1.0);
    let scale = (n / (1.0 - z).max(f64::MIN_POSITIVE)).sqrt();
    let mean = z.sqrt() / n.sqrt();
    Ok(y.iter()
        .zip(labels)
        .map(|(&yj, &l)| scale * (yj - mean * l))
        .collect())
}

/// Clusters by the sign of `yhat` and scores against the true labels.
pub fn cluster_accuracy(yhat: &[f64], labels: &[f64]) -> Result<ClusterResult> {
    check_labels(yhat, labels)?;
    let n = labels.len();
    let mut ties = 0;
    let mut predicted: Vec<f64> = yhat
        .iter()
        .map(|&y| {
            if y == 0.0 {
                ties += 1;
            }
            if y >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let matches = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    let flipped = n - matches;
    if flipped > matches {
        predicted.iter_mut().for_each(|p| *p = -*p);
    }
    let accuracy = matches.max(flipped) as f64 / n as f64;

    let ybar: Vec<f64> = labels.iter().map(|l| l / (n as f64).sqrt()).collect();
    let zeta_hat = match normalized(yhat) {
        Some(y) => alignment(&y, &ybar)?,
        None => 0.0,
    };
    let residuals = standardized_residuals(yhat, labels, zeta_hat)?;
    Ok(ClusterResult {
        predicted_labels: predicted,
        accuracy,
        alignment: zeta_hat,
        ties,
        residuals,
    })
}
