//! Black-box zeroth-order attack.
//!
//! The victim is reachable only through [`Victim::query`], which maps a
//! feature vector to class probabilities. Gradients of a hinge loss on
//! log-probabilities are estimated by symmetric finite differences one
//! coordinate at a time, and each estimated coordinate takes a signed step.
//! Everything happens in z-scored feature space (see [`FeatureScaler`]).

mod scaler;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ProbabilityVector;
use crate::seed;
pub use scaler::FeatureScaler;

/// Query access to a model under attack.
pub trait Victim: Sync {
    fn query(&self, x: &[f64]) -> ProbabilityVector;
}

impl<F> Victim for F
where
    F: Fn(&[f64]) -> ProbabilityVector + Sync,
{
    fn query(&self, x: &[f64]) -> ProbabilityVector {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Finite-difference half-step.
    pub h: f64,
    pub step_size: f64,
    pub max_iters: usize,
    /// Confidence margin; success requires loss ≤ −kappa.
    pub kappa: f64,
    pub coords_per_iter: usize,
    /// Per-feature (min, max). Empty means unbounded.
    #[serde(default)]
    pub clip: Vec<(f64, f64)>,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            h: 0.2,
            step_size: 0.3,
            max_iters: 200,
            kappa: 0.0,
            coords_per_iter: 16,
            clip: Vec::new(),
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::AttackConfig(m));
        if !(self.h > 0.0) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if !(self.step_size > 0.0) {
            return bad(format!("step_size must be positive, got {}", self.step_size));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.kappa >= 0.0) {
            return bad(format!("kappa must be non-negative, got {}", self.kappa));
        }
        if self.coords_per_iter == 0 {
            return bad("coords_per_iter must be at least 1".into());
        }
        if !self.clip.is_empty() {
            if self.clip.len() != dim {
                return bad(format!("clip has {} bounds for dimension {dim}", self.clip.len()));
            }
            if let Some(i) = self.clip.iter().position(|(lo, hi)| !(lo <= hi)) {
                return bad(format!("clip bound {i} has min > max"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub original: Vec<f64>,
    pub perturbed: Vec<f64>,
    /// Prediction at `perturbed` differs from the true class.
    pub success: bool,
    pub queries: usize,
    pub iterations_used: usize,
    pub final_loss: f64,
}

/// `max(log p_true − max_{i≠true} log p_i, −kappa)`.
pub fn attack_loss(proba: &ProbabilityVector, true_class: usize, kappa: f64) -> f64 {
    let p = proba.as_slice();
    let other = p
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != true_class)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    (p[true_class].ln() - other.ln()).max(-kappa)
}

/// Symmetric difference `(f(x + h·e_i) − f(x − h·e_i)) / 2h`; two queries.
pub fn estimate_gradient<F: FnMut(&[f64]) -> f64>(f: F, x: &[f64], i: usize, h: f64) -> f64 {
    estimate_gradient_within(f, x, i, h, f64::NEG_INFINITY, f64::INFINITY)
}

/// As [`estimate_gradient`], with probe points clamped to `[lo, hi]`; the
/// divisor becomes the clamped span.
pub fn estimate_gradient_within<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], i: usize, h: f64, lo: f64, hi: f64) -> f64 {
    let mut probe = x.to_vec();
    let up = (x[i] + h).min(hi);
    let down = (x[i] - h).max(lo);
    probe[i] = up;
    let f_up = f(&probe);
    probe[i] = down;
    let f_down = f(&probe);
    let span = if up == x[i] + h && down == x[i] - h { 2.0 * h } else { up - down };
    if span <= 0.0 {
        0.0
    } else {
        (f_up - f_down) / span
    }
}

struct Counted<'a, V: Victim + ?Sized> {
    victim: &'a V,
    queries: usize,
}

impl<V: Victim + ?Sized> Counted<'_, V> {
    fn query(&mut self, x: &[f64]) -> ProbabilityVector {
        self.queries += 1;
        self.victim.query(x)
    }
}

/// Untargeted attack on a single point. Returns the lowest-loss point seen.
pub fn zoo_attack<V: Victim + ?Sized>(victim: &V, x: &[f64], true_class: usize, cfg: &AttackConfig) -> Result<AttackResult> {
    let d = x.len();
    cfg.validate(d)?;
    // Bounds always contain the starting point.
    let bounds: Vec<(f64, f64)> = (0..d)
        .map(|i| match cfg.clip.get(i) {
            Some(&(lo, hi)) => (lo.min(x[i]), hi.max(x[i])),
            None => (f64::NEG_INFINITY, f64::INFINITY),
        })
        .collect();
    let mut oracle = Counted { victim, queries: 0 };
    let mut rng = seed::rng(cfg.seed, &[0x7a6f6f]);

    let p0 = oracle.query(x);
    let fooled = |p: &ProbabilityVector, loss: f64| loss <= -cfg.kappa && p.argmax() != true_class;
    let loss0 = attack_loss(&p0, true_class, cfg.kappa);
    let mut best = (loss0, x.to_vec(), fooled(&p0, loss0));
    if best.2 {
        return Ok(AttackResult {
            original: x.to_vec(),
            perturbed: x.to_vec(),
            success: true,
            queries: oracle.queries,
            iterations_used: 0,
            final_loss: loss0,
        });
    }

    let mut current = x.to_vec();
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut epoch_moved = false;
    let mut iterations = 0;
    let mut grads = Vec::with_capacity(cfg.coords_per_iter);

    while iterations < cfg.max_iters {
        iterations += 1;
        grads.clear();
        for _ in 0..cfg.coords_per_iter.min(d) {
            if cursor == d {
                if !epoch_moved {
                    // Flat region: random kick of size h.
                    let j = rng.random_range(0..d);
                    let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    current[j] = (current[j] + dir * cfg.h).clamp(bounds[j].0, bounds[j].1);
                }
                order.shuffle(&mut rng);
                cursor = 0;
                epoch_moved = false;
            }
            let i = order[cursor];
            cursor += 1;
            let loss_at = |z: &[f64]| attack_loss(&oracle.query(z), true_class, cfg.kappa);
            let g = estimate_gradient_within(loss_at, &current, i, cfg.h, bounds[i].0, bounds[i].1);
            grads.push((i, g));
        }
        for &(i, g) in &grads {
            if g != 0.0 {
                epoch_moved = true;
                current[i] = (current[i] - cfg.step_size * g.signum()).clamp(bounds[i].0, bounds[i].1);
            }
        }
        let p = oracle.query(&current);
        let loss = attack_loss(&p, true_class, cfg.kappa);
        let success = fooled(&p, loss);
        if loss < best.0 || success {
            best = (loss, current.clone(), success);
        }
        if success {
            break;
        }
    }

    Ok(AttackResult {
        original: x.to_vec(),
        perturbed: best.1,
        success: best.2,
        queries: oracle.queries,
        iterations_used: iterations,
        final_loss: best.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetAttack {
    pub results: Vec<AttackResult>,
    /// Fraction of originally correct samples whose prediction was flipped.
    pub success_rate: f64,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
}

impl DatasetAttack {
    pub fn adversarial(&self) -> impl Iterator<Item = &[f64]> {
        self.results.iter().map(|r| r.perturbed.as_slice())
    }
}

/// Attacks every sample independently (seed per sample index).
pub fn attack_dataset<V: Victim + ?Sized>(victim: &V, samples: &[&[f64]], true_classes: &[usize], cfg: &AttackConfig) -> Result<DatasetAttack> {
    if samples.is_empty() {
        return Err(Error::EmptySlice("attack samples".into()));
    }
    if samples.len() != true_classes.len() {
        return Err(Error::Shape { expected: samples.len(), got: true_classes.len() });
    }
    cfg.validate(samples[0].len())?;
    let results = samples
        .par_iter()
        .zip(true_classes)
        .enumerate()
        .map(|(n, (x, &c))| {
            let per_sample = AttackConfig { seed: seed::derive(cfg.seed, &[n as u64]), ..cfg.clone() };
            zoo_attack(victim, x, c, &per_sample)
        })
        .collect::<Result<Vec<_>>>()?;

    let correct = |x: &[f64], c: usize| victim.query(x).argmax() == c;
    let n = samples.len() as f64;
    let before: Vec<bool> = samples.iter().zip(true_classes).map(|(x, &c)| correct(x, c)).collect();
    let after: Vec<bool> = results.iter().zip(true_classes).map(|(r, &c)| correct(&r.perturbed, c)).collect();
    let originally_correct = before.iter().filter(|&&b| b).count();
    let flipped = before.iter().zip(&after).filter(|(b, a)| **b && !**a).count();
    Ok(DatasetAttack {
        success_rate: if originally_correct == 0 { 0.0 } else { flipped as f64 / originally_correct as f64 },
        accuracy_before: before.iter().filter(|&&b| b).count() as f64 / n,
        accuracy_after: after.iter().filter(|&&b| b).count() as f64 / n,
        results,
    })
}
