//! ℓ₂-constrained PGD against the smoothed classifier.
//!
//! The inner maximization drives the corrupted-input loss −log[G(x̂)]_y
//! upward inside an ε-ball around the clean input. Two gradient estimators
//! are available:
//!
//! - [`stochastic_grad`] — exact gradient of the fixed-noise objective
//!   −log((1/m)·Σᵢ [F(x̂+δᵢ)]_y), one backprop per noise sample;
//! - [`one_point_grad`] — forward-only estimator (1/m)·Σᵢ (δᵢ/σ²)·[F(x̂+δᵢ)]_y
//!   of ∇[G(x̂)]_y, cheaper per step but higher variance.
//!
//! The noise pack is drawn once per example and reused across every PGD
//! step; the same pack later augments the training pairs.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::l2_norm;
use crate::nn::{self, ParamVector};

/// Gradient estimator used by the attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Stochastic,
    OnePoint,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Stochastic => "stochastic",
            Estimator::OnePoint => "one_point",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stochastic" => Ok(Estimator::Stochastic),
            "one_point" => Ok(Estimator::OnePoint),
            other => Err(Error::Config(format!(
                "unknown estimator {other:?}; expected stochastic or one_point"
            ))),
        }
    }
}

/// Inner-maximization parameters: ℓ₂ budget, PGD step count, step length,
/// estimator kind, and noise samples per example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    pub epsilon: f64,
    pub steps: usize,
    pub inner_lr: f64,
    pub estimator: Estimator,
    pub m: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            epsilon: 0.5,
            steps: 2,
            inner_lr: 0.01,
            estimator: Estimator::Stochastic,
            m: 2,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Domain {
                what: "epsilon",
                value: self.epsilon,
                range: "(0, inf)",
            });
        }
        if self.steps == 0 {
            return Err(Error::Config("attack needs at least one step".into()));
        }
        if !(self.inner_lr > 0.0) {
            return Err(Error::Domain {
                what: "inner_lr",
                value: self.inner_lr,
                range: "(0, inf)",
            });
        }
        if self.m == 0 {
            return Err(Error::Config("noise sample count m must be >= 1".into()));
        }
        Ok(())
    }
}

/// The i.i.d. Gaussian noise vectors bound to one example for the duration
/// of its attack and training augmentation.
#[derive(Debug, Clone)]
pub struct NoisePack {
    deltas: Vec<Vec<f64>>,
}

impl NoisePack {
    /// Draws `m` vectors from N(0, σ²·I).
    pub fn draw<R: Rng>(m: usize, dim: usize, sigma: f64, rng: &mut R) -> Self {
        let deltas = (0..m)
            .map(|_| {
                (0..dim)
                    .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        NoisePack { deltas }
    }

    /// A single all-zero vector; turns the smoothed attack into plain PGD
    /// against the base classifier.
    pub fn zero(dim: usize) -> Self {
        NoisePack {
            deltas: vec![vec![0.0; dim]],
        }
    }

    pub fn from_deltas(deltas: Vec<Vec<f64>>) -> Self {
        NoisePack { deltas }
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn deltas(&self) -> &[Vec<f64>] {
        &self.deltas
    }
}

/// Projects `candidate` onto the ℓ₂ ball of radius `epsilon` around
/// `center`. Points already inside come back unchanged.
pub fn project_l2_ball(candidate: &[f64], center: &[f64], epsilon: f64) -> Vec<f64> {
    let mut out = candidate.to_vec();
    project_l2_ball_in_place(&mut out, center, epsilon);
    out
}

fn project_l2_ball_in_place(candidate: &mut [f64], center: &[f64], epsilon: f64) {
    let dist = candidate
        .iter()
        .zip(center)
        .map(|(c, x)| (c - x) * (c - x))
        .sum::<f64>()
        .sqrt();
    if dist <= epsilon {
        return;
    }
    let scale = epsilon / dist;
    for (c, x) in candidate.iter_mut().zip(center) {
        *c = x + scale * (*c - x);
    }
}

/// Exact gradient of −log((1/m)·Σᵢ [F(x̂+δᵢ)]_y) with respect to x̂, with
/// the noise held fixed: −(Σᵢ ∇[F]_y(x̂+δᵢ)) / (Σᵢ [F]_y(x̂+δᵢ)).
pub fn stochastic_grad(
    params: &ParamVector,
    xhat: &[f64],
    y: usize,
    noise: &NoisePack,
) -> Result<Vec<f64>> {
    let mut prob_sum = 0.0;
    let mut grad_sum = vec![0.0; xhat.len()];
    let mut corrupted = vec![0.0; xhat.len()];
    for delta in noise.deltas() {
        for ((c, &x), &d) in corrupted.iter_mut().zip(xhat).zip(delta) {
            *c = x + d;
        }
        prob_sum += nn::prob_of(params, &corrupted, y)?;
        for (g, dg) in grad_sum.iter_mut().zip(nn::input_grad(params, &corrupted, y)?) {
            *g += dg;
        }
    }
    if prob_sum == 0.0 {
        return Err(Error::Numeric(format!(
            "smoothed probability of class {y} underflowed to zero"
        )));
    }
    let denom = prob_sum.max(1e-300);
    for g in &mut grad_sum {
        *g = -*g / denom;
    }
    Ok(grad_sum)
}

/// Forward-only estimate (1/m)·Σᵢ (δᵢ/σ²)·f(x̂+δᵢ) of the gradient of the
/// Gaussian smoothing of `value` at `xhat`.
pub fn one_point_estimate<F>(
    value: F,
    xhat: &[f64],
    noise: &NoisePack,
    sigma: f64,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    debug_assert!(sigma > 0.0);
    let m = noise.len() as f64;
    let inv_sigma2 = 1.0 / (sigma * sigma);
    let mut est = vec![0.0; xhat.len()];
    let mut corrupted = vec![0.0; xhat.len()];
    for delta in noise.deltas() {
        for ((c, &x), &d) in corrupted.iter_mut().zip(xhat).zip(delta) {
            *c = x + d;
        }
        let v = value(&corrupted)?;
        for (e, &d) in est.iter_mut().zip(delta) {
            *e += d * inv_sigma2 * v / m;
        }
    }
    Ok(est)
}

/// One-point estimator of ∇[G(x̂)]_y: function values only, no backprop.
pub fn one_point_grad(
    params: &ParamVector,
    xhat: &[f64],
    y: usize,
    noise: &NoisePack,
    sigma: f64,
) -> Result<Vec<f64>> {
    one_point_estimate(|x| nn::prob_of(params, x, y), xhat, noise, sigma)
}

/// Runs the ℓ₂ PGD attack against the smoothed classifier, starting from the
/// clean input. Every step normalizes the ascent direction to length
/// `inner_lr`, projects back onto the ε-ball, and clamps to the `[0,1]` box.
/// Steps with a vanishing gradient leave the iterate unchanged.
pub fn smoothadv_attack(
    params: &ParamVector,
    x: &[f64],
    y: usize,
    acfg: &AttackConfig,
    sigma: f64,
    noise: &NoisePack,
) -> Result<Vec<f64>> {
    acfg.validate()?;
    if noise.len() != acfg.m {
        return Err(Error::InvalidArgument(format!(
            "noise pack has {} vectors, attack expects m = {}",
            noise.len(),
            acfg.m
        )));
    }
    let mut xhat = x.to_vec();
    for _ in 0..acfg.steps {
        let g = match acfg.estimator {
            Estimator::Stochastic => stochastic_grad(params, &xhat, y, noise)?,
            Estimator::OnePoint => {
                let mut g = one_point_grad(params, &xhat, y, noise, sigma)?;
                for v in &mut g {
                    *v = -*v;
                }
                g
            }
        };
        let norm = l2_norm(&g);
        if norm >= 1e-12 {
            let scale = acfg.inner_lr / norm;
            for (xi, gi) in xhat.iter_mut().zip(&g) {
                *xi += scale * gi;
            }
        }
        project_l2_ball_in_place(&mut xhat, x, acfg.epsilon);
        for v in &mut xhat {
            *v = v.clamp(0.0, 1.0);
        }
    }
    Ok(xhat)
}
