//! The clipping operator, the θ = θᵘ + θᵇ decomposition of the clipped
//! gradient error, and the geometric median-of-means initial gradient estimate.

use crate::error::{Error, Result};
use crate::linalg::{norm2, Norm};
use crate::noise::{stochastic_grad_with, NoiseModel, Oracle};
use crate::problems::Problem;
use crate::rng::SimRng;
use crate::stats;

/// min{1, λ/‖g‖}·g. The factor is 1 when g = 0.
pub fn clip(g: &[f64], lambda: f64, norm: Norm) -> Vec<f64> {
    let mut out = g.to_vec();
    clip_in_place(&mut out, lambda, norm);
    out
}

/// Clips `g` in place and reports whether it was rescaled.
pub fn clip_in_place(g: &mut [f64], lambda: f64, norm: Norm) -> bool {
    debug_assert!(lambda > 0.0);
    let n = norm.eval(g);
    if n > lambda {
        let c = lambda / n;
        g.iter_mut().for_each(|v| *v *= c);
        true
    } else {
        false
    }
}

/// Monte Carlo estimates of the conditional law of clip(∇̂f(x), λ) at a fixed x.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMoments {
    /// Mean of the clipped samples, estimating E[clip(∇̂f(x), λ)].
    pub mean: Vec<f64>,
    /// θᵇ = mean − ∇f(x).
    pub bias: Vec<f64>,
    /// Standard error of `mean` measured in the dual norm: the dual norm of
    /// the vector of per-coordinate standard errors.
    pub mean_stderr: f64,
    /// Estimate of E‖clip − E clip‖_*² (the conditional second moment of θᵘ).
    pub second_moment: f64,
    pub second_moment_stderr: f64,
    /// Largest ‖clipᵢ − mean‖_* observed over the samples.
    pub max_deviation: f64,
    /// Number of samples with ‖clipᵢ − mean‖_* > 2λ.
    pub deviations_over_2lambda: usize,
    pub samples: usize,
}

/// Resamples `m` clipped stochastic gradients at `x` from `rng`.
pub fn conditional_moments(
    problem: &Problem,
    noise: &NoiseModel,
    x: &[f64],
    lambda: f64,
    m: usize,
    rng: &mut SimRng,
) -> ConditionalMoments {
    let d = x.len();
    let dual = problem.geometry().dual();
    let grad = problem.gradient(x);
    let mut samples = vec![0.0; m * d];
    for chunk in samples.chunks_mut(d) {
        stochastic_grad_with(problem, noise, x, chunk, rng);
        clip_in_place(chunk, lambda, dual);
    }
    // Shifted by the first draw so that identical samples average exactly.
    let shift = samples[..d].to_vec();
    let mut mean = vec![0.0; d];
    for chunk in samples.chunks(d) {
        for ((a, b), s) in mean.iter_mut().zip(chunk).zip(&shift) {
            *a += b - s;
        }
    }
    for (v, s) in mean.iter_mut().zip(&shift) {
        *v = s + *v / m as f64;
    }

    let mut var = vec![0.0; d];
    let mut sq = Vec::with_capacity(m);
    let mut dev = vec![0.0; d];
    let mut max_deviation: f64 = 0.0;
    let mut deviations_over_2lambda = 0;
    for chunk in samples.chunks(d) {
        for i in 0..d {
            dev[i] = chunk[i] - mean[i];
            var[i] += dev[i] * dev[i];
        }
        let n = dual.eval(&dev);
        max_deviation = max_deviation.max(n);
        deviations_over_2lambda += (n > 2.0 * lambda) as usize;
        sq.push(n * n);
    }
    let denom = (m.max(2) - 1) as f64;
    let se: Vec<f64> = var.iter().map(|v| (v / denom / m as f64).sqrt()).collect();
    let (raw_mean, second_moment_stderr) = stats::mean_stderr(&sq);
    let bias: Vec<f64> = mean.iter().zip(&grad).map(|(a, b)| a - b).collect();
    ConditionalMoments {
        bias,
        mean_stderr: dual.eval(&se),
        // Deviations are taken from the sample mean; rescale to the unbiased form.
        second_moment: raw_mean * m as f64 / denom,
        second_moment_stderr,
        max_deviation,
        deviations_over_2lambda,
        samples: m,
        mean,
    }
}

/// One realized clipped-gradient error at x together with its decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaEstimate {
    /// θ = clip(∇̂f(x), λ) − ∇f(x) for the primary draw.
    pub theta: Vec<f64>,
    /// θᵘ = θ − θᵇ.
    pub theta_u: Vec<f64>,
    /// θᵇ estimated from the auxiliary resamples.
    pub theta_b: Vec<f64>,
    pub mc_samples: usize,
    pub mc_stderr: f64,
    /// Estimate of E[‖θᵘ‖_*² | x].
    pub theta_u_second_moment: f64,
}

/// Draws one primary clipped gradient from the oracle and `m` auxiliary clipped
/// gradients from `aux` at the same x to estimate the conditional mean.
pub fn estimate_theta(
    oracle: &mut Oracle<'_>,
    x: &[f64],
    lambda: f64,
    m: usize,
    aux: &mut SimRng,
) -> ThetaEstimate {
    let problem = oracle.problem();
    let dual = problem.geometry().dual();
    let mut g = oracle.stochastic_grad(x);
    clip_in_place(&mut g, lambda, dual);
    let grad = problem.gradient(x);
    let theta: Vec<f64> = g.iter().zip(&grad).map(|(a, b)| a - b).collect();
    let cm = conditional_moments(problem, oracle.noise(), x, lambda, m, aux);
    let theta_u = theta.iter().zip(&cm.bias).map(|(a, b)| a - b).collect();
    ThetaEstimate {
        theta,
        theta_u,
        theta_b: cm.bias,
        mc_samples: m,
        mc_stderr: cm.mean_stderr,
        theta_u_second_moment: cm.second_moment,
    }
}

/// Weiszfeld settings for [`geometric_median`].
pub const WEISZFELD_TOL: f64 = 1e-10;
pub const WEISZFELD_MAX_ITER: usize = 1000;

/// Geometric median (ℓ2) of `points` by the Weiszfeld iteration with the
/// Vardi–Zhang correction for iterates that land on a data point.
///
/// Starts from the coordinatewise median and stops once an update moves less
/// than `tol·(1 + ‖y‖)`.
pub fn geometric_median(points: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let k = points.len();
    if k == 0 {
        return Err(Error::invalid("points", "need at least one point"));
    }
    let d = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p.len(),
        });
    }
    if k <= 2 {
        // Any point of the segment is a median; take its midpoint.
        return Ok((0..d)
            .map(|i| points.iter().map(|p| p[i]).sum::<f64>() / k as f64)
            .collect());
    }
    let mut y: Vec<f64> = (0..d)
        .map(|i| stats::median(&points.iter().map(|p| p[i]).collect::<Vec<_>>()))
        .collect();
    for _ in 0..max_iter {
        let mut num = vec![0.0; d];
        let mut wsum = 0.0;
        let mut coincident = 0usize;
        let mut r = vec![0.0; d];
        for p in points {
            let diff: Vec<f64> = p.iter().zip(&y).map(|(a, b)| a - b).collect();
            let dist = norm2(&diff);
            if dist <= 1e-300 {
                coincident += 1;
                continue;
            }
            let w = 1.0 / dist;
            wsum += w;
            for i in 0..d {
                num[i] += w * p[i];
                r[i] += w * diff[i];
            }
        }
        let next: Vec<f64> = if wsum == 0.0 {
            y.clone()
        } else {
            let t: Vec<f64> = num.iter().map(|v| v / wsum).collect();
            if coincident == 0 {
                t
            } else {
                // Vardi–Zhang: y ← (1 − η/‖r‖)⁺ T(y) + min(1, η/‖r‖) y.
                let rn = norm2(&r);
                let eta = coincident as f64;
                if rn <= eta {
                    return Ok(y);
                }
                let beta = eta / rn;
                t.iter()
                    .zip(&y)
                    .map(|(a, b)| (1.0 - beta) * a + beta * b)
                    .collect()
            }
        };
        let step = norm2(&next.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
        y = next;
        if step <= tol * (1.0 + norm2(&y)) {
            return Ok(y);
        }
    }
    Err(Error::WeiszfeldNotConverged {
        iterations: max_iter,
    })
}

/// Initial gradient estimate g₀ at x₀ and the observed μ = ‖g₀ − ∇f(x₀)‖_*/σ.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialGradient {
    pub g0: Vec<f64>,
    pub mu: f64,
}

/// Geometric median of `blocks` block means, each of `per_block` raw
/// stochastic gradients drawn from the oracle at x₀.
pub fn estimate_g0(
    oracle: &mut Oracle<'_>,
    x0: &[f64],
    blocks: usize,
    per_block: usize,
) -> Result<InitialGradient> {
    if blocks == 0 || per_block == 0 {
        return Err(Error::invalid(
            "blocks",
            "block count and block size must be >= 1",
        ));
    }
    let d = x0.len();
    let means: Vec<Vec<f64>> = (0..blocks)
        .map(|_| {
            let mut acc = vec![0.0; d];
            for _ in 0..per_block {
                let g = oracle.stochastic_grad(x0);
                acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            acc.iter().map(|v| v / per_block as f64).collect()
        })
        .collect();
    let g0 = geometric_median(&means, WEISZFELD_TOL, WEISZFELD_MAX_ITER)?;
    let problem = oracle.problem();
    let sigma = oracle.noise().sigma();
    let err = problem
        .geometry()
        .dual()
        .eval(&crate::linalg::sub(&g0, &problem.gradient(x0)));
    let mu = if sigma > 0.0 { err / sigma } else { 0.0 };
    Ok(InitialGradient { g0, mu })
}
