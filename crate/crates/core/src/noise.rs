//! Zero-mean heavy-tailed gradient noise with a calibrated p-th moment, and the
//! stochastic gradient oracle that adds it to an exact gradient.
//!
//! Two families are provided, both calibrated so that E‖ξ‖_*^p = σ^p exactly:
//!
//! * `TwoPoint(q)`: with probability q, ξ = ±M·eᵢ for a uniformly chosen
//!   coordinate i and a fair random sign, with M = σ q^{−1/p}; otherwise ξ = 0.
//!   Since ‖M eᵢ‖ = M in every ℓr norm, the calibration holds for any geometry.
//! * `RadialPareto(a)`: ξ = r·u with u uniform on the ℓ2 unit sphere (a
//!   normalized vector of standard Gaussians, drawn by the ziggurat method) and
//!   r Pareto with shape a and scale s = σ((a−p)/a)^{1/p}, so E r^p = a s^p/(a−p).
//!   For a ≤ 2 the variance is infinite. Offered only for ℓ2 geometries.
//!
//! Stream order per draw: TwoPoint consumes one uniform f64, then (only when
//! the spike fires) one coordinate index and one sign bit. RadialPareto
//! consumes d standard normals followed by one Pareto variate. With σ = 0 no
//! randomness is consumed.

use rand::Rng;
use rand_distr::{Distribution, Pareto, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::linalg::{norm2, Norm};
use crate::problems::Problem;
use crate::rng::{self, SimRng};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    TwoPoint { q: f64 },
    RadialPareto { tail_index: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    p: f64,
    sigma: f64,
    kind: NoiseKind,
    scale: f64,
}

/// Blocks used by the median-of-means moment estimate.
pub const MOMENT_BLOCKS: usize = 50;

fn check_p_sigma(p: f64, sigma: f64) -> Result<()> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::invalid("p", format!("must lie in (1, 2], got {p}")));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid("sigma", "must be finite and >= 0"));
    }
    Ok(())
}

impl NoiseModel {
    pub fn two_point(p: f64, sigma: f64, q: f64) -> Result<Self> {
        check_p_sigma(p, sigma)?;
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::invalid("q", format!("must lie in (0, 1], got {q}")));
        }
        Ok(NoiseModel {
            p,
            sigma,
            kind: NoiseKind::TwoPoint { q },
            scale: sigma * q.powf(-1.0 / p),
        })
    }

    pub fn radial_pareto(p: f64, sigma: f64, tail_index: f64) -> Result<Self> {
        check_p_sigma(p, sigma)?;
        if !(tail_index > p) {
            return Err(Error::InfiniteMoment { p, tail_index });
        }
        if tail_index > 2.0 {
            return Err(Error::invalid(
                "tail_index",
                format!("must lie in (p, 2], got {tail_index}"),
            ));
        }
        Ok(NoiseModel {
            p,
            sigma,
            kind: NoiseKind::RadialPareto { tail_index },
            scale: sigma * ((tail_index - p) / tail_index).powf(1.0 / p),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    /// The calibrated scale: M for TwoPoint, the Pareto scale s for RadialPareto.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The analytic value of E‖ξ‖_*^p implied by the calibrated scale.
    pub fn analytic_pth_moment(&self) -> f64 {
        match self.kind {
            NoiseKind::TwoPoint { q } => q * self.scale.powf(self.p),
            NoiseKind::RadialPareto { tail_index: a } => a * self.scale.powf(self.p) / (a - self.p),
        }
    }

    /// Rejects combinations whose calibration would not hold in `geometry`'s dual norm.
    pub fn check_geometry(&self, geometry: &Geometry) -> Result<()> {
        if matches!(self.kind, NoiseKind::RadialPareto { .. }) && geometry.dual() != Norm::L2 {
            return Err(Error::invalid(
                "noise.kind",
                "radial Pareto noise is calibrated in the l2 norm only",
            ));
        }
        Ok(())
    }

    /// Overwrites `out` with a fresh noise vector.
    pub fn sample_into(&self, out: &mut [f64], rng: &mut SimRng) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if self.sigma == 0.0 || out.is_empty() {
            return;
        }
        match self.kind {
            NoiseKind::TwoPoint { q } => {
                let u: f64 = rng.random();
                if u < q {
                    let i = rng.random_range(0..out.len());
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    out[i] = sign * self.scale;
                }
            }
            NoiseKind::RadialPareto { tail_index } => {
                for v in out.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
                let n = norm2(out);
                let r = Pareto::new(self.scale, tail_index)
                    .expect("scale and shape validated at construction")
                    .sample(rng);
                let c = if n > 0.0 { r / n } else { 0.0 };
                out.iter_mut().for_each(|v| *v *= c);
            }
        }
    }

    pub fn sample(&self, dim: usize, rng: &mut SimRng) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        self.sample_into(&mut v, rng);
        v
    }

    /// Empirical E‖ξ‖_*^p from `n` draws of dimension `geometry.dim()`.
    ///
    /// When ‖ξ‖^p has finite variance the plain sample mean and its standard
    /// error are returned. For RadialPareto with a ≤ 2p the variance of ‖ξ‖^p is
    /// infinite, so the estimate is a median of means over 50 blocks and the
    /// reported spread is the robust block spread from [`stats::median_of_means`].
    pub fn moment_check(&self, geometry: &Geometry, n: usize, rng: &mut SimRng) -> MomentEstimate {
        let mut buf = vec![0.0; geometry.dim()];
        let dual = geometry.dual();
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                self.sample_into(&mut buf, rng);
                dual.eval(&buf).powf(self.p)
            })
            .collect();
        let heavy = matches!(self.kind, NoiseKind::RadialPareto { tail_index } if tail_index <= 2.0 * self.p);
        if heavy {
            let (estimate, spread) = stats::median_of_means(&draws, MOMENT_BLOCKS);
            MomentEstimate {
                estimate,
                stderr: spread,
                method: MomentMethod::MedianOfMeans {
                    blocks: MOMENT_BLOCKS,
                },
            }
        } else {
            let (estimate, stderr) = stats::mean_stderr(&draws);
            MomentEstimate {
                estimate,
                stderr,
                method: MomentMethod::SampleMean,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentMethod {
    SampleMean,
    MedianOfMeans { blocks: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub method: MomentMethod,
}

/// Stochastic first-order oracle: exact gradient plus fresh independent noise.
#[derive(Debug, Clone)]
pub struct Oracle<'a> {
    problem: &'a Problem,
    noise: &'a NoiseModel,
    rng: SimRng,
    seed: u64,
}

impl<'a> Oracle<'a> {
    pub fn new(problem: &'a Problem, noise: &'a NoiseModel, seed: u64) -> Result<Self> {
        noise.check_geometry(problem.geometry())?;
        Ok(Oracle {
            problem,
            noise,
            rng: rng::primary(seed),
            seed,
        })
    }

    pub fn problem(&self) -> &'a Problem {
        self.problem
    }

    pub fn noise(&self) -> &'a NoiseModel {
        self.noise
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stochastic_grad(&mut self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.stochastic_grad_into(x, &mut out);
        out
    }

    pub fn stochastic_grad_into(&mut self, x: &[f64], out: &mut [f64]) {
        stochastic_grad_with(self.problem, self.noise, x, out, &mut self.rng);
    }
}

/// ∇f(x) + ξ drawn from an explicit stream.
pub fn stochastic_grad_with(
    problem: &Problem,
    noise: &NoiseModel,
    x: &[f64],
    out: &mut [f64],
    rng: &mut SimRng,
) {
    noise.sample_into(out, rng);
    let mut g = vec![0.0; x.len()];
    problem.gradient_into(x, &mut g);
    for (o, gi) in out.iter_mut().zip(g) {
        *o += gi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_point_scale() {
        let m = NoiseModel::two_point(1.5, 1.0, 0.01).unwrap();
        assert_abs_diff_eq!(m.scale(), 21.544346900318832, epsilon = 1e-12);
        assert_abs_diff_eq!(m.analytic_pth_moment(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pareto_scale() {
        let m = NoiseModel::radial_pareto(1.5, 1.0, 1.75).unwrap();
        assert_abs_diff_eq!(m.scale(), 7f64.powf(-2.0 / 3.0), epsilon = 1e-15);
        assert_abs_diff_eq!(m.scale(), 0.27328, epsilon = 1e-5);
        assert_abs_diff_eq!(m.analytic_pth_moment(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pareto_tail_index_must_exceed_p() {
        assert!(matches!(
            NoiseModel::radial_pareto(1.5, 1.0, 1.5),
            Err(Error::InfiniteMoment { .. })
        ));
        assert!(NoiseModel::radial_pareto(1.5, 1.0, 1.2).is_err());
        assert!(NoiseModel::radial_pareto(1.5, 1.0, 2.5).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(NoiseModel::two_point(2.5, 1.0, 0.5).is_err());
        assert!(NoiseModel::two_point(1.0, 1.0, 0.5).is_err());
        assert!(NoiseModel::two_point(1.5, -1.0, 0.5).is_err());
        assert!(NoiseModel::two_point(1.5, 1.0, 0.0).is_err());
        assert!(NoiseModel::two_point(1.5, 1.0, 1.5).is_err());
    }

    #[test]
    fn zero_sigma_gives_zero_noise() {
        let mut r = rng::primary(1);
        for m in [
            NoiseModel::two_point(1.5, 0.0, 0.5).unwrap(),
            NoiseModel::radial_pareto(1.5, 0.0, 1.75).unwrap(),
        ] {
            for _ in 0..100 {
                assert_eq!(m.sample(3, &mut r), vec![0.0; 3]);
            }
            let g = Geometry::euclidean(3).unwrap();
            assert_eq!(m.moment_check(&g, 1000, &mut r).estimate, 0.0);
        }
    }

    #[test]
    fn deterministic_magnitude_moment() {
        let m = NoiseModel::two_point(2.0, 2.0, 1.0).unwrap();
        let g = Geometry::euclidean(4).unwrap();
        let est = m.moment_check(&g, 1000, &mut rng::primary(3));
        assert_abs_diff_eq!(est.estimate, 4.0, epsilon = 1e-12);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn pareto_rejected_on_simplex() {
        let m = NoiseModel::radial_pareto(1.5, 1.0, 1.75).unwrap();
        let p = Problem::simplex_quadratic(vec![0.5, 0.5]).unwrap();
        assert!(Oracle::new(&p, &m, 0).is_err());
        let t = NoiseModel::two_point(1.5, 1.0, 0.1).unwrap();
        assert!(Oracle::new(&p, &t, 0).is_ok());
    }

    #[test]
    fn oracle_without_noise_is_exact() {
        let p = Problem::quadratic(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let m = NoiseModel::two_point(1.5, 0.0, 0.1).unwrap();
        let mut o = Oracle::new(&p, &m, 9).unwrap();
        assert_eq!(o.stochastic_grad(&[1.0, 1.0]), p.gradient(&[1.0, 1.0]));
    }

    #[test]
    fn oracle_at_minimizer_returns_noise() {
        let p = Problem::quadratic(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let m = NoiseModel::two_point(1.5, 1.0, 1.0).unwrap();
        let mut o = Oracle::new(&p, &m, 9).unwrap();
        let g = o.stochastic_grad(&[0.5, 0.5]);
        assert_eq!(g.iter().filter(|v| **v != 0.0).count(), 1);
        assert_abs_diff_eq!(Norm::L2.eval(&g), m.scale(), epsilon = 1e-12);
    }

    #[test]
    fn same_seed_same_stream() {
        let p = Problem::quadratic(vec![1.0, 1.0, 1.0], vec![0.0; 3]).unwrap();
        let m = NoiseModel::radial_pareto(1.5, 1.0, 1.75).unwrap();
        let mut a = Oracle::new(&p, &m, 11).unwrap();
        let mut b = Oracle::new(&p, &m, 11).unwrap();
        for _ in 0..50 {
            assert_eq!(
                a.stochastic_grad(&[0.1, 0.2, 0.3]),
                b.stochastic_grad(&[0.1, 0.2, 0.3])
            );
        }
    }
}
