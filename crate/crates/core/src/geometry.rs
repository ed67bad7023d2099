//! Norms, mirror maps, Bregman divergences and the mirror-descent step.
//!
//! Three geometries are supported:
//!
//! * `EuclideanUnconstrained`: ℓ2 norms, ψ(x) = ½‖x‖², domain ℝ^d.
//! * `EuclideanBall`: as above, restricted to a closed ℓ2 ball.
//! * `SimplexEntropy`: primal ℓ1, dual ℓ∞, ψ(x) = Σ xᵢ log xᵢ on the
//!   probability simplex (with 0·log 0 = 0).
//!
//! Entropy iterates are kept strictly interior: the multiplicative update of a
//! strictly positive point stays strictly positive, and starting points must
//! be strictly positive.

use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::{dot, norm2, Norm};

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryKind {
    EuclideanUnconstrained,
    EuclideanBall { radius: f64, center: Vec<f64> },
    SimplexEntropy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    kind: GeometryKind,
    dim: usize,
}

/// Slack used when deciding whether a point lies in the domain.
pub const DOMAIN_TOL: f64 = 1e-9;

impl Geometry {
    pub fn euclidean(dim: usize) -> Result<Self> {
        check_positive_dim(dim)?;
        Ok(Geometry {
            kind: GeometryKind::EuclideanUnconstrained,
            dim,
        })
    }

    pub fn ball(radius: f64, center: Vec<f64>) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("radius", "must be finite and > 0"));
        }
        check_positive_dim(center.len())?;
        check_finite("center", &center)?;
        Ok(Geometry {
            dim: center.len(),
            kind: GeometryKind::EuclideanBall { radius, center },
        })
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        check_positive_dim(dim)?;
        Ok(Geometry {
            kind: GeometryKind::SimplexEntropy,
            dim,
        })
    }

    pub fn kind(&self) -> &GeometryKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_unconstrained_euclidean(&self) -> bool {
        matches!(self.kind, GeometryKind::EuclideanUnconstrained)
    }

    pub fn primal(&self) -> Norm {
        match self.kind {
            GeometryKind::SimplexEntropy => Norm::L1,
            _ => Norm::L2,
        }
    }

    pub fn dual(&self) -> Norm {
        self.primal().dual()
    }

    pub fn norm(&self, v: &[f64]) -> Result<f64> {
        check_dim(self.dim, v)?;
        Ok(self.primal().eval(v))
    }

    pub fn dual_norm(&self, v: &[f64]) -> Result<f64> {
        check_dim(self.dim, v)?;
        Ok(self.dual().eval(v))
    }

    /// Whether `x` belongs to the domain, up to `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.kind {
            GeometryKind::EuclideanUnconstrained => true,
            GeometryKind::EuclideanBall { radius, center } => {
                let d: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    .sqrt();
                d <= radius + tol
            }
            GeometryKind::SimplexEntropy => {
                x.iter().all(|&v| v >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol
            }
        }
    }

    /// The mirror map ψ.
    pub fn psi(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x)?;
        Ok(match self.kind {
            GeometryKind::SimplexEntropy => x.iter().map(|&v| xlogx(v)).sum(),
            _ => 0.5 * dot(x, x),
        })
    }

    /// ∇ψ(x); for the entropy map this is log xᵢ + 1 (−∞ on the boundary).
    pub fn grad_psi(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x)?;
        Ok(match self.kind {
            GeometryKind::SimplexEntropy => x.iter().map(|&v| v.ln() + 1.0).collect(),
            _ => x.to_vec(),
        })
    }

    /// D_ψ(x, y) = ψ(x) − ψ(y) − ⟨∇ψ(y), x − y⟩.
    ///
    /// For the entropy map this is the generalized KL divergence
    /// Σ xᵢ log(xᵢ/yᵢ) − Σ xᵢ + Σ yᵢ, which equals KL(x‖y) on the simplex.
    pub fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(self.dim, x)?;
        check_dim(self.dim, y)?;
        match self.kind {
            GeometryKind::SimplexEntropy => {
                let mut total = 0.0;
                for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
                    if a < 0.0 || b < 0.0 {
                        return Err(Error::invalid(
                            "point",
                            format!("negative coordinate {i} outside the simplex"),
                        ));
                    }
                    if a > 0.0 {
                        if b == 0.0 {
                            return Err(Error::DivergenceUndefined { index: i });
                        }
                        total += a * (a / b).ln();
                    }
                    total += b - a;
                }
                Ok(total.max(0.0))
            }
            _ => Ok(0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()),
        }
    }

    /// The exact minimizer of η⟨g, u⟩ + D_ψ(u, x) over the domain.
    pub fn mirror_step(&self, x: &[f64], g: &[f64], eta: f64) -> Result<Vec<f64>> {
        check_dim(self.dim, x)?;
        check_dim(self.dim, g)?;
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::invalid("eta", "must be finite and > 0"));
        }
        check_finite("g", g)?;
        Ok(self.mirror_step_unchecked(x, g, eta))
    }

    pub(crate) fn mirror_step_unchecked(&self, x: &[f64], g: &[f64], eta: f64) -> Vec<f64> {
        match &self.kind {
            GeometryKind::EuclideanUnconstrained => {
                x.iter().zip(g).map(|(a, b)| a - eta * b).collect()
            }
            GeometryKind::EuclideanBall { radius, center } => {
                let mut u: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - eta * b).collect();
                let offset: Vec<f64> = u.iter().zip(center).map(|(a, c)| a - c).collect();
                let dist = norm2(&offset);
                if dist > *radius {
                    let s = radius / dist;
                    for ((ui, oi), ci) in u.iter_mut().zip(&offset).zip(center) {
                        *ui = ci + s * oi;
                    }
                }
                u
            }
            GeometryKind::SimplexEntropy => {
                let logits: Vec<f64> = x.iter().zip(g).map(|(a, b)| a.ln() - eta * b).collect();
                let shift = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = logits.iter().map(|l| (l - shift).exp()).collect();
                let total: f64 = w.iter().sum();
                w.into_iter().map(|v| v / total).collect()
            }
        }
    }
}

fn xlogx(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

fn check_positive_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::invalid("dim", "must be at least 1"))
    } else {
        Ok(())
    }
}
