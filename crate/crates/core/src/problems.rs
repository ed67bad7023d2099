//! Synthetic objectives with exact gradients, smoothness constants and optima.

use crate::error::{check_dim, check_finite, Error, Result};
use crate::geometry::{Geometry, DOMAIN_TOL};
use crate::linalg::{dot, norm2};

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// ½ Σ diagᵢ (xᵢ − shiftᵢ)².
    Quadratic { diag: Vec<f64>, shift: Vec<f64> },
    /// ½‖x − target‖²₂ over the simplex.
    SimplexQuadratic { target: Vec<f64> },
    /// Σ xᵢ²/(1 + xᵢ²).
    NonconvexRatio,
    /// ½‖x‖²₂ + weight·‖x‖₂, with subgradient 0 at the origin.
    SmoothPlusNorm { weight: f64 },
}

/// An objective bound to a geometry, with its known constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    objective: Objective,
    geometry: Geometry,
    smoothness: f64,
    f_star: f64,
    minimizer: Option<Vec<f64>>,
    nonsmooth_g: f64,
}

impl Problem {
    /// f(x) = ½ Σ diagᵢ (xᵢ − shiftᵢ)² on ℝ^d; L = max diag, x* = shift, f* = 0.
    pub fn quadratic(diag: Vec<f64>, shift: Vec<f64>) -> Result<Self> {
        check_dim(diag.len(), &shift)?;
        check_finite("shift", &shift)?;
        if let Some(i) = diag.iter().position(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::invalid(
                "diag",
                format!("entry {i} must be finite and > 0"),
            ));
        }
        let smoothness = diag.iter().cloned().fold(0.0, f64::max);
        Ok(Problem {
            geometry: Geometry::euclidean(diag.len())?,
            smoothness,
            f_star: 0.0,
            minimizer: Some(shift.clone()),
            nonsmooth_g: 0.0,
            objective: Objective::Quadratic { diag, shift },
        })
    }

    /// f(x) = ½‖x − target‖²₂ with entropy geometry. L = 1 with respect to ℓ1.
    pub fn simplex_quadratic(target: Vec<f64>) -> Result<Self> {
        let geometry = Geometry::simplex(target.len())?;
        if target.iter().any(|&v| !(v > 0.0)) || !geometry.contains(&target, DOMAIN_TOL) {
            return Err(Error::invalid(
                "target",
                "must lie on the simplex with strictly positive entries",
            ));
        }
        Ok(Problem {
            geometry,
            smoothness: 1.0,
            f_star: 0.0,
            minimizer: Some(target.clone()),
            nonsmooth_g: 0.0,
            objective: Objective::SimplexQuadratic { target },
        })
    }

    /// f(x) = Σ xᵢ²/(1+xᵢ²): nonconvex, L = 2, f* = 0 attained at 0.
    pub fn nonconvex_ratio(dim: usize) -> Result<Self> {
        Ok(Problem {
            geometry: Geometry::euclidean(dim)?,
            smoothness: 2.0,
            f_star: 0.0,
            minimizer: Some(vec![0.0; dim]),
            nonsmooth_g: 0.0,
            objective: Objective::NonconvexRatio,
        })
    }

    /// f(x) = ½‖x‖² + w‖x‖ on ℝ^d.
    ///
    /// With the gradient oracle returning x + w·x/‖x‖ (and 0 at the origin) the
    /// objective satisfies f(y) ≤ f(x) + ⟨∇f(x), y−x⟩ + ½‖y−x‖² + G‖y−x‖ with
    /// G = 2w, since ‖y‖ − ⟨x/‖x‖, y⟩ ≤ 2‖y − x‖.
    pub fn smooth_plus_norm(dim: usize, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::invalid("weight", "must be finite and >= 0"));
        }
        Ok(Problem {
            geometry: Geometry::euclidean(dim)?,
            smoothness: 1.0,
            f_star: 0.0,
            minimizer: Some(vec![0.0; dim]),
            nonsmooth_g: 2.0 * weight,
            objective: Objective::SmoothPlusNorm { weight },
        })
    }

    /// Rebinds a quadratic to another ℓ2 geometry (for example a ball). The
    /// minimizer must lie in the new domain so that x* and f* stay exact.
    pub fn with_geometry(mut self, geometry: Geometry) -> Result<Self> {
        if geometry.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: geometry.dim(),
            });
        }
        if geometry.primal() != self.geometry.primal() {
            return Err(Error::invalid(
                "geometry",
                "must use the same norm as the problem's smoothness constant",
            ));
        }
        if let Some(xs) = &self.minimizer {
            if !geometry.contains(xs, DOMAIN_TOL) {
                return Err(Error::invalid(
                    "geometry",
                    "domain must contain the minimizer",
                ));
            }
        }
        self.geometry = geometry;
        Ok(self)
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    /// L with respect to the geometry's primal/dual norm pair.
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    pub fn minimizer(&self) -> Option<&[f64]> {
        self.minimizer.as_deref()
    }

    /// The constant G of the nonsmooth growth condition (0 for smooth objectives).
    pub fn nonsmooth_g(&self) -> f64 {
        self.nonsmooth_g
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self.objective, Objective::NonconvexRatio)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        match &self.objective {
            Objective::Quadratic { diag, shift } => {
                0.5 * x
                    .iter()
                    .zip(diag)
                    .zip(shift)
                    .map(|((xi, di), si)| di * (xi - si) * (xi - si))
                    .sum::<f64>()
            }
            Objective::SimplexQuadratic { target } => {
                0.5 * x
                    .iter()
                    .zip(target)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            }
            Objective::NonconvexRatio => x.iter().map(|u| u * u / (1.0 + u * u)).sum(),
            Objective::SmoothPlusNorm { weight } => 0.5 * dot(x, x) + weight * norm2(x),
        }
    }

    /// f(x) − f*.
    pub fn gap(&self, x: &[f64]) -> f64 {
        self.value(x) - self.f_star
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        g
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        match &self.objective {
            Objective::Quadratic { diag, shift } => {
                for i in 0..x.len() {
                    out[i] = diag[i] * (x[i] - shift[i]);
                }
            }
            Objective::SimplexQuadratic { target } => {
                for i in 0..x.len() {
                    out[i] = x[i] - target[i];
                }
            }
            Objective::NonconvexRatio => {
                for i in 0..x.len() {
                    let s = 1.0 + x[i] * x[i];
                    out[i] = 2.0 * x[i] / (s * s);
                }
            }
            Objective::SmoothPlusNorm { weight } => {
                let n = norm2(x);
                let c = if n > 0.0 { 1.0 + weight / n } else { 1.0 };
                for i in 0..x.len() {
                    out[i] = c * x[i];
                }
            }
        }
    }

    /// Checks that `x` is a valid starting point for this problem.
    pub fn check_start(&self, name: &str, x: &[f64]) -> Result<()> {
        check_dim(self.dim(), x)?;
        check_finite(name, x)?;
        if !self.geometry.contains(x, DOMAIN_TOL) {
            return Err(Error::invalid(name, "must lie in the domain"));
        }
        if matches!(
            self.geometry.kind(),
            crate::geometry::GeometryKind::SimplexEntropy
        ) && x.iter().any(|&v| v <= 0.0)
        {
            return Err(Error::invalid(
                name,
                "simplex starting points must be strictly positive",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn all_problems() -> Vec<Problem> {
        vec![
            Problem::quadratic(vec![1.0, 4.0, 0.5], vec![0.3, -0.2, 1.0]).unwrap(),
            Problem::simplex_quadratic(vec![0.2, 0.3, 0.5]).unwrap(),
            Problem::nonconvex_ratio(3).unwrap(),
            Problem::smooth_plus_norm(3, 0.5).unwrap(),
        ]
    }

    #[test]
    fn quadratic_hand_values() {
        let p = Problem::quadratic(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(p.value(&[3.0, 4.0]), 12.5);
        assert_eq!(p.gradient(&[3.0, 4.0]), vec![3.0, 4.0]);
        assert_eq!(p.value(&[0.0, 0.0]), 0.0);
        assert_eq!(p.gradient(&[0.0, 0.0]), vec![0.0, 0.0]);
        let p = Problem::quadratic(vec![1.0, 4.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(p.smoothness(), 4.0);
    }

    #[test]
    fn quadratic_rejects_nonpositive_diag() {
        assert!(Problem::quadratic(vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(Problem::quadratic(vec![1.0, -2.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn simplex_quadratic_hand_values() {
        let p = Problem::simplex_quadratic(vec![0.5, 0.5]).unwrap();
        assert_eq!(p.value(&[1.0, 0.0]), 0.25);
        assert_eq!(p.gap(&[0.5, 0.5]), 0.0);
        let g = p.gradient(&[1.0, 0.0]);
        assert_eq!(g, vec![0.5, -0.5]);
        assert_eq!(p.geometry().dual_norm(&g).unwrap(), 0.5);
        assert!(Problem::simplex_quadratic(vec![0.5, 0.6]).is_err());
        assert!(Problem::simplex_quadratic(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn nonconvex_ratio_hand_values() {
        let p = Problem::nonconvex_ratio(1).unwrap();
        assert_eq!(p.value(&[0.0]), 0.0);
        assert_eq!(p.gradient(&[0.0]), vec![0.0]);
        assert_eq!(p.value(&[1.0]), 0.5);
        assert_abs_diff_eq!(p.gradient(&[1.0])[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn nonconvex_ratio_smoothness_from_dense_grid() {
        let n = 2_000_001;
        let max = (0..n)
            .map(|k| -10.0 + 20.0 * k as f64 / (n - 1) as f64)
            .map(|u: f64| ((2.0 - 6.0 * u * u) / (1.0 + u * u).powi(3)).abs())
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(max, 2.0, epsilon = 1e-12);
        assert_eq!(Problem::nonconvex_ratio(4).unwrap().smoothness(), 2.0);
    }

    #[test]
    fn minimizers_are_stationary() {
        for p in all_problems() {
            let xs = p.minimizer().unwrap().to_vec();
            assert!(p.gap(&xs).abs() <= 1e-15);
            assert!(p.geometry().dual_norm(&p.gradient(&xs)).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn smooth_plus_norm_growth_condition_constant() {
        let p = Problem::smooth_plus_norm(2, 0.5).unwrap();
        assert_eq!(p.nonsmooth_g(), 1.0);
        // Tight direction: x near the kink, y on the opposite side.
        let x = [1e-6, 0.0];
        let y = [-1.0, 0.0];
        let h = crate::linalg::sub(&y, &x);
        let excess = p.value(&y) - p.value(&x) - dot(&p.gradient(&x), &h) - 0.5 * dot(&h, &h);
        let ratio = excess / norm2(&h);
        assert!(ratio > 0.99 * p.nonsmooth_g() && ratio <= p.nonsmooth_g());
    }

    #[test]
    fn with_geometry_requires_minimizer_in_domain() {
        let p = Problem::quadratic(vec![1.0, 1.0], vec![0.5, 0.0]).unwrap();
        assert!(p
            .clone()
            .with_geometry(Geometry::ball(1.0, vec![0.0, 0.0]).unwrap())
            .is_ok());
        assert!(p
            .with_geometry(Geometry::ball(0.1, vec![0.0, 0.0]).unwrap())
            .is_err());
    }

    fn point_for(p: &Problem, raw: &[f64]) -> Vec<f64> {
        match p.objective() {
            Objective::SimplexQuadratic { .. } => {
                let v: Vec<f64> = raw.iter().map(|a| a.abs() + 0.01).collect();
                let s: f64 = v.iter().sum();
                v.iter().map(|a| a / s).collect()
            }
            _ => raw.to_vec(),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(250))]

        #[test]
        fn gradient_matches_central_differences(raw in prop::collection::vec(-3.0f64..3.0, 3)) {
            for p in all_problems() {
                let x = point_for(&p, &raw);
                let g = p.gradient(&x);
                for i in 0..3 {
                    let h = 1e-6;
                    let mut a = x.clone();
                    let mut b = x.clone();
                    a[i] += h;
                    b[i] -= h;
                    let fd = (p.value(&a) - p.value(&b)) / (2.0 * h);
                    prop_assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()));
                }
            }
        }

        #[test]
        fn smoothness_is_not_understated(
            a in prop::collection::vec(-3.0f64..3.0, 3),
            b in prop::collection::vec(-3.0f64..3.0, 3),
        ) {
            for p in all_problems() {
                if p.nonsmooth_g() > 0.0 {
                    continue;
                }
                let x = point_for(&p, &a);
                let y = point_for(&p, &b);
                let gd = p.geometry().dual_norm(&crate::linalg::sub(&p.gradient(&x), &p.gradient(&y))).unwrap();
                let xd = p.geometry().norm(&crate::linalg::sub(&x, &y)).unwrap();
                prop_assert!(gd <= p.smoothness() * xd * (1.0 + 1e-6) + 1e-15);
            }
        }
    }
}
