//! Benchmark objectives, the design space, and constraint plumbing.

use crate::error::{Error, Result};
use crate::grid::GridMap;
use crate::math;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{E, PI};

/// The four benchmark functions. All are parameterized by dimensionality and
/// evaluated in original (unnormalized) coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Ackley,
    Styblinski,
    Levy,
    Synt,
}

pub const OBJECTIVE_NAMES: [&str; 4] = ["ackley", "styblinski", "levy", "synt"];

impl Objective {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "ackley" => Ok(Objective::Ackley),
            "styblinski" => Ok(Objective::Styblinski),
            "levy" => Ok(Objective::Levy),
            "synt" => Ok(Objective::Synt),
            other => Err(Error::Config(format!(
                "unknown objective '{other}', valid: {}",
                OBJECTIVE_NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Objective::Ackley => "ackley",
            Objective::Styblinski => "styblinski",
            Objective::Levy => "levy",
            Objective::Synt => "synt",
        }
    }

    /// Literature-standard box bounds containing the satisfying regions.
    pub fn default_bounds(&self) -> (f64, f64) {
        match self {
            Objective::Levy => (-10.0, 10.0),
            _ => (-5.0, 5.0),
        }
    }

    /// Constraint threshold used by the benchmark suite.
    pub fn default_threshold(&self) -> f64 {
        match self {
            Objective::Ackley => 3.5,
            Objective::Styblinski => 20.0,
            Objective::Levy => 0.4,
            Objective::Synt => 2.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = x.len() as f64;
        match self {
            Objective::Ackley => {
                let mean_sq: f64 = x.iter().map(|v| v * v).sum::<f64>() / d;
                let mean_cos: f64 = x.iter().map(|v| math::cos(2.0 * PI * v)).sum::<f64>() / d;
                -20.0 * math::exp(-0.2 * math::sqrt(mean_sq)) - math::exp(mean_cos) + 20.0 + E
            }
            Objective::Styblinski => {
                let s: f64 = x
                    .iter()
                    .map(|&v| v * v * v * v - 16.0 * v * v + 5.0 * v)
                    .sum();
                s / d + 50.0
            }
            Objective::Levy => {
                let w: Vec<f64> = x.iter().map(|&v| 1.0 + (v - 1.0) / 4.0).collect();
                let n = w.len();
                let s1 = math::sin(PI * w[0]);
                let mut total = s1 * s1;
                for i in 0..n - 1 {
                    let s = math::sin(PI * w[i] + 1.0);
                    total += (w[i] - 1.0) * (w[i] - 1.0) * (1.0 + 10.0 * s * s);
                }
                let sl = math::sin(2.0 * PI * w[n - 1]);
                total += (w[n - 1] - 1.0) * (w[n - 1] - 1.0) * (1.0 + sl * sl);
                total
            }
            Objective::Synt => {
                let s: f64 = x
                    .iter()
                    .map(|&v| 0.25 * v * v * v * v - 2.0 * v * v + 5.0)
                    .sum();
                s / d
            }
        }
    }
}

/// Per-dimension box bounds plus the shared grid resolution; carries the
/// affine map between original coordinates and the normalized `[-1, 1]` axis.
#[derive(Debug, Clone)]
pub struct DesignSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
    grid: GridMap,
}

impl DesignSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, grid_bins: usize) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Config(format!(
                "bounds must be nonempty and of equal length ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) {
                return Err(Error::Config(format!(
                    "dimension {i}: lower bound {lo} must be below upper bound {hi}"
                )));
            }
        }
        Ok(DesignSpace {
            lower,
            upper,
            grid: GridMap::new(grid_bins)?,
        })
    }

    pub fn uniform(dims: usize, lo: f64, hi: f64, grid_bins: usize) -> Result<Self> {
        DesignSpace::new(alloc::vec![lo; dims], alloc::vec![hi; dims], grid_bins)
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn grid(&self) -> &GridMap {
        &self.grid
    }

    pub fn bounds(&self, dim: usize) -> (f64, f64) {
        (self.lower[dim], self.upper[dim])
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| 2.0 * (v - self.lower[i]) / (self.upper[i] - self.lower[i]) - 1.0)
            .collect()
    }

    pub fn denormalize(&self, x_norm: &[f64]) -> Vec<f64> {
        x_norm
            .iter()
            .enumerate()
            .map(|(i, &v)| self.lower[i] + (v + 1.0) * 0.5 * (self.upper[i] - self.lower[i]))
            .collect()
    }

    pub fn bins_to_norm(&self, bins: &[u32]) -> Vec<f64> {
        bins.iter().map(|&b| self.grid.center(b)).collect()
    }

    pub fn bins_to_original(&self, bins: &[u32]) -> Vec<f64> {
        self.denormalize(&self.bins_to_norm(bins))
    }

    /// Snap normalized coordinates to their nearest grid bins.
    pub fn snap_norm(&self, x_norm: &[f64]) -> Vec<u32> {
        x_norm.iter().map(|&v| self.grid.snap(v)).collect()
    }
}

/// A single constraint `f(x) - gamma <= 0`.
#[derive(Debug, Clone, Copy)]
pub struct ConstraintSpec {
    pub objective: Objective,
    pub gamma: f64,
}

impl ConstraintSpec {
    pub fn new(objective: Objective, gamma: f64) -> Self {
        ConstraintSpec { objective, gamma }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x) - self.gamma
    }

    pub fn satisfied(&self, x: &[f64]) -> bool {
        self.value(x) <= 0.0
    }
}

/// Aggregate several constraints into one via the max.
pub fn max_aggregate(constraints: &[ConstraintSpec], x: &[f64]) -> Result<f64> {
    if constraints.is_empty() {
        return Err(Error::Config(String::from(
            "max_aggregate needs at least one constraint",
        )));
    }
    let mut best = f64::NEG_INFINITY;
    for c in constraints {
        best = best.max(c.value(x));
    }
    Ok(best)
}

/// Largest grid this crate will enumerate exhaustively.
pub const ENUMERATION_CAP: usize = 2_000_000;

/// Exact fraction of grid points satisfying the constraint, by exhaustive
/// enumeration. Only feasible for small dims x bins (capped).
pub fn satisfying_fraction(spec: &ConstraintSpec, space: &DesignSpace) -> Result<f64> {
    let d = space.dims();
    let n = space.grid().bins();
    let mut total: usize = 1;
    for _ in 0..d {
        total = total
            .checked_mul(n)
            .filter(|&t| t <= ENUMERATION_CAP)
            .ok_or_else(|| {
                Error::Capacity(format!("grid {n}^{d} exceeds enumeration cap {ENUMERATION_CAP}"))
            })?;
    }
    let mut bins = alloc::vec![0u32; d];
    let mut satisfied: usize = 0;
    for _ in 0..total {
        let x = space.bins_to_original(&bins);
        if spec.satisfied(&x) {
            satisfied += 1;
        }
        // mixed-radix increment
        for slot in bins.iter_mut().rev() {
            *slot += 1;
            if (*slot as usize) < n {
                break;
            }
            *slot = 0;
        }
    }
    Ok(satisfied as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn ackley_zero_at_origin() {
        for d in [1, 2, 5, 20] {
            let x = alloc::vec![0.0; d];
            assert!(Objective::Ackley.eval(&x).abs() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn levy_zero_at_ones() {
        for d in [1, 2, 5, 20] {
            let x = alloc::vec![1.0; d];
            assert!(Objective::Levy.eval(&x).abs() < 1e-24, "d={d}");
        }
    }

    #[test]
    fn synt_one_at_corner_minima() {
        for d in [1, 2, 5] {
            for sign in [-2.0, 2.0] {
                let x = alloc::vec![sign; d];
                assert!((Objective::Synt.eval(&x) - 1.0).abs() < 1e-12);
            }
        }
        // mixed-sign corners too
        assert!((Objective::Synt.eval(&[2.0, -2.0, 2.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn styblinski_minimum_value() {
        let x = alloc::vec![-2.903534; 3];
        let v = Objective::Styblinski.eval(&x);
        assert!((v - (-28.3320)).abs() < 1e-3, "v={v}");
    }

    #[test]
    fn unknown_objective_is_config_error() {
        assert!(matches!(Objective::from_name("foo"), Err(Error::Config(_))));
    }

    #[test]
    fn permutation_invariance_where_expected() {
        // Levy is excluded: its first and last terms break symmetry.
        let mut rng = crate::rng::stream(1, crate::rng::StreamId::MetricSampling);
        for obj in [Objective::Ackley, Objective::Styblinski, Objective::Synt] {
            for _ in 0..50 {
                let x: alloc::vec::Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
                let mut p = x.clone();
                p.reverse();
                p.swap(0, 1);
                let a = obj.eval(&x);
                let b = obj.eval(&p);
                assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "{obj:?}");
            }
        }
    }

    #[test]
    fn documented_minima_are_global_lower_bounds() {
        let mut rng = crate::rng::stream(2, crate::rng::StreamId::MetricSampling);
        let cases = [
            (Objective::Ackley, alloc::vec![0.0; 3], 0.0),
            (Objective::Levy, alloc::vec![1.0; 3], 0.0),
            (Objective::Synt, alloc::vec![2.0; 3], 1.0),
            (Objective::Styblinski, alloc::vec![-2.903534; 3], -28.3323),
        ];
        for (obj, _argmin, fmin) in &cases {
            let (lo, hi) = obj.default_bounds();
            for _ in 0..1_000_000 / 4 {
                let x: alloc::vec::Vec<f64> = (0..3).map(|_| rng.gen_range(lo..hi)).collect();
                assert!(obj.eval(&x) >= fmin - 1e-3);
            }
        }
    }

    #[test]
    fn constraint_values() {
        let synt = ConstraintSpec::new(Objective::Synt, 2.0);
        assert!((synt.value(&[2.0, 2.0]) - (-1.0)).abs() < 1e-12);
        let ackley = ConstraintSpec::new(Objective::Ackley, 3.5);
        assert!((ackley.value(&[0.0, 0.0]) - (-3.5)).abs() < 1e-12);
        let levy = ConstraintSpec::new(Objective::Levy, 0.4);
        assert!((levy.value(&[1.0, 1.0, 1.0]) - (-0.4)).abs() < 1e-12);
    }

    #[test]
    fn max_aggregate_rules() {
        let c1 = ConstraintSpec::new(Objective::Synt, 6.0); // value at origin: -1
        let c2 = ConstraintSpec::new(Objective::Synt, 3.0); // value at origin: +2
        let x = [0.0, 0.0];
        assert_eq!(max_aggregate(&[c1], &x).unwrap(), c1.value(&x));
        let v = max_aggregate(&[c1, c2], &x).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        assert!(max_aggregate(&[], &x).is_err());
    }

    #[test]
    fn normalization_round_trips_on_grid_points() {
        let space = DesignSpace::uniform(2, -5.0, 5.0, 100).unwrap();
        for b in 0..100u32 {
            let x = space.bins_to_original(&[b, 99 - b]);
            let back = space.denormalize(&space.normalize(&x));
            for (a, c) in x.iter().zip(&back) {
                assert!((a - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn satisfying_fraction_extremes() {
        let space = DesignSpace::uniform(2, -5.0, 5.0, 20).unwrap();
        let below = ConstraintSpec::new(Objective::Synt, 0.5); // below global min 1
        assert_eq!(satisfying_fraction(&below, &space).unwrap(), 0.0);
        let above = ConstraintSpec::new(Objective::Synt, 1e9);
        assert_eq!(satisfying_fraction(&above, &space).unwrap(), 1.0);
    }

    #[test]
    fn satisfying_fraction_capacity_guard() {
        let space = DesignSpace::uniform(4, -5.0, 5.0, 100).unwrap();
        let spec = ConstraintSpec::new(Objective::Synt, 2.0);
        assert!(matches!(
            satisfying_fraction(&spec, &space),
            Err(Error::Capacity(_))
        ));
    }
}
