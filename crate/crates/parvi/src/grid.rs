//! Tensor-product spatial grids over truncated domains.
//!
//! Nodes double as quadrature points: the trapezoidal cell volumes combined
//! with the excessive density give a diagonal realization of the `L²(μ)`
//! inner product, so grid functions and measure-space elements coincide.

use thiserror::Error;

use crate::models::ExcessiveDensity;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("bad box on axis {axis}: lo {lo} >= hi {hi}")]
    BadBox { axis: usize, lo: f64, hi: f64 },
    #[error("bad size on axis {axis}: {size} (need at least 3 nodes)")]
    BadSize { axis: usize, size: usize },
    #[error("grading focus {focus} outside box [{lo}, {hi}] on axis {axis}")]
    FocusOutsideBox {
        axis: usize,
        focus: f64,
        lo: f64,
        hi: f64,
    },
}

/// Node placement along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grading {
    Uniform,
    /// Clusters nodes around `focus` (e.g. the strike) through a sinh
    /// stretching; `strength` controls how tight the clustering is, with the
    /// smallest spacing landing at the node nearest the focus.
    GeometricTowardFocus { focus: f64, strength: f64 },
}

/// Treatment of one grid face when the operator is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Pin the value to the obstacle: far-field truncation where the option
    /// value approaches its payoff.
    DirichletPayoff,
    /// Zero normal derivative, realized by stencil reflection.
    NeumannZero,
    /// One-sided row: drop the normal diffusion and take the upwind one-sided
    /// drift difference. Correct for drift-dominated faces (the Asian s-axis)
    /// and for degenerate faces where the normal dynamics vanish.
    OutflowOneSided,
}

/// Per-axis construction request for [`make_grid`].
#[derive(Debug, Clone)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub size: usize,
    pub grading: Grading,
    /// Boundary handling at the lo/hi face of this axis.
    pub boundary: [BoundaryKind; 2],
}

impl AxisSpec {
    pub fn uniform(lo: f64, hi: f64, size: usize) -> Self {
        AxisSpec {
            lo,
            hi,
            size,
            grading: Grading::Uniform,
            boundary: [BoundaryKind::DirichletPayoff; 2],
        }
    }

    pub fn graded(lo: f64, hi: f64, size: usize, focus: f64, strength: f64) -> Self {
        AxisSpec {
            lo,
            hi,
            size,
            grading: Grading::GeometricTowardFocus { focus, strength },
            boundary: [BoundaryKind::DirichletPayoff; 2],
        }
    }

    pub fn with_boundary(mut self, lo: BoundaryKind, hi: BoundaryKind) -> Self {
        self.boundary = [lo, hi];
        self
    }
}

/// Tensor-product grid with per-face boundary classification.
///
/// Flat indexing is row-major with axis 0 slowest; `flatten`/`unflatten`
/// are inverse bijections over all nodes.
#[derive(Debug, Clone)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
    boxes: Vec<[f64; 2]>,
    boundary: Vec<[BoundaryKind; 2]>,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, d: usize) -> &[f64] {
        &self.axes[d]
    }

    pub fn bounds(&self, d: usize) -> [f64; 2] {
        self.boxes[d]
    }

    pub fn boundary_kind(&self, d: usize) -> [BoundaryKind; 2] {
        self.boundary[d]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn flatten(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dim());
        let mut idx = 0;
        for (d, &i) in multi.iter().enumerate() {
            debug_assert!(i < self.axes[d].len());
            idx = idx * self.axes[d].len() + i;
        }
        idx
    }

    pub fn unflatten(&self, mut idx: usize) -> Vec<usize> {
        let mut multi = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            let n = self.axes[d].len();
            multi[d] = idx % n;
            idx /= n;
        }
        multi
    }

    /// Coordinates of the node with the given flat index.
    pub fn node(&self, idx: usize) -> Vec<f64> {
        let multi = self.unflatten(idx);
        multi
            .iter()
            .enumerate()
            .map(|(d, &i)| self.axes[d][i])
            .collect()
    }

    /// Writes node coordinates into `out` without allocating.
    pub fn node_into(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for d in (0..self.dim()).rev() {
            let n = self.axes[d].len();
            out[d] = self.axes[d][rem % n];
            rem /= n;
        }
    }

    /// True if the node touches any grid face.
    pub fn is_boundary(&self, idx: usize) -> bool {
        let multi = self.unflatten(idx);
        multi
            .iter()
            .enumerate()
            .any(|(d, &i)| i == 0 || i + 1 == self.axes[d].len())
    }

    /// Trapezoidal cell volume attached to a node (product over axes of the
    /// half-spacings, halved cells at the faces).
    pub fn cell_volume(&self, idx: usize) -> f64 {
        let multi = self.unflatten(idx);
        let mut vol = 1.0;
        for (d, &i) in multi.iter().enumerate() {
            let ax = &self.axes[d];
            let left = if i == 0 { 0.0 } else { ax[i] - ax[i - 1] };
            let right = if i + 1 == ax.len() {
                0.0
            } else {
                ax[i + 1] - ax[i]
            };
            vol *= 0.5 * (left + right);
        }
        vol
    }

    /// Evaluates `f` at every node in flat order.
    pub fn eval_nodes(&self, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        let mut coords = vec![0.0; self.dim()];
        (0..self.len())
            .map(|idx| {
                self.node_into(idx, &mut coords);
                f(&coords)
            })
            .collect()
    }

    /// Multilinear interpolation of a nodal vector at an arbitrary point.
    /// Points outside the box are clamped to it.
    pub fn interpolate(&self, values: &[f64], point: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len());
        assert_eq!(point.len(), self.dim());
        let dim = self.dim();
        // Per-axis bracketing interval and weight.
        let mut lo_idx = vec![0usize; dim];
        let mut w = vec![0.0; dim];
        for d in 0..dim {
            let ax = &self.axes[d];
            let x = point[d].clamp(ax[0], ax[ax.len() - 1]);
            let j = match ax.binary_search_by(|a| a.partial_cmp(&x).unwrap()) {
                Ok(j) => j.min(ax.len() - 2),
                Err(j) => j.saturating_sub(1).min(ax.len() - 2),
            };
            lo_idx[d] = j;
            w[d] = (x - ax[j]) / (ax[j + 1] - ax[j]);
        }
        // Accumulate over the 2^dim corners of the bracketing cell.
        let mut total = 0.0;
        let mut multi = vec![0usize; dim];
        for corner in 0..(1usize << dim) {
            let mut weight = 1.0;
            for d in 0..dim {
                if corner >> d & 1 == 1 {
                    multi[d] = lo_idx[d] + 1;
                    weight *= w[d];
                } else {
                    multi[d] = lo_idx[d];
                    weight *= 1.0 - w[d];
                }
            }
            total += weight * values[self.flatten(&multi)];
        }
        total
    }
}

/// Builds a tensor grid from per-axis specs.
pub fn make_grid(axes: &[AxisSpec]) -> Result<Grid, GridError> {
    let mut coord_axes = Vec::with_capacity(axes.len());
    let mut boxes = Vec::with_capacity(axes.len());
    let mut boundary = Vec::with_capacity(axes.len());
    for (d, spec) in axes.iter().enumerate() {
        if !(spec.lo < spec.hi) || !spec.lo.is_finite() || !spec.hi.is_finite() {
            return Err(GridError::BadBox {
                axis: d,
                lo: spec.lo,
                hi: spec.hi,
            });
        }
        if spec.size < 3 {
            return Err(GridError::BadSize {
                axis: d,
                size: spec.size,
            });
        }
        let nodes = match spec.grading {
            Grading::Uniform => uniform_axis(spec.lo, spec.hi, spec.size),
            Grading::GeometricTowardFocus { focus, strength } => {
                if focus < spec.lo || focus > spec.hi {
                    return Err(GridError::FocusOutsideBox {
                        axis: d,
                        focus,
                        lo: spec.lo,
                        hi: spec.hi,
                    });
                }
                sinh_axis(spec.lo, spec.hi, spec.size, focus, strength)
            }
        };
        debug_assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        coord_axes.push(nodes);
        boxes.push([spec.lo, spec.hi]);
        boundary.push(spec.boundary);
    }
    Ok(Grid {
        axes: coord_axes,
        boxes,
        boundary,
    })
}

fn uniform_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    let mut nodes: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
    nodes[n - 1] = hi;
    nodes
}

/// Sinh-stretched axis: uniform in `η`, with `x = focus + sinh(η)/β` and
/// `β = strength / (hi − lo)`. Spacing is minimal where `η = 0`, i.e. at
/// the focus.
fn sinh_axis(lo: f64, hi: f64, n: usize, focus: f64, strength: f64) -> Vec<f64> {
    let beta = strength.max(1e-8) / (hi - lo);
    let eta_lo = (beta * (lo - focus)).asinh();
    let eta_hi = (beta * (hi - focus)).asinh();
    let d_eta = (eta_hi - eta_lo) / (n - 1) as f64;
    let mut nodes: Vec<f64> = (0..n)
        .map(|i| focus + (eta_lo + d_eta * i as f64).sinh() / beta)
        .collect();
    nodes[0] = lo;
    nodes[n - 1] = hi;
    nodes
}

/// Per-node weights `wᵢ = a·ρ(xᵢ)·cellvolᵢ` so that `Σ wᵢ f(xᵢ) ≈ ∫ f dμ`.
pub fn quadrature_weights(grid: &Grid, density: &ExcessiveDensity) -> Vec<f64> {
    let mut coords = vec![0.0; grid.dim()];
    (0..grid.len())
        .map(|idx| {
            grid.node_into(idx, &mut coords);
            density.normalizer() * density.rho(&coords) * grid.cell_volume(idx)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ExcessiveDensity;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_axis_nodes() {
        let g = make_grid(&[AxisSpec::uniform(0.0, 2.0, 5)]).unwrap();
        assert_eq!(g.axis(0), &[0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn row_major_center_node() {
        let g = make_grid(&[AxisSpec::uniform(0.0, 1.0, 3), AxisSpec::uniform(0.0, 1.0, 3)])
            .unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.node(4), vec![0.5, 0.5]);
    }

    #[test]
    fn graded_axis_min_spacing_at_focus() {
        let g = make_grid(&[AxisSpec::graded(0.0, 2.0, 101, 1.0, 20.0)]).unwrap();
        let ax = g.axis(0);
        let spacings: Vec<f64> = ax.windows(2).map(|w| w[1] - w[0]).collect();
        let argmin = spacings
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        // Node nearest the focus.
        let nearest = ax
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 1.0).abs().partial_cmp(&(b.1 - 1.0).abs()).unwrap())
            .unwrap()
            .0;
        assert!(
            argmin == nearest || argmin + 1 == nearest,
            "min spacing at interval {argmin}, focus node {nearest}"
        );
    }

    #[test]
    fn bad_box_and_size_rejected() {
        assert!(matches!(
            make_grid(&[AxisSpec::uniform(1.0, 1.0, 5)]),
            Err(GridError::BadBox { .. })
        ));
        assert!(matches!(
            make_grid(&[AxisSpec::uniform(0.0, 1.0, 2)]),
            Err(GridError::BadSize { .. })
        ));
    }

    #[test]
    fn quadrature_exact_for_constant_and_linear() {
        let g = make_grid(&[AxisSpec::uniform(0.0, 1.0, 11)]).unwrap();
        let density = ExcessiveDensity::flat(vec![[0.0, 1.0]]);
        let w = quadrature_weights(&g, &density);
        let mass: f64 = w.iter().sum();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
        let first_moment: f64 = w
            .iter()
            .zip(g.axis(0))
            .map(|(wi, xi)| wi * xi)
            .sum();
        assert_abs_diff_eq!(first_moment, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_mass_richardson() {
        let density = ExcessiveDensity::gbm_family(1, 1.0, vec![[-8.0, 8.0]]);
        let coarse = make_grid(&[AxisSpec::uniform(-8.0, 8.0, 2001)]).unwrap();
        let fine = make_grid(&[AxisSpec::uniform(-8.0, 8.0, 4001)]).unwrap();
        let mc: f64 = quadrature_weights(&coarse, &density).iter().sum();
        let mf: f64 = quadrature_weights(&fine, &density).iter().sum();
        assert!((mc - mf).abs() < 1e-4, "mc={mc}, mf={mf}");
    }

    proptest! {
        #[test]
        fn flat_index_round_trip(
            n0 in 3usize..7,
            n1 in 3usize..7,
            n2 in 3usize..5,
        ) {
            let g = make_grid(&[
                AxisSpec::uniform(0.0, 1.0, n0),
                AxisSpec::uniform(-1.0, 2.0, n1),
                AxisSpec::uniform(0.0, 5.0, n2),
            ]).unwrap();
            for idx in 0..g.len() {
                prop_assert_eq!(g.flatten(&g.unflatten(idx)), idx);
            }
        }
    }
}
