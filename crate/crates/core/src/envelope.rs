//! Amalgam-space machinery: local maximal functions, weighted amalgam norms,
//! group convolution, and the quantitative synthesis bound.
//!
//! The two-sided amalgam norm is `‖f‖_{W_w} = ‖M_Q^R M_Q f‖_{L¹_w}`; the
//! one-sided versions use a single maximal pass. Everything is evaluated on a
//! quadrature grid; values outside the window count as zero, which biases the
//! norms downward in a way the certificates record via the window metadata.

use crate::error::{Error, Result};
use crate::group::{GridRef, GroupPoint, NeighborhoodSpec, Weight};
use crate::pointset::PointFamily;
use crate::C64;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A function on a group sampled on a quadrature grid.
///
/// The numerical stand-in for elements of `L²(G)`, envelope profiles, and
/// kernel slices. Values at points outside the window are taken as zero.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: GridRef,
    pub values: Vec<C64>,
}

impl GridFunction {
    pub fn new(grid: GridRef, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "value count {} ≠ node count {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidGrid("non-finite value in grid function".into()));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: GridRef) -> Self {
        let n = grid.len();
        GridFunction {
            grid,
            values: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn from_fn<F: Fn(GroupPoint) -> C64>(grid: GridRef, f: F) -> Self {
        let values = grid.nodes.iter().map(|&p| f(p)).collect();
        GridFunction { grid, values }
    }

    pub fn from_real_fn<F: Fn(GroupPoint) -> f64>(grid: GridRef, f: F) -> Self {
        Self::from_fn(grid, |p| C64::new(f(p), 0.0))
    }

    /// Nearest-node evaluation; zero outside the window.
    #[inline]
    pub fn eval(&self, x: GroupPoint) -> C64 {
        match self.grid.nearest_node(x) {
            Some(i) => self.values[i],
            None => C64::new(0.0, 0.0),
        }
    }

    /// Real part accessor for envelope-type functions.
    #[inline]
    pub fn eval_real(&self, x: GroupPoint) -> f64 {
        self.eval(x).re
    }

    pub fn is_real_nonnegative(&self, tol: f64) -> bool {
        self.values.iter().all(|v| v.im.abs() <= tol && v.re >= -tol)
    }

    /// Involution `f^∨(x) = f(x⁻¹)` by nearest-node lookup.
    pub fn involution(&self) -> GridFunction {
        let g = self.grid.group.clone();
        let values = self
            .grid
            .nodes
            .iter()
            .map(|&p| self.eval(g.inv(p)))
            .collect();
        GridFunction {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Pointwise minimum of two real envelope profiles on the same grid.
    pub fn min_with(&self, other: &GridFunction) -> Result<GridFunction> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| C64::new(a.re.min(b.re), 0.0))
            .collect();
        Ok(GridFunction {
            grid: self.grid.clone(),
            values,
        })
    }

    /// `self + c · other` on the same grid.
    pub fn axpy(&self, c: f64, other: &GridFunction) -> Result<GridFunction> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        Ok(GridFunction {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Clamp a real profile from above: `min(cap, f)`.
    pub fn clamped(&self, cap: f64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .map(|v| C64::new(v.re.min(cap), 0.0))
                .collect(),
        }
    }

    /// Weighted `L²(μ)` inner product `⟨f, g⟩ = Σ f ḡ w`.
    pub fn inner(&self, other: &GridFunction) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.values.len() {
            acc += self.values[i] * other.values[i].conj() * self.grid.weights[i];
        }
        acc
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    pub fn norm_l1(&self) -> f64 {
        self.grid.integrate(|i| self.values[i].norm())
    }

    pub fn norm_linf(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if !self.grid.same_grid(&other.grid) {
            return Err(Error::GridMismatch(
                "grid functions live on different grids".into(),
            ));
        }
        Ok(())
    }
}

/// Precomputed neighbor lists for the local maximal operators on a grid.
///
/// `left[i]` holds the nodes `y ∈ x_i·N`, `right[i]` the nodes `y ∈ N·x_i`.
/// Every list contains the node itself (`N` contains the identity), so the
/// boundary rule "empty intersection → the node itself" is automatic.
pub struct LocalMax {
    pub grid: GridRef,
    pub neighborhood: NeighborhoodSpec,
    left: Vec<Vec<u32>>,
    right: Vec<Vec<u32>>,
}

impl LocalMax {
    pub fn new(grid: GridRef, neighborhood: NeighborhoodSpec) -> Self {
        let n = grid.len();
        let build = |right_side: bool| -> Vec<Vec<u32>> {
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let g = &grid.group;
                    let x = grid.nodes[i];
                    let mut list = Vec::new();
                    for (j, &y) in grid.nodes.iter().enumerate() {
                        let inside = if right_side {
                            g.in_right_translate(&neighborhood, x, y)
                        } else {
                            g.in_left_translate(&neighborhood, x, y)
                        };
                        if inside {
                            list.push(j as u32);
                        }
                    }
                    if !list.contains(&(i as u32)) {
                        list.push(i as u32);
                    }
                    list
                })
                .collect()
        };
        let left = build(false);
        let right = build(true);
        LocalMax {
            grid,
            neighborhood,
            left,
            right,
        }
    }

    /// `M_N f(x) = max_{y ∈ xN} |f(y)|`.
    pub fn maximal_left(&self, f: &GridFunction) -> GridFunction {
        self.maximal(f, &self.left)
    }

    /// `M_N^R f(x) = max_{y ∈ Nx} |f(y)|`.
    pub fn maximal_right(&self, f: &GridFunction) -> GridFunction {
        self.maximal(f, &self.right)
    }

    fn maximal(&self, f: &GridFunction, lists: &[Vec<u32>]) -> GridFunction {
        let values: Vec<C64> = lists
            .par_iter()
            .map(|list| {
                let mut m = 0.0f64;
                for &j in list {
                    m = m.max(f.values[j as usize].norm());
                }
                C64::new(m, 0.0)
            })
            .collect();
        GridFunction {
            grid: f.grid.clone(),
            values,
        }
    }
}

/// Norms of one function in the weighted amalgam scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmalgamReport {
    /// `‖M_Q^R M_Q f‖_{L¹_w}` (two-sided norm).
    pub norm_two_sided: f64,
    /// `‖M_Q f‖_{L¹_w}`.
    pub norm_left: f64,
    /// `‖M_Q^R f‖_{L¹_w}`.
    pub norm_right: f64,
    pub l1w: f64,
    pub linf: f64,
    /// `| ‖M_Q^R M_Q f‖ − ‖M_Q M_Q^R f‖ |`, nonzero only through window
    /// truncation at the boundary.
    pub swap_residual: f64,
}

/// Compute all amalgam norms of `f` with weight `w`, using the maximal
/// operator `lm` (built for the group's `Q`).
pub fn amalgam_norms(f: &GridFunction, w: &Weight, lm: &LocalMax) -> AmalgamReport {
    let g = &f.grid.group;
    let weighted_l1 = |h: &GridFunction| -> f64 {
        h.grid
            .integrate(|i| h.values[i].norm() * w.eval(g, h.grid.nodes[i]))
    };
    let ml = lm.maximal_left(f);
    let mr = lm.maximal_right(f);
    let two_a = lm.maximal_right(&ml);
    let two_b = lm.maximal_left(&mr);
    let n_two_a = weighted_l1(&two_a);
    let n_two_b = weighted_l1(&two_b);
    AmalgamReport {
        norm_two_sided: n_two_a,
        norm_left: weighted_l1(&ml),
        norm_right: weighted_l1(&mr),
        l1w: weighted_l1(f),
        linf: f.norm_linf(),
        swap_residual: (n_two_a - n_two_b).abs(),
    }
}

/// Group convolution `(f∗g)(x) = Σ_y f(y) g(y⁻¹x) w(y)` with nearest-node
/// lookup for `g` and zero outside the window.
pub fn convolve(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    if !f.grid.same_grid(&g.grid) {
        return Err(Error::GridMismatch("convolution needs a common grid".into()));
    }
    let grid = f.grid.clone();
    let values: Vec<C64> = (0..grid.len())
        .into_par_iter()
        .map(|ix| {
            let gr = &grid.group;
            let x = grid.nodes[ix];
            let mut acc = C64::new(0.0, 0.0);
            for (iy, &y) in grid.nodes.iter().enumerate() {
                let fv = f.values[iy];
                if fv.re == 0.0 && fv.im == 0.0 {
                    continue;
                }
                let gv = g.eval(gr.mul(gr.inv(y), x));
                if gv.re != 0.0 || gv.im != 0.0 {
                    acc += fv * gv * grid.weights[iy];
                }
            }
            acc
        })
        .collect();
    Ok(GridFunction { grid, values })
}

/// Output of [`synthesis_norm_bound`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisBound {
    /// `sqrt( rel(Λ)/μ_G(Q) · ‖Θ‖_{L¹} · ‖Θ^∨‖_{W^L} )`.
    pub bound: f64,
    /// Largest singular value of the synthesis map `c ↦ Σ c_λ L_λΘ` on the grid.
    pub measured: f64,
    pub rel: usize,
    pub mu_q: f64,
}

/// Quantitative bound for the synthesis operator of translates of a
/// continuous profile `Θ ≥ 0` along a relatively separated family, together
/// with the measured operator norm (dense SVD on the grid).
pub fn synthesis_norm_bound(
    theta: &GridFunction,
    family: &PointFamily,
    lm: &LocalMax,
    w_one: &Weight,
) -> Result<SynthesisBound> {
    if !theta.is_real_nonnegative(1e-12) {
        return Err(Error::Precondition(
            "synthesis bound needs a nonnegative real profile".into(),
        ));
    }
    let grid = &theta.grid;
    let g = &grid.group;
    let rel = family.relative_separation(&g.q_neighborhood, grid)?;
    if rel == 0 {
        return Err(Error::Precondition("empty family".into()));
    }
    let mu_q = g.mu_q();
    let l1 = theta.norm_l1();
    let theta_inv = theta.involution();
    let wl = amalgam_norms(&theta_inv, w_one, lm).norm_left;
    let bound_sq = rel as f64 / mu_q * l1 * wl;

    // Measured norm: columns L_λΘ scaled by sqrt(node weights) so the SVD is
    // the L²(μ) operator norm.
    let n = grid.len();
    let m = family.points.len();
    let mut mat = DMatrix::<f64>::zeros(n, m);
    for (c, &lam) in family.points.iter().enumerate() {
        for r in 0..n {
            let v = theta.eval_real(g.mul(g.inv(lam), grid.nodes[r]));
            mat[(r, c)] = v * grid.weights[r].sqrt();
        }
    }
    let measured = mat.svd(false, false).singular_values.max();
    Ok(SynthesisBound {
        bound: bound_sq.max(0.0).sqrt(),
        measured,
        rel,
        mu_q,
    })
}
