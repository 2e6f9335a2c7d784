//! Concrete group arithmetic, Haar quadrature, and admissible weights.
//!
//! Three groups are implemented: the real line `ℝ`, the plane `ℝ²` (both with
//! addition), and the affine group `ℝ⋊ℝ*` with multiplication
//! `(b₀,a₀)(b₁,a₁) = (b₀ + a₀b₁, a₀a₁)` and left Haar measure `da db/a²`.
//!
//! All suprema over the group are replaced by maxima over a finite quadrature
//! window; every certificate downstream records that window.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Identifier for the three scenario groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupId {
    RealLine,
    Plane,
    Affine,
}

/// A point of one of the scenario groups.
///
/// Storage is a fixed pair of coordinates; the line uses only the first one.
/// Affine points are `(b, a)` with `a ≠ 0`; the sign of `a` encodes the
/// reflection component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupPoint {
    c: [f64; 2],
}

impl GroupPoint {
    pub fn line(x: f64) -> Self {
        GroupPoint { c: [x, 0.0] }
    }
    pub fn plane(x: f64, y: f64) -> Self {
        GroupPoint { c: [x, y] }
    }
    pub fn affine(b: f64, a: f64) -> Self {
        GroupPoint { c: [b, a] }
    }
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.c[i]
    }
    #[inline]
    pub fn coords(&self) -> &[f64; 2] {
        &self.c
    }
}

/// A box-shaped unit neighborhood, described in the group's box coordinates.
///
/// Box coordinates are `(x)` on the line, `(x, y)` on the plane and
/// `(b, log|a|)` on the affine group. A plain box need not be symmetric under
/// group inversion on the affine group; setting `symmetrized` additionally
/// requires `inv(x)` to lie in the (possibly mirrored) box, which makes the
/// set symmetric for any group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    /// Half-widths in box coordinates; membership is strict (`<`).
    pub half_widths: [f64; 2],
    /// Affine only: also include the mirror image `a < 0` of the box.
    #[serde(default)]
    pub include_mirror: bool,
    /// Require `inv(x)` in the box as well (yields a symmetric set).
    #[serde(default)]
    pub symmetrized: bool,
}

impl NeighborhoodSpec {
    pub fn new(half_widths: [f64; 2]) -> Self {
        NeighborhoodSpec {
            half_widths,
            include_mirror: false,
            symmetrized: false,
        }
    }

    pub fn symmetrized(half_widths: [f64; 2]) -> Self {
        NeighborhoodSpec {
            half_widths,
            include_mirror: false,
            symmetrized: true,
        }
    }

    pub fn with_mirror(mut self) -> Self {
        self.include_mirror = true;
        self
    }

    /// Scale all half-widths by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        NeighborhoodSpec {
            half_widths: [self.half_widths[0] * factor, self.half_widths[1] * factor],
            include_mirror: self.include_mirror,
            symmetrized: self.symmetrized,
        }
    }
}

/// Weight kinds available as admissible weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// `w ≡ 1`.
    One,
    /// `w(x) = (1 + dist(x))^power` where `dist` is the group's natural
    /// displacement size (see [`GroupSpec::displacement_size`]).
    Polynomial { power: f64 },
}

/// An admissible weight: `w ≥ 1` and submultiplicative `w(xy) ≤ w(x)w(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub kind: WeightKind,
    pub label: String,
}

impl Weight {
    pub fn one() -> Self {
        Weight {
            kind: WeightKind::One,
            label: "one".into(),
        }
    }

    pub fn polynomial(power: f64) -> Self {
        Weight {
            kind: WeightKind::Polynomial { power },
            label: format!("poly{power}"),
        }
    }

    pub fn eval(&self, g: &GroupSpec, x: GroupPoint) -> f64 {
        match self.kind {
            WeightKind::One => 1.0,
            WeightKind::Polynomial { power } => (1.0 + g.displacement_size(x)).powf(power),
        }
    }
}

/// A concrete locally compact group together with its fixed symmetric unit
/// neighborhood `Q` and the auxiliary neighborhood `P` with `PP ⊂ Q`.
///
/// `measure_scale` rescales the Haar measure relative to the coordinate
/// density (Haar measure is unique only up to a constant; the Fock scenario
/// uses `1/π` so that its reproducing kernel has unit diagonal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub id: GroupId,
    pub measure_scale: f64,
    pub q_neighborhood: NeighborhoodSpec,
    pub p_neighborhood: NeighborhoodSpec,
}

impl GroupSpec {
    /// The real line with `Q = (−1, 1)`.
    pub fn real_line() -> Self {
        let q = NeighborhoodSpec::new([1.0, 0.0]);
        GroupSpec {
            id: GroupId::RealLine,
            measure_scale: 1.0,
            q_neighborhood: q,
            p_neighborhood: q.scaled(0.5),
        }
    }

    /// The plane with `Q = (−1, 1)²`.
    pub fn plane() -> Self {
        let q = NeighborhoodSpec::new([1.0, 1.0]);
        GroupSpec {
            id: GroupId::Plane,
            measure_scale: 1.0,
            q_neighborhood: q,
            p_neighborhood: q.scaled(0.5),
        }
    }

    /// The affine group with the default `Q`: the box `|b| < 1`,
    /// `|log|a|| < log 2` on both components, symmetrized so that
    /// `x ∈ Q ⟺ x⁻¹ ∈ Q`.
    pub fn affine() -> Self {
        let q = NeighborhoodSpec::symmetrized([1.0, std::f64::consts::LN_2]).with_mirror();
        // P is shrunk until P·P ⊂ Q holds on samples (factor 0.4 suffices for
        // the default box; verified in tests).
        let p = NeighborhoodSpec::symmetrized([0.4, 0.4 * std::f64::consts::LN_2]).with_mirror();
        GroupSpec {
            id: GroupId::Affine,
            measure_scale: 1.0,
            q_neighborhood: q,
            p_neighborhood: p,
        }
    }

    pub fn with_measure_scale(mut self, scale: f64) -> Self {
        self.measure_scale = scale;
        self
    }

    pub fn with_q(mut self, q: NeighborhoodSpec) -> Self {
        self.q_neighborhood = q;
        self.p_neighborhood = q.scaled(0.5);
        self
    }

    pub fn dim(&self) -> usize {
        match self.id {
            GroupId::RealLine => 1,
            GroupId::Plane | GroupId::Affine => 2,
        }
    }

    pub fn identity(&self) -> GroupPoint {
        match self.id {
            GroupId::RealLine => GroupPoint::line(0.0),
            GroupId::Plane => GroupPoint::plane(0.0, 0.0),
            GroupId::Affine => GroupPoint::affine(0.0, 1.0),
        }
    }

    pub fn validate_point(&self, x: GroupPoint) -> Result<()> {
        if x.c[0].is_nan() || x.c[1].is_nan() {
            return Err(Error::InvalidPoint("NaN coordinate".into()));
        }
        if self.id == GroupId::Affine && x.c[1] == 0.0 {
            return Err(Error::InvalidPoint("affine point with a = 0".into()));
        }
        Ok(())
    }

    /// Group multiplication.
    #[inline]
    pub fn mul(&self, x: GroupPoint, y: GroupPoint) -> GroupPoint {
        match self.id {
            GroupId::RealLine => GroupPoint::line(x.c[0] + y.c[0]),
            GroupId::Plane => GroupPoint::plane(x.c[0] + y.c[0], x.c[1] + y.c[1]),
            GroupId::Affine => GroupPoint::affine(x.c[0] + x.c[1] * y.c[0], x.c[1] * y.c[1]),
        }
    }

    /// Group inverse; on the affine group `inv((b,a)) = (−b/a, 1/a)`.
    #[inline]
    pub fn inv(&self, x: GroupPoint) -> GroupPoint {
        match self.id {
            GroupId::RealLine => GroupPoint::line(-x.c[0]),
            GroupId::Plane => GroupPoint::plane(-x.c[0], -x.c[1]),
            GroupId::Affine => GroupPoint::affine(-x.c[0] / x.c[1], 1.0 / x.c[1]),
        }
    }

    /// `inv(x)·y`, the left displacement from `x` to `y`.
    #[inline]
    pub fn displacement(&self, x: GroupPoint, y: GroupPoint) -> GroupPoint {
        self.mul(self.inv(x), y)
    }

    /// Density of the Haar measure with respect to the coordinate measure.
    #[inline]
    pub fn haar_density(&self, x: GroupPoint) -> f64 {
        let base = match self.id {
            GroupId::RealLine | GroupId::Plane => 1.0,
            GroupId::Affine => 1.0 / (x.c[1] * x.c[1]),
        };
        base * self.measure_scale
    }

    /// Modular function `Δ(x)`; the line and plane are unimodular, the affine
    /// group has `Δ((b,a)) = 1/|a|`.
    #[inline]
    pub fn modular(&self, x: GroupPoint) -> f64 {
        match self.id {
            GroupId::RealLine | GroupId::Plane => 1.0,
            GroupId::Affine => 1.0 / x.c[1].abs(),
        }
    }

    /// Box coordinates used by neighborhoods and grids:
    /// identity-centered, with the affine `a`-axis in `log|a|`.
    #[inline]
    pub fn box_coords(&self, x: GroupPoint) -> [f64; 2] {
        match self.id {
            GroupId::RealLine => [x.c[0], 0.0],
            GroupId::Plane => [x.c[0], x.c[1]],
            GroupId::Affine => [x.c[0], x.c[1].abs().ln()],
        }
    }

    /// Size of a displacement, used for decay profiles and polynomial
    /// weights: `|x|`, `|x|₂`, or `|b| + max(|a|, 1/|a|) − 1` on the affine
    /// group (which makes `1 + dist` submultiplicative).
    pub fn displacement_size(&self, x: GroupPoint) -> f64 {
        match self.id {
            GroupId::RealLine => x.c[0].abs(),
            GroupId::Plane => x.c[0].hypot(x.c[1]),
            GroupId::Affine => {
                let a = x.c[1].abs();
                x.c[0].abs() + a.max(1.0 / a) - 1.0
            }
        }
    }

    fn in_plain_box(&self, n: &NeighborhoodSpec, x: GroupPoint) -> bool {
        match self.id {
            GroupId::RealLine => x.c[0].abs() < n.half_widths[0],
            GroupId::Plane => {
                x.c[0].abs() < n.half_widths[0] && x.c[1].abs() < n.half_widths[1]
            }
            GroupId::Affine => {
                if x.c[1] == 0.0 {
                    return false;
                }
                if x.c[1] < 0.0 && !n.include_mirror {
                    return false;
                }
                x.c[0].abs() < n.half_widths[0]
                    && x.c[1].abs().ln().abs() < n.half_widths[1]
            }
        }
    }

    /// Membership `x ∈ N`.
    pub fn contains(&self, n: &NeighborhoodSpec, x: GroupPoint) -> bool {
        if !self.in_plain_box(n, x) {
            return false;
        }
        if n.symmetrized && !self.in_plain_box(n, self.inv(x)) {
            return false;
        }
        true
    }

    /// Membership `y ∈ xN`, i.e. `inv(x)·y ∈ N`.
    #[inline]
    pub fn in_left_translate(&self, n: &NeighborhoodSpec, x: GroupPoint, y: GroupPoint) -> bool {
        self.contains(n, self.displacement(x, y))
    }

    /// Membership `y ∈ Nx`, i.e. `y·inv(x) ∈ N`.
    #[inline]
    pub fn in_right_translate(&self, n: &NeighborhoodSpec, x: GroupPoint, y: GroupPoint) -> bool {
        self.contains(n, self.mul(y, self.inv(x)))
    }

    /// Haar measure of a neighborhood by midpoint quadrature at the given
    /// per-axis resolution.
    pub fn neighborhood_measure(&self, n: &NeighborhoodSpec, resolution: usize) -> f64 {
        let res = resolution.max(2);
        match self.id {
            GroupId::RealLine => {
                let h = n.half_widths[0];
                let step = 2.0 * h / res as f64;
                let mut total = 0.0;
                for i in 0..res {
                    let x = GroupPoint::line(-h + (i as f64 + 0.5) * step);
                    if self.contains(n, x) {
                        total += step * self.haar_density(x);
                    }
                }
                total
            }
            GroupId::Plane => {
                let (h0, h1) = (n.half_widths[0], n.half_widths[1]);
                let (s0, s1) = (2.0 * h0 / res as f64, 2.0 * h1 / res as f64);
                let mut total = 0.0;
                for i in 0..res {
                    for j in 0..res {
                        let x = GroupPoint::plane(
                            -h0 + (i as f64 + 0.5) * s0,
                            -h1 + (j as f64 + 0.5) * s1,
                        );
                        if self.contains(n, x) {
                            total += s0 * s1 * self.haar_density(x);
                        }
                    }
                }
                total
            }
            GroupId::Affine => {
                // Integrate over the positive component in (b, log a)
                // coordinates where the Haar density becomes e^{-s} ds db,
                // then double when the mirror is included.
                let (hb, hs) = (n.half_widths[0], n.half_widths[1]);
                let (sb, ss) = (2.0 * hb / res as f64, 2.0 * hs / res as f64);
                let mut total = 0.0;
                for i in 0..res {
                    for j in 0..res {
                        let b = -hb + (i as f64 + 0.5) * sb;
                        let s = -hs + (j as f64 + 0.5) * ss;
                        let x = GroupPoint::affine(b, s.exp());
                        if self.contains(n, x) {
                            // db da/a² = db d(log a)/a
                            total += sb * ss * (-s).exp() * self.measure_scale;
                        }
                    }
                }
                if n.include_mirror {
                    total *= 2.0;
                }
                total
            }
        }
    }

    /// Haar measure of the fixed neighborhood `Q` (cached resolution 600).
    pub fn mu_q(&self) -> f64 {
        self.neighborhood_measure(&self.q_neighborhood, 600)
    }

    /// Sample points of a neighborhood on a small box-coordinate grid
    /// (positive affine component plus mirror when included).
    pub fn sample_neighborhood(&self, n: &NeighborhoodSpec, per_axis: usize) -> Vec<GroupPoint> {
        let res = per_axis.max(2);
        let mut out = Vec::new();
        let push_if = |out: &mut Vec<GroupPoint>, g: &Self, x: GroupPoint| {
            if g.contains(n, x) {
                out.push(x);
            }
        };
        match self.id {
            GroupId::RealLine => {
                let h = n.half_widths[0];
                for i in 0..res {
                    let x = -h + (i as f64 + 0.5) * 2.0 * h / res as f64;
                    push_if(&mut out, self, GroupPoint::line(x));
                }
            }
            GroupId::Plane => {
                let (h0, h1) = (n.half_widths[0], n.half_widths[1]);
                for i in 0..res {
                    for j in 0..res {
                        let x = -h0 + (i as f64 + 0.5) * 2.0 * h0 / res as f64;
                        let y = -h1 + (j as f64 + 0.5) * 2.0 * h1 / res as f64;
                        push_if(&mut out, self, GroupPoint::plane(x, y));
                    }
                }
            }
            GroupId::Affine => {
                let (hb, hs) = (n.half_widths[0], n.half_widths[1]);
                let signs: &[f64] = if n.include_mirror { &[1.0, -1.0] } else { &[1.0] };
                for &sign in signs {
                    for i in 0..res {
                        for j in 0..res {
                            let b = -hb + (i as f64 + 0.5) * 2.0 * hb / res as f64;
                            let s = -hs + (j as f64 + 0.5) * 2.0 * hs / res as f64;
                            push_if(&mut out, self, GroupPoint::affine(b, sign * s.exp()));
                        }
                    }
                }
            }
        }
        out
    }

    /// Sampled check that the product of every pair from `a` and `b` lies in
    /// `target`. Used to certify containments such as `V·V·V·V ⊂ U`.
    pub fn product_contained_in(
        &self,
        factors: &[&NeighborhoodSpec],
        target: &NeighborhoodSpec,
        per_axis: usize,
    ) -> bool {
        assert!(!factors.is_empty());
        let mut acc: Vec<GroupPoint> = self.sample_neighborhood(factors[0], per_axis);
        for n in &factors[1..] {
            let samples = self.sample_neighborhood(n, per_axis);
            let mut next = Vec::with_capacity(acc.len() * samples.len());
            for &x in &acc {
                for &y in &samples {
                    next.push(self.mul(x, y));
                }
            }
            acc = next;
            // Keep the sample count bounded by thinning deterministically.
            if acc.len() > 200_000 {
                let stride = acc.len() / 100_000 + 1;
                acc = acc.iter().step_by(stride).copied().collect();
            }
        }
        acc.iter().all(|&x| self.contains(target, x))
    }
}

/// A coordinate window. `axes` are `[lo, hi]` in group coordinates (`a`, not
/// `log a`, on the affine axis). `mirror` additionally includes the reflected
/// component `a < 0` of the affine group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub axes: [[f64; 2]; 2],
    #[serde(default)]
    pub mirror: bool,
}

impl Window {
    pub fn line(lo: f64, hi: f64) -> Self {
        Window {
            axes: [[lo, hi], [0.0, 0.0]],
            mirror: false,
        }
    }
    pub fn plane(x: [f64; 2], y: [f64; 2]) -> Self {
        Window {
            axes: [x, y],
            mirror: false,
        }
    }
    pub fn affine(b: [f64; 2], a: [f64; 2]) -> Self {
        Window {
            axes: [b, a],
            mirror: false,
        }
    }
    pub fn with_mirror(mut self) -> Self {
        self.mirror = true;
        self
    }
}

/// One uniform axis of a grid. For the affine `a`-axis the coordinate is
/// `log a` (`geometric = true`), so cells are geometric in `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub geometric: bool,
}

impl GridAxis {
    #[inline]
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }
    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.step()
    }
    /// Index of the cell containing coordinate `c`, or `None` outside.
    #[inline]
    pub fn locate(&self, c: f64) -> Option<usize> {
        if self.n == 0 || !c.is_finite() {
            return None;
        }
        if c < self.lo || c >= self.hi {
            // Accept the closed upper endpoint to avoid dropping exact hits.
            if c == self.hi {
                return Some(self.n - 1);
            }
            return None;
        }
        let i = ((c - self.lo) / self.step()) as usize;
        Some(i.min(self.n - 1))
    }
}

/// A midpoint-rule quadrature grid on a window.
///
/// Node weight = cell coordinate volume × Haar density at the node. On the
/// affine `a`-axis cells are geometric with nodes at geometric midpoints,
/// which integrates the density `a⁻²` exactly per cell.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub group: GroupSpec,
    pub window: Window,
    pub resolution: [usize; 2],
    pub nodes: Vec<GroupPoint>,
    pub weights: Vec<f64>,
    axis0: GridAxis,
    axis1: GridAxis,
    /// Number of nodes in one affine sign component (`= len` elsewhere).
    component_len: usize,
}

/// Shared handle to a grid.
pub type GridRef = Arc<QuadratureGrid>;

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn axis(&self, i: usize) -> &GridAxis {
        if i == 0 {
            &self.axis0
        } else {
            &self.axis1
        }
    }

    /// Total quadrature mass `Σ weights ≈ μ_G(window)`.
    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Index of the node whose cell contains `x` (nearest in box
    /// coordinates), or `None` outside the window.
    #[inline]
    pub fn nearest_node(&self, x: GroupPoint) -> Option<usize> {
        match self.group.id {
            GroupId::RealLine => {
                let i = self.axis0.locate(x.coord(0))?;
                Some(i)
            }
            GroupId::Plane => {
                let i = self.axis0.locate(x.coord(0))?;
                let j = self.axis1.locate(x.coord(1))?;
                Some(i * self.axis1.n + j)
            }
            GroupId::Affine => {
                let a = x.coord(1);
                if a == 0.0 {
                    return None;
                }
                let mirrored = a < 0.0;
                if mirrored && self.component_len == self.nodes.len() {
                    return None;
                }
                let i = self.axis0.locate(x.coord(0))?;
                let j = self.axis1.locate(a.abs().ln())?;
                let base = i * self.axis1.n + j;
                Some(if mirrored {
                    self.component_len + base
                } else {
                    base
                })
            }
        }
    }

    /// Quadrature of a real integrand sampled on the nodes.
    pub fn integrate<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, _)| f(i) * self.weights[i])
            .sum()
    }

    /// True when `other` is structurally the same grid.
    pub fn same_grid(&self, other: &QuadratureGrid) -> bool {
        self.group == other.group
            && self.window == other.window
            && self.resolution == other.resolution
    }
}

/// Build a midpoint-rule quadrature grid.
///
/// Preconditions: nondegenerate window, and on the affine group an `a`-range
/// on one side of `a = 0` (use [`Window::with_mirror`] for both components).
pub fn make_grid(group: &GroupSpec, window: &Window, resolution: [usize; 2]) -> Result<GridRef> {
    let dim = group.dim();
    for d in 0..dim {
        if resolution[d] == 0 {
            return Err(Error::InvalidGrid(format!("resolution[{d}] = 0")));
        }
        if !(window.axes[d][0] < window.axes[d][1]) {
            return Err(Error::InvalidGrid(format!(
                "degenerate window on axis {d}: [{}, {}]",
                window.axes[d][0], window.axes[d][1]
            )));
        }
    }

    let (axis0, axis1, res) = match group.id {
        GroupId::RealLine => (
            GridAxis {
                lo: window.axes[0][0],
                hi: window.axes[0][1],
                n: resolution[0],
                geometric: false,
            },
            GridAxis {
                lo: 0.0,
                hi: 0.0,
                n: 1,
                geometric: false,
            },
            [resolution[0], 1],
        ),
        GroupId::Plane => (
            GridAxis {
                lo: window.axes[0][0],
                hi: window.axes[0][1],
                n: resolution[0],
                geometric: false,
            },
            GridAxis {
                lo: window.axes[1][0],
                hi: window.axes[1][1],
                n: resolution[1],
                geometric: false,
            },
            resolution,
        ),
        GroupId::Affine => {
            let [a_lo, a_hi] = window.axes[1];
            if a_lo <= 0.0 {
                return Err(Error::InvalidGrid(format!(
                    "affine window must satisfy 0 < a_lo < a_hi (got [{a_lo}, {a_hi}]); \
                     use `mirror` for the reflected component"
                )));
            }
            (
                GridAxis {
                    lo: window.axes[0][0],
                    hi: window.axes[0][1],
                    n: resolution[0],
                    geometric: false,
                },
                GridAxis {
                    lo: a_lo.ln(),
                    hi: a_hi.ln(),
                    n: resolution[1],
                    geometric: true,
                },
                resolution,
            )
        }
    };

    let mut nodes = Vec::with_capacity(res[0] * res[1]);
    let mut weights = Vec::with_capacity(res[0] * res[1]);
    for i in 0..res[0] {
        for j in 0..res[1] {
            match group.id {
                GroupId::RealLine => {
                    nodes.push(GroupPoint::line(axis0.center(i)));
                    weights.push(axis0.step() * group.measure_scale);
                }
                GroupId::Plane => {
                    let x = GroupPoint::plane(axis0.center(i), axis1.center(j));
                    let w = axis0.step() * axis1.step() * group.haar_density(x);
                    nodes.push(x);
                    weights.push(w);
                }
                GroupId::Affine => {
                    let s_lo = axis1.lo + j as f64 * axis1.step();
                    let s_hi = s_lo + axis1.step();
                    let (a_lo, a_hi) = (s_lo.exp(), s_hi.exp());
                    let node = GroupPoint::affine(axis0.center(i), (s_lo + 0.5 * axis1.step()).exp());
                    // (a_hi − a_lo)/(a_lo·a_hi) integrates da/a² exactly over
                    // the cell since the node sits at the geometric midpoint.
                    let w = axis0.step() * (a_hi - a_lo) * group.haar_density(node);
                    nodes.push(node);
                    weights.push(w);
                }
            }
        }
    }

    let component_len = nodes.len();
    if window.mirror {
        if group.id != GroupId::Affine {
            return Err(Error::InvalidGrid(
                "mirror window is only meaningful on the affine group".into(),
            ));
        }
        for i in 0..component_len {
            let p = nodes[i];
            nodes.push(GroupPoint::affine(p.coord(0), -p.coord(1)));
            weights.push(weights[i]);
        }
    }

    Ok(Arc::new(QuadratureGrid {
        group: group.clone(),
        window: window.clone(),
        resolution: res,
        nodes,
        weights,
        axis0,
        axis1,
        component_len,
    }))
}

/// Report of [`check_weight`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightReport {
    pub max_below_one: f64,
    pub max_submultiplicativity_violation: f64,
    pub pairs_checked: usize,
    pub pass: bool,
}

/// Samples pairs from the grid and reports the worst violations of `w ≥ 1`
/// and of submultiplicativity. Report-only; `pass` ⟺ both within `tol`.
pub fn check_weight(g: &GroupSpec, w: &Weight, grid: &QuadratureGrid, tol: f64) -> WeightReport {
    let n = grid.len();
    let mut below_one: f64 = 0.0;
    for &x in &grid.nodes {
        below_one = below_one.max(1.0 - w.eval(g, x));
    }
    // Deterministic pair subsample: stride so that about 4000 pairs are taken.
    let target = 4000usize;
    let stride = ((n * n) / target.max(1)).max(1);
    let mut violation: f64 = 0.0;
    let mut pairs = 0usize;
    let mut k = 0usize;
    while k < n * n {
        let (i, j) = (k / n, k % n);
        let (x, y) = (grid.nodes[i], grid.nodes[j]);
        let lhs = w.eval(g, g.mul(x, y));
        let rhs = w.eval(g, x) * w.eval(g, y);
        violation = violation.max(lhs - rhs);
        pairs += 1;
        k += stride;
    }
    WeightReport {
        max_below_one: below_one,
        max_submultiplicativity_violation: violation,
        pairs_checked: pairs,
        pass: below_one <= tol && violation <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn affine_group_law_matches_stated_multiplication() {
        let g = GroupSpec::affine();
        let p = g.mul(GroupPoint::affine(1.0, 2.0), GroupPoint::affine(3.0, 4.0));
        assert_eq!(p.coords(), &[7.0, 8.0]);
    }

    #[test]
    fn line_identity_case() {
        let g = GroupSpec::real_line();
        let p = g.mul(GroupPoint::line(0.5), GroupPoint::line(0.0));
        assert_eq!(p.coord(0), 0.5);
    }

    #[test]
    fn affine_inverse_cancels() {
        let g = GroupSpec::affine();
        let x = GroupPoint::affine(2.0, 3.0);
        let e = g.mul(x, g.inv(x));
        assert_relative_eq!(e.coord(0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(e.coord(1), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn affine_inverse_closed_form() {
        // Solving (b,a)(b',a') = (0,1) gives (−b/a, 1/a).
        let g = GroupSpec::affine();
        let inv = g.inv(GroupPoint::affine(2.0, 4.0));
        assert_relative_eq!(inv.coord(0), -0.5, epsilon = 1e-15);
        assert_relative_eq!(inv.coord(1), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn line_and_plane_inverses() {
        let l = GroupSpec::real_line();
        assert_eq!(l.inv(GroupPoint::line(3.0)).coord(0), -3.0);
        let p = GroupSpec::plane();
        let q = p.inv(GroupPoint::plane(1.0, -2.0));
        assert_eq!((q.coord(0), q.coord(1)), (-1.0, 2.0));
    }

    #[test]
    fn associativity_on_sampled_triples() {
        for g in [GroupSpec::real_line(), GroupSpec::plane(), GroupSpec::affine()] {
            let pts: Vec<GroupPoint> = match g.id {
                GroupId::RealLine => vec![GroupPoint::line(0.3), GroupPoint::line(-1.7), GroupPoint::line(2.0)],
                GroupId::Plane => vec![
                    GroupPoint::plane(0.3, -0.4),
                    GroupPoint::plane(1.0, 2.0),
                    GroupPoint::plane(-0.5, 0.1),
                ],
                GroupId::Affine => vec![
                    GroupPoint::affine(0.3, 0.7),
                    GroupPoint::affine(-1.2, 2.5),
                    GroupPoint::affine(0.9, -0.4),
                ],
            };
            for &x in &pts {
                for &y in &pts {
                    for &z in &pts {
                        let lhs = g.mul(g.mul(x, y), z);
                        let rhs = g.mul(x, g.mul(y, z));
                        assert_relative_eq!(lhs.coord(0), rhs.coord(0), epsilon = 1e-12, max_relative = 1e-12);
                        assert_relative_eq!(lhs.coord(1), rhs.coord(1), epsilon = 1e-12, max_relative = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn modular_function_is_multiplicative() {
        let g = GroupSpec::affine();
        let x = GroupPoint::affine(0.7, -1.3);
        let y = GroupPoint::affine(-0.2, 0.6);
        assert_relative_eq!(g.modular(g.identity()), 1.0);
        assert_relative_eq!(
            g.modular(g.mul(x, y)),
            g.modular(x) * g.modular(y),
            epsilon = 1e-12
        );
    }

    #[test]
    fn q_neighborhood_is_symmetric() {
        for g in [GroupSpec::real_line(), GroupSpec::plane(), GroupSpec::affine()] {
            let samples = g.sample_neighborhood(&g.q_neighborhood.scaled(1.5), 21);
            for &x in &samples {
                assert_eq!(
                    g.contains(&g.q_neighborhood, x),
                    g.contains(&g.q_neighborhood, g.inv(x)),
                    "Q not symmetric at {:?} for {:?}",
                    x,
                    g.id
                );
            }
        }
    }

    #[test]
    fn p_times_p_inside_q() {
        for g in [GroupSpec::real_line(), GroupSpec::plane(), GroupSpec::affine()] {
            assert!(
                g.product_contained_in(&[&g.p_neighborhood, &g.p_neighborhood], &g.q_neighborhood, 9),
                "P·P ⊄ Q for {:?}",
                g.id
            );
        }
    }

    #[test]
    fn line_grid_midpoint_rule() {
        let g = GroupSpec::real_line();
        let grid = make_grid(&g, &Window::line(-1.0, 1.0), [4, 1]).unwrap();
        let xs: Vec<f64> = grid.nodes.iter().map(|p| p.coord(0)).collect();
        assert_eq!(xs, vec![-0.75, -0.25, 0.25, 0.75]);
        assert!(grid.weights.iter().all(|&w| (w - 0.5).abs() < 1e-15));
    }

    #[test]
    fn plane_grid_weights() {
        let g = GroupSpec::plane();
        let grid = make_grid(&g, &Window::plane([0.0, 1.0], [0.0, 1.0]), [2, 2]).unwrap();
        assert_eq!(grid.len(), 4);
        assert!(grid.weights.iter().all(|&w| (w - 0.25).abs() < 1e-15));
    }

    #[test]
    fn affine_grid_measure_is_exact() {
        // μ of b∈[0,1], a∈[1,e] is ∫₀¹db ∫₁ᵉ da/a² = 1 − e⁻¹ at any
        // resolution, because geometric-midpoint cells integrate a⁻² exactly.
        let g = GroupSpec::affine();
        let w = Window::affine([0.0, 1.0], [1.0, std::f64::consts::E]);
        for res in [[1usize, 1usize], [7, 5], [40, 40]] {
            let grid = make_grid(&g, &w, res).unwrap();
            assert_relative_eq!(
                grid.total_measure(),
                1.0 - (-1.0f64).exp(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn affine_grid_rejects_zero_crossing_window() {
        let g = GroupSpec::affine();
        let w = Window::affine([0.0, 1.0], [-1.0, 1.0]);
        assert!(make_grid(&g, &w, [2, 2]).is_err());
    }

    #[test]
    fn mirrored_grid_doubles_nodes_and_measure() {
        let g = GroupSpec::affine();
        let w = Window::affine([-1.0, 1.0], [0.5, 2.0]).with_mirror();
        let grid = make_grid(&g, &w, [4, 4]).unwrap();
        assert_eq!(grid.len(), 32);
        let plain = make_grid(&g, &Window::affine([-1.0, 1.0], [0.5, 2.0]), [4, 4]).unwrap();
        assert_relative_eq!(grid.total_measure(), 2.0 * plain.total_measure(), epsilon = 1e-12);
        // Lookup on the mirrored component.
        let idx = grid.nearest_node(GroupPoint::affine(0.3, -1.1)).unwrap();
        assert!(grid.nodes[idx].coord(1) < 0.0);
    }

    #[test]
    fn grid_refinement_keeps_total_measure() {
        let g = GroupSpec::affine();
        let w = Window::affine([-2.0, 2.0], [0.25, 4.0]);
        let coarse = make_grid(&g, &w, [8, 8]).unwrap();
        let fine = make_grid(&g, &w, [16, 16]).unwrap();
        assert_relative_eq!(coarse.total_measure(), fine.total_measure(), epsilon = 1e-10);
    }

    #[test]
    fn right_translation_scales_by_modular_function() {
        // ∫ f(y·x) dμ(y) = Δ(x⁻¹) ∫ f dμ, checked by quadrature with a smooth
        // compactly supported bump.
        let g = GroupSpec::affine();
        let w = Window::affine([-8.0, 8.0], [0.05, 20.0]);
        let grid = make_grid(&g, &w, [400, 300]).unwrap();
        let bump = |p: GroupPoint| -> f64 {
            let b = p.coord(0);
            let s = p.coord(1).abs().ln();
            let r2 = b * b + s * s;
            if p.coord(1) > 0.0 && r2 < 1.0 {
                (1.0 - r2).powi(2)
            } else {
                0.0
            }
        };
        let base: f64 = grid.integrate(|i| bump(grid.nodes[i]));
        let x = GroupPoint::affine(0.4, 1.5);
        let shifted: f64 = grid.integrate(|i| bump(g.mul(grid.nodes[i], x)));
        assert_relative_eq!(shifted, g.modular(g.inv(x)) * base, max_relative = 1e-3);
    }

    #[test]
    fn weight_one_passes_and_exponential_fails() {
        let g = GroupSpec::real_line();
        let grid = make_grid(&g, &Window::line(-3.0, 3.0), [24, 1]).unwrap();
        let ok = check_weight(&g, &Weight::one(), &grid, 1e-10);
        assert!(ok.pass);
        assert_eq!(ok.max_below_one, 0.0);

        // 1+|x| is submultiplicative on the line.
        let poly = check_weight(&g, &Weight::polynomial(1.0), &grid, 1e-10);
        assert!(poly.pass, "violation {}", poly.max_submultiplicativity_violation);

        // e^{−|x|} < 1 violates admissibility; emulate via a direct check.
        let mut worst: f64 = 0.0;
        for &x in &grid.nodes {
            worst = worst.max(1.0 - (-x.coord(0).abs()).exp());
        }
        assert!(worst > 0.5);
    }

    #[test]
    fn affine_polynomial_weight_is_submultiplicative() {
        let g = GroupSpec::affine();
        let grid = make_grid(&g, &Window::affine([-3.0, 3.0], [0.2, 5.0]).with_mirror(), [10, 8]).unwrap();
        let rep = check_weight(&g, &Weight::polynomial(1.0), &grid, 1e-10);
        assert!(rep.pass, "violation {}", rep.max_submultiplicativity_violation);
    }

    #[test]
    fn displacement_lookup_roundtrip() {
        let g = GroupSpec::affine();
        let w = Window::affine([-2.0, 2.0], [0.5, 2.0]);
        let grid = make_grid(&g, &w, [16, 8]).unwrap();
        for (i, &p) in grid.nodes.iter().enumerate() {
            assert_eq!(grid.nearest_node(p), Some(i));
        }
        assert_eq!(grid.nearest_node(GroupPoint::affine(5.0, 1.0)), None);
        assert_eq!(grid.nearest_node(GroupPoint::affine(0.0, -1.0)), None);
    }
}
