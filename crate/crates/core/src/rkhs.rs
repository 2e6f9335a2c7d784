//! Reproducing kernels and their certification: bounded diagonal,
//! localization by an integrable envelope, and weak uniform continuity.
//!
//! A kernel is certified on a window. The localization envelope `Θ` is fitted
//! by binning `|k(x,y)|` over the displacement `u = y⁻¹x`, so the dominance
//! `|k(x,y)| ≤ Θ(y⁻¹x)` holds at every sampled pair by construction (with
//! respect to the same bin map). Weak uniform continuity is probed through
//! the `L¹` kernel continuity route `‖k_x − Γ(x,y) k_y‖_{L¹} → 0`, which is
//! how all shipped kernels are verified; a direct ratio probe against
//! `Θ' = M_Q Θ` is attached as a secondary diagnostic.

use crate::envelope::{amalgam_norms, AmalgamReport, GridFunction, LocalMax};
use crate::error::{Error, Result};
use crate::group::{make_grid, GridRef, GroupId, GroupPoint, GroupSpec, Weight, Window};
use crate::linalg;
use crate::C64;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

type EvalFn = dyn Fn(GroupPoint, GroupPoint) -> C64 + Send + Sync;

/// A reproducing kernel given by a pointwise evaluator, with an optional
/// unimodular phase `Γ(x,y)` used by the uniform-continuity check.
#[derive(Clone)]
pub struct Kernel {
    pub group: GroupSpec,
    pub label: String,
    eval: Arc<EvalFn>,
    phase: Option<Arc<EvalFn>>,
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kernel")
            .field("group", &self.group.id)
            .field("label", &self.label)
            .field("has_phase", &self.phase.is_some())
            .finish()
    }
}

impl Kernel {
    pub fn new<F>(group: GroupSpec, label: impl Into<String>, eval: F) -> Self
    where
        F: Fn(GroupPoint, GroupPoint) -> C64 + Send + Sync + 'static,
    {
        Kernel {
            group,
            label: label.into(),
            eval: Arc::new(eval),
            phase: None,
        }
    }

    pub fn with_phase<F>(mut self, phase: F) -> Self
    where
        F: Fn(GroupPoint, GroupPoint) -> C64 + Send + Sync + 'static,
    {
        self.phase = Some(Arc::new(phase));
        self
    }

    #[inline]
    pub fn eval(&self, x: GroupPoint, y: GroupPoint) -> C64 {
        (self.eval)(x, y)
    }

    /// `Γ(x,y)`; identically 1 when no phase is attached.
    #[inline]
    pub fn phase(&self, x: GroupPoint, y: GroupPoint) -> C64 {
        match &self.phase {
            Some(p) => p(x, y),
            None => C64::new(1.0, 0.0),
        }
    }

    pub fn has_phase(&self) -> bool {
        self.phase.is_some()
    }

    /// Kernel slice `k_y = k(·, y)` sampled on a grid.
    pub fn slice(&self, grid: &GridRef, y: GroupPoint) -> GridFunction {
        GridFunction::from_fn(grid.clone(), |x| self.eval(x, y))
    }

    /// Dense kernel matrix `K[i,j] = k(x_i, x_j)` over grid nodes.
    pub fn matrix(&self, grid: &GridRef) -> DMatrix<C64> {
        let n = grid.len();
        let rows: Vec<Vec<C64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| self.eval(grid.nodes[i], grid.nodes[j]))
                    .collect()
            })
            .collect();
        DMatrix::from_fn(n, n, |i, j| rows[i][j])
    }

    /// Reproducing projection `P f(x) = ∫ k(x,y) f(y) dμ(y)` by quadrature.
    pub fn project(&self, f: &GridFunction) -> GridFunction {
        let grid = f.grid.clone();
        let values: Vec<C64> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let x = grid.nodes[i];
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..grid.len() {
                    acc += self.eval(x, grid.nodes[j]) * f.values[j] * grid.weights[j];
                }
                acc
            })
            .collect();
        GridFunction { grid, values }
    }

    /// Hermitian symmetry and PSD spot check of the Gram matrix at the given
    /// points. Returns `(max |k(x,y) − conj(k(y,x))|, λ_min, λ_max)`.
    pub fn gram_psd_check(&self, points: &[GroupPoint]) -> (f64, f64, f64) {
        let n = points.len();
        let gram = DMatrix::<C64>::from_fn(n, n, |i, j| self.eval(points[i], points[j]));
        let herm = linalg::max_entry_diff(&gram, &gram.adjoint());
        let vals = linalg::hermitian_eigenvalues(&gram);
        (herm, vals[0], vals[n - 1])
    }
}

/// Diagonal bounds report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BdReport {
    pub alpha: f64,
    pub beta: f64,
    pub pass: bool,
}

/// Check the bounded-diagonal condition `0 < α ≤ k(x,x) ≤ β` over the grid.
/// Non-real or negative diagonals beyond `1e-10` are a kernel error.
pub fn check_bd(kernel: &Kernel, grid: &GridRef, floor: f64) -> Result<BdReport> {
    let mut alpha = f64::INFINITY;
    let mut beta = 0.0f64;
    for &x in &grid.nodes {
        let d = kernel.eval(x, x);
        if d.im.abs() > 1e-10 || d.re < -1e-10 {
            return Err(Error::KernelInvalid(format!(
                "diagonal k(x,x) = {d} at {:?} is not a nonnegative real",
                x.coords()
            )));
        }
        alpha = alpha.min(d.re);
        beta = beta.max(d.re);
    }
    Ok(BdReport {
        alpha,
        beta,
        pass: alpha > floor,
    })
}

/// Build the displacement grid housing envelope profiles for a base grid:
/// it covers all displacements `y⁻¹x` of node pairs.
pub fn displacement_grid(grid: &GridRef, bins: [usize; 2]) -> Result<GridRef> {
    let g = &grid.group;
    let inflate = 1.001;
    let window = match g.id {
        GroupId::RealLine => {
            let [lo, hi] = grid.window.axes[0];
            let r = (hi - lo) * inflate;
            Window::line(-r, r)
        }
        GroupId::Plane => {
            let [x0, x1] = grid.window.axes[0];
            let [y0, y1] = grid.window.axes[1];
            let (rx, ry) = ((x1 - x0) * inflate, (y1 - y0) * inflate);
            Window::plane([-rx, rx], [-ry, ry])
        }
        GroupId::Affine => {
            let [b0, b1] = grid.window.axes[0];
            let [a0, a1] = grid.window.axes[1];
            let rb = (b1 - b0) / a0 * inflate;
            let ra = (a1 / a0) * inflate;
            let w = Window::affine([-rb, rb], [1.0 / ra, ra]);
            if grid.window.mirror {
                w.with_mirror()
            } else {
                w
            }
        }
    };
    make_grid(g, &window, bins)
}

/// A fitted localization envelope on a displacement grid.
#[derive(Debug, Clone)]
pub struct EnvelopeFit {
    /// `Θ(u)` = max of `|k(x,y)|` over sampled pairs with `y⁻¹x` in `u`'s bin.
    pub theta: GridFunction,
    /// Bins that received no sample (value 0, flagged).
    pub empty_bins: usize,
}

/// Fit the minimal sampled envelope witness for a kernel.
pub fn fit_envelope(kernel: &Kernel, grid: &GridRef, bins: [usize; 2]) -> Result<EnvelopeFit> {
    let kmat = kernel.matrix(grid);
    fit_envelope_precomputed(grid, &kmat, bins)
}

/// As [`fit_envelope`] but reusing an existing kernel matrix.
pub fn fit_envelope_precomputed(
    grid: &GridRef,
    kmat: &DMatrix<C64>,
    bins: [usize; 2],
) -> Result<EnvelopeFit> {
    let disp = displacement_grid(grid, bins)?;
    let theta = fit_envelope_from_matrix(&grid.group, grid, kmat, &disp)?;
    let empty = theta.values.iter().filter(|v| v.re == 0.0).count();
    Ok(EnvelopeFit {
        theta,
        empty_bins: empty,
    })
}

/// Bin `max(|M(x_i,x_j)|)` by the displacement `x_j⁻¹ x_i` onto `disp`.
pub fn fit_envelope_from_matrix(
    g: &GroupSpec,
    grid: &GridRef,
    m: &DMatrix<C64>,
    disp: &GridRef,
) -> Result<GridFunction> {
    let n = grid.len();
    let mut vals = vec![0.0f64; disp.len()];
    for i in 0..n {
        for j in 0..n {
            let u = g.displacement(grid.nodes[j], grid.nodes[i]);
            match disp.nearest_node(u) {
                Some(b) => {
                    let a = m[(i, j)].norm();
                    if a > vals[b] {
                        vals[b] = a;
                    }
                }
                None => {
                    return Err(Error::InvalidGrid(format!(
                        "displacement {:?} escapes the displacement window",
                        u.coords()
                    )))
                }
            }
        }
    }
    GridFunction::new(
        disp.clone(),
        vals.into_iter().map(|v| C64::new(v, 0.0)).collect(),
    )
}

/// Localization certificate: fitted envelope, amalgam norms, and the
/// windowed-norm growth table that decides `pass`.
#[derive(Debug, Clone)]
pub struct LocReport {
    pub fit: EnvelopeFit,
    pub amalgam: AmalgamReport,
    /// `(window fraction, ‖Θ·1_{frac·window}‖_{W_w})` for nested windows.
    pub growth: Vec<(f64, f64)>,
    /// Relative last increment of the growth table.
    pub growth_increment: f64,
    pub pass: bool,
}

/// Run the localization check: fit `Θ`, compute its weighted amalgam norms,
/// and test convergence of the windowed norm on nested sub-windows.
/// `pass` ⟺ the last doubling adds at most `growth_tol` of the total.
pub fn check_loc(
    grid: &GridRef,
    kmat: &DMatrix<C64>,
    bins: [usize; 2],
    w: &Weight,
    growth_tol: f64,
) -> Result<LocReport> {
    let fit = fit_envelope_precomputed(grid, kmat, bins)?;
    let disp = fit.theta.grid.clone();
    let lm = LocalMax::new(disp.clone(), grid.group.q_neighborhood);
    let amalgam = amalgam_norms(&fit.theta, w, &lm);

    let g = &grid.group;
    let mut growth = Vec::new();
    for frac in [0.25, 0.5, 1.0] {
        let restricted = GridFunction::new(
            disp.clone(),
            disp.nodes
                .iter()
                .zip(&fit.theta.values)
                .map(|(&p, &v)| {
                    let c = g.box_coords(p);
                    let inside = within_fraction(&disp, c, frac);
                    if inside {
                        v
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
                .collect(),
        )?;
        let n = amalgam_norms(&restricted, w, &lm).norm_two_sided;
        growth.push((frac, n));
    }
    let total = growth.last().unwrap().1;
    let prev = growth[growth.len() - 2].1;
    let increment = if total > 0.0 {
        (total - prev) / total
    } else {
        0.0
    };
    Ok(LocReport {
        fit,
        amalgam,
        growth,
        growth_increment: increment,
        pass: increment <= growth_tol,
    })
}

fn within_fraction(disp: &GridRef, c: [f64; 2], frac: f64) -> bool {
    let a0 = disp.axis(0);
    let h0 = (a0.hi - a0.lo) / 2.0 * frac;
    let m0 = (a0.hi + a0.lo) / 2.0;
    let ok0 = (c[0] - m0).abs() <= h0;
    let a1 = disp.axis(1);
    if a1.n <= 1 {
        return ok0;
    }
    let h1 = (a1.hi - a1.lo) / 2.0 * frac;
    let m1 = (a1.hi + a1.lo) / 2.0;
    ok0 && (c[1] - m1).abs() <= h1
}

/// Weak-uniform-continuity probe report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WucReport {
    /// Per offset `u` (given decreasing in size): `η̂(u) = max_y ‖k_{yu} −
    /// Γ(yu,y)·k_y‖_{L¹}` and the secondary direct ratio probe.
    pub offsets: Vec<WucSample>,
    pub monotone: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WucSample {
    pub offset_size: f64,
    pub eta_hat: f64,
    /// `η̂` with probe points restricted to the half-sized core window. A
    /// ratio `eta_hat / eta_hat_core` well above 1 witnesses an obstruction
    /// that grows with the probe radius (a phase twist): such an `η̂` cannot
    /// vanish uniformly over the whole group.
    pub eta_hat_core: f64,
    /// max over probes of ||f(x)|²−|f(y)|²| / ∫|f|²Θ'(z⁻¹y)dμ(z), `Θ' = M_QΘ`.
    pub direct_ratio: f64,
}

/// Probe weak uniform continuity along a list of offsets (ordered from the
/// largest to the smallest). `pass` ⟺ `η̂` decreases along the list within 5%
/// slack and the smallest offset satisfies `η̂ ≤ tol`.
pub fn check_wuc(
    kernel: &Kernel,
    grid: &GridRef,
    theta: &GridFunction,
    offsets: &[GroupPoint],
    probe_stride: usize,
    tol: f64,
) -> Result<WucReport> {
    if offsets.is_empty() {
        return Err(Error::Precondition("no offsets".into()));
    }
    let g = kernel.group.clone();
    let probes: Vec<GroupPoint> = grid
        .nodes
        .iter()
        .copied()
        .step_by(probe_stride.max(1))
        .collect();

    // Θ' = M_Q Θ for the direct ratio probe.
    let lm = LocalMax::new(theta.grid.clone(), g.q_neighborhood);
    let theta_p = lm.maximal_left(theta);

    // Probe functions for the direct probe: kernel slices at spread-out
    // window points, evaluated exactly through the kernel (not by node
    // lookup, which cannot resolve sub-cell offsets).
    let f_points: Vec<GroupPoint> = probes
        .iter()
        .step_by((probes.len() / 5).max(1))
        .copied()
        .collect();
    let f_slices: Vec<GridFunction> = f_points.iter().map(|&p| kernel.slice(grid, p)).collect();

    // Size of the core region (half the window, in box coordinates) for the
    // radius-growth diagnostic.
    let core = |y: GroupPoint| -> bool {
        let c = g.box_coords(y);
        within_fraction(grid, c, 0.5)
    };

    let mut samples = Vec::with_capacity(offsets.len());
    for &u in offsets {
        let results: Vec<(f64, f64, bool)> = probes
            .par_iter()
            .map(|&y| {
                let yu = g.mul(y, u);
                let gamma = kernel.phase(yu, y);
                // ‖k_{yu} − Γ(yu,y) k_y‖_{L¹(grid)}
                let mut l1 = 0.0;
                for (j, &z) in grid.nodes.iter().enumerate() {
                    let d = kernel.eval(z, yu) - gamma * kernel.eval(z, y);
                    l1 += d.norm() * grid.weights[j];
                }
                // direct ratio at (x, y) = (yu, y)
                let mut ratio = 0.0f64;
                for (p_idx, &p) in f_points.iter().enumerate() {
                    let fx = kernel.eval(yu, p).norm_sqr();
                    let fy = kernel.eval(y, p).norm_sqr();
                    let f = &f_slices[p_idx];
                    let mut denom = 0.0;
                    for (j, &z) in grid.nodes.iter().enumerate() {
                        denom += f.values[j].norm_sqr()
                            * theta_p.eval_real(g.mul(g.inv(z), y))
                            * grid.weights[j];
                    }
                    if denom > 1e-14 {
                        ratio = ratio.max((fx - fy).abs() / denom);
                    }
                }
                (l1, ratio, core(y))
            })
            .collect();
        let eta_hat = results.iter().map(|r| r.0).fold(0.0, f64::max);
        let eta_core = results
            .iter()
            .filter(|r| r.2)
            .map(|r| r.0)
            .fold(0.0, f64::max);
        let direct_ratio = results.iter().map(|r| r.1).fold(0.0, f64::max);
        samples.push(WucSample {
            offset_size: g.displacement_size(u),
            eta_hat,
            eta_hat_core: eta_core,
            direct_ratio,
        });
    }
    let monotone = samples
        .windows(2)
        .all(|w| w[1].eta_hat <= w[0].eta_hat * 1.05);
    let last = samples.last().unwrap();
    // A phase obstruction makes η̂ grow with the probe radius; the window sup
    // then underestimates the group sup arbitrarily. Cap the growth from the
    // core window to the full window at 1.6.
    let radius_stable = last.eta_hat <= 1.6 * last.eta_hat_core.max(1e-300);
    let pass = monotone && last.eta_hat <= tol && radius_stable;
    Ok(WucReport {
        offsets: samples,
        monotone,
        pass,
    })
}

/// Default shrinking offsets for a group, sizes `0.4, 0.2, 0.1, 0.05` in box
/// coordinates along the diagonal direction.
pub fn default_wuc_offsets(g: &GroupSpec) -> Vec<GroupPoint> {
    [0.4, 0.2, 0.1, 0.05]
        .iter()
        .map(|&s| match g.id {
            GroupId::RealLine => GroupPoint::line(s),
            GroupId::Plane => GroupPoint::plane(s / 2f64.sqrt(), s / 2f64.sqrt()),
            GroupId::Affine => {
                GroupPoint::affine(s / 2f64.sqrt(), (s / 2f64.sqrt()).exp())
            }
        })
        .collect()
}

/// Certification configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub bins: [usize; 2],
    pub weight: Weight,
    pub bd_floor: f64,
    pub wuc_tol: f64,
    pub loc_growth_tol: f64,
    pub wuc_probe_stride: usize,
}

impl CertifyConfig {
    pub fn default_for(grid: &GridRef) -> Self {
        CertifyConfig {
            bins: grid.resolution,
            weight: Weight::one(),
            bd_floor: 1e-8,
            wuc_tol: 0.35,
            loc_growth_tol: 0.05,
            wuc_probe_stride: (grid.len() / 60).max(1),
        }
    }
}

/// The audit record of one kernel on one window.
#[derive(Debug, Clone)]
pub struct KernelCertificate {
    pub label: String,
    pub bd: BdReport,
    pub loc: LocReport,
    pub wuc: WucReport,
    pub config: CertifyConfig,
    pub window: Window,
    pub resolution: [usize; 2],
}

impl KernelCertificate {
    pub fn pass(&self) -> bool {
        self.bd.pass && self.loc.pass && self.wuc.pass
    }

    /// The fitted envelope `Θ`.
    pub fn theta(&self) -> &GridFunction {
        &self.loc.fit.theta
    }
}

/// Run all three checks on a kernel over a grid.
pub fn certify(kernel: &Kernel, grid: &GridRef, config: &CertifyConfig) -> Result<KernelCertificate> {
    let kmat = kernel.matrix(grid);
    let bd = check_bd(kernel, grid, config.bd_floor)?;
    let loc = check_loc(grid, &kmat, config.bins, &config.weight, config.loc_growth_tol)?;
    let wuc = check_wuc(
        kernel,
        grid,
        &loc.fit.theta,
        &default_wuc_offsets(&kernel.group),
        config.wuc_probe_stride,
        config.wuc_tol,
    )?;
    Ok(KernelCertificate {
        label: kernel.label.clone(),
        bd,
        loc,
        wuc,
        config: config.clone(),
        window: grid.window.clone(),
        resolution: grid.resolution,
    })
}
