//! Classical composition baselines: copy-paste and Poisson image editing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonize::{place, CompositionTask};
use crate::imagecore::{ImageGrid, RegionMask};
use crate::par::{self, Execution};

/// Target with the GSD-rescaled source written over the pasted footprint.
pub fn copy_paste(task: &CompositionTask) -> Result<ImageGrid> {
    Ok(place(task)?.composite)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoissonSolver {
    Jacobi,
    GaussSeidel,
    #[default]
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoissonConfig {
    pub max_iterations: usize,
    /// Stop once the L-infinity residual is at or below this.
    pub tolerance: f64,
    pub solver: PoissonSolver,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-6,
            solver: PoissonSolver::ConjugateGradient,
        }
    }
}

impl PoissonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Config(format!("poisson tolerance {} must be > 0", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("poisson max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Unclamped solver output.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub image: ImageGrid,
    /// Largest final residual over channels.
    pub residual: f64,
    /// Largest iteration count over channels.
    pub iterations: usize,
}

/// Sparse 5-point system over the pixels of `omega`.
struct System {
    /// Unknown indices of each unknown's in-region neighbours.
    neighbors: Vec<Vec<usize>>,
    /// In-grid neighbour count per unknown.
    degree: Vec<f64>,
    pixels: Vec<usize>,
}

impl System {
    fn build(omega: &RegionMask) -> Result<Self> {
        let (w, h) = (omega.width(), omega.height());
        let mut index = vec![usize::MAX; w * h];
        let mut pixels = Vec::new();
        for (p, &m) in omega.bits().iter().enumerate() {
            if m {
                index[p] = pixels.len();
                pixels.push(p);
            }
        }
        let mut neighbors = Vec::with_capacity(pixels.len());
        let mut degree = Vec::with_capacity(pixels.len());
        let mut anchored = vec![false; pixels.len()];
        for (i, &p) in pixels.iter().enumerate() {
            let mut nb = Vec::with_capacity(4);
            let mut deg = 0.0;
            for q in grid_neighbors(p, w, h) {
                deg += 1.0;
                if index[q] == usize::MAX {
                    anchored[i] = true;
                } else {
                    nb.push(index[q]);
                }
            }
            neighbors.push(nb);
            degree.push(deg);
        }
        // every connected piece of omega needs a fixed neighbour
        let mut reached = anchored.clone();
        let mut stack: Vec<usize> = (0..pixels.len()).filter(|&i| anchored[i]).collect();
        while let Some(i) = stack.pop() {
            for &j in &neighbors[i] {
                if !reached[j] {
                    reached[j] = true;
                    stack.push(j);
                }
            }
        }
        if reached.iter().any(|r| !r) {
            return Err(Error::Placement(
                "pasted region has a part with no target boundary; poisson blending needs one".into(),
            ));
        }
        Ok(Self {
            neighbors,
            degree,
            pixels,
        })
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = self.degree[i] * x[i] - self.neighbors[i].iter().map(|&j| x[j]).sum::<f64>();
        }
    }

    fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; x.len()];
        self.apply(x, &mut ax);
        ax.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn grid_neighbors(p: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (p % w, p / w);
    [
        (x > 0).then(|| p - 1),
        (x + 1 < w).then(|| p + 1),
        (y > 0).then(|| p - w),
        (y + 1 < h).then(|| p + w),
    ]
    .into_iter()
    .flatten()
}

fn solve_channel(
    sys: &System,
    target: &[f64],
    guide: &[f64],
    omega: &RegionMask,
    cfg: &PoissonConfig,
) -> Result<(Vec<f64>, f64, usize)> {
    let (w, h) = (omega.width(), omega.height());
    let n = sys.pixels.len();
    let mut b = vec![0.0; n];
    for (i, &p) in sys.pixels.iter().enumerate() {
        for q in grid_neighbors(p, w, h) {
            b[i] += guide[p] - guide[q];
            if !omega.bits()[q] {
                b[i] += target[q];
            }
        }
    }
    let mut x: Vec<f64> = sys.pixels.iter().map(|&p| target[p]).collect();
    let tol = cfg.tolerance;
    let mut res = sys.residual(&x, &b);
    let mut it = 0;
    match cfg.solver {
        PoissonSolver::Jacobi => {
            let mut next = x.clone();
            while res > tol && it < cfg.max_iterations {
                for i in 0..n {
                    next[i] = (b[i] + sys.neighbors[i].iter().map(|&j| x[j]).sum::<f64>()) / sys.degree[i];
                }
                std::mem::swap(&mut x, &mut next);
                it += 1;
                res = sys.residual(&x, &b);
            }
        }
        PoissonSolver::GaussSeidel => {
            while res > tol && it < cfg.max_iterations {
                for i in 0..n {
                    x[i] = (b[i] + sys.neighbors[i].iter().map(|&j| x[j]).sum::<f64>()) / sys.degree[i];
                }
                it += 1;
                res = sys.residual(&x, &b);
            }
        }
        PoissonSolver::ConjugateGradient => {
            let mut ax = vec![0.0; n];
            sys.apply(&x, &mut ax);
            let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let mut d = r.clone();
            let mut rr: f64 = r.iter().map(|v| v * v).sum();
            let mut ad = vec![0.0; n];
            while res > tol && it < cfg.max_iterations {
                sys.apply(&d, &mut ad);
                let dad: f64 = d.iter().zip(&ad).map(|(a, b)| a * b).sum();
                if dad <= 0.0 {
                    break;
                }
                let alpha = rr / dad;
                for i in 0..n {
                    x[i] += alpha * d[i];
                    r[i] -= alpha * ad[i];
                }
                let rr_next: f64 = r.iter().map(|v| v * v).sum();
                let beta = rr_next / rr;
                rr = rr_next;
                for i in 0..n {
                    d[i] = r[i] + beta * d[i];
                }
                it += 1;
                res = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            }
            // the recursive residual drifts; confirm against the system
            res = sys.residual(&x, &b);
        }
    }
    if res > tol {
        return Err(Error::Convergence {
            iterations: it,
            residual: res,
        });
    }
    let mut out = target.to_vec();
    for (i, &p) in sys.pixels.iter().enumerate() {
        out[p] = x[i];
    }
    Ok((out, res, it))
}

/// Solves the Poisson equation over the pasted region without clamping.
///
/// Guidance comes from the placed source, replicated outward past its border;
/// target pixels next to the region are the fixed boundary values, and
/// neighbours that fall off the grid are dropped from the stencil.
pub fn poisson_solve(task: &CompositionTask, cfg: &PoissonConfig, exec: Execution) -> Result<PoissonSolution> {
    cfg.validate()?;
    let placement = place(task)?;
    let target = &task.target;
    let omega = &placement.omega;
    if omega.is_empty() {
        return Ok(PoissonSolution {
            image: target.clone(),
            residual: 0.0,
            iterations: 0,
        });
    }
    let guide = placement.source_extended(target.width(), target.height())?;
    let sys = System::build(omega)?;
    let channels = par::map_range(target.channels(), exec, |c| {
        solve_channel(&sys, target.plane(c), guide.plane(c), omega, cfg)
    });
    let mut data = Vec::with_capacity(target.data().len());
    let mut residual = 0.0f64;
    let mut iterations = 0;
    for ch in channels {
        let (plane, r, it) = ch?;
        data.extend(plane);
        residual = residual.max(r);
        iterations = iterations.max(it);
    }
    Ok(PoissonSolution {
        image: ImageGrid::new(target.width(), target.height(), target.channels(), data)?,
        residual,
        iterations,
    })
}

/// Poisson image editing with the result clamped to `[0, 1]`.
pub fn poisson_blend(task: &CompositionTask, cfg: &PoissonConfig) -> Result<ImageGrid> {
    poisson_blend_with(task, cfg, Execution::default())
}

pub fn poisson_blend_with(task: &CompositionTask, cfg: &PoissonConfig, exec: Execution) -> Result<ImageGrid> {
    let sol = poisson_solve(task, cfg, exec)?;
    log::debug!("poisson solve: {} iterations, residual {:e}", sol.iterations, sol.residual);
    Ok(sol.image.clamped())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn textured(w: usize, h: usize, ch: usize, seed: usize) -> ImageGrid {
        ImageGrid::from_fn(w, h, ch, |x, y, c| {
            0.2 + 0.6 * (((x * 7 + y * 13 + c * 5 + seed * 11) % 17) as f64 / 17.0)
        })
        .unwrap()
    }

    #[test]
    fn copy_paste_counts() {
        let target = ImageGrid::filled(8, 8, 3, 1.0).unwrap();
        let source = ImageGrid::filled(4, 4, 3, 0.0).unwrap();
        let out = copy_paste(&CompositionTask::new(source, target, (0, 0), 1.0, 1.0)).unwrap();
        let black = out.plane(0).iter().filter(|v| **v == 0.0).count();
        assert_eq!((black, 64 - black), (16, 48));
    }

    #[test]
    fn self_paste_and_empty_mask_return_target() {
        let target = textured(12, 10, 3, 1);
        let crop = target.crop(3, 2, 5, 4).unwrap();
        let task = CompositionTask::new(crop.clone(), target.clone(), (3, 2), 1.0, 1.0);
        assert_eq!(copy_paste(&task).unwrap(), target);
        let empty = CompositionTask::new(crop, target.clone(), (3, 2), 1.0, 1.0).with_mask(RegionMask::empty(5, 4));
        assert_eq!(copy_paste(&empty).unwrap(), target);
        let blended = poisson_blend(&empty, &PoissonConfig::default()).unwrap();
        assert_eq!(blended, target);
    }

    #[test]
    fn out_of_bounds_is_a_placement_error() {
        let target = ImageGrid::filled(8, 8, 1, 1.0).unwrap();
        let source = ImageGrid::filled(4, 4, 1, 0.0).unwrap();
        let task = CompositionTask::new(source, target, (5, 0), 1.0, 1.0);
        assert!(matches!(copy_paste(&task), Err(Error::Placement(_))));
    }

    #[test]
    fn constant_source_on_constant_target_relaxes_to_target() {
        let target = ImageGrid::filled(12, 12, 3, 0.3).unwrap();
        let source = ImageGrid::filled(6, 6, 3, 0.9).unwrap();
        for solver in [PoissonSolver::Jacobi, PoissonSolver::GaussSeidel, PoissonSolver::ConjugateGradient] {
            let cfg = PoissonConfig {
                solver,
                ..Default::default()
            };
            let out = poisson_blend(&CompositionTask::new(source.clone(), target.clone(), (3, 3), 1.0, 1.0), &cfg).unwrap();
            assert!(out.max_abs_diff(&target) < 1e-5, "{solver:?}");
        }
    }

    #[test]
    fn source_equal_to_target_is_a_fixed_point() {
        // the mask leaves source pixels around the region, so guidance
        // across the boundary is the target's own gradient
        let target = textured(14, 12, 3, 2);
        let task = CompositionTask::new(target.clone(), target.clone(), (0, 0), 1.0, 1.0)
            .with_mask(RegionMask::rect(14, 12, 4, 3, 6, 5));
        let out = poisson_blend(&task, &PoissonConfig::default()).unwrap();
        assert!(out.max_abs_diff(&target) < 1e-5);
    }

    /// Dense solve of the same 5-point system, built independently.
    fn dense_oracle(target: &[f64], guide: &[f64], omega: &RegionMask) -> Vec<f64> {
        let (w, h) = (omega.width(), omega.height());
        let cells: Vec<(usize, usize)> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| omega.get(x, y))
            .collect();
        let n = cells.len();
        let pos = |x: usize, y: usize| cells.iter().position(|&c| c == (x, y));
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for (i, &(x, y)) in cells.iter().enumerate() {
            let offsets: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
            for (dx, dy) in offsets {
                let (qx, qy) = (x as isize + dx, y as isize + dy);
                if qx < 0 || qy < 0 || qx >= w as isize || qy >= h as isize {
                    continue;
                }
                let (qx, qy) = (qx as usize, qy as usize);
                a[(i, i)] += 1.0;
                b[i] += guide[y * w + x] - guide[qy * w + qx];
                match pos(qx, qy) {
                    Some(j) => a[(i, j)] -= 1.0,
                    None => b[i] += target[qy * w + qx],
                }
            }
        }
        let sol = a.lu().solve(&b).unwrap();
        let mut out = target.to_vec();
        for (i, &(x, y)) in cells.iter().enumerate() {
            out[y * w + x] = sol[i];
        }
        out
    }

    #[test]
    fn one_dimensional_ramp_matches_dense_solve() {
        let target = ImageGrid::filled(10, 1, 1, 0.5).unwrap();
        let source = ImageGrid::from_fn(4, 1, 1, |x, _, _| 0.2 + 0.1 * x as f64).unwrap();
        let task = CompositionTask::new(source, target.clone(), (3, 0), 1.0, 1.0);
        let sol = poisson_solve(
            &task,
            &PoissonConfig {
                tolerance: 1e-12,
                ..Default::default()
            },
            Execution::Sequential,
        )
        .unwrap();
        let placement = place(&task).unwrap();
        let guide = placement.source_extended(10, 1).unwrap();
        let want = dense_oracle(target.plane(0), guide.plane(0), &placement.omega);
        for (g, w) in sol.image.plane(0).iter().zip(&want) {
            assert!((g - w).abs() < 1e-10);
        }
        // the interior rises with the source ramp, pinned to 0.5 at both ends
        let row = sol.image.plane(0);
        assert!(row[3..7].windows(2).all(|p| p[1] > p[0]));
        assert!((row[3] + row[6] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn region_without_boundary_is_rejected() {
        let target = ImageGrid::filled(4, 4, 1, 0.5).unwrap();
        let source = ImageGrid::filled(4, 4, 1, 0.1).unwrap();
        let task = CompositionTask::new(source, target, (0, 0), 1.0, 1.0);
        assert!(matches!(
            poisson_blend(&task, &PoissonConfig::default()),
            Err(Error::Placement(_))
        ));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let target = textured(30, 30, 1, 3);
        let source = textured(20, 20, 1, 7);
        let cfg = PoissonConfig {
            max_iterations: 2,
            tolerance: 1e-12,
            solver: PoissonSolver::Jacobi,
        };
        match poisson_blend(&CompositionTask::new(source, target, (5, 5), 1.0, 1.0), &cfg) {
            Err(Error::Convergence { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-12);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config() {
        assert!(PoissonConfig {
            tolerance: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(PoissonConfig {
            max_iterations: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    fn laplacian_gap_inside(out: &ImageGrid, guide: &ImageGrid, omega: &RegionMask) -> f64 {
        let (w, h) = (omega.width(), omega.height());
        let mut worst = 0.0f64;
        for y in 0..h {
            for x in 0..w {
                if !omega.get(x, y) {
                    continue;
                }
                let p = y * w + x;
                let mut lf = 0.0;
                let mut lg = 0.0;
                for q in grid_neighbors(p, w, h) {
                    lf += out.plane(0)[p] - out.plane(0)[q];
                    lg += guide.plane(0)[p] - guide.plane(0)[q];
                }
                worst = worst.max((lf - lg).abs());
            }
        }
        worst
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn residual_and_maximum_principle(
            seed in 0usize..50,
            (sw, sh) in (2usize..8, 2usize..8),
            (ox, oy) in (1usize..4, 1usize..4),
            level in 0.0f64..1.0,
        ) {
            let target = textured(14, 14, 1, seed);
            let source = textured(sw, sh, 1, seed + 1);
            let cfg = PoissonConfig { tolerance: 1e-9, ..Default::default() };
            let task = CompositionTask::new(source, target.clone(), (ox, oy), 1.0, 1.0);
            let sol = poisson_solve(&task, &cfg, Execution::Sequential).unwrap();
            let placement = place(&task).unwrap();
            let guide = placement.source_extended(14, 14).unwrap();
            prop_assert!(laplacian_gap_inside(&sol.image, &guide, &placement.omega) <= 1e-9);

            let flat = ImageGrid::filled(sw, sh, 1, level).unwrap();
            let task = CompositionTask::new(flat, target.clone(), (ox, oy), 1.0, 1.0);
            let sol = poisson_solve(&task, &cfg, Execution::Sequential).unwrap();
            let omega = &place(&task).unwrap().omega;
            let ring = crate::imagecore::dilate(omega, 1).difference(omega).unwrap();
            let bvals: Vec<f64> = (0..196).filter(|&p| ring.bits()[p]).map(|p| target.plane(0)[p]).collect();
            let (lo, hi) = bvals.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
            for p in 0..196 {
                if omega.bits()[p] {
                    let v = sol.image.plane(0)[p];
                    prop_assert!(v >= lo - 1e-8 && v <= hi + 1e-8);
                }
            }
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let target = textured(24, 20, 3, 4);
        let source = textured(10, 9, 3, 5);
        let task = CompositionTask::new(source, target, (6, 5), 1.0, 1.0);
        let cfg = PoissonConfig::default();
        let a = poisson_blend_with(&task, &cfg, Execution::Sequential).unwrap();
        let b = poisson_blend_with(&task, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
