//! Outer polytope approximations of the Euclidean unit ball, Hausdorff
//! distances, and Euclidean projection onto polyhedra.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linops::{DenseMatrix, Vector};
use crate::lp::{self, Feasibility, LpProblem, LpStatus};

pub use crate::lp::Polyhedron;

/// Two normals closer than this (in max-norm) are treated as the same column.
pub const DEDUP_TOL: f64 = 1e-12;

/// Largest inequality count handled by active-subset enumeration in [`project`].
pub const PROJ_CAP: usize = 20;

const REPULSION_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeTag {
    pub k_requested: usize,
    pub seed: u64,
    pub augmented: bool,
}

/// `P = {z : aᵢᵀz ≤ 1 for every normal aᵢ}` with unit normals, so `B ⊆ P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpherePolytope {
    pub dim: usize,
    pub normals: Vec<Vec<f64>>,
    pub tag: PolytopeTag,
}

impl SpherePolytope {
    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    /// `M_P`: the normals as columns of an `m × K` matrix.
    pub fn matrix(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.dim, self.len(), |i, j| self.normals[j][i])
    }

    pub fn to_polyhedron(&self) -> Polyhedron {
        Polyhedron::ineq_only(self.matrix().transpose(), Vector::from_element(self.len(), 1.0))
            .expect("normals are finite")
    }

    /// Index of the column equal to `sign·e_axis`, if present.
    pub fn axis_column(&self, axis: usize, sign: f64) -> Option<usize> {
        let target = axis_vector(self.dim, axis, sign);
        self.normals.iter().position(|a| same_normal(a, &target))
    }

    pub fn has_all_axes(&self) -> bool {
        (0..self.dim).all(|i| self.axis_column(i, 1.0).is_some() && self.axis_column(i, -1.0).is_some())
    }
}

fn axis_vector(dim: usize, axis: usize, sign: f64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[axis] = sign;
    v
}

fn same_normal(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= DEDUP_TOL)
}

fn snap(v: f64) -> f64 {
    if v.abs() < 1e-15 {
        0.0
    } else if (v - 1.0).abs() < 1e-15 {
        1.0
    } else if (v + 1.0).abs() < 1e-15 {
        -1.0
    } else {
        v
    }
}

fn normalize(v: &mut [f64]) {
    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= r);
}

/// `K` unit normals in `R^m`: equally spaced angles `2πj/K` for `m = 2`, seeded
/// random directions spread by a fixed number of repulsion sweeps otherwise.
pub fn dudley_polytope(m: usize, k: usize, seed: u64) -> Result<SpherePolytope> {
    if m < 2 {
        return Err(Error::BadDim(format!("polytope dimension must be at least 2, got {m}")));
    }
    if k <= m {
        return Err(Error::BadDim(format!("need more normals than dimensions (K={k}, m={m})")));
    }
    let normals = if m == 2 {
        (0..k)
            .map(|j| {
                let th = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                vec![snap(th.cos()), snap(th.sin())]
            })
            .collect()
    } else {
        repulsed_directions(m, k, seed)
    };
    Ok(SpherePolytope { dim: m, normals, tag: PolytopeTag { k_requested: k, seed, augmented: false } })
}

fn repulsed_directions(m: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let mut v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            normalize(&mut v);
            v
        })
        .collect();
    // Riesz-energy gradient steps on the sphere; the step shrinks with K so
    // neighbouring points cannot overshoot each other.
    let step0 = 0.5 / (k as f64).powf(1.0 + 1.0 / (m as f64 - 1.0));
    for it in 0..REPULSION_ITERS {
        let step = step0 * (1.0 - it as f64 / REPULSION_ITERS as f64 * 0.9);
        let mut forces = vec![vec![0.0; m]; k];
        for i in 0..k {
            for j in (i + 1)..k {
                let diff: Vec<f64> = (0..m).map(|c| pts[i][c] - pts[j][c]).collect();
                let d2 = diff.iter().map(|x| x * x).sum::<f64>().max(1e-24);
                let w = 1.0 / (d2 * d2.sqrt());
                for c in 0..m {
                    forces[i][c] += w * diff[c];
                    forces[j][c] -= w * diff[c];
                }
            }
        }
        for i in 0..k {
            let radial: f64 = (0..m).map(|c| forces[i][c] * pts[i][c]).sum();
            let tangential: Vec<f64> = (0..m).map(|c| forces[i][c] - radial * pts[i][c]).collect();
            let fnorm = tangential.iter().map(|x| x * x).sum::<f64>().sqrt();
            if fnorm == 0.0 {
                continue;
            }
            // Cap the displacement at a fraction of the typical spacing.
            let scale = (step * fnorm).min(0.2 / (k as f64).powf(1.0 / (m as f64 - 1.0))) / fnorm;
            for c in 0..m {
                pts[i][c] += scale * tangential[c];
            }
            normalize(&mut pts[i]);
        }
    }
    pts
}

pub fn augment_with_axes(p: &SpherePolytope) -> SpherePolytope {
    let mut out = p.clone();
    for axis in 0..p.dim {
        for sign in [1.0, -1.0] {
            let v = axis_vector(p.dim, axis, sign);
            if !out.normals.iter().any(|a| same_normal(a, &v)) {
                out.normals.push(v);
            }
        }
    }
    out.tag.augmented = true;
    out
}

/// Union of the normal sets (first occurrence kept), i.e. the intersection of the polytopes.
pub fn nest(polytopes: &[SpherePolytope]) -> Result<SpherePolytope> {
    let first = polytopes.first().ok_or_else(|| Error::InvalidInput("nest of an empty list".into()))?;
    let dim = first.dim;
    let mut normals: Vec<Vec<f64>> = Vec::new();
    for p in polytopes {
        if p.dim != dim {
            return Err(Error::DimMismatch(format!("nest mixes dimensions {dim} and {}", p.dim)));
        }
        for a in &p.normals {
            if !normals.iter().any(|b| same_normal(a, b)) {
                normals.push(a.clone());
            }
        }
    }
    let last = polytopes.last().expect("nonempty");
    Ok(SpherePolytope {
        dim,
        normals,
        tag: PolytopeTag {
            k_requested: last.tag.k_requested,
            seed: last.tag.seed,
            augmented: polytopes.iter().any(|p| p.tag.augmented),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HausdorffValue {
    pub value: f64,
    pub exact: bool,
}

/// `δ^H(B, P) = max_{z∈P} ‖z‖₂ − 1`; exact for `m = 2`, a sampled lower bound otherwise.
pub fn hausdorff_to_ball(p: &SpherePolytope) -> Result<HausdorffValue> {
    if p.dim == 2 {
        let mut angles: Vec<f64> = p.normals.iter().map(|a| a[1].atan2(a[0])).collect();
        angles.sort_by(|a, b| a.total_cmp(b));
        let mut worst = 0.0_f64;
        for i in 0..angles.len() {
            let next = if i + 1 < angles.len() { angles[i + 1] } else { angles[0] + 2.0 * std::f64::consts::PI };
            worst = worst.max(next - angles[i]);
        }
        let value = if worst >= std::f64::consts::PI { f64::INFINITY } else { 1.0 / (worst / 2.0).cos() - 1.0 };
        return Ok(HausdorffValue { value, exact: true });
    }
    let dirs = sphere_directions(p.dim, 400 * p.dim, 0x5eed);
    let poly = p.to_polyhedron();
    let mut best = 0.0_f64;
    for u in &dirs {
        match support_point(&poly, u)? {
            Some(z) => best = best.max(z.norm() - 1.0),
            None => return Ok(HausdorffValue { value: f64::INFINITY, exact: false }),
        }
    }
    Ok(HausdorffValue { value: best, exact: false })
}

pub fn nearest_normal(p: &SpherePolytope, z: &[f64]) -> Result<(usize, f64)> {
    if z.len() != p.dim {
        return Err(Error::DimMismatch("point and polytope dimensions differ".into()));
    }
    let r = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (r - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidInput("nearest_normal expects a unit vector".into()));
    }
    let mut best = (0, f64::INFINITY);
    for (i, a) in p.normals.iter().enumerate() {
        let d = a.iter().zip(z).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

/// Quasi-uniform unit directions: a Halton sequence pushed through the inverse
/// normal CDF, normalized, then rotated by a seeded random orthogonal matrix.
pub fn sphere_directions(m: usize, count: usize, seed: u64) -> Vec<Vector> {
    const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss: DenseMatrix = DMatrix::from_fn(m, m, |_, _| StandardNormal.sample(&mut rng));
    let rot = gauss.qr().q();
    let halton = |mut i: u64, base: u64| {
        let (mut f, mut r) = (1.0, 0.0);
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    };
    (1..=count as u64)
        .map(|i| {
            let raw: Vector = DVector::from_fn(m, |c, _| {
                let base = PRIMES[c % PRIMES.len()];
                normal.inverse_cdf(halton(i, base).clamp(1e-12, 1.0 - 1e-12))
            });
            let v: Vector = &rot * raw;
            let r = v.norm();
            v / r
        })
        .collect()
}

/// Maximizer of `uᵀz` over `F`; `None` when unbounded.
pub fn support_point(f: &Polyhedron, u: &Vector) -> Result<Option<Vector>> {
    let p = LpProblem::new(-u.clone()).with_ineq(f.g.clone(), f.h.clone()).with_eq(f.e.clone(), f.f.clone());
    let s = lp::solve(&p)?;
    match s.status {
        LpStatus::Optimal => Ok(Some(s.primal)),
        LpStatus::Unbounded => Ok(None),
        LpStatus::Infeasible => Err(Error::EmptyPolyhedron),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vector,
    pub dist: f64,
    pub exact: bool,
}

/// Keeps a maximal linearly independent subset of the rows of `e` (Gram–Schmidt).
fn independent_rows(e: &DenseMatrix, tol: f64) -> Vec<usize> {
    let mut basis: Vec<Vector> = Vec::new();
    let mut keep = Vec::new();
    for i in 0..e.nrows() {
        let mut r: Vector = e.row(i).transpose();
        let scale = r.norm();
        if scale == 0.0 {
            continue;
        }
        for b in &basis {
            let c = b.dot(&r);
            r -= b * c;
        }
        let nr = r.norm();
        if nr > tol * scale {
            basis.push(r / nr);
            keep.push(i);
        }
    }
    keep
}

/// Projection of `x` onto `{z : Cz = d}`; `None` if `C` is rank deficient.
/// Returns the point and the multipliers `ν` with `z = x − Cᵀν`.
fn affine_projection(x: &Vector, c: &DenseMatrix, d: &Vector) -> Option<(Vector, Vector)> {
    if c.nrows() == 0 {
        return Some((x.clone(), Vector::zeros(0)));
    }
    let gram = c * c.transpose();
    let chol = gram.clone().cholesky()?;
    let diag_max = gram.diagonal().amax();
    let l = chol.l();
    let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |a, v| a.min(v * v));
    if min_pivot < 1e-12 * diag_max.max(1e-300) {
        return None;
    }
    let nu = chol.solve(&(c * x - d));
    let z = x - c.transpose() * &nu;
    Some((z, nu))
}

fn stack_rows(e: &DenseMatrix, erows: &[usize], g: &DenseMatrix, grows: &[usize]) -> DenseMatrix {
    let n = e.ncols();
    let mut c = DenseMatrix::zeros(erows.len() + grows.len(), n);
    for (k, &i) in erows.iter().enumerate() {
        c.set_row(k, &e.row(i));
    }
    for (k, &i) in grows.iter().enumerate() {
        c.set_row(erows.len() + k, &g.row(i));
    }
    c
}

fn stack_rhs(f: &Vector, erows: &[usize], h: &Vector, grows: &[usize]) -> Vector {
    Vector::from_iterator(erows.len() + grows.len(), erows.iter().map(|&i| f[i]).chain(grows.iter().map(|&i| h[i])))
}

const KKT_TOL: f64 = 1e-9;

fn enumerate_active_sets(x: &Vector, f: &Polyhedron, erows: &[usize]) -> Option<Vector> {
    let p = f.g.nrows();
    let scale = 1.0 + x.amax();
    for size in 0..=p.min(f.dim()) {
        for w in crate::certify::combinations(p, size) {
            let c = stack_rows(&f.e, erows, &f.g, &w);
            let d = stack_rhs(&f.f, erows, &f.h, &w);
            let Some((z, nu)) = affine_projection(x, &c, &d) else { continue };
            let mult_ok = nu.iter().skip(erows.len()).all(|&v| v >= -KKT_TOL * scale);
            if !mult_ok {
                continue;
            }
            let gz = &f.g * &z - &f.h;
            if gz.iter().all(|&v| v <= KKT_TOL * scale) {
                return Some(z);
            }
        }
    }
    None
}

/// Primal active-set method for `min ½‖z − x‖²` over `F`, started from a feasible point.
fn active_set_qp(x: &Vector, f: &Polyhedron, erows: &[usize], start: Vector) -> Option<Vector> {
    let p = f.g.nrows();
    let scale = 1.0 + x.amax() + start.amax();
    let mut z = start;
    let mut work: Vec<usize> = Vec::new();
    let gz0 = &f.g * &z - &f.h;
    for i in 0..p {
        if gz0[i].abs() <= 1e-10 * scale {
            let mut trial = work.clone();
            trial.push(i);
            let c = stack_rows(&f.e, erows, &f.g, &trial);
            if independent_rows(&c, 1e-10).len() == c.nrows() {
                work = trial;
            }
        }
    }
    for _ in 0..(50 * (p + f.dim() + 1)) {
        let c = stack_rows(&f.e, erows, &f.g, &work);
        let d = stack_rhs(&f.f, erows, &f.h, &work);
        let (target, nu) = affine_projection(x, &c, &d)?;
        let step = &target - &z;
        if step.norm() <= 1e-13 * scale {
            let mults = &nu.as_slice()[erows.len()..];
            let (worst, val) = mults.iter().enumerate().fold((None, -KKT_TOL * scale), |acc, (k, &v)| if v < acc.1 { (Some(k), v) } else { acc });
            let _ = val;
            match worst {
                None => return Some(target),
                Some(k) => {
                    work.remove(k);
                }
            }
            continue;
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        let gz = &f.g * &z - &f.h;
        let gs = &f.g * &step;
        for i in 0..p {
            if work.contains(&i) || gs[i] <= 1e-14 * scale {
                continue;
            }
            let lim = (-gz[i]).max(0.0) / gs[i];
            if lim < alpha {
                alpha = lim;
                blocking = Some(i);
            }
        }
        z += step * alpha;
        if let Some(i) = blocking {
            work.push(i);
        }
    }
    None
}

/// Dykstra's alternating projections over the single-row constraint sets; approximate.
pub fn dykstra_project(x: &Vector, f: &Polyhedron, tol: f64, max_sweeps: usize) -> Vector {
    let n = x.len();
    let rows = f.g.nrows();
    let sets = rows + usize::from(f.e.nrows() > 0);
    let mut incr = vec![Vector::zeros(n); sets];
    let mut z = x.clone();
    let erows = independent_rows(&f.e, 1e-10);
    let ec = stack_rows(&f.e, &erows, &f.g, &[]);
    let ed = stack_rhs(&f.f, &erows, &f.h, &[]);
    for _ in 0..max_sweeps {
        let prev = z.clone();
        for s in 0..sets {
            let y = &z + &incr[s];
            let proj = if s < rows {
                let a = f.g.row(s).transpose();
                let viol = a.dot(&y) - f.h[s];
                let nn = a.norm_squared();
                if viol > 0.0 && nn > 0.0 {
                    &y - a * (viol / nn)
                } else {
                    y.clone()
                }
            } else {
                affine_projection(&y, &ec, &ed).map(|(p, _)| p).unwrap_or_else(|| y.clone())
            };
            incr[s] = &y - &proj;
            z = proj;
        }
        if (&z - &prev).norm() <= tol {
            break;
        }
    }
    z
}

/// Euclidean projection of `x` onto `F`.
///
/// With at most [`PROJ_CAP`] inequality rows, active subsets are enumerated by
/// increasing size and the first one whose equality-constrained solution is
/// feasible with nonnegative multipliers is returned. Larger systems go through a
/// primal active-set QP; Dykstra's method is the last resort and is flagged inexact.
pub fn project(x: &Vector, f: &Polyhedron) -> Result<Projection> {
    f.validate()?;
    if x.len() != f.dim() {
        return Err(Error::DimMismatch("point and polyhedron dimensions differ".into()));
    }
    let start = match lp::check_feasibility(f)? {
        Feasibility::Feasible(z) => z,
        Feasibility::Infeasible(_) => return Err(Error::EmptyPolyhedron),
    };
    let erows = independent_rows(&f.e, 1e-10);
    if f.max_violation(x) == 0.0 {
        return Ok(Projection { point: x.clone(), dist: 0.0, exact: true });
    }
    let exact = if f.g.nrows() <= PROJ_CAP { enumerate_active_sets(x, f, &erows) } else { None };
    let exact = exact.or_else(|| active_set_qp(x, f, &erows, start));
    let (point, exact) = match exact {
        Some(z) => (z, true),
        None => (dykstra_project(x, f, 1e-10, 100_000), false),
    };
    let dist = (&point - x).norm();
    Ok(Projection { point, dist, exact })
}

/// Lower-bound estimate of `δ^H(F1, F2)` from support functions in sampled
/// directions. With `f1_in_f2`, sampled extreme points of `F2` are also
/// projected onto `F1` and their distances included.
pub fn hausdorff_estimate(f1: &Polyhedron, f2: &Polyhedron, directions: usize, seed: u64, f1_in_f2: bool) -> Result<f64> {
    if f1.dim() != f2.dim() {
        return Err(Error::DimMismatch("Hausdorff estimate between different dimensions".into()));
    }
    let mut best = 0.0_f64;
    for u in sphere_directions(f1.dim(), directions, seed) {
        let z1 = support_point(f1, &u)?.ok_or(Error::Unbounded)?;
        let z2 = support_point(f2, &u)?.ok_or(Error::Unbounded)?;
        let gap = (u.dot(&z1) - u.dot(&z2)).abs();
        best = best.max(gap);
        if f1_in_f2 {
            best = best.max(project(&z2, f1)?.dist);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn square_polytope() {
        let p = dudley_polytope(2, 4, 0).unwrap();
        assert_eq!(p.normals, vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]]);
        let h = hausdorff_to_ball(&p).unwrap();
        assert!(h.exact && (h.value - (SQRT_2 - 1.0)).abs() < 1e-12);
        assert_eq!(augment_with_axes(&p).len(), 4);
    }

    #[test]
    fn generator_rejects_bad_dims() {
        assert!(matches!(dudley_polytope(1, 4, 0), Err(Error::BadDim(_))));
        assert!(matches!(dudley_polytope(3, 3, 0), Err(Error::BadDim(_))));
    }

    #[test]
    fn three_dim_generator() {
        let p = dudley_polytope(3, 6, 42).unwrap();
        assert_eq!(p.len(), 6);
        for a in &p.normals {
            assert!((a.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
        }
        for i in 0..6 {
            for j in (i + 1)..6 {
                let dot: f64 = (0..3).map(|c| p.normals[i][c] * p.normals[j][c]).sum();
                assert!(dot < 1.0 - 1e-6);
            }
        }
        assert_eq!(p, dudley_polytope(3, 6, 42).unwrap());
    }

    #[test]
    fn triangle_augmentation() {
        let mk = |t: f64| vec![snap(t.cos()), snap(t.sin())];
        let tri = SpherePolytope {
            dim: 2,
            normals: vec![mk(PI / 6.0), mk(5.0 * PI / 6.0), mk(1.5 * PI)],
            tag: PolytopeTag { k_requested: 3, seed: 0, augmented: false },
        };
        let aug = augment_with_axes(&tri);
        // (0,−1) is already a normal, so three axis normals are added.
        assert_eq!(aug.len(), 6);
        assert!(aug.has_all_axes());
        assert_eq!(augment_with_axes(&aug).normals, aug.normals);
    }

    #[test]
    fn nesting() {
        let p5 = dudley_polytope(2, 5, 0).unwrap();
        let p8 = dudley_polytope(2, 8, 0).unwrap();
        assert_eq!(nest(std::slice::from_ref(&p5)).unwrap().normals, p5.normals);
        let both = nest(&[p5.clone(), p8.clone()]).unwrap();
        let h = hausdorff_to_ball(&both).unwrap().value;
        assert!(h <= hausdorff_to_ball(&p5).unwrap().value.min(hausdorff_to_ball(&p8).unwrap().value));
        let p3 = dudley_polytope(3, 6, 0).unwrap();
        assert!(matches!(nest(&[p5, p3]), Err(Error::DimMismatch(_))));
    }

    #[test]
    fn nearest_normal_examples() {
        let sq = dudley_polytope(2, 4, 0).unwrap();
        assert_eq!(nearest_normal(&sq, &[1.0, 0.0]).unwrap(), (0, 0.0));
        let (_, d) = nearest_normal(&sq, &[FRAC_PI_4.cos(), FRAC_PI_4.sin()]).unwrap();
        assert!((d - 2.0 * (PI / 8.0).sin()).abs() < 1e-12);
    }

    #[test]
    fn hausdorff_rate_m2() {
        let ks = [8usize, 16, 32, 64];
        let vals: Vec<f64> = ks
            .iter()
            .map(|&k| {
                let h = hausdorff_to_ball(&dudley_polytope(2, k, 0).unwrap()).unwrap().value;
                assert!((h - (1.0 / (PI / k as f64).cos() - 1.0)).abs() < 1e-12);
                h
            })
            .collect();
        let slope = (vals[3].ln() - vals[0].ln()) / ((64f64).ln() - (8f64).ln());
        assert!((slope + 2.0).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn hausdorff_estimate_m3_is_positive_lower_bound() {
        let p = dudley_polytope(3, 12, 3).unwrap();
        let h = hausdorff_to_ball(&p).unwrap();
        assert!(!h.exact && h.value > 0.0 && h.value.is_finite());
    }

    #[test]
    fn projection_examples() {
        let half = Polyhedron::ineq_only(DenseMatrix::from_row_slice(1, 2, &[1.0, 0.0]), v(&[1.0])).unwrap();
        let p = project(&v(&[2.0, 0.0]), &half).unwrap();
        assert!((p.point - v(&[1.0, 0.0])).norm() < 1e-12 && (p.dist - 1.0).abs() < 1e-12 && p.exact);
        let plane = Polyhedron::eq_only(DenseMatrix::from_row_slice(1, 2, &[1.0, 1.0]), v(&[0.0])).unwrap();
        let p = project(&v(&[1.0, 1.0]), &plane).unwrap();
        assert!(p.point.norm() < 1e-12 && (p.dist - SQRT_2).abs() < 1e-12);
        let p = project(&v(&[0.5, -3.0]), &half).unwrap();
        assert_eq!(p.dist, 0.0);
        let empty = Polyhedron::ineq_only(DenseMatrix::from_row_slice(2, 1, &[1.0, -1.0]), v(&[-1.0, -1.0])).unwrap();
        assert_eq!(project(&v(&[0.0]), &empty).unwrap_err(), Error::EmptyPolyhedron);
    }

    fn square(side: f64) -> Polyhedron {
        Polyhedron::ineq_only(
            DenseMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]),
            v(&[side, side, 0.0, 0.0]),
        )
        .unwrap()
    }

    #[test]
    fn hausdorff_estimate_examples() {
        let s1 = square(1.0);
        assert_eq!(hausdorff_estimate(&s1, &s1, 64, 1, true).unwrap(), 0.0);
        let est = hausdorff_estimate(&s1, &square(2.0), 64, 1, true).unwrap();
        assert!((est - SQRT_2).abs() < 1e-9, "{est}");
        let halfline = Polyhedron::ineq_only(DenseMatrix::from_row_slice(1, 2, &[1.0, 0.0]), v(&[0.0])).unwrap();
        assert_eq!(hausdorff_estimate(&s1, &halfline, 16, 1, false).unwrap_err(), Error::Unbounded);
    }

    #[test]
    fn large_systems_use_active_set_and_match_dykstra() {
        let p = dudley_polytope(2, 40, 0).unwrap().to_polyhedron();
        let x = v(&[1.7, -0.9]);
        let pr = project(&x, &p).unwrap();
        assert!(pr.exact);
        let dk = dykstra_project(&x, &p, 1e-13, 200_000);
        assert!((pr.point - dk).norm() < 1e-6);
    }

    proptest! {
        #[test]
        fn containment_on_the_sphere(k in 5usize..40, m in 2usize..5, seed in 0u64..1000, dirs in prop::collection::vec(-1.0f64..1.0, 5 * 50)) {
            let p = dudley_polytope(m, k.max(m + 1), seed).unwrap();
            for chunk in dirs.chunks(5).take(50) {
                let mut z: Vec<f64> = chunk[..m].to_vec();
                let r = z.iter().map(|x| x * x).sum::<f64>().sqrt();
                prop_assume!(r > 1e-6);
                z.iter_mut().for_each(|x| *x /= r);
                let worst = p.normals.iter().map(|a| a.iter().zip(&z).map(|(x, y)| x * y).sum::<f64>()).fold(f64::MIN, f64::max);
                prop_assert!(worst <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn m2_vertex_formula(k in 3usize..200) {
            let h = hausdorff_to_ball(&dudley_polytope(2, k, 0).unwrap()).unwrap();
            prop_assert!((h.value - (1.0 / (PI / k as f64).cos() - 1.0)).abs() < 1e-12);
        }

        #[test]
        fn projection_nonexpansive(a in prop::collection::vec(-3.0f64..3.0, 2), b in prop::collection::vec(-3.0f64..3.0, 2), k in 3usize..12) {
            let f = dudley_polytope(2, k, 0).unwrap().to_polyhedron();
            let pa = project(&v(&a), &f).unwrap();
            let pb = project(&v(&b), &f).unwrap();
            prop_assert!((&pa.point - &pb.point).norm() <= (v(&a) - v(&b)).norm() + 1e-9);
        }

        #[test]
        fn nested_polytope_projections_stay_close(x in prop::collection::vec(-3.0f64..3.0, 2), k in 3usize..10) {
            // S′ = P_{2K} ⊆ S″ = P_K, and δ^H(S′, S″) ≤ δ^H(B, P_K).
            let fine = dudley_polytope(2, 2 * k, 0).unwrap();
            let coarse = dudley_polytope(2, k, 0).unwrap();
            let delta = hausdorff_to_ball(&coarse).unwrap().value;
            let xv = v(&x);
            let p1 = project(&xv, &fine.to_polyhedron()).unwrap();
            let p2 = project(&xv, &coarse.to_polyhedron()).unwrap();
            let lhs = (&p1.point - &p2.point).norm_squared();
            prop_assert!(lhs <= delta * (p1.dist + p2.dist) + 1e-6);
        }
    }
}
