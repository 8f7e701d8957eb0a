//! Finite-dimensional linear algebra of the lifted dynamics at chosen
//! reference configurations: determinants, submersion ranks, fixed points.
//!
//! Jacobians are computed twice: exactly by forward-mode dual numbers
//! (the chain rule through the one-step maps) and by central differences.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dual::{Dual, Scalar};
use crate::error::{invalid, Result};
use crate::torus::{torus_dist, PhasePair, ShearPair, TorusPoint};

pub const RANK_TOL: f64 = 1e-8;
/// Base central-difference step; scaled by K^(-3/2) and Richardson-extrapolated.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub rows: usize,
    pub cols: usize,
    pub singular_values: Vec<f64>,
    pub rank_at_tol: usize,
    pub tol: f64,
    /// row-major exact Jacobian
    pub matrix: Vec<Vec<f64>>,
    /// max |fd − exact| / max(|exact|, 1) over entries
    pub fd_max_rel_diff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetReport {
    pub value: f64,
    pub expected: f64,
    pub rel_error: f64,
    pub fd_value: f64,
    pub fd_rel_error: f64,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn rank_at(sv: &[f64], tol: f64) -> usize {
    let top = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|&&s| s > tol * top).count()
}

/// Scales rows, then columns, to unit Euclidean norm. Zero rows and columns stay zero.
pub fn equilibrate(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut e = m.clone();
    for mut r in e.row_iter_mut() {
        let n = r.norm();
        if n > 0.0 {
            r /= n;
        }
    }
    for mut c in e.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
    e
}

/// Numerical rank of the equilibrated matrix at relative tolerance `tol`.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    rank_at(&singular_values(&equilibrate(m)), tol)
}

pub fn rank_of_rows(rows: &[Vec<f64>], tol: f64) -> usize {
    let nc = rows.first().map_or(0, |r| r.len());
    numerical_rank(&DMatrix::from_fn(rows.len(), nc, |i, j| rows[i][j]), tol)
}

pub fn rank_report(exact: &DMatrix<f64>, fd: &DMatrix<f64>, tol: f64) -> RankReport {
    let sv = singular_values(exact);
    RankReport {
        rows: exact.nrows(),
        cols: exact.ncols(),
        rank_at_tol: numerical_rank(exact, tol),
        singular_values: sv,
        tol,
        matrix: rows_of(exact),
        fd_max_rel_diff: max_rel_diff(fd, exact),
    }
}

pub fn max_rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}

/// Exact Jacobian of `f` at `at` by forward-mode differentiation.
pub fn dual_jacobian<const N: usize>(f: impl Fn(&[Dual<N>]) -> Vec<Dual<N>>, at: [f64; N]) -> DMatrix<f64> {
    let vars: Vec<Dual<N>> = (0..N).map(|i| Dual::var(at[i], i)).collect();
    let out = f(&vars);
    DMatrix::from_fn(out.len(), N, |i, j| out[i].d[j])
}

/// Central-difference Jacobian of `f` at `at` with step `h`.
pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, at: &[f64], h: f64) -> DMatrix<f64> {
    let rows = f(at).len();
    let mut m = DMatrix::zeros(rows, at.len());
    for j in 0..at.len() {
        let mut p = at.to_vec();
        let mut q = at.to_vec();
        p[j] += h;
        q[j] -= h;
        let (fp, fq) = (f(&p), f(&q));
        for i in 0..rows {
            m[(i, j)] = (fp[i] - fq[i]) / (2.0 * h);
        }
    }
    m
}

/// Central differences at h, h/2, h/4 combined by two Richardson levels (error O(h⁶)).
pub fn fd_jacobian_richardson(f: impl Fn(&[f64]) -> Vec<f64>, at: &[f64], h: f64) -> DMatrix<f64> {
    let d1 = fd_jacobian(&f, at, h);
    let d2 = fd_jacobian(&f, at, h / 2.0);
    let d4 = fd_jacobian(&f, at, h / 4.0);
    let r1 = (&d2 * 4.0 - &d1) / 3.0;
    let r2 = (&d4 * 4.0 - &d2) / 3.0;
    (r2 * 16.0 - r1) / 15.0
}

/// FD step for maps whose derivatives grow like powers of K.
pub fn fd_step(k: f64) -> f64 {
    FD_STEP / k.max(1.0).powf(1.5)
}

fn cst<T: Scalar>(p: [f64; 2]) -> [T; 2] {
    [T::cst(p[0]), T::cst(p[1])]
}

/// Lifted one-point map after len(ws)/2 steps.
pub fn one_point_map<T: Scalar>(sp: ShearPair, x: [f64; 2], ws: &[T]) -> Vec<T> {
    let mut p = cst::<T>(x);
    for w in ws.chunks(2) {
        p = sp.lifted_step(p, [w[0], w[1]]);
    }
    p.to_vec()
}

/// Lifted two-point map Φ: (x₁, x₂, y₁, y₂) after len(ws)/2 steps.
pub fn two_point_map<T: Scalar>(sp: ShearPair, x: [f64; 2], y: [f64; 2], ws: &[T]) -> Vec<T> {
    let mut a = one_point_map(sp, x, ws);
    a.extend(one_point_map(sp, y, ws));
    a
}

/// Lifted derivative cocycle, flattened row-major (a, b, c, d).
pub fn cocycle_map<T: Scalar>(sp: ShearPair, x: [f64; 2], ws: &[T]) -> Vec<T> {
    let (zero, one) = (T::cst(0.0), T::cst(1.0));
    let mut p = cst::<T>(x);
    let mut m = [[one, zero], [zero, one]];
    for w in ws.chunks(2) {
        let j = sp.lifted_jacobian(p, [w[0], w[1]]);
        m = [
            [j[0][0] * m[0][0] + j[0][1] * m[1][0], j[0][0] * m[0][1] + j[0][1] * m[1][1]],
            [j[1][0] * m[0][0] + j[1][1] * m[1][0], j[1][0] * m[0][1] + j[1][1] * m[1][1]],
        ];
        p = sp.lifted_step(p, [w[0], w[1]]);
    }
    vec![m[0][0], m[0][1], m[1][0], m[1][1]]
}

/// Lifted projective map: (x₁, x₂, u₁/|u|, u₂/|u|) with u = D f v.
pub fn projective_map<T: Scalar>(sp: ShearPair, x: [f64; 2], v: [f64; 2], ws: &[T]) -> Vec<T> {
    let mut p = cst::<T>(x);
    let mut u = cst::<T>(v);
    for w in ws.chunks(2) {
        let j = sp.lifted_jacobian(p, [w[0], w[1]]);
        u = [j[0][0] * u[0] + j[0][1] * u[1], j[1][0] * u[0] + j[1][1] * u[1]];
        p = sp.lifted_step(p, [w[0], w[1]]);
    }
    let n = (u[0] * u[0] + u[1] * u[1]).sqrt();
    vec![p[0], p[1], u[0] / n, u[1] / n]
}

fn check_k(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(invalid("K", format!("must be a positive finite number, got {k}")))
    }
}

fn jacobians<const N: usize>(k: f64, f: impl Fn(&[Dual<N>]) -> Vec<Dual<N>>, g: impl Fn(&[f64]) -> Vec<f64>, at: [f64; N]) -> (DMatrix<f64>, DMatrix<f64>) {
    (dual_jacobian(f, at), fd_jacobian_richardson(g, &at, fd_step(k)))
}

pub const Z_STAR: ([f64; 2], [f64; 2]) = ([0.0, 0.0], [0.0, PI]);
/// Positions of ξ = (ω₁¹, ω₂², ω₃², ω₄²) within (ω₁¹, ω₁², …, ω₄²).
pub const XI_INDICES: [usize; 4] = [0, 3, 5, 7];

/// |det D_ξ Φ₈| at z_* and zero phases, against 12K⁴.
pub fn det_xi_phi8(k: f64) -> Result<DetReport> {
    check_k(k)?;
    let sp = ShearPair::chirikov(k);
    let (x, y) = Z_STAR;
    let (full, fd) = jacobians::<8>(k, |w| two_point_map(sp, x, y, w), |w| two_point_map(sp, x, y, w), [0.0; 8]);
    let pick = |m: &DMatrix<f64>| DMatrix::from_fn(4, 4, |i, j| m[(i, XI_INDICES[j])]);
    let value = pick(&full).determinant().abs();
    let fd_value = pick(&fd).determinant().abs();
    let expected = 12.0 * k.powi(4);
    Ok(DetReport {
        value,
        expected,
        rel_error: (value - expected).abs() / expected.max(1e-300),
        fd_value,
        fd_rel_error: (fd_value - expected).abs() / expected.max(1e-300),
    })
}

/// D_ω f_ω(x_*) at x_* = ω_* = 0.
pub fn one_point_submersion(k: f64) -> Result<RankReport> {
    check_k(k)?;
    let sp = ShearPair::chirikov(k);
    let (a, b) = jacobians::<2>(k, |w| one_point_map(sp, [0.0, 0.0], w), |w| one_point_map(sp, [0.0, 0.0], w), [0.0; 2]);
    Ok(rank_report(&a, &b, RANK_TOL))
}

pub const PROJECTIVE_PHASES: [f64; 4] = [0.0, 0.0, FRAC_PI_2, 0.0];

/// Two-step projective map at x_* = 0, v_* = (1, 0), phases ((0,0),(π/2,0)).
pub fn projective_submersion(k: f64) -> Result<RankReport> {
    check_k(k)?;
    let sp = ShearPair::chirikov(k);
    let (x, v) = ([0.0, 0.0], [1.0, 0.0]);
    let (a, b) = jacobians::<4>(k, |w| projective_map(sp, x, v, w), |w| projective_map(sp, x, v, w), PROJECTIVE_PHASES);
    Ok(rank_report(&a, &b, RANK_TOL))
}

pub const TWO_POINT_STAR: ([f64; 2], [f64; 2]) = ([0.0, 0.0], [PI, PI]);

/// Three-step two-point map at ((0,0),(π,π)), zero phases.
pub fn two_point_submersion(k: f64) -> Result<RankReport> {
    check_k(k)?;
    let sp = ShearPair::chirikov(k);
    let (x, y) = TWO_POINT_STAR;
    let (a, b) = jacobians::<6>(k, |w| two_point_map(sp, x, y, w), |w| two_point_map(sp, x, y, w), [0.0; 6]);
    Ok(rank_report(&a, &b, RANK_TOL))
}

/// The two-step analogue at the same point, which is degenerate.
pub fn two_point_submersion_n2(k: f64) -> Result<RankReport> {
    check_k(k)?;
    let sp = ShearPair::chirikov(k);
    let (x, y) = TWO_POINT_STAR;
    let (a, b) = jacobians::<4>(k, |w| two_point_map(sp, x, y, w), |w| two_point_map(sp, x, y, w), [0.0; 4]);
    Ok(rank_report(&a, &b, RANK_TOL))
}

pub const LYAP_X: [f64; 2] = [FRAC_PI_2, PI];

pub fn lyapunov_phases(k: f64) -> [f64; 8] {
    let w = crate::torus::wrap;
    [
        0.0,
        w(FRAC_PI_2 - 1.0),
        w(FRAC_PI_2 + 1.0),
        w(FRAC_PI_2 + k),
        w(FRAC_PI_2 + 1.0),
        w(FRAC_PI_2 + 2.0 * k),
        w(FRAC_PI_2 + 1.0),
        w(FRAC_PI_2 + 3.0 * k),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurjectivityReport {
    /// D_ω Φ_x (2×8)
    pub position: RankReport,
    /// D_ω Ψ_x (4×8), the cocycle derivative
    pub cocycle: RankReport,
    /// D_ω Ψ_x restricted to ker D_ω Φ_x (4×6)
    pub restricted: RankReport,
    /// max |D_ω Φ_x · N| over the computed kernel basis N
    pub kernel_residual: f64,
}

/// Orthonormal basis of the numerical null space, as columns: the
/// orthogonal complement of the right singular vectors above `tol·σ₁`.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut basis: Vec<Vec<f64>> = (0..vt.nrows())
        .filter(|&i| svd.singular_values[i] > tol * top)
        .map(|i| vt.row(i).iter().copied().collect())
        .collect();
    let row_rank = basis.len();
    for e in 0..n {
        let mut v = vec![0.0; n];
        v[e] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv > 1e-6 {
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v);
        }
    }
    let cols = &basis[row_rank..];
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Position rank 2 and the restricted cocycle rank 3 at x_* = (π/2, π).
pub fn lyapunov_surjectivity(k: f64) -> Result<SurjectivityReport> {
    check_k(k)?;
    let sp = ShearPair::chirikov(k);
    let at = lyapunov_phases(k);
    let (p, pf) = jacobians::<8>(k, |w| one_point_map(sp, LYAP_X, w), |w| one_point_map(sp, LYAP_X, w), at);
    let (c, cf) = jacobians::<8>(k, |w| cocycle_map(sp, LYAP_X, w), |w| cocycle_map(sp, LYAP_X, w), at);
    let ns = null_space(&p, RANK_TOL);
    let kernel_residual = (&p * &ns).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let restricted = rank_report(&(&c * &ns), &(&cf * &ns), RANK_TOL);
    Ok(SurjectivityReport {
        position: rank_report(&p, &pf, RANK_TOL),
        cocycle: rank_report(&c, &cf, RANK_TOL),
        restricted,
        kernel_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointCheck {
    pub name: String,
    pub residual: f64,
    pub pass: bool,
}

pub const FIXED_TOL: f64 = 1e-10;

/// Unit eigenvector of [[1, K], [1, 1 + K]] for its expanding eigenvalue.
pub fn v_star(k: f64) -> [f64; 2] {
    let s = (k * k + 4.0 * k).sqrt();
    let norm = ((k * k + 2.0 * k + 2.0 - k * s) / 2.0).sqrt();
    [(-k + s) / 2.0 / norm, 1.0 / norm]
}

pub fn expanding_eigenvalue(k: f64) -> f64 {
    (2.0 + k + (k * k + 4.0 * k).sqrt()) / 2.0
}

pub fn fixed_point_suite(k: f64) -> Result<Vec<FixedPointCheck>> {
    check_k(k)?;
    let sp = ShearPair::chirikov(k);
    let w0 = PhasePair::default();
    let o = TorusPoint::new(0.0, 0.0);
    let y = TorusPoint::new(0.0, PI);
    let mk = |name: &str, r: f64| FixedPointCheck {
        name: name.to_string(),
        residual: r,
        pass: r <= FIXED_TOL,
    };
    let one = torus_dist(sp.step(o, w0), o);
    let two = torus_dist(sp.step(o, w0), o).max(torus_dist(sp.step(y, w0), y));
    let v = v_star(k);
    let (u1, u2) = sp.jacobian(o, w0).apply(v[0], v[1]);
    let lam = expanding_eigenvalue(k);
    let eig = (u1 - lam * v[0]).hypot(u2 - lam * v[1]);
    let n = u1.hypot(u2);
    let proj = (u1 / n - v[0]).hypot(u2 / n - v[1]) + torus_dist(sp.step(o, w0), o);
    let unit = (v[0].hypot(v[1]) - 1.0).abs();
    Ok(vec![
        mk("one_point", one),
        mk("two_point", two),
        mk("projective", proj),
        mk("eigen_residual", eig / lam),
        FixedPointCheck {
            name: "v_star_unit".into(),
            residual: unit,
            pass: unit <= 1e-12,
        },
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallSetConstants {
    pub k: f64,
    /// radius of the ball on which the minorization holds, C₁K⁻¹³⁰
    pub log10_radius: f64,
    /// radius of the reference measure's ball, C₄K⁻⁵⁵
    pub log10_measure_radius: f64,
    /// c₁(K) = C₃K⁻⁷⁶⁴
    pub log10_c1: f64,
    /// density of μ, K⁻²⁸⁸
    pub log10_mu_density: f64,
    /// C₂K⁻⁷⁸⁰
    pub log10_prefactor: f64,
    pub prefactors: String,
}

pub fn smallset_constants(k: f64) -> Result<SmallSetConstants> {
    if !(k >= 1.0) || !k.is_finite() {
        return Err(invalid("K", "must be >= 1"));
    }
    let l = k.log10();
    Ok(SmallSetConstants {
        k,
        log10_radius: -130.0 * l,
        log10_measure_radius: -55.0 * l,
        log10_c1: -764.0 * l,
        log10_mu_density: -288.0 * l,
        log10_prefactor: -780.0 * l,
        prefactors: "C1 = C2 = C3 = C4 = 1".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_is_12k4() {
        for k in [10.0, 4.0 * PI, 100.0] {
            let d = det_xi_phi8(k).unwrap();
            assert!(d.rel_error < 1e-9, "{d:?}");
            assert!(d.fd_rel_error < 1e-5, "{d:?}");
        }
    }

    #[test]
    fn one_point_matrix_and_small_k() {
        let r = one_point_submersion(5.0).unwrap();
        assert_eq!(r.rank_at_tol, 2);
        assert_eq!(r.matrix, vec![vec![-5.0, 0.0], vec![-5.0, -1.0]]);
        assert_eq!(one_point_submersion(1e-9).unwrap().rank_at_tol, 2);
    }

    #[test]
    fn ranks() {
        for k in [10.0, 4.0 * PI, 100.0] {
            assert_eq!(projective_submersion(k).unwrap().rank_at_tol, 3);
            assert_eq!(two_point_submersion(k).unwrap().rank_at_tol, 4);
            assert!(two_point_submersion_n2(k).unwrap().rank_at_tol < 4);
            let s = lyapunov_surjectivity(k).unwrap();
            assert_eq!(s.position.rank_at_tol, 2);
            assert_eq!(s.restricted.cols, 6);
            assert_eq!(s.restricted.rank_at_tol, 3);
            assert!(s.kernel_residual < 1e-8 * k);
        }
    }

    #[test]
    fn fd_agrees_with_dual() {
        for k in [10.0, 100.0] {
            assert!(two_point_submersion(k).unwrap().fd_max_rel_diff < 1e-5);
            assert!(projective_submersion(k).unwrap().fd_max_rel_diff < 1e-5);
        }
    }

    #[test]
    fn fixed_points() {
        for k in [5.0, 4.0 * PI, 100.0] {
            assert!(fixed_point_suite(k).unwrap().iter().all(|c| c.pass));
        }
    }

    #[test]
    fn smallset_logs() {
        let c = smallset_constants(10.0).unwrap();
        assert_eq!(c.log10_radius, -130.0);
        let one = smallset_constants(1.0).unwrap();
        assert_eq!(one.log10_c1, 0.0);
        let big = smallset_constants(20.0).unwrap();
        assert!(big.log10_mu_density < c.log10_mu_density);
    }
}
