//! Spectral advection–diffusion under alternating shears.
//!
//! Amplitudes use the forward normalization ρ̂_k = (2π)⁻² ∫ ρ e^{−ik·x} dx,
//! i.e. (1/N²)·DFT on an N×N grid, so Σ|ρ̂_k|² is the mean-square of ρ.
//! Storage is row-major `[i1][i2]` with i ↦ k = i for i ≤ N/2 and i − N above.
//!
//! Two discretizations share the API. With `dealias` the field lives on the
//! band |k₁|, |k₂| ≤ N/3 and each shear is the exact operator followed by the
//! orthogonal projection onto that band (a Galerkin truncation, no aliasing).
//! Without it, shears are collocation products on the N×N grid, which are
//! exactly unitary but alias.

use std::f64::consts::TAU;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64 as C;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::fit_exponential_rate;
use crate::rds::{sample_phases, PhaseSequence, RngStreamSpec};
use crate::torus::{wrap, PhasePair, Profile, ShearPair};

pub const NORMALIZATION: &str = "forward: rho_hat_k = (2pi)^-2 int rho e^{-ik.x} dx = DFT/N^2; L2 = sqrt(sum |rho_hat_k|^2)";
pub const SNAPSHOT_TAG: [u8; 8] = *b"FWDN2\0\0\0";
pub const RESOLUTION_LEAK_TOL: f64 = 1e-8;
pub const UNDERFLOW: f64 = 1e-280;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub dealias: bool,
}

impl GridSpec {
    pub fn new(n: usize, dealias: bool) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(invalid("grid", format!("n must be a power of two >= 8, got {n}")));
        }
        Ok(GridSpec { n, dealias })
    }

    #[inline]
    pub fn k_of(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    #[inline]
    pub fn idx(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    /// Largest retained |k| per component in the Galerkin band.
    pub fn cutoff(&self) -> i64 {
        self.n as i64 / 3
    }

    #[inline]
    pub fn in_band(&self, k: i64) -> bool {
        !self.dealias || k.abs() <= self.cutoff()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub grid: GridSpec,
    pub amp: Vec<C>,
    pub mean_zero: bool,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        SpectralField {
            grid,
            amp: vec![C::new(0.0, 0.0); grid.n * grid.n],
            mean_zero: true,
        }
    }

    pub fn single_mode(grid: GridSpec, k1: i64, k2: i64, a: C) -> Result<Self> {
        let mut f = SpectralField::zeros(grid);
        f.set(k1, k2, a)?;
        f.mean_zero = (k1, k2) != (0, 0) || a == C::new(0.0, 0.0);
        Ok(f)
    }

    /// e^{ik·x} + e^{−ik·x}
    pub fn real_mode(grid: GridSpec, k1: i64, k2: i64) -> Result<Self> {
        if (k1, k2) == (0, 0) {
            return Err(invalid("mode", "the zero mode is not mean-zero"));
        }
        let mut f = SpectralField::single_mode(grid, k1, k2, C::new(1.0, 0.0))?;
        f.set(-k1, -k2, C::new(1.0, 0.0))?;
        Ok(f)
    }

    pub fn get(&self, k1: i64, k2: i64) -> C {
        let g = self.grid;
        self.amp[g.idx(k1) * g.n + g.idx(k2)]
    }

    pub fn set(&mut self, k1: i64, k2: i64, a: C) -> Result<()> {
        let g = self.grid;
        let half = g.n as i64 / 2;
        if k1 <= -half || k1 > half || k2 <= -half || k2 > half || !g.in_band(k1) || !g.in_band(k2) {
            return Err(invalid("mode", format!("({k1}, {k2}) is outside the resolved band")));
        }
        self.amp[g.idx(k1) * g.n + g.idx(k2)] = a;
        if (k1, k2) == (0, 0) {
            self.mean_zero = a == C::new(0.0, 0.0);
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// max |ρ̂_k − conj ρ̂_{−k}|
    pub fn reality_defect(&self) -> f64 {
        let g = self.grid;
        let mut worst = 0.0f64;
        for i1 in 0..g.n {
            for i2 in 0..g.n {
                let (k1, k2) = (g.k_of(i1), g.k_of(i2));
                let a = self.amp[i1 * g.n + i2];
                let b = self.get(-k1, -k2).conj();
                worst = worst.max((a - b).norm());
            }
        }
        worst
    }

    /// Samples ρ(x_j) at x_j = 2π(j1, j2)/N.
    pub fn to_physical(&self) -> Vec<C> {
        let n = self.grid.n;
        let mut planner = FftPlanner::new();
        let inv = planner.plan_fft_inverse(n);
        let mut a = self.amp.clone();
        fft2(&mut a, n, &inv);
        a
    }

    pub fn from_physical(grid: GridSpec, values: &[C]) -> Result<Self> {
        let n = grid.n;
        if values.len() != n * n {
            return Err(invalid("values", "length must be n*n"));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let mut a = values.to_vec();
        fft2(&mut a, n, &fwd);
        let s = 1.0 / (n * n) as f64;
        for v in a.iter_mut() {
            *v *= s;
        }
        let mut f = SpectralField {
            grid,
            amp: a,
            mean_zero: true,
        };
        f.project();
        f.mean_zero = f.get(0, 0).norm() == 0.0;
        Ok(f)
    }

    /// Zero every amplitude outside the band.
    pub fn project(&mut self) {
        let g = self.grid;
        if !g.dealias {
            return;
        }
        for i1 in 0..g.n {
            for i2 in 0..g.n {
                if !g.in_band(g.k_of(i1)) || !g.in_band(g.k_of(i2)) {
                    self.amp[i1 * g.n + i2] = C::new(0.0, 0.0);
                }
            }
        }
    }

    /// Bilinear pairing (2π)⁻²∫ρ·ψ = Σ ρ̂_k ψ̂_{−k}.
    pub fn pairing(&self, o: &SpectralField) -> C {
        let g = self.grid;
        let mut s = C::new(0.0, 0.0);
        for i1 in 0..g.n {
            for i2 in 0..g.n {
                let (k1, k2) = (g.k_of(i1), g.k_of(i2));
                s += self.amp[i1 * g.n + i2] * o.get(-k1, -k2);
            }
        }
        s
    }

    /// Flat layout: n (u64 LE), 8-byte normalization tag, then n² (re, im) f64 LE.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.grid.n as u64).to_le_bytes())?;
        w.write_all(&SNAPSHOT_TAG)?;
        for a in &self.amp {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R, dealias: bool) -> std::io::Result<Self> {
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
        let grid = GridSpec::new(n, dealias).map_err(|e| bad(&e.to_string()))?;
        r.read_exact(&mut b8)?;
        if b8 != SNAPSHOT_TAG {
            return Err(bad("unknown normalization tag"));
        }
        let mut amp = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            amp.push(C::new(re, f64::from_le_bytes(b8)));
        }
        let mean_zero = amp[0].norm() == 0.0;
        Ok(SpectralField { grid, amp, mean_zero })
    }
}

fn fft2(a: &mut [C], n: usize, plan: &Arc<dyn Fft<f64>>) {
    a.par_chunks_mut(n).for_each(|row| plan.process(row));
    let mut t = transpose(a, n);
    t.par_chunks_mut(n).for_each(|row| plan.process(row));
    a.copy_from_slice(&transpose(&t, n));
}

fn transpose(a: &[C], n: usize) -> Vec<C> {
    let mut t = vec![C::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

/// J_0(x), …, J_mmax(x) for x ≥ 0 by Miller's backward recurrence.
pub fn bessel_jn_all(x: f64, mmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; mmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let top = (mmax as f64).max(x);
    let start = 2 * ((top + 30.0 + (200.0 * top).sqrt()) as usize / 2 + 1);
    let (mut jp, mut j) = (0.0f64, 1e-280f64);
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let jm = 2.0 * k as f64 / x * j - jp;
        jp = j;
        j = jm;
        if k - 1 <= mmax {
            out[k - 1] = j;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    norm += j;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// J_m(z) for integer m ∈ [−mmax, mmax], returned with offset mmax.
pub fn bessel_jn_signed(z: f64, mmax: usize) -> Vec<f64> {
    let pos = bessel_jn_all(z.abs(), mmax);
    let mut out = vec![0.0; 2 * mmax + 1];
    for m in 0..=mmax {
        // J_m(−x) = (−1)^m J_m(x), J_{−m}(x) = (−1)^m J_m(x)
        let odd = m % 2 == 1;
        let v = if z < 0.0 && odd { -pos[m] } else { pos[m] };
        out[mmax + m] = v;
        out[mmax - m] = if odd { -v } else { v };
    }
    out
}

/// Exact solver state: FFT plans for the collocation path.
#[derive(Clone)]
pub struct Transport {
    pub grid: GridSpec,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Transport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transport").field("grid", &self.grid).finish()
    }
}

impl Transport {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        Transport {
            grid,
            fwd: planner.plan_fft_forward(grid.n),
            inv: planner.plan_fft_inverse(grid.n),
        }
    }

    /// ρ(x) ↦ ρ(x₁ − τ·D(x₂ − ω), x₂) for profile D.
    pub fn shear_horizontal(&self, f: &SpectralField, p: Profile, w: f64, tau: f64) -> SpectralField {
        let mut out = f.clone();
        self.shear_rows(&mut out.amp, p, w, tau);
        out
    }

    /// ρ(x) ↦ ρ(x₁, x₂ − τ·D(x₁ − ω)) for profile D.
    pub fn shear_vertical(&self, f: &SpectralField, p: Profile, w: f64, tau: f64) -> SpectralField {
        let n = self.grid.n;
        let mut t = transpose(&f.amp, n);
        self.shear_rows(&mut t, p, w, tau);
        SpectralField {
            grid: f.grid,
            amp: transpose(&t, n),
            mean_zero: f.mean_zero,
        }
    }

    /// Each row has a fixed wavenumber q in the displaced direction; the
    /// shear multiplies it by e^{−iqτD(s)} as a function of the other coordinate s.
    fn shear_rows(&self, a: &mut [C], p: Profile, w: f64, tau: f64) {
        let g = self.grid;
        let n = g.n;
        a.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let q = g.k_of(i);
            if q == 0 || tau == 0.0 {
                return;
            }
            if !g.in_band(q) {
                row.iter_mut().for_each(|v| *v = C::new(0.0, 0.0));
                return;
            }
            let beta = q as f64 * tau;
            if p == Profile::Sawtooth && beta.fract() == 0.0 {
                self.shift_row(row, beta as i64, w);
            } else if g.dealias {
                self.galerkin_row(row, p, w, beta);
            } else {
                self.collocation_row(row, p, w, beta);
            }
        });
    }

    /// Integer sawtooth shear: new(k) = old(k + t)·e^{itω}.
    fn shift_row(&self, row: &mut [C], t: i64, w: f64) {
        let g = self.grid;
        let old = row.to_vec();
        let ph = C::from_polar(1.0, wrap(t as f64 * w));
        for (i, v) in row.iter_mut().enumerate() {
            let k = g.k_of(i);
            let src = k + t;
            let keep = if g.dealias {
                g.in_band(k) && g.in_band(src)
            } else {
                true
            };
            *v = if keep { old[g.idx(src)] * ph } else { C::new(0.0, 0.0) };
        }
    }

    fn collocation_row(&self, row: &mut [C], p: Profile, w: f64, beta: f64) {
        let n = self.grid.n;
        self.inv.process(row);
        for (j, v) in row.iter_mut().enumerate() {
            let s = TAU * j as f64 / n as f64;
            let d = match p {
                Profile::Sawtooth => wrap(s - w),
                _ => p.displacement(s, w),
            };
            *v *= C::from_polar(1.0, -beta * d);
        }
        self.fwd.process(row);
        let sc = 1.0 / n as f64;
        row.iter_mut().for_each(|v| *v *= sc);
    }

    /// Exact convolution with the Fourier kernel of e^{−iβD(s)}, restricted to the band.
    fn galerkin_row(&self, row: &mut [C], p: Profile, w: f64, beta: f64) {
        let g = self.grid;
        let c = g.cutoff();
        let span = (2 * c) as usize;
        let kernel: Vec<C> = match p {
            Profile::Sine(amp) => {
                let j = bessel_jn_signed(-beta * amp, span);
                (0..=2 * span)
                    .map(|t| {
                        let m = t as f64 - span as f64;
                        j[t] * C::from_polar(1.0, -wrap(m * w))
                    })
                    .collect()
            }
            Profile::Sawtooth => (0..=2 * span)
                .map(|t| {
                    let m = t as f64 - span as f64;
                    let e = beta + m;
                    let base = if e == 0.0 {
                        C::new(1.0, 0.0)
                    } else {
                        (C::new(1.0, 0.0) - C::from_polar(1.0, -TAU * e)) / C::new(0.0, TAU * e)
                    };
                    base * C::from_polar(1.0, -wrap(m * w))
                })
                .collect(),
        };
        let old: Vec<C> = (-c..=c).map(|k| row[g.idx(k)]).collect();
        for k in -c..=c {
            let mut s = C::new(0.0, 0.0);
            for (t, &o) in old.iter().enumerate() {
                if o.re != 0.0 || o.im != 0.0 {
                    let kp = t as i64 - c;
                    s += kernel[(k - kp + span as i64) as usize] * o;
                }
            }
            row[g.idx(k)] = s;
        }
    }

    pub fn diffuse(&self, f: &SpectralField, nu: f64, t: f64) -> SpectralField {
        let g = self.grid;
        let mut out = f.clone();
        if nu == 0.0 || t == 0.0 {
            return out;
        }
        out.amp.par_chunks_mut(g.n).enumerate().for_each(|(i1, row)| {
            let k1 = g.k_of(i1) as f64;
            for (i2, v) in row.iter_mut().enumerate() {
                let k2 = g.k_of(i2) as f64;
                *v *= (-nu * (k1 * k1 + k2 * k2) * t).exp();
            }
        });
        out
    }

    /// One time-2 period: horizontal interval, then vertical interval.
    /// Returns the field and the largest L² fraction discarded by the band
    /// projection during the period.
    pub fn step_period(&self, f: &SpectralField, sp: ShearPair, w: PhasePair, nu: f64, substeps: usize) -> (SpectralField, f64) {
        let mut leak = 0.0f64;
        let mut track = |before: &SpectralField, after: &SpectralField| {
            if self.grid.dealias {
                let b = before.l2_norm();
                if b > 0.0 {
                    let r = after.l2_norm() / b;
                    leak = leak.max(1.0 - r * r);
                }
            }
        };
        if nu == 0.0 {
            let h = self.shear_horizontal(f, sp.horizontal, w.w1.value(), 1.0);
            track(f, &h);
            let v = self.shear_vertical(&h, sp.vertical, w.w2.value(), 1.0);
            track(&h, &v);
            return (v, leak);
        }
        let m = substeps.max(1);
        let dt = 1.0 / m as f64;
        let mut cur = f.clone();
        for vertical in [false, true] {
            for _ in 0..m {
                let a = self.diffuse(&cur, nu, 0.5 * dt);
                let b = if vertical {
                    self.shear_vertical(&a, sp.vertical, w.w2.value(), dt)
                } else {
                    self.shear_horizontal(&a, sp.horizontal, w.w1.value(), dt)
                };
                track(&a, &b);
                cur = self.diffuse(&b, nu, 0.5 * dt);
            }
        }
        (cur, leak)
    }

    /// ψ ↦ ψ∘f_ω (the bilinear transpose of one inviscid period).
    pub fn pullback_period(&self, f: &SpectralField, sp: ShearPair, w: PhasePair) -> SpectralField {
        let v = self.shear_vertical(f, sp.vertical, w.w2.value(), -1.0);
        self.shear_horizontal(&v, sp.horizontal, w.w1.value(), -1.0)
    }
}

pub fn apply_horizontal_shear(f: &SpectralField, w1: f64, k: f64) -> SpectralField {
    Transport::new(f.grid).shear_horizontal(f, Profile::Sine(k), w1, 1.0)
}

pub fn apply_vertical_shear(f: &SpectralField, w2: f64) -> SpectralField {
    Transport::new(f.grid).shear_vertical(f, Profile::Sawtooth, w2, 1.0)
}

pub fn apply_diffusion(f: &SpectralField, nu: f64, t: f64) -> Result<SpectralField> {
    if !(nu >= 0.0) || !(t >= 0.0) {
        return Err(invalid("nu", "nu and t must be >= 0"));
    }
    Ok(Transport::new(f.grid).diffuse(f, nu, t))
}

pub fn step_period(f: &SpectralField, w: PhasePair, k: f64, nu: f64, substeps: usize) -> Result<SpectralField> {
    if substeps == 0 {
        return Err(invalid("substeps", "must be >= 1"));
    }
    if !(nu >= 0.0) {
        return Err(invalid("nu", "must be >= 0"));
    }
    Ok(Transport::new(f.grid).step_period(f, ShearPair::chirikov(k), w, nu, substeps).0)
}

/// √(Σ_{k≠0} |k|^{∓2s}|ρ̂_k|²)
pub fn sobolev_norm(f: &SpectralField, s: f64, negative: bool) -> Result<f64> {
    let g = f.grid;
    if negative && s > 0.0 && f.amp[0].norm() != 0.0 {
        return Err(Error::NotMeanZero(f.amp[0].norm()));
    }
    let e = if negative { -s } else { s };
    let mut acc = 0.0;
    for i1 in 0..g.n {
        let k1 = g.k_of(i1) as f64;
        for i2 in 0..g.n {
            if i1 == 0 && i2 == 0 {
                continue;
            }
            let k2 = g.k_of(i2) as f64;
            let a = f.amp[i1 * g.n + i2].norm_sqr();
            if a != 0.0 {
                acc += (k1 * k1 + k2 * k2).powf(e) * a;
            }
        }
    }
    Ok(acc.sqrt())
}

/// Fraction of Σ|k|²|ρ̂_k|² carried by modes with a component beyond 2/3 of Nyquist.
pub fn enstrophy_tail_fraction(f: &SpectralField) -> f64 {
    let g = f.grid;
    let cut = g.n as i64 / 3;
    let (mut tail, mut all) = (0.0, 0.0);
    for i1 in 0..g.n {
        let k1 = g.k_of(i1);
        for i2 in 0..g.n {
            let k2 = g.k_of(i2);
            let e = ((k1 * k1 + k2 * k2) as f64) * f.amp[i1 * g.n + i2].norm_sqr();
            all += e;
            if k1.abs() > cut || k2.abs() > cut {
                tail += e;
            }
        }
    }
    if all > 0.0 {
        tail / all
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub s: f64,
    pub negative: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialField {
    /// e^{ik·x} + conj
    RealMode(i64, i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayExperiment {
    pub model: ShearPair,
    pub nu: f64,
    pub steps: usize,
    pub norm: NormSpec,
    pub realizations: usize,
    pub stream: RngStreamSpec,
    pub grid: GridSpec,
    pub substeps: usize,
    pub initial: InitialField,
    /// leading fraction of the series excluded from the rate fit
    pub drop_fraction: f64,
}

impl DecayExperiment {
    pub fn chirikov(k: f64, nu: f64, steps: usize, realizations: usize, seed: u64) -> Self {
        DecayExperiment {
            model: ShearPair::chirikov(k),
            nu,
            steps,
            norm: NormSpec { s: 1.0, negative: true },
            realizations,
            stream: RngStreamSpec::new(seed, 0),
            grid: GridSpec { n: 256, dealias: true },
            substeps: 8,
            initial: InitialField::RealMode(1, 0),
            drop_fraction: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        GridSpec::new(self.grid.n, self.grid.dealias)?;
        if !(self.nu >= 0.0) {
            return Err(invalid("nu", "must be >= 0"));
        }
        if self.steps == 0 {
            return Err(invalid("steps", "must be >= 1"));
        }
        if self.realizations == 0 {
            return Err(invalid("realizations", "must be >= 1"));
        }
        if self.substeps == 0 {
            return Err(invalid("substeps", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.drop_fraction) {
            return Err(invalid("drop_fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationSeries {
    pub realization: usize,
    /// chosen norm at periods 0..=steps (shorter if truncated)
    pub norms: Vec<f64>,
    /// L² norm at the same periods
    pub l2: Vec<f64>,
    pub truncated: bool,
    /// per-period rate: norm ~ e^{−rate·n}
    pub rate: Option<f64>,
    pub r_squared: Option<f64>,
    /// first period with ‖ρ‖_{L²} ≤ ½‖ρ₀‖_{L²}
    pub half_life_periods: Option<usize>,
    pub max_leak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayResult {
    pub series: Vec<RealizationSeries>,
    pub normalization: String,
    pub resolution_limited: bool,
}

fn initial_field(cfg: &DecayExperiment) -> Result<SpectralField> {
    match cfg.initial {
        InitialField::RealMode(a, b) => SpectralField::real_mode(cfg.grid, a, b),
    }
}

pub fn run_realization(cfg: &DecayExperiment, tr: &Transport, r: usize, phases: &PhaseSequence) -> Result<RealizationSeries> {
    run_realization_field(cfg, tr, r, phases).map(|x| x.0)
}

/// Like `run_realization`, also returning the last field.
pub fn run_realization_field(cfg: &DecayExperiment, tr: &Transport, r: usize, phases: &PhaseSequence) -> Result<(RealizationSeries, SpectralField)> {
    let mut f = initial_field(cfg)?;
    let mut norms = vec![sobolev_norm(&f, cfg.norm.s, cfg.norm.negative)?];
    let mut l2 = vec![f.l2_norm()];
    let mut truncated = false;
    let mut max_leak = 0.0f64;
    for &w in phases.iter().take(cfg.steps) {
        let (g, leak) = tr.step_period(&f, cfg.model, w, cfg.nu, cfg.substeps);
        f = g;
        max_leak = max_leak.max(leak);
        let v = sobolev_norm(&f, cfg.norm.s, cfg.norm.negative)?;
        if !(v > UNDERFLOW) {
            truncated = true;
            break;
        }
        norms.push(v);
        l2.push(f.l2_norm());
    }
    let skip = ((norms.len() as f64) * cfg.drop_fraction).floor() as usize;
    let pts: Vec<(f64, f64)> = norms.iter().enumerate().skip(skip).map(|(n, &v)| (n as f64, v)).collect();
    let fit = fit_exponential_rate(&pts).ok();
    let half = l2.iter().position(|&v| v <= 0.5 * l2[0]);
    Ok((
        RealizationSeries {
            realization: r,
            norms,
            l2,
            truncated,
            rate: fit.map(|f| f.0),
            r_squared: fit.map(|f| f.1),
            half_life_periods: half,
            max_leak,
        },
        f,
    ))
}

pub fn run_decay_experiment(cfg: &DecayExperiment) -> Result<DecayResult> {
    cfg.validate()?;
    let tr = Transport::new(cfg.grid);
    let series = (0..cfg.realizations)
        .map(|r| {
            let ph = sample_phases(cfg.stream.substream(r as u64), cfg.steps);
            run_realization(cfg, &tr, r, &ph)
        })
        .collect::<Result<Vec<_>>>()?;
    let resolution_limited = series.iter().any(|s| s.max_leak >= RESOLUTION_LEAK_TOL);
    Ok(DecayResult {
        series,
        normalization: NORMALIZATION.to_string(),
        resolution_limited,
    })
}

/// Bare-diffusion L² half-life of mode k, in periods.
pub fn bare_half_life_periods(nu: f64, k_sq: f64) -> f64 {
    (2.0f64).ln() / (2.0 * nu * k_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn g(n: usize, d: bool) -> GridSpec {
        GridSpec::new(n, d).unwrap()
    }

    /// J_m(x) = (1/π)∫₀^π cos(mτ − x sin τ)dτ by a dense trapezoid rule.
    fn bessel_oracle(m: i64, x: f64) -> f64 {
        let n = 20000;
        let h = PI / n as f64;
        let f = |t: f64| (m as f64 * t - x * t.sin()).cos();
        let mut s = 0.5 * (f(0.0) + f(PI));
        for i in 1..n {
            s += f(i as f64 * h);
        }
        s * h / PI
    }

    #[test]
    fn bessel_matches_integral() {
        for &x in &[0.5, 3.0, 8.0, 40.0, 300.0] {
            let j = bessel_jn_signed(-x, 60);
            for m in [-60i64, -7, -1, 0, 1, 2, 9, 33, 60] {
                let o = bessel_oracle(m, -x);
                assert!((j[(m + 60) as usize] - o).abs() < 1e-12, "x={x} m={m}: {} vs {o}", j[(m + 60) as usize]);
            }
        }
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(4, false).is_err());
        assert!(GridSpec::new(48, false).is_err());
        let gr = g(16, false);
        assert_eq!(gr.k_of(8), 8);
        assert_eq!(gr.k_of(9), -7);
        assert_eq!(gr.idx(-1), 15);
    }

    #[test]
    fn horizontal_examples() {
        for d in [false, true] {
            let gr = g(32, d);
            let f = SpectralField::single_mode(gr, 0, 1, C::new(1.0, 0.0)).unwrap();
            assert_eq!(apply_horizontal_shear(&f, 0.3, 5.0), f);
            let f = SpectralField::real_mode(gr, 1, 2).unwrap();
            let out = Transport::new(gr).shear_horizontal(&f, Profile::Sine(0.0), 0.3, 1.0);
            assert!(out.amp.iter().zip(&f.amp).all(|(a, b)| (a - b).norm() < 1e-15));
        }
    }

    #[test]
    fn vertical_maps_mode_to_mode() {
        for d in [false, true] {
            let gr = g(32, d);
            let f = SpectralField::single_mode(gr, 0, 1, C::new(1.0, 0.0)).unwrap();
            let out = apply_vertical_shear(&f, 0.0);
            assert_eq!(out.get(-1, 1), C::new(1.0, 0.0));
            assert!((out.l2_norm() - 1.0).abs() == 0.0);
            let h = SpectralField::single_mode(gr, 1, 0, C::new(1.0, 0.0)).unwrap();
            assert_eq!(apply_vertical_shear(&h, 2.0), h);
        }
    }

    #[test]
    fn galerkin_and_collocation_agree_on_resolved_data() {
        let f = SpectralField::real_mode(g(64, false), 1, 1).unwrap();
        let fd = SpectralField::real_mode(g(64, true), 1, 1).unwrap();
        let a = Transport::new(f.grid).shear_horizontal(&f, Profile::Sine(3.0), 0.7, 1.0);
        let b = Transport::new(fd.grid).shear_horizontal(&fd, Profile::Sine(3.0), 0.7, 1.0);
        for k1 in -5..=5 {
            for k2 in -20..=20 {
                assert!((a.get(k1, k2) - b.get(k1, k2)).norm() < 1e-12);
            }
        }
        // fractional sawtooth: the collocation product aliases the 1/m tail
        // of the kernel, so agreement improves with the grid
        let rel = |n: usize| {
            let f = SpectralField::real_mode(g(n, false), 1, 1).unwrap();
            let fd = SpectralField::real_mode(g(n, true), 1, 1).unwrap();
            let a = Transport::new(f.grid).shear_vertical(&f, Profile::Sawtooth, 0.4, 0.25);
            let b = Transport::new(fd.grid).shear_vertical(&fd, Profile::Sawtooth, 0.4, 0.25);
            let (mut num, mut den) = (0.0, 0.0);
            for k1 in -8..=8 {
                num += (a.get(k1, 1) - b.get(k1, 1)).norm_sqr();
                den += b.get(k1, 1).norm_sqr();
            }
            num / den
        };
        let (r64, r256) = (rel(64), rel(256));
        assert!(r256 < r64 / 2.0 && r256 < 1e-3, "{r64} {r256}");
    }

    #[test]
    fn diffusion_examples() {
        let gr = g(16, false);
        let f = SpectralField::single_mode(gr, 1, 0, C::new(1.0, 0.0)).unwrap();
        assert_eq!(apply_diffusion(&f, 0.0, 3.0).unwrap(), f);
        let d = apply_diffusion(&f, 0.1, 1.0).unwrap();
        assert!((d.get(1, 0).re - (-0.1f64).exp()).abs() < 1e-15);
        let f = SpectralField::real_mode(gr, 2, 3).unwrap();
        let d = apply_diffusion(&f, 0.05, 0.7).unwrap();
        let expect = (2.0f64).sqrt() * (-0.05 * 13.0 * 0.7f64).exp();
        assert!((d.l2_norm() - expect).abs() < 1e-14);
    }

    #[test]
    fn sobolev_examples() {
        let gr = g(16, false);
        let f = SpectralField::single_mode(gr, 1, 0, C::new(1.0, 0.0)).unwrap();
        assert!((sobolev_norm(&f, 1.0, true).unwrap() - 1.0).abs() < 1e-15);
        let f = SpectralField::single_mode(gr, 3, 4, C::new(2.0, 0.0)).unwrap();
        assert!((sobolev_norm(&f, 1.0, true).unwrap() - 0.4).abs() < 1e-15);
        let f = SpectralField::real_mode(gr, 2, 5).unwrap();
        assert!((sobolev_norm(&f, 0.0, true).unwrap() - f.l2_norm()).abs() < 1e-15);
        let mut nz = f.clone();
        nz.amp[0] = C::new(0.5, 0.0);
        assert!(sobolev_norm(&nz, 1.0, true).is_err());
    }

    #[test]
    fn physical_round_trip_and_snapshot() {
        let gr = g(16, false);
        let f = SpectralField::real_mode(gr, 2, -3).unwrap();
        let phys = f.to_physical();
        let x = (2.0 * 3.0 * TAU / 16.0) + (-3.0 * 5.0 * TAU / 16.0);
        assert!((phys[3 * 16 + 5] - C::new(2.0 * x.cos(), 0.0)).norm() < 1e-13);
        let back = SpectralField::from_physical(gr, &phys).unwrap();
        assert!(back.amp.iter().zip(&f.amp).all(|(a, b)| (a - b).norm() < 1e-15));
        let mut buf = Vec::new();
        f.write_snapshot(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 16 * 16 * 16);
        assert_eq!(SpectralField::read_snapshot(&buf[..], false).unwrap(), f);
    }

    #[test]
    fn heat_only_when_k_zero_on_horizontal_mode() {
        let gr = g(32, true);
        let f = SpectralField::real_mode(gr, 1, 0).unwrap();
        let nu = 0.01;
        let out = step_period(&f, PhasePair::new(1.0, 2.0), 0.0, nu, 8).unwrap();
        assert!((out.get(1, 0).re - (-2.0 * nu).exp()).abs() < 1e-12);
    }

    #[test]
    fn pullback_is_bilinear_transpose() {
        for d in [false, true] {
            let gr = g(32, d);
            let tr = Transport::new(gr);
            let sp = ShearPair::chirikov(2.0);
            let w = PhasePair::new(0.9, 4.1);
            let a = SpectralField::real_mode(gr, 1, 2).unwrap();
            let b = SpectralField::single_mode(gr, -3, 1, C::new(0.3, -0.2)).unwrap();
            let lhs = tr.step_period(&a, sp, w, 0.0, 1).0.pairing(&b);
            let rhs = a.pairing(&tr.pullback_period(&b, sp, w));
            assert!((lhs - rhs).norm() < 1e-13, "{lhs} {rhs}");
        }
    }
}
