//! Stationary scattering states of a piecewise-constant barrier.
//!
//! Solutions are continued from right to left through each constant piece
//! with the real propagator of `psi'' = -2 (E - V) psi`. Inside an evanescent
//! piece the continuation direction is the growing one, and the exponential
//! growth is factored out into a running logarithm, so opaque barriers never
//! overflow.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{energy, BarrierSpec, ComplexField, Piece};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Exponent above which hyperbolic functions are evaluated in scaled form.
const SCALE_THRESHOLD: f64 = 20.0;

/// Propagator over a step `s` in a piece where `z = 2 (E - V)`.
///
/// Returns `(c, s_fn, zs, log)` with `psi(x+s) = c psi + s_fn psi'` and
/// `psi'(x+s) = -zs psi + c psi'`, all multiplied by `exp(-log)`.
#[inline]
pub(crate) fn propagator(z: f64, s: f64) -> (f64, f64, f64, f64) {
    if z > 0.0 {
        let q = z.sqrt();
        let (sn, cs) = (q * s).sin_cos();
        (cs, sn / q, q * sn, 0.0)
    } else if z < 0.0 {
        let kappa = (-z).sqrt();
        let x = kappa * s;
        if x.abs() > SCALE_THRESHOLD {
            let e = (-2.0 * x.abs()).exp();
            let ch = 0.5 * (1.0 + e);
            let sh = 0.5 * (1.0 - e) * x.signum();
            (ch, sh / kappa, -kappa * sh, x.abs())
        } else {
            let (sh, ch) = (x.sinh(), x.cosh());
            (ch, sh / kappa, -kappa * sh, 0.0)
        }
    } else {
        (1.0, s, 0.0, 0.0)
    }
}

/// A solution of the stationary equation on `[x_0, x_n]`, stored as scaled
/// `(psi, psi')` pairs at the piece boundaries. True values are
/// `vals[i] * exp(logs[i])`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Trajectory {
    e: f64,
    xs: Vec<f64>,
    heights: Vec<f64>,
    vals: Vec<[Complex64; 2]>,
    logs: Vec<f64>,
}

impl Trajectory {
    /// Continue `init` (given at the right end of the last piece) leftward
    /// through `pieces`, which must be contiguous and ordered.
    pub(crate) fn leftward(pieces: &[Piece], e: f64, init: [Complex64; 2]) -> Self {
        let n = pieces.len();
        let mut xs = Vec::with_capacity(n + 1);
        xs.push(pieces[0].left);
        xs.extend(pieces.iter().map(|p| p.right));
        let heights: Vec<f64> = pieces.iter().map(|p| p.height).collect();
        let mut vals = vec![[Complex64::new(0.0, 0.0); 2]; n + 1];
        let mut logs = vec![0.0; n + 1];
        let (v, l) = renormalize(init);
        vals[n] = v;
        logs[n] = l;
        for i in (0..n).rev() {
            let z = 2.0 * (e - heights[i]);
            let (c, s, zs, log) = propagator(z, xs[i] - xs[i + 1]);
            let [p, dp] = vals[i + 1];
            let (v, l) = renormalize([c * p + s * dp, -zs * p + c * dp]);
            vals[i] = v;
            logs[i] = logs[i + 1] + log + l;
        }
        Trajectory { e, xs, heights, vals, logs }
    }

    /// Scaled `(psi, psi')` at the left end and its log scale.
    pub(crate) fn at_left(&self) -> ([Complex64; 2], f64) {
        (self.vals[0], self.logs[0])
    }

    /// Scaled `(psi, psi')` at `x` inside `[left, right]`, with log scale.
    pub(crate) fn eval(&self, x: f64) -> ([Complex64; 2], f64) {
        let n = self.heights.len();
        let i = self.xs.partition_point(|&b| b < x).clamp(1, n);
        if x == self.xs[i] {
            return (self.vals[i], self.logs[i]);
        }
        let z = 2.0 * (self.e - self.heights[i - 1]);
        let (c, s, zs, log) = propagator(z, x - self.xs[i]);
        let [p, dp] = self.vals[i];
        ([c * p + s * dp, -zs * p + c * dp], self.logs[i] + log)
    }
}

fn renormalize(v: [Complex64; 2]) -> ([Complex64; 2], f64) {
    let m = v[0].norm().max(v[1].norm());
    if m == 0.0 || !m.is_finite() {
        return (v, 0.0);
    }
    ([v[0] / m, v[1] / m], m.ln())
}

/// Scattering solution with unit incident amplitude from the left:
/// `e^{ikx} + B e^{-ikx}` for `x <= a` and `A e^{ikx}` for `x >= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringSolution {
    k: f64,
    a: f64,
    b: f64,
    a_out: Complex64,
    b_out: Complex64,
    inner: Trajectory,
    /// True values inside are `scaled * exp(log - log_a) * norm`.
    norm: Complex64,
    log_a: f64,
}

impl ScatteringSolution {
    pub fn new(spec: &BarrierSpec, k: f64) -> Result<Self> {
        Self::from_pieces(spec.pieces(), k)
    }

    /// Works for any contiguous list of pieces, symmetric or not.
    pub(crate) fn from_pieces(pieces: &[Piece], k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidParameter(format!("wavenumber k = {k} must be > 0")));
        }
        let a = pieces[0].left;
        let b = pieces[pieces.len() - 1].right;
        let eb = Complex64::from_polar(1.0, k * b);
        let inner = Trajectory::leftward(pieces, energy(k), [eb, I * k * eb]);
        let ([p, dp], log_a) = inner.at_left();
        let ea = Complex64::from_polar(1.0, -k * a);
        let inc = 0.5 * (p + dp / (I * k)) * ea;
        let refl = 0.5 * (p - dp / (I * k)) / ea;
        let norm = 1.0 / inc;
        Ok(ScatteringSolution {
            k,
            a,
            b,
            a_out: norm * (-log_a).exp(),
            b_out: refl * norm,
            inner,
            norm,
            log_a,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn energy(&self) -> f64 {
        energy(self.k)
    }

    pub fn a_out(&self) -> Complex64 {
        self.a_out
    }

    pub fn b_out(&self) -> Complex64 {
        self.b_out
    }

    pub fn transmission(&self) -> f64 {
        self.a_out.norm_sqr()
    }

    pub fn reflection(&self) -> f64 {
        self.b_out.norm_sqr()
    }

    /// `(psi, psi')` at `x`.
    pub fn eval(&self, x: f64) -> (Complex64, Complex64) {
        let k = self.k;
        if x <= self.a {
            let e = Complex64::from_polar(1.0, k * x);
            let r = self.b_out * e.conj();
            (e + r, I * k * (e - r))
        } else if x >= self.b {
            let t = self.a_out * Complex64::from_polar(1.0, k * x);
            (t, I * k * t)
        } else {
            let ([p, dp], log) = self.inner.eval(x);
            let f = self.norm * (log - self.log_a).exp();
            (p * f, dp * f)
        }
    }

    pub fn psi(&self, x: f64) -> Complex64 {
        self.eval(x).0
    }

    pub fn sample(&self, xs: &[f64]) -> Vec<Complex64> {
        xs.iter().map(|&x| self.psi(x)).collect()
    }
}

/// Scattering amplitudes together with `psi_full` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryState {
    pub k: f64,
    pub a_out: Complex64,
    pub b_out: Complex64,
    pub t: f64,
    pub r: f64,
    pub psi_full: ComplexField,
    pub solution: ScatteringSolution,
}

impl StationaryState {
    /// The same state with incident amplitude `c`; only the samples change.
    pub fn scaled(&self, c: Complex64) -> StationaryState {
        StationaryState { psi_full: self.psi_full.scaled(c), ..self.clone() }
    }
}

pub fn solve_stationary(spec: &BarrierSpec, k: f64, xgrid: Arc<[f64]>) -> Result<StationaryState> {
    let solution = ScatteringSolution::new(spec, k)?;
    let psi_full = ComplexField::new(xgrid.clone(), solution.sample(&xgrid))?;
    Ok(StationaryState {
        k,
        a_out: solution.a_out(),
        b_out: solution.b_out(),
        t: solution.transmission(),
        r: solution.reflection(),
        psi_full,
        solution,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub k: f64,
    pub t: f64,
    pub r: f64,
    /// `arg A_out`, unwrapped along the sweep.
    pub phase: f64,
}

pub fn scattering_sweep(spec: &BarrierSpec, kgrid: &[f64]) -> Result<Vec<SweepPoint>> {
    if kgrid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut out: Vec<SweepPoint> = Vec::with_capacity(kgrid.len());
    for &k in kgrid {
        let s = ScatteringSolution::new(spec, k)?;
        let mut phase = s.a_out().arg();
        if let Some(prev) = out.last() {
            phase += 2.0 * PI * ((prev.phase - phase) / (2.0 * PI)).round();
        }
        out.push(SweepPoint { k, t: s.transmission(), r: s.reflection(), phase });
    }
    Ok(out)
}

/// Textbook transmission through a single rectangular barrier, kept
/// independent of the propagator code for cross-checks.
pub fn rectangular_transmission(v0: f64, d: f64, e: f64) -> f64 {
    if e < v0 {
        let kappa = (2.0 * (v0 - e)).sqrt();
        let sh = (kappa * d).sinh();
        1.0 / (1.0 + v0 * v0 * sh * sh / (4.0 * e * (v0 - e)))
    } else if e > v0 {
        let q = (2.0 * (e - v0)).sqrt();
        let sn = (q * d).sin();
        1.0 / (1.0 + v0 * v0 * sn * sn / (4.0 * e * (e - v0)))
    } else {
        1.0 / (1.0 + v0 * d * d / 2.0)
    }
}
