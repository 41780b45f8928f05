//! Barrier, field, spectral amplitude and sampled-field types.
//!
//! Everything is expressed in natural units with `hbar = m = 1`: energies are
//! inverse times, the kinetic energy of wavenumber `k` is `k^2 / 2`, and the
//! group velocity is `k`. The magnetic field enters only through the Larmor
//! frequency `omega_L = 2 mu B / hbar`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{trapezoid, trapezoid_complex, trapezoid_weights};

/// Kinetic energy `k^2 / 2`.
#[inline]
pub fn energy(k: f64) -> f64 {
    0.5 * k * k
}

/// One mirrored pair of constant-height segments. The segment covers
/// `|x - x_c| - offset` within `half_width`; an `offset` of zero gives a single
/// segment centered on the midpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub offset: f64,
    pub half_width: f64,
    pub height: f64,
}

/// A constant-potential interval of the partition of `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub left: f64,
    pub right: f64,
    pub height: f64,
}

impl Piece {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }
}

/// Symmetric piecewise-constant potential supported on `[a, b]`.
///
/// Parts of `[a, b]` not covered by a segment sit at `floor` (zero for
/// ordinary barriers; the Zeeman shift moves it together with the segments).
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSpec {
    a: f64,
    b: f64,
    segments: Vec<Segment>,
    floor: f64,
    pieces: Vec<Piece>,
}

impl BarrierSpec {
    pub fn new(a: f64, b: f64, segments: Vec<Segment>, floor: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidBarrier(format!("left edge a = {a} must be > 0")));
        }
        if !(b > a) || !b.is_finite() {
            return Err(Error::InvalidBarrier(format!("right edge b = {b} must exceed a = {a}")));
        }
        if !floor.is_finite() {
            return Err(Error::InvalidBarrier("floor must be finite".into()));
        }
        let half = 0.5 * (b - a);
        let tol = 1e-12 * (1.0 + half);
        for (i, s) in segments.iter().enumerate() {
            if !(s.half_width > 0.0) || !(s.offset >= 0.0) || !s.height.is_finite() {
                return Err(Error::InvalidBarrier(format!(
                    "segment {i}: need offset >= 0, half_width > 0, finite height"
                )));
            }
            if s.offset + s.half_width > half + tol {
                return Err(Error::InvalidBarrier(format!("segment {i} extends beyond [a, b]")));
            }
            if s.offset > 0.0 && s.offset - s.half_width < -tol {
                return Err(Error::InvalidBarrier(format!(
                    "segment {i} overlaps its mirror image; use offset 0 for centered segments"
                )));
            }
        }
        let mut spans: Vec<(f64, f64)> = segments
            .iter()
            .map(|s| ((s.offset - s.half_width).max(0.0), s.offset + s.half_width))
            .collect();
        spans.sort_by(|x, y| x.0.total_cmp(&y.0));
        for w in spans.windows(2) {
            if w[1].0 < w[0].1 - tol {
                return Err(Error::InvalidBarrier("segments overlap".into()));
            }
        }
        let mut spec = BarrierSpec { a, b, segments, floor, pieces: Vec::new() };
        spec.pieces = spec.build_pieces();
        Ok(spec)
    }

    pub fn rectangular(a: f64, b: f64, height: f64) -> Result<Self> {
        let half = 0.5 * (b - a);
        Self::new(a, b, vec![Segment { offset: 0.0, half_width: half, height }], 0.0)
    }

    /// Staircase approximation of a smooth symmetric profile `profile(|x - x_c|)`
    /// with `steps` constant steps on each side of the midpoint.
    pub fn staircase(a: f64, b: f64, steps: usize, profile: impl Fn(f64) -> f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidBarrier("staircase needs at least one step".into()));
        }
        let h = 0.5 * (b - a) / steps as f64;
        let segments = (0..steps)
            .map(|i| {
                let offset = (i as f64 + 0.5) * h;
                Segment { offset, half_width: 0.5 * h, height: profile(offset) }
            })
            .collect();
        Self::new(a, b, segments, 0.0)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Ordered constant pieces covering `[a, b]`. The midpoint is always a
    /// piece boundary.
    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn max_height(&self) -> f64 {
        self.pieces.iter().map(|p| p.height).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `V(x)`; zero outside `[a, b]`.
    pub fn value(&self, x: f64) -> f64 {
        let xi = (x - self.midpoint()).abs();
        if xi > 0.5 * self.width() {
            return 0.0;
        }
        self.value_at_distance(xi)
    }

    fn value_at_distance(&self, xi: f64) -> f64 {
        self.segments
            .iter()
            .find(|s| (xi - s.offset).abs() <= s.half_width)
            .map_or(self.floor, |s| s.height)
    }

    fn build_pieces(&self) -> Vec<Piece> {
        let half = 0.5 * self.width();
        let tol = 1e-12 * (1.0 + half);
        let mut cuts = vec![0.0, half];
        for s in &self.segments {
            cuts.push((s.offset - s.half_width).max(0.0));
            cuts.push((s.offset + s.half_width).min(half));
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|x, y| (*x - *y).abs() <= tol);
        if let Some(last) = cuts.last_mut() {
            *last = half;
        }
        let xc = self.midpoint();
        let mut right = Vec::with_capacity(cuts.len());
        for w in cuts.windows(2) {
            let height = self.value_at_distance(0.5 * (w[0] + w[1]));
            right.push((w[0], w[1], height));
        }
        let mut pieces: Vec<Piece> = right
            .iter()
            .rev()
            .map(|&(lo, hi, height)| Piece { left: xc - hi, right: xc - lo, height })
            .collect();
        pieces.extend(right.iter().map(|&(lo, hi, height)| Piece { left: xc + lo, right: xc + hi, height }));
        pieces[0].left = self.a;
        let n = pieces.len();
        pieces[n - 1].right = self.b;
        pieces
    }

    /// Same geometry with every height inside `[a, b]` shifted by `delta`.
    pub fn shifted(&self, delta: f64) -> BarrierSpec {
        let segments = self
            .segments
            .iter()
            .map(|s| Segment { height: s.height + delta, ..*s })
            .collect();
        BarrierSpec::new(self.a, self.b, segments, self.floor + delta)
            .expect("shifting heights keeps a valid geometry")
    }
}

pub fn barrier_value(spec: &BarrierSpec, x: f64) -> f64 {
    spec.value(x)
}

/// Where the (z-directed) magnetic field is switched on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldRegion {
    /// The barrier interval `[a, b]`.
    Barrier,
    /// An arbitrary interval, used by the field-placement probe.
    Interval { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSpec {
    pub omega_l: f64,
    pub region: FieldRegion,
}

impl FieldSpec {
    pub fn new(omega_l: f64) -> Result<Self> {
        Self::with_region(omega_l, FieldRegion::Barrier)
    }

    pub fn with_region(omega_l: f64, region: FieldRegion) -> Result<Self> {
        if !(omega_l >= 0.0) || !omega_l.is_finite() {
            return Err(Error::InvalidParameter(format!("omega_L = {omega_l} must be >= 0")));
        }
        if let FieldRegion::Interval { lo, hi } = region {
            if !(hi > lo) {
                return Err(Error::InvalidParameter(format!("field region [{lo}, {hi}] is empty")));
            }
        }
        Ok(FieldSpec { omega_l, region })
    }

    pub fn zero() -> Self {
        FieldSpec { omega_l: 0.0, region: FieldRegion::Barrier }
    }

    /// `[lo, hi]` of the field for a given barrier.
    pub fn interval(&self, spec: &BarrierSpec) -> (f64, f64) {
        match self.region {
            FieldRegion::Barrier => (spec.a(), spec.b()),
            FieldRegion::Interval { lo, hi } => (lo, hi),
        }
    }

    /// Zeeman shift of the potential seen by `spin` inside the field region.
    pub fn shift(&self, spin: Spin) -> f64 {
        spin.sign() * 0.5 * self.omega_l
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    /// Sign of the Zeeman shift: the barrier is lowered for spin up.
    pub fn sign(self) -> f64 {
        match self {
            Spin::Up => -1.0,
            Spin::Down => 1.0,
        }
    }
}

/// Potential seen by one spin channel when the field fills `[a, b]`:
/// heights move by `-omega_L/2` for spin up and `+omega_L/2` for spin down.
pub fn effective_barrier(spec: &BarrierSpec, field: &FieldSpec, spin: Spin) -> Result<BarrierSpec> {
    match field.region {
        FieldRegion::Barrier => Ok(spec.shifted(field.shift(spin))),
        FieldRegion::Interval { .. } => Err(Error::InvalidParameter(
            "effective barriers exist only for a field confined to [a, b]".into(),
        )),
    }
}

/// Real Gaussian spectral amplitude `A(k)` sampled on a uniform grid.
///
/// `A(k)^2` has standard deviation `sigma_k = 1 / (2 l0)`, so the free packet
/// built from it has position variance `l0^2` when centered at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAmplitude {
    k0: f64,
    l0: f64,
    sigma_k: f64,
    truncation: f64,
    ks: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<f64>,
    scale: f64,
}

/// Smallest wavenumber ever placed on a spectral grid.
pub const K_FLOOR: f64 = 1e-6;

pub const DEFAULT_NK: usize = 801;

pub fn build_gaussian_amplitude(k0: f64, l0: f64, truncation: f64) -> Result<SpectralAmplitude> {
    SpectralAmplitude::gaussian(k0, l0, truncation, DEFAULT_NK)
}

impl SpectralAmplitude {
    pub fn gaussian(k0: f64, l0: f64, truncation: f64, nk: usize) -> Result<Self> {
        if !(k0 > 0.0) || !k0.is_finite() {
            return Err(Error::InvalidParameter(format!("k0 = {k0} must be > 0")));
        }
        if !(l0 > 0.0) || !l0.is_finite() {
            return Err(Error::InvalidParameter(format!("l0 = {l0} must be > 0")));
        }
        if !(truncation >= 4.0) {
            return Err(Error::InvalidParameter(format!("truncation = {truncation} must be >= 4")));
        }
        if nk < 3 || nk % 2 == 0 {
            return Err(Error::InvalidParameter(format!("nk = {nk} must be odd and >= 3")));
        }
        let sigma_k = 0.5 / l0;
        let lo = k0 - truncation * sigma_k;
        if lo <= 0.0 {
            return Err(Error::SpectrumReachesZero);
        }
        let lo = lo.max(K_FLOOR);
        let hi = k0 + truncation * sigma_k;
        let dk = (hi - lo) / (nk - 1) as f64;
        let mid = (nk - 1) / 2;
        let ks: Vec<f64> = (0..nk)
            .map(|j| if j == mid { k0 } else { lo + j as f64 * dk })
            .collect();
        let weights = trapezoid_weights(&ks);
        let raw: Vec<f64> = ks
            .iter()
            .map(|&k| (-(k - k0).powi(2) / (4.0 * sigma_k * sigma_k)).exp())
            .collect();
        let norm: f64 = raw.iter().zip(&weights).map(|(a, w)| a * a * w).sum();
        let scale = 1.0 / norm.sqrt();
        let values = raw.iter().map(|a| a * scale).collect();
        Ok(SpectralAmplitude { k0, l0, sigma_k, truncation, ks, weights, values, scale })
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn l0(&self) -> f64 {
        self.l0
    }

    pub fn sigma_k(&self) -> f64 {
        self.sigma_k
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn ks(&self) -> &[f64] {
        &self.ks
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }

    pub fn k_min(&self) -> f64 {
        self.ks[0]
    }

    pub fn k_max(&self) -> f64 {
        self.ks[self.ks.len() - 1]
    }

    pub fn dk(&self) -> f64 {
        (self.k_max() - self.k_min()) / (self.len() - 1) as f64
    }

    pub fn energies(&self) -> Vec<f64> {
        self.ks.iter().map(|&k| energy(k)).collect()
    }

    /// `E_max - E_min` over the grid.
    pub fn energy_bandwidth(&self) -> f64 {
        energy(self.k_max()) - energy(self.k_min())
    }

    /// `A(k)` off the grid; zero outside the truncated support.
    pub fn value_at(&self, k: f64) -> f64 {
        if k < self.k_min() || k > self.k_max() {
            return 0.0;
        }
        self.scale * (-(k - self.k0).powi(2) / (4.0 * self.sigma_k * self.sigma_k)).exp()
    }

    /// Quadrature of `f(k) A(k)^2`.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.ks
            .iter()
            .zip(&self.values)
            .zip(&self.weights)
            .map(|((&k, &a), &w)| f(k) * a * a * w)
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.expectation(|_| 1.0)
    }

    pub fn mean_k(&self) -> f64 {
        self.expectation(|k| k)
    }

    /// `<x^2>` of the packet at `t = 0`, i.e. `int A'(k)^2 dk`.
    pub fn position_variance(&self) -> f64 {
        let s2 = self.sigma_k * self.sigma_k;
        self.expectation(|k| ((k - self.k0) / (2.0 * s2)).powi(2))
    }

    /// Free packet `(2 pi)^{-1/2} int A(k) e^{i(kx - E t)} dk` at one point.
    pub fn free_packet(&self, x: f64, t: f64) -> Complex64 {
        let pref = 1.0 / (2.0 * PI).sqrt();
        self.ks
            .iter()
            .zip(&self.values)
            .zip(&self.weights)
            .map(|((&k, &a), &w)| Complex64::from_polar(a * w * pref, k * x - energy(k) * t))
            .sum()
    }
}

/// Complex samples on an increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    xs: Arc<[f64]>,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(xs: Arc<[f64]>, values: Vec<Complex64>) -> Result<Self> {
        if xs.len() != values.len() {
            return Err(Error::IncompatibleGrids(format!(
                "{} grid points but {} samples",
                xs.len(),
                values.len()
            )));
        }
        if xs.len() < 2 || !xs.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::IncompatibleGrids("grid must be strictly increasing".into()));
        }
        Ok(ComplexField { xs, values })
    }

    pub fn from_fn(xs: Arc<[f64]>, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = xs.iter().map(|&x| f(x)).collect();
        Self::new(xs, values)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn grid(&self) -> &Arc<[f64]> {
        &self.xs
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &ComplexField) -> bool {
        Arc::ptr_eq(&self.xs, &other.xs) || self.xs == other.xs
    }

    pub fn norm_sqr(&self) -> f64 {
        let dens: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        trapezoid(&self.xs, &dens)
    }

    /// `int_lo^hi |psi|^2 dx` using the nodes inside `[lo, hi]`.
    pub fn norm_sqr_on(&self, lo: f64, hi: f64) -> f64 {
        let (i, j) = self.node_range(lo, hi);
        if j <= i + 1 {
            return 0.0;
        }
        let dens: Vec<f64> = self.values[i..j].iter().map(|v| v.norm_sqr()).collect();
        trapezoid(&self.xs[i..j], &dens)
    }

    /// `int conj(self) other dx`.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        if !self.same_grid(other) {
            return Err(Error::IncompatibleGrids("inner product of fields on different grids".into()));
        }
        let prod: Vec<Complex64> = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).collect();
        Ok(trapezoid_complex(&self.xs, &prod))
    }

    pub fn inner_on(&self, other: &ComplexField, lo: f64, hi: f64) -> Result<Complex64> {
        if !self.same_grid(other) {
            return Err(Error::IncompatibleGrids("inner product of fields on different grids".into()));
        }
        let (i, j) = self.node_range(lo, hi);
        if j <= i + 1 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let prod: Vec<Complex64> =
            self.values[i..j].iter().zip(&other.values[i..j]).map(|(a, b)| a.conj() * b).collect();
        Ok(trapezoid_complex(&self.xs[i..j], &prod))
    }

    /// Half-open index range of the nodes inside `[lo, hi]`.
    pub fn node_range(&self, lo: f64, hi: f64) -> (usize, usize) {
        let scale = [lo, hi].iter().filter(|v| v.is_finite()).fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * scale;
        let i = self.xs.partition_point(|&x| x < lo - tol);
        let j = self.xs.partition_point(|&x| x <= hi + tol);
        (i, j)
    }

    /// `<x>` and `<x^2> - <x>^2` of `|psi|^2`, normalized.
    pub fn position_moments(&self) -> (f64, f64) {
        let dens: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        let n = trapezoid(&self.xs, &dens);
        let xd: Vec<f64> = self.xs.iter().zip(&dens).map(|(x, d)| x * d).collect();
        let x2d: Vec<f64> = self.xs.iter().zip(&dens).map(|(x, d)| x * x * d).collect();
        let mean = trapezoid(&self.xs, &xd) / n;
        let var = trapezoid(&self.xs, &x2d) / n - mean * mean;
        (mean, var)
    }

    pub fn scaled(&self, c: Complex64) -> ComplexField {
        ComplexField { xs: self.xs.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn max_abs_diff(&self, other: &ComplexField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// Two-component spinor field `(psi_up, psi_down)` on one grid.
///
/// Components are stored without the `1/sqrt(2)` prefactor of the initial
/// state; spin expectations are always normalized by the total weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub up: ComplexField,
    pub down: ComplexField,
}

impl SpinorField {
    pub fn new(up: ComplexField, down: ComplexField) -> Result<Self> {
        if !up.same_grid(&down) {
            return Err(Error::IncompatibleGrids("spinor components on different grids".into()));
        }
        Ok(SpinorField { up, down })
    }

    pub fn xs(&self) -> &[f64] {
        self.up.xs()
    }
}
