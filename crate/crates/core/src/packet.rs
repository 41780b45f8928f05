//! Time-dependent packets assembled from stationary families.
//!
//! A packet is `psi(x, t) = sum_j c_j(t) psi(x, k_j)` with
//! `c_j(t) = w_j A(k_j) e^{-i E_j t} / sqrt(2 pi)`. Outside `[a, b]` every
//! field is a finite sum of plane waves, so norms and overlaps there are
//! integrated exactly; inside `[a, b]` the fields are tabulated on a fine
//! uniform grid that contains the midpoint.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{energy, BarrierSpec, ComplexField, SpectralAmplitude, Spin};
use crate::outer::{OverlapKernel, WaveSpectrum};
use crate::quadrature::{aligned_grid, simpson_weights, uniform, weighted_sum};
use crate::splitter::SplitSolution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketResolution {
    /// Spectral samples (odd).
    pub nk: usize,
    /// Maximum spacing of the global x-grid used for profiles.
    pub dx: f64,
    /// Simpson intervals across `[a, b]`, a multiple of 4 so both halves are whole panels.
    pub region_intervals: usize,
    /// Time step in units of the inverse energy bandwidth.
    pub dt_factor: f64,
    /// Minimum half-extent of the x-domain in units of `l0`.
    pub span: f64,
}

impl Default for PacketResolution {
    fn default() -> Self {
        PacketResolution { nk: 801, dx: 0.1, region_intervals: 200, dt_factor: 0.05, span: 40.0 }
    }
}

impl PacketResolution {
    /// Every step divided by `factor`.
    pub fn refined(self, factor: usize) -> Self {
        let f = factor.max(1);
        PacketResolution {
            nk: (self.nk - 1) * f + 1,
            dx: self.dx / f as f64,
            region_intervals: self.region_intervals * f,
            dt_factor: self.dt_factor / f as f64,
            span: self.span,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nk < 5 || self.nk % 2 == 0 {
            return Err(Error::InvalidParameter(format!("nk = {} must be odd and >= 5", self.nk)));
        }
        if self.region_intervals < 4 || self.region_intervals % 4 != 0 {
            return Err(Error::InvalidParameter(format!(
                "region intervals = {} must be a positive multiple of 4",
                self.region_intervals
            )));
        }
        if !(self.dx > 0.0) || !(self.dt_factor > 0.0) || !(self.span > 0.0) {
            return Err(Error::InvalidParameter("dx, dt factor and span must be > 0".into()));
        }
        Ok(())
    }
}

/// Spatial width of a free Gaussian packet with initial width `l0` at time `t`.
pub fn free_width(l0: f64, t: f64) -> f64 {
    l0 * (1.0 + (t / (2.0 * l0 * l0)).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl TimeWindow {
    pub fn new(start: f64, end: f64, steps: usize) -> Result<Self> {
        if !(end > start) || steps == 0 {
            return Err(Error::InvalidParameter(format!("empty time window [{start}, {end}]")));
        }
        Ok(TimeWindow { start, end, steps })
    }

    /// Symmetric window `[-T_w, T_w]` long enough for the packet to travel
    /// from twelve widths left of the barrier to twelve widths right of it.
    /// The step resolves the largest energy difference present, or the
    /// Larmor period if that is faster.
    pub fn covering(spec: &BarrierSpec, amp: &SpectralAmplitude, omega_l: f64, dt_factor: f64) -> Self {
        let k0 = amp.k0();
        let mut t = (spec.b() + 12.0 * amp.l0()) / k0;
        for _ in 0..100 {
            let next = (spec.b() + 12.0 * free_width(amp.l0(), t)) / k0;
            if (next - t).abs() < 1e-12 * t {
                break;
            }
            t = next;
        }
        let rate = amp.energy_bandwidth().max(omega_l);
        let dt = dt_factor / rate;
        let steps = (2.0 * t / dt).ceil().max(1.0) as usize;
        TimeWindow { start: -t, end: t, steps }
    }

    pub fn dt(&self) -> f64 {
        (self.end - self.start) / self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let mut ts = uniform(self.start, self.end, self.steps);
        ts[0] = self.start;
        ts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Which {
    Full,
    Tr,
    Ref,
}

/// Grids and outer-region kernels shared by every family of one scenario.
#[derive(Debug)]
pub struct Geometry {
    a: f64,
    b: f64,
    xc: f64,
    x_lo: f64,
    x_hi: f64,
    region_xs: Vec<f64>,
    region_w: Vec<f64>,
    left: OverlapKernel,
    right: OverlapKernel,
    xgrid: Arc<[f64]>,
}

impl Geometry {
    pub fn new(spec: &BarrierSpec, amp: &SpectralAmplitude, window: &TimeWindow, res: &PacketResolution) -> Result<Self> {
        res.validate()?;
        let (a, b, xc) = (spec.a(), spec.b(), spec.midpoint());
        let t = window.start.abs().max(window.end.abs());
        let reach = amp.k_max() * t + 12.0 * free_width(amp.l0(), t);
        let ext = reach.max(res.span * amp.l0());
        let x_lo = (-ext).min(a - ext);
        let x_hi = b + ext;
        let mut region_xs = uniform(a, b, res.region_intervals);
        region_xs[res.region_intervals / 2] = xc;
        let region_w = simpson_weights(&region_xs);
        let n = amp.len();
        let left = OverlapKernel::new(amp.k_min(), amp.dk(), n, x_lo, a);
        let right = OverlapKernel::new(amp.k_min(), amp.dk(), n, b, x_hi);
        let xgrid: Arc<[f64]> = aligned_grid(a, b, x_lo, x_hi, res.dx).into();
        Ok(Geometry { a, b, xc, x_lo, x_hi, region_xs, region_w, left, right, xgrid })
    }

    pub fn xgrid(&self) -> &Arc<[f64]> {
        &self.xgrid
    }

    pub fn region_xs(&self) -> &[f64] {
        &self.region_xs
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x_lo, self.x_hi)
    }

    /// `int conj(f) g dx` over the whole domain.
    pub fn overlap(&self, f: &FieldAtTime, g: &FieldAtTime) -> Complex64 {
        let mut acc = self.region_overlap(f, g);
        if let (Some(fl), Some(gl)) = (&f.left, &g.left) {
            acc += self.left.overlap(fl, gl);
        }
        if let (Some(fr), Some(gr)) = (&f.right, &g.right) {
            acc += self.right.overlap(fr, gr);
        }
        acc
    }

    /// `int_a^b conj(f) g dx`.
    pub fn region_overlap(&self, f: &FieldAtTime, g: &FieldAtTime) -> Complex64 {
        f.region
            .iter()
            .zip(&g.region)
            .zip(&self.region_w)
            .map(|((u, v), w)| u.conj() * v * *w)
            .sum()
    }

    pub fn norm_sqr(&self, f: &FieldAtTime) -> f64 {
        self.overlap(f, f).re
    }

    pub fn region_norm_sqr(&self, f: &FieldAtTime) -> f64 {
        let dens: Vec<f64> = f.region.iter().map(|v| v.norm_sqr()).collect();
        weighted_sum(&self.region_w, &dens)
    }
}

/// One packet field at one time: samples on the barrier grid plus the
/// plane-wave spectra of its left and right outer parts.
#[derive(Debug, Clone)]
pub struct FieldAtTime {
    pub region: Vec<Complex64>,
    left: Option<WaveSpectrum>,
    right: Option<WaveSpectrum>,
}

/// Stationary family for one spin channel, with the tables needed to build
/// packets at any time.
#[derive(Debug, Clone)]
pub struct PacketFamily {
    spec: BarrierSpec,
    amplitude: SpectralAmplitude,
    spin: Option<Spin>,
    geometry: Arc<Geometry>,
    splits: Vec<SplitSolution>,
    a_out: Vec<Complex64>,
    b_out: Vec<Complex64>,
    a_in: Vec<Complex64>,
    b_in: Vec<Complex64>,
    /// Row-major `[node][k]` tables on the barrier grid.
    region_full: Vec<Complex64>,
    region_ref: Vec<Complex64>,
    window: TimeWindow,
}

impl PacketFamily {
    /// A self-contained family with its own geometry and default window.
    pub fn new(spec: &BarrierSpec, amplitude: &SpectralAmplitude, res: &PacketResolution) -> Result<Self> {
        let window = TimeWindow::covering(spec, amplitude, 0.0, res.dt_factor);
        let geometry = Arc::new(Geometry::new(spec, amplitude, &window, res)?);
        Self::with_geometry(spec, amplitude, None, geometry, window)
    }

    pub fn with_geometry(
        spec: &BarrierSpec,
        amplitude: &SpectralAmplitude,
        spin: Option<Spin>,
        geometry: Arc<Geometry>,
        window: TimeWindow,
    ) -> Result<Self> {
        if amplitude.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if spec.a() != geometry.a || spec.b() != geometry.b {
            return Err(Error::IncompatibleGrids("barrier edges differ from the geometry".into()));
        }
        let splits = amplitude
            .ks()
            .iter()
            .map(|&k| SplitSolution::new(spec, k))
            .collect::<Result<Vec<_>>>()?;
        let nk = splits.len();
        let nr = geometry.region_xs.len();
        let mut region_full = vec![Complex64::new(0.0, 0.0); nr * nk];
        let mut region_ref = region_full.clone();
        for (r, &x) in geometry.region_xs.iter().enumerate() {
            for (j, s) in splits.iter().enumerate() {
                region_full[r * nk + j] = s.psi_full(x);
                region_ref[r * nk + j] = s.psi_ref(x);
            }
        }
        Ok(PacketFamily {
            spec: spec.clone(),
            amplitude: amplitude.clone(),
            spin,
            a_out: splits.iter().map(|s| s.a_out()).collect(),
            b_out: splits.iter().map(|s| s.b_out()).collect(),
            a_in: splits.iter().map(|s| s.a_in()).collect(),
            b_in: splits.iter().map(|s| s.b_in()).collect(),
            geometry,
            splits,
            region_full,
            region_ref,
            window,
        })
    }

    pub fn spec(&self) -> &BarrierSpec {
        &self.spec
    }

    pub fn amplitude(&self) -> &SpectralAmplitude {
        &self.amplitude
    }

    pub fn spin(&self) -> Option<Spin> {
        self.spin
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geometry
    }

    pub fn window(&self) -> &TimeWindow {
        &self.window
    }

    pub fn splits(&self) -> &[SplitSolution] {
        &self.splits
    }

    /// `int A^2 T dk` and `int A^2 R dk`: the asymptotic channel weights.
    pub fn channel_weights(&self) -> (f64, f64) {
        let amp = &self.amplitude;
        let mut t = 0.0;
        let mut r = 0.0;
        for (((a, w), ao), bo) in amp.values().iter().zip(amp.weights()).zip(&self.a_out).zip(&self.b_out) {
            t += a * a * w * ao.norm_sqr();
            r += a * a * w * bo.norm_sqr();
        }
        (t, r)
    }

    /// Per wavenumber, `int_a^b |psi_tr|^2 dx` and `int_a^{x_c} |psi_ref|^2 dx`.
    pub fn region_densities(&self) -> (Vec<f64>, Vec<f64>) {
        let nk = self.splits.len();
        let mut d_tr = vec![0.0; nk];
        let mut d_ref = vec![0.0; nk];
        let rows = self.region_full.chunks_exact(nk).zip(self.region_ref.chunks_exact(nk));
        for ((full, refv), w) in rows.zip(&self.geometry.region_w) {
            for j in 0..nk {
                d_tr[j] += w * (full[j] - refv[j]).norm_sqr();
                d_ref[j] += w * refv[j].norm_sqr();
            }
        }
        (d_tr, d_ref)
    }

    /// `c_j(t)`.
    pub fn coefficients(&self, t: f64) -> Vec<Complex64> {
        let pref = 1.0 / (2.0 * PI).sqrt();
        let amp = &self.amplitude;
        amp.ks()
            .iter()
            .zip(amp.values())
            .zip(amp.weights())
            .map(|((&k, &a), &w)| Complex64::from_polar(a * w * pref, -energy(k) * t))
            .collect()
    }

    fn region_values(&self, table: &[Complex64], c: &[Complex64]) -> Vec<Complex64> {
        let nk = c.len();
        table.chunks_exact(nk).map(|row| row.iter().zip(c).map(|(p, q)| p * q).sum()).collect()
    }

    fn scaled(c: &[Complex64], by: &[Complex64]) -> Vec<Complex64> {
        c.iter().zip(by).map(|(x, y)| x * y).collect()
    }

    /// The field `which` at the time encoded by `c`.
    pub fn field(&self, which: Which, c: &[Complex64]) -> FieldAtTime {
        let g = &self.geometry;
        let m_ref = Self::scaled(c, &self.b_out);
        match which {
            Which::Full => FieldAtTime {
                region: self.region_values(&self.region_full, c),
                left: Some(g.left.spectrum(c, Some(&m_ref))),
                right: Some(g.right.spectrum(&Self::scaled(c, &self.a_out), None)),
            },
            Which::Ref => FieldAtTime {
                region: self.region_values(&self.region_ref, c),
                left: Some(g.left.spectrum(&Self::scaled(c, &self.b_in), Some(&m_ref))),
                right: None,
            },
            Which::Tr => {
                let full = self.region_values(&self.region_full, c);
                let refv = self.region_values(&self.region_ref, c);
                FieldAtTime {
                    region: full.iter().zip(&refv).map(|(f, r)| f - r).collect(),
                    left: Some(g.left.spectrum(&Self::scaled(c, &self.a_in), None)),
                    right: Some(g.right.spectrum(&Self::scaled(c, &self.a_out), None)),
                }
            }
        }
    }

    /// `psi_which(x, t)` on the global grid.
    pub fn assemble(&self, which: Which, t: f64) -> ComplexField {
        let c = self.coefficients(t);
        let xs = self.geometry.xgrid.clone();
        let zero = Complex64::new(0.0, 0.0);
        let (a, b, xc) = (self.geometry.a, self.geometry.b, self.geometry.xc);
        let ks = self.amplitude.ks();
        let nk = ks.len();
        let (p_left, m_left): (Vec<Complex64>, Vec<Complex64>) = match which {
            Which::Full => (c.clone(), Self::scaled(&c, &self.b_out)),
            Which::Tr => (Self::scaled(&c, &self.a_in), vec![zero; nk]),
            Which::Ref => (Self::scaled(&c, &self.b_in), Self::scaled(&c, &self.b_out)),
        };
        let p_right = match which {
            Which::Ref => vec![zero; nk],
            _ => Self::scaled(&c, &self.a_out),
        };
        let mut values = vec![zero; xs.len()];
        let h = xs[1] - xs[0];
        let step: Vec<Complex64> = ks.iter().map(|&k| Complex64::from_polar(1.0, k * h)).collect();
        let mut phase: Vec<Complex64> = Vec::new();
        let mut last: Option<usize> = None;
        for (i, &x) in xs.iter().enumerate() {
            if x > a && x < b {
                values[i] = match which {
                    Which::Full => self.splits.iter().zip(&c).map(|(s, q)| q * s.psi_full(x)).sum(),
                    Which::Ref if x >= xc => zero,
                    Which::Ref => self.splits.iter().zip(&c).map(|(s, q)| q * s.psi_ref(x)).sum(),
                    Which::Tr => self.splits.iter().zip(&c).map(|(s, q)| q * (s.psi_full(x) - s.psi_ref(x))).sum(),
                };
                last = None;
                continue;
            }
            // Plane waves by recurrence from the previous node, refreshed
            // every 64 nodes to bound rounding drift.
            match last {
                Some(j) if j + 1 == i && i % 64 != 0 => {
                    for (p, s) in phase.iter_mut().zip(&step) {
                        *p *= s;
                    }
                }
                _ => phase = ks.iter().map(|&k| Complex64::from_polar(1.0, k * x)).collect(),
            }
            last = Some(i);
            values[i] = if x <= a {
                phase
                    .iter()
                    .zip(p_left.iter().zip(&m_left))
                    .map(|(e, (p, m))| p * e + m * e.conj())
                    .sum()
            } else {
                phase.iter().zip(&p_right).map(|(e, p)| p * e).sum()
            };
        }
        ComplexField::new(xs, values).expect("global grid is strictly increasing")
    }
}

/// `(T_packet, R_packet) = (||psi_tr||^2, ||psi_ref||^2)` at time `t`.
pub fn packet_norms(family: &PacketFamily, t: f64) -> (f64, f64) {
    let c = family.coefficients(t);
    let g = family.geometry();
    (g.norm_sqr(&family.field(Which::Tr, &c)), g.norm_sqr(&family.field(Which::Ref, &c)))
}

pub fn assemble(family: &PacketFamily, which: Which, t: f64) -> ComplexField {
    family.assemble(which, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyTrace {
    pub times: Vec<f64>,
    /// `int_a^b |psi_tr|^2`.
    pub p_tr: Vec<f64>,
    /// `int_a^{x_c} |psi_ref|^2`.
    pub p_ref: Vec<f64>,
    pub n_tr: Vec<f64>,
    pub n_ref: Vec<f64>,
}

impl OccupancyTrace {
    pub fn max_drift(series: &[f64]) -> f64 {
        let (lo, hi) = series.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        hi - lo
    }

    /// Largest endpoint occupancy relative to the peak, over both channels.
    pub fn endpoint_ratio(&self) -> f64 {
        let ratio = |p: &[f64]| {
            let peak = p.iter().cloned().fold(0.0, f64::max);
            if peak == 0.0 {
                return 0.0;
            }
            p[0].max(p[p.len() - 1]) / peak
        };
        ratio(&self.p_tr).max(ratio(&self.p_ref))
    }
}

/// Endpoint occupancy above this fraction of the peak means the window is short.
pub const EPS_OCC: f64 = 1e-10;

pub fn occupancy_trace(family: &PacketFamily, times: &[f64]) -> OccupancyTrace {
    let g = family.geometry();
    let mut out = OccupancyTrace {
        times: times.to_vec(),
        p_tr: Vec::with_capacity(times.len()),
        p_ref: Vec::with_capacity(times.len()),
        n_tr: Vec::with_capacity(times.len()),
        n_ref: Vec::with_capacity(times.len()),
    };
    for &t in times {
        let c = family.coefficients(t);
        let tr = family.field(Which::Tr, &c);
        let rf = family.field(Which::Ref, &c);
        out.p_tr.push(g.region_norm_sqr(&tr));
        out.p_ref.push(g.region_norm_sqr(&rf));
        out.n_tr.push(g.norm_sqr(&tr));
        out.n_ref.push(g.norm_sqr(&rf));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_gaussian_amplitude;
    use crate::model::SpectralAmplitude;

    fn coarse() -> PacketResolution {
        PacketResolution { nk: 401, dx: 0.1, region_intervals: 100, dt_factor: 0.05, span: 40.0 }
    }

    #[test]
    fn free_packet_moments() {
        let spec = BarrierSpec::new(5.0, 6.0, vec![], 0.0).unwrap();
        let amp = SpectralAmplitude::gaussian(2f64.sqrt(), 10.0, 8.0, 401).unwrap();
        let fam = PacketFamily::new(&spec, &amp, &coarse()).unwrap();
        let psi = fam.assemble(Which::Full, 0.0);
        let (mean, var) = psi.position_moments();
        assert!(mean.abs() < 0.01 * 10.0, "mean {mean}");
        assert!((var.sqrt() / 10.0 - 1.0).abs() < 0.01, "width {}", var.sqrt());
        let tau = 100.0;
        let psi = fam.assemble(Which::Full, tau);
        let (mean, _) = psi.position_moments();
        assert!((mean / (2f64.sqrt() * tau) - 1.0).abs() < 0.01);
        let (t, r) = packet_norms(&fam, 30.0);
        assert!((t - 1.0).abs() < 1e-8 && r < 1e-20, "{t} {r}");
    }

    #[test]
    fn assembled_norm_agrees_with_exact_outer_integrals() {
        let spec = BarrierSpec::rectangular(5.0, 6.0, 2.0).unwrap();
        let amp = SpectralAmplitude::gaussian(2f64.sqrt(), 10.0, 8.0, 401).unwrap();
        let fam = PacketFamily::new(&spec, &amp, &coarse()).unwrap();
        for t in [-20.0, 3.0, 40.0] {
            let c = fam.coefficients(t);
            for which in [Which::Full, Which::Tr, Which::Ref] {
                let exact = fam.geometry().norm_sqr(&fam.field(which, &c));
                let sampled = fam.assemble(which, t).norm_sqr();
                assert!((exact - sampled).abs() < 2e-3, "{which:?} t={t}: {exact} vs {sampled}");
            }
        }
    }

    #[test]
    fn late_transmitted_norm_matches_channel_weight() {
        let spec = BarrierSpec::rectangular(5.0, 6.0, 2.0).unwrap();
        let amp = build_gaussian_amplitude(2f64.sqrt(), 20.0, 8.0).unwrap();
        let fam = PacketFamily::new(&spec, &amp, &PacketResolution::default()).unwrap();
        let (tw, _) = fam.channel_weights();
        let late = fam.window().end;
        let psi = fam.assemble(Which::Full, late);
        let beyond = psi.norm_sqr_on(6.0, f64::INFINITY);
        assert!((beyond - tw).abs() < 1e-4, "{beyond} vs {tw}");
    }

    #[test]
    fn reference_field_vanishes_beyond_midpoint() {
        let spec = BarrierSpec::rectangular(5.0, 6.0, 2.0).unwrap();
        let amp = SpectralAmplitude::gaussian(2f64.sqrt(), 10.0, 8.0, 201).unwrap();
        let fam = PacketFamily::new(&spec, &amp, &coarse()).unwrap();
        let psi = fam.assemble(Which::Ref, 0.0);
        for (x, v) in psi.xs().iter().zip(psi.values()) {
            if *x >= 5.5 {
                assert_eq!(*v, Complex64::new(0.0, 0.0));
            }
        }
        let full = fam.assemble(Which::Full, 0.0);
        let tr = fam.assemble(Which::Tr, 0.0);
        for ((f, t), r) in full.values().iter().zip(tr.values()).zip(psi.values()) {
            assert!((f - t - r).norm() < 1e-8);
        }
    }

    #[test]
    fn window_covers_interaction() {
        let spec = BarrierSpec::rectangular(5.0, 6.0, 2.0).unwrap();
        let amp = build_gaussian_amplitude(2f64.sqrt(), 40.0, 8.0).unwrap();
        let w = TimeWindow::covering(&spec, &amp, 0.0, 0.05);
        let sigma = free_width(40.0, w.end);
        assert!((w.end * 2f64.sqrt() - 6.0 - 12.0 * sigma).abs() < 1e-8);
        assert!(w.dt() <= 0.05 / amp.energy_bandwidth() + 1e-12);
        let times = w.times();
        assert_eq!(times.len(), w.steps + 1);
        assert_eq!(*times.last().unwrap(), w.end);
    }

    #[test]
    fn refinement_scales_steps() {
        let r = PacketResolution::default().refined(2);
        assert_eq!(r.nk, 1601);
        assert_eq!(r.region_intervals, 400);
        assert!((r.dx - 0.05).abs() < 1e-15);
        assert!(PacketResolution { nk: 400, ..PacketResolution::default() }.validate().is_err());
    }
}
