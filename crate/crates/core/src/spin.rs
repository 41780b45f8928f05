//! Bloch vectors of the full, transmitted and reflected subensembles.
//!
//! The transverse spin is read from `z = int conj(psi_down) psi_up dx`:
//! `S_x = Re z / N`, `S_y = Im z / N`, `S_z = (|psi_up|^2 - |psi_down|^2) / 2N`
//! with `N = |psi_up|^2 + |psi_down|^2`. With the field lowering the barrier
//! for spin up, this orientation makes the azimuth advance at the rate
//! `omega_L` times the barrier occupancy.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{effective_barrier, BarrierSpec, FieldSpec, SpectralAmplitude, Spin};
use crate::packet::{FieldAtTime, Geometry, PacketFamily, PacketResolution, TimeWindow, Which};

/// Reflected subensembles lighter than this are treated as absent.
pub const EPS_R: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
    pub theta: f64,
    pub phi: f64,
}

impl BlochState {
    fn from_moments(z: Complex64, n_up: f64, n_dn: f64) -> Self {
        let nw = n_up + n_dn;
        let sx = z.re / nw;
        let sy = z.im / nw;
        let sz = 0.5 * (n_up - n_dn) / nw;
        BlochState { sx, sy, sz, theta: (2.0 * sz).clamp(-1.0, 1.0).acos(), phi: sy.atan2(sx) }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.sx * self.sx + self.sy * self.sy + self.sz * self.sz
    }
}

/// Two spin channels evolving on their own effective barriers.
#[derive(Debug, Clone)]
pub struct SpinorPacket {
    spec: BarrierSpec,
    field: FieldSpec,
    up: PacketFamily,
    down: PacketFamily,
}

impl SpinorPacket {
    pub fn new(
        spec: &BarrierSpec,
        field: &FieldSpec,
        amplitude: &SpectralAmplitude,
        res: &PacketResolution,
    ) -> Result<Self> {
        let window = TimeWindow::covering(spec, amplitude, field.omega_l, res.dt_factor);
        Self::with_window(spec, field, amplitude, res, window)
    }

    pub fn with_window(
        spec: &BarrierSpec,
        field: &FieldSpec,
        amplitude: &SpectralAmplitude,
        res: &PacketResolution,
        window: TimeWindow,
    ) -> Result<Self> {
        let geometry = Arc::new(Geometry::new(spec, amplitude, &window, res)?);
        let up_spec = effective_barrier(spec, field, Spin::Up)?;
        let dn_spec = effective_barrier(spec, field, Spin::Down)?;
        let up = PacketFamily::with_geometry(&up_spec, amplitude, Some(Spin::Up), geometry.clone(), window)?;
        let down = PacketFamily::with_geometry(&dn_spec, amplitude, Some(Spin::Down), geometry, window)?;
        Ok(SpinorPacket { spec: spec.clone(), field: *field, up, down })
    }

    pub fn spec(&self) -> &BarrierSpec {
        &self.spec
    }

    pub fn omega_l(&self) -> f64 {
        self.field.omega_l
    }

    pub fn up(&self) -> &PacketFamily {
        &self.up
    }

    pub fn down(&self) -> &PacketFamily {
        &self.down
    }

    pub fn window(&self) -> &TimeWindow {
        self.up.window()
    }

    pub fn amplitude(&self) -> &SpectralAmplitude {
        self.up.amplitude()
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        self.up.geometry()
    }

    /// `(psi_up, psi_down)` of one subensemble at time `t`.
    pub fn fields(&self, which: Which, t: f64) -> (FieldAtTime, FieldAtTime) {
        let c = self.up.coefficients(t);
        (self.up.field(which, &c), self.down.field(which, &c))
    }

    fn moments(&self, which: Which, t: f64) -> Moments {
        let g = self.geometry();
        let (u, d) = self.fields(which, t);
        Moments {
            z: g.overlap(&d, &u),
            z_reg: g.region_overlap(&d, &u),
            n_up: g.norm_sqr(&u),
            n_dn: g.norm_sqr(&d),
        }
    }
}

struct Moments {
    z: Complex64,
    z_reg: Complex64,
    n_up: f64,
    n_dn: f64,
}

impl Moments {
    fn check(&self, which: Which) -> Result<()> {
        if which == Which::Ref && 0.5 * (self.n_up + self.n_dn) <= EPS_R {
            return Err(Error::DegenerateReflection);
        }
        Ok(())
    }

    fn bloch(&self) -> BlochState {
        BlochState::from_moments(self.z, self.n_up, self.n_dn)
    }

    fn rate(&self, omega_l: f64) -> Result<f64> {
        let nw = self.n_up + self.n_dn;
        if self.z.norm_sqr() / (nw * nw) < 1e-18 {
            return Err(Error::AzimuthUndefined);
        }
        Ok(omega_l * (self.z.conj() * self.z_reg).re / self.z.norm_sqr())
    }
}

pub fn bloch(spinor: &SpinorPacket, which: Which, t: f64) -> Result<BlochState> {
    let m = spinor.moments(which, t);
    m.check(which)?;
    Ok(m.bloch())
}

/// `d phi / dt` from the Ehrenfest equations: the transverse spin rotates
/// only through the part of `z` inside the field region.
pub fn precession_rate(spinor: &SpinorPacket, which: Which, t: f64) -> Result<f64> {
    let m = spinor.moments(which, t);
    m.check(which)?;
    m.rate(spinor.omega_l())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialAngles {
    pub phi_tr: f64,
    pub theta_tr: f64,
    pub phi_ref: f64,
    pub theta_ref: f64,
}

/// Angles of the incoming subensembles, read at the start of the window where
/// the packet has not yet reached the barrier.
pub fn initial_angles(spinor: &SpinorPacket) -> Result<InitialAngles> {
    let t0 = spinor.window().start;
    let tr = bloch(spinor, Which::Tr, t0)?;
    let rf = bloch(spinor, Which::Ref, t0)?;
    Ok(InitialAngles { phi_tr: tr.phi, theta_tr: tr.theta, phi_ref: rf.phi, theta_ref: rf.theta })
}

/// `S_z` of the transmitted and reflected subensembles from the asymptotic
/// channel weights `int A^2 T dk` and `int A^2 R dk`.
pub fn constant_sz_report(spinor: &SpinorPacket) -> Result<(f64, f64)> {
    let (t_up, r_up) = spinor.up.channel_weights();
    let (t_dn, r_dn) = spinor.down.channel_weights();
    let sz_tr = 0.5 * (t_up - t_dn) / (t_up + t_dn);
    if 0.5 * (r_up + r_dn) <= EPS_R {
        return Err(Error::DegenerateReflection);
    }
    Ok((sz_tr, 0.5 * (r_up - r_dn) / (r_up + r_dn)))
}

/// Bloch states and precession rates of the three ensembles along a time grid,
/// with each azimuth unwrapped continuously.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinTrace {
    pub times: Vec<f64>,
    pub full: Vec<BlochState>,
    pub tr: Vec<BlochState>,
    /// `None` when the reflected subensemble is degenerate.
    pub reflected: Option<Vec<BlochState>>,
    pub rate_tr: Vec<f64>,
    pub rate_ref: Option<Vec<f64>>,
}

fn unwrap(states: &mut [BlochState]) {
    for i in 1..states.len() {
        let prev = states[i - 1].phi;
        let p = &mut states[i].phi;
        *p += 2.0 * PI * ((prev - *p) / (2.0 * PI)).round();
    }
}

pub fn spin_trace(spinor: &SpinorPacket, times: &[f64]) -> Result<SpinTrace> {
    let omega = spinor.omega_l();
    let mut full = Vec::with_capacity(times.len());
    let mut tr = Vec::with_capacity(times.len());
    let mut rf = Vec::with_capacity(times.len());
    let mut rate_tr = Vec::with_capacity(times.len());
    let mut rate_ref = Vec::with_capacity(times.len());
    let mut degenerate = false;
    for &t in times {
        full.push(spinor.moments(Which::Full, t).bloch());
        let m = spinor.moments(Which::Tr, t);
        tr.push(m.bloch());
        rate_tr.push(m.rate(omega)?);
        if !degenerate {
            let m = spinor.moments(Which::Ref, t);
            if m.check(Which::Ref).is_err() {
                degenerate = true;
                continue;
            }
            rf.push(m.bloch());
            rate_ref.push(m.rate(omega)?);
        }
    }
    unwrap(&mut full);
    unwrap(&mut tr);
    unwrap(&mut rf);
    Ok(SpinTrace {
        times: times.to_vec(),
        full,
        tr,
        reflected: (!degenerate).then_some(rf),
        rate_tr,
        rate_ref: (!degenerate).then_some(rate_ref),
    })
}

/// Enough samples across the window that the azimuth moves less than one
/// radian between consecutive samples.
pub fn unwrap_times(window: &TimeWindow, omega_l: f64) -> Vec<f64> {
    let span = window.end - window.start;
    let n = ((omega_l * span).ceil() as usize).max(1);
    let mut ts = crate::quadrature::uniform(window.start, window.end, n);
    ts[0] = window.start;
    ts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_gaussian_amplitude;

    fn small_res() -> PacketResolution {
        PacketResolution { nk: 201, dx: 0.1, region_intervals: 100, dt_factor: 0.05, span: 40.0 }
    }

    fn spinor(omega: f64) -> SpinorPacket {
        let spec = BarrierSpec::rectangular(5.0, 6.0, 2.0).unwrap();
        let amp = build_gaussian_amplitude(2f64.sqrt(), 10.0, 8.0).unwrap();
        SpinorPacket::new(&spec, &FieldSpec::new(omega).unwrap(), &amp, &small_res()).unwrap()
    }

    #[test]
    fn zero_field_is_spinless() {
        let s = spinor(0.0);
        for t in [s.window().start, 0.0, 30.0] {
            for which in [Which::Full, Which::Tr, Which::Ref] {
                let b = bloch(&s, which, t).unwrap();
                assert!((b.sx - 0.5).abs() < 1e-12 && b.sy.abs() < 1e-14 && b.sz.abs() < 1e-14);
            }
            assert_eq!(precession_rate(&s, Which::Tr, t).unwrap(), 0.0);
        }
        assert_eq!(constant_sz_report(&s).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn full_ensemble_starts_along_x() {
        let s = spinor(1e-2);
        let b = bloch(&s, Which::Full, s.window().start).unwrap();
        assert!((b.sx - 0.5).abs() < 1e-9 && b.sy.abs() < 1e-9 && b.sz.abs() < 1e-12);
        assert!((b.theta - PI / 2.0).abs() < 1e-9 && b.phi.abs() < 1e-8);
    }

    #[test]
    fn transmitted_spin_turns_positive() {
        let s = spinor(1e-2);
        let late = bloch(&s, Which::Tr, s.window().end).unwrap();
        let early = bloch(&s, Which::Tr, s.window().start).unwrap();
        assert!(late.phi > early.phi);
        let (sz_tr, sz_ref) = constant_sz_report(&s).unwrap();
        assert!(sz_tr > 0.0 && sz_ref < 0.0);
        assert!((late.sz - sz_tr).abs() < 1e-9);
        assert!(late.norm_sqr() <= 0.25 + 1e-12);
    }

    #[test]
    fn rate_matches_finite_difference_for_full_and_reflected() {
        let s = spinor(1e-2);
        let h = 0.05;
        for which in [Which::Full, Which::Ref] {
            for t in [-2.0, 0.0, 3.0] {
                let fd = (bloch(&s, which, t + h).unwrap().phi - bloch(&s, which, t - h).unwrap().phi) / (2.0 * h);
                let rate = precession_rate(&s, which, t).unwrap();
                assert!((fd - rate).abs() < 5e-3 * rate.abs(), "{which:?} t={t}: {fd} vs {rate}");
            }
        }
    }

    #[test]
    fn free_reflection_is_degenerate() {
        let spec = BarrierSpec::new(5.0, 6.0, vec![], 0.0).unwrap();
        let amp = build_gaussian_amplitude(2f64.sqrt(), 10.0, 8.0).unwrap();
        let s = SpinorPacket::new(&spec, &FieldSpec::zero(), &amp, &small_res()).unwrap();
        assert_eq!(bloch(&s, Which::Ref, 0.0), Err(Error::DegenerateReflection));
        assert!(initial_angles(&s).is_err());
        let tr = spin_trace(&s, &[-10.0, 0.0, 10.0]).unwrap();
        assert!(tr.reflected.is_none());
    }
}
