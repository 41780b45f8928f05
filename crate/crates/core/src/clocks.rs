//! Larmor, dwell and phase times, and the rotation angles of the spin clock.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{energy, BarrierSpec, FieldSpec, SpectralAmplitude};
use crate::packet::{occupancy_trace, Geometry, OccupancyTrace, PacketFamily, PacketResolution, TimeWindow, EPS_OCC};
use crate::quadrature::{simpson_weights, trapezoid, uniform, weighted_sum};
use crate::spin::{spin_trace, unwrap_times, SpinorPacket, EPS_R};
use crate::splitter::SplitSolution;
use crate::stationary::{scattering_sweep, SweepPoint};

/// A transmission value and an optional reflection value; the latter is
/// `None` when the reflected subensemble is degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPair {
    pub tr: f64,
    pub reflected: Option<f64>,
}

/// `tau_tr = int P_tr dt / T_packet`, `tau_ref = int P_ref dt / R_packet`.
pub fn larmor_time_timedomain(trace: &OccupancyTrace, t_packet: f64, r_packet: f64) -> Result<ChannelPair> {
    let ratio = trace.endpoint_ratio();
    if ratio > EPS_OCC {
        return Err(Error::WindowTooShort { ratio, threshold: EPS_OCC });
    }
    if !(t_packet > 0.0) {
        return Err(Error::InvalidParameter("transmission weight must be > 0".into()));
    }
    let tr = trapezoid(&trace.times, &trace.p_tr) / t_packet;
    let reflected = (r_packet > EPS_R).then(|| trapezoid(&trace.times, &trace.p_ref) / r_packet);
    Ok(ChannelPair { tr, reflected })
}

/// Spectral route: `tau_tr = int dk (A^2 / k) int_a^b |psi_tr(x,k)|^2 dx / T_packet`.
///
/// The grid holds only positive wavenumbers, so the `A(-k)` contribution of the
/// general formula vanishes identically.
pub fn larmor_time_spectral(family: &PacketFamily, t_packet: f64, r_packet: f64) -> Result<ChannelPair> {
    if !(t_packet > 0.0) {
        return Err(Error::InvalidParameter("transmission weight must be > 0".into()));
    }
    let (d_tr, d_ref) = family.region_densities();
    let amp = family.amplitude();
    let mut tr = 0.0;
    let mut rf = 0.0;
    for (j, ((&k, &a), &w)) in amp.ks().iter().zip(amp.values()).zip(amp.weights()).enumerate() {
        tr += w * a * a / k * d_tr[j];
        rf += w * a * a / k * d_ref[j];
    }
    Ok(ChannelPair { tr: tr / t_packet, reflected: (r_packet > EPS_R).then(|| rf / r_packet) })
}

/// Simpson intervals used for stationary dwell integrals.
pub const DWELL_INTERVALS: usize = 4000;

/// Stationary dwell times at wavenumber `k`:
/// `int_a^b |psi_tr|^2 / (k T)` and `int_a^{x_c} |psi_ref|^2 / (k R)`.
pub fn dwell_time_stationary(spec: &BarrierSpec, k: f64) -> Result<ChannelPair> {
    let split = SplitSolution::new(spec, k)?;
    dwell_from_split(spec, &split, DWELL_INTERVALS)
}

pub fn dwell_from_split(spec: &BarrierSpec, split: &SplitSolution, intervals: usize) -> Result<ChannelPair> {
    let k = split.k();
    let t = split.full().transmission();
    let r = split.full().reflection();
    if !(t > 0.0) {
        return Err(Error::InvalidParameter("transmission vanishes".into()));
    }
    let n = intervals.div_ceil(4).max(1) * 4;
    let mut xs = uniform(spec.a(), spec.b(), n);
    xs[n / 2] = spec.midpoint();
    let d_tr: Vec<f64> = xs.iter().map(|&x| split.psi_tr(x).norm_sqr()).collect();
    let d_ref: Vec<f64> = xs[..=n / 2].iter().map(|&x| split.psi_ref(x).norm_sqr()).collect();
    let tr = weighted_sum(&simpson_weights(&xs), &d_tr) / (k * t);
    let reflected = (r > EPS_R && !split.is_degenerate())
        .then(|| weighted_sum(&simpson_weights(&xs[..=n / 2]), &d_ref) / (k * r));
    Ok(ChannelPair { tr, reflected })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTime {
    /// `d arg(A_out) / dE`: delay relative to free motion over `[a, b]`.
    pub delay: f64,
    /// `delay + d / k0`: traversal time of `[a, b]`.
    pub traversal: f64,
}

/// Derivative at `x0` of the Lagrange interpolant through `(xs, ys)`.
fn lagrange_derivative(xs: &[f64], ys: &[f64], x0: f64) -> f64 {
    let n = xs.len();
    let mut acc = 0.0;
    for i in 0..n {
        let denom: f64 = (0..n).filter(|&j| j != i).map(|j| xs[i] - xs[j]).product();
        let mut num = 0.0;
        for m in (0..n).filter(|&m| m != i) {
            num += (0..n).filter(|&j| j != i && j != m).map(|j| x0 - xs[j]).product::<f64>();
        }
        acc += ys[i] * num / denom;
    }
    acc
}

/// Wigner phase time from a sweep bracketing `k0` with at least two points on
/// each side.
pub fn phase_time_baseline(sweep: &[SweepPoint], k0: f64, d: f64) -> Result<PhaseTime> {
    if sweep.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let i = sweep.partition_point(|p| p.k < k0);
    let near = if i < sweep.len() && (i == 0 || (sweep[i].k - k0).abs() < (k0 - sweep[i - 1].k)) { i } else { i - 1 };
    if near < 2 || near + 2 >= sweep.len() {
        return Err(Error::InvalidParameter("sweep must bracket k0 with two points per side".into()));
    }
    let pts = &sweep[near - 2..=near + 2];
    for w in pts.windows(2) {
        let step = (w[1].phase - w[0].phase).abs();
        if step > std::f64::consts::FRAC_PI_2 {
            return Err(Error::RefineKGrid { step });
        }
    }
    let es: Vec<f64> = pts.iter().map(|p| energy(p.k)).collect();
    let ph: Vec<f64> = pts.iter().map(|p| p.phase).collect();
    let delay = lagrange_derivative(&es, &ph, energy(k0));
    Ok(PhaseTime { delay, traversal: delay + d / k0 })
}

/// Phase time from a dedicated five-point sweep of spacing `1e-3 k0`.
pub fn phase_time(spec: &BarrierSpec, k0: f64) -> Result<PhaseTime> {
    let h = 1e-3 * k0;
    let ks: Vec<f64> = (-2..=2).map(|i| k0 + i as f64 * h).collect();
    phase_time_baseline(&scattering_sweep(spec, &ks)?, k0, spec.width())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationAngles {
    pub phi0_tr: f64,
    pub phi_inf_tr: f64,
    pub delta_phi_tr: f64,
    pub phi0_ref: Option<f64>,
    pub phi_inf_ref: Option<f64>,
    pub delta_phi_ref: Option<f64>,
}

/// `phi(end) - phi(start)` across the window, unwrapped along the way.
pub fn rotation_angles(spinor: &SpinorPacket) -> Result<RotationAngles> {
    let times = unwrap_times(spinor.window(), spinor.omega_l());
    let trace = spin_trace(spinor, &times)?;
    let n = times.len() - 1;
    let (phi0_tr, phi_inf_tr) = (trace.tr[0].phi, trace.tr[n].phi);
    let refl = trace.reflected.as_ref().map(|r| (r[0].phi, r[n].phi));
    Ok(RotationAngles {
        phi0_tr,
        phi_inf_tr,
        delta_phi_tr: phi_inf_tr - phi0_tr,
        phi0_ref: refl.map(|r| r.0),
        phi_inf_ref: refl.map(|r| r.1),
        delta_phi_ref: refl.map(|r| r.1 - r.0),
    })
}

/// `f(0)` from samples at `h`, `2h`, `4h` of `f(h) = f(0) + c1 h + c2 h^2`.
pub fn richardson(f_h: f64, f_2h: f64, f_4h: f64) -> f64 {
    (8.0 * f_h - 6.0 * f_2h + f_4h) / 3.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClockReport {
    pub k0: f64,
    pub l0: f64,
    pub omega_l: f64,
    /// `int A^2 T dk` and `int A^2 R dk`.
    pub t_packet: f64,
    pub r_packet: f64,
    pub tau_l_tr: f64,
    pub tau_l_ref: Option<f64>,
    pub tau_l_tr_spectral: f64,
    pub tau_l_ref_spectral: Option<f64>,
    pub tau_dwell_tr: f64,
    pub tau_dwell_ref: Option<f64>,
    pub delta_phi_tr: f64,
    pub delta_phi_ref: Option<f64>,
    pub tau_phase: f64,
    pub tau_phase_delay: f64,
    /// Largest drift of `||psi_tr||^2` and `||psi_ref||^2` over the window.
    pub drift_t: f64,
    pub drift_r: f64,
    pub window: TimeWindow,
    pub trace: OccupancyTrace,
}

impl ClockReport {
    /// Named scalar fields in a fixed order; absent values are NaN.
    pub fn fields(&self) -> Vec<(&'static str, f64)> {
        let o = |v: Option<f64>| v.unwrap_or(f64::NAN);
        vec![
            ("k0", self.k0),
            ("l0", self.l0),
            ("omega_L", self.omega_l),
            ("T_packet", self.t_packet),
            ("R_packet", self.r_packet),
            ("tau_L_tr", self.tau_l_tr),
            ("tau_L_ref", o(self.tau_l_ref)),
            ("tau_L_tr_spectral", self.tau_l_tr_spectral),
            ("tau_L_ref_spectral", o(self.tau_l_ref_spectral)),
            ("tau_dwell_tr", self.tau_dwell_tr),
            ("tau_dwell_ref", o(self.tau_dwell_ref)),
            ("delta_phi_tr", self.delta_phi_tr),
            ("delta_phi_ref", o(self.delta_phi_ref)),
            ("tau_phase", self.tau_phase),
            ("tau_phase_delay", self.tau_phase_delay),
            ("drift_T", self.drift_t),
            ("drift_R", self.drift_r),
        ]
    }

    /// `|x - x_ref| / |x_ref|` for every field against a finer run.
    pub fn convergence_ratios(&self, finer: &ClockReport) -> Vec<(&'static str, f64)> {
        self.fields()
            .into_iter()
            .zip(finer.fields())
            .filter(|((name, _), _)| name.starts_with("tau_") || name.starts_with("delta_"))
            .map(|((name, a), (_, b))| (name, if a.is_nan() && b.is_nan() { 0.0 } else { ((a - b) / b).abs() }))
            .collect()
    }
}

/// Every clock for one scenario: a spinless family for occupancies, a spinor
/// packet for the rotation angles (when `omega_L > 0`), and stationary
/// quantities at `k0`.
pub fn clock_report(
    spec: &BarrierSpec,
    field: &FieldSpec,
    amplitude: &SpectralAmplitude,
    res: &PacketResolution,
) -> Result<ClockReport> {
    let window = TimeWindow::covering(spec, amplitude, field.omega_l, res.dt_factor);
    clock_report_in(spec, field, amplitude, res, window)
}

/// [`clock_report`] over a given window.
pub fn clock_report_in(
    spec: &BarrierSpec,
    field: &FieldSpec,
    amplitude: &SpectralAmplitude,
    res: &PacketResolution,
    window: TimeWindow,
) -> Result<ClockReport> {
    let geometry = Arc::new(Geometry::new(spec, amplitude, &window, res)?);
    let family = PacketFamily::with_geometry(spec, amplitude, None, geometry, window)?;
    let (t_packet, r_packet) = family.channel_weights();
    let trace = occupancy_trace(&family, &family.window().times());
    let td = larmor_time_timedomain(&trace, t_packet, r_packet)?;
    let sp = larmor_time_spectral(&family, t_packet, r_packet)?;
    let dwell = dwell_time_stationary(spec, amplitude.k0())?;
    let phase = phase_time(spec, amplitude.k0())?;
    let (delta_phi_tr, delta_phi_ref) = if field.omega_l > 0.0 {
        let spinor = SpinorPacket::with_window(spec, field, amplitude, res, window)?;
        let rot = rotation_angles(&spinor)?;
        (rot.delta_phi_tr, rot.delta_phi_ref)
    } else {
        (0.0, td.reflected.map(|_| 0.0))
    };
    Ok(ClockReport {
        k0: amplitude.k0(),
        l0: amplitude.l0(),
        omega_l: field.omega_l,
        t_packet,
        r_packet,
        tau_l_tr: td.tr,
        tau_l_ref: td.reflected,
        tau_l_tr_spectral: sp.tr,
        tau_l_ref_spectral: sp.reflected,
        tau_dwell_tr: dwell.tr,
        tau_dwell_ref: dwell.reflected,
        delta_phi_tr,
        delta_phi_ref,
        tau_phase: phase.traversal,
        tau_phase_delay: phase.delay,
        drift_t: OccupancyTrace::max_drift(&trace.n_tr),
        drift_r: OccupancyTrace::max_drift(&trace.n_ref),
        window: *family.window(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_gaussian_amplitude;

    #[test]
    fn lagrange_derivative_is_exact_for_quartics() {
        let xs = [0.1, 0.35, 0.5, 0.8, 1.1];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| x.powi(4) - 2.0 * x * x + x).collect();
        let d = lagrange_derivative(&xs, &ys, 0.6);
        assert!((d - (4.0 * 0.6f64.powi(3) - 4.0 * 0.6 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn richardson_removes_two_orders() {
        let f = |h: f64| 3.0 + 0.7 * h - 2.0 * h * h;
        assert!((richardson(f(0.1), f(0.2), f(0.4)) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn free_dwell_and_phase_times() {
        let spec = BarrierSpec::new(5.0, 6.0, vec![], 0.0).unwrap();
        let k0 = 2f64.sqrt();
        let d = dwell_time_stationary(&spec, k0).unwrap();
        assert!((d.tr - 1.0 / k0).abs() < 1e-12);
        assert!(d.reflected.is_none());
        let p = phase_time(&spec, k0).unwrap();
        assert!((p.traversal - 1.0 / k0).abs() < 1e-10 && p.delay.abs() < 1e-10);
    }

    #[test]
    fn rectangular_dwell_times() {
        let spec = BarrierSpec::rectangular(5.0, 6.0, 2.0).unwrap();
        let d = dwell_time_stationary(&spec, 2f64.sqrt()).unwrap();
        assert!((d.tr - 0.96753).abs() < 1e-4, "{}", d.tr);
        assert!((d.reflected.unwrap() - 0.119561).abs() < 1e-5);
    }

    #[test]
    fn phase_time_matches_closed_form() {
        // arg A_out + k d = arctan(((k^2 - kappa^2) / (2 k kappa)) tanh(kappa d)), differentiated in E.
        let (v0, d) = (2.0, 1.0);
        let spec = BarrierSpec::rectangular(5.0, 5.0 + d, v0).unwrap();
        let phase = |k: f64| {
            let kappa = (2.0 * v0 - k * k).sqrt();
            ((k * k - kappa * kappa) / (2.0 * k * kappa) * (kappa * d).tanh()).atan()
        };
        let k0 = 1.1;
        let h = 1e-5;
        let exact = (phase(k0 + h) - phase(k0 - h)) / (2.0 * h) / k0;
        let p = phase_time(&spec, k0).unwrap();
        assert!((p.traversal - exact).abs() < 1e-6 * exact.abs(), "{} vs {}", p.traversal, exact);
    }

    #[test]
    fn coarse_sweep_is_rejected() {
        let spec = BarrierSpec::rectangular(5.0, 45.0, 0.5).unwrap();
        let ks: Vec<f64> = (0..9).map(|i| 1.2 + 0.3 * i as f64).collect();
        let sw = scattering_sweep(&spec, &ks).unwrap();
        assert!(matches!(phase_time_baseline(&sw, 2.4, 40.0), Err(Error::RefineKGrid { .. })));
    }

    #[test]
    fn free_packet_larmor_time_is_ballistic() {
        let spec = BarrierSpec::new(5.0, 6.0, vec![], 0.0).unwrap();
        let amp = build_gaussian_amplitude(2f64.sqrt(), 20.0, 8.0).unwrap();
        let res = PacketResolution { nk: 401, ..PacketResolution::default() };
        let r = clock_report(&spec, &FieldSpec::zero(), &amp, &res).unwrap();
        assert!((r.tau_l_tr * 2f64.sqrt() - 1.0).abs() < 5e-3, "{}", r.tau_l_tr);
        assert!(r.tau_l_ref.is_none() && r.tau_l_ref_spectral.is_none());
        assert!((r.tau_l_tr_spectral / r.tau_l_tr - 1.0).abs() < 1e-3);
    }
}
