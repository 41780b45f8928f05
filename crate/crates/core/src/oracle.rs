//! Direct time integration of the two spin channels, independent of the
//! stationary decomposition.
//!
//! Each channel obeys `i psi_t = -psi_xx / 2 + V_s(x) psi` on a uniform grid
//! with hard walls. Space is discretized with the Numerov (compact fourth
//! order) Laplacian `M^{-1} D2` and time with Crank-Nicolson:
//! `(M + i tau Hs) psi^{n+1} = (M - i tau Hs) psi^n` with
//! `Hs = -D2/2 + M V` and `tau = dt / 2`. Since `M` and `D2` commute,
//! `M^{-1} Hs` is symmetric and the step is exactly unitary.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{BarrierSpec, ComplexField, FieldRegion, FieldSpec, SpectralAmplitude, Spin, SpinorField};
use crate::quadrature::{aligned_grid, trapezoid, trapezoid_complex};
use crate::spin::BlochState;

/// Edge density above this aborts a run.
pub const EDGE_TOL: f64 = 1e-10;

/// Barrier-region probability above this means the scattering is not over.
pub const ASYMPTOTIC_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolverConfig {
    pub x_lo: f64,
    pub x_hi: f64,
    pub dx: f64,
    pub dt: f64,
    pub t0: f64,
    /// Absolute times, increasing, each at least `t0`.
    pub snapshot_times: Vec<f64>,
    /// Steps between edge-density checks.
    pub check_every: usize,
}

impl EvolverConfig {
    /// Domain sized for a packet that spends `[t0, t1]` in flight.
    pub fn covering(spec: &BarrierSpec, amp: &SpectralAmplitude, t0: f64, t1: f64, dx: f64, dt: f64) -> Self {
        let t = t0.abs().max(t1.abs());
        let reach = amp.k_max() * t + 12.0 * crate::packet::free_width(amp.l0(), t);
        EvolverConfig {
            x_lo: -reach.max(spec.a() + 1.0),
            x_hi: spec.b() + reach,
            dx,
            dt,
            t0,
            snapshot_times: vec![t1],
            check_every: 50,
        }
    }

    /// Grid with `a`, the midpoint and `b` as nodes.
    pub fn grid(&self, spec: &BarrierSpec) -> Vec<f64> {
        aligned_grid(spec.a(), spec.b(), self.x_lo, self.x_hi, self.dx)
    }

    fn validate(&self, spec: &BarrierSpec) -> Result<()> {
        if !(self.dx > 0.0) || !(self.dt > 0.0) {
            return Err(Error::InvalidParameter("dx and dt must be > 0".into()));
        }
        if !(self.x_lo < spec.a()) || !(self.x_hi > spec.b()) {
            return Err(Error::InvalidParameter("domain must contain the barrier".into()));
        }
        if self.snapshot_times.iter().any(|&t| t < self.t0) || !self.snapshot_times.windows(2).all(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter("snapshot times must be increasing and >= t0".into()));
        }
        Ok(())
    }
}

/// Potential of one channel at grid nodes; at a jump the two one-sided
/// values are averaged.
fn channel_potential(xs: &[f64], spec: &BarrierSpec, field: &FieldSpec, spin: Spin) -> Vec<f64> {
    let (lo, hi) = field.interval(spec);
    let shift = field.shift(spin);
    let one_sided = |x: f64| {
        let inside = x > lo && x < hi;
        spec.value(x) + if inside { shift } else { 0.0 }
    };
    let h = xs[1] - xs[0];
    xs.iter()
        .map(|&x| {
            let e = 1e-9 * h;
            0.5 * (one_sided(x - e) + one_sided(x + e))
        })
        .collect()
}

/// Crank-Nicolson stepper for one channel with a precomputed Thomas factorization.
struct Stepper {
    // Left-hand operator, factorized.
    lower: Vec<Complex64>,
    upper_mod: Vec<Complex64>,
    inv_diag: Vec<Complex64>,
    // Right-hand operator.
    r_lower: Vec<Complex64>,
    r_diag: Vec<Complex64>,
    r_upper: Vec<Complex64>,
    work: Vec<Complex64>,
}

impl Stepper {
    fn new(v: &[f64], dx: f64, dt: f64) -> Self {
        let n = v.len();
        let tau = 0.5 * dt;
        let kin = 1.0 / (dx * dx);
        let it = Complex64::new(0.0, tau);
        let m_off = 1.0 / 12.0;
        let m_diag = 10.0 / 12.0;
        let mut l_low = vec![Complex64::new(0.0, 0.0); n];
        let mut l_diag = vec![Complex64::new(0.0, 0.0); n];
        let mut l_up = vec![Complex64::new(0.0, 0.0); n];
        let mut r_lower = l_low.clone();
        let mut r_diag = l_diag.clone();
        let mut r_upper = l_up.clone();
        for i in 0..n {
            let h_diag = kin + m_diag * v[i];
            l_diag[i] = m_diag + it * h_diag;
            r_diag[i] = m_diag - it * h_diag;
            if i > 0 {
                let h_off = -0.5 * kin + m_off * v[i - 1];
                l_low[i] = m_off + it * h_off;
                r_lower[i] = m_off - it * h_off;
            }
            if i + 1 < n {
                let h_off = -0.5 * kin + m_off * v[i + 1];
                l_up[i] = m_off + it * h_off;
                r_upper[i] = m_off - it * h_off;
            }
        }
        let mut upper_mod = vec![Complex64::new(0.0, 0.0); n];
        let mut inv_diag = vec![Complex64::new(0.0, 0.0); n];
        let mut prev = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let d = l_diag[i] - l_low[i] * prev;
            inv_diag[i] = 1.0 / d;
            upper_mod[i] = l_up[i] * inv_diag[i];
            prev = upper_mod[i];
        }
        Stepper { lower: l_low, upper_mod, inv_diag, r_lower, r_diag, r_upper, work: vec![Complex64::new(0.0, 0.0); n] }
    }

    fn step(&mut self, psi: &mut [Complex64]) {
        let n = psi.len();
        let rhs = &mut self.work[..n];
        let (rl, rd, ru) = (&self.r_lower[..n], &self.r_diag[..n], &self.r_upper[..n]);
        rhs[0] = rd[0] * psi[0] + ru[0] * psi[1];
        rhs[n - 1] = rl[n - 1] * psi[n - 2] + rd[n - 1] * psi[n - 1];
        for (i, r) in rhs.iter_mut().enumerate().take(n - 1).skip(1) {
            *r = rl[i] * psi[i - 1] + rd[i] * psi[i] + ru[i] * psi[i + 1];
        }
        let mut prev = Complex64::new(0.0, 0.0);
        for ((p, r), (lo, inv)) in psi.iter_mut().zip(rhs.iter()).zip(self.lower[..n].iter().zip(&self.inv_diag[..n])) {
            prev = (r - lo * prev) * inv;
            *p = prev;
        }
        let mut next = psi[n - 1];
        for (p, u) in psi[..n - 1].iter_mut().zip(&self.upper_mod[..n - 1]).rev() {
            next = *p - u * next;
            *p = next;
        }
    }
}

/// Interior unknowns exclude the two wall nodes, where `psi = 0`.
fn evolve_channel(
    xs: &[f64],
    psi0: &[Complex64],
    v: &[f64],
    cfg: &EvolverConfig,
    mut record: impl FnMut(usize, &[Complex64]),
) -> Result<()> {
    let n = xs.len();
    let dx = xs[1] - xs[0];
    let mut stepper = Stepper::new(&v[1..n - 1], dx, cfg.dt);
    let mut psi: Vec<Complex64> = psi0[1..n - 1].to_vec();
    let edge = |psi: &[Complex64]| psi[0].norm_sqr().max(psi[psi.len() - 1].norm_sqr());
    let mut steps_done = 0usize;
    let full = |psi: &[Complex64]| {
        let mut out = Vec::with_capacity(n);
        out.push(Complex64::new(0.0, 0.0));
        out.extend_from_slice(psi);
        out.push(Complex64::new(0.0, 0.0));
        out
    };
    for (s, &t) in cfg.snapshot_times.iter().enumerate() {
        let target = ((t - cfg.t0) / cfg.dt).round() as usize;
        while steps_done < target {
            stepper.step(&mut psi);
            steps_done += 1;
            if steps_done % cfg.check_every.max(1) == 0 || steps_done == target {
                let e = edge(&psi);
                if e > EDGE_TOL {
                    return Err(Error::DomainTooSmall { density: e, time: cfg.t0 + steps_done as f64 * cfg.dt });
                }
            }
        }
        record(s, &full(&psi));
    }
    Ok(())
}

/// Evolve both channels of `initial` and return one spinor per snapshot time.
pub fn evolve(initial: &SpinorField, spec: &BarrierSpec, field: &FieldSpec, cfg: &EvolverConfig) -> Result<Vec<SpinorField>> {
    cfg.validate(spec)?;
    let xs = initial.xs();
    let grid = cfg.grid(spec);
    if grid.len() != xs.len() || grid.iter().zip(xs).any(|(a, b)| (a - b).abs() > 1e-9) {
        return Err(Error::IncompatibleGrids("initial spinor is not on the configured grid".into()));
    }
    let e0 = initial.up.values()[1].norm_sqr().max(initial.up.values()[xs.len() - 2].norm_sqr());
    if e0 > EDGE_TOL {
        return Err(Error::DomainTooSmall { density: e0, time: cfg.t0 });
    }
    let m = cfg.snapshot_times.len();
    let mut ups = vec![Vec::new(); m];
    let mut downs = vec![Vec::new(); m];
    let v_up = channel_potential(xs, spec, field, Spin::Up);
    evolve_channel(xs, initial.up.values(), &v_up, cfg, |s, p| ups[s] = p.to_vec())?;
    let v_dn = channel_potential(xs, spec, field, Spin::Down);
    if v_dn == v_up && initial.down.values() == initial.up.values() {
        downs.clone_from(&ups);
    } else {
        evolve_channel(xs, initial.down.values(), &v_dn, cfg, |s, p| downs[s] = p.to_vec())?;
    }
    let grid = initial.up.grid().clone();
    ups.into_iter()
        .zip(downs)
        .map(|(u, d)| SpinorField::new(ComplexField::new(grid.clone(), u)?, ComplexField::new(grid.clone(), d)?))
        .collect()
}

/// Incoming spinor `(psi_0, psi_0) / sqrt 2` with `psi_0` the free packet at `t0`.
pub fn initial_spinor(amp: &SpectralAmplitude, spec: &BarrierSpec, cfg: &EvolverConfig) -> Result<SpinorField> {
    let xs: std::sync::Arc<[f64]> = cfg.grid(spec).into();
    let field = ComplexField::from_fn(xs, |x| amp.free_packet(x, cfg.t0) * std::f64::consts::FRAC_1_SQRT_2)?;
    SpinorField::new(field.clone(), field)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticSpin {
    pub tr: BlochState,
    pub reflected: BlochState,
    pub t_up: f64,
    pub t_dn: f64,
    pub r_up: f64,
    pub r_dn: f64,
}

fn bloch_on(up: &ComplexField, down: &ComplexField, lo: usize, hi: usize) -> (BlochState, f64, f64) {
    let xs = &up.xs()[lo..hi];
    let u = &up.values()[lo..hi];
    let d = &down.values()[lo..hi];
    let zs: Vec<Complex64> = u.iter().zip(d).map(|(u, d)| d.conj() * u).collect();
    let z = trapezoid_complex(xs, &zs);
    let nu = trapezoid(xs, &u.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>());
    let nd = trapezoid(xs, &d.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>());
    let nw = nu + nd;
    let sz = 0.5 * (nu - nd) / nw;
    let state = BlochState {
        sx: z.re / nw,
        sy: z.im / nw,
        sz,
        theta: (2.0 * sz).clamp(-1.0, 1.0).acos(),
        phi: z.im.atan2(z.re),
    };
    (state, nu, nd)
}

/// Spin of the transmitted (`x > x_c`) and reflected (`x < x_c`) parts of a
/// snapshot taken after the packet has left the barrier. Channel weights are
/// relative to each channel's initial norm `n0_up`, `n0_dn`.
pub fn asymptotic_spin_measurement(snapshot: &SpinorField, spec: &BarrierSpec, norms0: (f64, f64)) -> Result<AsymptoticSpin> {
    let up = &snapshot.up;
    let down = &snapshot.down;
    let total = up.norm_sqr() + down.norm_sqr();
    let inside = up.norm_sqr_on(spec.a(), spec.b()) + down.norm_sqr_on(spec.a(), spec.b());
    if inside / total > ASYMPTOTIC_TOL {
        return Err(Error::NotAsymptotic(inside / total));
    }
    let ic = crate::quadrature::node_index(up.xs(), spec.midpoint()).ok_or(Error::MidpointNotOnGrid(spec.midpoint()))?;
    let (reflected, r_up, r_dn) = bloch_on(up, down, 0, ic + 1);
    let (tr, t_up, t_dn) = bloch_on(up, down, ic, up.len());
    Ok(AsymptoticSpin {
        tr,
        reflected,
        t_up: t_up / norms0.0,
        t_dn: t_dn / norms0.1,
        r_up: r_up / norms0.0,
        r_dn: r_dn / norms0.1,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub entries: Vec<(FieldSpec, AsymptoticSpin)>,
}

/// Run the same incoming spinor through several field placements.
pub fn field_placement_probe(
    initial: &SpinorField,
    spec: &BarrierSpec,
    variants: &[FieldSpec],
    cfg: &EvolverConfig,
) -> Result<ProbeReport> {
    let n0 = (initial.up.norm_sqr(), initial.down.norm_sqr());
    let mut entries = Vec::with_capacity(variants.len());
    for f in variants {
        let snaps = evolve(initial, spec, f, cfg)?;
        let last = snaps.last().ok_or_else(|| Error::InvalidParameter("no snapshot times".into()))?;
        entries.push((*f, asymptotic_spin_measurement(last, spec, n0)?));
    }
    Ok(ProbeReport { entries })
}

/// Field `[lo, hi]` placed behind the barrier.
pub fn behind_barrier(omega_l: f64, spec: &BarrierSpec, gap: f64, width: f64) -> Result<FieldSpec> {
    FieldSpec::with_region(omega_l, FieldRegion::Interval { lo: spec.b() + gap, hi: spec.b() + gap + width })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_gaussian_amplitude;
    use crate::packet::free_width;

    #[test]
    fn free_packet_moves_and_spreads() {
        let spec = BarrierSpec::new(5.0, 6.0, vec![], 0.0).unwrap();
        let amp = build_gaussian_amplitude(1.0, 5.0, 8.0).unwrap();
        let mut cfg = EvolverConfig::covering(&spec, &amp, 0.0, 40.0, 0.05, 0.01);
        cfg.snapshot_times = vec![20.0, 40.0];
        let init = initial_spinor(&amp, &spec, &cfg).unwrap();
        let snaps = evolve(&init, &spec, &FieldSpec::zero(), &cfg).unwrap();
        let n0 = init.up.norm_sqr();
        for (s, &t) in snaps.iter().zip(&cfg.snapshot_times) {
            assert!((s.up.norm_sqr() / n0 - 1.0).abs() < 1e-8);
            let (mean, var) = s.up.position_moments();
            assert!((mean / t - 1.0).abs() < 5e-3, "t={t}: {mean}");
            assert!((var.sqrt() / free_width(5.0, t) - 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn edge_breach_is_reported() {
        let spec = BarrierSpec::new(5.0, 6.0, vec![], 0.0).unwrap();
        let amp = build_gaussian_amplitude(1.0, 5.0, 8.0).unwrap();
        let cfg = EvolverConfig {
            x_lo: -80.0,
            x_hi: 30.0,
            dx: 0.05,
            dt: 0.02,
            t0: 0.0,
            snapshot_times: vec![60.0],
            check_every: 10,
        };
        let init = initial_spinor(&amp, &spec, &cfg).unwrap();
        assert!(matches!(evolve(&init, &spec, &FieldSpec::zero(), &cfg), Err(Error::DomainTooSmall { .. })));
    }

    #[test]
    fn lowered_barrier_transmits_more() {
        let spec = BarrierSpec::rectangular(5.0, 6.0, 2.0).unwrap();
        let amp = build_gaussian_amplitude(2f64.sqrt(), 5.0, 8.0).unwrap();
        let cfg = EvolverConfig::covering(&spec, &amp, -40.0, 45.0, 0.05, 0.02);
        let init = initial_spinor(&amp, &spec, &cfg).unwrap();
        let n0 = (init.up.norm_sqr(), init.down.norm_sqr());
        let field = FieldSpec::new(0.05).unwrap();
        let snaps = evolve(&init, &spec, &field, &cfg).unwrap();
        let last = snaps.last().unwrap();
        assert!((last.up.norm_sqr() / n0.0 - 1.0).abs() < 1e-8);
        assert!((last.down.norm_sqr() / n0.1 - 1.0).abs() < 1e-8);
        let m = asymptotic_spin_measurement(last, &spec, n0).unwrap();
        assert!(m.t_up > m.t_dn);
        assert!(m.tr.sz > 0.0 && m.reflected.sz < 0.0);
        assert!((m.t_up + m.r_up - 1.0).abs() < 1e-8);
    }
}
