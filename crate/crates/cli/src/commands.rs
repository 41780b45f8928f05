use std::sync::Arc;

use larmor_core::oracle::{behind_barrier, initial_spinor, EvolverConfig};
use larmor_core::packet::Geometry;
use larmor_core::quadrature::{aligned_grid, uniform};
use larmor_core::*;

use crate::config::RunConfig;
use crate::output::{num, nums, Output};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Largest tolerated relative change of a clock under `--refine 2`.
pub const CONVERGENCE_TOL: f64 = 2e-3;
/// Largest tolerated relative gap between the oracle rotation and `omega_L tau_L`.
pub const VERIFY_TOL: f64 = 2e-2;

const SPIN_HEADER: [&str; 16] = [
    "t", "Sx_tr", "Sy_tr", "Sz_tr", "phi_tr", "theta_tr", "Sx_ref", "Sy_ref", "Sz_ref", "phi_ref", "theta_ref", "Sx_full",
    "Sy_full", "Sz_full", "phi_full", "theta_full",
];

fn nan(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn family(cfg: &RunConfig, spec: &BarrierSpec, amp: &SpectralAmplitude, window: TimeWindow) -> Result<PacketFamily> {
    let geometry = Arc::new(Geometry::new(spec, amp, &window, &cfg.resolution)?);
    Ok(PacketFamily::with_geometry(spec, amp, None, geometry, window)?)
}

fn strided(window: &TimeWindow, stride: usize) -> Vec<f64> {
    let all = window.times();
    let mut ts: Vec<f64> = all.iter().copied().step_by(stride).collect();
    if ts.last() != all.last() {
        ts.push(window.end);
    }
    ts
}

pub fn stationary(cfg: &RunConfig, out: &Output) -> Result<()> {
    let (k_min, k_max, points) = cfg.sweep;
    let ks = uniform(k_min, k_max, points - 1);
    let sweep = scattering_sweep(&cfg.spec, &ks)?;
    let rows: Vec<Vec<String>> =
        sweep.iter().map(|p| nums(&[p.k, energy(p.k), p.t, p.r, p.t + p.r, p.phase])).collect();
    out.csv("sweep.csv", &["k", "E", "T", "R", "T_plus_R", "phase"], &rows)?;
    let worst = sweep.iter().map(|p| (p.t + p.r - 1.0).abs()).fold(0.0, f64::max);
    if worst > 1e-10 {
        return Err(CliError::Convergence(format!("|T + R - 1| reaches {worst:.3e}")));
    }
    Ok(())
}

pub fn decompose(cfg: &RunConfig, out: &Output) -> Result<()> {
    let spec = &cfg.spec;
    let xs = aligned_grid(spec.a(), spec.b(), spec.a() - cfg.decompose_margin, spec.b() + cfg.decompose_margin, cfg.decompose_dx);
    let state = solve_stationary(spec, cfg.k0, xs.into())?;
    let d = larmor_core::decompose(&state, spec)?;
    let rows: Vec<Vec<String>> = state
        .psi_full
        .xs()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (f, t, r) = (state.psi_full.values()[i], d.psi_tr.values()[i], d.psi_ref.values()[i]);
            nums(&[x, spec.value(x), f.re, f.im, t.re, t.im, r.re, r.im])
        })
        .collect();
    out.csv(
        "profiles.csv",
        &["x", "V", "re_psi_full", "im_psi_full", "re_psi_tr", "im_psi_tr", "re_psi_ref", "im_psi_ref"],
        &rows,
    )?;
    let dwell = dwell_time_stationary(spec, cfg.k0)?;
    let row = nums(&[
        cfg.k0,
        energy(cfg.k0),
        state.t,
        state.r,
        d.a_in.re,
        d.a_in.im,
        d.b_in.re,
        d.b_in.im,
        d.a_in.norm_sqr(),
        d.b_in.norm_sqr(),
        dwell.tr,
        nan(dwell.reflected),
    ]);
    out.csv(
        "coefficients.csv",
        &["k", "E", "T", "R", "re_a_in", "im_a_in", "re_b_in", "im_b_in", "abs2_a_in", "abs2_b_in", "tau_dwell_tr", "tau_dwell_ref"],
        &[row],
    )
}

pub fn packet(cfg: &RunConfig, out: &Output) -> Result<()> {
    let amp = cfg.amplitude()?;
    let window = cfg.window(&cfg.spec, &amp, cfg.field.omega_l)?;
    let times = strided(&window, cfg.trace_stride);
    out.log(format!("packet: {} spectral samples, {} trace times", amp.len(), times.len()));

    let fam = family(cfg, &cfg.spec, &amp, window)?;
    let trace = occupancy_trace(&fam, &times);
    let rows: Vec<Vec<String>> = (0..times.len())
        .map(|i| nums(&[times[i], trace.p_tr[i], trace.p_ref[i], trace.n_tr[i], trace.n_ref[i]]))
        .collect();
    out.csv("occupancy.csv", &["t", "P_tr", "P_ref", "N_tr", "N_ref"], &rows)?;

    let spinor = SpinorPacket::with_window(&cfg.spec, &cfg.field, &amp, &cfg.resolution, window)?;
    let trace = spin_trace(&spinor, &times)?;
    let blank = BlochState { sx: f64::NAN, sy: f64::NAN, sz: f64::NAN, theta: f64::NAN, phi: f64::NAN };
    let rows: Vec<Vec<String>> = (0..times.len())
        .map(|i| {
            let r = trace.reflected.as_ref().map_or(blank, |r| r[i]);
            let mut row = vec![times[i]];
            for b in [trace.tr[i], r, trace.full[i]] {
                row.extend([b.sx, b.sy, b.sz, b.phi, b.theta]);
            }
            nums(&row)
        })
        .collect();
    out.csv("spin.csv", &SPIN_HEADER, &rows)
}

fn report_at(cfg: &RunConfig) -> Result<ClockReport> {
    let amp = cfg.amplitude()?;
    let window = cfg.window(&cfg.spec, &amp, cfg.field.omega_l)?;
    Ok(clock_report_in(&cfg.spec, &cfg.field, &amp, &cfg.resolution, window)?)
}

pub fn larmor(cfg: &RunConfig, out: &Output) -> Result<()> {
    out.log(format!("larmor: clocks at refine {}", cfg.refine));
    let report = report_at(cfg)?;
    let finer_cfg = RunConfig::resolve(cfg.table.clone(), 2)?;
    out.log(format!("larmor: clocks at refine {}", 2 * cfg.refine));
    let finer = report_at(&finer_cfg)?;
    let ratios = report.convergence_ratios(&finer);
    let rows: Vec<Vec<String>> = report
        .fields()
        .into_iter()
        .zip(finer.fields())
        .map(|((name, v), (_, f))| {
            let change = ratios.iter().find(|r| r.0 == name).map_or(f64::NAN, |r| r.1);
            vec![name.to_string(), num(v), num(f), num(change)]
        })
        .collect();
    out.csv("clocks.csv", &["quantity", "value", "refined", "relative_change"], &rows)?;
    let failing: Vec<String> =
        ratios.iter().filter(|r| !(r.1 <= CONVERGENCE_TOL)).map(|r| format!("{} {:.2e}", r.0, r.1)).collect();
    if !failing.is_empty() {
        return Err(CliError::Convergence(format!(
            "relative change under refinement above {CONVERGENCE_TOL:e}: {}",
            failing.join(", ")
        )));
    }
    Ok(())
}

pub fn hartman(cfg: &RunConfig, out: &Output) -> Result<()> {
    let v0 = cfg.height.ok_or_else(|| CliError::Config("hartman: needs a rectangular barrier (barrier.height)".into()))?;
    let e = energy(cfg.k0);
    if !(e < v0) {
        return Err(CliError::Config(format!("hartman: E = {e} must lie below barrier.height = {v0}")));
    }
    let kappa = (2.0 * (v0 - e)).sqrt();
    let a = cfg.spec.a();
    let mut rows = Vec::new();
    let mut ordering = Vec::new();
    let amp = if cfg.hartman_spin && cfg.field.omega_l > 0.0 { Some(cfg.amplitude()?) } else { None };
    for &kd in &cfg.kappa_d {
        let d = kd / kappa;
        let spec = BarrierSpec::rectangular(a, a + d, v0)?;
        let dwell = dwell_time_stationary(&spec, cfg.k0)?;
        let phase = phase_time(&spec, cfg.k0)?;
        let t = ScatteringSolution::new(&spec, cfg.k0)?.transmission();
        rows.push(nums(&[d, kd, dwell.tr, phase.traversal, t]));
        if let Some(amp) = &amp {
            out.log(format!("hartman: rotation angles at kappa d = {kd}"));
            let window = cfg.window(&spec, amp, cfg.field.omega_l)?;
            let spinor = SpinorPacket::with_window(&spec, &cfg.field, amp, &cfg.resolution, window)?;
            let rot = rotation_angles(&spinor)?;
            let d_ref = nan(rot.delta_phi_ref);
            ordering.push(nums(&[kd, d, rot.phi0_tr, rot.delta_phi_tr, d_ref, d_ref / rot.phi0_tr.abs(), rot.delta_phi_tr / d_ref]));
        }
    }
    out.csv("hartman.csv", &["d", "kappa_d", "tau_dwell_tr", "tau_phase", "T"], &rows)?;
    if !ordering.is_empty() {
        out.csv(
            "ordering.csv",
            &["kappa_d", "d", "phi0_tr", "delta_phi_tr", "delta_phi_ref", "ratio_ref_to_phi0", "ratio_tr_to_ref"],
            &ordering,
        )?;
    }
    Ok(())
}

struct Oracle {
    amp: SpectralAmplitude,
    window: TimeWindow,
    evolver: EvolverConfig,
    initial: SpinorField,
}

fn oracle(cfg: &RunConfig, omega_max: f64) -> Result<Oracle> {
    let amp = cfg.amplitude()?;
    let window = cfg.window(&cfg.spec, &amp, omega_max)?;
    let evolver = EvolverConfig::covering(&cfg.spec, &amp, window.start, window.end, cfg.oracle_dx, cfg.oracle_dt);
    let initial = initial_spinor(&amp, &cfg.spec, &evolver)?;
    Ok(Oracle { amp, window, evolver, initial })
}

fn is_doubling(omegas: &[f64]) -> bool {
    omegas.len() == 3 && omegas.windows(2).all(|w| ((w[1] / w[0]) - 2.0).abs() < 1e-12)
}

pub fn verify(cfg: &RunConfig, out: &Output) -> Result<()> {
    let omega_max = cfg.verify_omegas.iter().copied().fold(0.0, f64::max);
    let o = oracle(cfg, omega_max)?;
    let fam = family(cfg, &cfg.spec, &o.amp, o.window)?;
    let (t_packet, r_packet) = fam.channel_weights();
    let tau = larmor_time_timedomain(&occupancy_trace(&fam, &o.window.times()), t_packet, r_packet)?;
    let n0 = (o.initial.up.norm_sqr(), o.initial.down.norm_sqr());

    let mut rows = Vec::new();
    let mut rot_tr = Vec::new();
    let mut rot_ref = Vec::new();
    let mut worst = 0.0f64;
    for &omega in &cfg.verify_omegas {
        out.log(format!("verify: oracle run at omega_L = {omega}"));
        let field = FieldSpec::with_region(omega, cfg.field.region)?;
        let spinor = SpinorPacket::with_window(&cfg.spec, &field, &o.amp, &cfg.resolution, o.window)?;
        let phi0 = initial_angles(&spinor)?;
        let snaps = evolve(&o.initial, &cfg.spec, &field, &o.evolver)?;
        let m = asymptotic_spin_measurement(snaps.last().expect("one snapshot"), &cfg.spec, n0)?;
        let channels = [("tr", m.tr.phi, phi0.phi_tr, tau.tr), ("ref", m.reflected.phi, phi0.phi_ref, nan(tau.reflected))];
        for (name, phi_inf, phi0, tau_l) in channels {
            let predicted = phi0 + omega * tau_l;
            let gap = (phi_inf - predicted).abs() / (omega * tau_l);
            worst = worst.max(if gap.is_nan() { f64::INFINITY } else { gap });
            let mut row = vec![num(omega), name.to_string()];
            row.extend(nums(&[phi_inf, phi0, tau_l, predicted, gap]));
            rows.push(row);
        }
        rot_tr.push((m.tr.phi - phi0.phi_tr) / omega);
        rot_ref.push((m.reflected.phi - phi0.phi_ref) / omega);
    }
    out.csv("verify.csv", &["omega_L", "channel", "phi_inf", "phi0", "tau_L", "predicted", "rel_gap"], &rows)?;

    if is_doubling(&cfg.verify_omegas) {
        let mut rows = Vec::new();
        for (name, f, tau_l) in [("tr", &rot_tr, tau.tr), ("ref", &rot_ref, nan(tau.reflected))] {
            let x = richardson(f[0], f[1], f[2]);
            let mut row = vec![name.to_string()];
            row.extend(nums(&[f[0], f[1], f[2], x, tau_l, ((x - tau_l) / tau_l).abs()]));
            rows.push(row);
        }
        out.csv("richardson.csv", &["channel", "rot_h", "rot_2h", "rot_4h", "extrapolated", "tau_L", "rel_gap"], &rows)?;
    } else {
        out.log("verify: omegas are not h, 2h, 4h; skipping richardson.csv");
    }

    if !(worst < VERIFY_TOL) {
        return Err(CliError::Convergence(format!("oracle rotation misses omega_L tau_L by {worst:.3e} (tolerance {VERIFY_TOL:e})")));
    }
    Ok(())
}

pub fn probe(cfg: &RunConfig, out: &Output) -> Result<()> {
    let omega = cfg.field.omega_l;
    let o = oracle(cfg, omega)?;
    let variants = [
        ("barrier", FieldSpec::new(omega)?),
        ("behind", behind_barrier(omega, &cfg.spec, cfg.probe_gap, cfg.probe_width)?),
        ("behind_off", behind_barrier(0.0, &cfg.spec, cfg.probe_gap, cfg.probe_width)?),
    ];
    let fields: Vec<FieldSpec> = variants.iter().map(|v| v.1).collect();
    out.log(format!("probe: {} oracle runs", fields.len()));
    let report = field_placement_probe(&o.initial, &cfg.spec, &fields, &o.evolver)?;
    let rows: Vec<Vec<String>> = variants
        .iter()
        .zip(&report.entries)
        .map(|((name, f), (_, m))| {
            let (lo, hi) = f.interval(&cfg.spec);
            let mut row = vec![name.to_string()];
            row.extend(nums(&[
                lo, hi, f.omega_l, m.tr.phi, m.tr.theta, m.tr.sz, m.reflected.phi, m.reflected.theta, m.reflected.sz,
                m.t_up, m.t_dn, m.r_up, m.r_dn,
            ]));
            row
        })
        .collect();
    out.csv(
        "probe.csv",
        &[
            "variant", "lo", "hi", "omega_L", "phi_tr", "theta_tr", "Sz_tr", "phi_ref", "theta_ref", "Sz_ref", "T_up",
            "T_dn", "R_up", "R_dn",
        ],
        &rows,
    )
}
