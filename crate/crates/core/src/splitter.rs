//! Splitting a stationary state into transmitted and reflected parts.
//!
//! The reflected part is the multiple of the odd solution `u` (with
//! `u(x_c) = 0`, `u'(x_c) = 1`) that carries the whole reflected wave
//! `B_out e^{-ikx}` on the left, cut off at the midpoint. Everything else is
//! the transmitted part.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{BarrierSpec, ComplexField, Piece};
use crate::quadrature::node_index;
use crate::stationary::{ScatteringSolution, StationaryState, Trajectory};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Below this reflection coefficient the reflected part is taken as zero.
pub const R_DEGENERATE: f64 = 1e-24;

/// The real solution `u` on `(-inf, x_c]` with `u(x_c) = 0`, `u'(x_c) = 1`,
/// equal to `alpha e^{ikx} + beta e^{-ikx}` for `x <= a`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardSolution {
    k: f64,
    a: f64,
    xc: f64,
    traj: Trajectory,
    alpha_s: Complex64,
    beta_s: Complex64,
    log_a: f64,
}

impl BackwardSolution {
    pub fn new(spec: &BarrierSpec, k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidParameter(format!("wavenumber k = {k} must be > 0")));
        }
        let xc = spec.midpoint();
        let left: Vec<Piece> = spec.pieces().iter().copied().take_while(|p| p.right <= xc).collect();
        let one = Complex64::new(1.0, 0.0);
        let traj = Trajectory::leftward(&left, 0.5 * k * k, [Complex64::new(0.0, 0.0), one]);
        let ([u, du], log_a) = traj.at_left();
        let a = spec.a();
        let ea = Complex64::from_polar(1.0, k * a);
        let alpha_s = 0.5 * (u + du / (I * k)) / ea;
        let beta_s = 0.5 * (u - du / (I * k)) * ea;
        if beta_s.norm() == 0.0 {
            return Err(Error::DegenerateDecomposition);
        }
        Ok(BackwardSolution { k, a, xc, traj, alpha_s, beta_s, log_a })
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha_s * self.log_a.exp()
    }

    pub fn beta(&self) -> Complex64 {
        self.beta_s * self.log_a.exp()
    }

    /// `(u, u')` at `x <= x_c`, divided by `exp(log_a)`.
    fn eval_scaled(&self, x: f64) -> (Complex64, Complex64) {
        if x <= self.a {
            let e = Complex64::from_polar(1.0, self.k * x);
            let p = self.alpha_s * e;
            let m = self.beta_s * e.conj();
            (p + m, I * self.k * (p - m))
        } else {
            let ([u, du], log) = self.traj.eval(x.min(self.xc));
            let f = (log - self.log_a).exp();
            (u * f, du * f)
        }
    }

    /// `(u, u')` at `x <= x_c`.
    pub fn eval(&self, x: f64) -> (Complex64, Complex64) {
        let s = self.log_a.exp();
        let (u, du) = self.eval_scaled(x);
        (u * s, du * s)
    }

    /// `u` sampled on the grid nodes with `x <= x_c`.
    pub fn sample(&self, xs: Arc<[f64]>) -> Result<ComplexField> {
        let n = xs.partition_point(|&x| x <= self.xc);
        let sub: Arc<[f64]> = xs[..n].into();
        ComplexField::from_fn(sub, |x| self.eval(x).0)
    }
}

/// `(alpha, beta, u)`, with `u` sampled on the part of `xgrid` left of `x_c`.
pub fn backward_solution(
    spec: &BarrierSpec,
    k: f64,
    xgrid: Arc<[f64]>,
) -> Result<(Complex64, Complex64, ComplexField)> {
    let bs = BackwardSolution::new(spec, k)?;
    Ok((bs.alpha(), bs.beta(), bs.sample(xgrid)?))
}

/// Pointwise evaluator of `psi_full`, `psi_tr` and `psi_ref` for one wavenumber.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSolution {
    full: ScatteringSolution,
    back: BackwardSolution,
    /// `B_out / beta_s`; zero in the degenerate branch.
    coef: Complex64,
    a_in: Complex64,
    b_in: Complex64,
    degenerate: bool,
}

impl SplitSolution {
    pub fn new(spec: &BarrierSpec, k: f64) -> Result<Self> {
        let full = ScatteringSolution::new(spec, k)?;
        let back = BackwardSolution::new(spec, k)?;
        Ok(Self::from_parts(full, back))
    }

    fn from_parts(full: ScatteringSolution, back: BackwardSolution) -> Self {
        let degenerate = full.reflection() < R_DEGENERATE;
        let (coef, b_in) = if degenerate {
            (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
        } else {
            let coef = full.b_out() / back.beta_s;
            (coef, coef * back.alpha_s)
        };
        SplitSolution { full, back, coef, a_in: 1.0 - b_in, b_in, degenerate }
    }

    pub fn k(&self) -> f64 {
        self.full.k()
    }

    pub fn full(&self) -> &ScatteringSolution {
        &self.full
    }

    pub fn backward(&self) -> &BackwardSolution {
        &self.back
    }

    pub fn a_in(&self) -> Complex64 {
        self.a_in
    }

    pub fn b_in(&self) -> Complex64 {
        self.b_in
    }

    pub fn b_out(&self) -> Complex64 {
        self.full.b_out()
    }

    pub fn a_out(&self) -> Complex64 {
        self.full.a_out()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn psi_full(&self, x: f64) -> Complex64 {
        self.full.psi(x)
    }

    /// `(psi_ref, psi_ref')`; both zero for `x >= x_c`.
    pub fn eval_ref(&self, x: f64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        if self.degenerate || x >= self.back.xc {
            return (zero, zero);
        }
        let (u, du) = self.back.eval_scaled(x);
        (self.coef * u, self.coef * du)
    }

    pub fn psi_ref(&self, x: f64) -> Complex64 {
        let k = self.full.k();
        if x <= self.back.a && !self.degenerate {
            let e = Complex64::from_polar(1.0, k * x);
            return self.b_in * e + self.full.b_out() * e.conj();
        }
        self.eval_ref(x).0
    }

    pub fn psi_tr(&self, x: f64) -> Complex64 {
        if x <= self.back.a {
            return self.a_in * Complex64::from_polar(1.0, self.full.k() * x);
        }
        self.full.psi(x) - self.psi_ref(x)
    }
}

/// Per-wavenumber split of `psi_full` into `psi_tr + psi_ref` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub k: f64,
    pub psi_tr: ComplexField,
    pub psi_ref: ComplexField,
    pub a_in: Complex64,
    pub b_in: Complex64,
    pub split: SplitSolution,
}

pub fn decompose(state: &StationaryState, spec: &BarrierSpec) -> Result<Decomposition> {
    let xs = state.psi_full.grid().clone();
    let xc = spec.midpoint();
    let ic = node_index(&xs, xc).ok_or(Error::MidpointNotOnGrid(xc))?;
    let back = BackwardSolution::new(spec, state.k)?;
    let split = SplitSolution::from_parts(state.solution.clone(), back);
    // The sampled state may carry any incident amplitude; recover it.
    let unit = state.solution.sample(&xs);
    let den: f64 = unit.iter().map(|u| u.norm_sqr()).sum();
    let num: Complex64 = unit.iter().zip(state.psi_full.values()).map(|(u, f)| u.conj() * f).sum();
    let c = if den > 0.0 { num / den } else { Complex64::new(1.0, 0.0) };
    let mut refv: Vec<Complex64> = xs.iter().map(|&x| c * split.psi_ref(x)).collect();
    for v in &mut refv[ic..] {
        *v = Complex64::new(0.0, 0.0);
    }
    let trv: Vec<Complex64> = state.psi_full.values().iter().zip(&refv).map(|(f, r)| f - r).collect();
    Ok(Decomposition {
        k: state.k,
        psi_tr: ComplexField::new(xs.clone(), trv)?,
        psi_ref: ComplexField::new(xs, refv)?,
        a_in: split.a_in,
        b_in: split.b_in,
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Segment;
    use crate::quadrature::uniform;
    use crate::stationary::solve_stationary;

    fn rect(v0: f64, d: f64) -> BarrierSpec {
        BarrierSpec::rectangular(5.0, 5.0 + d, v0).unwrap()
    }

    /// Numerov integration of `u'' = 2 (V - E) u` leftward from the midpoint,
    /// then a plane-wave fit left of the barrier.
    fn numerov_alpha_beta(spec: &BarrierSpec, k: f64, h: f64) -> (Complex64, Complex64) {
        let e = 0.5 * k * k;
        let xc = spec.midpoint();
        let steps = ((xc - spec.a()) / h).round() as usize + 40;
        let f = |x: f64| {
            let v = if (x - spec.a()).abs() < 1e-9 * h {
                0.5 * (spec.value(x - 1e-12) + spec.value(x + 1e-12))
            } else {
                spec.value(x)
            };
            2.0 * (v - e)
        };
        let x = |j: usize| xc - j as f64 * h;
        let mut u = vec![0.0; steps + 1];
        u[1] = -h - f(xc) * h.powi(3) / 6.0;
        let c = h * h / 12.0;
        for j in 1..steps {
            let (fm, f0, fp) = (f(x(j - 1)), f(x(j)), f(x(j + 1)));
            u[j + 1] = (2.0 * u[j] * (1.0 + 5.0 * c * f0) - u[j - 1] * (1.0 - c * fm)) / (1.0 - c * fp);
        }
        let (x1, x2) = (x(steps), x(steps - 17));
        let (u1, u2) = (u[steps], u[steps - 17]);
        let e1 = Complex64::from_polar(1.0, k * x1);
        let e2 = Complex64::from_polar(1.0, k * x2);
        let det = e1 * e2.conj() - e2 * e1.conj();
        let alpha = (u1 * e2.conj() - u2 * e1.conj()) / det;
        let beta = (e1 * u2 - e2 * u1) / det;
        (alpha, beta)
    }

    #[test]
    fn backward_solution_matches_numerov() {
        let spec = rect(2.0, 1.0);
        let k = 2f64.sqrt();
        let bs = BackwardSolution::new(&spec, k).unwrap();
        let (alpha, beta) = numerov_alpha_beta(&spec, k, 2.5e-4);
        assert!((bs.alpha() - alpha).norm() < 1e-7, "{} vs {}", bs.alpha(), alpha);
        assert!((bs.beta() - beta).norm() < 1e-7, "{} vs {}", bs.beta(), beta);
        assert!((bs.alpha() - bs.beta().conj()).norm() < 1e-12);
    }

    #[test]
    fn free_backward_solution() {
        let spec = BarrierSpec::new(5.0, 6.0, vec![], 0.0).unwrap();
        let k = 0.9;
        let bs = BackwardSolution::new(&spec, k).unwrap();
        assert!((bs.alpha().norm() - bs.beta().norm()).abs() < 1e-14);
        for x in [-2.0, 4.0, 5.3] {
            let expect = (k * (x - 5.5)).sin() / k;
            assert!((bs.eval(x).0.re - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn stationary_b_in_value() {
        let s = SplitSolution::new(&rect(2.0, 1.0), 2f64.sqrt()).unwrap();
        let t = 1.0 / 2f64.sqrt().cosh().powi(2);
        let r = 1.0 - t;
        assert!((s.b_in().re - r).abs() < 1e-10);
        assert!((s.b_in().im - (r * t).sqrt()).abs() < 1e-10);
        assert!((s.b_in().re - 0.78923).abs() < 1e-5);
        assert!((s.b_in().im - 0.40786).abs() < 1e-5);
    }

    #[test]
    fn free_decomposition_is_degenerate() {
        let spec = BarrierSpec::new(5.0, 6.0, vec![], 0.0).unwrap();
        let xs: Arc<[f64]> = uniform(0.0, 11.0, 110).into();
        let st = solve_stationary(&spec, 1.2, xs).unwrap();
        let d = decompose(&st, &spec).unwrap();
        assert_eq!(d.b_in, Complex64::new(0.0, 0.0));
        assert_eq!(d.a_in, Complex64::new(1.0, 0.0));
        assert!(d.psi_ref.values().iter().all(|v| v.norm() == 0.0));
        assert_eq!(d.psi_tr, st.psi_full);
    }

    #[test]
    fn decomposition_on_grid() {
        let spec = BarrierSpec::new(
            3.0,
            7.0,
            vec![Segment { offset: 1.4, half_width: 0.6, height: 2.2 }],
            0.0,
        )
        .unwrap();
        let xs: Arc<[f64]> = uniform(-10.0, 20.0, 600).into();
        let st = solve_stationary(&spec, 1.3, xs.clone()).unwrap();
        let d = decompose(&st, &spec).unwrap();
        let ic = node_index(&xs, 5.0).unwrap();
        assert_eq!(d.psi_ref.values()[ic], Complex64::new(0.0, 0.0));
        assert!(d.psi_ref.values()[ic..].iter().all(|v| *v == Complex64::new(0.0, 0.0)));
        for ((f, t), r) in st.psi_full.values().iter().zip(d.psi_tr.values()).zip(d.psi_ref.values()) {
            assert!((f - t - r).norm() < 1e-12);
        }
        assert!((d.a_in.norm_sqr() - st.t).abs() < 1e-10);
        assert!((d.b_in.norm_sqr() - st.r).abs() < 1e-10);
        // Continuity of the analytic left form with the interior solution at a.
        let (l, _) = d.split.eval_ref(3.0);
        assert!((l - d.split.psi_ref(3.0 - 1e-14)).norm() < 1e-10);

        let off: Arc<[f64]> = uniform(-10.0, 20.0, 601).into();
        let st = solve_stationary(&spec, 1.3, off).unwrap();
        assert_eq!(decompose(&st, &spec), Err(Error::MidpointNotOnGrid(5.0)));
    }

    #[test]
    fn opaque_limit_b_in_tends_to_one() {
        let s = SplitSolution::new(&rect(2.0, 12.0), 2f64.sqrt()).unwrap();
        assert!((s.b_in() - 1.0).norm() < 1e-6);
        assert!((s.a_in().norm_sqr() / s.full().transmission() - 1.0).abs() < 1e-6);
    }
}
