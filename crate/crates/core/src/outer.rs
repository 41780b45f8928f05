//! Exact overlaps of plane-wave superpositions on a finite interval.
//!
//! Fields of the form `f(x) = sum_j (p_j e^{i k_j x} + m_j e^{-i k_j x})` on a
//! uniform wavenumber grid have overlaps `int conj(f) g dx` that are
//! Toeplitz (difference wavenumbers) plus Hankel (sum wavenumbers) quadratic
//! forms in the coefficients. Both are evaluated with zero-padded FFTs.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// `int_{x1}^{x2} e^{iqx} dx`.
pub fn plane_wave_integral(q: f64, x1: f64, x2: f64) -> Complex64 {
    let half = 0.5 * (x2 - x1);
    let sinc = if (q * half).abs() < 1e-8 {
        2.0 * half * (1.0 - (q * half).powi(2) / 6.0)
    } else {
        2.0 * (q * half).sin() / q
    };
    Complex64::from_polar(sinc, 0.5 * q * (x1 + x2))
}

/// Zero-padded transforms of the coefficient vectors of one field.
#[derive(Debug, Clone)]
pub struct WaveSpectrum {
    p: Vec<Complex64>,
    m: Option<Vec<Complex64>>,
}

pub struct OverlapKernel {
    n: usize,
    len: usize,
    /// Kernels for the (p,p), (m,m), (p,m) and (m,p) couplings.
    pp: Vec<Complex64>,
    mm: Vec<Complex64>,
    pm: Vec<Complex64>,
    mp: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for OverlapKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OverlapKernel").field("n", &self.n).field("len", &self.len).finish()
    }
}

impl OverlapKernel {
    /// Kernel for wavenumbers `k_min + j dk`, `j < n`, on `[x1, x2]`.
    pub fn new(k_min: f64, dk: f64, n: usize, x1: f64, x2: f64) -> Self {
        let len = (2 * n - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(len);
        let zero = Complex64::new(0.0, 0.0);
        let mut pp = vec![zero; len];
        let mut mm = vec![zero; len];
        for d in 0..n {
            let t = plane_wave_integral(d as f64 * dk, x1, x2);
            let idx_neg = (len - d) % len;
            // Difference kernel I(k_l - k_j) sits at index (j - l) mod len.
            pp[idx_neg] = t;
            pp[d] = t.conj();
            mm[d] = t;
            mm[idx_neg] = t.conj();
        }
        let mut mp = vec![zero; len];
        for s in 0..(2 * n - 1) {
            mp[s] = plane_wave_integral(2.0 * k_min + s as f64 * dk, x1, x2);
        }
        let mut pm: Vec<Complex64> = mp.iter().map(|v| v.conj()).collect();
        for v in [&mut pp, &mut mm, &mut pm, &mut mp] {
            fft.process(v);
        }
        OverlapKernel { n, len, pp, mm, pm, mp, fft }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn transform(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.n);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        buf[..self.n].copy_from_slice(v);
        self.fft.process(&mut buf);
        buf
    }

    pub fn spectrum(&self, p: &[Complex64], m: Option<&[Complex64]>) -> WaveSpectrum {
        WaveSpectrum { p: self.transform(p), m: m.map(|m| self.transform(m)) }
    }

    /// `int_{x1}^{x2} conj(f) g dx`.
    pub fn overlap(&self, f: &WaveSpectrum, g: &WaveSpectrum) -> Complex64 {
        let l = self.len;
        let neg = |i: usize| (l - i) % l;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..l {
            let mut gp = self.pp[i] * g.p[i];
            if let Some(gm) = &g.m {
                gp += self.pm[i] * gm[neg(i)];
            }
            acc += f.p[i].conj() * gp;
            if let Some(fm) = &f.m {
                let mut gm_term = self.mp[i] * g.p[neg(i)];
                if let Some(gm) = &g.m {
                    gm_term += self.mm[i] * gm[i];
                }
                acc += fm[i].conj() * gm_term;
            }
        }
        acc / l as f64
    }

    pub fn norm_sqr(&self, f: &WaveSpectrum) -> f64 {
        self.overlap(f, f).re
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(
        ks: &[f64],
        x1: f64,
        x2: f64,
        f: (&[Complex64], &[Complex64]),
        g: (&[Complex64], &[Complex64]),
    ) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &kj) in ks.iter().enumerate() {
            for (l, &kl) in ks.iter().enumerate() {
                acc += f.0[j].conj() * g.0[l] * plane_wave_integral(kl - kj, x1, x2);
                acc += f.1[j].conj() * g.1[l] * plane_wave_integral(kj - kl, x1, x2);
                acc += f.0[j].conj() * g.1[l] * plane_wave_integral(-kj - kl, x1, x2);
                acc += f.1[j].conj() * g.0[l] * plane_wave_integral(kj + kl, x1, x2);
            }
        }
        acc
    }

    fn coeffs(n: usize, seed: f64) -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                let x = i as f64 + seed;
                Complex64::new((1.3 * x).sin(), (0.7 * x * x).cos())
            })
            .collect()
    }

    #[test]
    fn closed_form_integral() {
        let v = plane_wave_integral(0.0, -1.0, 2.0);
        assert!((v - 3.0).norm() < 1e-15);
        let q = 0.37;
        let direct = ((Complex64::i() * q * 2.0).exp() - (Complex64::i() * q * -1.0).exp()) / (Complex64::i() * q);
        assert!((plane_wave_integral(q, -1.0, 2.0) - direct).norm() < 1e-14);
    }

    #[test]
    fn fft_overlap_matches_double_sum() {
        let n = 37;
        let (k_min, dk) = (0.8, 0.013);
        let ks: Vec<f64> = (0..n).map(|j| k_min + j as f64 * dk).collect();
        let (x1, x2) = (-60.0, 4.5);
        let kern = OverlapKernel::new(k_min, dk, n, x1, x2);
        let (fp, fm, gp, gm) = (coeffs(n, 0.1), coeffs(n, 2.0), coeffs(n, 5.5), coeffs(n, 9.0));
        let f = kern.spectrum(&fp, Some(&fm));
        let g = kern.spectrum(&gp, Some(&gm));
        let fast = kern.overlap(&f, &g);
        let slow = brute(&ks, x1, x2, (&fp, &fm), (&gp, &gm));
        assert!((fast - slow).norm() < 1e-10 * slow.norm(), "{fast} vs {slow}");

        let zero = vec![Complex64::new(0.0, 0.0); n];
        let f = kern.spectrum(&fp, None);
        let g = kern.spectrum(&gp, None);
        let slow = brute(&ks, x1, x2, (&fp, &zero), (&gp, &zero));
        assert!((kern.overlap(&f, &g) - slow).norm() < 1e-10 * slow.norm());
    }

    #[test]
    fn norm_matches_fine_quadrature() {
        let n = 21;
        let (k_min, dk) = (1.0, 0.05);
        let (x1, x2) = (-3.0, 2.0);
        let kern = OverlapKernel::new(k_min, dk, n, x1, x2);
        let (p, m) = (coeffs(n, 0.3), coeffs(n, 1.7));
        let nrm = kern.norm_sqr(&kern.spectrum(&p, Some(&m)));
        let xs = crate::quadrature::uniform(x1, x2, 20000);
        let dens: Vec<f64> = xs
            .iter()
            .map(|&x| {
                (0..n)
                    .map(|j| {
                        let k = k_min + j as f64 * dk;
                        p[j] * Complex64::from_polar(1.0, k * x) + m[j] * Complex64::from_polar(1.0, -k * x)
                    })
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .collect();
        let quad = crate::quadrature::trapezoid(&xs, &dens);
        assert!((nrm - quad).abs() < 1e-6 * quad);
    }
}
