//! Half-integer spin-weighted spherical calculus.
//!
//! Fields on the sphere are stored spectrally as coefficients over the
//! spin-weighted harmonics `sY_{lm}`, realized through Wigner small-d
//! functions:
//!
//! ```text
//! sY_{lm}(theta, phi) = sqrt((2l+1)/4pi) * exp(i m phi) * d^l_{-m, s}(theta)
//! ```
//!
//! With this normalization the ladder operators act mode-diagonally as
//!
//! ```text
//! eth  sY_{lm} = +sqrt((l-s)(l+s+1)) (s+1)Y_{lm}
//! eth' sY_{lm} = -sqrt((l+s)(l-s+1)) (s-1)Y_{lm}
//! ```
//!
//! which matches the explicit chart operators
//! `eth  = -(d_theta + (i/sin theta) d_phi - s cot theta)` and
//! `eth' = -(d_theta - (i/sin theta) d_phi + s cot theta)`;
//! the correspondence is pinned by the calibration test in this module.
//!
//! All indices are stored doubled (`2s`, `2l`, `2m`) so half-integers stay
//! exact. Pointwise evaluation exists for I/O and oracle projections only;
//! the solvers never need an angular collocation grid.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::Half;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AngularError {
    #[error("invalid mode (2l={l2}, 2m={m2}) for spin 2s={s2}")]
    InvalidMode { s2: Half, l2: Half, m2: Half },
    #[error("band limit 2l_max={lmax2} invalid for spin 2s={s2}")]
    InvalidBandLimit { s2: Half, lmax2: Half },
    #[error("spin mismatch: 2s={left} vs 2s={right}")]
    SpinMismatch { left: Half, right: Half },
    #[error("band limit mismatch: 2l_max={left} vs 2l_max={right}")]
    BandLimitMismatch { left: Half, right: Half },
    #[error("direction theta={theta} is a pole of the {chart:?} chart")]
    PoleInChart { theta: f64, chart: Chart },
}

/// Coordinate chart on the sphere. The north chart uses standard spherical
/// coordinates and is singular at `theta = pi`; the south chart uses
/// `(pi - theta, -phi)` and is singular at `theta = 0`. In the overlap the
/// two frames differ by the fixed transition phase `exp(i pi s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    North,
    South,
}

/// A sphere direction in north-chart spherical coordinates (radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    /// The opposite direction, with the azimuth continued through `phi + pi`
    /// rather than wrapped: spin-weighted values with half-integer spin are
    /// only 4pi-periodic in `phi`, so the branch matters and this is the
    /// fixed one used by the vertex matching conditions.
    pub fn antipode(&self) -> Self {
        Self { theta: PI - self.theta, phi: self.phi + PI }
    }

    pub fn to_cartesian(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

const FACT_LEN: usize = 64;

fn factorials() -> &'static [f64; FACT_LEN] {
    static TABLE: std::sync::OnceLock<[f64; FACT_LEN]> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [1.0f64; FACT_LEN];
        for k in 1..FACT_LEN {
            t[k] = t[k - 1] * k as f64;
        }
        t
    })
}

/// Wigner small-d function `d^j_{m,n}(beta)` with doubled indices.
pub fn wigner_d(j2: Half, m2: Half, n2: Half, beta: f64) -> f64 {
    debug_assert!(valid_pair(j2, m2) && valid_pair(j2, n2));
    let f = factorials();
    let jp_m = ((j2 + m2) / 2) as usize;
    let jm_m = ((j2 - m2) / 2) as usize;
    let jp_n = ((j2 + n2) / 2) as usize;
    let jm_n = ((j2 - n2) / 2) as usize;
    let pref = (f[jp_m] * f[jm_m] * f[jp_n] * f[jm_n]).sqrt();
    let kmin = 0.max((n2 - m2) / 2);
    let kmax = (jp_n as Half).min(jm_m as Half);
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let mut total = 0.0;
    for k in kmin..=kmax {
        let ku = k as usize;
        let exp_c = j2 + (n2 - m2) / 2 - 2 * k;
        let exp_s = (m2 - n2) / 2 + 2 * k;
        let sign = if ((m2 - n2) / 2 + k) % 2 == 0 { 1.0 } else { -1.0 };
        let num = sign * c.powi(exp_c) * s.powi(exp_s);
        let den = f[jp_n - ku] * f[ku] * f[jm_m - ku] * f[(k + (m2 - n2) / 2) as usize];
        total += num / den;
    }
    pref * total
}

fn valid_pair(l2: Half, m2: Half) -> bool {
    l2 >= 0 && m2.abs() <= l2 && (l2 - m2) % 2 == 0
}

/// Spin-weighted spherical harmonic value in the north-chart frame.
pub fn spin_harmonic(s2: Half, l2: Half, m2: Half, theta: f64, phi: f64) -> Complex64 {
    let norm = (((l2 + 1) as f64) / (4.0 * PI)).sqrt();
    let phase = Complex64::from_polar(1.0, 0.5 * m2 as f64 * phi);
    norm * phase * wigner_d(l2, -m2, s2, theta)
}

/// Angular expansion of a spin-weighted complex scalar.
///
/// Coefficients are stored for `l = |s|, |s|+1, ..., l_max` and, within each
/// `l`-block, for `m = -l ... l` in unit steps. The L2 norm over the sphere is
/// the Euclidean norm of the coefficient vector (the basis is orthonormal).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    s2: Half,
    lmax2: Half,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    /// Zero field of spin `s` with band limit `l_max`.
    pub fn zero(s2: Half, lmax2: Half) -> Result<Self, AngularError> {
        if lmax2 < s2.abs() || (lmax2 - s2.abs()) % 2 != 0 {
            return Err(AngularError::InvalidBandLimit { s2, lmax2 });
        }
        let n = mode_count(s2, lmax2);
        Ok(Self { s2, lmax2, coeffs: vec![Complex64::default(); n] })
    }

    /// Field with the stated `(2l, 2m, coefficient)` entries, zeros elsewhere.
    pub fn from_modes(
        s2: Half,
        lmax2: Half,
        modes: &[(Half, Half, Complex64)],
    ) -> Result<Self, AngularError> {
        let mut f = Self::zero(s2, lmax2)?;
        for &(l2, m2, a) in modes {
            let idx = f.mode_index(l2, m2)?;
            f.coeffs[idx] = a;
        }
        Ok(f)
    }

    pub fn spin2(&self) -> Half {
        self.s2
    }

    pub fn lmax2(&self) -> Half {
        self.lmax2
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn mode_index(&self, l2: Half, m2: Half) -> Result<usize, AngularError> {
        mode_index(self.s2, self.lmax2, l2, m2)
            .ok_or(AngularError::InvalidMode { s2: self.s2, l2, m2 })
    }

    pub fn coeff(&self, l2: Half, m2: Half) -> Result<Complex64, AngularError> {
        Ok(self.coeffs[self.mode_index(l2, m2)?])
    }

    /// Iterator over `(2l, 2m, coefficient)`.
    pub fn modes(&self) -> impl Iterator<Item = (Half, Half, Complex64)> + '_ {
        mode_list(self.s2, self.lmax2)
            .zip(self.coeffs.iter())
            .map(|((l2, m2), &a)| (l2, m2, a))
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            s2: self.s2,
            lmax2: self.lmax2,
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, AngularError> {
        self.check_compatible(other)?;
        Ok(Self {
            s2: self.s2,
            lmax2: self.lmax2,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, AngularError> {
        self.check_compatible(other)?;
        Ok(Self {
            s2: self.s2,
            lmax2: self.lmax2,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        })
    }

    fn check_compatible(&self, other: &Self) -> Result<(), AngularError> {
        if self.s2 != other.s2 {
            return Err(AngularError::SpinMismatch { left: self.s2, right: other.s2 });
        }
        if self.lmax2 != other.lmax2 {
            return Err(AngularError::BandLimitMismatch { left: self.lmax2, right: other.lmax2 });
        }
        Ok(())
    }

    /// Spin-raising ladder operator.
    pub fn eth_raise(&self) -> Self {
        let s2 = self.s2 + 2;
        let lmin_out = s2.abs();
        let mut out = Self::zero(s2, self.lmax2.max(lmin_out)).expect("band limit grows with spin");
        for (l2, m2, a) in self.modes() {
            if l2 < lmin_out {
                continue; // source mode cannot exist at the higher spin
            }
            let lam = raise_coefficient(l2, self.s2);
            let idx = out.mode_index(l2, m2).expect("target mode exists");
            out.coeffs[idx] = lam * a;
        }
        out
    }

    /// Spin-lowering ladder operator.
    pub fn eth_lower(&self) -> Self {
        let s2 = self.s2 - 2;
        let lmin_out = s2.abs();
        let mut out = Self::zero(s2, self.lmax2.max(lmin_out)).expect("band limit grows with spin");
        for (l2, m2, a) in self.modes() {
            if l2 < lmin_out {
                continue;
            }
            let lam = lower_coefficient(l2, self.s2);
            let idx = out.mode_index(l2, m2).expect("target mode exists");
            out.coeffs[idx] = lam * a;
        }
        out
    }

    /// Pointwise synthesis in the requested chart's frame.
    pub fn evaluate_at(&self, dir: Direction, chart: Chart) -> Result<Complex64, AngularError> {
        const POLE_TOL: f64 = 1e-12;
        match chart {
            Chart::North => {
                if (PI - dir.theta).abs() < POLE_TOL {
                    return Err(AngularError::PoleInChart { theta: dir.theta, chart });
                }
            }
            Chart::South => {
                if dir.theta.abs() < POLE_TOL {
                    return Err(AngularError::PoleInChart { theta: dir.theta, chart });
                }
            }
        }
        let north: Complex64 = self
            .modes()
            .map(|(l2, m2, a)| a * spin_harmonic(self.s2, l2, m2, dir.theta, dir.phi))
            .sum();
        match chart {
            Chart::North => Ok(north),
            // frame rotation m -> e^{i pi} m carries spin weight s into the phase
            Chart::South => Ok(north * Complex64::from_polar(1.0, 0.5 * PI * self.s2 as f64)),
        }
    }

    /// L2 sphere inner product `<f, g> = sum a conj(b)`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64, AngularError> {
        self.check_compatible(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b.conj())
            .sum())
    }
}

/// `+sqrt((l-s)(l+s+1))`, the eth eigencoefficient at spin `s -> s+1`.
pub fn raise_coefficient(l2: Half, s2: Half) -> f64 {
    let a = 0.5 * (l2 - s2) as f64;
    let b = 0.5 * (l2 + s2) as f64 + 1.0;
    (a * b).sqrt()
}

/// `-sqrt((l+s)(l-s+1))`, the eth' eigencoefficient at spin `s -> s-1`.
pub fn lower_coefficient(l2: Half, s2: Half) -> f64 {
    let a = 0.5 * (l2 + s2) as f64;
    let b = 0.5 * (l2 - s2) as f64 + 1.0;
    -(a * b).sqrt()
}

pub fn mode_count(s2: Half, lmax2: Half) -> usize {
    let mut n = 0usize;
    let mut l2 = s2.abs();
    while l2 <= lmax2 {
        n += (l2 + 1) as usize;
        l2 += 2;
    }
    n
}

fn mode_index(s2: Half, lmax2: Half, l2: Half, m2: Half) -> Option<usize> {
    if !valid_pair(l2, m2) || l2 < s2.abs() || l2 > lmax2 || (l2 - s2.abs()) % 2 != 0 {
        return None;
    }
    let mut offset = 0usize;
    let mut k = s2.abs();
    while k < l2 {
        offset += (k + 1) as usize;
        k += 2;
    }
    Some(offset + ((m2 + l2) / 2) as usize)
}

/// Iterator over the `(2l, 2m)` pairs of a spin-`s` expansion.
pub fn mode_list(s2: Half, lmax2: Half) -> impl Iterator<Item = (Half, Half)> {
    let mut v = Vec::with_capacity(mode_count(s2, lmax2));
    let mut l2 = s2.abs();
    while l2 <= lmax2 {
        let mut m2 = -l2;
        while m2 <= l2 {
            v.push((l2, m2));
            m2 += 2;
        }
        l2 += 2;
    }
    v.into_iter()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = -p / dp;
            x += dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Project a pointwise function onto the spin-`s` basis by Gauss-Legendre x
/// uniform-phi quadrature. Exact for band-limited integrands when
/// `n_theta > l_max + 1` and `n_phi > 2 l_max + 1`.
pub fn project_function<F>(
    s2: Half,
    lmax2: Half,
    n_theta: usize,
    n_phi: usize,
    f: F,
) -> Result<SpectralField, AngularError>
where
    F: Fn(f64, f64) -> Complex64,
{
    let mut out = SpectralField::zero(s2, lmax2)?;
    let (x, w) = gauss_legendre(n_theta);
    let dphi = 2.0 * PI / n_phi as f64;
    // sample once, then take all mode inner products
    let thetas: Vec<f64> = x.iter().map(|&c| c.acos()).collect();
    let mut samples = vec![Complex64::default(); n_theta * n_phi];
    for (it, &theta) in thetas.iter().enumerate() {
        for ip in 0..n_phi {
            samples[it * n_phi + ip] = f(theta, ip as f64 * dphi);
        }
    }
    let modes: Vec<(Half, Half)> = mode_list(s2, lmax2).collect();
    for (k, &(l2, m2)) in modes.iter().enumerate() {
        let mut acc = Complex64::default();
        for (it, &theta) in thetas.iter().enumerate() {
            let mut row = Complex64::default();
            for ip in 0..n_phi {
                let phi = ip as f64 * dphi;
                row += samples[it * n_phi + ip]
                    * spin_harmonic(s2, l2, m2, theta, phi).conj();
            }
            acc += w[it] * row * dphi;
        }
        out.coeffs[k] = acc;
    }
    Ok(out)
}

/// Sphere integral of a pointwise function (quadrature oracle for tests and
/// aliasing checks).
pub fn sphere_integral<F>(n_theta: usize, n_phi: usize, f: F) -> Complex64
where
    F: Fn(f64, f64) -> Complex64,
{
    let (x, w) = gauss_legendre(n_theta);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut acc = Complex64::default();
    for (it, &c) in x.iter().enumerate() {
        let theta = c.acos();
        let mut row = Complex64::default();
        for ip in 0..n_phi {
            row += f(theta, ip as f64 * dphi);
        }
        acc += w[it] * row * dphi;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn wigner_d_half_and_one() {
        let b = 0.7f64;
        assert_abs_diff_eq!(wigner_d(1, 1, 1, b), (b / 2.0).cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(wigner_d(1, 1, -1, b), -(b / 2.0).sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(wigner_d(1, -1, 1, b), (b / 2.0).sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(wigner_d(2, 0, 0, b), b.cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(wigner_d(2, 2, 0, b), -b.sin() / 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(wigner_d(2, 2, 2, b), (1.0 + b.cos()) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn make_field_validates_modes() {
        assert!(SpectralField::from_modes(1, 1, &[(1, 1, c(1.0, 0.0))]).is_ok());
        // m out of range
        assert!(matches!(
            SpectralField::from_modes(1, 1, &[(1, 3, c(1.0, 0.0))]),
            Err(AngularError::InvalidMode { .. })
        ));
        // l below |s|
        assert!(matches!(
            SpectralField::from_modes(3, 5, &[(1, 1, c(1.0, 0.0))]),
            Err(AngularError::InvalidMode { .. })
        ));
        // parity of l vs s
        assert!(matches!(
            SpectralField::from_modes(1, 5, &[(2, 0, c(1.0, 0.0))]),
            Err(AngularError::InvalidMode { .. })
        ));
    }

    #[test]
    fn single_mode_norms() {
        let f = SpectralField::from_modes(1, 1, &[(1, 1, c(1.0, 0.0))]).unwrap();
        assert_abs_diff_eq!(f.norm(), 1.0, epsilon = 1e-15);
        let z = SpectralField::zero(-1, 3).unwrap();
        assert_abs_diff_eq!(z.norm(), 0.0, epsilon = 1e-15);
        let g = SpectralField::from_modes(1, 3, &[(3, -1, c(0.0, 2.0))]).unwrap();
        assert_abs_diff_eq!(g.norm(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn ladder_top_and_bottom_weights() {
        // s = 1/2, l = 1/2 is top weight for raising: eth kills it
        let f = SpectralField::from_modes(1, 1, &[(1, 1, c(1.0, 0.0))]).unwrap();
        assert_abs_diff_eq!(f.eth_raise().norm(), 0.0, epsilon = 1e-15);
        // s = -1/2, l = 1/2 is bottom weight for lowering
        let g = SpectralField::from_modes(-1, 1, &[(1, 1, c(1.0, 0.0))]).unwrap();
        assert_abs_diff_eq!(g.eth_lower().norm(), 0.0, epsilon = 1e-15);
        // s = -1/2 -> +1/2 at l = 1/2 has coefficient 1
        let up = g.eth_raise();
        assert_abs_diff_eq!(up.coeff(1, 1).unwrap().re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn ladder_eigenvalue_identity() {
        // eth' eth f = -(l-s)(l+s+1) f for every mode up to the band limit
        for &(s2, lmax2) in &[(1, 9), (-1, 9), (3, 7)] {
            for (l2, m2) in mode_list(s2, lmax2) {
                let f = SpectralField::from_modes(s2, lmax2, &[(l2, m2, c(1.0, 0.5))]).unwrap();
                let round = f.eth_raise().eth_lower();
                let l = 0.5 * l2 as f64;
                let s = 0.5 * s2 as f64;
                let expect = -(l - s) * (l + s + 1.0);
                let got = round.coeff(l2, m2).unwrap();
                assert_abs_diff_eq!(got.re, expect * 1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(got.im, expect * 0.5, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn curvature_commutator() {
        // (eth eth' - eth' eth) f = 2 s f on spin-s modes
        for &(s2, l2, m2) in &[(1, 3, 1), (-1, 5, -3), (3, 5, 5)] {
            let f = SpectralField::from_modes(s2, 9, &[(l2, m2, c(0.3, -0.7))]).unwrap();
            let a = f.eth_lower().eth_raise();
            let b = f.eth_raise().eth_lower();
            // eth eth' - eth' eth = -2s on spin-s modes with these ladder
            // constants (equivalently eth' eth - eth eth' = +2s)
            let comm = a.sub(&b).unwrap();
            let expect = f.scale(c(-(s2 as f64), 0.0)); // -2s, doubled index
            let diff = comm.sub(&expect).unwrap();
            assert!(diff.norm() < 1e-12, "commutator failed for {:?}", (s2, l2, m2));
        }
    }

    #[test]
    fn ladder_linearity() {
        let f = SpectralField::from_modes(1, 5, &[(1, 1, c(1.0, 2.0)), (3, -1, c(0.5, 0.0))]).unwrap();
        let g = SpectralField::from_modes(1, 5, &[(5, 3, c(0.0, 1.0)), (3, -1, c(-2.0, 1.0))]).unwrap();
        let alpha = c(0.3, -1.1);
        let beta = c(2.0, 0.4);
        let lhs = f.scale(alpha).add(&g.scale(beta)).unwrap().eth_raise();
        let rhs = f.eth_raise().scale(alpha).add(&g.eth_raise().scale(beta)).unwrap();
        assert!(lhs.sub(&rhs).unwrap().norm() < 1e-14);
    }

    #[test]
    fn orthonormality_by_quadrature() {
        let pairs = [
            ((1, 1, 1), (1, 1, 1)),
            ((1, 1, 1), (1, 3, 1)),
            ((-1, 5, 3), (-1, 5, 3)),
            ((-1, 1, -1), (-1, 3, -1)),
            ((3, 3, 3), (3, 3, 3)),
        ];
        for &((s2, l2, m2), (_, l2b, m2b)) in &pairs {
            let v = sphere_integral(48, 48, |t, p| {
                spin_harmonic(s2, l2, m2, t, p) * spin_harmonic(s2, l2b, m2b, t, p).conj()
            });
            let expect = if (l2, m2) == (l2b, m2b) { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(v.re, expect, epsilon = 1e-10);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn parseval_by_quadrature() {
        let f = SpectralField::from_modes(
            -1,
            5,
            &[(1, -1, c(0.7, 0.2)), (3, 1, c(-0.3, 0.9)), (5, 5, c(0.1, 0.1))],
        )
        .unwrap();
        let quad = sphere_integral(48, 48, |t, p| {
            let v = f.evaluate_at(Direction::new(t, p), Chart::North).unwrap();
            Complex64::new(v.norm_sqr(), 0.0)
        });
        assert_abs_diff_eq!(quad.re, f.norm() * f.norm(), epsilon = 1e-10);
    }

    #[test]
    fn inner_product_is_sesquilinear_and_positive() {
        let f = SpectralField::from_modes(1, 3, &[(1, 1, c(1.0, -1.0))]).unwrap();
        let g = SpectralField::from_modes(1, 3, &[(1, 1, c(0.5, 0.5)), (3, 3, c(1.0, 0.0))]).unwrap();
        let alpha = c(0.2, 1.7);
        let lhs = f.scale(alpha).inner_product(&g).unwrap();
        let rhs = alpha * f.inner_product(&g).unwrap();
        assert_abs_diff_eq!(lhs.re, rhs.re, epsilon = 1e-14);
        assert_abs_diff_eq!(lhs.im, rhs.im, epsilon = 1e-14);
        let ff = f.inner_product(&f).unwrap();
        assert!(ff.re > 0.0 && ff.im.abs() < 1e-15);
        let z = SpectralField::zero(1, 3).unwrap();
        assert_abs_diff_eq!(z.inner_product(&z).unwrap().re, 0.0, epsilon = 1e-15);
        assert!(f.inner_product(&SpectralField::zero(-1, 3).unwrap()).is_err());
    }

    #[test]
    fn projection_recovers_band_limited_field() {
        let f = SpectralField::from_modes(
            1,
            9,
            &[(1, -1, c(0.3, 0.4)), (5, 3, c(-1.0, 0.2)), (9, -7, c(0.05, -0.6))],
        )
        .unwrap();
        let back = project_function(1, 9, 16, 16, |t, p| {
            f.evaluate_at(Direction::new(t, p), Chart::North).unwrap()
        })
        .unwrap();
        assert!(f.sub(&back).unwrap().norm() < 1e-12);
    }

    #[test]
    fn chart_transition_phase() {
        let f = SpectralField::from_modes(1, 3, &[(3, 1, c(0.8, -0.1))]).unwrap();
        let dir = Direction::new(1.3, 0.7);
        let north = f.evaluate_at(dir, Chart::North).unwrap();
        let south = f.evaluate_at(dir, Chart::South).unwrap();
        let phase = Complex64::from_polar(1.0, 0.5 * PI * 1.0);
        assert_abs_diff_eq!((south - north * phase).norm(), 0.0, epsilon = 1e-14);
        // pole rejection
        assert!(f.evaluate_at(Direction::new(PI, 0.0), Chart::North).is_err());
        assert!(f.evaluate_at(Direction::new(0.0, 0.0), Chart::South).is_err());
        assert!(f.evaluate_at(Direction::new(0.0, 0.0), Chart::North).is_ok());
    }

    #[test]
    fn ladder_matches_chart_differential_operator() {
        // eth f == -(d_theta + (i/sin) d_phi - s cot) f pointwise
        let f = SpectralField::from_modes(1, 5, &[(3, 1, c(0.4, 0.2)), (5, -3, c(-0.8, 0.6))])
            .unwrap();
        let up = f.eth_raise();
        let s = 0.5;
        let h = 1e-4;
        let (theta, phi) = (1.1, 2.3);
        let ev = |t: f64, p: f64| f.evaluate_at(Direction::new(t, p), Chart::North).unwrap();
        let dth = (ev(theta - 2.0 * h, phi) - ev(theta - h, phi) * 8.0
            + ev(theta + h, phi) * 8.0
            - ev(theta + 2.0 * h, phi))
            / (12.0 * h);
        let dph = (ev(theta, phi - 2.0 * h) - ev(theta, phi - h) * 8.0
            + ev(theta, phi + h) * 8.0
            - ev(theta, phi + 2.0 * h))
            / (12.0 * h);
        let want = -(dth + Complex64::i() * dph / theta.sin()
            - ev(theta, phi) * (s / theta.tan()));
        let got = up.evaluate_at(Direction::new(theta, phi), Chart::North).unwrap();
        assert!((got - want).norm() < 1e-10);
    }
}
