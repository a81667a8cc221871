//! Metric models, double-null coordinates, adapted Newman-Penrose tetrads,
//! spin coefficients, cone-section curvature and the vertex conjugate-direction
//! structure.
//!
//! The implemented family is static and spherically symmetric,
//!
//! ```text
//! g = A(r)^2 dt^2 - B(r)^2 dr^2 - r^2 (dtheta^2 + sin^2 theta dphi^2)
//! ```
//!
//! with `A`, `B` analytic and even in `r` (polynomials in `r^2`), so the
//! optical functions are closed-form: `u = t - r*`, `v = t + r*` with
//! `r*(r) = \int_0^r B/A`. The lapse is `N = sqrt(2) A` and equals `sqrt(2)`
//! at the vertex once `A(0) = 1` is enforced through `scale_k`.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::angular::Direction;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("radial profile {name} must be positive on [0, {r_max}]; found {value} at r={r}")]
    NonPositiveProfile { name: &'static str, r: f64, value: f64, r_max: f64 },
    #[error("B(0) = {value}; the vertex is a regular point only for B(0) = 1")]
    SingularVertex { value: f64 },
    #[error("domain extent T_max must be positive, got {0}")]
    NonPositiveExtent(f64),
    #[error("point (t={t}, r={r}) outside the domain D_T (needs 0 <= r <= t <= {t_max})")]
    OutsideDomain { t: f64, r: f64, t_max: f64 },
    #[error("spin coefficients lose accuracy below r = {floor}; got r = {r}")]
    BelowAccuracyFloor { r: f64, floor: f64 },
    #[error("spin coefficients are defined here for the Adapted and GradientL tetrads only")]
    UnsupportedTetradChoice,
    #[error("degenerate vertex tetrad: {0}")]
    DegenerateTetrad(String),
}

/// Even radial profile given as polynomial coefficients in `r^2`
/// (`coeffs[k]` multiplies `r^{2k}`), which enforces `A'(0) = 0` syntactically.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPoly {
    coeffs: Vec<f64>,
}

impl RadialPoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let coeffs = if coeffs.is_empty() { vec![1.0] } else { coeffs };
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let x = r * r;
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// d/dr of the profile (exact).
    pub fn deriv(&self, r: f64) -> f64 {
        let x = r * r;
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(1) {
            acc += c * (2 * k) as f64 * x.powi(k as i32 - 1);
        }
        acc * r
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricKind {
    Minkowski,
    StaticSpherical { a: RadialPoly, b: RadialPoly },
}

/// Description accepted by [`build_metric`].
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricModel {
    kind: MetricKind,
    t_max: f64,
    scale_k: f64,
    r_max: f64,
}

/// A point of a constant-time slice; on the cone `u = t - r* = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicePoint {
    pub t: f64,
    pub r: f64,
    pub dir: Direction,
}

/// A point of the blown-up cone, labelled by the affine-null coordinate
/// `v in [0, 2T]` and the generator direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConePoint {
    pub v: f64,
    pub dir: Direction,
}

pub fn build_metric(spec: &MetricSpec) -> Result<MetricModel, GeometryError> {
    if spec.t_max <= 0.0 {
        return Err(GeometryError::NonPositiveExtent(spec.t_max));
    }
    let mut kind = spec.kind.clone();
    let mut scale_k = 1.0;
    // generous radial bound: the lambda-cone runs reach slightly past r = T
    let r_max = 1.5 * spec.t_max;
    if let MetricKind::StaticSpherical { a, b } = &mut kind {
        let b0 = b.eval(0.0);
        if (b0 - 1.0).abs() > 1e-14 {
            return Err(GeometryError::SingularVertex { value: b0 });
        }
        for k in 0..=200 {
            let r = r_max * k as f64 / 200.0;
            let av = a.eval(r);
            let bv = b.eval(r);
            if av <= 0.0 {
                return Err(GeometryError::NonPositiveProfile { name: "A", r, value: av, r_max });
            }
            if bv <= 0.0 {
                return Err(GeometryError::NonPositiveProfile { name: "B", r, value: bv, r_max });
            }
        }
        // rescale (u, v, t) so the lapse at the vertex is exactly sqrt(2)
        let a0 = a.eval(0.0);
        if (a0 - 1.0).abs() > 0.0 {
            scale_k = a0;
            let coeffs: Vec<f64> = a.coeffs().iter().map(|c| c / a0).collect();
            *a = RadialPoly::new(coeffs);
        }
    }
    Ok(MetricModel { kind, t_max: spec.t_max, scale_k, r_max })
}

pub fn minkowski(t_max: f64) -> MetricModel {
    build_metric(&MetricSpec { kind: MetricKind::Minkowski, t_max }).expect("flat model")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TetradChoice {
    /// `l + n = T`, the foliation-adapted normalized tetrad.
    Adapted,
    /// `L = grad u`, `Nvec = (N/2) n`; the generators of `L` are geodesics.
    GradientL,
    /// `Lhat = L`, `Nhat = r^2 Nvec`, `mhat = r m` (transverse spinor scaled by r).
    Hatted,
}

/// Coordinate components are ordered `(t, r, theta, phi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NullTetrad {
    pub choice: TetradChoice,
    pub l: [f64; 4],
    pub n: [f64; 4],
    pub m: [Complex64; 4],
    pub lapse: f64,
    /// Angular shift of `n` in `lemma` form `n = (2/N)(d_u + V_omega)`;
    /// identically zero for the implemented metric family.
    pub v_shift: [f64; 3],
}

/// The twelve Newman-Penrose spin coefficients at a point.
/// `lambda_c` names the NP coefficient usually written `lambda`, to avoid a
/// clash with the cone-opening parameter used by the evolution module.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinCoefficientSet {
    pub choice: TetradChoice,
    pub point: SlicePoint,
    pub kappa: Complex64,
    pub sigma: Complex64,
    pub rho: Complex64,
    pub tau: Complex64,
    pub epsilon: Complex64,
    pub beta: Complex64,
    pub alpha: Complex64,
    pub gamma: Complex64,
    pub pi: Complex64,
    pub mu: Complex64,
    pub lambda_c: Complex64,
    pub nu: Complex64,
}

impl MetricModel {
    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn scale_k(&self) -> f64 {
        self.scale_k
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.kind, MetricKind::Minkowski)
    }

    pub fn a(&self, r: f64) -> f64 {
        match &self.kind {
            MetricKind::Minkowski => 1.0,
            MetricKind::StaticSpherical { a, .. } => a.eval(r),
        }
    }

    pub fn b(&self, r: f64) -> f64 {
        match &self.kind {
            MetricKind::Minkowski => 1.0,
            MetricKind::StaticSpherical { b, .. } => b.eval(r),
        }
    }

    pub fn da_dr(&self, r: f64) -> f64 {
        match &self.kind {
            MetricKind::Minkowski => 0.0,
            MetricKind::StaticSpherical { a, .. } => a.deriv(r),
        }
    }

    pub fn db_dr(&self, r: f64) -> f64 {
        match &self.kind {
            MetricKind::Minkowski => 0.0,
            MetricKind::StaticSpherical { b, .. } => b.deriv(r),
        }
    }

    /// Lapse `N(r) = sqrt(2) A(r)`.
    pub fn lapse(&self, r: f64) -> f64 {
        2f64.sqrt() * self.a(r)
    }

    /// Tortoise-type radius `r*(r) = \int_0^r B/A`, so that `u = t - r*`,
    /// `v = t + r*` are optical functions.
    pub fn r_star(&self, r: f64) -> f64 {
        match &self.kind {
            MetricKind::Minkowski => r,
            MetricKind::StaticSpherical { .. } => {
                // 20-node Gauss-Legendre on [0, r]; the integrand is analytic
                let (x, w) = crate::angular::gauss_legendre(20);
                let mut acc = 0.0;
                for (xi, wi) in x.iter().zip(w.iter()) {
                    let rr = 0.5 * r * (xi + 1.0);
                    acc += wi * self.b(rr) / self.a(rr);
                }
                0.5 * r * acc
            }
        }
    }

    /// Inverse of `r_star` by Newton iteration.
    pub fn r_of_r_star(&self, rs: f64) -> f64 {
        match &self.kind {
            MetricKind::Minkowski => rs,
            MetricKind::StaticSpherical { .. } => {
                if rs == 0.0 {
                    return 0.0;
                }
                let mut r = rs;
                for _ in 0..60 {
                    let f = self.r_star(r) - rs;
                    let df = self.b(r) / self.a(r);
                    let dr = f / df;
                    r -= dr;
                    if r < 0.0 {
                        r = 0.5 * (r + dr);
                    }
                    if dr.abs() < 1e-15 * (1.0 + r.abs()) {
                        break;
                    }
                }
                r
            }
        }
    }

    /// Areal radius of the cone section at null coordinate `v` (on the cone
    /// `r* = v/2`).
    pub fn cone_radius(&self, v: f64) -> f64 {
        self.r_of_r_star(0.5 * v)
    }

    /// Metric contraction of two coordinate vectors at radius `r`, angle
    /// `theta`.
    pub fn dot(&self, r: f64, theta: f64, x: &[Complex64; 4], y: &[Complex64; 4]) -> Complex64 {
        let a2 = self.a(r).powi(2);
        let b2 = self.b(r).powi(2);
        let r2 = r * r;
        a2 * x[0] * y[0] - b2 * x[1] * y[1] - r2 * x[2] * y[2] - r2 * theta.sin().powi(2) * x[3] * y[3]
    }

    /// Whether the point lies in `D_T` (inside or on the cone, below `T`).
    pub fn contains(&self, p: &SlicePoint) -> bool {
        p.r >= 0.0 && p.t <= self.t_max && self.r_star(p.r) <= p.t + 1e-12
    }

    /// Nonzero Christoffel symbols; everything else vanishes by symmetry.
    fn christoffel(&self, r: f64, theta: f64) -> Christoffel {
        let a = self.a(r);
        let b = self.b(r);
        let da = self.da_dr(r);
        let db = self.db_dr(r);
        Christoffel {
            t_tr: da / a,
            r_tt: a * da / (b * b),
            r_rr: db / b,
            r_thth: -r / (b * b),
            r_phph: -r * theta.sin().powi(2) / (b * b),
            th_rth: 1.0 / r,
            th_phph: -theta.sin() * theta.cos(),
            ph_rph: 1.0 / r,
            ph_thph: theta.cos() / theta.sin(),
        }
    }

    /// `(nabla_X Y)^a = X^b d_b Y^a + Gamma^a_{bc} X^b Y^c` where `Y` is given
    /// as a field of coordinate components over `(t, r, theta, phi)`.
    /// Partial derivatives are 4th-order centered differences with step
    /// `h = max(1e-5, 1e-3 r)` per coordinate.
    pub fn covariant_directional<F>(
        &self,
        p: &SlicePoint,
        x: &[Complex64; 4],
        field: F,
    ) -> [Complex64; 4]
    where
        F: Fn(&SlicePoint) -> [Complex64; 4],
    {
        // step must not cross r = 0 where the angular frame flips
        let h = (1e-3 * p.r).max(1e-5).min(0.25 * p.r.max(1e-30));
        let y0 = field(p);
        let mut out = [Complex64::default(); 4];
        // partial-derivative part
        for coord in 0..4 {
            if x[coord].norm() == 0.0 {
                continue;
            }
            let shift = |d: f64| -> [Complex64; 4] {
                let mut q = *p;
                match coord {
                    0 => q.t += d,
                    1 => q.r += d,
                    2 => q.dir.theta += d,
                    _ => q.dir.phi += d,
                }
                field(&q)
            };
            let m2 = shift(-2.0 * h);
            let m1 = shift(-h);
            let p1 = shift(h);
            let p2 = shift(2.0 * h);
            for a in 0..4 {
                let d = (m2[a] - 8.0 * m1[a] + 8.0 * p1[a] - p2[a]) / (12.0 * h);
                out[a] += x[coord] * d;
            }
        }
        // connection part
        let g = self.christoffel(p.r, p.dir.theta);
        let add = |out: &mut [Complex64; 4], a: usize, xb: Complex64, yc: Complex64, gamma: f64| {
            out[a] += gamma * xb * yc;
        };
        add(&mut out, 0, x[0], y0[1], g.t_tr);
        add(&mut out, 0, x[1], y0[0], g.t_tr);
        add(&mut out, 1, x[0], y0[0], g.r_tt);
        add(&mut out, 1, x[1], y0[1], g.r_rr);
        add(&mut out, 1, x[2], y0[2], g.r_thth);
        add(&mut out, 1, x[3], y0[3], g.r_phph);
        add(&mut out, 2, x[1], y0[2], g.th_rth);
        add(&mut out, 2, x[2], y0[1], g.th_rth);
        add(&mut out, 2, x[3], y0[3], g.th_phph);
        add(&mut out, 3, x[1], y0[3], g.ph_rph);
        add(&mut out, 3, x[3], y0[1], g.ph_rph);
        add(&mut out, 3, x[2], y0[3], g.ph_thph);
        add(&mut out, 3, x[3], y0[2], g.ph_thph);
        out
    }
}

struct Christoffel {
    t_tr: f64,
    r_tt: f64,
    r_rr: f64,
    r_thth: f64,
    r_phph: f64,
    th_rth: f64,
    th_phph: f64,
    ph_rph: f64,
    ph_thph: f64,
}

fn real4(v: [f64; 4]) -> [Complex64; 4] {
    [v[0].into(), v[1].into(), v[2].into(), v[3].into()]
}

/// Tetrad vectors as fields (needed for finite-difference derivatives).
fn tetrad_raw(model: &MetricModel, p: &SlicePoint, choice: TetradChoice) -> NullTetrad {
    let a = model.a(p.r);
    let b = model.b(p.r);
    let s2 = 2f64.sqrt();
    let sin_t = p.dir.theta.sin();
    let (l, n, m) = match choice {
        TetradChoice::Adapted => {
            let l = [1.0 / (s2 * a), 1.0 / (s2 * b), 0.0, 0.0];
            let n = [1.0 / (s2 * a), -1.0 / (s2 * b), 0.0, 0.0];
            let m = [
                Complex64::default(),
                Complex64::default(),
                Complex64::new(1.0 / (p.r * s2), 0.0),
                Complex64::new(0.0, 1.0 / (p.r * s2 * sin_t)),
            ];
            (l, n, m)
        }
        TetradChoice::GradientL => {
            let l = [1.0 / (a * a), 1.0 / (a * b), 0.0, 0.0];
            let n = [0.5, -0.5 * a / b, 0.0, 0.0];
            let m = [
                Complex64::default(),
                Complex64::default(),
                Complex64::new(1.0 / (p.r * s2), 0.0),
                Complex64::new(0.0, 1.0 / (p.r * s2 * sin_t)),
            ];
            (l, n, m)
        }
        TetradChoice::Hatted => {
            let r2 = p.r * p.r;
            let l = [1.0 / (a * a), 1.0 / (a * b), 0.0, 0.0];
            let n = [0.5 * r2, -0.5 * r2 * a / b, 0.0, 0.0];
            let m = [
                Complex64::default(),
                Complex64::default(),
                Complex64::new(p.r / (p.r * s2), 0.0),
                Complex64::new(0.0, p.r / (p.r * s2 * sin_t)),
            ];
            (l, n, m)
        }
    };
    NullTetrad { choice, l, n, m, lapse: model.lapse(p.r), v_shift: [0.0; 3] }
}

/// Tetrad at an interior point (`r > 0`); vertex values exist only as
/// direction-dependent limits and are delivered by [`conjugate_structure`].
pub fn tetrad_at(
    model: &MetricModel,
    p: &SlicePoint,
    choice: TetradChoice,
) -> Result<NullTetrad, GeometryError> {
    if !(p.r >= 0.0 && p.t >= 0.0 && p.t <= model.t_max) {
        return Err(GeometryError::OutsideDomain { t: p.t, r: p.r, t_max: model.t_max });
    }
    Ok(tetrad_raw(model, p, choice))
}

/// The twelve spin coefficients via the standard vector contractions,
/// e.g. `rho = m^a nabla_mbar l_a`, `mu = -mbar^a nabla_m n_a`.
///
/// Closed forms are used for Minkowski; the curved family goes through
/// 4th-order finite-difference covariant derivatives of the tetrad. The two
/// paths agree where both exist (see tests).
pub fn spin_coefficients(
    model: &MetricModel,
    p: &SlicePoint,
    choice: TetradChoice,
) -> Result<SpinCoefficientSet, GeometryError> {
    let floor = 1e-6 * model.t_max;
    if p.r < floor {
        return Err(GeometryError::BelowAccuracyFloor { r: p.r, floor });
    }
    if matches!(choice, TetradChoice::Hatted) {
        return Err(GeometryError::UnsupportedTetradChoice);
    }
    if model.is_flat() {
        return Ok(flat_spin_coefficients(p, choice));
    }
    Ok(fd_spin_coefficients(model, p, choice))
}

fn flat_spin_coefficients(p: &SlicePoint, choice: TetradChoice) -> SpinCoefficientSet {
    let r = p.r;
    let ct = 1.0 / p.dir.theta.tan();
    let s2 = 2f64.sqrt();
    let zero = Complex64::default();
    let beta = Complex64::new(ct / (2.0 * s2 * r), 0.0);
    let (rho, mu) = match choice {
        TetradChoice::Adapted => {
            (Complex64::new(-1.0 / (s2 * r), 0.0), Complex64::new(-1.0 / (s2 * r), 0.0))
        }
        TetradChoice::GradientL => {
            (Complex64::new(-1.0 / r, 0.0), Complex64::new(-0.5 / r, 0.0))
        }
        TetradChoice::Hatted => unreachable!(),
    };
    SpinCoefficientSet {
        choice,
        point: *p,
        kappa: zero,
        sigma: zero,
        rho,
        tau: zero,
        epsilon: zero,
        beta,
        alpha: -beta,
        gamma: zero,
        pi: zero,
        mu,
        lambda_c: zero,
        nu: zero,
    }
}

fn fd_spin_coefficients(
    model: &MetricModel,
    p: &SlicePoint,
    choice: TetradChoice,
) -> SpinCoefficientSet {
    let tet = tetrad_raw(model, p, choice);
    let l = real4(tet.l);
    let n = real4(tet.n);
    let m = tet.m;
    let mbar = [m[0].conj(), m[1].conj(), m[2].conj(), m[3].conj()];

    let l_field = |q: &SlicePoint| real4(tetrad_raw(model, q, choice).l);
    let n_field = |q: &SlicePoint| real4(tetrad_raw(model, q, choice).n);
    let mbar_field = |q: &SlicePoint| {
        let mm = tetrad_raw(model, q, choice).m;
        [mm[0].conj(), mm[1].conj(), mm[2].conj(), mm[3].conj()]
    };

    let dot = |x: &[Complex64; 4], y: &[Complex64; 4]| model.dot(p.r, p.dir.theta, x, y);

    let dl_l = model.covariant_directional(p, &l, l_field);
    let dl_n = model.covariant_directional(p, &l, n_field);
    let dl_mbar = model.covariant_directional(p, &l, mbar_field);
    let dn_l = model.covariant_directional(p, &n, l_field);
    let dn_n = model.covariant_directional(p, &n, n_field);
    let dn_mbar = model.covariant_directional(p, &n, mbar_field);
    let dm_l = model.covariant_directional(p, &m, l_field);
    let dm_n = model.covariant_directional(p, &m, n_field);
    let dm_mbar = model.covariant_directional(p, &m, mbar_field);
    let dmbar_l = model.covariant_directional(p, &mbar, l_field);
    let dmbar_n = model.covariant_directional(p, &mbar, n_field);
    let dmbar_mbar = model.covariant_directional(p, &mbar, mbar_field);

    SpinCoefficientSet {
        choice,
        point: *p,
        kappa: dot(&m, &dl_l),
        sigma: dot(&m, &dm_l),
        rho: dot(&m, &dmbar_l),
        tau: dot(&m, &dn_l),
        epsilon: 0.5 * (dot(&n, &dl_l) + dot(&m, &dl_mbar)),
        beta: 0.5 * (dot(&n, &dm_l) + dot(&m, &dm_mbar)),
        alpha: 0.5 * (dot(&n, &dmbar_l) + dot(&m, &dmbar_mbar)),
        gamma: 0.5 * (dot(&n, &dn_l) + dot(&m, &dn_mbar)),
        pi: -dot(&mbar, &dl_n),
        mu: -dot(&mbar, &dm_n),
        lambda_c: -dot(&mbar, &dmbar_n),
        nu: -dot(&mbar, &dn_n),
    }
}

/// Gauss curvature of the cone section `S_r`, computed directly from the
/// induced 2-metric through the Brioschi formula with a single level of
/// 4th-order θ-differencing (the metric components are φ-independent):
///
/// ```text
/// k = -(1/(2 sqrt(EG))) [ G_tt / sqrt(EG) - G_t (E_t G + E G_t) / (2 (EG)^{3/2}) ]
/// ```
pub fn gauss_curvature(model: &MetricModel, r: f64) -> Result<f64, GeometryError> {
    if !(r > 0.0) {
        return Err(GeometryError::OutsideDomain { t: 0.0, r, t_max: model.t_max });
    }
    let theta0 = 1.0;
    // 8th-order stencils with a moderate step keep truncation and roundoff
    // both below 1e-12 relative
    let h = 0.02;
    // E = q_thth, G = q_phph from the section metric -(m mbar + mbar m),
    // normalized by r^2 so the samples stay O(1) at every radius
    let section = |theta: f64| -> (f64, f64) {
        let p = SlicePoint { t: model.r_star(r).max(r), r, dir: Direction::new(theta, 0.3) };
        let tet = tetrad_raw(model, &p, TetradChoice::Adapted);
        // lower the angular components of m
        let m_th = -tet.m[2] * r;
        let m_ph = -theta.sin().powi(2) * tet.m[3] * r;
        let e = 2.0 * (m_th * m_th.conj()).re;
        let g = 2.0 * (m_ph * m_ph.conj()).re;
        (e, g)
    };
    let (e0, g0) = section(theta0);
    let e_t = deriv8(|x| section(x).0, theta0, h);
    let g_t = deriv8(|x| section(x).1, theta0, h);
    let g_tt = deriv8_second(|x| section(x).1, theta0, h);
    let eg = e0 * g0;
    let k_normalized = -(1.0 / (2.0 * eg.sqrt()))
        * (g_tt / eg.sqrt() - g_t * (e_t * g0 + e0 * g_t) / (2.0 * eg.powf(1.5)));
    Ok(k_normalized / (r * r))
}

#[cfg(test)]
fn deriv4<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn deriv8<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    ((f(x + h) - f(x - h)) * (4.0 / 5.0)
        + (f(x + 2.0 * h) - f(x - 2.0 * h)) * (-1.0 / 5.0)
        + (f(x + 3.0 * h) - f(x - 3.0 * h)) * (4.0 / 105.0)
        + (f(x + 4.0 * h) - f(x - 4.0 * h)) * (-1.0 / 280.0))
        / h
}

fn deriv8_second<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x) * (-205.0 / 72.0)
        + (f(x + h) + f(x - h)) * (8.0 / 5.0)
        + (f(x + 2.0 * h) + f(x - 2.0 * h)) * (-1.0 / 5.0)
        + (f(x + 3.0 * h) + f(x - 3.0 * h)) * (8.0 / 315.0)
        + (f(x + 4.0 * h) + f(x - 4.0 * h)) * (-1.0 / 560.0))
        / (h * h)
}

/// Conjugate-direction map and frame phase at the vertex.
///
/// For each sampled direction the limits of the adapted tetrad along the
/// generator give `omega'` (the direction of `n_omega`) and the phase
/// `theta(omega)` defined through `m_{omega'} = e^{i theta} mbar_omega`,
/// taken as a principal value in `(-pi, pi]`.
#[derive(Debug, Clone)]
pub struct ConjugateStructure {
    pub samples: Vec<(Direction, Direction, f64)>,
}

pub fn conjugate_structure(
    model: &MetricModel,
    sample: &[Direction],
) -> Result<ConjugateStructure, GeometryError> {
    let r_probe = 1e-7 * model.t_max;
    let mut out = Vec::with_capacity(sample.len());
    for &dir in sample {
        let p = SlicePoint { t: model.r_star(r_probe), r: r_probe, dir };
        let tet = tetrad_raw(model, &p, TetradChoice::Adapted);
        // Cartesian frame components at the vertex
        let n_cart = spatial_to_cartesian(&real4(tet.n), &p);
        let l_cart = spatial_to_cartesian(&real4(tet.l), &p);
        let n_norm = (n_cart[1].re.powi(2) + n_cart[2].re.powi(2) + n_cart[3].re.powi(2)).sqrt();
        if n_norm < 1e-14 {
            return Err(GeometryError::DegenerateTetrad(
                "n has no spatial direction at the vertex".into(),
            ));
        }
        let same = (1..4)
            .map(|i| (n_cart[i].re / n_norm - l_cart[i].re / l_cart_spatial_norm(&l_cart)).abs())
            .fold(0.0f64, f64::max);
        if same < 1e-8 {
            return Err(GeometryError::DegenerateTetrad("n is not distinct from l".into()));
        }
        let null_check = model.dot(p.r, dir.theta, &real4(tet.n), &real4(tet.n));
        if null_check.norm() > 1e-10 {
            return Err(GeometryError::DegenerateTetrad(format!(
                "n is not null: g(n,n) = {null_check}"
            )));
        }
        // azimuth branch: pick the representative nearest phi + pi, where the
        // half-angle dyad phases continue smoothly (they are 4pi-periodic)
        let phi_raw = n_cart[2].re.atan2(n_cart[1].re);
        let target = dir.phi + PI;
        let turns = ((target - phi_raw) / (2.0 * PI)).round();
        let conj_dir = Direction {
            theta: (n_cart[3].re / n_norm).clamp(-1.0, 1.0).acos(),
            phi: phi_raw + 2.0 * PI * turns,
        };
        // phase from m_{omega'} = e^{i theta} mbar_omega, matched in the
        // Cartesian frame component-wise
        let p2 = SlicePoint { t: p.t, r: r_probe, dir: conj_dir };
        let tet2 = tetrad_raw(model, &p2, TetradChoice::Adapted);
        let m2_cart = spatial_to_cartesian(&tet2.m, &p2);
        let m1 = tetrad_raw(model, &p, TetradChoice::Adapted).m;
        let m1bar = [m1[0].conj(), m1[1].conj(), m1[2].conj(), m1[3].conj()];
        let m1bar_cart = spatial_to_cartesian(&m1bar, &p);
        let mut phase = Complex64::default();
        let mut best = 0.0;
        for i in 1..4 {
            if m1bar_cart[i].norm() > best {
                best = m1bar_cart[i].norm();
                phase = m2_cart[i] / m1bar_cart[i];
            }
        }
        // consistency across all spatial components
        let mut mismatch = 0.0f64;
        for i in 1..4 {
            mismatch = mismatch.max((m2_cart[i] - phase * m1bar_cart[i]).norm());
        }
        if (phase.norm() - 1.0).abs() > 1e-8 || mismatch > 1e-8 {
            return Err(GeometryError::DegenerateTetrad(format!(
                "frame phase extraction failed (|phase|={}, mismatch={mismatch})",
                phase.norm()
            )));
        }
        out.push((dir, conj_dir, phase.arg()));
    }
    Ok(ConjugateStructure { samples: out })
}

fn l_cart_spatial_norm(l: &[Complex64; 4]) -> f64 {
    (l[1].re.powi(2) + l[2].re.powi(2) + l[3].re.powi(2)).sqrt()
}

/// Convert coordinate components `(t, r, theta, phi)` at a point to the
/// Cartesian orthonormal frame `(t, x, y, z)` (used for vertex limits).
fn spatial_to_cartesian(v: &[Complex64; 4], p: &SlicePoint) -> [Complex64; 4] {
    let (st, ct) = p.dir.theta.sin_cos();
    let (sp, cp) = p.dir.phi.sin_cos();
    let rhat = [st * cp, st * sp, ct];
    let that = [ct * cp, ct * sp, -st];
    let phat = [-sp, cp, 0.0];
    let vr = v[1];
    let vth = v[2] * p.r; // unit-vector components
    let vph = v[3] * p.r * st;
    let mut out = [Complex64::default(); 4];
    out[0] = v[0];
    for i in 0..3 {
        out[i + 1] = vr * rhat[i] + vth * that[i] + vph * phat[i];
    }
    out
}

impl ConjugateStructure {
    /// Maximum violation of the involution `(omega')' = omega` over the
    /// sampled directions, measured chordally. The structure must have been
    /// sampled on a set closed under conjugation for this to be meaningful.
    pub fn involution_defect(&self, model: &MetricModel) -> Result<f64, GeometryError> {
        let mut worst = 0.0f64;
        for &(dir, conj, _) in &self.samples {
            let back = conjugate_structure(model, &[conj])?;
            let (_, back_dir, _) = back.samples[0];
            let a = dir.to_cartesian();
            let b = back_dir.to_cartesian();
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            worst = worst.max(d);
        }
        Ok(worst)
    }

    /// Maximum violation of the phase symmetry `theta(omega) = theta(omega')`.
    pub fn phase_symmetry_defect(&self, model: &MetricModel) -> Result<f64, GeometryError> {
        let mut worst = 0.0f64;
        for &(_, conj, theta) in &self.samples {
            let other = conjugate_structure(model, &[conj])?;
            let (_, _, theta2) = other.samples[0];
            let mut d = (theta - theta2).abs() % (2.0 * PI);
            if d > PI {
                d = 2.0 * PI - d;
            }
            worst = worst.max(d);
        }
        Ok(worst)
    }

    pub fn phase_at(&self, idx: usize) -> f64 {
        self.samples[idx].2
    }
}

/// GHP weight `{r', r; t', t}` of a scalar under dyad rescalings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GhpWeight {
    pub rp: i32,
    pub r: i32,
    pub tp: i32,
    pub t: i32,
}

impl GhpWeight {
    pub fn new(rp: i32, r: i32, tp: i32, t: i32) -> Self {
        Self { rp, r, tp, t }
    }

    pub fn p(&self) -> i32 {
        self.rp - self.r
    }

    pub fn q(&self) -> i32 {
        self.tp - self.t
    }

    /// doubled spin weight `2s = p - q`
    pub fn spin2(&self) -> i32 {
        self.p() - self.q()
    }

    /// doubled boost weight `2b = p + q`
    pub fn boost2(&self) -> i32 {
        self.p() + self.q()
    }

    /// Weights compose additively under products of weighted scalars.
    pub fn product(&self, other: &Self) -> Self {
        Self {
            rp: self.rp + other.rp,
            r: self.r + other.r,
            tp: self.tp + other.tp,
            t: self.t + other.t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn curved_model() -> MetricModel {
        build_metric(&MetricSpec {
            kind: MetricKind::StaticSpherical {
                a: RadialPoly::new(vec![1.0, 1.0]), // A = 1 + r^2
                b: RadialPoly::new(vec![1.0]),
            },
            t_max: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn build_rejects_bad_profiles() {
        let bad = build_metric(&MetricSpec {
            kind: MetricKind::StaticSpherical {
                a: RadialPoly::new(vec![1.0, -2.0]), // goes negative inside the domain
                b: RadialPoly::new(vec![1.0]),
            },
            t_max: 1.0,
        });
        assert!(matches!(bad, Err(GeometryError::NonPositiveProfile { .. })));
        let bad_b0 = build_metric(&MetricSpec {
            kind: MetricKind::StaticSpherical {
                a: RadialPoly::new(vec![1.0]),
                b: RadialPoly::new(vec![2.0]),
            },
            t_max: 1.0,
        });
        assert!(matches!(bad_b0, Err(GeometryError::SingularVertex { .. })));
        assert!(matches!(
            build_metric(&MetricSpec { kind: MetricKind::Minkowski, t_max: -1.0 }),
            Err(GeometryError::NonPositiveExtent(_))
        ));
    }

    #[test]
    fn minkowski_coordinates_and_scale() {
        let m = minkowski(1.0);
        assert_eq!(m.scale_k(), 1.0);
        assert_abs_diff_eq!(m.r_star(0.37), 0.37, epsilon = 1e-15);
        assert_abs_diff_eq!(m.lapse(0.0), 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn degenerate_family_member_is_flat() {
        let m = build_metric(&MetricSpec {
            kind: MetricKind::StaticSpherical {
                a: RadialPoly::new(vec![1.0]),
                b: RadialPoly::new(vec![1.0]),
            },
            t_max: 1.0,
        })
        .unwrap();
        for r in [0.1, 0.5, 0.9] {
            assert_abs_diff_eq!(m.r_star(r), r, epsilon = 1e-13);
            assert_abs_diff_eq!(m.lapse(r), 2f64.sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn tortoise_radius_is_arctan_for_quadratic_lapse() {
        let m = curved_model();
        for r in [0.05, 0.3, 0.8, 1.2] {
            assert_abs_diff_eq!(m.r_star(r), r.atan(), epsilon = 1e-12);
            assert_abs_diff_eq!(m.r_of_r_star(r.atan()), r, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(m.lapse(0.0), 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn adapted_tetrad_matches_flat_closed_form() {
        let m = minkowski(2.0);
        let p = SlicePoint { t: 1.0, r: 0.5, dir: Direction::new(1.1, 0.4) };
        let tet = tetrad_at(&m, &p, TetradChoice::Adapted).unwrap();
        let s2 = 2f64.sqrt();
        assert_abs_diff_eq!(tet.l[0], 1.0 / s2, epsilon = 1e-15);
        assert_abs_diff_eq!(tet.l[1], 1.0 / s2, epsilon = 1e-15);
        assert_abs_diff_eq!(tet.n[1], -1.0 / s2, epsilon = 1e-15);
        assert_abs_diff_eq!(tet.m[2].re, 1.0 / (0.5 * s2), epsilon = 1e-15);
        assert_abs_diff_eq!(tet.m[3].im, 1.0 / (0.5 * s2 * p.dir.theta.sin()), epsilon = 1e-13);
    }

    #[test]
    fn gradient_tetrad_is_grad_u() {
        let m = minkowski(2.0);
        let p = SlicePoint { t: 1.0, r: 0.5, dir: Direction::new(1.1, 0.4) };
        let tet = tetrad_at(&m, &p, TetradChoice::GradientL).unwrap();
        assert_abs_diff_eq!(tet.l[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(tet.l[1], 1.0, epsilon = 1e-15);
        // g(L, grad t) = L^t = 1 in flat space
        let grad_t = real4([1.0, 0.0, 0.0, 0.0]);
        let g = m.dot(p.r, p.dir.theta, &real4(tet.l), &grad_t);
        assert_abs_diff_eq!(g.re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tetrad_normalization_residuals() {
        for model in [minkowski(1.0), curved_model()] {
            for choice in [TetradChoice::Adapted, TetradChoice::GradientL] {
                for &(t, r, th) in &[(0.9, 0.2, 0.7), (0.5, 0.45, 2.1), (1.0, 0.9, 1.4)] {
                    let p = SlicePoint { t, r, dir: Direction::new(th, 0.8) };
                    let tet = tetrad_at(&model, &p, choice).unwrap();
                    let l = real4(tet.l);
                    let n = real4(tet.n);
                    let mb = [tet.m[0].conj(), tet.m[1].conj(), tet.m[2].conj(), tet.m[3].conj()];
                    let d = |x: &[Complex64; 4], y: &[Complex64; 4]| model.dot(r, th, x, y);
                    assert!((d(&l, &n) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
                    assert!((d(&tet.m, &mb) + Complex64::new(1.0, 0.0)).norm() < 1e-12);
                    assert!(d(&l, &l).norm() < 1e-12);
                    assert!(d(&n, &n).norm() < 1e-12);
                    assert!(d(&tet.m, &tet.m).norm() < 1e-12);
                    assert!(d(&l, &tet.m).norm() < 1e-12);
                    assert!(d(&n, &tet.m).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn adapted_tetrad_sums_to_foliation_normal() {
        for model in [minkowski(1.0), curved_model()] {
            let p = SlicePoint { t: 0.8, r: 0.3, dir: Direction::new(1.3, 0.2) };
            let tet = tetrad_at(&model, &p, TetradChoice::Adapted).unwrap();
            // T = N grad t = sqrt(2)/A d_t
            let t_vec = 2f64.sqrt() / model.a(p.r);
            assert_abs_diff_eq!(tet.l[0] + tet.n[0], t_vec, epsilon = 1e-13);
            assert_abs_diff_eq!(tet.l[1] + tet.n[1], 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn rejects_points_outside_domain() {
        let m = minkowski(1.0);
        let p = SlicePoint { t: 2.0, r: 0.5, dir: Direction::new(1.0, 0.0) };
        assert!(tetrad_at(&m, &p, TetradChoice::Adapted).is_err());
    }

    #[test]
    fn flat_spin_coefficients_closed_forms() {
        let m = minkowski(1.0);
        let p = SlicePoint { t: 0.9, r: 0.5, dir: Direction::new(0.9, 1.7) };
        let g = spin_coefficients(&m, &p, TetradChoice::GradientL).unwrap();
        assert_abs_diff_eq!(g.rho.re, -2.0, epsilon = 1e-14);
        assert!(g.kappa.norm() < 1e-14 && g.nu.norm() < 1e-14 && g.sigma.norm() < 1e-14);
        let a = spin_coefficients(&m, &p, TetradChoice::Adapted).unwrap();
        let expect_beta = (0.9f64.tan().recip()) / (2.0 * 2f64.sqrt() * 0.5);
        assert_abs_diff_eq!(a.beta.re, expect_beta, epsilon = 1e-14);
        assert_abs_diff_eq!(a.alpha.re, -expect_beta, epsilon = 1e-14);
    }

    #[test]
    fn fd_matches_closed_forms_in_flat_space() {
        let m = minkowski(1.0);
        let p = SlicePoint { t: 0.9, r: 0.4, dir: Direction::new(1.2, 0.6) };
        for choice in [TetradChoice::Adapted, TetradChoice::GradientL] {
            let closed = flat_spin_coefficients(&p, choice);
            let fd = fd_spin_coefficients(&m, &p, choice);
            for (a, b) in [
                (closed.kappa, fd.kappa),
                (closed.sigma, fd.sigma),
                (closed.rho, fd.rho),
                (closed.tau, fd.tau),
                (closed.epsilon, fd.epsilon),
                (closed.beta, fd.beta),
                (closed.alpha, fd.alpha),
                (closed.gamma, fd.gamma),
                (closed.pi, fd.pi),
                (closed.mu, fd.mu),
                (closed.lambda_c, fd.lambda_c),
                (closed.nu, fd.nu),
            ] {
                assert!((a - b).norm() < 1e-9, "{choice:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn curved_kappa_nu_vanish_and_rho_is_real() {
        let m = curved_model();
        for &(r, th) in &[(0.2, 0.9), (0.55, 1.8), (0.85, 0.4)] {
            let p = SlicePoint { t: 0.9, r, dir: Direction::new(th, 0.5) };
            let g = spin_coefficients(&m, &p, TetradChoice::GradientL).unwrap();
            assert!(g.kappa.norm() < 1e-12, "kappa = {}", g.kappa);
            assert!(g.nu.norm() < 1e-12, "nu = {}", g.nu);
            assert!(g.rho.im.abs() < 1e-12);
            // closed form rho = -1/(A B r) for the gradient tetrad
            let expect = -1.0 / (m.a(r) * m.b(r) * r);
            assert_abs_diff_eq!(g.rho.re, expect, epsilon = 1e-7);
        }
    }

    #[test]
    fn gradient_generators_are_geodesic() {
        // nabla_L L = 0 at sampled points, by direct FD evaluation
        for model in [minkowski(1.0), curved_model()] {
            let p = SlicePoint { t: 0.8, r: 0.35, dir: Direction::new(1.0, 0.4) };
            let l = real4(tetrad_raw(&model, &p, TetradChoice::GradientL).l);
            let acc = model.covariant_directional(&p, &l, |q| {
                real4(tetrad_raw(&model, q, TetradChoice::GradientL).l)
            });
            for c in acc {
                assert!(c.norm() < 1e-8, "nabla_L L component {c}");
            }
        }
    }

    #[test]
    fn rho_equals_minus_half_divergence() {
        for model in [minkowski(1.0), curved_model()] {
            let p = SlicePoint { t: 0.8, r: 0.3, dir: Direction::new(1.1, 0.2) };
            let g = spin_coefficients(&model, &p, TetradChoice::GradientL).unwrap();
            // coordinate divergence of L with sqrt(-g) = A B r^2 sin(theta)
            let h = 1e-5;
            let lr = |r: f64| {
                let q = SlicePoint { t: p.t, r, dir: p.dir };
                let lv = tetrad_raw(&model, &q, TetradChoice::GradientL).l;
                model.a(r) * model.b(r) * r * r * lv[1]
            };
            let div = deriv4(lr, p.r, h) / (model.a(p.r) * model.b(p.r) * p.r * p.r);
            assert_abs_diff_eq!(g.rho.re, -0.5 * div, epsilon = 1e-8);
        }
    }

    #[test]
    fn r_rho_approaches_minus_one_at_vertex() {
        let m = curved_model();
        let mut prev_gap = f64::INFINITY;
        for &r in &[0.2, 0.1, 0.05, 0.025] {
            let p = SlicePoint { t: 0.5, r, dir: Direction::new(1.0, 0.0) };
            let g = spin_coefficients(&m, &p, TetradChoice::GradientL).unwrap();
            let gap = (r * g.rho.re + 1.0).abs();
            assert!(gap < prev_gap + 1e-12, "r rho should approach -1 monotonically here");
            prev_gap = gap;
        }
        assert!(prev_gap < 2e-3);
    }

    #[test]
    fn gauss_curvature_examples() {
        let m = minkowski(4.0);
        assert_abs_diff_eq!(gauss_curvature(&m, 2.0).unwrap(), 0.25, epsilon = 1e-11);
        for &r in &[1.0, 0.5, 0.25, 0.125] {
            assert_abs_diff_eq!(r * r * gauss_curvature(&m, r).unwrap(), 1.0, epsilon = 1e-10);
        }
        let c = curved_model();
        for &r in &[0.4, 0.2, 0.1] {
            assert_abs_diff_eq!(r * r * gauss_curvature(&c, r).unwrap(), 1.0, epsilon = 1e-9);
        }
        assert!(gauss_curvature(&m, 0.0).is_err());
    }

    #[test]
    fn cylinder_metric_section_is_round_sphere() {
        // (2/r^2) m_(a mbar_b) restricted to the section has unit-sphere components
        let m = minkowski(1.0);
        for &(r, th) in &[(0.3, 0.8), (0.7, 1.9)] {
            let p = SlicePoint { t: r, r, dir: Direction::new(th, 0.1) };
            let tet = tetrad_raw(&m, &p, TetradChoice::Adapted);
            let m_th = -r * r * tet.m[2];
            let m_ph = -r * r * th.sin().powi(2) * tet.m[3];
            let q_thth = 2.0 / (r * r) * (m_th * m_th.conj()).re;
            let q_phph = 2.0 / (r * r) * (m_ph * m_ph.conj()).re;
            assert_abs_diff_eq!(q_thth, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(q_phph, th.sin().powi(2), epsilon = 1e-12);
        }
    }

    #[test]
    fn conjugate_structure_is_antipodal_involution() {
        let dirs = [
            Direction::new(0.7, 0.3),
            Direction::new(1.9, 4.0),
            Direction::new(2.6, 2.2),
            Direction::new(1.2, 5.9),
        ];
        for model in [minkowski(1.0), curved_model()] {
            let cs = conjugate_structure(&model, &dirs).unwrap();
            for (i, &(dir, conj, theta)) in cs.samples.iter().enumerate() {
                let anti = dir.antipode().to_cartesian();
                let got = conj.to_cartesian();
                for k in 0..3 {
                    assert_abs_diff_eq!(anti[k], got[k], epsilon = 1e-6);
                }
                assert!(theta.abs() < 1e-6, "flat-family frame phase is zero, sample {i}");
            }
            assert!(cs.involution_defect(&model).unwrap() < 1e-6);
            assert!(cs.phase_symmetry_defect(&model).unwrap() < 1e-6);
        }
    }

    #[test]
    fn ghp_weights_compose_additively() {
        let phi0 = GhpWeight::new(1, 0, 0, 0);
        assert_eq!(phi0.spin2(), 1);
        let chi0 = GhpWeight::new(0, 0, 1, 0);
        assert_eq!(chi0.spin2(), -1);
        let prod = phi0.product(&chi0);
        assert_eq!(prod.spin2(), phi0.spin2() + chi0.spin2());
        assert_eq!(prod.boost2(), phi0.boost2() + chi0.boost2());
    }

    #[test]
    fn spin_coefficient_accuracy_floor() {
        let m = minkowski(1.0);
        let p = SlicePoint { t: 0.5, r: 1e-8, dir: Direction::new(1.0, 0.0) };
        assert!(matches!(
            spin_coefficients(&m, &p, TetradChoice::GradientL),
            Err(GeometryError::BelowAccuracyFloor { .. })
        ));
    }
}
