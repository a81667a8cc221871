//! Exact Minkowski Dirac solutions and their restrictions to cones, tilted
//! cones and slices.
//!
//! Solutions are stored in the Cartesian frame and converted to the spherical
//! spin-frame by the direction-dependent dyad
//!
//! ```text
//! o^A    = ( cos(theta/2) e^{-i phi/2},  sin(theta/2) e^{+i phi/2} )
//! iota^A = (-sin(theta/2) e^{-i phi/2},  cos(theta/2) e^{+i phi/2} )
//! ```
//!
//! whose flag-pole directions align with the outgoing/ingoing null vectors of
//! the adapted tetrad, with the residual U(1) phase fixed by continuity along
//! `phi = 0`. Components follow the ordering
//! `(Psi_1, Psi_2, Psi_3, Psi_4) = (phi_0, phi_1, chi_1', -chi_0')`.

use num_complex::Complex64;
use thiserror::Error;

use crate::angular::{self, Direction, SpectralField};
use crate::constraints::{ConeScalar, NullDatum, PhysicsParams, VGrid};
use crate::evolution::{RadialGrid, SliceState};
use crate::geometry::{MetricModel, SlicePoint};
use crate::Half;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("exact solutions are available on the Minkowski model only")]
    CurvedBackground,
    #[error("plane-wave momentum is off shell: p.p - m^2 = {0}")]
    OffShell(f64),
    #[error("plane-wave amplitude fails the momentum-space Dirac relation (residual {0})")]
    BadAmplitude(f64),
    #[error("constant spinors solve the system only with m = 0, q = 0")]
    MassiveConstant,
    #[error(transparent)]
    Angular(#[from] angular::AngularError),
}

/// Exact solution of the free Dirac system on Minkowski space.
///
/// `phi` holds the lower-index Weyl components `(phi_0, phi_1)` and `chi`
/// the upper-index components `(chi^0', chi^1')` of the Cartesian-frame
/// spinor; for `PlaneWave` these are the amplitudes of `e^{-i p.x}`.
#[derive(Debug, Clone, PartialEq)]
pub enum ExactSolution {
    ConstantSpinor { phi: [Complex64; 2], chi: [Complex64; 2] },
    PlaneWave { mass: f64, momentum: [f64; 4], phi: [Complex64; 2], chi: [Complex64; 2] },
}

impl ExactSolution {
    pub fn constant(phi: [Complex64; 2], chi: [Complex64; 2]) -> Self {
        Self::ConstantSpinor { phi, chi }
    }

    /// Rest-frame or boosted plane wave. The `chi` amplitude is derived from
    /// `phi` through the momentum-space Dirac relation; for `mass = 0` the
    /// momentum must vanish and the solution degenerates to the constant
    /// spinor with `chi = -i phi` (the `m -> 0` limit of the rest frame).
    pub fn plane_wave(mass: f64, spatial_p: [f64; 3], phi: [Complex64; 2]) -> Result<Self, OracleError> {
        let e = (mass * mass + spatial_p.iter().map(|p| p * p).sum::<f64>()).sqrt();
        let momentum = [e, spatial_p[0], spatial_p[1], spatial_p[2]];
        if mass == 0.0 {
            let p_norm = spatial_p.iter().map(|p| p * p).sum::<f64>().sqrt();
            if p_norm > 0.0 {
                return Err(OracleError::OffShell(-p_norm * p_norm));
            }
            let chi = [-Complex64::i() * phi[0], -Complex64::i() * phi[1]];
            return Ok(Self::PlaneWave { mass, momentum, phi, chi });
        }
        let chi = chi_amplitude(mass, &momentum, &phi);
        let sol = Self::PlaneWave { mass, momentum, phi, chi };
        let res = sol.on_shell_residual();
        if res > 1e-12 {
            return Err(OracleError::BadAmplitude(res));
        }
        Ok(sol)
    }

    pub fn mass(&self) -> f64 {
        match self {
            Self::ConstantSpinor { .. } => 0.0,
            Self::PlaneWave { mass, .. } => *mass,
        }
    }

    /// Residual of the second Weyl equation on the amplitudes (the first is
    /// satisfied by construction of `chi`).
    pub fn on_shell_residual(&self) -> f64 {
        match self {
            Self::ConstantSpinor { .. } => 0.0,
            Self::PlaneWave { mass, momentum, phi, chi } => {
                if *mass == 0.0 {
                    return 0.0;
                }
                // nabla_{AA'} chi^{A'} = -(m/sqrt2) phi_A with d_a -> -i p_a
                let d = [
                    Complex64::new(0.0, -momentum[0]),
                    Complex64::new(0.0, momentum[1]),
                    Complex64::new(0.0, momentum[2]),
                    Complex64::new(0.0, momentum[3]),
                ];
                let n00 = (d[0] + d[3]) / 2f64.sqrt();
                let n01 = (d[1] + Complex64::i() * d[2]) / 2f64.sqrt();
                let n10 = (d[1] - Complex64::i() * d[2]) / 2f64.sqrt();
                let n11 = (d[0] - d[3]) / 2f64.sqrt();
                let r0 = n00 * chi[0] + n01 * chi[1] + mass / 2f64.sqrt() * phi[0];
                let r1 = n10 * chi[0] + n11 * chi[1] + mass / 2f64.sqrt() * phi[1];
                (r0.norm_sqr() + r1.norm_sqr()).sqrt()
            }
        }
    }

    fn amplitudes_at(&self, t: f64, x: [f64; 3]) -> ([Complex64; 2], [Complex64; 2]) {
        match self {
            Self::ConstantSpinor { phi, chi } => (*phi, *chi),
            Self::PlaneWave { momentum, phi, chi, .. } => {
                let phase = -(momentum[0] * t - momentum[1] * x[0] - momentum[2] * x[1]
                    - momentum[3] * x[2]);
                let f = Complex64::from_polar(1.0, phase);
                ([phi[0] * f, phi[1] * f], [chi[0] * f, chi[1] * f])
            }
        }
    }
}

/// `chi^{A'} = (sqrt2/m) (nabla^{AA'} phi_A)|_{d -> -ip}` for the plane wave.
fn chi_amplitude(mass: f64, momentum: &[f64; 4], phi: &[Complex64; 2]) -> [Complex64; 2] {
    let d = [
        Complex64::new(0.0, -momentum[0]),
        Complex64::new(0.0, momentum[1]),
        Complex64::new(0.0, momentum[2]),
        Complex64::new(0.0, momentum[3]),
    ];
    // contraction matrix of nabla^{AA'} over A (see the Infeld symbols with
    // both indices raised)
    let m00 = (d[0] - d[3]) / 2f64.sqrt();
    let m01 = -(d[1] - Complex64::i() * d[2]) / 2f64.sqrt();
    let m10 = -(d[1] + Complex64::i() * d[2]) / 2f64.sqrt();
    let m11 = (d[0] + d[3]) / 2f64.sqrt();
    // result^{A'} = sum_A M^{AA'} phi_A
    let r0 = m00 * phi[0] + m10 * phi[1];
    let r1 = m01 * phi[0] + m11 * phi[1];
    [r0 * 2f64.sqrt() / mass, r1 * 2f64.sqrt() / mass]
}

fn dyad(dir: Direction) -> ([Complex64; 2], [Complex64; 2]) {
    let c = (dir.theta / 2.0).cos();
    let s = (dir.theta / 2.0).sin();
    let em = Complex64::from_polar(1.0, -dir.phi / 2.0);
    let ep = Complex64::from_polar(1.0, dir.phi / 2.0);
    ([c * em, s * ep], [-s * em, c * ep])
}

/// NP components `(Psi_1 .. Psi_4)` of the solution in the spherical
/// spin-frame at a point.
pub fn evaluate_np(
    sol: &ExactSolution,
    p: &SlicePoint,
    model: &MetricModel,
) -> Result<[Complex64; 4], OracleError> {
    if !model.is_flat() {
        return Err(OracleError::CurvedBackground);
    }
    let x = p.dir.to_cartesian().map(|c| c * p.r);
    let (phi, chi) = sol.amplitudes_at(p.t, x);
    let (o, iota) = dyad(p.dir);
    let ob = [o[0].conj(), o[1].conj()];
    let ib = [iota[0].conj(), iota[1].conj()];
    let psi1 = phi[0] * o[0] + phi[1] * o[1];
    let psi2 = phi[0] * iota[0] + phi[1] * iota[1];
    // chi_{A'} = chi^{B'} eps_{B'A'} = (-chi^1', chi^0')
    let chi_low = [-chi[1], chi[0]];
    let chi0p = chi_low[0] * ob[0] + chi_low[1] * ob[1];
    let chi1p = chi_low[0] * ib[0] + chi_low[1] * ib[1];
    Ok([psi1, psi2, chi1p, -chi0p])
}

/// Sample of the full solution on a cone `{t = lambda r}` (`lambda = 1` is
/// the light-cone itself): the transverse pair as a `NullDatum` plus the
/// tangential pair as reference fields on the same grid.
pub struct ConeRestriction {
    pub datum: NullDatum,
    pub psi2: ConeScalar,
    pub psi3: ConeScalar,
    /// set when the sampled components carry more angular content than the
    /// band limit can represent
    pub aliased: bool,
}

/// Project the solution onto the spectral basis along the surface
/// `{t = lambda r}`, parametrized by `v = 2 r*` exactly like the light cone.
pub fn restrict_to_cone(
    sol: &ExactSolution,
    lambda: f64,
    grid: &VGrid,
    lmax2: Half,
    physics: &PhysicsParams,
    model: &MetricModel,
) -> Result<ConeRestriction, OracleError> {
    if !model.is_flat() {
        return Err(OracleError::CurvedBackground);
    }
    let spins: [Half; 4] = [1, -1, 1, -1];
    let n_theta = (lmax2 as usize) + 8;
    let n_phi = 2 * (lmax2 as usize) + 8;
    let mut comps: [Vec<SpectralField>; 4] = [vec![], vec![], vec![], vec![]];
    let mut aliased = false;
    for k in 0..=grid.n {
        let v = grid.v_at(k);
        let r = 0.5 * v;
        let t = lambda * r;
        for c in 0..4 {
            let f = angular::project_function(spins[c], lmax2, n_theta, n_phi, |theta, phi| {
                let p = SlicePoint { t, r, dir: Direction::new(theta, phi) };
                evaluate_np(sol, &p, model).expect("flat model")[c]
            })?;
            comps[c].push(f);
        }
        if k == grid.n / 2 {
            // aliasing probe: compare the reconstruction at a few directions
            for &(theta, phi) in &[(0.9, 0.4), (2.0, 3.3), (1.4, 5.1)] {
                let p = SlicePoint { t, r, dir: Direction::new(theta, phi) };
                let truth = evaluate_np(sol, &p, model).expect("flat model");
                for c in 0..4 {
                    let recon = comps[c][k]
                        .evaluate_at(Direction::new(theta, phi), angular::Chart::North)?;
                    let scale = truth[c].norm().max(1.0);
                    if (recon - truth[c]).norm() > 1e-8 * scale {
                        aliased = true;
                    }
                }
            }
        }
    }
    let [psi1, psi2, psi3, psi4] = comps;
    let datum = NullDatum::new(grid.clone(), psi1, psi4, physics.clone());
    Ok(ConeRestriction { datum, psi2, psi3, aliased })
}

/// Sample the solution on the slice `{t = const}` over the cell-centered
/// radial grid.
pub fn slice_state(
    sol: &ExactSolution,
    t: f64,
    grid: &RadialGrid,
    lmax2: Half,
    model: &MetricModel,
) -> Result<SliceState, OracleError> {
    if !model.is_flat() {
        return Err(OracleError::CurvedBackground);
    }
    let spins: [Half; 4] = [1, -1, 1, -1];
    let n_theta = (lmax2 as usize) + 8;
    let n_phi = 2 * (lmax2 as usize) + 8;
    let mut state = SliceState::zero(t, grid.clone(), lmax2);
    for j in 0..grid.n_cells {
        let r = grid.r_at(j);
        for c in 0..4 {
            let f = angular::project_function(spins[c], lmax2, n_theta, n_phi, |theta, phi| {
                let p = SlicePoint { t, r, dir: Direction::new(theta, phi) };
                evaluate_np(sol, &p, model).expect("flat model")[c]
            })?;
            state.set_cell(c, j, &f);
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::minkowski;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_constant() -> ExactSolution {
        ExactSolution::constant(
            [c(0.3, 0.1), c(-0.7, 0.2)],
            [c(0.11, -0.5), c(0.45, 0.25)],
        )
    }

    #[test]
    fn zero_spinor_evaluates_to_zero() {
        let model = minkowski(1.0);
        let sol = ExactSolution::constant([c(0.0, 0.0); 2], [c(0.0, 0.0); 2]);
        let p = SlicePoint { t: 0.5, r: 0.2, dir: Direction::new(1.0, 2.0) };
        let v = evaluate_np(&sol, &p, &model).unwrap();
        assert!(v.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn constant_spinor_components_depend_on_direction_only() {
        let model = minkowski(1.0);
        let sol = sample_constant();
        let dir = Direction::new(0.8, 1.9);
        let a = evaluate_np(&sol, &SlicePoint { t: 0.1, r: 0.05, dir }, &model).unwrap();
        let b = evaluate_np(&sol, &SlicePoint { t: 0.9, r: 0.6, dir }, &model).unwrap();
        for i in 0..4 {
            assert!((a[i] - b[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn rest_frame_wave_carries_pure_phase() {
        let model = minkowski(1.0);
        let sol = ExactSolution::plane_wave(1.0, [0.0; 3], [c(0.4, 0.0), c(0.0, -0.3)]).unwrap();
        let dir = Direction::new(1.2, 0.3);
        let p0 = SlicePoint { t: 0.0, r: 0.4, dir };
        let p1 = SlicePoint { t: 0.7, r: 0.4, dir };
        let v0 = evaluate_np(&sol, &p0, &model).unwrap();
        let v1 = evaluate_np(&sol, &p1, &model).unwrap();
        let phase = Complex64::from_polar(1.0, -0.7);
        for i in 0..4 {
            assert!((v1[i] - v0[i] * phase).norm() < 1e-14);
            assert_abs_diff_eq!(v1[i].norm(), v0[i].norm(), epsilon = 1e-14);
        }
    }

    #[test]
    fn plane_wave_is_on_shell() {
        let sol = ExactSolution::plane_wave(1.0, [0.3, -0.2, 0.1], [c(1.0, 0.0), c(0.2, 0.2)])
            .unwrap();
        assert!(sol.on_shell_residual() < 1e-12);
        assert!(ExactSolution::plane_wave(0.0, [0.1, 0.0, 0.0], [c(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn rejects_curved_background() {
        use crate::geometry::{build_metric, MetricKind, MetricSpec, RadialPoly};
        let curved = build_metric(&MetricSpec {
            kind: MetricKind::StaticSpherical {
                a: RadialPoly::new(vec![1.0, 0.5]),
                b: RadialPoly::new(vec![1.0]),
            },
            t_max: 1.0,
        })
        .unwrap();
        let sol = sample_constant();
        let p = SlicePoint { t: 0.5, r: 0.2, dir: Direction::new(1.0, 0.0) };
        assert!(matches!(evaluate_np(&sol, &p, &curved), Err(OracleError::CurvedBackground)));
    }

    #[test]
    fn matching_conditions_hold_pointwise() {
        // Psi_2(w) = -i Psi_1(w'), Psi_3(w) = -i Psi_4(w') for the continuous
        // spinor at the vertex, with the flat-frame phase theta(w) = 0
        let model = minkowski(1.0);
        let sol = sample_constant();
        for &(theta, phi) in &[(0.7, 0.3), (1.9, 4.0), (2.6, 2.2)] {
            let dir = Direction::new(theta, phi);
            let v = evaluate_np(&sol, &SlicePoint { t: 0.0, r: 0.0, dir }, &model).unwrap();
            let anti = dir.antipode();
            let w = evaluate_np(&sol, &SlicePoint { t: 0.0, r: 0.0, dir: anti }, &model).unwrap();
            assert!((v[1] - c(0.0, -1.0) * w[0]).norm() < 1e-13);
            assert!((v[2] - c(0.0, -1.0) * w[3]).norm() < 1e-13);
        }
    }

    #[test]
    fn constant_spinor_cone_restriction_is_v_independent_and_band_limited() {
        let model = minkowski(1.0);
        let sol = sample_constant();
        let grid = VGrid::new(1.0, 16);
        let restriction = restrict_to_cone(&sol, 1.0, &grid, 3, &PhysicsParams::free(), &model)
            .unwrap();
        assert!(!restriction.aliased);
        let d = &restriction.datum;
        let first = d.psi1[0].clone();
        for f in &d.psi1 {
            assert!(f.sub(&first).unwrap().norm() < 1e-12);
        }
        // content lives at l = 1/2 only
        for (l2, _m2, a) in d.psi1[0].modes() {
            if l2 > 1 {
                assert!(a.norm() < 1e-12);
            }
        }
        // regular vertex coupling: psi2 coefficients equal psi1 coefficients at l=1/2
        for m2 in [-1, 1] {
            let u1 = d.psi1[0].coeff(1, m2).unwrap();
            let u2 = restriction.psi2[0].coeff(1, m2).unwrap();
            assert!((u1 - u2).norm() < 1e-12);
        }
    }

    #[test]
    fn flat_np_system_residual_vanishes() {
        // finite-difference residual of the four NP component equations for
        // both oracle kinds; exercises every sign in the frame dictionary
        let model = minkowski(2.0);
        let h = 1e-5;
        for (mass, sol) in [
            (0.0, sample_constant()),
            (1.0, ExactSolution::plane_wave(1.0, [0.0; 3], [c(0.4, 0.1), c(-0.2, 0.3)]).unwrap()),
        ] {
            let (t, r, theta, phi) = (0.8, 0.5, 1.1, 0.4);
            let ev = |t: f64, r: f64, th: f64, ph: f64, i: usize| {
                let p = SlicePoint { t, r, dir: Direction::new(th, ph) };
                evaluate_np(&sol, &p, &model).unwrap()[i]
            };
            let d4 = |f: &dyn Fn(f64) -> Complex64, x: f64| {
                (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
            };
            let p = [ev(t, r, theta, phi, 0), ev(t, r, theta, phi, 1), ev(t, r, theta, phi, 2), ev(t, r, theta, phi, 3)];
            let ct = 1.0 / theta.tan();
            let mut dt = [Complex64::default(); 4];
            let mut dr = [Complex64::default(); 4];
            let mut dth = [Complex64::default(); 4];
            let mut dph = [Complex64::default(); 4];
            for i in 0..4 {
                dt[i] = d4(&|x| ev(x, r, theta, phi, i), t);
                dr[i] = d4(&|x| ev(t, x, theta, phi, i), r);
                dth[i] = d4(&|x| ev(t, r, x, phi, i), theta);
                dph[i] = d4(&|x| ev(t, r, theta, x, i), phi);
            }
            let dplus = |i: usize| dth[i] + 0.5 * ct * p[i] + Complex64::i() / theta.sin() * dph[i];
            let dminus = |i: usize| dth[i] + 0.5 * ct * p[i] - Complex64::i() / theta.sin() * dph[i];
            let res = [
                (dt[0] - dr[0] - p[0] / r) - dplus(1) / r - mass * p[2],
                (dt[1] + dr[1] + p[1] / r) - dminus(0) / r - mass * p[3],
                (-dt[3] + dr[3] + p[3] / r) - dminus(2) / r - mass * p[1],
                (dt[2] + dr[2] + p[2] / r) + dplus(3) / r + mass * p[0],
            ];
            for (i, v) in res.iter().enumerate() {
                assert!(v.norm() < 1e-9, "mass {mass} residual {i}: {v}");
            }
        }
    }
}
