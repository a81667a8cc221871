//! Quantitative verification: slice energies, trace isometry, H1-type norms
//! and their two-sided equivalence, source-term inequality sides, asymptotics
//! fits and convergence tables.

use num_complex::Complex64;
use serde::Serialize;

use crate::angular::mode_list;
use crate::constraints::{cone_flux, h_cone_norm, ConstraintError, NullDatum};
use crate::angular::Direction;
use crate::evolution::{assemble_rhs, EvolutionConfig, ManufacturedSolution, SliceState};
use crate::geometry::{
    gauss_curvature, spin_coefficients, GeometryError, MetricModel, SlicePoint, TetradChoice,
};

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub slice_energy: f64,
    pub cone_flux: f64,
    pub relative_gap: f64,
    pub n_v: usize,
    pub n_r: usize,
}

/// `int |Psi|^2 dsigma_Sigma` over the active cells with the model's volume
/// factor `(B/sqrt2) r^2`; endpoint-corrected midpoint quadrature (order 4).
pub fn slice_energy(state: &SliceState, model: &MetricModel) -> f64 {
    let integrand: Vec<f64> = (0..state.n_active)
        .map(|j| {
            let r = state.grid.r_at(j);
            let density = model.b(r) / 2f64.sqrt() * r * r;
            let mut sum = 0.0;
            for comp in 0..4 {
                for mode in 0..state.n_modes() {
                    sum += state.value(comp, mode, j).norm_sqr();
                }
            }
            density * sum
        })
        .collect();
    midpoint_corrected(&integrand, state.grid.dr)
}

/// Endpoint-corrected composite midpoint rule on cell-centered samples over
/// `[0, n h]`: `h sum f_j + h^2/24 (f'(0) - f'(end))`.
pub fn midpoint_corrected(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    if n < 4 {
        return f.iter().sum::<f64>() * h;
    }
    let bulk: f64 = f.iter().sum::<f64>() * h;
    // one-sided derivatives from the first/last four midpoints
    let d0 = (-71.0 * f[0] + 141.0 * f[1] - 93.0 * f[2] + 23.0 * f[3]) / (24.0 * h);
    let d1 = (71.0 * f[n - 1] - 141.0 * f[n - 2] + 93.0 * f[n - 3] - 23.0 * f[n - 4]) / (24.0 * h);
    bulk + h * h / 24.0 * (d1 - d0)
}

/// Relative gap between the slice energy and the cone flux of the conserved
/// current (the trace isometry, exact in the continuum).
pub fn isometry_report(
    datum: &NullDatum,
    state: &SliceState,
    model: &MetricModel,
) -> Result<EnergyReport, ConstraintError> {
    let e_cone = cone_flux(&datum.psi1, &datum.psi4, &datum.grid, model)?;
    let e_slice = slice_energy(state, model);
    let relative_gap = if e_slice == 0.0 && e_cone == 0.0 {
        0.0
    } else {
        (e_slice - e_cone).abs() / e_slice.abs().max(1e-300)
    };
    Ok(EnergyReport {
        slice_energy: e_slice,
        cone_flux: e_cone,
        relative_gap,
        n_v: datum.grid.n,
        n_r: state.n_active,
    })
}

/// `||Psi||^2 + sum_alpha ||nabla_{e_alpha} Psi||^2` on the slice, with the
/// frame `{e_0 = T/sqrt2, e_1 radial, e_2, e_3 angular}`; time derivatives
/// through the evolution operator, radial ones by 4th-order differencing,
/// angular ones by the calibrated ladders.
pub fn h1_slice_norm(state: &SliceState, cfg: &EvolutionConfig, model: &MetricModel) -> f64 {
    let dt_state = assemble_rhs(state, cfg, model);
    let dr_state = radial_derivative(state);
    let n_modes = state.n_modes();
    let raise = |s2: i32, l2: i32| crate::angular::raise_coefficient(l2, s2);
    let lower = |s2: i32, l2: i32| crate::angular::lower_coefficient(l2, s2);
    let mode_l2: Vec<i32> = mode_list(1, state.lmax2).map(|(l2, _)| l2).collect();

    let integrand: Vec<f64> = (0..state.n_active)
        .map(|j| {
            let r = state.grid.r_at(j);
            let a = model.a(r);
            let b = model.b(r);
            let s2_ = 2f64.sqrt();
            let lt = 1.0 / (s2_ * a); // l^t = n^t
            let lr = 1.0 / (s2_ * b); // l^r = -n^r
            let eps = model.da_dr(r) / (2.0 * s2_ * a * b); // = gamma
            let mu = -1.0 / (s2_ * b * r); // = rho for the adapted tetrad
            let inv_r2 = 1.0 / (r * s2_);
            let mut sum = 0.0;
            for mode in 0..n_modes {
                let l2 = mode_l2[mode];
                let u = [
                    state.value(0, mode, j),
                    state.value(1, mode, j),
                    state.value(2, mode, j),
                    state.value(3, mode, j),
                ];
                let ut = [
                    dt_state.value(0, mode, j),
                    dt_state.value(1, mode, j),
                    dt_state.value(2, mode, j),
                    dt_state.value(3, mode, j),
                ];
                let ur = [
                    dr_state.value(0, mode, j),
                    dr_state.value(1, mode, j),
                    dr_state.value(2, mode, j),
                    dr_state.value(3, mode, j),
                ];
                // L2 part
                sum += u.iter().map(|z| z.norm_sqr()).sum::<f64>();
                // nabla_l, nabla_n with the connection terms of the family
                let dl = |i: usize| lt * ut[i] + lr * ur[i];
                let dn = |i: usize| lt * ut[i] - lr * ur[i];
                let grad_l = [
                    dl(0) - eps * u[0],
                    dl(1) + eps * u[1],
                    dl(2) + eps * u[2],
                    dl(3) - eps * u[3],
                ];
                let grad_n = [
                    dn(0) - eps * u[0],
                    dn(1) + eps * u[1],
                    dn(2) + eps * u[2],
                    dn(3) - eps * u[3],
                ];
                // e_0 = (l+n)/sqrt2, e_1 = (l-n)/sqrt2
                for i in 0..4 {
                    let e0 = (grad_l[i] + grad_n[i]) / s2_;
                    let e1 = (grad_l[i] - grad_n[i]) / s2_;
                    sum += e0.norm_sqr() + e1.norm_sqr();
                }
                // angular frame: |nabla_{e2}|^2 + |nabla_{e3}|^2
                //              = |nabla_m Psi|^2 + |nabla_mbar Psi|^2
                let gm = [
                    -inv_r2 * raise(1, l2) * u[0],
                    -inv_r2 * raise(-1, l2) * u[1] - mu * u[0],
                    -inv_r2 * raise(1, l2) * u[2],
                    -inv_r2 * raise(-1, l2) * u[3] - mu * u[2],
                ];
                let gmb = [
                    -inv_r2 * lower(1, l2) * u[0] + mu * u[1],
                    -inv_r2 * lower(-1, l2) * u[1],
                    -inv_r2 * lower(1, l2) * u[2] + mu * u[3],
                    -inv_r2 * lower(-1, l2) * u[3],
                ];
                for i in 0..4 {
                    sum += gm[i].norm_sqr() + gmb[i].norm_sqr();
                }
            }
            model.b(r) / s2_ * r * r * sum
        })
        .collect();
    midpoint_corrected(&integrand, state.grid.dr).sqrt()
}

/// 4th-order radial derivative of every component, with the origin handled
/// through the swap parity and one-sided stencils at the outer edge.
pub fn radial_derivative(state: &SliceState) -> SliceState {
    let mut out = SliceState::zero(state.t, state.grid.clone(), state.lmax2);
    out.n_active = state.n_active;
    let n = state.n_active;
    let inv12 = 1.0 / (12.0 * state.grid.dr);
    let sigmas: Vec<f64> = mode_list(1, state.lmax2)
        .map(|(l2, _)| if ((l2 - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    for comp in 0..4 {
        let swap = match comp {
            0 => 1,
            1 => 0,
            2 => 3,
            _ => 2,
        };
        for mode in 0..state.n_modes() {
            let sigma = sigmas[mode];
            let get = |k: isize| -> Complex64 {
                if k >= 0 {
                    state.value(comp, mode, k as usize)
                } else {
                    sigma * state.value(swap, mode, (-k - 1) as usize)
                }
            };
            for j in 0..n {
                let ji = j as isize;
                let d = if j + 2 < n {
                    (get(ji - 2) - 8.0 * get(ji - 1) + 8.0 * get(ji + 1) - get(ji + 2)) * inv12
                } else if j + 1 < n {
                    // one in from the edge
                    (3.0 * get(ji + 1) + 10.0 * get(ji) - 18.0 * get(ji - 1)
                        + 6.0 * get(ji - 2)
                        - get(ji - 3))
                        * inv12
                } else {
                    (25.0 * get(ji) - 48.0 * get(ji - 1) + 36.0 * get(ji - 2)
                        - 16.0 * get(ji - 3)
                        + 3.0 * get(ji - 4))
                        * inv12
                };
                out.set_value(comp, mode, j, d);
            }
        }
    }
    out
}

/// Ratio band of `h_cone_norm / h1_slice_norm` over a family of matched
/// datum/state pairs.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub ratios: Vec<f64>,
    pub band_low: f64,
    pub band_high: f64,
}

pub fn equivalence_report(
    pairs: &[(NullDatum, SliceState)],
    cfg: &EvolutionConfig,
    model: &MetricModel,
) -> Result<EquivalenceReport, ConstraintError> {
    let mut ratios = Vec::with_capacity(pairs.len());
    for (d, s) in pairs {
        let hc = h_cone_norm(d, model)?;
        let hs = h1_slice_norm(s, cfg, model);
        if hs == 0.0 {
            return Err(ConstraintError::ZeroNorm);
        }
        ratios.push(hc / hs);
    }
    let band_low = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let band_high = ratios.iter().cloned().fold(0.0f64, f64::max);
    Ok(EquivalenceReport { ratios, band_low, band_high })
}

/// Both sides of the two source-term energy inequalities for a manufactured
/// solution, and the smallest constants making them hold.
#[derive(Debug, Clone, Serialize)]
pub struct SourceInequalityReport {
    /// |E_Sigma_T - E_cone|
    pub lhs_flux: f64,
    /// int_0^T int (|Psi|^2 + |Xi|^2)
    pub rhs_flux: f64,
    pub constant_flux: f64,
    /// max over t of E_Sigma_t / (E_Sigma_T + int_t^T |Xi|^2)
    pub constant_decay: f64,
}

pub fn lemma_source_report(
    ms: &ManufacturedSolution,
    cfg: &EvolutionConfig,
    model: &MetricModel,
    n_quad: usize,
) -> SourceInequalityReport {
    let t_final = cfg.t_end;
    // slice energies and |Xi|^2 integrals on [0, T]; slices of D_T are balls
    // of tortoise radius t
    let e_slice = |t: f64| -> f64 {
        ball_integral(model, t, n_quad, |r| {
            ms.values(t, r).iter().map(|z| z.norm_sqr()).sum::<f64>()
        })
    };
    let xi_sq = |t: f64| -> f64 {
        ball_integral(model, t, n_quad, |r| {
            ms.xi_values(t, r, model, cfg).iter().map(|z| z.norm_sqr()).sum::<f64>()
        })
    };
    // cone flux of the transverse trace
    let mut cone = 0.0;
    {
        let n = n_quad * 2;
        let dv = 2.0 * t_final / n as f64;
        for k in 0..=n {
            let v = dv * k as f64;
            let r = model.cone_radius(v);
            let vals = ms.values(0.5 * v, r);
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            cone += w * 0.5 * model.lapse(r) * r * r * (vals[0].norm_sqr() + vals[3].norm_sqr());
        }
        cone *= dv / 3.0;
    }
    let e_top = e_slice(t_final);
    let lhs_flux = (e_top - cone).abs();
    // time quadrature (Simpson) of the combined density
    let nt = n_quad * 2;
    let dt = t_final / nt as f64;
    let mut rhs_flux = 0.0;
    let mut xi_tail = vec![0.0; nt + 1]; // int_t^T |Xi|^2
    let mut density = vec![0.0; nt + 1];
    for k in 0..=nt {
        let t = dt * k as f64;
        density[k] = e_slice(t) + xi_sq(t);
    }
    for k in 0..=nt {
        let w = if k == 0 || k == nt {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        rhs_flux += w * density[k];
    }
    rhs_flux *= dt / 3.0;
    // int_t^T |Xi|^2 by backwards trapezoid (constants only need stability)
    for k in (0..nt).rev() {
        let a = xi_sq(dt * k as f64);
        let b = xi_sq(dt * (k + 1) as f64);
        xi_tail[k] = xi_tail[k + 1] + 0.5 * dt * (a + b);
    }
    let mut constant_decay = 0.0f64;
    for k in 0..=nt {
        let t = dt * k as f64;
        let lhs = e_slice(t);
        let rhs = e_top + xi_tail[k];
        if rhs > 0.0 {
            constant_decay = constant_decay.max(lhs / rhs);
        }
    }
    let constant_flux = if rhs_flux > 0.0 { lhs_flux / rhs_flux } else { 0.0 };
    SourceInequalityReport { lhs_flux, rhs_flux, constant_flux, constant_decay }
}

/// `int_0^{r(t)} f(r) (B/sqrt2) r^2 dr * (modes are already angular-integrated)`
fn ball_integral(model: &MetricModel, t: f64, n_quad: usize, f: impl Fn(f64) -> f64) -> f64 {
    let r_edge = model.r_of_r_star(t);
    if r_edge <= 0.0 {
        return 0.0;
    }
    let n = if n_quad % 2 == 0 { n_quad } else { n_quad + 1 };
    let dr = r_edge / n as f64;
    let mut acc = 0.0;
    for k in 0..=n {
        let r = dr * k as f64;
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * model.b(r) / 2f64.sqrt() * r * r * f(r);
    }
    acc * dr / 3.0
}

/// Least-squares fit of the vertex asymptotics of the geodesic convergence
/// and the section curvature on a log-spaced radius set.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsFit {
    /// extrapolated limit of `r rho` (should be -1)
    pub r_rho_limit: f64,
    /// fitted vertex constant in `r rho = -(1 + K r^2)`
    pub k_estimate: f64,
    pub fit_residual: f64,
    /// extrapolated limit of `r^2 k` (should be 1)
    pub r2_curvature_limit: f64,
    pub flagged: bool,
}

pub fn asymptotics_fit(model: &MetricModel, residual_tol: f64) -> Result<AsymptoticsFit, GeometryError> {
    let dir = Direction::new(1.1, 0.4);
    let radii: Vec<f64> = (0..8).map(|i| 0.2 * model.t_max() * 0.5f64.powi(i)).collect();
    // fit r rho = c0 + c2 r^2 over the sample
    let mut sums = [0.0f64; 5]; // n, sum r2, sum r4, sum y, sum y r2
    let mut samples = Vec::new();
    for &r in &radii {
        let p = SlicePoint { t: model.r_star(r).max(r), r, dir };
        let sc = spin_coefficients(model, &p, TetradChoice::GradientL)?;
        let y = r * sc.rho.re;
        samples.push((r, y));
        sums[0] += 1.0;
        sums[1] += r * r;
        sums[2] += r.powi(4);
        sums[3] += y;
        sums[4] += y * r * r;
    }
    let det = sums[0] * sums[2] - sums[1] * sums[1];
    let c0 = (sums[3] * sums[2] - sums[4] * sums[1]) / det;
    let c2 = (sums[0] * sums[4] - sums[1] * sums[3]) / det;
    let mut res = 0.0f64;
    for &(r, y) in &samples {
        res = res.max((y - c0 - c2 * r * r).abs());
    }
    // curvature limit from the two smallest radii (Richardson in r^2)
    let k1 = gauss_curvature(model, radii[radii.len() - 2])?;
    let k2 = gauss_curvature(model, radii[radii.len() - 1])?;
    let (ra, rb) = (radii[radii.len() - 2], radii[radii.len() - 1]);
    let (ya, yb) = (ra * ra * k1, rb * rb * k2);
    let r2_curvature_limit = yb + (yb - ya) * (rb * rb) / (ra * ra - rb * rb);
    Ok(AsymptoticsFit {
        r_rho_limit: c0,
        k_estimate: -c2,
        fit_residual: res,
        r2_curvature_limit,
        flagged: res > residual_tol,
    })
}

/// Convergence study bookkeeping: `(resolution, error)` rows with observed
/// orders `log2(e_{k-1}/e_k)` between successive refinements.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub target: String,
    pub rows: Vec<ConvergenceRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub resolution: usize,
    pub error: f64,
    pub observed_order: Option<f64>,
}

impl ConvergenceTable {
    pub fn from_errors(target: &str, data: &[(usize, f64)]) -> Self {
        let mut rows = Vec::with_capacity(data.len());
        for (i, &(res, err)) in data.iter().enumerate() {
            let observed_order = if i > 0 && err > 0.0 {
                let (r0, e0) = data[i - 1];
                Some((e0 / err).ln() / (res as f64 / r0 as f64).ln())
            } else {
                None
            };
            rows.push(ConvergenceRow { resolution: res, error: err, observed_order });
        }
        Self { target: target.into(), rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("resolution,error,observed_order\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:.17e},{}\n",
                row.resolution,
                row.error,
                row.observed_order.map(|o| format!("{o:.6}")).unwrap_or_default()
            ));
        }
        out
    }

    pub fn min_tail_order(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.observed_order)
            .fold(None, |acc, o| Some(acc.map_or(o, |a: f64| a.min(o))))
    }
}
