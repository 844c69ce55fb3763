//! Backward time stepping for the European equation and the penalized
//! American problem
//!
//! ```text
//! −∂u/∂t − (𝓛 − r)u + ζ_ε(u − ψ) = 0,   u(T) = ψ.
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{HestonParams, PutSpec};
use crate::pde::lattice::Lattice;
use crate::pde::operator::{assemble_operator, DiscreteGenerator};
use crate::pde::penalty::{apply_penalty, equilibrium_gap, PenaltyFamily};
use crate::pde::sparse::{bicgstab, CsrMatrix};
use crate::pde::surface::{PriceSurface, SolverDiagnostics, SurfaceKind, TimeScheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    #[serde(default)]
    pub scheme: TimeScheme,
    /// Newton residual tolerance relative to the strike.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_linear: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            scheme: TimeScheme::Implicit,
            newton_tol: 1e-9,
            max_newton: 60,
            max_linear: 500,
        }
    }
}

/// Dirichlet datum on the `x_min` column at time-to-maturity `tau`.
///
/// European: the forward value `Ke^{−rτ} − s e^{−δτ}`, floored at 0.
/// American: deep in the exercise region the penalized solution settles at
/// `ψ + w_eq` with `ζ_ε(w_eq) = (𝓛 − r)ψ = δeˣ − rK`, so the column carries
/// that value (never below the forward value).
fn lower_far_field(
    lattice: &Lattice,
    params: &HestonParams,
    spec: &PutSpec,
    tau: f64,
    penalty: Option<&PenaltyFamily>,
) -> f64 {
    let s_min = lattice.x_min().exp();
    let forward = spec.strike * (-params.r * tau).exp() - s_min * (-params.delta * tau).exp();
    match penalty {
        None => forward.max(0.0),
        Some(pen) => {
            let psi = spec.payoff_log(lattice.x_min());
            let source = params.delta * s_min - params.r * spec.strike;
            let settled = if source < 0.0 && psi > 0.0 {
                psi + equilibrium_gap(source, pen)
            } else {
                psi
            };
            forward.max(settled)
        }
    }
}

fn check_inputs(params: &HestonParams, spec: &PutSpec, lattice: &Lattice) -> Result<()> {
    params.validate()?;
    spec.validate()?;
    let lk = spec.strike.ln();
    if !(lattice.x_min() < lk && lk < lattice.x_max()) {
        return Err(Error::InvalidLattice(format!(
            "log-strike {lk} outside [{}, {}]",
            lattice.x_min(),
            lattice.x_max()
        )));
    }
    if (lattice.maturity() - spec.maturity).abs() > 1e-12 * spec.maturity {
        return Err(Error::InvalidLattice(format!(
            "lattice horizon {} differs from maturity {}",
            lattice.maturity(),
            spec.maturity
        )));
    }
    Ok(())
}

/// One backward step `u_old → u_new` over `dtau` with implicit weight
/// `theta`.
struct Stepper<'a> {
    op: &'a DiscreteGenerator,
    dirichlet: Vec<bool>,
    obstacle: Vec<f64>,
    penalty: Option<PenaltyFamily>,
    tol: f64,
    max_newton: usize,
    max_linear: usize,
}

struct StepStats {
    newton: usize,
    linear: usize,
    residual: f64,
}

impl Stepper<'_> {
    fn step(
        &self,
        u_old: &[f64],
        dtau: f64,
        theta: f64,
        boundary: &dyn Fn(usize) -> f64,
        step_index: usize,
    ) -> Result<(Vec<f64>, StepStats)> {
        let n = u_old.len();
        let a = &self.op.matrix;
        // rhs = (I + (1−θ)Δτ A) u_old
        let mut rhs = vec![0.0; n];
        if theta < 1.0 {
            a.mul_vec(u_old, &mut rhs);
            for i in 0..n {
                rhs[i] = u_old[i] + (1.0 - theta) * dtau * rhs[i];
            }
        } else {
            rhs.copy_from_slice(u_old);
        }
        let mut u = u_old.to_vec();
        for i in 0..n {
            if self.dirichlet[i] {
                rhs[i] = boundary(i);
                u[i] = rhs[i];
            }
        }
        let base = a.shifted(1.0, -theta * dtau, &self.dirichlet);
        let lin_tol = 0.05 * self.tol;

        let Some(pen) = self.penalty else {
            let st = bicgstab(&base, &rhs, &mut u, lin_tol, self.max_linear)?;
            return Ok((
                u,
                StepStats {
                    newton: 0,
                    linear: st.iterations,
                    residual: st.residual,
                },
            ));
        };

        let residual = |u: &[f64], out: &mut [f64]| -> f64 {
            base.mul_vec(u, out);
            let mut m = 0.0f64;
            for i in 0..n {
                if !self.dirichlet[i] {
                    out[i] += dtau * apply_penalty(u[i] - self.obstacle[i], &pen).0;
                }
                out[i] -= rhs[i];
                m = m.max(out[i].abs());
            }
            m
        };
        let mut f = vec![0.0; n];
        let mut norm = residual(&u, &mut f);
        let mut linear = 0;
        let mut it = 0;
        let mut trial = vec![0.0; n];
        let mut f_trial = vec![0.0; n];
        while norm > self.tol {
            if it == self.max_newton {
                return Err(Error::Newton {
                    step: step_index,
                    iterations: it,
                    residual: norm,
                });
            }
            it += 1;
            let mut jac: CsrMatrix = base.clone();
            for i in 0..n {
                if !self.dirichlet[i] {
                    jac.add_to_diagonal(i, dtau * apply_penalty(u[i] - self.obstacle[i], &pen).1);
                }
            }
            let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
            let mut du = vec![0.0; n];
            let st = bicgstab(&jac, &neg_f, &mut du, lin_tol, self.max_linear)?;
            linear += st.iterations;
            // backtracking on the max-norm residual
            let mut step = 1.0;
            loop {
                for i in 0..n {
                    trial[i] = u[i] + step * du[i];
                }
                let trial_norm = residual(&trial, &mut f_trial);
                if trial_norm < norm || step < 1e-3 {
                    std::mem::swap(&mut u, &mut trial);
                    std::mem::swap(&mut f, &mut f_trial);
                    norm = trial_norm;
                    break;
                }
                step *= 0.5;
            }
        }
        Ok((
            u,
            StepStats {
                newton: it,
                linear,
                residual: norm,
            },
        ))
    }
}

fn solve(
    params: &HestonParams,
    spec: &PutSpec,
    lattice: &Lattice,
    penalty: Option<PenaltyFamily>,
    options: &SolverOptions,
) -> Result<PriceSurface> {
    check_inputs(params, spec, lattice)?;
    if options.newton_tol <= 0.0 {
        return Err(invalid("newton_tol", "must be > 0"));
    }
    let kind = if penalty.is_some() {
        SurfaceKind::American
    } else {
        SurfaceKind::European
    };
    let op = assemble_operator(lattice, params, 0.0);
    let (nt, ny) = (lattice.nt(), lattice.ny());
    let ns = lattice.n_space();
    let obstacle: Vec<f64> = (0..ns)
        .map(|r| spec.payoff_log(lattice.x_nodes[r / ny]))
        .collect();
    let stepper = Stepper {
        dirichlet: op.is_dirichlet(),
        op: &op,
        obstacle: obstacle.clone(),
        penalty,
        tol: options.newton_tol * spec.strike,
        max_newton: options.max_newton,
        max_linear: options.max_linear,
    };

    let mut values = vec![0.0; nt * ns];
    values[(nt - 1) * ns..].copy_from_slice(&obstacle);
    let mut diag = SolverDiagnostics {
        scheme: options.scheme,
        time_steps: nt - 1,
        m_matrix_violations: op.m_matrix_violations,
        penalty_epsilon: penalty.map(|p| p.epsilon),
        oracle_mode: params.oracle_mode(),
        degenerate_rate: params.degenerate_rate(),
        ..Default::default()
    };

    let maturity = lattice.maturity();
    let rannacher = match options.scheme {
        TimeScheme::Implicit => usize::MAX,
        TimeScheme::CrankNicolson { rannacher_steps } => rannacher_steps,
    };
    let mut u = obstacle.clone();
    for (step, ti) in (0..nt - 1).rev().enumerate() {
        let dtau = lattice.t_nodes[ti + 1] - lattice.t_nodes[ti];
        let tau_old = maturity - lattice.t_nodes[ti + 1];
        // (substeps, θ)
        let plan: (usize, f64) = if step < rannacher {
            if rannacher == usize::MAX {
                (1, 1.0)
            } else {
                (2, 1.0)
            }
        } else {
            (1, 0.5)
        };
        let h = dtau / plan.0 as f64;
        for sub in 0..plan.0 {
            let tau = tau_old + h * (sub + 1) as f64;
            let low = lower_far_field(lattice, params, spec, tau, penalty.as_ref());
            // x_max: zero slope in x, lagged by one step
            let prev = &u;
            let bc = move |r: usize| if r / ny == 0 { low } else { prev[r - ny] };
            let (next, st) = stepper.step(&u, h, plan.1, &bc, step)?;
            u = next;
            diag.newton_iterations += st.newton;
            diag.max_newton_per_step = diag.max_newton_per_step.max(st.newton);
            diag.linear_iterations += st.linear;
            diag.final_residual = diag.final_residual.max(st.residual);
        }
        values[ti * ns..(ti + 1) * ns].copy_from_slice(&u);
    }

    if let Some(pen) = penalty {
        let mut gap = f64::INFINITY;
        for ti in 0..nt - 1 {
            for r in 0..ns {
                gap = gap.min(values[ti * ns + r] - obstacle[r]);
            }
        }
        diag.min_obstacle_gap = Some(gap);
        if gap < -pen.epsilon {
            return Err(Error::Newton {
                step: nt - 1,
                iterations: diag.newton_iterations,
                residual: gap,
            });
        }
    }
    Ok(PriceSurface {
        lattice: lattice.clone(),
        params: *params,
        spec: *spec,
        kind,
        values,
        diagnostics: diag,
    })
}

/// European put surface: `(∂t + 𝓛 − r)u = 0`, `u(T) = ψ`.
pub fn solve_european(
    params: &HestonParams,
    spec: &PutSpec,
    lattice: &Lattice,
    options: &SolverOptions,
) -> Result<PriceSurface> {
    solve(params, spec, lattice, None, options)
}

/// American put surface from the penalized problem, one Newton solve per
/// time step. Guarantees `u ≥ ψ − ε` or fails.
pub fn solve_american(
    params: &HestonParams,
    spec: &PutSpec,
    lattice: &Lattice,
    penalty: &PenaltyFamily,
    options: &SolverOptions,
) -> Result<PriceSurface> {
    solve(params, spec, lattice, Some(*penalty), options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::lattice::GridSpec;

    fn small_grid() -> GridSpec {
        GridSpec {
            nx: 41,
            ny: 21,
            steps: 20,
            ..GridSpec::desk()
        }
    }

    fn setup() -> (HestonParams, PutSpec, Lattice) {
        let p = HestonParams::desk();
        let spec = PutSpec::new(100.0, 1.0).unwrap();
        let l = small_grid().build(&p, &spec, 100.0, 0.04).unwrap();
        (p, spec, l)
    }

    #[test]
    fn terminal_slice_is_payoff() {
        let (p, spec, l) = setup();
        let eu = solve_european(&p, &spec, &l, &SolverOptions::default()).unwrap();
        let am = solve_american(&p, &spec, &l, &PenaltyFamily::for_put(&p, &spec), &SolverOptions::default()).unwrap();
        let last = l.nt() - 1;
        for i in 0..l.nx() {
            for k in 0..l.ny() {
                let psi = spec.payoff_log(l.x_nodes[i]);
                assert_eq!(eu.value(last, i, k), psi);
                assert_eq!(am.value(last, i, k), psi);
            }
        }
    }

    #[test]
    fn american_dominates_european_and_obstacle() {
        let (p, spec, l) = setup();
        let pen = PenaltyFamily::for_put(&p, &spec);
        let eu = solve_european(&p, &spec, &l, &SolverOptions::default()).unwrap();
        let am = solve_american(&p, &spec, &l, &pen, &SolverOptions::default()).unwrap();
        for (a, e) in am.values.iter().zip(&eu.values) {
            assert!(a >= &(e - 1e-9));
        }
        assert!(am.diagnostics.min_obstacle_gap.unwrap() >= -pen.epsilon);
        assert!(am.price(100.0, 0.04) > eu.price(100.0, 0.04));
    }

    #[test]
    fn values_stay_in_zero_strike_band() {
        let (p, spec, l) = setup();
        let eu = solve_european(&p, &spec, &l, &SolverOptions::default()).unwrap();
        for v in &eu.values {
            assert!(*v >= -1e-9 && *v <= spec.strike + 1e-9);
        }
    }

    #[test]
    fn zero_rates_european_dominates_payoff() {
        let p = HestonParams::new(1.5, 0.04, 0.3, -0.5, 0.0, 0.0).unwrap();
        let spec = PutSpec::new(100.0, 1.0).unwrap();
        let l = small_grid().build(&p, &spec, 100.0, 0.04).unwrap();
        let eu = solve_european(&p, &spec, &l, &SolverOptions::default()).unwrap();
        for ti in 0..l.nt() {
            for i in 0..l.nx() {
                for k in 0..l.ny() {
                    let psi = spec.payoff_log(l.x_nodes[i]);
                    assert!(eu.value(ti, i, k) >= psi - 1e-9, "({ti},{i},{k})");
                }
            }
        }
    }

    #[test]
    fn crank_nicolson_agrees_with_implicit() {
        let (p, spec, l) = setup();
        let imp = solve_european(&p, &spec, &l, &SolverOptions::default()).unwrap();
        let cn = solve_european(
            &p,
            &spec,
            &l,
            &SolverOptions {
                scheme: TimeScheme::CrankNicolson { rannacher_steps: 2 },
                ..Default::default()
            },
        )
        .unwrap();
        let a = imp.price(100.0, 0.04);
        let b = cn.price(100.0, 0.04);
        assert!((a - b).abs() < 0.05, "{a} vs {b}");
    }

    #[test]
    fn rejects_lattice_missing_strike() {
        let (p, spec, l) = setup();
        let far = PutSpec::new(1e4, 1.0).unwrap();
        assert!(solve_european(&p, &far, &l, &SolverOptions::default()).is_err());
        let other = PutSpec::new(spec.strike, 2.0).unwrap();
        assert!(solve_european(&p, &other, &l, &SolverOptions::default()).is_err());
    }
}
