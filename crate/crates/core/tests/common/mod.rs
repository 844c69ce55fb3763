//! Shared oracles for the integration tests.

use heston_amer::pde::{assemble_operator, build_lattice, LatticeConfig, YGrading};
use heston_amer::*;
use nalgebra::{DMatrix, DVector};

/// Backward induction of the implicit step as a linear complementarity
/// problem on the interior nodes, solved by enumerating every active set.
/// The `x_min` column is taken from `reference` (prescribed data); the
/// `x_max` column carries the interior neighbor of the previous step, as
/// in the solver.
pub fn lcp_oracle(params: &HestonParams, spec: &PutSpec, reference: &PriceSurface) -> Vec<Vec<f64>> {
    let l = &reference.lattice;
    let (nt, nx, ny) = (l.nt(), l.nx(), l.ny());
    assert_eq!(nx, 3, "oracle assumes one interior column");
    let a = assemble_operator(l, params, 0.0).matrix;
    let psi: Vec<f64> = (0..ny).map(|_| spec.payoff_log(l.x_nodes[1])).collect();
    let mut out = vec![Vec::new(); nt];
    let mut u_old: Vec<f64> = (0..l.n_space()).map(|r| spec.payoff_log(l.x_nodes[r / ny])).collect();
    out[nt - 1] = u_old.clone();
    for ti in (0..nt - 1).rev() {
        let dtau = l.t_nodes[ti + 1] - l.t_nodes[ti];
        let mut bnd = vec![0.0; l.n_space()];
        for k in 0..ny {
            bnd[l.idx(0, k)] = reference.value(ti, 0, k);
            bnd[l.idx(2, k)] = u_old[l.idx(1, k)];
        }
        let interior: Vec<usize> = (0..ny).map(|k| l.idx(1, k)).collect();
        let m = DMatrix::from_fn(ny, ny, |p, q| {
            let (i, j) = (interior[p], interior[q]);
            f64::from(u8::from(p == q)) - dtau * a.get(i, j)
        });
        let rhs = DVector::from_fn(ny, |p, _| {
            let i = interior[p];
            let coupling: f64 = [0usize, 2]
                .iter()
                .flat_map(|&c| (0..ny).map(move |k| (c, k)))
                .map(|(c, k)| a.get(i, l.idx(c, k)) * bnd[l.idx(c, k)])
                .sum();
            u_old[i] + dtau * coupling
        });
        let mut solutions = Vec::new();
        for mask in 0u32..(1 << ny) {
            let active = |p: usize| mask & (1 << p) != 0;
            let sys = DMatrix::from_fn(ny, ny, |p, q| {
                if active(p) {
                    f64::from(u8::from(p == q))
                } else {
                    m[(p, q)]
                }
            });
            let b = DVector::from_fn(ny, |p, _| if active(p) { psi[p] } else { rhs[p] });
            let Some(u) = sys.lu().solve(&b) else { continue };
            let slack = &m * &u - &rhs;
            let ok = (0..ny).all(|p| {
                if active(p) {
                    slack[p] >= -1e-10
                } else {
                    u[p] >= psi[p] - 1e-10
                }
            });
            if ok {
                solutions.push((mask, u));
            }
        }
        assert!(!solutions.is_empty(), "no complementarity solution at step {ti}");
        for (_, s) in &solutions[1..] {
            assert!((s - &solutions[0].1).amax() < 1e-9, "non-unique solution");
        }
        let (mask, u) = &solutions[0];
        if ti == 0 {
            assert!(*mask != 0 && *mask != (1 << ny) - 1, "mixed active set expected, got {mask:b}");
        }
        let mut next = bnd.clone();
        for p in 0..ny {
            next[interior[p]] = u[p];
        }
        out[ti] = next.clone();
        u_old = next;
    }
    out
}

/// Max deviation between the penalty solver and [`lcp_oracle`] on the
/// 3×5×3 lattice, and the penalty scale `ε`.
pub fn tiny_lattice_deviation() -> (f64, f64) {
    let params = HestonParams::desk();
    let spec = PutSpec::new(100.0, 1.0).unwrap();
    let lattice = build_lattice(&LatticeConfig {
        maturity: 1.0,
        nt: 3,
        x_min: 40f64.ln(),
        x_max: 105f64.ln(),
        nx: 3,
        y_min: 0.0,
        y_max: 0.4,
        ny: 5,
        grading: YGrading::Uniform,
    })
    .unwrap();
    let penalty = PenaltyFamily::for_put(&params, &spec);
    let surface =
        solve_american(&params, &spec, &lattice, &penalty, &SolverOptions::default()).unwrap();
    let oracle = lcp_oracle(&params, &spec, &surface);
    let mut worst: f64 = 0.0;
    for ti in 0..lattice.nt() {
        for k in 0..lattice.ny() {
            worst = worst.max((surface.value(ti, 1, k) - oracle[ti][lattice.idx(1, k)]).abs());
        }
    }
    (worst, penalty.epsilon)
}

