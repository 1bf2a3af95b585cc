//! Minimizes a linear objective over a disc intersected with a half-plane
//! and certifies the result with the KKT residuals.

use aoi_forge::solver::{certify, solve, BarrierOptions, LinearConstraint, NlpProblem, SmoothConstraint};
use nalgebra::DMatrix;

/// `(x−1)² + (y−1)² − 1 ≤ 0`.
struct Disc;

impl SmoothConstraint for Disc {
    fn value(&self, x: &[f64]) -> f64 {
        (x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2) - 1.0
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad[0] += 2.0 * (x[0] - 1.0);
        grad[1] += 2.0 * (x[1] - 1.0);
    }

    fn add_hessian(&self, _x: &[f64], weight: f64, hess: &mut DMatrix<f64>) {
        hess[(0, 0)] += 2.0 * weight;
        hess[(1, 1)] += 2.0 * weight;
    }
}

fn main() {
    let problem = NlpProblem::new(vec![-1.0, -2.0], vec![1.0, 1.0])
        .with_constraint(Disc)
        .with_constraint(LinearConstraint { coeffs: vec![(1, 1.0)], constant: -1.5 });
    let sol = solve(&problem, &BarrierOptions::new(1e-9, 200)).expect("start is interior");
    let (kkt, ok) = certify(&problem, &sol.x, &sol.duals, 1e-8);
    println!("x = ({:.9}, {:.9})  objective {:.9}", sol.x[0], sol.x[1], sol.objective);
    println!("duals {:?}", sol.duals.constraints);
    println!("stationarity {:.1e}  feasibility {:.1e}  complementarity {:.1e}  certified {ok}", kkt.stationarity, kkt.feasibility, kkt.complementarity);
    println!("newton steps {}", sol.newton_iterations);
}
