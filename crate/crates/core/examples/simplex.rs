//! The bounded revised simplex on a small production-planning LP.

use evsp::lp::{LpSolver, RevisedSimplex};

fn main() -> evsp::Result<()> {
    // min -3x - 5y  s.t.  x <= 4,  2y <= 12,  3x + 2y <= 18,  0 <= x, y
    let inf = f64::INFINITY;
    let mut lp = RevisedSimplex::new(&[-inf, -inf, -inf], &[4.0, 12.0, 18.0]);
    lp.add_column(-3.0, 0.0, inf, vec![(0, 1.0), (2, 3.0)]);
    lp.add_column(-5.0, 0.0, inf, vec![(1, 2.0), (2, 2.0)]);
    let sol = lp.solve()?;
    println!("objective {:.3} at x = {:?}", sol.objective, sol.x);
    println!("duals {:?}, dual objective {:.3}", sol.duals, lp.dual_objective(&sol));
    Ok(())
}
