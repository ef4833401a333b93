use capauct::dist::Dist;
use capauct::optlp::{build_single_agent_lp, solve_simplex};
fn main() {
    let space = Dist::uniform(0.0, 1.0).discretize(20);
    let lp = build_single_agent_lp(&space, 0.25);
    match solve_simplex(&lp) {
        Ok(sol) => eprintln!("status {:?} obj {:.6}", sol.status, sol.objective_value),
        Err(e) => eprintln!("error {e}"),
    }
}
