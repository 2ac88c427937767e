//! The dense interpolation solver against the chain, and where its rank test gives up.

use markov_pade::cli::circle;
use markov_pade::measure::{Measure, NodeSequence};
use markov_pade::oracle::{cross_validate, newton_pade_solve, InterpolationProblem};
use markov_pade::schur::run_chain;
use markov_pade::{c64, Error, Result};

fn main() -> Result<()> {
    let m = Measure::chebyshev();
    let grid = circle(c64(0.0, 0.0), 2.5, 20);

    let near = NodeSequence::arc(0.0, 1.1, 11, 0.1)?;
    let chain = run_chain(&m, &near, 11)?;
    for n in 0..=10 {
        let cv = cross_validate(&chain, n, &grid)?;
        println!("arc nodes, n = {n:>2}: max |R_n - oracle| = {:.2e}", cv.max_diff);
    }

    let far = NodeSequence::vertical(1.0, 0.25, 0.0, 8, 0.5)?;
    for n in 4..=7 {
        match newton_pade_solve(&InterpolationProblem::from_measure(&m, &far, n)?) {
            Ok(sol) => println!("vertical nodes, n = {n}: rank gap {:.2e}", sol.rank_gap),
            Err(Error::RankDeficient { gap, .. }) => println!("vertical nodes, n = {n}: rank deficient (gap {gap:.2e})"),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
