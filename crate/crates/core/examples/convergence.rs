//! Error of the convergents against the closed form `-1/sqrt(l^2 - 1)` of the Chebyshev
//! Markov function on the circle `|l| = 3`.

use markov_pade::cli::circle;
use markov_pade::measure::{Measure, NodeSequence};
use markov_pade::recurrence::eval_convergent;
use markov_pade::schur::run_chain;
use markov_pade::{c64, Complex64, Result};

fn phi(l: Complex64) -> Complex64 {
    // branch with sqrt(l^2 - 1) ~ l at infinity
    let s = (l - 1.0).sqrt() * (l + 1.0).sqrt();
    -1.0 / s
}

fn main() -> Result<()> {
    let m = Measure::chebyshev();
    let nodes = NodeSequence::vertical(1.0, 0.25, 0.0, 21, 0.5)?;
    let chain = run_chain(&m, &nodes, 21)?;
    let probes = circle(c64(0.0, 0.0), 3.0, 8);
    for n in [1, 5, 10, 15, 20] {
        let worst = probes
            .iter()
            .map(|&l| Ok((eval_convergent(&chain, n, l)? - phi(l)).norm()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        println!("n = {n:>2}  max |R_n - phi| = {worst:.3e}");
    }
    Ok(())
}
