//! Generalized eigenvalues of the finite pencil sections and the `m`-function identity.

use markov_pade::measure::{Measure, NodeSequence};
use markov_pade::pencil::{build_section, check_mfunction_identity, gevp_spectrum, j2_factorize};
use markov_pade::recurrence::{build_polys, check_zeros};
use markov_pade::schur::run_chain;
use markov_pade::{c64, Result};

fn main() -> Result<()> {
    let m = Measure::chebyshev();
    let nodes = NodeSequence::arc(0.0, 1.5, 11, 0.2)?;
    let chain = run_chain(&m, &nodes, 11)?;
    let grid: Vec<_> = (0..12).map(|k| c64(-2.0 + 0.35 * k as f64, 0.8)).collect();

    for n in [2, 5, 10] {
        let section = build_section(&chain, 0, n)?;
        let eig = gevp_spectrum(&section)?;
        let zeros = check_zeros(&build_polys(&chain, n)?, chain.interval())?;
        let gap = eig.iter().zip(&zeros.p_zeros).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let ident = check_mfunction_identity(&chain, n, &grid)?;
        let fac = j2_factorize(&section)?;
        println!("n = {n:>2}: eigenvalues in [{:+.6}, {:+.6}]", eig[0], eig[eig.len() - 1]);
        println!("        max |eig - zero(P_n+1)| = {gap:.2e}, interlaced = {}", zeros.interlaced);
        println!("        m-function identity residual = {:.2e}", ident.max_residual);
        println!("        J2 = U L except last diagonal: {:.2e} (b_n^2 = {:.3e})",
            fac.max_other_error, fac.last_diagonal_discrepancy);
    }
    Ok(())
}
