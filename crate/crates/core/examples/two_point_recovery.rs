//! Exact recovery of a two-atom measure: the chain stops after one step and the
//! first convergent reproduces the Markov function.

use markov_pade::measure::{Interval, Measure, NodeSequence};
use markov_pade::pencil::{build_section, gevp_spectrum};
use markov_pade::recurrence::{build_polys, eval_convergent};
use markov_pade::schur::run_chain;
use markov_pade::{c64, Result};

fn main() -> Result<()> {
    let m = Measure::discrete(Interval::new(-1.0, 1.0)?, vec![-1.0, 1.0], vec![0.5, 0.5])?;
    let nodes = NodeSequence::from_nodes(vec![c64(0.0, 1.0), c64(0.0, 2.0)])?;
    let chain = run_chain(&m, &nodes, 2)?;

    for (j, s) in chain.records().enumerate() {
        println!("step {j}: z = {}, a1 = {:+.3e}, a2 = {:.6}, b = {:.6}", s.z, s.a1, s.a2, s.b);
    }
    println!("terminated: {}", chain.is_terminated());

    let pair = build_polys(&chain, 1)?;
    let re = |c: &[markov_pade::Complex64]| c.iter().map(|x| x.re).collect::<Vec<_>>();
    println!("P_2 coefficients: {:?}", re(pair.p_last().coeffs()));
    println!("Q_2 coefficients: {:?}", re(pair.q_last().coeffs()));

    for l in [c64(2.0, 0.0), c64(0.3, 0.7), c64(-5.0, 1.0)] {
        let r = eval_convergent(&chain, 1, l)?;
        let exact = l / (1.0 - l * l);
        println!("R_1({l}) = {r:.12}  |R_1 - l/(1-l^2)| = {:.2e}", (r - exact).norm());
    }

    let section = build_section(&chain, 0, 1)?;
    println!("pencil eigenvalues: {:?}", gevp_spectrum(&section)?);
    Ok(())
}
