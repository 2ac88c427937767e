//! Biorthogonal rational functions built from the chain: Gram matrix, `h_n`
//! and the determinant representation.

use markov_pade::biorth::{
    build_system, check_biorthogonality, check_pp_kap, determinant_agreement, determinant_forms, from_chain,
    GramFactor, KappaMode, MeasureFunctional, Moments,
};
use markov_pade::measure::{Measure, NodeSequence};
use markov_pade::schur::run_chain;
use markov_pade::{c64, Result};

fn main() -> Result<()> {
    let m = Measure::chebyshev();
    let nodes = NodeSequence::arc(0.0, 1.5, 10, 0.2)?;
    let chain = run_chain(&m, &nodes, 9)?;
    let data = from_chain(&chain, 9, KappaMode::Quadrature)?;
    let sys = build_system(data.clone())?;

    let gram = check_biorthogonality(&sys, &MeasureFunctional(chain.measure()), 8)?;
    println!("max off-diagonal / max |h| = {:.2e}", gram.max_offdiag / gram.max_h);
    println!("max relative diagonal error = {:.2e}", gram.max_diag_rel_error);
    for (n, h) in sys.h.iter().take(9).enumerate() {
        println!("h_{n} = {h:.6e}   kappa_{n} = {:.6e}", sys.kappa[n]);
    }

    let moments = Moments::Factor(GramFactor::new(chain.measure(), &data, 9)?);
    let probes = [c64(3.0, 0.0), c64(0.5, 2.0)];
    for n in 1..=8 {
        let forms = determinant_forms(&data, &moments, n)?;
        let pp = check_pp_kap(&sys, &moments, n)?;
        println!(
            "n = {n}: determinant route {:.1e}, PP_kappa residual {:.1e}",
            determinant_agreement(&sys, &forms, &probes),
            pp.residual
        );
    }
    Ok(())
}
