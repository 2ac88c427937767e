use markov_pade::measure::{Measure, NodeSequence};
use markov_pade::schur::run_chain;
use markov_pade::Result;

// Coefficients of the step-by-step reduction for the Chebyshev measure on vertical nodes.
fn main() -> Result<()> {
    let m = Measure::chebyshev();
    let nodes = NodeSequence::vertical(1.0, 0.25, 0.0, 12, 0.5)?;
    let chain = run_chain(&m, &nodes, 12)?;
    println!("{:>3} {:>22} {:>12} {:>12} {:>12} {:>10}", "j", "z", "a1", "a2", "b", "a2-1-b^2");
    for (j, s) in chain.steps().iter().enumerate() {
        println!(
            "{j:>3} {:>22} {:>12.3e} {:>12.8} {:>12.8} {:>10.1e}",
            format!("{:.3}", s.z),
            s.a1,
            s.a2,
            s.b,
            s.a2 - 1.0 - s.b * s.b
        );
    }
    Ok(())
}
