use markov_pade::measure::{Measure, NodeSequence};
use markov_pade::oracle::sample_markov;
use markov_pade::schur::{check_solvability, pick_forms};
use markov_pade::{c64, Result};

/// Pick forms for genuine Markov data and for values outside the Nevanlinna class.
fn main() -> Result<()> {
    let m = Measure::chebyshev();
    let nodes = NodeSequence::vertical(0.5, 0.5, 0.2, 11, 0.1)?;
    let z = nodes.as_slice();
    let w = sample_markov(&m, z)?;
    let interval = m.interval();

    for n in [2, 5, 10] {
        let pf = pick_forms(z, &w, interval, n)?;
        let (a, b) = pf.min_eigenvalues()?;
        println!("Markov data, N = {n:>2}: min eig {a:+.2e}, {b:+.2e}, solvable = {}", check_solvability(&pf, 1e-12));
    }

    let mut bad = w.clone();
    bad[1] = c64(w[1].re, -w[1].im.abs());
    let pf = pick_forms(z, &bad, interval, 3)?;
    let (a, b) = pf.min_eigenvalues()?;
    println!("negative imaginary value: min eig {a:+.2e}, {b:+.2e}, solvable = {}", check_solvability(&pf, 1e-12));
    Ok(())
}
