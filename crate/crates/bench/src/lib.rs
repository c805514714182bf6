//! Benchmarks for the sampler, loop extraction, observables and quadrature.
//! Run with `cargo bench -p fkq4-bench`.

use fkq4::sampler::Chain;
use fkq4::{BoundarySpec, Domain, FkConfig, ModelParams, Result, Scale};

/// A critical configuration on the box of half-width `n` after `sweeps`
/// Swendsen-Wang sweeps from the default start.
pub fn equilibrated(n: u32, bc: BoundarySpec, seed: u64, sweeps: u64) -> Result<(Domain, FkConfig)> {
    let d = Domain::new(n, Scale::UNIT)?;
    let cfg = {
        let mut chain = Chain::new(&d, bc, ModelParams::CRITICAL, seed, 0)?;
        chain.run(sweeps);
        chain.config().clone()
    };
    Ok((d, cfg))
}
