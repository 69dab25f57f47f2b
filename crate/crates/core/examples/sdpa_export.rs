//! Dump a relaxation in SDPA sparse format for cross-checking with an
//! external SDP solver.
//!
//! ```text
//! cargo run --example sdpa_export -- 2 > case3_order2.dat-s
//! ```

use moment_opf::lasserre::{build_relaxation, RelaxationOptions};
use moment_opf::netmodel::{build_admittance, Network};
use moment_opf::sdpcore::sdpa::to_sdpa_string;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let order: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let net = Network::case3();
    let y = build_admittance(&net)?;
    let problem = build_relaxation(&net, &y, order, &RelaxationOptions::default())?;
    eprintln!(
        "order {order}: {} variables, {} equalities, block sizes {:?}",
        problem.conic.num_vars,
        problem.conic.equalities.len(),
        problem.conic.block_sizes()
    );
    print!("{}", to_sdpa_string(&problem.conic));
    Ok(())
}
