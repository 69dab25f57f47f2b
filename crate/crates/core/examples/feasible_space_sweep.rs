//! Feasible space of the first- and second-order relaxations in the
//! P_G1-P_G2 plane, written as CSV.
//!
//! ```text
//! cargo run --release --example feasible_space_sweep -- [step_mw] [out.csv]
//! ```
//! The default 25 MW step runs in a few seconds; 0.5 MW gives figure quality.

use std::fs::File;
use std::io::BufWriter;

use moment_opf::netmodel::Network;
use moment_opf::sdpcore::Settings;
use moment_opf::sweep::{feasible_region_inclusion, order2_argmin, run_sweep, write_csv, SweepSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let step: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(25.0);
    let out = args.next();

    let net = Network::case3();
    let spec = SweepSpec { step, ..SweepSpec::from_network(&net)? };
    let cells = run_sweep(&net, &spec, &Settings::default())?;

    let feasible = |o| cells.iter().filter(|c| c.is_feasible(o)).count();
    println!("{} cells, feasible at order 1: {}, order 2: {}", cells.len(), feasible(1), feasible(2));
    println!("order-2 region inside order-1 region: {}", feasible_region_inclusion(&cells));
    if let Some(best) = order2_argmin(&cells) {
        println!("cheapest order-2 cell: ({}, {}) MW", best.p1, best.p2);
    }
    if let Some(path) = out {
        write_csv(&cells, BufWriter::new(File::create(&path)?))?;
        println!("wrote {path}");
    }
    Ok(())
}
