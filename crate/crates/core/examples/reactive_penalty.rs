//! Penalizing total reactive generation in the first-order relaxation.
//!
//! Large enough penalties make the moment matrix rank one, so the point is
//! feasible; the order-2 bound then measures how far from optimal it is.

use moment_opf::netmodel::Network;
use moment_opf::report::Workflow;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = Network::case3();
    let wf = Workflow::default();
    let eps: Vec<f64> = match std::env::args().nth(1) {
        Some(s) => vec![s.parse()?],
        None => vec![0.0, 300.0, 400.0, 1000.0, 33.76e3],
    };
    for e in eps {
        let (r, p) = wf.penalize(&net, e)?;
        let gap = p.worst_case_optimality_gap_pct.map_or("-".to_string(), |g| format!("{g:.2}%"));
        let gens: Vec<String> = r.lifted_generation.iter().map(|g| format!("{:.2}", g.p_mw)).collect();
        println!(
            "eps {e:>9}: rank one {:<5} P = [{}] MW, feasible cost {:?}, gap {gap}",
            r.rank.condition_met,
            gens.join(", "),
            p.feasible_cost_usd_per_hr.map(|c| c.round())
        );
    }
    Ok(())
}
