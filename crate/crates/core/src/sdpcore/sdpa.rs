//! SDPA sparse-format export, for cross-checking against external solvers.
//!
//! SDPA solves `minimize c.x` s.t. `sum_i F_i x_i - F_0 >= 0`, so the constant
//! part of each block is written with its sign flipped. Equalities become one
//! trailing diagonal block holding `a.y - b >= 0` and `b - a.y >= 0`.

use std::io::{self, Write};

use super::problem::ConicProblem;

pub fn write_sdpa<W: Write>(p: &ConicProblem, out: &mut W) -> io::Result<()> {
    let neq = p.equalities.len();
    let nblocks = p.blocks.len() + usize::from(neq > 0);
    writeln!(out, "\"moment relaxation: {} variables, {} equalities", p.num_vars, neq)?;
    writeln!(out, "{}", p.num_vars)?;
    writeln!(out, "{nblocks}")?;
    let mut sizes: Vec<String> = p.blocks.iter().map(|b| b.size.to_string()).collect();
    if neq > 0 {
        sizes.push(format!("-{}", 2 * neq));
    }
    writeln!(out, "{}", sizes.join(" "))?;
    let c: Vec<String> = p.objective.iter().map(|v| format!("{v:.17e}")).collect();
    writeln!(out, "{}", c.join(" "))?;

    for (b, blk) in p.blocks.iter().enumerate() {
        for (i, j, v) in blk.constant.iter() {
            writeln!(out, "0 {} {} {} {:.17e}", b + 1, i + 1, j + 1, -v)?;
        }
        for (&k, coeff) in &blk.coeffs {
            for (i, j, v) in coeff.iter() {
                writeln!(out, "{} {} {} {} {:.17e}", k + 1, b + 1, i + 1, j + 1, v)?;
            }
        }
    }
    if neq > 0 {
        let blk = p.blocks.len() + 1;
        for (r, (row, rhs)) in p.equalities.iter().enumerate() {
            let (lo, hi) = (2 * r + 1, 2 * r + 2);
            if *rhs != 0.0 {
                writeln!(out, "0 {blk} {lo} {lo} {:.17e}", rhs)?;
                writeln!(out, "0 {blk} {hi} {hi} {:.17e}", -rhs)?;
            }
            for &(k, v) in row {
                writeln!(out, "{} {blk} {lo} {lo} {:.17e}", k + 1, v)?;
                writeln!(out, "{} {blk} {hi} {hi} {:.17e}", k + 1, -v)?;
            }
        }
    }
    Ok(())
}

pub fn to_sdpa_string(p: &ConicProblem) -> String {
    let mut buf = Vec::new();
    write_sdpa(p, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("ascii output")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdpcore::problem::{AffineExpr, LmiBlock};

    #[test]
    fn header_and_entries() {
        let mut p = ConicProblem::new(2);
        p.objective = vec![0.0, 1.0];
        let mut blk = LmiBlock::new(2, "m");
        blk.add_coeff(0, 0, 0, 1.0);
        blk.add_constant(0, 1, 1.0);
        blk.add_coeff(1, 1, 1, 1.0);
        p.add_block(blk);
        p.add_equality(&AffineExpr { constant: -2.0, terms: vec![(0, 1.0)] });
        let text = to_sdpa_string(&p);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with('"'));
        assert_eq!(lines[1], "2");
        assert_eq!(lines[2], "2");
        assert_eq!(lines[3], "2 -2");
        assert!(lines.contains(&"0 1 1 2 -1.00000000000000000e0"));
        assert!(lines.contains(&"1 2 1 1 1.00000000000000000e0"));
        assert!(lines.contains(&"0 2 1 1 2.00000000000000000e0"));
        // every entry line has five fields
        assert!(lines[5..].iter().all(|l| l.split_whitespace().count() == 5));
    }
}
