//! Fixed-column MPS-like text dump of an [`LpProblem`], for cross-checking
//! against external solvers. The byte layout is documented in
//! `docs/lp-dump-format.md`.

use super::LpProblem;
use std::io::{self, Write};

fn col_name(j: usize) -> String {
    format!("X{j:07}")
}

impl LpProblem {
    /// Writes the problem in the fixed-column MPS-like layout.
    pub fn write_mps_like<W: Write>(&self, name: &str, out: &mut W) -> io::Result<()> {
        writeln!(out, "NAME          {name}")?;
        writeln!(out, "OBJSENSE")?;
        writeln!(out, "    MAX")?;
        writeln!(out, "ROWS")?;
        writeln!(out, " N  OBJ")?;
        let ge: Vec<String> = (0..self.ineq_rows.len()).map(|r| format!("G{r:07}")).collect();
        let eq: Vec<String> = (0..self.eq_rows.len()).map(|r| format!("E{r:07}")).collect();
        for r in &ge {
            writeln!(out, " G  {r}")?;
        }
        for r in &eq {
            writeln!(out, " E  {r}")?;
        }
        writeln!(out, "COLUMNS")?;
        for j in 0..self.n {
            let c = col_name(j);
            if self.objective[j] != 0.0 {
                writeln!(out, "    {c:<8}  {:<8}  {:e}", "OBJ", self.objective[j])?;
            }
            let rows = self.ineq_rows.iter().zip(&ge).chain(self.eq_rows.iter().zip(&eq));
            for (row, rname) in rows {
                let v = row.coeffs[j];
                if v != 0.0 {
                    writeln!(out, "    {c:<8}  {rname:<8}  {v:e}")?;
                }
            }
        }
        writeln!(out, "RHS")?;
        let rows = self.ineq_rows.iter().zip(&ge).chain(self.eq_rows.iter().zip(&eq));
        for (row, rname) in rows {
            if row.rhs != 0.0 {
                writeln!(out, "    {:<8}  {rname:<8}  {:e}", "RHS", row.rhs)?;
            }
        }
        writeln!(out, "BOUNDS")?;
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            let c = col_name(j);
            match (lo.is_finite(), hi.is_finite()) {
                (false, false) => writeln!(out, " FR {:<8}  {c:<8}", "BND")?,
                (false, true) => {
                    writeln!(out, " MI {:<8}  {c:<8}", "BND")?;
                    writeln!(out, " UP {:<8}  {c:<8}  {hi:e}", "BND")?;
                }
                (true, hi_finite) => {
                    if lo != 0.0 {
                        writeln!(out, " LO {:<8}  {c:<8}  {lo:e}", "BND")?;
                    }
                    if hi_finite {
                        writeln!(out, " UP {:<8}  {c:<8}  {hi:e}", "BND")?;
                    }
                }
            }
        }
        writeln!(out, "ENDATA")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_stable() {
        let mut lp = LpProblem::new(vec![1.0, 0.0]);
        lp.add_ge(vec![1.0, -2.5], 0.0).add_eq(vec![1.0, 1.0], 1.0).set_bounds(1, -1.0, 3.0);
        let mut buf = Vec::new();
        lp.write_mps_like("demo", &mut buf).unwrap();
        let want = "\
NAME          demo
OBJSENSE
    MAX
ROWS
 N  OBJ
 G  G0000000
 E  E0000000
COLUMNS
    X0000000  OBJ       1e0
    X0000000  G0000000  1e0
    X0000000  E0000000  1e0
    X0000001  G0000000  -2.5e0
    X0000001  E0000000  1e0
RHS
    RHS       E0000000  1e0
BOUNDS
 LO BND       X0000001  -1e0
 UP BND       X0000001  3e0
ENDATA
";
        assert_eq!(String::from_utf8(buf).unwrap(), want);
    }
}
