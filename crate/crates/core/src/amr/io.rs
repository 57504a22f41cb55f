use std::io::Write;
use std::path::Path;

use super::Hierarchy;
use crate::error::Result;

/// Composite-grid CSV: `x,y,level,u0[,u1…]`, one row per uncovered cell
/// centre.
pub fn write_plotfile(h: &Hierarchy, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "x,y,level")?;
    for c in 0..h.ncomp {
        write!(f, ",u{c}")?;
    }
    writeln!(f)?;
    for (l, p, i, j) in h.composite_cells() {
        let x = h.cell_center(l, i, j);
        write!(f, "{:.16e},{:.16e},{l}", x[0], x[1])?;
        for c in 0..h.ncomp {
            write!(f, ",{:.16e}", h.levels[l].patches[p].get(c, i, j))?;
        }
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}
