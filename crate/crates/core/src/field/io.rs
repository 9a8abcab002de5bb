//! Plain-text gridded field files.
//!
//! ```text
//! d L S T nx [ny [nz]] nt
//! u_1,...,u_d          <- one row per node, row-major (first axis slowest),
//! ...                     all nodes of time sample 0, then sample 1, ...
//! ```
//!
//! The header is whitespace separated; data rows are comma separated with
//! exactly `d` values. Blank lines and lines starting with `#` are ignored.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field::GriddedField;

pub fn read_gridded<R: BufRead>(reader: R) -> Result<GriddedField> {
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty() && !s.trim_start().starts_with('#')));

    let (hline, header) = match lines.next() {
        Some((n, l)) => (n, l?),
        None => return Err(Error::Parse { line: 0, msg: "missing header".into() }),
    };
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let bad = |msg: String| Error::Parse { line: hline, msg };
    let dim: usize = tokens
        .first()
        .ok_or_else(|| bad("empty header".into()))?
        .parse()
        .map_err(|_| bad(format!("dimension `{}`", tokens[0])))?;
    if !(1..=3).contains(&dim) || tokens.len() != 5 + dim {
        return Err(bad(format!("expected `d L S T n_1..n_d nt`, got {} fields", tokens.len())));
    }
    let real = |i: usize| -> Result<f64> {
        tokens[i].parse().map_err(|_| bad(format!("number `{}`", tokens[i])))
    };
    let int = |i: usize| -> Result<usize> {
        tokens[i].parse().map_err(|_| bad(format!("count `{}`", tokens[i])))
    };
    let domain = Domain::new(dim, real(1)?, real(2)?, real(3)?)?;
    let counts: Vec<usize> = (4..4 + dim).map(int).collect::<Result<_>>()?;
    let nt = int(4 + dim)?;

    let rows = counts.iter().product::<usize>() * nt;
    let mut data = Vec::with_capacity(rows * dim);
    for (n, line) in lines {
        let line = line?;
        let before = data.len();
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| Error::Parse { line: n, msg: format!("value `{}`", tok.trim()) })?;
            data.push(v);
        }
        if data.len() - before != dim {
            return Err(Error::Parse { line: n, msg: format!("expected {dim} values, got {}", data.len() - before) });
        }
    }
    if data.len() != rows * dim {
        return Err(Error::Shape(format!("expected {rows} rows, got {}", data.len() / dim)));
    }
    GriddedField::new(domain, &counts, nt, data)
}

pub fn load_gridded(path: impl AsRef<Path>) -> Result<GriddedField> {
    let file = std::fs::File::open(path)?;
    read_gridded(std::io::BufReader::new(file))
}

pub fn write_gridded<W: Write>(mut w: W, field: &GriddedField) -> Result<()> {
    let dom = field.domain();
    let d = dom.dim();
    write!(w, "{} {} {} {}", d, dom.period(), dom.start(), dom.end())?;
    for n in field.lattice().counts() {
        write!(w, " {n}")?;
    }
    writeln!(w, " {}", field.time_samples())?;
    for row in field.raw().chunks(d) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn save_gridded(path: impl AsRef<Path>, field: &GriddedField) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_gridded(&mut w, field)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_small_file() {
        let text = "2 1 0 1 2 2 1\n# comment\n1,0\n0,1\n-1,0\n0,-1\n";
        let g = read_gridded(text.as_bytes()).unwrap();
        assert_eq!(g.lattice().counts(), &[2, 2]);
        assert_eq!(g.node_velocity(0, 2), [-1.0, 0.0, 0.0]);
    }

    #[test]
    fn written_file_reads_back_identically() {
        let dom = Domain::new(2, 2.0, 0.0, 0.5).unwrap();
        let g = GriddedField::from_fn(dom, &[4, 3], 2, |t, x| [x[1] + t, -x[0], 0.0]).unwrap();
        let mut buf = Vec::new();
        write_gridded(&mut buf, &g).unwrap();
        let back = read_gridded(buf.as_slice()).unwrap();
        assert_eq!(back.raw(), g.raw());
        assert_eq!(back.domain(), g.domain());
    }

    #[test]
    fn rejects_shape_errors() {
        let short = "2 1 0 1 2 2 1\n1,0\n0,1\n-1,0\n";
        assert!(matches!(read_gridded(short.as_bytes()), Err(Error::Shape(_))));
        let wide = "2 1 0 1 2 2 1\n1,0,3\n0,1\n-1,0\n0,-1\n";
        assert!(matches!(read_gridded(wide.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let header = "2 1 0 1 2 1\n";
        assert!(matches!(read_gridded(header.as_bytes()), Err(Error::Parse { line: 1, .. })));
        let nan = "1 1 0 1 2 1\nNaN\n0\n";
        assert!(matches!(read_gridded(nan.as_bytes()), Err(Error::NonFinite(_))));
    }
}
