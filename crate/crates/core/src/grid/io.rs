//! Field snapshot files.
//!
//! ```text
//! dislo-field v1; dim=2; n=256,256; lo=-3,-3; hi=3,3; t=0.5
//! <one value per line, row-major, 17 significant digits>
//! ```
//!
//! A field without a time tag is written with `t=none`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Grid, ScalarField};
use crate::error::{Error, Result};

const MAGIC: &str = "dislo-field v1";

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn write_field_to<W: Write>(field: &ScalarField, mut out: W) -> Result<()> {
    let g = field.grid();
    let t = match field.time() {
        Some(t) => format!("{t:?}"),
        None => "none".to_string(),
    };
    let lo: Vec<String> = g.lo().iter().map(|v| format!("{v:?}")).collect();
    let hi: Vec<String> = g.hi().iter().map(|v| format!("{v:?}")).collect();
    writeln!(
        out,
        "{MAGIC}; dim={}; n={}; lo={}; hi={}; t={t}",
        g.dim(),
        join(g.n()),
        lo.join(","),
        hi.join(",")
    )?;
    for v in field.values() {
        writeln!(out, "{v:.16e}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_field(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_field_to(field, BufWriter::new(file))
}

fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| Error::Format(format!("bad entry '{p}' in header key '{key}'")))
        })
        .collect()
}

pub fn read_field_from<R: Read>(input: R) -> Result<ScalarField> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty file".into()))??;
    let mut parts = header.split(';').map(str::trim);
    if parts.next() != Some(MAGIC) {
        return Err(Error::Format(format!("header must start with '{MAGIC}'")));
    }
    let (mut dim, mut n, mut lo, mut hi, mut t) = (None, None, None, None, None);
    for part in parts {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("header entry '{part}' is not key=value")))?;
        match key.trim() {
            "dim" => {
                dim = Some(
                    value
                        .trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Format(format!("bad dim '{value}'")))?,
                )
            }
            "n" => n = Some(parse_list::<usize>("n", value)?),
            "lo" => lo = Some(parse_list::<f64>("lo", value)?),
            "hi" => hi = Some(parse_list::<f64>("hi", value)?),
            "t" => {
                t = match value.trim() {
                    "none" => Some(None),
                    s => Some(Some(
                        s.parse::<f64>()
                            .map_err(|_| Error::Format(format!("bad time '{s}'")))?,
                    )),
                }
            }
            other => return Err(Error::Format(format!("unknown header key '{other}'"))),
        }
    }
    let missing = |k: &str| Error::Format(format!("header lacks '{k}'"));
    let dim = dim.ok_or_else(|| missing("dim"))?;
    let n = n.ok_or_else(|| missing("n"))?;
    let lo = lo.ok_or_else(|| missing("lo"))?;
    let hi = hi.ok_or_else(|| missing("hi"))?;
    let t = t.ok_or_else(|| missing("t"))?;
    if n.len() != dim {
        return Err(Error::Format(format!("dim={dim} but n has {} entries", n.len())));
    }
    let grid = Grid::new(&lo, &hi, &n)?;
    let mut values = Vec::with_capacity(grid.len());
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        values.push(
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("line {}: bad value '{s}'", lineno + 2)))?,
        );
    }
    let mut field = ScalarField::from_values(grid, values)?;
    field.set_time(t);
    Ok(field)
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    read_field_from(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = Grid::new(&[-3.0, -3.0], &[3.0, 3.0], &[4, 5]).unwrap();
        let f = ScalarField::constant(g, 0.5).with_time(0.25);
        let mut buf = Vec::new();
        write_field_to(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "dislo-field v1; dim=2; n=4,5; lo=-3.0,-3.0; hi=3.0,3.0; t=0.25"
        );
        assert_eq!(lines.next().unwrap(), "5.0000000000000000e-1");
        assert_eq!(text.lines().count(), 21);
    }

    #[test]
    fn rejects_malformed() {
        assert!(read_field_from("nope\n1\n".as_bytes()).is_err());
        assert!(read_field_from("dislo-field v1; dim=1; n=4; lo=0; hi=1; t=none\n1\n2\n".as_bytes()).is_err());
        assert!(read_field_from("dislo-field v1; dim=1; n=4; lo=0; hi=1\n1\n2\n3\n4\n".as_bytes()).is_err());
        assert!(read_field_from("dislo-field v1; dim=1; n=4; lo=0; hi=1; t=none; q=1\n".as_bytes()).is_err());
        let ok = read_field_from("dislo-field v1; dim=1; n=4; lo=0; hi=1; t=none\n1\n2\n3\n4\n".as_bytes()).unwrap();
        assert_eq!(ok.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(ok.time(), None);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(a in -5.0f64..5.0, b in 0.1f64..4.0, t in 0.0f64..2.0, dim in 1usize..=3) {
            let g = Grid::cube(dim, -1.3, 0.7, 5).unwrap();
            let f = sample(&g, |x| a * x[0].sin() + b * x.iter().sum::<f64>()).unwrap().with_time(t);
            let mut buf = Vec::new();
            write_field_to(&f, &mut buf).unwrap();
            let back = read_field_from(buf.as_slice()).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
