//! Text and binary serialization of propagator tables.
//!
//! Both forms share a text header of `key=value` lines. The text form then
//! lists, per index, an `alpha <index>` line followed by `K` lines of `K`
//! values in `%.16e` (17 significant digits). The binary form ends the header
//! with a `binary` line and stores each block as a little-endian `u32` byte
//! count, the index text, and `K*K` little-endian `f64` values.

use std::io::{BufRead, Read, Write};

use super::PropagatorTable;
use crate::error::{Error, Result};
use crate::hermite_space::SpatialBasis;
use crate::linalg::Matrix;
use crate::multiindex::MultiIndex;
use crate::scalar::Real;

const VERSION: &str = "1";

fn write_header<T: Real>(table: &PropagatorTable<T>, out: &mut impl Write) -> Result<()> {
    let basis = table.basis();
    writeln!(out, "version={VERSION}")?;
    writeln!(out, "K={}", table.size())?;
    writeln!(out, "r={}", table.channels())?;
    writeln!(out, "delta={:.16e}", table.delta().as_f64())?;
    writeln!(out, "N={}", table.max_length())?;
    writeln!(out, "n={}", table.max_order())?;
    writeln!(out, "substeps={}", table.substeps())?;
    writeln!(out, "d={}", basis.dim())?;
    let gammas: Vec<String> =
        basis.gammas().iter().map(|g| g.iter().map(u32::to_string).collect::<Vec<_>>().join(",")).collect();
    writeln!(out, "gammas={}", gammas.join(" "))?;
    let lambdas: Vec<String> = basis.lambdas().iter().map(|l| format!("{}", l.as_f64())).collect();
    writeln!(out, "lambdas={}", lambdas.join(" "))?;
    writeln!(out, "indices={}", table.indices().len())?;
    Ok(())
}

impl<T: Real> PropagatorTable<T> {
    pub fn write_text(&self, out: &mut impl Write) -> Result<()> {
        write_header(self, out)?;
        for (alpha, m) in self.indices().iter().zip(self.blocks()) {
            writeln!(out, "alpha {alpha}")?;
            for i in 0..m.rows() {
                let row: Vec<String> = m.row(i).iter().map(|v| format!("{:.16e}", v.as_f64())).collect();
                writeln!(out, "{}", row.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn write_binary(&self, out: &mut impl Write) -> Result<()> {
        write_header(self, out)?;
        writeln!(out, "binary")?;
        for (alpha, m) in self.indices().iter().zip(self.blocks()) {
            let text = alpha.to_string();
            out.write_all(&(text.len() as u32).to_le_bytes())?;
            out.write_all(text.as_bytes())?;
            for v in m.as_slice() {
                out.write_all(&v.as_f64().to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads either form, detected from the header.
    pub fn read(input: impl Read) -> Result<Self> {
        let mut reader = std::io::BufReader::new(input);
        let mut header = Header::default();
        let mut line_no = 0;
        let mut line = String::new();
        let binary = loop {
            line.clear();
            line_no += 1;
            if reader.read_line(&mut line)? == 0 {
                return Err(parse_err(line_no, "unexpected end of table header"));
            }
            let text = line.trim_end();
            if text == "binary" {
                break true;
            }
            if let Some(rest) = text.strip_prefix("alpha ") {
                header.pending_alpha = Some(rest.to_string());
                break false;
            }
            header.set(text, line_no)?;
            if header.indices == Some(0) {
                break false;
            }
        };
        let h = header.finish(line_no)?;
        let k = h.k;
        let mut indices = Vec::with_capacity(h.count);
        let mut blocks = Vec::with_capacity(h.count);
        if binary {
            for _ in 0..h.count {
                let mut len = [0u8; 4];
                reader.read_exact(&mut len)?;
                let mut text = vec![0u8; u32::from_le_bytes(len) as usize];
                reader.read_exact(&mut text)?;
                let text = String::from_utf8(text).map_err(|_| parse_err(0, "index text is not UTF-8"))?;
                indices.push(MultiIndex::parse(h.r, &text)?);
                let mut data = Vec::with_capacity(k * k);
                let mut buf = [0u8; 8];
                for _ in 0..k * k {
                    reader.read_exact(&mut buf)?;
                    data.push(T::lit(f64::from_le_bytes(buf)));
                }
                blocks.push(Matrix::from_row_major(k, k, data)?);
            }
        } else {
            let mut pending = header.pending_alpha.take();
            for _ in 0..h.count {
                let alpha_text = match pending.take() {
                    Some(t) => t,
                    None => {
                        line.clear();
                        line_no += 1;
                        reader.read_line(&mut line)?;
                        line.trim_end()
                            .strip_prefix("alpha ")
                            .ok_or_else(|| parse_err(line_no, "expected `alpha <index>`"))?
                            .to_string()
                    }
                };
                indices.push(MultiIndex::parse(h.r, &alpha_text).map_err(|e| parse_err(line_no, &e.to_string()))?);
                let mut data = Vec::with_capacity(k * k);
                for _ in 0..k {
                    line.clear();
                    line_no += 1;
                    reader.read_line(&mut line)?;
                    let row: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
                    let row = row.map_err(|_| parse_err(line_no, "bad matrix entry"))?;
                    if row.len() != k {
                        return Err(parse_err(line_no, &format!("expected {k} entries, found {}", row.len())));
                    }
                    data.extend(row.into_iter().map(T::lit));
                }
                blocks.push(Matrix::from_row_major(k, k, data)?);
            }
        }
        let basis = SpatialBasis::from_parts(h.d, h.gammas)?;
        PropagatorTable::from_parts(basis, h.r, T::lit(h.delta), h.max_length, h.max_order, h.substeps, indices, blocks)
    }
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse { line, message: message.to_string() }
}

#[derive(Default)]
struct Header {
    version: Option<String>,
    k: Option<usize>,
    r: Option<u32>,
    delta: Option<f64>,
    max_length: Option<u32>,
    max_order: Option<u32>,
    substeps: Option<usize>,
    d: Option<usize>,
    gammas: Option<Vec<Vec<u32>>>,
    indices: Option<usize>,
    pending_alpha: Option<String>,
}

struct ParsedHeader {
    k: usize,
    r: u32,
    delta: f64,
    max_length: u32,
    max_order: u32,
    substeps: usize,
    d: usize,
    gammas: Vec<Vec<u32>>,
    count: usize,
}

impl Header {
    fn set(&mut self, text: &str, line: usize) -> Result<()> {
        let (key, value) = text.split_once('=').ok_or_else(|| parse_err(line, "expected key=value"))?;
        fn num<V: std::str::FromStr>(v: &str, line: usize, key: &str) -> Result<V> {
            v.trim().parse().map_err(|_| parse_err(line, &format!("bad value for {key}")))
        }
        match key.trim() {
            "version" => self.version = Some(value.trim().to_string()),
            "K" => self.k = Some(num(value, line, key)?),
            "r" => self.r = Some(num(value, line, key)?),
            "delta" => self.delta = Some(num(value, line, key)?),
            "N" => self.max_length = Some(num(value, line, key)?),
            "n" => self.max_order = Some(num(value, line, key)?),
            "substeps" => self.substeps = Some(num(value, line, key)?),
            "d" => self.d = Some(num(value, line, key)?),
            "gammas" => {
                let g: Result<Vec<Vec<u32>>> = value
                    .split_whitespace()
                    .map(|t| t.split(',').map(|c| num(c, line, key)).collect())
                    .collect();
                self.gammas = Some(g?);
            }
            "lambdas" => {}
            "indices" => self.indices = Some(num(value, line, key)?),
            other => return Err(parse_err(line, &format!("unknown header key `{other}`"))),
        }
        Ok(())
    }

    fn finish(&self, line: usize) -> Result<ParsedHeader> {
        let missing = |name: &str| parse_err(line, &format!("table header lacks `{name}`"));
        match self.version.as_deref() {
            Some(VERSION) => {}
            Some(v) => return Err(parse_err(line, &format!("unsupported table version {v}"))),
            None => return Err(missing("version")),
        }
        let k = self.k.ok_or_else(|| missing("K"))?;
        let gammas = self.gammas.clone().ok_or_else(|| missing("gammas"))?;
        if gammas.len() != k {
            return Err(parse_err(line, "gammas count differs from K"));
        }
        Ok(ParsedHeader {
            k,
            r: self.r.ok_or_else(|| missing("r"))?,
            delta: self.delta.ok_or_else(|| missing("delta"))?,
            max_length: self.max_length.ok_or_else(|| missing("N"))?,
            max_order: self.max_order.ok_or_else(|| missing("n"))?,
            substeps: self.substeps.ok_or_else(|| missing("substeps"))?,
            d: self.d.ok_or_else(|| missing("d"))?,
            gammas,
            count: self.indices.ok_or_else(|| missing("indices"))?,
        })
    }
}
