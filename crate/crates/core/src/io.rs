//! Trajectory files, analysis tables and run manifests.
//!
//! Trajectories are stored either as CSV (comment header, then one row per
//! sample) or as a little-endian binary file:
//!
//! ```text
//! "OMTRAJ01" | n: u64 | rows: u64 | hash_len: u32 | hash bytes
//!            | has_seed: u8 | seed: u64 | rows × (1 + 4n + 4) f64
//! ```
//!
//! Each row holds t, x (2n), v (2n), Re α₀, Im α₀, Re α₁, Im α₁ in SI units.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{OrderParameterSeries, PhaseSeries, SpectrumResult};
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::model::FullState;

pub const BINARY_MAGIC: &[u8; 8] = b"OMTRAJ01";

fn row_width(n: usize) -> usize {
    1 + 4 * n + 4
}

fn column_names(n: usize) -> Vec<String> {
    let mut c = vec!["t".to_string()];
    for pre in ["x", "v"] {
        for s in 1..=2 {
            for i in 1..=n {
                c.push(format!("{pre}_{s}_{i}"));
            }
        }
    }
    for s in 1..=2 {
        c.push(format!("re_alpha_{s}"));
        c.push(format!("im_alpha_{s}"));
    }
    c
}

/// Write a trajectory as CSV. Floats use the shortest representation that
/// reads back to the same bits.
pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory) -> Result<()> {
    let n = traj.n_per_array();
    writeln!(w, "# omchimera trajectory")?;
    writeln!(w, "# n_per_array = {n}")?;
    writeln!(w, "# config_hash = {}", traj.config_hash)?;
    match traj.rng_seed {
        Some(s) => writeln!(w, "# rng_seed = {s}")?,
        None => writeln!(w, "# rng_seed = none")?,
    }
    writeln!(w, "# rows = {}", traj.len())?;
    writeln!(w, "# units: t s, x m, v m/s, alpha sqrt(photons)")?;
    writeln!(w, "{}", column_names(n).join(","))?;
    let mut line = String::new();
    for (t, s) in traj.times.iter().zip(&traj.states) {
        line.clear();
        use std::fmt::Write as _;
        write!(line, "{t:e}").unwrap();
        for v in s.x.iter().chain(&s.v) {
            write!(line, ",{v:e}").unwrap();
        }
        for a in s.alpha {
            write!(line, ",{:e},{:e}", a.re, a.im).unwrap();
        }
        writeln!(w, "{line}")?;
    }
    writeln!(w, "# end")?;
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn state_from_row(n: usize, row: &[f64]) -> FullState {
    let nn = 2 * n;
    FullState {
        n,
        x: row[1..1 + nn].to_vec(),
        v: row[1 + nn..1 + 2 * nn].to_vec(),
        alpha: [
            Complex64::new(row[1 + 2 * nn], row[2 + 2 * nn]),
            Complex64::new(row[3 + 2 * nn], row[4 + 2 * nn]),
        ],
    }
}

/// Read a CSV trajectory written by [`write_trajectory_csv`].
pub fn read_trajectory_csv<R: Read>(r: R) -> Result<Trajectory> {
    let reader = BufReader::new(r);
    let mut n: Option<usize> = None;
    let mut hash = String::new();
    let mut seed = None;
    let mut declared_rows: Option<usize> = None;
    let mut ended = false;
    let mut last_line = 0;
    let mut header_seen = false;
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut row = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
        let line = line.trim();
        last_line = lineno;
        if line.is_empty() {
            continue;
        }
        if ended {
            return Err(parse_err(lineno, "content after the end marker"));
        }
        if line == "# end" {
            ended = true;
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some((key, val)) = c.split_once('=') {
                let val = val.trim();
                match key.trim() {
                    "n_per_array" => {
                        n = Some(val.parse().map_err(|_| parse_err(lineno, format!("bad n_per_array '{val}'")))?)
                    }
                    "config_hash" => hash = val.to_string(),
                    "rows" => {
                        declared_rows =
                            Some(val.parse().map_err(|_| parse_err(lineno, format!("bad rows count '{val}'")))?)
                    }
                    "rng_seed" if val != "none" => {
                        seed = Some(val.parse().map_err(|_| parse_err(lineno, format!("bad rng_seed '{val}'")))?)
                    }
                    _ => {}
                }
            }
            continue;
        }
        let n = n.ok_or_else(|| parse_err(lineno, "missing '# n_per_array' header"))?;
        if !header_seen {
            let expected = column_names(n).join(",");
            if line != expected {
                return Err(parse_err(lineno, "column header does not match n_per_array"));
            }
            header_seen = true;
            continue;
        }
        row.clear();
        for (c, field) in line.split(',').enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("column {}: '{field}' is not a number", c + 1)))?;
            row.push(v);
        }
        if row.len() != row_width(n) {
            return Err(parse_err(
                lineno,
                format!("expected {} columns, found {}", row_width(n), row.len()),
            ));
        }
        times.push(row[0]);
        states.push(state_from_row(n, &row));
    }
    if !header_seen {
        return Err(parse_err(last_line, "no column header found"));
    }
    if let Some(rows) = declared_rows {
        if !ended || rows != times.len() {
            return Err(parse_err(
                last_line,
                format!("truncated: header declares {rows} rows, found {} before end of input", times.len()),
            ));
        }
    }
    Ok(Trajectory {
        times,
        states,
        config_hash: hash,
        rng_seed: seed,
    })
}

pub fn write_trajectory_binary<W: Write>(mut w: W, traj: &Trajectory) -> Result<()> {
    let n = traj.n_per_array();
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&(traj.len() as u64).to_le_bytes())?;
    w.write_all(&(traj.config_hash.len() as u32).to_le_bytes())?;
    w.write_all(traj.config_hash.as_bytes())?;
    w.write_all(&[traj.rng_seed.is_some() as u8])?;
    w.write_all(&traj.rng_seed.unwrap_or(0).to_le_bytes())?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        w.write_all(&t.to_le_bytes())?;
        for v in s.x.iter().chain(&s.v) {
            w.write_all(&v.to_le_bytes())?;
        }
        for a in s.alpha {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + k > self.buf.len() {
            return Err(Error::Corrupt {
                offset: self.pos as u64,
                msg: format!("file ends inside {what} ({} bytes left, {k} needed)", self.buf.len() - self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn read_trajectory_binary(bytes: &[u8]) -> Result<Trajectory> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(8, "magic")? != BINARY_MAGIC {
        return Err(Error::Corrupt { offset: 0, msg: "not a trajectory file (bad magic)".into() });
    }
    let n = c.u64("header")? as usize;
    let rows = c.u64("header")? as usize;
    let hash_len = u32::from_le_bytes(c.take(4, "header")?.try_into().unwrap()) as usize;
    let hash_at = c.pos as u64;
    let hash = String::from_utf8(c.take(hash_len, "config hash")?.to_vec())
        .map_err(|_| Error::Corrupt { offset: hash_at, msg: "config hash is not UTF-8".into() })?;
    let has_seed = c.take(1, "header")?[0] != 0;
    let seed = c.u64("header")?;
    let width = row_width(n);
    let mut times = Vec::with_capacity(rows);
    let mut states = Vec::with_capacity(rows);
    let mut row = vec![0.0; width];
    for _ in 0..rows {
        let raw = c.take(8 * width, "sample row")?;
        for (v, b) in row.iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(b.try_into().unwrap());
        }
        times.push(row[0]);
        states.push(state_from_row(n, &row));
    }
    if c.pos != bytes.len() {
        return Err(Error::Corrupt {
            offset: c.pos as u64,
            msg: format!("{} trailing bytes after the last row", bytes.len() - c.pos),
        });
    }
    Ok(Trajectory {
        times,
        states,
        config_hash: hash,
        rng_seed: has_seed.then_some(seed),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryFormat {
    Csv,
    Binary,
}

impl TrajectoryFormat {
    /// `.bin` selects the binary format, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => Self::Binary,
            _ => Self::Csv,
        }
    }
}

pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    match TrajectoryFormat::from_path(path) {
        TrajectoryFormat::Csv => write_trajectory_csv(f, traj),
        TrajectoryFormat::Binary => write_trajectory_binary(f, traj),
    }
}

/// Load a trajectory, detecting the format from the leading bytes.
pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        read_trajectory_binary(&bytes)
    } else {
        read_trajectory_csv(bytes.as_slice())
    }
}

/// t, ρ₁, ρ₂, Ψ₁, Ψ₂.
pub fn write_order_csv<W: Write>(mut w: W, s: &OrderParameterSeries) -> Result<()> {
    writeln!(w, "t,rho_1,rho_2,psi_1,psi_2")?;
    for r in 0..s.len() {
        writeln!(
            w,
            "{:e},{:.9},{:.9},{:.9},{:.9}",
            s.times[r], s.rho[0][r], s.rho[1][r], s.psi[0][r], s.psi[1][r]
        )?;
    }
    Ok(())
}

/// t followed by one unwrapped phase column per oscillator.
pub fn write_phases_csv<W: Write>(mut w: W, p: &PhaseSeries) -> Result<()> {
    let n = p.phases.len() / 2;
    let mut head = vec!["t".to_string()];
    for s in 1..=2 {
        for i in 1..=n {
            head.push(format!("phi_{s}_{i}"));
        }
    }
    writeln!(w, "{}", head.join(","))?;
    for r in 0..p.times.len() {
        write!(w, "{:e}", p.times[r])?;
        for ph in &p.phases {
            write!(w, ",{:.9}", ph[r])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Angular frequency followed by one density column per signal.
pub fn write_psd_csv<W: Write>(mut w: W, s: &SpectrumResult, labels: &[String]) -> Result<()> {
    write!(w, "omega")?;
    for l in labels {
        write!(w, ",S_{l}")?;
    }
    writeln!(w)?;
    for (k, f) in s.frequencies.iter().enumerate() {
        write!(w, "{f:e}")?;
        for d in &s.density {
            write!(w, ",{:e}", d[k])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub rng: String,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub realizations: Vec<u64>,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default)]
    pub checksum: Option<String>,
    /// Full configuration used by the run.
    pub config: toml::Value,
}

impl Manifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        let n = 1;
        let mk = |k: f64| FullState {
            n,
            x: vec![k, -k],
            v: vec![0.5 * k, 1e-300],
            alpha: [Complex64::new(k, 0.1), Complex64::new(-0.2, k / 3.0)],
        };
        Trajectory {
            times: vec![0.0, 1e-9, 2e-9],
            states: vec![mk(0.1), mk(0.2), mk(1.0 / 3.0)],
            config_hash: "abc".into(),
            rng_seed: Some(42),
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = sample();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &t).unwrap();
        assert_eq!(read_trajectory_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let t = sample();
        let mut buf = Vec::new();
        write_trajectory_binary(&mut buf, &t).unwrap();
        assert_eq!(read_trajectory_binary(&buf).unwrap(), t);
    }

    #[test]
    fn truncated_inputs_report_position() {
        let t = sample();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut = &text[..text.len() - 20];
        match read_trajectory_csv(cut.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 10),
            other => panic!("unexpected {other:?}"),
        }
        let mut bin = Vec::new();
        write_trajectory_binary(&mut bin, &t).unwrap();
        bin.truncate(bin.len() - 3);
        assert!(matches!(read_trajectory_binary(&bin), Err(Error::Corrupt { .. })));
    }
}
