//! CSV and text outputs. Numbers use the shortest exact decimal form so files
//! re-read to identical values and repeat byte for byte.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use plnet_core::time_domain::{Peak, TimeTrace};
use plnet_core::MatrixSpectrum;

pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Writes files into one directory, optionally stamping a `#` comment header.
#[derive(Debug, Clone)]
pub struct OutputDir {
    dir: PathBuf,
    stamp: Option<String>,
}

impl OutputDir {
    pub fn new(dir: &Path, timestamp: bool) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let stamp = timestamp.then(|| {
            format!(
                "# plnet {} generated {}\n",
                env!("CARGO_PKG_VERSION"),
                chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
            )
        });
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            stamp,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_table(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> io::Result<PathBuf> {
        let mut buf = Vec::new();
        if let Some(s) = &self.stamp {
            buf.extend_from_slice(s.as_bytes());
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        let p = self.path(name);
        fs::write(&p, buf)?;
        Ok(p)
    }

    pub fn write_spectrum(&self, name: &str, spec: &MatrixSpectrum<f64>) -> io::Result<PathBuf> {
        self.write_table(name, &SPECTRUM_HEADER, &spectrum_rows(spec))
    }

    pub fn write_trace(&self, name: &str, trace: &TimeTrace<f64>) -> io::Result<PathBuf> {
        let n = trace.n_conductors();
        let mut rows = Vec::with_capacity(trace.len() * n * n);
        for (i, m) in trace.samples().iter().enumerate() {
            let t = num(trace.time(i));
            for r in 0..n {
                for c in 0..n {
                    rows.push(vec![t.clone(), r.to_string(), c.to_string(), num(m[(r, c)]), num(0.0)]);
                }
            }
        }
        self.write_table(name, &SPECTRUM_HEADER, &rows)
    }

    pub fn write_peaks(&self, name: &str, peaks: &[PeakRow]) -> io::Result<PathBuf> {
        let rows: Vec<Vec<String>> = peaks
            .iter()
            .map(|p| vec![num(p.time), num(p.distance), num(p.amplitude), format!("{}:{}", p.entry.0, p.entry.1)])
            .collect();
        self.write_table(name, &PEAKS_HEADER, &rows)
    }

    pub fn write_text(&self, name: &str, text: &str) -> io::Result<PathBuf> {
        let p = self.path(name);
        let mut s = self.stamp.clone().unwrap_or_default();
        s.push_str(text);
        fs::write(&p, s)?;
        Ok(p)
    }
}

pub const SPECTRUM_HEADER: [&str; 5] = ["f_or_t", "entry_row", "entry_col", "re", "im"];
pub const PEAKS_HEADER: [&str; 4] = ["time_s", "distance_m", "amplitude", "entry"];

fn spectrum_rows(spec: &MatrixSpectrum<f64>) -> Vec<Vec<String>> {
    let n = spec.n_conductors();
    let mut rows = Vec::with_capacity(spec.values().len() * n * n);
    for (f, m) in spec.iter() {
        let f = num(f);
        for r in 0..n {
            for c in 0..n {
                let z = m[(r, c)];
                rows.push(vec![f.clone(), r.to_string(), c.to_string(), num(z.re), num(z.im)]);
            }
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakRow {
    pub time: f64,
    pub distance: f64,
    pub amplitude: f64,
    pub entry: (usize, usize),
}

impl PeakRow {
    pub fn new(p: &Peak<f64>, distance: f64, entry: (usize, usize)) -> Self {
        PeakRow {
            time: p.time,
            distance,
            amplitude: p.amplitude,
            entry,
        }
    }
}

/// One row of a spectrum or trace file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    pub f_or_t: f64,
    pub row: usize,
    pub col: usize,
    pub re: f64,
    pub im: f64,
}

/// Reads a spectrum or trace file back, skipping `#` comment lines.
pub fn read_spectrum_csv(text: &str) -> Result<Vec<SpectrumRow>, String> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    if header != SPECTRUM_HEADER {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = rec.position().map_or(i + 2, |p| p.line() as usize);
        let f = |k: usize| -> Result<f64, String> {
            rec.get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| format!("line {line}: column {} is not a number", SPECTRUM_HEADER[k]))
        };
        let u = |k: usize| -> Result<usize, String> {
            rec.get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| format!("line {line}: column {} is not an index", SPECTRUM_HEADER[k]))
        };
        out.push(SpectrumRow {
            f_or_t: f(0)?,
            row: u(1)?,
            col: u(2)?,
            re: f(3)?,
            im: f(4)?,
        });
    }
    Ok(out)
}
