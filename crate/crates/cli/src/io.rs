//! CSV and JSON files. Numbers are written with the shortest representation
//! that parses back to the same `f64`, so every file re-reads exactly.
//! Metadata travels in `# key=value` lines ahead of the CSV header.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use epr_noise::fit::{MeasuredTrace, TraceLabel};
use epr_noise::spectra::{NoiseSpectrum, Spectrogram};
use serde::Serialize;

use crate::error::{CliError, Result};

pub const SPECTRUM_HEADER: &str = "omega_rad_s,S,dB";
pub const TRACE_HEADER: &str = "frequency_hz,noise_db";
pub const MATRIX_CORNER: &str = "omega_rad_s\\zeta_rad";

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Write to `out`, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, contents.as_bytes()),
        None => std::io::stdout()
            .lock()
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::numerics(format!("cannot serialize result: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn metadata_lines(meta: &[(&str, String)]) -> String {
    meta.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
}

pub fn format_spectrum(meta: &[(&str, String)], spectrum: &NoiseSpectrum) -> String {
    let mut s = metadata_lines(meta);
    s.push_str(SPECTRUM_HEADER);
    s.push('\n');
    for (w, (v, db)) in spectrum
        .grid()
        .omegas()
        .iter()
        .zip(spectrum.values().iter().zip(spectrum.db()))
    {
        let _ = writeln!(s, "{w},{v},{db}");
    }
    s
}

pub fn format_matrix(meta: &[(&str, String)], map: &Spectrogram) -> String {
    let mut s = metadata_lines(meta);
    s.push_str(MATRIX_CORNER);
    for z in map.angles() {
        let _ = write!(s, ",{z}");
    }
    s.push('\n');
    for (w, row) in map.grid().omegas().iter().zip(map.values_db()) {
        let _ = write!(s, "{w}");
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// Metadata pairs and the CSV body of a file.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    /// (1-based line number, fields)
    pub rows: Vec<(u64, Vec<String>)>,
}

impl Document {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub fn parse_document(source: &str, text: &str) -> Result<Document> {
    let metadata = text
        .lines()
        .filter_map(|l| l.trim_start().strip_prefix('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::validation(format!("{source}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(CliError::validation(format!(
            "{source}: missing CSV header"
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::validation(format!("{source}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(Document {
        metadata,
        header,
        rows,
    })
}

fn numbers(source: &str, line: u64, fields: &[String], expected: usize) -> Result<Vec<f64>> {
    if fields.len() != expected {
        return Err(CliError::validation(format!(
            "{source}, line {line}: expected {expected} columns, found {}",
            fields.len()
        )));
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>().map_err(|_| {
                CliError::validation(format!("{source}, line {line}: '{f}' is not a number"))
            })
        })
        .collect()
}

/// Rows of (Ω, S, dB) from a spectrum file.
pub fn parse_spectrum(source: &str, text: &str) -> Result<(Document, Vec<[f64; 3]>)> {
    let doc = parse_document(source, text)?;
    if doc.header.join(",") != SPECTRUM_HEADER {
        return Err(CliError::validation(format!(
            "{source}: header must be '{SPECTRUM_HEADER}'"
        )));
    }
    let rows = doc
        .rows
        .iter()
        .map(|(line, f)| numbers(source, *line, f, 3).map(|v| [v[0], v[1], v[2]]))
        .collect::<Result<Vec<_>>>()?;
    Ok((doc, rows))
}

/// A matrix file: (ζ axis, Ω axis, dB cells by row).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub angles: Vec<f64>,
    pub omegas: Vec<f64>,
    pub values_db: Vec<Vec<f64>>,
}

pub fn parse_matrix(source: &str, text: &str) -> Result<(Document, Matrix)> {
    let doc = parse_document(source, text)?;
    if doc.header.first().map(String::as_str) != Some(MATRIX_CORNER) {
        return Err(CliError::validation(format!(
            "{source}: first header cell must be '{MATRIX_CORNER}'"
        )));
    }
    let angles = numbers(source, 1, &doc.header[1..], doc.header.len() - 1)?;
    let mut omegas = Vec::with_capacity(doc.rows.len());
    let mut values_db = Vec::with_capacity(doc.rows.len());
    for (line, fields) in &doc.rows {
        let v = numbers(source, *line, fields, angles.len() + 1)?;
        omegas.push(v[0]);
        values_db.push(v[1..].to_vec());
    }
    Ok((
        doc,
        Matrix {
            angles,
            omegas,
            values_db,
        },
    ))
}

/// A trace file: `# zeta_rad=<ζ>` (required), optional `# weight=<w>`, and
/// either `frequency_hz,noise_db` rows or a spectrum file's
/// `omega_rad_s,S,dB` rows.
pub fn parse_trace(source: &str, text: &str) -> Result<MeasuredTrace> {
    let doc = parse_document(source, text)?;
    let meta_number = |key: &str| -> Result<Option<f64>> {
        doc.meta(key)
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    CliError::validation(format!("{source}: metadata {key}='{v}' is not a number"))
                })
            })
            .transpose()
    };
    let zeta = meta_number("zeta_rad")?.ok_or_else(|| {
        CliError::validation(format!("{source}: missing '# zeta_rad=<value>' line"))
    })?;
    let weight = meta_number("weight")?.unwrap_or(1.0);

    let header = doc.header.join(",");
    let from_spectrum = if header == TRACE_HEADER {
        false
    } else if header == SPECTRUM_HEADER {
        true
    } else {
        return Err(CliError::validation(format!(
            "{source}: header must be '{TRACE_HEADER}' or '{SPECTRUM_HEADER}', found '{header}'"
        )));
    };

    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(doc.rows.len());
    for (line, fields) in &doc.rows {
        let (f_hz, db) = if from_spectrum {
            let v = numbers(source, *line, fields, 3)?;
            (v[0] / std::f64::consts::TAU, v[2])
        } else {
            let v = numbers(source, *line, fields, 2)?;
            (v[0], v[1])
        };
        if !(f_hz.is_finite() && f_hz > 0.0 && db.is_finite()) {
            return Err(CliError::validation(format!(
                "{source}, line {line}: values must be finite with positive frequency"
            )));
        }
        if let Some((prev, _)) = samples.last() {
            if f_hz <= *prev {
                return Err(CliError::validation(format!(
                    "{source}, line {line}: frequency {f_hz} Hz is not above the previous row ({prev} Hz)"
                )));
            }
        }
        samples.push((f_hz, db));
    }
    if samples.is_empty() {
        return Err(CliError::validation(format!("{source}: no data rows")));
    }
    MeasuredTrace::new(source, TraceLabel::Explicit(zeta), samples, weight)
        .map_err(|e| CliError::validation(format!("{source}: {e}")))
}

pub fn format_trace(zeta: f64, samples: &[(f64, f64)]) -> String {
    let mut s = format!("# zeta_rad={zeta}\n{TRACE_HEADER}\n");
    for (f, db) in samples {
        let _ = writeln!(s, "{f},{db}");
    }
    s
}

/// All `*.csv` traces in `dir`, sorted by file name. Every unreadable or
/// malformed file is reported.
pub fn read_trace_dir(dir: &Path) -> Result<Vec<MeasuredTrace>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no trace files (*.csv) found",
            dir.display()
        )));
    }
    let mut traces = Vec::new();
    let mut problems = Vec::new();
    let mut io_failure = None;
    for path in &paths {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        match fs::read_to_string(path) {
            Ok(text) => match parse_trace(&name, &text) {
                Ok(t) => traces.push(t),
                Err(e) => problems.push(e.to_string()),
            },
            Err(e) => {
                problems.push(format!("{}: {e}", path.display()));
                io_failure.get_or_insert((path.clone(), e));
            }
        }
    }
    if problems.is_empty() {
        return Ok(traces);
    }
    if let (1, Some((path, e))) = (problems.len(), io_failure) {
        return Err(CliError::io(&path, e));
    }
    Err(CliError::validation(format!(
        "{} of {} trace files in {} are invalid:\n  {}",
        problems.len(),
        paths.len(),
        dir.display(),
        problems.join("\n  ")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use epr_noise::FrequencyGrid;

    #[test]
    fn spectrum_round_trips_exactly() {
        let grid = FrequencyGrid::logarithmic_hz(1e4, 3e7, 17).unwrap();
        let values: Vec<f64> = (0..17).map(|i| 0.1 + 1.0 / (3.0 + i as f64)).collect();
        let spec = NoiseSpectrum::new(grid.clone(), values.clone()).unwrap();
        let text = format_spectrum(&[("zeta_rad", "0.3".into())], &spec);
        let (doc, rows) = parse_spectrum("s.csv", &text).unwrap();
        assert_eq!(doc.meta("zeta_rad"), Some("0.3"));
        for ((row, w), v) in rows.iter().zip(grid.omegas()).zip(&values) {
            assert_eq!(row[0], *w);
            assert_eq!(row[1], *v);
            assert_eq!(row[2], epr_noise::spectra::to_db(*v));
        }
    }

    #[test]
    fn trace_errors_name_the_row() {
        let text = "# zeta_rad=1.0\nfrequency_hz,noise_db\n10,-1\n20,-2\n15,-3\n";
        let err = parse_trace("bad.csv", text).unwrap_err().to_string();
        assert!(err.contains("bad.csv") && err.contains("line 5"), "{err}");

        let missing = "frequency_hz,noise_db\n10,-1\n";
        assert!(parse_trace("m.csv", missing)
            .unwrap_err()
            .to_string()
            .contains("zeta_rad"));
        let garbled = "# zeta_rad=0\nfrequency_hz,noise_db\n10,abc\n";
        let err = parse_trace("g.csv", garbled).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("abc"), "{err}");
        let header = "# zeta_rad=0\nf,n\n10,1\n";
        assert!(parse_trace("h.csv", header).is_err());
    }

    #[test]
    fn trace_accepts_both_layouts() {
        let a = parse_trace("a.csv", &format_trace(0.5, &[(10.0, -1.5), (20.0, -2.0)])).unwrap();
        assert_eq!(a.samples(), &[(10.0, -1.5), (20.0, -2.0)]);
        assert_eq!(a.label().zeta(), 0.5);
        let tau = std::f64::consts::TAU;
        let text = format!(
            "# zeta_rad=0.5\n# weight=2\n{SPECTRUM_HEADER}\n{},0.5,-3\n",
            tau * 10.0
        );
        let b = parse_trace("b.csv", &text).unwrap();
        assert!((b.samples()[0].0 - 10.0).abs() < 1e-12);
        assert_eq!(b.samples()[0].1, -3.0);
        assert_eq!(b.weight(), 2.0);
    }
}
