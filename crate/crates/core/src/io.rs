//! File formats.
//!
//! * Instances are JSON documents with the squeezing list and the real and
//!   imaginary parts of `T` as separate row-major matrices.
//! * Sample files start with one `#` line holding the metadata as JSON,
//!   followed by one line per sample of `'0'`/`'1'` characters, mode 0 first.
//! * Metric reports are written as JSON, or as CSV with a full JSON twin.
//!
//! Reals are written in shortest round-trip form, so save then load is
//! lossless.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gaussian_state::GbsInstance;
use crate::samplers::{SampleMetadata, SampleSet};
use crate::statistics::MetricReport;

pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub n_output: usize,
    pub n_input: usize,
    pub squeezing: Vec<f64>,
    pub transformation_real: Vec<Vec<f64>>,
    pub transformation_imag: Vec<Vec<f64>>,
}

impl From<&GbsInstance> for InstanceFile {
    fn from(instance: &GbsInstance) -> Self {
        let t = instance.transformation();
        let rows = |f: fn(&Complex64) -> f64| (0..t.nrows()).map(|i| (0..t.ncols()).map(|j| f(&t[(i, j)])).collect()).collect();
        Self {
            schema_version: INSTANCE_SCHEMA_VERSION,
            n_output: instance.n_output(),
            n_input: instance.n_input(),
            squeezing: instance.squeezing().to_vec(),
            transformation_real: rows(|z| z.re),
            transformation_imag: rows(|z| z.im),
        }
    }
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<GbsInstance> {
        if self.schema_version != INSTANCE_SCHEMA_VERSION {
            return Err(Error::Parse {
                line: 0,
                message: format!("unsupported schema_version {}", self.schema_version),
            });
        }
        let (n, k) = (self.n_output, self.n_input);
        for (name, m) in [("transformation_real", &self.transformation_real), ("transformation_imag", &self.transformation_imag)] {
            if m.len() != n {
                return Err(Error::Dimension(format!("{name} has {} rows, n_output is {n}", m.len())));
            }
            if let Some((i, row)) = m.iter().enumerate().find(|(_, r)| r.len() != k) {
                return Err(Error::Dimension(format!("{name} row {i} has {} entries, n_input is {k}", row.len())));
            }
        }
        let t = DMatrix::from_fn(n, k, |i, j| Complex64::new(self.transformation_real[i][j], self.transformation_imag[i][j]));
        GbsInstance::new(self.squeezing, t)
    }
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        message: e.to_string(),
    }
}

pub fn read_instance<R: Read>(reader: R) -> Result<GbsInstance> {
    let file: InstanceFile = serde_json::from_reader(reader).map_err(json_error)?;
    file.into_instance()
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<GbsInstance> {
    read_instance(BufReader::new(File::open(path)?))
}

pub fn write_instance<W: Write>(instance: &GbsInstance, writer: W) -> Result<()> {
    let mut writer = writer;
    serde_json::to_writer_pretty(&mut writer, &InstanceFile::from(instance))?;
    writeln!(writer)?;
    Ok(())
}

pub fn save_instance(instance: &GbsInstance, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_instance(instance, &mut w)?;
    w.flush()?;
    Ok(())
}

/// SHA-256 of the canonical compact JSON form, in hex.
pub fn instance_digest(instance: &GbsInstance) -> String {
    let json = serde_json::to_vec(&InstanceFile::from(instance)).expect("instance serialises");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

/// The JSON object on a sample file's `#` line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleHeader {
    pub n_modes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(flatten)]
    pub metadata: SampleMetadata,
}

/// Line-by-line reader; memory use does not grow with the file length.
pub struct SampleReader<R> {
    lines: std::io::Lines<R>,
    header: SampleHeader,
    line: usize,
    read: usize,
    pending: Option<String>,
}

impl SampleReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: BufRead> SampleReader<R> {
    /// Reads the header. Without a `#` line the width is taken from the first
    /// sample.
    pub fn new(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let first = lines.next().transpose()?.ok_or(Error::Parse {
            line: 1,
            message: "empty sample file".into(),
        })?;
        let (header, pending) = match first.strip_prefix('#') {
            Some(json) => {
                let header: SampleHeader = serde_json::from_str(json.trim()).map_err(|e| Error::Parse {
                    line: 1,
                    message: format!("header: {e}"),
                })?;
                (header, None)
            }
            None => (
                SampleHeader {
                    n_modes: first.len(),
                    samples: None,
                    metadata: SampleMetadata::default(),
                },
                Some(first),
            ),
        };
        Ok(Self {
            lines,
            line: if pending.is_some() { 0 } else { 1 },
            header,
            read: 0,
            pending,
        })
    }

    pub fn header(&self) -> &SampleHeader {
        &self.header
    }

    /// Parses the next sample into `bits`. Returns `false` at end of file.
    pub fn next_into(&mut self, bits: &mut Vec<u8>) -> Result<bool> {
        let text = match self.pending.take() {
            Some(t) => t,
            None => match self.lines.next().transpose()? {
                Some(t) => t,
                None => {
                    if let Some(declared) = self.header.samples {
                        if declared != self.read {
                            return Err(Error::Parse {
                                line: self.line,
                                message: format!("header declares {declared} samples, file has {}", self.read),
                            });
                        }
                    }
                    return Ok(false);
                }
            },
        };
        self.line += 1;
        if text.len() != self.header.n_modes {
            return Err(Error::Parse {
                line: self.line,
                message: format!("expected {} characters, found {}", self.header.n_modes, text.len()),
            });
        }
        bits.clear();
        for (col, c) in text.bytes().enumerate() {
            match c {
                b'0' => bits.push(0),
                b'1' => bits.push(1),
                _ => {
                    return Err(Error::Parse {
                        line: self.line,
                        message: format!("invalid character {:?} in column {}", c as char, col + 1),
                    })
                }
            }
        }
        self.read += 1;
        Ok(true)
    }
}

impl<R: BufRead> Iterator for SampleReader<R> {
    type Item = Result<Vec<u8>>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut bits = Vec::with_capacity(self.header.n_modes);
        match self.next_into(&mut bits) {
            Ok(true) => Some(Ok(bits)),
            Ok(false) => None,
            Err(e) => Some(Err(e)),
        }
    }
}

pub fn read_samples<R: BufRead>(reader: R) -> Result<SampleSet> {
    let mut reader = SampleReader::new(reader)?;
    let header = reader.header().clone();
    let mut set = SampleSet::with_capacity(header.n_modes, header.samples.unwrap_or(0)).with_metadata(header.metadata);
    let mut bits = Vec::new();
    while reader.next_into(&mut bits)? {
        set.push_bytes(&bits)?;
    }
    if set.is_empty() {
        return Err(Error::Parse {
            line: reader.line,
            message: "no samples".into(),
        });
    }
    Ok(set)
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<SampleSet> {
    read_samples(BufReader::new(File::open(path)?))
}

pub fn write_samples<W: Write>(set: &SampleSet, writer: W) -> Result<()> {
    let mut writer = writer;
    let header = SampleHeader {
        n_modes: set.n_modes(),
        samples: Some(set.len()),
        metadata: set.metadata.clone(),
    };
    writeln!(writer, "# {}", serde_json::to_string(&header)?)?;
    let mut line = Vec::with_capacity(set.n_modes() + 1);
    for row in set.rows() {
        line.clear();
        line.extend((0..set.n_modes()).map(|m| if row.get(m) { b'1' } else { b'0' }));
        line.push(b'\n');
        writer.write_all(&line)?;
    }
    Ok(())
}

pub fn save_samples(set: &SampleSet, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_samples(set, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Serialize)]
struct CsvValue<'a> {
    metric: &'a str,
    subset_size: usize,
    modes: String,
    value: f64,
    ideal: Option<f64>,
    reference: Option<f64>,
}

#[derive(Serialize)]
struct CsvEntry<'a> {
    kind: &'a str,
    key: &'a str,
    index: Option<usize>,
    value: f64,
}

/// Path of the JSON file written next to a CSV report.
pub fn json_twin(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

/// JSON writes the whole report. CSV writes one row per subset value (modes
/// space separated), or for reports without per-subset values one row per
/// scalar and series point; the full report also goes to [`json_twin`].
pub fn save_report(report: &MetricReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let write_json = |p: &Path| -> Result<()> {
        let mut w = BufWriter::new(File::create(p)?);
        serde_json::to_writer_pretty(&mut w, report)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    };
    match format {
        ReportFormat::Json => write_json(path),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            if report.values.is_empty() {
                for (key, value) in &report.scalars {
                    w.serialize(CsvEntry {
                        kind: "scalar",
                        key,
                        index: None,
                        value: *value,
                    })?;
                }
                for (key, series) in &report.series {
                    for (i, value) in series.iter().enumerate() {
                        w.serialize(CsvEntry {
                            kind: "series",
                            key,
                            index: Some(i),
                            value: *value,
                        })?;
                    }
                }
            } else {
                for v in &report.values {
                    w.serialize(CsvValue {
                        metric: &report.metric,
                        subset_size: v.modes.len(),
                        modes: v.modes.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
                        value: v.value,
                        ideal: v.ideal,
                        reference: v.reference,
                    })?;
                }
            }
            w.flush()?;
            write_json(&json_twin(path))
        }
    }
}

pub fn load_report(path: impl AsRef<Path>) -> Result<MetricReport> {
    serde_json::from_reader(BufReader::new(File::open(path)?)).map_err(json_error)
}

/// Options for [`import_ustc`].
#[derive(Debug, Clone, Default)]
pub struct UstcImport {
    pub real: PathBuf,
    /// Missing means a real transformation matrix.
    pub imag: Option<PathBuf>,
    pub squeezing: PathBuf,
    /// Files store `T` with inputs as rows.
    pub transpose: bool,
}

/// Reads a whitespace or comma separated numeric matrix; blank lines and
/// lines starting with `#` or `%` are skipped.
pub fn read_text_matrix<R: BufRead>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with('%') {
            continue;
        }
        let row = t
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    message: format!("{s:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("{} columns, previous rows have {first}", row.len()),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn read_matrix_file(path: &Path, transpose: bool) -> Result<Vec<Vec<f64>>> {
    let m = read_text_matrix(BufReader::new(File::open(path)?))?;
    if !transpose || m.is_empty() {
        return Ok(m);
    }
    Ok((0..m[0].len()).map(|j| m.iter().map(|r| r[j]).collect()).collect())
}

/// Builds an instance from plain-text matrix and squeezing files. The layout
/// of published archives varies, so the result should be checked against
/// known mean click numbers before use.
pub fn import_ustc(options: &UstcImport) -> Result<GbsInstance> {
    let real = read_matrix_file(&options.real, options.transpose)?;
    let imag = match &options.imag {
        Some(p) => read_matrix_file(p, options.transpose)?,
        None => real.iter().map(|r| vec![0.0; r.len()]).collect(),
    };
    let squeezing: Vec<f64> = read_text_matrix(BufReader::new(File::open(&options.squeezing)?))?.into_iter().flatten().collect();
    let n = real.len();
    let k = real.first().map_or(0, Vec::len);
    InstanceFile {
        schema_version: INSTANCE_SCHEMA_VERSION,
        n_output: n,
        n_input: k,
        squeezing,
        transformation_real: real,
        transformation_imag: imag,
    }
    .into_instance()
}
