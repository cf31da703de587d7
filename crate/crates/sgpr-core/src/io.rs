//! File formats.
//!
//! The binary SGPR container holds datasets and (in a label-free flavor with
//! a provenance block) dictionaries:
//!
//! ```text
//! magic  b"SGPR"
//! version u16 LE (currently 1)
//! m       u32 LE   samples per profile
//! l       u32 LE   columns
//! classes u16 LE   class count (0 = dictionary flavor)
//! names   per class: u16 LE length + UTF-8 bytes
//! [dictionary flavor only] u32 LE length + provenance JSON
//! data    m·l f64 LE, column-major
//! [dataset flavor only] labels l × u16 LE
//! ```
//!
//! Everything else is plain CSV with full round-trip float formatting, plus
//! a binary P5 graymap for classification maps. Every writer here has a
//! matching reader.

use crate::classify::{ClassMap, ClassifierModel, ConfusionMatrix, HaloSpec};
use crate::dictionary_learning::{Dictionary, ProbeRow, Provenance};
use crate::error::{Error, Result};
use crate::evaluation::MetricReport;
use crate::signal_model::LabeledDataset;
use crate::sparse_coding::{SparseCode, SparseCodeMatrix};
use ndarray::{Array1, Array2};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

const MAGIC: &[u8; 4] = b"SGPR";
const VERSION: u16 = 1;

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    f.write_all(bytes).map_err(|e| Error::file(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf).map_err(|e| Error::file(path, e))?;
    Ok(buf)
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_file(path)?).map_err(|_| Error::format(path, "not valid UTF-8"))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::format(self.path, "unexpected end of file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn encode_header(m: usize, l: usize, class_names: &[String]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&u32::try_from(m).map_err(|_| Error::param("M too large"))?.to_le_bytes());
    out.extend_from_slice(&u32::try_from(l).map_err(|_| Error::param("L too large"))?.to_le_bytes());
    let classes = u16::try_from(class_names.len()).map_err(|_| Error::param("too many classes"))?;
    out.extend_from_slice(&classes.to_le_bytes());
    for name in class_names {
        let bytes = name.as_bytes();
        let len = u16::try_from(bytes.len()).map_err(|_| Error::param("class name too long"))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(bytes);
    }
    Ok(out)
}

fn encode_matrix(data: &Array2<f64>, out: &mut Vec<u8>) {
    for col in data.columns() {
        for &v in col.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

/// Write a labeled dataset container.
pub fn write_dataset(path: &Path, ds: &LabeledDataset) -> Result<()> {
    if ds.class_names.is_empty() {
        return Err(Error::param("dataset containers need at least one class"));
    }
    let mut out = encode_header(ds.sample_count(), ds.column_count(), &ds.class_names)?;
    encode_matrix(&ds.data, &mut out);
    for &label in &ds.labels {
        out.extend_from_slice(&label.to_le_bytes());
    }
    write_file(path, &out)
}

/// Read a labeled dataset container.
pub fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    let buf = read_file(path)?;
    let mut c = Cursor {
        buf: &buf,
        pos: 0,
        path,
    };
    if c.take(4)? != MAGIC {
        return Err(Error::format(path, "bad magic (expected SGPR)"));
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let m = c.u32()? as usize;
    let l = c.u32()? as usize;
    let classes = c.u16()? as usize;
    if classes == 0 {
        return Err(Error::format(
            path,
            "this is a dictionary container, not a dataset",
        ));
    }
    let mut names = Vec::with_capacity(classes);
    for _ in 0..classes {
        let len = c.u16()? as usize;
        let bytes = c.take(len)?;
        names.push(
            String::from_utf8(bytes.to_vec())
                .map_err(|_| Error::format(path, "class name is not UTF-8"))?,
        );
    }
    let mut data = Array2::<f64>::zeros((m, l));
    for col in 0..l {
        for row in 0..m {
            data[(row, col)] = c.f64()?;
        }
    }
    let mut labels = Vec::with_capacity(l);
    for _ in 0..l {
        labels.push(c.u16()?);
    }
    LabeledDataset::new(data, labels, names)
}

/// Write a dictionary: the label-free container flavor plus a provenance
/// block.
pub fn write_dictionary(path: &Path, dict: &Dictionary) -> Result<()> {
    let mut out = encode_header(dict.signal_len(), dict.atom_count(), &[])?;
    let prov = serde_json::to_vec(&dict.provenance)
        .map_err(|e| Error::format(path, format!("provenance encoding: {e}")))?;
    out.extend_from_slice(&(prov.len() as u32).to_le_bytes());
    out.extend_from_slice(&prov);
    encode_matrix(&dict.atoms, &mut out);
    write_file(path, &out)
}

/// Read a dictionary container.
pub fn read_dictionary(path: &Path) -> Result<Dictionary> {
    let buf = read_file(path)?;
    let mut c = Cursor {
        buf: &buf,
        pos: 0,
        path,
    };
    if c.take(4)? != MAGIC {
        return Err(Error::format(path, "bad magic (expected SGPR)"));
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let m = c.u32()? as usize;
    let k = c.u32()? as usize;
    let classes = c.u16()?;
    if classes != 0 {
        return Err(Error::format(
            path,
            "this is a dataset container, not a dictionary",
        ));
    }
    let prov_len = c.u32()? as usize;
    let prov_bytes = c.take(prov_len)?;
    let provenance: Provenance = serde_json::from_slice(prov_bytes)
        .map_err(|e| Error::format(path, format!("provenance decoding: {e}")))?;
    let mut atoms = Array2::<f64>::zeros((m, k));
    for col in 0..k {
        for row in 0..m {
            atoms[(row, col)] = c.f64()?;
        }
    }
    Dictionary::from_atoms(atoms, provenance)
}

/// Write a dataset as CSV: one profile per row, the label name last.
pub fn write_dataset_csv(path: &Path, ds: &LabeledDataset) -> Result<()> {
    let mut out = String::new();
    for col in 0..ds.column_count() {
        for v in ds.data.column(col).iter() {
            write!(out, "{v},").unwrap();
        }
        let name = &ds.class_names[ds.labels[col] as usize];
        out.push_str(name);
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Read a dataset from CSV (one profile per row, label name last).
pub fn read_dataset_csv(path: &Path) -> Result<LabeledDataset> {
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut labels: Vec<u16> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields: Vec<&str> = line.split(',').collect();
        let label = fields
            .pop()
            .ok_or_else(|| Error::format(path, format!("line {}: empty row", lineno + 1)))?
            .trim()
            .to_string();
        let values: Vec<f64> = fields
            .iter()
            .map(|f| {
                f64::from_str(f.trim()).map_err(|_| {
                    Error::format(path, format!("line {}: bad number '{f}'", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if first.len() != values.len() {
                return Err(Error::format(
                    path,
                    format!("line {}: inconsistent sample count", lineno + 1),
                ));
            }
        }
        let idx = match names.iter().position(|n| n == &label) {
            Some(i) => i,
            None => {
                names.push(label);
                names.len() - 1
            }
        };
        labels.push(idx as u16);
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::format(path, "no profiles"));
    }
    let m = rows[0].len();
    let l = rows.len();
    let mut data = Array2::<f64>::zeros((m, l));
    for (col, row) in rows.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            data[(i, col)] = v;
        }
    }
    LabeledDataset::new(data, labels, names)
}

/// Read a dataset container or CSV based on the file extension.
pub fn read_dataset_auto(path: &Path) -> Result<LabeledDataset> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_dataset_csv(path),
        _ => read_dataset(path),
    }
}

/// Write sparse codes as a triplet CSV `column,atom,value`, with one
/// `column,r,residual` row per column so the file round-trips losslessly.
pub fn write_codes_csv(path: &Path, codes: &SparseCodeMatrix) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# columns={} atoms={}", codes.column_count(), codes.atom_count).unwrap();
    out.push_str("column,atom,value\n");
    for (col, code) in codes.codes.iter().enumerate() {
        for &j in &code.support {
            writeln!(out, "{col},{j},{}", code.coefficients[j]).unwrap();
        }
        writeln!(out, "{col},r,{}", code.residual_norm).unwrap();
    }
    write_file(path, out.as_bytes())
}

/// Read a triplet sparse-code CSV.
pub fn read_codes_csv(path: &Path) -> Result<SparseCodeMatrix> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file"))?;
    let (columns, atoms) = parse_codes_header(path, header)?;
    let mut codes: Vec<SparseCode> = (0..columns).map(|_| SparseCode::empty(atoms, 0.0)).collect();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() || line.starts_with('#') || line.starts_with("column,") {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::format(
                path,
                format!("line {}: expected 3 fields", lineno + 2),
            ));
        }
        let col: usize = parts[0]
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("line {}: bad column", lineno + 2)))?;
        if col >= columns {
            return Err(Error::format(path, format!("column {col} out of range")));
        }
        let value: f64 = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("line {}: bad value", lineno + 2)))?;
        if parts[1].trim() == "r" {
            codes[col].residual_norm = value;
        } else {
            let atom: usize = parts[1]
                .trim()
                .parse()
                .map_err(|_| Error::format(path, format!("line {}: bad atom", lineno + 2)))?;
            if atom >= atoms {
                return Err(Error::format(path, format!("atom {atom} out of range")));
            }
            codes[col].coefficients[atom] = value;
            codes[col].support.push(atom);
        }
    }
    for code in &mut codes {
        code.support.sort_unstable();
    }
    Ok(SparseCodeMatrix {
        atom_count: atoms,
        codes,
    })
}

fn parse_codes_header(path: &Path, header: &str) -> Result<(usize, usize)> {
    let err = || Error::format(path, "expected '# columns=<L> atoms=<K>' header");
    let rest = header.strip_prefix("# ").ok_or_else(err)?;
    let mut columns = None;
    let mut atoms = None;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("columns=") {
            columns = v.parse::<usize>().ok();
        } else if let Some(v) = tok.strip_prefix("atoms=") {
            atoms = v.parse::<usize>().ok();
        }
    }
    match (columns, atoms) {
        (Some(c), Some(a)) => Ok((c, a)),
        _ => Err(err()),
    }
}

/// Write predicted labels: `index,label_index,label_name`.
pub fn write_labels_csv(path: &Path, labels: &[u16], class_names: &[String]) -> Result<()> {
    let mut out = String::from("index,label_index,label_name\n");
    for (i, &l) in labels.iter().enumerate() {
        let name = class_names
            .get(l as usize)
            .map(|s| s.as_str())
            .unwrap_or("?");
        writeln!(out, "{i},{l},{name}").unwrap();
    }
    write_file(path, out.as_bytes())
}

/// Read a predicted-label CSV back into indices.
pub fn read_labels_csv(path: &Path) -> Result<Vec<u16>> {
    let text = read_text(path)?;
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() < 2 {
            return Err(Error::format(path, format!("line {}: short row", lineno + 1)));
        }
        labels.push(
            parts[1]
                .trim()
                .parse()
                .map_err(|_| Error::format(path, format!("line {}: bad label", lineno + 1)))?,
        );
    }
    Ok(labels)
}

/// Write a confusion matrix (counts plus probability form) with class names.
pub fn write_confusion_csv(
    path: &Path,
    cm: &ConfusionMatrix,
    class_names: &[String],
) -> Result<()> {
    let c = cm.class_count();
    if class_names.len() != c {
        return Err(Error::param("class name count mismatch"));
    }
    let mut out = String::from("predicted\\truth");
    for name in class_names {
        write!(out, ",{name}").unwrap();
    }
    out.push('\n');
    for row in 0..c {
        write!(out, "{}", class_names[row]).unwrap();
        for col in 0..c {
            write!(out, ",{}", cm.counts[(row, col)]).unwrap();
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Read a confusion CSV back into counts and class names.
pub fn read_confusion_csv(path: &Path) -> Result<(ConfusionMatrix, Vec<String>)> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file"))?;
    let names: Vec<String> = header.split(',').skip(1).map(|s| s.to_string()).collect();
    let c = names.len();
    let mut counts = Array2::<u64>::zeros((c, c));
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if row >= c {
            return Err(Error::format(path, "too many rows"));
        }
        for (col, field) in line.split(',').skip(1).enumerate() {
            if col >= c {
                return Err(Error::format(path, "too many columns"));
            }
            counts[(row, col)] = field
                .trim()
                .parse()
                .map_err(|_| Error::format(path, format!("bad count '{field}'")))?;
        }
    }
    Ok((ConfusionMatrix { counts }, names))
}

/// Write scalar scores as `metric,value` rows.
pub fn write_scores_csv(path: &Path, scores: &[(String, f64)]) -> Result<()> {
    let mut out = String::from("metric,value\n");
    for (name, value) in scores {
        writeln!(out, "{name},{value}").unwrap();
    }
    write_file(path, out.as_bytes())
}

/// Read a `metric,value` score file.
pub fn read_scores_csv(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = read_text(path)?;
    let mut scores = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let (name, value) = line
            .split_once(',')
            .ok_or_else(|| Error::format(path, format!("line {}: short row", lineno + 1)))?;
        scores.push((
            name.to_string(),
            value
                .trim()
                .parse()
                .map_err(|_| Error::format(path, format!("line {}: bad value", lineno + 1)))?,
        ));
    }
    Ok(scores)
}

/// Write parameter-sweep metric reports.
pub fn write_metrics_csv(path: &Path, reports: &[MetricReport]) -> Result<()> {
    let mut out = String::from("combination,mean,std,cv,d_ks,d_dkw,alpha\n");
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.label, r.mean, r.std, r.cv, r.d_ks, r.d_dkw, r.alpha
        )
        .unwrap();
    }
    write_file(path, out.as_bytes())
}

/// Read a metric-report CSV.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricReport>> {
    let text = read_text(path)?;
    let mut reports = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(Error::format(path, format!("line {}: expected 7 fields", lineno + 1)));
        }
        let num = |i: usize| -> Result<f64> {
            parts[i]
                .trim()
                .parse()
                .map_err(|_| Error::format(path, format!("line {}: bad number", lineno + 1)))
        };
        reports.push(MetricReport {
            label: parts[0].to_string(),
            mean: num(1)?,
            std: num(2)?,
            cv: num(3)?,
            d_ks: num(4)?,
            d_dkw: num(5)?,
            alpha: num(6)?,
        });
    }
    Ok(reports)
}

/// Write similarity histograms: one `bin_low` column plus one count column
/// per combination.
pub fn write_histograms_csv(path: &Path, columns: &[(String, [u32; 100])]) -> Result<()> {
    let mut out = String::from("bin_low");
    for (label, _) in columns {
        write!(out, ",{label}").unwrap();
    }
    out.push('\n');
    for bin in 0..100 {
        write!(out, "{}", bin as f64 / 100.0).unwrap();
        for (_, counts) in columns {
            write!(out, ",{}", counts[bin]).unwrap();
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Read a histogram CSV back.
pub fn read_histograms_csv(path: &Path) -> Result<Vec<(String, [u32; 100])>> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file"))?;
    let labels: Vec<String> = header.split(',').skip(1).map(|s| s.to_string()).collect();
    let mut columns: Vec<(String, [u32; 100])> =
        labels.into_iter().map(|l| (l, [0u32; 100])).collect();
    for (bin, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if bin >= 100 {
            return Err(Error::format(path, "too many bins"));
        }
        for (ci, field) in line.split(',').skip(1).enumerate() {
            columns[ci].1[bin] = field
                .trim()
                .parse()
                .map_err(|_| Error::format(path, format!("bad count '{field}'")))?;
        }
    }
    Ok(columns)
}

/// Write probe timings: `algorithm,columns,atoms,seconds,iterations`.
pub fn write_timing_csv(path: &Path, rows: &[ProbeRow]) -> Result<()> {
    let mut out = String::from("algorithm,columns,atoms,seconds,iterations\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.algorithm, r.columns, r.atom_count, r.seconds, r.iterations
        )
        .unwrap();
    }
    write_file(path, out.as_bytes())
}

/// Read a probe-timing CSV.
pub fn read_timing_csv(path: &Path) -> Result<Vec<ProbeRow>> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(Error::format(path, format!("line {}: expected 5 fields", lineno + 1)));
        }
        rows.push(ProbeRow {
            algorithm: parts[0].trim().parse()?,
            columns: parts[1]
                .trim()
                .parse()
                .map_err(|_| Error::format(path, "bad column count"))?,
            atom_count: parts[2]
                .trim()
                .parse()
                .map_err(|_| Error::format(path, "bad atom count"))?,
            seconds: parts[3]
                .trim()
                .parse()
                .map_err(|_| Error::format(path, "bad seconds"))?,
            iterations: parts[4]
                .trim()
                .parse()
                .map_err(|_| Error::format(path, "bad iterations"))?,
        });
    }
    Ok(rows)
}

/// Write a classification map as a binary P5 graymap. Class index `i` of
/// `class_count` classes maps to gray level `i·255/(class_count−1)`
/// (a single class maps to 0); the class count is recorded in a comment so
/// the file reads back losslessly.
pub fn write_map_pgm(path: &Path, map: &ClassMap, class_count: usize) -> Result<()> {
    if class_count == 0 {
        return Err(Error::param("class count must be >= 1"));
    }
    let (h, w) = map.grid.dim();
    let mut out = Vec::new();
    out.extend_from_slice(format!("P5\n# classes={class_count}\n{w} {h}\n255\n").as_bytes());
    for y in 0..h {
        for x in 0..w {
            let idx = map.grid[(y, x)] as usize;
            if idx >= class_count {
                return Err(Error::param(format!("class index {idx} out of range")));
            }
            let level = if class_count == 1 {
                0
            } else {
                (idx * 255 / (class_count - 1)) as u8
            };
            out.push(level);
        }
    }
    write_file(path, &out)
}

/// Read back a P5 classification map written by [`write_map_pgm`].
pub fn read_map_pgm(path: &Path) -> Result<(ClassMap, usize)> {
    let buf = read_file(path)?;
    let header_end = buf
        .windows(5)
        .position(|w| w == b"255\n\0" || w[..4] == *b"255\n")
        .map(|p| p + 4)
        .ok_or_else(|| Error::format(path, "missing maxval"))?;
    let header = std::str::from_utf8(&buf[..header_end])
        .map_err(|_| Error::format(path, "bad header"))?;
    let mut class_count = None;
    let mut dims = None;
    for line in header.lines() {
        if let Some(v) = line.strip_prefix("# classes=") {
            class_count = v.trim().parse::<usize>().ok();
        } else if !line.starts_with('P') && !line.starts_with('#') && !line.starts_with("255") {
            let mut it = line.split_whitespace();
            if let (Some(w), Some(h)) = (it.next(), it.next()) {
                dims = w.parse::<usize>().ok().zip(h.parse::<usize>().ok());
            }
        }
    }
    let class_count = class_count.ok_or_else(|| Error::format(path, "missing classes comment"))?;
    let (w, h) = dims.ok_or_else(|| Error::format(path, "missing dimensions"))?;
    let pixels = &buf[header_end..];
    if pixels.len() < w * h {
        return Err(Error::format(path, "truncated pixel data"));
    }
    let grid = Array2::from_shape_fn((h, w), |(y, x)| {
        let level = pixels[y * w + x] as usize;
        if class_count == 1 {
            0
        } else {
            ((level * (class_count - 1) + 127) / 255) as u16
        }
    });
    Ok((ClassMap { grid }, class_count))
}

/// Write a classification map as CSV (one row per map line).
pub fn write_map_csv(path: &Path, map: &ClassMap) -> Result<()> {
    let mut out = String::new();
    for y in 0..map.height() {
        let row: Vec<String> = (0..map.width())
            .map(|x| map.grid[(y, x)].to_string())
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Read a CSV classification map.
pub fn read_map_csv(path: &Path) -> Result<ClassMap> {
    let text = read_text(path)?;
    let mut rows: Vec<Vec<u16>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<u16> = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse()
                    .map_err(|_| Error::format(path, format!("line {}: bad class", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::format(path, "ragged rows"));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::format(path, "empty map"));
    }
    let h = rows.len();
    let w = rows[0].len();
    let grid = Array2::from_shape_fn((h, w), |(y, x)| rows[y][x]);
    Ok(ClassMap { grid })
}

/// Read a halo file: `id,class,x0,y0,x1,y1` with a header line.
pub fn read_halos_csv(path: &Path) -> Result<Vec<HaloSpec>> {
    let text = read_text(path)?;
    let mut halos = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(Error::format(path, format!("line {}: expected 6 fields", lineno + 1)));
        }
        let field = |i: usize| -> Result<usize> {
            parts[i]
                .trim()
                .parse()
                .map_err(|_| Error::format(path, format!("line {}: bad field {i}", lineno + 1)))
        };
        halos.push(HaloSpec {
            id: field(0)? as u32,
            class: field(1)? as u16,
            x0: field(2)?,
            y0: field(3)?,
            x1: field(4)?,
            y1: field(5)?,
        });
    }
    Ok(halos)
}

/// Write a halo file.
pub fn write_halos_csv(path: &Path, halos: &[HaloSpec]) -> Result<()> {
    let mut out = String::from("id,class,x0,y0,x1,y1\n");
    for h in halos {
        writeln!(out, "{},{},{},{},{},{}", h.id, h.class, h.x0, h.y0, h.x1, h.y1).unwrap();
    }
    write_file(path, out.as_bytes())
}

/// Write a classifier model as JSON.
pub fn write_model(path: &Path, model: &ClassifierModel) -> Result<()> {
    let json = serde_json::to_vec_pretty(model)
        .map_err(|e| Error::format(path, format!("model encoding: {e}")))?;
    write_file(path, &json)
}

/// Read a classifier model.
pub fn read_model(path: &Path) -> Result<ClassifierModel> {
    let buf = read_file(path)?;
    serde_json::from_slice(&buf).map_err(|e| Error::format(path, format!("model decoding: {e}")))
}

/// Parse a sweep grid file: one `key=value,key=value` combination per line.
/// Keys: `k, nt, nb, nr, nu, delta, chi, lambda, seed`.
pub fn parse_grid_line(
    line: &str,
    base: &crate::dictionary_learning::LearnConfig,
) -> Result<crate::dictionary_learning::LearnConfig> {
    let mut config = base.clone();
    for pair in line.split(',') {
        let pair = pair.trim();
        if pair.is_empty() {
            continue;
        }
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::param(format!("bad grid entry '{pair}'")))?;
        let value = value.trim();
        let as_usize =
            || -> Result<usize> { value.parse().map_err(|_| Error::param(format!("bad integer '{value}'"))) };
        let as_f64 =
            || -> Result<f64> { value.parse().map_err(|_| Error::param(format!("bad number '{value}'"))) };
        match key.trim() {
            "k" => config.atom_count = as_usize()?,
            "nt" => config.iterations = as_usize()?,
            "nb" => config.new_batch = as_usize()?,
            "nr" => config.prev_batch = as_usize()?,
            "nu" => config.drop_off_age = as_usize()?,
            "delta" => config.residual_threshold = Some(as_f64()?),
            "chi" => config.convergence_threshold = as_f64()?,
            "lambda" => config.odl_lambda = as_f64()?,
            "seed" => config.seed = value
                .parse()
                .map_err(|_| Error::param(format!("bad seed '{value}'")))?,
            other => return Err(Error::param(format!("unknown grid key '{other}'"))),
        }
    }
    config.validate()?;
    Ok(config)
}

/// Read a whole grid file into sweep points.
pub fn read_grid_file(
    path: &Path,
    base: &crate::dictionary_learning::LearnConfig,
) -> Result<Vec<crate::evaluation::SweepPoint>> {
    let text = read_text(path)?;
    let mut points = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        points.push(crate::evaluation::SweepPoint {
            label: line.to_string(),
            config: parse_grid_line(line, base).map_err(|e| match e {
                Error::InvalidParameter(msg) => Error::format(path, msg),
                other => other,
            })?,
        });
    }
    if points.is_empty() {
        return Err(Error::format(path, "grid file has no combinations"));
    }
    Ok(points)
}

/// Write a one-column-per-profile matrix and labels to common formats used
/// by the tests.
pub fn dataset_from_matrix(data: Array2<f64>, labels: Vec<u16>, names: Vec<String>) -> Result<LabeledDataset> {
    LabeledDataset::new(data, labels, names)
}

/// Convert a prediction vector into an `Array1` (convenience for tests).
pub fn labels_to_array(labels: &[u16]) -> Array1<f64> {
    Array1::from_iter(labels.iter().map(|&l| l as f64))
}
