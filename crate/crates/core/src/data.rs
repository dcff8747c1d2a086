//! Binary observation matrices, cluster labelings, and their file formats.
//!
//! Matrices are stored row-major with each row bit-packed into `u64` words,
//! column `j` at bit `j % 64` of word `j / 64`.
//!
//! On disk a dataset is either CSV (one row per sample, `0`/`1` cells, no
//! header) or the compact binary layout:
//!
//! ```text
//! "BMMX" | version u8 | n u64 LE | L u64 LE | rows
//! ```
//!
//! where each row is `ceil(L / 8)` bytes, column `j` at bit `j % 8` of byte
//! `j / 8` and the padding bits are zero.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const BIN_MAGIC: &[u8; 4] = b"BMMX";
pub const BIN_VERSION: u8 = 1;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dataset {
    n: usize,
    l: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl fmt::Debug for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Dataset {}x{}", self.n, self.l)?;
        for i in 0..self.n.min(16) {
            let row: String = (0..self.l).map(|j| if self.get(i, j) { '1' } else { '0' }).collect();
            writeln!(f, "  {row}")?;
        }
        if self.n > 16 {
            writeln!(f, "  ...")?;
        }
        Ok(())
    }
}

impl Dataset {
    pub fn zeros(n: usize, l: usize) -> Result<Self> {
        if n == 0 || l == 0 {
            return Err(Error::Invalid(format!("dataset must be at least 1x1, got {n}x{l}")));
        }
        let words_per_row = l.div_ceil(64);
        Ok(Dataset {
            n,
            l,
            words_per_row,
            bits: vec![0; n * words_per_row],
        })
    }

    /// Builds a dataset from rows of `0`/`1` values.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let l = rows.first().map_or(0, |r| r.as_ref().len());
        let mut ds = Dataset::zeros(n, l)?;
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != l {
                return Err(Error::Invalid(format!(
                    "row {i} has {} entries, expected {l}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => ds.set(i, j, true),
                    other => {
                        return Err(Error::Invalid(format!(
                            "entry ({i}, {j}) is {other}, expected 0 or 1"
                        )))
                    }
                }
            }
        }
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.n && j < self.l);
        (self.bits[i * self.words_per_row + j / 64] >> (j % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        let w = &mut self.bits[i * self.words_per_row + j / 64];
        let mask = 1u64 << (j % 64);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    pub fn row_words(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.bits
    }

    pub(crate) fn row_words_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.bits[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    pub fn row(&self, i: usize) -> Vec<u8> {
        (0..self.l).map(|j| self.get(i, j) as u8).collect()
    }

    /// Outcome index of row `i` restricted to `columns`: the first listed
    /// column is the least significant bit.
    #[inline]
    pub fn outcome_index(&self, i: usize, columns: &[usize]) -> usize {
        let words = self.row_words(i);
        columns.iter().enumerate().fold(0usize, |acc, (b, &c)| {
            acc | ((((words[c / 64] >> (c % 64)) & 1) as usize) << b)
        })
    }

    /// Number of ones in column `j`.
    pub fn column_count(&self, j: usize) -> u64 {
        (0..self.n).filter(|&i| self.get(i, j)).count() as u64
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut out = Dataset::zeros(rows.len(), self.l)?;
        for (dst, &src) in rows.iter().enumerate() {
            if src >= self.n {
                return Err(Error::Invalid(format!("row {src} out of range for n = {}", self.n)));
            }
            out.row_words_mut(dst).copy_from_slice(self.row_words(src));
        }
        Ok(out)
    }

    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        check_columns(columns, self.l)?;
        let mut out = Dataset::zeros(self.n, columns.len())?;
        for i in 0..self.n {
            for (dst, &src) in columns.iter().enumerate() {
                if self.get(i, src) {
                    out.set(i, dst, true);
                }
            }
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::with_capacity(2 * self.l);
        for i in 0..self.n {
            line.clear();
            for j in 0..self.l {
                if j > 0 {
                    line.push(',');
                }
                line.push(if self.get(i, j) { '1' } else { '0' });
            }
            line.push('\n');
            out.write_all(line.as_bytes())
                .map_err(|e| Error::Format(format!("writing CSV: {e}")))?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut rows: Vec<Vec<u8>> = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format(format!("CSV row {i}: {e}")))?;
            let row = rec
                .iter()
                .enumerate()
                .map(|(j, cell)| match cell {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(Error::Format(format!(
                        "CSV cell ({i}, {j}) is {other:?}, expected 0 or 1"
                    ))),
                })
                .collect::<Result<Vec<u8>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Format("CSV dataset has no rows".into()));
        }
        Dataset::from_rows(&rows)
    }

    pub fn write_bin<W: Write>(&self, mut out: W) -> Result<()> {
        let wr = |out: &mut W, bytes: &[u8]| {
            out.write_all(bytes)
                .map_err(|e| Error::Format(format!("writing binary dataset: {e}")))
        };
        wr(&mut out, BIN_MAGIC)?;
        wr(&mut out, &[BIN_VERSION])?;
        wr(&mut out, &(self.n as u64).to_le_bytes())?;
        wr(&mut out, &(self.l as u64).to_le_bytes())?;
        let row_bytes = self.l.div_ceil(8);
        let mut buf = Vec::with_capacity(self.words_per_row * 8);
        for i in 0..self.n {
            buf.clear();
            for w in self.row_words(i) {
                buf.extend_from_slice(&w.to_le_bytes());
            }
            wr(&mut out, &buf[..row_bytes])?;
        }
        Ok(())
    }

    pub fn read_bin<R: Read>(mut input: R) -> Result<Self> {
        let mut header = [0u8; 21];
        input
            .read_exact(&mut header)
            .map_err(|e| Error::Format(format!("binary dataset header: {e}")))?;
        if &header[..4] != BIN_MAGIC {
            return Err(Error::Format("missing BMMX magic".into()));
        }
        if header[4] != BIN_VERSION {
            return Err(Error::Format(format!("unsupported BMMX version {}", header[4])));
        }
        let n = u64::from_le_bytes(header[5..13].try_into().unwrap());
        let l = u64::from_le_bytes(header[13..21].try_into().unwrap());
        let (n, l) = (
            usize::try_from(n).map_err(|_| Error::Format("n too large".into()))?,
            usize::try_from(l).map_err(|_| Error::Format("L too large".into()))?,
        );
        let mut ds = Dataset::zeros(n, l).map_err(|e| Error::Format(e.to_string()))?;
        let row_bytes = l.div_ceil(8);
        let mut buf = vec![0u8; ds.words_per_row * 8];
        for i in 0..n {
            input
                .read_exact(&mut buf[..row_bytes])
                .map_err(|e| Error::Format(format!("binary dataset row {i}: {e}")))?;
            if l % 8 != 0 && buf[row_bytes - 1] >> (l % 8) != 0 {
                return Err(Error::Format(format!("row {i} has nonzero padding bits")));
            }
            for (w, chunk) in ds.row_words_mut(i).iter_mut().zip(buf.chunks(8)) {
                *w = u64::from_le_bytes(chunk.try_into().unwrap());
            }
        }
        let mut rest = [0u8; 1];
        if input.read(&mut rest).map_err(|e| Error::Format(e.to_string()))? != 0 {
            return Err(Error::Format("trailing bytes after binary dataset".into()));
        }
        Ok(ds)
    }

    /// Loads a dataset, choosing the format from `format` or else by sniffing
    /// the magic bytes.
    pub fn load(path: &Path, format: Option<DataFormat>) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let format = match format {
            Some(f) => f,
            None => {
                let head = reader.fill_buf().map_err(|e| Error::io(path, e))?;
                if head.starts_with(BIN_MAGIC) {
                    DataFormat::Bin
                } else {
                    DataFormat::Csv
                }
            }
        };
        match format {
            DataFormat::Csv => Dataset::read_csv(reader),
            DataFormat::Bin => Dataset::read_bin(reader),
        }
    }

    pub fn save(&self, path: &Path, format: DataFormat) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        match format {
            DataFormat::Csv => self.write_csv(&mut out)?,
            DataFormat::Bin => self.write_bin(&mut out)?,
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn check_columns(columns: &[usize], l: usize) -> Result<()> {
    if columns.is_empty() {
        return Err(Error::Invalid("empty column selection".into()));
    }
    for (idx, &c) in columns.iter().enumerate() {
        if c >= l {
            return Err(Error::Invalid(format!("column {c} out of range for L = {l}")));
        }
        if columns[..idx].contains(&c) {
            return Err(Error::Invalid(format!("column {c} selected twice")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DataFormat {
    Csv,
    Bin,
}

impl DataFormat {
    /// `bin`/`bmmx` extensions map to the binary layout, anything else to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("bin") || ext.eq_ignore_ascii_case("bmmx") => {
                DataFormat::Bin
            }
            _ => DataFormat::Csv,
        }
    }
}

/// Cluster indices, one per row, each `>= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Labeling(Vec<u32>);

impl Labeling {
    pub fn new(z: Vec<u32>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::Invalid("labeling is empty".into()));
        }
        if let Some(i) = z.iter().position(|&x| x == 0) {
            return Err(Error::Invalid(format!("label at position {i} is 0; labels start at 1")));
        }
        Ok(Labeling(z))
    }

    /// Relabels clusters `1, 2, ...` in order of first occurrence.
    pub fn canonicalize(&self) -> Labeling {
        let mut map: Vec<(u32, u32)> = Vec::new();
        let z = self
            .0
            .iter()
            .map(|&x| match map.iter().find(|(from, _)| *from == x) {
                Some(&(_, to)) => to,
                None => {
                    let to = map.len() as u32 + 1;
                    map.push((x, to));
                    to
                }
            })
            .collect();
        Labeling(z)
    }

    /// Labels run `1..=κ` in first-occurrence order.
    pub fn is_canonical(&self) -> bool {
        let mut next = 1u32;
        for &x in &self.0 {
            if x == next {
                next += 1;
            } else if x > next {
                return false;
            }
        }
        true
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn max_label(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// Number of distinct labels.
    pub fn num_clusters(&self) -> usize {
        let mut seen: Vec<u32> = self.0.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Row indices per distinct label, ordered by label value.
    pub fn clusters(&self) -> Vec<(u32, Vec<usize>)> {
        let mut labels: Vec<u32> = self.0.clone();
        labels.sort_unstable();
        labels.dedup();
        labels
            .into_iter()
            .map(|lab| {
                let rows = self
                    .0
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x == lab)
                    .map(|(i, _)| i)
                    .collect();
                (lab, rows)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for x in &self.0 {
            writeln!(out, "{x}").map_err(|e| Error::Format(format!("writing labels: {e}")))?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut z = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format(format!("label row {i}: {e}")))?;
            if rec.len() != 1 {
                return Err(Error::Format(format!("label row {i} has {} columns", rec.len())));
            }
            let x: u32 = rec[0]
                .parse()
                .map_err(|_| Error::Format(format!("label row {i}: {:?} is not a label", &rec[0])))?;
            z.push(x);
        }
        Labeling::new(z)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Labeling::read_csv(BufReader::new(file))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_csv(&mut out)?;
        out.flush().map_err(|e| Error::io(path, e))
    }
}
