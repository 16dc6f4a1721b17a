//! CSV input and table output.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use sgboost_core::model::{DataTable, Dataset, GroupStructure, RawColumn};

use crate::error::CliError;

/// Number format for every table: 17 significant digits, no locale.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0e0" and keep the zero row readable
        return "0".into();
    }
    format!("{x:.16e}")
}

fn reader(path: &Path) -> Result<csv::Reader<File>, CliError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(path, e))
}

/// Reads a data file with a header row into raw columns, keeping the
/// columns for which `keep` returns true. Dropped columns are never parsed.
pub fn read_table(path: &Path, keep: impl Fn(&str) -> bool) -> Result<DataTable, CliError> {
    let mut rdr = reader(path)?;
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::input(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.is_empty() {
        return Err(CliError::validation(
            "empty_input",
            format!("{} has no columns", path.display()),
        ));
    }
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::input(path, e))?;
        for (col, cell) in cells.iter_mut().zip(record.iter()) {
            col.push(cell.to_string());
        }
    }
    if cells[0].is_empty() {
        return Err(CliError::validation(
            "empty_input",
            format!("{} has no rows", path.display()),
        ));
    }
    let mut kept = Vec::new();
    let mut columns = Vec::new();
    for (name, c) in names.into_iter().zip(&cells) {
        if keep(&name) {
            columns.push(RawColumn::from_cells(&name, c)?);
            kept.push(name);
        }
    }
    Ok(DataTable {
        names: kept,
        columns,
    })
}

/// Reads `(variable, group)` pairs from the named columns of a group file.
pub fn read_groups(
    path: &Path,
    var_column: &str,
    group_column: &str,
) -> Result<Vec<(String, String)>, CliError> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| CliError::input(path, e))?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::validation(
                "missing_column",
                format!("group file {} has no column {name}", path.display()),
            )
        })
    };
    let (v, g) = (find(var_column)?, find(group_column)?);
    let mut pairs = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::input(path, e))?;
        pairs.push((record[v].to_string(), record[g].to_string()));
    }
    Ok(pairs)
}

pub fn group_structure(
    ds: &Dataset,
    pairs: &[(String, String)],
) -> Result<GroupStructure, CliError> {
    Ok(GroupStructure::from_assignments(ds, pairs)?)
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))
}

/// CSV writer that maps failures to runtime errors naming `path`.
pub struct Table {
    path: std::path::PathBuf,
    inner: csv::Writer<io::BufWriter<File>>,
}

impl Table {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::output(path, e))?;
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(io::BufWriter::new(file));
        inner
            .write_record(header)
            .map_err(|e| CliError::output(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner
            .write_record(fields)
            .map_err(|e| CliError::output(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner
            .flush()
            .map_err(|e| CliError::output(&self.path, e))
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = File::create(path).map_err(|e| CliError::output(path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| CliError::output(path, e))
}
