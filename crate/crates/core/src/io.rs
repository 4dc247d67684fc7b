use std::io::Write;

use crate::error::Result;

/// Writes equally long columns as CSV with one row per grid point.
pub(crate) fn write_columns<W: Write>(out: W, header: &[String], columns: &[&[f64]]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    let rows = columns.first().map_or(0, |c| c.len());
    let mut record = Vec::with_capacity(columns.len());
    for i in 0..rows {
        record.clear();
        record.extend(columns.iter().map(|c| c[i].to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn family(prefix: &str, arms: usize) -> impl Iterator<Item = String> + '_ {
    (0..arms).map(move |k| format!("{prefix}_{k}"))
}
