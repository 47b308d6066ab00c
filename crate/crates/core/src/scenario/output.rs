use std::fmt::Write as _;
use std::path::Path;

use crate::dynamics::ElementSeries;
use crate::error::{Error, Result};

/// One labelled CSV column pair.
#[derive(Debug, Clone)]
pub struct Column {
    pub label: String,
    pub series: ElementSeries,
}

impl Column {
    pub fn new(label: impl Into<String>, series: ElementSeries) -> Self {
        Column {
            label: label.into(),
            series,
        }
    }
}

/// 17 significant digits in scientific notation.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

/// Renders `time_ms,<label>_re,<label>_im,...` rows with LF endings.
pub fn render_series_csv(columns: &[Column]) -> Result<String> {
    let first = columns.first().ok_or_else(|| Error::invalid("no series to write"))?;
    if let Some(c) = columns.iter().find(|c| !c.series.same_grid(&first.series)) {
        return Err(Error::invalid(format!(
            "series `{}` is on a different grid from `{}`",
            c.label, first.label
        )));
    }
    let mut out = String::from("time_ms");
    for c in columns {
        write!(out, ",{0}_re,{0}_im", c.label).unwrap();
    }
    out.push('\n');
    for (k, t) in first.series.times.iter().enumerate() {
        out.push_str(&format_value(*t));
        for c in columns {
            let z = c.series.values[k];
            write!(out, ",{},{}", format_value(z.re), format_value(z.im)).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_series_csv(columns: &[Column], path: &Path) -> Result<()> {
    let text = render_series_csv(columns)?;
    write_text(path, &text)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
