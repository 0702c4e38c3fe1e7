use crate::CliError;
use std::path::Path;

/// Round-trippable rendering, 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

/// A CSV file held in memory until every output of a command is ready.
pub struct Table {
    name: &'static str,
    comment: String,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    trailer: Vec<String>,
}

impl Table {
    pub fn new(name: &'static str, comment: &str, header: &[&'static str]) -> Self {
        Self {
            name,
            comment: comment.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
            trailer: Vec::new(),
        }
    }

    pub fn row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Comment line after the data.
    pub fn note(&mut self, line: String) {
        self.trailer.push(line);
    }

    fn render(&self) -> Result<Vec<u8>, CliError> {
        let mut out = format!("# {}\n", self.comment).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.header)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        for t in &self.trailer {
            out.extend_from_slice(format!("# {t}\n").as_bytes());
        }
        Ok(out)
    }
}

/// Renders everything first so that a failure leaves no partial files.
pub fn write_all(dir: &Path, tables: &[Table]) -> Result<(), CliError> {
    let rendered: Vec<(&str, Vec<u8>)> =
        tables.iter().map(|t| Ok((t.name, t.render()?))).collect::<Result<_, CliError>>()?;
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in rendered {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NAN), "");
    }

    #[test]
    fn comment_then_header() {
        let mut t = Table::new("t.csv", "cfg", &["a", "b"]);
        t.row(vec!["1".into(), num(0.5)]);
        t.note("done".into());
        let s = String::from_utf8(t.render().unwrap()).unwrap();
        assert_eq!(s, "# cfg\na,b\n1,5.0000000000000000e-1\n# done\n");
    }
}
