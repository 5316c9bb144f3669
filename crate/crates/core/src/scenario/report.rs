//! Tabular reports and their CSV / JSON / plain-table renderings.

use serde_json::{json, Map, Value};

use super::config::OutputFormat;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    /// Shortest round-trip form; `.` decimal separator, exponent for extremes.
    fn text(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:?}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => Value::from(*x),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    /// Ordered key/value header lines.
    pub metadata: Vec<(String, String)>,
    /// Resolved scenario as TOML, echoed into the header.
    pub scenario_toml: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra structured payload for JSON output.
    pub extra: Option<(String, Value)>,
    /// Replaces the generic aligned table in `table` output.
    pub table: Option<String>,
}

impl Report {
    pub fn new(command: &str, columns: &[&str], scenario_toml: String) -> Self {
        Report {
            command: command.to_string(),
            metadata: vec![
                ("tool".into(), format!("mcf-qkd {}", crate::VERSION)),
                ("command".into(), command.to_string()),
            ],
            scenario_toml,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            extra: None,
            table: None,
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
            OutputFormat::Table => self.to_table(),
        }
    }

    fn header_lines(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str("# scenario:\n");
        for line in self.scenario_toml.lines() {
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                out.push_str(&format!("#   {line}\n"));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text)).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells");
        self.header_lines() + &body
    }

    pub fn to_json(&self) -> String {
        let mut meta = Map::new();
        for (k, v) in &self.metadata {
            meta.insert(k.clone(), Value::from(v.clone()));
        }
        let scenario: Value = toml::from_str(&self.scenario_toml).unwrap_or(Value::Null);
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(r) {
                    m.insert(c.clone(), v.json());
                }
                Value::Object(m)
            })
            .collect();
        let mut doc = json!({
            "metadata": meta,
            "scenario": scenario,
            "columns": self.columns,
            "rows": rows,
        });
        if let Some((k, v)) = &self.extra {
            doc[k.as_str()] = v.clone();
        }
        serde_json::to_string_pretty(&doc).expect("json value serialises") + "\n"
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("{k}: {v}\n"));
        }
        out.push('\n');
        if let Some(t) = &self.table {
            out.push_str(t);
            return out;
        }
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::text).collect()).collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|i| cells.iter().map(|r| r[i].len()).chain([self.columns[i].len()]).max().unwrap_or(0))
            .collect();
        let line = |items: &[String]| {
            let mut s = items
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ");
            s.push('\n');
            s
        };
        out.push_str(&line(&self.columns));
        for r in &cells {
            out.push_str(&line(r));
        }
        out
    }
}
