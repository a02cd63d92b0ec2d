use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::args::Format;

/// Writes reports one per line as they complete, flushing after each.
pub struct Emitter {
    out: Box<dyn Write>,
    format: Format,
    header: Option<Vec<String>>,
}

impl Emitter {
    pub fn open(path: Option<&Path>, format: Format) -> io::Result<Emitter> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        };
        Ok(Emitter { out, format, header: None })
    }

    pub fn emit<T: Serialize>(&mut self, report: &T) -> io::Result<()> {
        let value = serde_json::to_value(report).map_err(io::Error::other)?;
        match self.format {
            Format::Json => {
                serde_json::to_writer(&mut self.out, &value)?;
                writeln!(self.out)?;
            }
            Format::Csv => self.emit_csv(value)?,
        }
        self.out.flush()
    }

    fn emit_csv(&mut self, value: Value) -> io::Result<()> {
        let fields: Vec<(String, Value)> = match value {
            Value::Object(map) => map.into_iter().collect(),
            other => vec![("value".to_string(), other)],
        };
        let names: Vec<String> = fields.iter().map(|(k, _)| k.clone()).collect();
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(&mut self.out);
        if self.header.as_ref() != Some(&names) {
            w.write_record(&names)?;
            self.header = Some(names);
        }
        w.write_record(fields.iter().map(|(_, v)| cell(v)))?;
        w.flush()
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        other => other.to_string(),
    }
}
