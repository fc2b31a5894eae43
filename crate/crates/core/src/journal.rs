// SPDX-License-Identifier: Apache-2.0

//! Append-only newline-delimited JSON run journal.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{Map, Value};

enum Sink {
    File(File),
    Memory(Vec<String>),
    Null,
}

/// Serialized writer; every line is `{"ts": <unix ms>, "event": <kind>, ...payload}`.
pub struct Journal {
    sink: Mutex<Sink>,
}

impl Journal {
    pub fn create(path: &Path) -> io::Result<Self> {
        Ok(Self { sink: Mutex::new(Sink::File(File::create(path)?)) })
    }

    pub fn append(path: &Path) -> io::Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { sink: Mutex::new(Sink::File(f)) })
    }

    pub fn memory() -> Self {
        Self { sink: Mutex::new(Sink::Memory(Vec::new())) }
    }

    pub fn null() -> Self {
        Self { sink: Mutex::new(Sink::Null) }
    }

    /// Payload must be a JSON object; other values are stored under `value`.
    pub fn emit(&self, kind: &str, payload: Value) -> io::Result<()> {
        let mut obj = Map::new();
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0);
        obj.insert("ts".into(), ts.into());
        obj.insert("event".into(), kind.into());
        match payload {
            Value::Object(m) => obj.extend(m),
            Value::Null => {}
            other => {
                obj.insert("value".into(), other);
            }
        }
        let line = Value::Object(obj).to_string();
        match &mut *self.sink.lock().unwrap() {
            Sink::File(f) => {
                writeln!(f, "{line}")?;
                f.flush()
            }
            Sink::Memory(v) => {
                v.push(line);
                Ok(())
            }
            Sink::Null => Ok(()),
        }
    }

    /// Lines written so far (memory journals only).
    pub fn lines(&self) -> Vec<String> {
        match &*self.sink.lock().unwrap() {
            Sink::Memory(v) => v.clone(),
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReadJournal {
    pub events: Vec<Value>,
    /// `(line number, message)` for every skipped line.
    pub skipped: Vec<(usize, String)>,
}

/// Tolerant reader: malformed lines are skipped and reported.
pub fn read_journal(text: &str) -> ReadJournal {
    let mut out = ReadJournal::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Value>(line) {
            Ok(v) if v.get("event").is_some_and(Value::is_string) => out.events.push(v),
            Ok(_) => out.skipped.push((i + 1, "not an event object".into())),
            Err(e) => out.skipped.push((i + 1, e.to_string())),
        }
    }
    out
}

/// Zero every timestamp so two runs can be compared byte for byte.
pub fn normalize_time(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        match serde_json::from_str::<Value>(line) {
            Ok(Value::Object(mut m)) => {
                if m.contains_key("ts") {
                    m.insert("ts".into(), 0.into());
                }
                out.push_str(&Value::Object(m).to_string());
            }
            _ => out.push_str(line),
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn roundtrip_and_normalize() {
        let j = Journal::memory();
        j.emit("seed", json!({"id": "orig"})).unwrap();
        j.emit("run_summary", json!({"generations": 2})).unwrap();
        let text = j.lines().join("\n") + "\n{\"ts\":1,\"eve";
        let r = read_journal(&text);
        assert_eq!(r.events.len(), 2);
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.events[0]["event"], "seed");
        let n = normalize_time(&j.lines().join("\n"));
        assert!(n.starts_with("{\"event\":\"seed\",\"id\":\"orig\",\"ts\":0}"));
    }

    #[test]
    fn file_sink() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("j.ndjson");
        Journal::create(&p).unwrap().emit("a", json!({})).unwrap();
        Journal::append(&p).unwrap().emit("b", json!({})).unwrap();
        let r = read_journal(&std::fs::read_to_string(&p).unwrap());
        assert_eq!(r.events.len(), 2);
    }
}
