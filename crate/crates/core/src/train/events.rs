use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

/// Append-only run log, one `event=<kind> key=value ...` line per event.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    lines: Vec<String>,
}

/// One parsed log line.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub kind: String,
    pub fields: BTreeMap<String, String>,
}

impl Event {
    pub fn parse(line: &str) -> Option<Event> {
        let mut kind = None;
        let mut fields = BTreeMap::new();
        for token in line.split_whitespace() {
            let (k, v) = token.split_once('=')?;
            if k == "event" {
                kind = Some(v.to_string());
            } else {
                fields.insert(k.to_string(), v.to_string());
            }
        }
        Some(Event { kind: kind?, fields })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Option<T> {
        self.fields.get(key)?.parse().ok()
    }
}

impl EventLog {
    pub fn new() -> Self {
        EventLog::default()
    }

    /// Values must not contain whitespace or `=`.
    pub fn record(&mut self, kind: &str, fields: &[(&str, String)]) {
        let mut line = format!("event={kind}");
        for (k, v) in fields {
            debug_assert!(!v.contains(char::is_whitespace) && !v.contains('='));
            write!(line, " {k}={v}").unwrap();
        }
        self.lines.push(line);
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn events(&self, kind: &str) -> Vec<Event> {
        self.lines.iter().filter_map(|l| Event::parse(l)).filter(|e| e.kind == kind).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Self {
        EventLog { lines: text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect() }
    }

    pub fn append(&mut self, other: &EventLog) {
        self.lines.extend(other.lines.iter().cloned());
    }
}

/// Every `temp_buffer_size` completed chains produce exactly one sync event:
/// sync `g` (1-based) reports `g * temp_buffer_size` completed chains.
pub fn check_liveness(log: &EventLog, temp_buffer_size: usize) -> Result<usize, String> {
    let syncs = log.events("sync");
    for (i, e) in syncs.iter().enumerate() {
        let g: u64 = e.get("generation").ok_or("sync event without generation")?;
        let chains: usize = e.get("chains_completed").ok_or("sync event without chains_completed")?;
        if g != i as u64 + 1 {
            return Err(format!("sync {i} has generation {g}"));
        }
        if chains != (i + 1) * temp_buffer_size {
            return Err(format!("sync generation {g} after {chains} chains, expected {}", (i + 1) * temp_buffer_size));
        }
    }
    Ok(syncs.len())
}

/// Every learner read saw a buffer made of whole synchronization batches:
/// `buffer_len = min(capacity, generation * temp_buffer_size)`, with
/// generations never decreasing.
pub fn check_no_torn_reads(log: &EventLog, temp_buffer_size: usize, capacity: usize) -> Result<usize, String> {
    let learns = log.events("learn");
    let mut last = 0u64;
    for e in &learns {
        let step: usize = e.get("step").ok_or("learn event without step")?;
        let g: u64 = e.get("generation").ok_or("learn event without generation")?;
        let len: usize = e.get("buffer_len").ok_or("learn event without buffer_len")?;
        if g < last {
            return Err(format!("step {step}: generation went back from {last} to {g}"));
        }
        last = g;
        let expected = (g as usize * temp_buffer_size).min(capacity);
        if len != expected {
            return Err(format!("step {step}: buffer_len {len} at generation {g}, expected {expected}"));
        }
    }
    Ok(learns.len())
}
