//! Sectioned `key = value` configuration.
//!
//! ```text
//! # comment
//! [generator]
//! kind = lfss
//! hurst = 0.8, 0.7
//! ```
//!
//! Values are typed when read: integers, reals, strings, booleans and comma
//! lists of numbers. Overrides given as `section.key=value` replace file
//! entries. Every read is recorded, defaults included, so the resolved
//! configuration can be echoed back byte for byte.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::exit::Failure;

/// Where a value came from, for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Override => write!(f, "--set"),
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: Origin,
}

#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
    resolved: RefCell<BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let mut cfg = Config::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .map(str::trim)
                    .filter(|n| is_name(n))
                    .ok_or_else(|| Failure::config(format!("line {line_no}: malformed section header {line:?}")))?;
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Failure::config(format!("line {line_no}: expected key = value, got {line:?}")))?;
            let key = key.trim();
            let sec = section
                .as_deref()
                .ok_or_else(|| Failure::config(format!("line {line_no}: key {key:?} appears before any [section]")))?;
            if !is_name(key) {
                return Err(Failure::config(format!("line {line_no}: malformed key {key:?}")));
            }
            let full = format!("{sec}.{key}");
            if let Some(prev) = cfg.entries.get(&full) {
                return Err(Failure::config(format!("line {line_no}: {full} already set at {}", prev.origin)));
            }
            cfg.entries.insert(
                full,
                Entry {
                    value: value.trim().to_string(),
                    origin: Origin::Line(line_no),
                },
            );
        }
        Ok(cfg)
    }

    /// Applies `section.key=value`.
    pub fn set(&mut self, assignment: &str) -> Result<(), Failure> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Failure::config(format!("--set {assignment:?}: expected section.key=value")))?;
        let key = key.trim();
        match key.split_once('.') {
            Some((s, k)) if is_name(s) && is_name(k) => {}
            _ => return Err(Failure::config(format!("--set {assignment:?}: key must look like section.key"))),
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.trim().to_string(),
                origin: Origin::Override,
            },
        );
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn record(&self, key: &str, value: String) {
        self.resolved.borrow_mut().insert(key.to_string(), value);
    }

    fn typed<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, Failure> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|_| Failure::config(format!("{}: {key} = {:?} is not {what}", e.origin, e.value))),
        }
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        let v = self.raw(key).map_or_else(|| default.to_string(), |e| e.value.clone());
        self.record(key, v.clone());
        v
    }

    pub fn str_req(&self, key: &str) -> Result<String, Failure> {
        let v = self
            .raw(key)
            .map(|e| e.value.clone())
            .ok_or_else(|| Failure::config(format!("missing required key {key}")))?;
        self.record(key, v.clone());
        Ok(v)
    }

    pub fn opt_str(&self, key: &str) -> Option<String> {
        let v = self.raw(key).map(|e| e.value.clone());
        if let Some(v) = &v {
            self.record(key, v.clone());
        }
        v
    }

    /// One of `choices`.
    pub fn choice(&self, key: &str, choices: &[&str], default: &str) -> Result<String, Failure> {
        let v = self.str_or(key, default);
        if choices.contains(&v.as_str()) {
            Ok(v)
        } else {
            let origin = self.raw(key).map_or_else(|| "default".to_string(), |e| e.origin.to_string());
            Err(Failure::config(format!("{origin}: {key} = {v:?}; expected one of {}", choices.join(", "))))
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, Failure> {
        let v = self.typed::<f64>(key, "a real number")?.unwrap_or(default);
        self.record(key, fmt_f64(v));
        Ok(v)
    }

    pub fn f64_req(&self, key: &str) -> Result<f64, Failure> {
        let v = self
            .typed::<f64>(key, "a real number")?
            .ok_or_else(|| Failure::config(format!("missing required key {key}")))?;
        self.record(key, fmt_f64(v));
        Ok(v)
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, Failure> {
        let v = self.typed::<u64>(key, "a nonnegative integer")?.unwrap_or(default);
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn u64_req(&self, key: &str) -> Result<u64, Failure> {
        let v = self
            .typed::<u64>(key, "a nonnegative integer")?
            .ok_or_else(|| Failure::config(format!("missing required key {key}")))?;
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, Failure> {
        let v = self.typed::<bool>(key, "true or false")?.unwrap_or(default);
        self.record(key, v.to_string());
        Ok(v)
    }

    fn list<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<Vec<T>>, Failure> {
        let Some(e) = self.raw(key) else { return Ok(None) };
        e.value
            .split(',')
            .map(|s| s.trim().parse::<T>())
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
            .map_err(|_| Failure::config(format!("{}: {key} = {:?} is not a comma list of {what}", e.origin, e.value)))
    }

    pub fn f64s_req(&self, key: &str) -> Result<Vec<f64>, Failure> {
        let v = self
            .list::<f64>(key, "reals")?
            .ok_or_else(|| Failure::config(format!("missing required key {key}")))?;
        self.record(key, join(v.iter().map(|x| fmt_f64(*x))));
        Ok(v)
    }

    pub fn u64s_or(&self, key: &str, default: &[u64]) -> Result<Vec<u64>, Failure> {
        let v = self.list::<u64>(key, "nonnegative integers")?.unwrap_or_else(|| default.to_vec());
        self.record(key, join(v.iter().map(u64::to_string)));
        Ok(v)
    }

    pub fn u64s_req(&self, key: &str) -> Result<Vec<u64>, Failure> {
        let v = self
            .list::<u64>(key, "nonnegative integers")?
            .ok_or_else(|| Failure::config(format!("missing required key {key}")))?;
        self.record(key, join(v.iter().map(u64::to_string)));
        Ok(v)
    }

    /// Records a derived value that has no key of its own in the input.
    pub fn note(&self, key: &str, value: impl fmt::Display) {
        self.record(key, value.to_string());
    }

    /// Fails on keys that were given but never read.
    pub fn finish(&self) -> Result<(), Failure> {
        let resolved = self.resolved.borrow();
        let unknown: Vec<String> = self
            .entries
            .iter()
            .filter(|(k, _)| !resolved.contains_key(*k))
            .map(|(k, e)| format!("{k} ({})", e.origin))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Failure::config(format!("unknown keys for this command: {}", unknown.join(", "))))
        }
    }

    /// `[section]` blocks of every resolved key, sorted.
    pub fn render_resolved(&self) -> String {
        let resolved = self.resolved.borrow();
        let mut out = String::new();
        let mut current = "";
        for (k, v) in resolved.iter() {
            let (sec, key) = k.split_once('.').unwrap_or(("", k));
            if sec != current {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{sec}]\n"));
                current = sec;
            }
            out.push_str(&format!("{key} = {v}\n"));
        }
        out
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        // `;` also separates table normalizer entries, so only a leading one starts a comment
        Some(i) if line.as_bytes()[i] == b'#' || line[..i].trim().is_empty() => &line[..i],
        _ => line,
    }
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Shortest round-trip form.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_types() {
        let c = Config::parse("# top\n[a]\nx = 1.5\nn = 3 # trailing\nv = 1, 2,3\n\n[b]\nname = lfss\n").unwrap();
        assert_eq!(c.f64_req("a.x").unwrap(), 1.5);
        assert_eq!(c.u64_req("a.n").unwrap(), 3);
        assert_eq!(c.u64s_req("a.v").unwrap(), vec![1, 2, 3]);
        assert_eq!(c.str_req("b.name").unwrap(), "lfss");
        assert_eq!(c.f64_or("b.missing", 2.0).unwrap(), 2.0);
        c.finish().unwrap();
        assert_eq!(c.render_resolved(), "[a]\nn = 3\nv = 1, 2, 3\nx = 1.5\n\n[b]\nmissing = 2.0\nname = lfss\n");
    }

    #[test]
    fn diagnostics_name_line_and_key() {
        let e = Config::parse("[a]\nx = 1\nbroken\n").unwrap_err();
        assert!(e.message.contains("line 3"), "{}", e.message);
        let e = Config::parse("x = 1\n").unwrap_err();
        assert!(e.message.contains("before any [section]"));
        let c = Config::parse("[a]\n\nx = one\n").unwrap();
        let e = c.f64_req("a.x").unwrap_err();
        assert!(e.message.contains("line 3") && e.message.contains("a.x"), "{}", e.message);
        assert_eq!(e.code, 2);
    }

    #[test]
    fn overrides_win_and_unknown_keys_fail() {
        let mut c = Config::parse("[a]\nx = 1\ny = 2\n").unwrap();
        c.set("a.x=5").unwrap();
        assert_eq!(c.u64_req("a.x").unwrap(), 5);
        let e = c.finish().unwrap_err();
        assert!(e.message.contains("a.y (line 3)"), "{}", e.message);
        assert!(c.set("novalue").is_err());
        assert!(c.set("nosection=1").is_err());
    }

    #[test]
    fn table_normalizers_keep_semicolons() {
        let c = Config::parse("[n]\nphi = table:1=1;10=3\n; comment line\n").unwrap();
        assert_eq!(c.str_req("n.phi").unwrap(), "table:1=1;10=3");
    }

    #[test]
    fn choices_are_checked() {
        let c = Config::parse("[a]\nk = nope\n").unwrap();
        assert!(c.choice("a.k", &["x", "y"], "x").is_err());
        assert_eq!(c.choice("a.other", &["x", "y"], "y").unwrap(), "y");
    }
}
