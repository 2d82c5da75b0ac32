//! `--set key.path=value` overrides applied to a JSON configuration.

use serde_json::Value;

/// Sets `path` (dot-separated object keys) in `doc`. The value is parsed as
/// JSON when it can be, and taken as a string otherwise. Every key on the
/// path must already exist, except a missing last key of an object whose
/// other keys are all present (optional fields such as `landscape`).
pub fn apply(doc: &mut Value, assignment: &str, optional: &[&str]) -> Result<(), String> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| format!("override {assignment:?} is not KEY=VALUE"))?;
    let path = path.trim();
    if path.is_empty() {
        return Err(format!("override {assignment:?} has an empty key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    let mut node = doc;
    for (i, key) in keys.iter().enumerate() {
        let last = i + 1 == keys.len();
        let Value::Object(map) = node else {
            return Err(format!("{} is not an object", keys[..i].join(".")));
        };
        if !map.contains_key(*key) && !(last && optional.contains(&path)) {
            return Err(format!("unknown configuration key {path:?}"));
        }
        if last {
            map.insert((*key).to_string(), value);
            return Ok(());
        }
        node = map.get_mut(*key).expect("checked above");
    }
    unreachable!("path has at least one key")
}
