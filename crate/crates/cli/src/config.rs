//! Flat `key = value` configuration files. Lines starting with `#` and blank
//! lines are ignored.

use std::collections::HashMap;
use std::str::FromStr;

#[derive(Debug, Default)]
pub struct FlatConfig {
    values: HashMap<String, String>,
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = HashMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", k + 1))?;
            let value = value.trim().trim_matches('"');
            values.insert(key.trim().to_string(), value.to_string());
        }
        Ok(FlatConfig { values })
    }

    /// The flag value if given, else the config value parsed as `T`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, String> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| format!("config key {key}: cannot parse {v:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let c = FlatConfig::parse("# defaults\nN = 50\n\nsetting = \"hard\"\neta=0.2\n").unwrap();
        assert_eq!(c.pick::<usize>(None, "N").unwrap(), Some(50));
        assert_eq!(c.pick(Some(7usize), "N").unwrap(), Some(7));
        assert_eq!(c.pick::<String>(None, "setting").unwrap().as_deref(), Some("hard"));
        assert_eq!(c.pick::<f64>(None, "eta").unwrap(), Some(0.2));
        assert_eq!(c.pick::<f64>(None, "missing").unwrap(), None);
        assert!(c.pick::<usize>(None, "eta").is_err());
        assert!(FlatConfig::parse("no equals sign").is_err());
    }
}
