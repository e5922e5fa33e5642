//! Flat key-value config files: one `key = value` per line, `#` or `;`
//! comments, no sections. Command-line flags override file values.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: HashMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::parse(&text))
    }

    pub fn parse(text: &str) -> Self {
        let mut values = HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Self { values }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Option<Result<T, T::Err>> {
        self.values.get(key).map(|v| v.parse())
    }

    /// Flag value if present, else config value, else the default.
    pub fn resolve<T: FromStr + Clone>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, String> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.get::<T>(key) {
            Some(Ok(v)) => Ok(v),
            Some(Err(_)) => Err(format!("config key '{key}' has an unparsable value")),
            None => Ok(default),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves() {
        let cfg = ConfigFile::parse("# comment\n m = 1000 \nbeta= 1e-3\n; other\nbad line\n");
        assert_eq!(cfg.get::<usize>("m").unwrap().unwrap(), 1000);
        assert_eq!(cfg.resolve(None, "beta", 0.0).unwrap(), 1e-3);
        // Flag wins over file; missing key falls back to default.
        assert_eq!(cfg.resolve(Some(5usize), "m", 1).unwrap(), 5);
        assert_eq!(cfg.resolve::<usize>(None, "absent", 7).unwrap(), 7);
    }

    #[test]
    fn unparsable_value_is_an_error() {
        let cfg = ConfigFile::parse("m = twelve\n");
        assert!(cfg.resolve::<usize>(None, "m", 1).is_err());
    }
}
