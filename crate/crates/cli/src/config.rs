//! Optional `key = value` configuration file. Keys use the long flag names
//! (`gamma`, `splat-radius`, ...); command-line flags take precedence.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
            values.insert(
                k.trim().replace('_', "-").to_ascii_lowercase(),
                v.trim().to_string(),
            );
        }
        Ok(Self { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key '{key}': cannot parse '{v}'"))),
        }
    }

    /// Flag value if given, else the config value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    pub fn pick_list(&self, flag: &[String], key: &str, default: &[&str]) -> Vec<String> {
        if !flag.is_empty() {
            return flag.iter().flat_map(|s| split_list(s)).collect();
        }
        match self.values.get(key) {
            Some(v) => split_list(v),
            None => default.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let c = Config::parse("# comment\ngamma = 0.25\nsplat_radius=2\nmetric = ssim, gmsd\n").unwrap();
        assert_eq!(c.pick(None, "gamma", 0.19).unwrap(), 0.25);
        assert_eq!(c.pick(Some(0.3), "gamma", 0.19).unwrap(), 0.3);
        assert_eq!(c.pick::<usize>(None, "splat-radius", 1).unwrap(), 2);
        assert_eq!(c.pick::<f64>(None, "alpha", 0.025).unwrap(), 0.025);
        assert_eq!(c.pick_list(&[], "metric", &["psnr"]), vec!["ssim", "gmsd"]);
        assert_eq!(c.pick_list(&["uqi".into()], "metric", &["psnr"]), vec!["uqi"]);
        assert!(Config::parse("nonsense").is_err());
        assert!(c.get::<usize>("gamma").is_err());
    }
}
