//! Line-oriented loss report with fixed 9-significant-digit formatting.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const REPORT_HEADER: &str = "# fdist loss report v1";
pub const FIELD_NAMES: [&str; 6] = ["l_r", "l_s", "l_dc", "l_tot", "l_ce", "mtl"];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    pub l_r: f64,
    pub l_s: f64,
    pub l_dc: f64,
    pub l_tot: f64,
    pub l_ce: f64,
    pub mtl: f64,
}

impl LossReport {
    pub fn values(&self) -> [f64; 6] {
        [self.l_r, self.l_s, self.l_dc, self.l_tot, self.l_ce, self.mtl]
    }

    fn from_values(v: [f64; 6]) -> Self {
        let [l_r, l_s, l_dc, l_tot, l_ce, mtl] = v;
        Self {
            l_r,
            l_s,
            l_dc,
            l_tot,
            l_ce,
            mtl,
        }
    }
}

impl fmt::Display for LossReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{REPORT_HEADER}")?;
        for (name, v) in FIELD_NAMES.iter().zip(self.values()) {
            writeln!(f, "{name} = {v:.8e}")?;
        }
        Ok(())
    }
}

impl FromStr for LossReport {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some(REPORT_HEADER) {
            return Err(Error::Format("missing loss report header".into()));
        }
        let mut values = [None; 6];
        for line in lines {
            let (name, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("malformed report line '{line}'")))?;
            let name = name.trim();
            let idx = FIELD_NAMES
                .iter()
                .position(|&n| n == name)
                .ok_or_else(|| Error::Format(format!("unknown report field '{name}'")))?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("field '{name}' is not a number")))?;
            if values[idx].replace(v).is_some() {
                return Err(Error::Format(format!("duplicate report field '{name}'")));
            }
        }
        let mut out = [0.0; 6];
        for (i, v) in values.iter().enumerate() {
            out[i] = v.ok_or_else(|| Error::Format(format!("missing report field '{}'", FIELD_NAMES[i])))?;
        }
        Ok(Self::from_values(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_is_stable() {
        let r = LossReport {
            l_r: 0.123456789123,
            l_s: 1.0,
            l_dc: 0.0,
            l_tot: 2.5e-7,
            l_ce: 3.0,
            mtl: -1.0,
        };
        let text = r.to_string();
        assert!(text.contains("l_r = 1.23456789e-1\n"));
        assert!(text.contains("l_tot = 2.50000000e-7\n"));
        let back: LossReport = text.parse().unwrap();
        assert!((back.l_r - r.l_r).abs() < 1e-9);
        assert_eq!(back.to_string(), text);
    }

    #[test]
    fn rejects_incomplete() {
        assert!(format!("{REPORT_HEADER}\nl_r = 1\n").parse::<LossReport>().is_err());
        assert!("l_r = 1".parse::<LossReport>().is_err());
    }
}
