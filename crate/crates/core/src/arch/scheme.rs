//! Hierarchy substitution schemes such as `DWHT-6-H` or `DCT-3-M-Front`.

use std::fmt;
use std::str::FromStr;

use super::{BlockVariant, NetworkSpec};
use crate::error::{Error, Result};
use crate::transforms::TransformKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Level {
    Low,
    MidFront,
    MidRear,
    High,
}

impl Level {
    fn suffix(self) -> &'static str {
        match self {
            Level::Low => "L",
            Level::MidFront => "M-Front",
            Level::MidRear => "M-Rear",
            Level::High => "H",
        }
    }
}

/// Which blocks a substitution replaces: `count` blocks at a hierarchy
/// level. Low and High take the first / last eligible blocks; the middle
/// levels take the first / last blocks of the middle stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SubstitutionScheme {
    pub count: usize,
    pub level: Level,
}

impl SubstitutionScheme {
    /// Middle-level schemes only come in counts 3 and 7 (the middle stage
    /// holds 7 blocks).
    pub fn new(count: usize, level: Level) -> Result<Self> {
        if matches!(level, Level::MidFront | Level::MidRear) && ![0, 3, 7].contains(&count) {
            return Err(Error::Config(format!(
                "middle-level schemes take 3 or 7 blocks, got {count}"
            )));
        }
        Ok(Self { count, level })
    }

    pub fn low(count: usize) -> Self {
        Self {
            count,
            level: Level::Low,
        }
    }

    pub fn high(count: usize) -> Self {
        Self {
            count,
            level: Level::High,
        }
    }

    /// Block indices this scheme selects in `net`, in network order.
    pub fn select(&self, net: &NetworkSpec) -> Result<Vec<usize>> {
        let pool = match self.level {
            Level::Low | Level::High => net.eligible_blocks(),
            Level::MidFront | Level::MidRear => net.mid_blocks(),
        };
        if self.count > pool.len() {
            return Err(Error::Config(format!(
                "scheme {self} needs {} blocks but {} has only {} at that level",
                self.count,
                net.family,
                pool.len()
            )));
        }
        Ok(match self.level {
            Level::Low | Level::MidFront => pool[..self.count].to_vec(),
            Level::High | Level::MidRear => pool[pool.len() - self.count..].to_vec(),
        })
    }
}

impl fmt::Display for SubstitutionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.count, self.level.suffix())
    }
}

impl FromStr for SubstitutionScheme {
    type Err = Error;

    /// Accepts `6-H`, `3-L`, `3-M-Front`, `7-M-Rear`; a bare `7-M` means
    /// `7-M-Front`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse substitution scheme '{s}'"));
        let (count, level) = s.trim().split_once('-').ok_or_else(bad)?;
        let count: usize = count.parse().map_err(|_| bad())?;
        let level = match level.to_ascii_lowercase().as_str() {
            "l" | "low" => Level::Low,
            "h" | "high" => Level::High,
            "m" | "m-front" | "mid-front" => Level::MidFront,
            "m-rear" | "mid-rear" => Level::MidRear,
            _ => return Err(bad()),
        };
        Self::new(count, level)
    }
}

/// Parses a full scheme name such as `DWHT-6-H`. The transform prefix is
/// optional (`6-H` alone yields `None`).
pub fn parse_scheme_name(s: &str) -> Result<(Option<TransformKind>, SubstitutionScheme)> {
    let s = s.trim();
    match s.split_once('-') {
        Some((head, rest)) if head.parse::<usize>().is_err() => Ok((Some(head.parse()?), rest.parse()?)),
        _ => Ok((None, s.parse()?)),
    }
}

/// Returns a copy of `net` with the blocks selected by `scheme` switched to
/// `variant`. Other blocks are left as they are.
pub fn apply_substitution(net: &NetworkSpec, variant: BlockVariant, scheme: SubstitutionScheme) -> Result<NetworkSpec> {
    let mut out = net.clone();
    for i in scheme.select(net)? {
        out.blocks[i].variant = variant;
    }
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{build_mobilenet_v1, build_shufflenet_v2};

    #[test]
    fn parse_and_display() {
        for name in ["6-H", "3-L", "3-M-Front", "7-M-Rear", "10-H"] {
            assert_eq!(name.parse::<SubstitutionScheme>().unwrap().to_string(), name);
        }
        assert_eq!("7-M".parse::<SubstitutionScheme>().unwrap().level, Level::MidFront);
        assert!("6-M-Front".parse::<SubstitutionScheme>().is_err());
        assert!("x-H".parse::<SubstitutionScheme>().is_err());
        assert!("6".parse::<SubstitutionScheme>().is_err());
        let (k, s) = parse_scheme_name("DCT-3-M-Front").unwrap();
        assert_eq!(k, Some(TransformKind::Dct));
        assert_eq!(s, SubstitutionScheme::new(3, Level::MidFront).unwrap());
        assert_eq!(parse_scheme_name("6-H").unwrap().0, None);
        assert!(parse_scheme_name("FFT-6-H").is_err());
    }

    #[test]
    fn selection() {
        let sh = build_shufflenet_v2(1.1, 100, (32, 32)).unwrap();
        let low = SubstitutionScheme::low(3).select(&sh).unwrap();
        assert_eq!(
            low.iter().map(|&i| sh.blocks[i].name.as_str()).collect::<Vec<_>>(),
            ["s2.u1", "s2.u2", "s2.u3"]
        );
        let high = SubstitutionScheme::high(3).select(&sh).unwrap();
        assert_eq!(sh.blocks[high[0]].name, "s4.u1");
        let rear = "3-M-Rear".parse::<SubstitutionScheme>().unwrap().select(&sh).unwrap();
        assert_eq!(sh.blocks[rear[2]].name, "s3.u7");
        assert!(SubstitutionScheme::high(14).select(&sh).is_err());

        let mb = build_mobilenet_v1(1.0, 100, (32, 32)).unwrap();
        assert_eq!(
            SubstitutionScheme::high(6).select(&mb).unwrap(),
            (7..13).collect::<Vec<_>>()
        );
    }

    #[test]
    fn zero_count_is_identity() {
        let mb = build_mobilenet_v1(1.0, 100, (32, 32)).unwrap();
        let v = BlockVariant::ctpc(TransformKind::Dwht);
        assert_eq!(apply_substitution(&mb, v, SubstitutionScheme::high(0)).unwrap(), mb);
    }
}
