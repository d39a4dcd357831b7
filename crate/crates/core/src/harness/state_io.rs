//! Plain-text state files (`SPHEROSTATE v1`), carrying the mesh level and
//! physical constants needed to rebuild the model around the fields.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ops::{CellField, EdgeField};
use crate::rsw::State;

pub const STATE_MAGIC: &str = "SPHEROSTATE v1";

#[derive(Debug, Clone, PartialEq)]
pub struct StateFile {
    pub level: u32,
    pub radius: f64,
    pub gravity: f64,
    pub rotation: f64,
    pub state: State,
}

impl StateFile {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{STATE_MAGIC}").unwrap();
        writeln!(s, "level {}", self.level).unwrap();
        writeln!(s, "radius {:.17e}", self.radius).unwrap();
        writeln!(s, "gravity {:.17e}", self.gravity).unwrap();
        writeln!(s, "rotation {:.17e}", self.rotation).unwrap();
        writeln!(s, "edges {}", self.state.v.len()).unwrap();
        for v in self.state.v.iter() {
            writeln!(s, "{v:.17e}").unwrap();
        }
        writeln!(s, "cells {}", self.state.h.len()).unwrap();
        for h in self.state.h.iter() {
            writeln!(s, "{h:.17e}").unwrap();
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let lines: Vec<&str> = text.lines().collect();
        let mut at = 0usize;
        let mut next = || -> std::result::Result<(usize, &str), String> {
            let l = lines.get(at).ok_or("unexpected end of file")?;
            at += 1;
            Ok((at, l.trim()))
        };
        let (_, magic) = next()?;
        if magic != STATE_MAGIC {
            return Err(format!("line 1: expected `{STATE_MAGIC}`"));
        }
        let mut keyed = |key: &str| -> std::result::Result<(usize, String), String> {
            let (n, l) = next()?;
            match l.split_once(' ') {
                Some((k, v)) if k == key => Ok((n, v.trim().to_string())),
                _ => Err(format!("line {n}: expected `{key} <value>`")),
            }
        };
        fn parse_at<T: std::str::FromStr>((n, v): (usize, String)) -> std::result::Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse().map_err(|e| format!("line {n}: {e}"))
        }
        let level = parse_at(keyed("level")?)?;
        let radius = parse_at(keyed("radius")?)?;
        let gravity = parse_at(keyed("gravity")?)?;
        let rotation = parse_at(keyed("rotation")?)?;
        let ne: usize = parse_at(keyed("edges")?)?;
        let mut values = |count: usize| -> std::result::Result<Vec<f64>, String> {
            (0..count)
                .map(|_| {
                    let (n, l) = next()?;
                    parse_at((n, l.to_string()))
                })
                .collect()
        };
        let v = values(ne)?;
        let (n, l) = next()?;
        let nc: usize = match l.split_once(' ') {
            Some(("cells", c)) => parse_at((n, c.trim().to_string()))?,
            _ => return Err(format!("line {n}: expected `cells <count>`")),
        };
        let h = (0..nc)
            .map(|_| {
                let (n, l) = next()?;
                parse_at((n, l.to_string()))
            })
            .collect::<std::result::Result<Vec<f64>, String>>()?;
        Ok(StateFile {
            level,
            radius,
            gravity,
            rotation,
            state: State {
                v: EdgeField::from(v),
                h: CellField::from(h),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> StateFile {
        StateFile {
            level: 1,
            radius: 6.371229e6,
            gravity: 9.80616,
            rotation: 7.292e-5,
            state: State {
                v: EdgeField::from(vec![0.1, -1.0 / 3.0, 1e-300]),
                h: CellField::from(vec![1e4, std::f64::consts::PI]),
            },
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let f = sample();
        assert_eq!(StateFile::parse(&f.to_text()).unwrap(), f);
    }

    #[test]
    fn malformed_files_name_the_line() {
        let text = sample().to_text().replace("gravity", "gravitas");
        assert!(StateFile::parse(&text).unwrap_err().starts_with("line 4"));
        let text = sample().to_text();
        let cut: String = text.lines().take(8).map(|l| format!("{l}\n")).collect();
        assert!(StateFile::parse(&cut).unwrap_err().contains("end of file"));
        assert!(StateFile::parse("nope").is_err());
    }
}
