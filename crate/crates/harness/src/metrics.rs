//! Per-episode metrics rows and their CSV form.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{HarnessError, Result};

pub const HEADER: &str =
    "experiment,seed,episode,frames,reward,surrogate_pre,surrogate_post,entropy,accepted";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub experiment: String,
    pub seed: u64,
    pub episode: usize,
    /// Cumulative environment frames at the end of this episode.
    pub frames: u64,
    pub reward: f64,
    pub surrogate_pre: f64,
    pub surrogate_post: f64,
    pub entropy: f64,
    pub accepted: bool,
}

impl MetricsRow {
    /// Rounds every float to the precision it is written with, so that
    /// writing and reading back is the identity.
    pub fn canonical(mut self) -> Self {
        for x in [
            &mut self.reward,
            &mut self.surrogate_pre,
            &mut self.surrogate_post,
            &mut self.entropy,
        ] {
            *x = canonical(*x);
        }
        self
    }

    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.seed,
            self.episode,
            self.frames,
            format_g9(self.reward),
            format_g9(self.surrogate_pre),
            format_g9(self.surrogate_post),
            format_g9(self.entropy),
            u8::from(self.accepted),
        )
    }

    fn from_line(line: &str, lineno: usize) -> Result<Self> {
        let err = |reason: String| HarnessError::Parse {
            line: lineno,
            reason,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(err(format!("expected 9 fields, got {}", f.len())));
        }
        let float = |i: usize| -> Result<f64> {
            f[i].parse()
                .map_err(|_| err(format!("bad number {:?}", f[i])))
        };
        let int = |i: usize| -> Result<u64> {
            f[i].parse()
                .map_err(|_| err(format!("bad integer {:?}", f[i])))
        };
        Ok(Self {
            experiment: f[0].to_string(),
            seed: int(1)?,
            episode: int(2)? as usize,
            frames: int(3)?,
            reward: float(4)?,
            surrogate_pre: float(5)?,
            surrogate_post: float(6)?,
            entropy: float(7)?,
            accepted: match f[8] {
                "1" => true,
                "0" => false,
                other => return Err(err(format!("bad flag {other:?}"))),
            },
        })
    }
}

/// `printf("%.9g")`: nine significant digits, trailing zeros dropped,
/// scientific notation outside `[1e-4, 1e9)`.
pub fn format_g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs());
    }
    let decimals = (8 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// The value `x` reads back as after [`format_g9`].
pub fn canonical(x: f64) -> f64 {
    format_g9(x).parse().expect("formatted float parses")
}

pub fn serialize(rows: &[MetricsRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_line());
        out.push('\n');
    }
    out
}

pub fn parse(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(HEADER) => {}
        other => {
            return Err(HarnessError::Parse {
                line: 1,
                reason: format!("unexpected header {other:?}"),
            })
        }
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| MetricsRow::from_line(l, i + 2))
        .collect()
}

pub fn write_file(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let io = |e| HarnessError::io(path.to_path_buf(), e);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(serialize(rows).as_bytes()).map_err(io)
}

pub fn read_file(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path.to_path_buf(), e))?;
    parse(&text)
}
