//! Experiment configuration: a flat `key=value` file whose keys are the
//! command-line flag names, with flags taking precedence over the file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lfcs_core::PongConfig;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algo {
    Lfcs,
    Eprop,
}

impl FromStr for Algo {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lfcs" => Ok(Algo::Lfcs),
            "eprop" => Ok(Algo::Eprop),
            other => Err(HarnessError::Config(format!("unknown algo {other:?}"))),
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Lfcs => "lfcs",
            Algo::Eprop => "eprop",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Experiment id written into every metrics row.
    pub name: String,
    /// `pong-100` or `pong-200`.
    pub env: String,
    pub algo: Algo,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub epsilon: f64,
    pub replays: usize,
    pub eta: f64,
    pub lambda_c: f64,
    pub guard: bool,
    pub recurrent: bool,
    pub sigma_rec: f64,
    pub neurons: usize,
    /// Keep optimizer state across episodes.
    pub persistent_optimizer: bool,
    pub out: PathBuf,
    /// Pong physics overrides, applied on top of the named environment.
    pub physics: Physics,
}

/// Optional replacements for the calibrated Pong parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Physics {
    pub ball_speed_x: Option<f64>,
    pub ball_speed_y_max: Option<f64>,
    pub serve_vy_min: Option<f64>,
    pub paddle_speed: Option<f64>,
    pub paddle_half_height: Option<f64>,
    pub opponent_speed: Option<f64>,
    pub contact_gain: Option<f64>,
    pub serve_delay: Option<usize>,
}

impl Physics {
    pub const KEYS: [&'static str; 8] = [
        "ball-speed-x",
        "ball-speed-y-max",
        "serve-vy-min",
        "paddle-speed",
        "paddle-half-height",
        "opponent-speed",
        "contact-gain",
        "serve-delay",
    ];

    fn slot(&mut self, key: &str) -> Option<&mut Option<f64>> {
        Some(match key {
            "ball-speed-x" => &mut self.ball_speed_x,
            "ball-speed-y-max" => &mut self.ball_speed_y_max,
            "serve-vy-min" => &mut self.serve_vy_min,
            "paddle-speed" => &mut self.paddle_speed,
            "paddle-half-height" => &mut self.paddle_half_height,
            "opponent-speed" => &mut self.opponent_speed,
            "contact-gain" => &mut self.contact_gain,
            _ => return None,
        })
    }

    pub fn apply(&self, cfg: &mut PongConfig) {
        let pairs = [
            (self.ball_speed_x, &mut cfg.ball_speed_x),
            (self.ball_speed_y_max, &mut cfg.ball_speed_y_max),
            (self.serve_vy_min, &mut cfg.serve_vy_min),
            (self.paddle_speed, &mut cfg.paddle_speed),
            (self.paddle_half_height, &mut cfg.paddle_half_height),
            (self.opponent_speed, &mut cfg.opponent_speed),
            (self.contact_gain, &mut cfg.contact_gain),
        ];
        for (v, field) in pairs {
            if let Some(v) = v {
                *field = v;
            }
        }
        if let Some(d) = self.serve_delay {
            cfg.serve_delay = d;
        }
    }

    fn to_text(&self) -> String {
        let floats = [
            self.ball_speed_x,
            self.ball_speed_y_max,
            self.serve_vy_min,
            self.paddle_speed,
            self.paddle_half_height,
            self.opponent_speed,
            self.contact_gain,
        ];
        let mut out = String::new();
        for (key, v) in Self::KEYS.iter().zip(floats) {
            if let Some(v) = v {
                out.push_str(&format!("{key}={v}\n"));
            }
        }
        if let Some(d) = self.serve_delay {
            out.push_str(&format!("serve-delay={d}\n"));
        }
        out
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            env: "pong-100".into(),
            algo: Algo::Lfcs,
            episodes: 5000,
            seeds: (1..=10).collect(),
            epsilon: 0.2,
            replays: 1,
            eta: 1.5e-3,
            lambda_c: 0.0,
            guard: false,
            recurrent: true,
            sigma_rec: 1.0,
            neurons: 500,
            persistent_optimizer: false,
            out: PathBuf::from("results"),
            physics: Physics::default(),
        }
    }
}

/// Keys accepted in config files, identical to the long flag names. The
/// Pong physics keys in [`Physics::KEYS`] are accepted as well.
pub const KEYS: [&str; 15] = [
    "name",
    "env",
    "algo",
    "episodes",
    "seeds",
    "epsilon",
    "replays",
    "eta",
    "lambda-c",
    "guard",
    "no-recurrent",
    "sigma-rec",
    "neurons",
    "persistent-optimizer",
    "out",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| HarnessError::Config(format!("bad value {value:?} for {key}")))
}

fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(HarnessError::Config(format!(
            "bad value {value:?} for {key}"
        ))),
    }
}

/// Parses `1,2,5` and inclusive ranges such as `1-10`, or a mix of both.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (parse("seeds", a.trim())?, parse("seeds", b.trim())?);
                if a > b {
                    return Err(HarnessError::Config(format!("empty seed range {part}")));
                }
                out.extend(a..=b);
            }
            None => out.push(parse("seeds", part)?),
        }
    }
    if out.is_empty() {
        return Err(HarnessError::Config("no seeds given".into()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Sets one field from its flag name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "name" => self.name = value.to_string(),
            "env" => {
                PongConfig::by_name(value).map_err(|e| HarnessError::Config(e.to_string()))?;
                self.env = value.to_string();
            }
            "algo" => self.algo = value.parse()?,
            "episodes" => self.episodes = parse(key, value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "replays" => self.replays = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "lambda-c" => self.lambda_c = parse(key, value)?,
            "guard" => self.guard = parse_switch(key, value)?,
            "no-recurrent" => self.recurrent = !parse_switch(key, value)?,
            "sigma-rec" => self.sigma_rec = parse(key, value)?,
            "neurons" => self.neurons = parse(key, value)?,
            "persistent-optimizer" => self.persistent_optimizer = parse_switch(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "serve-delay" => self.physics.serve_delay = Some(parse(key, value)?),
            other => match self.physics.slot(other) {
                Some(slot) => *slot = Some(parse(key, value)?),
                None => return Err(HarnessError::Config(format!("unknown key {other:?}"))),
            },
        }
        Ok(())
    }

    /// Applies `key=value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::io(path.to_path_buf(), e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// The named environment with the physics overrides applied.
    pub fn pong(&self) -> Result<PongConfig> {
        let mut cfg =
            PongConfig::by_name(&self.env).map_err(|e| HarnessError::Config(e.to_string()))?;
        self.physics.apply(&mut cfg);
        cfg.validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.pong()?;
        if self.episodes == 0 {
            return bad("episodes must be positive".into());
        }
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        if self.replays == 0 {
            return bad("replays must be at least 1".into());
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            ));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.lambda_c >= 0.0 && self.lambda_c.is_finite()) {
            return bad(format!(
                "lambda-c must be non-negative, got {}",
                self.lambda_c
            ));
        }
        if !(self.sigma_rec >= 0.0 && self.sigma_rec.is_finite()) {
            return bad(format!(
                "sigma-rec must be non-negative, got {}",
                self.sigma_rec
            ));
        }
        if self.neurons == 0 {
            return bad("neurons must be positive".into());
        }
        if self.name.is_empty() || self.name.contains([',', '\n', '/']) {
            return bad(format!(
                "name {:?} must be non-empty without ',', '/' or newlines",
                self.name
            ));
        }
        Ok(())
    }

    /// Every field as `key=value` lines, readable back by [`apply_text`].
    ///
    /// [`apply_text`]: ExperimentConfig::apply_text
    pub fn to_text(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let switch = |b: bool| if b { "on" } else { "off" };
        format!(
            "name={}\nenv={}\nalgo={}\nepisodes={}\nseeds={}\nepsilon={}\nreplays={}\neta={}\n\
             lambda-c={}\nguard={}\nno-recurrent={}\nsigma-rec={}\nneurons={}\n\
             persistent-optimizer={}\nout={}\n",
            self.name,
            self.env,
            self.algo,
            self.episodes,
            seeds.join(","),
            self.epsilon,
            self.replays,
            self.eta,
            self.lambda_c,
            switch(self.guard),
            if self.recurrent { "false" } else { "true" },
            self.sigma_rec,
            self.neurons,
            switch(self.persistent_optimizer),
            self.out.display(),
        ) + &self.physics.to_text()
    }
}
