//! Run configuration: a flat `key = value` text format with `#` comments
//! and dotted section keys.
//!
//! ```text
//! p = 1.02
//! grid.Nr = 64        # radial cells
//! stepper.scheme = imex_euler
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::evolve::{Amplitudes, Bump, Scheme, StepperConfig};
use crate::exponents::{epsilon_of_p, v_hardy_prefactor, DEFAULT_C0, P_MAX};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    Primitive,
    Reform,
    Both,
}

impl Formulation {
    pub fn as_str(self) -> &'static str {
        match self {
            Formulation::Primitive => "primitive",
            Formulation::Reform => "reform",
            Formulation::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "primitive" => Some(Formulation::Primitive),
            "reform" | "reformulated" => Some(Formulation::Reform),
            "both" => Some(Formulation::Both),
            _ => None,
        }
    }

    pub fn has_primitive(self) -> bool {
        self != Formulation::Reform
    }

    pub fn has_reform(self) -> bool {
        self != Formulation::Primitive
    }
}

/// Initial-data generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// The configured bump with the configured amplitudes.
    Bump,
    /// Bump geometry and amplitudes perturbed by the seeded RNG.
    RandomBump,
}

impl Generator {
    pub fn as_str(self) -> &'static str {
        match self {
            Generator::Bump => "bump",
            Generator::RandomBump => "random_bump",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bump" => Some(Generator::Bump),
            "random_bump" => Some(Generator::RandomBump),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nr: usize,
    pub nz: usize,
    pub rmax: f64,
    pub lz: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.nr, self.nz, self.rmax, self.lz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSpec {
    pub generator: Generator,
    pub amplitudes: Amplitudes,
    /// Bump support; the standard support of the grid when absent.
    pub support: Option<Bump>,
    /// Shrink the amplitudes until the smallness conditions hold.
    pub calibrate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpSpec {
    pub enabled: bool,
    pub n: usize,
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub snapshots: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub p: f64,
    pub c0: f64,
    pub seed: u64,
    pub formulation: Formulation,
    pub grid: GridSpec,
    pub stepper: StepperConfig,
    pub init: InitSpec,
    pub lp: LpSpec,
    pub output: OutputSpec,
    /// Also evolve the three-component `b` and report `max(|b^r|, |b^z|)`.
    pub track_structure: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            p: 1.02,
            c0: DEFAULT_C0,
            seed: 7,
            formulation: Formulation::Reform,
            grid: GridSpec {
                nr: 64,
                nz: 64,
                rmax: 4.0,
                lz: 8.0,
            },
            stepper: StepperConfig {
                dt: 0.01,
                scheme: Scheme::ImexEuler,
                cfl_safety: 0.9,
                t_end: 1.0,
                sample_every: 10,
            },
            init: InitSpec {
                generator: Generator::Bump,
                amplitudes: Amplitudes {
                    a_u: 1e-8,
                    a_b: 1e-5,
                    a_omega: 1e-3,
                },
                support: None,
                calibrate: false,
            },
            lp: LpSpec {
                enabled: false,
                n: 32,
                l: 16.0,
            },
            output: OutputSpec {
                dir: PathBuf::from("out"),
                snapshots: true,
            },
            track_structure: false,
        }
    }
}

/// Every key in canonical order.
pub const KEYS: [&str; 27] = [
    "p",
    "c0",
    "seed",
    "formulation",
    "grid.Nr",
    "grid.Nz",
    "grid.Rmax",
    "grid.Lz",
    "stepper.dt",
    "stepper.cfl_safety",
    "stepper.t_end",
    "stepper.sample_every",
    "stepper.scheme",
    "init.generator",
    "init.A_u",
    "init.A_b",
    "init.A_omega",
    "init.radius",
    "init.z_center",
    "init.half_height",
    "init.calibrate",
    "lp.enabled",
    "lp.N",
    "lp.L",
    "output.dir",
    "output.snapshots",
    "structure.track",
];

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn parse_f64(v: &str, line: usize, key: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| config_err(line, format!("`{key}` expects a finite number, got `{v}`")))
}

fn parse_usize(v: &str, line: usize, key: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| config_err(line, format!("`{key}` expects a nonnegative integer, got `{v}`")))
}

fn parse_bool(v: &str, line: usize, key: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(config_err(line, format!("`{key}` expects true or false, got `{v}`"))),
    }
}

impl RunConfig {
    /// Parse configuration text. Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<&str, (usize, String)> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(config_err(line, format!("expected `key = value`, got `{content}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(canonical) = KEYS.iter().find(|k| **k == key) else {
                return Err(config_err(line, format!("unknown key `{key}`")));
            };
            if value.is_empty() {
                return Err(config_err(line, format!("`{key}` has no value")));
            }
            if let Some((first, _)) = entries.insert(canonical, (line, value.to_string())) {
                return Err(config_err(line, format!("`{key}` already set on line {first}")));
            }
        }

        let mut cfg = RunConfig::default();
        let mut support = [None::<f64>; 3];
        for (&key, (line, v)) in &entries {
            let line = *line;
            let v = v.as_str();
            match key {
                "p" => cfg.p = parse_f64(v, line, key)?,
                "c0" => cfg.c0 = parse_f64(v, line, key)?,
                "seed" => {
                    cfg.seed = v
                        .parse()
                        .map_err(|_| config_err(line, format!("`seed` expects an unsigned integer, got `{v}`")))?
                }
                "formulation" => {
                    cfg.formulation = Formulation::parse(v).ok_or_else(|| {
                        config_err(line, format!("unknown formulation `{v}` (primitive, reform, both)"))
                    })?
                }
                "grid.Nr" => cfg.grid.nr = parse_usize(v, line, key)?,
                "grid.Nz" => cfg.grid.nz = parse_usize(v, line, key)?,
                "grid.Rmax" => cfg.grid.rmax = parse_f64(v, line, key)?,
                "grid.Lz" => cfg.grid.lz = parse_f64(v, line, key)?,
                "stepper.dt" => cfg.stepper.dt = parse_f64(v, line, key)?,
                "stepper.cfl_safety" => cfg.stepper.cfl_safety = parse_f64(v, line, key)?,
                "stepper.t_end" => cfg.stepper.t_end = parse_f64(v, line, key)?,
                "stepper.sample_every" => cfg.stepper.sample_every = parse_usize(v, line, key)?,
                "stepper.scheme" => {
                    cfg.stepper.scheme = Scheme::parse(v).ok_or_else(|| {
                        config_err(line, format!("unknown scheme `{v}` (imex_euler, explicit_rk2)"))
                    })?
                }
                "init.generator" => {
                    cfg.init.generator = Generator::parse(v)
                        .ok_or_else(|| config_err(line, format!("unknown generator `{v}` (bump, random_bump)")))?
                }
                "init.A_u" => cfg.init.amplitudes.a_u = parse_f64(v, line, key)?,
                "init.A_b" => cfg.init.amplitudes.a_b = parse_f64(v, line, key)?,
                "init.A_omega" => cfg.init.amplitudes.a_omega = parse_f64(v, line, key)?,
                "init.radius" => support[0] = Some(parse_f64(v, line, key)?),
                "init.z_center" => support[1] = Some(parse_f64(v, line, key)?),
                "init.half_height" => support[2] = Some(parse_f64(v, line, key)?),
                "init.calibrate" => cfg.init.calibrate = parse_bool(v, line, key)?,
                "lp.enabled" => cfg.lp.enabled = parse_bool(v, line, key)?,
                "lp.N" => cfg.lp.n = parse_usize(v, line, key)?,
                "lp.L" => cfg.lp.l = parse_f64(v, line, key)?,
                "output.dir" => cfg.output.dir = PathBuf::from(v),
                "output.snapshots" => cfg.output.snapshots = parse_bool(v, line, key)?,
                "structure.track" => cfg.track_structure = parse_bool(v, line, key)?,
                _ => unreachable!("key list and match arms agree"),
            }
        }
        if support.iter().any(Option::is_some) {
            cfg.init.support = Some(Bump {
                radius: support[0].unwrap_or(0.5 * cfg.grid.rmax),
                z_center: support[1].unwrap_or(0.5 * cfg.grid.lz),
                half_height: support[2].unwrap_or(0.25 * cfg.grid.lz),
            });
        }

        let line_of = |key: &str| entries.get(key).map_or(0, |(l, _)| *l);
        cfg.validate().map_err(|(key, message)| config_err(line_of(key), message))?;
        Ok(cfg)
    }

    /// Check the invariants; on failure returns the offending key.
    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if !(self.p > 1.0 && self.p <= P_MAX) {
            return Err(("p", format!("p = {} outside the admissible interval ]1, 63/61]", self.p)));
        }
        if epsilon_of_p(self.p).is_err() || !(v_hardy_prefactor(self.p) > 0.0) {
            return Err(("p", format!("p = {} gives a non-positive dissipation prefactor", self.p)));
        }
        if !(self.c0 > 0.0) {
            return Err(("c0", format!("c0 = {} must be positive", self.c0)));
        }
        let g = &self.grid;
        for (key, n) in [("grid.Nr", g.nr), ("grid.Nz", g.nz)] {
            if n < 4 {
                return Err((key, format!("{key} = {n} must be at least 4")));
            }
        }
        for (key, v) in [("grid.Rmax", g.rmax), ("grid.Lz", g.lz)] {
            if !(v > 0.0) {
                return Err((key, format!("{key} = {v} must be positive")));
            }
        }
        let s = &self.stepper;
        if !(s.dt > 0.0) {
            return Err(("stepper.dt", format!("dt = {} must be positive", s.dt)));
        }
        if !(s.cfl_safety > 0.0 && s.cfl_safety < 1.0) {
            return Err(("stepper.cfl_safety", format!("cfl_safety = {} outside ]0, 1[", s.cfl_safety)));
        }
        if !(s.t_end >= 0.0) {
            return Err(("stepper.t_end", format!("t_end = {} must be nonnegative", s.t_end)));
        }
        if s.sample_every == 0 {
            return Err(("stepper.sample_every", "sample_every must be at least 1".into()));
        }
        let a = &self.init.amplitudes;
        for (key, v) in [("init.A_u", a.a_u), ("init.A_b", a.a_b), ("init.A_omega", a.a_omega)] {
            if !(v >= 0.0) {
                return Err((key, format!("{key} = {v} must be nonnegative")));
            }
        }
        if let Some(b) = self.init.support {
            let grid = g.build().map_err(|e| ("grid.Nr", e.to_string()))?;
            b.validate(&grid).map_err(|e| ("init.radius", e.to_string()))?;
        }
        if self.lp.enabled {
            if self.lp.n < 8 || !self.lp.n.is_power_of_two() {
                return Err(("lp.N", format!("lp.N = {} must be a power of two >= 8", self.lp.n)));
            }
            if !(self.lp.l >= 2.0 * g.rmax.max(g.lz)) {
                return Err((
                    "lp.L",
                    format!("lp.L = {} must be at least 2 max(Rmax, Lz) = {}", self.lp.l, 2.0 * g.rmax.max(g.lz)),
                ));
            }
        }
        Ok(())
    }

    /// The bump support in effect.
    pub fn bump(&self) -> Result<Bump> {
        Ok(match self.init.support {
            Some(b) => b,
            None => Bump::standard(&self.grid.build()?),
        })
    }

    /// Canonical text: every key in [`KEYS`] order, numbers in shortest
    /// round-trip form. Support keys appear only when set.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("p", format!("{:?}", self.p));
        put("c0", format!("{:?}", self.c0));
        put("seed", self.seed.to_string());
        put("formulation", self.formulation.as_str().into());
        put("grid.Nr", self.grid.nr.to_string());
        put("grid.Nz", self.grid.nz.to_string());
        put("grid.Rmax", format!("{:?}", self.grid.rmax));
        put("grid.Lz", format!("{:?}", self.grid.lz));
        put("stepper.dt", format!("{:?}", self.stepper.dt));
        put("stepper.cfl_safety", format!("{:?}", self.stepper.cfl_safety));
        put("stepper.t_end", format!("{:?}", self.stepper.t_end));
        put("stepper.sample_every", self.stepper.sample_every.to_string());
        put("stepper.scheme", self.stepper.scheme.as_str().into());
        put("init.generator", self.init.generator.as_str().into());
        put("init.A_u", format!("{:?}", self.init.amplitudes.a_u));
        put("init.A_b", format!("{:?}", self.init.amplitudes.a_b));
        put("init.A_omega", format!("{:?}", self.init.amplitudes.a_omega));
        if let Some(b) = self.init.support {
            put("init.radius", format!("{:?}", b.radius));
            put("init.z_center", format!("{:?}", b.z_center));
            put("init.half_height", format!("{:?}", b.half_height));
        }
        put("init.calibrate", self.init.calibrate.to_string());
        put("lp.enabled", self.lp.enabled.to_string());
        put("lp.N", self.lp.n.to_string());
        put("lp.L", format!("{:?}", self.lp.l));
        put("output.dir", self.output.dir.display().to_string());
        put("output.snapshots", self.output.snapshots.to_string());
        put("structure.track", self.track_structure.to_string());
        out
    }

    /// Copy with one key overridden, validated as if it came from a file.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let mut text = String::new();
        let mut found = false;
        for line in self.serialize().lines() {
            let k = line.split('=').next().unwrap_or("").trim();
            if k == key {
                found = true;
                let _ = writeln!(text, "{key} = {value}");
            } else {
                let _ = writeln!(text, "{line}");
            }
        }
        if !found {
            if !KEYS.contains(&key) {
                return Err(config_err(0, format!("unknown key `{key}`")));
            }
            let _ = writeln!(text, "{key} = {value}");
        }
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_parse_from_empty_text() {
        assert_eq!(RunConfig::parse("# nothing\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn keys_comments_and_sections() {
        let cfg = RunConfig::parse(
            "p = 1.01   # admissible\ngrid.Nr = 48\n  stepper.scheme = explicit_rk2\nformulation = both\ninit.radius = 1.5\n",
        )
        .unwrap();
        assert_eq!(cfg.p, 1.01);
        assert_eq!(cfg.grid.nr, 48);
        assert_eq!(cfg.stepper.scheme, Scheme::ExplicitRk2);
        assert_eq!(cfg.formulation, Formulation::Both);
        let b = cfg.init.support.unwrap();
        assert_eq!(b.radius, 1.5);
        assert_eq!(b.z_center, 4.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("p = 1.02\nbogus = 3\n", 2),
            ("\n\ngrid.Nr = many\n", 3),
            ("p = 1.02\np = 1.01\n", 2),
            ("# c\np = 1.2\n", 2),
            ("grid.Nr = 64\njust text\n", 2),
            ("stepper.cfl_safety = 1.5\n", 1),
            ("lp.enabled = true\nlp.L = 4\n", 2),
            ("init.radius = 4.5\n", 1),
        ];
        for (text, line) in cases {
            match RunConfig::parse(text) {
                Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn override_replaces_one_key() {
        let cfg = RunConfig::default().with_override("grid.Nz", "32").unwrap();
        assert_eq!(cfg.grid.nz, 32);
        assert!(RunConfig::default().with_override("nope", "1").is_err());
        let cfg = RunConfig::default().with_override("init.z_center", "3.5").unwrap();
        assert_eq!(cfg.init.support.unwrap().z_center, 3.5);
    }

    proptest! {
        #[test]
        fn serialize_is_idempotent_on_canonical_form(
            p in 1.000_001f64..1.032,
            nr in 8usize..200,
            dt in 1e-6f64..1.0,
            a_u in 0.0f64..10.0,
            seed in any::<u64>(),
            both in any::<bool>(),
            radius in prop::option::of(0.1f64..3.9),
        ) {
            let mut cfg = RunConfig { p, seed, ..RunConfig::default() };
            cfg.grid.nr = nr;
            cfg.stepper.dt = dt;
            cfg.init.amplitudes.a_u = a_u;
            if both {
                cfg.formulation = Formulation::Both;
            }
            cfg.init.support = radius.map(|r| Bump { radius: r, z_center: 4.0, half_height: 2.0 });
            let text = cfg.serialize();
            let back = RunConfig::parse(&text).unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(back.serialize(), text);
        }
    }
}
