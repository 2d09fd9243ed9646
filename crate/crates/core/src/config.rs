//! TOML formats for game definitions and experiment configurations.
//!
//! A game file either names a builtin game or lists quadratic cost blocks:
//!
//! ```toml
//! # builtin = "paper-example"      # use a builtin instead of the keys below
//! name = "two-player"
//! players = 2                      # optional, must equal len(dims)
//! dims = [1, 1]                    # action dimension of each player
//!
//! # J^i(a) = ½·aᵀA_i·a + b_iᵀa over the joint action a (D×D and D)
//! [[cost]]
//! A = [[3.0, 1.0], [1.0, 0.0]]
//! b = [0.0, 0.0]
//!
//! [[cost]]
//! A = [[0.0, -1.0], [-1.0, 1.0]]
//! b = [0.0, 0.0]
//!
//! # shared constraint K·a ≤ l; omit the table for an unconstrained game
//! [constraints]
//! K = [[-1.0, -1.0]]
//! l = [-1.0]
//!
//! # optional monotonicity and Lipschitz constants; computed when absent
//! # nu = 1.0
//! # lipschitz = 3.24
//! ```
//!
//! An experiment file:
//!
//! ```toml
//! game = "paper-example"    # builtin name, or game file relative to this file
//! horizon = 100000
//! seeds = { count = 20, base = 0 }   # or an explicit list: seeds = [0, 1, 2]
//! cadence = { per_decade = 20 }      # or { every = 100 }
//! output_dir = "out"                 # relative to the working directory
//! label = "s-4-7"                    # file stem of the CSV outputs
//! allow_invalid_schedules = false
//!
//! [schedules]                        # exponents accept fractions as strings
//! G = 1.0
//! g = "4/7"
//! E = 1.0
//! e = "2/7"
//! S = 1.0
//! s = "4/7"
//! ```

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::builtin;
use crate::error::{Error, Result};
use crate::game::{ConstraintSet, CostModel, GameSpec, QuadraticGame};
use crate::harness::ExperimentConfig;
use crate::learner::{Cadence, Schedules};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameFile {
    builtin: Option<String>,
    name: Option<String>,
    players: Option<usize>,
    dims: Option<Vec<usize>>,
    #[serde(default)]
    cost: Vec<CostBlock>,
    constraints: Option<ConstraintTable>,
    nu: Option<f64>,
    lipschitz: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostBlock {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintTable {
    #[serde(rename = "K")]
    k: Vec<Vec<f64>>,
    l: Vec<f64>,
}

fn matrix(rows: &[Vec<f64>], cols: usize, what: &str) -> Result<DMatrix<f64>> {
    if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
        return Err(Error::Config(format!("{what}: expected rows of length {cols}, found {}", bad.len())));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

/// Parses a game from TOML text. `fallback_name` is used when the file
/// sets no name.
pub fn parse_game(text: &str, fallback_name: &str) -> Result<GameSpec> {
    let file: GameFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut game = if let Some(name) = &file.builtin {
        if file.dims.is_some() || !file.cost.is_empty() || file.constraints.is_some() {
            return Err(Error::Config("a builtin game cannot also define dims, costs or constraints".into()));
        }
        builtin::by_name(name).ok_or_else(|| Error::Config(format!("unknown builtin game {name:?}")))??
    } else {
        let dims = file.dims.ok_or_else(|| Error::Config("missing `dims`".into()))?;
        if let Some(p) = file.players {
            if p != dims.len() {
                return Err(Error::Config(format!("players = {p} but dims has {} entries", dims.len())));
            }
        }
        if file.cost.len() != dims.len() {
            return Err(Error::Config(format!(
                "expected one [[cost]] table per player ({}), found {}",
                dims.len(),
                file.cost.len()
            )));
        }
        let d: usize = dims.iter().sum();
        let mut a_blocks = Vec::with_capacity(dims.len());
        let mut b_blocks = Vec::with_capacity(dims.len());
        for (i, block) in file.cost.iter().enumerate() {
            if block.a.len() != d {
                return Err(Error::Config(format!("cost {i}: A must be {d}×{d}")));
            }
            a_blocks.push(matrix(&block.a, d, &format!("cost {i} A"))?);
            let b = block.b.clone().unwrap_or_else(|| vec![0.0; d]);
            if b.len() != d {
                return Err(Error::Config(format!("cost {i}: b must have length {d}")));
            }
            b_blocks.push(DVector::from_vec(b));
        }
        let quad = QuadraticGame::new(&dims, a_blocks, b_blocks)?;
        let constraints = match &file.constraints {
            Some(table) => {
                if table.k.len() != table.l.len() {
                    return Err(Error::Config(format!(
                        "K has {} rows but l has {} entries",
                        table.k.len(),
                        table.l.len()
                    )));
                }
                ConstraintSet::new(matrix(&table.k, d, "K")?, DVector::from_vec(table.l.clone()))?
            }
            None => ConstraintSet::unconstrained(d),
        };
        let name = file.name.clone().unwrap_or_else(|| fallback_name.to_string());
        GameSpec::new(name, dims, CostModel::Quadratic(quad), constraints)?
    };
    if let Some(nu) = file.nu {
        game = game.with_known_nu(nu);
    }
    if let Some(l) = file.lipschitz {
        game = game.with_known_lipschitz(l);
    }
    Ok(game)
}

/// Resolves a builtin name (`paper-example`, `softplus-coupled`,
/// `random:<seed>`) or reads a game file.
pub fn load_game(reference: &str) -> Result<GameSpec> {
    if let Some(game) = builtin::by_name(reference) {
        return game;
    }
    let path = Path::new(reference);
    if !path.exists() {
        return Err(Error::Config(format!("{reference:?} is neither a builtin game nor an existing file")));
    }
    let text = std::fs::read_to_string(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("game");
    parse_game(&text, stem)
}

/// A real number given either as a TOML number or as a fraction string
/// such as `"4/7"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum Real {
    Number(f64),
    Integer(i64),
    Text(String),
}

impl Real {
    fn value(&self, key: &str) -> Result<f64> {
        match self {
            Real::Number(v) => Ok(*v),
            Real::Integer(v) => Ok(*v as f64),
            Real::Text(s) => parse_real(s).map_err(|e| Error::Config(format!("{key}: {e}"))),
        }
    }
}

/// Parses `"0.5"`, `"4/7"` or `"-1/3"`.
pub fn parse_real(text: &str) -> std::result::Result<f64, String> {
    let text = text.trim();
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("cannot parse {text:?}: {e}"));
    match text.split_once('/') {
        Some((num, den)) => {
            let den = parse(den)?;
            if den == 0.0 {
                return Err(format!("zero denominator in {text:?}"));
            }
            Ok(parse(num)? / den)
        }
        None => parse(text),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleTable {
    #[serde(rename = "G")]
    gamma_scale: Real,
    g: Real,
    #[serde(rename = "E")]
    eps_scale: Real,
    e: Real,
    #[serde(rename = "S")]
    sigma_scale: Real,
    s: Real,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SeedSpec {
    List(Vec<u64>),
    Range { count: u64, base: Option<u64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    game: String,
    horizon: u64,
    seeds: SeedSpec,
    #[serde(default)]
    cadence: Option<Cadence>,
    output_dir: Option<PathBuf>,
    label: Option<String>,
    #[serde(default)]
    allow_invalid_schedules: bool,
    schedules: Option<ScheduleTable>,
}

/// Parses an experiment configuration. Game files are resolved relative
/// to `base_dir`.
pub fn parse_experiment(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let file: ExperimentFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let game = if builtin::by_name(&file.game).is_some() {
        file.game
    } else {
        base_dir.join(&file.game).to_string_lossy().into_owned()
    };
    let seeds = match file.seeds {
        SeedSpec::List(v) => v,
        SeedSpec::Range { count, base } => {
            let base = base.unwrap_or(0);
            (base..base + count).collect()
        }
    };
    let schedules = match file.schedules {
        Some(t) => Schedules {
            gamma_scale: t.gamma_scale.value("G")?,
            gamma_exp: t.g.value("g")?,
            eps_scale: t.eps_scale.value("E")?,
            eps_exp: t.e.value("e")?,
            sigma_scale: t.sigma_scale.value("S")?,
            sigma_exp: t.s.value("s")?,
        },
        None => Schedules::default(),
    };
    let cfg = ExperimentConfig {
        game,
        schedules,
        horizon: file.horizon,
        seeds,
        cadence: file.cadence.unwrap_or_default(),
        output_dir: file.output_dir.unwrap_or_else(|| PathBuf::from(".")),
        label: file.label.unwrap_or_else(|| "experiment".into()),
        allow_invalid_schedules: file.allow_invalid_schedules,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_experiment(&text, base)
}
