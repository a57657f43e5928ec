//! Match, tournament and time-series experiment runner.
//!
//! Tournaments run every ordered pairing of a roster for a fixed number of
//! trials and rounds. Raw per-round payoffs are persisted per match as
//! gzipped CSV plus a manifest, so every table cell and time series can be
//! re-derived from disk. Trials parallelize; each match owns random streams
//! derived from `base_seed + trial`, so parallelism cannot change results.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GabeError, Result};
use crate::opponents::GameContext;
use crate::rsg::{run_round, Player};
use crate::scalar::Real;

/// Per-round payoff pairs of one match.
#[derive(Debug, Clone)]
pub struct MatchResult<R> {
    pub spec_a: String,
    pub spec_b: String,
    pub seed: u64,
    pub rounds: usize,
    /// `(seat one, seat two)` round totals, one entry per round.
    pub payoffs: Vec<(R, R)>,
}

impl<R: Real> MatchResult<R> {
    /// Mean per-round payoff of one seat (zero for empty series).
    pub fn mean_of(&self, seat: Player) -> R {
        if self.payoffs.is_empty() {
            return R::zero();
        }
        let sum: R = self.payoffs.iter().map(|p| match seat {
            Player::P1 => p.0,
            Player::P2 => p.1,
        }).sum();
        sum / R::from_f64_lossy(self.payoffs.len() as f64)
    }
}

/// Splits one seed into independent per-purpose streams.
fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer.
    let mut z = seed ^ salt.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Runs one match: fresh agents, `rounds` sequential rounds with per-round
/// updates, deterministic in `seed`.
pub fn run_match<R: Real>(
    ctx: &GameContext<R>,
    spec_a: &str,
    spec_b: &str,
    rounds: usize,
    seed: u64,
) -> Result<MatchResult<R>> {
    let mut a = ctx.make_agent(spec_a, Player::P1, mix_seed(seed, 1))?;
    let mut b = ctx.make_agent(spec_b, Player::P2, mix_seed(seed, 2))?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0));
    let mut payoffs = Vec::with_capacity(rounds);
    for round in 0..rounds {
        a.begin_round(round);
        b.begin_round(round);
        let record = run_round(
            ctx.game.as_ref(),
            a.as_mut(),
            b.as_mut(),
            &mut rng,
            ctx.move_cap,
        )
        .map_err(|e| {
            GabeError::Precondition(format!(
                "match `{spec_a}` vs `{spec_b}` round {round}: {e}"
            ))
        })?;
        payoffs.push((record.totals.p1, record.totals.p2));
    }
    Ok(MatchResult {
        spec_a: spec_a.into(),
        spec_b: spec_b.into(),
        seed,
        rounds,
        payoffs,
    })
}

/// Round-robin table of mean per-round payoffs.
#[derive(Debug, Clone)]
pub struct TournamentTable<R> {
    pub roster: Vec<String>,
    /// `cells[row][col]`: the row agent's mean per-round payoff against the
    /// column agent, averaged over trials.
    pub cells: Vec<Vec<R>>,
    /// Arithmetic mean of each row (the summary column).
    pub row_average: Vec<R>,
    pub trials: usize,
    pub rounds: usize,
}

/// Manifest written next to the raw match files.
#[derive(Debug, Serialize, Deserialize)]
pub struct TournamentManifest {
    pub game: String,
    pub roster: Vec<String>,
    pub trials: usize,
    pub rounds: usize,
    pub base_seed: u64,
    pub files: Vec<RawFileEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RawFileEntry {
    pub row: usize,
    pub col: usize,
    pub trial: usize,
    pub seed: u64,
    pub path: String,
}

/// Runs every ordered pairing (self-play included) for `trials` matches of
/// `rounds` rounds each; trial `t` uses seed `base_seed + t`. When `out_dir`
/// is given, raw per-round payoffs are persisted per match along with a
/// manifest.
pub fn run_tournament<R: Real>(
    ctx: &GameContext<R>,
    roster: &[String],
    trials: usize,
    rounds: usize,
    base_seed: u64,
    out_dir: Option<&Path>,
) -> Result<TournamentTable<R>> {
    assert!(!roster.is_empty(), "roster must be non-empty");
    let n = roster.len();
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir.join("raw"))
            .map_err(|e| GabeError::Config(format!("cannot create {dir:?}: {e}")))?;
    }

    let jobs: Vec<(usize, usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .flat_map(|(i, j)| (0..trials).map(move |t| (i, j, t)))
        .collect();

    let results: Vec<Result<(usize, usize, usize, MatchResult<R>)>> = jobs
        .par_iter()
        .map(|&(i, j, t)| {
            let seed = base_seed.wrapping_add(t as u64);
            let m = run_match(ctx, &roster[i], &roster[j], rounds, seed)?;
            Ok((i, j, t, m))
        })
        .collect();

    let mut matches: Vec<Vec<Vec<Option<MatchResult<R>>>>> =
        vec![vec![(0..trials).map(|_| None).collect(); n]; n];
    for r in results {
        let (i, j, t, m) = r?;
        matches[i][j][t] = Some(m);
    }

    let mut files = Vec::new();
    if let Some(dir) = out_dir {
        for (i, row) in matches.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                for (t, m) in cell.iter().enumerate() {
                    let m = m.as_ref().unwrap();
                    let name = format!(
                        "{}__r{i}-{}__c{j}-{}__t{t:03}.csv.gz",
                        ctx.compiled.name,
                        sanitize(&roster[i]),
                        sanitize(&roster[j]),
                    );
                    let path = dir.join("raw").join(&name);
                    write_raw_match(&path, m)?;
                    files.push(RawFileEntry {
                        row: i,
                        col: j,
                        trial: t,
                        seed: m.seed,
                        path: format!("raw/{name}"),
                    });
                }
            }
        }
    }

    let cells: Vec<Vec<R>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let sum: R = matches[i][j]
                        .iter()
                        .map(|m| m.as_ref().unwrap().mean_of(Player::P1))
                        .sum();
                    sum / R::from_f64_lossy(trials as f64)
                })
                .collect()
        })
        .collect();
    let row_average: Vec<R> = cells
        .iter()
        .map(|row| {
            let sum: R = row.iter().copied().sum();
            sum / R::from_f64_lossy(n as f64)
        })
        .collect();

    let table = TournamentTable {
        roster: roster.to_vec(),
        cells,
        row_average,
        trials,
        rounds,
    };
    if let Some(dir) = out_dir {
        let manifest = TournamentManifest {
            game: ctx.compiled.name.clone(),
            roster: roster.to_vec(),
            trials,
            rounds,
            base_seed,
            files,
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| GabeError::Config(format!("manifest: {e}")))?;
        fs::write(dir.join("manifest.json"), json)
            .map_err(|e| GabeError::Config(format!("manifest: {e}")))?;
        fs::write(dir.join("tournament.csv"), tournament_csv(&table))
            .map_err(|e| GabeError::Config(format!("tournament.csv: {e}")))?;
        fs::write(dir.join("table.txt"), format_table(&table))
            .map_err(|e| GabeError::Config(format!("table.txt: {e}")))?;
    }
    Ok(table)
}

fn sanitize(spec: &str) -> String {
    spec.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn write_raw_match<R: Real>(path: &Path, m: &MatchResult<R>) -> Result<()> {
    let file = fs::File::create(path)
        .map_err(|e| GabeError::Config(format!("cannot write {path:?}: {e}")))?;
    let mut gz = GzEncoder::new(file, Compression::default());
    let io = |e: std::io::Error| GabeError::Config(format!("write {path:?}: {e}"));
    writeln!(gz, "round,payoff_row,payoff_col").map_err(io)?;
    for (i, (a, b)) in m.payoffs.iter().enumerate() {
        // Full-precision values so aggregates can be recomputed exactly.
        writeln!(gz, "{},{},{}", i + 1, a.to_f64_lossy(), b.to_f64_lossy()).map_err(io)?;
    }
    gz.finish().map_err(io)?;
    Ok(())
}

/// Reads back one raw match file as `(payoff_row, payoff_col)` rows.
pub fn read_raw_match(path: &Path) -> Result<Vec<(f64, f64)>> {
    let file = fs::File::open(path)
        .map_err(|e| GabeError::Config(format!("cannot read {path:?}: {e}")))?;
    let reader = BufReader::new(GzDecoder::new(file));
    let mut rows = Vec::new();
    for (ln, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| GabeError::Config(format!("read {path:?}: {e}")))?;
        if ln == 0 {
            continue; // header
        }
        let mut parts = line.split(',');
        let _round = parts.next();
        let a: f64 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| GabeError::Config(format!("{path:?}: malformed line {}", ln + 1)))?;
        let b: f64 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| GabeError::Config(format!("{path:?}: malformed line {}", ln + 1)))?;
        rows.push((a, b));
    }
    Ok(rows)
}

/// Rounds to six significant digits, then prints the shortest decimal form.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(5 - magnitude);
    format!("{}", (x * factor).round() / factor)
}

/// Tournament CSV: one data row per ordered pairing.
pub fn tournament_csv<R: Real>(table: &TournamentTable<R>) -> String {
    let mut out = String::from("row_agent,col_agent,trials,rounds,mean_payoff\n");
    for (i, row) in table.cells.iter().enumerate() {
        for (j, &cell) in row.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                table.roster[i],
                table.roster[j],
                table.trials,
                table.rounds,
                fmt_sig6(cell.to_f64_lossy()),
            ));
        }
    }
    out
}

/// Fixed-width text rendering with the row-average column.
pub fn format_table<R: Real>(table: &TournamentTable<R>) -> String {
    let short: Vec<String> = table
        .roster
        .iter()
        .map(|s| {
            let base = s.split('?').next().unwrap_or(s);
            if base.len() > 10 {
                base[..10].to_string()
            } else {
                base.to_string()
            }
        })
        .collect();
    let mut out = format!("{:<12}", "");
    for name in &short {
        out.push_str(&format!("{name:>11}"));
    }
    out.push_str(&format!("{:>11}\n", "Ave."));
    for (i, row) in table.cells.iter().enumerate() {
        out.push_str(&format!("{:<12}", short[i]));
        for &cell in row {
            out.push_str(&format!("{:>11.2}", cell.to_f64_lossy()));
        }
        out.push_str(&format!(
            "{:>11.2}\n",
            table.row_average[i].to_f64_lossy()
        ));
    }
    out
}

/// One agent's payoff-over-time curve.
#[derive(Debug, Clone)]
pub struct AgentSeries<R> {
    pub spec: String,
    /// Mean payoff per round index, averaged over associates and trials.
    pub series: Vec<R>,
}

/// Runs fresh matches of every roster agent (as seat one) against every
/// associate and averages the per-round payoffs over associates and trials.
pub fn timeseries_report<R: Real>(
    ctx: &GameContext<R>,
    roster: &[String],
    horizon: usize,
    trials: usize,
    base_seed: u64,
) -> Result<Vec<AgentSeries<R>>> {
    assert!(horizon >= 1, "horizon must be at least 1");
    let jobs: Vec<(usize, usize, usize)> = (0..roster.len())
        .flat_map(|f| (0..roster.len()).map(move |a| (f, a)))
        .flat_map(|(f, a)| (0..trials).map(move |t| (f, a, t)))
        .collect();
    let results: Vec<Result<(usize, MatchResult<R>)>> = jobs
        .par_iter()
        .map(|&(f, a, t)| {
            let seed = base_seed.wrapping_add(t as u64);
            let m = run_match(ctx, &roster[f], &roster[a], horizon, seed)?;
            Ok((f, m))
        })
        .collect();

    let mut sums: Vec<Vec<R>> = vec![vec![R::zero(); horizon]; roster.len()];
    let mut counts = vec![0usize; roster.len()];
    for r in results {
        let (f, m) = r?;
        for (round, &(p, _)) in m.payoffs.iter().enumerate() {
            sums[f][round] = sums[f][round] + p;
        }
        counts[f] += 1;
    }
    Ok(roster
        .iter()
        .enumerate()
        .map(|(f, spec)| AgentSeries {
            spec: spec.clone(),
            series: sums[f]
                .iter()
                .map(|&s| s / R::from_f64_lossy(counts[f] as f64))
                .collect(),
        })
        .collect())
}

/// Rebuilds per-agent time series from a tournament's persisted raw files.
/// The horizon clamps to the stored round count.
pub fn timeseries_from_raw(dir: &Path, horizon: usize) -> Result<Vec<AgentSeries<f64>>> {
    let manifest = read_manifest(dir)?;
    let horizon = horizon.min(manifest.rounds).max(
        // An empty tournament yields an empty series rather than an error.
        if manifest.rounds == 0 { 0 } else { 1 },
    );
    let n = manifest.roster.len();
    let mut sums: Vec<Vec<f64>> = vec![vec![0.0; horizon]; n];
    let mut counts = vec![0usize; n];
    for entry in &manifest.files {
        let rows = read_raw_match(&dir.join(&entry.path))?;
        for (round, &(p, _)) in rows.iter().take(horizon).enumerate() {
            sums[entry.row][round] += p;
        }
        counts[entry.row] += 1;
    }
    Ok(manifest
        .roster
        .iter()
        .enumerate()
        .map(|(f, spec)| AgentSeries {
            spec: spec.clone(),
            series: sums[f].iter().map(|&s| s / counts[f] as f64).collect(),
        })
        .collect())
}

pub fn read_manifest(dir: &Path) -> Result<TournamentManifest> {
    let text = fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| GabeError::Config(format!("no manifest in {dir:?}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| GabeError::Config(format!("manifest: {e}")))
}

/// Recomputes a tournament table from its persisted raw files; used to
/// verify aggregation exactness.
pub fn table_from_raw(dir: &Path) -> Result<TournamentTable<f64>> {
    let manifest = read_manifest(dir)?;
    let n = manifest.roster.len();
    let mut cell_sums = vec![vec![0.0f64; n]; n];
    let mut ordered: Vec<Vec<Vec<Option<PathBuf>>>> =
        vec![vec![(0..manifest.trials).map(|_| None).collect(); n]; n];
    for entry in &manifest.files {
        ordered[entry.row][entry.col][entry.trial] = Some(dir.join(&entry.path));
    }
    for (i, row) in ordered.iter().enumerate() {
        for (j, trials) in row.iter().enumerate() {
            for path in trials {
                let path = path
                    .as_ref()
                    .ok_or_else(|| GabeError::Config("manifest is missing a trial".into()))?;
                let rows = read_raw_match(path)?;
                let mean = if rows.is_empty() {
                    0.0
                } else {
                    rows.iter().map(|r| r.0).sum::<f64>() / rows.len() as f64
                };
                cell_sums[i][j] += mean;
            }
        }
    }
    let cells: Vec<Vec<f64>> = cell_sums
        .iter()
        .map(|row| row.iter().map(|&s| s / manifest.trials as f64).collect())
        .collect();
    let row_average = cells
        .iter()
        .map(|row| row.iter().sum::<f64>() / n as f64)
        .collect();
    Ok(TournamentTable {
        roster: manifest.roster,
        cells,
        row_average,
        trials: manifest.trials,
        rounds: manifest.rounds,
    })
}

/// Time-series CSV in the documented schema; rounds are 1-based.
pub fn timeseries_csv<R: Real>(series: &[AgentSeries<R>]) -> String {
    let mut out = String::from("agent,round,mean_payoff\n");
    for s in series {
        for (i, &v) in s.series.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                s.spec,
                i + 1,
                fmt_sig6(v.to_f64_lossy())
            ));
        }
    }
    out
}
