//! Benchmark harness: per-trial scores, trimmed aggregation and report I/O.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{run_episode, EnvConfig, EpisodeMode, SchedulePolicy};
use crate::error::{AdpError, Result};
use crate::navgrid::shortest_path_length;
use crate::rl::Mlp;
use crate::rng;
use crate::schedule::{ddp_schedule, fixed_schedule, incremental_schedule, ScheduleParams};
use crate::train::PreparedWorld;
use crate::world::OccupancyWorld;

/// Traversal time charged to any trial that does not succeed.
pub const FAILURE_TIME: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreInput {
    pub success: bool,
    pub actual_time: f64,
    pub optimal_time: f64,
}

/// `OT / clamp(AT, 2·OT, 8·OT)` for successes, 0 otherwise.
pub fn barn_score(input: &ScoreInput) -> Result<f64> {
    let ScoreInput {
        success,
        actual_time,
        optimal_time,
    } = *input;
    if !(actual_time > 0.0 && actual_time.is_finite()) || !(optimal_time > 0.0 && optimal_time.is_finite()) {
        return Err(AdpError::InvalidInput(format!(
            "times must be positive and finite (AT={actual_time}, OT={optimal_time})"
        )));
    }
    if !success {
        return Ok(0.0);
    }
    Ok(optimal_time / actual_time.clamp(2.0 * optimal_time, 8.0 * optimal_time))
}

/// Shortest inflated-grid path from start to goal, traversed at `v_max`.
pub fn optimal_time(world: &OccupancyWorld, v_max: f64, robot_radius: f64) -> Result<f64> {
    if !(v_max > 0.0) {
        return Err(AdpError::InvalidInput(format!("v_max must be positive, got {v_max}")));
    }
    Ok(shortest_path_length(world, robot_radius)? / v_max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub run: usize,
    pub success: bool,
    pub collided: bool,
    pub timeout: bool,
    /// Actual time for successes, [`FAILURE_TIME`] otherwise.
    pub time: f64,
    pub score: f64,
}

fn rank_order(a: &Trial, b: &Trial) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.time.total_cmp(&b.time))
        .then(a.run.cmp(&b.run))
}

/// Drops the `trim` best and `trim` worst trials, ranking by score
/// (descending), then time (ascending), then run index. Retained trials keep
/// their input order.
pub fn trim_trials(trials: &[Trial], trim: usize) -> Result<Vec<Trial>> {
    if trials.len() <= 2 * trim {
        return Err(AdpError::Config(format!(
            "{} trials cannot lose {} from each end",
            trials.len(),
            trim
        )));
    }
    let hi = trials.len() - trim;
    Ok(trials
        .iter()
        .filter(|t| {
            let rank = trials.iter().filter(|o| rank_order(o, t).is_lt()).count();
            rank >= trim && rank < hi
        })
        .copied()
        .collect())
}

/// One report line: a world, or the aggregate (`world_seed = "ALL"`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub world_seed: String,
    pub method: String,
    pub v_max: f64,
    pub success_pct: f64,
    pub avg_time_s: f64,
    pub avg_score: f64,
    pub collision_pct: f64,
    pub timeout_pct: f64,
}

pub const AGGREGATE_SEED: &str = "ALL";

impl ReportRow {
    fn from_trials(world_seed: String, method: &str, v_max: f64, trials: &[Trial]) -> Self {
        let n = trials.len().max(1) as f64;
        let pct = |f: fn(&Trial) -> bool| 100.0 * trials.iter().filter(|t| f(t)).count() as f64 / n;
        Self {
            world_seed,
            method: method.to_string(),
            v_max,
            success_pct: pct(|t| t.success),
            avg_time_s: trials.iter().map(|t| t.time).sum::<f64>() / n,
            avg_score: trials.iter().map(|t| t.score).sum::<f64>() / n,
            collision_pct: pct(|t| t.collided),
            timeout_pct: pct(|t| t.timeout),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
}

impl BenchmarkReport {
    pub fn aggregate(&self) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.world_seed == AGGREGATE_SEED)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| AdpError::Parse(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| AdpError::Parse(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| AdpError::Parse(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| AdpError::Parse(e.to_string()))?;
        Ok(Self { rows })
    }
}

/// Per-world retained trials after trimming, and the report over them.
pub fn summarize(method: &str, v_max: f64, per_world: &[(u64, Vec<Trial>)], trim: usize) -> Result<BenchmarkReport> {
    let mut rows = Vec::with_capacity(per_world.len() + 1);
    let mut pooled = Vec::new();
    for (seed, trials) in per_world {
        let kept = trim_trials(trials, trim)?;
        rows.push(ReportRow::from_trials(seed.to_string(), method, v_max, &kept));
        pooled.extend(kept);
    }
    rows.push(ReportRow::from_trials(
        AGGREGATE_SEED.to_string(),
        method,
        v_max,
        &pooled,
    ));
    Ok(BenchmarkReport { rows })
}

/// A planner configuration plus a schedule source, under a report label.
#[derive(Clone, Debug)]
pub struct MethodSpec {
    pub label: String,
    pub policy: SchedulePolicy,
    pub env: EnvConfig,
}

impl MethodSpec {
    /// Built-in fixed-schedule methods: `ddp` (T=2, N=20, p=1.7), `uniform`
    /// (T=2, N=20 equal intervals) and `inc` (the `ddp` intervals reversed).
    pub fn builtin(name: &str, env: EnvConfig) -> Result<Self> {
        let params = ScheduleParams {
            horizon: 2.0,
            steps: 20,
            power: 1.7,
            alpha: 0.0,
        };
        let schedule = match name {
            "ddp" => ddp_schedule(params.horizon, params.steps, params.power)?,
            "uniform" => fixed_schedule(params.horizon, params.steps)?,
            "inc" => incremental_schedule(&params)?,
            other => {
                return Err(AdpError::Config(format!(
                    "unknown method `{other}` (expected ddp, uniform or inc)"
                )))
            }
        };
        Ok(Self {
            label: name.to_string(),
            policy: SchedulePolicy::Fixed(schedule),
            env,
        })
    }

    pub fn learned(label: &str, actor: Mlp, env: EnvConfig) -> Self {
        Self {
            label: label.to_string(),
            policy: SchedulePolicy::Learned(Arc::new(actor)),
            env,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    pub runs_per_world: usize,
    pub trim: usize,
    pub v_max: f64,
    pub seed: u64,
    /// Seeded start-pose perturbation per run (metres, radians), replacing
    /// the method's own; the only source of run-to-run variation for DWA.
    pub start_jitter_pos: f64,
    pub start_jitter_yaw: f64,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            runs_per_world: 20,
            trim: 5,
            v_max: 1.5,
            seed: 0,
            start_jitter_pos: 0.03,
            start_jitter_yaw: 0.15,
        }
    }
}

/// Runs `runs_per_world` seeded episodes of `method` on every world with the
/// planner's linear speed limit set to `v_max` and the settings' start
/// jitter, then trims and aggregates.
pub fn run_benchmark(
    method: &MethodSpec,
    worlds: &[PreparedWorld],
    settings: &BenchSettings,
) -> Result<BenchmarkReport> {
    if settings.runs_per_world <= 2 * settings.trim {
        return Err(AdpError::Config(format!(
            "runs_per_world ({}) must exceed twice the trim ({})",
            settings.runs_per_world, settings.trim
        )));
    }
    if worlds.is_empty() {
        return Err(AdpError::Config("benchmark needs at least one world".into()));
    }
    let mut env_cfg = method.env.clone();
    env_cfg.planner.limits.v_max = settings.v_max;
    env_cfg.start_jitter_pos = settings.start_jitter_pos;
    env_cfg.start_jitter_yaw = settings.start_jitter_yaw;
    env_cfg.validate()?;
    let radius = env_cfg.planner.robot_radius;
    let ots: Vec<f64> = worlds
        .iter()
        .map(|w| optimal_time(&w.world, settings.v_max, radius))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..worlds.len())
        .flat_map(|w| (0..settings.runs_per_world).map(move |r| (w, r)))
        .collect();
    let trials: Vec<Trial> = jobs
        .par_iter()
        .map(|&(w, run)| {
            let mut env = worlds[w].env(&env_cfg)?;
            let seed = rng::derive_seed(rng::derive_seed(settings.seed, worlds[w].world.seed()), run as u64);
            let rec = run_episode(&mut env, &method.policy, EpisodeMode::Eval, seed)?.record;
            let time = if rec.success { rec.traversal_time } else { FAILURE_TIME };
            let score = barn_score(&ScoreInput {
                success: rec.success,
                actual_time: time,
                optimal_time: ots[w],
            })?;
            Ok(Trial {
                run,
                success: rec.success,
                collided: rec.collided,
                timeout: rec.timeout,
                time,
                score,
            })
        })
        .collect::<Result<_>>()?;
    let per_world: Vec<(u64, Vec<Trial>)> = trials
        .chunks(settings.runs_per_world)
        .zip(worlds)
        .map(|(chunk, w)| (w.world.seed(), chunk.to_vec()))
        .collect();
    summarize(&method.label, settings.v_max, &per_world, settings.trim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Point2, Pose};
    use proptest::prelude::*;

    fn score(success: bool, at: f64, ot: f64) -> f64 {
        barn_score(&ScoreInput {
            success,
            actual_time: at,
            optimal_time: ot,
        })
        .unwrap()
    }

    #[test]
    fn anchor_scores() {
        assert_eq!(score(false, 3.0, 1.0), 0.0);
        assert_eq!(score(true, 10.0, 5.0), 0.5);
        assert_eq!(score(true, 1.0, 5.0), 0.5);
        assert_eq!(score(true, 50.0, 5.0), 0.125);
        assert_eq!(score(true, 100.0, 10.0), 0.125);
        assert!(barn_score(&ScoreInput {
            success: true,
            actual_time: 0.0,
            optimal_time: 1.0
        })
        .is_err());
        assert!(barn_score(&ScoreInput {
            success: false,
            actual_time: 1.0,
            optimal_time: -1.0
        })
        .is_err());
    }

    #[test]
    fn optimal_time_on_open_world() {
        let w = OccupancyWorld::empty(100, 100, 0.1, Pose::new(2.05, 5.05, 0.0), Point2::new(8.05, 5.05)).unwrap();
        let ot = optimal_time(&w, 1.5, 0.3).unwrap();
        assert!((ot - 4.0).abs() < 1e-9);
        assert!((optimal_time(&w, 3.0, 0.3).unwrap() - ot / 2.0).abs() < 1e-12);
    }

    fn trial(run: usize, score: f64, time: f64) -> Trial {
        Trial {
            run,
            success: score > 0.0,
            collided: false,
            timeout: score == 0.0,
            time,
            score,
        }
    }

    #[test]
    fn half_and_half_trims_to_quarter() {
        let trials: Vec<Trial> = (0..20)
            .map(|i| {
                if i % 2 == 0 {
                    trial(i, 0.5, 10.0)
                } else {
                    trial(i, 0.0, FAILURE_TIME)
                }
            })
            .collect();
        let kept = trim_trials(&trials, 5).unwrap();
        assert_eq!(kept.len(), 10);
        let avg = kept.iter().map(|t| t.score).sum::<f64>() / 10.0;
        assert_eq!(avg, 0.25);
    }

    #[test]
    fn identical_trials_are_unaffected() {
        let trials: Vec<Trial> = (0..20).map(|i| trial(i, 0.3, 7.0)).collect();
        let report = summarize("m", 1.5, &[(1, trials.clone())], 5).unwrap();
        let row = &report.rows[0];
        assert!((row.avg_score - 0.3).abs() < 1e-12);
        assert_eq!(row.avg_time_s, 7.0);
        assert_eq!(trim_trials(&trials, 5).unwrap().len(), 10);
    }

    #[test]
    fn too_few_runs_is_a_config_error() {
        let trials: Vec<Trial> = (0..10).map(|i| trial(i, 0.3, 7.0)).collect();
        assert!(matches!(trim_trials(&trials, 5), Err(AdpError::Config(_))));
    }

    #[test]
    fn csv_round_trip_and_row_count() {
        let per_world = vec![
            (
                3,
                (0..20)
                    .map(|i| trial(i, 0.1 + i as f64 / 100.0, 9.0 + i as f64 / 7.0))
                    .collect::<Vec<_>>(),
            ),
            (9, (0..20).map(|i| trial(i, 0.0, FAILURE_TIME)).collect()),
        ];
        let report = summarize("ddp", 1.5, &per_world, 5).unwrap();
        assert_eq!(report.rows.len(), 3);
        let text = report.to_csv().unwrap();
        assert!(
            text.starts_with("world_seed,method,v_max,success_pct,avg_time_s,avg_score,collision_pct,timeout_pct\n")
        );
        assert_eq!(BenchmarkReport::from_csv(&text).unwrap(), report);
        assert_eq!(report.aggregate().unwrap().world_seed, "ALL");
    }

    proptest! {
        #[test]
        fn score_range(success: bool, at in 1e-3f64..1e4, ot in 1e-3f64..1e3) {
            let s = score(success, at, ot);
            prop_assert!(s == 0.0 || (0.125 - 1e-15..=0.5 + 1e-15).contains(&s));
            prop_assert_eq!(s == 0.0, !success);
        }

        #[test]
        fn aggregates_ignore_trial_order(scores in proptest::collection::vec((0usize..4, 1u32..60), 20), rot in 0usize..20) {
            let trials: Vec<Trial> = scores.iter().enumerate()
                .map(|(i, &(s, t))| trial(i, [0.0, 0.125, 0.3, 0.5][s], t as f64)).collect();
            let mut shuffled = trials.clone();
            shuffled.rotate_left(rot);
            shuffled.reverse();
            let a = summarize("m", 1.0, &[(0, trials)], 5).unwrap();
            let b = summarize("m", 1.0, &[(0, shuffled)], 5).unwrap();
            prop_assert!((a.rows[0].avg_score - b.rows[0].avg_score).abs() < 1e-12);
            prop_assert!((a.rows[0].avg_time_s - b.rows[0].avg_time_s).abs() < 1e-12);
            prop_assert_eq!(a.rows[0].success_pct, b.rows[0].success_pct);
        }
    }
}
