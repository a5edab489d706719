use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dqlab::diagnostics::{diagnose as run_diagnostics, series_csv, DiagnoseOptions, DiagnosticsReport};
use dqlab::envs::{stationary_distributions, value_iteration, FrozenKernel, Mdp};
use dqlab::measure::{measure_distance, stationarity_report, tail_estimate, OccupationMeasure, TimeAxis};
use dqlab::network::Checkpoint;
use dqlab::trainer::{train as run_training, ReplayConfig, RunStatus, TrainConfig, TrainOutput, TrainRecord};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{config_hash, hex, load_diagnose_options, LoadedConfig, RunFile};
use crate::manifest::{run_dir, write_json, write_text, Artifacts, ManifestStatus, RunManifest, MANIFEST_FILE};
use crate::{CommonArgs, InputError, Outcome};

const CONFIG_FILE: &str = "config.json";
const MDP_FILE: &str = "mdp.json";
const RECORD_FILE: &str = "record.csv";
const SERIES_ROWS: usize = 2000;
const ORACLE_TOL: f64 = 1e-12;
const ORACLE_MAX_ITERS: usize = 1_000_000;
const STATIONARY_TOL: f64 = 1e-10;

fn require_config(args: &CommonArgs, command: &str) -> Result<PathBuf> {
    args.config
        .clone()
        .ok_or_else(|| InputError::new(format!("{command} needs --config <path>")).into())
}

fn reject_seed(args: &CommonArgs, command: &str) -> Result<()> {
    match args.seed {
        Some(_) => Err(InputError::new(format!("--seed does not apply to {command}")).into()),
        None => Ok(()),
    }
}

/// Creates an empty run directory, replacing an earlier run with the same id.
fn prepare_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        if dir.join(MANIFEST_FILE).exists() {
            std::fs::remove_dir_all(dir).with_context(|| format!("cannot clear {}", dir.display()))?;
        } else if std::fs::read_dir(dir)?.next().is_some() {
            return Err(InputError::new(format!("{} exists and is not a run directory", dir.display())).into());
        }
    }
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn default_run_id(stem: &str, tag: &str, seed: u64, hash: &str) -> String {
    format!("{stem}{tag}-seed{seed}-{}", &hash[..8])
}

fn checkpoint_name(step: u64) -> String {
    format!("checkpoints/step-{step:010}.json")
}

/// Report wrapper carrying the producing config hash.
#[derive(Serialize)]
struct Stamped<'a, T> {
    run_id: &'a str,
    config_hash: &'a str,
    #[serde(flatten)]
    body: T,
}

pub fn train(args: &CommonArgs) -> Result<Outcome> {
    let path = require_config(args, "train")?;
    let loaded = LoadedConfig::load(&path, args.seed)?;
    let hash = loaded.hash();
    let seed = loaded.file.run.seed;
    let run_id = args.run.clone().unwrap_or_else(|| default_run_id(&loaded.stem, "", seed, &hash));
    let dir = run_dir(&args.out, &run_id)?;
    prepare_dir(&dir)?;
    write_json(&dir.join(CONFIG_FILE), &loaded.file)?;
    write_text(&dir.join(MDP_FILE), &loaded.mdp.to_json_string())?;

    let mut manifest = RunManifest {
        run_id: run_id.clone(),
        command: "train".into(),
        config_hash: hash,
        seed: Some(seed),
        status: ManifestStatus::Failed,
        detail: None,
        artifacts: Artifacts {
            config: Some(CONFIG_FILE.into()),
            mdp: Some(MDP_FILE.into()),
            ..Artifacts::default()
        },
    };
    let out = match run_training(&loaded.mdp, &loaded.file.train_config()) {
        Ok(out) => out,
        Err(e) => {
            manifest.detail = Some(e.to_string());
            manifest.save(&dir)?;
            return Err(e.into());
        }
    };
    write_text(&dir.join(RECORD_FILE), &out.record.to_csv_string())?;
    manifest.artifacts.record = Some(RECORD_FILE.into());
    for ck in &out.checkpoints {
        let name = checkpoint_name(ck.step);
        write_text(&dir.join(&name), &ck.to_json())?;
        manifest.artifacts.checkpoints.push(name);
    }
    let outcome = match &out.status {
        RunStatus::Completed => {
            manifest.status = ManifestStatus::Completed;
            Outcome::Success
        }
        RunStatus::Diverged { step, reason } => {
            manifest.status = ManifestStatus::Diverged;
            manifest.detail = Some(format!("diverged at step {step}: {reason}"));
            eprintln!("run diverged at step {step}: {reason}");
            Outcome::Diverged
        }
    };
    manifest.save(&dir)?;
    println!("{}", dir.display());
    Ok(outcome)
}

/// Artifacts of a completed training run, reloaded from its directory.
struct StoredRun {
    dir: PathBuf,
    manifest: RunManifest,
    file: RunFile,
    mdp: Mdp,
    record: TrainRecord,
    checkpoints: Vec<Checkpoint>,
}

impl StoredRun {
    fn load(out: &Path, run_id: &str) -> Result<Self> {
        let dir = run_dir(out, run_id)?;
        let manifest = RunManifest::load(&dir)?;
        if manifest.command != "train" || manifest.status != ManifestStatus::Completed {
            return Err(InputError::new(format!(
                "run `{run_id}` is a {} run with status {:?}; diagnose needs a completed training run",
                manifest.command, manifest.status
            ))
            .into());
        }
        let missing = |what: &str| InputError::new(format!("run `{run_id}` lists no {what}"));
        let config_path = dir.join(manifest.artifacts.config.as_deref().ok_or_else(|| missing("config"))?);
        let text = std::fs::read_to_string(&config_path)
            .map_err(|e| InputError::new(format!("{}: {e}", config_path.display())))?;
        let file: RunFile =
            serde_json::from_str(&text).map_err(|e| InputError::new(format!("{}: {e}", config_path.display())))?;
        let mdp_path = dir.join(manifest.artifacts.mdp.as_deref().ok_or_else(|| missing("MDP"))?);
        let mdp = Mdp::load(&mdp_path).map_err(InputError::from_core)?;
        if config_hash(&file, &mdp) != manifest.config_hash {
            return Err(InputError::new(format!("run `{run_id}`: stored config does not match the manifest hash")).into());
        }
        let record_path = dir.join(manifest.artifacts.record.as_deref().ok_or_else(|| missing("record"))?);
        let input = File::open(&record_path).map_err(|e| InputError::new(format!("{}: {e}", record_path.display())))?;
        let record = TrainRecord::read_csv(input, file.train_config().mode()).map_err(InputError::from_core)?;
        let checkpoints = manifest
            .artifacts
            .checkpoints
            .iter()
            .map(|name| Checkpoint::load(dir.join(name)).map_err(InputError::from_core))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self {
            dir,
            manifest,
            file,
            mdp,
            record,
            checkpoints,
        })
    }
}

#[derive(Serialize)]
struct DiagnoseBody<'a> {
    options: &'a DiagnoseOptions,
    passed: bool,
    report: &'a DiagnosticsReport,
}

pub fn diagnose(args: &CommonArgs) -> Result<Outcome> {
    reject_seed(args, "diagnose")?;
    let run_id = args
        .run
        .as_deref()
        .ok_or_else(|| InputError::new("diagnose needs --run <id>"))?;
    let mut run = StoredRun::load(&args.out, run_id)?;
    let options = match &args.config {
        Some(path) => load_diagnose_options(path)?,
        None => run.file.diagnose.clone(),
    };
    let cfg = run.file.train_config();
    let topology = cfg.topology(&run.mdp).map_err(InputError::from_core)?;
    let diag = run_diagnostics(&topology, &run.mdp, &cfg.policy, &run.record, &run.checkpoints, &options)?;
    let report = &diag.report;

    let hash = run.manifest.config_hash.clone();
    let mut written = Vec::new();
    let mut emit = |name: String, text: String| -> Result<()> {
        write_text(&run.dir.join(&name), &text)?;
        written.push(name);
        Ok(())
    };
    let body = DiagnoseBody {
        options: &options,
        passed: report.passed(),
        report,
    };
    let stamped = Stamped {
        run_id,
        config_hash: &hash,
        body,
    };
    emit("diagnostics/report.json".into(), serde_json::to_string_pretty(&stamped)? + "\n")?;
    let times = diag.axis.times();
    emit("diagnostics/noise.csv".into(), series_csv(times, &diag.noise.partial_sums, SERIES_ROWS))?;
    for (trace, named) in diag.test_functions.iter().zip(&report.test_functions) {
        emit(format!("diagnostics/xi_{}.csv", named.id), series_csv(times, &trace.partial_sums, SERIES_ROWS))?;
    }
    for tr in &report.tracking {
        let (t, d): (Vec<f64>, Vec<f64>) = tr.series.iter().copied().unzip();
        emit(format!("diagnostics/tracking_{}.csv", tr.anchor), series_csv(&t, &d, SERIES_ROWS))?;
    }
    let (t, g): (Vec<f64>, Vec<f64>) = report
        .gradient
        .per_checkpoint
        .iter()
        .map(|&(step, norm)| (diag.axis.t(step as usize), norm))
        .unzip();
    emit("diagnostics/gradient.csv".into(), series_csv(&t, &g, SERIES_ROWS))?;

    run.manifest.add_reports(written);
    run.manifest.save(&run.dir)?;
    for check in &report.checks {
        println!(
            "{} {}: {:.4e} (threshold {:.4e}){}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.value,
            check.threshold,
            if check.detail.is_empty() { String::new() } else { format!(" {}", check.detail) },
        );
    }
    if report.passed() {
        Ok(Outcome::Success)
    } else {
        for check in report.failures() {
            eprintln!("property failed: {} ({})", check.name, check.detail);
        }
        Ok(Outcome::PropertyFailure)
    }
}

#[derive(Serialize)]
struct OracleBody<'a> {
    q_star: &'a [Vec<f64>],
    v_star: &'a [f64],
    pi_star: &'a [usize],
    residual: f64,
    iterations: usize,
}

#[derive(Serialize)]
struct StationaryBody<'a> {
    policy: &'a [usize],
    count: usize,
    distributions: &'a [Vec<f64>],
}

fn load_mdp(path: &Path) -> Result<(Mdp, String)> {
    let stem = path.file_stem().map_or_else(|| "mdp".into(), |s| s.to_string_lossy().into_owned());
    if path.extension().is_some_and(|e| e == "json") {
        Ok((Mdp::load(path).map_err(InputError::from_core)?, stem))
    } else {
        Ok((LoadedConfig::load(path, None)?.mdp, stem))
    }
}

pub fn oracle(args: &CommonArgs) -> Result<Outcome> {
    reject_seed(args, "oracle")?;
    let path = require_config(args, "oracle")?;
    let (mdp, stem) = load_mdp(&path)?;
    let mdp_json = mdp.to_json_string();
    let hash = hex(&Sha256::digest(mdp_json.as_bytes()));
    let run_id = args.run.clone().unwrap_or_else(|| format!("oracle-{stem}"));
    let dir = run_dir(&args.out, &run_id)?;
    prepare_dir(&dir)?;

    let sol = value_iteration(&mdp, ORACLE_TOL, ORACLE_MAX_ITERS)?;
    let kernel = FrozenKernel::from_actions(&mdp, &sol.pi_star)?;
    let dists = stationary_distributions(&kernel, STATIONARY_TOL)?;

    write_text(&dir.join(MDP_FILE), &mdp_json)?;
    let mut q_csv = String::from("state");
    for a in 0..mdp.num_actions() {
        q_csv.push_str(&format!(",q_{a}"));
    }
    q_csv.push('\n');
    let (mut v_csv, mut pi_csv) = (String::from("state,v\n"), String::from("state,action\n"));
    for x in 0..mdp.num_states() {
        q_csv.push_str(&x.to_string());
        for q in &sol.q_star[x] {
            q_csv.push_str(&format!(",{q}"));
        }
        q_csv.push('\n');
        v_csv.push_str(&format!("{x},{}\n", sol.v_star[x]));
        pi_csv.push_str(&format!("{x},{}\n", sol.pi_star[x]));
    }
    write_text(&dir.join("q_star.csv"), &q_csv)?;
    write_text(&dir.join("v_star.csv"), &v_csv)?;
    write_text(&dir.join("pi_star.csv"), &pi_csv)?;
    let oracle_body = OracleBody {
        q_star: &sol.q_star,
        v_star: &sol.v_star,
        pi_star: &sol.pi_star,
        residual: sol.residual,
        iterations: sol.iterations,
    };
    write_json(&dir.join("oracle.json"), &Stamped { run_id: &run_id, config_hash: &hash, body: oracle_body })?;
    let stationary_body = StationaryBody {
        policy: &sol.pi_star,
        count: dists.len(),
        distributions: &dists,
    };
    write_json(&dir.join("stationary.json"), &Stamped { run_id: &run_id, config_hash: &hash, body: stationary_body })?;

    let manifest = RunManifest {
        run_id,
        command: "oracle".into(),
        config_hash: hash,
        seed: None,
        status: ManifestStatus::Completed,
        detail: None,
        artifacts: Artifacts {
            mdp: Some(MDP_FILE.into()),
            reports: ["oracle.json", "pi_star.csv", "q_star.csv", "stationary.json", "v_star.csv"]
                .map(String::from)
                .to_vec(),
            ..Artifacts::default()
        },
    };
    manifest.save(&dir)?;
    println!("{}", dir.display());
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct VariantSummary {
    replay: ReplayConfig,
    status: RunStatus,
    support_size: usize,
    entropy: f64,
    stationarity_gap: f64,
    marginal: Vec<f64>,
}

#[derive(Serialize)]
struct CompareBody {
    window: f64,
    online: VariantSummary,
    replay: VariantSummary,
    /// Total variation between the two tail measures on state-action pairs.
    tv_distance: f64,
    /// Total variation between their state marginals.
    marginal_tv_distance: f64,
    replay_entropy_at_least_online: bool,
}

fn summarize(mdp: &Mdp, cfg: &TrainConfig, out: &TrainOutput, window: f64) -> Result<(VariantSummary, OccupationMeasure)> {
    let axis = TimeAxis::from_record(&out.record)?;
    let tail = tail_estimate(&out.record, &axis, mdp, window)?;
    let stationarity = stationarity_report(&out.record, &out.checkpoints, &out.topology, mdp, &cfg.policy, window)?;
    Ok((
        VariantSummary {
            replay: cfg.replay,
            status: out.status.clone(),
            support_size: tail.support_size(),
            entropy: tail.entropy(),
            stationarity_gap: stationarity.gap,
            marginal: tail.marginal().mass,
        },
        tail,
    ))
}

pub fn replay_compare(args: &CommonArgs) -> Result<Outcome> {
    let path = require_config(args, "replay-compare")?;
    let loaded = LoadedConfig::load(&path, args.seed)?;
    let hash = loaded.hash();
    let seed = loaded.file.run.seed;
    let run_id = args.run.clone().unwrap_or_else(|| default_run_id(&loaded.stem, "-compare", seed, &hash));
    let dir = run_dir(&args.out, &run_id)?;
    prepare_dir(&dir)?;
    write_json(&dir.join(CONFIG_FILE), &loaded.file)?;
    write_text(&dir.join(MDP_FILE), &loaded.mdp.to_json_string())?;

    let replay_cfg = loaded.file.train_config();
    let mut online_cfg = replay_cfg.clone();
    online_cfg.replay = ReplayConfig::disabled();
    let window = loaded.file.diagnose.window;
    let online_out = run_training(&loaded.mdp, &online_cfg)?;
    let replay_out = run_training(&loaded.mdp, &replay_cfg)?;
    let diverged = [&online_out, &replay_out].iter().any(|o| o.status != RunStatus::Completed);
    if diverged {
        eprintln!("at least one variant diverged; no comparison");
    }
    let outcome = if diverged { Outcome::Diverged } else { Outcome::Success };
    let mut manifest = RunManifest {
        run_id: run_id.clone(),
        command: "replay-compare".into(),
        config_hash: hash.clone(),
        seed: Some(seed),
        status: if diverged { ManifestStatus::Diverged } else { ManifestStatus::Completed },
        detail: None,
        artifacts: Artifacts {
            config: Some(CONFIG_FILE.into()),
            mdp: Some(MDP_FILE.into()),
            ..Artifacts::default()
        },
    };
    if !diverged {
        let (online, online_tail) = summarize(&loaded.mdp, &online_cfg, &online_out, window)?;
        let (replay, replay_tail) = summarize(&loaded.mdp, &replay_cfg, &replay_out, window)?;
        let marginal_tv = online_tail.marginal().distance(&replay_tail.marginal())?;
        let body = CompareBody {
            window,
            tv_distance: measure_distance(&online_tail, &replay_tail)?,
            marginal_tv_distance: marginal_tv,
            replay_entropy_at_least_online: replay.entropy >= online.entropy,
            online,
            replay,
        };
        println!(
            "support {} vs {}, entropy {:.6} vs {:.6} (online vs replay), TV {:.3e}",
            body.online.support_size, body.replay.support_size, body.online.entropy, body.replay.entropy, body.tv_distance
        );
        write_json(&dir.join("compare.json"), &Stamped { run_id: &run_id, config_hash: &hash, body })?;
        manifest.artifacts.reports.push("compare.json".into());
    }
    manifest.save(&dir)?;
    println!("{}", dir.display());
    Ok(outcome)
}
