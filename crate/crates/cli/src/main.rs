//! `fairaudit` — fairness audits for tabular binary classifiers.
//!
//! Subcommands wrap the library operations one-to-one; `audit` runs the
//! whole pipeline from a JSON config. Exit codes: 0 = satisfied, 1 =
//! usage/runtime error, 2 = fairness gaps above tolerance (or drift
//! triggered), 3 = mitigation infeasible.

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use fairaudit_core::dataset::{self, MissingPolicy};
use fairaudit_core::pipeline::{
    self, EXIT_ERROR, EXIT_GAPS_ABOVE_TOLERANCE, EXIT_INFEASIBLE, EXIT_SATISFIED,
};
use fairaudit_core::selector::{self, NodeId, SelectorThresholds};
use fairaudit_core::{audit, correlation, metrics, mitigate, model, report, synth, Criterion};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fairaudit", version, about = "Fairness audits for tabular binary classifiers")]
struct Cli {
    /// Emit errors as JSON on stderr.
    #[arg(long, global = true)]
    json_errors: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long = "in")]
    input: PathBuf,
    /// Schema sidecar JSON.
    #[arg(long)]
    schema: PathBuf,
    /// Missing-feature policy: impute or drop_row.
    #[arg(long, default_value = "impute")]
    missing_policy: String,
}

impl DataArgs {
    fn load(&self) -> anyhow::Result<(fairaudit_core::Dataset, dataset::LoadLog)> {
        let schema = dataset::load_schema_file(&self.schema)?;
        let policy = match self.missing_policy.as_str() {
            "impute" => MissingPolicy::Impute,
            "drop_row" => MissingPolicy::DropRow,
            other => return Err(anyhow!("unknown missing policy '{other}'")),
        };
        Ok(dataset::load_csv(&self.input, &schema, policy)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate and ingest a CSV, reporting the load log and fingerprint.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        /// Write the ingest summary JSON here (stdout otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlation matrix and proxy flags.
    Corr {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Choose a fairness criterion through the decision tree.
    Select {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.5)]
        tau_threshold: f64,
        /// JSON override file: {"Q1_proxies_exist": "yes", ...}.
        #[arg(long)]
        answers: Option<PathBuf>,
        /// Prompt for each node, showing data-derived defaults.
        #[arg(long)]
        interactive: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the baseline model.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.1)]
        learning_rate: f64,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-4)]
        l2_penalty: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a dataset with a trained model and report group fairness gaps.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        criterion: Criterion,
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Protected attribute for grouping (default: first protected).
        #[arg(long)]
        group_attr: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit per-group threshold policies for a criterion.
    Mitigate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        criterion: Criterion,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long)]
        group_attr: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full audit pipeline from a JSON config.
    Audit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare two audit reports for fairness drift.
    Drift {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        current: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic scenario dataset (CSV + schema sidecar).
    Synth {
        /// hiring_basic, gender_marital, or proxy.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Target rank correlation for the proxy scenario.
        #[arg(long, default_value_t = 0.8)]
        target_tau: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Summarize an audit report for human review.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes (`fairaudit report | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            if cli.json_errors {
                let payload = serde_json::json!({
                    "error": err.to_string(),
                    "chain": err.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
                });
                eprintln!("{payload}");
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}

fn write_json(value: &serde_json::Value, out: Option<&Path>) -> anyhow::Result<()> {
    let text = report::canonical_json(value);
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<i32> {
    match &cli.command {
        Command::Ingest { data, out } => {
            let (ds, log) = data.load()?;
            let summary = serde_json::json!({
                "fingerprint": ds.fingerprint(),
                "rows": ds.n_rows(),
                "columns": ds.n_cols(),
                "load_log": serde_json::to_value(&log)?,
            });
            write_json(&summary, out.as_deref())?;
            Ok(EXIT_SATISFIED)
        }
        Command::Corr {
            data,
            threshold,
            out_dir,
        } => {
            let (ds, _) = data.load()?;
            let matrix = correlation::correlation_matrix(&ds);
            let flags = correlation::flag_proxies(&matrix, ds.schema(), *threshold)?;
            std::fs::create_dir_all(out_dir)?;
            std::fs::write(out_dir.join("correlation_matrix.csv"), matrix.to_csv())?;
            write_json(
                &serde_json::to_value(&flags)?,
                Some(&out_dir.join("proxy_flags.json")),
            )?;
            println!(
                "wrote correlation_matrix.csv and proxy_flags.json ({} flag(s))",
                flags.flags.len()
            );
            Ok(EXIT_SATISFIED)
        }
        Command::Select {
            data,
            tau_threshold,
            answers,
            interactive,
            out,
        } => {
            let (ds, _) = data.load()?;
            let thresholds = SelectorThresholds {
                tau_threshold: *tau_threshold,
                ..Default::default()
            };
            let matrix = correlation::correlation_matrix(&ds);
            let flags = correlation::flag_proxies(&matrix, ds.schema(), *tau_threshold)?;
            let mut overrides: BTreeMap<NodeId, bool> = match answers {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    selector::parse_overrides(&text)?
                }
                None => BTreeMap::new(),
            };
            if *interactive {
                overrides = prompt_overrides(&ds, &flags, &thresholds, overrides)?;
            }
            let answers =
                selector::evaluate_defaults(&ds, &flags, None, &overrides, &thresholds)?;
            let decision = selector::select_criterion(&answers, &thresholds)?;
            eprintln!("{}", selector::explain(&decision));
            write_json(&serde_json::to_value(&decision)?, out.as_deref())?;
            Ok(EXIT_SATISFIED)
        }
        Command::Train {
            data,
            learning_rate,
            epochs,
            l2_penalty,
            seed,
            out,
        } => {
            let (ds, _) = data.load()?;
            let (inputs, _) = dataset::drop_protected(&ds);
            let config = model::TrainConfig {
                learning_rate: *learning_rate,
                epochs: *epochs,
                l2_penalty: *l2_penalty,
                seed: *seed,
                ..Default::default()
            };
            let trained = model::train(&inputs, config)?;
            std::fs::write(out, trained.to_json()?)?;
            let final_loss = trained.train_loss_curve.last().copied().unwrap_or(f64::NAN);
            println!("trained: {} weights, final loss {final_loss:.6}", trained.weights.len());
            Ok(EXIT_SATISFIED)
        }
        Command::Evaluate {
            data,
            model: model_path,
            criterion,
            tolerance,
            threshold,
            group_attr,
            out,
        } => {
            let (ds, _) = data.load()?;
            let trained = model::Model::from_json(&std::fs::read_to_string(model_path)?)?;
            let scores = model::predict_scores(&trained, &ds)?;
            let labels = ds.labels()?;
            let attr = resolve_group_attr(&ds, group_attr.as_deref())?;
            let groups = ds.group_labels(&attr)?;
            let gm = metrics::group_metrics(
                &scores.scores,
                &labels,
                &groups,
                metrics::GroupPolicy::Uniform(*threshold),
            )?;
            let gaps = metrics::fairness_gaps(&gm, *criterion, *tolerance)?;
            let payload = serde_json::json!({
                "group_metrics": serde_json::to_value(&gm)?,
                "gaps": serde_json::to_value(&gaps)?,
            });
            write_json(&payload, out.as_deref())?;
            Ok(if gaps.satisfied {
                EXIT_SATISFIED
            } else {
                EXIT_GAPS_ABOVE_TOLERANCE
            })
        }
        Command::Mitigate {
            data,
            model: model_path,
            criterion,
            epsilon,
            group_attr,
            out,
        } => {
            let (ds, _) = data.load()?;
            let trained = model::Model::from_json(&std::fs::read_to_string(model_path)?)?;
            let scores = model::predict_scores(&trained, &ds)?;
            let labels = ds.labels()?;
            let attr = resolve_group_attr(&ds, group_attr.as_deref())?;
            let groups = ds.group_labels(&attr)?;
            match mitigate::fit_thresholds(&scores.scores, &labels, &groups, *criterion, *epsilon)
            {
                Ok(policy) => {
                    write_json(&serde_json::to_value(&policy)?, out.as_deref())?;
                    Ok(EXIT_SATISFIED)
                }
                Err(
                    e @ (fairaudit_core::Error::Infeasible { .. }
                    | fairaudit_core::Error::GroupWithoutPositives(_)),
                ) => {
                    eprintln!("mitigation infeasible: {e}");
                    Ok(EXIT_INFEASIBLE)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Audit { config } => {
            let config = pipeline::load_config(config)?;
            let outcome = pipeline::run_audit(&config)?;
            println!(
                "report: {} (criterion {}, {})",
                outcome.report_path.display(),
                outcome.report.decision.criterion,
                outcome.report.mitigation_status
            );
            Ok(outcome.exit_code)
        }
        Command::Drift {
            baseline,
            current,
            tolerance,
            out,
        } => {
            let baseline_report = report::read_report(baseline)?;
            let current_report = report::read_report(current)?;
            let baseline_gaps = baseline_report
                .post_mitigation
                .as_ref()
                .unwrap_or(&baseline_report.pre_mitigation.gaps);
            let current_gaps = current_report
                .post_mitigation
                .as_ref()
                .unwrap_or(&current_report.pre_mitigation.gaps);
            let verdict = audit::drift_check(
                baseline_gaps,
                &baseline_report.dataset_fingerprint,
                current_gaps,
                &current_report.dataset_fingerprint,
                *tolerance,
            )?;
            write_json(&serde_json::to_value(&verdict)?, out.as_deref())?;
            Ok(if verdict.trigger {
                EXIT_GAPS_ABOVE_TOLERANCE
            } else {
                EXIT_SATISFIED
            })
        }
        Command::Synth {
            scenario,
            n,
            seed,
            target_tau,
            out_dir,
        } => {
            let ds = match scenario.as_str() {
                "hiring_basic" => synth::gen_hiring_basic(*n, *seed)?,
                "gender_marital" => synth::gen_gender_marital(*n, *seed, &Default::default())?,
                "proxy" => synth::gen_proxy(*n, *seed, *target_tau)?,
                other => return Err(anyhow!("unknown scenario '{other}'")),
            };
            std::fs::create_dir_all(out_dir)?;
            ds.write_csv_file(&out_dir.join("data.csv"))?;
            ds.write_schema_file(&out_dir.join("schema.json"))?;
            println!(
                "wrote data.csv + schema.json ({} rows, fingerprint {})",
                ds.n_rows(),
                &ds.fingerprint()[..12]
            );
            Ok(EXIT_SATISFIED)
        }
        Command::Report { input } => {
            let loaded = report::read_report(input)?;
            println!("report version : {}", loaded.report_version);
            println!("generated at   : {}", loaded.generated_at);
            println!("dataset        : {}", loaded.dataset_fingerprint);
            println!(
                "rows kept      : {} (dropped {})",
                loaded.load_log.rows_kept, loaded.load_log.dropped_rows
            );
            println!(
                "proxy flags    : {}",
                loaded.correlation_summary.proxy_flags.flags.len()
            );
            println!();
            print!("{}", selector::explain(&loaded.decision));
            println!();
            println!("pre-mitigation gaps ({}):", loaded.pre_mitigation.gaps.criterion);
            for (metric, gap) in &loaded.pre_mitigation.gaps.gaps {
                println!("  {metric}: {gap:.4}");
            }
            println!("mitigation     : {}", loaded.mitigation_status);
            if let Some(post) = &loaded.post_mitigation {
                println!("post-mitigation gaps (satisfied: {}):", post.satisfied);
                for (metric, gap) in &post.gaps {
                    println!("  {metric}: {gap:.4}");
                }
            }
            let flagged = loaded.subgroup_findings.iter().filter(|f| f.flagged).count();
            println!(
                "subgroups      : {} scanned, {flagged} flagged",
                loaded.subgroup_findings.len()
            );
            println!("probe plan     : {} of {} band rows", loaded.probe_plan.selected_ids.len(), loaded.probe_plan.band_size);
            if let Some(re) = &loaded.reassessment {
                println!("reassessment   : trigger = {}", re.trigger);
            }
            Ok(EXIT_SATISFIED)
        }
    }
}

fn resolve_group_attr(ds: &fairaudit_core::Dataset, requested: Option<&str>) -> anyhow::Result<String> {
    match requested {
        Some(name) => Ok(name.to_string()),
        None => ds
            .protected_columns()
            .first()
            .map(|c| c.name.clone())
            .ok_or_else(|| anyhow!("dataset has no protected columns")),
    }
}

/// Ask the four tree questions on stdin, showing data defaults. An empty
/// line keeps the default (source stays "data"); explicit y/n answers are
/// recorded as human overrides, identical to an answers file.
fn prompt_overrides(
    ds: &fairaudit_core::Dataset,
    flags: &correlation::ProxyFlags,
    thresholds: &SelectorThresholds,
    mut overrides: BTreeMap<NodeId, bool>,
) -> anyhow::Result<BTreeMap<NodeId, bool>> {
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    let nodes = [
        NodeId::Q1ProxiesExist,
        NodeId::Q2RemovableWithinTolerance,
        NodeId::Q3GroupsSufficientlyEqual,
        NodeId::Q4FprGapAfterEo,
    ];
    for node in nodes {
        // Defaults computable without a model context.
        let default = match node {
            NodeId::Q1ProxiesExist => Some(!flags.flags.is_empty()),
            NodeId::Q3GroupsSufficientlyEqual => {
                let answers = selector::evaluate_defaults(
                    ds,
                    flags,
                    None,
                    &BTreeMap::from([
                        (NodeId::Q1ProxiesExist, true),
                        (NodeId::Q2RemovableWithinTolerance, false),
                    ]),
                    thresholds,
                )
                .ok();
                answers.and_then(|a| {
                    a.iter()
                        .find(|x| x.node_id == NodeId::Q3GroupsSufficientlyEqual)
                        .and_then(|x| x.default_answer)
                })
            }
            _ => None,
        };
        let hint = match default {
            Some(true) => "data default: yes",
            Some(false) => "data default: no",
            None => "no data default (model context unavailable)",
        };
        // prompts on stderr so stdout stays parseable
        eprint!("{} [{hint}] (y/n/enter=default): ", node.as_str());
        std::io::stderr().flush()?;
        let line = lines.next().transpose()?.unwrap_or_default();
        match line.trim() {
            "" => {}
            "y" | "yes" => {
                overrides.insert(node, true);
            }
            "n" | "no" => {
                overrides.insert(node, false);
            }
            other => return Err(anyhow!("expected y, n, or empty line; got '{other}'")),
        }
    }
    Ok(overrides)
}
