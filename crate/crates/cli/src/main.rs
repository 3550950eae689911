use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use genisbench::config::RunConfig;
use genisbench::data::{describe, Task};
use genisbench::eval::FeatureSet;
use genisbench::pipeline::{Pipeline, PipelineRun, Stage};
use genisbench::report::{render_results_table, Report, MACHINE_FILE};
use genisbench::synth::{synth_generate, SynthSpec};

/// Flow-based intrusion detection benchmark.
#[derive(Parser)]
#[command(name = "genisbench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, filter and encode the dataset and print a summary.
    Ingest(Common),
    /// Write a synthetic flow table as CSV.
    Synth(Common),
    /// Rank features and print the selected subset.
    Select(Common),
    /// Tune and fit the requested models and save them.
    Train(Common),
    /// Train and score models on the test rows.
    Evaluate(Common),
    /// Train, score and attribute predictions to feature categories.
    Explain(Common),
    /// Run every stage and write the machine and human reports.
    Pipeline(Common),
    /// Render a saved machine report as text.
    Report {
        /// Machine report, or a directory holding one.
        path: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<Task>,
    /// Comma-separated subset of rf, gbdt_hist, gbdt_goss, mlp, lstm.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long)]
    select_k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run every stage on one thread so timings are comparable.
    #[arg(long)]
    single_thread: bool,
    /// TOML synthetic data spec; replaces file inputs.
    #[arg(long)]
    synth: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_path(p).with_context(|| format!("reading {}", p.display()))?,
            None => RunConfig::default(),
        };
        if let Some(t) = self.task {
            cfg.task = t;
        }
        if let Some(m) = &self.models {
            cfg.models = m.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        }
        if let Some(k) = self.select_k {
            cfg.selection.k = k;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if self.single_thread {
            cfg.single_thread = true;
        }
        if let Some(p) = &self.synth {
            cfg.synth = Some(SynthSpec::from_path(p).with_context(|| format!("reading {}", p.display()))?);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("genisbench-out"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(common: &Common, last: Stage) -> Result<(RunConfig, PipelineRun)> {
    let cfg = common.config()?;
    let run = Pipeline::new(cfg.clone()).run_until(last)?;
    Ok((cfg, run))
}

fn save_models(dir: &Path, run: &PipelineRun) -> Result<()> {
    for m in &run.models {
        let tag = match m.feature_set {
            FeatureSet::Full => "full",
            FeatureSet::Selected => "selected",
        };
        write(&dir.join("models").join(format!("{}_{tag}.json", m.model)), &m.classifier.to_json()?)?;
    }
    Ok(())
}

fn save_selection(dir: &Path, run: &PipelineRun) -> Result<()> {
    if let Some(sel) = &run.selection {
        write(&dir.join("selection.json"), &serde_json::to_string_pretty(sel)?)?;
    }
    Ok(())
}

fn save_attributions(dir: &Path, report: &Report) -> Result<()> {
    for a in &report.attributions {
        write(
            &dir.join("attribution").join(format!("{}.json", a.model)),
            &serde_json::to_string_pretty(a)?,
        )?;
    }
    Ok(())
}

/// Runs through `last`, writes every artifact and prints the results.
fn report_stage(c: &Common, last: Stage) -> Result<()> {
    let (cfg, run) = run(c, last)?;
    let dir = out_dir(&cfg);
    let files = run.report.write(&dir)?;
    save_models(&dir, &run)?;
    save_selection(&dir, &run)?;
    save_attributions(&dir, &run.report)?;
    if last == Stage::Evaluate {
        print!("{}", render_results_table(&run.report.evaluations));
    } else {
        print!("{}", run.report.render_human());
    }
    eprintln!("wrote {} and {}", files.machine.display(), files.human.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Stage errors already embed their cause; print each message once.
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg.push_str(": ");
                    msg.push_str(&c);
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(c) => {
            let (cfg, run) = run(&c, Stage::Encode)?;
            let d = &run.report.dataset;
            println!("source: {}", d.source);
            println!("rows: {} ({} train, {} test)", d.n_rows, d.n_train, d.n_test);
            println!("model inputs: {}", d.features.len());
            println!("removed columns: {}", d.removed.len());
            println!("{:<14} {:>10} {:>10}", "class", "train", "test");
            for class in &d.classes {
                println!("{class:<14} {:>10} {:>10}", d.train_counts[class], d.test_counts[class]);
            }
            write(&out_dir(&cfg).join("dataset.json"), &serde_json::to_string_pretty(d)?)?;
        }
        Command::Synth(c) => {
            let cfg = c.config()?;
            let spec = cfg.synth.clone().unwrap_or_default();
            let table = synth_generate(&spec)?;
            let path = out_dir(&cfg).join("synth.csv");
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            table.save_csv(&path)?;
            write(&path.with_file_name("taxonomy.csv"), &describe(&table).to_descriptor())?;
            println!("wrote {} rows to {}", table.n_rows(), path.display());
        }
        Command::Select(c) => {
            let (cfg, run) = run(&c, Stage::Select)?;
            let Some(sel) = &run.selection else {
                bail!("feature selection is disabled in the configuration");
            };
            print!("{}", sel.render_text());
            save_selection(&out_dir(&cfg), &run)?;
        }
        Command::Train(c) => {
            let (cfg, run) = run(&c, Stage::Train)?;
            let dir = out_dir(&cfg);
            save_models(&dir, &run)?;
            save_selection(&dir, &run)?;
            write(&dir.join("tuning.json"), &serde_json::to_string_pretty(&run.report.tuning)?)?;
            for t in &run.report.tuning {
                println!("{:<10} {:<9} winner {}", t.model, t.feature_set.as_str(), t.winner);
            }
        }
        Command::Evaluate(c) => report_stage(&c, Stage::Evaluate)?,
        Command::Explain(c) | Command::Pipeline(c) => report_stage(&c, Stage::Explain)?,
        Command::Report { path, out } => {
            let path = path.unwrap_or_else(|| PathBuf::from("genisbench-out"));
            let file = if path.is_dir() { path.join(MACHINE_FILE) } else { path };
            let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let report = Report::from_json(&text)?;
            let human = report.render_human();
            match out {
                Some(dir) => {
                    report.write(&dir)?;
                }
                None => print!("{human}"),
            }
        }
    }
    Ok(())
}
