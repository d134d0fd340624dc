//! Command-line front end: training runs, checkpoint translation and
//! evaluation, edge-pipeline inspection, variant ablations, and synthetic
//! dataset export.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use cshnet::aepl;
use cshnet::config::RunConfig;
use cshnet::data::{self, DatasetKind, ImagePair};
use cshnet::metrics;
use cshnet::train::{loss_csv, Trainer};

#[derive(Parser)]
#[command(name = "cshnet", version, about = "Hybrid CNN-attention image translation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train per the config; writes checkpoints, a loss CSV, and a final
    /// metrics report.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Resume from this checkpoint instead of fresh parameters.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Output directory (overrides out_dir in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Total step cap (overrides run.steps in the config).
        #[arg(long)]
        steps: Option<u64>,
        /// Seed override for both training and data synthesis.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Translate every image in a directory through a trained checkpoint.
    Translate {
        /// Directory of input images.
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Config supplying the working image size (dataset.size).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the configured dataset.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the edge pipeline on one image, print the threshold, and write
    /// each stage next to the given prefix.
    Edges {
        image: PathBuf,
        /// Output path prefix for the stage images.
        #[arg(long)]
        out: PathBuf,
    },
    /// Short training runs over the configured variant grid, tabulated.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Steps per variant (overrides ablate.steps).
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a synthetic paired dataset as source/ and target/ folders.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            // Data failures (non-finite losses and the like) are runtime
            // faults; everything else is a usage problem.
            match e.downcast_ref::<cshnet::Error>() {
                Some(cshnet::Error::Data(_)) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Train {
            config,
            checkpoint,
            out,
            steps,
            seed,
        } => cmd_train(&config, checkpoint.as_deref(), out.as_deref(), steps, seed),
        Command::Translate {
            input,
            checkpoint,
            out,
            config,
        } => cmd_translate(&input, &checkpoint, &out, config.as_deref()),
        Command::Evaluate {
            config,
            checkpoint,
            out,
            seed,
        } => cmd_evaluate(&config, &checkpoint, out.as_deref(), seed),
        Command::Edges { image, out } => cmd_edges(&image, &out),
        Command::Ablate {
            config,
            out,
            steps,
            seed,
        } => cmd_ablate(&config, out.as_deref(), steps, seed),
        Command::Synth { config, out, seed } => cmd_synth(config.as_deref(), out.as_deref(), seed),
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
        cfg.dataset.seed = s;
    }
    Ok(cfg)
}

fn training_pairs(cfg: &RunConfig) -> anyhow::Result<Vec<ImagePair>> {
    let (pairs, skipped) = data::build_dataset(&cfg.dataset, 0)?;
    for s in &skipped {
        eprintln!("skipped {s}");
    }
    Ok(pairs)
}

/// Pairs for the final report: synthetic runs evaluate indices past the
/// training range, folder runs reuse the leading pairs.
fn eval_pairs(cfg: &RunConfig) -> anyhow::Result<Vec<ImagePair>> {
    match cfg.dataset.kind {
        DatasetKind::Synthetic => {
            let mut spec = cfg.dataset.clone();
            spec.count = cfg.run.eval_count;
            let (pairs, _) = data::build_dataset(&spec, cfg.dataset.count as u64)?;
            Ok(pairs)
        }
        DatasetKind::Folder => {
            let (mut pairs, _) = data::build_dataset(&cfg.dataset, 0)?;
            pairs.truncate(cfg.run.eval_count.min(pairs.len()).max(1));
            Ok(pairs)
        }
    }
}

fn write_report(out_dir: &Path, trainer: &mut Trainer, cfg: &RunConfig) -> anyhow::Result<String> {
    let pairs = eval_pairs(cfg)?;
    let grid = out_dir.join("eval_grid.png");
    let report = metrics::evaluate(&mut trainer.generator, &pairs, Some(&grid))?;
    let table = report.table();
    std::fs::write(out_dir.join("metrics.txt"), &table)
        .with_context(|| format!("writing {}", out_dir.join("metrics.txt").display()))?;
    std::fs::write(out_dir.join("metrics.kv"), report.key_values())
        .with_context(|| format!("writing {}", out_dir.join("metrics.kv").display()))?;
    Ok(table)
}

fn cmd_train(
    config: &Path,
    checkpoint: Option<&Path>,
    out: Option<&Path>,
    steps: Option<u64>,
    seed: Option<u64>,
) -> anyhow::Result<()> {
    let mut cfg = load_config(config, seed)?;
    if let Some(s) = steps {
        cfg.run.steps = Some(s);
    }
    cfg.validate()?;
    let out_dir = cfg.resolve_out(out)?;
    std::fs::create_dir_all(out_dir.join("checkpoints"))
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let pairs = training_pairs(&cfg)?;
    let mut trainer = match checkpoint {
        // The checkpoint's stored setup wins on resume; the config must
        // agree on the generator.
        Some(path) => {
            let t = Trainer::load_checkpoint(path, Some(&cfg.generator))?;
            eprintln!("resumed at step {}", t.step);
            t
        }
        None => Trainer::new(cfg.to_setup()?)?,
    };

    let total = cfg.total_steps(pairs.len());
    while trainer.step < total {
        let r = trainer.train_step(&pairs)?;
        if r.step % 25 == 0 || r.step == total {
            eprintln!("step {}/{total} loss {:.4} disc {:.4}", r.step, r.total, r.disc);
        }
        if cfg.run.checkpoint_every > 0 && r.step % cfg.run.checkpoint_every == 0 {
            let path = out_dir.join(format!("checkpoints/step{:06}.ckpt", r.step));
            trainer.save_checkpoint(&path)?;
        }
    }

    let final_ckpt = out_dir.join("checkpoint.ckpt");
    trainer.save_checkpoint(&final_ckpt)?;
    let csv_path = out_dir.join("loss.csv");
    std::fs::write(&csv_path, loss_csv(&trainer.history))
        .with_context(|| format!("writing {}", csv_path.display()))?;
    let table = write_report(&out_dir, &mut trainer, &cfg)?;

    println!("trained {} steps on {} pairs", trainer.step, pairs.len());
    println!("checkpoint {}", final_ckpt.display());
    println!("loss csv {}", csv_path.display());
    print!("{table}");
    Ok(())
}

fn cmd_translate(
    input: &Path,
    checkpoint: &Path,
    out: &Path,
    config: Option<&Path>,
) -> anyhow::Result<()> {
    let size = match config {
        Some(p) => {
            let cfg = RunConfig::load(p)?;
            cfg.validate()?;
            cfg.dataset.size
        }
        None => cshnet::data::DatasetSpec::default().size,
    };
    let mut trainer = Trainer::load_checkpoint(checkpoint, None)?;
    let names = data::list_images(input)?;
    if names.is_empty() {
        anyhow::bail!(cshnet::Error::Data(format!(
            "no images found in {}",
            input.display()
        )));
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for name in &names {
        let tensor = data::load_resized(&input.join(name), size)?;
        let generated = trainer.generator.translate_image(&tensor);
        let img = data::tensor_to_rgb(&generated)?;
        let path = out.join(name);
        img.save(&path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!("wrote {} images to {}", names.len(), out.display());
    Ok(())
}

fn cmd_evaluate(
    config: &Path,
    checkpoint: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
) -> anyhow::Result<()> {
    let cfg = load_config(config, seed)?;
    cfg.validate()?;
    let out_dir = cfg.resolve_out(out)?;
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut trainer = Trainer::load_checkpoint(checkpoint, Some(&cfg.generator))?;
    let pairs = training_pairs(&cfg)?;
    let grid = out_dir.join("eval_grid.png");
    let report = metrics::evaluate(&mut trainer.generator, &pairs, Some(&grid))?;
    std::fs::write(out_dir.join("metrics.txt"), report.table())
        .with_context(|| format!("writing {}", out_dir.join("metrics.txt").display()))?;
    std::fs::write(out_dir.join("metrics.kv"), report.key_values())
        .with_context(|| format!("writing {}", out_dir.join("metrics.kv").display()))?;
    print!("{}", report.table());
    Ok(())
}

fn cmd_edges(image: &Path, out_prefix: &Path) -> anyhow::Result<()> {
    let tensor = data::load_image(image).with_context(|| format!("reading {}", image.display()))?;
    let stages = aepl::edge_stages(&tensor)?;
    if let Some(parent) = out_prefix.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let prefix = out_prefix.to_string_lossy();
    println!("t {}", stages.edge.threshold);
    for (suffix, img) in [
        ("gray", data::unit_map_to_gray(&stages.gray)),
        ("blurred", data::unit_map_to_gray(&stages.blurred)),
        ("sobel", data::scaled_map_to_gray(&stages.magnitudes)),
        ("edges", data::scaled_map_to_gray(&stages.edge.magnitudes)),
    ] {
        let path = PathBuf::from(format!("{prefix}{suffix}.png"));
        img.save(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_ablate(
    config: &Path,
    out: Option<&Path>,
    steps: Option<u64>,
    seed: Option<u64>,
) -> anyhow::Result<()> {
    let mut cfg = load_config(config, seed)?;
    if let Some(s) = steps {
        cfg.ablate.steps = s;
    }
    cfg.validate()?;
    let pairs = training_pairs(&cfg)?;

    let mut table = format!(
        "{:<10} {:<5} {:<4} {:>10} {:>9} {:>9} {:>9}\n",
        "variant", "igc", "aepl", "params", "psnr", "ssim", "rmse"
    );
    for &bottleneck in &cfg.ablate.bottlenecks {
        for &igc_form in &cfg.ablate.igc_forms {
            for &edge_on in &cfg.ablate.aepl {
                let mut variant_cfg = cfg.clone();
                variant_cfg.generator.bottleneck = bottleneck;
                variant_cfg.generator.igc_form = igc_form;
                if !edge_on {
                    variant_cfg.train.weights.aepl = 0.0;
                }
                variant_cfg.validate()?;
                let mut trainer = Trainer::new(variant_cfg.to_setup()?)?;
                for _ in 0..cfg.ablate.steps {
                    trainer.train_step(&pairs)?;
                }
                let eval = eval_pairs(&variant_cfg)?;
                let report = metrics::evaluate(&mut trainer.generator, &eval, None)?;
                table.push_str(&format!(
                    "{:<10} {:<5} {:<4} {:>10} {:>9.4} {:>9.4} {:>9.4}\n",
                    bottleneck.to_string(),
                    igc_form.to_string(),
                    if edge_on { "on" } else { "off" },
                    trainer.generator.count_parameters(),
                    report.psnr,
                    report.ssim,
                    report.rmse
                ));
                eprintln!("done {bottleneck} {igc_form} aepl {}", if edge_on { "on" } else { "off" });
            }
        }
    }
    if let Some(dir) = out.map(Path::to_path_buf).or_else(|| cfg.out_dir.clone()) {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        std::fs::write(dir.join("ablation.txt"), &table)
            .with_context(|| format!("writing {}", dir.join("ablation.txt").display()))?;
    }
    print!("{table}");
    Ok(())
}

fn cmd_synth(config: Option<&Path>, out: Option<&Path>, seed: Option<u64>) -> anyhow::Result<()> {
    let cfg = match config {
        Some(p) => load_config(p, seed)?,
        None => {
            let mut c = RunConfig::default();
            if let Some(s) = seed {
                c.dataset.seed = s;
            }
            c
        }
    };
    cfg.validate()?;
    let out_dir = cfg.resolve_out(out)?;
    let src_dir = out_dir.join("source");
    let tgt_dir = out_dir.join("target");
    std::fs::create_dir_all(&src_dir).with_context(|| format!("creating {}", src_dir.display()))?;
    std::fs::create_dir_all(&tgt_dir).with_context(|| format!("creating {}", tgt_dir.display()))?;
    let (pairs, _) = data::build_dataset(&cfg.dataset, 0)?;
    for pair in &pairs {
        data::tensor_to_rgb(&pair.source)?
            .save(src_dir.join(format!("{}.png", pair.id)))
            .with_context(|| format!("writing {}", src_dir.display()))?;
        data::tensor_to_rgb(&pair.target)?
            .save(tgt_dir.join(format!("{}.png", pair.id)))
            .with_context(|| format!("writing {}", tgt_dir.display()))?;
    }
    println!("wrote {} pairs to {}", pairs.len(), out_dir.display());
    Ok(())
}
