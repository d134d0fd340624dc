//! End-to-end checks of the binary: every command runs against a toy
//! configuration in a temp directory and the artifacts are inspected
//! from the outside. The library is used only as an oracle.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cshnet::adversarial::{ContentMode, DiscriminatorConfig};
use cshnet::aepl::{self, ThresholdPolicy, GAUSSIAN_SIGMA};
use cshnet::data;
use cshnet::generator::{BottleneckVariant, Generator, GeneratorConfig, IgcForm};
use cshnet::train::{TrainConfig, TrainSetup, Trainer};
use tempfile::TempDir;

/// Small enough to train in seconds: 32 px images, width-2 generator,
/// width-2 single-scale discriminator.
const TOY_CONFIG: &str = r#"
[generator]
base_width = 2
n_downsample = 1
bottleneck = "SCB"
igc_form = "AXB"
window_size = 4

[discriminator]
ndf = 2
scale_count = 1
conv_layers = 4

[train]
seed = 7

[dataset]
size = 32
count = 4
seed = 7

[run]
steps = 10
eval_count = 2

[ablate]
bottlenecks = ["SCB", "GLOBALG9", "SWING9"]
igc_forms = ["AXB"]
aepl = [true]
steps = 1
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cshnet"))
        .args(args)
        .output()
        .expect("binary should run")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, TOY_CONFIG).unwrap();
    path
}

fn toy_setup() -> TrainSetup {
    TrainSetup {
        train: TrainConfig {
            seed: 7,
            ..TrainConfig::default()
        },
        generator: GeneratorConfig {
            base_width: 2,
            n_downsample: 1,
            window_size: 4,
            ..GeneratorConfig::default()
        },
        discriminator: DiscriminatorConfig {
            ndf: 2,
            scale_count: 1,
            conv_layers: 4,
            ..DiscriminatorConfig::default()
        },
        content_mode: ContentMode::Pixel,
        threshold_policy: ThresholdPolicy::PerImage,
        gaussian_sigma: GAUSSIAN_SIGMA,
    }
}

#[test]
fn train_writes_every_artifact() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path());
    let out_dir = dir.path().join("out");

    let out = run(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("trained 10 steps on 4 pairs"), "stdout: {text}");

    let csv = std::fs::read_to_string(out_dir.join("loss.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "step,loss_gan,loss_feat,loss_cont,loss_aepl,loss_total,loss_disc"
    );
    assert_eq!(lines.len(), 11, "header plus one row per step");

    for name in ["checkpoint.ckpt", "metrics.txt", "metrics.kv", "eval_grid.png"] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    image::open(out_dir.join("eval_grid.png")).expect("grid should be a valid image");
}

#[test]
fn same_seed_reproduces_the_loss_curve_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path());

    let mut curves = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = run(&[
            "train",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
        curves.push(std::fs::read(out_dir.join("loss.csv")).unwrap());
    }
    assert_eq!(curves[0], curves[1]);
}

#[test]
fn translate_preserves_filenames_and_repeats_bitwise() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path());
    let ckpt = dir.path().join("init.ckpt");
    let trainer = Trainer::new(toy_setup()).unwrap();
    trainer.save_checkpoint(&ckpt).unwrap();

    let input = dir.path().join("input");
    std::fs::create_dir_all(&input).unwrap();
    let names = ["left.png", "mid.png", "right.png"];
    for (i, name) in names.iter().enumerate() {
        let shade = 60 + 60 * i as u8;
        let img = image::RgbImage::from_fn(48, 40, |x, y| {
            image::Rgb([shade, (x * 5) as u8, (y * 6) as u8])
        });
        img.save(input.join(name)).unwrap();
    }

    let mut rounds = Vec::new();
    for out_name in ["first", "second"] {
        let out_dir = dir.path().join(out_name);
        let out = run(&[
            "translate",
            input.to_str().unwrap(),
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

        let mut bytes = Vec::new();
        for name in names {
            let path = out_dir.join(name);
            let img = image::open(&path)
                .unwrap_or_else(|_| panic!("{name} should be a valid image"))
                .to_rgb8();
            assert_eq!(img.dimensions(), (32, 32), "configured dataset size");
            bytes.push(std::fs::read(&path).unwrap());
        }
        rounds.push(bytes);
    }
    assert_eq!(rounds[0], rounds[1], "same checkpoint, same outputs");
}

#[test]
fn translating_an_empty_directory_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let ckpt = dir.path().join("init.ckpt");
    let trainer = Trainer::new(toy_setup()).unwrap();
    trainer.save_checkpoint(&ckpt).unwrap();
    let input = dir.path().join("empty");
    std::fs::create_dir_all(&input).unwrap();

    let out = run(&[
        "translate",
        input.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("no images found"));
}

#[test]
fn edges_reports_the_library_threshold_and_writes_four_stages() {
    let dir = TempDir::new().unwrap();
    let img_path = dir.path().join("square.png");
    // A bright block on a dark field with a ripple: strong edges plus a
    // spread of weak magnitudes, so the threshold has work to do.
    let img = image::RgbImage::from_fn(32, 32, |x, y| {
        let inside = (8..24).contains(&x) && (8..24).contains(&y);
        let base = if inside { 200u8 } else { 30 };
        let ripple = ((x * 7 + y * 13) % 23) as u8;
        image::Rgb([base + ripple / 2, base, 255 - base])
    });
    img.save(&img_path).unwrap();

    let prefix = dir.path().join("stage_");
    let out = run(&[
        "edges",
        img_path.to_str().unwrap(),
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let text = stdout(&out);
    let first = text.lines().next().unwrap();
    let reported: u8 = first
        .strip_prefix("t ")
        .expect("first line should be the threshold")
        .parse()
        .unwrap();
    let tensor = data::load_image(&img_path).unwrap();
    let stages = aepl::edge_stages(&tensor).unwrap();
    assert_eq!(reported, stages.edge.threshold);
    assert!(reported > 0, "this image should not threshold at zero");

    for suffix in ["gray", "blurred", "sobel", "edges"] {
        let path = dir.path().join(format!("stage_{suffix}.png"));
        image::open(&path).unwrap_or_else(|_| panic!("{suffix} stage should be a valid image"));
    }
}

#[test]
fn a_flat_image_thresholds_at_zero() {
    let dir = TempDir::new().unwrap();
    let img_path = dir.path().join("flat.png");
    image::RgbImage::from_pixel(32, 32, image::Rgb([100, 150, 200]))
        .save(&img_path)
        .unwrap();

    let out = run(&[
        "edges",
        img_path.to_str().unwrap(),
        "--out",
        dir.path().join("flat_").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert_eq!(stdout(&out).lines().next(), Some("t 0"));
}

#[test]
fn bad_inputs_exit_with_the_usage_code() {
    let dir = TempDir::new().unwrap();

    // Unknown key: rejected at parse time, named in the message.
    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "[generator]\nwindow = 4\n").unwrap();
    let out = run(&["train", "--config", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("window"), "stderr: {}", stderr(&out));

    // Structurally valid but incomplete: folder datasets need a root.
    let rootless = dir.path().join("rootless.toml");
    std::fs::write(&rootless, "[dataset]\nkind = \"FOLDER\"\n").unwrap();
    let out = run(&["train", "--config", rootless.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("root"), "stderr: {}", stderr(&out));

    // Unreadable image path.
    let out = run(&[
        "edges",
        dir.path().join("missing.png").to_str().unwrap(),
        "--out",
        dir.path().join("x_").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
}

#[test]
fn ablation_lists_each_variant_with_its_parameter_count() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path());

    let out = run(&["ablate", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("variant"), "header first: {text}");
    assert_eq!(lines.len(), 4, "header plus one row per variant: {text}");

    let variants = [
        BottleneckVariant::Scb,
        BottleneckVariant::Globalg9,
        BottleneckVariant::Swing9,
    ];
    for (row, &bottleneck) in lines[1..].iter().zip(&variants) {
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(cols.len(), 7, "row: {row}");
        assert_eq!(cols[0], bottleneck.to_string());
        assert_eq!(cols[1], "AXB");
        assert_eq!(cols[2], "on");
        let cfg = GeneratorConfig {
            base_width: 2,
            n_downsample: 1,
            bottleneck,
            igc_form: IgcForm::Axb,
            window_size: 4,
            ..GeneratorConfig::default()
        };
        let expected = Generator::build(cfg, 0).unwrap().count_parameters();
        assert_eq!(cols[3].parse::<usize>().unwrap(), expected, "row: {row}");
        for metric in &cols[4..] {
            metric.parse::<f64>().expect("metric columns should be numbers");
        }
    }
}

#[test]
fn synth_writes_matching_source_and_target_pairs() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path());
    let out_dir = dir.path().join("data");

    let out = run(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let mut names = Vec::new();
    for entry in std::fs::read_dir(out_dir.join("source")).unwrap() {
        names.push(entry.unwrap().file_name());
    }
    names.sort();
    assert_eq!(names.len(), 4, "one pair per configured count");
    for name in &names {
        for side in ["source", "target"] {
            let path = out_dir.join(side).join(name);
            let img = image::open(&path)
                .unwrap_or_else(|_| panic!("{side}/{name:?} should be a valid image"))
                .to_rgb8();
            assert_eq!(img.dimensions(), (32, 32));
        }
    }
}
