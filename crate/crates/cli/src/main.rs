use std::path::PathBuf;
use std::process::ExitCode;

use barkscan::commands;
use barkscan::config::RunConfig;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "barkscan", version, about = "Few-shot abundance estimation for hyperspectral forest pixels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> barkscan::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a scene, its truth map, endmembers and labeled pixels.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the full pipeline and write a checkpoint plus loss histories.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cube: PathBuf,
        #[arg(long)]
        labeled: PathBuf,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate the model against the raw-band baselines.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cube: PathBuf,
        #[arg(long)]
        labeled: PathBuf,
        /// Report CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict an abundance map for every pixel of a cube.
    PredictMap {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        cube: PathBuf,
        /// `HMSK` file; masked pixels are left empty.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render an abundance map as a binary PPM.
    RenderMap {
        #[arg(long)]
        map: PathBuf,
        /// Sibling maps whose channel ranges are pooled with this one.
        #[arg(long, num_args = 1..)]
        joint_with: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> barkscan::Result<()> {
    match cli.command {
        Command::Generate { common, out } => {
            let files = commands::cmd_generate(&common.load()?, &out)?;
            for path in [&files.scene, &files.truth, &files.endmembers, &files.labeled] {
                println!("wrote {}", path.display());
            }
        }
        Command::Train { common, cube, labeled, out } => {
            let s = commands::cmd_train(&common.load()?, &cube, &labeled, &out)?;
            if let Some(w) = &s.warning {
                eprintln!("warning: {w}");
            }
            println!("trained on {} samples, validated on {}", s.train_count, s.validation_count);
            if let Some([h, a, d]) = s.validation_rmse {
                println!("validation RMSE  healthy {h:.4}  affected {a:.4}  dead {d:.4}");
            }
            for path in [out.as_path(), &s.pretrain_history, &s.finetune_history] {
                println!("wrote {}", path.display());
            }
        }
        Command::Evaluate { common, cube, labeled, out } => {
            let cv = commands::cmd_evaluate(&common.load()?, &cube, &labeled, &out)?;
            print!("{}", cv.summary_table());
            println!("mean-label floor: {:.4}", cv.floor.grand_mean);
            println!("wrote {}", out.display());
        }
        Command::PredictMap { checkpoint, cube, mask, out } => {
            let map = commands::cmd_predict_map(&checkpoint, &cube, mask.as_deref(), &out)?;
            println!("wrote {} ({}x{}, {} channels)", out.display(), map.height, map.width, map.channels);
        }
        Command::RenderMap { map, joint_with, out } => {
            commands::cmd_render_map(&map, &joint_with, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
