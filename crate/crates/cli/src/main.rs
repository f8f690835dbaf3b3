use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use magstego::codec::EcLevel;
use magstego::imaging::PsfKind;
use magstego::nvmodel::DriveMode;
use serde::{Deserialize, Serialize};

mod commands;
mod config;
mod demo;
mod run;

use config::RunConfig;
use run::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "magstego", version, about = "Magnetic steganography simulation pipeline")]
struct Cli {
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file and MAGSTEGO_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 = one per core. Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Encode a payload as a QR matrix or Code 39 element sequence.
    #[command(subcommand)]
    Encode(EncodeCmd),
    /// Turn an encoded symbol or a pixel-art preset into a Ni/Au pattern.
    #[command(subcommand)]
    Layout(LayoutCmd),
    /// Axial stray-field map of a pattern.
    Field(FieldArgs),
    /// Photon stack and frequency-shift, linewidth and contrast images.
    Image(ImageArgs),
    /// Read a symbol back from a mode image.
    #[command(subcommand)]
    Decode(DecodeCmd),
    /// Contrast, linewidth and sensitivity versus Rabi frequency.
    Sweep(SweepArgs),
    /// Pearson correlation versus exposure for single and dual driving.
    Correlate(CorrelateArgs),
    /// Run a canned demo scenario, or replay a manifest.
    #[command(subcommand)]
    Demo(DemoCmd),
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodeCmd {
    /// 25x25 QR grid file ('#' dark, '.' light).
    Qr {
        #[arg(long)]
        payload: String,
        #[arg(long, value_enum, ignore_case = true, default_value = "l")]
        ec: Ec,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Element token file (`B2 S1 B1 ...`, widths in narrow units).
    Barcode {
        #[arg(long)]
        text: String,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ec {
    L,
    M,
    Q,
    H,
}

impl From<Ec> for EcLevel {
    fn from(e: Ec) -> Self {
        match e {
            Ec::L => EcLevel::L,
            Ec::M => EcLevel::M,
            Ec::Q => EcLevel::Q,
            Ec::H => EcLevel::H,
        }
    }
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutCmd {
    Qr {
        /// Grid file from `encode qr`.
        #[arg(long)]
        grid: PathBuf,
        #[command(flatten)]
        out: LayoutOut,
    },
    Barcode {
        /// Element file from `encode barcode`.
        #[arg(long)]
        elements: PathBuf,
        #[command(flatten)]
        out: LayoutOut,
    },
    /// Pixel art: Au dots on the cover shape, Ni where the hidden shape is set.
    Art {
        #[arg(long, value_enum, default_value = "heart")]
        cover: ArtPreset,
        #[arg(long, value_enum, default_value = "diamond")]
        hidden: ArtPreset,
        #[command(flatten)]
        out: LayoutOut,
    },
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LayoutOut {
    /// Pattern JSON.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Also write the optical transmission image (PGM).
    #[arg(long)]
    pub optical: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtPreset {
    Heart,
    Diamond,
    /// 3x3 block.
    Dots3,
    Empty,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SceneArgs {
    /// Pattern JSON from `layout`.
    #[arg(long)]
    pub pattern: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Pixel pitch (scene.pixel_um).
    #[arg(long)]
    pub pixel_um: Option<f64>,
    /// NV plane height (scene.standoff_um).
    #[arg(long)]
    pub standoff_um: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FieldArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ImageArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// drive.mode
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// drive.omega1 and drive.omega2
    #[arg(long)]
    pub omega: Option<f64>,
    /// stack.exposure_s
    #[arg(long)]
    pub exposure: Option<f64>,
    /// psf.kind
    #[arg(long, value_enum)]
    pub psf: Option<PsfArg>,
    /// scene.noise_free
    #[arg(long)]
    pub noise_free: bool,
    /// scene.save_stack
    #[arg(long)]
    pub save_stack: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SingleMinus,
    SinglePlus,
    Dual,
}

impl From<Mode> for DriveMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::SingleMinus => DriveMode::SingleMinus,
            Mode::SinglePlus => DriveMode::SinglePlus,
            Mode::Dual => DriveMode::Dual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsfArg {
    Gaussian,
    Delta,
}

impl From<PsfArg> for PsfKind {
    fn from(p: PsfArg) -> Self {
        match p {
            PsfArg::Gaussian => PsfKind::Gaussian,
            PsfArg::Delta => PsfKind::Delta,
        }
    }
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeCmd {
    Qr {
        /// Contrast image: CSV grid or PGM, with its JSON sidecar.
        #[arg(long)]
        contrast: PathBuf,
        #[command(flatten)]
        opts: DecodeOpts,
        /// Reference grid file; reports module accuracy against it.
        #[arg(long)]
        expect: Option<PathBuf>,
    },
    Barcode {
        /// Frequency-shift image: CSV grid or PGM, with its JSON sidecar.
        #[arg(long)]
        shift: PathBuf,
        #[command(flatten)]
        opts: DecodeOpts,
        /// Strip length in narrow widths; searched when absent.
        #[arg(long)]
        units: Option<usize>,
    },
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DecodeOpts {
    /// Geometry JSON; the configured geometry when absent.
    #[arg(long)]
    pub geom: Option<PathBuf>,
    /// Expected lower-left corner of the symbol, µm.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.0, 0.0])]
    pub origin: Vec<f64>,
    /// Directory for the result JSON and manifest.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CorrelateArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// correlate.seeds
    #[arg(long)]
    pub seeds: Option<usize>,
    /// correlate.times_s
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoCmd {
    /// Pixel art: optical cover versus hidden magnetic image.
    Fig1 {
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Barcodes and QR codes: optical identity, magnetic decode, exposure threshold.
    Fig2 {
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Imaging modes on a 3x3 Ni dot array, single NV and wide field.
    Fig4 {
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Pearson correlation versus time, single versus dual driving.
    Fig5 {
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Contrast, linewidth and sensitivity versus Rabi frequency.
    Fig6 {
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Re-run a manifest into a new directory and compare every artifact.
    Replay {
        manifest: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> String {
        let (a, b) = match self {
            Command::Encode(EncodeCmd::Qr { .. }) => ("encode", "qr"),
            Command::Encode(EncodeCmd::Barcode { .. }) => ("encode", "barcode"),
            Command::Layout(LayoutCmd::Qr { .. }) => ("layout", "qr"),
            Command::Layout(LayoutCmd::Barcode { .. }) => ("layout", "barcode"),
            Command::Layout(LayoutCmd::Art { .. }) => ("layout", "art"),
            Command::Field(_) => ("field", ""),
            Command::Image(_) => ("image", ""),
            Command::Decode(DecodeCmd::Qr { .. }) => ("decode", "qr"),
            Command::Decode(DecodeCmd::Barcode { .. }) => ("decode", "barcode"),
            Command::Sweep(_) => ("sweep", ""),
            Command::Correlate(_) => ("correlate", ""),
            Command::Demo(DemoCmd::Fig1 { .. }) => ("demo", "fig1"),
            Command::Demo(DemoCmd::Fig2 { .. }) => ("demo", "fig2"),
            Command::Demo(DemoCmd::Fig4 { .. }) => ("demo", "fig4"),
            Command::Demo(DemoCmd::Fig5 { .. }) => ("demo", "fig5"),
            Command::Demo(DemoCmd::Fig6 { .. }) => ("demo", "fig6"),
            Command::Demo(DemoCmd::Replay { .. }) => ("demo", "replay"),
        };
        if b.is_empty() {
            a.to_string()
        } else {
            format!("{a} {b}")
        }
    }

    /// Points the command's primary output at `dir`. Single-file outputs keep
    /// their file name.
    pub fn redirect(&mut self, dir: &Path) {
        let retarget = |p: &mut PathBuf| {
            let name = p.file_name().map(PathBuf::from).unwrap_or_default();
            *p = dir.join(name);
        };
        match self {
            Command::Encode(EncodeCmd::Qr { out, .. } | EncodeCmd::Barcode { out, .. }) => retarget(out),
            Command::Layout(LayoutCmd::Qr { out, .. } | LayoutCmd::Barcode { out, .. } | LayoutCmd::Art { out, .. }) => {
                retarget(&mut out.out);
                if let Some(o) = out.optical.as_mut() {
                    retarget(o);
                }
            }
            Command::Field(FieldArgs { scene }) | Command::Image(ImageArgs { scene, .. }) | Command::Correlate(CorrelateArgs { scene, .. }) => {
                scene.out = dir.to_path_buf()
            }
            Command::Decode(DecodeCmd::Qr { opts, .. } | DecodeCmd::Barcode { opts, .. }) => opts.out = Some(dir.to_path_buf()),
            Command::Sweep(SweepArgs { out }) => *out = dir.to_path_buf(),
            Command::Demo(
                DemoCmd::Fig1 { out }
                | DemoCmd::Fig2 { out }
                | DemoCmd::Fig4 { out }
                | DemoCmd::Fig5 { out }
                | DemoCmd::Fig6 { out }
                | DemoCmd::Replay { out, .. },
            ) => *out = dir.to_path_buf(),
        }
    }

    /// Writes the command's flags into the config they override.
    pub fn apply(&self, cfg: &mut RunConfig) {
        let scene = |s: &SceneArgs, cfg: &mut RunConfig| {
            if let Some(p) = s.pixel_um {
                cfg.scene.pixel_um = p;
            }
            if let Some(z) = s.standoff_um {
                cfg.scene.standoff_um = Some(z);
            }
        };
        match self {
            Command::Field(a) => scene(&a.scene, cfg),
            Command::Image(a) => {
                scene(&a.scene, cfg);
                if let Some(m) = a.mode {
                    cfg.drive.mode = m.into();
                }
                if let Some(o) = a.omega {
                    cfg.drive.omega1 = o;
                    cfg.drive.omega2 = o;
                }
                if let Some(t) = a.exposure {
                    cfg.stack.exposure_s = t;
                }
                if let Some(p) = a.psf {
                    cfg.psf.kind = p.into();
                }
                cfg.scene.noise_free |= a.noise_free;
                cfg.scene.save_stack |= a.save_stack;
            }
            Command::Correlate(a) => {
                scene(&a.scene, cfg);
                if let Some(n) = a.seeds {
                    cfg.correlate.seeds = n;
                }
                if let Some(t) = &a.times {
                    cfg.correlate.times_s = t.clone();
                }
            }
            _ => {}
        }
    }
}

/// Effective config: defaults < file < MAGSTEGO_SEED < flags.
fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            RunConfig::from_json(&text).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Ok(s) = std::env::var("MAGSTEGO_SEED") {
        cfg.seed = s
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("MAGSTEGO_SEED is not an unsigned integer: {s:?}")))?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    cli.command.apply(&mut cfg);
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            eprintln!("{}", CliError::usage(e.kind()).to_json());
            return ExitCode::from(run::EXIT_USAGE as u8);
        }
    };
    let result = resolve_config(&cli).and_then(|cfg| {
        if cfg.workers > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build_global()
                .map_err(CliError::usage)?;
        }
        commands::dispatch(&cli.command, &cfg, cli.config.as_deref(), cli.workers)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code as u8)
        }
    }
}
