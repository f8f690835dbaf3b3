//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use magstego::codec::{code39_decode, code39_encode, qr_decode, qr_encode, ElementSequence, ModuleMatrix};
use magstego::imaging::{
    correlation_curve, crossing_time, expected_curves, extract_mode_images, median_series, recover_barcode,
    recover_qr, scene_bpar, ExpectedStack, ModeImages, Psf,
};
use magstego::io::{read_csv_grid, read_pgm};
use magstego::layout::{
    diamond_mask, heart_mask, layout_barcode, layout_pixel_art, layout_qr, optical_render, Bitmap, Geometry,
    MagneticPattern,
};
use magstego::magnetics::{BParMap, HeatmapScale};
use magstego::nvmodel::{DriveConfig, DriveMode};
use magstego::Grid;
use serde::Serialize;

use crate::config::RunConfig;
use crate::run::{CliError, CliResult, Outputs};
use crate::{demo, ArtPreset, Command, DecodeCmd, DecodeOpts, EncodeCmd, LayoutCmd, LayoutOut, SceneArgs};

pub fn dispatch(cmd: &Command, cfg: &RunConfig, config_path: Option<&Path>, workers: Option<usize>) -> CliResult<()> {
    match cmd {
        Command::Encode(e) => encode(cmd, e, cfg, config_path),
        Command::Layout(l) => layout(cmd, l, cfg, config_path),
        Command::Field(a) => in_dir(&a.scene.out, cmd, cfg, config_path, |o| field(o, &a.scene, cfg)),
        Command::Image(a) => in_dir(&a.scene.out, cmd, cfg, config_path, |o| image(o, &a.scene, cfg)),
        Command::Decode(d) => decode(cmd, d, cfg, config_path),
        Command::Sweep(a) => in_dir(&a.out, cmd, cfg, config_path, |o| demo::sweep(o, cfg).map(|_| ())),
        Command::Correlate(a) => in_dir(&a.scene.out, cmd, cfg, config_path, |o| {
            let pattern = read_pattern(&a.scene.pattern)?;
            demo::correlate(o, &pattern, cfg).map(|_| ())
        }),
        Command::Demo(d) => demo::run(cmd, d, cfg, config_path, workers),
    }
}

/// Runs `f` with outputs collected in `dir`, then writes `manifest.json`.
/// A failure removes whatever `f` had written.
pub fn in_dir(
    dir: &Path,
    cmd: &Command,
    cfg: &RunConfig,
    config_path: Option<&Path>,
    f: impl FnOnce(&mut Outputs) -> CliResult<()>,
) -> CliResult<()> {
    let mut out = Outputs::new(dir)?;
    match f(&mut out) {
        Ok(()) => {
            out.finish("manifest.json", cmd, cfg, config_path)?;
            Ok(())
        }
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

/// Like [`in_dir`] for a command whose product is one file; the manifest is
/// written next to it as `<file>.manifest.json`.
fn single_file(
    path: &Path,
    cmd: &Command,
    cfg: &RunConfig,
    config_path: Option<&Path>,
    f: impl FnOnce(&mut Outputs, &str) -> CliResult<()>,
) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| CliError::usage(format!("not a file path: {}", path.display())))?
        .to_string_lossy()
        .into_owned();
    let mut out = Outputs::new(&dir)?;
    match f(&mut out, &name) {
        Ok(()) => {
            out.finish(&format!("{name}.manifest.json"), cmd, cfg, config_path)?;
            Ok(())
        }
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

fn encode(cmd: &Command, e: &EncodeCmd, cfg: &RunConfig, config_path: Option<&Path>) -> CliResult<()> {
    match e {
        EncodeCmd::Qr { payload, ec, out } => {
            let m = qr_encode(payload.as_bytes(), (*ec).into())?;
            single_file(out, cmd, cfg, config_path, |o, name| {
                fs::write(o.file(name), m.to_grid_string())?;
                Ok(())
            })
        }
        EncodeCmd::Barcode { text, out } => {
            let seq = code39_encode(text)?;
            single_file(out, cmd, cfg, config_path, |o, name| {
                fs::write(o.file(name), format!("{seq}\n"))?;
                Ok(())
            })
        }
    }
}

pub fn art_bitmap(p: ArtPreset) -> Bitmap {
    match p {
        ArtPreset::Heart => heart_mask(),
        ArtPreset::Diamond => diamond_mask(),
        ArtPreset::Dots3 => Bitmap::filled(3, 3),
        ArtPreset::Empty => Bitmap::new(9, 9),
    }
}

pub fn read_elements(path: &Path) -> CliResult<ElementSequence> {
    Ok(ElementSequence::from_str(&fs::read_to_string(path)?)?)
}

pub fn read_pattern(path: &Path) -> CliResult<MagneticPattern> {
    let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(MagneticPattern::from_json(&text)?)
}

fn layout(cmd: &Command, l: &LayoutCmd, cfg: &RunConfig, config_path: Option<&Path>) -> CliResult<()> {
    let (pattern, dest): (MagneticPattern, &LayoutOut) = match l {
        LayoutCmd::Qr { grid, out } => {
            let m = ModuleMatrix::parse_grid(&fs::read_to_string(grid)?)?;
            (layout_qr(&m, &cfg.geometry.qr)?, out)
        }
        LayoutCmd::Barcode { elements, out } => (layout_barcode(&read_elements(elements)?, &cfg.geometry.barcode)?, out),
        LayoutCmd::Art { cover, hidden, out } => (
            layout_pixel_art(&art_bitmap(*cover), &art_bitmap(*hidden), &cfg.geometry.pixel_art)?,
            out,
        ),
    };
    single_file(&dest.out, cmd, cfg, config_path, |o, name| {
        fs::write(o.file(name), pattern.to_json() + "\n")?;
        if let Some(opt) = &dest.optical {
            let img = optical_render(&pattern, &pixel_grid(&pattern, cfg), None);
            img.write_pgm(opt)?;
            o.extend([opt.clone()]);
        }
        Ok(())
    })
}

/// Square pixel grid covering the pattern plus the configured margin.
pub fn pixel_grid(pattern: &MagneticPattern, cfg: &RunConfig) -> Grid {
    let ([x0, y0], [x1, y1]) = pattern.bounds_xy().unwrap_or(([0.0, 0.0], [0.0, 0.0]));
    let width = (x1 - x0).max(y1 - y0) + 2.0 * cfg.scene.margin_um;
    Grid::centered(0.5 * (x0 + x1), 0.5 * (y0 + y1), width, cfg.scene.pixel_um)
}

fn standoff(cfg: &RunConfig) -> f64 {
    cfg.scene.standoff_um.unwrap_or(cfg.geometry.pixel_art.standoff_um)
}

/// Axial field on the pixel grid itself (no PSF).
pub fn pixel_bpar(pattern: &MagneticPattern, pixels: &Grid, standoff_um: f64, cfg: &RunConfig) -> CliResult<BParMap> {
    Ok(scene_bpar(pattern, pixels, &Psf::delta(), standoff_um, &cfg.frame)?)
}

/// Field on the PSF grid and the noise-free stacks for each drive.
pub fn expected_stacks(
    pattern: &MagneticPattern,
    pixels: &Grid,
    standoff_um: f64,
    cfg: &RunConfig,
    drives: &[DriveConfig],
) -> CliResult<Vec<ExpectedStack>> {
    let bpar = scene_bpar(pattern, pixels, &cfg.psf, standoff_um, &cfg.frame)?;
    drives
        .iter()
        .map(|d| Ok(expected_curves(&bpar, pixels, &cfg.model, d, &cfg.psf, cfg.stack.table_oversample)?))
        .collect()
}

pub fn drive_for(cfg: &RunConfig, mode: DriveMode) -> DriveConfig {
    DriveConfig { mode, ..cfg.drive.clone() }
}

#[derive(Serialize)]
struct FieldSummary {
    grid: Grid,
    standoff_um: f64,
    bias_par_g: f64,
    delta_min_g: f64,
    delta_max_g: f64,
}

fn field(o: &mut Outputs, s: &SceneArgs, cfg: &RunConfig) -> CliResult<()> {
    let pattern = read_pattern(&s.pattern)?;
    let pixels = pixel_grid(&pattern, cfg);
    let z = standoff(cfg);
    let bpar = pixel_bpar(&pattern, &pixels, z, cfg)?;
    bpar.write_csv(&o.file("bpar.csv"))?;
    let pgm = o.file("bpar.pgm");
    bpar.write_heatmap(&pgm)?;
    o.extend([pgm.with_extension("json")]);
    let d = bpar.delta();
    o.write_json(
        "summary.json",
        &FieldSummary {
            grid: pixels,
            standoff_um: z,
            bias_par_g: bpar.bias_par,
            delta_min_g: d.iter().copied().fold(f64::INFINITY, f64::min),
            delta_max_g: d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct ImageSummary {
    grid: Grid,
    mode: DriveMode,
    exposure_s: f64,
    seed: Option<u64>,
    baseline: f64,
    valid_fraction: f64,
}

fn image(o: &mut Outputs, s: &SceneArgs, cfg: &RunConfig) -> CliResult<()> {
    let pattern = read_pattern(&s.pattern)?;
    let pixels = pixel_grid(&pattern, cfg);
    let ex = expected_stacks(&pattern, &pixels, standoff(cfg), cfg, std::slice::from_ref(&cfg.drive))?.remove(0);
    let seed = (!cfg.scene.noise_free).then_some(cfg.seed);
    let stack = ex.sample(&cfg.stack, seed);
    let img = extract_mode_images(&stack, ex.baseline)?;
    o.extend(img.write(&o.dir.clone(), "modes")?);
    if cfg.scene.save_stack {
        stack.write_raw(&o.file("stack.raw"))?;
    }
    o.write_json(
        "summary.json",
        &ImageSummary {
            grid: pixels,
            mode: cfg.drive.mode,
            exposure_s: cfg.stack.exposure_s,
            seed,
            baseline: ex.baseline,
            valid_fraction: img.valid_fraction(),
        },
    )?;
    Ok(())
}

/// Reads a map written by `image` (CSV or PGM) with its JSON sidecar.
pub fn read_map(path: &Path) -> CliResult<(Grid, Vec<f64>)> {
    let sidecar = path.with_extension("json");
    let scale: HeatmapScale = serde_json::from_str(
        &fs::read_to_string(&sidecar).map_err(|e| CliError::data(format!("{}: {e}", sidecar.display())))?,
    )?;
    let grid = Grid::new(scale.x0_um, scale.y0_um, scale.step_um, scale.width, scale.height);
    let values = match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => {
            let img = read_pgm(path)?;
            if (img.width, img.height) != (grid.nx, grid.ny) {
                return Err(CliError::data("image and sidecar disagree on shape"));
            }
            let span = scale.max - scale.min;
            img.data
                .iter()
                .map(|&v| scale.min + span * v as f64 / img.maxval as f64)
                .collect()
        }
        Some("csv") => {
            let (w, h, v) = read_csv_grid(path)?;
            if (w, h) != (grid.nx, grid.ny) {
                return Err(CliError::data("CSV and sidecar disagree on shape"));
            }
            v
        }
        _ => return Err(CliError::usage(format!("expected a .pgm or .csv map: {}", path.display()))),
    };
    Ok((grid, values))
}

fn images_from(grid: Grid, contrast: Vec<f64>, freq_shift: Vec<f64>, cfg: &RunConfig) -> ModeImages {
    let n = grid.len();
    ModeImages {
        grid,
        valid: contrast.iter().zip(&freq_shift).map(|(c, f)| c.is_finite() || f.is_finite()).collect(),
        field_g: vec![f64::NAN; n],
        linewidth: vec![f64::NAN; n],
        contrast,
        freq_shift,
        sweep_mhz: [cfg.drive.sweep.start, cfg.drive.sweep.stop],
    }
}

fn geometry(opts: &DecodeOpts, default: &Geometry) -> CliResult<Geometry> {
    match &opts.geom {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => Ok(default.clone()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QrReport {
    pub decoded: bool,
    pub payload: Option<String>,
    pub error: Option<String>,
    pub symbol_accuracy: Option<f64>,
    pub module_accuracy: Option<f64>,
    pub codewords_corrected: Option<usize>,
    pub separability: f64,
    pub alignment: f64,
    pub origin: [f64; 2],
}

/// Recovers and decodes a QR symbol; `expect` adds the module accuracy.
pub fn read_qr(img: &ModeImages, geom: &Geometry, origin: [f64; 2], cfg: &RunConfig, expect: Option<&ModuleMatrix>) -> CliResult<QrReport> {
    let rec = recover_qr(img, geom, origin, &cfg.recover)?;
    let module_accuracy = expect.map(|m| rec.matrix.agreement(m));
    let mut report = QrReport {
        decoded: false,
        payload: None,
        error: None,
        symbol_accuracy: None,
        module_accuracy,
        codewords_corrected: None,
        separability: rec.separability,
        alignment: rec.alignment,
        origin: rec.origin,
    };
    match qr_decode(&rec.matrix) {
        Ok(d) => {
            report.decoded = true;
            report.payload = Some(d.payload_str());
            report.symbol_accuracy = Some(d.symbol_accuracy);
            report.codewords_corrected = Some(d.codewords_corrected);
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct BarcodeReport {
    pub text: String,
    pub units: usize,
    pub separability: f64,
    pub origin: [f64; 2],
    pub elements: String,
}

/// Narrow-width units of a Code 39 strip holding `chars` characters
/// including both delimiters.
fn strip_units(chars: usize) -> usize {
    code39_encode(&"A".repeat(chars.saturating_sub(2)))
        .map(|s| s.total_units() as usize)
        .unwrap_or(usize::MAX)
}

/// Reads a barcode; without `units` every strip length that fits the image
/// is tried and the first one that decodes wins.
pub fn read_barcode(img: &ModeImages, geom: &Geometry, origin: [f64; 2], units: Option<usize>, cfg: &RunConfig) -> CliResult<BarcodeReport> {
    let candidates: Vec<usize> = match units {
        Some(u) => vec![u],
        None => {
            let span = img.grid.x(img.grid.nx - 1) - origin[0];
            (2..)
                .map(strip_units)
                .take_while(|&u| u as f64 * geom.narrow_width_um <= span)
                .collect()
        }
    };
    let mut last: CliError = CliError::data("image too small for any barcode");
    for u in candidates {
        match recover_barcode(img, geom, origin, u, &cfg.recover) {
            Ok(rec) => match code39_decode(&rec.sequence) {
                Ok(text) => {
                    return Ok(BarcodeReport {
                        text,
                        units: u,
                        separability: rec.separability,
                        origin: rec.origin,
                        elements: rec.sequence.to_string(),
                    })
                }
                Err(e) => last = e.into(),
            },
            Err(e) => last = e.into(),
        }
    }
    Err(last)
}

fn decode(cmd: &Command, d: &DecodeCmd, cfg: &RunConfig, config_path: Option<&Path>) -> CliResult<()> {
    let (opts, report_json, failure) = match d {
        DecodeCmd::Qr { contrast, opts, expect } => {
            let (grid, values) = read_map(contrast)?;
            let img = images_from(grid, values, vec![f64::NAN; grid.len()], cfg);
            let expect = match expect {
                Some(p) => Some(ModuleMatrix::parse_grid(&fs::read_to_string(p)?)?),
                None => None,
            };
            let geom = geometry(opts, &cfg.geometry.qr)?;
            let r = read_qr(&img, &geom, origin(opts)?, cfg, expect.as_ref())?;
            let failure = r.error.clone().map(|m| CliError::new("Codec", m, crate::run::EXIT_DATA));
            (opts, serde_json::to_value(&r)?, failure)
        }
        DecodeCmd::Barcode { shift, opts, units } => {
            let (grid, values) = read_map(shift)?;
            let img = images_from(grid, vec![f64::NAN; grid.len()], values, cfg);
            let geom = geometry(opts, &cfg.geometry.barcode)?;
            let r = read_barcode(&img, &geom, origin(opts)?, *units, cfg)?;
            (opts, serde_json::to_value(&r)?, None)
        }
    };
    println!("{}", serde_json::to_string_pretty(&report_json)?);
    if let Some(dir) = &opts.out {
        in_dir(dir, cmd, cfg, config_path, |o| {
            o.write_json("decode.json", &report_json)?;
            Ok(())
        })?;
    }
    failure.map_or(Ok(()), Err)
}

fn origin(opts: &DecodeOpts) -> CliResult<[f64; 2]> {
    match opts.origin.as_slice() {
        [x, y] => Ok([*x, *y]),
        _ => Err(CliError::usage("--origin takes two values")),
    }
}

/// Noise-free mode images of `ex`.
pub fn noise_free_modes(ex: &ExpectedStack, cfg: &RunConfig) -> CliResult<ModeImages> {
    Ok(extract_mode_images(&ex.sample(&cfg.stack, None), ex.baseline)?)
}

/// Median-over-seeds crossing times for each mode.
pub fn crossings(points: &[magstego::imaging::CorrelationPoint], modes: &[DriveMode], level: f64) -> Vec<Option<f64>> {
    modes
        .iter()
        .map(|m| crossing_time(&median_series(points, *m), level))
        .collect()
}

pub fn correlation(
    stacks: &[(DriveMode, &ExpectedStack)],
    cfg: &RunConfig,
) -> CliResult<Vec<magstego::imaging::CorrelationPoint>> {
    Ok(correlation_curve(
        stacks,
        &cfg.stack,
        &cfg.correlate.times_s,
        &cfg.seeds(cfg.correlate.seeds),
    )?)
}
