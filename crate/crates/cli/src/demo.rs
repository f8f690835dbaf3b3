//! Canned demo scenarios at desk scale and manifest replay.

use std::fs;
use std::path::Path;

use magstego::codec::{code39_encode, qr_encode, EcLevel, ModuleMatrix};
use magstego::imaging::{extract_mode_images, median_series, CorrelationPoint, ModeImages, Psf, PsfKind};
use magstego::io::{write_csv_table, write_pgm};
use magstego::layout::{
    barcode_extent, diamond_mask, heart_mask, layout_barcode, layout_pixel_art, layout_qr, optical_render,
    Bitmap, Geometry, MagneticPattern,
};
use magstego::nvmodel::{
    odmr::write_sweep_csv, odmr_lineshape, odmr_metrics, sensitivity, sensitivity_sweep, DriveConfig, DriveMode,
    SweepRow,
};
use magstego::Grid;
use serde::Serialize;

use crate::commands::{self, correlation, crossings, drive_for, expected_stacks, in_dir, noise_free_modes, pixel_bpar};
use crate::config::RunConfig;
use crate::run::{CliError, CliResult, Outputs, RunManifest, EXIT_DATA};
use crate::{Command, DemoCmd};

pub const QR_PAYLOADS: [&str; 2] = ["http://www.korea.ac.kr", "http://www.qdl.korea.ac.kr"];
pub const BARCODE_TEXTS: [&str; 2] = ["NV", "KR"];

pub fn run(cmd: &Command, d: &DemoCmd, cfg: &RunConfig, config_path: Option<&Path>, workers: Option<usize>) -> CliResult<()> {
    match d {
        DemoCmd::Fig1 { out } => in_dir(out, cmd, cfg, config_path, |o| fig1(o, cfg)),
        DemoCmd::Fig2 { out } => in_dir(out, cmd, cfg, config_path, |o| fig2(o, cfg).map(|_| ())),
        DemoCmd::Fig4 { out } => in_dir(out, cmd, cfg, config_path, |o| fig4(o, cfg).map(|_| ())),
        DemoCmd::Fig5 { out } => in_dir(out, cmd, cfg, config_path, |o| {
            let m = qr_encode(QR_PAYLOADS[0].as_bytes(), EcLevel::L)?;
            let pattern = layout_qr(&m, &cfg.geometry.qr)?;
            correlate(o, &pattern, cfg).map(|_| ())
        }),
        DemoCmd::Fig6 { out } => in_dir(out, cmd, cfg, config_path, |o| fig6(o, cfg).map(|_| ())),
        DemoCmd::Replay { manifest, out } => replay(manifest, out, workers),
    }
}

fn square_grid(pattern: &MagneticPattern, cfg: &RunConfig) -> Grid {
    commands::pixel_grid(pattern, cfg)
}

fn write_map(o: &mut Outputs, name: &str, grid: &Grid, values: &[f64], quantity: &str) -> CliResult<()> {
    let pgm = o.file(&format!("{name}.pgm"));
    magstego::magnetics::write_heatmap(&pgm, grid, values, quantity)?;
    o.extend([pgm.with_extension("json")]);
    let csv = o.file(&format!("{name}.csv"));
    magstego::io::write_csv_grid(&csv, grid.nx, values)?;
    Ok(())
}

fn write_modes(o: &mut Outputs, img: &ModeImages, stem: &str) -> CliResult<()> {
    let dir = o.dir.clone();
    o.extend(img.write(&dir, stem)?);
    Ok(())
}

fn write_optical(o: &mut Outputs, name: &str, pattern: &MagneticPattern, grid: &Grid) -> CliResult<Vec<u8>> {
    let img = optical_render(pattern, grid, None);
    let px = img.to_u8();
    write_pgm(&o.file(name), grid.nx, grid.ny, &px)?;
    Ok(px)
}

#[derive(Serialize)]
struct Fig1Summary {
    optical_identical: bool,
    hidden_dots: usize,
    decoy_valid_fraction: f64,
    hidden_valid_fraction: f64,
}

/// Heart-shaped cover with a hidden Ni diamond, next to an all-Au decoy.
fn fig1(o: &mut Outputs, cfg: &RunConfig) -> CliResult<()> {
    let geom = &cfg.geometry.pixel_art;
    let hidden = layout_pixel_art(&heart_mask(), &diamond_mask(), geom)?;
    let decoy = layout_pixel_art(&heart_mask(), &Bitmap::new(9, 9), geom)?;
    let grid = square_grid(&hidden, cfg);
    let a = write_optical(o, "optical_hidden.pgm", &hidden, &grid)?;
    let b = write_optical(o, "optical_decoy.pgm", &decoy, &grid)?;
    let z = cfg.standoff(geom);
    let mut valid = Vec::new();
    for (name, pattern) in [("hidden", &hidden), ("decoy", &decoy)] {
        let bpar = pixel_bpar(pattern, &grid, z, cfg)?;
        write_map(o, &format!("{name}_bpar"), &grid, &bpar.delta(), "bpar_minus_bias_G")?;
        let ex = expected_stacks(pattern, &grid, z, cfg, std::slice::from_ref(&cfg.drive))?.remove(0);
        let img = extract_mode_images(&ex.sample(&cfg.stack, Some(cfg.seed)), ex.baseline)?;
        write_modes(o, &img, &format!("{name}_modes"))?;
        valid.push(img.valid_fraction());
    }
    o.write_json(
        "summary.json",
        &Fig1Summary {
            optical_identical: a == b,
            hidden_dots: diamond_mask().popcount(),
            hidden_valid_fraction: valid[0],
            decoy_valid_fraction: valid[1],
        },
    )?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdRow {
    pub exposure_s: f64,
    pub seed: u64,
    pub module_accuracy: f64,
    pub decoded: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct QrOutcome {
    pub payload: String,
    pub noise_free: commands::QrReport,
    pub high_exposure: commands::QrReport,
    /// Smallest exposure from which every seed decodes to the payload.
    pub threshold_exposure_s: Option<f64>,
    /// Worst module accuracy over the seeds at the threshold exposure.
    pub threshold_module_accuracy: Option<f64>,
    pub rows: Vec<ThresholdRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BarcodeOutcome {
    pub text: String,
    pub noise_free: Option<String>,
    pub high_exposure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig2Summary {
    pub barcode_optical_identical: bool,
    pub qr_optical_identical: bool,
    pub barcodes: Vec<BarcodeOutcome>,
    pub qrs: Vec<QrOutcome>,
}

fn fig2(o: &mut Outputs, cfg: &RunConfig) -> CliResult<Fig2Summary> {
    let high = cfg.stack.with_exposure(cfg.threshold.high_exposure_s);

    let bgeom = &cfg.geometry.barcode;
    let seqs = BARCODE_TEXTS
        .iter()
        .map(|t| code39_encode(t))
        .collect::<Result<Vec<_>, _>>()?;
    let patterns = seqs
        .iter()
        .map(|s| layout_barcode(s, bgeom))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = strip_grid(barcode_extent(&seqs[0], bgeom), bgeom, cfg);
    let mut optical = Vec::new();
    let mut barcodes = Vec::new();
    for ((text, seq), pattern) in BARCODE_TEXTS.iter().zip(&seqs).zip(&patterns) {
        fs::write(o.file(&format!("barcode_{text}.txt")), format!("{seq}\n"))?;
        optical.push(write_optical(o, &format!("barcode_{text}_optical.pgm"), pattern, &grid)?);
        let z = cfg.standoff(bgeom);
        let bpar = pixel_bpar(pattern, &grid, z, cfg)?;
        write_map(o, &format!("barcode_{text}_bpar"), &grid, &bpar.delta(), "bpar_minus_bias_G")?;
        let ex = expected_stacks(pattern, &grid, z, cfg, std::slice::from_ref(&cfg.drive))?.remove(0);
        let clean = noise_free_modes(&ex, cfg)?;
        write_modes(o, &clean, &format!("barcode_{text}_modes"))?;
        let noisy = extract_mode_images(&ex.sample(&high, Some(cfg.seed)), ex.baseline)?;
        let units = Some(seq.total_units() as usize);
        let read = |img: &ModeImages| commands::read_barcode(img, bgeom, [0.0, 0.0], units, cfg).ok().map(|r| r.text);
        barcodes.push(BarcodeOutcome {
            text: text.to_string(),
            noise_free: read(&clean),
            high_exposure: read(&noisy),
        });
    }
    let barcode_optical_identical = optical.windows(2).all(|w| w[0] == w[1]);

    let qgeom = &cfg.geometry.qr;
    let mut qr_optical = Vec::new();
    let mut qrs = Vec::new();
    for (k, payload) in QR_PAYLOADS.iter().enumerate() {
        let m = qr_encode(payload.as_bytes(), EcLevel::L)?;
        fs::write(o.file(&format!("qr{k}.grid")), m.to_grid_string())?;
        let pattern = layout_qr(&m, qgeom)?;
        let grid = commands::pixel_grid(&pattern, cfg);
        qr_optical.push(write_optical(o, &format!("qr{k}_optical.pgm"), &pattern, &grid)?);
        let z = cfg.standoff(qgeom);
        let bpar = pixel_bpar(&pattern, &grid, z, cfg)?;
        write_map(o, &format!("qr{k}_bpar"), &grid, &bpar.delta(), "bpar_minus_bias_G")?;
        let ex = expected_stacks(&pattern, &grid, z, cfg, std::slice::from_ref(&cfg.drive))?.remove(0);
        let clean = noise_free_modes(&ex, cfg)?;
        write_modes(o, &clean, &format!("qr{k}_modes"))?;
        let noise_free = commands::read_qr(&clean, qgeom, [0.0, 0.0], cfg, Some(&m))?;
        let noisy = extract_mode_images(&ex.sample(&high, Some(cfg.seed)), ex.baseline)?;
        let high_exposure = commands::read_qr(&noisy, qgeom, [0.0, 0.0], cfg, Some(&m))?;
        let rows = threshold_sweep(&ex, &m, payload, qgeom, cfg)?;
        write_csv_table(
            &o.file(&format!("qr{k}_threshold.csv")),
            &["exposure_s", "seed", "module_accuracy", "decoded"],
            &rows
                .iter()
                .map(|r| vec![r.exposure_s, r.seed as f64, r.module_accuracy, r.decoded as u8 as f64])
                .collect::<Vec<_>>(),
        )?;
        let (threshold_exposure_s, threshold_module_accuracy) = threshold_of(&rows);
        qrs.push(QrOutcome {
            payload: payload.to_string(),
            noise_free,
            high_exposure,
            threshold_exposure_s,
            threshold_module_accuracy,
            rows,
        });
    }
    let summary = Fig2Summary {
        barcode_optical_identical,
        qr_optical_identical: qr_optical.windows(2).all(|w| w[0] == w[1]),
        barcodes,
        qrs,
    };
    o.write_json("summary.json", &summary)?;
    Ok(summary)
}

/// Grid covering a barcode strip of `length` µm, square, with margin.
fn strip_grid(length: f64, geom: &Geometry, cfg: &RunConfig) -> Grid {
    let width = length.max(geom.bar_length_um) + 2.0 * cfg.scene.margin_um;
    Grid::centered(0.5 * length, 0.5 * geom.bar_length_um, width, cfg.scene.pixel_um)
}

fn threshold_sweep(
    ex: &magstego::imaging::ExpectedStack,
    m: &ModuleMatrix,
    payload: &str,
    geom: &Geometry,
    cfg: &RunConfig,
) -> CliResult<Vec<ThresholdRow>> {
    let mut rows = Vec::new();
    for &t in &cfg.threshold.exposures_s {
        for seed in cfg.seeds(cfg.threshold.seeds) {
            let img = extract_mode_images(&ex.sample(&cfg.stack.with_exposure(t), Some(seed)), ex.baseline)?;
            let (module_accuracy, decoded) = match commands::read_qr(&img, geom, [0.0, 0.0], cfg, Some(m)) {
                Ok(r) => (r.module_accuracy.unwrap_or(0.0), r.payload.as_deref() == Some(payload)),
                Err(_) => (0.0, false),
            };
            rows.push(ThresholdRow {
                exposure_s: t,
                seed,
                module_accuracy,
                decoded,
            });
        }
    }
    Ok(rows)
}

/// First exposure from which every seed at every longer exposure decodes.
pub fn threshold_of(rows: &[ThresholdRow]) -> (Option<f64>, Option<f64>) {
    let mut times: Vec<f64> = rows.iter().map(|r| r.exposure_s).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let ok = |t: f64| rows.iter().filter(|r| r.exposure_s == t).all(|r| r.decoded);
    let first = (0..times.len()).find(|&i| times[i..].iter().all(|&t| ok(t)));
    match first {
        Some(i) => {
            let t = times[i];
            let acc = rows
                .iter()
                .filter(|r| r.exposure_s == t)
                .map(|r| r.module_accuracy)
                .fold(f64::INFINITY, f64::min);
            (Some(t), Some(acc))
        }
        None => (None, None),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DotReport {
    pub row: usize,
    pub col: usize,
    /// Position of the lowest contrast within the dot's cell, µm.
    pub contrast_min_at: [f64; 2],
    pub contrast_min_inside: bool,
    pub shift_range_mhz: [f64; 2],
    pub shift_sign_change: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig4Summary {
    pub dots: Vec<DotReport>,
    pub contrast_min_inside: usize,
    pub shift_sign_changes: usize,
}

/// Pixels whose centre lies in the closed box.
fn pixels_in(g: &Grid, x: [f64; 2], y: [f64; 2]) -> Vec<usize> {
    let eps = 1e-9;
    let mut out = Vec::new();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (px, py) = (g.x(i), g.y(j));
            if px >= x[0] - eps && px <= x[1] + eps && py >= y[0] - eps && py <= y[1] + eps {
                out.push(g.index(i, j));
            }
        }
    }
    out
}

/// Per-dot statistics of the wide-field modes of a dot array laid out by
/// `layout_pixel_art` with `rows x cols` dots.
pub fn dot_report(img: &ModeImages, geom: &Geometry, rows: usize, cols: usize) -> Fig4Summary {
    let g = &img.grid;
    let [w, h] = geom.dot_size_um;
    let gap = 0.5 * (geom.pitch_um - w.max(h));
    let mut dots = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let (x0, y0) = (c as f64 * geom.pitch_um, r as f64 * geom.pitch_um);
            let cell = pixels_in(g, [x0 - gap, x0 + w + gap], [y0 - gap, y0 + h + gap]);
            let lowest = cell
                .iter()
                .copied()
                .filter(|p| img.contrast[*p].is_finite())
                .min_by(|a, b| img.contrast[*a].total_cmp(&img.contrast[*b]));
            let at = lowest.map_or([f64::NAN; 2], |p| [g.x(p % g.nx), g.y(p / g.nx)]);
            let inside = at[0] >= x0 && at[0] <= x0 + w && at[1] >= y0 && at[1] <= y0 + h;
            let foot = pixels_in(g, [x0, x0 + w], [y0, y0 + h]);
            let shifts: Vec<f64> = foot.iter().map(|p| img.freq_shift[*p]).filter(|v| v.is_finite()).collect();
            let lo = shifts.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = shifts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            dots.push(DotReport {
                row: r,
                col: c,
                contrast_min_at: at,
                contrast_min_inside: inside,
                shift_range_mhz: [lo, hi],
                shift_sign_change: lo < 0.0 && hi > 0.0,
            });
        }
    }
    Fig4Summary {
        contrast_min_inside: dots.iter().filter(|d| d.contrast_min_inside).count(),
        shift_sign_changes: dots.iter().filter(|d| d.shift_sign_change).count(),
        dots,
    }
}

/// 3x3 Ni dots: single-NV field map and wide-field modes.
fn fig4(o: &mut Outputs, cfg: &RunConfig) -> CliResult<Fig4Summary> {
    let geom = &cfg.geometry.pixel_art;
    let pattern = layout_pixel_art(&Bitmap::filled(3, 3), &Bitmap::filled(3, 3), geom)?;
    let center = pattern.center_xy();
    let grid = Grid::centered(center[0], center[1], 20.0, 0.25);
    let z = cfg.standoff(geom);

    let mut single = cfg.clone();
    single.psf = Psf {
        kind: PsfKind::Delta,
        ..cfg.psf
    };
    let ex = expected_stacks(&pattern, &grid, z, &single, std::slice::from_ref(&cfg.drive))?.remove(0);
    write_modes(o, &noise_free_modes(&ex, cfg)?, "single_nv")?;
    let bpar = pixel_bpar(&pattern, &grid, z, cfg)?;
    write_map(o, "single_nv_bpar", &grid, &bpar.delta(), "bpar_minus_bias_G")?;

    let ex = expected_stacks(&pattern, &grid, z, cfg, std::slice::from_ref(&cfg.drive))?.remove(0);
    let img = noise_free_modes(&ex, cfg)?;
    write_modes(o, &img, "wide_field")?;
    let summary = dot_report(&img, geom, 3, 3);
    o.write_json("summary.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig5Summary {
    pub single_mode: DriveMode,
    pub level: f64,
    pub seeds: usize,
    pub t_single_s: Option<f64>,
    pub t_dual_s: Option<f64>,
    pub ratio: Option<f64>,
    pub single_monotone: bool,
    pub dual_monotone: bool,
    /// Times at which the dual median exceeds the single median, out of all.
    pub dual_ahead: usize,
    pub times: usize,
}

fn monotone(series: &[(f64, f64)]) -> bool {
    series.windows(2).all(|w| w[1].1 >= w[0].1)
}

/// Pearson-versus-exposure for single and dual driving over `pattern`.
pub fn correlate(o: &mut Outputs, pattern: &MagneticPattern, cfg: &RunConfig) -> CliResult<Fig5Summary> {
    let grid = commands::pixel_grid(pattern, cfg);
    let z = cfg.scene.standoff_um.unwrap_or(cfg.geometry.qr.standoff_um);
    let single = cfg.correlate.single_mode;
    let drives = [drive_for(cfg, single), drive_for(cfg, DriveMode::Dual)];
    let stacks = expected_stacks(pattern, &grid, z, cfg, &drives)?;
    let pairs = [(single, &stacks[0]), (DriveMode::Dual, &stacks[1])];
    let points = correlation(&pairs, cfg)?;
    write_points(o, &points)?;

    let s = median_series(&points, single);
    let d = median_series(&points, DriveMode::Dual);
    write_csv_table(
        &o.file("pearson_median.csv"),
        &["time_s", "r_single", "r_dual"],
        &s.iter().zip(&d).map(|(a, b)| vec![a.0, a.1, b.1]).collect::<Vec<_>>(),
    )?;
    for (mode, ex) in pairs {
        write_modes(o, &noise_free_modes(ex, cfg)?, &format!("reference_{}", mode.name()))?;
        for &t in &cfg.correlate.snapshot_times_s {
            let img = extract_mode_images(&ex.sample(&cfg.stack.with_exposure(t), Some(cfg.seed)), ex.baseline)?;
            write_map(o, &format!("contrast_{}_{}s", mode.name(), t), &grid, &img.contrast, "contrast")?;
        }
    }
    let cross = crossings(&points, &[single, DriveMode::Dual], cfg.correlate.level);
    let summary = Fig5Summary {
        single_mode: single,
        level: cfg.correlate.level,
        seeds: cfg.correlate.seeds,
        t_single_s: cross[0],
        t_dual_s: cross[1],
        ratio: cross[0].zip(cross[1]).map(|(a, b)| a / b),
        single_monotone: monotone(&s),
        dual_monotone: monotone(&d),
        dual_ahead: s.iter().zip(&d).filter(|(a, b)| b.1 > a.1).count(),
        times: s.len(),
    };
    o.write_json("summary.json", &summary)?;
    Ok(summary)
}

fn write_points(o: &mut Outputs, points: &[CorrelationPoint]) -> CliResult<()> {
    let mut text = String::from("mode,time_s,seed,r\n");
    for p in points {
        text.push_str(&format!("{},{:e},{},{:e}\n", p.mode.name(), p.time_s, p.seed, p.r));
    }
    fs::write(o.file("pearson.csv"), text)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig6Summary {
    pub contrast_dual_above_single: bool,
    /// Largest |FWHM_dual - FWHM_single| / max(FWHM) over the grid.
    pub fwhm_max_relative_gap: f64,
    pub argmin_s_dual: f64,
    pub argmin_interior: bool,
    pub s_ratio_at_1: f64,
}

/// Sensitivity sweep CSVs for single and dual driving.
pub fn sweep(o: &mut Outputs, cfg: &RunConfig) -> CliResult<Fig6Summary> {
    let modes = [DriveMode::SingleMinus, DriveMode::Dual];
    let omegas = &cfg.sweep.omegas;
    if omegas.len() < 3 {
        return Err(CliError::usage("sweep needs at least three amplitudes"));
    }
    let rows = sensitivity_sweep(&cfg.model, omegas, &modes, cfg.drive.bias_par_g)?;
    write_sweep_csv(&o.file("sweep_single.csv"), &rows, DriveMode::SingleMinus)?;
    write_sweep_csv(&o.file("sweep_dual.csv"), &rows, DriveMode::Dual)?;
    let pick = |m: DriveMode| -> Vec<&SweepRow> { rows.iter().filter(|r| r.mode == m).collect() };
    let (s, d) = (pick(DriveMode::SingleMinus), pick(DriveMode::Dual));
    let k = (0..d.len())
        .min_by(|a, b| d[*a].sensitivity.total_cmp(&d[*b].sensitivity))
        .unwrap_or(0);
    let at_one = sensitivity_sweep(&cfg.model, &[1.0], &modes, cfg.drive.bias_par_g)?;
    let summary = Fig6Summary {
        contrast_dual_above_single: s.iter().zip(&d).all(|(a, b)| b.contrast > a.contrast),
        fwhm_max_relative_gap: s
            .iter()
            .zip(&d)
            .map(|(a, b)| (a.fwhm - b.fwhm).abs() / a.fwhm.max(b.fwhm))
            .fold(0.0, f64::max),
        argmin_s_dual: d[k].omega,
        argmin_interior: k > 0 && k + 1 < d.len(),
        s_ratio_at_1: at_one[0].sensitivity / at_one[1].sensitivity,
    };
    o.write_json("summary.json", &summary)?;
    Ok(summary)
}

fn fig6(o: &mut Outputs, cfg: &RunConfig) -> CliResult<Fig6Summary> {
    let summary = sweep(o, cfg)?;
    let r0 = cfg.model.baseline()?;
    for &omega in &cfg.sweep.spectra_omegas {
        for mode in [DriveMode::SingleMinus, DriveMode::Dual] {
            let drive = DriveConfig::new(mode, omega);
            let curve = odmr_lineshape(&cfg.model, &drive)?;
            curve.write_csv(&o.file(&format!("spectrum_{}_omega{omega}.csv", mode.name())))?;
            let m = odmr_metrics(&curve)?;
            sensitivity(m.contrast, m.fwhm, r0)?;
        }
    }
    Ok(summary)
}

#[derive(Debug, Serialize)]
struct ReplayReport {
    command: String,
    identical: bool,
    compared: usize,
    mismatched: Vec<String>,
    missing: Vec<String>,
}

/// Re-runs the manifest's invocation with its recorded config into `out` and
/// compares every artifact digest.
fn replay(manifest: &Path, out: &Path, workers: Option<usize>) -> CliResult<()> {
    let text = fs::read_to_string(manifest).map_err(|e| CliError::usage(format!("{}: {e}", manifest.display())))?;
    let old: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::usage(format!("bad manifest: {e}")))?;
    if matches!(old.invocation, Command::Demo(DemoCmd::Replay { .. })) {
        return Err(CliError::usage("cannot replay a replay"));
    }
    let mut cmd = old.invocation.clone();
    cmd.redirect(out);
    let mut cfg = old.config.clone();
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if cfg.hash() != old.config_hash {
        return Err(CliError::data("manifest config does not match its hash"));
    }
    commands::dispatch(&cmd, &cfg, old.config_path.as_deref(), workers)?;

    let mut new_manifest = out.join("manifest.json");
    if !new_manifest.exists() {
        if let Some(a) = old.outputs.first() {
            new_manifest = out.join(format!("{}.manifest.json", a.path.display()));
        }
    }
    let new: RunManifest = serde_json::from_str(&fs::read_to_string(&new_manifest)?)?;
    let mut mismatched = Vec::new();
    let mut missing = Vec::new();
    for a in &old.outputs {
        match new.outputs.iter().find(|b| b.path == a.path) {
            Some(b) if b.sha256 == a.sha256 => {}
            Some(_) => mismatched.push(a.path.display().to_string()),
            None => missing.push(a.path.display().to_string()),
        }
    }
    let report = ReplayReport {
        command: old.command.clone(),
        identical: mismatched.is_empty() && missing.is_empty(),
        compared: old.outputs.len(),
        mismatched,
        missing,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.identical {
        Ok(())
    } else {
        Err(CliError::new("ReplayMismatch", format!("{} artifacts differ", report.mismatched.len() + report.missing.len()), EXIT_DATA))
    }
}
