use std::sync::OnceLock;

use magstego::codec::{code39_decode, code39_encode, qr_decode, qr_encode, EcLevel};
use magstego::imaging::*;
use magstego::layout::{layout_barcode, layout_pixel_art, layout_qr, qr_extent, Bitmap, Geometry, MagneticPattern};
use magstego::magnetics::{BParMap, NVFrame, GAMMA_MHZ_PER_G};
use magstego::nvmodel::odmr::canonical_rate;
use magstego::nvmodel::{odmr_metrics, DriveConfig, DriveMode, ODMRCurve, RateModel};
use magstego::Grid;
use proptest::prelude::*;

fn dual() -> DriveConfig {
    DriveConfig::new(DriveMode::Dual, 1.0).with_sweep(imaging_sweep())
}

fn uniform_bpar(grid: Grid, delta_g: f64) -> BParMap {
    let bias = NVFrame::default().bias_par();
    BParMap {
        grid,
        b_par: vec![bias + delta_g; grid.len()],
        bias_par: bias,
    }
}

fn metrics_of(detunings: &[f64], r: Vec<f64>, r0: f64) -> (f64, f64, f64) {
    let m = odmr_metrics(&ODMRCurve {
        detunings: detunings.to_vec(),
        r,
        baseline: r0,
    })
    .unwrap();
    (m.contrast, m.fwhm, m.delta0)
}

fn pixel_at(g: &Grid, x: f64, y: f64) -> usize {
    let i = ((x - g.x0) / g.step).round() as usize;
    let j = ((y - g.y0) / g.step).round() as usize;
    g.index(i, j)
}

/// Pixels whose centre lies in the closed box.
fn pixels_in(g: &Grid, x: [f64; 2], y: [f64; 2]) -> Vec<usize> {
    let mut out = Vec::new();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (px, py) = (g.x(i), g.y(j));
            if px >= x[0] - 1e-9 && px <= x[1] + 1e-9 && py >= y[0] - 1e-9 && py <= y[1] + 1e-9 {
                out.push(g.index(i, j));
            }
        }
    }
    out
}

struct DotScene {
    pixels: Grid,
    bpar_delta: BParMap,
    expected: ExpectedStack,
}

fn dot_scene() -> &'static DotScene {
    static SCENE: OnceLock<DotScene> = OnceLock::new();
    SCENE.get_or_init(|| {
        let geom = Geometry::pixel_art();
        let pattern = layout_pixel_art(&Bitmap::filled(3, 3), &Bitmap::filled(3, 3), &geom).unwrap();
        let pixels = Grid::centered(2.5, 2.5, 20.0, 0.25);
        let model = RateModel::default();
        let psf = Psf::default();
        let bpar = scene_bpar(&pattern, &pixels, &psf, 1.0, &NVFrame::default()).unwrap();
        let expected = expected_curves(&bpar, &pixels, &model, &dual(), &psf, 2).unwrap();
        let bpar_delta = scene_bpar(&pattern, &pixels, &Psf::delta(), 1.0, &NVFrame::default()).unwrap();
        DotScene {
            pixels,
            bpar_delta,
            expected,
        }
    })
}

struct QrScene {
    geom: Geometry,
    matrix: magstego::codec::ModuleMatrix,
    expected: ExpectedStack,
}


fn qr_scene() -> &'static QrScene {
    static SCENE: OnceLock<QrScene> = OnceLock::new();
    SCENE.get_or_init(|| {
        let geom = Geometry::qr();
        let matrix = qr_encode(b"http://www.korea.ac.kr", EcLevel::L).unwrap();
        let pattern = layout_qr(&matrix, &geom).unwrap();
        let ext = qr_extent(&geom);
        let pixels = Grid::centered(ext / 2.0, ext / 2.0, ext + 10.0, 0.5);
        let psf = Psf::default();
        let bpar = scene_bpar(&pattern, &pixels, &psf, geom.standoff_um, &NVFrame::default()).unwrap();
        let expected = expected_curves(&bpar, &pixels, &RateModel::default(), &dual(), &psf, 2).unwrap();
        QrScene { geom, matrix, expected }
    })
}

#[test]
fn delta_psf_reproduces_shifted_canonical_curve() {
    let model = RateModel::default();
    let drive = dual();
    let scene = dot_scene();
    let ex = expected_curves(&scene.bpar_delta, &scene.pixels, &model, &drive, &Psf::delta(), 2).unwrap();

    // linear interpolation on a lattice h is off by at most h²/8·max|R''|
    let h = 0.5;
    let d2 = (-400..=400)
        .map(|k| {
            let x = k as f64 * 0.25;
            let e = 1e-2;
            let f = |x| canonical_rate(&model, &drive, x).unwrap();
            ((f(x + e) - 2.0 * f(x) + f(x - e)) / (e * e)).abs()
        })
        .fold(0.0, f64::max);
    let bound = h * h / 8.0 * d2 * 1.05 + 1e-12;

    let delta = scene.bpar_delta.delta();
    for p in (0..scene.pixels.len()).step_by(23) {
        for (k, d) in ex.detunings.iter().enumerate() {
            let exact = canonical_rate(&model, &drive, d - GAMMA_MHZ_PER_G * delta[p]).unwrap();
            assert!((ex.curve(p)[k] - exact).abs() <= bound, "pixel {p} detuning {d}");
        }
    }

    // on the table lattice the lookup is exact
    let grid = Grid::new(0.0, 0.0, 0.5, 3, 1);
    let shifts = [-7.5, 0.0, 12.0];
    let bias = NVFrame::default().bias_par();
    let bpar = BParMap {
        grid,
        b_par: shifts.iter().map(|s| bias + s / GAMMA_MHZ_PER_G).collect(),
        bias_par: bias,
    };
    let ex = expected_curves(&bpar, &grid, &model, &drive, &Psf::delta(), 2).unwrap();
    for (p, s) in shifts.iter().enumerate() {
        for (k, d) in ex.detunings.iter().enumerate() {
            let exact = canonical_rate(&model, &drive, d - s).unwrap();
            assert!((ex.curve(p)[k] - exact).abs() <= 1e-12 * exact);
        }
    }
}

#[test]
fn delta_psf_field_map_matches_axial_field() {
    let scene = dot_scene();
    let ex = expected_curves(
        &scene.bpar_delta,
        &scene.pixels,
        &RateModel::default(),
        &dual(),
        &Psf::delta(),
        2,
    )
    .unwrap();
    let img = extract_mode_images(&ex.sample(&StackConfig::default(), None), ex.baseline).unwrap();
    assert_eq!(img.valid_fraction(), 1.0);
    let delta = scene.bpar_delta.delta();
    for (p, d) in delta.iter().enumerate() {
        // limited only by the parabolic refinement of the dip vertex
        assert!((img.field_g[p] - d).abs() < 0.01, "pixel {p}: {} vs {d}", img.field_g[p]);
    }
}

#[test]
fn uniform_scene_counts_stay_in_poisson_bands() {
    let pixels = Grid::new(0.0, 0.0, 0.5, 20, 20);
    let psf = Psf::delta();
    let model = RateModel::default();
    let ex = expected_curves(&uniform_bpar(pixels, 0.0), &pixels, &model, &dual(), &psf, 2).unwrap();
    let cfg = StackConfig::default().with_exposure(10.0);
    let stack = ex.sample(&cfg, Some(7));
    let n = pixels.len() as f64;
    let per_point = cfg.photon_gain * cfg.exposure_s / ex.n_det() as f64;
    let mut outside = 0;
    for k in 0..ex.n_det() {
        let lambda = ex.curve(0)[k] * per_point;
        let column: Vec<f64> = (0..pixels.len()).map(|p| stack.spectrum(p)[k]).collect();
        assert!(column.iter().all(|c| *c >= 0.0 && c.fract() == 0.0));
        let mean = column.iter().sum::<f64>() / n;
        if (mean - lambda).abs() > 3.0 * (lambda / n).sqrt() {
            outside += 1;
        }
        let var = column.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var / lambda - 1.0).abs() < 0.25, "variance {var} vs mean {lambda}");
    }
    // about 0.3% of 121 columns may fall outside by chance
    assert!(outside <= 2, "{outside} detunings outside 3σ");
}

/// One pixel whose PSF footprint sees `+lobe` on its left half and `-lobe`
/// on its right half.
fn two_lobe_stack(lobe_g: f64) -> (ExpectedStack, Grid) {
    let pixels = Grid::new(0.0, 0.0, 0.5, 1, 1);
    let psf = Psf::default();
    let fg = psf.field_grid(&pixels);
    let bias = NVFrame::default().bias_par();
    let b_par = (0..fg.len())
        .map(|p| {
            let x = fg.x(p % fg.nx);
            bias + if x < 0.0 { lobe_g } else { -lobe_g }
        })
        .collect();
    let bpar = BParMap {
        grid: fg,
        b_par,
        bias_par: bias,
    };
    let ex = expected_curves(&bpar, &pixels, &RateModel::default(), &dual(), &psf, 2).unwrap();
    (ex, pixels)
}

#[test]
fn opposite_lobes_give_shallower_broader_dip() {
    let model = RateModel::default();
    let drive = dual();
    // 5.5 MHz lobes sit on the lineshape table lattice
    let lobe = 5.5 / GAMMA_MHZ_PER_G;
    let (ex, _) = two_lobe_stack(lobe);
    let x = GAMMA_MHZ_PER_G * lobe;
    let oracle: Vec<f64> = ex
        .detunings
        .iter()
        .map(|d| 0.5 * (canonical_rate(&model, &drive, d - x).unwrap() + canonical_rate(&model, &drive, d + x).unwrap()))
        .collect();
    for (a, b) in ex.curve(0).iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-9 * b);
    }
    let single: Vec<f64> = ex
        .detunings
        .iter()
        .map(|d| canonical_rate(&model, &drive, d - x).unwrap())
        .collect();
    let (c_avg, w_avg, _) = metrics_of(&ex.detunings, ex.curve(0).to_vec(), ex.baseline);
    let (c_one, w_one, _) = metrics_of(&ex.detunings, single, ex.baseline);
    assert!(c_avg < c_one, "contrast {c_avg} vs {c_one}");
    assert!(w_avg > w_one, "width {w_avg} vs {w_one}");
}

#[test]
fn spectra_are_averaged_not_fields() {
    let model = RateModel::default();
    let drive = dual();
    let (ex, _) = two_lobe_stack(4.0);
    let (c_spectrum, _, _) = metrics_of(&ex.detunings, ex.curve(0).to_vec(), ex.baseline);
    // averaging the field first would see zero net field
    let at_mean_field: Vec<f64> = ex
        .detunings
        .iter()
        .map(|d| canonical_rate(&model, &drive, *d).unwrap())
        .collect();
    let (c_field, _, _) = metrics_of(&ex.detunings, at_mean_field, ex.baseline);
    let gap = (c_field - c_spectrum) / c_field;
    assert!(gap > 0.10, "contrast gap {gap}");
}

#[test]
fn psf_field_grid_is_enforced() {
    let pixels = Grid::new(0.0, 0.0, 0.5, 4, 4);
    let r = expected_curves(
        &uniform_bpar(pixels, 0.0),
        &pixels,
        &RateModel::default(),
        &dual(),
        &Psf::default(),
        2,
    );
    assert_eq!(r.unwrap_err(), ImagingError::GridMismatch);
}

#[test]
fn zero_pattern_gives_flat_maps() {
    let pixels = Grid::new(0.0, 0.0, 0.5, 16, 16);
    let psf = Psf::default();
    let bpar = scene_bpar(&MagneticPattern::default(), &pixels, &psf, 1.0, &NVFrame::default()).unwrap();
    let ex = expected_curves(&bpar, &pixels, &RateModel::default(), &dual(), &psf, 2).unwrap();
    let img = extract_mode_images(&ex.sample(&StackConfig::default().with_exposure(1e4), Some(3)), ex.baseline).unwrap();
    assert_eq!(img.valid_fraction(), 1.0);
    let n = pixels.len() as f64;
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / n;
        let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        (m, s)
    };
    let (m, s) = stats(&img.freq_shift);
    assert!(m.abs() < 3.0 * s / n.sqrt() + 1e-9, "mean shift {m} ± {s}");
    let (mc, sc) = stats(&img.contrast);
    assert!(sc / mc < 0.05, "contrast spread {sc} / {mc}");
}

#[test]
fn undriven_pixels_are_masked_not_zeroed() {
    let pixels = Grid::new(0.0, 0.0, 0.5, 3, 3);
    let drive = DriveConfig::new(DriveMode::Dual, 0.0).with_sweep(imaging_sweep());
    let ex = expected_curves(&uniform_bpar(pixels, 0.0), &pixels, &RateModel::default(), &drive, &Psf::delta(), 2).unwrap();
    let img = extract_mode_images(&ex.sample(&StackConfig::default(), None), ex.baseline).unwrap();
    assert_eq!(img.valid_fraction(), 0.0);
    assert!(img.contrast.iter().chain(&img.freq_shift).chain(&img.linewidth).all(|v| v.is_nan()));
}

#[test]
fn short_sweeps_are_rejected() {
    let pixels = Grid::new(0.0, 0.0, 0.5, 2, 2);
    let drive = DriveConfig::new(DriveMode::Dual, 1.0).with_sweep(magstego::nvmodel::Sweep::symmetric(30.0, 9));
    let ex = expected_curves(&uniform_bpar(pixels, 0.0), &pixels, &RateModel::default(), &drive, &Psf::delta(), 2).unwrap();
    let r = extract_mode_images(&ex.sample(&StackConfig::default(), None), ex.baseline);
    assert!(matches!(r, Err(ImagingError::BadConfig(_))));
}

#[test]
fn dot_array_modes() {
    let scene = dot_scene();
    let g = scene.pixels;
    let img = extract_mode_images(&scene.expected.sample(&StackConfig::default(), None), scene.expected.baseline).unwrap();
    assert_eq!(img.valid_fraction(), 1.0);
    let mut inside = 0;
    for r in 0..3 {
        for c in 0..3 {
            let (x0, y0) = (2.0 * c as f64, 2.0 * r as f64);
            // search the whole cell around the dot
            let cell = pixels_in(&g, [x0 - 0.5, x0 + 1.5], [y0 - 0.5, y0 + 1.5]);
            let lowest = *cell
                .iter()
                .min_by(|a, b| img.contrast[**a].total_cmp(&img.contrast[**b]))
                .unwrap();
            let (px, py) = (g.x(lowest % g.nx), g.y(lowest / g.nx));
            if (x0..=x0 + 1.0).contains(&px) && (y0..=y0 + 1.0).contains(&py) {
                inside += 1;
            }
            let foot = pixels_in(&g, [x0, x0 + 1.0], [y0, y0 + 1.0]);
            let lo = foot.iter().map(|p| img.freq_shift[*p]).fold(f64::MAX, f64::min);
            let hi = foot.iter().map(|p| img.freq_shift[*p]).fold(f64::MIN, f64::max);
            assert!(lo < 0.0 && hi > 0.0, "dot ({r},{c}) shift range [{lo}, {hi}]");
        }
    }
    assert!(inside >= 8, "{inside}/9 contrast minima inside their dot");
}

#[test]
fn single_dot_shows_opposite_lobes() {
    let geom = Geometry::pixel_art();
    let pattern = layout_pixel_art(&Bitmap::filled(1, 1), &Bitmap::filled(1, 1), &geom).unwrap();
    let pixels = Grid::centered(0.5, 0.5, 6.0, 0.25);
    let psf = Psf::default();
    let bpar = scene_bpar(&pattern, &pixels, &psf, 1.0, &NVFrame::default()).unwrap();
    let ex = expected_curves(&bpar, &pixels, &RateModel::default(), &dual(), &psf, 2).unwrap();
    let img = extract_mode_images(&ex.sample(&StackConfig::default(), None), ex.baseline).unwrap();
    let lo = img.freq_shift.iter().copied().fold(f64::MAX, f64::min);
    let hi = img.freq_shift.iter().copied().fold(f64::MIN, f64::max);
    assert!(lo < -1.0 && hi > 1.0, "shift range [{lo}, {hi}]");
    let lowest = (0..pixels.len())
        .min_by(|a, b| img.contrast[*a].total_cmp(&img.contrast[*b]))
        .unwrap();
    let (x, y) = (pixels.x(lowest % pixels.nx), pixels.y(lowest / pixels.nx));
    assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y), "contrast minimum at ({x}, {y})");
    // the lobes lie on opposite sides of the dot along the in-plane axis
    let a = img.freq_shift[pixel_at(&pixels, -0.25, -0.25)];
    let b = img.freq_shift[pixel_at(&pixels, 1.25, 1.25)];
    assert!(a * b < 0.0, "lobes {a} and {b}");
}

#[test]
fn module_edges_and_centres() {
    let geom = Geometry::qr();
    let w = geom.dot_size_um[0];
    let pattern = layout_pixel_art(&Bitmap::filled(1, 1), &Bitmap::filled(1, 1), &geom).unwrap();
    let pixels = Grid::centered(w / 2.0, w / 2.0, 10.0, 0.5);
    let psf = Psf::default();
    // wide enough that no edge pixel loses its dip
    let drive = DriveConfig::new(DriveMode::Dual, 1.0).with_sweep(magstego::nvmodel::Sweep::symmetric(150.0, 301));
    let bpar = scene_bpar(&pattern, &pixels, &psf, geom.standoff_um, &NVFrame::default()).unwrap();
    let ex = expected_curves(&bpar, &pixels, &RateModel::default(), &drive, &psf, 2).unwrap();
    let img = extract_mode_images(&ex.sample(&StackConfig::default(), None), ex.baseline).unwrap();
    assert_eq!(img.valid_fraction(), 1.0);
    let foot = pixels_in(&pixels, [0.0, w], [0.0, w]);
    let core = pixels_in(&pixels, [0.5, w - 0.5], [0.5, w - 0.5]);
    let edge: Vec<usize> = foot.into_iter().filter(|p| !core.contains(p)).collect();
    let mean = |f: &dyn Fn(usize) -> f64, px: &[usize]| px.iter().map(|p| f(*p)).sum::<f64>() / px.len() as f64;
    let shift = |p: usize| img.freq_shift[p].abs();
    let contrast = |p: usize| img.contrast[p];
    assert!(mean(&shift, &edge) > mean(&shift, &core));
    assert!(mean(&contrast, &core) < mean(&contrast, &edge));
}

#[test]
fn qr_closed_loop() {
    let scene = qr_scene();
    let cfg = RecoverConfig::default();
    let noiseless = extract_mode_images(&scene.expected.sample(&StackConfig::default(), None), scene.expected.baseline).unwrap();
    let rec = recover_qr(&noiseless, &scene.geom, [0.0, 0.0], &cfg).unwrap();
    assert_eq!(rec.matrix, {
        let mut m = scene.matrix.clone();
        m.ec_level = rec.matrix.ec_level;
        m
    });
    assert_eq!(qr_decode(&rec.matrix).unwrap().payload_str(), "http://www.korea.ac.kr");

    let noisy = scene.expected.sample(&StackConfig::default().with_exposure(3e4), Some(11));
    let img = extract_mode_images(&noisy, scene.expected.baseline).unwrap();
    // a misplaced starting origin is pulled back by the finder patterns
    let rec = recover_qr(&img, &scene.geom, [1.0, -1.0], &cfg).unwrap();
    assert!(rec.origin[0].abs() < 0.3 && rec.origin[1].abs() < 0.3, "origin {:?}", rec.origin);
    assert_eq!(qr_decode(&rec.matrix).unwrap().payload_str(), "http://www.korea.ac.kr");
}

#[test]
fn barcode_closed_loop() {
    let geom = Geometry::barcode();
    let model = RateModel::default();
    let psf = Psf::default();
    for text in ["NV", "KR"] {
        let seq = code39_encode(text).unwrap();
        let pattern = layout_barcode(&seq, &geom).unwrap();
        let units = seq.total_units() as usize;
        let len = units as f64 * geom.narrow_width_um;
        let pixels = Grid::centered(len / 2.0, geom.bar_length_um / 2.0, len + 8.0, 0.5);
        let bpar = scene_bpar(&pattern, &pixels, &psf, geom.standoff_um, &NVFrame::default()).unwrap();
        let ex = expected_curves(&bpar, &pixels, &model, &dual(), &psf, 2).unwrap();
        for seed in [None, Some(5)] {
            let stack = ex.sample(&StackConfig::default().with_exposure(1e3), seed);
            let img = extract_mode_images(&stack, ex.baseline).unwrap();
            let rec = recover_barcode(&img, &geom, [0.0, 0.0], units, &RecoverConfig::default()).unwrap();
            assert_eq!(code39_decode(&rec.sequence).unwrap(), text, "seed {seed:?}");
        }
    }
}

#[test]
fn sampling_is_deterministic_across_thread_counts() {
    let ex = &dot_scene().expected;
    let cfg = StackConfig::default();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let s = ex.sample(&cfg, Some(42));
                let img = extract_mode_images(&s, ex.baseline).unwrap();
                (s, img)
            })
    };
    let (s1, i1) = run(1);
    let (s4, i4) = run(4);
    assert_eq!(s1.counts, s4.counts);
    assert_eq!(format!("{:?}", i1), format!("{:?}", i4));
    assert_ne!(ex.sample(&cfg, Some(43)).counts, s1.counts);
}

#[test]
fn raw_stack_roundtrip() {
    let pixels = Grid::new(-1.0, 2.0, 0.5, 5, 3);
    let ex = expected_curves(&uniform_bpar(pixels, 1.5), &pixels, &RateModel::default(), &dual(), &Psf::delta(), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for seed in [Some(9), None] {
        let stack = ex.sample(&StackConfig::default(), seed);
        let path = dir.path().join("stack.raw");
        stack.write_raw(&path).unwrap();
        assert_eq!(PhotonStack::read_raw(&path).unwrap(), stack);
    }
    std::fs::write(dir.path().join("bad.raw"), b"{\"format\":\"nope\"}\n").unwrap();
    assert!(PhotonStack::read_raw(&dir.path().join("bad.raw")).is_err());
}

#[test]
fn correlation_approaches_one_with_exposure() {
    let ex = &dot_scene().expected;
    let pts = correlation_curve(&[(DriveMode::Dual, ex)], &StackConfig::default(), &[1.0, 10.0, 100.0, 1e4], &[1, 2, 3]).unwrap();
    let series = median_series(&pts, DriveMode::Dual);
    assert!(series.windows(2).all(|w| w[1].1 >= w[0].1), "{series:?}");
    assert!(series.last().unwrap().1 > 0.99);
}

proptest! {
    #[test]
    fn pearson_identities(a in prop::collection::vec(-100.0f64..100.0, 4..40), c in -50.0f64..50.0, k in 0.1f64..10.0) {
        prop_assume!(a.iter().any(|x| (x - a[0]).abs() > 1e-6));
        prop_assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = a.iter().map(|x| c - x).collect();
        prop_assert!((pearson(&a, &neg).unwrap() + 1.0).abs() < 1e-12);
        let affine: Vec<f64> = a.iter().map(|x| k * x + c).collect();
        prop_assert!((pearson(&a, &affine).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_is_symmetric_and_bounded(a in prop::collection::vec(-1.0f64..1.0, 6), b in prop::collection::vec(-1.0f64..1.0, 6)) {
        if let (Ok(r), Ok(s)) = (pearson(&a, &b), pearson(&b, &a)) {
            prop_assert!((-1.0..=1.0).contains(&r));
            prop_assert!((r - s).abs() < 1e-12);
        }
    }
}

#[test]
fn pearson_two_by_two() {
    assert!((pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 8.0]).unwrap() - 1.0).abs() < 1e-15);
}
