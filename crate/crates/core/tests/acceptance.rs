//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with its measured figures and runtime; the test fails if any criterion
//! misses its tolerance or time budget.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;

use rappsurf::fit::{
    amplitude_log_gradient, fit_extended_model, fit_log_product, fit_rapp_point, fit_surface_linear, AmAmPoint,
    FormSpec, RappFitOptions,
};
use rappsurf::grid::{parse_axis, Grid};
use rappsurf::io::{
    load_campaign, save_campaign, synth_2534, ModelFile, Provenance, SYNTH_2534_FREQ, SYNTH_2534_ID,
    SYNTH_2534_TARGET_RMS, SYNTH_2534_VSUP,
};
use rappsurf::metrics::{compare_variants, ModelVariant};
use rappsurf::select::{eliminate, DEFAULT_PLATEAU};
use rappsurf::signal::{
    align, align_campaign, estimate_alignment, generate_ofdm, papr, simulate_measurement, synth_campaign,
    ImpairmentSpec, Impairments, OfdmConfig,
};
use rappsurf::surface::{canonical_vsat_basis, full_basis, LogProductSurface, PolynomialSurface};
use rappsurf::{OperatingPoint, RappParams};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

fn zx60_grid() -> Grid {
    Grid::new(parse_axis(SYNTH_2534_VSUP).unwrap(), parse_axis(SYNTH_2534_FREQ).unwrap()).unwrap()
}

fn run(id: u32, name: &str, budget: Duration, check: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let (ok, detail) = match outcome {
        Ok(d) if elapsed <= budget => (true, d),
        Ok(d) => (false, format!("{d}; over time budget")),
        Err(e) => (false, e),
    };
    println!(
        "[{}] {id:>2} {name}: {detail} ({:.2} s, budget {} s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    ok
}

fn rapp_closed_form() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p = RappParams::new(
            10f64.powf(rng.random_range(-2.0..2.0)),
            rng.random_range(0.1..20.0),
            10f64.powf(rng.random_range(-3.0..2.0)),
        )
        .unwrap();
        let want = p.gain * p.vsat * 2f64.powf(-1.0 / (2.0 * p.smoothness));
        worst = worst.max(rel(p.amplitude(p.vsat), want));
    }
    ensure(worst <= 1e-12, || format!("worst relative error {worst:e}"))?;
    Ok(format!("1000 triples, worst relative error {worst:.1e}"))
}

fn curve(truth: &RappParams, n: usize, max_amp: f64) -> Vec<AmAmPoint> {
    (0..n)
        .map(|i| {
            let x = max_amp * (i as f64 + 0.5) / n as f64;
            AmAmPoint {
                input_amp: x,
                output_amp: truth.amplitude(x),
            }
        })
        .collect()
}

fn scalar_fit_recovery() -> Check {
    let opts = RappFitOptions::default();
    let truths = [
        RappParams::new(4.5, 1.8, 0.35).unwrap(),
        RappParams::new(1.0, 1.0, 1.7).unwrap(),
        RappParams::new(12.0, 3.0, 0.05).unwrap(),
    ];
    let mut worst_clean = 0.0f64;
    let mut worst_median = 0.0f64;
    for truth in &truths {
        let clean = curve(truth, 500, 3.0 * truth.vsat);
        let fit = fit_rapp_point(&clean, &opts).map_err(|e| e.to_string())?.result;
        for (a, b) in [
            (fit.gain, truth.gain),
            (fit.smoothness, truth.smoothness),
            (fit.vsat, truth.vsat),
        ] {
            worst_clean = worst_clean.max(rel(a, b));
        }

        let rms = (clean.iter().map(|p| p.output_amp.powi(2)).sum::<f64>() / clean.len() as f64).sqrt();
        let noise = Normal::new(0.0, rms * 10f64.powf(-40.0 / 20.0)).unwrap();
        let mut errs = [vec![], vec![], vec![]];
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<AmAmPoint> = clean
                .iter()
                .map(|p| AmAmPoint {
                    input_amp: p.input_amp,
                    output_amp: (p.output_amp + noise.sample(&mut rng)).abs(),
                })
                .collect();
            let fit = fit_rapp_point(&pts, &opts).map_err(|e| e.to_string())?.result;
            errs[0].push(rel(fit.gain, truth.gain));
            errs[1].push(rel(fit.smoothness, truth.smoothness));
            errs[2].push(rel(fit.vsat, truth.vsat));
        }
        for e in &mut errs {
            e.sort_by(f64::total_cmp);
            worst_median = worst_median.max(0.5 * (e[9] + e[10]));
        }
    }
    ensure(worst_clean <= 1e-6, || format!("noiseless error {worst_clean:e}"))?;
    ensure(worst_median <= 0.05, || format!("median error at -40 dB {worst_median:.4}"))?;
    Ok(format!(
        "noiseless error {worst_clean:.1e}, worst median error at -40 dB {:.2}%",
        100.0 * worst_median
    ))
}

fn surface_fit_exactness() -> Check {
    let ops: Vec<OperatingPoint> = zx60_grid().ops().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_coef = 0.0f64;
    let mut worst_rmse = 0.0f64;
    for degree in [2, 3] {
        for _ in 0..5 {
            let basis = full_basis(degree);
            let coeffs: Vec<f64> = basis
                .iter()
                .map(|_| rng.random_range(0.5..1.5) * if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let truth = PolynomialSurface::new(basis.iter().copied().zip(coeffs.iter().copied())).unwrap();
            let samples: Vec<_> = ops.iter().map(|&op| (op, truth.eval(op))).collect();
            let fit = fit_surface_linear(&samples, &basis).map_err(|e| e.to_string())?;
            for (t, c) in fit.result.terms().iter().zip(&coeffs) {
                worst_coef = worst_coef.max(rel(t.coefficient, *c));
            }
            worst_rmse = worst_rmse.max(fit.rmse);
        }
    }
    ensure(worst_coef <= 1e-9 && worst_rmse <= 1e-12, || {
        format!("coefficient error {worst_coef:e}, rmse {worst_rmse:e}")
    })?;
    Ok(format!(
        "poly22/poly33 coefficient error {worst_coef:.1e}, rmse {worst_rmse:.1e}"
    ))
}

fn sparse_recovery() -> Check {
    let truth = synth_2534().model();
    let samples: Vec<_> = zx60_grid().ops().map(|op| (op, truth.vsat.eval(op))).collect();
    let trace = eliminate(&samples, &full_basis(3), DEFAULT_PLATEAU, 1).map_err(|e| e.to_string())?;
    let worst = trace.steps.iter().map(|s| s.rmse_after).fold(trace.baseline_rmse, f64::max);
    let names: Vec<String> = trace.selected_basis.iter().map(|m| m.to_string()).collect();
    ensure(trace.selected_basis == canonical_vsat_basis(), || {
        format!("selected {names:?}")
    })?;
    ensure(worst <= 1e-9, || format!("rmse reached {worst:e}"))?;
    Ok(format!(
        "10 -> {} terms {}, max rmse {worst:.1e}",
        names.len(),
        names.join(" ")
    ))
}

fn log_product_round_trip() -> Check {
    let ops: Vec<OperatingPoint> = zx60_grid().ops().collect();
    let cases = [
        (LogProductSurface::new(1.0, vec![2.0, 0.0, 1.0, 0.5]).unwrap(), false),
        (
            match synth_2534().model().gain {
                rappsurf::surface::ParamSurface::LogProduct(s) => s,
                _ => return Err("fixture gain is not a log-product surface".into()),
            },
            true,
        ),
        (LogProductSurface::new(-2.2, vec![-0.4, 1.1, 0.3, 7.0]).unwrap(), true),
    ];
    let mut worst = 0.0f64;
    for (truth, include_f2) in &cases {
        let samples: Vec<_> = ops.iter().map(|&op| (op, truth.eval(op))).collect();
        let fit = fit_log_product(&samples, 3, *include_f2).map_err(|e| e.to_string())?.result;
        worst = worst.max(rel(fit.a, truth.a));
        for (g, w) in fit.freq_coeffs.iter().zip(&truth.freq_coeffs) {
            if *w == 0.0 {
                ensure(*g == 0.0, || format!("omitted coefficient came back as {g}"))?;
            } else {
                worst = worst.max(rel(*g, *w));
            }
        }
    }
    ensure(worst <= 1e-6, || format!("worst relative error {worst:e}"))?;
    Ok(format!("{} surfaces, worst relative error {worst:.1e}", cases.len()))
}

fn table4_analogue() -> Check {
    let truth = synth_2534().model();
    let stimulus = OfdmConfig {
        target_rms: SYNTH_2534_TARGET_RMS,
        ..OfdmConfig::default()
    };
    let raw = synth_campaign(SYNTH_2534_ID, &truth, &zx60_grid(), &stimulus, &ImpairmentSpec::default())
        .map_err(|e| e.to_string())?;
    let campaign = align_campaign(&raw).map_err(|e| e.to_string())?;
    ensure(campaign.iter().count() == 70, || "campaign does not have 70 records".into())?;
    let fit = fit_extended_model(&campaign, &FormSpec::default(), &RappFitOptions::default())
        .map_err(|e| e.to_string())?;
    let no_freq = ModelVariant::no_freq_from_map(&fit.param_map(), None).map_err(|e| e.to_string())?;
    let report = compare_variants(
        &campaign,
        &[
            ModelVariant::Basic(fit.param_map()),
            ModelVariant::Extended(fit.model.clone()),
            no_freq,
        ],
    )
    .map_err(|e| e.to_string())?;
    let basic = report.get("basic").unwrap();
    let ext = report.get("extended").unwrap();
    let nf = report.get("extended_no_freq").unwrap();
    let ref_freq = nf.ref_freq.unwrap();
    let max_ratio = ext
        .per_point
        .iter()
        .filter(|(op, _)| op.freq != ref_freq)
        .map(|(op, e)| nf.per_point.get(op).unwrap() / e)
        .fold(0.0, f64::max);
    let summary = format!(
        "mean NRMSE basic {:.6}, extended {:.6}, extended_no_freq {:.6}; worst off-reference ratio {:.1}x",
        basic.mean_nrmse, ext.mean_nrmse, nf.mean_nrmse, max_ratio
    );
    ensure(basic.mean_nrmse <= 0.01, || format!("{summary}; basic above 0.01"))?;
    ensure(ext.mean_nrmse <= 0.12, || format!("{summary}; extended above 0.12"))?;
    ensure(ext.mean_nrmse <= nf.mean_nrmse, || format!("{summary}; extended worse than no_freq"))?;
    ensure(max_ratio >= 2.0, || format!("{summary}; no point with a 2x gap"))?;
    Ok(summary)
}

fn alignment() -> Check {
    let truth = synth_2534().model();
    let op = OperatingPoint::new(3.6, 1.5).unwrap();
    let frame = generate_ofdm(&OfdmConfig {
        target_rms: SYNTH_2534_TARGET_RMS,
        ..OfdmConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let clean = truth.eval_frame(op, &frame).map_err(|e| e.to_string())?;
    let mut worst_phase = 0.0f64;
    let mut worst_signal = 0.0f64;
    let half = frame.len() as i64 / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut cases: Vec<(i64, f64)> = vec![(0, 0.0), (7, 0.3), (-13, -2.5), (half - 1, 3.1), (-half + 1, -3.1)];
    cases.extend((0..15).map(|_| (rng.random_range(-half + 1..half), rng.random_range(-3.14..3.14))));
    for (delay, phase) in cases {
        let imp = Impairments {
            noise_db: f64::NEG_INFINITY,
            delay,
            phase,
        };
        let rec = simulate_measurement(&truth, op, &frame, &imp, 0).map_err(|e| e.to_string())?;
        let est = estimate_alignment(&rec.input, &rec.output).map_err(|e| e.to_string())?;
        ensure(est.delay == delay, || format!("delay {delay} estimated as {}", est.delay))?;
        let dphi = (est.phase - phase + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
            - std::f64::consts::PI;
        worst_phase = worst_phase.max(dphi.abs());
        let aligned = align(&rec).map_err(|e| e.to_string())?;
        let err: f64 = aligned.output.iter().zip(&clean).map(|(a, c)| (a - c).norm_sqr()).sum();
        let norm: f64 = clean.iter().map(|c| c.norm_sqr()).sum();
        worst_signal = worst_signal.max((err / norm).sqrt());
    }
    ensure(worst_phase <= 1e-6, || format!("phase error {worst_phase:e}"))?;
    ensure(worst_signal <= 1e-9, || format!("aligned signal error {worst_signal:e}"))?;
    for seed in 0..20 {
        let delay = if seed % 2 == 0 { 12 } else { rng.random_range(-200..200) };
        let imp = Impairments {
            noise_db: -30.0,
            delay,
            phase: rng.random_range(-3.0..3.0),
        };
        let rec = simulate_measurement(&truth, op, &frame, &imp, seed).map_err(|e| e.to_string())?;
        let est = estimate_alignment(&rec.input, &rec.output).map_err(|e| e.to_string())?;
        ensure(est.delay == delay, || format!("seed {seed}: delay {delay} estimated as {}", est.delay))?;
    }
    Ok(format!(
        "20 noiseless delays exact, phase error {worst_phase:.1e} rad, 20 noisy delays exact"
    ))
}

fn ofdm_stimulus() -> Check {
    let config = OfdmConfig::default();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(config.fft_size);
    let mut papr_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut worst_leak = f64::NEG_INFINITY;
    for seed in 0..20 {
        let frame = generate_ofdm(&OfdmConfig { seed, ..config.clone() }).map_err(|e| e.to_string())?;
        ensure(frame.len() == 40960, || format!("frame length {}", frame.len()))?;
        let mut occupied = vec![false; config.fft_size];
        for &bin in &config.occupied_bins {
            occupied[config.fft_index(bin)] = true;
        }
        for symbol in frame.chunks(config.fft_size) {
            let mut spectrum = symbol.to_vec();
            fft.process(&mut spectrum);
            let power: Vec<f64> = spectrum.iter().map(|x| x.norm_sqr()).collect();
            let mean_in = power.iter().zip(&occupied).filter(|(_, o)| **o).map(|(p, _)| p).sum::<f64>() / 590.0;
            let leak = power.iter().zip(&occupied).filter(|(_, o)| !**o).map(|(p, _)| *p).fold(0.0, f64::max);
            worst_leak = worst_leak.max(10.0 * (leak / mean_in).max(1e-300).log10());
            let active = power.iter().filter(|p| **p > 1e-10 * mean_in).count();
            ensure(active == 590, || format!("{active} active bins"))?;
        }
        let value = papr(&frame).map_err(|e| e.to_string())?;
        papr_range = (papr_range.0.min(value), papr_range.1.max(value));
    }
    ensure(worst_leak <= -100.0, || format!("leakage {worst_leak:.1} dB"))?;
    ensure(papr_range.0 >= 9.0 && papr_range.1 <= 13.0, || {
        format!("PAPR range {:.2}..{:.2} dB", papr_range.0, papr_range.1)
    })?;
    Ok(format!(
        "40960 samples, 590 bins, leakage {worst_leak:.0} dB, PAPR {:.2}..{:.2} dB over 20 seeds",
        papr_range.0, papr_range.1
    ))
}

fn solver_soundness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_jac = 0.0f64;
    for _ in 0..100 {
        let params = RappParams::new(
            rng.random_range(0.2..10.0),
            rng.random_range(0.3..6.0),
            rng.random_range(0.05..3.0),
        )
        .unwrap();
        let xs: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..4.0) * params.vsat).collect();
        let theta = [params.gain.ln(), params.smoothness.ln(), params.vsat.ln()];
        let at = |t: [f64; 3], x: f64| RappParams {
            gain: t[0].exp(),
            smoothness: t[1].exp(),
            vsat: t[2].exp(),
        }
        .amplitude(x);
        let h = 1e-5;
        for k in 0..3 {
            let (mut err2, mut norm2) = (0.0, 0.0);
            for &x in &xs {
                let (_, grad) = amplitude_log_gradient(&params, x);
                let mut up = theta;
                let mut dn = theta;
                up[k] += h;
                dn[k] -= h;
                let fd = (at(up, x) - at(dn, x)) / (2.0 * h);
                err2 += (fd - grad[k]).powi(2);
                norm2 += grad[k].powi(2);
            }
            worst_jac = worst_jac.max(err2.sqrt() / norm2.sqrt().max(1e-300));
        }
    }
    ensure(worst_jac <= 1e-6, || format!("Jacobian column error {worst_jac:e}"))?;

    let ops: Vec<OperatingPoint> = zx60_grid().ops().collect();
    let mut worst_dot = 0.0f64;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<_> = ops.iter().map(|&op| (op, rng.random_range(-1.0..1.0))).collect();
        for degree in 1..=3 {
            let basis = full_basis(degree);
            let fit = fit_surface_linear(&samples, &basis).map_err(|e| e.to_string())?;
            let resid: Vec<f64> = samples.iter().map(|(op, v)| v - fit.result.eval(*op)).collect();
            let rnorm = resid.iter().map(|r| r * r).sum::<f64>().sqrt();
            for m in &basis {
                let col: Vec<f64> = ops.iter().map(|&op| m.eval(op)).collect();
                let cnorm = col.iter().map(|c| c * c).sum::<f64>().sqrt();
                let dot: f64 = col.iter().zip(&resid).map(|(c, r)| c * r).sum();
                worst_dot = worst_dot.max(dot.abs() / (cnorm * rnorm));
            }
        }
    }
    ensure(worst_dot <= 1e-8, || format!("residual/column cosine {worst_dot:e}"))?;
    Ok(format!(
        "Jacobian error {worst_jac:.1e} at 100 points, residual/column cosine {worst_dot:.1e}"
    ))
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let name = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((name, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn persistence() -> Check {
    let truth = synth_2534().model();
    let provenance = Provenance {
        campaign_sha256: None,
        created_unix: 0,
        tool_version: "acceptance".into(),
    };
    let file = ModelFile::new(SYNTH_2534_ID, &truth, provenance);
    let text = file.to_json();
    let restored = ModelFile::from_json(&text).map_err(|e| e.to_string())?.model();
    ensure(text == ModelFile::from_json(&text).unwrap().to_json(), || "model file text not stable".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_model = 0.0f64;
    for _ in 0..1000 {
        let op = OperatingPoint::new(rng.random_range(2.4..5.0), rng.random_range(0.5..2.5)).unwrap();
        let a = truth.params_at(op).unwrap().params;
        let b = restored.params_at(op).unwrap().params;
        for (x, y) in [(a.gain, b.gain), (a.smoothness, b.smoothness), (a.vsat, b.vsat)] {
            worst_model = worst_model.max(rel(y, x));
        }
        let amp = rng.random_range(0.0..1.0);
        worst_model = worst_model.max(rel(b.amplitude(amp), a.amplitude(amp)));
    }
    ensure(worst_model <= 1e-15, || format!("model file prediction error {worst_model:e}"))?;

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let grid = Grid::new(vec![2.4, 3.6, 5.0], vec![0.5, 1.5, 2.5]).unwrap();
    let stimulus = OfdmConfig {
        target_rms: SYNTH_2534_TARGET_RMS,
        ..OfdmConfig::default()
    };
    let make = |name: &str| {
        let c = synth_campaign(SYNTH_2534_ID, &truth, &grid, &stimulus, &ImpairmentSpec::default()).unwrap();
        let dir = tmp.path().join(name);
        save_campaign(&c, &dir, Some(&stimulus), false).unwrap();
        (c, dir)
    };
    let (campaign, dir_a) = make("a");
    let (_, dir_b) = make("b");
    let (loaded, _) = load_campaign(&dir_a).map_err(|e| e.to_string())?;
    let mut worst_campaign = 0.0f64;
    for (orig, back) in campaign.iter().zip(loaded.iter()) {
        let want = truth.eval_frame(orig.op, &orig.input).unwrap();
        let got = truth.eval_frame(back.op, &back.input).unwrap();
        for (w, g) in want.iter().zip(&got).chain(orig.output.iter().zip(&back.output)) {
            worst_campaign = worst_campaign.max((w - g).norm() / w.norm().max(1e-300));
        }
    }
    ensure(worst_campaign <= 1e-15, || format!("campaign prediction error {worst_campaign:e}"))?;
    let (a, b) = (dir_bytes(&dir_a), dir_bytes(&dir_b));
    ensure(!a.is_empty() && a == b, || "repeated seeded runs differ".into())?;
    Ok(format!(
        "model file error {worst_model:.1e}, campaign CSV error {worst_campaign:.1e}, {} files byte-identical across runs",
        a.len()
    ))
}

#[test]
fn acceptance_criteria() {
    let s = Duration::from_secs;
    let results = [
        run(1, "Rapp closed form at |x| = V_sat", s(1), rapp_closed_form),
        run(2, "scalar fit recovery", s(30), scalar_fit_recovery),
        run(3, "surface fit exactness", s(5), surface_fit_exactness),
        run(4, "sparse recovery by elimination", s(10), sparse_recovery),
        run(5, "log-product round trip", s(5), log_product_round_trip),
        run(6, "basic / extended / no-frequency comparison", s(300), table4_analogue),
        run(7, "delay and phase alignment", s(30), alignment),
        run(8, "OFDM stimulus", s(10), ofdm_stimulus),
        run(9, "solver soundness", s(10), solver_soundness),
        run(10, "persistence and determinism", s(10), persistence),
    ];
    let passed = results.iter().filter(|ok| **ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    assert_eq!(passed, results.len(), "some acceptance criteria failed");
}
