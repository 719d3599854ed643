//! Acceptance gate. Every criterion prints one PASS/FAIL line to stderr
//! (uncaptured) and fails its test when not met.

use std::io::Write;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use pwr_fusion::bff::{
    approx_covariance, build_bff, compress_v, decompress_v, dequantize_gain, quantize_gain, AngleQuantizer,
    AVG_SNR_MAX_DB, AVG_SNR_MIN_DB, DELTA_SNR_MAX_DB, DELTA_SNR_MIN_DB,
};
use pwr_fusion::channel::{observe_with_variance, synth_comm_channel, synth_radar_channel, CsiTensor};
use pwr_fusion::estimator::{
    alternating_summation, client_sample_cov, loglik_radar, radar_sample_cov, CovarianceSet, Localizer,
    MethodRegistry, PreEstimate, SearchConfig,
};
use pwr_fusion::harness::{
    run_experiment, run_trial, write_outputs, ExperimentConfig, ExperimentOutput, ProcessingSettings,
};
use pwr_fusion::scene::{sample_scenario, ScenarioConfig, TargetKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type M = DMatrix<C64>;

fn report(id: u32, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr();
    let _ = writeln!(err, "{verdict} criterion {id} ({title}): {detail}");
}

// ---- independent oracles -------------------------------------------------

fn steer(angle: f64, n: usize) -> Vec<C64> {
    (0..n).map(|m| C64::from_polar(1.0, std::f64::consts::PI * m as f64 * angle.sin())).collect()
}

/// vec(a(ϑ) aᴴ(φ)) for column-major stacking of an N_P × N_A matrix.
fn joint(aod: f64, aoa: f64) -> M {
    let tx = steer(aod, 4);
    let rx = steer(aoa, 4);
    let outer = M::from_fn(4, 4, |p, a| rx[p] * tx[a].conj());
    M::from_column_slice(16, 1, outer.as_slice())
}

fn steering_matrix(angles: &[(f64, f64)]) -> M {
    let mut a = M::zeros(16, angles.len());
    for (k, &(d, t)) in angles.iter().enumerate() {
        a.set_column(k, &joint(d, t).column(0));
    }
    a
}

/// `−(1/2σ²) Σ_q ‖h_q − A β̂_q‖²` with `β̂_q` from an SVD least-squares solve.
fn residual_oracle(angles: &[(f64, f64)], slices: &[M], sigma2: f64) -> f64 {
    let a = steering_matrix(angles);
    let svd = a.clone().svd(true, true);
    let mut total = 0.0;
    for h in slices {
        let v = M::from_column_slice(16, 1, h.as_slice());
        let beta = svd.solve(&v, 1e-12).unwrap();
        total += (&v - &a * beta).norm_squared();
    }
    -total / (2.0 * sigma2)
}

/// `Tr{(AᴴA)⁻¹ AᴴRA}` for two columns given precomputed `R·a`.
fn pair_trace(ai: &M, ri: &M, aj: &M, rj: &M) -> f64 {
    let g11 = ai.dotc(ai).re;
    let g22 = aj.dotc(aj).re;
    let g12 = ai.dotc(aj);
    let m11 = ai.dotc(ri).re;
    let m22 = aj.dotc(rj).re;
    let m12 = ai.dotc(rj);
    let det = g11 * g22 - g12.norm_sqr();
    if det <= 1e-9 * g11 * g22 {
        return f64::NEG_INFINITY;
    }
    // Tr(G⁻¹M) with G⁻¹ = adj(G)/det.
    (g22 * m11 + g11 * m22 - 2.0 * (g12.conj() * m12).re) / det
}

fn binomial_upper_tail(n: u64, k: u64) -> f64 {
    // P(X ≥ k), X ~ Binomial(n, 1/2), in log space.
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=n).scan(0.0, |acc, i| {
            *acc += (i as f64).ln();
            Some(*acc)
        }))
        .collect();
    let ln_half_n = n as f64 * 0.5f64.ln();
    (k..=n).map(|i| (ln_fact[n as usize] - ln_fact[i as usize] - ln_fact[(n - i) as usize] + ln_half_n).exp()).sum()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else if v[n / 2].is_infinite() {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// ---- 1 ---------------------------------------------------------------------

#[test]
fn criterion_1_noiseless_exactness() {
    let mut cfg = ExperimentConfig::default();
    cfg.scenario.k_targets = 1;
    cfg.scenario.c_clients = 1;
    cfg.noiseless = true;
    let settings = ProcessingSettings::from_config(&cfg).unwrap();
    let search = cfg.search_config().unwrap();
    let registry = MethodRegistry::with_defaults();
    let methods: Vec<Arc<dyn Localizer>> = registry.select(&["hybrid_as", "ndp_as"]).unwrap();

    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for trial in 0..20 {
        let start = Instant::now();
        let out = run_trial(&cfg.scenario, &settings, &search, &methods, 11, 0, f64::INFINITY, trial).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let truth = out.scenario.targets[0].position;
        for r in &out.results {
            let p = r.targets[0].position.expect("search always returns a position");
            worst = worst.max(p.distance(&truth));
        }
    }
    let pass = worst <= 0.1 && slowest < 5.0;
    report(1, "noiseless exactness", pass, &format!("worst error {worst:.4} m over 20 trials, slowest {slowest:.2} s"));
    assert!(pass);
}

// ---- 2 ---------------------------------------------------------------------

#[test]
fn criterion_2_trace_residual_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (q, sigma2) = (16usize, 0.3);
    let mut argmax_agree = 0;
    let mut worst_rel: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.random_range(1..=3usize);
        let truth: Vec<(f64, f64)> = (0..k).map(|_| (rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2))).collect();
        let slices: Vec<M> = (0..q)
            .map(|_| {
                let mut v = M::zeros(16, 1);
                for &(d, t) in &truth {
                    v += joint(d, t) * C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                }
                for z in v.iter_mut() {
                    *z += C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 0.3;
                }
                M::from_column_slice(4, 4, v.as_slice())
            })
            .collect();
        let csi = CsiTensor::new(slices.clone(), sigma2).unwrap();
        let r = radar_sample_cov(&csi);
        let energy: f64 = slices.iter().map(|h| h.norm_squared()).sum();
        let constant = -energy / (2.0 * sigma2);

        let mut candidates: Vec<Vec<(f64, f64)>> = vec![truth.clone()];
        while candidates.len() < 50 {
            candidates.push((0..k).map(|_| (rng.random_range(-1.3..1.3), rng.random_range(-1.3..1.3))).collect());
        }
        let mut best_res = (f64::NEG_INFINITY, 0);
        let mut best_tr = (f64::NEG_INFINITY, 0);
        for (i, c) in candidates.iter().enumerate() {
            let res = residual_oracle(c, &slices, sigma2);
            let (tr, _) = loglik_radar(c, &r, sigma2, q, 4, 4, 0.5).unwrap();
            worst_rel = worst_rel.max(((res - tr) - constant).abs() / constant.abs());
            if res > best_res.0 {
                best_res = (res, i);
            }
            if tr > best_tr.0 {
                best_tr = (tr, i);
            }
        }
        argmax_agree += (best_res.1 == best_tr.1) as usize;
    }
    let pass = argmax_agree == 100 && worst_rel <= 1e-9;
    report(
        2,
        "trace/residual duality",
        pass,
        &format!("argmax agreement {argmax_agree}/100, worst constant deviation {worst_rel:.2e} relative"),
    );
    assert!(pass);
}

// ---- 3 ---------------------------------------------------------------------

#[test]
fn criterion_3_brute_force_equivalence() {
    let mut scen = ScenarioConfig { k_targets: 2, c_clients: 0, q: 32, ..ScenarioConfig::default() };
    scen.min_separation = 1.0;
    let mut search = SearchConfig::for_region(scen.coverage_rect().unwrap());
    search.coarse_step = 0.5;
    search.fine_step = None;
    search.polish = false;
    let grid = search.coarse_points();
    let mut refined = SearchConfig::for_region(scen.coverage_rect().unwrap());
    refined.coarse_step = 0.5;
    let mut refined_reach = 0;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut agree = 0;
    let mut worst_gap: f64 = 0.0;
    for _ in 0..100 {
        let scenario = sample_scenario(&scen, &mut rng).unwrap();
        let radar = synth_radar_channel(&scenario, &mut rng).unwrap();
        let csi = observe_with_variance(&radar.matrices, 0.0, &mut rng).unwrap();
        let covs = CovarianceSet {
            radar: radar_sample_cov(&csi),
            clients: vec![],
            radar_noise_variance: 1.0,
            client_noise_variance: 1.0,
            num_subcarriers: 32,
            n_tx: 4,
            n_rx: 4,
            spacing: 0.5,
        };
        let g = scenario.geometry();
        let truth = scenario.angles().unwrap();
        let pre = PreEstimate::from_angles(&[(truth.aod[0], truth.aoa[0]), (truth.aod[1], truth.aoa[1])]);
        let out = alternating_summation(&pre, &covs, &g, &search, false).unwrap();
        let final_angles: Vec<(f64, f64)> = out.positions.iter().map(|p| g.angles_to(p).unwrap()).collect();
        let a0 = joint(final_angles[0].0, final_angles[0].1);
        let a1 = joint(final_angles[1].0, final_angles[1].1);
        let rm = M::from_column_slice(16, 16, covs.radar.as_slice());
        let as_value = pair_trace(&a0, &(&rm * &a0), &a1, &(&rm * &a1));

        let cols: Vec<M> = grid.iter().map(|p| g.angles_to(p).map(|(d, t)| joint(d, t)).unwrap()).collect();
        let rcols: Vec<M> = cols.iter().map(|c| &rm * c).collect();
        let mut best = f64::NEG_INFINITY;
        for i in 0..cols.len() {
            for j in i + 1..cols.len() {
                best = best.max(pair_trace(&cols[i], &rcols[i], &cols[j], &rcols[j]));
            }
        }
        let gap = (best - as_value) / best.abs();
        worst_gap = worst_gap.max(gap);
        agree += (gap <= 1e-6) as usize;

        let refined_out = alternating_summation(&pre, &covs, &g, &refined, false).unwrap();
        let ra: Vec<(f64, f64)> = refined_out.positions.iter().map(|p| g.angles_to(p).unwrap()).collect();
        let (b0, b1) = (joint(ra[0].0, ra[0].1), joint(ra[1].0, ra[1].1));
        let refined_value = pair_trace(&b0, &(&rm * &b0), &b1, &(&rm * &b1));
        refined_reach += (refined_value >= best - 1e-6 * best.abs()) as usize;
    }
    let pass = agree >= 95;
    report(
        3,
        "brute-force oracle equivalence",
        pass,
        &format!(
            "{agree}/100 grid-only runs within 1e-6 of the 4-D grid maximum (worst gap {worst_gap:.2e}); \
             {refined_reach}/100 with fine refinement and polish"
        ),
    );
    assert!(pass);
}

// ---- 4 ---------------------------------------------------------------------

#[test]
fn criterion_4_bff_codec_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let quant = AngleQuantizer::default();
    let mut worst_lossless: f64 = 0.0;
    let mut fid_sum = 0.0;
    let n = 10_000;
    for _ in 0..n {
        let mut v: Vec<C64> =
            (0..4).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
        let angles = compress_v(&v).unwrap();
        let back = decompress_v(&angles);
        let dot: C64 = back.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        worst_lossless = worst_lossless.max(1.0 - dot.norm());
        let q = decompress_v(&quant.dequantize(&quant.quantize(&angles)));
        let dot: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        fid_sum += dot.norm();
    }
    let mean_fid = fid_sum / n as f64;

    let noise = 0.01;
    let mut worst_gain: f64 = 0.0;
    let mut profiles = 0;
    while profiles < 1000 {
        let base = rng.random_range(-8.0..50.0);
        let snr: Vec<f64> = (0..64).map(|_| base + rng.random_range(-8.0..7.0)).collect();
        let avg = snr.iter().sum::<f64>() / snr.len() as f64;
        let in_range = avg >= AVG_SNR_MIN_DB
            && avg <= AVG_SNR_MAX_DB
            && snr.iter().all(|s| s - avg >= DELTA_SNR_MIN_DB - 0.5 && s - avg <= DELTA_SNR_MAX_DB + 0.5);
        if !in_range {
            continue;
        }
        profiles += 1;
        let sigma: Vec<f64> = snr.iter().map(|s| (noise * 10f64.powf(s / 10.0)).sqrt()).collect();
        let g = dequantize_gain(&quantize_gain(&sigma, noise).unwrap(), noise);
        for (s, gh) in snr.iter().zip(&g) {
            worst_gain = worst_gain.max((10.0 * (gh * gh / noise).log10() - s).abs());
        }
    }
    let pass = worst_lossless <= 1e-10 && mean_fid >= 0.999 && worst_gain <= 0.625 + 1e-9;
    report(
        4,
        "BFF codec fidelity",
        pass,
        &format!(
            "lossless worst 1-|v'v| {worst_lossless:.2e}, (9,7) mean fidelity {mean_fid:.6}, worst gain error {worst_gain:.4} dB"
        ),
    );
    assert!(pass);
}

// ---- 5 ---------------------------------------------------------------------

#[test]
fn criterion_5_covariance_approximation() {
    let scen = ScenarioConfig {
        k_targets: 1,
        c_clients: 1,
        ricean_k_factor_db: f64::INFINITY,
        ..ScenarioConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let run = |quant: AngleQuantizer, rng: &mut ChaCha8Rng| -> f64 {
        let mut total = 0.0;
        for _ in 0..100 {
            let scenario = sample_scenario(&scen, rng).unwrap();
            let comm = synth_comm_channel(&scenario, 0, rng).unwrap();
            let csi = observe_with_variance(&comm.matrices, 0.0, rng).unwrap();
            let full = client_sample_cov(&csi);
            // Exact CSI; the gain reference puts the average SNR at 30 dB, inside the clamp range.
            let noise = full.trace().re * csi.n_rx as f64 * 1e-3;
            let approx = approx_covariance(&build_bff(&csi, noise, 0, quant).unwrap(), noise);
            total += (&approx - &full).norm() / full.norm();
        }
        total / 100.0
    };
    let mean = run(AngleQuantizer::default(), &mut rng);
    let high = run(AngleQuantizer::new(16, 16).unwrap(), &mut rng);
    let pass = mean <= 1e-2;
    report(
        5,
        "covariance approximation",
        pass,
        &format!("mean relative error {mean:.4e} at (9,7) bits; {high:.4e} at (16,16) bits"),
    );
    assert!(pass);
}

// ---- 6, 7, 8 ---------------------------------------------------------------

fn trend_run() -> &'static ExperimentOutput {
    static RUN: OnceLock<ExperimentOutput> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = ExperimentConfig { snr_db: vec![0.0, 10.0, 20.0], trials: 1000, seed: 2024, ..Default::default() };
        let start = Instant::now();
        let out = run_experiment(&cfg, &MethodRegistry::with_defaults(), None).unwrap();
        let mut err = std::io::stderr();
        let _ = writeln!(err, "trend experiment: 3 x 1000 trials in {:.1} s", start.elapsed().as_secs_f64());
        out
    })
}

#[test]
fn criterion_6_client_median_error() {
    let out = trend_run();
    let mut lines = Vec::new();
    let mut pass = true;
    for (s, snr) in out.config.snr_db.iter().enumerate() {
        let errors = |method: &str| -> Vec<f64> {
            out.rows
                .iter()
                .filter(|r| r.method == method && r.snr_index == s && r.kind == TargetKind::Client)
                .map(|r| r.error.unwrap_or(f64::INFINITY))
                .collect()
        };
        let h = errors("hybrid_as");
        let n = errors("ndp_as");
        assert_eq!(h.len(), n.len());
        let wins = h.iter().zip(&n).filter(|(a, b)| a < b).count() as u64;
        let losses = h.iter().zip(&n).filter(|(a, b)| a > b).count() as u64;
        let p = binomial_upper_tail(wins + losses, wins);
        let (mh, mn) = (median(h), median(n));
        let ok = mh < mn && p < 0.01;
        pass &= ok;
        lines.push(format!("{snr} dB: median {mh:.4} vs {mn:.4} m, wins {wins}/{} p={p:.2e}", wins + losses));
    }
    report(6, "client median error, hybrid < NDP-only", pass, &lines.join("; "));
    assert!(pass);
}

#[test]
fn criterion_7_hit_rate_trend() {
    let out = trend_run();
    let rate = |method: &str, s: usize| -> f64 {
        let m = out
            .metrics
            .iter()
            .find(|m| m.method == method && m.snr_db == out.config.snr_db[s] && m.class == TargetKind::Client)
            .unwrap();
        m.hit_rate
    };
    let mut pass = true;
    let mut lines = Vec::new();
    for s in 0..out.config.snr_db.len() {
        let (h, n) = (rate("hybrid_as", s), rate("ndp_as", s));
        pass &= h >= n - 0.01;
        if s > 0 {
            pass &= h >= rate("hybrid_as", s - 1) - 0.02;
            pass &= n >= rate("ndp_as", s - 1) - 0.02;
        }
        lines.push(format!("{} dB: hybrid {h:.3} ndp {n:.3}", out.config.snr_db[s]));
    }
    report(7, "client hit-rate trend", pass, &lines.join("; "));
    assert!(pass);
}

#[test]
fn criterion_8_non_client_rmse() {
    let out = trend_run();
    let rmse = |method: &str| {
        out.metrics
            .iter()
            .find(|m| m.method == method && m.snr_db == 20.0 && m.class == TargetKind::NonClient)
            .and_then(|m| m.rmse)
            .unwrap()
    };
    let (h, n) = (rmse("hybrid_as"), rmse("ndp_as"));
    let pass = h <= 1.15 * n;
    report(8, "non-client RMSE at 20 dB", pass, &format!("hybrid {h:.4} m vs NDP-only {n:.4} m (ratio {:.3})", h / n));
    assert!(pass);
}

// ---- 9 ---------------------------------------------------------------------

#[test]
fn criterion_9_determinism() {
    let cfg = ExperimentConfig { snr_db: vec![0.0, 20.0], trials: 8, seed: 99, ..Default::default() };
    let registry = MethodRegistry::with_defaults();
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (d, threads) in dirs.iter().zip([1usize, 2, 1]) {
        let out = run_experiment(&cfg, &registry, Some(threads)).unwrap();
        write_outputs(&out, d.path()).unwrap();
    }
    let read = |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join(f)).unwrap();
    let same = ["results.csv", "aggregate.csv", "manifest.json"]
        .iter()
        .all(|f| read(&dirs[0], f) == read(&dirs[1], f) && read(&dirs[0], f) == read(&dirs[2], f));
    let rows = read(&dirs[0], "results.csv").iter().filter(|&&b| b == b'\n').count() - 1;
    report(9, "determinism", same, &format!("{rows} result rows byte-identical across 3 runs on 1 and 2 threads"));
    assert!(same);
}
