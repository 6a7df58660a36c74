//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use cmbrbg::entropy::{
    combine_keys, fips, BitStream, ExtractionPolicy, Whitening,
};
use cmbrbg::harmonics::sht::{analyze, synthesize};
use cmbrbg::harmonics::{
    analyze_map, bin_spectrum, effective_modes, make_binning, pseudo_cross_spectrum,
    BinnedSpectrum, CrossSpectrumSet, HarmonicCoeffs,
};
use cmbrbg::likelihood::{binned_loglike, estimate_noise_and_signal, exact_loglike, kullback, CovMatrix};
use cmbrbg::rng::SplitMix64;
use cmbrbg::skysim::{
    add_noise, fiducial_spectrum, synthesize_alm, synthesize_map, SphereGrid,
};
use cmbrbg::vernam::{
    generate_key_matrix, key_sum, table_base, vernam_apply_at, MatrixSource, PadLedger,
};
use cmbrbg::Error;
use cmbrbg_cli::pipeline::{self, MatrixInput, NOISE_TAG};
use cmbrbg_cli::RunConfig;
use nalgebra::DMatrix;
use num_complex::Complex64;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn random_alm(lmax: usize, seed: u64) -> HarmonicCoeffs {
    let mut rng = SplitMix64::new(seed);
    let mut a = HarmonicCoeffs::zeros(lmax, "r");
    for l in 0..=lmax {
        for m in 0..=l {
            let im = if m == 0 { 0.0 } else { rng.next_normal() };
            a.set(l, m, Complex64::new(rng.next_normal(), im));
        }
    }
    a
}

fn c01_sht_round_trip() -> Verdict {
    let grid = SphereGrid::new(32);
    let alm = random_alm(32, 1);
    let start = Instant::now();
    let pix = synthesize(&alm, &grid).unwrap();
    let back = HarmonicCoeffs::from_vec(32, "r", analyze(&pix, &grid, 32).unwrap()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let err = alm.max_abs_diff(&back);
    verdict(err < 1e-8 && secs < 5.0, format!("max |da| = {err:.2e}, {secs:.3} s"))
}

fn c02_pseudo_cl_oracle() -> Verdict {
    let full = |h: &HarmonicCoeffs, l: usize, m: i64| {
        let c = h.get(l, m.unsigned_abs() as usize);
        match (m < 0, m % 2 == 0) {
            (false, _) => c,
            (true, true) => c.conj(),
            (true, false) => -c.conj(),
        }
    };
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let (a, b) = (random_alm(3, 2 * seed), random_alm(3, 2 * seed + 1));
        let fast = pseudo_cross_spectrum(&a, &b).unwrap();
        for l in 0..=3usize {
            let sum: Complex64 = (-(l as i64)..=l as i64).map(|m| full(&a, l, m) * full(&b, l, m).conj()).sum();
            worst = worst.max((fast[l] - sum.re / (2 * l + 1) as f64).abs()).max(sum.im.abs());
        }
    }
    verdict(worst <= 1e-12, format!("max deviation {worst:.2e} over 50 pairs"))
}

fn c03_spectrum_recovery() -> Verdict {
    let lmax = 32;
    let runs = 500;
    let grid = SphereGrid::new(lmax);
    let spectrum = fiducial_spectrum(RunConfig::default().toy_model(), lmax).unwrap();
    let mut mean = vec![0.0; lmax + 1];
    for seed in 0..runs {
        let map = synthesize_map(&synthesize_alm(&spectrum, 7_000 + seed), &grid).unwrap();
        let a = analyze_map(&map, lmax).unwrap();
        let c = pseudo_cross_spectrum(&a, &a).unwrap();
        for l in 0..=lmax {
            mean[l] += c[l] / runs as f64;
        }
    }
    let worst = (2..=lmax)
        .map(|l| {
            let se = spectrum.get(l) * (2.0 / (2 * l + 1) as f64).sqrt() / (runs as f64).sqrt();
            (mean[l] - spectrum.get(l)).abs() / se
        })
        .fold(0.0, f64::max);
    verdict(worst < 5.0, format!("worst deviation {worst:.2} SE over l = 2..32"))
}

fn c04_binning() -> Verdict {
    let scheme = make_binning(&[(2, 3), (4, 10), (11, 32)]).unwrap();
    let norm = scheme
        .bins()
        .iter()
        .map(|b| (b.multipoles().map(|(_, w)| w).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let hand = make_binning(&[(2, 3)]).unwrap();
    let w = &hand.bins()[0];
    let binned = bin_spectrum(&[0.0, 0.0, 1.0, 2.0], &hand).unwrap()[0];
    let ok = norm <= 1e-12
        && (w.weight(2) - 5.0 / 19.0).abs() < 1e-15
        && (w.weight(3) - 14.0 / 19.0).abs() < 1e-15
        && (binned - 33.0 / 19.0).abs() < 1e-15;
    verdict(ok, format!("max |sum w - 1| = {norm:.1e}, hand bin value {binned:.15}"))
}

fn c05_effective_modes() -> Verdict {
    let single = make_binning(&(2..=32).map(|l| (l, l)).collect::<Vec<_>>()).unwrap();
    let n = effective_modes(&single, 1.0).unwrap();
    let exact = n.iter().enumerate().all(|(r, &v)| v == (2 * (r + 2) + 1) as f64);
    let pair = effective_modes(&make_binning(&[(2, 3)]).unwrap(), 1.0).unwrap()[0];
    // (Σ(2ℓ+1)w)² / Σ(2ℓ+1)w² with w = (5/19, 14/19) is 15129/1497.
    let expected = 15129.0 / 1497.0;
    verdict(
        exact && (pair - expected).abs() < 1e-9,
        format!("single-l exact = {exact}, n([2,3]) = {pair:.10} (15129/1497)"),
    )
}

fn random_spd(rng: &mut SplitMix64, n: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.next_normal());
    &b * b.transpose() + DMatrix::identity(n, n) * 0.5
}

fn c06_kullback() -> Verdict {
    let c = CovMatrix::from_row_slice(2, &[2.0, 0.3, 0.3, 1.0]).unwrap();
    let self_k = kullback(&c, &c).unwrap();
    let scalar = kullback(&CovMatrix::scalar(2.0).unwrap(), &CovMatrix::scalar(1.0).unwrap()).unwrap();
    let mut rng = SplitMix64::new(66);
    let mut min_k = f64::INFINITY;
    let mut worst_cong: f64 = 0.0;
    for i in 0..1000 {
        let n = 1 + i % 6;
        let a = CovMatrix::new(random_spd(&mut rng, n)).unwrap();
        let b = CovMatrix::new(random_spd(&mut rng, n)).unwrap();
        let k = kullback(&a, &b).unwrap();
        min_k = min_k.min(k);
        let t = DMatrix::from_fn(n, n, |_, _| rng.next_normal()) + DMatrix::identity(n, n) * 3.0;
        let kt = kullback(&a.congruence(&t).unwrap(), &b.congruence(&t).unwrap()).unwrap();
        worst_cong = worst_cong.max((k - kt).abs() / k.max(1.0));
    }
    let ok = self_k <= 1e-12 && (scalar - 0.1534264).abs() <= 1e-6 && min_k >= -1e-12 && worst_cong <= 1e-9;
    verdict(
        ok,
        format!("k(C,C) = {self_k:.1e}, k(2,1) = {scalar:.7}, min k = {min_k:.3e}, congruence dev {worst_cong:.1e}"),
    )
}

fn c07_likelihood_consistency() -> Verdict {
    let lmax = 32;
    let spectrum = fiducial_spectrum(RunConfig::default().toy_model(), lmax).unwrap();
    let alm = synthesize_alm(&spectrum, 4242);
    let chat = pseudo_cross_spectrum(&alm, &alm).unwrap();
    let model = |l: usize| CovMatrix::scalar(1.1 * spectrum.get(l));
    let chat_m: Vec<CovMatrix> = chat.iter().map(|&v| CovMatrix::scalar(v.max(1e-300)).unwrap()).collect();
    let exact = exact_loglike(&chat_m, model, 2, lmax).unwrap();
    let scheme = make_binning(&(2..=lmax).map(|l| (l, l)).collect::<Vec<_>>()).unwrap();
    let binned = BinnedSpectrum::from_spectrum((0, 0), &chat, &scheme, 1.0).unwrap();
    let model_r: Vec<f64> = (2..=lmax).map(|l| 1.1 * spectrum.get(l)).collect();
    let b = binned_loglike(&binned.values, &model_r, &binned.modes).unwrap();
    let diff = (exact - b).abs();
    verdict(diff <= 1e-10 * exact.abs().max(1.0), format!("exact {exact:.12}, binned {b:.12}, diff {diff:.1e}"))
}

fn c08_noise_estimation() -> Verdict {
    let lmax = 32;
    let grid = SphereGrid::new(lmax);
    let spectrum = fiducial_spectrum(RunConfig::default().toy_model(), lmax).unwrap();
    let sigma = 1000.0;
    let injected = grid.white_noise_level(sigma);
    let runs = 100;
    let mut means = [0.0; 2];
    let mut noiseless_ok = true;
    for seed in 0..runs {
        let sky = synthesize_map(&synthesize_alm(&spectrum, 50_000 + seed), &grid).unwrap();
        let coeffs: Vec<_> = (0..2)
            .map(|d| analyze_map(&add_noise(&sky, sigma, 60_000 + 2 * seed + d).unwrap(), lmax).unwrap())
            .collect();
        let est = estimate_noise_and_signal(&CrossSpectrumSet::from_coeffs(&coeffs, 1.0).unwrap()).unwrap();
        for (d, m) in means.iter_mut().enumerate() {
            *m += est.mean_noise(d, 10, 32) / runs as f64;
        }
        if seed < 10 {
            let a = analyze_map(&sky, lmax).unwrap();
            let clean = estimate_noise_and_signal(&CrossSpectrumSet::from_coeffs(&[a.clone(), a], 1.0).unwrap()).unwrap();
            for d in 0..2 {
                for l in 2..=lmax {
                    let n = clean.noise[d][l];
                    let s = clean.sampling_error[d][l];
                    noiseless_ok &= n == 0.0 || n.abs() < 5.0 * s;
                }
            }
        }
    }
    let rel: Vec<f64> = means.iter().map(|m| (m / injected - 1.0).abs()).collect();
    verdict(
        rel.iter().all(|&r| r < 0.10) && noiseless_ok,
        format!(
            "injected {injected:.1}, recovered {:.1} / {:.1}, noiseless within 5 sigma = {noiseless_ok}",
            means[0], means[1]
        ),
    )
}

fn passes_all(stream: &BitStream) -> bool {
    fips::fips_suite(&stream.truncated(fips::SAMPLE_BITS)).unwrap().iter().all(|t| t.pass)
}

fn c09_fips() -> Verdict {
    let zeros = BitStream::new(vec![false; fips::SAMPLE_BITS], Default::default());
    let alt = BitStream::new((0..fips::SAMPLE_BITS).map(|i| i % 2 == 1).collect(), Default::default());
    let zeros_ok = !fips::fips_monobit(&zeros).unwrap().pass && !fips::fips_longrun(&zeros).unwrap().pass;
    let alt_ok = fips::fips_monobit(&alt).unwrap().pass && !fips::fips_runs(&alt).unwrap().pass;
    let reference = (0..100u64).filter(|&s| passes_all(&BitStream::reference(s, fips::SAMPLE_BITS))).count();

    let spectrum = fiducial_spectrum(RunConfig::default().toy_model(), 32).unwrap();
    let policy = ExtractionPolicy::new(4, 4, Whitening::VonNeumann).unwrap();
    let scheme = RunConfig::default().binning().unwrap();
    let mut short = 0;
    let harvested = (0..100u64)
        .filter(|&i| {
            let cfg = RunConfig {
                detectors: 40,
                seed: 900_000 + i,
                ..RunConfig::default()
            };
            let maps = pipeline::observe_with_config(&cfg, NOISE_TAG).unwrap();
            let h = pipeline::harvest_observation(&maps, &spectrum, &scheme, 1.0, &policy, "cmb").unwrap();
            if h.stream.len() < fips::SAMPLE_BITS {
                short += 1;
                return false;
            }
            passes_all(&h.stream)
        })
        .count();
    verdict(
        zeros_ok && alt_ok && reference >= 95 && harvested >= 90,
        format!(
            "zeros/alternating as expected = {}, reference {reference}/100, harvested+whitened {harvested}/100 ({short} short)",
            zeros_ok && alt_ok
        ),
    )
}

fn c10_key_combination() -> Verdict {
    let v = BitStream::from_str_bits("0011", "v");
    let w = BitStream::from_str_bits("0101", "w");
    let k = combine_keys(&v, &w).unwrap();
    let table = k.to_bit_string() == "0110";
    let mut rng = SplitMix64::new(10);
    let involution = (0..100).all(|_| {
        let n = 1 + (rng.next_u64() % 500) as usize;
        let v = BitStream::reference(rng.next_u64(), n).with_source("v");
        let w = BitStream::reference(rng.next_u64(), n).with_source("w");
        let k = combine_keys(&v, &w).unwrap();
        combine_keys(&k, &w).unwrap().bits == v.bits
    });
    let same = BitStream::from_str_bits("0101", "cmb");
    let rejected = matches!(combine_keys(&same, &same.clone()), Err(Error::NotIndependent(_)));
    verdict(
        table && involution && rejected,
        format!("truth table {table}, involution {involution}, same-source rejected {rejected}"),
    )
}

fn c11_alice_eve() -> Verdict {
    let r = pipeline::cmd_eve(&RunConfig::default()).unwrap();
    verdict(
        r.pass,
        format!("alice/eve {:.4}, alice/alice {:.4}", r.agreement, r.self_agreement),
    )
}

fn c12_vernam() -> Verdict {
    let mut rng = SplitMix64::new(12);
    let pad = BitStream::reference(99, 8 * 1000 * 64);
    let mut send = PadLedger::new("p", pad.len() as u64);
    let mut recv = PadLedger::new("p", pad.len() as u64);
    let mut hist = [0u64; 256];
    let mut round_trip = true;
    for _ in 0..1000 {
        let len = (rng.next_u64() % 64) as usize;
        let msg: Vec<u8> = (0..len).map(|_| 0x41).collect();
        let at = send.consumed_bits();
        let ct = vernam_apply_at(&msg, &pad, &mut send, at).unwrap();
        let pt = vernam_apply_at(&ct, &pad, &mut recv, at).unwrap();
        round_trip &= pt == msg;
        for b in ct {
            hist[b as usize] += 1;
        }
    }
    let reuse = matches!(
        vernam_apply_at(b"x", &pad, &mut send, 0),
        Err(Error::LedgerConflict { .. })
    );
    // Constant plaintext: ciphertext bytes must still look uniform.
    let total: u64 = hist.iter().sum();
    let e = total as f64 / 256.0;
    let chi2: f64 = hist.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
    // 255 dof: mean 255, sd ≈ 22.6; 5 sd bound.
    let flat = chi2 < 255.0 + 5.0 * (2.0f64 * 255.0).sqrt();

    let m = generate_key_matrix(MatrixSource::KeySum(key_sum(b"CMB").unwrap()), 16).unwrap();
    let bijective = m.is_bijective() && m.entries().len() == 256;
    let sums = key_sum(b"A").unwrap() == 1105 && key_sum(b"AB").unwrap() == 17936;
    let table = (1..=16).all(|n| table_base(n).unwrap() == 18 - n as u64);
    verdict(
        round_trip && reuse && flat && bijective && sums && table,
        format!(
            "round trip {round_trip}, reuse refused {reuse}, chi2 {chi2:.1}, bijection {bijective}, key sums {sums}, table {table}"
        ),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(key, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn run_default_pipeline(out: &Path) {
    let cfg = RunConfig {
        out: out.to_path_buf(),
        ..RunConfig::default()
    };
    let maps = pipeline::cmd_simulate(&cfg).unwrap();
    let spectra = pipeline::cmd_analyze(&maps, cfg.lmax, out).unwrap();
    let binned = pipeline::cmd_bin(&spectra, &cfg.binning().unwrap(), 1.0, out).unwrap();
    let model = pipeline::fiducial_path(out);
    let report = pipeline::cmd_likelihood(&binned, &spectra, &model).unwrap();
    std::fs::write(out.join("likelihood.txt"), report.text).unwrap();
    let prov = pipeline::harvest_provenance(&cfg).unwrap();
    let harvest = out.join("harvest.bit");
    pipeline::cmd_extract(&binned, &model, &cfg.policy().unwrap(), &prov.source, prov.seeds, &harvest).unwrap();
    std::fs::write(out.join("fips.txt"), pipeline::cmd_fips(&harvest).unwrap().text).unwrap();
    let pad = out.join("key.pad");
    pipeline::cmd_keygen(&harvest, None, 5, &out.join("key.bit"), Some(&pad)).unwrap();
    pipeline::cmd_matrix(MatrixInput::Stream(&out.join("key.bit")), 16, &out.join("matrix.txt")).unwrap();
    std::fs::write(out.join("msg.txt"), b"reproducible").unwrap();
    pipeline::cmd_vernam(&out.join("msg.txt"), &pad, &out.join("msg.enc"), None).unwrap();
}

fn c13_reproducibility() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let mut snaps = Vec::new();
    for threads in [1, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_default_pipeline(&out));
        snaps.push(snapshot(&out));
        std::fs::remove_dir_all(&out).unwrap();
    }
    let identical = snaps[0] == snaps[1];
    verdict(identical, format!("{} artifacts, identical across 1 and 4 threads = {identical}", snaps[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 13] = [
        ("SHT round trip", c01_sht_round_trip),
        ("pseudo-Cl brute-force oracle", c02_pseudo_cl_oracle),
        ("spectrum recovery", c03_spectrum_recovery),
        ("binning weights", c04_binning),
        ("effective modes", c05_effective_modes),
        ("Kullback divergence", c06_kullback),
        ("exact vs binned likelihood", c07_likelihood_consistency),
        ("two-step noise estimation", c08_noise_estimation),
        ("FIPS 140-2 suite", c09_fips),
        ("key combination", c10_key_combination),
        ("Alice/Eve decorrelation", c11_alice_eve),
        ("Vernam cipher", c12_vernam),
        ("reproducibility", c13_reproducibility),
    ];
    let mut failed = 0;
    let mut stdout = std::io::stdout().lock();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        if !v.pass {
            failed += 1;
        }
        writeln!(
            stdout,
            "criterion {:>2} {:<30} {} ({}; {:.2} s)",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        )
        .unwrap();
    }
    writeln!(stdout, "acceptance: {} passed, {failed} failed", criteria.len() - failed).unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
