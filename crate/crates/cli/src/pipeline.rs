//! Pipeline stages. Each stage reads and writes only the owning modules'
//! file formats, so every intermediate can be inspected or replaced.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cmbrbg::entropy::{
    agreement_fraction, combine_keys, fips, harvest_many, BitStream, ExtractionPolicy, Harvest,
    Provenance, Whitening,
};
use cmbrbg::harmonics::{
    analyze_map, bin_spectrum, make_binning, BinnedSpectrum, BinningScheme, CrossSpectrumSet,
    PseudoSpectrum,
};
use cmbrbg::io;
use cmbrbg::likelihood::{binned_loglike, estimate_noise_and_signal, exact_loglike, CovMatrix, NoiseEstimate};
use cmbrbg::rng::derive_seed;
use cmbrbg::skysim::{
    add_noise, apply_mask, fiducial_spectrum, synthesize_alm, synthesize_map, AngularSpectrum,
    SkyMap, SkyMask, SphereGrid,
};
use cmbrbg::vernam::{
    generate_key_matrix, key_sum, table_base, vernam_apply_at, KeyMatrix, MatrixSource,
};
use rayon::prelude::*;

use crate::config::RunConfig;

pub const SKY_TAG: u64 = 0x736b79;
pub const NOISE_TAG: u64 = 0x6e6f6973;
pub const EVE_NOISE_TAG: u64 = 0x657665;
pub const V_TAG: u64 = 0x76;

/// Agreement window for independent 20 000-bit harvests.
pub const EVE_AGREEMENT: (f64, f64) = (0.488, 0.512);
pub const EVE_BITS: usize = 20_000;

// ---------------------------------------------------------------- in-memory stages

pub fn sky_seed(cfg: &RunConfig) -> u64 {
    derive_seed(cfg.seed, SKY_TAG, 0)
}

pub fn noise_seeds(cfg: &RunConfig, tag: u64) -> Vec<u64> {
    (0..cfg.detectors as u64).map(|i| derive_seed(cfg.seed, tag, i)).collect()
}

pub fn sky_mask(cfg: &RunConfig, grid: &SphereGrid) -> Result<Option<SkyMask>> {
    if cfg.mask_zmax >= 1.0 {
        Ok(None)
    } else {
        Ok(Some(SkyMask::latitude_band(grid.clone(), cfg.mask_zmax)?))
    }
}

pub fn f_sky(cfg: &RunConfig) -> Result<f64> {
    let grid = SphereGrid::new(cfg.lmax);
    Ok(sky_mask(cfg, &grid)?.map_or(1.0, |m| m.f_sky()))
}

/// One sky realization seen by several detectors, each with its own noise.
pub fn observe(
    spectrum: &AngularSpectrum,
    grid: &SphereGrid,
    sky_seed: u64,
    noise_seeds: &[u64],
    sigmas: &[f64],
    mask: Option<&SkyMask>,
) -> Result<Vec<SkyMap>> {
    if noise_seeds.len() != sigmas.len() {
        bail!("{} noise seeds for {} detectors", noise_seeds.len(), sigmas.len());
    }
    let sky = synthesize_map(&synthesize_alm(spectrum, sky_seed), grid)?;
    noise_seeds
        .par_iter()
        .zip(sigmas)
        .enumerate()
        .map(|(i, (&seed, &sigma))| {
            let mut map = add_noise(&sky, sigma, seed)?;
            map.detector_id = format!("d{i:02}");
            Ok(match mask {
                Some(m) => apply_mask(&map, m)?,
                None => map,
            })
        })
        .collect()
}

pub fn observe_with_config(cfg: &RunConfig, noise_tag: u64) -> Result<Vec<SkyMap>> {
    let spectrum = fiducial_spectrum(cfg.toy_model(), cfg.lmax)?;
    let grid = SphereGrid::new(cfg.lmax);
    let mask = sky_mask(cfg, &grid)?;
    let sigmas: Vec<f64> = (0..cfg.detectors).map(|i| cfg.sigma_for(i)).collect();
    observe(&spectrum, &grid, sky_seed(cfg), &noise_seeds(cfg, noise_tag), &sigmas, mask.as_ref())
}

pub fn cross_spectra(maps: &[SkyMap], lmax: usize, f_sky: f64) -> Result<CrossSpectrumSet> {
    let coeffs = maps
        .par_iter()
        .map(|m| analyze_map(m, lmax))
        .collect::<cmbrbg::Result<Vec<_>>>()?;
    Ok(CrossSpectrumSet::from_coeffs(&coeffs, f_sky)?)
}

pub fn bin_all(set: &CrossSpectrumSet, scheme: &BinningScheme) -> Result<Vec<BinnedSpectrum>> {
    set.iter()
        .map(|s| Ok(BinnedSpectrum::from_spectrum(s.pair, s.values(), scheme, set.f_sky)?))
        .collect()
}

/// Harvests every pair of one observation in pair order.
pub fn harvest_observation(
    maps: &[SkyMap],
    spectrum: &AngularSpectrum,
    scheme: &BinningScheme,
    f_sky: f64,
    policy: &ExtractionPolicy,
    source: &str,
) -> Result<Harvest> {
    let set = cross_spectra(maps, spectrum.lmax(), f_sky)?;
    let binned = bin_all(&set, scheme)?;
    let model = bin_spectrum(spectrum.values(), scheme)?;
    Ok(harvest_many(&binned, &model, policy, source)?)
}

// ---------------------------------------------------------------- file helpers

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Files in `dir` with the given extension, sorted by name.
pub fn list_files(dir: &Path, ext: &str, stage: &str) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|_| {
        anyhow!("{} not found; run `{stage}` first", dir.display())
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .{ext} files in {}; run `{stage}` first", dir.display());
    }
    Ok(files)
}

pub fn require_file(path: &Path, stage: &str) -> Result<()> {
    if !path.exists() {
        bail!("{} not found; run `{stage}` first", path.display());
    }
    Ok(())
}

fn pair_of(path: &Path) -> Result<(usize, usize)> {
    let header = io::read_header(path)?;
    let value = header
        .iter()
        .find(|(k, _)| k == "pair")
        .map(|(_, v)| v.clone())
        .ok_or_else(|| anyhow!("{}: missing '# pair = i j' header", path.display()))?;
    let ids: Vec<usize> = value
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .with_context(|| format!("{}: bad pair header", path.display()))?;
    match ids.as_slice() {
        [i, j] => Ok((*i, *j)),
        _ => bail!("{}: pair header needs two indices", path.display()),
    }
}

pub fn fiducial_path(out: &Path) -> PathBuf {
    out.join("fiducial.txt")
}

pub fn maps_dir(out: &Path) -> PathBuf {
    out.join("maps")
}

pub fn spectra_dir(out: &Path) -> PathBuf {
    out.join("spectra")
}

pub fn binned_dir(out: &Path) -> PathBuf {
    out.join("binned")
}

// ---------------------------------------------------------------- commands

/// Writes the fiducial spectrum, one map per detector and the effective config.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let spectrum = fiducial_spectrum(cfg.toy_model(), cfg.lmax)?;
    ensure_dir(&maps_dir(&cfg.out))?;
    io::write_spectrum(
        &fiducial_path(&cfg.out),
        spectrum.values(),
        &[
            format!("toy model amplitude = {}", cfg.amplitude),
            format!("toy model l_damp = {}", cfg.l_damp),
        ],
    )?;
    std::fs::write(cfg.out.join("run.cfg"), cfg.to_string())?;
    let maps = observe_with_config(cfg, NOISE_TAG)?;
    let mut paths = Vec::with_capacity(maps.len());
    for (i, map) in maps.iter().enumerate() {
        let path = maps_dir(&cfg.out).join(format!("map_{i:03}.bin"));
        io::write_map(&path, map)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Auto- and cross-spectra of all map pairs; detector i is the i-th map.
pub fn cmd_analyze(maps: &[PathBuf], lmax: usize, out: &Path) -> Result<Vec<PathBuf>> {
    let maps = maps
        .iter()
        .enumerate()
        .map(|(i, p)| Ok(io::read_map(p, format!("d{i:02}"))?))
        .collect::<Result<Vec<_>>>()?;
    // f_sky is attached at binning time.
    let set = cross_spectra(&maps, lmax, 1.0)?;
    let dir = spectra_dir(out);
    ensure_dir(&dir)?;
    let mut paths = Vec::new();
    for s in set.iter() {
        let (i, j) = s.pair;
        let path = dir.join(format!("cl_{i:03}_{j:03}.txt"));
        io::write_spectrum(&path, s.values(), &[format!("pair = {i} {j}")])?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn read_spectra(paths: &[PathBuf], f_sky: f64) -> Result<CrossSpectrumSet> {
    let mut spectra = Vec::with_capacity(paths.len());
    for p in paths {
        spectra.push(PseudoSpectrum::new(pair_of(p)?, io::read_spectrum_values(p)?)?);
    }
    let n = spectra.iter().map(|s| s.pair.0.max(s.pair.1) + 1).max().unwrap_or(0);
    let mut set = CrossSpectrumSet::empty(n, f_sky)?;
    for s in spectra {
        set.insert(s)?;
    }
    Ok(set)
}

pub fn cmd_bin(spectra: &[PathBuf], scheme: &BinningScheme, f_sky: f64, out: &Path) -> Result<Vec<PathBuf>> {
    let set = read_spectra(spectra, f_sky)?;
    let dir = binned_dir(out);
    ensure_dir(&dir)?;
    let mut paths = Vec::new();
    for b in bin_all(&set, scheme)? {
        let (i, j) = b.pair;
        let path = dir.join(format!("bin_{i:03}_{j:03}.txt"));
        io::write_binned(&path, &b, &[])?;
        paths.push(path);
    }
    Ok(paths)
}

fn binned_model(model: &AngularSpectrum, binned: &BinnedSpectrum) -> Result<(BinningScheme, Vec<f64>)> {
    let scheme = make_binning(&binned.ranges)?;
    let values = bin_spectrum(model.values(), &scheme)?;
    Ok((scheme, values))
}

pub struct LikelihoodReport {
    pub text: String,
    /// Sum over pairs with a finite likelihood.
    pub total_binned: f64,
    pub exact: Option<f64>,
    pub noise: NoiseEstimate,
}

/// Binned likelihood of every pair, the exact multi-detector likelihood and
/// the two-step noise estimate.
pub fn cmd_likelihood(binned: &[PathBuf], spectra: &[PathBuf], model: &Path) -> Result<LikelihoodReport> {
    let model = io::read_angular_spectrum(model)?;
    let data = binned.iter().map(|p| Ok(io::read_binned(p)?)).collect::<Result<Vec<_>>>()?;
    let f_sky = data.first().map_or(1.0, |b| b.f_sky);
    let set = read_spectra(spectra, f_sky)?;
    let noise = estimate_noise_and_signal(&set)?;
    let lmax = set.lmax().ok_or_else(|| anyhow!("no spectra"))?;

    let mut text = String::new();
    writeln!(text, "# binned likelihood L = sum_r n_r kappa(C_r, model_r)")?;
    let mut total = 0.0;
    let mut undefined = 0;
    for b in &data {
        let (scheme, signal) = binned_model(&model, b)?;
        let (kind, model_r) = if b.pair.0 == b.pair.1 {
            let noise_r = bin_spectrum(&noise.noise[b.pair.0], &scheme)?;
            ("auto", signal.iter().zip(&noise_r).map(|(s, n)| s + n.max(0.0)).collect())
        } else {
            ("cross", signal)
        };
        let l = binned_loglike(&b.values, &model_r, &b.modes)?;
        if l.is_finite() {
            total += l;
            writeln!(text, "pair {} {} {kind} L = {l:.6}", b.pair.0, b.pair.1)?;
        } else {
            undefined += 1;
            writeln!(text, "pair {} {} {kind} L undefined (non-positive bin)", b.pair.0, b.pair.1)?;
        }
    }
    writeln!(text, "total L = {total:.6} over {} pairs, {undefined} undefined", data.len() - undefined)?;

    // Ĉℓ has rank at most 2ℓ+1, so start where it can be non-singular.
    let n = set.n_detectors;
    let lmin = 2.max(n.saturating_sub(1).div_ceil(2));
    let exact = if lmin <= lmax.min(model.lmax()) {
        let chat = (0..=lmax)
            .map(|l| {
                let mut m = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        m[i * n + j] = set.get(i, j).map_or(0.0, |s| s.get(l));
                    }
                }
                Ok(CovMatrix::from_row_slice(n, &m)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let model_matrix = |l: usize| {
            let s = model.get(l);
            let mut m = vec![s; n * n];
            for i in 0..n {
                m[i * n + i] += noise.noise[i][l].max(0.0);
            }
            CovMatrix::from_row_slice(n, &m)
        };
        exact_loglike(&chat, model_matrix, lmin, lmax.min(model.lmax())).ok()
    } else {
        None
    };
    match exact {
        Some(v) => writeln!(text, "exact -lnL (l = {lmin}..{lmax}, {n} detectors) = {v:.6}")?,
        None => writeln!(text, "exact -lnL undefined (singular or indefinite covariances)")?,
    }

    writeln!(text, "# two-step noise estimate, mean over l = 2..{lmax}")?;
    for i in 0..n {
        let flagged = noise.flagged.iter().filter(|(d, _)| *d == i).count();
        writeln!(
            text,
            "detector {i} mean N = {:.6} flagged = {flagged}",
            noise.mean_noise(i, 2.min(lmax), lmax)
        )?;
    }
    writeln!(text, "# l signal(step 2) model")?;
    for l in 2..=lmax.min(model.lmax()) {
        writeln!(text, "{l} {:.6e} {:.6e}", noise.signal[l], model.get(l))?;
    }
    Ok(LikelihoodReport {
        text,
        total_binned: total,
        exact,
        noise,
    })
}

pub fn cmd_extract(
    binned: &[PathBuf],
    model: &Path,
    policy: &ExtractionPolicy,
    source: &str,
    seeds: Vec<u64>,
    output: &Path,
) -> Result<Harvest> {
    let model = io::read_angular_spectrum(model)?;
    let data = binned.iter().map(|p| Ok(io::read_binned(p)?)).collect::<Result<Vec<_>>>()?;
    let first = data.first().ok_or_else(|| anyhow!("no binned spectra"))?;
    let (_, model_r) = binned_model(&model, first)?;
    if data.iter().any(|b| b.ranges != first.ranges) {
        bail!("binned spectra use different bin ranges");
    }
    let mut harvest = harvest_many(&data, &model_r, policy, source)?;
    harvest.stream.provenance.seeds = seeds;
    io::write_bitstream(output, &harvest.stream)?;
    Ok(harvest)
}

pub struct FipsReport {
    pub text: String,
    pub pass: bool,
}

/// Runs the four tests on the first 20 000 bits of the stream.
pub fn cmd_fips(stream: &Path) -> Result<FipsReport> {
    let s = io::read_bitstream(stream)?;
    if s.len() < fips::SAMPLE_BITS {
        bail!(
            "{} holds {} bits; the FIPS tests need {}",
            stream.display(),
            s.len(),
            fips::SAMPLE_BITS
        );
    }
    let outcomes = fips::fips_suite(&s.truncated(fips::SAMPLE_BITS))?;
    let text: String = outcomes.iter().map(|t| format!("{t}\n")).collect();
    Ok(FipsReport {
        text,
        pass: outcomes.iter().all(|t| t.pass),
    })
}

/// K = V ⊕ W. Without a V file, V comes from the reference generator.
pub fn cmd_keygen(w: &Path, v: Option<&Path>, v_seed: u64, output: &Path, pad_out: Option<&Path>) -> Result<BitStream> {
    let w = io::read_bitstream(w)?;
    let v = match v {
        Some(p) => io::read_bitstream(p)?,
        None => BitStream::reference(v_seed, w.len()),
    };
    let k = combine_keys(&v, &w)?;
    io::write_bitstream(output, &k)?;
    if let Some(p) = pad_out {
        io::write_pad_store(p, &k, 0)?;
    }
    Ok(k)
}

pub enum MatrixInput<'a> {
    Key(&'a str),
    Stream(&'a Path),
}

pub struct MatrixOutcome {
    pub matrix: KeyMatrix,
    pub key_sum: Option<(u64, u64)>,
}

pub fn cmd_matrix(input: MatrixInput<'_>, n: usize, output: &Path) -> Result<MatrixOutcome> {
    let (matrix, key_sum_info) = match input {
        MatrixInput::Key(key) => {
            let s = key_sum(key.as_bytes())?;
            let b = table_base(key.len())?;
            (generate_key_matrix(MatrixSource::KeySum(s), n)?, Some((s, b)))
        }
        MatrixInput::Stream(p) => {
            let stream = io::read_bitstream(p)?;
            (generate_key_matrix(MatrixSource::Stream(&stream), n)?, None)
        }
    };
    io::write_matrix(output, &matrix)?;
    Ok(MatrixOutcome {
        matrix,
        key_sum: key_sum_info,
    })
}

/// XORs `input` with the pad at `offset` (default: the ledger position) and
/// commits the ledger under the store's exclusive lock.
pub fn cmd_vernam(input: &Path, pad: &Path, output: &Path, offset: Option<u64>) -> Result<u64> {
    let data = std::fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let mut store = io::LockedPadStore::open(pad)?;
    let at = offset.unwrap_or(store.ledger.consumed_bits());
    let out = vernam_apply_at(&data, &store.pad, &mut store.ledger, at)?;
    std::fs::write(output, out).with_context(|| format!("writing {}", output.display()))?;
    store.commit()?;
    Ok(at)
}

pub struct EveReport {
    pub text: String,
    pub agreement: f64,
    pub self_agreement: f64,
    pub pass: bool,
}

/// Alice and Eve observe the same sky with independent detector noise and
/// harvest with the same policy; Alice also re-harvests her own maps.
pub fn cmd_eve(cfg: &RunConfig) -> Result<EveReport> {
    cfg.validate()?;
    let spectrum = fiducial_spectrum(cfg.toy_model(), cfg.lmax)?;
    let scheme = cfg.binning()?;
    let f_sky = f_sky(cfg)?;
    let policy = ExtractionPolicy {
        whitening: Whitening::None,
        ..cfg.policy()?
    };
    let alice_maps = observe_with_config(cfg, NOISE_TAG)?;
    let eve_maps = observe_with_config(cfg, EVE_NOISE_TAG)?;
    let alice = harvest_observation(&alice_maps, &spectrum, &scheme, f_sky, &policy, "alice")?;
    let eve = harvest_observation(&eve_maps, &spectrum, &scheme, f_sky, &policy, "eve")?;
    let again = harvest_observation(&alice_maps, &spectrum, &scheme, f_sky, &policy, "alice")?;
    for (who, h) in [("alice", &alice), ("eve", &eve)] {
        if h.stream.len() < EVE_BITS {
            bail!(
                "{who} harvested {} bits, need {EVE_BITS}; raise detectors or lmax",
                h.stream.len()
            );
        }
    }
    let agreement = agreement_fraction(&alice.stream.truncated(EVE_BITS), &eve.stream.truncated(EVE_BITS))?;
    let self_agreement =
        agreement_fraction(&alice.stream.truncated(EVE_BITS), &again.stream.truncated(EVE_BITS))?;
    let pass = (EVE_AGREEMENT.0..=EVE_AGREEMENT.1).contains(&agreement) && self_agreement == 1.0;
    let mut text = String::new();
    writeln!(text, "bits compared = {EVE_BITS}")?;
    writeln!(text, "policy = {}", policy.id())?;
    writeln!(text, "alice/eve agreement = {agreement:.6} (window [{}, {}])", EVE_AGREEMENT.0, EVE_AGREEMENT.1)?;
    writeln!(text, "alice/alice agreement = {self_agreement:.6}")?;
    writeln!(text, "result = {}", if pass { "pass" } else { "fail" })?;
    Ok(EveReport {
        text,
        agreement,
        self_agreement,
        pass,
    })
}

/// Provenance of the harvested CMB stream for a config.
pub fn harvest_provenance(cfg: &RunConfig) -> Result<Provenance> {
    Ok(Provenance::new(
        format!("cmb:seed={}", cfg.seed),
        cfg.policy()?.id(),
        vec![cfg.seed, sky_seed(cfg)],
    ))
}
