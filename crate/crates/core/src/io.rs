//! On-disk formats shared by the pipeline stages.
//!
//! Text formats use `#` comments; binary formats are little-endian and start
//! with an eight-byte magic.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::entropy::{unpack_bits, BitStream, Provenance};
use crate::error::{Error, Result};
use crate::harmonics::BinnedSpectrum;
use crate::skysim::{AngularSpectrum, SkyMap, SphereGrid};
use crate::vernam::{KeyMatrix, PadLedger};

pub const MAP_MAGIC: &[u8; 8] = b"CMBMAP01";
pub const BITSTREAM_MAGIC: &[u8; 8] = b"CMBBIT01";
pub const PAD_MAGIC: &[u8; 8] = b"CMBPAD01";
pub const BITSTREAM_VERSION: u32 = 1;
pub const PAD_VERSION: u32 = 1;
/// Byte offset of the consumed-bits field inside a pad store.
const PAD_CONSUMED_OFFSET: u64 = 8 + 4 + 8;

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Sequential little-endian reader over a byte buffer.
struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Self { path, bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(self.path, format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, expected: &[u8; 8]) -> Result<()> {
        let found = self.take(8, "magic")?;
        if found != expected {
            return Err(Error::format(
                self.path,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(found),
                    String::from_utf8_lossy(expected)
                ),
            ));
        }
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }
}

// ---------------------------------------------------------------- spectra

/// Writes "ℓ C_ℓ" lines after the given comment lines.
pub fn write_spectrum(path: &Path, values: &[f64], comments: &[String]) -> Result<()> {
    let mut s = String::new();
    for c in comments {
        s.push_str(&format!("# {c}\n"));
    }
    for (l, v) in values.iter().enumerate() {
        s.push_str(&format!("{l} {v:e}\n"));
    }
    write_file(path, s.as_bytes())
}

/// Reads "ℓ C_ℓ" lines; multipoles missing below the largest ℓ are zero.
pub fn read_spectrum_values(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut values: Vec<f64> = Vec::new();
    let mut last: Option<usize> = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |why: &str| Error::format(path, format!("line {}: {why}", n + 1));
        if fields.len() != 2 {
            return Err(bad("expected 'ℓ C_ℓ'"));
        }
        let l: usize = fields[0].parse().map_err(|_| bad("bad multipole"))?;
        let v: f64 = fields[1].parse().map_err(|_| bad("bad value"))?;
        if last.is_some_and(|p| l <= p) {
            return Err(bad("multipoles must be strictly increasing"));
        }
        last = Some(l);
        values.resize(l, 0.0);
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::format(path, "no spectrum lines"));
    }
    Ok(values)
}

pub fn read_angular_spectrum(path: &Path) -> Result<AngularSpectrum> {
    AngularSpectrum::new(read_spectrum_values(path)?).map_err(|e| Error::format(path, e.to_string()))
}

/// `# key = value` comment lines of a text file, in order.
pub fn read_header(path: &Path) -> Result<Vec<(String, String)>> {
    Ok(read_text(path)?
        .lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .filter_map(|c| c.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}

// ---------------------------------------------------------------- maps

pub fn write_map(path: &Path, map: &SkyMap) -> Result<()> {
    let grid = &map.grid;
    let mut out = Vec::with_capacity(20 + 8 * map.pixels.len());
    out.extend_from_slice(MAP_MAGIC);
    out.extend_from_slice(&(grid.lmax() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.n_theta() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.n_phi() as u32).to_le_bytes());
    for p in &map.pixels {
        out.extend_from_slice(&p.to_le_bytes());
    }
    write_file(path, &out)
}

pub fn read_map(path: &Path, detector_id: impl Into<String>) -> Result<SkyMap> {
    let bytes = read_file(path)?;
    let mut c = Cursor::new(path, &bytes);
    c.magic(MAP_MAGIC)?;
    let lmax = c.u32("lmax")? as usize;
    let n_theta = c.u32("n_theta")? as usize;
    let n_phi = c.u32("n_phi")? as usize;
    if n_theta != lmax + 1 || n_phi != 2 * lmax + 1 {
        return Err(Error::format(
            path,
            format!("grid {n_theta}x{n_phi} does not match band limit {lmax}"),
        ));
    }
    let n = n_theta * n_phi;
    if c.rest().len() != 8 * n {
        return Err(Error::format(
            path,
            format!("expected {} pixel bytes, found {}", 8 * n, c.rest().len()),
        ));
    }
    let pixels = (0..n).map(|_| c.f64("pixel")).collect::<Result<Vec<_>>>()?;
    SkyMap::new(SphereGrid::new(lmax), pixels, detector_id)
}

// ---------------------------------------------------------------- binned spectra

pub fn write_binned(path: &Path, binned: &BinnedSpectrum, comments: &[String]) -> Result<()> {
    let mut s = String::new();
    for c in comments {
        s.push_str(&format!("# {c}\n"));
    }
    s.push_str(&format!("# pair = {} {}\n", binned.pair.0, binned.pair.1));
    s.push_str(&format!("# f_sky = {}\n", binned.f_sky));
    s.push_str("# r l_min l_max C_r n_r\n");
    for (r, ((lo, hi), (v, n))) in binned
        .ranges
        .iter()
        .zip(binned.values.iter().zip(&binned.modes))
        .enumerate()
    {
        s.push_str(&format!("{r} {lo} {hi} {v:e} {n:e}\n"));
    }
    write_file(path, s.as_bytes())
}

pub fn read_binned(path: &Path) -> Result<BinnedSpectrum> {
    let text = read_text(path)?;
    let mut pair = (0, 0);
    let mut f_sky = 1.0;
    let mut out = BinnedSpectrum {
        pair,
        ranges: Vec::new(),
        values: Vec::new(),
        modes: Vec::new(),
        f_sky,
    };
    for (n, line) in text.lines().enumerate() {
        let bad = |why: &str| Error::format(path, format!("line {}: {why}", n + 1));
        let line = line.trim();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "pair" => {
                        let ids: Vec<usize> = value
                            .split_whitespace()
                            .map(str::parse)
                            .collect::<std::result::Result<_, _>>()
                            .map_err(|_| bad("bad pair"))?;
                        if ids.len() != 2 {
                            return Err(bad("pair needs two detector indices"));
                        }
                        pair = (ids[0], ids[1]);
                    }
                    "f_sky" => f_sky = value.trim().parse().map_err(|_| bad("bad f_sky"))?,
                    _ => {}
                }
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(bad("expected 'r l_min l_max C_r n_r'"));
        }
        let r: usize = f[0].parse().map_err(|_| bad("bad bin index"))?;
        if r != out.values.len() {
            return Err(bad("bin indices must count up from 0"));
        }
        let lo: usize = f[1].parse().map_err(|_| bad("bad l_min"))?;
        let hi: usize = f[2].parse().map_err(|_| bad("bad l_max"))?;
        out.ranges.push((lo, hi));
        out.values.push(f[3].parse().map_err(|_| bad("bad C_r"))?);
        out.modes.push(f[4].parse().map_err(|_| bad("bad n_r"))?);
    }
    if out.values.is_empty() {
        return Err(Error::format(path, "no bins"));
    }
    out.pair = pair;
    out.f_sky = f_sky;
    Ok(out)
}

// ---------------------------------------------------------------- bit streams

pub fn write_bitstream(path: &Path, stream: &BitStream) -> Result<()> {
    let prov = stream.provenance.to_string();
    let mut out = Vec::new();
    out.extend_from_slice(BITSTREAM_MAGIC);
    out.extend_from_slice(&BITSTREAM_VERSION.to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    out.extend_from_slice(&(prov.len() as u32).to_le_bytes());
    out.extend_from_slice(prov.as_bytes());
    out.extend_from_slice(&stream.to_bytes());
    write_file(path, &out)
}

pub fn read_bitstream(path: &Path) -> Result<BitStream> {
    let bytes = read_file(path)?;
    let mut c = Cursor::new(path, &bytes);
    c.magic(BITSTREAM_MAGIC)?;
    let version = c.u32("version")?;
    if version != BITSTREAM_VERSION {
        return Err(Error::format(path, format!("unsupported bitstream version {version}")));
    }
    let n_bits = c.u64("bit count")? as usize;
    let prov_len = c.u32("provenance length")? as usize;
    let prov = std::str::from_utf8(c.take(prov_len, "provenance")?)
        .map_err(|_| Error::format(path, "provenance is not UTF-8"))?;
    let provenance = Provenance::parse(prov).map_err(|e| Error::format(path, e.to_string()))?;
    let packed = c.rest();
    if packed.len() != n_bits.div_ceil(8) {
        return Err(Error::format(
            path,
            format!("{} packed bytes for {n_bits} bits", packed.len()),
        ));
    }
    Ok(BitStream::new(unpack_bits(packed, n_bits), provenance))
}

// ---------------------------------------------------------------- pad store

pub fn write_pad_store(path: &Path, pad: &BitStream, consumed_bits: u64) -> Result<()> {
    if consumed_bits > pad.len() as u64 {
        return Err(Error::param("consumed bits exceed pad length"));
    }
    let mut out = Vec::new();
    out.extend_from_slice(PAD_MAGIC);
    out.extend_from_slice(&PAD_VERSION.to_le_bytes());
    out.extend_from_slice(&(pad.len() as u64).to_le_bytes());
    out.extend_from_slice(&consumed_bits.to_le_bytes());
    out.extend_from_slice(&pad.to_bytes());
    write_file(path, &out)
}

fn parse_pad(path: &Path, bytes: &[u8]) -> Result<(BitStream, PadLedger)> {
    let mut c = Cursor::new(path, bytes);
    c.magic(PAD_MAGIC)?;
    let version = c.u32("version")?;
    if version != PAD_VERSION {
        return Err(Error::format(path, format!("unsupported pad version {version}")));
    }
    let total = c.u64("total bits")?;
    let consumed = c.u64("consumed bits")?;
    let packed = c.rest();
    if packed.len() as u64 != total.div_ceil(8) {
        return Err(Error::format(path, format!("{} packed bytes for {total} bits", packed.len())));
    }
    let ledger = PadLedger::with_consumed(path.display().to_string(), total, consumed)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let pad = BitStream::new(
        unpack_bits(packed, total as usize),
        Provenance::new(format!("pad:{}", path.display()), "pad", vec![]),
    );
    Ok((pad, ledger))
}

pub fn read_pad_store(path: &Path) -> Result<(BitStream, PadLedger)> {
    parse_pad(path, &read_file(path)?)
}

/// Pad store held open under an exclusive lock until dropped.
pub struct LockedPadStore {
    path: PathBuf,
    file: File,
    pub pad: BitStream,
    pub ledger: PadLedger,
}

impl LockedPadStore {
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        file.lock().map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        let (pad, ledger) = parse_pad(path, &bytes)?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            pad,
            ledger,
        })
    }

    /// Rewrites only the consumed-bits field.
    pub fn commit(&mut self) -> Result<()> {
        let path = &self.path;
        self.file
            .seek(SeekFrom::Start(PAD_CONSUMED_OFFSET))
            .map_err(|e| Error::io(path, e))?;
        self.file
            .write_all(&self.ledger.consumed_bits().to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
        self.file.sync_data().map_err(|e| Error::io(path, e))
    }
}

// ---------------------------------------------------------------- key matrix

pub fn write_matrix(path: &Path, matrix: &KeyMatrix) -> Result<()> {
    let mut s = format!("{}\n", matrix.n());
    for r in 0..matrix.n() {
        let row: Vec<String> = matrix.row(r).iter().map(u32::to_string).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    write_file(path, s.as_bytes())
}

pub fn read_matrix(path: &Path) -> Result<KeyMatrix> {
    let text = read_text(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let n: usize = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| Error::format(path, "first line must hold the dimension"))?;
    let mut entries = Vec::with_capacity(n * n);
    for r in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| Error::format(path, format!("missing row {r}")))?;
        let row: Vec<u32> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(path, format!("row {r} has a bad entry")))?;
        if row.len() != n {
            return Err(Error::format(path, format!("row {r} has {} entries, expected {n}", row.len())));
        }
        entries.extend(row);
    }
    KeyMatrix::new(n, entries).map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::{make_binning, BinnedSpectrum};

    #[test]
    fn spectrum_text() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cl.txt");
        let values = vec![0.0, 0.0, 1.5, 2.25e-7, 3.0];
        write_spectrum(&p, &values, &["fiducial".into()]).unwrap();
        assert_eq!(read_spectrum_values(&p).unwrap(), values);

        std::fs::write(&p, "# gaps\n2 1.0\n4 2.0 # trailing\n").unwrap();
        assert_eq!(read_spectrum_values(&p).unwrap(), vec![0.0, 0.0, 1.0, 0.0, 2.0]);

        std::fs::write(&p, "2 1.0\n2 2.0\n").unwrap();
        assert!(read_spectrum_values(&p).is_err());
        std::fs::write(&p, "2 -1.0\n").unwrap();
        assert!(read_spectrum_values(&p).is_ok());
        assert!(read_angular_spectrum(&p).is_err());
    }

    #[test]
    fn map_binary_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let grid = SphereGrid::new(2);
        let pixels: Vec<f64> = (0..grid.n_pixels()).map(|i| i as f64 - 0.5).collect();
        let map = SkyMap::new(grid, pixels, "d0").unwrap();
        write_map(&p, &map).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..8], b"CMBMAP01");
        assert_eq!(&bytes[8..20], &[2, 0, 0, 0, 3, 0, 0, 0, 5, 0, 0, 0]);
        assert_eq!(bytes.len(), 20 + 15 * 8);
        assert_eq!(&bytes[20..28], &(-0.5f64).to_le_bytes());
        assert_eq!(read_map(&p, "d0").unwrap(), map);

        std::fs::write(&p, b"CMBMAP02xxxx").unwrap();
        let err = read_map(&p, "d0").unwrap_err().to_string();
        assert!(err.contains("m.bin") && err.contains("CMBMAP02"), "{err}");
    }

    #[test]
    fn binned_text() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.txt");
        let scheme = make_binning(&[(2, 3), (4, 9)]).unwrap();
        let b = BinnedSpectrum::from_spectrum((1, 3), &[0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], &scheme, 0.8).unwrap();
        write_binned(&p, &b, &[]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.lines().any(|l| l.starts_with("0 2 3 ")));
        assert_eq!(read_binned(&p).unwrap(), b);
    }

    #[test]
    fn bitstream_binary_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.bit");
        let s = BitStream::new(
            BitStream::from_str_bits("1010 1010 1", "x").bits,
            Provenance::new("alice", "k4-g4-none", vec![7]),
        );
        write_bitstream(&p, &s).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..8], b"CMBBIT01");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..20], &9u64.to_le_bytes());
        let prov = s.provenance.to_string();
        assert_eq!(&bytes[20..24], &(prov.len() as u32).to_le_bytes());
        assert_eq!(&bytes[24 + prov.len()..], &[0xAA, 0x80]);
        assert_eq!(read_bitstream(&p).unwrap(), s);

        std::fs::write(&p, &bytes[..bytes.len() - 1]).unwrap();
        assert!(read_bitstream(&p).is_err());
    }

    #[test]
    fn pad_store_updates_only_consumed_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pad.bin");
        let pad = BitStream::reference(3, 100);
        write_pad_store(&p, &pad, 0).unwrap();
        let before = std::fs::read(&p).unwrap();
        {
            let mut store = LockedPadStore::open(&p).unwrap();
            assert_eq!(store.pad.bits, pad.bits);
            store.ledger.reserve(40).unwrap();
            store.commit().unwrap();
        }
        let after = std::fs::read(&p).unwrap();
        assert_eq!(before.len(), after.len());
        assert_eq!(&after[20..28], &40u64.to_le_bytes());
        assert_eq!(&before[..20], &after[..20]);
        assert_eq!(&before[28..], &after[28..]);
        let (_, ledger) = read_pad_store(&p).unwrap();
        assert_eq!(ledger.consumed_bits(), 40);
    }

    #[test]
    fn matrix_text() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        let m = KeyMatrix::new(2, vec![2, 3, 1, 0]).unwrap();
        write_matrix(&p, &m).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "2\n2 3\n1 0\n");
        assert_eq!(read_matrix(&p).unwrap(), m);
        std::fs::write(&p, "2\n2 3\n").unwrap();
        assert!(read_matrix(&p).is_err());
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_bitstream(Path::new("/nonexistent/x.bit")).unwrap_err().to_string();
        assert!(err.contains("/nonexistent/x.bit"));
    }
}
