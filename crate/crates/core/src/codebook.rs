//! Shared training-signal sets: chordal geometry, randomized subspace
//! packing, and a versioned JSON persistence format.
//!
//! A codebook holds 2^B matrices from the unitary training family
//! {X : XᴴX = ρ I_T}. The packing objective is the minimum pairwise chordal
//! distance between the spanned subspaces; the optimizer is a deterministic
//! multi-start random search with a pairwise push-apart refinement, so a
//! designed codebook is never worse than random sampling at equal budget.

use std::fs;
use std::path::Path;

use nalgebra::QR;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::CMat;
use crate::rng::{complex_gaussian, substream, StreamPurpose};

const FORMAT_NAME: &str = "mimotrain-codebook";
const FORMAT_VERSION: u32 = 1;
const RESTARTS: usize = 8;
const UNITARITY_RTOL: f64 = 1e-9;

/// An indexed set of 2^bits unitary training matrices with power rho.
#[derive(Debug, Clone)]
pub struct TrainingCodebook {
    pub n_tx: usize,
    pub t_len: usize,
    pub bits: u32,
    pub rho: f64,
    pub seed: u64,
    entries: Vec<CMat>,
    min_chordal: f64,
}

impl TrainingCodebook {
    /// Validating constructor: checks shapes, unitarity, and the entry
    /// count, then caches the pairwise minimum distance.
    pub fn from_entries(
        n_tx: usize,
        t_len: usize,
        bits: u32,
        rho: f64,
        seed: u64,
        entries: Vec<CMat>,
    ) -> Result<Self> {
        if entries.len() != 1usize << bits {
            return Err(Error::Format(format!(
                "codebook with {} bits needs {} entries, got {}",
                bits,
                1usize << bits,
                entries.len()
            )));
        }
        for (k, e) in entries.iter().enumerate() {
            if e.nrows() != n_tx || e.ncols() != t_len {
                return Err(Error::Format(format!(
                    "entry {k} is {}x{}, expected {n_tx}x{t_len}",
                    e.nrows(),
                    e.ncols()
                )));
            }
            check_unitary(e, rho)
                .map_err(|err| Error::Format(format!("entry {k}: {err}")))?;
        }
        let min_chordal = if entries.len() < 2 {
            f64::INFINITY
        } else {
            min_chordal_distance(&entries)?
        };
        Ok(Self {
            n_tx,
            t_len,
            bits,
            rho,
            seed,
            entries,
            min_chordal,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CMat] {
        &self.entries
    }

    pub fn entry(&self, k: usize) -> &CMat {
        &self.entries[k]
    }

    /// Cached minimum pairwise chordal distance; +∞ for a single entry.
    pub fn min_chordal(&self) -> f64 {
        self.min_chordal
    }
}

fn check_unitary(x: &CMat, rho: f64) -> Result<()> {
    let t = x.ncols();
    let mut gram = x.adjoint() * x;
    for k in 0..t {
        gram[(k, k)] -= Complex64::new(rho, 0.0);
    }
    let tol = (UNITARITY_RTOL * rho * t as f64).max(1e-30);
    if gram.norm() > tol {
        return Err(Error::Domain(format!(
            "matrix is not unitary with power {rho}: deviation {:.3e}",
            gram.norm()
        )));
    }
    Ok(())
}

/// Chordal distance between the subspaces spanned by x and y, computed on
/// power-normalized copies so the value is independent of rho:
/// d² = T − ‖X̃ᴴỸ‖_F². Equals (1/√2)‖X̃X̃ᴴ − ỸỸᴴ‖_F and tops out at √T.
pub fn chordal_distance(x: &CMat, y: &CMat) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::Dimension(format!(
            "chordal distance needs equal shapes, got {}x{} and {}x{}",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    let t = x.ncols() as f64;
    let px = x.norm_squared() / t;
    let py = y.norm_squared() / t;
    if px <= 0.0 || py <= 0.0 {
        return Err(Error::Domain("chordal distance of a zero matrix".into()));
    }
    let overlap = (x.adjoint() * y).norm_squared() / (px * py);
    Ok((t - overlap).max(0.0).sqrt())
}

/// Minimum chordal distance over all unordered pairs.
pub fn min_chordal_distance(entries: &[CMat]) -> Result<f64> {
    if entries.len() < 2 {
        return Err(Error::Domain(
            "minimum distance needs at least two entries".into(),
        ));
    }
    let mut best = f64::INFINITY;
    for i in 0..entries.len() {
        for j in (i + 1)..entries.len() {
            best = best.min(chordal_distance(&entries[i], &entries[j])?);
        }
    }
    Ok(best)
}

fn random_orthonormal(n: usize, t: usize, rng: &mut impl rand::Rng) -> CMat {
    let g = CMat::from_fn(n, t, |_, _| complex_gaussian(rng));
    QR::new(g).q()
}

/// One packing attempt: random start, then repeatedly pull the closest pair
/// apart along each other's orthogonal complement. A step is kept only if
/// the global minimum distance improves, so the result never falls below
/// the starting configuration.
fn refine_packing(entries: &mut Vec<CMat>, iterations: usize) -> f64 {
    let m = entries.len();
    let t = entries[0].ncols() as f64;
    let mut dist = vec![vec![0.0f64; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let d = chordal_distance(&entries[i], &entries[j]).expect("orthonormal entries");
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let global_min = |dist: &Vec<Vec<f64>>| -> (f64, usize, usize) {
        let mut best = (f64::INFINITY, 0, 1);
        for i in 0..m {
            for j in (i + 1)..m {
                if dist[i][j] < best.0 {
                    best = (dist[i][j], i, j);
                }
            }
        }
        best
    };

    let (mut current, mut ci, mut cj) = global_min(&dist);
    let mut gamma = 0.5f64;
    for _ in 0..iterations {
        if current * current >= t - 1e-12 {
            break;
        }
        let (i, j) = (ci, cj);
        // move each subspace away from its projection onto the other
        let cross = entries[j].adjoint() * &entries[i];
        let cand_i = QR::new(&entries[i] - &entries[j] * &cross).q();
        let cand_j = QR::new(&entries[j] - &entries[i] * cross.adjoint()).q()
            .map(|z| z * gamma)
            + entries[j].map(|z| z * (1.0 - gamma));
        let cand_j = QR::new(cand_j).q();
        let cand_i = {
            let mixed = cand_i.map(|z| z * gamma) + entries[i].map(|z| z * (1.0 - gamma));
            QR::new(mixed).q()
        };

        let old_i = std::mem::replace(&mut entries[i], cand_i);
        let old_j = std::mem::replace(&mut entries[j], cand_j);
        let mut new_rows = vec![(0.0f64, 0.0f64); m];
        for k in 0..m {
            if k != i {
                new_rows[k].0 = chordal_distance(&entries[k], &entries[i]).expect("orthonormal");
            }
            if k != j && k != i {
                new_rows[k].1 = chordal_distance(&entries[k], &entries[j]).expect("orthonormal");
            }
        }
        new_rows[j].1 = 0.0;
        new_rows[i].1 = new_rows[j].0;

        let old_rows: Vec<(f64, f64)> = (0..m).map(|k| (dist[k][i], dist[k][j])).collect();
        for k in 0..m {
            if k != i {
                dist[k][i] = new_rows[k].0;
                dist[i][k] = new_rows[k].0;
            }
            if k != j {
                let v = if k == i { new_rows[j].0 } else { new_rows[k].1 };
                dist[k][j] = v;
                dist[j][k] = v;
            }
        }
        let (new_min, ni, nj) = global_min(&dist);
        if new_min > current + 1e-15 {
            current = new_min;
            ci = ni;
            cj = nj;
            gamma = 0.5;
        } else {
            entries[i] = old_i;
            entries[j] = old_j;
            for k in 0..m {
                dist[k][i] = old_rows[k].0;
                dist[i][k] = old_rows[k].0;
                dist[k][j] = old_rows[k].1;
                dist[j][k] = old_rows[k].1;
            }
            gamma *= 0.5;
            if gamma < 1e-6 {
                break;
            }
        }
    }
    current
}

/// Design a codebook by randomized subspace packing. Deterministic in all
/// inputs; the refinement budget is split across a fixed number of restarts
/// and the best configuration wins (ties go to the earliest restart).
pub fn design_gsp(
    n_tx: usize,
    t_len: usize,
    bits: u32,
    rho: f64,
    budget: usize,
    seed: u64,
) -> Result<TrainingCodebook> {
    if t_len == 0 || t_len > n_tx {
        return Err(Error::Domain(format!(
            "subspace dimension {t_len} must lie in 1..={n_tx}"
        )));
    }
    if rho <= 0.0 {
        return Err(Error::Domain(format!("training power must be > 0, got {rho}")));
    }
    if bits >= usize::BITS {
        return Err(Error::Domain(format!("codebook size 2^{bits} is not representable")));
    }
    let count = 1usize << bits;
    let scale = Complex64::new(rho.sqrt(), 0.0);

    if count == 1 {
        let mut rng = substream(seed, &[0, StreamPurpose::CodebookDesign.code()]);
        let entry = random_orthonormal(n_tx, t_len, &mut rng).map(|z| z * scale);
        return TrainingCodebook::from_entries(n_tx, t_len, bits, rho, seed, vec![entry]);
    }

    let mut best: Option<(f64, Vec<CMat>)> = None;
    let per_restart = (budget / RESTARTS).max(1);
    for restart in 0..RESTARTS as u64 {
        let mut rng = substream(seed, &[restart, StreamPurpose::CodebookDesign.code()]);
        let mut entries: Vec<CMat> = (0..count)
            .map(|_| random_orthonormal(n_tx, t_len, &mut rng))
            .collect();
        let score = refine_packing(&mut entries, per_restart);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, entries));
        }
    }
    let (_, entries) = best.expect("at least one restart");
    let entries = entries
        .into_iter()
        .map(|e| e.map(|z| z * scale))
        .collect();
    TrainingCodebook::from_entries(n_tx, t_len, bits, rho, seed, entries)
}

#[derive(Serialize, Deserialize)]
struct CodebookFile {
    format: String,
    version: u32,
    n_tx: usize,
    t_len: usize,
    bits: u32,
    rho: f64,
    seed: u64,
    /// null encodes the +∞ sentinel of a single-entry codebook
    min_chordal: Option<f64>,
    /// entries[k][row][col] = [re, im]
    entries: Vec<Vec<Vec<[f64; 2]>>>,
}

/// Write a codebook as versioned, diffable JSON.
pub fn save_codebook(cb: &TrainingCodebook, path: &Path) -> Result<()> {
    let file = CodebookFile {
        format: FORMAT_NAME.to_string(),
        version: FORMAT_VERSION,
        n_tx: cb.n_tx,
        t_len: cb.t_len,
        bits: cb.bits,
        rho: cb.rho,
        seed: cb.seed,
        min_chordal: cb.min_chordal.is_finite().then_some(cb.min_chordal),
        entries: cb
            .entries
            .iter()
            .map(|e| {
                (0..e.nrows())
                    .map(|r| (0..e.ncols()).map(|c| [e[(r, c)].re, e[(r, c)].im]).collect())
                    .collect()
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Read a codebook back, re-validating every invariant including the cached
/// minimum distance.
pub fn load_codebook(path: &Path) -> Result<TrainingCodebook> {
    let text = fs::read_to_string(path)?;
    let file: CodebookFile = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("unreadable codebook file: {e}")))?;
    if file.format != FORMAT_NAME {
        return Err(Error::Format(format!(
            "not a codebook file (format field is {:?})",
            file.format
        )));
    }
    if file.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported codebook version {} (this build reads {})",
            file.version, FORMAT_VERSION
        )));
    }
    let entries: Vec<CMat> = file
        .entries
        .iter()
        .map(|e| {
            CMat::from_fn(file.n_tx, file.t_len, |r, c| {
                let [re, im] = e
                    .get(r)
                    .and_then(|row| row.get(c))
                    .copied()
                    .unwrap_or([f64::NAN, f64::NAN]);
                Complex64::new(re, im)
            })
        })
        .collect();
    for (k, e) in file.entries.iter().enumerate() {
        if e.len() != file.n_tx || e.iter().any(|row| row.len() != file.t_len) {
            return Err(Error::Format(format!(
                "entry {k} has ragged shape, expected {}x{}",
                file.n_tx, file.t_len
            )));
        }
    }
    let cb = TrainingCodebook::from_entries(
        file.n_tx, file.t_len, file.bits, file.rho, file.seed, entries,
    )?;
    let stored = file.min_chordal.unwrap_or(f64::INFINITY);
    let recomputed = cb.min_chordal();
    let consistent = if stored.is_finite() || recomputed.is_finite() {
        (stored - recomputed).abs() <= 1e-9
    } else {
        true
    };
    if !consistent {
        return Err(Error::Format(format!(
            "stored minimum distance {stored} disagrees with recomputed {recomputed}"
        )));
    }
    Ok(cb)
}

/// Convenience accessor used by tests and the CLI inspect command.
pub fn entry_power(x: &CMat) -> f64 {
    if x.ncols() == 0 {
        return 0.0;
    }
    x.norm_squared() / x.ncols() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::hermitize;

    fn unit(n: usize, k: usize) -> CMat {
        let mut v = CMat::zeros(n, 1);
        v[(k, 0)] = Complex64::new(1.0, 0.0);
        v
    }

    // definition-level oracle: (1/sqrt 2) * frobenius norm of the projector gap
    fn chordal_by_projectors(x: &CMat, y: &CMat) -> f64 {
        let t = x.ncols() as f64;
        let px = (x.norm_squared() / t).sqrt();
        let py = (y.norm_squared() / t).sqrt();
        let xn = x.map(|z| z / Complex64::new(px, 0.0));
        let yn = y.map(|z| z / Complex64::new(py, 0.0));
        let gap = &xn * xn.adjoint() - &yn * yn.adjoint();
        gap.norm() / 2.0f64.sqrt()
    }

    #[test]
    fn distance_axioms() {
        let x = unit(2, 0);
        let y = unit(2, 1);
        assert_eq!(chordal_distance(&x, &x).unwrap(), 0.0);
        assert!((chordal_distance(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            chordal_distance(&x, &y).unwrap(),
            chordal_distance(&y, &x).unwrap()
        );
    }

    #[test]
    fn distance_matches_projector_definition() {
        for seed in 0..20u64 {
            let mut rng = substream(seed, &[500]);
            let x = random_orthonormal(6, 2, &mut rng).map(|z| z * Complex64::new(3.0, 0.0));
            let y = random_orthonormal(6, 2, &mut rng);
            let fast = chordal_distance(&x, &y).unwrap();
            let slow = chordal_by_projectors(&x, &y);
            assert!((fast - slow).abs() < 1e-10, "seed {seed}: {fast} vs {slow}");
            assert!(fast <= 2.0f64.sqrt() + 1e-12);
        }
    }

    #[test]
    fn distance_is_rotation_invariant() {
        let mut rng = substream(3, &[501]);
        let x = random_orthonormal(5, 2, &mut rng);
        let y = random_orthonormal(5, 2, &mut rng);
        let q = {
            let g = CMat::from_fn(2, 2, |_, _| complex_gaussian(&mut rng));
            QR::new(g).q()
        };
        let base = chordal_distance(&x, &y).unwrap();
        let rotated = chordal_distance(&(&x * q), &y).unwrap();
        assert!((base - rotated).abs() < 1e-10);
    }

    #[test]
    fn distance_rejects_bad_inputs() {
        let x = unit(2, 0);
        let y = unit(3, 0);
        assert!(matches!(chordal_distance(&x, &y), Err(Error::Dimension(_))));
        let z = CMat::zeros(2, 1);
        assert!(matches!(chordal_distance(&x, &z), Err(Error::Domain(_))));
    }

    #[test]
    fn min_distance_scan() {
        let e1 = unit(3, 0);
        let e2 = unit(3, 1);
        let dup = unit(3, 0);
        assert!((min_chordal_distance(&[e1.clone(), e2.clone()]).unwrap() - 1.0).abs() < 1e-12);
        assert!(min_chordal_distance(&[e1.clone(), e2, dup]).unwrap() < 1e-12);
        assert!(min_chordal_distance(&[e1]).is_err());
    }

    #[test]
    fn min_distance_matches_independent_scan() {
        let mut rng = substream(9, &[502]);
        let entries: Vec<CMat> = (0..8).map(|_| random_orthonormal(6, 2, &mut rng)).collect();
        let fast = min_chordal_distance(&entries).unwrap();
        let mut slow = f64::INFINITY;
        for i in 0..entries.len() {
            for j in (i + 1)..entries.len() {
                slow = slow.min(chordal_by_projectors(&entries[i], &entries[j]));
            }
        }
        assert!((fast - slow).abs() < 1e-10);
    }

    #[test]
    fn design_two_lines_reaches_orthogonality() {
        let cb = design_gsp(2, 1, 1, 1.0, 400, 7).unwrap();
        assert!(
            (cb.min_chordal() - 1.0).abs() < 1e-3,
            "min distance {}",
            cb.min_chordal()
        );
    }

    #[test]
    fn design_beats_its_own_random_start() {
        let seed = 11;
        let cb = design_gsp(16, 2, 4, 1.0, 800, seed).unwrap();
        // the first restart's unrefined draw is the natural random baseline
        let mut rng = substream(seed, &[0, StreamPurpose::CodebookDesign.code()]);
        let baseline: Vec<CMat> = (0..16).map(|_| random_orthonormal(16, 2, &mut rng)).collect();
        let baseline_min = min_chordal_distance(&baseline).unwrap();
        assert!(
            cb.min_chordal() >= baseline_min - 1e-12,
            "{} vs baseline {baseline_min}",
            cb.min_chordal()
        );
        assert!(cb.min_chordal() > baseline_min, "refinement should improve");
    }

    #[test]
    fn design_is_deterministic_and_unitary() {
        let a = design_gsp(8, 2, 3, 2.5, 200, 5).unwrap();
        let b = design_gsp(8, 2, 3, 2.5, 200, 5).unwrap();
        for (x, y) in a.entries().iter().zip(b.entries()) {
            assert_eq!(x, y);
        }
        for e in a.entries() {
            let gram = e.adjoint() * e;
            let target = CMat::identity(2, 2) * Complex64::new(2.5, 0.0);
            assert!((hermitize(&gram) - target).norm() < 1e-9);
        }
    }

    #[test]
    fn design_degenerate_and_invalid_cases() {
        let single = design_gsp(4, 2, 0, 1.0, 100, 1).unwrap();
        assert_eq!(single.len(), 1);
        assert!(single.min_chordal().is_infinite());

        assert!(design_gsp(4, 5, 2, 1.0, 100, 1).is_err());
        assert!(design_gsp(4, 0, 2, 1.0, 100, 1).is_err());
        assert!(design_gsp(4, 2, 2, 0.0, 100, 1).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.json");
        let cb = design_gsp(6, 2, 2, 3.0, 200, 13).unwrap();
        save_codebook(&cb, &path).unwrap();
        let loaded = load_codebook(&path).unwrap();
        assert_eq!(loaded.n_tx, cb.n_tx);
        assert_eq!(loaded.bits, cb.bits);
        for (x, y) in loaded.entries().iter().zip(cb.entries()) {
            assert_eq!(x, y);
        }

        let second = dir.path().join("cb2.json");
        save_codebook(&loaded, &second).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&second).unwrap());
    }

    #[test]
    fn load_rejects_tampering_and_versions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.json");
        let cb = design_gsp(4, 1, 1, 1.0, 100, 3).unwrap();
        save_codebook(&cb, &path).unwrap();

        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        v["entries"][0][0][0][0] = serde_json::json!(5.0);
        fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
        assert!(matches!(load_codebook(&path), Err(Error::Format(_))));

        save_codebook(&cb, &path).unwrap();
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        v["version"] = serde_json::json!(99);
        fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
        match load_codebook(&path) {
            Err(Error::Format(msg)) => assert!(msg.contains("version")),
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn single_entry_codebook_round_trips_infinite_sentinel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("single.json");
        let cb = design_gsp(4, 2, 0, 1.0, 50, 21).unwrap();
        save_codebook(&cb, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"min_chordal\": null"));
        let loaded = load_codebook(&path).unwrap();
        assert!(loaded.min_chordal().is_infinite());
    }

    #[test]
    fn from_entries_validates() {
        let good = vec![unit(3, 0), unit(3, 1)];
        assert!(TrainingCodebook::from_entries(3, 1, 1, 1.0, 0, good).is_ok());

        let wrong_count = vec![unit(3, 0)];
        assert!(TrainingCodebook::from_entries(3, 1, 1, 1.0, 0, wrong_count).is_err());

        let scaled = vec![unit(3, 0).map(|z| z * 2.0), unit(3, 1)];
        assert!(TrainingCodebook::from_entries(3, 1, 1, 1.0, 0, scaled).is_err());
    }

    #[test]
    fn entry_power_reads_rho() {
        let cb = design_gsp(5, 2, 1, 4.0, 100, 2).unwrap();
        for e in cb.entries() {
            assert!((entry_power(e) - 4.0).abs() < 1e-9);
        }
    }
}
