//! Transmit and feedback codebooks.
//!
//! A codebook is an ordered, non-empty list of unit-norm vectors of a
//! common dimension. Transmit codebooks hold the beamformers the base
//! station may assign; feedback codebooks hold the channel direction
//! quantisers the terminals index into.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{complex_gaussian, gain_slice, CMat, CVec, SeedSpec, C64};
use crate::textio;

/// Tolerance on `| ||w|| - 1 |` for every codeword.
pub const UNIT_NORM_TOL: f64 = 1e-10;
/// Default tolerance of the tight-frame check.
pub const TIGHT_FRAME_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodebookKind {
    CanonicalOnb,
    Dft,
    RandomUnitary,
    Rvq,
    Union,
    Simplex,
    FileLoaded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    vectors: Vec<CVec>,
    kind: CodebookKind,
    frame_constant: Option<f64>,
}

impl Codebook {
    pub fn new(vectors: Vec<CVec>, kind: CodebookKind) -> Result<Self> {
        let dim = vectors.first().ok_or(Error::EmptyCodebook)?.dim();
        for (index, v) in vectors.iter().enumerate() {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.dim() });
            }
            let norm = v.norm2();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NonUnitVector { index, norm });
            }
        }
        let mut cb = Codebook { vectors, kind, frame_constant: None };
        cb.frame_constant = frame_constant(&cb, TIGHT_FRAME_TOL).ok();
        Ok(cb)
    }

    pub fn canonical_onb(n_t: usize) -> Self {
        let vectors = (0..n_t).map(|i| CVec::basis(n_t, i)).collect();
        Self::new(vectors, CodebookKind::CanonicalOnb).expect("basis vectors are unit norm")
    }

    /// Columns of the unitary DFT matrix, `w_k[j] = exp(-2 pi i jk / n) / sqrt(n)`.
    pub fn dft(n_t: usize) -> Self {
        let scale = 1.0 / (n_t as f64).sqrt();
        let vectors = (0..n_t)
            .map(|k| {
                let entries = (0..n_t)
                    .map(|j| {
                        let angle = -2.0 * std::f64::consts::PI * ((j * k) % n_t) as f64 / n_t as f64;
                        C64::from_polar(scale, angle)
                    })
                    .collect();
                CVec::new(entries).expect("finite entries")
            })
            .collect();
        Self::new(vectors, CodebookKind::Dft).expect("DFT columns are unit norm")
    }

    /// Orthonormalised complex Gaussian matrix (Haar-distributed basis).
    pub fn random_unitary(n_t: usize, seed: SeedSpec) -> Self {
        let mut rng = seed.rng();
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(n_t);
        while basis.len() < n_t {
            let mut v = complex_gaussian(&mut rng, n_t);
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for b in &basis {
                    let proj: C64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= proj * bi;
                    }
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-8 {
                basis.push(v.into_iter().map(|z| z / norm).collect());
            }
        }
        let vectors = basis.into_iter().map(|v| CVec::new(v).expect("finite")).collect();
        Self::new(vectors, CodebookKind::RandomUnitary).expect("orthonormal basis")
    }

    /// `2^bits` i.i.d. isotropic unit vectors. The stream is sequential, so
    /// the codebook for `bits` is a prefix of the codebook for `bits + 1`.
    pub fn rvq(n_t: usize, bits: u32, seed: SeedSpec) -> Self {
        Self::rvq_with_size(n_t, 1usize << bits, seed)
    }

    pub fn rvq_with_size(n_t: usize, size: usize, seed: SeedSpec) -> Self {
        assert!(size >= 1, "RVQ codebook needs at least one codeword");
        let mut rng = seed.rng();
        let mut vectors = Vec::with_capacity(size);
        while vectors.len() < size {
            let v = CVec::new(complex_gaussian(&mut rng, n_t)).expect("finite");
            if let Some(u) = v.normalized() {
                vectors.push(u);
            }
        }
        Self::new(vectors, CodebookKind::Rvq).expect("normalised vectors")
    }

    /// Concatenation `self` followed by `other`; duplicates are kept.
    pub fn union(&self, other: &Codebook) -> Result<Self> {
        let mut vectors = self.vectors.clone();
        vectors.extend(other.vectors.iter().cloned());
        Self::new(vectors, CodebookKind::Union)
    }

    /// Applies `rotation` to every codeword.
    pub fn rotated(&self, rotation: &CMat) -> Result<Self> {
        let vectors = self
            .vectors
            .iter()
            .map(|v| rotation.mul_vec(v).and_then(|w| w.normalized().ok_or(Error::Singular)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(vectors, self.kind)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].dim()
    }

    pub fn vectors(&self) -> &[CVec] {
        &self.vectors
    }

    pub fn get(&self, index: usize) -> Option<&CVec> {
        self.vectors.get(index)
    }

    pub fn kind(&self) -> CodebookKind {
        self.kind
    }

    /// Frame constant computed at construction with [`TIGHT_FRAME_TOL`].
    pub fn frame_constant(&self) -> Option<f64> {
        self.frame_constant
    }

    /// Orthonormal basis, i.e. a tight frame with constant 1 and `n_t` elements.
    pub fn is_unitary(&self) -> bool {
        self.len() == self.dim() && self.frame_constant.is_some_and(|a| (a - 1.0).abs() <= TIGHT_FRAME_TOL)
    }

    /// Whether every codeword of `other` appears in `self` up to a global phase.
    pub fn contains_all(&self, other: &Codebook) -> bool {
        other.dim() == self.dim()
            && other.vectors.iter().all(|w| {
                self.vectors.iter().any(|v| gain_slice(v.as_slice(), w.as_slice()) >= 1.0 - UNIT_NORM_TOL)
            })
    }

    /// `|<nu_j, w_i>|^2` for every feedback codeword `j` (rows) and
    /// transmit codeword `i` (columns).
    pub fn cross_gains(&self, transmit: &Codebook) -> Vec<Vec<f64>> {
        self.vectors
            .iter()
            .map(|nu| transmit.vectors.iter().map(|w| gain_slice(nu.as_slice(), w.as_slice())).collect())
            .collect()
    }

    pub fn to_text(&self) -> String {
        textio::write_records(
            &[("dim", self.dim()), ("size", self.len())],
            Some(&format!("codebook kind={}", kind_name(self.kind))),
            self.vectors.iter().map(|v| v.as_slice()),
        )
    }

    pub fn from_text(path: &Path, text: &str) -> Result<Self> {
        let doc = textio::parse(path, text, &["dim", "size"])?;
        if doc.records.is_empty() {
            return Err(Error::Parse { path: path.to_path_buf(), line: doc.header_line, msg: "size must be at least 1".into() });
        }
        let mut vectors = Vec::with_capacity(doc.records.len());
        for rec in doc.records {
            let v = CVec::new(rec.entries).expect("parser rejects non-finite entries");
            let norm = v.norm2();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: rec.line,
                    msg: format!("codeword has norm {norm}, expected 1 within {UNIT_NORM_TOL:e}"),
                });
            }
            vectors.push(v);
        }
        Self::new(vectors, CodebookKind::FileLoaded)
    }
}

fn kind_name(kind: CodebookKind) -> &'static str {
    match kind {
        CodebookKind::CanonicalOnb => "canonical-onb",
        CodebookKind::Dft => "dft",
        CodebookKind::RandomUnitary => "random-unitary",
        CodebookKind::Rvq => "rvq",
        CodebookKind::Union => "union",
        CodebookKind::Simplex => "simplex",
        CodebookKind::FileLoaded => "file-loaded",
    }
}

/// Frame constant `A` if `sum_w w w^H = A I` entry-wise within `tol`,
/// with `A = |cb| / n_t`.
pub fn frame_constant(cb: &Codebook, tol: f64) -> Result<f64> {
    let n = cb.dim();
    let a = cb.len() as f64 / n as f64;
    let mut max_deviation = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let s: C64 = cb.vectors.iter().map(|w| w[i] * w[j].conj()).sum();
            let target = if i == j { a } else { 0.0 };
            max_deviation = max_deviation.max((s - C64::new(target, 0.0)).norm());
        }
    }
    if max_deviation <= tol {
        Ok(a)
    } else {
        Err(Error::NotTight { max_deviation })
    }
}

pub fn save_codebook(cb: &Codebook, path: &Path) -> Result<()> {
    std::fs::write(path, cb.to_text())?;
    Ok(())
}

pub fn load_codebook(path: &Path) -> Result<Codebook> {
    let text = std::fs::read_to_string(path)?;
    Codebook::from_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::inner;

    fn gram_defect(cb: &Codebook) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in cb.vectors().iter().enumerate() {
            for (j, b) in cb.vectors().iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((inner(a, b).unwrap() - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    #[test]
    fn canonical_onb_two() {
        let cb = Codebook::canonical_onb(2);
        assert_eq!(cb.vectors(), &[CVec::basis(2, 0), CVec::basis(2, 1)]);
        assert_eq!(cb.frame_constant(), Some(1.0));
        assert!(cb.is_unitary());
    }

    #[test]
    fn dft_two_point() {
        let cb = Codebook::dft(2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expect = [[s, s], [s, -s]];
        for (v, e) in cb.vectors().iter().zip(expect) {
            for k in 0..2 {
                assert!((v[k] - C64::new(e[k], 0.0)).norm() < 1e-15);
            }
        }
        assert!(gram_defect(&Codebook::dft(5)) < 1e-12);
    }

    #[test]
    fn random_unitary_is_orthonormal() {
        for s in 0..10 {
            let cb = Codebook::random_unitary(4, SeedSpec::new(11, s));
            assert!(gram_defect(&cb) < 1e-10);
            assert!(cb.is_unitary());
        }
    }

    #[test]
    fn rvq_sizes_and_nesting() {
        assert_eq!(Codebook::rvq(3, 0, SeedSpec::new(1, 1)).len(), 1);
        let cb = Codebook::rvq(4, 4, SeedSpec::new(1, 1));
        assert_eq!(cb.len(), 16);
        assert!(cb.vectors().iter().all(|v| (v.norm2() - 1.0).abs() < 1e-12));
        let big = Codebook::rvq(4, 6, SeedSpec::new(1, 1));
        assert_eq!(&big.vectors()[..16], cb.vectors());
    }

    #[test]
    fn rvq_is_isotropic() {
        let n_t = 4;
        let cb = Codebook::rvq(n_t, 10, SeedSpec::new(5, 0));
        let v = cb.vectors();
        let mut acc = 0.0;
        let mut count = 0usize;
        for i in 0..v.len() {
            for j in (i + 1)..v.len() {
                acc += gain_slice(v[i].as_slice(), v[j].as_slice());
                count += 1;
            }
        }
        let mean = acc / count as f64;
        assert!((mean - 1.0 / n_t as f64).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn frame_constants() {
        assert_eq!(frame_constant(&Codebook::canonical_onb(3), 1e-9).unwrap(), 1.0);
        let two = Codebook::canonical_onb(2).union(&Codebook::dft(2)).unwrap();
        assert!((frame_constant(&two, 1e-9).unwrap() - 2.0).abs() < 1e-12);
        let skewed =
            Codebook::new(vec![CVec::basis(2, 0), CVec::basis(2, 0), CVec::basis(2, 1)], CodebookKind::FileLoaded)
                .unwrap();
        match frame_constant(&skewed, 1e-9) {
            Err(Error::NotTight { max_deviation }) => assert!((max_deviation - 0.5).abs() < 1e-12),
            other => panic!("expected NotTight, got {other:?}"),
        }
        assert_eq!(skewed.frame_constant(), None);
    }

    #[test]
    fn tightness_survives_rotation() {
        let rot = Codebook::random_unitary(3, SeedSpec::new(2, 2));
        let rows: Vec<CVec> = rot.vectors().to_vec();
        let u = CMat::from_rows(&rows).unwrap();
        let frame = Codebook::canonical_onb(3).union(&Codebook::dft(3)).unwrap();
        let turned = frame.rotated(&u).unwrap();
        let a = frame_constant(&turned, 1e-10).unwrap();
        assert!((a - 2.0).abs() < 1e-10);
        let unitary = Codebook::dft(3).rotated(&u).unwrap();
        assert!((frame_constant(&unitary, 1e-10).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn containment_ignores_phase() {
        let c = Codebook::canonical_onb(2);
        let v = Codebook::new(
            vec![CVec::basis(2, 1).scale(C64::new(0.0, 1.0)), CVec::basis(2, 0).scale_real(-1.0)],
            CodebookKind::FileLoaded,
        )
        .unwrap();
        assert!(v.contains_all(&c));
        assert!(!Codebook::dft(2).contains_all(&c));
    }

    #[test]
    fn text_format_contract() {
        let text = Codebook::canonical_onb(2).to_text();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data[0], "dim=2 size=2");
        assert_eq!(data.len(), 3);
        assert!(data[1..].iter().all(|l| l.split_whitespace().count() == 2));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.txt");
        let cb = Codebook::rvq(4, 3, SeedSpec::new(9, 1)).union(&Codebook::dft(4)).unwrap();
        save_codebook(&cb, &path).unwrap();
        let back = load_codebook(&path).unwrap();
        assert_eq!(back.vectors(), cb.vectors());
        assert_eq!(back.kind(), CodebookKind::FileLoaded);
    }

    #[test]
    fn load_rejects_non_unit_and_bad_fields() {
        let p = Path::new("x.txt");
        let err = Codebook::from_text(p, "dim=2 size=1\n0.9+0j 0+0j\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = Codebook::from_text(p, "# c\ndim=2 size=1\n1+0j zz\n").unwrap_err();
        assert!(err.to_string().contains("x.txt:3: field 2"), "{err}");
        let err = Codebook::from_text(p, "dim=2 size=2\n1+0j 0+0j\n").unwrap_err();
        assert!(err.to_string().contains("size=2"), "{err}");
        let err = Codebook::from_text(p, "dim=2 size=1 foo=3\n1+0j 0+0j\n").unwrap_err();
        assert!(err.to_string().contains("unknown header field"), "{err}");
    }
}
