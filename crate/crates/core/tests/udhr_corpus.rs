//! The bundled eight-language corpus against frozen golden outputs.
//!
//! Set `NCDKIT_BLESS=1` to rewrite the golden files from the current build.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use ncdkit::cluster::{neighbor_joining, upgma};
use ncdkit::compressor::{Compressor, CompressorError, CompressorProfile, LzReference};
use ncdkit::corpus::{ingest, CorpusManifest, Document};
use ncdkit::distances::{ncd, ncd_max_form};
use ncdkit::matrix::{build_matrix, DistanceMatrix, GammaCache};

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus/udhr")
}

fn docs() -> Vec<Document> {
    ingest(&CorpusManifest::load(&corpus_dir().join("manifest.json")).unwrap()).unwrap()
}

fn golden(name: &str, actual: &str) {
    let path = corpus_dir().join("golden").join(name);
    if std::env::var_os("NCDKIT_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, want, "{name} differs from golden");
}

fn matrix(workers: usize) -> DistanceMatrix {
    build_matrix(&docs(), &LzReference::new(), &GammaCache::in_memory(), workers).unwrap()
}

#[test]
fn corpus_shape() {
    let docs = docs();
    assert_eq!(docs.len(), 8);
    let family = |f: &str| docs.iter().filter(|d| d.tags["family"] == f).count();
    assert_eq!((family("romance"), family("germanic")), (4, 4));
    for d in &docs {
        assert!(d.normalized_bytes.len() >= 1024, "{}", d.id);
        assert!(!d.normalized_bytes.contains(&b'<'), "{} still has markup", d.id);
    }
}

#[test]
fn golden_matrix() {
    golden("ncd-lz-ref.tsv", &matrix(4).to_tsv());
}

#[test]
fn golden_trees() {
    let m = DistanceMatrix::import(&corpus_dir().join("golden/ncd-lz-ref.tsv")).unwrap();
    golden("nj.newick", &neighbor_joining(&m).unwrap().to_newick());
    golden("upgma.newick", &upgma(&m).unwrap().to_newick());
    golden("nj.dot", &neighbor_joining(&m).unwrap().to_dot());
}

#[test]
fn language_families_are_subtrees() {
    let t = neighbor_joining(&matrix(2)).unwrap();
    assert!(t.subtree_check(&["fra", "spa", "ita", "por"]).unwrap());
    assert!(t.subtree_check(&["eng", "deu", "nld", "swe"]).unwrap());
    assert!(!t.subtree_check(&["eng", "fra"]).unwrap());
}

#[test]
fn self_distances_are_small_and_pinned() {
    let c = LzReference::new();
    let want = [
        ("eng", 4, 1830),
        ("deu", 4, 2015),
        ("nld", 4, 2033),
        ("swe", 4, 1947),
        ("fra", 4, 2062),
        ("spa", 4, 1993),
        ("ita", 4, 1977),
        ("por", 4, 1970),
    ];
    for (d, (id, extra, gamma)) in docs().iter().zip(want) {
        assert_eq!(d.id, id);
        let g = c.compressed_size(&d.normalized_bytes).unwrap();
        assert_eq!(g, gamma, "{id}");
        let self_ncd = ncd(&d.normalized_bytes, &d.normalized_bytes, &c).unwrap();
        // Γ(dd) = Γ(d) + extra, so ncd(d,d) = extra / Γ(d).
        assert_eq!(self_ncd.value, extra as f64 / gamma as f64, "{id}");
        assert!(self_ncd.value <= 0.15);
    }
}

#[test]
fn max_form_equals_min_form_on_every_pair() {
    let docs = docs();
    let c = LzReference::new();
    for x in &docs {
        for y in &docs {
            let a = ncd(&x.normalized_bytes, &y.normalized_bytes, &c).unwrap();
            let b = ncd_max_form(&x.normalized_bytes, &y.normalized_bytes, &c).unwrap();
            assert_eq!(a.value.to_bits(), b.value.to_bits(), "{} {}", x.id, y.id);
        }
    }
}

#[test]
fn worker_count_does_not_change_bytes() {
    let one = matrix(1).to_tsv();
    assert_eq!(matrix(4).to_tsv(), one);
    assert_eq!(matrix(8).to_tsv(), one);
}

struct Counting(LzReference, AtomicU64);

impl Compressor for Counting {
    fn profile(&self) -> &CompressorProfile {
        self.0.profile()
    }
    fn compressed_size(&self, data: &[u8]) -> Result<u64, CompressorError> {
        self.1.fetch_add(1, Ordering::SeqCst);
        self.0.compressed_size(data)
    }
}

#[test]
fn invocation_counts() {
    let docs = docs();
    let n = docs.len() as u64;
    let c = Counting(LzReference::new(), AtomicU64::new(0));
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("gamma.log");
    build_matrix(&docs, &c, &GammaCache::open(&log).unwrap(), 8).unwrap();
    // n singles, n(n−1)/2 distinct pairs and n self-pairs for the diagonal.
    assert_eq!(c.1.load(Ordering::SeqCst), n + n * (n - 1) / 2 + n);
    build_matrix(&docs, &c, &GammaCache::open(&log).unwrap(), 8).unwrap();
    assert_eq!(c.1.load(Ordering::SeqCst), n + n * (n - 1) / 2 + n);
}

#[test]
fn golden_round_trip() {
    let path = corpus_dir().join("golden/ncd-lz-ref.tsv");
    let text = std::fs::read_to_string(&path).unwrap();
    let m = DistanceMatrix::import(Path::new(&path)).unwrap();
    assert_eq!(m.to_tsv(), text);
}
